#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Dense>

namespace cpstream::rng {

/// SplitMix64 finalizer. Used to turn (seed, path) tuples into well-mixed
/// substream seeds so that the draw order of independent streams can never
/// depend on thread scheduling.
constexpr std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derive a substream seed from a master seed and a key path, e.g.
/// derive(master, {kind, replica, mode, batch}).
inline std::uint64_t derive(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    std::uint64_t z = mix(master);
    for (std::uint64_t k : path) {
        z = mix(z ^ mix(k));
    }
    return z;
}

// Key kinds for the derivation paths used across the project. Values are
// arbitrary but frozen: changing them changes every seeded artifact.
enum : std::uint64_t {
    kNontemporalShared = 1,
    kNontemporalPrivate = 2,
    kTemporalShared = 3,
    kTemporalPrivate = 4,
    kAlsRestart = 5,
    kAlsFactor = 6,
    kAlsRescue = 7,
    kStreamAls = 8,
    kSynthFactor = 9,
    kSynthNoise = 10,
    kAlsGevd = 11,
};

/// Deterministic uniform/Gaussian stream. mt19937_64 has a standardized
/// output sequence and the double conversions below avoid the
/// implementation-defined std::uniform_real_distribution, so draws are
/// bit-reproducible across compilers.
class Substream {
public:
    explicit Substream(std::uint64_t seed) : eng_(seed) {}

    /// Uniform on [0,1) with 53 random bits.
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    /// Box-Muller normal draw; pairs are consumed in a fixed order.
    double normal(double mu, double sigma) {
        if (have_spare_) {
            have_spare_ = false;
            return mu + sigma * spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return mu + sigma * r * std::cos(theta);
    }

    /// Fill a matrix with uniform(0,1) entries, column by column.
    void fill_uniform(Eigen::Ref<Eigen::MatrixXd> block) {
        for (Eigen::Index c = 0; c < block.cols(); ++c)
            for (Eigen::Index r = 0; r < block.rows(); ++r)
                block(r, c) = uniform01();
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace cpstream::rng
