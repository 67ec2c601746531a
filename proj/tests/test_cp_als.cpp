#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cpstream/cp_als.hpp"
#include "cpstream/eval.hpp"
#include "cpstream/rng.hpp"
#include "cpstream/tensor.hpp"

using namespace cpstream;

namespace {

Vector random_vector(std::int64_t n, rng::Substream& s, double lo = -1.0, double hi = 1.0) {
    Vector v(n);
    for (std::int64_t i = 0; i < n; ++i) v(i) = lo + (hi - lo) * s.uniform01();
    return v;
}

KruskalModel random_model(const std::vector<std::int64_t>& dims, int rank, std::uint64_t seed) {
    rng::Substream s(seed);
    KruskalModel m;
    for (std::int64_t d : dims) {
        Matrix f(d, rank);
        s.fill_uniform(f);
        m.factors.push_back(f);
    }
    m.lambda = Vector::Ones(rank);
    return m;
}

// Normal-equations oracle for one mode update: assemble the Khatri-Rao chain
// column by column with explicit Kronecker loops and solve the tall
// least-squares system directly. Independent of the production MTTKRP path.
Matrix oracle_mode_update(const DenseTensor& t, const std::vector<Matrix>& factors, int mode) {
    const int order = t.order();
    const int rank = static_cast<int>(factors.front().cols());
    std::int64_t chain_rows = 1;
    for (int n = 0; n < order; ++n)
        if (n != mode) chain_rows *= t.dim(n);

    Matrix chain(chain_rows, rank);
    for (int r = 0; r < rank; ++r) {
        Vector col = Vector::Ones(1);
        for (int n = order - 1; n >= 0; --n) {
            if (n == mode) continue;
            const Vector f = factors[static_cast<std::size_t>(n)].col(r);
            Vector next(col.size() * f.size());
            for (Eigen::Index i = 0; i < col.size(); ++i)
                for (Eigen::Index j = 0; j < f.size(); ++j) next(i * f.size() + j) = col(i) * f(j);
            col = next;
        }
        chain.col(r) = col;
    }
    const Matrix unfolding = matricize(t, mode);
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(chain);
    return cod.solve(unfolding.transpose()).transpose();
}

}  // namespace

TEST_CASE("cp_als recovers a noiseless rank-1 tensor") {
    rng::Substream s(17);
    const Vector a = random_vector(4, s, 0.1, 1.0);
    const Vector b = random_vector(4, s, 0.1, 1.0);
    const Vector c = random_vector(4, s, 0.1, 1.0);
    const DenseTensor t = rank1_outer({a, b, c});

    AlsConfig cfg;
    cfg.rank = 1;
    cfg.seed = 99;
    const AlsResult res = cp_als(t, cfg);
    CHECK(res.fit >= 0.999999);
}

TEST_CASE("cp_als on an indicator tensor") {
    Vector e1 = Vector::Zero(3);
    e1(0) = 1.0;
    const DenseTensor t = rank1_outer({e1, e1, e1});
    AlsConfig cfg;
    cfg.rank = 1;
    cfg.seed = 3;
    const AlsResult res = cp_als(t, cfg);
    CHECK(res.model.lambda(0) == doctest::Approx(1.0).epsilon(1e-9));
    for (const Matrix& f : res.model.factors) {
        CHECK(std::abs(f(0, 0)) == doctest::Approx(1.0).epsilon(1e-8));
        CHECK(std::abs(f(1, 0)) < 1e-7);
        CHECK(std::abs(f(2, 0)) < 1e-7);
    }
}

TEST_CASE("cp_als recovers well-separated rank-3 factors") {
    // Components built from +-1 ranges are nearly orthogonal at this size.
    rng::Substream s(5);
    KruskalModel truth;
    for (int n = 0; n < 3; ++n) {
        Matrix f(10, 3);
        for (Eigen::Index i = 0; i < f.rows(); ++i)
            for (Eigen::Index j = 0; j < f.cols(); ++j) f(i, j) = s.uniform01() * 2.0 - 1.0;
        truth.factors.push_back(f);
    }
    truth.lambda = Vector::Ones(3);
    const DenseTensor t = reconstruct(truth);

    AlsConfig cfg;
    cfg.rank = 3;
    cfg.seed = 1234;
    cfg.max_iters = 300;
    const AlsResult res = cp_als(t, cfg);
    const auto scores = congruence(truth, res.model);
    for (double sc : scores) CHECK(sc >= 0.99);
}

TEST_CASE("cp_als error paths") {
    CHECK_THROWS_AS(cp_als(DenseTensor::zeros({3, 3, 3}), AlsConfig{}), NumericError);

    AlsConfig big;
    big.rank = 5;  // exceeds 2*2 = 4 for every mode of a 2x2x2 tensor
    DenseTensor small({2, 2, 2}, std::vector<double>(8, 1.0));
    CHECK_THROWS_AS(cp_als(small, big), ConfigError);
}

TEST_CASE("cp_als is deterministic given the seed") {
    const DenseTensor t = reconstruct(random_model({5, 4, 3}, 2, 8));
    AlsConfig cfg;
    cfg.rank = 2;
    cfg.seed = 777;
    cfg.max_iters = 20;
    const AlsResult r1 = cp_als(t, cfg);
    const AlsResult r2 = cp_als(t, cfg);
    CHECK(r1.fit == r2.fit);
    for (int n = 0; n < 3; ++n) CHECK(r1.model.factors[n] == r2.model.factors[n]);
    CHECK(r1.model.lambda == r2.model.lambda);
}

TEST_CASE("ALS residual is non-increasing across sweeps") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL}) {
        DenseTensor t = reconstruct(random_model({5, 5, 5}, 3, seed));
        rng::Substream noise(seed + 100);
        for (double& v : t.values()) v += 0.01 * (noise.uniform01() - 0.5);

        AlsConfig cfg;
        cfg.rank = 2;
        cfg.seed = seed;
        cfg.n_restarts = 1;
        cfg.max_iters = 60;
        const AlsResult res = cp_als(t, cfg);
        REQUIRE(res.residual_history.size() >= 2);
        const double slack = 1e-9 * frobenius_norm(t);
        for (std::size_t i = 1; i < res.residual_history.size(); ++i)
            CHECK(res.residual_history[i] <= res.residual_history[i - 1] + slack);
    }
}

TEST_CASE("factor columns are unit norm and normalization preserves reconstruct") {
    const DenseTensor t = reconstruct(random_model({6, 5, 4}, 3, 21));
    AlsConfig cfg;
    cfg.rank = 3;
    cfg.seed = 4;
    cfg.max_iters = 25;
    const AlsResult res = cp_als(t, cfg);
    for (const Matrix& f : res.model.factors)
        for (int c = 0; c < res.model.rank(); ++c)
            CHECK(f.col(c).norm() == doctest::Approx(1.0).epsilon(1e-12));

    // Un-normalized copy reconstructs to the same tensor.
    KruskalModel folded = res.model;
    for (int n = 0; n < folded.order(); ++n) {
        for (int c = 0; c < folded.rank(); ++c) {
            const double share = std::pow(folded.lambda(c), 1.0 / folded.order());
            folded.factors[static_cast<std::size_t>(n)].col(c) *= share;
        }
    }
    folded.lambda = Vector::Ones(folded.rank());
    KruskalModel renorm = folded;
    renorm.normalize();

    const DenseTensor r1 = reconstruct(folded);
    const DenseTensor r2 = reconstruct(renorm);
    const double scale = frobenius_norm(r1);
    for (std::size_t i = 0; i < r1.values().size(); ++i)
        CHECK(std::abs(r1.values()[i] - r2.values()[i]) <= 1e-9 * scale);
}

TEST_CASE("mode update equals the normal-equations oracle") {
    rng::Substream s(33);
    for (int trial = 0; trial < 10; ++trial) {
        DenseTensor t = DenseTensor::zeros({3, 3, 3});
        for (double& v : t.values()) v = s.uniform01() * 2 - 1;
        std::vector<Matrix> factors;
        for (int n = 0; n < 3; ++n) {
            Matrix f(3, 2);
            s.fill_uniform(f);
            factors.push_back(f);
        }
        for (int mode = 0; mode < 3; ++mode) {
            const Matrix got = als_solve_mode(matricize(t, mode), factors, mode);
            const Matrix want = oracle_mode_update(t, factors, mode);
            CHECK((got - want).cwiseAbs().maxCoeff() < 1e-8);
        }
    }
}

TEST_CASE("reconstruct basics") {
    rng::Substream s(2);
    const Vector a = random_vector(3, s), b = random_vector(4, s), c = random_vector(2, s);
    KruskalModel m;
    m.factors = {Matrix(a), Matrix(b), Matrix(c)};
    m.lambda = Vector::Ones(1);
    const DenseTensor rec = reconstruct(m);
    const DenseTensor direct = rank1_outer({a, b, c});
    REQUIRE(rec.shape() == direct.shape());
    for (std::size_t i = 0; i < rec.values().size(); ++i)
        CHECK(rec.values()[i] == doctest::Approx(direct.values()[i]).epsilon(1e-14));

    m.lambda(0) = 0.0;
    const DenseTensor zero = reconstruct(m);
    for (double v : zero.values()) CHECK(v == 0.0);
}

TEST_CASE("cp_als round trip at exact rank") {
    const DenseTensor t = reconstruct(random_model({6, 6, 6}, 2, 77));
    AlsConfig cfg;
    cfg.rank = 2;
    cfg.seed = 5;
    cfg.max_iters = 400;
    cfg.rel_tol = 1e-12;
    const AlsResult res = cp_als(t, cfg);
    CHECK(model_fit(t, res.model) >= 0.9999);
}

TEST_CASE("model_fit") {
    rng::Substream s(6);
    KruskalModel m = random_model({3, 3, 3}, 2, 14);
    m.normalize();
    const DenseTensor t = reconstruct(m);
    CHECK(model_fit(t, m) == doctest::Approx(1.0).epsilon(1e-12));

    KruskalModel zero = m;
    zero.lambda = Vector::Zero(2);
    CHECK(model_fit(t, zero) == doctest::Approx(0.0).epsilon(1e-12));

    // |t| = 10 with residual norm 1: fit 0.9.
    Vector e1 = Vector::Zero(2);
    e1(0) = 1.0;
    KruskalModel point;
    point.factors = {Matrix(e1), Matrix(e1), Matrix(e1)};
    point.lambda = Vector::Ones(1) * 9.0;
    DenseTensor target = DenseTensor::zeros({2, 2, 2});
    target.values()[0] = 10.0;
    CHECK(model_fit(target, point) == doctest::Approx(0.9).epsilon(1e-12));

    CHECK_THROWS_AS(model_fit(DenseTensor::zeros({2, 2, 2}), point), NumericError);
}

TEST_CASE("permutation and scaling gauge leaves reconstruct unchanged") {
    KruskalModel m = random_model({4, 3, 5}, 3, 50);
    m.lambda << 2.0, 0.5, 1.5;
    const DenseTensor base = reconstruct(m);

    // Permute columns and rescale each mode positively, compensating in
    // lambda so the model is unchanged as a sum of rank-one terms.
    const std::vector<int> perm = {2, 0, 1};
    const std::vector<std::vector<double>> scales = {{2.0, 4.0, 0.5}, {0.25, 1.0, 8.0}, {1.0, 0.5, 2.0}};
    KruskalModel g;
    g.lambda = Vector(3);
    g.factors.assign(3, Matrix());
    for (int n = 0; n < 3; ++n) {
        Matrix f(m.factors[static_cast<std::size_t>(n)].rows(), 3);
        for (int c = 0; c < 3; ++c)
            f.col(c) = m.factors[static_cast<std::size_t>(n)].col(perm[static_cast<std::size_t>(c)]) *
                       scales[static_cast<std::size_t>(n)][static_cast<std::size_t>(c)];
        g.factors[static_cast<std::size_t>(n)] = f;
    }
    for (int c = 0; c < 3; ++c) {
        double comp = 1.0;
        for (int n = 0; n < 3; ++n) comp *= scales[static_cast<std::size_t>(n)][static_cast<std::size_t>(c)];
        g.lambda(c) = m.lambda(perm[static_cast<std::size_t>(c)]) / comp;
    }
    const DenseTensor permuted = reconstruct(g);
    const double scale = frobenius_norm(base);
    for (std::size_t i = 0; i < base.values().size(); ++i)
        CHECK(std::abs(base.values()[i] - permuted.values()[i]) <= 1e-12 * scale);
}
