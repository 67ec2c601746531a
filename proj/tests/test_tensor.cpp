#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "cpstream/rng.hpp"
#include "cpstream/tensor.hpp"

using namespace cpstream;

namespace {

// Brute-force unfolding straight from the definition: element (i_0..i_{N-1})
// lands at row i_mode and the column packs the remaining indices ascending,
// lowest mode fastest. Independent of the production stride arithmetic.
Matrix naive_matricize(const DenseTensor& t, int mode) {
    const auto& dims = t.shape().dims;
    const int order = t.order();
    std::int64_t cols = 1;
    for (int k = 0; k < order; ++k)
        if (k != mode) cols *= dims[static_cast<std::size_t>(k)];
    Matrix m = Matrix::Zero(dims[static_cast<std::size_t>(mode)], cols);

    std::vector<std::int64_t> idx(static_cast<std::size_t>(order), 0);
    bool done = t.num_elements() == 0;
    while (!done) {
        std::int64_t col = 0, stride = 1;
        for (int k = 0; k < order; ++k) {
            if (k == mode) continue;
            col += idx[static_cast<std::size_t>(k)] * stride;
            stride *= dims[static_cast<std::size_t>(k)];
        }
        m(idx[static_cast<std::size_t>(mode)], col) = t.at(idx);
        done = true;
        for (std::size_t k = 0; k < idx.size(); ++k) {
            if (++idx[k] < dims[k]) {
                done = false;
                break;
            }
            idx[k] = 0;
        }
    }
    return m;
}

// Direct triple-loop contraction for 3-mode mode products.
DenseTensor naive_mode_product_3(const DenseTensor& t, const Matrix& m, int mode) {
    REQUIRE(t.order() == 3);
    Shape s = t.shape();
    s.dims[static_cast<std::size_t>(mode)] = m.rows();
    DenseTensor out = DenseTensor::zeros(s);
    for (std::int64_t i = 0; i < s.dims[0]; ++i)
        for (std::int64_t j = 0; j < s.dims[1]; ++j)
            for (std::int64_t k = 0; k < s.dims[2]; ++k) {
                double acc = 0.0;
                for (std::int64_t z = 0; z < t.dim(mode); ++z) {
                    std::vector<std::int64_t> src = {i, j, k};
                    src[static_cast<std::size_t>(mode)] = z;
                    std::vector<std::int64_t> dst = {i, j, k};
                    acc += m(dst[static_cast<std::size_t>(mode)], z) * t.at(src);
                }
                std::vector<std::int64_t> dst = {i, j, k};
                out.at(dst) = acc;
            }
    return out;
}

DenseTensor random_tensor(Shape shape, std::uint64_t seed) {
    rng::Substream s(seed);
    std::vector<double> vals(static_cast<std::size_t>(shape.num_elements()));
    for (double& v : vals) v = s.uniform01() * 2.0 - 1.0;
    return DenseTensor(std::move(shape), std::move(vals));
}

}  // namespace

TEST_CASE("matricize: 2-mode identity case") {
    // A matrix viewed as a 2-mode tensor unfolds to itself on mode 0.
    DenseTensor t({2, 2}, {1, 2, 3, 4});  // first index fastest
    Matrix m = matricize(t, 0);
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 2);
    CHECK(m(0, 0) == 1);
    CHECK(m(1, 0) == 2);
    CHECK(m(0, 1) == 3);
    CHECK(m(1, 1) == 4);
}

TEST_CASE("matricize: frozen 2x2x2 example") {
    // entry(i,j,k) = i + 2(j-1) + 4(k-1), 1-based: values 1..8 in layout order.
    std::vector<double> vals(8);
    std::iota(vals.begin(), vals.end(), 1.0);
    DenseTensor t({2, 2, 2}, vals);
    Matrix m = matricize(t, 0);
    Matrix expect(2, 4);
    expect << 1, 3, 5, 7, 2, 4, 6, 8;
    CHECK(m == expect);
    CHECK(m == naive_matricize(t, 0));
}

TEST_CASE("matricize: mode out of range") {
    DenseTensor t = DenseTensor::zeros({2, 2, 2});
    CHECK_THROWS_AS(matricize(t, 3), ConfigError);
    CHECK_THROWS_AS(matricize(t, -1), ConfigError);
}

TEST_CASE("matricize/dematricize round trip is bit exact") {
    const DenseTensor t = random_tensor({4, 5, 6, 3}, 42);
    for (int mode = 0; mode < 4; ++mode) {
        const Matrix m = matricize(t, mode);
        CHECK(m == naive_matricize(t, mode));
        const DenseTensor back = dematricize(m, t.shape(), mode);
        CHECK(back == t);
    }
}

TEST_CASE("mode_n_product: identity map is exact") {
    const DenseTensor t = random_tensor({3, 4, 2}, 7);
    for (int mode = 0; mode < 3; ++mode) {
        Matrix eye = Matrix::Identity(t.dim(mode), t.dim(mode));
        CHECK(mode_n_product(t, eye, mode) == t);
    }
}

TEST_CASE("mode_n_product: all-ones collapse and oracle") {
    DenseTensor ones({2, 2, 2}, std::vector<double>(8, 1.0));
    Matrix row(1, 2);
    row << 1, 1;
    DenseTensor out = mode_n_product(ones, row, 0);
    CHECK((out.shape() == Shape{1, 2, 2}));
    for (double v : out.values()) CHECK(v == doctest::Approx(2.0));

    const DenseTensor t = random_tensor({3, 4, 2}, 11);
    Matrix m(5, 4);
    rng::Substream s(12);
    s.fill_uniform(m);
    const DenseTensor got = mode_n_product(t, m, 1);
    const DenseTensor want = naive_mode_product_3(t, m, 1);
    REQUIRE(got.shape() == want.shape());
    for (std::size_t i = 0; i < got.values().size(); ++i)
        CHECK(got.values()[i] == doctest::Approx(want.values()[i]).epsilon(1e-12));
}

TEST_CASE("mode_n_product: dimension mismatch") {
    DenseTensor t = DenseTensor::zeros({3, 4, 2});
    Matrix m(2, 3);  // cols != dim(1)
    CHECK_THROWS_AS(mode_n_product(t, m, 1), ConfigError);
}

TEST_CASE("kronecker: identities and frozen example") {
    Matrix one(1, 1);
    one << 1;
    Matrix y(2, 3);
    y << 1, 2, 3, 4, 5, 6;
    CHECK(kronecker(one, y) == y);

    Matrix x(1, 2);
    x << 1, 2;
    Matrix z(2, 1);
    z << 3, 4;
    Matrix expect(2, 2);
    expect << 3, 6, 4, 8;
    CHECK(kronecker(x, z) == expect);

    // Dimension law.
    CHECK(kronecker(y, z).rows() == y.rows() * z.rows());
    CHECK(kronecker(y, z).cols() == y.cols() * z.cols());
}

TEST_CASE("kronecker: x(x)y equals y(x)x up to a permutation") {
    Matrix a(2, 2), b(2, 2);
    a << 1, 2, 3, 4;
    b << 5, 6, 7, 8;
    const Matrix ab = kronecker(a, b);
    const Matrix ba = kronecker(b, a);

    // Exhaustive search over row/column permutations of the 4x4 results.
    std::vector<int> rows = {0, 1, 2, 3};
    bool found = false;
    std::vector<int> rp = rows;
    do {
        std::vector<int> cp = rows;
        do {
            bool same = true;
            for (int i = 0; i < 4 && same; ++i)
                for (int j = 0; j < 4 && same; ++j)
                    if (ab(i, j) != ba(rp[static_cast<std::size_t>(i)], cp[static_cast<std::size_t>(j)]))
                        same = false;
            if (same) found = true;
        } while (!found && std::next_permutation(cp.begin(), cp.end()));
    } while (!found && std::next_permutation(rp.begin(), rp.end()));
    CHECK(found);
}

TEST_CASE("khatri_rao: identity columns and frozen example") {
    Matrix eye = Matrix::Identity(2, 2);
    Matrix kr = khatri_rao(eye, eye);
    Matrix expect = Matrix::Zero(4, 2);
    expect(0, 0) = 1;
    expect(3, 1) = 1;
    CHECK(kr == expect);

    Matrix x(2, 2), y(2, 2);
    x << 1, 2, 3, 4;
    y << 0, 1, 1, 0;
    Matrix expect2(4, 2);
    expect2 << 0, 2, 1, 0, 0, 4, 3, 0;
    CHECK(khatri_rao(x, y) == expect2);

    Matrix bad(2, 3);
    CHECK_THROWS_AS(khatri_rao(x, bad), ConfigError);

    CHECK(khatri_rao(x, y).rows() == x.rows() * y.rows());
    CHECK(khatri_rao(x, y).cols() == x.cols());
}

TEST_CASE("rank1_outer: direct products") {
    Vector a(2), b(2), c(2);
    a << 1, 2;
    b << 1, 0;
    c << 1, 1;
    DenseTensor t = rank1_outer({a, b, c});
    std::vector<std::int64_t> idx = {1, 0, 1};  // (2,1,2) 1-based
    CHECK(t.at(idx) == 2.0);

    Vector zero = Vector::Zero(2);
    DenseTensor z = rank1_outer({a, zero, c});
    for (double v : z.values()) CHECK(v == 0.0);

    Vector e1 = Vector::Zero(3);
    e1(0) = 1;
    DenseTensor corner = rank1_outer({e1, e1, e1});
    std::vector<std::int64_t> origin = {0, 0, 0};
    CHECK(corner.at(origin) == 1.0);
    CHECK(frobenius_norm(corner) == 1.0);

    CHECK_THROWS_AS(rank1_outer({}), ConfigError);
    CHECK_THROWS_AS(rank1_outer({a}), ConfigError);
}

TEST_CASE("rank-1 unfolding identity") {
    rng::Substream s(3);
    std::vector<Vector> vecs;
    for (std::int64_t d : {3, 4, 2}) {
        Vector v(d);
        for (std::int64_t i = 0; i < d; ++i) v(i) = s.uniform01() * 2 - 1;
        vecs.push_back(v);
    }
    DenseTensor t = rank1_outer(vecs);
    std::vector<Matrix> cols;
    for (const Vector& v : vecs) cols.push_back(v);
    for (int mode = 0; mode < 3; ++mode) {
        const Matrix chain = khatri_rao_chain(cols, mode);
        const Matrix expect = cols[static_cast<std::size_t>(mode)] * chain.transpose();
        const Matrix got = matricize(t, mode);
        CHECK((got - expect).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("frobenius_norm") {
    CHECK(frobenius_norm(DenseTensor::zeros({2, 2, 2})) == 0.0);
    DenseTensor twos({2, 2, 2}, std::vector<double>(8, 2.0));
    CHECK(frobenius_norm(twos) == doctest::Approx(std::sqrt(32.0)));

    DenseTensor t = random_tensor({3, 3, 3}, 5);
    DenseTensor scaled = t;
    for (double& v : scaled.values()) v *= -2.5;
    CHECK(frobenius_norm(scaled) == doctest::Approx(2.5 * frobenius_norm(t)));
}

TEST_CASE("concat_mode") {
    const DenseTensor a = random_tensor({2, 2, 3}, 8);
    const DenseTensor empty = DenseTensor::zeros({2, 2, 0});
    CHECK(concat_mode(a, empty, 2) == a);

    const DenseTensor s1 = random_tensor({2, 2, 1}, 9);
    const DenseTensor s2 = random_tensor({2, 2, 1}, 10);
    const DenseTensor both = concat_mode(s1, s2, 2);
    CHECK((both.shape() == Shape{2, 2, 2}));
    for (std::int64_t i = 0; i < 2; ++i)
        for (std::int64_t j = 0; j < 2; ++j) {
            std::vector<std::int64_t> front = {i, j, 0}, back = {i, j, 1};
            CHECK(both.at(front) == s1.at(front));
            CHECK(both.at(back) == s2.at(front));
        }

    const DenseTensor bad = random_tensor({2, 3, 1}, 11);
    CHECK_THROWS_AS(concat_mode(s1, bad, 2), ConfigError);
}

TEST_CASE("concat then slice returns the parts") {
    const DenseTensor a = random_tensor({3, 2, 4}, 12);
    const DenseTensor b = random_tensor({3, 2, 2}, 13);
    const DenseTensor joined = concat_mode(a, b, 2);
    CHECK(slice_mode(joined, 2, 0, 4) == a);
    CHECK(slice_mode(joined, 2, 4, 2) == b);
}

TEST_CASE("sparse round trip preserves nonzeros exactly") {
    DenseTensor t = DenseTensor::zeros({3, 4, 2});
    std::vector<std::int64_t> i1 = {0, 1, 0}, i2 = {2, 3, 1}, i3 = {1, 0, 1};
    t.at(i1) = 0.1234567890123456;
    t.at(i2) = -7.5;
    t.at(i3) = 1e-300;
    const SparseTensor sp = SparseTensor::from_dense(t);
    CHECK(sp.nnz() == 3);
    CHECK(sp.to_dense() == t);
    const SparseTensor again = SparseTensor::from_dense(sp.to_dense());
    CHECK(again.nnz() == 3);
}

TEST_CASE("sparse rejects bad entries") {
    CHECK_THROWS_AS(SparseTensor({2, 2}, {{{2, 0}, 1.0}}), ConfigError);
    CHECK_THROWS_AS(SparseTensor({2, 2}, {{{0, 0}, 1.0}, {{0, 0}, 2.0}}), ConfigError);
}

TEST_CASE("dense tensor rejects non-finite values") {
    CHECK_THROWS_AS(DenseTensor({2, 2}, {1.0, 2.0, std::nan(""), 4.0}), NumericError);
}
