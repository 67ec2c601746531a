#include "cpstream/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

namespace cpstream {

namespace {

// Odometer increment, first index fastest. Returns false once exhausted.
bool advance(std::vector<std::int64_t>& idx, const std::vector<std::int64_t>& dims) {
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (++idx[k] < dims[k]) return true;
        idx[k] = 0;
    }
    return false;
}

void check_mode(const Shape& shape, int mode, const char* op) {
    if (mode < 0 || mode >= shape.order())
        throw ConfigError(std::string(op) + ": mode " + std::to_string(mode + 1) +
                          " out of range for order-" + std::to_string(shape.order()) + " tensor");
}

// Column strides of the unfolding: remaining modes ascending, lowest fastest.
std::vector<std::int64_t> unfold_col_strides(const Shape& shape, int mode) {
    std::vector<std::int64_t> cs(shape.dims.size(), 0);
    std::int64_t stride = 1;
    for (int k = 0; k < shape.order(); ++k) {
        if (k == mode) continue;
        cs[static_cast<std::size_t>(k)] = stride;
        stride *= shape.dims[static_cast<std::size_t>(k)];
    }
    return cs;
}

}  // namespace

std::int64_t Shape::num_elements() const {
    std::int64_t n = 1;
    for (std::int64_t d : dims) n *= d;
    return n;
}

void Shape::validate() const {
    if (order() < 2) throw ConfigError("Shape: tensor order must be >= 2");
    for (std::int64_t d : dims)
        if (d < 0) throw ConfigError("Shape: negative extent");
}

DenseTensor::DenseTensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
    shape_.validate();
    if (static_cast<std::int64_t>(values_.size()) != shape_.num_elements())
        throw ConfigError("DenseTensor: value count does not match shape");
    check_finite("DenseTensor");
}

DenseTensor DenseTensor::zeros(Shape shape) {
    shape.validate();
    const auto n = static_cast<std::size_t>(shape.num_elements());
    return DenseTensor(std::move(shape), std::vector<double>(n, 0.0));
}

std::int64_t DenseTensor::flat_index(std::span<const std::int64_t> index) const {
    if (static_cast<int>(index.size()) != order())
        throw ConfigError("DenseTensor: index arity mismatch");
    std::int64_t flat = 0, stride = 1;
    for (int k = 0; k < order(); ++k) {
        const std::int64_t i = index[static_cast<std::size_t>(k)];
        const std::int64_t d = shape_.dims[static_cast<std::size_t>(k)];
        if (i < 0 || i >= d) throw ConfigError("DenseTensor: index out of bounds");
        flat += i * stride;
        stride *= d;
    }
    return flat;
}

void DenseTensor::check_finite(const char* context) const {
    for (double v : values_)
        if (!std::isfinite(v))
            throw NumericError(std::string(context) + ": non-finite value");
}

SparseTensor::SparseTensor(Shape shape, std::vector<Entry> entries)
    : shape_(std::move(shape)), entries_(std::move(entries)) {
    shape_.validate();
    std::set<std::vector<std::int64_t>> seen;
    for (const Entry& e : entries_) {
        if (static_cast<int>(e.index.size()) != shape_.order())
            throw ConfigError("SparseTensor: index arity mismatch");
        for (int k = 0; k < shape_.order(); ++k)
            if (e.index[static_cast<std::size_t>(k)] < 0 ||
                e.index[static_cast<std::size_t>(k)] >= shape_.dims[static_cast<std::size_t>(k)])
                throw ConfigError("SparseTensor: index out of bounds");
        if (!std::isfinite(e.value)) throw NumericError("SparseTensor: non-finite value");
        if (!seen.insert(e.index).second)
            throw ConfigError("SparseTensor: duplicate index");
    }
}

SparseTensor SparseTensor::from_dense(const DenseTensor& t) {
    std::vector<Entry> entries;
    if (t.num_elements() > 0) {
        std::vector<std::int64_t> idx(static_cast<std::size_t>(t.order()), 0);
        std::int64_t flat = 0;
        do {
            const double v = t.values()[static_cast<std::size_t>(flat)];
            if (v != 0.0) entries.push_back({idx, v});
            ++flat;
        } while (advance(idx, t.shape().dims));
    }
    return SparseTensor(t.shape(), std::move(entries));
}

DenseTensor SparseTensor::to_dense() const {
    DenseTensor out = DenseTensor::zeros(shape_);
    for (const Entry& e : entries_) out.at(e.index) = e.value;
    return out;
}

Matrix matricize(const DenseTensor& t, int mode) {
    check_mode(t.shape(), mode, "matricize");
    const std::int64_t rows = t.dim(mode);
    const std::int64_t cols = rows == 0 ? 0 : t.num_elements() / rows;
    Matrix m(rows, cols);
    if (t.num_elements() == 0) return m;

    const auto cs = unfold_col_strides(t.shape(), mode);
    std::vector<std::int64_t> idx(static_cast<std::size_t>(t.order()), 0);
    std::int64_t flat = 0;
    do {
        std::int64_t col = 0;
        for (int k = 0; k < t.order(); ++k)
            if (k != mode) col += idx[static_cast<std::size_t>(k)] * cs[static_cast<std::size_t>(k)];
        m(idx[static_cast<std::size_t>(mode)], col) = t.values()[static_cast<std::size_t>(flat)];
        ++flat;
    } while (advance(idx, t.shape().dims));
    return m;
}

DenseTensor dematricize(const Matrix& m, const Shape& shape, int mode) {
    shape.validate();
    check_mode(shape, mode, "dematricize");
    const std::int64_t rows = shape.dims[static_cast<std::size_t>(mode)];
    const std::int64_t cols = rows == 0 ? 0 : shape.num_elements() / rows;
    if (m.rows() != rows || m.cols() != cols)
        throw ConfigError("dematricize: matrix does not match shape/mode");

    DenseTensor out = DenseTensor::zeros(shape);
    if (out.num_elements() == 0) return out;

    const auto cs = unfold_col_strides(shape, mode);
    std::vector<std::int64_t> idx(static_cast<std::size_t>(shape.order()), 0);
    std::int64_t flat = 0;
    do {
        std::int64_t col = 0;
        for (int k = 0; k < shape.order(); ++k)
            if (k != mode) col += idx[static_cast<std::size_t>(k)] * cs[static_cast<std::size_t>(k)];
        out.values()[static_cast<std::size_t>(flat)] = m(idx[static_cast<std::size_t>(mode)], col);
        ++flat;
    } while (advance(idx, shape.dims));
    return out;
}

DenseTensor mode_n_product(const DenseTensor& t, const Matrix& m, int mode) {
    check_mode(t.shape(), mode, "mode_n_product");
    if (m.cols() != t.dim(mode))
        throw ConfigError("mode_n_product: matrix columns (" + std::to_string(m.cols()) +
                          ") != tensor extent (" + std::to_string(t.dim(mode)) + ") on mode " +
                          std::to_string(mode + 1));
    Shape out_shape = t.shape();
    out_shape.dims[static_cast<std::size_t>(mode)] = m.rows();
    const Matrix unfolded = m * matricize(t, mode);
    return dematricize(unfolded, out_shape, mode);
}

Matrix kronecker(const Matrix& x, const Matrix& y) {
    Matrix out(x.rows() * y.rows(), x.cols() * y.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j)
            out.block(i * y.rows(), j * y.cols(), y.rows(), y.cols()) = x(i, j) * y;
    return out;
}

Matrix khatri_rao(const Matrix& x, const Matrix& y) {
    if (x.cols() != y.cols())
        throw ConfigError("khatri_rao: column counts differ (" + std::to_string(x.cols()) +
                          " vs " + std::to_string(y.cols()) + ")");
    Matrix out(x.rows() * y.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.cols(); ++r)
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            out.col(r).segment(i * y.rows(), y.rows()) = x(i, r) * y.col(r);
    return out;
}

Matrix khatri_rao_chain(std::span<const Matrix> factors, int skip_mode) {
    const int n = static_cast<int>(factors.size());
    if (n < 2) throw ConfigError("khatri_rao_chain: need at least two factors");
    Matrix acc;
    bool started = false;
    for (int mode = n - 1; mode >= 0; --mode) {
        if (mode == skip_mode) continue;
        const Matrix& f = factors[static_cast<std::size_t>(mode)];
        if (!started) {
            acc = f;
            started = true;
        } else {
            acc = khatri_rao(acc, f);
        }
    }
    if (!started) throw ConfigError("khatri_rao_chain: no factors left after skip");
    return acc;
}

DenseTensor rank1_outer(const std::vector<Vector>& vectors) {
    if (vectors.size() < 2) throw ConfigError("rank1_outer: need at least two vectors");
    Shape shape;
    for (const Vector& v : vectors) {
        if (v.size() == 0) throw ConfigError("rank1_outer: empty vector");
        shape.dims.push_back(v.size());
    }
    DenseTensor out = DenseTensor::zeros(shape);
    std::vector<std::int64_t> idx(vectors.size(), 0);
    std::int64_t flat = 0;
    do {
        double prod = 1.0;
        for (std::size_t k = 0; k < vectors.size(); ++k) prod *= vectors[k](idx[k]);
        out.values()[static_cast<std::size_t>(flat)] = prod;
        ++flat;
    } while (advance(idx, shape.dims));
    return out;
}

double frobenius_norm(const DenseTensor& t) {
    double sum = 0.0;
    for (double v : t.values()) sum += v * v;
    return std::sqrt(sum);
}

DenseTensor concat_mode(const DenseTensor& a, const DenseTensor& b, int mode) {
    check_mode(a.shape(), mode, "concat_mode");
    if (a.order() != b.order()) throw ConfigError("concat_mode: order mismatch");
    for (int k = 0; k < a.order(); ++k)
        if (k != mode && a.dim(k) != b.dim(k))
            throw ConfigError("concat_mode: extent mismatch on mode " + std::to_string(k + 1));

    if (b.dim(mode) == 0) return a;
    if (a.dim(mode) == 0) return b;

    Shape out_shape = a.shape();
    out_shape.dims[static_cast<std::size_t>(mode)] = a.dim(mode) + b.dim(mode);
    DenseTensor out = DenseTensor::zeros(out_shape);

    const std::int64_t offset = a.dim(mode);
    std::vector<std::int64_t> idx(static_cast<std::size_t>(a.order()), 0);
    std::int64_t flat = 0;
    do {
        out.at(idx) = a.values()[static_cast<std::size_t>(flat)];
        ++flat;
    } while (advance(idx, a.shape().dims));
    std::fill(idx.begin(), idx.end(), 0);
    flat = 0;
    do {
        std::vector<std::int64_t> shifted = idx;
        shifted[static_cast<std::size_t>(mode)] += offset;
        out.at(shifted) = b.values()[static_cast<std::size_t>(flat)];
        ++flat;
    } while (advance(idx, b.shape().dims));
    return out;
}

DenseTensor slice_mode(const DenseTensor& t, int mode, std::int64_t start, std::int64_t count) {
    check_mode(t.shape(), mode, "slice_mode");
    if (start < 0 || count < 0 || start + count > t.dim(mode))
        throw ConfigError("slice_mode: range out of bounds");
    Shape out_shape = t.shape();
    out_shape.dims[static_cast<std::size_t>(mode)] = count;
    DenseTensor out = DenseTensor::zeros(out_shape);
    if (out.num_elements() == 0) return out;

    std::vector<std::int64_t> idx(static_cast<std::size_t>(t.order()), 0);
    std::int64_t flat = 0;
    do {
        std::vector<std::int64_t> src = idx;
        src[static_cast<std::size_t>(mode)] += start;
        out.values()[static_cast<std::size_t>(flat)] = t.at(src);
        ++flat;
    } while (advance(idx, out_shape.dims));
    return out;
}

}  // namespace cpstream
