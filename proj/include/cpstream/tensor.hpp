#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cpstream/errors.hpp"

namespace cpstream {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dimensions of an N-mode tensor, N >= 2. A zero extent is permitted so
/// that empty tensors can act as concatenation identities.
struct Shape {
    std::vector<std::int64_t> dims;

    Shape() = default;
    Shape(std::initializer_list<std::int64_t> d) : dims(d) {}
    explicit Shape(std::vector<std::int64_t> d) : dims(std::move(d)) {}

    int order() const { return static_cast<int>(dims.size()); }
    std::int64_t num_elements() const;
    void validate() const;

    bool operator==(const Shape& other) const { return dims == other.dims; }
};

/// Dense N-mode tensor of doubles. Flat storage with the first index
/// fastest: flat(i_0,...,i_{N-1}) = sum_k i_k * prod_{m<k} dims[m].
/// All public operations keep every entry finite.
class DenseTensor {
public:
    DenseTensor() = default;
    DenseTensor(Shape shape, std::vector<double> values);

    static DenseTensor zeros(Shape shape);

    const Shape& shape() const { return shape_; }
    int order() const { return shape_.order(); }
    std::int64_t dim(int mode) const { return shape_.dims.at(static_cast<std::size_t>(mode)); }
    std::int64_t num_elements() const { return static_cast<std::int64_t>(values_.size()); }

    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

    std::int64_t flat_index(std::span<const std::int64_t> index) const;
    double at(std::span<const std::int64_t> index) const { return values_[static_cast<std::size_t>(flat_index(index))]; }
    double& at(std::span<const std::int64_t> index) { return values_[static_cast<std::size_t>(flat_index(index))]; }

    /// Throws NumericError if any entry is NaN or infinite.
    void check_finite(const char* context) const;

    bool operator==(const DenseTensor& other) const {
        return shape_ == other.shape_ && values_ == other.values_;
    }

private:
    Shape shape_;
    std::vector<double> values_;
};

/// Coordinate-format sparse tensor; an ingestion format only. Indices are
/// 0-based here, 1-based in the text file format.
class SparseTensor {
public:
    struct Entry {
        std::vector<std::int64_t> index;
        double value = 0.0;
    };

    SparseTensor() = default;
    SparseTensor(Shape shape, std::vector<Entry> entries);

    static SparseTensor from_dense(const DenseTensor& t);
    DenseTensor to_dense() const;

    const Shape& shape() const { return shape_; }
    const std::vector<Entry>& entries() const { return entries_; }
    std::int64_t nnz() const { return static_cast<std::int64_t>(entries_.size()); }

private:
    Shape shape_;
    std::vector<Entry> entries_;
};

// -- Multilinear kernels ----------------------------------------------------
// Modes are 0-based throughout the API (file formats are 1-based).

/// Mode-n unfolding: rows index mode n, columns run over the remaining
/// modes in ascending order with the lowest-numbered mode varying fastest.
Matrix matricize(const DenseTensor& t, int mode);

/// Inverse of matricize for the given shape/mode.
DenseTensor dematricize(const Matrix& m, const Shape& shape, int mode);

/// Mode-n product: result(..., q, ...) = sum_i m(q, i) * t(..., i, ...).
/// Requires m.cols() == t.dim(mode); dims[mode] becomes m.rows().
DenseTensor mode_n_product(const DenseTensor& t, const Matrix& m, int mode);

/// Kronecker product, block formula.
Matrix kronecker(const Matrix& x, const Matrix& y);

/// Column-wise Kronecker product; x.cols() must equal y.cols().
Matrix khatri_rao(const Matrix& x, const Matrix& y);

/// Khatri-Rao chain over all factors except skip_mode, folded from the
/// highest mode down so that the lowest mode's index varies fastest in the
/// row indexing. Matches the column order of matricize.
Matrix khatri_rao_chain(std::span<const Matrix> factors, int skip_mode);

/// Outer product of N >= 2 vectors: entry(i_0..i_{N-1}) = prod_n v_n(i_n).
DenseTensor rank1_outer(const std::vector<Vector>& vectors);

double frobenius_norm(const DenseTensor& t);

/// Concatenate b after a along `mode`; all other extents must agree.
DenseTensor concat_mode(const DenseTensor& a, const DenseTensor& b, int mode);

/// Contiguous sub-range [start, start+count) along `mode`.
DenseTensor slice_mode(const DenseTensor& t, int mode, std::int64_t start, std::int64_t count);

}  // namespace cpstream
