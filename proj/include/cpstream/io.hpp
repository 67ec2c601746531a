#pragma once

#include <string>

#include "cpstream/cp_als.hpp"
#include "cpstream/tensor.hpp"

namespace cpstream {

// Text COO format: header "N d1 ... dN", then one "i1 ... iN value" line
// per nonzero with 1-based indices.
void write_tensor_coo(const SparseTensor& t, const std::string& path);
SparseTensor read_tensor_coo(const std::string& path);

// Dense binary format: magic "OCT1", u32 order, u64 extents, then the
// little-endian f64 payload with the first index fastest.
void write_tensor_dense(const DenseTensor& t, const std::string& path);
DenseTensor read_tensor_dense(const std::string& path);

/// Reads either tensor format, keyed on the magic bytes.
DenseTensor read_tensor_any(const std::string& path);

// Factor-model text format: header "kruskal N R", one row-major matrix
// block per mode (one row per line), then the weight line.
void write_kruskal(const KruskalModel& m, const std::string& path);
KruskalModel read_kruskal(const std::string& path);

}  // namespace cpstream
