// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "horrr/tensor.hpp"

namespace horrr {

// Binary layout: "HORT", u32 version (1), u32 order, u64 dims[order], then
// float64 payload with mode 0 fastest. All integers and floats little-endian.
void write_tensor(const std::filesystem::path& path, const DenseTensor& t);
DenseTensor read_tensor(const std::filesystem::path& path);

void write_matrix(const std::filesystem::path& path, const Matrix& m);
// Dispatches on extension: ".csv" is headerless comma-separated, anything else
// is the binary format (order 1 gives a column, order 2 a matrix).
Matrix read_matrix(const std::filesystem::path& path);

Matrix read_csv_matrix(const std::filesystem::path& path);
void write_csv_matrix(const std::filesystem::path& path, const Matrix& m);

}  // namespace horrr
