#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace e2i::data {

// Dense row-major array as stored in a NumPy .npy file.
struct NdArray {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  std::size_t numel() const;
};

enum class NpyDtype { Float32, Float64 };

// Reads little-endian float32/float64 C-order arrays (format versions 1-3).
NdArray read_npy(const std::string& path);
void write_npy(const std::string& path, const NdArray& arr, NpyDtype dtype = NpyDtype::Float32);

}  // namespace e2i::data
