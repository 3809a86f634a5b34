#pragma once

#include <string>
#include <vector>

#include "flashsac/common.hpp"

namespace flashsac {

// Flat binary tensor container. Layout:
//   magic "FSAC1"
//   repeated until EOF:
//     u32 LE  name byte length
//     bytes   UTF-8 name
//     u32 LE  rank
//     u32 LE  dims[rank]
//     f64 LE  row-major payload (product of dims values; rank 0 = one scalar)
struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<double> data;

  static NamedTensor scalar(std::string name, double v);
  static NamedTensor from_vector(std::string name, const Vector& v);
  static NamedTensor from_matrix(std::string name, const Matrix& m);
  Vector to_vector() const;
  Matrix to_matrix() const;
  double to_scalar() const;
  long long element_count() const;
};

void write_tensor_file(const std::string& path,
                       const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_tensor_file(const std::string& path);

}  // namespace flashsac
