#include "flashsac/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace flashsac {

namespace {

constexpr char kMagic[5] = {'F', 'S', 'A', 'C', '1'};

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

bool read_u32(std::istream& is, std::uint32_t& v) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
  v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
      (static_cast<std::uint32_t>(b[2]) << 16) |
      (static_cast<std::uint32_t>(b[3]) << 24);
  return true;
}

void write_f64(std::ostream& os, const double* p, size_t n) {
  static_assert(sizeof(double) == 8);
  // Little-endian hosts write the payload directly.
  os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * 8));
}

}  // namespace

NamedTensor NamedTensor::scalar(std::string name, double v) {
  return NamedTensor{std::move(name), {}, {v}};
}

NamedTensor NamedTensor::from_vector(std::string name, const Vector& v) {
  NamedTensor t;
  t.name = std::move(name);
  t.dims = {static_cast<std::uint32_t>(v.size())};
  t.data.assign(v.data(), v.data() + v.size());
  return t;
}

NamedTensor NamedTensor::from_matrix(std::string name, const Matrix& m) {
  NamedTensor t;
  t.name = std::move(name);
  t.dims = {static_cast<std::uint32_t>(m.rows()),
            static_cast<std::uint32_t>(m.cols())};
  t.data.resize(static_cast<size_t>(m.size()));
  // container payload is row-major
  size_t at = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) t.data[at++] = m(r, c);
  return t;
}

long long NamedTensor::element_count() const {
  long long n = 1;
  for (auto d : dims) n *= static_cast<long long>(d);
  return n;
}

Vector NamedTensor::to_vector() const {
  if (dims.size() != 1)
    throw IoError("tensor '" + name + "' is not rank 1");
  Vector v(static_cast<Eigen::Index>(data.size()));
  std::memcpy(v.data(), data.data(), data.size() * sizeof(double));
  return v;
}

Matrix NamedTensor::to_matrix() const {
  if (dims.size() != 2)
    throw IoError("tensor '" + name + "' is not rank 2");
  Matrix m(dims[0], dims[1]);
  size_t at = 0;
  for (std::uint32_t r = 0; r < dims[0]; ++r)
    for (std::uint32_t c = 0; c < dims[1]; ++c) m(r, c) = data[at++];
  return m;
}

double NamedTensor::to_scalar() const {
  if (!dims.empty() || data.size() != 1)
    throw IoError("tensor '" + name + "' is not a scalar");
  return data[0];
}

void write_tensor_file(const std::string& path,
                       const std::vector<NamedTensor>& tensors) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os.write(kMagic, 5);
  for (const auto& t : tensors) {
    if (t.element_count() != static_cast<long long>(t.data.size()))
      throw IoError("tensor '" + t.name + "' dims/payload mismatch");
    write_u32(os, static_cast<std::uint32_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_u32(os, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) write_u32(os, d);
    write_f64(os, t.data.data(), t.data.size());
  }
  if (!os) throw IoError("write failed for '" + path + "'");
}

std::vector<NamedTensor> read_tensor_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  char magic[5];
  if (!is.read(magic, 5) || std::memcmp(magic, kMagic, 5) != 0)
    throw IoError("'" + path + "' is not a checkpoint (bad magic)");
  std::vector<NamedTensor> tensors;
  for (;;) {
    std::uint32_t name_len;
    if (!read_u32(is, name_len)) {
      if (is.eof()) break;
      throw IoError("truncated checkpoint '" + path + "'");
    }
    NamedTensor t;
    t.name.resize(name_len);
    if (!is.read(t.name.data(), name_len))
      throw IoError("truncated checkpoint '" + path + "' (name)");
    std::uint32_t rank;
    if (!read_u32(is, rank))
      throw IoError("truncated checkpoint '" + path + "' (rank)");
    t.dims.resize(rank);
    for (std::uint32_t i = 0; i < rank; ++i) {
      if (!read_u32(is, t.dims[i]))
        throw IoError("truncated checkpoint '" + path + "' (dims)");
    }
    long long n = t.element_count();
    t.data.resize(static_cast<size_t>(n));
    if (!is.read(reinterpret_cast<char*>(t.data.data()),
                 static_cast<std::streamsize>(n * 8)))
      throw IoError("truncated checkpoint '" + path + "' (payload of '" +
                    t.name + "')");
    tensors.push_back(std::move(t));
  }
  return tensors;
}

}  // namespace flashsac
