#include "data/npy.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <regex>
#include <sstream>

#include "core/error.hpp"

namespace e2i::data {

namespace {

constexpr char kMagic[] = "\x93NUMPY";

std::string header_dict(const NdArray& arr, NpyDtype dtype) {
  std::ostringstream os;
  os << "{'descr': '" << (dtype == NpyDtype::Float32 ? "<f4" : "<f8")
     << "', 'fortran_order': False, 'shape': (";
  for (std::size_t i = 0; i < arr.shape.size(); ++i) {
    os << arr.shape[i];
    if (arr.shape.size() == 1 || i + 1 < arr.shape.size()) os << ",";
    if (i + 1 < arr.shape.size()) os << " ";
  }
  os << "), }";
  return os.str();
}

}  // namespace

std::size_t NdArray::numel() const {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

NdArray read_npy(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open array file: " + path);
  char magic[6];
  in.read(magic, 6);
  if (!in || std::memcmp(magic, kMagic, 6) != 0) throw IoError("not an .npy file: " + path);
  unsigned char ver[2];
  in.read(reinterpret_cast<char*>(ver), 2);
  std::uint32_t hlen = 0;
  if (ver[0] == 1) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    hlen = b[0] | (b[1] << 8);
  } else if (ver[0] == 2 || ver[0] == 3) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    hlen = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  } else {
    throw IoError("unsupported .npy version in " + path);
  }
  std::string header(hlen, '\0');
  in.read(header.data(), hlen);
  if (!in) throw IoError("truncated .npy header: " + path);

  std::smatch m;
  if (!std::regex_search(header, m, std::regex("'descr':\\s*'([^']+)'")))
    throw IoError("missing dtype in " + path);
  const std::string descr = m[1];
  std::size_t item = 0;
  if (descr == "<f4") item = 4;
  else if (descr == "<f8") item = 8;
  else throw IoError("unsupported dtype " + descr + " in " + path);
  if (std::regex_search(header, m, std::regex("'fortran_order':\\s*True")))
    throw IoError("fortran-order arrays are not supported: " + path);
  if (!std::regex_search(header, m, std::regex("'shape':\\s*\\(([^)]*)\\)")))
    throw IoError("missing shape in " + path);

  NdArray arr;
  std::string dims = m[1];
  std::regex num("[0-9]+");
  for (auto it = std::sregex_iterator(dims.begin(), dims.end(), num); it != std::sregex_iterator(); ++it)
    arr.shape.push_back(std::stoull(it->str()));

  const std::size_t n = arr.numel();
  std::vector<char> raw(n * item);
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size())
    throw IoError("truncated .npy payload: " + path);
  arr.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (item == 4) {
      float f;
      std::memcpy(&f, raw.data() + i * 4, 4);
      arr.values[i] = f;
    } else {
      std::memcpy(&arr.values[i], raw.data() + i * 8, 8);
    }
  }
  return arr;
}

void write_npy(const std::string& path, const NdArray& arr, NpyDtype dtype) {
  if (arr.numel() != arr.values.size()) throw InternalError("npy shape/value mismatch for " + path);
  std::string header = header_dict(arr, dtype);
  // Pad so the payload starts on a 64-byte boundary, newline terminated.
  const std::size_t preamble = 10;
  const std::size_t total = ((preamble + header.size() + 1 + 63) / 64) * 64;
  header.append(total - preamble - header.size() - 1, ' ');
  header.push_back('\n');

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write array file: " + path);
  out.write(kMagic, 6);
  const char ver[2] = {1, 0};
  out.write(ver, 2);
  const std::uint16_t hlen = static_cast<std::uint16_t>(header.size());
  const char hl[2] = {static_cast<char>(hlen & 0xff), static_cast<char>(hlen >> 8)};
  out.write(hl, 2);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (double v : arr.values) {
    if (dtype == NpyDtype::Float32) {
      const float f = static_cast<float>(v);
      out.write(reinterpret_cast<const char*>(&f), 4);
    } else {
      out.write(reinterpret_cast<const char*>(&v), 8);
    }
  }
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace e2i::data
