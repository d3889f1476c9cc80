// SPDX-License-Identifier: Apache-2.0
#include "horrr/tensor_io.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "horrr/error.hpp"

namespace horrr {

namespace {

constexpr char kMagic[4] = {'H', 'O', 'R', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <typename T>
void put(std::ostream& os, T v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& path) {
  T v;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw IoError("truncated tensor file: " + path.string());
  return to_little(v);
}

bool has_csv_extension(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".csv";
}

}  // namespace

void write_tensor(const std::filesystem::path& path, const DenseTensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os.write(kMagic, 4);
  put<std::uint32_t>(os, kVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(t.order()));
  for (Index d : t.dims()) put<std::uint64_t>(os, static_cast<std::uint64_t>(d));
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(t.data().data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
  } else {
    for (Index i = 0; i < t.size(); ++i) put<double>(os, t.data()[i]);
  }
  if (!os) throw IoError("write failed: " + path.string());
}

DenseTensor read_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("not a HORT tensor file: " + path.string());
  const auto version = get<std::uint32_t>(is, path);
  if (version != kVersion)
    throw IoError("unsupported HORT version " + std::to_string(version) + ": " + path.string());
  const auto order = get<std::uint32_t>(is, path);
  if (order == 0 || order > 64) throw IoError("implausible tensor order in " + path.string());
  std::vector<Index> dims(order);
  for (auto& d : dims) d = static_cast<Index>(get<std::uint64_t>(is, path));
  DenseTensor t(dims);
  if constexpr (std::endian::native == std::endian::little) {
    if (!is.read(reinterpret_cast<char*>(t.data().data()),
                 static_cast<std::streamsize>(t.size() * sizeof(double))))
      throw IoError("truncated tensor payload: " + path.string());
  } else {
    for (Index i = 0; i < t.size(); ++i) t.data()[i] = get<double>(is, path);
  }
  return t;
}

void write_matrix(const std::filesystem::path& path, const Matrix& m) {
  if (has_csv_extension(path))
    write_csv_matrix(path, m);
  else
    write_tensor(path, DenseTensor::from_matrix(m));
}

Matrix read_matrix(const std::filesystem::path& path) {
  if (has_csv_extension(path)) return read_csv_matrix(path);
  DenseTensor t = read_tensor(path);
  if (t.order() > 2) throw ShapeError("expected a matrix, got an order-" +
                                      std::to_string(t.order()) + " tensor: " + path.string());
  return t.as_matrix();
}

Matrix read_csv_matrix(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const auto b = cell.find_first_not_of(" \t");
      const auto e = cell.find_last_not_of(" \t");
      if (b == std::string::npos) throw IoError("empty cell at line " + std::to_string(lineno));
      cell = cell.substr(b, e - b + 1);
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw IoError("bad number '" + cell + "' at " + path.string() + ":" +
                      std::to_string(lineno));
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError("ragged CSV at " + path.string() + ":" + std::to_string(lineno));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("empty CSV: " + path.string());
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  return m;
}

void write_csv_matrix(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << std::setprecision(17);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) os << ',';
      os << m(i, j);
    }
    os << '\n';
  }
}

}  // namespace horrr
