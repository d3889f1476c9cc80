// SPDX-License-Identifier: Apache-2.0
#include "horrr/checkpoint.hpp"

#include <fstream>

#include "horrr/error.hpp"
#include "horrr/tensor_io.hpp"

namespace horrr {

namespace fs = std::filesystem;

void save_point(const fs::path& dir, const TuckerPoint& p, const nlohmann::json& metadata) {
  fs::create_directories(dir);
  nlohmann::json m;
  m["format"] = "horrr-tucker";
  m["version"] = 1;
  m["dims"] = p.ambient_dims();
  m["ranks"] = p.ranks();
  m["core"] = "core.bin";
  std::vector<std::string> names;
  write_tensor(dir / "core.bin", p.core());
  for (std::size_t i = 0; i < p.order(); ++i) {
    names.push_back("factor_" + std::to_string(i) + ".bin");
    write_matrix(dir / names.back(), p.factor(i));
  }
  m["factors"] = names;
  m["metadata"] = metadata;
  std::ofstream os(dir / "manifest.json");
  if (!os) throw IoError("cannot write manifest in " + dir.string());
  os << m.dump(2) << '\n';
}

LoadedPoint load_point(const fs::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw IoError("no manifest.json in " + dir.string());
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed manifest in " + dir.string() + ": " + e.what());
  }
  if (m.value("format", "") != "horrr-tucker")
    throw IoError("not a Tucker checkpoint: " + dir.string());
  DenseTensor core = read_tensor(dir / m.at("core").get<std::string>());
  std::vector<Matrix> factors;
  for (const auto& name : m.at("factors")) factors.push_back(read_matrix(dir / name.get<std::string>()));
  TuckerPoint p(std::move(core), std::move(factors));
  if (p.ambient_dims() != m.at("dims").get<std::vector<Index>>())
    throw IoError("checkpoint dims disagree with stored factors in " + dir.string());
  return {std::move(p), std::move(m)};
}

}  // namespace horrr
