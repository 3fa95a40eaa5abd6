#include "gelgt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "gelgt/errors.hpp"

namespace gelgt {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint blobs assume a little-endian host");

std::filesystem::path with_ext(const std::filesystem::path& stem, const char* ext) {
  std::filesystem::path p = stem;
  p += ext;
  return p;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& stem, const ParameterSet& params) {
  nlohmann::json manifest;
  manifest["blob"] = with_ext(stem, ".bin").filename().string();
  manifest["params"] = nlohmann::json::array();
  std::ofstream blob(with_ext(stem, ".bin"), std::ios::binary);
  if (!blob) throw DataError("cannot write " + with_ext(stem, ".bin").string());
  std::size_t offset = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = params[i];
    manifest["params"].push_back({{"name", p.name}, {"shape", p.value.shape()}, {"offset", offset}});
    const auto bytes = p.value.size() * sizeof(double);
    blob.write(reinterpret_cast<const char*>(p.value.data()), static_cast<std::streamsize>(bytes));
    offset += bytes;
  }
  std::ofstream out(with_ext(stem, ".json"));
  if (!out) throw DataError("cannot write " + with_ext(stem, ".json").string());
  out << manifest.dump(2) << '\n';
}

void load_checkpoint(const std::filesystem::path& stem, ParameterSet& params) {
  std::ifstream in(with_ext(stem, ".json"));
  if (!in) throw DataError("cannot read " + with_ext(stem, ".json").string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint manifest: ") + e.what());
  }
  std::ifstream blob(with_ext(stem, ".bin"), std::ios::binary);
  if (!blob) throw DataError("cannot read " + with_ext(stem, ".bin").string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(blob)), std::istreambuf_iterator<char>());

  std::size_t matched = 0;
  for (const auto& entry : manifest.at("params")) {
    const auto name = entry.at("name").get<std::string>();
    if (!params.contains(name)) continue;
    Parameter& p = params.at(name);
    const auto shape = entry.at("shape").get<Tensor::Shape>();
    if (shape != p.value.shape()) throw DataError("checkpoint shape mismatch for " + name);
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto n = p.value.size() * sizeof(double);
    if (offset + n > bytes.size()) throw DataError("checkpoint blob truncated at " + name);
    std::memcpy(p.value.data(), bytes.data() + offset, n);
    ++matched;
  }
  if (matched != params.size()) throw DataError("checkpoint is missing parameters");
}

}  // namespace gelgt
