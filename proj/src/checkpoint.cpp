#include "subens/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "subens/strfmt.hpp"

namespace subens::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_blob(const fs::path& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw contract_error("checkpoint: cannot write " + path.string());
  std::vector<char> bytes;
  bytes.reserve(t.size() * 4);
  for (std::size_t i = 0; i < t.size(); ++i) {
    float f = static_cast<float>(t[i]);
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    bytes.push_back(static_cast<char>(u & 0xff));
    bytes.push_back(static_cast<char>((u >> 8) & 0xff));
    bytes.push_back(static_cast<char>((u >> 16) & 0xff));
    bytes.push_back(static_cast<char>((u >> 24) & 0xff));
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Tensor read_blob(const fs::path& path, const std::string& name, const std::vector<std::size_t>& shape) {
  if (!fs::exists(path)) throw contract_error("checkpoint: missing blob for tensor " + name);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw contract_error("checkpoint: cannot read blob for tensor " + name);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t count = 1;
  for (std::size_t e : shape) count *= e;
  if (bytes.size() != count * 4)
    throw contract_error("checkpoint: size mismatch for tensor " + name + " (expected " +
                         std::to_string(count * 4) + " bytes, got " + std::to_string(bytes.size()) + ")");
  Tensor t(shape);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t u = (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i]))) |
                      (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + 1])) << 8) |
                      (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + 2])) << 16) |
                      (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + 3])) << 24);
    float f;
    std::memcpy(&f, &u, 4);
    t[i] = static_cast<double>(f);
  }
  return t;
}

}  // namespace

void save_checkpoint(const model::ModelParams& params, const ExperimentConfig& cfg,
                     const std::string& dir) {
  fs::create_directories(dir);
  auto names = model::param_names(params);
  auto tensors = model::param_tensors(params);

  json manifest;
  manifest["format_version"] = kCheckpointVersion;
  manifest["init"] = "glorot_uniform";
  manifest["seed"] = cfg.seed;
  manifest["config"] = cfg.to_text();
  json dirindex = json::object();
  for (std::size_t i = 0; i < names.size(); ++i) dirindex[names[i]] = tensors[i]->shape();
  manifest["tensors"] = dirindex;

  std::ofstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw contract_error("checkpoint: cannot write manifest in " + dir);
  mf << manifest.dump(2) << "\n";

  for (std::size_t i = 0; i < names.size(); ++i)
    write_blob(fs::path(dir) / (names[i] + ".bin"), *tensors[i]);
}

std::pair<model::ModelParams, ExperimentConfig> load_checkpoint(const std::string& dir) {
  fs::path mpath = fs::path(dir) / "manifest.json";
  if (!fs::exists(mpath)) throw contract_error("checkpoint: no manifest in " + dir);
  std::ifstream mf(mpath);
  json manifest;
  try {
    mf >> manifest;
  } catch (const std::exception& e) {
    throw contract_error("checkpoint: malformed manifest in " + dir + ": " + e.what());
  }
  int version = manifest.at("format_version").get<int>();
  if (version != kCheckpointVersion)
    throw contract_error("checkpoint: version mismatch (file has " + std::to_string(version) +
                         ", expected " + std::to_string(kCheckpointVersion) + ")");
  ExperimentConfig cfg = ExperimentConfig::parse_text(manifest.at("config").get<std::string>());

  model::ModelParams params;
  for (const auto& [name, jshape] : manifest.at("tensors").items()) {
    std::vector<std::size_t> shape = jshape.get<std::vector<std::size_t>>();
    Tensor t = read_blob(fs::path(dir) / (name + ".bin"), name, shape);

    auto parts = split_str(name, '.');
    auto place = [&](model::DenseLayer& layer, const std::string& leafname) {
      if (leafname == "w") layer.w = std::move(t);
      else if (leafname == "b") layer.b = std::move(t);
      else throw contract_error("checkpoint: unknown tensor name " + name);
    };
    if (parts.size() == 3 && parts[0] == "enc") {
      std::size_t i = static_cast<std::size_t>(std::stoul(parts[1]));
      if (params.encoder.size() <= i) params.encoder.resize(i + 1);
      place(params.encoder[i], parts[2]);
    } else if (parts.size() == 4 && parts[0] == "head") {
      std::size_t m = static_cast<std::size_t>(std::stoul(parts[1]));
      std::size_t j = static_cast<std::size_t>(std::stoul(parts[2]));
      if (params.subnets.size() <= m) params.subnets.resize(m + 1);
      if (params.subnets[m].size() <= j) params.subnets[m].resize(j + 1);
      place(params.subnets[m][j], parts[3]);
    } else {
      throw contract_error("checkpoint: unknown tensor name " + name);
    }
  }
  if (params.subnets.empty()) throw contract_error("checkpoint: no head tensors in " + dir);
  return {std::move(params), std::move(cfg)};
}

}  // namespace subens::cli
