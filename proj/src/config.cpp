#include "mvt/config.hpp"

#include <stdexcept>

#include "mvt/config_json.hpp"

namespace mvt {

Readout readout_from_string(const std::string& s) {
  if (s == "first") return Readout::kFirstClassToken;
  if (s == "mean") return Readout::kMeanClassTokens;
  throw std::invalid_argument("unknown readout '" + s + "' (expected 'first' or 'mean')");
}

std::string to_string(Readout r) {
  return r == Readout::kFirstClassToken ? "first" : "mean";
}

ModelConfig ModelConfig::preset(const std::string& name) {
  ModelConfig cfg;
  cfg.arch = name;
  if (name == "toy") {
    cfg.image_size = 64;
    cfg.patch_size = 8;
    cfg.channels = 1;
    cfg.d_embed = 64;
    cfg.heads = 4;
    cfg.local_blocks = 2;
    cfg.global_blocks = 4;
  } else if (name == "tiny") {
    cfg.image_size = 224;
    cfg.patch_size = 16;
    cfg.channels = 3;
    cfg.d_embed = 192;
    cfg.heads = 3;
    cfg.local_blocks = 2;
    cfg.global_blocks = 10;
  } else if (name == "small") {
    cfg.image_size = 224;
    cfg.patch_size = 16;
    cfg.channels = 3;
    cfg.d_embed = 384;
    cfg.heads = 6;
    cfg.local_blocks = 2;
    cfg.global_blocks = 10;
  } else {
    throw std::invalid_argument("unknown arch preset '" + name + "'");
  }
  return cfg;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("model config: " + msg); };
  if (image_size <= 0 || patch_size <= 0) fail("image_size and patch_size must be positive");
  if (image_size % patch_size != 0)
    fail("image_size " + std::to_string(image_size) + " not divisible by patch_size " +
         std::to_string(patch_size));
  if (channels <= 0) fail("channels must be positive");
  if (d_embed <= 0 || heads <= 0) fail("d_embed and heads must be positive");
  if (d_embed % heads != 0)
    fail("d_embed " + std::to_string(d_embed) + " not divisible by heads " +
         std::to_string(heads));
  if (mlp_ratio <= 0) fail("mlp_ratio must be positive");
  if (local_blocks < 0 || global_blocks < 0) fail("block counts must be nonnegative");
  if (local_blocks + global_blocks < 1) fail("at least one block required");
  if ((arch == "tiny" || arch == "small") && local_blocks + global_blocks != 12)
    fail(arch + " preset requires local_blocks + global_blocks == 12, got " +
         std::to_string(local_blocks) + "+" + std::to_string(global_blocks));
}

nlohmann::json model_config_to_json(const ModelConfig& cfg) {
  return nlohmann::json{
      {"arch", cfg.arch},
      {"image_size", cfg.image_size},
      {"patch_size", cfg.patch_size},
      {"channels", cfg.channels},
      {"d_embed", cfg.d_embed},
      {"heads", cfg.heads},
      {"local_blocks", cfg.local_blocks},
      {"global_blocks", cfg.global_blocks},
      {"mlp_ratio", cfg.mlp_ratio},
      {"readout", to_string(cfg.readout)},
  };
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  if (j.contains("arch")) cfg.arch = j.at("arch").get<std::string>();
  cfg.image_size = j.value("image_size", cfg.image_size);
  cfg.patch_size = j.value("patch_size", cfg.patch_size);
  cfg.channels = j.value("channels", cfg.channels);
  cfg.d_embed = j.value("d_embed", cfg.d_embed);
  cfg.heads = j.value("heads", cfg.heads);
  cfg.local_blocks = j.value("local_blocks", cfg.local_blocks);
  cfg.global_blocks = j.value("global_blocks", cfg.global_blocks);
  cfg.mlp_ratio = j.value("mlp_ratio", cfg.mlp_ratio);
  if (j.contains("readout")) cfg.readout = readout_from_string(j.at("readout").get<std::string>());
  return cfg;
}

}  // namespace mvt
