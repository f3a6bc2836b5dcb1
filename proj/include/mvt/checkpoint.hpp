#pragma once

#include <filesystem>
#include <utility>

#include "mvt/model.hpp"

namespace mvt {

/// Checkpoint file layout:
///   bytes 0-3   magic "MVT1"
///   bytes 4-7   little-endian u32 header length
///   header      UTF-8 JSON {format_version, config, tensors: [{name, shape, offset}]}
///   payload     contiguous little-endian float32 tensor data in table order;
///               offsets are bytes from the start of the payload region.
/// Values are stored at 32-bit precision regardless of in-memory width.
void save_checkpoint(ParamStore& params, const ModelConfig& cfg,
                     const std::filesystem::path& path);

std::pair<ParamStore, ModelConfig> load_checkpoint(const std::filesystem::path& path);

}  // namespace mvt
