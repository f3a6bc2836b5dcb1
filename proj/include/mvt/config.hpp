#pragma once

#include <string>

namespace mvt {

/// Which token(s) of the concatenated global sequence feed the head.
enum class Readout {
  kFirstClassToken,   // row 0 (the LCC class token)
  kMeanClassTokens,   // mean of the four class-token rows
};

Readout readout_from_string(const std::string& s);
std::string to_string(Readout r);

/// Full architecture hyperparameters for one multi-view model.
struct ModelConfig {
  int image_size = 64;    // square input side after preprocessing
  int patch_size = 8;
  int channels = 1;
  int d_embed = 64;
  int heads = 4;
  int local_blocks = 2;   // per-view blocks with shared weights
  int global_blocks = 4;  // blocks over the concatenated sequence
  int mlp_ratio = 4;
  Readout readout = Readout::kFirstClassToken;
  std::string arch = "toy";

  int patches_per_view() const {
    return (image_size / patch_size) * (image_size / patch_size);
  }
  int seq_len() const { return patches_per_view() + 1; }
  int global_seq_len() const { return 4 * seq_len(); }
  int d_mlp() const { return mlp_ratio * d_embed; }
  int total_blocks() const { return local_blocks + global_blocks; }

  /// Named presets: "tiny" (d=192, h=3), "small" (d=384, h=6), both 12 blocks
  /// at 224/16/3-channel inputs; "toy" (d=64, h=4, 6 blocks, 64/8/1-channel).
  static ModelConfig preset(const std::string& name);

  /// Throws std::invalid_argument on any violated invariant. The tiny and
  /// small presets additionally require local_blocks + global_blocks == 12.
  void validate() const;
};

}  // namespace mvt
