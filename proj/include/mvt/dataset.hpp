#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "mvt/config.hpp"
#include "mvt/pgm.hpp"
#include "mvt/rng.hpp"
#include "mvt/tensor.hpp"

namespace mvt {

/// The four mammographic projections of one screening case, in the fixed
/// order used everywhere downstream (sequence concatenation, file naming).
enum class View { kLCC = 0, kRCC = 1, kLMLO = 2, kRMLO = 3 };
inline constexpr std::array<const char*, 4> kViewNames = {"LCC", "RCC", "LMLO", "RMLO"};

struct CaseRecord {
  std::string case_id;
  std::array<ImageU16, 4> views;  // indexed by View
  int label = 0;                  // 0 = benign, 1 = malignant
};

/// Synthetic four-view generator. Malignant cases plant a Gaussian blob in
/// BOTH views of one randomly chosen side at geometrically correlated
/// positions; benign cases may receive uncorrelated single-view blobs of the
/// same intensity (distractors), so per-view blob presence alone does not
/// determine the label.
struct SynthConfig {
  int image_size = 64;
  int cases = 40;
  double malignant_fraction = 0.5;
  double blob_intensity = 0.55;  // lesion contrast, relative to full scale
  double distractor_rate = 0.3;  // per-view chance of a benign decoy blob
  double noise_scale = 0.02;
  uint64_t seed = 0;

  int blob_radius() const { return image_size / 8; }
  void validate() const;
};

/// k x k pixel-average downsampling with partial edge tiles: output extents
/// are ceil(H/k) x ceil(W/k), each output pixel the rounded mean of the
/// pixels its tile actually covers.
ImageU16 downsample_avg(const ImageU16& img, int k);

/// Scales samples by 255/maxval, bilinearly resizes (corner-aligned) to
/// cfg.image_size square, and replicates across cfg.channels. The result is a
/// constant {C,S,S} tensor with values in [0, 255].
Tensor preprocess_view(const ImageU16& img, const ModelConfig& cfg);

/// One case from an explicit stream; consumes the same number of draws
/// regardless of label or blob intensity, so intensity sweeps and
/// benign/malignant pairs stay pixel-comparable under a shared seed.
CaseRecord synth_case(Rng& rng, const std::string& case_id, int label, const SynthConfig& cfg);

/// Full dataset for cfg.seed; exactly round(cases * malignant_fraction)
/// malignant labels, deterministically interleaved.
std::vector<CaseRecord> generate_dataset(const SynthConfig& cfg);

struct ManifestEntry {
  std::string case_id;
  int label = 0;
};

// On-disk layout: {case_id}_{LCC|RCC|LMLO|RMLO}.pgm plus manifest.csv with
// header "case_id,label" (1 = malignant), one row per case in dataset order.
void write_case(const CaseRecord& rec, const std::filesystem::path& dir);
CaseRecord read_case(const std::string& case_id, const std::filesystem::path& dir);
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& dir);
void write_dataset(const std::vector<CaseRecord>& cases, const std::filesystem::path& dir);
std::vector<CaseRecord> load_dataset(const std::filesystem::path& dir);

}  // namespace mvt
