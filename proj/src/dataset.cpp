#include "mvt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace mvt {

namespace fs = std::filesystem;

void SynthConfig::validate() const {
  if (cases < 0) throw std::invalid_argument("synth config: cases must be nonnegative");
  if (malignant_fraction < 0.0 || malignant_fraction > 1.0)
    throw std::invalid_argument("synth config: malignant_fraction must be in [0, 1]");
  if (image_size < 4 * blob_radius() || blob_radius() < 1)
    throw std::invalid_argument("synth config: image_size too small for blob radius");
  if (distractor_rate < 0.0 || distractor_rate > 1.0)
    throw std::invalid_argument("synth config: distractor_rate must be in [0, 1]");
  if (noise_scale < 0.0) throw std::invalid_argument("synth config: noise_scale must be nonnegative");
}

ImageU16 downsample_avg(const ImageU16& img, int k) {
  if (k <= 0) throw std::invalid_argument("downsample_avg: kernel size must be positive");
  ImageU16 out;
  out.width = (img.width + k - 1) / k;
  out.height = (img.height + k - 1) / k;
  out.maxval = img.maxval;
  out.pixels.resize(static_cast<size_t>(out.width) * out.height);
  for (int oy = 0; oy < out.height; ++oy) {
    int y0 = oy * k, y1 = std::min(y0 + k, img.height);
    for (int ox = 0; ox < out.width; ++ox) {
      int x0 = ox * k, x1 = std::min(x0 + k, img.width);
      long long sum = 0;
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) sum += img.at(x, y);
      long long count = static_cast<long long>(y1 - y0) * (x1 - x0);
      out.at(ox, oy) = static_cast<uint16_t>(
          std::llround(static_cast<double>(sum) / static_cast<double>(count)));
    }
  }
  return out;
}

Tensor preprocess_view(const ImageU16& img, const ModelConfig& cfg) {
  if (img.width <= 0 || img.height <= 0)
    throw std::invalid_argument("preprocess_view: zero-extent image");
  int s = cfg.image_size, c = cfg.channels;
  double value_scale = 255.0 / img.maxval;

  // Corner-aligned bilinear sampling into an s x s plane.
  std::vector<double> plane(static_cast<size_t>(s) * s);
  double sy = s > 1 ? static_cast<double>(img.height - 1) / (s - 1) : 0.0;
  double sx = s > 1 ? static_cast<double>(img.width - 1) / (s - 1) : 0.0;
  for (int oy = 0; oy < s; ++oy) {
    double fy = oy * sy;
    int y0 = static_cast<int>(fy);
    int y1 = std::min(y0 + 1, img.height - 1);
    double wy = fy - y0;
    for (int ox = 0; ox < s; ++ox) {
      double fx = ox * sx;
      int x0 = static_cast<int>(fx);
      int x1 = std::min(x0 + 1, img.width - 1);
      double wx = fx - x0;
      double top = (1.0 - wx) * img.at(x0, y0) + wx * img.at(x1, y0);
      double bot = (1.0 - wx) * img.at(x0, y1) + wx * img.at(x1, y1);
      plane[static_cast<size_t>(oy) * s + ox] = value_scale * ((1.0 - wy) * top + wy * bot);
    }
  }

  Tensor out = Tensor::zeros({c, s, s});
  auto dst = out.data();
  for (int ch = 0; ch < c; ++ch)
    std::copy(plane.begin(), plane.end(), dst.begin() + static_cast<size_t>(ch) * plane.size());
  return out;
}

namespace {

void paint_blob(std::vector<double>& field, int size, double cx, double cy, double sigma,
                double amplitude) {
  if (amplitude == 0.0) return;
  double inv = 1.0 / (2.0 * sigma * sigma);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
      field[static_cast<size_t>(y) * size + x] += amplitude * std::exp(-d2 * inv);
    }
}

}  // namespace

CaseRecord synth_case(Rng& rng, const std::string& case_id, int label, const SynthConfig& cfg) {
  cfg.validate();
  int size = cfg.image_size;
  double sigma = cfg.blob_radius() / 2.0;
  double jitter = size / 32.0;

  // Smooth per-view background: a coarse grid upsampled bilinearly.
  constexpr int kGrid = 8;
  std::array<std::vector<double>, 4> fields;
  for (auto& field : fields) {
    std::array<double, kGrid * kGrid> grid;
    for (auto& g : grid) g = 0.40 + 0.08 * rng.normal();
    field.resize(static_cast<size_t>(size) * size);
    double step = static_cast<double>(kGrid - 1) / (size - 1);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        double fy = y * step, fx = x * step;
        int y0 = std::min(static_cast<int>(fy), kGrid - 2);
        int x0 = std::min(static_cast<int>(fx), kGrid - 2);
        double wy = fy - y0, wx = fx - x0;
        double top = (1 - wx) * grid[y0 * kGrid + x0] + wx * grid[y0 * kGrid + x0 + 1];
        double bot = (1 - wx) * grid[(y0 + 1) * kGrid + x0] + wx * grid[(y0 + 1) * kGrid + x0 + 1];
        field[static_cast<size_t>(y) * size + x] = (1 - wy) * top + wy * bot;
      }
  }

  // All stochastic choices are drawn for every case, used or not, so the
  // draw count never depends on the label.
  bool left_side = rng.uniform() < 0.5;
  double lesion_x = rng.uniform(0.25, 0.75) * size;
  double lesion_y = rng.uniform(0.25, 0.75) * size;
  std::array<std::pair<double, double>, 2> lesion_jitter;  // CC, MLO
  for (auto& j : lesion_jitter)
    j = {rng.uniform(-jitter, jitter), rng.uniform(-jitter, jitter)};
  std::array<bool, 4> distractor;
  std::array<std::pair<double, double>, 4> distractor_pos;
  for (int v = 0; v < 4; ++v) {
    distractor[v] = rng.uniform() < cfg.distractor_rate;
    distractor_pos[v] = {rng.uniform(0.25, 0.75) * size, rng.uniform(0.25, 0.75) * size};
  }

  if (label == 1) {
    int cc = left_side ? static_cast<int>(View::kLCC) : static_cast<int>(View::kRCC);
    int mlo = left_side ? static_cast<int>(View::kLMLO) : static_cast<int>(View::kRMLO);
    paint_blob(fields[cc], size, lesion_x + lesion_jitter[0].first,
               lesion_y + lesion_jitter[0].second, sigma, cfg.blob_intensity);
    paint_blob(fields[mlo], size, lesion_x + lesion_jitter[1].first,
               lesion_y + lesion_jitter[1].second, sigma, cfg.blob_intensity);
  } else {
    for (int v = 0; v < 4; ++v)
      if (distractor[v])
        paint_blob(fields[v], size, distractor_pos[v].first, distractor_pos[v].second, sigma,
                   cfg.blob_intensity);
  }

  CaseRecord rec;
  rec.case_id = case_id;
  rec.label = label;
  for (int v = 0; v < 4; ++v) {
    auto& field = fields[v];
    for (auto& p : field) p += cfg.noise_scale * rng.normal();
    ImageU16& img = rec.views[v];
    img.width = img.height = size;
    img.maxval = 255;
    img.pixels.resize(field.size());
    for (size_t i = 0; i < field.size(); ++i) {
      double clipped = std::clamp(field[i], 0.0, 1.0);
      img.pixels[i] = static_cast<uint16_t>(std::llround(clipped * 255.0));
    }
  }
  return rec;
}

std::vector<CaseRecord> generate_dataset(const SynthConfig& cfg) {
  cfg.validate();
  long malignant = std::llround(cfg.cases * cfg.malignant_fraction);
  std::vector<int> labels(cfg.cases, 0);
  std::fill(labels.begin(), labels.begin() + malignant, 1);
  Rng label_rng(substream_seed(cfg.seed, "labels"));
  label_rng.shuffle(labels);

  std::vector<CaseRecord> cases;
  cases.reserve(cfg.cases);
  for (int i = 0; i < cfg.cases; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "case%04d", i);
    Rng case_rng(substream_seed(cfg.seed, "case", static_cast<uint64_t>(i)));
    cases.push_back(synth_case(case_rng, id, labels[i], cfg));
  }
  return cases;
}

void write_case(const CaseRecord& rec, const fs::path& dir) {
  for (int v = 0; v < 4; ++v)
    write_pgm(rec.views[v], dir / (rec.case_id + "_" + kViewNames[v] + ".pgm"));
}

std::vector<ManifestEntry> load_manifest(const fs::path& dir) {
  fs::path path = dir / "manifest.csv";
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "case_id,label")
    throw std::runtime_error("manifest " + path.string() + ": expected header 'case_id,label'");
  std::vector<ManifestEntry> entries;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos || comma == 0)
      throw std::runtime_error("manifest " + path.string() + " line " + std::to_string(line_no) +
                               ": expected 'case_id,label'");
    std::string label_str = line.substr(comma + 1);
    if (label_str != "0" && label_str != "1")
      throw std::runtime_error("manifest " + path.string() + " line " + std::to_string(line_no) +
                               ": label '" + label_str + "' outside {0,1}");
    entries.push_back({line.substr(0, comma), label_str == "1" ? 1 : 0});
  }
  return entries;
}

namespace {

CaseRecord read_case_views(const std::string& case_id, int label, const fs::path& dir) {
  CaseRecord rec;
  rec.case_id = case_id;
  rec.label = label;
  for (int v = 0; v < 4; ++v) {
    fs::path path = dir / (case_id + "_" + kViewNames[v] + ".pgm");
    if (!fs::exists(path))
      throw std::runtime_error("case " + case_id + ": missing view file " + kViewNames[v] + " (" +
                               path.string() + ")");
    rec.views[v] = read_pgm(path);
  }
  return rec;
}

}  // namespace

CaseRecord read_case(const std::string& case_id, const fs::path& dir) {
  for (const auto& entry : load_manifest(dir))
    if (entry.case_id == case_id) return read_case_views(case_id, entry.label, dir);
  throw std::runtime_error("case " + case_id + " not listed in manifest of " + dir.string());
}

void write_dataset(const std::vector<CaseRecord>& cases, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream manifest(dir / "manifest.csv", std::ios::trunc);
  if (!manifest) throw std::runtime_error("cannot write manifest in " + dir.string());
  manifest << "case_id,label\n";
  for (const auto& rec : cases) {
    write_case(rec, dir);
    manifest << rec.case_id << "," << rec.label << "\n";
  }
  if (!manifest) throw std::runtime_error("manifest write failed in " + dir.string());
}

std::vector<CaseRecord> load_dataset(const fs::path& dir) {
  std::vector<CaseRecord> cases;
  for (const auto& entry : load_manifest(dir))
    cases.push_back(read_case_views(entry.case_id, entry.label, dir));
  return cases;
}

}  // namespace mvt
