#include "mvt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "mvt/config_json.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace mvt {

namespace {

constexpr char kMagic[4] = {'M', 'V', 'T', '1'};
constexpr int kFormatVersion = 1;

[[noreturn]] void fail(const std::filesystem::path& path, uint64_t offset, const std::string& what) {
  throw std::runtime_error("checkpoint " + path.string() + " at byte " + std::to_string(offset) +
                           ": " + what);
}

}  // namespace

void save_checkpoint(ParamStore& params, const ModelConfig& cfg,
                     const std::filesystem::path& path) {
  nlohmann::json table = nlohmann::json::array();
  std::vector<float> payload;
  uint64_t offset = 0;
  params.for_each_param([&](const std::string& name, Tensor& t) {
    table.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    for (double v : t.data()) payload.push_back(static_cast<float>(v));
    offset += t.numel() * sizeof(float);
  });
  nlohmann::json header = {
      {"format_version", kFormatVersion},
      {"config", model_config_to_json(cfg)},
      {"tensors", std::move(table)},
  };
  std::string header_str = header.dump();
  if (header_str.size() > 0xFFFFFFFFull) throw std::runtime_error("checkpoint header too large");

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(kMagic, 4);
  uint32_t header_len = static_cast<uint32_t>(header_str.size());
  out.write(reinterpret_cast<const char*>(&header_len), 4);
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::pair<ParamStore, ModelConfig> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  in.seekg(0, std::ios::end);
  uint64_t file_size = static_cast<uint64_t>(in.tellg());
  in.seekg(0);

  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    fail(path, 0, "bad magic (expected 'MVT1')");
  uint32_t header_len = 0;
  if (!in.read(reinterpret_cast<char*>(&header_len), 4)) fail(path, 4, "truncated header length");
  if (8ull + header_len > file_size) fail(path, 4, "header length exceeds file size");

  std::string header_str(header_len, '\0');
  if (!in.read(header_str.data(), header_len)) fail(path, 8, "truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_str);
  } catch (const nlohmann::json::exception& e) {
    fail(path, 8, std::string("header is not valid JSON: ") + e.what());
  }
  if (header.value("format_version", -1) != kFormatVersion)
    fail(path, 8, "unsupported format_version");

  ModelConfig cfg = model_config_from_json(header.at("config"));
  cfg.validate();

  ParamStore store = init_params(cfg, 0);
  auto expected = param_shapes(cfg);
  const auto& table = header.at("tensors");
  if (table.size() != expected.size())
    fail(path, 8, "tensor table has " + std::to_string(table.size()) + " entries, config needs " +
                      std::to_string(expected.size()));

  uint64_t payload_start = 8ull + header_len;
  size_t idx = 0;
  std::vector<float> buffer;
  store.for_each_param([&](const std::string& name, Tensor& t) {
    const auto& entry = table.at(idx);
    const auto& [expected_name, expected_shape] = expected[idx];
    ++idx;
    if (entry.at("name").get<std::string>() != expected_name)
      fail(path, payload_start, "tensor " + std::to_string(idx - 1) + " named '" +
                                    entry.at("name").get<std::string>() + "', expected '" +
                                    expected_name + "'");
    Shape shape = entry.at("shape").get<Shape>();
    if (shape != expected_shape)
      fail(path, payload_start,
           "tensor " + name + " has shape " + shape_str(shape) + ", expected " +
               shape_str(expected_shape));
    uint64_t offset = entry.at("offset").get<uint64_t>();
    uint64_t bytes = shape_numel(shape) * sizeof(float);
    if (payload_start + offset + bytes > file_size)
      fail(path, payload_start + offset, "tensor " + name + " extends past end of file");
    buffer.resize(shape_numel(shape));
    in.seekg(static_cast<std::streamoff>(payload_start + offset));
    if (!in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(bytes)))
      fail(path, payload_start + offset, "truncated tensor " + name);
    auto dst = t.data();
    for (size_t i = 0; i < buffer.size(); ++i) dst[i] = static_cast<double>(buffer[i]);
  });
  return {std::move(store), cfg};
}

}  // namespace mvt
