#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace mvt {

/// Grayscale raster, up to 16 bits per sample. maxval doubles as the declared
/// dynamic range (255 for 8-bit, 65535 for 16-bit, 4095 for 12-bit data held
/// in memory).
struct ImageU16 {
  int width = 0;
  int height = 0;
  int maxval = 255;
  std::vector<uint16_t> pixels;  // row-major

  uint16_t at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }
  uint16_t& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
};

/// Binary (P5) PGM reader. Accepts maxval up to 65535; samples above 255 are
/// two bytes, big-endian, per the Netpbm convention. Throws std::runtime_error
/// naming the byte offset on malformed input.
ImageU16 read_pgm(const std::filesystem::path& path);

/// Binary (P5) PGM writer; maxval must be 255 or 65535.
void write_pgm(const ImageU16& img, const std::filesystem::path& path);

}  // namespace mvt
