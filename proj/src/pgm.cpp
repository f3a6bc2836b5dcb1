#include "mvt/pgm.hpp"

#include <fstream>
#include <stdexcept>
#include <string>

namespace mvt {

namespace {

[[noreturn]] void fail(const std::filesystem::path& path, std::streamoff offset,
                       const std::string& what) {
  throw std::runtime_error("malformed PGM " + path.string() + " at byte " +
                           std::to_string(offset) + ": " + what);
}

// Reads one whitespace-delimited unsigned integer, skipping '#' comments.
long read_token(std::ifstream& in, const std::filesystem::path& path) {
  int c = in.get();
  while (c != EOF && (std::isspace(c) || c == '#')) {
    if (c == '#')
      while (c != EOF && c != '\n') c = in.get();
    c = in.get();
  }
  if (c == EOF || !std::isdigit(c)) fail(path, in.tellg(), "expected integer in header");
  long value = 0;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    if (value > 1'000'000'000L) fail(path, in.tellg(), "header value out of range");
    c = in.get();
  }
  if (c != EOF) in.unget();
  return value;
}

}  // namespace

ImageU16 read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open PGM file " + path.string());

  char m0 = static_cast<char>(in.get()), m1 = static_cast<char>(in.get());
  if (m0 != 'P' || m1 != '5') fail(path, 0, "missing P5 magic");

  ImageU16 img;
  img.width = static_cast<int>(read_token(in, path));
  img.height = static_cast<int>(read_token(in, path));
  img.maxval = static_cast<int>(read_token(in, path));
  if (img.width <= 0 || img.height <= 0) fail(path, in.tellg(), "non-positive dimensions");
  if (img.maxval <= 0 || img.maxval > 65535) fail(path, in.tellg(), "maxval out of range");
  int sep = in.get();  // single whitespace byte before the raster
  if (sep == EOF || !std::isspace(sep)) fail(path, in.tellg(), "missing raster separator");

  size_t count = static_cast<size_t>(img.width) * img.height;
  bool two_byte = img.maxval > 255;
  std::vector<char> raw(count * (two_byte ? 2 : 1));
  std::streamoff raster_start = in.tellg();
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (static_cast<size_t>(in.gcount()) != raw.size())
    fail(path, raster_start + in.gcount(), "truncated raster");

  img.pixels.resize(count);
  if (two_byte) {
    for (size_t i = 0; i < count; ++i) {
      uint16_t hi = static_cast<uint8_t>(raw[2 * i]);
      uint16_t lo = static_cast<uint8_t>(raw[2 * i + 1]);
      img.pixels[i] = static_cast<uint16_t>((hi << 8) | lo);
    }
  } else {
    for (size_t i = 0; i < count; ++i) img.pixels[i] = static_cast<uint8_t>(raw[i]);
  }
  for (size_t i = 0; i < count; ++i)
    if (img.pixels[i] > img.maxval)
      fail(path, raster_start + static_cast<std::streamoff>(two_byte ? 2 * i : i),
           "sample exceeds maxval");
  return img;
}

void write_pgm(const ImageU16& img, const std::filesystem::path& path) {
  if (img.maxval != 255 && img.maxval != 65535)
    throw std::invalid_argument("write_pgm: maxval must be 255 or 65535, got " +
                                std::to_string(img.maxval));
  if (img.pixels.size() != static_cast<size_t>(img.width) * img.height)
    throw std::invalid_argument("write_pgm: pixel buffer does not match dimensions");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "P5\n" << img.width << " " << img.height << "\n" << img.maxval << "\n";
  if (img.maxval > 255) {
    std::vector<char> raw(img.pixels.size() * 2);
    for (size_t i = 0; i < img.pixels.size(); ++i) {
      raw[2 * i] = static_cast<char>(img.pixels[i] >> 8);
      raw[2 * i + 1] = static_cast<char>(img.pixels[i] & 0xFF);
    }
    out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
  } else {
    std::vector<char> raw(img.pixels.size());
    for (size_t i = 0; i < img.pixels.size(); ++i) raw[i] = static_cast<char>(img.pixels[i]);
    out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace mvt
