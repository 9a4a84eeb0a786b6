#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ug/core.hpp"

namespace ug::harness {

// Data range convention: x in [-1, 1] maps to [0, 255].
inline std::uint8_t to_byte(double x) {
  const double v = std::round(255.0 * (x + 1.0) / 2.0);
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

inline double from_byte(std::uint8_t b) { return 2.0 * static_cast<double>(b) / 255.0 - 1.0; }

/// Writes one [H, W] frame as binary PGM (1 channel) or PPM (3 channels).
/// `frame` selects a leading-axis slice for [F, H, W] fields.
inline void write_image(const std::filesystem::path& path, const Field& x, std::size_t frame = 0) {
  const auto& d = x.dims();
  if (d.size() != 2 && d.size() != 3) throw ShapeError("image writer needs [H, W] or [F, H, W], got " + x.shape().str());
  if (x.channels() != 1 && x.channels() != 3) throw ShapeError("image writer needs 1 or 3 channels, got " + x.shape().str());
  const std::size_t h = d[d.size() - 2], w = d[d.size() - 1];
  const std::size_t frames = d.size() == 3 ? d[0] : 1;
  if (frame >= frames) throw ShapeError("frame index out of range");
  const std::size_t plane = x.shape().plane();
  const std::size_t base = frame * h * w;

  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path.string());
  os << (x.channels() == 1 ? "P5" : "P6") << '\n' << w << ' ' << h << "\n255\n";
  std::vector<char> bytes;
  bytes.reserve(h * w * x.channels());
  for (std::size_t i = 0; i < h * w; ++i)
    for (std::size_t c = 0; c < x.channels(); ++c) bytes.push_back(static_cast<char>(to_byte(x[c * plane + base + i])));
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

/// Reads a binary P5 image into a 1-channel [H, W] field in [-1, 1].
inline Field read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read " + path.string());
  auto token = [&] {
    std::string t;
    char ch;
    while (is.get(ch)) {
      if (ch == '#') {
        std::string skip;
        std::getline(is, skip);
      } else if (!std::isspace(static_cast<unsigned char>(ch))) {
        t.push_back(ch);
        break;
      }
    }
    while (is.get(ch) && !std::isspace(static_cast<unsigned char>(ch))) t.push_back(ch);
    return t;
  };
  if (token() != "P5") throw ConfigError(path.string() + ": not a binary PGM");
  const std::size_t w = std::stoul(token()), h = std::stoul(token());
  if (std::stoul(token()) != 255) throw ConfigError(path.string() + ": only maxval 255 is supported");
  std::vector<unsigned char> bytes(w * h);
  is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!is) throw ConfigError(path.string() + ": truncated image data");
  Field out = Field::zeros(1, {h, w});
  for (std::size_t i = 0; i < bytes.size(); ++i) out[i] = from_byte(bytes[i]);
  return out;
}

}  // namespace ug::harness
