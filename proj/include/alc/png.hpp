#pragma once

// Minimal 8-bit PNG encoder (RGB or RGBA), zlib for deflate and CRC.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <zlib.h>

#include "alc/error.hpp"

namespace alc::png {

namespace detail {

inline void put_be32(std::string& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<char>((v >> s) & 0xFF));
}

inline void put_chunk(std::string& out, const char* type, const std::string& data) {
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  std::string body(type, 4);
  body += data;
  out += body;
  put_be32(out, static_cast<std::uint32_t>(
                    crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()))));
}

}  // namespace detail

/// `pixels` is row-major with `channels` (3 or 4) bytes per pixel.
inline std::string encode(std::uint32_t width, std::uint32_t height, int channels, std::span<const std::uint8_t> pixels) {
  if ((channels != 3 && channels != 4) || pixels.size() != std::size_t{width} * height * channels)
    throw Error(Errc::InvalidArgument, "png: pixel buffer does not match width x height x channels");
  std::string out("\x89PNG\r\n\x1a\n", 8);

  std::string ihdr;
  detail::put_be32(ihdr, width);
  detail::put_be32(ihdr, height);
  ihdr.push_back(8);                                  // bit depth
  ihdr.push_back(static_cast<char>(channels == 4 ? 6 : 2));  // colour type
  ihdr.append(3, '\0');                               // compression, filter, interlace
  detail::put_chunk(out, "IHDR", ihdr);

  const std::size_t stride = std::size_t{width} * channels;
  std::vector<std::uint8_t> raw;
  raw.reserve((stride + 1) * height);
  for (std::uint32_t y = 0; y < height; ++y) {
    raw.push_back(0);  // filter: none
    raw.insert(raw.end(), pixels.begin() + static_cast<std::ptrdiff_t>(y * stride),
               pixels.begin() + static_cast<std::ptrdiff_t>((y + 1) * stride));
  }
  uLongf len = compressBound(static_cast<uLong>(raw.size()));
  std::string z(len, '\0');
  if (compress2(reinterpret_cast<Bytef*>(z.data()), &len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw Error(Errc::IoFailure, "png: deflate failed");
  z.resize(len);
  detail::put_chunk(out, "IDAT", z);
  detail::put_chunk(out, "IEND", "");
  return out;
}

}  // namespace alc::png
