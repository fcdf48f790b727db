#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>

#include <zlib.h>

#include "sdlab/scene_io.hpp"

namespace sdlab {

namespace {

void put_be32(std::string& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_chunk(std::string& out, const char* type, const std::string& body) {
  put_be32(out, static_cast<std::uint32_t>(body.size()));
  std::string tagged(type, 4);
  tagged += body;
  out += tagged;
  const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(tagged.data()), static_cast<uInt>(tagged.size()));
  put_be32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

void write_png(const std::string& path, const Vec& pixels, int height, int width) {
  if (pixels.size() != static_cast<Eigen::Index>(height) * width * 3) {
    throw ParameterError("write_png: pixel buffer does not match the image size");
  }
  std::string raw;
  raw.reserve(static_cast<std::size_t>(height) * (1 + 3 * static_cast<std::size_t>(width)));
  for (int r = 0; r < height; ++r) {
    raw.push_back(0);  // filter: none
    for (int c = 0; c < width * 3; ++c) {
      const double v = std::clamp(pixels[static_cast<Eigen::Index>(r) * width * 3 + c], 0.0, 1.0);
      raw.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
  }
  uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
  std::string packed(packed_size, '\0');
  if (compress2(reinterpret_cast<Bytef*>(packed.data()), &packed_size, reinterpret_cast<const Bytef*>(raw.data()),
                static_cast<uLong>(raw.size()), 9) != Z_OK) {
    throw IoError("zlib compression failed for " + path);
  }
  packed.resize(packed_size);

  std::string out("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  put_be32(ihdr, static_cast<std::uint32_t>(width));
  put_be32(ihdr, static_cast<std::uint32_t>(height));
  ihdr += std::string("\x08\x02\x00\x00\x00", 5);  // 8-bit RGB
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", packed);
  put_chunk(out, "IEND", "");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("failed writing " + path);
}

void write_png(const std::string& path, const RenderedView& view) {
  write_png(path, view.pixels, view.height, view.width);
}

}  // namespace sdlab
