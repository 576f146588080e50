#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "divrep/common.hpp"

// Minimal RGB raster support. Binary PPM (P6) is the only format handled
// natively; it is uncompressed, byte-exact, and needs no codec, which keeps
// grid composition deterministic and dependency-free.

namespace divrep {

struct MissingRaster : Error {
  using Error::Error;
};

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<unsigned char> pixels;  // 3 bytes per pixel, row-major

  bool valid() const {
    return width > 0 && height > 0 &&
           pixels.size() == static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3;
  }
};

inline bool looks_like_ppm(std::string_view bytes) {
  return bytes.size() > 2 && bytes[0] == 'P' && bytes[1] == '6';
}

inline std::string encode_ppm(const RgbImage& img) {
  if (!img.valid()) throw Error("cannot encode invalid raster");
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                    "\n255\n";
  out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
  return out;
}

inline RgbImage decode_ppm(std::string_view bytes) {
  if (!looks_like_ppm(bytes)) throw MissingRaster("payload is not a P6 raster");
  std::size_t pos = 2;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> int {
    skip_space();
    int value = 0;
    bool any = false;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      value = value * 10 + (bytes[pos] - '0');
      ++pos;
      any = true;
    }
    if (!any) throw Error("malformed P6 header");
    return value;
  };
  RgbImage img;
  img.width = read_int();
  img.height = read_int();
  const int maxval = read_int();
  if (maxval != 255) throw Error("only 8-bit P6 rasters are supported");
  ++pos;  // single whitespace after maxval
  const std::size_t need =
      static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height) * 3;
  if (bytes.size() - pos < need) throw Error("P6 payload truncated");
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                    bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return img;
}

inline RgbImage resize_nearest(const RgbImage& src, int width, int height) {
  if (!src.valid()) throw Error("cannot resize invalid raster");
  RgbImage dst;
  dst.width = width;
  dst.height = height;
  dst.pixels.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
  for (int y = 0; y < height; ++y) {
    const int sy = static_cast<int>((static_cast<long long>(y) * src.height) / height);
    for (int x = 0; x < width; ++x) {
      const int sx = static_cast<int>((static_cast<long long>(x) * src.width) / width);
      const std::size_t s = (static_cast<std::size_t>(sy) * src.width + sx) * 3;
      const std::size_t d = (static_cast<std::size_t>(y) * width + x) * 3;
      dst.pixels[d] = src.pixels[s];
      dst.pixels[d + 1] = src.pixels[s + 1];
      dst.pixels[d + 2] = src.pixels[s + 2];
    }
  }
  return dst;
}

// Tiles rows of images into one raster; every cell is resized to a
// cell_px-square first, so the result is (rows * cell_px) tall and
// (columns * cell_px) wide.
inline RgbImage compose_grid(const std::vector<std::vector<RgbImage>>& rows, int cell_px) {
  if (rows.empty() || rows[0].empty()) throw Error("grid needs at least one image");
  const std::size_t columns = rows[0].size();
  for (const auto& row : rows) {
    if (row.size() != columns) throw Error("grid rows must have equal lengths");
  }
  RgbImage grid;
  grid.width = static_cast<int>(columns) * cell_px;
  grid.height = static_cast<int>(rows.size()) * cell_px;
  grid.pixels.assign(
      static_cast<std::size_t>(grid.width) * static_cast<std::size_t>(grid.height) * 3, 0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < columns; ++c) {
      const RgbImage cell = resize_nearest(rows[r][c], cell_px, cell_px);
      for (int y = 0; y < cell_px; ++y) {
        const std::size_t src = static_cast<std::size_t>(y) * cell_px * 3;
        const std::size_t dst =
            ((r * cell_px + static_cast<std::size_t>(y)) * static_cast<std::size_t>(grid.width) +
             c * cell_px) *
            3;
        std::copy(cell.pixels.begin() + static_cast<std::ptrdiff_t>(src),
                  cell.pixels.begin() + static_cast<std::ptrdiff_t>(src + cell_px * 3),
                  grid.pixels.begin() + static_cast<std::ptrdiff_t>(dst));
      }
    }
  }
  return grid;
}

}  // namespace divrep
