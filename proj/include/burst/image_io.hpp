#pragma once

#include <png.h>

#include <cctype>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "burst/image.hpp"

namespace burst {

namespace detail {

inline std::uint16_t to_u16(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint16_t>(std::lround(c * 65535.0));
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace detail

/// Writes binary P5 PGM, maxval 65535 (big-endian samples).
inline void save_pgm16(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputFormat("cannot open for writing: " + path);
  out << "P5\n" << img.width << " " << img.height << "\n65535\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(img.width) * 2);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::uint16_t v = detail::to_u16(img.at(x, y));
      row[2 * x] = static_cast<unsigned char>(v >> 8);
      row[2 * x + 1] = static_cast<unsigned char>(v & 0xff);
    }
    out.write(reinterpret_cast<const char*>(row.data()), row.size());
  }
  if (!out) throw InputFormat("short write: " + path);
}

/// Writes an 8-bit P5 PGM validity mask (255 = valid).
inline void save_mask_pgm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputFormat("cannot open for writing: " + path);
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(img.width));
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      row[x] = img.valid_at(x, y) ? 255 : 0;
    }
    out.write(reinterpret_cast<const char*>(row.data()), row.size());
  }
}

namespace detail {

inline void skip_pnm_space(std::istream& in) {
  int c = in.peek();
  while (c == '#' || std::isspace(c)) {
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else {
      in.get();
    }
    c = in.peek();
  }
}

}  // namespace detail

inline Image load_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputFormat("cannot open: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5") throw InputFormat(path + ": not a binary PGM");
  int w = 0, h = 0, maxval = 0;
  detail::skip_pnm_space(in);
  in >> w;
  detail::skip_pnm_space(in);
  in >> h;
  detail::skip_pnm_space(in);
  in >> maxval;
  if (!in || w <= 0 || h <= 0 || (maxval != 255 && maxval != 65535)) {
    throw InputFormat(path + ": bad PGM header");
  }
  in.get();  // single whitespace after maxval
  Image img;
  img.width = w;
  img.height = h;
  img.data.resize(static_cast<std::size_t>(w) * h);
  const int bytes = maxval == 65535 ? 2 : 1;
  std::vector<unsigned char> row(static_cast<std::size_t>(w) * bytes);
  for (int y = 0; y < h; ++y) {
    in.read(reinterpret_cast<char*>(row.data()), row.size());
    if (!in) throw InputFormat(path + ": truncated PGM data");
    for (int x = 0; x < w; ++x) {
      const unsigned v = bytes == 2 ? (row[2 * x] << 8 | row[2 * x + 1]) : row[x];
      img.at(x, y) = static_cast<double>(v) / maxval;
    }
  }
  return img;
}

/// Writes 16-bit grayscale PNG.
inline void save_png16(const Image& img, const std::string& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw InputFormat("cannot open for writing: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                            nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw InputFormat("libpng write failure: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width, img.height, 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<unsigned char> row(static_cast<std::size_t>(img.width) * 2);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::uint16_t v = detail::to_u16(img.at(x, y));
      row[2 * x] = static_cast<unsigned char>(v >> 8);  // PNG is big-endian
      row[2 * x + 1] = static_cast<unsigned char>(v & 0xff);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

inline Image load_png(const std::string& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw InputFormat("cannot open: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                           nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InputFormat("libpng read failure: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (color != PNG_COLOR_TYPE_GRAY || (depth != 8 && depth != 16)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InputFormat(path + ": expected 8/16-bit grayscale PNG");
  }
  Image img;
  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  img.data.resize(static_cast<std::size_t>(w) * h);
  const int bytes = depth / 8;
  std::vector<unsigned char> row(static_cast<std::size_t>(w) * bytes);
  const double maxval = depth == 16 ? 65535.0 : 255.0;
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (png_uint_32 x = 0; x < w; ++x) {
      const unsigned v = bytes == 2 ? (row[2 * x] << 8 | row[2 * x + 1]) : row[x];
      img.data[static_cast<std::size_t>(y) * w + x] = static_cast<double>(v) / maxval;
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

/// Dispatches on file magic: PNG signature or P5.
inline Image load_image(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw InputFormat("cannot open: " + path);
  unsigned char sig[2] = {0, 0};
  probe.read(reinterpret_cast<char*>(sig), 2);
  probe.close();
  if (sig[0] == 0x89 && sig[1] == 'P') return load_png(path);
  if (sig[0] == 'P' && sig[1] == '5') return load_pgm(path);
  throw InputFormat(path + ": unrecognized image format (want 16-bit PNG or P5 PGM)");
}

inline void save_image(const Image& img, const std::string& path) {
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".pgm") {
    save_pgm16(img, path);
  } else {
    save_png16(img, path);
  }
}

}  // namespace burst
