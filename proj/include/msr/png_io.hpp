#pragma once

// Minimal libpng wrapper: 8/16-bit gray, RGB and RGBA, samples widened to uint16.

#include <png.h>

#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "msr/error.hpp"

namespace msr {

struct PngImage {
  int width = 0;
  int height = 0;
  int channels = 0;    // 1, 2 (gray + alpha), 3 or 4
  int bit_depth = 8;   // 8 or 16
  std::vector<std::uint16_t> samples;  // row-major, interleaved

  std::uint16_t at(int x, int y, int c) const {
    return samples[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

inline PngImage read_png(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw FileMissing("read_png: missing file " + path.string());
  FILE* fp = std::fopen(path.string().c_str(), "rb");
  if (fp == nullptr) throw IoError("read_png: cannot open " + path.string());

  png_byte header[8] = {};
  if (std::fread(header, 1, 8, fp) != 8 || png_sig_cmp(header, 0, 8) != 0) {
    std::fclose(fp);
    throw FormatError("read_png: not a PNG file: " + path.string());
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw IoError("read_png: libpng initialization failed");
  }

  PngImage img;
  std::vector<png_byte> buffer;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw FormatError("read_png: corrupt PNG data in " + path.string());
  }
  png_init_io(png, fp);
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  const int depth_in = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth_in < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_read_update_info(png, info);

  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.channels = png_get_channels(png, info);
  img.bit_depth = png_get_bit_depth(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  buffer.resize(row_bytes * static_cast<std::size_t>(img.height));
  rows.resize(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) rows[y] = buffer.data() + row_bytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);

  const std::size_t count = static_cast<std::size_t>(img.width) * img.height * img.channels;
  img.samples.resize(count);
  if (img.bit_depth == 16) {
    for (std::size_t i = 0; i < count; ++i) {
      img.samples[i] = static_cast<std::uint16_t>((buffer[2 * i] << 8) | buffer[2 * i + 1]);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) img.samples[i] = buffer[i];
  }
  return img;
}

/// Writes big-endian samples; `channels` in {1, 3, 4}, `bit_depth` in {8, 16}.
inline void write_png(const std::filesystem::path& path, const PngImage& img) {
  if (img.channels != 1 && img.channels != 3 && img.channels != 4) throw InvalidArgument("write_png: bad channel count");
  if (img.bit_depth != 8 && img.bit_depth != 16) throw InvalidArgument("write_png: bad bit depth");
  if (img.samples.size() != static_cast<std::size_t>(img.width) * img.height * img.channels) {
    throw InvalidArgument("write_png: sample count does not match dimensions");
  }
  const int bytes = img.bit_depth / 8;
  const std::size_t row_bytes = static_cast<std::size_t>(img.width) * img.channels * bytes;
  std::vector<png_byte> buffer(row_bytes * img.height);
  for (std::size_t i = 0; i < img.samples.size(); ++i) {
    if (bytes == 2) {
      buffer[2 * i] = static_cast<png_byte>(img.samples[i] >> 8);
      buffer[2 * i + 1] = static_cast<png_byte>(img.samples[i] & 0xff);
    } else {
      buffer[i] = static_cast<png_byte>(img.samples[i]);
    }
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) rows[y] = buffer.data() + row_bytes * y;

  FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (fp == nullptr) throw IoError("write_png: cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("write_png: libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("write_png: failed writing " + path.string());
  }
  png_init_io(png, fp);
  const int color = img.channels == 1 ? PNG_COLOR_TYPE_GRAY
                    : img.channels == 3 ? PNG_COLOR_TYPE_RGB
                                        : PNG_COLOR_TYPE_RGB_ALPHA;
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), img.bit_depth,
               color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fclose(fp) != 0) throw IoError("write_png: failed closing " + path.string());
}

}  // namespace msr
