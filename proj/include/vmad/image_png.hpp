#pragma once

#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>

#include <png.h>

#include "vmad/errors.hpp"
#include "vmad/image.hpp"

namespace vmad {

namespace detail {

struct PngReader {
  std::FILE* fp = nullptr;
  png_structp png = nullptr;
  png_infop info = nullptr;

  ~PngReader() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) std::fclose(fp);
  }

  // Returns false (instead of throwing) on any libpng failure so callers
  // can decide between probe semantics and hard errors.
  bool open(const std::filesystem::path& path) {
    fp = std::fopen(path.string().c_str(), "rb");
    if (!fp) return false;
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, fp) != 8 || png_sig_cmp(sig, 0, 8) != 0) return false;
    png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) return false;
    info = png_create_info_struct(png);
    if (!info) return false;
    if (setjmp(png_jmpbuf(png))) return false;
    png_init_io(png, fp);
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    return true;
  }
};

}  // namespace detail

// Grayscale 8-bit PNG. Color, palette, alpha and 16-bit inputs are
// rejected, never converted.
inline GrayImage load_png_gray(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorCode::MissingFile, path.string());
  detail::PngReader r;
  if (!r.open(path)) fail(ErrorCode::ParseError, path.string() + ": not a readable PNG");

  const png_byte color_type = png_get_color_type(r.png, r.info);
  const png_byte bit_depth = png_get_bit_depth(r.png, r.info);
  if (color_type != PNG_COLOR_TYPE_GRAY)
    fail(ErrorCode::UnsupportedImage, path.string() + ": not grayscale (color type " +
                                          std::to_string(color_type) + ")");
  if (bit_depth != 8)
    fail(ErrorCode::UnsupportedImage,
         path.string() + ": not 8-bit (depth " + std::to_string(bit_depth) + ")");

  GrayImage img;
  img.width = static_cast<long>(png_get_image_width(r.png, r.info));
  img.height = static_cast<long>(png_get_image_height(r.png, r.info));
  img.data.resize(static_cast<size_t>(img.width) * img.height);

  if (setjmp(png_jmpbuf(r.png)))
    fail(ErrorCode::ParseError, path.string() + ": corrupt PNG data");
  png_set_interlace_handling(r.png);
  png_read_update_info(r.png, r.info);
  std::vector<png_bytep> rows(static_cast<size_t>(img.height));
  for (long y = 0; y < img.height; ++y)
    rows[static_cast<size_t>(y)] = img.data.data() + static_cast<size_t>(y) * img.width;
  png_read_image(r.png, rows.data());
  return img;
}

inline void write_png_gray(const std::filesystem::path& path, const GrayImage& img) {
  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) fail(ErrorCode::IoError, "cannot open " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, info ? &info : nullptr);
    std::fclose(fp);
    fail(ErrorCode::IoError, "png write failed: " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (long y = 0; y < img.height; ++y)
    png_write_row(png, const_cast<png_bytep>(img.data.data() + static_cast<size_t>(y) * img.width));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

inline std::optional<std::pair<long, long>> probe_png_dims(const std::filesystem::path& path) {
  detail::PngReader r;
  if (!r.open(path)) return std::nullopt;
  return std::make_pair(static_cast<long>(png_get_image_width(r.png, r.info)),
                        static_cast<long>(png_get_image_height(r.png, r.info)));
}

// Dispatch on file magic, not extension.
inline GrayImage load_gray_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::MissingFile, path.string());
  char magic[2] = {0, 0};
  in.read(magic, 2);
  in.close();
  if (magic[0] == 'P' && magic[1] == '5') return load_pgm(path);
  if (static_cast<unsigned char>(magic[0]) == 0x89 && magic[1] == 'P') return load_png_gray(path);
  fail(ErrorCode::UnsupportedImage, path.string() + ": neither binary PGM nor PNG");
}

inline std::optional<std::pair<long, long>> probe_image_dims(const std::filesystem::path& path) {
  if (auto d = probe_pgm_dims(path)) return d;
  return probe_png_dims(path);
}

}  // namespace vmad
