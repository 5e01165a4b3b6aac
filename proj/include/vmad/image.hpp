#pragma once

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "vmad/errors.hpp"

namespace vmad {

// 8-bit grayscale image, row-major.
struct GrayImage {
  long width = 0;
  long height = 0;
  std::vector<uint8_t> data;

  uint8_t at(long row, long col) const { return data[static_cast<size_t>(row) * width + col]; }
  uint8_t& at(long row, long col) { return data[static_cast<size_t>(row) * width + col]; }
};

namespace detail {

// PGM header token: skips whitespace and '#' comments.
inline std::string pgm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

}  // namespace detail

// Binary PGM (P5), 8-bit only. Color formats (P3/P6) and ascii PGM are
// rejected, never converted.
inline GrayImage load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::MissingFile, path.string());
  std::string magic = detail::pgm_token(in);
  if (magic != "P5")
    fail(ErrorCode::UnsupportedImage, path.string() + ": expected binary PGM (P5), got '" + magic + "'");
  GrayImage img;
  try {
    img.width = std::stol(detail::pgm_token(in));
    img.height = std::stol(detail::pgm_token(in));
    long maxval = std::stol(detail::pgm_token(in));
    if (maxval <= 0 || maxval > 255)
      fail(ErrorCode::UnsupportedImage, path.string() + ": not 8-bit (maxval " +
                                            std::to_string(maxval) + ")");
  } catch (const std::logic_error&) {
    fail(ErrorCode::ParseError, path.string() + ": malformed PGM header");
  }
  if (img.width <= 0 || img.height <= 0)
    fail(ErrorCode::ParseError, path.string() + ": bad PGM dimensions");
  img.data.resize(static_cast<size_t>(img.width) * img.height);
  in.read(reinterpret_cast<char*>(img.data.data()),
          static_cast<std::streamsize>(img.data.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.data.size()))
    fail(ErrorCode::ParseError, path.string() + ": truncated PGM pixel data");
  return img;
}

inline std::string encode_pgm(const GrayImage& img) {
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.data.data()), img.data.size());
  return out;
}

inline std::optional<std::pair<long, long>> probe_pgm_dims(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  if (detail::pgm_token(in) != "P5") return std::nullopt;
  try {
    long w = std::stol(detail::pgm_token(in));
    long h = std::stol(detail::pgm_token(in));
    if (w > 0 && h > 0) return std::make_pair(w, h);
  } catch (const std::logic_error&) {
  }
  return std::nullopt;
}

}  // namespace vmad
