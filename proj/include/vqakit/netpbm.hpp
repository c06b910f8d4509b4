#pragma once

// Binary PPM (P6) and PGM (P5) with maxval 255.
//
// Readers accept any conforming header (arbitrary whitespace, '#' comments)
// followed by exactly one whitespace byte before the raster. Writers always
// emit the canonical header "P6\n<w> <h>\n255\n" (or P5), so reading and
// re-writing a canonical file reproduces it byte for byte. Bytes after the
// raster are ignored.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vqakit/error.hpp"
#include "vqakit/imageops.hpp"

namespace vqakit {

namespace detail {

struct PnmHeader {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t data_offset = 0;
};

class PnmCursor {
 public:
  explicit PnmCursor(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = static_cast<char>(bytes_[pos_]);
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (is_space(c)) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  std::size_t read_uint(std::string_view what) {
    skip_space_and_comments();
    std::size_t value = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
      value = value * 10 + (bytes_[pos_] - '0');
      if (++digits > 9) fail(std::string(what) + " is too large");
      ++pos_;
    }
    if (digits == 0) fail("expected " + std::string(what));
    return value;
  }

  void expect_single_space() {
    if (pos_ >= bytes_.size() || !is_space(static_cast<char>(bytes_[pos_]))) {
      fail("expected whitespace before raster data");
    }
    ++pos_;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

  [[noreturn]] static void fail(const std::string& msg) {
    throw Error(ErrorCode::kFormat, msg);
  }

 private:
  static bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
           c == '\f';
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline PnmHeader parse_pnm_header(std::span<const std::uint8_t> bytes,
                                  char kind, std::size_t channels) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != kind) {
    PnmCursor::fail(std::string("bad magic number, expected P") + kind);
  }
  PnmCursor cur(bytes);
  cur.advance(2);
  PnmHeader h;
  h.width = cur.read_uint("width");
  h.height = cur.read_uint("height");
  const std::size_t maxval = cur.read_uint("maxval");
  if (h.width == 0 || h.height == 0) PnmCursor::fail("zero image dimension");
  if (maxval != 255) {
    PnmCursor::fail("maxval " + std::to_string(maxval) + " is not 255");
  }
  cur.expect_single_space();
  h.data_offset = cur.pos();
  const std::size_t need = h.width * h.height * channels;
  if (bytes.size() - h.data_offset < need) {
    PnmCursor::fail("truncated raster: need " + std::to_string(need) +
                    " bytes, have " +
                    std::to_string(bytes.size() - h.data_offset));
  }
  return h;
}

inline std::vector<std::uint8_t> encode_pnm(char kind, std::size_t w,
                                            std::size_t h,
                                            std::span<const std::uint8_t> data) {
  const std::size_t channels = kind == '6' ? 3 : 1;
  if (w == 0 || h == 0 || data.size() != w * h * channels) {
    throw Error(ErrorCode::kDimensionMismatch,
                "raster of " + std::to_string(data.size()) +
                    " bytes does not fit " + std::to_string(w) + "x" +
                    std::to_string(h));
  }
  const std::string header = std::string("P") + kind + "\n" +
                             std::to_string(w) + " " + std::to_string(h) +
                             "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), data.begin(), data.end());
  return out;
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::kIo, "read failed: " + path.string());
  return bytes;
}

inline void write_file(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot create '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

}  // namespace detail

inline ImageBuffer decode_ppm(std::span<const std::uint8_t> bytes) {
  const auto h = detail::parse_pnm_header(bytes, '6', 3);
  ImageBuffer img;
  img.width = h.width;
  img.height = h.height;
  const auto first = bytes.begin() + static_cast<std::ptrdiff_t>(h.data_offset);
  img.pixels.assign(first,
                    first + static_cast<std::ptrdiff_t>(h.width * h.height * 3));
  return img;
}

inline MaskBuffer decode_pgm(std::span<const std::uint8_t> bytes) {
  const auto h = detail::parse_pnm_header(bytes, '5', 1);
  MaskBuffer mask;
  mask.width = h.width;
  mask.height = h.height;
  const auto first = bytes.begin() + static_cast<std::ptrdiff_t>(h.data_offset);
  mask.values.assign(first,
                     first + static_cast<std::ptrdiff_t>(h.width * h.height));
  return mask;
}

inline std::vector<std::uint8_t> encode_ppm(const ImageBuffer& img) {
  return detail::encode_pnm('6', img.width, img.height, img.pixels);
}

inline std::vector<std::uint8_t> encode_pgm(const MaskBuffer& mask) {
  return detail::encode_pnm('5', mask.width, mask.height, mask.values);
}

inline ImageBuffer read_image(const std::filesystem::path& path) {
  return decode_ppm(detail::read_file(path));
}

inline MaskBuffer read_mask(const std::filesystem::path& path) {
  return decode_pgm(detail::read_file(path));
}

inline void write_image(const std::filesystem::path& path,
                        const ImageBuffer& img) {
  detail::write_file(path, encode_ppm(img));
}

inline void write_mask(const std::filesystem::path& path,
                       const MaskBuffer& mask) {
  detail::write_file(path, encode_pgm(mask));
}

}  // namespace vqakit
