#pragma once

// Segmentation-driven enhancement of RGB images.
//
// highlight: out = clamp(p + round(g * m), 0, 255)
// contrast:  out = clamp(round(p * (m + beta * (1 - m))), 0, 255)
//
// with m = mask / 255. The contrast factor is written as m + beta(1 - m)
// rather than beta + (1 - beta)m so that m = 1 and beta = 1 both give a factor
// of exactly 1.0 in binary floating point, making those configurations
// bit-exact no-ops.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vqakit/error.hpp"

namespace vqakit {

struct ImageBuffer {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB

  ImageBuffer() = default;
  ImageBuffer(std::size_t w, std::size_t h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(w * h * 3, fill) {}

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) {
    return pixels[(y * width + x) * 3 + c];
  }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const {
    return pixels[(y * width + x) * 3 + c];
  }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;
};

struct MaskBuffer {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> values;  // row-major

  MaskBuffer() = default;
  MaskBuffer(std::size_t w, std::size_t h, std::uint8_t fill = 0)
      : width(w), height(h), values(w * h, fill) {}

  std::uint8_t& at(std::size_t x, std::size_t y) {
    return values[y * width + x];
  }
  std::uint8_t at(std::size_t x, std::size_t y) const {
    return values[y * width + x];
  }
  double intensity(std::size_t x, std::size_t y) const {
    return at(x, y) / 255.0;
  }

  friend bool operator==(const MaskBuffer&, const MaskBuffer&) = default;
};

enum class EnhanceMode { kHighlight, kContrast };

struct EnhanceParams {
  EnhanceMode mode = EnhanceMode::kHighlight;
  int gain = 96;
  double dim = 0.3;
  std::optional<double> threshold;
};

// Per-channel kernels, exposed for soft intensities that an 8-bit mask
// cannot represent exactly.

inline std::uint8_t highlight_channel(std::uint8_t p, double m, int gain) {
  const double add = std::round(gain * m);
  return static_cast<std::uint8_t>(std::clamp(p + add, 0.0, 255.0));
}

inline std::uint8_t contrast_channel(std::uint8_t p, double m, double beta) {
  const double factor = m + beta * (1.0 - m);
  return static_cast<std::uint8_t>(std::clamp(std::round(p * factor), 0.0, 255.0));
}

namespace detail {

inline void check_dims(const ImageBuffer& img, const MaskBuffer& mask) {
  if (img.width != mask.width || img.height != mask.height) {
    throw Error(ErrorCode::kDimensionMismatch,
                "image is " + std::to_string(img.width) + "x" +
                    std::to_string(img.height) + " but mask is " +
                    std::to_string(mask.width) + "x" +
                    std::to_string(mask.height));
  }
}

}  // namespace detail

/// Maps every mask value to 0 or 255 according to m >= threshold.
inline MaskBuffer binarize(const MaskBuffer& mask, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::kInvalidParam, "threshold must lie in [0, 1]");
  }
  MaskBuffer out = mask;
  for (auto& v : out.values) v = (v / 255.0 >= threshold) ? 255 : 0;
  return out;
}

inline ImageBuffer enhance_highlight(const ImageBuffer& img,
                                     const MaskBuffer& mask, int gain = 96) {
  detail::check_dims(img, mask);
  if (gain < 0 || gain > 255) {
    throw Error(ErrorCode::kInvalidParam, "gain must lie in [0, 255]");
  }
  // round(g * v / 255), half away from zero, in exact integer arithmetic.
  std::uint8_t offset[256];
  for (int v = 0; v < 256; ++v) {
    offset[v] = static_cast<std::uint8_t>((2 * gain * v + 255) / 510);
  }
  ImageBuffer out = img;
  for (std::size_t i = 0; i < mask.values.size(); ++i) {
    const int add = offset[mask.values[i]];
    for (std::size_t c = 0; c < 3; ++c) {
      auto& p = out.pixels[i * 3 + c];
      p = static_cast<std::uint8_t>(std::min(255, p + add));
    }
  }
  return out;
}

inline ImageBuffer enhance_contrast(const ImageBuffer& img,
                                    const MaskBuffer& mask, double dim = 0.3) {
  detail::check_dims(img, mask);
  if (!(dim >= 0.0 && dim <= 1.0)) {
    throw Error(ErrorCode::kInvalidParam, "dim must lie in [0, 1]");
  }
  ImageBuffer out = img;
  for (std::size_t i = 0; i < mask.values.size(); ++i) {
    const double m = mask.values[i] / 255.0;
    for (std::size_t c = 0; c < 3; ++c) {
      auto& p = out.pixels[i * 3 + c];
      p = contrast_channel(p, m, dim);
    }
  }
  return out;
}

inline ImageBuffer enhance(const ImageBuffer& img, const MaskBuffer& mask,
                           const EnhanceParams& params) {
  const MaskBuffer m =
      params.threshold ? binarize(mask, *params.threshold) : mask;
  return params.mode == EnhanceMode::kHighlight
             ? enhance_highlight(img, m, params.gain)
             : enhance_contrast(img, m, params.dim);
}

}  // namespace vqakit
