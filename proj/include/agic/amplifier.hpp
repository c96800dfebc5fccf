/**
 * Copyright 2026 The agic Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

// Patch-grid upsampling and multiplicative attention amplification of a
// preprocessed image tensor: out = in * (1 + k * a(i, j)).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "agic/attention.hpp"
#include "agic/error.hpp"

namespace agic {

struct ValueRange {
  double lo = 0.0;
  double hi = 1.0;

  bool operator==(const ValueRange&) const = default;
};

// Dense H x W x C tensor in the model's preprocessed input domain, HWC order.
struct ImageTensor {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> data;
  ValueRange value_range;

  ImageTensor() = default;
  ImageTensor(std::size_t h, std::size_t w, std::size_t c, ValueRange range, double fill = 0.0)
      : height(h), width(w), channels(c), data(h * w * c, fill), value_range(range) {}

  double& operator()(std::size_t y, std::size_t x, std::size_t ch) {
    return data[(y * width + x) * channels + ch];
  }
  double operator()(std::size_t y, std::size_t x, std::size_t ch) const {
    return data[(y * width + x) * channels + ch];
  }

  bool operator==(const ImageTensor&) const = default;
};

inline void validate(const ImageTensor& image) {
  if (image.height == 0 || image.width == 0 || image.channels == 0) {
    throw DimensionError("image tensor must have positive height, width and channels");
  }
  if (image.data.size() != image.height * image.width * image.channels) {
    throw ShapeError("image tensor data size does not match its dimensions");
  }
  for (double v : image.data) {
    if (!(v >= image.value_range.lo && v <= image.value_range.hi)) {
      throw InputError("image value " + std::to_string(v) + " outside value range [" +
                       std::to_string(image.value_range.lo) + ", " +
                       std::to_string(image.value_range.hi) + "]");
    }
  }
}

// Per-pixel amplification weights in [0, 1].
struct SaliencyMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  SaliencyMap() = default;
  SaliencyMap(std::size_t h, std::size_t w, double fill = 0.0)
      : height(h), width(w), values(h * w, fill) {}

  double operator()(std::size_t y, std::size_t x) const { return values[y * width + x]; }
  double& operator()(std::size_t y, std::size_t x) { return values[y * width + x]; }

  bool operator==(const SaliencyMap&) const = default;
};

enum class UpsampleMode { Nearest, Bilinear };

inline std::string_view to_string(UpsampleMode m) {
  return m == UpsampleMode::Nearest ? "nearest" : "bilinear";
}

inline std::optional<UpsampleMode> parse_upsample_mode(std::string_view s) {
  if (s == "nearest") return UpsampleMode::Nearest;
  if (s == "bilinear") return UpsampleMode::Bilinear;
  return std::nullopt;
}

struct AmplificationConfig {
  double k = 1.0;
  UpsampleMode upsample_mode = UpsampleMode::Nearest;

  bool operator==(const AmplificationConfig&) const = default;
};

// Amplification factors swept in the ablation study.
inline const std::vector<double>& default_amplification_sweep() {
  static const std::vector<double> sweep{1.0, 3.0, 5.0, 10.0};
  return sweep;
}

inline SaliencyMap upsample(const AttentionGrid& grid, std::size_t height, std::size_t width,
                            UpsampleMode mode = UpsampleMode::Nearest) {
  const std::size_t side = grid.side;
  if (side == 0 || grid.values.size() != side * side) {
    throw ShapeError("attention grid is empty or inconsistent");
  }
  if (height < side || width < side) {
    throw DimensionError("upsample target " + std::to_string(height) + "x" +
                         std::to_string(width) + " is smaller than the " +
                         std::to_string(side) + "x" + std::to_string(side) + " grid");
  }
  for (double v : grid.values) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw InputError("attention grid must be normalized to [0, 1] before upsampling");
    }
  }

  SaliencyMap map(height, width);
  if (mode == UpsampleMode::Nearest) {
    for (std::size_t y = 0; y < height; ++y) {
      const std::size_t r = y * side / height;
      for (std::size_t x = 0; x < width; ++x) {
        map(y, x) = grid(r, x * side / width);
      }
    }
    return map;
  }

  // Patch centers are the sample points; pixel centers map to
  // s = (p + 0.5) * side / extent - 0.5 in grid coordinates.
  auto coord = [side](std::size_t p, std::size_t extent) {
    const double s = (static_cast<double>(p) + 0.5) * static_cast<double>(side) /
                         static_cast<double>(extent) - 0.5;
    const double clamped = std::clamp(s, 0.0, static_cast<double>(side - 1));
    const auto i0 = static_cast<std::size_t>(std::floor(clamped));
    const std::size_t i1 = std::min(i0 + 1, side - 1);
    return std::tuple{i0, i1, clamped - static_cast<double>(i0)};
  };
  for (std::size_t y = 0; y < height; ++y) {
    const auto [r0, r1, ty] = coord(y, height);
    for (std::size_t x = 0; x < width; ++x) {
      const auto [c0, c1, tx] = coord(x, width);
      const double top = grid(r0, c0) * (1.0 - tx) + grid(r0, c1) * tx;
      const double bottom = grid(r1, c0) * (1.0 - tx) + grid(r1, c1) * tx;
      map(y, x) = std::clamp(top * (1.0 - ty) + bottom * ty, 0.0, 1.0);
    }
  }
  return map;
}

namespace detail {

inline void check_amplify_args(const ImageTensor& image, const SaliencyMap& map, double k) {
  if (!(k >= 0.0) || !std::isfinite(k)) {
    throw InputError("amplification factor must be finite and non-negative");
  }
  if (map.height != image.height || map.width != image.width ||
      map.values.size() != map.height * map.width) {
    throw ShapeError("saliency map " + std::to_string(map.height) + "x" +
                     std::to_string(map.width) + " does not match image " +
                     std::to_string(image.height) + "x" + std::to_string(image.width));
  }
  if (image.data.size() != image.height * image.width * image.channels) {
    throw ShapeError("image tensor data size does not match its dimensions");
  }
}

}  // namespace detail

// in * (1 + k * a) without clamping; the same spatial factor scales
// every channel. Returned in the image's HWC layout.
inline std::vector<double> amplify_unclamped(const ImageTensor& image, const SaliencyMap& map,
                                             double k) {
  detail::check_amplify_args(image, map, k);
  std::vector<double> out(image.data.size());
  const std::size_t channels = image.channels;
  for (std::size_t p = 0; p < map.values.size(); ++p) {
    const double factor = 1.0 + k * map.values[p];
    for (std::size_t ch = 0; ch < channels; ++ch) {
      out[p * channels + ch] = image.data[p * channels + ch] * factor;
    }
  }
  return out;
}

// Amplifies and clamps into the image's value range.
inline ImageTensor amplify(const ImageTensor& image, const SaliencyMap& map, double k) {
  ImageTensor out = image;
  out.data = amplify_unclamped(image, map, k);
  const auto [lo, hi] = image.value_range;
  for (double& v : out.data) v = std::clamp(v, lo, hi);
  return out;
}

}  // namespace agic
