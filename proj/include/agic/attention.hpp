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

// Attention-stack ingestion: head aggregation, layer strategies, CLS-row
// extraction and the 1D -> 2D patch grid mapping.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "agic/error.hpp"

namespace agic {

// Row sums of softmax attention are accepted within this tolerance. Files
// carry 32-bit floats, so exact stochasticity is not expected.
inline constexpr double kRowSumTolerance = 1e-4;

// Returns the integer square root of n if n is a perfect square.
inline std::optional<std::size_t> exact_sqrt(std::size_t n) {
  auto r = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
  // llround can land one off for large n
  while (r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  if (r * r != n) return std::nullopt;
  return r;
}

// Square M x M token-to-token attention matrix, row-major.
struct AttentionMatrix {
  std::size_t size = 0;
  std::vector<double> values;

  AttentionMatrix() = default;
  explicit AttentionMatrix(std::size_t m) : size(m), values(m * m, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return values[r * size + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * size + c]; }

  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values).subspan(r * size, size);
  }

  bool operator==(const AttentionMatrix&) const = default;
};

// L x H x M x M attention weights. Token 0 is CLS, tokens 1..M-1 are the
// image patches in row-major grid order.
class AttentionStack {
 public:
  AttentionStack() = default;

  AttentionStack(std::size_t layers, std::size_t heads, std::size_t tokens)
      : layers_(layers), heads_(heads), tokens_(tokens),
        weights_(layers * heads * tokens * tokens, 0.0) {}

  AttentionStack(std::size_t layers, std::size_t heads, std::size_t tokens,
                 std::vector<double> weights)
      : layers_(layers), heads_(heads), tokens_(tokens), weights_(std::move(weights)) {
    if (weights_.size() != layers * heads * tokens * tokens) {
      throw ShapeError("attention stack: expected " +
                       std::to_string(layers * heads * tokens * tokens) +
                       " weights, got " + std::to_string(weights_.size()));
    }
  }

  std::size_t num_layers() const noexcept { return layers_; }
  std::size_t num_heads() const noexcept { return heads_; }
  std::size_t num_tokens() const noexcept { return tokens_; }
  std::size_t num_patches() const noexcept { return tokens_ == 0 ? 0 : tokens_ - 1; }

  double& at(std::size_t l, std::size_t h, std::size_t r, std::size_t c) {
    return weights_[offset(l, h) + r * tokens_ + c];
  }
  double at(std::size_t l, std::size_t h, std::size_t r, std::size_t c) const {
    return weights_[offset(l, h) + r * tokens_ + c];
  }

  std::span<const double> head(std::size_t l, std::size_t h) const {
    return std::span<const double>(weights_).subspan(offset(l, h), tokens_ * tokens_);
  }

  const std::vector<double>& weights() const noexcept { return weights_; }

  bool operator==(const AttentionStack&) const = default;

 private:
  std::size_t offset(std::size_t l, std::size_t h) const {
    return (l * heads_ + h) * tokens_ * tokens_;
  }

  std::size_t layers_ = 0;
  std::size_t heads_ = 0;
  std::size_t tokens_ = 0;
  std::vector<double> weights_;
};

// Checks every AttentionStack invariant and throws ValidationError at the
// first violation. `where` prefixes the reported location, so callers that
// loaded the stack from a document can point into it.
inline void validate(const AttentionStack& stack, std::string_view where = "") {
  const std::string base(where);
  if (stack.num_layers() == 0) throw ValidationError(base, "attention stack has no layers");
  if (stack.num_heads() == 0) throw ValidationError(base, "attention stack has no heads");
  if (stack.num_tokens() < 2) {
    throw ValidationError(base, "attention stack needs a CLS token and at least one patch");
  }
  if (!exact_sqrt(stack.num_patches())) {
    throw ValidationError(base, "patch count " + std::to_string(stack.num_patches()) +
                                    " is not a perfect square");
  }
  const std::size_t m = stack.num_tokens();
  for (std::size_t l = 0; l < stack.num_layers(); ++l) {
    for (std::size_t h = 0; h < stack.num_heads(); ++h) {
      for (std::size_t r = 0; r < m; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < m; ++c) {
          const double w = stack.at(l, h, r, c);
          if (!(w >= 0.0 && w <= 1.0)) {
            throw ValidationError(base + "/" + std::to_string(l) + "/" + std::to_string(h) +
                                      "/" + std::to_string(r) + "/" + std::to_string(c),
                                  "attention weight " + std::to_string(w) +
                                      " outside [0, 1] (layer " + std::to_string(l) +
                                      ", head " + std::to_string(h) + ", row " +
                                      std::to_string(r) + ")");
          }
          sum += w;
        }
        if (std::abs(sum - 1.0) > kRowSumTolerance) {
          throw ValidationError(base + "/" + std::to_string(l) + "/" + std::to_string(h) + "/" +
                                    std::to_string(r),
                                "attention row sums to " + std::to_string(sum) +
                                    ", expected 1 +/- 1e-4 (layer " + std::to_string(l) +
                                    ", head " + std::to_string(h) + ", row " +
                                    std::to_string(r) + ")");
        }
      }
    }
  }
}

enum class LayerStrategy { First, Mid, Last, Max, Mean };

inline constexpr LayerStrategy kAllLayerStrategies[] = {
    LayerStrategy::First, LayerStrategy::Mid, LayerStrategy::Last, LayerStrategy::Max,
    LayerStrategy::Mean};

inline std::string_view to_string(LayerStrategy s) {
  switch (s) {
    case LayerStrategy::First: return "First";
    case LayerStrategy::Mid: return "Mid";
    case LayerStrategy::Last: return "Last";
    case LayerStrategy::Max: return "Max";
    case LayerStrategy::Mean: return "Mean";
  }
  return "?";
}

// Case-insensitive; accepts "middle" as an alias of "mid".
inline std::optional<LayerStrategy> parse_layer_strategy(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "first") return LayerStrategy::First;
  if (s == "mid" || s == "middle") return LayerStrategy::Mid;
  if (s == "last") return LayerStrategy::Last;
  if (s == "max") return LayerStrategy::Max;
  if (s == "mean") return LayerStrategy::Mean;
  return std::nullopt;
}

// Attention received by each image patch from CLS, length N = grid_side^2.
struct PatchAttention {
  std::vector<double> values;
  std::size_t grid_side = 0;

  bool operator==(const PatchAttention&) const = default;
};

// grid_side x grid_side map; element (r, c) is values[r * side + c].
struct AttentionGrid {
  std::size_t side = 0;
  std::vector<double> values;

  double operator()(std::size_t r, std::size_t c) const { return values[r * side + c]; }
  double& operator()(std::size_t r, std::size_t c) { return values[r * side + c]; }

  bool operator==(const AttentionGrid&) const = default;
};

// Elementwise mean over the H heads of one layer.
inline AttentionMatrix aggregate_heads(const AttentionStack& stack, std::size_t layer) {
  if (layer >= stack.num_layers()) {
    throw IndexError("layer index " + std::to_string(layer) + " out of range for stack with L=" +
                     std::to_string(stack.num_layers()));
  }
  const std::size_t m = stack.num_tokens();
  AttentionMatrix out(m);
  for (std::size_t h = 0; h < stack.num_heads(); ++h) {
    auto w = stack.head(layer, h);
    for (std::size_t i = 0; i < w.size(); ++i) out.values[i] += w[i];
  }
  if (stack.num_heads() > 1) {
    const auto heads = static_cast<double>(stack.num_heads());
    for (double& v : out.values) v /= heads;
  }
  return out;
}

// Row 0 (CLS query) without its self-attention entry. Not renormalized.
inline PatchAttention extract_cls_attention(const AttentionMatrix& matrix) {
  if (matrix.size < 2) throw ShapeError("attention matrix must have at least 2 tokens");
  auto side = exact_sqrt(matrix.size - 1);
  if (!side) {
    throw ShapeError("patch count " + std::to_string(matrix.size - 1) +
                     " is not a perfect square");
  }
  auto row = matrix.row(0);
  return PatchAttention{std::vector<double>(row.begin() + 1, row.end()), *side};
}

inline PatchAttention select_layer(const AttentionStack& stack, LayerStrategy strategy) {
  const std::size_t layers = stack.num_layers();
  if (layers == 0) throw ValidationError("", "attention stack has no layers");
  switch (strategy) {
    case LayerStrategy::First: return extract_cls_attention(aggregate_heads(stack, 0));
    case LayerStrategy::Mid: return extract_cls_attention(aggregate_heads(stack, layers / 2));
    case LayerStrategy::Last: return extract_cls_attention(aggregate_heads(stack, layers - 1));
    case LayerStrategy::Max:
    case LayerStrategy::Mean: break;
  }
  PatchAttention acc = extract_cls_attention(aggregate_heads(stack, 0));
  for (std::size_t l = 1; l < layers; ++l) {
    const PatchAttention cur = extract_cls_attention(aggregate_heads(stack, l));
    for (std::size_t i = 0; i < acc.values.size(); ++i) {
      if (strategy == LayerStrategy::Max) {
        acc.values[i] = std::max(acc.values[i], cur.values[i]);
      } else {
        acc.values[i] += cur.values[i];
      }
    }
  }
  if (strategy == LayerStrategy::Mean && layers > 1) {
    for (double& v : acc.values) v /= static_cast<double>(layers);
  }
  return acc;
}

inline AttentionGrid to_grid(const PatchAttention& patch) {
  auto side = exact_sqrt(patch.values.size());
  if (!side || patch.values.empty()) {
    throw ShapeError("patch vector of length " + std::to_string(patch.values.size()) +
                     " cannot be reshaped into a square grid");
  }
  return AttentionGrid{*side, patch.values};
}

// Row-major flatten; the inverse of to_grid.
inline PatchAttention flatten(const AttentionGrid& grid) {
  return PatchAttention{grid.values, grid.side};
}

// Min-max scaling into [0, 1]. A constant grid maps to all zeros.
inline AttentionGrid normalize_grid(const AttentionGrid& grid) {
  if (grid.values.empty()) throw ShapeError("cannot normalize an empty grid");
  const auto [lo_it, hi_it] = std::minmax_element(grid.values.begin(), grid.values.end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  AttentionGrid out{grid.side, std::vector<double>(grid.values.size(), 0.0)};
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < grid.values.size(); ++i) {
    out.values[i] = (grid.values[i] - lo) / range;
  }
  return out;
}

}  // namespace agic
