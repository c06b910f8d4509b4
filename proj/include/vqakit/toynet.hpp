#pragma once

// A desk-scale model of the fine-tuning setup: text states attend to visual
// tokens through a cross-attention block, then pass through a two-layer MLP
// whose frozen weights carry LoRA adapters. Only the attention block (when
// marked trainable), the adapters and the mask-feature projection receive
// gradients; everything else stays frozen.
//
//   vis  = vit · Wvitᵀ                       frozen ViT projection
//   vis  = [vis ; s_1·Pᵀ ; … ; s_G·Pᵀ]       optional mask-token integration
//   h    = text + CrossAttn(text, vis)
//   y    = h + down(tanh(up(h)))             up/down: frozen W + (α/r)·B·A
//   loss = mean((y − target)²)
//
// Linear maps follow the W·x convention on column vectors; with tokens stored
// as rows that is x·Wᵀ. There are no bias terms.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vqakit/error.hpp"
#include "vqakit/imageops.hpp"
#include "vqakit/tensor.hpp"

namespace vqakit {

struct Parameter {
  std::string name;
  std::string group;
  Tensor value;
  Tensor grad;  // allocated for trainable parameters only
  bool trainable = false;

  static Parameter make(std::string name, std::string group, Tensor value,
                        bool trainable) {
    Parameter p{std::move(name), std::move(group), std::move(value), {},
                trainable};
    p.zero_grad();
    return p;
  }

  void zero_grad() {
    if (trainable) {
      grad = Tensor(value.shape());
    } else {
      grad = Tensor();
    }
  }
};

// ---------------------------------------------------------------------------
// LoRA

struct LoraAdapter {
  std::size_t rank = 0;
  double alpha = 1.0;
  Parameter a;  // rank × d_in
  Parameter b;  // d_out × rank

  bool enabled() const { return rank > 0; }
  double scaling() const {
    return rank == 0 ? 0.0 : alpha / static_cast<double>(rank);
  }
};

struct AdaptedLinear {
  Parameter weight;  // d_out × d_in, frozen
  LoraAdapter adapter;

  std::size_t d_in() const { return weight.value.cols(); }
  std::size_t d_out() const { return weight.value.rows(); }

  /// Frozen base drawn from ±1/√d_in; adapter A from the same range and B
  /// zero, so a fresh layer computes exactly the base map.
  static AdaptedLinear create(const std::string& name, std::size_t d_in,
                              std::size_t d_out, std::size_t rank,
                              double alpha, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(d_in));
    Tensor w = Tensor::matrix(d_out, d_in);
    rng.fill_uniform(w, bound);
    Tensor a;
    Tensor b;
    if (rank > 0) {
      a = Tensor::matrix(rank, d_in);
      rng.fill_uniform(a, bound);
      b = Tensor::matrix(d_out, rank);
    }
    return from(name, std::move(w), std::move(a), std::move(b), alpha);
  }

  /// Builds a layer from explicit matrices. Empty `a`/`b` disable the
  /// adapter (rank 0).
  static AdaptedLinear from(const std::string& name, Tensor w, Tensor a,
                            Tensor b, double alpha) {
    detail::require_matrix(w, "base weight");
    AdaptedLinear layer;
    const std::size_t d_out = w.rows();
    const std::size_t d_in = w.cols();
    layer.weight = Parameter::make(name + ".weight", "lm_base", std::move(w),
                                   false);
    layer.adapter.alpha = alpha;
    if (a.empty() != b.empty()) {
      throw Error(ErrorCode::kShapeMismatch,
                  name + ": adapter needs both A and B or neither");
    }
    if (!a.empty()) {
      detail::require_matrix(a, "lora A");
      detail::require_matrix(b, "lora B");
      if (a.cols() != d_in || b.rows() != d_out || b.cols() != a.rows()) {
        throw Error(ErrorCode::kShapeMismatch,
                    name + ": adapter shapes A" + a.shape_string() + " B" +
                        b.shape_string() + " do not fit base " +
                        layer.weight.value.shape_string());
      }
      layer.adapter.rank = a.rows();
      layer.adapter.a =
          Parameter::make(name + ".lora_a", "lora", std::move(a), true);
      layer.adapter.b =
          Parameter::make(name + ".lora_b", "lora", std::move(b), true);
    }
    return layer;
  }
};

namespace detail {

inline Tensor as_rows(const Tensor& x, std::size_t d_in) {
  if (x.rank() == 0 || x.last_dim() != d_in) {
    throw Error(ErrorCode::kShapeMismatch,
                "input " + x.shape_string() + " has trailing dim != " +
                    std::to_string(d_in));
  }
  return x.reshaped({x.size() / d_in, d_in});
}

}  // namespace detail

/// W·x + (α/r)·B·(A·x) over the trailing dimension of x; leading dimensions
/// are preserved.
inline Tensor lora_forward(const Tensor& x, const AdaptedLinear& layer) {
  const Tensor rows = detail::as_rows(x, layer.d_in());
  Tensor y = matmul_nt(rows, layer.weight.value);
  if (layer.adapter.enabled()) {
    const Tensor t = matmul_nt(rows, layer.adapter.a.value);
    const Tensor delta = matmul_nt(t, layer.adapter.b.value);
    const double s = layer.adapter.scaling();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += s * delta[i];
  }
  std::vector<std::size_t> shape = x.shape();
  shape.back() = layer.d_out();
  return y.reshaped(std::move(shape));
}

/// Backward pass for row-major x (n×d_in) and upstream gradient dy
/// (n×d_out). Accumulates into the grads of trainable parameters and returns
/// dL/dx.
inline Tensor lora_backward(const Tensor& x, const Tensor& dy,
                            AdaptedLinear& layer) {
  Tensor dx = matmul(dy, layer.weight.value);
  if (layer.weight.trainable) layer.weight.grad += matmul_tn(dy, x);
  if (layer.adapter.enabled()) {
    auto& ad = layer.adapter;
    const double s = ad.scaling();
    const Tensor t = matmul_nt(x, ad.a.value);                // n×r
    const Tensor dt = scaled(matmul(dy, ad.b.value), s);      // n×r
    if (ad.b.trainable) ad.b.grad += scaled(matmul_tn(dy, t), s);
    if (ad.a.trainable) ad.a.grad += matmul_tn(dt, x);
    dx += matmul(dt, ad.a.value);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Cross-attention

struct CrossAttentionBlock {
  std::size_t dim = 0;
  std::size_t heads = 1;
  Parameter wq, wk, wv, wo;  // dim × dim each
  bool trainable = true;

  std::size_t head_dim() const { return dim / heads; }

  static CrossAttentionBlock create(std::size_t dim, std::size_t heads,
                                    bool trainable, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    std::vector<Tensor> w(4, Tensor::matrix(dim, dim));
    for (auto& t : w) rng.fill_uniform(t, bound);
    return from(std::move(w[0]), std::move(w[1]), std::move(w[2]),
                std::move(w[3]), heads, trainable);
  }

  static CrossAttentionBlock from(Tensor wq, Tensor wk, Tensor wv, Tensor wo,
                                  std::size_t heads, bool trainable) {
    detail::require_matrix(wq, "Wq");
    const std::size_t d = wq.rows();
    if (heads == 0 || d % heads != 0) {
      throw Error(ErrorCode::kShapeMismatch,
                  "head count " + std::to_string(heads) +
                      " does not divide model dim " + std::to_string(d));
    }
    for (const Tensor* t : {&wq, &wk, &wv, &wo}) {
      if (t->rank() != 2 || t->rows() != d || t->cols() != d) {
        throw Error(ErrorCode::kShapeMismatch,
                    "attention projections must all be " + std::to_string(d) +
                        "x" + std::to_string(d));
      }
    }
    CrossAttentionBlock b;
    b.dim = d;
    b.heads = heads;
    b.trainable = trainable;
    const std::string g = "cross_attention";
    b.wq = Parameter::make("attn.wq", g, std::move(wq), trainable);
    b.wk = Parameter::make("attn.wk", g, std::move(wk), trainable);
    b.wv = Parameter::make("attn.wv", g, std::move(wv), trainable);
    b.wo = Parameter::make("attn.wo", g, std::move(wo), trainable);
    return b;
  }
};

struct AttentionCache {
  Tensor q, k, v;              // projected queries / keys / values
  Tensor concat;               // heads concatenated, before Wo
  std::vector<Tensor> probs;   // per head, n_text × n_visual
};

/// Numerically stable row softmax.
inline Tensor softmax_rows(const Tensor& logits) {
  detail::require_matrix(logits, "logits");
  Tensor p = logits;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double mx = p(i, 0);
    for (std::size_t j = 1; j < p.cols(); ++j) mx = std::max(mx, p(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < p.cols(); ++j) {
      p(i, j) = std::exp(p(i, j) - mx);
      sum += p(i, j);
    }
    for (std::size_t j = 0; j < p.cols(); ++j) p(i, j) /= sum;
  }
  return p;
}

/// Scaled dot-product cross-attention: queries from text, keys and values
/// from visual tokens, per-head softmax(Q_h K_hᵀ / √(d/h)), heads
/// concatenated and projected by Wo.
inline Tensor cross_attention_forward(const Tensor& text, const Tensor& visual,
                                      const CrossAttentionBlock& block,
                                      AttentionCache* cache = nullptr) {
  detail::require_matrix(text, "text states");
  detail::require_matrix(visual, "visual states");
  if (text.cols() != block.dim || visual.cols() != block.dim) {
    throw Error(ErrorCode::kShapeMismatch,
                "states " + text.shape_string() + " / " +
                    visual.shape_string() + " do not match model dim " +
                    std::to_string(block.dim));
  }
  const std::size_t nt = text.rows();
  const std::size_t nv = visual.rows();
  const std::size_t dh = block.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  AttentionCache local;
  AttentionCache& c = cache ? *cache : local;
  c.q = matmul_nt(text, block.wq.value);
  c.k = matmul_nt(visual, block.wk.value);
  c.v = matmul_nt(visual, block.wv.value);
  c.concat = Tensor::matrix(nt, block.dim);
  c.probs.clear();

  for (std::size_t h = 0; h < block.heads; ++h) {
    const std::size_t off = h * dh;
    Tensor logits = Tensor::matrix(nt, nv);
    for (std::size_t i = 0; i < nt; ++i) {
      for (std::size_t j = 0; j < nv; ++j) {
        double acc = 0.0;
        for (std::size_t p = 0; p < dh; ++p) {
          acc += c.q(i, off + p) * c.k(j, off + p);
        }
        logits(i, j) = acc * scale;
      }
    }
    Tensor probs = softmax_rows(logits);
    for (std::size_t i = 0; i < nt; ++i) {
      for (std::size_t j = 0; j < nv; ++j) {
        const double w = probs(i, j);
        for (std::size_t p = 0; p < dh; ++p) {
          c.concat(i, off + p) += w * c.v(j, off + p);
        }
      }
    }
    c.probs.push_back(std::move(probs));
  }
  return matmul_nt(c.concat, block.wo.value);
}

/// Backward pass of cross_attention_forward. Accumulates projection grads
/// when the block is trainable and writes dL/dtext and dL/dvisual.
inline void cross_attention_backward(const Tensor& d_out, const Tensor& text,
                                     const Tensor& visual,
                                     CrossAttentionBlock& block,
                                     const AttentionCache& c, Tensor& d_text,
                                     Tensor& d_visual) {
  const std::size_t nt = text.rows();
  const std::size_t nv = visual.rows();
  const std::size_t dh = block.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  const Tensor d_concat = matmul(d_out, block.wo.value);
  Tensor dq = Tensor::matrix(nt, block.dim);
  Tensor dk = Tensor::matrix(nv, block.dim);
  Tensor dv = Tensor::matrix(nv, block.dim);

  for (std::size_t h = 0; h < block.heads; ++h) {
    const std::size_t off = h * dh;
    const Tensor& probs = c.probs[h];
    Tensor dprobs = Tensor::matrix(nt, nv);
    for (std::size_t i = 0; i < nt; ++i) {
      for (std::size_t j = 0; j < nv; ++j) {
        double acc = 0.0;
        for (std::size_t p = 0; p < dh; ++p) {
          acc += d_concat(i, off + p) * c.v(j, off + p);
          dv(j, off + p) += probs(i, j) * d_concat(i, off + p);
        }
        dprobs(i, j) = acc;
      }
    }
    for (std::size_t i = 0; i < nt; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < nv; ++j) dot += dprobs(i, j) * probs(i, j);
      for (std::size_t j = 0; j < nv; ++j) {
        const double dlogit = probs(i, j) * (dprobs(i, j) - dot) * scale;
        for (std::size_t p = 0; p < dh; ++p) {
          dq(i, off + p) += dlogit * c.k(j, off + p);
          dk(j, off + p) += dlogit * c.q(i, off + p);
        }
      }
    }
  }

  if (block.trainable) {
    block.wo.grad += matmul_tn(d_out, c.concat);
    block.wq.grad += matmul_tn(dq, text);
    block.wk.grad += matmul_tn(dk, visual);
    block.wv.grad += matmul_tn(dv, visual);
  }
  d_text = matmul(dq, block.wq.value);
  d_visual = matmul(dk, block.wk.value);
  d_visual += matmul(dv, block.wv.value);
}

// ---------------------------------------------------------------------------
// Mask-feature integration

struct IntegrationConfig {
  std::size_t grid_h = 1;
  std::size_t grid_w = 1;
  Parameter projection;  // dim × 1, trainable

  static IntegrationConfig create(std::size_t grid_h, std::size_t grid_w,
                                  Tensor projection) {
    detail::require_matrix(projection, "integration projection");
    if (projection.cols() != 1) {
      throw Error(ErrorCode::kShapeMismatch,
                  "integration projection must be d x 1");
    }
    return {grid_h, grid_w,
            Parameter::make("integration.proj", "integration",
                            std::move(projection), true)};
  }
};

namespace detail {

inline void cell_range(std::size_t extent, std::size_t cells, std::size_t i,
                       std::size_t& begin, std::size_t& end) {
  const std::size_t step = extent / cells;
  begin = i * step;
  end = (i + 1 == cells) ? extent : begin + step;
}

inline void check_grid(std::size_t width, std::size_t height,
                       std::size_t grid_h, std::size_t grid_w) {
  if (grid_h == 0 || grid_w == 0) {
    throw Error(ErrorCode::kInvalidParam, "grid must be at least 1x1");
  }
  if (height < grid_h || width < grid_w) {
    throw Error(ErrorCode::kShapeMismatch,
                std::to_string(width) + "x" + std::to_string(height) +
                    " raster cannot be split into a " +
                    std::to_string(grid_h) + "x" + std::to_string(grid_w) +
                    " grid");
  }
}

}  // namespace detail

/// Mean mask intensity (in [0, 1]) of each grid cell, row-major. Cells are
/// floor(extent / cells) wide; leftover rows and columns join the last cell.
inline std::vector<double> pool_mask(const MaskBuffer& mask,
                                     std::size_t grid_h, std::size_t grid_w) {
  detail::check_grid(mask.width, mask.height, grid_h, grid_w);
  std::vector<double> pooled;
  pooled.reserve(grid_h * grid_w);
  for (std::size_t gy = 0; gy < grid_h; ++gy) {
    std::size_t y0, y1;
    detail::cell_range(mask.height, grid_h, gy, y0, y1);
    for (std::size_t gx = 0; gx < grid_w; ++gx) {
      std::size_t x0, x1;
      detail::cell_range(mask.width, grid_w, gx, x0, x1);
      std::uint64_t sum = 0;
      for (std::size_t y = y0; y < y1; ++y) {
        for (std::size_t x = x0; x < x1; ++x) sum += mask.at(x, y);
      }
      const double n = static_cast<double>((y1 - y0) * (x1 - x0));
      pooled.push_back(static_cast<double>(sum) / (255.0 * n));
    }
  }
  return pooled;
}

/// Appends one token per grid cell after the ViT tokens: cell mean s
/// embedded as s·P.
inline Tensor integrate_features(const Tensor& vit_tokens,
                                 const MaskBuffer& mask,
                                 const IntegrationConfig& cfg) {
  detail::require_matrix(vit_tokens, "vit tokens");
  const Tensor& proj = cfg.projection.value;
  if (proj.rank() != 2 || proj.cols() != 1 ||
      proj.rows() != vit_tokens.cols()) {
    throw Error(ErrorCode::kShapeMismatch,
                "projection " + proj.shape_string() +
                    " does not map to token dim " +
                    std::to_string(vit_tokens.cols()));
  }
  const auto pooled = pool_mask(mask, cfg.grid_h, cfg.grid_w);
  const std::size_t n = vit_tokens.rows();
  const std::size_t d = vit_tokens.cols();
  Tensor out = Tensor::matrix(n + pooled.size(), d);
  std::copy(vit_tokens.data().begin(), vit_tokens.data().end(),
            out.data().begin());
  for (std::size_t j = 0; j < pooled.size(); ++j) {
    for (std::size_t c = 0; c < d; ++c) out(n + j, c) = pooled[j] * proj(c, 0);
  }
  return out;
}

/// Patch tokens from an RGB image: each grid cell's mean colour (scaled to
/// [0, 1]) mapped through a frozen d×3 embedding. Used to feed original or
/// enhanced images to the toy model.
inline Tensor patch_tokens(const ImageBuffer& img, std::size_t grid_h,
                           std::size_t grid_w, const Tensor& embed) {
  detail::check_grid(img.width, img.height, grid_h, grid_w);
  detail::require_matrix(embed, "patch embedding");
  if (embed.cols() != 3) {
    throw Error(ErrorCode::kShapeMismatch, "patch embedding must be d x 3");
  }
  Tensor colours = Tensor::matrix(grid_h * grid_w, 3);
  for (std::size_t gy = 0; gy < grid_h; ++gy) {
    std::size_t y0, y1;
    detail::cell_range(img.height, grid_h, gy, y0, y1);
    for (std::size_t gx = 0; gx < grid_w; ++gx) {
      std::size_t x0, x1;
      detail::cell_range(img.width, grid_w, gx, x0, x1);
      const double n = static_cast<double>((y1 - y0) * (x1 - x0));
      for (std::size_t ch = 0; ch < 3; ++ch) {
        std::uint64_t sum = 0;
        for (std::size_t y = y0; y < y1; ++y) {
          for (std::size_t x = x0; x < x1; ++x) sum += img.at(x, y, ch);
        }
        colours(gy * grid_w + gx, ch) = static_cast<double>(sum) / (255.0 * n);
      }
    }
  }
  return matmul_nt(colours, embed);
}

// ---------------------------------------------------------------------------
// Parameter accounting

struct GroupCount {
  std::size_t trainable = 0;
  std::size_t frozen = 0;
  friend bool operator==(const GroupCount&, const GroupCount&) = default;
};

struct ParamReport {
  std::size_t total = 0;
  std::size_t trainable = 0;
  std::size_t frozen = 0;
  std::map<std::string, GroupCount> groups;
  friend bool operator==(const ParamReport&, const ParamReport&) = default;
};

template <class Range>
ParamReport count_params(const Range& params) {
  ParamReport r;
  for (const Parameter* p : params) {
    const std::size_t n = p->value.size();
    r.total += n;
    auto& g = r.groups[p->group];
    if (p->trainable) {
      r.trainable += n;
      g.trainable += n;
    } else {
      r.frozen += n;
      g.frozen += n;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// The assembled toy model

inline constexpr const char* kLoraTargets[] = {"mlp_up", "mlp_down"};

struct ToyConfig {
  std::size_t dim = 8;
  std::size_t heads = 1;
  std::size_t n_vit = 4;
  std::size_t n_text = 2;
  std::size_t lora_rank = 2;
  double lora_alpha = 4.0;
  std::vector<std::string> lora_targets = {"mlp_up", "mlp_down"};
  bool cross_attention_trainable = true;
  std::optional<std::pair<std::size_t, std::size_t>> integration;  // gh, gw

  void validate() const {
    if (dim == 0 || n_vit == 0 || n_text == 0) {
      throw Error(ErrorCode::kInvalidParam, "d, n_vit and n_text must be > 0");
    }
    if (heads == 0 || dim % heads != 0) {
      throw Error(ErrorCode::kInvalidParam,
                  "heads must be positive and divide d");
    }
    for (const auto& t : lora_targets) {
      if (std::find(std::begin(kLoraTargets), std::end(kLoraTargets), t) ==
          std::end(kLoraTargets)) {
        throw Error(ErrorCode::kInvalidParam, "unknown LoRA target '" + t +
                                                  "' (expected mlp_up or "
                                                  "mlp_down)");
      }
    }
    if (integration && (integration->first == 0 || integration->second == 0)) {
      throw Error(ErrorCode::kInvalidParam, "integration grid must be >= 1x1");
    }
  }

  std::size_t hidden() const { return 2 * dim; }
  bool targets(const std::string& layer) const {
    return std::find(lora_targets.begin(), lora_targets.end(), layer) !=
           lora_targets.end();
  }
};

struct ToyBatch {
  Tensor text;    // n_text × d
  Tensor vit;     // n_vit × d, raw ViT features
  Tensor target;  // n_text × d
  std::optional<MaskBuffer> mask;
};

class ToyModel {
 public:
  ToyModel(const ToyConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    const std::size_t d = cfg_.dim;
    Tensor wvit = Tensor::matrix(d, d);
    rng.fill_uniform(wvit, 1.0 / std::sqrt(static_cast<double>(d)));
    vit_proj_ = Parameter::make("vit.proj", "vit", std::move(wvit), false);
    attn_ = CrossAttentionBlock::create(d, cfg_.heads,
                                        cfg_.cross_attention_trainable, rng);
    up_ = AdaptedLinear::create("mlp_up", d, cfg_.hidden(),
                                cfg_.targets("mlp_up") ? cfg_.lora_rank : 0,
                                cfg_.lora_alpha, rng);
    down_ = AdaptedLinear::create(
        "mlp_down", cfg_.hidden(), d,
        cfg_.targets("mlp_down") ? cfg_.lora_rank : 0, cfg_.lora_alpha, rng);
    if (cfg_.integration) {
      Tensor p = Tensor::matrix(d, 1);
      rng.fill_uniform(p, 1.0);
      integration_ = IntegrationConfig::create(
          cfg_.integration->first, cfg_.integration->second, std::move(p));
    }
  }

  const ToyConfig& config() const { return cfg_; }
  CrossAttentionBlock& attention() { return attn_; }
  AdaptedLinear& mlp_up() { return up_; }
  AdaptedLinear& mlp_down() { return down_; }
  std::optional<IntegrationConfig>& integration() { return integration_; }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    for (const Parameter* p : std::as_const(*this).parameters()) {
      out.push_back(const_cast<Parameter*>(p));
    }
    return out;
  }

  std::vector<const Parameter*> parameters() const {
    std::vector<const Parameter*> out{&vit_proj_, &attn_.wq, &attn_.wk,
                                      &attn_.wv, &attn_.wo};
    for (const AdaptedLinear* l : {&up_, &down_}) {
      out.push_back(&l->weight);
      if (l->adapter.enabled()) {
        out.push_back(&l->adapter.a);
        out.push_back(&l->adapter.b);
      }
    }
    if (integration_) out.push_back(&integration_->projection);
    return out;
  }

  /// Visual token sequence fed to attention (after the frozen projection and
  /// optional mask-token integration).
  Tensor visual_tokens(const ToyBatch& batch) const {
    Tensor vis = matmul_nt(batch.vit, vit_proj_.value);
    if (integration_) {
      if (!batch.mask) {
        throw Error(ErrorCode::kInvalidParam,
                    "model integrates mask features but batch has no mask");
      }
      vis = integrate_features(vis, *batch.mask, *integration_);
    }
    return vis;
  }

  Tensor forward(const ToyBatch& batch) const {
    check_batch(batch);
    const Tensor vis = visual_tokens(batch);
    Tensor h = batch.text;
    h += cross_attention_forward(batch.text, vis, attn_);
    Tensor u = lora_forward(h, up_);
    for (double& v : u.data()) v = std::tanh(v);
    Tensor y = h;
    y += lora_forward(u, down_);
    return y;
  }

  double loss(const ToyBatch& batch) const {
    return mse(forward(batch), batch.target);
  }

  /// Zeroes the gradients, then runs forward and backward; returns the loss.
  /// Frozen parameters get no gradient storage at all.
  double loss_and_grad(const ToyBatch& batch) {
    check_batch(batch);
    for (Parameter* p : parameters()) p->zero_grad();

    const Tensor vis = visual_tokens(batch);
    AttentionCache cache;
    Tensor h = batch.text;
    h += cross_attention_forward(batch.text, vis, attn_, &cache);
    Tensor u = lora_forward(h, up_);
    for (double& v : u.data()) v = std::tanh(v);
    Tensor y = h;
    y += lora_forward(u, down_);
    const double l = mse(y, batch.target);

    const double scale = 2.0 / static_cast<double>(y.size());
    Tensor dy = y;
    for (std::size_t i = 0; i < dy.size(); ++i) {
      dy[i] = scale * (y[i] - batch.target[i]);
    }
    Tensor du = lora_backward(u, dy, down_);
    for (std::size_t i = 0; i < du.size(); ++i) du[i] *= 1.0 - u[i] * u[i];
    Tensor dh = dy;
    dh += lora_backward(h, du, up_);

    Tensor d_text, d_vis;
    cross_attention_backward(dh, batch.text, vis, attn_, cache, d_text, d_vis);
    if (integration_) {
      const auto pooled =
          pool_mask(*batch.mask, integration_->grid_h, integration_->grid_w);
      auto& proj = integration_->projection;
      const std::size_t n = cfg_.n_vit;
      for (std::size_t j = 0; j < pooled.size(); ++j) {
        for (std::size_t c = 0; c < cfg_.dim; ++c) {
          proj.grad(c, 0) += pooled[j] * d_vis(n + j, c);
        }
      }
    }
    return l;
  }

 private:
  static double mse(const Tensor& y, const Tensor& target) {
    Tensor::require_same_shape(y, target, "loss");
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double e = y[i] - target[i];
      acc += e * e;
    }
    return acc / static_cast<double>(y.size());
  }

  void check_batch(const ToyBatch& b) const {
    const auto want = [&](const Tensor& t, std::size_t rows, const char* what) {
      if (t.rank() != 2 || t.rows() != rows || t.cols() != cfg_.dim) {
        throw Error(ErrorCode::kShapeMismatch,
                    std::string(what) + " is " + t.shape_string() +
                        ", expected [" + std::to_string(rows) + "x" +
                        std::to_string(cfg_.dim) + "]");
      }
    };
    want(b.text, cfg_.n_text, "text batch");
    want(b.vit, cfg_.n_vit, "vit batch");
    want(b.target, cfg_.n_text, "target batch");
  }

  ToyConfig cfg_;
  Parameter vit_proj_;
  CrossAttentionBlock attn_;
  AdaptedLinear up_;
  AdaptedLinear down_;
  std::optional<IntegrationConfig> integration_;
};

inline ParamReport count_params(const ToyModel& model) {
  return count_params(model.parameters());
}

/// Synthetic inputs and targets for a config. Integrated configs get a
/// (4·gh + 1) × (4·gw + 1) random mask, so pooling exercises the remainder
/// rule.
inline ToyBatch make_batch(const ToyConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed ^ 0x9E3779B97F4A7C15ull);
  ToyBatch b;
  b.text = Tensor::matrix(cfg.n_text, cfg.dim);
  b.vit = Tensor::matrix(cfg.n_vit, cfg.dim);
  b.target = Tensor::matrix(cfg.n_text, cfg.dim);
  rng.fill_uniform(b.text, 1.0);
  rng.fill_uniform(b.vit, 1.0);
  rng.fill_uniform(b.target, 0.5);
  if (cfg.integration) {
    MaskBuffer m(4 * cfg.integration->second + 1,
                 4 * cfg.integration->first + 1);
    for (auto& v : m.values) v = static_cast<std::uint8_t>(rng.next() >> 56);
    b.mask = std::move(m);
  }
  return b;
}

/// Replaces every zero-initialised adapter B with small random values so
/// gradients through A are non-trivial (used by gradient checks).
inline void warm_start_adapters(ToyModel& model, std::uint64_t seed,
                                double bound = 0.1) {
  Rng rng(seed ^ 0xD1B54A32D192ED03ull);
  for (AdaptedLinear* l : {&model.mlp_up(), &model.mlp_down()}) {
    if (l->adapter.enabled()) rng.fill_uniform(l->adapter.b.value, bound);
  }
}

}  // namespace vqakit
