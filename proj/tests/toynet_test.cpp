#include "vqakit/toynet.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace vqakit {
namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, double b = 1.0) {
  Tensor t = Tensor::matrix(r, c);
  rng.fill_uniform(t, b);
  return t;
}

// Attention written straight from the definition, one output entry at a
// time, with its own softmax.
Tensor dense_attention(const Tensor& text, const Tensor& vis,
                       const CrossAttentionBlock& blk) {
  const std::size_t d = blk.dim, dh = d / blk.heads;
  const std::size_t nt = text.rows(), nv = vis.rows();
  auto proj = [&](const Tensor& w, const Tensor& x, std::size_t row,
                  std::size_t k) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) s += w(k, c) * x(row, c);
    return s;
  };
  Tensor concat = Tensor::matrix(nt, d);
  for (std::size_t h = 0; h < blk.heads; ++h) {
    for (std::size_t i = 0; i < nt; ++i) {
      std::vector<double> logit(nv);
      for (std::size_t j = 0; j < nv; ++j) {
        double s = 0.0;
        for (std::size_t p = h * dh; p < (h + 1) * dh; ++p) {
          s += proj(blk.wq.value, text, i, p) * proj(blk.wk.value, vis, j, p);
        }
        logit[j] = s / std::sqrt(static_cast<double>(dh));
      }
      double z = 0.0;
      for (double l : logit) z += std::exp(l);
      for (std::size_t j = 0; j < nv; ++j) {
        const double w = std::exp(logit[j]) / z;
        for (std::size_t p = h * dh; p < (h + 1) * dh; ++p) {
          concat(i, p) += w * proj(blk.wv.value, vis, j, p);
        }
      }
    }
  }
  Tensor out = Tensor::matrix(nt, d);
  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t k = 0; k < d; ++k) out(i, k) = proj(blk.wo.value, concat, i, k);
  }
  return out;
}

CrossAttentionBlock identity_block(std::size_t d, std::size_t heads = 1) {
  return CrossAttentionBlock::from(Tensor::identity(d), Tensor::identity(d),
                                   Tensor::identity(d), Tensor::identity(d),
                                   heads, true);
}

TEST(CrossAttention, SingleKeyReturnsProjectedValue) {
  Rng rng(1);
  const auto text = random_matrix(3, 4, rng);
  const auto vis = random_matrix(1, 4, rng);
  const auto out = cross_attention_forward(text, vis, identity_block(4));
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(out(i, c), vis(0, c), 1e-15);
  }
}

TEST(CrossAttention, IdenticalKeysGiveMeanOfValues) {
  Rng rng(2);
  const auto text = random_matrix(2, 4, rng);
  auto vis = random_matrix(3, 4, rng);
  // Equal key projections, distinct values: zero Wk makes every logit equal.
  auto blk = CrossAttentionBlock::from(Tensor::identity(4), Tensor::matrix(4, 4),
                                       Tensor::identity(4), Tensor::identity(4),
                                       1, true);
  const auto out = cross_attention_forward(text, vis, blk);
  for (std::size_t c = 0; c < 4; ++c) {
    const double mean = (vis(0, c) + vis(1, c) + vis(2, c)) / 3.0;
    EXPECT_NEAR(out(0, c), mean, 1e-12);
    EXPECT_NEAR(out(1, c), mean, 1e-12);
  }
}

TEST(CrossAttention, MatchesDenseOracle) {
  for (std::size_t heads : {1u, 2u, 4u}) {
    Rng rng(3 + heads);
    const auto blk = CrossAttentionBlock::create(8, heads, true, rng);
    const auto text = random_matrix(3, 8, rng);
    const auto vis = random_matrix(5, 8, rng);
    const auto got = cross_attention_forward(text, vis, blk);
    const auto want = dense_attention(text, vis, blk);
    ASSERT_EQ(got.shape(), want.shape());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_NEAR(got[i], want[i], 1e-12) << "heads " << heads;
    }
  }
}

TEST(CrossAttention, RejectsBadShapes) {
  Rng rng(4);
  const auto blk = CrossAttentionBlock::create(8, 2, true, rng);
  EXPECT_THROW(cross_attention_forward(random_matrix(2, 6, rng),
                                       random_matrix(2, 8, rng), blk),
               Error);
  EXPECT_THROW(CrossAttentionBlock::create(8, 3, true, rng), Error);
}

TEST(Softmax, RowsSumToOneAndShiftInvariant) {
  Rng rng(5);
  auto logits = random_matrix(4, 7, rng, 30.0);
  const auto p = softmax_rows(logits);
  auto shifted = logits;
  for (std::size_t j = 0; j < 7; ++j) shifted(2, j) += 1000.0;
  const auto q = softmax_rows(shifted);
  for (std::size_t i = 0; i < 4; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 7; ++j) {
      s += p(i, j);
      EXPECT_NEAR(p(i, j), q(i, j), 1e-10);
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Lora, ZeroBIsExactlyTheBase) {
  Rng rng(6);
  const auto layer = AdaptedLinear::create("l", 5, 3, 2, 4.0, rng);
  const auto x = random_matrix(4, 5, rng);
  EXPECT_EQ(lora_forward(x, layer), matmul_nt(x, layer.weight.value));
}

TEST(Lora, ScalarExample) {
  const auto layer = AdaptedLinear::from(
      "s", Tensor::matrix(1, 1, {2.0}), Tensor::matrix(1, 1, {3.0}),
      Tensor::matrix(1, 1, {4.0}), 1.0);
  EXPECT_EQ(lora_forward(Tensor::matrix(1, 1, {5.0}), layer)[0], 70.0);
  const auto off = AdaptedLinear::from(
      "s", Tensor::matrix(1, 1, {2.0}), Tensor::matrix(1, 1, {3.0}),
      Tensor::matrix(1, 1, {4.0}), 0.0);
  EXPECT_EQ(lora_forward(Tensor::matrix(1, 1, {5.0}), off)[0], 10.0);
}

TEST(Lora, MatchesExplicitSum) {
  Rng rng(7);
  const auto w = random_matrix(3, 4, rng);
  const auto a = random_matrix(2, 4, rng);
  const auto b = random_matrix(3, 2, rng);
  const auto layer = AdaptedLinear::from("l", w, a, b, 3.0);
  const auto x = random_matrix(5, 4, rng);
  const auto y = lora_forward(x, layer);
  for (std::size_t n = 0; n < 5; ++n) {
    for (std::size_t o = 0; o < 3; ++o) {
      double want = 0.0;
      for (std::size_t i = 0; i < 4; ++i) {
        double delta = 0.0;
        for (std::size_t k = 0; k < 2; ++k) delta += b(o, k) * a(k, i);
        want += (w(o, i) + 1.5 * delta) * x(n, i);
      }
      EXPECT_NEAR(y(n, o), want, 1e-12);
    }
  }
}

TEST(Lora, PreservesLeadingDimensions) {
  Rng rng(8);
  const auto layer = AdaptedLinear::create("l", 4, 6, 1, 1.0, rng);
  Tensor x({2, 3, 4}, 0.5);
  EXPECT_EQ(lora_forward(x, layer).shape(), (std::vector<std::size_t>{2, 3, 6}));
  EXPECT_THROW(lora_forward(Tensor({2, 5}, 1.0), layer), Error);
}

TEST(Lora, RejectsMismatchedAdapter) {
  try {
    AdaptedLinear::from("l", Tensor::matrix(3, 4), Tensor::matrix(2, 5),
                        Tensor::matrix(3, 2), 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
  }
}

IntegrationConfig ones_projection(std::size_t d, std::size_t gh, std::size_t gw) {
  return IntegrationConfig::create(gh, gw, Tensor({d, 1}, 1.0));
}

TEST(Integration, QuadrantMask) {
  MaskBuffer m(4, 4);
  for (std::size_t y = 0; y < 4; ++y) {
    for (std::size_t x = 0; x < 4; ++x) {
      m.at(x, y) = (x < 2 && y < 2) ? 255 : (x >= 2 && y >= 2) ? 51 : 0;
    }
  }
  const Tensor vit({3, 2}, 7.0);
  const auto out = integrate_features(vit, m, ones_projection(2, 2, 2));
  ASSERT_EQ(out.rows(), 7u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(out(i, 0), 7.0);
  EXPECT_EQ(out(3, 0), 1.0);
  EXPECT_EQ(out(4, 1), 0.0);
  EXPECT_EQ(out(5, 0), 0.0);
  EXPECT_NEAR(out(6, 1), 0.2, 1e-15);
}

TEST(Integration, EmptyMaskAddsZeroTokens) {
  const Tensor vit({2, 3}, 1.0);
  const auto out = integrate_features(vit, MaskBuffer(5, 5), ones_projection(3, 1, 1));
  EXPECT_EQ(out.rows(), 3u);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(out(2, c), 0.0);
}

TEST(Integration, RemainderJoinsLastCell) {
  MaskBuffer m(5, 1);
  m.values = {0, 0, 255, 255, 255};
  const auto pooled = pool_mask(m, 1, 2);
  ASSERT_EQ(pooled.size(), 2u);
  EXPECT_EQ(pooled[0], 0.0);
  EXPECT_EQ(pooled[1], 1.0);
}

TEST(Integration, Errors) {
  EXPECT_THROW(IntegrationConfig::create(1, 1, Tensor::matrix(3, 2)), Error);
  try {
    pool_mask(MaskBuffer(4, 4), 0, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidParam);
  }
  EXPECT_THROW(pool_mask(MaskBuffer(2, 2), 3, 3), Error);
  EXPECT_THROW(integrate_features(Tensor({2, 4}, 1.0), MaskBuffer(2, 2),
                                  ones_projection(3, 1, 1)),
               Error);
}

TEST(PatchTokens, MeanColourThroughEmbedding) {
  ImageBuffer img(2, 2);
  for (std::size_t x = 0; x < 2; ++x) {
    for (std::size_t y = 0; y < 2; ++y) img.at(x, y, 0) = x == 0 ? 255 : 0;
  }
  const auto t = patch_tokens(img, 1, 2, Tensor::matrix(2, 3, {1, 0, 0, 0, 1, 0}));
  EXPECT_EQ(t.shape(), (std::vector<std::size_t>{2, 2}));
  EXPECT_EQ(t(0, 0), 1.0);
  EXPECT_EQ(t(1, 0), 0.0);
  EXPECT_EQ(t(0, 1), 0.0);
}

std::size_t closed_form_total(const ToyConfig& c) {
  const std::size_t d = c.dim, hid = c.hidden(), r = c.lora_rank;
  std::size_t n = d * d + 4 * d * d + 2 * d * hid;
  if (c.targets("mlp_up")) n += r * (d + hid);
  if (c.targets("mlp_down")) n += r * (hid + d);
  if (c.integration) n += d;
  return n;
}

TEST(CountParams, ClosedForms) {
  ToyConfig c;
  const ToyModel m(c, 1);
  const auto rep = count_params(m);
  EXPECT_EQ(rep.total, closed_form_total(c));
  EXPECT_EQ(rep.groups.at("lora").trainable, 2 * c.lora_rank * (8 + 16));
  EXPECT_EQ(rep.groups.at("cross_attention").trainable, 4u * 64u);
  EXPECT_EQ(rep.groups.at("vit").frozen, 64u);
  EXPECT_EQ(rep.groups.at("lm_base").frozen, 2u * 8u * 16u);
  EXPECT_EQ(rep.trainable + rep.frozen, rep.total);
}

TEST(CountParams, AgreesWithEnumeration) {
  for (std::size_t r : {0u, 1u, 3u}) {
    for (bool attn : {true, false}) {
      for (bool integ : {true, false}) {
        ToyConfig c;
        c.dim = 6;
        c.heads = 2;
        c.lora_rank = r;
        c.lora_targets = r == 3 ? std::vector<std::string>{"mlp_down"}
                                : std::vector<std::string>{"mlp_up", "mlp_down"};
        c.cross_attention_trainable = attn;
        if (integ) c.integration = std::make_pair(2, 3);
        ToyModel m(c, 2);
        std::size_t trainable = 0, frozen = 0;
        for (const Parameter* p : m.parameters()) {
          (p->trainable ? trainable : frozen) += p->value.size();
        }
        const auto rep = count_params(m);
        EXPECT_EQ(rep.trainable, trainable);
        EXPECT_EQ(rep.frozen, frozen);
        EXPECT_EQ(rep.total, closed_form_total(c));
      }
    }
  }
}

TEST(CountParams, FrozenEverything) {
  ToyConfig c;
  c.lora_rank = 0;
  c.cross_attention_trainable = false;
  const auto rep = count_params(ToyModel(c, 3));
  EXPECT_EQ(rep.trainable, 0u);
  EXPECT_EQ(rep.frozen, rep.total);
}

TEST(ToyConfig, Validation) {
  ToyConfig c;
  c.heads = 3;
  EXPECT_THROW(ToyModel(c, 1), Error);
  c = {};
  c.lora_targets = {"attn"};
  EXPECT_THROW(ToyModel(c, 1), Error);
  c = {};
  c.integration = std::make_pair(0, 1);
  EXPECT_THROW(ToyModel(c, 1), Error);
}

TEST(ToyModel, FreshAdaptersLeaveOutputUnchanged) {
  const ToyConfig c;
  const auto batch = make_batch(c, 9);
  ToyModel m(c, 9);
  const auto y = m.forward(batch);
  m.mlp_up().adapter.alpha = 0.0;
  m.mlp_down().adapter.alpha = 0.0;
  EXPECT_EQ(m.forward(batch), y);
}

TEST(ToyModel, DeterministicForSeed) {
  ToyConfig c;
  c.integration = std::make_pair(2, 2);
  const auto b = make_batch(c, 4);
  EXPECT_EQ(ToyModel(c, 4).loss(b), ToyModel(c, 4).loss(b));
  EXPECT_NE(ToyModel(c, 4).loss(b), ToyModel(c, 5).loss(b));
  ASSERT_TRUE(b.mask.has_value());
  EXPECT_EQ(b.mask->width, 9u);
}

TEST(ToyModel, MissingMaskIsAnError) {
  ToyConfig c;
  c.integration = std::make_pair(1, 1);
  auto b = make_batch(c, 1);
  b.mask.reset();
  EXPECT_THROW(ToyModel(c, 1).loss(b), Error);
}

}  // namespace
}  // namespace vqakit
