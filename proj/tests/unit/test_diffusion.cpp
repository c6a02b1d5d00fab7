#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "core/error.hpp"
#include "data/synth.hpp"
#include "diffusion/backbone.hpp"
#include "fixtures.hpp"
#include "tiny.hpp"

using namespace e2i;
using namespace e2i::diffusion;
using e2i::testing::random_tensor;
using e2i::testing::TempDir;
using e2i::testing::tiny_backbone;

TEST(Schedule, AlphaBarMatchesRunningProduct) {
  NoiseSchedule s;
  EXPECT_EQ(s.alpha_bar(0), 1.0);
  double prod = 1.0;
  for (int t = 1; t <= 1000; ++t) {
    const double beta = 1e-4 + (0.02 - 1e-4) * (t - 1) / 999.0;
    prod *= 1.0 - beta;
    ASSERT_NEAR(s.alpha_bar(t), prod, 1e-12) << t;
    ASSERT_LT(s.alpha_bar(t), s.alpha_bar(t - 1));
  }
  EXPECT_THROW(s.alpha_bar(1001), ArgumentError);
  EXPECT_THROW(s.check_t(-1), ArgumentError);
}

TEST(Schedule, AddNoiseIdentityAtZero) {
  NoiseSchedule s;
  Tensor z = random_tensor({4, 8, 8}, 1), eps = random_tensor({4, 8, 8}, 2);
  EXPECT_EQ(s.add_noise(z, 0, eps).values(), z.values());
  EXPECT_THROW(s.add_noise(z, 0, random_tensor({4, 8, 7}, 3)), ArgumentError);
  EXPECT_THROW(s.add_noise(z, 1001, eps), ArgumentError);
}

TEST(Schedule, NoisedVarianceMatchesClosedForm) {
  NoiseSchedule s;
  Rng rng(5);
  const int n = 10000;
  for (int t : {1, 250, 600, 1000}) {
    // z ~ N(0, 4): Var(z_t) = 4 ab + (1 - ab).
    std::vector<double> zs(n), eps(n);
    for (int i = 0; i < n; ++i) {
      zs[i] = 2.0 * rng.normal();
      eps[i] = rng.normal();
    }
    Tensor out = s.add_noise(Tensor::from({n}, zs), t, Tensor::from({n}, eps));
    double m = 0, v = 0;
    for (double x : out.values()) m += x;
    m /= n;
    for (double x : out.values()) v += (x - m) * (x - m);
    v /= n - 1;
    const double ab = s.alpha_bar(t), want = 4 * ab + (1 - ab);
    // Sample variance has std sqrt(2/(n-1)) * sigma^2; allow 4 of them.
    EXPECT_NEAR(v, want, 4 * want * std::sqrt(2.0 / (n - 1))) << t;
  }
}

TEST(Schedule, SignalDecorrelatedAtFinalStep) {
  NoiseSchedule s;
  Rng rng(6);
  const int n = 10000;
  std::vector<double> zs(n), eps(n);
  for (int i = 0; i < n; ++i) {
    zs[i] = rng.normal();
    eps[i] = rng.normal();
  }
  Tensor out = s.add_noise(Tensor::from({n}, zs), 1000, Tensor::from({n}, eps));
  double sxy = 0, sxx = 0, syy = 0;
  for (int i = 0; i < n; ++i) {
    sxy += zs[i] * out.at(i);
    sxx += zs[i] * zs[i];
    syy += out.at(i) * out.at(i);
  }
  EXPECT_LT(std::abs(sxy / std::sqrt(sxx * syy)), 0.05);
}

TEST(Schedule, SamplingTimestepsDescend) {
  for (int steps : {1, 4, 20, 50, 1000}) {
    auto ts = sampling_timesteps(1000, steps);
    ASSERT_EQ(static_cast<int>(ts.size()), steps);
    EXPECT_EQ(ts.front(), 1000);
    EXPECT_GE(ts.back(), 1);
    for (std::size_t i = 1; i < ts.size(); ++i) EXPECT_LT(ts[i], ts[i - 1]);
  }
}

TEST(Text, TokenizeAndEmbed) {
  auto te = TextEmbedder::make({"panda", "class_1"}, 8, 3);
  EXPECT_EQ(te.tokenize(""), std::vector<int>{0});
  auto toks = te.tokenize("Image of PANDA");
  ASSERT_EQ(toks.size(), 3u);
  EXPECT_EQ(te.vocab[toks[2]], "panda");
  EXPECT_EQ(te.tokenize("image of zebra")[2], 1);  // <unk>
  Tensor e = te.embed("Image of panda");
  EXPECT_EQ(e.shape(), (Shape{3, 8}));
  EXPECT_EQ(te.embed("").shape(), (Shape{1, 8}));
  EXPECT_EQ(te.embed("Image of panda").values(), e.values());
  EXPECT_NE(te.embed("Image of class_1").values(), e.values());
}

TEST(UNet, ToyBlockShapes) {
  const std::vector<Shape> want{{32, 8, 8}, {32, 8, 8}, {32, 4, 4}, {64, 4, 4}, {64, 4, 4}};
  EXPECT_EQ(block_shapes(UNetConfig{}), want);
  auto bb = make_toy_backbone({"a", "b"}, 64, 1);
  Tensor z = random_tensor({4, 8, 8}, 1);
  auto out = bb.encoder(z, bb.text.embed("Image of a"), 10);
  ASSERT_EQ(out.blocks(), want.size());
  for (std::size_t i = 0; i < out.skips.size(); ++i) EXPECT_EQ(out.skips[i].shape(), want[i]);
  EXPECT_EQ(out.mid.shape(), want.back());
  EXPECT_EQ(bb.predict(z, bb.text.embed(""), 10).shape(), (Shape{4, 8, 8}));
  EXPECT_THROW(bb.predict(random_tensor({4, 4, 4}, 2), bb.text.embed(""), 10), ArgumentError);
}

TEST(Vae, ShapesAndValidation) {
  auto vae = ToyVae::make(64, 1);
  auto img = data::class_glyph(1, 4, 64);
  EXPECT_EQ(vae.encode(img).shape(), (Shape{4, 8, 8}));
  auto dec = vae.decode(vae.encode(img));
  EXPECT_EQ(dec.height, 64);
  EXPECT_EQ(dec.channels, 3);
  for (double p : dec.pixels) {
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
  EXPECT_THROW(vae.encode(data::class_glyph(1, 4, 32)), ArgumentError);
  EXPECT_THROW(vae.encode(data::Image::blank(64, 64, 1)), ArgumentError);
}

TEST(Vae, TrainedReconstructionError) {
  std::vector<data::Image> imgs;
  for (int k = 0; k < 4; ++k) imgs.push_back(data::class_glyph(k, 4, 64));
  auto vae = ToyVae::make(64, 2);
  VaeTrainOptions o;
  o.seed = 3;
  train_vae(vae, imgs, o);
  EXPECT_LT(vae_reconstruction_error(vae, imgs), 0.1);
  EXPECT_GT(vae.scale_factor, 0.0);
}

TEST(Backbone, KindParsing) {
  EXPECT_EQ(parse_backbone_kind("toy"), BackboneKind::Toy);
  EXPECT_EQ(parse_backbone_kind("pretrained_ldm"), BackboneKind::PretrainedLdm);
  EXPECT_THROW(parse_backbone_kind("sd15"), ArgumentError);
  EXPECT_EQ(make_caption_text("panda"), "Image of panda");
}

TEST(Backbone, SaveLoadRoundTrip) {
  TempDir dir("bb");
  auto bb = tiny_backbone();
  const auto p = (dir.path() / "bb.e2i").string();
  save_backbone(bb, p);
  auto back = load_backbone(BackboneKind::Toy, p);
  EXPECT_EQ(back.fingerprint(), bb.fingerprint());
  EXPECT_TRUE(back.frozen);
  Tensor z = random_tensor({4, 8, 8}, 4);
  EXPECT_EQ(back.predict(z, back.text.embed("Image of class_2"), 77).values(),
            bb.predict(z, bb.text.embed("Image of class_2"), 77).values());
  EXPECT_EQ(back.vae.decode(z).pixels, bb.vae.decode(z).pixels);
  EXPECT_THROW(load_backbone(BackboneKind::PretrainedLdm, p), LoadError);
  EXPECT_THROW(load_backbone(BackboneKind::PretrainedLdm, (dir.path() / "missing.e2i").string()), LoadError);
  EXPECT_THROW(load_backbone(BackboneKind::Toy, ""), LoadError);
}

TEST(Backbone, FingerprintTracksArchitecture) {
  auto a = tiny_backbone(4, 1), b = tiny_backbone(4, 2);
  EXPECT_EQ(a.fingerprint(), b.fingerprint());  // weights do not enter
  auto c = make_toy_backbone(e2i::testing::class_names(4), 64, 1);
  EXPECT_NE(a.fingerprint(), c.fingerprint());
}

TEST(Backbone, FrozenAfterMake) {
  auto bb = tiny_backbone();
  bool any = false;
  bb.visit("", [&](const std::string&, Tensor& t) { any = any || t.requires_grad(); });
  EXPECT_FALSE(any);
}
