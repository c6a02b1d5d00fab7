#include <gtest/gtest.h>

#include <cmath>

#include "adapter/adapter.hpp"
#include "core/error.hpp"
#include "tiny.hpp"

using namespace e2i;
using namespace e2i::adapter;
using e2i::testing::random_tensor;
using e2i::testing::tiny_backbone;

TEST(CloneEncoder, CopiesWeightsIntoIndependentTrainableLeaves) {
  auto bb = tiny_backbone();
  auto a = clone_encoder(bb);
  auto src = nn::collect(bb.encoder), dst = nn::collect(a.encoder_copy);
  ASSERT_EQ(src.size(), dst.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    EXPECT_EQ(src[i].first, dst[i].first);
    EXPECT_EQ(src[i].second.values(), dst[i].second.values());
    EXPECT_TRUE(dst[i].second.requires_grad());
    EXPECT_FALSE(src[i].second.requires_grad());
  }
  dst[0].second.mutable_data()[0] += 1.0;
  EXPECT_NE(src[0].second.values()[0], dst[0].second.values()[0]);
  EXPECT_EQ(a.backbone_fingerprint, bb.fingerprint());
}

TEST(CloneEncoder, ZeroConvsOnePerBlock) {
  auto bb = tiny_backbone();
  auto a = clone_encoder(bb);
  const auto shapes = diffusion::block_shapes(bb.unet_config());
  ASSERT_EQ(a.output_zero_convs.size(), shapes.size());
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    EXPECT_EQ(a.output_zero_convs[i].in_channels(), shapes[i][0]);
    for (double w : a.output_zero_convs[i].weight.values()) EXPECT_EQ(w, 0.0);
    for (double b : a.output_zero_convs[i].bias.values()) EXPECT_EQ(b, 0.0);
  }
  for (double w : a.input_zero_conv.weight.values()) EXPECT_EQ(w, 0.0);
}

TEST(CloneEncoder, DeclaredShapeMismatchIsConfigError) {
  auto bb = tiny_backbone();
  auto shapes = diffusion::block_shapes(bb.unet_config());
  EXPECT_NO_THROW(clone_encoder(bb, shapes));
  shapes[2][0] += 1;
  EXPECT_THROW(clone_encoder(bb, shapes), ConfigError);
}

TEST(BuildControl, PerPixelOracle) {
  Rng rng(4);
  auto conv = nn::Conv2d::zero(4, 4);
  for (auto& w : conv.weight.mutable_data()) w = rng.normal();
  for (auto& b : conv.bias.mutable_data()) b = rng.normal();
  Tensor zt = random_tensor({4, 3, 5}, 1), ze = random_tensor({4, 3, 5}, 2);
  Tensor c = build_control(zt, ze, conv);
  const auto& W = conv.weight.values();
  for (int o = 0; o < 4; ++o)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 5; ++x) {
        double want = zt.at((o * 3 + y) * 5 + x) + conv.bias.at(o);
        for (int i = 0; i < 4; ++i) want += W[o * 4 + i] * ze.at((i * 3 + y) * 5 + x);
        ASSERT_NEAR(c.at((o * 3 + y) * 5 + x), want, 1e-12);
      }
  EXPECT_THROW(build_control(zt, random_tensor({4, 3, 4}, 3), conv), ArgumentError);
}

TEST(BuildControl, ZeroConvPassesNoisyLatentThrough) {
  auto conv = nn::Conv2d::zero(4, 4);
  Tensor zt = random_tensor({4, 8, 8}, 1);
  EXPECT_EQ(build_control(zt, random_tensor({4, 8, 8}, 9, 50.0), conv).values(), zt.values());
}

TEST(Inject, HandExample) {
  diffusion::EncoderOutput acts;
  acts.skips = {Tensor::from({1, 1, 2}, {1, 2}), Tensor::from({1, 1, 1}, {3})};
  acts.mid = Tensor::from({1, 1, 1}, {4});
  ControlResiduals r;
  r.maps = {Tensor::from({1, 1, 2}, {10, 20}), Tensor::from({1, 1, 1}, {30}), Tensor::from({1, 1, 1}, {40})};
  r.scales = {1.0, 0.5, 0.0};
  inject_residuals(acts, r);
  EXPECT_EQ(acts.skips[0].values(), (std::vector<double>{11, 22}));
  EXPECT_EQ(acts.skips[1].values(), (std::vector<double>{18}));
  EXPECT_EQ(acts.mid.values(), (std::vector<double>{4}));
}

TEST(Inject, SelfResidualDoubles) {
  auto bb = tiny_backbone();
  Tensor z = random_tensor({4, 8, 8}, 2);
  auto acts = bb.encoder(z, bb.text.embed("Image of class_1"), 100);
  auto orig = acts;
  ControlResiduals r;
  for (auto& s : orig.skips) r.maps.push_back(s);
  r.maps.push_back(orig.mid);
  r.scales.assign(r.maps.size(), 1.0);
  inject_residuals(acts, r);
  for (std::size_t i = 0; i < acts.skips.size(); ++i)
    for (std::size_t j = 0; j < acts.skips[i].numel(); ++j)
      ASSERT_EQ(acts.skips[i].at(j), 2 * orig.skips[i].at(j));
  for (std::size_t j = 0; j < acts.mid.numel(); ++j) ASSERT_EQ(acts.mid.at(j), 2 * orig.mid.at(j));
}

TEST(Inject, MismatchIsInternalError) {
  diffusion::EncoderOutput acts;
  acts.skips = {Tensor::from({1, 1, 2}, {1, 2})};
  acts.mid = Tensor::from({1, 1, 1}, {4});
  ControlResiduals r;
  r.maps = {Tensor::from({1, 1, 2}, {1, 1})};
  r.scales = {1.0};
  EXPECT_THROW(inject_residuals(acts, r), InternalError);
  r.maps = {Tensor::from({1, 1, 3}, {1, 1, 1}), Tensor::from({1, 1, 1}, {1})};
  r.scales = {1.0, 1.0};
  EXPECT_THROW(inject_residuals(acts, r), InternalError);
}

TEST(AdapterForward, ZeroAtInit) {
  auto bb = tiny_backbone();
  auto a = clone_encoder(bb);
  auto r = adapter_forward(a, random_tensor({4, 8, 8}, 3), bb.text.embed("Image of class_0"), 500, bb.schedule);
  ASSERT_EQ(r.maps.size(), 5u);
  for (const auto& m : r.maps)
    for (double v : m.values()) ASSERT_EQ(v, 0.0);
  EXPECT_THROW(adapter_forward(a, random_tensor({4, 8, 8}, 3), bb.text.embed(""), 1001, bb.schedule), ArgumentError);
}

TEST(GuessScales, GeometricRamp) {
  auto s = guess_mode_scales(5);
  ASSERT_EQ(s.size(), 5u);
  EXPECT_DOUBLE_EQ(s.back(), 1.0);
  EXPECT_NEAR(s.front(), 0.1, 1e-15);
  for (std::size_t i = 1; i < s.size(); ++i) EXPECT_NEAR(s[i] / s[i - 1], std::pow(10.0, 0.25), 1e-12);
  EXPECT_EQ(guess_mode_scales(1), std::vector<double>{1.0});
}
