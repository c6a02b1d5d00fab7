#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "core/adam.hpp"
#include "core/checkpoint.hpp"
#include "core/error.hpp"

using namespace e2i;
namespace fs = std::filesystem;

namespace {

fs::path tmp_file(const std::string& name) { return fs::temp_directory_path() / name; }

nn::NamedParams two_params() {
  return {{"a.weight", Tensor::param({2, 3}, {1, 2, 3, 4, 5, 6})}, {"a.bias", Tensor::param({2}, {-1, 0.5})}};
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
  Checkpoint ck;
  ck.kind = "test.kind";
  ck.meta = {{"seed", 42}, {"note", "x"}};
  const double tiny = std::numeric_limits<double>::denorm_min();
  ck.put("w", {2, 2}, {0.1, -1e300, tiny, -0.0});
  ck.put_params(two_params(), "model.");
  const auto path = tmp_file("e2i_ckpt_roundtrip.e2i").string();
  save_checkpoint(ck, path);
  const auto back = load_checkpoint(path, "test.kind");
  fs::remove(path);
  EXPECT_EQ(back.kind, "test.kind");
  EXPECT_EQ(back.meta, ck.meta);
  ASSERT_EQ(back.tensors.size(), 3u);
  const auto& w = back.get("w");
  EXPECT_EQ(w.shape, (Shape{2, 2}));
  EXPECT_EQ(w.values[0], 0.1);
  EXPECT_EQ(w.values[1], -1e300);
  EXPECT_EQ(w.values[2], tiny);
  EXPECT_TRUE(std::signbit(w.values[3]));
  EXPECT_EQ(back.get("model.a.bias").values, (std::vector<double>{-1, 0.5}));
}

TEST(Checkpoint, SameContentSameBytes) {
  Checkpoint ck;
  ck.kind = "k";
  ck.put_params(two_params());
  const auto p1 = tmp_file("e2i_ckpt_b1.e2i").string(), p2 = tmp_file("e2i_ckpt_b2.e2i").string();
  save_checkpoint(ck, p1);
  save_checkpoint(ck, p2);
  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  EXPECT_EQ(slurp(p1), slurp(p2));
  fs::remove(p1);
  fs::remove(p2);
}

TEST(Checkpoint, LoadParamsCopiesAndChecks) {
  Checkpoint ck;
  ck.put_params(two_params());
  nn::NamedParams dst{{"a.weight", Tensor::param({2, 3}, std::vector<double>(6, 0.0))},
                      {"a.bias", Tensor::param({2}, {0, 0})}};
  ck.load_params(dst);
  EXPECT_EQ(dst[0].second.values(), (std::vector<double>{1, 2, 3, 4, 5, 6}));

  nn::NamedParams wrong_shape{{"a.weight", Tensor::param({3, 2}, std::vector<double>(6, 0.0))}};
  EXPECT_THROW(ck.load_params(wrong_shape), LoadError);
  nn::NamedParams missing{{"b.weight", Tensor::param({1}, {0})}};
  EXPECT_THROW(ck.load_params(missing), LoadError);
}

TEST(Checkpoint, RejectsBadFiles) {
  EXPECT_THROW(load_checkpoint(tmp_file("e2i_no_such_file.e2i").string()), LoadError);

  const auto junk = tmp_file("e2i_ckpt_junk.e2i").string();
  std::ofstream(junk, std::ios::binary) << "definitely not a checkpoint";
  EXPECT_THROW(load_checkpoint(junk), LoadError);

  Checkpoint ck;
  ck.kind = "alpha";
  ck.put_params(two_params());
  const auto good = tmp_file("e2i_ckpt_kind.e2i").string();
  save_checkpoint(ck, good);
  EXPECT_THROW(load_checkpoint(good, "beta"), LoadError);
  EXPECT_NO_THROW(load_checkpoint(good));

  // Chop the payload.
  const auto size = fs::file_size(good);
  fs::resize_file(good, size - 8);
  EXPECT_THROW(load_checkpoint(good), LoadError);
  fs::remove(junk);
  fs::remove(good);
}

TEST(Checkpoint, FingerprintTracksNamesAndShapes) {
  const auto base = params_fingerprint(two_params());
  EXPECT_EQ(base, params_fingerprint(two_params()));
  nn::NamedParams renamed{{"b.weight", Tensor::param({2, 3}, std::vector<double>(6, 0.0))},
                          {"a.bias", Tensor::param({2}, {0, 0})}};
  EXPECT_NE(base, params_fingerprint(renamed));
  nn::NamedParams reshaped{{"a.weight", Tensor::param({3, 2}, std::vector<double>(6, 0.0))},
                           {"a.bias", Tensor::param({2}, {0, 0})}};
  EXPECT_NE(base, params_fingerprint(reshaped));
  EXPECT_NE(base, params_fingerprint(two_params(), "extra"));
  EXPECT_EQ(hex64(0xabcULL).size(), 16u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  // With bias correction the first update is lr * g / (|g| + eps).
  Tensor w = Tensor::param({3}, {1.0, 1.0, 1.0});
  Adam opt({{"w", w}}, AdamConfig{0.1});
  backward(ops::sum(ops::mul(w, Tensor::from({3}, {2.0, -3.0, 0.0}))));
  opt.step();
  EXPECT_NEAR(w.at(0), 0.9, 1e-9);
  EXPECT_NEAR(w.at(1), 1.1, 1e-9);
  EXPECT_DOUBLE_EQ(w.at(2), 1.0);
  EXPECT_TRUE(w.grad().empty() || w.grad()[0] == 0.0);
  EXPECT_EQ(opt.steps_taken(), 1);
}

TEST(Adam, RestoredStateContinuesIdentically) {
  auto run = [](int steps, Tensor& w, Adam& opt) {
    for (int i = 0; i < steps; ++i) {
      backward(ops::sum(ops::mul(ops::mul(w, w), Tensor::from({2}, {1.0, 3.0}))));
      opt.step();
    }
  };
  Tensor a = Tensor::param({2}, {1.0, -2.0});
  Adam oa({{"w", a}}, AdamConfig{0.05});
  run(6, a, oa);

  Tensor b = Tensor::param({2}, {1.0, -2.0});
  Adam ob({{"w", b}}, AdamConfig{0.05});
  run(3, b, ob);
  Tensor c = Tensor::param({2}, b.values());
  Adam oc({{"w", c}}, AdamConfig{0.05});
  oc.restore(ob.steps_taken(), ob.moments());
  run(3, c, oc);
  EXPECT_EQ(a.values(), c.values());

  Adam od({{"w", c}}, AdamConfig{0.05});
  EXPECT_THROW(od.restore(3, {}), LoadError);
}
