#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "core/error.hpp"
#include "core/rng.hpp"
#include "data/loaders.hpp"
#include "data/npy.hpp"
#include "data/synth.hpp"
#include "archives.hpp"
#include "fixtures.hpp"

using namespace e2i;
using namespace e2i::data;
using e2i::testing::TempDir;
using e2i::testing::make_fake_eegcvpr40;
using e2i::testing::make_fake_thoughtviz;
namespace fs = std::filesystem;

namespace {

EEGRecording make_eeg(int c, int l, std::uint64_t seed) {
  Rng rng(seed);
  EEGRecording e;
  e.id = "r";
  e.channels = c;
  e.length = l;
  e.samples.resize(static_cast<std::size_t>(c) * l);
  for (auto& v : e.samples) v = 3.0 + 2.5 * rng.normal();
  return e;
}

// Counts every offset a window could start at that lies on the stride grid.
int brute_force_windows(int length, int window, double overlap) {
  const int stride = std::max(1, static_cast<int>(std::lround(window * (1.0 - overlap))));
  int n = 0;
  for (int off = 0; off < length; ++off)
    if (off % stride == 0 && off + window <= length) ++n;
  return n;
}

}  // namespace

TEST(Standardize, ZeroMeanUnitStd) {
  auto out = standardize(make_eeg(5, 300, 1));
  EXPECT_TRUE(out.zero_variance_channels.empty());
  for (int c = 0; c < 5; ++c) {
    double mu = 0, var = 0;
    for (int t = 0; t < 300; ++t) mu += out.eeg.at(c, t);
    mu /= 300;
    for (int t = 0; t < 300; ++t) var += (out.eeg.at(c, t) - mu) * (out.eeg.at(c, t) - mu);
    EXPECT_LT(std::abs(mu), 1e-6);
    EXPECT_LT(std::abs(std::sqrt(var / 300) - 1.0), 1e-4);
  }
}

TEST(Standardize, HandComputedPopulationZScore) {
  EEGRecording e{"h", 1, 3, {1, 2, 3}};
  auto out = standardize(e);
  // sigma = sqrt(2/3): z = (x - 2) / sqrt(2/3)
  EXPECT_NEAR(out.eeg.samples[0], -1.224744871, 1e-4);
  EXPECT_NEAR(out.eeg.samples[1], 0.0, 1e-12);
  EXPECT_NEAR(out.eeg.samples[2], 1.224744871, 1e-4);
}

TEST(Standardize, ConstantChannelIsMeanSubtractedAndReported) {
  EEGRecording e{"k", 2, 4, {5, 5, 5, 5, 1, 2, 3, 4}};
  auto out = standardize(e);
  ASSERT_EQ(out.zero_variance_channels, std::vector<int>{0});
  for (int t = 0; t < 4; ++t) EXPECT_EQ(out.eeg.at(0, t), 0.0);
  EXPECT_NEAR(out.eeg.at(1, 0), -1.3416407865, 1e-9);
}

TEST(Standardize, Idempotent) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto once = standardize(make_eeg(3, 64, seed)).eeg;
    auto twice = standardize(once).eeg;
    for (std::size_t i = 0; i < once.samples.size(); ++i) EXPECT_NEAR(once.samples[i], twice.samples[i], 1e-5);
  }
}

TEST(Chunk, NonOverlappingTiling) {
  auto e = make_eeg(2, 64, 4);
  e.subject_id = 3;
  e.class_label = 1;
  auto w = chunk(e, 32, 0.0);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[1].at(1, 0), e.at(1, 32));
  EXPECT_EQ(w[1].subject_id, 3);
  EXPECT_EQ(w[1].class_label, 1);
}

TEST(Chunk, HalfOverlapCount) {
  auto w = chunk(make_eeg(1, 1280, 5), 32, 0.5);
  EXPECT_EQ(w.size(), 79u);  // floor((1280 - 32) / 16) + 1
}

TEST(Chunk, WindowTooLong) { EXPECT_THROW(chunk(make_eeg(1, 16, 6), 32, 0.0), ArgumentError); }

TEST(Chunk, BadOverlap) { EXPECT_THROW(chunk(make_eeg(1, 64, 6), 32, 1.0), ArgumentError); }

TEST(Chunk, MatchesBruteForceEnumerationSweep) {
  Rng rng(42);
  for (int trial = 0; trial < 300; ++trial) {
    const int length = rng.uniform_int(1, 400);
    const int window = rng.uniform_int(1, length);
    const double overlap = rng.uniform(0.0, 0.99);
    auto w = chunk(make_eeg(1, length, 1), window, overlap);
    EXPECT_EQ(static_cast<int>(w.size()), brute_force_windows(length, window, overlap))
        << "L=" << length << " W=" << window << " o=" << overlap;
  }
}

TEST(Synth, DeterministicAndCounted) {
  SynthOptions o;
  o.num_classes = 4;
  o.channels = 8;
  o.length = 128;
  o.samples_per_class = 16;
  o.image_size = 64;
  o.seed = 7;
  auto a = synth_dataset(o);
  auto b = synth_dataset(o);
  ASSERT_EQ(a.samples.size(), 64u);
  EXPECT_EQ(a.manifest, b.manifest);
  std::set<const Image*> distinct;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    EXPECT_EQ(a.samples[i].eeg, b.samples[i].eeg);
    EXPECT_EQ(*a.samples[i].image, *b.samples[i].image);
    distinct.insert(a.samples[i].image.get());
  }
  EXPECT_EQ(distinct.size(), 4u);

  TempDir d1("synth1"), d2("synth2");
  write_dataset(d1.path(), a.manifest, a.samples);
  write_dataset(d2.path(), b.manifest, b.samples);
  for (auto& entry : fs::recursive_directory_iterator(d1.path())) {
    if (!entry.is_regular_file()) continue;
    auto rel = fs::relative(entry.path(), d1.path());
    std::ifstream f1(entry.path(), std::ios::binary), f2(d2.path() / rel, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), {}), s2((std::istreambuf_iterator<char>(f2)), {});
    EXPECT_EQ(s1, s2) << rel;
  }
}

TEST(Synth, SplitsDisjointAndRoundTrip) {
  SynthOptions o;
  o.samples_per_class = 8;
  o.image_size = 16;
  auto ds = synth_dataset(o);
  TempDir dir("synth_rt");
  write_dataset(dir.path(), ds.manifest, ds.samples);
  auto train = load_dataset(dir.path(), "train");
  auto test = load_dataset(dir.path(), "test");
  std::set<std::string> ids;
  for (auto& s : train.samples) ids.insert(s.eeg.id);
  for (auto& s : test.samples) EXPECT_FALSE(ids.count(s.eeg.id));
  EXPECT_EQ(train.samples.size() + test.samples.size(), ds.samples.size());
  // Stored as float32.
  EXPECT_NEAR(train.samples[0].eeg.samples[5], ds.samples[0].eeg.samples[5], 1e-6);
  EXPECT_THROW(load_dataset(dir.path(), "nonexistent_split"), ArgumentError);
  fs::remove(dir.path() / train.manifest.samples[0].eeg_file);
  EXPECT_THROW(load_dataset(dir.path(), "all"), IoError);
}

TEST(Manifest, RejectsOverlappingSplits) {
  auto ds = synth_dataset({});
  auto m = ds.manifest;
  m.splits["test"].push_back(m.splits["train"].front());
  EXPECT_THROW(m.validate(), ArgumentError);
}

TEST(Npy, RoundTripFloat64) {
  TempDir dir("npy");
  NdArray a{{2, 3, 1}, {1, 2, 3, 4, 5, 6.25}};
  write_npy((dir.path() / "a.npy").string(), a, NpyDtype::Float64);
  auto b = read_npy((dir.path() / "a.npy").string());
  EXPECT_EQ(a.shape, b.shape);
  EXPECT_EQ(a.values, b.values);
  EXPECT_THROW(read_npy((dir.path() / "missing.npy").string()), IoError);
}

TEST(Eegcvpr40, TrainSplitShape) {
  TempDir dir("cvpr");
  make_fake_eegcvpr40(dir.path());
  auto ds = load_eegcvpr40(dir.path(), "train", {.image_size = 16});
  ASSERT_FALSE(ds.samples.empty());
  EXPECT_EQ(ds.manifest.num_classes, 40);
  for (const auto& s : ds.samples) {
    EXPECT_EQ(s.eeg.channels, 128);
    EXPECT_GE(s.eeg.subject_id, 1);
    EXPECT_LE(s.eeg.subject_id, 6);
    EXPECT_EQ(s.image->height, 16);
  }
}

TEST(Eegcvpr40, TestSplitCountMatchesSplitFile) {
  TempDir dir("cvpr");
  make_fake_eegcvpr40(dir.path());
  // Independent count straight from the split file.
  std::ifstream in(dir.path() / "splits" / "test.txt");
  int lines = 0;
  for (std::string l; std::getline(in, l);)
    if (!l.empty()) ++lines;
  auto ds = load_eegcvpr40(dir.path(), "test", {.image_size = 8});
  EXPECT_EQ(static_cast<int>(ds.samples.size()), lines);
}

TEST(Eegcvpr40, Errors) {
  TempDir dir("cvpr");
  make_fake_eegcvpr40(dir.path());
  EXPECT_THROW(load_eegcvpr40(dir.path(), "nonexistent_split"), ArgumentError);
  fs::remove(dir.path() / "labels.txt");
  try {
    load_eegcvpr40(dir.path(), "train");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("labels.txt"), std::string::npos);
  }
}

TEST(Thoughtviz, WindowShapeAndClasses) {
  TempDir dir("tv");
  make_fake_thoughtviz(dir.path(), 10, 96);
  auto ds = load_thoughtviz(dir.path(), {.image_size = 8});
  EXPECT_EQ(ds.manifest.num_classes, 10);
  for (const auto& s : ds.samples) {
    EXPECT_EQ(s.eeg.channels, 14);
    EXPECT_EQ(s.eeg.length, 32);
  }
}

TEST(Thoughtviz, TenSecondRecordingChunkCount) {
  TempDir dir("tv");
  make_fake_thoughtviz(dir.path(), 1, 1280);
  for (double overlap : {0.0, 0.25, 0.5, 0.75}) {
    ThoughtvizOptions o;
    o.overlap_fraction = overlap;
    o.image_size = 8;
    auto ds = load_thoughtviz(dir.path(), o);
    EXPECT_EQ(static_cast<int>(ds.samples.size()), brute_force_windows(1280, 32, overlap)) << overlap;
  }
}

TEST(Thoughtviz, EmptyRootIsIngestionError) {
  TempDir dir("tv_empty");
  EXPECT_THROW(load_thoughtviz(dir.path()), IoError);
}
