#include "data/synth.hpp"

#include <cmath>
#include <numbers>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace e2i::data {

namespace {

void hsv_to_rgb(double h, double s, double v, double rgb[3]) {
  const double c = v * s;
  const double hp = std::fmod(h * 6.0, 6.0);
  const double x = c * (1 - std::abs(std::fmod(hp, 2.0) - 1));
  double r = 0, g = 0, b = 0;
  if (hp < 1) r = c, g = x;
  else if (hp < 2) r = x, g = c;
  else if (hp < 3) g = c, b = x;
  else if (hp < 4) g = x, b = c;
  else if (hp < 5) r = x, b = c;
  else r = c, b = x;
  const double m = v - c;
  rgb[0] = r + m, rgb[1] = g + m, rgb[2] = b + m;
}

// Signed membership of a point (u, v in [-1, 1]) in glyph `shape`.
bool inside(int shape, double u, double v) {
  const double r = std::hypot(u, v);
  switch (shape % 8) {
    case 0: return r < 0.6;
    case 1: return std::abs(u) < 0.5 && std::abs(v) < 0.5;
    case 2: return v > -0.5 && v < 0.55 && std::abs(u) < (0.55 - v) * 0.6;
    case 3: return (std::abs(u) < 0.18 && std::abs(v) < 0.65) || (std::abs(v) < 0.18 && std::abs(u) < 0.65);
    case 4: return r < 0.65 && r > 0.38;
    case 5: return std::abs(u) + std::abs(v) < 0.65;
    case 6: return std::abs(u) < 0.65 && std::fmod(v + 0.65, 0.44) < 0.22 && std::abs(v) < 0.65;
    default: return std::abs(v) < 0.65 && std::fmod(u + 0.65, 0.44) < 0.22 && std::abs(u) < 0.65;
  }
}

}  // namespace

Image class_glyph(int class_label, int num_classes, int image_size, int variant, int variants) {
  if (variants < 1 || variant < 0 || variant >= variants) throw ArgumentError("glyph variant out of range");
  double fg[3];
  hsv_to_rgb(static_cast<double>(class_label) / num_classes, 0.85, 0.95, fg);
  const double bg[3] = {0.12, 0.12, 0.15};
  Image img = Image::blank(image_size, image_size);
  const int shape = class_label + class_label / 8;  // vary shape once colors repeat
  double scale = 1.0, cu = 0.0, cv = 0.0;
  if (variants > 1) {
    const double a = 2 * std::numbers::pi * variant / variants + 0.25 * std::numbers::pi;
    scale = 0.55;
    cu = 0.42 * std::cos(a);
    cv = 0.42 * std::sin(a);
  }
  for (int y = 0; y < image_size; ++y)
    for (int x = 0; x < image_size; ++x) {
      const double u = (x + 0.5) / image_size * 2 - 1;
      const double v = (y + 0.5) / image_size * 2 - 1;
      const bool on = inside(shape, (u - cu) / scale, (-v - cv) / scale);
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = on ? fg[c] : bg[c];
    }
  return img;
}

Dataset synth_dataset(const SynthOptions& o) {
  if (o.num_classes < 1 || o.channels < 1 || o.length < 1 || o.samples_per_class < 1 ||
      o.image_size < 1 || o.num_subjects < 1)
    throw ArgumentError("synthetic dataset parameters must be positive");
  if (!(o.test_fraction >= 0 && o.test_fraction < 1)) throw ArgumentError("test_fraction must be in [0, 1)");
  if (o.variants_per_class < 1) throw ArgumentError("variants_per_class must be positive");
  const int nv = o.variants_per_class;

  Dataset ds;
  auto& m = ds.manifest;
  m.dataset_name = DatasetName::Synthetic;
  m.num_classes = o.num_classes;
  for (int k = 0; k < o.num_classes; ++k) m.class_names.push_back("class_" + std::to_string(k));
  m.channels = o.channels;
  m.window_length = o.length;
  m.sample_rate_hz = o.sample_rate_hz;
  m.image_size = o.image_size;
  for (int s = 1; s <= o.num_subjects; ++s) m.subjects.push_back(s);
  m.splits["train"] = {};
  m.splits["test"] = {};

  std::vector<std::shared_ptr<const Image>> glyphs;
  for (int k = 0; k < o.num_classes; ++k)
    for (int v = 0; v < nv; ++v)
      glyphs.push_back(std::make_shared<const Image>(class_glyph(k, o.num_classes, o.image_size, v, nv)));

  // Class signatures: a frequency per class and a phase per (class, channel).
  Rng layout(derive_seed(o.seed, {1}));
  std::vector<double> freq(o.num_classes);
  std::vector<double> phase(static_cast<std::size_t>(o.num_classes) * o.channels);
  for (int k = 0; k < o.num_classes; ++k) freq[k] = 2.0 + 1.5 * k;  // cycles per window
  for (auto& p : phase) p = layout.uniform(0, 2 * std::numbers::pi);
  std::vector<double> subject_shift(o.num_subjects + 1);
  for (auto& s : subject_shift) s = layout.uniform(-0.4, 0.4);
  // Variant signatures use their own stream so nv == 1 leaves trials unchanged.
  Rng vlayout(derive_seed(o.seed, {3}));
  std::vector<double> vphase(static_cast<std::size_t>(nv) * o.channels);
  for (auto& p : vphase) p = vlayout.uniform(0, 2 * std::numbers::pi);

  const int n_test = static_cast<int>(std::ceil(o.samples_per_class * o.test_fraction));
  int index = 0;
  for (int k = 0; k < o.num_classes; ++k) {
    for (int i = 0; i < o.samples_per_class; ++i, ++index) {
      Rng rng(derive_seed(o.seed, {2, static_cast<std::uint64_t>(index)}));
      EEGRecording e;
      char id[32];
      std::snprintf(id, sizeof id, "s%05d", index);
      e.id = id;
      e.channels = o.channels;
      e.length = o.length;
      e.subject_id = 1 + index % o.num_subjects;
      e.class_label = k;
      const int variant = i % nv;
      e.stimulus_ref = "class_" + std::to_string(k) + (nv > 1 ? "_v" + std::to_string(variant) : "");
      e.sample_rate_hz = o.sample_rate_hz;
      e.samples.resize(static_cast<std::size_t>(o.channels) * o.length);
      const double jitter = rng.uniform(-0.3, 0.3);
      for (int c = 0; c < o.channels; ++c)
        for (int t = 0; t < o.length; ++t) {
          const double ph = 2 * std::numbers::pi * freq[k] * t / o.length + phase[k * o.channels + c] +
                            subject_shift[e.subject_id] + jitter;
          e.at(c, t) = std::sin(ph) + o.noise_std * rng.normal();
          if (nv > 1)
            e.at(c, t) += std::sin(2 * std::numbers::pi * (2.0 + 1.5 * (o.num_classes + variant)) * t / o.length +
                                   vphase[variant * o.channels + c] + jitter);
        }
      PairedSample ps;
      ps.eeg = standardize(e).eeg;
      ps.image = glyphs[static_cast<std::size_t>(k) * nv + variant];
      ps.image_path = "images/" + e.stimulus_ref + ".png";
      m.splits[i < o.samples_per_class - n_test ? "train" : "test"].push_back(e.id);
      m.samples.push_back({e.id, "eeg/" + e.id + ".npy", ps.image_path, e.subject_id, k});
      ds.samples.push_back(std::move(ps));
    }
  }
  m.validate();
  return ds;
}

}  // namespace e2i::data
