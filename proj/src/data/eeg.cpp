#include "data/eeg.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"
#include "core/log.hpp"

namespace e2i::data {

void EEGRecording::validate(int num_classes) const {
  if (channels < 1 || length < 1)
    throw ArgumentError("EEG recording " + id + " has empty shape " + std::to_string(channels) +
                        "x" + std::to_string(length));
  if (samples.size() != static_cast<std::size_t>(channels) * length)
    throw ArgumentError("EEG recording " + id + " sample count does not match its shape");
  for (double v : samples)
    if (!std::isfinite(v)) throw ArgumentError("EEG recording " + id + " contains non-finite values");
  if (subject_id < 0) throw ArgumentError("EEG recording " + id + " has negative subject id");
  if (num_classes > 0 && (class_label < 0 || class_label >= num_classes))
    throw ArgumentError("EEG recording " + id + " label " + std::to_string(class_label) +
                        " outside [0, " + std::to_string(num_classes) + ")");
  if (!(sample_rate_hz > 0)) throw ArgumentError("EEG recording " + id + " has non-positive sample rate");
}

Tensor EEGRecording::to_tensor() const { return Tensor::from({channels, length}, samples); }

Standardized standardize(const EEGRecording& eeg) {
  Standardized out{eeg, {}};
  const double n = static_cast<double>(eeg.length);
  for (int c = 0; c < eeg.channels; ++c) {
    double mu = 0;
    for (int t = 0; t < eeg.length; ++t) mu += eeg.at(c, t);
    mu /= n;
    double var = 0;
    for (int t = 0; t < eeg.length; ++t) var += (eeg.at(c, t) - mu) * (eeg.at(c, t) - mu);
    var /= n;
    const double sd = std::sqrt(var);
    const bool degenerate = !(sd > 1e-12 * std::max(1.0, std::abs(mu)));
    if (degenerate) out.zero_variance_channels.push_back(c);
    for (int t = 0; t < eeg.length; ++t)
      out.eeg.at(c, t) = degenerate ? eeg.at(c, t) - mu : (eeg.at(c, t) - mu) / sd;
  }
  if (!out.zero_variance_channels.empty())
    log::warn("recording " + eeg.id + ": " + std::to_string(out.zero_variance_channels.size()) +
              " zero-variance channel(s) mean-subtracted only");
  return out;
}

std::vector<EEGRecording> chunk(const EEGRecording& eeg, int window_length, double overlap_fraction) {
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0))
    throw ArgumentError("overlap fraction must be in [0, 1), got " + std::to_string(overlap_fraction));
  if (window_length < 1 || window_length > eeg.length)
    throw ArgumentError("window length " + std::to_string(window_length) + " does not fit recording of length " +
                        std::to_string(eeg.length));
  const int stride = std::max(1, static_cast<int>(std::lround(window_length * (1.0 - overlap_fraction))));
  std::vector<EEGRecording> out;
  for (int start = 0, k = 0; start + window_length <= eeg.length; start += stride, ++k) {
    EEGRecording w;
    w.id = eeg.id + "#" + std::to_string(k);
    w.channels = eeg.channels;
    w.length = window_length;
    w.subject_id = eeg.subject_id;
    w.class_label = eeg.class_label;
    w.stimulus_ref = eeg.stimulus_ref;
    w.sample_rate_hz = eeg.sample_rate_hz;
    w.samples.resize(static_cast<std::size_t>(eeg.channels) * window_length);
    for (int c = 0; c < eeg.channels; ++c)
      for (int t = 0; t < window_length; ++t) w.at(c, t) = eeg.at(c, start + t);
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace e2i::data
