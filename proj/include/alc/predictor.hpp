#pragma once

// Probability maps for the correction loop: a built-in Gaussian naive Bayes
// classifier over (r, g, b, x/width, y/height), or an external program that
// reads the current labels from a round directory and writes probabilities
// back.

#include <array>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alc/core.hpp"
#include "alc/tensor_io.hpp"

namespace alc {

inline constexpr std::size_t kNumFeatures = 5;
inline constexpr double kVarianceFloor = 1e-4;

using PixelFeature = std::array<double, kNumFeatures>;

inline PixelFeature pixel_feature(const ImageData& im, std::size_t pixel) {
  const std::uint32_t x = static_cast<std::uint32_t>(pixel % im.width);
  const std::uint32_t y = static_cast<std::uint32_t>(pixel / im.width);
  return {im.rgb[3 * pixel] / 255.0, im.rgb[3 * pixel + 1] / 255.0, im.rgb[3 * pixel + 2] / 255.0,
          static_cast<double>(x) / im.width, static_cast<double>(y) / im.height};
}

struct NaiveBayesModel {
  std::vector<double> prior;
  std::vector<PixelFeature> mean;
  std::vector<PixelFeature> variance;

  std::size_t num_classes() const noexcept { return prior.size(); }
};

/// Closed-form fit: empirical priors and per-class diagonal Gaussians.
/// Ignore-labelled pixels are skipped. `labels` is aligned with `ds.images`.
inline NaiveBayesModel fit(const Dataset& ds, std::span<const LabelMap> labels) {
  const std::size_t C = ds.labels.num_classes();
  std::vector<std::size_t> count(C, 0);
  std::vector<PixelFeature> sum(C, PixelFeature{});

  // Per-image partial sums merged in image order keep the result
  // independent of how images are scheduled.
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    const auto& im = ds.images[i];
    std::vector<std::size_t> c_img(C, 0);
    std::vector<PixelFeature> s_img(C, PixelFeature{});
    for (std::size_t p = 0; p < im.pixel_count(); ++p) {
      const ClassId y = labels[i].data[p];
      if (ds.labels.is_ignore(y)) continue;
      if (y >= C) throw Error(Errc::InvalidLabel, im.image_id + ": label " + std::to_string(y) + " out of range");
      const auto f = pixel_feature(im, p);
      ++c_img[y];
      for (std::size_t k = 0; k < kNumFeatures; ++k) s_img[y][k] += f[k];
    }
    for (std::size_t c = 0; c < C; ++c) {
      count[c] += c_img[c];
      for (std::size_t k = 0; k < kNumFeatures; ++k) sum[c][k] += s_img[c][k];
    }
  }

  std::size_t total = 0;
  for (auto n : count) total += n;
  if (total == 0) throw Error(Errc::NoLabeledPixels, "no labelled pixels to fit on");

  NaiveBayesModel m;
  m.prior.resize(C);
  m.mean.assign(C, PixelFeature{});
  m.variance.assign(C, PixelFeature{});
  for (std::size_t c = 0; c < C; ++c) {
    m.prior[c] = static_cast<double>(count[c]) / static_cast<double>(total);
    if (count[c])
      for (std::size_t k = 0; k < kNumFeatures; ++k) m.mean[c][k] = sum[c][k] / static_cast<double>(count[c]);
  }

  std::vector<PixelFeature> sq(C, PixelFeature{});
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    const auto& im = ds.images[i];
    std::vector<PixelFeature> sq_img(C, PixelFeature{});
    for (std::size_t p = 0; p < im.pixel_count(); ++p) {
      const ClassId y = labels[i].data[p];
      if (ds.labels.is_ignore(y)) continue;
      const auto f = pixel_feature(im, p);
      for (std::size_t k = 0; k < kNumFeatures; ++k) {
        const double d = f[k] - m.mean[y][k];
        sq_img[y][k] += d * d;
      }
    }
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t k = 0; k < kNumFeatures; ++k) sq[c][k] += sq_img[c][k];
  }
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t k = 0; k < kNumFeatures; ++k)
      m.variance[c][k] = std::max(kVarianceFloor, count[c] ? sq[c][k] / static_cast<double>(count[c]) : 0.0);
  return m;
}

/// Per-pixel posterior, computed in log space and normalised per row.
inline ProbMap predict(const NaiveBayesModel& m, const ImageData& im) {
  const std::size_t C = m.num_classes();
  ProbMap out{im.image_id, im.width, im.height, static_cast<std::uint32_t>(C), {}};
  out.data.resize(im.pixel_count() * C);

  // log prior - 0.5 * sum log(2 pi var), per class
  std::vector<double> base(C, -std::numeric_limits<double>::infinity());
  for (std::size_t c = 0; c < C; ++c) {
    if (m.prior[c] <= 0.0) continue;
    double b = std::log(m.prior[c]);
    for (std::size_t k = 0; k < kNumFeatures; ++k) b -= 0.5 * std::log(2.0 * std::numbers::pi * m.variance[c][k]);
    base[c] = b;
  }

  std::vector<double> logp(C);
  for (std::size_t p = 0; p < im.pixel_count(); ++p) {
    const auto f = pixel_feature(im, p);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < C; ++c) {
      if (m.prior[c] <= 0.0) {
        logp[c] = -std::numeric_limits<double>::infinity();
        continue;
      }
      double l = base[c];
      for (std::size_t k = 0; k < kNumFeatures; ++k) {
        const double d = f[k] - m.mean[c][k];
        l -= d * d / (2.0 * m.variance[c][k]);
      }
      logp[c] = l;
      best = std::max(best, l);
    }
    double z = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      logp[c] = m.prior[c] > 0.0 ? std::exp(logp[c] - best) : 0.0;
      z += logp[c];
    }
    auto row = out.row(p);
    for (std::size_t c = 0; c < C; ++c) row[c] = static_cast<float>(logp[c] / z);
  }
  return out;
}

inline std::vector<ProbMap> fit_predict(const Dataset& ds, std::span<const LabelMap> labels) {
  const auto model = fit(ds, labels);
  std::vector<ProbMap> out;
  out.reserve(ds.images.size());
  for (const auto& im : ds.images) out.push_back(predict(model, im));
  return out;
}

// ---------------------------------------------------------------------------
// External predictor hook
//
// round_dir/labels/<image_id>.alct   u16 [H, W]     written by us
// round_dir/probs/<image_id>.alct    f32 [H, W, C]  written by the predictor

inline std::string shell_quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) {
    if (c == '\'') q += "'\\''";
    else q += c;
  }
  return q + "'";
}

inline void write_round_labels(const fs::path& round_dir, std::span<const LabelMap> labels) {
  for (const auto& lm : labels) write_tensor(round_dir / "labels" / (lm.image_id + ".alct"), lm.to_tensor());
}

inline std::vector<ProbMap> ingest_round_probs(const fs::path& round_dir, const Dataset& ds) {
  const auto dir = round_dir / "probs";
  if (!fs::is_directory(dir)) throw Error(Errc::MissingProbs, dir.string() + " does not exist");
  std::vector<ProbMap> out;
  for (const auto& im : ds.images) {
    const auto path = dir / (im.image_id + ".alct");
    if (!fs::exists(path)) throw Error(Errc::MissingProbs, path.string() + " does not exist");
    ProbMap pm;
    try {
      pm = ProbMap::from_tensor(read_tensor(path), im.image_id);
    } catch (const Error& e) {
      throw Error(Errc::ValidationFailed, path.string() + ": " + e.what());
    }
    if (pm.width != im.width || pm.height != im.height || pm.num_classes != ds.labels.num_classes())
      throw Error(Errc::ValidationFailed, path.string() + ": dims do not match the dataset");
    if (auto bad = check_prob_rows(pm)) throw Error(Errc::ValidationFailed, path.string() + ": " + *bad);
    out.push_back(std::move(pm));
  }
  return out;
}

/// Called when no command is configured: must return once round_dir/probs
/// has been populated by someone else.
using PauseHandler = std::function<void(const fs::path& round_dir)>;

inline std::vector<ProbMap> external_round_exchange(const fs::path& round_dir, const std::optional<std::string>& command,
                                                    const Dataset& ds, std::span<const LabelMap> labels,
                                                    const PauseHandler& pause = {}) {
  write_round_labels(round_dir, labels);
  if (command) {
    const std::string cmd = *command + " " + shell_quote(fs::absolute(round_dir).string());
    const int rc = std::system(cmd.c_str());
    if (rc != 0) throw Error(Errc::CommandFailed, "'" + cmd + "' exited with status " + std::to_string(rc));
  } else if (pause) {
    pause(round_dir);
  }
  return ingest_round_probs(round_dir, ds);
}

}  // namespace alc
