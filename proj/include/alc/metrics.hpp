#pragma once

// Selection quality (mislabel detection) and dataset quality (accuracy, IoU).
// Pixels that are ignore-labelled in either map are excluded everywhere.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "alc/core.hpp"
#include "alc/query.hpp"

namespace alc {

struct DetectionReport {
  std::int64_t selected = 0;
  std::int64_t true_positives = 0;
  std::int64_t false_positives = 0;
  std::int64_t false_negatives = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

namespace detail {

inline void require_aligned(const LabelMap& a, const LabelMap& b) {
  if (a.image_id != b.image_id || a.width != b.width || a.height != b.height || a.data.size() != b.data.size())
    throw Error(Errc::ImageMismatch, "label maps '" + a.image_id + "' and '" + b.image_id + "' are not aligned");
}

inline double ratio(std::int64_t num, std::int64_t den) {
  return den ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
}

}  // namespace detail

/// `selected[i]` marks the selected pixels of image i; a selected pixel is a
/// true positive iff its pseudo label differs from ground truth.
inline DetectionReport detection_report(std::span<const std::vector<bool>> selected, std::span<const LabelMap> pseudo,
                                        std::span<const LabelMap> gt, const LabelSpace& space) {
  if (selected.size() != pseudo.size() || pseudo.size() != gt.size())
    throw Error(Errc::ImageMismatch, "selection, pseudo and gt cover different image counts");
  DetectionReport r;
  for (std::size_t i = 0; i < pseudo.size(); ++i) {
    detail::require_aligned(pseudo[i], gt[i]);
    if (selected[i].size() != pseudo[i].data.size())
      throw Error(Errc::ImageMismatch, "selection mask size mismatch for " + pseudo[i].image_id);
    for (std::size_t p = 0; p < pseudo[i].data.size(); ++p) {
      const ClassId y = pseudo[i].data[p], g = gt[i].data[p];
      if (space.is_ignore(y) || space.is_ignore(g)) continue;
      const bool wrong = y != g;
      if (selected[i][p]) {
        ++r.selected;
        if (wrong) ++r.true_positives;
        else ++r.false_positives;
      } else if (wrong) {
        ++r.false_negatives;
      }
    }
  }
  r.precision = detail::ratio(r.true_positives, r.true_positives + r.false_positives);
  r.recall = detail::ratio(r.true_positives, r.true_positives + r.false_negatives);
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

/// Convenience overload taking selected pixels as references.
inline DetectionReport detection_report(std::span<const PixelRef> selected, std::span<const LabelMap> pseudo,
                                        std::span<const LabelMap> gt, const LabelSpace& space) {
  std::vector<std::vector<bool>> masks;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < pseudo.size(); ++i) {
    masks.emplace_back(pseudo[i].data.size(), false);
    index[pseudo[i].image_id] = i;
  }
  for (const auto& px : selected) {
    auto it = index.find(px.image_id);
    if (it == index.end()) throw Error(Errc::ImageMismatch, "selected pixel in unknown image " + px.image_id);
    const auto& lm = pseudo[it->second];
    if (px.x >= lm.width || px.y >= lm.height) throw Error(Errc::OutOfBounds, "selected pixel outside image");
    masks[it->second][std::size_t{px.y} * lm.width + px.x] = true;
  }
  return detection_report(std::span<const std::vector<bool>>(masks), pseudo, gt, space);
}

struct IoUReport {
  std::vector<std::optional<double>> per_class_iou;  // nullopt: class absent from both maps
  double mean_iou = 0.0;
  double pixel_accuracy = 0.0;
  std::int64_t pixels = 0;
};

/// Confusion-matrix IoU accumulated over all image pairs. The mean runs over
/// classes present in either map.
inline IoUReport iou_report(std::span<const LabelMap> pred, std::span<const LabelMap> gt, const LabelSpace& space) {
  if (pred.size() != gt.size()) throw Error(Errc::ImageMismatch, "pred and gt cover different image counts");
  const std::size_t C = space.num_classes();
  std::vector<std::int64_t> inter(C, 0), pred_n(C, 0), gt_n(C, 0);
  std::int64_t agree = 0, total = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    detail::require_aligned(pred[i], gt[i]);
    for (std::size_t p = 0; p < pred[i].data.size(); ++p) {
      const ClassId a = pred[i].data[p], b = gt[i].data[p];
      if (space.is_ignore(a) || space.is_ignore(b)) continue;
      if (a >= C || b >= C) throw Error(Errc::InvalidLabel, "label outside class range in " + pred[i].image_id);
      ++total;
      ++pred_n[a];
      ++gt_n[b];
      if (a == b) {
        ++inter[a];
        ++agree;
      }
    }
  }
  IoUReport r;
  r.pixels = total;
  r.per_class_iou.resize(C);
  double sum = 0.0;
  int present = 0;
  for (std::size_t c = 0; c < C; ++c) {
    const std::int64_t uni = pred_n[c] + gt_n[c] - inter[c];
    if (uni == 0) continue;
    r.per_class_iou[c] = static_cast<double>(inter[c]) / static_cast<double>(uni);
    sum += *r.per_class_iou[c];
    ++present;
  }
  r.mean_iou = present ? sum / present : 0.0;
  r.pixel_accuracy = detail::ratio(agree, total);
  return r;
}

inline IoUReport iou_report(const LabelMap& pred, const LabelMap& gt, const LabelSpace& space) {
  return iou_report(std::span<const LabelMap>(&pred, 1), std::span<const LabelMap>(&gt, 1), space);
}

inline std::map<ClassId, std::int64_t> corrected_class_histogram(std::span<const QueryRecord> log) {
  std::map<ClassId, std::int64_t> h;
  for (const auto& r : log)
    if (r.verdict == Verdict::Corrected && r.corrected_label) ++h[*r.corrected_label];
  return h;
}

/// One row of the per-round metrics report.
struct RoundMetrics {
  int round = 0;
  BudgetLedger ledger;
  std::optional<DetectionReport> detection;
  std::optional<IoUReport> data;
  std::map<ClassId, std::int64_t> corrected_histogram;
};

inline nlohmann::json round_metrics_to_json(const RoundMetrics& m) {
  nlohmann::json j;
  j["round"] = m.round;
  j["clicks"] = m.ledger.clicks_spent;
  j["bits"] = m.ledger.bits_spent;
  if (m.detection) {
    j["precision"] = m.detection->precision;
    j["recall"] = m.detection->recall;
    j["f1"] = m.detection->f1;
  } else {
    j["precision"] = j["recall"] = j["f1"] = nullptr;
  }
  if (m.data) {
    j["data_accuracy"] = m.data->pixel_accuracy;
    j["data_miou"] = m.data->mean_iou;
    nlohmann::json per = nlohmann::json::array();
    for (const auto& v : m.data->per_class_iou) per.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
    j["per_class_iou"] = per;
  } else {
    j["data_accuracy"] = j["data_miou"] = j["per_class_iou"] = nullptr;
  }
  nlohmann::json hist = nlohmann::json::object();
  for (auto [c, n] : m.corrected_histogram) hist[std::to_string(c)] = n;
  j["corrected_histogram"] = hist;
  return j;
}

}  // namespace alc
