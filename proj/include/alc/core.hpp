#pragma once

// Domain types shared across the correction pipeline.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "alc/error.hpp"
#include "alc/tensor_io.hpp"

namespace alc {

using ClassId = std::uint16_t;
using SegmentId = std::uint32_t;

/// Superpixel-map value marking a pixel that no ingested segment covers.
inline constexpr SegmentId kUncovered = std::numeric_limits<SegmentId>::max();

struct PixelRef {
  std::string image_id;
  std::uint32_t x = 0;
  std::uint32_t y = 0;

  friend auto operator<=>(const PixelRef&, const PixelRef&) = default;
};

/// Class vocabulary plus the optional ignore label.
struct LabelSpace {
  std::vector<std::string> class_names;
  std::optional<ClassId> ignore_id;

  std::size_t num_classes() const noexcept { return class_names.size(); }
  bool is_ignore(ClassId c) const noexcept { return ignore_id && c == *ignore_id; }
  bool is_class(ClassId c) const noexcept { return c < class_names.size() && !is_ignore(c); }
};

enum class LabelRole { GroundTruth, Pseudo, Corrected };

struct LabelMap {
  std::string image_id;
  LabelRole role = LabelRole::Pseudo;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<ClassId> data;  // row-major

  ClassId at(std::uint32_t x, std::uint32_t y) const { return data[std::size_t{y} * width + x]; }

  DenseTensor to_tensor() const { return DenseTensor::from_values<std::uint16_t>({height, width}, data); }

  static LabelMap from_tensor(const DenseTensor& t, std::string image_id, LabelRole role) {
    if (t.dims().size() != 2) throw Error(Errc::DimMismatch, "label map must be 2-D");
    LabelMap m{std::move(image_id), role, t.dims()[1], t.dims()[0], {}};
    const auto v = t.integer_values();
    m.data.reserve(v.size());
    for (auto x : v) {
      if (x > std::numeric_limits<ClassId>::max()) throw Error(Errc::InvalidLabel, "label id exceeds 65535");
      m.data.push_back(static_cast<ClassId>(x));
    }
    return m;
  }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

struct ProbMap {
  std::string image_id;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t num_classes = 0;
  std::vector<float> data;  // [H, W, C]

  std::span<const float> row(std::size_t pixel) const {
    return std::span<const float>(data).subspan(pixel * num_classes, num_classes);
  }
  std::span<float> row(std::size_t pixel) { return std::span<float>(data).subspan(pixel * num_classes, num_classes); }

  DenseTensor to_tensor() const { return DenseTensor::from_values<float>({height, width, num_classes}, data); }

  static ProbMap from_tensor(const DenseTensor& t, std::string image_id) {
    if (t.dims().size() != 3) throw Error(Errc::DimMismatch, "prob map must be 3-D [H, W, C]");
    return ProbMap{std::move(image_id), t.dims()[1], t.dims()[0], t.dims()[2], t.values<float>()};
  }

  friend bool operator==(const ProbMap&, const ProbMap&) = default;
};

/// Checks nonnegativity and the 1e-5 row-sum rule; returns a description of
/// the first offending row, if any.
inline std::optional<std::string> check_prob_rows(const ProbMap& p) {
  for (std::size_t px = 0; px < std::size_t{p.width} * p.height; ++px) {
    double sum = 0.0;
    for (float v : p.row(px)) {
      if (!(v >= 0.0f) || !std::isfinite(v))
        return "pixel " + std::to_string(px) + " has a negative or non-finite probability";
      sum += v;
    }
    if (std::abs(sum - 1.0) > kProbRowTolerance)
      return "pixel " + std::to_string(px) + " row sum " + detail::fmt_real(sum) + " out of tolerance";
  }
  return std::nullopt;
}

/// Index of the largest entry; ties go to the lowest class id.
inline ClassId argmax_row(std::span<const float> row) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < row.size(); ++c)
    if (row[c] > row[best]) best = c;
  return static_cast<ClassId>(best);
}

inline ClassId estimated_label(const ProbMap& probs, const PixelRef& pixel) {
  if (pixel.x >= probs.width || pixel.y >= probs.height)
    throw Error(Errc::OutOfBounds, "pixel (" + std::to_string(pixel.x) + "," + std::to_string(pixel.y) +
                                       ") outside " + std::to_string(probs.width) + "x" +
                                       std::to_string(probs.height));
  return argmax_row(probs.row(std::size_t{pixel.y} * probs.width + pixel.x));
}

inline double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += double{a[i]} * double{b[i]};
  return s;
}

inline double cosine(std::span<const float> a, std::span<const double> b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += double{a[i]} * b[i];
    aa += double{a[i]} * a[i];
    bb += b[i] * b[i];
  }
  if (aa <= 0.0 || bb <= 0.0) throw Error(Errc::DegenerateVector, "cosine of a zero-norm vector");
  return std::min(1.0, ab / std::sqrt(aa * bb));
}

inline double cosine(std::span<const float> a, std::span<const float> b) {
  const double aa = dot(a, a), bb = dot(b, b);
  if (aa <= 0.0 || bb <= 0.0) throw Error(Errc::DegenerateVector, "cosine of a zero-norm vector");
  // sqrt(x * x) == x exactly, so identical rows score exactly 1.
  return std::min(1.0, dot(a, b) / std::sqrt(aa * bb));
}

// ---------------------------------------------------------------------------
// Superpixels

/// One segment: pixels are linear indices (y * width + x) in row-major order.
struct Superpixel {
  std::string image_id;
  SegmentId segment_id = 0;
  std::uint32_t width = 0;
  std::vector<std::uint32_t> pixels;

  PixelRef ref(std::size_t i) const { return {image_id, pixels[i] % width, pixels[i] / width}; }
  std::size_t size() const noexcept { return pixels.size(); }
  bool empty() const noexcept { return pixels.empty(); }
};

/// How pixels outside every ingested segment are pooled.
enum class ResidualPolicy { Components, Single, Exclude };

inline std::optional<ResidualPolicy> parse_residual_policy(std::string_view s) {
  if (s == "components") return ResidualPolicy::Components;
  if (s == "single") return ResidualPolicy::Single;
  if (s == "exclude") return ResidualPolicy::Exclude;
  return std::nullopt;
}

inline const char* residual_policy_name(ResidualPolicy p) {
  switch (p) {
    case ResidualPolicy::Components: return "components";
    case ResidualPolicy::Single: return "single";
    case ResidualPolicy::Exclude: return "exclude";
  }
  return "?";
}

class SuperpixelPartition {
 public:
  SuperpixelPartition() = default;

  /// Builds the segment index. Uncovered pixels (kUncovered) are grouped
  /// into residual segments numbered after the largest ingested id.
  SuperpixelPartition(std::string image_id, std::uint32_t width, std::uint32_t height, std::vector<SegmentId> ids,
                      ResidualPolicy residual = ResidualPolicy::Components)
      : image_id_(std::move(image_id)), width_(width), height_(height), ids_(std::move(ids)) {
    if (ids_.size() != std::size_t{width_} * height_)
      throw Error(Errc::DimMismatch, "superpixel map size does not match width x height");
    SegmentId max_id = 0;
    bool any_uncovered = false;
    for (auto id : ids_) {
      if (id == kUncovered) any_uncovered = true;
      else max_id = std::max(max_id, id);
    }
    if (any_uncovered) assign_residuals(residual, max_id);
    for (std::uint32_t i = 0; i < ids_.size(); ++i)
      if (ids_[i] != kUncovered) segments_[ids_[i]].push_back(i);
  }

  static SuperpixelPartition from_tensor(const DenseTensor& t, std::string image_id,
                                         ResidualPolicy residual = ResidualPolicy::Components) {
    if (t.dims().size() != 2) throw Error(Errc::DimMismatch, "superpixel map must be 2-D");
    const auto v = t.integer_values();
    std::vector<SegmentId> ids(v.begin(), v.end());
    if (t.dtype() == DType::U16)
      for (auto& id : ids)
        if (id == 0xFFFFu) id = kUncovered;
    return SuperpixelPartition(std::move(image_id), t.dims()[1], t.dims()[0], std::move(ids), residual);
  }

  const std::string& image_id() const noexcept { return image_id_; }
  std::uint32_t width() const noexcept { return width_; }
  std::uint32_t height() const noexcept { return height_; }
  /// Segment id per pixel after residual assignment (kUncovered if excluded).
  const std::vector<SegmentId>& ids() const noexcept { return ids_; }
  const std::map<SegmentId, std::vector<std::uint32_t>>& segments() const noexcept { return segments_; }

  Superpixel segment(SegmentId id) const {
    auto it = segments_.find(id);
    if (it == segments_.end()) throw Error(Errc::EmptySegment, "no segment " + std::to_string(id));
    return Superpixel{image_id_, id, width_, it->second};
  }

 private:
  void assign_residuals(ResidualPolicy policy, SegmentId max_id) {
    if (policy == ResidualPolicy::Exclude) return;
    SegmentId next = max_id + 1;
    if (policy == ResidualPolicy::Single) {
      for (auto& id : ids_)
        if (id == kUncovered) id = next;
      return;
    }
    // 4-connected components of the uncovered mask, numbered in row-major
    // discovery order.
    constexpr SegmentId kPending = kUncovered;
    std::vector<bool> done(ids_.size(), false);
    for (std::uint32_t start = 0; start < ids_.size(); ++start) {
      if (ids_[start] != kPending || done[start]) continue;
      const SegmentId label = next++;
      std::queue<std::uint32_t> q;
      q.push(start);
      done[start] = true;
      while (!q.empty()) {
        const auto p = q.front();
        q.pop();
        ids_[p] = label;
        const std::uint32_t x = p % width_, y = p / width_;
        auto visit = [&](std::uint32_t n) {
          if (!done[n] && ids_[n] == kPending) {
            done[n] = true;
            q.push(n);
          }
        };
        if (x > 0) visit(p - 1);
        if (x + 1 < width_) visit(p + 1);
        if (y > 0) visit(p - width_);
        if (y + 1 < height_) visit(p + width_);
      }
    }
  }

  std::string image_id_;
  std::uint32_t width_ = 0;
  std::uint32_t height_ = 0;
  std::vector<SegmentId> ids_;
  std::map<SegmentId, std::vector<std::uint32_t>> segments_;
};

// ---------------------------------------------------------------------------
// Budget and round bookkeeping

struct BudgetLedger {
  std::int64_t clicks_spent = 0;
  double bits_spent = 0.0;
  std::int64_t clicks_limit = 0;
  std::int64_t confirmations = 0;
  std::int64_t corrections = 0;

  /// Running empirical confirmation rate; 0 before any query.
  double empirical_p() const noexcept {
    return clicks_spent ? static_cast<double>(confirmations) / static_cast<double>(clicks_spent) : 0.0;
  }

  friend bool operator==(const BudgetLedger&, const BudgetLedger&) = default;
};

inline void to_json(nlohmann::json& j, const BudgetLedger& l) {
  j = {{"clicks", l.clicks_spent},
       {"bits", l.bits_spent},
       {"clicks_limit", l.clicks_limit},
       {"confirmations", l.confirmations},
       {"corrections", l.corrections}};
}

inline void from_json(const nlohmann::json& j, BudgetLedger& l) {
  l.clicks_spent = j.at("clicks").get<std::int64_t>();
  l.bits_spent = j.at("bits").get<double>();
  l.clicks_limit = j.at("clicks_limit").get<std::int64_t>();
  l.confirmations = j.at("confirmations").get<std::int64_t>();
  l.corrections = j.at("corrections").get<std::int64_t>();
}

/// Identifies a superpixel across the dataset; ordered by (image_id, segment_id).
struct SegmentKey {
  std::string image_id;
  SegmentId segment_id = 0;

  friend auto operator<=>(const SegmentKey&, const SegmentKey&) = default;
};

struct PoolRef {
  PixelRef pixel;
  SegmentId segment_id = 0;

  friend bool operator==(const PoolRef&, const PoolRef&) = default;
};

/// Snapshot of one round, written as the checkpoint after the round closes.
struct RoundState {
  int round = 0;
  std::vector<PoolRef> pool;
  std::vector<float> scores;  // aligned with pool
  std::vector<PoolRef> batch;
  BudgetLedger ledger;
  std::set<SegmentKey> corrected;
  std::map<std::string, std::string> label_paths;  // image_id -> corrected LabelMap file

  friend bool operator==(const RoundState&, const RoundState&) = default;
};

inline nlohmann::json pool_ref_json(const PoolRef& r) {
  return {{"image_id", r.pixel.image_id}, {"x", r.pixel.x}, {"y", r.pixel.y}, {"segment_id", r.segment_id}};
}

inline PoolRef pool_ref_from_json(const nlohmann::json& j) {
  return {{j.at("image_id").get<std::string>(), j.at("x").get<std::uint32_t>(), j.at("y").get<std::uint32_t>()},
          j.at("segment_id").get<SegmentId>()};
}

inline nlohmann::json round_state_to_json(const RoundState& s) {
  nlohmann::json j;
  j["round"] = s.round;
  j["pool"] = nlohmann::json::array();
  for (const auto& r : s.pool) j["pool"].push_back(pool_ref_json(r));
  j["scores"] = s.scores;
  j["batch"] = nlohmann::json::array();
  for (const auto& r : s.batch) j["batch"].push_back(pool_ref_json(r));
  j["ledger"] = s.ledger;
  j["corrected"] = nlohmann::json::array();
  for (const auto& k : s.corrected) j["corrected"].push_back({k.image_id, k.segment_id});
  j["labels"] = s.label_paths;
  return j;
}

inline RoundState round_state_from_json(const nlohmann::json& j) {
  RoundState s;
  s.round = j.at("round").get<int>();
  for (const auto& r : j.at("pool")) s.pool.push_back(pool_ref_from_json(r));
  s.scores = j.at("scores").get<std::vector<float>>();
  for (const auto& r : j.at("batch")) s.batch.push_back(pool_ref_from_json(r));
  s.ledger = j.at("ledger").get<BudgetLedger>();
  for (const auto& k : j.at("corrected")) s.corrected.insert({k.at(0).get<std::string>(), k.at(1).get<SegmentId>()});
  s.label_paths = j.at("labels").get<std::map<std::string, std::string>>();
  return s;
}

// ---------------------------------------------------------------------------
// Loaded dataset

struct ImageData {
  std::string image_id;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> rgb;  // [H, W, 3]
  LabelMap pseudo;
  std::optional<LabelMap> gt;
  SuperpixelPartition partition;
  std::optional<ProbMap> initial_probs;

  std::size_t pixel_count() const noexcept { return std::size_t{width} * height; }
};

struct Dataset {
  LabelSpace labels;
  std::vector<ImageData> images;  // sorted by image_id
  DatasetManifest manifest;

  std::size_t index_of(const std::string& image_id) const {
    auto it = std::lower_bound(images.begin(), images.end(), image_id,
                               [](const ImageData& im, const std::string& id) { return im.image_id < id; });
    if (it == images.end() || it->image_id != image_id)
      throw Error(Errc::ImageMismatch, "unknown image_id " + image_id);
    return static_cast<std::size_t>(it - images.begin());
  }
};

inline LabelSpace label_space_of(const DatasetManifest& m) {
  LabelSpace ls{m.class_names, std::nullopt};
  if (m.ignore_id) {
    if (*m.ignore_id > std::numeric_limits<ClassId>::max())
      throw Error(Errc::InvalidLabel, "ignore_id exceeds 65535");
    ls.ignore_id = static_cast<ClassId>(*m.ignore_id);
  }
  return ls;
}

/// Loads every tensor a manifest references. Callers should run
/// validate_manifest first; this only checks what it needs to stay safe.
inline Dataset load_dataset(const DatasetManifest& m, ResidualPolicy residual = ResidualPolicy::Components) {
  Dataset ds;
  ds.manifest = m;
  ds.labels = label_space_of(m);
  if (ds.labels.num_classes() < 2) throw Error(Errc::InvalidArgument, "need at least 2 classes");
  for (const auto& e : m.images) {
    ImageData im;
    im.image_id = e.image_id;
    im.width = e.width;
    im.height = e.height;
    const auto img = read_tensor(m.resolve(e.image_path));
    if (img.dims() != std::vector<std::uint32_t>{e.height, e.width, 3})
      throw Error(Errc::DimMismatch, e.image_id + ": image dims do not match manifest");
    im.rgb = img.values<std::uint8_t>();
    auto check_plane = [&](const auto& map, const char* what) {
      if (map.width != e.width || map.height != e.height)
        throw Error(Errc::DimMismatch, e.image_id + ": " + what + " dims do not match manifest");
    };
    im.pseudo = LabelMap::from_tensor(read_tensor(m.resolve(e.pseudo_label_path)), e.image_id, LabelRole::Pseudo);
    check_plane(im.pseudo, "pseudo label");
    if (e.gt_label_path) {
      im.gt = LabelMap::from_tensor(read_tensor(m.resolve(*e.gt_label_path)), e.image_id, LabelRole::GroundTruth);
      check_plane(*im.gt, "gt label");
    }
    im.partition = SuperpixelPartition::from_tensor(read_tensor(m.resolve(e.superpixel_path)), e.image_id, residual);
    if (im.partition.width() != e.width || im.partition.height() != e.height)
      throw Error(Errc::DimMismatch, e.image_id + ": superpixel dims do not match manifest");
    if (e.prob_path) {
      im.initial_probs = ProbMap::from_tensor(read_tensor(m.resolve(*e.prob_path)), e.image_id);
      check_plane(*im.initial_probs, "prob");
      if (im.initial_probs->num_classes != ds.labels.num_classes())
        throw Error(Errc::DimMismatch, e.image_id + ": prob map class count does not match class_names");
    }
    ds.images.push_back(std::move(im));
  }
  std::sort(ds.images.begin(), ds.images.end(),
            [](const ImageData& a, const ImageData& b) { return a.image_id < b.image_id; });
  for (std::size_t i = 1; i < ds.images.size(); ++i)
    if (ds.images[i].image_id == ds.images[i - 1].image_id)
      throw Error(Errc::InvalidArgument, "duplicate image_id " + ds.images[i].image_id);
  return ds;
}

}  // namespace alc
