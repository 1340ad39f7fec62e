#pragma once

// Diversified pixel pool: one representative pixel per superpixel.
//
// For a segment s the model's per-pixel argmax labels vote for a dominant
// label; s' is the set of pixels agreeing with it. The representative is the
// pixel of s whose probability row has the highest cosine similarity to the
// mean row of s'.

#include <cstdint>
#include <set>
#include <span>
#include <vector>

#include "alc/core.hpp"

namespace alc {

struct PoolEntry {
  PixelRef pixel;
  SegmentId segment_id = 0;
  ClassId dominant_label = 0;
  std::size_t subset_size = 0;
  std::vector<double> mean_prediction;
  std::size_t image_index = 0;
  Superpixel segment;  // eligible (non-ignore) pixels of the segment
  bool representative_in_subset = false;

  SegmentKey key() const { return {pixel.image_id, segment_id}; }
};

inline void require_non_empty(const Superpixel& s) {
  if (s.empty())
    throw Error(Errc::EmptySegment, "segment " + std::to_string(s.segment_id) + " of " + s.image_id + " is empty");
}

inline ClassId dominant_label(const Superpixel& segment, const ProbMap& probs) {
  require_non_empty(segment);
  std::vector<std::size_t> votes(probs.num_classes, 0);
  for (auto p : segment.pixels) ++votes[argmax_row(probs.row(p))];
  std::size_t best = 0;
  for (std::size_t c = 1; c < votes.size(); ++c)
    if (votes[c] > votes[best]) best = c;
  return static_cast<ClassId>(best);
}

/// s' as a view: the pixels of `segment` whose estimated label is dominant.
inline Superpixel dominant_subset(const Superpixel& segment, const ProbMap& probs) {
  const ClassId dom = dominant_label(segment, probs);
  Superpixel sub{segment.image_id, segment.segment_id, segment.width, {}};
  for (auto p : segment.pixels)
    if (argmax_row(probs.row(p)) == dom) sub.pixels.push_back(p);
  return sub;
}

inline std::vector<double> mean_prediction(const Superpixel& subset, const ProbMap& probs) {
  if (subset.empty()) throw Error(Errc::EmptySubset, "mean of an empty pixel set");
  std::vector<double> mean(probs.num_classes, 0.0);
  for (auto p : subset.pixels) {
    auto row = probs.row(p);
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += row[c];
  }
  const double n = static_cast<double>(subset.size());
  for (auto& m : mean) m /= n;
  return mean;
}

/// Ties on cosine similarity go to the earliest pixel in row-major order.
inline PoolEntry representative_pixel(const Superpixel& segment, const ProbMap& probs) {
  require_non_empty(segment);
  const Superpixel sub = dominant_subset(segment, probs);
  PoolEntry e;
  e.segment_id = segment.segment_id;
  e.dominant_label = dominant_label(segment, probs);
  e.subset_size = sub.size();
  e.mean_prediction = mean_prediction(sub, probs);

  std::size_t best = 0;
  double best_cos = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < segment.size(); ++i) {
    const double c = cosine(probs.row(segment.pixels[i]), std::span<const double>(e.mean_prediction));
    if (c > best_cos) {
      best_cos = c;
      best = i;
    }
  }
  e.pixel = segment.ref(best);
  e.representative_in_subset = argmax_row(probs.row(segment.pixels[best])) == e.dominant_label;
  e.segment = segment;
  return e;
}

/// Segment pixels that are not ignore-labelled in `labels`.
inline Superpixel eligible_pixels(const Superpixel& segment, const LabelMap& labels, const LabelSpace& space) {
  if (!space.ignore_id) return segment;
  Superpixel out{segment.image_id, segment.segment_id, segment.width, {}};
  for (auto p : segment.pixels)
    if (!space.is_ignore(labels.data[p])) out.pixels.push_back(p);
  return out;
}

/// One entry per eligible superpixel, ordered by (image_id, segment_id).
/// Segments in `corrected` and segments made only of ignore pixels are
/// skipped. `probs` must be aligned with `ds.images`.
inline std::vector<PoolEntry> build_pool(const Dataset& ds, std::span<const ProbMap> probs,
                                         const std::set<SegmentKey>& corrected) {
  if (probs.size() != ds.images.size())
    throw Error(Errc::MissingProbMap, "have " + std::to_string(probs.size()) + " prob maps for " +
                                          std::to_string(ds.images.size()) + " images");
  std::vector<PoolEntry> pool;
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    const auto& im = ds.images[i];
    if (probs[i].image_id != im.image_id || probs[i].width != im.width || probs[i].height != im.height)
      throw Error(Errc::MissingProbMap, "no prob map aligned with image " + im.image_id);
    for (const auto& [id, pixels] : im.partition.segments()) {
      if (corrected.contains(SegmentKey{im.image_id, id})) continue;
      Superpixel seg = eligible_pixels(Superpixel{im.image_id, id, im.width, pixels}, im.pseudo, ds.labels);
      if (seg.empty()) continue;
      PoolEntry e = representative_pixel(seg, probs[i]);
      e.image_index = i;
      pool.push_back(std::move(e));
    }
  }
  return pool;
}

}  // namespace alc
