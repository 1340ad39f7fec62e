#pragma once

// Acquisition scores over the diversified pool and top-B batch selection.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alc/core.hpp"
#include "alc/pool.hpp"
#include "alc/rng.hpp"

namespace alc {

struct AcquisitionKind {
  enum Kind { CIL, LCIL, SIM, Entropy, BvSB, Random };
  Kind kind = SIM;
  std::uint64_t seed = 0;  // Random only

  friend bool operator==(const AcquisitionKind&, const AcquisitionKind&) = default;
};

inline std::string acquisition_name(const AcquisitionKind& k) {
  switch (k.kind) {
    case AcquisitionKind::CIL: return "cil";
    case AcquisitionKind::LCIL: return "lcil";
    case AcquisitionKind::SIM: return "sim";
    case AcquisitionKind::Entropy: return "entropy";
    case AcquisitionKind::BvSB: return "bvsb";
    case AcquisitionKind::Random: return "random";
  }
  return "?";
}

/// Accepts "sim", "lcil", "cil", "entropy", "bvsb", "random" (case-insensitive).
inline std::optional<AcquisitionKind> parse_acquisition(std::string_view name, std::uint64_t seed = 0) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "sim") return AcquisitionKind{AcquisitionKind::SIM, 0};
  if (s == "lcil") return AcquisitionKind{AcquisitionKind::LCIL, 0};
  if (s == "cil") return AcquisitionKind{AcquisitionKind::CIL, 0};
  if (s == "entropy") return AcquisitionKind{AcquisitionKind::Entropy, 0};
  if (s == "bvsb") return AcquisitionKind{AcquisitionKind::BvSB, 0};
  if (s == "random") return AcquisitionKind{AcquisitionKind::Random, seed};
  return std::nullopt;
}

/// Confidence-in-label score: 1 - f(y; x) for the pixel's working label y.
inline double cil(std::span<const float> prob_row, ClassId given_label, const LabelSpace& space) {
  if (space.is_ignore(given_label)) throw Error(Errc::IgnoreLabel, "CIL of an ignore-labelled pixel");
  if (given_label >= prob_row.size()) throw Error(Errc::InvalidLabel, "label outside the probability row");
  return 1.0 - double{prob_row[given_label]};
}

inline double lcil(const Superpixel& segment, const ProbMap& probs, const LabelMap& labels, const LabelSpace& space) {
  require_non_empty(segment);
  double sum = 0.0;
  for (auto p : segment.pixels) sum += cil(probs.row(p), labels.data[p], space);
  return sum / static_cast<double>(segment.size());
}

/// Look-ahead score: CIL of every segment pixel weighted by its cosine
/// similarity to the representative pixel.
inline double sim(const PoolEntry& entry, const Superpixel& segment, const ProbMap& probs, const LabelMap& labels,
                  const LabelSpace& space) {
  require_non_empty(segment);
  const std::size_t rep = std::size_t{entry.pixel.y} * probs.width + entry.pixel.x;
  const auto rep_row = probs.row(rep);
  double sum = 0.0;
  for (auto p : segment.pixels) sum += cosine(rep_row, probs.row(p)) * cil(probs.row(p), labels.data[p], space);
  return sum;
}

/// Shannon entropy in bits, 0 log 0 := 0.
inline double entropy_score(std::span<const float> prob_row) {
  double h = 0.0;
  for (float p : prob_row)
    if (p > 0.0f) h -= double{p} * std::log2(double{p});
  return h;
}

/// 1 - (top1 - top2); larger means less decided.
inline double bvsb_score(std::span<const float> prob_row) {
  double first = -1.0, second = -1.0;
  for (float v : prob_row) {
    const double p = v;
    if (p > first) {
      second = first;
      first = p;
    } else if (p > second) {
      second = p;
    }
  }
  if (second < 0.0) second = 0.0;
  return 1.0 - (first - second);
}

namespace detail {

template <typename F>
double segment_mean(const Superpixel& segment, const ProbMap& probs, F&& per_row) {
  require_non_empty(segment);
  double sum = 0.0;
  for (auto p : segment.pixels) sum += per_row(probs.row(p));
  return sum / static_cast<double>(segment.size());
}

/// Uniform [0,1) draw keyed by (seed, round, segment) so the random baseline
/// does not depend on pool order.
inline double keyed_uniform(std::uint64_t seed, int round, const SegmentKey& key) {
  std::uint64_t h = mix_seed(seed, static_cast<std::uint64_t>(round));
  h = mix_seed(h, fnv1a(key.image_id));
  h = mix_seed(h, key.segment_id);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace detail

/// Scores every pool entry. `probs` and `labels` are aligned with the
/// dataset images the pool was built from.
inline std::vector<double> score_pool(const std::vector<PoolEntry>& pool, const AcquisitionKind& kind,
                                      std::span<const ProbMap> probs, std::span<const LabelMap> labels,
                                      const LabelSpace& space, int round = 0) {
  std::vector<double> scores(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& e = pool[i];
    const auto& pm = probs[e.image_index];
    const auto& lm = labels[e.image_index];
    switch (kind.kind) {
      case AcquisitionKind::CIL: {
        const std::size_t rep = std::size_t{e.pixel.y} * pm.width + e.pixel.x;
        scores[i] = cil(pm.row(rep), lm.data[rep], space);
        break;
      }
      case AcquisitionKind::LCIL: scores[i] = lcil(e.segment, pm, lm, space); break;
      case AcquisitionKind::SIM: scores[i] = sim(e, e.segment, pm, lm, space); break;
      case AcquisitionKind::Entropy:
        scores[i] = detail::segment_mean(e.segment, pm, [](auto r) { return entropy_score(r); });
        break;
      case AcquisitionKind::BvSB:
        scores[i] = detail::segment_mean(e.segment, pm, [](auto r) { return bvsb_score(r); });
        break;
      case AcquisitionKind::Random: scores[i] = detail::keyed_uniform(kind.seed, round, e.key()); break;
    }
  }
  return scores;
}

/// Indices of the top-min(B, |pool|) entries by descending score; equal
/// scores are ordered by (image_id, segment_id) ascending.
inline std::vector<std::size_t> select_batch(const std::vector<PoolEntry>& pool, std::span<const double> scores,
                                             std::size_t batch_size) {
  if (batch_size < 1) throw Error(Errc::InvalidArgument, "batch size must be >= 1");
  if (pool.empty()) throw Error(Errc::EmptyPool, "nothing left to select");
  if (scores.size() != pool.size()) throw Error(Errc::InvalidArgument, "scores not aligned with pool");
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto before = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    if (pool[a].pixel.image_id != pool[b].pixel.image_id) return pool[a].pixel.image_id < pool[b].pixel.image_id;
    if (pool[a].segment_id != pool[b].segment_id) return pool[a].segment_id < pool[b].segment_id;
    return a < b;
  };
  const std::size_t k = std::min(batch_size, pool.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), before);
  order.resize(k);
  return order;
}

inline std::vector<std::size_t> select_batch(const std::vector<PoolEntry>& pool, const AcquisitionKind& kind,
                                             std::size_t batch_size, std::span<const ProbMap> probs,
                                             std::span<const LabelMap> labels, const LabelSpace& space,
                                             int round = 0) {
  if (pool.empty()) throw Error(Errc::EmptyPool, "nothing left to select");
  const auto scores = score_pool(pool, kind, probs, labels, space, round);
  return select_batch(pool, scores, batch_size);
}

}  // namespace alc
