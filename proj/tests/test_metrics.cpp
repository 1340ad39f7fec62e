#include <sstream>

#include <gtest/gtest.h>

#include "alc/metrics.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace alc;
namespace ts = testing_support;

namespace {

LabelMap lm(std::vector<ClassId> v, std::string id = "img") {
  const auto w = static_cast<std::uint32_t>(v.size());
  return LabelMap{std::move(id), LabelRole::Pseudo, w, 1, std::move(v)};
}

QueryRecord record(Verdict v, std::optional<ClassId> label = std::nullopt) {
  QueryRecord r;
  r.query_id = "q";
  r.verdict = v;
  r.corrected_label = label;
  return r;
}

}  // namespace

TEST(DetectionReport, CountingExample) {
  // 10 pixels; pixels 0..4 mislabelled; select {0, 1, 7, 8}... plus 9.
  std::vector<ClassId> pseudo(10, 0), gt(10, 0);
  for (int p = 0; p < 5; ++p) gt[p] = 1;
  std::vector<std::vector<bool>> sel{std::vector<bool>(10, false)};
  for (int p : {0, 1, 7, 8}) sel[0][p] = true;
  const std::vector<LabelMap> P{lm(pseudo)}, G{lm(gt)};
  const auto r = detection_report(std::span<const std::vector<bool>>(sel), P, G, ts::classes(2));
  EXPECT_EQ(r.selected, 4);
  EXPECT_EQ(r.true_positives, 2);
  EXPECT_EQ(r.false_negatives, 3);
  EXPECT_DOUBLE_EQ(r.precision, 0.5);
  EXPECT_DOUBLE_EQ(r.recall, 0.4);
}

TEST(DetectionReport, ExactSelectionIsPerfect) {
  const std::vector<LabelMap> P{lm({0, 1, 1, 0})}, G{lm({1, 1, 0, 0})};
  const std::vector<PixelRef> sel{{"img", 0, 0}, {"img", 2, 0}};
  const auto r = detection_report(std::span<const PixelRef>(sel), P, G, ts::classes(2));
  EXPECT_EQ(r.precision, 1.0);
  EXPECT_EQ(r.recall, 1.0);
  EXPECT_EQ(r.f1, 1.0);
}

TEST(DetectionReport, EmptySelectionHasZeroPrecision) {
  const std::vector<LabelMap> P{lm({0, 1})}, G{lm({1, 1})};
  std::vector<std::vector<bool>> sel{std::vector<bool>(2, false)};
  const auto r = detection_report(std::span<const std::vector<bool>>(sel), P, G, ts::classes(2));
  EXPECT_EQ(r.precision, 0.0);
  EXPECT_EQ(r.recall, 0.0);
}

TEST(DetectionReport, MisalignedMapsThrow) {
  const std::vector<LabelMap> P{lm({0, 1})}, G{lm({1, 1}, "other")};
  std::vector<std::vector<bool>> sel{std::vector<bool>(2, false)};
  EXPECT_ALC_ERROR(detection_report(std::span<const std::vector<bool>>(sel), P, G, ts::classes(2)),
                   Errc::ImageMismatch);
  const std::vector<LabelMap> G2{lm({1, 1, 1})};
  EXPECT_ALC_ERROR(detection_report(std::span<const std::vector<bool>>(sel), P, G2, ts::classes(2)),
                   Errc::ImageMismatch);
}

TEST(DetectionReport, MatchesSetArithmetic) {
  Rng rng(90);
  for (int iter = 0; iter < 100; ++iter) {
    const std::uint32_t C = 2 + static_cast<std::uint32_t>(rng.below(4));
    auto space = ts::classes(C);
    if (iter % 2) space.ignore_id = static_cast<ClassId>(C - 1);
    const auto P = ts::random_labels(rng, "img", 8, 8, C);
    const auto G = ts::random_labels(rng, "img", 8, 8, C);
    std::vector<std::vector<bool>> sel{std::vector<bool>(64, false)};
    std::set<std::uint32_t> sset;
    for (std::uint32_t p = 0; p < 64; ++p)
      if (rng.bernoulli(0.4)) {
        sel[0][p] = true;
        sset.insert(p);
      }
    const std::vector<LabelMap> Ps{P}, Gs{G};
    const auto r = detection_report(std::span<const std::vector<bool>>(sel), Ps, Gs, space);
    const auto ref = oracle::detection(sset, P, G, space);
    EXPECT_EQ(r.true_positives, ref.tp);
    EXPECT_EQ(r.false_positives, ref.fp);
    EXPECT_EQ(r.false_negatives, ref.fn);
    EXPECT_EQ(r.true_positives + r.false_positives, r.selected);
    if (r.selected) EXPECT_EQ(std::llround(r.precision * r.selected), r.true_positives);
  }
}

TEST(IoUReport, IdentityIsOne) {
  const auto a = lm({0, 1, 2, 2});
  const auto r = iou_report(a, a, ts::classes(4));
  EXPECT_EQ(r.mean_iou, 1.0);
  EXPECT_EQ(r.pixel_accuracy, 1.0);
  EXPECT_FALSE(r.per_class_iou[3]);
}

TEST(IoUReport, DisjointSingleClassMaps) {
  const auto r = iou_report(lm({0, 0, 0}), lm({1, 1, 1}), ts::classes(2));
  EXPECT_EQ(*r.per_class_iou[0], 0.0);
  EXPECT_EQ(*r.per_class_iou[1], 0.0);
  EXPECT_EQ(r.mean_iou, 0.0);
}

TEST(IoUReport, MatchesConfusionMatrixOracle) {
  Rng rng(16);
  for (int iter = 0; iter < 50; ++iter) {
    const auto P = ts::random_labels(rng, "img", 16, 16, 3);
    const auto G = ts::random_labels(rng, "img", 16, 16, 3);
    const auto space = ts::classes(3);
    const auto r = iou_report(P, G, space);
    const auto ref = oracle::iou(P, G, 3, space);
    long double sum = 0;
    int n = 0;
    for (std::size_t c = 0; c < 3; ++c) {
      if (ref[c] < 0) {
        EXPECT_FALSE(r.per_class_iou[c]);
        continue;
      }
      ASSERT_TRUE(r.per_class_iou[c]);
      EXPECT_NEAR(*r.per_class_iou[c], static_cast<double>(ref[c]), 1e-12);
      sum += ref[c];
      ++n;
    }
    EXPECT_NEAR(r.mean_iou, static_cast<double>(sum / n), 1e-12);
  }
}

TEST(IoUProperty, SymmetricPerClass) {
  Rng rng(17);
  for (int iter = 0; iter < 50; ++iter) {
    const auto P = ts::random_labels(rng, "img", 8, 8, 4);
    const auto G = ts::random_labels(rng, "img", 8, 8, 4);
    const auto a = iou_report(P, G, ts::classes(4)), b = iou_report(G, P, ts::classes(4));
    EXPECT_EQ(a.per_class_iou, b.per_class_iou);
    for (const auto& v : a.per_class_iou)
      if (v) {
        EXPECT_GE(*v, 0.0);
        EXPECT_LE(*v, 1.0);
      }
  }
}

TEST(IoUProperty, IgnorePositionsChangeNothing) {
  Rng rng(18);
  auto space = ts::classes(4);
  space.ignore_id = ClassId{3};
  for (int iter = 0; iter < 50; ++iter) {
    auto P = ts::random_labels(rng, "img", 8, 8, 4);
    auto G = ts::random_labels(rng, "img", 8, 8, 4);
    std::vector<std::vector<bool>> sel{std::vector<bool>(64, false)};
    for (std::size_t p = 0; p < 64; ++p) sel[0][p] = rng.bernoulli(0.5);
    const auto before = iou_report(P, G, space);
    const std::vector<LabelMap> P1{P}, G1{G};
    const auto det_before = detection_report(std::span<const std::vector<bool>>(sel), P1, G1, space);
    for (std::size_t p = 0; p < 64; ++p)
      if (G.data[p] == 3) {
        P.data[p] = static_cast<ClassId>(rng.below(4));
        sel[0][p] = !sel[0][p];
      }
    const auto after = iou_report(P, G, space);
    const std::vector<LabelMap> P2{P};
    const auto det_after = detection_report(std::span<const std::vector<bool>>(sel), P2, G1, space);
    EXPECT_EQ(before.per_class_iou, after.per_class_iou);
    EXPECT_EQ(before.mean_iou, after.mean_iou);
    EXPECT_EQ(det_before.true_positives, det_after.true_positives);
    EXPECT_EQ(det_before.selected, det_after.selected);
    EXPECT_EQ(det_before.false_negatives, det_after.false_negatives);
  }
}

TEST(IoUReport, MisalignedThrows) {
  EXPECT_ALC_ERROR(iou_report(lm({0, 1}), lm({0, 1, 1}), ts::classes(2)), Errc::ImageMismatch);
}

TEST(Histogram, Examples) {
  const std::vector<QueryRecord> log{record(Verdict::Corrected, 1), record(Verdict::Corrected, 1),
                                     record(Verdict::Corrected, 2), record(Verdict::Confirmed)};
  EXPECT_EQ(corrected_class_histogram(log), (std::map<ClassId, std::int64_t>{{1, 2}, {2, 1}}));
  const std::vector<QueryRecord> only{record(Verdict::Confirmed), record(Verdict::Confirmed)};
  EXPECT_TRUE(corrected_class_histogram(only).empty());
}

TEST(Histogram, MatchesTally) {
  Rng rng(100);
  std::vector<QueryRecord> log;
  for (int i = 0; i < 100; ++i)
    log.push_back(rng.bernoulli(0.4) ? record(Verdict::Confirmed)
                                     : record(Verdict::Corrected, static_cast<ClassId>(rng.below(20))));
  EXPECT_EQ(corrected_class_histogram(log), oracle::histogram(log));
}

TEST(QueryLog, JsonLinesRoundTrip) {
  std::vector<QueryRecord> log{record(Verdict::Corrected, 3), record(Verdict::Confirmed)};
  log[0].image_id = "img_0001";
  log[0].bit_cost = 2.0;
  std::ostringstream os;
  for (const auto& r : log) os << query_record_to_json(r).dump() << "\n";
  std::istringstream is(os.str());
  EXPECT_EQ(read_query_log(is), log);
  std::istringstream bad("{\"query_id\": 1}\n");
  EXPECT_ALC_ERROR(read_query_log(bad), Errc::ManifestParse);
}

TEST(RoundMetricsJson, FieldsPresent) {
  RoundMetrics m;
  m.round = 2;
  m.ledger.clicks_spent = 5;
  m.data = iou_report(lm({0, 1}), lm({0, 1}), ts::classes(3));
  const auto j = round_metrics_to_json(m);
  for (const char* k : {"round", "clicks", "bits", "precision", "recall", "f1", "data_accuracy", "data_miou",
                        "per_class_iou", "corrected_histogram"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_TRUE(j["precision"].is_null());
  EXPECT_EQ(j["data_miou"], 1.0);
  EXPECT_TRUE(j["per_class_iou"][2].is_null());
}
