#include <cmath>

#include <gtest/gtest.h>

#include "alc/cost_model.hpp"
#include "test_support.hpp"

using namespace alc;
using namespace alc::cost;

// Reference values evaluated with 50-digit arithmetic.
constexpr double kLog2_20 = 4.321928094887362;
constexpr double kLog2_19 = 4.247927513443585;

TEST(ClassificationCost, KnownValues) {
  EXPECT_DOUBLE_EQ(classification_cost(2), 1.0);
  EXPECT_NEAR(classification_cost(20), kLog2_20, 1e-12);
  EXPECT_NEAR(classification_cost(19), kLog2_19, 1e-12);
}

TEST(ClassificationCost, RejectsFewerThanTwoClasses) {
  EXPECT_ALC_ERROR(classification_cost(1), Errc::InvalidL);
  EXPECT_ALC_ERROR(classification_cost(0), Errc::InvalidL);
}

TEST(CorrectionCost, KnownValues) {
  EXPECT_NEAR(correction_cost(20, 0.5), 2.660964047443681, 1e-12);
  EXPECT_NEAR(correction_cost(20, 0.5) / classification_cost(20), 0.6156891065798796, 1e-12);
  for (int L : {2, 3, 20, 256}) {
    EXPECT_DOUBLE_EQ(correction_cost(L, 1.0), 1.0);
    EXPECT_DOUBLE_EQ(correction_cost(L, 0.0), classification_cost(L));
  }
}

TEST(CorrectionCost, RejectsBadArguments) {
  EXPECT_ALC_ERROR(correction_cost(1, 0.5), Errc::InvalidL);
  EXPECT_ALC_ERROR(correction_cost(20, -0.01), Errc::InvalidP);
  EXPECT_ALC_ERROR(correction_cost(20, 1.01), Errc::InvalidP);
  EXPECT_ALC_ERROR(correction_cost(20, std::nan("")), Errc::InvalidP);
}

TEST(CostSavingRate, KnownValues) {
  for (double p : {0.0, 0.3, 1.0}) EXPECT_EQ(cost_saving_rate(2, p), 0.0);
  EXPECT_NEAR(cost_saving_rate(20, 0.27), 0.20752788244686502, 1e-12);
  EXPECT_NEAR(cost_saving_rate(19, 0.5), 0.3822955433166809, 1e-12);
}

TEST(NormalizedClickCost, KnownValues) {
  BudgetLedger l;
  l.confirmations = 10;
  l.clicks_spent = 10;
  EXPECT_DOUBLE_EQ(normalized_click_cost(l, 20), 10.0);
  l = {};
  l.corrections = 10;
  l.clicks_spent = 10;
  EXPECT_NEAR(normalized_click_cost(l, 20), 43.21928094887362, 1e-9);
  l.confirmations = 5;
  l.corrections = 5;
  EXPECT_DOUBLE_EQ(normalized_click_cost(l, 2), 10.0);
}

TEST(AnswerBits, BranchCosts) {
  EXPECT_EQ(answer_bits(true, 20), 1.0);
  EXPECT_NEAR(answer_bits(false, 20), kLog2_20, 1e-12);
  EXPECT_EQ(answer_bits(false, 2), 1.0);
}

TEST(CostProperty, CorrectionNeverExceedsClassification) {
  for (int L = 2; L <= 256; ++L) {
    for (int k = 0; k <= 10; ++k) {
      const double p = k / 10.0;
      const double cor = correction_cost(L, p), cls = classification_cost(L);
      EXPECT_LE(cor, cls + 1e-15);
      const bool equal = p == 0.0 || L == 2;
      if (equal) EXPECT_NEAR(cor, cls, 1e-12);
      else EXPECT_LT(cor, cls);
    }
  }
}

TEST(CostProperty, SavingRateIdentity) {
  Rng rng(5);
  for (int iter = 0; iter < 2000; ++iter) {
    const int L = 2 + static_cast<int>(rng.below(1000));
    const double p = rng.uniform();
    EXPECT_NEAR(cost_saving_rate(L, p), 1.0 - correction_cost(L, p) / classification_cost(L), 1e-12);
  }
}

TEST(CostProperty, SavingRateMonotone) {
  for (int L = 3; L <= 64; ++L)
    for (int k = 0; k < 10; ++k) EXPECT_LT(cost_saving_rate(L, k / 10.0), cost_saving_rate(L, (k + 1) / 10.0));
  for (int k = 1; k <= 10; ++k)
    for (int L = 2; L < 64; ++L) EXPECT_LT(cost_saving_rate(L, k / 10.0), cost_saving_rate(L + 1, k / 10.0));
}

TEST(CostProperty, RealizedCostConvergesToExpectation) {
  const int L = 20, n = 10000;
  for (double p : {0.27, 0.5, 0.9}) {
    Rng rng(mix_seed(17, static_cast<std::uint64_t>(p * 100)));
    BudgetLedger l;
    for (int i = 0; i < n; ++i) {
      ++l.clicks_spent;
      if (rng.bernoulli(p)) ++l.confirmations;
      else ++l.corrections;
    }
    const double mean = normalized_click_cost(l, L) / n;
    const double spread = (classification_cost(L) - 1.0) * std::sqrt(p * (1 - p) / n);
    EXPECT_NEAR(mean, correction_cost(L, p), 3 * spread) << "p=" << p;
  }
}
