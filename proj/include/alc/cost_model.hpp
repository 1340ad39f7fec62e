#pragma once

// Information-theoretic annotation cost of classification vs correction
// queries. A classification query picks one of L classes (log2 L bits). A
// correction query is a yes/no confirmation of the shown label, followed by a
// full classification only when the label was wrong, so with confirmation
// probability p it costs p + (1 - p) log2 L bits on average.

#include <cmath>
#include <string>

#include "alc/core.hpp"
#include "alc/error.hpp"

namespace alc::cost {

struct CostParams {
  int num_classes = 2;
  double pseudo_accuracy = 0.0;
};

inline void check_l(int L) {
  if (L < 2) throw Error(Errc::InvalidL, "L must be >= 2, got " + std::to_string(L));
}

inline void check_p(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::InvalidP, "p must lie in [0, 1]");
}

inline double classification_cost(int L) {
  check_l(L);
  return std::log2(static_cast<double>(L));
}

inline double correction_cost(int L, double p) {
  check_l(L);
  check_p(p);
  return p + (1.0 - p) * std::log2(static_cast<double>(L));
}

inline double correction_cost(const CostParams& c) { return correction_cost(c.num_classes, c.pseudo_accuracy); }

/// 1 - C_cor / C_cls, evaluated in the closed form (1 - 1/log2 L) p.
inline double cost_saving_rate(int L, double p) {
  check_l(L);
  check_p(p);
  return (1.0 - 1.0 / std::log2(static_cast<double>(L))) * p;
}

/// Realized bits for one answered correction query.
inline double answer_bits(bool confirmed, int L) { return confirmed ? 1.0 : classification_cost(L); }

/// Bits spent by the answers folded into a ledger: 1 bit per confirmation,
/// log2 L per correction.
inline double normalized_click_cost(const BudgetLedger& ledger, int L) {
  return static_cast<double>(ledger.confirmations) * 1.0 +
         static_cast<double>(ledger.corrections) * classification_cost(L);
}

}  // namespace alc::cost
