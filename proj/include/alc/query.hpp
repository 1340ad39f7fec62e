#pragma once

// Correction queries, answers and the query-log record format.

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "alc/core.hpp"

namespace alc {

enum class QueryStatus { Pending, Answered };

struct CorrectionQuery {
  std::string query_id;
  int round = 0;
  PixelRef pixel;
  SegmentId segment_id = 0;
  ClassId pseudo_label = 0;  // working label at issue time
  QueryStatus status = QueryStatus::Pending;
};

enum class Verdict { Confirmed, Corrected };

struct QueryAnswer {
  std::string query_id;
  Verdict verdict = Verdict::Confirmed;
  ClassId corrected_label = 0;  // meaningful only for Verdict::Corrected
  std::string annotator_id;
  std::int64_t answered_at = 0;  // unix seconds

  /// The label the answer asserts for the queried pixel.
  ClassId label_for(const CorrectionQuery& q) const {
    return verdict == Verdict::Confirmed ? q.pseudo_label : corrected_label;
  }

  static QueryAnswer confirmed(std::string id) { return {std::move(id), Verdict::Confirmed, 0, {}, 0}; }
  static QueryAnswer corrected(std::string id, ClassId c) { return {std::move(id), Verdict::Corrected, c, {}, 0}; }
};

/// Throws InvalidLabel if the answer breaks the QueryAnswer invariants.
inline void check_answer(const CorrectionQuery& q, const QueryAnswer& a, const LabelSpace& space) {
  if (a.verdict != Verdict::Corrected) return;
  if (!space.is_class(a.corrected_label))
    throw Error(Errc::InvalidLabel, "label " + std::to_string(a.corrected_label) + " is not a class");
  if (a.corrected_label == q.pseudo_label)
    throw Error(Errc::InvalidLabel, "a correction must differ from the pseudo label");
}

/// One line of the JSON-lines query log.
struct QueryRecord {
  std::string query_id;
  int round = 0;
  std::string image_id;
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  SegmentId segment_id = 0;
  ClassId pseudo_label = 0;
  Verdict verdict = Verdict::Confirmed;
  std::optional<ClassId> corrected_label;
  int click_cost = 1;
  double bit_cost = 0.0;

  friend bool operator==(const QueryRecord&, const QueryRecord&) = default;
};

inline nlohmann::json query_record_to_json(const QueryRecord& r) {
  nlohmann::json j{{"query_id", r.query_id},
                   {"round", r.round},
                   {"image_id", r.image_id},
                   {"x", r.x},
                   {"y", r.y},
                   {"segment_id", r.segment_id},
                   {"pseudo_label", r.pseudo_label},
                   {"verdict", r.verdict == Verdict::Confirmed ? "confirmed" : "corrected"}};
  if (r.corrected_label) j["corrected_label"] = *r.corrected_label;
  j["click_cost"] = r.click_cost;
  j["bit_cost"] = r.bit_cost;
  return j;
}

inline QueryRecord query_record_from_json(const nlohmann::json& j) {
  QueryRecord r;
  r.query_id = j.at("query_id").get<std::string>();
  r.round = j.at("round").get<int>();
  r.image_id = j.at("image_id").get<std::string>();
  r.x = j.at("x").get<std::uint32_t>();
  r.y = j.at("y").get<std::uint32_t>();
  r.segment_id = j.at("segment_id").get<SegmentId>();
  r.pseudo_label = j.at("pseudo_label").get<ClassId>();
  const auto v = j.at("verdict").get<std::string>();
  if (v == "confirmed") r.verdict = Verdict::Confirmed;
  else if (v == "corrected") r.verdict = Verdict::Corrected;
  else throw Error(Errc::ManifestParse, "unknown verdict " + v);
  if (j.contains("corrected_label")) r.corrected_label = j["corrected_label"].get<ClassId>();
  r.click_cost = j.at("click_cost").get<int>();
  r.bit_cost = j.at("bit_cost").get<double>();
  return r;
}

inline std::vector<QueryRecord> read_query_log(std::istream& in) {
  std::vector<QueryRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(query_record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ManifestParse, std::string("query log: ") + e.what());
    }
  }
  return out;
}

}  // namespace alc
