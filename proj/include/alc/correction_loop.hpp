#pragma once

// Round orchestration: warm start, then for each round build the pool, select
// a batch, collect answers (simulated oracle or live annotators), expand the
// answered labels over their superpixels and refresh predictions.
//
// Output directory layout (all optional when out_dir is empty):
//
//   run.json                 configuration of the run
//   checkpoint.json          RoundState after the last closed round
//   query_log.jsonl          one QueryRecord per answered query, query_id order
//   metrics.json             array of per-round metrics
//   labels/<id>.alct         current corrected labels, u16 [H, W]
//   selected/<id>.alct       u8 mask of pixels covered by answered queries
//   scores/round_NNN.csv     image_id,segment_id,kind,score,rank
//   pool/round_NNN.csv       image_id,segment_id,x,y,dominant_label,subset_size
//   rounds/round_NNN/        external predictor exchange directory
//   corrected/manifest.json  exported corrected dataset once finished

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "alc/acquisition.hpp"
#include "alc/core.hpp"
#include "alc/cost_model.hpp"
#include "alc/metrics.hpp"
#include "alc/pool.hpp"
#include "alc/predictor.hpp"
#include "alc/query.hpp"
#include "alc/rng.hpp"

namespace alc {

// ---------------------------------------------------------------------------
// Oracle, expansion, ledger

struct OracleConfig {
  double error_rate = 0.0;
  std::uint64_t seed = 0;
};

/// Ground-truth lookup. With probability error_rate the answer is drawn
/// uniformly from the wrong verdicts instead.
inline QueryAnswer simulated_answer(const CorrectionQuery& q, const LabelMap& gt, const OracleConfig& cfg,
                                    const LabelSpace& space) {
  if (gt.image_id != q.pixel.image_id) throw Error(Errc::MissingGroundTruth, "no ground truth for " + q.pixel.image_id);
  if (!(cfg.error_rate >= 0.0 && cfg.error_rate <= 1.0))
    throw Error(Errc::InvalidArgument, "oracle error_rate must lie in [0, 1]");
  const ClassId truth = gt.at(q.pixel.x, q.pixel.y);
  // An ignore pixel in ground truth carries no information; the label stays.
  const bool confirm = space.is_ignore(truth) || truth == q.pseudo_label;

  Rng rng(mix_seed(cfg.seed, fnv1a(q.query_id)));
  if (!rng.bernoulli(cfg.error_rate))
    return confirm ? QueryAnswer::confirmed(q.query_id) : QueryAnswer::corrected(q.query_id, truth);

  // Wrong verdicts: every "corrected(c)" with c != pseudo, minus the true
  // correction, plus "confirmed" when the truth was a correction.
  std::vector<std::optional<ClassId>> wrong;
  if (!confirm) wrong.push_back(std::nullopt);
  for (std::size_t c = 0; c < space.num_classes(); ++c) {
    const auto cls = static_cast<ClassId>(c);
    if (!space.is_class(cls) || cls == q.pseudo_label || (!confirm && cls == truth)) continue;
    wrong.push_back(cls);
  }
  if (wrong.empty()) return confirm ? QueryAnswer::confirmed(q.query_id) : QueryAnswer::corrected(q.query_id, truth);
  const auto pick = wrong[rng.below(wrong.size())];
  return pick ? QueryAnswer::corrected(q.query_id, *pick) : QueryAnswer::confirmed(q.query_id);
}

/// Pixels of `segment` whose probability row has cosine >= epsilon with the
/// row of `rep_pixel` (a linear index). epsilon = 0 selects the whole segment;
/// the representative itself is always included (cos(v, v) = 1).
inline std::vector<std::uint32_t> expansion_region(const Superpixel& segment, const ProbMap& probs,
                                                   std::uint32_t rep_pixel, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw Error(Errc::InvalidArgument, "epsilon must lie in [0, 1]");
  require_non_empty(segment);
  std::vector<std::uint32_t> out;
  if (epsilon == 0.0) return segment.pixels;
  const auto rep = probs.row(rep_pixel);
  for (auto p : segment.pixels)
    if (p == rep_pixel || cosine(rep, probs.row(p)) >= epsilon) out.push_back(p);
  return out;
}

struct Expansion {
  ClassId label = 0;
  std::vector<std::uint32_t> pixels;  // pixels set to `label`
};

/// Label expansion for one answered query. Throws StaleAnswer when the
/// segment was already expanded in this run.
inline Expansion expand_label(const CorrectionQuery& q, const QueryAnswer& a, const Superpixel& segment,
                              const ProbMap& probs, double epsilon, const std::set<SegmentKey>& expanded = {}) {
  if (expanded.contains(SegmentKey{segment.image_id, segment.segment_id}))
    throw Error(Errc::StaleAnswer, "segment " + std::to_string(segment.segment_id) + " of " + segment.image_id +
                                       " was already expanded");
  const std::uint32_t rep = q.pixel.y * segment.width + q.pixel.x;
  return Expansion{a.label_for(q), expansion_region(segment, probs, rep, epsilon)};
}

inline BudgetLedger record_query(BudgetLedger ledger, const QueryAnswer& a, int L) {
  ledger.clicks_spent += 1;
  if (a.verdict == Verdict::Confirmed) ++ledger.confirmations;
  else ++ledger.corrections;
  // Recomputed from the counters so the total is independent of answer order.
  ledger.bits_spent = cost::normalized_click_cost(ledger, L);
  return ledger;
}

// ---------------------------------------------------------------------------
// Session

struct PredictorConfig {
  enum Kind { Builtin, External };
  Kind kind = Builtin;
  std::optional<std::string> command;
  PauseHandler pause;
};

struct LoopConfig {
  std::size_t batch_size = 64;
  int rounds = 4;
  AcquisitionKind acquisition{AcquisitionKind::SIM, 0};
  double epsilon = 0.0;
  bool expand_confirmed = true;
  PredictorConfig predictor;
  OracleConfig oracle;
  fs::path out_dir;  // empty: keep everything in memory
  ResidualPolicy residual = ResidualPolicy::Components;  // recorded only; applied by load_dataset
  bool dump_pool = false;

  void validate() const {
    if (batch_size < 1) throw Error(Errc::InvalidArgument, "B must be >= 1");
    if (rounds < 1) throw Error(Errc::InvalidArgument, "T must be >= 1");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw Error(Errc::InvalidArgument, "epsilon must lie in [0, 1]");
    if (!(oracle.error_rate >= 0.0 && oracle.error_rate <= 1.0))
      throw Error(Errc::InvalidArgument, "oracle error_rate must lie in [0, 1]");
  }
};

inline std::string round_tag(int round) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "round_%03d", round);
  return buf;
}

inline std::string make_query_id(int round, std::size_t index) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "r%03d-q%06zu", round, index);
  return buf;
}

/// Owns the evolving dataset for one run. Not thread-safe: callers that
/// answer concurrently must serialize access.
class CorrectionSession {
 public:
  CorrectionSession(Dataset ds, LoopConfig cfg) : ds_(std::move(ds)), cfg_(std::move(cfg)) {
    cfg_.validate();
    ledger_.clicks_limit = static_cast<std::int64_t>(cfg_.batch_size) * cfg_.rounds;
    for (const auto& im : ds_.images) {
      LabelMap lm = im.pseudo;
      lm.role = LabelRole::Corrected;
      labels_.push_back(std::move(lm));
      selected_.emplace_back(im.pixel_count(), false);
    }
    write_run_info();
    warm_start();
    record_metrics();
    write_round_outputs();
    begin_round();
  }

  /// Continues a run from out_dir/checkpoint.json.
  static CorrectionSession resume(Dataset ds, LoopConfig cfg) {
    return CorrectionSession(std::move(ds), std::move(cfg), ResumeTag{});
  }

  static bool has_checkpoint(const fs::path& out_dir) { return fs::exists(out_dir / "checkpoint.json"); }

  // -- queries --------------------------------------------------------------

  const std::vector<CorrectionQuery>& queries() const noexcept { return queries_; }
  const std::vector<PoolEntry>& pool() const noexcept { return pool_; }
  const std::vector<double>& scores() const noexcept { return scores_; }

  const CorrectionQuery& query(const std::string& id) const { return queries_.at(query_index(id)); }
  const PoolEntry& pool_entry_for(const std::string& id) const { return pool_[batch_[query_index(id)]]; }

  std::size_t pending_count() const {
    return static_cast<std::size_t>(std::count_if(queries_.begin(), queries_.end(), [](const CorrectionQuery& q) {
      return q.status == QueryStatus::Pending;
    }));
  }
  std::size_t answered_count() const { return queries_.size() - pending_count(); }

  /// First valid answer wins; later answers raise StaleAnswer.
  void submit(const QueryAnswer& a) {
    if (finished_) throw Error(Errc::SessionFinished, "run already finished");
    const std::size_t i = query_index(a.query_id);
    auto& q = queries_[i];
    if (q.status == QueryStatus::Answered) throw Error(Errc::StaleAnswer, a.query_id + " already answered");
    check_answer(q, a, ds_.labels);
    q.status = QueryStatus::Answered;
    answers_[a.query_id] = a;
    ledger_ = record_query(ledger_, a, num_classes());
  }

  /// Answers every pending query from ground truth.
  void answer_with_oracle() {
    for (const auto& q : queries_) {
      if (q.status != QueryStatus::Pending) continue;
      const auto& im = ds_.images[ds_.index_of(q.pixel.image_id)];
      if (!im.gt) throw Error(Errc::MissingGroundTruth, "image " + im.image_id + " has no ground truth");
      submit(simulated_answer(q, *im.gt, cfg_.oracle, ds_.labels));
    }
  }

  /// Closes the round: expands answers, refreshes predictions, checkpoints and
  /// opens the next round (or finishes).
  void advance() {
    if (finished_) throw Error(Errc::SessionFinished, "run already finished");
    if (pending_count() > 0)
      throw Error(Errc::OutstandingQueries, std::to_string(pending_count()) + " queries still pending");
    apply_answers();
    const bool last = round_ >= cfg_.rounds;
    record_metrics();
    write_round_outputs();
    write_checkpoint();
    if (last) {
      finish();
      return;
    }
    refresh_predictions();
    begin_round();
  }

  /// Runs the remaining rounds against the simulated oracle.
  void run_to_completion() {
    while (!finished_) {
      answer_with_oracle();
      advance();
    }
  }

  // -- state ----------------------------------------------------------------

  bool finished() const noexcept { return finished_; }
  int round() const noexcept { return round_; }
  const LoopConfig& config() const noexcept { return cfg_; }
  const Dataset& dataset() const noexcept { return ds_; }
  const BudgetLedger& ledger() const noexcept { return ledger_; }
  const std::vector<LabelMap>& labels() const noexcept { return labels_; }
  const std::vector<ProbMap>& probs() const noexcept { return probs_; }
  const std::vector<QueryRecord>& query_log() const noexcept { return log_; }
  const std::vector<RoundMetrics>& metrics() const noexcept { return metrics_; }
  const std::set<SegmentKey>& corrected_segments() const noexcept { return corrected_; }
  const std::vector<std::vector<bool>>& selected_masks() const noexcept { return selected_; }
  int num_classes() const noexcept { return static_cast<int>(ds_.labels.num_classes()); }

  RoundState round_state() const {
    RoundState s;
    s.round = round_;
    s.ledger = ledger_;
    s.corrected = corrected_;
    for (std::size_t i = 0; i < pool_.size(); ++i) {
      s.pool.push_back({pool_[i].pixel, pool_[i].segment_id});
      s.scores.push_back(static_cast<float>(scores_[i]));
    }
    for (auto b : batch_) s.batch.push_back({pool_[b].pixel, pool_[b].segment_id});
    for (const auto& lm : labels_) s.label_paths[lm.image_id] = "labels/" + lm.image_id + ".alct";
    return s;
  }

  std::string query_log_jsonl() const {
    std::string out;
    for (const auto& r : log_) out += query_record_to_json(r).dump() + "\n";
    return out;
  }

  nlohmann::json metrics_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& m : metrics_) arr.push_back(round_metrics_to_json(m));
    return arr;
  }

 private:
  struct ResumeTag {};

  CorrectionSession(Dataset ds, LoopConfig cfg, ResumeTag) : ds_(std::move(ds)), cfg_(std::move(cfg)) {
    cfg_.validate();
    const fs::path dir = cfg_.out_dir;
    if (dir.empty() || !has_checkpoint(dir))
      throw Error(Errc::MissingOutputs, "no checkpoint in '" + dir.string() + "'");
    std::ifstream in(dir / "checkpoint.json");
    const RoundState st = round_state_from_json(nlohmann::json::parse(in));
    round_ = st.round;
    ledger_ = st.ledger;
    ledger_.clicks_limit = static_cast<std::int64_t>(cfg_.batch_size) * cfg_.rounds;
    corrected_ = st.corrected;
    for (const auto& im : ds_.images) {
      const auto t = read_tensor(dir / "labels" / (im.image_id + ".alct"));
      labels_.push_back(LabelMap::from_tensor(t, im.image_id, LabelRole::Corrected));
      const auto m = read_tensor(dir / "selected" / (im.image_id + ".alct")).values<std::uint8_t>();
      selected_.emplace_back(m.begin(), m.end());
    }
    {
      std::ifstream log_in(dir / "query_log.jsonl");
      log_ = read_query_log(log_in);
    }
    {
      // Metrics rows are rebuilt from the ledger and labels of each round
      // only for the current one; earlier rows are carried over verbatim.
      std::ifstream m_in(dir / "metrics.json");
      carried_metrics_ = nlohmann::json::parse(m_in);
      if (carried_metrics_.size() > static_cast<std::size_t>(round_) + 1)
        carried_metrics_.erase(carried_metrics_.begin() + round_ + 1, carried_metrics_.end());
    }
    if (round_ >= cfg_.rounds) {
      finished_ = true;
      return;
    }
    refresh_predictions();
    begin_round();
  }

  std::size_t query_index(const std::string& id) const {
    auto it = query_lookup_.find(id);
    if (it == query_lookup_.end()) throw Error(Errc::UnknownQuery, "unknown query " + id);
    return it->second;
  }

  void warm_start() {
    const bool ingested = std::all_of(ds_.images.begin(), ds_.images.end(),
                                      [](const ImageData& im) { return im.initial_probs.has_value(); });
    if (ingested) {
      for (const auto& im : ds_.images) probs_.push_back(*im.initial_probs);
      for (const auto& pm : probs_)
        if (auto bad = check_prob_rows(pm)) throw Error(Errc::ValidationFailed, pm.image_id + ": " + *bad);
      return;
    }
    refresh_predictions();
  }

  void refresh_predictions() {
    if (cfg_.predictor.kind == PredictorConfig::Builtin) {
      probs_ = fit_predict(ds_, labels_);
      return;
    }
    const fs::path base = cfg_.out_dir.empty() ? fs::temp_directory_path() / "alc_rounds" : cfg_.out_dir / "rounds";
    const fs::path round_dir = base / round_tag(round_);
    // A previous attempt may already have produced probabilities.
    if (fs::is_directory(round_dir / "probs") && !cfg_.predictor.command) {
      try {
        probs_ = ingest_round_probs(round_dir, ds_);
        return;
      } catch (const Error&) {
      }
    }
    probs_ = external_round_exchange(round_dir, cfg_.predictor.command, ds_, labels_, cfg_.predictor.pause);
  }

  void begin_round() {
    ++round_;
    queries_.clear();
    answers_.clear();
    query_lookup_.clear();
    batch_.clear();
    pool_ = build_pool(ds_, probs_, corrected_);
    if (pool_.empty()) {
      // Everything has been corrected; nothing left to ask.
      --round_;
      scores_.clear();
      finish();
      return;
    }
    scores_ = score_pool(pool_, cfg_.acquisition, probs_, labels_, ds_.labels, round_);
    const auto order = select_batch(pool_, scores_, pool_.size());
    batch_.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(cfg_.batch_size, order.size())));
    for (std::size_t i = 0; i < batch_.size(); ++i) {
      const auto& e = pool_[batch_[i]];
      CorrectionQuery q;
      q.query_id = make_query_id(round_, i);
      q.round = round_;
      q.pixel = e.pixel;
      q.segment_id = e.segment_id;
      q.pseudo_label = labels_[e.image_index].at(e.pixel.x, e.pixel.y);
      query_lookup_[q.query_id] = queries_.size();
      queries_.push_back(std::move(q));
    }
    write_round_dumps(order);
  }

  void apply_answers() {
    // query_ids sort in issue order, so this is query_id order.
    for (std::size_t i = 0; i < queries_.size(); ++i) {
      const auto& q = queries_[i];
      const auto& a = answers_.at(q.query_id);
      const auto& e = pool_[batch_[i]];
      const Expansion ex = expand_label(q, a, e.segment, probs_[e.image_index], cfg_.epsilon, corrected_);
      auto& lm = labels_[e.image_index];
      auto& sel = selected_[e.image_index];
      const bool apply = a.verdict == Verdict::Corrected || cfg_.expand_confirmed;
      for (auto p : ex.pixels) {
        sel[p] = true;
        if (apply) lm.data[p] = ex.label;
      }
      // The queried pixel itself always carries the verified label.
      lm.data[std::size_t{q.pixel.y} * lm.width + q.pixel.x] = ex.label;
      corrected_.insert(e.key());

      QueryRecord r;
      r.query_id = q.query_id;
      r.round = q.round;
      r.image_id = q.pixel.image_id;
      r.x = q.pixel.x;
      r.y = q.pixel.y;
      r.segment_id = q.segment_id;
      r.pseudo_label = q.pseudo_label;
      r.verdict = a.verdict;
      if (a.verdict == Verdict::Corrected) r.corrected_label = a.corrected_label;
      r.click_cost = 1;
      r.bit_cost = cost::answer_bits(a.verdict == Verdict::Confirmed, num_classes());
      log_.push_back(std::move(r));
    }
  }

  bool has_full_gt() const {
    return std::all_of(ds_.images.begin(), ds_.images.end(), [](const ImageData& im) { return im.gt.has_value(); });
  }

  void record_metrics() {
    RoundMetrics m;
    m.round = round_;
    m.ledger = ledger_;
    m.corrected_histogram = corrected_class_histogram(log_);
    if (has_full_gt()) {
      std::vector<LabelMap> pseudo, gt;
      for (const auto& im : ds_.images) {
        pseudo.push_back(im.pseudo);
        gt.push_back(*im.gt);
      }
      m.detection = detection_report(std::span<const std::vector<bool>>(selected_), pseudo, gt, ds_.labels);
      m.data = iou_report(labels_, gt, ds_.labels);
    }
    metrics_.push_back(std::move(m));
  }

  void finish() {
    finished_ = true;
    if (!cfg_.out_dir.empty()) export_corrected_dataset(cfg_.out_dir / "corrected");
  }

 public:
  /// Writes the current labels plus a manifest pointing at them.
  void export_corrected_dataset(const fs::path& dir) const {
    DatasetManifest m;
    m.class_names = ds_.labels.class_names;
    if (ds_.labels.ignore_id) m.ignore_id = *ds_.labels.ignore_id;
    const fs::path abs_dir = fs::absolute(dir);
    auto rel = [&](const std::string& p) { return fs::relative(fs::absolute(ds_.manifest.resolve(p)), abs_dir).string(); };
    for (std::size_t i = 0; i < ds_.images.size(); ++i) {
      const auto& im = ds_.images[i];
      const auto* src = std::find_if(ds_.manifest.images.data(), ds_.manifest.images.data() + ds_.manifest.images.size(),
                                     [&](const ManifestImage& e) { return e.image_id == im.image_id; });
      if (src == ds_.manifest.images.data() + ds_.manifest.images.size())
        throw Error(Errc::ImageMismatch, "image " + im.image_id + " is not in the source manifest");
      ManifestImage e;
      e.image_id = im.image_id;
      e.width = im.width;
      e.height = im.height;
      e.image_path = rel(src->image_path);
      e.superpixel_path = rel(src->superpixel_path);
      if (src->gt_label_path) e.gt_label_path = rel(*src->gt_label_path);
      e.pseudo_label_path = "labels/" + im.image_id + ".alct";
      write_tensor(dir / e.pseudo_label_path, labels_[i].to_tensor());
      m.images.push_back(std::move(e));
    }
    save_manifest(dir / "manifest.json", m);
  }

 private:
  void write_run_info() const {
    if (cfg_.out_dir.empty()) return;
    fs::create_directories(cfg_.out_dir);
    nlohmann::json j{{"manifest", ds_.manifest.source.string()},
                     {"residual", residual_policy_name(cfg_.residual)},
                     {"batch_size", cfg_.batch_size},
                     {"rounds", cfg_.rounds},
                     {"acquisition", acquisition_name(cfg_.acquisition)},
                     {"acquisition_seed", cfg_.acquisition.seed},
                     {"epsilon", cfg_.epsilon},
                     {"expand_confirmed", cfg_.expand_confirmed},
                     {"predictor", cfg_.predictor.kind == PredictorConfig::Builtin ? "builtin" : "external"},
                     {"oracle_error_rate", cfg_.oracle.error_rate},
                     {"oracle_seed", cfg_.oracle.seed},
                     {"class_names", ds_.labels.class_names}};
    write_text_file(cfg_.out_dir / "run.json", j.dump(2) + "\n");
  }

  void write_round_dumps(const std::vector<std::size_t>& order) const {
    if (cfg_.out_dir.empty()) return;
    const std::string kind = acquisition_name(cfg_.acquisition);
    std::ostringstream os;
    os << "image_id,segment_id,kind,score,rank\n";
    os.precision(9);
    for (std::size_t r = 0; r < order.size(); ++r) {
      const auto& e = pool_[order[r]];
      os << e.pixel.image_id << ',' << e.segment_id << ',' << kind << ',' << static_cast<float>(scores_[order[r]])
         << ',' << r << '\n';
    }
    write_text_file(cfg_.out_dir / "scores" / (round_tag(round_) + ".csv"), os.str());
    if (!cfg_.dump_pool) return;
    std::ostringstream ps;
    ps << "image_id,segment_id,x,y,dominant_label,subset_size\n";
    for (const auto& e : pool_)
      ps << e.pixel.image_id << ',' << e.segment_id << ',' << e.pixel.x << ',' << e.pixel.y << ','
         << e.dominant_label << ',' << e.subset_size << '\n';
    write_text_file(cfg_.out_dir / "pool" / (round_tag(round_) + ".csv"), ps.str());
  }

  void write_round_outputs() const {
    if (cfg_.out_dir.empty()) return;
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      const auto& lm = labels_[i];
      write_tensor(cfg_.out_dir / "labels" / (lm.image_id + ".alct"), lm.to_tensor());
      std::vector<std::uint8_t> mask(selected_[i].begin(), selected_[i].end());
      write_tensor(cfg_.out_dir / "selected" / (lm.image_id + ".alct"),
                   DenseTensor::from_values<std::uint8_t>({lm.height, lm.width}, mask));
    }
    write_text_file(cfg_.out_dir / "query_log.jsonl", query_log_jsonl());
    nlohmann::json all = carried_metrics_.is_array() ? carried_metrics_ : nlohmann::json::array();
    const std::size_t skip = all.size();
    for (std::size_t i = 0; i < metrics_.size(); ++i)
      if (static_cast<std::size_t>(metrics_[i].round) >= skip) all.push_back(round_metrics_to_json(metrics_[i]));
    write_text_file(cfg_.out_dir / "metrics.json", all.dump(2) + "\n");
  }

  void write_checkpoint() const {
    if (cfg_.out_dir.empty()) return;
    write_text_file(cfg_.out_dir / "checkpoint.json", round_state_to_json(round_state()).dump() + "\n");
  }

  Dataset ds_;
  LoopConfig cfg_;
  int round_ = 0;
  bool finished_ = false;
  BudgetLedger ledger_;
  std::vector<LabelMap> labels_;
  std::vector<ProbMap> probs_;
  std::vector<std::vector<bool>> selected_;
  std::set<SegmentKey> corrected_;
  std::vector<PoolEntry> pool_;
  std::vector<double> scores_;
  std::vector<std::size_t> batch_;  // pool indices, query order
  std::vector<CorrectionQuery> queries_;
  std::map<std::string, std::size_t> query_lookup_;
  std::map<std::string, QueryAnswer> answers_;
  std::vector<QueryRecord> log_;
  std::vector<RoundMetrics> metrics_;
  nlohmann::json carried_metrics_;
};

/// Simulate mode end to end.
inline CorrectionSession run(Dataset ds, LoopConfig cfg) {
  CorrectionSession s(std::move(ds), std::move(cfg));
  s.run_to_completion();
  return s;
}

}  // namespace alc
