#pragma once

// HTTP/JSON facade over an interactive CorrectionSession.
//
//   GET  /api/session                     SessionInfo (503 without a session)
//   GET  /api/queries/next?annotator=ID   lease the next pending query (204 if none)
//   POST /api/queries/{id}/answer         {"verdict":"confirmed"} | {"verdict":"corrected","label":N}
//   POST /api/rounds/advance              close the round (409 while queries are outstanding)
//   GET  /api/images/{image_id}.png       RGB render of the image tensor
//   GET  /api/overlays/{query_id}.png     RGBA segment mask, representative pixel marked
//   GET  /api/export                      corrected manifest path once finished
//
// Every request takes the same mutex, so answers are applied one at a time in
// arrival order and reads see a consistent snapshot.

#include <chrono>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "alc/correction_loop.hpp"
#include "alc/png.hpp"

namespace alc {

struct ServiceOptions {
  double lease_seconds = 120.0;
  std::string session_id = "session";
  std::string static_dir;                // served at / when set
  std::function<double()> clock;         // seconds; defaults to steady_clock
};

struct BoundingBox {
  std::uint32_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive
};

inline BoundingBox bounding_box(const Superpixel& s) {
  require_non_empty(s);
  constexpr auto kMax = std::numeric_limits<std::uint32_t>::max();
  BoundingBox b{kMax, kMax, 0, 0};
  for (auto p : s.pixels) {
    const std::uint32_t x = p % s.width, y = p / s.width;
    b.x0 = std::min(b.x0, x);
    b.y0 = std::min(b.y0, y);
    b.x1 = std::max(b.x1, x);
    b.y1 = std::max(b.y1, y);
  }
  return b;
}

class AnnotationService {
 public:
  explicit AnnotationService(std::optional<CorrectionSession> session, ServiceOptions opts = {})
      : session_(std::move(session)), opts_(std::move(opts)) {
    if (!opts_.clock) {
      opts_.clock = [] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
      };
    }
  }

  void mount(httplib::Server& srv) {
    srv.Get("/api/session", [this](const httplib::Request&, httplib::Response& res) { get_session(res); });
    srv.Get("/api/queries/next",
            [this](const httplib::Request& req, httplib::Response& res) { next_query(req, res); });
    srv.Post(R"(/api/queries/([^/]+)/answer)",
             [this](const httplib::Request& req, httplib::Response& res) { post_answer(req, res); });
    srv.Post("/api/rounds/advance", [this](const httplib::Request&, httplib::Response& res) { advance(res); });
    srv.Get(R"(/api/images/([^/]+)\.png)",
            [this](const httplib::Request& req, httplib::Response& res) { image_png(req, res); });
    srv.Get(R"(/api/overlays/([^/]+)\.png)",
            [this](const httplib::Request& req, httplib::Response& res) { overlay_png(req, res); });
    srv.Get("/api/export", [this](const httplib::Request&, httplib::Response& res) { export_info(res); });
    if (!opts_.static_dir.empty()) {
      srv.set_mount_point("/", opts_.static_dir);
    } else {
      srv.Get("/", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("<!doctype html><title>alc</title><p>Annotation API is at <code>/api</code>.</p>",
                        "text/html");
      });
    }
  }

  bool finished() const {
    std::lock_guard lock(mu_);
    return session_ && session_->finished();
  }

  /// Runs `f` with exclusive access to the session (tests, CLI shutdown).
  template <typename F>
  auto with_session(F&& f) const {
    std::lock_guard lock(mu_);
    return f(*session_);
  }

  nlohmann::json session_info() const {
    std::lock_guard lock(mu_);
    return session_info_locked();
  }

 private:
  static void send_json(httplib::Response& res, int status, const nlohmann::json& j) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, int status, const std::string& msg) {
    send_json(res, status, {{"error", msg}});
  }

  bool require_session(httplib::Response& res) const {
    if (session_) return true;
    send_error(res, 503, "no active session");
    return false;
  }

  nlohmann::json session_info_locked() const {
    const auto& s = *session_;
    const auto& cfg = s.config();
    return {{"session_id", opts_.session_id},
            {"status", s.finished() ? "finished" : "active"},
            {"class_names", s.dataset().labels.class_names},
            {"round", s.round()},
            {"rounds", cfg.rounds},
            {"batch_size", cfg.batch_size},
            {"queries_issued", s.finished() ? 0 : s.queries().size()},
            {"queries_pending", s.finished() ? 0 : s.pending_count()},
            {"queries_answered", s.finished() ? 0 : s.answered_count()},
            {"ledger", s.ledger()},
            {"epsilon", cfg.epsilon},
            {"acquisition", acquisition_name(cfg.acquisition)}};
  }

  nlohmann::json query_view(const CorrectionQuery& q) const {
    const auto& s = *session_;
    const auto& e = s.pool_entry_for(q.query_id);
    const auto box = bounding_box(e.segment);
    const auto& names = s.dataset().labels.class_names;
    return {{"query_id", q.query_id},
            {"round", q.round},
            {"image_id", q.pixel.image_id},
            {"x", q.pixel.x},
            {"y", q.pixel.y},
            {"segment_id", q.segment_id},
            {"bbox", {box.x0, box.y0, box.x1, box.y1}},
            {"pseudo_label", q.pseudo_label},
            {"pseudo_label_name", q.pseudo_label < names.size() ? names[q.pseudo_label] : ""},
            {"class_names", names},
            {"image_url", "/api/images/" + q.pixel.image_id + ".png"},
            {"overlay_url", "/api/overlays/" + q.query_id + ".png"}};
  }

  void get_session(httplib::Response& res) const {
    std::lock_guard lock(mu_);
    if (!require_session(res)) return;
    send_json(res, 200, session_info_locked());
  }

  void next_query(const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(mu_);
    if (!require_session(res)) return;
    if (session_->finished()) {
      res.status = 204;
      return;
    }
    sync_round();
    const std::string annotator = req.has_param("annotator") ? req.get_param_value("annotator") : "";
    const double now = opts_.clock();
    const CorrectionQuery* pick = nullptr;
    // A query already leased to this annotator is handed back first.
    for (const auto& q : session_->queries()) {
      if (q.status != QueryStatus::Pending) continue;
      auto it = leases_.find(q.query_id);
      if (it != leases_.end() && it->second.annotator == annotator && it->second.expires > now) {
        pick = &q;
        break;
      }
    }
    if (!pick) {
      for (const auto& q : session_->queries()) {
        if (q.status != QueryStatus::Pending) continue;
        auto it = leases_.find(q.query_id);
        if (it == leases_.end() || it->second.expires <= now) {
          pick = &q;
          break;
        }
      }
    }
    if (!pick) {
      res.status = 204;
      return;
    }
    leases_[pick->query_id] = Lease{annotator, now + opts_.lease_seconds};
    send_json(res, 200, query_view(*pick));
  }

  void post_answer(const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(mu_);
    if (!require_session(res)) return;
    const std::string id = req.matches[1];
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception&) {
      send_error(res, 400, "body must be JSON");
      return;
    }
    if (!body.is_object() || !body.contains("verdict") || !body["verdict"].is_string()) {
      send_error(res, 400, "missing verdict");
      return;
    }
    QueryAnswer a;
    a.query_id = id;
    a.annotator_id = body.value("annotator", std::string{});
    a.answered_at = std::chrono::duration_cast<std::chrono::seconds>(
                        std::chrono::system_clock::now().time_since_epoch())
                        .count();
    const auto verdict = body["verdict"].get<std::string>();
    if (verdict == "confirmed") {
      a.verdict = Verdict::Confirmed;
    } else if (verdict == "corrected") {
      if (!body.contains("label") || !body["label"].is_number_integer()) {
        send_error(res, 422, "a correction needs an integer label");
        return;
      }
      const auto label = body["label"].get<std::int64_t>();
      if (label < 0 || label > std::numeric_limits<ClassId>::max()) {
        send_error(res, 422, "label out of range");
        return;
      }
      a.verdict = Verdict::Corrected;
      a.corrected_label = static_cast<ClassId>(label);
    } else {
      send_error(res, 400, "verdict must be \"confirmed\" or \"corrected\"");
      return;
    }
    try {
      if (session_->finished()) throw Error(Errc::SessionFinished, "run finished");
      session_->submit(a);
    } catch (const Error& e) {
      switch (e.code()) {
        case Errc::UnknownQuery: send_error(res, 404, e.what()); return;
        case Errc::StaleAnswer:
        case Errc::SessionFinished: send_error(res, 409, e.what()); return;
        case Errc::InvalidLabel: send_error(res, 422, e.what()); return;
        default: send_error(res, 500, e.what()); return;
      }
    }
    leases_.erase(id);
    send_json(res, 200, {{"query_id", id}, {"status", "answered"}, {"ledger", session_->ledger()}});
  }

  void advance(httplib::Response& res) {
    std::lock_guard lock(mu_);
    if (!require_session(res)) return;
    try {
      session_->advance();
    } catch (const Error& e) {
      if (e.code() == Errc::OutstandingQueries || e.code() == Errc::SessionFinished) {
        send_error(res, 409, e.what());
      } else {
        send_error(res, 500, e.what());
      }
      return;
    }
    sync_round();
    send_json(res, 200, session_info_locked());
  }

  void image_png(const httplib::Request& req, httplib::Response& res) const {
    std::lock_guard lock(mu_);
    if (!require_session(res)) return;
    const std::string id = req.matches[1];
    const auto& ds = session_->dataset();
    std::size_t i = 0;
    try {
      i = ds.index_of(id);
    } catch (const Error&) {
      send_error(res, 404, "unknown image " + id);
      return;
    }
    const auto& im = ds.images[i];
    res.status = 200;
    res.set_content(png::encode(im.width, im.height, 3, im.rgb), "image/png");
  }

  void overlay_png(const httplib::Request& req, httplib::Response& res) const {
    std::lock_guard lock(mu_);
    if (!require_session(res)) return;
    const std::string id = req.matches[1];
    if (session_->finished()) {
      send_error(res, 404, "unknown query " + id);
      return;
    }
    const CorrectionQuery* q = nullptr;
    for (const auto& c : session_->queries())
      if (c.query_id == id) q = &c;
    if (!q) {
      send_error(res, 404, "unknown query " + id);
      return;
    }
    const auto& e = session_->pool_entry_for(id);
    const auto& im = session_->dataset().images[e.image_index];
    std::vector<std::uint8_t> rgba(im.pixel_count() * 4, 0);
    for (auto p : e.segment.pixels) {
      rgba[4 * p + 1] = 255;
      rgba[4 * p + 3] = 96;
    }
    // Plus-shaped marker on the representative pixel.
    const int cx = static_cast<int>(q->pixel.x), cy = static_cast<int>(q->pixel.y);
    for (int d = -2; d <= 2; ++d) {
      for (auto [x, y] : {std::pair{cx + d, cy}, std::pair{cx, cy + d}}) {
        if (x < 0 || y < 0 || x >= static_cast<int>(im.width) || y >= static_cast<int>(im.height)) continue;
        const std::size_t p = static_cast<std::size_t>(y) * im.width + static_cast<std::size_t>(x);
        rgba[4 * p + 0] = 255;
        rgba[4 * p + 1] = 32;
        rgba[4 * p + 2] = 32;
        rgba[4 * p + 3] = 255;
      }
    }
    res.status = 200;
    res.set_content(png::encode(im.width, im.height, 4, rgba), "image/png");
  }

  void export_info(httplib::Response& res) const {
    std::lock_guard lock(mu_);
    if (!require_session(res)) return;
    if (!session_->finished()) {
      send_error(res, 409, "run still active");
      return;
    }
    const auto& dir = session_->config().out_dir;
    send_json(res, 200, {{"manifest", dir.empty() ? "" : (dir / "corrected" / "manifest.json").string()}});
  }

  void sync_round() {
    if (session_->round() != lease_round_) {
      leases_.clear();
      lease_round_ = session_->round();
    }
  }

  struct Lease {
    std::string annotator;
    double expires = 0.0;
  };

  mutable std::mutex mu_;
  std::optional<CorrectionSession> session_;
  ServiceOptions opts_;
  std::map<std::string, Lease> leases_;
  int lease_round_ = -1;
};

}  // namespace alc
