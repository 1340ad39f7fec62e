#include <atomic>
#include <thread>

#include <gtest/gtest.h>

#include <httplib.h>

#include "alc/service.hpp"
#include "alc/synth.hpp"
#include "test_support.hpp"

using namespace alc;
namespace ts = testing_support;
using nlohmann::json;

namespace {

Dataset small_dataset(const ts::TempDir& dir, std::uint32_t images = 3) {
  SynthSpec spec;
  spec.images = images;
  spec.height = 16;
  spec.width = 16;
  spec.grid = 4;
  spec.classes = 3;
  return load_dataset(synthesize(spec, dir / "data").manifest);
}

// Runs an AnnotationService on an ephemeral port for the lifetime of the object.
class Harness {
 public:
  Harness(std::optional<CorrectionSession> session, ServiceOptions opts = {})
      : service_(std::move(session), std::move(opts)) {
    service_.mount(server_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~Harness() {
    server_.stop();
    thread_.join();
  }

  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(30, 0);
    return c;
  }
  AnnotationService& service() { return service_; }

 private:
  AnnotationService service_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

json get_json(httplib::Client& c, const std::string& path, int expect = 200) {
  auto r = c.Get(path);
  EXPECT_TRUE(r) << path;
  if (!r) return {};
  EXPECT_EQ(r->status, expect) << path << " " << r->body;
  return r->body.empty() ? json() : json::parse(r->body);
}

int post_answer(httplib::Client& c, const std::string& id, const json& body) {
  auto r = c.Post("/api/queries/" + id + "/answer", body.dump(), "application/json");
  return r ? r->status : -1;
}

std::pair<std::uint32_t, std::uint32_t> png_size(const std::string& png) {
  auto be32 = [&](std::size_t o) {
    return (static_cast<std::uint32_t>(static_cast<unsigned char>(png[o])) << 24) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(png[o + 1])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(png[o + 2])) << 8) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(png[o + 3]));
  };
  EXPECT_EQ(png.substr(1, 3), "PNG");
  EXPECT_EQ(png.substr(12, 4), "IHDR");
  return {be32(16), be32(20)};
}

/// The answer a perfect annotator gives for a served QueryView.
json oracle_body(const Dataset& ds, const json& view) {
  const auto& im = ds.images[ds.index_of(view["image_id"])];
  const ClassId truth = im.gt->at(view["x"], view["y"]);
  if (truth == view["pseudo_label"].get<ClassId>()) return {{"verdict", "confirmed"}};
  return {{"verdict", "corrected"}, {"label", truth}};
}

LoopConfig config(std::size_t B, int T) {
  LoopConfig cfg;
  cfg.batch_size = B;
  cfg.rounds = T;
  return cfg;
}

}  // namespace

TEST(Service, NoSessionIs503) {
  Harness h(std::nullopt);
  auto c = h.client();
  get_json(c, "/api/session", 503);
  get_json(c, "/api/queries/next?annotator=a", 503);
  EXPECT_EQ(post_answer(c, "x", {{"verdict", "confirmed"}}), 503);
}

TEST(Service, SessionCountsPendingAndAnswered) {
  ts::TempDir dir;
  const auto ds = small_dataset(dir);
  Harness h(CorrectionSession(ds, config(10, 2)));
  auto c = h.client();
  auto info = get_json(c, "/api/session");
  EXPECT_EQ(info["queries_pending"], 10);
  EXPECT_EQ(info["queries_answered"], 0);
  EXPECT_EQ(info["round"], 1);
  EXPECT_EQ(info["status"], "active");
  for (int i = 0; i < 3; ++i) {
    auto view = get_json(c, "/api/queries/next?annotator=a");
    EXPECT_EQ(post_answer(c, view["query_id"], oracle_body(ds, view)), 200);
  }
  info = get_json(c, "/api/session");
  EXPECT_EQ(info["queries_pending"], 7);
  EXPECT_EQ(info["queries_answered"], 3);
  EXPECT_EQ(info["ledger"]["clicks"], 3);
}

TEST(Service, QueryViewFields) {
  ts::TempDir dir;
  const auto ds = small_dataset(dir);
  Harness h(CorrectionSession(ds, config(1, 1)));
  auto c = h.client();
  const auto v = get_json(c, "/api/queries/next?annotator=a");
  for (const char* k : {"query_id", "image_id", "x", "y", "bbox", "pseudo_label", "class_names", "segment_id"})
    EXPECT_TRUE(v.contains(k)) << k;
  const auto bbox = v["bbox"];
  ASSERT_EQ(bbox.size(), 4u);
  EXPECT_LE(bbox[0].get<int>(), v["x"].get<int>());
  EXPECT_LE(v["x"].get<int>(), bbox[2].get<int>());
  EXPECT_LE(bbox[1].get<int>(), v["y"].get<int>());
  EXPECT_LE(v["y"].get<int>(), bbox[3].get<int>());
  // Synthetic superpixels are 4x4 grid cells.
  EXPECT_EQ(bbox[2].get<int>() - bbox[0].get<int>(), 3);
  EXPECT_EQ(bbox[3].get<int>() - bbox[1].get<int>(), 3);
}

TEST(Service, LeasesAndExpiry) {
  ts::TempDir dir;
  const auto ds = small_dataset(dir);
  auto now = std::make_shared<std::atomic<double>>(1000.0);
  ServiceOptions opts;
  opts.lease_seconds = 120;
  opts.clock = [now] { return now->load(); };
  Harness h(CorrectionSession(ds, config(1, 1)), opts);
  auto c = h.client();
  const auto first = get_json(c, "/api/queries/next?annotator=a");
  // Leased and unexpired: nothing for b, but a gets its own lease back.
  get_json(c, "/api/queries/next?annotator=b", 204);
  EXPECT_EQ(get_json(c, "/api/queries/next?annotator=a")["query_id"], first["query_id"]);
  now->store(1000.0 + 121);
  EXPECT_EQ(get_json(c, "/api/queries/next?annotator=b")["query_id"], first["query_id"]);
  get_json(c, "/api/queries/next?annotator=a", 204);
}

TEST(Service, AnswerStatusCodes) {
  ts::TempDir dir;
  const auto ds = small_dataset(dir);
  Harness h(CorrectionSession(ds, config(2, 1)));
  auto c = h.client();
  const auto v = get_json(c, "/api/queries/next?annotator=a");
  const std::string id = v["query_id"];
  const int pseudo = v["pseudo_label"];
  EXPECT_EQ(post_answer(c, id, {{"verdict", "corrected"}, {"label", pseudo}}), 422);
  EXPECT_EQ(post_answer(c, id, {{"verdict", "corrected"}, {"label", 99}}), 422);
  EXPECT_EQ(post_answer(c, id, {{"verdict", "corrected"}}), 422);
  EXPECT_EQ(post_answer(c, id, {{"verdict", "maybe"}}), 400);
  auto bad = c.Post("/api/queries/" + id + "/answer", "{oops", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_EQ(post_answer(c, "r009-q000000", {{"verdict", "confirmed"}}), 404);

  auto r = c.Post("/api/queries/" + id + "/answer", json{{"verdict", "confirmed"}}.dump(), "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  const auto body = json::parse(r->body);
  EXPECT_EQ(body["ledger"]["clicks"], 1);
  EXPECT_EQ(body["ledger"]["bits"], 1.0);
  EXPECT_EQ(post_answer(c, id, {{"verdict", "confirmed"}}), 409);
}

TEST(Service, AdvanceLifecycle) {
  ts::TempDir dir;
  const auto ds = small_dataset(dir);
  LoopConfig cfg = config(2, 2);
  cfg.out_dir = dir / "run";
  Harness h(CorrectionSession(ds, cfg));
  auto c = h.client();
  auto v = get_json(c, "/api/queries/next?annotator=a");
  post_answer(c, v["query_id"], oracle_body(ds, v));
  EXPECT_EQ(c.Post("/api/rounds/advance", "", "application/json")->status, 409);
  get_json(c, "/api/export", 409);
  v = get_json(c, "/api/queries/next?annotator=a");
  post_answer(c, v["query_id"], oracle_body(ds, v));
  auto r = c.Post("/api/rounds/advance", "", "application/json");
  ASSERT_EQ(r->status, 200);
  EXPECT_EQ(json::parse(r->body)["round"], 2);
  while (true) {
    auto next = c.Get("/api/queries/next?annotator=a");
    if (next->status == 204) break;
    const auto view = json::parse(next->body);
    EXPECT_EQ(view["round"], 2);
    post_answer(c, view["query_id"], oracle_body(ds, view));
  }
  r = c.Post("/api/rounds/advance", "", "application/json");
  ASSERT_EQ(r->status, 200);
  EXPECT_EQ(json::parse(r->body)["status"], "finished");
  EXPECT_TRUE(h.service().finished());
  const auto exp = get_json(c, "/api/export");
  EXPECT_TRUE(fs::exists(exp["manifest"].get<std::string>()));
  get_json(c, "/api/queries/next?annotator=a", 204);
  EXPECT_EQ(c.Post("/api/rounds/advance", "", "application/json")->status, 409);
}

TEST(Service, PngEndpoints) {
  ts::TempDir dir;
  const auto ds = small_dataset(dir);
  Harness h(CorrectionSession(ds, config(2, 1)));
  auto c = h.client();
  const auto v = get_json(c, "/api/queries/next?annotator=a");
  auto img = c.Get("/api/images/" + v["image_id"].get<std::string>() + ".png");
  ASSERT_TRUE(img);
  EXPECT_EQ(img->status, 200);
  EXPECT_EQ(img->get_header_value("Content-Type"), "image/png");
  auto ov = c.Get("/api/overlays/" + v["query_id"].get<std::string>() + ".png");
  ASSERT_TRUE(ov);
  EXPECT_EQ(ov->status, 200);
  EXPECT_EQ(png_size(img->body), png_size(ov->body));
  EXPECT_EQ(png_size(ov->body), (std::pair<std::uint32_t, std::uint32_t>{16, 16}));
  EXPECT_EQ(c.Get("/api/images/nope.png")->status, 404);
  EXPECT_EQ(c.Get("/api/overlays/nope.png")->status, 404);
}

TEST(Service, ConcurrentAnnotatorsAnswerEachQueryOnce) {
  ts::TempDir dir;
  const auto ds = small_dataset(dir, 4);
  Harness h(CorrectionSession(ds, config(40, 1)));
  std::atomic<int> ok{0}, conflicts{0};
  std::vector<std::thread> workers;
  for (int w = 0; w < 6; ++w) {
    workers.emplace_back([&, w] {
      auto c = h.client();
      const std::string who = "annotator" + std::to_string(w);
      while (true) {
        auto r = c.Get("/api/queries/next?annotator=" + who);
        if (!r || r->status != 200) break;
        const auto view = json::parse(r->body);
        // Everyone also races on a second submission of the same answer.
        for (int k = 0; k < 2; ++k) {
          const int st = post_answer(c, view["query_id"], oracle_body(ds, view));
          if (st == 200) ++ok;
          else if (st == 409) ++conflicts;
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  EXPECT_EQ(ok.load(), 40);
  EXPECT_EQ(ok.load() + conflicts.load(), 80);
  h.service().with_session([](const CorrectionSession& s) {
    EXPECT_EQ(s.answered_count(), 40u);
    EXPECT_EQ(s.ledger().clicks_spent, 40);
    return 0;
  });
}

TEST(Service, OutcomeIndependentOfAnswerOrder) {
  ts::TempDir dir;
  const auto ds = small_dataset(dir);
  auto play = [&](bool reverse) {
    Harness h(CorrectionSession(ds, config(12, 2)));
    auto c = h.client();
    for (int round = 0; round < 2; ++round) {
      std::vector<json> views;
      while (true) {
        // A fresh annotator name each time, so leased queries are not handed back.
        auto r = c.Get("/api/queries/next?annotator=a" + std::to_string(views.size()));
        if (r->status != 200) break;
        views.push_back(json::parse(r->body));
      }
      if (reverse) std::reverse(views.begin(), views.end());
      for (const auto& v : views) EXPECT_EQ(post_answer(c, v["query_id"], oracle_body(ds, v)), 200);
      EXPECT_EQ(c.Post("/api/rounds/advance", "", "application/json")->status, 200);
    }
    return h.service().with_session([](const CorrectionSession& s) {
      std::vector<std::vector<ClassId>> labels;
      for (const auto& lm : s.labels()) labels.push_back(lm.data);
      return std::make_pair(labels, s.ledger());
    });
  };
  const auto fwd = play(false), rev = play(true);
  EXPECT_EQ(fwd.first, rev.first);
  EXPECT_EQ(fwd.second, rev.second);
}

TEST(Service, StaticPlaceholderServed) {
  Harness h(std::nullopt);
  auto c = h.client();
  auto r = c.Get("/");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
}

TEST(BoundingBox, TightBox) {
  const auto b = bounding_box(Superpixel{"a", 0, 10, {12, 13, 25, 31}});
  EXPECT_EQ(b.x0, 1u);
  EXPECT_EQ(b.y0, 1u);
  EXPECT_EQ(b.x1, 5u);
  EXPECT_EQ(b.y1, 3u);
  EXPECT_ALC_ERROR(bounding_box(Superpixel{"a", 0, 10, {}}), Errc::EmptySegment);
}
