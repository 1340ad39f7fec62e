// alc: active label correction for segmentation datasets.
//
// Exit codes: 0 success, 1 runtime error (or validation violations),
// 2 usage or parse error.

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "alc/alc.hpp"

namespace {

using namespace alc;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::atomic<bool> g_interrupted{false};

struct RunOptions {
  std::string manifest;
  std::string mode = "simulate";
  std::string acquisition = "sim";
  std::size_t batch_size = 64;
  int rounds = 4;
  double epsilon = 0.0;
  std::string predictor = "builtin";
  std::string predictor_command;
  double oracle_error_rate = 0.0;
  std::uint64_t seed = 7;
  std::string out = "alc_run";
  std::string residual = "components";
  bool expand_confirmed = true;
  std::string listen = "127.0.0.1:8080";
  double lease_seconds = 120.0;
  std::string static_dir;
  bool resume = false;
  bool dump_pool = false;
};

int cmd_validate(const std::string& manifest_path) {
  DatasetManifest m;
  try {
    m = load_manifest(manifest_path);
  } catch (const Error& e) {
    std::cerr << "alc validate: " << e.what() << "\n";
    return kExitUsage;
  }
  const auto report = validate_manifest(m);
  std::cout << report.to_json().dump(2) << "\n";
  return report.clean() ? kExitOk : kExitRuntime;
}

int cmd_synth(const SynthSpec& spec, const std::string& out) {
  const auto r = synthesize(spec, out);
  std::cout << r.manifest_path.string() << "\n";
  std::cerr << "wrote " << spec.images << " images, " << r.noisy_segments.size() << " noisy superpixels\n";
  return kExitOk;
}

void wait_for_probs(const fs::path& round_dir) {
  std::cerr << "alc: labels for this round are in " << (round_dir / "labels").string() << "\n"
            << "alc: write f32 [H, W, C] probability maps to " << (round_dir / "probs").string()
            << "/<image_id>.alct, then press Enter to continue\n";
  std::string line;
  std::getline(std::cin, line);
}

LoopConfig make_loop_config(const RunOptions& o) {
  LoopConfig cfg;
  cfg.batch_size = o.batch_size;
  cfg.rounds = o.rounds;
  const auto kind = parse_acquisition(o.acquisition, o.seed);
  if (!kind) throw Error(Errc::InvalidArgument, "unknown acquisition '" + o.acquisition + "'");
  cfg.acquisition = *kind;
  cfg.epsilon = o.epsilon;
  cfg.expand_confirmed = o.expand_confirmed;
  if (o.predictor == "external") {
    cfg.predictor.kind = PredictorConfig::External;
    if (!o.predictor_command.empty()) cfg.predictor.command = o.predictor_command;
    cfg.predictor.pause = wait_for_probs;
  } else if (o.predictor != "builtin") {
    throw Error(Errc::InvalidArgument, "predictor must be builtin or external");
  }
  cfg.oracle = {o.oracle_error_rate, o.seed};
  cfg.out_dir = o.out;
  cfg.dump_pool = o.dump_pool;
  cfg.residual = *parse_residual_policy(o.residual);
  cfg.validate();
  return cfg;
}

CorrectionSession open_session(const RunOptions& o) {
  const auto manifest = load_manifest(o.manifest);
  const auto report = validate_manifest(manifest);
  if (!report.clean()) {
    std::cerr << report.to_json().dump(2) << "\n";
    throw Error(Errc::ValidationFailed, "manifest has " + std::to_string(report.violations.size()) + " violations");
  }
  auto ds = load_dataset(manifest, *parse_residual_policy(o.residual));
  auto cfg = make_loop_config(o);
  if (o.resume) return CorrectionSession::resume(std::move(ds), std::move(cfg));
  return CorrectionSession(std::move(ds), std::move(cfg));
}

void print_summary(const CorrectionSession& s, const RunOptions& o) {
  std::cerr << "alc: finished after round " << s.round() << ": " << s.ledger().clicks_spent << " clicks, "
            << s.ledger().bits_spent << " bits\n";
  std::cout << (fs::path(o.out) / "corrected" / "manifest.json").string() << "\n";
}

int serve(CorrectionSession session, const RunOptions& o) {
  const auto colon = o.listen.rfind(':');
  if (colon == std::string::npos) throw Error(Errc::InvalidArgument, "--listen must be host:port");
  const std::string host = o.listen.substr(0, colon);
  const int port = std::stoi(o.listen.substr(colon + 1));

  ServiceOptions opts;
  opts.lease_seconds = o.lease_seconds;
  opts.static_dir = o.static_dir;
  AnnotationService service(std::move(session), opts);
  httplib::Server srv;
  service.mount(srv);
  if (!srv.bind_to_port(host, port)) {
    std::cerr << "alc run: address unavailable: " << o.listen << "\n";
    return kExitRuntime;
  }
  std::cerr << "alc: serving on http://" << o.listen << "/\n";
  std::thread worker([&] { srv.listen_after_bind(); });

  std::signal(SIGINT, [](int) { g_interrupted = true; });
  std::signal(SIGTERM, [](int) { g_interrupted = true; });
  while (!g_interrupted && !service.finished()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  if (service.finished()) {
    // Give clients a moment to fetch the final session state.
    std::this_thread::sleep_for(std::chrono::seconds(2));
  }
  srv.stop();
  worker.join();
  if (!service.finished()) {
    std::cerr << "alc: interrupted; resume from the last checkpoint with --resume\n";
    return kExitRuntime;
  }
  service.with_session([&](const CorrectionSession& s) {
    print_summary(s, o);
    return 0;
  });
  return kExitOk;
}

int cmd_run(const RunOptions& o) {
  auto session = open_session(o);
  if (o.mode == "serve") return serve(std::move(session), o);
  session.run_to_completion();
  print_summary(session, o);
  return kExitOk;
}

/// Final-state metrics recomputed from a run directory, plus the per-round
/// rows recorded while it ran.
int cmd_metrics(const std::string& run_dir) {
  const fs::path dir(run_dir);
  for (const char* f : {"run.json", "metrics.json", "query_log.jsonl"})
    if (!fs::exists(dir / f)) throw Error(Errc::MissingOutputs, (dir / f).string() + " not found");
  nlohmann::json run_info = nlohmann::json::parse(std::ifstream(dir / "run.json"));
  const auto manifest = load_manifest(run_info.at("manifest").get<std::string>());
  const auto ds = load_dataset(manifest);
  std::ifstream log_in(dir / "query_log.jsonl");
  const auto log = read_query_log(log_in);

  std::vector<LabelMap> corrected, pseudo, gt;
  std::vector<std::vector<bool>> selected;
  for (const auto& im : ds.images) {
    const auto lp = dir / "labels" / (im.image_id + ".alct");
    const auto sp = dir / "selected" / (im.image_id + ".alct");
    if (!fs::exists(lp) || !fs::exists(sp)) throw Error(Errc::MissingOutputs, "missing outputs for " + im.image_id);
    corrected.push_back(LabelMap::from_tensor(read_tensor(lp), im.image_id, LabelRole::Corrected));
    const auto mask = read_tensor(sp).values<std::uint8_t>();
    selected.emplace_back(mask.begin(), mask.end());
    pseudo.push_back(im.pseudo);
    if (im.gt) gt.push_back(*im.gt);
  }

  RoundMetrics final_row;
  final_row.round = log.empty() ? 0 : log.back().round;
  for (const auto& r : log) {
    QueryAnswer a = r.verdict == Verdict::Confirmed ? QueryAnswer::confirmed(r.query_id)
                                                    : QueryAnswer::corrected(r.query_id, *r.corrected_label);
    final_row.ledger = record_query(final_row.ledger, a, static_cast<int>(ds.labels.num_classes()));
  }
  final_row.ledger.clicks_limit = run_info.value("batch_size", 0) * run_info.value("rounds", 0);
  final_row.corrected_histogram = corrected_class_histogram(log);
  if (gt.size() == ds.images.size()) {
    final_row.detection = detection_report(std::span<const std::vector<bool>>(selected), pseudo, gt, ds.labels);
    final_row.data = iou_report(corrected, gt, ds.labels);
  }

  const nlohmann::json rounds = nlohmann::json::parse(std::ifstream(dir / "metrics.json"));
  std::ostringstream csv;
  csv << "round,clicks,bits,precision,recall,f1,data_accuracy,data_miou\n";
  auto cell = [](const nlohmann::json& v) { return v.is_null() ? std::string() : v.dump(); };
  for (const auto& r : rounds)
    csv << r.at("round") << ',' << r.at("clicks") << ',' << cell(r.at("bits")) << ',' << cell(r.at("precision"))
        << ',' << cell(r.at("recall")) << ',' << cell(r.at("f1")) << ',' << cell(r.at("data_accuracy")) << ','
        << cell(r.at("data_miou")) << '\n';
  write_text_file(dir / "metrics.csv", csv.str());

  std::cout << nlohmann::json{{"rounds", rounds}, {"final", round_metrics_to_json(final_row)}}.dump(2) << "\n";
  return kExitOk;
}

int cmd_cost(std::vector<int> classes, std::vector<double> ps) {
  if (classes.empty()) classes = {2, 3, 4, 8, 10, 19, 20, 50, 100, 256};
  if (ps.empty())
    for (int i = 0; i <= 10; ++i) ps.push_back(i / 10.0);
  std::cout << "L,p,classification_bits,correction_bits,cost_ratio,saving_rate\n";
  std::cout.precision(6);
  std::cout << std::fixed;
  for (int L : classes)
    for (double p : ps) {
      const double cls = cost::classification_cost(L);
      const double cor = cost::correction_cost(L, p);
      std::cout << L << ',' << p << ',' << cls << ',' << cor << ',' << cor / cls << ','
                << cost::cost_saving_rate(L, p) << '\n';
    }
  return kExitOk;
}

int cmd_export(const std::string& run_dir, const std::string& out) {
  const fs::path dir(run_dir);
  if (!fs::exists(dir / "run.json")) throw Error(Errc::MissingOutputs, (dir / "run.json").string() + " not found");
  nlohmann::json run_info = nlohmann::json::parse(std::ifstream(dir / "run.json"));
  const auto manifest = load_manifest(run_info.at("manifest").get<std::string>());
  const fs::path out_dir = fs::absolute(out);
  DatasetManifest m;
  m.class_names = manifest.class_names;
  m.ignore_id = manifest.ignore_id;
  for (const auto& e : manifest.images) {
    const auto src = dir / "labels" / (e.image_id + ".alct");
    if (!fs::exists(src)) throw Error(Errc::MissingOutputs, src.string() + " not found");
    ManifestImage x = e;
    auto rel = [&](const std::string& p) { return fs::relative(fs::absolute(manifest.resolve(p)), out_dir).string(); };
    x.image_path = rel(e.image_path);
    x.superpixel_path = rel(e.superpixel_path);
    if (e.gt_label_path) x.gt_label_path = rel(*e.gt_label_path);
    x.prob_path.reset();
    x.pseudo_label_path = "labels/" + e.image_id + ".alct";
    write_tensor(out_dir / x.pseudo_label_path, read_tensor(src));
    m.images.push_back(std::move(x));
  }
  save_manifest(out_dir / "manifest.json", m);
  std::cout << (out_dir / "manifest.json").string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active label correction for semantic-segmentation datasets"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML config file mirroring the flags (flags win)");

  std::string validate_manifest_path;
  auto* validate = app.add_subcommand("validate", "Check a dataset manifest and its tensors");
  validate->add_option("manifest", validate_manifest_path, "manifest.json")->required();

  SynthSpec synth_spec;
  std::string synth_out = "synth";
  auto* synth = app.add_subcommand("synth", "Generate a synthetic noisy-label dataset");
  synth->add_option("--out", synth_out, "output directory")->capture_default_str();
  synth->add_option("--images", synth_spec.images, "number of images N")->capture_default_str();
  synth->add_option("--height", synth_spec.height, "image height H")->capture_default_str();
  synth->add_option("--width", synth_spec.width, "image width W")->capture_default_str();
  synth->add_option("--classes", synth_spec.classes, "number of classes C")->capture_default_str();
  synth->add_option("--noise", synth_spec.noise, "fraction of superpixels with a flipped pseudo label")
      ->capture_default_str();
  synth->add_option("--grid", synth_spec.grid, "superpixel grid g (g x g cells per image)")->capture_default_str();
  synth->add_option("--seed", synth_spec.seed, "random seed")->capture_default_str();

  RunOptions ro;
  auto* run = app.add_subcommand("run", "Run the correction loop (simulate or serve)");
  run->add_option("--manifest", ro.manifest, "dataset manifest.json")->required();
  run->add_option("--mode", ro.mode, "simulate | serve")
      ->check(CLI::IsMember({"simulate", "serve"}))
      ->capture_default_str();
  run->add_option("--acquisition", ro.acquisition, "sim | lcil | cil | entropy | bvsb | random")
      ->check(CLI::IsMember({"sim", "lcil", "cil", "entropy", "bvsb", "random"}))
      ->capture_default_str();
  run->add_option("-B,--batch-size", ro.batch_size, "queries per round B")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  run->add_option("-T,--rounds", ro.rounds, "number of rounds T")->check(CLI::PositiveNumber)->capture_default_str();
  run->add_option("--epsilon", ro.epsilon, "expansion similarity threshold in [0, 1]")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  run->add_option("--predictor", ro.predictor, "builtin | external")
      ->check(CLI::IsMember({"builtin", "external"}))
      ->capture_default_str();
  run->add_option("--predictor-command", ro.predictor_command,
                  "external predictor command, invoked with the round directory as its argument");
  run->add_option("--oracle-error-rate", ro.oracle_error_rate, "simulated annotator error rate in [0, 1]")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  run->add_option("--seed", ro.seed, "seed for the oracle and random acquisition")->capture_default_str();
  run->add_option("-o,--out", ro.out, "output directory")->capture_default_str();
  run->add_option("--residual", ro.residual, "uncovered pixels: components | single | exclude")
      ->check(CLI::IsMember({"components", "single", "exclude"}))
      ->capture_default_str();
  run->add_option("--expand-confirmed", ro.expand_confirmed, "expand confirmed labels over their superpixel")
      ->capture_default_str();
  run->add_option("--listen", ro.listen, "serve mode: host:port")->capture_default_str();
  run->add_option("--lease-seconds", ro.lease_seconds, "serve mode: query lease duration")->capture_default_str();
  run->add_option("--static-dir", ro.static_dir, "serve mode: directory served at /");
  run->add_flag("--resume", ro.resume, "continue from the checkpoint in --out");
  run->add_flag("--dump-pool", ro.dump_pool, "write pool/round_NNN.csv each round");

  std::string metrics_dir;
  auto* metrics = app.add_subcommand("metrics", "Report metrics for a run directory");
  metrics->add_option("run_dir", metrics_dir, "run output directory")->required();

  std::vector<int> cost_classes;
  std::vector<double> cost_ps;
  auto* cost = app.add_subcommand("cost", "Print the correction vs classification cost table as CSV");
  cost->add_option("--classes", cost_classes, "class counts L (default: a standard sweep)")
      ->check(CLI::Range(2, 1 << 20));
  cost->add_option("--p", cost_ps, "confirmation probabilities (default: 0, 0.1, ..., 1)")->check(CLI::Range(0.0, 1.0));

  std::string export_dir, export_out;
  auto* exp = app.add_subcommand("export", "Export the corrected dataset of a run");
  exp->add_option("run_dir", export_dir, "run output directory")->required();
  exp->add_option("--out", export_out, "destination directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*validate) return cmd_validate(validate_manifest_path);
    if (*synth) return cmd_synth(synth_spec, synth_out);
    if (*run) return cmd_run(ro);
    if (*metrics) return cmd_metrics(metrics_dir);
    if (*cost) return cmd_cost(cost_classes, cost_ps);
    if (*exp) return cmd_export(export_dir, export_out);
  } catch (const Error& e) {
    std::cerr << "alc: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "alc: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
