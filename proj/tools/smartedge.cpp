// smartedge: preprocess, train, predict, run nodes, and benchmark scenarios.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <unistd.h>

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "smartedge/bench.hpp"
#include "smartedge/dataset.hpp"
#include "smartedge/error.hpp"
#include "smartedge/node.hpp"
#include "smartedge/pipeline.hpp"

namespace fs = std::filesystem;
using namespace smartedge;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) { g_stop = 1; }

void install_signal_handlers() {
  struct sigaction sa {};
  sa.sa_handler = on_signal;
  sigemptyset(&sa.sa_mask);
  sigaction(SIGINT, &sa, nullptr);
  sigaction(SIGTERM, &sa, nullptr);
}

bool is_usage_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownColumn:
    case ErrorCode::BadK:
    case ErrorCode::BadRatios:
    case ErrorCode::ArityMismatch:
    case ErrorCode::MalformedRow:
    case ErrorCode::UnknownPreset:
    case ErrorCode::InvalidConfig:
      return true;
    default:
      return false;
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.flush();
  if (!out) throw Error(ErrorCode::WriteFailure, path.string());
}

void print_report(std::ostream& out, const std::string& title, const EvalReport& r) {
  char line[160];
  std::snprintf(line, sizeof line,
                "%-11s accuracy %.4f  precision %.4f  recall %.4f  f1 %.4f  auc %.4f", title.c_str(),
                r.accuracy, r.precision, r.recall, r.f_measure, r.auc);
  out << line << "  (tp " << r.confusion.tp << " fp " << r.confusion.fp << " tn "
      << r.confusion.tn << " fn " << r.confusion.fn << ")\n";
}

// Repeated "peer=ms" flags.
std::map<std::string, double> parse_delays(const std::vector<std::string>& items) {
  std::map<std::string, double> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(ErrorCode::InvalidConfig, "delay '" + item + "' is not peer=ms");
    }
    try {
      std::size_t used = 0;
      const double ms = std::stod(item.substr(eq + 1), &used);
      if (used != item.size() - eq - 1) throw std::invalid_argument(item);
      out[item.substr(0, eq)] = ms;
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::InvalidConfig, "delay '" + item + "' is not peer=ms");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

struct PreprocessArgs {
  std::string in;
  std::string out;
  std::vector<std::string> drop_cols = default_missing_columns();
};

int run_preprocess(const PreprocessArgs& a) {
  for (const auto& c : a.drop_cols) {
    if (!find_feature(c)) throw Error(ErrorCode::UnknownColumn, "'" + c + "'");
  }
  std::error_code ec;
  if (fs::weakly_canonical(a.in, ec) == fs::weakly_canonical(a.out, ec) || a.in == a.out) {
    throw Error(ErrorCode::InvalidConfig, "--out must differ from --in (no in-place rewrite)");
  }
  const auto raw = load_csv(a.in);
  const auto kept = drop_missing(raw, a.drop_cols);
  write_csv(kept, a.out);
  std::cout << "rows before: " << raw.size() << "\n"
            << "rows after:  " << kept.size() << " (" << kept.count_label(1) << " positive, "
            << kept.count_label(0) << " negative)\n";
  return kExitOk;
}

struct TrainArgs {
  std::string data;
  std::string combo = "rf-svm-lr";
  std::string mode = "hard";
  std::uint64_t seed = 0;
  std::string out;
  bool whole_data = false;
  long long rfe_k = kFeatureCount;
};

int run_train(const TrainArgs& a) {
  PipelineOptions o;
  o.combo = parse_combo(a.combo);
  const auto mode = parse_voting_mode(a.mode);
  if (!mode) throw Error(ErrorCode::InvalidConfig, "--mode must be hard or soft");
  o.mode = *mode;
  if (a.rfe_k < 1 || a.rfe_k > static_cast<long long>(kFeatureCount)) {
    throw Error(ErrorCode::BadK, "--rfe-k must lie in [1, 8], got " + std::to_string(a.rfe_k));
  }
  o.rfe_k = static_cast<std::size_t>(a.rfe_k);
  o.seed = a.seed;
  o.whole_data = a.whole_data;

  const auto result = run_training_pipeline(load_csv(a.data), o);
  save_bundle(result.bundle, a.out);

  std::cout << "ensemble " << result.bundle.ensemble.combo_name << " ("
            << to_string(result.bundle.ensemble.mode) << " voting, "
            << (a.whole_data ? "whole-data" : "sharded") << ", seed " << a.seed << ")\n";
  std::cout << "features";
  for (auto i : result.bundle.mask.selected) std::cout << ' ' << feature_names()[i];
  std::cout << '\n';
  print_report(std::cout, "train", result.train);
  print_report(std::cout, "validation", result.validation);
  print_report(std::cout, "test", result.test);
  std::cout << "model written to " << a.out << '\n';
  return kExitOk;
}

struct PredictArgs {
  std::string model;
  std::string in;
  std::string out;
};

int run_predict(const PredictArgs& a) {
  const auto bundle = load_bundle(a.model);
  const auto table = parse_feature_csv(read_file(a.in));
  const auto preds = bundle.predict_raw(table.features);

  std::string csv = "label,probability\n";
  for (const auto& p : preds) csv += std::to_string(p.label) + "," + format_double(p.probs[1]) + "\n";
  if (!a.out.empty()) {
    write_file(a.out, csv);
  } else {
    std::cout << csv;
  }
  if (table.labels && !preds.empty()) {
    const auto report = evaluate(preds, *table.labels);
    char line[96];
    std::snprintf(line, sizeof line, "accuracy %.6f over %zu rows", report.accuracy, preds.size());
    (a.out.empty() ? std::cerr : std::cout) << line << '\n';
  }
  if (!a.out.empty()) std::cout << preds.size() << " predictions written to " << a.out << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Node roles

struct NodeArgs {
  std::string config;
  std::string listen;
  std::string master;
  std::string node_id;
  std::string master_id;
  double threshold = 0.8;
  bool cloud = false;
  std::string cloud_address;
  long long heartbeat_ms = 500;
  std::string secret;
  int local_executors = 1;
  std::vector<double> load_profile;
  std::vector<std::string> delays;
  std::string ready_file;
  long long timeout_ms = node::kDefaultTimeoutMs;
  // gateway
  std::string in;
  std::string model;
  std::string job_id;
  std::string out;
  bool inline_model = false;
};

struct FlagSet {
  CLI::App* app;
  bool given(const std::string& name) const {
    const auto* opt = app->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
  }
};

node::NodeConfig resolve_config(node::Role role, const NodeArgs& a, const FlagSet& f) {
  node::NodeConfig cfg;
  cfg.role = role;
  cfg.node_id = role == node::Role::Master   ? "master"
                : role == node::Role::Gateway ? "gateway"
                                              : "worker-" + std::to_string(::getpid());
  if (!a.config.empty()) cfg = node::load_config(a.config, cfg);
  cfg.role = role;
  node::apply_env_overrides(cfg);
  if (f.given("--listen")) cfg.listen_address = a.listen;
  if (f.given("--master")) cfg.master_address = a.master;
  if (f.given("--node-id")) cfg.node_id = a.node_id;
  if (f.given("--master-id")) cfg.master_id = a.master_id;
  if (f.given("--threshold")) cfg.heavy_load_threshold = a.threshold;
  if (f.given("--cloud-address")) {
    cfg.cloud_address = a.cloud_address;
    cfg.cloud_enabled = true;
  }
  if (f.given("--cloud")) cfg.cloud_node = a.cloud;
  if (f.given("--heartbeat-ms")) cfg.heartbeat_interval_ms = a.heartbeat_ms;
  if (f.given("--secret")) cfg.shared_secret = a.secret;
  if (f.given("--local-executors")) cfg.local_executors = a.local_executors;
  if (f.given("--load-profile")) cfg.load_profile = a.load_profile;
  if (f.given("--delay")) {
    for (const auto& [peer, ms] : parse_delays(a.delays)) cfg.hop_delay_ms[peer] = ms;
  }
  if (f.given("--ready-file")) cfg.ready_file = a.ready_file;
  if (f.given("--timeout-ms")) cfg.timeout_ms = a.timeout_ms;
  cfg.validate();
  return cfg;
}

void wait_for_signal(const std::function<bool()>& failed = {}) {
  while (!g_stop) {
    if (failed && failed()) return;
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

int run_master(const node::NodeConfig& cfg) {
  install_signal_handlers();
  node::Master master(cfg);
  master.start();
  std::cout << "master " << cfg.node_id << " listening on " << master.address().to_string()
            << std::endl;
  wait_for_signal();
  master.stop();
  return kExitOk;
}

int run_worker(const node::NodeConfig& cfg) {
  install_signal_handlers();
  node::Worker worker(cfg);
  worker.start();
  std::cout << "worker " << cfg.node_id << " listening on " << worker.address().to_string()
            << std::endl;
  wait_for_signal([&] { return worker.failed(); });
  const bool failed = worker.failed();
  worker.stop();
  if (failed) {
    std::cerr << "error: " << to_string(ErrorCode::MasterUnreachable) << ": lost the master\n";
    return kExitFailure;
  }
  return kExitOk;
}

int run_gateway(const node::NodeConfig& cfg, const NodeArgs& a) {
  const auto csv = read_file(a.in);
  const auto job_id = a.job_id.empty() ? cfg.node_id + "-" + std::to_string(::getpid()) : a.job_id;
  const auto outcome = a.inline_model ? node::submit_job_inline(cfg, csv, read_file(a.model), job_id)
                                      : node::submit_job(cfg, csv, a.model, job_id);
  std::string out = "label,probability\n";
  for (const auto& p : outcome.predictions) {
    out += std::to_string(p.label) + "," + format_double(p.probs[1]) + "\n";
  }
  if (!a.out.empty()) {
    write_file(a.out, out);
  } else {
    std::cout << out;
  }
  const auto& t = outcome.timing;
  char line[256];
  std::snprintf(line, sizeof line,
                "job %s placed %s on %s%s: arbitration %.3f ms, latency %.3f ms, execution "
                "%.3f ms, response %.3f ms, %llu bytes sent, %llu bytes received",
                t.job_id.c_str(), t.decision.c_str(), t.worker_id.c_str(),
                outcome.placement.via_cloud ? " via cloud" : "", t.arbitration_ms, t.latency_ms,
                t.execution_ms, t.response_ms, static_cast<unsigned long long>(t.bytes_sent),
                static_cast<unsigned long long>(t.bytes_received));
  (a.out.empty() ? std::cerr : std::cout) << line << '\n';
  return kExitOk;
}

struct BenchArgs {
  std::string preset;
  int reps = 30;
  std::string out = "bench-out";
  std::string data = "data/pima-indians-diabetes.csv";
  std::string model;
  long long rows = 100;
  std::uint64_t seed = 7;
};

int run_bench(const BenchArgs& a, const FlagSet& f) {
  auto sc = bench::preset(a.preset);
  if (f.given("--reps")) sc.repetitions = a.reps;
  if (f.given("--rows")) sc.rows = static_cast<std::size_t>(std::max<long long>(a.rows, 0));
  if (f.given("--seed")) sc.seed = a.seed;
  sc.validate();

  bench::RunOptions o;
  o.binary = fs::read_symlink("/proc/self/exe");
  o.work_dir = fs::path(a.out) / (sc.name + "-nodes");
  o.data_csv = a.data;
  o.model = a.model;
  std::cout << "running " << sc.name << ": " << sc.process_count() << " processes, "
            << sc.repetitions << " jobs of " << sc.rows << " rows" << std::endl;
  const auto result = bench::run_scenario(sc, o);
  if (!result.records.empty()) {
    const auto summary = bench::report(result.records, fs::path(a.out) / sc.name);
    std::cout << bench::format_summary(summary);
    print_report(std::cout, "predictions", result.eval);
    std::cout << "records written to " << (fs::path(a.out) / sc.name / "records.csv").string()
              << '\n';
  }
  std::cout << result.records.size() << "/" << sc.repetitions << " jobs completed\n";
  if (!result.complete) {
    std::cerr << "error: " << result.failure << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

void add_node_flags(CLI::App* cmd, NodeArgs& a, node::Role role) {
  cmd->add_option("--config", a.config, "JSON node configuration")->check(CLI::ExistingFile);
  cmd->add_option("--node-id", a.node_id, "Node identifier");
  cmd->add_option("--secret", a.secret, "Shared secret for message tags");
  cmd->add_option("--delay", a.delays, "One-way delay to a peer, peer=ms (repeatable)");
  cmd->add_option("--timeout-ms", a.timeout_ms, "Request timeout");
  cmd->add_option("--master-id", a.master_id, "Node id of the master");
  if (role != node::Role::Gateway) {
    cmd->add_option("--listen", a.listen, "host:port to listen on (port 0 picks one)");
    cmd->add_option("--heartbeat-ms", a.heartbeat_ms, "Heartbeat interval");
    cmd->add_option("--ready-file", a.ready_file, "Write the bound address here once serving");
  }
  if (role != node::Role::Master) cmd->add_option("--master", a.master, "Master host:port");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Edge inference orchestration: ensemble diabetes models served by a master and workers"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "smartedge 0.1.0");

  PreprocessArgs pre;
  auto* preprocess = app.add_subcommand("preprocess", "Drop rows with missing measurements");
  preprocess->add_option("--in", pre.in, "Input CSV")->required()->check(CLI::ExistingFile);
  preprocess->add_option("--out", pre.out, "Output CSV")->required();
  preprocess->add_option("--drop-cols", pre.drop_cols, "Columns where 0 means missing")
      ->delimiter(',');

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train a voting ensemble");
  train->add_option("--data", tr.data, "Training CSV")->required()->check(CLI::ExistingFile);
  train->add_option("--combo", tr.combo, "Members joined by '-', e.g. svm-dt-lr")->capture_default_str();
  train->add_option("--mode", tr.mode, "hard or soft")->capture_default_str();
  train->add_option("--seed", tr.seed, "Seed for split, shards and members")->capture_default_str();
  train->add_option("--out", tr.out, "Model file")->required();
  train->add_flag("--whole-data", tr.whole_data, "Train every member on the full training split");
  train->add_option("--rfe-k", tr.rfe_k, "Features kept by recursive elimination")->capture_default_str();

  PredictArgs pr;
  auto* predict = app.add_subcommand("predict", "Predict with a trained model");
  predict->add_option("--model", pr.model, "Model file")->required()->check(CLI::ExistingFile);
  predict->add_option("--in", pr.in, "Feature CSV (8 columns, or 9 with Outcome)")
      ->required()
      ->check(CLI::ExistingFile);
  predict->add_option("--out", pr.out, "Prediction CSV");

  NodeArgs ma;
  auto* master = app.add_subcommand("master", "Run the master (broker) with local executors");
  add_node_flags(master, ma, node::Role::Master);
  master->add_option("--threshold", ma.threshold, "Heavy-load cpu threshold in (0, 1]");
  master->add_option("--cloud-address", ma.cloud_address, "Cloud executor host:port");
  master->add_option("--local-executors", ma.local_executors, "Co-located executors");

  NodeArgs wa;
  auto* worker = app.add_subcommand("worker", "Run a worker (or, with --cloud, the cloud executor)");
  add_node_flags(worker, wa, node::Role::Worker);
  worker->add_flag("--cloud", wa.cloud, "Serve as the cloud tier; do not register");
  worker->add_option("--load-profile", wa.load_profile, "Scripted cpu loads, cycled")->delimiter(',');

  NodeArgs ga;
  auto* gateway = app.add_subcommand("gateway", "Submit one job and print its predictions");
  add_node_flags(gateway, ga, node::Role::Gateway);
  gateway->add_option("--in", ga.in, "Feature CSV")->required()->check(CLI::ExistingFile);
  gateway->add_option("--model", ga.model, "Model file")->required()->check(CLI::ExistingFile);
  gateway->add_option("--job-id", ga.job_id, "Job identifier");
  gateway->add_option("--out", ga.out, "Prediction CSV");
  gateway->add_flag("--inline", ga.inline_model, "Send the model document with the job");

  BenchArgs ba;
  auto* bench_cmd = app.add_subcommand("bench", "Run a deployment scenario");
  bench_cmd->add_option("--preset", ba.preset, "a_bcd, a_b or a_cloud_bcd")->required();
  bench_cmd->add_option("--reps", ba.reps, "Jobs to submit")->capture_default_str();
  bench_cmd->add_option("--out", ba.out, "Output directory")->capture_default_str();
  bench_cmd->add_option("--data", ba.data, "Dataset CSV")->capture_default_str();
  bench_cmd->add_option("--model", ba.model, "Model file (trained when omitted)");
  bench_cmd->add_option("--rows", ba.rows, "Rows per job")->capture_default_str();
  bench_cmd->add_option("--seed", ba.seed, "Seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*preprocess) return run_preprocess(pre);
    if (*train) return run_train(tr);
    if (*predict) return run_predict(pr);
    if (*master) return run_master(resolve_config(node::Role::Master, ma, {master}));
    if (*worker) return run_worker(resolve_config(node::Role::Worker, wa, {worker}));
    if (*gateway) return run_gateway(resolve_config(node::Role::Gateway, ga, {gateway}), ga);
    if (*bench_cmd) return run_bench(ba, {bench_cmd});
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_usage_error(e.code()) ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
