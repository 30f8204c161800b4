#include "smartedge/bench.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/prctl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <list>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>

#include "json_io.hpp"
#include "smartedge/error.hpp"
#include "smartedge/pipeline.hpp"

namespace smartedge::bench {

using nlohmann::json;

namespace {

constexpr std::string_view kMetricNames[] = {"arbitration_ms", "latency_ms",  "execution_ms",
                                             "response_ms",    "bytes_sent", "bytes_received"};

// Identical across presets so that only topology differs.
const std::vector<double> kEdgeLoadProfile = {0.35, 0.55, 0.25, 0.45, 0.30};
const std::vector<double> kCloudLoadProfile = {0.05, 0.10, 0.08};

NodeSpec spec(std::string id, node::Role role, int executors = 1, std::vector<double> profile = {}) {
  return {std::move(id), role, executors, std::move(profile)};
}

void mesh(ScenarioConfig& cfg, const std::vector<std::string>& ids, double ms, int hops) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i + 1; j < ids.size(); ++j) cfg.links.push_back({ids[i], ids[j], ms, hops});
  }
}

}  // namespace

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (name.empty()) fail("scenario needs a name");
  std::size_t gateways = 0, masters = 0;
  for (const auto& n : nodes) {
    if (n.node_id.empty()) fail("node spec without id");
    if (n.role == node::Role::Gateway) ++gateways;
    if (n.role == node::Role::Master) ++masters;
    if (n.local_executors < 1) fail(n.node_id + ": local_executors must be >= 1");
  }
  if (gateways < 1) fail("scenario needs at least one gateway");
  if (masters != 1) fail("scenario needs exactly one master");
  for (const auto& l : links) {
    if (!std::isfinite(l.one_way_ms) || l.one_way_ms < 0.0 || l.hops < 0) {
      fail("link " + l.a + "-" + l.b + " has a negative delay");
    }
  }
  if (repetitions < 1) fail("repetitions must be >= 1");
  if (rows < 1) fail("rows must be >= 1");
  if (heartbeat_interval_ms <= 0) fail("heartbeat_interval_ms must be positive");
  if (parse_combo(combo).size() < 2) fail("combo needs at least 2 members");
}

double ScenarioConfig::delay_ms(const std::string& from, const std::string& to) const {
  for (const auto& l : links) {
    if ((l.a == from && l.b == to) || (l.a == to && l.b == from)) return l.total_ms();
  }
  return 0.0;
}

const NodeSpec& ScenarioConfig::gateway() const {
  for (const auto& n : nodes) {
    if (n.role == node::Role::Gateway) return n;
  }
  throw Error(ErrorCode::InvalidConfig, "scenario has no gateway");
}

const NodeSpec& ScenarioConfig::master() const {
  for (const auto& n : nodes) {
    if (n.role == node::Role::Master) return n;
  }
  throw Error(ErrorCode::InvalidConfig, "scenario has no master");
}

std::vector<std::string> preset_names() { return {"a_bcd", "a_b", "a_cloud_bcd"}; }

ScenarioConfig preset(std::string_view name) {
  ScenarioConfig cfg;
  cfg.name = std::string(name);
  if (name == "a_bcd") {
    cfg.nodes = {spec("user", node::Role::Gateway), spec("master", node::Role::Master, 1),
                 spec("actor1", node::Role::Worker, 1, kEdgeLoadProfile),
                 spec("actor2", node::Role::Worker, 1, kEdgeLoadProfile)};
    mesh(cfg, {"user", "master", "actor1", "actor2"}, 5.0, 1);
  } else if (name == "a_b") {
    cfg.nodes = {spec("user", node::Role::Gateway), spec("master", node::Role::Master, 3)};
    mesh(cfg, {"user", "master"}, 5.0, 1);
  } else if (name == "a_cloud_bcd") {
    cfg.nodes = {spec("user", node::Role::Gateway), spec("master", node::Role::Master, 1),
                 spec("actor1", node::Role::Worker, 1, kCloudLoadProfile),
                 spec("actor2", node::Role::Worker, 1, kCloudLoadProfile)};
    for (const auto* peer : {"master", "actor1", "actor2"}) cfg.links.push_back({"user", peer, 20.0, 2});
    mesh(cfg, {"master", "actor1", "actor2"}, 0.0, 1);
  } else {
    throw Error(ErrorCode::UnknownPreset, "'" + std::string(name) + "'");
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Child processes

namespace {

struct Child {
  std::string node_id;
  pid_t pid = -1;
  std::filesystem::path log;
  std::filesystem::path ready;
  std::optional<int> status;  // set once reaped
};

std::string describe_status(int status) {
  if (WIFEXITED(status)) return "exit code " + std::to_string(WEXITSTATUS(status));
  if (WIFSIGNALED(status)) return "signal " + std::to_string(WTERMSIG(status));
  return "status " + std::to_string(status);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string tail(const std::string& text, std::size_t max_chars = 400) {
  return text.size() <= max_chars ? text : text.substr(text.size() - max_chars);
}

class Cluster {
 public:
  ~Cluster() { teardown(); }

  Child& launch(const std::filesystem::path& binary, const std::string& subcommand,
                const node::NodeConfig& cfg, const std::filesystem::path& dir) {
    Child c;
    c.node_id = cfg.node_id;
    c.log = dir / (cfg.node_id + ".log");
    c.ready = cfg.ready_file;
    const auto config_path = dir / (cfg.node_id + ".json");
    {
      std::ofstream out(config_path, std::ios::trunc);
      out << node::config_to_json(cfg);
      if (!out) throw Error(ErrorCode::WriteFailure, config_path.string());
    }
    std::filesystem::remove(c.ready);

    const std::string bin = binary.string();
    const std::string cfg_arg = config_path.string();
    const std::string log_path = c.log.string();
    const pid_t parent = ::getpid();
    const pid_t pid = ::fork();
    if (pid < 0) throw Error(ErrorCode::NodeCrash, cfg.node_id + ": fork failed");
    if (pid == 0) {
      ::prctl(PR_SET_PDEATHSIG, SIGKILL);
      if (::getppid() != parent) ::_exit(127);
      const int fd = ::open(log_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
      if (fd >= 0) {
        ::dup2(fd, STDOUT_FILENO);
        ::dup2(fd, STDERR_FILENO);
        ::close(fd);
      }
      const char* argv[] = {bin.c_str(), subcommand.c_str(), "--config", cfg_arg.c_str(), nullptr};
      ::execv(bin.c_str(), const_cast<char* const*>(argv));
      ::_exit(127);
    }
    c.pid = pid;
    children_.push_back(std::move(c));
    return children_.back();
  }

  // Returns the ready file's content (the node's address).
  std::string wait_ready(Child& c, std::int64_t timeout_ms) {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    while (std::chrono::steady_clock::now() < deadline) {
      if (std::filesystem::exists(c.ready)) {
        auto text = read_text(c.ready);
        while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
        if (!text.empty()) return text;
      }
      if (auto dead = reap(c)) throw startup_failure(c, *dead);
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    throw Error(ErrorCode::NodeCrash, c.node_id + ": not ready after " +
                                          std::to_string(timeout_ms) + " ms; log: " +
                                          tail(read_text(c.log)));
  }

  // First child that has exited, as "id (exit info)".
  std::optional<std::string> crashed() {
    for (auto& c : children_) {
      if (auto dead = reap(c)) return c.node_id + " (" + *dead + ")";
    }
    return std::nullopt;
  }

  void teardown() {
    for (auto& c : children_) {
      if (!c.status) ::kill(c.pid, SIGTERM);
    }
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(3);
    for (auto& c : children_) {
      while (!c.status && std::chrono::steady_clock::now() < deadline) {
        if (!reap(c)) std::this_thread::sleep_for(std::chrono::milliseconds(10));
      }
      if (!c.status) {
        ::kill(c.pid, SIGKILL);
        int status = 0;
        ::waitpid(c.pid, &status, 0);
        c.status = status;
      }
    }
    children_.clear();
  }

 private:
  std::optional<std::string> reap(Child& c) {
    if (c.status) return describe_status(*c.status);
    int status = 0;
    if (::waitpid(c.pid, &status, WNOHANG) == c.pid) {
      c.status = status;
      return describe_status(status);
    }
    return std::nullopt;
  }

  Error startup_failure(const Child& c, const std::string& how) {
    const auto log = read_text(c.log);
    if (log.find("BindFailure") != std::string::npos) {
      return Error(ErrorCode::PortConflict, c.node_id + " could not bind: " + tail(log));
    }
    return Error(ErrorCode::NodeCrash, c.node_id + " exited during startup (" + how + "): " +
                                           tail(log));
  }

  std::list<Child> children_;
};

node::NodeConfig node_config(const ScenarioConfig& sc, const NodeSpec& n, const RunOptions& o) {
  node::NodeConfig cfg;
  cfg.role = n.role;
  cfg.node_id = n.node_id;
  cfg.master_id = sc.master().node_id;
  cfg.listen_address = "127.0.0.1:0";
  cfg.shared_secret = o.shared_secret;
  cfg.heartbeat_interval_ms = sc.heartbeat_interval_ms;
  cfg.local_executors = n.local_executors;
  cfg.load_profile = n.load_profile;
  for (const auto& other : sc.nodes) {
    const double d = sc.delay_ms(n.node_id, other.node_id);
    if (other.node_id != n.node_id && d > 0.0) cfg.hop_delay_ms[other.node_id] = d;
  }
  return cfg;
}

struct JobData {
  std::string csv;
  Labels labels;
};

JobData job_rows(const std::filesystem::path& data_csv, std::size_t rows, std::uint64_t seed) {
  const auto ds = drop_missing(load_csv(data_csv));
  const auto sp = split(ds, SplitRatios{}, seed);
  std::vector<std::size_t> order = sp.test_idx;
  order.insert(order.end(), sp.val_idx.begin(), sp.val_idx.end());
  order.insert(order.end(), sp.train_idx.begin(), sp.train_idx.end());
  order.resize(std::min(rows, order.size()));
  const auto all = ds.features();
  const auto labels = ds.labels();
  return {to_feature_csv(all.select_rows(order)), select_labels(labels, order)};
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& sc, const RunOptions& options) {
  sc.validate();
  std::filesystem::create_directories(options.work_dir);
  const auto dir = std::filesystem::absolute(options.work_dir);

  std::filesystem::path model = options.model;
  if (model.empty()) {
    PipelineOptions po;
    po.combo = parse_combo(sc.combo);
    po.mode = sc.mode;
    po.seed = sc.seed;
    model = dir / "model.json";
    save_bundle(run_training_pipeline(load_csv(options.data_csv), po).bundle, model);
  }
  const auto jobs = job_rows(options.data_csv, sc.rows, sc.seed);

  ScenarioResult result;
  result.scenario = sc.name;
  Cluster cluster;

  std::string cloud_address;
  if (sc.cloud_enabled) {
    node::NodeConfig cloud;
    cloud.role = node::Role::Worker;
    cloud.node_id = "cloud";
    cloud.cloud_node = true;
    cloud.shared_secret = options.shared_secret;
    cloud.ready_file = (dir / "cloud.ready").string();
    auto& child = cluster.launch(options.binary, "worker", cloud, dir);
    cloud_address = cluster.wait_ready(child, options.startup_timeout_ms);
  }

  auto master_cfg = node_config(sc, sc.master(), options);
  master_cfg.cloud_enabled = sc.cloud_enabled;
  master_cfg.cloud_address = cloud_address;
  master_cfg.ready_file = (dir / (master_cfg.node_id + ".ready")).string();
  auto& master_child = cluster.launch(options.binary, "master", master_cfg, dir);
  const auto master_address = cluster.wait_ready(master_child, options.startup_timeout_ms);

  for (const auto& n : sc.nodes) {
    if (n.role != node::Role::Worker) continue;
    auto cfg = node_config(sc, n, options);
    cfg.master_address = master_address;
    cfg.ready_file = (dir / (cfg.node_id + ".ready")).string();
    auto& child = cluster.launch(options.binary, "worker", cfg, dir);
    cluster.wait_ready(child, options.startup_timeout_ms);
  }

  auto gateway = node_config(sc, sc.gateway(), options);
  gateway.master_address = master_address;

  std::vector<Prediction> predictions;
  Labels truth;
  for (int rep = 0; rep < sc.repetitions; ++rep) {
    if (auto dead = cluster.crashed()) {
      result.failure = std::string(to_string(ErrorCode::NodeCrash)) + ": " + *dead;
      break;
    }
    try {
      auto outcome = node::submit_job(gateway, jobs.csv, model.string(),
                                      sc.name + "-" + std::to_string(rep + 1));
      outcome.timing.scenario = sc.name;
      result.records.push_back(outcome.timing);
      predictions.insert(predictions.end(), outcome.predictions.begin(), outcome.predictions.end());
      truth.insert(truth.end(), jobs.labels.begin(), jobs.labels.end());
    } catch (const Error& e) {
      result.failure = e.what();
      if (auto dead = cluster.crashed()) {
        result.failure = std::string(to_string(ErrorCode::NodeCrash)) + ": " + *dead;
      }
      break;
    }
  }
  cluster.teardown();
  result.complete = static_cast<int>(result.records.size()) == sc.repetitions;
  if (!predictions.empty()) result.eval = evaluate(predictions, truth);
  return result;
}

// ---------------------------------------------------------------------------
// Reporting

Stats describe(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyIndexSet, "no values to describe");
  std::sort(values.begin(), values.end());
  const auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  Stats s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  s.median = quantile(0.5);
  s.p95 = quantile(0.95);
  return s;
}

namespace {

double metric(const TimingRecord& r, std::string_view name) {
  if (name == "arbitration_ms") return r.arbitration_ms;
  if (name == "latency_ms") return r.latency_ms;
  if (name == "execution_ms") return r.execution_ms;
  if (name == "response_ms") return r.response_ms;
  if (name == "bytes_sent") return static_cast<double>(r.bytes_sent);
  return static_cast<double>(r.bytes_received);
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? comma : comma - start));
    if (comma == std::string_view::npos) return out;
    start = comma + 1;
  }
}

double to_double(std::string_view field, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw Error(ErrorCode::MalformedRow, "bad number '" + std::string(field) + "'", line);
  }
  return v;
}

std::uint64_t to_count(std::string_view field, std::size_t line) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw Error(ErrorCode::MalformedRow, "bad count '" + std::string(field) + "'", line);
  }
  return v;
}

}  // namespace

Summary summarize(const std::vector<TimingRecord>& records) {
  Summary out;
  std::vector<std::string> order;
  std::map<std::string, std::vector<const TimingRecord*>> groups;
  for (const auto& r : records) {
    if (!groups.count(r.scenario)) order.push_back(r.scenario);
    groups[r.scenario].push_back(&r);
  }
  for (const auto& name : order) {
    ScenarioSummary s;
    s.scenario = name;
    s.jobs = groups[name].size();
    for (auto m : kMetricNames) {
      std::vector<double> values;
      for (const auto* r : groups[name]) values.push_back(metric(*r, m));
      s.metrics[std::string(m)] = describe(std::move(values));
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string to_records_csv(const std::vector<TimingRecord>& records) {
  std::string out(kRecordsHeader);
  out += '\n';
  for (const auto& r : records) {
    out += r.job_id + ',' + r.scenario + ',' + format_double(r.arbitration_ms) + ',' +
           format_double(r.latency_ms) + ',' + format_double(r.execution_ms) + ',' +
           format_double(r.response_ms) + ',' + std::to_string(r.bytes_sent) + ',' +
           std::to_string(r.bytes_received) + '\n';
  }
  return out;
}

std::vector<TimingRecord> parse_records_csv(std::string_view text) {
  std::vector<TimingRecord> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != kRecordsHeader) throw Error(ErrorCode::MalformedRow, "unexpected header", 1);
      continue;
    }
    const auto f = split_commas(line);
    if (f.size() != 8) throw Error(ErrorCode::MalformedRow, "expected 8 fields", line_no);
    TimingRecord r;
    r.job_id = std::string(f[0]);
    r.scenario = std::string(f[1]);
    r.arbitration_ms = to_double(f[2], line_no);
    r.latency_ms = to_double(f[3], line_no);
    r.execution_ms = to_double(f[4], line_no);
    r.response_ms = to_double(f[5], line_no);
    r.bytes_sent = to_count(f[6], line_no);
    r.bytes_received = to_count(f[7], line_no);
    out.push_back(std::move(r));
  }
  return out;
}

std::string summary_to_json(const Summary& summary) {
  json j = json::array();
  for (const auto& s : summary) {
    json metrics = json::object();
    for (const auto& [name, st] : s.metrics) {
      metrics[name] = {{"mean", st.mean}, {"median", st.median}, {"p95", st.p95}};
    }
    j.push_back({{"scenario", s.scenario}, {"jobs", s.jobs}, {"metrics", std::move(metrics)}});
  }
  return j.dump(2) + "\n";
}

std::string format_summary(const Summary& summary) {
  std::ostringstream out;
  out << std::left << std::setw(14) << "scenario" << std::setw(16) << "metric" << std::right
      << std::setw(12) << "mean" << std::setw(12) << "median" << std::setw(12) << "p95" << '\n';
  out << std::fixed << std::setprecision(3);
  for (const auto& s : summary) {
    for (auto m : kMetricNames) {
      const auto& st = s.metrics.at(std::string(m));
      out << std::left << std::setw(14) << s.scenario << std::setw(16) << m << std::right
          << std::setw(12) << st.mean << std::setw(12) << st.median << std::setw(12) << st.p95
          << '\n';
    }
  }
  return out.str();
}

Summary report(const std::vector<TimingRecord>& records, const std::filesystem::path& out_dir) {
  if (records.empty()) throw Error(ErrorCode::WriteFailure, "no records to report");
  auto summary = summarize(records);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  auto write = [](const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    out.flush();
    if (!out) throw Error(ErrorCode::WriteFailure, path.string());
  };
  write(out_dir / "records.csv", to_records_csv(records));
  write(out_dir / "summary.json", summary_to_json(summary));
  return summary;
}

}  // namespace smartedge::bench
