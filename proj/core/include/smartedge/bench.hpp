#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "smartedge/ensemble.hpp"
#include "smartedge/models.hpp"
#include "smartedge/node.hpp"
#include "smartedge/timing.hpp"

namespace smartedge::bench {

struct NodeSpec {
  std::string node_id;
  node::Role role = node::Role::Worker;
  int local_executors = 1;  // master only: co-located actors
  std::vector<double> load_profile;
};

// Symmetric link; each send on it sleeps one_way_ms * hops first.
struct LinkDelay {
  std::string a;
  std::string b;
  double one_way_ms = 0.0;
  int hops = 1;
  double total_ms() const noexcept { return one_way_ms * hops; }
};

struct ScenarioConfig {
  std::string name;
  std::vector<NodeSpec> nodes;  // one OS process each; the gateway is the runner itself
  std::vector<LinkDelay> links;
  bool cloud_enabled = false;
  std::string combo = "rf-svm-lr";
  VotingMode mode = VotingMode::Hard;
  int repetitions = 30;
  std::uint64_t seed = 7;
  std::size_t rows = 100;
  std::int64_t heartbeat_interval_ms = 200;

  // Throws InvalidConfig: needs >= 1 gateway, exactly 1 master, delays >= 0.
  void validate() const;
  double delay_ms(const std::string& from, const std::string& to) const;
  std::size_t process_count() const noexcept { return nodes.size(); }
  const NodeSpec& gateway() const;
  const NodeSpec& master() const;
};

// "a_bcd", "a_b" or "a_cloud_bcd"; throws UnknownPreset.
ScenarioConfig preset(std::string_view name);
std::vector<std::string> preset_names();

struct RunOptions {
  std::filesystem::path binary;    // the smartedge executable, used to launch nodes
  std::filesystem::path work_dir;  // configs, logs, ready files, trained model
  std::filesystem::path data_csv;
  std::filesystem::path model;  // trained into work_dir when empty
  std::string shared_secret = "smartedge-bench";
  std::int64_t startup_timeout_ms = 20'000;
};

struct ScenarioResult {
  std::string scenario;
  std::vector<TimingRecord> records;
  EvalReport eval;  // predictions of all completed jobs against their labels
  bool complete = false;
  std::string failure;  // first error when incomplete
};

// Launches the scenario's nodes as child processes on loopback, submits
// `repetitions` jobs, and tears everything down. Node failures during the
// run are reported in the result (partial records kept), not thrown.
// Throws PortConflict or NodeCrash when a node fails to come up.
ScenarioResult run_scenario(const ScenarioConfig& cfg, const RunOptions& options);

struct Stats {
  double mean = 0.0;
  double median = 0.0;
  double p95 = 0.0;
};

// Linear interpolation between closest ranks; throws on empty input.
Stats describe(std::vector<double> values);

inline constexpr std::string_view kRecordsHeader =
    "job_id,scenario,arbitration_ms,latency_ms,execution_ms,response_ms,bytes_sent,bytes_received";

struct ScenarioSummary {
  std::string scenario;
  std::size_t jobs = 0;
  std::map<std::string, Stats> metrics;  // keyed by CSV column name
};

using Summary = std::vector<ScenarioSummary>;

Summary summarize(const std::vector<TimingRecord>& records);

std::string to_records_csv(const std::vector<TimingRecord>& records);
std::vector<TimingRecord> parse_records_csv(std::string_view text);

// Writes records.csv and summary.json into `out_dir` and returns the
// summary. Throws WriteFailure.
Summary report(const std::vector<TimingRecord>& records, const std::filesystem::path& out_dir);

std::string format_summary(const Summary& summary);
std::string summary_to_json(const Summary& summary);

}  // namespace smartedge::bench
