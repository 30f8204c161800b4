#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "smartedge/ensemble.hpp"
#include "smartedge/net.hpp"
#include "smartedge/protocol.hpp"
#include "smartedge/timing.hpp"

namespace smartedge::node {

enum class Role { Gateway, Master, Worker };
std::string_view to_string(Role r) noexcept;
std::optional<Role> parse_role(std::string_view text);

inline constexpr std::int64_t kDefaultTimeoutMs = 10'000;
inline constexpr int kMissedHeartbeatLimit = 3;

struct NodeConfig {
  Role role = Role::Worker;
  std::string listen_address = "127.0.0.1:0";
  std::string master_address;
  std::string node_id;
  std::string master_id = "master";
  double heavy_load_threshold = 0.8;
  bool cloud_enabled = false;
  std::string cloud_address;
  std::string cloud_id = "cloud";
  std::int64_t heartbeat_interval_ms = 500;
  std::string shared_secret = "smartedge";
  std::map<std::string, double> hop_delay_ms;  // peer node_id -> one-way delay

  // Master: in-process executors (actor0, actor1, ...); at least one runs.
  int local_executors = 1;
  // Worker: cyclic scripted cpu loads; empty samples the OS.
  std::vector<double> load_profile;
  // Worker: serve the cloud tier; skips registration with a master.
  bool cloud_node = false;
  std::int64_t timeout_ms = kDefaultTimeoutMs;
  // Written with the bound address once the node is serving.
  std::string ready_file;

  // Throws InvalidConfig.
  void validate() const;
  double delay_to(const std::string& peer_id) const;
};

// JSON document mirroring NodeConfig; unknown keys are rejected.
NodeConfig parse_config(std::string_view json_text, NodeConfig base = {});
NodeConfig load_config(const std::filesystem::path& path, NodeConfig base = {});
std::string config_to_json(const NodeConfig& cfg);

// SMARTEDGE_LISTEN_PORT replaces the listen port, SMARTEDGE_SECRET the
// shared secret.
void apply_env_overrides(NodeConfig& cfg);

// ---------------------------------------------------------------------------
// Registry

struct WorkerEntry {
  std::string address;
  std::optional<protocol::LoadSample> load;
  std::int64_t last_seen_ms = 0;
  bool healthy = true;
  bool compromised = false;
  friend bool operator==(const WorkerEntry&, const WorkerEntry&) = default;
};

using RegistrySnapshot = std::map<std::string, WorkerEntry>;

// Thread-safe map of remote workers. A worker is unhealthy once more than
// kMissedHeartbeatLimit intervals pass without contact, or after it sends
// a frame that fails authentication.
class WorkerRegistry {
 public:
  explicit WorkerRegistry(std::int64_t heartbeat_interval_ms);

  void register_worker(const std::string& id, const std::string& address, std::int64_t now_ms);
  // Ignored for unknown ids.
  void record_load(const std::string& id, const protocol::LoadSample& load, std::int64_t now_ms);
  void touch(const std::string& id, std::int64_t now_ms);
  void mark_compromised(const std::string& id);

  RegistrySnapshot snapshot(std::int64_t now_ms) const;
  std::size_t size() const;

 private:
  std::int64_t interval_ms_;
  mutable std::shared_mutex mutex_;
  RegistrySnapshot entries_;
};

struct Placement {
  protocol::PlacementDecision decision = protocol::PlacementDecision::BrokerSelf;
  std::string worker_id;
  std::string address;
  friend bool operator==(const Placement&, const Placement&) = default;
};

// Healthy workers whose cpu_load is below the threshold compete; the
// lowest load wins, ties to the smallest id. Otherwise Cloud when enabled,
// else BrokerSelf.
Placement arbitrate(const RegistrySnapshot& snapshot, double threshold, bool cloud_enabled);

// ---------------------------------------------------------------------------
// Job lifecycle

enum class JobState { Received, Arbitrating, Dispatched, Completed, Failed };
std::string_view to_string(JobState s) noexcept;

class JobRecord {
 public:
  JobRecord(std::string job_id, std::string gateway_id, std::int64_t now_ms);

  // Forward moves only; Failed from any non-terminal state. Throws
  // IllegalTransition.
  void advance(JobState next, std::int64_t now_ms);

  const std::string& job_id() const noexcept { return job_id_; }
  const std::string& gateway_id() const noexcept { return gateway_id_; }
  JobState state() const noexcept { return state_; }
  bool terminal() const noexcept;
  std::optional<protocol::PlacementDecision> placement;
  std::optional<std::int64_t> entered_at(JobState s) const;

 private:
  std::string job_id_;
  std::string gateway_id_;
  JobState state_ = JobState::Received;
  std::map<JobState, std::int64_t> entered_;
};

// ---------------------------------------------------------------------------
// Roles

std::int64_t monotonic_ms();

class LoadSource {
 public:
  virtual ~LoadSource() = default;
  virtual double cpu_load() = 0;
  virtual double mem_load() = 0;
};

// Cycles through `profile`, one value per sample.
std::unique_ptr<LoadSource> scripted_load(std::vector<double> profile);
// /proc/stat and /proc/meminfo deltas.
std::unique_ptr<LoadSource> os_load();

class ExecutorPool;
class Server;

class Master {
 public:
  explicit Master(NodeConfig cfg);
  ~Master();
  Master(const Master&) = delete;
  Master& operator=(const Master&) = delete;

  // Throws BindFailure.
  void start();
  void stop();

  net::Endpoint address() const;
  const NodeConfig& config() const noexcept { return cfg_; }
  WorkerRegistry& registry() noexcept { return registry_; }
  std::optional<JobRecord> job(const std::string& job_id) const;

  // Trains one member per healthy worker (round robin) on the shards
  // train_sharded would use, and assembles the ensemble. Throws
  // WorkerTrainingFailure.
  Ensemble distribute_training(std::span<const Algorithm> combo, const TrainingData& data,
                               const Hyperparams& hp, std::uint64_t seed, VotingMode mode);

 private:
  struct Impl;
  NodeConfig cfg_;
  WorkerRegistry registry_;
  std::unique_ptr<Impl> impl_;
};

class Worker {
 public:
  explicit Worker(NodeConfig cfg);
  Worker(NodeConfig cfg, std::unique_ptr<LoadSource> load);
  ~Worker();
  Worker(const Worker&) = delete;
  Worker& operator=(const Worker&) = delete;

  // Binds, then registers (unless cloud_node) with exponential backoff.
  // Throws BindFailure or MasterUnreachable.
  void start();
  void stop();

  net::Endpoint address() const;
  const NodeConfig& config() const noexcept { return cfg_; }
  // Set when the master connection is lost for good.
  bool failed() const noexcept;

 private:
  struct Impl;
  NodeConfig cfg_;
  std::unique_ptr<Impl> impl_;
};

struct JobOutcome {
  std::vector<Prediction> predictions;  // input row order
  protocol::PlacementResponse placement;
  TimingRecord timing;
};

// Two-phase submission: JobRequest to the master, then TaskDispatch with
// the CSV block to the placement target. Throws PlacementTimeout,
// DispatchTimeout, ResultMismatch or TaskFailure.
JobOutcome submit_job(const NodeConfig& gateway, std::string_view csv_block,
                      const std::string& model_ref, const std::string& job_id);

// Same, with the model document sent inline instead of by path.
JobOutcome submit_job_inline(const NodeConfig& gateway, std::string_view csv_block,
                             const std::string& model_document, const std::string& job_id);

// Writes `content` to `path` via a temporary file and rename.
void write_ready_file(const std::string& path, const std::string& content);

}  // namespace smartedge::node
