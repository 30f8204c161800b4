#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>

#include "json_io.hpp"
#include "smartedge/error.hpp"
#include "smartedge/node.hpp"

namespace smartedge {

bool TimingRecord::valid() const {
  for (double v : {arbitration_ms, latency_ms, execution_ms, response_ms, probe_rtt_ms}) {
    if (!std::isfinite(v) || v < 0.0) return false;
  }
  return true;
}

}  // namespace smartedge

namespace smartedge::node {

using nlohmann::json;

std::string_view to_string(Role r) noexcept {
  switch (r) {
    case Role::Gateway: return "gateway";
    case Role::Master: return "master";
    case Role::Worker: return "worker";
  }
  return "?";
}

std::optional<Role> parse_role(std::string_view text) {
  for (auto r : {Role::Gateway, Role::Master, Role::Worker}) {
    if (text == to_string(r)) return r;
  }
  return std::nullopt;
}

double NodeConfig::delay_to(const std::string& peer_id) const {
  const auto it = hop_delay_ms.find(peer_id);
  return it == hop_delay_ms.end() ? 0.0 : it->second;
}

void NodeConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (node_id.empty()) fail("node_id must not be empty");
  if (!(heavy_load_threshold > 0.0 && heavy_load_threshold <= 1.0)) {
    fail("heavy_load_threshold must lie in (0, 1]");
  }
  if (heartbeat_interval_ms <= 0) fail("heartbeat_interval_ms must be positive");
  if (timeout_ms <= 0) fail("timeout_ms must be positive");
  if (local_executors < 1) fail("local_executors must be at least 1");
  if (shared_secret.empty()) fail("shared_secret must not be empty");
  for (const auto& [peer, ms] : hop_delay_ms) {
    if (!std::isfinite(ms) || ms < 0.0) fail("delay to '" + peer + "' must be >= 0");
  }
  for (double v : load_profile) {
    if (!(v >= 0.0 && v <= 1.0)) fail("load_profile values must lie in [0, 1]");
  }
  if (role != Role::Gateway) net::parse_endpoint(listen_address);
  const bool needs_master = role == Role::Gateway || (role == Role::Worker && !cloud_node);
  if (needs_master) {
    if (master_address.empty()) fail(std::string(to_string(role)) + " requires master_address");
    net::parse_endpoint(master_address);
  }
  if (role == Role::Master && cloud_enabled) {
    if (cloud_address.empty()) fail("cloud_enabled requires cloud_address");
    net::parse_endpoint(cloud_address);
  }
}

NodeConfig parse_config(std::string_view json_text, NodeConfig cfg) {
  const json j = detail::parse_json(json_text, ErrorCode::InvalidConfig);
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "role") {
        const auto role = parse_role(value.get<std::string>());
        if (!role) throw Error(ErrorCode::InvalidConfig, "unknown role '" + value.get<std::string>() + "'");
        cfg.role = *role;
      } else if (key == "listen_address") {
        cfg.listen_address = value.get<std::string>();
      } else if (key == "master_address") {
        cfg.master_address = value.get<std::string>();
      } else if (key == "node_id") {
        cfg.node_id = value.get<std::string>();
      } else if (key == "master_id") {
        cfg.master_id = value.get<std::string>();
      } else if (key == "heavy_load_threshold") {
        cfg.heavy_load_threshold = value.get<double>();
      } else if (key == "cloud_enabled") {
        cfg.cloud_enabled = value.get<bool>();
      } else if (key == "cloud_address") {
        cfg.cloud_address = value.get<std::string>();
      } else if (key == "cloud_id") {
        cfg.cloud_id = value.get<std::string>();
      } else if (key == "heartbeat_interval_ms") {
        cfg.heartbeat_interval_ms = value.get<std::int64_t>();
      } else if (key == "shared_secret") {
        cfg.shared_secret = value.get<std::string>();
      } else if (key == "hop_delay_ms") {
        cfg.hop_delay_ms = value.get<std::map<std::string, double>>();
      } else if (key == "local_executors") {
        cfg.local_executors = value.get<int>();
      } else if (key == "load_profile") {
        cfg.load_profile = value.get<std::vector<double>>();
      } else if (key == "cloud_node") {
        cfg.cloud_node = value.get<bool>();
      } else if (key == "timeout_ms") {
        cfg.timeout_ms = value.get<std::int64_t>();
      } else if (key == "ready_file") {
        cfg.ready_file = value.get<std::string>();
      } else {
        throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  return cfg;
}

NodeConfig load_config(const std::filesystem::path& path, NodeConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), std::move(base));
}

std::string config_to_json(const NodeConfig& cfg) {
  json j = {{"role", std::string(to_string(cfg.role))},
            {"listen_address", cfg.listen_address},
            {"master_address", cfg.master_address},
            {"node_id", cfg.node_id},
            {"master_id", cfg.master_id},
            {"heavy_load_threshold", cfg.heavy_load_threshold},
            {"cloud_enabled", cfg.cloud_enabled},
            {"cloud_address", cfg.cloud_address},
            {"cloud_id", cfg.cloud_id},
            {"heartbeat_interval_ms", cfg.heartbeat_interval_ms},
            {"shared_secret", cfg.shared_secret},
            {"hop_delay_ms", cfg.hop_delay_ms},
            {"local_executors", cfg.local_executors},
            {"load_profile", cfg.load_profile},
            {"cloud_node", cfg.cloud_node},
            {"timeout_ms", cfg.timeout_ms},
            {"ready_file", cfg.ready_file}};
  return j.dump(2) + "\n";
}

void apply_env_overrides(NodeConfig& cfg) {
  if (const char* port = std::getenv("SMARTEDGE_LISTEN_PORT"); port && *port) {
    auto ep = net::parse_endpoint(cfg.listen_address);
    const auto parsed = net::parse_endpoint("h:" + std::string(port));
    ep.port = parsed.port;
    cfg.listen_address = ep.to_string();
  }
  if (const char* secret = std::getenv("SMARTEDGE_SECRET"); secret && *secret) {
    cfg.shared_secret = secret;
  }
}

// ---------------------------------------------------------------------------

WorkerRegistry::WorkerRegistry(std::int64_t heartbeat_interval_ms)
    : interval_ms_(heartbeat_interval_ms) {}

void WorkerRegistry::register_worker(const std::string& id, const std::string& address,
                                     std::int64_t now_ms) {
  std::unique_lock lock(mutex_);
  auto& e = entries_[id];
  e.address = address;
  e.last_seen_ms = std::max(e.last_seen_ms, now_ms);
}

void WorkerRegistry::record_load(const std::string& id, const protocol::LoadSample& load,
                                 std::int64_t now_ms) {
  std::unique_lock lock(mutex_);
  const auto it = entries_.find(id);
  if (it == entries_.end()) return;
  it->second.load = load;
  it->second.last_seen_ms = std::max(it->second.last_seen_ms, now_ms);
}

void WorkerRegistry::touch(const std::string& id, std::int64_t now_ms) {
  std::unique_lock lock(mutex_);
  const auto it = entries_.find(id);
  if (it != entries_.end()) it->second.last_seen_ms = std::max(it->second.last_seen_ms, now_ms);
}

void WorkerRegistry::mark_compromised(const std::string& id) {
  std::unique_lock lock(mutex_);
  const auto it = entries_.find(id);
  if (it != entries_.end()) it->second.compromised = true;
}

RegistrySnapshot WorkerRegistry::snapshot(std::int64_t now_ms) const {
  std::shared_lock lock(mutex_);
  RegistrySnapshot out = entries_;
  for (auto& [id, e] : out) {
    e.healthy = !e.compromised && now_ms - e.last_seen_ms <= kMissedHeartbeatLimit * interval_ms_;
  }
  return out;
}

std::size_t WorkerRegistry::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

Placement arbitrate(const RegistrySnapshot& snapshot, double threshold, bool cloud_enabled) {
  const WorkerEntry* best = nullptr;
  const std::string* best_id = nullptr;
  // std::map iterates ids in ascending order, so strict < keeps the smallest id on ties.
  for (const auto& [id, e] : snapshot) {
    if (!e.healthy || e.compromised || !e.load || !(e.load->cpu_load < threshold)) continue;
    if (!best || e.load->cpu_load < best->load->cpu_load) {
      best = &e;
      best_id = &id;
    }
  }
  if (best) return {protocol::PlacementDecision::Worker, *best_id, best->address};
  if (cloud_enabled) return {protocol::PlacementDecision::Cloud, {}, {}};
  return {protocol::PlacementDecision::BrokerSelf, {}, {}};
}

// ---------------------------------------------------------------------------

std::string_view to_string(JobState s) noexcept {
  switch (s) {
    case JobState::Received: return "Received";
    case JobState::Arbitrating: return "Arbitrating";
    case JobState::Dispatched: return "Dispatched";
    case JobState::Completed: return "Completed";
    case JobState::Failed: return "Failed";
  }
  return "?";
}

JobRecord::JobRecord(std::string job_id, std::string gateway_id, std::int64_t now_ms)
    : job_id_(std::move(job_id)), gateway_id_(std::move(gateway_id)) {
  entered_[JobState::Received] = now_ms;
}

bool JobRecord::terminal() const noexcept {
  return state_ == JobState::Completed || state_ == JobState::Failed;
}

void JobRecord::advance(JobState next, std::int64_t now_ms) {
  const bool forward = static_cast<int>(next) == static_cast<int>(state_) + 1 &&
                       next != JobState::Failed;
  const bool failing = next == JobState::Failed && !terminal();
  if (!forward && !failing) {
    throw Error(ErrorCode::IllegalTransition, "job " + job_id_ + ": " +
                                                  std::string(to_string(state_)) + " -> " +
                                                  std::string(to_string(next)));
  }
  state_ = next;
  entered_[next] = now_ms;
}

std::optional<std::int64_t> JobRecord::entered_at(JobState s) const {
  const auto it = entered_.find(s);
  if (it == entered_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------

std::int64_t monotonic_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

namespace {

class ScriptedLoad final : public LoadSource {
 public:
  explicit ScriptedLoad(std::vector<double> profile) : profile_(std::move(profile)) {
    if (profile_.empty()) profile_.push_back(0.0);
  }
  double cpu_load() override {
    std::lock_guard lock(mutex_);
    return profile_[next_++ % profile_.size()];
  }
  double mem_load() override { return 0.0; }

 private:
  std::mutex mutex_;
  std::vector<double> profile_;
  std::size_t next_ = 0;
};

class OsLoad final : public LoadSource {
 public:
  OsLoad() { read_stat(last_busy_, last_total_); }

  double cpu_load() override {
    std::lock_guard lock(mutex_);
    std::uint64_t busy = 0, total = 0;
    if (!read_stat(busy, total) || total <= last_total_) return 0.0;
    const double load = static_cast<double>(busy - last_busy_) /
                        static_cast<double>(total - last_total_);
    last_busy_ = busy;
    last_total_ = total;
    return std::clamp(load, 0.0, 1.0);
  }

  double mem_load() override {
    std::ifstream in("/proc/meminfo");
    std::string key;
    std::uint64_t value = 0, total = 0, available = 0;
    std::string unit;
    while (in >> key >> value >> unit) {
      if (key == "MemTotal:") total = value;
      if (key == "MemAvailable:") available = value;
    }
    if (total == 0) return 0.0;
    return std::clamp(1.0 - static_cast<double>(available) / static_cast<double>(total), 0.0, 1.0);
  }

 private:
  static bool read_stat(std::uint64_t& busy, std::uint64_t& total) {
    std::ifstream in("/proc/stat");
    std::string cpu;
    std::uint64_t user = 0, nice = 0, system = 0, idle = 0, iowait = 0, irq = 0, softirq = 0,
                  steal = 0;
    if (!(in >> cpu >> user >> nice >> system >> idle >> iowait >> irq >> softirq >> steal)) {
      return false;
    }
    busy = user + nice + system + irq + softirq + steal;
    total = busy + idle + iowait;
    return true;
  }

  std::mutex mutex_;
  std::uint64_t last_busy_ = 0;
  std::uint64_t last_total_ = 0;
};

}  // namespace

std::unique_ptr<LoadSource> scripted_load(std::vector<double> profile) {
  return std::make_unique<ScriptedLoad>(std::move(profile));
}

std::unique_ptr<LoadSource> os_load() { return std::make_unique<OsLoad>(); }

void write_ready_file(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::WriteFailure, tmp);
    out << content << '\n';
    if (!out) throw Error(ErrorCode::WriteFailure, tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::WriteFailure, path + ": " + ec.message());
}

}  // namespace smartedge::node
