#include "node_internal.hpp"
#include "smartedge/error.hpp"
#include "smartedge/rng.hpp"

namespace smartedge::node {

namespace {

constexpr std::size_t kMaxJobRecords = 10'000;

std::vector<std::string> executor_ids(int count) {
  std::vector<std::string> ids;
  for (int i = 0; i < count; ++i) ids.push_back("actor" + std::to_string(i));
  return ids;
}

}  // namespace

struct Master::Impl {
  explicit Impl(const NodeConfig& cfg) : pool(executor_ids(cfg.local_executors)) {}

  ExecutorPool pool;
  Server server;
  protocol::MessageIds ids;

  mutable std::mutex jobs_mutex;
  std::map<std::string, JobRecord> jobs;
  std::deque<std::string> job_order;
  std::uint64_t training_jobs = 0;

  std::mutex probe_mutex;
  std::map<std::string, net::Connection> probes;

  protocol::Message message(const NodeConfig& cfg, protocol::Payload p) {
    protocol::Message m;
    m.msg_id = ids.next();
    m.sender_id = cfg.node_id;
    m.payload = std::move(p);
    return m;
  }

  void open_job(const std::string& id, const std::string& gateway) {
    std::lock_guard lock(jobs_mutex);
    if (jobs.count(id)) jobs.erase(id);
    jobs.emplace(id, JobRecord(id, gateway, monotonic_ms()));
    job_order.push_back(id);
    while (job_order.size() > kMaxJobRecords) {
      jobs.erase(job_order.front());
      job_order.pop_front();
    }
  }

  void advance(const std::string& id, JobState next) {
    std::lock_guard lock(jobs_mutex);
    const auto it = jobs.find(id);
    if (it == jobs.end() || it->second.terminal()) return;
    it->second.advance(next, monotonic_ms());
  }

  void set_placement(const std::string& id, protocol::PlacementDecision d) {
    std::lock_guard lock(jobs_mutex);
    if (const auto it = jobs.find(id); it != jobs.end()) it->second.placement = d;
  }

  // Active load checks: one LoadQuery/LoadReport round trip per healthy
  // worker. Returns the mean round trip in ms, 0 with no workers.
  double probe_workers(const NodeConfig& cfg, WorkerRegistry& registry) {
    const auto snapshot = registry.snapshot(monotonic_ms());
    const auto timeout = net::Millis(std::max<std::int64_t>(3 * cfg.heartbeat_interval_ms, 1000));
    std::lock_guard lock(probe_mutex);
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& [id, entry] : snapshot) {
      if (!entry.healthy) continue;
      try {
        auto& conn = probes[id];
        if (!conn.is_open()) conn = net::Connection::connect(net::parse_endpoint(entry.address), timeout);
        const auto start = std::chrono::steady_clock::now();
        conn.send(message(cfg, protocol::LoadQuery{id}), cfg.shared_secret, cfg.delay_to(id));
        const auto reply = conn.receive(cfg.shared_secret, timeout);
        const double rtt = elapsed_ms(start);
        if (const auto* rep = std::get_if<protocol::LoadReport>(&reply.payload)) {
          registry.record_load(id, rep->load, monotonic_ms());
          total += rtt;
          ++count;
        }
      } catch (const Error& e) {
        probes.erase(id);
        if (e.code() == ErrorCode::BadAuthTag) registry.mark_compromised(id);
        log_line(cfg.node_id, "load check of " + id + " failed: " + e.what());
      }
    }
    return count ? total / static_cast<double>(count) : 0.0;
  }
};

Master::Master(NodeConfig cfg) : cfg_(std::move(cfg)), registry_(cfg_.heartbeat_interval_ms) {
  cfg_.role = Role::Master;
  cfg_.validate();
  impl_ = std::make_unique<Impl>(cfg_);
}

Master::~Master() { stop(); }

net::Endpoint Master::address() const { return impl_->server.address(); }

std::optional<JobRecord> Master::job(const std::string& job_id) const {
  std::lock_guard lock(impl_->jobs_mutex);
  const auto it = impl_->jobs.find(job_id);
  if (it == impl_->jobs.end()) return std::nullopt;
  return it->second;
}

void Master::start() {
  auto& s = *impl_;
  s.server.start(net::parse_endpoint(cfg_.listen_address), [this](net::Connection& conn) {
    auto& s = *impl_;
    std::string bound_worker;
    const std::string self = address().to_string();
    try {
      while (auto msg = read_message(conn, cfg_.shared_secret, s.server)) {
        const auto now = monotonic_ms();
        const double delay = cfg_.delay_to(msg->sender_id);
        auto send = [&](protocol::Payload p) {
          conn.send(s.message(cfg_, std::move(p)), cfg_.shared_secret, delay);
        };

        if (const auto* reg = std::get_if<protocol::RegisterWorker>(&msg->payload)) {
          registry_.register_worker(msg->sender_id, reg->address, now);
          bound_worker = msg->sender_id;
          log_line(cfg_.node_id, "worker " + bound_worker + " registered at " + reg->address);
          send(protocol::Heartbeat{});
        } else if (const auto* hb = std::get_if<protocol::Heartbeat>(&msg->payload)) {
          const auto& id = bound_worker.empty() ? msg->sender_id : bound_worker;
          if (hb->load) registry_.record_load(id, *hb->load, now);
          else registry_.touch(id, now);
        } else if (const auto* rep = std::get_if<protocol::LoadReport>(&msg->payload)) {
          registry_.record_load(rep->worker_id, rep->load, now);
        } else if (const auto* req = std::get_if<protocol::JobRequest>(&msg->payload)) {
          const auto received = std::chrono::steady_clock::now();
          s.open_job(req->job_id, msg->sender_id);
          s.advance(req->job_id, JobState::Arbitrating);
          const double rtt = s.probe_workers(cfg_, registry_);
          const auto placement =
              arbitrate(registry_.snapshot(monotonic_ms()), cfg_.heavy_load_threshold,
                        cfg_.cloud_enabled);
          protocol::PlacementResponse resp;
          resp.job_id = req->job_id;
          resp.decision = placement.decision;
          resp.via_cloud = placement.decision == protocol::PlacementDecision::Cloud;
          resp.target_address =
              placement.decision == protocol::PlacementDecision::Worker ? placement.address : self;
          resp.target_id = placement.decision == protocol::PlacementDecision::Worker
                               ? placement.worker_id
                               : cfg_.node_id;
          resp.probe_rtt_ms = rtt;
          s.set_placement(req->job_id, placement.decision);
          resp.arbitration_ms = elapsed_ms(received);
          send(resp);
          s.advance(req->job_id, JobState::Dispatched);
        } else if (const auto* d = std::get_if<protocol::TaskDispatch>(&msg->payload)) {
          protocol::Payload reply;
          if (d->forward_to_cloud) {
            try {
              const auto timeout = net::Millis(cfg_.timeout_ms);
              if (cfg_.cloud_address.empty()) {
                throw Error(ErrorCode::TaskFailure, "no cloud tier configured");
              }
              auto cloud = net::Connection::connect(net::parse_endpoint(cfg_.cloud_address), timeout);
              auto forwarded = *d;
              forwarded.forward_to_cloud = false;
              cloud.send(s.message(cfg_, forwarded), cfg_.shared_secret,
                         cfg_.delay_to(cfg_.cloud_id));
              reply = cloud.receive(cfg_.shared_secret, timeout).payload;
            } catch (const Error& e) {
              reply = error_reply(d->job_id, e);
            }
          } else {
            const auto executor = s.pool.pick(d->executor_id);
            reply = s.pool.submit(executor, *d, cfg_.node_id + "/" + executor).get();
          }
          s.advance(d->job_id, std::holds_alternative<protocol::TaskResult>(reply)
                                   ? JobState::Completed
                                   : JobState::Failed);
          send(std::move(reply));
        } else {
          send(protocol::ErrorReply{"", std::string(to_string(ErrorCode::MalformedBody)),
                                    "unexpected " + std::string(to_string(msg->type()))});
        }
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::BadAuthTag && !bound_worker.empty()) {
        registry_.mark_compromised(bound_worker);
        log_line(cfg_.node_id, "worker " + bound_worker + " marked compromised");
      } else {
        log_line(cfg_.node_id, std::string("session closed: ") + e.what());
      }
    }
  });
  log_line(cfg_.node_id, "serving on " + address().to_string() + " with " +
                             std::to_string(cfg_.local_executors) + " local executor(s)");
  if (!cfg_.ready_file.empty()) write_ready_file(cfg_.ready_file, address().to_string());
}

void Master::stop() {
  if (!impl_) return;
  impl_->server.stop();
  std::lock_guard lock(impl_->probe_mutex);
  impl_->probes.clear();
}

Ensemble Master::distribute_training(std::span<const Algorithm> combo, const TrainingData& data,
                                     const Hyperparams& hp, std::uint64_t seed, VotingMode mode) {
  auto& s = *impl_;
  if (combo.empty()) throw Error(ErrorCode::EmptyMemberList, "empty combo");
  if (data.train.x.rows() < 2 * combo.size()) {
    throw Error(ErrorCode::TooFewRecords, "sharded training needs at least 2 rows per member");
  }
  std::string job_id;
  {
    std::lock_guard lock(s.jobs_mutex);
    job_id = cfg_.node_id + "-train-" + std::to_string(++s.training_jobs);
  }
  s.open_job(job_id, cfg_.node_id);
  s.advance(job_id, JobState::Arbitrating);

  std::vector<std::pair<std::string, std::string>> workers;
  for (const auto& [id, e] : registry_.snapshot(monotonic_ms())) {
    if (e.healthy) workers.emplace_back(id, e.address);
  }
  if (workers.empty()) {
    s.advance(job_id, JobState::Failed);
    throw Error(ErrorCode::WorkerTrainingFailure, "no healthy workers registered");
  }
  s.set_placement(job_id, protocol::PlacementDecision::Worker);

  const auto shards = shard_indices(data.train.x.rows(), combo.size(), seed);
  const auto validation_csv = to_matrix_csv(data.validation.x, &data.validation.y);
  s.advance(job_id, JobState::Dispatched);

  Ensemble e;
  e.mode = mode;
  e.combo_name = combo_name(combo);
  const auto timeout = net::Millis(cfg_.timeout_ms);
  for (std::size_t i = 0; i < combo.size(); ++i) {
    const auto& [worker_id, address] = workers[i % workers.size()];
    protocol::TaskDispatch d;
    d.job_id = job_id + "/" + std::to_string(i);
    d.kind = protocol::TaskKind::Train;
    d.executor_id = worker_id;
    const auto shard_x = data.train.x.select_rows(shards[i]);
    const auto shard_y = select_labels(data.train.y, shards[i]);
    d.csv = to_matrix_csv(shard_x, &shard_y);
    d.validation_csv = validation_csv;
    d.algorithm = combo[i];
    d.hyperparams = hp;
    d.seed = derive_seed(seed, i);
    try {
      auto conn = net::Connection::connect(net::parse_endpoint(address), timeout);
      conn.send(s.message(cfg_, d), cfg_.shared_secret, cfg_.delay_to(worker_id));
      const auto reply = conn.receive(cfg_.shared_secret, timeout);
      if (const auto* err = std::get_if<protocol::ErrorReply>(&reply.payload)) {
        throw Error(ErrorCode::WorkerTrainingFailure, worker_id + ": " + err->detail);
      }
      const auto* result = std::get_if<protocol::TaskResult>(&reply.payload);
      if (!result) throw Error(ErrorCode::WorkerTrainingFailure, worker_id + ": unexpected reply");
      e.members.push_back(deserialize_model(result->model));
    } catch (const Error& err) {
      s.advance(job_id, JobState::Failed);
      if (err.code() == ErrorCode::WorkerTrainingFailure) throw;
      throw Error(ErrorCode::WorkerTrainingFailure,
                  "member " + std::to_string(i) + " on " + worker_id + ": " + err.what());
    }
  }
  s.advance(job_id, JobState::Completed);
  return e;
}

}  // namespace smartedge::node
