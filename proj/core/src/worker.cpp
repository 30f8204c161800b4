#include "node_internal.hpp"
#include "smartedge/error.hpp"

namespace smartedge::node {

namespace {

constexpr int kRegisterAttempts = 5;
constexpr std::int64_t kFirstBackoffMs = 100;

}  // namespace

struct Worker::Impl {
  explicit Impl(const NodeConfig& cfg, std::unique_ptr<LoadSource> source)
      : load(std::move(source)), pool({cfg.node_id}) {}

  std::unique_ptr<LoadSource> load;
  ExecutorPool pool;
  Server server;
  protocol::MessageIds ids;

  std::mutex master_mutex;
  net::Connection master;
  std::thread heartbeat;
  std::mutex wait_mutex;
  std::condition_variable wait_cv;
  std::atomic<bool> stopping{false};
  std::atomic<bool> failed{false};

  protocol::Message message(const NodeConfig& cfg, protocol::Payload p) {
    protocol::Message m;
    m.msg_id = ids.next();
    m.sender_id = cfg.node_id;
    m.payload = std::move(p);
    return m;
  }

  protocol::LoadSample sample() {
    return {load->cpu_load(), load->mem_load(), pool.queue_length(), monotonic_ms()};
  }
};

Worker::Worker(NodeConfig cfg)
    : Worker(cfg, cfg.load_profile.empty() ? os_load() : scripted_load(cfg.load_profile)) {}

Worker::Worker(NodeConfig cfg, std::unique_ptr<LoadSource> load) : cfg_(std::move(cfg)) {
  cfg_.role = Role::Worker;
  cfg_.validate();
  impl_ = std::make_unique<Impl>(cfg_, std::move(load));
}

Worker::~Worker() { stop(); }

net::Endpoint Worker::address() const { return impl_->server.address(); }

bool Worker::failed() const noexcept { return impl_->failed.load(); }

namespace {

// Registration handshake on a fresh connection; the master acknowledges
// with an empty Heartbeat.
net::Connection register_once(const NodeConfig& cfg, const std::string& address,
                              protocol::Message hello) {
  const auto timeout = net::Millis(cfg.timeout_ms);
  auto conn = net::Connection::connect(net::parse_endpoint(cfg.master_address), timeout);
  hello.payload = protocol::RegisterWorker{address};
  conn.send(hello, cfg.shared_secret, cfg.delay_to(cfg.master_id));
  const auto reply = conn.receive(cfg.shared_secret, timeout);
  if (const auto* err = std::get_if<protocol::ErrorReply>(&reply.payload)) {
    throw Error(ErrorCode::MasterUnreachable, "registration refused: " + err->detail);
  }
  if (!std::holds_alternative<protocol::Heartbeat>(reply.payload)) {
    throw Error(ErrorCode::MasterUnreachable, "unexpected registration reply");
  }
  return conn;
}

}  // namespace

void Worker::start() {
  auto& s = *impl_;
  s.server.start(net::parse_endpoint(cfg_.listen_address), [this](net::Connection& conn) {
    auto& s = *impl_;
    try {
      while (auto msg = read_message(conn, cfg_.shared_secret, s.server)) {
        const double delay = cfg_.delay_to(msg->sender_id);
        protocol::Payload reply;
        if (std::holds_alternative<protocol::LoadQuery>(msg->payload)) {
          reply = protocol::LoadReport{cfg_.node_id, s.sample()};
        } else if (const auto* d = std::get_if<protocol::TaskDispatch>(&msg->payload)) {
          reply = s.pool.submit(cfg_.node_id, *d, cfg_.node_id).get();
        } else {
          reply = protocol::ErrorReply{"", std::string(to_string(ErrorCode::MalformedBody)),
                                       "unexpected " + std::string(to_string(msg->type()))};
        }
        conn.send(s.message(cfg_, std::move(reply)), cfg_.shared_secret, delay);
      }
    } catch (const Error& e) {
      log_line(cfg_.node_id, std::string("session closed: ") + e.what());
    }
  });

  if (cfg_.cloud_node) {
    if (!cfg_.ready_file.empty()) write_ready_file(cfg_.ready_file, address().to_string());
    log_line(cfg_.node_id, "cloud executor serving on " + address().to_string());
    return;
  }

  auto connect_with_backoff = [this]() -> bool {
    auto& s = *impl_;
    std::int64_t backoff = kFirstBackoffMs;
    for (int attempt = 1; attempt <= kRegisterAttempts && !s.stopping; ++attempt) {
      try {
        auto conn = register_once(cfg_, address().to_string(), s.message(cfg_, {}));
        std::lock_guard lock(s.master_mutex);
        s.master = std::move(conn);
        return true;
      } catch (const Error& e) {
        log_line(cfg_.node_id, "registration attempt " + std::to_string(attempt) + " failed: " +
                                   e.what());
      }
      std::unique_lock lock(s.wait_mutex);
      s.wait_cv.wait_for(lock, net::Millis(backoff), [&] { return s.stopping.load(); });
      backoff *= 2;
    }
    return false;
  };

  if (!connect_with_backoff()) {
    s.server.stop();
    throw Error(ErrorCode::MasterUnreachable,
                cfg_.master_address + " after " + std::to_string(kRegisterAttempts) + " attempts");
  }
  log_line(cfg_.node_id, "registered with " + cfg_.master_address + ", serving on " +
                             address().to_string());
  if (!cfg_.ready_file.empty()) write_ready_file(cfg_.ready_file, address().to_string());

  s.heartbeat = std::thread([this, connect_with_backoff] {
    auto& s = *impl_;
    while (!s.stopping) {
      {
        std::unique_lock lock(s.wait_mutex);
        s.wait_cv.wait_for(lock, net::Millis(cfg_.heartbeat_interval_ms),
                           [&] { return s.stopping.load(); });
      }
      if (s.stopping) break;
      try {
        std::lock_guard lock(s.master_mutex);
        s.master.send(s.message(cfg_, protocol::Heartbeat{s.sample()}), cfg_.shared_secret,
                      cfg_.delay_to(cfg_.master_id));
      } catch (const Error& e) {
        log_line(cfg_.node_id, std::string("heartbeat failed: ") + e.what());
        if (!connect_with_backoff()) {
          s.failed = true;
          return;
        }
      }
    }
  });
}

void Worker::stop() {
  if (!impl_ || impl_->stopping.exchange(true)) return;
  impl_->wait_cv.notify_all();
  if (impl_->heartbeat.joinable()) impl_->heartbeat.join();
  impl_->server.stop();
  std::lock_guard lock(impl_->master_mutex);
  impl_->master.close();
}

}  // namespace smartedge::node
