#include <iostream>

#include "node_internal.hpp"
#include "smartedge/error.hpp"

namespace smartedge::node {

namespace {

constexpr net::Millis kPollSlice{100};
std::mutex log_mutex;

}  // namespace

void log_line(std::string_view node_id, std::string_view text) {
  std::lock_guard lock(log_mutex);
  std::cerr << '[' << node_id << "] " << text << '\n';
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

// ---------------------------------------------------------------------------

Server::~Server() { stop(); }

void Server::start(const net::Endpoint& at, Handler handler) {
  listener_ = net::Listener::bind(at);
  address_ = listener_.local();
  acceptor_ = std::thread([this, handler = std::move(handler)] {
    while (!stopping_) {
      auto conn = listener_.accept(kPollSlice);
      reap();
      if (!conn) continue;
      auto done = std::make_shared<std::atomic<bool>>(false);
      std::lock_guard lock(mutex_);
      sessions_.push_back(
          {std::thread([handler, done, c = std::move(*conn)]() mutable {
             try {
               handler(c);
             } catch (...) {
             }
             done->store(true);
           }),
           done});
    }
  });
}

void Server::reap() {
  std::lock_guard lock(mutex_);
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    if (it->done->load()) {
      it->thread.join();
      it = sessions_.erase(it);
    } else {
      ++it;
    }
  }
}

void Server::stop() {
  if (stopping_.exchange(true)) return;
  if (acceptor_.joinable()) acceptor_.join();
  listener_.close();
  std::list<Session> sessions;
  {
    std::lock_guard lock(mutex_);
    sessions.swap(sessions_);
  }
  for (auto& s : sessions) s.thread.join();
}

std::optional<protocol::Message> read_message(net::Connection& conn, std::string_view secret,
                                              const Server& server) {
  while (!server.stopping()) {
    try {
      return conn.receive(secret, kPollSlice);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Timeout) continue;
      if (e.code() == ErrorCode::ConnectionClosed) return std::nullopt;
      throw;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

std::shared_ptr<const ModelBundle> ModelCache::get(const std::string& path) {
  std::error_code ec;
  const auto stamp = std::filesystem::last_write_time(path, ec);
  if (ec) throw Error(ErrorCode::MissingFile, path);
  const auto key = path + "@" + std::to_string(stamp.time_since_epoch().count()) + ":" +
                   std::to_string(std::filesystem::file_size(path, ec));
  std::lock_guard lock(mutex_);
  if (const auto it = bundles_.find(key); it != bundles_.end()) return it->second;
  auto bundle = std::make_shared<const ModelBundle>(load_bundle(path));
  bundles_[key] = bundle;
  return bundle;
}

protocol::ErrorReply error_reply(const std::string& job_id, const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    return {job_id, std::string(to_string(err->code())), err->what()};
  }
  return {job_id, std::string(to_string(ErrorCode::TaskFailure)), e.what()};
}

protocol::Payload execute_task(const protocol::TaskDispatch& d, const std::string& worker_id,
                               ModelCache& models) {
  try {
    protocol::TaskResult result;
    result.job_id = d.job_id;
    result.worker_id = worker_id;
    if (d.kind == protocol::TaskKind::Predict) {
      std::shared_ptr<const ModelBundle> bundle;
      if (!d.model_inline.empty()) {
        bundle = std::make_shared<const ModelBundle>(deserialize_bundle(d.model_inline));
      } else if (!d.model_ref.empty()) {
        bundle = models.get(d.model_ref);
      } else {
        throw Error(ErrorCode::TaskFailure, "dispatch names no model");
      }
      const auto start = std::chrono::steady_clock::now();
      const auto table = parse_feature_csv(d.csv);
      result.predictions = bundle->predict_raw(table.features);
      result.execution_ms = elapsed_ms(start);
    } else {
      const auto start = std::chrono::steady_clock::now();
      const auto train = parse_matrix_csv(d.csv);
      const auto validation = parse_matrix_csv(d.validation_csv);
      if (!train.labels || !validation.labels) {
        throw Error(ErrorCode::TaskFailure, "training shards must carry an Outcome column");
      }
      const auto model = train_model(d.algorithm, {train.features, *train.labels},
                                     {validation.features, *validation.labels}, d.hyperparams,
                                     d.seed);
      result.model = serialize_model(model);
      result.execution_ms = elapsed_ms(start);
    }
    return result;
  } catch (const std::exception& e) {
    return error_reply(d.job_id, e);
  }
}

// ---------------------------------------------------------------------------

ExecutorPool::ExecutorPool(std::vector<std::string> ids) {
  for (auto& id : ids) {
    auto& e = executors_.emplace_back();
    e.id = std::move(id);
  }
  for (auto& e : executors_) e.thread = std::thread([this, &e] { run(e); });
}

ExecutorPool::~ExecutorPool() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  wake_.notify_all();
  for (auto& e : executors_) e.thread.join();
}

void ExecutorPool::run(Executor& e) {
  for (;;) {
    std::packaged_task<protocol::Payload()> task;
    {
      std::unique_lock lock(mutex_);
      wake_.wait(lock, [&] { return stopping_ || !e.queue.empty(); });
      if (e.queue.empty()) return;
      task = std::move(e.queue.front());
      e.queue.pop_front();
    }
    task();
    std::lock_guard lock(mutex_);
    --e.pending;
  }
}

std::string ExecutorPool::pick(const std::string& requested) const {
  std::lock_guard lock(mutex_);
  const Executor* best = nullptr;
  for (const auto& e : executors_) {
    if (e.id == requested) return e.id;
    if (!best || e.pending < best->pending) best = &e;
  }
  return best->id;
}

std::future<protocol::Payload> ExecutorPool::submit(const std::string& executor_id,
                                                    protocol::TaskDispatch d,
                                                    std::string worker_id) {
  std::packaged_task<protocol::Payload()> task(
      [this, d = std::move(d), worker_id = std::move(worker_id)] {
        return execute_task(d, worker_id, models_);
      });
  auto future = task.get_future();
  {
    std::lock_guard lock(mutex_);
    for (auto& e : executors_) {
      if (e.id != executor_id) continue;
      e.queue.push_back(std::move(task));
      ++e.pending;
      break;
    }
  }
  wake_.notify_all();
  return future;
}

std::size_t ExecutorPool::queue_length() const {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (const auto& e : executors_) n += e.pending;
  return n;
}

}  // namespace smartedge::node
