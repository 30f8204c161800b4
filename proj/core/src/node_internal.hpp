#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <list>
#include <mutex>
#include <thread>

#include "smartedge/node.hpp"

namespace smartedge::node {

void log_line(std::string_view node_id, std::string_view text);

double elapsed_ms(std::chrono::steady_clock::time_point since);

// Accept loop plus one thread per connection.
class Server {
 public:
  using Handler = std::function<void(net::Connection&)>;

  ~Server();
  void start(const net::Endpoint& at, Handler handler);
  void stop();
  bool stopping() const noexcept { return stopping_.load(); }
  net::Endpoint address() const { return address_; }

 private:
  void reap();

  struct Session {
    std::thread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };
  net::Listener listener_;
  net::Endpoint address_;
  std::thread acceptor_;
  std::atomic<bool> stopping_{false};
  std::mutex mutex_;
  std::list<Session> sessions_;
};

// Next authenticated message on `conn`, or empty once the peer hangs up
// or the server stops. Codec failures propagate.
std::optional<protocol::Message> read_message(net::Connection& conn, std::string_view secret,
                                              const Server& server);

class ModelCache {
 public:
  std::shared_ptr<const ModelBundle> get(const std::string& path);

 private:
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const ModelBundle>> bundles_;
};

// Runs a dispatch and returns TaskResult or ErrorReply.
protocol::Payload execute_task(const protocol::TaskDispatch& d, const std::string& worker_id,
                               ModelCache& models);

protocol::ErrorReply error_reply(const std::string& job_id, const std::exception& e);

// FIFO executors, each with its own thread.
class ExecutorPool {
 public:
  explicit ExecutorPool(std::vector<std::string> ids);
  ~ExecutorPool();

  // `requested` when it names an executor, otherwise the one with the
  // shortest queue (ties to the first id).
  std::string pick(const std::string& requested) const;
  std::future<protocol::Payload> submit(const std::string& executor_id, protocol::TaskDispatch d,
                                        std::string worker_id);
  std::size_t queue_length() const;
  ModelCache& models() noexcept { return models_; }

 private:
  struct Executor {
    std::string id;
    std::deque<std::packaged_task<protocol::Payload()>> queue;
    std::size_t pending = 0;  // queued plus running
    std::thread thread;
  };
  void run(Executor& e);

  mutable std::mutex mutex_;
  std::condition_variable wake_;
  bool stopping_ = false;
  std::list<Executor> executors_;
  ModelCache models_;
};

}  // namespace smartedge::node
