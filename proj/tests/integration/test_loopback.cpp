#include <gtest/gtest.h>

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <memory>
#include <thread>

#include "smartedge/ensemble.hpp"
#include "smartedge/error.hpp"
#include "smartedge/net.hpp"
#include "smartedge/node.hpp"
#include "smartedge/pipeline.hpp"

using namespace smartedge;
using namespace smartedge::node;
namespace fs = std::filesystem;

namespace {

const fs::path kCsv = fs::path(SMARTEDGE_DATA_DIR) / "pima-indians-diabetes.csv";

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no smartedge::Error thrown";
  return ErrorCode::Io;
}

NodeConfig master_config() {
  NodeConfig c;
  c.role = Role::Master;
  c.node_id = "master";
  c.heartbeat_interval_ms = 100;
  c.timeout_ms = 3000;
  return c;
}

NodeConfig worker_config(const Master& m, const std::string& id, std::vector<double> profile) {
  NodeConfig c;
  c.role = Role::Worker;
  c.node_id = id;
  c.master_address = m.address().to_string();
  c.heartbeat_interval_ms = 100;
  c.load_profile = std::move(profile);
  c.timeout_ms = 3000;
  return c;
}

NodeConfig gateway_config(const std::string& master_address) {
  NodeConfig c;
  c.role = Role::Gateway;
  c.node_id = "gateway";
  c.master_address = master_address;
  c.timeout_ms = 3000;
  return c;
}

protocol::Message message(protocol::Payload p, const std::string& sender) {
  static protocol::MessageIds ids;
  protocol::Message m;
  m.msg_id = ids.next();
  m.sender_id = sender;
  m.payload = std::move(p);
  return m;
}

// One trained model plus a 40-row query shared by the suite.
class Loopback : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(fs::temp_directory_path() /
                        ("smartedge-loopback-" + std::to_string(::getpid())));
    fs::create_directories(*dir_);
    const auto raw = load_csv(kCsv);
    PipelineOptions o;
    o.combo = parse_combo("svm-dt-lr");
    o.seed = 3;
    save_bundle(run_training_pipeline(raw, o).bundle, model_path());
    const auto clean = drop_missing(raw);
    FeatureMatrix rows(40, kFeatureCount);
    for (std::size_t r = 0; r < 40; ++r) {
      for (std::size_t c = 0; c < kFeatureCount; ++c) rows(r, c) = clean.records[r].features[c];
    }
    csv_ = new std::string(to_feature_csv(rows));
  }
  static void TearDownTestSuite() {
    fs::remove_all(*dir_);
    delete dir_;
    delete csv_;
  }
  static std::string model_path() { return (*dir_ / "model.json").string(); }
  static std::vector<Label> local_labels() {
    std::vector<Label> out;
    for (const auto& p : load_bundle(model_path()).predict_raw(parse_feature_csv(*csv_).features)) {
      out.push_back(p.label);
    }
    return out;
  }
  static std::vector<Label> labels_of(const JobOutcome& o) {
    std::vector<Label> out;
    for (const auto& p : o.predictions) out.push_back(p.label);
    return out;
  }

  static fs::path* dir_;
  static std::string* csv_;
};
fs::path* Loopback::dir_ = nullptr;
std::string* Loopback::csv_ = nullptr;

}  // namespace

TEST_F(Loopback, WorkerPlacementMatchesLocalPrediction) {
  Master master(master_config());
  master.start();
  Worker w1(worker_config(master, "w1", {0.3}));
  Worker w2(worker_config(master, "w2", {0.1}));
  w1.start();
  w2.start();

  const auto gw = gateway_config(master.address().to_string());
  const auto out = submit_job(gw, *csv_, model_path(), "job-a");
  EXPECT_EQ(out.placement.decision, protocol::PlacementDecision::Worker);
  EXPECT_EQ(out.placement.target_id, "w2");
  EXPECT_EQ(labels_of(out), local_labels());
  EXPECT_GE(out.timing.response_ms, out.timing.execution_ms);

  const auto inline_out =
      submit_job_inline(gw, *csv_, serialize_bundle(load_bundle(model_path())), "job-b");
  EXPECT_EQ(labels_of(inline_out), local_labels());

  const auto record = master.job("job-a");
  ASSERT_TRUE(record.has_value());
  // The result goes straight from the worker to the gateway.
  EXPECT_EQ(record->state(), JobState::Dispatched);

  w1.stop();
  w2.stop();
  master.stop();
}

TEST_F(Loopback, BusyWorkersFallBackToBrokerExecutors) {
  auto mc = master_config();
  mc.local_executors = 2;
  Master master(mc);
  master.start();
  Worker w(worker_config(master, "w1", {0.95}));
  w.start();
  const auto out = submit_job(gateway_config(master.address().to_string()), *csv_, model_path(), "job-busy");
  EXPECT_EQ(out.placement.decision, protocol::PlacementDecision::BrokerSelf);
  EXPECT_EQ(out.placement.target_id, "master");
  EXPECT_EQ(labels_of(out), local_labels());
  EXPECT_EQ(master.job("job-busy")->state(), JobState::Completed);
  w.stop();
  master.stop();
}

TEST_F(Loopback, CloudPlacementIsForwardedThroughTheMaster) {
  NodeConfig cc;
  cc.role = Role::Worker;
  cc.node_id = "cloud";
  cc.cloud_node = true;
  cc.timeout_ms = 3000;
  Worker cloud(cc);
  cloud.start();

  auto mc = master_config();
  mc.cloud_enabled = true;
  mc.cloud_address = cloud.address().to_string();
  mc.heavy_load_threshold = 0.2;
  Master master(mc);
  master.start();
  Worker w(worker_config(master, "w1", {0.5}));
  w.start();

  const auto out = submit_job(gateway_config(master.address().to_string()), *csv_, model_path(), "job-c");
  EXPECT_EQ(out.placement.decision, protocol::PlacementDecision::Cloud);
  EXPECT_TRUE(out.placement.via_cloud);
  EXPECT_EQ(labels_of(out), local_labels());
  w.stop();
  master.stop();
  cloud.stop();
}

TEST_F(Loopback, DeadExecutorIsDispatchTimeout) {
  Master master(master_config());
  master.start();

  // A fake worker that answers load checks but drops every task.
  auto listener = net::Listener::bind(net::Endpoint{});
  std::atomic<bool> done{false};
  std::thread fake([&] {
    std::vector<std::thread> sessions;
    while (!done) {
      auto conn = listener.accept(net::Millis(50));
      if (!conn) continue;
      sessions.emplace_back([c = std::move(*conn), &done]() mutable {
        try {
          while (!done) {
            const auto m = c.receive("smartedge", net::Millis(2000));
            if (std::holds_alternative<protocol::LoadQuery>(m.payload)) {
              c.send(message(protocol::LoadReport{"fake", protocol::LoadSample{0.01, 0, 0, 0}}, "fake"),
                     "smartedge");
            } else {
              c.close();
              return;
            }
          }
        } catch (const Error&) {
        }
      });
    }
    for (auto& s : sessions) s.join();
  });

  auto reg = net::Connection::connect(master.address(), net::Millis(1000));
  reg.send(message(protocol::RegisterWorker{listener.local().to_string()}, "fake"), "smartedge");
  reg.receive("smartedge", net::Millis(1000));

  const auto gw = gateway_config(master.address().to_string());
  EXPECT_EQ(code_of([&] { submit_job(gw, *csv_, model_path(), "job-d"); }), ErrorCode::DispatchTimeout);

  done = true;
  fake.join();
  reg.close();
  master.stop();
}

TEST_F(Loopback, BadAuthMarksWorkerCompromised) {
  Master master(master_config());
  master.start();
  auto conn = net::Connection::connect(master.address(), net::Millis(1000));
  conn.send(message(protocol::RegisterWorker{"127.0.0.1:1"}, "rogue"), "smartedge");
  conn.receive("smartedge", net::Millis(1000));
  EXPECT_FALSE(master.registry().snapshot(monotonic_ms()).at("rogue").compromised);

  conn.send(message(protocol::Heartbeat{}, "rogue"), "wrong-secret");
  bool compromised = false;
  for (int i = 0; i < 100 && !compromised; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
    compromised = master.registry().snapshot(monotonic_ms()).at("rogue").compromised;
  }
  EXPECT_TRUE(compromised);
  EXPECT_FALSE(master.registry().snapshot(monotonic_ms()).at("rogue").healthy);
  master.stop();
}

TEST_F(Loopback, UnreachableMaster) {
  auto listener = net::Listener::bind(net::Endpoint{});
  const auto addr = listener.local().to_string();
  listener.close();
  EXPECT_EQ(code_of([&] { submit_job(gateway_config(addr), *csv_, model_path(), "job-e"); }),
            ErrorCode::MasterUnreachable);
}

TEST_F(Loopback, SilentMasterIsPlacementTimeout) {
  auto listener = net::Listener::bind(net::Endpoint{});
  std::thread silent([&] {
    auto c = listener.accept(net::Millis(2000));
    std::this_thread::sleep_for(std::chrono::milliseconds(600));
  });
  auto gw = gateway_config(listener.local().to_string());
  gw.timeout_ms = 200;
  EXPECT_EQ(code_of([&] { submit_job(gw, *csv_, model_path(), "job-f"); }), ErrorCode::PlacementTimeout);
  silent.join();
}

TEST(DistributedTraining, MatchesLocalShardedTraining) {
  Master master(master_config());
  master.start();
  Worker w1(worker_config(master, "w1", {0.2}));
  Worker w2(worker_config(master, "w2", {0.4}));
  w1.start();
  w2.start();

  PipelineOptions o;
  o.seed = 11;
  const auto data = prepare_data(load_csv(kCsv), o).training_data();
  const auto combo = parse_combo("svm-dt-lr");
  const auto remote = master.distribute_training(combo, data, Hyperparams{}, 11, VotingMode::Hard);
  const auto local = train_sharded(combo, data, Hyperparams{}, 11, VotingMode::Hard);
  EXPECT_EQ(serialize_ensemble(remote), serialize_ensemble(local));

  w1.stop();
  w2.stop();
  master.stop();
}
