#include <benchmark/benchmark.h>

#include <string>

#include "smartedge/dataset.hpp"
#include "smartedge/node.hpp"
#include "smartedge/pipeline.hpp"
#include "smartedge/protocol.hpp"

using namespace smartedge;

namespace {

const PreparedData& prepared() {
  static const PreparedData data = [] {
    PipelineOptions o;
    o.combo = parse_combo("rf-svm-lr");
    o.seed = 7;
    return prepare_data(load_csv(std::string(SMARTEDGE_DATA_DIR) + "/pima-indians-diabetes.csv"), o);
  }();
  return data;
}

protocol::Message dispatch_message(std::size_t rows) {
  const auto& d = prepared();
  FeatureMatrix x(rows, kFeatureCount);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& rec = d.dataset.records[r % d.dataset.size()];
    for (std::size_t c = 0; c < kFeatureCount; ++c) x(r, c) = rec.features[c];
  }
  protocol::TaskDispatch td;
  td.job_id = "job-1";
  td.model_ref = "/srv/model.json";
  td.csv = to_feature_csv(x);
  protocol::Message m;
  m.msg_id = 1;
  m.sender_id = "gateway";
  m.payload = td;
  return m;
}

void BM_EncodeDispatch(benchmark::State& state) {
  const auto m = dispatch_message(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(protocol::encode(m, "secret"));
}
BENCHMARK(BM_EncodeDispatch)->Arg(1)->Arg(100)->Arg(1000);

void BM_DecodeDispatch(benchmark::State& state) {
  const auto frame = protocol::encode(dispatch_message(static_cast<std::size_t>(state.range(0))), "secret");
  for (auto _ : state) benchmark::DoNotOptimize(protocol::decode(frame, "secret"));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * frame.size()));
}
BENCHMARK(BM_DecodeDispatch)->Arg(1)->Arg(100)->Arg(1000);

void BM_Arbitrate(benchmark::State& state) {
  node::RegistrySnapshot snap;
  for (int i = 0; i < state.range(0); ++i) {
    node::WorkerEntry e;
    e.address = "127.0.0.1:" + std::to_string(40000 + i);
    e.load = protocol::LoadSample{0.1 + 0.8 * (i % 7) / 7.0, 0.3, 0, 0};
    snap["worker-" + std::to_string(i)] = e;
  }
  for (auto _ : state) benchmark::DoNotOptimize(node::arbitrate(snap, 0.8, true));
}
BENCHMARK(BM_Arbitrate)->Arg(3)->Arg(64);

void BM_EnsemblePredict(benchmark::State& state) {
  const auto& d = prepared();
  static const Ensemble e = train_sharded(parse_combo("rf-svm-lr"), d.training_data(), Hyperparams{},
                                          7, VotingMode::Hard);
  const auto x = d.scaled;
  for (auto _ : state) {
    for (std::size_t r = 0; r < x.rows(); ++r) benchmark::DoNotOptimize(ensemble_predict(e, x.row(r)));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * x.rows()));
}
BENCHMARK(BM_EnsemblePredict);

void BM_TrainMember(benchmark::State& state) {
  const auto& d = prepared();
  const auto data = d.training_data();
  const auto algorithm = static_cast<Algorithm>(state.range(0));
  state.SetLabel(std::string(algorithm_tag(algorithm)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_model(algorithm, data.train, data.validation, Hyperparams{}, 7));
  }
}
BENCHMARK(BM_TrainMember)
    ->DenseRange(0, 4)
    ->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
