// Prints one encoded frame per message type, as JSON body plus hex dump.
// Used to regenerate the examples in docs/protocol.md.

#include <cstdio>
#include <iostream>
#include <string>

#include "smartedge/protocol.hpp"

using namespace smartedge;
using namespace smartedge::protocol;

namespace {

constexpr const char* kSecret = "smartedge";

void hexdump(const Bytes& bytes) {
  for (std::size_t off = 0; off < bytes.size(); off += 16) {
    std::printf("%08zx ", off);
    for (std::size_t i = 0; i < 16; ++i) {
      if (i == 8) std::printf(" ");
      if (off + i < bytes.size()) {
        std::printf(" %02x", bytes[off + i]);
      } else {
        std::printf("   ");
      }
    }
    std::printf("  |");
    for (std::size_t i = off; i < off + 16 && i < bytes.size(); ++i) {
      const int c = bytes[i];
      std::putchar(c >= 0x20 && c < 0x7f ? c : '.');
    }
    std::printf("|\n");
  }
}

void show(std::uint64_t id, const std::string& sender, Payload p) {
  Message m;
  m.msg_id = id;
  m.sender_id = sender;
  m.payload = std::move(p);
  const auto frame = encode(m, kSecret);
  std::printf("### %s\n\n", std::string(to_string(m.type())).c_str());
  std::printf("```\n%s\n```\n\n", std::string(frame.begin() + kHeaderBytes, frame.end()).c_str());
  std::printf("```\n");
  hexdump(frame);
  std::printf("```\n\n");
}

}  // namespace

int main() {
  const LoadSample load{0.35, 0.42, 1, 120530};
  show(1, "worker-1", RegisterWorker{"127.0.0.1:40112"});
  show(7, "master", LoadQuery{"worker-1"});
  show(3, "worker-1", LoadReport{"worker-1", load});
  show(1, "gateway", JobRequest{"job-1", 2});

  PlacementResponse pr;
  pr.job_id = "job-1";
  pr.decision = PlacementDecision::Worker;
  pr.target_address = "127.0.0.1:40112";
  pr.target_id = "worker-1";
  pr.arbitration_ms = 0.5;
  pr.probe_rtt_ms = 0.25;
  show(8, "master", pr);

  TaskDispatch td;
  td.job_id = "job-1";
  td.model_ref = "/srv/model.json";
  td.csv = "Pregnancies,Glucose,BloodPressure,SkinThickness,Insulin,BMI,DiabetesPedigreeFunction,Age\n"
           "1,89,66,23,94,28.1,0.167,21\n";
  show(2, "gateway", td);

  TaskResult tr;
  tr.job_id = "job-1";
  tr.worker_id = "worker-1";
  tr.predictions = {Prediction{0, {0.75, 0.25}}};
  tr.execution_ms = 0.125;
  show(4, "worker-1", tr);

  show(5, "worker-1", Heartbeat{load});
  show(9, "master", ErrorReply{"job-2", "TaskFailure", "model file missing"});
  return 0;
}
