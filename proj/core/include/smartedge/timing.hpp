#pragma once

#include <cstdint>
#include <string>

namespace smartedge {

// One job as seen from the gateway. Every interval is measured on a
// single node's monotonic clock; latency is the residual.
struct TimingRecord {
  std::string job_id;
  std::string scenario;
  double arbitration_ms = 0.0;  // master: JobRequest receipt to PlacementResponse send
  double latency_ms = 0.0;      // response - arbitration - execution
  double execution_ms = 0.0;    // executor: preprocess + predict
  double response_ms = 0.0;     // gateway: JobRequest send to TaskResult receipt
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;

  // Not part of the CSV schema.
  std::string decision;
  std::string worker_id;
  double probe_rtt_ms = 0.0;

  // Finite, non-negative, and latency_ms >= 0.
  bool valid() const;
};

}  // namespace smartedge
