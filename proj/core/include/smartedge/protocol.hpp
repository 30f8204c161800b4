#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "smartedge/models.hpp"

namespace smartedge::protocol {

// Wire format: 4-byte big-endian body length N, then N bytes of UTF-8 JSON.
// The body is a JSON object whose last member is "auth", an HMAC-SHA256
// (lowercase hex) of the body text with that member removed.

inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::size_t kMaxFrameBytes = 64u * 1024u * 1024u;
inline constexpr std::size_t kHeaderBytes = 4;
inline constexpr std::size_t kAuthTagHexLength = 64;

using Bytes = std::vector<std::uint8_t>;

enum class MessageType {
  RegisterWorker,
  LoadQuery,
  LoadReport,
  JobRequest,
  PlacementResponse,
  TaskDispatch,
  TaskResult,
  Heartbeat,
  Error,
};

std::string_view to_string(MessageType t) noexcept;
std::optional<MessageType> parse_message_type(std::string_view token);

struct LoadSample {
  double cpu_load = 0.0;  // [0, 1]
  double mem_load = 0.0;  // [0, 1]
  std::uint64_t queue_length = 0;
  std::int64_t taken_at_ms = 0;  // monotonic clock of the reporter
  friend bool operator==(const LoadSample&, const LoadSample&) = default;
};

// Worker -> master. The worker id is the sender id.
struct RegisterWorker {
  std::string address;  // host:port accepting TaskDispatch / LoadQuery
  friend bool operator==(const RegisterWorker&, const RegisterWorker&) = default;
};

// Master -> worker load check.
struct LoadQuery {
  std::string worker_id;
  friend bool operator==(const LoadQuery&, const LoadQuery&) = default;
};

struct LoadReport {
  std::string worker_id;
  LoadSample load;
  friend bool operator==(const LoadReport&, const LoadReport&) = default;
};

// Gateway -> master.
struct JobRequest {
  std::string job_id;
  std::uint64_t rows = 0;
  friend bool operator==(const JobRequest&, const JobRequest&) = default;
};

enum class PlacementDecision { Worker, BrokerSelf, Cloud };
std::string_view to_string(PlacementDecision d) noexcept;
std::optional<PlacementDecision> parse_decision(std::string_view token);

// Master -> gateway. Cloud placements point at the master, which forwards.
struct PlacementResponse {
  std::string job_id;
  PlacementDecision decision = PlacementDecision::BrokerSelf;
  std::string target_address;
  std::string target_id;
  bool via_cloud = false;
  double arbitration_ms = 0.0;
  double probe_rtt_ms = 0.0;  // mean round trip of remote load checks, 0 if none
  friend bool operator==(const PlacementResponse&, const PlacementResponse&) = default;
};

enum class TaskKind { Predict, Train };

struct TaskDispatch {
  std::string job_id;
  TaskKind kind = TaskKind::Predict;
  std::string executor_id;   // executor that should run the task at the target node
  std::string model_ref;     // path to a model bundle, or
  std::string model_inline;  // the bundle document itself
  std::string csv;           // feature rows (predict) or labeled shard (train)
  bool forward_to_cloud = false;
  // Train tasks only.
  Algorithm algorithm = Algorithm::LogReg;
  Hyperparams hyperparams;
  std::uint64_t seed = 0;
  std::string validation_csv;
  friend bool operator==(const TaskDispatch&, const TaskDispatch&) = default;
};

struct TaskResult {
  std::string job_id;
  std::string worker_id;
  std::vector<Prediction> predictions;  // input row order
  double execution_ms = 0.0;
  std::string model;  // serialized member (train tasks)
  friend bool operator==(const TaskResult&, const TaskResult&) = default;
};

struct Heartbeat {
  std::optional<LoadSample> load;
  friend bool operator==(const Heartbeat&, const Heartbeat&) = default;
};

struct ErrorReply {
  std::string job_id;
  std::string code;
  std::string detail;
  friend bool operator==(const ErrorReply&, const ErrorReply&) = default;
};

using Payload = std::variant<RegisterWorker, LoadQuery, LoadReport, JobRequest, PlacementResponse,
                             TaskDispatch, TaskResult, Heartbeat, ErrorReply>;

struct Message {
  std::uint32_t version = kVersion;
  std::uint64_t msg_id = 0;
  std::string sender_id;
  std::string auth_tag;  // filled by decode; encode computes its own
  Payload payload;

  MessageType type() const noexcept;
  friend bool operator==(const Message&, const Message&) = default;
};

// Body text that the tag covers (the JSON object without "auth").
std::string signed_body(const Message& m);
std::string auth_tag_for(const Message& m, std::string_view secret);

// Throws PayloadTooLarge, or MalformedBody when the payload breaks its
// invariants (load fractions outside [0,1], Cloud without via_cloud).
Bytes encode(const Message& m, std::string_view secret);

// `frame` must be exactly one frame. Throws TruncatedFrame, BadLength,
// MalformedBody, BadAuthTag, VersionMismatch or UnknownType.
Message decode(std::span<const std::uint8_t> frame, std::string_view secret);

// Frames an arbitrary JSON object text (without "auth") under `secret`.
// Lets tooling and tests produce frames the encoder would refuse.
Bytes seal_body(std::string_view json_without_auth, std::string_view secret);

// Splits a byte stream into frames.
class FrameReader {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  // Next complete frame (header included), if buffered. Throws BadLength
  // as soon as a bad header is seen.
  std::optional<Bytes> next_frame();
  std::size_t buffered() const noexcept { return buffer_.size() - offset_; }

 private:
  Bytes buffer_;
  std::size_t offset_ = 0;
};

// Monotonic per-process message ids.
class MessageIds {
 public:
  std::uint64_t next() noexcept { return ++last_; }

 private:
  std::atomic<std::uint64_t> last_{0};
};

}  // namespace smartedge::protocol
