#include "smartedge/protocol.hpp"

#include <algorithm>
#include <cmath>

#include "crypto.hpp"
#include "json_io.hpp"
#include "smartedge/error.hpp"

namespace smartedge::protocol {

using nlohmann::json;

namespace {

constexpr std::string_view kAuthPrefix = ",\"auth\":\"";
constexpr std::string_view kAuthSuffix = "\"}";
constexpr std::size_t kAuthTrailer = kAuthPrefix.size() + kAuthTagHexLength + kAuthSuffix.size();

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr std::string_view kTypeNames[] = {
    "RegisterWorker", "LoadQuery", "LoadReport", "JobRequest", "PlacementResponse",
    "TaskDispatch",   "TaskResult", "Heartbeat", "Error"};

json load_to_json(const LoadSample& s) {
  return {{"cpu_load", s.cpu_load},
          {"mem_load", s.mem_load},
          {"queue_length", s.queue_length},
          {"taken_at_ms", s.taken_at_ms}};
}

LoadSample load_from_json(const json& j) {
  return {j.at("cpu_load").get<double>(), j.at("mem_load").get<double>(),
          j.at("queue_length").get<std::uint64_t>(), j.at("taken_at_ms").get<std::int64_t>()};
}

void check_load(const LoadSample& s) {
  const auto fraction = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!fraction(s.cpu_load) || !fraction(s.mem_load)) {
    throw Error(ErrorCode::MalformedBody, "load fractions must lie in [0, 1]");
  }
}

void check_payload(const Payload& p) {
  std::visit(Overloaded{
                 [](const LoadReport& r) { check_load(r.load); },
                 [](const Heartbeat& h) {
                   if (h.load) check_load(*h.load);
                 },
                 [](const PlacementResponse& r) {
                   if (r.decision == PlacementDecision::Cloud && !r.via_cloud) {
                     throw Error(ErrorCode::MalformedBody, "Cloud placement must set via_cloud");
                   }
                   if (!(r.arbitration_ms >= 0.0) || !(r.probe_rtt_ms >= 0.0)) {
                     throw Error(ErrorCode::MalformedBody, "negative timing");
                   }
                 },
                 [](const TaskResult& r) {
                   if (!(r.execution_ms >= 0.0)) throw Error(ErrorCode::MalformedBody, "negative timing");
                 },
                 [](const auto&) {},
             },
             p);
}

json payload_to_json(const Payload& p) {
  return std::visit(
      Overloaded{
          [](const RegisterWorker& r) -> json { return {{"address", r.address}}; },
          [](const LoadQuery& q) -> json { return {{"worker_id", q.worker_id}}; },
          [](const LoadReport& r) -> json {
            return {{"worker_id", r.worker_id}, {"load", load_to_json(r.load)}};
          },
          [](const JobRequest& r) -> json { return {{"job_id", r.job_id}, {"rows", r.rows}}; },
          [](const PlacementResponse& r) -> json {
            return {{"job_id", r.job_id},
                    {"decision", std::string(to_string(r.decision))},
                    {"target_address", r.target_address},
                    {"target_id", r.target_id},
                    {"via_cloud", r.via_cloud},
                    {"arbitration_ms", r.arbitration_ms},
                    {"probe_rtt_ms", r.probe_rtt_ms}};
          },
          [](const TaskDispatch& d) -> json {
            json j = {{"job_id", d.job_id},
                      {"task", d.kind == TaskKind::Predict ? "predict" : "train"},
                      {"executor_id", d.executor_id},
                      {"model_ref", d.model_ref},
                      {"model_inline", d.model_inline},
                      {"csv", d.csv},
                      {"forward_to_cloud", d.forward_to_cloud}};
            if (d.kind == TaskKind::Train) {
              j["algorithm"] = std::string(algorithm_tag(d.algorithm));
              j["hyperparams"] = detail::hyperparams_to_json(d.hyperparams);
              j["seed"] = d.seed;
              j["validation_csv"] = d.validation_csv;
            }
            return j;
          },
          [](const TaskResult& r) -> json {
            json preds = json::array();
            for (const auto& p : r.predictions) preds.push_back(detail::prediction_to_json(p));
            return {{"job_id", r.job_id},
                    {"worker_id", r.worker_id},
                    {"predictions", std::move(preds)},
                    {"execution_ms", r.execution_ms},
                    {"model", r.model}};
          },
          [](const Heartbeat& h) -> json {
            json j = json::object();
            if (h.load) j["load"] = load_to_json(*h.load);
            return j;
          },
          [](const ErrorReply& e) -> json {
            return {{"job_id", e.job_id}, {"code", e.code}, {"detail", e.detail}};
          },
      },
      p);
}

Payload payload_from_json(MessageType type, const json& j) {
  switch (type) {
    case MessageType::RegisterWorker:
      return RegisterWorker{j.at("address").get<std::string>()};
    case MessageType::LoadQuery:
      return LoadQuery{j.at("worker_id").get<std::string>()};
    case MessageType::LoadReport:
      return LoadReport{j.at("worker_id").get<std::string>(), load_from_json(j.at("load"))};
    case MessageType::JobRequest:
      return JobRequest{j.at("job_id").get<std::string>(), j.at("rows").get<std::uint64_t>()};
    case MessageType::PlacementResponse: {
      PlacementResponse r;
      r.job_id = j.at("job_id").get<std::string>();
      const auto decision = parse_decision(j.at("decision").get<std::string>());
      if (!decision) throw Error(ErrorCode::MalformedBody, "unknown placement decision");
      r.decision = *decision;
      r.target_address = j.at("target_address").get<std::string>();
      r.target_id = j.at("target_id").get<std::string>();
      r.via_cloud = j.at("via_cloud").get<bool>();
      r.arbitration_ms = j.at("arbitration_ms").get<double>();
      r.probe_rtt_ms = j.at("probe_rtt_ms").get<double>();
      return r;
    }
    case MessageType::TaskDispatch: {
      TaskDispatch d;
      d.job_id = j.at("job_id").get<std::string>();
      const auto task = j.at("task").get<std::string>();
      if (task != "predict" && task != "train") {
        throw Error(ErrorCode::MalformedBody, "unknown task kind '" + task + "'");
      }
      d.kind = task == "predict" ? TaskKind::Predict : TaskKind::Train;
      d.executor_id = j.at("executor_id").get<std::string>();
      d.model_ref = j.at("model_ref").get<std::string>();
      d.model_inline = j.at("model_inline").get<std::string>();
      d.csv = j.at("csv").get<std::string>();
      d.forward_to_cloud = j.at("forward_to_cloud").get<bool>();
      if (d.kind == TaskKind::Train) {
        const auto algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
        if (!algorithm) throw Error(ErrorCode::MalformedBody, "unknown algorithm");
        d.algorithm = *algorithm;
        d.hyperparams = detail::hyperparams_from_json(j.at("hyperparams"));
        d.seed = j.at("seed").get<std::uint64_t>();
        d.validation_csv = j.at("validation_csv").get<std::string>();
      }
      return d;
    }
    case MessageType::TaskResult: {
      TaskResult r;
      r.job_id = j.at("job_id").get<std::string>();
      r.worker_id = j.at("worker_id").get<std::string>();
      for (const auto& p : j.at("predictions")) r.predictions.push_back(detail::prediction_from_json(p));
      r.execution_ms = j.at("execution_ms").get<double>();
      r.model = j.at("model").get<std::string>();
      return r;
    }
    case MessageType::Heartbeat: {
      Heartbeat h;
      if (j.contains("load")) h.load = load_from_json(j.at("load"));
      return h;
    }
    case MessageType::Error:
      return ErrorReply{j.at("job_id").get<std::string>(), j.at("code").get<std::string>(),
                        j.at("detail").get<std::string>()};
  }
  throw Error(ErrorCode::UnknownType, "unhandled message type");
}

Bytes frame_body(std::string_view body) {
  if (body.size() > kMaxFrameBytes) {
    throw Error(ErrorCode::PayloadTooLarge,
                std::to_string(body.size()) + " bytes exceeds the 64 MiB frame limit");
  }
  const auto n = static_cast<std::uint32_t>(body.size());
  Bytes out;
  out.reserve(kHeaderBytes + body.size());
  out.push_back(static_cast<std::uint8_t>(n >> 24));
  out.push_back(static_cast<std::uint8_t>(n >> 16));
  out.push_back(static_cast<std::uint8_t>(n >> 8));
  out.push_back(static_cast<std::uint8_t>(n));
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

std::uint32_t read_length(std::span<const std::uint8_t> header) {
  return (std::uint32_t{header[0]} << 24) | (std::uint32_t{header[1]} << 16) |
         (std::uint32_t{header[2]} << 8) | std::uint32_t{header[3]};
}

void check_length(std::uint32_t n) {
  if (n == 0 || n > kMaxFrameBytes) {
    throw Error(ErrorCode::BadLength, "frame length " + std::to_string(n));
  }
}

bool is_lower_hex(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); });
}

}  // namespace

std::string_view to_string(MessageType t) noexcept {
  return kTypeNames[static_cast<std::size_t>(t)];
}

std::optional<MessageType> parse_message_type(std::string_view token) {
  for (std::size_t i = 0; i < std::size(kTypeNames); ++i) {
    if (kTypeNames[i] == token) return static_cast<MessageType>(i);
  }
  return std::nullopt;
}

std::string_view to_string(PlacementDecision d) noexcept {
  switch (d) {
    case PlacementDecision::Worker: return "Worker";
    case PlacementDecision::BrokerSelf: return "BrokerSelf";
    case PlacementDecision::Cloud: return "Cloud";
  }
  return "?";
}

std::optional<PlacementDecision> parse_decision(std::string_view token) {
  for (auto d : {PlacementDecision::Worker, PlacementDecision::BrokerSelf, PlacementDecision::Cloud}) {
    if (token == to_string(d)) return d;
  }
  return std::nullopt;
}

MessageType Message::type() const noexcept { return static_cast<MessageType>(payload.index()); }

std::string signed_body(const Message& m) {
  const json j = {{"version", m.version},
                  {"type", std::string(to_string(m.type()))},
                  {"msg_id", m.msg_id},
                  {"sender", m.sender_id},
                  {"payload", payload_to_json(m.payload)}};
  return j.dump();
}

std::string auth_tag_for(const Message& m, std::string_view secret) {
  return detail::hmac_sha256_hex(secret, signed_body(m));
}

Bytes seal_body(std::string_view json_without_auth, std::string_view secret) {
  if (json_without_auth.size() < 2 || json_without_auth.back() != '}') {
    throw Error(ErrorCode::MalformedBody, "body must be a JSON object");
  }
  std::string body(json_without_auth.substr(0, json_without_auth.size() - 1));
  body += kAuthPrefix;
  body += detail::hmac_sha256_hex(secret, json_without_auth);
  body += kAuthSuffix;
  return frame_body(body);
}

Bytes encode(const Message& m, std::string_view secret) {
  check_payload(m.payload);
  return seal_body(signed_body(m), secret);
}

Message decode(std::span<const std::uint8_t> frame, std::string_view secret) {
  if (frame.size() < kHeaderBytes) throw Error(ErrorCode::TruncatedFrame, "missing length prefix");
  const auto n = read_length(frame.first(kHeaderBytes));
  check_length(n);
  if (frame.size() < kHeaderBytes + n) {
    throw Error(ErrorCode::TruncatedFrame, "have " + std::to_string(frame.size() - kHeaderBytes) +
                                               " of " + std::to_string(n) + " body bytes");
  }
  if (frame.size() > kHeaderBytes + n) {
    throw Error(ErrorCode::BadLength, "length prefix " + std::to_string(n) + " but " +
                                          std::to_string(frame.size() - kHeaderBytes) +
                                          " body bytes follow");
  }
  const std::string_view body(reinterpret_cast<const char*>(frame.data() + kHeaderBytes), n);

  if (body.size() < kAuthTrailer + 2 || body.substr(body.size() - kAuthSuffix.size()) != kAuthSuffix ||
      body.substr(body.size() - kAuthTrailer, kAuthPrefix.size()) != kAuthPrefix) {
    throw Error(ErrorCode::MalformedBody, "missing trailing auth member");
  }
  const auto tag = body.substr(body.size() - kAuthTagHexLength - kAuthSuffix.size(), kAuthTagHexLength);
  if (!is_lower_hex(tag)) throw Error(ErrorCode::MalformedBody, "auth tag is not hex");
  std::string signed_text(body.substr(0, body.size() - kAuthTrailer));
  signed_text += '}';
  if (!detail::tags_equal(tag, detail::hmac_sha256_hex(secret, signed_text))) {
    throw Error(ErrorCode::BadAuthTag, "message authentication failed");
  }

  const json j = detail::parse_json(signed_text, ErrorCode::MalformedBody);
  try {
    if (!j.is_object()) throw Error(ErrorCode::MalformedBody, "body is not an object");
    Message m;
    m.version = j.at("version").get<std::uint32_t>();
    if (m.version != kVersion) {
      throw Error(ErrorCode::VersionMismatch, "got version " + std::to_string(m.version) +
                                                  ", expected " + std::to_string(kVersion));
    }
    const auto token = j.at("type").get<std::string>();
    const auto type = parse_message_type(token);
    if (!type) throw Error(ErrorCode::UnknownType, token);
    m.msg_id = j.at("msg_id").get<std::uint64_t>();
    m.sender_id = j.at("sender").get<std::string>();
    m.auth_tag = std::string(tag);
    m.payload = payload_from_json(*type, j.at("payload"));
    check_payload(m.payload);
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedBody, e.what());
  }
}

void FrameReader::feed(std::span<const std::uint8_t> bytes) {
  if (offset_ > 0 && offset_ == buffer_.size()) {
    buffer_.clear();
    offset_ = 0;
  }
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<Bytes> FrameReader::next_frame() {
  if (buffered() < kHeaderBytes) return std::nullopt;
  const auto n = read_length(std::span(buffer_).subspan(offset_, kHeaderBytes));
  check_length(n);
  if (buffered() < kHeaderBytes + n) return std::nullopt;
  Bytes frame(buffer_.begin() + static_cast<std::ptrdiff_t>(offset_),
              buffer_.begin() + static_cast<std::ptrdiff_t>(offset_ + kHeaderBytes + n));
  offset_ += kHeaderBytes + n;
  if (offset_ > (1u << 20) && offset_ * 2 > buffer_.size()) {
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(offset_));
    offset_ = 0;
  }
  return frame;
}

}  // namespace smartedge::protocol
