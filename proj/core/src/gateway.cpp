#include "node_internal.hpp"
#include "smartedge/error.hpp"

namespace smartedge::node {

namespace {

JobOutcome submit(const NodeConfig& cfg, std::string_view csv_block, const std::string& model_ref,
                  const std::string& model_inline, const std::string& job_id) {
  NodeConfig checked = cfg;
  checked.role = Role::Gateway;
  checked.validate();
  const auto rows = parse_feature_csv(csv_block).features.rows();
  const auto timeout = net::Millis(cfg.timeout_ms);
  protocol::MessageIds ids;
  auto message = [&](protocol::Payload p) {
    protocol::Message m;
    m.msg_id = ids.next();
    m.sender_id = cfg.node_id;
    m.payload = std::move(p);
    return m;
  };

  net::Connection master;
  try {
    master = net::Connection::connect(net::parse_endpoint(cfg.master_address), timeout);
  } catch (const Error& e) {
    throw Error(ErrorCode::MasterUnreachable, e.detail());
  }

  const auto start = std::chrono::steady_clock::now();
  master.send(message(protocol::JobRequest{job_id, rows}), cfg.shared_secret,
              cfg.delay_to(cfg.master_id));
  protocol::Message placed;
  try {
    placed = master.receive(cfg.shared_secret, timeout);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Timeout && e.code() != ErrorCode::ConnectionClosed) throw;
    throw Error(ErrorCode::PlacementTimeout, "job " + job_id + ": " + e.detail());
  }
  if (const auto* err = std::get_if<protocol::ErrorReply>(&placed.payload)) {
    throw Error(ErrorCode::TaskFailure, err->code + ": " + err->detail);
  }
  const auto* placement = std::get_if<protocol::PlacementResponse>(&placed.payload);
  if (!placement || placement->job_id != job_id) {
    throw Error(ErrorCode::PlacementTimeout, "job " + job_id + ": no matching placement");
  }

  JobOutcome out;
  out.placement = *placement;
  net::Connection target_conn;
  const bool reuse = placement->target_id == cfg.master_id;
  if (!reuse) {
    try {
      target_conn = net::Connection::connect(net::parse_endpoint(placement->target_address), timeout);
    } catch (const Error& e) {
      throw Error(ErrorCode::DispatchTimeout, "job " + job_id + ": " + e.detail());
    }
  }
  net::Connection& target = reuse ? master : target_conn;

  protocol::TaskDispatch d;
  d.job_id = job_id;
  d.model_ref = model_ref;
  d.model_inline = model_inline;
  d.csv = std::string(csv_block);
  d.forward_to_cloud = placement->via_cloud;
  protocol::Message answered;
  try {
    target.send(message(std::move(d)), cfg.shared_secret, cfg.delay_to(placement->target_id));
    answered = target.receive(cfg.shared_secret, timeout);
  } catch (const Error& e) {
    // A dead executor closes the socket rather than going silent; either
    // way no result is coming.
    if (e.code() != ErrorCode::Timeout && e.code() != ErrorCode::ConnectionClosed &&
        e.code() != ErrorCode::TruncatedFrame) {
      throw;
    }
    throw Error(ErrorCode::DispatchTimeout, "job " + job_id + " at " +
                                                placement->target_address + ": " + e.detail());
  }
  const double response_ms = elapsed_ms(start);

  if (const auto* err = std::get_if<protocol::ErrorReply>(&answered.payload)) {
    throw Error(ErrorCode::TaskFailure, err->code + ": " + err->detail);
  }
  auto* result = std::get_if<protocol::TaskResult>(&answered.payload);
  if (!result || result->job_id != job_id) {
    throw Error(ErrorCode::ResultMismatch, "job " + job_id + ": unexpected reply");
  }
  if (result->predictions.size() != rows) {
    throw Error(ErrorCode::ResultMismatch, "sent " + std::to_string(rows) + " rows, got " +
                                               std::to_string(result->predictions.size()));
  }

  auto& t = out.timing;
  t.job_id = job_id;
  t.arbitration_ms = placement->arbitration_ms;
  t.execution_ms = result->execution_ms;
  t.response_ms = response_ms;
  t.latency_ms = response_ms - t.arbitration_ms - t.execution_ms;
  t.bytes_sent = master.bytes_sent() + target_conn.bytes_sent();
  t.bytes_received = master.bytes_received() + target_conn.bytes_received();
  t.decision = std::string(to_string(placement->decision));
  t.worker_id = result->worker_id;
  t.probe_rtt_ms = placement->probe_rtt_ms;
  out.predictions = std::move(result->predictions);
  return out;
}

}  // namespace

JobOutcome submit_job(const NodeConfig& gateway, std::string_view csv_block,
                      const std::string& model_ref, const std::string& job_id) {
  // Executors resolve the path themselves, possibly from another directory.
  const auto path = model_ref.empty() ? model_ref : std::filesystem::absolute(model_ref).string();
  return submit(gateway, csv_block, path, "", job_id);
}

JobOutcome submit_job_inline(const NodeConfig& gateway, std::string_view csv_block,
                             const std::string& model_document, const std::string& job_id) {
  return submit(gateway, csv_block, "", model_document, job_id);
}

}  // namespace smartedge::node
