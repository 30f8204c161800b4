#include "smartedge/error.hpp"

namespace smartedge {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::UnknownColumn: return "UnknownColumn";
    case ErrorCode::BadRatios: return "BadRatios";
    case ErrorCode::TooFewRecords: return "TooFewRecords";
    case ErrorCode::EmptyIndexSet: return "EmptyIndexSet";
    case ErrorCode::ArityMismatch: return "ArityMismatch";
    case ErrorCode::BadK: return "BadK";
    case ErrorCode::SingleClassTraining: return "SingleClassTraining";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyMemberList: return "EmptyMemberList";
    case ErrorCode::UnnormalizedInput: return "UnnormalizedInput";
    case ErrorCode::MalformedModel: return "MalformedModel";
    case ErrorCode::PayloadTooLarge: return "PayloadTooLarge";
    case ErrorCode::TruncatedFrame: return "TruncatedFrame";
    case ErrorCode::BadLength: return "BadLength";
    case ErrorCode::MalformedBody: return "MalformedBody";
    case ErrorCode::UnknownType: return "UnknownType";
    case ErrorCode::BadAuthTag: return "BadAuthTag";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::BindFailure: return "BindFailure";
    case ErrorCode::ConnectionFailure: return "ConnectionFailure";
    case ErrorCode::ConnectionClosed: return "ConnectionClosed";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::MasterUnreachable: return "MasterUnreachable";
    case ErrorCode::TaskFailure: return "TaskFailure";
    case ErrorCode::PlacementTimeout: return "PlacementTimeout";
    case ErrorCode::DispatchTimeout: return "DispatchTimeout";
    case ErrorCode::ResultMismatch: return "ResultMismatch";
    case ErrorCode::WorkerTrainingFailure: return "WorkerTrainingFailure";
    case ErrorCode::IllegalTransition: return "IllegalTransition";
    case ErrorCode::PortConflict: return "PortConflict";
    case ErrorCode::NodeCrash: return "NodeCrash";
    case ErrorCode::UnknownPreset: return "UnknownPreset";
    case ErrorCode::WriteFailure: return "WriteFailure";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

namespace {

std::string compose(ErrorCode code, const std::string& detail,
                    std::optional<std::size_t> line) {
  std::string out(to_string(code));
  if (line) out += " (line " + std::to_string(*line) + ")";
  if (!detail.empty()) out += ": " + detail;
  return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& detail,
             std::optional<std::size_t> line)
    : std::runtime_error(compose(code, detail, line)),
      code_(code),
      detail_(detail),
      line_(line) {}

}  // namespace smartedge
