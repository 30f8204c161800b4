#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace smartedge {

enum class ErrorCode {
  // dataset
  MissingFile,
  MalformedRow,
  EmptyDataset,
  UnknownColumn,
  BadRatios,
  TooFewRecords,
  EmptyIndexSet,
  ArityMismatch,
  BadK,
  // models / ensemble
  SingleClassTraining,
  DimensionMismatch,
  LengthMismatch,
  EmptyMemberList,
  UnnormalizedInput,
  MalformedModel,
  // protocol
  PayloadTooLarge,
  TruncatedFrame,
  BadLength,
  MalformedBody,
  UnknownType,
  BadAuthTag,
  VersionMismatch,
  // node
  InvalidConfig,
  BindFailure,
  ConnectionFailure,
  ConnectionClosed,
  Timeout,
  MasterUnreachable,
  TaskFailure,
  PlacementTimeout,
  DispatchTimeout,
  ResultMismatch,
  WorkerTrainingFailure,
  IllegalTransition,
  // bench
  PortConflict,
  NodeCrash,
  UnknownPreset,
  WriteFailure,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

// All library failures surface as this exception. `line` carries a 1-based
// source position where one exists (CSV line, data row).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail,
        std::optional<std::size_t> line = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  ErrorCode code_;
  std::string detail_;
  std::optional<std::size_t> line_;
};

}  // namespace smartedge
