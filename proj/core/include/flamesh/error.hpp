#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace flamesh {

enum class ErrorCode {
  kOversizeFrame,
  kNonFiniteValue,
  kTruncatedFrame,
  kMalformedPayload,
  kBindFailure,
  kDuplicateBind,
  kUnreachable,
  kPartialBroadcast,
  kTimeout,
  kClosed,
  kInvalidArgs,
  kDuplicateNodeId,
  kProtocolSkew,
  kSlotReplay,
  kBusy,
  kSimDeadlock,
  kNodeError,
  kBadSpecifier,
  kOutOfRange,
  kInvalidPlan,
  kSpawnFailure,
  kNonzeroExit,
  kOddNodeCount,
};

std::string_view to_string(ErrorCode code);

/// Base of every error the library throws. The code is the stable part;
/// the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// A failed node inside a simulated run.
class NodeError : public Error {
 public:
  NodeError(int node_id, ErrorCode cause, const std::string& what);

  int node_id() const noexcept { return node_id_; }
  ErrorCode cause() const noexcept { return cause_; }

 private:
  int node_id_;
  ErrorCode cause_;
};

}  // namespace flamesh
