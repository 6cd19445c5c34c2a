#include "flamesh/error.hpp"

namespace flamesh {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOversizeFrame: return "OversizeFrame";
    case ErrorCode::kNonFiniteValue: return "NonFiniteValue";
    case ErrorCode::kTruncatedFrame: return "TruncatedFrame";
    case ErrorCode::kMalformedPayload: return "MalformedPayload";
    case ErrorCode::kBindFailure: return "BindFailure";
    case ErrorCode::kDuplicateBind: return "DuplicateBind";
    case ErrorCode::kUnreachable: return "Unreachable";
    case ErrorCode::kPartialBroadcast: return "PartialBroadcast";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kClosed: return "Closed";
    case ErrorCode::kInvalidArgs: return "InvalidArgs";
    case ErrorCode::kDuplicateNodeId: return "DuplicateNodeId";
    case ErrorCode::kProtocolSkew: return "ProtocolSkew";
    case ErrorCode::kSlotReplay: return "SlotReplay";
    case ErrorCode::kBusy: return "Busy";
    case ErrorCode::kSimDeadlock: return "SimDeadlock";
    case ErrorCode::kNodeError: return "NodeError";
    case ErrorCode::kBadSpecifier: return "BadSpecifier";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kInvalidPlan: return "InvalidPlan";
    case ErrorCode::kSpawnFailure: return "SpawnFailure";
    case ErrorCode::kNonzeroExit: return "NonzeroExit";
    case ErrorCode::kOddNodeCount: return "OddNodeCount";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

NodeError::NodeError(int node_id, ErrorCode cause, const std::string& what)
    : Error(ErrorCode::kNodeError, "node " + std::to_string(node_id) + " failed: " + what),
      node_id_(node_id),
      cause_(cause) {}

}  // namespace flamesh
