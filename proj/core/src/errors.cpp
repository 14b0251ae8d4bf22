#include "veryfl/errors.hpp"

#include <array>
#include <utility>

namespace veryfl {
namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 46> kNames{{
    {ErrorCode::kOk, "Ok"},
    {ErrorCode::kUnknownSender, "UnknownSender"},
    {ErrorCode::kBadNonce, "BadNonce"},
    {ErrorCode::kSchemaViolation, "SchemaViolation"},
    {ErrorCode::kBrokenHashChain, "BrokenHashChain"},
    {ErrorCode::kStateRootMismatch, "StateRootMismatch"},
    {ErrorCode::kReceiptMismatch, "ReceiptMismatch"},
    {ErrorCode::kLogCorrupt, "LogCorrupt"},
    {ErrorCode::kNotFound, "NotFound"},
    {ErrorCode::kNotDeployed, "NotDeployed"},
    {ErrorCode::kNotServerAccount, "NotServerAccount"},
    {ErrorCode::kAlreadyDeployed, "AlreadyDeployed"},
    {ErrorCode::kDuplicateAddress, "DuplicateAddress"},
    {ErrorCode::kDuplicateClientId, "DuplicateClientId"},
    {ErrorCode::kUnregisteredClient, "UnregisteredClient"},
    {ErrorCode::kDuplicateRecord, "DuplicateRecord"},
    {ErrorCode::kInvalidMetric, "InvalidMetric"},
    {ErrorCode::kNoRegisteredClients, "NoRegisteredClients"},
    {ErrorCode::kAlreadyElected, "AlreadyElected"},
    {ErrorCode::kRoundNotRecorded, "RoundNotRecorded"},
    {ErrorCode::kAlreadySettled, "AlreadySettled"},
    {ErrorCode::kInvalidArgument, "InvalidArgument"},
    {ErrorCode::kDuplicateModelId, "DuplicateModelId"},
    {ErrorCode::kNoWatermarkIssued, "NoWatermarkIssued"},
    {ErrorCode::kCommitmentMismatch, "CommitmentMismatch"},
    {ErrorCode::kAlreadyTokenized, "AlreadyTokenized"},
    {ErrorCode::kUnregisteredOwner, "UnregisteredOwner"},
    {ErrorCode::kNotOwner, "NotOwner"},
    {ErrorCode::kUnknownToken, "UnknownToken"},
    {ErrorCode::kUnregisteredRecipient, "UnregisteredRecipient"},
    {ErrorCode::kBadDimensions, "BadDimensions"},
    {ErrorCode::kLengthMismatch, "LengthMismatch"},
    {ErrorCode::kTooFewSamples, "TooFewSamples"},
    {ErrorCode::kUnknownModel, "UnknownModel"},
    {ErrorCode::kUnknownDataset, "UnknownDataset"},
    {ErrorCode::kNonFiniteLoss, "NonFiniteLoss"},
    {ErrorCode::kShapeMismatch, "ShapeMismatch"},
    {ErrorCode::kEmptyUpdateSet, "EmptyUpdateSet"},
    {ErrorCode::kWatermarkEmbeddingFailed, "WatermarkEmbeddingFailed"},
    {ErrorCode::kConfigError, "ConfigError"},
    {ErrorCode::kParseError, "ParseError"},
    {ErrorCode::kTooManyClients, "TooManyClients"},
    {ErrorCode::kDuplicateClient, "DuplicateClient"},
    {ErrorCode::kUnboundClient, "UnboundClient"},
    {ErrorCode::kOutOfOrderRound, "OutOfOrderRound"},
    {ErrorCode::kConcurrentMutation, "ConcurrentMutation"},
}};

std::string compose(ErrorCode code, const std::string& detail) {
  std::string msg{to_string(code)};
  if (!detail.empty()) {
    msg += ": ";
    msg += detail;
  }
  return msg;
}

}  // namespace

std::string_view to_string(ErrorCode code) {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "Unknown";
}

std::optional<ErrorCode> error_code_from_string(std::string_view name) {
  for (const auto& [c, n] : kNames) {
    if (n == name) return c;
  }
  return std::nullopt;
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(compose(code, detail)), code_(code) {}

Error::Error(ErrorCode code, const std::string& detail, std::uint64_t height)
    : std::runtime_error(compose(code, detail + " (height " +
                                           std::to_string(height) + ")")),
      code_(code),
      height_(height) {}

}  // namespace veryfl
