#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace veryfl {

enum class ErrorCode : std::uint32_t {
  kOk = 0,
  // ledger
  kUnknownSender,
  kBadNonce,
  kSchemaViolation,
  kBrokenHashChain,
  kStateRootMismatch,
  kReceiptMismatch,
  kLogCorrupt,
  kNotFound,
  // contracts
  kNotDeployed,
  kNotServerAccount,
  kAlreadyDeployed,
  kDuplicateAddress,
  kDuplicateClientId,
  kUnregisteredClient,
  kDuplicateRecord,
  kInvalidMetric,
  kNoRegisteredClients,
  kAlreadyElected,
  kRoundNotRecorded,
  kAlreadySettled,
  kInvalidArgument,
  kDuplicateModelId,
  kNoWatermarkIssued,
  kCommitmentMismatch,
  kAlreadyTokenized,
  kUnregisteredOwner,
  kNotOwner,
  kUnknownToken,
  kUnregisteredRecipient,
  // watermark
  kBadDimensions,
  kLengthMismatch,
  // fl_core
  kTooFewSamples,
  kUnknownModel,
  kUnknownDataset,
  kNonFiniteLoss,
  kShapeMismatch,
  kEmptyUpdateSet,
  kWatermarkEmbeddingFailed,
  kConfigError,
  kParseError,
  // chainproxy
  kTooManyClients,
  kDuplicateClient,
  kUnboundClient,
  kOutOfOrderRound,
  kConcurrentMutation,
};

std::string_view to_string(ErrorCode code);

// Inverse of to_string; nullopt for unknown names.
std::optional<ErrorCode> error_code_from_string(std::string_view name);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);
  Error(ErrorCode code, const std::string& detail, std::uint64_t height);

  ErrorCode code() const noexcept { return code_; }
  // Block height the error refers to (replay failures).
  std::optional<std::uint64_t> height() const noexcept { return height_; }

 private:
  ErrorCode code_;
  std::optional<std::uint64_t> height_;
};

}  // namespace veryfl
