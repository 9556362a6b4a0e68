#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace coderoute {

enum class ErrorCode {
  MalformedLine,
  UnknownReference,
  DuplicateKey,
  MissingPrice,
  VersionMismatch,
  SchemaError,
  NonPositiveArgument,
  MissingSamples,
  NoCotData,
  TooFewDistinctValues,
  DegenerateDistribution,
  ItemSetMismatch,
  MissingEmbedding,
  InsufficientCluster,
  NonFiniteLoss,
  EmptyTrainingSet,
  DimensionMismatch,
  DomainError,
  SpecError,
  InvalidArgument,
  IoError,
};

std::string_view error_code_name(ErrorCode code);

// Every failure the pipeline reports about its inputs. `offenders` holds at
// most kMaxOffenders identifiers (line numbers, ids) for bulk validation.
class DataError : public std::runtime_error {
 public:
  static constexpr std::size_t kMaxOffenders = 20;

  DataError(ErrorCode code, std::string detail, std::vector<std::string> offenders = {});

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }
  const std::vector<std::string>& offenders() const noexcept { return offenders_; }

 private:
  ErrorCode code_;
  std::string detail_;
  std::vector<std::string> offenders_;
};

}  // namespace coderoute
