#include "coderoute/error.hpp"

namespace coderoute {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::UnknownReference: return "UnknownReference";
    case ErrorCode::DuplicateKey: return "DuplicateKey";
    case ErrorCode::MissingPrice: return "MissingPrice";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::NonPositiveArgument: return "NonPositiveArgument";
    case ErrorCode::MissingSamples: return "MissingSamples";
    case ErrorCode::NoCotData: return "NoCotData";
    case ErrorCode::TooFewDistinctValues: return "TooFewDistinctValues";
    case ErrorCode::DegenerateDistribution: return "DegenerateDistribution";
    case ErrorCode::ItemSetMismatch: return "ItemSetMismatch";
    case ErrorCode::MissingEmbedding: return "MissingEmbedding";
    case ErrorCode::InsufficientCluster: return "InsufficientCluster";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::SpecError: return "SpecError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

namespace {

std::string compose(ErrorCode code, const std::string& detail,
                    const std::vector<std::string>& offenders) {
  std::string msg(error_code_name(code));
  msg += ": ";
  msg += detail;
  if (!offenders.empty()) {
    msg += " [";
    for (std::size_t i = 0; i < offenders.size(); ++i) {
      if (i) msg += ", ";
      msg += offenders[i];
    }
    msg += "]";
  }
  return msg;
}

}  // namespace

DataError::DataError(ErrorCode code, std::string detail, std::vector<std::string> offenders)
    : std::runtime_error(compose(code, detail, offenders)),
      code_(code),
      detail_(std::move(detail)),
      offenders_(std::move(offenders)) {}

}  // namespace coderoute
