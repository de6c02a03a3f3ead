#include "tamperled/error.hpp"

namespace tamperled {

const char* err_name(Err e) {
  switch (e) {
    case Err::BadLinkage: return "BAD_LINKAGE";
    case Err::BadHeight: return "BAD_HEIGHT";
    case Err::BadDataHash: return "BAD_DATA_HASH";
    case Err::BadHeaderDigest: return "BAD_HEADER_DIGEST";
    case Err::BadMetadataDigest: return "BAD_METADATA_DIGEST";
    case Err::BadEncoding: return "BAD_ENCODING";
    case Err::OutOfRange: return "OUT_OF_RANGE";
    case Err::Io: return "IO_ERROR";
    case Err::DuplicateCa: return "DUPLICATE_CA";
    case Err::RoleNotAllowed: return "ROLE_NOT_ALLOWED";
    case Err::MalformedKey: return "MALFORMED_KEY";
    case Err::BadCertificate: return "BAD_CERTIFICATE";
    case Err::ParseError: return "PARSE_ERROR";
    case Err::InvalidConfig: return "INVALID_CONFIG";
    case Err::ConfigError: return "CONFIG_ERROR";
    case Err::NotAMember: return "NOT_A_MEMBER";
    case Err::AccessDenied: return "ACCESS_DENIED";
    case Err::ChaincodeNotInstalled: return "CHAINCODE_NOT_INSTALLED";
    case Err::ChaincodeError: return "CHAINCODE_ERROR";
    case Err::DivergentEndorsements: return "DIVERGENT_ENDORSEMENTS";
    case Err::Replay: return "REPLAY";
    case Err::NetworkDown: return "NETWORK_DOWN";
    case Err::AlreadyRunning: return "ALREADY_RUNNING";
    case Err::UnknownDevice: return "UNKNOWN_DEVICE";
    case Err::AlreadyRegistered: return "ALREADY_REGISTERED";
    case Err::NoReadings: return "NO_READINGS";
    case Err::RangeError: return "RANGE_ERROR";
    case Err::BadRequest: return "BAD_REQUEST";
    case Err::PreparationFailed: return "PREPARATION_FAILED";
    case Err::TopologyConfigError: return "TOPOLOGY_CONFIG_ERROR";
  }
  return "UNKNOWN";
}

std::string Error::to_string() const {
  std::string s = err_name(code);
  if (!detail.empty()) {
    s += ' ';
    s += detail;
  }
  return s;
}

}  // namespace tamperled
