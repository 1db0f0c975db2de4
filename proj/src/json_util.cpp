#include "tafc/json.hpp"

#include <fstream>
#include <sstream>

#include "tafc/error.hpp"

namespace tafc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MissingName: return "MissingName";
    case ErrorCode::MalformedParameters: return "MalformedParameters";
    case ErrorCode::UnsupportedKind: return "UnsupportedKind";
    case ErrorCode::UnknownParameter: return "UnknownParameter";
    case ErrorCode::UnknownTarget: return "UnknownTarget";
    case ErrorCode::MalformedReasoningTuple: return "MalformedReasoningTuple";
    case ErrorCode::UnknownFunction: return "UnknownFunction";
    case ErrorCode::UpstreamUnreachable: return "UpstreamUnreachable";
    case ErrorCode::UpstreamTimeout: return "UpstreamTimeout";
    case ErrorCode::BudgetExhausted: return "BudgetExhausted";
    case ErrorCode::StorageFull: return "StorageFull";
    case ErrorCode::IOFailure: return "IOFailure";
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::ProviderFailure: return "ProviderFailure";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::EmptyTaskSet: return "EmptyTaskSet";
    case ErrorCode::EmptyCandidate: return "EmptyCandidate";
    case ErrorCode::ScenarioInvalid: return "ScenarioInvalid";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

std::string canonical_dump(const Json& value) {
  // nlohmann::json keeps object keys in a std::map, so converting sorts them.
  return nlohmann::json(value).dump();
}

bool canonically_equal(const Json& a, const Json& b) {
  return canonical_dump(a) == canonical_dump(b);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IOFailure, "cannot open " + path);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_json_file(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::IOFailure, "cannot write " + path);
  }
  out << content;
  if (!out) {
    throw Error(ErrorCode::IOFailure, "short write to " + path);
  }
}

}  // namespace tafc
