#pragma once

#include <string>

#include <json.hpp>

namespace tafc {

/// Insertion-ordered JSON. Property order matters for tool schemas: the
/// reasoning field must be emitted before the fields it explains.
using Json = nlohmann::ordered_json;

/// Serialization with object keys sorted, for byte-level comparisons that
/// should not depend on property order.
std::string canonical_dump(const Json& value);

/// True when both documents are equal after canonical serialization.
bool canonically_equal(const Json& a, const Json& b);

/// Reads a whole file and parses it as JSON. Throws tafc::Error (IOFailure or
/// InvalidArgument).
Json read_json_file(const std::string& path);

std::string read_text_file(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace tafc
