#include <chrono>
#include <cmath>
#include <regex>

#include "tafc/schema.hpp"

namespace tafc {
namespace {

std::size_t utf8_length(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

bool is_integral(const Json& v) {
  if (v.is_number_integer()) return true;
  if (!v.is_number_float()) return false;
  const double d = v.get<double>();
  return std::isfinite(d) && std::floor(d) == d;
}

// The leading YYYY-MM-DD names a real calendar day.
bool is_calendar_date(const std::string& value) {
  const int y = std::stoi(value.substr(0, 4));
  const unsigned m = static_cast<unsigned>(std::stoi(value.substr(5, 2)));
  const unsigned d = static_cast<unsigned>(std::stoi(value.substr(8, 2)));
  return std::chrono::year_month_day(std::chrono::year(y), std::chrono::month(m), std::chrono::day(d)).ok();
}

bool matches_format(const std::string& format, const std::string& value) {
  static const std::regex date(R"(^\d{4}-(0[1-9]|1[0-2])-(0[1-9]|[12]\d|3[01])$)");
  static const std::regex date_time(
      R"(^\d{4}-\d{2}-\d{2}[Tt ]\d{2}:\d{2}:\d{2}(\.\d+)?([Zz]|[+-]\d{2}:\d{2})$)");
  static const std::regex time(R"(^\d{2}:\d{2}:\d{2}(\.\d+)?([Zz]|[+-]\d{2}:\d{2})?$)");
  static const std::regex email(R"(^[^@\s]+@[^@\s]+\.[^@\s]+$)");
  static const std::regex uri(R"(^[A-Za-z][A-Za-z0-9+.-]*:\S+$)");
  static const std::regex uuid(
      R"(^[0-9a-fA-F]{8}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{12}$)");
  if (format == "date") return std::regex_match(value, date) && is_calendar_date(value);
  if (format == "date-time") return std::regex_match(value, date_time) && is_calendar_date(value);
  if (format == "time") return std::regex_match(value, time);
  if (format == "email") return std::regex_match(value, email);
  if (format == "uri") return std::regex_match(value, uri);
  if (format == "uuid") return std::regex_match(value, uuid);
  // Unknown formats are annotations only.
  return true;
}

class Validator {
 public:
  void check(const ParameterNode& node, const Json& value, const std::string& path) {
    switch (node.kind) {
      case Kind::String:
        if (!value.is_string()) return fail(path, "expected string");
        break;
      case Kind::Number:
        if (!value.is_number()) return fail(path, "expected number");
        break;
      case Kind::Integer:
        if (!is_integral(value)) return fail(path, "expected integer");
        break;
      case Kind::Boolean:
        if (!value.is_boolean()) return fail(path, "expected boolean");
        break;
      case Kind::Enum: {
        bool found = false;
        for (const auto& e : node.enum_values) {
          if (e == value) {
            found = true;
            break;
          }
        }
        if (!found) return fail(path, "value " + value.dump() + " not in enum");
        break;
      }
      case Kind::Array:
        if (!value.is_array()) return fail(path, "expected array");
        if (const ParameterNode* item = node.item()) {
          for (std::size_t i = 0; i < value.size(); ++i) {
            check(*item, value[i], path + "[" + std::to_string(i) + "]");
          }
        }
        break;
      case Kind::Object:
        if (!value.is_object()) return fail(path, "expected object");
        check_object(node, value, path);
        break;
      case Kind::Union: {
        bool any = false;
        for (const auto& branch : node.branches) {
          if (validate_value(branch, value, path).ok()) {
            any = true;
            break;
          }
        }
        if (!any) return fail(path, "value matches no union branch");
        break;
      }
    }
    check_constraints(node.constraints, value, path);
  }

  void check_object(const ParameterNode& node, const Json& value, const std::string& path) {
    for (const auto& name : node.required) {
      if (!value.contains(name)) fail(join_path(path, name), "missing required parameter");
    }
    for (const auto& prop : node.properties) {
      auto it = value.find(prop.name);
      if (it != value.end()) check(prop.node, *it, join_path(path, prop.name));
    }
  }

  void check_constraints(const ConstraintSet& c, const Json& value, const std::string& path) {
    if (value.is_string()) {
      const auto& s = value.get_ref<const std::string&>();
      const std::size_t len = utf8_length(s);
      if (c.min_length && len < *c.min_length) fail(path, "shorter than minLength");
      if (c.max_length && len > *c.max_length) fail(path, "longer than maxLength");
      if (c.pattern) {
        try {
          if (!std::regex_search(s, std::regex(*c.pattern, std::regex::ECMAScript))) {
            fail(path, "does not match pattern " + *c.pattern);
          }
        } catch (const std::regex_error&) {
          fail(path, "schema pattern is not a valid regular expression");
        }
      }
      if (c.format && !matches_format(*c.format, s)) fail(path, "not a valid " + *c.format);
    }
    if (value.is_number()) {
      const double d = value.get<double>();
      if (c.minimum && d < c.minimum->get<double>()) fail(path, "below minimum");
      if (c.maximum && d > c.maximum->get<double>()) fail(path, "above maximum");
      if (c.multiple_of) {
        const double q = d / c.multiple_of->get<double>();
        if (std::fabs(q - std::round(q)) > 1e-9) fail(path, "not a multiple of multipleOf");
      }
    }
    if (value.is_array()) {
      if (c.min_items && value.size() < *c.min_items) fail(path, "fewer than minItems");
      if (c.max_items && value.size() > *c.max_items) fail(path, "more than maxItems");
      if (c.unique_items && *c.unique_items) {
        for (std::size_t i = 0; i < value.size(); ++i) {
          for (std::size_t j = i + 1; j < value.size(); ++j) {
            if (value[i] == value[j]) {
              fail(path, "items are not unique");
              return;
            }
          }
        }
      }
    }
  }

  void fail(const std::string& path, std::string message) {
    verdict.violations.push_back(Violation{path, std::move(message)});
  }

  ValidationVerdict verdict;
};

}  // namespace

ValidationVerdict validate_value(const ParameterNode& node, const Json& value,
                                 const std::string& path) {
  Validator v;
  v.check(node, value, path);
  return std::move(v.verdict);
}

ValidationVerdict validate_arguments(const ToolSchema& schema, const Json& args) {
  Validator v;
  if (!args.is_object()) {
    v.fail("", "arguments must be a JSON object");
    return std::move(v.verdict);
  }
  v.check_object(schema.parameters, args, "");
  return std::move(v.verdict);
}

}  // namespace tafc
