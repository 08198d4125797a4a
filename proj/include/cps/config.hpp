#pragma once

#include <string>

#include "cps/system.hpp"

namespace cps {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Parses a system description (JSON, schema documented in the README) and
/// returns a validated System. Parse failures throw ConfigError; invariant
/// violations throw ValidationError citing the offending field.
System load_system(const std::string& path);
System parse_system(const std::string& json_text);

/// FNV-1a over the raw file bytes, as stamped into every output header.
std::uint64_t config_hash(const std::string& path);

}  // namespace cps
