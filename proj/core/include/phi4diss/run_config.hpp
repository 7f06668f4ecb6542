#ifndef PHI4DISS_RUN_CONFIG_HPP
#define PHI4DISS_RUN_CONFIG_HPP

#include <cstdint>
#include <map>
#include <string>

#include "phi4diss/quadrature.hpp"
#include "phi4diss/thermal_params.hpp"

namespace phi4diss {

inline constexpr int kSchemaVersion = 1;

/// Run configuration: physical parameters, quadrature settings, and
/// command-specific options from a flat key-value file with CLI overrides.
struct RunConfig {
  ThermalParams params;
  QuadratureSpec quad;
  std::uint64_t seed = 20240901;
  std::string out_path;        ///< empty writes to stdout
  std::string format = "csv";  ///< csv | json
  std::map<std::string, std::string> extras;  ///< command-scoped options

  /// Parses `key = value` lines; '#' starts a comment. Unknown or malformed
  /// keys raise ConfigError naming the offending field.
  static RunConfig from_file(const std::string& path);
  static RunConfig from_text(const std::string& text, const std::string& origin);

  /// Applies a single override using the same key namespace as the file.
  void set(const std::string& key, const std::string& value);

  void validate() const;

  /// Canonical resolved form embedded into every output as provenance.
  std::string resolved_text() const;

  double extra_number(const std::string& key, double fallback) const;
  std::string extra_string(const std::string& key, const std::string& fallback) const;
};

}  // namespace phi4diss

#endif
