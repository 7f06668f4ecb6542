#include "phi4diss/run_config.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace phi4diss {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double parse_number(const std::string& key, const std::string& value) {
  if (value == "inf") return std::numeric_limits<double>::infinity();
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw ConfigError("field '" + key + "': not a number: '" + value + "'");
  }
  if (pos != value.size())
    throw ConfigError("field '" + key + "': trailing characters in '" + value + "'");
  return v;
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
  const double v = parse_number(key, value);
  if (v < 0.0 || v != std::floor(v))
    throw ConfigError("field '" + key + "': expected a non-negative integer");
  return static_cast<std::uint64_t>(v);
}

std::string fmt_num(double v) {
  if (std::isinf(v)) return "inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool known_extra_prefix(const std::string& key) {
  static const char* prefixes[] = {"fixed_point.", "propagator.", "vertex.",
                                   "integrals.", "rg_flow.", "verify."};
  for (const char* p : prefixes)
    if (key.rfind(p, 0) == 0) return true;
  return false;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "params.d") {
    params.d = parse_number(key, value);
  } else if (key == "params.mass") {
    params.m = parse_number(key, value);
  } else if (key == "params.lambda") {
    params.lambda = parse_number(key, value);
  } else if (key == "params.beta") {
    params.beta = parse_number(key, value);
  } else if (key == "params.gamma") {
    params.gamma = parse_number(key, value);
  } else if (key == "quadrature.method") {
    if (value == "adaptive-1d")
      quad.method = QuadratureSpec::Method::adaptive_1d;
    else if (value == "tensor-product")
      quad.method = QuadratureSpec::Method::tensor_product;
    else if (value == "monte-carlo")
      quad.method = QuadratureSpec::Method::monte_carlo;
    else
      throw ConfigError("field 'quadrature.method': unknown method '" + value + "'");
  } else if (key == "quadrature.rel_tol") {
    quad.rel_tol = parse_number(key, value);
  } else if (key == "quadrature.rel_tol_nd") {
    quad.rel_tol_nd = parse_number(key, value);
  } else if (key == "quadrature.abs_tol") {
    quad.abs_tol = parse_number(key, value);
  } else if (key == "quadrature.max_evals") {
    quad.max_evals = parse_uint(key, value);
  } else if (key == "quadrature.mc_samples") {
    quad.mc_samples = parse_uint(key, value);
  } else if (key == "quadrature.cutoff_radius") {
    quad.cutoff_radius = parse_number(key, value);
  } else if (key == "seed") {
    seed = parse_uint(key, value);
    quad.seed = seed;
  } else if (key == "out") {
    out_path = value;
  } else if (key == "format") {
    if (value != "csv" && value != "json")
      throw ConfigError("field 'format': expected csv or json, got '" + value + "'");
    format = value;
  } else if (known_extra_prefix(key)) {
    extras[key] = value;
  } else {
    throw ConfigError("unknown configuration field '" + key + "'");
  }
}

RunConfig RunConfig::from_text(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected 'key = value', got '" + line + "'");
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream os;
  os << f.rdbuf();
  return from_text(os.str(), path);
}

void RunConfig::validate() const {
  params.validate();
  quad.validate();
  if (format != "csv" && format != "json")
    throw ConfigError("field 'format': expected csv or json");
}

std::string RunConfig::resolved_text() const {
  std::ostringstream os;
  os << "schema_version = " << kSchemaVersion << "\n";
  os << "params.d = " << fmt_num(params.d) << "\n";
  os << "params.mass = " << fmt_num(params.m) << "\n";
  os << "params.lambda = " << fmt_num(params.lambda) << "\n";
  os << "params.beta = " << fmt_num(params.beta) << "\n";
  os << "params.gamma = " << fmt_num(params.gamma) << "\n";
  os << "quadrature.method = "
     << (quad.method == QuadratureSpec::Method::adaptive_1d     ? "adaptive-1d"
         : quad.method == QuadratureSpec::Method::tensor_product ? "tensor-product"
                                                                  : "monte-carlo")
     << "\n";
  os << "quadrature.rel_tol = " << fmt_num(quad.rel_tol) << "\n";
  os << "quadrature.rel_tol_nd = " << fmt_num(quad.rel_tol_nd) << "\n";
  os << "quadrature.abs_tol = " << fmt_num(quad.abs_tol) << "\n";
  os << "quadrature.max_evals = " << quad.max_evals << "\n";
  os << "quadrature.mc_samples = " << quad.mc_samples << "\n";
  os << "quadrature.cutoff_radius = " << fmt_num(quad.cutoff_radius) << "\n";
  os << "seed = " << seed << "\n";
  os << "format = " << format << "\n";
  for (const auto& [k, v] : extras) os << k << " = " << v << "\n";
  return os.str();
}

double RunConfig::extra_number(const std::string& key, double fallback) const {
  auto it = extras.find(key);
  return it == extras.end() ? fallback : parse_number(key, it->second);
}

std::string RunConfig::extra_string(const std::string& key,
                                    const std::string& fallback) const {
  auto it = extras.find(key);
  return it == extras.end() ? fallback : it->second;
}

}  // namespace phi4diss
