// Command-line front end: parameter loading, pipeline orchestration, and
// machine-readable result emission.

#include <CLI11.hpp>

#include <complex>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include "phi4diss/fock_oracle.hpp"
#include "phi4diss/loop_integrals.hpp"
#include "phi4diss/propagator.hpp"
#include "phi4diss/run_config.hpp"
#include "phi4diss/vertex_rg.hpp"

namespace {

using namespace phi4diss;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string json_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  return out;
}

std::string config_json(const RunConfig& cfg) {
  std::ostringstream os;
  os << "{";
  std::istringstream is(cfg.resolved_text());
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string k = line.substr(0, eq - 1);
    std::string v = line.substr(eq + 2);
    os << (first ? "" : ",") << "\"" << json_escape(k) << "\":\"" << json_escape(v)
       << "\"";
    first = false;
  }
  os << "}";
  return os.str();
}

std::string provenance_comment(const RunConfig& cfg) {
  std::ostringstream os;
  std::istringstream is(cfg.resolved_text());
  std::string line;
  while (std::getline(is, line)) os << "# " << line << "\n";
  return os.str();
}

void emit(const RunConfig& cfg, const std::string& payload) {
  if (cfg.out_path.empty()) {
    std::cout << payload;
    return;
  }
  std::ofstream f(cfg.out_path, std::ios::binary);
  if (!f) throw ConfigError("cannot open output file '" + cfg.out_path + "'");
  f << payload;
}

struct Row {
  std::vector<std::string> cells;
};

std::string render_table(const RunConfig& cfg, const std::vector<std::string>& header,
                         const std::vector<Row>& rows, const std::string& json_name,
                         const std::string& summary_json = "") {
  std::ostringstream os;
  if (cfg.format == "csv") {
    os << provenance_comment(cfg);
    if (!summary_json.empty()) os << "# summary " << summary_json << "\n";
    for (std::size_t i = 0; i < header.size(); ++i)
      os << (i ? "," : "") << header[i];
    os << "\n";
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.cells.size(); ++i)
        os << (i ? "," : "") << r.cells[i];
      os << "\n";
    }
  } else {
    os << "{\"schema_version\":" << kSchemaVersion << ",\"config\":" << config_json(cfg);
    if (!summary_json.empty()) os << ",\"summary\":" << summary_json;
    os << ",\"" << json_name << "\":[";
    for (std::size_t r = 0; r < rows.size(); ++r) {
      os << (r ? "," : "") << "{";
      for (std::size_t i = 0; i < header.size(); ++i)
        os << (i ? "," : "") << "\"" << header[i] << "\":\"" << rows[r].cells[i] << "\"";
      os << "}";
    }
    os << "]}\n";
  }
  return os.str();
}

int cmd_verify(const RunConfig& cfg) {
  fock::VerifyReport rep = fock::standard_verification(cfg.seed);
  if (cfg.extra_string("verify.custom_grid", "false") == "true") {
    fock::ModeGrid grid;
    grid.modes = {{cfg.extra_number("verify.k", 0.75), 1}};
    grid.cutoff = static_cast<int>(cfg.extra_number("verify.cutoff", 8));
    grid.params = cfg.params;
    fock::VerifyOptions opt;
    opt.seed = cfg.seed;
    fock::VerifyReport custom = fock::verify_identities(grid, opt);
    for (auto& c : custom.checks)
      rep.checks.push_back({"custom." + c.name, c.tolerance, c.deviation, c.pass});
    for (auto& w : custom.warnings) rep.warnings.push_back(w);
  }
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
  std::ostringstream os;
  std::string body = rep.to_json();
  // embed the resolved configuration
  body.insert(1, "\"config\":" + config_json(cfg) + ",");
  os << body << "\n";
  emit(cfg, os.str());
  return rep.all_pass() ? 0 : 1;
}

int cmd_fixed_point(const RunConfig& cfg) {
  std::vector<double> ds;
  const std::string list = cfg.extra_string("fixed_point.d_values", "");
  if (!list.empty()) {
    std::istringstream is(list);
    std::string tok;
    while (std::getline(is, tok, ',')) ds.push_back(std::stod(tok));
  } else {
    const double lo = cfg.extra_number("fixed_point.d_min", 0.25);
    const double hi = cfg.extra_number("fixed_point.d_max", 2.75);
    const double step = cfg.extra_number("fixed_point.d_step", 0.25);
    for (double d = lo; d <= hi + 1e-12; d += step) ds.push_back(d);
  }
  std::vector<Row> rows;
  for (double d : ds) {
    if (!(d > 0.0 && d < 3.0)) throw ConfigError("fixed_point: d must lie in (0, 3)");
    ThermalParams p = cfg.params;
    p.d = d;
    RGResult rg = extract_fixed_point(p, cfg.quad);
    rows.push_back({{num(d), num(rg.lambda_star_closed), num(rg.lambda_star_fitted),
                     num(rg.alpha_fitted)}});
  }
  emit(cfg, render_table(cfg, {"d", "lambda_star_closed", "lambda_star_fitted",
                               "alpha_fitted"},
                         rows, "fixed_point"));
  return 0;
}

int cmd_propagator(const RunConfig& cfg) {
  const ThermalParams& p = cfg.params;
  const double k = cfg.extra_number("propagator.k", 0.0);
  const std::string kernel_name = cfg.extra_string("propagator.kernel", "resummed");
  KernelForm kernel = KernelForm::resummed;
  if (kernel_name == "exact")
    kernel = KernelForm::exact;
  else if (kernel_name == "symmetric")
    kernel = KernelForm::symmetric;
  else if (kernel_name == "frictionless")
    kernel = KernelForm::frictionless;
  else if (kernel_name != "resummed")
    throw ConfigError("field 'propagator.kernel': unknown kernel '" + kernel_name + "'");

  double z = 0.0, Y0 = 0.0, Yp = 0.0, Zfit = 1.0, Zclosed = 1.0;
  if (p.lambda != 0.0) {
    if (!(p.d > 1.0 && p.d < 3.0))
      throw ConfigError("propagator: interacting run needs 1 < d < 3");
    if (k != 0.0)
      throw ConfigError("propagator: interacting run evaluates at k = 0");
    z = solve_z(p, cfg.quad).require("solve_z");
    ZResult Z = compute_Z(p, cfg.quad);
    Y0 = Z.expansion.Y0;
    Yp = Z.expansion.Yprime;
    Zfit = Z.Z_fit;
    Zclosed = Z.Z_closed;
  }

  const double w2lo = cfg.extra_number("propagator.omega2_min", 0.0);
  const double w2hi = cfg.extra_number("propagator.omega2_max", 0.25 * p.m * p.m);
  const int steps = static_cast<int>(cfg.extra_number("propagator.omega2_steps", 6));
  const FrictionMode fr = p.gamma > 0.0 ? FrictionMode::finite : FrictionMode::zero;

  std::vector<Row> rows;
  for (int i = 0; i < steps; ++i) {
    const double w2 = steps > 1 ? w2lo + (w2hi - w2lo) * i / (steps - 1.0) : w2lo;
    const double w = std::sqrt(std::max(w2, 0.0));
    std::complex<double> Yplus{0.0, 0.0}, Yminus{0.0, 0.0};
    if (p.lambda != 0.0) {
      std::complex<double> ypos = Y_k_lowT(k, w, z, p, cfg.quad, kernel).value;
      std::complex<double> yneg = Y_k_lowT(k, -w, z, p, cfg.quad, kernel).value;
      Yplus = 0.5 * (ypos + yneg);
      Yminus = 0.5 * (ypos - yneg);
    }
    const double X = X_k_lowT(k, z, p);
    const std::complex<double> C = C_k(w2, k, X, Yplus, Yminus, p, fr);
    const std::complex<double> M = amplitude_M_series(w2, k * k, p, cfg.quad);
    rows.push_back({{num(w2), num(k * k), num(C.real()), num(C.imag()), num(M.real()),
                     num(M.imag())}});
  }
  std::ostringstream summary;
  summary << "{\"z\":" << num(z) << ",\"Z\":" << num(Zfit) << ",\"Z_closed\":"
          << num(Zclosed) << ",\"Y\":" << num(Y0) << ",\"Yprime\":" << num(Yp) << "}";
  emit(cfg, render_table(cfg, {"omega2", "k2", "re_C", "im_C", "re_M", "im_M"}, rows,
                         "propagator", summary.str()));
  return 0;
}

int cmd_vertex(const RunConfig& cfg) {
  FourPointResult r = four_point_gamma(cfg.params, cfg.quad);
  std::vector<Row> rows;
  rows.push_back({{"first_order", num(r.first_order)}});
  rows.push_back({{"diagram_a", num(r.diagram_a)}});
  rows.push_back({{"diagram_b", num(r.diagram_b)}});
  rows.push_back({{"friction_correction", num(r.friction_correction)}});
  rows.push_back({{"im_gamma_over_F", num(r.im_gamma_over_F)}});
  emit(cfg, render_table(cfg, {"name", "value"}, rows, "vertex"));
  return r.converged ? 0 : 1;
}

int cmd_integrals(const RunConfig& cfg) {
  const double d = cfg.params.d;
  std::vector<Row> rows;
  auto add_closed = [&](const std::string& name, auto&& fn) {
    try {
      rows.push_back({{name, num(fn()), "0", "1"}});
    } catch (const PoleInDimensionError&) {
      rows.push_back({{name, "nan", "inf", "0"}});
    }
  };
  add_closed("I1_closed", [&] { return I1_closed(d); });
  add_closed("I1p_closed", [&] { return I1p_closed(d); });
  add_closed("I1pp_closed", [&] { return I1pp_closed(d); });
  add_closed("friction_integral_closed", [&] { return friction_integral_closed(d); });
  {
    IntegralResult r = friction_integral_quadrature(d, cfg.quad);
    rows.push_back({{"friction_integral_quadrature", num(r.value), num(r.error),
                     r.converged ? "1" : "0"}});
  }
  {
    IntegralResult r = J_integral(cfg.params, cfg.quad);
    rows.push_back({{"J", num(r.value), num(r.error), r.converged ? "1" : "0"}});
  }
  if (d > 1.0 && d < 3.0) {
    IntegralResult r = I3_schwinger(d, cfg.quad);
    rows.push_back({{"I3", num(r.value), num(r.error), r.converged ? "1" : "0"}});
    const double ellm = cfg.params.smoothing_length() * cfg.params.m;
    if (ellm > 0.0) {
      IntegralResult i2 = I2_damped(d, ellm, cfg.quad);
      rows.push_back({{"I2_damped", num(i2.value), num(i2.error),
                       i2.converged ? "1" : "0"}});
    }
    const double chi = cfg.extra_number("integrals.chi", 0.0);
    try {
      IntegralResult s = sunset_value(chi, d, cfg.quad);
      rows.push_back({{"sunset", num(s.value), num(s.error), s.converged ? "1" : "0"}});
    } catch (const PoleInDimensionError&) {
      rows.push_back({{"sunset", "nan", "inf", "0"}});
    }
  }
  emit(cfg, render_table(cfg, {"name", "value", "error", "converged"}, rows,
                         "integrals"));
  return 0;
}

int cmd_rg_flow(const RunConfig& cfg) {
  ThermalParams p = cfg.params;
  RGResult rg = extract_fixed_point(p, cfg.quad);
  const double ell0 = cfg.extra_number("rg_flow.ell0", 1e-3);
  const double lambda0 = cfg.extra_number("rg_flow.lambda0", 1.0);
  const double ell_max = cfg.extra_number("rg_flow.ell_max", 10.0);
  const int steps = static_cast<int>(cfg.extra_number("rg_flow.steps", 40));
  std::vector<Row> rows;
  for (int i = 0; i < steps; ++i) {
    const double ell = ell0 * std::pow(ell_max / ell0, i / (steps - 1.0));
    const double lam = flow_lambda(ell, lambda0, ell0, rg);
    const double lt = std::pow(ell, rg.epsilon) * lam;
    rows.push_back(
        {{num(ell), num(lam), num(lt), num(flow_invariant(ell, lam, rg))}});
  }
  std::ostringstream summary;
  summary << "{\"alpha_fitted\":" << num(rg.alpha_fitted) << ",\"lambda_star_closed\":"
          << num(rg.lambda_star_closed) << ",\"lambda_star_fitted\":"
          << num(rg.lambda_star_fitted) << "}";
  emit(cfg, render_table(cfg, {"ell", "lambda", "lambda_tilde", "invariant"}, rows,
                         "rg_flow", summary.str()));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dissipative friction-regularized phi^4 perturbation theory"};
  app.fallthrough();

  std::string config_path, out_path, format;
  double opt_d = 0, opt_m = 0, opt_lambda = 0, opt_beta = 0, opt_gamma = 0, opt_tol = 0;
  std::uint64_t opt_seed = 0;
  app.add_option("--config", config_path, "key = value configuration file");
  auto* o_out = app.add_option("--out", out_path, "output path (default stdout)");
  auto* o_fmt = app.add_option("--format", format, "csv or json");
  auto* o_seed = app.add_option("--seed", opt_seed, "random seed");
  auto* o_d = app.add_option("--d", opt_d, "spatial dimension");
  auto* o_m = app.add_option("--mass", opt_m, "mass parameter");
  auto* o_l = app.add_option("--lambda", opt_lambda, "quartic coupling");
  auto* o_b = app.add_option("--beta", opt_beta, "inverse temperature");
  auto* o_g = app.add_option("--gamma", opt_gamma, "friction parameter");
  auto* o_t = app.add_option("--tol", opt_tol, "relative tolerance of nested quadrature");

  app.require_subcommand(1);
  auto* sc_verify = app.add_subcommand("verify", "identity and oracle suite");
  auto* sc_fixed = app.add_subcommand("fixed-point", "lambda*(d) sweep");
  auto* sc_prop = app.add_subcommand("propagator", "C_k and M_k tables");
  auto* sc_vertex = app.add_subcommand("vertex", "Im Gamma breakdown");
  auto* sc_ints = app.add_subcommand("integrals", "named loop integrals");
  auto* sc_flow = app.add_subcommand("rg-flow", "running coupling trajectory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? 2 : 0;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = RunConfig::from_file(config_path);
    if (*o_out) cfg.set("out", out_path);
    if (*o_fmt) cfg.set("format", format);
    if (*o_seed) cfg.set("seed", std::to_string(opt_seed));
    if (*o_d) cfg.set("params.d", std::to_string(opt_d));
    if (*o_m) cfg.set("params.mass", std::to_string(opt_m));
    if (*o_l) cfg.set("params.lambda", std::to_string(opt_lambda));
    if (*o_b) cfg.set("params.beta", std::to_string(opt_beta));
    if (*o_g) cfg.set("params.gamma", std::to_string(opt_gamma));
    if (*o_t) {
      cfg.quad.rel_tol_nd = opt_tol;
      cfg.quad.rel_tol = std::min(cfg.quad.rel_tol, 1e-3 * opt_tol);
    }
    cfg.validate();

    if (*sc_verify) return cmd_verify(cfg);
    if (*sc_fixed) return cmd_fixed_point(cfg);
    if (*sc_prop) return cmd_propagator(cfg);
    if (*sc_vertex) return cmd_vertex(cfg);
    if (*sc_ints) return cmd_integrals(cfg);
    if (*sc_flow) return cmd_rg_flow(cfg);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "{\"error\":{\"type\":\"config\",\"what\":\"" << json_escape(e.what())
              << "\"}}\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "{\"error\":{\"type\":\"computation\",\"what\":\""
              << json_escape(e.what()) << "\"}}\n";
    return 1;
  }
}
