#include "cli.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "censreg/error.hpp"
#include "censreg/glm.hpp"
#include "censreg/sim.hpp"
#include "censreg/weights.hpp"

namespace censreg::cli {

namespace {

using nlohmann::json;

struct DataArgs {
  std::string input;
  std::string schema;
  std::string v, delta, y;
  std::vector<std::string> z, h;
  std::string method = "cc";
  bool stabilize = false;
  double floor = 1e-6;
  std::string format = "table";
  std::string out;
};

struct FitArgs : DataArgs {
  std::string link = "identity";
};

struct SimArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  std::optional<unsigned> threads;
  bool stabilize = false;
  std::string format = "table";
  std::string out;
};

void add_data_options(CLI::App* cmd, DataArgs& a) {
  cmd->add_option("--input,-i", a.input, "CSV file with a header row")->required();
  cmd->add_option("--schema", a.schema, "JSON column schema {v, delta, y, z[], h[]}");
  cmd->add_option("--v", a.v, "censored covariate column (default x)");
  cmd->add_option("--delta", a.delta, "censoring indicator column (default delta)");
  cmd->add_option("--y", a.y, "outcome column (default y)");
  cmd->add_option("--z", a.z, "fully observed covariate columns")->delimiter(',');
  cmd->add_option("--aux", a.h, "auxiliary selection-model columns")->delimiter(',');
  cmd->add_option("--method,-m", a.method, "cc | ipcw | ipcw-km | ipcw-cox")->capture_default_str();
  cmd->add_flag("--stabilize", a.stabilize, "multiply weights by the marginal uncensored probability");
  cmd->add_option("--floor", a.floor, "minimum selection probability")->capture_default_str();
  cmd->add_option("--out,-o", a.out, "write the report to this file instead of stdout");
}

ColumnSchema schema_of(const DataArgs& a) {
  ColumnSchema s;
  if (!a.schema.empty()) {
    s = load_schema_file(a.schema);
  } else {
    s.v = "x";
    s.delta = "delta";
    s.y = "y";
  }
  if (!a.v.empty()) s.v = a.v;
  if (!a.delta.empty()) s.delta = a.delta;
  if (!a.y.empty()) s.y = a.y;
  if (!a.z.empty()) s.z = a.z;
  if (!a.h.empty()) s.h_extra = a.h;
  return s;
}

WeightSpec weight_spec(const DataArgs& a) {
  WeightSpec spec;
  spec.scheme = scheme_from_string(a.method);
  spec.stabilize = a.stabilize;
  spec.floor = a.floor;
  return spec;
}

std::string fixed4(double x) {
  if (std::isnan(x)) return "NA";
  if (std::isinf(x)) return x > 0 ? "Inf" : "-Inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << x;
  return os.str();
}

std::string full(double x) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << x;
  return os.str();
}

std::string p_text(double p) {
  if (std::isnan(p)) return "NA";
  if (p < 0.0001) return "< 0.0001";
  return fixed4(p);
}

json number(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

struct Coef {
  std::string name;
  double estimate, se, t, p;
};

std::vector<Coef> coefficients(const GlmFit& fit) {
  const Eigen::VectorXd se = fit.standard_errors();
  std::vector<Coef> out;
  for (Eigen::Index j = 0; j < fit.beta.size(); ++j) {
    Coef c;
    c.name = fit.names[static_cast<std::size_t>(j)];
    c.estimate = fit.beta[j];
    c.se = se[j];
    c.t = c.estimate / c.se;
    // Two-sided normal reference.
    c.p = std::erfc(std::abs(c.t) / std::sqrt(2.0));
    out.push_back(c);
  }
  return out;
}

void write_table(std::ostream& os, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    width.resize(std::max(width.size(), r.size()), 0);
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c > 0) os << "  ";
      if (c == 0) {
        os << std::left << std::setw(static_cast<int>(width[c])) << r[c];
      } else {
        os << std::right << std::setw(static_cast<int>(width[c])) << r[c];
      }
    }
    os << '\n';
  }
}

// Writes to --out when given, otherwise to the command's stream.
void emit(const std::string& path, std::ostream& out, const std::string& text) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open output file '" + path + "'");
  f << text;
}

int cmd_fit(const FitArgs& a, std::ostream& out) {
  const Dataset d = load_csv(a.input, schema_of(a));
  const WeightSpec spec = weight_spec(a);
  const LinkFamily link(link_from_string(a.link));
  const WeightVector wv = build_weights(d, spec);
  const GlmFit fit = fit_glm(d, wv, link);
  const std::vector<Coef> coefs = coefficients(fit);
  std::size_t used = 0;
  for (double w : wv.w) used += w > 0.0 ? 1 : 0;

  std::ostringstream os;
  if (a.format == "json") {
    json j;
    j["method"] = std::string(to_string(spec.scheme));
    j["link"] = std::string(to_string(fit.link));
    j["stabilized"] = wv.stabilized;
    j["n"] = d.n();
    j["n_used"] = used;
    j["n_floored"] = wv.n_floored;
    j["converged"] = fit.converged;
    j["iterations"] = fit.iterations;
    j["dispersion"] = number(fit.dispersion);
    j["coefficients"] = json::array();
    for (const auto& c : coefs) {
      j["coefficients"].push_back({{"name", c.name},
                                   {"estimate", number(c.estimate)},
                                   {"se", number(c.se)},
                                   {"t_value", number(c.t)},
                                   {"p_value", number(c.p)}});
    }
    os << j.dump(2) << '\n';
  } else if (a.format == "csv") {
    os << "variable,estimate,se,t_value,p_value\n";
    for (const auto& c : coefs) {
      os << c.name << ',' << full(c.estimate) << ',' << full(c.se) << ',' << full(c.t) << ','
         << full(c.p) << '\n';
    }
  } else {
    os << "Method: " << to_string(spec.scheme) << (wv.stabilized ? " (stabilized)" : "")
       << ", link: " << to_string(fit.link) << ", n = " << d.n() << ", used = " << used << '\n';
    std::vector<std::vector<std::string>> rows{{"Variable", "Estimate", "SE", "t-value", "p-value"}};
    for (const auto& c : coefs) {
      rows.push_back({c.name, fixed4(c.estimate), fixed4(c.se), fixed4(c.t), p_text(c.p)});
    }
    write_table(os, rows);
    if (wv.n_floored > 0) os << "note: " << wv.n_floored << " selection probabilities raised to the floor\n";
  }
  emit(a.out, out, os.str());
  return kOk;
}

int cmd_weights(const DataArgs& a, std::ostream& out) {
  const Dataset d = load_csv(a.input, schema_of(a));
  WeightSpec spec = weight_spec(a);
  spec.stabilize = false;
  const WeightVector wv = build_weights(d, spec);
  const WeightVector sw = stabilize(wv, d);

  std::ostringstream os;
  if (a.format == "json") {
    json rows = json::array();
    for (std::size_t i = 0; i < d.n(); ++i) {
      rows.push_back({{"row_id", i + 1},
                      {"v", d[i].v},
                      {"delta", d[i].delta},
                      {"pi", number(wv.pi[i])},
                      {"w", number(wv.w[i])},
                      {"stabilized_w", number(sw.w[i])},
                      {"floored", static_cast<bool>(wv.floored[i])}});
    }
    json j;
    j["method"] = std::string(to_string(spec.scheme));
    j["n_floored"] = wv.n_floored;
    j["n_degenerate"] = wv.n_degenerate;
    j["weights"] = rows;
    os << j.dump(2) << '\n';
  } else {
    os << "row_id,v,delta,pi,w,stabilized_w,floored\n";
    for (std::size_t i = 0; i < d.n(); ++i) {
      os << i + 1 << ',' << full(d[i].v) << ',' << d[i].delta << ',' << full(wv.pi[i]) << ','
         << full(wv.w[i]) << ',' << full(sw.w[i]) << ',' << (wv.floored[i] ? 1 : 0) << '\n';
    }
  }
  emit(a.out, out, os.str());
  return kOk;
}

int cmd_simulate(const SimArgs& a, std::ostream& out) {
  std::ifstream in(a.config);
  if (!in) throw SchemaError("cannot open config file '" + a.config + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw SchemaError("config '" + a.config + "' is not valid JSON: " + e.what());
  }
  sim::ScenarioConfig cfg = sim::config_from_json(j);
  if (a.seed) cfg.seed = *a.seed;
  if (a.reps) cfg.n_reps = *a.reps;
  if (a.threads) cfg.threads = *a.threads;
  if (a.stabilize) cfg.stabilize = true;
  if (cfg.n_reps < 1) throw SchemaError("invalid scenario config: n_reps (must be >= 1);");

  const sim::MonteCarloResult r = sim::run_monte_carlo(cfg);
  const std::string csv = sim::metrics_csv(r);
  if (!a.out.empty()) emit(a.out, out, csv);
  if (a.format == "csv") {
    out << csv;
  } else if (a.format == "json") {
    json rows = json::array();
    for (const auto& row : r.rows) {
      rows.push_back({{"method", std::string(sim::to_string(row.method))},
                      {"coefficient", row.coefficient},
                      {"truth", row.truth},
                      {"bias", number(row.bias)},
                      {"pct_bias", row.pct_bias_defined ? number(row.pct_bias) : json(nullptr)},
                      {"se_model", number(row.se_model)},
                      {"sd_empirical", row.sd_defined ? number(row.sd_empirical) : json(nullptr)},
                      {"mse", number(row.mse)},
                      {"achieved_censoring", row.achieved_censoring},
                      {"n_failed_reps", row.n_failed_reps},
                      {"n_used_reps", row.n_used_reps},
                      {"valid", row.valid}});
    }
    json doc;
    // Thread count is left out so serial and parallel runs print the same bytes.
    json echo = sim::config_to_json(cfg);
    echo.erase("threads");
    doc["config"] = echo;
    doc["censor_scale"] = r.censor_scale;
    doc["mean_censoring"] = r.mean_censoring;
    doc["rows"] = rows;
    out << doc.dump(2) << '\n';
  } else {
    out << sim::metrics_table(r);
  }
  return kOk;
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Parse: return kParse;
    case ErrorKind::Schema: return kSchema;
    case ErrorKind::Data: return kData;
    case ErrorKind::Domain:
    case ErrorKind::Singular: return kEstimation;
    case ErrorKind::Convergence: return kConvergence;
  }
  return kInternal;
}

std::string kind_label(ErrorKind k) {
  switch (k) {
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Schema: return "schema error";
    case ErrorKind::Data: return "data error";
    case ErrorKind::Domain: return "estimation error";
    case ErrorKind::Singular: return "estimation error";
    case ErrorKind::Convergence: return "convergence failure";
  }
  return "error";
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Regression with a right-censored covariate via inverse probability of censoring weights",
               "censreg"};
  app.require_subcommand(1);

  FitArgs fit;
  CLI::App* fit_cmd = app.add_subcommand("fit", "fit a weighted GLM and print the coefficient table");
  add_data_options(fit_cmd, fit);
  fit_cmd->add_option("--link,-l", fit.link, "identity | log | logit")->capture_default_str();
  fit_cmd->add_option("--format,-f", fit.format, "table | json | csv")
      ->check(CLI::IsMember({"table", "json", "csv"}))
      ->capture_default_str();

  DataArgs wts;
  wts.format = "csv";
  CLI::App* wts_cmd = app.add_subcommand("weights", "print per-record selection probabilities and weights");
  add_data_options(wts_cmd, wts);
  wts_cmd->add_option("--format,-f", wts.format, "csv | json")
      ->check(CLI::IsMember({"table", "json", "csv"}))
      ->capture_default_str();

  SimArgs simargs;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "run a Monte Carlo scenario from a JSON config");
  sim_cmd->add_option("config,--config,-c", simargs.config, "scenario config (JSON)")->required();
  sim_cmd->add_option("--seed", simargs.seed, "override the config seed");
  sim_cmd->add_option("--reps", simargs.reps, "override the replication count");
  sim_cmd->add_option("--threads", simargs.threads, "worker threads for replications");
  sim_cmd->add_flag("--stabilize", simargs.stabilize, "use stabilized weights");
  sim_cmd->add_option("--out,-o", simargs.out, "also write the metrics CSV to this file");
  sim_cmd->add_option("--format,-f", simargs.format, "table | csv | json")
      ->check(CLI::IsMember({"table", "json", "csv"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    if (*fit_cmd) return cmd_fit(fit, out);
    if (*wts_cmd) return cmd_weights(wts, out);
    if (*sim_cmd) return cmd_simulate(simargs, out);
  } catch (const ConvergenceError& e) {
    err << "censreg: " << kind_label(e.kind()) << ": " << e.what();
    if (e.hint() == "separation") {
      err << " (separation: a covariate predicts the binary response perfectly; drop it, or switch the "
             "selection model to ipcw-km)";
    } else if (e.hint() == "divergence") {
      err << " (divergence: a covariate orders the censoring times perfectly; drop it or use ipcw-km)";
    }
    err << '\n';
    return kConvergence;
  } catch (const Error& e) {
    err << "censreg: " << kind_label(e.kind()) << ": " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "censreg: internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kUsage;
}

}  // namespace censreg::cli
