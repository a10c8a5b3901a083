#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "oqs/classical.hpp"
#include "oqs/hierarchy.hpp"
#include "oqs/unravel.hpp"

using json = nlohmann::ordered_json;
using namespace oqs;

namespace {

constexpr const char* kArtifactVersion = "1.0";

struct usage_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Config {
  std::string model;
  std::string criteria;
  std::optional<double> t0, t1, t2;
  std::string grid;
  std::optional<double> tol;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string out;
  bool assert_pass = false;
  std::string format = "json";
  bool timing = false;
  std::string config_file;

  std::string method = "jump";
  std::string process = "ou";
  int samples = 1000;
  double dt = 1e-3;
  double k = 1.0, sigma = 1.0, lambda = 1.0, x0 = 0.0;
  std::string summary;
};

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split(s)) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw usage_error("bad grid value '" + item + "'");
    out.push_back(v);
  }
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i] <= out[i - 1]) throw usage_error("grid must be strictly increasing");
  return out;
}

std::uint64_t resolve_seed(const Config& c, std::uint64_t fallback) {
  if (c.seed) return *c.seed;
  if (const char* env = std::getenv("OQS_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw usage_error(std::string("OQS_SEED is not an unsigned integer: ") + env);
    }
  }
  return fallback;
}

json witness_json(const Witness& w) {
  if (auto d = std::get_if<double>(&w)) return *d;
  if (auto c = std::get_if<cplx>(&w)) return json{{"re", c->real()}, {"im", c->imag()}};
  return std::get<std::string>(w);
}

json report_json(const CriterionReport& r) {
  json w = json::object();
  for (const auto& [k, v] : r.witnesses) w[k] = witness_json(v);
  json out{{"criterion", r.criterion}, {"verdict", to_string(r.verdict)}, {"witnesses", w},
           {"tolerance", r.tolerance}, {"grid", r.grid}};
  if (!r.reason.empty()) out["reason"] = r.reason;
  return out;
}

std::string fmt17(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(std::string s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

void write_reports_csv(std::ostream& os, const std::string& model, const std::vector<CriterionReport>& reports) {
  os << "model,criterion,verdict,tolerance,witness,re,im,text\n";
  for (const auto& r : reports) {
    const std::string head =
        csv_field(model) + "," + r.criterion + "," + to_string(r.verdict) + "," + fmt17(r.tolerance) + ",";
    if (r.witnesses.empty()) os << head << ",,,\n";
    for (const auto& [k, v] : r.witnesses) {
      os << head << csv_field(k) << ",";
      if (auto d = std::get_if<double>(&v))
        os << fmt17(*d) << ",,\n";
      else if (auto c = std::get_if<cplx>(&v))
        os << fmt17(c->real()) << "," << fmt17(c->imag()) << ",\n";
      else
        os << ",," << csv_field(std::get<std::string>(v)) << "\n";
    }
  }
}

void emit(const Config& c, const std::function<void(std::ostream&)>& write) {
  if (c.out.empty() || c.out == "-") {
    write(std::cout);
    return;
  }
  std::ofstream f(c.out, std::ios::binary);
  if (!f) throw usage_error("cannot open output file '" + c.out + "'");
  write(f);
}

json config_echo(const Config& c, const std::string& command, std::uint64_t seed) {
  json e{{"command", command}, {"seed", seed}, {"jobs", c.jobs}};
  if (!c.model.empty()) e["model"] = c.model;
  if (!c.criteria.empty()) e["criteria"] = split(c.criteria);
  if (c.t0) e["t0"] = *c.t0;
  if (c.t1) e["t1"] = *c.t1;
  if (c.t2) e["t2"] = *c.t2;
  if (!c.grid.empty()) e["grid"] = parse_grid(c.grid);
  if (c.tol) e["tol"] = *c.tol;
  return e;
}

RunSettings settings_of(const Config& c) {
  RunSettings s;
  const int given = int(c.t0.has_value()) + int(c.t1.has_value()) + int(c.t2.has_value());
  if (given != 0 && given != 3) throw usage_error("--t0, --t1 and --t2 must be given together");
  if (given == 3) {
    if (!(*c.t0 <= *c.t1 && *c.t1 <= *c.t2)) throw usage_error("times must satisfy t0 <= t1 <= t2");
    s.triple = TimeTriple{*c.t0, *c.t1, *c.t2};
  }
  if (!c.grid.empty()) s.grid = parse_grid(c.grid);
  if (c.tol) {
    if (!(*c.tol > 0)) throw usage_error("--tol must be positive");
    s.tol = *c.tol;
  }
  s.seed = resolve_seed(c, s.seed);
  s.jobs = c.jobs;
  return s;
}

void require_model(const Config& c) {
  if (c.model.empty()) throw usage_error("--model is required");
  if (!is_model(c.model)) throw usage_error("unknown model '" + c.model + "'");
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int finish_reports(const Config& c, const std::string& command, const RunSettings& s,
                   const std::vector<CriterionReport>& reports, const std::vector<double>& times, double total,
                   const std::vector<std::string>* violations) {
  if (c.format == "csv") {
    emit(c, [&](std::ostream& os) { write_reports_csv(os, c.model, reports); });
  } else {
    json doc{{"artifact_version", kArtifactVersion}, {"config", config_echo(c, command, s.seed)}};
    json arr = json::array();
    for (const auto& r : reports) arr.push_back(report_json(r));
    doc["reports"] = arr;
    if (violations) {
      json table = json::object();
      for (const auto& r : reports) table[r.criterion] = to_string(r.verdict);
      doc["verdict_table"] = table;
      doc["implication_violations"] = *violations;
    }
    if (c.timing) {
      json per = json::object();
      for (std::size_t i = 0; i < reports.size(); ++i) per[reports[i].criterion] = times[i];
      doc["timing"] = json{{"total_seconds", total}, {"criteria_seconds", per}};
    } else {
      doc["timing"] = nullptr;
    }
    emit(c, [&](std::ostream& os) { os << doc.dump(2) << "\n"; });
  }
  int code = 0;
  if (violations && !violations->empty()) {
    for (const auto& v : *violations) std::cerr << "implication violated: " << v << "\n";
    code = 1;
  }
  if (c.assert_pass)
    for (const auto& r : reports)
      if (r.verdict == Verdict::fail) {
        std::cerr << r.criterion << ": fail\n";
        code = 1;
      }
  return code;
}

int cmd_analyze(const Config& c) {
  require_model(c);
  if (c.criteria.empty()) throw usage_error("--criteria is required");
  const auto names = split(c.criteria);
  for (const auto& n : names)
    if (!is_criterion(n)) throw usage_error("unknown criterion '" + n + "'");
  const RunSettings s = settings_of(c);
  const auto start = Clock::now();
  std::vector<CriterionReport> reports;
  std::vector<double> times;
  for (const auto& n : names) {
    const auto t = Clock::now();
    reports.push_back(run_criterion(c.model, n, s));
    times.push_back(seconds_since(t));
  }
  return finish_reports(c, "analyze", s, reports, times, seconds_since(start), nullptr);
}

int cmd_hierarchy(const Config& c) {
  require_model(c);
  const RunSettings s = settings_of(c);
  const auto start = Clock::now();
  std::vector<CriterionReport> reports;
  std::vector<double> times;
  for (const auto& n : applicable_criteria(c.model)) {
    const auto t = Clock::now();
    reports.push_back(run_criterion(c.model, n, s));
    times.push_back(seconds_since(t));
  }
  const auto violations = implication_violations(reports);
  return finish_reports(c, "hierarchy", s, reports, times, seconds_since(start), &violations);
}

LindbladSpec mcwf_spec(const std::string& model) {
  if (model == "decay") return constant_lindblad(Mat::Zero(2, 2), {{sigma_minus(), 2.0}});
  if (model == "dephasing") return constant_lindblad(Mat::Zero(2, 2), {{pauli('Z'), 0.5}});
  if (model == "eternal") return *eternal_me().spec;
  throw usage_error("unknown MCWF model '" + model + "' (decay, dephasing, eternal)");
}

std::vector<double> default_grid(const Config& c, std::vector<double> fallback) {
  return c.grid.empty() ? fallback : parse_grid(c.grid);
}

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_summary(const Config& c, const json& doc) {
  if (c.summary.empty()) {
    std::cerr << doc.dump(2) << "\n";
    return;
  }
  std::ofstream f(c.summary, std::ios::binary);
  if (!f) throw usage_error("cannot open summary file '" + c.summary + "'");
  f << doc.dump(2) << "\n";
}

int cmd_mcwf(const Config& c) {
  const std::string model = c.model.empty() ? "decay" : c.model;
  const LindbladSpec spec = mcwf_spec(model);
  if (c.samples < 1) throw usage_error("--samples must be positive");
  if (c.method != "jump" && c.method != "diffusive") throw usage_error("--method must be jump or diffusive");
  const auto grid = default_grid(c, {0.0, 0.25, 0.5, 1.0});
  const std::uint64_t seed = resolve_seed(c, 1);
  const Vec psi0 = basis_ket(2, 1);
  const McwfOptions opt{c.dt, c.jobs};
  const auto start = Clock::now();
  const Ensemble e = c.method == "jump" ? mcwf_jump(spec, psi0, grid, c.samples, seed, opt)
                                        : mcwf_diffusive(spec, psi0, grid, c.samples, seed, opt);
  const MeResult me = me_integrate(spec, projector(psi0), grid, c.dt);
  const double elapsed = seconds_since(start);

  emit(c, [&](std::ostream& os) { write_ensemble_csv(os, e); });

  const std::vector<std::pair<std::string, Mat>> observables{
      {"x", pauli('X')}, {"y", pauli('Y')}, {"z", pauli('Z')}};
  json rows = json::array();
  double max_dev = 0, max_se = 0;
  bool sigma_defined = true, within = true;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (const auto& [name, o] : observables) {
      const Estimate est = ensemble_expectation(e, i, o);
      const double exact = (o * me.states[i]).trace().real();
      const double dev = std::abs(est.mean - exact);
      max_dev = std::max(max_dev, dev);
      if (std::isnan(est.std_error)) {
        sigma_defined = false;
      } else {
        max_se = std::max(max_se, est.std_error);
        if (dev > 3 * est.std_error + 1e-12) within = false;
      }
      rows.push_back({{"time", grid[i]}, {"observable", name}, {"ensemble_mean", est.mean},
                      {"std_error", nullable(est.std_error)}, {"master_equation", exact}, {"deviation", dev}});
    }
  }
  json cfg{{"command", "mcwf"}, {"model", model}, {"method", c.method}, {"samples", c.samples},
           {"dt", c.dt},        {"grid", grid},   {"seed", seed},       {"jobs", c.jobs}};
  json summary{{"max_deviation", max_dev},
               {"max_std_error", sigma_defined ? json(max_se) : json(nullptr)},
               {"sigma_defined", sigma_defined},
               {"within_3sigma", sigma_defined ? json(within) : json(nullptr)},
               {"rows", rows}};
  json doc{{"artifact_version", kArtifactVersion}, {"config", cfg}, {"summary", summary}};
  doc["timing"] = c.timing ? json{{"total_seconds", elapsed}} : json(nullptr);
  write_summary(c, doc);
  return 0;
}

int cmd_mcsm(const Config& c) {
  SdeSpec spec;
  std::function<double(double)> mean_fn, var_fn;
  const double x0 = c.x0;
  if (c.process == "ou") {
    if (!(c.k > 0)) throw usage_error("--k must be positive");
    spec = ou_spec(c.k, c.sigma);
    const double k = c.k, s = c.sigma;
    mean_fn = [=](double t) { return x0 * std::exp(-k * t); };
    var_fn = [=](double t) { return s * s / (2 * k) * (1 - std::exp(-2 * k * t)); };
  } else if (c.process == "poisson") {
    if (c.lambda < 0) throw negative_rate_error("rate lambda = " + fmt17(c.lambda) + " is negative");
    spec = poisson_spec(c.lambda);
    const double l = c.lambda;
    mean_fn = [=](double t) { return x0 + l * t; };
    var_fn = [=](double t) { return l * t; };
  } else {
    throw usage_error("unknown process '" + c.process + "' (ou, poisson)");
  }
  if (c.samples < 1) throw usage_error("--samples must be positive");
  const auto grid = default_grid(c, {0.0, 0.5, 1.0, 2.0});
  const std::uint64_t seed = resolve_seed(c, 1);
  const auto start = Clock::now();
  const McsmResult r = mcsm(spec, Eigen::VectorXd::Constant(1, x0), grid, c.samples, seed, McsmOptions{c.dt, c.jobs});
  const double elapsed = seconds_since(start);

  emit(c, [&](std::ostream& os) { write_paths_csv(os, r); });

  json rows = json::array();
  bool sigma_defined = c.samples > 1, within = true;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double mean = r.mean[i](0), var = r.variance[i](0), se = r.std_error[i](0);
    double m4 = 0;
    for (const auto& p : r.paths) m4 += std::pow(p[i](0) - mean, 4);
    m4 /= double(r.paths.size());
    const double var_se = sigma_defined ? std::sqrt(std::max(0.0, m4 - var * var) / double(c.samples)) : NAN;
    const double am = mean_fn(grid[i]), av = var_fn(grid[i]);
    if (sigma_defined && (std::abs(mean - am) > 3 * se + 1e-12 || std::abs(var - av) > 3 * var_se + 1e-12))
      within = false;
    rows.push_back({{"time", grid[i]}, {"mean", mean}, {"analytic_mean", am}, {"mean_std_error", nullable(se)},
                    {"variance", var}, {"analytic_variance", av}, {"variance_std_error", nullable(var_se)}});
  }
  json cfg{{"command", "mcsm"}, {"process", c.process}, {"samples", c.samples}, {"dt", c.dt}, {"grid", grid},
           {"seed", seed},      {"jobs", c.jobs},       {"x0", x0}};
  if (c.process == "ou") {
    cfg["k"] = c.k;
    cfg["sigma"] = c.sigma;
  } else {
    cfg["lambda"] = c.lambda;
  }
  json summary{{"sigma_defined", sigma_defined},
               {"within_3sigma", sigma_defined ? json(within) : json(nullptr)},
               {"moments", rows}};
  json doc{{"artifact_version", kArtifactVersion}, {"config", cfg}, {"summary", summary}};
  doc["timing"] = c.timing ? json{{"total_seconds", elapsed}} : json(nullptr);
  write_summary(c, doc);
  return 0;
}

// Flat key-value JSON; keys are flag names without dashes. Flags given on the command line win.
void apply_config_file(CLI::App& sub, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw usage_error("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw usage_error("config file is not valid JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) throw usage_error("config file must hold a flat JSON object");
  for (const auto& [key, value] : j.items()) {
    CLI::Option* opt = nullptr;
    try {
      opt = sub.get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      throw usage_error("unknown config key '" + key + "'");
    }
    if (opt->count() > 0) continue;
    std::string text;
    if (value.is_string())
      text = value.get<std::string>();
    else if (value.is_boolean())
      text = value.get<bool>() ? "true" : "false";
    else if (value.is_array()) {
      for (const auto& v : value) text += (text.empty() ? "" : ",") + (v.is_string() ? v.get<std::string>() : v.dump());
    } else if (value.is_number()) {
      text = value.is_number_float() ? fmt17(value.get<double>()) : value.dump();
    } else {
      throw usage_error("config key '" + key + "' must be a scalar or list");
    }
    opt->clear();
    if (opt->get_expected_min() == 0) {
      if (text == "true") opt->add_result(std::string("true"));
    } else {
      opt->add_result(text);
    }
    opt->run_callback();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Markovianity criteria for open quantum and classical processes"};
  app.require_subcommand(1);
  Config c;

  auto common = [&c](CLI::App* s) {
    s->add_option("--config", c.config_file, "flat key-value JSON config file");
    s->add_option("--grid", c.grid, "comma-separated increasing time grid");
    s->add_option("--seed", c.seed, "RNG seed (falls back to OQS_SEED)");
    s->add_option("--jobs", c.jobs, "worker count cap")->check(CLI::PositiveNumber);
    s->add_option("--out", c.out, "output file (default stdout)");
    s->add_flag("--timing", c.timing, "include wall-clock timing");
  };
  auto criteria_opts = [&c](CLI::App* s, bool with_criteria) {
    s->add_option("--model", c.model, "model preset");
    if (with_criteria) s->add_option("--criteria", c.criteria, "comma-separated criterion names");
    s->add_option("--t0", c.t0);
    s->add_option("--t1", c.t1);
    s->add_option("--t2", c.t2);
    s->add_option("--tol", c.tol, "verdict tolerance");
    s->add_flag("--assert-pass", c.assert_pass, "exit 1 if any criterion fails");
    s->add_option("--format", c.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  };

  CLI::App* analyze = app.add_subcommand("analyze", "run criteria on a model");
  common(analyze);
  criteria_opts(analyze, true);
  CLI::App* hierarchy = app.add_subcommand("hierarchy", "verdict table and implication check");
  common(hierarchy);
  criteria_opts(hierarchy, false);

  CLI::App* mcwf = app.add_subcommand("mcwf", "Monte-Carlo wave-function ensemble");
  common(mcwf);
  mcwf->add_option("--model", c.model, "decay, dephasing or eternal");
  mcwf->add_option("--method", c.method, "jump or diffusive");
  mcwf->add_option("--samples,-M", c.samples, "number of trajectories");
  mcwf->add_option("--dt", c.dt, "integration step");
  mcwf->add_option("--summary", c.summary, "summary JSON file (default stderr)");

  CLI::App* mcsm_cmd = app.add_subcommand("mcsm", "Monte-Carlo stochastic-process sampler");
  common(mcsm_cmd);
  mcsm_cmd->add_option("--process", c.process, "ou or poisson");
  mcsm_cmd->add_option("--samples,-M", c.samples, "number of paths");
  mcsm_cmd->add_option("--dt", c.dt, "integration step");
  mcsm_cmd->add_option("--k", c.k, "OU relaxation rate");
  mcsm_cmd->add_option("--sigma", c.sigma, "OU noise amplitude");
  mcsm_cmd->add_option("--lambda", c.lambda, "Poisson rate");
  mcsm_cmd->add_option("--x0", c.x0, "initial value");
  mcsm_cmd->add_option("--summary", c.summary, "summary JSON file (default stderr)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    if (!c.config_file.empty()) apply_config_file(*sub, c.config_file);
    if (sub == analyze) return cmd_analyze(c);
    if (sub == hierarchy) return cmd_hierarchy(c);
    if (sub == mcwf) return cmd_mcwf(c);
    return cmd_mcsm(c);
  } catch (const usage_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const negative_rate_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
