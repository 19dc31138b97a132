#include "gflm/cli.hpp"

#include "gflm/fpca.hpp"
#include "gflm/io.hpp"
#include "gflm/rng.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace gflm {

namespace {

using Json = nlohmann::ordered_json;

std::string strip(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = strip(item);
    if (item.empty()) throw std::invalid_argument("empty list element");
    out.push_back(item);
  }
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

double to_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("trailing characters");
  return v;
}

int to_int(const std::string& s) {
  std::size_t used = 0;
  const long v = std::stol(s, &used);
  if (used != s.size()) throw std::invalid_argument("not an integer");
  if (v < std::numeric_limits<int>::min() ||
      v > std::numeric_limits<int>::max()) {
    throw std::out_of_range("integer out of range");
  }
  return static_cast<int>(v);
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw std::invalid_argument("expected true or false");
}

Eigen::VectorXd to_vector(const std::string& s) {
  const auto items = split_list(s);
  Eigen::VectorXd v(static_cast<Eigen::Index>(items.size()));
  for (std::size_t i = 0; i < items.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = to_double(items[i]);
  }
  return v;
}

std::vector<double> vec(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

void apply_key(SimulationPlan& plan, const std::string& key,
               const std::string& value) {
  SimConfig& c = plan.base;
  if (key == "family") {
    c.family = parse_family(value);
  } else if (key == "trials") {
    c.trials = to_int(value);
  } else if (key == "gaussian_sd") {
    c.gaussian_sd = to_double(value);
  } else if (key == "coefficient") {
    c.coefficient = parse_coefficient(value);
  } else if (key == "delta") {
    c.delta = to_double(value);
  } else if (key == "deltas") {
    plan.deltas.clear();
    for (const auto& s : split_list(value)) plan.deltas.push_back(to_double(s));
  } else if (key == "tabulated") {
    c.tabulated = to_vector(value);
  } else if (key == "n") {
    c.n = to_int(value);
  } else if (key == "sizes") {
    plan.sizes.clear();
    for (const auto& s : split_list(value)) plan.sizes.push_back(to_int(s));
  } else if (key == "m") {
    c.m = to_int(value);
  } else if (key == "grid_size") {
    c.grid_size = to_int(value);
  } else if (key == "intercept") {
    c.intercept = to_double(value);
  } else if (key == "noise_var") {
    c.noise_var = to_double(value);
  } else if (key == "eigenvalues") {
    c.eigenvalues = to_vector(value);
  } else if (key == "alpha_level") {
    c.alpha_level = to_double(value);
  } else if (key == "replicates") {
    c.replicates = to_int(value);
  } else if (key == "null_draws") {
    c.null_draws = to_int(value);
  } else if (key == "hypotheses") {
    plan.hypotheses.clear();
    for (const auto& s : split_list(value)) {
      plan.hypotheses.push_back(parse_hypothesis(s));
    }
  } else if (key == "methods") {
    plan.methods.clear();
    for (const auto& s : split_list(value)) {
      plan.methods.push_back(parse_method(s));
    }
  } else if (key == "ku") {
    c.test.num_basis = to_int(value);
  } else if (key == "kx") {
    c.test.num_components = to_int(value);
  } else if (key == "max_components") {
    c.test.max_components = to_int(value);
  } else if (key == "refit_null") {
    c.test.refit_null = to_bool(value);
  } else if (key == "j_rule") {
    if (value == "trapezoid") {
      c.test.j_rule = JQuadrature::trapezoid;
    } else if (value == "piecewise_linear") {
      c.test.j_rule = JQuadrature::piecewise_linear;
    } else {
      throw std::invalid_argument("expected trapezoid or piecewise_linear");
    }
  } else if (key == "pql_tolerance") {
    c.test.pql.tolerance = to_double(value);
  } else if (key == "pql_max_iterations") {
    c.test.pql.max_iterations = to_int(value);
  } else {
    throw std::invalid_argument("unknown key '" + key + "'");
  }
}

std::string_view to_string(JQuadrature rule) {
  return rule == JQuadrature::trapezoid ? "trapezoid" : "piecewise_linear";
}

JQuadrature parse_j_rule(const std::string& s) {
  if (s == "trapezoid") return JQuadrature::trapezoid;
  if (s == "piecewise_linear") return JQuadrature::piecewise_linear;
  throw std::invalid_argument("unknown quadrature rule '" + s + "'");
}

Json plan_json(const SimulationPlan& plan) {
  const SimConfig& c = plan.base;
  Json j;
  j["family"] = std::string(to_string(c.family));
  if (c.family == FamilyTag::binomial) j["trials"] = c.trials;
  if (c.family == FamilyTag::gaussian) j["gaussian_sd"] = c.gaussian_sd;
  j["coefficient"] = std::string(to_string(c.coefficient));
  j["deltas"] = plan.deltas;
  if (c.coefficient == CoefficientForm::tabulated) {
    j["tabulated"] = vec(c.tabulated);
  }
  j["sizes"] = plan.sizes;
  j["m"] = c.m;
  j["grid_size"] = c.grid_size;
  j["intercept"] = c.intercept;
  j["noise_var"] = c.noise_var;
  j["eigenvalues"] = vec(c.eigenvalues);
  j["alpha_level"] = c.alpha_level;
  j["replicates"] = c.replicates;
  j["null_draws"] = c.null_draws;
  Json hyps = Json::array();
  for (Hypothesis h : plan.hypotheses) hyps.push_back(std::string(to_string(h)));
  j["hypotheses"] = hyps;
  Json methods = Json::array();
  for (TestMethod m : plan.methods) methods.push_back(std::string(to_string(m)));
  j["methods"] = methods;
  j["ku"] = c.test.num_basis;
  j["degree"] = c.test.degree;
  if (c.test.num_components) {
    j["kx"] = *c.test.num_components;
  } else {
    j["kx"] = "aic";
  }
  j["max_components"] = c.test.max_components;
  j["refit_null"] = c.test.refit_null;
  j["j_rule"] = std::string(to_string(c.test.j_rule));
  j["pql_tolerance"] = c.test.pql.tolerance;
  j["pql_max_iterations"] = c.test.pql.max_iterations;
  j["mean_basis"] = c.test.fpca.mean_basis;
  j["cov_basis"] = c.test.fpca.cov_basis;
  j["seed"] = c.seed;
  return j;
}

void write_json(const Json& j, const std::string& path, std::ostream& out) {
  const std::string text = j.dump(2) + "\n";
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
}

void write_file(const std::filesystem::path& path,
                const std::function<void(std::ostream&)>& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  body(f);
}

// ---------------------------------------------------------------- test

struct TestArgs {
  std::string curves;
  std::string responses;
  std::string family;
  std::string hypothesis = "nullity";
  std::string method = "aRLRT";
  int null_draws = 10000;
  int ku = 30;
  std::optional<int> kx;
  int max_components = 20;
  std::uint64_t seed = 20200101;
  std::string out;
  int threads = 1;
  bool refit_null = false;
  bool pre_centered = false;
  std::string j_rule = "trapezoid";
};

int cmd_test(const TestArgs& a, std::ostream& out) {
  const FamilyTag family = parse_family(a.family);
  TestOptions opts;
  opts.method = parse_method(a.method);
  opts.null_draws = a.null_draws;
  opts.num_basis = a.ku;
  opts.num_components = a.kx;
  opts.max_components = a.max_components;
  opts.seed = a.seed;
  opts.threads = a.threads;
  opts.refit_null = a.refit_null;
  opts.fpca.pre_centered = a.pre_centered;
  opts.j_rule = parse_j_rule(a.j_rule);
  const Hypothesis hyp = parse_hypothesis(a.hypothesis);

  const FunctionalDataset data = assemble_dataset(
      read_curves_csv(a.curves), read_responses_csv(a.responses), family);
  const TestResult result = run_test(data, hyp, opts);

  Json j = test_result_json(result);
  Json cfg;
  cfg["curves"] = a.curves;
  cfg["responses"] = a.responses;
  cfg["family"] = std::string(to_string(family));
  cfg["hypothesis"] = std::string(to_string(hyp));
  cfg["method"] = std::string(to_string(opts.method));
  cfg["null_draws"] = opts.null_draws;
  cfg["ku"] = opts.num_basis;
  cfg["degree"] = opts.degree;
  if (opts.num_components) {
    cfg["kx"] = *opts.num_components;
  } else {
    cfg["kx"] = "aic";
  }
  cfg["max_components"] = opts.max_components;
  cfg["seed"] = opts.seed;
  cfg["refit_null"] = opts.refit_null;
  cfg["j_rule"] = std::string(to_string(opts.j_rule));
  cfg["pre_centered"] = opts.fpca.pre_centered;
  cfg["mean_basis"] = opts.fpca.mean_basis;
  cfg["cov_basis"] = opts.fpca.cov_basis;
  cfg["pql_tolerance"] = opts.pql.tolerance;
  cfg["pql_max_iterations"] = opts.pql.max_iterations;
  j["config"] = cfg;
  write_json(j, a.out, out);

  const bool ok =
      result.converged && !result.diverged && result.null_converged;
  return ok ? kExitOk : kExitNonconverged;
}

// ---------------------------------------------------------------- fpca

struct FpcaArgs {
  std::string curves;
  std::string out;
  std::optional<int> kx;
  bool pre_centered = false;
  int max_components = 20;
};

int cmd_fpca(const FpcaArgs& a, std::ostream& out) {
  const FunctionalDataset data = curves_only_dataset(read_curves_csv(a.curves));
  FpcaOptions opts;
  opts.pre_centered = a.pre_centered;
  FpcaModel model = fit_fpca(data, opts);
  if (model.max_components() < 1) {
    throw std::runtime_error("covariance has no positive eigenvalues");
  }
  const int scan = std::min(a.max_components, model.max_components());
  const std::vector<double> aic = aic_curve(data, model, scan);
  int kx = 0;
  if (a.kx) {
    kx = *a.kx;
    if (kx < 1 || kx > model.max_components()) {
      throw std::invalid_argument(
          "K_x must be in [1, " + std::to_string(model.max_components()) +
          "]");
    }
  } else {
    kx = select_kx(data, model, 0, a.max_components);
  }
  finalize_fpca(model, data, kx);
  Json j = fpca_json(model, aic);
  Json cfg;
  cfg["curves"] = a.curves;
  cfg["pre_centered"] = a.pre_centered;
  if (a.kx) {
    cfg["kx"] = *a.kx;
  } else {
    cfg["kx"] = "aic";
  }
  cfg["max_components"] = a.max_components;
  cfg["mean_basis"] = opts.mean_basis;
  cfg["cov_basis"] = opts.cov_basis;
  j["config"] = cfg;
  write_json(j, a.out, out);
  return kExitOk;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string config;
  std::string out_dir;
  int threads = 1;
  std::uint64_t seed = 0;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  SimulationPlan plan = read_simulation_config(a.config);
  plan.base.seed = a.seed;
  plan.base.threads = a.threads;

  std::vector<ExperimentResult> results;
  for (int n : plan.sizes) {
    for (double delta : plan.deltas) {
      SimConfig cell = plan.base;
      cell.n = n;
      cell.delta = delta;
      for (auto& r : run_experiments(cell, plan.hypotheses, plan.methods)) {
        results.push_back(r);
      }
    }
  }

  const std::filesystem::path dir(a.out_dir);
  std::filesystem::create_directories(dir);
  write_file(dir / "results.csv",
             [&](std::ostream& f) { write_experiment_csv(results, f); });
  Json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["config"] = plan_json(plan);
  Json rows = Json::array();
  for (const auto& r : results) rows.push_back(experiment_json(r));
  j["results"] = rows;
  write_json(j, (dir / "results.json").string(), out);
  write_experiment_summary(results, out);
  return kExitOk;
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::string config;
  std::string out_dir;
  std::uint64_t seed = 0;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  SimulationPlan plan = read_simulation_config(a.config);
  if (plan.sizes.size() != 1 || plan.deltas.size() != 1) {
    throw std::invalid_argument("generate needs a single n and delta");
  }
  plan.base.n = plan.sizes.front();
  plan.base.delta = plan.deltas.front();
  const SimulatedData sim = generate_dataset(plan.base, a.seed);
  const std::filesystem::path dir(a.out_dir);
  std::filesystem::create_directories(dir);
  write_file(dir / "curves.csv",
             [&](std::ostream& f) { write_curves_csv(sim.data, f); });
  write_file(dir / "responses.csv",
             [&](std::ostream& f) { write_responses_csv(sim.data, f); });
  out << "wrote " << sim.data.num_subjects() << " subjects to "
      << dir.string() << '\n';
  return kExitOk;
}

}  // namespace

SimulationPlan parse_simulation_config(std::istream& in,
                                       const std::string& source) {
  SimulationPlan plan;
  std::string line;
  int lineno = 0;
  std::map<std::string, int> seen;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = source + ":" + std::to_string(lineno);
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    line = strip(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(where + ": expected 'key = value'");
    }
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw std::invalid_argument(where + ": expected 'key = value'");
    }
    if (const auto [it, fresh] = seen.emplace(key, lineno); !fresh) {
      throw std::invalid_argument(where + ": '" + key +
                                  "' already set on line " +
                                  std::to_string(it->second));
    }
    if (key == "seed" || key == "threads") {
      throw std::invalid_argument(where + ": '" + key +
                                  "' is given on the command line");
    }
    try {
      apply_key(plan, key, value);
    } catch (const std::exception& e) {
      throw std::invalid_argument(where + ": " + key + ": " + e.what());
    }
  }
  if (plan.sizes.empty()) plan.sizes = {plan.base.n};
  if (plan.deltas.empty()) plan.deltas = {plan.base.delta};
  for (int n : plan.sizes) {
    SimConfig probe = plan.base;
    probe.n = n;
    try {
      probe.validate();
    } catch (const std::exception& e) {
      throw std::invalid_argument(source + ": " + e.what());
    }
  }
  return plan;
}

SimulationPlan read_simulation_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return parse_simulation_config(in, path.string());
}

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Tests on the coefficient function of a generalized "
               "scalar-on-function linear model"};
  app.set_version_flag("--version", std::string(kToolName) + " " +
                                        kToolVersion);
  app.require_subcommand(1);

  TestArgs ta;
  auto* test = app.add_subcommand("test", "Run one variance-component test");
  test->add_option("curves", ta.curves, "Curve CSV (id,t,x)")->required();
  test->add_option("responses", ta.responses, "Response CSV (id,y[,trials])")
      ->required();
  test->add_option("--family", ta.family,
                   "gaussian, bernoulli, binomial or poisson")
      ->required();
  test->add_option("--hypothesis", ta.hypothesis,
                   "nullity, functionality or linearity")
      ->capture_default_str();
  test->add_option("--method", ta.method, "aRLRT or aScore")
      ->capture_default_str();
  test->add_option("--null-draws", ta.null_draws, "RLRT null draws")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  test->add_option("--ku", ta.ku, "Number of B-spline basis functions")
      ->capture_default_str();
  test->add_option("--kx", ta.kx, "Force the number of eigenfunctions");
  test->add_option("--max-components", ta.max_components, "AIC scan bound")
      ->capture_default_str();
  test->add_option("--seed", ta.seed, "Null simulation seed")
      ->capture_default_str();
  test->add_option("--out", ta.out, "Output JSON file (default stdout)");
  test->add_option("--threads", ta.threads, "Null simulation threads")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  test->add_flag("--refit-null", ta.refit_null,
                 "Take REL(0) from a separate null PQL fit");
  test->add_flag("--pre-centered", ta.pre_centered,
                 "Curves are already centered");
  test->add_option("--j-rule", ta.j_rule, "trapezoid or piecewise_linear")
      ->capture_default_str();

  FpcaArgs fa;
  auto* fpca = app.add_subcommand("fpca", "Functional principal components");
  fpca->add_option("curves", fa.curves, "Curve CSV (id,t,x)")->required();
  fpca->add_option("--out", fa.out, "Output JSON file (default stdout)");
  fpca->add_option("--kx", fa.kx, "Force the number of eigenfunctions");
  fpca->add_option("--max-components", fa.max_components, "AIC scan bound")
      ->capture_default_str();
  fpca->add_flag("--pre-centered", fa.pre_centered,
                 "Curves are already centered");

  SimulateArgs sa;
  auto* simulate =
      app.add_subcommand("simulate", "Monte Carlo rejection rates");
  simulate->add_option("config", sa.config, "key = value config file")
      ->required();
  simulate->add_option("--out-dir", sa.out_dir, "Directory for results")
      ->required();
  simulate->add_option("--threads", sa.threads, "Worker threads")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sa.seed, "Master seed")->required();

  GenerateArgs ga;
  auto* generate =
      app.add_subcommand("generate", "Write one simulated dataset as CSV");
  generate->add_option("config", ga.config, "key = value config file")
      ->required();
  generate->add_option("--out-dir", ga.out_dir, "Directory for the CSVs")
      ->required();
  generate->add_option("--seed", ga.seed, "Data seed")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (*test) return cmd_test(ta, out);
    if (*fpca) return cmd_fpca(fa, out);
    if (*simulate) return cmd_simulate(sa, out);
    if (*generate) return cmd_generate(ga, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}

}  // namespace gflm
