#include "gflm/harness.hpp"

#include "gflm/fpca.hpp"
#include "gflm/quadrature.hpp"
#include "gflm/rng.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>

namespace gflm {

namespace {

constexpr std::uint64_t kDataStream = 0x64617461ULL;
constexpr std::uint64_t kTestStream = 0x74657374ULL;

}  // namespace

std::string_view to_string(CoefficientForm form) {
  switch (form) {
    case CoefficientForm::scalar: return "scalar";
    case CoefficientForm::linear: return "linear";
    case CoefficientForm::trig: return "trig";
    case CoefficientForm::tabulated: return "tabulated";
  }
  return "unknown";
}

CoefficientForm parse_coefficient(std::string_view name) {
  if (name == "scalar") return CoefficientForm::scalar;
  if (name == "linear") return CoefficientForm::linear;
  if (name == "trig" || name == "trigonometric") return CoefficientForm::trig;
  if (name == "tabulated") return CoefficientForm::tabulated;
  throw std::invalid_argument("unknown coefficient form '" +
                              std::string(name) + "'");
}

void SimConfig::validate() const {
  if (n < 3) throw std::invalid_argument("n: need at least 3 subjects");
  if (grid_size < 4) throw std::invalid_argument("grid_size: need >= 4");
  if (m < 1 || m > grid_size) {
    throw std::invalid_argument("m: must be in [1, grid_size]");
  }
  if (replicates < 1) throw std::invalid_argument("replicates: must be >= 1");
  if (!(alpha_level > 0.0 && alpha_level < 1.0)) {
    throw std::invalid_argument("alpha_level: must be in (0, 1)");
  }
  if (null_draws < 1) throw std::invalid_argument("null_draws: must be >= 1");
  if (family == FamilyTag::binomial && trials < 1) {
    throw std::invalid_argument("trials: must be >= 1");
  }
  if (!(noise_var >= 0.0)) {
    throw std::invalid_argument("noise_var: must be >= 0");
  }
  if (!(gaussian_sd > 0.0)) {
    throw std::invalid_argument("gaussian_sd: must be > 0");
  }
  if (eigenvalues.size() < 1 || (eigenvalues.array() <= 0.0).any()) {
    throw std::invalid_argument("eigenvalues: must be positive");
  }
  if (coefficient == CoefficientForm::tabulated &&
      tabulated.size() != grid_size) {
    throw std::invalid_argument("tabulated: need one value per grid point");
  }
  if (threads < 1) throw std::invalid_argument("threads: must be >= 1");
}

Eigen::VectorXd equally_spaced_grid(int size) {
  return Eigen::VectorXd::LinSpaced(size, 0.0, 1.0);
}

Eigen::MatrixXd fourier_eigenfunctions(const Eigen::VectorXd& grid,
                                       int count) {
  Eigen::MatrixXd psi(grid.size(), count);
  const double root2 = std::numbers::sqrt2;
  for (int k = 0; k < count; ++k) {
    const int freq = (k + 1) / 2;
    for (Eigen::Index j = 0; j < grid.size(); ++j) {
      const double arg = 2.0 * std::numbers::pi * freq * grid(j);
      if (k == 0) {
        psi(j, k) = 1.0;
      } else if (k % 2 == 1) {
        psi(j, k) = root2 * std::sin(arg);
      } else {
        psi(j, k) = root2 * std::cos(arg);
      }
    }
  }
  return psi;
}

Eigen::VectorXd coefficient_values(const SimConfig& config,
                                   const Eigen::VectorXd& grid) {
  const double d = config.delta;
  switch (config.coefficient) {
    case CoefficientForm::scalar:
      return Eigen::VectorXd::Constant(grid.size(), d);
    case CoefficientForm::linear:
      return (1.0 + d * grid.array()).matrix();
    case CoefficientForm::trig:
      return (1.0 + grid.array() +
              d * (2.0 * std::numbers::pi * grid.array()).cos())
          .matrix();
    case CoefficientForm::tabulated:
      return d * config.tabulated;
  }
  return Eigen::VectorXd::Zero(grid.size());
}

SimulatedData generate_dataset(const SimConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  const Eigen::VectorXd grid = equally_spaced_grid(config.grid_size);
  const Eigen::Index g = grid.size();
  const auto k = static_cast<int>(config.eigenvalues.size());
  const Eigen::MatrixXd psi = fourier_eigenfunctions(grid, k);
  const Eigen::VectorXd beta = coefficient_values(config, grid);
  const Eigen::VectorXd w = trapezoid_weights(grid);
  const Eigen::VectorXd wb = w.cwiseProduct(beta);

  SimulatedData out;
  FunctionalDataset& data = out.data;
  data.grid = grid;
  data.family = config.family;
  out.latent.resize(config.n, g);
  out.eta.resize(config.n);
  data.response.resize(config.n);
  if (config.family == FamilyTag::binomial) {
    data.trials = Eigen::VectorXd::Constant(config.n, config.trials);
  }

  std::vector<std::size_t> all(static_cast<std::size_t>(g));
  std::iota(all.begin(), all.end(), std::size_t{0});
  const Family family(config.family);
  const double noise_sd = std::sqrt(config.noise_var);

  for (int i = 0; i < config.n; ++i) {
    Eigen::VectorXd xi(k);
    for (int c = 0; c < k; ++c) {
      xi(c) = std::sqrt(config.eigenvalues(c)) * normal(rng);
    }
    out.latent.row(i) = (psi * xi).transpose();
    out.eta(i) = config.intercept + out.latent.row(i).dot(wb);

    SubjectCurve s;
    s.id = "s" + std::to_string(i + 1);
    if (config.m == g) {
      s.index = all;
    } else {
      std::sample(all.begin(), all.end(), std::back_inserter(s.index),
                  config.m, rng);
    }
    s.values.resize(static_cast<Eigen::Index>(s.index.size()));
    for (std::size_t j = 0; j < s.index.size(); ++j) {
      s.values(static_cast<Eigen::Index>(j)) =
          out.latent(i, static_cast<Eigen::Index>(s.index[j])) +
          noise_sd * normal(rng);
    }
    data.subjects.push_back(std::move(s));

    const double mu = family.inverse_link(out.eta(i));
    switch (config.family) {
      case FamilyTag::gaussian:
        data.response(i) = mu + config.gaussian_sd * normal(rng);
        break;
      case FamilyTag::bernoulli:
        data.response(i) = std::bernoulli_distribution(mu)(rng) ? 1.0 : 0.0;
        break;
      case FamilyTag::binomial:
        data.response(i) =
            std::binomial_distribution<int>(config.trials, mu)(rng);
        break;
      case FamilyTag::poisson:
        data.response(i) = static_cast<double>(
            std::poisson_distribution<long long>(mu)(rng));
        break;
    }
  }
  return out;
}

double ExperimentResult::rate() const noexcept {
  return replicates > 0 ? static_cast<double>(rejections) / replicates : 0.0;
}

double ExperimentResult::standard_error() const noexcept {
  if (replicates < 1) return 0.0;
  const double r = rate();
  return std::sqrt(r * (1.0 - r) / replicates);
}

double ExperimentResult::rate_converged() const noexcept {
  const int usable = replicates - nonconverged - failures;
  return usable > 0 ? static_cast<double>(rejections) / usable : 0.0;
}

namespace {

struct Outcome {
  bool reject = false;
  bool converged = true;
  bool failed = false;
  double seconds = 0.0;
};

}  // namespace

std::vector<ExperimentResult> run_experiments(
    const SimConfig& config, const std::vector<Hypothesis>& hypotheses,
    const std::vector<TestMethod>& methods) {
  config.validate();
  const std::size_t cells = hypotheses.size() * methods.size();
  const auto reps = static_cast<std::size_t>(config.replicates);
  std::vector<Outcome> outcomes(reps * cells);

  auto run_replicate = [&](std::size_t rep) {
    Outcome* row = &outcomes[rep * cells];
    SimulatedData sim;
    FpcaModel fpca;
    try {
      sim = generate_dataset(config,
                             derive_seed(config.seed, kDataStream, rep));
      fpca = fit_fpca(sim.data, config.test.fpca);
    } catch (const std::exception&) {
      for (std::size_t c = 0; c < cells; ++c) row[c].failed = true;
      return;
    }
    std::size_t c = 0;
    for (std::size_t h = 0; h < hypotheses.size(); ++h) {
      for (std::size_t mth = 0; mth < methods.size(); ++mth, ++c) {
        TestOptions opts = config.test;
        opts.method = methods[mth];
        opts.null_draws = config.null_draws;
        opts.threads = 1;
        opts.seed = derive_seed(config.seed, kTestStream, rep * 64 + c);
        const auto start = std::chrono::steady_clock::now();
        try {
          const TestResult res = run_test(sim.data, fpca, hypotheses[h], opts);
          row[c].reject = res.p_value <= config.alpha_level;
          row[c].converged =
              res.converged && !res.diverged && res.null_converged;
        } catch (const std::exception&) {
          row[c].failed = true;
        }
        row[c].seconds = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - start)
                             .count();
      }
    }
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t rep = next++; rep < reps; rep = next++) {
      run_replicate(rep);
    }
  };
  const int workers =
      std::max(1, std::min(config.threads, static_cast<int>(reps)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<ExperimentResult> results;
  std::size_t c = 0;
  for (Hypothesis h : hypotheses) {
    for (TestMethod mth : methods) {
      ExperimentResult r;
      r.family = config.family;
      r.hypothesis = h;
      r.method = mth;
      r.n = config.n;
      r.m = config.m;
      r.coefficient = config.coefficient;
      r.delta = config.delta;
      r.replicates = config.replicates;
      double seconds = 0.0;
      for (std::size_t rep = 0; rep < reps; ++rep) {
        const Outcome& o = outcomes[rep * cells + c];
        seconds += o.seconds;
        if (o.failed) {
          ++r.failures;
        } else if (!o.converged) {
          ++r.nonconverged;
          if (o.reject) ++r.rejections_nonconverged;
        } else if (o.reject) {
          ++r.rejections;
        }
      }
      r.mean_runtime = seconds / static_cast<double>(reps);
      results.push_back(r);
      ++c;
    }
  }
  return results;
}

ExperimentResult run_experiment(const SimConfig& config, TestMethod method,
                                Hypothesis hypothesis) {
  return run_experiments(config, {hypothesis}, {method}).front();
}

std::vector<ExperimentResult> power_mode(
    const SimConfig& config, const std::vector<double>& deltas,
    const std::vector<Hypothesis>& hypotheses,
    const std::vector<TestMethod>& methods) {
  if (config.coefficient != CoefficientForm::tabulated) {
    throw std::invalid_argument("power mode needs a tabulated coefficient");
  }
  std::vector<ExperimentResult> out;
  for (const int n : {config.n, 2 * config.n}) {
    for (double delta : deltas) {
      SimConfig cell = config;
      cell.n = n;
      cell.delta = delta;
      for (auto& r : run_experiments(cell, hypotheses, methods)) {
        out.push_back(r);
      }
    }
  }
  return out;
}

}  // namespace gflm
