#include "gflm/vctest.hpp"

#include "gflm/bases.hpp"
#include "gflm/lambda_search.hpp"
#include "gflm/rng.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <thread>

namespace gflm {

std::string_view to_string(TestMethod m) {
  return m == TestMethod::arlrt ? "aRLRT" : "aScore";
}

TestMethod parse_method(std::string_view name) {
  if (name == "aRLRT" || name == "arlrt" || name == "rlrt") {
    return TestMethod::arlrt;
  }
  if (name == "aScore" || name == "ascore" || name == "score") {
    return TestMethod::ascore;
  }
  throw std::invalid_argument("unknown test method '" + std::string(name) +
                              "'");
}

double rlrt_statistic(const PqlFit& fit) {
  if (!std::isfinite(fit.rel_at_opt) || !std::isfinite(fit.rel_at_zero)) {
    throw std::runtime_error("non-finite restricted log-likelihood");
  }
  if (fit.lambda == 0.0) return 0.0;
  return std::max(0.0, 2.0 * (fit.rel_at_opt - fit.rel_at_zero));
}

namespace {

constexpr int kDrawBlock = 1000;
constexpr std::uint64_t kNullStream = 0x6e756c6cULL;

void simulate_block(const Eigen::VectorXd& mu, long dof, int begin, int end,
                    std::uint64_t seed, int block, std::vector<double>& out) {
  Rng rng(derive_seed(seed, kNullStream, static_cast<std::uint64_t>(block)));
  std::normal_distribution<double> normal(0.0, 1.0);
  const long k = static_cast<long>(mu.size());
  const long rest = dof - k;
  std::chi_squared_distribution<double> chisq(
      static_cast<double>(std::max(rest, 1L)));
  Eigen::VectorXd w2(k);
  const double n_minus_p = static_cast<double>(dof);
  for (int draw = begin; draw < end; ++draw) {
    for (long s = 0; s < k; ++s) {
      const double z = normal(rng);
      w2(s) = z * z;
    }
    const double tail = rest > 0 ? chisq(rng) : 0.0;
    const double total = w2.sum() + tail;
    auto f = [&](double lambda) {
      if (lambda == 0.0) return 0.0;
      double denom = tail;
      double logdet = 0.0;
      for (long s = 0; s < k; ++s) {
        const double a = 1.0 + lambda * mu(s);
        denom += w2(s) / a;
        logdet += std::log(a);
      }
      return n_minus_p * std::log(total / denom) - logdet;
    };
    out[static_cast<std::size_t>(draw)] =
        std::max(0.0, maximize_over_lambda(f).value);
  }
}

}  // namespace

std::vector<double> simulate_rlrt_null(const Eigen::VectorXd& mu, long n,
                                       long p, int n_draws, std::uint64_t seed,
                                       int threads) {
  if (mu.size() == 0) {
    throw std::invalid_argument("null simulation needs at least one "
                                "eigenvalue");
  }
  if ((mu.array() <= 0.0).any() || !mu.allFinite()) {
    throw std::invalid_argument("null simulation eigenvalues must be "
                                "positive");
  }
  if (n <= p) throw std::invalid_argument("null simulation needs n > p");
  if (n_draws < 1) throw std::invalid_argument("n_draws must be positive");
  const long dof = n - p;
  if (mu.size() > dof) {
    throw std::invalid_argument("more eigenvalues than residual degrees of "
                                "freedom");
  }
  std::vector<double> out(static_cast<std::size_t>(n_draws), 0.0);
  const int blocks = (n_draws + kDrawBlock - 1) / kDrawBlock;
  auto run_block = [&](int b) {
    simulate_block(mu, dof, b * kDrawBlock,
                   std::min(n_draws, (b + 1) * kDrawBlock), seed, b, out);
  };
  const int workers = std::clamp(threads, 1, blocks);
  if (workers == 1) {
    for (int b = 0; b < blocks; ++b) run_block(b);
    return out;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      for (int b = t; b < blocks; b += workers) run_block(b);
    });
  }
  for (auto& th : pool) th.join();
  return out;
}

double rlrt_pvalue(double stat, const std::vector<double>& null_sample) {
  if (null_sample.empty()) {
    throw std::invalid_argument("null sample is empty");
  }
  const auto exceed = std::count_if(null_sample.begin(), null_sample.end(),
                                    [stat](double d) { return d >= stat; });
  return (1.0 + static_cast<double>(exceed)) /
         (1.0 + static_cast<double>(null_sample.size()));
}

double zero_mass(const std::vector<double>& null_sample) {
  if (null_sample.empty()) return 1.0;
  const auto zeros = std::count(null_sample.begin(), null_sample.end(), 0.0);
  return static_cast<double>(zeros) / static_cast<double>(null_sample.size());
}

TestResult score_test_from_fit(const PqlFit& null_fit, Hypothesis hypothesis) {
  const Eigen::MatrixXd& X = null_fit.x_work;
  const Eigen::MatrixXd& Z = null_fit.z_work;
  const Eigen::VectorXd& y = null_fit.y_work;
  const Eigen::Index n = y.size();
  const Eigen::Index p = X.cols();
  if (n <= p) throw std::invalid_argument("score test needs n > p");

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
  const Eigen::MatrixXd qx = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
  const Eigen::VectorXd yr = y - qx * (qx.transpose() * y);
  const Eigen::MatrixXd zr = Z - qx * (qx.transpose() * Z);
  const double dof = static_cast<double>(n - p);
  const double sigma2 = yr.squaredNorm() / dof;

  TestResult out;
  out.hypothesis = hypothesis;
  out.method = TestMethod::ascore;
  out.sigma2_e = sigma2;
  out.lambda_hat = 0.0;
  out.converged = null_fit.converged;
  out.diverged = null_fit.diverged;
  out.null_converged = null_fit.converged;
  out.iterations = null_fit.iterations;
  out.mass_at_zero = 0.0;

  const Eigen::MatrixXd gram = zr.transpose() * zr;
  const double tr1 = gram.trace();
  if (!(tr1 > 0.0) || !(sigma2 > 0.0)) {
    out.statistic = 0.0;
    out.p_value = 1.0;
    return out;
  }
  const double tr2 = gram.squaredNorm();
  const double u = (zr.transpose() * yr).squaredNorm() / (2.0 * sigma2 * sigma2);
  const double mean = tr1 / (2.0 * sigma2);
  // efficient information after profiling out sigma^2_e
  const double info = (tr2 - tr1 * tr1 / dof) / (2.0 * sigma2 * sigma2);
  out.statistic = u;
  if (!(info > 0.0)) {
    out.p_value = u > mean ? 0.0 : 1.0;
    return out;
  }
  out.score_scale = info / (2.0 * mean);
  out.score_df = 2.0 * mean * mean / info;
  const boost::math::chi_squared_distribution<double> ref(out.score_df);
  out.p_value = boost::math::cdf(boost::math::complement(
      ref, u / out.score_scale));
  out.p_value = std::clamp(out.p_value, 0.0, 1.0);
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram,
                                                       Eigen::EigenvaluesOnly);
    const double top = eig.eigenvalues().maxCoeff();
    out.num_spectral =
        static_cast<int>((eig.eigenvalues().array() > 1e-10 * top).count());
  }
  return out;
}

TestResult score_test(const GlmmDesign& design, const Eigen::VectorXd& y,
                      const Family& family, const Eigen::VectorXd& trials,
                      const PqlOptions& options) {
  PqlOptions null_opts = options;
  null_opts.lambda_fixed = 0.0;
  const PqlFit null_fit = pql_fit(design, y, family, trials, null_opts);
  return score_test_from_fit(null_fit, design.hypothesis);
}

TestResult run_test(const FunctionalDataset& data, Hypothesis hypothesis,
                    const TestOptions& options) {
  data.validate();
  const FpcaModel fpca = fit_fpca(data, options.fpca);
  return run_test(data, fpca, hypothesis, options);
}

TestResult run_test(const FunctionalDataset& data, const FpcaModel& fpca_in,
                    Hypothesis hypothesis, const TestOptions& options) {
  const int d = penalty_order(hypothesis);
  int kx = 0;
  if (options.num_components) {
    kx = *options.num_components;
    if (kx < d + 1) {
      throw std::invalid_argument("K_x must be at least d+1 = " +
                                  std::to_string(d + 1));
    }
    if (kx > fpca_in.max_components()) {
      throw std::invalid_argument(
          "K_x = " + std::to_string(kx) + " exceeds the " +
          std::to_string(fpca_in.max_components()) +
          " positive eigenvalues");
    }
  } else {
    kx = select_kx(data, fpca_in, d, options.max_components);
  }
  FpcaModel fpca = fpca_in;
  finalize_fpca(fpca, data, kx);

  const SplineBasis basis =
      build_basis(data.grid(0), data.grid(data.grid.size() - 1),
                  options.num_basis, options.degree);
  const PenaltyDecomposition pen =
      decompose_penalty(difference_penalty(options.num_basis, d), d);
  const Eigen::MatrixXd J =
      compute_J(fpca.basis(), basis, data.grid, options.j_rule);
  const GlmmDesign design = build_design(fpca.scores, J, pen, hypothesis);
  const Family family(data.family);

  TestResult out;
  const PqlFit* coef_fit = nullptr;
  PqlFit alt;
  PqlFit null_fit;
  if (options.method == TestMethod::ascore) {
    PqlOptions null_opts = options.pql;
    null_opts.lambda_fixed = 0.0;
    null_fit = pql_fit(design, data.response, family, data.trials, null_opts);
    out = score_test_from_fit(null_fit, hypothesis);
    coef_fit = &null_fit;
  } else {
    alt = pql_fit(design, data.response, family, data.trials, options.pql);
    out.hypothesis = hypothesis;
    out.method = TestMethod::arlrt;
    out.lambda_hat = alt.lambda;
    out.sigma2_u = alt.sigma2_u;
    out.sigma2_e = alt.sigma2_e;
    out.converged = alt.converged;
    out.diverged = alt.diverged;
    out.iterations = alt.iterations;
    out.statistic = rlrt_statistic(alt);
    if (options.refit_null) {
      PqlOptions null_opts = options.pql;
      null_opts.lambda_fixed = 0.0;
      null_fit = pql_fit(design, data.response, family, data.trials, null_opts);
      out.null_converged = null_fit.converged;
      out.statistic =
          alt.lambda == 0.0
              ? 0.0
              : std::max(0.0, 2.0 * (alt.rel_at_opt - null_fit.rel_at_zero));
    }
    const RemlSpectrum spectrum(alt.y_work, alt.x_work, alt.z_work);
    const Eigen::VectorXd& mu = spectrum.eigenvalues();
    out.num_spectral = static_cast<int>(mu.size());
    if (mu.size() == 0) {
      out.p_value = 1.0;
      out.null_draws = 0;
      out.mass_at_zero = 1.0;
    } else {
      const std::vector<double> draws = simulate_rlrt_null(
          mu, static_cast<long>(spectrum.n()), static_cast<long>(spectrum.p()),
          options.null_draws, options.seed, options.threads);
      out.p_value = rlrt_pvalue(out.statistic, draws);
      out.null_draws = options.null_draws;
      out.mass_at_zero = zero_mass(draws);
    }
    coef_fit = &alt;
  }
  out.num_components = kx;
  out.num_basis = options.num_basis;
  out.noise_var = fpca.noise_var;
  out.grid = data.grid;
  const Eigen::VectorXd beta_star =
      coef_fit->beta.tail(coef_fit->beta.size() - 1);
  out.coefficient =
      coefficient_from_effects(pen, basis, data.grid, beta_star,
                               penalized_effects(pen, coef_fit->u));
  return out;
}

}  // namespace gflm
