#include "gflm/fpca.hpp"

#include "gflm/bases.hpp"
#include "gflm/quadrature.hpp"
#include "pspline_smoother.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace gflm {

namespace {

// Sparse row of a cubic B-spline basis at one grid point.
struct LocalRow {
  int start = 0;
  double values[4] = {0.0, 0.0, 0.0, 0.0};
};

std::vector<LocalRow> local_rows(const SplineBasis& basis,
                                 const Eigen::VectorXd& grid) {
  std::vector<LocalRow> rows(static_cast<std::size_t>(grid.size()));
  for (Eigen::Index j = 0; j < grid.size(); ++j) {
    rows[static_cast<std::size_t>(j)].start =
        basis.evaluate_local(grid(j), rows[static_cast<std::size_t>(j)].values);
  }
  return rows;
}

int effective_basis(int requested, Eigen::Index grid_size) {
  // cubic needs 4; more functions than grid points only adds null directions
  return std::max(4, std::min(requested, static_cast<int>(grid_size)));
}

}  // namespace

Eigen::VectorXd estimate_mean(const FunctionalDataset& data,
                              const FpcaOptions& options) {
  const Eigen::Index m = data.grid.size();
  if (options.pre_centered) return Eigen::VectorXd::Zero(m);
  require_increasing_grid(data.grid);

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd count = Eigen::VectorXd::Zero(m);
  for (const auto& s : data.subjects) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      const auto g = static_cast<Eigen::Index>(s.index[j]);
      sum(g) += s.values(static_cast<Eigen::Index>(j));
      count(g) += 1.0;
    }
  }
  Eigen::Index first = 0;
  while (first < m && count(first) == 0.0) ++first;
  Eigen::Index last = m - 1;
  while (last >= 0 && count(last) == 0.0) --last;
  if (first != 0 || last != m - 1) {
    throw std::invalid_argument(
        "grid coverage gap: some grid points at the domain boundary are never "
        "observed");
  }

  const SplineBasis basis = build_basis(data.grid(0), data.grid(m - 1),
                                        effective_basis(options.mean_basis, m),
                                        3);
  const int p = basis.num_basis();
  const auto rows = local_rows(basis, data.grid);
  const double observed = static_cast<double>((count.array() > 0.0).count());
  const double mean_count = count.sum() / observed;

  detail::PenalizedSystem sys;
  sys.gram = Eigen::MatrixXd::Zero(p, p);
  sys.rhs = Eigen::VectorXd::Zero(p);
  sys.penalty = difference_penalty(p, 2);
  sys.n_obs = observed;
  for (Eigen::Index g = 0; g < m; ++g) {
    if (count(g) == 0.0) continue;
    const double w = count(g) / mean_count;
    const double y = sum(g) / count(g);
    const LocalRow& r = rows[static_cast<std::size_t>(g)];
    for (int a = 0; a < 4; ++a) {
      sys.rhs(r.start + a) += w * y * r.values[a];
      for (int b = 0; b < 4; ++b) {
        sys.gram(r.start + a, r.start + b) += w * r.values[a] * r.values[b];
      }
    }
    sys.yy += w * y * y;
  }
  const detail::PenalizedSolution fit = detail::solve_gcv(sys);
  Eigen::VectorXd mean(m);
  for (Eigen::Index g = 0; g < m; ++g) {
    const LocalRow& r = rows[static_cast<std::size_t>(g)];
    double v = 0.0;
    for (int a = 0; a < 4; ++a) v += r.values[a] * fit.coef(r.start + a);
    mean(g) = v;
  }
  return mean;
}

CovarianceEstimate estimate_covariance(const FunctionalDataset& data,
                                       const Eigen::VectorXd& mean,
                                       const FpcaOptions& options) {
  const Eigen::Index m = data.grid.size();
  if (mean.size() != m) {
    throw std::invalid_argument("mean length does not match the grid");
  }
  if (data.num_subjects() < 2) {
    throw std::invalid_argument("covariance estimation needs at least two "
                                "subjects");
  }

  Eigen::MatrixXd pair_sum = Eigen::MatrixXd::Zero(m, m);
  Eigen::MatrixXd pair_count = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd diag_sum = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd diag_count = Eigen::VectorXd::Zero(m);
  std::vector<double> resid;
  for (const auto& s : data.subjects) {
    const std::size_t mi = s.size();
    resid.resize(mi);
    for (std::size_t j = 0; j < mi; ++j) {
      resid[j] = s.values(static_cast<Eigen::Index>(j)) -
                 mean(static_cast<Eigen::Index>(s.index[j]));
    }
    for (std::size_t j = 0; j < mi; ++j) {
      const auto a = static_cast<Eigen::Index>(s.index[j]);
      diag_sum(a) += resid[j] * resid[j];
      diag_count(a) += 1.0;
      for (std::size_t k = 0; k < mi; ++k) {
        if (k == j) continue;
        const auto b = static_cast<Eigen::Index>(s.index[k]);
        pair_sum(a, b) += resid[j] * resid[k];
        pair_count(a, b) += 1.0;
      }
    }
  }
  const double cells = static_cast<double>((pair_count.array() > 0.0).count());
  if (cells == 0.0) {
    throw std::invalid_argument("insufficient pairs: no subject has two or "
                                "more observations");
  }
  const double mean_count = pair_count.sum() / cells;

  const SplineBasis basis = build_basis(data.grid(0), data.grid(m - 1),
                                        effective_basis(options.cov_basis, m),
                                        3);
  const int p = basis.num_basis();
  const int pp = p * p;
  const auto rows = local_rows(basis, data.grid);

  detail::PenalizedSystem sys;
  sys.gram = Eigen::MatrixXd::Zero(pp, pp);
  sys.rhs = Eigen::VectorXd::Zero(pp);
  sys.n_obs = cells;
  double kron[16];
  int kron_index[16];
  for (Eigen::Index a = 0; a < m; ++a) {
    const LocalRow& ra = rows[static_cast<std::size_t>(a)];
    for (Eigen::Index b = 0; b < m; ++b) {
      const double cnt = pair_count(a, b);
      if (cnt == 0.0) continue;
      const LocalRow& rb = rows[static_cast<std::size_t>(b)];
      const double w = cnt / mean_count;
      const double y = pair_sum(a, b) / cnt;
      for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
          kron[i * 4 + j] = ra.values[i] * rb.values[j];
          kron_index[i * 4 + j] = (ra.start + i) * p + (rb.start + j);
        }
      }
      for (int u = 0; u < 16; ++u) {
        sys.rhs(kron_index[u]) += w * y * kron[u];
        for (int v = 0; v < 16; ++v) {
          sys.gram(kron_index[u], kron_index[v]) += w * kron[u] * kron[v];
        }
      }
      sys.yy += w * y * y;
    }
  }
  const Eigen::MatrixXd pen = difference_penalty(p, 2);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(p, p);
  sys.penalty = Eigen::MatrixXd::Zero(pp, pp);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      for (int k = 0; k < p; ++k) {
        for (int l = 0; l < p; ++l) {
          sys.penalty(i * p + j, k * p + l) =
              pen(i, k) * eye(j, l) + eye(i, k) * pen(j, l);
        }
      }
    }
  }
  const detail::PenalizedSolution fit = detail::solve_gcv(sys);
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                      Eigen::RowMajor>>
      theta(fit.coef.data(), p, p);
  const Eigen::MatrixXd bmat = evaluate_basis(basis, data.grid);
  Eigen::MatrixXd smooth = bmat * theta * bmat.transpose();

  CovarianceEstimate out;
  out.smoothed = 0.5 * (smooth + smooth.transpose());

  // Raw diagonal; unobserved grid points are filled by linear interpolation
  // over the observed ones.
  std::vector<double> obs_t;
  std::vector<double> obs_v;
  for (Eigen::Index g = 0; g < m; ++g) {
    if (diag_count(g) > 0.0) {
      obs_t.push_back(data.grid(g));
      obs_v.push_back(diag_sum(g) / diag_count(g));
    }
  }
  const Eigen::VectorXd ot = Eigen::Map<Eigen::VectorXd>(
      obs_t.data(), static_cast<Eigen::Index>(obs_t.size()));
  const Eigen::VectorXd ov = Eigen::Map<Eigen::VectorXd>(
      obs_v.data(), static_cast<Eigen::Index>(obs_v.size()));
  out.raw_diagonal.resize(m);
  double gap = 0.0;
  for (Eigen::Index g = 0; g < m; ++g) {
    if (diag_count(g) > 0.0) {
      out.raw_diagonal(g) = diag_sum(g) / diag_count(g);
      gap += out.raw_diagonal(g) - out.smoothed(g, g);
    } else if (ot.size() == 1) {
      out.raw_diagonal(g) = ov(0);
    } else {
      out.raw_diagonal(g) = interpolate_linear(ot, ov, data.grid(g));
    }
  }
  out.noise_var = std::max(0.0, gap / static_cast<double>(obs_t.size()));
  return out;
}

Spectrum eigen_decompose(const Eigen::MatrixXd& cov,
                         const Eigen::VectorXd& grid, double rel_tol) {
  const Eigen::Index m = grid.size();
  if (cov.rows() != m || cov.cols() != m) {
    throw std::invalid_argument("covariance dimensions do not match the grid");
  }
  const double scale = std::max(cov.cwiseAbs().maxCoeff(), 1e-300);
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    throw std::invalid_argument("covariance matrix is not symmetric");
  }
  const Eigen::VectorXd w = trapezoid_weights(grid);
  const Eigen::VectorXd sw = w.cwiseSqrt();
  Eigen::MatrixXd weighted = sw.asDiagonal() * cov * sw.asDiagonal();
  weighted = 0.5 * (weighted + weighted.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(weighted);
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("covariance eigendecomposition failed");
  }
  const Eigen::VectorXd values = eig.eigenvalues().reverse();
  const Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();
  const double top = values(0);
  Eigen::Index keep = 0;
  while (keep < m && top > 0.0 && values(keep) > rel_tol * top) ++keep;

  Spectrum out;
  out.values = values.head(keep);
  out.functions = sw.cwiseInverse().asDiagonal() * vectors.leftCols(keep);
  for (Eigen::Index k = 0; k < keep; ++k) {
    Eigen::Index arg = 0;
    out.functions.col(k).cwiseAbs().maxCoeff(&arg);
    if (out.functions(arg, k) < 0.0) out.functions.col(k) *= -1.0;
  }
  return out;
}

Eigen::MatrixXd estimate_scores(const FunctionalDataset& data,
                                const Eigen::VectorXd& mean,
                                const Eigen::VectorXd& eigenvalues,
                                const Eigen::MatrixXd& eigenfunctions,
                                double noise_var, int num_components,
                                ScoreMethod method) {
  const int k = num_components;
  if (k < 1 || k > eigenvalues.size() || k > eigenfunctions.cols()) {
    throw std::invalid_argument("requested " + std::to_string(k) +
                                " components but only " +
                                std::to_string(eigenvalues.size()) +
                                " are available");
  }
  if (noise_var < 0.0) throw std::invalid_argument("noise variance < 0");
  const Eigen::Index m = data.grid.size();
  const Eigen::VectorXd w = trapezoid_weights(data.grid);
  const Eigen::MatrixXd psi = eigenfunctions.leftCols(k);
  const Eigen::MatrixXd weighted_psi = w.asDiagonal() * psi;
  const Eigen::VectorXd inv_lambda = eigenvalues.head(k).cwiseInverse();

  Eigen::MatrixXd scores(static_cast<Eigen::Index>(data.num_subjects()), k);
  for (std::size_t i = 0; i < data.num_subjects(); ++i) {
    const SubjectCurve& s = data.subjects[i];
    const auto row = static_cast<Eigen::Index>(i);
    const bool dense = static_cast<Eigen::Index>(s.size()) == m;
    const bool use_quadrature =
        method == ScoreMethod::quadrature ||
        (method == ScoreMethod::automatic && dense);
    if (use_quadrature) {
      if (!dense) {
        throw std::invalid_argument("quadrature scores need fully observed "
                                    "subjects; '" + s.id + "' is sparse");
      }
      scores.row(row) = ((s.values - mean).transpose() * weighted_psi);
      continue;
    }
    const auto mi = static_cast<Eigen::Index>(s.size());
    Eigen::MatrixXd psi_i(mi, k);
    Eigen::VectorXd resid(mi);
    for (Eigen::Index j = 0; j < mi; ++j) {
      const auto g = static_cast<Eigen::Index>(s.index[static_cast<std::size_t>(j)]);
      psi_i.row(j) = psi.row(g);
      resid(j) = s.values(j) - mean(g);
    }
    // Lambda Psi^T (Psi Lambda Psi^T + s2 I)^{-1} r, in its K x K form
    Eigen::MatrixXd system = psi_i.transpose() * psi_i;
    system.diagonal() += noise_var * inv_lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(system);
    bool singular = llt.info() != Eigen::Success;
    if (!singular && noise_var == 0.0) {
      const Eigen::VectorXd d = Eigen::MatrixXd(llt.matrixL()).diagonal();
      singular = d.minCoeff() <= 1e-10 * std::max(d.maxCoeff(), 1e-300);
    }
    if (singular) {
      throw std::runtime_error("singular score system for subject '" + s.id +
                               "' (too few points and zero noise variance)");
    }
    scores.row(row) = llt.solve(psi_i.transpose() * resid).transpose();
  }
  return scores;
}

std::vector<double> aic_curve(const FunctionalDataset& data,
                              const FpcaModel& model, int max_k) {
  const int kmax = std::min(max_k, model.max_components());
  const Eigen::VectorXd w = trapezoid_weights(model.grid);
  const double big_n = static_cast<double>(data.total_observations());
  const double n = static_cast<double>(data.num_subjects());
  std::vector<double> aic;
  Eigen::VectorXd model_diag = Eigen::VectorXd::Zero(model.grid.size());
  for (int k = 1; k <= kmax; ++k) {
    model_diag += model.eigenvalues(k - 1) *
                  model.eigenfunctions.col(k - 1).cwiseAbs2();
    const double s2 =
        std::max(w.dot(model.raw_diagonal - model_diag), 1e-10);
    aic.push_back(big_n * std::log(s2) + big_n + 2.0 * n * k);
  }
  return aic;
}

int select_kx(const FunctionalDataset& data, const FpcaModel& model,
              int d_max, int max_k) {
  const int floor_k = d_max + 1;
  if (model.max_components() < floor_k) {
    throw std::invalid_argument(
        "only " + std::to_string(model.max_components()) +
        " positive eigenvalues; at least d+1 = " + std::to_string(floor_k) +
        " are required");
  }
  const std::vector<double> aic = aic_curve(data, model, max_k);
  const auto best = std::min_element(aic.begin(), aic.end()) - aic.begin();
  return std::max(static_cast<int>(best) + 1, floor_k);
}

FpcaModel fit_fpca(const FunctionalDataset& data, const FpcaOptions& options) {
  data.validate();
  FpcaModel model;
  model.grid = data.grid;
  model.mean = estimate_mean(data, options);
  const CovarianceEstimate cov = estimate_covariance(data, model.mean, options);
  const Spectrum spec =
      eigen_decompose(cov.smoothed, data.grid, options.eigen_rel_tol);
  if (spec.values.size() == 0) {
    throw std::runtime_error("smoothed covariance has no positive eigenvalues");
  }
  model.eigenvalues = spec.values;
  model.eigenfunctions = spec.functions;
  model.raw_diagonal = cov.raw_diagonal;
  model.noise_var = cov.noise_var;
  return model;
}

void finalize_fpca(FpcaModel& model, const FunctionalDataset& data,
                   int num_components, ScoreMethod method) {
  model.scores = estimate_scores(data, model.mean, model.eigenvalues,
                                 model.eigenfunctions, model.noise_var,
                                 num_components, method);
  model.num_components = num_components;
}

}  // namespace gflm
