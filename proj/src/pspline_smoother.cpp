#include "pspline_smoother.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gflm::detail {

namespace {

struct Spectral {
  Eigen::MatrixXd back;    // L^{-T} U
  Eigen::VectorXd s;       // eigenvalues of L^{-1} S L^{-T}
  Eigen::VectorXd r;       // U^T L^{-1} b
};

Spectral diagonalize(const PenalizedSystem& sys) {
  const Eigen::Index p = sys.gram.rows();
  const double scale = std::max(sys.gram.trace() / static_cast<double>(p),
                                std::numeric_limits<double>::min());
  Eigen::MatrixXd reg = sys.gram;
  reg.diagonal().array() += 1e-10 * scale;
  Eigen::LLT<Eigen::MatrixXd> llt(reg);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("smoother normal equations are not definite");
  }
  const Eigen::MatrixXd linv =
      llt.matrixL().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd c = linv * sys.penalty * linv.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (c + c.transpose()));
  Spectral out;
  out.s = eig.eigenvalues().cwiseMax(0.0);
  out.back = linv.transpose() * eig.eigenvectors();
  out.r = eig.eigenvectors().transpose() * (linv * sys.rhs);
  return out;
}

struct Criterion {
  double gcv;
  double edf;
};

Criterion evaluate(const Spectral& sp, const PenalizedSystem& sys,
                   double lambda) {
  double cross = 0.0;
  double quad = 0.0;
  double edf = 0.0;
  for (Eigen::Index i = 0; i < sp.s.size(); ++i) {
    const double shrink = 1.0 / (1.0 + lambda * sp.s(i));
    cross += sp.r(i) * sp.r(i) * shrink;
    quad += sp.r(i) * sp.r(i) * shrink * shrink;
    edf += shrink;
  }
  const double wrss = std::max(sys.yy - 2.0 * cross + quad, 0.0);
  const double dof = sys.n_obs - edf;
  if (dof <= 0.0) return {std::numeric_limits<double>::infinity(), edf};
  return {sys.n_obs * wrss / (dof * dof), edf};
}

}  // namespace

PenalizedSolution solve_gcv(const PenalizedSystem& sys) {
  const Spectral sp = diagonalize(sys);
  const double pen_trace = sys.penalty.trace();
  const double base = pen_trace > 0.0 ? sys.gram.trace() / pen_trace : 1.0;
  const double log_base = std::log(std::max(base, 1e-300));

  constexpr int kGrid = 65;
  constexpr double kSpan = 8.0 * 2.302585092994046;  // 8 decades each side
  auto log_lambda_at = [&](int i) {
    return log_base - kSpan + 2.0 * kSpan * i / (kGrid - 1);
  };
  auto gcv_at = [&](double log_lambda) {
    return evaluate(sp, sys, std::exp(log_lambda)).gcv;
  };

  int best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kGrid; ++i) {
    const double v = gcv_at(log_lambda_at(i));
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }
  double a = log_lambda_at(std::max(best - 1, 0));
  double b = log_lambda_at(std::min(best + 1, kGrid - 1));
  const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = gcv_at(c);
  double fd = gcv_at(d);
  while (b - a > 1e-6) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = gcv_at(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = gcv_at(d);
    }
  }
  double log_lambda = 0.5 * (a + b);
  if (gcv_at(log_lambda) > best_val) log_lambda = log_lambda_at(best);

  PenalizedSolution out;
  out.lambda = std::exp(log_lambda);
  const Criterion crit = evaluate(sp, sys, out.lambda);
  out.gcv = crit.gcv;
  out.edf = crit.edf;
  Eigen::VectorXd shrunk(sp.s.size());
  for (Eigen::Index i = 0; i < sp.s.size(); ++i) {
    shrunk(i) = sp.r(i) / (1.0 + out.lambda * sp.s(i));
  }
  out.coef = sp.back * shrunk;
  return out;
}

}  // namespace gflm::detail
