#include "gflm/glmm_pql.hpp"

#include "gflm/lambda_search.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gflm {

WorkingResponse working_response(const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& eta,
                                 const Family& family,
                                 const Eigen::VectorXd& trials) {
  const Eigen::Index n = y.size();
  if (eta.size() != n) {
    throw std::invalid_argument("eta and y lengths differ");
  }
  const bool binomial = family.tag() == FamilyTag::binomial;
  if (binomial && trials.size() != n) {
    throw std::invalid_argument("binomial working response needs trials");
  }
  WorkingResponse out;
  out.y.resize(n);
  out.weights.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(eta(i))) {
      throw std::runtime_error("non-finite linear predictor in PQL");
    }
    const double m = binomial ? trials(i) : 1.0;
    const double mu = family.clip_mean(family.inverse_link(eta(i)));
    const double yi = binomial ? y(i) / m : y(i);
    const double gprime = family.link_derivative(mu);
    const double w = 1.0 / (gprime * gprime * family.variance(mu, m));
    const double z = eta(i) + gprime * (yi - mu);
    if (!std::isfinite(w) || !(w > 0.0) || !std::isfinite(z)) {
      throw std::runtime_error("non-finite working response");
    }
    out.weights(i) = w;
    out.y(i) = std::sqrt(w) * z;
  }
  return out;
}

RemlSpectrum::RemlSpectrum(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                           const Eigen::MatrixXd& Z)
    : n_(y.size()), p_(X.cols()) {
  if (X.rows() != n_ || Z.rows() != n_) {
    throw std::invalid_argument("working model dimensions disagree");
  }
  if (p_ < 1 || n_ <= p_) {
    throw std::invalid_argument("working model needs n > p >= 1");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> pivoted(X);
  if (pivoted.rank() < p_) {
    throw std::invalid_argument("working fixed-effect design is rank "
                                "deficient");
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
  const Eigen::MatrixXd qx =
      qr.householderQ() * Eigen::MatrixXd::Identity(n_, p_);
  const auto r_diag = qr.matrixQR().diagonal();
  logdet_xtx_ = 0.0;
  for (Eigen::Index j = 0; j < p_; ++j) {
    logdet_xtx_ += 2.0 * std::log(std::abs(r_diag(j)));
  }
  const Eigen::VectorXd yr = y - qx * (qx.transpose() * y);
  const double total = yr.squaredNorm();

  mu_.resize(0);
  w2_.resize(0);
  tail_ = total;
  if (Z.cols() > 0) {
    const Eigen::MatrixXd zr = Z - qx * (qx.transpose() * Z);
    const Eigen::MatrixXd gram = zr.transpose() * zr;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success) {
      throw std::runtime_error("eigendecomposition of Z^T P0 Z failed");
    }
    const Eigen::VectorXd values = eig.eigenvalues().reverse();
    const Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();
    const double top = values.size() > 0 ? values(0) : 0.0;
    Eigen::Index keep = 0;
    while (keep < values.size() && top > 1e-300 &&
           values(keep) > 1e-10 * top) {
      ++keep;
    }
    keep = std::min<Eigen::Index>(keep, n_ - p_);
    mu_ = values.head(keep);
    const Eigen::VectorXd proj =
        vectors.leftCols(keep).transpose() * (zr.transpose() * yr);
    w2_ = proj.cwiseAbs2().cwiseQuotient(mu_);
    tail_ = std::max(total - w2_.sum(), 0.0);
  }
}

double RemlSpectrum::quadratic(double lambda) const {
  double q = tail_;
  for (Eigen::Index s = 0; s < mu_.size(); ++s) {
    q += w2_(s) / (1.0 + lambda * mu_(s));
  }
  return q;
}

double RemlSpectrum::rel(double lambda) const {
  double logdet = 0.0;
  for (Eigen::Index s = 0; s < mu_.size(); ++s) {
    logdet += std::log1p(lambda * mu_(s));
  }
  const double q = quadratic(lambda);
  return -0.5 * (logdet_xtx_ + logdet +
                 static_cast<double>(n_ - p_) * std::log(q));
}

RemlProfile reml_profile(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                         const Eigen::MatrixXd& Z) {
  return fit_working_lmm(y, X, Z).profile;
}

WorkingLmmFit fit_working_lmm(const Eigen::VectorXd& y,
                              const Eigen::MatrixXd& X,
                              const Eigen::MatrixXd& Z,
                              std::optional<double> lambda_fixed) {
  const RemlSpectrum spec(y, X, Z);
  WorkingLmmFit out;
  RemlProfile& prof = out.profile;
  if (lambda_fixed) {
    if (!(*lambda_fixed >= 0.0)) {
      throw std::invalid_argument("fixed variance ratio must be >= 0");
    }
    prof.lambda = *lambda_fixed;
    prof.rel_at_zero = spec.rel(0.0);
    prof.rel_at_opt = spec.rel(prof.lambda);
  } else {
    const LambdaMax best =
        maximize_over_lambda([&](double lam) { return spec.rel(lam); });
    prof.lambda = best.lambda;
    prof.rel_at_opt = best.value;
    prof.rel_at_zero = best.value_at_zero;
  }
  if (!std::isfinite(prof.rel_at_opt) || !std::isfinite(prof.rel_at_zero)) {
    throw std::runtime_error("restricted log-likelihood is not finite");
  }
  const double dof = static_cast<double>(spec.n() - spec.p());
  prof.sigma2_e = spec.quadratic(prof.lambda) / dof;
  prof.sigma2_u = prof.lambda * prof.sigma2_e;

  // Henderson mixed model equations at the chosen ratio.
  const Eigen::Index p = X.cols();
  const Eigen::Index k = Z.cols();
  if (prof.lambda == 0.0 || k == 0) {
    out.beta = X.colPivHouseholderQr().solve(y);
    out.u = Eigen::VectorXd::Zero(k);
    return out;
  }
  Eigen::MatrixXd c(p + k, p + k);
  c.topLeftCorner(p, p) = X.transpose() * X;
  c.topRightCorner(p, k) = X.transpose() * Z;
  c.bottomLeftCorner(k, p) = c.topRightCorner(p, k).transpose();
  c.bottomRightCorner(k, k) = Z.transpose() * Z;
  c.bottomRightCorner(k, k).diagonal().array() += 1.0 / prof.lambda;
  Eigen::VectorXd rhs(p + k);
  rhs.head(p) = X.transpose() * y;
  rhs.tail(k) = Z.transpose() * y;
  const Eigen::VectorXd sol = c.ldlt().solve(rhs);
  out.beta = sol.head(p);
  out.u = sol.tail(k);
  return out;
}

namespace {

Eigen::VectorXd starting_eta(const Eigen::VectorXd& y, const Family& family,
                             const Eigen::VectorXd& trials) {
  const Eigen::Index n = y.size();
  Eigen::VectorXd eta(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double mu = y(i);
    switch (family.tag()) {
      case FamilyTag::gaussian: break;
      case FamilyTag::bernoulli: mu = (y(i) + 0.5) / 2.0; break;
      case FamilyTag::binomial: mu = (y(i) + 0.5) / (trials(i) + 1.0); break;
      case FamilyTag::poisson: mu = y(i) + 0.1; break;
    }
    eta(i) = family.link(mu);
  }
  return eta;
}

bool past_clip(const Eigen::VectorXd& eta, const Family& family) {
  const double bound = family.eta_bound();
  if (!std::isfinite(bound)) return false;
  if (family.tag() == FamilyTag::poisson) return (eta.array() < -bound).all();
  return (eta.array().abs() > bound).all();
}

}  // namespace

PqlFit pql_fit(const GlmmDesign& design, const Eigen::VectorXd& y,
               const Family& family, const Eigen::VectorXd& trials,
               const PqlOptions& options) {
  const Eigen::MatrixXd& X = design.fixed;
  const Eigen::MatrixXd& Z = design.random;
  if (y.size() != X.rows()) {
    throw std::invalid_argument("response length does not match the design");
  }
  if (family.tag() == FamilyTag::binomial && trials.size() != y.size()) {
    throw std::invalid_argument("binomial fit needs one trial count per "
                                "subject");
  }
  PqlFit fit;
  Eigen::VectorXd eta = starting_eta(y, family, trials);
  WorkingLmmFit lmm;
  for (int it = 1; it <= options.max_iterations; ++it) {
    const WorkingResponse wr = working_response(y, eta, family, trials);
    const Eigen::VectorXd sw = wr.weights.cwiseSqrt();
    Eigen::MatrixXd xw = sw.asDiagonal() * X;
    Eigen::MatrixXd zw = sw.asDiagonal() * Z;
    lmm = fit_working_lmm(wr.y, xw, zw, options.lambda_fixed);
    Eigen::VectorXd eta_new = X * lmm.beta;
    if (Z.cols() > 0) eta_new += Z * lmm.u;

    fit.iterations = it;
    fit.y_work = wr.y;
    fit.weights = wr.weights;
    fit.x_work = std::move(xw);
    fit.z_work = std::move(zw);
    const double change = (eta_new - eta).cwiseAbs().maxCoeff();
    eta = std::move(eta_new);
    if (!eta.allFinite()) {
      throw std::runtime_error("PQL linear predictor became non-finite");
    }
    // identity link: the working response does not depend on eta
    if (family.tag() == FamilyTag::gaussian || change < options.tolerance) {
      fit.converged = true;
      break;
    }
    if (past_clip(eta, family)) {
      fit.diverged = true;
      break;
    }
  }
  fit.beta = lmm.beta;
  fit.u = lmm.u;
  fit.lambda = lmm.profile.lambda;
  fit.sigma2_e = lmm.profile.sigma2_e;
  fit.sigma2_u = lmm.profile.sigma2_u;
  fit.rel_at_opt = lmm.profile.rel_at_opt;
  fit.rel_at_zero = lmm.profile.rel_at_zero;
  fit.eta = std::move(eta);
  return fit;
}

}  // namespace gflm
