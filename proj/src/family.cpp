#include "gflm/family.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gflm {

double Family::link(double mu) const {
  switch (tag_) {
    case FamilyTag::gaussian: return mu;
    case FamilyTag::bernoulli:
    case FamilyTag::binomial: return std::log(mu / (1.0 - mu));
    case FamilyTag::poisson: return std::log(mu);
  }
  return mu;
}

double Family::inverse_link(double eta) const {
  switch (tag_) {
    case FamilyTag::gaussian: return eta;
    case FamilyTag::bernoulli:
    case FamilyTag::binomial:
      return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta))
                        : std::exp(eta) / (1.0 + std::exp(eta));
    case FamilyTag::poisson: return std::exp(eta);
  }
  return eta;
}

double Family::link_derivative(double mu) const {
  switch (tag_) {
    case FamilyTag::gaussian: return 1.0;
    case FamilyTag::bernoulli:
    case FamilyTag::binomial: return 1.0 / (mu * (1.0 - mu));
    case FamilyTag::poisson: return 1.0 / mu;
  }
  return 1.0;
}

double Family::variance(double mu, double trials) const {
  switch (tag_) {
    case FamilyTag::gaussian: return 1.0;
    case FamilyTag::bernoulli: return mu * (1.0 - mu);
    case FamilyTag::binomial: return mu * (1.0 - mu) / trials;
    case FamilyTag::poisson: return mu;
  }
  return 1.0;
}

double Family::clip_mean(double mu) const {
  switch (tag_) {
    case FamilyTag::gaussian: return mu;
    case FamilyTag::bernoulli:
    case FamilyTag::binomial:
      return std::clamp(mu, kProbabilityClip, 1.0 - kProbabilityClip);
    case FamilyTag::poisson: return std::max(mu, kPoissonMeanFloor);
  }
  return mu;
}

double Family::eta_bound() const {
  switch (tag_) {
    case FamilyTag::gaussian: return std::numeric_limits<double>::infinity();
    case FamilyTag::bernoulli:
    case FamilyTag::binomial:
      return std::log((1.0 - kProbabilityClip) / kProbabilityClip);
    case FamilyTag::poisson: return -std::log(kPoissonMeanFloor);
  }
  return std::numeric_limits<double>::infinity();
}

}  // namespace gflm
