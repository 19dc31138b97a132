#pragma once

#include "gflm/data.hpp"

namespace gflm {

/// Exponential family with its canonical link. Binomial works on the
/// proportion scale: the mean is the success probability and the variance
/// is pi (1 - pi) / trials.
class Family {
 public:
  explicit Family(FamilyTag tag) : tag_(tag) {}

  FamilyTag tag() const noexcept { return tag_; }

  double link(double mu) const;
  double inverse_link(double eta) const;
  /// g'(mu), derivative of the link with respect to the mean.
  double link_derivative(double mu) const;
  /// Var(Y | eta) for one observation with `trials` trials.
  double variance(double mu, double trials = 1.0) const;
  /// Clips the mean into the interior of the mean space: probabilities to
  /// [1e-6, 1 - 1e-6], Poisson means to at least 1e-8.
  double clip_mean(double mu) const;
  /// Largest |eta| that still maps inside the clipped mean space, or
  /// infinity for the identity link.
  double eta_bound() const;

 private:
  FamilyTag tag_;
};

inline constexpr double kProbabilityClip = 1e-6;
inline constexpr double kPoissonMeanFloor = 1e-8;

}  // namespace gflm
