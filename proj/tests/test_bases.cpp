#include "gflm/bases.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace gflm;

TEST(SplineBasis, PartitionOfUnityOnGrid) {
  const SplineBasis b = build_basis(0.0, 1.0, 30, 3);
  const Eigen::MatrixXd B =
      evaluate_basis(b, Eigen::VectorXd::LinSpaced(80, 0.0, 1.0));
  EXPECT_EQ(B.cols(), 30);
  EXPECT_LT((B.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-10);
  EXPECT_GE(B.minCoeff(), 0.0);
}

TEST(SplineBasis, PartitionOfUnityRandomPoints) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(-2.0, 3.0);
  const SplineBasis b = build_basis(-2.0, 3.0, 17, 3);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_NEAR(b.evaluate(unif(rng)).sum(), 1.0, 1e-10);
  }
}

TEST(SplineBasis, ClampedSingleIntervalIsBernsteinAtLeftEnd) {
  const Eigen::VectorXd v =
      build_basis(0.0, 1.0, 4, 3, KnotLayout::clamped).evaluate(0.0);
  EXPECT_EQ(v, Eigen::Vector4d(1.0, 0.0, 0.0, 0.0));
  const Eigen::VectorXd r =
      build_basis(0.0, 1.0, 4, 3, KnotLayout::clamped).evaluate(1.0);
  EXPECT_NEAR((r - Eigen::Vector4d(0.0, 0.0, 0.0, 1.0)).norm(), 0.0, 1e-15);
}

TEST(SplineBasis, UniformSingleIntervalAtLeftEnd) {
  const Eigen::VectorXd v = build_basis(0.0, 1.0, 4, 3).evaluate(0.0);
  EXPECT_LT((v - Eigen::Vector4d(1.0 / 6, 2.0 / 3, 1.0 / 6, 0.0)).norm(), 1e-15);
}

TEST(SplineBasis, ClampedLeftEndpointGridRow) {
  const SplineBasis b = build_basis(0.0, 1.0, 30, 3, KnotLayout::clamped);
  Eigen::VectorXd grid(1);
  grid << 0.0;
  const Eigen::MatrixXd B = evaluate_basis(b, grid);
  EXPECT_EQ(B(0, 0), 1.0);
  EXPECT_EQ(B.rightCols(29).cwiseAbs().maxCoeff(), 0.0);
}

TEST(SplineBasis, MatchesCoxDeBoorAtMidpoint) {
  const SplineBasis b = build_basis(0.0, 1.0, 30, 3);
  const auto knots = oracle::knot_vector(0.0, 1.0, 30, 3, false);
  const Eigen::VectorXd v = b.evaluate(0.5);
  for (int k = 0; k < 30; ++k) {
    EXPECT_NEAR(v(k), oracle::cox_de_boor(knots, k, 3, 0.5, 1.0), 1e-12) << k;
  }
}

TEST(SplineBasis, MatchesCoxDeBoorMatrix) {
  const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(80, 0.0, 1.0);
  for (bool clamped : {false, true}) {
    const KnotLayout layout =
        clamped ? KnotLayout::clamped : KnotLayout::uniform;
    const Eigen::MatrixXd B =
        evaluate_basis(build_basis(0.0, 1.0, 30, 3, layout), grid);
    const Eigen::MatrixXd ref =
        oracle::cox_de_boor_matrix(0.0, 1.0, 30, 3, grid, clamped);
    EXPECT_LT((B - ref).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(SplineBasis, OtherDegreesMatchOracle) {
  const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(57, 1.0, 4.0);
  for (bool clamped : {false, true}) {
    const KnotLayout layout =
        clamped ? KnotLayout::clamped : KnotLayout::uniform;
    for (int deg : {0, 1, 2, 4}) {
      const Eigen::MatrixXd B =
          evaluate_basis(build_basis(1.0, 4.0, 12, deg, layout), grid);
      const Eigen::MatrixXd ref =
          oracle::cox_de_boor_matrix(1.0, 4.0, 12, deg, grid, clamped);
      EXPECT_LT((B - ref).cwiseAbs().maxCoeff(), 1e-12) << "degree " << deg;
    }
  }
}

TEST(SplineBasis, ClampedPartitionOfUnity) {
  const SplineBasis b = build_basis(0.0, 1.0, 30, 3, KnotLayout::clamped);
  const Eigen::MatrixXd B =
      evaluate_basis(b, Eigen::VectorXd::LinSpaced(80, 0.0, 1.0));
  EXPECT_LT((B.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-10);
}

TEST(SplineBasis, RejectsBadInput) {
  EXPECT_THROW(build_basis(1.0, 0.0, 10, 3), std::invalid_argument);
  EXPECT_THROW(build_basis(0.0, 1.0, 3, 3), std::invalid_argument);
  const SplineBasis b = build_basis(0.0, 1.0, 10, 3);
  EXPECT_THROW(b.evaluate(1.5), std::out_of_range);
  Eigen::VectorXd grid(2);
  grid << 0.0, -0.1;
  EXPECT_THROW(evaluate_basis(b, grid), std::out_of_range);
}

TEST(DifferencePenalty, FirstOrderSmall) {
  Eigen::Matrix3d expect;
  expect << 1, -1, 0, -1, 2, -1, 0, -1, 1;
  EXPECT_EQ(difference_penalty(3, 1), Eigen::MatrixXd(expect));
}

TEST(DifferencePenalty, ZeroOrderIsIdentity) {
  EXPECT_EQ(difference_penalty(30, 0), Eigen::MatrixXd::Identity(30, 30));
}

TEST(DifferencePenalty, SecondOrderRank) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(difference_penalty(30, 2));
  EXPECT_EQ(lu.rank(), 28);
}

TEST(DifferencePenalty, RankAcrossSizes) {
  for (int k = 5; k <= 40; ++k) {
    for (int d = 0; d <= 2; ++d) {
      const Eigen::MatrixXd P = difference_penalty(k, d);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(P);
      const double top = eig.eigenvalues().maxCoeff();
      const auto rank = (eig.eigenvalues().array() > 1e-8 * top).count();
      EXPECT_EQ(rank, k - d) << "K=" << k << " d=" << d;
    }
  }
}

TEST(DifferencePenalty, RejectsUnsupportedOrder) {
  EXPECT_THROW(difference_penalty(10, 3), std::invalid_argument);
  EXPECT_THROW(difference_penalty(2, 2), std::invalid_argument);
}

TEST(PenaltyDecomposition, FirstOrderNullSpaceIsConstant) {
  for (int k : {5, 12, 30}) {
    const PenaltyDecomposition pen = decompose_penalty(difference_penalty(k, 1), 1);
    ASSERT_EQ(pen.q_null.cols(), 1);
    const Eigen::VectorXd c = Eigen::VectorXd::Constant(k, 1.0 / std::sqrt(k));
    EXPECT_LT((pen.q_null.col(0) - c).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(PenaltyDecomposition, SecondOrderNullSpaceHoldsRamp) {
  const int k = 30;
  const PenaltyDecomposition pen = decompose_penalty(difference_penalty(k, 2), 2);
  ASSERT_EQ(pen.q_null.cols(), 2);
  const Eigen::VectorXd ramp = Eigen::VectorXd::LinSpaced(k, 0.0, k - 1.0);
  const Eigen::VectorXd resid =
      ramp - pen.q_null * (pen.q_null.transpose() * ramp);
  EXPECT_LT(resid.norm(), 1e-10);
}

TEST(PenaltyDecomposition, ZeroOrderIsTrivial) {
  const PenaltyDecomposition pen = decompose_penalty(difference_penalty(30, 0), 0);
  EXPECT_EQ(pen.q_null.cols(), 0);
  EXPECT_LT((pen.q_pen.cwiseAbs() - Eigen::MatrixXd::Identity(30, 30))
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
  EXPECT_LT((pen.lambda.array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST(PenaltyDecomposition, ReconstructionAndOrthonormality) {
  for (int d = 0; d <= 2; ++d) {
    for (int k : {5, 20, 30, 40}) {
      const Eigen::MatrixXd P = difference_penalty(k, d);
      const PenaltyDecomposition pen = decompose_penalty(P, d);
      EXPECT_EQ(pen.q_pen.cols(), k - d);
      EXPECT_GT(pen.lambda.minCoeff(), 0.0);
      for (Eigen::Index i = 1; i < pen.lambda.size(); ++i) {
        EXPECT_GE(pen.lambda(i - 1), pen.lambda(i));
      }
      const Eigen::MatrixXd recon =
          pen.q_pen * pen.lambda.asDiagonal() * pen.q_pen.transpose();
      EXPECT_LT((recon - P).cwiseAbs().maxCoeff(), 1e-8);
      Eigen::MatrixXd Q(k, k);
      Q << pen.q_pen, pen.q_null;
      EXPECT_LT((Q.transpose() * Q - Eigen::MatrixXd::Identity(k, k))
                    .cwiseAbs()
                    .maxCoeff(),
                1e-10);
      // sign convention: largest-magnitude entry of each column positive
      for (Eigen::Index c = 0; c < Q.cols(); ++c) {
        Eigen::Index arg = 0;
        Q.col(c).cwiseAbs().maxCoeff(&arg);
        EXPECT_GT(Q(arg, c), 0.0);
      }
    }
  }
}

TEST(PenaltyDecomposition, RankMismatchThrows) {
  EXPECT_THROW(decompose_penalty(difference_penalty(10, 2), 1),
               std::runtime_error);
  EXPECT_THROW(decompose_penalty(difference_penalty(10, 1), 0),
               std::runtime_error);
}

TEST(PenaltyDecomposition, SecondOrderReproducesLinearFunctions) {
  const SplineBasis b = build_basis(0.0, 1.0, 30, 3);
  const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(200, 0.0, 1.0);
  const Eigen::MatrixXd BQ2 =
      evaluate_basis(b, grid) *
      decompose_penalty(difference_penalty(30, 2), 2).q_null;
  const Eigen::VectorXd target = (0.7 - 2.3 * grid.array()).matrix();
  const Eigen::VectorXd c = BQ2.colPivHouseholderQr().solve(target);
  EXPECT_LT((BQ2 * c - target).cwiseAbs().maxCoeff(), 1e-6);
}
