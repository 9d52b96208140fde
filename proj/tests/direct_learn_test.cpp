#include <gtest/gtest.h>

#include <random>

#include "eventfeat/direct_learn.hpp"
#include "eventfeat/error.hpp"
#include "oracles.hpp"

namespace eventfeat {
namespace {

DirectHyperparams raw_weights(double w2, double w4) {
  DirectHyperparams h;
  h.lambda1 = 1.0;
  h.lambda2 = w2;
  h.lambda3 = 0.0;
  h.lambda4 = w4;
  h.scale_by_samples = false;
  return h;
}

// 1/2 |A V - L|^2 + w2 |A|^2 - w4 log det(A A^T), straight from the definition.
double update_objective(const Eigen::MatrixXd& a, const Eigen::MatrixXd& v, const Eigen::MatrixXd& l,
                        double w2, double w4) {
  return 0.5 * (a * v - l).squaredNorm() + w2 * a.squaredNorm() -
         w4 * std::log((a * a.transpose()).determinant());
}

TEST(ThresholdCode, ProxDefinition) {
  Transform t{RowMatrix::Identity(2, 2)};
  const Eigen::VectorXd l = threshold_code(t, Eigen::Vector2d(1.5, -0.3), 1.0);
  EXPECT_DOUBLE_EQ(l[0], 0.5);
  EXPECT_DOUBLE_EQ(l[1], 0.0);
}

TEST(ThresholdCode, ZeroPenaltyIsProjection) {
  std::mt19937_64 rng(1);
  Transform t{oracle::gaussian(7, 4, rng)};
  const Eigen::VectorXd v = oracle::gaussian(4, 1, rng);
  EXPECT_LT((threshold_code(t, v, 0.0) - t.rows * v).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ThresholdCode, MatchesSeparableMinimization) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> lam(0.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    Transform t{oracle::gaussian(6, 5, rng)};
    const Eigen::VectorXd v = oracle::gaussian(5, 1, rng);
    const double lambda = lam(rng);
    const Eigen::VectorXd l = threshold_code(t, v, lambda);
    const Eigen::VectorXd z = t.rows * v;
    for (int k = 0; k < 6; ++k) {
      const double expected = oracle::separable_prox(z[k], lambda);
      ASSERT_FALSE(std::isnan(expected));
      EXPECT_NEAR(l[k], expected, 1e-12);
    }
  }
}

TEST(ThresholdCode, ElementsAreIndependentAndBatchAgrees) {
  std::mt19937_64 rng(3);
  Transform t{oracle::gaussian(9, 4, rng)};
  const Eigen::MatrixXd v = oracle::gaussian(4, 12, rng);
  const SparseCodes all = threshold_code_all(t, v, 0.4);
  for (int j = 0; j < 12; ++j) {
    const Eigen::VectorXd single = threshold_code(t, v.col(j), 0.4);
    for (int k = 0; k < 9; ++k) {
      EXPECT_EQ(single[k], threshold_code_element(t, v.col(j), k, 0.4));
      EXPECT_NEAR(all.codes(k, j), single[k], 1e-12);
    }
  }
}

TEST(ThresholdCode, DimensionMismatch) {
  Transform t{RowMatrix::Identity(3, 3)};
  try {
    threshold_code(t, Eigen::VectorXd::Zero(2), 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

TEST(UpdateTransform, SelfReconstructionLimitIsIdentity) {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd v = oracle::gaussian(4, 50, rng);
  const Transform a = update_transform(v, SparseCodes{v}, raw_weights(1e-12, 1e-12));
  EXPECT_LT((Eigen::MatrixXd(a.rows) - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(UpdateTransform, BeatsRandomPerturbations) {
  std::mt19937_64 rng(5);
  const int d = 5;
  const Eigen::MatrixXd v = oracle::gaussian(d, 40, rng);
  const Eigen::MatrixXd l = oracle::gaussian(d, 40, rng);
  const double w2 = 0.3, w4 = 0.7;
  const Eigen::MatrixXd a = update_transform(v, SparseCodes{l}, raw_weights(w2, w4)).rows;
  const double best = update_objective(a, v, l, w2, w4);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::MatrixXd probe = a + 1e-3 * oracle::gaussian(d, d, rng);
    EXPECT_LE(best, update_objective(probe, v, l, w2, w4));
  }
}

TEST(UpdateTransform, DiagonalTwoByTwoStationaryPoint) {
  std::mt19937_64 rng(6);
  const Eigen::MatrixXd q = oracle::random_orthonormal(40, rng).topRows(2);
  const Eigen::Vector2d s(9.0, 0.25);
  const Eigen::MatrixXd v = s.cwiseSqrt().asDiagonal() * q;  // V V^T = diag(s)
  const double w2 = 0.2, w4 = 0.15;
  const Eigen::MatrixXd a = update_transform(v, SparseCodes{v}, raw_weights(w2, w4)).rows;

  for (int i = 0; i < 2; ++i) {
    // d/da [1/2 s a^2 - s a + w2 a^2 - 2 w4 log a] = 0 on a > 0, by bisection.
    auto g = [&](double x) { return (s[i] + 2 * w2) * x - s[i] - 2 * w4 / x; };
    double lo = 1e-9, hi = 1e3;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (g(mid) > 0 ? hi : lo) = mid;
    }
    EXPECT_NEAR(a(i, i), 0.5 * (lo + hi), 1e-9);
  }
  EXPECT_NEAR(a(0, 1), 0.0, 1e-9);
  EXPECT_NEAR(a(1, 0), 0.0, 1e-9);
}

TEST(UpdateTransform, ObjectiveReportedForSquareBlocksIsTrueValue) {
  std::mt19937_64 rng(7);
  const Eigen::MatrixXd v = oracle::gaussian(3, 20, rng);
  const Eigen::MatrixXd l = oracle::gaussian(3, 20, rng);
  const DirectHyperparams h = raw_weights(0.4, 0.6);
  const Transform a{oracle::gaussian(3, 3, rng)};
  EXPECT_NEAR(transform_update_objective(a, v, SparseCodes{l}, h),
              update_objective(a.rows, v, l, 0.4, 0.6), 1e-9);
}

TEST(UpdateTransform, OvercompleteBlocksNeverIncreaseObjective) {
  std::mt19937_64 rng(8);
  const Eigen::MatrixXd v = oracle::gaussian(4, 60, rng);
  const DirectHyperparams h = raw_weights(0.5, 0.5);
  for (int trial = 0; trial < 10; ++trial) {
    const Transform start{oracle::gaussian(10, 4, rng)};
    const SparseCodes codes = threshold_code_all(start, v, 0.2);
    const double before = transform_update_objective(start, v, codes, h);
    const Transform next = update_transform(v, codes, h);
    EXPECT_LE(transform_update_objective(next, v, codes, h), before + 1e-10 * std::abs(before));
  }
  EXPECT_EQ(row_blocks(10, 4).size(), 3u);
  EXPECT_EQ(row_blocks(10, 4).back().second, 2);
}

TEST(UpdateTransform, SingularFactor) {
  const Eigen::MatrixXd v = Eigen::MatrixXd::Zero(3, 5);
  try {
    update_transform(v, SparseCodes{Eigen::MatrixXd::Zero(3, 5)}, raw_weights(0.0, 0.1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSingularFactor);
  }
}

TEST(TrainDirect, DeterministicTrace) {
  std::mt19937_64 rng(9);
  const Eigen::MatrixXd v = oracle::gaussian(6, 80, rng);
  DirectHyperparams h;
  h.num_basis = 6;
  h.num_iterations = 4;
  const DirectResult a = train_direct(v, h, 5);
  const DirectResult b = train_direct(v, h, 5);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    EXPECT_EQ(a.trace[i].objective, b.trace[i].objective);
  }
  EXPECT_EQ(a.transform.rows, b.transform.rows);
}

TEST(TrainDirect, ZeroIterationsIsInitPlusCoding) {
  std::mt19937_64 rng(10);
  const Eigen::MatrixXd v = oracle::gaussian(4, 20, rng);
  DirectHyperparams h;
  h.num_basis = 6;
  h.num_iterations = 0;
  const DirectResult r = train_direct(v, h, 1);
  ASSERT_EQ(r.trace.size(), 1u);
  EXPECT_LT((r.transform.rows.rowwise().norm().array() - 1.0).abs().maxCoeff(), 1e-12);
  EXPECT_EQ(r.codes.codes, threshold_code_all(r.transform, v, h.lambda0).codes);
}

TEST(TrainDirect, WhiteNoiseConditionAndDecrease) {
  std::mt19937_64 rng(11);
  const int d = 8;
  const Eigen::MatrixXd v = oracle::gaussian(d, 500, rng);
  DirectHyperparams h;
  h.num_basis = d;
  h.lambda0 = 0.01;
  h.num_iterations = 5;
  const DirectResult r = train_direct(v, h, 2);
  EXPECT_TRUE(std::isfinite(condition_number(r.transform)));
  std::vector<double> coding;
  for (const auto& e : r.trace) {
    if (e.step == TrainStep::kCoding) coding.push_back(e.objective);
    EXPECT_TRUE(std::isfinite(e.condition));
    if (e.step != TrainStep::kReseed) {
      EXPECT_LE(e.monitored_after, e.monitored_before + 1e-10 * std::max(1.0, std::abs(e.monitored_before)));
    }
  }
  ASSERT_EQ(coding.size(), 6u);
  for (std::size_t i = 1; i < coding.size(); ++i) EXPECT_LT(coding[i], coding[i - 1]);
}

TEST(CodeConsistency, IdentityIsExact) {
  std::mt19937_64 rng(12);
  EXPECT_EQ(code_consistency_check(Dictionary{Eigen::MatrixXd::Identity(5, 5)}, 0.3,
                                   oracle::gaussian(5, 50, rng)),
            0.0);
}

TEST(CodeConsistency, RotationAndRandomOrthonormal) {
  std::mt19937_64 rng(13);
  const double c = std::cos(M_PI / 6), s = std::sin(M_PI / 6);
  Eigen::Matrix2d rot;
  rot << c, -s, s, c;
  EXPECT_LT(code_consistency_check(Dictionary{rot}, 0.2, oracle::gaussian(2, 100, rng)), 1e-8);
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(oracle::gaussian(8, 8, rng))
                                .householderQ();
  EXPECT_LT(code_consistency_check(Dictionary{q}, 0.2, oracle::gaussian(8, 100, rng)), 1e-8);
}

TEST(OmegaTransform, SquareOrthonormalLeavesFrobenius) {
  std::mt19937_64 rng(14);
  const Transform t{oracle::random_orthonormal(4, rng)};
  DirectHyperparams h;
  h.lambda2 = 0.5;
  h.lambda3 = 0.3;
  h.lambda4 = 0.5;
  EXPECT_NEAR(omega_transform(t, h), 0.5 * 4.0, 1e-12);
}

}  // namespace
}  // namespace eventfeat
