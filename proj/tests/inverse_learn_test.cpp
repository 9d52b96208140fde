#include <gtest/gtest.h>

#include <random>

#include "eventfeat/error.hpp"
#include "eventfeat/inverse_learn.hpp"
#include "oracles.hpp"

namespace eventfeat {
namespace {

Dictionary unit_columns(Eigen::MatrixXd m) {
  m.colwise().normalize();
  return Dictionary{m};
}

InverseHyperparams lasso_params(double lambda0, double tol = 1e-10) {
  InverseHyperparams h;
  h.lambda0 = lambda0;
  h.lasso_tolerance = tol;
  h.lasso_max_sweeps = 100000;
  return h;
}

TEST(LassoCode, IdentityIsSoftThreshold) {
  const Dictionary d{Eigen::MatrixXd::Identity(2, 2)};
  const Eigen::VectorXd l = lasso_code(d, Eigen::Vector2d(1.5, -0.2), lasso_params(1.0));
  EXPECT_DOUBLE_EQ(l[0], 0.5);
  EXPECT_DOUBLE_EQ(l[1], 0.0);
}

TEST(LassoCode, LargePenaltyGivesZero) {
  std::mt19937_64 rng(1);
  const Dictionary d = unit_columns(oracle::gaussian(5, 7, rng));
  const Eigen::VectorXd v = oracle::gaussian(5, 1, rng);
  const double lambda = (d.atoms.transpose() * v).cwiseAbs().maxCoeff();
  EXPECT_TRUE(lasso_code(d, v, lasso_params(lambda)).isZero(0.0));
}

TEST(LassoCode, MatchesSupportEnumeration) {
  std::mt19937_64 rng(2);
  int checked = 0;
  for (int trial = 0; trial < 200 && checked < 20; ++trial) {
    const Dictionary d = unit_columns(oracle::gaussian(6, 9, rng));
    const Eigen::VectorXd v = oracle::gaussian(6, 1, rng);
    const double lambda = 0.6 * (d.atoms.transpose() * v).cwiseAbs().maxCoeff();
    Eigen::VectorXd best;
    const double expected = oracle::lasso_support_enumeration(d.atoms, v, lambda, 3, &best);
    const Eigen::VectorXd l = lasso_code(d, v, lasso_params(lambda, 1e-12));
    int support = 0;
    for (int k = 0; k < 9; ++k) support += l[k] != 0.0;
    if (support > 3) continue;  // the oracle only covers small supports
    ++checked;
    EXPECT_NEAR(lasso_objective(d, v, l, lambda), expected, 1e-8);
  }
  EXPECT_GE(checked, 20);
}

TEST(LassoCode, SatisfiesSubgradientConditions) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Dictionary d = unit_columns(oracle::gaussian(8, 12, rng));
    const Eigen::VectorXd v = oracle::gaussian(8, 1, rng);
    InverseHyperparams h;
    h.lambda0 = 0.2;
    const Eigen::VectorXd l = lasso_code(d, v, h);
    const Eigen::VectorXd corr = d.atoms.transpose() * (v - d.atoms * l);
    for (int k = 0; k < 12; ++k) {
      if (l[k] != 0.0) {
        EXPECT_LT(std::abs(corr[k] - h.lambda0 * (l[k] > 0 ? 1.0 : -1.0)), 10 * h.lasso_tolerance);
      } else {
        EXPECT_LE(std::abs(corr[k]), h.lambda0 + 10 * h.lasso_tolerance);
      }
    }
    EXPECT_LT(lasso_kkt_violation(d, v, l, h.lambda0), 10 * h.lasso_tolerance);
  }
}

TEST(LassoCode, RejectsUnnormalizedAtoms) {
  const Dictionary d{2.0 * Eigen::MatrixXd::Identity(2, 2)};
  try {
    lasso_code(d, Eigen::Vector2d(1, 1), InverseHyperparams{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotNormalized);
  }
}

TEST(LassoCode, TargetSparsityKeepsLargest) {
  const Dictionary d{Eigen::MatrixXd::Identity(4, 4)};
  InverseHyperparams h = lasso_params(0.1);
  h.target_sparsity = 2;
  const Eigen::VectorXd l = lasso_code(d, Eigen::Vector4d(1.0, -3.0, 0.5, 2.0), h);
  EXPECT_LT((l - Eigen::Vector4d(0.0, -2.9, 0.0, 1.9)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(LassoCoder, BatchAgreesWithSingle) {
  std::mt19937_64 rng(4);
  const Dictionary d = unit_columns(oracle::gaussian(6, 10, rng));
  const Eigen::MatrixXd v = oracle::gaussian(6, 15, rng);
  const InverseHyperparams h = lasso_params(0.3, 1e-12);
  const SparseCodes batch = LassoCoder(d, h).code_all(v);
  for (int j = 0; j < 15; ++j) {
    const Eigen::VectorXd single = lasso_code(d, v.col(j), h);
    EXPECT_LT((single - batch.codes.col(j)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(LassoCoder, WarmStartNeverIncreasesObjective) {
  std::mt19937_64 rng(5);
  const Dictionary d = unit_columns(oracle::gaussian(6, 10, rng));
  const Eigen::MatrixXd v = oracle::gaussian(6, 20, rng);
  InverseHyperparams h;
  h.lambda0 = 0.3;
  h.lasso_max_sweeps = 1;
  const SparseCodes start{oracle::gaussian(10, 20, rng)};
  const SparseCodes out = LassoCoder(d, h).code_all(v, &start);
  for (int j = 0; j < 20; ++j) {
    EXPECT_LE(lasso_objective(d, v.col(j), out.codes.col(j), h.lambda0),
              lasso_objective(d, v.col(j), start.codes.col(j), h.lambda0) + 1e-12);
  }
}

TEST(KsvdUpdate, RankOneDataRecoversDirection) {
  std::mt19937_64 rng(6);
  const Eigen::VectorXd u = oracle::gaussian(5, 1, rng);
  const Eigen::VectorXd w = oracle::gaussian(30, 1, rng);
  const Eigen::MatrixXd v = u * w.transpose();
  const Dictionary d = unit_columns(oracle::gaussian(5, 1, rng));
  SparseCodes codes{Eigen::MatrixXd::Ones(1, 30)};
  const Dictionary out = ksvd_update(d, v, codes);

  // Power iteration on V V^T from a fixed start.
  Eigen::VectorXd p = Eigen::VectorXd::Ones(5);
  for (int i = 0; i < 50; ++i) p = (v * (v.transpose() * p)).normalized();
  const double alignment = std::abs(out.atoms.col(0).dot(p));
  EXPECT_NEAR(alignment, 1.0, 1e-12);
  EXPECT_NEAR(std::abs(out.atoms.col(0).dot(u.normalized())), 1.0, 1e-12);
  EXPECT_LT(reconstruction_error(out, v, codes), 1e-20 * v.squaredNorm() + 1e-20);
}

TEST(KsvdUpdate, UnusedAtomTakesWorstColumn) {
  Eigen::MatrixXd v(2, 3);
  v << 1, 0, 0.1,
       0, 3, 0.1;
  const Dictionary d{Eigen::MatrixXd::Identity(2, 2)};
  SparseCodes codes{Eigen::MatrixXd::Zero(2, 3)};
  codes.codes(0, 0) = 1.0;
  codes.codes(0, 2) = 0.1;
  const Dictionary out = ksvd_update(d, v, codes);
  EXPECT_NEAR(std::abs(out.atoms(1, 1)), 1.0, 1e-15);
  EXPECT_NEAR(out.atoms(0, 1), 0.0, 1e-15);
}

TEST(KsvdUpdate, NeverIncreasesReconstructionError) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Dictionary d = unit_columns(oracle::gaussian(6, 9, rng));
    const Eigen::MatrixXd v = oracle::gaussian(6, 40, rng);
    SparseCodes codes = LassoCoder(d, lasso_params(0.3)).code_all(v);
    const double before = reconstruction_error(d, v, codes);
    const Dictionary out = ksvd_update(d, v, codes);
    EXPECT_LE(reconstruction_error(out, v, codes), before + 1e-10 * std::max(1.0, before));
    EXPECT_LT((out.atoms.colwise().norm().array() - 1.0).abs().maxCoeff(), 1e-12);
  }
}

TEST(KsvdUpdate, DimensionMismatch) {
  const Dictionary d{Eigen::MatrixXd::Identity(2, 2)};
  SparseCodes codes{Eigen::MatrixXd::Zero(3, 4)};
  EXPECT_THROW(ksvd_update(d, Eigen::MatrixXd::Zero(2, 4), codes), Error);
}

TEST(OmegaDictionary, OrthonormalRowsLeaveFrobeniusTerm) {
  std::mt19937_64 rng(8);
  const Eigen::MatrixXd q = oracle::random_orthonormal(5, rng);
  const Dictionary d{q.topRows(3)};
  InverseHyperparams h;
  h.lambda2 = 0.7;
  h.lambda3 = 0.4;
  h.lambda4 = 0.9;
  EXPECT_NEAR(omega_dictionary(d, h), 0.7 * d.atoms.squaredNorm(), 1e-12);
}

TEST(OmegaDictionary, ZeroWeightsGiveZero) {
  std::mt19937_64 rng(9);
  InverseHyperparams h;
  EXPECT_EQ(omega_dictionary(unit_columns(oracle::gaussian(3, 5, rng)), h), 0.0);
}

TEST(OmegaDictionary, MatchesCofactorDeterminant) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const Dictionary d{oracle::gaussian(3, 5, rng)};
    InverseHyperparams h;
    h.lambda2 = 0.3;
    h.lambda3 = 0.2;
    h.lambda4 = 0.5;
    const Eigen::MatrixXd g = d.atoms * d.atoms.transpose();
    double frob = 0, dev = 0;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 5; ++j) frob += d.atoms(i, j) * d.atoms(i, j);
      for (int j = 0; j < 3; ++j) dev += std::pow(g(i, j) - (i == j), 2);
    }
    const double expected = 0.3 * frob - 0.2 * dev - 0.5 * std::log(oracle::cofactor_det(g));
    EXPECT_NEAR(omega_dictionary(d, h), expected, 1e-10 * std::max(1.0, std::abs(expected)));
  }
}

TEST(OmegaDictionary, SingularGram) {
  const Dictionary d{Eigen::MatrixXd::Identity(3, 2)};
  InverseHyperparams h;
  h.lambda4 = 1.0;
  try {
    omega_dictionary(d, h);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSingularGram);
  }
}

TEST(TrainInverse, PlantedOneSparseModelIsRecovered) {
  std::mt19937_64 rng(11);
  const int d = 8, n = 400;
  const Eigen::MatrixXd q = oracle::random_orthonormal(d, rng);
  Eigen::MatrixXd v(d, n);
  std::uniform_real_distribution<double> amp(1.0, 3.0);
  for (int i = 0; i < n; ++i) v.col(i) = q.col(i % d) * amp(rng) * (rng() % 2 ? 1 : -1);

  InverseHyperparams h;
  h.num_basis = d;
  h.lambda0 = 1e-9;
  h.num_iterations = 10;
  const InverseResult r = train_inverse(v, h, 3);
  EXPECT_LT(reconstruction_error(r.dictionary, v, r.codes), 1e-6);
}

TEST(TrainInverse, ZeroIterationsIsInitPlusCoding) {
  std::mt19937_64 rng(12);
  const Eigen::MatrixXd v = oracle::gaussian(4, 30, rng);
  InverseHyperparams h;
  h.num_basis = 5;
  h.num_iterations = 0;
  const InverseResult r = train_inverse(v, h, 1);
  ASSERT_EQ(r.trace.size(), 1u);
  EXPECT_EQ(r.trace[0].step, TrainStep::kCoding);
  // Every atom is a normalized data column.
  for (int k = 0; k < 5; ++k) {
    bool found = false;
    for (int j = 0; j < 30 && !found; ++j) {
      found = (r.dictionary.atoms.col(k) - v.col(j).normalized()).norm() < 1e-15;
    }
    EXPECT_TRUE(found);
  }
  const SparseCodes again = LassoCoder(r.dictionary, h).code_all(v);
  EXPECT_EQ(again.codes, r.codes.codes);
}

TEST(TrainInverse, DeterministicTrace) {
  std::mt19937_64 rng(13);
  const Eigen::MatrixXd v = oracle::gaussian(6, 60, rng);
  InverseHyperparams h;
  h.num_basis = 8;
  h.num_iterations = 3;
  const InverseResult a = train_inverse(v, h, 9);
  const InverseResult b = train_inverse(v, h, 9);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    EXPECT_EQ(a.trace[i].objective, b.trace[i].objective);
    EXPECT_EQ(a.trace[i].monitored_after, b.trace[i].monitored_after);
  }
  EXPECT_EQ(a.dictionary.atoms, b.dictionary.atoms);
}

TEST(TrainInverse, MonitoredStepsDescend) {
  std::mt19937_64 rng(14);
  const Eigen::MatrixXd v = oracle::gaussian(8, 200, rng);
  InverseHyperparams h;
  h.num_basis = 12;
  h.num_iterations = 6;
  for (const auto& e : train_inverse(v, h, 2).trace) {
    if (e.step == TrainStep::kReseed) continue;
    EXPECT_LE(e.monitored_after, e.monitored_before + 1e-10 * std::max(1.0, e.monitored_before));
  }
}

TEST(TrainInverse, TooFewVolumes) {
  InverseHyperparams h;
  h.num_basis = 10;
  EXPECT_THROW(train_inverse(Eigen::MatrixXd::Ones(3, 5), h, 1), Error);
}

}  // namespace
}  // namespace eventfeat
