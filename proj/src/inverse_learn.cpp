#include "eventfeat/inverse_learn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "eventfeat/error.hpp"

namespace eventfeat {

namespace {

constexpr double kNormTolerance = 1e-6;

double soft(double z, double lambda) {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

void require_normalized(const Dictionary& d) {
  for (Eigen::Index k = 0; k < d.size(); ++k) {
    if (std::abs(d.atoms.col(k).norm() - 1.0) > kNormTolerance) {
      throw Error(ErrorCode::kNotNormalized, "atom " + std::to_string(k) + " is not unit norm");
    }
  }
}

// Keeps the s largest magnitudes; ties go to the lower index.
void truncate_support(Eigen::VectorXd& l, int s) {
  if (s < 0 || s >= l.size()) return;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(l.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(l[a]) > std::abs(l[b]);
  });
  for (std::size_t i = static_cast<std::size_t>(s); i < order.size(); ++i) l[order[i]] = 0.0;
}

// Worst-reconstructed column not yet taken; -1 when every column is empty.
Eigen::Index worst_column(const Eigen::MatrixXd& residual, const Eigen::MatrixXd& volumes,
                          std::vector<bool>& taken) {
  const Eigen::VectorXd err = residual.colwise().squaredNorm().transpose();
  Eigen::Index best = -1;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    if (taken[static_cast<std::size_t>(i)] || volumes.col(i).squaredNorm() == 0.0) continue;
    if (best < 0 || err[i] > err[best]) best = i;
  }
  if (best >= 0) taken[static_cast<std::size_t>(best)] = true;
  return best;
}

double dictionary_objective_omega(const Dictionary& d, const InverseHyperparams& h) {
  if (h.lambda1 == 0.0) return 0.0;
  try {
    return h.lambda1 * omega_dictionary(d, h);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kSingularGram) return std::numeric_limits<double>::infinity();
    throw;
  }
}

}  // namespace

std::vector<int> SparseCodes::support_sizes() const {
  std::vector<int> out(static_cast<std::size_t>(codes.cols()));
  for (Eigen::Index j = 0; j < codes.cols(); ++j) {
    out[static_cast<std::size_t>(j)] = static_cast<int>((codes.col(j).array() != 0.0).count());
  }
  return out;
}

void validate(const InverseHyperparams& h) {
  if (h.num_basis < 1) throw Error(ErrorCode::kInvalidArgument, "num_basis must be >= 1");
  if (!(h.lambda0 > 0.0)) throw Error(ErrorCode::kInvalidArgument, "lambda0 must be positive");
  if (h.lambda1 < 0 || h.lambda2 < 0 || h.lambda3 < 0 || h.lambda4 < 0) {
    throw Error(ErrorCode::kInvalidArgument, "Omega weights must be non-negative");
  }
  if (h.num_iterations < 0) throw Error(ErrorCode::kInvalidArgument, "num_iterations < 0");
  if (!(h.lasso_tolerance > 0.0) || h.lasso_max_sweeps < 1) {
    throw Error(ErrorCode::kInvalidArgument, "bad LASSO stopping rule");
  }
  if (h.target_sparsity && *h.target_sparsity < 1) {
    throw Error(ErrorCode::kInvalidArgument, "target_sparsity must be >= 1");
  }
}

namespace {

// Subgradient residual given c = D^T (v - D l).
double kkt_residual(const Eigen::VectorXd& c, const Eigen::VectorXd& l, double lambda0) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < l.size(); ++k) {
    const double dev = l[k] != 0.0 ? std::abs(c[k] - lambda0 * (l[k] > 0 ? 1.0 : -1.0))
                                   : std::max(0.0, std::abs(c[k]) - lambda0);
    worst = std::max(worst, dev);
  }
  return worst;
}

struct SupportStep {
  Eigen::VectorXd delta;
  bool shrinks_support = false;
};

// Minimises the objective restricted to the current support and sign
// pattern, cut short where the first coordinate would reach zero. A
// singular support Gram first moves along a null direction that lowers the
// l1 term until an atom drops out. Neither move raises the objective.
SupportStep support_step(const Eigen::MatrixXd& gram_ss, const std::vector<Eigen::Index>& support,
                         const Eigen::VectorXd& c, const Eigen::VectorXd& l, double lambda0) {
  const auto S = static_cast<Eigen::Index>(support.size());
  Eigen::VectorXd l_s(S), sign_s(S), rhs(S);
  for (Eigen::Index i = 0; i < S; ++i) {
    const Eigen::Index k = support[static_cast<std::size_t>(i)];
    l_s[i] = l[k];
    sign_s[i] = l[k] > 0 ? 1.0 : -1.0;
    rhs[i] = c[k] - lambda0 * sign_s[i];
  }
  SupportStep out{Eigen::VectorXd::Zero(l.size()), false};
  Eigen::VectorXd direction;
  double t = 1.0;
  const Eigen::LLT<Eigen::MatrixXd> llt(gram_ss);
  const double pivot_floor = 1e-6 * std::sqrt(gram_ss.diagonal().maxCoeff());
  if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().minCoeff() > pivot_floor) {
    direction = llt.solve(rhs);
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram_ss);
    const Eigen::VectorXd& ev = eig.eigenvalues();
    if (ev[0] <= 1e-12 * std::max(1.0, ev[S - 1])) {
      direction = eig.eigenvectors().col(0);
      if (sign_s.dot(direction) > 0) direction = -direction;
      t = std::numeric_limits<double>::infinity();
      out.shrinks_support = true;
    } else {
      direction = eig.eigenvectors() * (eig.eigenvectors().transpose() * rhs).cwiseQuotient(ev);
    }
  }
  Eigen::Index blocking = -1;
  for (Eigen::Index i = 0; i < S; ++i) {
    if (direction[i] * l_s[i] < 0) {
      const double ti = -l_s[i] / direction[i];
      if (ti <= t) {
        t = ti;
        blocking = i;
      }
    }
  }
  if (!std::isfinite(t) || !direction.allFinite()) return {Eigen::VectorXd::Zero(l.size()), false};
  for (Eigen::Index i = 0; i < S; ++i) {
    const Eigen::Index k = support[static_cast<std::size_t>(i)];
    out.delta[k] = i == blocking ? -l_s[i] : t * direction[i];
  }
  return out;
}

std::vector<Eigen::Index> support_of(const Eigen::VectorXd& l) {
  std::vector<Eigen::Index> support;
  for (Eigen::Index k = 0; k < l.size(); ++k) {
    if (l[k] != 0.0) support.push_back(k);
  }
  return support;
}

// Coordinate steps crawl on strongly correlated atoms; refine on the
// support when they stall, or every this many sweeps when cheap.
constexpr int kRefineEvery = 32;

// A support wider than the atom length is singular and shrinks one atom per
// eigendecomposition, which only pays off for small supports.
bool cheap_to_refine(std::size_t support_size, Eigen::Index dim) {
  return support_size <= static_cast<std::size_t>(dim) || support_size <= 64;
}

}  // namespace

Eigen::VectorXd lasso_code(const Dictionary& dictionary, const Eigen::VectorXd& v,
                           const InverseHyperparams& h, const Eigen::VectorXd* warm_start) {
  if (v.size() != dictionary.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "input length differs from atom length");
  }
  require_normalized(dictionary);
  const auto& D = dictionary.atoms;
  const Eigen::Index K = D.cols();
  Eigen::VectorXd l = warm_start ? *warm_start : Eigen::VectorXd::Zero(K);
  if (l.size() != K) throw Error(ErrorCode::kDimensionMismatch, "warm start length");
  const Eigen::VectorXd norms = D.colwise().squaredNorm().transpose();
  Eigen::VectorXd r = v - D * l;

  for (int sweep = 0; sweep < h.lasso_max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) {
      const double rho = D.col(k).dot(r) + norms[k] * l[k];
      const double next = soft(rho, h.lambda0) / norms[k];
      const double delta = next - l[k];
      if (delta != 0.0) {
        r.noalias() -= delta * D.col(k);
        l[k] = next;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    const bool stalled = max_change < h.lasso_tolerance;
    if (!stalled && (sweep + 1) % kRefineEvery != 0) continue;
    const Eigen::VectorXd c = D.transpose() * r;
    if (kkt_residual(c, l, h.lambda0) <= h.lasso_tolerance) {
      if (stalled) break;
      continue;
    }
    if (!stalled && !cheap_to_refine(support_of(l).size(), D.rows())) continue;
    Eigen::VectorXd c_now = c;
    for (Eigen::Index pass = 0; pass < K; ++pass) {
      const auto support = support_of(l);
      if (support.empty()) break;
      const Eigen::MatrixXd Ds = D(Eigen::all, support);
      const SupportStep step = support_step(Ds.transpose() * Ds, support, c_now, l, h.lambda0);
      l += step.delta;
      r.noalias() -= D * step.delta;
      c_now.noalias() = D.transpose() * r;
      if (!step.shrinks_support) break;
    }
  }
  if (h.target_sparsity) truncate_support(l, *h.target_sparsity);
  return l;
}

LassoCoder::LassoCoder(const Dictionary& dictionary, const InverseHyperparams& h)
    : dictionary_(dictionary), h_(h) {
  require_normalized(dictionary);
  gram_ = dictionary.atoms.transpose() * dictionary.atoms;
}

Eigen::VectorXd LassoCoder::code(const Eigen::VectorXd& v, const Eigen::VectorXd* warm_start) const {
  if (v.size() != dictionary_.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "input length differs from atom length");
  }
  const Eigen::Index K = gram_.rows();
  Eigen::VectorXd l = warm_start ? *warm_start : Eigen::VectorXd::Zero(K);
  if (l.size() != K) throw Error(ErrorCode::kDimensionMismatch, "warm start length");
  // c = D^T (v - D l), kept current through rank-one Gram updates.
  Eigen::VectorXd c = dictionary_.atoms.transpose() * v;
  if (warm_start) c.noalias() -= gram_ * l;

  for (int sweep = 0; sweep < h_.lasso_max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) {
      const double g = gram_(k, k);
      const double next = soft(c[k] + g * l[k], h_.lambda0) / g;
      const double delta = next - l[k];
      if (delta != 0.0) {
        c.noalias() -= delta * gram_.col(k);
        l[k] = next;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    const bool stalled = max_change < h_.lasso_tolerance;
    if (!stalled && (sweep + 1) % kRefineEvery != 0) continue;
    if (kkt_residual(c, l, h_.lambda0) <= h_.lasso_tolerance) {
      if (stalled) break;
      continue;
    }
    if (!stalled && !cheap_to_refine(support_of(l).size(), dictionary_.dim())) continue;
    for (Eigen::Index pass = 0; pass < K; ++pass) {
      const auto support = support_of(l);
      if (support.empty()) break;
      const SupportStep step = support_step(gram_(support, support), support, c, l, h_.lambda0);
      l += step.delta;
      c.noalias() -= gram_ * step.delta;
      if (!step.shrinks_support) break;
    }
  }
  if (h_.target_sparsity) truncate_support(l, *h_.target_sparsity);
  return l;
}

SparseCodes LassoCoder::code_all(const Eigen::MatrixXd& volumes, const SparseCodes* warm_start) const {
  if (warm_start && (warm_start->codes.rows() != gram_.rows() ||
                     warm_start->codes.cols() != volumes.cols())) {
    throw Error(ErrorCode::kDimensionMismatch, "warm-start codes have the wrong shape");
  }
  SparseCodes out;
  out.codes.resize(gram_.rows(), volumes.cols());
  for (Eigen::Index j = 0; j < volumes.cols(); ++j) {
    if (warm_start) {
      const Eigen::VectorXd init = warm_start->codes.col(j);
      out.codes.col(j) = code(volumes.col(j), &init);
    } else {
      out.codes.col(j) = code(volumes.col(j));
    }
  }
  return out;
}

double lasso_kkt_violation(const Dictionary& dictionary, const Eigen::VectorXd& v,
                           const Eigen::VectorXd& l, double lambda0) {
  return kkt_residual(dictionary.atoms.transpose() * (v - dictionary.atoms * l), l, lambda0);
}

double lasso_objective(const Dictionary& dictionary, const Eigen::VectorXd& v,
                       const Eigen::VectorXd& l, double lambda0) {
  return 0.5 * (v - dictionary.atoms * l).squaredNorm() + lambda0 * l.lpNorm<1>();
}

Dictionary ksvd_update(const Dictionary& dictionary, const Eigen::MatrixXd& volumes,
                       SparseCodes& codes) {
  const Eigen::Index d = dictionary.dim();
  const Eigen::Index K = dictionary.size();
  const Eigen::Index N = volumes.cols();
  if (volumes.rows() != d || codes.codes.rows() != K || codes.codes.cols() != N) {
    throw Error(ErrorCode::kDimensionMismatch, "dictionary, volumes and codes disagree in shape");
  }
  constexpr int kMaxPowerIterations = 30;
  constexpr double kPowerTolerance = 1e-10;

  Dictionary out = dictionary;
  Eigen::MatrixXd& D = out.atoms;
  Eigen::MatrixXd& L = codes.codes;
  Eigen::MatrixXd residual = volumes - D * L;
  std::vector<bool> taken(static_cast<std::size_t>(N), false);

  std::vector<Eigen::Index> support;
  for (Eigen::Index k = 0; k < K; ++k) {
    support.clear();
    for (Eigen::Index i = 0; i < N; ++i) {
      if (L(k, i) != 0.0) support.push_back(i);
    }
    if (support.empty()) {
      const Eigen::Index worst = worst_column(residual, volumes, taken);
      if (worst >= 0) D.col(k) = volumes.col(worst).normalized();
      continue;
    }

    // Residual with atom k's contribution restored, restricted to its users.
    Eigen::MatrixXd e = residual(Eigen::all, support);
    Eigen::RowVectorXd x = L(k, support);
    e.noalias() += D.col(k) * x;

    // Alternating exact minimization over (atom, row): a power iteration on
    // e e^T warm-started at the current pair, so every step is a descent step.
    Eigen::VectorXd atom = D.col(k);
    for (int it = 0; it < kMaxPowerIterations; ++it) {
      Eigen::VectorXd u = e * x.transpose();
      const double norm = u.norm();
      if (norm == 0.0) {
        x = atom.transpose() * e;
        break;
      }
      u /= norm;
      const double change = (u - atom).norm();
      atom = u;
      x = atom.transpose() * e;
      if (change < kPowerTolerance) break;
    }
    D.col(k) = atom;
    L(k, support) = x;
    residual(Eigen::all, support) = e - atom * x;
  }

  for (Eigen::Index k = 0; k < K; ++k) {
    const double norm = D.col(k).norm();
    if (norm > 0.0 && norm != 1.0) {
      D.col(k) /= norm;
      L.row(k) *= norm;
    }
  }
  return out;
}

double omega_dictionary(const Dictionary& dictionary, const InverseHyperparams& h) {
  const Eigen::MatrixXd& D = dictionary.atoms;
  double value = 0.0;
  if (h.lambda2 != 0.0) value += h.lambda2 * D.squaredNorm();
  if (h.lambda3 == 0.0 && h.lambda4 == 0.0) return value;
  const Eigen::MatrixXd gram = D * D.transpose();
  if (h.lambda3 != 0.0) {
    value -= h.lambda3 * (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).squaredNorm();
  }
  if (h.lambda4 != 0.0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd& ev = eig.eigenvalues();
    if (ev.size() == 0 || ev.minCoeff() <= 1e-12 * std::max(1.0, ev.maxCoeff())) {
      throw Error(ErrorCode::kSingularGram, "D D^T is singular; log-det undefined");
    }
    value -= h.lambda4 * ev.array().log().sum();
  }
  return value;
}

double reconstruction_error(const Dictionary& dictionary, const Eigen::MatrixXd& volumes,
                            const SparseCodes& codes) {
  return 0.5 * (volumes - dictionary.atoms * codes.codes).squaredNorm();
}

namespace {

// Reseeds atoms nearly parallel to an earlier atom; returns how many moved.
int reseed_coherent_atoms(Dictionary& dictionary, const Eigen::MatrixXd& volumes,
                          SparseCodes& codes, double limit) {
  Eigen::MatrixXd& D = dictionary.atoms;
  Eigen::MatrixXd& L = codes.codes;
  Eigen::MatrixXd gram = D.transpose() * D;
  Eigen::MatrixXd residual;
  std::vector<bool> taken(static_cast<std::size_t>(volumes.cols()), false);
  int moved = 0;
  for (Eigen::Index j = 1; j < D.cols(); ++j) {
    bool coherent = false;
    for (Eigen::Index k = 0; k < j && !coherent; ++k) coherent = std::abs(gram(k, j)) > limit;
    if (!coherent) continue;
    if (residual.size() == 0) residual = volumes - D * L;
    residual.noalias() += D.col(j) * L.row(j);
    L.row(j).setZero();
    const Eigen::Index worst = worst_column(residual, volumes, taken);
    if (worst < 0) continue;
    D.col(j) = volumes.col(worst).normalized();
    gram.col(j) = D.transpose() * D.col(j);
    gram.row(j) = gram.col(j).transpose();
    ++moved;
  }
  return moved;
}

TraceEntry make_entry(int iteration, TrainStep step, const Dictionary& d,
                      const Eigen::MatrixXd& volumes, const SparseCodes& codes,
                      const InverseHyperparams& h) {
  TraceEntry e;
  e.iteration = iteration;
  e.step = step;
  e.fidelity = reconstruction_error(d, volumes, codes);
  e.sparsity = codes.l1_norm();
  e.omega = dictionary_objective_omega(d, h);
  e.objective = e.fidelity + h.lambda0 * e.sparsity + e.omega;
  return e;
}

}  // namespace

InverseResult train_inverse(const Eigen::MatrixXd& volumes, const InverseHyperparams& h,
                            std::uint64_t seed) {
  validate(h);
  const Eigen::Index N = volumes.cols();
  const Eigen::Index K = h.num_basis;
  if (volumes.rows() == 0 || N < K) {
    throw Error(ErrorCode::kInsufficientData,
                "need at least K = " + std::to_string(K) + " volumes, got " + std::to_string(N));
  }

  std::mt19937_64 rng(seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(N));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), rng);

  InverseResult result;
  result.dictionary.atoms.resize(volumes.rows(), K);
  Eigen::Index filled = 0;
  for (Eigen::Index idx : order) {
    if (filled == K) break;
    const double norm = volumes.col(idx).norm();
    if (norm == 0.0) continue;
    result.dictionary.atoms.col(filled++) = volumes.col(idx) / norm;
  }
  if (filled < K) throw Error(ErrorCode::kInsufficientData, "too few nonzero volumes");

  Dictionary& D = result.dictionary;
  SparseCodes& L = result.codes;
  L = LassoCoder(D, h).code_all(volumes);
  {
    TraceEntry e = make_entry(0, TrainStep::kCoding, D, volumes, L, h);
    e.monitored_before = 0.5 * volumes.squaredNorm();
    e.monitored_after = e.fidelity + h.lambda0 * e.sparsity;
    result.trace.push_back(e);
  }

  for (int it = 1; it <= h.num_iterations; ++it) {
    const double fidelity_before = reconstruction_error(D, volumes, L);
    D = ksvd_update(D, volumes, L);
    TraceEntry update = make_entry(it, TrainStep::kBasisUpdate, D, volumes, L, h);
    update.monitored_before = fidelity_before;
    update.monitored_after = update.fidelity;
    result.trace.push_back(update);

    const int moved = reseed_coherent_atoms(D, volumes, L, h.coherence_limit);
    if (moved > 0) {
      TraceEntry reseed = make_entry(it, TrainStep::kReseed, D, volumes, L, h);
      reseed.monitored_before = update.fidelity;
      reseed.monitored_after = reseed.fidelity;
      reseed.reseeded = moved;
      result.trace.push_back(reseed);
    }

    const double coding_before = reconstruction_error(D, volumes, L) + h.lambda0 * L.l1_norm();
    const SparseCodes previous = L;
    L = LassoCoder(D, h).code_all(volumes, &previous);
    TraceEntry coding = make_entry(it, TrainStep::kCoding, D, volumes, L, h);
    coding.monitored_before = coding_before;
    coding.monitored_after = coding.fidelity + h.lambda0 * coding.sparsity;
    result.trace.push_back(coding);
  }
  return result;
}

}  // namespace eventfeat
