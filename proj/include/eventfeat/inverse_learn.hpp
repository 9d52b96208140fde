#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

namespace eventfeat {

// d x K matrix of unit-norm atoms (columns).
struct Dictionary {
  Eigen::MatrixXd atoms;

  Eigen::Index dim() const { return atoms.rows(); }
  Eigen::Index size() const { return atoms.cols(); }
};

// K x N codes, one column per coded volume.
struct SparseCodes {
  Eigen::MatrixXd codes;

  std::vector<int> support_sizes() const;
  double l1_norm() const { return codes.cwiseAbs().sum(); }
};

struct InverseHyperparams {
  int num_basis = 1700;
  double lambda0 = 0.1;
  double lambda1 = 1.0;
  double lambda2 = 0.0;
  double lambda3 = 0.0;
  double lambda4 = 0.0;
  int num_iterations = 10;
  double lasso_tolerance = 1e-6;
  int lasso_max_sweeps = 1000;
  std::optional<int> target_sparsity;
  // Atoms whose |cosine| with an earlier atom exceeds this are reseeded.
  double coherence_limit = 0.99;
};

void validate(const InverseHyperparams& h);

// Cyclic coordinate descent for 1/2 |v - D l|^2 + lambda0 |l|_1. Optional
// warm start; atoms must be unit norm (kNotNormalized otherwise).
Eigen::VectorXd lasso_code(const Dictionary& dictionary, const Eigen::VectorXd& v,
                           const InverseHyperparams& h,
                           const Eigen::VectorXd* warm_start = nullptr);

// Batch coder sharing one Gram matrix across columns. Produces the same
// fixed point as lasso_code; per-column work is independent.
class LassoCoder {
 public:
  LassoCoder(const Dictionary& dictionary, const InverseHyperparams& h);

  Eigen::VectorXd code(const Eigen::VectorXd& v, const Eigen::VectorXd* warm_start = nullptr) const;
  SparseCodes code_all(const Eigen::MatrixXd& volumes, const SparseCodes* warm_start = nullptr) const;

 private:
  const Dictionary& dictionary_;
  InverseHyperparams h_;
  Eigen::MatrixXd gram_;
};

// Largest deviation from the LASSO subgradient conditions at l.
double lasso_kkt_violation(const Dictionary& dictionary, const Eigen::VectorXd& v,
                           const Eigen::VectorXd& l, double lambda0);

double lasso_objective(const Dictionary& dictionary, const Eigen::VectorXd& v,
                       const Eigen::VectorXd& l, double lambda0);

// One K-SVD pass over atoms in index order. Codes are updated in place.
// Unused atoms are reseeded to the worst-reconstructed data column.
Dictionary ksvd_update(const Dictionary& dictionary, const Eigen::MatrixXd& volumes,
                       SparseCodes& codes);

// lambda2 |D|_F^2 - lambda3 |D D^T - I|_F^2 - lambda4 log|det D D^T|.
// Throws kSingularGram when the log-det term is needed and D D^T is singular.
double omega_dictionary(const Dictionary& dictionary, const InverseHyperparams& h);

double reconstruction_error(const Dictionary& dictionary, const Eigen::MatrixXd& volumes,
                            const SparseCodes& codes);

enum class TrainStep { kCoding, kBasisUpdate, kReseed };

struct TraceEntry {
  int iteration = 0;
  TrainStep step = TrainStep::kCoding;
  double fidelity = 0.0;  // 1/2 |V - D L|_F^2 or 1/2 |A V - L|_F^2
  double sparsity = 0.0;  // m(L) = sum of column L1 norms
  double omega = 0.0;     // lambda1 * Omega, +inf when undefined
  double objective = 0.0;
  // The quantity the step minimizes, evaluated just before and after it.
  double monitored_before = 0.0;
  double monitored_after = 0.0;
  double condition = 0.0;  // direct formulation only
  int reseeded = 0;
};

struct InverseResult {
  Dictionary dictionary;
  SparseCodes codes;
  std::vector<TraceEntry> trace;
};

// Columns of `volumes` are whitened local volumes.
InverseResult train_inverse(const Eigen::MatrixXd& volumes, const InverseHyperparams& h,
                            std::uint64_t seed);

}  // namespace eventfeat
