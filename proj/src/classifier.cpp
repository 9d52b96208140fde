#include "eventfeat/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <string>

#include "eventfeat/error.hpp"

namespace eventfeat {

namespace {

struct Augmented {
  Eigen::VectorXd w;
  double b = 0.0;
};

// Margins m_i = 1 - y_i (x_i^T w + b).
Eigen::VectorXd margins(const Augmented& p, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  Eigen::VectorXd s = x * p.w;
  s.array() += p.b;
  return (1.0 - y.array() * s.array()).matrix();
}

double objective_from_margins(const Augmented& p, const Eigen::VectorXd& m, double c) {
  return 0.5 * p.w.squaredNorm() + c * m.cwiseMax(0.0).squaredNorm();
}

// Generalized Hessian of the squared hinge at the active set, applied to (vw, vb).
void hessian_product(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& active, double c,
                     const Eigen::VectorXd& vw, double vb, Eigen::VectorXd& out_w, double& out_b) {
  out_w = vw;
  out_b = 0.0;
  if (active.empty()) return;
  const Eigen::MatrixXd xa = x(active, Eigen::all);
  Eigen::VectorXd t = xa * vw;
  t.array() += vb;
  out_w.noalias() += 2.0 * c * (xa.transpose() * t);
  out_b = 2.0 * c * t.sum();
}

}  // namespace

double squared_hinge_objective(const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& x,
                               const Eigen::VectorXd& y, double c) {
  const Augmented p{w, b};
  return objective_from_margins(p, margins(p, x, y), c);
}

BinarySvm train_binary_svm(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double c,
                           const SvmOptions& options) {
  if (x.rows() != y.size()) throw Error(ErrorCode::kDimensionMismatch, "labels vs examples");
  if (!(c > 0.0)) throw Error(ErrorCode::kInvalidArgument, "reg_c must be positive");
  const Eigen::Index dim = x.cols();
  Augmented p{Eigen::VectorXd::Zero(dim), 0.0};
  Eigen::VectorXd m = margins(p, x, y);
  double f = objective_from_margins(p, m, c);

  BinarySvm out;
  std::vector<Eigen::Index> active;
  for (int it = 0; it < options.max_iterations; ++it) {
    active.clear();
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(x.rows());
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      if (m[i] > 0.0) {
        active.push_back(i);
        coef[i] = -2.0 * c * y[i] * m[i];
      }
    }
    const Eigen::VectorXd gw = p.w + x.transpose() * coef;
    const double gb = coef.sum();
    const double gnorm = std::sqrt(gw.squaredNorm() + gb * gb);
    out.gradient_norm = gnorm;
    out.iterations = it;
    if (gnorm < options.gradient_tolerance) break;

    // Newton direction from conjugate gradients on the generalized Hessian;
    // falls back to steepest descent if CG makes no progress.
    Eigen::VectorXd dw = Eigen::VectorXd::Zero(dim);
    double db = 0.0;
    Eigen::VectorXd rw = -gw;
    double rb = -gb;
    Eigen::VectorXd sw = rw;
    double sb = rb;
    double rr = rw.squaredNorm() + rb * rb;
    const double cg_stop = std::min(0.1, std::sqrt(gnorm)) * gnorm;
    const int cg_limit = static_cast<int>(std::min<Eigen::Index>(dim + 1, 250));
    for (int k = 0; k < cg_limit && std::sqrt(rr) > cg_stop; ++k) {
      Eigen::VectorXd hw;
      double hb = 0.0;
      hessian_product(x, active, c, sw, sb, hw, hb);
      const double curvature = sw.dot(hw) + sb * hb;
      if (curvature <= 0.0) break;
      const double alpha = rr / curvature;
      dw += alpha * sw;
      db += alpha * sb;
      rw -= alpha * hw;
      rb -= alpha * hb;
      const double rr_next = rw.squaredNorm() + rb * rb;
      sw = rw + (rr_next / rr) * sw;
      sb = rb + (rr_next / rr) * sb;
      rr = rr_next;
    }
    double slope = gw.dot(dw) + gb * db;
    if (!(slope < 0.0)) {
      dw = -gw;
      db = -gb;
      slope = -(gnorm * gnorm);
    }

    // Backtracking (Armijo) line search.
    double step = 1.0;
    Augmented trial;
    Eigen::VectorXd trial_m;
    double trial_f = f;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      trial = Augmented{p.w + step * dw, p.b + step * db};
      trial_m = margins(trial, x, y);
      trial_f = objective_from_margins(trial, trial_m, c);
      if (trial_f <= f + 1e-4 * step * slope) {
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
    p = std::move(trial);
    m = std::move(trial_m);
    f = trial_f;
    out.iterations = it + 1;
  }
  out.w = p.w;
  out.b = p.b;
  out.objective = f;
  return out;
}

LinearSvmModel train_svm(const Eigen::MatrixXd& features, std::span<const int> labels,
                         double reg_c, std::uint64_t /*seed*/, const SvmOptions& options) {
  if (features.rows() != static_cast<Eigen::Index>(labels.size())) {
    throw Error(ErrorCode::kDimensionMismatch, "one label per feature row required");
  }
  std::vector<int> classes(labels.begin(), labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2) {
    throw Error(ErrorCode::kDegenerateLabels, "need at least two classes");
  }

  LinearSvmModel model;
  model.classes = classes;
  model.reg_c = reg_c;
  const double n = static_cast<double>(features.rows());
  model.feature_mean = features.colwise().sum().transpose() / n;
  const Eigen::MatrixXd centered = features.rowwise() - model.feature_mean.transpose();
  model.feature_scale = (centered.colwise().squaredNorm().transpose() / n).cwiseSqrt();
  for (Eigen::Index j = 0; j < model.feature_scale.size(); ++j) {
    if (!(model.feature_scale[j] > 0.0)) model.feature_scale[j] = 1.0;
  }
  const Eigen::MatrixXd x = centered * model.feature_scale.cwiseInverse().asDiagonal();

  model.weights.resize(static_cast<Eigen::Index>(classes.size()), features.cols());
  model.bias.resize(static_cast<Eigen::Index>(classes.size()));
  for (std::size_t k = 0; k < classes.size(); ++k) {
    Eigen::VectorXd y(features.rows());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      y[i] = labels[static_cast<std::size_t>(i)] == classes[k] ? 1.0 : -1.0;
    }
    const BinarySvm svm = train_binary_svm(x, y, reg_c, options);
    model.weights.row(static_cast<Eigen::Index>(k)) = svm.w.transpose();
    model.bias[static_cast<Eigen::Index>(k)] = svm.b;
  }
  return model;
}

Eigen::VectorXd class_scores(const LinearSvmModel& model, const Eigen::VectorXd& feature) {
  if (feature.size() != model.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "feature length differs from the model");
  }
  const Eigen::VectorXd x =
      (feature - model.feature_mean).cwiseQuotient(model.feature_scale);
  return model.weights * x + model.bias;
}

int predict(const LinearSvmModel& model, const Eigen::VectorXd& feature) {
  const Eigen::VectorXd s = class_scores(model, feature);
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < s.size(); ++k) {
    if (s[k] > s[best]) best = k;
  }
  return model.classes[static_cast<std::size_t>(best)];
}

std::vector<int> predict_all(const LinearSvmModel& model, const Eigen::MatrixXd& features) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    out.push_back(predict(model, features.row(i).transpose()));
  }
  return out;
}

std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorCode::kInvalidArgument, "folds must be >= 2");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<int> fold(labels.size(), 0);
  for (auto& [label, members] : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t i = 0; i < members.size(); ++i) {
      fold[members[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));
    }
  }
  return fold;
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size() || truth.empty()) {
    throw Error(ErrorCode::kDimensionMismatch, "prediction and truth lengths differ");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

CrossValidation cross_validate(const Eigen::MatrixXd& features, std::span<const int> labels,
                               std::span<const double> grid, int folds, std::uint64_t seed,
                               const SvmOptions& options) {
  if (grid.empty()) throw Error(ErrorCode::kInvalidArgument, "empty reg_c grid");
  if (folds < 2) throw Error(ErrorCode::kInvalidArgument, "folds must be >= 2");
  if (static_cast<Eigen::Index>(labels.size()) != features.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "one label per feature row required");
  }
  if (labels.size() < static_cast<std::size_t>(folds)) {
    throw Error(ErrorCode::kTooFewExamples, "fewer examples than folds");
  }
  CrossValidation cv;
  cv.candidates.assign(grid.begin(), grid.end());
  std::sort(cv.candidates.begin(), cv.candidates.end());
  if (cv.candidates.size() == 1) {
    cv.best_c = cv.candidates.front();
    cv.mean_accuracy.assign(1, std::nan(""));
    return cv;
  }

  const std::vector<int> fold = stratified_folds(labels, folds, seed);
  std::vector<std::vector<Eigen::Index>> train_idx(static_cast<std::size_t>(folds));
  std::vector<std::vector<Eigen::Index>> test_idx(static_cast<std::size_t>(folds));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (int f = 0; f < folds; ++f) {
      (fold[i] == f ? test_idx : train_idx)[static_cast<std::size_t>(f)].push_back(
          static_cast<Eigen::Index>(i));
    }
  }
  for (int f = 0; f < folds; ++f) {
    std::vector<int> seen;
    for (Eigen::Index i : train_idx[static_cast<std::size_t>(f)]) {
      seen.push_back(labels[static_cast<std::size_t>(i)]);
    }
    std::sort(seen.begin(), seen.end());
    if (std::unique(seen.begin(), seen.end()) - seen.begin() < 2 ||
        test_idx[static_cast<std::size_t>(f)].empty()) {
      throw Error(ErrorCode::kTooFewExamples, "fold " + std::to_string(f) + " is degenerate");
    }
  }

  double best = -1.0;
  for (double c : cv.candidates) {
    double total = 0.0;
    for (int f = 0; f < folds; ++f) {
      const auto& tr = train_idx[static_cast<std::size_t>(f)];
      const auto& te = test_idx[static_cast<std::size_t>(f)];
      std::vector<int> tr_labels, te_labels;
      for (Eigen::Index i : tr) tr_labels.push_back(labels[static_cast<std::size_t>(i)]);
      for (Eigen::Index i : te) te_labels.push_back(labels[static_cast<std::size_t>(i)]);
      const LinearSvmModel model =
          train_svm(features(tr, Eigen::all), tr_labels, c, seed, options);
      total += accuracy(predict_all(model, features(te, Eigen::all)), te_labels);
    }
    const double mean = total / folds;
    cv.mean_accuracy.push_back(mean);
    if (mean > best) {
      best = mean;
      cv.best_c = c;
    }
  }
  return cv;
}

}  // namespace eventfeat
