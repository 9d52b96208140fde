#pragma once

// Small, deliberately naive reference solvers used as independent checks.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

inline Eigen::MatrixXd gaussian(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  return Eigen::MatrixXd::NullaryExpr(rows, cols, [&] { return nd(rng); });
}

// Q factor of a Gaussian matrix via modified Gram-Schmidt.
inline Eigen::MatrixXd random_orthonormal(int n, std::mt19937_64& rng) {
  Eigen::MatrixXd q = gaussian(n, n, rng);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < j; ++i) q.col(j) -= q.col(i).dot(q.col(j)) * q.col(i);
    q.col(j) /= q.col(j).norm();
  }
  return q;
}

// Cyclic Jacobi rotations on a symmetric matrix; returns (values, vectors).
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> jacobi_eigen(Eigen::MatrixXd a) {
  const int n = static_cast<int>(a.rows());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  return {a.diagonal(), v};
}

inline double cofactor_det(const Eigen::MatrixXd& m) {
  const int n = static_cast<int>(m.rows());
  if (n == 1) return m(0, 0);
  double det = 0;
  for (int j = 0; j < n; ++j) {
    Eigen::MatrixXd minor(n - 1, n - 1);
    for (int r = 1; r < n; ++r) {
      for (int c = 0, cc = 0; c < n; ++c) {
        if (c != j) minor(r - 1, cc++) = m(r, c);
      }
    }
    det += ((j % 2) ? -1.0 : 1.0) * m(0, j) * cofactor_det(minor);
  }
  return det;
}

inline double lasso_value(const Eigen::MatrixXd& d, const Eigen::VectorXd& v,
                          const Eigen::VectorXd& l, double lambda) {
  return 0.5 * (v - d * l).squaredNorm() + lambda * l.cwiseAbs().sum();
}

// Best LASSO value over all supports of size <= max_support and all sign
// patterns: on a fixed support S with signs s the stationary point is
// l_S = (D_S^T D_S)^{-1}(D_S^T v - lambda s), admissible only when its signs
// agree with s.
inline double lasso_support_enumeration(const Eigen::MatrixXd& d, const Eigen::VectorXd& v,
                                        double lambda, int max_support,
                                        Eigen::VectorXd* best_code = nullptr) {
  const int k = static_cast<int>(d.cols());
  double best = 0.5 * v.squaredNorm();
  Eigen::VectorXd best_l = Eigen::VectorXd::Zero(k);
  std::vector<int> support;
  auto visit = [&](auto&& self, int next) -> void {
    if (!support.empty()) {
      const int s = static_cast<int>(support.size());
      Eigen::MatrixXd ds(d.rows(), s);
      for (int i = 0; i < s; ++i) ds.col(i) = d.col(support[i]);
      const Eigen::MatrixXd g = ds.transpose() * ds;
      const Eigen::VectorXd rhs0 = ds.transpose() * v;
      for (int mask = 0; mask < (1 << s); ++mask) {
        Eigen::VectorXd sign(s);
        for (int i = 0; i < s; ++i) sign[i] = (mask >> i) & 1 ? -1.0 : 1.0;
        const Eigen::VectorXd ls = g.fullPivLu().solve(rhs0 - lambda * sign);
        bool ok = true;
        for (int i = 0; i < s; ++i) ok = ok && ls[i] * sign[i] > 0;
        if (!ok) continue;
        Eigen::VectorXd l = Eigen::VectorXd::Zero(k);
        for (int i = 0; i < s; ++i) l[support[i]] = ls[i];
        const double value = lasso_value(d, v, l, lambda);
        if (value < best) best = value, best_l = l;
      }
    }
    if (static_cast<int>(support.size()) == max_support) return;
    for (int j = next; j < k; ++j) {
      support.push_back(j);
      self(self, j + 1);
      support.pop_back();
    }
  };
  visit(visit, 0);
  if (best_code) *best_code = best_l;
  return best;
}

// argmin_l 1/2 (z - l)^2 + lambda |l|: the smooth branches l > 0 and l < 0
// each have one stationary point, compared against the kink at l = 0. A
// bracketing grid then confirms nothing lower exists nearby (NaN if it does).
inline double separable_prox(double z, double lambda) {
  auto f = [&](double l) { return 0.5 * (z - l) * (z - l) + lambda * std::abs(l); };
  double best = 0.0;
  if (z - lambda > 0 && f(z - lambda) < f(best)) best = z - lambda;
  if (z + lambda < 0 && f(z + lambda) < f(best)) best = z + lambda;
  for (int i = -200; i <= 200; ++i) {
    const double l = best + 1e-3 * i * (1 + std::abs(z));
    if (f(l) < f(best) - 1e-15) return std::numeric_limits<double>::quiet_NaN();
  }
  return best;
}

}  // namespace oracle
