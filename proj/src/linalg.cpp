#include "hmc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace hmc {

namespace {

// Indices of the k largest-|value| entries, ties broken toward the larger
// signed value and then the lower index so ordering is deterministic.
std::vector<int> top_abs_indices(const Eigen::VectorXd& values, int k) {
  std::vector<int> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    const double fa = std::abs(values[a]), fb = std::abs(values[b]);
    if (fa != fb) return fa > fb;
    if (values[a] != values[b]) return values[a] > values[b];
    return a < b;
  });
  idx.resize(k);
  return idx;
}

struct RitzEstimate {
  Eigen::VectorXd values;   // top-k by |value|
  Eigen::MatrixXd weights;  // tridiagonal eigenvector columns for those values
  double scale = 0.0;       // |lambda_1| estimate
};

RitzEstimate ritz_from_tridiagonal(const Eigen::VectorXd& alpha,
                                   const Eigen::VectorXd& beta, int m, int k) {
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    t(i, i) = alpha[i];
    if (i + 1 < m) {
      t(i, i + 1) = beta[i];
      t(i + 1, i) = beta[i];
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
  const std::vector<int> order = top_abs_indices(es.eigenvalues(), k);
  RitzEstimate r;
  r.values.resize(k);
  r.weights.resize(m, k);
  for (int i = 0; i < k; ++i) {
    r.values[i] = es.eigenvalues()[order[i]];
    r.weights.col(i) = es.eigenvectors().col(order[i]);
  }
  r.scale = es.eigenvalues().cwiseAbs().maxCoeff();
  return r;
}

}  // namespace

MatVecOracle dense_oracle(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols())
    throw std::invalid_argument("dense_oracle: matrix must be square");
  return MatVecOracle{static_cast<int>(a.rows()),
                      [a](const Eigen::VectorXd& v) { return a * v; }};
}

EigenPairs lanczos_extreme_eigs(const MatVecOracle& oracle, int k, Rng& rng,
                                double tol, int max_iter) {
  const int d = oracle.dimension;
  if (d < 1) throw std::invalid_argument("lanczos: dimension must be >= 1");
  if (k < 1 || k > d)
    throw std::invalid_argument("lanczos: need 1 <= k <= dimension");
  if (tol <= 0) throw std::invalid_argument("lanczos: tol must be positive");
  if (max_iter <= 0) max_iter = std::min(10 * k + 20, d);
  const int m_max = std::min(std::max(max_iter, k), d);

  Eigen::MatrixXd basis(d, m_max);
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(m_max);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(m_max);

  basis.col(0) = rng.unit_vector(d);
  int m = 0;
  double scale_estimate = 0.0;

  for (int j = 0; j < m_max; ++j) {
    Eigen::VectorXd w = oracle.apply(basis.col(j));
    alpha[j] = basis.col(j).dot(w);
    w -= alpha[j] * basis.col(j);
    if (j > 0) w -= beta[j - 1] * basis.col(j - 1);
    // Two reorthogonalization passes keep the basis orthonormal to
    // rounding even for clustered spectra.
    auto active = basis.leftCols(j + 1);
    w -= active * (active.transpose() * w);
    w -= active * (active.transpose() * w);
    beta[j] = w.norm();
    m = j + 1;
    scale_estimate = std::max(scale_estimate, std::abs(alpha[j]) + beta[j]);

    if (m >= k) {
      const RitzEstimate r = ritz_from_tridiagonal(alpha, beta, m, k);
      bool ok = true;
      for (int i = 0; i < k; ++i)
        ok = ok && std::abs(beta[j] * r.weights(m - 1, i)) <=
                       tol * std::max(r.scale, 1e-300);
      if (ok) break;
    }
    if (j + 1 >= m_max) break;

    if (beta[j] <= 1e-13 * std::max(scale_estimate, 1.0)) {
      // Invariant subspace found; restart with a fresh direction
      // orthogonal to the current basis.
      beta[j] = 0.0;
      Eigen::VectorXd f;
      double n = 0.0;
      do {
        f = rng.normal_vector(d);
        auto span = basis.leftCols(j + 1);
        f -= span * (span.transpose() * f);
        f -= span * (span.transpose() * f);
        n = f.norm();
      } while (n <= 1e-12);
      basis.col(j + 1) = f / n;
    } else {
      basis.col(j + 1) = w / beta[j];
    }
  }

  const RitzEstimate r = ritz_from_tridiagonal(alpha, beta, m, k);
  EigenPairs out;
  out.values = r.values;
  out.vectors = basis.leftCols(m) * r.weights;
  out.residuals.resize(k);
  out.converged.assign(k, false);
  for (int i = 0; i < k; ++i) {
    const double vn = out.vectors.col(i).norm();
    if (vn > 0) out.vectors.col(i) /= vn;
    const Eigen::VectorXd resid =
        oracle.apply(out.vectors.col(i)) - r.values[i] * out.vectors.col(i);
    out.residuals[i] = resid.norm();
    out.converged[i] = out.residuals[i] <= tol * std::max(r.scale, 1e-300);
  }
  return out;
}

EigenPairs dense_sym_eig(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols())
    throw std::invalid_argument("dense_sym_eig: matrix must be square");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * scale)
    throw std::invalid_argument("dense_sym_eig: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("dense_sym_eig: eigensolver failed");
  const int d = static_cast<int>(a.rows());
  const std::vector<int> order = top_abs_indices(es.eigenvalues(), d);
  EigenPairs out;
  out.values.resize(d);
  out.vectors.resize(d, d);
  out.residuals.resize(d);
  out.converged.assign(d, true);
  for (int i = 0; i < d; ++i) {
    out.values[i] = es.eigenvalues()[order[i]];
    out.vectors.col(i) = es.eigenvectors().col(order[i]);
    out.residuals[i] =
        (a * out.vectors.col(i) - out.values[i] * out.vectors.col(i)).norm();
  }
  return out;
}

std::optional<Eigen::MatrixXd> cholesky_lower(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols())
    throw std::invalid_argument("cholesky_lower: matrix must be square");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * scale)
    throw std::invalid_argument("cholesky_lower: matrix is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) return std::nullopt;
  Eigen::MatrixXd l = llt.matrixL();
  if (!l.allFinite()) return std::nullopt;
  return l;
}

}  // namespace hmc
