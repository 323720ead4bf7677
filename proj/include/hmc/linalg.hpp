#ifndef HMC_LINALG_HPP
#define HMC_LINALG_HPP

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "hmc/rng.hpp"

namespace hmc {

// Extreme eigenpairs of a symmetric operator, ordered by descending |value|.
struct EigenPairs {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;     // orthonormal columns, one per value
  Eigen::VectorXd residuals;   // ||A v - lambda v|| per pair
  std::vector<bool> converged;

  int count() const { return static_cast<int>(values.size()); }
  bool all_converged() const {
    for (bool c : converged)
      if (!c) return false;
    return !converged.empty();
  }
};

// Matrix-free symmetric linear operator.
struct MatVecOracle {
  int dimension = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> apply;
};

MatVecOracle dense_oracle(const Eigen::MatrixXd& a);

// Lanczos iteration with full reorthogonalization against all stored basis
// vectors. Extracts the k largest-|lambda| eigenpairs. The start vector is
// drawn uniformly from the unit sphere using rng. A pair counts as
// converged when its residual is at most tol * |lambda_1|. max_iter <= 0
// selects the default cap min(10 k + 20, dimension).
EigenPairs lanczos_extreme_eigs(const MatVecOracle& oracle, int k, Rng& rng,
                                double tol = 1e-6, int max_iter = 0);

// Dense symmetric eigendecomposition (all pairs, descending |value|).
// Requires max|A - A^T| <= 1e-12 * max(1, max|A|).
EigenPairs dense_sym_eig(const Eigen::MatrixXd& a);

// Lower-triangular Cholesky factor of a symmetric positive definite matrix;
// empty when the factorization fails.
std::optional<Eigen::MatrixXd> cholesky_lower(const Eigen::MatrixXd& a);

}  // namespace hmc

#endif
