#pragma once

#include <Eigen/Sparse>

namespace grac {

struct L1Result {
  Eigen::VectorXd x;       // minimizer of ||x||_1 subject to A x = b
  double objective = 0.0;  // ||x||_1 at the returned point
  double dual_bound = 0.0; // b' y, a certified lower bound on the optimum
  double gap = 0.0;        // objective - dual_bound
  double residual = 0.0;   // ||A x - b||_inf
  int iterations = 0;
  bool converged = false;
};

// Minimum-l1 solution of a consistent underdetermined system via a
// primal-dual interior-point method on the split formulation
//   min 1'u + 1'v   s.t.  A(u - v) = b,  u, v >= 0.
// Deterministic: no pivoting, no randomness. When `x0` solves A x = b it
// seeds a primal-feasible start, which keeps the whole iteration on the
// feasible manifold; otherwise an infeasible start is used.
L1Result min_l1(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& b,
                const Eigen::VectorXd& x0 = Eigen::VectorXd(),
                int max_iter = 200, double tol = 1e-12);

}  // namespace grac
