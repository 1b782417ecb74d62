#pragma once

#include <Eigen/Dense>
#include <vector>

#include "grac/lattice.hpp"

namespace grac {

// Parameters of the toy EAM site potential
//   phi(r) = exp(-2a(r-1)) - 2 exp(-a(r-1)),  psi(r) = exp(-b r),
//   F(t)   = c ((t - rho0)^2 + (t - rho0)^4).
struct EAMParams {
  double a = 4.4;
  double b = 3.0;
  double c = 5.0;
  double rho0 = 6.0 * std::exp(-3.0);

  static EAMParams paper() { return EAMParams{}; }
};

// Deformed stencil differences (D_rho y)_rho, ordered like the stencil that
// produced them. Reduced stencils pass the surviving directions only.
using StencilGradient = std::vector<Eigen::Vector2d>;

double eval_V(const StencilGradient& g, const EAMParams& p);

// Partial derivatives of V with respect to each difference component.
StencilGradient grad_V(const StencilGradient& g, const EAMParams& p);

// Exact second derivatives; block (i,j) is d2 V / d g_i d g_j.
std::vector<Eigen::Matrix2d> hess_V(const StencilGradient& g,
                                    const EAMParams& p);

// Cauchy-Born energy density W(F) = |vor|^{-1} V((F rho)_rho).
double eval_W(const Eigen::Matrix2d& F, const Stencil& st,
              const LatticeBasis& basis, const EAMParams& p);

// dW/dF as a 2x2 matrix (first Piola-Kirchhoff style derivative).
Eigen::Matrix2d grad_W(const Eigen::Matrix2d& F, const Stencil& st,
                       const LatticeBasis& basis, const EAMParams& p);

// Ground-state strain F0 = alpha* I minimizing alpha -> W(alpha I).
Eigen::Matrix2d find_F0(const Stencil& st, const LatticeBasis& basis,
                        const EAMParams& p);

// Stencil differences of the homogeneous deformation y = F x.
StencilGradient uniform_gradient(const Eigen::Matrix2d& F, const Stencil& st,
                                 const LatticeBasis& basis);

}  // namespace grac
