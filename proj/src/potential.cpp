#include "grac/potential.hpp"

#include <cmath>

#include "grac/error.hpp"

namespace grac {

namespace {

double phi(double r, const EAMParams& p) {
  return std::exp(-2.0 * p.a * (r - 1.0)) - 2.0 * std::exp(-p.a * (r - 1.0));
}
double dphi(double r, const EAMParams& p) {
  return -2.0 * p.a * std::exp(-2.0 * p.a * (r - 1.0)) +
         2.0 * p.a * std::exp(-p.a * (r - 1.0));
}
double ddphi(double r, const EAMParams& p) {
  return 4.0 * p.a * p.a * std::exp(-2.0 * p.a * (r - 1.0)) -
         2.0 * p.a * p.a * std::exp(-p.a * (r - 1.0));
}

double psi(double r, const EAMParams& p) { return std::exp(-p.b * r); }
double dpsi(double r, const EAMParams& p) { return -p.b * std::exp(-p.b * r); }
double ddpsi(double r, const EAMParams& p) {
  return p.b * p.b * std::exp(-p.b * r);
}

double embed(double t, const EAMParams& p) {
  const double d = t - p.rho0;
  return p.c * (d * d + d * d * d * d);
}
double dembed(double t, const EAMParams& p) {
  const double d = t - p.rho0;
  return p.c * (2.0 * d + 4.0 * d * d * d);
}
double ddembed(double t, const EAMParams& p) {
  const double d = t - p.rho0;
  return p.c * (2.0 + 12.0 * d * d);
}

void check_lengths(const StencilGradient& g) {
  for (const auto& v : g)
    if (v.squaredNorm() <= 0.0)
      throw NumericsError("singular configuration: zero-length difference");
}

}  // namespace

double eval_V(const StencilGradient& g, const EAMParams& p) {
  check_lengths(g);
  double pair = 0.0, density = 0.0;
  for (const auto& v : g) {
    const double r = v.norm();
    pair += phi(r, p);
    density += psi(r, p);
  }
  return pair + embed(density, p);
}

StencilGradient grad_V(const StencilGradient& g, const EAMParams& p) {
  check_lengths(g);
  double density = 0.0;
  for (const auto& v : g) density += psi(v.norm(), p);
  const double Fp = dembed(density, p);

  StencilGradient out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double r = g[i].norm();
    out[i] = (dphi(r, p) + Fp * dpsi(r, p)) / r * g[i];
  }
  return out;
}

std::vector<Eigen::Matrix2d> hess_V(const StencilGradient& g,
                                    const EAMParams& p) {
  check_lengths(g);
  const std::size_t n = g.size();
  double density = 0.0;
  for (const auto& v : g) density += psi(v.norm(), p);
  const double Fp = dembed(density, p);
  const double Fpp = ddembed(density, p);

  std::vector<Eigen::Vector2d> unit(n);
  std::vector<double> rad(n), dpsi_i(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = g[i].norm();
    rad[i] = r;
    unit[i] = g[i] / r;
    dpsi_i[i] = dpsi(r, p);
  }

  std::vector<Eigen::Matrix2d> H(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      Eigen::Matrix2d blk = Fpp * dpsi_i[i] * dpsi_i[j] *
                            (unit[i] * unit[j].transpose());
      if (i == j) {
        const double radial = ddphi(rad[i], p) + Fp * ddpsi(rad[i], p);
        const double tangent = (dphi(rad[i], p) + Fp * dpsi_i[i]) / rad[i];
        const Eigen::Matrix2d uu = unit[i] * unit[i].transpose();
        blk += radial * uu + tangent * (Eigen::Matrix2d::Identity() - uu);
      }
      H[i * n + j] = blk;
    }
  }
  return H;
}

StencilGradient uniform_gradient(const Eigen::Matrix2d& F, const Stencil& st,
                                 const LatticeBasis& basis) {
  StencilGradient g(st.size());
  for (int i = 0; i < st.size(); ++i)
    g[i] = F * basis.position(st.direction(i));
  return g;
}

double eval_W(const Eigen::Matrix2d& F, const Stencil& st,
              const LatticeBasis& basis, const EAMParams& p) {
  return eval_V(uniform_gradient(F, st, basis), p) / basis.cell_volume();
}

Eigen::Matrix2d grad_W(const Eigen::Matrix2d& F, const Stencil& st,
                       const LatticeBasis& basis, const EAMParams& p) {
  const StencilGradient dV = grad_V(uniform_gradient(F, st, basis), p);
  Eigen::Matrix2d out = Eigen::Matrix2d::Zero();
  for (int i = 0; i < st.size(); ++i)
    out += dV[i] * basis.position(st.direction(i)).transpose();
  return out / basis.cell_volume();
}

Eigen::Matrix2d find_F0(const Stencil& st, const LatticeBasis& basis,
                        const EAMParams& p) {
  const auto w = [&](double alpha) {
    return eval_W(alpha * Eigen::Matrix2d::Identity(), st, basis, p);
  };
  // W'(alpha I) : I via the analytic W gradient.
  const auto dw = [&](double alpha) {
    return grad_W(alpha * Eigen::Matrix2d::Identity(), st, basis, p).trace();
  };

  double lo = 0.5, hi = 2.0;
  if (!(dw(lo) < 0.0 && dw(hi) > 0.0))
    throw ConfigError("no bracket for the ground-state stretch in [0.5, 2]");

  // Golden-section shrink to a tight bracket, then Newton on W'.
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - invphi * (hi - lo), x2 = lo + invphi * (hi - lo);
  double f1 = w(x1), f2 = w(x2);
  for (int it = 0; it < 60 && hi - lo > 1e-8; ++it) {
    if (f1 < f2) {
      hi = x2; x2 = x1; f2 = f1;
      x1 = hi - invphi * (hi - lo); f1 = w(x1);
    } else {
      lo = x1; x1 = x2; f1 = f2;
      x2 = lo + invphi * (hi - lo); f2 = w(x2);
    }
  }
  double alpha = 0.5 * (lo + hi);
  for (int it = 0; it < 50; ++it) {
    const double d = dw(alpha);
    if (std::abs(d) <= 1e-12) break;
    const double h = 1e-6;
    const double dd = (dw(alpha + h) - dw(alpha - h)) / (2.0 * h);
    alpha -= d / dd;
  }
  return alpha * Eigen::Matrix2d::Identity();
}

}  // namespace grac
