#include <doctest.h>

#include <random>

#include "grac/error.hpp"
#include "grac/potential.hpp"

using namespace grac;

namespace {

StencilGradient random_near_ground(const Stencil& st, const LatticeBasis& b,
                                   const Eigen::Matrix2d& F0, unsigned seed,
                                   double amp = 0.02) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-amp, amp);
  StencilGradient g = uniform_gradient(F0, st, b);
  for (auto& v : g) v += Eigen::Vector2d(u(rng), u(rng));
  return g;
}

double fd_eval(const StencilGradient& g, const EAMParams& p, std::size_t i,
               int comp, double h) {
  StencilGradient gp = g, gm = g;
  gp[i][comp] += h;
  gm[i][comp] -= h;
  return (eval_V(gp, p) - eval_V(gm, p)) / (2.0 * h);
}

}  // namespace

TEST_CASE("eval_V closed-form values") {
  const EAMParams p;

  // Single unit-length difference: phi(1) = 1 - 2 = -1 plus the embedding
  // of t = psi(1) = e^{-b}.
  StencilGradient one = {Eigen::Vector2d(1.0, 0.0)};
  const double t = std::exp(-p.b);
  const double d = t - p.rho0;
  CHECK(eval_V(one, p) ==
        doctest::Approx(-1.0 + p.c * (d * d + d * d * d * d)));

  // Six unit differences: density hits rho0 = 6 e^{-b} so F vanishes.
  const Stencil s1 = stencil(1);
  const LatticeBasis basis;
  StencilGradient six = uniform_gradient(Eigen::Matrix2d::Identity(), s1, basis);
  CHECK(eval_V(six, p) == doctest::Approx(-6.0));

  StencilGradient bad = {Eigen::Vector2d::Zero()};
  CHECK_THROWS_AS(eval_V(bad, p), NumericsError);
}

TEST_CASE("gradient and hessian pass finite-difference checks") {
  const EAMParams p;
  const Stencil st = stencil(2);
  const LatticeBasis basis;
  const Eigen::Matrix2d F0 = find_F0(st, basis, p);

  for (unsigned seed = 0; seed < 20; ++seed) {
    const StencilGradient g = random_near_ground(st, basis, F0, seed);
    const StencilGradient dV = grad_V(g, p);
    const auto H = hess_V(g, p);
    const std::size_t n = g.size();

    double gmax = 0.0, gerr = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (int c = 0; c < 2; ++c) {
        const double fd = fd_eval(g, p, i, c, 1e-5);
        gmax = std::max(gmax, std::abs(dV[i][c]));
        gerr = std::max(gerr, std::abs(dV[i][c] - fd));
      }
    CHECK(gerr / gmax <= 1e-6);

    // Hessian vs finite differences of the analytic gradient.
    double hmax = 0.0, herr = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      for (int c = 0; c < 2; ++c) {
        StencilGradient gp = g, gm = g;
        gp[j][c] += 1e-5;
        gm[j][c] -= 1e-5;
        const StencilGradient dp = grad_V(gp, p), dm = grad_V(gm, p);
        for (std::size_t i = 0; i < n; ++i)
          for (int r = 0; r < 2; ++r) {
            const double fd = (dp[i][r] - dm[i][r]) / 2e-5;
            const double an = H[i * n + j](r, c);
            hmax = std::max(hmax, std::abs(an));
            herr = std::max(herr, std::abs(an - fd));
          }
      }
    CHECK(herr / hmax <= 1e-5);

    // Block symmetry V_{rho sigma} = V_{sigma rho}^T.
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        CHECK((H[i * n + j] - H[j * n + i].transpose()).cwiseAbs().maxCoeff()
              <= 1e-12);
  }
}

TEST_CASE("point-symmetric states and pair-only potentials") {
  const EAMParams p;
  const Stencil st = stencil(2);
  const LatticeBasis basis;
  Eigen::Matrix2d F;
  F << 1.05, 0.02, -0.01, 0.97;
  const StencilGradient g = uniform_gradient(F, st, basis);
  const StencilGradient dV = grad_V(g, p);

  // grad_{-rho} V = -grad_rho V for point-symmetric arguments.
  for (int i = 0; i < st.size(); ++i)
    CHECK((dV[i] + dV[st.opposite(i)]).norm() ==
          doctest::Approx(0.0).epsilon(1e-12));

  // Stress symmetry at the unstrained ground state.
  const Eigen::Matrix2d F0 = find_F0(st, basis, p);
  const StencilGradient dV0 = grad_V(uniform_gradient(F0, st, basis), p);
  Eigen::Matrix2d stress = Eigen::Matrix2d::Zero();
  for (int i = 0; i < st.size(); ++i)
    stress += dV0[i] * basis.position(st.direction(i)).transpose();
  CHECK((stress - stress.transpose()).cwiseAbs().maxCoeff() <= 1e-12);

  // No embedding: off-diagonal hessian blocks vanish.
  EAMParams pair = p;
  pair.c = 0.0;
  const auto H = hess_V(g, pair);
  for (int i = 0; i < st.size(); ++i)
    for (int j = 0; j < st.size(); ++j)
      if (i != j)
        CHECK(H[i * st.size() + j].cwiseAbs().maxCoeff() ==
              doctest::Approx(0.0));
}

TEST_CASE("eval_V invariances") {
  const EAMParams p;
  const Stencil st = stencil(2);
  const LatticeBasis basis;
  const Eigen::Matrix2d F0 = find_F0(st, basis, p);
  const StencilGradient g = random_near_ground(st, basis, F0, 42);

  // Simultaneous rotation of all differences.
  const double th = 0.83;
  Eigen::Matrix2d Q;
  Q << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  StencilGradient gq(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) gq[i] = Q * g[i];
  CHECK(eval_V(gq, p) == doctest::Approx(eval_V(g, p)).epsilon(1e-13));

  // Consistent permutation of the entries.
  StencilGradient gp(g.rbegin(), g.rend());
  CHECK(eval_V(gp, p) == doctest::Approx(eval_V(g, p)).epsilon(1e-13));
}

TEST_CASE("Cauchy-Born density") {
  const EAMParams p;
  const Stencil st = stencil(2);
  const LatticeBasis basis;
  Eigen::Matrix2d F;
  F << 1.02, 0.03, 0.00, 0.99;

  // Frame indifference: W(QF) = W(F).
  const double th = -0.37;
  Eigen::Matrix2d Q;
  Q << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  CHECK(eval_W(Q * F, st, basis, p) ==
        doctest::Approx(eval_W(F, st, basis, p)).epsilon(1e-13));

  // dW/dF against central finite differences.
  const Eigen::Matrix2d dW = grad_W(F, st, basis, p);
  double maxv = dW.cwiseAbs().maxCoeff(), maxerr = 0.0;
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) {
      Eigen::Matrix2d Fp = F, Fm = F;
      Fp(r, c) += 1e-6;
      Fm(r, c) -= 1e-6;
      const double fd =
          (eval_W(Fp, st, basis, p) - eval_W(Fm, st, basis, p)) / 2e-6;
      maxerr = std::max(maxerr, std::abs(fd - dW(r, c)));
    }
  CHECK(maxerr / maxv <= 1e-6);
}

TEST_CASE("ground-state stretch") {
  const EAMParams p;
  const Stencil st = stencil(2);
  const LatticeBasis basis;
  const Eigen::Matrix2d F0 = find_F0(st, basis, p);

  // Proportional to the identity.
  CHECK(F0(0, 1) == 0.0);
  CHECK(F0(1, 0) == 0.0);
  CHECK(F0(0, 0) == F0(1, 1));
  const double alpha = F0(0, 0);
  CHECK(alpha > 0.5);
  CHECK(alpha < 2.0);

  // Stationarity via a fourth-order finite difference of W along alpha.
  const auto w = [&](double a) {
    return eval_W(a * Eigen::Matrix2d::Identity(), st, basis, p);
  };
  const double h = 1e-4;
  const double d5 = (-w(alpha + 2 * h) + 8 * w(alpha + h) - 8 * w(alpha - h) +
                     w(alpha - 2 * h)) /
                    (12.0 * h);
  CHECK(std::abs(d5) <= 1e-10);

  // Minimum over a scan grid.
  for (double a = 0.8; a <= 1.2; a += 0.01)
    CHECK(w(alpha) <= w(a) + 1e-14);

  // Determinism: bit-identical on repetition.
  const Eigen::Matrix2d F0b = find_F0(st, basis, p);
  CHECK(F0(0, 0) == F0b(0, 0));
}
