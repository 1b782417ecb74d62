#include "grac/lp.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <cstdlib>

#include "grac/error.hpp"

namespace grac {

namespace {

double step_to_boundary(const Eigen::VectorXd& x, const Eigen::VectorXd& dx) {
  double a = 1.0;
  for (int i = 0; i < x.size(); ++i)
    if (dx[i] < 0.0) a = std::min(a, -x[i] / dx[i]);
  return a;
}

}  // namespace

L1Result min_l1(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& b,
                const Eigen::VectorXd& x0, int max_iter, double tol) {
  const int m = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  const Eigen::SparseMatrix<double> At = A.transpose();

  const double bscale = 1.0 + b.cwiseAbs().maxCoeff();

  // Start: perfectly centered dual (y = 0, slacks 1). A feasible-split
  // primal seed keeps the primal residual at rounding level throughout.
  Eigen::VectorXd u, v;
  bool feasible_mode = false;
  if (x0.size() == n &&
      (A * x0 - b).cwiseAbs().maxCoeff() <= 1e-9 * bscale) {
    const double xi = std::max(0.5, 0.05 * x0.cwiseAbs().maxCoeff());
    u = x0.cwiseMax(0.0).array() + xi;
    v = (-x0).cwiseMax(0.0).array() + xi;
    feasible_mode = true;
  } else {
    const double xi = std::max(1.0, b.cwiseAbs().maxCoeff());
    u = Eigen::VectorXd::Constant(n, xi);
    v = Eigen::VectorXd::Constant(n, xi);
  }
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd su = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd sv = Eigen::VectorXd::Ones(n);

  // Feasibility repair through the fixed Gram matrix A A': after every step
  // the Newton rounding error is projected out, so the iterates never leave
  // the constraint manifold by more than a few ulps.
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> gram;
  if (feasible_mode) {
    Eigen::SparseMatrix<double> G =
        A * Eigen::SparseMatrix<double>(At);
    const double greg = 1e-12 * (1.0 + G.diagonal().maxCoeff());
    for (int i = 0; i < m; ++i) G.coeffRef(i, i) += greg;
    G.makeCompressed();
    gram.compute(G);
    feasible_mode = gram.info() == Eigen::Success;
  }
  auto repair = [&]() {
    if (!feasible_mode) return;
    Eigen::VectorXd r = b - A * (u - v);
    if (r.cwiseAbs().maxCoeff() <= 1e-13 * bscale) return;
    for (int pass = 0; pass < 4; ++pass) {
      const Eigen::VectorXd w = gram.solve(r);
      if (!w.allFinite()) return;
      const Eigen::VectorXd delta = At * w;
      u += delta.cwiseMax(0.0);
      v += (-delta).cwiseMax(0.0);
      r = b - A * (u - v);
      if (r.cwiseAbs().maxCoeff() <= 1e-13 * bscale) return;
    }
  };

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  bool analyzed = false;

  const double tol_p = std::max(tol, 1e-9) * bscale;
  const double tol_d = std::max(tol, 1e-9);

  L1Result res;
  L1Result best;
  best.x = u - v;
  double best_score = std::numeric_limits<double>::infinity();
  int stalled = 0;

  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd Aty = At * y;
    const Eigen::VectorXd rp = b - A * (u - v);
    const Eigen::VectorXd rdu = Eigen::VectorXd::Ones(n) - Aty - su;
    const Eigen::VectorXd rdv = Eigen::VectorXd::Ones(n) + Aty - sv;
    const double mu = (u.dot(su) + v.dot(sv)) / (2.0 * n);

    const double primal_obj = u.sum() + v.sum();
    const double dual_obj = b.dot(y);
    const double gap = primal_obj - dual_obj;
    const double rd = std::max(rdu.cwiseAbs().maxCoeff(),
                               rdv.cwiseAbs().maxCoeff());

    res.iterations = it;
    res.objective = primal_obj;
    res.dual_bound = dual_obj;
    res.gap = gap;
    res.residual = rp.cwiseAbs().maxCoeff();
    if (std::getenv("GRAC_LP_TRACE"))
      std::fprintf(stderr,
                   "lp it=%3d mu=%9.2e rp=%9.2e rd=%9.2e gap=%9.2e obj=%g\n",
                   it, mu, res.residual, rd, gap, primal_obj);

    const double gap_tol =
        std::max(1e-10, 1e-10 * std::abs(primal_obj));
    const double score = std::max({res.residual / tol_p, rd / tol_d,
                                   gap / gap_tol});
    if (score < best_score) {
      best = res;
      best.x = u - v;
      best_score = score;
      stalled = 0;
    } else {
      ++stalled;
    }
    if (score <= 1.0) {
      res.converged = true;
      break;
    }
    // The complementarity floor is reached or progress has stopped: return
    // the best iterate seen; the caller re-projects onto the constraints.
    if (mu < 1e-18 || stalled >= 8) {
      best.converged = best_score <= 10.0;
      best.iterations = it;
      return best;
    }

    const Eigen::VectorXd du = u.cwiseQuotient(su);
    const Eigen::VectorXd dv = v.cwiseQuotient(sv);
    const Eigen::VectorXd d = du + dv;

    Eigen::SparseMatrix<double> M =
        A * d.asDiagonal() * At;
    // The diagonal of M spreads over many orders of magnitude as the
    // barrier decays; Jacobi equilibration keeps the factorization regular
    // regardless. The tiny shift handles exact row dependencies of A: their
    // null directions never appear in the right-hand sides.
    Eigen::VectorXd scale = M.diagonal();
    for (int i = 0; i < m; ++i)
      scale[i] = 1.0 / std::sqrt(std::max(scale[i], 1e-30));
    Eigen::SparseMatrix<double> Ms =
        scale.asDiagonal() * M * scale.asDiagonal();
    for (int i = 0; i < m; ++i) Ms.coeffRef(i, i) += 1e-12;
    Ms.makeCompressed();
    if (!analyzed) {
      ldlt.analyzePattern(Ms);
      analyzed = true;
    }
    ldlt.factorize(Ms);
    if (ldlt.info() != Eigen::Success)
      throw NumericsError("l1 solver: normal-equation factorization failed");

    auto apply_M = [&](const Eigen::VectorXd& w) {
      return Eigen::VectorXd(A * d.cwiseProduct(At * w));
    };
    auto msolve = [&](const Eigen::VectorXd& r) {
      return Eigen::VectorXd(
          scale.cwiseProduct(ldlt.solve(scale.cwiseProduct(r))));
    };
    auto solve_newton = [&](const Eigen::VectorXd& rp_,
                            const Eigen::VectorXd& rdu_,
                            const Eigen::VectorXd& rdv_,
                            const Eigen::VectorXd& cu,
                            const Eigen::VectorXd& cv, Eigen::VectorXd& dy,
                            Eigen::VectorXd& dub, Eigen::VectorXd& dvb,
                            Eigen::VectorXd& dsu, Eigen::VectorXd& dsv) {
      const Eigen::VectorXd rhs =
          rp_ - A * (cu.cwiseQuotient(su) - cv.cwiseQuotient(sv) -
                     du.cwiseProduct(rdu_) + dv.cwiseProduct(rdv_));
      dy = msolve(rhs);
      const double rhs_scale = 1.0 + rhs.cwiseAbs().maxCoeff();
      for (int pass = 0; pass < 10; ++pass) {
        const Eigen::VectorXd r2 = rhs - apply_M(dy);
        if (r2.cwiseAbs().maxCoeff() <= 1e-13 * rhs_scale) break;
        dy += msolve(r2);
      }
      const Eigen::VectorXd Atdy = At * dy;
      dsu = rdu_ - Atdy;
      dsv = rdv_ + Atdy;
      dub = cu.cwiseQuotient(su) - du.cwiseProduct(dsu);
      dvb = cv.cwiseQuotient(sv) - dv.cwiseProduct(dsv);
    };

    // Affine-scaling predictor.
    Eigen::VectorXd dy, dua, dva, dsua, dsva;
    solve_newton(rp, rdu, rdv, -u.cwiseProduct(su), -v.cwiseProduct(sv), dy,
                 dua, dva, dsua, dsva);
    double ap = std::min(step_to_boundary(u, dua), step_to_boundary(v, dva));
    double ad =
        std::min(step_to_boundary(su, dsua), step_to_boundary(sv, dsva));
    const double mu_aff = ((u + ap * dua).dot(su + ad * dsua) +
                           (v + ap * dva).dot(sv + ad * dsva)) /
                          (2.0 * n);
    const double sigma = std::pow(mu_aff / mu, 3);

    // Corrector with centering.
    const Eigen::VectorXd cu = Eigen::VectorXd::Constant(n, sigma * mu) -
                               u.cwiseProduct(su) - dua.cwiseProduct(dsua);
    const Eigen::VectorXd cv = Eigen::VectorXd::Constant(n, sigma * mu) -
                               v.cwiseProduct(sv) - dva.cwiseProduct(dsva);
    Eigen::VectorXd dub, dvb, dsu, dsv;
    solve_newton(rp, rdu, rdv, cu, cv, dy, dub, dvb, dsu, dsv);

    const double eta = std::min(0.99995, 1.0 - std::min(0.1, 1e2 * mu));
    ap = std::min(1.0, eta * std::min(step_to_boundary(u, dub),
                                      step_to_boundary(v, dvb)));
    ad = std::min(1.0, eta * std::min(step_to_boundary(su, dsu),
                                      step_to_boundary(sv, dsv)));

    // Additional centrality correctors: push outlier complementarity
    // products toward the target band so degenerate pairs cannot block the
    // step. Accept a corrector only if it lengthens the step.
    const Eigen::VectorXd zero_n = Eigen::VectorXd::Zero(n);
    const Eigen::VectorXd zero_m = Eigen::VectorXd::Zero(m);
    const double mu_t = std::max(sigma, 0.1) * mu;
    for (int extra = 0; extra < 3; ++extra) {
      const double apt = std::min(1.0, 1.5 * ap + 0.3);
      const double adt = std::min(1.0, 1.5 * ad + 0.3);
      const Eigen::VectorXd pu =
          (u + apt * dub).cwiseProduct(su + adt * dsu);
      const Eigen::VectorXd pv =
          (v + apt * dvb).cwiseProduct(sv + adt * dsv);
      Eigen::VectorXd tu(n), tv(n);
      for (int i = 0; i < n; ++i) {
        tu[i] = std::clamp(pu[i], 0.1 * mu_t, 10.0 * mu_t) - pu[i];
        tv[i] = std::clamp(pv[i], 0.1 * mu_t, 10.0 * mu_t) - pv[i];
      }
      Eigen::VectorXd dyc, duc, dvc, dsuc, dsvc;
      solve_newton(zero_m, zero_n, zero_n, tu, tv, dyc, duc, dvc, dsuc,
                   dsvc);
      const Eigen::VectorXd dub2 = dub + duc, dvb2 = dvb + dvc;
      const Eigen::VectorXd dsu2 = dsu + dsuc, dsv2 = dsv + dsvc;
      const double ap2 =
          std::min(1.0, eta * std::min(step_to_boundary(u, dub2),
                                       step_to_boundary(v, dvb2)));
      const double ad2 =
          std::min(1.0, eta * std::min(step_to_boundary(su, dsu2),
                                       step_to_boundary(sv, dsv2)));
      if (std::min(ap2, ad2) < std::min(ap, ad) * 1.01) break;
      dub = dub2; dvb = dvb2; dsu = dsu2; dsv = dsv2; dy += dyc;
      ap = ap2; ad = ad2;
    }
    if (std::getenv("GRAC_LP_TRACE"))
      std::fprintf(stderr,
                   "      ap=%8.1e ad=%8.1e sigma=%8.1e umin=%8.1e vmin=%8.1e"
                   " sumin=%8.1e svmin=%8.1e\n",
                   ap, ad, sigma, u.minCoeff(), v.minCoeff(), su.minCoeff(),
                   sv.minCoeff());
    u += ap * dub;
    v += ap * dvb;
    y += ad * dy;
    su += ad * dsu;
    sv += ad * dsv;
    repair();
  }

  res.x = u - v;
  return res;
}

}  // namespace grac
