#include "grac/consistency.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseQR>
#include <algorithm>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "grac/error.hpp"
#include "grac/lp.hpp"

namespace grac {

ReconstructionSet identity_reconstruction(const Decomposition& decomp,
                                          const ReferenceConfig& config,
                                          const Stencil& st) {
  ReconstructionSet out;
  for (int s : decomp.interface_sites)
    out.C[config.site(s)] = Eigen::MatrixXd::Identity(st.size(), st.size());
  return out;
}

Eigen::MatrixXd continuum_reconstruction_nnn(const Stencil& st) {
  const double c23 = 2.0 / 3.0, c13 = 1.0 / 3.0, c43 = 4.0 / 3.0;
  if (st.hop_radius() == 1) {
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(6, 6);
    for (int i = 0; i < 6; ++i) {
      C(i, i) = c23;
      C(i, (i + 1) % 6) = c13;
      C(i, (i + 5) % 6) = c13;
    }
    return C;
  }
  if (st.hop_radius() == 2) {
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(18, 18);
    for (int j = 0; j < 6; ++j) {
      // Nearest-neighbour row: 2/3 self + 1/3 each angular neighbour.
      C(j, j) = c23;
      C(j, (j + 1) % 6) = c13;
      C(j, (j + 5) % 6) = c13;
      // Row for 2 a_j.
      const int r2 = 6 + 2 * j;
      C(r2, j) = c43;
      C(r2, (j + 1) % 6) = c23;
      C(r2, (j + 5) % 6) = c23;
      // Row for a_j + a_{j+1}.
      const int rs = 7 + 2 * j;
      C(rs, j) = 1.0;
      C(rs, (j + 1) % 6) = 1.0;
    }
    return C;
  }
  throw ConfigError("continuum reconstruction defined for hop radius 1 and 2");
}

int atomistic_coeff(const ReferenceConfig& config, int K, LatVec l,
                    LatVec rho) {
  const int back = config.hop_from_core(l - rho) <= K ? 1 : 0;
  const int fwd = config.hop_from_core(l + rho) <= K ? 1 : 0;
  return back - fwd;
}

Eigen::MatrixXd continuum_coeffs(const Mesh& mesh, const EffectiveVolumes& vol,
                                 const ReferenceConfig& config,
                                 const Stencil& st) {
  const auto& half = st.half();
  Eigen::MatrixXd out =
      Eigen::MatrixXd::Zero(mesh.nodes.size(), half.size());
  const double vor = voronoi_volume(config.basis);
  for (std::size_t t = 0; t < mesh.tris.size(); ++t) {
    const double w = 2.0 * vol.omega_T[t] / vor;
    for (int v = 0; v < 3; ++v) {
      const int node = mesh.tris[t].nodes[v];
      for (std::size_t h = 0; h < half.size(); ++h) {
        const Eigen::Vector2d rho =
            config.basis.position(st.direction(half[h]));
        out(node, h) += w * mesh.tris[t].grad[v].dot(rho);
      }
    }
  }
  return out;
}

double ConsistencySystem::residual(const ReconstructionSet& C) const {
  return (A * pack(C) - b).cwiseAbs().maxCoeff();
}

Eigen::VectorXd ConsistencySystem::pack(const ReconstructionSet& C) const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(A.cols());
  for (std::size_t s = 0; s < iface_sites.size(); ++s) {
    const Eigen::MatrixXd& M = C.at(iface_sites[s]);
    for (int i = 0; i < R; ++i)
      for (int j = 0; j < R; ++j) {
        const int c = col(static_cast<int>(s), i, j);
        if (c >= 0) x[c] = M(i, j);
      }
  }
  return x;
}

ReconstructionSet ConsistencySystem::unpack(const Eigen::VectorXd& x) const {
  ReconstructionSet out;
  for (const LatVec& s : iface_sites)
    out.C[s] = Eigen::MatrixXd::Zero(R, R);
  for (int c = 0; c < x.size(); ++c) {
    const Unknown& u = unknown_of_col[c];
    out.C[iface_sites[u.slot]](u.rho, u.sigma) = x[c];
  }
  return out;
}

ConsistencySystem assemble_system(const Decomposition& decomp,
                                  const Mesh& mesh,
                                  const EffectiveVolumes& vol,
                                  const ReferenceConfig& config,
                                  const Stencil& st, CouplingMethod method,
                                  bool reduce) {
  if (!config.defect_sites().empty())
    throw ConfigError(
        "consistency system must be assembled on the homogeneous "
        "configuration");

  ConsistencySystem sys;
  sys.method = method;
  sys.R = st.size();
  const int R = sys.R;
  const int outer = decomp.K + decomp.r;

  std::unordered_map<LatVec, int, LatVecHash> slot_of;
  for (int s : decomp.interface_sites) {
    slot_of[config.site(s)] = static_cast<int>(sys.iface_sites.size());
    sys.iface_sites.push_back(config.site(s));
  }
  sys.iface_omega.assign(sys.iface_sites.size(), 1.0);
  if (method == CouplingMethod::M2) sys.iface_omega = vol.omega_i;

  const int I = static_cast<int>(sys.iface_sites.size());
  sys.unknowns_total = I * R * R;

  // Column elimination: METHOD 2 zeroes parameters whose sigma leg leaves
  // the hybrid atom set.
  sys.col_of_unknown.assign(static_cast<std::size_t>(I) * R * R, -1);
  for (int s = 0; s < I; ++s)
    for (int i = 0; i < R; ++i)
      for (int j = 0; j < R; ++j) {
        if (method == CouplingMethod::M2 &&
            config.hop_from_core(sys.iface_sites[s] + st.direction(j)) >
                outer)
          continue;
        const std::size_t id =
            (static_cast<std::size_t>(s) * R + i) * R + j;
        sys.col_of_unknown[id] = static_cast<int>(sys.unknown_of_col.size());
        sys.unknown_of_col.push_back({s, i, j});
      }
  const int ncols = static_cast<int>(sys.unknown_of_col.size());

  struct Row {
    std::vector<std::pair<int, double>> coeffs;
    double rhs = 0.0;
    int half_dir = -1;  // -1 for energy rows
    ConsistencySystem::RowInfo info;
  };
  std::vector<Row> rows;

  // Energy rows: sum_sigma C(rho,sigma) sigma = rho, per component, in
  // integer lattice coordinates.
  for (int s = 0; s < I; ++s)
    for (int i = 0; i < R; ++i)
      for (int comp = 0; comp < 2; ++comp) {
        Row row;
        row.info = {true, sys.iface_sites[s], i, comp};
        for (int j = 0; j < R; ++j) {
          const int c = sys.col(s, i, j);
          if (c < 0) continue;
          const LatVec sig = st.direction(j);
          const double val = comp == 0 ? sig.q : sig.r;
          if (val != 0.0) row.coeffs.push_back({c, val});
        }
        const LatVec rho = st.direction(i);
        row.rhs = comp == 0 ? rho.q : rho.r;
        rows.push_back(std::move(row));
      }
  sys.energy_rows_assembled = static_cast<int>(rows.size());

  // Extended interface region l in L^i + R.
  std::set<LatVec> extended;
  for (const LatVec& l : sys.iface_sites)
    for (int d = 0; d < R; ++d) extended.insert(l + st.direction(d));

  const Eigen::MatrixXd cb = continuum_coeffs(mesh, vol, config, st);
  const auto& half = st.half();

  for (const LatVec& l : extended) {
    if (method == CouplingMethod::M2 && config.hop_from_core(l) > outer)
      continue;
    for (std::size_t h = 0; h < half.size(); ++h) {
      const int rho_idx = half[h];
      const int rho_opp = st.opposite(rho_idx);
      Row row;
      row.half_dir = static_cast<int>(h);
      row.info = {false, l, static_cast<int>(h), 0};

      // Interface part: + omega_{l-sigma} (C_{l-sigma; rho, sigma} -
      // C_{l-sigma; -rho, sigma}) summed over sigma with l-sigma interface,
      // minus the site's own full sum when l is an interface site.
      for (int j = 0; j < R; ++j) {
        const auto it = slot_of.find(l - st.direction(j));
        if (it == slot_of.end()) continue;
        const int s = it->second;
        const double w = sys.iface_omega[s];
        const int cp = sys.col(s, rho_idx, j);
        const int cm = sys.col(s, rho_opp, j);
        if (cp >= 0) row.coeffs.push_back({cp, w});
        if (cm >= 0) row.coeffs.push_back({cm, -w});
      }
      const auto self = slot_of.find(l);
      if (self != slot_of.end()) {
        const int s = self->second;
        const double w = sys.iface_omega[s];
        for (int j = 0; j < R; ++j) {
          const int cp = sys.col(s, rho_idx, j);
          const int cm = sys.col(s, rho_opp, j);
          if (cp >= 0) row.coeffs.push_back({cp, -w});
          if (cm >= 0) row.coeffs.push_back({cm, w});
        }
      }

      double rhs = -atomistic_coeff(config, decomp.K, l, st.direction(rho_idx));
      const int site = config.index_of(l);
      if (site >= 0) {
        const auto node = mesh.site_node.find(site);
        if (node != mesh.site_node.end()) rhs -= cb(node->second, h);
      }
      row.rhs = rhs;
      rows.push_back(std::move(row));
    }
  }
  sys.force_rows_assembled = static_cast<int>(rows.size()) -
                             sys.energy_rows_assembled;

  // Merge duplicate column entries, drop identically-zero rows.
  std::vector<Row> kept;
  kept.reserve(rows.size());
  for (auto& row : rows) {
    std::sort(row.coeffs.begin(), row.coeffs.end());
    std::vector<std::pair<int, double>> merged;
    for (const auto& [c, v] : row.coeffs) {
      if (!merged.empty() && merged.back().first == c)
        merged.back().second += v;
      else
        merged.push_back({c, v});
    }
    row.coeffs.clear();
    for (const auto& [c, v] : merged)
      if (std::abs(v) > 1e-13) row.coeffs.push_back({c, v});
    if (row.coeffs.empty() && reduce) {
      if (std::abs(row.rhs) > 1e-11) {
        std::ostringstream os;
        os << "consistency system trivially infeasible: empty row with rhs "
           << row.rhs << " at site (" << row.info.site.q << ","
           << row.info.site.r << ")";
        throw NumericsError(os.str());
      }
      continue;
    }
    kept.push_back(std::move(row));
  }

  // For each half direction the kept force rows sum to zero (the total
  // first variation telescopes); verify and drop one row per group.
  std::vector<int> drop(kept.size(), 0);
  if (reduce) {
    for (std::size_t h = 0; h < half.size(); ++h) {
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(ncols);
      double rhs_acc = 0.0;
      int last = -1;
      for (std::size_t r = 0; r < kept.size(); ++r) {
        if (kept[r].half_dir != static_cast<int>(h)) continue;
        for (const auto& [c, v] : kept[r].coeffs) acc[c] += v;
        rhs_acc += kept[r].rhs;
        last = static_cast<int>(r);
      }
      if (last >= 0 && acc.cwiseAbs().maxCoeff() <= 1e-9 &&
          std::abs(rhs_acc) <= 1e-9)
        drop[last] = 1;
    }
  }

  std::vector<Eigen::Triplet<double>> trips;
  std::vector<double> rhs;
  for (std::size_t r = 0; r < kept.size(); ++r) {
    if (drop[r]) continue;
    const int out_row = static_cast<int>(rhs.size());
    for (const auto& [c, v] : kept[r].coeffs)
      trips.emplace_back(out_row, c, v);
    rhs.push_back(kept[r].rhs);
    sys.row_info.push_back(kept[r].info);
  }
  sys.A.resize(static_cast<int>(rhs.size()), ncols);
  sys.A.setFromTriplets(trips.begin(), trips.end());
  sys.A.makeCompressed();
  sys.b = Eigen::Map<Eigen::VectorXd>(rhs.data(), rhs.size());
  return sys;
}

namespace {

// Minimum-norm solution of the consistent system A x = b through a sparse
// rank-revealing QR of A^T. Exact but slow; used as a fallback.
Eigen::VectorXd min_norm_solve_qr(const Eigen::SparseMatrix<double>& A,
                                  const Eigen::VectorXd& b) {
  Eigen::SparseMatrix<double> At = A.transpose();
  At.makeCompressed();
  Eigen::SparseQR<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> qr;
  qr.compute(At);
  if (qr.info() != Eigen::Success)
    throw NumericsError("sparse QR factorization failed");
  const int m = static_cast<int>(A.rows());
  const int rank = static_cast<int>(qr.rank());

  const Eigen::VectorXd pb = qr.colsPermutation().transpose() * b;
  Eigen::SparseMatrix<double> R1 =
      qr.matrixR().topLeftCorner(rank, rank);
  Eigen::VectorXd z1 =
      R1.transpose().triangularView<Eigen::Lower>().solve(
          Eigen::VectorXd(pb.head(rank)));

  // Rows beyond the numerical rank must be consistent.
  if (rank < m) {
    Eigen::SparseMatrix<double> R12 =
        qr.matrixR().topRows(rank).rightCols(m - rank);
    const Eigen::VectorXd tail =
        Eigen::VectorXd(pb.tail(m - rank)) -
        R12.transpose() * z1;
    if (tail.cwiseAbs().maxCoeff() >
        1e-8 * (1.0 + b.cwiseAbs().maxCoeff())) {
      int worst;
      tail.cwiseAbs().maxCoeff(&worst);
      std::ostringstream os;
      os << "consistency system infeasible: dropped-rank residual "
         << tail.cwiseAbs().maxCoeff() << " at reduced row " << worst;
      throw NumericsError(os.str());
    }
  }

  Eigen::VectorXd z = Eigen::VectorXd::Zero(A.cols());
  z.head(rank) = z1;
  Eigen::VectorXd x = qr.matrixQ() * z;

  // One refinement pass through the same factorization.
  const Eigen::VectorXd r = b - A * x;
  if (r.cwiseAbs().maxCoeff() > 1e-13 * (1.0 + b.cwiseAbs().maxCoeff())) {
    const Eigen::VectorXd pr = qr.colsPermutation().transpose() * r;
    Eigen::VectorXd dz1 =
        R1.transpose().triangularView<Eigen::Lower>().solve(
            Eigen::VectorXd(pr.head(rank)));
    Eigen::VectorXd dz = Eigen::VectorXd::Zero(A.cols());
    dz.head(rank) = dz1;
    x += qr.matrixQ() * dz;
  }
  return x;
}

// Fast path: x = A' (A A')^{-1} b with a Cholesky-type factorization of the
// small normal matrix plus iterative refinement. x lies in range(A'), so it
// is the minimum-norm solution whenever the refinement converges.
Eigen::VectorXd min_norm_solve(const Eigen::SparseMatrix<double>& A,
                               const Eigen::VectorXd& b) {
  const double scale = 1.0 + b.cwiseAbs().maxCoeff();
  Eigen::SparseMatrix<double> G = A * Eigen::SparseMatrix<double>(A.transpose());
  G.makeCompressed();
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(G);
  if (ldlt.info() == Eigen::Success) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(A.cols());
    Eigen::VectorXd r = b;
    for (int pass = 0; pass < 8; ++pass) {
      const Eigen::VectorXd w = ldlt.solve(r);
      if (!w.allFinite()) break;
      x += A.transpose() * w;
      r = b - A * x;
      if (r.cwiseAbs().maxCoeff() <= 1e-14 * scale) break;
    }
    if (r.cwiseAbs().maxCoeff() <= 1e-11 * scale) return x;
  }
  return min_norm_solve_qr(A, b);
}

}  // namespace

namespace {

[[noreturn]] void report_infeasible(const ConsistencySystem& sys,
                                    const Eigen::VectorXd& residual,
                                    const char* solver) {
  int worst = 0;
  const double r = residual.cwiseAbs().maxCoeff(&worst);
  std::ostringstream os;
  os << solver << ": residual " << r << " exceeds 1e-10 at row " << worst;
  if (worst < static_cast<int>(sys.row_info.size())) {
    const auto& info = sys.row_info[worst];
    os << " (" << (info.energy ? "energy" : "force") << " row, site ("
       << info.site.q << "," << info.site.r << "), dir " << info.dir << ")";
  }
  throw NumericsError(os.str());
}

}  // namespace

ReconstructionSet solve_min_norm(const ConsistencySystem& sys) {
  if (sys.A.rows() == 0) {
    return sys.unpack(Eigen::VectorXd::Zero(sys.A.cols()));
  }
  const Eigen::VectorXd x = min_norm_solve(sys.A, sys.b);
  const Eigen::VectorXd resid = sys.A * x - sys.b;
  if (resid.cwiseAbs().maxCoeff() > 1e-10)
    report_infeasible(sys, resid, "minimum-norm solve");
  return sys.unpack(x);
}

namespace {

// Crossover: restrict to a trial support, re-solve the primal by least
// squares and polish a matching dual certificate. When the support is the
// optimal face this produces exact zeros off the support, a constraint
// residual at rounding level and a certified duality gap near zero.
struct CrossoverResult {
  Eigen::VectorXd x;
  double certified_gap = std::numeric_limits<double>::infinity();
  double residual = std::numeric_limits<double>::infinity();
  bool ok = false;
};

CrossoverResult try_crossover(const Eigen::SparseMatrix<double>& A,
                              const Eigen::VectorXd& b,
                              const Eigen::VectorXd& x, double tau) {
  CrossoverResult out;
  std::vector<int> support;
  for (int i = 0; i < x.size(); ++i)
    if (std::abs(x[i]) > tau) support.push_back(i);
  if (support.empty() || support.size() >= static_cast<std::size_t>(x.size()))
    return out;

  Eigen::VectorXd xs;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  Eigen::SparseMatrix<double> As;

  // Shrink the trial face until the least-squares point keeps every sign
  // and carries no vanishing entries.
  for (int round = 0; round < 12; ++round) {
    As.resize(A.rows(), static_cast<int>(support.size()));
    std::vector<Eigen::Triplet<double>> trips;
    for (std::size_t sc = 0; sc < support.size(); ++sc)
      for (Eigen::SparseMatrix<double>::InnerIterator it(A, support[sc]); it;
           ++it)
        trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(sc),
                           it.value());
    As.setFromTriplets(trips.begin(), trips.end());
    As.makeCompressed();

    Eigen::SparseMatrix<double> G =
        Eigen::SparseMatrix<double>(As.transpose()) * As;
    const double reg = 1e-13 * (1.0 + G.diagonal().maxCoeff());
    for (int i = 0; i < G.rows(); ++i) G.coeffRef(i, i) += reg;
    G.makeCompressed();
    ldlt.compute(G);
    if (ldlt.info() != Eigen::Success) return out;

    xs = ldlt.solve(As.transpose() * b);
    for (int pass = 0; pass < 4 && xs.allFinite(); ++pass)
      xs += ldlt.solve(As.transpose() * (b - As * xs));
    if (!xs.allFinite()) return out;
    if ((As * xs - b).cwiseAbs().maxCoeff() >
        1e-11 * (1.0 + b.cwiseAbs().maxCoeff()))
      return out;  // the face lost feasibility: trial support too small

    const double xs_max = xs.cwiseAbs().maxCoeff();
    std::vector<int> keep;
    for (std::size_t sc = 0; sc < support.size(); ++sc) {
      const double sign = x[support[sc]] > 0 ? 1.0 : -1.0;
      if (xs[sc] * sign > 1e-9 * xs_max) keep.push_back(support[sc]);
    }
    if (keep.size() == support.size()) break;
    if (keep.empty()) return out;
    support.swap(keep);
  }

  // Dual polish on the settled face: A_S' y = sign(x_S).
  Eigen::VectorXd sign(support.size());
  for (std::size_t sc = 0; sc < support.size(); ++sc)
    sign[sc] = x[support[sc]] > 0 ? 1.0 : -1.0;
  const Eigen::VectorXd w = ldlt.solve(sign);
  if (!w.allFinite()) return out;
  Eigen::VectorXd y = As * w;
  for (int pass = 0; pass < 3; ++pass)
    y += As * ldlt.solve(sign - Eigen::VectorXd(As.transpose() * y));
  if ((Eigen::VectorXd(As.transpose() * y) - sign).cwiseAbs().maxCoeff() >
      1e-9)
    return out;
  const double viol = std::max(
      0.0, (A.transpose() * y).cwiseAbs().maxCoeff() - 1.0);

  out.x = Eigen::VectorXd::Zero(x.size());
  for (std::size_t sc = 0; sc < support.size(); ++sc)
    out.x[support[sc]] = xs[sc];
  out.residual = (A * out.x - b).cwiseAbs().maxCoeff();
  const double l1 = out.x.lpNorm<1>();
  out.certified_gap = l1 - b.dot(y) / (1.0 + viol);
  out.ok = true;
  return out;
}

}  // namespace

ReconstructionSet solve_l1(const ConsistencySystem& sys) {
  if (sys.A.rows() == 0)
    return sys.unpack(Eigen::VectorXd::Zero(sys.A.cols()));

  const Eigen::VectorXd feasible = min_norm_solve(sys.A, sys.b);
  const L1Result lp = min_l1(sys.A, sys.b, feasible);
  // The interior point must at least identify the optimal face; crossover
  // below turns that into a certified solution.
  const double face_tol =
      std::max(1e-9, 1e-6 * std::max(1.0, std::abs(lp.objective)));
  if (!lp.converged && lp.gap > face_tol)
    throw NumericsError("l1 interior-point solver did not converge");

  Eigen::VectorXd x = lp.x;
  const double xmax = std::max(1.0, x.cwiseAbs().maxCoeff());
  const double gap_tol = std::max(1e-9, 1e-9 * std::abs(lp.objective));

  bool certified = lp.converged;
  for (double tau : {1e-7 * xmax, 1e-8 * xmax, 1e-6 * xmax, 1e-5 * xmax}) {
    const CrossoverResult cr = try_crossover(sys.A, sys.b, lp.x, tau);
    if (cr.ok && cr.residual <= 1e-11 && cr.certified_gap <= gap_tol) {
      x = cr.x;
      certified = true;
      break;
    }
  }
  if (!certified)
    throw NumericsError(
        "l1 solve: crossover failed to certify optimality within 1e-9");

  // Final projection onto the constraints through the full system.
  double resid = (sys.A * x - sys.b).cwiseAbs().maxCoeff();
  if (resid > 1e-12) {
    const Eigen::VectorXd corr = min_norm_solve(sys.A, sys.b - sys.A * x);
    x += corr;
    resid = (sys.A * x - sys.b).cwiseAbs().maxCoeff();
  }
  if (resid > 1e-10)
    report_infeasible(sys, sys.A * x - sys.b, "l1 solve");
  return sys.unpack(x);
}

double energy_row_residual(const Eigen::MatrixXd& C, const Stencil& st) {
  double worst = 0.0;
  for (int i = 0; i < st.size(); ++i) {
    Eigen::Vector2d acc = Eigen::Vector2d::Zero();
    for (int j = 0; j < st.size(); ++j) {
      const LatVec s = st.direction(j);
      acc += C(i, j) * Eigen::Vector2d(s.q, s.r);
    }
    const LatVec r = st.direction(i);
    worst = std::max(worst,
                     (acc - Eigen::Vector2d(r.q, r.r)).cwiseAbs().maxCoeff());
  }
  return worst;
}

void write_system(const ConsistencySystem& sys, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open system dump file " + path);
  out.precision(17);
  out << "# rows cols nnz\n"
      << sys.A.rows() << " " << sys.A.cols() << " " << sys.A.nonZeros()
      << "\n# row col value\n";
  for (int k = 0; k < sys.A.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(sys.A, k); it; ++it)
      out << it.row() << " " << it.col() << " " << it.value() << "\n";
  out << "# rhs\n";
  for (int i = 0; i < sys.b.size(); ++i) out << sys.b[i] << "\n";
}

void write_reconstruction(const ReconstructionSet& C, const Stencil& st,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open coefficient dump file " + path);
  out.precision(17);
  std::vector<LatVec> sites;
  for (const auto& [site, m] : C.C) sites.push_back(site);
  std::sort(sites.begin(), sites.end());
  out << "# site q r  (site enumerates the lines below)\n";
  for (std::size_t s = 0; s < sites.size(); ++s)
    out << "# " << s << " " << sites[s].q << " " << sites[s].r << "\n";
  out << "# site rho_idx sigma_idx value\n";
  for (std::size_t s = 0; s < sites.size(); ++s) {
    const Eigen::MatrixXd& M = C.C.at(sites[s]);
    for (int i = 0; i < st.size(); ++i)
      for (int j = 0; j < st.size(); ++j)
        if (M(i, j) != 0.0)
          out << s << " " << i << " " << j << " " << M(i, j) << "\n";
  }
}

namespace {

// Height change of each hop-1 direction, used by the flat half-plane system.
int dir_height(LatVec d) { return d.r; }

}  // namespace

FlatNNSystem assemble_flat_nn_system() {
  const Stencil st = stencil(1);
  const int R = 6;
  const Eigen::MatrixXd I6 = Eigen::MatrixXd::Identity(R, R);
  const Eigen::MatrixXd Cc = continuum_reconstruction_nnn(st);

  // Reconstruction matrix by height: identity below the interface, the
  // Cauchy-Born matrix above, the unknown at height 0.
  const auto known = [&](int h) -> const Eigen::MatrixXd* {
    if (h < 0) return &I6;
    if (h > 0) return &Cc;
    return nullptr;
  };

  std::vector<Eigen::VectorXd> lhs;
  std::vector<double> rhs;
  for (int hgt = -2; hgt <= 2; ++hgt) {
    for (int hd = 0; hd < 3; ++hd) {
      const int rho = st.half()[hd];
      const int rop = st.opposite(rho);
      Eigen::VectorXd row = Eigen::VectorXd::Zero(R * R);
      double r = 0.0;
      // + (C_{l-sigma; rho, sigma} - C_{l-sigma; -rho, sigma})
      for (int j = 0; j < R; ++j) {
        const int src = hgt - dir_height(st.direction(j));
        if (const Eigen::MatrixXd* M = known(src)) {
          r -= (*M)(rho, j) - (*M)(rop, j);
        } else {
          row[rho * R + j] += 1.0;
          row[rop * R + j] -= 1.0;
        }
      }
      // - sum_sigma (C_{l; rho, sigma} - C_{l; -rho, sigma})
      if (const Eigen::MatrixXd* M = known(hgt)) {
        for (int j = 0; j < R; ++j) r += (*M)(rho, j) - (*M)(rop, j);
      } else {
        for (int j = 0; j < R; ++j) {
          row[rho * R + j] -= 1.0;
          row[rop * R + j] += 1.0;
        }
      }
      lhs.push_back(row);
      rhs.push_back(r);
    }
  }
  // Energy rows for the unknown interface matrix.
  for (int i = 0; i < R; ++i)
    for (int comp = 0; comp < 2; ++comp) {
      Eigen::VectorXd row = Eigen::VectorXd::Zero(R * R);
      for (int j = 0; j < R; ++j) {
        const LatVec s = st.direction(j);
        row[i * R + j] = comp == 0 ? s.q : s.r;
      }
      const LatVec r = st.direction(i);
      lhs.push_back(row);
      rhs.push_back(comp == 0 ? r.q : r.r);
    }

  FlatNNSystem sys;
  sys.A.resize(static_cast<int>(lhs.size()), R * R);
  sys.b.resize(static_cast<int>(rhs.size()));
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    sys.A.row(static_cast<int>(i)) = lhs[i].transpose();
    sys.b[static_cast<int>(i)] = rhs[i];
  }
  return sys;
}

Eigen::MatrixXd flat_nn_qnl_matrix() {
  const Stencil st = stencil(1);
  const Eigen::MatrixXd Cc = continuum_reconstruction_nnn(st);
  Eigen::MatrixXd C = Eigen::MatrixXd::Identity(6, 6);
  for (int i = 0; i < 6; ++i)
    if (dir_height(st.direction(i)) > 0) C.row(i) = Cc.row(i);
  return C;
}

}  // namespace grac
