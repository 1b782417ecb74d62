#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <string>
#include <unordered_map>
#include <vector>

#include "grac/geometry.hpp"
#include "grac/lattice.hpp"
#include "grac/potential.hpp"

namespace grac {

// Reconstruction parameters per interface site, keyed by lattice coordinate
// so they transfer between the homogeneous and the defected configuration.
struct ReconstructionSet {
  std::unordered_map<LatVec, Eigen::MatrixXd, LatVecHash> C;

  const Eigen::MatrixXd& at(LatVec site) const { return C.at(site); }
  bool contains(LatVec site) const { return C.count(site) > 0; }
};

// C = identity at every interface site: the uncorrected coupling.
ReconstructionSet identity_reconstruction(const Decomposition& decomp,
                                          const ReferenceConfig& config,
                                          const Stencil& st);

// The analytic Cauchy-Born reconstruction matrix for the canonical
// triangulation: 6x6 circulant for hop radius 1, 18x18 for hop radius 2.
Eigen::MatrixXd continuum_reconstruction_nnn(const Stencil& st);

// c^a_rho(l) = [l - rho in core] - [l + rho in core].
int atomistic_coeff(const ReferenceConfig& config, int K, LatVec l,
                    LatVec rho);

// Per-node coefficients c^c over the half stencil:
// c^c(node, h) = sum_{T owning node} 2 (omega_T / |vor|) grad(phi) . rho_h.
Eigen::MatrixXd continuum_coeffs(const Mesh& mesh, const EffectiveVolumes& vol,
                                 const ReferenceConfig& config,
                                 const Stencil& st);

// The geometric consistency equations over the unknown reconstruction
// parameters: energy rows (exactness on homogeneous deformations) followed
// by force rows (vanishing first variation for every potential).
struct ConsistencySystem {
  CouplingMethod method = CouplingMethod::M1;
  int R = 0;                       // stencil size
  std::vector<LatVec> iface_sites; // unknown block per interface site
  std::vector<double> iface_omega;

  // Unknown (slot, rho, sigma) -> kept column (-1 when eliminated).
  std::vector<int> col_of_unknown;
  struct Unknown { int slot, rho, sigma; };
  std::vector<Unknown> unknown_of_col;

  Eigen::SparseMatrix<double> A;   // reduced rows x kept columns
  Eigen::VectorXd b;

  struct RowInfo {
    bool energy = false;
    LatVec site;   // interface site (energy) or force-balance site
    int dir = 0;   // stencil index (energy) or half-stencil index (force)
    int comp = 0;  // spatial component for energy rows
  };
  std::vector<RowInfo> row_info;   // aligned with the rows of A

  // Assembled (pre-reduction) counts, for the bookkeeping identities.
  int energy_rows_assembled = 0;
  int force_rows_assembled = 0;
  int unknowns_total = 0;          // I * R^2 before elimination

  int col(int slot, int rho, int sigma) const {
    return col_of_unknown[(static_cast<std::size_t>(slot) * R + rho) * R +
                          sigma];
  }
  // Max-norm residual of A vec(C) = b for a given reconstruction set.
  double residual(const ReconstructionSet& C) const;
  Eigen::VectorXd pack(const ReconstructionSet& C) const;
  ReconstructionSet unpack(const Eigen::VectorXd& x) const;
};

// `reduce` drops identically-zero rows and one verified-redundant force row
// per half direction; tests that reconstruct full variations disable it.
ConsistencySystem assemble_system(const Decomposition& decomp,
                                  const Mesh& mesh,
                                  const EffectiveVolumes& vol,
                                  const ReferenceConfig& config,
                                  const Stencil& st, CouplingMethod method,
                                  bool reduce = true);

// Minimum Euclidean norm solution of the (consistent, underdetermined)
// system via sparse orthogonal factorization of A^T.
ReconstructionSet solve_min_norm(const ConsistencySystem& sys);

// Minimum l1 solution via the interior-point solver, followed by a support
// purification pass that restores exact zeros.
ReconstructionSet solve_l1(const ConsistencySystem& sys);

// Energy patch-test row residual max_rho |sum_sigma C(rho,sigma) sigma - rho|
// for a single reconstruction matrix, in lattice coordinates.
double energy_row_residual(const Eigen::MatrixXd& C, const Stencil& st);

// Plain-text dumps: sparse triplets plus rhs block, and solved matrices.
void write_system(const ConsistencySystem& sys, const std::string& path);
void write_reconstruction(const ReconstructionSet& C, const Stencil& st,
                          const std::string& path);

// Half-plane nearest-neighbour consistency system reduced by translation
// invariance along the interface: the single interface layer sits at height
// 0, cores below, Cauchy-Born site potentials above. Unknowns are the 36
// entries of the interface matrix.
struct FlatNNSystem {
  Eigen::MatrixXd A;  // rows x 36, dense (tiny)
  Eigen::VectorXd b;
};
FlatNNSystem assemble_flat_nn_system();

// The interface matrix of the quasi-nonlocal coupling on that geometry:
// identity rows toward the atomistic side, Cauchy-Born rows toward the
// continuum side.
Eigen::MatrixXd flat_nn_qnl_matrix();

// Ghost-force and interface-energy patch-test report for a coupled energy.
struct PatchTestSample {
  Eigen::Matrix2d F;
  double ghost_force_max = 0.0;      // max |dE^ac| over free dofs at y = F x
  double ghost_force_outside = 0.0;  // same, restricted outside L^i + R
  double force_scale = 0.0;          // sum_rho |grad_rho V(F R)|
  double energy_mismatch = 0.0;      // max_l |Phi^i_l - Phi_l| at y = F x
  bool force_pass = false;
  bool energy_pass = false;
};

struct PatchTestReport {
  std::vector<PatchTestSample> samples;
  bool all_pass() const;
};

// Evaluates the force and energy patch tests at F0, 1.03 F0 and two seeded
// strains within 5% of F0 on the homogeneous configuration.
PatchTestReport verify_patch_tests(const ReconstructionSet& C,
                                   const Decomposition& decomp,
                                   const Mesh& mesh,
                                   const EffectiveVolumes& vol,
                                   const ReferenceConfig& config,
                                   const Stencil& st, const EAMParams& params,
                                   double kappa, unsigned seed = 1234);

}  // namespace grac
