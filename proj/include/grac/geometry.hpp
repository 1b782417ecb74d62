#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <unordered_map>
#include <vector>

#include "grac/lattice.hpp"

namespace grac {

enum class CouplingMethod { M1, M2 };

// Convex polygon utilities (counter-clockwise vertex lists).
using Polygon = std::vector<Eigen::Vector2d>;
double polygon_area(const Polygon& p);
// Intersection of a polygon with a convex clip polygon.
Polygon clip_convex(const Polygon& subject, const Polygon& clip);

// Region membership of a lattice site in the coupled discretization.
enum class Region { Core, Interface, ContinuumAtom, Far };

// Partition of the site cloud into core / interface / atom-coincident
// continuum layers, all measured in hop distance from the defect row.
struct Decomposition {
  int K = 0;          // core radius (layers around the defect row)
  int r = 0;          // interaction hop radius; interface is r layers
  int N = 0;          // total domain radius
  std::vector<int> core_sites;
  std::vector<int> interface_sites;
  std::vector<int> continuum_atom_sites;
  std::vector<Region> region;  // per config site

  bool in_core_region(int hop) const { return hop <= K; }
  bool in_interface(int hop) const { return hop > K && hop <= K + r; }
  // Innermost layer index 1 .. r for an interface site.
  int interface_layer(int hop) const { return hop - K; }
};

Decomposition decompose(const ReferenceConfig& config, int K,
                        const Stencil& st);

// The elongated hexagon through hop radius s around the defect row.
Polygon ring_polygon(const ReferenceConfig& config, double s);

// The fixed regular Voronoi hexagon of a lattice site.
Polygon voronoi_hexagon(const ReferenceConfig& config, LatVec site);

struct MeshNode {
  Eigen::Vector2d pos;
  int site = -1;     // config site index for atom-coincident nodes
  bool boundary = false;
};

struct MeshTri {
  std::array<int, 3> nodes;
  double area = 0.0;
  std::array<Eigen::Vector2d, 3> grad;  // P1 basis gradients
};

struct Mesh {
  std::vector<MeshNode> nodes;
  std::vector<MeshTri> tris;
  std::unordered_map<int, int> site_node;  // config site index -> node index

  Eigen::Vector2d barycenter(int t) const {
    const auto& tri = tris[t];
    return (nodes[tri.nodes[0]].pos + nodes[tri.nodes[1]].pos +
            nodes[tri.nodes[2]].pos) / 3.0;
  }
  double diameter(int t) const;
};

// Graded triangulation of the continuum annulus: canonically triangulated
// atom-coincident band followed by hexagonal rings with size
// h(x) ~ (|x|/K)^{3/2}, Dirichlet ring on the outermost hexagon.
Mesh build_mesh(const Decomposition& decomp, const ReferenceConfig& config);

struct EffectiveVolumes {
  CouplingMethod method = CouplingMethod::M1;
  std::vector<double> omega_i;  // per interface site (decomp ordering)
  std::vector<double> omega_T;  // per mesh triangle
};

EffectiveVolumes effective_volumes(const Decomposition& decomp,
                                   const Mesh& mesh,
                                   const ReferenceConfig& config,
                                   CouplingMethod method);

// Joint value layout over atomistic sites and finite element nodes; shared
// atom-coincident nodes are single-stored.
struct DofMap {
  int ndof = 0;
  std::vector<int> site_dof;   // per config site, -1 outside the hybrid set
  std::vector<int> node_dof;   // per mesh node
  std::vector<bool> dirichlet; // per dof
  std::vector<int> free_dofs;
  std::vector<Eigen::Vector2d> dof_pos;
};

DofMap build_dof_map(const Decomposition& decomp, const Mesh& mesh,
                     const ReferenceConfig& config);

enum class StateKind { Displacement, Deformation };

struct HybridState {
  Eigen::VectorXd values;  // 2 * ndof, (x,y) interleaved per dof
  StateKind kind = StateKind::Deformation;
  Eigen::Matrix2d applied_strain = Eigen::Matrix2d::Identity();

  Eigen::Vector2d at(int dof) const { return values.segment<2>(2 * dof); }
  void set(int dof, const Eigen::Vector2d& v) {
    values.segment<2>(2 * dof) = v;
  }
};

// The homogeneous deformation y = F x on every dof.
HybridState uniform_state(const DofMap& dofs, const Eigen::Matrix2d& F);

// Nodal interpolation: copies site values, evaluates the canonical P1
// interpolant of y (given on `source`) at non-coincident node positions.
HybridState interpolate(const DofMap& dofs, const Mesh& mesh,
                        const ReferenceConfig& config, const SiteField& y,
                        const ReferenceConfig& source);

// Plain-text dump: "id x y atom boundary" per node, "id n1 n2 n3" per triangle.
void write_mesh(const Mesh& mesh, const std::string& path);

}  // namespace grac
