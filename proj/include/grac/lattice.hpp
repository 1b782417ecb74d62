#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <unordered_map>
#include <vector>

namespace grac {

// Integer lattice coordinate (axial coordinates of the triangular lattice).
struct LatVec {
  int q = 0;
  int r = 0;

  friend LatVec operator+(LatVec a, LatVec b) { return {a.q + b.q, a.r + b.r}; }
  friend LatVec operator-(LatVec a, LatVec b) { return {a.q - b.q, a.r - b.r}; }
  friend LatVec operator-(LatVec a) { return {-a.q, -a.r}; }
  friend LatVec operator*(int s, LatVec a) { return {s * a.q, s * a.r}; }
  friend bool operator==(LatVec a, LatVec b) { return a.q == b.q && a.r == b.r; }
  friend bool operator<(LatVec a, LatVec b) {
    return a.q != b.q ? a.q < b.q : a.r < b.r;
  }
};

struct LatVecHash {
  std::size_t operator()(LatVec v) const {
    return std::hash<std::int64_t>()(
        (static_cast<std::int64_t>(v.q) << 32) ^
        static_cast<std::uint32_t>(v.r));
  }
};

// Graph distance to the origin on the nearest-neighbour triangular graph.
inline int hex_norm(LatVec v) {
  return (std::abs(v.q) + std::abs(v.r) + std::abs(v.q + v.r)) / 2;
}

// Continuous extension of hex_norm; needed for mesh-band classification.
inline double hex_norm(double q, double r) {
  return (std::abs(q) + std::abs(r) + std::abs(q + r)) / 2.0;
}

struct LatticeBasis {
  Eigen::Matrix2d A;

  LatticeBasis();  // the triangular basis [[1, cos(pi/3)], [0, sin(pi/3)]]
  explicit LatticeBasis(const Eigen::Matrix2d& basis);

  Eigen::Vector2d position(LatVec v) const {
    return A * Eigen::Vector2d(v.q, v.r);
  }
  double cell_volume() const { return A.determinant(); }
};

// Interaction range as an ordered list of lattice directions with +/- pairing.
class Stencil {
public:
  static Stencil make(int hop_radius);

  int hop_radius() const { return hop_radius_; }
  int size() const { return static_cast<int>(dirs_.size()); }
  const std::vector<LatVec>& directions() const { return dirs_; }
  LatVec direction(int i) const { return dirs_[i]; }
  const std::vector<int>& half() const { return half_; }
  // Index of -dirs_[i].
  int opposite(int i) const { return opp_[i]; }
  // Index of a direction, -1 if absent.
  int index_of(LatVec d) const;

private:
  int hop_radius_ = 0;
  std::vector<LatVec> dirs_;
  std::vector<int> half_;
  std::vector<int> opp_;
  std::unordered_map<LatVec, int, LatVecHash> lookup_;
};

// Defected triangular lattice: an elongated hexagonal point cloud of
// `layers` hop-layers around the defect row, with the defect sites removed.
class ReferenceConfig {
public:
  LatticeBasis basis;

  const std::vector<LatVec>& sites() const { return sites_; }
  int num_sites() const { return static_cast<int>(sites_.size()); }
  LatVec site(int i) const { return sites_[i]; }
  Eigen::Vector2d position(int i) const { return basis.position(sites_[i]); }

  // Site index, or -1 when the coordinate is absent (removed or outside).
  int index_of(LatVec v) const;
  bool is_defect(LatVec v) const;

  const std::vector<LatVec>& defect_sites() const { return defect_; }
  int defect_size() const { return static_cast<int>(defect_.size()); }
  int layers() const { return layers_; }

  // Hop distance from the defect row (valid for arbitrary coordinates).
  int hop_from_core(LatVec v) const;
  double hop_from_core(double q, double r) const;
  // Cached hop distance of site i.
  int site_hop(int i) const { return hops_[i]; }

  // Row extent of the hop-metric centers, in units of e1.
  int row_lo() const { return row_lo_; }
  int row_hi() const { return row_hi_; }

  friend ReferenceConfig build_reference_config(int k, int layers);
  friend ReferenceConfig build_homogeneous_config(int k, int layers);

private:
  static ReferenceConfig build(int k, int layers, bool remove);

  std::vector<LatVec> sites_;
  std::vector<LatVec> defect_;
  std::vector<int> hops_;
  std::unordered_map<LatVec, int, LatVecHash> index_;
  std::unordered_map<LatVec, int, LatVecHash> defect_index_;
  int layers_ = 0;
  int row_lo_ = 0;
  int row_hi_ = 0;
};

// k = number of removed atoms along the e1 row (0 allowed), layers = hexagon
// layer count around the row.
ReferenceConfig build_reference_config(int k, int layers);

// Same domain and hop metric as build_reference_config(k, layers) but with
// no sites removed: the homogeneous configuration of the patch tests.
ReferenceConfig build_homogeneous_config(int k, int layers);

Stencil stencil(int hop_radius);

using SiteField = std::vector<Eigen::Vector2d>;

// One finite-difference entry D_rho v(l) together with its stencil slot.
struct Difference {
  int dir = 0;           // index into Stencil::directions()
  Eigen::Vector2d value; // v(l + rho) - v(l)
};

// All resolvable differences at site l; directions into the defect are
// dropped (absent interaction), any other missing neighbour throws.
std::vector<Difference> finite_difference_stencil(const SiteField& v,
                                                  const ReferenceConfig& config,
                                                  const Stencil& st, int site);

// Sum of squared second differences along the three nearest-neighbour
// directions a1, a2, a3.
double d2nn_sq(const SiteField& v, const ReferenceConfig& config, int site);

double voronoi_volume(const LatticeBasis& basis);

// Discrete H1 seminorm; sums run over resolvable site pairs only.
double discrete_h1_norm(const SiteField& v, const ReferenceConfig& config,
                        const Stencil& st);

}  // namespace grac
