#include "grac/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "grac/error.hpp"

namespace grac {

LatticeBasis::LatticeBasis() {
  A << 1.0, std::cos(M_PI / 3.0), 0.0, std::sin(M_PI / 3.0);
}

LatticeBasis::LatticeBasis(const Eigen::Matrix2d& basis) : A(basis) {
  if (A.determinant() <= 0.0)
    throw ConfigError("lattice basis must have positive determinant");
}

Stencil Stencil::make(int hop_radius) {
  if (hop_radius != 1 && hop_radius != 2) {
    std::ostringstream os;
    os << "unsupported stencil hop radius " << hop_radius;
    throw ConfigError(os.str());
  }
  Stencil st;
  st.hop_radius_ = hop_radius;

  // Nearest-neighbour directions a_1..a_6, successive 60-degree rotations of
  // a_1 = (1,0); in axial coordinates the rotation is (q,r) -> (-r, q+r).
  std::vector<LatVec> nn(6);
  nn[0] = {1, 0};
  for (int j = 1; j < 6; ++j) nn[j] = {-nn[j - 1].r, nn[j - 1].q + nn[j - 1].r};

  st.dirs_ = nn;
  if (hop_radius == 2) {
    // Second shell interleaved as 2*a_j, a_j + a_{j+1} for j = 1..6.
    for (int j = 0; j < 6; ++j) {
      st.dirs_.push_back(2 * nn[j]);
      st.dirs_.push_back(nn[j] + nn[(j + 1) % 6]);
    }
  }

  const int n = st.size();
  for (int i = 0; i < n; ++i) st.lookup_[st.dirs_[i]] = i;
  st.opp_.resize(n);
  for (int i = 0; i < n; ++i) st.opp_[i] = st.lookup_.at(-st.dirs_[i]);
  // Half stencil: first member of each +/- pair in listing order.
  std::vector<bool> seen(n, false);
  for (int i = 0; i < n; ++i) {
    if (seen[i]) continue;
    st.half_.push_back(i);
    seen[i] = seen[st.opp_[i]] = true;
  }
  return st;
}

int Stencil::index_of(LatVec d) const {
  auto it = lookup_.find(d);
  return it == lookup_.end() ? -1 : it->second;
}

namespace {

int hop_to_row(LatVec v, int lo, int hi) {
  // min over t in [lo,hi] of hex_norm(v - t*e1); |q-t| + |q+r-t| is minimal
  // on [min(q,q+r), max(q,q+r)], so clamping its left end to [lo,hi] hits
  // the constrained minimizer.
  int t = std::clamp(std::min(v.q, v.q + v.r), lo, hi);
  return hex_norm({v.q - t, v.r});
}

double hop_to_row(double q, double r, double lo, double hi) {
  double t = std::clamp(std::min(q, q + r), lo, hi);
  return hex_norm(q - t, r);
}

}  // namespace

int ReferenceConfig::index_of(LatVec v) const {
  auto it = index_.find(v);
  return it == index_.end() ? -1 : it->second;
}

bool ReferenceConfig::is_defect(LatVec v) const {
  return defect_index_.count(v) > 0;
}

int ReferenceConfig::hop_from_core(LatVec v) const {
  return hop_to_row(v, row_lo_, row_hi_);
}

double ReferenceConfig::hop_from_core(double q, double r) const {
  return hop_to_row(q, r, row_lo_, row_hi_);
}

ReferenceConfig ReferenceConfig::build(int k, int layers, bool remove) {
  if (layers < 1) throw ConfigError("layer count must be >= 1");
  if (k < 0) throw ConfigError("defect size k must be >= 0");

  ReferenceConfig cfg;
  cfg.layers_ = layers;

  // Removed sites along the e1 row. The even-k convention keeps exactly k
  // contiguous sites ({0, e1} for k = 2); the odd case is symmetric about 0.
  if (k > 0) {
    int lo = (k % 2 == 0) ? -(k / 2 - 1) : -(k - 1) / 2;
    int hi = (k % 2 == 0) ? k / 2 : (k - 1) / 2;
    if (remove)
      for (int t = lo; t <= hi; ++t) cfg.defect_.push_back({t, 0});
    cfg.row_lo_ = lo;
    cfg.row_hi_ = hi;
  } else {
    cfg.row_lo_ = cfg.row_hi_ = 0;
  }
  for (int i = 0; i < static_cast<int>(cfg.defect_.size()); ++i)
    cfg.defect_index_[cfg.defect_[i]] = i;

  if (k > 0 && layers < 2)
    throw ConfigError(
        "defect does not fit: need at least two layers around the removed row");

  for (int q = cfg.row_lo_ - layers; q <= cfg.row_hi_ + layers; ++q) {
    for (int r = -layers; r <= layers; ++r) {
      LatVec v{q, r};
      if (hop_to_row(v, cfg.row_lo_, cfg.row_hi_) > layers) continue;
      if (cfg.defect_index_.count(v)) continue;
      cfg.sites_.push_back(v);
    }
  }
  std::sort(cfg.sites_.begin(), cfg.sites_.end());
  cfg.hops_.resize(cfg.sites_.size());
  for (int i = 0; i < cfg.num_sites(); ++i) {
    cfg.index_[cfg.sites_[i]] = i;
    cfg.hops_[i] = cfg.hop_from_core(cfg.sites_[i]);
  }
  return cfg;
}

ReferenceConfig build_reference_config(int k, int layers) {
  return ReferenceConfig::build(k, layers, true);
}

ReferenceConfig build_homogeneous_config(int k, int layers) {
  return ReferenceConfig::build(k, layers, false);
}

Stencil stencil(int hop_radius) { return Stencil::make(hop_radius); }

std::vector<Difference> finite_difference_stencil(const SiteField& v,
                                                  const ReferenceConfig& config,
                                                  const Stencil& st, int site) {
  std::vector<Difference> out;
  out.reserve(st.size());
  const LatVec l = config.site(site);
  for (int d = 0; d < st.size(); ++d) {
    const LatVec n = l + st.direction(d);
    const int j = config.index_of(n);
    if (j < 0) {
      if (config.is_defect(n)) continue;  // vacancy: interaction absent
      std::ostringstream os;
      os << "missing neighbour of site (" << l.q << "," << l.r
         << ") in direction (" << st.direction(d).q << ","
         << st.direction(d).r << ")";
      throw ConfigError(os.str());
    }
    out.push_back({d, v[j] - v[site]});
  }
  return out;
}

double d2nn_sq(const SiteField& v, const ReferenceConfig& config, int site) {
  static const LatVec b[3] = {{1, 0}, {0, 1}, {-1, 1}};
  const LatVec l = config.site(site);
  double sum = 0.0;
  for (const LatVec& d : b) {
    if (config.is_defect(l + d) || config.is_defect(l - d)) continue;
    const int ip = config.index_of(l + d);
    const int im = config.index_of(l - d);
    if (ip < 0 || im < 0) {
      std::ostringstream os;
      os << "second difference at site (" << l.q << "," << l.r
         << ") reaches outside the configuration";
      throw ConfigError(os.str());
    }
    sum += (v[ip] - 2.0 * v[site] + v[im]).squaredNorm();
  }
  return sum;
}

double voronoi_volume(const LatticeBasis& basis) { return basis.cell_volume(); }

double discrete_h1_norm(const SiteField& v, const ReferenceConfig& config,
                        const Stencil& st) {
  double sum = 0.0;
  for (int i = 0; i < config.num_sites(); ++i) {
    const LatVec l = config.site(i);
    for (int d = 0; d < st.size(); ++d) {
      const int j = config.index_of(l + st.direction(d));
      if (j < 0) continue;
      const double len2 =
          config.basis.position(st.direction(d)).squaredNorm();
      sum += (v[j] - v[i]).squaredNorm() / len2;
    }
  }
  return std::sqrt(sum);
}

}  // namespace grac
