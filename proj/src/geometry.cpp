#include "grac/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "grac/error.hpp"

namespace grac {

double polygon_area(const Polygon& p) {
  double a = 0.0;
  const int n = static_cast<int>(p.size());
  for (int i = 0; i < n; ++i) {
    const auto& u = p[i];
    const auto& v = p[(i + 1) % n];
    a += u.x() * v.y() - v.x() * u.y();
  }
  return 0.5 * a;
}

Polygon clip_convex(const Polygon& subject, const Polygon& clip) {
  constexpr double snap = 1e-12;
  Polygon out = subject;
  const int m = static_cast<int>(clip.size());
  for (int e = 0; e < m && !out.empty(); ++e) {
    const Eigen::Vector2d a = clip[e];
    const Eigen::Vector2d b = clip[(e + 1) % m];
    const Eigen::Vector2d d = b - a;
    auto inside = [&](const Eigen::Vector2d& p) {
      return d.x() * (p.y() - a.y()) - d.y() * (p.x() - a.x()) >= -snap;
    };
    Polygon next;
    const int n = static_cast<int>(out.size());
    for (int i = 0; i < n; ++i) {
      const Eigen::Vector2d& cur = out[i];
      const Eigen::Vector2d& prv = out[(i + n - 1) % n];
      const bool cin = inside(cur), pin = inside(prv);
      if (cin != pin) {
        const double fc = d.x() * (cur.y() - a.y()) - d.y() * (cur.x() - a.x());
        const double fp = d.x() * (prv.y() - a.y()) - d.y() * (prv.x() - a.x());
        const double t = fp / (fp - fc);
        next.push_back(prv + t * (cur - prv));
      }
      if (cin) next.push_back(cur);
    }
    out.swap(next);
  }
  return out;
}

Polygon ring_polygon(const ReferenceConfig& config, double s) {
  const Eigen::Vector2d ehi =
      config.basis.position(LatVec{config.row_hi(), 0});
  const Eigen::Vector2d elo =
      config.basis.position(LatVec{config.row_lo(), 0});
  std::array<Eigen::Vector2d, 6> c;
  LatVec a{1, 0};
  for (int j = 0; j < 6; ++j) {
    c[j] = config.basis.position(a);
    a = LatVec{-a.r, a.q + a.r};
  }
  return Polygon{ehi + s * c[0], ehi + s * c[1], elo + s * c[2],
                 elo + s * c[3], elo + s * c[4], ehi + s * c[5]};
}

Polygon voronoi_hexagon(const ReferenceConfig& config, LatVec site) {
  const Eigen::Vector2d centre = config.basis.position(site);
  const double rad = 1.0 / std::sqrt(3.0);
  Polygon hex(6);
  for (int k = 0; k < 6; ++k) {
    const double th = M_PI / 6.0 + k * M_PI / 3.0;
    hex[k] = centre + rad * Eigen::Vector2d(std::cos(th), std::sin(th));
  }
  return hex;
}

Decomposition decompose(const ReferenceConfig& config, int K,
                        const Stencil& st) {
  const int r = st.hop_radius();
  if (K < r + 1) {
    std::ostringstream os;
    os << "core radius K=" << K << " must be at least hop radius + 1 = "
       << r + 1;
    throw ConfigError(os.str());
  }
  if (config.layers() < K + 3 * r) {
    std::ostringstream os;
    os << "domain with " << config.layers()
       << " layers too small for K=" << K << " and hop radius " << r
       << " (need at least " << K + 3 * r << ")";
    throw ConfigError(os.str());
  }

  Decomposition d;
  d.K = K;
  d.r = r;
  d.N = config.layers();
  d.region.resize(config.num_sites(), Region::Far);
  for (int i = 0; i < config.num_sites(); ++i) {
    const int hop = config.site_hop(i);
    if (hop <= K) {
      d.region[i] = Region::Core;
      d.core_sites.push_back(i);
    } else if (hop <= K + r) {
      d.region[i] = Region::Interface;
      d.interface_sites.push_back(i);
    } else if (hop <= K + 3 * r) {
      d.region[i] = Region::ContinuumAtom;
      d.continuum_atom_sites.push_back(i);
    }
  }
  return d;
}

namespace {

// Ordered node chain of one mesh ring, bucketed into the 6 polygon edges.
struct RingChain {
  // edge e occupies [offsets[e], offsets[e+1]] in `nodes`, sharing corners;
  // nodes.front() == nodes.back() is avoided by storing edges half-open and
  // wrapping the final corner to nodes[0].
  std::vector<int> nodes;          // CCW, starting at the +e1 corner
  std::array<int, 7> offsets{};    // prefix offsets per edge, offsets[6] = size

  int edge_size(int e) const { return offsets[e + 1] - offsets[e]; }
  int at(int e, int i) const {
    const int idx = offsets[e] + i;
    return nodes[idx == static_cast<int>(nodes.size()) ? 0 : idx];
  }
};

double grading_target(double radius_min, double radius_max, int K) {
  const double r_gm = std::sqrt(radius_min * radius_max);
  return std::max(1.0, std::pow(r_gm / K, 1.5));
}

void add_triangle(Mesh& mesh, int n0, int n1, int n2) {
  MeshTri t;
  t.nodes = {n0, n1, n2};
  const Eigen::Vector2d p0 = mesh.nodes[n0].pos;
  const Eigen::Vector2d p1 = mesh.nodes[n1].pos;
  const Eigen::Vector2d p2 = mesh.nodes[n2].pos;
  const Eigen::Vector2d u = p1 - p0, v = p2 - p0;
  t.area = 0.5 * (u.x() * v.y() - u.y() * v.x());
  if (t.area <= 1e-12) {
    std::ostringstream os;
    os << "mesh grading produced a degenerate or inverted triangle near ("
       << p0.x() << "," << p0.y() << ")";
    throw GeometryError(os.str());
  }
  Eigen::Matrix2d J;
  J << u.x(), v.x(), u.y(), v.y();
  const Eigen::Matrix2d G = J.inverse().transpose();
  t.grad[1] = G.col(0);
  t.grad[2] = G.col(1);
  t.grad[0] = -(t.grad[1] + t.grad[2]);
  mesh.tris.push_back(t);
}

// Triangulates the annulus strip between two ring chains edge by edge.
void triangulate_strip(Mesh& mesh, const RingChain& inner,
                       const RingChain& outer) {
  for (int e = 0; e < 6; ++e) {
    const int p = inner.edge_size(e), q = outer.edge_size(e);
    int i = 0, j = 0;
    while (i < p || j < q) {
      const bool advance_inner =
          j == q || (i < p && (i + 1) * q <= (j + 1) * p);
      if (advance_inner) {
        add_triangle(mesh, inner.at(e, i), outer.at(e, j), inner.at(e, i + 1));
        ++i;
      } else {
        add_triangle(mesh, inner.at(e, i), outer.at(e, j), outer.at(e, j + 1));
        ++j;
      }
    }
  }
}

}  // namespace

double Mesh::diameter(int t) const {
  const auto& tri = tris[t];
  double d = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j)
      d = std::max(d, (nodes[tri.nodes[i]].pos - nodes[tri.nodes[j]].pos)
                          .norm());
  return d;
}

Mesh build_mesh(const Decomposition& decomp, const ReferenceConfig& config) {
  Mesh mesh;
  const int band_lo = decomp.K + decomp.r;
  const int band_hi = decomp.K + 3 * decomp.r;
  const int N = decomp.N;
  const int lo = config.row_lo(), hi = config.row_hi();

  // Atom-coincident band nodes.
  for (int i = 0; i < config.num_sites(); ++i) {
    const int hop = config.site_hop(i);
    if (hop < band_lo || hop > band_hi) continue;
    MeshNode n;
    n.pos = config.position(i);
    n.site = i;
    n.boundary = (N == band_hi && hop == band_hi);
    mesh.site_node[i] = static_cast<int>(mesh.nodes.size());
    mesh.nodes.push_back(n);
  }

  // Canonical triangulation of the band: both triangles of every lattice
  // cell whose barycentre lies strictly between the two ring polygons.
  auto band_node = [&](LatVec v) {
    const int s = config.index_of(v);
    if (s < 0) return -1;
    auto it = mesh.site_node.find(s);
    return it == mesh.site_node.end() ? -1 : it->second;
  };
  for (int q = lo - band_hi - 1; q <= hi + band_hi + 1; ++q) {
    for (int r = -band_hi - 1; r <= band_hi + 1; ++r) {
      const LatVec v{q, r};
      const int n00 = band_node(v);
      const int n10 = band_node(v + LatVec{1, 0});
      const int n01 = band_node(v + LatVec{0, 1});
      const int n11 = band_node(v + LatVec{1, 1});
      const auto bary_ok = [&](double bq, double br) {
        const double h = config.hop_from_core(bq, br);
        return h > band_lo && h < band_hi;
      };
      if (n00 >= 0 && n10 >= 0 && n01 >= 0 &&
          bary_ok(q + 1.0 / 3.0, r + 1.0 / 3.0))
        add_triangle(mesh, n00, n10, n01);
      if (n10 >= 0 && n11 >= 0 && n01 >= 0 &&
          bary_ok(q + 2.0 / 3.0, r + 2.0 / 3.0))
        add_triangle(mesh, n10, n11, n01);
    }
  }

  if (N == band_hi) return mesh;

  // Chain of the outermost band ring, walked corner to corner.
  const auto lattice_chain = [&](int s) {
    RingChain chain;
    const std::array<LatVec, 6> corners = {
        LatVec{hi + s, 0}, LatVec{hi, s},  LatVec{lo - s, s},
        LatVec{lo - s, 0}, LatVec{lo, -s}, LatVec{hi + s, -s}};
    const std::array<LatVec, 6> dirs = {LatVec{-1, 1}, LatVec{-1, 0},
                                        LatVec{0, -1}, LatVec{1, -1},
                                        LatVec{1, 0},  LatVec{0, 1}};
    const std::array<int, 6> counts = {s, hi - lo + s, s, s, hi - lo + s, s};
    for (int e = 0; e < 6; ++e) {
      chain.offsets[e] = static_cast<int>(chain.nodes.size());
      LatVec v = corners[e];
      for (int t = 0; t < counts[e]; ++t) {
        const int node = band_node(v);
        if (node < 0) throw GeometryError("band ring site missing");
        chain.nodes.push_back(node);
        v = v + dirs[e];
      }
    }
    chain.offsets[6] = static_cast<int>(chain.nodes.size());
    return chain;
  };

  RingChain inner = lattice_chain(band_hi);

  // Graded rings out to the Dirichlet hexagon at radius N.
  const double row_reach = std::max(
      config.basis.position(LatVec{hi, 0}).norm(),
      config.basis.position(LatVec{lo, 0}).norm());
  double s = band_hi;
  while (s < N - 1e-9) {
    const double step =
        grading_target(s * std::sqrt(3.0) / 2.0, s + row_reach, decomp.K);
    double next = s + step;
    if (next > N - 0.45 * step) next = N;
    const Polygon ring = ring_polygon(config, next);
    const bool is_boundary = next >= N - 1e-9;

    RingChain outer;
    for (int e = 0; e < 6; ++e) {
      outer.offsets[e] = static_cast<int>(outer.nodes.size());
      const Eigen::Vector2d a = ring[e];
      const Eigen::Vector2d b = ring[(e + 1) % 6];
      const Eigen::Vector2d mid = 0.5 * (a + b);
      const double len = (b - a).norm();
      const double target =
          std::max(1.0, std::pow(mid.norm() / decomp.K, 1.5));
      const int m = std::max(1, static_cast<int>(std::lround(len / target)));
      for (int t = 0; t < m; ++t) {
        MeshNode n;
        n.pos = a + (static_cast<double>(t) / m) * (b - a);
        n.boundary = is_boundary;
        outer.nodes.push_back(static_cast<int>(mesh.nodes.size()));
        mesh.nodes.push_back(n);
      }
    }
    outer.offsets[6] = static_cast<int>(outer.nodes.size());

    triangulate_strip(mesh, inner, outer);
    inner = outer;
    s = next;
  }
  return mesh;
}

EffectiveVolumes effective_volumes(const Decomposition& decomp,
                                   const Mesh& mesh,
                                   const ReferenceConfig& config,
                                   CouplingMethod method) {
  EffectiveVolumes vol;
  vol.method = method;
  const int outer_layer = decomp.K + decomp.r;
  const double vor = voronoi_volume(config.basis);

  vol.omega_i.resize(decomp.interface_sites.size(), 1.0);
  if (method == CouplingMethod::M2) {
    const Polygon core = ring_polygon(config, outer_layer);
    for (std::size_t n = 0; n < decomp.interface_sites.size(); ++n) {
      const int s = decomp.interface_sites[n];
      const Polygon cell = voronoi_hexagon(config, config.site(s));
      const Polygon kept = clip_convex(cell, core);
      const double a = kept.empty() ? 0.0 : polygon_area(kept);
      if (a <= 1e-12) {
        std::ostringstream os;
        os << "degenerate clipped interface cell at site " << s;
        throw GeometryError(os.str());
      }
      vol.omega_i[n] = std::min(1.0, a / vor);
    }
  }

  vol.omega_T.resize(mesh.tris.size());
  for (std::size_t t = 0; t < mesh.tris.size(); ++t) {
    double w = mesh.tris[t].area;
    if (method == CouplingMethod::M1) {
      for (int v = 0; v < 3; ++v) {
        const int node = mesh.tris[t].nodes[v];
        const int site = mesh.nodes[node].site;
        if (site < 0 || config.site_hop(site) != outer_layer) continue;
        Polygon tri{mesh.nodes[mesh.tris[t].nodes[0]].pos,
                    mesh.nodes[mesh.tris[t].nodes[1]].pos,
                    mesh.nodes[mesh.tris[t].nodes[2]].pos};
        const Polygon cell = voronoi_hexagon(config, config.site(site));
        const Polygon overlap = clip_convex(tri, cell);
        if (!overlap.empty()) w -= polygon_area(overlap);
      }
    }
    vol.omega_T[t] = std::max(0.0, w);
  }
  return vol;
}

DofMap build_dof_map(const Decomposition& decomp, const Mesh& mesh,
                     const ReferenceConfig& config) {
  DofMap dm;
  dm.site_dof.assign(config.num_sites(), -1);
  dm.node_dof.assign(mesh.nodes.size(), -1);

  for (int i = 0; i < config.num_sites(); ++i) {
    if (decomp.region[i] == Region::Core ||
        decomp.region[i] == Region::Interface) {
      dm.site_dof[i] = dm.ndof++;
      dm.dirichlet.push_back(false);
      dm.dof_pos.push_back(config.position(i));
    }
  }
  for (std::size_t n = 0; n < mesh.nodes.size(); ++n) {
    const int site = mesh.nodes[n].site;
    if (site >= 0 && dm.site_dof[site] >= 0) {
      dm.node_dof[n] = dm.site_dof[site];   // shared interface-layer node
      if (mesh.nodes[n].boundary) dm.dirichlet[dm.node_dof[n]] = true;
      continue;
    }
    dm.node_dof[n] = dm.ndof++;
    dm.dirichlet.push_back(mesh.nodes[n].boundary);
    dm.dof_pos.push_back(mesh.nodes[n].pos);
    if (site >= 0) dm.site_dof[site] = dm.node_dof[n];
  }
  for (int d = 0; d < dm.ndof; ++d)
    if (!dm.dirichlet[d]) dm.free_dofs.push_back(d);
  return dm;
}

HybridState uniform_state(const DofMap& dofs, const Eigen::Matrix2d& F) {
  HybridState st;
  st.kind = StateKind::Deformation;
  st.applied_strain = F;
  st.values.resize(2 * dofs.ndof);
  for (int d = 0; d < dofs.ndof; ++d)
    st.set(d, F * dofs.dof_pos[d]);
  return st;
}

namespace {

Eigen::Vector2d eval_canonical_p1(const ReferenceConfig& source,
                                  const SiteField& y,
                                  const Eigen::Vector2d& pos) {
  const Eigen::Vector2d lat = source.basis.A.inverse() * pos;
  const double fq = std::floor(lat.x()), fr = std::floor(lat.y());
  const int iq = static_cast<int>(fq), ir = static_cast<int>(fr);
  const double f = lat.x() - fq, g = lat.y() - fr;

  std::array<LatVec, 3> verts;
  std::array<double, 3> w;
  if (f + g <= 1.0) {
    verts = {LatVec{iq, ir}, LatVec{iq + 1, ir}, LatVec{iq, ir + 1}};
    w = {1.0 - f - g, f, g};
  } else {
    verts = {LatVec{iq + 1, ir}, LatVec{iq + 1, ir + 1}, LatVec{iq, ir + 1}};
    w = {1.0 - g, f + g - 1.0, 1.0 - f};
  }
  Eigen::Vector2d out = Eigen::Vector2d::Zero();
  for (int v = 0; v < 3; ++v) {
    if (std::abs(w[v]) <= 1e-10) continue;
    const int idx = source.index_of(verts[v]);
    if (idx < 0) {
      std::ostringstream os;
      os << "interpolation point (" << pos.x() << "," << pos.y()
         << ") not covered by the source configuration";
      throw ConfigError(os.str());
    }
    out += w[v] * y[idx];
  }
  return out;
}

}  // namespace

HybridState interpolate(const DofMap& dofs, const Mesh& mesh,
                        const ReferenceConfig& config, const SiteField& y,
                        const ReferenceConfig& source) {
  HybridState st;
  st.values.setZero(2 * dofs.ndof);
  std::vector<bool> done(dofs.ndof, false);

  for (int i = 0; i < config.num_sites(); ++i) {
    const int d = dofs.site_dof[i];
    if (d < 0) continue;
    const int src = source.index_of(config.site(i));
    if (src < 0) {
      std::ostringstream os;
      os << "site (" << config.site(i).q << "," << config.site(i).r
         << ") missing from the interpolation source";
      throw ConfigError(os.str());
    }
    st.set(d, y[src]);
    done[d] = true;
  }
  for (std::size_t n = 0; n < mesh.nodes.size(); ++n) {
    const int d = dofs.node_dof[n];
    if (d < 0 || done[d]) continue;
    st.set(d, eval_canonical_p1(source, y, mesh.nodes[n].pos));
    done[d] = true;
  }
  return st;
}

void write_mesh(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open mesh dump file " + path);
  out.precision(17);
  out << mesh.nodes.size() << " " << mesh.tris.size() << "\n";
  for (std::size_t n = 0; n < mesh.nodes.size(); ++n) {
    const auto& node = mesh.nodes[n];
    out << n << " " << node.pos.x() << " " << node.pos.y() << " "
        << (node.site >= 0 ? 1 : 0) << " " << (node.boundary ? 1 : 0) << "\n";
  }
  for (std::size_t t = 0; t < mesh.tris.size(); ++t) {
    const auto& tri = mesh.tris[t];
    out << t << " " << tri.nodes[0] << " " << tri.nodes[1] << " "
        << tri.nodes[2] << "\n";
  }
}

}  // namespace grac
