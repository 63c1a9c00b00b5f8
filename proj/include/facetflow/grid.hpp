#pragma once

#include "facetflow/core.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <vector>

namespace facetflow {

enum class NodeKind : std::uint8_t { interior, boundary, exterior };

// ---------------------------------------------------------------------------
// Uniform 2-D grid with a masked domain (rectangle or disk inside a
// bounding rectangle).  Boundary nodes carry Dirichlet data.
// ---------------------------------------------------------------------------

class Grid {
 public:
  enum class Shape { rectangle, disk };

  static std::shared_ptr<const Grid> rectangle(int nx, int ny, double h,
                                               Vec2 origin = Vec2::Zero()) {
    require(nx >= 3 && ny >= 3, "grid: need at least 3 nodes per direction");
    require(h > 0.0, "grid: spacing must be positive");
    auto g = std::make_shared<Grid>();
    g->nx_ = nx;
    g->ny_ = ny;
    g->h_ = h;
    g->origin_ = origin;
    g->shape_ = Shape::rectangle;
    g->kind_.assign(static_cast<size_t>(nx) * ny, NodeKind::interior);
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        if (i == 0 || j == 0 || i == nx - 1 || j == ny - 1)
          g->kind_[g->idx(i, j)] = NodeKind::boundary;
    g->finish();
    return g;
  }

  /// Disk of radius R centered at the origin, masked out of a bounding
  /// rectangle.  Interior: |x| < R; boundary: the first ring outside.
  static std::shared_ptr<const Grid> disk(double R, double h) {
    require(R > 0.0 && h > 0.0 && R > 3.0 * h, "grid: disk must resolve R > 3h");
    int half = static_cast<int>(std::ceil(R / h)) + 1;
    int n = 2 * half + 1;
    auto g = std::make_shared<Grid>();
    g->nx_ = n;
    g->ny_ = n;
    g->h_ = h;
    g->origin_ = Vec2(-half * h, -half * h);
    g->shape_ = Shape::disk;
    g->disk_radius_ = R;
    g->kind_.assign(static_cast<size_t>(n) * n, NodeKind::exterior);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        if (g->pos(i, j).norm() < R) g->kind_[g->idx(i, j)] = NodeKind::interior;
    mark_boundary_ring(*g);
    g->finish();
    return g;
  }

  /// Grid with an explicit node mask (used for lattice-aligned sub-domains).
  static std::shared_ptr<Grid> masked(int nx, int ny, double h, Vec2 origin,
                                      std::vector<NodeKind> kind) {
    require(nx >= 3 && ny >= 3, "grid: need at least 3 nodes per direction");
    require(static_cast<int>(kind.size()) == nx * ny, "grid: mask size mismatch");
    auto g = std::make_shared<Grid>();
    g->nx_ = nx;
    g->ny_ = ny;
    g->h_ = h;
    g->origin_ = origin;
    g->shape_ = Shape::disk;
    g->kind_ = std::move(kind);
    g->finish();
    return g;
  }

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double h() const { return h_; }
  const Vec2& origin() const { return origin_; }
  Shape shape() const { return shape_; }
  double disk_radius() const { return disk_radius_; }

  int idx(int i, int j) const { return j * nx_ + i; }
  Vec2 pos(int i, int j) const { return origin_ + Vec2(i * h_, j * h_); }
  Vec2 pos(int n) const { return pos(n % nx_, n / nx_); }
  NodeKind kind(int i, int j) const { return kind_[idx(i, j)]; }
  NodeKind kind(int n) const { return kind_[n]; }
  bool active(int i, int j) const { return kind(i, j) != NodeKind::exterior; }
  int n_nodes() const { return nx_ * ny_; }
  int n_interior() const { return n_interior_; }
  const std::vector<int>& interior_nodes() const { return interior_nodes_; }

  /// Unknown index of an interior node, -1 otherwise.
  int unknown(int n) const { return unknown_[n]; }

  int n_x_edges() const { return (nx_ - 1) * ny_; }
  int n_y_edges() const { return nx_ * (ny_ - 1); }
  int x_edge(int i, int j) const { return j * (nx_ - 1) + i; }  // (i,j)-(i+1,j)
  int y_edge(int i, int j) const { return j * nx_ + i; }        // (i,j)-(i,j+1)
  bool x_edge_active(int i, int j) const {
    return active(i, j) && active(i + 1, j);
  }
  bool y_edge_active(int i, int j) const {
    return active(i, j) && active(i, j + 1);
  }

 private:
  /// Dirichlet ring: exterior nodes 8-adjacent to an interior node.  The
  /// eight-neighborhood keeps the two-triangle energy quadrature complete
  /// around every interior node (affine fields stay discretely caloric).
  static void mark_boundary_ring(Grid& g) {
    for (int j = 0; j < g.ny_; ++j)
      for (int i = 0; i < g.nx_; ++i) {
        if (g.kind_[g.idx(i, j)] != NodeKind::exterior) continue;
        bool near = false;
        for (int dj = -1; dj <= 1 && !near; ++dj)
          for (int di = -1; di <= 1 && !near; ++di) {
            int ii = i + di, jj = j + dj;
            if (ii < 0 || jj < 0 || ii >= g.nx_ || jj >= g.ny_) continue;
            if (g.kind_[g.idx(ii, jj)] == NodeKind::interior) near = true;
          }
        if (near) g.kind_[g.idx(i, j)] = NodeKind::boundary;
      }
  }

  void finish() {
    n_interior_ = 0;
    unknown_.assign(kind_.size(), -1);
    for (int j = 0; j < ny_; ++j)
      for (int i = 0; i < nx_; ++i)
        if (kind_[idx(i, j)] == NodeKind::interior) {
          unknown_[idx(i, j)] = n_interior_++;
          interior_nodes_.push_back(idx(i, j));
        }
    // every interior node keeps all 8 neighbors non-exterior
    for (int j = 0; j < ny_; ++j)
      for (int i = 0; i < nx_; ++i) {
        if (kind_[idx(i, j)] != NodeKind::interior) continue;
        require(i > 0 && j > 0 && i + 1 < nx_ && j + 1 < ny_,
                "grid: interior node on array edge");
        for (int dj = -1; dj <= 1; ++dj)
          for (int di = -1; di <= 1; ++di)
            require(active(i + di, j + dj), "grid: interior node with exterior neighbor");
      }
  }

  int nx_ = 0, ny_ = 0;
  double h_ = 1.0;
  Vec2 origin_ = Vec2::Zero();
  Shape shape_ = Shape::rectangle;
  double disk_radius_ = 0.0;
  std::vector<NodeKind> kind_;
  std::vector<int> unknown_;
  std::vector<int> interior_nodes_;
  int n_interior_ = 0;
};

// ---------------------------------------------------------------------------
// Fields
// ---------------------------------------------------------------------------

struct ScalarField {
  std::shared_ptr<const Grid> grid;
  std::vector<double> v;  // nodal, exterior entries are zero

  ScalarField() = default;
  explicit ScalarField(std::shared_ptr<const Grid> g)
      : grid(std::move(g)), v(grid->n_nodes(), 0.0) {}

  double& operator()(int i, int j) { return v[grid->idx(i, j)]; }
  double operator()(int i, int j) const { return v[grid->idx(i, j)]; }

  void check_finite() const {
    for (double x : v)
      if (!std::isfinite(x)) throw std::runtime_error("field: non-finite entry");
  }
};

struct VectorField {
  std::shared_ptr<const Grid> grid;
  std::vector<double> x;  // x-edge values, (nx-1)*ny
  std::vector<double> y;  // y-edge values, nx*(ny-1)

  VectorField() = default;
  explicit VectorField(std::shared_ptr<const Grid> g)
      : grid(std::move(g)),
        x(grid->n_x_edges(), 0.0),
        y(grid->n_y_edges(), 0.0) {}
};

/// Edge-centered two-point differences; edges touching exterior nodes stay 0.
inline VectorField gradient(const ScalarField& u) {
  const Grid& g = *u.grid;
  VectorField f(u.grid);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i + 1 < g.nx(); ++i)
      if (g.x_edge_active(i, j))
        f.x[g.x_edge(i, j)] = (u(i + 1, j) - u(i, j)) / g.h();
  for (int j = 0; j + 1 < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i)
      if (g.y_edge_active(i, j))
        f.y[g.y_edge(i, j)] = (u(i, j + 1) - u(i, j)) / g.h();
  return f;
}

/// Adjoint of -gradient at interior nodes under the discrete inner product.
inline ScalarField divergence(const VectorField& f) {
  const Grid& g = *f.grid;
  ScalarField d(f.grid);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      if (g.kind(i, j) != NodeKind::interior) continue;
      d(i, j) = (f.x[g.x_edge(i, j)] - f.x[g.x_edge(i - 1, j)]) / g.h() +
                (f.y[g.y_edge(i, j)] - f.y[g.y_edge(i, j - 1)]) / g.h();
    }
  return d;
}

/// Full 2-vector gradient at nodes, averaging the adjacent active edges.
inline std::vector<Vec2> node_gradient(const VectorField& f) {
  const Grid& g = *f.grid;
  std::vector<Vec2> out(g.n_nodes(), Vec2::Zero());
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      if (!g.active(i, j)) continue;
      double sx = 0.0, sy = 0.0;
      int cx = 0, cy = 0;
      if (i > 0 && g.x_edge_active(i - 1, j)) { sx += f.x[g.x_edge(i - 1, j)]; ++cx; }
      if (i + 1 < g.nx() && g.x_edge_active(i, j)) { sx += f.x[g.x_edge(i, j)]; ++cx; }
      if (j > 0 && g.y_edge_active(i, j - 1)) { sy += f.y[g.y_edge(i, j - 1)]; ++cy; }
      if (j + 1 < g.ny() && g.y_edge_active(i, j)) { sy += f.y[g.y_edge(i, j)]; ++cy; }
      out[g.idx(i, j)] = Vec2(cx > 0 ? sx / cx : 0.0, cy > 0 ? sy / cy : 0.0);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Space-time storage and parabolic cylinders
// ---------------------------------------------------------------------------

struct ParabolicCylinder {
  Vec2 center = Vec2::Zero();
  double t0 = 0.0;
  double r = 1.0;

  ParabolicCylinder() = default;
  ParabolicCylinder(Vec2 c, double t, double radius) : center(c), t0(t), r(radius) {
    require(radius > 0.0, "cylinder: radius must be positive");
  }
  ParabolicCylinder scaled(double factor) const {
    return ParabolicCylinder(center, t0, r * factor);
  }
};

/// Parabolic metric: max(|x-y|, sqrt(|t-s|)).
inline double d_p(const Vec2& x1, double t1, const Vec2& x2, double t2) {
  return std::max((x1 - x2).norm(), std::sqrt(std::abs(t1 - t2)));
}

class TimeSlab {
 public:
  TimeSlab() = default;
  explicit TimeSlab(std::shared_ptr<const Grid> g) : grid_(std::move(g)) {}

  void append(double t, ScalarField u) {
    require(u.grid.get() == grid_.get(), "slab: field lives on another grid");
    if (!times_.empty())
      require(t > times_.back(), "slab: times must be strictly increasing");
    u.check_finite();
    times_.push_back(t);
    slices_.push_back(std::move(u));
    grad_cache_.emplace_back();
  }

  const std::shared_ptr<const Grid>& grid() const { return grid_; }
  int n_slices() const { return static_cast<int>(times_.size()); }
  double time(int m) const { return times_[m]; }
  const std::vector<double>& times() const { return times_; }
  const ScalarField& slice(int m) const { return slices_[m]; }
  ScalarField& mutable_slice(int m) { grad_cache_[m].clear(); return slices_[m]; }

  /// Nodal gradient vectors of slice m (cached after first use).
  const std::vector<Vec2>& nodal_gradient(int m) const {
    if (grad_cache_[m].empty())
      grad_cache_[m] = node_gradient(gradient(slices_[m]));
    return grad_cache_[m];
  }

 private:
  std::shared_ptr<const Grid> grid_;
  std::vector<double> times_;
  std::vector<ScalarField> slices_;
  mutable std::vector<std::vector<Vec2>> grad_cache_;
};

/// Node/slice index sets realizing Q = B_r(x0) x (t0-r^2, t0].
struct CylinderIndex {
  std::vector<int> nodes;   // non-exterior nodes with |pos-x0| <= r
  std::vector<int> slices;  // slice indices with t in (t0-r^2, t0]
  bool empty() const { return nodes.empty() || slices.empty(); }
  size_t n_samples() const { return nodes.size() * slices.size(); }
};

inline CylinderIndex cylinder_nodes(const TimeSlab& slab, const ParabolicCylinder& q) {
  const Grid& g = *slab.grid();
  CylinderIndex ix;
  const double r2 = q.r * q.r * (1.0 + 1e-12);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      if (!g.active(i, j)) continue;
      if ((g.pos(i, j) - q.center).squaredNorm() <= r2) ix.nodes.push_back(g.idx(i, j));
    }
  const double t_lo = q.t0 - q.r * q.r, t_eps = 1e-12 * std::max(1.0, std::abs(q.t0));
  for (int m = 0; m < slab.n_slices(); ++m) {
    double t = slab.time(m);
    if (t > t_lo + t_eps && t <= q.t0 + t_eps) ix.slices.push_back(m);
  }
  return ix;
}

/// Arithmetic mean of a per-(node,slice) functional over the cylinder.
inline double cylinder_average(const TimeSlab& slab, const ParabolicCylinder& q,
                               const std::function<double(int node, int slice)>& f) {
  CylinderIndex ix = cylinder_nodes(slab, q);
  if (ix.nodes.size() < 4 || ix.slices.size() < 2)
    throw std::domain_error("cylinder_average: cylinder too small (" +
                            std::to_string(ix.nodes.size()) + " nodes, " +
                            std::to_string(ix.slices.size()) + " slices)");
  double acc = 0.0;
  for (int m : ix.slices)
    for (int n : ix.nodes) acc += f(n, m);
  return acc / static_cast<double>(ix.n_samples());
}

inline Vec2 cylinder_mean_gradient(const TimeSlab& slab, const ParabolicCylinder& q) {
  CylinderIndex ix = cylinder_nodes(slab, q);
  if (ix.nodes.size() < 4 || ix.slices.size() < 2)
    throw std::domain_error("cylinder_mean_gradient: cylinder too small (" +
                            std::to_string(ix.nodes.size()) + " nodes, " +
                            std::to_string(ix.slices.size()) + " slices)");
  Vec2 acc = Vec2::Zero();
  for (int m : ix.slices) {
    const auto& gm = slab.nodal_gradient(m);
    for (int n : ix.nodes) acc += gm[n];
  }
  return acc / static_cast<double>(ix.n_samples());
}

// ---------------------------------------------------------------------------
// CSV dump of a slab: header x,y,t,value, row-major nodes, one block per
// slice, 17 significant digits (bit-exact round trip).
// ---------------------------------------------------------------------------

inline void write_slab_csv(const TimeSlab& slab, const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw std::runtime_error("cannot open " + path + " for writing");
  std::fprintf(fp, "x,y,t,value\n");
  const Grid& g = *slab.grid();
  for (int m = 0; m < slab.n_slices(); ++m) {
    const ScalarField& u = slab.slice(m);
    for (int j = 0; j < g.ny(); ++j)
      for (int i = 0; i < g.nx(); ++i) {
        Vec2 x = g.pos(i, j);
        std::fprintf(fp, "%.17g,%.17g,%.17g,%.17g\n", x.x(), x.y(), slab.time(m),
                     u(i, j));
      }
  }
  std::fclose(fp);
}

inline TimeSlab read_slab_csv(std::shared_ptr<const Grid> grid,
                              const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (line != "x,y,t,value") throw std::runtime_error(path + ": bad header");
  TimeSlab slab(grid);
  const int n = grid->n_nodes();
  int at = 0;
  double t_cur = 0.0;
  ScalarField u(grid);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double x, y, t, v;
    if (std::sscanf(line.c_str(), "%lg,%lg,%lg,%lg", &x, &y, &t, &v) != 4)
      throw std::runtime_error(path + ": bad row '" + line + "'");
    if (at == 0) t_cur = t;
    Vec2 expect = grid->pos(at);
    if (std::abs(x - expect.x()) > 1e-12 || std::abs(y - expect.y()) > 1e-12 ||
        t != t_cur)
      throw std::runtime_error(path + ": row does not match the grid layout");
    u.v[at] = v;
    if (++at == n) {
      slab.append(t_cur, u);
      u = ScalarField(grid);
      at = 0;
    }
  }
  if (at != 0) throw std::runtime_error(path + ": truncated slice block");
  return slab;
}

}  // namespace facetflow
