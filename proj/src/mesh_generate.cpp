#include "lamewave/error.hpp"
#include "lamewave/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lamewave {

namespace {

std::string fmt_num(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

void require_positive(double x, const char* what) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw InputError(std::string("shape parameter ") + what + " must be positive");
  }
}

int divisions(double length, int refinement) {
  return std::max(1, static_cast<int>(std::lround(length * std::ldexp(1.0, refinement))));
}

// Structured simplicial grid on a tensor-product point set. Vertex
// coordinates are produced by `coord(i, j, k)`.
template <class Coord>
Mesh grid_mesh(int dim, int nx, int ny, int nz, Coord coord, std::string descriptor,
               const GeneratorOptions& options) {
  const std::size_t nv = static_cast<std::size_t>(nx + 1) * (ny + 1) * (dim == 3 ? nz + 1 : 1);
  if (nv > options.max_vertices) {
    throw ResourceError("mesh generation: " + std::to_string(nv) + " vertices exceed the cap of " +
                        std::to_string(options.max_vertices));
  }
  auto vid = [&](int i, int j, int k) { return i + (nx + 1) * (j + (ny + 1) * k); };

  std::vector<Point> vertices(nv);
  for (int k = 0; k <= (dim == 3 ? nz : 0); ++k) {
    for (int j = 0; j <= ny; ++j) {
      for (int i = 0; i <= nx; ++i) vertices[vid(i, j, k)] = coord(i, j, k);
    }
  }

  std::vector<Mesh::Cell> cells;
  auto orient = [&](Mesh::Cell c) {
    const Point& p0 = vertices[c[0]];
    double vol;
    if (dim == 2) {
      const Point a = vertices[c[1]] - p0, b = vertices[c[2]] - p0;
      vol = a.x() * b.y() - a.y() * b.x();
    } else {
      vol = (vertices[c[1]] - p0).dot((vertices[c[2]] - p0).cross(vertices[c[3]] - p0));
    }
    if (vol < 0.0) std::swap(c[0], c[1]);
    cells.push_back(c);
  };

  if (dim == 2) {
    cells.reserve(static_cast<std::size_t>(2) * nx * ny);
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const int fx = 2 * i + 1 < nx ? 1 : 0;
        const int fy = 2 * j + 1 < ny ? 1 : 0;
        auto v = [&](int bx, int by) { return vid(i + (bx ^ fx), j + (by ^ fy), 0); };
        orient({v(0, 0), v(1, 0), v(1, 1), -1});
        orient({v(0, 0), v(0, 1), v(1, 1), -1});
      }
    }
  } else {
    static constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    cells.reserve(static_cast<std::size_t>(6) * nx * ny * nz);
    for (int k = 0; k < nz; ++k) {
      for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
          const int flip[3] = {2 * i + 1 < nx ? 1 : 0, 2 * j + 1 < ny ? 1 : 0, 2 * k + 1 < nz ? 1 : 0};
          auto v = [&](const int b[3]) {
            return vid(i + (b[0] ^ flip[0]), j + (b[1] ^ flip[1]), k + (b[2] ^ flip[2]));
          };
          for (const auto& p : perms) {
            int b[3] = {0, 0, 0};
            Mesh::Cell c{};
            c[0] = v(b);
            b[p[0]] = 1;
            c[1] = v(b);
            b[p[1]] = 1;
            c[2] = v(b);
            b[p[2]] = 1;
            c[3] = v(b);
            orient(c);
          }
        }
      }
    }
  }
  std::vector<Region> regions(cells.size(), Region::solid);
  return Mesh(dim, std::move(vertices), std::move(cells), std::move(regions), std::move(descriptor));
}

// Maps the cube [-1,1]^d onto the unit ball. The map is the identity near the
// center and radial projection on the cube surface; monotone along rays.
Point cube_to_ball(const Point& x) {
  const double s = x.cwiseAbs().maxCoeff();
  if (s == 0.0) return Point::Zero();
  const double norm = x.norm();
  if (s == 1.0) return x / norm;
  return x * (1.0 - s + s * s / norm);
}

double symmetric_coord(int i, int n) { return static_cast<double>(2 * i - n) / n; }

}  // namespace

std::string describe(const StructureShape& shape) {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, BallShape>) return "ball(" + fmt_num(s.r) + ")";
        if constexpr (std::is_same_v<T, BoxShape>)
          return "box(" + fmt_num(s.a) + "," + fmt_num(s.b) + "," + fmt_num(s.c) + ")";
        if constexpr (std::is_same_v<T, EllipsoidShape>)
          return "ellipsoid(" + fmt_num(s.a) + "," + fmt_num(s.b) + "," + fmt_num(s.c) + ")";
        if constexpr (std::is_same_v<T, DiskShape>) return "disk(" + fmt_num(s.r) + ")";
        if constexpr (std::is_same_v<T, SquareShape>) return "square(" + fmt_num(s.a) + ")";
      },
      shape);
}

std::string describe(const OuterShape& shape) {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, OuterBall>) return "ball(" + fmt_num(s.r) + ")";
        if constexpr (std::is_same_v<T, OuterBox>)
          return "box(" + fmt_num(s.a) + "," + fmt_num(s.b) + "," + fmt_num(s.c) + ")";
      },
      shape);
}

int shape_dimension(const StructureShape& shape) {
  return std::holds_alternative<DiskShape>(shape) || std::holds_alternative<SquareShape>(shape) ? 2 : 3;
}

Mesh generate_structure_mesh(const StructureShape& shape, int refinement,
                             const GeneratorOptions& options) {
  if (refinement < 1) throw InputError("refinement must be >= 1");
  if (refinement > 20) throw ResourceError("refinement too large");
  const std::string desc = describe(shape);

  if (const auto* s = std::get_if<BoxShape>(&shape)) {
    require_positive(s->a, "a");
    require_positive(s->b, "b");
    require_positive(s->c, "c");
    const int nx = divisions(s->a, refinement), ny = divisions(s->b, refinement),
              nz = divisions(s->c, refinement);
    return grid_mesh(3, nx, ny, nz,
                     [&](int i, int j, int k) {
                       return Point(s->a * (2 * i - nx) / (2.0 * nx), s->b * (2 * j - ny) / (2.0 * ny),
                                    s->c * (2 * k - nz) / (2.0 * nz));
                     },
                     desc, options);
  }
  if (const auto* s = std::get_if<SquareShape>(&shape)) {
    require_positive(s->a, "a");
    const int n = divisions(s->a, refinement);
    return grid_mesh(2, n, n, 0,
                     [&](int i, int j, int) {
                       return Point(s->a * (2 * i - n) / (2.0 * n), s->a * (2 * j - n) / (2.0 * n), 0.0);
                     },
                     desc, options);
  }
  if (const auto* s = std::get_if<BallShape>(&shape)) {
    require_positive(s->r, "r");
    const int n = 2 * divisions(s->r, refinement);
    return grid_mesh(3, n, n, n,
                     [&](int i, int j, int k) {
                       return Point(s->r * cube_to_ball(Point(symmetric_coord(i, n), symmetric_coord(j, n),
                                                              symmetric_coord(k, n))));
                     },
                     desc, options);
  }
  if (const auto* s = std::get_if<EllipsoidShape>(&shape)) {
    require_positive(s->a, "a");
    require_positive(s->b, "b");
    require_positive(s->c, "c");
    const int n = 2 * divisions(std::max({s->a, s->b, s->c}), refinement);
    return grid_mesh(3, n, n, n,
                     [&](int i, int j, int k) {
                       const Point y = cube_to_ball(
                           Point(symmetric_coord(i, n), symmetric_coord(j, n), symmetric_coord(k, n)));
                       return Point(s->a * y.x(), s->b * y.y(), s->c * y.z());
                     },
                     desc, options);
  }
  const auto& s = std::get<DiskShape>(shape);
  require_positive(s.r, "r");
  const int n = 2 * divisions(s.r, refinement);
  return grid_mesh(2, n, n, 0,
                   [&](int i, int j, int) {
                     return Point(s.r * cube_to_ball(Point(symmetric_coord(i, n), symmetric_coord(j, n), 0.0)));
                   },
                   desc, options);
}

Mesh generate_coupled_mesh(const Mesh& structure, const OuterShape& outer, int refinement,
                           std::optional<int> layers, const GeneratorOptions& options) {
  if (structure.has_fluid()) throw InputError("generate_coupled_mesh: structure mesh already has fluid");
  if (refinement < 1) throw InputError("refinement must be >= 1");
  if (layers && *layers < 1) throw InputError("generate_coupled_mesh: layers must be >= 1");
  const int dim = structure.dim();

  // Distance from the origin to the outer boundary along unit direction d.
  auto outer_distance = [&](const Point& d) {
    return std::visit(
        [&](const auto& o) -> double {
          using T = std::decay_t<decltype(o)>;
          if constexpr (std::is_same_v<T, OuterBall>) {
            require_positive(o.r, "R");
            return o.r;
          } else {
            const double half[3] = {0.5 * o.a, 0.5 * o.b, 0.5 * o.c};
            double t = std::numeric_limits<double>::infinity();
            for (int i = 0; i < dim; ++i) {
              require_positive(half[i], "outer box side");
              if (d[i] != 0.0) t = std::min(t, half[i] / std::abs(d[i]));
            }
            return t;
          }
        },
        outer);
  };

  std::vector<int> boundary;
  for (const auto& f : structure.facets()) {
    for (int i = 0; i < dim; ++i) boundary.push_back(f.vertices[i]);
  }
  std::sort(boundary.begin(), boundary.end());
  boundary.erase(std::unique(boundary.begin(), boundary.end()), boundary.end());
  std::vector<int> rank(structure.num_vertices(), -1);
  for (std::size_t b = 0; b < boundary.size(); ++b) rank[boundary[b]] = static_cast<int>(b);

  std::vector<Point> outer_points(boundary.size());
  double min_clearance = std::numeric_limits<double>::infinity();
  double mean_clearance = 0.0;
  for (std::size_t b = 0; b < boundary.size(); ++b) {
    const Point& p = structure.vertex(boundary[b]);
    const double r = p.norm();
    if (r == 0.0) throw GeometryError("generate_coupled_mesh: structure boundary passes through the origin");
    const Point d = p / r;
    const double t = outer_distance(d);
    min_clearance = std::min(min_clearance, t - r);
    mean_clearance += t - r;
    outer_points[b] = t * d;
  }
  if (!(min_clearance > 0.0)) {
    throw GeometryError("generate_coupled_mesh: structure does not fit strictly inside the outer domain");
  }
  mean_clearance /= static_cast<double>(boundary.size());
  const int nl = layers.value_or(
      std::max(1, static_cast<int>(std::lround(mean_clearance * std::ldexp(1.0, refinement)))));

  const std::size_t nb = boundary.size();
  const std::size_t total = structure.num_vertices() + nb * nl;
  if (total > options.max_vertices) {
    throw ResourceError("generate_coupled_mesh: vertex count exceeds the cap");
  }

  std::vector<Point> vertices = structure.vertices();
  vertices.reserve(total);
  for (int l = 1; l <= nl; ++l) {
    for (std::size_t b = 0; b < nb; ++b) {
      const Point& p = structure.vertex(boundary[b]);
      vertices.push_back(l == nl ? outer_points[b] : Point(p + (static_cast<double>(l) / nl) * (outer_points[b] - p)));
    }
  }
  const int ns = structure.num_vertices();
  auto layer_vertex = [&](int v, int l) {
    return l == 0 ? v : ns + (l - 1) * static_cast<int>(nb) + rank[v];
  };

  std::vector<Mesh::Cell> cells = structure.cells();
  std::vector<Region> regions = structure.cell_regions();
  auto push = [&](Mesh::Cell c) {
    const Point& p0 = vertices[c[0]];
    double vol;
    if (dim == 2) {
      const Point a = vertices[c[1]] - p0, b = vertices[c[2]] - p0;
      vol = a.x() * b.y() - a.y() * b.x();
    } else {
      vol = (vertices[c[1]] - p0).dot((vertices[c[2]] - p0).cross(vertices[c[3]] - p0));
    }
    if (vol < 0.0) std::swap(c[0], c[1]);
    cells.push_back(c);
    regions.push_back(Region::fluid);
  };

  // Order by absolute coordinates, then index: invariant under the coordinate
  // reflections for facets that do not cross a coordinate plane, so symmetric
  // structures give symmetric fluid meshes.
  auto split_order = [&](int a, int b) {
    const Point pa = structure.vertex(a).cwiseAbs(), pb = structure.vertex(b).cwiseAbs();
    for (int i = 0; i < dim; ++i) {
      if (pa[i] != pb[i]) return pa[i] < pb[i];
    }
    return a < b;
  };
  for (const auto& f : structure.facets()) {
    std::array<int, 3> v = f.vertices;
    std::sort(v.begin(), v.begin() + dim, split_order);
    for (int l = 0; l < nl; ++l) {
      // Prism/quad split by a global vertex order: each side face is cut along
      // the diagonal from its lower bottom vertex to its higher top vertex,
      // which keeps neighbouring columns conforming.
      if (dim == 2) {
        const int a0 = layer_vertex(v[0], l), a1 = layer_vertex(v[1], l);
        const int b0 = layer_vertex(v[0], l + 1), b1 = layer_vertex(v[1], l + 1);
        push({a0, a1, b1, -1});
        push({a0, b0, b1, -1});
      } else {
        const int a0 = layer_vertex(v[0], l), a1 = layer_vertex(v[1], l), a2 = layer_vertex(v[2], l);
        const int b0 = layer_vertex(v[0], l + 1), b1 = layer_vertex(v[1], l + 1), b2 = layer_vertex(v[2], l + 1);
        push({a0, a1, a2, b2});
        push({a0, a1, b1, b2});
        push({a0, b0, b1, b2});
      }
    }
  }
  return Mesh(dim, std::move(vertices), std::move(cells), std::move(regions),
              structure.descriptor() + " in " + describe(outer));
}

}  // namespace lamewave
