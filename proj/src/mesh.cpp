#include "lamewave/mesh.hpp"

#include "lamewave/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <unordered_map>

namespace lamewave {

const char* to_string(Region r) {
  switch (r) {
    case Region::solid: return "solid";
    case Region::fluid: return "fluid";
    case Region::interface: return "interface";
  }
  return "?";
}

const char* to_string(FacetTag t) { return t == FacetTag::interface ? "interface" : "outer"; }

namespace {

struct FacetKey {
  std::array<int, 3> v;
  bool operator==(const FacetKey&) const = default;
};

struct FacetKeyHash {
  std::size_t operator()(const FacetKey& k) const noexcept {
    std::size_t h = 1469598103934665603ull;
    for (int x : k.v) {
      h ^= static_cast<std::size_t>(x) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return h;
  }
};

FacetKey facet_key(std::span<const int> cell, int opposite, int dim) {
  FacetKey key{{-1, -1, -1}};
  int k = 0;
  for (int i = 0; i <= dim; ++i) {
    if (i != opposite) key.v[k++] = cell[i];
  }
  std::sort(key.v.begin(), key.v.begin() + dim);
  return key;
}

double simplex_signed_volume(int dim, const Point* p[4]) {
  if (dim == 2) {
    const Point a = *p[1] - *p[0];
    const Point b = *p[2] - *p[0];
    return 0.5 * (a.x() * b.y() - a.y() * b.x());
  }
  const Point a = *p[1] - *p[0];
  const Point b = *p[2] - *p[0];
  const Point c = *p[3] - *p[0];
  return a.dot(b.cross(c)) / 6.0;
}

}  // namespace

Mesh::Mesh(int dim, std::vector<Point> vertices, std::vector<Cell> cells,
           std::vector<Region> cell_regions, std::string descriptor)
    : dim_(dim),
      vertices_(std::move(vertices)),
      cells_(std::move(cells)),
      cell_regions_(std::move(cell_regions)),
      descriptor_(std::move(descriptor)) {
  if (dim_ != 2 && dim_ != 3) throw InputError("mesh dimension must be 2 or 3");
  if (cells_.size() != cell_regions_.size()) {
    throw InputError("mesh: cell/region count mismatch");
  }
  if (cells_.empty()) throw InputError("mesh: no cells");
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    if (cell_regions_[c] == Region::interface) {
      throw InputError("mesh: cells must be solid or fluid");
    }
    if (cell_regions_[c] == Region::fluid) ++num_fluid_cells_;
    for (int i = 0; i <= dim_; ++i) {
      const int v = cells_[c][i];
      if (v < 0 || v >= num_vertices()) throw InputError("mesh: cell vertex index out of range");
    }
    if (dim_ == 2) cells_[c][3] = -1;
  }
  if (dim_ == 2) {
    for (auto& p : vertices_) p.z() = 0.0;
  }
  build_facets();
  validate();
}

void Mesh::build_facets() {
  const int nloc = dim_ + 1;
  struct Incidence {
    int count = 0;
    int cell[2] = {-1, -1};
    int local[2] = {-1, -1};
  };
  std::unordered_map<FacetKey, Incidence, FacetKeyHash> incidence;
  incidence.reserve(cells_.size() * nloc);
  for (int c = 0; c < num_cells(); ++c) {
    for (int l = 0; l < nloc; ++l) {
      auto& inc = incidence[facet_key(cell(c), l, dim_)];
      if (inc.count < 2) {
        inc.cell[inc.count] = c;
        inc.local[inc.count] = l;
      }
      ++inc.count;
    }
  }

  const bool coupled = has_fluid() && has_solid();
  facets_.clear();
  for (int c = 0; c < num_cells(); ++c) {
    for (int l = 0; l < nloc; ++l) {
      const auto& inc = incidence.at(facet_key(cell(c), l, dim_));
      if (inc.count > 2) throw GeometryError("mesh: non-manifold facet");
      FacetTag tag;
      if (inc.count == 1) {
        if (!has_fluid()) {
          tag = FacetTag::interface;
        } else if (cell_regions_[c] == Region::fluid) {
          tag = FacetTag::outer;
        } else {
          throw GeometryError("mesh: structure touches the outer boundary");
        }
      } else {
        const int other = inc.cell[0] == c ? inc.cell[1] : inc.cell[0];
        if (!coupled || cell_regions_[c] != Region::solid ||
            cell_regions_[other] != Region::fluid) {
          continue;  // interior facet, or the fluid side of an interface facet
        }
        tag = FacetTag::interface;
      }

      Facet f;
      f.cell = c;
      f.local = l;
      f.tag = tag;
      int k = 0;
      for (int i = 0; i < nloc; ++i) {
        if (i != l) f.vertices[k++] = cells_[c][i];
      }
      const Point& a = vertices_[f.vertices[0]];
      const Point& b = vertices_[f.vertices[1]];
      Point centroid;
      if (dim_ == 2) {
        const Point t = b - a;
        f.measure = t.norm();
        f.normal = Point(t.y(), -t.x(), 0.0) / f.measure;
        centroid = 0.5 * (a + b);
      } else {
        const Point& d = vertices_[f.vertices[2]];
        const Point cr = (b - a).cross(d - a);
        f.measure = 0.5 * cr.norm();
        f.normal = cr / cr.norm();
        centroid = (a + b + d) / 3.0;
      }
      if (f.normal.dot(centroid - vertices_[cells_[c][l]]) < 0.0) f.normal = -f.normal;
      facets_.push_back(f);
    }
  }

  vertex_regions_.assign(vertices_.size(), Region::solid);
  std::vector<std::uint8_t> seen(vertices_.size(), 0);  // bit 0 solid, bit 1 fluid
  for (int c = 0; c < num_cells(); ++c) {
    const std::uint8_t bit = cell_regions_[c] == Region::solid ? 1 : 2;
    for (int v : cell(c)) seen[v] |= bit;
  }
  for (std::size_t v = 0; v < vertices_.size(); ++v) {
    if (seen[v] == 0) throw InputError("mesh: vertex not referenced by any cell");
    vertex_regions_[v] = seen[v] == 1 ? Region::solid : seen[v] == 2 ? Region::fluid : Region::interface;
  }
  for (const auto& f : facets_) {
    if (f.tag != FacetTag::interface) continue;
    for (int i = 0; i < dim_; ++i) vertex_regions_[f.vertices[i]] = Region::interface;
  }
}

void Mesh::validate() const {
  for (int c = 0; c < num_cells(); ++c) {
    if (cell_volume(c) <= 0.0) throw GeometryError("mesh: degenerate cell");
  }
  for (const auto& f : facets_) {
    if (std::abs(f.normal.norm() - 1.0) > 1e-12) throw GeometryError("mesh: facet normal not unit");
    if (f.tag == FacetTag::outer) {
      for (int i = 0; i < dim_; ++i) {
        if (vertex_regions_[f.vertices[i]] != Region::fluid) {
          throw GeometryError("mesh: structure vertex on the outer boundary");
        }
      }
    }
  }
}

std::vector<int> Mesh::facet_indices(FacetTag tag) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < facets_.size(); ++i) {
    if (facets_[i].tag == tag) out.push_back(static_cast<int>(i));
  }
  return out;
}

double Mesh::cell_volume(int c) const {
  const Point* p[4] = {nullptr, nullptr, nullptr, nullptr};
  for (int i = 0; i <= dim_; ++i) p[i] = &vertices_[cells_[c][i]];
  return std::abs(simplex_signed_volume(dim_, p));
}

double Mesh::region_volume(Region r) const {
  double v = 0.0;
  for (int c = 0; c < num_cells(); ++c) {
    if (cell_regions_[c] == r) v += cell_volume(c);
  }
  return v;
}

double Mesh::max_cell_diameter() const {
  double h = 0.0;
  for (int c = 0; c < num_cells(); ++c) {
    for (int i = 0; i <= dim_; ++i) {
      for (int j = i + 1; j <= dim_; ++j) {
        h = std::max(h, (vertices_[cells_[c][i]] - vertices_[cells_[c][j]]).norm());
      }
    }
  }
  return h;
}

double Mesh::facet_area(FacetTag tag) const {
  double a = 0.0;
  for (const auto& f : facets_) {
    if (f.tag == tag) a += f.measure;
  }
  return a;
}

Mesh Mesh::solid_submesh() const {
  if (!has_fluid()) return *this;
  std::vector<int> remap(vertices_.size(), -1);
  for (int c = 0; c < num_cells(); ++c) {
    if (cell_regions_[c] != Region::solid) continue;
    for (int v : cell(c)) remap[v] = 0;
  }
  std::vector<Point> verts;
  for (std::size_t v = 0; v < vertices_.size(); ++v) {
    if (remap[v] == 0) {
      remap[v] = static_cast<int>(verts.size());
      verts.push_back(vertices_[v]);
    }
  }
  std::vector<Cell> cells;
  std::vector<Region> regions;
  for (int c = 0; c < num_cells(); ++c) {
    if (cell_regions_[c] != Region::solid) continue;
    Cell cc{-1, -1, -1, -1};
    for (int i = 0; i <= dim_; ++i) cc[i] = remap[cells_[c][i]];
    cells.push_back(cc);
    regions.push_back(Region::solid);
  }
  std::string desc = descriptor_;
  if (auto pos = desc.find(" in "); pos != std::string::npos) desc = desc.substr(0, pos);
  return Mesh(dim_, std::move(verts), std::move(cells), std::move(regions), desc);
}

std::uint64_t Mesh::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  mix(&dim_, sizeof dim_);
  for (const auto& p : vertices_) mix(p.data(), sizeof(double) * 3);
  for (const auto& c : cells_) mix(c.data(), sizeof(int) * 4);
  for (auto r : cell_regions_) mix(&r, 1);
  return h;
}

bool Mesh::operator==(const Mesh& other) const {
  if (dim_ != other.dim_ || cells_ != other.cells_ || cell_regions_ != other.cell_regions_ ||
      vertices_.size() != other.vertices_.size()) {
    return false;
  }
  return std::memcmp(vertices_.data(), other.vertices_.data(), vertices_.size() * sizeof(Point)) == 0;
}

double surface_integral_normal_dot(const Mesh& mesh, std::span<const Point> field) {
  if (field.size() != static_cast<std::size_t>(mesh.num_vertices())) {
    throw InputError("surface_integral_normal_dot: field size does not match the vertex count");
  }
  double total = 0.0;
  for (const auto& f : mesh.facets()) {
    if (f.tag != FacetTag::interface) continue;
    Point avg = Point::Zero();
    for (int i = 0; i < mesh.dim(); ++i) {
      const Point& value = field[f.vertices[i]];
      if (!value.allFinite()) {
        throw InputError("surface_integral_normal_dot: field missing on an interface vertex");
      }
      avg += value;
    }
    avg /= mesh.dim();
    total += f.measure * avg.dot(f.normal);
  }
  return total;
}

}  // namespace lamewave
