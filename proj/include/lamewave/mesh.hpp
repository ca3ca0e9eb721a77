#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace lamewave {

using Point = Eigen::Vector3d;  // z = 0 in 2D

enum class Region : std::uint8_t { solid = 0, fluid = 1, interface = 2 };
enum class FacetTag : std::uint8_t { interface = 0, outer = 1 };

const char* to_string(Region r);
const char* to_string(FacetTag t);

// A boundary facet. Interface facets are owned by the adjacent solid cell and
// their normal points out of the structure; outer facets point out of the
// whole domain.
struct Facet {
  std::array<int, 3> vertices{-1, -1, -1};  // first `dim` entries are used
  int cell = -1;
  int local = -1;  // local index of the owner-cell vertex opposite the facet
  FacetTag tag = FacetTag::interface;
  Point normal = Point::Zero();
  double measure = 0.0;
};

// Simplicial mesh of the structure (all cells solid) or of the coupled
// fluid-structure domain. Immutable after construction.
class Mesh {
 public:
  using Cell = std::array<int, 4>;  // first dim+1 entries are used

  Mesh(int dim, std::vector<Point> vertices, std::vector<Cell> cells,
       std::vector<Region> cell_regions, std::string descriptor = {});

  int dim() const { return dim_; }
  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_cells() const { return static_cast<int>(cells_.size()); }
  int vertices_per_cell() const { return dim_ + 1; }

  const Point& vertex(int v) const { return vertices_[v]; }
  const std::vector<Point>& vertices() const { return vertices_; }
  std::span<const int> cell(int c) const { return {cells_[c].data(), static_cast<std::size_t>(dim_ + 1)}; }
  const std::vector<Cell>& cells() const { return cells_; }
  Region cell_region(int c) const { return cell_regions_[c]; }
  const std::vector<Region>& cell_regions() const { return cell_regions_; }
  Region vertex_region(int v) const { return vertex_regions_[v]; }

  const std::vector<Facet>& facets() const { return facets_; }
  std::vector<int> facet_indices(FacetTag tag) const;

  bool has_fluid() const { return num_fluid_cells_ > 0; }
  bool has_solid() const { return num_fluid_cells_ < num_cells(); }

  double cell_volume(int c) const;
  double region_volume(Region r) const;
  double max_cell_diameter() const;
  double facet_area(FacetTag tag) const;

  const std::string& descriptor() const { return descriptor_; }

  // Structure part of a coupled mesh; solid vertices keep their relative order.
  Mesh solid_submesh() const;

  // FNV-1a over the binary representation; used in run manifests.
  std::uint64_t hash() const;

  bool operator==(const Mesh& other) const;

 private:
  void build_facets();
  void validate() const;

  int dim_;
  std::vector<Point> vertices_;
  std::vector<Cell> cells_;
  std::vector<Region> cell_regions_;
  std::vector<Region> vertex_regions_;
  std::vector<Facet> facets_;
  std::string descriptor_;
  int num_fluid_cells_ = 0;
};

// Structure shapes, all centered at the origin.
struct BallShape { double r = 1.0; };
struct BoxShape { double a = 1.0, b = 1.0, c = 1.0; };
struct EllipsoidShape { double a = 1.0, b = 1.0, c = 1.0; };
struct DiskShape { double r = 1.0; };
struct SquareShape { double a = 1.0; };
using StructureShape = std::variant<BallShape, BoxShape, EllipsoidShape, DiskShape, SquareShape>;

// Outer domain. In 2D a ball is a disk and a box uses its first two sides.
struct OuterBall { double r = 2.0; };
struct OuterBox { double a = 4.0, b = 4.0, c = 4.0; };
using OuterShape = std::variant<OuterBall, OuterBox>;

std::string describe(const StructureShape& shape);
std::string describe(const OuterShape& shape);
int shape_dimension(const StructureShape& shape);

struct GeneratorOptions {
  std::size_t max_vertices = 3'000'000;
};

// Grid-based generator: 6 tetrahedra per cube (2 triangles per square) with
// the diagonal reflected per octant, so meshes inherit the symmetries of the
// grid. Curved shapes map the grid radially; boundary vertices lie exactly on
// the surface. Cell size is ~2^-refinement length units.
Mesh generate_structure_mesh(const StructureShape& shape, int refinement,
                             const GeneratorOptions& options = {});

// Extrudes fluid layers radially from the structure boundary to the outer
// boundary. The structure keeps its vertex and cell numbering, so
// `solid_submesh()` returns it unchanged. The structure must be star-shaped
// with respect to the origin.
Mesh generate_coupled_mesh(const Mesh& structure, const OuterShape& outer, int refinement,
                           std::optional<int> layers = std::nullopt,
                           const GeneratorOptions& options = {});

// Integral of field.n over the interface, with the field given at mesh
// vertices (linear trace). `field.size()` must equal num_vertices(); values on
// interface vertices must be finite.
double surface_integral_normal_dot(const Mesh& mesh, std::span<const Point> field);

// Native text format:
//   lamewave-mesh 1
//   dimension <d>
//   descriptor <text>
//   vertices <n>        followed by n lines of d coordinates
//   cells <m>           followed by m lines "<region> v0 .. vd" (region 0 solid, 1 fluid)
//   facets <f>          followed by f lines "<tag> <cell> v0 .. v(d-1)" (tag 0 interface, 1 outer)
// Coordinates are written in shortest round-trip form, so write/read is exact.
void write_mesh(std::ostream& out, const Mesh& mesh);
Mesh read_mesh(std::istream& in);

// Gmsh MSH 2.2 ASCII: triangles (2D) or tetrahedra (3D); physical tag 2 marks
// fluid cells, anything else is solid.
Mesh read_gmsh22(std::istream& in);

}  // namespace lamewave
