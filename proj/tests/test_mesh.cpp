#include "doctest.h"

#include "lamewave/error.hpp"
#include "lamewave/mesh.hpp"

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

using namespace lamewave;
using std::numbers::pi;

namespace {

Point facet_centroid(const Mesh& m, const Facet& f) {
  Point c = Point::Zero();
  for (int i = 0; i < m.dim(); ++i) c += m.vertex(f.vertices[i]);
  return c / m.dim();
}

Point closed_surface_sum(const Mesh& m, FacetTag tag) {
  Point s = Point::Zero();
  for (const Facet& f : m.facets())
    if (f.tag == tag) s += f.measure * f.normal;
  return s;
}

}  // namespace

TEST_CASE("box template counts") {
  const Mesh m = generate_structure_mesh(BoxShape{1, 1, 1}, 1);
  CHECK(m.num_cells() == 48);
  CHECK(m.num_vertices() == 27);
  CHECK(m.region_volume(Region::solid) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(m.facet_area(FacetTag::interface) == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("ball facets lie near the sphere") {
  for (int r = 1; r <= 3; ++r) {
    const Mesh m = generate_structure_mesh(BallShape{1.0}, r);
    const double h = m.max_cell_diameter();
    for (const Facet& f : m.facets()) {
      for (int i = 0; i < 3; ++i) CHECK(std::abs(m.vertex(f.vertices[i]).norm() - 1.0) < 1e-12);
      CHECK(std::abs(facet_centroid(m, f).norm() - 1.0) <= h * h);
    }
  }
}

TEST_CASE("square perimeter") {
  const Mesh m = generate_structure_mesh(SquareShape{2.0}, 2);
  CHECK(m.dim() == 2);
  CHECK(std::abs(m.facet_area(FacetTag::interface) - 8.0) <= 1e-12);
  CHECK(std::abs(m.region_volume(Region::solid) - 4.0) <= 1e-12);
}

TEST_CASE("closed-surface identity") {
  const std::vector<StructureShape> shapes = {BallShape{1.0}, BoxShape{1, 2, 0.5}, EllipsoidShape{1, 1.3, 0.8},
                                              DiskShape{1.0}, SquareShape{3.0}};
  for (const auto& s : shapes) {
    const Mesh m = generate_structure_mesh(s, 2);
    const double area = m.facet_area(FacetTag::interface);
    CHECK(closed_surface_sum(m, FacetTag::interface).norm() <= 1e-10 * area);
  }
  const Mesh c = generate_coupled_mesh(generate_structure_mesh(BallShape{1.0}, 1), OuterBall{2.0}, 1);
  CHECK(closed_surface_sum(c, FacetTag::interface).norm() <= 1e-10 * c.facet_area(FacetTag::interface));
  CHECK(closed_surface_sum(c, FacetTag::outer).norm() <= 1e-10 * c.facet_area(FacetTag::outer));
}

TEST_CASE("volume error decreases under refinement") {
  struct Case {
    StructureShape shape;
    double volume;
  };
  const std::vector<Case> cases = {{BallShape{1.0}, 4.0 * pi / 3.0},
                                   {EllipsoidShape{1, 1.3, 0.8}, 4.0 * pi / 3.0 * 1.3 * 0.8},
                                   {BoxShape{1, 1, 1}, 1.0}};
  for (const auto& c : cases) {
    double prev = -1.0;
    for (int r = 1; r <= 3; ++r) {
      const double err = std::abs(generate_structure_mesh(c.shape, r).region_volume(Region::solid) - c.volume);
      if (prev > 1e-12) CHECK(err < prev);
      if (prev >= 0.0 && prev <= 1e-12) CHECK(err <= 1e-12);
      prev = err;
    }
  }
}

TEST_CASE("coupled shell volume converges") {
  const double exact = 4.0 * pi / 3.0 * (8.0 - 1.0);
  double prev = 1e300;
  for (int r = 1; r <= 2; ++r) {
    const Mesh m = generate_coupled_mesh(generate_structure_mesh(BallShape{1.0}, r), OuterBall{2.0}, r);
    const double err = std::abs(m.region_volume(Region::fluid) - exact) / exact;
    if (r == 2) CHECK(err <= 0.03);
    CHECK(err < prev);
    prev = err;
  }
}

TEST_CASE("structure touching the outer boundary is rejected") {
  const Mesh s = generate_structure_mesh(BallShape{1.0}, 1);
  CHECK_THROWS_AS(generate_coupled_mesh(s, OuterBall{1.0}, 1), GeometryError);
  CHECK_THROWS_AS(generate_coupled_mesh(s, OuterBall{0.5}, 1), GeometryError);
}

TEST_CASE("planar coupled mesh satisfies the Euler formula") {
  const Mesh m = generate_coupled_mesh(generate_structure_mesh(DiskShape{1.0}, 2), OuterBox{4, 4, 4}, 2);
  std::set<std::pair<int, int>> edges;
  for (int c = 0; c < m.num_cells(); ++c) {
    const auto v = m.cell(c);
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j) edges.insert({std::min(v[i], v[j]), std::max(v[i], v[j])});
  }
  CHECK(m.num_vertices() - static_cast<int>(edges.size()) + m.num_cells() == 1);
  CHECK(m.region_volume(Region::solid) + m.region_volume(Region::fluid) == doctest::Approx(16.0).epsilon(1e-12));
}

TEST_CASE("surface integral of the normal component") {
  const Mesh m = generate_structure_mesh(BallShape{1.0}, 3);
  const std::vector<Point>& y = m.vertices();
  // y.n = 1 exactly on the facet plane's vertices; the flat facets lose O(h^2).
  CHECK(surface_integral_normal_dot(m, y) == doctest::Approx(4.0 * pi).epsilon(0.02));
  // Linear fields are integrated exactly over the polyhedron: 3 |mesh volume|.
  CHECK(surface_integral_normal_dot(m, y) == doctest::Approx(3.0 * m.region_volume(Region::solid)).epsilon(1e-12));

  Eigen::Matrix3d skew;
  skew << 0, 1.5, -0.3, -1.5, 0, 2.0, 0.3, -2.0, 0;
  std::vector<Point> rot(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) rot[i] = skew * y[i];
  CHECK(std::abs(surface_integral_normal_dot(m, rot)) <= 1e-10 * skew.norm() * m.facet_area(FacetTag::interface));

  std::vector<Point> zero_trace(y.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    zero_trace[i] = m.vertex_region(static_cast<int>(i)) == Region::interface ? Point::Zero() : Point(1, 2, 3);
  CHECK(surface_integral_normal_dot(m, zero_trace) == 0.0);

  std::vector<Point> bad(y.size(), Point::Zero());
  bad[m.facets().front().vertices[0]] = Point(NAN, 0, 0);
  CHECK_THROWS_AS(surface_integral_normal_dot(m, bad), InputError);
  CHECK_THROWS_AS(surface_integral_normal_dot(m, std::vector<Point>(3)), InputError);
}

TEST_CASE("mesh serialization round-trip is exact") {
  const Mesh m = generate_coupled_mesh(generate_structure_mesh(EllipsoidShape{1, 1.3, 0.8}, 1), OuterBall{2.5}, 1);
  std::stringstream ss;
  write_mesh(ss, m);
  const Mesh back = read_mesh(ss);
  CHECK(back == m);
  CHECK(back.hash() == m.hash());
  std::stringstream again;
  write_mesh(again, back);
  std::stringstream first;
  write_mesh(first, m);
  CHECK(again.str() == first.str());
}

TEST_CASE("gmsh import") {
  std::istringstream in(
      "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n4\n1 0 0 0\n2 1 0 0\n3 0 1 0\n4 0 0 1\n$EndNodes\n"
      "$Elements\n1\n1 4 2 1 1 1 2 3 4\n$EndElements\n");
  const Mesh m = read_gmsh22(in);
  CHECK(m.dim() == 3);
  CHECK(m.num_cells() == 1);
  CHECK(m.region_volume(Region::solid) == doctest::Approx(1.0 / 6.0));
  CHECK(m.facets().size() == 4);
}

TEST_CASE("solid submesh keeps the structure") {
  const Mesh s = generate_structure_mesh(BallShape{1.0}, 1);
  const Mesh c = generate_coupled_mesh(s, OuterBall{2.0}, 1);
  CHECK(c.solid_submesh() == s);
}

TEST_CASE("invalid input") {
  CHECK_THROWS_AS(generate_structure_mesh(BallShape{-1.0}, 1), InputError);
  CHECK_THROWS_AS(generate_structure_mesh(BallShape{1.0}, 0), InputError);
  GeneratorOptions tiny;
  tiny.max_vertices = 10;
  CHECK_THROWS_AS(generate_structure_mesh(BallShape{1.0}, 2, tiny), ResourceError);
  std::istringstream junk("not a mesh");
  CHECK_THROWS_AS(read_mesh(junk), InputError);
}
