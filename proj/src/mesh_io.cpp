#include "lamewave/error.hpp"
#include "lamewave/mesh.hpp"

#include <charconv>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace lamewave {

namespace {

std::string shortest(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& token) {
  double x = 0.0;
  auto res = std::from_chars(token.data(), token.data() + token.size(), x);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
    throw InputError("mesh file: bad number '" + token + "'");
  }
  return x;
}

void expect(std::istream& in, const std::string& keyword) {
  std::string word;
  if (!(in >> word) || word != keyword) {
    throw InputError("mesh file: expected '" + keyword + "', got '" + word + "'");
  }
}

template <class T>
T read_value(std::istream& in, const char* what) {
  T value{};
  if (!(in >> value)) throw InputError(std::string("mesh file: cannot read ") + what);
  return value;
}

}  // namespace

void write_mesh(std::ostream& out, const Mesh& mesh) {
  const int d = mesh.dim();
  out << "lamewave-mesh 1\n";
  out << "dimension " << d << "\n";
  out << "descriptor " << mesh.descriptor() << "\n";
  out << "vertices " << mesh.num_vertices() << "\n";
  for (const auto& p : mesh.vertices()) {
    for (int i = 0; i < d; ++i) out << (i ? " " : "") << shortest(p[i]);
    out << "\n";
  }
  out << "cells " << mesh.num_cells() << "\n";
  for (int c = 0; c < mesh.num_cells(); ++c) {
    out << static_cast<int>(mesh.cell_region(c));
    for (int v : mesh.cell(c)) out << " " << v;
    out << "\n";
  }
  out << "facets " << mesh.facets().size() << "\n";
  for (const auto& f : mesh.facets()) {
    out << static_cast<int>(f.tag) << " " << f.cell;
    for (int i = 0; i < d; ++i) out << " " << f.vertices[i];
    out << "\n";
  }
}

Mesh read_mesh(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "lamewave-mesh" || version != 1) {
    throw InputError("mesh file: missing 'lamewave-mesh 1' header");
  }
  expect(in, "dimension");
  const int d = read_value<int>(in, "dimension");
  if (d != 2 && d != 3) throw InputError("mesh file: dimension must be 2 or 3");
  expect(in, "descriptor");
  std::string descriptor;
  std::getline(in, descriptor);
  if (!descriptor.empty() && descriptor.front() == ' ') descriptor.erase(0, 1);

  expect(in, "vertices");
  const long nv = read_value<long>(in, "vertex count");
  if (nv <= 0) throw InputError("mesh file: bad vertex count");
  std::vector<Point> vertices(nv, Point::Zero());
  for (long v = 0; v < nv; ++v) {
    for (int i = 0; i < d; ++i) vertices[v][i] = parse_double(read_value<std::string>(in, "coordinate"));
  }

  expect(in, "cells");
  const long nc = read_value<long>(in, "cell count");
  if (nc <= 0) throw InputError("mesh file: bad cell count");
  std::vector<Mesh::Cell> cells(nc, Mesh::Cell{-1, -1, -1, -1});
  std::vector<Region> regions(nc);
  for (long c = 0; c < nc; ++c) {
    const int r = read_value<int>(in, "cell region");
    if (r != 0 && r != 1) throw InputError("mesh file: cell region must be 0 or 1");
    regions[c] = static_cast<Region>(r);
    for (int i = 0; i <= d; ++i) cells[c][i] = read_value<int>(in, "cell vertex");
  }
  Mesh mesh(d, std::move(vertices), std::move(cells), std::move(regions), descriptor);

  // Facets are derived data; the stored list is checked against the rebuilt one.
  expect(in, "facets");
  const long nf = read_value<long>(in, "facet count");
  if (nf != static_cast<long>(mesh.facets().size())) {
    throw InputError("mesh file: facet list does not match the cell connectivity");
  }
  for (const auto& f : mesh.facets()) {
    const int tag = read_value<int>(in, "facet tag");
    const int cell = read_value<int>(in, "facet cell");
    bool ok = tag == static_cast<int>(f.tag) && cell == f.cell;
    for (int i = 0; i < d; ++i) ok = ok && read_value<int>(in, "facet vertex") == f.vertices[i];
    if (!ok) throw InputError("mesh file: facet list does not match the cell connectivity");
  }
  return mesh;
}

Mesh read_gmsh22(std::istream& in) {
  std::string line;
  std::map<long, int> node_index;
  std::vector<Point> nodes;
  struct Element {
    int type;
    int physical;
    std::vector<long> nodes;
  };
  std::vector<Element> elements;
  bool seen_format = false;

  while (std::getline(in, line)) {
    if (line.rfind("$MeshFormat", 0) == 0) {
      std::getline(in, line);
      std::istringstream ss(line);
      double version = 0.0;
      int file_type = -1;
      ss >> version >> file_type;
      if (version < 2.0 || version >= 3.0 || file_type != 0) {
        throw InputError("gmsh: only ASCII MSH 2.x is supported");
      }
      seen_format = true;
    } else if (line.rfind("$Nodes", 0) == 0) {
      const long n = read_value<long>(in, "node count");
      nodes.reserve(n);
      for (long i = 0; i < n; ++i) {
        const long id = read_value<long>(in, "node id");
        Point p;
        p.x() = read_value<double>(in, "node x");
        p.y() = read_value<double>(in, "node y");
        p.z() = read_value<double>(in, "node z");
        node_index[id] = static_cast<int>(nodes.size());
        nodes.push_back(p);
      }
    } else if (line.rfind("$Elements", 0) == 0) {
      const long n = read_value<long>(in, "element count");
      std::getline(in, line);
      for (long i = 0; i < n; ++i) {
        std::getline(in, line);
        std::istringstream ss(line);
        long id;
        int type, ntags;
        if (!(ss >> id >> type >> ntags)) throw InputError("gmsh: malformed element line");
        std::vector<int> tags(ntags);
        for (auto& t : tags) ss >> t;
        Element e{type, ntags > 0 ? tags[0] : 0, {}};
        long v;
        while (ss >> v) e.nodes.push_back(v);
        elements.push_back(std::move(e));
      }
    }
  }
  if (!seen_format) throw InputError("gmsh: missing $MeshFormat");

  int dim = 0;
  for (const auto& e : elements) {
    if (e.type == 4) dim = 3;
    if (e.type == 2 && dim == 0) dim = 2;
  }
  if (dim == 0) throw InputError("gmsh: no triangles or tetrahedra");
  const int want_type = dim == 3 ? 4 : 2;

  std::vector<int> used(nodes.size(), -1);
  std::vector<Mesh::Cell> cells;
  std::vector<Region> regions;
  for (const auto& e : elements) {
    if (e.type != want_type) continue;
    if (static_cast<int>(e.nodes.size()) != dim + 1) throw InputError("gmsh: bad element node count");
    Mesh::Cell c{-1, -1, -1, -1};
    for (int i = 0; i <= dim; ++i) {
      auto it = node_index.find(e.nodes[i]);
      if (it == node_index.end()) throw InputError("gmsh: element references unknown node");
      c[i] = it->second;
      used[it->second] = 0;
    }
    cells.push_back(c);
    regions.push_back(e.physical == 2 ? Region::fluid : Region::solid);
  }
  // Drop nodes not referenced by any cell (e.g. geometry points).
  std::vector<Point> vertices;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (used[i] == 0) {
      used[i] = static_cast<int>(vertices.size());
      vertices.push_back(nodes[i]);
    }
  }
  for (auto& c : cells) {
    for (int i = 0; i <= dim; ++i) c[i] = used[c[i]];
    // Orientation is irrelevant to the mesh model but keep it positive.
    const Point& p0 = vertices[c[0]];
    double vol;
    if (dim == 2) {
      const Point a = vertices[c[1]] - p0, b = vertices[c[2]] - p0;
      vol = a.x() * b.y() - a.y() * b.x();
    } else {
      vol = (vertices[c[1]] - p0).dot((vertices[c[2]] - p0).cross(vertices[c[3]] - p0));
    }
    if (vol < 0.0) std::swap(c[0], c[1]);
  }
  return Mesh(dim, std::move(vertices), std::move(cells), std::move(regions), "gmsh");
}

}  // namespace lamewave
