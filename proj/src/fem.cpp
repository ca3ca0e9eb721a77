#include "lamewave/fem.hpp"

#include "lamewave/error.hpp"
#include "lamewave/quadrature.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <ostream>

namespace lamewave {

void MaterialParams::validate() const {
  auto check = [](double x, const char* name) {
    if (!(x > 0.0) || !std::isfinite(x)) throw InputError(std::string(name) + " must be positive");
  };
  check(lambda0, "lambda0");
  check(lambda1, "lambda1");
  check(nu, "nu");
}

// ---------------------------------------------------------------------------
// SparseMatrix

SparseMatrix::SparseMatrix(Storage data, bool symmetric, std::vector<int> constrained)
    : data_(std::move(data)), symmetric_(symmetric), constrained_(std::move(constrained)) {
  data_.makeCompressed();
}

double SparseMatrix::max_abs() const {
  double m = 0.0;
  for (int k = 0; k < data_.nonZeros(); ++k) m = std::max(m, std::abs(data_.valuePtr()[k]));
  return m;
}

double SparseMatrix::asymmetry() const {
  if (rows() != cols()) return std::numeric_limits<double>::infinity();
  const double scale = max_abs();
  if (scale == 0.0) return 0.0;
  Storage t = data_.transpose();
  Storage d = data_ - t;
  double m = 0.0;
  for (int k = 0; k < d.nonZeros(); ++k) m = std::max(m, std::abs(d.valuePtr()[k]));
  return m / scale;
}

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

SparseMatrix from_triplets(int rows, int cols, const Triplets& t, bool symmetric) {
  SparseMatrix::Storage s(rows, cols);
  s.setFromTriplets(t.begin(), t.end());
  return SparseMatrix(std::move(s), symmetric);
}

constexpr int kEdges2[3][2] = {{0, 1}, {0, 2}, {1, 2}};
constexpr int kEdges3[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};

int num_edges(int sdim) { return sdim == 1 ? 1 : sdim == 2 ? 3 : 6; }
const int (*edge_table(int sdim))[2] {
  static constexpr int e1[1][2] = {{0, 1}};
  return sdim == 1 ? e1 : sdim == 2 ? kEdges2 : kEdges3;
}

int basis_size(int sdim, int order) { return order == 1 ? sdim + 1 : sdim + 1 + num_edges(sdim); }

// Lagrange basis on a simplex of dimension `sdim` at barycentric point lam.
// dlam(a, i) = d phi_a / d lam_i.
void eval_basis(int sdim, int order, const Eigen::Vector4d& lam, Eigen::VectorXd& phi,
                Eigen::MatrixXd* dlam) {
  const int n = basis_size(sdim, order);
  phi.resize(n);
  if (dlam) dlam->setZero(n, sdim + 1);
  if (order == 1) {
    for (int a = 0; a <= sdim; ++a) {
      phi[a] = lam[a];
      if (dlam) (*dlam)(a, a) = 1.0;
    }
    return;
  }
  for (int a = 0; a <= sdim; ++a) {
    phi[a] = lam[a] * (2.0 * lam[a] - 1.0);
    if (dlam) (*dlam)(a, a) = 4.0 * lam[a] - 1.0;
  }
  const auto* edges = edge_table(sdim);
  for (int e = 0; e < num_edges(sdim); ++e) {
    const int i = edges[e][0], j = edges[e][1];
    phi[sdim + 1 + e] = 4.0 * lam[i] * lam[j];
    if (dlam) {
      (*dlam)(sdim + 1 + e, i) = 4.0 * lam[j];
      (*dlam)(sdim + 1 + e, j) = 4.0 * lam[i];
    }
  }
}

// Basis values and barycentric derivatives tabulated at quadrature points.
struct BasisTable {
  int nloc = 0;
  std::vector<double> weights;
  std::vector<Eigen::VectorXd> phi;
  std::vector<Eigen::MatrixXd> dlam;
};

const BasisTable& basis_table(int sdim, int order, int degree) {
  static std::mutex mutex;
  static std::map<std::tuple<int, int, int>, BasisTable> cache;
  std::lock_guard lock(mutex);
  auto key = std::make_tuple(sdim, order, degree);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  const auto& rule = simplex_rule(sdim, degree);
  BasisTable t;
  t.nloc = basis_size(sdim, order);
  t.weights = rule.weights;
  for (const auto& p : rule.points) {
    Eigen::VectorXd phi;
    Eigen::MatrixXd dl;
    eval_basis(sdim, order, p, phi, &dl);
    t.phi.push_back(phi);
    t.dlam.push_back(dl);
  }
  return cache.emplace(key, std::move(t)).first->second;
}

// Gradients of the barycentric coordinates (rows) and the cell volume.
struct CellGeometry {
  Eigen::MatrixXd grad_lambda;  // (dim+1) x dim
  double volume = 0.0;
};

CellGeometry cell_geometry(const Mesh& mesh, int c) {
  const int d = mesh.dim();
  const auto cell = mesh.cell(c);
  Eigen::MatrixXd jac(d, d);
  const Point& p0 = mesh.vertex(cell[0]);
  for (int i = 0; i < d; ++i) jac.col(i) = (mesh.vertex(cell[i + 1]) - p0).head(d);
  CellGeometry g;
  const double det = jac.determinant();
  double fact = 1.0;
  for (int k = 2; k <= d; ++k) fact *= k;
  g.volume = std::abs(det) / fact;
  const Eigen::MatrixXd inv_t = jac.inverse().transpose();  // columns: grad lambda_{i+1}
  g.grad_lambda.resize(d + 1, d);
  for (int i = 0; i < d; ++i) g.grad_lambda.row(i + 1) = inv_t.col(i).transpose();
  g.grad_lambda.row(0) = -g.grad_lambda.bottomRows(d).colwise().sum();
  return g;
}

void check_order(int order) {
  if (order != 1 && order != 2) throw InputError("element order must be 1 or 2");
}

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

// Per-cell local matrices (stiffness-type forms use the gradient table).
enum class Form { scalar_stiffness, mass, lame, viscous, vector_laplacian };

Eigen::MatrixXd local_matrix(Form form, const CellGeometry& g, int dim, int order,
                             const MaterialParams& p) {
  const bool grad_form = form != Form::mass;
  const int degree = grad_form ? 2 * (order - 1) : 2 * order;
  const auto& tab = basis_table(dim, order, degree);
  const int n = tab.nloc;
  Eigen::MatrixXd scalar = Eigen::MatrixXd::Zero(n, n);
  if (form == Form::mass) {
    for (std::size_t q = 0; q < tab.weights.size(); ++q) {
      scalar.noalias() += tab.weights[q] * tab.phi[q] * tab.phi[q].transpose();
    }
    return g.volume * scalar;
  }
  if (form == Form::scalar_stiffness || form == Form::vector_laplacian) {
    for (std::size_t q = 0; q < tab.weights.size(); ++q) {
      const Eigen::MatrixXd grad = tab.dlam[q] * g.grad_lambda;  // n x dim
      scalar.noalias() += tab.weights[q] * grad * grad.transpose();
    }
    scalar *= g.volume;
    if (form == Form::scalar_stiffness) return scalar;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n * dim, n * dim);
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        for (int i = 0; i < dim; ++i) out(a * dim + i, b * dim + i) = scalar(a, b);
      }
    }
    return out;
  }
  // lame / viscous: c_sym (delta_ij ga.gb + ga_j gb_i) + c_div ga_i gb_j
  const double c_sym = form == Form::lame ? 0.5 * p.lambda0 : p.nu;
  const double c_div = form == Form::lame ? p.lambda1 : 0.0;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n * dim, n * dim);
  for (std::size_t q = 0; q < tab.weights.size(); ++q) {
    const Eigen::MatrixXd grad = tab.dlam[q] * g.grad_lambda;
    const double w = tab.weights[q] * g.volume;
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        const double dot = grad.row(a).dot(grad.row(b));
        for (int i = 0; i < dim; ++i) {
          for (int j = 0; j < dim; ++j) {
            double v = c_sym * grad(a, j) * grad(b, i) + c_div * grad(a, i) * grad(b, j);
            if (i == j) v += c_sym * dot;
            out(a * dim + i, b * dim + j) += w * v;
          }
        }
      }
    }
  }
  return out;
}

Eigen::MatrixXd expand_vector(const Eigen::MatrixXd& scalar, int dim) {
  const int n = static_cast<int>(scalar.rows());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n * dim, n * dim);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      for (int i = 0; i < dim; ++i) out(a * dim + i, b * dim + i) = scalar(a, b);
    }
  }
  return out;
}

void scatter_local(Triplets& t, const DofMap& dofs, int cell, const Eigen::MatrixXd& local) {
  const auto nodes = dofs.cell_nodes(cell);
  const int nc = dofs.components();
  const int n = static_cast<int>(nodes.size()) * nc;
  std::vector<int> idx(n);
  for (std::size_t a = 0; a < nodes.size(); ++a) {
    for (int i = 0; i < nc; ++i) idx[a * nc + i] = dofs.dof(nodes[a], i);
  }
  for (int r = 0; r < n; ++r) {
    for (int s = 0; s < n; ++s) {
      if (local(r, s) != 0.0) t.emplace_back(idx[r], idx[s], local(r, s));
    }
  }
}

SparseMatrix assemble_form(const Mesh& mesh, const DofMap& dofs, Form form, const MaterialParams& p,
                           bool add_mass) {
  Triplets t;
  const int dim = mesh.dim();
  const int nc = dofs.components();
  const std::size_t n = static_cast<std::size_t>(dofs.nodes_per_cell() * nc);
  t.reserve(dofs.cells().size() * n * n);
  for (int c : dofs.cells()) {
    const CellGeometry g = cell_geometry(mesh, c);
    Eigen::MatrixXd local = local_matrix(form, g, dim, dofs.order(), p);
    if (form == Form::mass && nc > 1) local = expand_vector(local, nc);
    if (add_mass) {
      Eigen::MatrixXd m = local_matrix(Form::mass, g, dim, dofs.order(), p);
      local += nc > 1 ? expand_vector(m, nc) : m;
    }
    scatter_local(t, dofs, c, local);
  }
  return from_triplets(dofs.num_dofs(), dofs.num_dofs(), t, true);
}

void require_solid(const Mesh& mesh) {
  if (!mesh.has_solid()) throw InputError("assembly requires solid cells");
}

}  // namespace

// ---------------------------------------------------------------------------
// DofMap

DofMap::DofMap(const Mesh& mesh, FieldKind kind, int order, RegionRestriction region)
    : kind_(kind), order_(order), region_(region), dim_(mesh.dim()) {
  check_order(order);
  nloc_ = basis_size(dim_, order);
  cell_offset_.assign(mesh.num_cells(), -1);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const Region r = mesh.cell_region(c);
    const bool in = region == RegionRestriction::global || (region == RegionRestriction::solid && r == Region::solid) ||
                    (region == RegionRestriction::fluid && r == Region::fluid);
    if (in) {
      cell_offset_[c] = static_cast<int>(cells_.size()) * nloc_;
      cells_.push_back(c);
    }
  }
  if (cells_.empty()) throw InputError("DofMap: region has no cells");

  vertex_node_.assign(mesh.num_vertices(), -1);
  for (int c : cells_) {
    for (int v : mesh.cell(c)) vertex_node_[v] = 0;
  }
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    if (vertex_node_[v] == 0) {
      vertex_node_[v] = static_cast<int>(node_position_.size());
      node_position_.push_back(mesh.vertex(v));
    }
  }
  cell_nodes_.resize(cells_.size() * nloc_);
  const auto* edges = edge_table(dim_);
  for (std::size_t k = 0; k < cells_.size(); ++k) {
    const auto cell = mesh.cell(cells_[k]);
    int* out = &cell_nodes_[k * nloc_];
    for (int a = 0; a <= dim_; ++a) out[a] = vertex_node_[cell[a]];
    if (order == 2) {
      for (int e = 0; e < num_edges(dim_); ++e) {
        const int va = cell[edges[e][0]], vb = cell[edges[e][1]];
        auto [it, inserted] = edge_node_.try_emplace(edge_key(va, vb), static_cast<int>(node_position_.size()));
        if (inserted) node_position_.push_back(0.5 * (mesh.vertex(va) + mesh.vertex(vb)));
        out[dim_ + 1 + e] = it->second;
      }
    }
  }
}

std::span<const int> DofMap::cell_nodes(int cell) const {
  const int off = cell_offset_[cell];
  if (off < 0) throw InputError("DofMap: cell outside the region");
  return {cell_nodes_.data() + off, static_cast<std::size_t>(nloc_)};
}

int DofMap::edge_node(int a, int b) const {
  auto it = edge_node_.find(edge_key(a, b));
  return it == edge_node_.end() ? -1 : it->second;
}

std::vector<int> DofMap::facet_nodes(const Facet& f) const {
  std::vector<int> out;
  for (int i = 0; i < dim_; ++i) out.push_back(vertex_node_[f.vertices[i]]);
  if (order_ == 2) {
    const auto* edges = edge_table(dim_ - 1);
    for (int e = 0; e < num_edges(dim_ - 1); ++e) {
      out.push_back(edge_node(f.vertices[edges[e][0]], f.vertices[edges[e][1]]));
    }
  }
  for (int n : out) {
    if (n < 0) throw InputError("DofMap: facet not covered by the region");
  }
  return out;
}

std::vector<int> DofMap::boundary_nodes(const Mesh& mesh, FacetTag tag) const {
  std::vector<int> out;
  for (const auto& f : mesh.facets()) {
    if (f.tag != tag) continue;
    for (int n : facet_nodes(f)) out.push_back(n);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<int> DofMap::boundary_dofs(const Mesh& mesh, FacetTag tag) const {
  std::vector<int> out;
  for (int n : boundary_nodes(mesh, tag)) {
    for (int i = 0; i < components(); ++i) out.push_back(dof(n, i));
  }
  return out;
}

VectorXd DofMap::interpolate(const std::function<double(const Point&)>& f) const {
  if (kind_ != FieldKind::scalar) throw InputError("interpolate: scalar map required");
  VectorXd out(num_nodes());
  for (int n = 0; n < num_nodes(); ++n) out[n] = f(node_position_[n]);
  return out;
}

VectorXd DofMap::interpolate_vector(const std::function<Point(const Point&)>& f) const {
  if (kind_ != FieldKind::vector) throw InputError("interpolate_vector: vector map required");
  VectorXd out(num_dofs());
  for (int n = 0; n < num_nodes(); ++n) {
    const Point v = f(node_position_[n]);
    for (int i = 0; i < dim_; ++i) out[dof(n, i)] = v[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Assembly

LameSystem assemble_lame(const Mesh& mesh, const MaterialParams& params, int order) {
  check_order(order);
  params.validate();
  require_solid(mesh);
  DofMap dofs(mesh, FieldKind::vector, order, RegionRestriction::solid);
  SparseMatrix K = assemble_form(mesh, dofs, Form::lame, params, params.shift);
  SparseMatrix M = assemble_form(mesh, dofs, Form::mass, params, false);
  return {std::move(dofs), std::move(K), std::move(M), params};
}

LameSystem assemble_vector_laplacian(const Mesh& mesh, int order, bool shift) {
  check_order(order);
  require_solid(mesh);
  MaterialParams p;
  p.shift = shift;
  DofMap dofs(mesh, FieldKind::vector, order, RegionRestriction::solid);
  SparseMatrix K = assemble_form(mesh, dofs, Form::vector_laplacian, p, shift);
  SparseMatrix M = assemble_form(mesh, dofs, Form::mass, p, false);
  return {std::move(dofs), std::move(K), std::move(M), p};
}

ScalarSystem assemble_scalar_laplacian(const Mesh& mesh, int order) {
  check_order(order);
  require_solid(mesh);
  DofMap dofs(mesh, FieldKind::scalar, order, RegionRestriction::solid);
  MaterialParams p;
  SparseMatrix A = assemble_form(mesh, dofs, Form::scalar_stiffness, p, false);
  SparseMatrix M = assemble_form(mesh, dofs, Form::mass, p, false);
  return {std::move(dofs), std::move(A), std::move(M)};
}

CoupledSystem assemble_coupled(const Mesh& mesh, const MaterialParams& params, int velocity_order,
                               int pressure_order) {
  params.validate();
  if (!mesh.has_fluid() || !mesh.has_solid()) throw InputError("assemble_coupled: mesh needs solid and fluid regions");
  if (velocity_order != 2 || pressure_order != 1) {
    throw InputError("assemble_coupled: only the inf-sup stable pair (velocity 2, pressure 1) is supported");
  }
  const int dim = mesh.dim();
  DofMap velocity(mesh, FieldKind::vector, 2, RegionRestriction::global);
  DofMap pressure(mesh, FieldKind::scalar, 1, RegionRestriction::fluid);
  LameSystem solid = assemble_lame(mesh, params, 2);

  SparseMatrix M_w = assemble_form(mesh, velocity, Form::mass, params, false);

  Triplets tv, tb;
  const auto& tab_p = basis_table(dim, 1, 2);
  const auto& tab_v = basis_table(dim, 2, 2);
  for (int c : pressure.cells()) {
    const CellGeometry g = cell_geometry(mesh, c);
    Eigen::MatrixXd local = local_matrix(Form::viscous, g, dim, 2, params);
    scatter_local(tv, velocity, c, local);
    const auto vn = velocity.cell_nodes(c);
    const auto pn = pressure.cell_nodes(c);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(pn.size(), vn.size() * dim);
    for (std::size_t q = 0; q < tab_v.weights.size(); ++q) {
      const Eigen::MatrixXd grad = tab_v.dlam[q] * g.grad_lambda;
      const double w = tab_v.weights[q] * g.volume;
      for (std::size_t r = 0; r < pn.size(); ++r) {
        const double pi = tab_p.phi[q][r];
        for (std::size_t a = 0; a < vn.size(); ++a) {
          for (int i = 0; i < dim; ++i) b(r, a * dim + i) += w * pi * grad(a, i);
        }
      }
    }
    for (std::size_t r = 0; r < pn.size(); ++r) {
      for (std::size_t a = 0; a < vn.size(); ++a) {
        for (int i = 0; i < dim; ++i) {
          const double v = b(r, a * dim + i);
          if (v != 0.0) tb.emplace_back(pn[r], velocity.dof(vn[a], i), v);
        }
      }
    }
  }
  SparseMatrix A_visc = from_triplets(velocity.num_dofs(), velocity.num_dofs(), tv, true);
  SparseMatrix B_div = from_triplets(pressure.num_dofs(), velocity.num_dofs(), tb, false);

  std::vector<int> s2v(solid.dofs.num_dofs(), -1);
  for (int c : solid.dofs.cells()) {
    const auto sn = solid.dofs.cell_nodes(c);
    const auto vn = velocity.cell_nodes(c);
    for (std::size_t a = 0; a < sn.size(); ++a) {
      for (int i = 0; i < dim; ++i) s2v[solid.dofs.dof(sn[a], i)] = velocity.dof(vn[a], i);
    }
  }
  Triplets tt;
  for (std::size_t k = 0; k < s2v.size(); ++k) tt.emplace_back(static_cast<int>(k), s2v[k], 1.0);
  SparseMatrix trace = from_triplets(solid.dofs.num_dofs(), velocity.num_dofs(), tt, false);

  std::vector<int> outer = velocity.boundary_dofs(mesh, FacetTag::outer);
  return CoupledSystem{std::move(velocity), std::move(pressure), std::move(solid.dofs),
                       std::move(M_w),      std::move(A_visc),   std::move(B_div),
                       std::move(solid.K),  std::move(solid.M),  std::move(trace),
                       std::move(s2v),      std::move(outer),    params};
}

namespace {

// Mixed first-order form over the cells shared by both maps:
// entry (a, (b, i)) = int phi_a d_i psi_b when `derivative_on_vector`,
// otherwise ((b, i), a) = int psi_b d_i phi_a.
SparseMatrix mixed_derivative(const Mesh& mesh, const DofMap& scalar, const DofMap& vector, bool derivative_on_vector) {
  if (scalar.kind() != FieldKind::scalar || vector.kind() != FieldKind::vector) {
    throw InputError("mixed derivative: expected a scalar and a vector map");
  }
  const int dim = mesh.dim();
  const int degree = scalar.order() + vector.order() - 1;
  const auto& ts = basis_table(dim, scalar.order(), degree);
  const auto& tv = basis_table(dim, vector.order(), degree);
  Triplets t;
  for (int c : scalar.cells()) {
    if (!vector.in_region(c)) continue;
    const CellGeometry g = cell_geometry(mesh, c);
    const auto sn = scalar.cell_nodes(c);
    const auto vn = vector.cell_nodes(c);
    Eigen::MatrixXd local = Eigen::MatrixXd::Zero(sn.size(), vn.size() * dim);
    for (std::size_t q = 0; q < ts.weights.size(); ++q) {
      const double w = ts.weights[q] * g.volume;
      if (derivative_on_vector) {
        const Eigen::MatrixXd grad = tv.dlam[q] * g.grad_lambda;
        for (std::size_t a = 0; a < sn.size(); ++a) {
          for (std::size_t b = 0; b < vn.size(); ++b) {
            for (int i = 0; i < dim; ++i) local(a, b * dim + i) += w * ts.phi[q][a] * grad(b, i);
          }
        }
      } else {
        const Eigen::MatrixXd grad = ts.dlam[q] * g.grad_lambda;
        for (std::size_t a = 0; a < sn.size(); ++a) {
          for (std::size_t b = 0; b < vn.size(); ++b) {
            for (int i = 0; i < dim; ++i) local(a, b * dim + i) += w * tv.phi[q][b] * grad(a, i);
          }
        }
      }
    }
    for (std::size_t a = 0; a < sn.size(); ++a) {
      for (std::size_t b = 0; b < vn.size(); ++b) {
        for (int i = 0; i < dim; ++i) {
          const double v = local(a, b * dim + i);
          if (v == 0.0) continue;
          if (derivative_on_vector) {
            t.emplace_back(sn[a], vector.dof(vn[b], i), v);
          } else {
            t.emplace_back(vector.dof(vn[b], i), sn[a], v);
          }
        }
      }
    }
  }
  return derivative_on_vector ? from_triplets(scalar.num_dofs(), vector.num_dofs(), t, false)
                              : from_triplets(vector.num_dofs(), scalar.num_dofs(), t, false);
}

}  // namespace

SparseMatrix assemble_divergence(const Mesh& mesh, const DofMap& scalar, const DofMap& vector) {
  return mixed_derivative(mesh, scalar, vector, true);
}

SparseMatrix assemble_gradient(const Mesh& mesh, const DofMap& vector, const DofMap& scalar) {
  return mixed_derivative(mesh, scalar, vector, false);
}

SparseMatrix apply_dirichlet(const SparseMatrix& a, std::span<const int> dofs, double diagonal) {
  if (a.rows() != a.cols()) throw InputError("apply_dirichlet: square matrix required");
  std::vector<char> mark(a.rows(), 0);
  for (int d : dofs) {
    if (d < 0 || d >= a.rows()) throw InputError("apply_dirichlet: DOF out of range");
    mark[d] = 1;
  }
  Triplets t;
  t.reserve(a.data().nonZeros());
  for (int r = 0; r < a.rows(); ++r) {
    if (mark[r]) continue;
    for (SparseMatrix::Storage::InnerIterator it(a.data(), r); it; ++it) {
      if (!mark[it.col()]) t.emplace_back(r, static_cast<int>(it.col()), it.value());
    }
  }
  for (int r = 0; r < a.rows(); ++r) {
    if (mark[r]) t.emplace_back(r, r, diagonal);
  }
  SparseMatrix::Storage s(a.rows(), a.cols());
  s.setFromTriplets(t.begin(), t.end());
  std::vector<int> constrained(dofs.begin(), dofs.end());
  std::sort(constrained.begin(), constrained.end());
  constrained.erase(std::unique(constrained.begin(), constrained.end()), constrained.end());
  return SparseMatrix(std::move(s), a.symmetric(), std::move(constrained));
}

// ---------------------------------------------------------------------------
// Facet fields and boundary fluxes

int FacetField::nodes_per_facet() const { return basis_size(mesh_dim - 1, order); }

const Eigen::MatrixXd& facet_reference_mass(int dim, int order) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, Eigen::MatrixXd> cache;
  std::lock_guard lock(mutex);
  auto key = std::make_pair(dim, order);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  const auto& rule = simplex_rule(dim - 1, 2 * order);
  const int n = basis_size(dim - 1, order);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t q = 0; q < rule.weights.size(); ++q) {
    Eigen::VectorXd phi;
    eval_basis(dim - 1, order, rule.points[q], phi, nullptr);
    m.noalias() += rule.weights[q] * phi * phi.transpose();
  }
  return cache.emplace(key, std::move(m)).first->second;
}

double facet_inner(const Mesh& mesh, const FacetField& a, const FacetField& b) {
  if (a.facets != b.facets || a.order != b.order || a.values.rows() != b.values.rows() ||
      a.values.cols() != b.values.cols()) {
    throw InputError("facet_inner: incompatible facet fields");
  }
  const int n = a.nodes_per_facet();
  const Eigen::MatrixXd& ref = facet_reference_mass(a.mesh_dim, a.order);
  double total = 0.0;
  for (std::size_t k = 0; k < a.facets.size(); ++k) {
    const auto& f = mesh.facets()[a.facets[k]];
    const auto ba = a.values.middleRows(k * n, n);
    const auto bb = b.values.middleRows(k * n, n);
    total += f.measure * (ba.transpose() * ref * bb).trace();
  }
  return total;
}

FacetField facet_normals(const Mesh& mesh, const FacetField& like) {
  FacetField out = like;
  const int n = like.nodes_per_facet();
  out.values.resize(like.facets.size() * n, mesh.dim());
  for (std::size_t k = 0; k < like.facets.size(); ++k) {
    const auto& f = mesh.facets()[like.facets[k]];
    for (int a = 0; a < n; ++a) out.values.row(k * n + a) = f.normal.head(mesh.dim()).transpose();
  }
  return out;
}

FacetField facet_trace(const Mesh& mesh, const DofMap& dofs, const VectorXd& field) {
  if (field.size() != dofs.num_dofs()) throw InputError("facet_trace: field size mismatch");
  FacetField out;
  out.mesh_dim = mesh.dim();
  out.order = dofs.order();
  out.facets = mesh.facet_indices(FacetTag::interface);
  const int n = out.nodes_per_facet();
  const int nc = dofs.components();
  out.values.resize(out.facets.size() * n, nc);
  for (std::size_t k = 0; k < out.facets.size(); ++k) {
    const auto nodes = dofs.facet_nodes(mesh.facets()[out.facets[k]]);
    for (int a = 0; a < n; ++a) {
      for (int i = 0; i < nc; ++i) out.values(k * n + a, i) = field[dofs.dof(nodes[a], i)];
    }
  }
  return out;
}

SparseMatrix interface_mass(const Mesh& mesh, const DofMap& dofs) {
  const Eigen::MatrixXd& ref = facet_reference_mass(mesh.dim(), dofs.order());
  const int nc = dofs.components();
  Triplets t;
  for (const auto& f : mesh.facets()) {
    if (f.tag != FacetTag::interface) continue;
    const auto nodes = dofs.facet_nodes(f);
    for (std::size_t a = 0; a < nodes.size(); ++a) {
      for (std::size_t b = 0; b < nodes.size(); ++b) {
        for (int i = 0; i < nc; ++i) {
          t.emplace_back(dofs.dof(nodes[a], i), dofs.dof(nodes[b], i), f.measure * ref(a, b));
        }
      }
    }
  }
  return from_triplets(dofs.num_dofs(), dofs.num_dofs(), t, true);
}

FacetField boundary_flux(const Mesh& mesh, const DofMap& dofs, const SparseMatrix& K, const SparseMatrix& M,
                         const VectorXd& psi, double pencil_value) {
  if (psi.size() != dofs.num_dofs()) throw InputError("boundary flux: field size mismatch");
  const std::vector<int> bd = dofs.boundary_dofs(mesh, FacetTag::interface);
  const double scale = psi.cwiseAbs().maxCoeff();
  for (int d : bd) {
    if (std::abs(psi[d]) > 1e-10 * scale) {
      throw InputError("boundary flux: field violates the Dirichlet condition on the interface");
    }
  }
  VectorXd full = VectorXd::Zero(dofs.num_dofs());
  if (scale > 0.0) {
    const VectorXd r = K * psi - pencil_value * (M * psi);
    const SparseMatrix mb = interface_mass(mesh, dofs);
    const SpMat mbb = submatrix(mb.colmajor(), bd, bd);
    SparseFactor factor(mbb, SparseFactor::Kind::spd);
    scatter(full, bd, factor.solve(gather(r, bd)));
  }
  return facet_trace(mesh, dofs, full);
}

FacetField boundary_traction(const Mesh& mesh, const LameSystem& sys, const VectorXd& psi, double mu) {
  return boundary_flux(mesh, sys.dofs, sys.K, sys.M, psi, mu + (sys.params.shift ? 1.0 : 0.0));
}

FacetField scalar_boundary_flux(const Mesh& mesh, const ScalarSystem& sys, const VectorXd& u, double mu) {
  if (u.size() != sys.dofs.num_dofs()) throw InputError("scalar flux: field size mismatch");
  const std::vector<int> bd = sys.dofs.boundary_dofs(mesh, FacetTag::interface);
  const VectorXd r = sys.A * u - mu * (sys.M * u);
  const SparseMatrix mb = interface_mass(mesh, sys.dofs);
  SparseFactor factor(submatrix(mb.colmajor(), bd, bd), SparseFactor::Kind::spd);
  VectorXd full = VectorXd::Zero(sys.dofs.num_dofs());
  scatter(full, bd, factor.solve(gather(r, bd)));
  return facet_trace(mesh, sys.dofs, full);
}

double inner_h1(const LameSystem& sys, const VectorXd& x, const VectorXd& y) {
  if (x.size() != sys.dofs.num_dofs() || y.size() != sys.dofs.num_dofs()) {
    throw InputError("inner_h1: field size mismatch");
  }
  const double v = x.dot(sys.K * y);
  return sys.params.shift ? v : v + x.dot(sys.M * y);
}

double inner_l2(const LameSystem& sys, const VectorXd& x, const VectorXd& y) {
  if (x.size() != sys.dofs.num_dofs() || y.size() != sys.dofs.num_dofs()) {
    throw InputError("inner_l2: field size mismatch");
  }
  return x.dot(sys.M * y);
}

// ---------------------------------------------------------------------------
// Export

void write_matrix_market(std::ostream& out, const SparseMatrix& a) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.rows() << " " << a.cols() << " " << a.data().nonZeros() << "\n";
  out.precision(17);
  for (int r = 0; r < a.rows(); ++r) {
    for (SparseMatrix::Storage::InnerIterator it(a.data(), r); it; ++it) {
      out << r + 1 << " " << it.col() + 1 << " " << it.value() << "\n";
    }
  }
}

void write_vtk(std::ostream& out, const Mesh& mesh, const std::vector<VtkField>& fields) {
  const int d = mesh.dim();
  out << "# vtk DataFile Version 3.0\n" << mesh.descriptor() << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out.precision(17);
  out << "POINTS " << mesh.num_vertices() << " double\n";
  for (const auto& p : mesh.vertices()) out << p.x() << " " << p.y() << " " << p.z() << "\n";
  out << "CELLS " << mesh.num_cells() << " " << mesh.num_cells() * (d + 2) << "\n";
  for (int c = 0; c < mesh.num_cells(); ++c) {
    out << d + 1;
    for (int v : mesh.cell(c)) out << " " << v;
    out << "\n";
  }
  out << "CELL_TYPES " << mesh.num_cells() << "\n";
  for (int c = 0; c < mesh.num_cells(); ++c) out << (d == 2 ? 5 : 10) << "\n";
  out << "CELL_DATA " << mesh.num_cells() << "\nSCALARS region int 1\nLOOKUP_TABLE default\n";
  for (int c = 0; c < mesh.num_cells(); ++c) out << static_cast<int>(mesh.cell_region(c)) << "\n";
  if (fields.empty()) return;
  out << "POINT_DATA " << mesh.num_vertices() << "\n";
  for (const auto& f : fields) {
    const int nc = f.dofs->components();
    if (nc == 1) {
      out << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
    } else {
      out << "VECTORS " << f.name << " double\n";
    }
    for (int v = 0; v < mesh.num_vertices(); ++v) {
      const int node = f.dofs->vertex_node(v);
      double val[3] = {0.0, 0.0, 0.0};
      if (node >= 0) {
        for (int i = 0; i < nc; ++i) val[i] = (*f.values)[f.dofs->dof(node, i)];
      }
      if (nc == 1) {
        out << val[0] << "\n";
      } else {
        out << val[0] << " " << val[1] << " " << val[2] << "\n";
      }
    }
  }
}

}  // namespace lamewave

namespace lamewave {

SparseMatrix assemble_convection(const Mesh& mesh, const DofMap& velocity, const VectorXd& w) {
  if (velocity.kind() != FieldKind::vector) throw InputError("assemble_convection: vector map required");
  if (w.size() != velocity.num_dofs()) throw InputError("assemble_convection: field size mismatch");
  const int dim = mesh.dim();
  const int order = velocity.order();
  const auto& tab = basis_table(dim, order, 3 * order - 1);
  Triplets t;
  for (int c : velocity.cells()) {
    if (mesh.cell_region(c) != Region::fluid) continue;
    const CellGeometry g = cell_geometry(mesh, c);
    const auto nodes = velocity.cell_nodes(c);
    const int n = static_cast<int>(nodes.size());
    Eigen::MatrixXd wl(n, dim);
    for (int a = 0; a < n; ++a) {
      for (int i = 0; i < dim; ++i) wl(a, i) = w[velocity.dof(nodes[a], i)];
    }
    Eigen::MatrixXd local = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t q = 0; q < tab.weights.size(); ++q) {
      const Eigen::MatrixXd grad = tab.dlam[q] * g.grad_lambda;
      const Eigen::VectorXd wq = wl.transpose() * tab.phi[q];
      const Eigen::VectorXd adv = grad * wq;  // w . grad phi_b
      // 1/2 [(w . grad phi_b) phi_a - (w . grad phi_a) phi_b]
      local.noalias() += 0.5 * tab.weights[q] * g.volume * (tab.phi[q] * adv.transpose() - adv * tab.phi[q].transpose());
    }
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        if (local(a, b) == 0.0) continue;
        for (int i = 0; i < dim; ++i) t.emplace_back(velocity.dof(nodes[a], i), velocity.dof(nodes[b], i), local(a, b));
      }
    }
  }
  return from_triplets(velocity.num_dofs(), velocity.num_dofs(), t, false);
}

}  // namespace lamewave
