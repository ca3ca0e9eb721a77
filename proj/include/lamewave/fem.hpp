#pragma once

#include "lamewave/linalg.hpp"
#include "lamewave/mesh.hpp"

#include <Eigen/SparseCore>

#include <functional>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace lamewave {

// Material constants. L(xi) = lambda0 D(xi) + lambda1 div(xi) Id with
// D(v) = (grad v + grad v^T)/2. `shift` adds the zeroth-order term that makes
// the elastic form the H1 inner product.
struct MaterialParams {
  double lambda0 = 1.0;
  double lambda1 = 1.0;
  double nu = 1.0;
  bool shift = true;

  double lambda() const { return lambda0 + lambda1; }
  void validate() const;  // throws InputError
};

// Compressed-row sparse matrix with a symmetry flag and the list of DOFs on
// which Dirichlet constraints were imposed (rows/columns zeroed, unit-scaled
// diagonal).
class SparseMatrix {
 public:
  using Storage = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

  SparseMatrix() = default;
  SparseMatrix(Storage data, bool symmetric, std::vector<int> constrained = {});

  int rows() const { return static_cast<int>(data_.rows()); }
  int cols() const { return static_cast<int>(data_.cols()); }
  const Storage& data() const { return data_; }
  SpMat colmajor() const { return SpMat(data_); }
  bool symmetric() const { return symmetric_; }
  const std::vector<int>& constrained() const { return constrained_; }

  VectorXd operator*(const VectorXd& x) const { return data_ * x; }
  double max_abs() const;
  // max |A - A^T| / max |A|.
  double asymmetry() const;

 private:
  Storage data_;
  bool symmetric_ = false;
  std::vector<int> constrained_;
};

enum class FieldKind { scalar, vector };
enum class RegionRestriction { solid, fluid, global };

// Lagrange DOF numbering. Nodes are the region's vertices (ascending global
// vertex index) followed, for order 2, by its edges in first-encounter order
// over the region's cells. Vector DOFs are interleaved: dof = node*dim + comp.
class DofMap {
 public:
  DofMap(const Mesh& mesh, FieldKind kind, int order, RegionRestriction region);

  FieldKind kind() const { return kind_; }
  int order() const { return order_; }
  RegionRestriction region() const { return region_; }
  int dim() const { return dim_; }
  int components() const { return kind_ == FieldKind::vector ? dim_ : 1; }
  int num_nodes() const { return static_cast<int>(node_position_.size()); }
  int num_dofs() const { return num_nodes() * components(); }
  int nodes_per_cell() const { return nloc_; }
  int dof(int node, int comp) const { return node * components() + comp; }

  const std::vector<int>& cells() const { return cells_; }  // region cells
  bool in_region(int cell) const { return cell_offset_[cell] >= 0; }
  // Local nodes of a region cell: vertices in cell order, then edges
  // (0,1),(0,2),(1,2) in 2D or (0,1),(0,2),(0,3),(1,2),(1,3),(2,3) in 3D.
  std::span<const int> cell_nodes(int cell) const;

  int vertex_node(int vertex) const { return vertex_node_[vertex]; }  // -1 if absent
  int edge_node(int a, int b) const;                                  // -1 if absent
  const Point& node_position(int node) const { return node_position_[node]; }
  // Nodes of a facet: its vertices in facet order, then (order 2) its edges
  // in the local order (0,1) / (0,1),(0,2),(1,2).
  std::vector<int> facet_nodes(const Facet& facet) const;
  // Sorted unique nodes lying on facets with the given tag.
  std::vector<int> boundary_nodes(const Mesh& mesh, FacetTag tag) const;
  // All DOFs (every component) of boundary_nodes.
  std::vector<int> boundary_dofs(const Mesh& mesh, FacetTag tag) const;

  // Nodal interpolation of a function of position.
  VectorXd interpolate(const std::function<double(const Point&)>& f) const;
  VectorXd interpolate_vector(const std::function<Point(const Point&)>& f) const;

 private:
  FieldKind kind_;
  int order_;
  RegionRestriction region_;
  int dim_;
  int nloc_;
  std::vector<int> cells_;
  std::vector<int> cell_offset_;
  std::vector<int> cell_nodes_;
  std::vector<int> vertex_node_;
  std::unordered_map<std::uint64_t, int> edge_node_;
  std::vector<Point> node_position_;
};

struct LameSystem {
  DofMap dofs;
  SparseMatrix K;  // elastic form (+ mass if params.shift)
  SparseMatrix M;  // vector L2 mass
  MaterialParams params;
};

struct ScalarSystem {
  DofMap dofs;
  SparseMatrix A;  // stiffness
  SparseMatrix M;  // mass
};

// Elastic stiffness and mass on the solid cells of `mesh`.
LameSystem assemble_lame(const Mesh& mesh, const MaterialParams& params, int order);
// Vector Laplacian form (grad u : grad v) (+ mass if shift) on the solid cells.
LameSystem assemble_vector_laplacian(const Mesh& mesh, int order, bool shift);
// Scalar Laplacian on the solid cells.
ScalarSystem assemble_scalar_laplacian(const Mesh& mesh, int order);

// Blocks of the monolithic fluid-structure system
//   M_w w' + A_visc w + T^T K_S xi - B_div^T p = 0,  B_div w = 0,  xi' = T w,
// with w a global velocity field (order 2), p the fluid pressure (order 1)
// and xi the solid displacement. T is the selector of solid DOFs in w.
struct CoupledSystem {
  DofMap velocity;
  DofMap pressure;
  DofMap solid;
  SparseMatrix M_w;     // global vector mass
  SparseMatrix A_visc;  // 2 nu (D u, D v) over fluid cells
  SparseMatrix B_div;   // (pi, div v) over fluid cells; pressure rows
  SparseMatrix K_S;     // elastic form on the solid DOFs
  SparseMatrix M_S;     // solid mass
  SparseMatrix trace;   // T: solid DOFs x velocity DOFs (0/1 selector)
  std::vector<int> solid_to_velocity;  // velocity DOF of each solid DOF
  std::vector<int> outer_dofs;         // velocity DOFs on OUTER facets
  MaterialParams params;
};

CoupledSystem assemble_coupled(const Mesh& mesh, const MaterialParams& params,
                               int velocity_order = 2, int pressure_order = 1);

// Mixed forms on the cells shared by a scalar and a vector map:
// divergence (phi_a, div psi_b) with scalar rows, and gradient
// (psi_b, grad phi_a) with vector rows.
SparseMatrix assemble_divergence(const Mesh& mesh, const DofMap& scalar, const DofMap& vector);
SparseMatrix assemble_gradient(const Mesh& mesh, const DofMap& vector, const DofMap& scalar);

// Skew-symmetric convection form 1/2[((w.grad) u, v) - ((w.grad) v, u)] over
// the fluid cells of a global velocity map.
SparseMatrix assemble_convection(const Mesh& mesh, const DofMap& velocity, const VectorXd& w);

// Dirichlet elimination: zero rows and columns of `dofs`, put `diagonal` on
// the diagonal. Symmetry is retained.
SparseMatrix apply_dirichlet(const SparseMatrix& a, std::span<const int> dofs, double diagonal);

// A vector field on interface facets, nodal per facet (discontinuous across
// facets). Rows are facet-local nodes: facet i (in `facets` order) owns rows
// [i*n, (i+1)*n) with n = nodes per facet; columns are field components.
struct FacetField {
  int mesh_dim = 3;
  int order = 1;
  std::vector<int> facets;  // indices into mesh.facets(), interface facets
  Eigen::MatrixXd values;

  int nodes_per_facet() const;
};

// Reference mass matrix of the order-`order` Lagrange basis on a facet of a
// `dim`-dimensional mesh, normalized to unit facet measure.
const Eigen::MatrixXd& facet_reference_mass(int dim, int order);

// <a, b> in the facet L2 inner product.
double facet_inner(const Mesh& mesh, const FacetField& a, const FacetField& b);
// Facet field with the facet normal at every node, in the layout of `like`.
FacetField facet_normals(const Mesh& mesh, const FacetField& like);
// Facet field of the interface trace of a continuous vector field.
FacetField facet_trace(const Mesh& mesh, const DofMap& dofs, const VectorXd& field);

// Boundary traction L(psi) n recovered as the consistent variational flux of
// the residual K psi - mu M psi (unshifted eigenvalue mu), converted to a
// field via the interface mass. psi must vanish on the interface.
FacetField boundary_traction(const Mesh& mesh, const LameSystem& sys, const VectorXd& psi, double mu);
// Same, with an explicit operator in place of the elastic form (used by the
// vector-Laplacian variant); `pencil_value` multiplies the mass.
FacetField boundary_flux(const Mesh& mesh, const DofMap& dofs, const SparseMatrix& K,
                         const SparseMatrix& M, const VectorXd& psi, double pencil_value);
// Scalar analogue: the normal flux of a scalar field (one component).
FacetField scalar_boundary_flux(const Mesh& mesh, const ScalarSystem& sys, const VectorXd& u,
                                     double mu);

// Interface mass matrices on continuous node fields (rows/cols = all nodes or
// DOFs of the map, nonzero only on interface nodes).
SparseMatrix interface_mass(const Mesh& mesh, const DofMap& dofs);

// H1 inner product (xi, eta) + (L(xi), D(eta)), i.e. x^T K_shift y.
double inner_h1(const LameSystem& sys, const VectorXd& x, const VectorXd& y);
double inner_l2(const LameSystem& sys, const VectorXd& x, const VectorXd& y);

// Matrix Market coordinate (general, real) writer.
void write_matrix_market(std::ostream& out, const SparseMatrix& a);

// VTK legacy ASCII unstructured grid with vertex-based point data. Fields are
// node vectors of `dofs`; only vertex nodes are written.
struct VtkField {
  std::string name;
  const DofMap* dofs;
  const VectorXd* values;
};
void write_vtk(std::ostream& out, const Mesh& mesh, const std::vector<VtkField>& fields);

}  // namespace lamewave
