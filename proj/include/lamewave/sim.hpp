#pragma once

#include "lamewave/decomp.hpp"
#include "lamewave/fem.hpp"

#include "json.hpp"

#include <complex>
#include <iosfwd>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

namespace lamewave {

// State of the monolithic system: solid displacement, global velocity
// (fluid velocity on the fluid, solid velocity on the solid, zero on the
// outer boundary) and fluid pressure.
struct CoupledState {
  double t = 0.0;
  VectorXd xi;
  VectorXd w;
  VectorXd p;
};

struct StepOptions {
  bool convection = false;
  int picard_max = 30;
  double picard_tol = 1e-10;
};

// Implicit midpoint stepping of
//   M_w w' + A w + T^T K xi - B^T p = 0,  B w = 0,  xi' = T w
// with a fixed step. The saddle-point matrix is factored once when convection
// is off, and per Picard iterate otherwise (skew-symmetric convection).
class CoupledStepper {
 public:
  CoupledStepper(const Mesh& mesh, const MaterialParams& params, double dt, StepOptions options = {});
  ~CoupledStepper();
  CoupledStepper(CoupledStepper&&) noexcept;

  const CoupledSystem& system() const { return sys_; }
  const Mesh& mesh() const { return mesh_; }
  double dt() const { return dt_; }

  CoupledState zero_state() const;
  // State with solid displacement xi, solid velocity zeta and fluid
  // velocity taken from `w_fluid` (global velocity vector; solid entries are
  // replaced by zeta, outer entries by zero).
  CoupledState make_state(const VectorXd& xi, const VectorXd& zeta, const VectorXd& w_fluid) const;

  double energy(const CoupledState& s) const;
  double fluid_l2(const CoupledState& s) const;   // ||w||_{L2(fluid)}
  double divergence_norm(const CoupledState& s) const;  // ||B w||_2
  VectorXd solid_velocity(const CoupledState& s) const;  // T w

  // One step. `dissipation` receives dt * y^T A y (y the midpoint velocity)
  // and `identity_residual` E(n+1) - E(n) + dissipation.
  CoupledState step(const CoupledState& s, double* dissipation = nullptr, double* identity_residual = nullptr) const;
  // Step backwards in time (-dt), used by the reversibility check.
  CoupledState step_back(const CoupledState& s) const;

  // L2-closest discretely divergence-free velocity (solid part included).
  VectorXd project_divergence_free(const VectorXd& w) const;

  const SparseMatrix& fluid_mass() const { return fluid_mass_; }

 private:
  CoupledState advance(const CoupledState& s, double dt, double* dissipation, double* residual) const;

  const Mesh& mesh_;
  CoupledSystem sys_;
  double dt_;
  StepOptions options_;
  SparseMatrix fluid_mass_;
  std::vector<int> free_;  // non-outer velocity DOFs
  struct Cache;
  std::unique_ptr<Cache> cache_;
};

// Midpoint stepping of the solid alone with the fluid frozen (interface
// DOFs held at zero): M zeta' = -K xi, xi' = zeta. Symmetric in time.
class SolidStepper {
 public:
  SolidStepper(const Mesh& mesh, const LameSystem& sys, double dt);
  ~SolidStepper();
  std::pair<VectorXd, VectorXd> step(const VectorXd& xi, const VectorXd& zeta, bool backward = false) const;

 private:
  double dt_;
  std::vector<int> interior_;
  SpMat k_, m_;
  std::unique_ptr<SparseFactor> factor_;
};

// E = 1/2 ||w||^2 + 1/2 (L(xi), D(xi)) (+ 1/2 ||xi||^2 with the shift).
double energy(const CoupledStepper& stepper, const CoupledState& s);
CoupledState step(const CoupledStepper& stepper, const CoupledState& s);

struct TrajectorySample {
  double t = 0.0;
  double energy = 0.0;
  double dissipation = 0.0;  // accumulated since t = 0
  double k_xi = 0.0;
  double u_norm = 0.0;       // ||u||_{L2(fluid)}
  std::vector<double> xi_h;  // W-coefficients (if a basis was supplied)
  std::vector<double> zeta_l;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  std::vector<int> w_indices;
  double max_identity_residual = 0.0;  // max |E(n+1) - E(n) + D(n)| / max(E(0), tiny)
  double max_energy_increase = 0.0;    // max (E(n+1) - E(n)) / max(E(0), tiny)
  double max_k_drift = 0.0;            // max |K_xi(t) - K_xi(0)|
  bool initial_projected = false;
  double initial_divergence = 0.0;
  CoupledState final_state;
};

struct SimulationOptions {
  StepOptions step;
  int stride = 1;
  // Optional W-coefficient sampling.
  const std::vector<EigenPair>* basis = nullptr;
  std::vector<int> indices;
};

// Integrates from (xi0, xi1, u0) to time T. u0 is a global velocity vector
// (its solid and outer entries are ignored). Initial data that are not
// discretely divergence free are projected and the event is recorded.
Trajectory simulate(const CoupledStepper& stepper, const VectorXd& xi0, const VectorXd& xi1, const VectorXd& u0,
                    double T, const SimulationOptions& options = {});

void write_trajectory_csv(std::ostream& out, const Trajectory& tr);

// Dense first-order generator of (xi, w) on the discretely divergence-free
// velocities, in standard form (reduced velocity coordinates are mass
// orthonormal). When the mesh is symmetric under the coordinate reflections
// the generator is block-diagonalized into the reflection sectors, which
// yields the full spectrum from small dense blocks.
struct GeneratorBlock {
  int sector = 0;            // character: bit i set = odd under reflection of axis i
  Eigen::MatrixXd A;         // (solid + reduced velocity) square
  int solid_dofs = 0;
  int reduced_velocity = 0;
  Eigen::MatrixXd elastic;     // solid x solid
  Eigen::MatrixXd fluid_mass;  // reduced x reduced
};

struct GeneratorPencil {
  std::vector<GeneratorBlock> blocks;
  int solid_dofs = 0;      // full sizes of the (xi, w, p) pencil
  int velocity_dofs = 0;   // free velocity DOFs
  int pressure_dofs = 0;
  int reflections = 0;     // number of coordinate reflections used (0: one block)
  int max_block = 0;
  double scale = 0.0;      // max over blocks of the infinity norm
  // Pressure is determined: the divergence has full row rank (otherwise one
  // pressure DOF is effectively pinned and `regular` is false).
  bool regular = true;
};

// Throws InputError when a dense block exceeds `max_dense`.
GeneratorPencil generator_pencil(const Mesh& mesh, const MaterialParams& params, int max_dense = 5000);

struct SpectralPoint {
  std::complex<double> z;
  double fluid_fraction = 0.0;  // fluid kinetic energy / total energy of the eigenvector
  int sector = 0;
};

struct GeneratorSpectrum {
  std::vector<std::complex<double>> eigenvalues;  // all
  std::vector<SpectralPoint> window;              // imaginary part within the window
  double max_real = 0.0;
  double scale = 0.0;         // pencil scale (norm of the generator blocks)
  double window_scale = 0.0;  // max |z| over the window: the generator's size on that spectral subspace
  nlohmann::json to_json() const;
};

// Eigenvalues of the pencil; eigenvectors for those with imaginary part in
// [im_lo, im_hi].
GeneratorSpectrum generator_spectrum(const GeneratorPencil& pencil, double im_lo, double im_hi);

}  // namespace lamewave
