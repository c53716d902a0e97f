#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "stokesrve/grid.hpp"
#include "stokesrve/saddle.hpp"

namespace stokesrve {

struct RigidMotion {
    Eigen::VectorXd V;      // translation velocity, d entries
    Eigen::MatrixXd Theta;  // d x d, skew-symmetric exactly
};

struct SolveResiduals {
    double momentum_res = 0.0;   // Krylov relative residual of the full system
    double div_res = 0.0;        // max |div u| over constrained cells / data scale
    double force_res = 0.0;      // max per-inclusion force row of the residual / |rhs|
    double torque_res = 0.0;     // same for the torque rows
    double mean_grad_res = 0.0;  // max |cell-average of a gradient component|
    double energy_res = 0.0;     // |q'Aq - q'rhs| / max(...), the discrete energy identity
};

// Shared result shape for the corrector, the eps-problem and the weak
// sedimentation variant.
struct CorrectorSolution {
    StaggeredField u;
    ScalarField p;  // fluid cells only (zero inside inclusions), zero fluid mean
    std::vector<RigidMotion> rigid;
    Eigen::MatrixXd E;  // strain direction; zero matrix for eps-problems
    SolveResiduals res;
    int iters = 0;
    double energy = 0.0;         // sum_pts w |D(u)+E|^2
    double volume = 0.0;         // cell or box volume
    double pressure_shift = 0.0; // constant removed to zero the fluid mean
    std::vector<double> residual_history;
};

struct SolverOptions {
    double tol = 1e-9;
    int max_iter = 0;  // 0: default 20 * N^(d/2)
    PreconKind precon = PreconKind::BlockDiag;
    bool auto_project = true;
};

// Face -> reduced unknown maps. Rigid unknowns (V_n then theta_n per
// inclusion, inclusions in generation order) follow the fluid faces;
// pressures come last in the stacked saddle vector.
struct DofMaps {
    Grid grid;
    static constexpr long kPinned = -2;
    static constexpr long kInterior = -3;
    std::array<std::vector<long>, 3> face_q;      // flat face -> q index or marker
    std::array<std::vector<std::int32_t>, 3> face_incl;  // inclusion owning an interior face
    long n_fluid_faces = 0;
    int n_incl = 0;
    int rigid_per = 0;  // d translations + d(d-1)/2 rotation parameters
    long nq = 0;
    std::vector<long> cell_p;  // flat cell -> pressure index or -1
    long np = 0;

    long v_index(int n, int c) const {
        return n_fluid_faces + static_cast<long>(n) * rigid_per + c;
    }
    long th_index(int n, int k) const {
        return n_fluid_faces + static_cast<long>(n) * rigid_per + grid.dim + k;
    }
};

struct DiscreteSystem {
    SaddleSystem sys;
    DofMaps maps;
};

// Rotation coefficients: component c of Theta(r) as a linear form in the
// rotation parameters (one scalar in 2D, the axial vector in 3D).
void theta_coefficients(int dim, int c, const Vec3& r, int* idx, double* coeff, int* count);

// Value of V + Theta(r) - E(r) at a face, accumulated in the exact order the
// assembly uses (so stored interior-face values match this bit for bit).
double rigid_face_value(const RigidMotion& rm, const Eigen::MatrixXd& E, const Vec3& r, int c);

DofMaps build_dof_maps(const Grid& grid, const LabelField& labels);

DiscreteSystem build_corrector_system(const Grid& grid, const LabelField& labels,
                                      const Eigen::MatrixXd& E);
DiscreteSystem build_eps_system(const Grid& grid, const LabelField& labels,
                                const StaggeredField& f);
DiscreteSystem build_sedimentation_system(const Grid& grid, const LabelField& labels,
                                          const StaggeredField& f,
                                          const StaggeredField& g);

// Expand a reduced solution into fields and diagnostics. Residuals are
// evaluated with the raw multiplier; the stored pressure is shifted to zero
// fluid mean afterwards (the shift changes nothing the equations see for the
// velocity block).
CorrectorSolution finalize_solution(const DiscreteSystem& ds, const LabelField& labels,
                                    const Eigen::MatrixXd& E, const Eigen::VectorXd& q,
                                    const Eigen::VectorXd& p, const SaddleResult& sr);

CorrectorSolution solve_corrector(const Grid& grid, const LabelField& labels,
                                  const Eigen::MatrixXd& E, const SolverOptions& opt = {});
CorrectorSolution solve_eps_problem(const Grid& grid, const LabelField& labels,
                                    const StaggeredField& f, const SolverOptions& opt = {});
CorrectorSolution solve_weak_sedimentation(const Grid& grid, const LabelField& labels,
                                           const StaggeredField& f, const StaggeredField& g,
                                           const SolverOptions& opt = {});

int default_max_iter(const Grid& grid);

StaggeredField sample_on_faces(const Grid& grid,
                               const std::function<double(int, const Vec3&)>& f);

}  // namespace stokesrve
