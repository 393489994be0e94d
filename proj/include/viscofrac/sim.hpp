#pragma once

#include "viscofrac/damage_lf.hpp"
#include "viscofrac/lip_mesh.hpp"
#include "viscofrac/material.hpp"
#include "viscofrac/mech.hpp"
#include "viscofrac/mesh.hpp"

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace viscofrac::sim {

enum class Regularization { PhaseField, LipField };

struct SolverSettings {
    double stag_tol = 1e-3;
    int max_stag = 100;
    mech::NewtonOptions newton;
    double lf_active_tol = 1e-8;
    bool dt_halving = false;
    int max_dt_halvings = 4;
};

/// Everything a run needs besides the time grid. Fracture parameters live in
/// material.fracture (internal units); `Gc_eff` is the toughness used by the
/// phase-field solve (equal to Gc when the mesh correction is off).
struct Problem {
    mesh::BaseMesh mesh;
    material::GkvMaterial material;
    Regularization regularization = Regularization::PhaseField;
    std::vector<mech::DirichletBC> bcs;
    double Gc_eff = 0.0;
    std::vector<int> pinned_nodes;
    std::string reaction_set;
    int reaction_component = 1;
    SolverSettings solver;
};

struct EnergyLedger {
    double fe = 0.0;
    double vd_cum = 0.0;
    double de = 0.0;
    double work_cum = 0.0;
};

struct SimState {
    int step = 0;
    double time = 0.0;
    mech::MechState mech;
    Eigen::VectorXd d_nodal;        ///< phase-field damage (empty for lip-field)
    std::vector<double> d_elem;     ///< lip-field damage, or element mean of the nodal field
    std::vector<double> degradation;
    std::vector<double> history;    ///< phase-field H (empty for lip-field)
    std::vector<double> psi_plus;
    std::vector<double> lf_drive;   ///< psi+ that produced the accepted lip-field damage (empty for phase-field)
    EnergyLedger ledger;
    double reaction = 0.0;
    double u_imposed = 0.0;
    int stagger_iters = 0;
    int newton_iters = 0;
    double min_nodal_damage = 0.0;  ///< phase-field undershoot indicator
    int lf_repairs = 0;
};

struct EnergyIncrements {
    double fe = 0.0;
    double vd = 0.0;
    double de = 0.0;
    double work = 0.0;
};

class Simulator {
public:
    /// Validates the problem and builds the lip-mesh when needed.
    explicit Simulator(Problem problem);

    const Problem& problem() const { return problem_; }
    const mesh::LipMesh* lip_mesh() const { return lip_ ? &*lip_ : nullptr; }

    SimState initial_state() const;

    /// One staggered time step from `prev` to prev.time + dt. Throws StepError when
    /// the stagger (or a Newton solve) fails and dt halving is off or exhausted.
    SimState step(const SimState& prev, double dt) const;

    /// Free energy (mJ) of the mechanical state for the state's degradation.
    double free_energy(const SimState& s) const;
    /// Damage energy (mJ) with the formula of the active regularization.
    double damage_energy(const SimState& s) const;
    /// Increments between two consecutive states; work uses the trapezoidal
    /// rule on constrained dofs.
    EnergyIncrements energy_increments(const SimState& prev, const SimState& next, double dt) const;

    /// Sum of internal forces over the reaction set / component (N).
    double reaction(const mech::MechState& m) const;

private:
    SimState single_step(const SimState& prev, double dt) const;
    SimState stepped(const SimState& prev, double dt, int depth) const;

    Problem problem_;
    std::optional<mesh::LipMesh> lip_;
    mech::Constraints constraint_template_;
};

struct TimeGrid {
    double dt = 1.0;
    double t_end = 0.0;
    int num_steps() const;
};

/// Callback invoked after every accepted step; return false to stop.
using StepObserver = std::function<bool(const SimState&)>;

/// Runs all steps of the grid from the initial state. On failure the exception
/// message names the last written step.
std::vector<SimState> run(const Simulator& sim, const TimeGrid& grid, const StepObserver& observer = {},
                          bool keep_states = false);

/// Applies VISCOFRAC_THREADS (if set) to the element-loop thread pool.
void apply_thread_limit();

/// Default element size for the toughness correction: side of the equilateral
/// triangle with the smallest element area.
double default_element_size(const mesh::BaseMesh& mesh);

}  // namespace viscofrac::sim
