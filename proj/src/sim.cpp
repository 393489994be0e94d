#include "viscofrac/sim.hpp"

#include "viscofrac/damage_pf.hpp"
#include "viscofrac/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

#ifdef VISCOFRAC_HAVE_OPENMP
#include <omp.h>
#endif

namespace viscofrac::sim {

namespace {

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

Simulator::Simulator(Problem problem) : problem_(std::move(problem)) {
    auto& p = problem_;
    p.material.validate();
    if (p.mesh.num_elements() == 0) throw DomainError("mesh has no elements");
    const auto& fr = p.material.fracture;
    if (p.regularization == Regularization::PhaseField) {
        if (!(fr.l1 > 0)) throw DomainError("phase-field run needs l1 > 0");
        if (!(p.Gc_eff > 0)) p.Gc_eff = fr.Gc;
        if (!(p.Gc_eff > 0)) throw DomainError("phase-field run needs Gc > 0");
    } else {
        if (!(fr.Yc > 0) || !(fr.l2 > 0)) throw DomainError("lip-field run needs Yc > 0 and l2 > 0");
        lip_ = mesh::build_lip_mesh(p.mesh);
    }
    if (!p.reaction_set.empty() && !p.mesh.has_node_set(p.reaction_set))
        throw DomainError("unknown reaction node set '" + p.reaction_set + "'");
    if (p.reaction_component != 0 && p.reaction_component != 1)
        throw DomainError("reaction component must be x or y");
    for (int n : p.pinned_nodes) {
        if (n < 0 || static_cast<std::size_t>(n) >= p.mesh.num_nodes()) throw DomainError("pinned node out of range");
    }
    constraint_template_ = mech::collect_constraints(p.mesh, p.bcs, 0.0);
}

SimState Simulator::initial_state() const {
    const auto& p = problem_;
    SimState s;
    s.mech = mech::zero_state(p.mesh, p.material);
    const std::size_t ne = p.mesh.num_elements();
    s.d_elem.assign(ne, 0.0);
    s.degradation.assign(ne, 1.0);
    s.psi_plus.assign(ne, 0.0);
    if (p.regularization == Regularization::PhaseField) {
        s.d_nodal = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.mesh.num_nodes()));
        s.history.assign(ne, 0.0);
    }
    return s;
}

double Simulator::reaction(const mech::MechState& m) const {
    const auto& p = problem_;
    if (p.reaction_set.empty()) return 0.0;
    const Eigen::VectorXd f = mech::internal_force(p.mesh, m);
    double r = 0.0;
    for (int n : p.mesh.node_set(p.reaction_set)) r += f[2 * n + p.reaction_component];
    return r;
}

double Simulator::free_energy(const SimState& s) const {
    const auto& p = problem_;
    const auto psi = mech::element_free_energy(p.mesh, s.mech, s.degradation, p.material);
    double sum = 0.0;
    for (std::size_t e = 0; e < psi.size(); ++e) sum += p.mesh.element_area[e] * psi[e];
    return sum;
}

double Simulator::damage_energy(const SimState& s) const {
    const auto& p = problem_;
    if (p.regularization == Regularization::PhaseField)
        return damage_pf::pf_damage_energy(p.mesh, s.d_nodal, p.Gc_eff, p.material.fracture.l1);
    return damage_lf::lf_damage_energy(s.d_elem, p.material.fracture.Yc, p.mesh.element_area);
}

EnergyIncrements Simulator::energy_increments(const SimState& prev, const SimState& next, double dt) const {
    const auto& p = problem_;
    EnergyIncrements inc;
    inc.fe = free_energy(next) - free_energy(prev);
    const auto vd = mech::element_viscous_dissipation(p.mesh, prev.mech, next.mech, dt, p.material);
    for (std::size_t e = 0; e < vd.size(); ++e) inc.vd += p.mesh.element_area[e] * vd[e];
    inc.de = damage_energy(next) - damage_energy(prev);
    const Eigen::VectorXd f0 = mech::internal_force(p.mesh, prev.mech);
    const Eigen::VectorXd f1 = mech::internal_force(p.mesh, next.mech);
    for (int dof : constraint_template_.dofs) inc.work += 0.5 * (f0[dof] + f1[dof]) * (next.mech.u[dof] - prev.mech.u[dof]);
    return inc;
}

SimState Simulator::single_step(const SimState& prev, double dt) const {
    const auto& p = problem_;
    const auto& mat = p.material;
    const double t = prev.time + dt;
    const auto bc = mech::collect_constraints(p.mesh, p.bcs, t);
    const std::size_t ne = p.mesh.num_elements();
    const bool pf = p.regularization == Regularization::PhaseField;

    SimState s = prev;
    s.time = t;
    s.step = prev.step + 1;
    s.newton_iters = 0;
    s.lf_repairs = 0;

    auto mech_solve = [&](const std::vector<double>& g) {
        if (mat.beta == 1) return mech::solve_symmetric(p.mesh, g, prev.mech, dt, mat, bc);
        auto r = mech::solve_newton(p.mesh, g, prev.mech, s.mech, dt, mat, bc, p.solver.newton);
        s.newton_iters += r.iterations;
        return std::move(r.state);
    };
    auto degradation_of = [&](const SimState& st) {
        if (pf) return damage_pf::element_degradation(p.mesh, st.d_nodal);
        std::vector<double> g(ne);
        for (std::size_t e = 0; e < ne; ++e) g[e] = material::degradation(st.d_elem[e]);
        return g;
    };

    bool converged = false;
    for (int k = 1; k <= p.solver.max_stag; ++k) {
        s.mech = mech_solve(s.degradation);
        s.psi_plus = mech::element_psi_plus(p.mesh, s.mech, mat);
        double change = 0.0;
        if (pf) {
            s.history = damage_pf::update_history(prev.history, s.psi_plus);
            Eigen::VectorXd d = damage_pf::solve_phase_damage(p.mesh, s.history, p.Gc_eff, mat.fracture.l1,
                                                              p.pinned_nodes);
            change = (d - s.d_nodal).lpNorm<Eigen::Infinity>();
            s.d_nodal = std::move(d);
            s.d_elem = damage_pf::element_mean(p.mesh, s.d_nodal);
        } else {
            damage_lf::SolveStats stats;
            auto d = damage_lf::update_lip_damage(*lip_, s.psi_plus, mat.fracture.Yc, mat.fracture.l2,
                                                  p.mesh.element_area, prev.d_elem, p.solver.lf_active_tol, &stats);
            change = max_abs_diff(d, s.d_elem);
            s.d_elem = std::move(d);
            s.lf_drive = s.psi_plus;
            s.lf_repairs += stats.repair_rounds;
        }
        s.degradation = degradation_of(s);
        s.stagger_iters = k;
        if (change <= p.solver.stag_tol) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw StepError(fmt::format("staggered iteration did not converge in {} iterations at t = {:.6g} s",
                                    p.solver.max_stag, t));

    // Equilibrate the displacements with the accepted damage.
    s.mech = mech_solve(s.degradation);
    s.psi_plus = mech::element_psi_plus(p.mesh, s.mech, mat);
    if (pf) {
        s.history = damage_pf::update_history(prev.history, s.psi_plus);
        s.min_nodal_damage = s.d_nodal.size() ? s.d_nodal.minCoeff() : 0.0;
    }

    const auto inc = energy_increments(prev, s, dt);
    s.ledger.fe = prev.ledger.fe + inc.fe;
    s.ledger.vd_cum = prev.ledger.vd_cum + inc.vd;
    s.ledger.de = prev.ledger.de + inc.de;
    s.ledger.work_cum = prev.ledger.work_cum + inc.work;
    s.reaction = reaction(s.mech);
    s.u_imposed = 0.0;
    for (const auto& b : p.bcs) {
        if (b.node_set == p.reaction_set && b.component == p.reaction_component) s.u_imposed = b.imposed(t);
    }
    return s;
}

SimState Simulator::stepped(const SimState& prev, double dt, int depth) const {
    try {
        return single_step(prev, dt);
    } catch (const StepError&) {
        if (!problem_.solver.dt_halving || depth >= problem_.solver.max_dt_halvings) throw;
    } catch (const SolverError&) {
        if (!problem_.solver.dt_halving || depth >= problem_.solver.max_dt_halvings) throw;
    }
    SimState mid = stepped(prev, 0.5 * dt, depth + 1);
    SimState out = stepped(mid, 0.5 * dt, depth + 1);
    out.stagger_iters += mid.stagger_iters;
    out.newton_iters += mid.newton_iters;
    out.lf_repairs += mid.lf_repairs;
    out.step = prev.step + 1;
    return out;
}

SimState Simulator::step(const SimState& prev, double dt) const {
    if (!(dt > 0)) throw DomainError("time step must be positive");
    return stepped(prev, dt, 0);
}

int TimeGrid::num_steps() const {
    if (!(dt > 0)) throw DomainError("time step must be positive");
    if (t_end < 0) throw DomainError("end time must be non-negative");
    return static_cast<int>(std::llround(t_end / dt));
}

std::vector<SimState> run(const Simulator& sim, const TimeGrid& grid, const StepObserver& observer, bool keep_states) {
    std::vector<SimState> kept;
    SimState s = sim.initial_state();
    const int n = grid.num_steps();
    for (int k = 1; k <= n; ++k) {
        const double dt = k * grid.dt - s.time;
        try {
            s = sim.step(s, dt);
        } catch (const Error& e) {
            throw StepError(fmt::format("step {} failed (last written step {}): {}", k, k - 1, e.what()));
        }
        if (keep_states) kept.push_back(s);
        if (observer && !observer(s)) break;
    }
    return kept;
}

void apply_thread_limit() {
#ifdef VISCOFRAC_HAVE_OPENMP
    if (const char* env = std::getenv("VISCOFRAC_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) omp_set_num_threads(n);
    }
#endif
}

double default_element_size(const mesh::BaseMesh& mesh) {
    const double amin = *std::min_element(mesh.element_area.begin(), mesh.element_area.end());
    return std::sqrt(4.0 * amin / std::sqrt(3.0));
}

}  // namespace viscofrac::sim
