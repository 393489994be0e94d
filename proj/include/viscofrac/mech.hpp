#pragma once

#include "viscofrac/material.hpp"
#include "viscofrac/mesh.hpp"

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

namespace viscofrac::mech {

using material::GkvMaterial;
using material::SymTensor2;
using mesh::BaseMesh;

/// Displacements and internal strains. Displacement dofs are interleaved
/// (2*node, 2*node+1); internal strains are element-major, n per element.
struct MechState {
    Eigen::VectorXd u;
    std::vector<SymTensor2> eps_internal;
    std::vector<Eigen::Vector3d> sigma;
    std::size_t num_units = 0;

    const SymTensor2& internal(std::size_t e, std::size_t i) const { return eps_internal[e * num_units + i]; }
    SymTensor2& internal(std::size_t e, std::size_t i) { return eps_internal[e * num_units + i]; }
    std::span<const SymTensor2> internals(std::size_t e) const {
        return {eps_internal.data() + e * num_units, num_units};
    }
};

MechState zero_state(const BaseMesh& mesh, const GkvMaterial& mat);

/// Imposed displacement on one component (0 = x, 1 = y) of a node set:
/// value + rate * t.
struct DirichletBC {
    std::string node_set;
    int component = 0;
    double rate = 0.0;
    double value = 0.0;

    double imposed(double t) const { return value + rate * t; }
};

struct Constraints {
    std::vector<int> dofs;
    std::vector<double> values;
};

/// Constrained dofs at time t. Throws DomainError for an unknown node set, a bad
/// component, or two conditions prescribing different values on one dof.
Constraints collect_constraints(const BaseMesh& mesh, std::span<const DirichletBC> bcs, double t);

/// Strain-displacement matrix of a linear triangle (engineering Voigt rows).
Eigen::Matrix<double, 3, 6> strain_displacement(const mesh::ShapeGrads& grads);

/// Total strain of element e.
SymTensor2 element_strain(const BaseMesh& mesh, std::size_t e, const Eigen::VectorXd& u);

/// Free-spring strain eps_0 = eps - sum eps_i of element e.
SymTensor2 spring_strain(const BaseMesh& mesh, const MechState& s, std::size_t e);

struct TangentStress {
    Eigen::Matrix3d H;
    Eigen::Vector3d sigma_int;
};

/// Condensed element tangent and history stress of the symmetric (beta = 1)
/// update, for degradation factor g. sigma = H eps - sigma_int.
TangentStress tangent_from_degradation(double g, std::span<const SymTensor2> eps_im, double dt, const GkvMaterial& mat);
inline TangentStress tangent_and_internal_stress(double d, std::span<const SymTensor2> eps_im, double dt,
                                                 const GkvMaterial& mat) {
    return tangent_from_degradation(material::degradation(d), eps_im, dt, mat);
}

/// Internal strains of the KV units for a given stress (beta = 1).
std::vector<SymTensor2> update_internal_strains(const Eigen::Vector3d& sigma, std::span<const SymTensor2> eps_im,
                                                double g, double dt, const GkvMaterial& mat);

/// Linear solve for beta = 1 at fixed per-element degradation g_elem.
/// Throws SolverError when the reduced stiffness is singular.
MechState solve_symmetric(const BaseMesh& mesh, std::span<const double> g_elem, const MechState& state_m, double dt,
                          const GkvMaterial& mat, const Constraints& bc);

struct NewtonOptions {
    double rel_tol = 1e-8;
    double abs_tol = 1e-12;
    int max_iter = 50;
    int max_halvings = 30;
};

struct NewtonResult {
    MechState state;
    int iterations = 0;
    double residual = 0.0;
    double residual0 = 0.0;
};

/// Joint Newton on (u, eps_1..eps_n) for either beta, starting from `guess`
/// (usually the previous state) with constrained dofs overwritten. Internal
/// strains are condensed element by element. Throws StepError on non-convergence.
NewtonResult solve_newton(const BaseMesh& mesh, std::span<const double> g_elem, const MechState& state_m,
                          const MechState& guess, double dt, const GkvMaterial& mat, const Constraints& bc,
                          const NewtonOptions& opt = {});

/// Incremental potential at fixed damage: sum_e A_e [psi + dt phi_v] (mJ).
double incremental_potential(const BaseMesh& mesh, std::span<const double> g_elem, const MechState& state_m,
                             const MechState& state, double dt, const GkvMaterial& mat);

/// Gradient of incremental_potential with respect to (u, eps_internal): all
/// displacement dofs first, then element-major internal strains in engineering Voigt.
Eigen::VectorXd potential_gradient(const BaseMesh& mesh, std::span<const double> g_elem, const MechState& state_m,
                                   const MechState& state, double dt, const GkvMaterial& mat);

/// Element Hessian per unit area with respect to (eps, eps_1, ..., eps_n), each in
/// engineering Voigt, at the element's current strains.
Eigen::MatrixXd element_hessian(double g, std::span<const SymTensor2> units, std::span<const SymTensor2> eps_im,
                                double dt, const GkvMaterial& mat);

/// Assembled internal force sum_e A_e B^T sigma_e (N), all dofs.
Eigen::VectorXd internal_force(const BaseMesh& mesh, const MechState& s);

/// Undegraded damage drive psi+ per element.
std::vector<double> element_psi_plus(const BaseMesh& mesh, const MechState& s, const GkvMaterial& mat);

/// Degraded free energy per element (MPa) for degradation g_elem.
std::vector<double> element_free_energy(const BaseMesh& mesh, const MechState& s, std::span<const double> g_elem,
                                        const GkvMaterial& mat);

/// Viscous dissipation per element: twice dt phi_v, i.e. the energy actually
/// dissipated by the dashpots over the step (MPa).
std::vector<double> element_viscous_dissipation(const BaseMesh& mesh, const MechState& state_m,
                                                const MechState& state, double dt, const GkvMaterial& mat);

}  // namespace viscofrac::mech
