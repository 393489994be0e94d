#pragma once

#include "viscofrac/mesh.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace viscofrac::damage_pf {

using mesh::BaseMesh;

/// H = max(H_m, psi+) per element.
std::vector<double> update_history(std::span<const double> H_m, std::span<const double> psi_plus);

/// Nodal AT2 damage from the linear system
///   Gc_eff [(1/l1) M + l1 K] d + 2 M_H d = 2 M_H 1
/// with zero-flux boundaries. Nodes in `pinned` are held at d = 0.
/// Throws SolverError if the system cannot be factorized.
Eigen::VectorXd solve_phase_damage(const BaseMesh& mesh, std::span<const double> H, double Gc_eff, double l1,
                                   std::span<const int> pinned = {});

/// Crack surface energy int Gc_eff (d^2/(2 l1) + l1/2 |grad d|^2) (mJ), integrated
/// exactly for the piecewise-linear field.
double pf_damage_energy(const BaseMesh& mesh, const Eigen::VectorXd& d, double Gc_eff, double l1);

/// Element mean of (1 - d)^2 over the linear nodal field, exact.
std::vector<double> element_degradation(const BaseMesh& mesh, const Eigen::VectorXd& d);

/// Element mean of the nodal damage.
std::vector<double> element_mean(const BaseMesh& mesh, const Eigen::VectorXd& d);

}  // namespace viscofrac::damage_pf
