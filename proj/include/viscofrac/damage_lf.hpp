#pragma once

#include "viscofrac/lip_mesh.hpp"

#include <span>
#include <vector>

namespace viscofrac::damage_lf {

using mesh::LipMesh;

/// clamp(psi+ / (psi+ + 2 Yc), d_m, 1) per element.
std::vector<double> local_damage(std::span<const double> psi_plus, double Yc, std::span<const double> d_m);

struct DamageBounds {
    std::vector<double> lower;
    std::vector<double> upper;
};

/// upper(x) = max_y (d*(y) - dist(x,y)/l2), lower(x) = min_y (d*(y) + dist(x,y)/l2)
/// with dist the lip-graph shortest path.
DamageBounds compute_bounds(const LipMesh& lip, std::span<const double> d_star, double l2);

struct ActiveZone {
    std::vector<int> vertices;  ///< upper - lower > tol
    std::vector<int> cells;     ///< cells touching an active vertex
    std::vector<int> frozen;    ///< inactive vertices of those cells
};

ActiveZone active_zone(const LipMesh& lip, const DamageBounds& bounds, double tol = 1e-8);

struct SolveStats {
    int zone_vertices = 0;
    int zone_cells = 0;
    int qp_iterations = 0;
    /// Rounds in which inactive vertices were released because the bound-based
    /// reduction left a cell constraint violated or the zone problem infeasible.
    int repair_rounds = 0;
    int repaired_vertices = 0;
    /// Vertices whose box was relaxed by the repair (sorted).
    std::vector<int> released;
};

/// Minimizes sum_e A_e [(1-d)^2 psi+ + 2 Yc d^2] over the active zone, subject to
/// lower <= d <= upper and ||B_t d|| <= 1/l2 on every zone cell, with d = d_loc
/// elsewhere. With `repair`, vertices of cells left infeasible by the reduction
/// are added with the box [d_m, 1] and the problem is solved again.
std::vector<double> solve_lip_damage(const LipMesh& lip, const ActiveZone& zone, std::span<const double> psi_plus,
                                     double Yc, double l2, const DamageBounds& bounds, std::span<const double> area,
                                     std::span<const double> d_m, bool repair = true, SolveStats* stats = nullptr);

/// Complete damage update: local damage, bounds, active zone, zone solve.
std::vector<double> update_lip_damage(const LipMesh& lip, std::span<const double> psi_plus, double Yc, double l2,
                                      std::span<const double> area, std::span<const double> d_m,
                                      double active_tol = 1e-8, SolveStats* stats = nullptr);

/// Weighted L2-nearest field (weights default to 1) in the discrete Lipschitz set,
/// through the bounds / active-zone reduction. With `repair`, the result is made
/// feasible on every cell (box relaxed to [0, 1] where needed).
std::vector<double> lipschitz_project(const LipMesh& lip, std::span<const double> d_tar, double l2,
                                      std::span<const double> weights = {}, bool repair = true,
                                      SolveStats* stats = nullptr);

/// sum_e A_e 2 Yc d_e^2 (mJ).
double lf_damage_energy(std::span<const double> d, double Yc, std::span<const double> area);

/// sum_e A_e [(1-d)^2 psi+ + 2 Yc d^2] (mJ).
double lf_objective(std::span<const double> d, std::span<const double> psi_plus, double Yc,
                    std::span<const double> area);

/// max_t ||B_t d|| - 1/l2 (negative when every cell is strictly feasible).
double max_slope_violation(const LipMesh& lip, std::span<const double> d, double l2);

}  // namespace viscofrac::damage_lf
