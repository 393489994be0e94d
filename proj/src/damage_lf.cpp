#include "viscofrac/damage_lf.hpp"

#include "viscofrac/cone_qp.hpp"
#include "viscofrac/error.hpp"

#include <algorithm>
#include <cmath>

namespace viscofrac::damage_lf {

namespace {

constexpr double kRepairTol = 1e-9;
constexpr double kKktTol = 1e-6;
constexpr double kBoxTol = 1e-9;

double cell_slope(const LipMesh& lip, std::size_t c, std::span<const double> d) {
    return lip.cell_gradient(c, d).norm();
}

// Box-and-cone constrained quadratic over a subset of lip vertices; every other
// vertex keeps its value in `base`.
struct ZoneProblem {
    const LipMesh& lip;
    std::span<const double> P, q;                // per vertex, 1/2 P d^2 + q d
    std::span<const double> lo, hi;              // box for zone vertices
    std::span<const double> relax_lo, relax_hi;  // box for released vertices
    std::span<const double> base;
    double l2;
};

std::vector<double> solve_zone(const ZoneProblem& zp, const std::vector<int>& zone, bool repair, SolveStats* stats) {
    const LipMesh& lip = zp.lip;
    const std::size_t r = lip.num_vertices();
    // No early exit for an empty zone: d_loc can still violate a cell constraint
    // on skinny lip cells, which the repair pass below catches.
    std::vector<double> d(zp.base.begin(), zp.base.end());

    std::vector<std::vector<int>> vertex_cells(r);
    for (std::size_t c = 0; c < lip.num_cells(); ++c) {
        for (int k = 0; k < lip.cells[c].arity; ++k) vertex_cells[lip.cells[c].vertices[k]].push_back(static_cast<int>(c));
    }

    // 0 = fixed, 1 = zone box, 2 = released box
    std::vector<char> role(r, 0);
    for (int v : zone) role[v] = 1;
    std::size_t released_count = 0;

    // Fixed vertices join the problem, zone vertices trade their bound box for the
    // released one.
    auto release = [&](int v) {
        if (role[v] != 2) {
            role[v] = 2;
            ++released_count;
            return true;
        }
        return false;
    };

    for (int round = 0;; ++round) {
        std::vector<int> vars;
        std::vector<int> var_of(r, -1);
        for (std::size_t v = 0; v < r; ++v) {
            if (role[v]) {
                var_of[v] = static_cast<int>(vars.size());
                vars.push_back(static_cast<int>(v));
            }
        }
        std::vector<char> cell_used(lip.num_cells(), 0);
        std::vector<int> cells;
        for (int v : vars) {
            for (int c : vertex_cells[v]) {
                if (!cell_used[c]) {
                    cell_used[c] = 1;
                    cells.push_back(c);
                }
            }
        }
        std::sort(cells.begin(), cells.end());

        cone_qp::Problem prob;
        const auto n = static_cast<Eigen::Index>(vars.size());
        prob.p.resize(n);
        prob.q.resize(n);
        prob.lo.resize(n);
        prob.hi.resize(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            const int v = vars[j];
            prob.p[j] = zp.P[v];
            prob.q[j] = zp.q[v];
            prob.lo[j] = role[v] == 1 ? zp.lo[v] : zp.relax_lo[v];
            prob.hi[j] = role[v] == 1 ? zp.hi[v] : zp.relax_hi[v];
        }
        prob.kappa = 1.0 / zp.l2;
        for (int c : cells) {
            const auto& cell = lip.cells[c];
            cone_qp::ConeRow row;
            for (int k = 0; k < cell.arity; ++k) {
                const int v = cell.vertices[k];
                if (var_of[v] >= 0) {
                    row.vars[row.nvars] = var_of[v];
                    row.G.col(row.nvars) = cell.grad_op.col(k);
                    ++row.nvars;
                } else {
                    row.b += cell.grad_op.col(k) * zp.base[v];
                }
            }
            prob.cones.push_back(row);
        }

        const bool everything = released_count == r;
        cone_qp::Result res;
        try {
            res = cone_qp::solve(prob);
        } catch (const SolverError&) {
            if (!repair || everything) throw;
            bool grew = false;
            for (int c : cells) {
                for (int k = 0; k < lip.cells[c].arity; ++k) grew |= release(lip.cells[c].vertices[k]);
            }
            if (!grew) throw;
            if (stats) ++stats->repair_rounds;
            continue;
        }
        if (stats) {
            stats->qp_iterations += res.iterations;
            stats->zone_cells = static_cast<int>(cells.size());
        }
        std::copy(zp.base.begin(), zp.base.end(), d.begin());
        for (Eigen::Index j = 0; j < n; ++j) d[vars[j]] = res.x[j];
        if (!repair) break;

        bool grew = false;
        for (std::size_t c = 0; c < lip.num_cells(); ++c) {
            if (cell_slope(lip, c, d) - prob.kappa <= kRepairTol) continue;
            for (int k = 0; k < lip.cells[c].arity; ++k) grew |= release(lip.cells[c].vertices[k]);
        }
        // Optimality for the full problem. The bound reduction is exact only for
        // lattice-closed constraint sets, which the cell cones are not; a vertex
        // held fixed, or resting on a bound tighter than the released box, must
        // feel no net force that the released box would not absorb.
        std::vector<double> force(r, 0.0);
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const auto& cell = lip.cells[cells[i]];
            for (int k = 0; k < cell.arity; ++k) force[cell.vertices[k]] += cell.grad_op.col(k).dot(res.cone_duals[i]);
        }
        const double tol = kKktTol * *std::max_element(zp.P.begin(), zp.P.end());
        for (std::size_t v = 0; v < r; ++v) {
            if (role[v] == 2) continue;
            const double g = zp.P[v] * d[v] + zp.q[v] + force[v];
            if ((g > tol && d[v] > zp.relax_lo[v] + kBoxTol) || (g < -tol && d[v] < zp.relax_hi[v] - kBoxTol))
                grew |= release(static_cast<int>(v));
        }
        if (!grew) break;
        if (stats) ++stats->repair_rounds;
        if (round > 50) {
            for (std::size_t v = 0; v < r; ++v) release(static_cast<int>(v));
        }
    }
    if (stats) {
        stats->repaired_vertices = static_cast<int>(released_count);
        stats->released.clear();
        for (std::size_t v = 0; v < r; ++v)
            if (role[v] == 2) stats->released.push_back(static_cast<int>(v));
    }
    return d;
}

}  // namespace

std::vector<double> local_damage(std::span<const double> psi_plus, double Yc, std::span<const double> d_m) {
    if (!(Yc > 0)) throw DomainError("Yc must be positive");
    std::vector<double> d(psi_plus.size());
    for (std::size_t e = 0; e < d.size(); ++e) {
        const double p = std::max(psi_plus[e], 0.0);
        const double lo = e < d_m.size() ? d_m[e] : 0.0;
        d[e] = std::clamp(p / (p + 2.0 * Yc), lo, 1.0);
    }
    return d;
}

DamageBounds compute_bounds(const LipMesh& lip, std::span<const double> d_star, double l2) {
    if (!(l2 > 0)) throw DomainError("l2 must be positive");
    if (d_star.size() != lip.num_vertices()) throw DomainError("field size does not match the lip-mesh");
    const std::size_t r = d_star.size();
    DamageBounds b;
    if (r == 0) return b;
    const double top = *std::max_element(d_star.begin(), d_star.end());
    std::vector<double> off_lo(r), off_hi(r);
    for (std::size_t v = 0; v < r; ++v) {
        off_lo[v] = d_star[v] * l2;
        off_hi[v] = (top - d_star[v]) * l2;
    }
    const auto lo = mesh::offset_distances(lip, off_lo);
    const auto hi = mesh::offset_distances(lip, off_hi);
    b.lower.resize(r);
    b.upper.resize(r);
    for (std::size_t v = 0; v < r; ++v) {
        // Each vertex is its own source, so both values are bracketed by d*(v).
        b.lower[v] = std::min(lo[v] / l2, d_star[v]);
        b.upper[v] = std::max(top - hi[v] / l2, d_star[v]);
    }
    return b;
}

ActiveZone active_zone(const LipMesh& lip, const DamageBounds& bounds, double tol) {
    ActiveZone z;
    const std::size_t r = bounds.lower.size();
    std::vector<char> active(r, 0);
    for (std::size_t v = 0; v < r; ++v) {
        if (bounds.upper[v] - bounds.lower[v] > tol) {
            active[v] = 1;
            z.vertices.push_back(static_cast<int>(v));
        }
    }
    std::vector<char> frozen(r, 0);
    for (std::size_t c = 0; c < lip.num_cells(); ++c) {
        const auto& cell = lip.cells[c];
        bool touches = false;
        for (int k = 0; k < cell.arity; ++k) touches |= active[cell.vertices[k]] != 0;
        if (!touches) continue;
        z.cells.push_back(static_cast<int>(c));
        for (int k = 0; k < cell.arity; ++k) {
            const int v = cell.vertices[k];
            if (!active[v]) frozen[v] = 1;
        }
    }
    for (std::size_t v = 0; v < r; ++v) {
        if (frozen[v]) z.frozen.push_back(static_cast<int>(v));
    }
    return z;
}

std::vector<double> solve_lip_damage(const LipMesh& lip, const ActiveZone& zone, std::span<const double> psi_plus,
                                     double Yc, double l2, const DamageBounds& bounds, std::span<const double> area,
                                     std::span<const double> d_m, bool repair, SolveStats* stats) {
    if (!(Yc > 0) || !(l2 > 0)) throw DomainError("lip-field solve needs Yc > 0 and l2 > 0");
    const std::size_t r = lip.num_vertices();
    if (psi_plus.size() != r || area.size() != r || d_m.size() != r || bounds.lower.size() != r)
        throw DomainError("lip-field solve: field sizes do not match the lip-mesh");
    const auto d_loc = local_damage(psi_plus, Yc, d_m);
    std::vector<double> P(r), q(r), one(r, 1.0);
    for (std::size_t v = 0; v < r; ++v) {
        P[v] = 2.0 * area[v] * (psi_plus[v] + 2.0 * Yc);
        q[v] = -2.0 * area[v] * psi_plus[v];
    }
    if (stats) {
        *stats = {};
        stats->zone_vertices = static_cast<int>(zone.vertices.size());
    }
    const ZoneProblem zp{lip, P, q, bounds.lower, bounds.upper, d_m, one, d_loc, l2};
    return solve_zone(zp, zone.vertices, repair, stats);
}

std::vector<double> update_lip_damage(const LipMesh& lip, std::span<const double> psi_plus, double Yc, double l2,
                                      std::span<const double> area, std::span<const double> d_m, double active_tol,
                                      SolveStats* stats) {
    const auto d_loc = local_damage(psi_plus, Yc, d_m);
    const auto bounds = compute_bounds(lip, d_loc, l2);
    const auto zone = active_zone(lip, bounds, active_tol);
    return solve_lip_damage(lip, zone, psi_plus, Yc, l2, bounds, area, d_m, true, stats);
}

std::vector<double> lipschitz_project(const LipMesh& lip, std::span<const double> d_tar, double l2,
                                      std::span<const double> weights, bool repair, SolveStats* stats) {
    const std::size_t r = lip.num_vertices();
    if (d_tar.size() != r) throw DomainError("field size does not match the lip-mesh");
    if (!weights.empty() && weights.size() != r) throw DomainError("weight count does not match the lip-mesh");
    const auto bounds = compute_bounds(lip, d_tar, l2);
    const auto zone = active_zone(lip, bounds);
    std::vector<double> P(r), q(r), zero(r, 0.0), one(r, 1.0);
    for (std::size_t v = 0; v < r; ++v) {
        const double w = weights.empty() ? 1.0 : weights[v];
        P[v] = 2.0 * w;
        q[v] = -2.0 * w * d_tar[v];
    }
    if (stats) {
        *stats = {};
        stats->zone_vertices = static_cast<int>(zone.vertices.size());
    }
    const ZoneProblem zp{lip, P, q, bounds.lower, bounds.upper, zero, one, d_tar, l2};
    return solve_zone(zp, zone.vertices, repair, stats);
}

double lf_damage_energy(std::span<const double> d, double Yc, std::span<const double> area) {
    double s = 0.0;
    for (std::size_t e = 0; e < d.size(); ++e) s += area[e] * 2.0 * Yc * d[e] * d[e];
    return s;
}

double lf_objective(std::span<const double> d, std::span<const double> psi_plus, double Yc,
                    std::span<const double> area) {
    double s = 0.0;
    for (std::size_t e = 0; e < d.size(); ++e)
        s += area[e] * ((1 - d[e]) * (1 - d[e]) * psi_plus[e] + 2.0 * Yc * d[e] * d[e]);
    return s;
}

double max_slope_violation(const LipMesh& lip, std::span<const double> d, double l2) {
    double worst = -1.0 / l2;
    for (std::size_t c = 0; c < lip.num_cells(); ++c) worst = std::max(worst, cell_slope(lip, c, d) - 1.0 / l2);
    return worst;
}

}  // namespace viscofrac::damage_lf
