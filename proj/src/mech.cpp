#include "viscofrac/mech.hpp"

#include "parallel.hpp"
#include "viscofrac/error.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <fmt/format.h>

#include <cmath>
#include <limits>

namespace viscofrac::mech {

using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat36 = Eigen::Matrix<double, 3, 6>;

namespace {

struct Units {
    std::vector<material::Lame> lame;
    std::vector<Eigen::Matrix3d> C;
    bool split = false;
    explicit Units(const GkvMaterial& mat) : split(mat.beta == 0) {
        mat.validate();
        for (std::size_t i = 0; i < mat.E.size(); ++i) {
            lame.push_back(material::lame_constants(mat, i));
            C.push_back(material::stiffness_voigt(lame.back()));
        }
    }
};

Vec6 element_dofs(const BaseMesh& mesh, std::size_t e, const Eigen::VectorXd& u) {
    Vec6 ue;
    const auto& t = mesh.triangles[e];
    for (int a = 0; a < 3; ++a) {
        ue[2 * a] = u[2 * t[a]];
        ue[2 * a + 1] = u[2 * t[a] + 1];
    }
    return ue;
}

std::array<int, 6> dof_index(const BaseMesh& mesh, std::size_t e) {
    const auto& t = mesh.triangles[e];
    return {2 * t[0], 2 * t[0] + 1, 2 * t[1], 2 * t[1] + 1, 2 * t[2], 2 * t[2] + 1};
}

// Per-area energy, gradient and Hessian of one element in (eps, v_1..v_n).
struct ElementEval {
    double energy = 0.0;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
};

ElementEval eval_element(double g, const SymTensor2& eps, std::span<const SymTensor2> v,
                         std::span<const SymTensor2> v_m, double dt, const GkvMaterial& mat, const Units& units,
                         bool want_hess) {
    const std::size_t n = v.size();
    const double g_minus = units.split ? 1.0 : g;
    SymTensor2 e0 = eps;
    for (const auto& vi : v) e0 = e0 - vi;

    ElementEval out;
    out.grad = Eigen::VectorXd::Zero(3 * (n + 1));
    if (want_hess) out.hess = Eigen::MatrixXd::Zero(3 * (n + 1), 3 * (n + 1));

    const auto r0 = material::unit_response(e0, units.lame[0], g, g_minus, units.split);
    out.energy = r0.energy;
    out.grad.head<3>() = r0.stress;
    if (want_hess) out.hess.topLeftCorner<3, 3>() = r0.tangent;

    for (std::size_t i = 0; i < n; ++i) {
        const auto ri = material::unit_response(v[i], units.lame[i + 1], g, g_minus, units.split);
        const Eigen::Matrix3d D = (mat.tau[i] / dt) * units.C[i + 1];
        const Eigen::Vector3d dv = (v[i] - v_m[i]).voigt_strain();
        out.energy += ri.energy + 0.5 * dv.dot(D * dv);
        const auto bi = static_cast<Eigen::Index>(3 * (i + 1));
        out.grad.segment<3>(bi) = -r0.stress + ri.stress + D * dv;
        if (!want_hess) continue;
        out.hess.block<3, 3>(0, bi) = -r0.tangent;
        out.hess.block<3, 3>(bi, 0) = -r0.tangent;
        for (std::size_t j = 0; j < n; ++j) {
            const auto bj = static_cast<Eigen::Index>(3 * (j + 1));
            out.hess.block<3, 3>(bi, bj) = r0.tangent;
        }
        out.hess.block<3, 3>(bi, bi) += ri.tangent + D;
    }
    return out;
}

// Solves the assembled system K x = f with x prescribed on constrained dofs.
// Element matrices and vectors are already area-weighted.
Eigen::VectorXd solve_constrained(const BaseMesh& mesh, const std::vector<Mat6>& ke, const std::vector<Vec6>& fe,
                                  const Constraints& bc) {
    const auto ndof = static_cast<int>(2 * mesh.num_nodes());
    Eigen::VectorXd x = Eigen::VectorXd::Zero(ndof);
    std::vector<int> free_index(ndof, 0);
    for (std::size_t k = 0; k < bc.dofs.size(); ++k) {
        free_index[bc.dofs[k]] = -1;
        x[bc.dofs[k]] = bc.values[k];
    }
    int nfree = 0;
    for (int& f : free_index) {
        if (f == 0) f = nfree++;
    }
    if (nfree == 0) return x;

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(mesh.num_elements() * 36);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nfree);
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const auto idx = dof_index(mesh, e);
        for (int a = 0; a < 6; ++a) {
            const int fa = free_index[idx[a]];
            if (fa < 0) continue;
            rhs[fa] += fe[e][a];
            for (int b = 0; b < 6; ++b) {
                const int fb = free_index[idx[b]];
                if (fb < 0)
                    rhs[fa] -= ke[e](a, b) * x[idx[b]];
                else
                    trip.emplace_back(fa, fb, ke[e](a, b));
            }
        }
    }
    Eigen::SparseMatrix<double> K(nfree, nfree);
    K.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(K);
    if (ldlt.info() != Eigen::Success) throw SolverError("stiffness factorization failed");
    const auto& D = ldlt.vectorD();
    const double dmax = D.cwiseAbs().maxCoeff();
    if (!(D.minCoeff() > 1e-13 * dmax))
        throw SolverError("singular stiffness matrix (insufficient displacement constraints?)");
    const Eigen::VectorXd xf = ldlt.solve(rhs);
    for (int i = 0; i < ndof; ++i) {
        if (free_index[i] >= 0) x[i] = xf[free_index[i]];
    }
    return x;
}

}  // namespace

MechState zero_state(const BaseMesh& mesh, const GkvMaterial& mat) {
    MechState s;
    s.num_units = mat.num_units();
    s.u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * mesh.num_nodes()));
    s.eps_internal.assign(mesh.num_elements() * s.num_units, SymTensor2{});
    s.sigma.assign(mesh.num_elements(), Eigen::Vector3d::Zero());
    return s;
}

Constraints collect_constraints(const BaseMesh& mesh, std::span<const DirichletBC> bcs, double t) {
    std::vector<double> value(2 * mesh.num_nodes(), std::numeric_limits<double>::quiet_NaN());
    for (const auto& bc : bcs) {
        if (!mesh.has_node_set(bc.node_set)) throw DomainError("unknown node set '" + bc.node_set + "'");
        if (bc.component != 0 && bc.component != 1) throw DomainError("displacement component must be x or y");
        const double v = bc.imposed(t);
        for (int node : mesh.node_set(bc.node_set)) {
            double& slot = value[2 * node + bc.component];
            if (!std::isnan(slot) && std::abs(slot - v) > 1e-14 * std::max(1.0, std::abs(v)))
                throw DomainError("conflicting displacement conditions on node set '" + bc.node_set + "'");
            slot = v;
        }
    }
    Constraints c;
    for (std::size_t i = 0; i < value.size(); ++i) {
        if (std::isnan(value[i])) continue;
        c.dofs.push_back(static_cast<int>(i));
        c.values.push_back(value[i]);
    }
    return c;
}

Mat36 strain_displacement(const mesh::ShapeGrads& g) {
    Mat36 B = Mat36::Zero();
    for (int a = 0; a < 3; ++a) {
        B(0, 2 * a) = g(0, a);
        B(1, 2 * a + 1) = g(1, a);
        B(2, 2 * a) = g(1, a);
        B(2, 2 * a + 1) = g(0, a);
    }
    return B;
}

SymTensor2 element_strain(const BaseMesh& mesh, std::size_t e, const Eigen::VectorXd& u) {
    const Eigen::Vector3d v = strain_displacement(mesh.shape_grads[e]) * element_dofs(mesh, e, u);
    return SymTensor2::from_voigt_strain(v);
}

SymTensor2 spring_strain(const BaseMesh& mesh, const MechState& s, std::size_t e) {
    SymTensor2 e0 = element_strain(mesh, e, s.u);
    for (const auto& v : s.internals(e)) e0 = e0 - v;
    return e0;
}

TangentStress tangent_from_degradation(double g, std::span<const SymTensor2> eps_im, double dt,
                                       const GkvMaterial& mat) {
    if (!(dt > 0)) throw DomainError("time step must be positive");
    if (eps_im.size() != mat.num_units()) throw DomainError("need one previous strain per KV unit");
    for (double E : mat.E) {
        if (!(E > 0)) throw DomainError("singular unit stiffness (E <= 0)");
    }
    const Eigen::Matrix3d C0 = material::stiffness_voigt(material::lame_constants(mat, 0));
    Eigen::Matrix3d A = Eigen::Matrix3d::Identity();
    Eigen::Vector3d hist = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < mat.num_units(); ++i) {
        const Eigen::Matrix3d Ci = material::stiffness_voigt(material::lame_constants(mat, i + 1));
        const double denom = g * dt + mat.tau[i];
        A += (g * dt / denom) * C0 * Ci.inverse();
        hist += (mat.tau[i] / denom) * eps_im[i].voigt_strain();
    }
    TangentStress ts;
    ts.H = g * A.inverse() * C0;
    ts.H = 0.5 * (ts.H + ts.H.transpose()).eval();
    ts.sigma_int = ts.H * hist;
    return ts;
}

std::vector<SymTensor2> update_internal_strains(const Eigen::Vector3d& sigma, std::span<const SymTensor2> eps_im,
                                                double g, double dt, const GkvMaterial& mat) {
    std::vector<SymTensor2> out(mat.num_units());
    for (std::size_t i = 0; i < mat.num_units(); ++i) {
        const Eigen::Matrix3d Ci = material::stiffness_voigt(material::lame_constants(mat, i + 1));
        const double ti = mat.tau[i];
        const Eigen::Vector3d rhs = sigma + (ti / dt) * Ci * eps_im[i].voigt_strain();
        const Eigen::Vector3d v = (dt / (g * dt + ti)) * Ci.ldlt().solve(rhs);
        out[i] = SymTensor2::from_voigt_strain(v);
    }
    return out;
}

MechState solve_symmetric(const BaseMesh& mesh, std::span<const double> g_elem, const MechState& state_m, double dt,
                          const GkvMaterial& mat, const Constraints& bc) {
    mat.validate();
    if (!(dt > 0)) throw DomainError("time step must be positive");
    const std::size_t ne = mesh.num_elements();
    std::vector<TangentStress> ts(ne);
    std::vector<Mat6> ke(ne);
    std::vector<Vec6> fe(ne);
    VISCOFRAC_PARALLEL_FOR
    for (std::size_t e = 0; e < ne; ++e) {
        ts[e] = tangent_from_degradation(g_elem[e], state_m.internals(e), dt, mat);
        const Mat36 B = strain_displacement(mesh.shape_grads[e]);
        const double A = mesh.element_area[e];
        ke[e] = A * B.transpose() * ts[e].H * B;
        fe[e] = A * B.transpose() * ts[e].sigma_int;
    }
    MechState s;
    s.num_units = mat.num_units();
    s.u = solve_constrained(mesh, ke, fe, bc);
    s.eps_internal.resize(ne * s.num_units);
    s.sigma.resize(ne);
    VISCOFRAC_PARALLEL_FOR
    for (std::size_t e = 0; e < ne; ++e) {
        const Eigen::Vector3d eps = element_strain(mesh, e, s.u).voigt_strain();
        s.sigma[e] = ts[e].H * eps - ts[e].sigma_int;
        const auto v = update_internal_strains(s.sigma[e], state_m.internals(e), g_elem[e], dt, mat);
        std::copy(v.begin(), v.end(), s.eps_internal.begin() + static_cast<std::ptrdiff_t>(e * s.num_units));
    }
    return s;
}

double incremental_potential(const BaseMesh& mesh, std::span<const double> g_elem, const MechState& state_m,
                             const MechState& state, double dt, const GkvMaterial& mat) {
    const Units units(mat);
    double F = 0.0;
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const auto ev = eval_element(g_elem[e], element_strain(mesh, e, state.u), state.internals(e),
                                     state_m.internals(e), dt, mat, units, false);
        F += mesh.element_area[e] * ev.energy;
    }
    return F;
}

Eigen::VectorXd potential_gradient(const BaseMesh& mesh, std::span<const double> g_elem, const MechState& state_m,
                                   const MechState& state, double dt, const GkvMaterial& mat) {
    const Units units(mat);
    const std::size_t n = mat.num_units();
    const auto ndof = static_cast<Eigen::Index>(2 * mesh.num_nodes());
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(ndof + static_cast<Eigen::Index>(3 * n * mesh.num_elements()));
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const auto ev = eval_element(g_elem[e], element_strain(mesh, e, state.u), state.internals(e),
                                     state_m.internals(e), dt, mat, units, false);
        const double A = mesh.element_area[e];
        const Vec6 fu = A * strain_displacement(mesh.shape_grads[e]).transpose() * ev.grad.head<3>();
        const auto idx = dof_index(mesh, e);
        for (int a = 0; a < 6; ++a) grad[idx[a]] += fu[a];
        grad.segment(ndof + static_cast<Eigen::Index>(3 * n * e), static_cast<Eigen::Index>(3 * n)) =
            A * ev.grad.tail(static_cast<Eigen::Index>(3 * n));
    }
    return grad;
}

Eigen::MatrixXd element_hessian(double g, std::span<const SymTensor2> units_strain, std::span<const SymTensor2> eps_im,
                                double dt, const GkvMaterial& mat) {
    const Units units(mat);
    SymTensor2 eps;
    for (const auto& v : units_strain) eps = eps + v;
    return eval_element(g, eps, units_strain.subspan(1), eps_im, dt, mat, units, true).hess;
}

NewtonResult solve_newton(const BaseMesh& mesh, std::span<const double> g_elem, const MechState& state_m,
                          const MechState& guess, double dt, const GkvMaterial& mat, const Constraints& bc,
                          const NewtonOptions& opt) {
    if (!(dt > 0)) throw DomainError("time step must be positive");
    const Units units(mat);
    const std::size_t ne = mesh.num_elements();
    const std::size_t n = mat.num_units();
    const auto nv = static_cast<Eigen::Index>(3 * n);

    NewtonResult res;
    MechState& s = res.state;
    s = guess;
    s.num_units = n;
    for (std::size_t k = 0; k < bc.dofs.size(); ++k) s.u[bc.dofs[k]] = bc.values[k];
    std::vector<char> constrained(2 * mesh.num_nodes(), 0);
    for (int d : bc.dofs) constrained[d] = 1;

    std::vector<ElementEval> ev(ne);
    std::vector<Eigen::LDLT<Eigen::MatrixXd>> kvv(ne);
    std::vector<Mat6> ke(ne);
    std::vector<Vec6> fe(ne);
    Constraints zero_bc{bc.dofs, std::vector<double>(bc.dofs.size(), 0.0)};

    auto energy_of = [&](const MechState& st) {
        double F = 0.0;
        for (std::size_t e = 0; e < ne; ++e) {
            F += mesh.element_area[e] * eval_element(g_elem[e], element_strain(mesh, e, st.u), st.internals(e),
                                                     state_m.internals(e), dt, mat, units, false)
                                            .energy;
        }
        return F;
    };

    double F = energy_of(s);
    for (int it = 1; it <= opt.max_iter; ++it) {
        VISCOFRAC_PARALLEL_FOR
        for (std::size_t e = 0; e < ne; ++e) {
            ev[e] = eval_element(g_elem[e], element_strain(mesh, e, s.u), s.internals(e), state_m.internals(e), dt,
                                 mat, units, true);
        }
        Eigen::VectorXd ru = Eigen::VectorXd::Zero(s.u.size());
        double rv2 = 0.0;
        for (std::size_t e = 0; e < ne; ++e) {
            const double A = mesh.element_area[e];
            const Vec6 fu = A * strain_displacement(mesh.shape_grads[e]).transpose() * ev[e].grad.head<3>();
            const auto idx = dof_index(mesh, e);
            for (int a = 0; a < 6; ++a) ru[idx[a]] += fu[a];
            if (n) rv2 += A * A * ev[e].grad.tail(nv).squaredNorm();
        }
        for (int d : bc.dofs) ru[d] = 0.0;
        const double r = std::sqrt(ru.squaredNorm() + rv2);
        res.iterations = it;
        res.residual = r;
        if (it == 1) res.residual0 = r;
        if (r <= opt.abs_tol || r <= opt.rel_tol * res.residual0) {
            for (std::size_t e = 0; e < ne; ++e) s.sigma[e] = ev[e].grad.head<3>();
            return res;
        }

        VISCOFRAC_PARALLEL_FOR
        for (std::size_t e = 0; e < ne; ++e) {
            const Eigen::MatrixXd& h = ev[e].hess;
            Eigen::Matrix3d S = h.topLeftCorner<3, 3>();
            Eigen::Vector3d gt = ev[e].grad.head<3>();
            if (n) {
                kvv[e].compute(h.bottomRightCorner(nv, nv));
                const Eigen::MatrixXd kve = h.bottomLeftCorner(nv, 3);
                S -= kve.transpose() * kvv[e].solve(kve);
                gt -= kve.transpose() * kvv[e].solve(ev[e].grad.tail(nv));
            }
            const Mat36 B = strain_displacement(mesh.shape_grads[e]);
            const double A = mesh.element_area[e];
            ke[e] = A * B.transpose() * S * B;
            fe[e] = -A * B.transpose() * gt;
        }
        const Eigen::VectorXd du = solve_constrained(mesh, ke, fe, zero_bc);
        std::vector<Eigen::VectorXd> dv(ne);
        if (n) {
            VISCOFRAC_PARALLEL_FOR
            for (std::size_t e = 0; e < ne; ++e) {
                const Eigen::Vector3d deps = strain_displacement(mesh.shape_grads[e]) * element_dofs(mesh, e, du);
                dv[e] = -kvv[e].solve(ev[e].grad.tail(nv) + ev[e].hess.bottomLeftCorner(nv, 3) * deps);
            }
        }

        double alpha = 1.0;
        MechState trial = s;
        double F_trial = F;
        for (int h = 0; h <= opt.max_halvings; ++h, alpha *= 0.5) {
            trial.u = s.u + alpha * du;
            for (std::size_t e = 0; e < ne; ++e) {
                for (std::size_t i = 0; i < n; ++i) {
                    const Eigen::Vector3d step = dv[e].segment<3>(static_cast<Eigen::Index>(3 * i));
                    trial.internal(e, i) =
                        s.internal(e, i) + SymTensor2::from_voigt_strain(alpha * step);
                }
            }
            F_trial = energy_of(trial);
            if (F_trial <= F + 1e-13 * std::abs(F)) break;
        }
        s = std::move(trial);
        F = F_trial;
    }
    throw StepError(fmt::format("Newton did not converge in {} iterations (residual {:.3e}, initial {:.3e})",
                                opt.max_iter, res.residual, res.residual0));
}

Eigen::VectorXd internal_force(const BaseMesh& mesh, const MechState& s) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(s.u.size());
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const Vec6 fe = mesh.element_area[e] * strain_displacement(mesh.shape_grads[e]).transpose() * s.sigma[e];
        const auto idx = dof_index(mesh, e);
        for (int a = 0; a < 6; ++a) f[idx[a]] += fe[a];
    }
    return f;
}

std::vector<double> element_psi_plus(const BaseMesh& mesh, const MechState& s, const GkvMaterial& mat) {
    const Units units(mat);
    std::vector<double> out(mesh.num_elements());
    VISCOFRAC_PARALLEL_FOR
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        double p = material::unit_response(spring_strain(mesh, s, e), units.lame[0], 1, 1, units.split).energy_plus;
        for (std::size_t i = 0; i < s.num_units; ++i)
            p += material::unit_response(s.internal(e, i), units.lame[i + 1], 1, 1, units.split).energy_plus;
        out[e] = p;
    }
    return out;
}

std::vector<double> element_free_energy(const BaseMesh& mesh, const MechState& s, std::span<const double> g_elem,
                                        const GkvMaterial& mat) {
    const Units units(mat);
    std::vector<double> out(mesh.num_elements());
    VISCOFRAC_PARALLEL_FOR
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const double g = g_elem[e];
        const double gm = units.split ? 1.0 : g;
        double p = material::unit_response(spring_strain(mesh, s, e), units.lame[0], g, gm, units.split).energy;
        for (std::size_t i = 0; i < s.num_units; ++i)
            p += material::unit_response(s.internal(e, i), units.lame[i + 1], g, gm, units.split).energy;
        out[e] = p;
    }
    return out;
}

std::vector<double> element_viscous_dissipation(const BaseMesh& mesh, const MechState& state_m,
                                                const MechState& state, double dt, const GkvMaterial& mat) {
    std::vector<double> out(mesh.num_elements());
    std::vector<SymTensor2> de(state.num_units);
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        for (std::size_t i = 0; i < state.num_units; ++i) de[i] = state.internal(e, i) - state_m.internal(e, i);
        out[e] = 2.0 * material::viscous_dissipation_increment(de, dt, mat);
    }
    return out;
}

}  // namespace viscofrac::mech
