#include "viscofrac/damage_pf.hpp"

#include "viscofrac/error.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>

namespace viscofrac::damage_pf {

namespace {

// Consistent mass matrix of a linear triangle divided by its area.
double mass_coeff(int a, int b) { return a == b ? 1.0 / 6.0 : 1.0 / 12.0; }

}  // namespace

std::vector<double> update_history(std::span<const double> H_m, std::span<const double> psi_plus) {
    std::vector<double> H(psi_plus.size());
    for (std::size_t e = 0; e < H.size(); ++e) H[e] = std::max(e < H_m.size() ? H_m[e] : 0.0, psi_plus[e]);
    return H;
}

Eigen::VectorXd solve_phase_damage(const BaseMesh& mesh, std::span<const double> H, double Gc_eff, double l1,
                                   std::span<const int> pinned) {
    if (!(Gc_eff > 0) || !(l1 > 0)) throw DomainError("phase-field solve needs Gc_eff > 0 and l1 > 0");
    const auto nn = static_cast<int>(mesh.num_nodes());
    std::vector<int> map(nn, 0);
    for (int p : pinned) map.at(p) = -1;
    int nfree = 0;
    for (int& m : map) {
        if (m == 0) m = nfree++;
    }
    Eigen::VectorXd d = Eigen::VectorXd::Zero(nn);
    if (nfree == 0) return d;

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(mesh.num_elements() * 9);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nfree);
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const auto& t = mesh.triangles[e];
        const auto& G = mesh.shape_grads[e];
        const double A = mesh.element_area[e];
        for (int a = 0; a < 3; ++a) {
            const int ia = map[t[a]];
            if (ia < 0) continue;
            rhs[ia] += 2.0 * H[e] * A / 3.0;
            for (int b = 0; b < 3; ++b) {
                const int ib = map[t[b]];
                if (ib < 0) continue;
                const double m = A * mass_coeff(a, b);
                const double k = A * G.col(a).dot(G.col(b));
                trip.emplace_back(ia, ib, Gc_eff * (m / l1 + l1 * k) + 2.0 * H[e] * m);
            }
        }
    }
    Eigen::SparseMatrix<double> K(nfree, nfree);
    K.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(K);
    if (llt.info() != Eigen::Success) throw SolverError("phase-field system is not positive definite");
    const Eigen::VectorXd x = llt.solve(rhs);
    if (llt.info() != Eigen::Success) throw SolverError("phase-field solve failed");
    for (int i = 0; i < nn; ++i) {
        if (map[i] >= 0) d[i] = x[map[i]];
    }
    return d;
}

double pf_damage_energy(const BaseMesh& mesh, const Eigen::VectorXd& d, double Gc_eff, double l1) {
    double sum = 0.0;
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const auto& t = mesh.triangles[e];
        const double A = mesh.element_area[e];
        const Eigen::Vector3d de(d[t[0]], d[t[1]], d[t[2]]);
        double dmd = 0.0;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) dmd += mass_coeff(a, b) * de[a] * de[b];
        const Eigen::Vector2d grad = mesh.shape_grads[e] * de;
        sum += A * (dmd / (2.0 * l1) + 0.5 * l1 * grad.squaredNorm());
    }
    return Gc_eff * sum;
}

std::vector<double> element_degradation(const BaseMesh& mesh, const Eigen::VectorXd& d) {
    std::vector<double> g(mesh.num_elements());
    for (std::size_t e = 0; e < g.size(); ++e) {
        const auto& t = mesh.triangles[e];
        const double a0 = 1 - d[t[0]], a1 = 1 - d[t[1]], a2 = 1 - d[t[2]];
        g[e] = (a0 * a0 + a1 * a1 + a2 * a2 + a0 * a1 + a1 * a2 + a0 * a2) / 6.0;
    }
    return g;
}

std::vector<double> element_mean(const BaseMesh& mesh, const Eigen::VectorXd& d) {
    std::vector<double> m(mesh.num_elements());
    for (std::size_t e = 0; e < m.size(); ++e) {
        const auto& t = mesh.triangles[e];
        m[e] = (d[t[0]] + d[t[1]] + d[t[2]]) / 3.0;
    }
    return m;
}

}  // namespace viscofrac::damage_pf
