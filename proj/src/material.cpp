#include "viscofrac/material.hpp"

#include "viscofrac/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>

namespace viscofrac::material {

namespace {

struct Eigen2 {
    double l1, l2;        // l1 >= l2
    Eigen::Vector2d n1, n2;
};

Eigen2 eigen_pairs(const SymTensor2& e) {
    const double m = 0.5 * (e.xx + e.yy);
    const double r = std::hypot(0.5 * (e.xx - e.yy), e.xy);
    const double th = 0.5 * std::atan2(2.0 * e.xy, e.xx - e.yy);
    const double c = std::cos(th), s = std::sin(th);
    return {m + r, m - r, {c, s}, {-s, c}};
}

double pos(double x) { return 0.5 * (x + std::abs(x)); }
double neg(double x) { return 0.5 * (x - std::abs(x)); }
double heaviside(double x) { return x > 0 ? 1.0 : (x < 0 ? 0.0 : 0.5); }

SymTensor2 dyad_sum(double a, const Eigen::Vector2d& n1, double b, const Eigen::Vector2d& n2) {
    return {a * n1.x() * n1.x() + b * n2.x() * n2.x(), a * n1.y() * n1.y() + b * n2.y() * n2.y(),
            a * n1.x() * n1.y() + b * n2.x() * n2.y()};
}

const Eigen::Vector3d kTraceVoigt(1.0, 1.0, 0.0);

}  // namespace

void GkvMaterial::validate() const {
    if (E.empty()) throw DomainError("material needs at least the free spring modulus");
    if (E.size() != tau.size() + 1)
        throw DomainError("material needs len(tau) == len(E) - 1 (got " + std::to_string(E.size()) + " moduli, " +
                          std::to_string(tau.size()) + " retardation times)");
    for (double e : E) {
        if (!(e > 0)) throw DomainError("Young moduli must be positive");
    }
    for (double t : tau) {
        if (!(t > 0)) throw DomainError("retardation times must be positive");
    }
    if (!(nu >= 0.0 && nu < 0.5)) throw DomainError("Poisson ratio must lie in [0, 0.5)");
    if (beta != 0 && beta != 1) throw DomainError("beta must be 0 or 1");
}

Lame lame_constants(const GkvMaterial& mat, std::size_t i) {
    if (i >= mat.E.size()) throw DomainError("unit index out of range");
    const double nu = mat.nu;
    const double denom = (1.0 + nu) * (1.0 - 2.0 * nu);
    if (denom == 0.0 || nu >= 0.5) throw DomainError("division by zero in Lame constants (nu = 0.5)");
    return {mat.E[i] * nu / denom, mat.E[i] / (2.0 * (1.0 + nu))};
}

Eigen::Matrix3d stiffness_voigt(const Lame& l) {
    Eigen::Matrix3d c;
    c << l.lambda + 2 * l.mu, l.lambda, 0,  //
        l.lambda, l.lambda + 2 * l.mu, 0,   //
        0, 0, l.mu;
    return c;
}

SplitStrain eigen_split(const SymTensor2& eps) {
    const auto ep = eigen_pairs(eps);
    return {dyad_sum(pos(ep.l1), ep.n1, pos(ep.l2), ep.n2), dyad_sum(neg(ep.l1), ep.n1, neg(ep.l2), ep.n2)};
}

Eigen::Matrix3d split_tangent(const SymTensor2& eps, bool positive) {
    const auto ep = eigen_pairs(eps);
    auto f = [&](double x) { return positive ? pos(x) : neg(x); };
    auto df = [&](double x) { return positive ? heaviside(x) : 1.0 - heaviside(x); };
    const double gap = ep.l1 - ep.l2;
    const double theta = gap > 1e-10 * (std::abs(ep.l1) + std::abs(ep.l2))
                             ? (f(ep.l1) - f(ep.l2)) / gap
                             : df(0.5 * (ep.l1 + ep.l2));
    const double d1 = df(ep.l1), d2 = df(ep.l2);
    const Eigen::Vector2d& n1 = ep.n1;
    const Eigen::Vector2d& n2 = ep.n2;

    Eigen::Matrix3d t;
    for (int k = 0; k < 3; ++k) {
        Eigen::Matrix2d de = Eigen::Matrix2d::Zero();
        if (k == 0) de(0, 0) = 1.0;
        if (k == 1) de(1, 1) = 1.0;
        if (k == 2) de(0, 1) = de(1, 0) = 0.5;
        const double a11 = n1.dot(de * n1), a22 = n2.dot(de * n2), a12 = n1.dot(de * n2);
        const Eigen::Matrix2d dp = d1 * a11 * n1 * n1.transpose() + d2 * a22 * n2 * n2.transpose() +
                                   theta * a12 * (n1 * n2.transpose() + n2 * n1.transpose());
        t.col(k) << dp(0, 0), dp(1, 1), dp(0, 1);
    }
    return t;
}

UnitResponse unit_response(const SymTensor2& eps, const Lame& l, double g_plus, double g_minus, bool split) {
    UnitResponse r;
    const double tr = eps.trace();
    if (!split) {
        r.energy_plus = l.mu * eps.ddot(eps) + 0.5 * l.lambda * tr * tr;
        r.energy = g_plus * r.energy_plus;
        r.tangent = g_plus * stiffness_voigt(l);
        r.stress = r.tangent * eps.voigt_strain();
        return r;
    }
    const auto s = eigen_split(eps);
    r.energy_plus = l.mu * s.plus.ddot(s.plus) + 0.5 * l.lambda * tr * tr;
    r.energy_minus = l.mu * s.minus.ddot(s.minus);
    r.energy = g_plus * r.energy_plus + g_minus * r.energy_minus;
    r.stress = 2.0 * l.mu * (g_plus * s.plus.voigt_stress() + g_minus * s.minus.voigt_stress()) +
               g_plus * l.lambda * tr * kTraceVoigt;
    r.tangent = 2.0 * l.mu * (g_plus * split_tangent(eps, true) + g_minus * split_tangent(eps, false)) +
                g_plus * l.lambda * kTraceVoigt * kTraceVoigt.transpose();
    return r;
}

FreeEnergy free_energy(std::span<const SymTensor2> eps_units, double d, const GkvMaterial& mat) {
    if (!(d >= 0.0 && d <= 1.0)) throw DomainError("damage outside [0, 1]");
    if (eps_units.size() != mat.E.size()) throw DomainError("free_energy needs one strain per unit (n+1)");
    FreeEnergy out;
    const bool split = mat.beta == 0;
    for (std::size_t i = 0; i < eps_units.size(); ++i) {
        const auto r = unit_response(eps_units[i], lame_constants(mat, i), 1.0, 1.0, split);
        out.psi_plus += r.energy_plus;
        out.psi_minus += r.energy_minus;
    }
    out.psi = degradation(d) * out.psi_plus + out.psi_minus;
    return out;
}

double viscous_dissipation_increment(std::span<const SymTensor2> deps_units, double dt, const GkvMaterial& mat) {
    if (!(dt > 0)) throw DomainError("time step must be positive");
    if (deps_units.size() != mat.tau.size()) throw DomainError("need one strain increment per KV unit");
    double v = 0.0;
    for (std::size_t i = 0; i < deps_units.size(); ++i) {
        const Lame l = lame_constants(mat, i + 1);
        const auto& de = deps_units[i];
        const double tr = de.trace();
        v += mat.tau[i] / dt * (l.mu * de.ddot(de) + 0.5 * l.lambda * tr * tr);
    }
    return v;
}

LipParams calibrate(double Gc_J_m2, double l1_mm) {
    if (!(Gc_J_m2 > 0) || !(l1_mm > 0)) throw DomainError("calibration needs Gc > 0 and l1 > 0");
    const double l2_mm = 2.0 * l1_mm;
    return {3.0 * Gc_J_m2 / (4.0 * l2_mm * 1e-3), l2_mm};
}

PhaseParams calibrate_inverse(double Yc_J_m3, double l2_mm) {
    if (!(Yc_J_m3 > 0) || !(l2_mm > 0)) throw DomainError("calibration needs Yc > 0 and l2 > 0");
    return {4.0 * l2_mm * 1e-3 * Yc_J_m3 / 3.0, 0.5 * l2_mm};
}

double effective_gc(double Gc, double h_elem, double l1) {
    if (!(Gc > 0) || !(h_elem >= 0) || !(l1 > 0)) throw DomainError("effective_gc needs positive inputs");
    const double kappa = h_elem / (4.0 * l1);
    return Gc / (1.0 + kappa);
}

}  // namespace viscofrac::material
