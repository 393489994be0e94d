#include "viscofrac/cone_qp.hpp"

#include "viscofrac/error.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace viscofrac::cone_qp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using V3 = Eigen::Vector3d;

// Nesterov-Todd scaling of one second-order cone block.
struct SocScaling {
    double beta = 1.0;
    V3 w = V3(1, 0, 0);

    V3 apply(const V3& v) const {
        const double w1v1 = w.tail<2>().dot(v.tail<2>());
        V3 r;
        r[0] = w[0] * v[0] + w1v1;
        r.tail<2>() = v[0] * w.tail<2>() + v.tail<2>() + (w1v1 / (1.0 + w[0])) * w.tail<2>();
        return beta * r;
    }
    V3 apply_inv(const V3& v) const {
        const double w1v1 = w.tail<2>().dot(v.tail<2>());
        V3 r;
        r[0] = w[0] * v[0] - w1v1;
        r.tail<2>() = -v[0] * w.tail<2>() + v.tail<2>() + (w1v1 / (1.0 + w[0])) * w.tail<2>();
        return r / beta;
    }
    Eigen::Matrix3d inv_sq() const {
        Eigen::Matrix3d Wi;
        for (int k = 0; k < 3; ++k) Wi.col(k) = apply_inv(V3::Unit(k));
        return Wi * Wi;
    }
};

double jdot(const V3& a, const V3& b) { return a[0] * b[0] - a.tail<2>().dot(b.tail<2>()); }

// u0^2 - |u1|^2 without cancellation near the cone boundary.
double jnorm_sq(const V3& u) {
    const double r = u.tail<2>().norm();
    return (u[0] - r) * (u[0] + r);
}

SocScaling nt_scaling(const V3& s, const V3& z) {
    const double sn = std::sqrt(jnorm_sq(s)), zn = std::sqrt(jnorm_sq(z));
    const V3 sb = s / sn, zb = z / zn;
    const double gamma = std::sqrt(0.5 * (1.0 + zb.dot(sb)));
    SocScaling sc;
    sc.w[0] = (sb[0] + zb[0]) / (2.0 * gamma);
    sc.w.tail<2>() = (sb.tail<2>() - zb.tail<2>()) / (2.0 * gamma);
    sc.beta = std::sqrt(sn / zn);
    return sc;
}

V3 jordan(const V3& u, const V3& v) {
    V3 r;
    r[0] = u.dot(v);
    r.tail<2>() = u[0] * v.tail<2>() + v[0] * u.tail<2>();
    return r;
}

// Solves lambda o u = v for u.
V3 jordan_div(const V3& l, const V3& v) {
    const double det = jnorm_sq(l);
    V3 u;
    u[0] = (l[0] * v[0] - l.tail<2>().dot(v.tail<2>())) / det;
    u.tail<2>() = (v.tail<2>() - u[0] * l.tail<2>()) / l[0];
    return u;
}

double soc_min_eig(const V3& u) { return u[0] - u.tail<2>().norm(); }

// Largest alpha with u + alpha du inside the cone (kInf if unbounded).
double soc_max_step(const V3& u, const V3& du) {
    const double a = jdot(du, du), b = 2.0 * jdot(u, du), c = jdot(u, u);
    const double scale = std::max({std::abs(a), std::abs(b), std::abs(c), 1e-300});
    if (std::abs(a) <= 1e-14 * scale) {
        if (b >= 0) return du[0] >= 0 ? kInf : -u[0] / du[0];
        return -c / b;
    }
    const double disc = b * b - 4 * a * c;
    if (disc < 0) return du[0] >= 0 ? kInf : -u[0] / du[0];
    const double sq = std::sqrt(disc);
    const double qq = -0.5 * (b + (b >= 0 ? sq : -sq));
    double r1 = qq / a, r2 = c / qq;
    if (r1 > r2) std::swap(r1, r2);
    if (r1 > 0) return r1;
    if (r2 > 0) return r2;
    return kInf;
}

struct Normalized {
    Eigen::VectorXd p, q, lo, hi;
    std::vector<Eigen::Matrix<double, 2, 3>> G;
    std::vector<Eigen::Vector2d> b;
    std::vector<double> radius;
    double obj_scale = 1.0;
};

}  // namespace

double max_cone_violation(const Problem& prob, const Eigen::VectorXd& x) {
    double worst = -kInf;
    for (const auto& c : prob.cones) {
        Eigen::Vector2d v = c.b;
        for (int k = 0; k < c.nvars; ++k) v += c.G.col(k) * x[c.vars[k]];
        worst = std::max(worst, v.norm() - prob.kappa);
    }
    return worst;
}

Result solve(const Problem& prob, const Options& opt) {
    const auto nx = static_cast<int>(prob.p.size());
    const auto nc = static_cast<int>(prob.cones.size());
    if (prob.q.size() != nx || prob.lo.size() != nx || prob.hi.size() != nx)
        throw DomainError("cone QP: inconsistent vector sizes");
    if (!(prob.kappa > 0)) throw DomainError("cone QP: cone radius must be positive");
    for (int j = 0; j < nx; ++j) {
        if (!(prob.p[j] > 0)) throw DomainError("cone QP: quadratic weights must be positive");
        if (!(prob.lo[j] <= prob.hi[j])) throw DomainError("cone QP: empty box");
    }
    Result res;
    res.x = prob.lo;
    if (nx == 0) return res;

    // Scale the objective to unit largest weight and every cone to unit radius.
    Normalized nz;
    nz.obj_scale = prob.p.maxCoeff();
    nz.p = prob.p / nz.obj_scale;
    nz.q = prob.q / nz.obj_scale;
    nz.lo = prob.lo;
    nz.hi = prob.hi;
    // Each cone row is equilibrated to unit operator norm; its radius becomes
    // kappa / |G| (slivers of the lip-mesh give rows a thousand times stiffer).
    for (const auto& c : prob.cones) {
        const double g = c.nvars > 0 ? c.G.leftCols(c.nvars).norm() : 1.0;
        const double sc = g > 0 ? g : 1.0;
        nz.G.push_back(c.G / sc);
        nz.b.push_back(c.b / sc);
        nz.radius.push_back(prob.kappa / sc);
    }

    const int ml = 2 * nx;
    const int m = ml + 3 * nc;
    const double degree = ml + nc;
    Eigen::VectorXd h(m);
    h.head(nx) = nz.hi;
    h.segment(nx, nx) = -nz.lo;
    for (int c = 0; c < nc; ++c) h.segment<3>(ml + 3 * c) << nz.radius[c], nz.b[c];

    auto apply_G = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd y(m);
        y.head(nx) = x;
        y.segment(nx, nx) = -x;
        for (int c = 0; c < nc; ++c) {
            const auto& row = prob.cones[c];
            Eigen::Vector2d v = Eigen::Vector2d::Zero();
            for (int k = 0; k < row.nvars; ++k) v += nz.G[c].col(k) * x[row.vars[k]];
            y.segment<3>(ml + 3 * c) << 0.0, -v;
        }
        return y;
    };
    auto apply_Gt = [&](const Eigen::VectorXd& y) {
        Eigen::VectorXd x = y.head(nx) - y.segment(nx, nx);
        for (int c = 0; c < nc; ++c) {
            const auto& row = prob.cones[c];
            const Eigen::Vector2d v = y.segment<2>(ml + 3 * c + 1);
            for (int k = 0; k < row.nvars; ++k) x[row.vars[k]] -= nz.G[c].col(k).dot(v);
        }
        return x;
    };
    auto min_eig = [&](const Eigen::VectorXd& u) {
        double t = u.head(ml).minCoeff();
        for (int c = 0; c < nc; ++c) t = std::min(t, soc_min_eig(u.segment<3>(ml + 3 * c)));
        return t;
    };
    auto add_identity = [&](Eigen::VectorXd& u, double a) {
        u.head(ml).array() += a;
        for (int c = 0; c < nc; ++c) u[ml + 3 * c] += a;
    };

    // Starting point.
    Eigen::VectorXd x = (-nz.q.array() / nz.p.array()).matrix();
    for (int j = 0; j < nx; ++j) x[j] = std::clamp(x[j], nz.lo[j], nz.hi[j]);
    Eigen::VectorXd s = h - apply_G(x);
    const double ts = min_eig(s);
    if (ts < 1.0) add_identity(s, 1.0 - ts);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(m);
    add_identity(z, 1.0);

    // Sparsity pattern of P + G^T W^-2 G.
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(nx + 9 * nc);
    Eigen::SparseMatrix<double> M(nx, nx);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    bool analyzed = false;

    std::vector<double> wl(ml);  // linear scaling sqrt(s/z)
    std::vector<SocScaling> ws(nc);
    std::vector<Eigen::Matrix3d> wi2(nc);
    Eigen::VectorXd lambda(m);

    auto scale = [&](const Eigen::VectorXd& v, bool inverse) {
        Eigen::VectorXd r(m);
        for (int i = 0; i < ml; ++i) r[i] = inverse ? v[i] / wl[i] : v[i] * wl[i];
        for (int c = 0; c < nc; ++c) {
            const V3 vc = v.segment<3>(ml + 3 * c);
            r.segment<3>(ml + 3 * c) = inverse ? ws[c].apply_inv(vc) : ws[c].apply(vc);
        }
        return r;
    };
    auto jprod = [&](const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
        Eigen::VectorXd r(m);
        r.head(ml) = u.head(ml).cwiseProduct(v.head(ml));
        for (int c = 0; c < nc; ++c)
            r.segment<3>(ml + 3 * c) = jordan(u.segment<3>(ml + 3 * c), v.segment<3>(ml + 3 * c));
        return r;
    };
    auto jdiv = [&](const Eigen::VectorXd& l, const Eigen::VectorXd& v) {
        Eigen::VectorXd r(m);
        r.head(ml) = v.head(ml).cwiseQuotient(l.head(ml));
        for (int c = 0; c < nc; ++c)
            r.segment<3>(ml + 3 * c) = jordan_div(l.segment<3>(ml + 3 * c), v.segment<3>(ml + 3 * c));
        return r;
    };
    auto max_step = [&](const Eigen::VectorXd& u, const Eigen::VectorXd& du) {
        double a = kInf;
        for (int i = 0; i < ml; ++i) {
            if (du[i] < 0) a = std::min(a, -u[i] / du[i]);
        }
        for (int c = 0; c < nc; ++c)
            a = std::min(a, soc_max_step(u.segment<3>(ml + 3 * c), du.segment<3>(ml + 3 * c)));
        return a;
    };

    auto factor = [&]() {
        trip.clear();
        for (int j = 0; j < nx; ++j)
            trip.emplace_back(j, j, nz.p[j] + 1.0 / (wl[j] * wl[j]) + 1.0 / (wl[nx + j] * wl[nx + j]));
        for (int c = 0; c < nc; ++c) {
            const auto& row = prob.cones[c];
            const Eigen::Matrix2d W2 = wi2[c].bottomRightCorner<2, 2>();
            for (int a = 0; a < row.nvars; ++a)
                for (int b = 0; b < row.nvars; ++b)
                    trip.emplace_back(row.vars[a], row.vars[b], nz.G[c].col(a).dot(W2 * nz.G[c].col(b)));
        }
        M.setFromTriplets(trip.begin(), trip.end());
        if (!analyzed) {
            ldlt.analyzePattern(M);
            analyzed = true;
        }
        ldlt.factorize(M);
        if (ldlt.info() != Eigen::Success) throw SolverError("cone QP: KKT factorization failed");
    };

    // Newton direction for right-hand sides (bx, bz, bs).
    auto kkt_solve = [&](const Eigen::VectorXd& bx, const Eigen::VectorXd& bz, const Eigen::VectorXd& bs,
                         Eigen::VectorXd& dx, Eigen::VectorXd& dz, Eigen::VectorXd& ds) {
        const Eigen::VectorXd c = jdiv(lambda, bs);
        const Eigen::VectorXd Wc = scale(c, false);
        const Eigen::VectorXd t = Wc - bz;
        const Eigen::VectorXd w2t = scale(scale(t, true), true);
        const Eigen::VectorXd rhs = bx - apply_Gt(w2t);
        dx = ldlt.solve(rhs);
        // One step of iterative refinement on the reduced system.
        dx += ldlt.solve(rhs - M * dx);
        // ds from the linear equation keeps primal feasibility exact; dz from the
        // scaled complementarity row (avoids forming W^2 explicitly).
        ds = bz - apply_G(dx);
        dz = scale(c - scale(ds, true), true);
    };

    double pres = kInf, dres = kInf, gap = kInf;
    const double qnorm = std::max(1.0, nz.q.lpNorm<Eigen::Infinity>());
    struct Best {
        Eigen::VectorXd x, z;
        double pres = kInf, dres = kInf, gap = kInf;
        int it = 0;
        double merit() const { return std::max({pres, dres, gap}); }
    } best;
    bool converged = false;
    int short_steps = 0;
    for (int it = 0; it <= opt.max_iter; ++it) {
        const Eigen::VectorXd rx = (nz.p.cwiseProduct(x) + nz.q + apply_Gt(z)).eval();
        const Eigen::VectorXd rz = apply_G(x) + s - h;
        gap = s.dot(z);
        pres = rz.lpNorm<Eigen::Infinity>();
        dres = rx.lpNorm<Eigen::Infinity>() / qnorm;
        if (!std::isfinite(pres) || !std::isfinite(dres) || !std::isfinite(gap)) break;
        const double pcost = 0.5 * x.dot(nz.p.cwiseProduct(x)) + nz.q.dot(x);
        const double gap_rel = gap / std::max(1.0, std::abs(pcost));
        if (std::max({pres, dres, gap_rel}) < best.merit()) best = {x, z, pres, dres, gap_rel, it};
        if (pres <= opt.feas_tol && dres <= opt.dual_tol && gap_rel <= opt.gap_tol) {
            converged = true;
            break;
        }
        if (it == opt.max_iter) break;

        for (int i = 0; i < ml; ++i) {
            wl[i] = std::sqrt(s[i] / z[i]);
            lambda[i] = std::sqrt(s[i] * z[i]);
        }
        for (int c = 0; c < nc; ++c) {
            ws[c] = nt_scaling(s.segment<3>(ml + 3 * c), z.segment<3>(ml + 3 * c));
            wi2[c] = ws[c].inv_sq();
            lambda.segment<3>(ml + 3 * c) = ws[c].apply(z.segment<3>(ml + 3 * c));
        }
        try {
            factor();
        } catch (const SolverError&) {
            break;
        }

        const double mu = gap / degree;
        Eigen::VectorXd dxa, dza, dsa;
        const Eigen::VectorXd ll = jprod(lambda, lambda);
        kkt_solve(-rx, -rz, -ll, dxa, dza, dsa);
        const double aa = std::min(1.0, std::min(max_step(s, dsa), max_step(z, dza)));
        const double gap_a = (s + aa * dsa).dot(z + aa * dza);
        const double sigma = std::pow(std::clamp(gap_a / gap, 0.0, 1.0), 3);

        Eigen::VectorXd e = Eigen::VectorXd::Zero(m);
        add_identity(e, 1.0);
        const Eigen::VectorXd bs = -ll - jprod(scale(dsa, true), scale(dza, false)) + sigma * mu * e;
        Eigen::VectorXd dx, dz, ds;
        kkt_solve(-rx, -rz, bs, dx, dz, ds);
        const double amax = std::min(max_step(s, ds), max_step(z, dz));
        const double alpha = std::min(1.0, 0.99 * amax);
        // Vanishing steps: an infeasible zone problem, or no further progress.
        short_steps = alpha < 1e-7 ? short_steps + 1 : 0;
        if (short_steps >= 3) break;
        x += alpha * dx;
        s += alpha * ds;
        z += alpha * dz;
        res.iterations = it + 1;
    }
    if (!converged) {
        if (!(best.pres <= opt.fallback_feas_tol && best.dres <= opt.fallback_dual_tol &&
              best.gap <= opt.fallback_gap_tol))
            throw SolverError(fmt::format(
                "cone QP did not converge in {} iterations: primal residual {:.3e}, dual residual {:.3e}, gap {:.3e}, "
                "{} variables, {} cones",
                res.iterations, best.pres, best.dres, best.gap, nx, nc));
        x = best.x;
        z = best.z;
        pres = best.pres;
        dres = best.dres;
        gap = best.gap;
    }
    res.primal_residual = pres;
    res.dual_residual = dres;
    res.gap = gap * nz.obj_scale;
    for (int j = 0; j < nx; ++j) x[j] = std::clamp(x[j], prob.lo[j], prob.hi[j]);
    res.x = x;
    res.cone_duals.resize(nc);
    for (int c = 0; c < nc; ++c) {
        const double sc = prob.kappa / nz.radius[c];
        res.cone_duals[c] = -z.segment<2>(ml + 3 * c + 1) * (nz.obj_scale / sc);
    }
    return res;
}

}  // namespace viscofrac::cone_qp
