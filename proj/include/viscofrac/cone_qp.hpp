#pragma once

#include <Eigen/Core>

#include <array>
#include <string>
#include <vector>

namespace viscofrac::cone_qp {

/// ||G x[vars] + b|| <= kappa, with up to three variables.
struct ConeRow {
    std::array<int, 3> vars{-1, -1, -1};
    int nvars = 0;
    Eigen::Matrix<double, 2, 3> G = Eigen::Matrix<double, 2, 3>::Zero();
    Eigen::Vector2d b = Eigen::Vector2d::Zero();
};

/// minimize 1/2 sum p_j x_j^2 + q^T x  subject to  lo <= x <= hi  and every cone row.
/// p must be strictly positive.
struct Problem {
    Eigen::VectorXd p, q, lo, hi;
    std::vector<ConeRow> cones;
    double kappa = 1.0;
};

/// Tolerances apply to the normalized problem (unit cone radius, unit largest
/// quadratic weight). When the iteration stalls, the best iterate is accepted
/// if it meets the fallback tolerances.
struct Options {
    double feas_tol = 1e-10;
    double dual_tol = 1e-9;
    double gap_tol = 1e-9;
    double fallback_feas_tol = 1e-8;
    double fallback_dual_tol = 1e-6;
    double fallback_gap_tol = 1e-7;
    int max_iter = 100;
};

struct Result {
    Eigen::VectorXd x;
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
    /// One 2-vector y_t per cone row such that, at the solution,
    /// p x + q + sum_t G_t^T y_t + (box multipliers) = 0.
    std::vector<Eigen::Vector2d> cone_duals;
};

/// Primal-dual interior point method with Nesterov-Todd scaling and a
/// predictor-corrector step. Throws SolverError (with the last iterate's
/// residuals) when it does not converge.
Result solve(const Problem& prob, const Options& opt = {});

/// Largest value of ||G x + b|| - kappa over the cone rows.
double max_cone_violation(const Problem& prob, const Eigen::VectorXd& x);

}  // namespace viscofrac::cone_qp
