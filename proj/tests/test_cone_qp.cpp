#include <doctest.h>

#include "viscofrac/cone_qp.hpp"
#include "viscofrac/error.hpp"

#include <cmath>
#include <limits>
#include <random>

using namespace viscofrac;
using cone_qp::ConeRow;
using cone_qp::Problem;

namespace {

Problem box_problem(std::vector<double> p, std::vector<double> q, double lo, double hi) {
    Problem pr;
    const auto n = static_cast<Eigen::Index>(p.size());
    pr.p = Eigen::Map<Eigen::VectorXd>(p.data(), n);
    pr.q = Eigen::Map<Eigen::VectorXd>(q.data(), n);
    pr.lo = Eigen::VectorXd::Constant(n, lo);
    pr.hi = Eigen::VectorXd::Constant(n, hi);
    return pr;
}

double objective(const Problem& pr, const Eigen::VectorXd& x) {
    return 0.5 * (pr.p.array() * x.array().square()).sum() + pr.q.dot(x);
}

bool feasible(const Problem& pr, const Eigen::VectorXd& x, double tol) {
    if ((x - pr.lo).minCoeff() < -tol || (pr.hi - x).minCoeff() < -tol) return false;
    return cone_qp::max_cone_violation(pr, x) <= tol;
}

}  // namespace

TEST_SUITE("cone_qp") {
    TEST_CASE("separable box problem") {
        const auto pr = box_problem({1.0, 2.0, 4.0}, {-0.5, -3.0, 1.0}, 0.0, 1.0);
        const auto r = cone_qp::solve(pr);
        CHECK(r.x[0] == doctest::Approx(0.5).epsilon(1e-8));
        CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-8));
        CHECK(std::abs(r.x[2]) < 1e-8);
    }

    TEST_CASE("projection onto a disk") {
        auto pr = box_problem({1.0, 1.0}, {-3.0, -4.0}, -10.0, 10.0);
        ConeRow c;
        c.vars = {0, 1, -1};
        c.nvars = 2;
        c.G(0, 0) = 1.0;
        c.G(1, 1) = 1.0;
        pr.cones.push_back(c);
        pr.kappa = 2.0;
        // Position accuracy is limited to ~sqrt(2 gap / p_min) by strong convexity.
        const auto r = cone_qp::solve(pr);
        CHECK(r.x[0] == doctest::Approx(1.2).epsilon(1e-4));
        CHECK(r.x[1] == doctest::Approx(1.6).epsilon(1e-4));
        CHECK(objective(pr, r.x) <= -3 * 1.2 - 4 * 1.6 + 0.5 * 4.0 + 1e-8);
        CHECK(cone_qp::max_cone_violation(pr, r.x) <= 1e-8);
        // slack cone: unconstrained optimum inside
        pr.kappa = 10.0;
        const auto r2 = cone_qp::solve(pr);
        CHECK(r2.x[0] == doctest::Approx(3.0).epsilon(1e-8));
        CHECK(r2.x[1] == doctest::Approx(4.0).epsilon(1e-8));
    }

    TEST_CASE("offset cone on one variable") {
        // |x - 0.8| <= 0.25 with target 0: x = 0.55.
        auto pr = box_problem({1.0}, {0.0}, 0.0, 1.0);
        ConeRow c;
        c.vars = {0, -1, -1};
        c.nvars = 1;
        c.G(0, 0) = 1.0;
        c.b = Eigen::Vector2d(-0.8, 0.0);
        pr.cones.push_back(c);
        pr.kappa = 0.25;
        const auto r = cone_qp::solve(pr);
        CHECK(r.x[0] == doctest::Approx(0.55).epsilon(1e-5));
    }

    TEST_CASE("infeasible problem throws") {
        auto pr = box_problem({1.0}, {0.0}, 0.0, 0.1);
        ConeRow c;
        c.vars = {0, -1, -1};
        c.nvars = 1;
        c.G(0, 0) = 1.0;
        c.b = Eigen::Vector2d(-0.8, 0.0);
        pr.cones.push_back(c);
        pr.kappa = 0.25;
        CHECK_THROWS_AS(cone_qp::solve(pr), SolverError);
    }

    TEST_CASE("random two-variable problems match a grid search") {
        std::mt19937 rng(77);
        std::uniform_real_distribution<double> u(-1.0, 1.0), up(0.2, 3.0);
        for (int trial = 0; trial < 25; ++trial) {
            auto pr = box_problem({up(rng), up(rng)}, {2 * u(rng), 2 * u(rng)}, 0.0, 1.0);
            pr.kappa = 0.3 + 0.5 * std::abs(u(rng));
            const int ncones = 1 + static_cast<int>(rng() % 3);
            for (int k = 0; k < ncones; ++k) {
                ConeRow c;
                c.vars = {0, 1, -1};
                c.nvars = 2;
                for (int i = 0; i < 2; ++i)
                    for (int j = 0; j < 2; ++j) c.G(i, j) = u(rng);
                // keep the origin-shifted point x0 feasible
                const Eigen::Vector2d x0(0.5 + 0.3 * u(rng), 0.5 + 0.3 * u(rng));
                c.b = -c.G.leftCols<2>() * x0;
                pr.cones.push_back(c);
            }
            const auto r = cone_qp::solve(pr);
            REQUIRE(feasible(pr, r.x, 1e-8));

            double best = std::numeric_limits<double>::infinity();
            Eigen::Vector2d xb;
            auto scan = [&](double x0, double x1, double y0, double y1, int n) {
                for (int i = 0; i <= n; ++i)
                    for (int j = 0; j <= n; ++j) {
                        const Eigen::Vector2d x(x0 + (x1 - x0) * i / n, y0 + (y1 - y0) * j / n);
                        if (x.minCoeff() < 0 || x.maxCoeff() > 1 || !feasible(pr, x, 0.0)) continue;
                        const double f = objective(pr, x);
                        if (f < best) {
                            best = f;
                            xb = x;
                        }
                    }
            };
            scan(0, 1, 0, 1, 400);
            scan(xb[0] - 0.005, xb[0] + 0.005, xb[1] - 0.005, xb[1] + 0.005, 200);
            const double fr = objective(pr, r.x);
            CHECK(fr <= best + 1e-9);
            // Strong convexity: |x - xb|^2 <= 2 (f(xb) - f*) / p_min, and f* >= f(x) - 1e-8.
            const double pmin = pr.p.minCoeff();
            CHECK((r.x - xb).squaredNorm() <= 2 * (best - fr + 1e-8) / pmin + 1e-12);
        }
    }
}
