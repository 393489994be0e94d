#include <doctest.h>

#include "meshes.hpp"
#include "viscofrac/damage_lf.hpp"
#include "viscofrac/error.hpp"
#include "viscofrac/sim.hpp"

#include <cmath>
#include <limits>

using namespace viscofrac;

namespace {

material::GkvMaterial chain(std::vector<double> E, std::vector<double> tau, double nu, int beta) {
    material::GkvMaterial m;
    m.E = std::move(E);
    m.tau = std::move(tau);
    m.nu = nu;
    m.beta = beta;
    m.fracture = {0.05, 0.5, 0.05, 1.0};
    return m;
}

// Unit square in uniaxial tension: bottom held in y, left in x, top pulled at `rate`.
sim::Problem tension_square(const material::GkvMaterial& mat, sim::Regularization reg, double rate, int n = 2) {
    sim::Problem p;
    p.mesh = testsupport::rect_mesh(0, 0, 1, 1, n, n);
    p.material = mat;
    p.regularization = reg;
    p.bcs = {{"bottom", 1, 0.0, 0.0}, {"left", 0, 0.0, 0.0}, {"top", 1, rate, 0.0}};
    p.Gc_eff = mat.fracture.Gc;
    p.reaction_set = "top";
    p.reaction_component = 1;
    p.solver.stag_tol = 1e-12;
    return p;
}

// Homogeneous nu = 0, beta = 1 chain with one KV unit, started from rest: per unit
// area F(e1, d) = g(d) [E0/2 (eps - e1)^2 + E1/2 e1^2] + tau E1/(2 dt) e1^2 + c d^2.
// For each d the e1-minimizer is closed form; d is scanned, then refined.
struct Minimizer {
    double e1, d;
};
Minimizer brute_force(double eps, double E0, double E1, double tau, double dt, double c) {
    auto f_of = [&](double d, double& e1) {
        const double g = (1 - d) * (1 - d);
        e1 = g * E0 * eps / (g * E0 + g * E1 + tau * E1 / dt);
        return g * (0.5 * E0 * (eps - e1) * (eps - e1) + 0.5 * E1 * e1 * e1) + 0.5 * tau * E1 / dt * e1 * e1 +
               c * d * d;
    };
    double lo = 0, hi = 1, best = 0;
    for (int level = 0; level < 6; ++level) {
        double fbest = std::numeric_limits<double>::infinity(), e1;
        const int N = 1000;
        for (int k = 0; k <= N; ++k) {
            const double d = lo + (hi - lo) * k / N;
            const double f = f_of(d, e1);
            if (f < fbest) fbest = f, best = d;
        }
        const double w = (hi - lo) / N;
        lo = std::max(0.0, best - w);
        hi = std::min(1.0, best + w);
    }
    double e1;
    f_of(best, e1);
    return {e1, best};
}

double max_abs(const Eigen::VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

}  // namespace

TEST_SUITE("sim") {
    TEST_CASE("damage grows at the onset of loading") {
        const auto mat = chain({1000.0}, {}, 0.2, 1);
        const double dt = 1.0, rate = 1e-3;
        SUBCASE("phase field") {
            const sim::Simulator s(tension_square(mat, sim::Regularization::PhaseField, rate));
            const auto st = s.step(s.initial_state(), dt);
            const double H = st.history[0];
            const double expected = 2 * H / (mat.fracture.Gc / mat.fracture.l1 + 2 * H);
            CHECK(expected > 0);
            CHECK((st.d_nodal.array() - expected).abs().maxCoeff() <= 1e-8 * expected);
        }
        SUBCASE("lip field") {
            const sim::Simulator s(tension_square(mat, sim::Regularization::LipField, rate));
            const auto st = s.step(s.initial_state(), dt);
            const double psi = st.psi_plus[0];
            const double expected = psi / (psi + 2 * mat.fracture.Yc);
            CHECK(expected > 0);
            for (double d : st.d_elem) CHECK(d == doctest::Approx(expected).epsilon(1e-8));
            // The recorded drive reproduces the accepted damage.
            REQUIRE(st.lf_drive.size() == st.d_elem.size());
            const auto again = damage_lf::update_lip_damage(*s.lip_mesh(), st.lf_drive, mat.fracture.Yc,
                                                            mat.fracture.l2, s.problem().mesh.element_area,
                                                            std::vector<double>(st.d_elem.size(), 0.0));
            CHECK(again == st.d_elem);
        }
    }

    TEST_CASE("zero load leaves the state untouched") {
        const auto mat = chain({1000.0, 400.0}, {0.5}, 0.2, 0);
        for (auto reg : {sim::Regularization::PhaseField, sim::Regularization::LipField}) {
            const sim::Simulator s(tension_square(mat, reg, 0.0));
            auto st = s.initial_state();
            for (int k = 0; k < 3; ++k) st = s.step(st, 0.1);
            CHECK(max_abs(st.mech.u) == 0.0);
            for (double d : st.d_elem) CHECK(d == 0.0);
            CHECK(st.ledger.fe == 0.0);
            CHECK(st.ledger.vd_cum == 0.0);
            CHECK(st.ledger.de == 0.0);
            CHECK(st.ledger.work_cum == 0.0);
            CHECK(st.reaction == 0.0);
        }
    }

    TEST_CASE("staggered fixed point is the minimizer of the incremental potential") {
        const double E0 = 1000, E1 = 500, tau = 2.0, dt = 0.5, rate = 0.02;
        const auto mat = chain({E0, E1}, {tau}, 0.0, 1);
        const double eps = rate * dt;
        SUBCASE("lip field") {
            const sim::Simulator s(tension_square(mat, sim::Regularization::LipField, rate));
            const auto st = s.step(s.initial_state(), dt);
            const auto ref = brute_force(eps, E0, E1, tau, dt, 2 * mat.fracture.Yc);
            CHECK(ref.d > 0.05);
            for (double d : st.d_elem) CHECK(std::abs(d - ref.d) <= 1e-8);
            for (std::size_t e = 0; e < s.problem().mesh.num_elements(); ++e)
                CHECK(std::abs(st.mech.internal(e, 0).yy - ref.e1) <= 1e-8 * eps);
        }
        SUBCASE("phase field") {
            const sim::Simulator s(tension_square(mat, sim::Regularization::PhaseField, rate));
            const auto st = s.step(s.initial_state(), dt);
            const auto ref = brute_force(eps, E0, E1, tau, dt, mat.fracture.Gc / (2 * mat.fracture.l1));
            CHECK(ref.d > 0.05);
            CHECK((st.d_nodal.array() - ref.d).abs().maxCoeff() <= 1e-8);
            for (std::size_t e = 0; e < s.problem().mesh.num_elements(); ++e)
                CHECK(std::abs(st.mech.internal(e, 0).yy - ref.e1) <= 1e-8 * eps);
        }
    }

    TEST_CASE("elastic step: work equals stored energy") {
        auto mat = chain({1000.0}, {}, 0.25, 1);
        mat.fracture.Yc = 1e12;  // no damage to speak of
        const sim::Simulator s(tension_square(mat, sim::Regularization::LipField, 1e-3, 3));
        const auto s0 = s.initial_state();
        const auto s1 = s.step(s0, 1.0);
        const auto s2 = s.step(s1, 1.0);
        const auto inc = s.energy_increments(s1, s2, 1.0);
        CHECK(inc.work > 0);
        CHECK(inc.vd == 0.0);
        CHECK(std::abs(inc.work - (inc.fe + inc.de)) <= 1e-8 * inc.work);
        // R * du by hand: trapezoid of the top reactions
        const double du = 1e-3;
        CHECK(inc.work == doctest::Approx(0.5 * (s1.reaction + s2.reaction) * du).epsilon(1e-12));
    }

    TEST_CASE("frozen displacement relaxes") {
        auto mat = chain({1000.0, 400.0, 200.0}, {0.2, 3.0}, 0.2, 1);
        mat.fracture.Yc = 1e12;
        const double rate = 1e-3, dt = 0.1;
        const sim::Simulator load(tension_square(mat, sim::Regularization::LipField, rate));
        auto st = load.initial_state();
        for (int k = 0; k < 5; ++k) st = load.step(st, dt);
        const double held = rate * st.time;
        auto frozen_problem = tension_square(mat, sim::Regularization::LipField, 0.0);
        frozen_problem.bcs[2].value = held;
        const sim::Simulator frozen(frozen_problem);
        const auto next = frozen.step(st, dt);
        const auto inc = frozen.energy_increments(st, next, dt);
        CHECK(inc.work == 0.0);
        CHECK(inc.fe < 0);
        CHECK(inc.vd > 0);
        CHECK(std::abs(next.reaction) < std::abs(st.reaction));
    }

    TEST_CASE("no change gives zero increments") {
        const auto mat = chain({1000.0, 400.0}, {0.5}, 0.2, 0);
        const sim::Simulator s(tension_square(mat, sim::Regularization::PhaseField, 1e-3));
        const auto st = s.step(s.initial_state(), 0.5);
        const auto inc = s.energy_increments(st, st, 0.5);
        CHECK(inc.fe == 0.0);
        CHECK(inc.vd == 0.0);
        CHECK(inc.de == 0.0);
        CHECK(inc.work == 0.0);
    }

    TEST_CASE("equilibrium and reaction") {
        const auto mat = chain({1000.0, 400.0}, {0.5}, 0.3, 0);
        for (auto reg : {sim::Regularization::PhaseField, sim::Regularization::LipField}) {
            auto p = tension_square(mat, reg, 2e-3, 4);
            p.solver.stag_tol = 1e-6;
            p.mesh = testsupport::jitter(p.mesh, 0.2, 3);
            const sim::Simulator s(p);
            auto st = s.initial_state();
            for (int k = 0; k < 3; ++k) st = s.step(st, 0.5);
            const auto f = mech::internal_force(s.problem().mesh, st.mech);
            const auto bc = mech::collect_constraints(s.problem().mesh, s.problem().bcs, st.time);
            std::vector<char> constrained(f.size(), 0);
            for (int dof : bc.dofs) constrained[dof] = 1;
            double free_max = 0, top = 0, bottom = 0;
            for (Eigen::Index i = 0; i < f.size(); ++i)
                if (!constrained[i]) free_max = std::max(free_max, std::abs(f[i]));
            for (int n : s.problem().mesh.node_set("top")) top += f[2 * n + 1];
            for (int n : s.problem().mesh.node_set("bottom")) bottom += f[2 * n + 1];
            CHECK(top > 0);
            CHECK(free_max <= 1e-8 * top);
            CHECK(top + bottom == doctest::Approx(0.0).scale(top).epsilon(1e-8));
            CHECK(st.reaction == doctest::Approx(top).epsilon(1e-12));
        }
    }

    TEST_CASE("runs are deterministic, monotone and honour the grid") {
        const auto mat = chain({1000.0, 400.0}, {0.5}, 0.2, 1);
        for (auto reg : {sim::Regularization::PhaseField, sim::Regularization::LipField}) {
            auto p = tension_square(mat, reg, 4e-3, 4);
            p.solver.stag_tol = 1e-6;
            p.mesh = testsupport::jitter(p.mesh, 0.2, 5);
            const sim::Simulator s(p);
            const sim::TimeGrid grid{0.25, 1.5};
            CHECK(grid.num_steps() == 6);
            const auto a = sim::run(s, grid, {}, true);
            const auto b = sim::run(s, grid, {}, true);
            REQUIRE(a.size() == 6);
            REQUIRE(b.size() == 6);
            for (std::size_t k = 0; k < a.size(); ++k) {
                CHECK(a[k].time == doctest::Approx(0.25 * (k + 1)).epsilon(1e-14));
                CHECK(a[k].mech.u == b[k].mech.u);
                CHECK(a[k].d_elem == b[k].d_elem);
                CHECK(a[k].ledger.work_cum == b[k].ledger.work_cum);
                if (k > 0) {
                    CHECK(a[k].ledger.vd_cum >= a[k - 1].ledger.vd_cum);
                    if (reg == sim::Regularization::LipField)
                        for (std::size_t e = 0; e < a[k].d_elem.size(); ++e) CHECK(a[k].d_elem[e] >= a[k - 1].d_elem[e]);
                    else
                        for (std::size_t e = 0; e < a[k].history.size(); ++e)
                            CHECK(a[k].history[e] >= a[k - 1].history[e]);
                }
            }
            int calls = 0;
            const auto none = sim::run(s, {0.25, 0.0}, [&](const sim::SimState&) { return ++calls, true; }, true);
            CHECK(none.empty());
            CHECK(calls == 0);
            // observer can stop early
            const auto two = sim::run(s, grid, [&](const sim::SimState& st) { return st.step < 2; }, true);
            CHECK(two.size() == 2);
        }
    }

    TEST_CASE("bad inputs") {
        const auto mat = chain({1000.0}, {}, 0.2, 1);
        const sim::Simulator s(tension_square(mat, sim::Regularization::PhaseField, 1e-3));
        CHECK_THROWS_AS(s.step(s.initial_state(), 0.0), DomainError);
        CHECK_THROWS_AS((sim::TimeGrid{0.0, 1.0}.num_steps()), DomainError);
        auto p = tension_square(mat, sim::Regularization::PhaseField, 1e-3);
        p.bcs.push_back({"nowhere", 0, 0.0, 0.0});
        CHECK_THROWS_AS(sim::Simulator{p}, DomainError);
    }
}
