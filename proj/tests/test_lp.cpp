#include <catch2/catch_amalgamated.hpp>

#include "dissipacert/lp.hpp"
#include "dissipacert/rng.hpp"
#include "support/vertex_oracle.hpp"

using namespace dissipacert;

namespace {

LpStandard random_lp(Rng& rng, std::size_t max_vars = 8, std::size_t max_rows = 20) {
    LpStandard lp;
    const std::size_t n = 1 + rng.uniform_index(max_vars);
    const std::size_t m = 1 + rng.uniform_index(max_rows);
    lp.objective.resize(n);
    lp.lower.resize(n);
    lp.upper.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        lp.objective[j] = rng.normal();
        const double a = rng.uniform(-2.0, 0.0);
        const double b = rng.uniform(0.0, 2.0);
        lp.lower[j] = a;
        lp.upper[j] = b;
    }
    // anchor point inside the box; rows either cut through it or exclude it
    std::vector<double> x0(n);
    for (std::size_t j = 0; j < n; ++j) x0[j] = rng.uniform(lp.lower[j], lp.upper[j]);
    lp.rows.resize(m);
    lp.rhs.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        lp.rows[i].resize(n);
        double ax = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            lp.rows[i][j] = rng.normal();
            ax += lp.rows[i][j] * x0[j];
        }
        lp.rhs[i] = ax + rng.uniform(-0.6, 1.0);  // occasionally infeasible
    }
    return lp;
}

}  // namespace

TEST_CASE("solve_lp: min x with x >= 1, x <= 2", "[lp]") {
    LpStandard lp;
    lp.objective = {1.0};
    lp.lower = {-5.0};
    lp.upper = {5.0};
    lp.rows = {{-1.0}, {1.0}};
    lp.rhs = {-1.0, 2.0};
    const LpResult r = solve_lp(lp);
    REQUIRE(r.status == LpStatus::Optimal);
    CHECK(r.x[0] == Catch::Approx(1.0).margin(1e-9));
    CHECK(r.objective == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("solve_lp detects infeasible rows", "[lp]") {
    LpStandard lp;
    lp.objective = {1.0};
    lp.lower = {0.0};
    lp.upper = {1.0};
    lp.rows = {{1.0}, {-1.0}};
    lp.rhs = {0.4, -0.6};  // x <= 0.4 and x >= 0.6
    CHECK(solve_lp(lp).status == LpStatus::Infeasible);
}

TEST_CASE("solve_lp matches the vertex-enumeration oracle on random boxed LPs", "[lp]") {
    Rng rng(2024);
    int solved = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const LpStandard lp = random_lp(rng, 6, 14);
        const auto ref = oracle::enumerate_vertices(lp);
        const LpResult got = solve_lp(lp);
        INFO("trial " << trial << " n=" << lp.num_vars() << " m=" << lp.num_rows());
        if (!ref.feasible) {
            CHECK(got.status == LpStatus::Infeasible);
            continue;
        }
        REQUIRE(got.status == LpStatus::Optimal);
        CHECK(got.objective == Catch::Approx(ref.objective).margin(1e-6));
        CHECK(got.max_row_violation <= 1e-8);
        ++solved;
    }
    CHECK(solved > 100);  // the generator must exercise plenty of feasible cases
}

TEST_CASE("solve_lp feasibility residual at the reported optimum", "[lp]") {
    Rng rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        const LpStandard lp = random_lp(rng);
        const LpResult r = solve_lp(lp);
        if (r.status != LpStatus::Optimal) continue;
        CHECK(r.max_row_violation <= 1e-9 * 10);
        for (std::size_t j = 0; j < lp.num_vars(); ++j) {
            CHECK(r.x[j] >= lp.lower[j] - 1e-9);
            CHECK(r.x[j] <= lp.upper[j] + 1e-9);
        }
    }
}

TEST_CASE("format_lp lists objective, rows and bounds", "[lp]") {
    LpStandard lp;
    lp.objective = {1.0, -2.0};
    lp.lower = {0.0, 0.0};
    lp.upper = {1.0, 1.0};
    lp.rows = {{1.0, 1.0}};
    lp.rhs = {1.5};
    const std::string s = format_lp(lp);
    CHECK(s.find("minimize") != std::string::npos);
    CHECK(s.find("<= 1.5") != std::string::npos);
    CHECK(s.find("0 <= x1 <= 1") != std::string::npos);
}
