#include <catch2/catch_amalgamated.hpp>

#include "dissipacert/scp.hpp"
#include "dissipacert/rng.hpp"
#include "support/vertex_oracle.hpp"

using namespace dissipacert;

namespace {

SampleSet single_sample_1d(double x, double w, double f) {
    SampleSet s;
    s.n = 1;
    s.p = 1;
    s.samples.push_back({{x}, {w}, {f}});
    return s;
}

}  // namespace

TEST_CASE("storage evaluation", "[scp]") {
    StorageFn s{StorageTemplate::diagonal(2), {1.0, 1.0}};
    CHECK(s.eval({0.0, 0.0}) == 0.0);

    StorageFn paper{StorageTemplate::diagonal(2), {0.1, 0.2}};
    CHECK(paper.eval({1.0, 1.0}) == Catch::Approx(0.3));

    StorageFn ring{StorageTemplate::full_quadratic(2), {1.6, 1.2, 1.9}};
    CHECK(ring.eval({1.0, -1.0}) == Catch::Approx(1.6 - 1.2 + 1.9));
}

TEST_CASE("storage degree-2 homogeneity to 1e-12 relative", "[scp][property]") {
    Rng rng(31);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + rng.uniform_index(4);
        StorageFn s{StorageTemplate::full_quadratic(n), {}};
        s.q.resize(s.tmpl.size());
        for (auto& v : s.q) v = rng.normal();
        Vec x(n);
        for (auto& v : x) v = rng.normal();
        const double lam = std::exp(rng.uniform(-2.0, 2.0));
        Vec xl = x;
        for (auto& v : xl) v *= lam;
        const double lhs = s.eval(xl);
        const double rhs = lam * lam * s.eval(x);
        CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));
    }
}

TEST_CASE("supply rate assembles symmetric and evaluates the quadratic form", "[scp]") {
    Rng rng(8);
    SupplyRate s;
    s.x11 = SymMat(2);
    s.x12 = Mat(2, 3);
    s.x22 = SymMat(3);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = i; j < 2; ++j) s.x11.set(i, j, rng.normal());
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j) s.x12(i, j) = rng.normal();
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = i; j < 3; ++j) s.x22.set(i, j, rng.normal());
    const SymMat full = s.assemble();
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) CHECK(full(i, j) == full(j, i));
    Vec w{rng.normal(), rng.normal()}, x{rng.normal(), rng.normal(), rng.normal()};
    Vec wx = w;
    wx.insert(wx.end(), x.begin(), x.end());
    CHECK(s.quad(w, x) == Catch::Approx(full.quad(wx)).margin(1e-12));
}

TEST_CASE("assemble_scp: one sample gives 3 rows and the documented variables", "[scp]") {
    const SampleSet s = single_sample_1d(1.0, 0.0, 0.5);
    ScpProblem prob;
    prob.samples = &s;
    prob.tmpl = StorageTemplate::diagonal(1);
    const LpStandard lp = assemble_scp(prob);
    CHECK(lp.num_rows() == 3);
    CHECK(lp.num_vars() == 6);  // q, x11, x12, x22, mu, delta
}

TEST_CASE("scalar SCP instance: objective -1.5 with q = 2", "[scp][oracle]") {
    // basis {x^2}, sample (x,w,f) = (1, 0, 0.5), |q| <= 2, |X| <= 1, eta = 0
    const SampleSet s = single_sample_1d(1.0, 0.0, 0.5);
    ScpProblem prob;
    prob.samples = &s;
    prob.tmpl = StorageTemplate::diagonal(1);
    prob.q_max = 2.0;
    prob.x_max = 1.0;
    prob.eta = 0.0;

    // independent check through the vertex oracle on the fully assembled LP
    LpStandard lp = assemble_scp(prob);
    // replace the derived big bounds with modest ones the oracle can enumerate
    lp.lower[4] = -8.0; lp.upper[4] = 8.0;
    lp.lower[5] = -8.0; lp.upper[5] = 8.0;
    const auto ref = oracle::enumerate_vertices(lp);
    REQUIRE(ref.feasible);
    CHECK(ref.objective == Catch::Approx(-1.5).margin(1e-9));

    const ScpSolution sol = solve_scp(prob);
    CHECK(sol.objective == Catch::Approx(-1.5).margin(1e-8));
    CHECK(sol.storage.q[0] == Catch::Approx(2.0).margin(1e-8));
    CHECK(sol.mu + sol.delta == Catch::Approx(-1.5).margin(1e-8));
}

TEST_CASE("solve_scp re-verifies constraints and reports activity", "[scp]") {
    Rng rng(21);
    SampleSet s;
    s.n = 2;
    s.p = 2;
    const NetworkSpec net = two_subsystem();
    const Trajectory t = sample_pairs(net, 0, 200, 5);
    const SampleSet norm = normalize(t);
    ScpProblem prob;
    prob.samples = &norm;
    prob.tmpl = StorageTemplate::full_quadratic(2);
    const ScpSolution sol = solve_scp(prob);
    CHECK(sol.max_violation <= 1e-9);
    CHECK(sol.active_constraint_count >= 1);  // mu or delta is pinned by some sample

    // at the optimum, mu equals the max over samples of the two mu-sides
    double mu_lb = -1e300, delta_lb = -1e300;
    for (const Sample& smp : norm.samples) {
        const double sx = sol.storage.eval(smp.x_hat);
        const double sf = sol.storage.eval(smp.f_hat);
        const double qf = sol.supply.quad(smp.w_hat, smp.x_hat);
        mu_lb = std::max(mu_lb, std::max(-sx + prob.eta, sf - sx - qf));
        delta_lb = std::max(delta_lb, qf);
    }
    CHECK(sol.mu == Catch::Approx(mu_lb).margin(1e-7));
    CHECK(sol.delta == Catch::Approx(delta_lb).margin(1e-7));
}

TEST_CASE("scenario row scaling leaves the optimal (q, X) semantics intact", "[scp]") {
    // scaling all sample coordinates by a common positive factor before
    // normalization is a no-op: Eq.-10 normalization divides it out
    const NetworkSpec net = two_subsystem();
    Trajectory t = sample_pairs(net, 0, 50, 5);
    Trajectory t2 = t;
    for (std::size_t z = 0; z < t2.count(); ++z) {
        for (auto& v : t2.x[z]) v *= 3.5;
        for (auto& v : t2.w[z]) v *= 3.5;
        for (auto& v : t2.fx[z]) v *= 3.5;
    }
    const SampleSet a = normalize(t), b = normalize(t2);
    ScpProblem pa, pb;
    pa.samples = &a;
    pb.samples = &b;
    pa.tmpl = pb.tmpl = StorageTemplate::full_quadratic(2);
    const ScpSolution sa = solve_scp(pa), sb = solve_scp(pb);
    CHECK(sa.objective == Catch::Approx(sb.objective).margin(1e-9));
    for (std::size_t i = 0; i < sa.storage.q.size(); ++i)
        CHECK(sa.storage.q[i] == Catch::Approx(sb.storage.q[i]).margin(1e-7));
}

TEST_CASE("adding a sample never decreases the optimal objective", "[scp][property]") {
    const NetworkSpec net = two_subsystem();
    SamplingOptions opt;
    opt.burn_in_min = 2;
    opt.burn_in_max = 30;
    const Trajectory t = sample_pairs(net, 1, 120, 17, opt);
    const SampleSet all = normalize(t);
    double prev = -1e300;
    for (const std::size_t count : {30uz, 60uz, 90uz, 120uz}) {
        SampleSet sub = all;
        sub.samples.resize(count);
        ScpProblem prob;
        prob.samples = &sub;
        prob.tmpl = StorageTemplate::diagonal(2);
        const ScpSolution sol = solve_scp(prob);
        CHECK(sol.objective >= prev - 1e-8);
        prev = sol.objective;
    }
}

TEST_CASE("relaxed variant with min-supply tie-break keeps mu optimal", "[scp]") {
    const NetworkSpec net = nonlinear_ring(8, 0.1);
    SamplingOptions opt;
    opt.burn_in_min = 30;
    opt.burn_in_max = 50;
    const Trajectory t = sample_pairs(net, 2, 150, 9, opt);
    const SampleSet s = normalize(t);
    ScpProblem prob;
    prob.samples = &s;
    prob.tmpl = StorageTemplate::full_quadratic(2);
    prob.variant = ScpVariant::Relaxed;
    const ScpSolution plain = solve_scp(prob);
    const ScpSolution tied = solve_scp_relaxed_min_supply(prob);
    CHECK(tied.mu <= plain.mu + 1e-7);
    CHECK(tied.max_violation <= 1e-9);
    double mass_plain = 0.0, mass_tied = 0.0;
    for (const double v : plain.supply.assemble().data) mass_plain += std::abs(v);
    for (const double v : tied.supply.assemble().data) mass_tied += std::abs(v);
    CHECK(mass_tied <= mass_plain + 1e-7);
}

TEST_CASE("empty sample set rejected", "[scp]") {
    SampleSet s;
    s.n = 1;
    s.p = 1;
    ScpProblem prob;
    prob.samples = &s;
    prob.tmpl = StorageTemplate::diagonal(1);
    CHECK_THROWS_AS(solve_scp(prob), std::invalid_argument);
}
