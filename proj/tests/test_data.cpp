#include <catch2/catch_amalgamated.hpp>

#include "dissipacert/data.hpp"

#include <cstdio>

using namespace dissipacert;

namespace {

Trajectory make_traj(std::vector<Vec> x, std::vector<Vec> w, std::vector<Vec> f) {
    Trajectory t;
    t.subsystem = 0;
    t.state_dim = x[0].size();
    t.input_dim = w[0].size();
    t.x = std::move(x);
    t.w = std::move(w);
    t.fx = std::move(f);
    return t;
}

SampleSet circle_samples(const std::vector<double>& angles) {
    SampleSet s;
    s.n = 1;
    s.p = 1;
    for (const double a : angles)
        s.samples.push_back({{std::cos(a)}, {std::sin(a)}, {0.0}});
    return s;
}

/// 1e6-angle brute force for the circle max-min distance.
double circle_brute_force(const SampleSet& s, std::size_t angles = 1000000) {
    double worst = 0.0;
    for (std::size_t k = 0; k < angles; ++k) {
        const double a = 6.283185307179586 * static_cast<double>(k) / static_cast<double>(angles);
        const double ux = std::cos(a), uy = std::sin(a);
        double best = 1e300;
        for (const Sample& smp : s.samples) {
            const double dx = ux - smp.x_hat[0], dy = uy - smp.w_hat[0];
            best = std::min(best, dx * dx + dy * dy);
        }
        worst = std::max(worst, best);
    }
    return std::sqrt(worst);
}

}  // namespace

TEST_CASE("normalize scales the whole triple by 1/||(x,w)||", "[data]") {
    // ((3,4), w empty-like scalar 0, f=(3,4)) -> scale 1/5
    const Trajectory t =
        make_traj({{3.0, 4.0}}, {{0.0}}, {{3.0, 4.0}});
    const SampleSet s = normalize(t);
    CHECK(s.samples[0].x_hat == Vec{0.6, 0.8});
    CHECK(s.samples[0].f_hat == Vec{0.6, 0.8});

    // already-unit sample unchanged
    const Trajectory u = make_traj({{1.0, 0.0}}, {{0.0}}, {{0.25, 0.0}});
    const SampleSet su = normalize(u);
    CHECK(su.samples[0].x_hat == Vec{1.0, 0.0});
    CHECK(su.samples[0].f_hat == Vec{0.25, 0.0});

    // (x,w) = (2,0,0,0), f = (1,0) with n = p = 2 -> divide by 2
    const Trajectory v = make_traj({{2.0, 0.0}}, {{0.0, 0.0}}, {{1.0, 0.0}});
    const SampleSet sv = normalize(v);
    CHECK(sv.samples[0].x_hat == Vec{1.0, 0.0});
    CHECK(sv.samples[0].f_hat == Vec{0.5, 0.0});

    // zero-norm triple errors with the offending index
    Trajectory z = make_traj({{0.0, 0.0}, {1.0, 0.0}}, {{0.0, 0.0}, {0.0, 0.0}},
                             {{0.0, 0.0}, {1.0, 0.0}});
    std::swap(z.x[0], z.x[1]);
    CHECK_THROWS_WITH(normalize(z), Catch::Matchers::ContainsSubstring("index 1"));
}

TEST_CASE("normalize is idempotent on stored values", "[data]") {
    Rng rng(4);
    Trajectory t;
    t.state_dim = 2;
    t.input_dim = 2;
    for (int z = 0; z < 50; ++z) {
        Vec x{rng.normal(), rng.normal()}, w{rng.normal(), rng.normal()},
            f{rng.normal(), rng.normal()};
        t.x.push_back(x);
        t.w.push_back(w);
        t.fx.push_back(f);
    }
    const SampleSet once = normalize(t);
    Trajectory t2;
    t2.state_dim = 2;
    t2.input_dim = 2;
    for (const Sample& s : once.samples) {
        t2.x.push_back(s.x_hat);
        t2.w.push_back(s.w_hat);
        t2.fx.push_back(s.f_hat);
    }
    const SampleSet twice = normalize(t2);
    for (std::size_t z = 0; z < once.count(); ++z) {
        for (std::size_t i = 0; i < 2; ++i) {
            CHECK(twice.samples[z].x_hat[i] == Catch::Approx(once.samples[z].x_hat[i]).margin(1e-15));
            CHECK(twice.samples[z].f_hat[i] == Catch::Approx(once.samples[z].f_hat[i]).margin(1e-15));
        }
    }
}

TEST_CASE("covering radius: single point and antipodal pair on the circle", "[data]") {
    const SampleSet one = circle_samples({0.0});
    const CoveringEstimate e1 = covering_radius(one, 100000, 1);
    CHECK(e1.epsilon >= 2.0 - 1e-9);  // antipode at distance 2, capped at the diameter
    CHECK(e1.epsilon <= 2.0);

    const SampleSet two = circle_samples({0.0, 3.14159265358979323846});
    const CoveringEstimate e2 = covering_radius(two, 1000000, 1);
    const double brute = circle_brute_force(two);
    CHECK(brute == Catch::Approx(std::sqrt(2.0)).margin(1e-5));
    CHECK(e2.epsilon >= brute);  // sound: never below the brute-force max-min
    CHECK(e2.epsilon <= std::sqrt(2.0) + e2.probe_spacing_bound + 1e-9);
}

TEST_CASE("covering radius: uniform circle grid at spacing h gives ~h/2", "[data]") {
    std::vector<double> angles;
    const std::size_t k = 200;
    for (std::size_t i = 0; i < k; ++i)
        angles.push_back(6.283185307179586 * static_cast<double>(i) / static_cast<double>(k));
    const SampleSet s = circle_samples(angles);
    const double h = 2.0 * std::sin(3.14159265358979323846 / static_cast<double>(k));
    const CoveringEstimate e = covering_radius(s, 500000, 1);
    CHECK(e.raw_max_min == Catch::Approx(h / 2.0).epsilon(0.02));
    CHECK(e.epsilon >= h / 2.0);
}

TEST_CASE("covering radius monotone non-increasing under sample addition", "[data]") {
    Rng rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> angles;
        const std::size_t base = 2 + rng.uniform_index(10);
        for (std::size_t i = 0; i < base; ++i) angles.push_back(rng.uniform(0.0, 6.2831853));
        const SampleSet small = circle_samples(angles);
        for (std::size_t i = 0; i < 5; ++i) angles.push_back(rng.uniform(0.0, 6.2831853));
        const SampleSet big = circle_samples(angles);
        const double eps_small = covering_radius(small, 4096, 7).epsilon;
        const double eps_big = covering_radius(big, 4096, 7).epsilon;
        CHECK(eps_big <= eps_small + 1e-12);
    }
}

TEST_CASE("leave-one-out covering method reports data self-covering", "[data]") {
    const SampleSet two = circle_samples({0.0, 0.1});
    const CoveringEstimate e = covering_radius(two, 10, 1, CoveringMethod::SampleLeaveOneOut);
    // both samples have their nearest other at chord(0.1)
    CHECK(e.epsilon == Catch::Approx(2.0 * std::sin(0.05)).margin(1e-12));
    CHECK(e.probe_spacing_bound == 0.0);
}

TEST_CASE("sample file round trip and parse errors", "[data]") {
    Rng rng(5);
    SampleSet s;
    s.subsystem = 3;
    s.n = 2;
    s.p = 1;
    for (int z = 0; z < 17; ++z) {
        Vec xw = rng.unit_vector(3);
        s.samples.push_back({{xw[0], xw[1]}, {xw[2]}, {rng.normal(), rng.normal()}});
    }
    const std::string path = "/tmp/dissipacert_test_samples.csv";
    write_samples(s, path);
    const SampleSet r = read_samples(path);
    REQUIRE(r.count() == s.count());
    CHECK(r.subsystem == 3);
    for (std::size_t z = 0; z < s.count(); ++z) {
        CHECK(r.samples[z].x_hat == s.samples[z].x_hat);  // %.17g round-trips doubles
        CHECK(r.samples[z].w_hat == s.samples[z].w_hat);
        CHECK(r.samples[z].f_hat == s.samples[z].f_hat);
    }

    {
        std::ofstream f(path);
        f << "# dissipacert-samples v1 subsystem=0 n=2 p=2 normalized=1\n"
             "x_1,x_2,w_1,w_2,fx_1,fx_2\n"
             "0,0,0,0,0,0\n";
    }
    CHECK_THROWS_AS(read_samples(path), ParseError);  // zero-norm row

    {
        std::ofstream f(path);
        f << "# dissipacert-samples v1 subsystem=0 n=2 p=2 normalized=1\n"
             "x_1,x_2,w_1,w_2,fx_1\n"
             "1,0,0,0,1\n";  // 5 coordinates for n=2,p=2
    }
    CHECK_THROWS_WITH(read_samples(path), Catch::Matchers::ContainsSubstring(":3:"));
    std::remove(path.c_str());
}
