#include <catch2/catch_amalgamated.hpp>

#include "dissipacert/admm.hpp"
#include "dissipacert/certify.hpp"
#include "dissipacert/rng.hpp"

using namespace dissipacert;

namespace {

std::vector<SymMat> viia_supplies() {
    return {reference::supply1().assemble(), reference::supply2().assemble()};
}

}  // namespace

TEST_CASE("local step is symmetrization", "[admm]") {
    SymMat sym = SymMat::identity(2);
    CHECK(local_step(sym.as_mat()).data == sym.data);

    Mat t(2, 2);
    t(0, 1) = 1.0;
    const SymMat half = local_step(t);
    CHECK(half(0, 1) == 0.5);
    CHECK(half(1, 0) == 0.5);
    CHECK(half(0, 0) == 0.0);
}

TEST_CASE("local step gives the Frobenius-nearest symmetric matrix", "[admm][property]") {
    Rng rng(17);
    for (int trial = 0; trial < 1000; ++trial) {
        Mat t(2, 2);
        for (auto& v : t.data) v = rng.normal();
        const SymMat proj = local_step(t);
        SymMat rand_sym(2);
        rand_sym.set(0, 0, rng.normal());
        rand_sym.set(0, 1, rng.normal());
        rand_sym.set(1, 1, rng.normal());
        double d_proj = 0.0, d_rand = 0.0;
        for (std::size_t i = 0; i < 4; ++i) {
            d_proj += (proj.data[i] - t.data[i]) * (proj.data[i] - t.data[i]);
            d_rand += (rand_sym.data[i] - t.data[i]) * (rand_sym.data[i] - t.data[i]);
        }
        CHECK(d_proj <= d_rand + 1e-15);
    }
}

TEST_CASE("dual step implements the displayed update exactly", "[admm]") {
    Rng rng(23);
    AdmmState st;
    for (int i = 0; i < 3; ++i) {
        SymMat x(2), z(2), l(2);
        for (std::size_t a = 0; a < 2; ++a)
            for (std::size_t b = a; b < 2; ++b) {
                x.set(a, b, rng.normal());
                z.set(a, b, rng.normal());
                l.set(a, b, rng.normal());
            }
        st.x.push_back(x);
        st.z.push_back(z);
        st.lambda.push_back(l);
    }
    const auto before = st.lambda;
    dual_step(st);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t k = 0; k < 4; ++k)
            CHECK(st.lambda[i].data[k] ==
                  Catch::Approx(before[i].data[k] + st.x[i].data[k] - st.z[i].data[k])
                      .margin(1e-15));

    // X == Z leaves Lambda unchanged
    AdmmState st2;
    st2.x = st.x;
    st2.z = st.x;
    st2.lambda = before;
    dual_step(st2);
    for (std::size_t i = 0; i < 3; ++i) CHECK(st2.lambda[i].data == before[i].data);
}

TEST_CASE("global step is a fixed point on already-feasible inputs", "[admm]") {
    const NetworkSpec net = two_subsystem();
    const BlockStacks bs = BlockStacks::from_network(net);
    const auto xs = viia_supplies();
    REQUIRE(composed_max_eig(bs, xs) <= 0.0);
    const GlobalStepResult gs = global_step(bs, xs, 1e-8);
    CHECK(gs.feasible);
    CHECK(gs.inner_iterations == 0);
    for (std::size_t i = 0; i < xs.size(); ++i) CHECK(gs.z[i].data == xs[i].data);
}

TEST_CASE("global step restores NSD after an infeasible perturbation", "[admm]") {
    const NetworkSpec net = two_subsystem();
    const BlockStacks bs = BlockStacks::from_network(net);
    auto xs = viia_supplies();
    for (std::size_t k = 0; k < 2; ++k) xs[0].add(2 + k, 2 + k, 0.6);  // X1^22 += 0.6 I
    REQUIRE(composed_max_eig(bs, xs) > 0.0);
    const GlobalStepResult gs = global_step(bs, xs, 1e-8);
    CHECK(gs.feasible);
    CHECK(composed_max_eig(bs, gs.z) <= 1e-6);
}

TEST_CASE("run_admm: feasible start terminates via the in-G test immediately", "[admm]") {
    const NetworkSpec net = two_subsystem();
    const BlockStacks bs = BlockStacks::from_network(net);
    const AdmmResult res = run_admm(bs, viia_supplies());
    CHECK(res.converged);
    CHECK(res.iterations <= 1);
    CHECK(res.final_max_eig <= 1e-8);
}

TEST_CASE("run_admm: genuinely infeasible start converges and re-checks NSD", "[admm]") {
    const NetworkSpec net = two_subsystem();
    const BlockStacks bs = BlockStacks::from_network(net);
    auto xs = viia_supplies();
    for (std::size_t k = 0; k < 2; ++k) xs[0].add(2 + k, 2 + k, 0.6);
    const AdmmResult res = run_admm(bs, xs);
    CHECK(res.converged);
    CHECK(res.iterations < 500);
    CHECK(res.final_max_eig <= 1e-8);
    REQUIRE(res.history.size() >= 1);
    CHECK(res.history.back().max_eig <= res.history.front().max_eig);
}

TEST_CASE("run_admm on a 50-ring from a bad supply family", "[admm][slow]") {
    const NetworkSpec net = nonlinear_ring(50, 0.1);
    const BlockStacks bs = BlockStacks::from_network(net);
    std::vector<SymMat> xs;
    for (int i = 0; i < 50; ++i) {
        SymMat x(4);
        x.set(1, 3, 0.944);  // positive w-x coupling breaks NSD of the composed form
        xs.push_back(x);
    }
    REQUIRE(composed_max_eig(bs, xs) > 1.0);
    const AdmmResult res = run_admm(bs, xs);
    CHECK(res.converged);
    CHECK(res.final_max_eig <= 1e-8);
}

TEST_CASE("blockwise composed operator matches the dense congruence", "[admm]") {
    const NetworkSpec net = nonlinear_ring(6, 0.1);
    const BlockStacks bs = BlockStacks::from_network(net);
    Rng rng(31);
    std::vector<SymMat> xs;
    for (int i = 0; i < 6; ++i) {
        SymMat x(4);
        for (std::size_t a = 0; a < 4; ++a)
            for (std::size_t b = a; b < 4; ++b) x.set(a, b, rng.normal());
        xs.push_back(x);
    }
    // dense reference: assemble X_cmp per the displayed block arrangement and congruence it
    const std::size_t P = net.total_input_dim(), N = net.total_state_dim();
    SymMat xcmp(P + N);
    for (std::size_t i = 0; i < 6; ++i) {
        const std::size_t op = net.input_offset(i), on = net.state_offset(i);
        for (std::size_t a = 0; a < 2; ++a)
            for (std::size_t b = 0; b < 2; ++b) {
                xcmp.data[(op + a) * (P + N) + (op + b)] = xs[i](a, b);
                xcmp.data[(op + a) * (P + N) + (P + on + b)] = xs[i](a, 2 + b);
                xcmp.data[(P + on + a) * (P + N) + (op + b)] = xs[i](2 + a, b);
                xcmp.data[(P + on + a) * (P + N) + (P + on + b)] = xs[i](2 + a, 2 + b);
            }
    }
    const SymMat dense = congruence(xcmp, stack_over_identity(net.topology));
    const SymMat blockwise = bs.compose(xs);
    for (std::size_t k = 0; k < dense.data.size(); ++k)
        CHECK(blockwise.data[k] == Catch::Approx(dense.data[k]).margin(1e-12));

    // Lanczos max-eig agrees with the dense eigensolver
    const double lz = lanczos_max_eig([&](const Vec& v) { return bs.compose_apply(xs, v); },
                                      N, 5);
    CHECK(lz == Catch::Approx(max_eigval(dense)).margin(1e-7));
}

TEST_CASE("history CSV has the documented columns", "[admm]") {
    AdmmResult res;
    res.history.push_back({0, 1.0, 2.0, -0.5});
    const std::string csv = history_csv(res);
    CHECK(csv.rfind("iteration,primal,dual,max_eig\n", 0) == 0);
    CHECK(csv.find("0,1,2,-0.5") != std::string::npos);
}
