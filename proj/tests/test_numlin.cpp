#include <catch2/catch_amalgamated.hpp>

#include "dissipacert/numlin.hpp"
#include "dissipacert/rng.hpp"

using namespace dissipacert;

TEST_CASE("sym_eigvals on identity and diagonal", "[numlin]") {
    CHECK(sym_eigvals(SymMat::identity(3)) == Vec{1.0, 1.0, 1.0});
    const Vec ev = sym_eigvals(SymMat::diagonal({-1.0, 2.0}));
    CHECK(ev[0] == Catch::Approx(-1.0));
    CHECK(ev[1] == Catch::Approx(2.0));
}

TEST_CASE("sym_eigvals [[2,1],[1,2]] -> {1,3} from the characteristic polynomial",
          "[numlin]") {
    // det(A - t I) = (2-t)^2 - 1 = 0  =>  t = 1, 3
    SymMat m(2);
    m.set(0, 0, 2.0);
    m.set(0, 1, 1.0);
    m.set(1, 1, 2.0);
    const Vec ev = sym_eigvals(m);
    CHECK(ev[0] == Catch::Approx(1.0).margin(1e-12));
    CHECK(ev[1] == Catch::Approx(3.0).margin(1e-12));
}

TEST_CASE("eigendecomposition reconstructs the matrix", "[numlin]") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + rng.uniform_index(7);
        SymMat m(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) m.set(i, j, rng.normal());
        const EigenDecomposition d = sym_eig(m);
        REQUIRE(d.values.size() == n);
        // || Q L Q^T - m ||_F <= 1e-10 max(1, ||m||_F)
        double resid = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < n; ++k)
                    s += d.vectors(i, k) * d.values[k] * d.vectors(j, k);
                const double dd = s - m(i, j);
                resid += dd * dd;
            }
        CHECK(std::sqrt(resid) <= 1e-10 * std::max(1.0, m.frobenius()));
        // eigenvalue sum equals the trace
        double sum = 0.0;
        for (const double v : d.values) sum += v;
        CHECK(std::abs(sum - m.trace()) <=
              1e-9 * static_cast<double>(n) * std::max(1.0, m.frobenius()));
    }
}

TEST_CASE("is_nsd basics and monotonicity in the tolerance", "[numlin]") {
    SymMat negid = SymMat::identity(2);
    for (auto& v : negid.data) v = -v;
    CHECK(is_nsd(negid, 0.0));
    CHECK_FALSE(is_nsd(SymMat::identity(2), 0.0));

    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        SymMat m(3);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = i; j < 3; ++j) m.set(i, j, rng.normal());
        const double t1 = rng.uniform(-1.0, 1.0);
        const double t2 = t1 + rng.uniform(0.0, 2.0);
        if (is_nsd(m, t1)) CHECK(is_nsd(m, t2));
    }
}

TEST_CASE("congruence: zero, identity and symmetry", "[numlin]") {
    Rng rng(11);
    Mat m(2, 2);
    m(0, 0) = rng.normal();
    m(0, 1) = rng.normal();
    m(1, 0) = rng.normal();
    m(1, 1) = rng.normal();
    const Mat stack = stack_over_identity(m);

    CHECK(congruence(SymMat(4), stack).frobenius() == 0.0);

    // identity X with M = I stacked over I gives 2 I
    const Mat eye_stack = stack_over_identity(Mat::identity(3));
    const SymMat two_eye = congruence(SymMat::identity(6), eye_stack);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(two_eye(i, j) == Catch::Approx(i == j ? 2.0 : 0.0).margin(1e-14));

    // symmetric by construction for random inputs
    SymMat x(4);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = i; j < 4; ++j) x.set(i, j, rng.normal());
    const SymMat c = congruence(x, stack);
    for (std::size_t i = 0; i < c.dim; ++i)
        for (std::size_t j = 0; j < c.dim; ++j) CHECK(c(i, j) == c(j, i));
}

TEST_CASE("congruence dimension mismatch throws", "[numlin]") {
    CHECK_THROWS_AS(congruence(SymMat::identity(3), stack_over_identity(Mat::identity(3))),
                    std::invalid_argument);
}

TEST_CASE("clip_nsd removes exactly the positive part", "[numlin]") {
    Rng rng(5);
    SymMat m(4);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = i; j < 4; ++j) m.set(i, j, rng.normal());
    const SymMat c = clip_nsd(m);
    CHECK(max_eigval(c) <= 1e-10);
    // the clipped part differs from m only in the positive eigendirections
    const EigenDecomposition d = sym_eig(m);
    for (std::size_t k = 0; k < 4; ++k) {
        if (d.values[k] >= 0.0) continue;
        Vec v(4);
        for (std::size_t i = 0; i < 4; ++i) v[i] = d.vectors(i, k);
        CHECK(c.quad(v) == Catch::Approx(d.values[k]).margin(1e-10));
    }
}
