#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "dissipacert/data.hpp"
#include "dissipacert/lp.hpp"
#include "dissipacert/numlin.hpp"

namespace dissipacert {

/// Homogeneous degree-2 monomial basis: each entry (j,k), j <= k, is x_j * x_k.
struct StorageTemplate {
    std::size_t state_dim = 0;
    std::vector<std::pair<std::size_t, std::size_t>> monomials;

    std::size_t size() const { return monomials.size(); }

    void validate() const {
        if (state_dim == 0 || monomials.empty())
            throw std::invalid_argument("storage template: empty");
        for (std::size_t a = 0; a < monomials.size(); ++a) {
            const auto [j, k] = monomials[a];
            if (j > k || k >= state_dim)
                throw std::invalid_argument("storage template: bad monomial index");
            for (std::size_t b = a + 1; b < monomials.size(); ++b)
                if (monomials[b] == monomials[a])
                    throw std::invalid_argument("storage template: duplicate monomial");
        }
    }

    static StorageTemplate full_quadratic(std::size_t n) {
        StorageTemplate t;
        t.state_dim = n;
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = j; k < n; ++k) t.monomials.emplace_back(j, k);
        return t;
    }

    static StorageTemplate diagonal(std::size_t n) {
        StorageTemplate t;
        t.state_dim = n;
        for (std::size_t j = 0; j < n; ++j) t.monomials.emplace_back(j, j);
        return t;
    }

    Vec basis_at(const Vec& x) const {
        Vec b(monomials.size());
        for (std::size_t a = 0; a < monomials.size(); ++a)
            b[a] = x[monomials[a].first] * x[monomials[a].second];
        return b;
    }
};

/// S(q, x) = sum_j q_j p_j(x); degree-2 homogeneous by construction.
struct StorageFn {
    StorageTemplate tmpl;
    Vec q;

    double eval(const Vec& x) const {
        const Vec b = tmpl.basis_at(x);
        return dot(q, b);
    }

    /// Gram-matrix form: S(x) = x^T P x.
    SymMat gram() const {
        SymMat p(tmpl.state_dim);
        for (std::size_t a = 0; a < tmpl.size(); ++a) {
            const auto [j, k] = tmpl.monomials[a];
            if (j == k) p.add(j, j, q[a]);
            else p.add(j, k, 0.5 * q[a]);
        }
        return p;
    }
};

inline double eval_storage(const StorageFn& s, const Vec& x) { return s.eval(x); }

/// Quadratic supply rate [w;x]^T X [w;x] with X partitioned into
/// x11 (p x p), x12 (p x n), x22 (n x n); x21 is x12^T by symmetry.
struct SupplyRate {
    SymMat x11;
    Mat x12;
    SymMat x22;

    std::size_t p() const { return x11.dim; }
    std::size_t n() const { return x22.dim; }

    SymMat assemble() const {
        SymMat full(p() + n());
        for (std::size_t i = 0; i < p(); ++i)
            for (std::size_t j = i; j < p(); ++j) full.set(i, j, x11(i, j));
        for (std::size_t i = 0; i < p(); ++i)
            for (std::size_t j = 0; j < n(); ++j) full.set(i, p() + j, x12(i, j));
        for (std::size_t i = 0; i < n(); ++i)
            for (std::size_t j = i; j < n(); ++j) full.set(p() + i, p() + j, x22(i, j));
        return full;
    }

    double quad(const Vec& w, const Vec& x) const {
        double s = 0.0;
        for (std::size_t i = 0; i < p(); ++i)
            for (std::size_t j = 0; j < p(); ++j) s += w[i] * x11(i, j) * w[j];
        for (std::size_t i = 0; i < p(); ++i) {
            double t = 0.0;
            for (std::size_t j = 0; j < n(); ++j) t += x12(i, j) * x[j];
            s += 2.0 * w[i] * t;
        }
        for (std::size_t i = 0; i < n(); ++i)
            for (std::size_t j = 0; j < n(); ++j) s += x[i] * x22(i, j) * x[j];
        return s;
    }
};

enum class ScpVariant { Full, Relaxed };
enum class SupplyStructure { Full, DiagonalX11 };

struct ScpProblem {
    const SampleSet* samples = nullptr;
    StorageTemplate tmpl;
    ScpVariant variant = ScpVariant::Full;
    SupplyStructure supply_structure = SupplyStructure::Full;
    double q_max = 10.0;
    double x_max = 10.0;
    double eta = 1e-9;  // strict-inequality margin for the positivity constraint

    void validate() const {
        if (!samples || samples->count() == 0) throw std::invalid_argument("scp: empty sample set");
        tmpl.validate();
        if (tmpl.state_dim != samples->n) throw std::invalid_argument("scp: template dim mismatch");
        if (!(q_max > 0.0) || !(x_max > 0.0) || !std::isfinite(q_max) || !std::isfinite(x_max))
            throw std::invalid_argument("scp: boxes must be finite and positive");
        if (!(eta >= 0.0)) throw std::invalid_argument("scp: eta >= 0");
    }
};

struct ScpSolution {
    StorageFn storage;
    SupplyRate supply;
    double mu = 0.0;
    double delta = 0.0;
    bool has_delta = true;
    double objective = 0.0;
    LpStatus solver_status = LpStatus::NumericalError;
    std::size_t active_constraint_count = 0;
    std::size_t generated_rows = 0;
    int simplex_iterations = 0;
    double max_violation = 0.0;  // re-verification residual over all scenario rows
};

namespace detail {

/// Variable layout: [q (r)] [x11 upper-tri] [x12 row-major] [x22 upper-tri] [mu] [delta?].
struct ScpLayout {
    std::size_t r = 0, n = 0, p = 0;
    SupplyStructure structure = SupplyStructure::Full;
    std::size_t n11 = 0, n12 = 0, n22 = 0;
    std::size_t mu = 0, delta = 0, total = 0;
    bool has_delta = true;

    ScpLayout(const ScpProblem& prob) {
        r = prob.tmpl.size();
        n = prob.samples->n;
        p = prob.samples->p;
        structure = prob.supply_structure;
        n11 = structure == SupplyStructure::DiagonalX11 ? p : p * (p + 1) / 2;
        n12 = p * n;
        n22 = n * (n + 1) / 2;
        has_delta = prob.variant == ScpVariant::Full;
        mu = r + n11 + n12 + n22;
        delta = mu + 1;
        total = mu + 1 + (has_delta ? 1 : 0);
    }

    /// Coefficients of [w;x]^T X [w;x] in the X variables, appended into row.
    void add_qf(std::vector<double>& row, const Vec& w, const Vec& x, double sign) const {
        std::size_t idx = r;
        if (structure == SupplyStructure::DiagonalX11) {
            for (std::size_t a = 0; a < p; ++a) row[idx++] += sign * w[a] * w[a];
        } else {
            for (std::size_t a = 0; a < p; ++a)
                for (std::size_t b = a; b < p; ++b)
                    row[idx++] += sign * (a == b ? w[a] * w[b] : 2.0 * w[a] * w[b]);
        }
        for (std::size_t a = 0; a < p; ++a)
            for (std::size_t b = 0; b < n; ++b) row[idx++] += sign * 2.0 * w[a] * x[b];
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a; b < n; ++b)
                row[idx++] += sign * (a == b ? x[a] * x[b] : 2.0 * x[a] * x[b]);
    }

    SupplyRate unpack(const std::vector<double>& sol) const {
        SupplyRate s;
        s.x11 = SymMat(p);
        s.x12 = Mat(p, n);
        s.x22 = SymMat(n);
        std::size_t idx = r;
        if (structure == SupplyStructure::DiagonalX11) {
            for (std::size_t a = 0; a < p; ++a) s.x11.set(a, a, sol[idx++]);
        } else {
            for (std::size_t a = 0; a < p; ++a)
                for (std::size_t b = a; b < p; ++b) s.x11.set(a, b, sol[idx++]);
        }
        for (std::size_t a = 0; a < p; ++a)
            for (std::size_t b = 0; b < n; ++b) s.x12(a, b) = sol[idx++];
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a; b < n; ++b) s.x22.set(a, b, sol[idx++]);
        return s;
    }
};

/// Left-hand sides of the three scenario constraints at a candidate point.
struct ScenarioLhs {
    double a;  // -S(x) - mu          (vs -eta)
    double b;  // dS - QF - mu        (vs 0)
    double c;  // QF - delta          (vs 0), full variant only
};

inline ScenarioLhs scenario_lhs(const ScpProblem& prob, const StorageFn& storage,
                                const SupplyRate& supply, double mu, double delta,
                                std::size_t z) {
    const Sample& s = prob.samples->samples[z];
    const double sx = storage.eval(s.x_hat);
    const double sf = storage.eval(s.f_hat);
    const double qf = supply.quad(s.w_hat, s.x_hat);
    ScenarioLhs l{};
    l.a = -sx - mu;
    l.b = sf - sx - qf - mu;
    l.c = prob.variant == ScpVariant::Full ? qf - delta : 0.0;
    return l;
}

inline void append_scenario_rows(const ScpProblem& prob, const ScpLayout& lay, std::size_t z,
                                 LpStandard& lp) {
    const Sample& s = prob.samples->samples[z];
    const Vec bx = prob.tmpl.basis_at(s.x_hat);
    const Vec bf = prob.tmpl.basis_at(s.f_hat);
    {
        std::vector<double> row(lay.total, 0.0);
        for (std::size_t a = 0; a < lay.r; ++a) row[a] = -bx[a];
        row[lay.mu] = -1.0;
        lp.rows.push_back(std::move(row));
        lp.rhs.push_back(-prob.eta);
    }
    {
        std::vector<double> row(lay.total, 0.0);
        for (std::size_t a = 0; a < lay.r; ++a) row[a] = bf[a] - bx[a];
        lay.add_qf(row, s.w_hat, s.x_hat, -1.0);
        row[lay.mu] = -1.0;
        lp.rows.push_back(std::move(row));
        lp.rhs.push_back(0.0);
    }
    if (lay.has_delta) {
        std::vector<double> row(lay.total, 0.0);
        lay.add_qf(row, s.w_hat, s.x_hat, 1.0);
        row[lay.delta] = -1.0;
        lp.rows.push_back(std::move(row));
        lp.rhs.push_back(0.0);
    }
}

/// Finite bounds for mu and delta large enough to never bind; verified after
/// the solve (the simplex wants boxed variables).
inline double mu_delta_bound(const ScpProblem& prob) {
    double bmax = 1.0;
    for (const Sample& s : prob.samples->samples) {
        const Vec bx = prob.tmpl.basis_at(s.x_hat);
        const Vec bf = prob.tmpl.basis_at(s.f_hat);
        double t = 0.0;
        for (std::size_t a = 0; a < bx.size(); ++a)
            t += std::abs(bx[a]) + std::abs(bf[a]);
        const double jn2 = 1.0;  // ||(x,w)|| = 1 on normalized data
        const double qf = prob.x_max * (prob.samples->p + prob.samples->n) * jn2;
        bmax = std::max(bmax, prob.q_max * t + qf + std::abs(prob.eta));
    }
    return 4.0 * bmax + 10.0;
}

}  // namespace detail

/// Full scenario LP with every row materialized (small instances and tests).
inline LpStandard assemble_scp(const ScpProblem& prob) {
    prob.validate();
    const detail::ScpLayout lay(prob);
    LpStandard lp;
    lp.objective.assign(lay.total, 0.0);
    lp.objective[lay.mu] = 1.0;
    if (lay.has_delta) lp.objective[lay.delta] = 1.0;
    lp.lower.assign(lay.total, 0.0);
    lp.upper.assign(lay.total, 0.0);
    for (std::size_t j = 0; j < lay.r; ++j) {
        lp.lower[j] = -prob.q_max;
        lp.upper[j] = prob.q_max;
    }
    for (std::size_t j = lay.r; j < lay.mu; ++j) {
        lp.lower[j] = -prob.x_max;
        lp.upper[j] = prob.x_max;
    }
    const double big = detail::mu_delta_bound(prob);
    lp.lower[lay.mu] = -big;
    lp.upper[lay.mu] = big;
    if (lay.has_delta) {
        lp.lower[lay.delta] = -big;
        lp.upper[lay.delta] = big;
    }
    for (std::size_t z = 0; z < prob.samples->count(); ++z)
        detail::append_scenario_rows(prob, lay, z, lp);
    return lp;
}

/// Solves the scenario program by constraint generation: solve on an active
/// subset, scan every scenario row at the incumbent, add the most violated,
/// repeat. Returned solution is re-verified against all rows at feasibility
/// tolerance 1e-9 regardless of how it was produced.
inline ScpSolution solve_scp(const ScpProblem& prob, double tol = 1e-9) {
    prob.validate();
    const detail::ScpLayout lay(prob);
    const std::size_t N = prob.samples->count();

    LpStandard lp;  // active-subset LP, grown in place
    lp.objective.assign(lay.total, 0.0);
    lp.objective[lay.mu] = 1.0;
    if (lay.has_delta) lp.objective[lay.delta] = 1.0;
    lp.lower.assign(lay.total, 0.0);
    lp.upper.assign(lay.total, 0.0);
    for (std::size_t j = 0; j < lay.r; ++j) {
        lp.lower[j] = -prob.q_max;
        lp.upper[j] = prob.q_max;
    }
    for (std::size_t j = lay.r; j < lay.mu; ++j) {
        lp.lower[j] = -prob.x_max;
        lp.upper[j] = prob.x_max;
    }
    const double big = detail::mu_delta_bound(prob);
    lp.lower[lay.mu] = -big;
    lp.upper[lay.mu] = big;
    if (lay.has_delta) {
        lp.lower[lay.delta] = -big;
        lp.upper[lay.delta] = big;
    }

    std::vector<char> in_lp(N, 0);
    // seed the active set with a spread of samples
    const std::size_t seed_count = std::min<std::size_t>(N, 8);
    for (std::size_t k = 0; k < seed_count; ++k) {
        const std::size_t z = k * (N / seed_count);
        detail::append_scenario_rows(prob, lay, z, lp);
        in_lp[z] = 1;
    }

    ScpSolution sol;
    LpResult lr;
    const int max_rounds = 200;
    for (int round = 0; round < max_rounds; ++round) {
        lr = solve_lp(lp, tol);
        if (lr.status == LpStatus::Infeasible)
            throw std::runtime_error("solve_scp: LP reported infeasible, which boxed variables exclude");
        if (lr.status != LpStatus::Optimal)
            throw std::runtime_error(std::string("solve_scp: LP solver failure: ") +
                                     to_string(lr.status));
        StorageFn st{prob.tmpl, Vec(lr.x.begin(), lr.x.begin() + lay.r)};
        SupplyRate sup = lay.unpack(lr.x);
        const double mu = lr.x[lay.mu];
        const double delta = lay.has_delta ? lr.x[lay.delta] : 0.0;

        // most violated rows over the whole scenario set
        struct Viol { double v; std::size_t z; };
        std::vector<Viol> worst;
        double maxv = 0.0;
        for (std::size_t z = 0; z < N; ++z) {
            if (in_lp[z]) continue;
            const auto l = detail::scenario_lhs(prob, st, sup, mu, delta, z);
            const double v = std::max({l.a + prob.eta, l.b, lay.has_delta ? l.c : 0.0});
            if (v > maxv) maxv = v;
            if (v > tol * 0.1) worst.push_back({v, z});
        }
        if (worst.empty()) {
            sol.storage = std::move(st);
            sol.supply = std::move(sup);
            sol.mu = mu;
            sol.delta = delta;
            sol.has_delta = lay.has_delta;
            sol.objective = lr.objective;
            sol.solver_status = lr.status;
            sol.generated_rows = lp.num_rows();
            sol.simplex_iterations = lr.iterations;
            break;
        }
        std::sort(worst.begin(), worst.end(), [](const Viol& a, const Viol& b) { return a.v > b.v; });
        const std::size_t add = std::min<std::size_t>(worst.size(), 32);
        for (std::size_t k = 0; k < add; ++k) {
            detail::append_scenario_rows(prob, lay, worst[k].z, lp);
            in_lp[worst[k].z] = 1;
        }
        if (round + 1 == max_rounds)
            throw std::runtime_error("solve_scp: constraint generation did not settle");
    }

    if (std::abs(sol.mu) > 0.9 * big || (sol.has_delta && std::abs(sol.delta) > 0.9 * big))
        throw std::runtime_error("solve_scp: internal mu/delta bound was nearly active");

    // defense against solver slack: re-check every scenario constraint
    sol.max_violation = 0.0;
    sol.active_constraint_count = 0;
    for (std::size_t z = 0; z < N; ++z) {
        const auto l = detail::scenario_lhs(prob, sol.storage, sol.supply, sol.mu, sol.delta, z);
        const double v = std::max({l.a + prob.eta, l.b, sol.has_delta ? l.c : 0.0});
        sol.max_violation = std::max(sol.max_violation, v);
        if (v > -1e-7) ++sol.active_constraint_count;
    }
    if (sol.max_violation > 1e-9)
        throw std::runtime_error("solve_scp: re-verification failed, violation " +
                                 std::to_string(sol.max_violation));
    return sol;
}

/// Deterministic tie-break for the relaxed (known-topology) variant: among
/// mu-optimal solutions pick one of minimal l1 supply-rate mass, so the
/// compositionality check starts from the least aggressive X_i.
inline ScpSolution solve_scp_relaxed_min_supply(const ScpProblem& prob, double tol = 1e-9) {
    if (prob.variant != ScpVariant::Relaxed)
        throw std::invalid_argument("min-supply tie-break is for the relaxed variant");
    ScpSolution first = solve_scp(prob, tol);

    const detail::ScpLayout lay(prob);
    const std::size_t nx = lay.n11 + lay.n12 + lay.n22;
    // variables: original layout + one |.| bound per X entry
    LpStandard lp;
    const std::size_t total = lay.total + nx;
    lp.objective.assign(total, 0.0);
    for (std::size_t j = 0; j < nx; ++j) lp.objective[lay.total + j] = 1.0;
    lp.lower.assign(total, 0.0);
    lp.upper.assign(total, 0.0);
    for (std::size_t j = 0; j < lay.r; ++j) {
        lp.lower[j] = -prob.q_max;
        lp.upper[j] = prob.q_max;
    }
    for (std::size_t j = lay.r; j < lay.mu; ++j) {
        lp.lower[j] = -prob.x_max;
        lp.upper[j] = prob.x_max;
    }
    const double big = detail::mu_delta_bound(prob);
    lp.lower[lay.mu] = -big;
    lp.upper[lay.mu] = first.mu + std::max(1e-9, 1e-9 * std::abs(first.mu));
    for (std::size_t j = 0; j < nx; ++j) {
        lp.lower[lay.total + j] = 0.0;
        lp.upper[lay.total + j] = prob.x_max;
    }

    std::vector<char> in_lp(prob.samples->count(), 0);
    auto add_rows = [&](std::size_t z) {
        LpStandard tmp;
        tmp.objective.assign(lay.total, 0.0);
        detail::append_scenario_rows(prob, lay, z, tmp);
        for (std::size_t k = 0; k < tmp.rows.size(); ++k) {
            tmp.rows[k].resize(total, 0.0);
            lp.rows.push_back(std::move(tmp.rows[k]));
            lp.rhs.push_back(tmp.rhs[k]);
        }
        in_lp[z] = 1;
    };
    for (std::size_t j = 0; j < nx; ++j) {  // +-X_j <= aux_j
        std::vector<double> r1(total, 0.0), r2(total, 0.0);
        r1[lay.r + j] = 1.0;
        r1[lay.total + j] = -1.0;
        r2[lay.r + j] = -1.0;
        r2[lay.total + j] = -1.0;
        lp.rows.push_back(std::move(r1));
        lp.rhs.push_back(0.0);
        lp.rows.push_back(std::move(r2));
        lp.rhs.push_back(0.0);
    }
    const std::size_t N = prob.samples->count();
    for (std::size_t k = 0; k < std::min<std::size_t>(N, 8); ++k)
        add_rows(k * (N / std::min<std::size_t>(N, 8)));

    ScpSolution sol = first;
    for (int round = 0; round < 200; ++round) {
        const LpResult lr = solve_lp(lp, tol);
        if (lr.status != LpStatus::Optimal) return first;  // keep the plain optimum
        StorageFn st{prob.tmpl, Vec(lr.x.begin(), lr.x.begin() + lay.r)};
        SupplyRate sup = lay.unpack(lr.x);
        const double mu = lr.x[lay.mu];
        double maxv = 0.0;
        std::size_t worst_z = 0;
        std::vector<std::size_t> viol;
        for (std::size_t z = 0; z < N; ++z) {
            if (in_lp[z]) continue;
            const auto l = detail::scenario_lhs(prob, st, sup, mu, 0.0, z);
            const double v = std::max(l.a + prob.eta, l.b);
            if (v > maxv) { maxv = v; worst_z = z; }
            if (v > tol * 0.1) viol.push_back(z);
        }
        (void)worst_z;
        if (viol.empty()) {
            sol.storage = std::move(st);
            sol.supply = std::move(sup);
            sol.mu = mu;
            sol.delta = 0.0;
            sol.objective = mu;
            sol.generated_rows = lp.num_rows();
            sol.simplex_iterations = lr.iterations;
            break;
        }
        std::sort(viol.begin(), viol.end(), [&](std::size_t a, std::size_t b) { return a < b; });
        for (std::size_t k = 0; k < std::min<std::size_t>(viol.size(), 32); ++k)
            add_rows(viol[k]);
    }
    sol.max_violation = 0.0;
    for (std::size_t z = 0; z < N; ++z) {
        const auto l = detail::scenario_lhs(prob, sol.storage, sol.supply, sol.mu, 0.0, z);
        sol.max_violation = std::max(sol.max_violation, std::max(l.a + prob.eta, l.b));
    }
    if (sol.max_violation > 1e-9) return first;
    return sol;
}

}  // namespace dissipacert
