#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dissipacert {

/// minimize c^T x  subject to  A x <= b,  lower <= x <= upper.
/// Structural bounds must be finite; the solver adds slack variables itself.
struct LpStandard {
    std::vector<double> objective;            // length n
    std::vector<std::vector<double>> rows;    // each length n
    std::vector<double> rhs;                  // length m
    std::vector<double> lower, upper;         // length n

    std::size_t num_vars() const { return objective.size(); }
    std::size_t num_rows() const { return rows.size(); }
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit, NumericalError };

inline const char* to_string(LpStatus s) {
    switch (s) {
        case LpStatus::Optimal: return "optimal";
        case LpStatus::Infeasible: return "infeasible";
        case LpStatus::Unbounded: return "unbounded";
        case LpStatus::IterationLimit: return "iteration_limit";
        case LpStatus::NumericalError: return "numerical_error";
    }
    return "unknown";
}

struct LpResult {
    LpStatus status = LpStatus::NumericalError;
    std::vector<double> x;
    double objective = 0.0;
    int iterations = 0;
    double max_row_violation = 0.0;
};

/// Plain-text standard-form listing for external cross-checking.
inline std::string format_lp(const LpStandard& lp) {
    std::ostringstream os;
    os.precision(17);
    os << "minimize";
    for (std::size_t j = 0; j < lp.num_vars(); ++j) os << ' ' << lp.objective[j] << "*x" << j;
    os << "\nsubject to\n";
    for (std::size_t i = 0; i < lp.num_rows(); ++i) {
        for (std::size_t j = 0; j < lp.num_vars(); ++j) {
            if (j) os << " + ";
            os << lp.rows[i][j] << "*x" << j;
        }
        os << " <= " << lp.rhs[i] << '\n';
    }
    for (std::size_t j = 0; j < lp.num_vars(); ++j)
        os << lp.lower[j] << " <= x" << j << " <= " << lp.upper[j] << '\n';
    return os.str();
}

namespace detail {

/// Bounded-variable primal simplex on a dense tableau, two-phase, Bland's rule.
class BoundedSimplex {
public:
    BoundedSimplex(const LpStandard& lp, double tol) : lp_(lp), tol_(tol) {
        n_ = lp.num_vars();
        m_ = lp.num_rows();
        nt_ = n_ + m_;  // structural + slack
        for (std::size_t j = 0; j < n_; ++j) {
            if (!(std::isfinite(lp.lower[j]) && std::isfinite(lp.upper[j])))
                throw std::invalid_argument("solve_lp: structural bounds must be finite");
            if (lp.lower[j] > lp.upper[j])
                throw std::invalid_argument("solve_lp: lower > upper");
        }
    }

    LpResult run(int max_iter) {
        build();
        LpResult res;
        if (!phase1(max_iter, res)) return res;
        if (!phase2(max_iter, res)) return res;
        extract(res);
        return res;
    }

private:
    static constexpr double kInf = std::numeric_limits<double>::infinity();

    const LpStandard& lp_;
    double tol_;
    std::size_t n_ = 0, m_ = 0, nt_ = 0;
    std::size_t ncols_ = 0;  // nt_ plus artificials
    std::vector<double> tab_;       // m_ x ncols_, B^-1 * A
    std::vector<double> beta_;      // basic variable values
    std::vector<int> basis_;        // row -> variable
    std::vector<int> in_basis_;     // variable -> row or -1
    std::vector<char> at_upper_;    // nonbasic rest position
    std::vector<double> lo_, up_, cost_;
    int iterations_ = 0;
#ifdef DISSIPACERT_LP_DEBUG
    bool debug_phase2_ = false;
#endif

    double tabv(std::size_t r, std::size_t c) const { return tab_[r * ncols_ + c]; }
    double& tabv(std::size_t r, std::size_t c) { return tab_[r * ncols_ + c]; }

    double nb_value(std::size_t j) const { return at_upper_[j] ? up_[j] : lo_[j]; }

    void build() {
        lo_.assign(nt_, 0.0);
        up_.assign(nt_, kInf);
        cost_.assign(nt_, 0.0);
        for (std::size_t j = 0; j < n_; ++j) {
            lo_[j] = lp_.lower[j];
            up_[j] = lp_.upper[j];
            cost_[j] = lp_.objective[j];
        }
        at_upper_.assign(nt_, 0);
        for (std::size_t j = 0; j < n_; ++j) {
            // rest nonbasic at the anti-objective bound: the simplex then walks
            // each variable toward optimality instead of starting a long
            // phase 1 (scenario LPs become feasible at the start this way)
            if (cost_[j] > 0.0) at_upper_[j] = 1;
            else if (cost_[j] < 0.0) at_upper_[j] = 0;
            else at_upper_[j] = std::abs(up_[j]) < std::abs(lo_[j]) ? 1 : 0;
        }
        ncols_ = nt_;
        tab_.assign(m_ * ncols_, 0.0);
        beta_.assign(m_, 0.0);
        basis_.assign(m_, -1);
        for (std::size_t i = 0; i < m_; ++i) {
            for (std::size_t j = 0; j < n_; ++j) tabv(i, j) = lp_.rows[i][j];
            tabv(i, n_ + i) = 1.0;
            basis_[i] = static_cast<int>(n_ + i);
            double s = lp_.rhs[i];
            for (std::size_t j = 0; j < n_; ++j) s -= lp_.rows[i][j] * nb_value(j);
            beta_[i] = s;  // slack value
        }
        in_basis_.assign(nt_, -1);
        for (std::size_t i = 0; i < m_; ++i) in_basis_[basis_[i]] = static_cast<int>(i);
    }

    bool phase1(int max_iter, LpResult& res) {
        std::vector<std::size_t> bad;
        for (std::size_t i = 0; i < m_; ++i)
            if (beta_[i] < -tol_) bad.push_back(i);
        if (bad.empty()) return true;

        // artificial column per infeasible row: A x + s - t = b, t >= 0 basic
        const std::size_t na = bad.size();
        std::vector<double> tab2(m_ * (nt_ + na), 0.0);
        for (std::size_t i = 0; i < m_; ++i)
            for (std::size_t j = 0; j < nt_; ++j) tab2[i * (nt_ + na) + j] = tabv(i, j);
        ncols_ = nt_ + na;
        tab_ = std::move(tab2);
        lo_.resize(ncols_, 0.0);
        up_.resize(ncols_, kInf);
        cost_.resize(ncols_, 0.0);
        at_upper_.resize(ncols_, 0);
        in_basis_.resize(ncols_, -1);
        std::vector<double> pcost(ncols_, 0.0);
        for (std::size_t k = 0; k < na; ++k) {
            const std::size_t i = bad[k];
            const std::size_t col = nt_ + k;
            tabv(i, col) = -1.0;
            pcost[col] = 1.0;
            // pivot the row so the artificial enters the basis with +1 coefficient
            for (std::size_t j = 0; j < ncols_; ++j) tabv(i, j) = -tabv(i, j);
            beta_[i] = -beta_[i];
            in_basis_[basis_[i]] = -1;
            basis_[i] = static_cast<int>(col);
            in_basis_[col] = static_cast<int>(i);
        }
        if (!iterate(pcost, max_iter, res)) return false;
        double p1 = 0.0;
        for (std::size_t i = 0; i < m_; ++i) p1 += pcost[basis_[i]] * beta_[i];
        if (p1 > 1e-7) {
            res.status = LpStatus::Infeasible;
            res.iterations = iterations_;
            return false;
        }
        // freeze surviving artificials at zero so phase 2 cannot move them
        for (std::size_t k = 0; k < na; ++k) {
            const std::size_t col = nt_ + k;
            lo_[col] = up_[col] = 0.0;
        }
        return true;
    }

    bool phase2(int max_iter, LpResult& res) {
#ifdef DISSIPACERT_LP_DEBUG
        debug_phase2_ = true;
#endif
        std::vector<double> cost(ncols_, 0.0);
        for (std::size_t j = 0; j < n_; ++j) cost[j] = cost_[j];
        return iterate(cost, max_iter, res);
    }

#ifdef DISSIPACERT_LP_DEBUG
    void debug_check(const char* tag) const {
        std::vector<double> x(nt_, 0.0);
        for (std::size_t j = 0; j < nt_; ++j) {
            const int r = in_basis_[j];
            x[j] = r >= 0 ? beta_[r] : (at_upper_[j] ? up_[j] : lo_[j]);
        }
        for (std::size_t i = 0; i < m_; ++i) {
            double s = lp_.rhs[i];
            for (std::size_t j = 0; j < n_; ++j) s -= lp_.rows[i][j] * x[j];
            const double drift = std::abs(s - x[n_ + i]);
            if (drift > 1e-6)
                std::fprintf(stderr, "[lp-debug %s] iter=%d row=%zu slack drift %.3g (true %.6g, beta %.6g)\n",
                             tag, iterations_, i, drift, s, x[n_ + i]);
        }
        for (std::size_t i = 0; i < m_; ++i) {
            const std::size_t bj = static_cast<std::size_t>(basis_[i]);
            if (beta_[i] < lo_[bj] - 1e-6 || beta_[i] > up_[bj] + 1e-6)
                std::fprintf(stderr, "[lp-debug %s] iter=%d basic %zu out of bounds: %.6g not in [%g, %g]\n",
                             tag, iterations_, bj, beta_[i], lo_[bj], up_[bj]);
        }
    }
#endif

    bool iterate(const std::vector<double>& cost, int max_iter, LpResult& res) {
        const double piv_tol = 1e-10;
        for (; iterations_ < max_iter; ++iterations_) {
#ifdef DISSIPACERT_LP_DEBUG
            if (debug_phase2_) debug_check("iter");
#endif
            // reduced costs d_j = c_j - c_B^T tab[:,j]
            std::vector<double> cb(m_);
            for (std::size_t i = 0; i < m_; ++i) cb[i] = cost[basis_[i]];
            int enter = -1;
            int dir = 0;
            for (std::size_t j = 0; j < ncols_; ++j) {
                if (in_basis_[j] >= 0) continue;
                if (lo_[j] == up_[j]) continue;  // fixed (frozen artificials)
                double d = cost[j];
                for (std::size_t i = 0; i < m_; ++i) {
                    const double t = tabv(i, j);
                    if (t != 0.0) d -= cb[i] * t;
                }
                if (!at_upper_[j] && d < -tol_) {
                    enter = static_cast<int>(j);
                    dir = +1;
                    break;  // Bland: first favorable index
                }
                if (at_upper_[j] && d > tol_) {
                    enter = static_cast<int>(j);
                    dir = -1;
                    break;
                }
            }
            if (enter < 0) {
                res.status = LpStatus::Optimal;
                return true;
            }
            const std::size_t je = static_cast<std::size_t>(enter);

            // ratio test: entering moves by delta >= 0 in direction dir.
            // Entries below ratio_tol never pivot (dividing by a near-zero
            // pivot destroys the tableau); among near-tied ratios the largest
            // pivot wins for stability.
            const double ratio_tol = 1e-7;
            double best = up_[je] - lo_[je];  // bound flip distance (may be inf)
            int leave_row = -1;
            int leave_to_upper = 0;
            double best_piv = 0.0;
            for (std::size_t i = 0; i < m_; ++i) {
                const double t = dir * tabv(i, je);
                if (std::abs(t) <= ratio_tol) continue;
                const std::size_t bj = static_cast<std::size_t>(basis_[i]);
                double limit;
                int to_upper;
                if (t > 0) {  // basic decreases toward its lower bound
                    if (lo_[bj] == -kInf) continue;
                    limit = (beta_[i] - lo_[bj]) / t;
                    to_upper = 0;
                } else {  // basic increases toward its upper bound
                    if (up_[bj] == kInf) continue;
                    limit = (beta_[i] - up_[bj]) / t;
                    to_upper = 1;
                }
                if (limit < 0.0) limit = 0.0;
                if (limit < best - 1e-9 ||
                    (limit < best + 1e-9 && leave_row >= 0 && std::abs(t) > best_piv)) {
                    best = limit;
                    leave_row = static_cast<int>(i);
                    leave_to_upper = to_upper;
                    best_piv = std::abs(t);
                }
            }
            if (!(best < kInf)) {
                res.status = LpStatus::Unbounded;
                res.iterations = iterations_;
                return false;
            }
            const double delta = std::max(best, 0.0);
            // update basic values
            for (std::size_t i = 0; i < m_; ++i) beta_[i] -= dir * tabv(i, je) * delta;
            if (leave_row < 0) {
                at_upper_[je] = static_cast<char>(!at_upper_[je]);  // bound flip
                continue;
            }
            const std::size_t lr = static_cast<std::size_t>(leave_row);
            const std::size_t bj = static_cast<std::size_t>(basis_[lr]);
            // entering becomes basic with value nb_value + dir*delta
            const double enter_val = nb_value(je) + dir * delta;
            const double piv = tabv(lr, je);
            if (std::abs(piv) <= piv_tol) {
                res.status = LpStatus::NumericalError;
                res.iterations = iterations_;
                return false;
            }
            const double inv = 1.0 / piv;
            for (std::size_t j = 0; j < ncols_; ++j) tabv(lr, j) *= inv;
            for (std::size_t i = 0; i < m_; ++i) {
                if (i == lr) continue;
                const double f = tabv(i, je);
                if (f == 0.0) continue;
                for (std::size_t j = 0; j < ncols_; ++j) tabv(i, j) -= f * tabv(lr, j);
            }
            in_basis_[bj] = -1;
            at_upper_[bj] = static_cast<char>(leave_to_upper);
            basis_[lr] = static_cast<int>(je);
            in_basis_[je] = static_cast<int>(lr);
            beta_[lr] = enter_val;
        }
        res.status = LpStatus::IterationLimit;
        res.iterations = iterations_;
        return false;
    }

    void extract(LpResult& res) {
        res.x.assign(n_, 0.0);
        for (std::size_t j = 0; j < n_; ++j)
            res.x[j] = in_basis_[j] >= 0 ? beta_[in_basis_[j]] : nb_value(j);
        for (std::size_t j = 0; j < n_; ++j)
            res.x[j] = std::min(std::max(res.x[j], lp_.lower[j]), lp_.upper[j]);
        res.objective = 0.0;
        for (std::size_t j = 0; j < n_; ++j) res.objective += lp_.objective[j] * res.x[j];
        res.iterations = iterations_;
        res.max_row_violation = 0.0;
        for (std::size_t i = 0; i < m_; ++i) {
            double s = -lp_.rhs[i];
            for (std::size_t j = 0; j < n_; ++j) s += lp_.rows[i][j] * res.x[j];
            res.max_row_violation = std::max(res.max_row_violation, s);
        }
    }
};

}  // namespace detail

/// Solve a boxed LP. Optimality is certified against a brute-force vertex
/// oracle in the test suite; feasibility residual of the returned point is
/// reported in max_row_violation.
inline LpResult solve_lp(const LpStandard& lp, double tol = 1e-9, int max_iter = 0) {
    if (max_iter <= 0)
        max_iter = 200 * static_cast<int>(lp.num_vars() + lp.num_rows() + 10);
    detail::BoundedSimplex s(lp, tol);
    return s.run(max_iter);
}

}  // namespace dissipacert
