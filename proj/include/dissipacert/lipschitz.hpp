#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "dissipacert/data.hpp"
#include "dissipacert/rng.hpp"
#include "dissipacert/scp.hpp"

namespace dissipacert {

struct SlopeConfig {
    std::size_t rho = 500;    // pair draws per block
    std::size_t sigma = 30;   // block count (fit needs >= 3 maxima)
    double alpha = 0.1;       // pair-distance cap
    std::uint64_t seed = 1;
    double fallback_margin = 0.05;

    void validate() const {
        if (rho < 2) throw std::invalid_argument("slope config: rho >= 2");
        if (sigma < 3) throw std::invalid_argument("slope config: sigma >= 3");
        if (!(alpha > 0.0)) throw std::invalid_argument("slope config: alpha > 0");
    }
};

struct WeibullFit {
    double location = 0.0;
    double scale = 0.0;
    double shape = 0.0;
    double log_likelihood = 0.0;
    bool converged = false;
    bool degenerate = false;  // all maxima identical; scale -> 0
};

namespace detail {

/// Negative log-likelihood of the three-parameter reverse Weibull,
/// CDF exp(-((loc - t)/scale)^shape) on t <= loc.
inline double rw_nll(double loc, double log_scale, double log_shape,
                     const std::vector<double>& t) {
    const double sc = std::exp(log_scale);
    const double sh = std::exp(log_shape);
    double nll = 0.0;
    for (const double ti : t) {
        const double d = loc - ti;
        if (d <= 0.0) return 1e100;
        const double z = d / sc;
        nll -= std::log(sh) - std::log(sc) + (sh - 1.0) * std::log(z) - std::pow(z, sh);
    }
    return std::isfinite(nll) ? nll : 1e100;
}

/// Minimal Nelder-Mead for the 3-parameter likelihood surface.
template <typename F>
inline std::pair<std::vector<double>, bool> nelder_mead(F f, std::vector<double> x0,
                                                        const std::vector<double>& step,
                                                        int max_iter = 4000) {
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> sx(n + 1, x0);
    for (std::size_t i = 0; i < n; ++i) sx[i + 1][i] += step[i];
    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i <= n; ++i) fv[i] = f(sx[i]);

    auto order = [&]() {
        std::vector<std::size_t> idx(n + 1);
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        std::vector<std::vector<double>> sx2;
        std::vector<double> fv2;
        for (const std::size_t k : idx) {
            sx2.push_back(sx[k]);
            fv2.push_back(fv[k]);
        }
        sx = std::move(sx2);
        fv = std::move(fv2);
    };

    for (int it = 0; it < max_iter; ++it) {
        order();
        double spread = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            spread = std::max(spread, std::abs(sx[n][i] - sx[0][i]));
        if (std::abs(fv[n] - fv[0]) < 1e-12 * (std::abs(fv[0]) + 1e-30) && spread < 1e-10)
            return {sx[0], true};
        std::vector<double> c(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < n; ++k) c[k] += sx[i][k];
        }
        for (auto& v : c) v /= static_cast<double>(n);
        auto blend = [&](double t) {
            std::vector<double> p(n);
            for (std::size_t k = 0; k < n; ++k) p[k] = c[k] + t * (c[k] - sx[n][k]);
            return p;
        };
        const auto xr = blend(1.0);
        const double fr = f(xr);
        if (fr < fv[0]) {
            const auto xe = blend(2.0);
            const double fe = f(xe);
            if (fe < fr) { sx[n] = xe; fv[n] = fe; }
            else { sx[n] = xr; fv[n] = fr; }
        } else if (fr < fv[n - 1]) {
            sx[n] = xr;
            fv[n] = fr;
        } else {
            const auto xc = blend(-0.5);
            const double fc = f(xc);
            if (fc < fv[n]) { sx[n] = xc; fv[n] = fc; }
            else {
                for (std::size_t i = 1; i <= n; ++i) {
                    for (std::size_t k = 0; k < n; ++k)
                        sx[i][k] = sx[0][k] + 0.5 * (sx[i][k] - sx[0][k]);
                    fv[i] = f(sx[i]);
                }
            }
        }
    }
    order();
    return {sx[0], false};
}

}  // namespace detail

/// Maximum-likelihood reverse-Weibull fit; the location parameter is the
/// Lipschitz estimate. Multi-start Nelder-Mead over (loc, log scale, log shape)
/// with loc constrained above max(maxima); an implausible fit (loc escaping
/// past max + 3*spread, which the likelihood surface produces on
/// near-degenerate block maxima) is treated as non-converged and falls back to
/// max(maxima) * (1 + fallback_margin).
inline WeibullFit fit_reverse_weibull(const std::vector<double>& maxima,
                                      double fallback_margin = 0.05) {
    if (maxima.size() < 3)
        throw std::invalid_argument("fit_reverse_weibull: need at least 3 block maxima");
    WeibullFit fit;
    const double mx = *std::max_element(maxima.begin(), maxima.end());
    const double mn = *std::min_element(maxima.begin(), maxima.end());
    const double spread = mx - mn;
    if (spread == 0.0) {
        fit.location = mx;
        fit.scale = 0.0;
        fit.shape = 0.0;
        fit.converged = true;
        fit.degenerate = true;
        return fit;
    }
    double best_nll = 1e200;
    std::vector<double> best;
    bool best_conv = false;
    for (const double loc_off : {0.05, 0.2, 0.5}) {
        for (const double sh0 : {1.5, 3.0, 6.0}) {
            std::vector<double> x0 = {mx + loc_off * spread, std::log(spread), std::log(sh0)};
            auto [x, conv] = detail::nelder_mead(
                [&](const std::vector<double>& v) {
                    if (v[0] <= mx) return 1e100;  // support constraint loc > max
                    return detail::rw_nll(v[0], v[1], v[2], maxima);
                },
                x0, {0.1 * spread, 0.3, 0.3});
            const double nll = detail::rw_nll(x[0], x[1], x[2], maxima);
            if (nll < best_nll) {
                best_nll = nll;
                best = x;
                best_conv = conv;
            }
        }
    }
    fit.log_likelihood = -best_nll;
    const double loc = best.empty() ? mx : best[0];
    if (best.empty() || !std::isfinite(loc) || loc < mx || loc > mx + 3.0 * spread) {
        fit.location = mx * (1.0 + fallback_margin);
        fit.scale = spread;
        fit.shape = 1.0;
        fit.converged = false;
        return fit;
    }
    fit.location = loc;
    fit.scale = std::exp(best[1]);
    fit.shape = std::exp(best[2]);
    fit.converged = best_conv;
    return fit;
}

namespace detail {

/// Pair sampler: samples sorted along a random projection; candidates for a
/// draw come from a window around the anchor in projected order, then the true
/// joint distance filters. Distances below 1e-12 are rejected as numerically
/// indistinguishable points.
class PairSampler {
public:
    PairSampler(const SampleSet& s, std::uint64_t seed) : set_(s) {
        const std::size_t N = s.count();
        joints_.resize(N);
        for (std::size_t z = 0; z < N; ++z) joints_[z] = s.joint(z);
        Rng rng(Rng::derive(seed, "pair_proj"));
        const Vec dir = rng.unit_vector(s.n + s.p);
        std::vector<std::pair<double, std::size_t>> proj(N);
        for (std::size_t z = 0; z < N; ++z) proj[z] = {dot(joints_[z], dir), z};
        std::sort(proj.begin(), proj.end());
        order_.resize(N);
        pos_.resize(N);
        for (std::size_t k = 0; k < N; ++k) {
            order_[k] = proj[k].second;
            pos_[proj[k].second] = k;
        }
    }

    /// Draws one admissible pair (0 < dist <= alpha); false if the budget runs out.
    bool draw(Rng& rng, double alpha, std::size_t& za, std::size_t& zb, double& dist) const {
        const std::size_t N = joints_.size();
        const std::size_t window = 256;
        for (int attempt = 0; attempt < 400; ++attempt) {
            const std::size_t z = rng.uniform_index(N);
            const std::size_t center = pos_[z];
            const std::size_t lo = center > window ? center - window : 0;
            const std::size_t hi = std::min(N - 1, center + window);
            const std::size_t pick = lo + rng.uniform_index(hi - lo + 1);
            const std::size_t z2 = order_[pick];
            if (z2 == z) continue;
            double s = 0.0;
            const Vec& a = joints_[z];
            const Vec& b = joints_[z2];
            for (std::size_t i = 0; i < a.size(); ++i) {
                const double d = a[i] - b[i];
                s += d * d;
            }
            const double dd = std::sqrt(s);
            if (dd > alpha || dd <= 1e-12) continue;
            za = z;
            zb = z2;
            dist = dd;
            return true;
        }
        return false;
    }

private:
    const SampleSet& set_;
    std::vector<Vec> joints_;
    std::vector<std::size_t> order_;
    std::vector<std::size_t> pos_;
};

}  // namespace detail

/// Block maxima of sampled slopes |h(z) - h(z')| / ||joint(z) - joint(z')||.
/// h is evaluated per sample index; blocks use derived per-block seeds.
inline std::vector<double> slope_blocks(const std::function<double(std::size_t)>& h,
                                        const SampleSet& s, const SlopeConfig& cfg) {
    cfg.validate();
    if (s.count() < 2) throw std::invalid_argument("slope_blocks: need at least 2 samples");
    detail::PairSampler sampler(s, cfg.seed);
    std::vector<double> hv(s.count());
    for (std::size_t z = 0; z < s.count(); ++z) hv[z] = h(z);

    std::vector<double> maxima;
    maxima.reserve(cfg.sigma);
    for (std::size_t b = 0; b < cfg.sigma; ++b) {
        Rng rng(Rng::derive(cfg.seed, "slope_block", b));
        double theta_max = 0.0;
        std::size_t got = 0;
        std::size_t budget = cfg.rho * 50;
        while (got < cfg.rho && budget-- > 0) {
            std::size_t za = 0, zb = 0;
            double dist = 0.0;
            if (!sampler.draw(rng, cfg.alpha, za, zb, dist)) break;
            ++got;
            const double slope = std::abs(hv[za] - hv[zb]) / dist;
            if (slope > theta_max) theta_max = slope;
        }
        if (got < cfg.rho)
            throw std::runtime_error(
                "slope_blocks: could not find enough sample pairs within alpha; "
                "widen alpha or collect more data");
        maxima.push_back(theta_max);
    }
    return maxima;
}

struct LipschitzEstimate {
    double value = 0.0;
    double max_observed_slope = 0.0;
    WeibullFit fit;
    std::vector<double> block_maxima;
};

namespace detail {

inline LipschitzEstimate estimate_from_h(const std::function<double(std::size_t)>& h,
                                         const SampleSet& s, const SlopeConfig& cfg) {
    LipschitzEstimate est;
    est.block_maxima = slope_blocks(h, s, cfg);
    est.max_observed_slope =
        *std::max_element(est.block_maxima.begin(), est.block_maxima.end());
    est.fit = fit_reverse_weibull(est.block_maxima, cfg.fallback_margin);
    // reverse-Weibull support lies below the location, so the estimate can
    // never fall under an observed slope
    est.value = std::max(est.fit.location, est.max_observed_slope);
    return est;
}

}  // namespace detail

/// L1: Lipschitz estimate of h = S(q, x_hat) over the joint (x, w) metric.
inline LipschitzEstimate estimate_L1(const SampleSet& s, const StorageFn& storage,
                                     const SlopeConfig& cfg) {
    return detail::estimate_from_h(
        [&](std::size_t z) { return storage.eval(s.samples[z].x_hat); }, s, cfg);
}

/// L2: Lipschitz estimate of h = S(q, f_hat) - S(q, x_hat).
inline LipschitzEstimate estimate_L2(const SampleSet& s, const StorageFn& storage,
                                     const SlopeConfig& cfg) {
    return detail::estimate_from_h(
        [&](std::size_t z) {
            return storage.eval(s.samples[z].f_hat) - storage.eval(s.samples[z].x_hat);
        },
        s, cfg);
}

/// Pre-solve worst case over a coefficient box: h is linear in q, so the
/// worst slope over |q_j| <= q_max is attained at a box vertex.
inline double estimate_L1_box(const SampleSet& s, const StorageTemplate& tmpl, double q_max,
                              const SlopeConfig& cfg) {
    const std::size_t r = tmpl.size();
    if (r > 16) throw std::invalid_argument("estimate_L1_box: basis too large for vertex sweep");
    double worst = 0.0;
    for (std::size_t mask = 0; mask < (1u << r); ++mask) {
        StorageFn st{tmpl, Vec(r, 0.0)};
        for (std::size_t j = 0; j < r; ++j) st.q[j] = (mask >> j) & 1 ? q_max : -q_max;
        worst = std::max(worst, estimate_L1(s, st, cfg).value);
    }
    return worst;
}

}  // namespace dissipacert
