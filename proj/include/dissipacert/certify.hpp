#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "dissipacert/admm.hpp"
#include "dissipacert/data.hpp"
#include "dissipacert/lipschitz.hpp"
#include "dissipacert/model.hpp"
#include "dissipacert/numlin.hpp"
#include "dissipacert/scp.hpp"

namespace dissipacert {

/// Everything Theorem-2-style margins need for one subsystem.
struct SubsystemEvidence {
    std::size_t subsystem = 0;
    ScpSolution scp;
    CoveringEstimate epsilon;
    double L1 = 0.0;
    double L2 = 0.0;
    LipschitzEstimate L1_detail, L2_detail;

    /// mu* + L1 * eps  (positivity margin, Con1)
    double margin1() const { return scp.mu + L1 * epsilon.epsilon; }
    /// mu* + delta* + L2 * eps  (decrease margin, summed in Con2)
    double margin2() const { return scp.mu + scp.delta + L2 * epsilon.epsilon; }
    /// mu* + max(L1, L2) * eps  (known-topology margin, Con3)
    double margin_known() const { return scp.mu + std::max(L1, L2) * epsilon.epsilon; }
};

enum class Verdict { CertifiedGas, Inconclusive };

inline const char* to_string(Verdict v) {
    return v == Verdict::CertifiedGas ? "certified_GAS" : "inconclusive";
}

struct Certificate {
    Verdict verdict = Verdict::Inconclusive;
    std::vector<StorageFn> lyapunov;
    std::vector<SubsystemEvidence> per_subsystem;
    double sum_margin2 = 0.0;
    double eta_cert = 0.0;
    bool known_topology_path = false;
    double composed_max_eig = 0.0;  // known path only
    bool admm_used = false;
    int admm_iterations = 0;
    std::vector<std::size_t> violating_subsystems;
    std::vector<std::string> refinement_hints;
    std::uint64_t master_seed = 0;

    /// Inconclusive does not mean unstable; Lyapunov conditions are sufficient only.
    static constexpr const char* kInconclusiveNote =
        "inconclusive does not imply the network is unstable";
};

/// Theorem-2 check: every margin1 < -eta_cert and the margin2 sum < -eta_cert.
inline Certificate check_unknown_topology(const std::vector<SubsystemEvidence>& evidence,
                                          double eta_cert = 0.0) {
    Certificate cert;
    cert.eta_cert = eta_cert;
    cert.per_subsystem = evidence;
    bool all_neg = true;
    double sum2 = 0.0;
    for (const auto& ev : evidence) {
        cert.lyapunov.push_back(ev.scp.storage);
        if (!(ev.margin1() < -eta_cert)) {
            all_neg = false;
            cert.violating_subsystems.push_back(ev.subsystem);
        }
        sum2 += ev.margin2();
    }
    cert.sum_margin2 = sum2;
    if (all_neg && sum2 < -eta_cert) {
        cert.verdict = Verdict::CertifiedGas;
    } else {
        cert.verdict = Verdict::Inconclusive;
        cert.refinement_hints.push_back("collect additional data per subsystem to shrink epsilon");
        cert.refinement_hints.push_back("enrich the homogeneous basis of the storage template");
    }
    return cert;
}

/// Theorem-3 + compositionality check: per-subsystem mu* + max(L1,L2)*eps < 0
/// and the composed form of the supply rates NSD under the known topology.
inline Certificate check_known_topology(const std::vector<SubsystemEvidence>& evidence,
                                        const BlockStacks& stacks, double psd_tol,
                                        double eta_cert = 0.0) {
    Certificate cert;
    cert.eta_cert = eta_cert;
    cert.known_topology_path = true;
    cert.per_subsystem = evidence;
    bool all_neg = true;
    for (const auto& ev : evidence) {
        cert.lyapunov.push_back(ev.scp.storage);
        if (!(ev.margin_known() < -eta_cert)) {
            all_neg = false;
            cert.violating_subsystems.push_back(ev.subsystem);
        }
    }
    std::vector<SymMat> xs;
    for (const auto& ev : evidence) xs.push_back(ev.scp.supply.assemble());
    cert.composed_max_eig = composed_max_eig(stacks, xs);
    const bool nsd = cert.composed_max_eig <= psd_tol;
    cert.verdict = (all_neg && nsd) ? Verdict::CertifiedGas : Verdict::Inconclusive;
    if (cert.verdict == Verdict::Inconclusive) {
        if (!nsd) cert.refinement_hints.push_back("composed supply rate not NSD; run the ADMM loop");
        if (!all_neg) cert.refinement_hints.push_back("collect additional data per subsystem");
    }
    return cert;
}

// ---------------------------------------------------------------------------
// Model-based LMI pieces (two-subsystem case study)
// ---------------------------------------------------------------------------

struct LmiBlocks {
    SymMat left;            // [A'PA, A'PB; B'PA, B'PB] in (x, w) coordinates
    SymMat right_template;  // [P + X22, X21; X12, X11]
};

/// Left/right sides of the per-subsystem dissipativity LMI.
inline LmiBlocks derive_lmi_blocks(const Mat& a, const Mat& b, const SymMat& p,
                                   const SupplyRate& x) {
    const std::size_t n = a.rows, m = b.cols;
    if (a.cols != n || b.rows != n || p.dim != n || x.n() != n || x.p() != m)
        throw std::invalid_argument("derive_lmi_blocks: dimension mismatch");
    LmiBlocks out;
    out.left = SymMat(n + m);
    const Mat pa = matmul(p.as_mat(), a);
    const Mat pb = matmul(p.as_mat(), b);
    const Mat apa = matmul(a.transposed(), pa);
    const Mat apb = matmul(a.transposed(), pb);
    const Mat bpb = matmul(b.transposed(), pb);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) out.left.set(i, j, 0.5 * (apa(i, j) + apa(j, i)));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) out.left.set(i, n + j, apb(i, j));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i; j < m; ++j) out.left.set(n + i, n + j, 0.5 * (bpb(i, j) + bpb(j, i)));

    out.right_template = SymMat(n + m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j)
            out.right_template.set(i, j, p(i, j) + x.x22(i, j));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) out.right_template.set(i, n + j, x.x12(j, i));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i; j < m; ++j) out.right_template.set(n + i, n + j, x.x11(i, j));
    return out;
}

struct LmiCheck {
    bool holds = false;
    double min_gap_eig = 0.0;  // min eigenvalue of right - left
};

inline LmiCheck check_lmi(const Mat& a, const Mat& b, const SymMat& p, const SupplyRate& x,
                          double tol) {
    const LmiBlocks blocks = derive_lmi_blocks(a, b, p, x);
    SymMat gap(blocks.left.dim);
    for (std::size_t i = 0; i < gap.data.size(); ++i)
        gap.data[i] = blocks.right_template.data[i] - blocks.left.data[i];
    LmiCheck c;
    c.min_gap_eig = min_eigval(gap);
    c.holds = c.min_gap_eig >= -tol;
    return c;
}

// ---------------------------------------------------------------------------
// Reference matrices of the two-subsystem case study (printed values)
// ---------------------------------------------------------------------------

namespace reference {

inline SymMat sym2(double a, double b, double d) {
    SymMat m(2);
    m.set(0, 0, a);
    m.set(0, 1, b);
    m.set(1, 1, d);
    return m;
}

inline const SymMat kP1 = sym2(1.7779, -0.0290, 1.9546);
inline const SymMat kP2 = sym2(1.1742, -1.4717, 5.8613);

inline SupplyRate supply1() {
    SupplyRate s;
    s.x11 = sym2(0.3372, -0.1620, 0.5128);
    s.x12 = builtin::mat2(-0.0250, -0.0486, -0.0486, 0.0923);
    s.x22 = sym2(-1.0748, 0.0579, -1.1826);
    return s;
}

inline SupplyRate supply2() {
    SupplyRate s;
    s.x11 = sym2(0.5509, -0.0283, 0.6199);
    s.x12 = builtin::mat2(-0.0147, -0.0256, -0.0256, 0.1947);
    s.x22 = sym2(-0.6036, 0.3231, -0.9405);
    return s;
}

/// Printed 4x4 composed matrix with entry (1,1) = -0.5238.
inline SymMat composed_4x4() {
    SymMat m(4);
    const double vals[4][4] = {{-0.5238, 0.0297, 0.0103, 0.0230},
                               {0.0297, -0.5627, 0.0230, 0.1024},
                               {0.0103, 0.0230, -0.2664, 0.1611},
                               {0.0230, 0.1024, 0.1611, -0.4277}};
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = i; j < 4; ++j) m.set(i, j, vals[i][j]);
    return m;
}

}  // namespace reference

// ---------------------------------------------------------------------------
// Empirical Lyapunov-decrease audit
// ---------------------------------------------------------------------------

struct AuditReport {
    std::size_t rollouts = 0;
    std::size_t steps_checked = 0;
    std::size_t decreasing_steps = 0;
    double worst_increase = 0.0;  // max of V(x+) - V(x) over checked steps
    bool degenerate = false;      // V identically ~0 along the audit
    bool diverged = false;

    double fraction_decreasing() const {
        return steps_checked ? static_cast<double>(decreasing_steps) /
                                   static_cast<double>(steps_checked)
                             : 0.0;
    }
};

/// Simulates rollouts from random unit-sphere initial states and counts the
/// steps where the summed storage strictly decreases (while ||x|| stays above
/// the cutoff). Cross-validation only; the certificate verdict never reads it.
inline AuditReport lyapunov_decrease_audit(const NetworkSpec& net,
                                           const std::vector<StorageFn>& lyapunov,
                                           std::size_t rollouts, int steps,
                                           std::uint64_t seed, double norm_cutoff = 1e-8) {
    if (lyapunov.size() != net.size())
        throw std::invalid_argument("audit: one storage function per subsystem required");
    AuditReport rep;
    rep.rollouts = rollouts;
    Rng rng(Rng::derive(seed, "audit"));
    const std::size_t n = net.total_state_dim();
    auto v_of = [&](const Vec& x) {
        double v = 0.0;
        std::size_t off = 0;
        for (std::size_t i = 0; i < net.size(); ++i) {
            const Vec xi(x.begin() + off, x.begin() + off + net.subsystems[i].state_dim);
            v += lyapunov[i].eval(xi);
            off += net.subsystems[i].state_dim;
        }
        return v;
    };
    double vmax = 0.0;
    for (std::size_t r = 0; r < rollouts; ++r) {
        Vec x = rng.unit_vector(n);
        double v = v_of(x);
        vmax = std::max(vmax, std::abs(v));
        for (int k = 0; k < steps; ++k) {
            if (norm2(x) <= norm_cutoff) break;
            Vec xn;
            try {
                xn = net.step(x);
            } catch (const std::exception&) {
                rep.diverged = true;
                break;
            }
            if (norm2(xn) > 1e12) {
                rep.diverged = true;
                break;
            }
            const double vn = v_of(xn);
            ++rep.steps_checked;
            if (vn < v) ++rep.decreasing_steps;
            rep.worst_increase = std::max(rep.worst_increase, vn - v);
            x = std::move(xn);
            v = vn;
        }
    }
    rep.degenerate = vmax <= 1e-12;
    return rep;
}

// ---------------------------------------------------------------------------
// Sample-complexity table (compositional vs monolithic growth)
// ---------------------------------------------------------------------------

struct ScalingRow {
    std::size_t subsystems = 0;
    double compositional = 0.0;  // exactly M * N
    double monolithic = 0.0;     // pi * (1/eps)^(sum(n_i + p_i) - 1)
};

/// Linear-vs-exponential data requirement series. The monolithic column is
/// the covering count implied by a fixed covering radius eps on the joint
/// sphere, with the circle-calibrated constant pi (a circle needs ~pi/eps
/// points for covering radius eps).
inline std::vector<ScalingRow> sample_complexity_table(const std::vector<std::size_t>& m_list,
                                                       std::size_t per_subsystem_n,
                                                       double eps = 0.1,
                                                       std::size_t n_i = 1,
                                                       std::size_t p_i = 1) {
    std::vector<ScalingRow> rows;
    for (const std::size_t m : m_list) {
        ScalingRow r;
        r.subsystems = m;
        r.compositional = static_cast<double>(m) * static_cast<double>(per_subsystem_n);
        const double joint_dim = static_cast<double>(m) * static_cast<double>(n_i + p_i);
        r.monolithic = 3.14159265358979323846 * std::pow(1.0 / eps, joint_dim - 1.0);
        rows.push_back(r);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// End-to-end pipelines
// ---------------------------------------------------------------------------

struct PipelineConfig {
    std::size_t samples_per_subsystem = 5000;
    SamplingOptions sampling;
    bool shared_rollouts = true;
    bool diagonal_basis = false;
    SupplyStructure supply_structure = SupplyStructure::Full;
    double q_max = 10.0;
    double x_max = 10.0;
    double eta = 1e-9;
    SlopeConfig slope;
    CoveringMethod covering_method = CoveringMethod::SampleLeaveOneOut;
    std::size_t covering_probes = 20000;
    double lp_tol = 1e-9;
    double psd_tol = 1e-8;
    double eta_cert = 0.0;
    AdmmConfig admm;
    std::uint64_t master_seed = 1;
    unsigned parallelism = 1;
};

namespace detail {

template <typename Fn>
inline void parallel_for(std::size_t count, unsigned width, Fn fn) {
    if (width <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(width);
    const unsigned w = std::min<unsigned>(width, static_cast<unsigned>(count));
    for (unsigned t = 0; t < w; ++t) {
        pool.emplace_back([&, t]() {
            try {
                for (std::size_t i = t; i < count; i += w) fn(i);
            } catch (...) {
                errs[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

inline SubsystemEvidence gather_evidence(const SampleSet& samples, const PipelineConfig& cfg,
                                         ScpVariant variant, std::size_t i) {
    SubsystemEvidence ev;
    ev.subsystem = i;
    ScpProblem prob;
    prob.samples = &samples;
    prob.tmpl = cfg.diagonal_basis ? StorageTemplate::diagonal(samples.n)
                                   : StorageTemplate::full_quadratic(samples.n);
    prob.variant = variant;
    prob.supply_structure = cfg.supply_structure;
    prob.q_max = cfg.q_max;
    prob.x_max = cfg.x_max;
    prob.eta = cfg.eta;
    ev.scp = variant == ScpVariant::Relaxed ? solve_scp_relaxed_min_supply(prob, cfg.lp_tol)
                                            : solve_scp(prob, cfg.lp_tol);
    ev.epsilon = covering_radius(samples, cfg.covering_probes,
                                 Rng::derive(cfg.master_seed, "covering", i),
                                 cfg.covering_method);
    SlopeConfig sc = cfg.slope;
    sc.seed = Rng::derive(cfg.master_seed, "lipschitz", i);
    ev.L1_detail = estimate_L1(samples, ev.scp.storage, sc);
    sc.seed = Rng::derive(cfg.master_seed, "lipschitz", i, 1);
    ev.L2_detail = estimate_L2(samples, ev.scp.storage, sc);
    ev.L1 = ev.L1_detail.value;
    ev.L2 = ev.L2_detail.value;
    return ev;
}

}  // namespace detail

/// Collect data for all subsystems under the pipeline's sampling settings.
inline std::vector<SampleSet> collect_samples(const NetworkSpec& net,
                                              const PipelineConfig& cfg,
                                              InputConvention w_mode) {
    SamplingOptions opt = cfg.sampling;
    opt.w_mode = w_mode;
    std::vector<Trajectory> raw;
    if (cfg.shared_rollouts) {
        raw = sample_all(net, cfg.samples_per_subsystem, cfg.master_seed, opt);
    } else {
        for (std::size_t i = 0; i < net.size(); ++i)
            raw.push_back(sample_pairs(net, i, cfg.samples_per_subsystem,
                                       Rng::derive(cfg.master_seed, "subsystem", i), opt));
    }
    std::vector<SampleSet> sets(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        sets[i] = normalize(raw[i]);
        sets[i].seed = cfg.master_seed;
        sets[i].source = net.name;
    }
    return sets;
}

/// Algorithm-2 path: normalize, covering, Lipschitz, full SCP, Theorem-2 check.
inline Certificate certify_unknown_topology(const NetworkSpec& net, const PipelineConfig& cfg) {
    const std::vector<SampleSet> sets = collect_samples(net, cfg, InputConvention::Concatenation);
    std::vector<SubsystemEvidence> evidence(net.size());
    detail::parallel_for(net.size(), cfg.parallelism, [&](std::size_t i) {
        evidence[i] = detail::gather_evidence(sets[i], cfg, ScpVariant::Full, i);
    });
    Certificate cert = check_unknown_topology(evidence, cfg.eta_cert);
    cert.master_seed = cfg.master_seed;
    return cert;
}

/// Known-topology path: relaxed SCP, Theorem-3 margins, composed NSD check,
/// ADMM fallback, and a frozen-supply re-solve when ADMM moved the X_i.
inline Certificate certify_known_topology(const NetworkSpec& net, const PipelineConfig& cfg) {
    if (!net.topology_known)
        throw std::invalid_argument("certify_known_topology: topology required");
    const std::vector<SampleSet> sets = collect_samples(net, cfg, InputConvention::PerTopology);
    std::vector<SubsystemEvidence> evidence(net.size());
    detail::parallel_for(net.size(), cfg.parallelism, [&](std::size_t i) {
        evidence[i] = detail::gather_evidence(sets[i], cfg, ScpVariant::Relaxed, i);
    });
    const BlockStacks stacks = BlockStacks::from_network(net);
    Certificate cert = check_known_topology(evidence, stacks, cfg.psd_tol, cfg.eta_cert);
    cert.master_seed = cfg.master_seed;
    if (cert.verdict == Verdict::CertifiedGas || !cert.violating_subsystems.empty())
        return cert;  // margins failed: more data is the only fix, ADMM cannot help

    // compositionality failed: project the supply rates into the feasible set,
    // then re-solve each subsystem with its supply frozen so the scenario
    // constraints hold at the projected X_i
    std::vector<SymMat> x0;
    for (const auto& ev : evidence) x0.push_back(ev.scp.supply.assemble());
    const AdmmResult admm = run_admm(stacks, x0, cfg.admm);
    if (!admm.converged) {
        cert.refinement_hints.push_back("ADMM did not reach the feasible set; max eig " +
                                        std::to_string(admm.final_max_eig));
        return cert;
    }
    detail::parallel_for(net.size(), cfg.parallelism, [&](std::size_t i) {
        SubsystemEvidence& ev = evidence[i];
        const std::size_t p = sets[i].p, n = sets[i].n;
        SupplyRate frozen;
        frozen.x11 = SymMat(p);
        frozen.x12 = Mat(p, n);
        frozen.x22 = SymMat(n);
        const SymMat& full = admm.x[i];
        for (std::size_t a = 0; a < p; ++a)
            for (std::size_t b = a; b < p; ++b) frozen.x11.set(a, b, full(a, b));
        for (std::size_t a = 0; a < p; ++a)
            for (std::size_t b = 0; b < n; ++b) frozen.x12(a, b) = full(a, p + b);
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a; b < n; ++b) frozen.x22.set(a, b, full(p + a, p + b));

        // re-solve only (q, mu) with the supply fixed: mu* is the best value of
        // max_z of the two scenario left-hand sides, still a small LP
        const StorageTemplate tmpl = cfg.diagonal_basis
                                         ? StorageTemplate::diagonal(n)
                                         : StorageTemplate::full_quadratic(n);
        const std::size_t r = tmpl.size();
        LpStandard lp;
        lp.objective.assign(r + 1, 0.0);
        lp.objective[r] = 1.0;
        lp.lower.assign(r + 1, -cfg.q_max);
        lp.upper.assign(r + 1, cfg.q_max);
        double big = 10.0;
        for (std::size_t z = 0; z < sets[i].count(); ++z) {
            const Sample& smp = sets[i].samples[z];
            const Vec bx = tmpl.basis_at(smp.x_hat);
            const Vec bf = tmpl.basis_at(smp.f_hat);
            const double qf = frozen.quad(smp.w_hat, smp.x_hat);
            std::vector<double> ra(r + 1, 0.0), rb(r + 1, 0.0);
            for (std::size_t a = 0; a < r; ++a) {
                ra[a] = -bx[a];
                rb[a] = bf[a] - bx[a];
                big = std::max(big, 4.0 * cfg.q_max * (std::abs(bx[a]) + std::abs(bf[a])) +
                                        4.0 * std::abs(qf) + 10.0);
            }
            ra[r] = -1.0;
            rb[r] = -1.0;
            lp.rows.push_back(std::move(ra));
            lp.rhs.push_back(-cfg.eta);
            lp.rows.push_back(std::move(rb));
            lp.rhs.push_back(qf);
        }
        lp.lower[r] = -big;
        lp.upper[r] = big;
        const LpResult lr = solve_lp(lp, cfg.lp_tol);
        if (lr.status != LpStatus::Optimal)
            throw std::runtime_error("frozen-supply re-solve failed");
        ev.scp.storage = StorageFn{tmpl, Vec(lr.x.begin(), lr.x.begin() + r)};
        ev.scp.supply = frozen;
        ev.scp.mu = lr.x[r];
        ev.scp.delta = 0.0;
        ev.scp.objective = lr.objective;
        SlopeConfig sc = cfg.slope;
        sc.seed = Rng::derive(cfg.master_seed, "lipschitz_resolve", i);
        ev.L1_detail = estimate_L1(sets[i], ev.scp.storage, sc);
        sc.seed = Rng::derive(cfg.master_seed, "lipschitz_resolve", i, 1);
        ev.L2_detail = estimate_L2(sets[i], ev.scp.storage, sc);
        ev.L1 = ev.L1_detail.value;
        ev.L2 = ev.L2_detail.value;
    });
    cert = check_known_topology(evidence, stacks, cfg.psd_tol, cfg.eta_cert);
    cert.master_seed = cfg.master_seed;
    cert.admm_used = true;
    cert.admm_iterations = admm.iterations;
    return cert;
}

}  // namespace dissipacert
