// Command-line front end: simulate, certify, certify-known, check-lmi,
// lipschitz, scaling, verify-report.
// Exit codes: 0 certified / success, 1 inconclusive, 2 error.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "dissipacert/certify.hpp"
#include "dissipacert/config.hpp"
#include "dissipacert/report.hpp"

using namespace dissipacert;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInconclusive = 1;
constexpr int kExitError = 2;

struct CommonArgs {
    std::string config_path;
    std::string system;
    std::size_t subsystems = 0;
    std::size_t samples = 0;
    std::uint64_t seed = 0;
    bool have_seed = false;
    double phi = -1.0, theta = -1.0, gamma = -1.0;
    int burn_in_min = -1, burn_in_max = -1;
    std::string init;
    std::string covering;
    bool diagonal_basis = false;
    std::string supply_structure;
    unsigned parallelism = 0;
    std::string report_path;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--config", a.config_path,
                    "JSON config file (default from DISSIPACERT_CONFIG); flags override");
    cmd->add_option("--system", a.system, "two_subsystem | room_network | nonlinear_ring");
    cmd->add_option("--subsystems,--rooms", a.subsystems, "M for parametric systems");
    cmd->add_option("--samples", a.samples, "data pairs per subsystem");
    cmd->add_option("--seed", a.seed, "master seed")->each([&](const std::string&) {
        a.have_seed = true;
    });
    cmd->add_option("--phi", a.phi, "room thermal factor between rooms");
    cmd->add_option("--theta", a.theta, "room thermal factor to the environment");
    cmd->add_option("--gamma", a.gamma, "nonlinear ring parameter");
    cmd->add_option("--burn-in-min", a.burn_in_min, "trajectory burn-in window lower end");
    cmd->add_option("--burn-in-max", a.burn_in_max, "trajectory burn-in window upper end");
    cmd->add_option("--init", a.init, "initial-state law: sphere | positive_sphere");
    cmd->add_option("--covering", a.covering, "epsilon estimator: sample_loo | sphere_lowdisc");
    cmd->add_flag("--diagonal-basis", a.diagonal_basis, "restrict storage to diagonal monomials");
    cmd->add_option("--supply-structure", a.supply_structure, "full | diag_x11");
    cmd->add_option("--parallelism", a.parallelism, "worker pool width");
    cmd->add_option("--report", a.report_path, "report output path");
}

RunConfig resolve_config(const CommonArgs& a) {
    RunConfig cfg;
    std::string path = a.config_path;
    if (path.empty()) {
        if (const char* env = std::getenv("DISSIPACERT_CONFIG")) path = env;
    }
    if (!path.empty()) cfg = load_config(path);
    if (!a.system.empty()) cfg.system.kind = a.system;
    if (a.subsystems) cfg.system.subsystems = a.subsystems;
    if (a.phi > 0) cfg.system.phi = a.phi;
    if (a.theta > 0) cfg.system.theta = a.theta;
    if (a.gamma > 0) cfg.system.gamma = a.gamma;
    if (a.samples) cfg.pipeline.samples_per_subsystem = a.samples;
    if (a.have_seed) cfg.pipeline.master_seed = a.seed;
    if (a.burn_in_min >= 0) cfg.pipeline.sampling.burn_in_min = a.burn_in_min;
    if (a.burn_in_max >= 0) cfg.pipeline.sampling.burn_in_max = a.burn_in_max;
    if (!a.init.empty())
        cfg.pipeline.sampling.init = a.init == "positive_sphere" ? InitDistribution::PositiveSphere
                                                                 : InitDistribution::Sphere;
    if (!a.covering.empty())
        cfg.pipeline.covering_method = a.covering == "sphere_lowdisc"
                                           ? CoveringMethod::SphereLowDiscrepancy
                                           : CoveringMethod::SampleLeaveOneOut;
    if (a.diagonal_basis) cfg.pipeline.diagonal_basis = true;
    if (!a.supply_structure.empty())
        cfg.pipeline.supply_structure = a.supply_structure == "diag_x11"
                                            ? SupplyStructure::DiagonalX11
                                            : SupplyStructure::Full;
    if (a.parallelism) cfg.pipeline.parallelism = a.parallelism;
    if (!a.report_path.empty()) cfg.report_path = a.report_path;
    return cfg;
}

void print_summary(const Certificate& cert) {
    std::cout << "verdict: " << to_string(cert.verdict) << '\n';
    for (const auto& ev : cert.per_subsystem) {
        std::printf(
            "  subsystem %zu: mu*=%.6g delta*=%.6g eps=%.6g L1=%.6g L2=%.6g "
            "margin1=%.6g margin2=%.6g\n",
            ev.subsystem, ev.scp.mu, ev.scp.delta, ev.epsilon.epsilon, ev.L1, ev.L2,
            ev.margin1(), ev.margin2());
    }
    std::printf("  sum margin2 = %.6g\n", cert.sum_margin2);
    if (cert.known_topology_path) {
        std::printf("  composed max eig = %.6g%s\n", cert.composed_max_eig,
                    cert.admm_used ? " (after ADMM)" : "");
    }
    if (cert.verdict != Verdict::CertifiedGas) {
        std::cout << "  note: " << Certificate::kInconclusiveNote << '\n';
        for (const auto& h : cert.refinement_hints) std::cout << "  hint: " << h << '\n';
    }
}

int write_certificate(const Certificate& cert, const RunConfig& cfg, double seconds) {
    const Json j = report_json(cert, cfg, seconds, now_timestamp());
    std::filesystem::path p = std::filesystem::path(cfg.out_dir) / cfg.report_path;
    write_report(j, p.string());
    std::cout << "report written to " << p.string() << '\n';
    return cert.verdict == Verdict::CertifiedGas ? kExitOk : kExitInconclusive;
}

int cmd_simulate(const CommonArgs& a, const std::string& out_dir, bool raw) {
    RunConfig cfg = resolve_config(a);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    std::filesystem::create_directories(cfg.out_dir);
    NetworkSpec net = build_network(cfg.system);
    SamplingOptions opt = cfg.pipeline.sampling;
    opt.w_mode = InputConvention::Concatenation;
    const auto raw_sets =
        sample_all(net, cfg.pipeline.samples_per_subsystem, cfg.pipeline.master_seed, opt);
    for (std::size_t i = 0; i < raw_sets.size(); ++i) {
        SampleSet s;
        if (raw) {
            s.subsystem = i;
            s.n = raw_sets[i].state_dim;
            s.p = raw_sets[i].input_dim;
            for (std::size_t z = 0; z < raw_sets[i].count(); ++z)
                s.samples.push_back(
                    {raw_sets[i].x[z], raw_sets[i].w[z], raw_sets[i].fx[z]});
        } else {
            s = normalize(raw_sets[i]);
        }
        const auto path = std::filesystem::path(cfg.out_dir) /
                          ("samples_" + std::to_string(i) + ".csv");
        write_samples(s, path.string());
    }
    std::cout << "wrote " << raw_sets.size() << " sample files ("
              << cfg.pipeline.samples_per_subsystem << " rows each) to " << cfg.out_dir << '\n';
    return kExitOk;
}

int cmd_certify(const CommonArgs& a, bool known, bool audit, std::size_t audit_rollouts,
                int auto_refine) {
    RunConfig cfg = resolve_config(a);
    NetworkSpec net = build_network(cfg.system);
    const auto t0 = std::chrono::steady_clock::now();
    Certificate cert;
    for (int round = 0;; ++round) {
        cert = known ? certify_known_topology(net, cfg.pipeline)
                     : certify_unknown_topology(net, cfg.pipeline);
        if (cert.verdict == Verdict::CertifiedGas || round >= auto_refine) break;
        cfg.pipeline.samples_per_subsystem *= 2;  // refinement: double the data
        std::cout << "inconclusive; refining with N = " << cfg.pipeline.samples_per_subsystem
                  << '\n';
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    print_summary(cert);
    if (audit) {
        const AuditReport rep =
            lyapunov_decrease_audit(net, cert.lyapunov, audit_rollouts, 200,
                                    cfg.pipeline.master_seed + 1);
        std::printf("  audit: %.2f%% decreasing steps, worst increase %.3g%s\n",
                    100.0 * rep.fraction_decreasing(), rep.worst_increase,
                    rep.degenerate ? " (degenerate V)" : "");
    }
    return write_certificate(cert, cfg, secs);
}

int cmd_check_lmi(const std::string& matrices_path, bool use_builtin, double tol) {
    Mat a1, b1, a2, b2;
    SymMat p1, p2;
    SupplyRate x1, x2;
    if (use_builtin) {
        a1 = builtin::kA1;
        b1 = builtin::kB1;
        a2 = builtin::kA2;
        b2 = builtin::kB2;
        p1 = reference::kP1;
        p2 = reference::kP2;
        x1 = reference::supply1();
        x2 = reference::supply2();
    } else {
        const Json j = load_report(matrices_path);  // plain JSON matrices file
        auto sup = [&](const Json& js) {
            SupplyRate s;
            s.x11 = detail::sym_from_json(js.at("x11"));
            s.x12 = detail::mat_from_json(js.at("x12"));
            s.x22 = detail::sym_from_json(js.at("x22"));
            return s;
        };
        a1 = detail::mat_from_json(j.at("A1"));
        b1 = detail::mat_from_json(j.at("B1"));
        a2 = detail::mat_from_json(j.at("A2"));
        b2 = detail::mat_from_json(j.at("B2"));
        const Mat p1m = detail::mat_from_json(j.at("P1"));
        const Mat p2m = detail::mat_from_json(j.at("P2"));
        for (std::size_t i = 0; i < p1m.rows; ++i)
            for (std::size_t c = 0; c < p1m.cols; ++c)
                if (std::abs(p1m(i, c) - p1m(c, i)) > 1e-12)
                    throw std::invalid_argument("P1 is not symmetric");
        for (std::size_t i = 0; i < p2m.rows; ++i)
            for (std::size_t c = 0; c < p2m.cols; ++c)
                if (std::abs(p2m(i, c) - p2m(c, i)) > 1e-12)
                    throw std::invalid_argument("P2 is not symmetric");
        p1 = SymMat::from_general(p1m);
        p2 = SymMat::from_general(p2m);
        x1 = sup(j.at("X1"));
        x2 = sup(j.at("X2"));
    }
    const LmiCheck c1 = check_lmi(a1, b1, p1, x1, tol);
    const LmiCheck c2 = check_lmi(a2, b2, p2, x2, tol);
    std::printf("subsystem 1 LMI %s (min gap eig %.6g)\n", c1.holds ? "holds" : "fails",
                c1.min_gap_eig);
    std::printf("subsystem 2 LMI %s (min gap eig %.6g)\n", c2.holds ? "holds" : "fails",
                c2.min_gap_eig);
    const NetworkSpec net = two_subsystem();
    const BlockStacks bs = BlockStacks::from_network(net);
    const SymMat composed = bs.compose({x1.assemble(), x2.assemble()});
    const double maxeig = max_eigval(composed);
    std::printf("composed compositionality matrix: max eig %.6g -> %s\n", maxeig,
                maxeig <= tol ? "NSD, LMI holds" : "not NSD");
    return (c1.holds && c2.holds && maxeig <= tol) ? kExitOk : kExitInconclusive;
}

int cmd_lipschitz(const CommonArgs& a, std::size_t subsystem) {
    RunConfig cfg = resolve_config(a);
    NetworkSpec net = build_network(cfg.system);
    SamplingOptions opt = cfg.pipeline.sampling;
    opt.w_mode = InputConvention::Concatenation;
    const Trajectory t = sample_pairs(net, subsystem, cfg.pipeline.samples_per_subsystem,
                                      cfg.pipeline.master_seed, opt);
    const SampleSet s = normalize(t);
    ScpProblem prob;
    prob.samples = &s;
    prob.tmpl = cfg.pipeline.diagonal_basis ? StorageTemplate::diagonal(s.n)
                                            : StorageTemplate::full_quadratic(s.n);
    prob.q_max = cfg.pipeline.q_max;
    prob.x_max = cfg.pipeline.x_max;
    const ScpSolution sol = solve_scp(prob);
    SlopeConfig sc = cfg.pipeline.slope;
    sc.seed = cfg.pipeline.master_seed;
    const LipschitzEstimate l1 = estimate_L1(s, sol.storage, sc);
    sc.seed = cfg.pipeline.master_seed + 1;
    const LipschitzEstimate l2 = estimate_L2(s, sol.storage, sc);
    std::printf("subsystem %zu: L1 = %.6g (max slope %.6g, fit %s), L2 = %.6g (max slope %.6g, fit %s)\n",
                subsystem, l1.value, l1.max_observed_slope,
                l1.fit.converged ? "converged" : "fallback", l2.value, l2.max_observed_slope,
                l2.fit.converged ? "converged" : "fallback");
    return kExitOk;
}

int cmd_scaling(const std::string& m_list_str, std::size_t n, double eps,
                const std::string& out) {
    std::vector<std::size_t> ms;
    std::size_t pos = 0;
    while (pos < m_list_str.size()) {
        const std::size_t comma = m_list_str.find(',', pos);
        ms.push_back(std::stoul(m_list_str.substr(pos, comma - pos)));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    const auto rows = sample_complexity_table(ms, n, eps);
    std::string csv = "subsystems,compositional,monolithic\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", r.subsystems, r.compositional,
                      r.monolithic);
        csv += buf;
    }
    if (out.empty()) {
        std::cout << csv;
    } else {
        std::ofstream f(out);
        f << csv;
        std::cout << "wrote " << out << '\n';
    }
    return kExitOk;
}

int cmd_verify_report(const std::string& path) {
    const Json j = load_report(path);
    const ReportVerification v = verify_report(j);
    if (v.ok) {
        std::cout << "report verifies: every margin and the verdict recompute from stored inputs\n";
        return kExitOk;
    }
    for (const auto& m : v.mismatches) std::cout << "mismatch: " << m << '\n';
    return kExitInconclusive;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dissipacert: data-driven GAS certificates for homogeneous networks"};
    app.require_subcommand(1);

    CommonArgs sim_args, cert_args, known_args, lip_args;
    std::string sim_out;
    bool sim_raw = false;
    auto* sim = app.add_subcommand("simulate", "collect data pairs and write sample files");
    add_common(sim, sim_args);
    sim->add_option("--out", sim_out, "output directory");
    sim->add_flag("--raw", sim_raw, "write raw (unnormalized) triples");

    bool do_audit = false;
    std::size_t audit_rollouts = 100;
    int auto_refine = 0;
    auto* cert = app.add_subcommand("certify", "unknown-topology GAS certification");
    add_common(cert, cert_args);
    cert->add_flag("--audit", do_audit, "run the Lyapunov-decrease audit after certification");
    cert->add_option("--audit-rollouts", audit_rollouts, "rollouts for the audit");
    cert->add_option("--auto-refine", auto_refine, "re-run up to k rounds doubling the data");

    bool known_audit = false;
    auto* known = app.add_subcommand("certify-known", "known-topology path with ADMM fallback");
    add_common(known, known_args);
    known->add_flag("--audit", known_audit, "run the Lyapunov-decrease audit");

    std::string lmi_file;
    bool lmi_builtin = false;
    double lmi_tol = 1e-6;
    auto* lmi = app.add_subcommand("check-lmi", "verify the dissipativity LMI and Eq.-5 matrix");
    lmi->add_option("--matrices", lmi_file, "JSON file with A1,B1,A2,B2,P1,P2,X1{...},X2{...}");
    lmi->add_flag("--builtin", lmi_builtin, "use the built-in two-subsystem printed matrices");
    lmi->add_option("--tol", lmi_tol, "NSD tolerance");

    std::size_t lip_sub = 0;
    auto* lip = app.add_subcommand("lipschitz", "standalone Lipschitz estimation for one subsystem");
    add_common(lip, lip_args);
    lip->add_option("--subsystem", lip_sub, "subsystem index");

    std::string scale_ms = "1,2,4,8,16,32,64,100";
    std::size_t scale_n = 1000;
    double scale_eps = 0.1;
    std::string scale_out;
    auto* scale = app.add_subcommand("scaling", "emit the sample-complexity table as CSV");
    scale->add_option("--m-list", scale_ms, "comma-separated subsystem counts");
    scale->add_option("--samples", scale_n, "per-subsystem data count");
    scale->add_option("--eps", scale_eps, "covering radius for the monolithic column");
    scale->add_option("--out", scale_out, "CSV output path (stdout if omitted)");

    std::string verify_path;
    auto* ver = app.add_subcommand("verify-report", "recompute margins and verdict from a report");
    ver->add_option("report", verify_path, "report JSON path")->required();

    try {
        app.parse(argc, argv);
        if (sim->parsed()) return cmd_simulate(sim_args, sim_out, sim_raw);
        if (cert->parsed()) return cmd_certify(cert_args, false, do_audit, audit_rollouts, auto_refine);
        if (known->parsed()) return cmd_certify(known_args, true, known_audit, audit_rollouts, 0);
        if (lmi->parsed()) return cmd_check_lmi(lmi_file, lmi_builtin || lmi_file.empty(), lmi_tol);
        if (lip->parsed()) return cmd_lipschitz(lip_args, lip_sub);
        if (scale->parsed()) return cmd_scaling(scale_ms, scale_n, scale_eps, scale_out);
        if (ver->parsed()) return cmd_verify_report(verify_path);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? kExitError : kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}
