#pragma once

#include <chrono>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "dissipacert/certify.hpp"
#include "dissipacert/config.hpp"

namespace dissipacert {

namespace detail {

inline Json mat_json(const Mat& m) {
    Json rows = Json::array();
    for (std::size_t i = 0; i < m.rows; ++i) {
        Json r = Json::array();
        for (std::size_t j = 0; j < m.cols; ++j) r.push_back(m(i, j));
        rows.push_back(r);
    }
    return rows;
}

inline Json sym_json(const SymMat& m) { return mat_json(m.as_mat()); }

inline Mat mat_from_json(const Json& j) {
    Mat m(j.size(), j.empty() ? 0 : j[0].size());
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t c = 0; c < m.cols; ++c) m(i, c) = j[i][c].get<double>();
    return m;
}

inline SymMat sym_from_json(const Json& j) { return SymMat::from_general(mat_from_json(j)); }

}  // namespace detail

inline Json evidence_json(const SubsystemEvidence& ev) {
    Json j;
    j["subsystem"] = ev.subsystem;
    Json basis = Json::array();
    for (const auto& [a, b] : ev.scp.storage.tmpl.monomials) basis.push_back({a, b});
    j["storage"] = {{"state_dim", ev.scp.storage.tmpl.state_dim},
                    {"basis", basis},
                    {"q", ev.scp.storage.q}};
    j["supply"] = {{"x11", detail::sym_json(ev.scp.supply.x11)},
                   {"x12", detail::mat_json(ev.scp.supply.x12)},
                   {"x22", detail::sym_json(ev.scp.supply.x22)}};
    j["mu"] = ev.scp.mu;
    j["delta"] = ev.scp.delta;
    j["has_delta"] = ev.scp.has_delta;
    j["objective"] = ev.scp.objective;
    j["solver"] = {{"status", to_string(ev.scp.solver_status)},
                   {"generated_rows", ev.scp.generated_rows},
                   {"simplex_iterations", ev.scp.simplex_iterations},
                   {"active_constraints", ev.scp.active_constraint_count},
                   {"max_violation", ev.scp.max_violation}};
    j["epsilon"] = {{"value", ev.epsilon.epsilon},
                    {"method", to_string(ev.epsilon.method)},
                    {"probes", ev.epsilon.probe_count},
                    {"spacing_bound", ev.epsilon.probe_spacing_bound},
                    {"raw_max_min", ev.epsilon.raw_max_min}};
    j["L1"] = ev.L1;
    j["L2"] = ev.L2;
    j["lipschitz_detail"] = {
        {"L1_max_slope", ev.L1_detail.max_observed_slope},
        {"L2_max_slope", ev.L2_detail.max_observed_slope},
        {"L1_fit_converged", ev.L1_detail.fit.converged},
        {"L2_fit_converged", ev.L2_detail.fit.converged},
    };
    j["margin1"] = ev.margin1();
    j["margin2"] = ev.margin2();
    j["margin_known"] = ev.margin_known();
    return j;
}

inline SubsystemEvidence evidence_from_json(const Json& j) {
    SubsystemEvidence ev;
    ev.subsystem = j.at("subsystem").get<std::size_t>();
    const Json& st = j.at("storage");
    ev.scp.storage.tmpl.state_dim = st.at("state_dim").get<std::size_t>();
    for (const auto& m : st.at("basis"))
        ev.scp.storage.tmpl.monomials.emplace_back(m[0].get<std::size_t>(),
                                                   m[1].get<std::size_t>());
    ev.scp.storage.q = st.at("q").get<Vec>();
    ev.scp.supply.x11 = detail::sym_from_json(j.at("supply").at("x11"));
    ev.scp.supply.x12 = detail::mat_from_json(j.at("supply").at("x12"));
    ev.scp.supply.x22 = detail::sym_from_json(j.at("supply").at("x22"));
    ev.scp.mu = j.at("mu").get<double>();
    ev.scp.delta = j.at("delta").get<double>();
    ev.scp.has_delta = j.at("has_delta").get<bool>();
    ev.scp.objective = j.at("objective").get<double>();
    ev.epsilon.epsilon = j.at("epsilon").at("value").get<double>();
    ev.epsilon.probe_count = j.at("epsilon").at("probes").get<std::size_t>();
    ev.epsilon.probe_spacing_bound = j.at("epsilon").at("spacing_bound").get<double>();
    ev.epsilon.raw_max_min = j.at("epsilon").at("raw_max_min").get<double>();
    ev.epsilon.method = j.at("epsilon").at("method").get<std::string>() == "sphere_lowdisc"
                            ? CoveringMethod::SphereLowDiscrepancy
                            : CoveringMethod::SampleLeaveOneOut;
    ev.L1 = j.at("L1").get<double>();
    ev.L2 = j.at("L2").get<double>();
    return ev;
}

/// Self-contained run report: config echo, per-subsystem evidence, verdict.
/// The timestamp lives in exactly one header field so the rest of the document
/// is byte-comparable across reruns of the same seed and config.
inline Json report_json(const Certificate& cert, const RunConfig& cfg, double elapsed_seconds,
                        const std::string& timestamp) {
    Json j;
    j["header"] = {{"format", "dissipacert-report v1"}, {"timestamp", timestamp}};
    j["config"] = to_json(cfg);
    j["verdict"] = to_string(cert.verdict);
    j["known_topology_path"] = cert.known_topology_path;
    j["eta_cert"] = cert.eta_cert;
    Json subs = Json::array();
    for (const auto& ev : cert.per_subsystem) subs.push_back(evidence_json(ev));
    j["per_subsystem"] = subs;
    j["sum_margin2"] = cert.sum_margin2;
    if (cert.known_topology_path) {
        j["composed_max_eig"] = cert.composed_max_eig;
        j["admm"] = {{"used", cert.admm_used}, {"iterations", cert.admm_iterations}};
    }
    j["violating_subsystems"] = cert.violating_subsystems;
    j["refinement_hints"] = cert.refinement_hints;
    j["note"] = Certificate::kInconclusiveNote;
    j["seed"] = cert.master_seed;
    j["timings"] = {{"total_seconds", elapsed_seconds}};
    return j;
}

inline std::string now_timestamp() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[64];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

/// Atomic write: temp file in the same directory, then rename.
inline void write_report(const Json& j, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp);
        if (!f) throw std::runtime_error("cannot write " + tmp);
        f << j.dump(2) << '\n';
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

struct ReportVerification {
    bool ok = false;
    std::vector<std::string> mismatches;
};

/// Recomputes every margin and the verdict from the stored parts and checks
/// them against the stored values (the certificate must be a pure function of
/// its evidence).
inline ReportVerification verify_report(const Json& j, double tol = 1e-12) {
    ReportVerification v;
    const bool known = j.at("known_topology_path").get<bool>();
    const double eta_cert = j.at("eta_cert").get<double>();
    bool all1 = true;
    double sum2 = 0.0;
    bool all_known = true;
    for (const Json& js : j.at("per_subsystem")) {
        const SubsystemEvidence ev = evidence_from_json(js);
        const double m1 = ev.scp.mu + ev.L1 * ev.epsilon.epsilon;
        const double m2 = ev.scp.mu + ev.scp.delta + ev.L2 * ev.epsilon.epsilon;
        const double mk = ev.scp.mu + std::max(ev.L1, ev.L2) * ev.epsilon.epsilon;
        if (std::abs(m1 - js.at("margin1").get<double>()) > tol)
            v.mismatches.push_back("margin1 mismatch at subsystem " + std::to_string(ev.subsystem));
        if (std::abs(m2 - js.at("margin2").get<double>()) > tol)
            v.mismatches.push_back("margin2 mismatch at subsystem " + std::to_string(ev.subsystem));
        if (std::abs(mk - js.at("margin_known").get<double>()) > tol)
            v.mismatches.push_back("margin_known mismatch at subsystem " +
                                   std::to_string(ev.subsystem));
        if (!(m1 < -eta_cert)) all1 = false;
        if (!(mk < -eta_cert)) all_known = false;
        sum2 += m2;
    }
    if (std::abs(sum2 - j.at("sum_margin2").get<double>()) > tol * 100)
        v.mismatches.push_back("sum_margin2 mismatch");
    const std::string verdict = j.at("verdict").get<std::string>();
    bool expect_cert;
    if (known) {
        const double ce = j.at("composed_max_eig").get<double>();
        const double psd_tol = j.at("config").at("pipeline").at("tolerances").at("psd_tol").get<double>();
        expect_cert = all_known && ce <= psd_tol;
    } else {
        expect_cert = all1 && sum2 < -eta_cert;
    }
    if (expect_cert != (verdict == "certified_GAS"))
        v.mismatches.push_back("verdict does not match recomputed margins");
    v.ok = v.mismatches.empty();
    return v;
}

inline Json load_report(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open report " + path);
    Json j;
    f >> j;
    return j;
}

}  // namespace dissipacert
