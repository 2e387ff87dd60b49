#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "dissipacert/certify.hpp"
#include "dissipacert/model.hpp"

namespace dissipacert {

using Json = nlohmann::ordered_json;

/// Which network the run certifies: a builtin, an external oracle, or files.
struct SystemConfig {
    std::string kind = "two_subsystem";  // two_subsystem | room_network | nonlinear_ring | oracle | files
    std::size_t subsystems = 2;          // M for parametric builtins
    double phi = 0.05, theta = 0.3;      // room_network
    std::string adjacency = "ring";      // room_network: ring | complete
    double gamma = 0.1;                  // nonlinear_ring
    std::string oracle_command;          // kind == oracle
    std::vector<std::size_t> oracle_dims;  // n, p per subsystem, flattened pairs
    std::vector<std::string> sample_files;  // kind == files
};

struct RunConfig {
    SystemConfig system;
    PipelineConfig pipeline;
    std::string out_dir = ".";
    std::string report_path = "report.json";

    static RunConfig defaults() { return {}; }
};

inline NetworkSpec build_network(const SystemConfig& sys) {
    if (sys.kind == "two_subsystem") return two_subsystem();
    if (sys.kind == "room_network")
        return room_network(sys.subsystems, sys.phi, sys.theta,
                            sys.adjacency == "complete" ? RoomAdjacency::Complete
                                                        : RoomAdjacency::Ring);
    if (sys.kind == "nonlinear_ring") return nonlinear_ring(sys.subsystems, sys.gamma);
    throw std::invalid_argument("build_network: unsupported system kind '" + sys.kind + "'");
}

// ---------------------------------------------------------------------------
// JSON (config file format; flags override on the CLI)
// ---------------------------------------------------------------------------

inline Json to_json(const SystemConfig& s) {
    Json j;
    j["kind"] = s.kind;
    j["subsystems"] = s.subsystems;
    j["phi"] = s.phi;
    j["theta"] = s.theta;
    j["adjacency"] = s.adjacency;
    j["gamma"] = s.gamma;
    if (!s.oracle_command.empty()) j["oracle_command"] = s.oracle_command;
    if (!s.oracle_dims.empty()) j["oracle_dims"] = s.oracle_dims;
    if (!s.sample_files.empty()) j["sample_files"] = s.sample_files;
    return j;
}

inline Json to_json(const PipelineConfig& c) {
    Json j;
    j["samples_per_subsystem"] = c.samples_per_subsystem;
    j["sampling"] = {
        {"mode", c.sampling.mode == SamplingMode::Trajectory ? "trajectory" : "state_space"},
        {"init", c.sampling.init == InitDistribution::Sphere ? "sphere" : "positive_sphere"},
        {"radius", c.sampling.radius},
        {"burn_in_min", c.sampling.burn_in_min},
        {"burn_in_max", c.sampling.burn_in_max},
    };
    j["shared_rollouts"] = c.shared_rollouts;
    j["diagonal_basis"] = c.diagonal_basis;
    j["supply_structure"] =
        c.supply_structure == SupplyStructure::DiagonalX11 ? "diag_x11" : "full";
    j["q_max"] = c.q_max;
    j["x_max"] = c.x_max;
    j["eta"] = c.eta;
    j["lipschitz"] = {{"rho", c.slope.rho},
                      {"sigma", c.slope.sigma},
                      {"alpha", c.slope.alpha},
                      {"fallback_margin", c.slope.fallback_margin}};
    j["covering"] = {{"method", to_string(c.covering_method)}, {"probes", c.covering_probes}};
    j["tolerances"] = {{"lp_tol", c.lp_tol}, {"psd_tol", c.psd_tol}, {"eta_cert", c.eta_cert}};
    j["admm"] = {{"max_iter", c.admm.max_iter},
                 {"eps_primal", c.admm.eps_primal},
                 {"eps_dual", c.admm.eps_dual},
                 {"penalty", c.admm.penalty},
                 {"psd_tol", c.admm.psd_tol}};
    j["parallelism"] = c.parallelism;
    j["seed"] = c.master_seed;
    return j;
}

inline Json to_json(const RunConfig& c) {
    Json j;
    j["system"] = to_json(c.system);
    j["pipeline"] = to_json(c.pipeline);
    j["out_dir"] = c.out_dir;
    j["report_path"] = c.report_path;
    return j;
}

namespace detail {

template <typename T>
void get_if(const Json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline SystemConfig system_from_json(const Json& j) {
    SystemConfig s;
    detail::get_if(j, "kind", s.kind);
    detail::get_if(j, "subsystems", s.subsystems);
    detail::get_if(j, "phi", s.phi);
    detail::get_if(j, "theta", s.theta);
    detail::get_if(j, "adjacency", s.adjacency);
    detail::get_if(j, "gamma", s.gamma);
    detail::get_if(j, "oracle_command", s.oracle_command);
    detail::get_if(j, "oracle_dims", s.oracle_dims);
    detail::get_if(j, "sample_files", s.sample_files);
    return s;
}

inline PipelineConfig pipeline_from_json(const Json& j) {
    PipelineConfig c;
    detail::get_if(j, "samples_per_subsystem", c.samples_per_subsystem);
    if (j.contains("sampling")) {
        const Json& s = j.at("sampling");
        std::string mode = "trajectory", init = "sphere";
        detail::get_if(s, "mode", mode);
        detail::get_if(s, "init", init);
        c.sampling.mode = mode == "state_space" ? SamplingMode::StateSpace : SamplingMode::Trajectory;
        c.sampling.init =
            init == "positive_sphere" ? InitDistribution::PositiveSphere : InitDistribution::Sphere;
        detail::get_if(s, "radius", c.sampling.radius);
        detail::get_if(s, "burn_in_min", c.sampling.burn_in_min);
        detail::get_if(s, "burn_in_max", c.sampling.burn_in_max);
    }
    detail::get_if(j, "shared_rollouts", c.shared_rollouts);
    detail::get_if(j, "diagonal_basis", c.diagonal_basis);
    if (j.contains("supply_structure"))
        c.supply_structure = j.at("supply_structure").get<std::string>() == "diag_x11"
                                 ? SupplyStructure::DiagonalX11
                                 : SupplyStructure::Full;
    detail::get_if(j, "q_max", c.q_max);
    detail::get_if(j, "x_max", c.x_max);
    detail::get_if(j, "eta", c.eta);
    if (j.contains("lipschitz")) {
        const Json& l = j.at("lipschitz");
        detail::get_if(l, "rho", c.slope.rho);
        detail::get_if(l, "sigma", c.slope.sigma);
        detail::get_if(l, "alpha", c.slope.alpha);
        detail::get_if(l, "fallback_margin", c.slope.fallback_margin);
    }
    if (j.contains("covering")) {
        const Json& cv = j.at("covering");
        std::string method = "sample_loo";
        detail::get_if(cv, "method", method);
        c.covering_method = method == "sphere_lowdisc" ? CoveringMethod::SphereLowDiscrepancy
                                                       : CoveringMethod::SampleLeaveOneOut;
        detail::get_if(cv, "probes", c.covering_probes);
    }
    if (j.contains("tolerances")) {
        const Json& t = j.at("tolerances");
        detail::get_if(t, "lp_tol", c.lp_tol);
        detail::get_if(t, "psd_tol", c.psd_tol);
        detail::get_if(t, "eta_cert", c.eta_cert);
    }
    if (j.contains("admm")) {
        const Json& a = j.at("admm");
        detail::get_if(a, "max_iter", c.admm.max_iter);
        detail::get_if(a, "eps_primal", c.admm.eps_primal);
        detail::get_if(a, "eps_dual", c.admm.eps_dual);
        detail::get_if(a, "penalty", c.admm.penalty);
        detail::get_if(a, "psd_tol", c.admm.psd_tol);
    }
    detail::get_if(j, "parallelism", c.parallelism);
    detail::get_if(j, "seed", c.master_seed);
    return c;
}

inline RunConfig run_config_from_json(const Json& j) {
    RunConfig c;
    if (j.contains("system")) c.system = system_from_json(j.at("system"));
    if (j.contains("pipeline")) c.pipeline = pipeline_from_json(j.at("pipeline"));
    detail::get_if(j, "out_dir", c.out_dir);
    detail::get_if(j, "report_path", c.report_path);
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config " + path);
    Json j;
    f >> j;
    return run_config_from_json(j);
}

}  // namespace dissipacert
