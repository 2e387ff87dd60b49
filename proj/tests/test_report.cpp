#include <catch2/catch_amalgamated.hpp>

#include "dissipacert/report.hpp"

using namespace dissipacert;

namespace {

Certificate small_unknown_certificate(std::uint64_t seed) {
    const NetworkSpec net = two_subsystem();
    PipelineConfig cfg;
    cfg.samples_per_subsystem = 300;
    cfg.sampling.burn_in_min = 14;
    cfg.sampling.burn_in_max = 26;
    cfg.diagonal_basis = true;
    cfg.slope.rho = 100;
    cfg.slope.sigma = 8;
    cfg.slope.alpha = 0.1;
    cfg.master_seed = seed;
    return certify_unknown_topology(net, cfg);
}

}  // namespace

TEST_CASE("report round trip: margins and verdict re-verify", "[report]") {
    const Certificate cert = small_unknown_certificate(11);
    RunConfig rc;
    rc.pipeline.master_seed = 11;
    const Json j = report_json(cert, rc, 0.5, "2000-01-01T00:00:00Z");
    const ReportVerification v = verify_report(j);
    INFO([&] {
        std::string s;
        for (const auto& m : v.mismatches) s += m + "; ";
        return s;
    }());
    CHECK(v.ok);
}

TEST_CASE("verify_report flags a tampered margin", "[report]") {
    const Certificate cert = small_unknown_certificate(12);
    RunConfig rc;
    Json j = report_json(cert, rc, 0.5, "2000-01-01T00:00:00Z");
    j["per_subsystem"][0]["margin1"] = 1.234;
    CHECK_FALSE(verify_report(j).ok);

    Json j2 = report_json(cert, rc, 0.5, "2000-01-01T00:00:00Z");
    j2["verdict"] = "inconclusive";
    if (cert.verdict == Verdict::CertifiedGas) CHECK_FALSE(verify_report(j2).ok);
}

TEST_CASE("reports are byte-stable under a fixed seed modulo the timestamp", "[report]") {
    const Certificate a = small_unknown_certificate(13);
    const Certificate b = small_unknown_certificate(13);
    RunConfig rc;
    Json ja = report_json(a, rc, 0.0, "TS");
    Json jb = report_json(b, rc, 0.0, "TS");
    ja["timings"]["total_seconds"] = 0.0;
    jb["timings"]["total_seconds"] = 0.0;
    CHECK(ja.dump(2) == jb.dump(2));
}

TEST_CASE("write_report is atomic and loadable", "[report]") {
    const Certificate cert = small_unknown_certificate(14);
    RunConfig rc;
    const Json j = report_json(cert, rc, 0.1, now_timestamp());
    const std::string path = "/tmp/dissipacert_test_report.json";
    write_report(j, path);
    const Json loaded = load_report(path);
    CHECK(loaded.at("header").at("format") == "dissipacert-report v1");
    CHECK(verify_report(loaded).ok);
    std::remove(path.c_str());
}

TEST_CASE("config round trip preserves every field", "[report][config]") {
    RunConfig c;
    c.system.kind = "room_network";
    c.system.subsystems = 20;
    c.pipeline.samples_per_subsystem = 123;
    c.pipeline.sampling.burn_in_min = 7;
    c.pipeline.sampling.burn_in_max = 9;
    c.pipeline.sampling.init = InitDistribution::PositiveSphere;
    c.pipeline.diagonal_basis = true;
    c.pipeline.supply_structure = SupplyStructure::DiagonalX11;
    c.pipeline.covering_method = CoveringMethod::SphereLowDiscrepancy;
    c.pipeline.slope.rho = 42;
    c.pipeline.master_seed = 99;
    const RunConfig back = run_config_from_json(to_json(c));
    CHECK(back.system.kind == "room_network");
    CHECK(back.system.subsystems == 20);
    CHECK(back.pipeline.samples_per_subsystem == 123);
    CHECK(back.pipeline.sampling.burn_in_min == 7);
    CHECK(back.pipeline.sampling.init == InitDistribution::PositiveSphere);
    CHECK(back.pipeline.diagonal_basis);
    CHECK(back.pipeline.supply_structure == SupplyStructure::DiagonalX11);
    CHECK(back.pipeline.covering_method == CoveringMethod::SphereLowDiscrepancy);
    CHECK(back.pipeline.slope.rho == 42);
    CHECK(back.pipeline.master_seed == 99);
}
