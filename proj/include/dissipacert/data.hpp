#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dissipacert/model.hpp"
#include "dissipacert/numlin.hpp"
#include "dissipacert/rng.hpp"

namespace dissipacert {

/// One normalized data triple: ||(x_hat, w_hat)|| = 1.
struct Sample {
    Vec x_hat, w_hat, f_hat;
};

struct SampleSet {
    std::size_t subsystem = 0;
    std::size_t n = 0, p = 0;
    std::vector<Sample> samples;
    std::uint64_t seed = 0;
    std::string source;

    std::size_t count() const { return samples.size(); }

    /// (x_hat, w_hat) concatenated, the coordinates all distances live in.
    Vec joint(std::size_t z) const {
        Vec v = samples[z].x_hat;
        v.insert(v.end(), samples[z].w_hat.begin(), samples[z].w_hat.end());
        return v;
    }
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Projects raw triples onto the unit sphere: the whole triple is divided by
/// ||(x, w)||, so f_hat equals f at the normalized point by homogeneity.
inline SampleSet normalize(const Trajectory& raw) {
    if (raw.count() == 0) throw std::invalid_argument("normalize: empty trajectory");
    SampleSet out;
    out.subsystem = raw.subsystem;
    out.n = raw.state_dim;
    out.p = raw.input_dim;
    out.samples.reserve(raw.count());
    for (std::size_t z = 0; z < raw.count(); ++z) {
        const double nrm = std::hypot(norm2(raw.x[z]), norm2(raw.w[z]));
        if (nrm == 0.0)
            throw std::invalid_argument("normalize: zero-norm raw triple at index " +
                                        std::to_string(z));
        Sample s;
        s.x_hat = raw.x[z];
        s.w_hat = raw.w[z];
        s.f_hat = raw.fx[z];
        for (auto& v : s.x_hat) v /= nrm;
        for (auto& v : s.w_hat) v /= nrm;
        for (auto& v : s.f_hat) v /= nrm;
        out.samples.push_back(std::move(s));
    }
    return out;
}

enum class CoveringMethod {
    SphereLowDiscrepancy,  // sound: whole-sphere probes plus inflation
    SampleLeaveOneOut      // data self-covering (max over samples of nearest-other distance)
};

inline const char* to_string(CoveringMethod m) {
    return m == CoveringMethod::SphereLowDiscrepancy ? "sphere_lowdisc" : "sample_loo";
}

struct CoveringEstimate {
    double epsilon = 0.0;
    std::size_t probe_count = 0;
    double probe_spacing_bound = 0.0;
    CoveringMethod method = CoveringMethod::SphereLowDiscrepancy;
    double raw_max_min = 0.0;
};

namespace detail {

/// Deterministic probe directions on S^{d-1}: exact angle grid for d = 2,
/// Fibonacci spiral for d = 3, seeded uniform directions above that.
inline std::vector<Vec> sphere_probes(std::size_t d, std::size_t count, std::uint64_t seed) {
    std::vector<Vec> pts;
    pts.reserve(count);
    if (d == 1) {
        pts.push_back({1.0});
        pts.push_back({-1.0});
        return pts;
    }
    if (d == 2) {
        for (std::size_t k = 0; k < count; ++k) {
            const double a = 6.28318530717958647692 * static_cast<double>(k) /
                             static_cast<double>(count);
            pts.push_back({std::cos(a), std::sin(a)});
        }
        return pts;
    }
    if (d == 3) {
        const double ga = 2.39996322972865332;  // golden angle
        for (std::size_t k = 0; k < count; ++k) {
            const double z = 1.0 - 2.0 * (static_cast<double>(k) + 0.5) / static_cast<double>(count);
            const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            const double a = ga * static_cast<double>(k);
            pts.push_back({r * std::cos(a), r * std::sin(a), z});
        }
        return pts;
    }
    Rng rng(Rng::derive(seed, "covering_probes", d));
    for (std::size_t k = 0; k < count; ++k) pts.push_back(rng.unit_vector(d));
    return pts;
}

inline double min_dist_to_samples(const Vec& u, const std::vector<Vec>& joints,
                                  std::size_t skip = static_cast<std::size_t>(-1)) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t z = 0; z < joints.size(); ++z) {
        if (z == skip) continue;
        double s = 0.0;
        const Vec& J = joints[z];
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double dd = u[i] - J[i];
            s += dd * dd;
        }
        if (s < best) best = s;
    }
    return std::sqrt(best);
}

}  // namespace detail

/// Covering radius of the data on the joint unit sphere.
///
/// SphereLowDiscrepancy reports probe max-min plus the probe set's own
/// covering bound pi*sqrt(max(d-1,1))*P^(-1/(d-1)) (calibrated exactly on the
/// circle grid, inflated by sqrt(d-1) above it), so the result never
/// under-approximates the true max-min; capped at the sphere diameter 2.
/// SampleLeaveOneOut reproduces the reference workflow's data self-covering
/// value and makes no whole-sphere claim (spacing bound 0, method recorded).
inline CoveringEstimate covering_radius(const SampleSet& s, std::size_t probes,
                                        std::uint64_t seed,
                                        CoveringMethod method = CoveringMethod::SphereLowDiscrepancy) {
    if (probes < 1) throw std::invalid_argument("covering_radius: probes >= 1");
    if (s.count() == 0) throw std::invalid_argument("covering_radius: empty sample set");
    const std::size_t d = s.n + s.p;
    std::vector<Vec> joints(s.count());
    for (std::size_t z = 0; z < s.count(); ++z) joints[z] = s.joint(z);

    CoveringEstimate est;
    est.method = method;
    if (method == CoveringMethod::SampleLeaveOneOut) {
        est.probe_count = s.count();
        double mx = 0.0;
        if (s.count() > 1)
            for (std::size_t z = 0; z < joints.size(); ++z)
                mx = std::max(mx, detail::min_dist_to_samples(joints[z], joints, z));
        est.raw_max_min = mx;
        est.epsilon = std::min(mx, 2.0);
        return est;
    }

    const std::vector<Vec> pts = detail::sphere_probes(d, probes, seed);
    est.probe_count = pts.size();
    double mx = 0.0;
    for (const Vec& u : pts) mx = std::max(mx, detail::min_dist_to_samples(u, joints));
    est.raw_max_min = mx;
    const double dd = static_cast<double>(d);
    est.probe_spacing_bound =
        3.14159265358979323846 * std::sqrt(std::max(dd - 1.0, 1.0)) *
        std::pow(static_cast<double>(est.probe_count), -1.0 / std::max(dd - 1.0, 1.0));
    est.epsilon = std::min(mx + est.probe_spacing_bound, 2.0);
    return est;
}

// ---------------------------------------------------------------------------
// Sample file I/O (CSV, schema pinned for cross-tool use)
// ---------------------------------------------------------------------------

inline void write_samples(const SampleSet& s, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_samples: cannot open " + path);
    f << "# dissipacert-samples v1 subsystem=" << s.subsystem << " n=" << s.n
      << " p=" << s.p << " normalized=1\n";
    for (std::size_t j = 0; j < s.n; ++j) f << (j ? "," : "") << "x_" << (j + 1);
    for (std::size_t j = 0; j < s.p; ++j) f << ",w_" << (j + 1);
    for (std::size_t j = 0; j < s.n; ++j) f << ",fx_" << (j + 1);
    f << '\n';
    char buf[32];
    for (const Sample& smp : s.samples) {
        bool first = true;
        auto emit = [&](double v) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            if (!first) f << ',';
            f << buf;
            first = false;
        };
        for (const double v : smp.x_hat) emit(v);
        for (const double v : smp.w_hat) emit(v);
        for (const double v : smp.f_hat) emit(v);
        f << '\n';
    }
    if (!f) throw std::runtime_error("write_samples: write failed for " + path);
}

inline SampleSet read_samples(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ParseError("read_samples: cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw ParseError(path + ":1: empty file");
    SampleSet s;
    {
        std::istringstream hs(line);
        std::string tag, ver, kv;
        hs >> tag >> ver;
        if (tag != "#" || ver != "dissipacert-samples")
            throw ParseError(path + ":1: not a dissipacert-samples file");
        hs >> ver;  // "v1"
        bool got_n = false, got_p = false;
        while (hs >> kv) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = kv.substr(0, eq);
            const std::string val = kv.substr(eq + 1);
            if (key == "subsystem") s.subsystem = std::stoul(val);
            else if (key == "n") { s.n = std::stoul(val); got_n = true; }
            else if (key == "p") { s.p = std::stoul(val); got_p = true; }
        }
        if (!got_n || !got_p || s.n == 0)
            throw ParseError(path + ":1: header missing n/p");
    }
    if (!std::getline(f, line)) throw ParseError(path + ":2: missing column header");
    const std::size_t want = 2 * s.n + s.p;
    std::size_t lineno = 2;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> vals;
        vals.reserve(want);
        std::size_t pos = 0;
        while (pos <= line.size()) {
            const std::size_t comma = line.find(',', pos);
            const std::string tok =
                line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
            try {
                std::size_t used = 0;
                const double v = std::stod(tok, &used);
                if (used == 0) throw std::invalid_argument(tok);
                vals.push_back(v);
            } catch (const std::exception&) {
                throw ParseError(path + ":" + std::to_string(lineno) + ": malformed value '" +
                                 tok + "'");
            }
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (vals.size() != want)
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(want) + " columns, got " + std::to_string(vals.size()));
        for (const double v : vals)
            if (!std::isfinite(v))
                throw ParseError(path + ":" + std::to_string(lineno) + ": non-finite value");
        Sample smp;
        smp.x_hat.assign(vals.begin(), vals.begin() + s.n);
        smp.w_hat.assign(vals.begin() + s.n, vals.begin() + s.n + s.p);
        smp.f_hat.assign(vals.begin() + s.n + s.p, vals.end());
        const double nrm = std::hypot(norm2(smp.x_hat), norm2(smp.w_hat));
        if (nrm == 0.0)
            throw ParseError(path + ":" + std::to_string(lineno) + ": zero-norm (x,w) row");
        s.samples.push_back(std::move(smp));
    }
    if (s.samples.empty()) throw ParseError(path + ": no data rows");
    return s;
}

}  // namespace dissipacert
