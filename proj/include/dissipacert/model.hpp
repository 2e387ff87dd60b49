#pragma once

#include <cstdio>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dissipacert/numlin.hpp"
#include "dissipacert/rng.hpp"

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

namespace dissipacert {

using Dynamics = std::function<Vec(const Vec&, const Vec&)>;

/// One subsystem Sigma_i = (R^{n_i}, R^{p_i}, f_i) with an opaque evaluator.
struct SubsystemSpec {
    std::size_t index = 0;
    std::size_t state_dim = 0;
    std::size_t input_dim = 0;
    Dynamics dynamics;

    Vec eval(const Vec& x, const Vec& w) const {
        if (x.size() != state_dim || w.size() != input_dim)
            throw std::invalid_argument("subsystem eval: dimension mismatch");
        Vec f = dynamics(x, w);
        if (f.size() != state_dim)
            throw std::runtime_error("subsystem eval: evaluator returned wrong dimension");
        return f;
    }
};

/// Interconnection of M subsystems with coupling [w_1;...;w_M] = M [x_1;...;x_M].
struct NetworkSpec {
    std::string name;
    std::vector<SubsystemSpec> subsystems;
    Mat topology;  // (sum p_i) x (sum n_i)
    bool topology_known = false;

    std::size_t size() const { return subsystems.size(); }

    std::size_t total_state_dim() const {
        std::size_t n = 0;
        for (const auto& s : subsystems) n += s.state_dim;
        return n;
    }
    std::size_t total_input_dim() const {
        std::size_t p = 0;
        for (const auto& s : subsystems) p += s.input_dim;
        return p;
    }
    std::size_t state_offset(std::size_t i) const {
        std::size_t o = 0;
        for (std::size_t k = 0; k < i; ++k) o += subsystems[k].state_dim;
        return o;
    }
    std::size_t input_offset(std::size_t i) const {
        std::size_t o = 0;
        for (std::size_t k = 0; k < i; ++k) o += subsystems[k].input_dim;
        return o;
    }

    void validate() const {
        if (subsystems.empty()) throw std::invalid_argument("network: M >= 1 required");
        if (topology_known) {
            if (topology.rows != total_input_dim() || topology.cols != total_state_dim())
                throw std::invalid_argument("network: topology dims inconsistent with subsystems");
        }
    }

    /// One step of the interconnected system under the coupling constraint.
    Vec step(const Vec& x) const {
        const Vec w = topology.apply(x);
        Vec next(total_state_dim());
        std::size_t on = 0, op = 0;
        for (const auto& s : subsystems) {
            Vec xi(x.begin() + on, x.begin() + on + s.state_dim);
            Vec wi(w.begin() + op, w.begin() + op + s.input_dim);
            const Vec fi = s.eval(xi, wi);
            std::copy(fi.begin(), fi.end(), next.begin() + on);
            on += s.state_dim;
            op += s.input_dim;
        }
        return next;
    }
};

// ---------------------------------------------------------------------------
// Built-in case-study networks
// ---------------------------------------------------------------------------

namespace builtin {

inline Mat mat2(double a, double b, double c, double d) {
    Mat m(2, 2);
    m(0, 0) = a; m(0, 1) = b; m(1, 0) = c; m(1, 1) = d;
    return m;
}

inline const Mat kA1 = mat2(-0.1, -0.2, -0.2, -0.1);
inline const Mat kB1 = mat2(0.2, 0.0, 0.0, 0.2);
inline const Mat kA2 = mat2(-0.5, 1.8, -0.2, 1.01);
inline const Mat kB2 = mat2(0.1, 0.0, 0.0, 0.1);
inline const Mat kRingH = mat2(-0.1, 0.2, 0.15, 0.12);

}  // namespace builtin

/// Two linear subsystems in feedback; coupling blocks [0, -I2; I2, 0].
inline NetworkSpec two_subsystem() {
    NetworkSpec net;
    net.name = "two_subsystem";
    auto linear = [](const Mat& A, const Mat& B) {
        return [A, B](const Vec& x, const Vec& w) {
            Vec out = A.apply(x);
            const Vec bw = B.apply(w);
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += bw[i];
            return out;
        };
    };
    net.subsystems.push_back({0, 2, 2, linear(builtin::kA1, builtin::kB1)});
    net.subsystems.push_back({1, 2, 2, linear(builtin::kA2, builtin::kB2)});
    net.topology = Mat(4, 4);
    net.topology(0, 2) = -1.0;
    net.topology(1, 3) = -1.0;
    net.topology(2, 0) = 1.0;
    net.topology(3, 1) = 1.0;
    net.topology_known = true;
    net.validate();
    return net;
}

enum class RoomAdjacency { Ring, Complete };

/// Room temperature network: T_i(k+1) = (1-2*phi-theta) T_i + phi * w_i,
/// w_i the sum of adjacent rooms' temperatures.
inline NetworkSpec room_network(std::size_t rooms, double phi, double theta,
                                RoomAdjacency adj = RoomAdjacency::Ring) {
    if (rooms < 2) throw std::invalid_argument("room_network: M >= 2");
    const double aii = 1.0 - 2.0 * phi - theta;
    if (!(phi > 0.0) || !(theta > 0.0) || !(aii > -1.0 && aii < 1.0))
        throw std::invalid_argument("room_network: require phi,theta > 0 and 1-2phi-theta in (-1,1)");
    NetworkSpec net;
    net.name = "room_network";
    for (std::size_t i = 0; i < rooms; ++i) {
        net.subsystems.push_back({i, 1, 1, [aii, phi](const Vec& x, const Vec& w) {
                                      return Vec{aii * x[0] + phi * w[0]};
                                  }});
    }
    net.topology = Mat(rooms, rooms);
    for (std::size_t i = 0; i < rooms; ++i) {
        if (adj == RoomAdjacency::Ring) {
            net.topology(i, (i + rooms - 1) % rooms) = 1.0;
            net.topology(i, (i + 1) % rooms) = 1.0;
        } else {
            for (std::size_t j = 0; j < rooms; ++j)
                if (j != i) net.topology(i, j) = 1.0;
        }
    }
    net.topology_known = true;
    net.validate();
    return net;
}

/// Nonlinear degree-one homogeneous ring: x_i+ = H F(x_i) + 0.1 w_i, w_i = x_{i-1}.
inline NetworkSpec nonlinear_ring(std::size_t subsystems, double gamma) {
    if (subsystems < 2) throw std::invalid_argument("nonlinear_ring: M >= 2");
    if (!(gamma > 0.0)) throw std::invalid_argument("nonlinear_ring: gamma > 0");
    NetworkSpec net;
    net.name = "nonlinear_ring";
    const Mat H = builtin::kRingH;
    for (std::size_t i = 0; i < subsystems; ++i) {
        net.subsystems.push_back({i, 2, 2, [H, gamma](const Vec& x, const Vec& w) {
                                      const double root =
                                          std::sqrt(std::abs(x[0] * x[1]) +
                                                    gamma * (x[0] * x[0] + x[1] * x[1]));
                                      const Vec F{root, x[1]};
                                      Vec out = H.apply(F);
                                      out[0] += 0.1 * w[0];
                                      out[1] += 0.1 * w[1];
                                      return out;
                                  }});
    }
    net.topology = Mat(2 * subsystems, 2 * subsystems);
    for (std::size_t i = 0; i < subsystems; ++i) {
        const std::size_t j = (i + subsystems - 1) % subsystems;  // w_i = x_{i-1}, x_0 = x_M
        net.topology(2 * i, 2 * j) = 1.0;
        net.topology(2 * i + 1, 2 * j + 1) = 1.0;
    }
    net.topology_known = true;
    net.validate();
    return net;
}

// ---------------------------------------------------------------------------
// Simulation and sampling
// ---------------------------------------------------------------------------

struct DivergenceError : std::runtime_error {
    int step;
    DivergenceError(int k, double nrm)
        : std::runtime_error("simulation diverged at step " + std::to_string(k) +
                             " (||x|| = " + std::to_string(nrm) + ")"),
          step(k) {}
};

/// States x(0..steps) of the interconnection; errors out if ||x|| exceeds 1e12.
inline std::vector<Vec> simulate_interconnection(const NetworkSpec& net, const Vec& x0,
                                                 int steps) {
    if (x0.size() != net.total_state_dim())
        throw std::invalid_argument("simulate: x0 dimension mismatch");
    std::vector<Vec> out;
    out.reserve(static_cast<std::size_t>(steps) + 1);
    out.push_back(x0);
    Vec x = x0;
    for (int k = 0; k < steps; ++k) {
        x = net.step(x);
        const double nrm = norm2(x);
        if (nrm > 1e12) throw DivergenceError(k + 1, nrm);
        out.push_back(x);
    }
    return out;
}

enum class SamplingMode { Trajectory, StateSpace };
enum class InputConvention { PerTopology, Concatenation };
enum class InitDistribution { Sphere, PositiveSphere };

struct SamplingOptions {
    SamplingMode mode = SamplingMode::Trajectory;
    InputConvention w_mode = InputConvention::PerTopology;
    InitDistribution init = InitDistribution::Sphere;
    double radius = 1.0;       // initial-state sphere radius
    int burn_in_min = 20;      // trajectory mode: sample the pair after k steps,
    int burn_in_max = 40;      //   k uniform in [burn_in_min, burn_in_max]
};

/// Raw data triples (x, w, f(x,w)) for one subsystem.
struct Trajectory {
    std::size_t subsystem = 0;
    std::size_t state_dim = 0;
    std::size_t input_dim = 0;
    std::vector<Vec> x, w, fx;

    std::size_t count() const { return x.size(); }
};

namespace detail {

inline Vec initial_state(Rng& rng, std::size_t dim, const SamplingOptions& opt) {
    Vec x = rng.unit_vector(dim);
    if (opt.init == InitDistribution::PositiveSphere)
        for (auto& v : x) v = std::abs(v);
    for (auto& v : x) v *= opt.radius;
    return x;
}

/// Burn-in rollout with per-step renormalization. Degree-one homogeneity makes
/// the renormalized trajectory a valid direction sequence and avoids
/// floating-point extremes on long horizons.
inline Vec rollout_direction(const NetworkSpec& net, Rng& rng, const SamplingOptions& opt) {
    Vec x = initial_state(rng, net.total_state_dim(), opt);
    const int k = opt.burn_in_min +
                  static_cast<int>(rng.uniform_index(
                      static_cast<std::uint64_t>(opt.burn_in_max - opt.burn_in_min + 1)));
    for (int t = 0; t < k; ++t) {
        x = net.step(x);
        const double nrm = norm2(x);
        if (nrm == 0.0) return x;  // reached the equilibrium exactly; caller resamples
        for (auto& v : x) v /= nrm;
    }
    return x;
}

inline void extract_triple(const NetworkSpec& net, std::size_t i, const Vec& x,
                           const Vec& xnext, InputConvention w_mode, Trajectory& out) {
    const std::size_t on = net.state_offset(i);
    const std::size_t ni = net.subsystems[i].state_dim;
    out.x.emplace_back(x.begin() + on, x.begin() + on + ni);
    out.fx.emplace_back(xnext.begin() + on, xnext.begin() + on + ni);
    if (w_mode == InputConvention::PerTopology) {
        const Vec wfull = net.topology.apply(x);
        const std::size_t op = net.input_offset(i);
        out.w.emplace_back(wfull.begin() + op,
                           wfull.begin() + op + net.subsystems[i].input_dim);
    } else {
        Vec w;
        w.reserve(net.total_state_dim() - ni);
        w.insert(w.end(), x.begin(), x.begin() + on);
        w.insert(w.end(), x.begin() + on + ni, x.end());
        out.w.push_back(std::move(w));
    }
}

}  // namespace detail

/// Effective input dimension of subsystem i under a sampling convention.
inline std::size_t effective_input_dim(const NetworkSpec& net, std::size_t i,
                                       InputConvention w_mode) {
    return w_mode == InputConvention::PerTopology
               ? net.subsystems[i].input_dim
               : net.total_state_dim() - net.subsystems[i].state_dim;
}

/// Black-box view of subsystem i under the concatenation convention of
/// Remark-style full-state inputs: w carries all other subsystems' states and
/// the true coupling is applied internally.
inline SubsystemSpec concatenation_view(const NetworkSpec& net, std::size_t i) {
    SubsystemSpec v;
    v.index = i;
    v.state_dim = net.subsystems[i].state_dim;
    v.input_dim = net.total_state_dim() - v.state_dim;
    const NetworkSpec* netp = &net;
    v.dynamics = [netp, i](const Vec& xi, const Vec& w) {
        const std::size_t on = netp->state_offset(i);
        Vec full(netp->total_state_dim());
        std::copy(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(on), full.begin());
        std::copy(xi.begin(), xi.end(), full.begin() + static_cast<std::ptrdiff_t>(on));
        std::copy(w.begin() + static_cast<std::ptrdiff_t>(on), w.end(),
                  full.begin() + static_cast<std::ptrdiff_t>(on + xi.size()));
        const Vec wfull = netp->topology.apply(full);
        const std::size_t op = netp->input_offset(i);
        Vec wi(wfull.begin() + op, wfull.begin() + op + netp->subsystems[i].input_dim);
        return netp->subsystems[i].eval(xi, wi);
    };
    return v;
}

/// Collect count raw triples for subsystem i. Trajectory mode draws one pair
/// per fresh rollout; state-space mode samples (x, w) directly on the sphere.
inline Trajectory sample_pairs(const NetworkSpec& net, std::size_t i, std::size_t count,
                               std::uint64_t seed, const SamplingOptions& opt = {}) {
    if (count < 1) throw std::invalid_argument("sample_pairs: count >= 1 required");
    net.validate();
    Rng rng(Rng::derive(seed, "sample_pairs", i));
    Trajectory out;
    out.subsystem = i;
    out.state_dim = net.subsystems[i].state_dim;
    out.input_dim = effective_input_dim(net, i, opt.w_mode);

    const SubsystemSpec view = opt.w_mode == InputConvention::Concatenation
                                   ? concatenation_view(net, i)
                                   : net.subsystems[i];
    for (std::size_t z = 0; z < count; ++z) {
        int retries = 0;
        for (;;) {
            if (++retries > 100)
                throw std::runtime_error("sample_pairs: zero-norm sample persisted after 100 retries");
            if (opt.mode == SamplingMode::StateSpace) {
                Vec xw = rng.unit_vector(out.state_dim + out.input_dim);
                Vec xi(xw.begin(), xw.begin() + out.state_dim);
                Vec wi(xw.begin() + out.state_dim, xw.end());
                out.x.push_back(xi);
                out.w.push_back(wi);
                out.fx.push_back(view.eval(xi, wi));
                break;
            }
            const Vec x = detail::rollout_direction(net, rng, opt);
            if (norm2(x) == 0.0) continue;
            const Vec xnext = net.step(x);
            detail::extract_triple(net, i, x, xnext, opt.w_mode, out);
            const double nrm = std::hypot(norm2(out.x.back()), norm2(out.w.back()));
            if (nrm == 0.0) {
                out.x.pop_back();
                out.w.pop_back();
                out.fx.pop_back();
                continue;
            }
            break;
        }
    }
    return out;
}

/// Batch variant: every rollout serves all subsystems at once (one physical
/// experiment, measured everywhere). Master seed keeps it reproducible.
inline std::vector<Trajectory> sample_all(const NetworkSpec& net, std::size_t count,
                                          std::uint64_t seed,
                                          const SamplingOptions& opt = {}) {
    net.validate();
    if (opt.mode == SamplingMode::StateSpace) {
        std::vector<Trajectory> out;
        for (std::size_t i = 0; i < net.size(); ++i)
            out.push_back(sample_pairs(net, i, count, seed, opt));
        return out;
    }
    Rng rng(Rng::derive(seed, "sample_all"));
    std::vector<Trajectory> out(net.size());
    for (std::size_t i = 0; i < net.size(); ++i) {
        out[i].subsystem = i;
        out[i].state_dim = net.subsystems[i].state_dim;
        out[i].input_dim = effective_input_dim(net, i, opt.w_mode);
    }
    for (std::size_t z = 0; z < count; ++z) {
        Vec x;
        int retries = 0;
        do {
            if (++retries > 100)
                throw std::runtime_error("sample_all: zero-norm rollout persisted after 100 retries");
            x = detail::rollout_direction(net, rng, opt);
        } while (norm2(x) == 0.0);
        const Vec xnext = net.step(x);
        for (std::size_t i = 0; i < net.size(); ++i)
            detail::extract_triple(net, i, x, xnext, opt.w_mode, out[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Homogeneity probing
// ---------------------------------------------------------------------------

struct HomogeneityReport {
    bool pass = false;
    double max_relative_violation = 0.0;
    double worst_lambda = 1.0;
    std::size_t trials = 0;
};

/// Checks ||f(l x, l w) - l f(x, w)|| <= tol * max(1, ||l f(x,w)||) on random draws.
inline HomogeneityReport homogeneity_probe(const SubsystemSpec& spec, std::size_t trials,
                                           double lambda_min, double lambda_max, double tol,
                                           std::uint64_t seed = 1) {
    if (trials < 1) throw std::invalid_argument("homogeneity_probe: trials >= 1");
    if (!(lambda_min > 0.0) || !(lambda_max >= lambda_min))
        throw std::invalid_argument("homogeneity_probe: lambda range must be positive");
    Rng rng(Rng::derive(seed, "homogeneity", spec.index));
    HomogeneityReport rep;
    rep.trials = trials;
    for (std::size_t t = 0; t < trials; ++t) {
        Vec x(spec.state_dim), w(spec.input_dim);
        for (auto& v : x) v = rng.normal();
        for (auto& v : w) v = rng.normal();
        const double lam = rng.uniform(lambda_min, lambda_max);
        Vec xl = x, wl = w;
        for (auto& v : xl) v *= lam;
        for (auto& v : wl) v *= lam;
        const Vec f = spec.eval(x, w);
        const Vec fl = spec.eval(xl, wl);
        double diff = 0.0, ref = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            const double scaled = lam * f[i];
            diff += (fl[i] - scaled) * (fl[i] - scaled);
            ref += scaled * scaled;
        }
        const double viol = std::sqrt(diff) / std::max(1.0, std::sqrt(ref));
        if (viol > rep.max_relative_violation) {
            rep.max_relative_violation = viol;
            rep.worst_lambda = lam;
        }
    }
    rep.pass = rep.max_relative_violation <= tol;
    return rep;
}

// ---------------------------------------------------------------------------
// External executable oracle (one "x w" query line in, one "f" line out)
// ---------------------------------------------------------------------------

/// Runs a user command as a persistent child process speaking the line
/// protocol: each query writes n+p whitespace-separated decimals and a
/// newline; the child answers with n decimals on one line.
class ExternalOracle {
public:
    ExternalOracle(std::string command, std::size_t state_dim, std::size_t input_dim)
        : cmd_(std::move(command)), n_(state_dim), p_(input_dim) {
        start();
    }
    ~ExternalOracle() { stop(); }

    ExternalOracle(const ExternalOracle&) = delete;
    ExternalOracle& operator=(const ExternalOracle&) = delete;

    Vec eval(const Vec& x, const Vec& w) {
        std::string line;
        line.reserve(32 * (n_ + p_));
        char buf[64];
        for (const double v : x) {
            std::snprintf(buf, sizeof buf, "%.17g ", v);
            line += buf;
        }
        for (const double v : w) {
            std::snprintf(buf, sizeof buf, "%.17g ", v);
            line += buf;
        }
        line += '\n';
        if (fputs(line.c_str(), to_child_) == EOF || fflush(to_child_) != 0)
            throw std::runtime_error("external oracle: write failed");
        Vec f(n_);
        for (std::size_t i = 0; i < n_; ++i)
            if (std::fscanf(from_child_, "%lf", &f[i]) != 1)
                throw std::runtime_error("external oracle: short or malformed reply");
        return f;
    }

    /// SubsystemSpec wrapper; the oracle object must outlive the spec.
    SubsystemSpec as_subsystem(std::size_t index) {
        ExternalOracle* self = this;
        return {index, n_, p_, [self](const Vec& x, const Vec& w) { return self->eval(x, w); }};
    }

private:
    void start() {
        int in_pipe[2], out_pipe[2];
        if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0)
            throw std::runtime_error("external oracle: pipe failed");
        pid_ = fork();
        if (pid_ < 0) throw std::runtime_error("external oracle: fork failed");
        if (pid_ == 0) {
            dup2(in_pipe[0], STDIN_FILENO);
            dup2(out_pipe[1], STDOUT_FILENO);
            close(in_pipe[0]);
            close(in_pipe[1]);
            close(out_pipe[0]);
            close(out_pipe[1]);
            execl("/bin/sh", "sh", "-c", cmd_.c_str(), static_cast<char*>(nullptr));
            _exit(127);
        }
        close(in_pipe[0]);
        close(out_pipe[1]);
        to_child_ = fdopen(in_pipe[1], "w");
        from_child_ = fdopen(out_pipe[0], "r");
        if (!to_child_ || !from_child_) throw std::runtime_error("external oracle: fdopen failed");
    }

    void stop() {
        if (to_child_) fclose(to_child_);
        if (from_child_) fclose(from_child_);
        if (pid_ > 0) {
            int status = 0;
            waitpid(pid_, &status, 0);
        }
    }

    std::string cmd_;
    std::size_t n_, p_;
    pid_t pid_ = -1;
    FILE* to_child_ = nullptr;
    FILE* from_child_ = nullptr;
};

}  // namespace dissipacert
