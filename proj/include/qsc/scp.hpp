#pragma once

// Depth search for the limited-structured complexity of an unknown state:
// binary search over circuit depth, one loss-maximization probe per depth,
// verdict assembly with the loss witness, and the square-root state
// reconstruction with its gentle-measurement deviation bound.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qsc/ansatz.hpp"
#include "qsc/bayesopt.hpp"
#include "qsc/qsim.hpp"
#include "qsc/shadows.hpp"

namespace qsc {

enum class Outcome { Yes, No, Inconclusive };

inline std::string outcome_name(Outcome o) {
    switch (o) {
        case Outcome::Yes: return "yes";
        case Outcome::No: return "no";
        default: return "inconclusive";
    }
}

struct ProbeRecord {
    int depth = 0;
    bool accepted = false;
    double best_value = 0.0;
    double final_value = 0.0;
    int t_used = 0;
    int n_used = 0;
    std::uint64_t seed = 0;  // child-stream key for this probe
    DomainPoint best_z;
};

struct ScpVerdict {
    Outcome outcome = Outcome::Inconclusive;
    std::optional<int> r_min;
    std::optional<int> complexity_bound;  // width * r_min, in two-qubit gates
    double epsilon = 0.0;
    std::vector<ProbeRecord> probes;
    std::optional<Eigen::VectorXd> witness_q;  // mixing distribution with min probed loss > eps
    double witness_loss = 0.0;
    int width = 0;  // gates per layer for this (n, layout)
    Layout layout = Layout::Brickwork;
    int n_cap = 0;
    int t_cap = 0;
    EstimatorMode mode = EstimatorMode::Exact;
};

struct ScpConfig {
    double epsilon = 0.1;
    double delta = 0.1;
    int k_exponent = 2;
    int n_cap = 64;   // cap on the per-depth sample count
    int t_cap = 400;  // cap on the per-depth optimizer iterations
    std::optional<int> probe_budget;  // total optimizer iterations across all depths
    EstimatorConfig estimator;
    ShadowEnsemble ensemble = ShadowEnsemble::HaarGlobal;
    std::optional<KernelConfig> kernel;
    UcbConfig ucb;
    // Test hook: extra forced iterates handed to the probe at `depth`, given
    // its resolved sample count and iteration count.
    std::function<std::vector<std::pair<int, DomainPoint>>(int depth, int samples, int iterations)>
        inject;

    void validate() const {
        if (!(epsilon > 0.0 && epsilon < 1.0))
            throw std::invalid_argument("ScpConfig: epsilon outside (0,1)");
        if (!(delta > 0.0 && delta < 1.0))
            throw std::invalid_argument("ScpConfig: delta outside (0,1)");
        if (k_exponent < 0) throw std::invalid_argument("ScpConfig: negative k exponent");
        if (n_cap < 2) throw std::invalid_argument("ScpConfig: sample cap below 2");
        if (t_cap < 1) throw std::invalid_argument("ScpConfig: iteration cap below 1");
        estimator.validate();
    }
};

// ceil(log2 n) with a floor of 2: integer depths, base-2 qubit counting.
inline int depth_search_ceiling(int n) {
    if (n < 2) throw std::invalid_argument("depth_search_ceiling: need n >= 2");
    int s = 0;
    while ((1 << s) < n) ++s;
    return std::max(2, s);
}

// Sample and iteration counts N = L R n^2 / eps^2 and T = N^2 n^k, capped.
inline std::pair<int, int> probe_sizes(const ScpConfig& cfg, int n, int width, int depth) {
    const double nd = static_cast<double>(n);
    const double n_raw = width * depth * nd * nd / (cfg.epsilon * cfg.epsilon);
    const int count =
        std::max(2, static_cast<int>(std::llround(std::min(n_raw, static_cast<double>(cfg.n_cap)))));
    const double t_raw =
        static_cast<double>(count) * count * std::pow(nd, static_cast<double>(cfg.k_exponent));
    const int iters =
        std::max(1, static_cast<int>(std::llround(std::min(t_raw, static_cast<double>(cfg.t_cap)))));
    return {count, iters};
}

namespace detail {

// Group probed iterates by byte-identical mixing distribution and return the
// group whose worst (minimum) loss is largest, when that minimum exceeds eps.
inline std::optional<std::pair<Eigen::VectorXd, double>> loss_witness(
    const std::vector<UcbStep>& steps, double epsilon) {
    std::vector<std::pair<Eigen::VectorXd, double>> groups;
    for (const auto& s : steps) {
        bool merged = false;
        for (auto& [q, worst] : groups) {
            if (q.size() == s.z.q.size() &&
                std::memcmp(q.data(), s.z.q.data(),
                            sizeof(double) * static_cast<std::size_t>(q.size())) == 0) {
                worst = std::min(worst, s.objective);
                merged = true;
                break;
            }
        }
        if (!merged) groups.emplace_back(s.z.q, s.objective);
    }
    std::optional<std::pair<Eigen::VectorXd, double>> best;
    for (const auto& g : groups)
        if (g.second > epsilon && (!best || g.second > best->second)) best = g;
    return best;
}

}  // namespace detail

// Binary search over depth in [1, ceil(log2 n)]. Each probed depth runs one
// loss-maximization pass; a depth is accepted when the final iterate stays at
// or below epsilon. Probes are memoized, so at most one fresh evaluation
// happens after the bisection loop.
inline ScpVerdict run_scp(const StateSource& rho_un, Layout layout, const ScpConfig& cfg,
                          RngStream& rng) {
    cfg.validate();
    const int n = rho_un.n();
    if (n < 2) throw std::invalid_argument("run_scp: need n >= 2");

    ScpVerdict verdict;
    verdict.epsilon = cfg.epsilon;
    verdict.layout = layout;
    verdict.width = build_architecture(n, layout, 1).width;
    verdict.n_cap = cfg.n_cap;
    verdict.t_cap = cfg.t_cap;
    verdict.mode = cfg.estimator.mode;

    std::map<int, std::size_t> memo;
    std::map<int, std::vector<UcbStep>> steps_by_depth;
    int spent = 0;
    bool exhausted = false;

    auto probe = [&](int depth) -> std::optional<bool> {
        if (auto it = memo.find(depth); it != memo.end())
            return verdict.probes[it->second].accepted;
        const Architecture arch = build_architecture(n, layout, depth);
        const auto [count, iters] = probe_sizes(cfg, n, arch.width, depth);
        if (cfg.probe_budget && spent + iters > *cfg.probe_budget) {
            exhausted = true;
            return std::nullopt;
        }
        spent += iters;
        RngStream depth_rng = rng.split(static_cast<std::uint64_t>(depth));
        RngStream sample_rng = depth_rng.split(1);
        const auto samples = sample_qnn_set(arch, count, sample_rng);

        BmaxsConfig bcfg;
        bcfg.estimator = cfg.estimator;
        bcfg.ensemble = cfg.ensemble;
        bcfg.kernel = cfg.kernel;
        bcfg.ucb = cfg.ucb;
        if (cfg.inject) bcfg.ucb.injected = cfg.inject(depth, count, iters);
        RngStream opt_rng = depth_rng.split(2);
        const BmaxsResult res = bmaxs(rho_un, samples, iters, cfg.epsilon, cfg.delta, bcfg, opt_rng);

        ProbeRecord rec;
        rec.depth = depth;
        rec.accepted = res.accepted;
        rec.best_value = res.best_value;
        rec.final_value = res.final_value;
        rec.t_used = iters;
        rec.n_used = count;
        rec.seed = static_cast<std::uint64_t>(depth);
        rec.best_z = res.best_z;
        memo[depth] = verdict.probes.size();
        verdict.probes.push_back(std::move(rec));
        steps_by_depth[depth] = res.trace.steps;
        return res.accepted;
    };

    int lo = 1;
    int hi = depth_search_ceiling(n);
    while (hi - lo > 1 && !exhausted) {
        const int mid = (lo + hi) / 2;
        const auto r = probe(mid);
        if (!r) break;
        (*r ? hi : lo) = mid;
    }

    std::optional<int> yes_depth;
    if (!exhausted) {
        const auto at_lo = probe(lo);  // memoized unless lo is still 1
        if (at_lo && *at_lo) {
            yes_depth = lo;
        } else if (!exhausted) {
            const auto at_hi = probe(hi);
            if (at_hi && *at_hi) yes_depth = hi;
        }
    }

    if (exhausted) {
        verdict.outcome = Outcome::Inconclusive;
        return verdict;
    }
    if (yes_depth) {
        verdict.outcome = Outcome::Yes;
        verdict.r_min = *yes_depth;
        verdict.complexity_bound = verdict.width * *yes_depth;
        return verdict;
    }
    verdict.outcome = Outcome::No;
    int deciding = 0;
    for (const auto& [depth, steps] : steps_by_depth)
        if (!verdict.probes[memo[depth]].accepted) deciding = std::max(deciding, depth);
    if (deciding > 0) {
        if (auto w = detail::loss_witness(steps_by_depth[deciding], cfg.epsilon)) {
            verdict.witness_q = w->first;
            verdict.witness_loss = w->second;
        }
    }
    return verdict;
}

// ---------------------------------------------------------------------------
// Square-root state reconstruction: Phi = sqrt(M) rho sqrt(M) with
// M = sum_j beta_j |Psi_j><Psi_j|, negative eigenvalues of M clamped to zero.

struct ApproxState {
    Matrix phi_hat;              // unnormalized reconstruction
    double trace_dist = 0.0;     // distance to rho_un after normalization
    double overlap = 0.0;        // Tr(M rho_un)
    double raw_deviation = 0.0;  // 1-norm of phi_hat - rho_un, unnormalized
    double clamp_magnitude = 0.0;
};

inline ApproxState approx_state(const Eigen::VectorXd& best_beta,
                                const std::vector<QnnSample>& samples,
                                const DensityMatrix& rho_un) {
    if (samples.empty()) throw std::invalid_argument("approx_state: empty sample list");
    if (best_beta.size() != static_cast<Eigen::Index>(samples.size()))
        throw std::invalid_argument("approx_state: beta size mismatch");
    const int n = samples.front().state.n();
    if (rho_un.n() != n) throw std::invalid_argument("approx_state: qubit count mismatch");
    const Eigen::Index d = dim_of(n);

    Matrix m = Matrix::Zero(d, d);
    for (Eigen::Index j = 0; j < best_beta.size(); ++j) {
        const Vector& v = samples[static_cast<std::size_t>(j)].state.amplitudes();
        m += best_beta(j) * (v * v.adjoint());
    }

    ApproxState out;
    out.overlap = (m * rho_un.matrix()).trace().real();

    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    Eigen::VectorXd lam = es.eigenvalues();
    out.clamp_magnitude = std::max(0.0, -lam.minCoeff());
    for (Eigen::Index i = 0; i < lam.size(); ++i) lam(i) = std::sqrt(std::max(0.0, lam(i)));
    const Matrix root = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();

    Matrix phi = root * rho_un.matrix() * root;
    out.phi_hat = 0.5 * (phi + phi.adjoint());  // wash out round-off skew

    const Matrix diff = out.phi_hat - rho_un.matrix();
    const Eigen::SelfAdjointEigenSolver<Matrix> dv(diff, Eigen::EigenvaluesOnly);
    out.raw_deviation = dv.eigenvalues().cwiseAbs().sum();

    const double tr = out.phi_hat.trace().real();
    if (tr > 1e-12) {
        out.trace_dist = trace_distance(DensityMatrix(n, out.phi_hat / tr), rho_un);
    } else {
        out.trace_dist = 1.0;  // nothing survived the measurement
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reporting.

inline std::string ssap_report(const ScpVerdict& v, int n) {
    const double log2n = std::log2(static_cast<double>(n));
    std::ostringstream os;
    os << "limited-structured complexity report (n=" << n << ", epsilon=" << v.epsilon << ")\n";
    os << "outcome: " << outcome_name(v.outcome) << "\n";
    if (v.outcome == Outcome::Yes) {
        os << "minimal depth: R_min = " << *v.r_min << "\n";
        os << "complexity chain: C_eps <= C_lim <= L*R_min = " << v.width << "*" << *v.r_min
           << " = " << *v.complexity_bound << " two-qubit gates\n";
        os << "structured approximation at depth " << *v.r_min
           << (static_cast<double>(*v.r_min) < log2n ? " < " : " >= ") << "log2(n) = " << log2n
           << "\n";
    } else if (v.outcome == Outcome::No) {
        os << "complexity bound: C_lim > L*log2(n) = " << v.width * log2n
           << " two-qubit gates\n";
        if (v.witness_q) {
            os << "witness distribution keeps every probed loss above " << v.epsilon
               << " (worst " << v.witness_loss << ")\n";
        }
    } else {
        os << "budget exhausted before a decision; probed depths:";
        for (const auto& p : v.probes) os << " " << p.depth;
        os << "\n";
    }
    for (const auto& p : v.probes) {
        os << "  depth " << p.depth << ": " << (p.accepted ? "accepted" : "rejected")
           << ", best loss " << p.best_value << ", final loss " << p.final_value << " (T="
           << p.t_used << ", N=" << p.n_used << ")\n";
    }
    os << "note: acceptance tests the final optimizer iterate only\n";
    return os.str();
}

inline nlohmann::json verdict_to_json(const ScpVerdict& v) {
    nlohmann::json j;
    j["outcome"] = outcome_name(v.outcome);
    j["r_min"] = v.r_min ? nlohmann::json(*v.r_min) : nlohmann::json(nullptr);
    j["complexity_bound"] =
        v.complexity_bound ? nlohmann::json(*v.complexity_bound) : nlohmann::json(nullptr);
    j["epsilon"] = v.epsilon;
    j["probes"] = nlohmann::json::array();
    for (const auto& p : v.probes) {
        j["probes"].push_back({{"depth", p.depth},
                               {"accepted", p.accepted},
                               {"best_value", p.best_value},
                               {"final_value", p.final_value},
                               {"T_used", p.t_used},
                               {"N_used", p.n_used},
                               {"seed", p.seed}});
    }
    j["caps"] = {{"N", v.n_cap}, {"T", v.t_cap}};
    j["mode"] = estimator_mode_name(v.mode);
    j["width"] = v.width;
    j["layout"] = layout_name(v.layout);
    if (v.witness_q) {
        j["witness"] = {{"q", std::vector<double>(v.witness_q->data(),
                                                  v.witness_q->data() + v.witness_q->size())},
                        {"min_loss", v.witness_loss}};
    }
    return j;
}

}  // namespace qsc
