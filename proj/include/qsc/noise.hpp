#pragma once

// Closed-form noise analytics: the F metric of a channel, the depth-dependent
// purity floor eta(R) it implies, the matching Monte-Carlo overlap check, the
// Pauli-path rank decay bound, and the tolerable-noise threshold.

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsc/qsim.hpp"

namespace qsc {

enum class ChannelKind { Identity, LocalDepolarizing, GlobalDepolarizing, BitFlip, Custom };

inline std::string channel_kind_name(ChannelKind k) {
    switch (k) {
        case ChannelKind::Identity: return "identity";
        case ChannelKind::LocalDepolarizing: return "local_depolarizing";
        case ChannelKind::GlobalDepolarizing: return "global_depolarizing";
        case ChannelKind::BitFlip: return "bit_flip";
        default: return "custom";
    }
}

inline ChannelKind channel_kind_from_name(const std::string& s) {
    if (s == "identity") return ChannelKind::Identity;
    if (s == "local_depolarizing") return ChannelKind::LocalDepolarizing;
    if (s == "global_depolarizing") return ChannelKind::GlobalDepolarizing;
    if (s == "bit_flip") return ChannelKind::BitFlip;
    if (s == "custom") return ChannelKind::Custom;
    throw std::invalid_argument("unknown channel kind: " + s);
}

struct ChannelSpec {
    ChannelKind kind = ChannelKind::Identity;
    double strength = 0.0;
    std::optional<KrausChannel> custom_kraus;

    void validate(int n) const {
        if (!(strength >= 0.0 && strength <= 1.0))
            throw std::invalid_argument("ChannelSpec: strength outside [0,1]");
        if (kind == ChannelKind::Custom) {
            if (!custom_kraus) throw std::invalid_argument("ChannelSpec: custom without Kraus set");
            if (custom_kraus->n_targets != n)
                throw std::invalid_argument("ChannelSpec: custom Kraus arity != n");
            if (custom_kraus->completeness_defect() > 1e-9)
                throw std::invalid_argument("ChannelSpec: custom Kraus set incomplete");
        }
    }
};

struct PurityBoundReport {
    double f = 0.0;
    Eigen::Index d = 0;
    int depth = 1;
    double eta = 0.0;
};

// Single-qubit Kraus set for the local channel kinds.
inline KrausChannel one_qubit_kraus(const ChannelSpec& spec) {
    KrausChannel ch;
    ch.n_targets = 1;
    const double g = spec.strength;
    switch (spec.kind) {
        case ChannelKind::Identity:
            ch.kraus_ops.push_back(PauliString::single('I'));
            break;
        case ChannelKind::LocalDepolarizing:
            ch.kraus_ops.push_back(std::sqrt(1.0 - 0.75 * g) * PauliString::single('I'));
            for (char c : {'X', 'Y', 'Z'})
                ch.kraus_ops.push_back(std::sqrt(0.25 * g) * PauliString::single(c));
            break;
        case ChannelKind::BitFlip:
            ch.kraus_ops.push_back(std::sqrt(1.0 - g) * PauliString::single('I'));
            ch.kraus_ops.push_back(std::sqrt(g) * PauliString::single('X'));
            break;
        default:
            throw std::invalid_argument("one_qubit_kraus: channel is not single-qubit local");
    }
    return ch;
}

// Apply the channel to every qubit (local kinds) or to the whole register
// (global / custom kinds).
inline DensityMatrix apply_noise(const DensityMatrix& rho, const ChannelSpec& spec) {
    const int n = rho.n();
    spec.validate(n);
    switch (spec.kind) {
        case ChannelKind::Identity:
            return rho;
        case ChannelKind::LocalDepolarizing:
        case ChannelKind::BitFlip: {
            const KrausChannel k1 = one_qubit_kraus(spec);
            DensityMatrix out = rho;
            for (int q = 0; q < n; ++q) out = apply_channel(out, k1, {q});
            return out;
        }
        case ChannelKind::GlobalDepolarizing: {
            const double g = spec.strength;
            const Eigen::Index d = rho.dim();
            Matrix m = (1.0 - g) * rho.matrix() +
                       (g / static_cast<double>(d)) * Matrix::Identity(d, d);
            return DensityMatrix(n, std::move(m));
        }
        default: {
            std::vector<int> all(n);
            for (int q = 0; q < n; ++q) all[q] = q;
            return apply_channel(rho, *spec.custom_kraus, all);
        }
    }
}

// F = sum_l |Tr K_l|^2 for the full n-qubit channel. Local kinds factor into
// a product of per-qubit sums because the composite Kraus set is the tensor
// product of the per-qubit ones.
inline double channel_f_metric(const ChannelSpec& spec, int n) {
    if (n < 1) throw std::invalid_argument("channel_f_metric: need n >= 1");
    spec.validate(n);
    const double d = static_cast<double>(dim_of(n));
    switch (spec.kind) {
        case ChannelKind::Identity:
            return d * d;
        case ChannelKind::LocalDepolarizing:
            return std::pow(4.0 - 3.0 * spec.strength, n);
        case ChannelKind::BitFlip:
            return std::pow(4.0 - 4.0 * spec.strength, n);
        case ChannelKind::GlobalDepolarizing:
            return (1.0 - spec.strength) * d * d + spec.strength;
        default: {
            double acc = 0.0;
            for (const auto& k : spec.custom_kraus->kraus_ops) acc += std::norm(k.trace());
            return acc;
        }
    }
}

// eta(R) = ((F-1)/(d^2-1))^{R-1} * (F-1)/(d(d+1)) + 1/d.
inline double purity_lower_bound(double f, int n, int depth) {
    if (depth < 1) throw std::invalid_argument("purity_lower_bound: need depth >= 1");
    if (f < 0.0) throw std::invalid_argument("purity_lower_bound: need F >= 0");
    const double d = static_cast<double>(dim_of(n));
    if (f > d * d * (1.0 + 1e-12))
        throw std::invalid_argument("purity_lower_bound: F exceeds d^2");
    const double ratio = (f - 1.0) / (d * d - 1.0);
    return std::pow(ratio, depth - 1) * (f - 1.0) / (d * (d + 1.0)) + 1.0 / d;
}

// Largest depth whose purity floor still clears eta_target; nullopt when the
// floor never drops below the target within the scan cap (e.g. F = d^2).
// Integer scan instead of inverting the geometric term: robust for any F.
inline std::optional<int> max_depth_for_purity(double f, int n, double eta_target,
                                               int scan_cap = 10000) {
    const double d = static_cast<double>(dim_of(n));
    if (!(eta_target > 1.0 / d && eta_target < 1.0))
        throw std::invalid_argument("max_depth_for_purity: eta_target outside (1/d, 1)");
    if (!(f > 1.0)) throw std::invalid_argument("max_depth_for_purity: need F > 1");
    int best = 0;
    for (int r = 1; r <= scan_cap; ++r) {
        if (purity_lower_bound(f, n, r) >= eta_target)
            best = r;
        else
            return best;
    }
    return std::nullopt;
}

// Tr(rho_noisy rho_clean) over random full-dimension unitary layers, both
// trajectories driven by the same sampled unitaries. The mean estimates
// eta(R) for the channel. Trials use split child streams keyed by index, so
// the result is independent of evaluation order.
inline std::pair<double, double> monte_carlo_overlap(const ChannelSpec& spec, int n, int depth,
                                                     int trials, RngStream& rng) {
    if (trials < 30) throw std::invalid_argument("monte_carlo_overlap: need trials >= 30");
    if (depth < 1) throw std::invalid_argument("monte_carlo_overlap: need depth >= 1");
    if (dim_of(n) > dim_cap())
        throw std::length_error("monte_carlo_overlap: dimension exceeds cap");
    spec.validate(n);
    std::vector<int> all(n);
    for (int q = 0; q < n; ++q) all[q] = q;
    std::vector<double> overlaps(trials);
    for (int t = 0; t < trials; ++t) {
        RngStream child = rng.split(static_cast<std::uint64_t>(t));
        DensityMatrix noisy = DensityMatrix::pure(StateVector::zero(n));
        StateVector clean = StateVector::zero(n);
        for (int r = 0; r < depth; ++r) {
            const Matrix u = haar_random_unitary(dim_of(n), child);
            noisy = apply_noise(apply_unitary(noisy, u, all), spec);
            clean = apply_unitary(clean, u, all);
        }
        overlaps[t] = fidelity_pure(noisy, clean);
    }
    return mean_stderr(overlaps);
}

// r_max <= (1 - 0.75 gamma)^{n R} * R.
inline double pauli_path_rank_bound(double gamma, int n, int depth) {
    if (!(gamma >= 0.0 && gamma <= 1.0))
        throw std::invalid_argument("pauli_path_rank_bound: gamma outside [0,1]");
    if (depth < 1) throw std::invalid_argument("pauli_path_rank_bound: need depth >= 1");
    return std::pow(1.0 - 0.75 * gamma, static_cast<double>(n) * depth) * depth;
}

// Largest local noise rate compatible with additive error epsilon.
inline double noise_strength_threshold(double epsilon) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("noise_strength_threshold: need eps > 0");
    return -0.5 * std::expm1(-epsilon);
}

inline PurityBoundReport purity_report(const ChannelSpec& spec, int n, int depth) {
    PurityBoundReport rep;
    rep.f = channel_f_metric(spec, n);
    rep.d = dim_of(n);
    rep.depth = depth;
    rep.eta = purity_lower_bound(rep.f, n, depth);
    return rep;
}

}  // namespace qsc
