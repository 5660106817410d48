#pragma once

// Classical shadows of simulated states: snapshot collection under a random
// global unitary ensemble, the (2^n+1) rho - I inversion, and fidelity/Gram
// estimators. An exact mode bypasses measurement entirely for oracles and
// tests; the StateSource wrapper keeps "unknown state" access honest in
// shadow mode.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qsc/ansatz.hpp"
#include "qsc/qsim.hpp"

namespace qsc {

enum class ShadowEnsemble { HaarGlobal, CliffordGlobal };
enum class EstimatorMode { Exact, Shadow };

inline std::string ensemble_name(ShadowEnsemble e) {
    return e == ShadowEnsemble::HaarGlobal ? "haar_global" : "clifford_global";
}

inline std::string estimator_mode_name(EstimatorMode m) {
    return m == EstimatorMode::Exact ? "exact" : "shadow";
}

struct ShadowSnapshot {
    std::uint64_t unitary_seed = 0;
    std::uint64_t outcome = 0;  // measured basis index, qubit 0 = high bit
};

struct ShadowSet {
    int n = 0;
    ShadowEnsemble ensemble = ShadowEnsemble::HaarGlobal;
    std::uint64_t master_seed = 0;
    std::vector<ShadowSnapshot> snapshots;
};

struct EstimatorConfig {
    EstimatorMode mode = EstimatorMode::Exact;
    int num_snapshots = 1000;
    int mom_batches = 1;  // 1 = plain mean; >1 = median of means

    void validate() const {
        if (mom_batches < 1) throw std::invalid_argument("EstimatorConfig: mom_batches < 1");
        if (mode == EstimatorMode::Shadow && num_snapshots < mom_batches)
            throw std::invalid_argument("EstimatorConfig: fewer snapshots than batches");
    }
};

namespace detail {

inline Matrix embed_single(int n, int q, const Matrix& g) {
    Matrix m = Matrix::Identity(1, 1);
    for (int i = 0; i < n; ++i) m = kron(m, i == q ? g : Matrix::Identity(2, 2));
    return m;
}

inline Matrix cnot_matrix(int n, int control, int target) {
    const Eigen::Index d = dim_of(n);
    const Eigen::Index cb = Eigen::Index{1} << (n - 1 - control);
    const Eigen::Index tb = Eigen::Index{1} << (n - 1 - target);
    Matrix m = Matrix::Zero(d, d);
    for (Eigen::Index src = 0; src < d; ++src)
        m((src & cb) ? (src ^ tb) : src, src) = 1.0;
    return m;
}

}  // namespace detail

// Rebuild the snapshot unitary from its seed. CliffordGlobal composes
// 20 n^2 uniformly random {H_i, S_i, CNOT_ij} generators — an approximate
// stand-in for exact uniform Clifford sampling; anything consuming it should
// surface that caveat in metadata.
inline Matrix snapshot_unitary(int n, ShadowEnsemble ensemble, std::uint64_t seed) {
    RngStream rng(seed);
    if (ensemble == ShadowEnsemble::HaarGlobal) return haar_random_unitary(dim_of(n), rng);
    static const Matrix h =
        (Matrix(2, 2) << 1, 1, 1, -1).finished() / std::sqrt(2.0);
    static const Matrix s = (Matrix(2, 2) << 1, 0, 0, cplx(0, 1)).finished();
    const int steps = 20 * n * n;
    const std::uint64_t n_u = static_cast<std::uint64_t>(n);
    const std::uint64_t choices = 2 * n_u + n_u * (n_u - 1);
    Matrix u = Matrix::Identity(dim_of(n), dim_of(n));
    for (int k = 0; k < steps; ++k) {
        const std::uint64_t c = rng.integer(choices);
        Matrix gate;
        if (c < n_u) {
            gate = detail::embed_single(n, static_cast<int>(c), h);
        } else if (c < 2 * n_u) {
            gate = detail::embed_single(n, static_cast<int>(c - n_u), s);
        } else {
            std::uint64_t idx = c - 2 * n_u;
            const int control = static_cast<int>(idx / (n_u - 1));
            int target = static_cast<int>(idx % (n_u - 1));
            if (target >= control) ++target;
            gate = detail::cnot_matrix(n, control, target);
        }
        u = gate * u;
    }
    return u;
}

// Sample a measurement outcome from diag(U rho U^dag).
inline std::uint64_t sample_outcome(const DensityMatrix& rho, const Matrix& u, RngStream& rng) {
    const Eigen::Index d = rho.dim();
    if (u.rows() != d || u.cols() != d)
        throw std::invalid_argument("sample_outcome: unitary dimension mismatch");
    const double r = rng.uniform();
    double acc = 0.0;
    for (Eigen::Index b = 0; b < d; ++b) {
        acc += std::max(0.0, (u.row(b) * rho.matrix() * u.row(b).adjoint())(0).real());
        if (r < acc) return static_cast<std::uint64_t>(b);
    }
    return static_cast<std::uint64_t>(d - 1);  // guard against rounding shortfall
}

inline ShadowSet collect_shadows(const DensityMatrix& rho, int count, ShadowEnsemble ensemble,
                                 RngStream& rng) {
    if (count < 1) throw std::invalid_argument("collect_shadows: need count >= 1");
    ShadowSet set;
    set.n = rho.n();
    set.ensemble = ensemble;
    set.master_seed = rng.seed();
    set.snapshots.reserve(count);
    for (int k = 0; k < count; ++k) {
        RngStream child = rng.split(static_cast<std::uint64_t>(k));
        ShadowSnapshot snap;
        snap.unitary_seed = child.bits();
        const Matrix u = snapshot_unitary(set.n, ensemble, snap.unitary_seed);
        snap.outcome = sample_outcome(rho, u, child);
        set.snapshots.push_back(snap);
    }
    return set;
}

// Per-snapshot estimator rho_hat = (2^n+1) U^dag |b><b| U - I; unit trace.
inline Matrix invert_from_unitary(const Matrix& u, std::uint64_t outcome) {
    const Eigen::Index d = u.rows();
    const Vector v = u.row(static_cast<Eigen::Index>(outcome)).adjoint();
    return static_cast<double>(d + 1) * (v * v.adjoint()) - Matrix::Identity(d, d);
}

inline Matrix invert_channel(int n, ShadowEnsemble ensemble, const ShadowSnapshot& snap) {
    return invert_from_unitary(snapshot_unitary(n, ensemble, snap.unitary_seed), snap.outcome);
}

inline Matrix invert_channel(const ShadowSet& set, std::size_t k) {
    return invert_channel(set.n, set.ensemble, set.snapshots.at(k));
}

namespace detail {

// Median of batch means with round-robin batch assignment (snapshot k goes
// to batch k mod B). stderr is sd/sqrt(M) for B=1 and the spread of batch
// means for B>1.
inline std::pair<double, double> mom_aggregate(const std::vector<double>& xs, int batches) {
    if (batches <= 1) return mean_stderr(xs);
    std::vector<std::vector<double>> groups(batches);
    for (std::size_t k = 0; k < xs.size(); ++k) groups[k % batches].push_back(xs[k]);
    std::vector<double> means;
    means.reserve(batches);
    for (const auto& g : groups)
        if (!g.empty()) means.push_back(pairwise_sum(g) / static_cast<double>(g.size()));
    std::sort(means.begin(), means.end());
    const std::size_t b = means.size();
    const double median =
        (b % 2 == 1) ? means[b / 2] : 0.5 * (means[b / 2 - 1] + means[b / 2]);
    auto [mean_of_means, spread] = mean_stderr(means);
    (void)mean_of_means;
    return {median, spread};
}

}  // namespace detail

// <psi| rho_hat_k |psi> aggregated over the set.
inline std::pair<double, double> estimate_fidelity(const ShadowSet& set, const StateVector& psi,
                                                   const EstimatorConfig& config) {
    config.validate();
    if (set.n != psi.n()) throw std::invalid_argument("estimate_fidelity: qubit count mismatch");
    if (set.snapshots.empty()) throw std::invalid_argument("estimate_fidelity: empty shadow set");
    const double d = static_cast<double>(dim_of(set.n));
    std::vector<double> xs(set.snapshots.size());
    for (std::size_t k = 0; k < set.snapshots.size(); ++k) {
        const Matrix u = snapshot_unitary(set.n, set.ensemble, set.snapshots[k].unitary_seed);
        const cplx amp =
            (u.row(static_cast<Eigen::Index>(set.snapshots[k].outcome)) * psi.amplitudes())(0);
        xs[k] = (d + 1.0) * std::norm(amp) - 1.0;
    }
    return detail::mom_aggregate(xs, config.mom_batches);
}

inline std::pair<double, double> estimate_fidelity(const DensityMatrix& rho,
                                                   const StateVector& psi,
                                                   const EstimatorConfig&) {
    return {fidelity_pure(rho, psi), 0.0};
}

// Access discipline for the unknown state: Exact mode exposes the density
// matrix, Shadow mode only measurement sampling.
class StateSource {
public:
    static StateSource exact(DensityMatrix rho) {
        return StateSource(EstimatorMode::Exact, std::move(rho));
    }
    static StateSource shadow(DensityMatrix rho) {
        return StateSource(EstimatorMode::Shadow, std::move(rho));
    }

    EstimatorMode mode() const { return mode_; }
    int n() const { return rho_.n(); }

    const DensityMatrix& exact_rho() const {
        if (mode_ != EstimatorMode::Exact)
            throw std::logic_error("StateSource: exact access denied in shadow mode");
        return rho_;
    }

    ShadowSet collect(int count, ShadowEnsemble ensemble, RngStream& rng) const {
        return collect_shadows(rho_, count, ensemble, rng);
    }

private:
    StateSource(EstimatorMode mode, DensityMatrix rho) : mode_(mode), rho_(std::move(rho)) {}

    EstimatorMode mode_;
    DensityMatrix rho_;
};

struct GramEstimate {
    Eigen::MatrixXd g;   // |<Psi_i|Psi_j>|^2
    Eigen::VectorXd f;   // <Psi_i|rho_un|Psi_i>
    EstimatorMode mode = EstimatorMode::Exact;
    int snapshots_per_state = 0;
};

// Exact mode computes overlaps directly (unit diagonal by construction).
// Shadow mode estimates row j from shadows of |Psi_j> and symmetrizes, and
// estimates every f_i from one shared shadow set of rho_un.
inline GramEstimate estimate_gram(const std::vector<QnnSample>& samples,
                                  const StateSource& rho_un, const EstimatorConfig& config,
                                  RngStream& rng,
                                  ShadowEnsemble ensemble = ShadowEnsemble::HaarGlobal) {
    config.validate();
    if (samples.empty()) throw std::invalid_argument("estimate_gram: empty sample list");
    const int n = samples.front().state.n();
    for (const auto& s : samples)
        if (s.state.n() != n) throw std::invalid_argument("estimate_gram: mixed qubit counts");
    if (rho_un.n() != n) throw std::invalid_argument("estimate_gram: source qubit mismatch");
    const int count = static_cast<int>(samples.size());

    GramEstimate out;
    out.mode = config.mode;
    out.g.resize(count, count);
    out.f.resize(count);

    if (config.mode == EstimatorMode::Exact) {
        for (int i = 0; i < count; ++i) {
            out.g(i, i) = 1.0;
            for (int j = i + 1; j < count; ++j) {
                const cplx amp =
                    (samples[i].state.amplitudes().adjoint() * samples[j].state.amplitudes())(0);
                out.g(i, j) = out.g(j, i) = std::norm(amp);
            }
            out.f(i) = fidelity_pure(rho_un.exact_rho(), samples[i].state);
        }
        return out;
    }

    out.snapshots_per_state = config.num_snapshots;
    Eigen::MatrixXd raw(count, count);
    for (int j = 0; j < count; ++j) {
        RngStream child = rng.split(static_cast<std::uint64_t>(j));
        const ShadowSet set =
            collect_shadows(DensityMatrix::pure(samples[j].state), config.num_snapshots,
                            ensemble, child);
        for (int i = 0; i < count; ++i)
            raw(i, j) = estimate_fidelity(set, samples[i].state, config).first;
    }
    out.g = 0.5 * (raw + raw.transpose());
    RngStream un_child = rng.split(0xfeedull);
    const ShadowSet un_set = rho_un.collect(config.num_snapshots, ensemble, un_child);
    for (int i = 0; i < count; ++i)
        out.f(i) = estimate_fidelity(un_set, samples[i].state, config).first;
    return out;
}

// ---------------------------------------------------------------------------
// ShadowSet serialization: "SHADOW1\0", u32 n, u8 ensemble, u64 count,
// u64 master seed, then (u64 unitary seed, u64 outcome) per snapshot.
// Unitaries rebuild bit-exactly from seeds.

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(buf, 8);
}

inline std::uint64_t get_u64(std::istream& is) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

constexpr char kShadowMagic[8] = {'S', 'H', 'A', 'D', 'O', 'W', '1', '\0'};

}  // namespace detail

inline void save_shadows(const std::string& path, const ShadowSet& set) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("save_shadows: cannot open " + path);
    os.write(detail::kShadowMagic, 8);
    detail::put_u32(os, static_cast<std::uint32_t>(set.n));
    os.put(set.ensemble == ShadowEnsemble::HaarGlobal ? char(0) : char(1));
    detail::put_u64(os, set.snapshots.size());
    detail::put_u64(os, set.master_seed);
    for (const auto& s : set.snapshots) {
        detail::put_u64(os, s.unitary_seed);
        detail::put_u64(os, s.outcome);
    }
    if (!os) throw io_error("save_shadows: write failed for " + path);
}

inline ShadowSet load_shadows(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("load_shadows: cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, detail::kShadowMagic, 8) != 0)
        throw io_error("load_shadows: bad magic in " + path);
    ShadowSet set;
    set.n = static_cast<int>(detail::get_u32(is));
    const int e = is.get();
    if (e != 0 && e != 1) throw io_error("load_shadows: unknown ensemble byte");
    set.ensemble = e == 0 ? ShadowEnsemble::HaarGlobal : ShadowEnsemble::CliffordGlobal;
    const std::uint64_t count = detail::get_u64(is);
    set.master_seed = detail::get_u64(is);
    if (set.n < 1 || set.n > 30 || count == 0)
        throw io_error("load_shadows: implausible header");
    set.snapshots.resize(count);
    for (auto& s : set.snapshots) {
        s.unitary_seed = detail::get_u64(is);
        s.outcome = detail::get_u64(is);
    }
    if (!is) throw io_error("load_shadows: truncated file " + path);
    return set;
}

}  // namespace qsc
