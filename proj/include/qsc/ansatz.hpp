#pragma once

// Layered two-qubit-gate circuit families on an open chain, their causal
// slice predicate, the 15-coefficient Pauli gate, and noiseless/noisy state
// preparation. Layouts are deterministic functions of (n, layout, depth), so
// circuits serialize as (layout, n, depth, coefficients) only.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <sstream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qsc/noise.hpp"
#include "qsc/qsim.hpp"

namespace qsc {

enum class Layout { Brickwork, Staircase };

inline std::string layout_name(Layout l) {
    return l == Layout::Brickwork ? "brickwork" : "staircase";
}

inline Layout layout_from_name(const std::string& s) {
    if (s == "brickwork") return Layout::Brickwork;
    if (s == "staircase") return Layout::Staircase;
    throw std::invalid_argument("unknown layout: " + s);
}

using GatePair = std::pair<int, int>;

struct Architecture {
    int n = 0;
    Layout layout = Layout::Brickwork;
    int depth = 0;                              // layer count R
    int width = 0;                              // gates per layer L
    std::vector<std::vector<GatePair>> layers;  // slot order is application order

    int gate_count() const { return depth * width; }
    int param_count() const { return 15 * gate_count(); }
};

// True iff the gate-slot graph connects all n qubits.
inline bool verify_causal_slice(int n, const std::vector<GatePair>& slots) {
    if (slots.empty()) throw std::invalid_argument("verify_causal_slice: empty slot list");
    std::vector<int> parent(n);
    for (int i = 0; i < n; ++i) parent[i] = i;
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& [a, b] : slots) {
        if (a < 0 || b < 0 || a >= n || b >= n || a == b)
            throw std::invalid_argument("verify_causal_slice: bad qubit pair");
        parent[find(a)] = find(b);
    }
    const int root = find(0);
    for (int q = 1; q < n; ++q)
        if (find(q) != root) return false;
    return true;
}

// Brickwork alternates nearest-neighbor rows {(0,1),(2,3),...} and
// {(1,2),(3,4),...} on the open chain; short even rows are padded with
// (0,1) gates so every layer holds exactly floor(n/2) slots. Staircase
// repeats the ordered chain {(0,1),(1,2),...,(n-2,n-1)}.
inline Architecture build_architecture(int n, Layout layout, int depth) {
    if (n < 2) throw std::invalid_argument("build_architecture: need n >= 2");
    if (depth < 1) throw std::invalid_argument("build_architecture: need depth >= 1");
    Architecture arch;
    arch.n = n;
    arch.layout = layout;
    arch.depth = depth;
    if (layout == Layout::Staircase) {
        arch.width = n - 1;
        std::vector<GatePair> chain;
        for (int q = 0; q + 1 < n; ++q) chain.emplace_back(q, q + 1);
        arch.layers.assign(depth, chain);
    } else {
        arch.width = n / 2;
        for (int r = 0; r < depth; ++r) {
            std::vector<GatePair> row;
            for (int q = (r % 2 == 0) ? 0 : 1; q + 1 < n; q += 2) row.emplace_back(q, q + 1);
            while (static_cast<int>(row.size()) < arch.width) row.emplace_back(0, 1);
            arch.layers.push_back(std::move(row));
        }
    }
    return arch;
}

struct ParameterSet {
    std::vector<double> values;  // 15 per gate, gates in layer-major slot order

    void validate(const Architecture& arch) const {
        if (static_cast<int>(values.size()) != arch.param_count())
            throw std::invalid_argument("ParameterSet: length != 15 * gate count");
        for (double v : values)
            if (!(v >= 0.0 && v < 2.0 * std::numbers::pi))
                throw std::invalid_argument("ParameterSet: coefficient outside [0, 2pi)");
    }
};

// The 15 non-identity Pauli pairs, lexicographic with I < X < Y < Z. This
// fixed order defines the meaning of each coefficient slot.
inline const std::array<std::pair<char, char>, 15>& pauli_pair_order() {
    static const std::array<std::pair<char, char>, 15> order = [] {
        std::array<std::pair<char, char>, 15> o{};
        const char letters[4] = {'I', 'X', 'Y', 'Z'};
        int k = 0;
        for (char a : letters)
            for (char b : letters)
                if (!(a == 'I' && b == 'I')) o[k++] = {a, b};
        return o;
    }();
    return order;
}

// exp(-i sum_k alpha_k P_{j1} x P_{j2}) over the 15 non-identity pairs.
inline Matrix two_qubit_gate(std::span<const double> coeffs) {
    if (coeffs.size() != 15) throw std::invalid_argument("two_qubit_gate: need 15 coefficients");
    Matrix h = Matrix::Zero(4, 4);
    const auto& order = pauli_pair_order();
    for (int k = 0; k < 15; ++k) {
        if (coeffs[k] == 0.0) continue;
        h += coeffs[k] *
             kron(PauliString::single(order[k].first), PauliString::single(order[k].second));
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    Vector phases(4);
    for (int i = 0; i < 4; ++i) phases(i) = std::exp(cplx(0.0, -es.eigenvalues()(i)));
    return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

namespace detail {

inline std::span<const double> gate_coeffs(const Architecture& arch, const ParameterSet& params,
                                           int layer, int slot) {
    const std::size_t off = 15 * (static_cast<std::size_t>(layer) * arch.width + slot);
    return std::span<const double>(params.values).subspan(off, 15);
}

}  // namespace detail

inline StateVector prepare_qnn_state(const Architecture& arch, const ParameterSet& params) {
    params.validate(arch);
    if (dim_of(arch.n) > dim_cap())
        throw std::length_error("prepare_qnn_state: dimension exceeds cap");
    StateVector psi = StateVector::zero(arch.n);
    for (int r = 0; r < arch.depth; ++r)
        for (int s = 0; s < arch.width; ++s) {
            const auto& [a, b] = arch.layers[r][s];
            psi = apply_unitary(psi, two_qubit_gate(detail::gate_coeffs(arch, params, r, s)),
                                {a, b});
        }
    return psi;
}

// Interleaves the channel after every unitary layer; local channel kinds act
// on each qubit, global kinds once on the register.
inline DensityMatrix prepare_noisy_state(const Architecture& arch, const ParameterSet& params,
                                         const ChannelSpec& channel) {
    params.validate(arch);
    channel.validate(arch.n);
    if (dim_of(arch.n) > dim_cap())
        throw std::length_error("prepare_noisy_state: dimension exceeds cap");
    DensityMatrix rho = DensityMatrix::pure(StateVector::zero(arch.n));
    for (int r = 0; r < arch.depth; ++r) {
        for (int s = 0; s < arch.width; ++s) {
            const auto& [a, b] = arch.layers[r][s];
            rho = apply_unitary(rho, two_qubit_gate(detail::gate_coeffs(arch, params, r, s)),
                                {a, b});
        }
        rho = apply_noise(rho, channel);
    }
    return rho;
}

struct QnnSample {
    ParameterSet params;
    StateVector state;
    int index = 0;
};

// N parameter sets uniform on [0, 2pi)^{15LR}, each prepared. Sample i uses
// the child stream keyed by i, so the set is order-independent and any
// sample can be regenerated in isolation.
inline std::vector<QnnSample> sample_qnn_set(const Architecture& arch, int count,
                                             RngStream& rng) {
    if (count < 1) throw std::invalid_argument("sample_qnn_set: need count >= 1");
    std::vector<QnnSample> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        RngStream child = rng.split(static_cast<std::uint64_t>(i));
        ParameterSet params;
        params.values.resize(arch.param_count());
        for (auto& v : params.values) v = 2.0 * std::numbers::pi * child.uniform();
        StateVector state = prepare_qnn_state(arch, params);
        out.push_back(QnnSample{std::move(params), std::move(state), i});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Text serialization. %.17g round-trips doubles exactly, so parse(serialize)
// is value-identical.

inline std::string serialize_circuit(const Architecture& arch, const ParameterSet& params) {
    params.validate(arch);
    std::ostringstream os;
    os << "qsc-circuit 1\n";
    os << "layout " << layout_name(arch.layout) << "\n";
    os << "n " << arch.n << "\n";
    os << "depth " << arch.depth << "\n";
    os << "width " << arch.width << "\n";
    os << "params " << params.values.size() << "\n";
    char buf[40];
    for (double v : params.values) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        os << buf << "\n";
    }
    return os.str();
}

inline std::pair<Architecture, ParameterSet> parse_circuit(const std::string& text) {
    std::istringstream is(text);
    std::string word;
    int version = 0;
    if (!(is >> word >> version) || word != "qsc-circuit" || version != 1)
        throw std::invalid_argument("parse_circuit: bad header");
    std::string layout_str;
    int n = 0, depth = 0, width = 0;
    std::size_t count = 0;
    auto expect = [&](const char* key) {
        if (!(is >> word) || word != key)
            throw std::invalid_argument(std::string("parse_circuit: expected ") + key);
    };
    expect("layout");
    is >> layout_str;
    expect("n");
    is >> n;
    expect("depth");
    is >> depth;
    expect("width");
    is >> width;
    expect("params");
    is >> count;
    if (!is) throw std::invalid_argument("parse_circuit: malformed header fields");
    Architecture arch = build_architecture(n, layout_from_name(layout_str), depth);
    if (arch.width != width) throw std::invalid_argument("parse_circuit: width mismatch");
    if (count != static_cast<std::size_t>(arch.param_count()))
        throw std::invalid_argument("parse_circuit: parameter count mismatch");
    ParameterSet params;
    params.values.resize(count);
    for (auto& v : params.values)
        if (!(is >> v)) throw std::invalid_argument("parse_circuit: truncated parameter list");
    params.validate(arch);
    return {std::move(arch), std::move(params)};
}

}  // namespace qsc
