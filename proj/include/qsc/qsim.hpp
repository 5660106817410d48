#pragma once

// Dense n-qubit simulation: state vectors, density matrices, Kraus channels,
// spectral functionals, Haar sampling, and the QSTATE1 file format. This is
// the exact oracle the rest of the library is validated against, so the code
// favors directness over cleverness.
//
// Bit convention: qubit 0 is the most significant bit of a basis index, so
// |q0 q1 ... q_{n-1}> has index q0*2^{n-1} + ... + q_{n-1}. All modules share
// this convention.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "qsc/numeric.hpp"
#include "qsc/prng.hpp"

namespace qsc {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline Eigen::Index dim_of(int n) { return Eigen::Index{1} << n; }

// Largest total Hilbert dimension dense routines will allocate (covers
// multi-copy registers too). Overridable via the QSC_DIM_CAP environment
// variable; read once per process.
inline Eigen::Index dim_cap() {
    static const Eigen::Index cap = [] {
        if (const char* s = std::getenv("QSC_DIM_CAP")) {
            const long v = std::strtol(s, nullptr, 10);
            if (v >= 2) return static_cast<Eigen::Index>(v);
        }
        return Eigen::Index{4096};
    }();
    return cap;
}

// Kronecker product, row-major qubit ordering (A acts on the more significant
// block).
inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

class StateVector {
public:
    StateVector(int n, Vector amplitudes) : n_(n), amps_(std::move(amplitudes)) {
        if (n < 1) throw std::invalid_argument("StateVector: need n >= 1");
        if (amps_.size() != dim_of(n))
            throw std::invalid_argument("StateVector: amplitude count != 2^n");
        if (std::abs(amps_.squaredNorm() - 1.0) > 1e-10)
            throw std::invalid_argument("StateVector: not normalized");
    }

    static StateVector zero(int n) {
        Vector v = Vector::Zero(dim_of(n));
        v(0) = 1.0;
        return StateVector(n, std::move(v));
    }

    int n() const { return n_; }
    Eigen::Index dim() const { return amps_.size(); }
    const Vector& amplitudes() const { return amps_; }

private:
    int n_;
    Vector amps_;
};

class DensityMatrix {
public:
    DensityMatrix(int n, Matrix m) : n_(n), m_(std::move(m)) {
        if (n < 1) throw std::invalid_argument("DensityMatrix: need n >= 1");
        const Eigen::Index d = dim_of(n);
        if (m_.rows() != d || m_.cols() != d)
            throw std::invalid_argument("DensityMatrix: shape != 2^n x 2^n");
        if ((m_ - m_.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
            throw std::invalid_argument("DensityMatrix: not Hermitian");
        if (std::abs(m_.trace().real() - 1.0) > 1e-10 || std::abs(m_.trace().imag()) > 1e-10)
            throw std::invalid_argument("DensityMatrix: trace != 1");
        Eigen::SelfAdjointEigenSolver<Matrix> es(m_, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-9)
            throw std::invalid_argument("DensityMatrix: negative eigenvalue beyond tolerance");
    }

    static DensityMatrix pure(const StateVector& psi) {
        return DensityMatrix(psi.n(), psi.amplitudes() * psi.amplitudes().adjoint());
    }

    static DensityMatrix maximally_mixed(int n) {
        const Eigen::Index d = dim_of(n);
        return DensityMatrix(n, Matrix::Identity(d, d) / static_cast<double>(d));
    }

    int n() const { return n_; }
    Eigen::Index dim() const { return m_.rows(); }
    const Matrix& matrix() const { return m_; }

private:
    int n_;
    Matrix m_;
};

struct KrausChannel {
    int n_targets = 0;
    std::vector<Matrix> kraus_ops;

    // Max deviation of sum K^dag K from identity.
    double completeness_defect() const {
        if (kraus_ops.empty()) return 1.0;
        const Eigen::Index d = kraus_ops.front().rows();
        Matrix acc = Matrix::Zero(d, d);
        for (const auto& k : kraus_ops) acc += k.adjoint() * k;
        return (acc - Matrix::Identity(d, d)).cwiseAbs().maxCoeff();
    }
};

struct PauliString {
    int n = 0;
    std::string letters;  // over {I, X, Y, Z}, one per qubit

    PauliString(int n_, std::string letters_) : n(n_), letters(std::move(letters_)) {
        if (static_cast<int>(letters.size()) != n)
            throw std::invalid_argument("PauliString: letter count != n");
        for (char c : letters)
            if (c != 'I' && c != 'X' && c != 'Y' && c != 'Z')
                throw std::invalid_argument("PauliString: invalid letter");
    }

    int weight() const {
        return static_cast<int>(std::count_if(letters.begin(), letters.end(),
                                              [](char c) { return c != 'I'; }));
    }

    static const Matrix& single(char c) {
        static const Matrix i = (Matrix(2, 2) << 1, 0, 0, 1).finished();
        static const Matrix x = (Matrix(2, 2) << 0, 1, 1, 0).finished();
        static const Matrix y = (Matrix(2, 2) << 0, cplx(0, -1), cplx(0, 1), 0).finished();
        static const Matrix z = (Matrix(2, 2) << 1, 0, 0, -1).finished();
        switch (c) {
            case 'I': return i;
            case 'X': return x;
            case 'Y': return y;
            default: return z;
        }
    }

    Matrix to_matrix() const {
        Matrix m = single(letters[0]);
        for (int q = 1; q < n; ++q) m = kron(m, single(letters[q]));
        return m;
    }
};

namespace detail {

inline void check_targets(int n, const std::vector<int>& targets) {
    if (targets.empty()) throw std::invalid_argument("targets: empty");
    for (int t : targets)
        if (t < 0 || t >= n) throw std::invalid_argument("targets: index out of range");
    for (std::size_t i = 0; i < targets.size(); ++i)
        for (std::size_t j = i + 1; j < targets.size(); ++j)
            if (targets[i] == targets[j]) throw std::invalid_argument("targets: duplicate index");
}

// In-place action of `gate` on the target qubits of vector v. The first
// target supplies the most significant bit of the gate's index.
inline void apply_gate_vec(Vector& v, const Matrix& gate, const std::vector<int>& targets, int n) {
    const int k = static_cast<int>(targets.size());
    const Eigen::Index gd = Eigen::Index{1} << k;
    std::vector<Eigen::Index> bit(k);
    Eigen::Index tmask = 0;
    for (int j = 0; j < k; ++j) {
        bit[j] = Eigen::Index{1} << (n - 1 - targets[j]);
        tmask |= bit[j];
    }
    const Eigen::Index d = v.size();
    std::vector<cplx> in(gd), out(gd);
    std::vector<Eigen::Index> idx(gd);
    for (Eigen::Index base = 0; base < d; ++base) {
        if (base & tmask) continue;
        for (Eigen::Index a = 0; a < gd; ++a) {
            Eigen::Index ix = base;
            for (int j = 0; j < k; ++j)
                if (a & (Eigen::Index{1} << (k - 1 - j))) ix |= bit[j];
            idx[a] = ix;
            in[a] = v(ix);
        }
        for (Eigen::Index a = 0; a < gd; ++a) {
            cplx acc = 0.0;
            for (Eigen::Index b = 0; b < gd; ++b) acc += gate(a, b) * in[b];
            out[a] = acc;
        }
        for (Eigen::Index a = 0; a < gd; ++a) v(idx[a]) = out[a];
    }
}

// rho -> A rho A^dag on the target qubits, without assuming A unitary.
inline Matrix conjugate_on_targets(const Matrix& rho, const Matrix& a,
                                   const std::vector<int>& targets, int n) {
    const Eigen::Index d = rho.rows();
    Matrix m1(d, d);
    Vector col(d);
    for (Eigen::Index j = 0; j < d; ++j) {  // A * rho, column by column
        col = rho.col(j);
        apply_gate_vec(col, a, targets, n);
        m1.col(j) = col;
    }
    const Matrix ac = a.conjugate();
    Matrix out(d, d);
    Vector row(d);
    for (Eigen::Index i = 0; i < d; ++i) {  // (A rho) * A^dag, row by row
        row = m1.row(i).transpose();
        apply_gate_vec(row, ac, targets, n);
        out.row(i) = row.transpose();
    }
    return out;
}

inline void check_unitary(const Matrix& gate) {
    const Eigen::Index d = gate.rows();
    if (gate.cols() != d) throw std::invalid_argument("gate: not square");
    if ((gate.adjoint() * gate - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() > 1e-9)
        throw std::invalid_argument("gate: not unitary within 1e-9");
}

}  // namespace detail

inline StateVector apply_unitary(const StateVector& psi, const Matrix& gate,
                                 const std::vector<int>& targets) {
    detail::check_targets(psi.n(), targets);
    detail::check_unitary(gate);
    if (gate.rows() != (Eigen::Index{1} << targets.size()))
        throw std::invalid_argument("gate: dimension != 2^targets");
    Vector v = psi.amplitudes();
    detail::apply_gate_vec(v, gate, targets, psi.n());
    return StateVector(psi.n(), std::move(v));
}

inline DensityMatrix apply_unitary(const DensityMatrix& rho, const Matrix& gate,
                                   const std::vector<int>& targets) {
    detail::check_targets(rho.n(), targets);
    detail::check_unitary(gate);
    if (gate.rows() != (Eigen::Index{1} << targets.size()))
        throw std::invalid_argument("gate: dimension != 2^targets");
    return DensityMatrix(rho.n(), detail::conjugate_on_targets(rho.matrix(), gate, targets, rho.n()));
}

inline DensityMatrix apply_channel(const DensityMatrix& rho, const KrausChannel& channel,
                                   const std::vector<int>& targets) {
    detail::check_targets(rho.n(), targets);
    if (static_cast<int>(targets.size()) != channel.n_targets)
        throw std::invalid_argument("apply_channel: target count != channel arity");
    if (channel.completeness_defect() > 1e-9)
        throw std::invalid_argument("apply_channel: channel is not trace preserving");
    const Eigen::Index d = rho.dim();
    Matrix acc = Matrix::Zero(d, d);
    for (const auto& k : channel.kraus_ops)
        acc += detail::conjugate_on_targets(rho.matrix(), k, targets, rho.n());
    return DensityMatrix(rho.n(), std::move(acc));
}

inline double fidelity_pure(const DensityMatrix& rho, const StateVector& psi) {
    if (rho.n() != psi.n()) throw std::invalid_argument("fidelity_pure: qubit count mismatch");
    const cplx v = psi.amplitudes().adjoint() * rho.matrix() * psi.amplitudes();
    return v.real();
}

inline double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
    if (a.n() != b.n()) throw std::invalid_argument("trace_distance: qubit count mismatch");
    Eigen::SelfAdjointEigenSolver<Matrix> es(a.matrix() - b.matrix(), Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

inline double trace_power_exact(const DensityMatrix& rho, int l) {
    if (l < 1) throw std::invalid_argument("trace_power_exact: need l >= 1");
    if (l == 1) return 1.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(rho.matrix(), Eigen::EigenvaluesOnly);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        const double lam = std::max(0.0, es.eigenvalues()(i));
        acc += std::pow(lam, l);
    }
    return acc;
}

inline double purity(const DensityMatrix& rho) { return trace_power_exact(rho, 2); }

// Entropy in nats, 0 ln 0 := 0.
inline double von_neumann_entropy_exact(const DensityMatrix& rho) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(rho.matrix(), Eigen::EigenvaluesOnly);
    double s = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        const double lam = es.eigenvalues()(i);
        if (lam > 0.0) s -= lam * std::log(lam);
    }
    return s;
}

// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases of
// the R diagonal pushed into Q (Mezzadri's correction).
inline Matrix haar_random_unitary(Eigen::Index dim, RngStream& rng) {
    if (dim < 2) throw std::invalid_argument("haar_random_unitary: need dim >= 2");
    Matrix a(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i)
        for (Eigen::Index j = 0; j < dim; ++j)
            a(i, j) = cplx(rng.normal(), rng.normal()) / std::sqrt(2.0);
    Eigen::HouseholderQR<Matrix> qr(a);
    Matrix q = qr.householderQ();
    for (Eigen::Index j = 0; j < dim; ++j) {
        const cplx r = qr.matrixQR()(j, j);
        const double mag = std::abs(r);
        const cplx phase = mag > 0.0 ? r / mag : cplx(1.0, 0.0);
        q.col(j) *= phase;
    }
    return q;
}

// Reduced state on `keep` (ascending output order).
inline DensityMatrix partial_trace(const DensityMatrix& rho, std::vector<int> keep) {
    detail::check_targets(rho.n(), keep);
    std::sort(keep.begin(), keep.end());
    const int n = rho.n();
    const int k = static_cast<int>(keep.size());
    const int m = n - k;
    std::vector<bool> kept(n, false);
    for (int q : keep) kept[q] = true;
    std::vector<Eigen::Index> keep_bit(k), trace_bit(m);
    for (int a = 0; a < k; ++a) keep_bit[a] = Eigen::Index{1} << (n - 1 - keep[a]);
    int ti = 0;
    for (int q = 0; q < n; ++q)
        if (!kept[q]) trace_bit[ti++] = Eigen::Index{1} << (n - 1 - q);
    const Eigen::Index dk = Eigen::Index{1} << k;
    const Eigen::Index dm = Eigen::Index{1} << m;
    auto embed = [&](Eigen::Index kept_idx, Eigen::Index traced_idx) {
        Eigen::Index ix = 0;
        for (int a = 0; a < k; ++a)
            if (kept_idx & (Eigen::Index{1} << (k - 1 - a))) ix |= keep_bit[a];
        for (int b = 0; b < m; ++b)
            if (traced_idx & (Eigen::Index{1} << (m - 1 - b))) ix |= trace_bit[b];
        return ix;
    };
    Matrix out = Matrix::Zero(dk, dk);
    for (Eigen::Index i = 0; i < dk; ++i)
        for (Eigen::Index j = 0; j < dk; ++j)
            for (Eigen::Index e = 0; e < dm; ++e)
                out(i, j) += rho.matrix()(embed(i, e), embed(j, e));
    return DensityMatrix(k, std::move(out));
}

// ---------------------------------------------------------------------------
// QSTATE1 file format: magic "QSTATE1\0", u32 LE qubit count, u8 kind
// (0 = state vector, 1 = density matrix), then row-major (re, im) f64 LE
// pairs. Round-trips bit-exactly.

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(buf, 4);
}

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char buf[4];
    is.read(reinterpret_cast<char*>(buf), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
    return v;
}

inline void put_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    os.write(buf, 8);
}

inline double get_f64(std::istream& is) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

constexpr char kQstateMagic[8] = {'Q', 'S', 'T', 'A', 'T', 'E', '1', '\0'};

}  // namespace detail

inline void save_qstate(const std::string& path, const StateVector& psi) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("save_qstate: cannot open " + path);
    os.write(detail::kQstateMagic, 8);
    detail::put_u32(os, static_cast<std::uint32_t>(psi.n()));
    os.put(static_cast<char>(0));
    for (Eigen::Index i = 0; i < psi.dim(); ++i) {
        detail::put_f64(os, psi.amplitudes()(i).real());
        detail::put_f64(os, psi.amplitudes()(i).imag());
    }
    if (!os) throw io_error("save_qstate: write failed for " + path);
}

inline void save_qstate(const std::string& path, const DensityMatrix& rho) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("save_qstate: cannot open " + path);
    os.write(detail::kQstateMagic, 8);
    detail::put_u32(os, static_cast<std::uint32_t>(rho.n()));
    os.put(static_cast<char>(1));
    for (Eigen::Index i = 0; i < rho.dim(); ++i)
        for (Eigen::Index j = 0; j < rho.dim(); ++j) {
            detail::put_f64(os, rho.matrix()(i, j).real());
            detail::put_f64(os, rho.matrix()(i, j).imag());
        }
    if (!os) throw io_error("save_qstate: write failed for " + path);
}

inline std::variant<StateVector, DensityMatrix> load_qstate(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("load_qstate: cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, detail::kQstateMagic, 8) != 0)
        throw io_error("load_qstate: bad magic in " + path);
    const int n = static_cast<int>(detail::get_u32(is));
    const int kind = is.get();
    if (n < 1 || n > 30) throw io_error("load_qstate: implausible qubit count");
    const Eigen::Index d = dim_of(n);
    if (kind == 0) {
        Vector v(d);
        for (Eigen::Index i = 0; i < d; ++i) {
            const double re = detail::get_f64(is);
            const double im = detail::get_f64(is);
            v(i) = cplx(re, im);
        }
        if (!is) throw io_error("load_qstate: truncated file " + path);
        return StateVector(n, std::move(v));
    }
    if (kind == 1) {
        Matrix m(d, d);
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j) {
                const double re = detail::get_f64(is);
                const double im = detail::get_f64(is);
                m(i, j) = cplx(re, im);
            }
        if (!is) throw io_error("load_qstate: truncated file " + path);
        return DensityMatrix(n, std::move(m));
    }
    throw io_error("load_qstate: unknown kind byte");
}

}  // namespace qsc
