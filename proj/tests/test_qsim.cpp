#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <variant>
#include <vector>

#include "qsc/qsim.hpp"

using namespace qsc;

namespace {

StateVector random_state(int n, RngStream& rng) {
    Vector v(dim_of(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = cplx(rng.normal(), rng.normal());
    v /= v.norm();
    return StateVector(n, std::move(v));
}

DensityMatrix random_mixed(int n, RngStream& rng, int terms = 3) {
    const auto w = rng.dirichlet_flat(terms);
    Matrix m = Matrix::Zero(dim_of(n), dim_of(n));
    for (int t = 0; t < terms; ++t) {
        const auto psi = random_state(n, rng);
        m += w[t] * (psi.amplitudes() * psi.amplitudes().adjoint());
    }
    return DensityMatrix(n, std::move(m));
}

KrausChannel depolarizing_1q(double gamma) {
    KrausChannel ch;
    ch.n_targets = 1;
    ch.kraus_ops.push_back(std::sqrt(1.0 - 0.75 * gamma) * PauliString::single('I'));
    for (char c : {'X', 'Y', 'Z'})
        ch.kraus_ops.push_back(std::sqrt(0.25 * gamma) * PauliString::single(c));
    return ch;
}

StateVector plus_state() {
    Vector v(2);
    v << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
    return StateVector(1, std::move(v));
}

StateVector minus_state() {
    Vector v(2);
    v << 1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0);
    return StateVector(1, std::move(v));
}

}  // namespace

TEST_CASE("qubit 0 is the most significant bit") {
    auto psi = apply_unitary(StateVector::zero(2), PauliString::single('X'), {0});
    REQUIRE(std::abs(psi.amplitudes()(2) - 1.0) < 1e-14);  // |10> has index 2
    auto phi = apply_unitary(StateVector::zero(2), PauliString::single('X'), {1});
    REQUIRE(std::abs(phi.amplitudes()(1) - 1.0) < 1e-14);  // |01> has index 1
}

TEST_CASE("construction validates invariants") {
    Vector bad(2);
    bad << 1.0, 1.0;
    REQUIRE_THROWS_AS(StateVector(1, bad), std::invalid_argument);

    Matrix nh(2, 2);
    nh << 0.5, cplx(0.1, 0.2), cplx(0.3, 0.1), 0.5;
    REQUIRE_THROWS_AS(DensityMatrix(1, nh), std::invalid_argument);

    Matrix tr2 = 2.0 * Matrix::Identity(2, 2);
    REQUIRE_THROWS_AS(DensityMatrix(1, tr2), std::invalid_argument);

    Matrix neg(2, 2);
    neg << 1.5, 0.0, 0.0, -0.5;
    REQUIRE_THROWS_AS(DensityMatrix(1, neg), std::invalid_argument);
}

TEST_CASE("apply_unitary rejects malformed input") {
    auto psi = StateVector::zero(2);
    const Matrix x = PauliString::single('X');
    REQUIRE_THROWS_AS(apply_unitary(psi, x, {2}), std::invalid_argument);
    REQUIRE_THROWS_AS(apply_unitary(psi, x, {0, 0}), std::invalid_argument);
    REQUIRE_THROWS_AS(apply_unitary(psi, x, std::vector<int>{}), std::invalid_argument);
    Matrix bad(2, 2);
    bad << 1.0, 1.0, 0.0, 1.0;
    REQUIRE_THROWS_AS(apply_unitary(psi, bad, {0}), std::invalid_argument);
    Matrix big = Matrix::Identity(4, 4);
    REQUIRE_THROWS_AS(apply_unitary(psi, big, {0}), std::invalid_argument);
}

TEST_CASE("unitary application round-trips") {
    RngStream rng(101);
    auto psi = random_state(3, rng);
    const Matrix u = haar_random_unitary(4, rng);
    auto fwd = apply_unitary(psi, u, {0, 2});
    auto back = apply_unitary(fwd, Matrix(u.adjoint()), {0, 2});
    REQUIRE((back.amplitudes() - psi.amplitudes()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("state-vector kernel matches explicit embedding") {
    RngStream rng(102);
    auto psi = random_state(3, rng);
    const Matrix u = haar_random_unitary(4, rng);
    auto got = apply_unitary(psi, u, {0, 2});

    // Independent path: build the 8x8 embedding entry by entry. Qubit 0 is
    // the high gate bit, qubit 2 the low one, qubit 1 untouched.
    Matrix full = Matrix::Zero(8, 8);
    auto gate_index = [](Eigen::Index i) { return ((i >> 2) & 1) * 2 + (i & 1); };
    for (Eigen::Index i = 0; i < 8; ++i)
        for (Eigen::Index j = 0; j < 8; ++j)
            if (((i >> 1) & 1) == ((j >> 1) & 1)) full(i, j) = u(gate_index(i), gate_index(j));
    Vector want = full * psi.amplitudes();
    REQUIRE((got.amplitudes() - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("density-matrix conjugation matches explicit embedding") {
    RngStream rng(103);
    auto rho = random_mixed(3, rng);
    const Matrix u = haar_random_unitary(2, rng);
    auto got = apply_unitary(rho, u, {1});
    const Matrix i2 = Matrix::Identity(2, 2);
    const Matrix full = kron(kron(i2, u), i2);
    const Matrix want = full * rho.matrix() * full.adjoint();
    REQUIRE((got.matrix() - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("complete depolarizing yields the maximally mixed qubit") {
    auto rho = DensityMatrix::pure(StateVector::zero(1));
    auto out = apply_channel(rho, depolarizing_1q(1.0), {0});
    REQUIRE((out.matrix() - 0.5 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("weak depolarizing mixes toward the orthogonal state") {
    auto rho = DensityMatrix::pure(plus_state());
    auto out = apply_channel(rho, depolarizing_1q(0.1), {0});
    const Matrix want =
        0.95 * (plus_state().amplitudes() * plus_state().amplitudes().adjoint()) +
        0.05 * (minus_state().amplitudes() * minus_state().amplitudes().adjoint());
    REQUIRE((out.matrix() - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("single-qubit channel on a register acts locally") {
    auto rho = DensityMatrix::pure(StateVector::zero(2));
    auto out = apply_channel(rho, depolarizing_1q(1.0), {0});
    Matrix want = Matrix::Zero(4, 4);
    want(0, 0) = 0.5;  // |00><00|
    want(2, 2) = 0.5;  // |10><10|
    REQUIRE((out.matrix() - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("apply_channel rejects incomplete Kraus sets") {
    KrausChannel ch;
    ch.n_targets = 1;
    ch.kraus_ops.push_back(0.5 * PauliString::single('I'));
    auto rho = DensityMatrix::pure(StateVector::zero(1));
    REQUIRE_THROWS_AS(apply_channel(rho, ch, {0}), std::invalid_argument);
}

TEST_CASE("fidelity against a pure reference") {
    Matrix diag = Matrix::Zero(2, 2);
    diag(0, 0) = 0.7;
    diag(1, 1) = 0.3;
    auto rho = DensityMatrix(1, diag);
    REQUIRE(fidelity_pure(rho, plus_state()) == Catch::Approx(0.5).margin(1e-12));
    auto pure = DensityMatrix::pure(plus_state());
    REQUIRE(fidelity_pure(pure, plus_state()) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("trace distance matches closed forms") {
    for (int n : {1, 2, 3}) {
        RngStream rng(200 + n);
        auto psi = random_state(n, rng);
        const double d = static_cast<double>(dim_of(n));
        REQUIRE(trace_distance(DensityMatrix::pure(psi), DensityMatrix::maximally_mixed(n)) ==
                Catch::Approx(1.0 - 1.0 / d).margin(1e-10));
    }
    auto a = DensityMatrix::pure(StateVector::zero(1));
    auto b = DensityMatrix::pure(plus_state());
    REQUIRE(trace_distance(a, b) == Catch::Approx(1.0 / std::sqrt(2.0)).margin(1e-12));
}

TEST_CASE("trace distance is a metric in practice") {
    RngStream rng(77);
    auto a = random_mixed(2, rng);
    auto b = random_mixed(2, rng);
    auto c = random_mixed(2, rng);
    REQUIRE(trace_distance(a, a) < 1e-12);
    REQUIRE(trace_distance(a, b) == Catch::Approx(trace_distance(b, a)).margin(1e-12));
    REQUIRE(trace_distance(a, b) >= 0.0);
    REQUIRE(trace_distance(a, c) <= trace_distance(a, b) + trace_distance(b, c) + 1e-12);
}

TEST_CASE("trace powers from the spectrum") {
    Matrix diag = Matrix::Zero(2, 2);
    diag(0, 0) = 0.25;
    diag(1, 1) = 0.75;
    auto rho = DensityMatrix(1, diag);
    REQUIRE(trace_power_exact(rho, 1) == 1.0);  // exact by construction
    REQUIRE(trace_power_exact(rho, 2) == Catch::Approx(0.625).margin(1e-12));
    REQUIRE(trace_power_exact(rho, 3) == Catch::Approx(0.4375).margin(1e-12));
    REQUIRE(purity(DensityMatrix::maximally_mixed(2)) == Catch::Approx(0.25).margin(1e-12));
    REQUIRE_THROWS_AS(trace_power_exact(rho, 0), std::invalid_argument);
}

TEST_CASE("von Neumann entropy in nats") {
    Matrix diag = Matrix::Zero(2, 2);
    diag(0, 0) = 0.25;
    diag(1, 1) = 0.75;
    const double want = -0.25 * std::log(0.25) - 0.75 * std::log(0.75);
    REQUIRE(von_neumann_entropy_exact(DensityMatrix(1, diag)) ==
            Catch::Approx(want).margin(1e-12));
    RngStream rng(5);
    REQUIRE(von_neumann_entropy_exact(DensityMatrix::pure(random_state(2, rng))) <
            1e-8);
    REQUIRE(von_neumann_entropy_exact(DensityMatrix::maximally_mixed(2)) ==
            Catch::Approx(2.0 * std::log(2.0)).margin(1e-12));
}

TEST_CASE("haar samples are unitary") {
    RngStream rng(301);
    for (Eigen::Index d : {2, 4, 8}) {
        const Matrix u = haar_random_unitary(d, rng);
        REQUIRE((u.adjoint() * u - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("haar first moments match the uniform measure") {
    RngStream rng(302);
    const int trials = 10000;
    std::vector<double> abs00(trials), abstr(trials);
    for (int t = 0; t < trials; ++t) {
        const Matrix u = haar_random_unitary(2, rng);
        abs00[t] = std::norm(u(0, 0));
        abstr[t] = std::norm(u.trace());
    }
    auto [m00, se00] = mean_stderr(abs00);
    REQUIRE(std::abs(m00 - 0.5) < 3.0 * se00 + 1e-3);
    auto [mtr, setr] = mean_stderr(abstr);
    REQUIRE(std::abs(mtr - 1.0) < 3.0 * setr + 1e-3);
}

TEST_CASE("partial trace of entangled and product states") {
    Vector bell(4);
    bell << 1.0 / std::sqrt(2.0), 0.0, 0.0, 1.0 / std::sqrt(2.0);
    auto rho = DensityMatrix::pure(StateVector(2, bell));
    auto red = partial_trace(rho, {0});
    REQUIRE((red.matrix() - 0.5 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);

    Vector skew(4);
    skew << std::sqrt(0.6), 0.0, 0.0, std::sqrt(0.4);
    auto red0 = partial_trace(DensityMatrix::pure(StateVector(2, skew)), {0});
    REQUIRE(red0.matrix()(0, 0).real() == Catch::Approx(0.6).margin(1e-12));
    REQUIRE(red0.matrix()(1, 1).real() == Catch::Approx(0.4).margin(1e-12));

    RngStream rng(303);
    auto a = random_state(1, rng);
    auto b = random_state(2, rng);
    StateVector prod(3, Vector(kron(Matrix(a.amplitudes()), Matrix(b.amplitudes())).col(0)));
    auto reda = partial_trace(DensityMatrix::pure(prod), {0});
    REQUIRE((reda.matrix() - a.amplitudes() * a.amplitudes().adjoint()).cwiseAbs().maxCoeff() <
            1e-12);
    auto redb = partial_trace(DensityMatrix::pure(prod), {1, 2});
    REQUIRE((redb.matrix() - b.amplitudes() * b.amplitudes().adjoint()).cwiseAbs().maxCoeff() <
            1e-12);
}

TEST_CASE("pauli strings") {
    PauliString p(3, "XIZ");
    REQUIRE(p.weight() == 2);
    REQUIRE_THROWS_AS(PauliString(2, "XQ"), std::invalid_argument);
    REQUIRE_THROWS_AS(PauliString(2, "X"), std::invalid_argument);
    const Matrix xz = PauliString(2, "XZ").to_matrix();
    Matrix want = Matrix::Zero(4, 4);
    want(0, 2) = 1.0;
    want(1, 3) = -1.0;
    want(2, 0) = 1.0;
    want(3, 1) = -1.0;
    REQUIRE((xz - want).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("qstate files round-trip bit-exactly") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path();
    RngStream rng(401);

    const auto psi = random_state(3, rng);
    const auto sv_path = (dir / "qsc_test_sv.qstate").string();
    save_qstate(sv_path, psi);
    auto loaded = load_qstate(sv_path);
    REQUIRE(std::holds_alternative<StateVector>(loaded));
    const auto& got = std::get<StateVector>(loaded);
    REQUIRE(got.n() == 3);
    for (Eigen::Index i = 0; i < got.dim(); ++i) {
        REQUIRE(got.amplitudes()(i).real() == psi.amplitudes()(i).real());
        REQUIRE(got.amplitudes()(i).imag() == psi.amplitudes()(i).imag());
    }

    const auto rho = random_mixed(2, rng);
    const auto dm_path = (dir / "qsc_test_dm.qstate").string();
    save_qstate(dm_path, rho);
    auto loaded2 = load_qstate(dm_path);
    REQUIRE(std::holds_alternative<DensityMatrix>(loaded2));
    const auto& got2 = std::get<DensityMatrix>(loaded2);
    for (Eigen::Index i = 0; i < got2.dim(); ++i)
        for (Eigen::Index j = 0; j < got2.dim(); ++j) {
            REQUIRE(got2.matrix()(i, j).real() == rho.matrix()(i, j).real());
            REQUIRE(got2.matrix()(i, j).imag() == rho.matrix()(i, j).imag());
        }

    fs::remove(sv_path);
    fs::remove(dm_path);
}

TEST_CASE("qstate loader rejects corrupt input") {
    namespace fs = std::filesystem;
    const auto path = (fs::temp_directory_path() / "qsc_test_bad.qstate").string();
    {
        std::ofstream os(path, std::ios::binary);
        os << "NOTASTATE";
    }
    REQUIRE_THROWS_AS(load_qstate(path), io_error);
    REQUIRE_THROWS_AS(load_qstate((fs::temp_directory_path() / "missing.qstate").string()),
                      io_error);
    fs::remove(path);
}
