#pragma once

// Polynomial-kernel ridge regression over circuit parameters: the kernel,
// the beta(x) combination coefficients, a grid-search estimate of the
// compact set the betas live in, and a validation harness comparing the
// kernel prediction of <Psi(x)| rho |Psi(x)> against its exact value.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qsc/ansatz.hpp"
#include "qsc/qsim.hpp"

namespace qsc {

struct KernelConfig {
    int degree = 8;      // polynomial truncation K
    int q = 1;           // interaction order (coordinates per subset)
    bool normalize = true;  // scale the Gram to Tr(K) = N

    void validate() const {
        if (degree < 0) throw std::invalid_argument("KernelConfig: degree < 0");
        if (q < 1) throw std::invalid_argument("KernelConfig: q < 1");
    }
};

inline KernelConfig default_kernel_config(int n) {
    return KernelConfig{std::min(n * n, 8), 1, true};
}

// Sum over l = 0..degree and over ascending q-subsets of coordinates of
// (sum_t a_t b_t)^l. With q = 1 this is the per-coordinate power sum; the
// l = 0 term uses the convention 0^0 := 1, so it contributes one unit per
// subset.
inline double kernel_value(std::span<const double> a, std::span<const double> b,
                           const KernelConfig& cfg) {
    cfg.validate();
    if (a.size() != b.size()) throw std::invalid_argument("kernel_value: length mismatch");
    const std::size_t dim = a.size();
    if (cfg.q == 1) {
        double acc = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            const double p = a[i] * b[i];
            double term = 1.0;  // l = 0
            double acc_i = 1.0;
            for (int l = 1; l <= cfg.degree; ++l) {
                term *= p;
                acc_i += term;
            }
            acc += acc_i;
        }
        return acc;
    }
    if (static_cast<std::size_t>(cfg.q) > dim)
        throw std::invalid_argument("kernel_value: q exceeds dimension");
    // Enumerate ascending index subsets of size q.
    std::vector<std::size_t> idx(cfg.q);
    for (int i = 0; i < cfg.q; ++i) idx[i] = i;
    double acc = 0.0;
    for (;;) {
        double p = 0.0;
        for (std::size_t t : idx) p += a[t] * b[t];
        double term = 1.0, acc_s = 1.0;
        for (int l = 1; l <= cfg.degree; ++l) {
            term *= p;
            acc_s += term;
        }
        acc += acc_s;
        int k = cfg.q - 1;
        while (k >= 0 && idx[k] == dim - cfg.q + k) --k;
        if (k < 0) break;
        ++idx[k];
        for (int j = k + 1; j < cfg.q; ++j) idx[j] = idx[j - 1] + 1;
    }
    return acc;
}

struct RidgeModel {
    KernelConfig cfg;
    int n = 0;               // qubit count feeding the lambda formula
    Eigen::MatrixXd alphas;  // N x dim training inputs, rescaled to [0,1)
    Eigen::MatrixXd gram;    // normalized kernel matrix, Tr = N
    double norm_factor = 1.0;  // applied to every raw kernel evaluation
    double lambda = 0.0;
    Eigen::VectorXd targets;
    Eigen::VectorXd weights;  // (gram + lambda I)^{-1} targets
    Eigen::LDLT<Eigen::MatrixXd> factor;

    std::size_t dim() const { return static_cast<std::size_t>(alphas.cols()); }
    Eigen::Index count() const { return alphas.rows(); }
};

namespace detail {

// Kernel inputs live on [0, 2pi); the model works on [0,1) to keep powers
// of up to degree 8 well-conditioned. Predictions are invariant as long as
// training and probe points share the map.
inline Eigen::VectorXd rescale_input(std::span<const double> x) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) out(static_cast<Eigen::Index>(i)) =
        x[i] / (2.0 * std::numbers::pi);
    return out;
}

inline double kernel_rows(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                          const KernelConfig& cfg) {
    return kernel_value(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())),
                        std::span<const double>(b.data(), static_cast<std::size_t>(b.size())),
                        cfg);
}

}  // namespace detail

inline RidgeModel fit_ridge(const std::vector<std::vector<double>>& alphas,
                            const std::vector<double>& targets, const KernelConfig& cfg, int n,
                            std::optional<double> lambda_override = std::nullopt) {
    cfg.validate();
    if (alphas.empty()) throw std::invalid_argument("fit_ridge: no training inputs");
    if (alphas.size() != targets.size())
        throw std::invalid_argument("fit_ridge: target count mismatch");
    const Eigen::Index count = static_cast<Eigen::Index>(alphas.size());
    const std::size_t dim = alphas.front().size();
    for (const auto& a : alphas)
        if (a.size() != dim) throw std::invalid_argument("fit_ridge: ragged inputs");
    for (double y : targets)
        if (!std::isfinite(y)) throw std::invalid_argument("fit_ridge: non-finite target");

    RidgeModel model;
    model.cfg = cfg;
    model.n = n;
    model.alphas.resize(count, static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < count; ++i)
        model.alphas.row(i) = detail::rescale_input(alphas[static_cast<std::size_t>(i)]);

    Eigen::MatrixXd raw(count, count);
    for (Eigen::Index i = 0; i < count; ++i)
        for (Eigen::Index j = i; j < count; ++j)
            raw(i, j) = raw(j, i) =
                detail::kernel_rows(model.alphas.row(i), model.alphas.row(j), cfg);
    const double trace = raw.trace();
    model.norm_factor = (cfg.normalize && trace > 0.0) ? static_cast<double>(count) / trace : 1.0;
    model.gram = model.norm_factor * raw;

    if (lambda_override) {
        model.lambda = *lambda_override;
    } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(model.gram, Eigen::EigenvaluesOnly);
        const double lam_min = es.eigenvalues().minCoeff();
        model.lambda = lam_min > 0.0
                           ? std::sqrt(lam_min) / (static_cast<double>(n) * count)
                           : 1e-12;
        model.lambda = std::max(model.lambda, 1e-12);
    }
    if (!(model.lambda > 0.0)) throw std::invalid_argument("fit_ridge: lambda must be positive");

    Eigen::MatrixXd system = model.gram;
    system.diagonal().array() += model.lambda;
    model.factor.compute(system);
    if (model.factor.info() != Eigen::Success)
        throw std::runtime_error("fit_ridge: ridge system is singular");
    model.targets = Eigen::Map<const Eigen::VectorXd>(targets.data(), count);
    model.weights = model.factor.solve(model.targets);
    return model;
}

inline RidgeModel fit_ridge(const std::vector<QnnSample>& samples,
                            const std::vector<double>& targets, const KernelConfig& cfg, int n,
                            std::optional<double> lambda_override = std::nullopt) {
    std::vector<std::vector<double>> alphas;
    alphas.reserve(samples.size());
    for (const auto& s : samples) alphas.push_back(s.params.values);
    return fit_ridge(alphas, targets, cfg, n, lambda_override);
}

// Kernel evaluations of x against every training input, normalized the same
// way as the Gram.
inline Eigen::VectorXd kernel_column(const RidgeModel& model, std::span<const double> x) {
    if (x.size() != model.dim()) throw std::invalid_argument("kernel_column: dimension mismatch");
    const Eigen::VectorXd xs = detail::rescale_input(x);
    Eigen::VectorXd k(model.count());
    for (Eigen::Index i = 0; i < model.count(); ++i)
        k(i) = model.norm_factor * detail::kernel_rows(model.alphas.row(i), xs, model.cfg);
    return k;
}

// beta(x) = (gram + lambda I)^{-1} k(x); the prediction is beta . targets.
inline Eigen::VectorXd beta_coefficients(const RidgeModel& model, std::span<const double> x) {
    return model.factor.solve(kernel_column(model, x));
}

inline double predict(const RidgeModel& model, std::span<const double> x) {
    return kernel_column(model, x).dot(model.weights);
}

struct CompactSet {
    std::vector<std::pair<double, double>> intervals;  // one per training sample j
    std::vector<double> slack;                         // grid-resolution broadening per j
};

// With q = 1, beta_j(x) decomposes exactly as sum_c h_{j,c}(x_c) where each
// h_{j,c} is a univariate polynomial of degree K. Bound each h on a grid
// over the rescaled domain [0,1), widen by the observed per-step variation,
// and sum the coordinate intervals.
inline CompactSet estimate_compact_set(const RidgeModel& model, int grid_points = 512) {
    if (model.cfg.q != 1)
        throw std::invalid_argument("estimate_compact_set: requires interaction order q = 1");
    if (grid_points < 16) throw std::invalid_argument("estimate_compact_set: grid too coarse");
    const Eigen::Index count = model.count();
    const Eigen::Index dim = static_cast<Eigen::Index>(model.dim());
    const int deg = model.cfg.degree;

    // W = (gram + lambda I)^{-1}; column j gives beta_j's weights.
    const Eigen::MatrixXd w =
        model.factor.solve(Eigen::MatrixXd::Identity(count, count));

    CompactSet out;
    out.intervals.resize(count);
    out.slack.resize(count);
    std::vector<double> coef(deg + 1);
    for (Eigen::Index j = 0; j < count; ++j) {
        double lo_sum = 0.0, hi_sum = 0.0, slack_sum = 0.0;
        for (Eigen::Index c = 0; c < dim; ++c) {
            // h_{j,c}(t) = sum_l [ norm * sum_i W_ij a_{i,c}^l ] t^l.
            for (int l = 0; l <= deg; ++l) {
                double s = 0.0;
                for (Eigen::Index i = 0; i < count; ++i)
                    s += w(i, j) * std::pow(model.alphas(i, c), l);
                coef[l] = model.norm_factor * s;
            }
            auto eval = [&](double t) {
                double acc = coef[deg];
                for (int l = deg - 1; l >= 0; --l) acc = acc * t + coef[l];
                return acc;
            };
            double lo = 0.0, hi = 0.0, biggest_step = 0.0, prev = 0.0;
            for (int g = 0; g < grid_points; ++g) {
                const double v = eval(static_cast<double>(g) / grid_points);
                if (g == 0) {
                    lo = hi = v;
                } else {
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                    biggest_step = std::max(biggest_step, std::abs(v - prev));
                }
                prev = v;
            }
            lo_sum += lo;
            hi_sum += hi;
            slack_sum += biggest_step;
        }
        out.intervals[static_cast<std::size_t>(j)] = {lo_sum - slack_sum, hi_sum + slack_sum};
        out.slack[static_cast<std::size_t>(j)] = slack_sum;
    }
    return out;
}

struct IntrinsicValidation {
    double mean_abs_error = 0.0;
    double bound = 0.0;
    std::vector<double> probe_errors;  // |prediction - exact| per probe
    std::vector<double> beta_sums;     // sum_j beta_j(x) per probe
};

// Train on f_j = <Psi_j| rho |Psi_j> over a random circuit sample, then
// compare beta(x).f against the exact overlap on fresh probes. The bound is
// sqrt(L R n^2 / N), the dimension-count rate.
inline IntrinsicValidation validate_intrinsic_connection(const Architecture& arch, int depth,
                                                         int count, int probes,
                                                         const DensityMatrix& rho,
                                                         RngStream& rng) {
    if (count < 2) throw std::invalid_argument("validate_intrinsic_connection: need N >= 2");
    if (probes < 10)
        throw std::invalid_argument("validate_intrinsic_connection: need probes >= 10");
    const Architecture a = build_architecture(arch.n, arch.layout, depth);
    if (rho.n() != a.n)
        throw std::invalid_argument("validate_intrinsic_connection: state qubit mismatch");

    RngStream train_rng = rng.split(1);
    const auto samples = sample_qnn_set(a, count, train_rng);
    std::vector<double> targets(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        targets[i] = fidelity_pure(rho, samples[i].state);
    const RidgeModel model = fit_ridge(samples, targets, default_kernel_config(a.n), a.n);

    IntrinsicValidation report;
    report.bound = std::sqrt(static_cast<double>(a.width) * depth * a.n * a.n / count);
    report.probe_errors.resize(probes);
    report.beta_sums.resize(probes);
    RngStream probe_rng = rng.split(2);
    std::vector<double> x(static_cast<std::size_t>(a.param_count()));
    for (int p = 0; p < probes; ++p) {
        for (auto& v : x) v = 2.0 * std::numbers::pi * probe_rng.uniform();
        ParameterSet params;
        params.values = x;
        const double exact = fidelity_pure(rho, prepare_qnn_state(a, params));
        const Eigen::VectorXd beta = beta_coefficients(model, x);
        const double predicted = beta.dot(model.targets);
        report.probe_errors[p] = std::abs(predicted - exact);
        report.beta_sums[p] = beta.sum();
    }
    report.mean_abs_error =
        pairwise_sum(report.probe_errors) / static_cast<double>(probes);
    return report;
}

}  // namespace qsc
