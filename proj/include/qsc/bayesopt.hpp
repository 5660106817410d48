#pragma once

// Gaussian-process UCB maximization over the joint (q, beta) search domain,
// with regret accounting against a known optimum and the closed-form
// average-regret bound. The loop powers the depth probes: it hunts for a
// coefficient vector with large reconstruction loss, and a probed depth is
// accepted when even the hunted final iterate re-evaluates below epsilon.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "qsc/ansatz.hpp"
#include "qsc/intrinsic.hpp"
#include "qsc/prng.hpp"
#include "qsc/shadows.hpp"

namespace qsc {

// ---------------------------------------------------------------------------
// Search domain: q on the probability simplex, beta inside per-coordinate
// intervals intersected with the sum-to-one hyperplane.

struct DomainPoint {
    Eigen::VectorXd q;
    Eigen::VectorXd beta;

    Eigen::VectorXd joint() const {
        Eigen::VectorXd z(q.size() + beta.size());
        z << q, beta;
        return z;
    }
};

struct DomainSpec {
    int count = 0;                                    // coordinates per block
    std::vector<std::pair<double, double>> beta_box;  // interval per coordinate

    void validate() const {
        if (count < 1) throw std::invalid_argument("DomainSpec: count < 1");
        if (beta_box.size() != static_cast<std::size_t>(count))
            throw std::invalid_argument("DomainSpec: interval count mismatch");
        double lo = 0.0, hi = 0.0;
        for (const auto& [a, b] : beta_box) {
            if (!(a <= b)) throw std::invalid_argument("DomainSpec: inverted interval");
            lo += a;
            hi += b;
        }
        if (lo > 1.0 + 1e-12 || hi < 1.0 - 1e-12)
            throw std::invalid_argument("DomainSpec: no feasible beta sums to one");
    }
};

inline DomainSpec domain_from_compact_set(const CompactSet& set) {
    DomainSpec d;
    d.count = static_cast<int>(set.intervals.size());
    d.beta_box = set.intervals;
    d.validate();
    return d;
}

namespace detail {

// Nearest-in-spirit point of the box that sums to one: shift onto the
// hyperplane, clamp, shift once more, then spread the residual over the
// coordinates that still have slack until the sum closes.
inline Eigen::VectorXd project_box_simplex(Eigen::VectorXd beta, const DomainSpec& domain) {
    const int n = domain.count;
    auto clamp_all = [&] {
        for (int i = 0; i < n; ++i)
            beta(i) = std::clamp(beta(i), domain.beta_box[i].first, domain.beta_box[i].second);
    };
    for (int pass = 0; pass < 2; ++pass) {
        beta.array() += (1.0 - beta.sum()) / n;
        clamp_all();
    }
    for (int round = 0; round <= n; ++round) {
        const double r = 1.0 - beta.sum();
        if (std::abs(r) <= 1e-12) break;
        std::vector<int> open;
        for (int i = 0; i < n; ++i) {
            const auto& [lo, hi] = domain.beta_box[i];
            if ((r > 0.0 && beta(i) < hi - 1e-15) || (r < 0.0 && beta(i) > lo + 1e-15))
                open.push_back(i);
        }
        if (open.empty()) break;
        const double step = r / static_cast<double>(open.size());
        for (int i : open) beta(i) += step;
        clamp_all();
    }
    return beta;
}

}  // namespace detail

inline DomainPoint sample_domain_point(const DomainSpec& domain, RngStream& rng) {
    domain.validate();
    DomainPoint z;
    const auto w = rng.dirichlet_flat(static_cast<std::size_t>(domain.count));
    z.q = Eigen::Map<const Eigen::VectorXd>(w.data(), domain.count);
    z.beta.resize(domain.count);
    for (int i = 0; i < domain.count; ++i)
        z.beta(i) = rng.uniform(domain.beta_box[i].first, domain.beta_box[i].second);
    z.beta = detail::project_box_simplex(std::move(z.beta), domain);
    return z;
}

// ---------------------------------------------------------------------------
// Gaussian process with a squared-exponential kernel and per-coordinate
// lengthscales over the joint (q, beta) vector. The Cholesky factor of
// K + sigma^2 I grows one rank per observation.

struct GpConfig {
    double signal_variance = 1.0;
    double sigma_noise = 1e-3;
    double q_lengthscale = 0.5;
    double beta_width_factor = 0.5;  // lengthscale = factor * interval width
    std::optional<Eigen::VectorXd> lengthscale_override;
};

inline Eigen::VectorXd resolve_lengthscales(const GpConfig& cfg, const DomainSpec& domain) {
    if (cfg.lengthscale_override) {
        if (cfg.lengthscale_override->size() != 2 * domain.count)
            throw std::invalid_argument("resolve_lengthscales: override size mismatch");
        return *cfg.lengthscale_override;
    }
    Eigen::VectorXd ls(2 * domain.count);
    for (int i = 0; i < domain.count; ++i) {
        ls(i) = cfg.q_lengthscale;
        const double w = domain.beta_box[i].second - domain.beta_box[i].first;
        ls(domain.count + i) = std::max(cfg.beta_width_factor * w, 1e-6);
    }
    return ls;
}

class GpState {
public:
    explicit GpState(Eigen::VectorXd lengthscales, double signal_variance = 1.0,
                     double sigma_noise = 1e-3)
        : ls_(std::move(lengthscales)), sv_(signal_variance), noise_(sigma_noise) {
        if (ls_.size() == 0 || (ls_.array() <= 0.0).any())
            throw std::invalid_argument("GpState: lengthscales must be positive");
        if (sv_ <= 0.0) throw std::invalid_argument("GpState: signal variance must be positive");
        if (noise_ < 0.0) throw std::invalid_argument("GpState: negative noise");
    }

    int dim() const { return static_cast<int>(ls_.size()); }
    int count() const { return static_cast<int>(ys_.size()); }
    double sigma_noise() const { return noise_; }

    double kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
        const Eigen::ArrayXd d = (a - b).array() / ls_.array();
        return sv_ * std::exp(-0.5 * d.square().sum());
    }

    void add(const Eigen::VectorXd& z, double y) {
        if (z.size() != ls_.size()) throw std::invalid_argument("GpState: dimension mismatch");
        const int m = count();
        Eigen::VectorXd k(m);
        for (int i = 0; i < m; ++i) k(i) = kernel(zs_.col(i), z);

        zs_.conservativeResize(ls_.size(), m + 1);
        zs_.col(m) = z;
        ys_.conservativeResize(m + 1);
        ys_(m) = y;

        double dsq = kernel(z, z) + noise_ * noise_ + (jittered_ ? kJitter : 0.0);
        Eigen::VectorXd c = Eigen::VectorXd::Zero(m);
        if (m > 0) {
            c = chol_.topLeftCorner(m, m).triangularView<Eigen::Lower>().solve(k);
            dsq -= c.squaredNorm();
        }
        if (dsq <= 0.0) {
            // Ill-conditioned extension: turn on the one-shot diagonal jitter
            // and refactor from scratch; a second failure is a hard error.
            if (jittered_) throw std::runtime_error("GpState: kernel matrix not positive definite");
            jittered_ = true;
            rebuild();
        } else {
            chol_.conservativeResizeLike(Eigen::MatrixXd::Zero(m + 1, m + 1));
            chol_.row(m).head(m) = c.transpose();
            chol_(m, m) = std::sqrt(dsq);
        }
        refresh_alpha();
    }

    std::pair<double, double> posterior(const Eigen::VectorXd& z) const {
        if (z.size() != ls_.size()) throw std::invalid_argument("GpState: dimension mismatch");
        const int m = count();
        if (m == 0) return {0.0, std::sqrt(kernel(z, z))};
        Eigen::VectorXd k(m);
        for (int i = 0; i < m; ++i) k(i) = kernel(zs_.col(i), z);
        const double mu = k.dot(alpha_);
        const Eigen::VectorXd v = chol_.triangularView<Eigen::Lower>().solve(k);
        const double var = std::max(0.0, kernel(z, z) - v.squaredNorm());
        return {mu, std::sqrt(var)};
    }

    // Same algebra, one triangular solve for a column-per-point batch.
    void posterior_batch(const Eigen::MatrixXd& zs, Eigen::VectorXd& mu,
                         Eigen::VectorXd& sigma) const {
        const int m = count();
        const Eigen::Index p = zs.cols();
        mu.resize(p);
        sigma.resize(p);
        if (m == 0) {
            for (Eigen::Index j = 0; j < p; ++j) {
                mu(j) = 0.0;
                sigma(j) = std::sqrt(kernel(zs.col(j), zs.col(j)));
            }
            return;
        }
        Eigen::MatrixXd k(m, p);
        for (Eigen::Index j = 0; j < p; ++j)
            for (int i = 0; i < m; ++i) k(i, j) = kernel(zs_.col(i), zs.col(j));
        const Eigen::MatrixXd v = chol_.triangularView<Eigen::Lower>().solve(k);
        mu = k.transpose() * alpha_;
        for (Eigen::Index j = 0; j < p; ++j) {
            const double var =
                std::max(0.0, kernel(zs.col(j), zs.col(j)) - v.col(j).squaredNorm());
            sigma(j) = std::sqrt(var);
        }
    }

private:
    static constexpr double kJitter = 1e-8;

    void rebuild() {
        const int m = count();
        Eigen::MatrixXd gram(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j <= i; ++j) gram(i, j) = gram(j, i) = kernel(zs_.col(i), zs_.col(j));
        gram.diagonal().array() += noise_ * noise_ + kJitter;
        const Eigen::LLT<Eigen::MatrixXd> llt(gram);
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("GpState: kernel matrix not positive definite");
        chol_ = llt.matrixL();
    }

    void refresh_alpha() {
        alpha_ = chol_.triangularView<Eigen::Lower>().solve(ys_);
        chol_.transpose().triangularView<Eigen::Upper>().solveInPlace(alpha_);
    }

    Eigen::VectorXd ls_;
    double sv_ = 1.0;
    double noise_ = 0.0;
    bool jittered_ = false;
    Eigen::MatrixXd zs_;  // dim x count, one column per observation
    Eigen::VectorXd ys_;
    Eigen::MatrixXd chol_;  // lower Cholesky of K + sigma^2 I
    Eigen::VectorXd alpha_;
};

inline std::pair<double, double> gp_posterior(const GpState& gp, const Eigen::VectorXd& z) {
    return gp.posterior(z);
}

// ---------------------------------------------------------------------------
// Confidence schedule and the closed-form average-regret bound. Natural
// logarithms throughout.

inline double kappa_schedule(int t, int count, double delta) {
    if (t < 1) throw std::invalid_argument("kappa_schedule: t < 1");
    if (count < 1) throw std::invalid_argument("kappa_schedule: count < 1");
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("kappa_schedule: delta outside (0,1)");
    const double td = static_cast<double>(t);
    const double nd = static_cast<double>(count);
    return 2.0 * nd * std::log(td * td * nd) + 2.0 * std::log(td * td / delta);
}

inline double regret_bound(double horizon, int count, double delta) {
    if (!(horizon >= 2.0)) throw std::invalid_argument("regret_bound: horizon < 2");
    if (count < 1) throw std::invalid_argument("regret_bound: count < 1");
    if (!(delta > 0.0)) throw std::invalid_argument("regret_bound: delta must be positive");
    const double nd = static_cast<double>(count);
    const double lt = std::log(horizon);
    const double tail = std::log(M_PI * M_PI / (6.0 * delta));
    return std::sqrt((4.0 * nd * nd * lt * lt + 2.0 * nd * lt * tail) / horizon);
}

// ---------------------------------------------------------------------------
// Regret accounting. Sums are sequential and the running averages are stored
// as computed, so check() can recompute and compare bit for bit. Simple
// regret follows the best-recommendation rule (best probed iterate so far),
// which keeps s_T <= R_T an identity; the raw final-iterate regret is kept
// alongside because the accept decision tests the final iterate.

struct RegretLedger {
    std::optional<double> optimum;
    std::vector<double> kappas;
    std::vector<double> values;    // objective value per iterate
    std::vector<double> regrets;   // optimum - value, when the optimum is known
    std::vector<double> bests;     // running minimum of regrets
    std::vector<double> sums;      // sequential running sum of regrets
    std::vector<double> averages;  // sums[t-1] / t

    void record(double kappa, double value) {
        kappas.push_back(kappa);
        values.push_back(value);
        if (!optimum) return;
        regrets.push_back(*optimum - value);
        bests.push_back(bests.empty() ? regrets.back() : std::min(bests.back(), regrets.back()));
        sums.push_back((sums.empty() ? 0.0 : sums.back()) + regrets.back());
        averages.push_back(sums.back() / static_cast<double>(regrets.size()));
    }

    int size() const { return static_cast<int>(values.size()); }

    double average_regret() const {
        if (averages.empty()) throw std::logic_error("RegretLedger: no regret data");
        return averages.back();
    }

    double simple_regret() const {
        if (bests.empty()) throw std::logic_error("RegretLedger: no regret data");
        return bests.back();
    }

    double final_regret() const {
        if (regrets.empty()) throw std::logic_error("RegretLedger: no regret data");
        return regrets.back();
    }

    struct Check {
        bool simple_le_average = true;
        bool sums_consistent = true;
    };

    // Reports rather than throws, so audits can log instead of aborting.
    Check check() const {
        Check c;
        if (regrets.empty()) return c;
        c.simple_le_average = simple_regret() <= average_regret();
        double s = 0.0, b = regrets.front();
        for (std::size_t i = 0; i < regrets.size(); ++i) {
            s += regrets[i];
            b = std::min(b, regrets[i]);
            if (s != sums[i] || b != bests[i] || averages[i] != s / static_cast<double>(i + 1))
                c.sums_consistent = false;
        }
        return c;
    }
};

// ---------------------------------------------------------------------------
// Acquisition: score a random candidate pool, then one local refinement
// round around the pool winner. Strict-improvement comparisons keep the
// earliest point on ties, so a flat posterior returns the first candidate.

inline DomainPoint ucb_argmax(const GpState& gp, const DomainSpec& domain, double kappa,
                              int candidates, RngStream& rng, int refine_points = 32,
                              double refine_scale = 0.05) {
    if (candidates < 1) throw std::invalid_argument("ucb_argmax: need candidates >= 1");
    if (kappa < 0.0) throw std::invalid_argument("ucb_argmax: negative kappa");
    domain.validate();
    const double root_kappa = std::sqrt(kappa);

    auto best_of = [&](const std::vector<DomainPoint>& pts) {
        Eigen::MatrixXd zs(2 * domain.count, static_cast<Eigen::Index>(pts.size()));
        for (std::size_t j = 0; j < pts.size(); ++j)
            zs.col(static_cast<Eigen::Index>(j)) = pts[j].joint();
        Eigen::VectorXd mu, sigma;
        gp.posterior_batch(zs, mu, sigma);
        std::size_t best = 0;
        double best_score = mu(0) + root_kappa * sigma(0);
        for (std::size_t j = 1; j < pts.size(); ++j) {
            const double score =
                mu(static_cast<Eigen::Index>(j)) + root_kappa * sigma(static_cast<Eigen::Index>(j));
            if (score > best_score) {
                best = j;
                best_score = score;
            }
        }
        return best;
    };

    std::vector<DomainPoint> pool;
    pool.reserve(static_cast<std::size_t>(candidates));
    for (int i = 0; i < candidates; ++i) pool.push_back(sample_domain_point(domain, rng));
    const std::size_t lead = best_of(pool);

    std::vector<DomainPoint> refined;
    refined.reserve(static_cast<std::size_t>(refine_points) + 1);
    refined.push_back(pool[lead]);  // incumbent first: kept on ties
    for (int i = 0; i < refine_points; ++i) {
        DomainPoint p = refined.front();
        for (int c = 0; c < domain.count; ++c) p.q(c) = std::max(0.0, p.q(c) + refine_scale * rng.normal());
        const double total = p.q.sum();
        if (total <= 0.0)
            p.q.setConstant(1.0 / domain.count);
        else
            p.q /= total;
        for (int c = 0; c < domain.count; ++c) {
            const auto& [lo, hi] = domain.beta_box[c];
            p.beta(c) += refine_scale * (hi - lo) * rng.normal();
        }
        p.beta = detail::project_box_simplex(std::move(p.beta), domain);
        refined.push_back(std::move(p));
    }
    return refined[best_of(refined)];
}

// ---------------------------------------------------------------------------
// UCB maximization loop over an arbitrary objective, with the per-step trace
// the CSV writer and the audits consume.

struct UcbStep {
    int t = 0;
    double kappa = 0.0;
    DomainPoint z;
    double mu = 0.0;  // posterior at z before the update
    double sigma = 0.0;
    double objective = 0.0;  // noiseless objective value
    double observed = 0.0;   // value handed to the GP
};

struct UcbConfig {
    GpConfig gp;
    int candidates = 256;
    int refine_points = 32;
    double refine_scale = 0.05;
    bool noisy_observations = false;  // add unit-normal observation noise
    std::optional<double> known_optimum;
    std::vector<std::pair<int, DomainPoint>> injected;  // step -> forced iterate (test hook)
};

struct UcbResult {
    std::vector<UcbStep> steps;
    RegretLedger ledger;
    int best_step = 0;
    double best_value = 0.0;
    DomainPoint best_z;
};

inline UcbResult ucb_maximize(const std::function<double(const DomainPoint&)>& objective,
                              const DomainSpec& domain, int iterations, double delta,
                              const UcbConfig& cfg, RngStream& rng) {
    if (iterations < 1) throw std::invalid_argument("ucb_maximize: iterations < 1");
    domain.validate();
    GpState gp(resolve_lengthscales(cfg.gp, domain), cfg.gp.signal_variance, cfg.gp.sigma_noise);
    UcbResult out;
    out.ledger.optimum = cfg.known_optimum;
    RngStream noise_rng = rng.split(2);
    for (int t = 1; t <= iterations; ++t) {
        UcbStep step;
        step.t = t;
        step.kappa = kappa_schedule(t, domain.count, delta);
        RngStream step_rng = rng.split(100 + static_cast<std::uint64_t>(t));
        step.z = ucb_argmax(gp, domain, step.kappa, cfg.candidates, step_rng, cfg.refine_points,
                            cfg.refine_scale);
        for (const auto& [when, z] : cfg.injected)
            if (when == t) step.z = z;
        const auto [mu, sigma] = gp.posterior(step.z.joint());
        step.mu = mu;
        step.sigma = sigma;
        step.objective = objective(step.z);
        step.observed = step.objective + (cfg.noisy_observations ? noise_rng.normal() : 0.0);
        gp.add(step.z.joint(), step.observed);
        out.ledger.record(step.kappa, step.objective);
        if (out.steps.empty() || step.objective > out.best_value) {
            out.best_step = t - 1;
            out.best_value = step.objective;
            out.best_z = step.z;
        }
        out.steps.push_back(std::move(step));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reconstruction loss |beta^T (G q - f)| on estimated Gram data, and the
// acceptance subroutine built on it.

struct LossInputs {
    Eigen::MatrixXd g;
    Eigen::VectorXd f;
    EstimatorMode mode = EstimatorMode::Exact;
    std::optional<Eigen::VectorXd> f_stderr;
};

inline double loss_value(const Eigen::VectorXd& q, const Eigen::VectorXd& beta,
                         const LossInputs& inputs) {
    const Eigen::Index count = inputs.g.rows();
    if (inputs.g.cols() != count || inputs.f.size() != count)
        throw std::invalid_argument("loss_value: gram/overlap shape mismatch");
    if (q.size() != count || beta.size() != count)
        throw std::invalid_argument("loss_value: point dimension mismatch");
    return std::abs(beta.dot(inputs.g * q - inputs.f));
}

struct BmaxsConfig {
    EstimatorConfig estimator;
    ShadowEnsemble ensemble = ShadowEnsemble::HaarGlobal;
    std::optional<KernelConfig> kernel;      // beta-domain ridge kernel; default by qubit count
    std::optional<DomainSpec> domain_override;
    UcbConfig ucb;
};

struct BmaxsResult {
    bool accepted = false;
    double best_value = 0.0;
    DomainPoint best_z;
    double final_value = 0.0;  // fresh evaluation at the last iterate
    LossInputs inputs;
    UcbResult trace;
};

// Maximizes the loss over the estimated-Gram objective for `iterations`
// steps; accepts when the final iterate's fresh evaluation (with the run's
// configured observation noise) stays at or below epsilon. The beta domain
// comes from the ridge compact-set estimate unless overridden.
inline BmaxsResult bmaxs(const StateSource& rho_un, const std::vector<QnnSample>& samples,
                         int iterations, double epsilon, double delta, const BmaxsConfig& cfg,
                         RngStream& rng) {
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw std::invalid_argument("bmaxs: epsilon outside (0,1)");
    if (samples.empty()) throw std::invalid_argument("bmaxs: empty sample set");
    const int n = samples.front().state.n();

    RngStream gram_rng = rng.split(1);
    const GramEstimate est = estimate_gram(samples, rho_un, cfg.estimator, gram_rng, cfg.ensemble);

    BmaxsResult out;
    out.inputs.g = est.g;
    out.inputs.f = est.f;
    out.inputs.mode = est.mode;

    DomainSpec domain;
    if (cfg.domain_override) {
        domain = *cfg.domain_override;
    } else {
        const KernelConfig kernel = cfg.kernel ? *cfg.kernel : default_kernel_config(n);
        const std::vector<double> targets(est.f.data(), est.f.data() + est.f.size());
        const RidgeModel model = fit_ridge(samples, targets, kernel, n);
        domain = domain_from_compact_set(estimate_compact_set(model));
    }
    domain.validate();
    if (domain.count != static_cast<int>(samples.size()))
        throw std::invalid_argument("bmaxs: domain size must match sample count");

    const auto objective = [&out](const DomainPoint& z) {
        return loss_value(z.q, z.beta, out.inputs);
    };
    RngStream loop_rng = rng.split(3);
    out.trace = ucb_maximize(objective, domain, iterations, delta, cfg.ucb, loop_rng);
    out.best_value = out.trace.best_value;
    out.best_z = out.trace.best_z;

    RngStream final_rng = rng.split(4);
    out.final_value = objective(out.trace.steps.back().z) +
                      (cfg.ucb.noisy_observations ? final_rng.normal() : 0.0);
    out.accepted = out.final_value <= epsilon;
    return out;
}

}  // namespace qsc
