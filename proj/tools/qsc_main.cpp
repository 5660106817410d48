// qsc: reproducible experiment runner over the qsc headers. Every subcommand
// reads an optional JSON config file, lets flags override it, echoes the
// fully resolved config into its outputs, and writes machine-readable
// JSON/CSV into --out. Outputs are byte-stable for a fixed config + seed;
// wall-clock metadata goes to a separate <cmd>.meta.json only.
//
// Exit codes: 0 success, 2 config error, 3 budget exhausted / inconclusive,
// 4 I/O error, 5 internal invariant violation.

#include <CLI11.hpp>
#include <json.hpp>

#include <qsc/bayesopt.hpp>
#include <qsc/entropy.hpp>
#include <qsc/intrinsic.hpp>
#include <qsc/scp.hpp>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qsc;

namespace {

// ---------------------------------------------------------------------------
// Small output helpers.

std::string f17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string cell(double v) { return f17(v); }
std::string cell(int v) { return std::to_string(v); }
std::string cell(std::uint64_t v) { return std::to_string(v); }
std::string cell(bool v) { return v ? "1" : "0"; }
std::string cell(const std::string& v) { return v; }
std::string cell(const char* v) { return v; }

struct Csv {
    std::string text;

    explicit Csv(const std::string& header) { text = header + "\n"; }

    template <typename... Ts>
    void row(const Ts&... cells) {
        std::string line;
        ((line += cell(cells), line += ','), ...);
        line.pop_back();
        text += line + "\n";
    }
};

void write_text(const fs::path& path, const std::string& body) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("write: cannot open " + path.string());
    os << body;
    if (!os) throw io_error("write: failed for " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("read: cannot open " + path);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

// Timestamps live here and only here; the data files stay byte-reproducible.
void write_meta(const fs::path& dir, const std::string& command,
                const std::vector<std::string>& outputs) {
    json m;
    m["command"] = command;
    m["outputs"] = outputs;
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
    m["timestamp_utc"] = stamp;
    write_json(dir / (command + ".meta.json"), m);
}

// ---------------------------------------------------------------------------
// Config resolution: defaults < config file < flags. The file is a JSON
// object with one section per subcommand plus an optional "common" section;
// every value ends up echoed in the resolved config.

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    const std::string text = slurp(path);
    json j = json::parse(text);  // parse_error maps to exit 2
    if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
    return j;
}

class Resolver {
  public:
    Resolver(const CLI::App& cmd, const json& file) : cmd_(cmd) {
        section_ = file.value(cmd.get_name(), json::object());
        common_ = file.value("common", json::object());
        if (!section_.is_object())
            throw std::invalid_argument("config section '" + cmd.get_name() + "': must be an object");
        if (!common_.is_object())
            throw std::invalid_argument("config section 'common': must be an object");
        resolved_["command"] = cmd.get_name();
    }

    template <typename T>
    void fold(const std::string& flag, const std::string& key, T& value) {
        if (cmd_.count(flag) == 0) {
            const json* src = nullptr;
            if (section_.contains(key))
                src = &section_.at(key);
            else if (common_.contains(key))
                src = &common_.at(key);
            if (src) {
                try {
                    value = src->get<T>();
                } catch (const json::exception&) {
                    throw std::invalid_argument("config field '" + key + "': wrong type");
                }
            }
        }
        resolved_[key] = value;
    }

    json take() { return std::move(resolved_); }

  private:
    const CLI::App& cmd_;
    json section_;
    json common_;
    json resolved_;
};

// ---------------------------------------------------------------------------
// Shared options and enum spellings.

struct Common {
    std::string config_path;
    std::uint64_t seed = 1;
    std::string out = ".";
    std::string mode = "exact";
    int threads = 1;
    bool emit_plot_data = false;
};

void add_common(CLI::App* c, Common& o) {
    c->add_option("--config", o.config_path, "JSON config file; flags override file values");
    c->add_option("--seed", o.seed, "master RNG seed (default 1)");
    c->add_option("--out", o.out, "output directory (default .)");
    c->add_option("--mode", o.mode, "estimator mode: exact | shadow (sampled Bell circuit for entropy)")
        ->check(CLI::IsMember({"exact", "shadow"}));
    c->add_option("--threads", o.threads, "degree-of-parallelism hint, echoed to the modules");
    c->add_flag("--emit-plot-data", o.emit_plot_data, "write additional tidy CSVs for plotting");
}

// Folds the common flags and returns the output directory, created.
fs::path fold_common(Resolver& r, Common& com) {
    r.fold("--seed", "seed", com.seed);
    r.fold("--out", "out", com.out);
    r.fold("--mode", "mode", com.mode);
    r.fold("--threads", "threads", com.threads);
    r.fold("--emit-plot-data", "emit_plot_data", com.emit_plot_data);
    if (com.mode != "exact" && com.mode != "shadow")
        throw std::invalid_argument("config field 'mode': must be exact or shadow");
    if (com.threads < 1) throw std::invalid_argument("config field 'threads': must be >= 1");
    fs::path out(com.out);
    fs::create_directories(out);
    return out;
}

ShadowEnsemble ensemble_from_flag(const std::string& s) {
    if (s == "haar") return ShadowEnsemble::HaarGlobal;
    if (s == "clifford") return ShadowEnsemble::CliffordGlobal;
    throw std::invalid_argument("config field 'ensemble': must be haar or clifford");
}

DensityMatrix load_density(const std::string& path) {
    auto v = load_qstate(path);
    if (std::holds_alternative<DensityMatrix>(v)) return std::get<DensityMatrix>(std::move(v));
    return DensityMatrix::pure(std::get<StateVector>(v));
}

// ---------------------------------------------------------------------------
// prepare: sample (or load) a circuit, push |0...0> through it and the
// channel, write the density matrix plus provenance.

struct PrepareOpts {
    int n = 2;
    std::string layout = "brickwork";
    int depth = 1;
    std::string channel = "identity";
    double strength = 0.0;
    std::string circuit_in;
};

int run_prepare(const CLI::App& cmd, Common com, PrepareOpts o, const json& file) {
    Resolver r(cmd, file);
    const fs::path out = fold_common(r, com);
    r.fold("--n", "n", o.n);
    r.fold("--layout", "layout", o.layout);
    r.fold("--depth", "depth", o.depth);
    r.fold("--channel", "channel", o.channel);
    r.fold("--strength", "strength", o.strength);
    r.fold("--circuit-in", "circuit_in", o.circuit_in);

    Architecture arch;
    ParameterSet params;
    if (!o.circuit_in.empty()) {
        std::tie(arch, params) = parse_circuit(slurp(o.circuit_in));
    } else {
        arch = build_architecture(o.n, layout_from_name(o.layout), o.depth);
        // Same scheme as the sampled families: child 0 of the master stream,
        // so "prepare --seed s" is sample index 0 of the seed-s family.
        RngStream rng(com.seed);
        RngStream child = rng.split(0);
        params.values.resize(arch.param_count());
        for (auto& v : params.values) v = 2.0 * std::numbers::pi * child.uniform();
    }

    ChannelSpec spec;
    spec.kind = channel_kind_from_name(o.channel);
    spec.strength = o.strength;
    const DensityMatrix rho = prepare_noisy_state(arch, params, spec);

    save_qstate((out / "state.qstate").string(), rho);
    save_qstate((out / "psi.qstate").string(), prepare_qnn_state(arch, params));
    write_text(out / "circuit.txt", serialize_circuit(arch, params));

    json j;
    j["config"] = r.take();
    j["n"] = arch.n;
    j["layout"] = layout_name(arch.layout);
    j["depth"] = arch.depth;
    j["width"] = arch.width;
    j["channel"] = channel_kind_name(spec.kind);
    j["strength"] = spec.strength;
    j["purity"] = trace_power_exact(rho, 2);
    j["files"] = {{"state", "state.qstate"}, {"clean", "psi.qstate"}, {"circuit", "circuit.txt"}};
    write_json(out / "prepare.json", j);
    write_meta(out, "prepare", {"state.qstate", "psi.qstate", "circuit.txt", "prepare.json"});

    std::cout << "prepared n=" << arch.n << " depth=" << arch.depth << " "
              << channel_kind_name(spec.kind) << "(" << spec.strength
              << "), purity " << j["purity"].get<double>() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// purity-bound: eta(R) table for a channel, with optional Monte Carlo
// cross-check columns when --trials >= 30.

struct PurityOpts {
    int n = 1;
    std::string channel = "local_depolarizing";
    double strength = 0.2;
    int depth = 3;
    int trials = 0;
};

int run_purity_bound(const CLI::App& cmd, Common com, PurityOpts o, const json& file) {
    Resolver r(cmd, file);
    const fs::path out = fold_common(r, com);
    r.fold("--n", "n", o.n);
    r.fold("--channel", "channel", o.channel);
    r.fold("--strength", "strength", o.strength);
    r.fold("--depth", "depth", o.depth);
    r.fold("--trials", "trials", o.trials);
    if (o.depth < 1) throw std::invalid_argument("config field 'depth': must be >= 1");
    if (o.trials != 0 && o.trials < 30)
        throw std::invalid_argument("config field 'trials': 0 or >= 30");

    ChannelSpec spec;
    spec.kind = channel_kind_from_name(o.channel);
    spec.strength = o.strength;
    spec.validate(o.n);
    const double f = channel_f_metric(spec, o.n);

    const bool mc = o.trials >= 30;
    Csv csv(mc ? "n,channel,strength,depth,f,d,eta,mc_mean,mc_stderr,trials"
                : "n,channel,strength,depth,f,d,eta");
    json rows = json::array();
    RngStream rng(com.seed);
    for (int depth = 1; depth <= o.depth; ++depth) {
        const double eta = purity_lower_bound(f, o.n, depth);
        json row;
        row["depth"] = depth;
        row["f"] = f;
        row["eta"] = eta;
        if (mc) {
            RngStream child = rng.split(static_cast<std::uint64_t>(depth));
            const auto [m, se] = monte_carlo_overlap(spec, o.n, depth, o.trials, child);
            row["mc_mean"] = m;
            row["mc_stderr"] = se;
            csv.row(o.n, o.channel, o.strength, depth, f, static_cast<std::uint64_t>(dim_of(o.n)),
                    eta, m, se, o.trials);
        } else {
            csv.row(o.n, o.channel, o.strength, depth, f, static_cast<std::uint64_t>(dim_of(o.n)),
                    eta);
        }
        rows.push_back(row);
    }

    json j;
    j["config"] = r.take();
    j["n"] = o.n;
    j["channel"] = o.channel;
    j["strength"] = o.strength;
    j["f"] = f;
    j["rows"] = rows;
    write_json(out / "purity.json", j);
    write_text(out / "purity.csv", csv.text);
    write_meta(out, "purity-bound", {"purity.json", "purity.csv"});

    std::cout << "purity bound: n=" << o.n << " f=" << f << ", " << o.depth << " depth rows\n";
    return 0;
}

// ---------------------------------------------------------------------------
// scp: full depth search against a prepared target state.

struct ScpOpts {
    std::string state;
    std::string layout = "brickwork";
    double epsilon = 0.1;
    double delta = 0.1;
    int k_exponent = 2;
    int n_cap = 64;
    int t_cap = 400;
    int budget = 0;  // 0 = unlimited
    int snapshots = 1000;
    int batches = 1;
    std::string ensemble = "haar";
    int candidates = 256;
    int refine = 32;
};

int run_scp(const CLI::App& cmd, Common com, ScpOpts o, const json& file) {
    Resolver r(cmd, file);
    const fs::path out = fold_common(r, com);
    r.fold("--state", "state", o.state);
    r.fold("--layout", "layout", o.layout);
    r.fold("--epsilon", "epsilon", o.epsilon);
    r.fold("--delta", "delta", o.delta);
    r.fold("--k-exponent", "k_exponent", o.k_exponent);
    r.fold("--n-cap", "n_cap", o.n_cap);
    r.fold("--t-cap", "t_cap", o.t_cap);
    r.fold("--budget", "budget", o.budget);
    r.fold("--snapshots", "snapshots", o.snapshots);
    r.fold("--batches", "batches", o.batches);
    r.fold("--ensemble", "ensemble", o.ensemble);
    r.fold("--candidates", "candidates", o.candidates);
    r.fold("--refine", "refine", o.refine);
    if (o.state.empty()) throw std::invalid_argument("config field 'state': required");
    if (o.budget < 0) throw std::invalid_argument("config field 'budget': must be >= 0");

    const DensityMatrix rho = load_density(o.state);
    const StateSource src = com.mode == "exact" ? StateSource::exact(rho)
                                                : StateSource::shadow(rho);
    ScpConfig cfg;
    cfg.epsilon = o.epsilon;
    cfg.delta = o.delta;
    cfg.k_exponent = o.k_exponent;
    cfg.n_cap = o.n_cap;
    cfg.t_cap = o.t_cap;
    if (o.budget > 0) cfg.probe_budget = o.budget;
    cfg.estimator.mode = com.mode == "exact" ? EstimatorMode::Exact : EstimatorMode::Shadow;
    cfg.estimator.num_snapshots = o.snapshots;
    cfg.estimator.mom_batches = o.batches;
    cfg.ensemble = ensemble_from_flag(o.ensemble);
    cfg.ucb.candidates = o.candidates;
    cfg.ucb.refine_points = o.refine;

    RngStream rng(com.seed);
    const ScpVerdict v = qsc::run_scp(src, layout_from_name(o.layout), cfg, rng);

    Csv csv("depth,accepted,best_value,final_value,T_used,N_used,seed");
    for (const auto& p : v.probes)
        csv.row(p.depth, p.accepted, p.best_value, p.final_value, p.t_used, p.n_used, p.seed);

    json j;
    j["config"] = r.take();
    j["verdict"] = verdict_to_json(v);
    j["report"] = ssap_report(v, rho.n());
    write_json(out / "scp.json", j);
    write_text(out / "scp_probes.csv", csv.text);
    write_meta(out, "scp", {"scp.json", "scp_probes.csv"});

    std::cout << ssap_report(v, rho.n());
    return v.outcome == Outcome::Inconclusive ? 3 : 0;
}

// ---------------------------------------------------------------------------
// bmaxs: one adversarial-loss maximization run at a fixed depth.

struct BmaxsOpts {
    std::string state;
    std::string layout = "brickwork";
    int depth = 1;
    int samples = 8;
    int iterations = 25;
    double epsilon = 0.1;
    double delta = 0.1;
    int snapshots = 1000;
    int batches = 1;
    std::string ensemble = "haar";
    int candidates = 256;
    int refine = 32;
};

int run_bmaxs(const CLI::App& cmd, Common com, BmaxsOpts o, const json& file) {
    Resolver r(cmd, file);
    const fs::path out = fold_common(r, com);
    r.fold("--state", "state", o.state);
    r.fold("--layout", "layout", o.layout);
    r.fold("--depth", "depth", o.depth);
    r.fold("--samples", "samples", o.samples);
    r.fold("--iterations", "iterations", o.iterations);
    r.fold("--epsilon", "epsilon", o.epsilon);
    r.fold("--delta", "delta", o.delta);
    r.fold("--snapshots", "snapshots", o.snapshots);
    r.fold("--batches", "batches", o.batches);
    r.fold("--ensemble", "ensemble", o.ensemble);
    r.fold("--candidates", "candidates", o.candidates);
    r.fold("--refine", "refine", o.refine);
    if (o.state.empty()) throw std::invalid_argument("config field 'state': required");

    const DensityMatrix rho = load_density(o.state);
    const Architecture arch = build_architecture(rho.n(), layout_from_name(o.layout), o.depth);
    const StateSource src = com.mode == "exact" ? StateSource::exact(rho)
                                                : StateSource::shadow(rho);
    BmaxsConfig cfg;
    cfg.estimator.mode = com.mode == "exact" ? EstimatorMode::Exact : EstimatorMode::Shadow;
    cfg.estimator.num_snapshots = o.snapshots;
    cfg.estimator.mom_batches = o.batches;
    cfg.ensemble = ensemble_from_flag(o.ensemble);
    cfg.ucb.candidates = o.candidates;
    cfg.ucb.refine_points = o.refine;

    // Distinct child keys: bmaxs splits 1/3/4 off its own stream internally.
    RngStream rng(com.seed);
    RngStream sample_rng = rng.split(10);
    const std::vector<QnnSample> set = sample_qnn_set(arch, o.samples, sample_rng);
    RngStream opt_rng = rng.split(11);
    const BmaxsResult res = bmaxs(src, set, o.iterations, o.epsilon, o.delta, cfg, opt_rng);

    Csv csv("t,kappa,mu,sigma,objective,observed,best_so_far");
    double best = -1.0;
    for (const auto& s : res.trace.steps) {
        best = std::max(best, s.objective);
        csv.row(s.t, s.kappa, s.mu, s.sigma, s.objective, s.observed, best);
    }

    json j;
    j["config"] = r.take();
    j["accepted"] = res.accepted;
    j["best_value"] = res.best_value;
    j["best_step"] = res.trace.best_step;
    j["final_value"] = res.final_value;
    j["epsilon"] = o.epsilon;
    j["samples"] = o.samples;
    j["iterations"] = o.iterations;
    j["estimator_mode"] = estimator_mode_name(res.inputs.mode);
    write_json(out / "bmaxs.json", j);
    write_text(out / "bmaxs_trace.csv", csv.text);
    std::vector<std::string> outputs{"bmaxs.json", "bmaxs_trace.csv"};

    if (com.emit_plot_data) {
        Csv pts("t,kind,index,value");
        for (const auto& s : res.trace.steps) {
            for (Eigen::Index i = 0; i < s.z.q.size(); ++i)
                pts.row(s.t, "q", static_cast<int>(i), s.z.q(i));
            for (Eigen::Index i = 0; i < s.z.beta.size(); ++i)
                pts.row(s.t, "beta", static_cast<int>(i), s.z.beta(i));
        }
        write_text(out / "bmaxs_points.csv", pts.text);
        outputs.push_back("bmaxs_points.csv");
    }
    write_meta(out, "bmaxs", outputs);

    std::cout << "bmaxs: " << (res.accepted ? "accepted" : "rejected")
              << ", best " << res.best_value << ", final " << res.final_value << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// validate-intrinsic: ridge fit on a sampled family, error vs the bound.

struct IntrinsicOpts {
    int n = 2;
    std::string layout = "brickwork";
    int depth = 1;
    int count = 0;  // 0 = derive from epsilon via L R n^2 / eps^2
    int probes = 50;
    double epsilon = 0.5;
    std::string channel = "identity";
    double strength = 0.0;
    std::string state;
};

int run_validate_intrinsic(const CLI::App& cmd, Common com, IntrinsicOpts o, const json& file) {
    Resolver r(cmd, file);
    const fs::path out = fold_common(r, com);
    r.fold("--n", "n", o.n);
    r.fold("--layout", "layout", o.layout);
    r.fold("--depth", "depth", o.depth);
    r.fold("--count", "count", o.count);
    r.fold("--probes", "probes", o.probes);
    r.fold("--epsilon", "epsilon", o.epsilon);
    r.fold("--channel", "channel", o.channel);
    r.fold("--strength", "strength", o.strength);
    r.fold("--state", "state", o.state);
    if (!(o.epsilon > 0.0)) throw std::invalid_argument("config field 'epsilon': must be > 0");
    if (o.count < 0) throw std::invalid_argument("config field 'count': must be >= 0");

    const Architecture arch = build_architecture(o.n, layout_from_name(o.layout), o.depth);
    int count = o.count;
    if (count == 0)
        count = static_cast<int>(std::ceil(arch.width * arch.depth * o.n * o.n /
                                           (o.epsilon * o.epsilon)));

    RngStream rng(com.seed);
    DensityMatrix rho = [&] {
        if (!o.state.empty()) return load_density(o.state);
        // Fresh target from the same family, pushed through the channel.
        ChannelSpec spec;
        spec.kind = channel_kind_from_name(o.channel);
        spec.strength = o.strength;
        RngStream target_rng = rng.split(7);
        ParameterSet params;
        params.values.resize(arch.param_count());
        for (auto& v : params.values) v = 2.0 * std::numbers::pi * target_rng.uniform();
        return prepare_noisy_state(arch, params, spec);
    }();
    if (rho.n() != o.n) throw std::invalid_argument("validate-intrinsic: state has wrong qubit count");

    const IntrinsicValidation rep =
        validate_intrinsic_connection(arch, arch.depth, count, o.probes, rho, rng);

    int in_band = 0;
    for (double s : rep.beta_sums)
        if (s >= 0.95 && s <= 1.05) ++in_band;

    Csv csv("probe,abs_error,beta_sum");
    for (std::size_t i = 0; i < rep.probe_errors.size(); ++i)
        csv.row(static_cast<int>(i), rep.probe_errors[i], rep.beta_sums[i]);

    json j;
    j["config"] = r.take();
    j["n"] = o.n;
    j["depth"] = arch.depth;
    j["width"] = arch.width;
    j["count"] = count;
    j["probes"] = o.probes;
    j["mean_abs_error"] = rep.mean_abs_error;
    j["bound"] = rep.bound;
    j["beta_band_fraction"] = o.probes > 0 ? static_cast<double>(in_band) / o.probes : 0.0;
    j["target"] = o.state.empty() ? std::string("sampled") : o.state;
    write_json(out / "intrinsic.json", j);
    write_text(out / "intrinsic.csv", csv.text);
    write_meta(out, "validate-intrinsic", {"intrinsic.json", "intrinsic.csv"});

    std::cout << "intrinsic: mean_abs_error " << rep.mean_abs_error << " vs bound " << rep.bound
              << ", beta-sum band " << in_band << "/" << o.probes << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// entropy: polynomial von Neumann estimate from trace powers.

struct EntropyOpts {
    std::string state;
    double eta = 0.25;
    double eps = 0.05;
    int shots = 0;  // 0 = n^2 ln^2 n schedule
};

int run_entropy(const CLI::App& cmd, Common com, EntropyOpts o, const json& file) {
    Resolver r(cmd, file);
    const fs::path out = fold_common(r, com);
    r.fold("--state", "state", o.state);
    r.fold("--eta", "eta", o.eta);
    r.fold("--eps", "eps", o.eps);
    r.fold("--shots", "shots", o.shots);
    if (o.state.empty()) throw std::invalid_argument("config field 'state': required");

    // An uncertifiable (eta, eps) pair is a config error, not an internal one;
    // validate it before touching any input file.
    try {
        entropy_poly(o.eta, o.eps);
    } catch (const std::runtime_error& e) {
        throw std::invalid_argument(e.what());
    }

    const DensityMatrix rho = load_density(o.state);
    const BellMode bell = com.mode == "exact" ? BellMode::ExactExpectation : BellMode::Sampled;

    RngStream rng(com.seed);
    BellRunConfig base;
    base.shots = o.shots;
    base.mode = bell;
    const EntropyEstimate est = estimate_entropy(rho, o.eta, o.eps, base, rng);

    const int n = rho.n();
    const int shots_resolved = o.shots > 0 ? o.shots : default_shots(n);
    const int n_q = bell == BellMode::Sampled ? shots_resolved : 0;

    // Replay the per-order child streams; split() is non-advancing, so these
    // rows are the exact values the summary was built from.
    Csv csv("n,l,method,mode,estimate,stderr,N_Q,seed");
    for (int l = 1; l <= est.degree; ++l) {
        BellRunConfig c = base;
        c.l = l;
        RngStream child = rng.split(static_cast<std::uint64_t>(l));
        const auto [tp, se] = trace_power_swap(rho, c, child);
        csv.row(n, l, "shift_test", bell_mode_name(bell), tp, se, n_q, child.seed());
    }
    std::vector<std::string> outputs{"entropy.json", "entropy.csv"};
    if (com.emit_plot_data) {
        // Diagnostic rows for the transversal parity circuit conventions.
        Csv pcsv("n,l,method,mode,estimate,stderr,N_Q,seed");
        for (int l = 2; l <= est.degree; ++l) {
            BellRunConfig c = base;
            c.l = l;
            RngStream child = rng.split(1000 + static_cast<std::uint64_t>(l));
            try {
                const ParityEstimate pe = bell_parity_estimate(rho, c, child);
                pcsv.row(n, l, "parity_bit", bell_mode_name(bell), pe.mean_bit, pe.stderr_bit,
                         pe.shots, child.seed());
                pcsv.row(n, l, "parity_sign", bell_mode_name(bell), pe.mean_sign, pe.stderr_sign,
                         pe.shots, child.seed());
            } catch (const std::length_error&) {
                break;  // register no longer fits under the dimension cap
            }
        }
        write_text(out / "entropy_parity.csv", pcsv.text);
        outputs.push_back("entropy_parity.csv");
    }

    json j;
    j["config"] = r.take();
    j["n"] = n;
    j["eta"] = o.eta;
    j["eps"] = o.eps;
    j["degree_certified"] = est.poly.degree;
    j["degree_used"] = est.degree;
    j["truncated"] = est.truncated;
    j["bound"] = est.poly.bound();
    j["s_hat"] = est.value;
    j["std_err"] = est.std_err;
    j["relative_entropy_to_mixed"] = relative_entropy_to_mixed(est.value, n);
    j["screen_uniform"] = relative_entropy_screen(est.value, n);
    j["shots_resolved"] = shots_resolved;
    write_json(out / "entropy.json", j);
    write_text(out / "entropy.csv", csv.text);
    write_meta(out, "entropy", outputs);

    std::cout << "entropy: S_hat " << est.value << " nats (degree " << est.degree << ", bound "
              << est.poly.bound() << ")\n";
    if (est.truncated)
        std::cout << "warning: series truncated at l=" << est.degree << " of " << est.poly.degree
                  << " by the dimension cap; the partial sum is not certified\n";
    return 0;
}

// ---------------------------------------------------------------------------
// shadows: collect and store a snapshot set, optionally estimate a fidelity.

struct ShadowsOpts {
    std::string state;
    int snapshots = 1000;
    int batches = 1;
    std::string ensemble = "haar";
    std::string target;
};

int run_shadows(const CLI::App& cmd, Common com, ShadowsOpts o, const json& file) {
    Resolver r(cmd, file);
    const fs::path out = fold_common(r, com);
    r.fold("--state", "state", o.state);
    r.fold("--snapshots", "snapshots", o.snapshots);
    r.fold("--batches", "batches", o.batches);
    r.fold("--ensemble", "ensemble", o.ensemble);
    r.fold("--target", "target", o.target);
    if (o.state.empty()) throw std::invalid_argument("config field 'state': required");

    const DensityMatrix rho = load_density(o.state);
    RngStream rng(com.seed);
    const ShadowSet set = collect_shadows(rho, o.snapshots, ensemble_from_flag(o.ensemble), rng);
    save_shadows((out / "shadows.bin").string(), set);

    Csv csv("k,unitary_seed,outcome");
    for (std::size_t k = 0; k < set.snapshots.size(); ++k)
        csv.row(static_cast<int>(k), set.snapshots[k].unitary_seed, set.snapshots[k].outcome);

    json j;
    j["config"] = r.take();
    j["n"] = set.n;
    j["ensemble"] = ensemble_name(set.ensemble);
    j["snapshots"] = static_cast<int>(set.snapshots.size());
    j["master_seed"] = set.master_seed;
    j["files"] = {{"shadows", "shadows.bin"}};
    if (!o.target.empty()) {
        auto v = load_qstate(o.target);
        if (!std::holds_alternative<StateVector>(v))
            throw std::invalid_argument("shadows: target must be a state vector file");
        EstimatorConfig ec;
        ec.mode = EstimatorMode::Shadow;
        ec.num_snapshots = o.snapshots;
        ec.mom_batches = o.batches;
        const auto [fv, fse] = estimate_fidelity(set, std::get<StateVector>(v), ec);
        j["fidelity"] = {{"value", fv}, {"std_err", fse}};
    } else {
        j["fidelity"] = nullptr;
    }
    write_json(out / "shadows.json", j);
    write_text(out / "shadows.csv", csv.text);
    write_meta(out, "shadows", {"shadows.json", "shadows.csv", "shadows.bin"});

    std::cout << "shadows: " << set.snapshots.size() << " snapshots ("
              << ensemble_name(set.ensemble) << ")\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qsc: seeded, file-driven experiment runner for structured-state analysis"};
    app.require_subcommand(1);
    app.footer("Environment: QSC_DIM_CAP overrides the dense-simulation dimension cap "
               "(default 4096).");

    Common com;
    PrepareOpts po;
    PurityOpts uo;
    ScpOpts so;
    BmaxsOpts bo;
    IntrinsicOpts io;
    EntropyOpts eo;
    ShadowsOpts ho;

    CLI::App* prepare = app.add_subcommand("prepare", "sample a circuit and write a noisy state");
    add_common(prepare, com);
    prepare->add_option("--n", po.n, "qubit count");
    prepare->add_option("--layout", po.layout, "brickwork | staircase");
    prepare->add_option("--depth", po.depth, "layer count");
    prepare->add_option("--channel", po.channel, "per-layer channel kind");
    prepare->add_option("--strength", po.strength, "channel strength in [0,1]");
    prepare->add_option("--circuit-in", po.circuit_in, "load this circuit file instead of sampling");

    CLI::App* purity = app.add_subcommand("purity-bound", "overlap lower-bound table for a channel");
    add_common(purity, com);
    purity->add_option("--n", uo.n, "qubit count");
    purity->add_option("--channel", uo.channel, "channel kind");
    purity->add_option("--strength", uo.strength, "channel strength in [0,1]");
    purity->add_option("--depth", uo.depth, "emit rows for depths 1..depth");
    purity->add_option("--trials", uo.trials, "Monte Carlo cross-check trials (0 = off, else >= 30)");

    CLI::App* scp = app.add_subcommand("scp", "depth search for a structured approximation");
    add_common(scp, com);
    scp->add_option("--state", so.state, "target state file");
    scp->add_option("--layout", so.layout, "brickwork | staircase");
    scp->add_option("--epsilon", so.epsilon, "acceptance threshold");
    scp->add_option("--delta", so.delta, "confidence parameter");
    scp->add_option("--k-exponent", so.k_exponent, "iteration growth exponent");
    scp->add_option("--n-cap", so.n_cap, "per-depth sample-count cap");
    scp->add_option("--t-cap", so.t_cap, "per-depth iteration cap");
    scp->add_option("--budget", so.budget, "total iteration budget (0 = unlimited)");
    scp->add_option("--snapshots", so.snapshots, "shadow snapshots per state");
    scp->add_option("--batches", so.batches, "median-of-means batches");
    scp->add_option("--ensemble", so.ensemble, "haar | clifford");
    scp->add_option("--candidates", so.candidates, "acquisition candidate pool");
    scp->add_option("--refine", so.refine, "local refinement points");

    CLI::App* bm = app.add_subcommand("bmaxs", "single adversarial-loss maximization run");
    add_common(bm, com);
    bm->add_option("--state", bo.state, "target state file");
    bm->add_option("--layout", bo.layout, "brickwork | staircase");
    bm->add_option("--depth", bo.depth, "sample-family depth");
    bm->add_option("--samples", bo.samples, "circuit sample count");
    bm->add_option("--iterations", bo.iterations, "optimizer iterations");
    bm->add_option("--epsilon", bo.epsilon, "acceptance threshold");
    bm->add_option("--delta", bo.delta, "confidence parameter");
    bm->add_option("--snapshots", bo.snapshots, "shadow snapshots per state");
    bm->add_option("--batches", bo.batches, "median-of-means batches");
    bm->add_option("--ensemble", bo.ensemble, "haar | clifford");
    bm->add_option("--candidates", bo.candidates, "acquisition candidate pool");
    bm->add_option("--refine", bo.refine, "local refinement points");

    CLI::App* intr = app.add_subcommand("validate-intrinsic",
                                        "ridge-regression error vs the dimension bound");
    add_common(intr, com);
    intr->add_option("--n", io.n, "qubit count");
    intr->add_option("--layout", io.layout, "brickwork | staircase");
    intr->add_option("--depth", io.depth, "sample-family depth");
    intr->add_option("--count", io.count, "training samples (0 = derive from epsilon)");
    intr->add_option("--probes", io.probes, "fresh probe circuits");
    intr->add_option("--epsilon", io.epsilon, "target error when deriving the sample count");
    intr->add_option("--channel", io.channel, "channel for the sampled target");
    intr->add_option("--strength", io.strength, "channel strength for the sampled target");
    intr->add_option("--state", io.state, "use this target state file instead of sampling");

    CLI::App* ent = app.add_subcommand("entropy", "polynomial von Neumann entropy estimate");
    add_common(ent, com);
    ent->add_option("--state", eo.state, "input state file");
    ent->add_option("--eta", eo.eta, "spectral floor");
    ent->add_option("--eps", eo.eps, "polynomial accuracy target");
    ent->add_option("--shots", eo.shots, "shots per trace power (0 = n^2 ln^2 n schedule)");

    CLI::App* sh = app.add_subcommand("shadows", "collect and store a classical-shadow set");
    add_common(sh, com);
    sh->add_option("--state", ho.state, "input state file");
    sh->add_option("--snapshots", ho.snapshots, "snapshot count");
    sh->add_option("--batches", ho.batches, "median-of-means batches");
    sh->add_option("--ensemble", ho.ensemble, "haar | clifford");
    sh->add_option("--target", ho.target, "state-vector file for a fidelity estimate");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        const json file = load_config(com.config_path);
        if (app.got_subcommand(prepare)) return run_prepare(*prepare, com, po, file);
        if (app.got_subcommand(purity)) return run_purity_bound(*purity, com, uo, file);
        if (app.got_subcommand(scp)) return run_scp(*scp, com, so, file);
        if (app.got_subcommand(bm)) return run_bmaxs(*bm, com, bo, file);
        if (app.got_subcommand(intr)) return run_validate_intrinsic(*intr, com, io, file);
        if (app.got_subcommand(ent)) return run_entropy(*ent, com, eo, file);
        if (app.got_subcommand(sh)) return run_shadows(*sh, com, ho, file);
        std::cerr << "error: no subcommand\n";
        return 2;
    } catch (const io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const json::exception& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::length_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 5;
    }
}
