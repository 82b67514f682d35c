#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "speclab/ensembles.hpp"
#include "speclab/io.hpp"
#include "speclab/lowenergy.hpp"
#include "speclab/parallel.hpp"
#include "speclab/spectral.hpp"
#include "speclab/universality.hpp"

#include <json.hpp>

namespace speclab {

using nlohmann::json;

namespace cfg {

template <typename T>
T require(const json& j, const char* key) {
    if (!j.contains(key)) throw ConfigError(std::string("config: missing required field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: bad field '") + key + "': " + e.what());
    }
}

template <typename T>
T value_or(const json& j, const char* key, T def) {
    if (!j.contains(key)) return def;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: bad field '") + key + "': " + e.what());
    }
}

/// p may be a number or "inf".
inline double pnorm_order(const json& v) {
    if (v.is_string()) {
        if (v.get<std::string>() == "inf") return kInfNorm;
        throw ConfigError("config: p must be a number or \"inf\"");
    }
    return v.get<double>();
}

}  // namespace cfg

struct RunOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> threads;
};

/// Common run context resolved from (config, overrides, environment).
struct RunContext {
    std::string experiment;
    json config;
    std::uint64_t seed = 0;
    int threads = 1;
    std::filesystem::path out_dir;
    std::string config_hash;
};

inline RunContext make_context(const std::string& experiment, json config, const RunOverrides& o) {
    RunContext ctx;
    ctx.experiment = experiment;
    if (o.seed) config["seed"] = *o.seed;
    if (o.threads) config["threads"] = *o.threads;
    if (o.out_dir) config["out_dir"] = *o.out_dir;
    if (!config.contains("seed"))
        throw ConfigError("config: 'seed' is mandatory (no entropy defaults)");
    ctx.seed = cfg::require<std::uint64_t>(config, "seed");
    ctx.threads = cfg::value_or<int>(config, "threads", 1);
    if (ctx.threads < 1) throw ConfigError("config: threads must be >= 1");
    std::string out;
    if (config.contains("out_dir")) {
        out = cfg::require<std::string>(config, "out_dir");
    } else {
        const char* root = std::getenv("SPECLAB_OUT_ROOT");
        out = (root ? std::string(root) : std::string("out")) + "/" + experiment;
    }
    ctx.out_dir = out;
    ctx.config = std::move(config);
    // the hash covers the effective config minus the parallelism knob, which
    // never changes payloads
    json hashed = ctx.config;
    hashed.erase("threads");
    hashed["experiment"] = experiment;
    ctx.config_hash = sha1_hex(hashed.dump());
    return ctx;
}

// ---------------------------------------------------------------------------
// Instance files
// ---------------------------------------------------------------------------

struct LoadedInstance {
    EnsembleSpec spec;
    std::optional<SparsePauliSum> pauli;
    std::optional<DenseMatrix> matrix;
    std::string content_hash;

    DenseMatrix dense(std::int64_t max_dim = 4096) const {
        if (matrix) return *matrix;
        if (pauli) return pauli->to_dense(max_dim);
        throw ConfigError("instance: no payload");
    }
    std::int64_t dim() const { return matrix ? matrix->rows() : pauli->dim(); }
};

inline LoadedInstance load_instance(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    const json j = json::parse(text);
    LoadedInstance inst;
    inst.content_hash = sha1_hex(text);
    if (j.value("format", "") == "dense_complex128") {
        inst.matrix = read_dense_matrix(path);
        if (j.contains("variant")) inst.spec = EnsembleSpec::from_json(j);
        return inst;
    }
    inst.spec = EnsembleSpec::from_json(j);
    if (j.contains("terms")) {
        inst.pauli = pauli_sum_from_json(j);
    } else if (j.contains("triplets")) {
        const auto N = inst.spec.N;
        DenseMatrix M = DenseMatrix::Zero(N, N);
        for (const auto& t : j.at("triplets"))
            M(t.at(0).get<Eigen::Index>(), t.at(1).get<Eigen::Index>()) +=
                Complex(t.at(2).get<double>(), t.at(3).get<double>());
        inst.matrix = std::move(M);
    } else {
        throw ConfigError("instance: unrecognized payload in " + path.string());
    }
    return inst;
}

/// Sample instance #index of an ensemble run; pure in (spec params, seed, index).
inline LoadedInstance sample_instance(EnsembleSpec spec, std::uint64_t master_seed, int index) {
    spec.seed = RngStream(master_seed).child(static_cast<std::uint64_t>(index)).key();
    LoadedInstance inst;
    inst.spec = spec;
    RngStream stream(spec.seed);
    switch (spec.variant) {
        case EnsembleSpec::Variant::pauli_string_ensemble:
            inst.pauli = sample_pauli_string_ensemble(spec.n, spec.m, stream);
            break;
        case EnsembleSpec::Variant::complete_k_local:
            inst.pauli = sample_complete_k_local(spec.n, spec.k, stream);
            break;
        case EnsembleSpec::Variant::gue:
            inst.matrix = sample_gue(spec.N, stream);
            break;
        case EnsembleSpec::Variant::complex_signed_perm_sum:
            inst.matrix = sample_signed_perm_sum(static_cast<int>(spec.N), spec.m, stream,
                                                 SignedPermVariant::complex_signs)
                              .to_dense();
            break;
        case EnsembleSpec::Variant::real_signed_perm_sum:
            inst.matrix = sample_signed_perm_sum(static_cast<int>(spec.N), spec.m, stream,
                                                 SignedPermVariant::real_signs)
                              .to_dense();
            break;
    }
    inst.content_hash = sha1_hex(inst.spec.to_json().dump());
    return inst;
}

/// Resolve the config's instance source: an "instance" file path or an
/// inline "ensemble" spec (instance #index of the run's stream).
inline LoadedInstance resolve_instance(const RunContext& ctx, int index = 0) {
    if (ctx.config.contains("instance"))
        return load_instance(cfg::require<std::string>(ctx.config, "instance"));
    if (ctx.config.contains("ensemble")) {
        const EnsembleSpec spec = EnsembleSpec::from_json(ctx.config.at("ensemble"));
        return sample_instance(spec, ctx.seed, index);
    }
    throw ConfigError("config: need 'instance' or 'ensemble'");
}

// ---------------------------------------------------------------------------
// Experiment runners. Each writes its outputs plus exactly one manifest and
// returns the manifest. Payload bytes depend only on (config minus threads).
// ---------------------------------------------------------------------------

namespace detail {

class RunWriter {
public:
    explicit RunWriter(const RunContext& ctx) : ctx_(ctx), t0_(std::chrono::steady_clock::now()) {
        std::filesystem::create_directories(ctx.out_dir);
    }

    std::filesystem::path path(const std::string& name) const { return ctx_.out_dir / name; }

    void emit_csv(const std::string& name, const CsvWriter& csv) {
        csv.write(path(name));
        outputs_.push_back(name);
    }
    void emit_json(const std::string& name, const json& j) {
        write_text_file(path(name), j.dump(2) + "\n");
        outputs_.push_back(name);
    }
    void emit_named(const std::string& name) { outputs_.push_back(name); }

    Manifest finish() {
        Manifest m;
        m.experiment = ctx_.experiment;
        m.params = ctx_.config;
        m.seed = ctx_.seed;
        m.config_hash = ctx_.config_hash;
        m.wall_time_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - t0_)
                             .count();
        m.outputs = outputs_;
        m.write(path(ctx_.experiment + "_manifest.json"));
        return m;
    }

private:
    const RunContext& ctx_;
    std::chrono::steady_clock::time_point t0_;
    std::vector<std::string> outputs_;
};

inline std::vector<std::string> comparison_header() {
    return {"m",     "p",     "eta",       "omega",     "dim",      "lhs_pauli", "lhs_gue",
            "difference", "std_error", "bound", "reference", "trend_delta", "trend_se",
            "trials", "low_precision"};
}

inline void add_comparison_rows(CsvWriter& csv, const std::vector<ComparisonRecord>& records) {
    for (const auto& r : records)
        csv.add_row({CsvWriter::cell(r.m), CsvWriter::cell(r.p), CsvWriter::cell(r.eta),
                     CsvWriter::cell(r.omega), CsvWriter::cell(static_cast<std::int64_t>(r.dim)),
                     CsvWriter::cell(r.lhs_a), CsvWriter::cell(r.lhs_b),
                     CsvWriter::cell(r.difference), CsvWriter::cell(r.std_error),
                     CsvWriter::cell(r.bound), CsvWriter::cell(r.reference),
                     CsvWriter::cell(r.trend_delta), CsvWriter::cell(r.trend_se),
                     CsvWriter::cell(static_cast<std::int64_t>(r.trials)),
                     CsvWriter::cell(r.low_precision)});
}

}  // namespace detail

inline Manifest cmd_sample(const RunContext& ctx) {
    const EnsembleSpec base = EnsembleSpec::from_json(ctx.config.at("ensemble"));
    const int count = cfg::value_or<int>(ctx.config, "count", 1);
    if (count < 1) throw ConfigError("sample: count must be >= 1");
    detail::RunWriter w(ctx);
    std::vector<std::filesystem::path> written;
    try {
        for (int i = 0; i < count; ++i) {
            const LoadedInstance inst = sample_instance(base, ctx.seed, i);
            char tag[32];
            std::snprintf(tag, sizeof(tag), "instance_%03d", i);
            if (inst.pauli) {
                const std::string name = std::string(tag) + ".json";
                written.push_back(w.path(name));
                write_text_file(w.path(name),
                                pauli_sum_to_json(*inst.pauli, inst.spec).dump(2) + "\n");
                w.emit_named(name);
            } else if (inst.spec.variant == EnsembleSpec::Variant::gue || inst.matrix->rows() <= 512) {
                const std::string name = std::string(tag) + ".json";
                const std::string bin = std::string(tag) + ".bin";
                written.push_back(w.path(name));
                written.push_back(w.path(bin));
                write_dense_matrix(w.path(name), w.path(bin), *inst.matrix, inst.spec.to_json());
                w.emit_named(name);
                w.emit_named(bin);
            } else {
                const std::string name = std::string(tag) + ".json";
                written.push_back(w.path(name));
                json j = inst.spec.to_json();
                json trips = json::array();
                for (Eigen::Index r = 0; r < inst.matrix->rows(); ++r)
                    for (Eigen::Index c = 0; c < inst.matrix->cols(); ++c) {
                        const Complex v = (*inst.matrix)(r, c);
                        if (v != Complex(0, 0)) trips.push_back({r, c, v.real(), v.imag()});
                    }
                j["triplets"] = std::move(trips);
                write_text_file(w.path(name), j.dump() + "\n");
                w.emit_named(name);
            }
        }
    } catch (...) {
        for (const auto& p : written) std::filesystem::remove(p);  // no partial runs
        throw;
    }
    return w.finish();
}

inline Manifest cmd_spectrum(const RunContext& ctx) {
    const LoadedInstance inst = resolve_instance(ctx);
    const std::int64_t max_dim = cfg::value_or<std::int64_t>(ctx.config, "max_dim", 4096);
    const Spectrum s = eigenvalues(inst.dense(max_dim), max_dim);
    detail::RunWriter w(ctx);
    CsvWriter csv({"eigenvalue"});
    for (double v : s.values) csv.add_row({CsvWriter::cell(v)});
    w.emit_csv("spectrum_eigenvalues.csv", csv);
    json summary;
    summary["N"] = s.dim();
    summary["lambda_min"] = s.lambda_min();
    summary["lambda_max"] = s.lambda_max();
    json norms;
    const json orders = ctx.config.contains("p_norms") ? ctx.config.at("p_norms")
                                                       : json::array({2, 4, 6, "inf"});
    for (const auto& o : orders) {
        const double p = cfg::pnorm_order(o);
        norms[std::isinf(p) ? "inf" : (o.is_string() ? o.get<std::string>() : o.dump())] =
            schatten_p_norm(s, p);
    }
    summary["p_norms"] = norms;
    summary["instance_hash"] = inst.content_hash;
    w.emit_json("spectrum_summary.json", summary);
    return w.finish();
}

inline Manifest cmd_pnorm(const RunContext& ctx) {
    const LoadedInstance inst = resolve_instance(ctx);
    const Spectrum s = eigenvalues(inst.dense());
    json orders = ctx.config.contains("p") ? ctx.config.at("p") : json::array({2, 4, 6, "inf"});
    if (!orders.is_array()) orders = json::array({orders});
    detail::RunWriter w(ctx);
    CsvWriter csv({"p", "norm"});
    for (const auto& o : orders) {
        const double p = cfg::pnorm_order(o);
        csv.add_row({std::isinf(p) ? "inf" : format_float(p), CsvWriter::cell(schatten_p_norm(s, p))});
    }
    w.emit_csv("pnorm.csv", csv);
    return w.finish();
}

inline Manifest cmd_resolvent(const RunContext& ctx) {
    ResolventComparisonParams prm;
    prm.n = cfg::require<int>(ctx.config, "n");
    prm.p = cfg::require<int>(ctx.config, "p");
    prm.eta = cfg::require<double>(ctx.config, "eta");
    prm.omega_grid = cfg::require<std::vector<double>>(ctx.config, "omega_grid");
    prm.m_grid = cfg::require<std::vector<int>>(ctx.config, "m_grid");
    prm.trials = cfg::require<int>(ctx.config, "trials");
    prm.seed = ctx.seed;
    prm.threads = ctx.threads;
    prm.requested_se = cfg::value_or<double>(ctx.config, "requested_se", 0.0);
    const auto records = resolvent_comparison_experiment(prm);
    detail::RunWriter w(ctx);
    CsvWriter csv(detail::comparison_header());
    detail::add_comparison_rows(csv, records);
    w.emit_csv("resolvent_comparison.csv", csv);
    return w.finish();
}

inline Manifest cmd_dos(const RunContext& ctx) {
    const int instances = cfg::value_or<int>(ctx.config, "instances", 1);
    if (instances < 1) throw ConfigError("dos: instances must be >= 1");
    const int bins = cfg::value_or<int>(ctx.config, "bins", 64);
    std::vector<Spectrum> spectra(static_cast<size_t>(instances));
    parallel_for(instances, ctx.threads, [&](std::int64_t i) {
        spectra[static_cast<size_t>(i)] =
            eigenvalues(resolve_instance(ctx, static_cast<int>(i)).dense());
    });

    DOSProxyQuery q;
    if (ctx.config.contains("eps")) {
        q = dos_query_from_epsilon(cfg::require<double>(ctx.config, "eps"), spectra[0].dim());
    } else {
        q.E0 = cfg::require<double>(ctx.config, "E0");
        q.eta = cfg::require<double>(ctx.config, "eta");
        q.omega_bar = cfg::require<double>(ctx.config, "omega_bar");
        q.p = cfg::require<int>(ctx.config, "p");
    }
    q.validate();

    detail::RunWriter w(ctx);
    // pooled eigenvalue histogram over [-lim, lim]
    const double lim = cfg::value_or<double>(ctx.config, "histogram_halfwidth", 2.5);
    std::vector<std::int64_t> counts(static_cast<size_t>(bins), 0);
    std::int64_t total = 0, inside = 0;
    for (const auto& s : spectra)
        for (double v : s.values) {
            ++total;
            if (v >= -2.0 && v <= 2.0) ++inside;
            const int b = static_cast<int>((v + lim) / (2.0 * lim) * bins);
            if (b >= 0 && b < bins) ++counts[static_cast<size_t>(b)];
        }
    CsvWriter hist({"bin_lo", "bin_hi", "count", "density"});
    for (int b = 0; b < bins; ++b) {
        const double lo = -lim + 2.0 * lim * b / bins, hi = -lim + 2.0 * lim * (b + 1) / bins;
        hist.add_row({CsvWriter::cell(lo), CsvWriter::cell(hi),
                      CsvWriter::cell(counts[static_cast<size_t>(b)]),
                      CsvWriter::cell(static_cast<double>(counts[static_cast<size_t>(b)]) /
                                      (static_cast<double>(total) * 2.0 * lim / bins))});
    }
    w.emit_csv("dos_histogram.csv", hist);

    // proxy terms per grid center, averaged over instances, with the
    // semicircle reference per center
    const auto centers = dos_grid_centers(q);
    const double etap = std::pow(q.eta, q.p);
    CsvWriter proxy({"center", "proxy_term", "semicircle_term"});
    double proxy_total = 0.0;
    for (double c : centers) {
        double acc = 0.0;
        for (const auto& s : spectra) acc += etap * resolvent_trace_moment(s, {c, q.eta, q.p});
        acc /= static_cast<double>(instances);
        proxy_total += acc;
        proxy.add_row({CsvWriter::cell(c), CsvWriter::cell(acc),
                       CsvWriter::cell(etap * semicircle_resolvent_moment({c, q.eta, q.p}))});
    }
    w.emit_csv("dos_proxy.csv", proxy);

    // resolvent filter profiles (single resolvent vs p-th power)
    CsvWriter filter({"E", "weight_p2", "weight_p"});
    const double omega0 = cfg::value_or<double>(ctx.config, "filter_omega", -1.6);
    for (int i = 0; i <= 400; ++i) {
        const double E = -lim + 2.0 * lim * i / 400;
        const double d2 = (E - omega0) * (E - omega0) + q.eta * q.eta;
        filter.add_row({CsvWriter::cell(E), CsvWriter::cell(q.eta * q.eta / d2),
                        CsvWriter::cell(std::pow(q.eta * q.eta / d2, q.p / 2.0))});
    }
    w.emit_csv("dos_filter.csv", filter);

    json summary;
    summary["instances"] = instances;
    summary["histogram_mass_in_support"] = static_cast<double>(inside) / static_cast<double>(total);
    summary["proxy_total"] = proxy_total;
    summary["proxy_semicircle_total"] = dos_proxy_semicircle(q);
    summary["query"] = {{"E0", q.E0}, {"eta", q.eta}, {"omega_bar", q.omega_bar}, {"p", q.p}};
    w.emit_json("dos_summary.json", summary);
    return w.finish();
}

inline Manifest cmd_universality(const RunContext& ctx) {
    const std::string kind = cfg::require<std::string>(ctx.config, "kind");
    detail::RunWriter w(ctx);
    if (kind == "moment_comparison") {
        MomentComparisonParams prm;
        prm.n = cfg::require<int>(ctx.config, "n");
        prm.p = cfg::require<int>(ctx.config, "p");
        prm.m_grid = cfg::require<std::vector<int>>(ctx.config, "m_grid");
        prm.trials = cfg::require<int>(ctx.config, "trials");
        prm.seed = ctx.seed;
        prm.threads = ctx.threads;
        prm.requested_se = cfg::value_or<double>(ctx.config, "requested_se", 0.0);
        CsvWriter csv(detail::comparison_header());
        detail::add_comparison_rows(csv, moment_comparison_experiment(prm));
        w.emit_csv("moment_comparison.csv", csv);
    } else if (kind == "norm_tail") {
        const int n = cfg::require<int>(ctx.config, "n");
        const double eps = cfg::require<double>(ctx.config, "eps");
        const int m = cfg::value_or<int>(ctx.config, "m", norm_tail_default_m(n, eps));
        const auto r = norm_tail_experiment(n, eps, m, cfg::require<int>(ctx.config, "trials"),
                                            ctx.seed, ctx.threads);
        CsvWriter csv({"n", "eps", "m", "trials", "exceedances", "frequency", "threshold",
                       "predicted_tail"});
        csv.add_row({CsvWriter::cell(r.n), CsvWriter::cell(r.eps), CsvWriter::cell(r.m),
                     CsvWriter::cell(r.trials), CsvWriter::cell(r.exceedances),
                     CsvWriter::cell(r.frequency), CsvWriter::cell(r.threshold),
                     CsvWriter::cell(r.predicted_tail)});
        w.emit_csv("norm_tail.csv", csv);
    } else if (kind == "telescope") {
        const auto r = lindeberg_telescope_experiment(
            cfg::require<int>(ctx.config, "n"), cfg::require<int>(ctx.config, "m"),
            cfg::require<int>(ctx.config, "p"), cfg::require<int>(ctx.config, "trials"), ctx.seed,
            ctx.threads);
        CsvWriter csv({"j", "mean_moment", "se_moment", "mean_increment", "se_increment"});
        for (const auto& st : r.steps)
            csv.add_row({CsvWriter::cell(st.j), CsvWriter::cell(st.mean_moment),
                         CsvWriter::cell(st.se_moment), CsvWriter::cell(st.mean_increment),
                         CsvWriter::cell(st.se_increment)});
        w.emit_csv("telescope.csv", csv);
        w.emit_json("telescope_summary.json",
                    {{"endpoint_difference", r.endpoint_difference},
                     {"sum_of_increments", r.sum_of_increments},
                     {"max_telescope_defect", r.max_telescope_defect}});
    } else if (kind == "concentration") {
        const auto r = resolvent_concentration_experiment(
            cfg::require<int>(ctx.config, "n"), cfg::require<int>(ctx.config, "m"),
            cfg::require<int>(ctx.config, "p"), cfg::require<double>(ctx.config, "omega"),
            cfg::require<double>(ctx.config, "eta"), cfg::require<int>(ctx.config, "trials"),
            ctx.seed, ctx.threads, cfg::value_or<int>(ctx.config, "q", 2));
        CsvWriter csv({"n", "m", "p", "omega", "eta", "q", "trials", "mean", "stddev",
                       "rel_fluctuation", "se_mean", "sigma_star_sq", "bound_term_norm4",
                       "bound_term_sigma", "bound_term_max"});
        csv.add_row({CsvWriter::cell(r.n), CsvWriter::cell(r.m), CsvWriter::cell(r.p),
                     CsvWriter::cell(r.omega), CsvWriter::cell(r.eta), CsvWriter::cell(r.q),
                     CsvWriter::cell(r.trials), CsvWriter::cell(r.mean), CsvWriter::cell(r.stddev),
                     CsvWriter::cell(r.rel_fluctuation), CsvWriter::cell(r.se_mean),
                     CsvWriter::cell(r.sigma_star_sq), CsvWriter::cell(r.bound_term_norm4),
                     CsvWriter::cell(r.bound_term_sigma), CsvWriter::cell(r.bound_term_max)});
        w.emit_csv("concentration.csv", csv);
    } else if (kind == "moment_matching") {
        const int N = cfg::require<int>(ctx.config, "N");
        const std::string mode_s = cfg::value_or<std::string>(ctx.config, "mode", "exhaustive");
        const MomentCheckMode mode =
            mode_s == "exhaustive" ? MomentCheckMode::exhaustive : MomentCheckMode::monte_carlo;
        const std::int64_t samples = cfg::value_or<std::int64_t>(ctx.config, "samples", 20000);
        CsvWriter csv({"k", "max_deviation"});
        for (int k = 1; k <= 3; ++k)
            csv.add_row({CsvWriter::cell(k),
                         CsvWriter::cell(moment_matching_check(N, k, mode, samples, ctx.seed))});
        w.emit_csv("moment_matching.csv", csv);
    } else {
        throw ConfigError("universality: unknown kind '" + kind + "'");
    }
    return w.finish();
}

inline Manifest cmd_qpe(const RunContext& ctx) {
    const LoadedInstance inst = resolve_instance(ctx);
    const Spectrum s = eigenvalues(inst.dense());
    const double eps = cfg::require<double>(ctx.config, "eps");
    QPEModel model;
    model.resolution = cfg::value_or<double>(ctx.config, "resolution", 0.0);
    model.repeats = cfg::value_or<int>(ctx.config, "repeats", 1);
    const std::string kernel = cfg::value_or<std::string>(ctx.config, "kernel", "gaussian");
    if (kernel == "sinc2")
        model.kernel = QPEKernel::sinc2;
    else if (kernel != "gaussian")
        throw ConfigError("qpe: kernel must be 'gaussian' or 'sinc2'");
    model.validate();
    const int shots = cfg::require<int>(ctx.config, "shots");
    if (shots < 1) throw ConfigError("qpe: shots must be >= 1");

    std::vector<char> success(static_cast<size_t>(shots), 0);
    RngStream root = RngStream(ctx.seed).child(0xb0b);
    parallel_for(shots, ctx.threads, [&](std::int64_t i) {
        RngStream stream = root.child(static_cast<std::uint64_t>(i));
        success[static_cast<size_t>(i)] =
            repeat_until_success(s, eps, model, stream).success ? 1 : 0;
    });
    std::int64_t wins = 0;
    for (char c : success) wins += c;
    const double rate = static_cast<double>(wins) / shots;
    // Wilson 95% interval
    const double z = 1.959963984540054, nn = shots;
    const double denom = 1.0 + z * z / nn;
    const double center = (rate + z * z / (2 * nn)) / denom;
    const double half = z * std::sqrt(rate * (1 - rate) / nn + z * z / (4 * nn * nn)) / denom;
    const LowEnergyProbability pred = low_energy_success_probability(s, eps);

    detail::RunWriter w(ctx);
    json out;
    out["instance_hash"] = inst.content_hash;
    out["epsilon"] = eps;
    out["shots"] = shots;
    out["successes"] = wins;
    out["success_rate"] = rate;
    out["ci95"] = {center - half, center + half};
    out["predicted_single_shot_probability"] = pred.probability;
    out["degenerate_instance"] = pred.degenerate;
    out["model"] = {{"resolution", model.resolution},
                    {"repeats", model.repeats},
                    {"kernel", kernel},
                    {"suggested_repeats", suggested_repeats(eps, std::max(2, inst.spec.m))},
                    {"cost_model", "Poly(m, 1/eps) gates per run (reported, not simulated)"}};
    w.emit_json("qpe.json", out);
    return w.finish();
}

inline Manifest cmd_witness(const RunContext& ctx) {
    const LoadedInstance inst = resolve_instance(ctx);
    const Spectrum s = eigenvalues(inst.dense());
    const double eps = cfg::require<double>(ctx.config, "eps");
    WitnessConfig conf;
    conf.degree_constant = cfg::value_or<double>(ctx.config, "degree_constant", 4.0);
    conf.degree_override = cfg::value_or<int>(ctx.config, "degree", 0);
    conf.margin = cfg::value_or<double>(ctx.config, "margin", 0.05);
    conf.m_for_cost = inst.spec.m;
    const WitnessResult r = chebyshev_witness(s, eps, conf);
    detail::RunWriter w(ctx);
    json out;
    out["epsilon"] = eps;
    out["d"] = r.spec.d;
    out["beta"] = r.spec.beta;
    out["energy"] = r.energy;
    out["lambda_min"] = r.lambda_min;
    out["ratio"] = r.ratio;
    out["success"] = r.success;
    out["gibbs_energy"] = r.gibbs_energy;
    out["half_width"] = r.spec.half_width;
    out["verification_cost_log10"] = r.spec.verification_cost_log10;
    out["instance_hash"] = inst.content_hash;
    w.emit_json("witness.json", out);
    return w.finish();
}

inline Manifest cmd_bound(const RunContext& ctx) {
    const std::string which = cfg::value_or<std::string>(ctx.config, "which", "circuit");
    detail::RunWriter w(ctx);
    json out;
    out["units"] = "normalized (suppressed constants = 1, natural log)";
    if (which == "circuit") {
        const auto r = circuit_lower_bound(cfg::require<double>(ctx.config, "eps1"),
                                           cfg::require<int>(ctx.config, "m"),
                                           cfg::require<int>(ctx.config, "n"));
        out["which"] = "circuit";
        out["eps1"] = r.eps1;
        out["m"] = r.m;
        out["n"] = r.n;
        out["g_threshold"] = r.g_threshold;
        out["failure_probability_bound"] = r.failure_probability_bound;
        out["precondition_ok"] = r.precondition_ok;
    } else {
        UniversalityBoundInputs in;
        const json& j = ctx.config;
        in.p = cfg::value_or<double>(j, "p", kNaN);
        in.t = cfg::value_or<double>(j, "t", kNaN);
        in.m = cfg::value_or<double>(j, "m", kNaN);
        in.eta = cfg::value_or<double>(j, "eta", kNaN);
        in.L_p_t1 = cfg::value_or<double>(j, "L_p_t1", kNaN);
        in.L_p_p = cfg::value_or<double>(j, "L_p_p", kNaN);
        in.L_3p_inf = cfg::value_or<double>(j, "L_3p_inf", kNaN);
        in.L_3pq_inf = cfg::value_or<double>(j, "L_3pq_inf", kNaN);
        in.L_inf_inf = cfg::value_or<double>(j, "L_inf_inf", kNaN);
        in.L_inf = cfg::value_or<double>(j, "L_inf", kNaN);
        in.sigma2 = cfg::value_or<double>(j, "sigma2", kNaN);
        in.v = cfg::value_or<double>(j, "v", kNaN);
        in.q = cfg::value_or<double>(j, "q", kNaN);
        BoundFormula f;
        if (which == "thm3_3")
            f = BoundFormula::thm3_3;
        else if (which == "thm3_4")
            f = BoundFormula::thm3_4;
        else if (which == "thm4_1_moments")
            f = BoundFormula::thm4_1_moments;
        else if (which == "thm4_1_resolvent")
            f = BoundFormula::thm4_1_resolvent;
        else if (which == "thmA_expected_resolvent")
            f = BoundFormula::thmA_expected_resolvent;
        else
            throw ConfigError("bound: unknown which '" + which + "'");
        out["which"] = which;
        out["value"] = evaluate_bounds(in, f);
    }
    w.emit_json("bound.json", out);
    return w.finish();
}

/// Dispatch by experiment name. Exceptions: ConfigError for bad configs,
/// NumericError for numeric failures; the CLI maps them to exit codes 2 / 3.
inline Manifest run_experiment(const std::string& experiment, json config, const RunOverrides& o = {}) {
    const RunContext ctx = make_context(experiment, std::move(config), o);
    if (experiment == "sample") return cmd_sample(ctx);
    if (experiment == "spectrum") return cmd_spectrum(ctx);
    if (experiment == "pnorm") return cmd_pnorm(ctx);
    if (experiment == "resolvent") return cmd_resolvent(ctx);
    if (experiment == "dos") return cmd_dos(ctx);
    if (experiment == "universality") return cmd_universality(ctx);
    if (experiment == "qpe") return cmd_qpe(ctx);
    if (experiment == "witness") return cmd_witness(ctx);
    if (experiment == "bound") return cmd_bound(ctx);
    throw ConfigError("unknown experiment: " + experiment);
}

}  // namespace speclab
