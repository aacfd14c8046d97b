// iterkit: config-driven experiment runner for stationary random iterates.
//
// Subcommands: simulate, coupling, meeting-time, conditions, blocks,
// variance, clt, report.  All randomness derives from a single mandatory
// seed via hierarchical streams (seed, experiment id, path index); data
// files are byte-identical across runs and worker counts.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "iterkit/blocks.hpp"
#include "iterkit/coupling.hpp"
#include "iterkit/diagnostics.hpp"
#include "iterkit/io.hpp"
#include "iterkit/models.hpp"
#include "iterkit/quantile.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace iterkit;

namespace {

constexpr const char* kVersion = "0.1.0";

// Validation failure: exit status 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// strict JSON helpers with path-to-field diagnostics
// ---------------------------------------------------------------------------
void require_object(const json& j, const std::string& path) {
    if (!j.is_object())
        throw ConfigError(path + ": expected an object");
}

void reject_unknown_keys(const json& obj, const std::string& path,
                         const std::vector<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const auto& k : allowed) ok = ok || it.key() == k;
        if (!ok) throw ConfigError(path + ": unknown key '" + it.key() + "'");
    }
}

double get_number(const json& obj, const std::string& path,
                  const std::string& key, std::optional<double> dflt = {}) {
    if (!obj.contains(key)) {
        if (dflt) return *dflt;
        throw ConfigError(path + "." + key + ": required");
    }
    if (!obj[key].is_number())
        throw ConfigError(path + "." + key + ": expected a number");
    return obj[key].get<double>();
}

std::uint64_t get_uint(const json& obj, const std::string& path,
                       const std::string& key,
                       std::optional<std::uint64_t> dflt = {}) {
    if (!obj.contains(key)) {
        if (dflt) return *dflt;
        throw ConfigError(path + "." + key + ": required");
    }
    if (!obj[key].is_number_unsigned() && !obj[key].is_number_integer())
        throw ConfigError(path + "." + key + ": expected a non-negative integer");
    if (obj[key].is_number_integer() && obj[key].get<std::int64_t>() < 0)
        throw ConfigError(path + "." + key + ": expected a non-negative integer");
    return obj[key].get<std::uint64_t>();
}

std::string get_string(const json& obj, const std::string& path,
                       const std::string& key,
                       std::optional<std::string> dflt = {}) {
    if (!obj.contains(key)) {
        if (dflt) return *dflt;
        throw ConfigError(path + "." + key + ": required");
    }
    if (!obj[key].is_string())
        throw ConfigError(path + "." + key + ": expected a string");
    return obj[key].get<std::string>();
}

std::vector<double> get_number_array(const json& obj, const std::string& path,
                                     const std::string& key) {
    if (!obj.contains(key) || !obj[key].is_array())
        throw ConfigError(path + "." + key + ": expected an array of numbers");
    std::vector<double> out;
    for (const auto& v : obj[key]) {
        if (!v.is_number())
            throw ConfigError(path + "." + key + ": expected numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

// ---------------------------------------------------------------------------
// model parsing
// ---------------------------------------------------------------------------
using ModelVariant = std::variant<std::monostate, DiscreteRenewal, StickyBeta,
                                  ARLipschitz, ContractingIFS, LinearAR,
                                  MatrixWalk>;

// visit over the concrete model alternatives (monostate is the not-yet-parsed
// placeholder and never reaches a runner)
template <class F>
decltype(auto) visit_model(const ModelVariant& v, F&& f) {
    using R = decltype(f(std::get<DiscreteRenewal>(v)));
    return std::visit(
        [&](const auto& m) -> R {
            if constexpr (std::is_same_v<std::decay_t<decltype(m)>,
                                         std::monostate>)
                throw std::logic_error("model not parsed");
            else
                return f(m);
        },
        v);
}

struct ParsedModel {
    ModelVariant model;
    std::string family;
    json echo;  // config block with defaults materialized
    std::optional<DiscreteRenewalSpec> discrete_spec;  // for exact oracles
};

ParsedModel parse_model(const json& m) {
    const std::string path = "config.model";
    require_object(m, path);
    const std::string family = get_string(m, path, "family");
    json echo;
    echo["family"] = family;

    if (family == "discrete_renewal") {
        reject_unknown_keys(m, path,
                            {"family", "p_seq", "p", "truncation_K",
                             "observable"});
        DiscreteRenewalSpec spec;
        if (m.contains("p_seq")) {
            spec.p_seq = get_number_array(m, path, "p_seq");
            echo["p_seq"] = spec.p_seq;
        } else {
            spec.p = get_number(m, path, "p");
            spec.truncation_K = get_uint(m, path, "truncation_K", 1'000'000);
            echo["p"] = spec.p;
            echo["truncation_K"] = spec.truncation_K;
        }
        const std::string obs =
            get_string(m, path, "observable", std::string("indicator0"));
        echo["observable"] = obs;
        DiscreteRenewal model = make_model(spec);
        if (obs == "indicator0") {
            // default f already 1_{w==0}
        } else if (obs == "indicator0_centered") {
            const double nu0 = model.nu0();
            model.f = [nu0](std::int64_t w) {
                return (w == 0 ? 1.0 : 0.0) - nu0;
            };
        } else {
            throw ConfigError(path + ".observable: unknown observable '" + obs +
                              "'");
        }
        return {std::move(model), family, std::move(echo), spec};
    }
    if (family == "sticky_beta") {
        reject_unknown_keys(m, path, {"family", "a", "center"});
        StickyBetaSpec spec;
        spec.a = get_number(m, path, "a");
        StickyBeta model = make_model(spec);
        if (m.contains("center") && m["center"].is_string()) {
            if (m["center"].get<std::string>() != "mean")
                throw ConfigError(path + ".center: expected a number or 'mean'");
            model.center = model.stationary_mean();
        } else {
            model.center = get_number(m, path, "center", 0.0);
        }
        echo["a"] = spec.a;
        echo["center"] = model.center;
        return {std::move(model), family, std::move(echo), {}};
    }
    if (family == "ar_lipschitz") {
        reject_unknown_keys(
            m, path, {"family", "tau", "C", "innov_sd", "moment_S", "burn_in"});
        ARLipschitzSpec spec;
        spec.tau = get_number(m, path, "tau");
        spec.C = get_number(m, path, "C");
        spec.innov_sd = get_number(m, path, "innov_sd", 1.0);
        spec.moment_S = get_number(m, path, "moment_S", 4.0);
        spec.burn_in = get_uint(m, path, "burn_in", 2048);
        echo["tau"] = spec.tau;
        echo["C"] = spec.C;
        echo["innov_sd"] = spec.innov_sd;
        echo["moment_S"] = spec.moment_S;
        echo["burn_in"] = spec.burn_in;
        return {make_model(spec), family, std::move(echo), {}};
    }
    if (family == "ifs") {
        reject_unknown_keys(m, path, {"family", "contraction_rho", "burn_in"});
        IFSSpec spec;
        spec.contraction_rho = get_number(m, path, "contraction_rho");
        spec.burn_in = get_uint(m, path, "burn_in", 128);
        echo["contraction_rho"] = spec.contraction_rho;
        echo["burn_in"] = spec.burn_in;
        return {make_model(spec), family, std::move(echo), {}};
    }
    if (family == "linear_ar") {
        reject_unknown_keys(m, path, {"family", "rho"});
        LinearARSpec spec;
        spec.rho = get_number(m, path, "rho");
        echo["rho"] = spec.rho;
        return {make_model(spec), family, std::move(echo), {}};
    }
    if (family == "matrix_walk") {
        reject_unknown_keys(
            m, path, {"family", "dim", "ensemble", "start_direction", "burn_in"});
        MatrixWalkSpec spec;
        spec.dim = int(get_uint(m, path, "dim", 2));
        if (!m.contains("ensemble") || !m["ensemble"].is_array())
            throw ConfigError(path + ".ensemble: expected an array");
        for (std::size_t i = 0; i < m["ensemble"].size(); ++i) {
            const auto& e = m["ensemble"][i];
            const std::string epath =
                path + ".ensemble[" + std::to_string(i) + "]";
            require_object(e, epath);
            reject_unknown_keys(e, epath, {"matrix", "prob"});
            auto entries = get_number_array(e, epath, "matrix");
            if (entries.size() != std::size_t(spec.dim) * spec.dim)
                throw ConfigError(epath + ".matrix: expected dim*dim entries");
            spec.ensemble.emplace_back(Mat(spec.dim, std::move(entries)),
                                       get_number(e, epath, "prob"));
        }
        spec.start_direction = get_number_array(m, path, "start_direction");
        spec.burn_in = get_uint(m, path, "burn_in", 0);
        echo["dim"] = spec.dim;
        echo["ensemble"] = m["ensemble"];
        echo["start_direction"] = spec.start_direction;
        echo["burn_in"] = spec.burn_in;
        return {make_model(spec), family, std::move(echo), {}};
    }
    throw ConfigError(path + ".family: unknown family '" + family + "'");
}

// ---------------------------------------------------------------------------
// run context and output plumbing
// ---------------------------------------------------------------------------
struct RunContext {
    std::string command;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::string out_dir;
    bool want_csv = true, want_json = true;
    ParsedModel pm;
    json params;       // per-kind parameter block (validated by each runner)
    json echo_params;  // defaults materialized
    json report;       // accumulated JSON report for this command
    std::vector<std::string> outputs;
    std::string config_bytes;  // raw input config for the manifest hash
};

void emit_csv(RunContext& ctx, const std::string& name,
              const std::vector<std::string>& header,
              const std::vector<std::vector<double>>& rows) {
    if (!ctx.want_csv) return;
    write_csv((fs::path(ctx.out_dir) / name).string(), header, rows);
    ctx.outputs.push_back(name);
}

void emit_json(RunContext& ctx, const std::string& name, const json& j) {
    if (!ctx.want_json) return;
    write_text((fs::path(ctx.out_dir) / name).string(), j.dump(2) + "\n");
    ctx.outputs.push_back(name);
}

json estimate_to_json(const Estimate& e) {
    return json{{"value", e.value}, {"se", e.se}, {"count", e.count}};
}

json report_to_json(const ConditionReport& r) {
    json j;
    j["condition_id"] = r.condition_id;
    j["p"] = r.p;
    j["r"] = r.r;
    j["checkpoints"] = r.checkpoints;
    j["partial_sums"] = r.partial_sums;
    j["total"] = r.total;
    j["slope"] = r.slope;
    j["slope_se"] = r.slope_se;
    j["finite_support"] = r.finite_support;
    j["verdict"] = r.verdict;
    j["extrapolation"] = r.extrapolation;
    j["margin"] = r.margin;
    return j;
}

// first column = n; remaining columns as given
std::vector<std::vector<double>> table_rows(
    const std::vector<std::uint64_t>& n,
    const std::vector<std::vector<double>>& cols) {
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < n.size(); ++i) {
        std::vector<double> row{double(n[i])};
        for (const auto& c : cols) row.push_back(c[i]);
        rows.push_back(std::move(row));
    }
    return rows;
}

// read one named column of a CSV written by this tool
std::vector<double> read_csv_column(const std::string& file,
                                    const std::string& column) {
    std::istringstream in(read_file(file));
    std::string line;
    if (!std::getline(in, line))
        throw ConfigError(file + ": empty CSV");
    std::vector<std::string> header;
    {
        std::istringstream h(line);
        std::string cell;
        while (std::getline(h, cell, ',')) header.push_back(cell);
    }
    std::size_t idx = header.size();
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == column) idx = i;
    if (idx == header.size())
        throw ConfigError(file + ": missing column '" + column + "'");
    std::vector<double> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        for (std::size_t i = 0; i <= idx; ++i)
            if (!std::getline(row, cell, ','))
                throw ConfigError(file + ": short row");
        out.push_back(std::stod(cell));
    }
    return out;
}

// exact stationary mean of the observable where the model admits one
std::optional<double> exact_observable_mean(const ParsedModel& pm) {
    if (const auto* d = std::get_if<DiscreteRenewal>(&pm.model)) {
        double s = 0;
        for (std::size_t j = 0; j < d->nu().size(); ++j)
            s += d->nu()[j] * d->f(std::int64_t(j));
        return s;
    }
    if (const auto* s = std::get_if<StickyBeta>(&pm.model))
        return s->stationary_mean() - s->center;
    if (std::holds_alternative<LinearAR>(pm.model)) return 0.0;
    return std::nullopt;
}

template <class Model>
double long_path_mean(const Model& model, std::uint64_t length,
                      std::uint64_t seed) {
    rng::Stream g(seed, 0x62, 0);
    auto w = model.sample_stationary(g);
    double s = 0;
    for (std::uint64_t t = 0; t < length; ++t) {
        const auto e = model.sample_innovation(g);
        s += model.observe(e, w);
        w = model.step(e, w);
    }
    return s / double(length);
}

// empirical quantile table of |X1| from stationary one-step samples
template <class Model>
QuantileTable sample_quantile(const Model& model, std::uint64_t n_samples,
                              std::uint64_t seed) {
    std::vector<double> abs_x;
    abs_x.reserve(n_samples);
    for (std::uint64_t i = 0; i < n_samples; ++i) {
        rng::Stream g(seed, 0x61, i);
        auto w = model.sample_stationary(g);
        const auto e = model.sample_innovation(g);
        abs_x.push_back(std::abs(model.observe(e, w)));
    }
    return QuantileTable::from_samples(std::move(abs_x));
}

// ---------------------------------------------------------------------------
// subcommand runners
// ---------------------------------------------------------------------------
void run_simulate(RunContext& ctx) {
    reject_unknown_keys(ctx.params, "config.simulate", {"n", "init"});
    const std::uint64_t n = get_uint(ctx.params, "config.simulate", "n", 100);
    const std::string init = get_string(ctx.params, "config.simulate", "init",
                                        std::string("independent_stationary"));
    ctx.echo_params = {{"n", n}, {"init", init}};
    visit_model(
        ctx.pm.model,
        [&](const auto& model) {
            using M = std::decay_t<decltype(model)>;
            InitPolicy<M> policy;
            if (init == "identical")
                policy = InitPolicy<M>::identical();
            else if (init == "independent_stationary")
                policy = InitPolicy<M>::independent_stationary();
            else
                throw ConfigError("config.simulate.init: unknown init '" +
                                  init + "'");
            auto path = simulate_coupled(model, n, policy, ctx.seed);
            std::vector<std::uint64_t> ks(n);
            std::vector<double> x(n), gap(n), se(n, 0.0), cnt(n, 1.0);
            for (std::uint64_t k = 0; k < n; ++k) {
                ks[k] = k + 1;
                x[k] = path.X[k];
                gap[k] = std::abs(path.X[k] - path.Xstar[k]);
            }
            emit_csv(ctx, "path.csv", {"n", "value", "se", "count"},
                     table_rows(ks, {x, se, cnt}));
            emit_csv(ctx, "coupled_gap.csv", {"n", "value", "se", "count"},
                     table_rows(ks, {gap, se, cnt}));
            ctx.report["meeting_index"] =
                path.meeting_index ? json(*path.meeting_index) : json();
            ctx.report["burnin_fallback"] = path.burnin_fallback;
        });
    emit_json(ctx, "simulate.json", ctx.report);
}

void run_coupling(RunContext& ctx) {
    reject_unknown_keys(ctx.params, "config.coupling", {"k_max", "paths"});
    const std::uint64_t k_max =
        get_uint(ctx.params, "config.coupling", "k_max", 64);
    const std::uint64_t paths =
        get_uint(ctx.params, "config.coupling", "paths", 100'000);
    if (k_max < 1 || paths < 2)
        throw ConfigError("config.coupling: k_max >= 1 and paths >= 2");
    ctx.echo_params = {{"k_max", k_max}, {"paths", paths}};
    visit_model(
        ctx.pm.model,
        [&](const auto& model) {
            auto l1 = estimate_pairwise_L1(model, k_max, paths, ctx.seed,
                                           ctx.threads);
            auto delta = delta_envelope(l1.per_k, l1.mean_abs_X);
            std::vector<std::uint64_t> ks;
            std::vector<double> v, se, cnt;
            for (std::uint64_t k = 0; k < k_max; ++k) {
                ks.push_back(k + 1);
                v.push_back(l1.per_k[k].value);
                se.push_back(l1.per_k[k].se);
                cnt.push_back(double(l1.per_k[k].count));
            }
            emit_csv(ctx, "pairwise_l1.csv", {"n", "value", "se", "count"},
                     table_rows(ks, {v, se, cnt}));
            std::vector<double> dse = delta.se,
                dcnt(delta.n.size(), double(paths));
            emit_csv(ctx, "delta.csv", {"n", "value", "se", "count"},
                     table_rows(delta.n, {delta.value, dse, dcnt}));
            ctx.report["mean_abs_X"] = estimate_to_json(l1.mean_abs_X);
            ctx.report["burnin_fallback"] = l1.burnin_fallback;
            try {
                auto fit = decay_fit(ks, v, DecayFit::Kind::exponential);
                ctx.report["l1_exponential_rate"] = fit.rate;
                ctx.report["l1_exponential_r2"] = fit.r2;
            } catch (const std::invalid_argument&) {
                ctx.report["l1_exponential_rate"] = json();
            }
        });
    emit_json(ctx, "coupling.json", ctx.report);
}

void run_meeting_time(RunContext& ctx) {
    reject_unknown_keys(ctx.params, "config.meeting-time",
                        {"cap", "paths", "fit_n_min", "fit_n_max"});
    const std::uint64_t cap =
        get_uint(ctx.params, "config.meeting-time", "cap", 64);
    const std::uint64_t paths =
        get_uint(ctx.params, "config.meeting-time", "paths", 100'000);
    const std::uint64_t n_min =
        get_uint(ctx.params, "config.meeting-time", "fit_n_min", 8);
    const std::uint64_t n_max =
        get_uint(ctx.params, "config.meeting-time", "fit_n_max", cap);
    ctx.echo_params = {{"cap", cap},
                       {"paths", paths},
                       {"fit_n_min", n_min},
                       {"fit_n_max", n_max}};
    visit_model(
        ctx.pm.model,
        [&](const auto& model) {
            auto t = sample_meeting_times(model, cap, paths, ctx.seed,
                                          ctx.threads);
            std::vector<std::uint64_t> ns;
            std::vector<double> cnt;
            for (std::uint64_t n = 0; n <= cap; ++n) {
                ns.push_back(n);
                cnt.push_back(double(t.n_paths));
            }
            emit_csv(ctx, "survival.csv", {"n", "survival", "se", "count"},
                     table_rows(ns, {t.survival, t.se, cnt}));
            ctx.report["censored"] = t.censored;
            ctx.report["n_paths"] = t.n_paths;
            try {
                auto fit = fit_tail_slope(t, n_min, n_max);
                ctx.report["tail_slope"] = fit.slope;
                ctx.report["tail_slope_se"] = fit.se;
                ctx.report["tail_fit_points"] = fit.points;
            } catch (const std::runtime_error& e) {
                ctx.report["tail_slope"] = json();
                ctx.report["tail_fit_note"] = e.what();
            }
        });
    emit_json(ctx, "meeting_time.json", ctx.report);
}

void emit_condition(RunContext& ctx, const ConditionReport& r, json& all) {
    all.push_back(report_to_json(r));
    std::vector<double> se(r.checkpoints.size(), 0.0),
        cnt(r.checkpoints.size());
    for (std::size_t i = 0; i < cnt.size(); ++i)
        cnt[i] = double(r.checkpoints[i]);
    emit_csv(ctx, "condition_" + r.condition_id + ".csv",
             {"n", "value", "se", "count"},
             table_rows(r.checkpoints, {r.partial_sums, se, cnt}));
}

void run_conditions(RunContext& ctx) {
    reject_unknown_keys(
        ctx.params, "config.conditions",
        {"p", "r", "budget", "delta", "survival", "quantile_paths"});
    ConditionParams cp;
    cp.p = get_number(ctx.params, "config.conditions", "p");
    cp.r = get_number(ctx.params, "config.conditions", "r", 0.0);
    cp.budget = get_uint(ctx.params, "config.conditions", "budget", 100'000);
    const std::uint64_t qpaths =
        get_uint(ctx.params, "config.conditions", "quantile_paths", 200'000);
    const std::string delta_file =
        get_string(ctx.params, "config.conditions", "delta", std::string());
    const std::string survival_file =
        get_string(ctx.params, "config.conditions", "survival", std::string());
    ctx.echo_params = {{"p", cp.p},
                       {"r", cp.r},
                       {"budget", cp.budget},
                       {"quantile_paths", qpaths},
                       {"delta", delta_file},
                       {"survival", survival_file}};

    json all = json::array();
    json skipped = json::object();

    // quantile table from the model
    QuantileTable q = visit_model(
        ctx.pm.model,
        [&](const auto& model) {
            return sample_quantile(model, qpaths, ctx.seed);
        });
    ctx.report["quantile_source"] = q.source;

    // delta-based conditions (C1, C2, C6)
    if (delta_file.empty())
        throw ConfigError(
            "config.conditions.delta: delta table required; run the coupling "
            "experiment first and pass its delta.csv");
    {
        auto vals = read_csv_column(delta_file, "value");
        auto delta = ExtendedSeq::fit(std::move(vals), TailModel::Kind::power);
        auto g = gamma_tables(delta, q);
        ctx.report["delta_tail"] = delta.tail().describe();
        ctx.report["delta_mean_warning"] = g.mean_warning;
        emit_condition(ctx, eval_c1(q, g, cp), all);
        emit_condition(ctx, eval_c2(q, g, cp), all);
        if (cp.r > cp.p)
            emit_condition(ctx, eval_c6(delta, cp), all);
        else
            skipped["C6"] = "requires r > p";
    }

    // survival-based conditions (C3, C4): file, or exact DP for explicit
    // discrete chains
    std::vector<double> tail;
    std::string tail_source;
    if (!survival_file.empty()) {
        tail = read_csv_column(survival_file, "survival");
        tail_source = "csv:" + survival_file;
    } else if (ctx.pm.discrete_spec && !ctx.pm.discrete_spec->p_seq.empty()) {
        const std::uint64_t n_max = std::min<std::uint64_t>(cp.budget, 512);
        tail = exact_pair_tail_discrete(
            *ctx.pm.discrete_spec, n_max,
            n_max + ctx.pm.discrete_spec->p_seq.size() + 16);
        tail_source = "exact_pair_dp";
    }
    if (!tail.empty()) {
        auto seq = survival_to_seq(tail, TailModel::Kind::power);
        ctx.report["pair_tail_source"] = tail_source;
        emit_condition(ctx, eval_c3(q, seq, cp), all);
        emit_condition(ctx, eval_c4(seq, cp), all);
    } else {
        skipped["C3"] = skipped["C4"] =
            "survival table required: run the meeting-time experiment first "
            "and pass its survival.csv";
    }

    // model-intrinsic conditions
    if (ctx.pm.discrete_spec) {
        if (cp.r > cp.p) {
            emit_condition(ctx, eval_c5(*ctx.pm.discrete_spec, cp), all);
            emit_condition(ctx, eval_c8(*ctx.pm.discrete_spec, cp), all);
        } else {
            skipped["C5"] = skipped["C8"] = "requires r > p";
        }
    }
    if (std::holds_alternative<ContractingIFS>(ctx.pm.model)) {
        if (cp.r > cp.p)
            emit_condition(ctx, eval_c7(&ContractingIFS::modulus, cp), all);
        else
            skipped["C7"] = "requires r > p";
    }

    ctx.report["conditions"] = all;
    ctx.report["skipped"] = skipped;
    emit_json(ctx, "conditions.json", ctx.report);
}

void run_blocks(RunContext& ctx) {
    reject_unknown_keys(ctx.params, "config.blocks",
                        {"scheme", "p", "q", "eps", "k_lo", "k_hi", "outer",
                         "inner", "sigma2", "tilde_q", "tilde_reps", "delta",
                         "quantile_paths"});
    const std::string scheme =
        get_string(ctx.params, "config.blocks", "scheme", std::string("thm1"));
    const double p = get_number(ctx.params, "config.blocks", "p");
    const double q = get_number(ctx.params, "config.blocks", "q", 2.0);
    const double eps = get_number(ctx.params, "config.blocks", "eps", 0.1);
    const std::uint64_t k_lo = get_uint(ctx.params, "config.blocks", "k_lo", 3);
    const std::uint64_t k_hi = get_uint(ctx.params, "config.blocks", "k_hi", 8);
    const std::uint64_t outer =
        get_uint(ctx.params, "config.blocks", "outer", 2000);
    const std::uint64_t inner =
        get_uint(ctx.params, "config.blocks", "inner", 64);
    const double sigma2 =
        get_number(ctx.params, "config.blocks", "sigma2",
                   std::numeric_limits<double>::quiet_NaN());
    const double tilde_q =
        get_number(ctx.params, "config.blocks", "tilde_q", 1.0);
    const std::uint64_t tilde_reps =
        get_uint(ctx.params, "config.blocks", "tilde_reps", 2000);
    const std::string delta_file =
        get_string(ctx.params, "config.blocks", "delta", std::string());
    const std::uint64_t qpaths =
        get_uint(ctx.params, "config.blocks", "quantile_paths", 200'000);
    ctx.echo_params = {{"scheme", scheme}, {"p", p},       {"q", q},
                       {"eps", eps},       {"k_lo", k_lo}, {"k_hi", k_hi},
                       {"outer", outer},   {"inner", inner},
                       {"tilde_q", tilde_q}, {"tilde_reps", tilde_reps},
                       {"delta", delta_file}, {"quantile_paths", qpaths}};
    if (!std::isnan(sigma2)) ctx.echo_params["sigma2"] = sigma2;

    QuantileTable qt = visit_model(
        ctx.pm.model,
        [&](const auto& model) {
            return sample_quantile(model, qpaths, ctx.seed);
        });

    BlockParams bp;
    if (scheme == "thm1") {
        bp = plan_blocks_thm1(p, q, eps, k_lo, k_hi);
    } else if (scheme == "thm2") {
        if (delta_file.empty())
            throw ConfigError(
                "config.blocks.delta: thm2 plan needs a delta table; run the "
                "coupling experiment first and pass its delta.csv");
        auto vals = read_csv_column(delta_file, "value");
        auto delta = ExtendedSeq::fit(std::move(vals), TailModel::Kind::power);
        auto g = gamma_tables(delta, qt);
        bp = plan_blocks_thm2(p, qt, g, k_lo, k_hi);
        ctx.report["u1"] = bp.u1;
        ctx.report["K0"] = bp.K0;
    } else {
        throw ConfigError("config.blocks.scheme: expected 'thm1' or 'thm2'");
    }

    {
        std::vector<std::vector<double>> rows;
        for (std::uint64_t k = bp.k_lo; k <= bp.k_hi; ++k)
            rows.push_back({double(k), bp.M_at(k), double(bp.m_at(k))});
        emit_csv(ctx, "plan.csv", {"k", "M", "m"}, rows);
    }

    NuTable nu = visit_model(
        ctx.pm.model,
        [&](const auto& model) {
            return estimate_nu_k(model, bp, outer, inner, ctx.seed,
                                 ctx.threads);
        });
    {
        std::vector<std::vector<double>> rows;
        for (const auto& e : nu.entries)
            rows.push_back({double(e.k), double(e.m), e.M, e.direct.value,
                            e.direct.se, e.cov.value, e.cov.se,
                            double(e.direct.count)});
        emit_csv(ctx, "nu.csv",
                 {"k", "m", "M", "nu_direct", "nu_direct_se", "nu_cov",
                  "nu_cov_se", "count"},
                 rows);
    }

    // Appendix inequality at the top scale
    auto tilde = visit_model(
        ctx.pm.model,
        [&](const auto& model) {
            return check_tilde_distance(model, bp.m_at(bp.k_hi),
                                        bp.M_at(bp.k_hi), tilde_q, tilde_reps,
                                        inner, ctx.seed, ctx.threads);
        });
    ctx.report["tilde_check"] = {{"lhs", tilde.lhs},
                                 {"lhs_se", tilde.lhs_se},
                                 {"rhs", tilde.rhs},
                                 {"rhs_se", tilde.rhs_se},
                                 {"holds", tilde.holds},
                                 {"q", tilde_q}};

    auto trunc = eval_truncation_condition(bp, qt);
    ctx.report["truncation_terms"] = trunc.term;
    ctx.report["truncation_nonzero_terms"] = trunc.nonzero_terms;
    if (!std::isnan(sigma2)) {
        auto sur = eval_cond2vk_surrogate(bp, nu, sigma2);
        ctx.report["surrogate_r"] = sur.r;
        ctx.report["surrogate_slope"] = sur.slope;
        ctx.report["surrogate_decreasing"] = sur.decreasing;
    }
    emit_json(ctx, "blocks.json", ctx.report);
}

void run_variance(RunContext& ctx) {
    reject_unknown_keys(ctx.params, "config.variance",
                        {"n_grid", "reps", "path_length", "lag_window"});
    std::vector<std::uint64_t> n_grid;
    if (ctx.params.contains("n_grid")) {
        for (double v : get_number_array(ctx.params, "config.variance",
                                         "n_grid"))
            n_grid.push_back(std::uint64_t(v));
    } else {
        n_grid = {64, 128, 256, 512, 1024};
    }
    const std::uint64_t reps =
        get_uint(ctx.params, "config.variance", "reps", 2000);
    const std::uint64_t path_length =
        get_uint(ctx.params, "config.variance", "path_length", 100'000);
    const std::uint64_t lag_window =
        get_uint(ctx.params, "config.variance", "lag_window", 0);
    ctx.echo_params = {{"n_grid", n_grid},
                       {"reps", reps},
                       {"path_length", path_length},
                       {"lag_window", lag_window}};
    visit_model(
        ctx.pm.model,
        [&](const auto& model) {
            auto vg =
                variance_growth(model, n_grid, reps, ctx.seed, ctx.threads);
            std::vector<double> cnt(vg.n.size(), double(reps));
            emit_csv(ctx, "variance_growth.csv", {"n", "value", "se", "count"},
                     table_rows(vg.n, {vg.var_over_n, vg.se, cnt}));
            auto sp = sigma2_spectral(model, lag_window, path_length, ctx.seed);
            ctx.report["spectral"] = {{"sigma2", sp.sigma2},
                                      {"se", sp.se},
                                      {"lag_window", sp.lag_window},
                                      {"path_length", sp.path_length}};
            ctx.report["var_over_n_last"] = vg.var_over_n.back();
        });
    emit_json(ctx, "variance.json", ctx.report);
}

void run_clt(RunContext& ctx) {
    reject_unknown_keys(ctx.params, "config.clt",
                        {"n", "reps", "mean", "sigma2"});
    const std::uint64_t n = get_uint(ctx.params, "config.clt", "n", 5000);
    const std::uint64_t reps = get_uint(ctx.params, "config.clt", "reps", 2000);
    ctx.echo_params = {{"n", n}, {"reps", reps}};
    visit_model(
        ctx.pm.model,
        [&](const auto& model) {
            double mean;
            if (ctx.params.contains("mean")) {
                mean = get_number(ctx.params, "config.clt", "mean");
            } else if (auto m = exact_observable_mean(ctx.pm)) {
                mean = *m;
            } else {
                mean = long_path_mean(model, 1'000'000, ctx.seed);
            }
            double sigma2;
            if (ctx.params.contains("sigma2")) {
                sigma2 = get_number(ctx.params, "config.clt", "sigma2");
            } else {
                sigma2 = sigma2_spectral(model, 0, 200'000, ctx.seed).sigma2;
            }
            ctx.echo_params["mean"] = mean;
            ctx.echo_params["sigma2"] = sigma2;
            auto rep =
                clt_check(model, n, reps, mean, sigma2, ctx.seed, ctx.threads);
            ctx.report["n"] = rep.n;
            ctx.report["reps"] = rep.reps;
            ctx.report["ks"] = rep.ks;
            ctx.report["sigma2_used"] = rep.sigma2_used;
            ctx.report["mean_used"] = mean;
            ctx.report["degenerate"] = rep.degenerate;
        });
    emit_json(ctx, "clt.json", ctx.report);
}

void run_report(RunContext& ctx) {
    reject_unknown_keys(ctx.params, "config.report",
                        {"p", "r", "paths", "k_max", "cap", "budget", "reps",
                         "n", "quantile_paths"});
    const double p = get_number(ctx.params, "config.report", "p");
    const double r = get_number(ctx.params, "config.report", "r", 0.0);
    const std::uint64_t paths =
        get_uint(ctx.params, "config.report", "paths", 100'000);
    const std::uint64_t k_max =
        get_uint(ctx.params, "config.report", "k_max", 64);
    const std::uint64_t cap = get_uint(ctx.params, "config.report", "cap", 64);
    const std::uint64_t budget =
        get_uint(ctx.params, "config.report", "budget", 100'000);
    const std::uint64_t reps =
        get_uint(ctx.params, "config.report", "reps", 2000);
    const std::uint64_t n_clt = get_uint(ctx.params, "config.report", "n", 5000);
    const std::uint64_t qpaths =
        get_uint(ctx.params, "config.report", "quantile_paths", 200'000);
    ctx.echo_params = {{"p", p},       {"r", r},         {"paths", paths},
                       {"k_max", k_max}, {"cap", cap},   {"budget", budget},
                       {"reps", reps},  {"n", n_clt},
                       {"quantile_paths", qpaths}};

    // coupling
    {
        RunContext sub = ctx;
        sub.outputs.clear();
        sub.params = json{{"k_max", k_max}, {"paths", paths}};
        sub.report = json::object();
        run_coupling(sub);
        for (auto& o : sub.outputs) ctx.outputs.push_back(o);
        ctx.report["coupling"] = sub.report;
    }
    // meeting time (not defined for matrix walks)
    bool have_survival = false;
    {
        RunContext sub = ctx;
        sub.outputs.clear();
        sub.params = json{{"cap", cap}, {"paths", paths}};
        sub.report = json::object();
        if (ctx.pm.family != "matrix_walk") {
            run_meeting_time(sub);
            for (auto& o : sub.outputs) ctx.outputs.push_back(o);
            ctx.report["meeting_time"] = sub.report;
            have_survival = true;
        }
    }
    // conditions, consuming the tables just written
    if (ctx.want_csv) {
        RunContext sub = ctx;
        sub.outputs.clear();
        sub.report = json::object();
        json cparams{{"p", p}, {"budget", budget}, {"quantile_paths", qpaths}};
        if (r > 0) cparams["r"] = r;
        cparams["delta"] = (fs::path(ctx.out_dir) / "delta.csv").string();
        if (have_survival)
            cparams["survival"] =
                (fs::path(ctx.out_dir) / "survival.csv").string();
        sub.params = cparams;
        run_conditions(sub);
        for (auto& o : sub.outputs) ctx.outputs.push_back(o);
        ctx.report["conditions"] = sub.report;
    } else {
        ctx.report["conditions"] = "skipped: csv output disabled";
    }
    // variance + clt
    {
        RunContext sub = ctx;
        sub.outputs.clear();
        sub.params = json{{"reps", reps}};
        sub.report = json::object();
        run_variance(sub);
        for (auto& o : sub.outputs) ctx.outputs.push_back(o);
        ctx.report["variance"] = sub.report;
    }
    {
        RunContext sub = ctx;
        sub.outputs.clear();
        sub.params = json{{"n", n_clt}, {"reps", reps}};
        sub.report = json::object();
        run_clt(sub);
        for (auto& o : sub.outputs) ctx.outputs.push_back(o);
        ctx.report["clt"] = sub.report;
    }

    // verdict summary
    json verdicts = json::object();
    if (ctx.report["conditions"].contains("conditions"))
        for (const auto& c : ctx.report["conditions"]["conditions"])
            verdicts[c["condition_id"].get<std::string>()] = c["verdict"];
    ctx.report["verdicts"] = verdicts;
    emit_json(ctx, "report.json", ctx.report);
    emit_json(ctx, "verdicts.json", verdicts);
}

// ---------------------------------------------------------------------------
// entry point
// ---------------------------------------------------------------------------
int run(const std::string& command, const std::string& config_path,
        std::optional<std::uint64_t> seed_override,
        std::optional<std::string> out_override,
        std::optional<unsigned> threads_override,
        std::optional<std::string> format_override) {
    const auto t0 = std::chrono::steady_clock::now();
    RunContext ctx;
    ctx.command = command;
    ctx.config_bytes = read_file(config_path);
    json cfg;
    try {
        cfg = json::parse(ctx.config_bytes);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    require_object(cfg, "config");
    reject_unknown_keys(cfg, "config",
                        {"seed", "threads", "out", "format", "model", command});
    if (!cfg.contains("seed")) throw ConfigError("config: seed required");
    ctx.seed = get_uint(cfg, "config", "seed");
    ctx.threads = unsigned(get_uint(cfg, "config", "threads", 1));
    ctx.out_dir = get_string(cfg, "config", "out", std::string("out"));
    std::string fmt = get_string(cfg, "config", "format",
                                 std::string("csv,json"));
    if (seed_override) ctx.seed = *seed_override;
    if (out_override) ctx.out_dir = *out_override;
    if (threads_override) ctx.threads = *threads_override;
    if (format_override) fmt = *format_override;
    if (ctx.threads < 1) throw ConfigError("config.threads: must be >= 1");
    ctx.want_csv = fmt.find("csv") != std::string::npos;
    ctx.want_json = fmt.find("json") != std::string::npos;
    if (!ctx.want_csv && !ctx.want_json)
        throw ConfigError("config.format: expected 'csv', 'json' or 'csv,json'");
    if (!cfg.contains("model")) throw ConfigError("config.model: required");
    ctx.pm = parse_model(cfg["model"]);
    ctx.params = cfg.contains(command) ? cfg[command] : json::object();
    require_object(ctx.params, "config." + command);

    fs::create_directories(ctx.out_dir);

    if (command == "simulate") run_simulate(ctx);
    else if (command == "coupling") run_coupling(ctx);
    else if (command == "meeting-time") run_meeting_time(ctx);
    else if (command == "conditions") run_conditions(ctx);
    else if (command == "blocks") run_blocks(ctx);
    else if (command == "variance") run_variance(ctx);
    else if (command == "clt") run_clt(ctx);
    else if (command == "report") run_report(ctx);
    else throw ConfigError("unknown command: " + command);

    // echo the fully resolved config (defaults materialized)
    json resolved;
    resolved["seed"] = ctx.seed;
    resolved["threads"] = ctx.threads;
    resolved["out"] = ctx.out_dir;
    resolved["format"] = fmt;
    resolved["model"] = ctx.pm.echo;
    resolved[command] = ctx.echo_params;
    write_text((fs::path(ctx.out_dir) / "resolved_config.json").string(),
               resolved.dump(2) + "\n");
    ctx.outputs.push_back("resolved_config.json");

    const auto t1 = std::chrono::steady_clock::now();
    json manifest;
    manifest["command"] = command;
    manifest["config_hash"] = fnv1a_hex(ctx.config_bytes);
    manifest["version"] = kVersion;
    manifest["seed"] = ctx.seed;
    manifest["outputs"] = ctx.outputs;
    manifest["wall_time_ms"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
    write_text((fs::path(ctx.out_dir) / "manifest.json").string(),
               manifest.dump(2) + "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"simulation and verification toolkit for stationary random "
                 "iterates"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out, format;
    std::optional<unsigned> threads;

    const std::vector<std::string> commands = {
        "simulate", "coupling", "meeting-time", "conditions",
        "blocks",   "variance", "clt",          "report"};
    for (const auto& name : commands) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON config file")
            ->required();
        sub->add_option("--seed", seed, "override config seed");
        sub->add_option("--out", out, "override output directory");
        sub->add_option("--threads", threads, "override worker count");
        sub->add_option("--format", format, "output formats: csv,json");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? 2 : 0;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        return run(command, config_path, seed, out, threads, format);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::domain_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "runtime error: %s\n", e.what());
        return 1;
    }
}
