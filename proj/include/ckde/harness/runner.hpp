#pragma once
/// \file runner.hpp
/// Dispatch a validated ExperimentConfig, write CSV outputs and manifest.json.
///
/// Output files carry the config hash and master seed in their metadata
/// header and never the thread count or timings, so their checksums only
/// depend on (config, seed). Timings live in the manifest.

#include "ckde/band.hpp"
#include "ckde/harness/config.hpp"
#include "ckde/harness/csv.hpp"
#include "ckde/kde.hpp"
#include "ckde/mise_lab.hpp"
#include "ckde/statistics.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#ifndef CKDE_VERSION
#define CKDE_VERSION "0.3.0"
#endif

namespace ckde::harness {

inline std::string code_version() { return CKDE_VERSION; }

struct OutputFile {
    std::string path;
    std::string sha256;
    std::string role;
    bool cached = false;  ///< quantile table taken from the cache
};

struct RunManifest {
    std::string config_hash;
    std::string code_version;
    std::string kind;
    std::uint64_t seed = 0;
    double wall_clock_seconds = 0.0;
    std::vector<OutputFile> outputs;

    const OutputFile* find(const std::string& role) const {
        for (const auto& o : outputs)
            if (o.role == role) return &o;
        return nullptr;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["config_hash"] = config_hash;
        j["code_version"] = code_version;
        j["kind"] = kind;
        j["seed"] = seed;
        j["wall_clock_seconds"] = wall_clock_seconds;
        j["outputs"] = nlohmann::json::array();
        for (const auto& o : outputs) {
            nlohmann::json e{{"path", o.path}, {"sha256", o.sha256}, {"role", o.role}};
            if (o.role == "quantile-table") e["cached"] = o.cached;
            j["outputs"].push_back(e);
        }
        return j;
    }
};

/// Worker failure. simulate(seed, substream) replays it in isolation.
class RunFailure : public std::runtime_error {
public:
    RunFailure(const std::string& what, std::uint64_t substream, std::size_t replicate)
        : std::runtime_error(what), substream_(substream), replicate_(replicate) {}
    std::uint64_t substream() const { return substream_; }
    std::size_t replicate() const { return replicate_; }

private:
    std::uint64_t substream_;
    std::size_t replicate_;
};

namespace detail {

inline CsvTable table_for(const ExperimentConfig& c, std::vector<std::string> columns) {
    CsvTable t(std::move(columns));
    t.meta("kind", to_string(c.kind));
    t.meta("config_hash", c.hash());
    t.meta("seed", std::to_string(c.seed));
    t.meta("code_version", code_version());
    t.meta("spec", c.spec.canonical());
    return t;
}

struct TableResult {
    QuantileTable table;
    std::string path;
    bool cached = false;
};

/// Quantile table of |R| for the limit spec L, reused from `dir` when its key matches.
inline TableResult cached_limit_table(const std::string& dir, const LimitSpec& L, const std::string& spec_id,
                                      CjConvention conv, const std::vector<double>& betas, std::size_t M,
                                      std::uint64_t seed, const LimitSampling& how) {
    QuantileTable probe;
    probe.limit = L;
    probe.betas = betas;
    probe.M = M;
    probe.seed = seed;
    probe.scheme = to_string(how.scheme);
    probe.resolution = how.resolution ? how.resolution : (how.scheme == RosenblattScheme::integral ? 2000 : 4096);
    probe.spec_id = spec_id;
    probe.convention = to_string(conv);
    const auto path = (std::filesystem::path(dir) / ("quantiles-" + probe.key() + ".csv")).string();
    if (std::filesystem::exists(path)) return {read_quantile_table(path), path, true};
    std::filesystem::create_directories(dir);
    auto t = quantile_table(L, betas, M, seed, how, spec_id, to_string(conv));
    write_quantile_table(t, path);
    return {t, path, false};
}

inline std::string size_tag(std::size_t n) { return "n" + std::to_string(n); }

}  // namespace detail

/// Runs the experiment, writing into c.output. Throws RunFailure when a
/// replicate fails and std::runtime_error for I/O problems.
inline RunManifest run(const ExperimentConfig& c) {
    const auto t0 = std::chrono::steady_clock::now();
    namespace fs = std::filesystem;
    fs::create_directories(c.output);
    const fs::path out(c.output);
    RunManifest man;
    man.config_hash = c.hash();
    man.code_version = code_version();
    man.kind = to_string(c.kind);
    man.seed = c.seed;
    const auto opt = c.mc_options();
    auto emit = [&](const CsvTable& t, const std::string& name, const std::string& role) {
        const auto p = (out / name).string();
        man.outputs.push_back({p, t.write(p), role, false});
    };
    LimitSampling how;
    how.scheme = c.scheme;
    how.threads = c.threads;
    const std::string cache = c.cache_dir.empty() ? (out / "quantile-cache").string() : c.cache_dir;

    try {
        switch (c.kind) {
            case ExperimentKind::simulate: {
                for (std::size_t si = 0; si < c.sizes.size(); ++si) {
                    const std::size_t n = c.sizes[si];
                    const auto coef = expand_filter(c.spec, opt.K_for(n));
                    const PathSimulator sim(coef, n, c.innovation, c.tail_model);
                    const auto paths = replicate_map<SamplePath>(
                        c.replicates, c.threads, [&](std::size_t r) { return substream_id(tag_simulate, n, r); },
                        [&](std::size_t r) { return sim.simulate(c.seed, substream_id(tag_simulate, n, r)); });
                    auto t = detail::table_for(c, {"replicate", "t", "x"});
                    t.meta("n", std::to_string(n));
                    t.meta("K", std::to_string(opt.K_for(n)));
                    for (std::size_t r = 0; r < paths.size(); ++r)
                        for (std::size_t i = 0; i < n; ++i)
                            t.row({(long long)r, (long long)(i + 1), paths[r].x[i]});
                    emit(t, "simulate-" + detail::size_tag(n) + ".csv", "paths");
                }
                break;
            }
            case ExperimentKind::rates: {
                const auto pair = variance_scaling_both(c.spec, c.sizes, c.replicates, opt);
                auto t = detail::table_for(c, {"statistic", "n", "variance", "variance_stderr"});
                auto f = detail::table_for(c, {"statistic", "fitted_exponent", "exponent_stderr", "expected"});
                const double a = c.spec.alpha();
                for (const RateFit* fit : {&pair.y1, &pair.y2}) {
                    const bool y1 = fit->statistic == StatisticTag::y1;
                    if (!c.both_statistics && fit->statistic != c.statistic) continue;
                    const std::string name = y1 ? "Y1" : "Y2";
                    for (std::size_t i = 0; i < fit->sizes.size(); ++i)
                        t.row({name, (long long)fit->sizes[i], fit->variances[i], fit->stderrs[i]});
                    // only a zero-frequency pole makes Var(Y1) superlinear
                    const double a0 = c.spec.alpha0;
                    const double expected = y1 ? (a0 < 1.0 ? 2.0 - a0 : 1.0) : (a < 0.5 ? 2.0 - 2.0 * a : 1.0);
                    f.row({name, fit->fitted_exponent, fit->stderr, expected});
                }
                emit(t, "rates.csv", "variances");
                emit(f, "rates-fit.csv", "fit");
                break;
            }
            case ExperimentKind::kde_sup: {
                const auto L = kde_sup_experiment(c.spec, parse_kernel(c.kernel), c.delta, c.sizes, c.replicates, opt,
                                                  c.grid_points);
                const double a = c.spec.alpha();
                auto t = detail::table_for(c, {"n", "median_sup", "mean_sup", "mean_sup_stderr", "scaled_median"});
                t.meta("kernel", c.kernel);
                t.meta("delta", fmt_double(c.delta));
                for (std::size_t i = 0; i < L.sizes.size(); ++i)
                    t.row({(long long)L.sizes[i], L.medians[i], L.means[i], L.mean_stderrs[i],
                           std::pow(double(L.sizes[i]), a) * L.medians[i]});
                emit(t, "kde-sup.csv", "summary");
                auto v = detail::table_for(c, {"n", "replicate", "sup"});
                for (std::size_t i = 0; i < L.sizes.size(); ++i)
                    for (std::size_t r = 0; r < L.values[i].size(); ++r)
                        v.row({(long long)L.sizes[i], (long long)r, L.values[i][r]});
                emit(v, "kde-sup-replicates.csv", "replicates");
                break;
            }
            case ExperimentKind::band_coverage: {
                const auto d = c.band_design();
                auto t = detail::table_for(c, {"n", "t", "coverage", "coverage_stderr", "oracle_width_coverage",
                                               "curvature_warnings", "replicates"});
                t.meta("beta", fmt_double(d.beta));
                t.meta("interval", fmt_double(d.a) + "," + fmt_double(d.b));
                for (std::size_t si = 0; si < c.sizes.size(); ++si) {
                    const std::size_t n = c.sizes[si];
                    const auto scaled = with_marginal_sd(d.spec, d.marginal_sd, opt.K_for(n), opt.tail_model);
                    const auto tab = detail::cached_limit_table(cache, make_limit_spec(scaled, c.convention),
                                                                scaled.id(), c.convention, c.betas, c.draws, c.seed, how);
                    if (!man.find("quantile-table") || man.find("quantile-table")->path != tab.path)
                        man.outputs.push_back({tab.path, sha256_file(tab.path), "quantile-table", tab.cached});
                    const auto res = band_coverage(d, n, c.replicates, tab.table.quantile(d.beta), opt);
                    t.row({(long long)n, res.t, res.coverage, res.stderr, res.oracle_width_coverage,
                           (long long)res.curvature_warnings, (long long)res.replicates});
                }
                emit(t, "coverage.csv", "coverage");
                break;
            }
            case ExperimentKind::quantiles: {
                const auto L = make_limit_spec(c.spec, c.convention);
                const auto tab = detail::cached_limit_table(cache, L, c.spec.id(), c.convention, c.betas, c.draws,
                                                            c.seed, how);
                man.outputs.push_back({tab.path, sha256_file(tab.path), "quantile-table", tab.cached});
                auto t = detail::table_for(c, {"beta", "quantile"});
                t.meta("draws", std::to_string(c.draws));
                t.meta("convention", to_string(c.convention));
                t.meta("scheme", to_string(c.scheme));
                for (std::size_t i = 0; i < tab.table.betas.size(); ++i)
                    t.row({tab.table.betas[i], tab.table.quantiles[i]});
                emit(t, "quantiles.csv", "quantiles");
                break;
            }
            case ExperimentKind::mise: {
                const auto k = parse_kernel(c.kernel);
                auto t = detail::table_for(c, {"n", "m", "mise_mc", "mise_mc_stderr", "mise_mc_raw",
                                               "mise_mc_raw_stderr", "mise0", "gamma", "w_term", "ratio",
                                               "ratio_stderr", "hypothesis_ok"});
                t.meta("kernel", c.kernel);
                t.meta("delta", fmt_double(c.delta));
                for (std::size_t si = 0; si < c.sizes.size(); ++si) {
                    const auto rep = equivalence_check(c.spec, k, c.delta, {c.sizes[si]}, c.replicates, opt).at(0);
                    t.row({(long long)rep.n, rep.m, rep.mise_mc, rep.mise_mc_stderr, rep.mise_mc_raw,
                           rep.mise_mc_raw_stderr, rep.mise0, rep.gamma, rep.w_term, rep.ratio, rep.ratio_stderr,
                           (long long)rep.hypothesis_ok});
                }
                emit(t, "mise.csv", "mise");
                break;
            }
        }
    } catch (const ReplicateFailure& e) {
        throw RunFailure(std::string(e.what()) + " [seed " + std::to_string(c.seed) + "]", e.substream(), e.index());
    }

    man.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ofstream mf(out / "manifest.json");
    if (!mf) throw std::runtime_error("cannot write manifest in " + c.output);
    mf << man.to_json().dump(2) << '\n';
    return man;
}

}  // namespace ckde::harness
