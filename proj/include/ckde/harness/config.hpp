#pragma once
/// \file config.hpp
/// Experiment configuration: `section.key = value` lines, `#` comments.
///
///   experiment.kind     = band-coverage     # simulate | rates | kde-sup | band-coverage | quantiles | mise
///   experiment.seed     = 20240601
///   experiment.sizes    = 2^12, 2^14        # integers or powers
///   process.poles[0].lambda = pi/3          # + - * / ^ ( ) and pi are understood
///   process.poles[0].alpha  = 0.2
///   process.g           = 1, 0.5
///
/// Every problem found is reported, not only the first.

#include "ckde/band.hpp"
#include "ckde/hash.hpp"
#include "ckde/kernels.hpp"
#include "ckde/limit_law.hpp"
#include "ckde/process_sim.hpp"
#include "ckde/statistics.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ckde::harness {

enum class ExperimentKind { simulate, rates, kde_sup, band_coverage, quantiles, mise };

inline std::string to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::simulate: return "simulate";
        case ExperimentKind::rates: return "rates";
        case ExperimentKind::kde_sup: return "kde-sup";
        case ExperimentKind::band_coverage: return "band-coverage";
        case ExperimentKind::quantiles: return "quantiles";
        case ExperimentKind::mise: return "mise";
    }
    return "?";
}

inline std::optional<ExperimentKind> parse_kind(const std::string& s) {
    for (auto k : {ExperimentKind::simulate, ExperimentKind::rates, ExperimentKind::kde_sup,
                   ExperimentKind::band_coverage, ExperimentKind::quantiles, ExperimentKind::mise})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

/// Parse or semantic problems; what() lists them all, one per line.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> problems)
        : std::runtime_error(join(problems)), problems_(std::move(problems)) {}
    const std::vector<std::string>& problems() const { return problems_; }

private:
    static std::string join(const std::vector<std::string>& p) {
        std::string s = "invalid configuration:";
        for (const auto& x : p) s += "\n  " + x;
        return s;
    }
    std::vector<std::string> problems_;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::rates;
    std::string name = "experiment";
    std::uint64_t seed = 20240601;
    std::vector<std::size_t> sizes;
    std::size_t replicates = 0;  ///< 0 until defaults are applied
    std::string output = "out";
    int threads = 0;

    CyclicSpec spec;
    std::size_t truncation = 0;  ///< 0: default_truncation(n)
    bool tail_model = true;
    Innovation innovation = Innovation::gaussian;

    std::string kernel = "parzen:s=4:smooth";
    double delta = 0.0;
    std::size_t grid_points = 2048;

    StatisticTag statistic = StatisticTag::y2;
    bool both_statistics = true;

    // band-coverage
    std::string kernel2 = "parzen:s=2:smooth";
    double delta2 = 0.02;
    double band_a = 1.0, band_b = 2.0;
    double marginal_sd = 0.7;
    double marginal_mean = -0.68;

    // limit law / quantiles
    std::vector<double> betas{0.9};
    std::size_t draws = 100000;
    CjConvention convention = CjConvention::matched;
    RosenblattScheme scheme = RosenblattScheme::quadratic;
    std::string cache_dir;  ///< empty: <output>/quantile-cache

    MonteCarloOptions mc_options() const {
        MonteCarloOptions o;
        o.seed = seed;
        o.threads = threads;
        o.innovation = innovation;
        o.tail_model = tail_model;
        o.truncation = truncation;
        return o;
    }

    /// Normalized listing of every field; its hash identifies the run.
    std::string canonical() const {
        std::ostringstream os;
        os << "kind=" << to_string(kind) << "\nname=" << name << "\nseed=" << seed << "\nsizes=";
        for (auto n : sizes) os << n << ',';
        os << "\nreplicates=" << replicates << "\nspec=" << spec.canonical() << "\ntruncation=" << truncation
           << "\ntail_model=" << tail_model << "\ninnovation=" << ckde::to_string(innovation)
           << "\nkernel=" << kernel << "\ndelta=" << fmt_double(delta) << "\ngrid_points=" << grid_points
           << "\nstatistic=" << (both_statistics ? "both" : statistic == StatisticTag::y1 ? "Y1" : "Y2")
           << "\nkernel2=" << kernel2 << "\ndelta2=" << fmt_double(delta2) << "\nband=" << fmt_double(band_a) << ','
           << fmt_double(band_b) << "\nmarginal=" << fmt_double(marginal_sd) << ',' << fmt_double(marginal_mean)
           << "\nbetas=";
        for (double b : betas) os << fmt_double(b) << ',';
        os << "\ndraws=" << draws << "\nconvention=" << ckde::to_string(convention)
           << "\nscheme=" << ckde::to_string(scheme) << '\n';
        return os.str();
    }

    std::string hash() const { return sha256_hex(canonical()); }

    BandDesign band_design() const {
        BandDesign d;
        d.spec = spec;
        d.marginal_sd = marginal_sd;
        d.marginal_mean = marginal_mean;
        d.kernel = parse_kernel(kernel);
        d.kernel2 = parse_kernel(kernel2);
        d.delta = delta;
        d.delta2 = delta2;
        d.a = band_a;
        d.b = band_b;
        d.beta = betas.front();
        return d;
    }
};

namespace detail {

/// Arithmetic with + - * / ^, parentheses, unary minus and the constant pi.
class Expr {
public:
    explicit Expr(const std::string& s) : s_(s) {}

    double parse() {
        const double v = sum();
        skip();
        if (i_ != s_.size()) fail("unexpected '" + std::string(1, s_[i_]) + "'");
        return v;
    }

private:
    [[noreturn]] void fail(const std::string& why) const { throw std::invalid_argument(why + " in '" + s_ + "'"); }
    void skip() {
        while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
    }
    bool eat(char c) {
        skip();
        if (i_ < s_.size() && s_[i_] == c) {
            ++i_;
            return true;
        }
        return false;
    }
    double sum() {
        double v = product();
        for (;;) {
            if (eat('+')) v += product();
            else if (eat('-')) v -= product();
            else return v;
        }
    }
    double product() {
        double v = power();
        for (;;) {
            if (eat('*')) v *= power();
            else if (eat('/')) v /= power();
            else return v;
        }
    }
    double power() {
        const double b = unary();
        if (eat('^')) return std::pow(b, power());
        return b;
    }
    double unary() {
        if (eat('-')) return -unary();
        if (eat('+')) return unary();
        return atom();
    }
    double atom() {
        skip();
        if (eat('(')) {
            const double v = sum();
            if (!eat(')')) fail("missing ')'");
            return v;
        }
        if (s_.compare(i_, 2, "pi") == 0) {
            i_ += 2;
            return std::numbers::pi;
        }
        const char* begin = s_.c_str() + i_;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin) fail("expected a number");
        i_ += std::size_t(end - begin);
        return v;
    }

    std::string s_;
    std::size_t i_ = 0;
};

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

struct Entry {
    std::string value;
    int line = 0;
};

}  // namespace detail

inline double parse_number(const std::string& s) { return detail::Expr(s).parse(); }

/// Parse text into a validated config. `origin` prefixes line references.
/// `implied` is the kind chosen by the caller (a CLI subcommand); it fills a
/// missing experiment.kind and must agree with a given one.
inline ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>",
                                     std::optional<ExperimentKind> implied = std::nullopt) {
    std::vector<std::string> errors;
    std::map<std::string, detail::Entry> entries;
    {
        std::istringstream in(text);
        std::string raw;
        int line = 0;
        static const std::regex key_re(R"(^[a-z_][a-z0-9_]*(\[[0-9]+\])?(\.[a-z_][a-z0-9_]*(\[[0-9]+\])?)+$)");
        while (std::getline(in, raw)) {
            ++line;
            const auto hash = raw.find('#');
            const std::string body = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
            if (body.empty()) continue;
            const auto eq = body.find('=');
            const std::string where = origin + ":" + std::to_string(line);
            if (eq == std::string::npos) {
                errors.push_back(where + ": expected 'section.key = value'");
                continue;
            }
            const std::string key = detail::trim(body.substr(0, eq)), value = detail::trim(body.substr(eq + 1));
            if (!std::regex_match(key, key_re)) {
                errors.push_back(where + ": malformed key '" + key + "' (want section.key)");
                continue;
            }
            if (value.empty()) {
                errors.push_back(where + ": empty value for '" + key + "'");
                continue;
            }
            const auto it = entries.find(key);
            if (it != entries.end()) {
                errors.push_back(where + ": duplicate key '" + key + "' (first set on line " +
                                 std::to_string(it->second.line) + ", again on line " + std::to_string(line) + ")");
                continue;
            }
            entries[key] = {value, line};
        }
    }

    ExperimentConfig c;
    std::map<std::string, bool> used;
    auto get = [&](const std::string& key) -> const detail::Entry* {
        auto it = entries.find(key);
        if (it == entries.end()) return nullptr;
        used[key] = true;
        return &it->second;
    };
    auto at = [&](const detail::Entry& e, const std::string& key) {
        return origin + ":" + std::to_string(e.line) + ": " + key;
    };
    auto number = [&](const std::string& key, double& out) {
        if (const auto* e = get(key)) {
            try {
                out = parse_number(e->value);
            } catch (const std::exception& ex) {
                errors.push_back(at(*e, key) + ": " + ex.what());
            }
        }
    };
    auto integer = [&](const std::string& key, auto& out) {
        if (const auto* e = get(key)) {
            try {
                const double v = parse_number(e->value);
                if (!(v >= 0.0) || v != std::floor(v) || v > 1.8e19) throw std::invalid_argument("not a non-negative integer");
                out = static_cast<std::remove_reference_t<decltype(out)>>(v);
            } catch (const std::exception& ex) {
                errors.push_back(at(*e, key) + ": " + ex.what());
            }
        }
    };
    auto text_value = [&](const std::string& key, std::string& out) {
        if (const auto* e = get(key)) out = e->value;
    };
    auto list = [&](const std::string& key, auto& out, bool integral) {
        if (const auto* e = get(key)) {
            out.clear();
            for (const auto& item : detail::split_list(e->value)) {
                try {
                    const double v = parse_number(item);
                    if (integral && (!(v >= 0.0) || v != std::floor(v))) throw std::invalid_argument("'" + item + "' is not an integer");
                    out.push_back(static_cast<typename std::remove_reference_t<decltype(out)>::value_type>(v));
                } catch (const std::exception& ex) {
                    errors.push_back(at(*e, key) + ": " + ex.what());
                }
            }
        }
    };
    auto boolean = [&](const std::string& key, bool& out) {
        if (const auto* e = get(key)) {
            if (e->value == "true" || e->value == "1") out = true;
            else if (e->value == "false" || e->value == "0") out = false;
            else errors.push_back(at(*e, key) + ": expected true or false");
        }
    };

    if (const auto* e = get("experiment.kind")) {
        if (auto k = parse_kind(e->value)) {
            c.kind = *k;
            if (implied && *implied != *k)
                errors.push_back(at(*e, "experiment.kind") + ": is '" + e->value + "' but '" + to_string(*implied) +
                                 "' was requested");
        } else {
            errors.push_back(at(*e, "experiment.kind") + ": unknown kind '" + e->value + "'");
        }
    } else if (implied) {
        c.kind = *implied;
    } else {
        errors.push_back(origin + ": experiment.kind is required");
    }
    text_value("experiment.name", c.name);
    integer("experiment.seed", c.seed);
    list("experiment.sizes", c.sizes, true);
    integer("experiment.replicates", c.replicates);
    text_value("experiment.output", c.output);
    integer("experiment.threads", c.threads);

    // poles[i].* collected in index order
    std::map<std::size_t, Pole> poles;
    static const std::regex pole_re(R"(^process\.poles\[([0-9]+)\]\.(lambda|alpha)$)");
    for (const auto& [key, e] : entries) {
        std::smatch m;
        if (!std::regex_match(key, m, pole_re)) continue;
        used[key] = true;
        const std::size_t idx = std::stoul(m[1]);
        try {
            const double v = parse_number(e.value);
            (m[2] == "lambda" ? poles[idx].lambda : poles[idx].alpha) = v;
        } catch (const std::exception& ex) {
            errors.push_back(at(e, key) + ": " + ex.what());
        }
    }
    for (std::size_t j = 0; j < poles.size(); ++j) {
        if (!poles.count(j)) {
            errors.push_back(origin + ": process.poles indices must run 0.." + std::to_string(poles.size() - 1));
            break;
        }
        if (!entries.count("process.poles[" + std::to_string(j) + "].lambda") ||
            !entries.count("process.poles[" + std::to_string(j) + "].alpha"))
            errors.push_back(origin + ": process.poles[" + std::to_string(j) + "] needs both lambda and alpha");
        c.spec.poles.push_back(poles[j]);
    }
    number("process.alpha0", c.spec.alpha0);
    number("process.sigma2", c.spec.sigma2);
    list("process.g", c.spec.g_coeffs, false);
    integer("process.truncation", c.truncation);
    boolean("process.tail_model", c.tail_model);
    if (const auto* e = get("process.innovation")) {
        try {
            c.innovation = parse_innovation(e->value);
        } catch (const std::exception& ex) {
            errors.push_back(at(*e, "process.innovation") + ": " + ex.what());
        }
    }

    text_value("kde.kernel", c.kernel);
    const bool kernel_given = entries.count("kde.kernel") > 0;
    number("kde.delta", c.delta);
    integer("kde.grid_points", c.grid_points);
    text_value("kde.kernel2", c.kernel2);
    number("kde.delta2", c.delta2);

    if (const auto* e = get("rates.statistic")) {
        if (e->value == "both") {
            c.both_statistics = true;
        } else {
            try {
                c.statistic = parse_statistic(e->value);
                c.both_statistics = false;
            } catch (const std::exception& ex) {
                errors.push_back(at(*e, "rates.statistic") + ": " + ex.what());
            }
        }
    }

    number("band.a", c.band_a);
    number("band.b", c.band_b);
    number("band.marginal_sd", c.marginal_sd);
    number("band.marginal_mean", c.marginal_mean);

    list("limit.betas", c.betas, false);
    integer("limit.draws", c.draws);
    text_value("limit.cache_dir", c.cache_dir);
    if (const auto* e = get("limit.convention")) {
        try {
            c.convention = parse_cj_convention(e->value);
        } catch (const std::exception& ex) {
            errors.push_back(at(*e, "limit.convention") + ": " + ex.what());
        }
    }
    if (const auto* e = get("limit.scheme")) {
        try {
            c.scheme = parse_scheme(e->value);
        } catch (const std::exception& ex) {
            errors.push_back(at(*e, "limit.scheme") + ": " + ex.what());
        }
    }

    for (const auto& [key, e] : entries)
        if (!used.count(key)) errors.push_back(at(e, key) + ": unknown key");

    // defaults that depend on the kind
    if (!kernel_given && c.kind == ExperimentKind::mise) c.kernel = "epanechnikov";
    if (c.replicates == 0) {
        switch (c.kind) {
            case ExperimentKind::simulate: c.replicates = 1; break;
            case ExperimentKind::rates: c.replicates = 500; break;
            case ExperimentKind::kde_sup: c.replicates = 300; break;
            case ExperimentKind::band_coverage: c.replicates = 500; break;
            case ExperimentKind::quantiles: c.replicates = 1; break;
            case ExperimentKind::mise: c.replicates = 1000; break;
        }
    }
    if (c.sizes.empty() && c.kind != ExperimentKind::quantiles) errors.push_back(origin + ": experiment.sizes is required");

    // semantic rules
    for (const auto& v : c.spec.violations())
        errors.push_back(origin + ": " + (v.rfind("process.", 0) == 0 ? v : "process." + v));
    for (std::size_t i = 1; i < c.sizes.size(); ++i)
        if (!(c.sizes[i - 1] < c.sizes[i])) {
            errors.push_back(origin + ": experiment.sizes must be strictly increasing");
            break;
        }
    for (auto n : c.sizes)
        if (n < 2) errors.push_back(origin + ": experiment.sizes entries must be >= 2");
    if (c.threads < 0) errors.push_back(origin + ": experiment.threads must be >= 0");

    std::optional<Kernel> k;
    try {
        k = parse_kernel(c.kernel);
    } catch (const std::exception& ex) {
        errors.push_back(origin + ": kde.kernel: " + ex.what());
    }
    const bool needs_delta = c.kind == ExperimentKind::kde_sup || c.kind == ExperimentKind::band_coverage ||
                             c.kind == ExperimentKind::mise;
    if (needs_delta && !(c.delta > 0.0 && c.delta < 1.0)) errors.push_back(origin + ": kde.delta must lie in (0, 1)");
    if (c.grid_points < 2) errors.push_back(origin + ": kde.grid_points must be >= 2");
    const bool long_memory = c.spec.violations().empty() && c.spec.alpha() < 0.5;

    switch (c.kind) {
        case ExperimentKind::kde_sup:
            if (k && k->order != 4) errors.push_back(origin + ": kde.kernel: the sup-norm rate experiment uses an order-4 kernel");
            break;
        case ExperimentKind::mise:
            if (k && k->order != 2)
                errors.push_back(origin + ": kde.kernel: the MISE experiment needs a nonnegative (order-2) kernel");
            if (c.innovation != Innovation::gaussian) errors.push_back(origin + ": process.innovation: MISE needs gaussian");
            if (c.replicates < 100) errors.push_back(origin + ": experiment.replicates: MISE needs >= 100");
            break;
        case ExperimentKind::rates:
            if (c.sizes.size() < 3) errors.push_back(origin + ": experiment.sizes: rates need >= 3 sizes");
            if (c.replicates < 200) errors.push_back(origin + ": experiment.replicates: rates need >= 200");
            break;
        case ExperimentKind::band_coverage: {
            try {
                const auto k2 = parse_kernel(c.kernel2);
                if (!k2.smooth) errors.push_back(origin + ": kde.kernel2: f~'' needs a smooth kernel");
            } catch (const std::exception& ex) {
                errors.push_back(origin + ": kde.kernel2: " + ex.what());
            }
            if (!(c.delta2 > 0.0 && c.delta2 < 1.0)) errors.push_back(origin + ": kde.delta2 must lie in (0, 1)");
            if (!(c.band_a < c.band_b)) errors.push_back(origin + ": band.a must be below band.b");
            if (!(c.marginal_sd > 0.0)) errors.push_back(origin + ": band.marginal_sd must be positive");
            if (c.innovation != Innovation::gaussian) errors.push_back(origin + ": process.innovation: band needs gaussian");
            [[fallthrough]];
        }
        case ExperimentKind::quantiles:
            if (!long_memory) errors.push_back(origin + ": process: the limit law needs alpha < 1/2");
            if (c.betas.empty()) errors.push_back(origin + ": limit.betas must not be empty");
            for (double b : c.betas)
                if (!(b > 0.0 && b < 1.0)) errors.push_back(origin + ": limit.betas entries must lie in (0, 1)");
            if (c.draws < 10000) errors.push_back(origin + ": limit.draws must be >= 10000");
            break;
        case ExperimentKind::simulate: break;
    }
    if (c.kind == ExperimentKind::band_coverage && c.betas.size() != 1)
        errors.push_back(origin + ": limit.betas: band coverage takes a single level");

    if (!errors.empty()) throw ConfigError(errors);
    return c;
}

inline ExperimentConfig load_config(const std::string& path, std::optional<ExperimentKind> implied = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw ConfigError({path + ": cannot open"});
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path, implied);
}

}  // namespace ckde::harness
