#include "jitcast/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "jitcast/evaluation.hpp"

namespace jitcast::io {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::uint64_t parse_u64(std::string_view text) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || p != text.data() + text.size() || text.empty())
        throw ConfigError("expected a non-negative integer, got '" + std::string(text) + "'");
    return v;
}

std::size_t parse_size(std::string_view text) { return static_cast<std::size_t>(parse_u64(text)); }

double parse_real(std::string_view text) {
    double v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || p != text.data() + text.size() || text.empty() || !std::isfinite(v))
        throw ConfigError("expected a finite number, got '" + std::string(text) + "'");
    return v;
}

bool parse_bool(std::string_view text) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ConfigError("expected true or false, got '" + std::string(text) + "'");
}

template <class F>
auto parse_list(std::string_view text, F item) {
    std::vector<decltype(item(text))> out;
    if (trim(text).empty()) return out;
    std::size_t pos = 0;
    while (true) {
        const auto comma = text.find(',', pos);
        out.push_back(item(trim(text.substr(pos, comma == std::string_view::npos ? comma : comma - pos))));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

template <class T, class F>
std::string join(const std::vector<T>& values, F fmt) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + fmt(values[i]);
    return out;
}

std::string fmt_real(double v) { return eval::format_double(v); }
std::string fmt_bool(bool v) { return v ? "true" : "false"; }

struct Setting {
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define JC_SIZE(path) \
    Setting { [](RunConfig& c, std::string_view v) { c.path = parse_size(v); }, \
              [](const RunConfig& c) { return std::to_string(c.path); } }
#define JC_REAL(path) \
    Setting { [](RunConfig& c, std::string_view v) { c.path = parse_real(v); }, \
              [](const RunConfig& c) { return fmt_real(c.path); } }
#define JC_BOOL(path) \
    Setting { [](RunConfig& c, std::string_view v) { c.path = parse_bool(v); }, \
              [](const RunConfig& c) { return fmt_bool(c.path); } }

const std::vector<std::pair<std::string, Setting>>& settings() {
    static const std::vector<std::pair<std::string, Setting>> table = {
        {"seed", {[](RunConfig& c, std::string_view v) { c.seed = parse_seed(v); },
                  [](const RunConfig& c) { return std::to_string(c.seed); }}},
        {"gen.start_date", {[](RunConfig& c, std::string_view v) { c.generator.start_date = parse_date(v); },
                            [](const RunConfig& c) { return format_date(c.generator.start_date); }}},
        {"gen.n_days", JC_SIZE(generator.n_days)},
        {"gen.anomaly_rate", JC_REAL(generator.anomaly_rate)},
        {"clean.max_hourly_kwh", JC_REAL(cleaning.max_hourly_kwh)},
        {"clean.low_usage_mean_kwh", JC_REAL(cleaning.low_usage_mean_kwh)},
        {"clean.require_continuity", JC_BOOL(cleaning.require_continuity)},
        {"cluster.k", JC_SIZE(clustering.k)},
        {"cluster.k_max", JC_SIZE(clustering.k_max)},
        {"cluster.n_init", JC_SIZE(clustering.n_init)},
        {"cluster.max_iter", JC_SIZE(clustering.max_iter)},
        {"cluster.tol", JC_REAL(clustering.tol)},
        {"cluster.min_days", JC_SIZE(clustering.min_days)},
        {"model.d_model", JC_SIZE(ensemble.model.d_model)},
        {"model.n_heads", JC_SIZE(ensemble.model.n_heads)},
        {"model.d_ff", JC_SIZE(ensemble.model.d_ff)},
        {"model.n_encoder_layers", JC_SIZE(ensemble.model.n_encoder_layers)},
        {"model.n_decoder_layers", JC_SIZE(ensemble.model.n_decoder_layers)},
        {"model.layer_norm_eps", JC_REAL(ensemble.model.layer_norm_eps)},
        {"model.residual_output", JC_BOOL(ensemble.model.residual_output)},
        {"jit.n_models", JC_SIZE(ensemble.n_models)},
        {"jit.encoder_len", JC_SIZE(ensemble.encoder_len)},
        {"jit.base_decoder_len", JC_SIZE(ensemble.base_decoder_len)},
        {"train.epochs", JC_SIZE(training.epochs)},
        {"train.batch_size", JC_SIZE(training.batch_size)},
        {"train.learning_rate", JC_REAL(training.learning_rate)},
        {"train.train_fraction", JC_REAL(training.train_fraction)},
        {"train.val_fraction", JC_REAL(training.val_fraction)},
        {"train.test_fraction", JC_REAL(training.test_fraction)},
        {"train.vanilla", JC_BOOL(train_vanilla)},
        {"grid.d_model", {[](RunConfig& c, std::string_view v) { c.grid.d_model = parse_list(v, parse_size); },
                          [](const RunConfig& c) {
                              return join(c.grid.d_model, [](std::size_t x) { return std::to_string(x); });
                          }}},
        {"grid.n_heads", {[](RunConfig& c, std::string_view v) { c.grid.n_heads = parse_list(v, parse_size); },
                          [](const RunConfig& c) {
                              return join(c.grid.n_heads, [](std::size_t x) { return std::to_string(x); });
                          }}},
        {"grid.learning_rate",
         {[](RunConfig& c, std::string_view v) { c.grid.learning_rate = parse_list(v, parse_real); },
          [](const RunConfig& c) { return join(c.grid.learning_rate, fmt_real); }}},
        {"grid.epochs", JC_SIZE(grid.epochs)},
    };
    return table;
}

#undef JC_SIZE
#undef JC_REAL
#undef JC_BOOL

// archetype.N.field
bool set_archetype(std::map<std::size_t, gen::ArchetypeSpec>& out, std::string_view key, std::string_view value) {
    constexpr std::string_view prefix = "archetype.";
    if (key.substr(0, prefix.size()) != prefix) return false;
    key.remove_prefix(prefix.size());
    const auto dot = key.find('.');
    if (dot == std::string_view::npos) return false;
    std::size_t index = 0;
    try {
        index = parse_size(key.substr(0, dot));
    } catch (const ConfigError&) {
        return false;
    }
    const auto field = key.substr(dot + 1);
    auto& a = out[index];
    if (field == "base_level") a.base_level = parse_real(value);
    else if (field == "annual_amplitude") a.annual_amplitude = parse_real(value);
    else if (field == "trend_per_year") a.trend_per_year = parse_real(value);
    else if (field == "noise_std") a.noise_std = parse_real(value);
    else if (field == "count") a.count = parse_size(value);
    else if (field == "weekly_profile") {
        const auto w = parse_list(value, parse_real);
        if (w.size() != 7) throw ConfigError("weekly_profile needs 7 values, got " + std::to_string(w.size()));
        std::copy(w.begin(), w.end(), a.weekly_profile.begin());
    } else {
        return false;
    }
    return true;
}

}  // namespace

std::uint64_t parse_seed(std::string_view text) {
    try {
        return parse_u64(trim(text));
    } catch (const ConfigError&) {
        throw ConfigError("seed must be a non-negative integer, got '" + std::string(text) + "'");
    }
}

gen::GeneratorConfig RunConfig::generator_config() const {
    auto g = generator;
    g.seed = seed;
    return g;
}

cluster::KMeansOptions RunConfig::kmeans_options() const {
    cluster::KMeansOptions o;
    o.k = clustering.k == 0 ? 1 : clustering.k;
    o.max_iter = clustering.max_iter;
    o.tol = clustering.tol;
    o.seed = seed;
    o.n_init = clustering.n_init;
    return o;
}

train::TrainConfig RunConfig::train_config() const {
    auto t = training;
    t.seed = seed;
    return t;
}

void RunConfig::validate() const {
    auto wrap = [](const char* what, auto&& fn) {
        try {
            fn();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string(what) + ": " + e.what());
        }
    };
    wrap("gen", [&] { generator_config().validate(); });
    wrap("clean", [&] { cleaning.validate(); });
    wrap("model/jit", [&] { ensemble.validate(); });
    wrap("train", [&] { train_config().validate(); });
    if (clustering.k_max < 3 && clustering.k == 0) throw ConfigError("cluster.k_max must be >= 3 for elbow selection");
    if (clustering.n_init == 0) throw ConfigError("cluster.n_init must be positive");
    if (clustering.max_iter == 0) throw ConfigError("cluster.max_iter must be positive");
    if (!(clustering.tol >= 0)) throw ConfigError("cluster.tol must be non-negative");
    if (grid.enabled() && grid.epochs == 0) throw ConfigError("grid.epochs must be positive");
    for (auto lr : grid.learning_rate)
        if (!(lr > 0)) throw ConfigError("grid.learning_rate values must be positive");
}

RunConfig parse_run_config(std::istream& in, const std::string& source) {
    RunConfig config;
    std::map<std::string, std::size_t> seen;
    std::map<std::size_t, gen::ArchetypeSpec> archetypes;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view body = line;
        if (auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
        body = trim(body);
        if (body.empty()) continue;
        const auto where = source + ":" + std::to_string(line_no) + ": ";
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
        const std::string key(trim(body.substr(0, eq)));
        const auto value = trim(body.substr(eq + 1));
        if (auto [it, fresh] = seen.emplace(key, line_no); !fresh)
            throw ConfigError(where + "duplicate key '" + key + "' (first on line " + std::to_string(it->second) + ")");
        try {
            const auto& table = settings();
            auto it = std::find_if(table.begin(), table.end(), [&](const auto& s) { return s.first == key; });
            if (it != table.end()) {
                it->second.set(config, value);
            } else if (!set_archetype(archetypes, key, value)) {
                throw ConfigError("unknown key '" + key + "'");
            }
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        } catch (const std::invalid_argument& e) {
            throw ConfigError(where + key + ": " + e.what());
        }
    }
    if (!archetypes.empty()) {
        config.generator.archetypes.clear();
        std::size_t expect = 0;
        for (auto& [index, spec] : archetypes) {
            if (index != expect) throw ConfigError(source + ": archetype indices must run 0.." + std::to_string(archetypes.size() - 1));
            config.generator.archetypes.push_back(spec);
            ++expect;
        }
    }
    config.generator.seed = config.seed;
    config.validate();
    return config;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config file " + path);
    return parse_run_config(f, path);
}

std::string format_run_config(const RunConfig& config) {
    std::ostringstream out;
    for (const auto& [key, s] : settings()) out << key << " = " << s.get(config) << '\n';
    for (std::size_t i = 0; i < config.generator.archetypes.size(); ++i) {
        const auto& a = config.generator.archetypes[i];
        const auto p = "archetype." + std::to_string(i) + ".";
        out << p << "base_level = " << fmt_real(a.base_level) << '\n'
            << p << "weekly_profile = "
            << join(std::vector<double>(a.weekly_profile.begin(), a.weekly_profile.end()), fmt_real) << '\n'
            << p << "annual_amplitude = " << fmt_real(a.annual_amplitude) << '\n'
            << p << "trend_per_year = " << fmt_real(a.trend_per_year) << '\n'
            << p << "noise_std = " << fmt_real(a.noise_std) << '\n'
            << p << "count = " << a.count << '\n';
    }
    return out.str();
}

std::uint64_t resolve_seed(std::uint64_t config_seed, const char* env_value, const std::optional<std::uint64_t>& flag) {
    if (flag) return *flag;
    if (env_value && *env_value) return parse_seed(env_value);
    return config_seed;
}

}  // namespace jitcast::io
