#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "jitcast/clustering.hpp"
#include "jitcast/datagen.hpp"
#include "jitcast/ensemble.hpp"
#include "jitcast/readings.hpp"
#include "jitcast/training.hpp"

namespace jitcast::io {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct ClusterSettings {
    std::size_t k = 0;  // 0 selects k from the elbow curve
    std::size_t k_max = 10;
    std::size_t n_init = 10;
    std::size_t max_iter = 300;
    double tol = 1e-6;
    std::size_t min_days = 60;
};

/// Optional grid search over stage-1 validation loss. Empty lists keep the
/// configured value.
struct GridSearch {
    std::vector<std::size_t> d_model;
    std::vector<std::size_t> n_heads;
    std::vector<double> learning_rate;
    std::size_t epochs = 5;

    bool enabled() const { return !d_model.empty() || !n_heads.empty() || !learning_rate.empty(); }
};

/// Every tunable of a pipeline run. `seed` drives generation, clustering,
/// initialisation and shuffling.
struct RunConfig {
    std::uint64_t seed = 42;
    gen::GeneratorConfig generator = gen::default_scenario(42);
    data::CleaningRules cleaning;
    ClusterSettings clustering;
    jit::JitEnsembleConfig ensemble;
    train::TrainConfig training;
    bool train_vanilla = true;
    GridSearch grid;

    /// Throws ConfigError naming the offending setting.
    void validate() const;
    gen::GeneratorConfig generator_config() const;
    cluster::KMeansOptions kmeans_options() const;
    train::TrainConfig train_config() const;  // training with the run seed applied
};

/// Parses a flat "key = value" document; '#' starts a comment. Unknown keys,
/// repeated keys and malformed values throw ConfigError with the line number.
/// Any archetype.N.* key replaces the built-in scenario with the listed archetypes.
RunConfig parse_run_config(std::istream& in, const std::string& source = "<config>");
RunConfig load_run_config(const std::string& path);

/// Canonical key = value form of every setting; parses back to an equal config.
std::string format_run_config(const RunConfig& config);

/// Seed precedence: flag, then environment value, then the config file.
std::uint64_t resolve_seed(std::uint64_t config_seed, const char* env_value,
                           const std::optional<std::uint64_t>& flag);
std::uint64_t parse_seed(std::string_view text);

}  // namespace jitcast::io
