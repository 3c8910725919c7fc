#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "veritas/completion.hpp"
#include "veritas/preference.hpp"
#include "veritas/recommender.hpp"
#include "veritas/reliability.hpp"
#include "veritas/simulation.hpp"

namespace veritas {

// Settings for `profile` and `recommend`. Every field has a default; a config
// file only lists what it changes.
struct RunConfig {
    std::uint64_t seed = 0;
    EngineConfig engine;
    MfConfig completion;          // reliability completion
    PreferenceConfig preference;
    double gamma = 0.4;
    std::size_t top_k = 20;
    Strategy strategy = Strategy::Linear;
    bool category_preference = false;
    double known_truth_ratio = 0.1; // applied when truths are supplied separately
    KnownTruthStrategy known_truth_strategy = KnownTruthStrategy::Random;

    // Per-stage seeds derived from `seed`.
    std::uint64_t completion_seed() const;
    std::uint64_t preference_seed() const;
    std::uint64_t sampling_seed() const;
};

struct SimulationPlan {
    SimConfig sim;
    SweepAxis sweep = SweepAxis::None;
    std::vector<double> sweep_values; // empty: the axis defaults
    std::vector<Algorithm> algorithms = all_algorithms();
};

// Strict parsers: unknown keys, wrong types and out-of-range values raise
// InputError naming the field (e.g. "engine.alpha").
RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& config);

SimulationPlan parse_simulation_plan(std::string_view json_text);
SimulationPlan load_simulation_plan(const std::filesystem::path& path);
std::string simulation_plan_to_json(const SimulationPlan& plan);

} // namespace veritas
