#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "veritas/dataset.hpp"
#include "veritas/reliability.hpp"

namespace veritas {

enum class Setting { S1, S2, S3 };
enum class UserGroup { Reliable, Normal, Unreliable };

std::string_view to_string(Setting s);
Setting parse_setting(std::string_view s);
std::string_view to_string(UserGroup g);

struct SimConfig {
    std::size_t n_users = 100;
    std::size_t n_tasks = 1000;
    std::size_t n_categories = 20;
    double selection_rate = 0.10;
    double truth_low = 30.0;
    double truth_high = 100.0;
    Setting setting = Setting::S1;
    double known_truth_ratio = 0.01;
    double failure_threshold = 0.2;
    double failure_prob = 0.5;
    double min_reliability = 0.05;
    double reliability_sd = 0.1;
    DataType data_type = DataType::Continuous;
    std::size_t label_count = 5; // categorical mode
    std::uint64_t seed = 0;
    std::size_t repetitions = 20;
    EngineConfig engine;

    // Throws InputError naming the offending field.
    void validate() const;
};

struct GroundTruthBundle {
    std::vector<std::string> users;
    std::vector<std::string> tasks;
    std::vector<std::string> categories;
    std::vector<std::size_t> task_category;
    Eigen::MatrixXd true_reliability; // users x categories
    TruthMap true_values;
    std::vector<UserGroup> groups;
    std::set<std::string> known_tasks;

    // Truths of the tasks whose values were not exposed.
    TruthMap hidden_truths() const;
};

// Group of each of config.n_users users. User u's draw depends only on
// (seed, u), so growing n_users extends the assignment.
std::vector<UserGroup> assign_groups(const SimConfig& config);

// Population, task truths and the exposed known-truth set.
GroundTruthBundle draw_ground_truth(const SimConfig& config);

// Selection, failure and noisy reports for a given ground truth. Every user
// consumes the same random draws for every task whatever the outcome, so
// datasets for different selection rates share their noise.
Dataset realize_dataset(const SimConfig& config, const GroundTruthBundle& truth);

std::pair<Dataset, GroundTruthBundle> generate_dataset(const SimConfig& config);

std::string ground_truth_to_json(const GroundTruthBundle& truth);

enum class KnownTruthStrategy { Random, MaxVariance, MostContributors };

std::string_view to_string(KnownTruthStrategy s);
KnownTruthStrategy parse_known_truth_strategy(std::string_view s);

// ceil(ratio * |S_c|) unknown-truth tasks per category, chosen among those
// with an entry in `truths`. MaxVariance ranks by the spread of reported
// values (1 - top label share for labels); MostContributors by observation
// count. Ties go to the smaller task id.
std::set<std::string> sample_known_truths(const Dataset& dataset, const TruthMap& truths, double ratio,
                                          KnownTruthStrategy strategy, std::uint64_t seed = 0);

enum class Algorithm { Average, Crh, UrpBa, UrpE1, UrpE2 };

// "avg" (or "voting" for labels), "crh", "urp-ba", "urp-e1", "urp-e2".
std::string algorithm_name(Algorithm a, DataType type);
Algorithm parse_algorithm(std::string_view s);
const std::vector<Algorithm>& all_algorithms();

enum class SweepAxis { None, Users, SelectionRate, TruthRatio };

std::string_view to_string(SweepAxis a);
SweepAxis parse_sweep_axis(std::string_view s);
std::vector<double> default_sweep_values(SweepAxis a);

// Seed of repetition `rep`. Every sweep point reuses it, so points differ only
// in the swept parameter.
std::uint64_t repetition_seed(std::uint64_t base, std::size_t rep);

// Hidden-truth metric (RMSE, or error rate for labels) per algorithm for one
// generated dataset. Tasks that would be exposed at `holdout_ratio` (when it
// exceeds the config's ratio) are left out too, so points of a truth-ratio
// sweep are scored on the same tasks.
std::vector<double> evaluate_unit(const SimConfig& config, const std::vector<Algorithm>& algorithms,
                                  double holdout_ratio = 0.0);

struct MetricRow {
    std::string algorithm;
    Setting setting = Setting::S1;
    SweepAxis axis = SweepAxis::None;
    double sweep_value = 0.0;
    std::size_t seed_count = 0;
    std::string metric;
    double mean = 0.0;
    double std = 0.0; // sample standard deviation
    std::vector<double> samples;
};

struct ExperimentTable {
    std::vector<MetricRow> rows; // grouped by algorithm, then sweep value

    std::string to_csv() const;
    // Row for (algorithm, sweep value); throws std::out_of_range if absent.
    const MetricRow& at(std::string_view algorithm, double sweep_value = 0.0) const;
};

ExperimentTable run_experiment(const SimConfig& config, SweepAxis sweep = SweepAxis::None,
                               std::vector<double> sweep_values = {},
                               std::vector<Algorithm> algorithms = all_algorithms());

} // namespace veritas
