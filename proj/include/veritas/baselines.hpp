#pragma once

#include <map>
#include <string>
#include <string_view>

#include "veritas/dataset.hpp"
#include "veritas/reliability.hpp"

namespace veritas {

// Per-task arithmetic mean over the category's unknown-truth tasks. Tasks with
// no observations are omitted. Throws InputError on a categorical task.
std::map<std::string, double> average_truth(const Dataset& dataset, std::string_view category);

// Per-task most frequent label; ties go to the lexicographically smallest
// label. Throws InputError on a continuous task.
std::map<std::string, std::string> majority_vote(const Dataset& dataset, std::string_view category);

// Mean for continuous tasks, vote for categorical ones, across all categories.
TruthMap unweighted_truths(const Dataset& dataset);

// Same tasks and data with every task moved into a single category.
Dataset pool_categories(const Dataset& dataset, const std::string& category = "*");

struct SingleReliabilityResult {
    std::map<std::string, double> reliabilities;
    TruthMap truths;
    CategoryEstimate estimate;
};

// CRH-style baseline: one reliability per user. Implemented as the engine run
// over a single pooled category with g = 1, alpha = 0 and uniform
// initialization (the BA configuration); iteration limits come from `base`.
SingleReliabilityResult single_reliability_discovery(const Dataset& dataset, const EngineConfig& base = {});

} // namespace veritas
