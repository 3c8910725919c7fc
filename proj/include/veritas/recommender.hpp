#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "veritas/preference.hpp"
#include "veritas/profile.hpp"

namespace veritas {

enum class Strategy { Linear, Product, Constrained };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view s);

// gamma * p + (1 - gamma) * q
double score(double p, double q, double gamma);
// p * q
double product_score(double p, double q);

// Task-level preference and reliability for every (user, task) pair.
// reliability(i, j) is q_{i,c} of task j's category.
struct ScoringInputs {
    std::vector<std::string> users;
    std::vector<std::string> tasks;
    Eigen::MatrixXd preference;
    Eigen::MatrixXd reliability;
    std::vector<std::set<std::string>> completed; // per user

    Eigen::Index require_user(std::string_view id) const;
};

// Joins the two profiles through task -> category. With
// `category_preference`, p_ij is replaced by the user's mean preference over
// the tasks of j's category.
ScoringInputs join_profiles(const PreferenceProfile& preferences, const ReliabilityProfile& reliability,
                            const std::map<std::string, std::string>& task_category,
                            const std::map<std::string, std::set<std::string>>& completed,
                            bool category_preference = false);

struct Recommendation {
    std::string user;
    std::vector<std::pair<std::string, double>> ranked; // (task, score), best first
    bool truncated = false; // fewer than k eligible tasks
};

// The k best tasks by score, excluding `exclusions` (by default the tasks the
// user already completed). Ties go to the smaller task id.
Recommendation top_k(const ScoringInputs& inputs, std::string_view user, std::size_t k, double gamma,
                     Strategy strategy = Strategy::Linear,
                     const std::optional<std::set<std::string>>& exclusions = std::nullopt);

// argmax_j p_ij subject to q_ij >= q_req; nullopt when nothing is feasible.
std::optional<std::string> constrained_recommend(const ScoringInputs& inputs, std::string_view user, double q_req,
                                                 const std::optional<std::set<std::string>>& exclusions = std::nullopt);

std::string recommendation_to_json(const Recommendation& rec);
std::string constrained_to_json(const ScoringInputs& inputs, std::string_view user, double q_req,
                                const std::optional<std::string>& task);

} // namespace veritas
