#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "veritas/completion.hpp"
#include "veritas/dataset.hpp"

namespace veritas {

// Implicit-feedback matrix U: 1 for browsed and selected, 0.5 for browsed
// only, unobserved (mask 0) otherwise.
struct PreferenceMatrix {
    std::vector<std::string> users;
    std::vector<std::string> tasks;
    Eigen::MatrixXd values;
    Eigen::MatrixXd mask;

    std::optional<double> at(Eigen::Index user, Eigen::Index task) const {
        if (mask(user, task) == 0.0) return std::nullopt;
        return values(user, task);
    }
};

PreferenceMatrix build_preference_matrix(const Dataset& dataset);

// Task feature rows: category one-hot followed by min-max scaled numeric
// attributes (missing values imputed with the attribute mean).
struct TaskFeatures {
    std::vector<std::string> names;
    Eigen::MatrixXd matrix; // tasks x features, dataset task order
};

TaskFeatures encode_task_features(const Dataset& dataset);

struct SelectionConfig {
    std::size_t min_events = 5;
    double l2 = 1e-2;
    int epochs = 1000;
    double tol = 1e-10;
};

// Logistic selection-probability model P_i(j).
struct SelectionModel {
    Eigen::VectorXd weights;
    double bias = 0.0;
    bool global = false;            // pooled over all users
    std::optional<double> constant; // single-class training data
    std::vector<double> loss_trace;

    double predict(const Eigen::Ref<const Eigen::RowVectorXd>& features) const;
};

// Fits on rows of `features` with 0/1 `labels`. L2-penalized full-batch
// gradient descent with step 1/L, so the training loss never increases.
SelectionModel fit_logistic(const Eigen::MatrixXd& features, const Eigen::VectorXd& labels,
                            const SelectionConfig& config);

// Per-user model over the user's browsed tasks (label: selected). Users with
// fewer than min_events browsed tasks get the pooled global model. Throws
// InputError if the dataset has no browsed events at all.
SelectionModel train_selection_model(const Dataset& dataset, const TaskFeatures& features, std::string_view user,
                                     const SelectionConfig& config);
SelectionModel train_global_selection_model(const Dataset& dataset, const TaskFeatures& features,
                                            const SelectionConfig& config);

// Latent-factor completion of U. Observed entries pass through, predictions
// are clamped to [0, 1]; rows or columns without any observation get 0.5.
Eigen::MatrixXd collaborative_fill(const PreferenceMatrix& matrix, const MfConfig& config);

struct PreferenceProfile {
    std::vector<std::string> users;
    std::vector<std::string> tasks;
    Eigen::MatrixXd p; // users x tasks, values in [0, 1]
    double eta = 0.5;
};

// p = eta * P_i(j) + (1 - eta) * u_ij. `models` is indexed like dataset users.
PreferenceProfile hybrid_preference(const Dataset& dataset, double eta, const std::vector<SelectionModel>& models,
                                    const TaskFeatures& features, const Eigen::MatrixXd& filled);

struct PreferenceConfig {
    double eta = 0.5;
    SelectionConfig selection;
    MfConfig mf{3, 0.1, 0.1, 0.01, 5000, 1e-8, 0};
};

// Full pipeline: matrix, per-user classifiers, collaborative fill, blend.
// Datasets without any browsing events yield p = 0.5 everywhere.
PreferenceProfile profile_preferences(const Dataset& dataset, const PreferenceConfig& config);

} // namespace veritas
