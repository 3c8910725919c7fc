#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "veritas/dataset.hpp"
#include "veritas/profile.hpp"

namespace veritas {

enum class Variant { BA, E1, E2 };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);

struct EngineConfig {
    Variant variant = Variant::E2;
    double alpha = 1.0;        // weight of the known-truth residual (E2 only)
    int max_iters = 100;
    double tol = 1e-6;         // on max |delta q| between iterations
    double loss_floor = 1e-12; // lower clamp for per-user total loss
    bool record_trace = false;
    bool record_states = false; // also keep q and truth vectors per iteration
};

// g(r) = 1 - ln r for a completion ratio r in (0, 1].
double penalty(double completion_ratio);

// Squared distance for continuous data, 0/1 distance for labels.
double loss(const Value& x, const Value& truth);

namespace kernels {

// sum(w .* x) / sum(w)
template <class X, class W>
double weighted_mean(const Eigen::DenseBase<X>& x, const Eigen::DenseBase<W>& w) {
    return (x.derived().array() * w.derived().array()).sum() / w.derived().array().sum();
}

// Label with the largest summed weight; ties go to the lexicographically
// smallest label.
std::string weighted_plurality(const std::vector<std::string>& labels, const Eigen::Ref<const Eigen::VectorXd>& weights);

// Minimizer of sum_i q_i g_i T_i subject to sum_i exp(-q_i g_i) = 1:
//   q_i = ln(sum_k T_k / T_i) / g_i, with T clamped below by `floor`.
Eigen::VectorXd closed_form_reliability(const Eigen::Ref<const Eigen::VectorXd>& total_loss,
                                        const Eigen::Ref<const Eigen::VectorXd>& g, double floor);

// sum_i exp(-q_i g_i)
template <class Q, class G>
double constraint_mass(const Eigen::DenseBase<Q>& q, const Eigen::DenseBase<G>& g) {
    return (-(q.derived().array() * g.derived().array())).exp().sum();
}

} // namespace kernels

// One category's estimation problem in index form.
//
// Participants are the users the engine estimates a reliability for: under E2
// everyone with an observation on the category's unknown- or known-truth
// tasks; under BA/E1 only users with observations on unknown-truth tasks
// (known-truth data carry no weight there).
struct CategoryProblem {
    struct Entry {
        Eigen::Index participant;
        std::size_t observation; // index into Dataset::observations()
    };

    std::size_t category = 0;
    Variant variant = Variant::E2;
    double alpha = 0.0; // effective; zero unless E2
    std::vector<std::size_t> participants;
    std::vector<bool> supervised;  // member of N_c^o
    Eigen::VectorXd g;
    Eigen::VectorXd supervised_loss; // epsilon_i
    std::vector<std::size_t> tasks;  // unknown-truth tasks with >= 1 observation
    std::vector<std::vector<Entry>> entries;

    Eigen::Index size() const { return static_cast<Eigen::Index>(participants.size()); }
    std::size_t supervised_count() const;
};

CategoryProblem build_problem(const Dataset& dataset, std::size_t category, const EngineConfig& config);

struct TruthUpdate {
    std::vector<Value> truths;          // aligned with problem.tasks
    std::vector<std::size_t> flagged;   // positions with zero total weight
};

// Index-level BCD steps.
Eigen::VectorXd initialize_reliability(const Dataset& dataset, const CategoryProblem& problem,
                                       const EngineConfig& config);
TruthUpdate update_truths(const Dataset& dataset, const CategoryProblem& problem, const Eigen::VectorXd& q);
// Per-participant sum_j y L(x, truth) + alpha * epsilon (unclamped).
Eigen::VectorXd total_losses(const Dataset& dataset, const CategoryProblem& problem,
                             const std::vector<Value>& truths);
Eigen::VectorXd estimate_reliability(const Dataset& dataset, const CategoryProblem& problem,
                                     const std::vector<Value>& truths, const EngineConfig& config);
double objective(const Dataset& dataset, const CategoryProblem& problem, const Eigen::VectorXd& q,
                 const std::vector<Value>& truths);

// Id-level entry points.
double supervised_residual(const Dataset& dataset, std::string_view user, std::string_view category);
std::map<std::string, double> initialize_reliability(const Dataset& dataset, std::string_view category,
                                                     const EngineConfig& config);
TruthMap update_truths(const Dataset& dataset, std::string_view category,
                       const std::map<std::string, double>& reliabilities, const EngineConfig& config);
std::map<std::string, double> estimate_reliability(const Dataset& dataset, std::string_view category,
                                                   const TruthMap& truths, const EngineConfig& config);

struct IterationTrace {
    double objective_after_truths = 0.0;
    double objective = 0.0;       // after the reliability step
    double constraint_mass = 0.0; // pre-normalization
    double max_delta = 0.0;
    Eigen::VectorXd q_before;     // record_states only
    Eigen::VectorXd q_after;
    std::vector<Value> truths;
};

struct CategoryEstimate {
    std::string category;
    std::vector<std::string> participants;
    std::map<std::string, double> reliabilities;     // normalized by ln |N_c|
    std::map<std::string, double> raw_reliabilities; // as produced by the last step
    TruthMap truths;
    int iterations = 0;
    double final_objective = 0.0;
    bool converged = false;
    bool normalized = true;
    std::vector<std::string> flagged_tasks;
    std::vector<std::string> warnings;
    std::vector<IterationTrace> trace;
};

CategoryEstimate run_category(const Dataset& dataset, std::size_t category, const EngineConfig& config);
CategoryEstimate run_category(const Dataset& dataset, std::string_view category, const EngineConfig& config);

struct ProfileResult {
    ReliabilityProfile profile;
    TruthMap truths;
    std::vector<CategoryEstimate> categories;
};

// Runs every category (in parallel, see parallel.hpp) and assembles Q.
ProfileResult profile_all(const Dataset& dataset, const EngineConfig& config);

} // namespace veritas
