#include "veritas/recommender.hpp"

#include "veritas/errors.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace veritas {

std::string_view to_string(Strategy s) {
    switch (s) {
    case Strategy::Linear: return "linear";
    case Strategy::Product: return "product";
    case Strategy::Constrained: return "constrained";
    }
    return "linear";
}

Strategy parse_strategy(std::string_view s) {
    if (s == "linear") return Strategy::Linear;
    if (s == "product") return Strategy::Product;
    if (s == "constrained") return Strategy::Constrained;
    throw InputError("unknown strategy \"" + std::string(s) + "\" (expected linear, product or constrained)");
}

double score(double p, double q, double gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw InputError("gamma must lie in [0, 1], got " + std::to_string(gamma));
    return gamma * p + (1.0 - gamma) * q;
}

double product_score(double p, double q) { return p * q; }

Eigen::Index ScoringInputs::require_user(std::string_view id) const {
    auto it = std::lower_bound(users.begin(), users.end(), id);
    if (it == users.end() || *it != id) throw DomainError("unknown user \"" + std::string(id) + "\"");
    return static_cast<Eigen::Index>(it - users.begin());
}

ScoringInputs join_profiles(const PreferenceProfile& pref, const ReliabilityProfile& rel,
                            const std::map<std::string, std::string>& task_category,
                            const std::map<std::string, std::set<std::string>>& completed, bool category_preference) {
    ScoringInputs in;
    in.users = pref.users;
    in.tasks = pref.tasks;
    const auto n = static_cast<Eigen::Index>(in.users.size());
    const auto t = static_cast<Eigen::Index>(in.tasks.size());
    in.preference = pref.p;
    in.reliability = Eigen::MatrixXd::Zero(n, t);

    std::vector<Eigen::Index> cat_of(static_cast<std::size_t>(t));
    for (Eigen::Index j = 0; j < t; ++j) {
        auto it = task_category.find(in.tasks[j]);
        if (it == task_category.end()) throw InputError("no category for task \"" + in.tasks[j] + "\"");
        auto c = rel.category_index(it->second);
        if (!c) throw InputError("reliability profile lacks category \"" + it->second + "\"");
        cat_of[j] = *c;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        auto r = rel.user_index(in.users[i]);
        if (!r) throw InputError("reliability profile lacks user \"" + in.users[i] + "\"");
        for (Eigen::Index j = 0; j < t; ++j) {
            if (rel.provenance(*r, cat_of[j]) == Provenance::Missing) {
                throw InputError("reliability for (" + in.users[i] + ", " + rel.categories()[cat_of[j]] +
                                 ") is missing; run completion first");
            }
            in.reliability(i, j) = rel.value(*r, cat_of[j]);
        }
    }
    if (category_preference) {
        const auto n_cat = rel.cols();
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(n, n_cat);
        Eigen::VectorXd counts = Eigen::VectorXd::Zero(n_cat);
        for (Eigen::Index j = 0; j < t; ++j) {
            sums.col(cat_of[j]) += pref.p.col(j);
            counts(cat_of[j]) += 1.0;
        }
        for (Eigen::Index j = 0; j < t; ++j) in.preference.col(j) = sums.col(cat_of[j]) / counts(cat_of[j]);
    }
    in.completed.resize(in.users.size());
    for (std::size_t i = 0; i < in.users.size(); ++i) {
        if (auto it = completed.find(in.users[i]); it != completed.end()) in.completed[i] = it->second;
    }
    return in;
}

Recommendation top_k(const ScoringInputs& in, std::string_view user, std::size_t k, double gamma, Strategy strategy,
                     const std::optional<std::set<std::string>>& exclusions) {
    if (k < 1) throw InputError("k must be at least 1");
    if (strategy == Strategy::Constrained) {
        throw InputError("top_k does not rank under the constrained strategy; use constrained_recommend");
    }
    const Eigen::Index i = in.require_user(user);
    const std::set<std::string>& skip = exclusions ? *exclusions : in.completed[static_cast<std::size_t>(i)];
    std::vector<std::pair<std::string, double>> scored;
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(in.tasks.size()); ++j) {
        if (skip.count(in.tasks[j])) continue;
        const double p = in.preference(i, j);
        const double q = in.reliability(i, j);
        scored.emplace_back(in.tasks[j], strategy == Strategy::Linear ? score(p, q, gamma) : product_score(p, q));
    }
    const std::size_t take = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
                      [](const auto& a, const auto& b) {
                          return a.second != b.second ? a.second > b.second : a.first < b.first;
                      });
    scored.resize(take);
    Recommendation rec;
    rec.user = std::string(user);
    rec.ranked = std::move(scored);
    rec.truncated = take < k;
    return rec;
}

std::optional<std::string> constrained_recommend(const ScoringInputs& in, std::string_view user, double q_req,
                                                 const std::optional<std::set<std::string>>& exclusions) {
    if (!std::isfinite(q_req)) throw InputError("q_req must be finite");
    const Eigen::Index i = in.require_user(user);
    const std::set<std::string>& skip = exclusions ? *exclusions : in.completed[static_cast<std::size_t>(i)];
    std::optional<Eigen::Index> best;
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(in.tasks.size()); ++j) {
        if (skip.count(in.tasks[j]) || in.reliability(i, j) < q_req) continue;
        // Tasks are in id order, so strict > keeps the smaller id on ties.
        if (!best || in.preference(i, j) > in.preference(i, *best)) best = j;
    }
    if (!best) return std::nullopt;
    return in.tasks[*best];
}

std::string recommendation_to_json(const Recommendation& rec) {
    nlohmann::json doc;
    doc["user"] = rec.user;
    nlohmann::json list = nlohmann::json::array();
    for (const auto& [task, s] : rec.ranked) list.push_back({{"task", task}, {"score", s}});
    doc["recommendations"] = std::move(list);
    if (rec.truncated) doc["truncated"] = true;
    return doc.dump(2);
}

std::string constrained_to_json(const ScoringInputs& in, std::string_view user, double q_req,
                                const std::optional<std::string>& task) {
    nlohmann::json doc;
    doc["user"] = std::string(user);
    doc["q_req"] = q_req;
    if (!task) {
        doc["recommendation"] = nullptr;
    } else {
        const Eigen::Index i = in.require_user(user);
        const auto j = static_cast<Eigen::Index>(std::lower_bound(in.tasks.begin(), in.tasks.end(), *task) -
                                                 in.tasks.begin());
        doc["recommendation"] = {
            {"task", *task}, {"preference", in.preference(i, j)}, {"reliability", in.reliability(i, j)}};
    }
    return doc.dump(2);
}

} // namespace veritas
