#include "veritas/baselines.hpp"

#include "veritas/errors.hpp"

namespace veritas {

std::map<std::string, double> average_truth(const Dataset& ds, std::string_view category) {
    std::map<std::string, double> out;
    for (std::size_t t : ds.unknown_tasks(ds.require_category(category))) {
        const Task& task = ds.tasks()[t];
        if (task.type != DataType::Continuous) {
            throw InputError("average_truth: task \"" + task.id + "\" is categorical");
        }
        const auto span = ds.task_observations(t);
        if (span.empty()) continue;
        double sum = 0.0;
        for (const Observation& o : span) sum += as_real(o.value);
        out.emplace(task.id, sum / static_cast<double>(span.size()));
    }
    return out;
}

std::map<std::string, std::string> majority_vote(const Dataset& ds, std::string_view category) {
    std::map<std::string, std::string> out;
    for (std::size_t t : ds.unknown_tasks(ds.require_category(category))) {
        const Task& task = ds.tasks()[t];
        if (task.type != DataType::Categorical) {
            throw InputError("majority_vote: task \"" + task.id + "\" is continuous");
        }
        const auto span = ds.task_observations(t);
        if (span.empty()) continue;
        std::map<std::string_view, std::size_t> counts;
        for (const Observation& o : span) ++counts[as_label(o.value)];
        auto best = counts.begin();
        for (auto it = counts.begin(); it != counts.end(); ++it) {
            if (it->second > best->second) best = it;
        }
        out.emplace(task.id, std::string(best->first));
    }
    return out;
}

TruthMap unweighted_truths(const Dataset& ds) {
    TruthMap out;
    for (std::size_t c = 0; c < ds.categories().size(); ++c) {
        for (std::size_t t : ds.unknown_tasks(c)) {
            const auto span = ds.task_observations(t);
            if (span.empty()) continue;
            if (ds.tasks()[t].type == DataType::Continuous) {
                double sum = 0.0;
                for (const Observation& o : span) sum += as_real(o.value);
                out.emplace(ds.tasks()[t].id, sum / static_cast<double>(span.size()));
            } else {
                std::map<std::string_view, std::size_t> counts;
                for (const Observation& o : span) ++counts[as_label(o.value)];
                auto best = counts.begin();
                for (auto it = counts.begin(); it != counts.end(); ++it) {
                    if (it->second > best->second) best = it;
                }
                out.emplace(ds.tasks()[t].id, std::string(best->first));
            }
        }
    }
    return out;
}

Dataset pool_categories(const Dataset& ds, const std::string& category) {
    std::vector<Task> tasks = ds.tasks();
    for (Task& t : tasks) t.category = category;
    return Dataset(ds.users(), std::move(tasks), ds.observations(), ds.events());
}

SingleReliabilityResult single_reliability_discovery(const Dataset& ds, const EngineConfig& base) {
    if (ds.observations().empty()) throw InputError("single_reliability_discovery: dataset has no observations");
    EngineConfig config = base;
    config.variant = Variant::BA;
    config.alpha = 0.0;
    const Dataset pooled = pool_categories(ds);
    SingleReliabilityResult out;
    out.estimate = run_category(pooled, std::size_t{0}, config);
    out.reliabilities = out.estimate.reliabilities;
    out.truths = out.estimate.truths;
    return out;
}

} // namespace veritas
