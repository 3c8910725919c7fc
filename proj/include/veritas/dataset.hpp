#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace veritas {

enum class DataType { Continuous, Categorical };

// A sensing datum: a real number in task-native units or a categorical label.
using Value = std::variant<double, std::string>;
using Attribute = std::variant<double, std::string>;
using TruthMap = std::map<std::string, Value>;

inline bool is_continuous(const Value& v) { return std::holds_alternative<double>(v); }
inline double as_real(const Value& v) { return std::get<double>(v); }
inline const std::string& as_label(const Value& v) { return std::get<std::string>(v); }
inline DataType type_of(const Value& v) {
    return is_continuous(v) ? DataType::Continuous : DataType::Categorical;
}

std::string to_string(const Value& v);
std::string_view to_string(DataType t);

enum class Action { Browsed, Selected, Completed };

struct Task {
    std::string id;
    std::string category;
    DataType type = DataType::Continuous;
    std::optional<Value> known_truth;
    std::map<std::string, Attribute> attributes;
};

struct Observation {
    std::string user;
    std::string task;
    Value value;
};

struct Event {
    std::string user;
    std::string task;
    Action action = Action::Browsed;
};

struct EventFlags {
    bool browsed = false;
    bool selected = false;
    bool completed = false;
};

struct ContributorSets {
    std::vector<std::string> contributors;        // N_c
    std::vector<std::string> known_contributors;  // N_c^o
};

// Validated, immutable crowdsensing dataset.
//
// Users, tasks and categories are held in lexicographic id order; every index
// handed out by the accessors refers to that order. Observations are sorted by
// (task, user) so that the observations of one task form a contiguous span.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::vector<std::string> users, std::vector<Task> tasks,
            std::vector<Observation> observations, std::vector<Event> events);

    const std::vector<std::string>& users() const { return users_; }
    const std::vector<Task>& tasks() const { return tasks_; }
    const std::vector<std::string>& categories() const { return categories_; }
    const std::vector<Observation>& observations() const { return observations_; }
    const std::vector<Event>& events() const { return events_; }

    std::optional<std::size_t> user_index(std::string_view id) const;
    std::optional<std::size_t> task_index(std::string_view id) const;
    std::optional<std::size_t> category_index(std::string_view id) const;

    // Throws DomainError naming the id.
    std::size_t require_user(std::string_view id) const;
    std::size_t require_task(std::string_view id) const;
    std::size_t require_category(std::string_view id) const;

    std::size_t task_category(std::size_t task) const { return task_category_[task]; }

    // Observation k belongs to (observation_user(k), observation_task(k)).
    std::size_t observation_user(std::size_t k) const { return obs_user_[k]; }
    std::size_t observation_task(std::size_t k) const { return obs_task_[k]; }
    // Half-open range of observation indices for a task.
    std::pair<std::size_t, std::size_t> task_observation_range(std::size_t task) const {
        return {task_obs_offset_[task], task_obs_offset_[task + 1]};
    }
    std::span<const Observation> task_observations(std::size_t task) const;

    // S_c: tasks of the category whose truth is unknown. O_c: known-truth tasks.
    const std::vector<std::size_t>& unknown_tasks(std::size_t category) const {
        return unknown_tasks_[category];
    }
    const std::vector<std::size_t>& known_tasks(std::size_t category) const {
        return known_tasks_[category];
    }

    std::size_t selected_count(std::size_t user, std::size_t category) const;
    std::size_t completed_count(std::size_t user, std::size_t category) const;
    std::optional<double> completion_ratio(std::size_t user, std::size_t category) const;
    std::optional<double> completion_ratio(std::string_view user, std::string_view category) const;

    ContributorSets contributor_sets(std::string_view category) const;

    EventFlags event_flags(std::size_t user, std::size_t task) const;
    // All (user, task) pairs with at least one event, ordered by (user, task).
    const std::map<std::pair<std::size_t, std::size_t>, EventFlags>& event_table() const {
        return event_table_;
    }

    // Record lines are used only to decorate validation errors.
    struct SourceLines {
        std::vector<int> users, tasks, observations, events;
    };
    Dataset(std::vector<std::string> users, std::vector<Task> tasks,
            std::vector<Observation> observations, std::vector<Event> events,
            const SourceLines& lines);

private:
    void build(const SourceLines& lines);

    std::vector<std::string> users_;
    std::vector<Task> tasks_;
    std::vector<std::string> categories_;
    std::vector<Observation> observations_;
    std::vector<Event> events_;

    std::map<std::string, std::size_t, std::less<>> user_lookup_;
    std::map<std::string, std::size_t, std::less<>> task_lookup_;
    std::map<std::string, std::size_t, std::less<>> category_lookup_;

    std::vector<std::size_t> task_category_;
    std::vector<std::size_t> obs_user_;
    std::vector<std::size_t> obs_task_;
    std::vector<std::size_t> task_obs_offset_;
    std::vector<std::vector<std::size_t>> unknown_tasks_;
    std::vector<std::vector<std::size_t>> known_tasks_;
    // user-major [user * C + category]
    std::vector<std::size_t> selected_;
    std::vector<std::size_t> completed_;
    std::map<std::pair<std::size_t, std::size_t>, EventFlags> event_table_;
};

Dataset parse_dataset(std::string_view json_text);
Dataset load_dataset(const std::string& path);
std::string dataset_to_json(const Dataset& dataset);
void save_dataset(const Dataset& dataset, const std::string& path);

// Evaluation file: a JSON object mapping task id to its true value.
TruthMap parse_truths(std::string_view json_text);
TruthMap load_truths(const std::string& path);
std::string truths_to_json(const TruthMap& truths);

// Copy of `dataset` in which the listed tasks carry their known truth.
Dataset with_known_truths(const Dataset& dataset, const TruthMap& truths);

} // namespace veritas
