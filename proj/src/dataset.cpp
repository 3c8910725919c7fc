#include "veritas/dataset.hpp"

#include "veritas/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

namespace veritas {

using json = nlohmann::json;

namespace {

using Kind = DatasetError::Kind;

int line_at(const std::vector<int>& lines, std::size_t k) {
    return k < lines.size() ? lines[k] : 0;
}

std::string in_quotes(std::string_view s) {
    return "\"" + std::string(s) + "\"";
}

void check_value(const Value& v, std::string_view where, int line) {
    if (is_continuous(v)) {
        if (!std::isfinite(as_real(v))) {
            throw DatasetError(Kind::Type, std::string(where) + ": continuous value is not finite", line);
        }
    } else if (as_label(v).empty()) {
        throw DatasetError(Kind::Type, std::string(where) + ": categorical label is empty", line);
    }
}

} // namespace

std::string to_string(const Value& v) {
    if (!is_continuous(v)) return as_label(v);
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), as_real(v));
    return std::string(buf, res.ptr);
}

std::string_view to_string(DataType t) {
    return t == DataType::Continuous ? "continuous" : "categorical";
}

Dataset::Dataset(std::vector<std::string> users, std::vector<Task> tasks,
                 std::vector<Observation> observations, std::vector<Event> events)
    : Dataset(std::move(users), std::move(tasks), std::move(observations), std::move(events),
              SourceLines{}) {}

Dataset::Dataset(std::vector<std::string> users, std::vector<Task> tasks,
                 std::vector<Observation> observations, std::vector<Event> events,
                 const SourceLines& lines)
    : users_(std::move(users)), tasks_(std::move(tasks)),
      observations_(std::move(observations)), events_(std::move(events)) {
    build(lines);
}

void Dataset::build(const SourceLines& lines) {
    for (std::size_t k = 0; k < users_.size(); ++k) {
        if (users_[k].empty()) {
            throw DatasetError(Kind::Parse, "users[" + std::to_string(k) + "]: empty user id",
                               line_at(lines.users, k));
        }
        if (!user_lookup_.emplace(users_[k], k).second) {
            throw DatasetError(Kind::Duplicate, "duplicate user id " + in_quotes(users_[k]),
                               line_at(lines.users, k));
        }
    }
    std::set<std::string> category_set;
    for (std::size_t k = 0; k < tasks_.size(); ++k) {
        const Task& t = tasks_[k];
        const int line = line_at(lines.tasks, k);
        if (t.id.empty()) {
            throw DatasetError(Kind::Parse, "tasks[" + std::to_string(k) + "]: empty task id", line);
        }
        if (t.category.empty()) {
            throw DatasetError(Kind::Parse, "task " + in_quotes(t.id) + ": empty category", line);
        }
        if (!task_lookup_.emplace(t.id, k).second) {
            throw DatasetError(Kind::Duplicate, "duplicate task id " + in_quotes(t.id), line);
        }
        if (t.known_truth) {
            if (type_of(*t.known_truth) != t.type) {
                throw DatasetError(Kind::Type,
                                   "task " + in_quotes(t.id) + ": known_truth does not match data_type " +
                                       std::string(to_string(t.type)),
                                   line);
            }
            check_value(*t.known_truth, "task " + in_quotes(t.id), line);
        }
        category_set.insert(t.category);
    }

    // Canonical lexicographic ordering; record-level checks above already ran
    // against source order.
    std::sort(users_.begin(), users_.end());
    user_lookup_.clear();
    for (std::size_t k = 0; k < users_.size(); ++k) user_lookup_.emplace(users_[k], k);
    std::sort(tasks_.begin(), tasks_.end(), [](const Task& a, const Task& b) { return a.id < b.id; });
    task_lookup_.clear();
    for (std::size_t k = 0; k < tasks_.size(); ++k) task_lookup_.emplace(tasks_[k].id, k);
    categories_.assign(category_set.begin(), category_set.end());
    for (std::size_t k = 0; k < categories_.size(); ++k) category_lookup_.emplace(categories_[k], k);

    const std::size_t n_users = users_.size();
    const std::size_t n_tasks = tasks_.size();
    const std::size_t n_cat = categories_.size();

    task_category_.resize(n_tasks);
    unknown_tasks_.assign(n_cat, {});
    known_tasks_.assign(n_cat, {});
    for (std::size_t t = 0; t < n_tasks; ++t) {
        const std::size_t c = category_lookup_.find(tasks_[t].category)->second;
        task_category_[t] = c;
        (tasks_[t].known_truth ? known_tasks_[c] : unknown_tasks_[c]).push_back(t);
    }

    // Observations.
    struct Keyed {
        std::size_t task, user, source;
    };
    std::vector<Keyed> keyed;
    keyed.reserve(observations_.size());
    for (std::size_t k = 0; k < observations_.size(); ++k) {
        const Observation& o = observations_[k];
        const int line = line_at(lines.observations, k);
        auto u = user_lookup_.find(o.user);
        if (u == user_lookup_.end()) {
            throw DatasetError(Kind::Reference, "observation references unknown user " + in_quotes(o.user), line);
        }
        auto t = task_lookup_.find(o.task);
        if (t == task_lookup_.end()) {
            throw DatasetError(Kind::Reference, "observation references unknown task " + in_quotes(o.task), line);
        }
        const Task& task = tasks_[t->second];
        if (type_of(o.value) != task.type) {
            throw DatasetError(Kind::Type,
                               "observation by " + in_quotes(o.user) + " on " + std::string(to_string(task.type)) +
                                   " task " + in_quotes(o.task) + " has a " +
                                   std::string(to_string(type_of(o.value))) + " value",
                               line);
        }
        check_value(o.value, "observation by " + in_quotes(o.user) + " on " + in_quotes(o.task), line);
        keyed.push_back({t->second, u->second, k});
    }
    std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
        return std::tie(a.task, a.user) < std::tie(b.task, b.user);
    });
    for (std::size_t k = 1; k < keyed.size(); ++k) {
        if (keyed[k].task == keyed[k - 1].task && keyed[k].user == keyed[k - 1].user) {
            const Observation& o = observations_[keyed[k].source];
            throw DatasetError(Kind::Duplicate,
                               "duplicate observation for user " + in_quotes(o.user) + " on task " + in_quotes(o.task),
                               line_at(lines.observations, std::max(keyed[k].source, keyed[k - 1].source)));
        }
    }
    std::vector<Observation> sorted_obs;
    sorted_obs.reserve(keyed.size());
    obs_user_.resize(keyed.size());
    obs_task_.resize(keyed.size());
    task_obs_offset_.assign(n_tasks + 1, 0);
    for (std::size_t k = 0; k < keyed.size(); ++k) {
        sorted_obs.push_back(std::move(observations_[keyed[k].source]));
        obs_user_[k] = keyed[k].user;
        obs_task_[k] = keyed[k].task;
        ++task_obs_offset_[keyed[k].task + 1];
    }
    for (std::size_t t = 0; t < n_tasks; ++t) task_obs_offset_[t + 1] += task_obs_offset_[t];
    observations_ = std::move(sorted_obs);

    // Events.
    std::vector<int> event_lines(events_.size());
    for (std::size_t k = 0; k < events_.size(); ++k) {
        const Event& e = events_[k];
        const int line = line_at(lines.events, k);
        event_lines[k] = line;
        auto u = user_lookup_.find(e.user);
        if (u == user_lookup_.end()) {
            throw DatasetError(Kind::Reference, "event references unknown user " + in_quotes(e.user), line);
        }
        auto t = task_lookup_.find(e.task);
        if (t == task_lookup_.end()) {
            throw DatasetError(Kind::Reference, "event references unknown task " + in_quotes(e.task), line);
        }
        EventFlags& f = event_table_[{u->second, t->second}];
        switch (e.action) {
        case Action::Browsed: f.browsed = true; break;
        case Action::Selected: f.selected = true; break;
        case Action::Completed: f.completed = true; break;
        }
    }
    for (const auto& [key, f] : event_table_) {
        const auto& [u, t] = key;
        if ((f.completed && !f.selected) || (f.selected && !f.browsed)) {
            int line = 0;
            for (std::size_t k = 0; k < events_.size(); ++k) {
                if (events_[k].user == users_[u] && events_[k].task == tasks_[t].id) {
                    line = event_lines[k];
                    break;
                }
            }
            throw DatasetError(Kind::Consistency,
                               std::string(f.completed && !f.selected ? "completed without selected"
                                                                      : "selected without browsed") +
                                   " for user " + in_quotes(users_[u]) + " on task " + in_quotes(tasks_[t].id),
                               line);
        }
    }
    std::stable_sort(events_.begin(), events_.end(), [](const Event& a, const Event& b) {
        return std::tie(a.user, a.task, a.action) < std::tie(b.user, b.task, b.action);
    });
    events_.erase(std::unique(events_.begin(), events_.end(),
                              [](const Event& a, const Event& b) {
                                  return a.user == b.user && a.task == b.task && a.action == b.action;
                              }),
                  events_.end());

    selected_.assign(n_users * n_cat, 0);
    completed_.assign(n_users * n_cat, 0);
    for (const auto& [key, f] : event_table_) {
        const std::size_t c = task_category_[key.second];
        if (f.selected) ++selected_[key.first * n_cat + c];
        if (f.completed) ++completed_[key.first * n_cat + c];
    }
}

std::optional<std::size_t> Dataset::user_index(std::string_view id) const {
    auto it = user_lookup_.find(id);
    if (it == user_lookup_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> Dataset::task_index(std::string_view id) const {
    auto it = task_lookup_.find(id);
    if (it == task_lookup_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> Dataset::category_index(std::string_view id) const {
    auto it = category_lookup_.find(id);
    if (it == category_lookup_.end()) return std::nullopt;
    return it->second;
}

std::size_t Dataset::require_user(std::string_view id) const {
    if (auto k = user_index(id)) return *k;
    throw DomainError("unknown user " + in_quotes(id));
}

std::size_t Dataset::require_task(std::string_view id) const {
    if (auto k = task_index(id)) return *k;
    throw DomainError("unknown task " + in_quotes(id));
}

std::size_t Dataset::require_category(std::string_view id) const {
    if (auto k = category_index(id)) return *k;
    throw DomainError("unknown category " + in_quotes(id));
}

std::span<const Observation> Dataset::task_observations(std::size_t task) const {
    const auto [begin, end] = task_observation_range(task);
    return std::span<const Observation>(observations_).subspan(begin, end - begin);
}

std::size_t Dataset::selected_count(std::size_t user, std::size_t category) const {
    return selected_[user * categories_.size() + category];
}

std::size_t Dataset::completed_count(std::size_t user, std::size_t category) const {
    return completed_[user * categories_.size() + category];
}

std::optional<double> Dataset::completion_ratio(std::size_t user, std::size_t category) const {
    const std::size_t sel = selected_count(user, category);
    const std::size_t done = completed_count(user, category);
    if (sel == 0 || done == 0) return std::nullopt;
    return static_cast<double>(done) / static_cast<double>(sel);
}

std::optional<double> Dataset::completion_ratio(std::string_view user, std::string_view category) const {
    return completion_ratio(require_user(user), require_category(category));
}

ContributorSets Dataset::contributor_sets(std::string_view category) const {
    const std::size_t c = require_category(category);
    std::vector<bool> any(users_.size(), false), known(users_.size(), false);
    for (std::size_t t : unknown_tasks_[c]) {
        for (std::size_t k = task_obs_offset_[t]; k < task_obs_offset_[t + 1]; ++k) any[obs_user_[k]] = true;
    }
    for (std::size_t t : known_tasks_[c]) {
        for (std::size_t k = task_obs_offset_[t]; k < task_obs_offset_[t + 1]; ++k) {
            any[obs_user_[k]] = true;
            known[obs_user_[k]] = true;
        }
    }
    ContributorSets sets;
    for (std::size_t u = 0; u < users_.size(); ++u) {
        if (any[u]) sets.contributors.push_back(users_[u]);
        if (known[u]) sets.known_contributors.push_back(users_[u]);
    }
    return sets;
}

EventFlags Dataset::event_flags(std::size_t user, std::size_t task) const {
    auto it = event_table_.find({user, task});
    return it == event_table_.end() ? EventFlags{} : it->second;
}

// ---------------------------------------------------------------------------
// JSON ingestion

namespace {

// Maps each element of the top-level arrays to the line it starts on. Runs on
// text that nlohmann has already accepted, so it only tracks strings and depth.
std::map<std::string, std::vector<int>> locate_records(std::string_view text) {
    std::map<std::string, std::vector<int>> out;
    int line = 1;
    int depth = 0;
    bool in_string = false;
    bool escape = false;
    std::string buffer;
    std::string last_key;
    std::string active;
    bool pending = false;
    for (char ch : text) {
        if (in_string) {
            if (escape) {
                escape = false;
            } else if (ch == '\\') {
                escape = true;
            } else if (ch == '"') {
                in_string = false;
                if (depth == 1) last_key = buffer;
            } else if (depth == 1) {
                buffer.push_back(ch);
            }
            if (ch == '\n') ++line;
            continue;
        }
        if (ch == '\n') {
            ++line;
            continue;
        }
        if (ch == ' ' || ch == '\t' || ch == '\r') continue;
        if (pending && depth == 2 && ch != ']') {
            out[active].push_back(line);
            pending = false;
        }
        switch (ch) {
        case '"':
            in_string = true;
            buffer.clear();
            break;
        case '{':
        case '[':
            ++depth;
            if (depth == 2 && ch == '[') {
                active = last_key;
                out[active];
                pending = true;
            }
            break;
        case '}':
        case ']':
            --depth;
            pending = false;
            break;
        case ',':
            if (depth == 2) pending = true;
            break;
        default:
            break;
        }
    }
    return out;
}

struct RecordContext {
    std::string where;
    int line;
};

[[noreturn]] void malformed(const RecordContext& ctx, const std::string& msg) {
    throw DatasetError(Kind::Parse, ctx.where + ": " + msg, ctx.line);
}

const json& field(const json& rec, const char* name, const RecordContext& ctx) {
    if (!rec.is_object()) malformed(ctx, "record is not an object");
    auto it = rec.find(name);
    if (it == rec.end()) malformed(ctx, std::string("missing field \"") + name + "\"");
    return *it;
}

std::string string_field(const json& rec, const char* name, const RecordContext& ctx) {
    const json& v = field(rec, name, ctx);
    if (!v.is_string()) malformed(ctx, std::string("field \"") + name + "\" must be a string");
    return v.get<std::string>();
}

Value value_of(const json& v, const RecordContext& ctx, const char* name) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) return v.get<std::string>();
    malformed(ctx, std::string("field \"") + name + "\" must be a number or a string");
}

const json& array_field(const json& doc, const char* name) {
    static const json empty = json::array();
    auto it = doc.find(name);
    if (it == doc.end() || it->is_null()) return empty;
    if (!it->is_array()) {
        throw DatasetError(Kind::Parse, std::string("top-level \"") + name + "\" must be an array");
    }
    return *it;
}

json parse_json(std::string_view text) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        int line = 1;
        const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
        for (std::size_t k = 0; k + 1 < upto; ++k) {
            if (text[k] == '\n') ++line;
        }
        throw DatasetError(Kind::Parse, std::string("invalid JSON: ") + e.what(), line);
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read file \"" + path + "\"");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json value_json(const Value& v) {
    if (is_continuous(v)) return as_real(v);
    return as_label(v);
}

std::string_view action_name(Action a) {
    switch (a) {
    case Action::Browsed: return "browsed";
    case Action::Selected: return "selected";
    case Action::Completed: return "completed";
    }
    return "browsed";
}

} // namespace

Dataset parse_dataset(std::string_view text) {
    const json doc = parse_json(text);
    if (!doc.is_object()) throw DatasetError(Kind::Parse, "dataset document must be a JSON object", 1);
    auto lines = locate_records(text);
    Dataset::SourceLines src{lines["users"], lines["tasks"], lines["observations"], lines["events"]};

    std::vector<std::string> users;
    const json& ju = array_field(doc, "users");
    for (std::size_t k = 0; k < ju.size(); ++k) {
        RecordContext ctx{"users[" + std::to_string(k) + "]", line_at(src.users, k)};
        if (ju[k].is_string()) {
            users.push_back(ju[k].get<std::string>());
        } else {
            users.push_back(string_field(ju[k], "id", ctx));
        }
    }

    std::vector<Task> tasks;
    const json& jt = array_field(doc, "tasks");
    for (std::size_t k = 0; k < jt.size(); ++k) {
        RecordContext ctx{"tasks[" + std::to_string(k) + "]", line_at(src.tasks, k)};
        Task t;
        t.id = string_field(jt[k], "id", ctx);
        t.category = string_field(jt[k], "category", ctx);
        const std::string type = string_field(jt[k], "data_type", ctx);
        if (type == "continuous") {
            t.type = DataType::Continuous;
        } else if (type == "categorical") {
            t.type = DataType::Categorical;
        } else {
            malformed(ctx, "data_type must be \"continuous\" or \"categorical\", got \"" + type + "\"");
        }
        if (auto it = jt[k].find("known_truth"); it != jt[k].end() && !it->is_null()) {
            t.known_truth = value_of(*it, ctx, "known_truth");
        }
        if (auto it = jt[k].find("attributes"); it != jt[k].end() && !it->is_null()) {
            if (!it->is_object()) malformed(ctx, "attributes must be an object");
            for (const auto& [name, v] : it->items()) {
                if (v.is_number()) {
                    t.attributes.emplace(name, v.get<double>());
                } else if (v.is_string()) {
                    t.attributes.emplace(name, v.get<std::string>());
                } else if (v.is_boolean()) {
                    t.attributes.emplace(name, v.get<bool>() ? 1.0 : 0.0);
                } else if (!v.is_null()) {
                    malformed(ctx, "attribute \"" + name + "\" must be a scalar or a label");
                }
            }
        }
        tasks.push_back(std::move(t));
    }

    std::vector<Observation> obs;
    const json& jo = array_field(doc, "observations");
    for (std::size_t k = 0; k < jo.size(); ++k) {
        RecordContext ctx{"observations[" + std::to_string(k) + "]", line_at(src.observations, k)};
        Observation o;
        o.user = string_field(jo[k], "user", ctx);
        o.task = string_field(jo[k], "task", ctx);
        o.value = value_of(field(jo[k], "value", ctx), ctx, "value");
        obs.push_back(std::move(o));
    }

    std::vector<Event> events;
    const json& je = array_field(doc, "events");
    for (std::size_t k = 0; k < je.size(); ++k) {
        RecordContext ctx{"events[" + std::to_string(k) + "]", line_at(src.events, k)};
        Event e;
        e.user = string_field(je[k], "user", ctx);
        e.task = string_field(je[k], "task", ctx);
        const std::string action = string_field(je[k], "action", ctx);
        if (action == "browsed") {
            e.action = Action::Browsed;
        } else if (action == "selected") {
            e.action = Action::Selected;
        } else if (action == "completed") {
            e.action = Action::Completed;
        } else {
            malformed(ctx, "unknown action \"" + action + "\"");
        }
        events.push_back(std::move(e));
    }

    return Dataset(std::move(users), std::move(tasks), std::move(obs), std::move(events), src);
}

Dataset load_dataset(const std::string& path) {
    return parse_dataset(read_file(path));
}

std::string dataset_to_json(const Dataset& ds) {
    json doc;
    doc["users"] = ds.users();
    json tasks = json::array();
    for (const Task& t : ds.tasks()) {
        json jt;
        jt["id"] = t.id;
        jt["category"] = t.category;
        jt["data_type"] = std::string(to_string(t.type));
        jt["known_truth"] = t.known_truth ? value_json(*t.known_truth) : json(nullptr);
        json attrs = json::object();
        for (const auto& [name, a] : t.attributes) attrs[name] = value_json(a);
        jt["attributes"] = std::move(attrs);
        tasks.push_back(std::move(jt));
    }
    doc["tasks"] = std::move(tasks);
    json obs = json::array();
    for (const Observation& o : ds.observations()) {
        obs.push_back({{"user", o.user}, {"task", o.task}, {"value", value_json(o.value)}});
    }
    doc["observations"] = std::move(obs);
    json events = json::array();
    for (const Event& e : ds.events()) {
        events.push_back({{"user", e.user}, {"task", e.task}, {"action", std::string(action_name(e.action))}});
    }
    doc["events"] = std::move(events);
    return doc.dump(1);
}

void save_dataset(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write file \"" + path + "\"");
    out << dataset_to_json(dataset) << '\n';
}

TruthMap parse_truths(std::string_view text) {
    const json doc = parse_json(text);
    if (!doc.is_object()) throw DatasetError(Kind::Parse, "truth file must be a JSON object", 1);
    TruthMap truths;
    for (const auto& [task, v] : doc.items()) {
        RecordContext ctx{"truth for task \"" + task + "\"", 0};
        Value value = value_of(v, ctx, "value");
        check_value(value, ctx.where, 0);
        truths.emplace(task, std::move(value));
    }
    return truths;
}

TruthMap load_truths(const std::string& path) {
    return parse_truths(read_file(path));
}

std::string truths_to_json(const TruthMap& truths) {
    json doc = json::object();
    for (const auto& [task, v] : truths) doc[task] = value_json(v);
    return doc.dump(1);
}

Dataset with_known_truths(const Dataset& dataset, const TruthMap& truths) {
    std::vector<Task> tasks = dataset.tasks();
    for (const auto& [id, value] : truths) {
        const std::size_t t = dataset.require_task(id);
        tasks[t].known_truth = value;
    }
    return Dataset(dataset.users(), std::move(tasks), dataset.observations(), dataset.events());
}

} // namespace veritas
