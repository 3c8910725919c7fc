#include "veritas/config.hpp"

#include "veritas/artifacts.hpp"
#include "veritas/errors.hpp"
#include "veritas/seeding.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

namespace veritas {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& field, const std::string& what) {
    throw InputError("config field \"" + field + "\": " + what);
}

// Walks one JSON object, rejecting keys nobody asked for.
class Section {
public:
    Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
    }

    void number(const char* key, double& out, double lo = -std::numeric_limits<double>::infinity(),
                double hi = std::numeric_limits<double>::infinity()) {
        if (const json* v = take(key)) {
            if (!v->is_number()) fail(name(key), "expected a number");
            const double x = v->get<double>();
            if (!std::isfinite(x) || x < lo || x > hi) fail(name(key), "out of range [" + fmt(lo) + ", " + fmt(hi) + "]");
            out = x;
        }
    }

    template <class Int>
    void integer(const char* key, Int& out, long long lo, long long hi = std::numeric_limits<long long>::max()) {
        if (const json* v = take(key)) {
            if (!v->is_number_integer()) fail(name(key), "expected an integer");
            const long long x = v->get<long long>();
            if (x < lo || x > hi) fail(name(key), "must be at least " + std::to_string(lo));
            out = static_cast<Int>(x);
        }
    }

    void seed(const char* key, std::uint64_t& out) {
        if (const json* v = take(key)) {
            if (!v->is_number_unsigned()) fail(name(key), "expected a non-negative integer");
            out = v->get<std::uint64_t>();
        }
    }

    void boolean(const char* key, bool& out) {
        if (const json* v = take(key)) {
            if (!v->is_boolean()) fail(name(key), "expected true or false");
            out = v->get<bool>();
        }
    }

    template <class T, class Parse>
    void choice(const char* key, T& out, Parse&& parse) {
        if (const json* v = take(key)) {
            if (!v->is_string()) fail(name(key), "expected a string");
            try {
                out = parse(v->get<std::string>());
            } catch (const InputError& e) {
                fail(name(key), e.what());
            }
        }
    }

    void section(const char* key, const std::function<void(Section&)>& body) {
        if (const json* v = take(key)) {
            Section child(*v, name(key));
            body(child);
            child.finish();
        }
    }

    const json* take(const char* key) {
        seen_.insert(key);
        auto it = node_.find(key);
        return it == node_.end() ? nullptr : &*it;
    }

    std::string name(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const {
        for (auto it = node_.begin(); it != node_.end(); ++it) {
            if (!seen_.count(it.key())) fail(name(it.key().c_str()), "unknown field");
        }
    }

private:
    static std::string fmt(double x) {
        std::ostringstream os;
        os << x;
        return os.str();
    }

    const json& node_;
    std::string path_;
    std::set<std::string> seen_;
};

json parse_json(std::string_view text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw InputError(std::string("config is not valid JSON: ") + e.what());
    }
}

void read_engine(Section& s, EngineConfig& e) {
    s.choice("variant", e.variant, [](const std::string& v) { return parse_variant(v); });
    s.number("alpha", e.alpha, 0.0);
    s.integer("max_iters", e.max_iters, 1);
    s.number("tol", e.tol, 0.0);
    s.number("loss_floor", e.loss_floor, std::numeric_limits<double>::min());
}

void read_mf(Section& s, MfConfig& m) {
    s.integer("k", m.k, 1);
    s.number("lambda1", m.lambda1, 0.0);
    s.number("lambda2", m.lambda2, 0.0);
    s.number("beta", m.beta, std::numeric_limits<double>::min());
    s.integer("max_iters", m.max_iters, 1);
    s.number("tol", m.tol, 0.0);
}

json engine_json(const EngineConfig& e) {
    return {{"variant", std::string(to_string(e.variant))},
            {"alpha", e.alpha},
            {"max_iters", e.max_iters},
            {"tol", e.tol},
            {"loss_floor", e.loss_floor}};
}

json mf_json(const MfConfig& m) {
    return {{"k", m.k}, {"lambda1", m.lambda1}, {"lambda2", m.lambda2},
            {"beta", m.beta}, {"max_iters", m.max_iters}, {"tol", m.tol}};
}

} // namespace

std::uint64_t RunConfig::completion_seed() const { return derive_seed(seed, {stream_id("completion")}); }
std::uint64_t RunConfig::preference_seed() const { return derive_seed(seed, {stream_id("preference")}); }
std::uint64_t RunConfig::sampling_seed() const { return derive_seed(seed, {stream_id("known-truths")}); }

RunConfig parse_run_config(std::string_view text) {
    const json doc = parse_json(text);
    RunConfig c;
    Section root(doc, "");
    root.seed("seed", c.seed);
    root.section("engine", [&](Section& s) { read_engine(s, c.engine); });
    root.section("completion", [&](Section& s) { read_mf(s, c.completion); });
    root.section("preference", [&](Section& s) {
        s.number("eta", c.preference.eta, 0.0, 1.0);
        s.section("selection", [&](Section& sel) {
            sel.integer("min_events", c.preference.selection.min_events, 0);
            sel.number("l2", c.preference.selection.l2, 0.0);
            sel.integer("epochs", c.preference.selection.epochs, 1);
            sel.number("tol", c.preference.selection.tol, 0.0);
        });
        s.section("mf", [&](Section& m) { read_mf(m, c.preference.mf); });
    });
    root.section("recommend", [&](Section& s) {
        s.number("gamma", c.gamma, 0.0, 1.0);
        s.integer("k", c.top_k, 1);
        s.choice("strategy", c.strategy, [](const std::string& v) { return parse_strategy(v); });
        s.boolean("category_preference", c.category_preference);
    });
    root.section("known_truths", [&](Section& s) {
        s.number("ratio", c.known_truth_ratio, 0.0, 1.0);
        s.choice("strategy", c.known_truth_strategy,
                 [](const std::string& v) { return parse_known_truth_strategy(v); });
    });
    root.finish();
    c.completion.seed = c.completion_seed();
    c.preference.mf.seed = c.preference_seed();
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) { return parse_run_config(read_text_file(path)); }

std::string run_config_to_json(const RunConfig& c) {
    json doc{{"seed", c.seed},
             {"engine", engine_json(c.engine)},
             {"completion", mf_json(c.completion)},
             {"preference",
              {{"eta", c.preference.eta},
               {"selection",
                {{"min_events", c.preference.selection.min_events},
                 {"l2", c.preference.selection.l2},
                 {"epochs", c.preference.selection.epochs},
                 {"tol", c.preference.selection.tol}}},
               {"mf", mf_json(c.preference.mf)}}},
             {"recommend",
              {{"gamma", c.gamma},
               {"k", c.top_k},
               {"strategy", std::string(to_string(c.strategy))},
               {"category_preference", c.category_preference}}},
             {"known_truths",
              {{"ratio", c.known_truth_ratio}, {"strategy", std::string(to_string(c.known_truth_strategy))}}}};
    return doc.dump(2);
}

SimulationPlan parse_simulation_plan(std::string_view text) {
    const json doc = parse_json(text);
    SimulationPlan plan;
    SimConfig& s = plan.sim;
    Section root(doc, "");
    root.seed("seed", s.seed);
    root.integer("n_users", s.n_users, 1);
    root.integer("n_tasks", s.n_tasks, 1);
    root.integer("n_categories", s.n_categories, 1);
    root.number("selection_rate", s.selection_rate, 0.0, 1.0);
    if (const json* v = root.take("truth_range")) {
        if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number()) {
            fail("truth_range", "expected [low, high]");
        }
        s.truth_low = (*v)[0].get<double>();
        s.truth_high = (*v)[1].get<double>();
        if (!(s.truth_low < s.truth_high)) fail("truth_range", "needs low < high");
    }
    root.choice("setting", s.setting, [](const std::string& v) { return parse_setting(v); });
    root.number("known_truth_ratio", s.known_truth_ratio, 0.0, 1.0);
    root.number("failure_threshold", s.failure_threshold, 0.0, 1.0);
    root.number("failure_prob", s.failure_prob, 0.0, 1.0);
    root.number("min_reliability", s.min_reliability, std::numeric_limits<double>::min());
    root.number("reliability_sd", s.reliability_sd, 0.0);
    root.choice("data_type", s.data_type, [](const std::string& v) {
        if (v == "continuous") return DataType::Continuous;
        if (v == "categorical") return DataType::Categorical;
        throw InputError("expected continuous or categorical");
    });
    root.integer("label_count", s.label_count, 2);
    root.integer("repetitions", s.repetitions, 1);
    root.section("engine", [&](Section& e) { read_engine(e, s.engine); });
    root.choice("sweep", plan.sweep, [](const std::string& v) { return parse_sweep_axis(v); });
    if (const json* v = root.take("sweep_values")) {
        if (!v->is_array()) fail("sweep_values", "expected an array of numbers");
        for (const auto& x : *v) {
            if (!x.is_number()) fail("sweep_values", "expected an array of numbers");
            plan.sweep_values.push_back(x.get<double>());
        }
    }
    if (const json* v = root.take("algorithms")) {
        if (!v->is_array() || v->empty()) fail("algorithms", "expected a non-empty array of names");
        plan.algorithms.clear();
        for (const auto& x : *v) {
            if (!x.is_string()) fail("algorithms", "expected a non-empty array of names");
            try {
                plan.algorithms.push_back(parse_algorithm(x.get<std::string>()));
            } catch (const InputError& e) {
                fail("algorithms", e.what());
            }
        }
    }
    root.finish();
    s.validate();
    return plan;
}

SimulationPlan load_simulation_plan(const std::filesystem::path& path) {
    return parse_simulation_plan(read_text_file(path));
}

std::string simulation_plan_to_json(const SimulationPlan& plan) {
    const SimConfig& s = plan.sim;
    json algorithms = json::array();
    for (Algorithm a : plan.algorithms) algorithms.push_back(algorithm_name(a, s.data_type));
    json doc{{"seed", s.seed},
             {"n_users", s.n_users},
             {"n_tasks", s.n_tasks},
             {"n_categories", s.n_categories},
             {"selection_rate", s.selection_rate},
             {"truth_range", {s.truth_low, s.truth_high}},
             {"setting", std::string(to_string(s.setting))},
             {"known_truth_ratio", s.known_truth_ratio},
             {"failure_threshold", s.failure_threshold},
             {"failure_prob", s.failure_prob},
             {"min_reliability", s.min_reliability},
             {"reliability_sd", s.reliability_sd},
             {"data_type", std::string(to_string(s.data_type))},
             {"label_count", s.label_count},
             {"repetitions", s.repetitions},
             {"engine", engine_json(s.engine)},
             {"sweep", std::string(to_string(plan.sweep))},
             {"sweep_values", plan.sweep_values},
             {"algorithms", algorithms}};
    return doc.dump(2);
}

} // namespace veritas
