#include "veritas/simulation.hpp"

#include "veritas/baselines.hpp"
#include "veritas/errors.hpp"
#include "veritas/metrics.hpp"
#include "veritas/parallel.hpp"
#include "veritas/seeding.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace veritas {

namespace {

std::string padded(char prefix, std::size_t i, std::size_t n) {
    std::string digits = std::to_string(i);
    std::size_t width = std::max<std::size_t>(3, std::to_string(n > 0 ? n - 1 : 0).size());
    if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
    return prefix + digits;
}

std::string label(std::size_t k) { return "L" + std::to_string(k); }

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void require(bool ok, const char* field, const std::string& what) {
    if (!ok) throw InputError(std::string("simulation config field \"") + field + "\": " + what);
}

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

// Uniform in [0, 1) from the top 53 bits; portable across standard libraries.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Box-Muller without caching, one normal per call.
double standard_normal(std::mt19937_64& rng) {
    double u1 = unit(rng);
    const double u2 = unit(rng);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(unit(rng) * static_cast<double>(n)));
}

} // namespace

std::string_view to_string(Setting s) {
    switch (s) {
    case Setting::S1: return "S1";
    case Setting::S2: return "S2";
    case Setting::S3: return "S3";
    }
    return "S1";
}

Setting parse_setting(std::string_view s) {
    if (s == "S1" || s == "s1") return Setting::S1;
    if (s == "S2" || s == "s2") return Setting::S2;
    if (s == "S3" || s == "s3") return Setting::S3;
    throw InputError("unknown setting \"" + std::string(s) + "\" (expected S1, S2 or S3)");
}

std::string_view to_string(UserGroup g) {
    switch (g) {
    case UserGroup::Reliable: return "reliable";
    case UserGroup::Normal: return "normal";
    case UserGroup::Unreliable: return "unreliable";
    }
    return "normal";
}

void SimConfig::validate() const {
    require(n_users >= 1, "n_users", "must be at least 1");
    require(n_tasks >= 1, "n_tasks", "must be at least 1");
    require(n_categories >= 1, "n_categories", "must be at least 1");
    require(in_unit(selection_rate), "selection_rate", "must lie in [0, 1]");
    require(std::isfinite(truth_low) && std::isfinite(truth_high) && truth_low < truth_high, "truth_range",
            "needs finite low < high");
    require(in_unit(known_truth_ratio), "known_truth_ratio", "must lie in [0, 1]");
    require(in_unit(failure_threshold), "failure_threshold", "must lie in [0, 1]");
    require(in_unit(failure_prob), "failure_prob", "must lie in [0, 1]");
    require(min_reliability > 0.0 && std::isfinite(min_reliability), "min_reliability", "must be positive");
    require(reliability_sd >= 0.0 && std::isfinite(reliability_sd), "reliability_sd", "must be >= 0");
    require(label_count >= 2, "label_count", "must be at least 2");
    require(repetitions >= 1, "repetitions", "must be at least 1");
}

TruthMap GroundTruthBundle::hidden_truths() const {
    TruthMap out;
    for (const auto& [task, v] : true_values) {
        if (!known_tasks.count(task)) out.emplace(task, v);
    }
    return out;
}

std::vector<UserGroup> assign_groups(const SimConfig& config) {
    double p_reliable = 1.0 / 3.0, p_normal = 1.0 / 3.0;
    switch (config.setting) {
    case Setting::S1: break;
    case Setting::S2: p_reliable = 0.6; p_normal = 0.3; break;
    case Setting::S3: p_reliable = 0.1; p_normal = 0.3; break;
    }
    std::vector<UserGroup> groups(config.n_users);
    for (std::size_t u = 0; u < config.n_users; ++u) {
        std::mt19937_64 rng(derive_seed(config.seed, {stream_id("group"), u}));
        const double x = unit(rng);
        groups[u] = x < p_reliable ? UserGroup::Reliable
                    : x < p_reliable + p_normal ? UserGroup::Normal
                                                : UserGroup::Unreliable;
    }
    return groups;
}

GroundTruthBundle draw_ground_truth(const SimConfig& config) {
    config.validate();
    GroundTruthBundle b;
    b.groups = assign_groups(config);
    for (std::size_t u = 0; u < config.n_users; ++u) b.users.push_back(padded('u', u, config.n_users));
    for (std::size_t c = 0; c < config.n_categories; ++c) b.categories.push_back(padded('c', c, config.n_categories));

    const auto n = static_cast<Eigen::Index>(config.n_users);
    const auto n_cat = static_cast<Eigen::Index>(config.n_categories);
    b.true_reliability.resize(n, n_cat);
    for (Eigen::Index u = 0; u < n; ++u) {
        std::mt19937_64 rng(derive_seed(config.seed, {stream_id("reliability"), static_cast<std::uint64_t>(u)}));
        const double mean = b.groups[static_cast<std::size_t>(u)] == UserGroup::Reliable ? 0.75
                            : b.groups[static_cast<std::size_t>(u)] == UserGroup::Normal ? 0.5
                                                                                          : 0.25;
        for (Eigen::Index c = 0; c < n_cat; ++c) {
            b.true_reliability(u, c) = std::max(config.min_reliability, mean + config.reliability_sd * standard_normal(rng));
        }
    }

    std::mt19937_64 task_rng(derive_seed(config.seed, {stream_id("task")}));
    b.task_category.resize(config.n_tasks);
    for (std::size_t j = 0; j < config.n_tasks; ++j) {
        b.tasks.push_back(padded('t', j, config.n_tasks));
        b.task_category[j] = uniform_index(task_rng, config.n_categories);
        const double x = unit(task_rng);
        if (config.data_type == DataType::Continuous) {
            b.true_values.emplace(b.tasks[j], config.truth_low + (config.truth_high - config.truth_low) * x);
        } else {
            b.true_values.emplace(b.tasks[j],
                                  label(std::min(config.label_count - 1,
                                                 static_cast<std::size_t>(x * static_cast<double>(config.label_count)))));
        }
    }

    // The first round(ratio * n) tasks of one fixed permutation, so known sets
    // nest as the ratio grows.
    std::mt19937_64 known_rng(derive_seed(config.seed, {stream_id("known")}));
    std::vector<std::size_t> order(config.n_tasks);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t j = order.size(); j > 1; --j) std::swap(order[j - 1], order[uniform_index(known_rng, j)]);
    const auto n_known = static_cast<std::size_t>(std::llround(config.known_truth_ratio * static_cast<double>(config.n_tasks)));
    for (std::size_t k = 0; k < n_known; ++k) b.known_tasks.insert(b.tasks[order[k]]);
    return b;
}

Dataset realize_dataset(const SimConfig& config, const GroundTruthBundle& truth) {
    config.validate();
    std::vector<Task> tasks;
    tasks.reserve(truth.tasks.size());
    for (std::size_t j = 0; j < truth.tasks.size(); ++j) {
        Task t;
        t.id = truth.tasks[j];
        t.category = truth.categories[truth.task_category[j]];
        t.type = config.data_type;
        if (truth.known_tasks.count(t.id)) t.known_truth = truth.true_values.at(t.id);
        tasks.push_back(std::move(t));
    }

    std::vector<Observation> observations;
    std::vector<Event> events;
    for (std::size_t u = 0; u < truth.users.size(); ++u) {
        std::mt19937_64 rng(derive_seed(config.seed, {stream_id("observe"), u}));
        const std::string& user = truth.users[u];
        for (std::size_t j = 0; j < truth.tasks.size(); ++j) {
            const double select = unit(rng);
            const double fail = unit(rng);
            const double z = standard_normal(rng);
            const double correct = unit(rng);
            const std::size_t wrong = uniform_index(rng, config.label_count - 1);
            if (select >= config.selection_rate) continue;

            const std::string& task = truth.tasks[j];
            events.push_back({user, task, Action::Browsed});
            events.push_back({user, task, Action::Selected});
            const double q = truth.true_reliability(static_cast<Eigen::Index>(u),
                                                    static_cast<Eigen::Index>(truth.task_category[j]));
            if (q < config.failure_threshold && fail < config.failure_prob) continue;
            events.push_back({user, task, Action::Completed});

            const Value& x = truth.true_values.at(task);
            if (config.data_type == DataType::Continuous) {
                observations.push_back({user, task, as_real(x) + std::sqrt(2.0 / q) * z});
            } else if (correct < std::min(1.0, q + 0.25)) {
                observations.push_back({user, task, x});
            } else {
                // Labels other than the truth, in order, indexed by `wrong`.
                const std::size_t t = static_cast<std::size_t>(std::stoul(as_label(x).substr(1)));
                observations.push_back({user, task, label(wrong < t ? wrong : wrong + 1)});
            }
        }
    }
    return Dataset(truth.users, std::move(tasks), std::move(observations), std::move(events));
}

std::pair<Dataset, GroundTruthBundle> generate_dataset(const SimConfig& config) {
    GroundTruthBundle truth = draw_ground_truth(config);
    Dataset ds = realize_dataset(config, truth);
    return {std::move(ds), std::move(truth)};
}

std::string ground_truth_to_json(const GroundTruthBundle& truth) {
    nlohmann::ordered_json doc;
    nlohmann::ordered_json users = nlohmann::ordered_json::array();
    for (std::size_t u = 0; u < truth.users.size(); ++u) {
        nlohmann::ordered_json rel = nlohmann::ordered_json::object();
        for (std::size_t c = 0; c < truth.categories.size(); ++c) {
            rel[truth.categories[c]] =
                truth.true_reliability(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(c));
        }
        users.push_back({{"id", truth.users[u]}, {"group", std::string(to_string(truth.groups[u]))}, {"reliability", rel}});
    }
    doc["users"] = std::move(users);
    nlohmann::ordered_json tasks = nlohmann::ordered_json::array();
    for (std::size_t j = 0; j < truth.tasks.size(); ++j) {
        const Value& v = truth.true_values.at(truth.tasks[j]);
        nlohmann::ordered_json t{{"id", truth.tasks[j]}, {"category", truth.categories[truth.task_category[j]]}};
        if (is_continuous(v)) t["truth"] = as_real(v);
        else t["truth"] = as_label(v);
        t["known"] = truth.known_tasks.count(truth.tasks[j]) > 0;
        tasks.push_back(std::move(t));
    }
    doc["tasks"] = std::move(tasks);
    return doc.dump(1);
}

std::string_view to_string(KnownTruthStrategy s) {
    switch (s) {
    case KnownTruthStrategy::Random: return "random";
    case KnownTruthStrategy::MaxVariance: return "max_variance";
    case KnownTruthStrategy::MostContributors: return "most_contributors";
    }
    return "random";
}

KnownTruthStrategy parse_known_truth_strategy(std::string_view s) {
    if (s == "random") return KnownTruthStrategy::Random;
    if (s == "max_variance") return KnownTruthStrategy::MaxVariance;
    if (s == "most_contributors") return KnownTruthStrategy::MostContributors;
    throw InputError("unknown known-truth strategy \"" + std::string(s) +
                     "\" (expected random, max_variance or most_contributors)");
}

std::set<std::string> sample_known_truths(const Dataset& ds, const TruthMap& truths, double ratio,
                                          KnownTruthStrategy strategy, std::uint64_t seed) {
    if (!in_unit(ratio)) throw InputError("known-truth ratio must lie in [0, 1]");
    std::set<std::string> chosen;
    for (std::size_t c = 0; c < ds.categories().size(); ++c) {
        const auto unknown = ds.unknown_tasks(c);
        // The epsilon keeps ratio * size from rounding up past an integer.
        const auto want = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(unknown.size()) - 1e-9));
        if (want == 0) continue;

        struct Candidate {
            std::size_t task;
            double key;
        };
        std::vector<Candidate> pool;
        for (std::size_t t : unknown) {
            if (!truths.count(ds.tasks()[t].id)) continue;
            const auto obs = ds.task_observations(t);
            double key = 0.0;
            if (strategy == KnownTruthStrategy::MostContributors) {
                key = static_cast<double>(obs.size());
            } else if (strategy == KnownTruthStrategy::MaxVariance && !obs.empty()) {
                if (ds.tasks()[t].type == DataType::Continuous) {
                    double mean = 0.0;
                    for (const auto& o : obs) mean += as_real(o.value);
                    mean /= static_cast<double>(obs.size());
                    for (const auto& o : obs) key += (as_real(o.value) - mean) * (as_real(o.value) - mean);
                    key /= static_cast<double>(obs.size());
                } else {
                    std::map<std::string, std::size_t> counts;
                    std::size_t top = 0;
                    for (const auto& o : obs) top = std::max(top, ++counts[as_label(o.value)]);
                    key = 1.0 - static_cast<double>(top) / static_cast<double>(obs.size());
                }
            }
            pool.push_back({t, key});
        }

        if (strategy == KnownTruthStrategy::Random) {
            std::mt19937_64 rng(derive_seed(seed, {stream_id("sample"), c}));
            for (std::size_t j = pool.size(); j > 1; --j) std::swap(pool[j - 1], pool[uniform_index(rng, j)]);
        } else {
            std::stable_sort(pool.begin(), pool.end(), [](const Candidate& a, const Candidate& b) { return a.key > b.key; });
        }
        for (std::size_t k = 0; k < std::min(want, pool.size()); ++k) chosen.insert(ds.tasks()[pool[k].task].id);
    }
    return chosen;
}

std::string algorithm_name(Algorithm a, DataType type) {
    switch (a) {
    case Algorithm::Average: return type == DataType::Continuous ? "avg" : "voting";
    case Algorithm::Crh: return "crh";
    case Algorithm::UrpBa: return "urp-ba";
    case Algorithm::UrpE1: return "urp-e1";
    case Algorithm::UrpE2: return "urp-e2";
    }
    return "avg";
}

Algorithm parse_algorithm(std::string_view s) {
    if (s == "avg" || s == "voting") return Algorithm::Average;
    if (s == "crh") return Algorithm::Crh;
    if (s == "urp-ba") return Algorithm::UrpBa;
    if (s == "urp-e1") return Algorithm::UrpE1;
    if (s == "urp-e2") return Algorithm::UrpE2;
    throw InputError("unknown algorithm \"" + std::string(s) + "\"");
}

const std::vector<Algorithm>& all_algorithms() {
    static const std::vector<Algorithm> all{Algorithm::Average, Algorithm::Crh, Algorithm::UrpBa, Algorithm::UrpE1,
                                            Algorithm::UrpE2};
    return all;
}

std::string_view to_string(SweepAxis a) {
    switch (a) {
    case SweepAxis::None: return "none";
    case SweepAxis::Users: return "users";
    case SweepAxis::SelectionRate: return "selection_rate";
    case SweepAxis::TruthRatio: return "truth_ratio";
    }
    return "none";
}

SweepAxis parse_sweep_axis(std::string_view s) {
    if (s == "none") return SweepAxis::None;
    if (s == "users") return SweepAxis::Users;
    if (s == "selection_rate") return SweepAxis::SelectionRate;
    if (s == "truth_ratio") return SweepAxis::TruthRatio;
    throw InputError("unknown sweep axis \"" + std::string(s) + "\" (expected users, selection_rate or truth_ratio)");
}

std::vector<double> default_sweep_values(SweepAxis a) {
    std::vector<double> v;
    switch (a) {
    case SweepAxis::None: break;
    case SweepAxis::Users:
        for (int k = 1; k <= 10; ++k) v.push_back(10.0 * k);
        break;
    case SweepAxis::SelectionRate:
        for (int k = 1; k <= 10; ++k) v.push_back(k / 10.0);
        break;
    case SweepAxis::TruthRatio: v = {0.01, 0.05, 0.1, 0.2}; break;
    }
    return v;
}

std::uint64_t repetition_seed(std::uint64_t base, std::size_t rep) {
    return derive_seed(base, {stream_id("repetition"), rep});
}

std::vector<double> evaluate_unit(const SimConfig& config, const std::vector<Algorithm>& algorithms,
                                  double holdout_ratio) {
    const auto [ds, truth] = generate_dataset(config);
    TruthMap hidden = truth.hidden_truths();
    if (holdout_ratio > config.known_truth_ratio) {
        SimConfig wider = config;
        wider.known_truth_ratio = holdout_ratio;
        for (const auto& task : draw_ground_truth(wider).known_tasks) hidden.erase(task);
    }
    const auto metric = [&](const TruthMap& est) {
        return config.data_type == DataType::Continuous ? rmse(est, hidden) : error_rate(est, hidden);
    };
    std::vector<double> out;
    for (Algorithm a : algorithms) {
        EngineConfig engine = config.engine;
        engine.record_trace = false;
        engine.record_states = false;
        switch (a) {
        case Algorithm::Average: out.push_back(metric(unweighted_truths(ds))); break;
        case Algorithm::Crh: out.push_back(metric(single_reliability_discovery(ds, engine).truths)); break;
        case Algorithm::UrpBa:
        case Algorithm::UrpE1:
        case Algorithm::UrpE2:
            engine.variant = a == Algorithm::UrpBa ? Variant::BA : a == Algorithm::UrpE1 ? Variant::E1 : Variant::E2;
            out.push_back(metric(profile_all(ds, engine).truths));
            break;
        }
    }
    return out;
}

std::string ExperimentTable::to_csv() const {
    std::string out = "algorithm,setting,sweep_axis,sweep_value,seed_count,metric,mean,std\n";
    for (const MetricRow& r : rows) {
        out += r.algorithm;
        out += ',';
        out += to_string(r.setting);
        out += ',';
        out += to_string(r.axis);
        out += ',';
        out += r.axis == SweepAxis::None ? std::string("NA") : format_double(r.sweep_value);
        out += ',';
        out += std::to_string(r.seed_count);
        out += ',';
        out += r.metric;
        out += ',';
        out += format_double(r.mean);
        out += ',';
        out += format_double(r.std);
        out += '\n';
    }
    return out;
}

const MetricRow& ExperimentTable::at(std::string_view algorithm, double sweep_value) const {
    for (const MetricRow& r : rows) {
        if (r.algorithm == algorithm && (r.axis == SweepAxis::None || r.sweep_value == sweep_value)) return r;
    }
    throw std::out_of_range("no row for algorithm \"" + std::string(algorithm) + "\"");
}

ExperimentTable run_experiment(const SimConfig& config, SweepAxis sweep, std::vector<double> values,
                               std::vector<Algorithm> algorithms) {
    config.validate();
    if (algorithms.empty()) throw InputError("run_experiment needs at least one algorithm");
    if (sweep == SweepAxis::None) values = {0.0};
    else if (values.empty()) values = default_sweep_values(sweep);

    std::vector<SimConfig> points;
    for (double v : values) {
        SimConfig point = config;
        switch (sweep) {
        case SweepAxis::None: break;
        case SweepAxis::Users:
            if (!(v >= 1.0) || v != std::floor(v)) throw InputError("users sweep values must be positive integers");
            point.n_users = static_cast<std::size_t>(v);
            break;
        case SweepAxis::SelectionRate: point.selection_rate = v; break;
        case SweepAxis::TruthRatio: point.known_truth_ratio = v; break;
        }
        point.validate();
        points.push_back(point);
    }

    const double holdout =
        sweep == SweepAxis::TruthRatio ? *std::max_element(values.begin(), values.end()) : 0.0;
    const std::size_t reps = config.repetitions;
    std::vector<std::vector<double>> results(points.size() * reps);
    parallel_for(results.size(), [&](std::size_t unit_index) {
        const std::size_t p = unit_index / reps;
        SimConfig cfg = points[p];
        cfg.seed = repetition_seed(config.seed, unit_index % reps);
        try {
            results[unit_index] = evaluate_unit(cfg, algorithms, holdout);
        } catch (const DomainError& e) {
            throw DomainError(std::string(to_string(sweep)) + "=" + format_double(values[p]) + ": " + e.what());
        } catch (const InputError& e) {
            throw InputError(std::string(to_string(sweep)) + "=" + format_double(values[p]) + ": " + e.what());
        } catch (const std::exception& e) {
            throw NumericalError(std::string(to_string(sweep)) + "=" + format_double(values[p]) + ": " + e.what());
        }
    });

    ExperimentTable table;
    const std::string metric = config.data_type == DataType::Continuous ? "rmse" : "error_rate";
    for (std::size_t a = 0; a < algorithms.size(); ++a) {
        for (std::size_t p = 0; p < points.size(); ++p) {
            MetricRow row;
            row.algorithm = algorithm_name(algorithms[a], config.data_type);
            row.setting = config.setting;
            row.axis = sweep;
            row.sweep_value = values[p];
            row.seed_count = reps;
            row.metric = metric;
            for (std::size_t r = 0; r < reps; ++r) row.samples.push_back(results[p * reps + r][a]);
            row.mean = std::accumulate(row.samples.begin(), row.samples.end(), 0.0) / static_cast<double>(reps);
            if (reps > 1) {
                double ss = 0.0;
                for (double s : row.samples) ss += (s - row.mean) * (s - row.mean);
                row.std = std::sqrt(ss / static_cast<double>(reps - 1));
            }
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

} // namespace veritas
