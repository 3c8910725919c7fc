// veritas: profile, recommend, simulate, evaluate.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "veritas/artifacts.hpp"
#include "veritas/completion.hpp"
#include "veritas/config.hpp"
#include "veritas/errors.hpp"
#include "veritas/metrics.hpp"
#include "veritas/preference.hpp"
#include "veritas/recommender.hpp"
#include "veritas/reliability.hpp"
#include "veritas/simulation.hpp"

#ifndef VERITAS_VERSION
#define VERITAS_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace veritas;

namespace {

constexpr int kInputError = 2;
constexpr int kDomainError = 3;
constexpr int kNumericalError = 4;

int report(std::string_view kind, int code, const std::string& message, std::optional<std::size_t> line = {}) {
    json err{{"kind", kind}, {"code", code}, {"message", message}};
    if (line) err["line"] = *line;
    std::cerr << json{{"error", err}}.dump() << '\n';
    return code;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw InputError("cannot create directory \"" + dir.string() + "\"");
}

json tool_info() { return {{"name", "veritas"}, {"version", VERITAS_VERSION}}; }

struct ProfileArgs {
    std::string dataset;
    std::string config;
    std::string out;
    std::string variant;
    std::optional<std::uint64_t> seed;
    std::string truths;
};

int cmd_profile(const ProfileArgs& a) {
    RunConfig cfg = a.config.empty() ? parse_run_config("{}") : load_run_config(a.config);
    if (a.seed) {
        cfg.seed = *a.seed;
        cfg.completion.seed = cfg.completion_seed();
        cfg.preference.mf.seed = cfg.preference_seed();
    }
    if (!a.variant.empty()) cfg.engine.variant = parse_variant(a.variant);

    Dataset ds = load_dataset(a.dataset);
    std::vector<std::string> exposed;
    if (!a.truths.empty()) {
        const TruthMap all = load_truths(a.truths);
        const auto chosen = sample_known_truths(ds, all, cfg.known_truth_ratio, cfg.known_truth_strategy,
                                                cfg.sampling_seed());
        TruthMap subset;
        for (const auto& t : chosen) subset.emplace(t, all.at(t));
        ds = with_known_truths(ds, subset);
        exposed.assign(chosen.begin(), chosen.end());
    }

    const ProfileResult result = profile_all(ds, cfg.engine);
    json completion_info;
    ReliabilityProfile q = result.profile;
    if (q.count(Provenance::Missing) > 0) {
        Completion filled = fill_missing(q, cfg.completion);
        completion_info = {{"iterations", filled.fit.iterations},
                           {"objective", filled.fit.objective},
                           {"converged", filled.fit.converged}};
        q = std::move(filled.profile);
    } else {
        completion_info = {{"iterations", 0}, {"skipped", "no missing entries"}};
    }
    const PreferenceProfile pref = profile_preferences(ds, cfg.preference);

    json categories = json::array();
    for (const CategoryEstimate& e : result.categories) {
        categories.push_back({{"category", e.category},
                              {"iterations", e.iterations},
                              {"converged", e.converged},
                              {"normalized", e.normalized},
                              {"final_objective", e.final_objective},
                              {"flagged_tasks", e.flagged_tasks},
                              {"warnings", e.warnings}});
    }
    json manifest{{"tool", tool_info()},
                  {"command", "profile"},
                  {"dataset", fs::absolute(a.dataset).string()},
                  {"truths", a.truths.empty() ? json(nullptr) : json(fs::absolute(a.truths).string())},
                  {"seed", cfg.seed},
                  {"derived_seeds",
                   {{"completion", cfg.completion.seed},
                    {"preference", cfg.preference.mf.seed},
                    {"known_truths", cfg.sampling_seed()}}},
                  {"config", json::parse(run_config_to_json(cfg))},
                  {"exposed_truths", exposed},
                  {"categories", categories},
                  {"completion", completion_info},
                  {"provenance",
                   {{"estimated", q.count(Provenance::Estimated)},
                    {"latent", q.count(Provenance::Latent)},
                    {"default", q.count(Provenance::Default)},
                    {"missing", q.count(Provenance::Missing)}}}};

    // Everything is computed before the first write.
    const fs::path out(a.out);
    ensure_dir(out);
    write_text_file(out / files::reliability, reliability_to_csv(q));
    write_text_file(out / files::truths, truths_to_csv(result.truths));
    write_text_file(out / files::preferences, preferences_to_csv(pref));
    write_text_file(out / files::tasks, tasks_to_csv(ds));
    write_text_file(out / files::completed, completed_to_csv(ds));
    write_text_file(out / files::manifest, manifest.dump(2) + "\n");
    return 0;
}

struct RecommendArgs {
    std::string profile_dir;
    std::string user;
    std::size_t k = 20;
    double gamma = 0.4;
    std::string strategy = "linear";
    std::optional<double> q_req;
    bool category_preference = false;
    bool include_completed = false;
    std::string out;
};

int cmd_recommend(const RecommendArgs& a) {
    const Strategy strategy = parse_strategy(a.strategy);
    if (strategy == Strategy::Constrained && !a.q_req) throw InputError("--q-req is required with --strategy constrained");
    const ProfileArtifacts art = read_profile_dir(a.profile_dir);
    const ScoringInputs in =
        join_profiles(art.preferences, art.reliability, art.task_category, art.completed, a.category_preference);
    const std::optional<std::set<std::string>> exclusions =
        a.include_completed ? std::optional<std::set<std::string>>(std::set<std::string>{}) : std::nullopt;

    std::string text;
    if (strategy == Strategy::Constrained) {
        const auto task = constrained_recommend(in, a.user, *a.q_req, exclusions);
        text = constrained_to_json(in, a.user, *a.q_req, task);
    } else {
        text = recommendation_to_json(top_k(in, a.user, a.k, a.gamma, strategy, exclusions));
    }
    if (a.out.empty()) {
        std::cout << text << '\n';
    } else {
        write_text_file(a.out, text + "\n");
    }
    return 0;
}

struct SimulateArgs {
    std::string config;
    std::string out;
    std::string sweep;
    std::optional<std::uint64_t> seed;
    std::string dump_dataset;
    std::string dump_truth;
};

int cmd_simulate(const SimulateArgs& a) {
    SimulationPlan plan = a.config.empty() ? parse_simulation_plan("{}") : load_simulation_plan(a.config);
    if (!a.sweep.empty()) {
        const SweepAxis axis = parse_sweep_axis(a.sweep);
        if (axis != plan.sweep) plan.sweep_values.clear();
        plan.sweep = axis;
    }
    if (a.seed) plan.sim.seed = *a.seed;

    const ExperimentTable table = run_experiment(plan.sim, plan.sweep, plan.sweep_values, plan.algorithms);

    // Audit dumps are of repetition 0 at the configured (unswept) point.
    std::optional<std::pair<Dataset, GroundTruthBundle>> audit;
    if (!a.dump_dataset.empty() || !a.dump_truth.empty()) {
        SimConfig first = plan.sim;
        first.seed = repetition_seed(plan.sim.seed, 0);
        audit = generate_dataset(first);
    }

    const fs::path out(a.out);
    if (out.has_parent_path()) ensure_dir(out.parent_path());
    write_text_file(out, table.to_csv());
    json manifest{{"tool", tool_info()},
                  {"command", "simulate"},
                  {"seed", plan.sim.seed},
                  {"repetition_seeds", [&] {
                       json seeds = json::array();
                       for (std::size_t r = 0; r < plan.sim.repetitions; ++r) seeds.push_back(repetition_seed(plan.sim.seed, r));
                       return seeds;
                   }()},
                  {"config", json::parse(simulation_plan_to_json(plan))},
                  {"output", out.filename().string()}};
    fs::path manifest_path = out;
    manifest_path += ".manifest.json";
    write_text_file(manifest_path, manifest.dump(2) + "\n");
    if (audit && !a.dump_dataset.empty()) write_text_file(a.dump_dataset, dataset_to_json(audit->first) + "\n");
    if (audit && !a.dump_truth.empty()) write_text_file(a.dump_truth, ground_truth_to_json(audit->second) + "\n");
    return 0;
}

struct EvaluateArgs {
    std::string estimates;
    std::string truths;
};

int cmd_evaluate(const EvaluateArgs& a) {
    const auto raw = truths_from_csv(read_text_file(a.estimates));
    const TruthMap truths = load_truths(a.truths);
    TruthMap estimates;
    for (const auto& [task, text] : raw) {
        auto it = truths.find(task);
        if (it == truths.end()) continue;
        if (is_continuous(it->second)) estimates.emplace(task, parse_number(text, "estimate for task \"" + task + "\""));
        else estimates.emplace(task, text);
    }
    json doc = json::object();
    std::size_t n_cont = 0, n_cat = 0;
    for (const auto& [task, v] : estimates) (is_continuous(v) ? n_cont : n_cat)++;
    if (n_cont == 0 && n_cat == 0) throw InputError("no task has both an estimate and a truth");
    if (n_cont) doc["rmse"] = {{"value", rmse(estimates, truths)}, {"tasks", n_cont}};
    if (n_cat) doc["error_rate"] = {{"value", error_rate(estimates, truths)}, {"tasks", n_cat}};
    std::cout << doc.dump(2) << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fine-grained reliability and preference profiling for crowdsensing task recommendation"};
    app.set_version_flag("--version", VERITAS_VERSION);
    app.require_subcommand(1);

    ProfileArgs pa;
    auto* profile = app.add_subcommand("profile", "Estimate reliability, truths and preferences from a dataset");
    profile->add_option("dataset", pa.dataset, "Dataset JSON")->required();
    profile->add_option("--config", pa.config, "Run config JSON");
    profile->add_option("--out", pa.out, "Output directory")->required();
    profile->add_option("--variant", pa.variant, "Engine variant: ba, e1 or e2");
    profile->add_option("--seed", pa.seed, "Top-level seed");
    profile->add_option("--truths", pa.truths, "Ground-truth JSON to sample known truths from");

    RecommendArgs ra;
    auto* recommend = app.add_subcommand("recommend", "Rank tasks for a user from a profile directory");
    recommend->add_option("profile_dir", ra.profile_dir, "Directory written by `profile`")->required();
    recommend->add_option("--user", ra.user, "User id")->required();
    recommend->add_option("--k", ra.k, "Number of tasks")->capture_default_str();
    recommend->add_option("--gamma", ra.gamma, "Preference weight in the linear score")->capture_default_str();
    recommend->add_option("--strategy", ra.strategy, "linear, product or constrained")->capture_default_str();
    recommend->add_option("--q-req", ra.q_req, "Reliability floor for the constrained strategy");
    recommend->add_flag("--category-preference", ra.category_preference, "Use category-averaged preference");
    recommend->add_flag("--include-completed", ra.include_completed, "Do not skip tasks the user completed");
    recommend->add_option("--out", ra.out, "Write JSON here instead of stdout");

    SimulateArgs sa;
    auto* simulate = app.add_subcommand("simulate", "Run the synthetic experiment and write a metrics CSV");
    simulate->add_option("--config", sa.config, "Simulation config JSON");
    simulate->add_option("--out", sa.out, "Metrics CSV path")->required();
    simulate->add_option("--sweep", sa.sweep, "users, selection_rate or truth_ratio");
    simulate->add_option("--seed", sa.seed, "Top-level seed");
    simulate->add_option("--dump-dataset", sa.dump_dataset, "Write the first generated dataset as JSON");
    simulate->add_option("--dump-truth", sa.dump_truth, "Write the first ground-truth bundle as JSON");

    EvaluateArgs ea;
    auto* evaluate = app.add_subcommand("evaluate", "RMSE / error rate of estimates against truths");
    evaluate->add_option("--estimates", ea.estimates, "truths.csv written by `profile`")->required();
    evaluate->add_option("--truths", ea.truths, "Ground-truth JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report("input", kInputError, e.what());
    }

    try {
        if (*profile) return cmd_profile(pa);
        if (*recommend) return cmd_recommend(ra);
        if (*simulate) return cmd_simulate(sa);
        if (*evaluate) return cmd_evaluate(ea);
    } catch (const DatasetError& e) {
        return report("input", kInputError, e.what(), e.line() > 0 ? std::optional<std::size_t>(static_cast<std::size_t>(e.line())) : std::nullopt);
    } catch (const InputError& e) {
        return report("input", kInputError, e.what());
    } catch (const DomainError& e) {
        return report("domain", kDomainError, e.what());
    } catch (const NumericalError& e) {
        return report("numerical", kNumericalError, e.what());
    } catch (const std::exception& e) {
        return report("numerical", kNumericalError, e.what());
    }
    return 0;
}
