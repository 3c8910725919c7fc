#include "veritas/reliability.hpp"

#include "veritas/errors.hpp"
#include "veritas/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace veritas {

std::string_view to_string(Variant v) {
    switch (v) {
    case Variant::BA: return "ba";
    case Variant::E1: return "e1";
    case Variant::E2: return "e2";
    }
    return "e2";
}

Variant parse_variant(std::string_view s) {
    if (s == "ba" || s == "BA") return Variant::BA;
    if (s == "e1" || s == "E1") return Variant::E1;
    if (s == "e2" || s == "E2") return Variant::E2;
    throw InputError("unknown variant \"" + std::string(s) + "\" (expected ba, e1 or e2)");
}

double penalty(double r) {
    if (!(r > 0.0) || r > 1.0) {
        throw std::domain_error("completion ratio must lie in (0, 1], got " + std::to_string(r));
    }
    return 1.0 - std::log(r);
}

double loss(const Value& x, const Value& truth) {
    if (x.index() != truth.index()) throw std::invalid_argument("loss: mismatched value types");
    if (is_continuous(x)) {
        const double d = as_real(x) - as_real(truth);
        return d * d;
    }
    return as_label(x) == as_label(truth) ? 0.0 : 1.0;
}

namespace kernels {

std::string weighted_plurality(const std::vector<std::string>& labels,
                               const Eigen::Ref<const Eigen::VectorXd>& weights) {
    std::map<std::string_view, double> tally;
    for (std::size_t k = 0; k < labels.size(); ++k) tally[labels[k]] += weights(static_cast<Eigen::Index>(k));
    auto best = tally.begin();
    for (auto it = tally.begin(); it != tally.end(); ++it) {
        if (it->second > best->second) best = it;
    }
    return std::string(best->first);
}

Eigen::VectorXd closed_form_reliability(const Eigen::Ref<const Eigen::VectorXd>& total_loss,
                                        const Eigen::Ref<const Eigen::VectorXd>& g, double floor) {
    const Eigen::ArrayXd t = total_loss.array().max(floor);
    // Scalar log: the packet version rounds differently from the scalar tail,
    // which would break ties between users with identical losses.
    const double total = t.sum();
    return (t.unaryExpr([total](double v) { return std::log(total / v); }) / g.array()).matrix();
}

} // namespace kernels

std::size_t CategoryProblem::supervised_count() const {
    return static_cast<std::size_t>(std::count(supervised.begin(), supervised.end(), true));
}

CategoryProblem build_problem(const Dataset& ds, std::size_t category, const EngineConfig& config) {
    CategoryProblem p;
    p.category = category;
    p.variant = config.variant;
    const bool semi = config.variant == Variant::E2;
    p.alpha = semi ? config.alpha : 0.0;

    const std::size_t n_users = ds.users().size();
    std::vector<char> member(n_users, 0), known(n_users, 0);
    for (std::size_t t : ds.unknown_tasks(category)) {
        const auto [b, e] = ds.task_observation_range(t);
        for (std::size_t k = b; k < e; ++k) member[ds.observation_user(k)] = 1;
    }
    if (semi) {
        for (std::size_t t : ds.known_tasks(category)) {
            const auto [b, e] = ds.task_observation_range(t);
            for (std::size_t k = b; k < e; ++k) member[ds.observation_user(k)] = known[ds.observation_user(k)] = 1;
        }
    }
    std::vector<Eigen::Index> local(n_users, -1);
    for (std::size_t u = 0; u < n_users; ++u) {
        if (!member[u]) continue;
        local[u] = static_cast<Eigen::Index>(p.participants.size());
        p.participants.push_back(u);
        p.supervised.push_back(known[u] != 0);
    }
    const Eigen::Index n = p.size();
    p.g = Eigen::VectorXd::Ones(n);
    if (config.variant != Variant::BA) {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (auto r = ds.completion_ratio(p.participants[i], category)) p.g(i) = penalty(*r);
        }
    }
    p.supervised_loss = Eigen::VectorXd::Zero(n);
    if (semi) {
        for (std::size_t t : ds.known_tasks(category)) {
            const Value& truth = *ds.tasks()[t].known_truth;
            const auto [b, e] = ds.task_observation_range(t);
            for (std::size_t k = b; k < e; ++k) {
                p.supervised_loss(local[ds.observation_user(k)]) += loss(ds.observations()[k].value, truth);
            }
        }
    }
    for (std::size_t t : ds.unknown_tasks(category)) {
        const auto [b, e] = ds.task_observation_range(t);
        if (b == e) continue;
        p.tasks.push_back(t);
        auto& entries = p.entries.emplace_back();
        for (std::size_t k = b; k < e; ++k) entries.push_back({local[ds.observation_user(k)], k});
    }
    return p;
}

Eigen::VectorXd initialize_reliability(const Dataset&, const CategoryProblem& p, const EngineConfig& config) {
    const Eigen::Index n = p.size();
    if (n == 0) throw DomainError("cannot initialize reliability: category has no contributors");
    const double log_n = std::log(static_cast<double>(n));
    Eigen::VectorXd q = (log_n / p.g.array()).matrix();
    const std::size_t n_sup = p.supervised_count();
    if (p.variant != Variant::E2 || n_sup == 0) return q;

    Eigen::VectorXd clamped = p.supervised_loss.array().max(config.loss_floor).matrix();
    double sup_sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (p.supervised[i]) sup_sum += clamped(i);
    }
    const double scale = static_cast<double>(n) * sup_sum / static_cast<double>(n_sup);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (p.supervised[i]) q(i) = std::log(scale / clamped(i)) / p.g(i);
    }
    return q;
}

TruthUpdate update_truths(const Dataset& ds, const CategoryProblem& p, const Eigen::VectorXd& q) {
    const Eigen::VectorXd w = q.cwiseProduct(p.g);
    const auto& obs = ds.observations();
    TruthUpdate out;
    out.truths.reserve(p.tasks.size());
    for (std::size_t j = 0; j < p.tasks.size(); ++j) {
        const auto& entries = p.entries[j];
        const auto m = static_cast<Eigen::Index>(entries.size());
        Eigen::VectorXd wj(m);
        for (Eigen::Index k = 0; k < m; ++k) wj(k) = w(entries[k].participant);
        const bool degenerate = !(wj.sum() > 0.0);
        if (degenerate) {
            out.flagged.push_back(j);
            wj.setOnes();
        }
        if (ds.tasks()[p.tasks[j]].type == DataType::Continuous) {
            Eigen::VectorXd x(m);
            for (Eigen::Index k = 0; k < m; ++k) x(k) = as_real(obs[entries[k].observation].value);
            out.truths.emplace_back(kernels::weighted_mean(x, wj));
        } else {
            std::vector<std::string> labels;
            labels.reserve(entries.size());
            for (const auto& e : entries) labels.push_back(as_label(obs[e.observation].value));
            out.truths.emplace_back(kernels::weighted_plurality(labels, wj));
        }
    }
    return out;
}

Eigen::VectorXd total_losses(const Dataset& ds, const CategoryProblem& p, const std::vector<Value>& truths) {
    Eigen::VectorXd t = p.alpha * p.supervised_loss;
    const auto& obs = ds.observations();
    for (std::size_t j = 0; j < p.tasks.size(); ++j) {
        for (const auto& e : p.entries[j]) t(e.participant) += loss(obs[e.observation].value, truths[j]);
    }
    return t;
}

Eigen::VectorXd estimate_reliability(const Dataset& ds, const CategoryProblem& p, const std::vector<Value>& truths,
                                     const EngineConfig& config) {
    return kernels::closed_form_reliability(total_losses(ds, p, truths), p.g, config.loss_floor);
}

double objective(const Dataset& ds, const CategoryProblem& p, const Eigen::VectorXd& q,
                 const std::vector<Value>& truths) {
    return (q.array() * p.g.array() * total_losses(ds, p, truths).array()).sum();
}

// ---------------------------------------------------------------------------

namespace {

std::vector<Value> truths_from_map(const Dataset& ds, const CategoryProblem& p, const TruthMap& truths) {
    std::vector<Value> out;
    out.reserve(p.tasks.size());
    for (std::size_t t : p.tasks) {
        auto it = truths.find(ds.tasks()[t].id);
        if (it == truths.end()) throw DomainError("no truth estimate for task \"" + ds.tasks()[t].id + "\"");
        if (type_of(it->second) != ds.tasks()[t].type) {
            throw InputError("truth estimate for task \"" + ds.tasks()[t].id + "\" has the wrong data type");
        }
        out.push_back(it->second);
    }
    return out;
}

std::map<std::string, double> to_map(const Dataset& ds, const CategoryProblem& p, const Eigen::VectorXd& q) {
    std::map<std::string, double> out;
    for (Eigen::Index i = 0; i < p.size(); ++i) out.emplace(ds.users()[p.participants[i]], q(i));
    return out;
}

} // namespace

double supervised_residual(const Dataset& ds, std::string_view user, std::string_view category) {
    const std::size_t u = ds.require_user(user);
    const std::size_t c = ds.require_category(category);
    double eps = 0.0;
    for (std::size_t t : ds.known_tasks(c)) {
        const auto [b, e] = ds.task_observation_range(t);
        for (std::size_t k = b; k < e; ++k) {
            if (ds.observation_user(k) == u) eps += loss(ds.observations()[k].value, *ds.tasks()[t].known_truth);
        }
    }
    return eps;
}

std::map<std::string, double> initialize_reliability(const Dataset& ds, std::string_view category,
                                                     const EngineConfig& config) {
    const CategoryProblem p = build_problem(ds, ds.require_category(category), config);
    return to_map(ds, p, initialize_reliability(ds, p, config));
}

TruthMap update_truths(const Dataset& ds, std::string_view category, const std::map<std::string, double>& reliabilities,
                       const EngineConfig& config) {
    const CategoryProblem p = build_problem(ds, ds.require_category(category), config);
    Eigen::VectorXd q(p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const std::string& id = ds.users()[p.participants[i]];
        auto it = reliabilities.find(id);
        if (it == reliabilities.end()) throw DomainError("no reliability given for contributor \"" + id + "\"");
        q(i) = it->second;
    }
    const TruthUpdate upd = update_truths(ds, p, q);
    TruthMap out;
    for (std::size_t j = 0; j < p.tasks.size(); ++j) out.emplace(ds.tasks()[p.tasks[j]].id, upd.truths[j]);
    return out;
}

std::map<std::string, double> estimate_reliability(const Dataset& ds, std::string_view category,
                                                   const TruthMap& truths, const EngineConfig& config) {
    const CategoryProblem p = build_problem(ds, ds.require_category(category), config);
    return to_map(ds, p, estimate_reliability(ds, p, truths_from_map(ds, p, truths), config));
}

CategoryEstimate run_category(const Dataset& ds, std::size_t category, const EngineConfig& config) {
    if (config.max_iters < 1) throw InputError("max_iters must be positive");
    if (!(config.tol > 0.0)) throw InputError("tol must be positive");
    if (!(config.loss_floor > 0.0)) throw InputError("loss_floor must be positive");

    const CategoryProblem p = build_problem(ds, category, config);
    CategoryEstimate est;
    est.category = ds.categories()[category];
    for (std::size_t u : p.participants) est.participants.push_back(ds.users()[u]);
    if (p.size() == 0) throw DomainError("category \"" + est.category + "\" has no contributors");

    Eigen::VectorXd q = initialize_reliability(ds, p, config);
    std::vector<Value> truths;
    std::vector<std::size_t> flagged;
    for (int it = 1; it <= config.max_iters; ++it) {
        TruthUpdate upd = update_truths(ds, p, q);
        Eigen::VectorXd q_next = estimate_reliability(ds, p, upd.truths, config);
        const double delta = p.size() > 0 ? (q_next - q).cwiseAbs().maxCoeff() : 0.0;
        if (config.record_trace || config.record_states) {
            IterationTrace tr;
            tr.objective_after_truths = objective(ds, p, q, upd.truths);
            tr.objective = objective(ds, p, q_next, upd.truths);
            tr.constraint_mass = kernels::constraint_mass(q_next, p.g);
            tr.max_delta = delta;
            if (config.record_states) {
                tr.q_before = q;
                tr.q_after = q_next;
                tr.truths = upd.truths;
            }
            est.trace.push_back(std::move(tr));
        }
        q = std::move(q_next);
        truths = std::move(upd.truths);
        flagged = std::move(upd.flagged);
        est.iterations = it;
        if (delta < config.tol) {
            est.converged = true;
            break;
        }
    }
    est.final_objective = objective(ds, p, q, truths);
    if (!est.converged) {
        est.warnings.push_back("did not converge within " + std::to_string(config.max_iters) + " iterations");
    }
    for (std::size_t j : flagged) est.flagged_tasks.push_back(ds.tasks()[p.tasks[j]].id);
    if (!flagged.empty()) {
        est.warnings.push_back(std::to_string(flagged.size()) +
                               " task(s) had zero total weight; unweighted fallback used");
    }

    est.raw_reliabilities = to_map(ds, p, q);
    if (p.size() >= 2) {
        est.reliabilities = to_map(ds, p, q / std::log(static_cast<double>(p.size())));
    } else {
        est.normalized = false;
        est.reliabilities = est.raw_reliabilities;
        est.warnings.push_back("single contributor; reliability is not comparable and was not normalized");
    }
    for (std::size_t j = 0; j < p.tasks.size(); ++j) est.truths.emplace(ds.tasks()[p.tasks[j]].id, truths[j]);
    return est;
}

CategoryEstimate run_category(const Dataset& ds, std::string_view category, const EngineConfig& config) {
    return run_category(ds, ds.require_category(category), config);
}

ProfileResult profile_all(const Dataset& ds, const EngineConfig& config) {
    const std::size_t n_cat = ds.categories().size();
    std::vector<std::optional<CategoryEstimate>> slots(n_cat);
    parallel_for(n_cat, [&](std::size_t c) {
        if (build_problem(ds, c, config).size() == 0) return;
        const std::string context = "category \"" + ds.categories()[c] + "\": ";
        try {
            slots[c] = run_category(ds, c, config);
        } catch (const InputError& e) {
            throw InputError(context + e.what());
        } catch (const DomainError& e) {
            throw DomainError(context + e.what());
        } catch (const std::exception& e) {
            throw NumericalError(context + e.what());
        }
    });

    ProfileResult out;
    out.profile = ReliabilityProfile(ds.users(), ds.categories());
    for (std::size_t c = 0; c < n_cat; ++c) {
        if (!slots[c]) continue;
        CategoryEstimate& est = *slots[c];
        for (const auto& [user, q] : est.reliabilities) {
            out.profile.set(static_cast<Eigen::Index>(*ds.user_index(user)), static_cast<Eigen::Index>(c), q,
                            Provenance::Estimated);
        }
        for (const auto& [task, v] : est.truths) out.truths.emplace(task, v);
        out.categories.push_back(std::move(est));
    }
    return out;
}

} // namespace veritas
