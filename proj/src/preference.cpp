#include "veritas/preference.hpp"

#include "veritas/errors.hpp"
#include "veritas/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace veritas {

PreferenceMatrix build_preference_matrix(const Dataset& ds) {
    PreferenceMatrix m;
    m.users = ds.users();
    for (const Task& t : ds.tasks()) m.tasks.push_back(t.id);
    const auto n = static_cast<Eigen::Index>(m.users.size());
    const auto t = static_cast<Eigen::Index>(m.tasks.size());
    m.values = Eigen::MatrixXd::Zero(n, t);
    m.mask = Eigen::MatrixXd::Zero(n, t);
    for (const auto& [key, flags] : ds.event_table()) {
        if (!flags.browsed) continue;
        const auto i = static_cast<Eigen::Index>(key.first);
        const auto j = static_cast<Eigen::Index>(key.second);
        m.mask(i, j) = 1.0;
        m.values(i, j) = flags.selected ? 1.0 : 0.5;
    }
    return m;
}

TaskFeatures encode_task_features(const Dataset& ds) {
    TaskFeatures f;
    std::set<std::string> numeric;
    for (const Task& t : ds.tasks()) {
        for (const auto& [name, a] : t.attributes) {
            if (std::holds_alternative<double>(a)) numeric.insert(name);
        }
    }
    const auto n_tasks = static_cast<Eigen::Index>(ds.tasks().size());
    const auto n_cat = static_cast<Eigen::Index>(ds.categories().size());
    const auto n_num = static_cast<Eigen::Index>(numeric.size());
    f.matrix = Eigen::MatrixXd::Zero(n_tasks, n_cat + n_num);
    for (const std::string& c : ds.categories()) f.names.push_back("category=" + c);
    for (Eigen::Index j = 0; j < n_tasks; ++j) f.matrix(j, static_cast<Eigen::Index>(ds.task_category(j))) = 1.0;

    Eigen::Index col = n_cat;
    for (const std::string& name : numeric) {
        f.names.push_back(name);
        std::vector<std::optional<double>> raw(static_cast<std::size_t>(n_tasks));
        double lo = INFINITY, hi = -INFINITY, sum = 0.0;
        std::size_t present = 0;
        for (Eigen::Index j = 0; j < n_tasks; ++j) {
            const auto& attrs = ds.tasks()[j].attributes;
            auto it = attrs.find(name);
            if (it == attrs.end() || !std::holds_alternative<double>(it->second)) continue;
            const double v = std::get<double>(it->second);
            raw[j] = v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            sum += v;
            ++present;
        }
        const double mean = sum / static_cast<double>(present);
        const double span = hi - lo;
        for (Eigen::Index j = 0; j < n_tasks; ++j) {
            const double v = raw[j].value_or(mean);
            f.matrix(j, col) = span > 0.0 ? (v - lo) / span : 0.0;
        }
        ++col;
    }
    return f;
}

double SelectionModel::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    if (constant) return *constant;
    const double z = x.dot(weights) + bias;
    return 1.0 / (1.0 + std::exp(-z));
}

namespace {

// Mean logistic loss plus l2/2 |w|^2; labels in {0, 1}.
double logistic_loss(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w, double b,
                     double l2) {
    const Eigen::ArrayXd z = ((x * w).array() + b);
    // log(1 + exp(z)) - y z, computed stably
    const Eigen::ArrayXd softplus = z.max(0.0) + (-z.abs()).exp().log1p();
    return (softplus - y.array() * z).mean() + 0.5 * l2 * w.squaredNorm();
}

} // namespace

SelectionModel fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const SelectionConfig& config) {
    SelectionModel m;
    const auto n = x.rows();
    m.weights = Eigen::VectorXd::Zero(x.cols());
    if (n == 0) {
        m.constant = 0.5;
        return m;
    }
    const double positives = y.sum();
    if (positives == 0.0 || positives == static_cast<double>(n)) {
        // Laplace-smoothed selection rate.
        m.constant = (positives + 1.0) / (static_cast<double>(n) + 2.0);
        return m;
    }
    const double lipschitz = 0.25 * (x.squaredNorm() + static_cast<double>(n)) / static_cast<double>(n) + config.l2;
    const double step = 1.0 / lipschitz;
    double prev = logistic_loss(x, y, m.weights, m.bias, config.l2);
    m.loss_trace.push_back(prev);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const Eigen::ArrayXd z = (x * m.weights).array() + m.bias;
        const Eigen::VectorXd resid = ((1.0 / (1.0 + (-z).exp())) - y.array()).matrix() / static_cast<double>(n);
        const Eigen::VectorXd gw = x.transpose() * resid + config.l2 * m.weights;
        const double gb = resid.sum();
        m.weights -= step * gw;
        m.bias -= step * gb;
        const double cur = logistic_loss(x, y, m.weights, m.bias, config.l2);
        m.loss_trace.push_back(cur);
        if (std::abs(prev - cur) < config.tol) break;
        prev = cur;
    }
    return m;
}

namespace {

void collect(const Dataset& ds, const TaskFeatures& f, std::optional<std::size_t> user, Eigen::MatrixXd& x,
             Eigen::VectorXd& y) {
    std::vector<std::pair<std::size_t, bool>> rows;
    for (const auto& [key, flags] : ds.event_table()) {
        if (!flags.browsed) continue;
        if (user && key.first != *user) continue;
        rows.emplace_back(key.second, flags.selected);
    }
    x.resize(static_cast<Eigen::Index>(rows.size()), f.matrix.cols());
    y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
        x.row(static_cast<Eigen::Index>(k)) = f.matrix.row(static_cast<Eigen::Index>(rows[k].first));
        y(static_cast<Eigen::Index>(k)) = rows[k].second ? 1.0 : 0.0;
    }
}

} // namespace

SelectionModel train_global_selection_model(const Dataset& ds, const TaskFeatures& f, const SelectionConfig& config) {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    collect(ds, f, std::nullopt, x, y);
    if (x.rows() == 0) throw InputError("cannot train selection model: dataset has no browsing events");
    SelectionModel m = fit_logistic(x, y, config);
    m.global = true;
    return m;
}

SelectionModel train_selection_model(const Dataset& ds, const TaskFeatures& f, std::string_view user,
                                     const SelectionConfig& config) {
    const std::size_t u = ds.require_user(user);
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    collect(ds, f, u, x, y);
    if (static_cast<std::size_t>(x.rows()) < config.min_events) {
        return train_global_selection_model(ds, f, config);
    }
    return fit_logistic(x, y, config);
}

Eigen::MatrixXd collaborative_fill(const PreferenceMatrix& m, const MfConfig& config) {
    if (m.mask.size() == 0 || m.mask.sum() == 0.0) {
        throw InputError("collaborative_fill: preference matrix has no observed entries");
    }
    const FitResult<double> fit = fit_factors(m.values, m.mask, config);
    Eigen::MatrixXd out = fit.model.predict().cwiseMax(0.0).cwiseMin(1.0);
    const Eigen::VectorXd rows = m.mask.rowwise().sum();
    const Eigen::RowVectorXd cols = m.mask.colwise().sum();
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        for (Eigen::Index j = 0; j < out.cols(); ++j) {
            if (m.mask(i, j) != 0.0) {
                out(i, j) = m.values(i, j);
            } else if (rows(i) == 0.0 || cols(j) == 0.0) {
                out(i, j) = 0.5;
            }
        }
    }
    return out;
}

PreferenceProfile hybrid_preference(const Dataset& ds, double eta, const std::vector<SelectionModel>& models,
                                    const TaskFeatures& f, const Eigen::MatrixXd& filled) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw InputError("eta must lie in [0, 1], got " + std::to_string(eta));
    const auto n = static_cast<Eigen::Index>(ds.users().size());
    const auto t = static_cast<Eigen::Index>(ds.tasks().size());
    if (models.size() != ds.users().size() || filled.rows() != n || filled.cols() != t) {
        throw std::invalid_argument("hybrid_preference: inputs do not match the dataset shape");
    }
    PreferenceProfile out;
    out.users = ds.users();
    for (const Task& task : ds.tasks()) out.tasks.push_back(task.id);
    out.eta = eta;
    out.p.resize(n, t);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < t; ++j) {
            out.p(i, j) = eta * models[i].predict(f.matrix.row(j)) + (1.0 - eta) * filled(i, j);
        }
    }
    return out;
}

PreferenceProfile profile_preferences(const Dataset& ds, const PreferenceConfig& config) {
    const PreferenceMatrix u = build_preference_matrix(ds);
    const TaskFeatures f = encode_task_features(ds);
    const std::size_t n = ds.users().size();
    if (u.mask.sum() == 0.0) {
        std::vector<SelectionModel> flat(n);
        for (auto& m : flat) m.constant = 0.5;
        return hybrid_preference(ds, config.eta, flat, f, Eigen::MatrixXd::Constant(u.values.rows(), u.values.cols(), 0.5));
    }
    const SelectionModel global = train_global_selection_model(ds, f, config.selection);
    const Eigen::VectorXd browsed = u.mask.rowwise().sum();
    std::vector<SelectionModel> models(n);
    parallel_for(n, [&](std::size_t i) {
        if (static_cast<std::size_t>(browsed(static_cast<Eigen::Index>(i))) < config.selection.min_events) {
            models[i] = global;
        } else {
            models[i] = train_selection_model(ds, f, ds.users()[i], config.selection);
        }
    });
    return hybrid_preference(ds, config.eta, models, f, collaborative_fill(u, config.mf));
}

} // namespace veritas
