#include "veritas/completion.hpp"

#include <algorithm>

namespace veritas {

Completion fill_missing(const ReliabilityProfile& q, const MfConfig& config) {
    const Eigen::MatrixXd mask = q.observed_mask();
    const double n_obs = mask.sum();
    if (n_obs == 0.0) throw InputError("fill_missing: reliability matrix has no estimated entries");

    const Eigen::MatrixXd values = q.values().cwiseProduct(mask);
    const double mean = values.sum() / n_obs;
    double max_obs = 0.0;
    for (Eigen::Index i = 0; i < q.rows(); ++i)
        for (Eigen::Index c = 0; c < q.cols(); ++c)
            if (mask(i, c) > 0.0) max_obs = std::max(max_obs, q.value(i, c));

    Completion out;
    out.profile = ReliabilityProfile(q.users(), q.categories());
    const bool complete = n_obs == static_cast<double>(q.rows() * q.cols());
    Eigen::MatrixXd predicted;
    if (!complete) {
        out.fit = fit_factors(values, mask, config);
        predicted = out.fit.model.predict();
    }
    const Eigen::VectorXd row_counts = mask.rowwise().sum();
    const Eigen::RowVectorXd col_counts = mask.colwise().sum();
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
        for (Eigen::Index c = 0; c < q.cols(); ++c) {
            if (mask(i, c) > 0.0) {
                out.profile.set(i, c, q.value(i, c), Provenance::Estimated);
            } else if (row_counts(i) == 0.0 || col_counts(c) == 0.0) {
                out.profile.set(i, c, mean, Provenance::Default);
            } else {
                out.profile.set(i, c, std::clamp(predicted(i, c), 0.0, max_obs), Provenance::Latent);
            }
        }
    }
    return out;
}

} // namespace veritas
