#include "veritas/profile.hpp"

#include "veritas/errors.hpp"

#include <algorithm>

namespace veritas {

std::string_view to_string(Provenance p) {
    switch (p) {
    case Provenance::Missing: return "missing";
    case Provenance::Estimated: return "estimated";
    case Provenance::Latent: return "latent";
    case Provenance::Default: return "default";
    }
    return "missing";
}

Provenance parse_provenance(std::string_view s) {
    if (s == "missing") return Provenance::Missing;
    if (s == "estimated") return Provenance::Estimated;
    if (s == "latent") return Provenance::Latent;
    if (s == "default") return Provenance::Default;
    throw InputError("unknown provenance \"" + std::string(s) + "\"");
}

ReliabilityProfile::ReliabilityProfile(std::vector<std::string> users, std::vector<std::string> categories)
    : users_(std::move(users)), categories_(std::move(categories)),
      values_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(users_.size()),
                                    static_cast<Eigen::Index>(categories_.size()))),
      provenance_(users_.size() * categories_.size(), Provenance::Missing) {
    auto strictly_sorted = [](const std::vector<std::string>& ids) {
        return std::adjacent_find(ids.begin(), ids.end(), std::greater_equal<>()) == ids.end();
    };
    if (!strictly_sorted(users_) || !strictly_sorted(categories_)) {
        throw std::invalid_argument("reliability profile ids must be unique and sorted");
    }
}

void ReliabilityProfile::set(Eigen::Index user, Eigen::Index category, double value, Provenance p) {
    auto& slot = provenance_[static_cast<std::size_t>(user * cols() + category)];
    if (slot != Provenance::Missing) {
        throw std::logic_error("reliability entry (" + users_[user] + ", " + categories_[category] +
                               ") already assigned");
    }
    slot = p;
    values_(user, category) = value;
}

Eigen::MatrixXd ReliabilityProfile::observed_mask() const {
    Eigen::MatrixXd mask(rows(), cols());
    for (Eigen::Index i = 0; i < rows(); ++i) {
        for (Eigen::Index c = 0; c < cols(); ++c) {
            mask(i, c) = provenance(i, c) == Provenance::Estimated ? 1.0 : 0.0;
        }
    }
    return mask;
}

std::size_t ReliabilityProfile::count(Provenance p) const {
    return static_cast<std::size_t>(std::count(provenance_.begin(), provenance_.end(), p));
}

std::optional<Eigen::Index> ReliabilityProfile::user_index(std::string_view id) const {
    auto it = std::lower_bound(users_.begin(), users_.end(), id);
    if (it == users_.end() || *it != id) return std::nullopt;
    return static_cast<Eigen::Index>(it - users_.begin());
}

std::optional<Eigen::Index> ReliabilityProfile::category_index(std::string_view id) const {
    auto it = std::lower_bound(categories_.begin(), categories_.end(), id);
    if (it == categories_.end() || *it != id) return std::nullopt;
    return static_cast<Eigen::Index>(it - categories_.begin());
}

} // namespace veritas
