#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace veritas {

enum class Provenance : std::uint8_t { Missing, Estimated, Latent, Default };

std::string_view to_string(Provenance p);
Provenance parse_provenance(std::string_view s);

// User x category reliability matrix Q with per-entry provenance.
class ReliabilityProfile {
public:
    ReliabilityProfile() = default;
    ReliabilityProfile(std::vector<std::string> users, std::vector<std::string> categories);

    const std::vector<std::string>& users() const { return users_; }
    const std::vector<std::string>& categories() const { return categories_; }
    Eigen::Index rows() const { return values_.rows(); }
    Eigen::Index cols() const { return values_.cols(); }

    const Eigen::MatrixXd& values() const { return values_; }
    double value(Eigen::Index user, Eigen::Index category) const { return values_(user, category); }
    Provenance provenance(Eigen::Index user, Eigen::Index category) const {
        return provenance_[static_cast<std::size_t>(user * cols() + category)];
    }

    // Assigns a missing entry. Provenance is set once; re-assigning throws.
    void set(Eigen::Index user, Eigen::Index category, double value, Provenance provenance);

    // 1 where provenance is Estimated, 0 elsewhere.
    Eigen::MatrixXd observed_mask() const;
    std::size_t count(Provenance p) const;

    std::optional<Eigen::Index> user_index(std::string_view id) const;
    std::optional<Eigen::Index> category_index(std::string_view id) const;

private:
    std::vector<std::string> users_;
    std::vector<std::string> categories_;
    Eigen::MatrixXd values_;
    std::vector<Provenance> provenance_;
};

} // namespace veritas
