#include "veritas/metrics.hpp"

#include "veritas/errors.hpp"

#include <cmath>

namespace veritas {

namespace {

template <class Fn>
std::size_t for_each_common(const TruthMap& estimates, const TruthMap& truths, DataType type, Fn&& fn) {
    std::size_t n = 0;
    for (const auto& [task, truth] : truths) {
        if (type_of(truth) != type) continue;
        auto it = estimates.find(task);
        if (it == estimates.end()) continue;
        if (type_of(it->second) != type) {
            throw InputError("estimate for task \"" + task + "\" has a different data type than its truth");
        }
        fn(it->second, truth);
        ++n;
    }
    return n;
}

} // namespace

double rmse(const TruthMap& estimates, const TruthMap& truths) {
    double sum = 0.0;
    const std::size_t n = for_each_common(estimates, truths, DataType::Continuous, [&](const Value& e, const Value& t) {
        const double d = as_real(t) - as_real(e);
        sum += d * d;
    });
    if (n == 0) throw InputError("rmse: no continuous task has both an estimate and a truth");
    return std::sqrt(sum / static_cast<double>(n));
}

double error_rate(const TruthMap& estimates, const TruthMap& truths) {
    std::size_t wrong = 0;
    const std::size_t n = for_each_common(estimates, truths, DataType::Categorical, [&](const Value& e, const Value& t) {
        if (as_label(e) != as_label(t)) ++wrong;
    });
    if (n == 0) throw InputError("error_rate: no categorical task has both an estimate and a truth");
    return static_cast<double>(wrong) / static_cast<double>(n);
}

} // namespace veritas
