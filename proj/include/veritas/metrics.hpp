#pragma once

#include "veritas/dataset.hpp"

namespace veritas {

// sqrt(mean (truth - estimate)^2) over continuous tasks present in both maps.
// Throws InputError when the intersection is empty.
double rmse(const TruthMap& estimates, const TruthMap& truths);

// Fraction of categorical tasks (present in both maps) whose estimate differs
// from the truth.
double error_rate(const TruthMap& estimates, const TruthMap& truths);

} // namespace veritas
