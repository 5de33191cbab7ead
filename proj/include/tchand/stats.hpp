#pragma once

#include <vector>

namespace tchand::stats {

// Pearson chi-square goodness-of-fit p-value of observed counts against
// expected probabilities. Bins with expected probability 0 must have zero
// observations.
double chi_square_pvalue(const std::vector<long>& observed, const std::vector<double>& expected_p);

// Total variation distance between an empirical histogram and a probability
// vector.
double total_variation(const std::vector<long>& observed, const std::vector<double>& expected_p);

} // namespace tchand::stats
