#include "tchand/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>

#include "tchand/errors.hpp"

namespace tchand::stats {

double chi_square_pvalue(const std::vector<long>& observed, const std::vector<double>& expected_p) {
    if (observed.size() != expected_p.size() || observed.empty())
        throw ShapeMismatch("histogram size mismatch");
    long total = 0;
    for (long o : observed) total += o;
    if (total <= 0) throw ShapeMismatch("empty sample");

    double stat = 0.0;
    int dof = -1; // bins minus one
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double e = expected_p[i] * static_cast<double>(total);
        if (e <= 0.0) {
            if (observed[i] != 0)
                throw ShapeMismatch("observation in a zero-probability bin");
            continue;
        }
        const double d = static_cast<double>(observed[i]) - e;
        stat += d * d / e;
        ++dof;
    }
    if (dof < 1) return 1.0;
    boost::math::chi_squared dist(static_cast<double>(dof));
    return boost::math::cdf(boost::math::complement(dist, stat));
}

double total_variation(const std::vector<long>& observed, const std::vector<double>& expected_p) {
    if (observed.size() != expected_p.size() || observed.empty())
        throw ShapeMismatch("histogram size mismatch");
    long total = 0;
    for (long o : observed) total += o;
    double tv = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i)
        tv += std::abs(static_cast<double>(observed[i]) / total - expected_p[i]);
    return 0.5 * tv;
}

} // namespace tchand::stats
