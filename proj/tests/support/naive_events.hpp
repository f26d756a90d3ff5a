#pragma once

// Floor-arithmetic threshold-crossing counter used as an oracle against the
// interpolating emitter: per segment it jumps the reference by whole
// multiples of theta instead of walking crossings one at a time.

#include <cmath>
#include <vector>

namespace refimpl {

struct CrossingCounts {
    long positive = 0;
    long negative = 0;
    long total() const { return positive + negative; }
};

inline CrossingCounts naive_crossing_counts(const std::vector<double>& log_samples,
                                            double theta_pos, double theta_neg) {
    CrossingCounts counts;
    double ref = log_samples.front();
    for (std::size_t k = 1; k < log_samples.size(); ++k) {
        const double l = log_samples[k];
        if (l > ref) {
            const long n = static_cast<long>(std::floor((l - ref) / theta_pos + 1e-12));
            counts.positive += n;
            ref += n * theta_pos;
        } else if (l < ref) {
            const long n = static_cast<long>(std::floor((ref - l) / theta_neg + 1e-12));
            counts.negative += n;
            ref -= n * theta_neg;
        }
    }
    return counts;
}

} // namespace refimpl
