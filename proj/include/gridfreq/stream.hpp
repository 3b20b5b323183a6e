#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "gridfreq/time.hpp"

namespace gridfreq {

/// Uniformly sampled voltage block: sample n sits at t0 + n/fs.
struct SampleStream {
    std::vector<double> samples;
    double fs = 0.0;
    UtcTime t0;

    std::size_t size() const { return samples.size(); }
    UtcTime time_of(double fractional_index) const { return t0.plus(fractional_index / fs); }
    UtcTime end_time() const { return time_of(static_cast<double>(samples.size())); }
};

}  // namespace gridfreq
