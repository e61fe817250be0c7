#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "aecomm/aecomm.hpp"

namespace aecomm::testing {

/// Random (7,4)-style network with an arbitrary frozen batch.
inline std::vector<FrozenSample> frozen_batch(const Network& net, std::size_t size, ChannelMode mode, FadingMode fading,
                                              double beta, Rng& rng)
{
    std::vector<FrozenSample> batch(size);
    for (auto& s : batch) {
        s.messages.resize(net.arch.head_count);
        for (auto& m : s.messages) m = rng.below(net.arch.head_width);
        s.draw = sample_draw(net.arch, mode, fading, beta, rng);
    }
    return batch;
}

inline double sample_mean(const std::vector<double>& v)
{
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double sample_variance(const std::vector<double>& v)
{
    const double m = sample_mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

inline double correlation(const std::vector<double>& a, const std::vector<double>& b)
{
    const double ma = sample_mean(a), mb = sample_mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace aecomm::testing
