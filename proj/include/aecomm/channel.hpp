#pragma once

// Complex-baseband signals, Rayleigh fading, AWGN, and the Eb/N0 <-> noise
// variance conversion shared by every link in the toolkit.
//
// Complex samples are stored as interleaved (re, im) pairs. A signal carried
// by several antennas is laid out stream-major: antenna j owns the contiguous
// block [j * 2n, (j + 1) * 2n).

#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "aecomm/errors.hpp"
#include "aecomm/rng.hpp"

namespace aecomm {

using cdouble = std::complex<double>;

enum class ChannelMode { AwgnOnly, Rayleigh };
enum class FadingMode { Block, PerUse };

inline std::string to_string(ChannelMode mode) { return mode == ChannelMode::AwgnOnly ? "awgn" : "rayleigh"; }
inline std::string to_string(FadingMode mode) { return mode == FadingMode::Block ? "block" : "per-use"; }

inline ChannelMode parse_channel_mode(const std::string& text)
{
    if (text == "awgn" || text == "awgn-only") return ChannelMode::AwgnOnly;
    if (text == "rayleigh") return ChannelMode::Rayleigh;
    throw ContractViolation("unknown channel mode '" + text + "'");
}

inline FadingMode parse_fading_mode(const std::string& text)
{
    if (text == "block") return FadingMode::Block;
    if (text == "per-use") return FadingMode::PerUse;
    throw ContractViolation("unknown fading mode '" + text + "'");
}

/// n complex samples as 2n interleaved reals.
struct ComplexSignal {
    std::vector<double> samples;

    ComplexSignal() = default;
    explicit ComplexSignal(std::vector<double> interleaved) : samples(std::move(interleaved))
    {
        detail::require(samples.size() % 2 == 0, "ComplexSignal: odd number of real entries");
    }
    static ComplexSignal from_complex(std::span<const cdouble> values)
    {
        std::vector<double> out;
        out.reserve(2 * values.size());
        for (cdouble v : values) {
            out.push_back(v.real());
            out.push_back(v.imag());
        }
        return ComplexSignal(std::move(out));
    }

    std::size_t complex_size() const noexcept { return samples.size() / 2; }
    cdouble at(std::size_t t) const { return {samples[2 * t], samples[2 * t + 1]}; }
    void set(std::size_t t, cdouble v)
    {
        samples[2 * t] = v.real();
        samples[2 * t + 1] = v.imag();
    }
    double energy() const
    {
        double e = 0.0;
        for (double s : samples) e += s * s;
        return e;
    }
};

/// Complex tap matrix of shape (rx x tx), row-major. SISO is the 1x1 case.
struct ChannelRealization {
    std::size_t rx = 1;
    std::size_t tx = 1;
    std::vector<cdouble> taps{cdouble{1.0, 0.0}};

    ChannelRealization() = default;
    ChannelRealization(std::size_t rx_antennas, std::size_t tx_antennas, std::vector<cdouble> values)
        : rx(rx_antennas), tx(tx_antennas), taps(std::move(values))
    {
        detail::require(rx >= 1 && tx >= 1, "ChannelRealization: antenna counts must be >= 1");
        detail::require(taps.size() == rx * tx, "ChannelRealization: tap count does not match shape");
    }

    static ChannelRealization identity(std::size_t rx_antennas, std::size_t tx_antennas)
    {
        std::vector<cdouble> values(rx_antennas * tx_antennas, cdouble{});
        for (std::size_t i = 0; i < std::min(rx_antennas, tx_antennas); ++i) values[i * tx_antennas + i] = 1.0;
        return {rx_antennas, tx_antennas, std::move(values)};
    }
    static ChannelRealization scalar(cdouble h) { return {1, 1, {h}}; }

    cdouble operator()(std::size_t i, std::size_t j) const { return taps[i * tx + j]; }
    cdouble& operator()(std::size_t i, std::size_t j) { return taps[i * tx + j]; }

    /// Taps as interleaved reals, row-major; this is what a genie-CSI receiver sees.
    std::vector<double> as_reals() const
    {
        std::vector<double> out;
        out.reserve(2 * taps.size());
        for (cdouble h : taps) {
            out.push_back(h.real());
            out.push_back(h.imag());
        }
        return out;
    }
};

/// Noise level of a link: variance per real dimension plus the Eb/N0 and
/// effective rate it was derived from.
struct NoiseSpec {
    double beta = 0.0;
    double ebn0_db = std::numeric_limits<double>::infinity();
    double rate = 1.0;
};

/// beta = 1 / (2 * rate * 10^(ebn0_db / 10)).
///
/// `rate` is information bits per unit of transmitted energy, where one unit is
/// the power of one real dimension driven at unit power. For uncoded BPSK at
/// amplitude +-1 this is 1 and the textbook Q(sqrt(2 Eb/N0)) follows exactly.
inline double ebn0_to_beta(double ebn0_db, double rate)
{
    detail::require(rate > 0.0 && std::isfinite(rate), "ebn0_to_beta: rate must be positive");
    if (ebn0_db == std::numeric_limits<double>::infinity()) return 0.0;
    return 1.0 / (2.0 * rate * std::pow(10.0, ebn0_db / 10.0));
}

inline double beta_to_ebn0(double beta, double rate)
{
    detail::require(rate > 0.0 && std::isfinite(rate), "beta_to_ebn0: rate must be positive");
    detail::require(beta >= 0.0, "beta_to_ebn0: beta must be non-negative");
    if (beta == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / (2.0 * rate * beta));
}

inline NoiseSpec make_noise_spec(double ebn0_db, double rate)
{
    return NoiseSpec{ebn0_to_beta(ebn0_db, rate), ebn0_db, rate};
}

/// h = (a + i b) / sqrt(2), a and b standard normal, so E|h|^2 = 1.
inline cdouble sample_rayleigh_tap(Rng& rng)
{
    const double a = rng.gaussian();
    const double b = rng.gaussian();
    return cdouble{a, b} / std::numbers::sqrt2;
}

inline ChannelRealization sample_mimo_channel(Rng& rng, std::size_t tx_antennas = 2, std::size_t rx_antennas = 2)
{
    detail::require(tx_antennas >= 1 && rx_antennas >= 1, "sample_mimo_channel: antenna counts must be >= 1");
    std::vector<cdouble> taps(rx_antennas * tx_antennas);
    for (auto& h : taps) h = sample_rayleigh_tap(rng);
    return {rx_antennas, tx_antennas, std::move(taps)};
}

/// Realizations covering one message: a single one under block fading, one per
/// channel use otherwise. AWGN-only links get identity taps.
inline std::vector<ChannelRealization> sample_channel_state(Rng& rng, std::size_t rx_antennas, std::size_t tx_antennas,
                                                            std::size_t channel_uses, ChannelMode mode,
                                                            FadingMode fading)
{
    const std::size_t count = fading == FadingMode::Block ? 1 : channel_uses;
    std::vector<ChannelRealization> state;
    state.reserve(count);
    for (std::size_t c = 0; c < count; ++c) {
        if (mode == ChannelMode::AwgnOnly)
            state.push_back(ChannelRealization::identity(rx_antennas, tx_antennas));
        else
            state.push_back(sample_mimo_channel(rng, tx_antennas, rx_antennas));
    }
    return state;
}

namespace detail {

inline void apply_taps(std::span<const ChannelRealization> channel, std::span<const double> x, std::span<double> y,
                       bool adjoint)
{
    detail::require(!channel.empty(), "apply_channel: no channel realization");
    const std::size_t rx = channel.front().rx;
    const std::size_t tx = channel.front().tx;
    const std::size_t in_streams = adjoint ? rx : tx;
    const std::size_t out_streams = adjoint ? tx : rx;
    detail::require(x.size() % (2 * in_streams) == 0, "apply_channel: signal does not split into equal streams");
    const std::size_t uses = x.size() / (2 * in_streams);
    detail::require(y.size() == 2 * uses * out_streams, "apply_channel: output width mismatch");
    detail::require(channel.size() == 1 || channel.size() == uses,
                    "apply_channel: need one realization or one per channel use");
    for (const auto& h : channel)
        detail::require(h.rx == rx && h.tx == tx, "apply_channel: realizations differ in shape");

    for (std::size_t t = 0; t < uses; ++t) {
        const ChannelRealization& h = channel.size() == 1 ? channel.front() : channel[t];
        for (std::size_t i = 0; i < out_streams; ++i) {
            double re = 0.0;
            double im = 0.0;
            for (std::size_t j = 0; j < in_streams; ++j) {
                const cdouble tap = adjoint ? std::conj(h(j, i)) : h(i, j);
                const double xr = x[j * 2 * uses + 2 * t];
                const double xi = x[j * 2 * uses + 2 * t + 1];
                // [[a, -b], [b, a]] acting on (xr, xi)
                re += tap.real() * xr - tap.imag() * xi;
                im += tap.imag() * xr + tap.real() * xi;
            }
            y[i * 2 * uses + 2 * t] = re;
            y[i * 2 * uses + 2 * t + 1] = im;
        }
    }
}

}  // namespace detail

/// y_i[t] = sum_j h_ij x_j[t] for every channel use t and receive antenna i.
inline std::vector<double> apply_channel(std::span<const ChannelRealization> channel, std::span<const double> x)
{
    detail::require(!channel.empty(), "apply_channel: no channel realization");
    const std::size_t tx = channel.front().tx;
    detail::require(x.size() % (2 * tx) == 0, "apply_channel: signal does not split into equal streams");
    std::vector<double> y(x.size() / tx * channel.front().rx);
    detail::apply_taps(channel, x, y, false);
    return y;
}

/// Conjugate-transpose map H^H; this is the real transpose of `apply_channel`.
inline std::vector<double> apply_channel_adjoint(std::span<const ChannelRealization> channel,
                                                 std::span<const double> y)
{
    detail::require(!channel.empty(), "apply_channel_adjoint: no channel realization");
    const std::size_t rx = channel.front().rx;
    detail::require(y.size() % (2 * rx) == 0, "apply_channel_adjoint: signal does not split into equal streams");
    std::vector<double> x(y.size() / rx * channel.front().tx);
    detail::apply_taps(channel, y, x, true);
    return x;
}

inline ComplexSignal apply_channel(const ChannelRealization& channel, const ComplexSignal& x)
{
    return ComplexSignal(apply_channel(std::span<const ChannelRealization>(&channel, 1), x.samples));
}

/// Independent N(0, beta) per real entry.
inline std::vector<double> sample_noise(std::size_t width, double beta, Rng& rng)
{
    detail::require(beta >= 0.0 && std::isfinite(beta), "sample_noise: beta must be finite and non-negative");
    std::vector<double> n(width, 0.0);
    if (beta == 0.0) return n;
    const double sigma = std::sqrt(beta);
    for (double& v : n) v = sigma * rng.gaussian();
    return n;
}

inline ComplexSignal add_awgn(const ComplexSignal& y, const NoiseSpec& spec, Rng& rng)
{
    ComplexSignal out = y;
    const auto n = sample_noise(y.samples.size(), spec.beta, rng);
    for (std::size_t i = 0; i < n.size(); ++i) out.samples[i] += n[i];
    return out;
}

}  // namespace aecomm
