#pragma once

// Conventional reference links: Hamming(7,4) with BPSK, Gray QPSK, 2x2
// maximum-likelihood and zero-forcing detection, and closed-form BER curves.

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "aecomm/channel.hpp"
#include "aecomm/errors.hpp"

namespace aecomm {

using Bits = std::vector<std::uint8_t>;

// ---------------------------------------------------------------------------
// Hamming(7,4)
// ---------------------------------------------------------------------------

/// Systematic Hamming(7,4): G = [I4 | P], H = [P^T | I3].
struct Hamming74Code {
    static constexpr std::array<std::array<std::uint8_t, 3>, 4> parity{{{1, 1, 0}, {1, 0, 1}, {0, 1, 1}, {1, 1, 1}}};

    static constexpr std::array<std::array<std::uint8_t, 7>, 4> generator()
    {
        std::array<std::array<std::uint8_t, 7>, 4> g{};
        for (std::size_t i = 0; i < 4; ++i) {
            g[i][i] = 1;
            for (std::size_t j = 0; j < 3; ++j) g[i][4 + j] = parity[i][j];
        }
        return g;
    }

    static constexpr std::array<std::array<std::uint8_t, 7>, 3> parity_check()
    {
        std::array<std::array<std::uint8_t, 7>, 3> h{};
        for (std::size_t j = 0; j < 3; ++j) {
            for (std::size_t i = 0; i < 4; ++i) h[j][i] = parity[i][j];
            h[j][4 + j] = 1;
        }
        return h;
    }

    /// Syndrome value (s0 s1 s2 read big-endian) -> flipped position, or -1 for none.
    static constexpr std::array<int, 8> syndrome_table()
    {
        constexpr auto h = parity_check();
        std::array<int, 8> table{-1, -1, -1, -1, -1, -1, -1, -1};
        for (std::size_t pos = 0; pos < 7; ++pos) {
            const int syndrome = (h[0][pos] << 2) | (h[1][pos] << 1) | h[2][pos];
            table[syndrome] = static_cast<int>(pos);
        }
        return table;
    }
};

inline Bits hamming74_encode(std::span<const std::uint8_t> data)
{
    detail::require(data.size() == 4, "hamming74_encode: expects 4 data bits");
    constexpr auto g = Hamming74Code::generator();
    Bits code(7, 0);
    for (std::size_t i = 0; i < 4; ++i)
        if (data[i] & 1U)
            for (std::size_t j = 0; j < 7; ++j) code[j] ^= g[i][j];
    return code;
}

inline int hamming74_syndrome(std::span<const std::uint8_t> received)
{
    detail::require(received.size() == 7, "hamming74_syndrome: expects 7 bits");
    constexpr auto h = Hamming74Code::parity_check();
    int syndrome = 0;
    for (std::size_t j = 0; j < 3; ++j) {
        std::uint8_t s = 0;
        for (std::size_t i = 0; i < 7; ++i) s ^= static_cast<std::uint8_t>(h[j][i] & received[i]);
        syndrome = (syndrome << 1) | s;
    }
    return syndrome;
}

/// Syndrome lookup, single-error correction, systematic data extraction.
inline Bits hamming74_decode_hard(std::span<const std::uint8_t> received)
{
    detail::require(received.size() == 7, "hamming74_decode: expects 7 bits");
    Bits word(received.begin(), received.end());
    constexpr auto table = Hamming74Code::syndrome_table();
    const int pos = table[hamming74_syndrome(word)];
    if (pos >= 0) word[static_cast<std::size_t>(pos)] ^= 1U;
    return Bits(word.begin(), word.begin() + 4);
}

/// Soft values follow the BPSK map (positive favours bit 0). Returns the data
/// bits of the codeword with maximum correlation.
inline Bits hamming74_decode_soft(std::span<const double> soft)
{
    detail::require(soft.size() == 7, "hamming74_decode: expects 7 soft values");
    double best = -std::numeric_limits<double>::infinity();
    Bits best_data(4, 0);
    for (std::uint8_t d = 0; d < 16; ++d) {
        const Bits data{static_cast<std::uint8_t>((d >> 3) & 1U), static_cast<std::uint8_t>((d >> 2) & 1U),
                        static_cast<std::uint8_t>((d >> 1) & 1U), static_cast<std::uint8_t>(d & 1U)};
        const Bits code = hamming74_encode(data);
        double corr = 0.0;
        for (std::size_t i = 0; i < 7; ++i) corr += (code[i] ? -1.0 : 1.0) * soft[i];
        if (corr > best) {
            best = corr;
            best_data = data;
        }
    }
    return best_data;
}

enum class HammingDecodeMode { HardSyndrome, SoftMl };

// ---------------------------------------------------------------------------
// BPSK / QPSK
// ---------------------------------------------------------------------------

/// 0 -> +1, 1 -> -1 on the real axis.
inline ComplexSignal bpsk_modulate(std::span<const std::uint8_t> bits)
{
    ComplexSignal x(std::vector<double>(2 * bits.size(), 0.0));
    for (std::size_t i = 0; i < bits.size(); ++i) x.samples[2 * i] = bits[i] ? -1.0 : 1.0;
    return x;
}

namespace detail {

inline cdouble tap_for(std::span<const cdouble> csi, std::size_t t)
{
    detail::require(!csi.empty(), "demodulate: coherent detection needs channel state");
    detail::require(csi.size() == 1 || t < csi.size(), "demodulate: need one tap or one tap per symbol");
    return csi.size() == 1 ? csi.front() : csi[t];
}

}  // namespace detail

/// Re(conj(h) y) per symbol; the sufficient statistic for coherent BPSK.
inline std::vector<double> bpsk_soft(const ComplexSignal& y, std::span<const cdouble> csi)
{
    std::vector<double> soft(y.complex_size());
    for (std::size_t t = 0; t < soft.size(); ++t) soft[t] = (std::conj(detail::tap_for(csi, t)) * y.at(t)).real();
    return soft;
}

inline Bits bpsk_demodulate(const ComplexSignal& y, std::span<const cdouble> csi)
{
    const auto soft = bpsk_soft(y, csi);
    Bits bits(soft.size());
    for (std::size_t t = 0; t < soft.size(); ++t) bits[t] = soft[t] < 0.0 ? 1 : 0;
    return bits;
}

inline Bits bpsk_demodulate(const ComplexSignal& y, cdouble h = 1.0)
{
    return bpsk_demodulate(y, std::span<const cdouble>(&h, 1));
}

/// Gray map 00 -> (+1+i), 01 -> (-1+i), 11 -> (-1-i), 10 -> (+1-i), all / sqrt(2).
/// The first bit selects the imaginary sign, the second the real sign.
inline cdouble qpsk_symbol(std::uint8_t b0, std::uint8_t b1)
{
    constexpr double a = 1.0 / std::numbers::sqrt2;
    return {b1 ? -a : a, b0 ? -a : a};
}

inline std::array<cdouble, 4> qpsk_constellation()
{
    return {qpsk_symbol(0, 0), qpsk_symbol(0, 1), qpsk_symbol(1, 0), qpsk_symbol(1, 1)};
}

inline ComplexSignal qpsk_modulate(std::span<const std::uint8_t> bits)
{
    detail::require(bits.size() % 2 == 0, "qpsk_modulate: bit count must be even");
    ComplexSignal x(std::vector<double>(bits.size(), 0.0));
    for (std::size_t t = 0; t < bits.size() / 2; ++t) x.set(t, qpsk_symbol(bits[2 * t], bits[2 * t + 1]));
    return x;
}

inline void qpsk_slice(cdouble z, Bits& out)
{
    out.push_back(z.imag() < 0.0 ? 1 : 0);
    out.push_back(z.real() < 0.0 ? 1 : 0);
}

/// Quadrant decision on conj(h) y.
inline Bits qpsk_demodulate(const ComplexSignal& y, std::span<const cdouble> csi)
{
    Bits bits;
    bits.reserve(2 * y.complex_size());
    for (std::size_t t = 0; t < y.complex_size(); ++t) qpsk_slice(std::conj(detail::tap_for(csi, t)) * y.at(t), bits);
    return bits;
}

inline Bits qpsk_demodulate(const ComplexSignal& y, cdouble h = 1.0)
{
    return qpsk_demodulate(y, std::span<const cdouble>(&h, 1));
}

// ---------------------------------------------------------------------------
// 2x2 spatial multiplexing detectors
// ---------------------------------------------------------------------------

struct QpskPairDecision {
    std::uint8_t pattern = 0;  // 4 bits: antenna 1 (b0 b1), antenna 2 (b2 b3), big-endian
    std::array<cdouble, 2> symbols{};
    double metric = 0.0;

    Bits bits() const
    {
        return {static_cast<std::uint8_t>((pattern >> 3) & 1U), static_cast<std::uint8_t>((pattern >> 2) & 1U),
                static_cast<std::uint8_t>((pattern >> 1) & 1U), static_cast<std::uint8_t>(pattern & 1U)};
    }
};

inline std::array<cdouble, 2> qpsk_pair(std::uint8_t pattern)
{
    return {qpsk_symbol((pattern >> 3) & 1U, (pattern >> 2) & 1U), qpsk_symbol((pattern >> 1) & 1U, pattern & 1U)};
}

namespace detail {

inline void check_2x2(const ComplexSignal& y, const ChannelRealization& h)
{
    detail::require(h.rx == 2 && h.tx == 2, "mimo detection: expects a 2x2 channel");
    detail::require(y.complex_size() == 2, "mimo detection: expects one complex sample per receive antenna");
}

}  // namespace detail

/// Exhaustive search of the 16 QPSK pairs for min ||y - H x||^2. Ties go to
/// the smallest bit pattern.
inline QpskPairDecision mimo_ml_detect(const ComplexSignal& y, const ChannelRealization& h)
{
    detail::check_2x2(y, h);
    QpskPairDecision best;
    best.metric = std::numeric_limits<double>::infinity();
    for (std::uint8_t pattern = 0; pattern < 16; ++pattern) {
        const auto x = qpsk_pair(pattern);
        double metric = 0.0;
        for (std::size_t i = 0; i < 2; ++i) metric += std::norm(y.at(i) - (h(i, 0) * x[0] + h(i, 1) * x[1]));
        if (metric < best.metric) best = {pattern, x, metric};
    }
    return best;
}

inline constexpr double kZfConditionLimit = 1e8;

/// 2-norm condition number of a 2x2 complex matrix.
inline double condition_number(const ChannelRealization& h)
{
    // Eigenvalues of H^H H from its trace and determinant.
    const double a = std::norm(h(0, 0)) + std::norm(h(1, 0));
    const double d = std::norm(h(0, 1)) + std::norm(h(1, 1));
    const cdouble b = std::conj(h(0, 0)) * h(0, 1) + std::conj(h(1, 0)) * h(1, 1);
    const double half_trace = 0.5 * (a + d);
    const double det = std::norm(h(0, 0) * h(1, 1) - h(0, 1) * h(1, 0));
    const double disc = std::sqrt(std::max(0.0, 0.25 * (a - d) * (a - d) + std::norm(b)));
    const double lmax = half_trace + disc;
    if (det <= 0.0) return std::numeric_limits<double>::infinity();
    const double lmin = det / lmax;
    return std::sqrt(lmax / lmin);
}

/// Per-stream QPSK slicing of H^-1 y. Throws DetectionFailure when H is
/// numerically singular.
inline QpskPairDecision mimo_zf_detect(const ComplexSignal& y, const ChannelRealization& h)
{
    detail::check_2x2(y, h);
    if (!(condition_number(h) <= kZfConditionLimit))
        throw DetectionFailure("mimo_zf_detect: channel condition number exceeds 1e8");
    const cdouble det = h(0, 0) * h(1, 1) - h(0, 1) * h(1, 0);
    const cdouble z0 = (h(1, 1) * y.at(0) - h(0, 1) * y.at(1)) / det;
    const cdouble z1 = (-h(1, 0) * y.at(0) + h(0, 0) * y.at(1)) / det;
    Bits bits;
    qpsk_slice(z0, bits);
    qpsk_slice(z1, bits);
    QpskPairDecision out;
    out.pattern = static_cast<std::uint8_t>((bits[0] << 3) | (bits[1] << 2) | (bits[2] << 1) | bits[3]);
    out.symbols = qpsk_pair(out.pattern);
    for (std::size_t i = 0; i < 2; ++i)
        out.metric += std::norm(y.at(i) - (h(i, 0) * out.symbols[0] + h(i, 1) * out.symbols[1]));
    return out;
}

// ---------------------------------------------------------------------------
// Closed-form references
// ---------------------------------------------------------------------------

/// Gaussian tail probability.
inline double q_function(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

/// Q(sqrt(2 Eb/N0))
inline double theory_ber_bpsk_awgn(double ebn0_db) { return q_function(std::sqrt(2.0 * db_to_linear(ebn0_db))); }

/// Coherent BPSK with unit-mean-square Rayleigh fading: 0.5 (1 - sqrt(g / (1 + g))).
inline double theory_ber_bpsk_rayleigh(double ebn0_db)
{
    const double g = db_to_linear(ebn0_db);
    return 0.5 * (1.0 - std::sqrt(g / (1.0 + g)));
}

/// Block error rate of hard-decision Hamming(7,4) over AWGN: a block fails
/// when two or more of its 7 coded bits are in error.
inline double theory_bler_hamming74_hard_awgn(double ebn0_db)
{
    const double p = q_function(std::sqrt(2.0 * (4.0 / 7.0) * db_to_linear(ebn0_db)));
    return 1.0 - std::pow(1.0 - p, 7) - 7.0 * p * std::pow(1.0 - p, 6);
}

}  // namespace aecomm
