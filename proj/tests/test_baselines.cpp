#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"

using namespace aecomm;

namespace {

// GF(2) oracle: c = d G with G = [I4 | P] written out by hand.
Bits oracle_encode(const Bits& d)
{
    const int G[4][7] = {{1, 0, 0, 0, 1, 1, 0}, {0, 1, 0, 0, 1, 0, 1}, {0, 0, 1, 0, 0, 1, 1}, {0, 0, 0, 1, 1, 1, 1}};
    Bits c(7, 0);
    for (int j = 0; j < 7; ++j) {
        int acc = 0;
        for (int i = 0; i < 4; ++i) acc += d[i] * G[i][j];
        c[j] = static_cast<std::uint8_t>(acc % 2);
    }
    return c;
}

Bits word(unsigned value, int width)
{
    Bits b(width);
    for (int i = 0; i < width; ++i) b[i] = (value >> (width - 1 - i)) & 1U;
    return b;
}

int distance(const Bits& a, const Bits& b)
{
    int d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
    return d;
}

// Second, independent 2x2 QPSK ML search with its own constellation table.
std::pair<int, double> brute_force_ml(const ComplexSignal& y, const ChannelRealization& h)
{
    const double a = 1.0 / std::sqrt(2.0);
    const cdouble table[4] = {{a, a}, {-a, a}, {a, -a}, {-a, -a}};  // index = 2*b0 + b1
    int best = -1;
    double best_metric = INFINITY;
    for (int p = 0; p < 16; ++p) {
        const cdouble x0 = table[(p >> 2) & 3], x1 = table[p & 3];
        const cdouble r0 = y.at(0) - (h(0, 0) * x0 + h(0, 1) * x1);
        const cdouble r1 = y.at(1) - (h(1, 0) * x0 + h(1, 1) * x1);
        const double metric = std::norm(r0) + std::norm(r1);
        if (metric < best_metric) {
            best_metric = metric;
            best = p;
        }
    }
    return {best, best_metric};
}

}  // namespace

TEST(Hamming, GeneratorAndParityCheckAreOrthogonal)
{
    constexpr auto G = Hamming74Code::generator();
    constexpr auto H = Hamming74Code::parity_check();
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 3; ++j) {
            int acc = 0;
            for (int c = 0; c < 7; ++c) acc += G[i][c] * H[j][c];
            EXPECT_EQ(acc % 2, 0);
        }
}

TEST(Hamming, EncodeMatchesOracle)
{
    EXPECT_EQ(hamming74_encode(Bits{0, 0, 0, 0}), Bits(7, 0));
    for (unsigned d = 0; d < 16; ++d) EXPECT_EQ(hamming74_encode(word(d, 4)), oracle_encode(word(d, 4)));
    EXPECT_EQ(hamming74_encode(Bits{1, 0, 1, 1}), oracle_encode(Bits{1, 0, 1, 1}));
    EXPECT_THROW(hamming74_encode(Bits{1, 0, 1}), ContractViolation);
}

TEST(Hamming, MinimumDistanceIsThree)
{
    int dmin = 7;
    for (unsigned a = 0; a < 16; ++a)
        for (unsigned b = a + 1; b < 16; ++b)
            dmin = std::min(dmin, distance(hamming74_encode(word(a, 4)), hamming74_encode(word(b, 4))));
    EXPECT_EQ(dmin, 3);
}

TEST(Hamming, RoundtripAndSingleFlips)
{
    int corrected = 0;
    for (unsigned d = 0; d < 16; ++d) {
        const Bits data = word(d, 4);
        const Bits code = hamming74_encode(data);
        EXPECT_EQ(hamming74_syndrome(code), 0);
        EXPECT_EQ(hamming74_decode_hard(code), data);
        for (int pos = 0; pos < 7; ++pos) {
            Bits r = code;
            r[pos] ^= 1U;
            corrected += hamming74_decode_hard(r) == data;
        }
    }
    EXPECT_EQ(corrected, 112);
}

TEST(Hamming, SomeDoubleFlipsFail)
{
    int failures = 0;
    for (unsigned d = 0; d < 16; ++d) {
        const Bits data = word(d, 4);
        const Bits code = hamming74_encode(data);
        for (int i = 0; i < 7; ++i)
            for (int j = i + 1; j < 7; ++j) {
                Bits r = code;
                r[i] ^= 1U;
                r[j] ^= 1U;
                failures += hamming74_decode_hard(r) != data;
            }
    }
    EXPECT_GT(failures, 0);
}

TEST(Hamming, SoftDecodingPicksNearestCodeword)
{
    for (unsigned d = 0; d < 16; ++d) {
        const Bits data = word(d, 4);
        auto soft = bpsk_modulate(hamming74_encode(data));
        std::vector<double> llr(7);
        for (int t = 0; t < 7; ++t) llr[t] = soft.samples[2 * t];
        EXPECT_EQ(hamming74_decode_soft(llr), data);
        // One strongly flipped but low-confidence position is still recovered.
        llr[3] = -0.1 * llr[3];
        EXPECT_EQ(hamming74_decode_soft(llr), data);
    }
}

TEST(Bpsk, Mapping)
{
    const auto x = bpsk_modulate(Bits{0, 1});
    EXPECT_EQ(x.samples, (std::vector<double>{1, 0, -1, 0}));
    EXPECT_EQ(bpsk_demodulate(ComplexSignal(std::vector<double>{1, 0}), cdouble(-1.0)), Bits{1});
}

TEST(Bpsk, NoiselessRoundtripAnyTap)
{
    Rng rng(1);
    for (int t = 0; t < 200; ++t) {
        const Bits bits{static_cast<std::uint8_t>(rng.below(2)), static_cast<std::uint8_t>(rng.below(2)),
                        static_cast<std::uint8_t>(rng.below(2))};
        const auto h = sample_rayleigh_tap(rng);
        EXPECT_EQ(bpsk_demodulate(apply_channel(ChannelRealization::scalar(h), bpsk_modulate(bits)), h), bits);
    }
}

TEST(Qpsk, ConstellationAndGray)
{
    const auto c = qpsk_constellation();
    for (auto p : c) EXPECT_NEAR(std::norm(p), 1.0, 1e-15);
    // Nearest neighbours are 90 degrees apart and must differ in exactly one bit.
    for (unsigned a = 0; a < 4; ++a)
        for (unsigned b = 0; b < 4; ++b) {
            if (a == b) continue;
            const auto pa = qpsk_symbol((a >> 1) & 1U, a & 1U), pb = qpsk_symbol((b >> 1) & 1U, b & 1U);
            const bool adjacent = std::abs(std::abs(pa - pb) - std::sqrt(2.0)) < 1e-12;
            const int hd = ((a ^ b) & 1U) + (((a ^ b) >> 1) & 1U);
            if (adjacent) EXPECT_EQ(hd, 1);
        }
    EXPECT_NEAR(qpsk_symbol(0, 0).real(), 1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(qpsk_symbol(1, 1).imag(), -1.0 / std::sqrt(2.0), 1e-15);
}

TEST(Qpsk, NoiselessRoundtrip)
{
    Rng rng(2);
    for (int t = 0; t < 200; ++t) {
        Bits bits(6);
        for (auto& b : bits) b = static_cast<std::uint8_t>(rng.below(2));
        const auto h = sample_rayleigh_tap(rng);
        EXPECT_EQ(qpsk_demodulate(apply_channel(ChannelRealization::scalar(h), qpsk_modulate(bits)), h), bits);
    }
    EXPECT_THROW(qpsk_modulate(Bits{1, 0, 1}), ContractViolation);
}

TEST(MimoMl, ZeroNoiseRecoversPair)
{
    Rng rng(3);
    for (int t = 0; t < 500; ++t) {
        const auto h = sample_mimo_channel(rng);
        const std::uint8_t pattern = static_cast<std::uint8_t>(rng.below(16));
        const auto s = qpsk_pair(pattern);
        const auto y = apply_channel(h, ComplexSignal::from_complex(s));
        EXPECT_EQ(mimo_ml_detect(y, h).pattern, pattern);
        EXPECT_EQ(mimo_zf_detect(y, h).pattern, pattern);
    }
}

TEST(MimoMl, MatchesBruteForceOracle)
{
    Rng rng(4);
    for (int t = 0; t < 10'000; ++t) {
        const auto h = sample_mimo_channel(rng);
        std::vector<double> y(4);
        for (auto& v : y) v = 1.5 * rng.gaussian();
        const ComplexSignal ys(y);
        const auto d = mimo_ml_detect(ys, h);
        const auto [pattern, metric] = brute_force_ml(ys, h);
        ASSERT_EQ(d.pattern, pattern);
        ASSERT_NEAR(d.metric, metric, 1e-12);
    }
}

TEST(MimoZf, IdentityReducesToPerAntennaQpsk)
{
    Rng rng(5);
    const auto h = ChannelRealization::identity(2, 2);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> y(4);
        for (auto& v : y) v = rng.gaussian();
        const ComplexSignal ys(y);
        EXPECT_EQ(mimo_zf_detect(ys, h).bits(), qpsk_demodulate(ys));
    }
}

TEST(MimoZf, NearSingularChannelFails)
{
    ChannelRealization h(2, 2, {1.0, 1.0, 1.0, 1.0 + 1e-12});
    EXPECT_GT(condition_number(h), kZfConditionLimit);
    const ComplexSignal y(std::vector<double>{1, 0, 1, 0});
    EXPECT_THROW(mimo_zf_detect(y, h), DetectionFailure);
    ChannelRealization singular(2, 2, {1.0, 2.0, 2.0, 4.0});
    EXPECT_THROW(mimo_zf_detect(y, singular), DetectionFailure);
    EXPECT_NO_THROW(mimo_ml_detect(y, singular));
}

TEST(MimoZf, ConditionNumberOfKnownMatrices)
{
    EXPECT_NEAR(condition_number(ChannelRealization::identity(2, 2)), 1.0, 1e-12);
    EXPECT_NEAR(condition_number(ChannelRealization(2, 2, {3.0, 0.0, 0.0, 0.5})), 6.0, 1e-12);
}

TEST(Theory, BpskAwgn)
{
    EXPECT_NEAR(theory_ber_bpsk_awgn(-200.0), 0.5, 1e-9);
    EXPECT_NEAR(theory_ber_bpsk_awgn(0.0), 0.0786, 1e-4);
    EXPECT_NEAR(theory_ber_bpsk_awgn(4.0), 0.01250, 1e-5);
    for (double db = -5.0; db < 12.0; db += 0.5) EXPECT_GT(theory_ber_bpsk_awgn(db), theory_ber_bpsk_awgn(db + 0.5));
}

TEST(Theory, BpskRayleigh)
{
    EXPECT_NEAR(theory_ber_bpsk_rayleigh(-300.0), 0.5, 1e-12);
    EXPECT_NEAR(theory_ber_bpsk_rayleigh(10.0), 0.02327, 1e-5);
    const double g = std::pow(10.0, 4.0);
    EXPECT_NEAR(theory_ber_bpsk_rayleigh(40.0) * 4.0 * g, 1.0, 0.02);
}

TEST(Theory, HammingBlockErrorRate)
{
    const double p = 0.5 * std::erfc(std::sqrt(2.0 * (4.0 / 7.0) * std::pow(10.0, 0.5)) / std::sqrt(2.0));
    const double expected = 1.0 - std::pow(1.0 - p, 7) - 7.0 * p * std::pow(1.0 - p, 6);
    EXPECT_NEAR(theory_bler_hamming74_hard_awgn(5.0), expected, 1e-15);
}
