#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <memory>

#include "test_support.hpp"

using namespace aecomm;

namespace {

// Independent parameter-count oracle: walk the layer widths of the layout.
std::size_t shape_walk(const std::vector<std::size_t>& widths_enc, const std::vector<std::size_t>& widths_dec,
                       std::size_t heads, std::size_t head_width)
{
    std::size_t total = 0;
    for (std::size_t i = 0; i + 1 < widths_enc.size(); ++i) total += widths_enc[i] * widths_enc[i + 1] + widths_enc[i + 1];
    for (std::size_t i = 0; i + 1 < widths_dec.size(); ++i) total += widths_dec[i] * widths_dec[i + 1] + widths_dec[i + 1];
    total += heads * (widths_dec.back() * head_width + head_width);
    return total;
}

TrainConfig short_schedule(std::uint64_t seed, std::size_t iterations)
{
    TrainConfig tc;
    tc.seed = seed;
    tc.iterations = iterations;
    tc.channel = ChannelMode::AwgnOnly;
    return tc;
}

}  // namespace

TEST(OneHot, Examples)
{
    EXPECT_EQ(one_hot(0, 4), (std::vector<double>{1, 0, 0, 0}));
    const auto v = one_hot(15, 16);
    EXPECT_EQ(v.back(), 1.0);
    for (std::size_t s = 0; s < 16; ++s) {
        const auto e = one_hot(s, 16);
        EXPECT_EQ(std::accumulate(e.begin(), e.end(), 0.0), 1.0);
    }
    EXPECT_THROW(one_hot(4, 4), ContractViolation);
}

TEST(Bits, MessageConversion)
{
    EXPECT_EQ(message_to_bits(0, 4), (std::vector<std::uint8_t>{0, 0, 0, 0}));
    EXPECT_EQ(message_to_bits(5, 4), (std::vector<std::uint8_t>{0, 1, 0, 1}));
    for (std::size_t s = 0; s < 16; ++s) EXPECT_EQ(bits_to_message(message_to_bits(s, 4)), s);
    EXPECT_THROW(message_to_bits(16, 4), ContractViolation);
}

TEST(Build, SisoLayoutWidths)
{
    const auto model = build_siso_autoencoder(SystemConfig{}, TrainConfig{});
    const auto& a = model.net.arch;
    EXPECT_EQ(a.input_width, 16u);
    EXPECT_EQ(a.encoder_hidden, (std::vector<std::size_t>{32}));
    EXPECT_EQ(a.signal_width(), 14u);
    EXPECT_EQ(a.received_width(), 14u);
    EXPECT_EQ(a.receiver_input_width(), 16u);
    EXPECT_EQ(a.decoder_hidden, (std::vector<std::size_t>{32}));
    EXPECT_EQ(a.head_width, 16u);
    EXPECT_EQ(model.net.params.parameter_count(), shape_walk({16, 32, 14}, {16, 32}, 1, 16));
}

TEST(Build, WithoutCsiReceiverSeesOnlySignal)
{
    TrainConfig tc;
    tc.csi = CsiMode::None;
    const auto model = build_siso_autoencoder(SystemConfig{}, tc);
    EXPECT_EQ(model.net.arch.receiver_input_width(), 14u);
    EXPECT_EQ(model.net.params.parameter_count(), shape_walk({16, 32, 14}, {14, 32}, 1, 16));
}

TEST(Build, PerUseFadingWidensCsi)
{
    TrainConfig tc;
    tc.fading = FadingMode::PerUse;
    const auto model = build_siso_autoencoder(SystemConfig{}, tc);
    EXPECT_EQ(model.net.arch.receiver_input_width(), 28u);
}

TEST(Build, SameSeedSameInit)
{
    TrainConfig tc;
    tc.seed = 99;
    EXPECT_EQ(build_siso_autoencoder(SystemConfig{}, tc).net.params,
              build_siso_autoencoder(SystemConfig{}, tc).net.params);
    tc.seed = 100;
    EXPECT_NE(build_siso_autoencoder(SystemConfig{}, TrainConfig{}).net.params,
              build_siso_autoencoder(SystemConfig{}, tc).net.params);
}

TEST(Build, InvalidConfigsThrow)
{
    EXPECT_THROW(build_siso_autoencoder(SystemConfig{7, 4, 2, 2}, TrainConfig{}), ContractViolation);
    EXPECT_THROW(build_mimo_autoencoder(SystemConfig{1, 2, 1, 1}, MimoTrainConfig{}), ContractViolation);
    SystemConfig bad{0, 4, 1, 1};
    EXPECT_THROW(build_siso_autoencoder(bad, TrainConfig{}), ContractViolation);
}

TEST(Build, MimoStructure)
{
    const SystemConfig cfg{1, 2, 2, 2};
    const auto model = build_mimo_autoencoder(cfg, MimoTrainConfig{});
    const auto& a = model.net.arch;
    EXPECT_EQ(a.input_width, 8u);
    EXPECT_EQ(a.signal_width(), 4u);
    EXPECT_EQ(a.head_count, 2u);
    EXPECT_EQ(a.head_width, 4u);

    Rng rng(1);
    for (std::size_t s1 = 0; s1 < 4; ++s1)
        for (std::size_t s2 = 0; s2 < 4; ++s2) {
            const std::size_t m[2] = {s1, s2};
            const auto x = transmit(model, m);
            EXPECT_NEAR(x.energy(), 4.0, 1e-12);
            const auto trace =
                forward(model.net, m, ChannelMode::Rayleigh, FadingMode::Block, autoencoder_noise(cfg, 10.0), rng);
            for (std::size_t h = 0; h < 2; ++h) {
                const auto p = trace.head(h, 4);
                EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
            }
        }
}

TEST(Transmit, EnergyAndDeterminism)
{
    const auto model = build_siso_autoencoder(SystemConfig{}, TrainConfig{});
    for (std::size_t s = 0; s < 16; ++s) {
        const auto x = transmit(model, s);
        EXPECT_NEAR(x.energy(), 14.0, 1e-12);
        EXPECT_EQ(x.samples, transmit(model, s).samples);
    }
    EXPECT_THROW(transmit(model, 16), ContractViolation);
}

TEST(Decode, TieGoesToLowestIndex)
{
    EXPECT_EQ(argmax(std::vector<double>{0.25, 0.25, 0.25, 0.25}), 0u);
    EXPECT_EQ(argmax(std::vector<double>{0.1, 0.4, 0.1, 0.4}), 1u);

    // Zero head weights and biases make every message exactly tied.
    auto model = build_siso_autoencoder(SystemConfig{}, TrainConfig{});
    auto& head = model.net.params.layers.back();
    std::fill(head.weights.begin(), head.weights.end(), 0.0);
    std::fill(head.bias.begin(), head.bias.end(), 0.0);
    const auto d = decode(model, transmit(model, 7), ChannelRealization::scalar(1.0));
    EXPECT_EQ(d.messages.front(), 0u);
}

TEST(Decode, CsiModeMismatchThrows)
{
    const auto genie = build_siso_autoencoder(SystemConfig{}, TrainConfig{});
    const auto y = transmit(genie, 3);
    EXPECT_THROW(decode(genie, y), ContractViolation);
    TrainConfig tc;
    tc.csi = CsiMode::None;
    const auto blind = build_siso_autoencoder(SystemConfig{}, tc);
    EXPECT_THROW(decode(blind, y, ChannelRealization::scalar(1.0)), ContractViolation);
    EXPECT_NO_THROW(decode(blind, y));
}

TEST(Decode, UntrainedModelGuesses)
{
    const auto model = build_siso_autoencoder(SystemConfig{}, TrainConfig{});
    Rng rng(5);
    const auto noise = autoencoder_noise(model.system, 6.0);
    const int trials = 20000;
    int errors = 0;
    for (int t = 0; t < trials; ++t) {
        const std::size_t s = rng.below(16);
        const auto h = sample_rayleigh_tap(rng);
        auto y = apply_channel(ChannelRealization::scalar(h), transmit(model, s));
        y = add_awgn(y, noise, rng);
        errors += decode(model, y, ChannelRealization::scalar(h)).messages.front() != s;
    }
    EXPECT_NEAR(static_cast<double>(errors) / trials, 15.0 / 16.0, 0.05);
}

TEST(WeightedLoss, Arithmetic)
{
    EXPECT_EQ(weighted_loss(2.0, 4.0, 0.5), 3.0);
    EXPECT_EQ(weighted_loss(2.0, 4.0, 1.0), 2.0);
    EXPECT_EQ(weighted_loss(2.0, 4.0, 0.0), 4.0);
    for (double g : {0.0, 0.25, 0.5, 0.75, 1.0}) EXPECT_EQ(weighted_loss(2.0, 4.0, g), weighted_loss(4.0, 2.0, 1.0 - g));
    EXPECT_THROW(weighted_loss(1.0, 1.0, 1.5), ContractViolation);
}

TEST(WeightedLoss, GammaOneSilencesSecondHead)
{
    const SystemConfig cfg{1, 2, 2, 2};
    const auto model = build_mimo_autoencoder(cfg, MimoTrainConfig{});
    Rng rng(3);
    const std::size_t m[2] = {1, 2};
    const auto trace = forward(model.net, m, ChannelMode::Rayleigh, FadingMode::Block, autoencoder_noise(cfg, 10.0), rng);
    const std::vector<double> w{1.0, 0.0};
    const auto g = backward(model.net, trace, m, w);
    const auto& head2 = g.layers.back();
    for (double v : head2.weights) EXPECT_EQ(v, 0.0);
    for (double v : head2.bias) EXPECT_EQ(v, 0.0);

    // Every other gradient equals what a head-1-only loss gives.
    const double l1 = cross_entropy(trace.head(0, 4), 1).value;
    EXPECT_EQ(sample_loss(trace, 4, w), l1);
}

TEST(Training, FirstLossNearLogM)
{
    auto tc = short_schedule(3, 1);
    tc.channel = ChannelMode::Rayleigh;
    Rng rng(tc.seed);
    const auto model = train_siso(build_siso_autoencoder(SystemConfig{}, tc), tc, rng);
    ASSERT_EQ(model.loss_history.size(), 1u);
    EXPECT_NEAR(model.loss_history.front() / std::log(16.0), 1.0, 0.15);
}

TEST(Training, SameSeedBitIdentical)
{
    const auto tc = short_schedule(4, 200);
    Rng r1(tc.seed), r2(tc.seed);
    const auto a = train_siso(build_siso_autoencoder(SystemConfig{}, tc), tc, r1);
    const auto b = train_siso(build_siso_autoencoder(SystemConfig{}, tc), tc, r2);
    EXPECT_EQ(a.net.params, b.net.params);
    EXPECT_EQ(a.loss_history, b.loss_history);
}

TEST(Training, MimoReducesLoss)
{
    const SystemConfig cfg{1, 2, 2, 2};
    MimoTrainConfig tc;
    tc.iterations = 300;
    tc.learning_rate = 0.1;
    Rng rng(tc.seed);
    const auto model = train_mimo(build_mimo_autoencoder(cfg, tc), tc, rng);
    EXPECT_TRUE(model.trained);
    EXPECT_LT(model.final_loss, model.loss_history.front());
}

// One AWGN training run at the default schedule, then every check that
// needs a trained model.
TEST(Training, DefaultScheduleAwgn)
{
    auto tc = short_schedule(1, 10000);
    Rng rng(tc.seed);
    const auto model = train_siso(build_siso_autoencoder(SystemConfig{}, tc), tc, rng);
    EXPECT_LT(model.final_loss, 0.1);

    // Loss trends down: last window mean below first window mean.
    const auto& h = model.loss_history;
    const double first = std::accumulate(h.begin(), h.begin() + 500, 0.0) / 500.0;
    const double last = std::accumulate(h.end() - 500, h.end(), 0.0) / 500.0;
    EXPECT_LT(last, first);

    double dmin = INFINITY;
    for (std::size_t a = 0; a < 16; ++a)
        for (std::size_t b = a + 1; b < 16; ++b) {
            const auto xa = transmit(model, a).samples, xb = transmit(model, b).samples;
            double d = 0.0;
            for (std::size_t i = 0; i < xa.size(); ++i) d += (xa[i] - xb[i]) * (xa[i] - xb[i]);
            dmin = std::min(dmin, std::sqrt(d));
        }
    EXPECT_GT(dmin, 0.1);

    for (std::size_t s = 0; s < 16; ++s)
        EXPECT_EQ(decode(model, transmit(model, s), ChannelRealization::scalar(1.0)).messages.front(), s);

    const auto path = std::filesystem::temp_directory_path() / "aecomm_test_model.json";
    save_model(model, path);
    const auto loaded = load_model(path);
    EXPECT_EQ(loaded.net.params, model.net.params);
    EXPECT_EQ(loaded.system, model.system);
    EXPECT_EQ(loaded.final_loss, model.final_loss);
    for (std::size_t s = 0; s < 16; ++s) EXPECT_EQ(transmit(loaded, s).samples, transmit(model, s).samples);
    std::filesystem::remove(path);

    const auto link = make_learned_link(std::make_shared<const TrainedModel>(model), ChannelMode::AwgnOnly);
    const auto p = monte_carlo_ber(link, 12.0, StopRule{100'000, 100'000}, 7);
    EXPECT_GE(p.bits, 100'000u);
    EXPECT_LT(p.ber, 0.01);
}

TEST(Checkpoint, RejectsForeignFiles)
{
    const auto path = std::filesystem::temp_directory_path() / "aecomm_not_a_model.json";
    {
        std::ofstream out(path);
        out << "{\"format\": \"other\"}";
    }
    EXPECT_THROW(load_model(path), std::runtime_error);
    std::filesystem::remove(path);
    EXPECT_THROW(load_model(path), std::runtime_error);
}
