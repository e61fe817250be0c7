#pragma once

// SISO and 2x2 MIMO channel autoencoders: architecture builders, end-to-end
// SGD training through the stochastic channel, and transmit/decode inference.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aecomm/channel.hpp"
#include "aecomm/errors.hpp"
#include "aecomm/nn.hpp"
#include "aecomm/rng.hpp"

namespace aecomm {

enum class CsiMode { Genie, None };

inline std::string to_string(CsiMode mode) { return mode == CsiMode::Genie ? "genie" : "none"; }
inline CsiMode parse_csi_mode(const std::string& text)
{
    if (text == "genie") return CsiMode::Genie;
    if (text == "none") return CsiMode::None;
    throw ContractViolation("unknown CSI mode '" + text + "'");
}

/// (n, k) system: one of M = 2^k messages per stream over n channel uses.
struct SystemConfig {
    std::size_t n = 7;
    std::size_t k = 4;
    std::size_t tx_antennas = 1;
    std::size_t rx_antennas = 1;

    std::size_t messages() const { return std::size_t{1} << k; }
    double rate() const { return static_cast<double>(k) / static_cast<double>(n); }
    std::size_t streams() const { return tx_antennas; }
    bool is_siso() const { return tx_antennas == 1 && rx_antennas == 1; }

    /// Information bits per unit of transmitted energy. The encoder output has
    /// ||x||^2 = 2 n m_t, i.e. unit power per real dimension, and carries
    /// k bits per stream. This is the rate the noise variance is derived from.
    double energy_rate() const
    {
        return static_cast<double>(k * streams()) / static_cast<double>(2 * n * tx_antennas);
    }

    void validate() const
    {
        detail::require(n >= 1, "SystemConfig: n must be >= 1");
        detail::require(k >= 1 && k <= 16, "SystemConfig: k must be in [1, 16]");
        detail::require(tx_antennas >= 1 && rx_antennas >= 1, "SystemConfig: antenna counts must be >= 1");
    }

    bool operator==(const SystemConfig&) const = default;
};

struct TrainConfig {
    std::size_t batch_size = 256;
    double learning_rate = 0.01;
    double train_ebn0_db = 6.0;
    std::size_t iterations = 10000;
    std::uint64_t seed = 1;
    CsiMode csi = CsiMode::Genie;
    FadingMode fading = FadingMode::Block;
    ChannelMode channel = ChannelMode::Rayleigh;
    /// Hidden widths; empty means the default layout (2M for SISO, 4M for MIMO).
    std::vector<std::size_t> encoder_hidden;
    std::vector<std::size_t> decoder_hidden;

    void validate() const
    {
        detail::require(batch_size >= 1, "TrainConfig: batch size must be >= 1");
        detail::require(learning_rate > 0.0 && std::isfinite(learning_rate), "TrainConfig: learning rate must be > 0");
        detail::require(iterations >= 1, "TrainConfig: iterations must be >= 1");
    }
};

/// Two-head training: loss = gamma * L1 + (1 - gamma) * L2.
struct MimoTrainConfig : TrainConfig {
    double gamma = 0.5;

    MimoTrainConfig() { train_ebn0_db = 10.0; }

    void validate() const
    {
        TrainConfig::validate();
        detail::require(gamma >= 0.0 && gamma <= 1.0, "MimoTrainConfig: gamma must lie in [0, 1]");
    }
};

struct TrainedModel {
    SystemConfig system;
    Network net;
    TrainConfig train;
    double gamma = 1.0;  // head-1 weight; only meaningful with two heads
    bool trained = false;
    double final_loss = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> loss_history;

    CsiMode csi() const { return net.arch.receiver_csi ? CsiMode::Genie : CsiMode::None; }
    std::vector<double> head_weights() const
    {
        if (net.arch.head_count == 1) return {1.0};
        return {gamma, 1.0 - gamma};
    }
};

inline std::vector<double> one_hot(std::size_t s, std::size_t M)
{
    detail::require(s < M, "one_hot: message " + std::to_string(s) + " out of range for M = " + std::to_string(M));
    std::vector<double> v(M, 0.0);
    v[s] = 1.0;
    return v;
}

/// Big-endian k-bit expansion: s = 5, k = 4 -> (0, 1, 0, 1).
inline std::vector<std::uint8_t> message_to_bits(std::size_t s, std::size_t k)
{
    detail::require(k < 64 && s < (std::size_t{1} << k), "message_to_bits: message out of range");
    std::vector<std::uint8_t> bits(k);
    for (std::size_t i = 0; i < k; ++i) bits[i] = static_cast<std::uint8_t>((s >> (k - 1 - i)) & 1U);
    return bits;
}

inline std::size_t bits_to_message(std::span<const std::uint8_t> bits)
{
    detail::require(bits.size() < 64, "bits_to_message: too many bits");
    std::size_t s = 0;
    for (auto b : bits) {
        detail::require(b <= 1, "bits_to_message: entries must be 0 or 1");
        s = (s << 1) | b;
    }
    return s;
}

/// gamma * l1 + (1 - gamma) * l2
inline double weighted_loss(double l1, double l2, double gamma)
{
    detail::require(gamma >= 0.0 && gamma <= 1.0, "weighted_loss: gamma must lie in [0, 1]");
    return gamma * l1 + (1.0 - gamma) * l2;
}

/// Lowest index wins ties.
inline std::size_t argmax(std::span<const double> p)
{
    detail::require(!p.empty(), "argmax: empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < p.size(); ++i)
        if (p[i] > p[best]) best = i;
    return best;
}

/// Dense layout: input -> ReLU(width_hidden) -> linear(2n m_t) -> normalize
/// -> channel -> noise -> [CSI] -> ReLU(width_hidden) -> softmax head(s) of width M.
/// SISO uses width_hidden = 2M, MIMO uses 4M with two one-hot inputs.
inline Architecture autoencoder_architecture(const SystemConfig& cfg, CsiMode csi, FadingMode fading,
                                             const std::vector<std::size_t>& encoder_hidden = {},
                                             const std::vector<std::size_t>& decoder_hidden = {})
{
    cfg.validate();
    const std::size_t M = cfg.messages();
    const std::size_t hidden = cfg.is_siso() ? 2 * M : 4 * M;
    Architecture arch;
    arch.input_width = M * cfg.streams();
    arch.encoder_hidden = encoder_hidden.empty() ? std::vector<std::size_t>{hidden} : encoder_hidden;
    arch.channel_uses = cfg.n;
    arch.tx_antennas = cfg.tx_antennas;
    arch.rx_antennas = cfg.rx_antennas;
    arch.receiver_csi = csi == CsiMode::Genie;
    arch.csi_realizations = fading == FadingMode::Block ? 1 : cfg.n;
    arch.decoder_hidden = decoder_hidden.empty() ? std::vector<std::size_t>{hidden} : decoder_hidden;
    arch.head_count = cfg.streams();
    arch.head_width = M;
    arch.validate();
    return arch;
}

inline TrainedModel build_siso_autoencoder(const SystemConfig& cfg, const TrainConfig& train)
{
    detail::require(cfg.is_siso(), "build_siso_autoencoder: SISO needs one transmit and one receive antenna");
    train.validate();
    Rng init(derive_seed(train.seed, {0x1417}));
    TrainedModel model;
    model.system = cfg;
    model.train = train;
    model.net = make_network(autoencoder_architecture(cfg, train.csi, train.fading, train.encoder_hidden, train.decoder_hidden), init);
    return model;
}

inline TrainedModel build_mimo_autoencoder(const SystemConfig& cfg, const MimoTrainConfig& train)
{
    detail::require(cfg.tx_antennas == 2 && cfg.rx_antennas == 2, "build_mimo_autoencoder: expects a 2x2 system");
    train.validate();
    Rng init(derive_seed(train.seed, {0x1417}));
    TrainedModel model;
    model.system = cfg;
    model.train = train;
    model.gamma = train.gamma;
    model.net = make_network(autoencoder_architecture(cfg, train.csi, train.fading, train.encoder_hidden, train.decoder_hidden), init);
    return model;
}

namespace detail {

inline void check_messages(const TrainedModel& model, std::span<const std::size_t> messages)
{
    detail::require(messages.size() == model.net.arch.head_count,
                    "expected " + std::to_string(model.net.arch.head_count) + " message(s)");
    for (auto s : messages)
        detail::require(s < model.system.messages(), "message " + std::to_string(s) + " out of range");
}

}  // namespace detail

/// Encoder output for one message (SISO) or message pair (MIMO); ||x||^2 = 2 n m_t.
inline ComplexSignal transmit(const TrainedModel& model, std::span<const std::size_t> messages)
{
    detail::check_messages(model, messages);
    return ComplexSignal(encode_signal(model.net, one_hot_concat(messages, model.net.arch.head_width)));
}

inline ComplexSignal transmit(const TrainedModel& model, std::size_t s)
{
    return transmit(model, std::span<const std::size_t>(&s, 1));
}

struct Decision {
    std::vector<std::size_t> messages;
    std::vector<std::vector<double>> probabilities;
};

/// Argmax of each softmax head. `csi` must be given exactly when the model
/// was built with a genie-CSI receiver.
inline Decision decode(const TrainedModel& model, const ComplexSignal& y,
                       const std::optional<std::vector<ChannelRealization>>& csi = std::nullopt)
{
    const auto& arch = model.net.arch;
    detail::require(y.samples.size() == arch.received_width(), "decode: received signal width mismatch");
    detail::require(csi.has_value() == arch.receiver_csi,
                    arch.receiver_csi ? "decode: genie-CSI model needs channel state"
                                      : "decode: model has no CSI input but channel state was given");
    const auto features = csi ? csi_features(arch, *csi) : std::vector<double>{};
    const auto probs = decode_signal(model.net, y.samples, features);
    Decision d;
    for (std::size_t h = 0; h < arch.head_count; ++h) {
        std::vector<double> head(probs.begin() + static_cast<std::ptrdiff_t>(h * arch.head_width),
                                 probs.begin() + static_cast<std::ptrdiff_t>((h + 1) * arch.head_width));
        d.messages.push_back(argmax(head));
        d.probabilities.push_back(std::move(head));
    }
    return d;
}

inline Decision decode(const TrainedModel& model, const ComplexSignal& y, const ChannelRealization& csi)
{
    return decode(model, y, std::vector<ChannelRealization>{csi});
}

/// Noise level the learned link sees at a given Eb/N0.
inline NoiseSpec autoencoder_noise(const SystemConfig& cfg, double ebn0_db)
{
    return make_noise_spec(ebn0_db, cfg.energy_rate());
}

/// One fresh mini-batch: uniform messages, fresh taps and noise.
inline std::vector<FrozenSample> sample_batch(const TrainedModel& model, std::size_t batch_size, ChannelMode channel,
                                              FadingMode fading, double beta, Rng& rng)
{
    std::vector<FrozenSample> batch(batch_size);
    for (auto& sample : batch) {
        sample.messages.resize(model.net.arch.head_count);
        for (auto& s : sample.messages) s = rng.below(model.system.messages());
        sample.draw = sample_draw(model.net.arch, channel, fading, beta, rng);
    }
    return batch;
}

namespace detail {

inline TrainedModel train_impl(TrainedModel model, const TrainConfig& train, Rng& rng)
{
    train.validate();
    const auto weights = model.head_weights();
    const double beta = autoencoder_noise(model.system, train.train_ebn0_db).beta;
    const double guard = 10.0 * std::log(static_cast<double>(model.system.messages()));
    model.loss_history.reserve(model.loss_history.size() + train.iterations);

    for (std::size_t it = 0; it < train.iterations; ++it) {
        const auto batch = sample_batch(model, train.batch_size, train.channel, train.fading, beta, rng);
        GradientSet grads = zeros_like(model.net.params);
        double loss = 0.0;
        const double scale = 1.0 / static_cast<double>(batch.size());
        for (const auto& sample : batch) {
            const auto trace = forward(model.net, sample.messages, sample.draw);
            loss += sample_loss(trace, model.net.arch.head_width, weights) * scale;
            backward_accumulate(model.net, trace, sample.messages, weights, grads, scale);
        }
        if (!std::isfinite(loss) || loss > guard)
            throw TrainingDiverged("training diverged at iteration " + std::to_string(it) +
                                   ": batch loss = " + std::to_string(loss) + " (guard " + std::to_string(guard) +
                                   "); try a smaller learning rate");
        model.loss_history.push_back(loss);
        sgd_update(model.net, grads, train.learning_rate);
    }
    model.train = train;
    model.trained = true;
    model.final_loss = model.loss_history.back();
    return model;
}

}  // namespace detail

/// Mini-batch SGD on the mean cross-entropy, with channel and noise drawn
/// fresh for every batch at the training Eb/N0.
inline TrainedModel train_siso(TrainedModel model, const TrainConfig& train, Rng& rng)
{
    detail::require(model.net.arch.head_count == 1, "train_siso: model has more than one head");
    model.gamma = 1.0;
    return detail::train_impl(std::move(model), train, rng);
}

inline TrainedModel train_mimo(TrainedModel model, const MimoTrainConfig& train, Rng& rng)
{
    detail::require(model.net.arch.head_count == 2, "train_mimo: model needs two heads");
    train.validate();
    model.gamma = train.gamma;
    return detail::train_impl(std::move(model), train, rng);
}

}  // namespace aecomm
