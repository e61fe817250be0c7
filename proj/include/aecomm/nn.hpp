#pragma once

// Feed-forward kernel for the channel autoencoder: dense layers, ReLU,
// softmax heads, average-power normalization, the fixed channel multiply and
// the additive noise layer, with exact reverse-mode gradients.
//
// Everything runs in double precision. Stochastic layers (fading taps and
// noise) are sampled before the forward pass and stored in the trace, so a
// pass is a deterministic function of (parameters, messages, draw).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aecomm/channel.hpp"
#include "aecomm/errors.hpp"
#include "aecomm/rng.hpp"

namespace aecomm {

inline constexpr double kProbabilityFloor = 1e-12;

/// Dense layer: weights are (out_width x in_width), row-major.
struct DenseLayerParams {
    std::size_t in_width = 0;
    std::size_t out_width = 0;
    std::vector<double> weights;
    std::vector<double> bias;

    DenseLayerParams() = default;
    DenseLayerParams(std::size_t in, std::size_t out)
        : in_width(in), out_width(out), weights(in * out, 0.0), bias(out, 0.0)
    {
    }
    DenseLayerParams(std::size_t in, std::size_t out, std::vector<double> w, std::vector<double> b)
        : in_width(in), out_width(out), weights(std::move(w)), bias(std::move(b))
    {
        validate();
    }

    double& w(std::size_t row, std::size_t col) { return weights[row * in_width + col]; }
    double w(std::size_t row, std::size_t col) const { return weights[row * in_width + col]; }
    std::size_t parameter_count() const noexcept { return weights.size() + bias.size(); }

    void validate() const
    {
        detail::require(weights.size() == in_width * out_width, "DenseLayerParams: weight shape mismatch");
        detail::require(bias.size() == out_width, "DenseLayerParams: bias shape mismatch");
    }

    bool operator==(const DenseLayerParams&) const = default;
};

/// Ordered parameter set theta of a network.
struct NetworkParameters {
    std::vector<DenseLayerParams> layers;

    std::size_t parameter_count() const
    {
        std::size_t total = 0;
        for (const auto& l : layers) total += l.parameter_count();
        return total;
    }

    /// Visit every scalar parameter in storage order (weights then bias, layer by layer).
    template <typename Fn>
    void for_each(Fn&& fn)
    {
        for (auto& l : layers) {
            for (double& v : l.weights) fn(v);
            for (double& v : l.bias) fn(v);
        }
    }
    template <typename Fn>
    void for_each(Fn&& fn) const
    {
        for (const auto& l : layers) {
            for (double v : l.weights) fn(v);
            for (double v : l.bias) fn(v);
        }
    }

    bool same_shape(const NetworkParameters& other) const
    {
        if (layers.size() != other.layers.size()) return false;
        for (std::size_t i = 0; i < layers.size(); ++i)
            if (layers[i].in_width != other.layers[i].in_width || layers[i].out_width != other.layers[i].out_width)
                return false;
        return true;
    }

    bool operator==(const NetworkParameters&) const = default;
};

/// One gradient entry per parameter, shape-identical to NetworkParameters.
using GradientSet = NetworkParameters;

inline GradientSet zeros_like(const NetworkParameters& params)
{
    GradientSet g;
    g.layers.reserve(params.layers.size());
    for (const auto& l : params.layers) g.layers.emplace_back(l.in_width, l.out_width);
    return g;
}

/// into += scale * g
inline void accumulate(GradientSet& into, const GradientSet& g, double scale = 1.0)
{
    detail::require(into.same_shape(g), "accumulate: gradient shapes differ");
    for (std::size_t i = 0; i < g.layers.size(); ++i) {
        auto& dst = into.layers[i];
        const auto& src = g.layers[i];
        for (std::size_t j = 0; j < src.weights.size(); ++j) dst.weights[j] += scale * src.weights[j];
        for (std::size_t j = 0; j < src.bias.size(); ++j) dst.bias[j] += scale * src.bias[j];
    }
}

// ---------------------------------------------------------------------------
// Elementary layers
// ---------------------------------------------------------------------------

namespace detail {

using ConstRowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

inline ConstRowMajorMap weights_map(const DenseLayerParams& p)
{
    return {p.weights.data(), static_cast<Eigen::Index>(p.out_width), static_cast<Eigen::Index>(p.in_width)};
}

inline Eigen::Map<const Eigen::VectorXd> vector_map(std::span<const double> v)
{
    return {v.data(), static_cast<Eigen::Index>(v.size())};
}

}  // namespace detail

/// W x + b
inline std::vector<double> affine_forward(const DenseLayerParams& params, std::span<const double> x)
{
    detail::require(params.weights.size() == params.in_width * params.out_width &&
                        params.bias.size() == params.out_width,
                    "affine_forward: malformed layer");
    detail::require(x.size() == params.in_width, "affine_forward: input width " + std::to_string(x.size()) +
                                                     " does not match layer width " +
                                                     std::to_string(params.in_width));
    std::vector<double> out(params.out_width);
    Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size())) =
        detail::weights_map(params) * detail::vector_map(x) + detail::vector_map(params.bias);
    return out;
}

/// Accumulates dW += g x^T, db += g and returns W^T g.
inline std::vector<double> affine_backward(const DenseLayerParams& params, std::span<const double> x,
                                           std::span<const double> grad_out, DenseLayerParams& grad)
{
    std::vector<double> grad_in(params.in_width);
    const auto g = detail::vector_map(grad_out);
    const auto xin = detail::vector_map(x);
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> dw(
        grad.weights.data(), static_cast<Eigen::Index>(grad.out_width), static_cast<Eigen::Index>(grad.in_width));
    dw.noalias() += g * xin.transpose();
    Eigen::Map<Eigen::VectorXd>(grad.bias.data(), static_cast<Eigen::Index>(grad.bias.size())) += g;
    Eigen::Map<Eigen::VectorXd>(grad_in.data(), static_cast<Eigen::Index>(grad_in.size())).noalias() =
        detail::weights_map(params).transpose() * g;
    return grad_in;
}

inline std::vector<double> relu(std::span<const double> x)
{
    std::vector<double> out(x.begin(), x.end());
    for (double& v : out) v = v > 0.0 ? v : 0.0;
    return out;
}

/// Subgradient at exactly zero is zero.
inline std::vector<double> relu_backward(std::span<const double> pre, std::span<const double> grad_out)
{
    std::vector<double> g(grad_out.begin(), grad_out.end());
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!(pre[i] > 0.0)) g[i] = 0.0;
    return g;
}

/// Max-shifted softmax.
inline std::vector<double> softmax(std::span<const double> z)
{
    detail::require(!z.empty(), "softmax: empty input");
    for (double v : z) detail::require(std::isfinite(v), "softmax: non-finite logit");
    const double peak = *std::max_element(z.begin(), z.end());
    std::vector<double> p(z.size());
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - peak);
        total += p[i];
    }
    for (double& v : p) v /= total;
    return p;
}

struct LossTerm {
    double value = 0.0;
    bool saturated = false;  // p_s fell below the floor and was clamped
};

/// -log p_s, with p_s clamped from below at `floor`.
inline LossTerm cross_entropy(std::span<const double> p, std::size_t s, double floor = kProbabilityFloor)
{
    detail::require(s < p.size(), "cross_entropy: message index out of range");
    const double ps = p[s];
    if (ps < floor) return {-std::log(floor), true};
    return {-std::log(ps), false};
}

/// Mean of per-sample losses.
inline double batch_loss(std::span<const double> per_sample)
{
    detail::require(!per_sample.empty(), "batch_loss: empty batch");
    return std::accumulate(per_sample.begin(), per_sample.end(), 0.0) / static_cast<double>(per_sample.size());
}

/// x = sqrt(N) r / ||r||, so ||x||^2 = N.
inline std::vector<double> power_normalize(std::span<const double> r)
{
    detail::require(!r.empty(), "power_normalize: empty input");
    double sq = 0.0;
    for (double v : r) sq += v * v;
    if (!(sq > 0.0) || !std::isfinite(sq)) throw DegenerateInput("power_normalize: input has zero or non-finite norm");
    const double scale = std::sqrt(static_cast<double>(r.size()) / sq);
    std::vector<double> x(r.begin(), r.end());
    for (double& v : x) v *= scale;
    return x;
}

/// Applies the Jacobian sqrt(N) (I / ||r|| - r r^T / ||r||^3), which is symmetric.
inline std::vector<double> power_normalize_backward(std::span<const double> r, std::span<const double> grad_out)
{
    double sq = 0.0;
    double dot = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        sq += r[i] * r[i];
        dot += r[i] * grad_out[i];
    }
    const double norm = std::sqrt(sq);
    const double root_n = std::sqrt(static_cast<double>(r.size()));
    std::vector<double> g(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) g[i] = root_n * (grad_out[i] / norm - r[i] * dot / (sq * norm));
    return g;
}

/// y = x + n, n ~ N(0, beta I). The backward pass of this layer is the identity.
inline std::vector<double> awgn_layer(std::span<const double> x, double beta, Rng& rng)
{
    detail::require(beta >= 0.0, "awgn_layer: negative noise variance");
    const auto n = sample_noise(x.size(), beta, rng);
    std::vector<double> y(x.begin(), x.end());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += n[i];
    return y;
}

inline std::vector<double> awgn_backward(std::span<const double> grad_out)
{
    return {grad_out.begin(), grad_out.end()};
}

// ---------------------------------------------------------------------------
// Transceiver network
// ---------------------------------------------------------------------------

enum class LayerKind { DenseRelu, DenseLinear, PowerNormalize, ChannelMultiply, Noise, CsiConcat, SoftmaxHeads };

inline std::string to_string(LayerKind kind)
{
    switch (kind) {
    case LayerKind::DenseRelu: return "dense-relu";
    case LayerKind::DenseLinear: return "dense-linear";
    case LayerKind::PowerNormalize: return "normalize";
    case LayerKind::ChannelMultiply: return "channel";
    case LayerKind::Noise: return "noise";
    case LayerKind::CsiConcat: return "csi-concat";
    case LayerKind::SoftmaxHeads: return "softmax";
    }
    return "?";
}

/// Widths of an encoder -> normalize -> channel -> noise -> decoder chain.
/// All signal widths count real dimensions.
struct Architecture {
    std::size_t input_width = 16;
    std::vector<std::size_t> encoder_hidden{32};
    std::size_t channel_uses = 7;
    std::size_t tx_antennas = 1;
    std::size_t rx_antennas = 1;
    bool receiver_csi = false;
    std::size_t csi_realizations = 1;  // 1 under block fading, channel_uses otherwise
    std::vector<std::size_t> decoder_hidden{32};
    std::size_t head_count = 1;
    std::size_t head_width = 16;

    std::size_t signal_width() const { return 2 * channel_uses * tx_antennas; }
    std::size_t received_width() const { return 2 * channel_uses * rx_antennas; }
    std::size_t csi_width() const { return receiver_csi ? 2 * rx_antennas * tx_antennas * csi_realizations : 0; }
    std::size_t receiver_input_width() const { return received_width() + csi_width(); }

    void validate() const
    {
        detail::require(input_width >= 1 && channel_uses >= 1, "Architecture: zero width");
        detail::require(tx_antennas >= 1 && rx_antennas >= 1, "Architecture: antenna counts must be >= 1");
        detail::require(head_count >= 1 && head_width >= 1, "Architecture: need at least one softmax head");
        detail::require(csi_realizations == 1 || csi_realizations == channel_uses,
                        "Architecture: CSI realizations must be 1 or one per channel use");
        for (auto w : encoder_hidden) detail::require(w >= 1, "Architecture: zero-width encoder layer");
        for (auto w : decoder_hidden) detail::require(w >= 1, "Architecture: zero-width decoder layer");
    }

    /// (in, out) of every dense layer in parameter order.
    std::vector<std::pair<std::size_t, std::size_t>> dense_shapes() const
    {
        std::vector<std::pair<std::size_t, std::size_t>> shapes;
        std::size_t width = input_width;
        for (auto h : encoder_hidden) {
            shapes.emplace_back(width, h);
            width = h;
        }
        shapes.emplace_back(width, signal_width());
        width = receiver_input_width();
        for (auto h : decoder_hidden) {
            shapes.emplace_back(width, h);
            width = h;
        }
        for (std::size_t i = 0; i < head_count; ++i) shapes.emplace_back(width, head_width);
        return shapes;
    }

    std::vector<LayerKind> layer_kinds() const
    {
        std::vector<LayerKind> kinds(encoder_hidden.size(), LayerKind::DenseRelu);
        kinds.push_back(LayerKind::DenseLinear);
        kinds.push_back(LayerKind::PowerNormalize);
        kinds.push_back(LayerKind::ChannelMultiply);
        kinds.push_back(LayerKind::Noise);
        if (receiver_csi) kinds.push_back(LayerKind::CsiConcat);
        kinds.insert(kinds.end(), decoder_hidden.size(), LayerKind::DenseRelu);
        kinds.push_back(LayerKind::SoftmaxHeads);
        return kinds;
    }

    std::size_t parameter_count() const
    {
        std::size_t total = 0;
        for (auto [in, out] : dense_shapes()) total += in * out + out;
        return total;
    }

    bool operator==(const Architecture&) const = default;
};

/// Glorot-uniform weights on +-sqrt(6 / (in + out)), zero biases.
inline NetworkParameters glorot_init(const Architecture& arch, Rng& rng)
{
    arch.validate();
    NetworkParameters params;
    for (auto [in, out] : arch.dense_shapes()) {
        DenseLayerParams layer(in, out);
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        for (double& w : layer.weights) w = (2.0 * rng.uniform() - 1.0) * limit;
        params.layers.push_back(std::move(layer));
    }
    return params;
}

struct Network {
    Architecture arch;
    NetworkParameters params;
    /// Bumped by every in-place update; traces remember the revision they saw.
    std::uint64_t revision = 0;

    void validate() const
    {
        arch.validate();
        const auto shapes = arch.dense_shapes();
        detail::require(shapes.size() == params.layers.size(), "Network: layer count does not match architecture");
        for (std::size_t i = 0; i < shapes.size(); ++i) {
            params.layers[i].validate();
            detail::require(params.layers[i].in_width == shapes[i].first &&
                                params.layers[i].out_width == shapes[i].second,
                            "Network: layer " + std::to_string(i) + " shape does not match architecture");
        }
    }
};

inline Network make_network(const Architecture& arch, Rng& rng)
{
    Network net{arch, glorot_init(arch, rng), 0};
    net.validate();
    return net;
}

/// Frozen stochastic inputs of one pass.
struct ChannelDraw {
    std::vector<ChannelRealization> channel;
    std::vector<double> noise;  // one entry per received real dimension
};

inline ChannelDraw sample_draw(const Architecture& arch, ChannelMode mode, FadingMode fading, double beta, Rng& rng)
{
    ChannelDraw draw;
    draw.channel = sample_channel_state(rng, arch.rx_antennas, arch.tx_antennas, arch.channel_uses, mode, fading);
    draw.noise = sample_noise(arch.received_width(), beta, rng);
    return draw;
}

struct LayerRecord {
    LayerKind kind;
    std::vector<double> pre;  // dense pre-activation, or the layer input for non-parametric layers
    std::vector<double> out;
};

/// Every intermediate activation of one forward pass.
struct ForwardTrace {
    std::vector<double> input;
    std::vector<LayerRecord> records;
    std::vector<std::size_t> messages;
    ChannelDraw draw;
    std::uint64_t revision = 0;

    std::size_t layer_count() const noexcept { return records.size(); }
    std::span<const double> head(std::size_t h, std::size_t width) const
    {
        return std::span<const double>(records.back().out).subspan(h * width, width);
    }
    const std::vector<double>& transmitted() const { return find(LayerKind::PowerNormalize).out; }
    const std::vector<double>& received() const { return find(LayerKind::Noise).out; }

    const LayerRecord& find(LayerKind kind) const
    {
        for (const auto& r : records)
            if (r.kind == kind) return r;
        throw ContractViolation("ForwardTrace: no layer of kind " + to_string(kind));
    }
};

/// Concatenated one-hot vectors, one block of width `head_width` per message.
inline std::vector<double> one_hot_concat(std::span<const std::size_t> messages, std::size_t head_width)
{
    std::vector<double> x(messages.size() * head_width, 0.0);
    for (std::size_t i = 0; i < messages.size(); ++i) {
        detail::require(messages[i] < head_width, "one_hot: message index out of range");
        x[i * head_width + messages[i]] = 1.0;
    }
    return x;
}

namespace detail {

template <typename Fn>
void for_each_dense(const Architecture& arch, Fn&& fn)
{
    std::size_t param = 0;
    for (auto kind : arch.layer_kinds()) {
        fn(kind, param);
        if (kind == LayerKind::DenseRelu || kind == LayerKind::DenseLinear) ++param;
    }
}

}  // namespace detail

/// Runs the encoder alone: dense layers then power normalization.
inline std::vector<double> encode_signal(const Network& net, std::span<const double> input)
{
    detail::require(input.size() == net.arch.input_width, "encode_signal: input width mismatch");
    std::vector<double> a(input.begin(), input.end());
    std::size_t p = 0;
    for (; p < net.arch.encoder_hidden.size(); ++p) a = relu(affine_forward(net.params.layers[p], a));
    return power_normalize(affine_forward(net.params.layers[p], a));
}

/// Runs the receiver alone on a received signal (plus CSI when the
/// architecture has it) and returns the concatenated head probabilities.
inline std::vector<double> decode_signal(const Network& net, std::span<const double> received,
                                         std::span<const double> csi)
{
    const auto& arch = net.arch;
    detail::require(received.size() == arch.received_width(), "decode_signal: received width mismatch");
    detail::require(csi.size() == arch.csi_width(), "decode_signal: CSI width does not match receiver mode");
    std::vector<double> a(received.begin(), received.end());
    a.insert(a.end(), csi.begin(), csi.end());
    std::size_t p = arch.encoder_hidden.size() + 1;
    for (std::size_t i = 0; i < arch.decoder_hidden.size(); ++i, ++p)
        a = relu(affine_forward(net.params.layers[p], a));
    std::vector<double> probs;
    for (std::size_t h = 0; h < arch.head_count; ++h, ++p) {
        const auto head = softmax(affine_forward(net.params.layers[p], a));
        probs.insert(probs.end(), head.begin(), head.end());
    }
    return probs;
}

inline std::vector<double> csi_features(const Architecture& arch, const std::vector<ChannelRealization>& channel)
{
    if (!arch.receiver_csi) return {};
    std::vector<double> csi;
    for (std::size_t c = 0; c < arch.csi_realizations; ++c) {
        const auto& h = channel.size() == 1 ? channel.front() : channel.at(c);
        const auto reals = h.as_reals();
        csi.insert(csi.end(), reals.begin(), reals.end());
    }
    return csi;
}

/// Full chain: encoder -> normalize -> H x -> + noise -> [CSI] -> decoder -> softmax heads.
inline ForwardTrace forward(const Network& net, std::span<const std::size_t> messages, ChannelDraw draw)
{
    const auto& arch = net.arch;
    detail::require(messages.size() * arch.head_width == arch.input_width && messages.size() == arch.head_count,
                    "forward: message count does not match the network inputs");
    detail::require(draw.noise.size() == arch.received_width(), "forward: noise draw width mismatch");
    detail::require(draw.channel.size() == 1 || draw.channel.size() == arch.channel_uses,
                    "forward: channel draw must hold one realization or one per channel use");
    for (const auto& h : draw.channel)
        detail::require(h.rx == arch.rx_antennas && h.tx == arch.tx_antennas, "forward: channel shape mismatch");

    ForwardTrace trace;
    trace.input = one_hot_concat(messages, arch.head_width);
    trace.messages.assign(messages.begin(), messages.end());
    trace.revision = net.revision;

    std::vector<double> a = trace.input;
    std::size_t p = 0;
    for (auto kind : arch.layer_kinds()) {
        LayerRecord rec{kind, {}, {}};
        switch (kind) {
        case LayerKind::DenseRelu:
            rec.pre = affine_forward(net.params.layers[p++], a);
            rec.out = relu(rec.pre);
            break;
        case LayerKind::DenseLinear:
            rec.pre = affine_forward(net.params.layers[p++], a);
            rec.out = rec.pre;
            break;
        case LayerKind::PowerNormalize:
            rec.pre = a;
            rec.out = power_normalize(a);
            break;
        case LayerKind::ChannelMultiply:
            rec.pre = a;
            rec.out = apply_channel(draw.channel, a);
            break;
        case LayerKind::Noise:
            rec.pre = a;
            rec.out = a;
            for (std::size_t i = 0; i < a.size(); ++i) rec.out[i] += draw.noise[i];
            break;
        case LayerKind::CsiConcat: {
            rec.pre = a;
            rec.out = a;
            const auto csi = csi_features(arch, draw.channel);
            rec.out.insert(rec.out.end(), csi.begin(), csi.end());
            break;
        }
        case LayerKind::SoftmaxHeads:
            for (std::size_t h = 0; h < arch.head_count; ++h) {
                const auto logits = affine_forward(net.params.layers[p++], a);
                const auto probs = softmax(logits);
                rec.pre.insert(rec.pre.end(), logits.begin(), logits.end());
                rec.out.insert(rec.out.end(), probs.begin(), probs.end());
            }
            break;
        }
        a = rec.out;
        trace.records.push_back(std::move(rec));
    }
    trace.draw = std::move(draw);
    return trace;
}

/// Samples the channel and noise from `rng`, then runs `forward`.
inline ForwardTrace forward(const Network& net, std::span<const std::size_t> messages, ChannelMode mode,
                            FadingMode fading, const NoiseSpec& noise, Rng& rng)
{
    return forward(net, messages, sample_draw(net.arch, mode, fading, noise.beta, rng));
}

/// sum_h weight_h * (-log p_h[s_h]).
inline double sample_loss(const ForwardTrace& trace, std::size_t head_width, std::span<const double> head_weights)
{
    double loss = 0.0;
    for (std::size_t h = 0; h < head_weights.size(); ++h)
        loss += head_weights[h] * cross_entropy(trace.head(h, head_width), trace.messages[h]).value;
    return loss;
}

/// Adds scale * (gradient of the weighted per-sample cross-entropy) into
/// `grads`. Channel taps and noise are constants of the pass; the noise layer
/// has identity Jacobian and the channel layer contributes H^H.
inline void backward_accumulate(const Network& net, const ForwardTrace& trace, std::span<const std::size_t> messages,
                                std::span<const double> head_weights, GradientSet& grads, double scale = 1.0)
{
    const auto& arch = net.arch;
    const auto kinds = arch.layer_kinds();
    detail::require(trace.revision == net.revision, "backward: trace was produced by a different parameter revision");
    detail::require(trace.records.size() == kinds.size(), "backward: trace does not match architecture");
    for (std::size_t i = 0; i < kinds.size(); ++i)
        detail::require(trace.records[i].kind == kinds[i], "backward: trace layer order does not match architecture");
    detail::require(std::equal(messages.begin(), messages.end(), trace.messages.begin(), trace.messages.end()),
                    "backward: messages differ from the ones the trace was produced with");
    detail::require(head_weights.size() == arch.head_count, "backward: need one loss weight per head");

    detail::require(grads.same_shape(net.params), "backward: gradient accumulator shape mismatch");
    std::size_t p = net.params.layers.size();
    std::vector<double> g;

    for (std::size_t li = kinds.size(); li-- > 0;) {
        const LayerRecord& rec = trace.records[li];
        const std::vector<double>& layer_in = li == 0 ? trace.input : trace.records[li - 1].out;
        switch (rec.kind) {
        case LayerKind::SoftmaxHeads: {
            std::vector<double> acc(layer_in.size(), 0.0);
            p -= arch.head_count;
            for (std::size_t h = 0; h < arch.head_count; ++h) {
                std::vector<double> dlogit(arch.head_width);
                const auto probs = trace.head(h, arch.head_width);
                for (std::size_t j = 0; j < arch.head_width; ++j)
                    dlogit[j] = scale * head_weights[h] * (probs[j] - (j == messages[h] ? 1.0 : 0.0));
                const auto gi = affine_backward(net.params.layers[p + h], layer_in, dlogit, grads.layers[p + h]);
                for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += gi[j];
            }
            g = std::move(acc);
            break;
        }
        case LayerKind::DenseRelu:
            --p;
            g = affine_backward(net.params.layers[p], layer_in, relu_backward(rec.pre, g), grads.layers[p]);
            break;
        case LayerKind::DenseLinear:
            --p;
            g = affine_backward(net.params.layers[p], layer_in, g, grads.layers[p]);
            break;
        case LayerKind::CsiConcat:
            g.resize(arch.received_width());
            break;
        case LayerKind::Noise:
            g = awgn_backward(g);
            break;
        case LayerKind::ChannelMultiply:
            g = apply_channel_adjoint(trace.draw.channel, g);
            break;
        case LayerKind::PowerNormalize:
            g = power_normalize_backward(rec.pre, g);
            break;
        }
    }
}

/// Gradient of the weighted per-sample cross-entropy with respect to every
/// parameter (see backward_accumulate).
inline GradientSet backward(const Network& net, const ForwardTrace& trace, std::span<const std::size_t> messages,
                            std::span<const double> head_weights)
{
    GradientSet grads = zeros_like(net.params);
    backward_accumulate(net, trace, messages, head_weights, grads);
    return grads;
}

/// theta' = theta - eta * grad
inline NetworkParameters sgd_update(const NetworkParameters& theta, const GradientSet& grads, double eta)
{
    detail::require(theta.same_shape(grads), "sgd_update: gradient shape does not match parameters");
    NetworkParameters out = theta;
    accumulate(out, grads, -eta);
    return out;
}

inline void sgd_update(Network& net, const GradientSet& grads, double eta)
{
    detail::require(net.params.same_shape(grads), "sgd_update: gradient shape does not match parameters");
    accumulate(net.params, grads, -eta);
    ++net.revision;
}

// ---------------------------------------------------------------------------
// Finite-difference verification
// ---------------------------------------------------------------------------

struct GradcheckReport {
    double max_relative_error = 0.0;
    std::size_t checked = 0;
    std::size_t excluded = 0;  // parameters whose perturbation crossed a ReLU kink
    std::size_t worst_index = 0;
};

/// Generic central-difference check of `analytic` against `loss`.
/// `regime`, if set, returns an activation signature; a parameter whose
/// +-epsilon evaluation changes the signature sits on a kink and is skipped.
inline GradcheckReport finite_diff_gradcheck(const NetworkParameters& theta,
                                             const std::function<double(const NetworkParameters&)>& loss,
                                             const GradientSet& analytic, double epsilon,
                                             const std::function<std::vector<std::uint8_t>(const NetworkParameters&)>&
                                                 regime = {})
{
    detail::require(epsilon >= 1e-7 && epsilon <= 1e-3, "finite_diff_gradcheck: epsilon outside [1e-7, 1e-3]");
    detail::require(theta.same_shape(analytic), "finite_diff_gradcheck: gradient shape mismatch");

    std::vector<double> flat_grad;
    analytic.for_each([&](double v) { flat_grad.push_back(v); });
    const auto base_regime = regime ? regime(theta) : std::vector<std::uint8_t>{};

    GradcheckReport report;
    NetworkParameters probe = theta;
    std::vector<double*> slots;
    probe.for_each([&](double& v) { slots.push_back(&v); });

    for (std::size_t i = 0; i < slots.size(); ++i) {
        const double original = *slots[i];
        *slots[i] = original + epsilon;
        const double up = loss(probe);
        const bool up_kink = regime && regime(probe) != base_regime;
        *slots[i] = original - epsilon;
        const double down = loss(probe);
        const bool down_kink = regime && regime(probe) != base_regime;
        *slots[i] = original;
        if (up_kink || down_kink) {
            ++report.excluded;
            continue;
        }
        const double numeric = (up - down) / (2.0 * epsilon);
        const double a = flat_grad[i];
        const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
        ++report.checked;
        if (rel > report.max_relative_error) {
            report.max_relative_error = rel;
            report.worst_index = i;
        }
    }
    return report;
}

/// One training example with its frozen channel and noise draw.
struct FrozenSample {
    std::vector<std::size_t> messages;
    ChannelDraw draw;
};

inline double mean_loss(const Network& net, std::span<const FrozenSample> batch, std::span<const double> head_weights)
{
    double total = 0.0;
    for (const auto& sample : batch)
        total += sample_loss(forward(net, sample.messages, sample.draw), net.arch.head_width, head_weights);
    return total / static_cast<double>(batch.size());
}

inline GradientSet mean_gradient(const Network& net, std::span<const FrozenSample> batch,
                                 std::span<const double> head_weights)
{
    GradientSet total = zeros_like(net.params);
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (const auto& sample : batch) {
        const auto trace = forward(net, sample.messages, sample.draw);
        backward_accumulate(net, trace, sample.messages, head_weights, total, scale);
    }
    return total;
}

/// ReLU on/off pattern over the whole batch.
inline std::vector<std::uint8_t> relu_signature(const Network& net, std::span<const FrozenSample> batch)
{
    std::vector<std::uint8_t> sig;
    for (const auto& sample : batch) {
        const auto trace = forward(net, sample.messages, sample.draw);
        for (const auto& rec : trace.records)
            if (rec.kind == LayerKind::DenseRelu)
                for (double v : rec.pre) sig.push_back(v > 0.0 ? 1 : 0);
    }
    return sig;
}

/// Checks `backward` on the full network against central differences of the
/// batch-mean loss with every stochastic draw frozen.
inline GradcheckReport finite_diff_gradcheck(const Network& net, std::span<const FrozenSample> batch, double epsilon,
                                             std::span<const double> head_weights)
{
    detail::require(!batch.empty(), "finite_diff_gradcheck: empty batch");
    const std::vector<double> weights(head_weights.begin(), head_weights.end());
    const std::vector<FrozenSample> frozen(batch.begin(), batch.end());
    auto with = [&](const NetworkParameters& theta) {
        Network probe{net.arch, theta, 0};
        return probe;
    };
    const GradientSet analytic = mean_gradient(net, frozen, weights);
    return finite_diff_gradcheck(
        net.params, [&](const NetworkParameters& theta) { return mean_loss(with(theta), frozen, weights); }, analytic,
        epsilon, [&](const NetworkParameters& theta) { return relu_signature(with(theta), frozen); });
}

}  // namespace aecomm
