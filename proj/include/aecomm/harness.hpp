#pragma once

// Monte Carlo BER engine and SNR sweeps over learned and conventional links.
//
// Trials are grouped into fixed-size chunks. Chunk c of a point owns the rng
// stream derive_seed(point_seed, {c}) and chunks are reduced in index order,
// so results do not depend on how many workers evaluate them.

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "aecomm/autoenc.hpp"
#include "aecomm/baselines.hpp"
#include "aecomm/channel.hpp"
#include "aecomm/errors.hpp"
#include "aecomm/rng.hpp"

namespace aecomm {

enum class LinkKind { AeSiso, AeMimo, ConvSisoUncoded, ConvSisoHamming, ConvMimoMl, ConvMimoZf, RandomGuess };

inline std::string to_string(LinkKind kind)
{
    switch (kind) {
    case LinkKind::AeSiso: return "ae-siso";
    case LinkKind::AeMimo: return "ae-mimo";
    case LinkKind::ConvSisoUncoded: return "conv-siso-uncoded";
    case LinkKind::ConvSisoHamming: return "conv-siso-hamming";
    case LinkKind::ConvMimoMl: return "conv-mimo-ml";
    case LinkKind::ConvMimoZf: return "conv-mimo-zf";
    case LinkKind::RandomGuess: return "random-guess";
    }
    return "?";
}

inline LinkKind parse_link_kind(const std::string& text)
{
    for (auto kind : {LinkKind::AeSiso, LinkKind::AeMimo, LinkKind::ConvSisoUncoded, LinkKind::ConvSisoHamming,
                      LinkKind::ConvMimoMl, LinkKind::ConvMimoZf, LinkKind::RandomGuess})
        if (to_string(kind) == text) return kind;
    throw ContractViolation("unknown link kind '" + text + "'");
}

/// A named end-to-end link. Learned links carry their trained model and a
/// precomputed codebook (the encoder is deterministic).
struct LinkUnderTest {
    LinkKind kind = LinkKind::ConvSisoUncoded;
    ChannelMode channel = ChannelMode::AwgnOnly;
    FadingMode fading = FadingMode::Block;
    HammingDecodeMode hamming = HammingDecodeMode::HardSyndrome;
    std::shared_ptr<const TrainedModel> model;
    std::vector<std::vector<double>> codebook;  // learned links: encoder output per message tuple

    std::string name() const
    {
        if (kind == LinkKind::ConvSisoHamming)
            return to_string(kind) + (hamming == HammingDecodeMode::SoftMl ? "-soft" : "-hard");
        return to_string(kind);
    }

    bool is_learned() const { return kind == LinkKind::AeSiso || kind == LinkKind::AeMimo; }

    void validate() const
    {
        if (is_learned()) {
            detail::require(model != nullptr, name() + ": learned link needs a model");
            const std::size_t heads = kind == LinkKind::AeSiso ? 1 : 2;
            detail::require(model->net.arch.head_count == heads, name() + ": model head count does not match link");
            detail::require(codebook.size() == static_cast<std::size_t>(std::pow(model->system.messages(), heads)),
                            name() + ": codebook not built; use make_learned_link");
        }
        else {
            detail::require(model == nullptr, name() + ": conventional link must not carry a model");
        }
    }

    /// Information bits per unit transmitted energy, used for Eb/N0 -> beta.
    double energy_rate() const
    {
        switch (kind) {
        case LinkKind::AeSiso:
        case LinkKind::AeMimo: return model->system.energy_rate();
        case LinkKind::ConvSisoHamming: return 4.0 / 7.0;
        case LinkKind::ConvMimoMl:
        case LinkKind::ConvMimoZf: return 2.0;
        default: return 1.0;
        }
    }
};

inline LinkUnderTest make_conventional_link(LinkKind kind, ChannelMode channel, FadingMode fading = FadingMode::Block,
                                            HammingDecodeMode hamming = HammingDecodeMode::HardSyndrome)
{
    LinkUnderTest link{kind, channel, fading, hamming, nullptr, {}};
    link.validate();
    return link;
}

/// Learned link; fading follows the model's training configuration since the
/// receiver's CSI width depends on it.
inline LinkUnderTest make_learned_link(std::shared_ptr<const TrainedModel> model, ChannelMode channel)
{
    detail::require(model != nullptr, "make_learned_link: null model");
    LinkUnderTest link;
    link.kind = model->net.arch.head_count == 1 ? LinkKind::AeSiso : LinkKind::AeMimo;
    link.channel = channel;
    link.fading = model->train.fading;
    const std::size_t M = model->system.messages();
    if (link.kind == LinkKind::AeSiso) {
        for (std::size_t s = 0; s < M; ++s) link.codebook.push_back(transmit(*model, s).samples);
    }
    else {
        for (std::size_t s1 = 0; s1 < M; ++s1)
            for (std::size_t s2 = 0; s2 < M; ++s2) {
                const std::size_t pair[2] = {s1, s2};
                link.codebook.push_back(transmit(*model, pair).samples);
            }
    }
    link.model = std::move(model);
    link.validate();
    return link;
}

struct TrialResult {
    std::uint64_t bits = 0;
    std::uint64_t bit_errors = 0;
    std::uint64_t blocks = 0;
    std::uint64_t block_errors = 0;
    std::uint64_t detection_failures = 0;

    TrialResult& operator+=(const TrialResult& o)
    {
        bits += o.bits;
        bit_errors += o.bit_errors;
        blocks += o.blocks;
        block_errors += o.block_errors;
        detection_failures += o.detection_failures;
        return *this;
    }
};

namespace detail {

inline std::uint64_t count_bit_errors(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b)
{
    std::uint64_t e = 0;
    for (std::size_t i = 0; i < a.size(); ++i) e += a[i] != b[i];
    return e;
}

inline Bits random_bits(std::size_t count, Rng& rng)
{
    Bits bits(count);
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng.below(2));
    return bits;
}

inline TrialResult score(std::span<const std::uint8_t> sent, std::span<const std::uint8_t> got)
{
    const auto errors = count_bit_errors(sent, got);
    return {sent.size(), errors, 1, errors > 0 ? 1U : 0U, 0};
}

inline std::vector<cdouble> scalar_taps(const std::vector<ChannelRealization>& state)
{
    std::vector<cdouble> taps;
    for (const auto& h : state) taps.push_back(h.taps.front());
    return taps;
}

inline ComplexSignal through_channel(const std::vector<ChannelRealization>& state, const ComplexSignal& x,
                                     double beta, Rng& rng)
{
    auto y = apply_channel(state, x.samples);
    const auto n = sample_noise(y.size(), beta, rng);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += n[i];
    return ComplexSignal(std::move(y));
}

inline TrialResult trial_learned(const LinkUnderTest& link, double beta, Rng& rng)
{
    const TrainedModel& model = *link.model;
    const auto& arch = model.net.arch;
    const std::size_t M = model.system.messages();
    const std::size_t k = model.system.k;
    std::vector<std::size_t> sent(arch.head_count);
    for (auto& s : sent) s = rng.below(M);
    std::size_t index = 0;
    for (auto s : sent) index = index * M + s;

    const auto state =
        sample_channel_state(rng, arch.rx_antennas, arch.tx_antennas, arch.channel_uses, link.channel, link.fading);
    const auto y = through_channel(state, ComplexSignal(link.codebook[index]), beta, rng);
    const auto csi = csi_features(arch, state);
    const auto probs = decode_signal(model.net, y.samples, csi);

    TrialResult r;
    r.blocks = 1;
    for (std::size_t h = 0; h < arch.head_count; ++h) {
        const auto got = argmax(std::span<const double>(probs).subspan(h * M, M));
        r.bits += k;
        r.bit_errors += static_cast<std::uint64_t>(std::popcount(got ^ sent[h]));
    }
    r.block_errors = r.bit_errors > 0 ? 1 : 0;
    return r;
}

}  // namespace detail

/// One transmission: random message(s) through transmit -> channel -> noise ->
/// detect, scored against the sent bits.
inline TrialResult run_trial(const LinkUnderTest& link, double ebn0_db, Rng& rng)
{
    const double beta = ebn0_to_beta(ebn0_db, link.energy_rate());
    switch (link.kind) {
    case LinkKind::AeSiso:
    case LinkKind::AeMimo: return detail::trial_learned(link, beta, rng);

    case LinkKind::ConvSisoUncoded: {
        const Bits bits = detail::random_bits(1, rng);
        const auto state = sample_channel_state(rng, 1, 1, 1, link.channel, link.fading);
        const auto y = detail::through_channel(state, bpsk_modulate(bits), beta, rng);
        return detail::score(bits, bpsk_demodulate(y, detail::scalar_taps(state)));
    }

    case LinkKind::ConvSisoHamming: {
        const Bits data = detail::random_bits(4, rng);
        const auto state = sample_channel_state(rng, 1, 1, 7, link.channel, link.fading);
        const auto y = detail::through_channel(state, bpsk_modulate(hamming74_encode(data)), beta, rng);
        const auto taps = detail::scalar_taps(state);
        const Bits decoded = link.hamming == HammingDecodeMode::SoftMl
                                 ? hamming74_decode_soft(bpsk_soft(y, taps))
                                 : hamming74_decode_hard(bpsk_demodulate(y, taps));
        return detail::score(data, decoded);
    }

    case LinkKind::ConvMimoMl:
    case LinkKind::ConvMimoZf: {
        TrialResult r;
        for (int attempt = 0;; ++attempt) {
            const Bits bits = detail::random_bits(4, rng);
            const auto state = sample_channel_state(rng, 2, 2, 1, link.channel, FadingMode::Block);
            const auto y = detail::through_channel(state, qpsk_modulate(bits), beta, rng);
            try {
                const auto decision = link.kind == LinkKind::ConvMimoMl ? mimo_ml_detect(y, state.front())
                                                                        : mimo_zf_detect(y, state.front());
                r += detail::score(bits, decision.bits());
                return r;
            }
            catch (const DetectionFailure&) {
                ++r.detection_failures;
                if (attempt > 1000) throw;
            }
        }
    }

    case LinkKind::RandomGuess: {
        const Bits sent = detail::random_bits(4, rng);
        const Bits guess = detail::random_bits(4, rng);
        return detail::score(sent, guess);
    }
    }
    throw ContractViolation("run_trial: unknown link kind");
}

struct StopRule {
    std::uint64_t min_errors = 100;
    std::uint64_t max_bits = 10'000'000;

    void validate() const
    {
        detail::require(min_errors >= 1, "StopRule: min_errors must be >= 1");
        detail::require(max_bits >= min_errors, "StopRule: max_bits must be >= min_errors");
    }
};

struct BerPoint {
    double ebn0_db = 0.0;
    std::uint64_t bits = 0;
    std::uint64_t errors = 0;
    double ber = 0.0;
    double standard_error = 0.0;
    bool censored = false;  // stopped on the bit budget before min_errors
    std::uint64_t seed = 0;
    std::uint64_t blocks = 0;
    std::uint64_t block_errors = 0;
    std::uint64_t detection_failures = 0;

    double bler() const { return blocks ? static_cast<double>(block_errors) / static_cast<double>(blocks) : 0.0; }
    double bler_standard_error() const
    {
        return blocks ? std::sqrt(bler() * (1.0 - bler()) / static_cast<double>(blocks)) : 0.0;
    }
};

inline double binomial_standard_error(double p, std::uint64_t n)
{
    return n ? std::sqrt(p * (1.0 - p) / static_cast<double>(n)) : 0.0;
}

inline constexpr std::size_t kTrialsPerChunk = 2048;

inline TrialResult run_chunk(const LinkUnderTest& link, double ebn0_db, std::uint64_t point_seed, std::uint64_t chunk)
{
    Rng rng(derive_seed(point_seed, {chunk}));
    TrialResult total;
    for (std::size_t t = 0; t < kTrialsPerChunk; ++t) total += run_trial(link, ebn0_db, rng);
    return total;
}

/// Accumulates chunks until errors >= min_errors or bits >= max_bits. The
/// result depends only on (link, ebn0_db, stop, seed).
inline BerPoint monte_carlo_ber(const LinkUnderTest& link, double ebn0_db, const StopRule& stop, std::uint64_t seed,
                                std::size_t workers = 1)
{
    link.validate();
    stop.validate();
    workers = std::max<std::size_t>(1, workers);

    TrialResult total;
    std::uint64_t next_chunk = 0;
    bool done = false;
    while (!done) {
        std::vector<TrialResult> wave(workers);
        if (workers == 1) {
            wave[0] = run_chunk(link, ebn0_db, seed, next_chunk);
        }
        else {
            std::vector<std::exception_ptr> failures(workers);
            {
                std::vector<std::jthread> pool;
                for (std::size_t w = 0; w < workers; ++w)
                    pool.emplace_back([&, w] {
                        try {
                            wave[w] = run_chunk(link, ebn0_db, seed, next_chunk + w);
                        }
                        catch (...) {
                            failures[w] = std::current_exception();
                        }
                    });
            }
            for (auto& f : failures)
                if (f) std::rethrow_exception(f);
        }
        for (const auto& chunk : wave) {
            total += chunk;
            if (total.bit_errors >= stop.min_errors || total.bits >= stop.max_bits) {
                done = true;
                break;
            }
        }
        next_chunk += workers;
    }

    BerPoint p;
    p.ebn0_db = ebn0_db;
    p.bits = total.bits;
    p.errors = total.bit_errors;
    p.ber = static_cast<double>(total.bit_errors) / static_cast<double>(total.bits);
    p.standard_error = binomial_standard_error(p.ber, p.bits);
    p.censored = total.bit_errors < stop.min_errors;
    p.seed = seed;
    p.blocks = total.blocks;
    p.block_errors = total.block_errors;
    p.detection_failures = total.detection_failures;
    return p;
}

struct SweepSpec {
    LinkUnderTest link;
    std::vector<double> ebn0_db;
    StopRule stop;
    std::uint64_t seed = 1;
    std::size_t workers = 1;
};

/// Thrown when a sweep point fails; carries the points finished before it.
class SweepAborted : public std::runtime_error {
public:
    SweepAborted(const std::string& what, std::vector<BerPoint> done)
        : std::runtime_error(what), partial(std::move(done))
    {
    }
    std::vector<BerPoint> partial;
};

inline std::uint64_t point_seed(std::uint64_t master, std::size_t index) { return derive_seed(master, {0x5EED, index}); }

inline std::vector<BerPoint> run_sweep(const SweepSpec& spec,
                                       const std::function<void(std::size_t, const BerPoint&)>& progress = {})
{
    spec.link.validate();
    spec.stop.validate();
    std::vector<BerPoint> points;
    for (std::size_t i = 0; i < spec.ebn0_db.size(); ++i) {
        try {
            points.push_back(
                monte_carlo_ber(spec.link, spec.ebn0_db[i], spec.stop, point_seed(spec.seed, i), spec.workers));
        }
        catch (const std::exception& e) {
            throw SweepAborted("sweep point " + std::to_string(spec.ebn0_db[i]) + " dB failed: " + e.what(),
                               std::move(points));
        }
        if (progress) progress(i, points.back());
    }
    return points;
}

inline std::vector<double> ebn0_grid(double start, double stop, double step)
{
    detail::require(step > 0.0, "ebn0_grid: step must be positive");
    std::vector<double> grid;
    for (std::size_t i = 0;; ++i) {
        const double v = start + static_cast<double>(i) * step;
        if (v > stop + 1e-9) break;
        grid.push_back(v);
    }
    return grid;
}

}  // namespace aecomm
