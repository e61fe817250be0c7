#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace aecomm {

/// SplitMix64 finalizer. Used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Derive a child seed from a parent seed and a path of stream indices.
/// derive_seed(s, {a, b}) is a pure function, so (seed, indices) pins every draw.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept
{
    std::uint64_t h = mix64(seed);
    for (std::uint64_t index : path) h = mix64(h ^ mix64(index + 0x632BE59BD9B4E019ULL));
    return h;
}

/// Seedable random stream. One instance must not be shared across threads;
/// split with `stream()` instead.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(mix64(seed)) {}

    std::uint64_t seed() const noexcept { return seed_; }

    /// Independent child stream; does not advance this stream.
    Rng stream(std::uint64_t index) const { return Rng(derive_seed(seed_, {index})); }

    double gaussian() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }

    /// Uniform integer in [0, upper).
    std::uint64_t below(std::uint64_t upper)
    {
        return std::uniform_int_distribution<std::uint64_t>(0, upper - 1)(engine_);
    }

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace aecomm
