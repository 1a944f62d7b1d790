#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include <Eigen/Core>

namespace fgd {

/// SplitMix64 output function: a bijective avalanche over 64 bits.
constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Sequential SplitMix64 generator, used only to seed other engines.
class SplitMix64
{
  public:
    explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    constexpr std::uint64_t operator()() noexcept
    {
        state_ += 0x9e3779b97f4a7c15ull;
        return splitmix64_mix(state_);
    }

  private:
    std::uint64_t state_;
};

/*!
 * Deterministic random stream.
 *
 * xoshiro256** seeded through SplitMix64. Uniform and normal variates are
 * produced by fixed formulas (53-bit mantissa, polar Box-Muller) so that a
 * given seed yields the same sequence on every platform and standard library.
 * Not thread-safe: use one stream per worker.
 */
class Rng
{
  public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed) noexcept
    {
        SplitMix64 sm(seed);
        for (auto& word : s_)
            word = sm();
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    result_type operator()() noexcept
    {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform on [0, 1).
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform on [lo, hi).
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Standard normal variate (Marsaglia polar method, spare value cached).
    double normal() noexcept
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double factor = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * factor;
        has_spare_ = true;
        return u * factor;
    }

    /// Fills `out` with iid N(0, 1) entries.
    void fill_normal(Eigen::Ref<Eigen::VectorXd> out) noexcept
    {
        for (Eigen::Index i = 0; i < out.size(); ++i)
            out[i] = normal();
    }

    Eigen::VectorXd normal_vector(Eigen::Index d)
    {
        Eigen::VectorXd out(d);
        fill_normal(out);
        return out;
    }

    /// Independent child stream; advances this stream by one draw.
    Rng split() noexcept { return Rng(splitmix64_mix((*this)() ^ 0x5851f42d4c957f2dull)); }

  private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept
    {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t s_[4]{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace fgd
