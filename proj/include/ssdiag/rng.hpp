#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace ssdiag {

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers:
/// as easy as 1, 2, 3"). Stateless: output depends only on (counter, key).
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static constexpr Counter round(const Counter& ctr, const Key& key) noexcept {
        const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
        const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
        return {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
                static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    }

    static constexpr Counter block(Counter ctr, Key key) noexcept {
        ctr = round(ctr, key);
        for (int r = 1; r < 10; ++r) {
            key[0] += kWeyl0;
            key[1] += kWeyl1;
            ctr = round(ctr, key);
        }
        return ctr;
    }
};

constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Counter-based random stream. A stream is identified by (seed, stream id);
/// `split` derives child streams keyed by (tag, index), so a replication's
/// draws never depend on which thread ran it or in what order.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed, std::uint64_t stream_id = 0) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_id_(stream_id) {}

    std::uint64_t seed() const noexcept {
        return (std::uint64_t{key_[1]} << 32) | key_[0];
    }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    RandomStream split(std::uint64_t tag, std::uint64_t index) const noexcept {
        const std::uint64_t child = splitmix64(splitmix64(stream_id_ ^ splitmix64(tag)) + index);
        return RandomStream(seed(), child);
    }

    std::uint32_t next_u32() noexcept {
        if (buffer_pos_ == 4) refill();
        return buffer_[buffer_pos_++];
    }

    std::uint64_t next_u64() noexcept {
        const std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer on [0, bound), Lemire's multiply-and-reject.
    std::uint64_t below(std::uint64_t bound) noexcept {
        if (bound <= 1) return 0;
        std::uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Standard normal via Box-Muller; the second variate is cached.
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    void fill_normal(std::span<double> out) noexcept {
        for (double& v : out) v = normal();
    }

private:
    void refill() noexcept {
        const Philox4x32::Counter ctr{static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                                      static_cast<std::uint32_t>(stream_id_),
                                      static_cast<std::uint32_t>(stream_id_ >> 32)};
        buffer_ = Philox4x32::block(ctr, key_);
        ++block_;
        buffer_pos_ = 0;
    }

    Philox4x32::Key key_;
    std::uint64_t stream_id_;
    std::uint64_t block_ = 0;
    Philox4x32::Counter buffer_{};
    int buffer_pos_ = 4;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Stream tags. Shock draws for replication b always come from
// root.split(kShockDraws, b) so that y-fixed, eps-fixed and placebo runs with
// the same seed see identical regressors.
namespace stream_tag {
inline constexpr std::uint64_t kShockDraws = 0x5348'4f43'4b00'0001ull;
inline constexpr std::uint64_t kOuterReplication = 0x4f55'5445'5200'0002ull;
inline constexpr std::uint64_t kInnerSimulation = 0x494e'4e45'5200'0003ull;
inline constexpr std::uint64_t kStateShocks = 0x5354'4154'4500'0004ull;
inline constexpr std::uint64_t kIdiosyncratic = 0x4944'494f'0000'0005ull;
inline constexpr std::uint64_t kAssignment = 0x4153'5349'474e'0006ull;
inline constexpr std::uint64_t kLatent = 0x4c41'5445'4e54'0007ull;
inline constexpr std::uint64_t kUnobservedShocks = 0x554e'4f42'5300'0008ull;
inline constexpr std::uint64_t kObservedShocks = 0x4f42'5345'5200'0009ull;
inline constexpr std::uint64_t kGridPoint = 0x4752'4944'0000'000aull;
inline constexpr std::uint64_t kSynthetic = 0x5359'4e54'4800'000bull;
}  // namespace stream_tag

}  // namespace ssdiag
