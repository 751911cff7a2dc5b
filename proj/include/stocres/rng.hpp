#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace stocres {

/// Philox4x32-10 block function (Salmon et al., SC'11). Pure: output depends only on
/// (counter, key), which is what makes per-path streams independent of scheduling.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter apply(Counter ctr, Key key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85;
};

/// Independent random streams for the separate consumers of a master seed.
enum class StreamPurpose : std::uint32_t {
    nu_paths = 1,
    euler_1d = 2,
    euler_2d = 3,
    thinning = 4,
};

/// Random stream keyed by (master seed, purpose, stream index).
///
/// Each Philox block yields two 64-bit words, i.e. two uniforms or two normals.
class StreamRng {
public:
    StreamRng(std::uint64_t seed, StreamPurpose purpose, std::uint64_t index)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          purpose_(static_cast<std::uint32_t>(purpose)), index_(index) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() {
        if (word_pos_ == 2) refill();
        return static_cast<double>(words_[word_pos_++] >> 11) * 0x1.0p-53;
    }

    /// Uniform on (0, 1].
    double uniform_open_closed() { return 1.0 - uniform(); }

    /// Standard normal by Box-Muller; normals are produced in pairs from one block.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_open_closed();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    /// Standard exponential by inversion.
    double exponential() { return -std::log(uniform_open_closed()); }

private:
    void refill() {
        const Philox4x32::Counter ctr{block_++, purpose_, static_cast<std::uint32_t>(index_),
                                      static_cast<std::uint32_t>(index_ >> 32)};
        const auto out = Philox4x32::apply(ctr, key_);
        words_[0] = (std::uint64_t{out[1]} << 32) | out[0];
        words_[1] = (std::uint64_t{out[3]} << 32) | out[2];
        word_pos_ = 0;
    }

    Philox4x32::Key key_;
    std::uint32_t purpose_;
    std::uint64_t index_;
    std::uint32_t block_ = 0;
    std::array<std::uint64_t, 2> words_{};
    int word_pos_ = 2;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace stocres
