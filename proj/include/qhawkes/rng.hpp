#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace qhawkes {

// Philox4x32-10 (Salmon et al. 2011). Counter based, so a (seed, stream) pair
// pins the whole sequence and independent streams need no coordination.
class Philox4x32 {
public:
    using result_type = std::uint32_t;
    using block = std::array<std::uint32_t, 4>;
    using key_type = std::array<std::uint32_t, 2>;

    explicit Philox4x32(std::uint64_t seed = 0, std::uint64_t stream = 0)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          counter_{0, 0, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    static block bijection(block ctr, key_type key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += 0x9E3779B9u;
                key[1] += 0xBB67AE85u;
            }
            const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

    result_type operator()() {
        if (index_ == 4) {
            buffer_ = bijection(counter_, key_);
            if (++counter_[0] == 0) ++counter_[1];
            index_ = 0;
        }
        return buffer_[index_++];
    }

    // Uniform on the open interval (0, 1), 53 bits.
    double uniform() {
        const std::uint64_t a = (*this)();
        const std::uint64_t b = (*this)();
        const std::uint64_t bits = ((a << 32) | b) >> 11;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    double exponential() { return -std::log(uniform()); }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double theta = 2.0 * M_PI * uniform();
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    int sign() { return ((*this)() & 1u) ? 1 : -1; }

private:
    key_type key_;
    block counter_;
    block buffer_{};
    int index_{4};
    double spare_{0.0};
    bool has_spare_{false};
};

} // namespace qhawkes
