#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "ocsvdd/matrix.hpp"

namespace ocsvdd {

// xoshiro256** (Blackman & Vigna), state expanded from a 64-bit seed with
// splitmix64. Normals use the Box-Muller transform and emit both values of a
// pair before drawing new uniforms. Streams depend only on the seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    // Uniform in [0, 1) with 53 bits of resolution.
    double uniform();
    // Uniform integer in [0, bound) by rejection, bound >= 1.
    std::uint64_t below(std::uint64_t bound);
    double normal();

    // In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // First k entries of a random permutation of 0..n-1.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

private:
    std::array<std::uint64_t, 4> s_{};
    std::optional<double> spare_;
};

// rows x cols standard-normal matrix.
Matrix gaussian_sample(Rng& rng, std::size_t rows, std::size_t cols);

// 64-bit FNV-1a, used to derive stable per-task seeds.
std::uint64_t stable_hash(std::string_view s);

}  // namespace ocsvdd
