#pragma once

#include <cstdint>
#include <random>

namespace regimeopt {

// SplitMix64 step, used to derive well-separated engine seeds from
// (user seed, path index, stream tag).
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index, std::uint64_t tag) {
    return splitmix64(splitmix64(splitmix64(seed) + index) + tag);
}

// Per-path random stream. Each path owns its own engine so batches are
// reproducible for a fixed (seed, path index) regardless of worker layout.
class PathRng {
public:
    PathRng(std::uint64_t seed, std::uint64_t index, std::uint64_t tag)
        : engine_(derive_seed(seed, index, tag)) {}

    double normal() { return normal_(engine_); }

    // Unit-mean exponential draw, strictly positive.
    double exponential() {
        double u;
        do {
            u = uniform_(engine_);
        } while (u <= 0.0);
        return -std::log(u);
    }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

namespace stream_tag {
inline constexpr std::uint64_t gaussians = 0x6761757373ULL;
inline constexpr std::uint64_t switch_time = 0x746175ULL;
}  // namespace stream_tag

}  // namespace regimeopt
