#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace apprank {

// Mixes a base seed with a stream name so that independent components draw
// from independent, reproducible streams. FNV-1a over the name, then a
// splitmix64 finalizer.
std::uint64_t derive_seed(std::uint64_t base, std::string_view name);

// Deterministic random stream. mt19937_64 is fully specified by the
// standard; distributions are hand-rolled because the std:: ones are
// implementation-defined and would break cross-toolchain reproducibility.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}
    RngStream(std::uint64_t seed, std::string_view name) : engine_(derive_seed(seed, name)) {}

    std::uint64_t next_u64() { return engine_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n), exactly uniform via rejection
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
        const std::uint64_t limit =
            std::numeric_limits<std::uint64_t>::max() -
            std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    double exponential(double mean) { return -mean * std::log(1.0 - uniform()); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Draw an index from unnormalized non-negative weights.
    std::size_t weighted_index(const std::vector<double>& weights);

    std::uint64_t fork_seed(std::string_view name) { return derive_seed(next_u64(), name); }

private:
    std::mt19937_64 engine_;
};

}  // namespace apprank
