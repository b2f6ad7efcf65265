#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace rcml {

/// Seeded generator whose output is identical across standard libraries.
/// The std engines are fully specified; the std distributions are not, so
/// the distributions here are written against the raw engine output.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n).
    std::size_t below(std::size_t n);
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[below(i)]);
        }
    }

    /// `count` distinct elements of `pool`, uniformly without replacement.
    template <typename T>
    std::vector<T> sample(std::span<const T> pool, std::size_t count) {
        std::vector<T> copy(pool.begin(), pool.end());
        for (std::size_t i = 0; i < count; ++i) std::swap(copy[i], copy[i + below(copy.size() - i)]);
        copy.resize(count);
        return copy;
    }

    /// Derives an independent stream for a named purpose.
    Rng fork(std::uint64_t salt);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace rcml
