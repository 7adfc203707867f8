#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>

namespace cwbsim {

// Stream derivation and the few distributions the simulator needs.
//
// The std:: distributions are implementation-defined, so two standard
// libraries can turn the same engine output into different doubles. All
// sampling goes through the functions below so that a (config, seed) pair
// produces identical results everywhere.

inline constexpr std::uint64_t splitmix_step(std::uint64_t& state) noexcept {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// SplitMix64 generator. Seeding is a single word, which matters because
/// the simulator opens a fresh stream per (user, step, phase).
class Rng {
public:
    using result_type = std::uint64_t;

    explicit constexpr Rng(std::uint64_t seed = 0) noexcept : state_(seed) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept {
        return std::numeric_limits<result_type>::max();
    }

    constexpr result_type operator()() noexcept { return splitmix_step(state_); }

private:
    std::uint64_t state_;
};

/// Mixes an ordered list of words into one seed. Order matters.
inline constexpr std::uint64_t derive_seed(std::uint64_t base,
                                           std::initializer_list<std::uint64_t> parts) noexcept {
    std::uint64_t state = base;
    std::uint64_t h = splitmix_step(state);
    for (std::uint64_t p : parts) {
        state = h ^ (p + 0x632BE59BD9B4E019ULL);
        h = splitmix_step(state);
    }
    return h;
}

/// Phase tags used as one component of derived stream seeds.
enum class Phase : std::uint64_t {
    init_graph = 1,
    init_users = 2,
    post = 3,
    exogenous = 4,
    rank = 5,
    connect = 6,
    detect = 7,
    run = 8,
};

inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> parts) noexcept {
    return Rng(derive_seed(seed, parts));
}

/// Uniform double in [0, 1) with 53 random bits.
template <class URBG>
double uniform01(URBG& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <class URBG>
double uniform(URBG& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

/// Box-Muller; consumes two draws per call.
template <class URBG>
double normal(URBG& rng, double mean, double sd) {
    const double u1 = 1.0 - uniform01(rng); // (0, 1]
    const double u2 = uniform01(rng);
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    return mean + sd * z;
}

/// True with probability p. p <= 0 is never true, p >= 1 always.
template <class URBG>
bool bernoulli(URBG& rng, double p) {
    return uniform01(rng) < p;
}

/// Uniform index in [0, n). n must be positive.
template <class URBG>
std::size_t uniform_index(URBG& rng, std::size_t n) {
    auto i = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
    return i < n ? i : n - 1;
}

} // namespace cwbsim
