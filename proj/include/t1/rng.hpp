#ifndef T1_RNG_HPP
#define T1_RNG_HPP

#include <cstdint>
#include <string_view>
#include <vector>

namespace t1 {

// Deterministic xoshiro256++ generator. We carry our own generator and
// Gaussian transform instead of <random> so that streams are bit-identical
// across platforms and standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed);

    uint64_t next_u64();

    // Uniform in [0, 1).
    double uniform();

    // Standard normal via Box-Muller. One value per call; the pair's second
    // value is cached.
    double normal();

    // Uniform integer in [0, n). n must be positive.
    uint64_t randint(uint64_t n);

    // Derives an independent stream. Pure: does not advance this generator.
    Rng fork(uint64_t stream) const;

    // Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(randint(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t s_[4];
    uint64_t seed_;
    double cached_normal_ = 0.0;
    bool has_cached_ = false;
};

uint64_t splitmix64(uint64_t x);

// FNV-1a over bytes; used for stable word hashing.
uint64_t fnv1a64(std::string_view bytes);

}  // namespace t1

#endif
