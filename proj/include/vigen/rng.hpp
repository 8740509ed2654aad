#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace vigen {

// splitmix64 finalizer; derives independent stream seeds from
// (master_seed, index) pairs so clip i never shares state with clip j.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
    uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 0x632be59bd9b4e019ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// mt19937_64 engine with hand-written distribution transforms. The standard
// pins the engine's output sequence exactly; the distribution classes are
// implementation-defined, so uniform/normal are spelled out here to keep
// clip generation and checkpoint-resume runs bitwise stable.
class Rng {
  public:
    explicit Rng(uint64_t seed) : eng_(seed) {}
    Rng(uint64_t master_seed, uint64_t index) : eng_(mix_seed(master_seed, index)) {}

    uint64_t next_u64() { return eng_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // {0, ..., n-1}, n > 0
    uint64_t uniform_index(uint64_t n) {
        return static_cast<uint64_t>((static_cast<__uint128_t>(eng_()) * n) >> 64);
    }

    // inclusive range
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(uniform_index(static_cast<uint64_t>(hi - lo) + 1));
    }

    // standard normal, Box-Muller; always consumes two engine draws
    double normal() {
        double u1 = 1.0 - uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    float normal_f() { return static_cast<float>(normal()); }

  private:
    std::mt19937_64 eng_;
};

}  // namespace vigen
