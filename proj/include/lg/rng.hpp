#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <sstream>
#include <string>

namespace lg {

// splitmix64 finalizer; used both as a bit mixer and for seed derivation.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stream identifiers for seed derivation. Every random draw in a run flows
// from the master seed through derive_seed(master, {generation, stream, index}),
// so results do not depend on execution order or worker count.
enum SeedStream : uint64_t {
    kStreamSplit = 1,
    kStreamTask = 2,
    kStreamTrain = 3,
    kStreamMutate = 4,
    kStreamInherit = 5,
    kStreamCritic = 6,
    kStreamTournament = 7,
    kStreamParents = 8,
    kStreamInitStructure = 9,
    kStreamAncestor = 10,
    kStreamWorld = 11,
    kStreamEval = 12,
};

inline uint64_t derive_seed(uint64_t master, std::initializer_list<uint64_t> path) {
    uint64_t h = mix64(master);
    for (uint64_t p : path)
        h = mix64(h ^ mix64(p + 0x1357fd02ab4c5e6fULL));
    return h;
}

// Thin wrapper around mt19937_64 with portable bounded draws. The standard
// distributions are implementation-defined, so the few primitives we need are
// spelled out here; identical seeds give identical sequences on any platform.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next() { return gen_(); }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n); n must be > 0. Rejection keeps it unbiased.
    uint64_t below(uint64_t n) {
        const uint64_t threshold = (0ULL - n) % n;
        for (;;) {
            uint64_t r = gen_();
            if (r >= threshold)
                return r % n;
        }
    }

    float uniform_float(float lo, float hi) {
        return lo + static_cast<float>(uniform()) * (hi - lo);
    }

    std::string save_state() const {
        std::ostringstream os;
        os << gen_;
        return os.str();
    }

    void load_state(const std::string& s) {
        std::istringstream is(s);
        is >> gen_;
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace lg
