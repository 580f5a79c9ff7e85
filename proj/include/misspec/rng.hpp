#pragma once

#include <cstdint>
#include <random>

namespace misspec {

// Seeded generator wrapper. Every sampler in the library takes one of these
// explicitly so that parallel callers never share generator state and runs
// are reproducible from a single integer seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // Derive an independent stream, e.g. one per MCMC chain.
    static Rng stream(std::uint64_t seed, std::uint64_t index) {
        std::seed_seq seq{seed, index, std::uint64_t{0x9e3779b97f4a7c15ULL}};
        std::mt19937_64 g(seq);
        Rng r(0);
        r.gen_ = g;
        return r;
    }

    double uniform() { return unif_(gen_); }
    double gauss() { return norm_(gen_); }

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
    std::uniform_real_distribution<double> unif_{0.0, 1.0};
    std::normal_distribution<double> norm_{0.0, 1.0};
};

}  // namespace misspec
