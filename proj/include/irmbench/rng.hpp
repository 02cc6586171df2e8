#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "irmbench/matrix.hpp"

namespace irmbench {

// Deterministic seed derivation. Child streams are addressed by mixing the
// parent seed with integer/string components; the result does not depend on
// execution order, so parallel workers can derive their own streams.
uint64_t splitmix64(uint64_t& state);
uint64_t fnv1a64(std::string_view s);
uint64_t mix_seed(std::initializer_list<uint64_t> parts);

// Seeded generator. Gaussian sampling is Box-Muller on top of mt19937_64 so
// streams are reproducible bit-for-bit across standard libraries.
class Rng {
  public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t bits() { return gen_(); }
    // Uniform in [0, 1).
    double uniform();
    // Uniform in (0, 1].
    double uniform_pos();
    double normal();
    // Uniform integer in [0, n).
    uint64_t below(uint64_t n);
    bool bernoulli(double p) { return uniform() < p; }
    // +1 with probability p, else -1.
    double pm1(double p) { return bernoulli(p) ? 1.0 : -1.0; }

    std::vector<double> normal_vec(int n);
    Matrix normal_matrix(int rows, int cols, double stddev = 1.0);
    std::vector<int> permutation(int n);

  private:
    std::mt19937_64 gen_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace irmbench
