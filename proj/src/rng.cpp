#include "irmbench/rng.hpp"

#include <cmath>

namespace irmbench {

uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

uint64_t mix_seed(std::initializer_list<uint64_t> parts) {
    uint64_t state = 0x243f6a8885a308d3ULL;
    uint64_t h = splitmix64(state);
    for (uint64_t p : parts) {
        state ^= p;
        h ^= splitmix64(state);
    }
    return h;
}

double Rng::uniform() {
    return static_cast<double>(bits() >> 11) * 0x1.0p-53;
}

double Rng::uniform_pos() {
    return (static_cast<double>(bits() >> 11) + 1.0) * 0x1.0p-53;
}

double Rng::normal() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_;
    }
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(angle);
    has_cached_ = true;
    return r * std::cos(angle);
}

uint64_t Rng::below(uint64_t n) {
    // Multiply-shift bounded draw; deterministic and adequate here.
    const unsigned __int128 wide = static_cast<unsigned __int128>(bits()) * n;
    return static_cast<uint64_t>(wide >> 64);
}

std::vector<double> Rng::normal_vec(int n) {
    std::vector<double> v(n);
    for (double& x : v) x = normal();
    return v;
}

Matrix Rng::normal_matrix(int rows, int cols, double stddev) {
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = stddev * normal();
    return m;
}

std::vector<int> Rng::permutation(int n) {
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(below(static_cast<uint64_t>(i) + 1));
        std::swap(p[i], p[j]);
    }
    return p;
}

}  // namespace irmbench
