#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

namespace vidbias {

// splitmix64; used to derive independent child seeds from (seed, tag) pairs.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t hash_str(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Seeded generator with pinned distribution mappings. The standard
// distributions are implementation-defined, so uniform/normal draws are
// mapped from raw engine bits here to keep datasets reproducible across
// toolchains.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : seed_(seed), engine_(splitmix64(seed)) {}

    // uniform in [0, 1)
    double u01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

    // uniform integer in [0, n)
    int uniform_int(int n) {
        if (n <= 1) return 0;
        return static_cast<int>(engine_() % static_cast<uint64_t>(n));
    }

    double normal() {
        double u1 = u01(), u2 = u01();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    bool bernoulli(double p) { return u01() < p; }

    uint64_t seed() const { return seed_; }

    // Independent child stream keyed on the construction seed; does not
    // advance or depend on this stream's position.
    Rng child(std::string_view tag, uint64_t index = 0) const {
        return Rng(splitmix64(seed_ ^ hash_str(tag) ^ splitmix64(index)));
    }

    std::string serialize() const {
        std::ostringstream os;
        os << seed_ << ' ' << engine_;
        return os.str();
    }

    static Rng deserialize(const std::string& s) {
        Rng r;
        std::istringstream is(s);
        is >> r.seed_ >> r.engine_;
        return r;
    }

private:
    uint64_t seed_ = 0;
    std::mt19937_64 engine_;
};

// Canonical per-clip seed derivation: (dataset seed, split tag, clip index).
inline uint64_t derive_seed(uint64_t root, std::string_view tag, uint64_t index) {
    return splitmix64(root ^ hash_str(tag) ^ splitmix64(index + 0x51ed270b));
}

}  // namespace vidbias
