#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace vcqe {

// Seedable generator with a serializable state so training runs can resume
// bit-compatibly. Uniform/normal draws are derived from the raw engine output
// directly instead of std::*_distribution, whose sequences are not pinned by
// the standard.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    // [0, 1)
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n)
    int uniform_int(int n) {
        if (n <= 0) throw std::invalid_argument("Rng::uniform_int: n must be positive");
        return static_cast<int>(engine_() % static_cast<std::uint64_t>(n));
    }

    // Standard normal via Box-Muller; second value cached.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    std::string serialize() const {
        std::uint64_t bits = 0;
        static_assert(sizeof(bits) == sizeof(cached_));
        std::memcpy(&bits, &cached_, sizeof(bits));
        std::ostringstream os;
        os << engine_ << " " << (has_cached_ ? 1 : 0) << " " << bits;
        return os.str();
    }

    static Rng deserialize(const std::string& s) {
        Rng r;
        std::istringstream is(s);
        is >> r.engine_;
        int flag = 0;
        std::uint64_t bits = 0;
        is >> flag >> bits;
        if (is.fail()) throw std::runtime_error("Rng::deserialize: malformed state");
        r.has_cached_ = flag != 0;
        std::memcpy(&r.cached_, &bits, sizeof(bits));
        return r;
    }

    std::uint64_t raw() { return engine_(); }

private:
    std::mt19937_64 engine_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

}  // namespace vcqe
