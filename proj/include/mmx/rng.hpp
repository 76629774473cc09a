#pragma once

#include <cmath>
#include <cstdint>

#include "errors.hpp"

namespace mmx {

// Identifies one reproducible random stream. Replicate r of an experiment
// runs on (master, stream = r), so replicates can be drawn in any order or
// in parallel without changing the result.
struct Seed {
    std::uint64_t master = 0;
    std::uint64_t stream = 0;
};

namespace detail {

inline constexpr std::uint64_t golden = 0x9e3779b97f4a7c15ULL;

// splitmix64 finalizer; full-period bijection on 64-bit words
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace detail

// Combines arbitrary 64-bit tokens into one stream id (used to derive
// sweep-point seeds from (axis, value, replicate)).
inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
    return detail::mix64(h ^ (v + detail::golden + (h << 6) + (h >> 2)));
}

// Counter-based generator: draw i of stream (master, stream) is
// mix64(base + i*golden), so streams are splittable and draws are
// independent of evaluation order across platforms.
class RandomStream {
  public:
    explicit RandomStream(Seed seed)
        : base_(detail::mix64(detail::mix64(seed.master + detail::golden) ^
                              detail::mix64(seed.stream * 0xda942042e4dd58b5ULL + 1))) {}

    std::uint64_t next_u64() {
        ++counter_;
        return detail::mix64(base_ + counter_ * detail::golden);
    }

    // uniform on (0, 1]
    double uniform01() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    // uniform on [0, n)
    int uniform_int(int n) {
        if (n <= 0) throw invalid_spec("uniform_int: n must be positive");
        return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
    }

    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Knuth's product method below lambda <= 30; larger intensities are
    // split additively into <= 30 chunks, which is exact for Poisson.
    long poisson(double lambda) {
        if (lambda < 0 || !std::isfinite(lambda))
            throw invalid_spec("poisson: lambda must be finite and nonnegative");
        if (lambda == 0) return 0;
        long total = 0;
        while (lambda > 30.0) {
            total += poisson_knuth(30.0);
            lambda -= 30.0;
        }
        return total + poisson_knuth(lambda);
    }

  private:
    long poisson_knuth(double lambda) {
        const double limit = std::exp(-lambda);
        long n = 0;
        double prod = uniform01();
        while (prod > limit) {
            ++n;
            prod *= uniform01();
        }
        return n;
    }

    std::uint64_t base_;
    std::uint64_t counter_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace mmx
