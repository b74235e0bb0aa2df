#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>

namespace qneat {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Exact floating-point accumulator (Shewchuk partials, as in Python's
// math.fsum). The result is the correctly rounded sum of the inputs and is
// therefore independent of the order in which terms were added. Network
// evaluation relies on this: the same set of edge contributions must produce
// bit-identical node values no matter how the graph was rewritten.
class ExactSum {
public:
    void add(double x) {
        std::size_t i = 0;
        for (std::size_t j = 0; j < count_; ++j) {
            double y = partials_[j];
            if (std::fabs(x) < std::fabs(y)) std::swap(x, y);
            const double hi = x + y;
            const double lo = y - (hi - x);
            if (lo != 0.0) partials_[i++] = lo;
            x = hi;
        }
        count_ = i;
        if (x != 0.0) {
            if (count_ >= partials_.size())
                throw std::overflow_error("ExactSum: partials overflow");
            partials_[count_++] = x;
        }
    }

    // Rounds the exact partial representation to the nearest double
    // (ties to even), matching fsum semantics.
    double value() const {
        if (count_ == 0) return 0.0;
        std::size_t n = count_;
        double hi = partials_[--n];
        double lo = 0.0;
        while (n > 0) {
            const double x = hi;
            const double y = partials_[--n];
            hi = x + y;
            const double yr = hi - x;
            lo = y - yr;
            if (lo != 0.0) break;
        }
        // Half-way case: adjust if rounding the remaining tail would flip it.
        if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) ||
                      (lo > 0.0 && partials_[n - 1] > 0.0))) {
            const double y = lo * 2.0;
            const double x = hi + y;
            if (y == x - hi) hi = x;
        }
        return hi;
    }

    void reset() { count_ = 0; }

private:
    // 40 partials suffice for any set of finite doubles; 48 leaves slack.
    std::array<double, 48> partials_{};
    std::size_t count_ = 0;
};

inline double exact_sum(std::span<const double> xs) {
    ExactSum acc;
    for (double x : xs) acc.add(x);
    return acc.value();
}

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derives an independent seed stream, e.g. one per cross-validation fold.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt) {
    return splitmix64(splitmix64(base) ^ salt);
}

} // namespace qneat
