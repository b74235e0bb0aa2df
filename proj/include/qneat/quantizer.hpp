#pragma once

// Learned, bitwise-decomposable quantizers. A basis of k reals induces
// 2^k quantization levels: every signed code b in {-1,+1}^k (weights) or
// unsigned code b in {0,1}^k (activations) maps to the level v.b. Quantizing
// a value picks the level whose half-open interval (t_l, t_{l+1}] contains
// it, where thresholds are midpoints between adjacent distinct levels.
// Bases are fitted by alternating optimization: codes given the basis
// (per-value nearest level), then the basis given the codes (least squares).

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "qneat/errors.hpp"

namespace qneat {

enum class Domain { Signed, Unsigned };

// One code: k bits, index m = coefficient of basis element m.
// For the signed domain bit 1 means +1 and bit 0 means -1.
using Code = std::vector<std::uint8_t>;

inline double code_coefficient(Domain domain, std::uint8_t bit) {
    if (domain == Domain::Signed) return bit ? 1.0 : -1.0;
    return bit ? 1.0 : 0.0;
}

class QuantizerBasis {
public:
    QuantizerBasis(Domain domain, std::vector<double> v, bool degenerate = false)
        : domain_(domain), v_(std::move(v)), degenerate_(degenerate) {
        if (v_.empty()) throw std::invalid_argument("quantizer basis needs k >= 1");
        if (v_.size() > 20) throw std::invalid_argument("quantizer basis k too large");
        rebuild();
    }

    static QuantizerBasis zero(Domain domain, int k) {
        return QuantizerBasis(domain, std::vector<double>(static_cast<std::size_t>(k), 0.0), true);
    }

    Domain domain() const { return domain_; }
    int bits() const { return static_cast<int>(v_.size()); }
    const std::vector<double>& basis() const { return v_; }
    const std::vector<double>& levels() const { return levels_; }
    const std::vector<double>& thresholds() const { return thresholds_; }
    const std::vector<Code>& level_codes() const { return level_codes_; }

    // A degenerate basis carries no information (all levels collapse to 0);
    // inference skips quantization through it.
    bool is_degenerate() const {
        if (degenerate_) return true;
        return std::all_of(v_.begin(), v_.end(), [](double x) { return x == 0.0; });
    }

    // v . b accumulated in ascending basis index order. Level values are
    // built with this same accumulation, which is what makes
    // code_value(encode(x)) == quantize(x) hold exactly.
    double code_value(const Code& code) const {
        if (code.size() != v_.size())
            throw DimensionError("code length does not match basis size");
        double s = 0.0;
        for (std::size_t m = 0; m < v_.size(); ++m)
            s += v_[m] * code_coefficient(domain_, code[m]);
        return s;
    }

    double quantize(double x) const { return levels_[level_index(x)]; }

    // Lexicographically smallest code realizing quantize(x).
    const Code& encode(double x) const { return level_codes_[level_index(x)]; }

    // Squared-error trace recorded by fit_basis, one entry per iteration.
    std::vector<double> fit_errors;

private:
    std::size_t level_index(double x) const {
        // Count of thresholds strictly below x; a value exactly on a
        // threshold lands in the lower interval.
        const auto it = std::lower_bound(thresholds_.begin(), thresholds_.end(), x);
        return static_cast<std::size_t>(it - thresholds_.begin());
    }

    void rebuild() {
        const int k = static_cast<int>(v_.size());
        // Enumerate codes in lexicographic order (element 0 most
        // significant) and keep the first code seen for each distinct level.
        std::map<double, Code> by_level;
        Code code(static_cast<std::size_t>(k));
        const std::uint32_t n = 1u << k;
        for (std::uint32_t c = 0; c < n; ++c) {
            for (int j = 0; j < k; ++j)
                code[static_cast<std::size_t>(j)] =
                    static_cast<std::uint8_t>((c >> (k - 1 - j)) & 1u);
            by_level.emplace(code_value(code), code);
        }
        levels_.clear();
        level_codes_.clear();
        for (auto& [value, lex_min] : by_level) {
            levels_.push_back(value);
            level_codes_.push_back(lex_min);
        }
        thresholds_.clear();
        for (std::size_t i = 0; i + 1 < levels_.size(); ++i)
            thresholds_.push_back((levels_[i] + levels_[i + 1]) / 2.0);
    }

    Domain domain_;
    std::vector<double> v_;
    bool degenerate_ = false;
    std::vector<double> levels_;
    std::vector<Code> level_codes_;
    std::vector<double> thresholds_;
};

struct QuantizerPair {
    QuantizerBasis weights;      // signed
    QuantizerBasis activations;  // unsigned
};

inline double quantization_error(std::span<const double> values,
                                 const QuantizerBasis& basis) {
    double err = 0.0;
    for (double x : values) {
        const double d = x - basis.quantize(x);
        err += d * d;
    }
    return err;
}

namespace detail {

// ||x - B^T v||^2 for a fixed code assignment, summed in input order.
inline double assignment_error(std::span<const double> values,
                               const std::vector<Code>& codes,
                               const QuantizerBasis& probe) {
    double err = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double d = values[i] - probe.code_value(codes[i]);
        err += d * d;
    }
    return err;
}

// Least-squares basis for fixed codes: v = (B B^T)^+ B x. The SVD solve
// covers the singular case (constant or dependent bit rows) with the
// minimum-norm solution.
inline std::vector<double> solve_basis(std::span<const double> values,
                                       const std::vector<Code>& codes,
                                       Domain domain, int k) {
    const auto n = static_cast<Eigen::Index>(values.size());
    Eigen::MatrixXd B(k, n);
    Eigen::VectorXd x(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x(i) = values[static_cast<std::size_t>(i)];
        const Code& c = codes[static_cast<std::size_t>(i)];
        for (int m = 0; m < k; ++m)
            B(m, i) = code_coefficient(domain, c[static_cast<std::size_t>(m)]);
    }
    const Eigen::MatrixXd gram = B * B.transpose();
    const Eigen::VectorXd rhs = B * x;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(gram, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::VectorXd v = svd.solve(rhs);
    return std::vector<double>(v.data(), v.data() + k);
}

inline std::vector<double> default_init(std::span<const double> values,
                                        Domain domain, int k) {
    std::vector<double> v(static_cast<std::size_t>(k));
    if (domain == Domain::Signed) {
        double mean_abs = 0.0;
        for (double x : values) mean_abs += std::fabs(x);
        mean_abs /= static_cast<double>(values.size());
        for (int m = 0; m < k; ++m) v[static_cast<std::size_t>(m)] = mean_abs * std::ldexp(1.0, -m);
    } else {
        const double mx = *std::max_element(values.begin(), values.end());
        for (int m = 0; m < k; ++m) v[static_cast<std::size_t>(m)] = mx * std::ldexp(1.0, -(m + 1));
    }
    return v;
}

} // namespace detail

// Alternating fit: (a) re-encode every value against the current basis,
// (b) solve the least-squares basis for those codes, keeping the previous
// basis if the numeric solve did not improve the shared objective. The
// recorded per-iteration errors are non-increasing and the best iterate is
// returned. An all-zero input yields the flagged zero basis instead of an
// error; dead subgraphs produce that case routinely during evolution.
inline QuantizerBasis fit_basis(std::span<const double> values, int k, int iterations,
                                const std::optional<QuantizerBasis>& init,
                                Domain domain) {
    if (values.empty()) throw std::invalid_argument("fit_basis: no values");
    if (iterations < 1) throw std::invalid_argument("fit_basis: iterations must be >= 1");
    if (k < 1 || k > 20) throw std::invalid_argument("fit_basis: k out of range");

    const bool all_zero =
        std::all_of(values.begin(), values.end(), [](double x) { return x == 0.0; });
    if (all_zero) {
        QuantizerBasis basis = QuantizerBasis::zero(domain, k);
        basis.fit_errors.assign(1, 0.0);
        return basis;
    }

    std::vector<double> v;
    if (init.has_value() && init->bits() == k && init->domain() == domain &&
        !init->is_degenerate()) {
        v = init->basis();
    } else {
        v = detail::default_init(values, domain, k);
    }

    std::vector<double> errors;
    errors.reserve(static_cast<std::size_t>(iterations));
    double best_err = std::numeric_limits<double>::infinity();
    std::vector<double> best_v = v;

    std::vector<Code> codes(values.size());
    for (int t = 0; t < iterations; ++t) {
        const QuantizerBasis current(domain, v);
        for (std::size_t i = 0; i < values.size(); ++i)
            codes[i] = current.encode(values[i]);

        const double err_keep = detail::assignment_error(values, codes, current);
        std::vector<double> v_next = detail::solve_basis(values, codes, domain, k);
        const QuantizerBasis candidate(domain, v_next);
        const double err_next = detail::assignment_error(values, codes, candidate);

        double err;
        if (err_next <= err_keep) {
            v = std::move(v_next);
            err = err_next;
        } else {
            err = err_keep;  // numeric solve regressed, keep previous basis
        }
        errors.push_back(err);
        if (err < best_err) {
            best_err = err;
            best_v = v;
        }
    }

    QuantizerBasis basis(domain, best_v);
    basis.fit_errors = std::move(errors);
    return basis;
}

// Codes for many values packed as bit planes, one 64-bit word stream per
// basis element. Plane m bit i is bit m of value i's code.
struct PackedCodes {
    std::size_t count = 0;
    int bits = 0;
    std::vector<std::vector<std::uint64_t>> planes;

    PackedCodes() = default;
    PackedCodes(std::size_t n, int k)
        : count(n), bits(k),
          planes(static_cast<std::size_t>(k),
                 std::vector<std::uint64_t>((n + 63) / 64, 0)) {}

    void set(std::size_t i, const Code& code) {
        for (int m = 0; m < bits; ++m) {
            auto& word = planes[static_cast<std::size_t>(m)][i / 64];
            const std::uint64_t mask = 1ULL << (i % 64);
            if (code[static_cast<std::size_t>(m)])
                word |= mask;
            else
                word &= ~mask;
        }
    }

    Code get(std::size_t i) const {
        Code code(static_cast<std::size_t>(bits));
        for (int m = 0; m < bits; ++m)
            code[static_cast<std::size_t>(m)] = static_cast<std::uint8_t>(
                (planes[static_cast<std::size_t>(m)][i / 64] >> (i % 64)) & 1u);
        return code;
    }

    // Little-endian byte packing of one plane: value i lives in byte i/8,
    // bit i%8. This is the serialized form.
    std::vector<std::uint8_t> plane_bytes(int m) const {
        std::vector<std::uint8_t> out((count + 7) / 8, 0);
        const auto& plane = planes[static_cast<std::size_t>(m)];
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = static_cast<std::uint8_t>(plane[i / 8] >> (8 * (i % 8)));
        return out;
    }

    void load_plane_bytes(int m, std::span<const std::uint8_t> bytes) {
        if (bytes.size() != (count + 7) / 8)
            throw DimensionError("bit plane has wrong length");
        auto& plane = planes[static_cast<std::size_t>(m)];
        std::fill(plane.begin(), plane.end(), 0);
        for (std::size_t i = 0; i < bytes.size(); ++i)
            plane[i / 8] |= std::uint64_t(bytes[i]) << (8 * (i % 8));
        // Bits past `count` must stay clear; they would corrupt popcounts.
        if (count % 64 != 0 && !plane.empty())
            plane.back() &= (1ULL << (count % 64)) - 1;
    }
};

inline PackedCodes encode_all(std::span<const double> values,
                              const QuantizerBasis& basis) {
    PackedCodes packed(values.size(), basis.bits());
    for (std::size_t i = 0; i < values.size(); ++i)
        packed.set(i, basis.encode(values[i]));
    return packed;
}

// Sum_i Q(w_i) Q(a_i) computed by bit-plane decomposition:
//   sum_{m,n} vw[m] * va[n] * <plane m of w, plane n of a>
// where the plane inner product between a signed plane s and an unsigned
// plane u is the integer 2*popcount(s & u) - popcount(u).
inline double bitwise_dot(const PackedCodes& wcodes, const PackedCodes& acodes,
                          const QuantizerBasis& wbasis, const QuantizerBasis& abasis) {
    if (wcodes.count != acodes.count)
        throw DimensionError("bitwise_dot: code lists differ in length");
    if (wbasis.domain() != Domain::Signed || abasis.domain() != Domain::Unsigned)
        throw std::invalid_argument("bitwise_dot expects signed weights, unsigned activations");
    if (wcodes.bits != wbasis.bits() || acodes.bits != abasis.bits())
        throw DimensionError("bitwise_dot: plane count does not match basis");

    const auto& vw = wbasis.basis();
    const auto& va = abasis.basis();

    std::vector<std::int64_t> act_pop(static_cast<std::size_t>(acodes.bits), 0);
    for (int n = 0; n < acodes.bits; ++n)
        for (std::uint64_t word : acodes.planes[static_cast<std::size_t>(n)])
            act_pop[static_cast<std::size_t>(n)] += std::popcount(word);

    double total = 0.0;
    for (int m = 0; m < wcodes.bits; ++m) {
        const auto& wp = wcodes.planes[static_cast<std::size_t>(m)];
        for (int n = 0; n < acodes.bits; ++n) {
            const auto& ap = acodes.planes[static_cast<std::size_t>(n)];
            std::int64_t both = 0;
            for (std::size_t w = 0; w < wp.size(); ++w)
                both += std::popcount(wp[w] & ap[w]);
            const std::int64_t plane_dot = 2 * both - act_pop[static_cast<std::size_t>(n)];
            total += vw[static_cast<std::size_t>(m)] * va[static_cast<std::size_t>(n)] *
                     static_cast<double>(plane_dot);
        }
    }
    return total;
}

} // namespace qneat
