#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "crv/errors.hpp"

namespace crv {

/// Non-negative real with an int64 binary exponent. Link weights raise a
/// ratio to the number of common idle channels (up to 100), which overflows
/// double for realistic inputs; this type keeps the full dynamic range while
/// preserving exact, reproducible comparison and summation semantics.
///
/// Representation: value = mant * 2^exp2 with mant in [0.5, 1), or exact zero.
class WideReal {
  public:
    WideReal() : mant_(0.0), exp2_(0) {}

    explicit WideReal(double v) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw InvalidInput("WideReal requires a finite non-negative value");
        }
        if (v == 0.0) {
            mant_ = 0.0;
            exp2_ = 0;
            return;
        }
        int e = 0;
        mant_ = std::frexp(v, &e);
        exp2_ = e;
    }

    static WideReal zero() { return WideReal(); }

    bool is_zero() const { return mant_ == 0.0; }

    double mantissa() const { return mant_; }
    std::int64_t exponent2() const { return exp2_; }

    /// Lossless when the value fits a double; +/-0 and inf saturation otherwise.
    double to_double() const {
        if (is_zero()) return 0.0;
        if (exp2_ > 1100) return std::numeric_limits<double>::infinity();
        if (exp2_ < -1100) return 0.0;
        return std::ldexp(mant_, static_cast<int>(exp2_));
    }

    /// log10 of the value (-inf for zero); handy for traces.
    double log10() const {
        if (is_zero()) return -std::numeric_limits<double>::infinity();
        return std::log10(mant_) + static_cast<double>(exp2_) * 0.30102999566398119521;
    }

    WideReal operator*(const WideReal& o) const {
        if (is_zero() || o.is_zero()) return zero();
        return normalized(mant_ * o.mant_, exp2_ + o.exp2_);
    }

    WideReal operator/(const WideReal& o) const {
        if (o.is_zero()) throw InvalidInput("WideReal division by zero");
        if (is_zero()) return zero();
        return normalized(mant_ / o.mant_, exp2_ - o.exp2_);
    }

    WideReal operator+(const WideReal& o) const {
        if (is_zero()) return o;
        if (o.is_zero()) return *this;
        const WideReal* hi = this;
        const WideReal* lo = &o;
        if (cmp(*hi, *lo) < 0) std::swap(hi, lo);
        std::int64_t shift = hi->exp2_ - lo->exp2_;
        if (shift > 64) return *hi; // below representable contribution
        double m = hi->mant_ + std::ldexp(lo->mant_, -static_cast<int>(shift));
        return normalized(m, hi->exp2_);
    }

    WideReal& operator+=(const WideReal& o) { return *this = *this + o; }

    /// Integer power by squaring; n >= 0.
    WideReal pow_int(int n) const {
        if (n < 0) throw InvalidInput("WideReal::pow_int requires n >= 0");
        WideReal result(1.0);
        WideReal base = *this;
        while (n > 0) {
            if (n & 1) result = result * base;
            base = base * base;
            n >>= 1;
        }
        return result;
    }

    bool operator==(const WideReal& o) const { return cmp(*this, o) == 0; }
    bool operator!=(const WideReal& o) const { return cmp(*this, o) != 0; }
    bool operator<(const WideReal& o) const { return cmp(*this, o) < 0; }
    bool operator<=(const WideReal& o) const { return cmp(*this, o) <= 0; }
    bool operator>(const WideReal& o) const { return cmp(*this, o) > 0; }
    bool operator>=(const WideReal& o) const { return cmp(*this, o) >= 0; }

  private:
    static WideReal normalized(double m, std::int64_t e) {
        // m comes from products/sums of normalized mantissas: (0, 4).
        int adj = 0;
        m = std::frexp(m, &adj);
        WideReal r;
        r.mant_ = m;
        r.exp2_ = e + adj;
        return r;
    }

    static int cmp(const WideReal& a, const WideReal& b) {
        if (a.is_zero() && b.is_zero()) return 0;
        if (a.is_zero()) return -1;
        if (b.is_zero()) return 1;
        if (a.exp2_ != b.exp2_) return a.exp2_ < b.exp2_ ? -1 : 1;
        if (a.mant_ != b.mant_) return a.mant_ < b.mant_ ? -1 : 1;
        return 0;
    }

    double mant_;
    std::int64_t exp2_;
};

} // namespace crv
