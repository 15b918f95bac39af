#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ergo {

using BigInt = boost::multiprecision::cpp_int;

// Exact rational number, always stored reduced with a positive denominator.
class Rational {
public:
    Rational() : num_(0), den_(1) {}
    Rational(long long n) : num_(n), den_(1) {}
    Rational(BigInt n) : num_(std::move(n)), den_(1) {}
    Rational(BigInt n, BigInt d) : num_(std::move(n)), den_(std::move(d)) { normalize(); }

    const BigInt& num() const { return num_; }
    const BigInt& den() const { return den_; }

    bool is_zero() const { return num_ == 0; }
    bool is_integer() const { return den_ == 1; }
    int sign() const { return num_ < 0 ? -1 : (num_ > 0 ? 1 : 0); }

    Rational operator-() const { return Rational(unchecked{}, -num_, den_); }

    friend Rational operator+(const Rational& a, const Rational& b) {
        return Rational(a.num_ * b.den_ + b.num_ * a.den_, a.den_ * b.den_);
    }
    friend Rational operator-(const Rational& a, const Rational& b) {
        return Rational(a.num_ * b.den_ - b.num_ * a.den_, a.den_ * b.den_);
    }
    friend Rational operator*(const Rational& a, const Rational& b) {
        return Rational(a.num_ * b.num_, a.den_ * b.den_);
    }
    friend Rational operator/(const Rational& a, const Rational& b) {
        if (b.num_ == 0) throw std::domain_error("Rational: division by zero");
        return Rational(a.num_ * b.den_, a.den_ * b.num_);
    }

    Rational& operator+=(const Rational& o) { return *this = *this + o; }
    Rational& operator-=(const Rational& o) { return *this = *this - o; }
    Rational& operator*=(const Rational& o) { return *this = *this * o; }
    Rational& operator/=(const Rational& o) { return *this = *this / o; }

    friend bool operator==(const Rational& a, const Rational& b) {
        return a.num_ == b.num_ && a.den_ == b.den_;
    }
    friend bool operator!=(const Rational& a, const Rational& b) { return !(a == b); }
    friend bool operator<(const Rational& a, const Rational& b) {
        return a.num_ * b.den_ < b.num_ * a.den_;
    }
    friend bool operator>(const Rational& a, const Rational& b) { return b < a; }
    friend bool operator<=(const Rational& a, const Rational& b) { return !(b < a); }
    friend bool operator>=(const Rational& a, const Rational& b) { return !(a < b); }

    Rational abs() const { return num_ < 0 ? -*this : *this; }

    double to_double() const {
        return static_cast<double>(boost::multiprecision::cpp_rational(num_, den_));
    }

    std::string to_string() const {
        std::string s = num_.str();
        if (den_ != 1) s += "/" + den_.str();
        return s;
    }

    // Accepts "p/q", integers ("-4"), and decimal/scientific forms ("0.1", "-4.01", "1e3").
    static Rational parse(const std::string& text);

private:
    struct unchecked {};
    Rational(unchecked, BigInt n, BigInt d) : num_(std::move(n)), den_(std::move(d)) {}

    void normalize() {
        if (den_ == 0) throw std::domain_error("Rational: zero denominator");
        if (den_ < 0) { num_ = -num_; den_ = -den_; }
        BigInt g = boost::multiprecision::gcd(num_ < 0 ? BigInt(-num_) : num_, den_);
        if (g > 1) { num_ /= g; den_ /= g; }
    }

    BigInt num_;
    BigInt den_;
};

inline Rational Rational::parse(const std::string& text) {
    std::string s = text;
    // strip surrounding whitespace
    size_t b = s.find_first_not_of(" \t");
    size_t e = s.find_last_not_of(" \t");
    if (b == std::string::npos) throw std::invalid_argument("Rational::parse: empty string");
    s = s.substr(b, e - b + 1);

    if (auto slash = s.find('/'); slash != std::string::npos) {
        BigInt n(s.substr(0, slash));
        BigInt d(s.substr(slash + 1));
        return Rational(n, d);
    }

    bool neg = false;
    size_t i = 0;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) { neg = s[i] == '-'; ++i; }

    BigInt mantissa = 0;
    long long frac_digits = 0;
    bool seen_digit = false, seen_dot = false;
    for (; i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.'); ++i) {
        if (s[i] == '.') {
            if (seen_dot) throw std::invalid_argument("Rational::parse: bad number '" + text + "'");
            seen_dot = true;
        } else {
            mantissa = mantissa * 10 + (s[i] - '0');
            if (seen_dot) ++frac_digits;
            seen_digit = true;
        }
    }
    long long exp10 = 0;
    if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
        exp10 = std::stoll(s.substr(i + 1));
        i = s.size();
    }
    if (!seen_digit || i != s.size())
        throw std::invalid_argument("Rational::parse: bad number '" + text + "'");

    BigInt num = neg ? BigInt(-mantissa) : mantissa;
    BigInt den = 1;
    long long shift = exp10 - frac_digits;
    BigInt p10 = boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(shift < 0 ? -shift : shift));
    if (shift >= 0) num *= p10; else den = p10;
    return Rational(num, den);
}

// Positive generator of the discrete additive group spanned by the inputs,
// i.e. gcd of the fractions: scale to the common denominator, gcd the
// numerators. Returns nullopt for the trivial group (all generators zero).
inline std::optional<Rational> rational_group_gcd(const std::vector<Rational>& generators) {
    BigInt den_lcm = 1;
    bool any_nonzero = false;
    for (const auto& g : generators) {
        if (g.is_zero()) continue;
        any_nonzero = true;
        den_lcm = boost::multiprecision::lcm(den_lcm, g.den());
    }
    if (!any_nonzero) return std::nullopt;
    BigInt num_gcd = 0;
    for (const auto& g : generators) {
        if (g.is_zero()) continue;
        BigInt scaled = g.num() * (den_lcm / g.den());
        num_gcd = boost::multiprecision::gcd(num_gcd, scaled < 0 ? BigInt(-scaled) : scaled);
    }
    return Rational(num_gcd, den_lcm);
}

} // namespace ergo
