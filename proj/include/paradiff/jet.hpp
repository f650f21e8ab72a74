#pragma once

#include <array>
#include <functional>

#include "core.hpp"

namespace paradiff {

// Truncated Taylor series in one variable: t[k] = f^{(k)}(x0) / k!.
class Jet {
public:
    static constexpr int kOrder = 6;
    using Coeffs = std::array<cplx, kOrder + 1>;

    Jet() { t_.fill(cplx{}); }
    Jet(cplx c) {  // NOLINT(google-explicit-constructor)
        t_.fill(cplx{});
        t_[0] = c;
    }
    Jet(double c) : Jet(cplx(c)) {}  // NOLINT(google-explicit-constructor)

    static Jet variable(double x0) {
        Jet j(x0);
        j.t_[1] = 1.0;
        return j;
    }

    cplx value() const { return t_[0]; }
    cplx coeff(int k) const { return t_[k]; }
    cplx& coeff(int k) { return t_[k]; }
    cplx derivative(int k) const { return t_[k] * factorial(k); }

    Jet& operator+=(const Jet& o) {
        for (int k = 0; k <= kOrder; ++k) t_[k] += o.t_[k];
        return *this;
    }
    Jet& operator-=(const Jet& o) {
        for (int k = 0; k <= kOrder; ++k) t_[k] -= o.t_[k];
        return *this;
    }
    Jet operator-() const {
        Jet r;
        for (int k = 0; k <= kOrder; ++k) r.t_[k] = -t_[k];
        return r;
    }
    friend Jet operator+(Jet a, const Jet& b) { return a += b; }
    friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
    friend Jet operator*(const Jet& a, const Jet& b) {
        Jet r;
        for (int k = 0; k <= kOrder; ++k)
            for (int i = 0; i <= k; ++i) r.t_[k] += a.t_[i] * b.t_[k - i];
        return r;
    }
    friend Jet operator/(const Jet& a, const Jet& b) {
        if (b.t_[0] == cplx{}) throw NumericalError("Jet: division by zero");
        Jet r;
        for (int k = 0; k <= kOrder; ++k) {
            cplx s = a.t_[k];
            for (int i = 1; i <= k; ++i) s -= b.t_[i] * r.t_[k - i];
            r.t_[k] = s / b.t_[0];
        }
        return r;
    }

    friend Jet exp(const Jet& a) {
        Jet r;
        r.t_[0] = std::exp(a.t_[0]);
        for (int k = 1; k <= kOrder; ++k) {
            cplx s = 0.0;
            for (int i = 1; i <= k; ++i) s += double(i) * a.t_[i] * r.t_[k - i];
            r.t_[k] = s / double(k);
        }
        return r;
    }
    friend Jet log(const Jet& a) {
        if (a.t_[0] == cplx{}) throw NumericalError("Jet: log of zero");
        Jet r;
        r.t_[0] = std::log(a.t_[0]);
        for (int k = 1; k <= kOrder; ++k) {
            cplx s = a.t_[k];
            for (int i = 1; i < k; ++i) s -= double(i) / k * r.t_[i] * a.t_[k - i];
            r.t_[k] = s / a.t_[0];
        }
        return r;
    }
    // a^p with a_0 != 0
    friend Jet pow(const Jet& a, double p) {
        if (p == 0.0) return Jet(1.0);
        if (p == std::floor(p) && p > 0 && p <= 8) {
            Jet r(1.0);
            for (int i = 0; i < static_cast<int>(p); ++i) r = r * a;
            return r;
        }
        if (a.t_[0] == cplx{}) throw NumericalError("Jet: non-integer power of zero");
        Jet r;
        r.t_[0] = std::pow(a.t_[0], p);
        for (int k = 1; k <= kOrder; ++k) {
            cplx s = 0.0;
            for (int i = 1; i <= k; ++i) s += (p * i - (k - i)) * a.t_[i] * r.t_[k - i];
            r.t_[k] = s / (double(k) * a.t_[0]);
        }
        return r;
    }
    friend Jet sqrt(const Jet& a) { return pow(a, 0.5); }
    friend Jet sin(const Jet& a) { return sincos(a).first; }
    friend Jet cos(const Jet& a) { return sincos(a).second; }
    friend std::pair<Jet, Jet> sincos(const Jet& a) {
        Jet s, c;
        s.t_[0] = std::sin(a.t_[0]);
        c.t_[0] = std::cos(a.t_[0]);
        for (int k = 1; k <= kOrder; ++k) {
            cplx ss = 0.0, cc = 0.0;
            for (int i = 1; i <= k; ++i) {
                ss += double(i) * a.t_[i] * c.t_[k - i];
                cc -= double(i) * a.t_[i] * s.t_[k - i];
            }
            s.t_[k] = ss / double(k);
            c.t_[k] = cc / double(k);
        }
        return {s, c};
    }
    // Real-analytic branch of |x| and sign(x) (sign(0) = 0) at the expansion point.
    friend Jet abs(const Jet& a) { return sign(a) * a; }
    friend Jet sign(const Jet& a) {
        const double v = a.t_[0].real();
        return Jet(v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0));
    }
    friend Jet conj(const Jet& a) {
        Jet r;
        for (int k = 0; k <= kOrder; ++k) r.t_[k] = std::conj(a.t_[k]);
        return r;
    }
    // <x> = sqrt(1 + x^2)
    friend Jet jbracket(const Jet& a) { return sqrt(Jet(1.0) + a * a); }

private:
    Coeffs t_;
};

// A function of xi evaluated through jets, so any derivative up to Jet::kOrder is exact.
using XiFn = std::function<Jet(const Jet&)>;

inline cplx xi_derivative(const XiFn& g, double xi, int beta) {
    require(beta <= Jet::kOrder, "xi_derivative: order above jet capacity");
    return g(Jet::variable(xi)).derivative(beta);
}

namespace xifn {
inline XiFn constant(cplx c) {
    return [c](const Jet&) { return Jet(c); };
}
inline XiFn power(int k) {
    return [k](const Jet& x) { return pow(x, double(k)); };
}
// <xi>^m
inline XiFn jpow(double m) {
    return [m](const Jet& x) { return pow(jbracket(x), m); };
}
}  // namespace xifn

}  // namespace paradiff
