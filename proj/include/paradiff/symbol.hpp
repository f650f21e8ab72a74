#pragma once

#include <algorithm>
#include <memory>
#include <optional>

#include "jet.hpp"
#include "torus.hpp"

namespace paradiff {

// x-Fourier coefficients of d_xi^beta a(., xi).
using SliceFn = std::function<FourierField(double xi, int beta)>;

inline constexpr double kFdStep = 0.5;

// Numerical symbol a(x, xi). The x-dependence is spectral (nx modes), xi-derivatives
// are analytic up to `analytic_beta` and 4th-order central differences beyond.
class Symbol {
public:
    Symbol() = default;
    Symbol(double order, int nx, SliceFn slice, int analytic_beta)
        : order_(order), nx_(nx), slice_(std::move(slice)), analytic_beta_(analytic_beta) {
        require(std::isfinite(order), "Symbol: order metadata missing");
    }

    double order() const { return order_; }
    int nx() const { return nx_; }
    int analytic_beta() const { return analytic_beta_; }
    bool valid() const { return static_cast<bool>(slice_); }

    // Metadata: degree of homogeneity in U (-1 if not homogeneous), class parameter d,
    // real-valued flag, x-independence flag.
    int homogeneity = -1;
    double d = 0.0;
    bool real_valued = false;
    bool x_independent = false;

    FourierField slice(double xi, int alpha = 0, int beta = 0) const {
        require(valid(), "Symbol: empty symbol");
        FourierField s = xi_slice(xi, beta);
        return alpha == 0 ? s : derivative(s, alpha);
    }

    cplx eval(double x, double xi, int alpha = 0, int beta = 0) const {
        return slice(xi, alpha, beta).eval(x);
    }

    Symbol with_order(double m) const {
        Symbol s = *this;
        s.order_ = m;
        return s;
    }

private:
    FourierField xi_slice(double xi, int beta) const {
        if (beta <= analytic_beta_) return slice_(xi, beta);
        const double h = kFdStep;
        FourierField r = xi_slice(xi - 2 * h, beta - 1);
        r -= 8.0 * xi_slice(xi - h, beta - 1);
        r += 8.0 * xi_slice(xi + h, beta - 1);
        r -= xi_slice(xi + 2 * h, beta - 1);
        return r * cplx(1.0 / (12.0 * h));
    }

    double order_ = std::numeric_limits<double>::quiet_NaN();
    int nx_ = 0;
    SliceFn slice_;
    int analytic_beta_ = 0;
};

struct SeparableTerm {
    FourierField c;  // x-dependence
    XiFn g;          // xi-dependence
};

// sum_t c_t(x) g_t(xi)
inline Symbol separable(double order, std::vector<SeparableTerm> terms) {
    int nx = 0;
    for (const auto& t : terms) nx = std::max(nx, t.c.modes());
    auto shared = std::make_shared<std::vector<SeparableTerm>>(std::move(terms));
    bool xind = true;
    for (const auto& t : *shared)
        for (int n = -t.c.modes(); n <= t.c.modes(); ++n)
            if (n != 0 && t.c(n) != cplx{}) xind = false;
    Symbol s(order, nx, [shared, nx](double xi, int beta) {
        FourierField r(nx);
        const Jet v = Jet::variable(xi);
        for (const auto& t : *shared) r.axpy(t.g(v).derivative(beta), t.c);
        return r;
    }, Jet::kOrder);
    s.x_independent = xind;
    return s;
}

// x-independent symbol g(xi).
inline Symbol multiplier(double order, XiFn g, int nx = 0) {
    return separable(order, {{FourierField::constant(nx, 1.0), std::move(g)}});
}

// c(x) g(xi) with c given by its Fourier coefficients.
inline Symbol times_field(double order, const FourierField& c, XiFn g) {
    return separable(order, {{c, std::move(g)}});
}

// General closure a(x, xi) evaluated on jets; x-coefficients by DFT on 2(2nx+1) points.
inline Symbol sampled(double order, int nx, std::function<Jet(double, const Jet&)> fn) {
    const int M = 2 * (2 * nx + 1);
    const auto xs = grid_points(M);
    return Symbol(order, nx, [fn = std::move(fn), xs, nx](double xi, int beta) {
        std::vector<cplx> v(xs.size());
        const Jet j = Jet::variable(xi);
        for (size_t l = 0; l < xs.size(); ++l) v[l] = fn(xs[l], j).derivative(beta);
        return analyze(v, nx);
    }, Jet::kOrder);
}

// Closure without jets; every xi-derivative uses finite differences.
inline Symbol sampled_plain(double order, int nx, std::function<cplx(double, double)> fn) {
    const int M = 2 * (2 * nx + 1);
    const auto xs = grid_points(M);
    return Symbol(order, nx, [fn = std::move(fn), xs, nx](double xi, int) {
        std::vector<cplx> v(xs.size());
        for (size_t l = 0; l < xs.size(); ++l) v[l] = fn(xs[l], xi);
        return analyze(v, nx);
    }, 0);
}

namespace sym {

inline Symbol sum(const Symbol& a, const Symbol& b) {
    const int nx = std::max(a.nx(), b.nx());
    Symbol s(std::max(a.order(), b.order()), nx, [a, b](double xi, int beta) {
        return a.slice(xi, 0, beta) + b.slice(xi, 0, beta);
    }, std::min(a.analytic_beta(), b.analytic_beta()));
    s.x_independent = a.x_independent && b.x_independent;
    s.real_valued = a.real_valued && b.real_valued;
    return s;
}

inline Symbol scale(const Symbol& a, cplx c) {
    Symbol s(a.order(), a.nx(), [a, c](double xi, int beta) { return c * a.slice(xi, 0, beta); },
             a.analytic_beta());
    s.x_independent = a.x_independent;
    s.real_valued = a.real_valued && c.imag() == 0.0;
    s.homogeneity = a.homogeneity;
    return s;
}

inline Symbol difference(const Symbol& a, const Symbol& b) { return sum(a, scale(b, -1.0)); }

// Pointwise product; xi-derivatives by Leibniz.
// The x-band of the product is the sum of the bands, so no modes are lost.
inline Symbol product(const Symbol& a, const Symbol& b) {
    const int nx = (a.x_independent || b.x_independent) ? std::max(a.nx(), b.nx()) : a.nx() + b.nx();
    Symbol s(a.order() + b.order(), nx, [a, b, nx](double xi, int beta) {
        FourierField r(nx);
        for (int q = 0; q <= beta; ++q) {
            const FourierField fa = a.slice(xi, 0, q), fb = b.slice(xi, 0, beta - q);
            if (a.x_independent) r.axpy(binomial(beta, q) * fa.mean(), fb);
            else if (b.x_independent) r.axpy(binomial(beta, q) * fb.mean(), fa);
            else r.axpy(binomial(beta, q), pointwise({&fa, &fb}, nx, 2, [](const cplx* v) { return v[0] * v[1]; }));
        }
        return r;
    }, std::min(a.analytic_beta(), b.analytic_beta()));
    s.x_independent = a.x_independent && b.x_independent;
    return s;
}

inline Symbol dx(const Symbol& a, int alpha = 1) {
    Symbol s(a.order(), a.nx(), [a, alpha](double xi, int beta) { return a.slice(xi, alpha, beta); },
             a.analytic_beta());
    s.x_independent = a.x_independent;
    s.homogeneity = a.homogeneity;
    return s;
}

inline Symbol dxi(const Symbol& a, int beta0 = 1) {
    Symbol s(a.order() - beta0, a.nx(),
             [a, beta0](double xi, int beta) { return a.slice(xi, 0, beta + beta0); },
             std::max(0, a.analytic_beta() - beta0));
    s.x_independent = a.x_independent;
    s.homogeneity = a.homogeneity;
    return s;
}

// conj(a(x, xi))
inline Symbol conj(const Symbol& a) {
    Symbol s(a.order(), a.nx(), [a](double xi, int beta) { return conj_field(a.slice(xi, 0, beta)); },
             a.analytic_beta());
    s.x_independent = a.x_independent;
    s.real_valued = a.real_valued;
    s.homogeneity = a.homogeneity;
    return s;
}

// conj(a(x, -xi)), the lower-right entry of a real-to-real matrix symbol.
inline Symbol conj_reflect(const Symbol& a) {
    Symbol s(a.order(), a.nx(), [a](double xi, int beta) {
        return (beta % 2 ? -1.0 : 1.0) * conj_field(a.slice(-xi, 0, beta));
    }, a.analytic_beta());
    s.x_independent = a.x_independent;
    s.homogeneity = a.homogeneity;
    return s;
}

}  // namespace sym

// Matrix symbol [[a, b], [conj b(x,-xi), conj a(x,-xi)]].
struct MatrixSymbol {
    Symbol a;
    Symbol b;
    Symbol lower_left() const { return sym::conj_reflect(b); }
    Symbol lower_right() const { return sym::conj_reflect(a); }
};

// Admissible cutoff chi(xi', xi) = chi~(xi'/<xi>): 1 on |t| <= delta/2, 0 on |t| >= delta.
class CutoffFn {
public:
    explicit CutoffFn(double delta = 0.25) : delta_(delta) {
        require(delta > 0.0 && delta < 1.0, "make_cutoff: delta must lie in (0,1)");
        build_table();
    }

    double delta() const { return delta_; }

    double profile(double t) const {
        const double a = std::abs(t);
        if (a <= 0.5 * delta_) return 1.0;
        if (a >= delta_) return 0.0;
        return 1.0 - step((a - 0.5 * delta_) / (0.5 * delta_));
    }

    double operator()(double xip, double xi) const { return profile(xip / jbracket(xi)); }

    // Normalized bump exp(-1/(1-t^2)) mapped to s in [0,1].
    static double bump(double s) {
        if (s <= 0.0 || s >= 1.0) return 0.0;
        const double t = 2.0 * s - 1.0;
        return std::exp(-1.0 / (1.0 - t * t));
    }

private:
    static constexpr int kCells = 1024;

    // Smooth step S(s) = int_0^s bump / int_0^1 bump, cubic Hermite between nodes.
    double step(double s) const {
        const double h = 1.0 / kCells;
        int i = std::min(kCells - 1, static_cast<int>(s / h));
        const double u = (s - i * h) / h;
        const double h00 = (1 + 2 * u) * (1 - u) * (1 - u), h10 = u * (1 - u) * (1 - u);
        const double h01 = u * u * (3 - 2 * u), h11 = u * u * (u - 1);
        return h00 * S_[i] + h10 * h * dS_[i] + h01 * S_[i + 1] + h11 * h * dS_[i + 1];
    }

    void build_table() {
        // 8-point Gauss-Legendre per cell.
        static const double gx[4] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267,
                                     0.9602898564975363};
        static const double gw[4] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745,
                                     0.1012285362903763};
        const double h = 1.0 / kCells;
        S_.assign(kCells + 1, 0.0);
        dS_.assign(kCells + 1, 0.0);
        for (int i = 0; i < kCells; ++i) {
            const double c = (i + 0.5) * h;
            double acc = 0.0;
            for (int q = 0; q < 4; ++q)
                acc += gw[q] * (bump(c - 0.5 * h * gx[q]) + bump(c + 0.5 * h * gx[q]));
            S_[i + 1] = S_[i] + 0.5 * h * acc;
        }
        const double Z = S_[kCells];
        for (int i = 0; i <= kCells; ++i) {
            S_[i] /= Z;
            dS_[i] = bump(i * h) / Z;
        }
    }

    double delta_;
    std::vector<double> S_, dS_;
};

inline CutoffFn make_cutoff(double delta) { return CutoffFn(delta); }

// max over x-grid and half-integer xi in [-N-1, N+1] of <xi>^{beta-m} |d_x^alpha d_xi^beta a|.
inline double seminorm_estimate(const Symbol& a, int alpha, int beta, int N) {
    require(alpha <= 4 && beta <= 4, "seminorm_estimate: alpha, beta must be <= 4");
    const int M = dealias_size(std::max(a.nx(), 1), 3);
    double best = 0.0;
    for (int h = -2 * (N + 1); h <= 2 * (N + 1); ++h) {
        const double xi = 0.5 * h;
        const FourierField s = a.slice(xi, alpha, beta);
        const double w = std::pow(jbracket(xi), beta - a.order());
        for (const auto& v : synthesize(s, std::max(M, 2 * s.modes() + 1)))
            best = std::max(best, w * std::abs(v));
    }
    return best;
}

// S_xi: keeps modes |k| <= eps |xi|, ties included.
inline FourierField frequency_localize(const FourierField& f, double xi, double eps) {
    require(eps > 0.0 && eps < 1.0, "frequency_localize: eps must lie in (0,1)");
    const double cut = eps * std::abs(xi) * (1.0 + 1e-12) + 1e-12;
    FourierField g(f.modes());
    for (int n = -f.modes(); n <= f.modes(); ++n)
        if (std::abs(n) <= cut) g[n] = f(n);
    return g;
}

}  // namespace paradiff
