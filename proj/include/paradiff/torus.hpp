#pragma once

#include <functional>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "core.hpp"

namespace paradiff {

// Truncated Fourier series u(x) = sum_{|n|<=N} u_n e^{inx} / sqrt(2 pi).
// Coefficient of mode n lives at index n + N.
class FourierField {
public:
    FourierField() = default;
    explicit FourierField(int N) : N_(N), c_(CVec::Zero(2 * N + 1)) {
        require(N >= 0, "FourierField: negative mode cutoff");
    }
    FourierField(int N, CVec c) : N_(N), c_(std::move(c)) {
        require(N >= 0 && c_.size() == 2 * N + 1,
                "FourierField: coefficient array must have length 2N+1");
    }

    static FourierField mode(int N, int n, cplx value) {
        FourierField f(N);
        f[n] = value;
        return f;
    }
    // u(x) == value
    static FourierField constant(int N, cplx value) {
        return mode(N, 0, value * kSqrt2Pi);
    }

    int modes() const { return N_; }
    int size() const { return 2 * N_ + 1; }
    const CVec& coeffs() const { return c_; }
    CVec& coeffs() { return c_; }

    cplx operator()(int n) const { return (n < -N_ || n > N_) ? cplx{} : c_[n + N_]; }
    cplx& operator[](int n) { return c_[n + N_]; }

    FourierField resized(int N2) const {
        FourierField g(N2);
        const int m = std::min(N_, N2);
        for (int n = -m; n <= m; ++n) g[n] = (*this)(n);
        return g;
    }

    cplx eval(double x) const { return eval_both(x).first; }
    cplx eval_dx(double x) const { return eval_both(x).second; }

    // (u(x), u'(x)) by a power recurrence on e^{ix}.
    std::pair<cplx, cplx> eval_both(double x) const {
        const cplx w = std::polar(1.0, x);
        cplx e = std::polar(1.0, -N_ * x);
        cplx s = 0.0, d = 0.0;
        for (int n = -N_; n <= N_; ++n) {
            const cplx t = c_[n + N_] * e;
            s += t;
            d += cplx(0.0, n) * t;
            e *= w;
        }
        return {s / kSqrt2Pi, d / kSqrt2Pi};
    }

    // (1/2pi) int u dx
    cplx mean() const { return (*this)(0) / kSqrt2Pi; }

    FourierField& operator+=(const FourierField& o) { return axpy(1.0, o); }
    FourierField& operator-=(const FourierField& o) { return axpy(-1.0, o); }
    FourierField& operator*=(cplx a) {
        c_ *= a;
        return *this;
    }
    FourierField& axpy(cplx a, const FourierField& o) {
        if (o.N_ > N_) *this = resized(o.N_);
        for (int n = -o.N_; n <= o.N_; ++n) c_[n + N_] += a * o.c_[n + o.N_];
        return *this;
    }
    friend FourierField operator+(FourierField a, const FourierField& b) { return a += b; }
    friend FourierField operator-(FourierField a, const FourierField& b) { return a -= b; }
    friend FourierField operator*(cplx s, FourierField a) { return a *= s; }
    friend FourierField operator*(FourierField a, cplx s) { return a *= s; }
    FourierField operator-() const { return FourierField(N_, -c_); }

private:
    int N_ = 0;
    CVec c_;
};

inline Eigen::FFT<double>& fft_engine() {
    thread_local Eigen::FFT<double> fft;
    return fft;
}

// Grid points x_l = 2 pi l / M.
inline std::vector<double> grid_points(int M) {
    std::vector<double> x(M);
    for (int l = 0; l < M; ++l) x[l] = kTwoPi * l / M;
    return x;
}

// Grid large enough that degree-`degree` products of N-mode fields are exact on |n| <= N.
inline int dealias_size(int N, int degree) { return fft_size_at_least((degree + 1) * N + 1); }

inline FourierField analyze(const std::vector<cplx>& grid, int N) {
    const int M = static_cast<int>(grid.size());
    require(M >= 2 * N + 1, "analyze: grid has fewer than 2N+1 points (aliasing)");
    std::vector<cplx> spec;
    fft_engine().fwd(spec, grid);
    FourierField f(N);
    const double scale = kSqrt2Pi / M;
    for (int n = -N; n <= N; ++n) f[n] = spec[(n % M + M) % M] * scale;
    return f;
}

inline FourierField analyze_real(const std::vector<double>& grid, int N) {
    return analyze(std::vector<cplx>(grid.begin(), grid.end()), N);
}

inline std::vector<cplx> synthesize(const FourierField& f, int M) {
    const int N = f.modes();
    require(M >= 2 * N + 1, "synthesize: grid has fewer than 2N+1 points (aliasing)");
    std::vector<cplx> spec(M, cplx{});
    for (int n = -N; n <= N; ++n) spec[(n % M + M) % M] += f(n);
    std::vector<cplx> out;
    fft_engine().inv(out, spec);
    const double scale = M / kSqrt2Pi;
    for (auto& v : out) v *= scale;
    return out;
}

inline std::vector<cplx> synthesize(const FourierField& f) { return synthesize(f, 2 * f.modes() + 1); }

inline std::vector<double> synthesize_real(const FourierField& f, int M) {
    auto g = synthesize(f, M);
    std::vector<double> r(M);
    for (int l = 0; l < M; ++l) r[l] = g[l].real();
    return r;
}

inline double sobolev_norm(const FourierField& f, double s) {
    double acc = 0.0;
    for (int n = -f.modes(); n <= f.modes(); ++n)
        acc += std::pow(jbracket(n), 2.0 * s) * std::norm(f(n));
    return std::sqrt(acc);
}

// Keeps modes +-n; n = 0 keeps the mean.
inline FourierField project(const FourierField& f, int n) {
    require(n >= 0, "project: negative index");
    FourierField g(f.modes());
    if (n <= f.modes()) {
        g[n] = f(n);
        g[-n] = f(-n);
    }
    return g;
}

// Coefficients of conj(u): conj(u_{-n}).
inline FourierField conj_field(const FourierField& u) {
    FourierField g(u.modes());
    for (int n = -u.modes(); n <= u.modes(); ++n) g[n] = std::conj(u(-n));
    return g;
}

struct RealPair {
    FourierField first;
    FourierField second;
};

inline RealPair make_real_pair(const FourierField& u) { return {u, conj_field(u)}; }

inline bool is_real_pair(const RealPair& U, double tol) {
    const FourierField c = conj_field(U.first);
    return (c.coeffs() - U.second.coeffs()).cwiseAbs().maxCoeff() <= tol;
}

template <class Fn>
FourierField apply_multiplier(const FourierField& f, Fn&& m) {
    FourierField g(f.modes());
    for (int n = -f.modes(); n <= f.modes(); ++n) g[n] = m(n) * f(n);
    return g;
}

inline FourierField derivative(const FourierField& f, int k = 1) {
    return apply_multiplier(f, [k](int n) { return ipow_n(n, k); });
}

// <D>^s
inline FourierField jpow(const FourierField& f, double s) {
    return apply_multiplier(f, [s](int n) { return cplx(std::pow(jbracket(n), s)); });
}

// Inverse of d/dx on zero-mean data.
inline FourierField antiderivative(const FourierField& f, double mean_tol = 1e-9) {
    if (std::abs(f.mean()) > mean_tol)
        throw NumericalError("antiderivative: input mean " + std::to_string(std::abs(f.mean())) +
                             " exceeds tolerance");
    return apply_multiplier(f, [](int n) { return n == 0 ? cplx{} : 1.0 / cplx(0.0, n); });
}

// Pointwise map of several fields on a dealiased grid; result truncated to Nout.
inline FourierField pointwise(const std::vector<const FourierField*>& fs, int Nout, int degree,
                              const std::function<cplx(const cplx*)>& fn) {
    int N = 0;
    for (auto* f : fs) N = std::max(N, f->modes());
    const int M = std::max(fft_size_at_least(degree * N + Nout + 1), 2 * std::max(N, Nout) + 1);
    std::vector<std::vector<cplx>> g;
    g.reserve(fs.size());
    for (auto* f : fs) g.push_back(synthesize(*f, M));
    std::vector<cplx> out(M);
    std::vector<cplx> args(fs.size());
    for (int l = 0; l < M; ++l) {
        for (size_t i = 0; i < fs.size(); ++i) args[i] = g[i][l];
        out[l] = fn(args.data());
    }
    return analyze(out, Nout);
}

// Dealiased product, truncated to max of the input cutoffs.
inline FourierField product(const FourierField& a, const FourierField& b) {
    const int N = std::max(a.modes(), b.modes());
    return pointwise({&a, &b}, N, 2, [](const cplx* v) { return v[0] * v[1]; });
}

inline double max_abs(const FourierField& f) { return f.size() ? f.coeffs().cwiseAbs().maxCoeff() : 0.0; }

// Sup norm sampled on a fine grid.
inline double sup_norm(const FourierField& f) {
    double m = 0.0;
    for (const auto& v : synthesize(f, dealias_size(f.modes(), 3))) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace paradiff
