#pragma once

#include <unsupported/Eigen/MatrixFunctions>

#include "flows.hpp"

namespace paradiff {

// Reductions at a frozen state: the coefficients a, b, ... are the functions of x obtained by
// evaluating the state-dependent symbols at the given U. Along the flow started at U the
// generators are then constant in tau.

inline double grid_variance(const std::vector<double>& v) {
    double mean = 0.0, var = 0.0;
    for (double x : v) mean += x / v.size();
    for (double x : v) var += (x - mean) * (x - mean) / v.size();
    return var;
}

// ---- highest order, off-diagonal ----------------------------------------------------

struct DiagonalizeOptions {
    int grid = 0;          // points in x; 0 picks fft_size_at_least(4N + 1)
    int tau_steps = 64;    // RK4 steps for the (g1, g2) system in tau
};

struct DiagonalizeResult {
    std::vector<double> x;
    std::vector<cplx> C;               // generator C(x) after n_picard iterations
    FourierField C_field;
    std::vector<double> a_plus;        // conjugated diagonal coefficient
    std::vector<cplx> b_plus;          // conjugated off-diagonal coefficient
    std::vector<double> offdiag_sup;   // sup |b^+| after n iterations, index 0 = input b
    std::vector<double> picard_change; // sup |C_n - C_{n-1}|
    double closed_form_gap = 0.0;      // sup |C - C_exact|
    double ode_gap = 0.0;              // sup |b^+(ODE) - b^+(matrix exponential)|
};

namespace detail {

// (1 + g1, g2) at tau = 1 for constant c: g1' = -2 Re(g2 conj c), g2' = -2 (1 + g1) c.
// Also returns int_0^1 int_0^s Re(g2 conj c) dtheta ds.
struct OffdiagOde {
    double g1;
    cplx g2;
    double twice_integral;
};

inline OffdiagOde offdiag_ode(double a, cplx b, cplx c, int steps) {
    // state (g1, g2, J, I) with J' = Re(g2 conj c), I' = J
    struct S {
        double g1;
        cplx g2;
        double J, I;
    };
    auto f = [c](const S& s) { return S{-2.0 * std::real(s.g2 * std::conj(c)), -2.0 * (1.0 + s.g1) * c,
                                        std::real(s.g2 * std::conj(c)), s.J}; };
    auto ax = [](const S& s, double h, const S& d) { return S{s.g1 + h * d.g1, s.g2 + h * d.g2, s.J + h * d.J, s.I + h * d.I}; };
    S s{a, b, 0.0, 0.0};
    const double h = 1.0 / steps;
    for (int k = 0; k < steps; ++k) {
        const S k1 = f(s), k2 = f(ax(s, 0.5 * h, k1)), k3 = f(ax(s, 0.5 * h, k2)), k4 = f(ax(s, h, k3));
        s = S{s.g1 + h / 6 * (k1.g1 + 2 * k2.g1 + 2 * k3.g1 + k4.g1), s.g2 + h / 6 * (k1.g2 + 2.0 * k2.g2 + 2.0 * k3.g2 + k4.g2),
              s.J + h / 6 * (k1.J + 2 * k2.J + 2 * k3.J + k4.J), s.I + h / 6 * (k1.I + 2 * k2.I + 2 * k3.I + k4.I)};
    }
    return {s.g1, s.g2, s.I};
}

// M+ = exp(-C) M exp(-C), M = [[1 + a, b], [conj b, 1 + a]], C = [[0, c], [conj c, 0]].
inline Eigen::Matrix2cd offdiag_congruence(double a, cplx b, cplx c) {
    Eigen::Matrix2cd M, Cm;
    M << 1.0 + a, b, std::conj(b), 1.0 + a;
    Cm << 0.0, c, std::conj(c), 0.0;
    const Eigen::Matrix2cd e = (-Cm).exp();
    return e * M * e;
}

}  // namespace detail

// Generator C with b^+(1) = 0 for the highest-order block (1 + a) f_m + b f_m (off-diagonal).
// C_n = b / (2(1 + a) - 4 I_{n-1}), I_{n-1} = int_0^1 int_0^s Re(b^+_{n-1} conj C_{n-1}), C_0 = 0.
inline DiagonalizeResult diagonalize_highest(const FourierField& a, const FourierField& b, int n_picard,
                                             const DiagonalizeOptions& o = {}) {
    require(n_picard >= 1, "diagonalize_highest: n_picard must be positive");
    const int N = std::max(a.modes(), b.modes());
    const int M = o.grid > 0 ? o.grid : fft_size_at_least(4 * N + 1);
    DiagonalizeResult r;
    r.x = grid_points(M);
    const auto ag = synthesize(a.resized(N), M), bg = synthesize(b.resized(N), M);
    std::vector<double> av(M);
    double bsup = 0.0;
    for (int l = 0; l < M; ++l) {
        av[l] = ag[l].real();
        if (!(1.0 + av[l] > 0.0)) throw ValidationError("diagonalize_highest: 1 + a <= 0");
        if (!(std::abs(bg[l]) < 1.0 + av[l]))
            throw NumericalError("diagonalize_highest: |b| >= 1 + a, the generator equation does not contract");
        bsup = std::max(bsup, std::abs(bg[l]));
    }
    r.offdiag_sup.push_back(bsup);
    std::vector<cplx> C(M, 0.0), Cprev(M, 0.0);
    std::vector<double> I(M, 0.0);
    for (int n = 1; n <= n_picard; ++n) {
        double change = 0.0, sup = 0.0;
        for (int l = 0; l < M; ++l) {
            const double den = 2.0 * (1.0 + av[l]) - 4.0 * I[l];
            if (!(den > 0.0)) throw NumericalError("diagonalize_highest: contraction failure at iteration " + std::to_string(n));
            C[l] = bg[l] / den;
            change = std::max(change, std::abs(C[l] - Cprev[l]));
        }
        for (int l = 0; l < M; ++l) {
            const auto s = detail::offdiag_ode(av[l], bg[l], C[l], o.tau_steps);
            I[l] = s.twice_integral;
            sup = std::max(sup, std::abs(s.g2));
        }
        if (n > 1 && !(change <= r.picard_change.back()))
            throw NumericalError("diagonalize_highest: Picard increments grow at iteration " + std::to_string(n));
        r.picard_change.push_back(change);
        r.offdiag_sup.push_back(sup);
        Cprev = C;
    }
    r.C = C;
    r.C_field = analyze(C, N);
    r.a_plus.resize(M);
    r.b_plus.resize(M);
    for (int l = 0; l < M; ++l) {
        const Eigen::Matrix2cd P = detail::offdiag_congruence(av[l], bg[l], C[l]);
        r.a_plus[l] = P(0, 0).real() - 1.0;
        r.b_plus[l] = P(0, 1);
        const auto s = detail::offdiag_ode(av[l], bg[l], C[l], o.tau_steps);
        r.ode_gap = std::max(r.ode_gap, std::abs(s.g2 - P(0, 1)));
        // exact generator: |C| = artanh(|b| / (1 + a)) / 2 along b / |b|
        const double nb = std::abs(bg[l]);
        const cplx exact = nb > 0.0 ? 0.5 * std::atanh(nb / (1.0 + av[l])) * bg[l] / nb : cplx{};
        r.closed_form_gap = std::max(r.closed_form_gap, std::abs(C[l] - exact));
    }
    return r;
}

// ---- lower orders, diagonal ---------------------------------------------------------

struct LowerConstResult {
    std::vector<double> xi;
    std::vector<FourierField> c;         // generator slices c(., xi)
    std::vector<cplx> constant;          // (1/2pi) int a dx per xi
    std::vector<double> variance_before; // x-variance of a(., xi)
    std::vector<double> variance_after;  // x-variance of a - (1 + frak_m) f'(xi) c_x
    std::vector<bool> cut;               // xi below the cutoff (c set to 0)
};

inline double field_variance(const FourierField& f) {
    // (1/2pi) int |f - mean|^2 dx
    double v = 0.0;
    for (int n = -f.modes(); n <= f.modes(); ++n)
        if (n != 0) v += std::norm(f(n));
    return v / kTwoPi;
}

// c = d_x^{-1}((a - <a>) / ((1 + frak_m) f'(xi))); |f'(xi)| vanishes near xi = 0, where c = 0 for
// |xi| < xi_min.
inline LowerConstResult reduce_constant_lower(const Symbol& a_lower, const XiFn& f_m, double m, double frak_m,
                                              const std::vector<double>& xi, double xi_min = 0.5) {
    require(m > 1.0, "reduce_constant_lower: order of f_m must exceed 1");
    require(a_lower.order() < m, "reduce_constant_lower: lower symbol order must be below m");
    require(1.0 + frak_m > 0.0, "reduce_constant_lower: 1 + frak_m must be positive");
    LowerConstResult r;
    r.xi = xi;
    for (double x : xi) {
        const FourierField a = a_lower.slice(x);
        const cplx mean = a.mean();
        FourierField d = a;
        d[0] -= a(0);
        const double fp = xi_derivative(f_m, x, 1).real();
        r.constant.push_back(mean);
        r.variance_before.push_back(field_variance(a));
        if (std::abs(x) < xi_min || std::abs(fp) < 1e-14) {
            r.c.push_back(FourierField(a.modes()));
            r.cut.push_back(true);
            r.variance_after.push_back(field_variance(a));
            continue;
        }
        if (std::abs(d.mean()) > 1e-12) throw ValidationError("reduce_constant_lower: d_x^{-1} input has nonzero mean");
        const FourierField c = (1.0 / ((1.0 + frak_m) * fp)) * antiderivative(d);
        r.c.push_back(c);
        r.cut.push_back(false);
        r.variance_after.push_back(field_variance(a - ((1.0 + frak_m) * fp) * derivative(c)));
    }
    return r;
}

// ---- lower orders, off-diagonal -----------------------------------------------------

struct OffdiagLowerResult {
    std::vector<double> xi;
    std::vector<std::vector<cplx>> C;  // C(x_l, xi) on the grid
    std::vector<double> x;
    double residual = 0.0;             // sup |b - 2 (1 + a) f C| over xi != 0
    int iterations = 0;
};

// C = b / (2 (1 + a) f(xi)); the xi = 0 value is the even extension (C(1) + C(-1)) / 2 when
// f(0) = 0. Fixed-point form C <- C + (b - 2 (1 + a) f C) / (2 (1 + a) f) until the residual
// stops decreasing.
inline OffdiagLowerResult eliminate_offdiag_lower(const Symbol& b_lower, const FourierField& a_m, const XiFn& f_m,
                                                  const std::vector<double>& xi, int grid = 0, double tol = 1e-14) {
    const int N = std::max(a_m.modes(), b_lower.nx());
    const int M = grid > 0 ? grid : fft_size_at_least(4 * N + 1);
    OffdiagLowerResult r;
    r.xi = xi;
    r.x = grid_points(M);
    const auto ag = synthesize(a_m.resized(N), M);
    for (double x : xi) {
        const double f = f_m(Jet(x)).value().real();
        if (x != 0.0 && std::abs(f) < 1e-14)
            throw ValidationError("eliminate_offdiag_lower: f_m vanishes at xi = " + std::to_string(x));
    }
    auto solve_at = [&](double x, std::vector<cplx>& C) {
        const auto bg = synthesize(b_lower.slice(x).resized(N), M);
        const double f = f_m(Jet(x)).value().real();
        C.assign(M, 0.0);
        double res = 0.0;
        int it = 0;
        for (; it < 8; ++it) {
            double rmax = 0.0;
            for (int l = 0; l < M; ++l) {
                const double den = 2.0 * (1.0 + ag[l].real()) * f;
                const cplx rr = bg[l] - den * C[l];
                C[l] += rr / den;
                rmax = std::max(rmax, std::abs(bg[l] - den * C[l]));
            }
            res = rmax;
            if (rmax <= tol) break;
        }
        r.iterations = std::max(r.iterations, it + 1);
        return res;
    };
    for (double x : xi) {
        std::vector<cplx> C;
        const double f0 = f_m(Jet(x)).value().real();
        if (x == 0.0 && std::abs(f0) < 1e-14) {
            std::vector<cplx> Cp, Cm;
            solve_at(1.0, Cp);
            solve_at(-1.0, Cm);
            C.resize(M);
            for (int l = 0; l < M; ++l) C[l] = 0.5 * (Cp[l] + Cm[l]);
        } else {
            r.residual = std::max(r.residual, solve_at(x, C));
        }
        r.C.push_back(std::move(C));
    }
    return r;
}

// ---- toy model ----------------------------------------------------------------------

inline FourierField abs2_field(const FourierField& z) {
    return pointwise({&z}, z.modes(), 2, [](const cplx* v) { return cplx(std::norm(v[0])); });
}

// 2.5 r cos x + r e^{14 i x}: a single Fourier mode gives a constant |u|^2, so a low mode is
// added; the mode 14 component sits where the paraproduct cutoff lets the generator act.
inline FourierField egorov_demo_state(int N, double r) {
    require(N >= 14, "egorov_demo_state: needs at least 14 modes");
    return (2.5 * r) * (FourierField::mode(N, 1, kSqrt2Pi / 2) + FourierField::mode(N, -1, kSqrt2Pi / 2)) +
           r * FourierField::mode(N, 14, kSqrt2Pi);
}

struct EgorovDemoReport {
    double r = 0.0;
    int N = 0;
    double m_b = 0.0;
    double closed_form = 0.0;
    double variance_before = 0.0;
    double variance_after = 0.0;
    double reduction = 0.0;  // before / after, inf when after = 0
    std::vector<MbIteration> history;
};

// Toy system i Op^BW((1 + |u|^2)(i xi)^2) u: highest-order constant-coefficient reduction.
inline EgorovDemoReport egorov_demo(double r, int N = 20, int n_iters = 2, const FourierField* state = nullptr) {
    require(r >= 0.0 && r <= 0.05, "egorov_demo: r must lie in [0, 0.05]");
    const Quantizer q(N);
    const FourierField u0 = state ? state->resized(N) : egorov_demo_state(N, r);
    MbOptions o;
    o.n_iters = n_iters;
    const MbResult res = constant_m_b(abs2_field, 2.0, u0, q, o);
    EgorovDemoReport rep;
    rep.r = r;
    rep.N = N;
    rep.m_b = res.m_b;
    rep.closed_form = res.closed_form;
    rep.history = res.history;
    rep.variance_before = res.history.front().variance;
    rep.variance_after = res.history.back().variance;
    rep.reduction = rep.variance_after > 0.0 ? rep.variance_before / rep.variance_after
                                             : std::numeric_limits<double>::infinity();
    return rep;
}

}  // namespace paradiff
