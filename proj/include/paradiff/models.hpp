#pragma once

#include <iostream>
#include <optional>

#include "calculus.hpp"
#include "polynomial.hpp"

namespace paradiff {

// Fourier multiplier entering a nonlinearity variable; A acts on u, B on conj(u).
struct ModelChannel {
    XiFn A;
    XiFn B;
    double order = 0.0;
};

inline XiFn xi_zero() { return xifn::constant(0.0); }

inline Channel to_channel(const ModelChannel& m) {
    auto eval = [](const XiFn& g) -> std::function<cplx(int)> {
        return [g](int n) { return g(Jet(double(n))).value(); };
    };
    return {eval(m.A), eval(m.B)};
}

struct CatalogEntry {
    std::string id;
    Poly poly;  // F (nls), G (beam) or g (benjamin-ono)
    std::string description;
    bool structural = true;  // satisfies the structural assumption of its model
};

// Exact operator of the paralinearized field: X(u) ~ Mu u + Mubar conj(u) on coefficient vectors.
struct ParaMatrices {
    CMat Mu;
    CMat Mubar;
};

// du/dt = i Omega u + out(D) P(w_1(u), ..., w_V(u)), with w_i = A_i(D) u + B_i(D) conj(u).
struct ParaSystem {
    std::string model;
    std::string catalog_id;
    int N = 0;
    double order = 2.0;
    bool real_scalar = false;
    FrequencySpec freq;
    XiFn f_m;
    XiFn out;
    double out_order = 0.0;
    std::vector<ModelChannel> channels;
    PolyField nonlinear;
    int leading_var = -1;
    cplx kappa_a = 0.0;  // a_m = kappa_a (d P / d w_lead)
    cplx kappa_b = 0.0;
    std::function<double(const FourierField&)> hamiltonian;
    std::vector<std::string> warnings;

    bool has_hamiltonian() const { return static_cast<bool>(hamiltonian); }

    FourierField linear(const FourierField& u) const {
        FourierField r(N);
        for (int j = -N; j <= N; ++j) r[j] = kI * freq(j) * u(j);
        return r;
    }
    FourierField nonlinear_field(const FourierField& u) const { return nonlinear.eval(u.resized(N), N); }
    FourierField field(const FourierField& u) const { return linear(u) + nonlinear_field(u); }

    // c_i(x) = (d P / d w_i)(w(u)), exact up to the x-modes seen by Op^BW on N modes.
    FourierField coefficient(const FourierField& u, int i) const {
        return nonlinear.substitute(nonlinear.poly().d(i), u.resized(N), 2 * N);
    }

    ParaMatrices para_matrices(const FourierField& u, const Quantizer& q) const {
        require(q.modes() == N, "para_matrices: quantizer mode count differs from the system");
        const int n = 2 * N + 1;
        ParaMatrices M{CMat::Zero(n, n), CMat::Zero(n, n)};
        CVec o(n);
        for (int k = -N; k <= N; ++k) o[k + N] = out(Jet(double(k))).value();
        for (int i = 0; i < static_cast<int>(channels.size()); ++i) {
            const Poly dP = nonlinear.poly().d(i);
            if (dP.is_zero()) continue;
            const FourierField c = coefficient(u, i);
            if (max_abs(c) == 0.0) continue;
            const CMat op = o.asDiagonal() * q.bw(times_field(0, c, xifn::constant(1.0))).matrix;
            CVec a(n), b(n);
            for (int j = -N; j <= N; ++j) {
                a[j + N] = channels[i].A(Jet(double(j))).value();
                b[j + N] = channels[i].B(Jet(double(j))).value();
            }
            if (a.cwiseAbs().maxCoeff() > 0.0) M.Mu += op * a.asDiagonal();
            if (b.cwiseAbs().maxCoeff() > 0.0) M.Mubar += op * b.asDiagonal();
        }
        for (int j = -N; j <= N; ++j) M.Mu(j + N, j + N) += kI * freq(j);
        return M;
    }

    FourierField para_field(const FourierField& u, const Quantizer& q) const {
        const ParaMatrices M = para_matrices(u, q);
        const CVec uu = u.resized(N).coeffs();
        CVec r = M.Mu * uu;
        if (!real_scalar) r += M.Mubar * conj_field(u.resized(N)).coeffs();
        return FourierField(N, r);
    }

    // du/dt = i Op^BW(a) u + i Op^BW(b) conj(u) up to smoothing terms; compositions to order rho.
    MatrixSymbol matrix_symbol(const FourierField& u, int rho = 2) const {
        Symbol a = multiplier(order, f_m);
        a.real_valued = true;
        Symbol b = multiplier(order, xi_zero());
        const Symbol outs = multiplier(out_order, out);
        for (int i = 0; i < static_cast<int>(channels.size()); ++i) {
            if (nonlinear.poly().d(i).is_zero()) continue;
            const FourierField c = coefficient(u, i);
            const Symbol oc = compose_symbol(outs, times_field(0, c, xifn::constant(1.0)), rho);
            const auto& ch = channels[i];
            if (ch.A(Jet(1.0)).value() != 0.0 || ch.A(Jet(2.0)).value() != 0.0)
                a = sym::sum(a, sym::scale(compose_symbol(oc, multiplier(ch.order, ch.A), rho), -kI));
            if (ch.B(Jet(1.0)).value() != 0.0 || ch.B(Jet(2.0)).value() != 0.0)
                b = sym::sum(b, sym::scale(compose_symbol(oc, multiplier(ch.order, ch.B), rho), -kI));
        }
        a = a.with_order(order);
        b = b.with_order(order);
        return {a, b};
    }

    // (a_m, b_m): coefficients of f_m in the diagonal and off-diagonal leading symbols.
    std::pair<FourierField, FourierField> leading_coefficients(const FourierField& u) const {
        if (leading_var < 0) return {FourierField(2 * N), FourierField(2 * N)};
        const FourierField c = coefficient(u, leading_var);
        return {kappa_a * c, kappa_b * c};
    }
};

namespace detail {

inline ModelChannel deriv_channel(int p, bool on_u) {
    XiFn d = [p](const Jet& x) { return pow(Jet(kI) * x, double(p)); };
    return on_u ? ModelChannel{d, xi_zero(), double(p)} : ModelChannel{xi_zero(), d, double(p)};
}

// -i out(xi) A(xi) / f_m(xi) at large xi.
inline cplx leading_ratio(const XiFn& out, const XiFn& A, const XiFn& fm) {
    const Jet x(1e6);
    return -kI * out(x).value() * A(x).value() / fm(x).value();
}

inline void set_leading(ParaSystem& s, int var) {
    s.leading_var = var;
    s.kappa_a = leading_ratio(s.out, s.channels[var].A, s.f_m);
    s.kappa_b = leading_ratio(s.out, s.channels[var].B, s.f_m);
}

// int Q(w(u)) dx, exact for polynomial Q.
inline double poly_integral(const PolyField& pf, const Poly& Q, const FourierField& u) {
    if (Q.is_zero()) return 0.0;
    return (kSqrt2Pi * pf.substitute(Q, u, 0)(0)).real();
}

inline double quadratic_energy(const FrequencySpec& w, const FourierField& u) {
    double h = 0.0;
    for (int j = -u.modes(); j <= u.modes(); ++j) h += w(j) * std::norm(u(j));
    return h;
}

}  // namespace detail

// ---------------------------------------------------------------------------------------------
// Quasi-linear Schroedinger: variables (u, ubar, u_x, ubar_x, u_xx, ubar_xx).

namespace nls_var {
inline constexpr int u = 0, ubar = 1, ux = 2, ubarx = 3, uxx = 4, ubarxx = 5;
inline const std::vector<int> next = {2, 3, 4, 5, -1, -1};
}  // namespace nls_var

inline std::vector<CatalogEntry> nls_catalog() {
    using namespace nls_var;
    auto v = [](int i) { return Poly::var(6, i); };
    const Poly abs2 = v(u) * v(ubar), absux2 = v(ux) * v(ubarx);
    const Poly reu2 = 0.5 * (v(u) * v(u) + v(ubar) * v(ubar));
    const Poly reu = 0.5 * (v(u) + v(ubar));
    const Poly reubar2ux2 = 0.5 * (v(ubar) * v(ubar) * v(ux) * v(ux) + v(u) * v(u) * v(ubarx) * v(ubarx));
    return {
        {"abs2_absux2", abs2 * absux2, "|u|^2 |u_x|^2"},
        {"reu2_absux2", reu2 * absux2, "Re(u^2) |u_x|^2"},
        {"reu_absux2", reu * absux2, "Re(u) |u_x|^2 (cubic)"},
        {"reubar2_ux2", reubar2ux2, "Re(ubar^2 u_x^2)"},
        {"reu_abs2_absux2", (reu + abs2) * absux2, "(Re(u) + |u|^2) |u_x|^2"},
        {"mixed", abs2 * absux2 + 0.5 * abs2 * abs2, "|u|^2 |u_x|^2 + |u|^4 / 2"},
        {"quadratic", 0.3 * abs2, "0.3 |u|^2 (linear field)"},
        {"zero", Poly(6), "0"},
    };
}

inline CatalogEntry find_entry(const std::vector<CatalogEntry>& cat, const std::string& id, const std::string& model) {
    for (const auto& e : cat)
        if (e.id == id) return e;
    throw ValidationError(model + ": unknown nonlinearity id '" + id + "'");
}

// f = d_ubar F - d/dx (d_ubar_x F)
inline Poly nls_f_from_F(const Poly& F) {
    using namespace nls_var;
    return F.d(ubar) - F.d(ubarx).ddx(next);
}

// F is a real-valued polynomial in the first four variables.
inline ParaSystem nls_system_custom(const std::vector<double>& m, const Poly& F, int N, std::string id = "custom") {
    require(F.nvars() == 6 || F.is_zero(), "nls_system: F must be a polynomial in 6 variables");
    ParaSystem s;
    s.model = "nls";
    s.catalog_id = std::move(id);
    s.N = N;
    s.order = 2.0;
    s.freq = nls_frequencies(m, N);
    s.f_m = [m](const Jet& x) {
        Jet r = x * x;
        for (size_t k = 0; k < m.size(); ++k) r += Jet(m[k]) * pow(jbracket(x), -(2.0 * (k + 1) + 1.0));
        return r;
    };
    s.out = xifn::constant(kI);
    for (int p = 0; p <= 2; ++p) {
        s.channels.push_back(detail::deriv_channel(p, true));
        s.channels.push_back(detail::deriv_channel(p, false));
    }
    std::vector<Channel> ch;
    for (const auto& c : s.channels) ch.push_back(to_channel(c));
    const Poly Fv = F.is_zero() ? Poly(6) : F;
    s.nonlinear = PolyField(nls_f_from_F(Fv), ch, [](int) { return kI; });
    detail::set_leading(s, nls_var::uxx);
    s.kappa_b = detail::leading_ratio(s.out, s.channels[nls_var::ubarxx].B, s.f_m);
    const PolyField hf(Fv, ch, [](int) { return cplx(1.0); });
    const FrequencySpec w = s.freq;
    s.hamiltonian = [w, hf, Fv, N](const FourierField& u) {
        return detail::quadratic_energy(w, u.resized(N)) + detail::poly_integral(hf, Fv, u.resized(N));
    };
    return s;
}

inline ParaSystem nls_system(const std::vector<double>& m, const std::string& F_id, int N) {
    const CatalogEntry e = find_entry(nls_catalog(), F_id, "nls_system");
    return nls_system_custom(m, e.poly, N, e.id);
}

// The leading coefficient a_2 of the NLS system is kappa_a d f / d u_xx; for the leading
// off-diagonal coefficient the conjugate channel u_xx-bar is used.
inline std::pair<FourierField, FourierField> nls_leading(const ParaSystem& s, const FourierField& u) {
    const FourierField a = s.kappa_a * s.coefficient(u, nls_var::uxx);
    const FourierField b = s.kappa_b * s.coefficient(u, nls_var::ubarxx);
    return {a, b};
}

// ---------------------------------------------------------------------------------------------
// Beam: psi = Omega^{-1/2}(u + ubar)/sqrt 2, variables (psi, psi_x, ..., psi_xxxx).

inline std::vector<CatalogEntry> beam_catalog() {
    auto v = [](int i) { return Poly::var(5, i); };
    return {
        {"psixx3", v(2) * v(2) * v(2), "psi_xx^3"},
        {"psi2_psixx2", v(0) * v(0) * v(2) * v(2), "psi^2 psi_xx^2"},
        {"zero", Poly(5), "0"},
    };
}

// g = d_psi G - D d_psi_x G + D^2 d_psi_xx G
inline Poly beam_g_from_G(const Poly& G) {
    const std::vector<int> next = {1, 2, 3, 4, -1};
    return G.d(0) - G.d(1).ddx(next) + G.d(2).ddx(next).ddx(next);
}

inline ParaSystem beam_system_custom(double mass, const Poly& G, int N, std::string id = "custom") {
    require(G.nvars() == 5 || G.is_zero(), "beam_system: G must be a polynomial in 5 variables");
    ParaSystem s;
    s.model = "beam";
    s.catalog_id = std::move(id);
    s.N = N;
    s.order = 2.0;
    if (mass < 1.0 || mass > 2.0) {
        s.warnings.push_back("beam_system: mass outside [1, 2]");
        std::cerr << "warning: beam mass " << mass << " outside [1, 2]\n";
    }
    s.freq = beam_frequencies(mass, N);
    s.f_m = [mass](const Jet& x) { return sqrt(pow(x, 4.0) + Jet(mass)); };
    s.out_order = -1.0;
    s.out = [mass](const Jet& x) { return Jet(kI / std::sqrt(2.0)) * pow(pow(x, 4.0) + Jet(mass), -0.25); };
    for (int d = 0; d <= 4; ++d) {
        XiFn m = [mass, d](const Jet& x) {
            return pow(Jet(kI) * x, double(d)) * pow(pow(x, 4.0) + Jet(mass), -0.25) * Jet(1.0 / std::sqrt(2.0));
        };
        s.channels.push_back({m, m, d - 1.0});
    }
    std::vector<Channel> ch;
    for (const auto& c : s.channels) ch.push_back(to_channel(c));
    const Poly Gv = G.is_zero() ? Poly(5) : G;
    const XiFn out = s.out;
    s.nonlinear = PolyField(beam_g_from_G(Gv), ch, [out](int k) { return out(Jet(double(k))).value(); });
    detail::set_leading(s, 4);
    const PolyField hf(Gv, ch, [](int) { return cplx(1.0); });
    const FrequencySpec w = s.freq;
    s.hamiltonian = [w, hf, Gv, N](const FourierField& u) {
        return detail::quadratic_energy(w, u.resized(N)) + detail::poly_integral(hf, Gv, u.resized(N));
    };
    return s;
}

inline ParaSystem beam_system(double mass, const std::string& G_id, int N) {
    const CatalogEntry e = find_entry(beam_catalog(), G_id, "beam_system");
    return beam_system_custom(mass, e.poly, N, e.id);
}

// psi(u) on N modes.
inline FourierField beam_psi(const ParaSystem& s, const FourierField& u) {
    return apply_channel(s.nonlinear.channels()[0], u.resized(s.N), s.N);
}

// ---------------------------------------------------------------------------------------------
// Benjamin-Ono: real u, variables (u, Hu, u_x, Hu_x, Hu_xx), H = Op(-i sign xi).

inline FourierField hilbert(const FourierField& u) {
    return apply_multiplier(u, [](int n) { return cplx(0.0, n > 0 ? -1.0 : (n < 0 ? 1.0 : 0.0)); });
}

inline std::vector<CatalogEntry> bo_catalog() {
    auto v = [](int i) { return Poly::var(5, i); };
    return {
        {"example_i", v(0) * v(0) * v(4) + 2.0 * v(0) * v(2) * v(3), "u^2 Hu_xx + 2 u u_x Hu_x"},
        {"u_hu_ux", v(0) * v(1) * v(2), "u Hu u_x"},
        {"zero", Poly(5), "0"},
        {"violating", v(0) * v(0) * v(3), "u^2 Hu_x (structural condition fails)", false},
    };
}

inline ParaSystem benjamin_ono_system_custom(const Poly& g, int N, std::string id = "custom") {
    require(g.nvars() == 5 || g.is_zero(), "benjamin_ono_system: g must be a polynomial in 5 variables");
    ParaSystem s;
    s.model = "benjamin_ono";
    s.catalog_id = std::move(id);
    s.N = N;
    s.order = 2.0;
    s.real_scalar = true;
    s.freq = custom_frequencies([](int j) { return -double(std::abs(j)) * j; }, N);
    s.freq.family = "benjamin_ono";
    s.f_m = [](const Jet& x) { return Jet(-1.0) * abs(x) * x; };
    s.out = xifn::constant(1.0);
    const XiFn H = [](const Jet& x) { return Jet(-kI) * sign(x); };
    s.channels = {
        {xifn::constant(1.0), xi_zero(), 0.0},
        {H, xi_zero(), 0.0},
        {[](const Jet& x) { return Jet(kI) * x; }, xi_zero(), 1.0},
        {[](const Jet& x) { return abs(x); }, xi_zero(), 1.0},
        {[](const Jet& x) { return Jet(kI) * abs(x) * x; }, xi_zero(), 2.0},
    };
    std::vector<Channel> ch;
    for (const auto& c : s.channels) ch.push_back(to_channel(c));
    auto v = [](int i) { return Poly::var(5, i); };
    const Poly gv = g.is_zero() ? Poly(5) : g;
    s.nonlinear = PolyField(cplx(-1.0) * (v(0) * v(2) + gv), ch, [](int) { return cplx(1.0); });
    detail::set_leading(s, 4);
    return s;
}

inline ParaSystem benjamin_ono_system(const std::string& g_id, int N) {
    const CatalogEntry e = find_entry(bo_catalog(), g_id, "benjamin_ono_system");
    return benjamin_ono_system_custom(e.poly, N, e.id);
}

// (d_{z3} g) - d/dx (d_{z4} g) along u; zero when the structural condition holds.
inline FourierField bo_structural_defect(const ParaSystem& s, const FourierField& u) {
    return s.coefficient(u, 3) - derivative(s.coefficient(u, 4));
}

// Coefficient of |xi| in the paralinearized symbol: the b_3 |xi| term plus the Poisson
// correction (1/2i){b_4, i|xi|xi}, evaluated at xi0 != 0 and divided by |xi0|.
inline FourierField bo_abs_xi_coefficient(const ParaSystem& s, const FourierField& u, double xi0 = 7.0) {
    require(xi0 != 0.0, "bo_abs_xi_coefficient: xi0 must be nonzero");
    const FourierField b3 = -1.0 * s.coefficient(u, 3), b4 = -1.0 * s.coefficient(u, 4);
    const Symbol s4 = times_field(0, b4, xifn::constant(1.0));
    const Symbol lead = multiplier(2, [](const Jet& x) { return Jet(kI) * abs(x) * x; });
    const FourierField pc = poisson(s4, lead).slice(xi0) * cplx(1.0 / (2.0 * kI * std::abs(xi0)));
    return b3 + pc;
}

// ---------------------------------------------------------------------------------------------
// Diagnostics.

// Slope of log(T_d(k) / T_ref(k)) against log k over [kmin, kmax], where T_f(k) is the l2 norm
// of the modes |n| >= k. Tails below floor * T_d(kmin) are dropped; -inf when nothing remains.
inline double relative_decay_slope(const FourierField& d, const FourierField& ref, int kmin, int kmax,
                                   double floor = 1e-12) {
    auto tails = [](const FourierField& f, int K) {
        std::vector<double> t(K + 2, 0.0);
        for (int k = K; k >= 0; --k) t[k] = t[k + 1] + std::norm(f(k)) + (k ? std::norm(f(-k)) : 0.0);
        for (auto& v : t) v = std::sqrt(v);
        return t;
    };
    const auto td = tails(d, kmax), tr = tails(ref, kmax);
    std::vector<double> js, ys;
    for (int k = kmin; k <= kmax; ++k) {
        if (tr[k] == 0.0 || td[k] <= floor * td[kmin]) continue;
        js.push_back(k);
        ys.push_back(td[k] / tr[k]);
    }
    return loglog_fit(js, ys).slope;
}

// Smooth probe state u_n = (1 + i sign(n)/2) <n>^{-decay}, scaled to H^s norm r. The phases are
// coherent so spectral tails decay without cancellations.
inline FourierField coherent_state(int N, double r, double decay = 5.0, double s = 4.0) {
    FourierField f(N);
    for (int n = -N; n <= N; ++n) f[n] = cplx(1.0, 0.5 * (n > 0) - 0.5 * (n < 0)) * std::pow(jbracket(n), -decay);
    return (r / sobolev_norm(f, s)) * f;
}

inline double l2_norm(const FourierField& f) { return f.coeffs().norm(); }

// i grad_ubar H by central differences, grad_ubar = (d_Re + i d_Im)/2 per coefficient.
inline FourierField gradient_field_fd(const std::function<double(const FourierField&)>& H, const FourierField& u,
                                      double h) {
    const int N = u.modes();
    FourierField g(N), w = u;
    for (int n = -N; n <= N; ++n) {
        const cplx u0 = w[n];
        auto Hd = [&](cplx d) {
            w[n] = u0 + d;
            const double v = H(w);
            w[n] = u0;
            return v;
        };
        const double dre = (Hd(h) - Hd(-h)) / (2 * h);
        const double dim = (Hd(cplx(0, h)) - Hd(cplx(0, -h))) / (2 * h);
        g[n] = kI * 0.5 * cplx(dre, dim);
    }
    return g;
}

inline FourierField hamiltonian_field_fd(const ParaSystem& s, const FourierField& u, double h) {
    require(s.has_hamiltonian(), "hamiltonian_gradient_check: system has no Hamiltonian");
    return gradient_field_fd(s.hamiltonian, u.resized(s.N), h);
}

struct GradientCheck {
    FourierField fd_field;
    FourierField para_field;
    FourierField exact_field;
    double relative_error = 0.0;        // |fd - para| / |fd|
    double exact_relative_error = 0.0;  // |fd - exact| / |fd|
    double smoothing_order = 0.0;       // decay of (fd - para) relative to u
};

inline GradientCheck hamiltonian_gradient_check(const ParaSystem& s, const FourierField& u, double h,
                                                const Quantizer& q) {
    GradientCheck r;
    r.fd_field = hamiltonian_field_fd(s, u, h);
    r.para_field = s.para_field(u, q);
    r.exact_field = s.field(u);
    const double nf = l2_norm(r.fd_field);
    r.relative_error = l2_norm(r.fd_field - r.para_field) / nf;
    r.exact_relative_error = l2_norm(r.fd_field - r.exact_field) / nf;
    r.smoothing_order = relative_decay_slope(r.fd_field - r.para_field, u, s.N / 4, s.N / 2, 1e-9);
    return r;
}

struct ResidualReport {
    FourierField residual;
    double norm_full = 0.0;  // H^s norm of the residual at u
    double norm_half = 0.0;  // at u / 2
    double ratio = 0.0;
    double smoothing_order = 0.0;
};

inline FourierField para_residual(const ParaSystem& s, const FourierField& u, const Quantizer& q) {
    return s.field(u) - s.para_field(u, q);
}

inline ResidualReport paralinearization_residual(const ParaSystem& s, const FourierField& u, const Quantizer& q,
                                                 double sob = 0.0) {
    ResidualReport r;
    r.residual = para_residual(s, u, q);
    r.norm_full = sobolev_norm(r.residual, sob);
    r.norm_half = sobolev_norm(para_residual(s, 0.5 * u, q), sob);
    r.ratio = r.norm_half > 0.0 ? r.norm_full / r.norm_half : std::numeric_limits<double>::infinity();
    r.smoothing_order = relative_decay_slope(r.residual, u, s.N / 4, s.N / 2);
    return r;
}

inline double self_adjointness_defect(const CMat& M) { return op_norm(M - M.adjoint()) / op_norm(M); }

}  // namespace paradiff
