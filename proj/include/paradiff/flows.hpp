#pragma once

#include <fstream>
#include <chrono>
#include <iomanip>

#include "calculus.hpp"

namespace paradiff {

enum class GeneratorForm { Transport, OrderMReal, Bounded, Multiplier };

// Coefficient function c(tau, z; x), returned as a (real) field.
using CoefFn = std::function<FourierField(double tau, const FourierField& z)>;
// State-dependent function w -> f(w; x).
using StateMap = std::function<FourierField(const FourierField& w)>;

// The flow solves dz/dtau = Op^BW(i f(tau, z; x, xi)) z.
struct GeneratorSpec {
    GeneratorForm form = GeneratorForm::Transport;
    double order = 1.0;
    std::function<Symbol(double tau, const FourierField& z)> f;
};

inline FourierField real_part(const FourierField& f) { return 0.5 * (f + conj_field(f)); }

inline GeneratorSpec transport_generator(CoefFn b) {
    return {GeneratorForm::Transport, 1.0, [b = std::move(b)](double tau, const FourierField& z) {
                Symbol s = times_field(1, real_part(b(tau, z)), xifn::power(1));
                s.real_valued = true;
                return s;
            }};
}

// f = beta xi with constant beta: translation by beta at tau = 1.
inline GeneratorSpec translation_generator(double beta) {
    return transport_generator([beta](double, const FourierField& z) { return FourierField::constant(z.modes(), beta); });
}

inline GeneratorSpec zero_generator() {
    return {GeneratorForm::Bounded, 0.0, [](double, const FourierField& z) {
                Symbol s = multiplier(0, xifn::constant(0.0), z.modes());
                s.real_valued = true;
                return s;
            }};
}

// Checks the declared form against the measured symbol at the given state.
inline bool generator_matches_form(const GeneratorSpec& g, const FourierField& z, double tol = 1e-9) {
    const Symbol f = g.f(0.0, z);
    const int N = std::max(z.modes(), 8);
    double imag = 0.0, xdep = 0.0, lin = 0.0;
    for (double xi : {-0.5 * N, -3.0, 1.5, 0.5 * N}) {
        const FourierField s = f.slice(xi);
        for (double x : {0.0, 1.3, 4.1}) imag = std::max(imag, std::abs(s.eval(x).imag()));
        for (int n = -s.modes(); n <= s.modes(); ++n)
            if (n != 0) xdep = std::max(xdep, std::abs(s(n)));
        const FourierField s2 = f.slice(2 * xi);
        lin = std::max(lin, max_abs(s2 - 2.0 * s));
    }
    switch (g.form) {
        case GeneratorForm::Transport: return imag <= tol && lin <= tol && std::abs(f.order() - 1.0) <= tol;
        case GeneratorForm::OrderMReal: return f.order() > 0.0 && f.order() < 1.0 && imag <= tol;
        case GeneratorForm::Bounded: return f.order() <= 0.0;
        case GeneratorForm::Multiplier: return xdep <= tol && imag <= tol;
    }
    return false;
}

struct FlowOptions {
    double dtau = 1e-2;
    int picard_max = 30;
    double picard_tol = 1e-10;
    double s = 4.0;
    bool picard = true;  // false: direct RK4 on the nonlinear equation
};

struct FlowResult {
    std::vector<double> tau;
    std::vector<FourierField> trajectory;
    std::vector<FourierField> velocity;
    int picard_iterations = 0;
    bool converged = false;
    std::vector<double> increments;
    std::vector<double> contraction_ratios;
    double norm_constant = 0.0;  // C in ||z(tau)||_s <= ||u0||_s (1 + C ||u0||_{s-1})

    const FourierField& final_state() const { return trajectory.back(); }

    void write_csv(const std::string& path, double s) const {
        std::ofstream os(path);
        if (!os) throw ValidationError("FlowResult: cannot write " + path);
        os << "tau,h_s_norm,picard_count\n" << std::setprecision(17);
        for (size_t k = 0; k < tau.size(); ++k)
            os << tau[k] << ',' << sobolev_norm(trajectory[k], s) << ',' << picard_iterations << '\n';
    }
};

// Cubic Hermite midpoint from node values and derivatives.
inline FourierField hermite_mid(const FourierField& y0, const FourierField& y1, const FourierField& d0,
                                const FourierField& d1, double h) {
    return 0.5 * (y0 + y1) + (h / 8.0) * (d0 - d1);
}

inline void check_finite(const FourierField& z, const char* where) {
    if (!z.coeffs().allFinite()) throw NumericalError(std::string(where) + ": NaN or overflow in state (blow-up)");
}

namespace detail {

inline CMat generator_matrix(const GeneratorSpec& g, double tau, const FourierField& z, const Quantizer& q) {
    return kI * q.bw(g.f(tau, z)).matrix;
}

inline FlowResult direct_rk4(const GeneratorSpec& g, const FourierField& u0, const Quantizer& q, const FlowOptions& o) {
    const int steps = std::max(1, static_cast<int>(std::lround(1.0 / o.dtau)));
    const double h = 1.0 / steps;
    FlowResult r;
    FourierField z = u0.resized(q.modes());
    const int N = q.modes();
    auto rhs = [&](double t, const CVec& y) -> CVec {
        return generator_matrix(g, t, FourierField(N, y), q) * y;
    };
    for (int k = 0; k <= steps; ++k) {
        const double t = k * h;
        const CVec y = z.coeffs();
        const CVec k1 = rhs(t, y);
        r.tau.push_back(t);
        r.trajectory.push_back(z);
        r.velocity.emplace_back(N, k1);
        if (k == steps) break;
        const CVec k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1);
        const CVec k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2);
        const CVec k4 = rhs(t + h, y + h * k3);
        z = FourierField(N, y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
        check_finite(z, "flow_nonlinear");
    }
    r.converged = true;
    return r;
}

}  // namespace detail

// Picard scheme over frozen-coefficient linear problems, each integrated by RK4.
inline FlowResult flow_nonlinear(const GeneratorSpec& g, const FourierField& u0, const Quantizer& q,
                                 const FlowOptions& o = {}) {
    FlowResult r;
    if (!o.picard) {
        r = detail::direct_rk4(g, u0, q, o);
    } else {
        const int N = q.modes();
        const int steps = std::max(1, static_cast<int>(std::lround(1.0 / o.dtau)));
        const double h = 1.0 / steps;
        const FourierField z0 = u0.resized(N);
        std::vector<FourierField> prev(steps + 1, z0), dprev(steps + 1, FourierField(N));
        for (int it = 1; it <= o.picard_max; ++it) {
            std::vector<FourierField> cur(steps + 1), dcur(steps + 1);
            cur[0] = z0;
            CMat A0 = detail::generator_matrix(g, 0.0, prev[0], q);
            for (int k = 0; k < steps; ++k) {
                const double t = k * h;
                const FourierField zm = hermite_mid(prev[k], prev[k + 1], dprev[k], dprev[k + 1], h);
                const CMat Am = detail::generator_matrix(g, t + 0.5 * h, zm, q);
                const CMat A1 = detail::generator_matrix(g, t + h, prev[k + 1], q);
                const CVec y = cur[k].coeffs();
                const CVec k1 = A0 * y;
                dcur[k] = FourierField(N, k1);
                const CVec k2 = Am * (y + 0.5 * h * k1);
                const CVec k3 = Am * (y + 0.5 * h * k2);
                const CVec k4 = A1 * (y + h * k3);
                cur[k + 1] = FourierField(N, y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
                check_finite(cur[k + 1], "flow_nonlinear");
                A0 = A1;
            }
            dcur[steps] = FourierField(N, A0 * cur[steps].coeffs());
            double inc = 0.0;
            for (int k = 0; k <= steps; ++k) inc = std::max(inc, sobolev_norm(cur[k] - prev[k], o.s - 1.0));
            if (!r.increments.empty() && r.increments.back() > 0.0)
                r.contraction_ratios.push_back(inc / r.increments.back());
            r.increments.push_back(inc);
            prev = std::move(cur);
            dprev = std::move(dcur);
            r.picard_iterations = it;
            if (inc < o.picard_tol) {
                r.converged = true;
                break;
            }
            const size_t nr = r.contraction_ratios.size();
            if (nr >= 3 && r.contraction_ratios[nr - 1] > 1.0 && r.contraction_ratios[nr - 2] > 1.0 &&
                r.contraction_ratios[nr - 3] > 1.0)
                throw NumericalError("flow_nonlinear: Picard iteration is not contracting", r.contraction_ratios);
        }
        if (!r.converged)
            throw NumericalError("flow_nonlinear: no convergence within " + std::to_string(o.picard_max) +
                                     " Picard iterations",
                                 r.contraction_ratios);
        for (int k = 0; k <= steps; ++k) r.tau.push_back(k * h);
        r.trajectory = std::move(prev);
        r.velocity = std::move(dprev);
    }
    const double n0 = sobolev_norm(r.trajectory.front(), o.s), n0w = sobolev_norm(r.trajectory.front(), o.s - 1.0);
    if (n0 > 0.0 && n0w > 0.0)
        for (const auto& z : r.trajectory)
            r.norm_constant = std::max(r.norm_constant, (sobolev_norm(z, o.s) / n0 - 1.0) / n0w);
    return r;
}

// Generator of the time-reversed flow: f_rev(sigma, w) = -f(1 - sigma, w).
inline GeneratorSpec reversed(const GeneratorSpec& g) {
    GeneratorSpec r = g;
    r.f = [f = g.f](double sigma, const FourierField& w) {
        Symbol s = sym::scale(f(1.0 - sigma, w), -1.0);
        return s;
    };
    return r;
}

// Phi^{-1}(z1): integrates the flow backward from tau = 1 to tau = 0.
inline FourierField flow_inverse(const GeneratorSpec& g, const FourierField& z1, const Quantizer& q,
                                 const FlowOptions& o = {}) {
    return flow_nonlinear(reversed(g), z1, q, o).final_state();
}

struct CharFlowResult {
    std::vector<double> tau;
    std::vector<FourierField> z;
    std::vector<std::vector<double>> x;   // x[k][p] for initial point p
    std::vector<std::vector<double>> xi;
    int iterations = 0;
    bool converged = false;

    // x(tau) = x0 + Psi^(x), xi(tau) = xi0 (1 + Psi^(xi))
    double psi_x(size_t k, size_t p) const { return x[k][p] - x[0][p]; }
    double psi_xi(size_t k, size_t p) const { return xi[k][p] / xi[0][p] - 1.0; }
};

namespace detail {

struct CharState {
    std::vector<double> x, xi;
};

inline CharState char_rhs(const FourierField& b, const CharState& s) {
    CharState d{std::vector<double>(s.x.size()), std::vector<double>(s.x.size())};
    for (size_t p = 0; p < s.x.size(); ++p) {
        const auto [v, vx] = b.eval_both(s.x[p]);
        d.x[p] = -v.real();
        d.xi[p] = vx.real() * s.xi[p];
    }
    return d;
}

inline CharState axpy(const CharState& a, double h, const CharState& d) {
    CharState r = a;
    for (size_t p = 0; p < a.x.size(); ++p) {
        r.x[p] += h * d.x[p];
        r.xi[p] += h * d.xi[p];
    }
    return r;
}

}  // namespace detail

// dx/dtau = -b(tau, z; x), dxi/dtau = b_x(tau, z; x) xi, dz/dtau = Op^BW(i b xi) z.
// With o.picard the z-equation is solved by the Picard scheme first and (x, xi) follow
// along the converged trajectory; otherwise the three equations are stepped jointly.
inline CharFlowResult characteristic_flow(const CoefFn& b, const FourierField& z0, const std::vector<double>& x0,
                                          const std::vector<double>& xi0, const Quantizer& q,
                                          const FlowOptions& o = {}) {
    require(x0.size() == xi0.size(), "characteristic_flow: x0 and xi0 sizes differ");
    const int N = q.modes();
    const int steps = std::max(1, static_cast<int>(std::lround(1.0 / o.dtau)));
    const double h = 1.0 / steps;
    auto bre = [&](double t, const FourierField& z) { return real_part(b(t, z)); };
    CharFlowResult r;
    detail::CharState s{x0, xi0};
    if (o.picard) {
        const FlowResult zf = flow_nonlinear(transport_generator(b), z0, q, o);
        r.iterations = zf.picard_iterations;
        r.converged = zf.converged;
        FourierField b0 = bre(0.0, zf.trajectory[0]);
        for (int k = 0; k <= steps; ++k) {
            r.tau.push_back(k * h);
            r.z.push_back(zf.trajectory[k]);
            r.x.push_back(s.x);
            r.xi.push_back(s.xi);
            if (k == steps) break;
            const FourierField zm = hermite_mid(zf.trajectory[k], zf.trajectory[k + 1], zf.velocity[k], zf.velocity[k + 1], h);
            const FourierField bm = bre(k * h + 0.5 * h, zm), b1 = bre((k + 1) * h, zf.trajectory[k + 1]);
            const auto k1 = detail::char_rhs(b0, s);
            const auto k2 = detail::char_rhs(bm, detail::axpy(s, 0.5 * h, k1));
            const auto k3 = detail::char_rhs(bm, detail::axpy(s, 0.5 * h, k2));
            const auto k4 = detail::char_rhs(b1, detail::axpy(s, h, k3));
            for (size_t p = 0; p < s.x.size(); ++p) {
                s.x[p] += h / 6.0 * (k1.x[p] + 2 * k2.x[p] + 2 * k3.x[p] + k4.x[p]);
                s.xi[p] += h / 6.0 * (k1.xi[p] + 2 * k2.xi[p] + 2 * k3.xi[p] + k4.xi[p]);
            }
            b0 = b1;
        }
        return r;
    }
    FourierField z = z0.resized(N);
    auto stage = [&](double t, const FourierField& zz, const detail::CharState& cs, FourierField& dz) {
        const FourierField bb = bre(t, zz);
        dz = kI * q.apply_bw(times_field(1, bb, xifn::power(1)), zz);
        return detail::char_rhs(bb, cs);
    };
    for (int k = 0; k <= steps; ++k) {
        r.tau.push_back(k * h);
        r.z.push_back(z);
        r.x.push_back(s.x);
        r.xi.push_back(s.xi);
        if (k == steps) break;
        const double t = k * h;
        FourierField d1, d2, d3, d4;
        const auto k1 = stage(t, z, s, d1);
        const auto k2 = stage(t + 0.5 * h, z + (0.5 * h) * d1, detail::axpy(s, 0.5 * h, k1), d2);
        const auto k3 = stage(t + 0.5 * h, z + (0.5 * h) * d2, detail::axpy(s, 0.5 * h, k2), d3);
        const auto k4 = stage(t + h, z + h * d3, detail::axpy(s, h, k3), d4);
        z = z + (h / 6.0) * (d1 + 2.0 * d2 + 2.0 * d3 + d4);
        check_finite(z, "characteristic_flow");
        for (size_t p = 0; p < s.x.size(); ++p) {
            s.x[p] += h / 6.0 * (k1.x[p] + 2 * k2.x[p] + 2 * k3.x[p] + k4.x[p]);
            s.xi[p] += h / 6.0 * (k1.xi[p] + 2 * k2.xi[p] + 2 * k3.xi[p] + k4.xi[p]);
        }
    }
    r.iterations = 1;
    r.converged = true;
    return r;
}

// beta with x + g(x) + beta(x + g(x)) = x, from per-gridpoint Newton on y = x + g(x).
inline FourierField invert_torus_diffeo(const FourierField& g, double tol = 1e-12) {
    const int N = g.modes();
    const FourierField gr = real_part(g);
    double slope = 0.0;
    for (const auto& v : synthesize(derivative(gr), dealias_size(std::max(N, 8), 3))) slope = std::max(slope, std::abs(v.real()));
    if (slope >= 1.0) throw ValidationError("invert_torus_diffeo: |d_x gamma| >= 1, not a diffeomorphism");
    const int M = fft_size_at_least(std::max(4 * N + 1, 16));
    const auto ys = grid_points(M);
    std::vector<double> beta(M);
    for (int l = 0; l < M; ++l) {
        const double y = ys[l];
        double x = y - gr.eval(y).real();
        for (int it = 0; it < 60; ++it) {
            const auto [v, dv] = gr.eval_both(x);
            const double F = x + v.real() - y;
            const double dx = F / (1.0 + dv.real());
            x -= dx;
            x = y + std::remainder(x - y, kTwoPi);  // periodic wrap around the target
            if (std::abs(dx) < tol) break;
        }
        beta[l] = -gr.eval(x).real();
    }
    return analyze_real(beta, N);
}

// Pointwise residual max |x + g(x) + beta(x + g(x)) - x| on the 2N+1 grid.
inline double diffeo_residual(const FourierField& g, const FourierField& beta) {
    double r = 0.0;
    for (double x : grid_points(2 * g.modes() + 1)) {
        const double y = x + g.eval(x).real();
        r = std::max(r, std::abs(y + beta.eval(y).real() - x));
    }
    return r;
}

struct GeneratorBOptions {
    double tol = 1e-13;
    int max_iter = 40;
    double fd_eps = 1e-5;
};

struct GeneratorBSolve {
    FourierField b;
    std::vector<double> increments;  // sup-norm differences of successive iterates
    double residual = 0.0;           // sup-norm residual of the fixed-point equation
};

// b = [beta + tau d_W beta[Op^BW(i b xi) W]] / (1 + tau beta_x), started from beta / (1 + tau beta_x).
class GeneratorB {
public:
    GeneratorB(StateMap beta, Quantizer q, GeneratorBOptions o = {})
        : beta_(std::move(beta)), q_(std::move(q)), o_(o) {}

    FourierField operator()(double tau, const FourierField& W) const { return solve(tau, W).b; }

    GeneratorBSolve solve(double tau, const FourierField& W0) const {
        const int N = q_.modes();
        const FourierField W = W0.resized(N);
        const FourierField beta = real_part(beta_(W)).resized(N);
        const FourierField beta_x = derivative(beta);
        auto rhs = [&](const FourierField& b) {
            FourierField num = beta;
            if (tau != 0.0) num += tau * dbeta(W, velocity(b, W));
            return pointwise({&num, &beta_x}, N, 2, [tau](const cplx* v) { return v[0].real() / (1.0 + tau * v[1].real()); });
        };
        GeneratorBSolve s;
        s.b = pointwise({&beta, &beta_x}, N, 2, [tau](const cplx* v) { return v[0].real() / (1.0 + tau * v[1].real()); });
        for (int it = 0; it < o_.max_iter; ++it) {
            const FourierField next = rhs(s.b);
            const double inc = sup_norm(next - s.b);
            s.b = next;
            s.increments.push_back(inc);
            if (inc <= o_.tol * std::max(1.0, sup_norm(s.b)) || tau == 0.0) break;
            if (s.increments.size() >= 4 && inc > s.increments[s.increments.size() - 2] &&
                s.increments[s.increments.size() - 2] > s.increments[s.increments.size() - 3])
                throw NumericalError("solve_generator_b: iteration not contracting", s.increments);
        }
        s.residual = sup_norm(s.b - rhs(s.b));
        return s;
    }

    // Op^BW(i b xi) W
    FourierField velocity(const FourierField& b, const FourierField& W) const {
        return kI * q_.apply_bw(times_field(1, b, xifn::power(1)), W);
    }

    FourierField dbeta(const FourierField& W, const FourierField& v) const {
        const double nv = sobolev_norm(v, 0.0);
        if (nv == 0.0) return FourierField(q_.modes());
        const double eps = o_.fd_eps * std::max(sobolev_norm(W, 0.0), 1e-8) / nv;
        const FourierField bp = beta_(W + eps * v), bm = beta_(W - eps * v);
        return real_part((bp - bm) * cplx(1.0 / (2.0 * eps))).resized(q_.modes());
    }

    const StateMap& beta() const { return beta_; }
    const Quantizer& quantizer() const { return q_; }

private:
    StateMap beta_;
    Quantizer q_;
    GeneratorBOptions o_;
};

inline GeneratorB solve_generator_b(StateMap beta, const Quantizer& q, GeneratorBOptions o = {}) {
    return GeneratorB(std::move(beta), q, o);
}

// ---- constant m_b -------------------------------------------------------------------

struct MbOptions {
    int n_iters = 2;
    double dtau_inner = 0.1;  // RK4 step for the internal flows
    GeneratorBOptions gen{1e-12, 20, 1e-5};
};

struct MbIteration {
    int n = 0;
    double m_n = 0.0;        // m_n at the final state of the flow of b_n
    double variance = 0.0;   // x-variance of F(b_n)
    double f_mean = 0.0;
    double seconds = 0.0;
};

struct MbResult {
    double m_b = 0.0;
    double closed_form = 0.0;  // m_1(z0): harmonic-type average of ae = ã(z0)
    std::vector<MbIteration> history;
    CoefFn b;                                   // b_n of the last iteration
    std::function<double(double)> F;            // F(b_n)(x) of the last iteration
    std::function<double(const FourierField&)> m_of_state;
};

// m(w) = [2 pi / int (1 + a)^{-1/m} dx]^m - 1 for a real grid function a.
inline double harmonic_constant(const std::vector<double>& a, double m) {
    double acc = 0.0;
    for (double v : a) {
        if (!(1.0 + v > 0.0)) throw ValidationError("constant_m_b: 1 + a <= 0 (ellipticity violated)");
        acc += std::pow(1.0 + v, -1.0 / m);
    }
    acc *= kTwoPi / a.size();
    return std::pow(kTwoPi / acc, m) - 1.0;
}

namespace detail {

// dz/dtau = Op^BW(i b(tau,z) xi) z by RK4 from tau0 to tau1 (either direction).
inline FourierField transport_rk4(const CoefFn& b, const FourierField& z0, double tau0, double tau1, double dtau,
                                  const Quantizer& q) {
    const int steps = std::max(1, static_cast<int>(std::lround(std::abs(tau1 - tau0) / dtau)));
    const double h = (tau1 - tau0) / steps;
    FourierField z = z0.resized(q.modes());
    auto f = [&](double t, const FourierField& y) {
        return kI * q.apply_bw(times_field(1, real_part(b(t, y)), xifn::power(1)), y);
    };
    for (int k = 0; k < steps; ++k) {
        const double t = tau0 + k * h;
        const FourierField k1 = f(t, z);
        const FourierField k2 = f(t + 0.5 * h, z + (0.5 * h) * k1);
        const FourierField k3 = f(t + 0.5 * h, z + (0.5 * h) * k2);
        const FourierField k4 = f(t + h, z + h * k3);
        z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        check_finite(z, "constant_m_b");
    }
    return z;
}

// One level of the m_b iteration, built on the previous generator.
struct MbLevel {
    StateMap atilde;
    double m;
    CoefFn b_prev;  // empty for n = 1
    double dtau;
    Quantizer q;

    FourierField pullback(const FourierField& w) const {
        return b_prev ? transport_rk4(b_prev, w, 1.0, 0.0, dtau, q) : w.resized(q.modes());
    }
    std::vector<double> a_grid(const FourierField& w) const {
        const FourierField a = real_part(atilde(pullback(w)));
        return synthesize_real(a.resized(q.modes()), fft_size_at_least(4 * q.modes() + 1));
    }
    double m_n(const FourierField& w) const { return harmonic_constant(a_grid(w), m); }
    // gamma_n(1, w) = d_x^{-1}(((1 + m_n)/(1 + a))^{1/m} - 1)
    FourierField gamma(const FourierField& w) const {
        const auto a = a_grid(w);
        const double mn = harmonic_constant(a, m);
        std::vector<double> g(a.size());
        for (size_t l = 0; l < a.size(); ++l) g[l] = std::pow((1.0 + mn) / (1.0 + a[l]), 1.0 / m) - 1.0;
        FourierField gf = analyze_real(g, q.modes());
        gf[0] = 0.0;  // mean is zero up to round-off; the check below guards it
        const double mean = std::abs(analyze_real(g, q.modes()).mean());
        if (mean > 1e-9) throw NumericalError("constant_m_b: d_x^{-1} input has mean " + std::to_string(mean));
        return antiderivative(gf);
    }
    FourierField beta(const FourierField& w) const { return invert_torus_diffeo(gamma(w)); }
};

}  // namespace detail

// Runs the m_n / gamma_n / beta_n / b_n iteration from the state z0 and reports, for each n,
// the x-variance of F(b_n) = (1 + ã(z0, y)) (1 + gamma_y(1, z, y))^m at y = x + beta(z, x),
// z = Phi_{b_n}(1, z0).
inline MbResult constant_m_b(const StateMap& atilde, double m, const FourierField& z0, const Quantizer& q,
                             const MbOptions& o = {}) {
    require(m > 1.0, "constant_m_b: order m must exceed 1");
    const int N = q.modes();
    const FourierField u0 = z0.resized(N);
    const int M = 2 * N + 1;
    const auto xs = grid_points(M);
    const FourierField a0 = real_part(atilde(u0)).resized(N);
    const auto a0g = synthesize_real(a0, M);

    MbResult res;
    res.closed_form = harmonic_constant(a0g, m);
    {
        double mean = 0.0, var = 0.0;
        for (double v : a0g) mean += (1.0 + v) / M;
        for (double v : a0g) var += (1.0 + v - mean) * (1.0 + v - mean) / M;
        res.history.push_back({0, 0.0, var, mean, 0.0});
    }
    CoefFn b_prev;
    std::shared_ptr<detail::MbLevel> level;
    for (int n = 1; n <= o.n_iters; ++n) {
        const auto t0 = std::chrono::steady_clock::now();
        level = std::make_shared<detail::MbLevel>(detail::MbLevel{atilde, m, b_prev, o.dtau_inner, q});
        auto gen = std::make_shared<GeneratorB>([level](const FourierField& w) { return level->beta(w); }, q, o.gen);
        CoefFn bn = [gen](double tau, const FourierField& w) { return (*gen)(tau, w); };
        const FourierField z = detail::transport_rk4(bn, u0, 0.0, 1.0, o.dtau_inner, q);
        const FourierField gam = level->gamma(z), bet = invert_torus_diffeo(gam);
        const double mn = level->m_n(z);
        auto Fx = [a0, gam, bet, m](double x) {
            const double y = x + bet.eval(x).real();
            return (1.0 + a0.eval(y).real()) * std::pow(1.0 + gam.eval_dx(y).real(), m);
        };
        std::vector<double> F(M);
        for (int l = 0; l < M; ++l) F[l] = Fx(xs[l]);
        res.F = Fx;
        double mean = 0.0, var = 0.0;
        for (double v : F) mean += v / M;
        for (double v : F) var += (v - mean) * (v - mean) / M;
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        res.history.push_back({n, mn, var, mean, secs});
        res.m_b = mn;
        b_prev = bn;
    }
    res.b = b_prev ? b_prev : CoefFn([N](double, const FourierField&) { return FourierField(N); });
    if (!res.F) res.F = [a0](double x) { return 1.0 + a0.eval(x).real(); };
    res.m_of_state = [level](const FourierField& w) { return level ? level->m_n(w) : 0.0; };
    return res;
}

}  // namespace paradiff
