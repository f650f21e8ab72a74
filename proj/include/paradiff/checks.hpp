#pragma once

// Self-contained numerical checks shared by the CLI and the acceptance runner. Each returns
// the measured quantities; thresholds live with the caller.

#include "harness.hpp"

namespace paradiff::checks {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline FourierField cos_mode(int nx, int k) {
    return 0.5 * (FourierField::mode(nx, k, kSqrt2Pi) + FourierField::mode(nx, -k, kSqrt2Pi));
}
inline FourierField sin_mode(int nx, int k) {
    return cplx(0, -0.5) * (FourierField::mode(nx, k, kSqrt2Pi) - FourierField::mode(nx, -k, kSqrt2Pi));
}

// Smooth coefficient with modes |n| <= band, amplitudes decaying like 2^-|n|.
inline FourierField smooth_coefficient(int band, unsigned seed, bool real) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> nd;
    FourierField f(band);
    for (int n = -band; n <= band; ++n) f[n] = cplx(nd(gen), nd(gen)) * std::pow(0.5, std::abs(n));
    if (real) f = 0.5 * (f + conj_field(f));
    return f;
}

inline std::vector<Symbol> multiplier_symbols() {
    return {multiplier(1, xifn::power(1)),
            multiplier(0, xifn::constant(1.0)),
            multiplier(2, xifn::power(2)),
            multiplier(1, xifn::jpow(1)),
            multiplier(-1, xifn::jpow(-1)),
            multiplier(0.5, xifn::jpow(0.5)),
            multiplier(2, [](const Jet& x) { return x * x + 0.14 / pow(jbracket(x), 3.0); }),
            multiplier(0, [](const Jet& x) { return cos(x); }),
            multiplier(2, [](const Jet& x) { return abs(x) * x; }),
            multiplier(1, [](const Jet& x) { return cplx(0, 1) * x + cplx(0.3, -0.2); })};
}

inline std::vector<Symbol> real_symbols() {
    std::vector<Symbol> out;
    const std::vector<std::pair<double, XiFn>> xi = {{1, xifn::jpow(1)},
                                                     {2, xifn::power(2)},
                                                     {0, xifn::constant(1.0)},
                                                     {0.5, xifn::jpow(0.5)},
                                                     {1, [](const Jet& x) { return x * x / jbracket(x); }}};
    for (unsigned k = 0; k < 10; ++k) {
        const auto& [m, g] = xi[k % xi.size()];
        Symbol a = times_field(m, smooth_coefficient(4, 100 + k, true), g);
        a.real_valued = true;
        out.push_back(a);
    }
    return out;
}

inline std::vector<Symbol> complex_symbols() {
    std::vector<Symbol> out;
    for (unsigned k = 0; k < 5; ++k)
        out.push_back(separable(1, {{smooth_coefficient(6, 200 + k, false), xifn::jpow(1)},
                                    {smooth_coefficient(6, 250 + k, false), [](const Jet& x) { return cplx(0, 1) * x; }}}));
    return out;
}

struct QuantizeCheck {
    int N = 0;
    double delta = 0.0;
    double multiplier_error = 0.0;   // max entry error of Op^BW(a(xi)) - diag(a(j))
    double multiplier_seconds = 0.0;
    double selfadjoint_ratio = 0.0;  // max |A - A*| / |A| over real symbols
    double adjoint_error = 0.0;      // max |A* - Op^BW(conj a)| over complex symbols

    nlohmann::json to_json() const {
        return {{"schema", 1}, {"modes", N}, {"delta", delta}, {"multiplier_error", multiplier_error},
                {"multiplier_seconds", multiplier_seconds}, {"selfadjoint_ratio", selfadjoint_ratio},
                {"adjoint_error", adjoint_error}};
    }
};

inline QuantizeCheck quantize_check(int N, double delta = 0.125) {
    QuantizeCheck c;
    c.N = N;
    c.delta = delta;
    const Quantizer q(N, CutoffFn(delta));
    auto t0 = std::chrono::steady_clock::now();
    for (const Symbol& a : multiplier_symbols()) {
        const CMat A = q.bw(a).matrix;
        for (int k = -N; k <= N; ++k)
            for (int j = -N; j <= N; ++j) {
                const cplx want = k == j ? a.eval(0.0, j) : cplx{};
                c.multiplier_error = std::max(c.multiplier_error, std::abs(A(k + N, j + N) - want));
            }
    }
    c.multiplier_seconds = seconds_since(t0);
    for (const Symbol& a : real_symbols()) {
        const CMat A = q.bw(a).matrix;
        c.selfadjoint_ratio = std::max(c.selfadjoint_ratio, op_norm(A - A.adjoint()) / op_norm(A));
    }
    for (const Symbol& a : complex_symbols()) {
        const CMat lhs = adjoint(q.bw(a)).matrix, rhs = q.bw(sym::conj(a)).matrix;
        c.adjoint_error = std::max(c.adjoint_error, op_norm(lhs - rhs));
    }
    return c;
}

struct ComposeCase {
    int m = 0, mp = 0, rho = 0;
    double slope = 0.0;
    double bound = 0.0;
};

struct ComposeCheck {
    int N = 0;
    double delta = 0.0;
    std::vector<ComposeCase> cases;
    double poisson_error = 0.0;  // max |(a #_1 b - ab) - {a, b} / 2i| on sample points
    double seconds = 0.0;

    bool slopes_within_bound() const {
        for (const auto& c : cases)
            if (!(c.slope <= c.bound)) return false;
        return !cases.empty();
    }
    nlohmann::json to_json() const {
        nlohmann::json j = {{"schema", 1}, {"modes", N}, {"delta", delta}, {"poisson_error", poisson_error},
                            {"seconds", seconds}, {"slopes_within_bound", slopes_within_bound()}};
        for (const auto& c : cases)
            j["cases"].push_back({{"m", c.m}, {"m_prime", c.mp}, {"rho", c.rho}, {"slope", c.slope}, {"bound", c.bound}});
        return j;
    }
};

inline ComposeCheck compose_check(int N, double delta = 0.125) {
    ComposeCheck c;
    c.N = N;
    c.delta = delta;
    const auto t0 = std::chrono::steady_clock::now();
    const Quantizer q(N, CutoffFn(delta));
    const FourierField c1 = sin_mode(2, 2) + 0.3 * FourierField::mode(2, 2, 1.0) + 0.3 * FourierField::mode(2, -2, 1.0);
    const FourierField c2 = cos_mode(1, 1) + FourierField::constant(1, 1.0);
    for (int m : {0, 1, 2})
        for (int mp : {0, 1, 2})
            for (int rho : {2, 3, 4}) {
                const Symbol a = times_field(m, c1, xifn::jpow(m));
                const Symbol b = times_field(mp, c2, [mp](const Jet& x) {
                    return pow(jbracket(x), double(mp)) + 0.5 * x * pow(jbracket(x), mp - 2.0);
                });
                c.cases.push_back({m, mp, rho, compose(a, b, rho, q).residual_order(), m + mp - rho + 0.5});
            }
    for (unsigned seed = 0; seed < 6; ++seed) {
        const Symbol a = separable(1, {{smooth_coefficient(4, 300 + seed, false), xifn::jpow(1)}});
        const Symbol b = separable(2, {{smooth_coefficient(4, 400 + seed, false), [](const Jet& x) { return x * x / jbracket(x); }}});
        const Symbol lhs = sym::difference(compose_symbol(a, b, 1), sym::product(a, b));
        const Symbol rhs = sym::scale(poisson(a, b), 1.0 / cplx(0, 2));
        for (double xi : {-20.5, -3.0, -0.5, 0.0, 1.5, 7.0, 33.0})
            for (double x : {0.0, 0.4, 1.9, 3.3, 5.6})
                c.poisson_error = std::max(c.poisson_error, std::abs(lhs.eval(x, xi) - rhs.eval(x, xi)));
    }
    c.seconds = seconds_since(t0);
    return c;
}

// b(tau, z; x) = (1 + tau) |z|^2(x) + Re z(x)
inline GeneratorSpec mixed_transport() {
    return transport_generator([](double tau, const FourierField& z) {
        const FourierField a2 = pointwise({&z}, z.modes(), 2, [](const cplx* v) { return cplx(std::norm(v[0])); });
        return (1.0 + tau) * a2 + real_part(z);
    });
}

// Smooth state on |n| <= 6 with H^4 norm r.
inline FourierField flow_state(int N, double r, unsigned seed = 11) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> nd;
    FourierField u(N);
    for (int n = -std::min(N, 6); n <= std::min(N, 6); ++n) u[n] = cplx(nd(gen), nd(gen)) * std::pow(jbracket(n), -2.0);
    return (r / sobolev_norm(u, 4.0)) * u;
}

struct FlowCheck {
    int N = 0;
    std::vector<double> radii;
    std::vector<double> max_ratio;       // largest Picard contraction ratio per radius
    std::vector<double> round_trip;      // |flow^-1(flow(u0)) - u0|_{H^3} per radius
    std::vector<int> picard_iterations;
    double seconds = 0.0;

    nlohmann::json to_json() const {
        return {{"schema", 1}, {"modes", N}, {"radii", radii}, {"max_picard_ratio", max_ratio},
                {"round_trip_h3", round_trip}, {"picard_iterations", picard_iterations}, {"seconds", seconds}};
    }
};

inline FlowCheck flow_check(int N, const std::vector<double>& radii) {
    FlowCheck c;
    c.N = N;
    c.radii = radii;
    const auto t0 = std::chrono::steady_clock::now();
    const Quantizer q(N);
    for (double r : radii) {
        const FourierField u0 = flow_state(N, r);
        const FlowResult f = flow_nonlinear(mixed_transport(), u0, q);
        if (!f.converged) throw NumericalError("flow: Picard iteration did not converge at r = " + std::to_string(r));
        double mr = 0.0;
        for (double v : f.contraction_ratios) mr = std::max(mr, v);
        c.max_ratio.push_back(mr);
        c.picard_iterations.push_back(f.picard_iterations);
        c.round_trip.push_back(sobolev_norm(flow_inverse(mixed_transport(), f.final_state(), q) - u0, 3.0));
    }
    c.seconds = seconds_since(t0);
    return c;
}

struct MbCheck {
    double zero_m_b = 0.0;
    double constant = 0.3;
    double constant_m_b = 0.0;
    EgorovDemoReport demo;

    nlohmann::json to_json() const {
        nlohmann::json h;
        for (const auto& it : demo.history) h.push_back({{"m_n", it.m_n}, {"variance", it.variance}});
        return {{"schema", 1}, {"zero_m_b", zero_m_b}, {"constant", constant}, {"constant_m_b", constant_m_b},
                {"demo", {{"r", demo.r}, {"modes", demo.N}, {"m_b", demo.m_b}, {"closed_form", demo.closed_form},
                          {"variance_before", demo.variance_before}, {"variance_after", demo.variance_after},
                          {"reduction", demo.reduction}, {"history", h}}}};
    }
};

inline MbCheck mb_check(double r = 0.02) {
    MbCheck c;
    const Quantizer q(8);
    const FourierField z0 = flow_state(8, 0.02, 1);
    MbOptions o;
    o.n_iters = 1;
    c.zero_m_b = constant_m_b([](const FourierField& w) { return FourierField(w.modes()); }, 2.0, z0, q, o).m_b;
    const double k = c.constant;
    c.constant_m_b = constant_m_b([k](const FourierField& w) { return FourierField::constant(w.modes(), k); }, 2.0, z0, q, o).m_b;
    c.demo = egorov_demo(r);
    return c;
}

struct NonresCheck {
    double example_divisor = -1.0;  // |w_3 - w_2 - w_1| for w_j = j^2 found by enumeration
    std::vector<std::vector<double>> sampled_m;
    std::vector<std::vector<double>> min_divisor;  // [sample][p - 1]
    std::vector<std::vector<long long>> violations;

    double overall_min() const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& v : min_divisor)
            for (double d : v) m = std::min(m, d);
        return m;
    }
    long long total_violations() const {
        long long n = 0;
        for (const auto& v : violations)
            for (long long d : v) n += d;
        return n;
    }
    nlohmann::json to_json() const {
        return {{"schema", 1}, {"example_divisor", example_divisor}, {"sampled_m", sampled_m},
                {"min_divisor", min_divisor}, {"violations", violations}, {"overall_min", overall_min()}};
    }
};

// m vectors sampled uniformly from [-1/2, 1/2]^M.
inline NonresCheck nonresonance_check(int samples, int M, int J, unsigned seed) {
    NonresCheck c;
    const auto sq = custom_frequencies([](int j) { return double(j) * j; }, J);
    const std::vector<SignedIndex> target = {{-1, 3}, {1, 1}, {1, 2}};
    enumerate_tuples(sq, 3, J, true, [&](const std::vector<SignedIndex>& t, double d) {
        auto st = t;
        std::sort(st.begin(), st.end());
        if (st == target) c.example_divisor = std::abs(d);
    });
    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> ud(-0.5, 0.5);
    for (int s = 0; s < samples; ++s) {
        std::vector<double> m(M);
        for (double& v : m) v = ud(gen);
        const auto w = nls_frequencies(m, J);
        std::vector<double> mins;
        std::vector<long long> viol;
        for (int p = 1; p <= 4; ++p) {
            const auto rep = check_nonresonance(w, p, J);
            mins.push_back(rep.min_divisor);
            viol.push_back(static_cast<long long>(rep.violating_tuples.size()));
        }
        c.sampled_m.push_back(m);
        c.min_divisor.push_back(mins);
        c.violations.push_back(viol);
    }
    return c;
}

struct BnfCheck {
    double r = 0.0;
    double backsub_residual = 0.0;
    double direct_sum_residual = 0.0;
    double min_divisor = 0.0;
    std::vector<double> raw_degree2;  // r^2 |X_2| per probe before the transformation
    std::vector<double> degree2;      // r^2 |Y_2| per probe after one step

    nlohmann::json to_json() const {
        return {{"schema", 1}, {"r", r}, {"backsub_residual", backsub_residual},
                {"direct_sum_residual", direct_sum_residual}, {"min_divisor", min_divisor},
                {"raw_degree2_norm", raw_degree2}, {"degree2_norm", degree2}};
    }
};

// One quadratic BNF step on the NLS model; degree-2 parts of the pushforward on unit probes.
inline BnfCheck bnf_check(const ParaSystem& s, double r = 1e-3, int probes = 3) {
    BnfCheck c;
    c.r = r;
    const BnfResult res = bnf_pipeline(s, 1);
    const BnfStep& st = res.transform.steps.at(0);
    c.backsub_residual = st.backsub_residual;
    c.direct_sum_residual = st.direct_sum_residual;
    c.min_divisor = st.min_divisor;
    const FieldFn X = [&](const FourierField& u) { return s.field(u); };
    const StateMaps m = res.transform.maps();
    for (int k = 0; k < probes; ++k) {
        const FourierField Z = unit_probe(s.N, 3, 11 + k);
        c.raw_degree2.push_back(pushforward_taylor(identity_maps(), X, Z, r, 3).norm[2]);
        c.degree2.push_back(pushforward_taylor(m, X, Z, r, 3).norm[2]);
    }
    return c;
}

// JSON dump of a tensor: one record per coefficient.
inline nlohmann::json tensor_json(const HomTensor& T, const FrequencySpec& w) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& [key, v] : T.entries()) {
        const auto full = key.full_tuple();
        std::vector<std::string> tuple;
        for (const auto& s : full) tuple.push_back(std::string(s.sigma > 0 ? "(+," : "(-,") + std::to_string(s.j) + ")");
        out.push_back({{"degree", T.degree()}, {"k", key.k}, {"tuple", tuple}, {"divisor", entry_divisor(w, key)},
                       {"coefficient_re", v.real()}, {"coefficient_im", v.imag()}});
    }
    return out;
}

}  // namespace paradiff::checks
