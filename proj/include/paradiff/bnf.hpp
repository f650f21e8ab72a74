#pragma once

#include <random>
#include <sstream>

#include "models.hpp"
#include "tensor.hpp"

namespace paradiff {

inline std::string tuple_string(const std::vector<SignedIndex>& t) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < t.size(); ++i) os << (i ? "," : "") << (t[i].sigma > 0 ? "+" : "-") << t[i].j;
    os << ")";
    return os.str();
}

// ---------------------------------------------------------------------------------------------
// Symbol tensors: coefficients (m_j)^{sigma}_{n}(xi) sampled on a xi grid.

struct SymbolTensor {
    int degree = 0;
    std::vector<double> xi;
    std::map<std::vector<SignedIndex>, std::vector<cplx>> c;

    SymbolTensor() = default;
    SymbolTensor(int deg, std::vector<double> grid) : degree(deg), xi(std::move(grid)) {}

    void add(std::vector<SignedIndex> t, const std::vector<cplx>& v) {
        require(static_cast<int>(t.size()) == degree, "SymbolTensor: tuple length differs from the degree");
        require(v.size() == xi.size(), "SymbolTensor: value count differs from the xi grid");
        std::sort(t.begin(), t.end());
        auto& slot = c[t];
        if (slot.empty()) slot.assign(xi.size(), 0.0);
        for (size_t i = 0; i < v.size(); ++i) slot[i] += v[i];
    }
    const std::vector<cplx>* find(std::vector<SignedIndex> t) const {
        std::sort(t.begin(), t.end());
        auto it = c.find(t);
        return it == c.end() ? nullptr : &it->second;
    }
    bool empty() const { return c.empty(); }
};

struct SymbolStepResult {
    SymbolTensor solution;
    SymbolTensor resonant;
    double min_divisor = std::numeric_limits<double>::infinity();
    double backsub_residual = 0.0;
};

// b = -m / (i sum sigma_i omega_{n_i}) off the resonant set, 0 on it.
inline SymbolStepResult homological_symbol_step(const SymbolTensor& m, const FrequencySpec& w, double floor = 1e-8) {
    SymbolStepResult r{SymbolTensor(m.degree, m.xi), SymbolTensor(m.degree, m.xi)};
    for (const auto& [t, v] : m.c) {
        if (is_resonant(t)) {
            r.resonant.add(t, v);
            continue;
        }
        const double d = divisor(w, t);
        if (std::abs(d) < floor)
            throw NumericalError("homological_symbol_step: divisor " + std::to_string(d) + " below floor at tuple " +
                                 tuple_string(t));
        r.min_divisor = std::min(r.min_divisor, std::abs(d));
        std::vector<cplx> b(v.size());
        for (size_t i = 0; i < v.size(); ++i) {
            b[i] = -v[i] / (kI * d);
            if (v[i] != 0.0) r.backsub_residual = std::max(r.backsub_residual, std::abs(v[i] + kI * d * b[i]) / std::abs(v[i]));
        }
        r.solution.add(t, b);
    }
    return r;
}

inline SymbolTensor resonant_project(const SymbolTensor& m) {
    SymbolTensor r(m.degree, m.xi);
    if (m.degree % 2 != 0) return r;
    for (const auto& [t, v] : m.c)
        if (is_resonant(t)) r.add(t, v);
    return r;
}

// ---------------------------------------------------------------------------------------------
// Vector-field tensors. The divisor of an entry is that of its full tuple (in, (-, k)).

inline double entry_divisor(const FrequencySpec& w, const TensorKey& key) { return divisor(w, key.full_tuple()); }

inline HomTensor resonant_project(const HomTensor& X) {
    HomTensor r(X.degree());
    for (const auto& [k, v] : X.entries())
        if (is_resonant(k.full_tuple())) r.set(k, v);
    return r;
}

struct SmoothingStepResult {
    HomTensor solution;
    HomTensor resonant;
    double min_divisor = std::numeric_limits<double>::infinity();
    double backsub_residual = 0.0;    // max |q + i d g| / |q|
    double direct_sum_residual = 0.0;  // max |resonant + (-i d) g - q| / |q|
};

// g = -q / (i d) off the resonant set, so that [G, L] = -(non-resonant part of q).
inline SmoothingStepResult homological_smoothing_step(const HomTensor& q, const FrequencySpec& w, double floor = 1e-8) {
    SmoothingStepResult r{HomTensor(q.degree()), HomTensor(q.degree())};
    for (const auto& [key, v] : q.entries()) {
        const auto t = key.full_tuple();
        if (is_resonant(t)) {
            r.resonant.set(key, v);
            continue;
        }
        const double d = divisor(w, t);
        if (std::abs(d) < floor)
            throw NumericalError("homological_smoothing_step: divisor " + std::to_string(d) + " below floor at tuple " +
                                 tuple_string(t));
        r.min_divisor = std::min(r.min_divisor, std::abs(d));
        if (v == 0.0) continue;
        const cplx g = -v / (kI * d);
        r.solution.set(key, g);
        r.backsub_residual = std::max(r.backsub_residual, std::abs(v + kI * d * g) / std::abs(v));
    }
    for (const auto& [key, v] : q.entries()) {
        if (v == 0.0) continue;
        const cplx rebuilt = r.resonant.at(key) - kI * entry_divisor(w, key) * r.solution.at(key);
        r.direct_sum_residual = std::max(r.direct_sum_residual, std::abs(rebuilt - v) / std::abs(v));
    }
    return r;
}

// ---------------------------------------------------------------------------------------------
// Time-t flows of polynomial generators (RK4 with fixed substeps).

inline FourierField generator_flow(const HomTensor& G, FourierField z, double t, int substeps) {
    const int N = z.modes();
    const double h = t / substeps;
    for (int s = 0; s < substeps; ++s) {
        const FourierField k1 = G.eval(z, N);
        const FourierField k2 = G.eval(z + (0.5 * h) * k1, N);
        const FourierField k3 = G.eval(z + (0.5 * h) * k2, N);
        const FourierField k4 = G.eval(z + h * k3, N);
        z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return z;
}

// (z(t), v(t)) with v' = DG(z)[v]: the tangent map of the discrete flow.
inline std::pair<FourierField, FourierField> generator_flow_tangent(const HomTensor& G, FourierField z, FourierField v,
                                                                    double t, int substeps) {
    const int N = z.modes();
    const double h = t / substeps;
    for (int s = 0; s < substeps; ++s) {
        const FourierField k1 = G.eval(z, N), l1 = G.derivative(z, v, N);
        const FourierField z2 = z + (0.5 * h) * k1, v2 = v + (0.5 * h) * l1;
        const FourierField k2 = G.eval(z2, N), l2 = G.derivative(z2, v2, N);
        const FourierField z3 = z + (0.5 * h) * k2, v3 = v + (0.5 * h) * l2;
        const FourierField k3 = G.eval(z3, N), l3 = G.derivative(z3, v3, N);
        const FourierField z4 = z + h * k3, v4 = v + h * l3;
        const FourierField k4 = G.eval(z4, N), l4 = G.derivative(z4, v4, N);
        z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        v += (h / 6.0) * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
    }
    return {z, v};
}

// Forward map, inverse map and tangent map of a change of variables.
struct StateMaps {
    std::function<FourierField(const FourierField&)> forward;
    std::function<FourierField(const FourierField&)> inverse;
    std::function<FourierField(const FourierField&, const FourierField&)> tangent;  // DPsi(u)[v]
};

inline StateMaps identity_maps() {
    return {[](const FourierField& u) { return u; }, [](const FourierField& u) { return u; },
            [](const FourierField&, const FourierField& v) { return v; }};
}

struct BnfStep {
    int degree = 0;  // degree of the generator (= degree of the eliminated field terms)
    HomTensor generator;
    double min_divisor = 0.0;
    double backsub_residual = 0.0;
    double direct_sum_residual = 0.0;
    size_t eliminated = 0;
    size_t resonant_kept = 0;
};

// Psi = Phi_{G_last} o ... o Phi_{G_first}, each Phi the time-1 flow.
struct BnfTransform {
    std::vector<BnfStep> steps;
    int substeps = 6;

    bool is_identity() const {
        for (const auto& s : steps)
            if (!s.generator.empty()) return false;
        return true;
    }
    FourierField forward(FourierField u) const {
        for (const auto& s : steps) u = generator_flow(s.generator, std::move(u), 1.0, substeps);
        return u;
    }
    FourierField inverse(FourierField z) const {
        for (auto it = steps.rbegin(); it != steps.rend(); ++it) z = generator_flow(it->generator, std::move(z), -1.0, substeps);
        return z;
    }
    FourierField tangent(FourierField u, FourierField v) const {
        for (const auto& s : steps) std::tie(u, v) = generator_flow_tangent(s.generator, u, v, 1.0, substeps);
        return v;
    }
    StateMaps maps() const {
        const BnfTransform self = *this;
        return {[self](const FourierField& u) { return self.forward(u); },
                [self](const FourierField& z) { return self.inverse(z); },
                [self](const FourierField& u, const FourierField& v) { return self.tangent(u, v); }};
    }
};

struct BnfOptions {
    int window = 12;
    double floor = 1e-8;
    int substeps = 6;
    bool check_nonresonance = true;
};

// The transformed system: windowed degree-2 and degree-3 parts of the field replaced by their
// conjugated counterparts; everything else kept from the original system.
struct BnfResult {
    ParaSystem system;
    BnfTransform transform;
    int n_order = 0;
    int window = 0;
    std::map<int, HomTensor> raw;     // X_p restricted to the window
    std::map<int, HomTensor> normal;  // conjugated tensors Y_p
    std::vector<NonresonanceReport> nonresonance;

    FourierField nonlinear_field(const FourierField& z) const {
        FourierField f = system.nonlinear_field(z);
        for (const auto& [p, X] : raw) f -= X.eval(z, system.N);
        for (const auto& [p, Y] : normal) f += Y.eval(z, system.N);
        return f;
    }
    FourierField field(const FourierField& z) const { return system.linear(z) + nonlinear_field(z); }

    // Non-resonant part of the conjugated tensor of degree p (zero for p <= n_order + 1 by construction).
    HomTensor nonresonant(int p) const {
        auto it = normal.find(p);
        if (it == normal.end()) return HomTensor(p);
        HomTensor r = it->second;
        r += resonant_project(it->second).scaled(-1.0);
        r.prune(0.0);
        return r;
    }
};

inline BnfResult bnf_pipeline(const ParaSystem& sys, int n_order, const BnfOptions& o = {}) {
    require(n_order >= 1 && n_order <= 2, "bnf_pipeline: N_order must be 1 or 2");
    require(!sys.real_scalar, "bnf_pipeline: the system must be a complex (u, ubar) system");
    require(o.window >= 1 && o.window <= 16, "bnf_pipeline: window must lie in [1, 16]");
    require(o.substeps >= 1, "bnf_pipeline: substeps must be positive");
    require(std::abs(sys.freq(0)) > o.floor, "bnf_pipeline: omega_0 must be nonzero");
    BnfResult res;
    res.system = sys;
    res.n_order = n_order;
    res.window = std::min(o.window, sys.N);
    res.transform.substeps = o.substeps;
    const int W = res.window;
    if (o.check_nonresonance) {
        for (int j = 1; j <= n_order; ++j) {
            auto rep = check_nonresonance(sys.freq, j + 2, W, o.floor);
            if (!rep.violating_tuples.empty())
                throw NumericalError("bnf_pipeline: non-resonance fails at order " + std::to_string(j + 2) + ", tuple " +
                                     tuple_string(rep.violating_tuples.front()));
            res.nonresonance.push_back(std::move(rep));
        }
    }
    for (int p = 2; p <= 3; ++p) {
        res.raw[p] = sys.nonlinear.tensor(p, W);
        res.normal[p] = res.raw[p];
    }
    for (int j = 1; j <= n_order; ++j) {
        const int p = j + 1;
        const HomTensor Yp = res.normal[p];
        auto h = homological_smoothing_step(Yp, sys.freq, o.floor);
        BnfStep step;
        step.degree = p;
        step.generator = h.solution;
        step.min_divisor = h.min_divisor;
        step.backsub_residual = h.backsub_residual;
        step.direct_sum_residual = h.direct_sum_residual;
        step.eliminated = h.solution.size();
        step.resonant_kept = h.resonant.size();
        if (h.solution.empty()) continue;
        // Y <- Y + [G, Y] + 1/2 [G, [G, L]] + ..., with [G, L] = -(non-resonant part of Y_p).
        HomTensor nr = Yp;
        nr += h.resonant.scaled(-1.0);
        res.normal[p] = h.resonant;
        const int q = 2 * p - 1;
        if (q <= 3) {
            HomTensor add = bracket(h.solution, Yp, W);
            add += bracket(h.solution, nr, W).scaled(-0.5);
            res.normal[q] += add;
            res.normal[q].prune(0.0);
        }
        res.transform.steps.push_back(std::move(step));
    }
    return res;
}

// ---------------------------------------------------------------------------------------------
// Pushforward oracle: Y(Z) = DPsi(W)[X(W)], W = Psi^{-1}(Z).

using FieldFn = std::function<FourierField(const FourierField&)>;

inline FourierField pushforward(const StateMaps& m, const FieldFn& X, const FourierField& Z) {
    const FourierField W = m.inverse(Z);
    return m.tangent(W, X(W));
}

struct TaylorReport {
    double r = 0.0;
    std::vector<FourierField> parts;   // Y_d(Zhat) for the unit probe, index d
    std::vector<double> norm;          // |Y_d(r Zhat)| = r^d |Y_d(Zhat)|
    std::vector<double> nonres_norm;   // same after removing the supplied resonant tensor
    double condition = 0.0;
};

// Homogeneous parts of Y(a Zhat) from even/odd combinations at a = r, r/2, r/4, ... solved as a
// Vandermonde system in a. Degrees up to max_degree + 2 are fitted so the reported ones are
// free of the next two orders.
inline TaylorReport pushforward_taylor(const StateMaps& m, const FieldFn& X, const FourierField& Zhat, double r,
                                       int max_degree, const std::map<int, HomTensor>& resonant = {}) {
    require(r > 0.0 && max_degree >= 1 && max_degree <= 6, "pushforward_taylor: invalid amplitude or degree");
    const int M = max_degree / 2 + 2;
    const int D = 2 * M;
    const int N = Zhat.modes();
    std::vector<FourierField> even(M), odd(M);
    for (int k = 0; k < M; ++k) {
        const double a = r * std::pow(0.5, k);
        const FourierField yp = pushforward(m, X, a * Zhat), ym = pushforward(m, X, (-a) * Zhat);
        even[k] = 0.5 * (yp + ym);
        odd[k] = 0.5 * (yp - ym);
    }
    TaylorReport rep;
    rep.r = r;
    rep.parts.assign(D, FourierField(N));
    rep.norm.assign(D, 0.0);
    rep.nonres_norm.assign(D, 0.0);
    for (int parity = 0; parity < 2; ++parity) {
        Eigen::MatrixXd V(M, M);
        for (int k = 0; k < M; ++k)
            for (int i = 0; i < M; ++i) V(k, i) = std::pow(0.5, k * (2 * i + 2 - parity));
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(V);
        const double cond = svd.singularValues()(0) / svd.singularValues()(M - 1);
        rep.condition = std::max(rep.condition, cond);
        if (!(cond < 1e12)) throw NumericalError("pushforward_taylor: regression is ill-conditioned");
        const Eigen::MatrixXd Vinv = V.inverse();
        const auto& data = parity == 0 ? even : odd;
        for (int i = 0; i < M; ++i) {
            const int d = 2 * i + 2 - parity;
            if (d >= D) continue;
            FourierField c(N);
            for (int k = 0; k < M; ++k) c += cplx(Vinv(i, k)) * data[k];
            rep.parts[d] = std::pow(r, -d) * c;
        }
    }
    for (int d = 1; d < D; ++d) {
        const double scale = std::pow(r, d);
        rep.norm[d] = scale * l2_norm(rep.parts[d]);
        FourierField nr = rep.parts[d];
        auto it = resonant.find(d);
        if (it != resonant.end()) nr -= it->second.eval(Zhat, N);
        rep.nonres_norm[d] = scale * l2_norm(nr);
    }
    rep.parts.resize(max_degree + 1);
    rep.norm.resize(max_degree + 1);
    rep.nonres_norm.resize(max_degree + 1);
    return rep;
}

// Unit-l2 probe supported on modes |n| <= band with deterministic phases.
inline FourierField unit_probe(int N, int band, unsigned seed) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> nd;
    FourierField f(N);
    for (int n = -band; n <= band; ++n) f[n] = cplx(nd(gen), nd(gen));
    return (1.0 / l2_norm(f)) * f;
}

// Smallest C with |Psi^{+-1}(Z) - Z|_s <= C |Z|_s^2 over the probes scaled to H^s norm r.
inline double bnf_norm_constant(const BnfTransform& T, const std::vector<FourierField>& probes, double r, double s) {
    double C = 0.0;
    for (const auto& p : probes) {
        const FourierField Z = (r / sobolev_norm(p, s)) * p;
        const double n2 = r * r;
        C = std::max(C, sobolev_norm(T.forward(Z) - Z, s) / n2);
        C = std::max(C, sobolev_norm(T.inverse(Z) - Z, s) / n2);
    }
    return C;
}

}  // namespace paradiff
