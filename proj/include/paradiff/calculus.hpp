#pragma once

#include <limits>

#include "quantization.hpp"

namespace paradiff {

inline constexpr int kMaxRho = 4;

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    int points = 0;
};

// Least-squares slope of log y against log <j> for the given samples.
inline SlopeFit loglog_fit(const std::vector<double>& j, const std::vector<double>& y) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (size_t i = 0; i < j.size(); ++i) {
        if (!(y[i] > 0.0) || !std::isfinite(y[i])) continue;
        const double lx = std::log(jbracket(j[i])), ly = std::log(y[i]);
        sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
        ++n;
    }
    SlopeFit f;
    f.points = n;
    if (n < 2) {
        f.slope = -std::numeric_limits<double>::infinity();
        return f;
    }
    f.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    f.intercept = (sy - f.slope * sx) / n;
    return f;
}

// Slope of log ||A e_j|| vs log <j> over the top 40% of modes, highest 5% discarded.
// Returns -inf when the operator annihilates that range.
inline double smoothing_order(const CMat& A, double floor = 1e-300) {
    const int N = static_cast<int>((A.cols() - 1) / 2);
    const int lo = static_cast<int>(std::ceil(0.55 * N)), hi = static_cast<int>(std::floor(0.95 * N));
    std::vector<double> js, ys;
    for (int j = lo; j <= std::max(lo, hi); ++j)
        for (int sgn : {-1, 1}) {
            const double v = A.col(sgn * j + N).norm();
            js.push_back(j);
            ys.push_back(v > floor ? v : 0.0);
        }
    return loglog_fit(js, ys).slope;
}

inline double smoothing_order(const ParaOp& op) { return smoothing_order(op.matrix); }

// As above, with columns below rel * ||ref e_j|| treated as exact zeros (round-off).
inline double smoothing_order(const CMat& A, const CMat& ref, double rel) {
    CMat B = A;
    for (int j = 0; j < A.cols(); ++j)
        if (A.col(j).norm() <= rel * ref.col(j).norm()) B.col(j).setZero();
    return smoothing_order(B);
}

// {a,b} = d_xi a d_x b - d_x a d_xi b
inline Symbol poisson(const Symbol& a, const Symbol& b) {
    Symbol p = sym::difference(sym::product(sym::dxi(a), sym::dx(b)), sym::product(sym::dx(a), sym::dxi(b)));
    return p.with_order(a.order() + b.order() - 1);
}

// a #_rho b = sum_{k<=rho} (1/k!) (-i/2)^k sum_l C(k,l) (-1)^{k-l} (d_xi^l d_x^{k-l} a)(d_x^l d_xi^{k-l} b)
inline Symbol compose_symbol(const Symbol& a, const Symbol& b, int rho) {
    require(rho >= 0 && rho <= kMaxRho, "compose: rho must lie in [0,4]");
    require(std::isfinite(a.order()) && std::isfinite(b.order()), "compose: order metadata missing");
    Symbol acc = sym::product(a, b);
    for (int k = 1; k <= rho; ++k) {
        const cplx ck = std::pow(cplx(0.0, -0.5), k) / factorial(k);
        for (int l = 0; l <= k; ++l) {
            const double w = binomial(k, l) * ((k - l) % 2 ? -1.0 : 1.0);
            Symbol t = sym::product(sym::dx(sym::dxi(a, l), k - l), sym::dx(sym::dxi(b, k - l), l));
            acc = sym::sum(acc, sym::scale(t, ck * w));
        }
    }
    acc = acc.with_order(a.order() + b.order());
    acc.x_independent = a.x_independent && b.x_independent;
    return acc;
}

struct CompositionResult {
    Symbol composed;
    ParaOp residual;
    int rho = 0;
    CMat product;  // Op(a)Op(b), the scale reference for round-off

    double residual_order(double rel = 1e-11) const { return smoothing_order(residual.matrix, product, rel); }
};

// Product computed on a mode range padded by the cutoff band, then restricted to N.
inline CMat padded_product(const Symbol& a, const Symbol& b, const Quantizer& q) {
    const int N = q.modes();
    const int pad = static_cast<int>(std::ceil(q.cutoff().delta() * jbracket(N))) + 2;
    const Quantizer big(N + pad, q.cutoff());
    const CMat P = big.bw(a).matrix * big.bw(b).matrix;
    return P.block(pad, pad, 2 * N + 1, 2 * N + 1);
}

inline CompositionResult compose(const Symbol& a, const Symbol& b, int rho, const Quantizer& q) {
    Symbol c = compose_symbol(a, b, rho);
    CMat P = padded_product(a, b, q);
    ParaOp r{P - q.bw(c).matrix, a.order() + b.order() - rho, "Op(a)Op(b) - Op(a#b)"};
    return {std::move(c), std::move(r), rho, std::move(P)};
}

inline Symbol commutator_symbol(const Symbol& a, const Symbol& b, int rho) {
    Symbol c = sym::difference(compose_symbol(a, b, rho), compose_symbol(b, a, rho));
    return c.with_order(a.order() + b.order() - 1);
}

}  // namespace paradiff
