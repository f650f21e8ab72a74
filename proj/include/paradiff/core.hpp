#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace paradiff {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline const double kSqrt2Pi = std::sqrt(2.0 * std::numbers::pi);
inline constexpr cplx kI{0.0, 1.0};

// Bad input: CLI maps this to exit code 2.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Divergence, non-contraction, NaN: CLI maps this to exit code 3.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
    std::vector<double> history;
    NumericalError(const std::string& what, std::vector<double> hist)
        : std::runtime_error(what), history(std::move(hist)) {}
};

// <x> = sqrt(1 + x^2)
inline double jbracket(double x) { return std::sqrt(1.0 + x * x); }

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ValidationError(msg);
}

inline double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

inline double factorial(int n) {
    double r = 1.0;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
}

// (i n)^a
inline cplx ipow_n(double n, int a) {
    cplx r = 1.0;
    for (int i = 0; i < a; ++i) r *= cplx(0.0, n);
    return r;
}

// Smallest 2^a 3^b 5^c that is >= n.
inline int fft_size_at_least(int n) {
    int best = 1 << 30;
    for (long p2 = 1; p2 < 2L * n + 2; p2 *= 2)
        for (long p3 = p2; p3 < 2L * n + 2; p3 *= 3)
            for (long p5 = p3; p5 < 2L * n + 2; p5 *= 5)
                if (p5 >= n && p5 < best) best = static_cast<int>(p5);
    return best;
}

}  // namespace paradiff
