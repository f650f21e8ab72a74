#pragma once

#include <fstream>
#include <iomanip>

#include "symbol.hpp"

namespace paradiff {

// Dense matrix acting on coefficient vectors (index n + N).
struct ParaOp {
    CMat matrix;
    double order = 0.0;
    std::string note;

    int modes() const { return static_cast<int>((matrix.rows() - 1) / 2); }

    FourierField apply(const FourierField& u) const {
        return FourierField(modes(), matrix * u.resized(modes()).coeffs());
    }

    // Row-major dump: row, col, re, im (nonzero entries).
    void dump_csv(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw ValidationError("dump_csv: cannot write " + path);
        os << "row,col,re,im\n" << std::setprecision(17);
        for (int k = 0; k < matrix.rows(); ++k)
            for (int j = 0; j < matrix.cols(); ++j)
                if (matrix(k, j) != cplx{})
                    os << k - modes() << ',' << j - modes() << ',' << matrix(k, j).real() << ','
                       << matrix(k, j).imag() << '\n';
    }
};

inline ParaOp adjoint(const ParaOp& op) { return {op.matrix.adjoint(), op.order, "adjoint of " + op.note}; }

struct BlockParaOp {
    ParaOp a, b, c, d;  // [[a, b], [c, d]]

    int modes() const { return a.modes(); }

    CMat full() const {
        const auto n = a.matrix.rows();
        CMat m(2 * n, 2 * n);
        m << a.matrix, b.matrix, c.matrix, d.matrix;
        return m;
    }

    RealPair apply(const RealPair& U) const {
        const int N = modes();
        const CVec u = U.first.resized(N).coeffs(), v = U.second.resized(N).coeffs();
        return {FourierField(N, a.matrix * u + b.matrix * v), FourierField(N, c.matrix * u + d.matrix * v)};
    }
};

// Precomputed cutoff weights for a fixed mode range.
class Quantizer {
public:
    Quantizer(int N, CutoffFn chi = CutoffFn(0.25)) : N_(N), chi_(std::move(chi)) {
        require(N >= 1, "Quantizer: N_modes must be positive");
        const int n = 2 * N + 1;
        weyl_.resize(n, n);
        stdw_.resize(n, n);
        for (int k = -N; k <= N; ++k)
            for (int j = -N; j <= N; ++j) {
                weyl_(k + N, j + N) = chi_(k - j, 0.5 * (k + j));
                stdw_(k + N, j + N) = chi_(k - j, j);
            }
    }

    int modes() const { return N_; }
    const CutoffFn& cutoff() const { return chi_; }
    double weyl_weight(int k, int j) const { return weyl_(k + N_, j + N_); }

    // Entry (k,j) = chi(k-j, (k+j)/2) a^(k-j, (k+j)/2) / sqrt(2 pi).
    ParaOp bw(const Symbol& a) const {
        require(a.valid() && std::isfinite(a.order()), "op_bw: symbol order metadata missing");
        const int N = N_, n = 2 * N + 1;
        CMat m = CMat::Zero(n, n);
        if (a.x_independent) {
            for (int j = -N; j <= N; ++j) m(j + N, j + N) = a.slice(j)(0) / kSqrt2Pi;
            return {m, a.order(), "Op^BW"};
        }
        for (int h = -2 * N; h <= 2 * N; ++h) {
            const int kmin = std::max(-N, h - N), kmax = std::min(N, h + N);
            bool needed = false;
            for (int k = kmin; k <= kmax && !needed; ++k) needed = weyl_(k + N, h - k + N) > 0.0;
            if (!needed) continue;
            const FourierField s = a.slice(0.5 * h);
            for (int k = kmin; k <= kmax; ++k) {
                const int j = h - k;
                const double w = weyl_(k + N, j + N);
                if (w > 0.0) m(k + N, j + N) = w * s(k - j) / kSqrt2Pi;
            }
        }
        return {m, a.order(), "Op^BW"};
    }

    // Entry (k,j) = chi(k-j, j) a^(k-j, j) / sqrt(2 pi).
    ParaOp standard(const Symbol& a) const {
        require(a.valid() && std::isfinite(a.order()), "op_standard: symbol order metadata missing");
        const int N = N_, n = 2 * N + 1;
        CMat m = CMat::Zero(n, n);
        for (int j = -N; j <= N; ++j) {
            const FourierField s = a.slice(j);
            for (int k = -N; k <= N; ++k) {
                const double w = stdw_(k + N, j + N);
                if (w > 0.0) m(k + N, j + N) = w * s(k - j) / kSqrt2Pi;
            }
        }
        return {m, a.order(), "Op^std"};
    }

    BlockParaOp block_bw(const MatrixSymbol& A) const {
        return {bw(A.a), bw(A.b), bw(A.lower_left()), bw(A.lower_right())};
    }

    // Op^BW(a) u without storing the matrix.
    FourierField apply_bw(const Symbol& a, const FourierField& u) const { return bw(a).apply(u); }

private:
    int N_;
    CutoffFn chi_;
    Eigen::MatrixXd weyl_, stdw_;
};

inline ParaOp op_bw(const Symbol& a, const CutoffFn& chi, int N) { return Quantizer(N, chi).bw(a); }
inline ParaOp op_standard(const Symbol& a, const CutoffFn& chi, int N) { return Quantizer(N, chi).standard(a); }
inline BlockParaOp block_op_bw(const MatrixSymbol& A, const CutoffFn& chi, int N) {
    return Quantizer(N, chi).block_bw(A);
}

// sup_j ||A e_j||_{H^{s-m}} / ||e_j||_{H^s}
inline double action_bound(const ParaOp& op, double s) {
    const int N = op.modes();
    double best = 0.0;
    for (int j = -N; j <= N; ++j) {
        double num = 0.0;
        for (int k = -N; k <= N; ++k)
            num += std::pow(jbracket(k), 2.0 * (s - op.order)) * std::norm(op.matrix(k + N, j + N));
        best = std::max(best, std::sqrt(num) / std::pow(jbracket(j), s));
    }
    return best;
}

inline double op_norm(const CMat& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<CMat> svd(m);
    return svd.singularValues()(0);
}

}  // namespace paradiff
