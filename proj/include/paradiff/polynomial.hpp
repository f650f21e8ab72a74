#pragma once

#include <map>
#include <memory>
#include <mutex>

#include "tensor.hpp"

namespace paradiff {

// Polynomial in V complex variables with complex coefficients. Derivatives are taken
// treating every variable as independent (for conjugate pairs this is the Wirtinger
// derivative with the convention d/dz = (d/dRe - i d/dIm)/2).
class Poly {
public:
    using Exps = std::vector<int>;

    Poly() = default;
    explicit Poly(int nvars) : n_(nvars) {}

    static Poly constant(int nvars, cplx c) {
        Poly p(nvars);
        if (c != 0.0) p.t_[Exps(nvars, 0)] = c;
        return p;
    }
    static Poly var(int nvars, int i, cplx c = 1.0) {
        Poly p(nvars);
        Exps e(nvars, 0);
        e.at(i) = 1;
        p.t_[e] = c;
        return p;
    }
    static Poly monomial(cplx c, Exps e) {
        Poly p(static_cast<int>(e.size()));
        p.t_[std::move(e)] = c;
        return p;
    }

    int nvars() const { return n_; }
    const std::map<Exps, cplx>& terms() const { return t_; }
    bool is_zero() const { return t_.empty(); }

    int min_degree() const {
        int d = std::numeric_limits<int>::max();
        for (const auto& [e, c] : t_) d = std::min(d, total(e));
        return t_.empty() ? 0 : d;
    }
    int max_degree() const {
        int d = 0;
        for (const auto& [e, c] : t_) d = std::max(d, total(e));
        return d;
    }

    Poly& operator+=(const Poly& o) {
        if (n_ == 0) n_ = o.n_;
        require(o.n_ == n_ || o.t_.empty(), "Poly: variable count mismatch");
        for (const auto& [e, c] : o.t_) add_term(e, c);
        return *this;
    }
    friend Poly operator+(Poly a, const Poly& b) { return a += b; }
    friend Poly operator-(Poly a, const Poly& b) { return a += b * cplx(-1.0); }
    friend Poly operator*(const Poly& a, cplx s) {
        Poly r(a.n_);
        if (s == 0.0) return r;
        for (const auto& [e, c] : a.t_) r.t_[e] = c * s;
        return r;
    }
    friend Poly operator*(cplx s, const Poly& a) { return a * s; }
    friend Poly operator*(const Poly& a, const Poly& b) {
        require(a.n_ == b.n_, "Poly: variable count mismatch");
        Poly r(a.n_);
        for (const auto& [ea, ca] : a.t_)
            for (const auto& [eb, cb] : b.t_) {
                Exps e(a.n_);
                for (int i = 0; i < a.n_; ++i) e[i] = ea[i] + eb[i];
                r.add_term(e, ca * cb);
            }
        return r;
    }

    Poly d(int i) const {
        Poly r(n_);
        for (const auto& [e, c] : t_) {
            if (e[i] == 0) continue;
            Exps f = e;
            --f[i];
            r.add_term(f, c * double(e[i]));
        }
        return r;
    }
    Poly d(int i, int j) const { return d(i).d(j); }

    // Total x-derivative given next_var[i] = index of d/dx of variable i (-1: not representable).
    Poly ddx(const std::vector<int>& next_var) const {
        Poly r(n_);
        for (int i = 0; i < n_; ++i) {
            Poly di = d(i);
            if (di.is_zero()) continue;
            require(next_var.at(i) >= 0, "Poly::ddx: derivative leaves the variable set");
            r += di * var(n_, next_var[i]);
        }
        return r;
    }

    // Homogeneous part of the given degree.
    Poly part(int degree) const {
        Poly r(n_);
        for (const auto& [e, c] : t_)
            if (total(e) == degree) r.t_[e] = c;
        return r;
    }

    cplx eval(const cplx* v) const {
        cplx s = 0.0;
        for (const auto& [e, c] : t_) {
            cplx m = c;
            for (int i = 0; i < n_; ++i)
                for (int k = 0; k < e[i]; ++k) m *= v[i];
            s += m;
        }
        return s;
    }

private:
    static int total(const Exps& e) {
        int s = 0;
        for (int v : e) s += v;
        return s;
    }
    void add_term(const Exps& e, cplx c) {
        auto& slot = t_[e];
        slot += c;
        if (slot == 0.0) t_.erase(e);
    }

    int n_ = 0;
    std::map<Exps, cplx> t_;
};

// Linear map u -> w with w_n = A(n) u_n + B(n) conj(u_{-n}).
struct Channel {
    std::function<cplx(int)> A;
    std::function<cplx(int)> B;
};

inline Channel u_channel(std::function<cplx(int)> A) { return {std::move(A), [](int) { return cplx{}; }}; }
inline Channel ubar_channel(std::function<cplx(int)> B) { return {[](int) { return cplx{}; }, std::move(B)}; }

inline FourierField apply_channel(const Channel& ch, const FourierField& u, int N) {
    FourierField w(N);
    for (int n = -N; n <= N; ++n) {
        const cplx a = ch.A(n), b = ch.B(n);
        cplx v = 0.0;
        if (a != 0.0) v += a * u(n);
        if (b != 0.0) v += b * std::conj(u(-n));
        w[n] = v;
    }
    return w;
}

// Field X(u)_k = out(k) * [P(w_1(u), ..., w_V(u))]_k with linear channels w_i; evaluated
// pseudo-spectrally on a grid that resolves products exactly, or as Taylor tensors.
class PolyField {
public:
    PolyField() = default;
    PolyField(Poly P, std::vector<Channel> ch, std::function<cplx(int)> out)
        : P_(std::move(P)), ch_(std::move(ch)), out_(std::move(out)) {
        require(static_cast<int>(ch_.size()) == P_.nvars(), "PolyField: one channel per variable");
    }

    const Poly& poly() const { return P_; }
    const std::vector<Channel>& channels() const { return ch_; }
    int degree() const { return P_.max_degree(); }

    FourierField eval(const FourierField& u, int Nout) const { return finish(substitute(P_, u, Nout)); }

    FourierField eval_part(const FourierField& u, int degree, int Nout) const {
        return finish(substitute(P_.part(degree), u, Nout));
    }

    // Q(w_1(u), ..., w_V(u)) without the output multiplier, exact up to mode Nout.
    FourierField substitute(const Poly& Q, const FourierField& u, int Nout) const {
        if (Q.is_zero()) return FourierField(Nout);
        require(Q.nvars() == P_.nvars(), "PolyField: variable count mismatch");
        const int V = Q.nvars();
        const int Nin = u.modes();
        const int M = fft_size_at_least(std::max(std::max(Q.max_degree(), 1) * Nin + Nout + 1, 2 * std::max(Nin, Nout) + 1));
        std::vector<std::vector<cplx>> w(V);
        std::vector<bool> used(V, false);
        for (const auto& [e, c] : Q.terms())
            for (int i = 0; i < V; ++i) used[i] = used[i] || e[i] > 0;
        for (int i = 0; i < V; ++i)
            if (used[i]) w[i] = synthesize(apply_table(tables(Nin).ch[i], u), M);
        std::vector<cplx> g(M), vals(V);
        for (int l = 0; l < M; ++l) {
            for (int i = 0; i < V; ++i) vals[i] = used[i] ? w[i][l] : cplx{};
            g[l] = Q.eval(vals.data());
        }
        return analyze(g, Nout);
    }

    // DX(u)[v] (real-linear in v).
    FourierField derivative(const FourierField& u, const FourierField& v, int Nout) const {
        return derivative_split(u, v, Nout, true, true);
    }

    // Derivative through the u-channels (A) and/or the conj-channels (B) only.
    FourierField derivative_split(const FourierField& u, const FourierField& v, int Nout, bool lin, bool anti) const {
        const int V = P_.nvars();
        if (P_.is_zero()) return FourierField(Nout);
        const int Nin = std::max(u.modes(), v.modes());
        const int M = fft_size_at_least(std::max((P_.max_degree() + 1) * Nin + Nout + 1, 2 * std::max(Nin, Nout) + 1));
        std::vector<std::vector<cplx>> wu(V), wv(V);
        for (int i = 0; i < V; ++i) {
            wu[i] = synthesize(apply_channel(ch_[i], u, Nin), M);
            Channel part{lin ? ch_[i].A : [](int) { return cplx{}; }, anti ? ch_[i].B : [](int) { return cplx{}; }};
            wv[i] = synthesize(apply_channel(part, v, Nin), M);
        }
        std::vector<Poly> dP(V);
        for (int i = 0; i < V; ++i) dP[i] = P_.d(i);
        std::vector<cplx> g(M), vals(V);
        for (int l = 0; l < M; ++l) {
            for (int i = 0; i < V; ++i) vals[i] = wu[i][l];
            cplx s = 0.0;
            for (int i = 0; i < V; ++i)
                if (!dP[i].is_zero() && wv[i][l] != 0.0) s += dP[i].eval(vals.data()) * wv[i][l];
            g[l] = s;
        }
        return finish(analyze(g, Nout));
    }

    // Exact degree-p Taylor tensor restricted to |n|, |k| <= W.
    HomTensor tensor(int p, int W) const {
        HomTensor T(p);
        const double norm = std::pow(kTwoPi, 0.5 * (1 - p));
        const Poly Pp = P_.part(p);
        for (const auto& [e, c] : Pp.terms()) {
            std::vector<int> vars;
            for (int i = 0; i < P_.nvars(); ++i)
                for (int k = 0; k < e[i]; ++k) vars.push_back(i);
            std::vector<SignedIndex> f(p);
            std::function<void(int, cplx, int)> rec = [&](int pos, cplx w, int mode) {
                if (w == 0.0) return;
                if (pos == p) {
                    if (std::abs(mode) > W) return;
                    const cplx o = out_(mode);
                    if (o == 0.0) return;
                    T.add(TensorKey{mode, f}, c * w * norm * o);
                    return;
                }
                const Channel& ch = ch_[vars[pos]];
                for (int n = -W; n <= W; ++n) {
                    const cplx a = ch.A(n);
                    if (a != 0.0) {
                        f[pos] = {1, n};
                        rec(pos + 1, w * a, mode + n);
                    }
                    // conj(u_m) enters at physical mode -m with weight B(-m)
                    const cplx b = ch.B(-n);
                    if (b != 0.0) {
                        f[pos] = {-1, n};
                        rec(pos + 1, w * b, mode - n);
                    }
                }
            };
            rec(0, 1.0, 0);
        }
        T.prune(0.0);
        return T;
    }

    const std::function<cplx(int)>& output() const { return out_; }

private:
    FourierField finish(FourierField f) const {
        f.coeffs() = f.coeffs().cwiseProduct(tables(f.modes()).out);
        return f;
    }

    // Channel and output multipliers sampled on |n| <= N, computed once per N.
    struct Tables {
        std::vector<std::pair<CVec, CVec>> ch;
        CVec out;
    };
    struct TableCache {
        std::mutex mu;
        std::map<int, std::shared_ptr<const Tables>> by_N;
    };

    const Tables& tables(int N) const {
        std::lock_guard<std::mutex> lock(cache_->mu);
        auto& slot = cache_->by_N[N];
        if (!slot) {
            auto t = std::make_shared<Tables>();
            t->out = CVec(2 * N + 1);
            for (int n = -N; n <= N; ++n) t->out[n + N] = out_ ? out_(n) : cplx(1.0);
            for (const Channel& c : ch_) {
                CVec A(2 * N + 1), B(2 * N + 1);
                for (int n = -N; n <= N; ++n) {
                    A[n + N] = c.A(n);
                    B[n + N] = c.B(n);
                }
                t->ch.emplace_back(std::move(A), std::move(B));
            }
            slot = std::move(t);
        }
        return *slot;
    }

    static FourierField apply_table(const std::pair<CVec, CVec>& t, const FourierField& u) {
        const int N = u.modes();
        FourierField w(N);
        for (int n = -N; n <= N; ++n) w[n] = t.first[n + N] * u(n) + t.second[n + N] * std::conj(u(-n));
        return w;
    }

    Poly P_;
    std::vector<Channel> ch_;
    std::function<cplx(int)> out_;
    std::shared_ptr<TableCache> cache_ = std::make_shared<TableCache>();
};

}  // namespace paradiff
