#pragma once

#include <map>

#include "frequencies.hpp"
#include "torus.hpp"

namespace paradiff {

// Monomial key: output mode k and the sorted factors z^{sigma}_{n}
// (z^+_n = u_n, z^-_n = conj(u_n)); momentum sum sigma_i n_i = k.
struct TensorKey {
    int k = 0;
    std::vector<SignedIndex> in;
    bool operator<(const TensorKey& o) const { return k != o.k ? k < o.k : in < o.in; }
    bool operator==(const TensorKey& o) const { return k == o.k && in == o.in; }

    // The full tuple (sigma_1 n_1, ..., sigma_p n_p, - k) used by the resonance and divisor tests.
    std::vector<SignedIndex> full_tuple() const {
        std::vector<SignedIndex> t = in;
        t.push_back({-1, k});
        return t;
    }
};

// Homogeneous polynomial vector field of degree p on the u-component:
// X(z)_k = sum c(k; sigma, n) prod_i z^{sigma_i}_{n_i}.
class HomTensor {
public:
    HomTensor() = default;
    explicit HomTensor(int degree) : degree_(degree) {}

    int degree() const { return degree_; }
    size_t size() const { return c_.size(); }
    bool empty() const { return c_.empty(); }
    const std::map<TensorKey, cplx>& entries() const { return c_; }

    void add(TensorKey key, cplx v) {
        require(static_cast<int>(key.in.size()) == degree_, "HomTensor: key degree mismatch");
        int mom = 0;
        for (const auto& s : key.in) mom += s.sigma * s.j;
        require(mom == key.k, "HomTensor: momentum constraint violated");
        std::sort(key.in.begin(), key.in.end());
        c_[key] += v;
    }
    void set(const TensorKey& key, cplx v) {
        auto k2 = key;
        std::sort(k2.in.begin(), k2.in.end());
        c_[k2] = v;
    }
    cplx at(TensorKey key) const {
        std::sort(key.in.begin(), key.in.end());
        auto it = c_.find(key);
        return it == c_.end() ? cplx{} : it->second;
    }
    void prune(double tol = 0.0) {
        for (auto it = c_.begin(); it != c_.end();)
            it = (std::abs(it->second) <= tol) ? c_.erase(it) : std::next(it);
    }
    double max_abs() const {
        double m = 0.0;
        for (const auto& [k, v] : c_) m = std::max(m, std::abs(v));
        return m;
    }
    int max_index() const {
        int m = 0;
        for (const auto& [k, v] : c_) {
            m = std::max(m, std::abs(k.k));
            for (const auto& s : k.in) m = std::max(m, std::abs(s.j));
        }
        return m;
    }

    HomTensor& operator+=(const HomTensor& o) {
        require(o.degree_ == degree_ || o.empty(), "HomTensor: degree mismatch in sum");
        for (const auto& [k, v] : o.c_) c_[k] += v;
        return *this;
    }
    HomTensor scaled(cplx a) const {
        HomTensor r = *this;
        for (auto& [k, v] : r.c_) v *= a;
        return r;
    }

    FourierField eval(const FourierField& z, int Nout) const {
        FourierField out(Nout);
        for (const auto& [key, c] : c_) {
            if (std::abs(key.k) > Nout) continue;
            cplx p = c;
            for (const auto& s : key.in) p *= s.sigma > 0 ? z(s.j) : std::conj(z(s.j));
            out[key.k] += p;
        }
        return out;
    }

    // DX(z)[v]
    FourierField derivative(const FourierField& z, const FourierField& v, int Nout) const {
        FourierField out(Nout);
        const int p = degree_;
        std::vector<cplx> zf(p), vf(p);
        for (const auto& [key, c] : c_) {
            if (std::abs(key.k) > Nout) continue;
            for (int i = 0; i < p; ++i) {
                const auto& s = key.in[i];
                zf[i] = s.sigma > 0 ? z(s.j) : std::conj(z(s.j));
                vf[i] = s.sigma > 0 ? v(s.j) : std::conj(v(s.j));
            }
            cplx acc = 0.0;
            for (int i = 0; i < p; ++i) {
                cplx t = vf[i];
                for (int l = 0; l < p; ++l)
                    if (l != i) t *= zf[l];
                acc += t;
            }
            out[key.k] += c * acc;
        }
        return out;
    }

    // Keeps entries whose indices all satisfy |n| <= W.
    HomTensor windowed(int W) const {
        HomTensor r(degree_);
        for (const auto& [key, c] : c_) {
            bool ok = std::abs(key.k) <= W;
            for (const auto& s : key.in) ok = ok && std::abs(s.j) <= W;
            if (ok) r.c_[key] = c;
        }
        return r;
    }

private:
    int degree_ = 0;
    std::map<TensorKey, cplx> c_;
};

// [A, B](z) = DA(z)[B(z)] - DB(z)[A(z)], truncated to indices |n| <= W.
inline HomTensor bracket(const HomTensor& A, const HomTensor& B, int W) {
    const int deg = A.degree() + B.degree() - 1;
    HomTensor R(deg);
    auto by_output = [](const HomTensor& T) {
        std::map<int, std::vector<std::pair<const TensorKey*, cplx>>> m;
        for (const auto& [k, v] : T.entries()) m[k.k].push_back({&k, v});
        return m;
    };
    // DA[B]: substitute B's output into each factor of A.
    auto substitute = [&](const HomTensor& X, const HomTensor& Y, double sign) {
        const auto Yk = by_output(Y);
        for (const auto& [key, c] : X.entries()) {
            if (std::abs(key.k) > W) continue;
            for (size_t i = 0; i < key.in.size(); ++i) {
                const auto& s = key.in[i];
                auto it = Yk.find(s.sigma > 0 ? s.j : s.j);
                if (it == Yk.end()) continue;
                for (const auto& [yk, yc] : it->second) {
                    TensorKey nk;
                    nk.k = key.k;
                    for (size_t l = 0; l < key.in.size(); ++l)
                        if (l != i) nk.in.push_back(key.in[l]);
                    cplx coef = sign * c;
                    if (s.sigma > 0) {
                        coef *= yc;
                        for (const auto& f : yk->in) nk.in.push_back(f);
                    } else {
                        coef *= std::conj(yc);
                        for (const auto& f : yk->in) nk.in.push_back({-f.sigma, f.j});
                    }
                    bool ok = true;
                    for (const auto& f : nk.in) ok = ok && std::abs(f.j) <= W;
                    if (ok) R.add(std::move(nk), coef);
                }
            }
        }
    };
    substitute(A, B, 1.0);
    substitute(B, A, -1.0);
    return R;
}

}  // namespace paradiff
