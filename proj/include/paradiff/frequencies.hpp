#pragma once

#include <algorithm>
#include <atomic>
#include <map>
#include <string>
#include <thread>

#include "core.hpp"

namespace paradiff {

// Linear frequencies omega_j (dz_j/dt = i omega_j z_j for the linear flow).
struct FrequencySpec {
    std::string family = "custom";  // nls, beam, custom
    std::vector<double> params;
    std::function<double(int)> fn;
    int N = 0;
    std::vector<double> table;  // omega_j for |j| <= N at index j + N
    std::map<int, double> divisor_floor;  // estimated floor per order p, filled on demand

    double omega(int j) const { return (j >= -N && j <= N) ? table[j + N] : fn(j); }
    double operator()(int j) const { return omega(j); }

    bool is_even(double tol = 0.0) const {
        for (int j = 1; j <= N; ++j)
            if (std::abs(table[j + N] - table[N - j]) > tol) return false;
        return true;
    }
};

inline FrequencySpec make_frequencies(std::string family, std::vector<double> params, std::function<double(int)> fn, int N) {
    FrequencySpec f{std::move(family), std::move(params), std::move(fn), N, {}, {}};
    f.table.resize(2 * N + 1);
    for (int j = -N; j <= N; ++j) f.table[j + N] = f.fn(j);
    return f;
}

// p(j) = sum_k m_k <j>^{-(2k+1)}
inline double nls_potential(const std::vector<double>& m, double xi) {
    double p = 0.0;
    const double b = std::sqrt(1.0 + xi * xi);
    for (size_t k = 0; k < m.size(); ++k) p += m[k] / std::pow(b, 2.0 * (k + 1) + 1.0);
    return p;
}

inline FrequencySpec nls_frequencies(const std::vector<double>& m, int N) {
    for (double v : m) require(v >= -0.5 && v <= 0.5, "nls_frequencies: parameters must lie in [-1/2, 1/2]");
    return make_frequencies("nls", m, [m](int j) { return double(j) * j + nls_potential(m, j); }, N);
}

inline FrequencySpec beam_frequencies(double mass, int N) {
    return make_frequencies("beam", {mass}, [mass](int j) { return std::sqrt(std::pow(double(j), 4) + mass); }, N);
}

inline FrequencySpec custom_frequencies(std::function<double(int)> fn, int N) {
    return make_frequencies("custom", {}, std::move(fn), N);
}

// (sigma, j) with sigma = +1 or -1.
struct SignedIndex {
    int sigma;
    int j;
    bool operator<(const SignedIndex& o) const { return sigma != o.sigma ? sigma < o.sigma : j < o.j; }
    bool operator==(const SignedIndex& o) const { return sigma == o.sigma && j == o.j; }
};

inline double divisor(const FrequencySpec& w, const std::vector<SignedIndex>& t) {
    double d = 0.0;
    for (const auto& s : t) d += s.sigma * w.omega(s.j);
    return d;
}

// S_p: p even and the tuple splits into pairs of opposite signs with equal |j|.
inline bool is_resonant(const std::vector<SignedIndex>& t) {
    if (t.size() % 2 != 0) return false;
    std::vector<int> plus, minus;
    for (const auto& s : t) (s.sigma > 0 ? plus : minus).push_back(std::abs(s.j));
    if (plus.size() != minus.size()) return false;
    std::sort(plus.begin(), plus.end());
    std::sort(minus.begin(), minus.end());
    return plus == minus;
}

struct NonresonanceReport {
    int p = 0;
    int j_max = 0;
    bool momentum = true;
    double min_divisor = std::numeric_limits<double>::infinity();
    std::vector<SignedIndex> argmin;
    long long checked = 0;
    long long resonant_count = 0;
    std::vector<std::vector<SignedIndex>> violating_tuples;  // non-resonant tuples below the floor
};

// Calls fn(tuple, divisor) for every sign/index multiset of length p with |j| <= J_max, in
// lexicographic order; with momentum = true only tuples with sum sigma_i j_i = 0.
inline void enumerate_tuples(const FrequencySpec& w, int p, int J_max, bool momentum,
                             const std::function<void(const std::vector<SignedIndex>&, double)>& fn) {
    require(p >= 1 && p <= 6 && J_max >= 0 && J_max <= 40, "enumerate_tuples: p or J_max out of range");
    const int K = 2 * (2 * J_max + 1);
    std::vector<SignedIndex> t(p);
    std::function<void(int, int)> rec = [&](int pos, int start) {
        if (pos == p) {
            int mom = 0;
            for (const auto& s : t) mom += s.sigma * s.j;
            if (!momentum || mom == 0) fn(t, divisor(w, t));
            return;
        }
        for (int a = start; a < K; ++a) {
            t[pos] = {a < 2 * J_max + 1 ? 1 : -1, a % (2 * J_max + 1) - J_max};
            rec(pos + 1, a);
        }
    };
    rec(0, 0);
}

// Brute force over sign/index multisets with |j_i| <= J_max. With momentum = true only tuples with
// sum sigma_i j_i = 0 are enumerated (the ones that occur as homological denominators).
inline NonresonanceReport check_nonresonance(const FrequencySpec& w, int p, int J_max, double floor = 1e-8,
                                             bool momentum = true, int threads = 0) {
    require(p >= 1 && p <= 6, "check_nonresonance: p must lie in [1, 6]");
    require(J_max >= 0 && J_max <= 40, "check_nonresonance: J_max must lie in [0, 40]");
    const int K = 2 * (2 * J_max + 1);
    auto decode = [J_max](int a) { return SignedIndex{a < 2 * J_max + 1 ? 1 : -1, a % (2 * J_max + 1) - J_max}; };
    std::vector<double> om(K);
    for (int a = 0; a < K; ++a) {
        const auto s = decode(a);
        om[a] = s.sigma * w.omega(s.j);
    }
    if (threads <= 0) threads = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
    std::vector<NonresonanceReport> part(threads);
    auto work = [&](int tid) {
        NonresonanceReport& r = part[tid];
        std::vector<int> idx(p);
        std::vector<SignedIndex> t(p);
        // first index partitioned across threads, the rest non-decreasing
        for (int first = tid; first < K; first += threads) {
            idx[0] = first;
            std::function<void(int, int)> rec = [&](int pos, int start) {
                if (pos == p) {
                    int mom = 0;
                    double d = 0.0;
                    for (int i = 0; i < p; ++i) {
                        t[i] = decode(idx[i]);
                        mom += t[i].sigma * t[i].j;
                        d += om[idx[i]];
                    }
                    if (momentum && mom != 0) return;
                    if (is_resonant(t)) {
                        ++r.resonant_count;
                        return;
                    }
                    ++r.checked;
                    const double ad = std::abs(d);
                    if (ad < r.min_divisor) {
                        r.min_divisor = ad;
                        r.argmin = t;
                    }
                    if (ad < floor && r.violating_tuples.size() < 64) r.violating_tuples.push_back(t);
                    return;
                }
                for (int a = start; a < K; ++a) {
                    idx[pos] = a;
                    rec(pos + 1, a);
                }
            };
            rec(1, first);
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
    NonresonanceReport out;
    out.p = p;
    out.j_max = J_max;
    out.momentum = momentum;
    for (const auto& r : part) {
        out.checked += r.checked;
        out.resonant_count += r.resonant_count;
        if (r.min_divisor < out.min_divisor || (r.min_divisor == out.min_divisor && r.argmin < out.argmin)) {
            out.min_divisor = r.min_divisor;
            out.argmin = r.argmin;
        }
        for (const auto& v : r.violating_tuples)
            if (out.violating_tuples.size() < 64) out.violating_tuples.push_back(v);
    }
    return out;
}

}  // namespace paradiff
