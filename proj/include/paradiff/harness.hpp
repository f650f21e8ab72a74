#pragma once

#include <chrono>
#include <fstream>
#include <future>
#include <iomanip>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bnf.hpp"
#include "egorov.hpp"

namespace paradiff {

// ---------------------------------------------------------------------------------------------
// Configuration: flat "key = value" text, '#' starts a comment.

struct RunConfig {
    std::string model = "nls";  // nls, beam, bo
    std::string catalog = "reu_absux2";
    std::vector<double> params = {0.31, -0.17};  // nls: m_1..m_M; beam: mass
    int modes = 64;
    double s = 4.0;
    double r = 0.05;
    double T = 20.0;
    double dt = 0.01;
    std::string integrator = "lawson-rk4";
    unsigned seed = 1;
    std::string state = "coherent";  // coherent, band, random
    int band = 4;
    double decay = 5.0;
    bool bnf = false;
    int n_order = 1;
    int window = 12;
    double escape_factor = 2.0;
    bool stop_on_escape = false;
    int record_every = 1;
    std::vector<double> r_list = {0.2, 0.1, 0.05};
    double T_max = 200.0;
    std::string out;  // output prefix; empty means no files

    static std::vector<double> parse_list(const std::string& v) {
        std::vector<double> out;
        std::stringstream ss(v);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (item.find_first_not_of(" \t") == std::string::npos) continue;
            out.push_back(parse_double(item));
        }
        return out;
    }
    static double parse_double(const std::string& v) {
        size_t pos = 0;
        double d = 0.0;
        try {
            d = std::stod(v, &pos);
        } catch (const std::exception&) {
            throw ValidationError("config: '" + v + "' is not a number");
        }
        if (v.find_first_not_of(" \t", pos) != std::string::npos) throw ValidationError("config: '" + v + "' is not a number");
        return d;
    }
    static int parse_int(const std::string& v) {
        const double d = parse_double(v);
        if (d != std::floor(d) || std::abs(d) > 1e9) throw ValidationError("config: '" + v + "' is not an integer");
        return static_cast<int>(d);
    }
    static bool parse_bool(const std::string& v) {
        if (v == "1" || v == "true" || v == "yes") return true;
        if (v == "0" || v == "false" || v == "no") return false;
        throw ValidationError("config: '" + v + "' is not a boolean");
    }

    void set(const std::string& key, const std::string& v) {
        if (key == "model") model = v;
        else if (key == "catalog") catalog = v;
        else if (key == "params") params = parse_list(v);
        else if (key == "modes") modes = parse_int(v);
        else if (key == "s") s = parse_double(v);
        else if (key == "r") r = parse_double(v);
        else if (key == "T") T = parse_double(v);
        else if (key == "dt") dt = parse_double(v);
        else if (key == "integrator") integrator = v;
        else if (key == "seed") seed = static_cast<unsigned>(parse_int(v));
        else if (key == "state") state = v;
        else if (key == "band") band = parse_int(v);
        else if (key == "decay") decay = parse_double(v);
        else if (key == "bnf") bnf = parse_bool(v);
        else if (key == "n_order") n_order = parse_int(v);
        else if (key == "window") window = parse_int(v);
        else if (key == "escape_factor") escape_factor = parse_double(v);
        else if (key == "stop_on_escape") stop_on_escape = parse_bool(v);
        else if (key == "record_every") record_every = parse_int(v);
        else if (key == "r_list") r_list = parse_list(v);
        else if (key == "T_max") T_max = parse_double(v);
        else if (key == "out") out = v;
        else throw ValidationError("config: unknown key '" + key + "'");
    }

    static RunConfig from_string(const std::string& text) {
        RunConfig c;
        std::stringstream ss(text);
        std::string line;
        int n = 0;
        auto trim = [](std::string x) {
            const auto a = x.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            const auto b = x.find_last_not_of(" \t\r");
            return x.substr(a, b - a + 1);
        };
        while (std::getline(ss, line)) {
            ++n;
            if (const auto h = line.find('#'); h != std::string::npos) line = line.substr(0, h);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw ValidationError("config line " + std::to_string(n) + ": expected key = value");
            c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
        return c;
    }
    static RunConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ValidationError("config: cannot read '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        return from_string(ss.str());
    }

    void validate() const {
        require(model == "nls" || model == "beam" || model == "bo", "config: model must be nls, beam or bo");
        require(modes >= 4 && modes <= 512, "config: modes must lie in [4, 512]");
        require(s >= 0.0, "config: s must be nonnegative");
        require(r > 0.0, "config: r must be positive");
        require(dt > 0.0, "config: dt must be positive");
        require(T >= 0.0 && T_max > 0.0, "config: T must be nonnegative and T_max positive");
        require(integrator == "lawson-rk4", "config: integrator must be lawson-rk4");
        require(state == "coherent" || state == "band" || state == "random", "config: state must be coherent, band or random");
        require(band >= 1 && band <= modes, "config: band must lie in [1, modes]");
        require(n_order >= 1 && n_order <= 2, "config: n_order must be 1 or 2");
        require(window >= 1 && window <= 16, "config: window must lie in [1, 16]");
        require(escape_factor > 1.0, "config: escape_factor must exceed 1");
        require(record_every >= 1, "config: record_every must be positive");
        for (double v : r_list) require(v > 0.0, "config: r_list entries must be positive");
        if (model == "beam") require(params.size() == 1, "config: beam takes one parameter (mass)");
        if (model == "nls") require(!params.empty(), "config: nls needs at least one potential parameter");
        std::vector<CatalogEntry> cat = model == "nls" ? nls_catalog() : model == "beam" ? beam_catalog() : bo_catalog();
        find_entry(cat, catalog, model);
    }

    nlohmann::json to_json() const {
        return {{"model", model}, {"catalog", catalog}, {"params", params}, {"modes", modes}, {"s", s}, {"r", r},
                {"T", T}, {"dt", dt}, {"integrator", integrator}, {"seed", seed}, {"state", state}, {"band", band},
                {"decay", decay}, {"bnf", bnf}, {"n_order", n_order}, {"window", window},
                {"escape_factor", escape_factor}, {"stop_on_escape", stop_on_escape}, {"record_every", record_every},
                {"r_list", r_list}, {"T_max", T_max}};
    }
};

inline ParaSystem make_system(const RunConfig& c) {
    c.validate();
    if (c.model == "nls") return nls_system(c.params, c.catalog, c.modes);
    if (c.model == "beam") return beam_system(c.params[0], c.catalog, c.modes);
    return benjamin_ono_system(c.catalog, c.modes);
}

// Initial state with H^s norm r.
inline FourierField make_state(const RunConfig& c, double r) {
    FourierField f(c.modes);
    if (c.state == "coherent") return coherent_state(c.modes, r, c.decay, c.s);
    std::mt19937 gen(c.seed);
    std::normal_distribution<double> nd;
    const int B = c.state == "band" ? c.band : c.modes;
    for (int n = -B; n <= B; ++n) {
        const double x = nd(gen), y = nd(gen);
        f[n] = cplx(x, y) * (c.state == "random" ? std::pow(jbracket(n), -c.decay) : 1.0);
    }
    if (c.model == "bo") f = 0.5 * (f + conj_field(f));
    return (r / sobolev_norm(f, c.s)) * f;
}

// ---------------------------------------------------------------------------------------------
// du/dt = i Omega u + N(u).

struct Evolution {
    int N = 0;
    std::vector<double> omega;  // index n + N
    FieldFn nonlinear;
    std::function<double(const FourierField&)> energy;
    std::string label;
};

inline Evolution raw_evolution(const ParaSystem& s) {
    Evolution e;
    e.N = s.N;
    for (int n = -s.N; n <= s.N; ++n) e.omega.push_back(s.freq(n));
    e.nonlinear = [s](const FourierField& u) { return s.nonlinear_field(u); };
    if (s.has_hamiltonian()) e.energy = s.hamiltonian;
    else e.energy = [](const FourierField& u) { return std::pow(l2_norm(u), 2); };
    e.label = s.model + ":" + s.catalog_id;
    return e;
}

// Tensor stored as flat arrays for repeated evaluation.
struct FlatTensor {
    int degree = 0;
    std::vector<int> k;
    std::vector<cplx> c;
    std::vector<int> slot;  // per entry and factor: j + N, or -(j + N) - 1 for conj(z_j)

    FlatTensor() = default;
    FlatTensor(const HomTensor& T, int N) : degree(T.degree()) {
        for (const auto& [key, v] : T.entries()) {
            if (std::abs(key.k) > N) continue;
            k.push_back(key.k);
            c.push_back(v);
            for (const auto& s : key.in) slot.push_back(s.sigma > 0 ? s.j + N : -(s.j + N) - 1);
        }
    }
    void add_to(const FourierField& z, FourierField& out) const {
        const int N = z.modes();
        std::vector<cplx> zz(2 * N + 1), zc(2 * N + 1);
        for (int n = -N; n <= N; ++n) {
            zz[n + N] = z(n);
            zc[n + N] = std::conj(z(n));
        }
        const int* sl = slot.data();
        for (size_t e = 0; e < c.size(); ++e) {
            cplx p = c[e];
            for (int i = 0; i < degree; ++i, ++sl) p *= *sl >= 0 ? zz[*sl] : zc[-*sl - 1];
            out[k[e]] += p;
        }
    }
};

// Transformed field: full nonlinearity with the windowed tensors replaced by their normal form.
inline Evolution bnf_evolution(const BnfResult& b) {
    Evolution e = raw_evolution(b.system);
    auto corr = std::make_shared<std::vector<FlatTensor>>();
    std::set<int> degrees;
    for (const auto& [p, X] : b.raw) degrees.insert(p);
    for (const auto& [p, Y] : b.normal) degrees.insert(p);
    for (int p : degrees) {
        HomTensor D(p);
        if (auto it = b.normal.find(p); it != b.normal.end()) D += it->second;
        if (auto it = b.raw.find(p); it != b.raw.end()) D += it->second.scaled(-1.0);
        D.prune(0.0);
        corr->emplace_back(D, b.system.N);
    }
    const ParaSystem sys = b.system;
    e.nonlinear = [sys, corr](const FourierField& z) {
        FourierField f = sys.nonlinear_field(z);
        for (const auto& T : *corr) T.add_to(f.modes() == z.modes() ? z : z.resized(f.modes()), f);
        return f;
    };
    e.energy = [](const FourierField& u) { return std::pow(l2_norm(u), 2); };
    e.label += ":bnf" + std::to_string(b.n_order);
    return e;
}

struct RunReport {
    nlohmann::json config;
    double s = 0.0;
    std::vector<double> t;
    std::vector<double> norm;
    std::vector<double> energy;
    std::vector<long long> step;
    double initial_norm = 0.0;
    double escape_time = -1.0;  // first t with norm > factor * initial; -1 = none
    bool blew_up = false;
    double last_valid_time = 0.0;
    double max_energy_drift = 0.0;  // max |E(t) - E(0)| / |E(0)|
    double final_energy_drift = 0.0;
    double max_norm_ratio = 0.0;
    double wall_seconds = 0.0;      // not part of the serialized report
    FourierField final_state;

    bool escaped() const { return escape_time >= 0.0; }

    std::string csv() const {
        std::ostringstream os;
        os << "t,h_s_norm,energy,step_count\n";
        os << std::setprecision(17);
        for (size_t k = 0; k < t.size(); ++k) os << t[k] << ',' << norm[k] << ',' << energy[k] << ',' << step[k] << '\n';
        return os.str();
    }
    nlohmann::json to_json() const {
        nlohmann::json j;
        j["schema"] = 1;
        j["config"] = config;
        j["s"] = s;
        j["initial_norm"] = initial_norm;
        j["escape_time"] = escaped() ? nlohmann::json(escape_time) : nlohmann::json(nullptr);
        j["blew_up"] = blew_up;
        j["last_valid_time"] = last_valid_time;
        j["energy_drift"] = {{"max_relative", max_energy_drift}, {"final_relative", final_energy_drift}};
        j["max_norm_ratio"] = max_norm_ratio;
        j["series"] = {{"t", t}, {"h_s_norm", norm}, {"energy", energy}, {"step_count", step}};
        return j;
    }
};

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot write '" + path + "'");
    f << text;
    if (!f) throw ValidationError("cannot write '" + path + "'");
}

// Writes <prefix>.csv and <prefix>.json.
inline void export_report(const RunReport& r, const std::string& prefix) {
    write_text(prefix + ".csv", r.csv());
    write_text(prefix + ".json", r.to_json().dump(2) + "\n");
}

struct SimulateOptions {
    double s = 4.0;
    double escape_factor = 2.0;
    bool stop_on_escape = false;
    int record_every = 1;
    double blowup_factor = 1e6;
};

// Lawson RK4 on v = exp(-i Omega t) u: the linear part is integrated exactly.
inline RunReport simulate(const Evolution& ev, const FourierField& u0, double T, double dt, const SimulateOptions& o = {}) {
    require(dt > 0.0 && T >= 0.0, "simulate: dt must be positive and T nonnegative");
    const auto t0 = std::chrono::steady_clock::now();
    const int N = ev.N;
    const long long steps = T > 0.0 ? static_cast<long long>(std::ceil(T / dt - 1e-12)) : 0;
    const double h = steps > 0 ? T / steps : 0.0;
    CVec Eh(2 * N + 1), Eh2(2 * N + 1);
    for (int n = 0; n <= 2 * N; ++n) {
        Eh[n] = std::polar(1.0, ev.omega[n] * h);
        Eh2[n] = std::polar(1.0, 0.5 * ev.omega[n] * h);
    }
    auto mul = [](const CVec& e, const FourierField& f) { return FourierField(f.modes(), e.cwiseProduct(f.coeffs())); };
    RunReport r;
    r.s = o.s;
    FourierField u = u0.resized(N);
    r.initial_norm = sobolev_norm(u, o.s);
    const double E0 = ev.energy ? ev.energy(u) : 0.0;
    auto record = [&](double t, long long k) {
        r.t.push_back(t);
        const double nn = sobolev_norm(u, o.s);
        r.norm.push_back(nn);
        const double E = ev.energy ? ev.energy(u) : 0.0;
        r.energy.push_back(E);
        r.step.push_back(k);
        if (E0 != 0.0) r.max_energy_drift = std::max(r.max_energy_drift, std::abs(E - E0) / std::abs(E0));
        if (r.initial_norm > 0.0) r.max_norm_ratio = std::max(r.max_norm_ratio, nn / r.initial_norm);
    };
    record(0.0, 0);
    for (long long k = 1; k <= steps; ++k) {
        const FourierField k1 = ev.nonlinear(u);
        const FourierField eu2 = mul(Eh2, u);
        const FourierField k2 = ev.nonlinear(eu2 + (0.5 * h) * mul(Eh2, k1));
        const FourierField k3 = ev.nonlinear(eu2 + (0.5 * h) * k2);
        const FourierField k4 = ev.nonlinear(mul(Eh, u) + h * mul(Eh2, k3));
        FourierField next = mul(Eh, u) + (h / 6.0) * (mul(Eh, k1) + 2.0 * mul(Eh2, k2 + k3) + k4);
        const double t = k * h;
        const double nn = sobolev_norm(next, o.s);
        if (!std::isfinite(nn) || (r.initial_norm > 0.0 && nn > o.blowup_factor * r.initial_norm)) {
            r.blew_up = true;
            break;
        }
        u = std::move(next);
        r.last_valid_time = t;
        const bool esc = r.initial_norm > 0.0 && nn > o.escape_factor * r.initial_norm;
        if (esc && !r.escaped()) r.escape_time = t;
        if (k % o.record_every == 0 || k == steps || (esc && o.stop_on_escape)) record(t, k);
        if (esc && o.stop_on_escape) break;
    }
    if (E0 != 0.0 && !r.energy.empty()) r.final_energy_drift = std::abs(r.energy.back() - E0) / std::abs(E0);
    r.final_state = u;
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

inline RunReport simulate(const Evolution& ev, const RunConfig& c) {
    SimulateOptions o{c.s, c.escape_factor, c.stop_on_escape, c.record_every};
    RunReport r = simulate(ev, make_state(c, c.r), c.T, c.dt, o);
    r.config = c.to_json();
    return r;
}

// Empirical order from runs at dt, dt/2, dt/4 (final-state differences).
inline double integrator_order(const Evolution& ev, const FourierField& u0, double T, double dt) {
    SimulateOptions o;
    o.record_every = 1 << 30;
    const FourierField a = simulate(ev, u0, T, dt, o).final_state;
    const FourierField b = simulate(ev, u0, T, dt / 2, o).final_state;
    const FourierField c = simulate(ev, u0, T, dt / 4, o).final_state;
    return std::log2(l2_norm(a - b) / l2_norm(b - c));
}

// ---------------------------------------------------------------------------------------------
// Amplitude scans.

struct ScanEntry {
    double r = 0.0;
    double escape_time = 0.0;  // capped at T_max
    bool escaped = false;
    double max_norm_ratio = 0.0;
    double wall_seconds = 0.0;
};

struct ScanReport {
    std::string label;
    double T_max = 0.0;
    double s = 0.0;
    std::vector<ScanEntry> entries;  // in r_list order
    double slope = 0.0;              // log-log slope of escape time against r

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["schema"] = 1;
        j["label"] = label;
        j["T_max"] = T_max;
        j["s"] = s;
        j["slope"] = slope;
        for (const auto& e : entries)
            j["entries"].push_back({{"r", e.r}, {"escape_time", e.escape_time}, {"escaped", e.escaped},
                                    {"max_norm_ratio", e.max_norm_ratio}});
        return j;
    }
    std::string csv() const {
        std::ostringstream os;
        os << "r,escape_time,escaped,max_norm_ratio\n" << std::setprecision(17);
        for (const auto& e : entries) os << e.r << ',' << e.escape_time << ',' << (e.escaped ? 1 : 0) << ',' << e.max_norm_ratio << '\n';
        return os.str();
    }
};

// Escape time per r (runs stop at the first escape). The r values run concurrently; the result
// does not depend on scheduling.
inline ScanReport amplitude_scan(const Evolution& ev, const RunConfig& c, const std::vector<double>& r_list,
                                 double T_max, bool parallel = true) {
    require(r_list.size() >= 3, "amplitude_scan: needs at least 3 amplitudes");
    require(T_max > 0.0, "amplitude_scan: T_max must be positive");
    for (size_t i = 1; i < r_list.size(); ++i) require(r_list[i] < r_list[i - 1], "amplitude_scan: r_list must be descending");
    auto run = [&](double r) {
        SimulateOptions o{c.s, c.escape_factor, true, 1 << 30};
        const RunReport rep = simulate(ev, make_state(c, r), T_max, c.dt, o);
        return ScanEntry{r, rep.escaped() ? rep.escape_time : T_max, rep.escaped(), rep.max_norm_ratio, rep.wall_seconds};
    };
    ScanReport s;
    s.label = ev.label;
    s.T_max = T_max;
    s.s = c.s;
    if (parallel) {
        std::vector<std::future<ScanEntry>> fut;
        for (double r : r_list) fut.push_back(std::async(std::launch::async, run, r));
        for (auto& f : fut) s.entries.push_back(f.get());
    } else {
        for (double r : r_list) s.entries.push_back(run(r));
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(s.entries.size());
    for (const auto& e : s.entries) {
        const double lx = std::log(e.r), ly = std::log(e.escape_time);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    s.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return s;
}

// ---------------------------------------------------------------------------------------------
// Energy estimate: smallest C with |w(t)|^2 - |w(0)|^2 <= C int_0^t |w|^p over the recorded times.

struct EnergyFit {
    double C = 0.0;
    int exponent = 0;
    double t_at_max = 0.0;
};

inline EnergyFit fit_energy_constant(const RunReport& r, int exponent, double t_min = 0.0) {
    EnergyFit f;
    f.exponent = exponent;
    double integral = 0.0;
    const double n0 = r.norm.empty() ? 0.0 : r.norm.front() * r.norm.front();
    for (size_t k = 1; k < r.t.size(); ++k) {
        integral += 0.5 * (r.t[k] - r.t[k - 1]) * (std::pow(r.norm[k], exponent) + std::pow(r.norm[k - 1], exponent));
        if (r.t[k] < t_min || integral <= 0.0) continue;
        const double ratio = (r.norm[k] * r.norm[k] - n0) / integral;
        if (ratio > f.C) {
            f.C = ratio;
            f.t_at_max = r.t[k];
        }
    }
    return f;
}

}  // namespace paradiff
