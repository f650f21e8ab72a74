#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include <paradiff/checks.hpp>

using namespace paradiff;
using nlohmann::json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct Common {
    std::string config;
    std::optional<int> modes;
    std::optional<double> s, r, T, dt;
    std::optional<unsigned> seed;
    std::optional<std::string> out;

    void attach(CLI::App* app) {
        app->add_option("--config,-c", config, "key = value configuration file");
        app->add_option("--modes", modes, "number of Fourier modes N (|n| <= N)");
        app->add_option("--s", s, "Sobolev index of the monitored norm");
        app->add_option("--r", r, "initial amplitude (H^s norm)");
        app->add_option("--T", T, "time horizon");
        app->add_option("--dt", dt, "time step");
        app->add_option("--seed", seed, "random seed");
        app->add_option("--out", out, "output prefix for .json/.csv files");
    }

    RunConfig load() const {
        RunConfig c = config.empty() ? RunConfig{} : RunConfig::from_file(config);
        if (modes) c.modes = *modes;
        if (s) c.s = *s;
        if (r) c.r = *r;
        if (T) c.T = *T;
        if (dt) c.dt = *dt;
        if (seed) c.seed = *seed;
        if (out) c.out = *out;
        c.validate();
        return c;
    }
};

void emit(const json& j, const RunConfig& c) {
    std::cout << j.dump(2) << "\n";
    if (!c.out.empty()) write_text(c.out + ".json", j.dump(2) + "\n");
}

json step_json(const BnfStep& s) {
    return {{"degree", s.degree}, {"generator_entries", s.generator.size()}, {"min_divisor", s.min_divisor},
            {"backsub_residual", s.backsub_residual}, {"direct_sum_residual", s.direct_sum_residual},
            {"eliminated", s.eliminated}, {"resonant_kept", s.resonant_kept}};
}

json run_summary(const RunReport& r) {
    json j = r.to_json();
    j.erase("series");
    j["samples"] = r.t.size();
    j["final_norm"] = r.norm.empty() ? 0.0 : r.norm.back();
    return j;
}

Evolution evolution_for(const RunConfig& c) {
    const ParaSystem sys = make_system(c);
    if (!c.bnf) return raw_evolution(sys);
    BnfOptions o;
    o.window = c.window;
    return bnf_evolution(bnf_pipeline(sys, c.n_order, o));
}

int cmd_report(const std::string& in) {
    std::ifstream f(in);
    if (!f) throw ValidationError("report: cannot read '" + in + "'");
    json j;
    try {
        j = json::parse(f);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("report: invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("schema") || j["schema"] != 1) throw ValidationError("report: expected \"schema\": 1");
    json out = {{"schema", 1}, {"source", in}};
    if (j.contains("series")) {
        const auto t = j["series"].at("t").get<std::vector<double>>();
        const auto n = j["series"].at("h_s_norm").get<std::vector<double>>();
        out["kind"] = "run";
        out["samples"] = t.size();
        out["t_final"] = t.empty() ? 0.0 : t.back();
        out["initial_norm"] = j.value("initial_norm", 0.0);
        out["max_norm"] = n.empty() ? 0.0 : *std::max_element(n.begin(), n.end());
        out["escape_time"] = j.value("escape_time", json(nullptr));
        out["blew_up"] = j.value("blew_up", false);
        out["energy_drift"] = j.value("energy_drift", json::object());
    } else if (j.contains("raw")) {
        out["kind"] = "scan";
        out["raw_slope"] = j["raw"].at("slope");
        if (j.contains("bnf")) out["bnf_slope"] = j["bnf"].at("slope");
        out["dominates"] = j.value("dominates", json(nullptr));
    } else {
        out["kind"] = "check";
        for (auto it = j.begin(); it != j.end(); ++it)
            if (it.value().is_number() || it.value().is_boolean()) out[it.key()] = it.value();
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"paradiff: para-differential calculus and normal-form experiments"};
    app.require_subcommand(1);

    Common cq, cc, cf, ce, cb, cs, csc;
    double delta = 0.125;
    int n_order = 0, window = 0;
    std::string report_in;

    auto* quant = app.add_subcommand("quantize-check", "multiplier exactness and adjoint checks of Op^BW");
    cq.attach(quant);
    quant->add_option("--delta", delta, "paraproduct cutoff parameter");
    auto* comp = app.add_subcommand("compose-check", "composition residual slopes and Poisson term");
    cc.attach(comp);
    comp->add_option("--delta", delta, "paraproduct cutoff parameter");
    auto* flow = app.add_subcommand("flow", "Picard contraction and round trip of a transport flow");
    cf.attach(flow);
    auto* ego = app.add_subcommand("egorov-demo", "constant-coefficient reduction on the toy model");
    ce.attach(ego);
    auto* bnf = app.add_subcommand("bnf", "Birkhoff normal form steps on the configured system");
    cb.attach(bnf);
    bnf->add_option("--n-order", n_order, "number of steps (1 or 2)");
    bnf->add_option("--window", window, "mode window of the tensors");
    auto* sim = app.add_subcommand("simulate", "time integration with CSV/JSON report");
    cs.attach(sim);
    auto* scan = app.add_subcommand("scan", "escape times over r_list, raw and transformed");
    csc.attach(scan);
    auto* rep = app.add_subcommand("report", "summarize a JSON report");
    rep->add_option("--in", report_in, "report file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (*quant) {
            const RunConfig c = cq.load();
            emit(checks::quantize_check(c.modes, delta).to_json(), c);
        } else if (*comp) {
            const RunConfig c = cc.load();
            emit(checks::compose_check(c.modes, delta).to_json(), c);
        } else if (*flow) {
            const RunConfig c = cf.load();
            emit(checks::flow_check(c.modes, {c.r}).to_json(), c);
        } else if (*ego) {
            const RunConfig c = ce.load();
            const auto d = egorov_demo(c.r, ce.modes ? c.modes : 20);
            checks::MbCheck m;
            m.demo = d;
            json j = m.to_json().at("demo");
            j["schema"] = 1;
            emit(j, c);
        } else if (*bnf) {
            RunConfig c = cb.load();
            if (n_order) c.n_order = n_order;
            if (window) c.window = window;
            c.validate();
            BnfOptions o;
            o.window = c.window;
            const BnfResult b = bnf_pipeline(make_system(c), c.n_order, o);
            json j = {{"schema", 1}, {"config", c.to_json()}, {"n_order", b.n_order}, {"window", b.window}};
            for (const auto& st : b.transform.steps) j["steps"].push_back(step_json(st));
            for (const auto& nr : b.nonresonance)
                j["nonresonance"].push_back({{"p", nr.p}, {"j_max", nr.j_max}, {"min_divisor", nr.min_divisor},
                                             {"checked", nr.checked}, {"resonant", nr.resonant_count},
                                             {"violations", nr.violating_tuples.size()}});
            for (const auto& [p, Y] : b.normal) j["normal_entries"][std::to_string(p)] = Y.size();
            emit(j, c);
            if (!c.out.empty()) {
                json t = {{"schema", 1}, {"generators", json::array()}, {"normal", json::array()}};
                for (const auto& st : b.transform.steps)
                    for (auto& e : checks::tensor_json(st.generator, b.system.freq)) t["generators"].push_back(e);
                for (const auto& [p, Y] : b.normal)
                    for (auto& e : checks::tensor_json(Y, b.system.freq)) t["normal"].push_back(e);
                write_text(c.out + "_tensors.json", t.dump(1) + "\n");
            }
        } else if (*sim) {
            const RunConfig c = cs.load();
            const RunReport r = simulate(evolution_for(c), c);
            if (!c.out.empty()) export_report(r, c.out);
            std::cout << run_summary(r).dump(2) << "\n";
            std::cerr << "wall time " << r.wall_seconds << " s\n";
            if (r.blew_up) {
                std::cerr << "blow-up after t = " << r.last_valid_time << "\n";
                return kExitNumerical;
            }
        } else if (*scan) {
            const RunConfig c = csc.load();
            RunConfig raw_cfg = c;
            raw_cfg.bnf = false;
            const ScanReport raw = amplitude_scan(evolution_for(raw_cfg), c, c.r_list, c.T_max);
            json j = {{"schema", 1}, {"config", c.to_json()}, {"raw", raw.to_json()}};
            if (c.bnf) {
                const ScanReport tr = amplitude_scan(evolution_for(c), c, c.r_list, c.T_max);
                bool dom = true;
                for (size_t k = 0; k < raw.entries.size(); ++k) dom = dom && tr.entries[k].escape_time >= raw.entries[k].escape_time;
                j["bnf"] = tr.to_json();
                j["dominates"] = dom;
                if (!c.out.empty()) write_text(c.out + "_bnf.csv", tr.csv());
            }
            if (!c.out.empty()) write_text(c.out + ".csv", raw.csv());
            emit(j, c);
        } else if (*rep) {
            return cmd_report(report_in);
        }
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const json::exception& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    }
    return 0;
}
