#include "hypar/run.hpp"

#include <fftw3.h>

#include <Eigen/Core>
#include <chrono>
#include <cmath>
#include <json.hpp>

#include "hypar/errors.hpp"
#include "hypar/harmonic_balance.hpp"
#include "hypar/io.hpp"
#include "hypar/spectral.hpp"
#include "hypar/sweep.hpp"
#include "hypar/timedomain.hpp"

#ifndef HYPAR_VERSION
#define HYPAR_VERSION "0.0.0"
#endif

namespace hypar {

using json = nlohmann::ordered_json;

std::string_view library_version() noexcept { return HYPAR_VERSION; }

int exit_code_for(const std::exception& e) noexcept {
    if (dynamic_cast<const ConfigError*>(&e)) return exit_config;
    if (dynamic_cast<const DomainError*>(&e)) return exit_domain;
    if (dynamic_cast<const DivergenceError*>(&e)) return exit_divergence;
    if (dynamic_cast<const NoConvergenceError*>(&e)) return exit_no_convergence;
    if (dynamic_cast<const BifurcationProximityError*>(&e)) return exit_no_convergence;
    if (dynamic_cast<const ResolutionError*>(&e)) return exit_analysis;
    if (dynamic_cast<const InsufficientCombError*>(&e)) return exit_analysis;
    return exit_internal;
}

std::string scenario_hash(const Scenario& scenario) {
    Scenario s = scenario;
    s.output.clear();  // where results go does not change them
    return sha256_hex(serialize(s));
}

namespace {

json cplx(std::complex<double> z) { return json::array({z.real(), z.imag()}); }

std::string dump(const json& j) { return j.dump(2) + "\n"; }

class Output {
public:
    Output(std::filesystem::path dir, RunResult& res) : dir_(std::move(dir)), res_(res) {}
    void write(const std::string& name, std::string_view content) {
        write_text(dir_ / name, content);
        res_.files.push_back(name);
    }
    void csv(const std::string& name, const Table& t) { write(name, t.csv()); }
    void json_file(const std::string& name, const json& j) { write(name, dump(j)); }

private:
    std::filesystem::path dir_;
    RunResult& res_;
};

void log(const RunOptions& o, const std::string& msg) {
    if (o.log) o.log(msg);
}

json nyquist_json(const NyquistResult& r) {
    return {{"n", r.n},
            {"encirclements", r.encirclements},
            {"oscillation", r.oscillation},
            {"gain_margin_db", r.gain_margin_db},
            {"phase_margin_deg", r.phase_margin_deg},
            {"has_phase_crossover", r.has_phase_crossover},
            {"has_gain_crossover", r.has_gain_crossover},
            {"peak_loop_gain", r.peak_loop_gain}};
}

Table nyquist_table(const NyquistResult& r) {
    Table t{{"delta", "re", "im", "magnitude"}, {}};
    for (std::size_t i = 0; i < r.loop.size(); ++i) {
        t.rows.push_back({r.delta[i], r.loop[i].real(), r.loop[i].imag(), std::abs(r.loop[i])});
    }
    return t;
}

void run_simulate(const Scenario& s, Output& out, const RunOptions& o) {
    const auto& e = s.simulate;
    const CircuitParams& p = *s.model;
    const DriveSpec& d = *s.drive;
    std::vector<double> times;
    if (e.sample_dt > 0.0) {
        const auto n = static_cast<std::size_t>(std::floor(e.t_end / e.sample_dt + 1e-9));
        for (std::size_t i = 0; i <= n; ++i) times.push_back(e.sample_dt * static_cast<double>(i));
    }
    log(o, "integrating to t = " + format_number(e.t_end));
    const Trajectory tr = integrate(p, d, e.initial, e.t_end, e.rel_tol, e.abs_tol, times);
    out.csv("trajectory.csv", trajectory_table(tr));

    json summary{{"steps", tr.steps},
                 {"stiff_warning", tr.stiff_warning},
                 {"samples", tr.times.size()},
                 {"final_state", {tr.states.back().q_x, tr.states.back().v_x, tr.states.back().q_p}},
                 {"final_energy", energy(tr.states.back(), p).total}};
    if (e.sample_dt > 0.0) {
        std::vector<double> x;
        for (std::size_t i = 0; i < tr.times.size(); ++i) {
            if (tr.times[i] >= e.spectrum_from) {
                x.push_back(observe(e.signal, tr.states[i], d.voltage(tr.times[i]), p));
            }
        }
        if (x.size() >= 16) {
            out.csv("spectrum.csv", spectrum_table(spectrum(x, e.sample_dt, e.window)));
            summary["spectrum_samples"] = x.size();
        } else {
            summary["spectrum_samples"] = 0;
        }
    }
    out.json_file("summary.json", summary);
}

json hb_json(const FourierSolution& s) {
    return {{"omega", s.omega},
            {"amplitude", s.drive.amplitude},
            {"harmonics", s.N},
            {"residual", s.residual},
            {"converged", s.converged},
            {"iterations", s.iterations},
            {"condition", s.condition}};
}

void run_hb(const Scenario& s, Output& out, const RunOptions& o) {
    const auto& e = s.hb;
    const CircuitParams& p = *s.model;
    const Tone tone = s.drive->tones.front();
    if (e.amplitudes.empty()) {
        log(o, "harmonic balance with " + std::to_string(e.harmonics) + " harmonics");
        const auto sol = hb_solve(p, DriveSpec({tone}), e.harmonics, e.tol);
        Table t{{"k", "qx_re", "qx_im", "qx_abs", "qp_re", "qp_im", "qp_abs"}, {}};
        for (int k = 0; k <= sol.N; ++k) {
            const auto a = sol.q_x[k], b = sol.q_p[k];
            t.rows.push_back({double(k), a.real(), a.imag(), std::abs(a), b.real(), b.imag(), std::abs(b)});
        }
        out.csv("harmonics.csv", t);
        json j = hb_json(sol);
        if (e.stability) {
            const auto fm = floquet_multipliers(p, sol);
            json m = json::array();
            for (const auto& z : fm) m.push_back(cplx(z));
            j["floquet_multipliers"] = m;
            const auto nr = circuit_loop(p, sol);
            j["circuit_loop"] = nyquist_json(nr);
            out.csv("nyquist.csv", nyquist_table(nr));
        }
        out.json_file("hb.json", j);
        return;
    }
    log(o, "continuation over " + std::to_string(e.amplitudes.size()) + " amplitudes");
    const auto c = continuation(p, tone, e.amplitudes, e.harmonics, e.tol);
    Table t{{"amplitude", "qx1_abs", "qp1_abs", "qx3_abs", "residual"}, {}};
    if (e.stability) t.header.push_back("max_multiplier");
    for (const auto& sol : c.branch) {
        std::vector<double> row{sol.drive.amplitude, std::abs(sol.q_x[1]), std::abs(sol.q_p[1]),
                                sol.N >= 3 ? std::abs(sol.q_x[3]) : 0.0, sol.residual};
        if (e.stability) row.push_back(std::abs(floquet_multipliers(p, sol).front()));
        t.rows.push_back(std::move(row));
    }
    out.csv("branch.csv", t);
    out.json_file("hb.json", {{"points", c.branch.size()},
                              {"arclength_used", c.arclength_used},
                              {"folds", c.folds}});
}

void run_spectrum(const Scenario& s, Output& out, const RunOptions& o) {
    const auto& e = s.spectrum;
    const CircuitParams& p = *s.model;
    const DriveSpec& d = *s.drive;
    log(o, "settling");
    const SteadySegment seg = settle(p, d, {}, e.settle.max_periods, e.settle.criterion_tol,
                                     e.settle.options);
    out.csv("segment.csv", segment_table(seg));
    const Spectrum spec = spectrum(seg, e.window, e.signal);
    out.csv("spectrum.csv", spectrum_table(spec));
    const auto peaks = find_peaks(spec, e.peak_floor);
    Table pt{{"omega", "power", "bin"}, {}};
    for (const auto& pk : peaks) pt.rows.push_back({pk.omega, pk.power, double(pk.bin)});
    out.csv("peaks.csv", pt);

    std::optional<double> wx = e.omega_x_eff;
    if (e.free_running) {
        log(o, "measuring the free-running frequency");
        wx = free_running_frequency(p);
    }
    double pump = 0.0, strongest = -1.0;
    for (const auto& t : d.tones) {
        if (t.amplitude > strongest) {
            strongest = t.amplitude;
            pump = t.omega;
        }
    }
    json j{{"converged", seg.converged},
           {"quasi_periodic", seg.quasi_periodic},
           {"residual", seg.residual},
           {"periods_run", seg.periods_run},
           {"envelope_omega", seg.envelope_omega},
           {"bin_width", spec.bin_width},
           {"peaks", peaks.size()}};
    if (wx) j["omega_x_eff"] = *wx;
    try {
        const auto c = comb_metrics(peaks, pump, wx, {e.band_lo, e.band_hi});
        json sb = json::object();
        for (const auto& [k, v] : c.sidebands) sb[std::to_string(k)] = v;
        j["comb"] = {{"lines", c.lines()},
                     {"carrier", c.carrier},
                     {"carrier_power", c.carrier_power},
                     {"spacing", c.spacing},
                     {"equidistance_residual", c.equidistance_residual},
                     {"first_sideband_power", c.first_sideband_power()},
                     {"sidebands", sb}};
        if (c.n) {
            j["comb"]["n"] = *c.n;
            j["comb"]["n_residual"] = c.n_residual;
            j["comb"]["n_reliable"] = c.n_reliable;
        }
    } catch (const InsufficientCombError&) {
        j["comb"] = nullptr;
    }
    out.json_file("spectrum.json", j);
}

void run_probe(const Scenario& s, Output& out, const RunOptions& o) {
    const auto& e = s.probe;
    const CircuitParams& p = *s.model;
    Table t{{"omega", "re", "im", "magnitude", "pump_off", "gain_db", "rcond", "near_oscillation"}, {}};
    std::size_t near = 0;
    const auto omegas = e.probe_omega.values();
    log(o, "probe transmission at " + std::to_string(omegas.size()) + " frequencies");
    for (double w : omegas) {
        const auto r = probe_transmission(p, e.pump, {e.probe_amplitude, w, e.probe_phase}, e.N_pump,
                                          e.N_mix, e.signal);
        const double off = std::abs(linear_observe(e.signal, p, w));
        const double on = std::abs(r.ratio);
        const double gain = 20.0 * std::log10(on / off);
        near += r.near_oscillation;
        t.rows.push_back({w, r.ratio.real(), r.ratio.imag(), on, off, gain, r.rcond,
                          r.near_oscillation ? 1.0 : 0.0});
    }
    out.csv("probe.csv", t);
    out.json_file("probe.json", {{"points", omegas.size()}, {"near_oscillation", near}});
}

void run_sweep_kind(const Scenario& s, Output& out, const RunOptions& o) {
    const auto& e = s.sweep;
    const CircuitParams& p = *s.model;
    SweepPlan plan = e.plan;
    if (e.free_running) {
        log(o, "measuring the free-running frequency");
        plan.cell.omega_x_eff = free_running_frequency(p);
    }
    std::size_t last = 0;
    ProgressFn progress;
    if (o.log) {
        progress = [&](std::size_t done, std::size_t total) {
            const std::size_t pct = 100 * done / total;
            if (pct / 10 != last / 10 || done == total) {
                last = pct;
                o.log("sweep " + std::to_string(done) + "/" + std::to_string(total));
            }
        };
    }
    const IntensityMap map = run_sweep(plan, p, o.threads, progress);
    out.csv("intensity_long.csv", intensity_long_table(map));
    out.csv("intensity_dense.csv", intensity_dense_table(map));
    out.write("intensity.dat", intensity_gnuplot(map));
    std::size_t failed = 0, unconverged = 0, quasi = 0;
    for (const auto& c : map.cells) {
        failed += c.failed;
        unconverged += !c.converged;
        quasi += c.quasi_periodic;
    }
    json j{{"metric", std::string(to_string(map.metric))},
           {"provenance", map.provenance},
           {"rows", map.rows()},
           {"cols", map.cols()},
           {"failed", failed},
           {"unconverged", unconverged},
           {"quasi_periodic", quasi}};
    if (plan.cell.omega_x_eff) j["omega_x_eff"] = *plan.cell.omega_x_eff;
    if (map.metric == Metric::transmission) {
        Table t{{"amp", "contrast"}, {}};
        const auto c = contrast_profile(map);
        for (std::size_t r = 0; r < map.rows(); ++r) t.rows.push_back({map.amplitudes[r], c[r]});
        out.csv("contrast.csv", t);
    }
    if (e.threshold_floor) {
        log(o, "locating thresholds");
        const auto rep = find_thresholds(map, plan, p, static_cast<std::size_t>(e.threshold_column),
                                         *e.threshold_floor, e.refine, e.resolution);
        auto th = [](const std::optional<Threshold>& t) -> json {
            if (!t) return nullptr;
            return {{"value", t->value}, {"lo", t->lo}, {"hi", t->hi}, {"refinements", t->refinements}};
        };
        out.json_file("thresholds.json",
                      {{"criterion", rep.criterion},
                       {"frequency", map.frequencies[static_cast<std::size_t>(e.threshold_column)]},
                       {"lower", th(rep.lower)},
                       {"upper", th(rep.upper)}});
    }
    out.json_file("sweep.json", j);
}

void run_slowflow(const Scenario& s, Output& out, const RunOptions& o) {
    const auto& e = s.slowflow;
    const SlowFlowParams sf = s.reduced->params();
    log(o, "integrating the slow flow");
    const auto tr = integrate_slowflow(sf, e.initial, e.t_end, e.dt);
    Table t{{"t", "U", "V"}, {}};
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        t.rows.push_back({tr.times[i], tr.states[i].U, tr.states[i].V});
    }
    out.csv("slowflow.csv", t);

    json fps = json::array();
    for (const auto& r : fixed_points(sf)) {
        fps.push_back({{"U", r.fixed_point.U},
                       {"V", r.fixed_point.V},
                       {"eigenvalues", {cplx(r.eig1), cplx(r.eig2)}},
                       {"classification", std::string(to_string(r.classification))}});
    }
    json j{{"frame",
            {{"omega_R", sf.frame.omega_R},
             {"n", sf.frame.n},
             {"Delta_x", sf.frame.Delta_x},
             {"Delta_p", sf.frame.Delta_p},
             {"scale_ratio", sf.frame.scale_ratio},
             {"scale_warning", sf.frame.scale_warning}}},
           {"fixed_points", fps}};
    if (!e.gain_pumps.empty()) {
        Table g{{"V_0", "delta", "gain"}, {}};
        for (const auto& c : small_signal_gain(sf, e.gain_pumps, e.gain_deltas)) {
            for (std::size_t i = 0; i < c.delta.size(); ++i) g.rows.push_back({c.pump, c.delta[i], c.gain[i]});
        }
        out.csv("gain.csv", g);
    }
    if (e.resonator) {
        const Resonator& res = *e.resonator;
        const int n = sf.frame.n;
        const FrameSpec fr = build_frame(sf.frame.omega_p(), res.omega_x, n);
        std::vector<double> grid(static_cast<std::size_t>(e.loop_points));
        for (int k = 0; k < e.loop_points; ++k) {
            grid[static_cast<std::size_t>(k)] =
                fr.Delta_x + res.gamma_x * e.loop_span * (2.0 * k / (e.loop_points - 1) - 1.0);
        }
        log(o, "Nyquist loop analysis");
        const auto rep = loop_analysis(sf, res, n, grid);
        j["loop"] = nyquist_json(rep.nyquist.front());
        j["loop"]["fixed_point"] = {rep.fixed_point.U, rep.fixed_point.V};
        out.csv("nyquist.csv", nyquist_table(rep.nyquist.front()));
    }
    out.json_file("slowflow.json", j);
}

void run_coexist(const Scenario& s, Output& out, const RunOptions& o) {
    const auto& e = s.coexist;
    log(o, "coexistence scan");
    const auto cells = coexistence_scan(s.reduced->params(), e.resonator, e.orders, e.pumps,
                                        e.omega_p, e.points, e.span, o.threads);
    Table t{{"V_0", "n", "oscillating", "encirclements", "gain_margin_db", "phase_margin_deg",
             "peak_loop_gain"},
            {}};
    json rows = json::array();
    json both = json::array();
    for (const auto& c : cells) {
        for (const auto& m : c.margins) {
            t.rows.push_back({c.V_0, double(m.n), m.oscillation ? 1.0 : 0.0, double(m.encirclements),
                              m.gain_margin_db, m.phase_margin_deg, m.peak_loop_gain});
        }
        rows.push_back({{"V_0", c.V_0}, {"oscillating", c.oscillating}});
        if (c.oscillating.size() >= 2) both.push_back(c.V_0);
    }
    out.csv("coexist.csv", t);
    out.json_file("coexist.json", {{"cells", rows}, {"simultaneous", both}});
}

}  // namespace

RunResult run_scenario(const Scenario& scenario, const RunOptions& opts) {
    RunResult res;
    res.out_dir = opts.out_dir.empty() ? std::filesystem::path(scenario.output) : opts.out_dir;
    if (res.out_dir.empty()) {
        res.exit_code = exit_usage;
        res.message = "no output directory (set 'output' or pass --out)";
        return res;
    }
    try {
        validate(scenario);
    } catch (const ConfigError& e) {
        res.exit_code = exit_config;
        res.message = e.what();
        return res;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Output out(res.out_dir, res);
    try {
        std::filesystem::create_directories(res.out_dir);
        switch (scenario.kind) {
            case ExperimentKind::simulate: run_simulate(scenario, out, opts); break;
            case ExperimentKind::hb: run_hb(scenario, out, opts); break;
            case ExperimentKind::spectrum: run_spectrum(scenario, out, opts); break;
            case ExperimentKind::probe: run_probe(scenario, out, opts); break;
            case ExperimentKind::sweep: run_sweep_kind(scenario, out, opts); break;
            case ExperimentKind::slowflow: run_slowflow(scenario, out, opts); break;
            case ExperimentKind::coexist: run_coexist(scenario, out, opts); break;
        }
    } catch (const std::exception& e) {
        res.exit_code = exit_code_for(e);
        res.message = e.what();
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    try {
        const std::string text = serialize(scenario);
        write_text(res.out_dir / "scenario.yaml", text);
        json files = json::array();
        for (const auto& f : res.files) {
            const std::string data = read_text(res.out_dir / f);
            files.push_back({{"name", f}, {"sha256", sha256_hex(data)}, {"bytes", data.size()}});
        }
        json m{{"hypar_version", std::string(library_version())},
               {"status", res.exit_code == exit_ok ? "complete" : "partial"},
               {"exit_code", res.exit_code},
               {"error", res.message},
               {"kind", std::string(to_string(scenario.kind))},
               {"scenario_sha256", scenario_hash(scenario)},
               {"scenario", text},
               {"files", files},
               {"threads", opts.threads},
               {"wall_time_s", wall},
               {"versions",
                {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                               "." + std::to_string(EIGEN_MINOR_VERSION)},
                 {"fftw", std::string(fftw_version)},
                 {"compiler", __VERSION__}}}};
        write_text(res.out_dir / "manifest.json", dump(m));
    } catch (const std::exception& e) {
        if (res.exit_code == exit_ok) {
            res.exit_code = exit_internal;
            res.message = e.what();
        }
    }
    return res;
}

Scenario scenario_from_manifest(const std::filesystem::path& manifest) {
    json m;
    try {
        m = json::parse(read_text(manifest));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("manifest is not valid JSON: ") + e.what(), "");
    } catch (const Error& e) {
        throw ConfigError(e.what(), "");
    }
    if (!m.contains("scenario") || !m["scenario"].is_string()) {
        throw ConfigError("manifest has no embedded scenario", "scenario");
    }
    return load_scenario(m["scenario"].get<std::string>());
}

}  // namespace hypar
