#include "hypar/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

#include "hypar/errors.hpp"
#include "hypar/io.hpp"
#include "hypar/parallel.hpp"

namespace hypar {

std::string_view to_string(Metric m) noexcept {
    switch (m) {
        case Metric::transmission: return "transmission";
        case Metric::comb_presence: return "comb_presence";
        case Metric::sideband_power: return "sideband_power";
    }
    return "?";
}

Metric metric_from_string(std::string_view name) {
    for (Metric m : {Metric::transmission, Metric::comb_presence, Metric::sideband_power}) {
        if (to_string(m) == name) return m;
    }
    throw DomainError("unknown metric '" + std::string(name) + "'");
}

std::string_view to_string(Spacing s) noexcept {
    return s == Spacing::log ? "log" : "linear";
}

Spacing spacing_from_string(std::string_view name) {
    if (name == "linear") return Spacing::linear;
    if (name == "log") return Spacing::log;
    throw DomainError("unknown axis spacing '" + std::string(name) + "'");
}

void Axis::validate(std::string_view name) const {
    const std::string n(name);
    if (count < 2) throw DomainError(n + ".count must be >= 2");
    if (!std::isfinite(min) || !std::isfinite(max)) throw DomainError(n + " bounds must be finite");
    if (!(min < max)) throw DomainError(n + ".min must be below " + n + ".max");
    if (spacing == Spacing::log && min <= 0.0) throw DomainError(n + ".min must be > 0 for log spacing");
}

std::vector<double> Axis::values() const {
    std::vector<double> v(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double s = static_cast<double>(i) / (count - 1);
        v[i] = spacing == Spacing::log ? min * std::pow(max / min, s) : min + (max - min) * s;
    }
    v.front() = min;
    v.back() = max;
    return v;
}

void SweepPlan::validate() const {
    frequency.validate("frequency");
    amplitude.validate("amplitude");
    if (frequency.min <= 0.0) throw DomainError("frequency.min must be > 0");
    if (amplitude.min < 0.0) throw DomainError("amplitude.min must be >= 0");
    if (cell.max_periods < 1) throw DomainError("max_periods must be >= 1");
    if (!(cell.criterion_tol > 0.0)) throw DomainError("criterion_tol must be > 0");
    if (cell.retries < 0) throw DomainError("retries must be >= 0");
    if (!(cell.comb_residual > 0.0)) throw DomainError("comb_residual must be > 0");
}

std::vector<double> IntensityMap::row_values(std::size_t row) const {
    std::vector<double> v(cols());
    for (std::size_t c = 0; c < cols(); ++c) v[c] = at(row, c).value;
    return v;
}

std::vector<double> IntensityMap::column_values(std::size_t col) const {
    std::vector<double> v(rows());
    for (std::size_t r = 0; r < rows(); ++r) v[r] = at(r, col).value;
    return v;
}

namespace {

void comb_metric(const SweepPlan& plan, const SteadySegment& seg, double omega_p, CellResult& r) {
    const auto& c = plan.cell;
    const Spectrum spec = spectrum(seg, c.window, c.signal);
    const auto peaks = find_peaks(spec, c.peak_floor);
    bool present = false;
    CombReport rep;
    try {
        rep = comb_metrics(peaks, omega_p, c.omega_x_eff);
        present = rep.equidistance_residual < c.comb_residual;
    } catch (const InsufficientCombError&) {
    }
    if (present) {
        r.spacing = rep.spacing;
        r.n = rep.n.value_or(0);
    }
    if (plan.metric == Metric::comb_presence) {
        r.value = present ? 1.0 : 0.0;
    } else {
        r.value = present ? rep.first_sideband_power() : 0.0;
    }
}

}  // namespace

CellResult evaluate_cell(const SweepPlan& plan, const CircuitParams& params, double frequency,
                         double amplitude) {
    const DriveSpec drive = DriveSpec::single(amplitude, frequency);
    const auto& c = plan.cell;
    CellResult r;
    long periods = c.max_periods;
    for (int attempt = 0; attempt <= c.retries; ++attempt, periods *= 2) {
        r = CellResult{};
        r.attempts = attempt + 1;
        try {
            const SteadySegment seg = settle(params, drive, {}, periods, c.criterion_tol, c.settle);
            r.converged = seg.converged;
            r.quasi_periodic = seg.quasi_periodic;
            if (plan.metric == Metric::transmission) {
                // a non-periodic record has no single transmission value
                if (!seg.converged && !seg.quasi_periodic) continue;
                r.value = std::abs(transmission(seg, drive, 0, c.signal));
            } else {
                comb_metric(plan, seg, frequency, r);
            }
            return r;
        } catch (const Error& e) {
            r.failed = true;
            r.error = e.what();
        }
    }
    r.value = std::numeric_limits<double>::quiet_NaN();
    return r;
}

double free_running_frequency(const CircuitParams& params, double t_settle, double t_record) {
    params.validate();
    if (params.passive()) throw DomainError("a passive circuit does not self-oscillate");
    if (!(t_settle >= 0.0) || !(t_record > 0.0)) throw DomainError("run lengths must be positive");
    const double dt = 2.0 * std::numbers::pi / params.omega_x / 32.0;
    const auto n = static_cast<std::size_t>(t_record / dt);
    std::vector<double> times(n);
    for (std::size_t i = 0; i < n; ++i) times[i] = t_settle + dt * static_cast<double>(i);
    const Trajectory tr =
        integrate(params, DriveSpec{}, {1e-3, 0.0, 0.0}, times.back(), 1e-10, 1e-13, times);
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = tr.states[i].q_x;
    const auto peaks = find_peaks(spectrum(x, dt), 1e-6);
    if (peaks.empty()) throw DomainError("no self-oscillation found");
    const auto top = std::max_element(peaks.begin(), peaks.end(),
                                      [](const Peak& a, const Peak& b) { return a.power < b.power; });
    // golden-section search of the single-bin projection around the peak
    const double bin = 2.0 * std::numbers::pi / (dt * static_cast<double>(n));
    auto mag = [&](double w) { return std::abs(project_tone(x, times.front(), dt, w)); };
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = top->omega - bin, b = top->omega + bin;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = mag(c), fd = mag(d);
    for (int it = 0; it < 60 && b - a > 1e-12; ++it) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = mag(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = mag(d);
        }
    }
    return 0.5 * (a + b);
}

std::string provenance_text(const SweepPlan& plan, const CircuitParams& params) {
    std::string s;
    auto kv = [&s](std::string_view k, const std::string& v) {
        s.append(k).append("=").append(v).append("\n");
    };
    auto num = [&kv](std::string_view k, double v) { kv(k, format_number(v)); };
    num("gamma_x", params.gamma_x);
    num("omega_x", params.omega_x);
    num("gamma_c", params.gamma_c);
    num("gamma_p", params.gamma_p);
    num("eta", params.eta);
    for (const auto& [name, ax] : {std::pair{"frequency", &plan.frequency}, {"amplitude", &plan.amplitude}}) {
        const std::string p(name);
        num(p + ".min", ax->min);
        num(p + ".max", ax->max);
        num(p + ".count", ax->count);
        kv(p + ".spacing", std::string(to_string(ax->spacing)));
    }
    const auto& c = plan.cell;
    kv("metric", std::string(to_string(plan.metric)));
    num("max_periods", static_cast<double>(c.max_periods));
    num("criterion_tol", c.criterion_tol);
    num("samples_per_period", c.settle.samples_per_period);
    num("record_periods", c.settle.record_periods);
    num("min_periods", c.settle.min_periods);
    num("rel_tol", c.settle.rel_tol);
    num("abs_tol", c.settle.abs_tol);
    num("max_period_ratio", c.settle.max_period_ratio);
    num("detect_quasi_periodic", c.settle.detect_quasi_periodic);
    num("envelope_window", c.settle.envelope_window);
    num("quasi_tol", c.settle.quasi_tol);
    kv("signal", std::string(to_string(c.signal)));
    kv("window", std::string(to_string(c.window)));
    num("peak_floor", c.peak_floor);
    num("comb_residual", c.comb_residual);
    num("retries", c.retries);
    kv("omega_x_eff", c.omega_x_eff ? format_number(*c.omega_x_eff) : "none");
    return s;
}

IntensityMap run_sweep(const SweepPlan& plan, const CircuitParams& params, int threads,
                       const ProgressFn& progress) {
    plan.validate();
    params.validate();
    IntensityMap map;
    map.metric = plan.metric;
    map.frequencies = plan.frequency.values();
    map.amplitudes = plan.amplitude.values();
    map.provenance = sha256_hex(provenance_text(plan, params));
    const std::size_t nc = map.cols();
    const std::size_t total = map.rows() * nc;
    map.cells.resize(total);
    std::mutex m;
    std::size_t done = 0;
    parallel_for(total, threads, [&](std::size_t i) {
        map.cells[i] = evaluate_cell(plan, params, map.frequencies[i % nc], map.amplitudes[i / nc]);
        if (progress) {
            std::lock_guard<std::mutex> lock(m);
            progress(++done, total);
        }
    });
    return map;
}

IntensityMap oscillation_map(SweepPlan plan, const CircuitParams& params,
                             std::optional<double> omega_x_eff, int threads,
                             const ProgressFn& progress) {
    plan.metric = Metric::comb_presence;
    if (omega_x_eff) plan.cell.omega_x_eff = omega_x_eff;
    return run_sweep(plan, params, threads, progress);
}

double mode_contrast(const std::vector<double>& row) {
    std::vector<double> v;
    for (double x : row) {
        if (std::isfinite(x)) v.push_back(x);
    }
    if (v.size() < 3) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    const double median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    if (!(median > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return (v.back() - median) / median;
}

std::vector<double> contrast_profile(const IntensityMap& map) {
    std::vector<double> c(map.rows());
    for (std::size_t r = 0; r < map.rows(); ++r) c[r] = mode_contrast(map.row_values(r));
    return c;
}

ThresholdReport find_thresholds(const std::vector<double>& amplitudes,
                                const std::vector<double>& metric, double floor,
                                const SliceFn& refine, double resolution) {
    if (amplitudes.size() != metric.size()) throw DomainError("amplitude and metric sizes differ");
    if (amplitudes.size() < 8) throw DomainError("threshold search needs at least 8 amplitudes");
    for (std::size_t i = 1; i < amplitudes.size(); ++i) {
        if (!(amplitudes[i] > amplitudes[i - 1])) throw DomainError("amplitudes must increase");
    }
    if (!(resolution > 0.0)) throw DomainError("resolution must be > 0");

    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < metric.size(); ++i) {
        if (std::isfinite(metric[i])) idx.push_back(i);
    }
    auto above = [floor](double m) { return m >= floor; };

    ThresholdReport rep;
    rep.criterion = "metric >= " + format_number(floor);
    std::size_t rise = idx.size();
    for (std::size_t k = 1; k < idx.size(); ++k) {
        if (!above(metric[idx[k - 1]]) && above(metric[idx[k]])) {
            rise = k;
            break;
        }
    }
    std::size_t fall = idx.size();
    for (std::size_t k = idx.size(); k-- > 1;) {
        if (above(metric[idx[k - 1]]) && !above(metric[idx[k]])) {
            if (rise < idx.size() && k < rise) break;
            fall = k;
            break;
        }
    }

    auto bracket = [&](std::size_t k, bool rising) {
        Threshold t;
        t.lo = amplitudes[idx[k - 1]];
        t.hi = amplitudes[idx[k]];
        while (refine && (t.hi - t.lo) > resolution * t.hi && t.refinements < 60) {
            const double mid = 0.5 * (t.lo + t.hi);
            const double m = refine(mid);
            if (!std::isfinite(m)) break;
            ++t.refinements;
            if (above(m) == rising) {
                t.hi = mid;
            } else {
                t.lo = mid;
            }
        }
        t.value = 0.5 * (t.lo + t.hi);
        return t;
    };
    if (rise < idx.size()) rep.lower = bracket(rise, true);
    if (fall < idx.size()) rep.upper = bracket(fall, false);
    return rep;
}

ThresholdReport find_thresholds(const IntensityMap& map, const SweepPlan& plan,
                                const CircuitParams& params, std::size_t frequency_index,
                                double floor, bool refine, double resolution) {
    if (frequency_index >= map.cols()) throw DomainError("frequency index out of range");
    const double f = map.frequencies[frequency_index];
    SliceFn fn;
    if (refine) {
        fn = [&plan, &params, f](double a) { return evaluate_cell(plan, params, f, a).value; };
    }
    auto rep = find_thresholds(map.amplitudes, map.column_values(frequency_index), floor, fn,
                               resolution);
    rep.criterion = std::string(to_string(map.metric)) + " >= " + format_number(floor);
    return rep;
}

}  // namespace hypar
