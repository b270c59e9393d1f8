#include "hypar/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cmath>
#include <set>

#include "hypar/errors.hpp"
#include "hypar/io.hpp"

namespace hypar {

std::string_view to_string(ExperimentKind k) noexcept {
    switch (k) {
        case ExperimentKind::simulate: return "simulate";
        case ExperimentKind::hb: return "hb";
        case ExperimentKind::slowflow: return "slowflow";
        case ExperimentKind::sweep: return "sweep";
        case ExperimentKind::spectrum: return "spectrum";
        case ExperimentKind::probe: return "probe";
        case ExperimentKind::coexist: return "coexist";
    }
    return "?";
}

std::optional<ExperimentKind> kind_from_string(std::string_view name) noexcept {
    for (auto k : {ExperimentKind::simulate, ExperimentKind::hb, ExperimentKind::slowflow,
                   ExperimentKind::sweep, ExperimentKind::spectrum, ExperimentKind::probe,
                   ExperimentKind::coexist}) {
        if (to_string(k) == name) return k;
    }
    return std::nullopt;
}

SlowFlowParams ReducedModel::params() const {
    SlowFlowParams p = base;
    p.frame = build_frame(frame.omega_p, frame.omega_x, frame.n);
    return p;
}

namespace {

std::string join(const std::string& path, std::string_view key) {
    return path.empty() ? std::string(key) : path + "." + std::string(key);
}

[[noreturn]] void fail_at(const std::string& path, const YAML::Node& node, const std::string& msg) {
    const auto m = node.Mark();
    const bool known = !m.is_null();
    throw ConfigError(path + ": " + msg, path, known ? m.line + 1 : 0, known ? m.column + 1 : 0);
}

/// Strict view of one YAML mapping: every key must be consumed before done().
class Block {
public:
    Block(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
        if (!node_.IsMap()) fail_at(path_.empty() ? "<root>" : path_, node_, "expected a mapping");
    }

    [[nodiscard]] const std::string& path() const { return path_; }
    [[nodiscard]] bool has(std::string_view key) const { return bool(node_[std::string(key)]); }

    double num(std::string_view key, double def) { return opt_num(key).value_or(def); }
    std::optional<double> opt_num(std::string_view key) {
        auto n = get(key);
        if (!n) return std::nullopt;
        return to_num(*n, join(path_, key));
    }
    long integer(std::string_view key, long def) {
        auto n = get(key);
        if (!n) return def;
        return to_int(*n, join(path_, key));
    }
    bool boolean(std::string_view key, bool def) {
        auto n = get(key);
        if (!n) return def;
        const std::string s = scalar(*n, join(path_, key));
        if (s == "true") return true;
        if (s == "false") return false;
        fail_at(join(path_, key), *n, "expected true or false");
    }
    std::string str(std::string_view key, const std::string& def) {
        auto n = get(key);
        if (!n) return def;
        return scalar(*n, join(path_, key));
    }
    template <class Enum, class Parse>
    Enum choice(std::string_view key, Enum def, Parse parse) {
        auto n = get(key);
        if (!n) return def;
        const std::string s = scalar(*n, join(path_, key));
        try {
            return parse(s);
        } catch (const DomainError& e) {
            fail_at(join(path_, key), *n, e.what());
        }
    }
    std::optional<Block> sub(std::string_view key) {
        auto n = get(key);
        if (!n) return std::nullopt;
        return Block(*n, join(path_, key));
    }
    std::vector<double> num_list(std::string_view key) {
        std::vector<double> v;
        auto n = get(key);
        if (!n) return v;
        const std::string p = join(path_, key);
        if (!n->IsSequence()) fail_at(p, *n, "expected a list");
        for (std::size_t i = 0; i < n->size(); ++i) {
            v.push_back(to_num((*n)[i], p + "[" + std::to_string(i) + "]"));
        }
        return v;
    }
    std::vector<int> int_list(std::string_view key, std::vector<int> def) {
        auto n = get(key);
        if (!n) return def;
        const std::string p = join(path_, key);
        if (!n->IsSequence()) fail_at(p, *n, "expected a list");
        std::vector<int> v;
        for (std::size_t i = 0; i < n->size(); ++i) {
            v.push_back(static_cast<int>(to_int((*n)[i], p + "[" + std::to_string(i) + "]")));
        }
        return v;
    }
    std::vector<Block> map_list(std::string_view key) {
        std::vector<Block> v;
        auto n = get(key);
        if (!n) return v;
        const std::string p = join(path_, key);
        if (!n->IsSequence()) fail_at(p, *n, "expected a list");
        for (std::size_t i = 0; i < n->size(); ++i) {
            v.emplace_back((*n)[i], p + "[" + std::to_string(i) + "]");
        }
        return v;
    }
    void done() const {
        for (const auto& kv : node_) {
            const std::string k = kv.first.as<std::string>();
            if (!seen_.count(k)) fail_at(join(path_, k), kv.first, "unknown key");
        }
    }
    [[noreturn]] void fail(std::string_view key, const std::string& msg) const {
        const YAML::Node n = node_[std::string(key)];
        fail_at(join(path_, key), n ? n : node_, msg);
    }

private:
    std::optional<YAML::Node> get(std::string_view key) {
        const std::string k(key);
        seen_.insert(k);
        const YAML::Node& cn = node_;
        YAML::Node n = cn[k];
        if (!n) return std::nullopt;
        if (n.IsNull()) fail_at(join(path_, key), n, "missing value");
        return n;
    }
    static std::string scalar(const YAML::Node& n, const std::string& p) {
        if (!n.IsScalar()) fail_at(p, n, "expected a scalar");
        return n.Scalar();
    }
    static double to_num(const YAML::Node& n, const std::string& p) {
        const std::string s = scalar(n, p);
        double x = 0.0;
        const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
        if (r.ec != std::errc{} || r.ptr != s.data() + s.size() || !std::isfinite(x)) {
            fail_at(p, n, "expected a finite number, got '" + s + "'");
        }
        return x;
    }
    static long to_int(const YAML::Node& n, const std::string& p) {
        const std::string s = scalar(n, p);
        long x = 0;
        const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
        if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
            fail_at(p, n, "expected an integer, got '" + s + "'");
        }
        return x;
    }

    YAML::Node node_;
    std::string path_;
    std::set<std::string> seen_;
};

/// DomainError messages start with the offending field name.
[[noreturn]] void rethrow_domain(const DomainError& e, const std::string& prefix) {
    std::string msg = e.what();
    std::string field = msg.substr(0, msg.find(' '));
    if (!field.empty() && field.back() == ':') field.pop_back();
    const std::string path = join(prefix, field);
    throw ConfigError(path + ": " + msg, path);
}

[[noreturn]] void invalid(const std::string& path, const std::string& msg) {
    throw ConfigError(path + ": " + msg, path);
}

CircuitParams read_model(Block b) {
    CircuitParams p;
    p.gamma_x = b.num("gamma_x", p.gamma_x);
    p.omega_x = b.num("omega_x", p.omega_x);
    p.gamma_c = b.num("gamma_c", p.gamma_c);
    p.gamma_p = b.num("gamma_p", p.gamma_p);
    p.eta = b.num("eta", p.eta);
    b.done();
    return p;
}

ReducedModel read_reduced(Block b) {
    ReducedModel r;
    auto& s = r.base;
    s.Omega_a = b.num("Omega_a", s.Omega_a);
    s.delta_a = b.num("delta_a", s.delta_a);
    s.chi = b.num("chi", s.chi);
    s.mu = b.num("mu", s.mu);
    s.k_v = b.num("k_v", s.k_v);
    s.k_p = b.num("k_p", s.k_p);
    s.omega_x = b.num("omega_x", s.omega_x);
    s.V_0 = b.num("V_0", s.V_0);
    s.q_x0 = b.num("q_x0", s.q_x0);
    s.phi_sig = b.num("phi_sig", s.phi_sig);
    if (auto f = b.sub("frame")) {
        r.frame.omega_p = f->num("omega_p", r.frame.omega_p);
        r.frame.omega_x = f->num("omega_x", r.frame.omega_x);
        r.frame.n = static_cast<int>(f->integer("n", r.frame.n));
        f->done();
    }
    b.done();
    return r;
}

Tone read_tone(Block b, Tone t = {}) {
    t.amplitude = b.num("amplitude", t.amplitude);
    t.omega = b.num("omega", t.omega);
    t.phase = b.num("phase", t.phase);
    b.done();
    return t;
}

DriveSpec read_drive(Block b) {
    DriveSpec d;
    for (auto& t : b.map_list("tones")) d.tones.push_back(read_tone(t));
    b.done();
    return d;
}

SettleSettings read_settle(Block b, SettleSettings s = {}) {
    s.max_periods = b.integer("max_periods", s.max_periods);
    s.criterion_tol = b.num("criterion_tol", s.criterion_tol);
    auto& o = s.options;
    o.samples_per_period = static_cast<int>(b.integer("samples_per_period", o.samples_per_period));
    o.record_periods = static_cast<int>(b.integer("record_periods", o.record_periods));
    o.min_periods = static_cast<int>(b.integer("min_periods", o.min_periods));
    o.rel_tol = b.num("rel_tol", o.rel_tol);
    o.abs_tol = b.num("abs_tol", o.abs_tol);
    o.max_period_ratio = static_cast<int>(b.integer("max_period_ratio", o.max_period_ratio));
    o.detect_quasi_periodic = b.boolean("detect_quasi_periodic", o.detect_quasi_periodic);
    o.envelope_window = static_cast<int>(b.integer("envelope_window", o.envelope_window));
    o.quasi_tol = b.num("quasi_tol", o.quasi_tol);
    b.done();
    return s;
}

Axis read_axis(Block b, Axis a) {
    a.min = b.num("min", a.min);
    a.max = b.num("max", a.max);
    a.count = static_cast<int>(b.integer("count", a.count));
    a.spacing = b.choice("spacing", a.spacing, spacing_from_string);
    b.done();
    return a;
}

Resonator read_resonator(Block b) {
    Resonator r;
    r.gamma_x = b.num("gamma_x", r.gamma_x);
    r.omega_x = b.num("omega_x", r.omega_x);
    r.kappa = b.num("kappa", r.kappa);
    b.done();
    return r;
}

void read_experiment(Scenario& s, Block b) {
    switch (s.kind) {
        case ExperimentKind::simulate: {
            auto& e = s.simulate;
            e.t_end = b.num("t_end", e.t_end);
            e.sample_dt = b.num("sample_dt", e.sample_dt);
            e.rel_tol = b.num("rel_tol", e.rel_tol);
            e.abs_tol = b.num("abs_tol", e.abs_tol);
            if (auto i = b.sub("initial")) {
                e.initial.q_x = i->num("q_x", 0.0);
                e.initial.v_x = i->num("v_x", 0.0);
                e.initial.q_p = i->num("q_p", 0.0);
                i->done();
            }
            e.spectrum_from = b.num("spectrum_from", e.spectrum_from);
            e.signal = b.choice("signal", e.signal, signal_from_string);
            e.window = b.choice("window", e.window, window_from_string);
            break;
        }
        case ExperimentKind::hb: {
            auto& e = s.hb;
            e.harmonics = static_cast<int>(b.integer("harmonics", e.harmonics));
            e.tol = b.num("tol", e.tol);
            e.amplitudes = b.num_list("amplitudes");
            e.stability = b.boolean("stability", e.stability);
            break;
        }
        case ExperimentKind::spectrum: {
            auto& e = s.spectrum;
            if (auto st = b.sub("settle")) e.settle = read_settle(*st);
            e.signal = b.choice("signal", e.signal, signal_from_string);
            e.window = b.choice("window", e.window, window_from_string);
            e.peak_floor = b.num("peak_floor", e.peak_floor);
            e.omega_x_eff = b.opt_num("omega_x_eff");
            e.free_running = b.boolean("free_running", e.free_running);
            e.band_lo = b.num("band_lo", e.band_lo);
            e.band_hi = b.num("band_hi", e.band_hi);
            break;
        }
        case ExperimentKind::probe: {
            auto& e = s.probe;
            if (auto p = b.sub("pump")) e.pump = read_tone(*p, e.pump);
            e.probe_amplitude = b.num("probe_amplitude", e.probe_amplitude);
            e.probe_phase = b.num("probe_phase", e.probe_phase);
            if (auto a = b.sub("probe_omega")) e.probe_omega = read_axis(*a, e.probe_omega);
            e.N_pump = static_cast<int>(b.integer("N_pump", e.N_pump));
            e.N_mix = static_cast<int>(b.integer("N_mix", e.N_mix));
            e.signal = b.choice("signal", e.signal, signal_from_string);
            break;
        }
        case ExperimentKind::sweep: {
            auto& e = s.sweep;
            auto& plan = e.plan;
            plan.metric = b.choice("metric", plan.metric, metric_from_string);
            if (auto a = b.sub("frequency")) plan.frequency = read_axis(*a, plan.frequency);
            if (auto a = b.sub("amplitude")) plan.amplitude = read_axis(*a, plan.amplitude);
            if (auto c = b.sub("cell")) {
                auto& cs = plan.cell;
                SettleSettings st{cs.max_periods, cs.criterion_tol, cs.settle};
                if (auto sb = c->sub("settle")) st = read_settle(*sb, st);
                cs.max_periods = st.max_periods;
                cs.criterion_tol = st.criterion_tol;
                cs.settle = st.options;
                cs.signal = c->choice("signal", cs.signal, signal_from_string);
                cs.window = c->choice("window", cs.window, window_from_string);
                cs.peak_floor = c->num("peak_floor", cs.peak_floor);
                cs.comb_residual = c->num("comb_residual", cs.comb_residual);
                cs.retries = static_cast<int>(c->integer("retries", cs.retries));
                cs.omega_x_eff = c->opt_num("omega_x_eff");
                c->done();
            }
            e.free_running = b.boolean("free_running", e.free_running);
            if (auto t = b.sub("threshold")) {
                if (!t->has("floor")) t->fail("floor", "threshold needs a floor");
                e.threshold_floor = t->num("floor", 0.0);
                e.threshold_column = static_cast<int>(t->integer("column", e.threshold_column));
                e.refine = t->boolean("refine", e.refine);
                e.resolution = t->num("resolution", e.resolution);
                t->done();
            }
            break;
        }
        case ExperimentKind::slowflow: {
            auto& e = s.slowflow;
            e.t_end = b.num("t_end", e.t_end);
            e.dt = b.num("dt", e.dt);
            if (auto i = b.sub("initial")) {
                e.initial.U = i->num("U", 0.0);
                e.initial.V = i->num("V", 0.0);
                i->done();
            }
            e.gain_pumps = b.num_list("gain_pumps");
            e.gain_deltas = b.num_list("gain_deltas");
            if (auto r = b.sub("resonator")) e.resonator = read_resonator(*r);
            e.loop_points = static_cast<int>(b.integer("loop_points", e.loop_points));
            e.loop_span = b.num("loop_span", e.loop_span);
            break;
        }
        case ExperimentKind::coexist: {
            auto& e = s.coexist;
            if (auto r = b.sub("resonator")) e.resonator = read_resonator(*r);
            e.orders = b.int_list("orders", e.orders);
            e.pumps = b.num_list("pumps");
            e.omega_p = b.num("omega_p", e.omega_p);
            e.points = static_cast<int>(b.integer("points", e.points));
            e.span = b.num("span", e.span);
            break;
        }
    }
    b.done();
}

bool increasing(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (!(v[i] > v[i - 1])) return false;
    }
    return true;
}

void check_settle(const SettleSettings& s, const std::string& p) {
    if (s.max_periods < 1) invalid(p + ".max_periods", "must be >= 1");
    if (!(s.criterion_tol > 0.0)) invalid(p + ".criterion_tol", "must be > 0");
    const auto& o = s.options;
    if (o.samples_per_period < 4) invalid(p + ".samples_per_period", "must be >= 4");
    if (o.record_periods < 1) invalid(p + ".record_periods", "must be >= 1");
    if (o.min_periods < 1) invalid(p + ".min_periods", "must be >= 1");
    if (!(o.rel_tol > 0.0)) invalid(p + ".rel_tol", "must be > 0");
    if (!(o.abs_tol > 0.0)) invalid(p + ".abs_tol", "must be > 0");
    if (o.max_period_ratio < 1) invalid(p + ".max_period_ratio", "must be >= 1");
    if (o.envelope_window < 0) invalid(p + ".envelope_window", "must be >= 0");
    if (!(o.quasi_tol > 0.0)) invalid(p + ".quasi_tol", "must be > 0");
}

void check_resonator(const Resonator& r, const std::string& p) {
    if (!(r.gamma_x > 0.0)) invalid(p + ".gamma_x", "must be > 0");
    if (!(r.omega_x > 0.0)) invalid(p + ".omega_x", "must be > 0");
}

}  // namespace

void validate(const Scenario& s) {
    if (s.schema != 1) invalid("schema", "unsupported schema version " + std::to_string(s.schema));
    const bool circuit = s.kind != ExperimentKind::slowflow && s.kind != ExperimentKind::coexist;
    const bool needs_drive = s.kind == ExperimentKind::simulate || s.kind == ExperimentKind::hb ||
                             s.kind == ExperimentKind::spectrum;
    const std::string kind(to_string(s.kind));
    if (circuit && !s.model) invalid("model", "required by kind '" + kind + "'");
    if (!circuit && s.model) invalid("model", "not used by kind '" + kind + "'");
    if (!circuit && !s.reduced) invalid("reduced", "required by kind '" + kind + "'");
    if (circuit && s.reduced) invalid("reduced", "not used by kind '" + kind + "'");
    if (needs_drive && !s.drive) invalid("drive", "required by kind '" + kind + "'");
    if (!needs_drive && s.drive) invalid("drive", "not used by kind '" + kind + "'");

    if (s.model) {
        try {
            s.model->validate();
        } catch (const DomainError& e) {
            rethrow_domain(e, "model");
        }
    }
    if (s.drive) {
        try {
            s.drive->validate();
        } catch (const DomainError& e) {
            invalid("drive.tones", e.what());
        }
    }
    if (s.reduced) {
        try {
            s.reduced->base.validate();
        } catch (const DomainError& e) {
            rethrow_domain(e, "reduced");
        }
        try {
            (void)s.reduced->params();
        } catch (const DomainError& e) {
            invalid("reduced.frame", e.what());
        }
    }

    const std::string x = "experiment";
    switch (s.kind) {
        case ExperimentKind::simulate: {
            const auto& e = s.simulate;
            if (!(e.t_end > 0.0)) invalid(x + ".t_end", "must be > 0");
            if (!(e.sample_dt >= 0.0)) invalid(x + ".sample_dt", "must be >= 0");
            if (e.sample_dt > e.t_end) invalid(x + ".sample_dt", "exceeds t_end");
            if (!(e.rel_tol > 0.0)) invalid(x + ".rel_tol", "must be > 0");
            if (!(e.abs_tol > 0.0)) invalid(x + ".abs_tol", "must be > 0");
            if (e.spectrum_from < 0.0 || e.spectrum_from >= e.t_end) {
                invalid(x + ".spectrum_from", "must lie in [0, t_end)");
            }
            break;
        }
        case ExperimentKind::hb: {
            const auto& e = s.hb;
            if (s.drive->tones.size() != 1) invalid("drive.tones", "hb needs exactly one tone");
            if (e.harmonics < 1) invalid(x + ".harmonics", "must be >= 1");
            if (!(e.tol > 0.0)) invalid(x + ".tol", "must be > 0");
            if (!e.amplitudes.empty() && e.amplitudes.size() < 2) {
                invalid(x + ".amplitudes", "continuation needs at least 2 amplitudes");
            }
            if (!increasing(e.amplitudes)) invalid(x + ".amplitudes", "must increase");
            for (double a : e.amplitudes) {
                if (a < 0.0) invalid(x + ".amplitudes", "must be >= 0");
            }
            break;
        }
        case ExperimentKind::spectrum: {
            const auto& e = s.spectrum;
            check_settle(e.settle, x + ".settle");
            if (!(e.peak_floor > 0.0)) invalid(x + ".peak_floor", "must be > 0");
            if (e.omega_x_eff && e.free_running) {
                invalid(x + ".free_running", "conflicts with omega_x_eff");
            }
            if (e.omega_x_eff && !(*e.omega_x_eff > 0.0)) invalid(x + ".omega_x_eff", "must be > 0");
            if (e.band_lo < 0.0 || e.band_hi < 0.0 || (e.band_hi > 0.0 && e.band_hi <= e.band_lo)) {
                invalid(x + ".band_hi", "band must satisfy 0 <= band_lo < band_hi");
            }
            if (e.free_running && s.model->passive()) {
                invalid(x + ".free_running", "a passive circuit does not self-oscillate");
            }
            break;
        }
        case ExperimentKind::probe: {
            const auto& e = s.probe;
            try {
                DriveSpec({e.pump}).validate();
            } catch (const DomainError& err) {
                invalid(x + ".pump", err.what());
            }
            if (!(e.probe_amplitude > 0.0)) invalid(x + ".probe_amplitude", "must be > 0");
            try {
                e.probe_omega.validate("probe_omega");
            } catch (const DomainError& err) {
                rethrow_domain(err, x);
            }
            if (!(e.probe_omega.min > 0.0)) invalid(x + ".probe_omega.min", "must be > 0");
            if (e.N_pump < 1) invalid(x + ".N_pump", "must be >= 1");
            if (e.N_mix < 1) invalid(x + ".N_mix", "must be >= 1");
            break;
        }
        case ExperimentKind::sweep: {
            const auto& e = s.sweep;
            try {
                e.plan.validate();
            } catch (const DomainError& err) {
                rethrow_domain(err, x);
            }
            check_settle({e.plan.cell.max_periods, e.plan.cell.criterion_tol, e.plan.cell.settle},
                         x + ".cell.settle");
            if (e.free_running && e.plan.cell.omega_x_eff) {
                invalid(x + ".free_running", "conflicts with cell.omega_x_eff");
            }
            if (e.free_running && s.model->passive()) {
                invalid(x + ".free_running", "a passive circuit does not self-oscillate");
            }
            if (e.threshold_floor) {
                if (e.plan.amplitude.count < 8) {
                    invalid(x + ".amplitude.count", "thresholds need at least 8 amplitudes");
                }
                if (e.threshold_column < 0 || e.threshold_column >= e.plan.frequency.count) {
                    invalid(x + ".threshold.column", "outside the frequency axis");
                }
                if (!(e.resolution > 0.0)) invalid(x + ".threshold.resolution", "must be > 0");
            }
            break;
        }
        case ExperimentKind::slowflow: {
            const auto& e = s.slowflow;
            if (!(e.t_end > 0.0)) invalid(x + ".t_end", "must be > 0");
            if (!(e.dt > 0.0) || e.dt > e.t_end) invalid(x + ".dt", "must lie in (0, t_end]");
            if (e.gain_pumps.empty() != e.gain_deltas.empty()) {
                invalid(x + ".gain_deltas", "gain_pumps and gain_deltas go together");
            }
            for (double v : e.gain_pumps) {
                if (v < 0.0) invalid(x + ".gain_pumps", "must be >= 0");
            }
            if (e.resonator) check_resonator(*e.resonator, x + ".resonator");
            if (e.loop_points < 10) invalid(x + ".loop_points", "must be >= 10");
            if (!(e.loop_span > 0.0)) invalid(x + ".loop_span", "must be > 0");
            break;
        }
        case ExperimentKind::coexist: {
            const auto& e = s.coexist;
            check_resonator(e.resonator, x + ".resonator");
            if (e.orders.empty()) invalid(x + ".orders", "must not be empty");
            for (int n : e.orders) {
                if (n < 2) invalid(x + ".orders", "orders must be >= 2");
            }
            if (e.pumps.empty()) invalid(x + ".pumps", "must not be empty");
            for (double v : e.pumps) {
                if (v < 0.0) invalid(x + ".pumps", "must be >= 0");
            }
            if (!(e.omega_p > 0.0)) invalid(x + ".omega_p", "must be > 0");
            if (e.points < 10) invalid(x + ".points", "must be >= 10");
            if (!(e.span > 0.0)) invalid(x + ".span", "must be > 0");
            break;
        }
    }
}

Scenario load_scenario(std::string_view text) {
    YAML::Node root;
    try {
        root = YAML::Load(std::string(text));
    } catch (const YAML::ParserException& e) {
        throw ConfigError("syntax error: " + e.msg, "", e.mark.line + 1, e.mark.column + 1);
    }
    if (!root || root.IsNull()) throw ConfigError("empty scenario document", "");
    Block top(root, "");
    Scenario s;
    if (!top.has("schema")) top.fail("schema", "missing (expected 'schema: 1')");
    s.schema = static_cast<int>(top.integer("schema", 1));
    if (s.schema != 1) top.fail("schema", "unsupported schema version " + std::to_string(s.schema));
    if (!top.has("kind")) top.fail("kind", "missing experiment kind");
    const std::string kind = top.str("kind", "");
    const auto k = kind_from_string(kind);
    if (!k) top.fail("kind", "unknown experiment kind '" + kind + "'");
    s.kind = *k;
    s.output = top.str("output", "");
    if (auto b = top.sub("model")) s.model = read_model(std::move(*b));
    if (auto b = top.sub("reduced")) s.reduced = read_reduced(std::move(*b));
    if (auto b = top.sub("drive")) s.drive = read_drive(std::move(*b));
    if (auto b = top.sub("experiment")) read_experiment(s, std::move(*b));
    top.done();
    validate(s);
    return s;
}

Scenario load_scenario_file(const std::string& path) {
    std::string text;
    try {
        text = read_text(path);
    } catch (const Error& e) {
        throw ConfigError(e.what(), "");
    }
    return load_scenario(text);
}

namespace {

class Writer {
public:
    Writer() { out_ << YAML::BeginMap; }
    void num(std::string_view k, double v) { out_ << YAML::Key << std::string(k) << YAML::Value << format_number(v); }
    void integer(std::string_view k, long v) { out_ << YAML::Key << std::string(k) << YAML::Value << v; }
    void boolean(std::string_view k, bool v) {
        out_ << YAML::Key << std::string(k) << YAML::Value << (v ? "true" : "false");
    }
    void str(std::string_view k, std::string_view v) {
        out_ << YAML::Key << std::string(k) << YAML::Value << std::string(v);
    }
    void begin(std::string_view k) { out_ << YAML::Key << std::string(k) << YAML::Value << YAML::BeginMap; }
    void end() { out_ << YAML::EndMap; }
    void nums(std::string_view k, const std::vector<double>& v) {
        out_ << YAML::Key << std::string(k) << YAML::Value << YAML::Flow << YAML::BeginSeq;
        for (double x : v) out_ << format_number(x);
        out_ << YAML::EndSeq;
    }
    void ints(std::string_view k, const std::vector<int>& v) {
        out_ << YAML::Key << std::string(k) << YAML::Value << YAML::Flow << YAML::BeginSeq;
        for (int x : v) out_ << x;
        out_ << YAML::EndSeq;
    }
    void tones(std::string_view k, const std::vector<Tone>& v) {
        out_ << YAML::Key << std::string(k) << YAML::Value << YAML::BeginSeq;
        for (const auto& t : v) {
            out_ << YAML::BeginMap;
            num("amplitude", t.amplitude);
            num("omega", t.omega);
            num("phase", t.phase);
            out_ << YAML::EndMap;
        }
        out_ << YAML::EndSeq;
    }
    std::string finish() {
        out_ << YAML::EndMap;
        return std::string(out_.c_str()) + "\n";
    }

private:
    YAML::Emitter out_;
};

void write_settle(Writer& w, const SettleSettings& s) {
    w.begin("settle");
    w.integer("max_periods", s.max_periods);
    w.num("criterion_tol", s.criterion_tol);
    const auto& o = s.options;
    w.integer("samples_per_period", o.samples_per_period);
    w.integer("record_periods", o.record_periods);
    w.integer("min_periods", o.min_periods);
    w.num("rel_tol", o.rel_tol);
    w.num("abs_tol", o.abs_tol);
    w.integer("max_period_ratio", o.max_period_ratio);
    w.boolean("detect_quasi_periodic", o.detect_quasi_periodic);
    w.integer("envelope_window", o.envelope_window);
    w.num("quasi_tol", o.quasi_tol);
    w.end();
}

void write_axis(Writer& w, std::string_view k, const Axis& a) {
    w.begin(k);
    w.num("min", a.min);
    w.num("max", a.max);
    w.integer("count", a.count);
    w.str("spacing", to_string(a.spacing));
    w.end();
}

void write_resonator(Writer& w, const Resonator& r) {
    w.begin("resonator");
    w.num("gamma_x", r.gamma_x);
    w.num("omega_x", r.omega_x);
    w.num("kappa", r.kappa);
    w.end();
}

void write_tone(Writer& w, std::string_view k, const Tone& t) {
    w.begin(k);
    w.num("amplitude", t.amplitude);
    w.num("omega", t.omega);
    w.num("phase", t.phase);
    w.end();
}

}  // namespace

std::string serialize(const Scenario& s) {
    Writer w;
    w.integer("schema", s.schema);
    w.str("kind", to_string(s.kind));
    if (!s.output.empty()) w.str("output", s.output);
    if (s.model) {
        const auto& p = *s.model;
        w.begin("model");
        w.num("gamma_x", p.gamma_x);
        w.num("omega_x", p.omega_x);
        w.num("gamma_c", p.gamma_c);
        w.num("gamma_p", p.gamma_p);
        w.num("eta", p.eta);
        w.end();
    }
    if (s.reduced) {
        const auto& b = s.reduced->base;
        w.begin("reduced");
        w.num("Omega_a", b.Omega_a);
        w.num("delta_a", b.delta_a);
        w.num("chi", b.chi);
        w.num("mu", b.mu);
        w.num("k_v", b.k_v);
        w.num("k_p", b.k_p);
        w.num("omega_x", b.omega_x);
        w.num("V_0", b.V_0);
        w.num("q_x0", b.q_x0);
        w.num("phi_sig", b.phi_sig);
        w.begin("frame");
        w.num("omega_p", s.reduced->frame.omega_p);
        w.num("omega_x", s.reduced->frame.omega_x);
        w.integer("n", s.reduced->frame.n);
        w.end();
        w.end();
    }
    if (s.drive) {
        w.begin("drive");
        w.tones("tones", s.drive->tones);
        w.end();
    }
    w.begin("experiment");
    switch (s.kind) {
        case ExperimentKind::simulate: {
            const auto& e = s.simulate;
            w.num("t_end", e.t_end);
            w.num("sample_dt", e.sample_dt);
            w.num("rel_tol", e.rel_tol);
            w.num("abs_tol", e.abs_tol);
            w.begin("initial");
            w.num("q_x", e.initial.q_x);
            w.num("v_x", e.initial.v_x);
            w.num("q_p", e.initial.q_p);
            w.end();
            w.num("spectrum_from", e.spectrum_from);
            w.str("signal", to_string(e.signal));
            w.str("window", to_string(e.window));
            break;
        }
        case ExperimentKind::hb: {
            const auto& e = s.hb;
            w.integer("harmonics", e.harmonics);
            w.num("tol", e.tol);
            w.nums("amplitudes", e.amplitudes);
            w.boolean("stability", e.stability);
            break;
        }
        case ExperimentKind::spectrum: {
            const auto& e = s.spectrum;
            write_settle(w, e.settle);
            w.str("signal", to_string(e.signal));
            w.str("window", to_string(e.window));
            w.num("peak_floor", e.peak_floor);
            if (e.omega_x_eff) w.num("omega_x_eff", *e.omega_x_eff);
            w.boolean("free_running", e.free_running);
            w.num("band_lo", e.band_lo);
            w.num("band_hi", e.band_hi);
            break;
        }
        case ExperimentKind::probe: {
            const auto& e = s.probe;
            write_tone(w, "pump", e.pump);
            w.num("probe_amplitude", e.probe_amplitude);
            w.num("probe_phase", e.probe_phase);
            write_axis(w, "probe_omega", e.probe_omega);
            w.integer("N_pump", e.N_pump);
            w.integer("N_mix", e.N_mix);
            w.str("signal", to_string(e.signal));
            break;
        }
        case ExperimentKind::sweep: {
            const auto& e = s.sweep;
            const auto& c = e.plan.cell;
            w.str("metric", to_string(e.plan.metric));
            write_axis(w, "frequency", e.plan.frequency);
            write_axis(w, "amplitude", e.plan.amplitude);
            w.begin("cell");
            write_settle(w, {c.max_periods, c.criterion_tol, c.settle});
            w.str("signal", to_string(c.signal));
            w.str("window", to_string(c.window));
            w.num("peak_floor", c.peak_floor);
            w.num("comb_residual", c.comb_residual);
            w.integer("retries", c.retries);
            if (c.omega_x_eff) w.num("omega_x_eff", *c.omega_x_eff);
            w.end();
            w.boolean("free_running", e.free_running);
            if (e.threshold_floor) {
                w.begin("threshold");
                w.num("floor", *e.threshold_floor);
                w.integer("column", e.threshold_column);
                w.boolean("refine", e.refine);
                w.num("resolution", e.resolution);
                w.end();
            }
            break;
        }
        case ExperimentKind::slowflow: {
            const auto& e = s.slowflow;
            w.num("t_end", e.t_end);
            w.num("dt", e.dt);
            w.begin("initial");
            w.num("U", e.initial.U);
            w.num("V", e.initial.V);
            w.end();
            w.nums("gain_pumps", e.gain_pumps);
            w.nums("gain_deltas", e.gain_deltas);
            if (e.resonator) write_resonator(w, *e.resonator);
            w.integer("loop_points", e.loop_points);
            w.num("loop_span", e.loop_span);
            break;
        }
        case ExperimentKind::coexist: {
            const auto& e = s.coexist;
            write_resonator(w, e.resonator);
            w.ints("orders", e.orders);
            w.nums("pumps", e.pumps);
            w.num("omega_p", e.omega_p);
            w.integer("points", e.points);
            w.num("span", e.span);
            break;
        }
    }
    w.end();
    return w.finish();
}

}  // namespace hypar
