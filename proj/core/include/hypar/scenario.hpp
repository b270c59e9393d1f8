#pragma once

// Scenario documents (YAML, `schema: 1`):
//
//   schema: 1
//   kind: simulate | hb | slowflow | sweep | spectrum | probe | coexist
//   output: <directory>            # optional, --out overrides
//   model: {gamma_x, omega_x, gamma_c, gamma_p, eta}
//   reduced: {Omega_a, delta_a, chi, mu, k_v, k_p, omega_x, V_0, q_x0, phi_sig,
//             frame: {omega_p, omega_x, n}}
//   drive: {tones: [{amplitude, omega, phase}, ...]}
//   experiment: {...}              # settings of the selected kind
//
// Unknown keys are errors. Blocks the kind does not use are errors too.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hypar/model.hpp"
#include "hypar/slowflow.hpp"
#include "hypar/spectral.hpp"
#include "hypar/sweep.hpp"
#include "hypar/timedomain.hpp"

namespace hypar {

enum class ExperimentKind { simulate, hb, slowflow, sweep, spectrum, probe, coexist };
[[nodiscard]] std::string_view to_string(ExperimentKind k) noexcept;
[[nodiscard]] std::optional<ExperimentKind> kind_from_string(std::string_view name) noexcept;

struct FrameInput {
    double omega_p = 1.0;
    double omega_x = 1.0;
    int n = 2;
    friend bool operator==(const FrameInput&, const FrameInput&) = default;
};

/// Slow-flow model; the frame is rebuilt from `frame` by params().
struct ReducedModel {
    SlowFlowParams base;  ///< every field except frame
    FrameInput frame;
    [[nodiscard]] SlowFlowParams params() const;
};

struct SettleSettings {
    long max_periods = 4000;
    double criterion_tol = 1e-9;
    SettleOptions options;
};

struct SimulateSettings {
    double t_end = 1000.0;
    double sample_dt = 0.1;
    double rel_tol = 1e-10;
    double abs_tol = 1e-13;
    StateVector initial;
    double spectrum_from = 0.0;  ///< spectrum of the samples with t >= spectrum_from
    Signal signal = Signal::q_x;
    Window window = Window::blackman_nuttall;
};

struct HbSettings {
    int harmonics = 9;
    double tol = 1e-10;
    std::vector<double> amplitudes;  ///< non-empty: continuation in the tone amplitude
    bool stability = false;          ///< Floquet multipliers and circuit Nyquist loop
};

struct SpectrumSettings {
    SettleSettings settle;
    Signal signal = Signal::q_x;
    Window window = Window::blackman_nuttall;
    double peak_floor = 1e-8;
    std::optional<double> omega_x_eff;
    bool free_running = false;  ///< omega_x_eff from the undriven oscillation
    double band_lo = 0.0;
    double band_hi = 0.0;
};

struct ProbeSettings {
    Tone pump{0.3, 1.1, 0.0};
    double probe_amplitude = 1e-6;
    double probe_phase = 0.0;
    Axis probe_omega{0.9, 1.1, 41, Spacing::linear};
    int N_pump = 9;
    int N_mix = 10;
    Signal signal = Signal::q_x;
};

struct SweepSettings {
    SweepPlan plan;
    bool free_running = false;  ///< omega_x_eff from the undriven oscillation
    std::optional<double> threshold_floor;
    int threshold_column = 0;
    bool refine = true;
    double resolution = 0.01;
};

struct SlowflowSettings {
    double t_end = 2000.0;
    double dt = 1.0;
    Quadratures initial;
    std::vector<double> gain_pumps;
    std::vector<double> gain_deltas;
    std::optional<Resonator> resonator;  ///< enables loop_analysis
    int loop_points = 2001;
    double loop_span = 40.0;
};

struct CoexistSettings {
    Resonator resonator;
    std::vector<int> orders{2, 3};
    std::vector<double> pumps;
    double omega_p = 1.02;
    int points = 2001;
    double span = 40.0;
};

struct Scenario {
    int schema = 1;
    ExperimentKind kind = ExperimentKind::simulate;
    std::string output;
    std::optional<CircuitParams> model;
    std::optional<ReducedModel> reduced;
    std::optional<DriveSpec> drive;

    SimulateSettings simulate;
    HbSettings hb;
    SpectrumSettings spectrum;
    ProbeSettings probe;
    SweepSettings sweep;
    SlowflowSettings slowflow;
    CoexistSettings coexist;

    [[nodiscard]] bool deterministic() const noexcept { return true; }
};

/// Parses and validates a document. Throws ConfigError carrying the dotted
/// key path and, where known, the line and column.
[[nodiscard]] Scenario load_scenario(std::string_view text);
[[nodiscard]] Scenario load_scenario_file(const std::string& path);

/// Canonical document with every default written out; numbers in shortest
/// round-trip form. load_scenario(serialize(s)) reproduces s.
[[nodiscard]] std::string serialize(const Scenario& s);

/// Semantic checks of an in-memory scenario (load_scenario runs these).
void validate(const Scenario& s);

}  // namespace hypar
