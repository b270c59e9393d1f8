#pragma once

#include <optional>
#include <vector>

#include "hypar/model.hpp"

namespace hypar {

struct Trajectory {
    std::vector<double> times;
    std::vector<StateVector> states;
    CircuitParams params_used;
    DriveSpec drive_used;
    long steps = 0;            ///< accepted integrator steps
    bool stiff_warning = false;  ///< step count per drive period exceeded the guard
};

/// Integrates the circuit from t = 0 to t_end. When `sample_times` is empty
/// every accepted step is recorded (plus t = 0); otherwise the dense output
/// is evaluated at the given instants, which must be increasing and lie in
/// [0, t_end]. Throws DivergenceError when the state norm exceeds 1e12.
[[nodiscard]] Trajectory integrate(const CircuitParams& params, const DriveSpec& drive,
                                   const StateVector& state0, double t_end, double rel_tol,
                                   double abs_tol, const std::vector<double>& sample_times = {});

/// Uniformly sampled steady-state record.
struct SteadySegment {
    double t0 = 0.0;
    double dt = 0.0;
    std::vector<StateVector> states;
    std::vector<double> v_inp;  ///< drive voltage at each sample
    double sample_rate = 0.0;   ///< samples per unit time
    double base_period = 0.0;
    int samples_per_period = 0;
    bool converged = false;
    bool quasi_periodic = false;
    double residual = 0.0;      ///< last period-to-period relative RMS change
    double envelope_omega = 0.0;  ///< envelope angular frequency when quasi-periodic
    long periods_run = 0;         ///< settling periods before recording
    CircuitParams params_used;
    DriveSpec drive_used;

    [[nodiscard]] std::size_t size() const noexcept { return states.size(); }
    [[nodiscard]] double time(std::size_t i) const noexcept {
        return t0 + dt * static_cast<double>(i);
    }
    [[nodiscard]] std::vector<double> signal(Signal s) const;
    /// Final state of the record, usable as a warm start for a neighbouring run.
    [[nodiscard]] StateVector last_state() const { return states.back(); }
};

struct SettleOptions {
    int samples_per_period = 32;
    int record_periods = 1;     ///< base periods in the returned record
    int min_periods = 2;
    double rel_tol = 1e-10;     ///< integrator tolerances
    double abs_tol = 1e-13;
    /// Longest admissible base period, in units of the shortest tone period,
    /// when searching for a common period of a multi-tone drive.
    int max_period_ratio = 4096;
    /// Envelope check on non-converged runs; the final `envelope_window`
    /// base periods are examined.
    bool detect_quasi_periodic = true;
    int envelope_window = 0;    ///< 0 = use the recorded periods
    double quasi_tol = 2e-3;
};

/// Base period of a drive: the common period of all tones when their
/// frequencies are commensurate within `max_period_ratio` shortest periods,
/// otherwise the period of the strongest tone. `commensurate` reports which.
[[nodiscard]] double base_period(const DriveSpec& drive, int max_period_ratio,
                                 bool* commensurate = nullptr);

/// Integrates whole base periods until the period-to-period RMS change of
/// the sampled state, relative to its RMS, is below `criterion_tol`, or
/// `max_periods` have elapsed (converged = false). Then records
/// `record_periods` further periods. Non-converged runs are tested for a
/// periodic envelope of the stroboscopic state sequence (quasi_periodic).
[[nodiscard]] SteadySegment settle(const CircuitParams& params, const DriveSpec& drive,
                                   const StateVector& state0, long max_periods,
                                   double criterion_tol, const SettleOptions& opts = {});

struct EnvelopeSeries {
    std::vector<double> times;
    std::vector<double> U;
    std::vector<double> V;
    double omega_R = 0.0;
    double lp_bandwidth = 0.0;
};

/// Mixes the selected signal with 2cos and 2sin at omega_R and low-pass
/// filters it with a zero-phase second-order Butterworth section, so that
/// the signal is approximately U cos(omega_R t) + V sin(omega_R t). The first
/// and last few filter time constants are affected by the record edges.
[[nodiscard]] EnvelopeSeries demodulate(const SteadySegment& segment, Signal signal,
                                        double omega_R, double lp_bandwidth);
[[nodiscard]] EnvelopeSeries demodulate(const std::vector<double>& samples, double t0, double dt,
                                        double omega_R, double lp_bandwidth);

/// Zero-phase low-pass filter with the same design as demodulate; exposed for
/// reuse and testing. `cutoff` is an angular frequency.
[[nodiscard]] std::vector<double> lowpass_filtfilt(const std::vector<double>& x, double dt,
                                                   double cutoff);

}  // namespace hypar
