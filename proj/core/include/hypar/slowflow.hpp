#pragma once

// Rotating-wave reduction of the antiresonant (flux) subsystem. With
// Phi = U cos(omega_R t) + V sin(omega_R t) the quadrature equations read
//
//   V' = -[Omega_a - mu (3V^2 - U^2)] U - delta_a [1 - chi (U^2 + V^2)] V
//        + k_v V_0 / (2 omega_R) sin(Delta_p t) + k_p omega_x q_x0 / (2 omega_R) sin(Delta_x t + phi)
//   U' = -delta_a [1 - chi (U^2 + V^2)] U + [Omega_a - mu (3U^2 - V^2)] V
//        - k_v V_0 / (2 omega_R) cos(Delta_p t) - k_p omega_x q_x0 / (2 omega_R) cos(Delta_x t + phi)
//
// In complex form W = V + iU:
//   W' = (-delta_a + i Omega_a) W + delta_a chi |W|^2 W + i mu conj(W)^3
//        - i a e^{i Delta_p t} - i b e^{i (Delta_x t + phi)}

#include <array>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "hypar/model.hpp"
#include "hypar/timedomain.hpp"

namespace hypar {

struct FrameSpec {
    double omega_R = 1.0;
    int n = 2;
    double Delta_x = 0.0;
    double Delta_p = 0.0;
    double scale_ratio = 0.0;  ///< omega_R / max(|Delta_x|, |Delta_p|)
    bool scale_warning = false;  ///< scale_ratio below 1000

    [[nodiscard]] double omega_p() const noexcept { return omega_R + Delta_p; }
    [[nodiscard]] double omega_x() const noexcept { return omega_R + Delta_x; }
};

/// n >= 2: Delta_x = (omega_p - omega_x)/(n - 1), omega_R = omega_x - Delta_x,
/// Delta_p = n Delta_x. n = 0 is the degenerate frame omega_R = omega_p,
/// Delta_p = 0, Delta_x = omega_x - omega_p. n = 1 and n < 0 are rejected.
[[nodiscard]] FrameSpec build_frame(double omega_p, double omega_x, int n);

struct SlowFlowParams {
    double Omega_a = 0.0;
    double delta_a = 0.01;
    double chi = 0.0;
    double mu = 0.0;
    double k_v = 1.0;
    double k_p = 0.0;
    double omega_x = 1.0;   ///< photonic frequency entering the q_x0 forcing gain
    FrameSpec frame;
    double V_0 = 0.0;
    double q_x0 = 0.0;
    double phi_sig = 0.0;
    bool mu_relation = false;  ///< mu = chi omega_a^2 / omega holds by construction

    void validate() const;
    [[nodiscard]] double pump_force() const noexcept { return k_v * V_0 / (2.0 * frame.omega_R); }
    [[nodiscard]] double signal_gain() const noexcept {
        return k_p * omega_x / (2.0 * frame.omega_R);
    }
    /// Frame-detuned rate from an antiresonance frequency.
    static double frame_detuning(double omega_a, double omega_R) noexcept {
        return (omega_a * omega_a - omega_R * omega_R) / (2.0 * omega_R);
    }
};

struct DerivedCoefficients {
    double delta_a = 0.0;
    double omega_a2 = 0.0;
    double k_v = 0.0;
    double k_p = 0.0;
    double chi = 0.0;
    double mu = 0.0;
};

/// Coefficients of the flux equation and the slow-flow nonlinearity from the
/// circuit scales. Z_i is taken as an opaque positive scale and the
/// evaluation frequency omega is explicit.
[[nodiscard]] DerivedCoefficients derive_coefficients(double L_p, double R_x, double Z_i,
                                                      double eta, double phi0, double omega);

/// SlowFlowParams built from derived coefficients in a given frame.
[[nodiscard]] SlowFlowParams make_slowflow(const DerivedCoefficients& c, const FrameSpec& frame,
                                           double omega_x, double V_0, double q_x0 = 0.0,
                                           double phi_sig = 0.0);

struct RegimeReport {
    bool valid = false;
    double damping_ratio = 0.0;  ///< delta_a / (chi Upsilon^2), accepted in [0.01, 100]
    double frame_ratio = 0.0;    ///< omega_R / (chi Upsilon^2), must exceed 100
    std::string reason;
};

[[nodiscard]] RegimeReport check_regime(const SlowFlowParams& sf, double upsilon_scale);

struct Quadratures {
    double U = 0.0;
    double V = 0.0;
    friend bool operator==(const Quadratures&, const Quadratures&) = default;
};

[[nodiscard]] Quadratures slowflow_rhs(const Quadratures& q, double t, const SlowFlowParams& sf);
/// Analytic Jacobian d(U', V')/d(U, V) of slowflow_rhs (the forcing is
/// state independent), row-major.
[[nodiscard]] std::array<double, 4> slowflow_jacobian(const Quadratures& q,
                                                      const SlowFlowParams& sf);

/// Integrates the slow flow, sampling every dt from 0 to t_end.
struct SlowTrajectory {
    std::vector<double> times;
    std::vector<Quadratures> states;
};
[[nodiscard]] SlowTrajectory integrate_slowflow(const SlowFlowParams& sf, Quadratures q0,
                                                double t_end, double dt, double rel_tol = 1e-10,
                                                double abs_tol = 1e-13);

enum class Classification { stable_node, stable_focus, unstable_node, unstable_focus, saddle, center };
[[nodiscard]] std::string_view to_string(Classification c) noexcept;

struct NyquistResult {
    int n = 0;
    int encirclements = 0;
    bool oscillation = false;
    double gain_margin_db = 0.0;   ///< -20 log10 |T| at the worst phase crossover
    double phase_margin_deg = 0.0; ///< angular distance from -1 at the worst |T| = 1 crossing
    bool has_phase_crossover = false;
    bool has_gain_crossover = false;
    double peak_loop_gain = 0.0;
    std::vector<double> delta;     ///< contour samples (relative frequency)
    std::vector<std::complex<double>> loop;  ///< open-loop transfer on the contour
};

struct StabilityReport {
    Quadratures fixed_point;
    std::complex<double> eig1, eig2;
    Classification classification = Classification::stable_focus;
    std::vector<NyquistResult> nyquist;
};

/// Autonomous slow flow in the frame co-rotating with the pump
/// (W = Z e^{i Delta_p t}); for n != 0 the rotating conj(W)^3 term is dropped
/// by averaging. The q_x0 forcing is excluded.
[[nodiscard]] Quadratures pump_frame_rhs(const Quadratures& z, const SlowFlowParams& sf);
/// Analytic Jacobian d(U', V')/d(U, V) of pump_frame_rhs, row-major.
[[nodiscard]] std::array<double, 4> pump_frame_jacobian(const Quadratures& z,
                                                        const SlowFlowParams& sf);

struct FixedPointSearch {
    double radius = 0.0;  ///< 0 = automatic
    int grid = 9;         ///< seeds per axis
};

/// Fixed points of the pump-frame autonomous flow, deduplicated (distance
/// > 1e-6) and classified from the analytic Jacobian.
[[nodiscard]] std::vector<StabilityReport> fixed_points(const SlowFlowParams& sf,
                                                        const FixedPointSearch& search = {});

struct Resonator {
    double gamma_x = 0.01;
    double omega_x = 1.0;
    double kappa = 0.01;  ///< coupling gain of the single-pole quadrature response
};

struct LoopOptions {
    int ladder = 3;        ///< half-width of the rotating conj(W)^3 sideband ladder (n != 0)
    int refine = 40;       ///< bisection steps at |T| = 1 crossings
};

/// Nyquist analysis of T(Delta) = -G(Delta) H_res(Delta) with
/// H_res = kappa / (gamma_x + i (Delta - Delta_x)) and G the complex q_x0-port
/// gain of the slow flow linearized about the stable pumped fixed point.
/// The Delta grid must resolve the resonance (>= 10 points per gamma_x within
/// 5 gamma_x of Delta_x), else ResolutionError.
[[nodiscard]] StabilityReport loop_analysis(const SlowFlowParams& sf, const Resonator& res, int n,
                                            const std::vector<double>& delta_grid,
                                            const LoopOptions& opts = {});

/// Complex port gain of the linearized pump-frame flow at relative frequency
/// nu (pump frame), per unit q_x0 forcing: returns the response of V + iU and
/// the quadrature magnitude sqrt(|u|^2 + |v|^2) / q_x0.
struct PortGain {
    std::complex<double> z;
    double magnitude = 0.0;
};
[[nodiscard]] PortGain port_gain(const SlowFlowParams& sf, const Quadratures& fixed_point,
                                 double nu, int ladder = 0);

struct CoexistenceCell {
    double V_0 = 0.0;
    std::vector<int> oscillating;
    std::vector<NyquistResult> margins;
};

/// loop_analysis for each (n, V_0) cell. The Delta grid for each n is built
/// around its Delta_x with `points` samples over +-`span` gamma_x.
[[nodiscard]] std::vector<CoexistenceCell> coexistence_scan(const SlowFlowParams& base,
                                                            const Resonator& res,
                                                            const std::vector<int>& n_range,
                                                            const std::vector<double>& pumps,
                                                            double omega_p, int points = 2001,
                                                            double span = 40.0,
                                                            int threads = 0);

/// Slow-flow reduction of the circuit itself with Phi identified with q_x:
/// Omega_a from omega_x, delta_a = gamma_x - gamma_c^2 / gamma_p,
/// k_v = 1 - gamma_c / gamma_p, and chi, mu supplied by the caller.
[[nodiscard]] SlowFlowParams reduce_circuit(const CircuitParams& params, const FrameSpec& frame,
                                            double V_0, double chi, double mu);

}  // namespace hypar
