#pragma once

// Circuit model of the 1.5 degree-of-freedom resonator: a series-resonant
// photonic branch in parallel with a dissipative branch holding a cubic
// nonlinear capacitance. Everything is in normalized units; the drive
// voltage enters both branches directly.
//
//   q_x'' + 2 gamma_x q_x' + omega_x^2 q_x + 2 gamma_c q_p' = V(t)
//   2 gamma_p q_p' + eta q_p^3 + 2 gamma_c q_x'             = V(t)

#include <complex>
#include <string_view>
#include <vector>

namespace hypar {

struct CircuitParams {
    double gamma_x = 0.01;  ///< photonic damping rate
    double omega_x = 1.0;   ///< photonic mode angular frequency
    double gamma_c = 0.0;   ///< branch coupling rate
    double gamma_p = 1.0;   ///< material-branch damping rate, must be > 0
    double eta = 0.0;       ///< cubic nonlinearity coefficient

    /// Throws DomainError naming the first violated invariant.
    void validate() const;

    /// gamma_x * gamma_p > gamma_c^2: the dissipation form is positive
    /// definite and the undriven circuit relaxes to rest.
    [[nodiscard]] bool passive() const noexcept { return gamma_x * gamma_p > gamma_c * gamma_c; }

    /// Small-signal damping of the photonic mode with the nonlinear branch
    /// unsaturated (eta q_p^3 -> 0).
    [[nodiscard]] double linear_damping() const noexcept {
        return gamma_x - gamma_c * gamma_c / gamma_p;
    }

    friend bool operator==(const CircuitParams&, const CircuitParams&) = default;
};

struct Tone {
    double amplitude = 0.0;  ///< V_0
    double omega = 1.0;      ///< angular frequency
    double phase = 0.0;      ///< radians; the tone is V_0 sin(omega t + phase)

    friend bool operator==(const Tone&, const Tone&) = default;
};

/// Sum of sinusoidal tones. An empty tone list is zero drive.
struct DriveSpec {
    std::vector<Tone> tones;

    DriveSpec() = default;
    explicit DriveSpec(std::vector<Tone> t) : tones(std::move(t)) {}
    static DriveSpec single(double amplitude, double omega, double phase = 0.0) {
        return DriveSpec({Tone{amplitude, omega, phase}});
    }

    void validate() const;
    [[nodiscard]] double voltage(double t) const noexcept;
    [[nodiscard]] double max_omega() const noexcept;
    [[nodiscard]] bool empty() const noexcept { return tones.empty(); }

    friend bool operator==(const DriveSpec&, const DriveSpec&) = default;
};

struct StateVector {
    double q_x = 0.0;
    double v_x = 0.0;
    double q_p = 0.0;

    [[nodiscard]] bool finite() const noexcept;
    [[nodiscard]] double norm() const noexcept;

    friend StateVector operator+(const StateVector& a, const StateVector& b) {
        return {a.q_x + b.q_x, a.v_x + b.v_x, a.q_p + b.q_p};
    }
    friend StateVector operator*(double s, const StateVector& a) {
        return {s * a.q_x, s * a.v_x, s * a.q_p};
    }
    friend bool operator==(const StateVector&, const StateVector&) = default;
};

struct EnergyBreakdown {
    double kinetic = 0.0;
    double potential = 0.0;
    double quartic = 0.0;
    double total = 0.0;
};

/// Time derivative (v_x, a_x, w_p) of the state. Throws DomainError on
/// non-finite state, time or parameters.
[[nodiscard]] StateVector eval_rhs(const StateVector& state, double t, const CircuitParams& params,
                                   const DriveSpec& drive);

/// Same as eval_rhs but with the drive voltage already evaluated and no
/// validation; used in integrator inner loops.
[[nodiscard]] inline StateVector eval_rhs_unchecked(const StateVector& s, double v_inp,
                                                    const CircuitParams& p) noexcept {
    const double w_p = (v_inp - p.eta * s.q_p * s.q_p * s.q_p - 2.0 * p.gamma_c * s.v_x) /
                       (2.0 * p.gamma_p);
    const double a_x = v_inp - 2.0 * p.gamma_x * s.v_x - p.omega_x * p.omega_x * s.q_x -
                       2.0 * p.gamma_c * w_p;
    return {s.v_x, a_x, w_p};
}

/// Stored energy in normalized form (quartic term of the nonlinear branch
/// included, the linear capacitance of that branch dropped).
[[nodiscard]] EnergyBreakdown energy(const StateVector& state, const CircuitParams& params);

struct LinearResponse {
    std::complex<double> q_x;
    std::complex<double> q_p;
};

/// Exact frequency response of the linearized circuit (eta ignored) per unit
/// drive V e^{i omega t}. Throws DomainError for omega <= 0.
[[nodiscard]] LinearResponse linear_transfer(const CircuitParams& params, double omega);

/// Observable derived from the state. `total_current` is the sum of branch
/// currents, i.e. the signal transmitted past the resonator.
enum class Signal { q_x, v_x, q_p, total_charge, total_current };

[[nodiscard]] double observe(Signal signal, const StateVector& state, double v_inp,
                             const CircuitParams& params) noexcept;
[[nodiscard]] std::string_view to_string(Signal signal) noexcept;
/// Throws DomainError for unknown names.
[[nodiscard]] Signal signal_from_string(std::string_view name);

/// Linear-response counterpart of `observe` (per unit drive at omega).
[[nodiscard]] std::complex<double> linear_observe(Signal signal, const CircuitParams& params,
                                                  double omega);

}  // namespace hypar
