#include "hypar/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hypar/errors.hpp"

namespace hypar {

namespace {

void require_finite(double value, const char* name) {
    if (!std::isfinite(value)) {
        throw DomainError(std::string(name) + " must be finite");
    }
}

}  // namespace

void CircuitParams::validate() const {
    require_finite(gamma_x, "gamma_x");
    require_finite(omega_x, "omega_x");
    require_finite(gamma_c, "gamma_c");
    require_finite(gamma_p, "gamma_p");
    require_finite(eta, "eta");
    if (gamma_x <= 0.0) throw DomainError("gamma_x must be > 0");
    if (gamma_p == 0.0) {
        throw DomainError("gamma_p = 0 makes the material branch algebraic; must be > 0");
    }
    if (gamma_p < 0.0) throw DomainError("gamma_p must be > 0");
    if (omega_x <= 0.0) throw DomainError("omega_x must be > 0");
    if (gamma_c < 0.0) throw DomainError("gamma_c must be >= 0");
    if (eta < 0.0) throw DomainError("eta must be >= 0");
}

void DriveSpec::validate() const {
    for (const auto& tone : tones) {
        require_finite(tone.amplitude, "tone amplitude");
        require_finite(tone.omega, "tone omega");
        require_finite(tone.phase, "tone phase");
        if (tone.amplitude < 0.0) throw DomainError("tone amplitude must be >= 0");
        if (tone.omega <= 0.0) throw DomainError("tone omega must be > 0");
    }
}

double DriveSpec::voltage(double t) const noexcept {
    double v = 0.0;
    for (const auto& tone : tones) v += tone.amplitude * std::sin(tone.omega * t + tone.phase);
    return v;
}

double DriveSpec::max_omega() const noexcept {
    double w = 0.0;
    for (const auto& tone : tones) w = std::max(w, tone.omega);
    return w;
}

bool StateVector::finite() const noexcept {
    return std::isfinite(q_x) && std::isfinite(v_x) && std::isfinite(q_p);
}

double StateVector::norm() const noexcept { return std::sqrt(q_x * q_x + v_x * v_x + q_p * q_p); }

StateVector eval_rhs(const StateVector& state, double t, const CircuitParams& params,
                     const DriveSpec& drive) {
    if (!state.finite()) throw DomainError("eval_rhs: non-finite state");
    require_finite(t, "t");
    params.validate();
    drive.validate();
    return eval_rhs_unchecked(state, drive.voltage(t), params);
}

EnergyBreakdown energy(const StateVector& state, const CircuitParams& params) {
    if (!state.finite()) throw DomainError("energy: non-finite state");
    EnergyBreakdown e;
    e.kinetic = 0.5 * state.v_x * state.v_x;
    e.potential = 0.5 * params.omega_x * params.omega_x * state.q_x * state.q_x;
    const double q2 = state.q_p * state.q_p;
    e.quartic = 0.25 * params.eta * q2 * q2;
    e.total = e.kinetic + e.potential + e.quartic;
    return e;
}

LinearResponse linear_transfer(const CircuitParams& params, double omega) {
    if (!(omega > 0.0) || !std::isfinite(omega)) {
        throw DomainError("linear_transfer: omega must be finite and > 0");
    }
    using namespace std::complex_literals;
    const double gx = params.gamma_x;
    const double gc = params.gamma_c;
    const double gp = params.gamma_p;
    const double wx = params.omega_x;
    // Eliminating q_p from the frequency-domain pair leaves a single
    // resonator with damping gamma_x - gamma_c^2/gamma_p and forcing scaled
    // by (1 - gamma_c/gamma_p).
    const std::complex<double> denom =
        -omega * omega + 2.0i * gx * omega + wx * wx - 2.0i * (gc * gc / gp) * omega;
    LinearResponse r;
    r.q_x = (1.0 - gc / gp) / denom;
    r.q_p = (1.0 - 2.0i * gc * omega * r.q_x) / (2.0i * gp * omega);
    return r;
}

double observe(Signal signal, const StateVector& s, double v_inp,
               const CircuitParams& p) noexcept {
    switch (signal) {
        case Signal::q_x:
            return s.q_x;
        case Signal::v_x:
            return s.v_x;
        case Signal::q_p:
            return s.q_p;
        case Signal::total_charge:
            return s.q_x + s.q_p;
        case Signal::total_current:
            return s.v_x + eval_rhs_unchecked(s, v_inp, p).q_p;
    }
    return 0.0;
}

std::string_view to_string(Signal signal) noexcept {
    switch (signal) {
        case Signal::q_x:
            return "q_x";
        case Signal::v_x:
            return "v_x";
        case Signal::q_p:
            return "q_p";
        case Signal::total_charge:
            return "total_charge";
        case Signal::total_current:
            return "total_current";
    }
    return "?";
}

Signal signal_from_string(std::string_view name) {
    for (Signal s : {Signal::q_x, Signal::v_x, Signal::q_p, Signal::total_charge,
                     Signal::total_current}) {
        if (to_string(s) == name) return s;
    }
    throw DomainError("unknown signal '" + std::string(name) + "'");
}

std::complex<double> linear_observe(Signal signal, const CircuitParams& params, double omega) {
    using namespace std::complex_literals;
    const LinearResponse r = linear_transfer(params, omega);
    switch (signal) {
        case Signal::q_x:
            return r.q_x;
        case Signal::v_x:
            return 1.0i * omega * r.q_x;
        case Signal::q_p:
            return r.q_p;
        case Signal::total_charge:
            return r.q_x + r.q_p;
        case Signal::total_current:
            return 1.0i * omega * (r.q_x + r.q_p);
    }
    return 0.0;
}

}  // namespace hypar
