#pragma once

// Periodic steady states of the circuit as truncated Fourier series
//   q(t) = Re sum_{k=0}^{N} c_k e^{i k omega t}
// and the linearized (harmonic transfer matrix) response about them.

#include <array>
#include <complex>
#include <optional>
#include <vector>

#include "hypar/model.hpp"
#include "hypar/slowflow.hpp"

namespace hypar {

struct FourierSolution {
    double omega = 1.0;
    int N = 0;
    Tone drive;
    std::vector<std::complex<double>> q_x;  ///< c_0 .. c_N, c_0 real
    std::vector<std::complex<double>> q_p;
    double residual = 0.0;   ///< projected residual norm relative to the drive amplitude
    bool converged = false;
    int iterations = 0;
    double condition = 0.0;  ///< 2-norm condition number of the final Jacobian

    [[nodiscard]] double qx_at(double t) const noexcept;
    [[nodiscard]] double qp_at(double t) const noexcept;
    [[nodiscard]] double vx_at(double t) const noexcept;
    [[nodiscard]] StateVector state_at(double t) const noexcept;
};

struct HbOptions {
    int max_iterations = 50;
    double fd_step = 1e-7;          ///< relative forward-difference step
    double condition_limit = 1e12;  ///< above this the Jacobian counts as singular
    bool homotopy = true;           ///< retry failed cold starts along the drive amplitude
};

/// Newton solve of the collocation residual (4(N+1) phase points, projected
/// on harmonics 0..N). Without an initial guess the linear response is used.
/// When eta = 0 the material-charge DC term is undetermined and pinned to 0.
[[nodiscard]] FourierSolution hb_solve(const CircuitParams& params, const DriveSpec& drive, int N,
                                       double tol = 1e-10,
                                       const std::optional<FourierSolution>& guess = std::nullopt,
                                       const HbOptions& opts = {});

/// Projected residual of `sol` evaluated on `points` collocation points,
/// relative to the drive amplitude.
[[nodiscard]] double hb_residual(const CircuitParams& params, const FourierSolution& sol,
                                 int points);

struct ContinuationResult {
    std::vector<FourierSolution> branch;  ///< in path order; drive.amplitude is the parameter
    std::vector<double> folds;            ///< amplitudes where the path turns
    bool arclength_used = false;
};

/// Warm-started hb_solve along a monotone amplitude schedule (tone frequency
/// and phase from `tone`). A failed step switches to pseudo-arclength
/// continuation, which follows the branch through folds until the schedule
/// end is passed.
[[nodiscard]] ContinuationResult continuation(const CircuitParams& params, const Tone& tone,
                                              const std::vector<double>& amplitudes, int N,
                                              double tol = 1e-10);

struct ProbeResult {
    std::complex<double> ratio;  ///< response / input at the probe frequency
    double rcond = 0.0;          ///< reciprocal condition estimate of the transfer matrix
    bool near_oscillation = false;
    FourierSolution pump;
    std::vector<std::complex<double>> x_sidebands;  ///< X_m, m = -N_mix..N_mix, per unit input
};

/// Small-probe transmission under a pump: pump-only hb_solve, then the
/// harmonic transfer matrix of the linearized circuit truncated at +-N_mix
/// pump sidebands.
[[nodiscard]] ProbeResult probe_transmission(const CircuitParams& params, const Tone& pump,
                                             const Tone& probe, int N_pump, int N_mix,
                                             Signal signal = Signal::q_x);

/// Floquet multipliers of the pump orbit from the variational equations over
/// one drive period, sorted by decreasing modulus.
[[nodiscard]] std::array<std::complex<double>, 3> floquet_multipliers(const CircuitParams& params,
                                                                     const FourierSolution& orbit);

struct CircuitLoopOptions {
    int N_mix = 8;
    int points = 2001;  ///< contour samples over one pump-frequency period
};

/// Generalized Nyquist analysis of the circuit linearized about the pump
/// orbit, with the loop broken where the photonic current drives the
/// material branch. Encirclements count the winding of det(I + T) over the
/// contour; margins come from the characteristic loci of T.
[[nodiscard]] NyquistResult circuit_loop(const CircuitParams& params, const FourierSolution& orbit,
                                         const CircuitLoopOptions& opts = {});

struct GainCurve {
    std::vector<double> delta;
    std::vector<double> gain;  ///< G_s, per unit q_x0
    double pump = 0.0;         ///< V_0
    Quadratures fixed_point;
};

/// Small-signal quadrature gain of the slow flow about its pumped fixed point
/// (lowest-amplitude stable one) at relative frequencies `deltas`, one curve
/// per pump amplitude.
[[nodiscard]] std::vector<GainCurve> small_signal_gain(const SlowFlowParams& sf,
                                                       const std::vector<double>& pumps,
                                                       const std::vector<double>& deltas);

}  // namespace hypar
