#pragma once

#include <complex>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "hypar/model.hpp"
#include "hypar/timedomain.hpp"

namespace hypar {

enum class Window { rectangular, hann, blackman_nuttall };

[[nodiscard]] std::string_view to_string(Window w) noexcept;
[[nodiscard]] Window window_from_string(std::string_view name);

/// One-sided amplitude spectrum. A sinusoid of amplitude A centred on bin k
/// reports |amp[k]| = A; DC reports its mean value.
struct Spectrum {
    std::vector<double> omega;               ///< bin angular frequencies
    std::vector<std::complex<double>> amp;   ///< window-gain compensated amplitudes
    Window window = Window::blackman_nuttall;
    std::size_t n_samples = 0;
    double sample_rate = 0.0;  ///< samples per unit time
    double bin_width = 0.0;    ///< 2 pi sample_rate / N
    double rbw = 0.0;          ///< equivalent noise bandwidth (angular)
    double windowed_power = 0.0;  ///< N sum (w x)^2 / (sum w)^2

    [[nodiscard]] std::size_t size() const noexcept { return amp.size(); }
    [[nodiscard]] double power(std::size_t k) const noexcept { return std::norm(amp[k]); }
    /// sum_k c_k |amp_k|^2 with c = 1 for DC (and Nyquist), 1/2 otherwise.
    /// Equals windowed_power by Parseval.
    [[nodiscard]] double parseval_sum() const noexcept;
};

/// Windowed DFT of uniformly spaced samples (length >= 16).
[[nodiscard]] Spectrum spectrum(const std::vector<double>& samples, double dt,
                                Window window = Window::blackman_nuttall);
/// Same, with explicit sample instants; throws DomainError unless the
/// spacing is constant within 1 part in 1e9.
[[nodiscard]] Spectrum spectrum(const std::vector<double>& times,
                                const std::vector<double>& samples,
                                Window window = Window::blackman_nuttall);
[[nodiscard]] Spectrum spectrum(const SteadySegment& segment,
                                Window window = Window::blackman_nuttall,
                                Signal signal = Signal::q_x);

struct Peak {
    double omega = 0.0;
    double power = 0.0;      ///< interpolated |amplitude|^2
    std::size_t bin = 0;
};

/// Local maxima above floor * max power, refined by a parabola through the
/// log-power of the three bins around each maximum. DC and Nyquist bins are
/// skipped. Sorted by frequency.
[[nodiscard]] std::vector<Peak> find_peaks(const Spectrum& spec, double floor = 1e-8);

struct CombOptions {
    /// Only peaks with omega in (band_lo, band_hi) count as comb lines.
    /// Zero values select (omega_p / 2, 3 omega_p / 2).
    double band_lo = 0.0;
    double band_hi = 0.0;
};

struct CombReport {
    std::vector<Peak> peaks;   ///< comb lines, sorted by frequency
    double carrier = 0.0;      ///< line nearest the pump
    double carrier_power = 0.0;
    double spacing = 0.0;      ///< mean adjacent separation
    double equidistance_residual = 0.0;  ///< max |gap - spacing| / spacing
    std::optional<int> n;      ///< order from the comb spacing relation
    double n_residual = 0.0;   ///< |n_real - n|
    bool n_reliable = false;   ///< n_residual <= 0.2
    std::map<int, double> sidebands;  ///< index from the carrier -> power

    [[nodiscard]] std::size_t lines() const noexcept { return peaks.size(); }
    /// Mean power of the +1 and -1 sidebands that are present (0 when none).
    [[nodiscard]] double first_sideband_power() const;
};

/// Comb structure of a peak list. Throws InsufficientCombError for fewer than
/// three lines in the band. With omega_x given, n = round(|omega_p - omega_x| /
/// spacing + 1).
[[nodiscard]] CombReport comb_metrics(const std::vector<Peak>& peaks, double omega_p,
                                      std::optional<double> omega_x = std::nullopt,
                                      const CombOptions& opts = {});

/// Complex ratio of the output signal at the chosen tone frequency (single
/// bin projection over the whole record) to that tone's input phasor, in the
/// same convention as linear_transfer.
[[nodiscard]] std::complex<double> transmission(const SteadySegment& segment,
                                                const DriveSpec& drive, std::size_t tone_index,
                                                Signal signal = Signal::q_x);

/// Complex amplitude c such that x(t) ~ Re(c e^{i omega t}) over the record.
[[nodiscard]] std::complex<double> project_tone(const std::vector<double>& samples, double t0,
                                                double dt, double omega);

}  // namespace hypar
