#pragma once

// Grids of time-domain experiments over (drive frequency, drive amplitude)
// and threshold extraction from amplitude slices.

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hypar/model.hpp"
#include "hypar/spectral.hpp"
#include "hypar/timedomain.hpp"

namespace hypar {

enum class Metric { transmission, comb_presence, sideband_power };
[[nodiscard]] std::string_view to_string(Metric m) noexcept;
[[nodiscard]] Metric metric_from_string(std::string_view name);

enum class Spacing { linear, log };
[[nodiscard]] std::string_view to_string(Spacing s) noexcept;
[[nodiscard]] Spacing spacing_from_string(std::string_view name);

struct Axis {
    double min = 0.0;
    double max = 1.0;
    int count = 2;
    Spacing spacing = Spacing::linear;

    /// Throws DomainError naming `name` unless count >= 2, min < max and
    /// (log spacing) min > 0.
    void validate(std::string_view name) const;
    [[nodiscard]] std::vector<double> values() const;
};

struct CellSettings {
    long max_periods = 4000;
    double criterion_tol = 1e-9;
    SettleOptions settle;
    Signal signal = Signal::total_current;
    Window window = Window::blackman_nuttall;
    double peak_floor = 1e-8;      ///< find_peaks floor for comb metrics
    double comb_residual = 0.05;   ///< equidistance residual accepted as a comb
    int retries = 3;               ///< extra attempts, each with doubled max_periods
    std::optional<double> omega_x_eff;  ///< oscillation frequency used to infer n
};

struct SweepPlan {
    Axis frequency;
    Axis amplitude{1e-3, 1e-1, 8, Spacing::log};
    Metric metric = Metric::transmission;
    CellSettings cell;

    void validate() const;
};

struct CellResult {
    double value = std::numeric_limits<double>::quiet_NaN();
    bool converged = false;
    bool quasi_periodic = false;
    bool failed = false;     ///< exception on every attempt
    int attempts = 0;
    double spacing = std::numeric_limits<double>::quiet_NaN();  ///< comb spacing (comb cells)
    int n = 0;               ///< comb order, 0 when unknown
    std::string error;
};

struct IntensityMap {
    Metric metric = Metric::transmission;
    std::vector<double> frequencies;
    std::vector<double> amplitudes;
    std::vector<CellResult> cells;  ///< row-major, row = amplitude
    std::string provenance;         ///< SHA-256 of the plan and model parameters

    [[nodiscard]] std::size_t rows() const noexcept { return amplitudes.size(); }
    [[nodiscard]] std::size_t cols() const noexcept { return frequencies.size(); }
    [[nodiscard]] const CellResult& at(std::size_t row, std::size_t col) const {
        return cells.at(row * cols() + col);
    }
    [[nodiscard]] std::vector<double> row_values(std::size_t row) const;
    [[nodiscard]] std::vector<double> column_values(std::size_t col) const;
};

/// One grid cell, simulated from rest. run_sweep calls exactly this, so a
/// cell recomputed on its own reproduces the map entry.
[[nodiscard]] CellResult evaluate_cell(const SweepPlan& plan, const CircuitParams& params,
                                       double frequency, double amplitude);

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// Every (amplitude, frequency) cell on a pool of `threads` workers
/// (0 = hardware concurrency). Cell failures are recorded, never thrown.
[[nodiscard]] IntensityMap run_sweep(const SweepPlan& plan, const CircuitParams& params,
                                     int threads = 0, const ProgressFn& progress = {});

/// run_sweep with the comb-presence metric. `omega_x_eff` (when set) is used
/// to report the comb order of each oscillating cell.
[[nodiscard]] IntensityMap oscillation_map(SweepPlan plan, const CircuitParams& params,
                                           std::optional<double> omega_x_eff, int threads = 0,
                                           const ProgressFn& progress = {});

/// (max - median) / median of the finite values; NaN when the median is
/// not positive or fewer than three values are finite.
[[nodiscard]] double mode_contrast(const std::vector<double>& row);
/// mode_contrast of every amplitude row.
[[nodiscard]] std::vector<double> contrast_profile(const IntensityMap& map);

struct Threshold {
    double value = 0.0;  ///< bracket midpoint
    double lo = 0.0;     ///< bracket: metric on opposite sides of the criterion
    double hi = 0.0;
    int refinements = 0;
};

struct ThresholdReport {
    std::optional<Threshold> lower;
    std::optional<Threshold> upper;
    std::string criterion;
};

/// Metric re-evaluated at an intermediate amplitude (bisection).
using SliceFn = std::function<double(double amplitude)>;

/// Lower threshold: smallest amplitude where the metric rises through
/// `floor`; upper: largest where it falls through it. Brackets are grid
/// intervals, narrowed by bisection with `refine` until (hi - lo) / hi <=
/// `resolution`. Non-finite samples are skipped. Needs >= 8 amplitudes.
[[nodiscard]] ThresholdReport find_thresholds(const std::vector<double>& amplitudes,
                                              const std::vector<double>& metric, double floor,
                                              const SliceFn& refine = {},
                                              double resolution = 0.01);

/// Thresholds of the column at `frequency_index`, refined with evaluate_cell.
[[nodiscard]] ThresholdReport find_thresholds(const IntensityMap& map, const SweepPlan& plan,
                                              const CircuitParams& params,
                                              std::size_t frequency_index, double floor,
                                              bool refine = true, double resolution = 0.01);

/// Frequency of the undriven self-oscillation of an active circuit
/// (gamma_c^2 > gamma_x gamma_p), from a run started off rest. Throws
/// DomainError for passive circuits.
[[nodiscard]] double free_running_frequency(const CircuitParams& params, double t_settle = 8000.0,
                                            double t_record = 6000.0);

/// Canonical text of the plan and parameters that the provenance hash covers.
[[nodiscard]] std::string provenance_text(const SweepPlan& plan, const CircuitParams& params);

}  // namespace hypar
