#pragma once

// Text serialization of results. Numbers are written in the shortest form
// that parses back to the same double.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hypar/spectral.hpp"
#include "hypar/sweep.hpp"
#include "hypar/timedomain.hpp"

namespace hypar {

/// Shortest round-trip decimal; "nan", "inf" and "-inf" for non-finite values.
[[nodiscard]] std::string format_number(double x);
/// Inverse of format_number; throws DomainError on malformed text.
[[nodiscard]] double parse_number(std::string_view text);

[[nodiscard]] std::string sha256_hex(std::string_view data);
[[nodiscard]] std::string sha256_file(const std::filesystem::path& path);

/// Header row plus rows of numbers, comma separated, LF terminated.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    [[nodiscard]] std::string csv() const;
};

[[nodiscard]] Table trajectory_table(const Trajectory& traj);
[[nodiscard]] Table segment_table(const SteadySegment& seg);
/// omega, |amp|, re, im, power
[[nodiscard]] Table spectrum_table(const Spectrum& spec);
/// freq, amp, metric, converged, quasi_periodic, spacing, n
[[nodiscard]] Table intensity_long_table(const IntensityMap& map);
/// First row: 0 followed by the frequencies; then one row per amplitude
/// starting with the amplitude.
[[nodiscard]] Table intensity_dense_table(const IntensityMap& map);
/// gnuplot `splot ... with pm3d` data: blank line between amplitude rows.
[[nodiscard]] std::string intensity_gnuplot(const IntensityMap& map);

/// Writes `content` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, std::string_view content);
[[nodiscard]] std::string read_text(const std::filesystem::path& path);

}  // namespace hypar
