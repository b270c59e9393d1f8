#include "hypar/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <string>

#include "hypar/errors.hpp"

namespace hypar {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// FFTW planning is not thread-safe; execution is.
std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}

std::vector<double> make_window(Window w, std::size_t n) {
    std::vector<double> out(n, 1.0);
    const double N = static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = kTwoPi * static_cast<double>(i) / N;
        switch (w) {
            case Window::rectangular:
                break;
            case Window::hann:
                out[i] = 0.5 - 0.5 * std::cos(x);
                break;
            case Window::blackman_nuttall:
                out[i] = 0.3635819 - 0.4891775 * std::cos(x) + 0.1365995 * std::cos(2 * x) -
                         0.0106411 * std::cos(3 * x);
                break;
        }
    }
    return out;
}

}  // namespace

std::string_view to_string(Window w) noexcept {
    switch (w) {
        case Window::rectangular:
            return "rectangular";
        case Window::hann:
            return "hann";
        case Window::blackman_nuttall:
            return "blackman_nuttall";
    }
    return "?";
}

Window window_from_string(std::string_view name) {
    for (Window w : {Window::rectangular, Window::hann, Window::blackman_nuttall}) {
        if (to_string(w) == name) return w;
    }
    throw DomainError("unknown window '" + std::string(name) + "'");
}

double Spectrum::parseval_sum() const noexcept {
    double s = 0.0;
    for (std::size_t k = 0; k < amp.size(); ++k) {
        const bool edge = k == 0 || (n_samples % 2 == 0 && k == amp.size() - 1);
        s += (edge ? 1.0 : 0.5) * std::norm(amp[k]);
    }
    return s;
}

Spectrum spectrum(const std::vector<double>& samples, double dt, Window window) {
    const std::size_t n = samples.size();
    if (n < 16) throw DomainError("spectrum needs at least 16 samples");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("sample spacing must be > 0");
    for (double v : samples) {
        if (!std::isfinite(v)) throw DomainError("spectrum: non-finite sample");
    }

    const std::vector<double> w = make_window(window, n);
    double sw = 0.0, sw2 = 0.0, swx2 = 0.0;
    const std::size_t nc = n / 2 + 1;
    double* in = fftw_alloc_real(n);
    fftw_complex* out = fftw_alloc_complex(nc);
    for (std::size_t i = 0; i < n; ++i) {
        in[i] = w[i] * samples[i];
        sw += w[i];
        sw2 += w[i] * w[i];
        swx2 += in[i] * in[i];
    }
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(plan_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE | FFTW_PRESERVE_INPUT);
    }
    fftw_execute(plan);

    Spectrum s;
    s.window = window;
    s.n_samples = n;
    s.sample_rate = 1.0 / dt;
    s.bin_width = kTwoPi / (dt * static_cast<double>(n));
    s.rbw = s.bin_width * static_cast<double>(n) * sw2 / (sw * sw);
    s.windowed_power = static_cast<double>(n) * swx2 / (sw * sw);
    s.omega.resize(nc);
    s.amp.resize(nc);
    for (std::size_t k = 0; k < nc; ++k) {
        const bool edge = k == 0 || (n % 2 == 0 && k == nc - 1);
        const double scale = (edge ? 1.0 : 2.0) / sw;
        s.omega[k] = s.bin_width * static_cast<double>(k);
        s.amp[k] = std::complex<double>(out[k][0], out[k][1]) * scale;
    }
    {
        std::lock_guard<std::mutex> lock(plan_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(in);
    fftw_free(out);
    return s;
}

Spectrum spectrum(const std::vector<double>& times, const std::vector<double>& samples,
                  Window window) {
    if (times.size() != samples.size()) throw DomainError("times and samples differ in length");
    if (times.size() < 16) throw DomainError("spectrum needs at least 16 samples");
    const double dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (std::abs((times[i] - times[i - 1]) - dt) > 1e-9 * dt) {
            throw DomainError("spectrum: samples are not uniformly spaced");
        }
    }
    return spectrum(samples, dt, window);
}

Spectrum spectrum(const SteadySegment& segment, Window window, Signal signal) {
    return spectrum(segment.signal(signal), segment.dt, window);
}

std::vector<Peak> find_peaks(const Spectrum& spec, double floor) {
    if (!(floor > 0.0)) throw DomainError("peak floor must be > 0");
    if (spec.size() < 3) throw DomainError("find_peaks: empty spectrum");
    const std::size_t m = spec.size();
    double pmax = 0.0;
    for (std::size_t k = 1; k + 1 < m; ++k) pmax = std::max(pmax, spec.power(k));
    std::vector<Peak> peaks;
    if (pmax == 0.0) return peaks;
    const double thr = floor * pmax;
    for (std::size_t k = 1; k + 1 < m; ++k) {
        const double pk = spec.power(k);
        if (!(pk > thr) || !(pk > spec.power(k - 1)) || !(pk >= spec.power(k + 1))) continue;
        const double pl = spec.power(k - 1), pr = spec.power(k + 1);
        double delta = 0.0, pw = pk;
        if (pl > 0.0 && pr > 0.0) {
            const double a = std::log(pl), b = std::log(pk), c = std::log(pr);
            const double den = a - 2.0 * b + c;
            if (den < 0.0) {
                delta = std::clamp(0.5 * (a - c) / den, -0.5, 0.5);
                pw = std::exp(b - 0.25 * (a - c) * delta);
            }
        }
        peaks.push_back({spec.bin_width * (static_cast<double>(k) + delta), pw, k});
    }
    return peaks;
}

double CombReport::first_sideband_power() const {
    double s = 0.0;
    int c = 0;
    for (int idx : {-1, 1}) {
        if (auto it = sidebands.find(idx); it != sidebands.end()) {
            s += it->second;
            ++c;
        }
    }
    return c == 0 ? 0.0 : s / c;
}

CombReport comb_metrics(const std::vector<Peak>& peaks, double omega_p,
                        std::optional<double> omega_x, const CombOptions& opts) {
    if (!(omega_p > 0.0)) throw DomainError("comb_metrics: omega_p must be > 0");
    const double lo = opts.band_lo > 0.0 ? opts.band_lo : 0.5 * omega_p;
    const double hi = opts.band_hi > 0.0 ? opts.band_hi : 1.5 * omega_p;
    CombReport r;
    for (const auto& p : peaks) {
        if (p.omega > lo && p.omega < hi) r.peaks.push_back(p);
    }
    std::sort(r.peaks.begin(), r.peaks.end(),
              [](const Peak& a, const Peak& b) { return a.omega < b.omega; });
    if (r.peaks.size() < 3) {
        throw InsufficientCombError("comb needs at least 3 lines, found " +
                                    std::to_string(r.peaks.size()));
    }
    const std::size_t m = r.peaks.size();
    r.spacing = (r.peaks.back().omega - r.peaks.front().omega) / static_cast<double>(m - 1);
    for (std::size_t i = 1; i < m; ++i) {
        const double gap = r.peaks[i].omega - r.peaks[i - 1].omega;
        r.equidistance_residual =
            std::max(r.equidistance_residual, std::abs(gap - r.spacing) / r.spacing);
    }
    std::size_t ci = 0;
    for (std::size_t i = 1; i < m; ++i) {
        if (std::abs(r.peaks[i].omega - omega_p) < std::abs(r.peaks[ci].omega - omega_p)) ci = i;
    }
    r.carrier = r.peaks[ci].omega;
    r.carrier_power = r.peaks[ci].power;
    for (std::size_t i = 0; i < m; ++i) {
        if (i == ci) continue;
        const int idx = static_cast<int>(std::lround((r.peaks[i].omega - r.carrier) / r.spacing));
        if (idx == 0) continue;
        r.sidebands[idx] = std::max(r.sidebands[idx], r.peaks[i].power);
    }
    if (omega_x) {
        const double nr = std::abs(omega_p - *omega_x) / r.spacing + 1.0;
        r.n = static_cast<int>(std::lround(nr));
        r.n_residual = std::abs(nr - *r.n);
        r.n_reliable = r.n_residual <= 0.2;
    }
    return r;
}

std::complex<double> project_tone(const std::vector<double>& samples, double t0, double dt,
                                  double omega) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        acc += samples[i] * std::polar(1.0, -omega * (t0 + dt * static_cast<double>(i)));
    }
    return 2.0 * acc / static_cast<double>(samples.size());
}

std::complex<double> transmission(const SteadySegment& segment, const DriveSpec& drive,
                                  std::size_t tone_index, Signal signal) {
    if (tone_index >= drive.tones.size()) throw DomainError("transmission: no such tone");
    const Tone& tone = drive.tones[tone_index];
    if (!(tone.amplitude > 0.0)) {
        throw DomainError("transmission: probed tone has zero amplitude");
    }
    if (segment.size() < 2 || !(segment.dt > 0.0)) throw DomainError("transmission: empty segment");
    if (tone.omega >= std::numbers::pi / segment.dt) {
        throw DomainError("transmission: tone frequency above the Nyquist limit");
    }
    const std::complex<double> c =
        project_tone(segment.signal(signal), segment.t0, segment.dt, tone.omega);
    // V0 sin(w t + phi) = Re(-i V0 e^{i phi} e^{i w t})
    const std::complex<double> in = std::complex<double>(0.0, -1.0) * std::polar(tone.amplitude, tone.phase);
    return c / in;
}

}  // namespace hypar
