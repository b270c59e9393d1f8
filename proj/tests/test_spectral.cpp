#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "hypar/errors.hpp"
#include "hypar/spectral.hpp"

using namespace hypar;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
constexpr double kPi = std::numbers::pi;

std::vector<double> tones(std::size_t n, double dt, const std::vector<std::pair<double, double>>& aw,
                          double phase = 0.3) {
    std::vector<double> x(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = dt * static_cast<double>(i);
        for (const auto& [a, w] : aw) x[i] += a * std::cos(w * t + phase);
    }
    return x;
}
}  // namespace

TEST_CASE("unit sinusoid at a bin centre reads amplitude one", "[spectral]") {
    const std::size_t n = 4096;
    const double dt = 0.05;
    const double dw = 2 * kPi / (n * dt);
    for (Window w : {Window::rectangular, Window::hann, Window::blackman_nuttall}) {
        const Spectrum s = spectrum(tones(n, dt, {{1.0, 137 * dw}}), dt, w);
        CHECK_THAT(s.bin_width, WithinRel(dw, 1e-15));
        CHECK_THAT(std::abs(s.amp[137]), WithinAbs(1.0, 1e-6));
    }
}

TEST_CASE("zero signal has an all-zero spectrum", "[spectral]") {
    const Spectrum s = spectrum(std::vector<double>(256, 0.0), 0.1);
    for (std::size_t k = 0; k < s.size(); ++k) CHECK(s.amp[k] == std::complex<double>(0, 0));
    CHECK(find_peaks(s).empty());
}

TEST_CASE("weak tone ten bins from a strong one is recovered", "[spectral]") {
    const std::size_t n = 8192;
    const double dt = 0.1;
    const double dw = 2 * kPi / (n * dt);
    const Spectrum s = spectrum(tones(n, dt, {{1.0, 400 * dw}, {0.01, 410 * dw}}), dt);
    CHECK_THAT(std::abs(s.amp[400]), WithinRel(1.0, 0.01));
    CHECK_THAT(std::abs(s.amp[410]), WithinRel(0.01, 0.01));
}

TEST_CASE("Parseval identity", "[spectral][property]") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    for (std::size_t n : {64u, 255u, 1000u, 4097u}) {
        std::vector<double> x(n);
        for (auto& v : x) v = g(rng);
        for (Window w : {Window::rectangular, Window::hann, Window::blackman_nuttall}) {
            const Spectrum s = spectrum(x, 0.3, w);
            CHECK_THAT(s.parseval_sum(), WithinRel(s.windowed_power, 1e-10));
        }
    }
}

TEST_CASE("spectrum rejects bad input", "[spectral]") {
    CHECK_THROWS_AS(spectrum(std::vector<double>(8, 1.0), 0.1), DomainError);
    std::vector<double> t(32), x(32, 1.0);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.1 * i + (i == 7 ? 1e-4 : 0.0);
    CHECK_THROWS_AS(spectrum(t, x), DomainError);
    CHECK_THROWS_AS(find_peaks(spectrum(x, 0.1), 0.0), DomainError);
}

TEST_CASE("find_peaks locates an off-bin tone within a tenth of a bin", "[spectral]") {
    const std::size_t n = 4096;
    const double dt = 0.05;
    const double dw = 2 * kPi / (n * dt);
    for (double frac : {0.0, 0.13, 0.37, 0.5, 0.71}) {
        const double w0 = (300 + frac) * dw;
        const auto peaks = find_peaks(spectrum(tones(n, dt, {{0.4, w0}}), dt));
        REQUIRE(peaks.size() == 1);
        CHECK(std::abs(peaks[0].omega - w0) < 0.1 * dw);
    }
}

TEST_CASE("comb of seven equal tones", "[spectral]") {
    const std::size_t n = 16384;
    const double dt = 0.2;
    const double dw = 2 * kPi / (n * dt);
    const double s = 20.3 * dw;
    std::vector<std::pair<double, double>> aw;
    for (int k = -3; k <= 3; ++k) aw.push_back({1.0, 1000 * dw + k * s});
    const auto peaks = find_peaks(spectrum(tones(n, dt, aw), dt));
    REQUIRE(peaks.size() == 7);
    for (std::size_t i = 1; i < peaks.size(); ++i) {
        CHECK(std::abs(peaks[i].omega - peaks[i - 1].omega - s) < 0.1 * dw);
    }
    const CombReport r = comb_metrics(peaks, 1000 * dw);
    CHECK(r.lines() == 7);
    CHECK(std::abs(r.spacing - s) < 0.1 * dw);
    CHECK(r.sidebands.size() == 6);
}

TEST_CASE("find_peaks is invariant under amplitude scaling", "[spectral][property]") {
    const std::size_t n = 4096;
    const double dt = 0.05;
    const auto x = tones(n, dt, {{1.0, 1.01}, {0.05, 1.23}, {0.002, 1.6}});
    const auto p1 = find_peaks(spectrum(x, dt));
    std::vector<double> y(x);
    for (auto& v : y) v *= 37.5;
    const auto p2 = find_peaks(spectrum(y, dt));
    REQUIRE(p1.size() == p2.size());
    for (std::size_t i = 0; i < p1.size(); ++i) {
        CHECK(p1[i].omega == p2[i].omega);
        CHECK_THAT(p2[i].power, WithinRel(p1[i].power * 37.5 * 37.5, 1e-9));
    }
}

TEST_CASE("comb_metrics order inference", "[spectral]") {
    const double wx = 1.0;
    SECTION("spacing 0.02 at pump detuning 0.04 gives n = 3") {
        std::vector<Peak> p{{1.02, 1.0, 0}, {1.04, 2.0, 0}, {1.06, 1.0, 0}};
        const CombReport r = comb_metrics(p, 1.04, wx);
        CHECK_THAT(r.spacing, WithinRel(0.02, 1e-12));
        REQUIRE(r.n);
        CHECK(*r.n == 3);
        CHECK(r.n_reliable);
        CHECK_THAT(r.carrier, WithinRel(1.04, 1e-15));
    }
    SECTION("n = 2 means spacing equals pump detuning") {
        std::vector<Peak> p{{0.98, 1.0, 0}, {1.0, 1.0, 0}, {1.02, 2.0, 0}, {1.04, 1.0, 0}};
        const CombReport r = comb_metrics(p, 1.02, wx);
        CHECK(*r.n == 2);
        CHECK_THAT(r.spacing, WithinRel(1.02 - wx, 1e-12));
    }
    SECTION("fewer than three lines") {
        std::vector<Peak> p{{1.0, 1.0, 0}, {1.02, 1.0, 0}};
        CHECK_THROWS_AS(comb_metrics(p, 1.02, wx), InsufficientCombError);
    }
    SECTION("unreliable order is flagged") {
        std::vector<Peak> p{{1.0, 1.0, 0}, {1.03, 1.0, 0}, {1.06, 1.0, 0}};
        const CombReport r = comb_metrics(p, 1.03, 0.985);
        CHECK_FALSE(r.n_reliable);
    }
}

TEST_CASE("comb spacing is unchanged by mirroring about the pump", "[spectral][property]") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1e-4, 1e-4);
    const double wp = 1.03;
    std::vector<Peak> p, m;
    for (int k = -4; k <= 5; ++k) p.push_back({wp + 0.011 * k + u(rng), 1.0, 0});
    for (const auto& q : p) m.push_back({2 * wp - q.omega, q.power, 0});
    const CombReport a = comb_metrics(p, wp, 1.0);
    const CombReport b = comb_metrics(m, wp, 1.0);
    CHECK_THAT(a.spacing, WithinRel(b.spacing, 1e-12));
    CHECK(*a.n == *b.n);
    CHECK(a.equidistance_residual >= 0.0);
}

TEST_CASE("transmission against the linear transfer", "[spectral]") {
    CircuitParams p{0.01, 1.0, 0.02, 0.05, 0.0};
    const DriveSpec d = DriveSpec::single(0.01, 1.0, 0.4);
    const SteadySegment seg = settle(p, d, {}, 20000, 1e-11, {.record_periods = 4});
    const auto r = transmission(seg, d, 0);
    const auto q = linear_transfer(p, 1.0).q_x;
    CHECK(std::abs(r - q) < 1e-4 * std::abs(q));
    CHECK_THROWS_AS(transmission(seg, DriveSpec::single(0.0, 1.0), 0), DomainError);
    CHECK_THROWS_AS(transmission(seg, d, 1), DomainError);

    CircuitParams ext{0.05, 1.0, 0.03, 0.03, 0.0};
    for (double w : {0.97, 1.0, 1.02}) {
        const DriveSpec dd = DriveSpec::single(0.01, w);
        const SteadySegment s2 = settle(ext, dd, {}, 20000, 1e-11);
        CHECK(std::abs(transmission(s2, dd, 0)) < 1e-6);
        const auto tc = transmission(s2, dd, 0, Signal::total_current);
        CHECK(std::abs(tc - linear_observe(Signal::total_current, ext, w)) < 1e-4 * std::abs(tc));
    }
}
