#include <catch_amalgamated.hpp>

#include <cmath>

#include "hypar/errors.hpp"
#include "hypar/sweep.hpp"

using namespace hypar;

namespace {

const CircuitParams kExtinct{0.05, 1.0, 0.03, 0.03, 1.0};

SweepPlan small_plan() {
    SweepPlan p;
    p.frequency = {0.9, 1.1, 5, Spacing::linear};
    p.amplitude = {1e-3, 1e-1, 3, Spacing::log};
    return p;
}

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
    return v;
}

}  // namespace

TEST_CASE("axis values and validation", "[sweep]") {
    const Axis lin{1.0, 2.0, 5, Spacing::linear};
    CHECK(lin.values() == std::vector<double>{1.0, 1.25, 1.5, 1.75, 2.0});
    const auto lg = Axis{1e-3, 1e-1, 3, Spacing::log}.values();
    CHECK(lg.front() == 1e-3);
    CHECK(lg.back() == 1e-1);
    CHECK_THAT(lg[1], Catch::Matchers::WithinRel(1e-2, 1e-12));
    CHECK_THROWS_AS((Axis{1.0, 2.0, 1}.validate("a")), DomainError);
    CHECK_THROWS_AS((Axis{2.0, 1.0, 4}.validate("a")), DomainError);
    CHECK_THROWS_AS((Axis{0.0, 1.0, 4, Spacing::log}.validate("a")), DomainError);
    CHECK(metric_from_string("sideband_power") == Metric::sideband_power);
    CHECK_THROWS_AS(metric_from_string("contrast"), DomainError);
}

TEST_CASE("linear circuit rows follow the linear transfer", "[sweep]") {
    const CircuitParams p{0.05, 1.0, 0.02, 0.05, 0.0};
    SweepPlan plan = small_plan();
    plan.cell.signal = Signal::q_x;
    const auto map = run_sweep(plan, p, 2);
    REQUIRE(map.rows() == 3);
    REQUIRE(map.cols() == 5);
    for (std::size_t r = 0; r < map.rows(); ++r) {
        for (std::size_t c = 0; c < map.cols(); ++c) {
            const auto& cell = map.at(r, c);
            REQUIRE(cell.converged);
            const double ref = std::abs(linear_observe(Signal::q_x, p, map.frequencies[c]));
            CHECK(std::abs(cell.value - ref) <= 1e-4 * ref);
        }
    }
}

TEST_CASE("sweep is deterministic and cells are independent", "[sweep][property]") {
    const SweepPlan plan = small_plan();
    const auto a = run_sweep(plan, kExtinct, 1);
    const auto b = run_sweep(plan, kExtinct, 3);
    REQUIRE(a.cells.size() == b.cells.size());
    for (std::size_t i = 0; i < a.cells.size(); ++i) {
        CHECK(a.cells[i].value == b.cells[i].value);
        CHECK(a.cells[i].converged == b.cells[i].converged);
    }
    CHECK(a.provenance == b.provenance);
    CHECK(a.provenance.size() == 64);
    const auto single = evaluate_cell(plan, kExtinct, a.frequencies[3], a.amplitudes[1]);
    CHECK(single.value == a.at(1, 3).value);

    SweepPlan other = plan;
    other.cell.criterion_tol = 1e-8;
    CHECK(run_sweep(other, kExtinct, 1).provenance != a.provenance);
}

TEST_CASE("failed cells carry a sentinel and do not abort the sweep", "[sweep]") {
    SweepPlan plan = small_plan();
    plan.amplitude = {0.0, 1e-2, 2, Spacing::linear};
    plan.cell.retries = 1;
    std::size_t calls = 0;
    const auto map = run_sweep(plan, kExtinct, 1, [&](std::size_t done, std::size_t total) {
        ++calls;
        CHECK(done <= total);
    });
    CHECK(calls == map.cells.size());
    for (std::size_t c = 0; c < map.cols(); ++c) {
        CHECK(std::isnan(map.at(0, c).value));
        CHECK(map.at(0, c).failed);
        CHECK(map.at(0, c).attempts == 2);
        CHECK(std::isfinite(map.at(1, c).value));
    }
}

TEST_CASE("low drive leaves the extinct circuit without a mode", "[sweep]") {
    SweepPlan plan;
    plan.frequency = {0.7, 1.3, 13, Spacing::linear};
    plan.amplitude = {1e-3, 1e-1, 5, Spacing::log};
    const auto map = run_sweep(plan, kExtinct, 0);
    const auto c = contrast_profile(map);
    CHECK(c.front() < 0.1 * c[2]);
    for (std::size_t i = 1; i < c.size(); ++i) CHECK(c[i] > c[i - 1]);
    // transmitted current is flat at 1 / (2 gamma_c) in the unsaturated limit
    for (double v : map.row_values(0)) CHECK(std::abs(v - 1.0 / 0.06) < 1e-3 / 0.06);
}

TEST_CASE("mode contrast", "[sweep]") {
    CHECK(mode_contrast({1.0, 1.0, 1.0, 1.0}) == 0.0);
    CHECK(mode_contrast({1.0, 3.0, 1.0, 2.0, 1.0}) == 2.0);
    CHECK(mode_contrast({1.0, NAN, 1.0, 5.0}) == 4.0);
    CHECK(std::isnan(mode_contrast({1.0, NAN})));
    CHECK(std::isnan(mode_contrast({0.0, 0.0, 0.0})));
}

TEST_CASE("threshold of a step metric", "[sweep]") {
    const auto amps = linspace(0.1, 1.6, 16);
    const double a0 = 0.537;
    std::vector<double> step;
    for (double a : amps) step.push_back(a >= a0 ? 1.0 : 0.0);
    const auto coarse = find_thresholds(amps, step, 0.5);
    REQUIRE(coarse.lower);
    CHECK_FALSE(coarse.upper);
    CHECK(coarse.lower->lo < a0);
    CHECK(coarse.lower->hi >= a0);
    CHECK(std::abs(coarse.lower->value - a0) <= 0.1);

    const auto refined =
        find_thresholds(amps, step, 0.5, [a0](double a) { return a >= a0 ? 1.0 : 0.0; });
    REQUIRE(refined.lower);
    CHECK(refined.lower->hi - refined.lower->lo <= 0.01 * refined.lower->hi);
    CHECK(std::abs(refined.lower->value - a0) <= 0.01 * a0);
    CHECK(refined.lower->refinements > 0);
}

TEST_CASE("window metric gives ordered lower and upper thresholds", "[sweep]") {
    const auto amps = linspace(0.0, 1.0, 21);
    std::vector<double> m;
    for (double a : amps) m.push_back(a > 0.22 && a < 0.71 ? 1.0 : 0.0);
    const auto rep = find_thresholds(amps, m, 0.5);
    REQUIRE(rep.lower);
    REQUIRE(rep.upper);
    CHECK(rep.lower->value < rep.upper->value);
    CHECK(rep.lower->lo < 0.22);
    CHECK(rep.lower->hi > 0.22);
    CHECK(rep.upper->lo < 0.71);
    CHECK(rep.upper->hi > 0.71);

    // a dip after an initially active range does not produce an inverted pair
    std::vector<double> dip;
    for (double a : amps) dip.push_back(a < 0.3 || a > 0.6 ? 1.0 : 0.0);
    const auto d = find_thresholds(amps, dip, 0.5);
    REQUIRE(d.lower);
    CHECK_FALSE(d.upper);
}

TEST_CASE("no crossing means no thresholds", "[sweep]") {
    const auto amps = linspace(0.1, 1.0, 10);
    std::vector<double> rising;
    for (double a : amps) rising.push_back(a);
    auto r = find_thresholds(amps, rising, 5.0);
    CHECK_FALSE(r.lower);
    CHECK_FALSE(r.upper);
    r = find_thresholds(amps, rising, -1.0);
    CHECK_FALSE(r.lower);
    CHECK_FALSE(r.upper);
    CHECK_THROWS_AS(find_thresholds(linspace(0, 1, 7), std::vector<double>(7, 0.0), 0.5),
                    DomainError);
}

TEST_CASE("grid refinement moves thresholds by less than the coarse spacing", "[sweep][property]") {
    for (double a0 : {0.13, 0.379, 0.5, 0.8123}) {
        auto metric = [a0](const std::vector<double>& amps) {
            std::vector<double> m;
            for (double a : amps) m.push_back(std::tanh(20 * (a - a0)));
            return m;
        };
        const auto coarse_amps = linspace(0.05, 1.0, 12);
        const auto fine_amps = linspace(0.05, 1.0, 23);
        const auto c = find_thresholds(coarse_amps, metric(coarse_amps), 0.0);
        const auto f = find_thresholds(fine_amps, metric(fine_amps), 0.0);
        REQUIRE(c.lower);
        REQUIRE(f.lower);
        CHECK(std::abs(c.lower->value - f.lower->value) <= c.lower->hi - c.lower->lo);
    }
}

TEST_CASE("free-running frequency of an active circuit", "[sweep]") {
    const CircuitParams active{0.01, 1.0, 0.0245, 0.05, 1.0};
    const double w = free_running_frequency(active);
    CHECK(w > 1.0);
    CHECK(w < 1.01);
    CHECK(std::abs(free_running_frequency(active, 12000.0, 8000.0) - w) < 1e-6);
    CHECK_THROWS_AS(free_running_frequency(kExtinct), DomainError);
}

TEST_CASE("oscillation map of the active set", "[sweep]") {
    const CircuitParams active{0.01, 1.0, 0.0245, 0.05, 1.0};
    const double w_free = free_running_frequency(active);
    SweepPlan plan;
    plan.frequency = {1.015, 1.025, 3, Spacing::linear};
    // inside the window; next to the upper threshold the spacing is pulled by a few percent
    plan.amplitude = {0.002, 0.008, 3, Spacing::linear};
    plan.cell.max_periods = 3000;
    plan.cell.settle.record_periods = 1024;
    plan.cell.signal = Signal::q_x;
    const auto map = oscillation_map(plan, active, w_free, 0);
    CHECK(map.metric == Metric::comb_presence);
    for (std::size_t r = 0; r < map.rows(); ++r) {
        for (std::size_t c = 0; c < map.cols(); ++c) {
            const auto& cell = map.at(r, c);
            CHECK(cell.value == 1.0);
            CHECK(cell.n == 2);
            const double expected = map.frequencies[c] - w_free;
            CHECK(std::abs(cell.spacing - expected) <= 0.02 * expected);
        }
    }
    plan.metric = Metric::sideband_power;
    const auto power = run_sweep(plan, active, 0).column_values(1);
    CHECK(power[0] > power[1]);
    CHECK(power[1] > power[2]);
    CHECK(power[2] > 0.0);
}
