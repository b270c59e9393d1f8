#include <catch_amalgamated.hpp>

#include <random>
#include <string>

#include "hypar/errors.hpp"
#include "hypar/scenario.hpp"

using namespace hypar;

namespace {

const std::string kSimulate = R"(schema: 1
kind: simulate
model: {gamma_x: 0.05, omega_x: 1.0, gamma_c: 0.03, gamma_p: 0.03, eta: 1.0}
drive:
  tones:
    - {amplitude: 0.01, omega: 1.02}
)";

ConfigError config_error(const std::string& text) {
    try {
        (void)load_scenario(text);
    } catch (const ConfigError& e) {
        return e;
    }
    FAIL("no ConfigError for:\n" << text);
    return ConfigError("", "");
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
    const auto pos = s.find(from);
    REQUIRE(pos != std::string::npos);
    return s.replace(pos, from.size(), to);
}

}  // namespace

TEST_CASE("minimal scenario picks up defaults", "[scenario]") {
    const Scenario s = load_scenario(kSimulate);
    CHECK(s.kind == ExperimentKind::simulate);
    REQUIRE(s.model);
    CHECK(s.model->gamma_c == 0.03);
    REQUIRE(s.drive);
    REQUIRE(s.drive->tones.size() == 1);
    CHECK(s.drive->tones[0].phase == 0.0);
    CHECK(s.simulate.t_end == SimulateSettings{}.t_end);
    CHECK(s.simulate.rel_tol == 1e-10);
    CHECK_FALSE(s.reduced);
}

TEST_CASE("invalid values name the key", "[scenario]") {
    const auto e = config_error(replace(kSimulate, "gamma_p: 0.03", "gamma_p: 0"));
    CHECK(e.path() == "model.gamma_p");
    CHECK(std::string(e.what()).find("gamma_p") != std::string::npos);

    const auto t = config_error(replace(kSimulate, "omega: 1.02", "omega: fast"));
    CHECK(t.path() == "drive.tones[0].omega");
    CHECK(t.line() == 6);
}

TEST_CASE("unknown keys and unused blocks are rejected", "[scenario]") {
    const auto e = config_error(replace(kSimulate, "eta: 1.0", "eta: 1.0, gama_x: 2"));
    CHECK(e.path() == "model.gama_x");
    CHECK(e.line() == 3);
    CHECK(e.column() > 1);

    const auto r = config_error(kSimulate + "reduced: {Omega_a: 0.1}\n");
    CHECK(r.path() == "reduced");

    const auto k = config_error(replace(kSimulate, "kind: simulate", "kind: bogus"));
    CHECK(k.path() == "kind");

    const auto m = config_error(replace(kSimulate, "schema: 1", "schema: 2"));
    CHECK(m.path() == "schema");

    const auto d = config_error(
        "schema: 1\nkind: sweep\nmodel: {gamma_x: 0.05, omega_x: 1, gamma_c: 0.03, gamma_p: "
        "0.03, eta: 1}\ndrive: {tones: [{amplitude: 1, omega: 1}]}\n"
        "experiment: {frequency: {min: 0.9, max: 1.1, count: 3}}\n");
    CHECK(d.path() == "drive");
}

TEST_CASE("syntax errors report line and column", "[scenario]") {
    const auto e = config_error("schema: 1\nkind: simulate\nmodel: {gamma_x: [0.05\n");
    CHECK(e.path().empty());
    CHECK(e.line() >= 3);
    CHECK(e.column() >= 1);
}

TEST_CASE("serialize then load reproduces generated scenarios", "[scenario][property]") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto r = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
    for (int i = 0; i < 200; ++i) {
        Scenario s;
        s.output = "out/case" + std::to_string(i);
        switch (i % 4) {
            case 0: {
                s.kind = ExperimentKind::simulate;
                s.model = CircuitParams{r(0.01, 0.1), r(0.5, 2), r(0.01, 0.05), r(0.05, 0.2), r(0, 2)};
                s.drive = DriveSpec::single(r(1e-4, 1), r(0.5, 1.5));
                s.simulate.t_end = r(10, 1000);
                s.simulate.initial = {r(-1, 1), r(-1, 1), r(-1, 1)};
                s.simulate.signal = Signal::total_current;
                break;
            }
            case 1: {
                s.kind = ExperimentKind::sweep;
                s.model = CircuitParams{r(0.01, 0.1), 1.0, r(0.01, 0.05), r(0.05, 0.2), 1.0};
                s.sweep.plan.metric = Metric::sideband_power;
                s.sweep.plan.frequency = {r(0.8, 0.95), r(1.05, 1.2), 3 + i % 7, Spacing::linear};
                s.sweep.plan.amplitude = {r(1e-4, 1e-3), r(0.01, 1), 8, Spacing::log};
                s.sweep.plan.cell.omega_x_eff = r(0.99, 1.01);
                s.sweep.threshold_floor = r(0, 1);
                s.sweep.threshold_column = 1;
                break;
            }
            case 2: {
                s.kind = ExperimentKind::slowflow;
                ReducedModel m;
                m.base.Omega_a = r(-0.1, 0.1);
                m.base.delta_a = r(0.001, 0.1);
                m.base.chi = r(0, 2);
                m.base.mu = r(0, 0.5);
                m.base.V_0 = r(0, 0.01);
                m.frame = {r(1.01, 1.05), 1.0, 2 + i % 3};
                s.reduced = m;
                s.slowflow.gain_pumps = {r(0, 0.01), r(0, 0.01)};
                s.slowflow.gain_deltas = {-0.01, 0.0, r(0.001, 0.02)};
                s.slowflow.resonator = Resonator{r(0.001, 0.01), 1.0, r(0.001, 0.01)};
                break;
            }
            default: {
                s.kind = ExperimentKind::coexist;
                ReducedModel m;
                m.base.delta_a = r(0.001, 0.1);
                m.frame = {1.02, 1.0, 2};
                s.reduced = m;
                s.coexist.pumps = {r(0, 0.01), r(0.01, 0.02)};
                s.coexist.orders = {2, 3, 4};
                s.coexist.resonator = Resonator{0.005, 1.0, r(0.001, 0.01)};
                break;
            }
        }
        const std::string text = serialize(s);
        const Scenario back = load_scenario(text);
        CHECK(serialize(back) == text);
        CHECK(back.kind == s.kind);
        CHECK(back.output == s.output);
        if (s.model) {
            CHECK(back.model->gamma_x == s.model->gamma_x);
            CHECK(back.model->eta == s.model->eta);
        }
        if (s.reduced) {
            CHECK(back.reduced->base.Omega_a == s.reduced->base.Omega_a);
            CHECK(back.reduced->frame == s.reduced->frame);
        }
        if (s.kind == ExperimentKind::sweep) {
            CHECK(back.sweep.plan.amplitude.max == s.sweep.plan.amplitude.max);
            CHECK(back.sweep.plan.cell.omega_x_eff == s.sweep.plan.cell.omega_x_eff);
            CHECK(back.sweep.threshold_floor == s.sweep.threshold_floor);
        }
    }
}
