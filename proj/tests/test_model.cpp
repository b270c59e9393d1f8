#include <catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <limits>
#include <random>

#include "hypar/errors.hpp"
#include "hypar/model.hpp"
#include "hypar/timedomain.hpp"

using namespace hypar;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("eval_rhs zero state with zero drive is a fixed point", "[model]") {
    CircuitParams p{0.1, 1.0, 0.05, 0.2, 0.01};
    const StateVector d = eval_rhs({0, 0, 0}, 0.0, p, DriveSpec{});
    CHECK(d == StateVector{0, 0, 0});
}

TEST_CASE("eval_rhs undamped restoring force", "[model]") {
    CircuitParams p{0.01, 1.0, 0.0, 1.0, 0.0};
    const StateVector d = eval_rhs({1, 0, 0}, 0.0, p, DriveSpec{});
    CHECK(d.q_x == 0.0);
    CHECK(d.v_x == -1.0);
    CHECK(d.q_p == 0.0);
}

TEST_CASE("eval_rhs hand-substituted point", "[model]") {
    CircuitParams p{0.1, 1.0, 0.05, 0.2, 0.01};
    // V_0 sin(omega t + phase) = 0.5 at t = 0 with phase pi/2.
    const DriveSpec drive = DriveSpec::single(0.5, 1.0, std::acos(0.0));
    const StateVector d = eval_rhs({1, 2, 3}, 0.0, p, drive);
    const double w_p = (0.5 - 0.27 - 0.2) / 0.4;
    CHECK_THAT(d.q_x, WithinAbs(2.0, 1e-15));
    CHECK_THAT(d.q_p, WithinAbs(0.075, 1e-14));
    CHECK_THAT(d.q_p, WithinAbs(w_p, 1e-14));
    CHECK_THAT(d.v_x, WithinAbs(-0.9075, 1e-14));
}

TEST_CASE("eval_rhs rejects invalid input", "[model]") {
    CircuitParams p{0.1, 1.0, 0.05, 0.2, 0.01};
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(eval_rhs({nan, 0, 0}, 0.0, p, DriveSpec{}), DomainError);
    CHECK_THROWS_AS(eval_rhs({0, 0, 0}, nan, p, DriveSpec{}), DomainError);
    CircuitParams bad = p;
    bad.gamma_p = 0.0;
    CHECK_THROWS_AS(eval_rhs({0, 0, 0}, 0.0, bad, DriveSpec{}), DomainError);
    bad = p;
    bad.eta = -1.0;
    CHECK_THROWS_AS(bad.validate(), DomainError);
    CHECK_THROWS_AS(DriveSpec::single(-1.0, 1.0).validate(), DomainError);
    CHECK_THROWS_AS(DriveSpec::single(1.0, 0.0).validate(), DomainError);
}

TEST_CASE("eval_rhs is linear in state when eta = 0", "[model][property]") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::uniform_real_distribution<double> pos(0.01, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        CircuitParams p{pos(rng), pos(rng) * 2, pos(rng) * 0.5, pos(rng), 0.0};
        const StateVector s1{u(rng), u(rng), u(rng)}, s2{u(rng), u(rng), u(rng)};
        const double a = u(rng), b = u(rng);
        const StateVector lhs = eval_rhs(a * s1 + b * s2, 0.0, p, DriveSpec{});
        const StateVector r1 = eval_rhs(s1, 0.0, p, DriveSpec{});
        const StateVector r2 = eval_rhs(s2, 0.0, p, DriveSpec{});
        const StateVector rhs = a * r1 + b * r2;
        CHECK_THAT(lhs.q_x, WithinAbs(rhs.q_x, 1e-12));
        CHECK_THAT(lhs.v_x, WithinAbs(rhs.v_x, 1e-12));
        CHECK_THAT(lhs.q_p, WithinAbs(rhs.q_p, 1e-12));
    }
}

TEST_CASE("energy terms", "[model]") {
    CircuitParams p{0.01, 2.0, 0.0, 1.0, 0.0};
    CHECK(energy({0, 0, 0}, p).total == 0.0);
    const EnergyBreakdown e = energy({1, 0, 0}, p);
    CHECK(e.potential == 2.0);
    CHECK(e.total == 2.0);
    p.eta = 0.4;
    const EnergyBreakdown f = energy({0.3, -0.7, 1.5}, p);
    CHECK(f.total == f.kinetic + f.potential + f.quartic);
    CHECK_THAT(f.quartic, WithinRel(0.1 * std::pow(1.5, 4), 1e-15));
    CHECK(f.kinetic >= 0.0);
}

TEST_CASE("energy is conserved by the lossless linear flow", "[model][property]") {
    // gamma_x, gamma_c and eta vanish; gamma_p must stay positive but the
    // material branch is then decoupled and carries no stored energy.
    CircuitParams p{1e-300, 1.3, 0.0, 1.0, 0.0};
    const double T = 2.0 * 3.141592653589793 / 1.3;
    const Trajectory tr = integrate(p, DriveSpec{}, {1, 0, 0}, T, 1e-12, 1e-14);
    const double e0 = energy(tr.states.front(), p).total;
    for (const auto& s : tr.states) {
        CHECK(std::abs(energy(s, p).total - e0) / e0 < 1e-8);
    }
}

TEST_CASE("linear_transfer closed forms", "[model]") {
    CircuitParams p{0.01, 1.0, 0.02, 0.05, 0.0};
    CHECK_THAT(std::abs(linear_transfer(p, 1.0).q_x), WithinRel(150.0, 1e-12));
    CHECK_THROWS_AS(linear_transfer(p, 0.0), DomainError);

    CircuitParams ext{0.013, 1.0, 0.04, 0.04, 0.0};
    for (double w = 0.8; w <= 1.2; w += 0.01) {
        const LinearResponse r = linear_transfer(ext, w);
        CHECK(r.q_x == std::complex<double>(0.0, 0.0));
        const std::complex<double> want = 1.0 / (std::complex<double>(0.0, 2.0) * 0.04 * w);
        CHECK(std::abs(r.q_x + r.q_p - want) <= 1e-12 * std::abs(want));
    }
}

TEST_CASE("linear_transfer solves the frequency-domain pair", "[model][property]") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> pos(0.01, 1.0);
    using namespace std::complex_literals;
    for (int trial = 0; trial < 100; ++trial) {
        CircuitParams p{pos(rng), 2 * pos(rng), pos(rng), pos(rng), 0.0};
        const double w = 2 * pos(rng);
        const LinearResponse r = linear_transfer(p, w);
        const std::complex<double> e1 = (-w * w + 2.0i * p.gamma_x * w + p.omega_x * p.omega_x) * r.q_x +
                                        2.0i * p.gamma_c * w * r.q_p - 1.0;
        const std::complex<double> e2 = 2.0i * p.gamma_p * w * r.q_p + 2.0i * p.gamma_c * w * r.q_x - 1.0;
        CHECK(std::abs(e1) < 1e-9 * (1 + std::abs(r.q_x)));
        CHECK(std::abs(e2) < 1e-9 * (1 + std::abs(r.q_x)));
    }
}

TEST_CASE("signal names round-trip", "[model]") {
    for (Signal s : {Signal::q_x, Signal::v_x, Signal::q_p, Signal::total_charge,
                     Signal::total_current}) {
        CHECK(signal_from_string(to_string(s)) == s);
    }
    CHECK_THROWS_AS(signal_from_string("flux"), DomainError);
}
