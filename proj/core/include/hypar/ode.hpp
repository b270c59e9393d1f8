#pragma once

// Dormand-Prince 5(4) with Hairer's PI step control and the 4th-order
// continuous extension. Header-only so that fixed-size state vectors stay on
// the stack in the inner loops.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hypar/errors.hpp"

namespace hypar {

struct OdeOptions {
    double rel_tol = 1e-9;
    double abs_tol = 1e-12;
    double h_init = 0.0;  ///< 0 selects an automatic first step
    double h_max = std::numeric_limits<double>::infinity();
    long max_steps = 100'000'000;
    double overflow = 1e12;  ///< state-norm guard
};

template <int N>
class Dopri5 {
public:
    using Vec = Eigen::Matrix<double, N, 1>;

    /// Continuous extension over the last accepted step.
    class Step {
    public:
        double t0 = 0.0;
        double t1 = 0.0;
        [[nodiscard]] Vec operator()(double t) const {
            const double h = t1 - t0;
            const double s = (t - t0) / h;
            const double s1 = 1.0 - s;
            return r1 + s * (r2 + s1 * (r3 + s * (r4 + s1 * r5)));
        }

    private:
        friend class Dopri5;
        Vec r1, r2, r3, r4, r5;
    };

    explicit Dopri5(OdeOptions opts = {}) : opts_(opts) {
        if (!(opts_.rel_tol > 0.0) || !(opts_.abs_tol > 0.0)) {
            throw DomainError("integrator tolerances must be > 0");
        }
    }

    [[nodiscard]] long accepted_steps() const noexcept { return accepted_; }
    [[nodiscard]] long rejected_steps() const noexcept { return rejected_; }
    [[nodiscard]] double last_step() const noexcept { return h_; }
    void reset_step() noexcept { h_ = 0.0; }

    /// Advances (t, y) to t_end. `f(t, y, dydt)` evaluates the field;
    /// `on_step(const Step&)` runs after every accepted step. The step size is
    /// carried over between calls so chunked integration stays efficient.
    template <class F, class OnStep>
    void integrate(F&& f, double& t, Vec& y, double t_end, OnStep&& on_step) {
        if (!(t_end > t)) return;
        const Eigen::Index n = y.size();
        Vec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), y1(n), ys(n), err(n);
        f(t, y, k1);
        if (h_ <= 0.0) h_ = opts_.h_init > 0.0 ? opts_.h_init : initial_step(f, t, y, k1, t_end);
        double facold = 1e-4;
        bool last_rejected = false;
        Step step;
        while (t < t_end) {
            if (accepted_ + rejected_ >= opts_.max_steps) {
                throw NoConvergenceError("integrator exceeded max_steps", t);
            }
            double h = std::min(h_, opts_.h_max);
            bool final_step = false;
            if (t + 1.01 * h >= t_end) {
                h = t_end - t;
                final_step = true;
            }
            ys = y + h * (a21 * k1);
            f(t + c2 * h, ys, k2);
            ys = y + h * (a31 * k1 + a32 * k2);
            f(t + c3 * h, ys, k3);
            ys = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
            f(t + c4 * h, ys, k4);
            ys = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
            f(t + c5 * h, ys, k5);
            ys = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
            f(t + h, ys, k6);
            y1 = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
            f(t + h, y1, k7);
            err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

            double e2 = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double sk =
                    opts_.abs_tol + opts_.rel_tol * std::max(std::abs(y[i]), std::abs(y1[i]));
                e2 += (err[i] / sk) * (err[i] / sk);
            }
            double e = std::sqrt(e2 / static_cast<double>(n));
            if (!std::isfinite(e)) e = 1e10;

            const double fac11 = std::pow(e, 0.2 - 0.04 * 0.75);
            double fac = fac11 / std::pow(facold, 0.04);
            fac = std::clamp(fac / 0.9, 0.1, 5.0);
            double hnew = h / fac;

            if (e <= 1.0) {
                facold = std::max(e, 1e-4);
                ++accepted_;
                step.t0 = t;
                step.t1 = t + h;
                const Vec ydiff = y1 - y;
                const Vec bspl = h * k1 - ydiff;
                step.r1 = y;
                step.r2 = ydiff;
                step.r3 = bspl;
                step.r4 = ydiff - h * k7 - bspl;
                step.r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
                t = final_step ? t_end : t + h;
                y = y1;
                k1 = k7;
                if (!y.allFinite() || y.norm() > opts_.overflow) {
                    throw DivergenceError("state norm exceeded overflow guard at t = " +
                                              std::to_string(t),
                                          t);
                }
                on_step(step);
                if (last_rejected) hnew = std::min(hnew, h);
                last_rejected = false;
                if (!final_step || hnew < h_) h_ = hnew;
            } else {
                hnew = h / std::min(1.0 / 0.2, fac11 / 0.9);
                ++rejected_;
                last_rejected = true;
                h_ = hnew;
                if (h_ < 1e-14 * std::max(1.0, std::abs(t))) {
                    throw DivergenceError("step size underflow at t = " + std::to_string(t), t);
                }
            }
        }
    }

private:
    template <class F>
    double initial_step(F& f, double t, const Vec& y, const Vec& k1, double t_end) {
        const Eigen::Index n = y.size();
        double dnf = 0.0, dny = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double sk = opts_.abs_tol + opts_.rel_tol * std::abs(y[i]);
            dnf += (k1[i] / sk) * (k1[i] / sk);
            dny += (y[i] / sk) * (y[i] / sk);
        }
        double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : std::sqrt(dny / dnf) * 0.01;
        h = std::min({h, opts_.h_max, t_end - t});
        Vec y1 = y + h * k1;
        Vec k2(n);
        f(t + h, y1, k2);
        double der2 = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double sk = opts_.abs_tol + opts_.rel_tol * std::abs(y[i]);
            der2 += ((k2[i] - k1[i]) / sk) * ((k2[i] - k1[i]) / sk);
        }
        der2 = std::sqrt(der2) / h;
        const double der12 = std::max(std::abs(der2), std::sqrt(dnf));
        const double h1 = der12 <= 1e-15 ? std::max(1e-6, std::abs(h) * 1e-3)
                                         : std::pow(0.01 / der12, 0.2);
        return std::min({100.0 * h, h1, opts_.h_max, t_end - t});
    }

    OdeOptions opts_;
    double h_ = 0.0;
    long accepted_ = 0;
    long rejected_ = 0;

    static constexpr double c2 = 0.2, c3 = 0.3, c4 = 0.8, c5 = 8.0 / 9.0;
    static constexpr double a21 = 0.2;
    static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
    static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
    static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                            a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
    static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                            a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
    static constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                            a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
    static constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                            e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
    static constexpr double d1 = -12715105075.0 / 11282082432.0,
                            d3 = 87487479700.0 / 32700410799.0,
                            d4 = -10690763975.0 / 1880347072.0,
                            d5 = 701980252875.0 / 199316789632.0,
                            d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
};

}  // namespace hypar
