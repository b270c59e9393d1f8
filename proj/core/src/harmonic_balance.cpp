#include "hypar/harmonic_balance.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "hypar/errors.hpp"
#include "hypar/ode.hpp"

namespace hypar {

namespace {

using cd = std::complex<double>;
constexpr cd I{0.0, 1.0};
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Collocation residual of the circuit for a single tone of variable amplitude.
// Unknown layout per signal: [c_0, Re c_1, Im c_1, ..., Re c_N, Im c_N],
// q_x block first, q_p block second.
class HbProblem {
public:
    HbProblem(const CircuitParams& p, double omega, double phase, int N, int M)
        : p_(p), omega_(omega), phase_(phase), N_(N), M_(M), nh_(2 * N + 1) {
        cos_.resize(static_cast<std::size_t>(M) * (N + 1));
        sin_.resize(cos_.size());
        for (int j = 0; j < M; ++j) {
            for (int k = 0; k <= N; ++k) {
                const double th = kTwoPi * k * j / M;
                cos_[idx(j, k)] = std::cos(th);
                sin_[idx(j, k)] = std::sin(th);
            }
        }
        qx_.resize(M);
        vx_.resize(M);
        ax_.resize(M);
        qp_.resize(M);
        vp_.resize(M);
    }

    [[nodiscard]] int size() const noexcept { return 2 * nh_; }
    [[nodiscard]] bool pin_dc() const noexcept { return p_.eta == 0.0; }

    void residual(const Eigen::VectorXd& x, double A, Eigen::VectorXd& R) {
        R.resize(size());
        synth(x.segment(0, nh_), qx_, vx_, &ax_);
        synth(x.segment(nh_, nh_), qp_, vp_, nullptr);
        std::vector<double> rx(M_), rp(M_);
        for (int j = 0; j < M_; ++j) {
            const double V = A * std::sin(kTwoPi * j / M_ + phase_);
            rx[j] = ax_[j] + 2.0 * p_.gamma_x * vx_[j] + p_.omega_x * p_.omega_x * qx_[j] +
                    2.0 * p_.gamma_c * vp_[j] - V;
            rp[j] = 2.0 * p_.gamma_p * vp_[j] + p_.eta * qp_[j] * qp_[j] * qp_[j] +
                    2.0 * p_.gamma_c * vx_[j] - V;
        }
        project(rx, R, 0);
        project(rp, R, nh_);
        if (pin_dc()) R[nh_] = x[nh_];
    }

private:
    [[nodiscard]] std::size_t idx(int j, int k) const noexcept {
        return static_cast<std::size_t>(j) * (N_ + 1) + k;
    }

    void synth(const Eigen::Ref<const Eigen::VectorXd>& c, std::vector<double>& q,
               std::vector<double>& v, std::vector<double>* a) const {
        for (int j = 0; j < M_; ++j) {
            double qs = c[0], vs = 0.0, as = 0.0;
            for (int k = 1; k <= N_; ++k) {
                const double re = c[2 * k - 1], im = c[2 * k];
                const double cs = cos_[idx(j, k)], sn = sin_[idx(j, k)];
                const double w = k * omega_;
                const double base = re * cs - im * sn;
                qs += base;
                vs += -w * (re * sn + im * cs);
                as += -w * w * base;
            }
            q[j] = qs;
            v[j] = vs;
            if (a) (*a)[j] = as;
        }
    }

    void project(const std::vector<double>& r, Eigen::VectorXd& R, int off) const {
        double s0 = 0.0;
        for (int j = 0; j < M_; ++j) s0 += r[j];
        R[off] = s0 / M_;
        for (int k = 1; k <= N_; ++k) {
            double sc = 0.0, ss = 0.0;
            for (int j = 0; j < M_; ++j) {
                sc += r[j] * cos_[idx(j, k)];
                ss += r[j] * sin_[idx(j, k)];
            }
            R[off + 2 * k - 1] = 2.0 * sc / M_;
            R[off + 2 * k] = -2.0 * ss / M_;
        }
    }

    CircuitParams p_;
    double omega_, phase_;
    int N_, M_, nh_;
    std::vector<double> cos_, sin_;
    std::vector<double> qx_, vx_, ax_, qp_, vp_;
};

Eigen::VectorXd pack(const FourierSolution& s) {
    const int nh = 2 * s.N + 1;
    Eigen::VectorXd x(2 * nh);
    auto put = [&](const std::vector<cd>& c, int off) {
        x[off] = c[0].real();
        for (int k = 1; k <= s.N; ++k) {
            x[off + 2 * k - 1] = c[k].real();
            x[off + 2 * k] = c[k].imag();
        }
    };
    put(s.q_x, 0);
    put(s.q_p, nh);
    return x;
}

void unpack(const Eigen::VectorXd& x, FourierSolution& s) {
    const int nh = 2 * s.N + 1;
    s.q_x.assign(s.N + 1, 0.0);
    s.q_p.assign(s.N + 1, 0.0);
    s.q_x[0] = x[0];
    s.q_p[0] = x[nh];
    for (int k = 1; k <= s.N; ++k) {
        s.q_x[k] = {x[2 * k - 1], x[2 * k]};
        s.q_p[k] = {x[nh + 2 * k - 1], x[nh + 2 * k]};
    }
}

// Guess of size N from another solution (truncated or zero-padded).
FourierSolution resize_guess(const FourierSolution& g, int N) {
    FourierSolution s = g;
    s.N = N;
    s.q_x.resize(N + 1, 0.0);
    s.q_p.resize(N + 1, 0.0);
    return s;
}

FourierSolution linear_guess(const CircuitParams& p, const Tone& t, int N) {
    FourierSolution s;
    s.N = N;
    s.omega = t.omega;
    s.drive = t;
    s.q_x.assign(N + 1, 0.0);
    s.q_p.assign(N + 1, 0.0);
    const LinearResponse r = linear_transfer(p, t.omega);
    const cd in = -I * std::polar(t.amplitude, t.phase);
    s.q_x[1] = r.q_x * in;
    s.q_p[1] = p.eta == 0.0 ? r.q_p * in : 0.0;
    if (p.eta > 0.0) {
        // the cubic branch saturates: cap the material swing at the static balance
        const double cap = std::cbrt(t.amplitude / p.eta);
        const cd lin = r.q_p * in;
        s.q_p[1] = std::abs(lin) > cap ? lin * (cap / std::abs(lin)) : lin;
    }
    return s;
}

double condition_number(const Eigen::MatrixXd& J) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
    const auto& sv = svd.singularValues();
    const double smin = sv[sv.size() - 1];
    return smin == 0.0 ? std::numeric_limits<double>::infinity() : sv[0] / smin;
}

void fd_jacobian(HbProblem& prob, const Eigen::VectorXd& x, double A, const Eigen::VectorXd& R0,
                 double rel_step, Eigen::MatrixXd& J) {
    const int n = prob.size();
    J.resize(n, n);
    const double h = rel_step * std::max(x.lpNorm<Eigen::Infinity>(), 1e-300 + A);
    Eigen::VectorXd xp = x, R;
    for (int c = 0; c < n; ++c) {
        const double keep = xp[c];
        xp[c] = keep + h;
        prob.residual(xp, A, R);
        J.col(c) = (R - R0) / h;
        xp[c] = keep;
    }
}

struct NewtonOut {
    Eigen::VectorXd x;
    double residual = 0.0;
    int iterations = 0;
    double condition = 0.0;
};

NewtonOut newton(HbProblem& prob, Eigen::VectorXd x, double A, double tol, const HbOptions& o) {
    Eigen::VectorXd R, Rt;
    Eigen::MatrixXd J;
    prob.residual(x, A, R);
    double rn = R.norm() / A;
    double cond = 0.0;
    for (int it = 0; it < o.max_iterations; ++it) {
        fd_jacobian(prob, x, A, R, o.fd_step, J);
        cond = condition_number(J);
        if (rn <= tol) return {x, rn, it, cond};
        if (!(cond <= o.condition_limit)) {
            throw BifurcationProximityError(
                "hb_solve: Jacobian condition number " + std::to_string(cond) + " exceeds limit",
                cond);
        }
        const Eigen::VectorXd dx = J.colPivHouseholderQr().solve(-R);
        double s = 1.0;
        bool improved = false;
        for (int b = 0; b < 20; ++b) {
            const Eigen::VectorXd xt = x + s * dx;
            prob.residual(xt, A, Rt);
            const double rt = Rt.norm() / A;
            if (std::isfinite(rt) && rt < rn) {
                x = xt;
                R = Rt;
                rn = rt;
                improved = true;
                break;
            }
            s *= 0.5;
        }
        if (!improved) break;
    }
    if (rn <= tol) return {x, rn, o.max_iterations, cond};
    throw NoConvergenceError("hb_solve: Newton did not converge (residual " + std::to_string(rn) + ")",
                             rn);
}

void check_tone(const DriveSpec& drive) {
    drive.validate();
    if (drive.tones.size() != 1) throw DomainError("hb_solve needs a single-tone drive");
    if (!(drive.tones[0].omega > 0.0)) throw DomainError("hb_solve: drive frequency must be > 0");
}

}  // namespace

double FourierSolution::qx_at(double t) const noexcept {
    double s = 0.0;
    for (int k = 0; k <= N; ++k) s += (q_x[k] * std::polar(1.0, k * omega * t)).real();
    return s;
}

double FourierSolution::qp_at(double t) const noexcept {
    double s = 0.0;
    for (int k = 0; k <= N; ++k) s += (q_p[k] * std::polar(1.0, k * omega * t)).real();
    return s;
}

double FourierSolution::vx_at(double t) const noexcept {
    double s = 0.0;
    for (int k = 1; k <= N; ++k) s += (I * (k * omega) * q_x[k] * std::polar(1.0, k * omega * t)).real();
    return s;
}

StateVector FourierSolution::state_at(double t) const noexcept {
    return {qx_at(t), vx_at(t), qp_at(t)};
}

FourierSolution hb_solve(const CircuitParams& params, const DriveSpec& drive, int N, double tol,
                         const std::optional<FourierSolution>& guess, const HbOptions& opts) {
    params.validate();
    check_tone(drive);
    if (N < 1) throw DomainError("hb_solve: N must be >= 1");
    if (!(tol > 0.0)) throw DomainError("hb_solve: tolerance must be > 0");
    const Tone tone = drive.tones[0];

    FourierSolution out;
    out.N = N;
    out.omega = tone.omega;
    out.drive = tone;
    out.q_x.assign(N + 1, 0.0);
    out.q_p.assign(N + 1, 0.0);
    if (tone.amplitude == 0.0) {
        out.converged = true;
        return out;
    }
    const int M = 4 * (N + 1);
    HbProblem prob(params, tone.omega, tone.phase, N, M);

    FourierSolution start = guess ? resize_guess(*guess, N) : linear_guess(params, tone, N);
    auto finish = [&](const NewtonOut& r) {
        unpack(r.x, out);
        out.residual = r.residual;
        out.iterations = r.iterations;
        out.condition = r.condition;
        out.converged = true;
        return out;
    };
    try {
        return finish(newton(prob, pack(start), tone.amplitude, tol, opts));
    } catch (const Error&) {
        if (!opts.homotopy || guess) throw;
    }

    // Cold start failed: follow the solution up from a small drive.
    double A = tone.amplitude * 1e-3;
    Tone t = tone;
    t.amplitude = A;
    Eigen::VectorXd x = pack(linear_guess(params, t, N));
    x = newton(prob, x, A, tol, opts).x;
    double factor = 2.0;
    int guard = 0;
    while (A < tone.amplitude) {
        if (++guard > 400) throw NoConvergenceError("hb_solve: amplitude homotopy stalled", 0.0);
        const double next = std::min(tone.amplitude, A * factor);
        try {
            x = newton(prob, x, next, tol, opts).x;
            A = next;
            factor = std::min(2.0, factor * 1.2);
        } catch (const Error&) {
            factor = 1.0 + 0.5 * (factor - 1.0);
            if (factor < 1.0 + 1e-4) throw;
        }
    }
    return finish(newton(prob, x, tone.amplitude, tol, opts));
}

double hb_residual(const CircuitParams& params, const FourierSolution& sol, int points) {
    if (points < 2 * sol.N + 1) throw DomainError("hb_residual: too few collocation points");
    HbProblem prob(params, sol.omega, sol.drive.phase, sol.N, points);
    Eigen::VectorXd R;
    prob.residual(pack(sol), sol.drive.amplitude, R);
    if (prob.pin_dc()) R[2 * sol.N + 1] = 0.0;
    return sol.drive.amplitude > 0.0 ? R.norm() / sol.drive.amplitude : R.norm();
}

ContinuationResult continuation(const CircuitParams& params, const Tone& tone,
                                const std::vector<double>& amplitudes, int N, double tol) {
    if (amplitudes.size() < 2) throw DomainError("continuation needs at least two amplitudes");
    const double dir = amplitudes.back() > amplitudes.front() ? 1.0 : -1.0;
    for (std::size_t i = 1; i < amplitudes.size(); ++i) {
        if (!((amplitudes[i] - amplitudes[i - 1]) * dir > 0.0)) {
            throw DomainError("continuation: amplitude schedule must be strictly monotone");
        }
    }
    if (amplitudes.front() <= 0.0 || amplitudes.back() <= 0.0) {
        throw DomainError("continuation: amplitudes must be > 0");
    }
    ContinuationResult res;
    const int M = 4 * (N + 1);
    HbProblem prob(params, tone.omega, tone.phase, N, M);
    const int n = prob.size();
    // A sign change of det(dR/dx) between neighbours means a fold was stepped over.
    auto det_sign = [&](const FourierSolution& s) {
        Eigen::VectorXd R;
        Eigen::MatrixXd J;
        const Eigen::VectorXd x = pack(s);
        prob.residual(x, s.drive.amplitude, R);
        fd_jacobian(prob, x, s.drive.amplitude, R, 1e-7, J);
        return J.partialPivLu().determinant() < 0.0 ? -1 : 1;
    };
    std::optional<FourierSolution> last;
    int last_sign = 0;
    std::size_t i = 0;
    for (; i < amplitudes.size(); ++i) {
        Tone t = tone;
        t.amplitude = amplitudes[i];
        try {
            HbOptions o;
            o.homotopy = !last.has_value();
            FourierSolution s = hb_solve(params, DriveSpec({t}), N, tol, last, o);
            const int sg = det_sign(s);
            if (last_sign != 0 && sg != last_sign && res.branch.size() >= 2) break;
            last_sign = sg;
            last = s;
            res.branch.push_back(std::move(s));
        } catch (const Error& e) {
            if (res.branch.size() < 2) {
                throw NoConvergenceError("continuation step " + std::to_string(i) + ": " + e.what(),
                                         0.0);
            }
            break;
        }
    }
    if (i == amplitudes.size()) return res;

    // Pseudo-arclength with a secant predictor on y = (coefficients, amplitude).
    res.arclength_used = true;
    auto to_y = [&](const FourierSolution& s) {
        Eigen::VectorXd y(n + 1);
        y.head(n) = pack(s);
        y[n] = s.drive.amplitude;
        return y;
    };
    // Weight the amplitude so it counts like a coefficient of typical size.
    const double w = std::max(pack(res.branch.back()).lpNorm<Eigen::Infinity>(), 1e-12) /
                     std::max(amplitudes.back(), amplitudes.front());
    Eigen::VectorXd y0 = to_y(res.branch[res.branch.size() - 2]);
    Eigen::VectorXd y1 = to_y(res.branch.back());
    auto scaled = [&](Eigen::VectorXd v) {
        v[n] *= w;
        return v;
    };
    double ds = scaled(y1 - y0).norm();
    const double ds_max = 4.0 * ds, ds_min = ds / 4096.0;
    const std::size_t max_steps = 60 * amplitudes.size();
    Eigen::VectorXd F(n + 1), R, Fp;
    Eigen::MatrixXd J(n + 1, n + 1);
    auto eval = [&](const Eigen::VectorXd& y, const Eigen::VectorXd& tau, const Eigen::VectorXd& yp,
                    Eigen::VectorXd& out) {
        out.resize(n + 1);
        prob.residual(y.head(n), y[n], R);
        out.head(n) = R;
        out[n] = tau.dot(scaled(y - yp));
    };
    for (std::size_t step = 0; step < max_steps; ++step) {
        const Eigen::VectorXd tau = scaled(y1 - y0).normalized();
        Eigen::VectorXd tau_y = tau;
        tau_y[n] /= w;
        bool ok = false;
        Eigen::VectorXd y;
        while (!ok) {
            const Eigen::VectorXd yp = y1 + ds * tau_y;
            y = yp;
            int its = 0;
            for (; its < 30; ++its) {
                eval(y, tau, yp, F);
                const double amp = std::abs(y[n]);
                if (amp > 0.0 && F.head(n).norm() / amp <= tol && std::abs(F[n]) <= 1e-12 * ds) {
                    ok = true;
                    break;
                }
                const double h = 1e-7 * std::max(y.head(n).lpNorm<Eigen::Infinity>(), 1e-300);
                for (int c = 0; c <= n; ++c) {
                    Eigen::VectorXd yc = y;
                    const double hc = c == n ? h / w : h;
                    yc[c] += hc;
                    eval(yc, tau, yp, Fp);
                    J.col(c) = (Fp - F) / hc;
                }
                const Eigen::VectorXd dy = J.colPivHouseholderQr().solve(-F);
                if (!dy.allFinite()) break;
                y += dy;
            }
            if (!ok) {
                ds *= 0.5;
                if (ds < ds_min) {
                    throw NoConvergenceError("continuation: arclength corrector failed at step " +
                                                 std::to_string(res.branch.size()),
                                             F.head(n).norm());
                }
            } else if (its < 4) {
                ds = std::min(ds_max, ds * 1.3);
            }
        }
        FourierSolution s;
        s.N = N;
        s.omega = tone.omega;
        s.drive = tone;
        s.drive.amplitude = y[n];
        unpack(y.head(n), s);
        s.converged = true;
        s.residual = hb_residual(params, s, M);
        const double dA_prev = y1[n] - y0[n];
        const double dA = y[n] - y1[n];
        if (dA_prev * dA < 0.0) res.folds.push_back(y1[n]);
        res.branch.push_back(std::move(s));
        y0 = y1;
        y1 = y;
        if ((y[n] - amplitudes.back()) * dir > 0.0 || y[n] <= 0.0) break;
    }
    return res;
}

ProbeResult probe_transmission(const CircuitParams& params, const Tone& pump, const Tone& probe,
                               int N_pump, int N_mix, Signal signal) {
    params.validate();
    if (N_mix < 0) throw DomainError("probe_transmission: N_mix must be >= 0");
    if (!(probe.omega > 0.0)) throw DomainError("probe_transmission: probe frequency must be > 0");
    if (!(probe.amplitude >= 0.0) || !std::isfinite(probe.amplitude)) {
        throw DomainError("probe_transmission: probe amplitude must be finite and >= 0");
    }
    ProbeResult out;
    out.pump = hb_solve(params, DriveSpec({pump}), N_pump);
    const FourierSolution& P = out.pump;

    // Two-sided Fourier series of 3 eta q_p(t)^2, harmonics up to 2 N_pump.
    const int K = 2 * N_pump;
    std::vector<cd> G(2 * K + 1, 0.0);
    if (params.eta != 0.0) {
        const int L = 4 * (K + 1);
        for (int j = 0; j < L; ++j) {
            const double th = kTwoPi * j / L;
            const double qp = P.qp_at(th / P.omega);
            const double g = 3.0 * params.eta * qp * qp;
            for (int k = -K; k <= K; ++k) G[k + K] += g * std::polar(1.0, -k * th) / double(L);
        }
    }
    auto Gk = [&](int k) { return std::abs(k) <= K ? G[k + K] : cd(0.0); };

    const int m = 2 * N_mix + 1;
    Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(2 * m, 2 * m);
    Eigen::VectorXcd b = Eigen::VectorXcd::Zero(2 * m);
    const double wp = pump.omega, w2 = params.omega_x * params.omega_x;
    for (int i = -N_mix; i <= N_mix; ++i) {
        const int r = i + N_mix;
        const double Om = probe.omega + i * wp;
        A(r, r) = cd(w2 - Om * Om, 2.0 * params.gamma_x * Om);
        A(r, m + r) = I * (2.0 * params.gamma_c * Om);
        A(m + r, m + r) = I * (2.0 * params.gamma_p * Om);
        A(m + r, r) = I * (2.0 * params.gamma_c * Om);
        for (int l = -N_mix; l <= N_mix; ++l) A(m + r, m + l + N_mix) += Gk(i - l);
    }
    b[N_mix] = 1.0;
    b[m + N_mix] = 1.0;
    const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A);
    out.rcond = lu.rcond();
    out.near_oscillation = !(out.rcond >= 1e-10);
    const Eigen::VectorXcd x = lu.solve(b);
    out.x_sidebands.assign(x.data(), x.data() + m);
    const cd X0 = x[N_mix], P0 = x[m + N_mix];
    switch (signal) {
        case Signal::q_x:
            out.ratio = X0;
            break;
        case Signal::v_x:
            out.ratio = I * probe.omega * X0;
            break;
        case Signal::q_p:
            out.ratio = P0;
            break;
        case Signal::total_charge:
            out.ratio = X0 + P0;
            break;
        case Signal::total_current:
            out.ratio = I * probe.omega * (X0 + P0);
            break;
    }
    return out;
}

std::array<cd, 3> floquet_multipliers(const CircuitParams& params, const FourierSolution& orbit) {
    params.validate();
    if (!(orbit.omega > 0.0)) throw DomainError("floquet_multipliers: orbit frequency must be > 0");
    using Vec = Dopri5<12>::Vec;
    const Tone tone = orbit.drive;
    const double T = kTwoPi / orbit.omega;
    auto f = [&](double t, const Vec& y, Vec& dy) {
        const double V = tone.amplitude * std::sin(tone.omega * t + tone.phase);
        const StateVector s{y[0], y[1], y[2]};
        const StateVector d = eval_rhs_unchecked(s, V, params);
        dy[0] = d.q_x;
        dy[1] = d.v_x;
        dy[2] = d.q_p;
        const double dwv = -params.gamma_c / params.gamma_p;
        const double dwq = -3.0 * params.eta * y[2] * y[2] / (2.0 * params.gamma_p);
        Eigen::Matrix3d Jm;
        Jm << 0.0, 1.0, 0.0, -params.omega_x * params.omega_x,
            -2.0 * params.gamma_x - 2.0 * params.gamma_c * dwv, -2.0 * params.gamma_c * dwq, 0.0,
            dwv, dwq;
        const Eigen::Map<const Eigen::Matrix3d> M(y.data() + 3);
        Eigen::Map<Eigen::Matrix3d> dM(dy.data() + 3);
        dM = Jm * M;
    };
    Vec y;
    const StateVector s0 = orbit.state_at(0.0);
    y[0] = s0.q_x;
    y[1] = s0.v_x;
    y[2] = s0.q_p;
    Eigen::Map<Eigen::Matrix3d>(y.data() + 3) = Eigen::Matrix3d::Identity();
    Dopri5<12> ode(OdeOptions{.rel_tol = 1e-11, .abs_tol = 1e-14});
    double t = 0.0;
    ode.integrate(f, t, y, T, [](const Dopri5<12>::Step&) {});
    const Eigen::Matrix3d M = Eigen::Map<const Eigen::Matrix3d>(y.data() + 3);
    Eigen::EigenSolver<Eigen::Matrix3d> es(M);
    std::array<cd, 3> ev{es.eigenvalues()[0], es.eigenvalues()[1], es.eigenvalues()[2]};
    std::sort(ev.begin(), ev.end(), [](cd a, cd b) { return std::abs(a) > std::abs(b); });
    return ev;
}

NyquistResult circuit_loop(const CircuitParams& params, const FourierSolution& orbit,
                           const CircuitLoopOptions& opts) {
    params.validate();
    if (opts.N_mix < 0 || opts.points < 16) throw DomainError("circuit_loop: bad options");
    const int K = 2 * orbit.N;
    std::vector<cd> G(2 * K + 1, 0.0);
    if (params.eta != 0.0) {
        const int L = 4 * (K + 1);
        for (int j = 0; j < L; ++j) {
            const double th = kTwoPi * j / L;
            const double qp = orbit.qp_at(th / orbit.omega);
            const double g = 3.0 * params.eta * qp * qp;
            for (int k = -K; k <= K; ++k) G[k + K] += g * std::polar(1.0, -k * th) / double(L);
        }
    }
    auto Gk = [&](int k) { return std::abs(k) <= K ? G[k + K] : cd(0.0); };
    const int Nm = opts.N_mix, m = 2 * Nm + 1;
    const double wp = orbit.omega;
    const double w2 = params.omega_x * params.omega_x;

    // T(nu) = -L(nu), L = diag(s) D^-1 diag(2 gamma_c s) B^-1 (2 gamma_c)
    auto loop = [&](double nu) {
        Eigen::MatrixXcd B = Eigen::MatrixXcd::Zero(m, m);
        Eigen::VectorXcd left(m);
        for (int i = -Nm; i <= Nm; ++i) {
            const int r = i + Nm;
            const double Om = nu + i * wp;
            const cd s = I * Om;
            B(r, r) = 2.0 * params.gamma_p * s;
            for (int l = -Nm; l <= Nm; ++l) B(r, l + Nm) += Gk(i - l);
            const cd D = cd(w2 - Om * Om, 2.0 * params.gamma_x * Om);
            left[r] = s * 2.0 * params.gamma_c * s / D;
        }
        Eigen::MatrixXcd Lm = B.partialPivLu().inverse() * (2.0 * params.gamma_c);
        return Eigen::MatrixXcd(-(left.asDiagonal() * Lm));
    };
    auto det1 = [&](double nu) {
        const Eigen::MatrixXcd T = loop(nu);
        return Eigen::MatrixXcd(Eigen::MatrixXcd::Identity(m, m) + T).partialPivLu().determinant();
    };

    NyquistResult nr;
    nr.n = 0;
    const int P = opts.points;
    std::vector<double> nus(P);
    for (int j = 0; j < P; ++j) nus[j] = -0.5 * wp + (j + 0.5) * wp / P;

    // Winding with recursive refinement wherever the phase step is large.
    double wind = 0.0;
    auto accumulate = [&](auto&& self, double a, cd da, double b, cd db, int depth) -> void {
        const double step = std::arg(db / da);
        if (std::abs(step) > 0.5 && depth < 30) {
            const double c = 0.5 * (a + b);
            const cd dc = det1(c);
            self(self, a, da, c, dc, depth + 1);
            self(self, c, dc, b, db, depth + 1);
            return;
        }
        wind += step;
    };
    std::vector<cd> dets(P);
    for (int j = 0; j < P; ++j) dets[j] = det1(nus[j]);
    for (int j = 0; j + 1 < P; ++j) accumulate(accumulate, nus[j], dets[j], nus[j + 1], dets[j + 1], 0);
    wind += std::arg(dets.front() / dets.back());
    nr.encirclements = -static_cast<int>(std::lround(wind / kTwoPi));
    nr.oscillation = nr.encirclements != 0;

    // Characteristic loci, tracked by nearest-neighbour matching.
    std::vector<std::vector<cd>> loci(m, std::vector<cd>(P));
    std::vector<cd> prev;
    for (int j = 0; j < P; ++j) {
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(loop(nus[j]), false);
        std::vector<cd> ev(es.eigenvalues().data(), es.eigenvalues().data() + m);
        if (!prev.empty()) {
            std::vector<cd> ordered(m);
            std::vector<bool> used(m, false);
            for (int a = 0; a < m; ++a) {
                int best = -1;
                double bd = std::numeric_limits<double>::infinity();
                for (int c = 0; c < m; ++c) {
                    if (!used[c] && std::abs(ev[c] - prev[a]) < bd) {
                        bd = std::abs(ev[c] - prev[a]);
                        best = c;
                    }
                }
                used[best] = true;
                ordered[a] = ev[best];
            }
            ev = ordered;
        }
        for (int a = 0; a < m; ++a) loci[a][j] = ev[a];
        prev = ev;
    }
    double gm = std::numeric_limits<double>::infinity();
    double pm = std::numeric_limits<double>::infinity();
    for (const auto& l : loci) {
        for (int j = 0; j + 1 < P; ++j) {
            const cd a = l[j], b = l[j + 1];
            nr.peak_loop_gain = std::max({nr.peak_loop_gain, std::abs(a), std::abs(b)});
            if ((a.imag() <= 0.0) != (b.imag() <= 0.0)) {
                const double s = a.imag() / (a.imag() - b.imag());
                const cd c = a + s * (b - a);
                if (c.real() < 0.0) {
                    nr.has_phase_crossover = true;
                    gm = std::min(gm, -20.0 * std::log10(std::abs(c)));
                }
            }
            if ((std::abs(a) - 1.0) * (std::abs(b) - 1.0) < 0.0) {
                const double s = (1.0 - std::abs(a)) / (std::abs(b) - std::abs(a));
                const cd c = a + s * (b - a);
                nr.has_gain_crossover = true;
                pm = std::min(pm, 180.0 - std::abs(std::arg(c)) * 180.0 / std::numbers::pi);
            }
        }
    }
    nr.gain_margin_db = gm;
    nr.phase_margin_deg = pm;
    nr.delta = nus;
    nr.loop.resize(P);
    // the dominant locus is exported as the loop trace
    std::size_t dom = 0;
    double best = -1.0;
    for (std::size_t a = 0; a < loci.size(); ++a) {
        double mx = 0.0;
        for (const cd& v : loci[a]) mx = std::max(mx, std::abs(v));
        if (mx > best) {
            best = mx;
            dom = a;
        }
    }
    nr.loop = loci[dom];
    return nr;
}

std::vector<GainCurve> small_signal_gain(const SlowFlowParams& sf, const std::vector<double>& pumps,
                                         const std::vector<double>& deltas) {
    sf.validate();
    std::vector<GainCurve> out;
    out.reserve(pumps.size());
    for (double V0 : pumps) {
        SlowFlowParams s = sf;
        s.V_0 = V0;
        s.q_x0 = 0.0;
        const auto fps = fixed_points(s);
        const StabilityReport* op = nullptr;
        for (const auto& r : fps) {
            if (r.classification == Classification::stable_focus ||
                r.classification == Classification::stable_node) {
                op = &r;
                break;
            }
        }
        if (!op) {
            throw DomainError("small_signal_gain: no stable pumped fixed point at V_0 = " +
                              std::to_string(V0));
        }
        GainCurve g;
        g.pump = V0;
        g.fixed_point = op->fixed_point;
        g.delta = deltas;
        g.gain.reserve(deltas.size());
        for (double d : deltas) {
            g.gain.push_back(port_gain(s, op->fixed_point, d - s.frame.Delta_p, 3).magnitude);
        }
        out.push_back(std::move(g));
    }
    return out;
}

}  // namespace hypar
