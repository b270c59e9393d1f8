#include "hypar/timedomain.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <deque>
#include <numbers>
#include <numeric>

#include "hypar/errors.hpp"
#include "hypar/ode.hpp"

namespace hypar {

namespace {

using Vec3 = Eigen::Vector3d;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kStiffStepsPerPeriod = 5000.0;

StateVector to_state(const Vec3& y) { return {y[0], y[1], y[2]}; }
Vec3 to_vec(const StateVector& s) { return {s.q_x, s.v_x, s.q_p}; }

struct Field {
    const CircuitParams& p;
    const DriveSpec& d;
    void operator()(double t, const Vec3& y, Vec3& dy) const {
        const StateVector r = eval_rhs_unchecked(to_state(y), d.voltage(t), p);
        dy[0] = r.q_x;
        dy[1] = r.v_x;
        dy[2] = r.q_p;
    }
};

void check_inputs(const CircuitParams& params, const DriveSpec& drive, const StateVector& s0) {
    params.validate();
    drive.validate();
    if (!s0.finite()) throw DomainError("initial state must be finite");
}

void check_tolerances(double rel_tol, double abs_tol) {
    if (!(rel_tol > 0.0 && rel_tol <= 1e-2) || !(abs_tol > 0.0 && abs_tol <= 1e-2)) {
        throw DomainError("tolerances must lie in (0, 1e-2]");
    }
}

// Continued-fraction rational approximation with bounded denominator.
bool rationalize(double x, long max_den, long& num, long& den) {
    long h0 = 0, h1 = 1, k0 = 1, k1 = 0;
    double r = x;
    for (int it = 0; it < 64; ++it) {
        const double a = std::floor(r);
        const long ai = static_cast<long>(a);
        const long h2 = ai * h1 + h0;
        const long k2 = ai * k1 + k0;
        if (k2 > max_den) break;
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
        if (std::abs(static_cast<double>(h1) / static_cast<double>(k1) - x) <= 1e-12 * x) {
            num = h1;
            den = k1;
            return true;
        }
        const double frac = r - a;
        if (frac < 1e-15) break;
        r = 1.0 / frac;
    }
    return false;
}

double rms_rel_change(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    double diff = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]).squaredNorm();
        norm += b[i].squaredNorm();
    }
    if (norm == 0.0) return std::sqrt(diff);
    return std::sqrt(diff / norm);
}

// Least-squares fit of s_k by a periodic function of k*theta (harmonics up to
// `harmonics`); returns the residual RMS relative to the sequence RMS.
double periodic_fit_residual(const std::vector<double>& s, double theta, int harmonics) {
    const Eigen::Index n = static_cast<Eigen::Index>(s.size());
    const Eigen::Index m = 1 + 2 * harmonics;
    Eigen::MatrixXd A(n, m);
    Eigen::VectorXd b(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        A(k, 0) = 1.0;
        for (int h = 1; h <= harmonics; ++h) {
            A(k, 2 * h - 1) = std::cos(h * theta * static_cast<double>(k));
            A(k, 2 * h) = std::sin(h * theta * static_cast<double>(k));
        }
        b[k] = s[static_cast<std::size_t>(k)];
    }
    const Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);
    const double mean = b.mean();
    const double var = (b.array() - mean).square().sum();
    if (var == 0.0) return 0.0;
    return std::sqrt((A * c - b).squaredNorm() / var);
}

// Dominant frequency (cycles per sample, in (0, 0.5]) of a demeaned sequence.
double dominant_frequency(const std::vector<double>& s) {
    const std::size_t n = s.size();
    const double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(n);
    auto power = [&](double f) {
        std::complex<double> acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double w = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(k) /
                                                  static_cast<double>(n));
            acc += w * (s[k] - mean) *
                   std::polar(1.0, -kTwoPi * f * static_cast<double>(k));
        }
        return std::norm(acc);
    };
    const int grid = static_cast<int>(8 * n);
    double best_f = 0.0, best_p = -1.0;
    for (int i = 1; i <= grid / 2; ++i) {
        const double f = static_cast<double>(i) / grid;
        const double p = power(f);
        if (p > best_p) {
            best_p = p;
            best_f = f;
        }
    }
    // Golden-section refinement inside the neighbouring grid cells.
    double lo = std::max(1e-9, best_f - 1.0 / grid), hi = std::min(0.5, best_f + 1.0 / grid);
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double p1 = power(x1), p2 = power(x2);
    for (int it = 0; it < 60; ++it) {
        if (p1 > p2) {
            hi = x2;
            x2 = x1;
            p2 = p1;
            x1 = hi - g * (hi - lo);
            p1 = power(x1);
        } else {
            lo = x1;
            x1 = x2;
            p1 = p2;
            x2 = lo + g * (hi - lo);
            p2 = power(x2);
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace

std::vector<double> SteadySegment::signal(Signal s) const {
    std::vector<double> out(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
        out[i] = observe(s, states[i], v_inp.empty() ? 0.0 : v_inp[i], params_used);
    }
    return out;
}

Trajectory integrate(const CircuitParams& params, const DriveSpec& drive,
                     const StateVector& state0, double t_end, double rel_tol, double abs_tol,
                     const std::vector<double>& sample_times) {
    check_inputs(params, drive, state0);
    check_tolerances(rel_tol, abs_tol);
    if (!(t_end > 0.0) || !std::isfinite(t_end)) throw DomainError("t_end must be > 0");
    for (std::size_t i = 0; i < sample_times.size(); ++i) {
        if (sample_times[i] < 0.0 || sample_times[i] > t_end ||
            (i > 0 && !(sample_times[i] > sample_times[i - 1]))) {
            throw DomainError("sample_times must be strictly increasing within [0, t_end]");
        }
    }

    Trajectory tr;
    tr.params_used = params;
    tr.drive_used = drive;
    Dopri5<3> ode(OdeOptions{.rel_tol = rel_tol, .abs_tol = abs_tol});
    Field f{params, drive};
    double t = 0.0;
    Vec3 y = to_vec(state0);
    std::size_t next = 0;
    if (sample_times.empty()) {
        tr.times.push_back(0.0);
        tr.states.push_back(state0);
    } else {
        while (next < sample_times.size() && sample_times[next] <= 0.0) {
            tr.times.push_back(sample_times[next++]);
            tr.states.push_back(state0);
        }
    }
    const bool record_steps = sample_times.empty();
    ode.integrate(f, t, y, t_end, [&](const Dopri5<3>::Step& st) {
        if (record_steps) {
            tr.times.push_back(st.t1);
            tr.states.push_back(to_state(st(st.t1)));
            return;
        }
        while (next < sample_times.size() && sample_times[next] <= st.t1) {
            tr.times.push_back(sample_times[next]);
            tr.states.push_back(to_state(st(sample_times[next])));
            ++next;
        }
    });
    tr.steps = ode.accepted_steps();
    const double w = drive.max_omega() > 0.0 ? drive.max_omega() : params.omega_x;
    tr.stiff_warning = static_cast<double>(tr.steps) > kStiffStepsPerPeriod * t_end * w / kTwoPi;
    return tr;
}

double base_period(const DriveSpec& drive, int max_period_ratio, bool* commensurate) {
    if (drive.empty()) throw DomainError("base period requires a non-empty drive");
    std::size_t ref = 0;
    for (std::size_t i = 1; i < drive.tones.size(); ++i) {
        if (drive.tones[i].amplitude > drive.tones[ref].amplitude) ref = i;
    }
    const double w0 = drive.tones[ref].omega;
    long lcm_den = 1;
    bool ok = true;
    for (const auto& tone : drive.tones) {
        long num = 0, den = 1;
        if (!rationalize(tone.omega / w0, max_period_ratio, num, den)) {
            ok = false;
            break;
        }
        lcm_den = std::lcm(lcm_den, den);
        if (lcm_den > max_period_ratio) {
            ok = false;
            break;
        }
    }
    const double T = kTwoPi * static_cast<double>(lcm_den) / w0;
    if (ok && T * drive.max_omega() / kTwoPi > max_period_ratio + 0.5) ok = false;
    if (commensurate) *commensurate = ok;
    return ok ? T : kTwoPi / w0;
}

SteadySegment settle(const CircuitParams& params, const DriveSpec& drive,
                     const StateVector& state0, long max_periods, double criterion_tol,
                     const SettleOptions& opts) {
    check_inputs(params, drive, state0);
    check_tolerances(opts.rel_tol, opts.abs_tol);
    if (drive.empty()) throw DomainError("settle requires a non-empty drive");
    if (max_periods < 1) throw DomainError("max_periods must be >= 1");
    if (!(criterion_tol > 0.0)) throw DomainError("criterion_tol must be > 0");
    if (opts.samples_per_period < 4 || opts.record_periods < 1) {
        throw DomainError("samples_per_period >= 4 and record_periods >= 1 required");
    }

    bool commensurate = true;
    const double T = base_period(drive, opts.max_period_ratio, &commensurate);
    const int spp = opts.samples_per_period;
    const double dt = T / spp;
    if (static_cast<double>(spp) / T <= 20.0 * drive.max_omega() / kTwoPi) {
        throw ResolutionError("samples_per_period too small for the highest drive frequency");
    }

    // Incommensurate drives: compare mean-square statistics over blocks long
    // enough to average the slowest beat.
    int block = 1;
    if (!commensurate) {
        double beat = drive.max_omega();
        for (std::size_t i = 0; i < drive.tones.size(); ++i) {
            for (std::size_t j = i + 1; j < drive.tones.size(); ++j) {
                const double d = std::abs(drive.tones[i].omega - drive.tones[j].omega);
                if (d > 0.0) beat = std::min(beat, d);
            }
        }
        block = std::clamp(static_cast<int>(std::ceil(4.0 * kTwoPi / beat / T)), 1, 4096);
    }

    Dopri5<3> ode(OdeOptions{.rel_tol = opts.rel_tol, .abs_tol = opts.abs_tol});
    Field f{params, drive};
    double t = 0.0;
    Vec3 y = to_vec(state0);

    const int env_window = opts.envelope_window > 0 ? opts.envelope_window : 256;
    std::deque<Vec3> strobe;
    strobe.push_back(y);

    std::vector<Vec3> cur(static_cast<std::size_t>(spp)), prev;
    Vec3 block_ms = Vec3::Zero(), prev_block_ms = Vec3::Constant(-1.0);
    SteadySegment seg;
    seg.params_used = params;
    seg.drive_used = drive;
    double residual = std::numeric_limits<double>::infinity();
    long p = 0;
    bool converged = false;
    for (; p < max_periods; ++p) {
        const double tp = static_cast<double>(p) * T;
        int j = 1;
        ode.integrate(f, t, y, tp + T, [&](const Dopri5<3>::Step& st) {
            while (j <= spp && tp + j * dt <= st.t1 + 1e-12 * T) {
                cur[static_cast<std::size_t>(j - 1)] = st(std::min(tp + j * dt, st.t1));
                ++j;
            }
        });
        while (j <= spp) cur[static_cast<std::size_t>(j++ - 1)] = y;
        strobe.push_back(y);
        if (static_cast<int>(strobe.size()) > env_window) strobe.pop_front();

        if (commensurate) {
            if (!prev.empty()) residual = rms_rel_change(cur, prev);
            prev = cur;
        } else {
            for (const auto& v : cur) block_ms += v.cwiseProduct(v);
            if ((p + 1) % block == 0) {
                block_ms /= static_cast<double>(block * spp);
                if (prev_block_ms[0] >= 0.0) {
                    const double nrm = block_ms.norm();
                    residual = nrm == 0.0 ? 0.0 : (block_ms - prev_block_ms).norm() / nrm;
                }
                prev_block_ms = block_ms;
                block_ms.setZero();
            }
        }
        if (p + 1 >= opts.min_periods && residual < criterion_tol) {
            converged = true;
            ++p;
            break;
        }
    }
    seg.periods_run = p;
    seg.converged = converged;
    seg.residual = residual;

    // Record whole base periods starting exactly at a period boundary.
    const double ts = static_cast<double>(p) * T;
    const std::size_t nrec = static_cast<std::size_t>(opts.record_periods) * spp;
    seg.t0 = ts;
    seg.dt = dt;
    seg.sample_rate = 1.0 / dt;
    seg.base_period = T;
    seg.samples_per_period = spp;
    seg.states.reserve(nrec);
    seg.v_inp.reserve(nrec);
    seg.states.push_back(to_state(y));
    std::size_t idx = 1;
    long period_mark = 1;
    ode.integrate(f, t, y, ts + opts.record_periods * T, [&](const Dopri5<3>::Step& st) {
        while (idx < nrec && ts + static_cast<double>(idx) * dt <= st.t1 + 1e-12 * T) {
            seg.states.push_back(to_state(st(ts + static_cast<double>(idx) * dt)));
            ++idx;
        }
        while (ts + static_cast<double>(period_mark) * T <= st.t1 + 1e-12 * T &&
               period_mark <= opts.record_periods) {
            strobe.push_back(st(std::min(ts + static_cast<double>(period_mark) * T, st.t1)));
            if (static_cast<int>(strobe.size()) > env_window) strobe.pop_front();
            ++period_mark;
        }
    });
    while (seg.states.size() < nrec) seg.states.push_back(to_state(y));
    for (std::size_t i = 0; i < seg.states.size(); ++i) seg.v_inp.push_back(drive.voltage(seg.time(i)));

    if (!converged && opts.detect_quasi_periodic && strobe.size() >= 32) {
        std::vector<double> qx, qp;
        for (const auto& v : strobe) {
            qx.push_back(v[0]);
            qp.push_back(v[2]);
        }
        const double fcyc = dominant_frequency(qx);
        const double theta = kTwoPi * fcyc;
        const double r = std::max(periodic_fit_residual(qx, theta, 8),
                                  periodic_fit_residual(qp, theta, 8));
        seg.quasi_periodic = r < opts.quasi_tol;
        seg.envelope_omega = theta / T;
    }
    return seg;
}

std::vector<double> lowpass_filtfilt(const std::vector<double>& x, double dt, double cutoff) {
    if (!(cutoff > 0.0) || !(dt > 0.0)) throw DomainError("filter cutoff and dt must be > 0");
    if (cutoff * dt >= std::numbers::pi) throw DomainError("filter cutoff above Nyquist");
    const std::size_t n = x.size();
    if (n < 2) return x;
    const double K = std::tan(0.5 * cutoff * dt);
    const double norm = 1.0 / (1.0 + std::numbers::sqrt2 * K + K * K);
    const double b0 = K * K * norm, b1 = 2.0 * b0, b2 = b0;
    const double a1 = 2.0 * (K * K - 1.0) * norm;
    const double a2 = (1.0 - std::numbers::sqrt2 * K + K * K) * norm;

    // Odd extension at both ends, roughly four filter time constants long.
    const std::size_t pad =
        std::min(n - 1, static_cast<std::size_t>(std::ceil(4.0 / (cutoff * dt))) + 3);
    std::vector<double> ext;
    ext.reserve(n + 2 * pad);
    for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

    auto pass = [&](std::vector<double>& v) {
        const double x0 = v.front();
        double z2 = (b2 - a2) * x0;
        double z1 = (b1 - a1) * x0 + z2;
        for (double& s : v) {
            const double in = s;
            const double out = b0 * in + z1;
            z1 = b1 * in - a1 * out + z2;
            z2 = b2 * in - a2 * out;
            s = out;
        }
    };
    pass(ext);
    std::reverse(ext.begin(), ext.end());
    pass(ext);
    std::reverse(ext.begin(), ext.end());
    return {ext.begin() + static_cast<std::ptrdiff_t>(pad),
            ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

EnvelopeSeries demodulate(const std::vector<double>& samples, double t0, double dt,
                          double omega_R, double lp_bandwidth) {
    if (!(omega_R > 0.0) || !std::isfinite(omega_R)) {
        throw DomainError("demodulate: omega_R must be > 0");
    }
    if (!(lp_bandwidth > 0.0) || !(lp_bandwidth < omega_R / 2.0)) {
        throw DomainError("demodulate: lp_bandwidth must lie in (0, omega_R/2)");
    }
    const std::size_t n = samples.size();
    EnvelopeSeries env;
    env.omega_R = omega_R;
    env.lp_bandwidth = lp_bandwidth;
    env.times.resize(n);
    std::vector<double> mc(n), ms(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = t0 + dt * static_cast<double>(i);
        env.times[i] = t;
        mc[i] = 2.0 * samples[i] * std::cos(omega_R * t);
        ms[i] = 2.0 * samples[i] * std::sin(omega_R * t);
    }
    env.U = lowpass_filtfilt(mc, dt, lp_bandwidth);
    env.V = lowpass_filtfilt(ms, dt, lp_bandwidth);
    return env;
}

EnvelopeSeries demodulate(const SteadySegment& segment, Signal signal, double omega_R,
                          double lp_bandwidth) {
    return demodulate(segment.signal(signal), segment.t0, segment.dt, omega_R, lp_bandwidth);
}

}  // namespace hypar
