#include "hypar/slowflow.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "hypar/errors.hpp"
#include "hypar/ode.hpp"
#include "hypar/parallel.hpp"

namespace hypar {

namespace {

using cd = std::complex<double>;
constexpr cd I{0.0, 1.0};

cd to_w(const Quadratures& q) { return {q.V, q.U}; }
Quadratures from_w(cd w) { return {w.imag(), w.real()}; }

// Autonomous part of the complex slow flow; `with_mu` keeps the conj(W)^3 term.
cd autonomous(cd w, const SlowFlowParams& sf, double rotation, bool with_mu) {
    const cd c(-sf.delta_a, sf.Omega_a - rotation);
    cd r = c * w + sf.delta_a * sf.chi * std::norm(w) * w;
    if (with_mu) r += I * sf.mu * std::pow(std::conj(w), 3);
    return r;
}

// d(W')/dV and d(W')/dU of the autonomous part.
std::pair<cd, cd> autonomous_partials(cd w, const SlowFlowParams& sf, double rotation,
                                      bool with_mu) {
    const cd c(-sf.delta_a, sf.Omega_a - rotation);
    const double V = w.real(), U = w.imag();
    const double r2 = std::norm(w);
    cd dV = c + sf.delta_a * sf.chi * (2.0 * V * w + r2);
    cd dU = I * c + sf.delta_a * sf.chi * (2.0 * U * w + I * r2);
    if (with_mu) {
        const cd cw2 = std::conj(w) * std::conj(w);
        dV += 3.0 * I * sf.mu * cw2;
        dU += 3.0 * sf.mu * cw2;
    }
    return {dV, dU};
}

std::array<double, 4> real_jacobian(cd dV, cd dU) {
    // rows: U', V'; columns: U, V
    return {dU.imag(), dV.imag(), dU.real(), dV.real()};
}

Classification classify(double tr, double det) {
    if (det < 0.0) return Classification::saddle;
    const double disc = tr * tr - 4.0 * det;
    if (tr < 0.0) return disc >= 0.0 ? Classification::stable_node : Classification::stable_focus;
    if (tr > 0.0) return disc >= 0.0 ? Classification::unstable_node : Classification::unstable_focus;
    return Classification::center;
}

bool is_stable(Classification c) {
    return c == Classification::stable_node || c == Classification::stable_focus;
}

// Re-express the slow-flow parameters in the order-n frame of the same pump.
SlowFlowParams reframe(const SlowFlowParams& sf, double omega_x, int n) {
    const double wR0 = sf.frame.omega_R;
    const double wa2 = 2.0 * wR0 * sf.Omega_a + wR0 * wR0;
    SlowFlowParams out = sf;
    out.frame = build_frame(sf.frame.omega_p(), omega_x, n);
    const double wR = out.frame.omega_R;
    out.Omega_a = (wa2 - wR * wR) / (2.0 * wR);
    return out;
}

}  // namespace

FrameSpec build_frame(double omega_p, double omega_x, int n) {
    if (!(omega_p > 0.0) || !(omega_x > 0.0)) {
        throw DomainError("build_frame: frequencies must be > 0");
    }
    if (n == 1) throw DomainError("build_frame: n = 1 makes the spacing relation singular");
    if (n < 0) throw DomainError("build_frame: n must be >= 0");
    FrameSpec f;
    f.n = n;
    if (n == 0) {
        f.omega_R = omega_p;
        f.Delta_p = 0.0;
        f.Delta_x = omega_x - omega_p;
    } else {
        f.Delta_x = (omega_p - omega_x) / static_cast<double>(n - 1);
        f.omega_R = omega_x - f.Delta_x;
        f.Delta_p = static_cast<double>(n) * f.Delta_x;
    }
    if (!(f.omega_R > 0.0)) throw DomainError("build_frame: reference frequency must be > 0");
    const double d = std::max(std::abs(f.Delta_x), std::abs(f.Delta_p));
    f.scale_ratio = d == 0.0 ? std::numeric_limits<double>::infinity() : f.omega_R / d;
    f.scale_warning = f.scale_ratio < 1000.0;
    return f;
}

void SlowFlowParams::validate() const {
    for (double v : {Omega_a, delta_a, chi, mu, k_v, k_p, omega_x, V_0, q_x0, phi_sig,
                     frame.omega_R, frame.Delta_x, frame.Delta_p}) {
        if (!std::isfinite(v)) throw DomainError("slow-flow parameters must be finite");
    }
    if (!(delta_a > 0.0)) throw DomainError("delta_a must be > 0");
    if (chi < 0.0) throw DomainError("chi must be >= 0");
    if (mu < 0.0) throw DomainError("mu must be >= 0");
    if (!(frame.omega_R > 0.0)) throw DomainError("omega_R must be > 0");
    if (V_0 < 0.0) throw DomainError("V_0 must be >= 0");
}

DerivedCoefficients derive_coefficients(double L_p, double R_x, double Z_i, double eta,
                                        double phi0, double omega) {
    for (double v : {L_p, R_x, Z_i, eta, phi0, omega}) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw DomainError("derive_coefficients: all scales must be finite and > 0");
        }
    }
    const double s = std::cbrt(eta) * std::pow(phi0, -2.0 / 3.0);
    DerivedCoefficients c;
    c.delta_a = 1.5 * Z_i * s;
    c.omega_a2 = 3.0 / L_p * s;
    c.k_v = 3.0 * s;
    c.k_p = 3.0 * s * R_x / L_p;
    c.chi = 15.0 / 72.0 * omega * omega / (phi0 * phi0);
    c.mu = c.chi * c.omega_a2 / omega;
    return c;
}

SlowFlowParams make_slowflow(const DerivedCoefficients& c, const FrameSpec& frame, double omega_x,
                             double V_0, double q_x0, double phi_sig) {
    SlowFlowParams sf;
    sf.frame = frame;
    sf.Omega_a = (c.omega_a2 - frame.omega_R * frame.omega_R) / (2.0 * frame.omega_R);
    sf.delta_a = c.delta_a;
    sf.chi = c.chi;
    sf.mu = c.mu;
    sf.k_v = c.k_v;
    sf.k_p = c.k_p;
    sf.omega_x = omega_x;
    sf.V_0 = V_0;
    sf.q_x0 = q_x0;
    sf.phi_sig = phi_sig;
    sf.mu_relation = true;
    return sf;
}

RegimeReport check_regime(const SlowFlowParams& sf, double upsilon_scale) {
    if (upsilon_scale < 0.0) throw DomainError("upsilon scale must be >= 0");
    RegimeReport r;
    const double nl = sf.chi * upsilon_scale * upsilon_scale;
    if (nl == 0.0) {
        r.damping_ratio = std::numeric_limits<double>::infinity();
        r.frame_ratio = std::numeric_limits<double>::infinity();
        r.reason = "no nonlinearity";
        return r;
    }
    r.damping_ratio = sf.delta_a / nl;
    r.frame_ratio = sf.frame.omega_R / nl;
    if (r.damping_ratio < 0.01 || r.damping_ratio > 100.0) {
        r.reason = "delta_a / (chi Upsilon^2) outside [0.01, 100]";
    } else if (!(r.frame_ratio > 100.0)) {
        r.reason = "omega_R / (chi Upsilon^2) not above 100";
    } else if (sf.frame.scale_ratio != 0.0 && !(sf.frame.scale_ratio > 100.0)) {
        r.reason = "omega_R / max(|Delta_x|, |Delta_p|) not above 100";
    } else {
        r.valid = true;
    }
    return r;
}

Quadratures slowflow_rhs(const Quadratures& q, double t, const SlowFlowParams& sf) {
    const cd w = to_w(q);
    cd r = autonomous(w, sf, 0.0, true);
    const double a = sf.pump_force();
    const double b = sf.signal_gain() * sf.q_x0;
    const FrameSpec& f = sf.frame;
    if (a != 0.0) r += -I * a * std::polar(1.0, f.Delta_p * t);
    if (b != 0.0) r += -I * b * std::polar(1.0, f.Delta_x * t + sf.phi_sig);
    return from_w(r);
}

std::array<double, 4> slowflow_jacobian(const Quadratures& q, const SlowFlowParams& sf) {
    const auto [dV, dU] = autonomous_partials(to_w(q), sf, 0.0, true);
    return real_jacobian(dV, dU);
}

SlowTrajectory integrate_slowflow(const SlowFlowParams& sf, Quadratures q0, double t_end,
                                  double dt, double rel_tol, double abs_tol) {
    sf.validate();
    if (!(t_end > 0.0) || !(dt > 0.0)) throw DomainError("t_end and dt must be > 0");
    using Vec2 = Eigen::Vector2d;
    Dopri5<2> ode(OdeOptions{.rel_tol = rel_tol, .abs_tol = abs_tol});
    auto f = [&](double t, const Vec2& y, Vec2& dy) {
        const Quadratures d = slowflow_rhs({y[0], y[1]}, t, sf);
        dy[0] = d.U;
        dy[1] = d.V;
    };
    SlowTrajectory tr;
    const std::size_t n = static_cast<std::size_t>(std::floor(t_end / dt + 1e-9)) + 1;
    tr.times.reserve(n);
    tr.states.reserve(n);
    tr.times.push_back(0.0);
    tr.states.push_back(q0);
    double t = 0.0;
    Vec2 y(q0.U, q0.V);
    std::size_t k = 1;
    ode.integrate(f, t, y, dt * static_cast<double>(n - 1), [&](const Dopri5<2>::Step& st) {
        while (k < n && dt * static_cast<double>(k) <= st.t1 + 1e-12 * dt) {
            const Vec2 v = st(std::min(dt * static_cast<double>(k), st.t1));
            tr.times.push_back(dt * static_cast<double>(k));
            tr.states.push_back({v[0], v[1]});
            ++k;
        }
    });
    return tr;
}

std::string_view to_string(Classification c) noexcept {
    switch (c) {
        case Classification::stable_node:
            return "stable_node";
        case Classification::stable_focus:
            return "stable_focus";
        case Classification::unstable_node:
            return "unstable_node";
        case Classification::unstable_focus:
            return "unstable_focus";
        case Classification::saddle:
            return "saddle";
        case Classification::center:
            return "center";
    }
    return "?";
}

Quadratures pump_frame_rhs(const Quadratures& z, const SlowFlowParams& sf) {
    const bool with_mu = sf.frame.Delta_p == 0.0;
    const cd r = autonomous(to_w(z), sf, sf.frame.Delta_p, with_mu) - I * sf.pump_force();
    return from_w(r);
}

std::array<double, 4> pump_frame_jacobian(const Quadratures& z, const SlowFlowParams& sf) {
    const bool with_mu = sf.frame.Delta_p == 0.0;
    const auto [dV, dU] = autonomous_partials(to_w(z), sf, sf.frame.Delta_p, with_mu);
    return real_jacobian(dV, dU);
}

std::vector<StabilityReport> fixed_points(const SlowFlowParams& sf, const FixedPointSearch& search) {
    sf.validate();
    const int g = std::max(search.grid, 1);
    double R = search.radius;
    if (R <= 0.0) {
        const double c = std::hypot(sf.delta_a, sf.Omega_a - sf.frame.Delta_p);
        R = 2.0 * sf.pump_force() / c;
        if (sf.chi > 0.0) R = std::max(R, 1.5 / std::sqrt(sf.chi));
        R = std::max(R, 1e-6);
    }
    const double scale = std::max({sf.pump_force(), sf.delta_a * R, 1e-300});

    std::vector<StabilityReport> out;
    auto add_root = [&](Quadratures z) {
        for (const auto& r : out) {
            if (std::hypot(r.fixed_point.U - z.U, r.fixed_point.V - z.V) <= 1e-6 * std::max(1.0, R)) {
                return;
            }
        }
        StabilityReport rep;
        rep.fixed_point = z;
        const auto J = pump_frame_jacobian(z, sf);
        const double tr = J[0] + J[3], det = J[0] * J[3] - J[1] * J[2];
        const cd disc = std::sqrt(cd(tr * tr - 4.0 * det, 0.0));
        rep.eig1 = 0.5 * (tr + disc);
        rep.eig2 = 0.5 * (tr - disc);
        rep.classification = classify(tr, det);
        out.push_back(rep);
    };

    for (int i = 0; i < g; ++i) {
        for (int j = 0; j < g; ++j) {
            Quadratures z{g == 1 ? 0.0 : -R + 2.0 * R * i / (g - 1),
                          g == 1 ? 0.0 : -R + 2.0 * R * j / (g - 1)};
            bool ok = false;
            for (int it = 0; it < 80; ++it) {
                const Quadratures f = pump_frame_rhs(z, sf);
                const double fn = std::hypot(f.U, f.V);
                if (fn <= 1e-13 * scale) {
                    ok = true;
                    break;
                }
                const auto J = pump_frame_jacobian(z, sf);
                const double det = J[0] * J[3] - J[1] * J[2];
                if (det == 0.0 || !std::isfinite(det)) break;
                double dU = -(J[3] * f.U - J[1] * f.V) / det;
                double dV = -(-J[2] * f.U + J[0] * f.V) / det;
                const double step = std::hypot(dU, dV);
                if (step > R) {
                    dU *= R / step;
                    dV *= R / step;
                }
                z.U += dU;
                z.V += dV;
                if (!std::isfinite(z.U) || !std::isfinite(z.V) || std::hypot(z.U, z.V) > 10 * R) break;
                if (step <= 1e-15 * std::max(1.0, std::hypot(z.U, z.V))) {
                    const Quadratures f2 = pump_frame_rhs(z, sf);
                    ok = std::hypot(f2.U, f2.V) <= 1e-10 * scale;
                    break;
                }
            }
            if (ok) add_root(z);
        }
    }
    std::sort(out.begin(), out.end(), [](const StabilityReport& a, const StabilityReport& b) {
        const double ra = std::hypot(a.fixed_point.U, a.fixed_point.V);
        const double rb = std::hypot(b.fixed_point.U, b.fixed_point.V);
        if (ra != rb) return ra < rb;
        return a.fixed_point.U < b.fixed_point.U;
    });
    return out;
}

PortGain port_gain(const SlowFlowParams& sf, const Quadratures& fp, double nu, int ladder) {
    // Linearization dz' = A dz + B conj(dz) + C e^{-i Omega t} conj(dz) in the
    // pump frame; the C term is the rotating conj(W)^3 contribution for n != 0.
    const cd w = to_w(fp);
    const double rot = sf.frame.Delta_p;
    const bool autonomous_mu = rot == 0.0;
    cd A = cd(-sf.delta_a, sf.Omega_a - rot) + 2.0 * sf.delta_a * sf.chi * std::norm(w);
    cd B = sf.delta_a * sf.chi * w * w;
    cd C = 0.0;
    const cd cw2 = std::conj(w) * std::conj(w);
    if (autonomous_mu) {
        B += 3.0 * I * sf.mu * cw2;
    } else {
        C = 3.0 * I * sf.mu * cw2;
    }
    const int L = (autonomous_mu || ladder <= 0 || C == 0.0) ? 0 : ladder;
    const double Om = 4.0 * rot;
    const int m = 2 * L + 1;
    Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(2 * m, 2 * m);
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(2 * m);
    // unknowns: z_k at index (k + L), w_k at index m + (k + L)
    for (int k = -L; k <= L; ++k) {
        const int iz = k + L, iw = m + k + L;
        const cd s = I * (nu + k * Om);
        M(iz, iz) = s - A;
        M(iz, iw) = -B;
        if (k + 1 <= L) M(iz, iw + 1) = -C;
        M(iw, iw) = s - std::conj(A);
        M(iw, iz) = -std::conj(B);
        if (k - 1 >= -L) M(iw, iz - 1) = -std::conj(C);
    }
    rhs[L] = -I * sf.signal_gain();
    const Eigen::VectorXcd x = M.partialPivLu().solve(rhs);
    const cd z0 = x[L], w0 = x[m + L];
    const cd vt = z0 + w0;
    const cd ut = (z0 - w0) / I;
    return {z0, std::sqrt(std::norm(ut) + std::norm(vt))};
}

StabilityReport loop_analysis(const SlowFlowParams& sf_in, const Resonator& res, int n,
                              const std::vector<double>& delta_grid, const LoopOptions& opts) {
    sf_in.validate();
    if (!(res.gamma_x > 0.0)) throw DomainError("resonator gamma_x must be > 0");
    if (delta_grid.size() < 3) throw ResolutionError("loop_analysis: Delta grid too short");
    for (std::size_t i = 1; i < delta_grid.size(); ++i) {
        if (!(delta_grid[i] > delta_grid[i - 1])) {
            throw DomainError("loop_analysis: Delta grid must be increasing");
        }
    }
    const SlowFlowParams sf = reframe(sf_in, res.omega_x, n);
    const double dx = sf.frame.Delta_x;
    {
        int inside = 0;
        double worst = 0.0;
        for (std::size_t i = 1; i < delta_grid.size(); ++i) {
            const double mid = 0.5 * (delta_grid[i] + delta_grid[i - 1]);
            if (std::abs(mid - dx) <= 5.0 * res.gamma_x) {
                ++inside;
                worst = std::max(worst, delta_grid[i] - delta_grid[i - 1]);
            }
        }
        if (inside < 10 || worst > res.gamma_x / 10.0) {
            throw ResolutionError("loop_analysis: Delta grid does not resolve the resonance "
                                  "(need spacing <= gamma_x/10 within 5 gamma_x of Delta_x)");
        }
    }

    // Pumped operating point: the lowest-amplitude stable fixed point.
    SlowFlowParams pumped = sf;
    pumped.q_x0 = 0.0;
    const auto fps = fixed_points(pumped);
    const StabilityReport* op = nullptr;
    for (const auto& r : fps) {
        if (is_stable(r.classification)) {
            op = &r;
            break;
        }
    }
    if (!op) {
        throw DomainError("loop_analysis: no stable pumped fixed point at V_0 = " +
                          std::to_string(sf.V_0));
    }
    StabilityReport report = *op;

    auto T = [&](double d) {
        const PortGain g = port_gain(pumped, op->fixed_point, d - sf.frame.Delta_p, opts.ladder);
        const cd h = res.kappa / cd(res.gamma_x, d - dx);
        return -g.z * h;
    };

    NyquistResult nr;
    nr.n = n;
    nr.delta = delta_grid;
    nr.loop.reserve(delta_grid.size());
    for (double d : delta_grid) nr.loop.push_back(T(d));

    // Winding of 1 + T around the origin along the grid, closed by the chord
    // from the last sample back to the first.
    double wind = 0.0;
    const std::size_t m = nr.loop.size();
    for (std::size_t i = 0; i < m; ++i) {
        const cd a = 1.0 + nr.loop[i], b = 1.0 + nr.loop[(i + 1) % m];
        wind += std::arg(b / a);
    }
    nr.encirclements = static_cast<int>(std::lround(wind / (2.0 * std::numbers::pi)));
    nr.oscillation = nr.encirclements != 0;

    double worst_gm = std::numeric_limits<double>::infinity();
    double worst_pm = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < m; ++i) {
        const cd a = nr.loop[i], b = nr.loop[i + 1];
        nr.peak_loop_gain = std::max({nr.peak_loop_gain, std::abs(a), std::abs(b)});
        // phase crossover: T crosses the negative real axis
        if ((a.imag() <= 0.0) != (b.imag() <= 0.0)) {
            const double s = a.imag() / (a.imag() - b.imag());
            const cd c = a + s * (b - a);
            if (c.real() < 0.0) {
                nr.has_phase_crossover = true;
                worst_gm = std::min(worst_gm, -20.0 * std::log10(std::abs(c)));
            }
        }
        // gain crossover: |T| crosses one, refined by bisection on the exact T
        if ((std::abs(a) - 1.0) * (std::abs(b) - 1.0) < 0.0) {
            double lo = delta_grid[i], hi = delta_grid[i + 1];
            const bool rising = std::abs(a) < 1.0;
            for (int it = 0; it < opts.refine; ++it) {
                const double mid = 0.5 * (lo + hi);
                if ((std::abs(T(mid)) < 1.0) == rising) lo = mid; else hi = mid;
            }
            const cd c = T(0.5 * (lo + hi));
            nr.has_gain_crossover = true;
            const double pm = 180.0 - std::abs(std::arg(c)) * 180.0 / std::numbers::pi;
            worst_pm = std::min(worst_pm, pm);
        }
    }
    nr.gain_margin_db = worst_gm;
    nr.phase_margin_deg = worst_pm;
    report.nyquist.push_back(std::move(nr));
    return report;
}

std::vector<CoexistenceCell> coexistence_scan(const SlowFlowParams& base, const Resonator& res,
                                              const std::vector<int>& n_range,
                                              const std::vector<double>& pumps, double omega_p,
                                              int points, double span, int threads) {
    for (int n : n_range) {
        if (n == 1 || n < 0) throw DomainError("coexistence_scan: n must be 0 or >= 2");
    }
    if (points < 3) throw DomainError("coexistence_scan: need at least 3 grid points");
    std::vector<CoexistenceCell> cells(pumps.size());
    const std::size_t nn = n_range.size();
    std::vector<NyquistResult> results(pumps.size() * nn);
    // Base parameters are re-expressed around the requested pump frequency.
    SlowFlowParams sf0 = base;
    {
        const double wR0 = base.frame.omega_R;
        const double wa2 = 2.0 * wR0 * base.Omega_a + wR0 * wR0;
        const int n0 = n_range.empty() ? 2 : n_range.front();
        sf0.frame = build_frame(omega_p, res.omega_x, n0);
        sf0.Omega_a = (wa2 - sf0.frame.omega_R * sf0.frame.omega_R) / (2.0 * sf0.frame.omega_R);
    }
    parallel_for(pumps.size() * nn, threads, [&](std::size_t idx) {
        const std::size_t ip = idx / nn, in = idx % nn;
        SlowFlowParams sf = sf0;
        sf.V_0 = pumps[ip];
        const int n = n_range[in];
        const FrameSpec fr = build_frame(omega_p, res.omega_x, n);
        std::vector<double> grid(static_cast<std::size_t>(points));
        for (int k = 0; k < points; ++k) {
            grid[static_cast<std::size_t>(k)] =
                fr.Delta_x + res.gamma_x * span * (2.0 * k / (points - 1) - 1.0);
        }
        StabilityReport r = loop_analysis(sf, res, n, grid);
        results[idx] = std::move(r.nyquist.front());
        results[idx].delta.clear();
        results[idx].loop.clear();
    });
    for (std::size_t ip = 0; ip < pumps.size(); ++ip) {
        cells[ip].V_0 = pumps[ip];
        for (std::size_t in = 0; in < nn; ++in) {
            const NyquistResult& r = results[ip * nn + in];
            if (r.oscillation) cells[ip].oscillating.push_back(r.n);
            cells[ip].margins.push_back(r);
        }
    }
    return cells;
}

SlowFlowParams reduce_circuit(const CircuitParams& params, const FrameSpec& frame, double V_0,
                              double chi, double mu) {
    params.validate();
    SlowFlowParams sf;
    sf.frame = frame;
    sf.Omega_a = SlowFlowParams::frame_detuning(params.omega_x, frame.omega_R);
    sf.delta_a = params.linear_damping();
    sf.chi = chi;
    sf.mu = mu;
    sf.k_v = 1.0 - params.gamma_c / params.gamma_p;
    sf.k_p = 0.0;
    sf.omega_x = params.omega_x;
    sf.V_0 = V_0;
    sf.validate();
    return sf;
}

}  // namespace hypar
