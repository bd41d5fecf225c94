#pragma once

#include <functional>

#include "unfold/directions.hpp"

namespace unfold {

enum class Termination {
    reached_singularity,
    left_domain,
    escaped_to_infinity,
    step_limit,
    step_underflow,
};

struct Trajectory {
    std::vector<std::pair<double, cplx>> samples;  // (time, position)
    Termination termination = Termination::step_limit;
    int singular_id = -1;   // index of the singular point reached, if any
    double ode_residual = 0;

    cplx last() const { return samples.back().second; }
    double last_time() const { return samples.back().first; }
};

struct IntegrationControl {
    double rel_tol = 1e-9;
    double abs_tol = 1e-12;
    long max_steps = 1000000;
    double h_init = 1e-3;
    double h_min = 1e-14;
    double escape_radius = 1e6;
    double domain_radius = 1e300;         // |w| bound of the working domain
    std::vector<cplx> singular_points;    // stop when within stop_radius of one
    double stop_radius = 1e-9;
    std::vector<double> stop_radii;       // optional per-point override
    int sample_stride = 1;                // record every n-th accepted step

    double radius_for(std::size_t i) const {
        if (i < stop_radii.size() && stop_radii[i] > 0) return stop_radii[i];
        return stop_radius;
    }
};

// Dormand-Prince 5(4) on the plane R^2 = C for the real flow of Z.
inline Trajectory integrate(const std::function<cplx(cplx)>& Z, cplx start,
                            const IntegrationControl& ctl) {
    static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static const double a21 = 1.0 / 5;
    static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
    static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                        b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    Trajectory tr;
    double t = 0;
    cplx w = start;
    tr.samples.push_back({t, w});
    cplx k1 = Z(w);
    double h = std::min(ctl.h_init, 0.05 * (1.0 + std::abs(w)) / (1.0 + std::abs(k1)));
    long accepted = 0;
    for (long step = 0; step < ctl.max_steps; ++step) {
        cplx k2 = Z(w + h * (a21 * k1));
        cplx k3 = Z(w + h * (a31 * k1 + a32 * k2));
        cplx k4 = Z(w + h * (a41 * k1 + a42 * k2 + a43 * k3));
        cplx k5 = Z(w + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        cplx k6 = Z(w + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        cplx w5 = w + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        cplx k7 = Z(w5);
        cplx err_c = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        double err = std::abs(err_c);
        double scale = ctl.abs_tol + ctl.rel_tol * std::max(std::abs(w), std::abs(w5));
        double ratio = err / scale;
        if (!std::isfinite(err) || !std::isfinite(std::abs(w5))) ratio = 1e300;
        if (ratio <= 1.0) {
            t += h;
            w = w5;
            k1 = k7;
            ++accepted;
            tr.ode_residual = std::max(tr.ode_residual, err);
            if (accepted % ctl.sample_stride == 0) tr.samples.push_back({t, w});
            auto finish = [&](Termination term, int sid = -1) {
                if (tr.samples.back().first != t) tr.samples.push_back({t, w});
                tr.termination = term;
                tr.singular_id = sid;
            };
            for (std::size_t s = 0; s < ctl.singular_points.size(); ++s)
                if (std::abs(w - ctl.singular_points[s]) < ctl.radius_for(s)) {
                    finish(Termination::reached_singularity, int(s));
                    return tr;
                }
            if (std::abs(w) > ctl.domain_radius) {
                finish(Termination::left_domain);
                return tr;
            }
            if (std::abs(w) > ctl.escape_radius) {
                finish(Termination::escaped_to_infinity);
                return tr;
            }
        }
        double grow = (ratio > 1e-300 && std::isfinite(ratio)) ? 0.9 * std::pow(ratio, -0.2) : 5.0;
        if (ratio >= 1e300) grow = 0.2;
        h *= std::min(5.0, std::max(0.2, grow));
        if (h < ctl.h_min) {
            tr.termination = Termination::step_underflow;
            return tr;
        }
    }
    tr.termination = Termination::step_limit;
    return tr;
}

// ---------------------------------------------------------------------------
// Separatrices at infinity for polynomial fields

struct SeparatrixFan {
    struct Ray {
        double angle;   // asymptotic direction at infinity
        bool outbound;  // trajectory runs to infinity forward in time
    };
    std::vector<Ray> rays;  // 2 nu, alternating
};

// Directions where mu * lead * w^{nu+1} is radial at |w| -> infinity.
inline SeparatrixFan separatrices(const ComplexPoly& P, cplx mu, double /*R*/ = 0) {
    if (P.degree() < 2) throw numerical_error("separatrices: need deg P >= 2");
    int nu = P.degree() - 1;
    double a = std::arg(mu * P.lead());
    SeparatrixFan fan;
    for (int k = 0; k < nu; ++k)
        fan.rays.push_back({norm_angle((-a + 2 * pi * k) / nu), true});
    for (int k = 0; k < nu; ++k)
        fan.rays.push_back({norm_angle((pi - a + 2 * pi * k) / nu), false});
    std::sort(fan.rays.begin(), fan.rays.end(),
              [](const SeparatrixFan::Ray& x, const SeparatrixFan::Ray& y) {
                  return x.angle < y.angle;
              });
    return fan;
}

enum class TriState { no, yes, indeterminate };

namespace detail {
inline cplx dP_eval(const ComplexPoly& P, cplx w) { return P.derivative().eval(w); }
}  // namespace detail

struct HomoclinicResult {
    TriState state = TriState::no;
    Trajectory witness;           // the re-escaping trajectory, when found
    double match_distance = 0.0;  // angular distance to the nearest outbound ray
};

namespace detail {

struct ProbeOutcome {
    enum Kind { landed, escaped, budget } kind = budget;
    int bucket = -1;       // singular id when landed, circulation bucket otherwise
    double match = 1e300;  // angular distance to an outbound ray when escaped
    Trajectory traj;

    bool same_class(const ProbeOutcome& o) const {
        return kind == o.kind && bucket == o.bucket;
    }
};

}  // namespace detail

// A homoclinic connection exists when a trajectory from infinity, integrated
// forward, escapes back past R toward an outbound direction. Seeds a
// transversal arc around each inbound asymptote and bisects on outcome
// changes, which pins connections hiding between circulation basins.
inline HomoclinicResult detect_homoclinic(const ComplexPoly& P, cplx mu, double R = 0,
                                          double tol = 1e-3, long budget = 60000) {
    if (P.degree() < 2) throw numerical_error("detect_homoclinic: need deg P >= 2");
    auto rts = roots(P);
    double max_root = 0;
    for (auto& rc : rts) max_root = std::max(max_root, std::abs(rc.root));
    if (R <= 0) R = 10.0 * (1.0 + max_root);
    auto fan = separatrices(P, mu);
    auto Z = [&](cplx w) { return mu * P.eval(w); };
    auto Zb = [&](cplx w) { return -mu * P.eval(w); };

    IntegrationControl ctl;
    ctl.max_steps = budget;
    ctl.escape_radius = std::max(1e4, 40 * R);
    for (auto& rc : rts) ctl.singular_points.push_back(rc.root);
    double sing_gap = 1e300;
    for (std::size_t i = 0; i < rts.size(); ++i)
        for (std::size_t j = i + 1; j < rts.size(); ++j)
            sing_gap = std::min(sing_gap, std::abs(rts[i].root - rts[j].root));
    if (rts.size() == 1) sing_gap = 1.0;
    ctl.stop_radius = 1e-6 * sing_gap;
    ctl.sample_stride = 8;
    // Trapping radii at the sinks: inside a disk where the linear part
    // dominates and contracts, the orbit cannot leave, so stop early.
    for (auto& rc : rts) {
        double radius = ctl.stop_radius;
        if (rc.multiplicity == 1) {
            cplx lam = mu * detail::dP_eval(P, rc.root);
            if (lam.real() < 0) {
                double gap = 1e300;
                for (auto& other : rts)
                    if (std::abs(other.root - rc.root) > 1e-14)
                        gap = std::min(gap, std::abs(other.root - rc.root));
                if (rts.size() == 1) gap = 1.0;
                double probe_r = std::min(0.25 * gap, 1.0);
                double C = 0;
                for (int a = 0; a < 8; ++a) {
                    cplx w = rc.root + probe_r * unit(2 * pi * a / 8.0);
                    C = std::max(C, std::abs(mu * P.eval(w) - lam * (w - rc.root)) /
                                        (probe_r * probe_r));
                }
                double trap = std::min(probe_r, -lam.real() / (4 * std::max(C, 1e-300)));
                radius = std::max(radius, 0.8 * trap);
            }
        }
        ctl.stop_radii.push_back(radius);
    }

    auto probe = [&](double angle, long steps) -> detail::ProbeOutcome {
        IntegrationControl c = ctl;
        c.max_steps = steps;
        detail::ProbeOutcome out;
        out.traj = integrate(Z, 0.98 * R * unit(angle), c);
        switch (out.traj.termination) {
            case Termination::reached_singularity:
                out.kind = detail::ProbeOutcome::landed;
                out.bucket = out.traj.singular_id;
                break;
            case Termination::escaped_to_infinity: {
                out.kind = detail::ProbeOutcome::escaped;
                double ang = norm_angle(std::arg(out.traj.last()));
                int ray_idx = -1;
                for (std::size_t k = 0; k < fan.rays.size(); ++k)
                    if (fan.rays[k].outbound) {
                        double d = dist_mod_2pi(ang, fan.rays[k].angle);
                        if (d < out.match) {
                            out.match = d;
                            ray_idx = int(k);
                        }
                    }
                // include the side of the outbound ray: a connection sits at
                // the sign flip, so bisection can home onto it
                double signed_diff =
                    std::remainder(ang - fan.rays[std::size_t(ray_idx)].angle, 2 * pi);
                out.bucket = 2 * ray_idx + (signed_diff > 0 ? 1 : 0);
                break;
            }
            default: {
                // circulation bucket: nearest singular point to the orbit mean
                out.kind = detail::ProbeOutcome::budget;
                cplx mean = 0;
                for (auto& [s, w] : out.traj.samples) mean += w;
                mean /= double(out.traj.samples.size());
                double best = 1e300;
                for (std::size_t k = 0; k < rts.size(); ++k)
                    if (std::abs(mean - rts[k].root) < best) {
                        best = std::abs(mean - rts[k].root);
                        out.bucket = int(k);
                    }
            }
        }
        return out;
    };

    HomoclinicResult res;
    bool inconclusive = false;
    auto certify = [&](const detail::ProbeOutcome& out, double angle) -> bool {
        if (out.kind != detail::ProbeOutcome::escaped || out.match >= tol) return false;
        IntegrationControl c = ctl;
        Trajectory back = integrate(Zb, 0.98 * R * unit(angle), c);
        if (back.termination != Termination::escaped_to_infinity) return false;
        res.state = TriState::yes;
        res.witness = out.traj;
        res.match_distance = out.match;
        return true;
    };

    for (auto& ray : fan.rays) {
        if (ray.outbound) continue;
        double arc = 1e300;
        for (auto& r2 : fan.rays)
            if (&r2 != &ray) arc = std::min(arc, dist_mod_2pi(ray.angle, r2.angle));
        arc /= 3.0;
        const int N = 9;
        std::vector<std::pair<double, detail::ProbeOutcome>> scan;
        bool seed_budget = false;
        for (int i = 0; i < N; ++i) {
            double a = ray.angle - arc + 2 * arc * i / (N - 1);
            auto out = probe(a, budget);
            if (certify(out, a)) return res;
            if (out.kind == detail::ProbeOutcome::budget) seed_budget = true;
            scan.push_back({a, out});
        }
        // Priority subdivision: repeatedly split the most promising adjacent
        // pair with differing outcomes. Opposite escape sides around one
        // outbound ray sandwich a connection, so such pairs go first.
        bool open_boundary = false;
        for (int iter = 0; iter < 220; ++iter) {
            std::size_t pick = scan.size();
            bool pick_escape_pair = false;
            double pick_gap = 1e300;
            for (std::size_t i = 0; i + 1 < scan.size(); ++i) {
                auto& [a0, o0] = scan[i];
                auto& [a1, o1] = scan[i + 1];
                if (o0.same_class(o1)) continue;
                double gap = a1 - a0;
                if (gap < 1e-13) continue;
                bool esc_pair = o0.kind == detail::ProbeOutcome::escaped &&
                                o1.kind == detail::ProbeOutcome::escaped &&
                                (o0.bucket / 2 == o1.bucket / 2) && (o0.bucket != o1.bucket);
                if ((esc_pair && !pick_escape_pair) ||
                    (esc_pair == pick_escape_pair && gap < pick_gap)) {
                    pick = i;
                    pick_gap = gap;
                    pick_escape_pair = esc_pair;
                }
            }
            if (pick == scan.size()) break;  // nothing splittable left
            double mid = (scan[pick].first + scan[pick + 1].first) / 2;
            auto om = probe(mid, budget);
            if (certify(om, mid)) return res;
            scan.insert(scan.begin() + std::ptrdiff_t(pick) + 1, {mid, om});
        }
        for (std::size_t i = 0; i + 1 < scan.size(); ++i)
            if (!scan[i].second.same_class(scan[i + 1].second)) open_boundary = true;
        if (open_boundary || (seed_budget && rts.size() < 2)) inconclusive = true;
    }
    res.state = inconclusive ? TriState::indeterminate : TriState::no;
    return res;
}

// ---------------------------------------------------------------------------
// Tangencies between a flow and a circle

struct TangentPoint {
    double angle;   // position c + r e^{i angle}
    cplx position;
    bool convex;    // trajectory germ stays inside the basic set
};

struct TangencySet {
    cplx center;
    double radius = 0;
    std::vector<TangentPoint> points;
};

// Zeros of g(theta) = Re(Z(p) conj(p - c)) on the circle |p - c| = r, located
// by sign-change bisection. `inside_is_disk` tells on which side the basic
// set lies, fixing the convexity convention.
inline TangencySet circle_tangencies(const std::function<cplx(cplx)>& Z,
                                     const std::function<cplx(cplx)>& dZ, cplx center,
                                     double radius, bool inside_is_disk, int scan = 720) {
    TangencySet ts;
    ts.center = center;
    ts.radius = radius;
    auto g = [&](double th) {
        cplx p = center + radius * unit(th);
        return (Z(p) * std::conj(p - center)).real();
    };
    std::vector<double> th(std::size_t(scan) + 1), gv(std::size_t(scan) + 1);
    double gmax = 0;
    for (int i = 0; i <= scan; ++i) {
        th[std::size_t(i)] = 2 * pi * i / scan;
        gv[std::size_t(i)] = g(th[std::size_t(i)]);
        gmax = std::max(gmax, std::abs(gv[std::size_t(i)]));
    }
    if (gmax < 1e-14)
        throw numerical_error("circle_tangencies: tangency function degenerate at this radius");
    for (int i = 0; i < scan; ++i) {
        double ga = gv[std::size_t(i)], gb = gv[std::size_t(i) + 1];
        if (ga == 0.0) ga = 1e-300;
        if (!(ga * gb < 0)) continue;
        double lo = th[std::size_t(i)], hi = th[std::size_t(i) + 1];
        for (int it = 0; it < 80; ++it) {
            double mid = (lo + hi) / 2, gm = g(mid);
            if (gm == 0) { lo = hi = mid; break; }
            if (ga * gm < 0) hi = mid;
            else { lo = mid; ga = gm; }
        }
        double angle = (lo + hi) / 2;
        cplx p = center + radius * unit(angle);
        // h(s) = |gamma(s) - c|^2 / 2 has h'' = Re(Z' Z conj(p-c)) + |Z|^2
        cplx Zp = Z(p);
        double h2 = (dZ(p) * Zp * std::conj(p - center)).real() + std::norm(Zp);
        bool convex = inside_is_disk ? (h2 < 0) : (h2 > 0);
        ts.points.push_back({angle, p, convex});
    }
    std::sort(ts.points.begin(), ts.points.end(),
              [](const TangentPoint& a, const TangentPoint& b) { return a.angle < b.angle; });
    return ts;
}

// Alternation: between consecutive tangencies of Z there is exactly one of Z2.
inline bool tangencies_alternate(const TangencySet& a, const TangencySet& b) {
    if (a.points.empty() || a.points.size() != b.points.size()) return false;
    std::size_t n = a.points.size();
    for (std::size_t i = 0; i < n; ++i) {
        double lo = a.points[i].angle;
        double hi = a.points[(i + 1) % n].angle;
        if (i + 1 == n) hi += 2 * pi;
        int count = 0;
        for (auto& q : b.points) {
            double x = q.angle;
            if (x < lo) x += 2 * pi;
            if (x > lo && x < hi) ++count;
        }
        if (count != 1) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// alpha / omega classification of points under Re(aleph* X)

struct LimitLabel {
    bool at_infinity = true;  // left the domain (or did not converge)
    int curve_id = -1;        // index into the fixed-curve list otherwise
    bool indeterminate = false;

    bool operator==(const LimitLabel& o) const {
        return at_infinity == o.at_infinity && curve_id == o.curve_id &&
               indeterminate == o.indeterminate;
    }
};

struct PointClass {
    LimitLabel alpha, omega;
};

// Integrates Re(aleph* X) forward and backward in the fiber {x} x B(0,eps).
inline PointClass classify_point(const MultiDirection& md, const SplittingTree& tree,
                                 const VectorFieldUnfolding& X, cplx x, cplx y,
                                 long budget = 400000) {
    std::vector<cplx> sing;
    for (auto& c : X.curves.curves) sing.push_back(c.gamma.eval(x));
    double gap = 1e300;
    for (std::size_t i = 0; i < sing.size(); ++i)
        for (std::size_t j = i + 1; j < sing.size(); ++j)
            gap = std::min(gap, std::abs(sing[i] - sing[j]));
    if (sing.size() < 2) gap = 1.0;

    IntegrationControl ctl;
    ctl.max_steps = budget;
    ctl.domain_radius = tree.config.epsilon;
    ctl.escape_radius = tree.config.epsilon * 1.5;
    ctl.singular_points = sing;
    ctl.stop_radius = std::max(1e-6 * gap, 1e-12);

    auto classify = [&](double direction) -> LimitLabel {
        auto Z = [&](cplx w) -> cplx {
            cplx mu;
            try {
                mu = aleph_star(md, tree, x, w);
            } catch (const numerical_error&) {
                mu = cplx(0, 1);
            }
            return direction * mu * X.eval(x, w);
        };
        Trajectory tr = integrate(Z, y, ctl);
        LimitLabel lb;
        switch (tr.termination) {
            case Termination::reached_singularity:
                lb.at_infinity = false;
                lb.curve_id = tr.singular_id;
                break;
            case Termination::left_domain:
            case Termination::escaped_to_infinity:
                lb.at_infinity = true;
                break;
            default:
                lb.at_infinity = true;
                lb.indeterminate = true;
        }
        return lb;
    };

    for (auto& s : sing)
        if (std::abs(y - s) < ctl.stop_radius * 2)
            throw numerical_error("classify_point: start too close to Sing X");

    PointClass pc;
    pc.omega = classify(+1.0);
    pc.alpha = classify(-1.0);
    return pc;
}

}  // namespace unfold
