#pragma once

#include <memory>

#include "unfold/flows.hpp"
#include "unfold/vector_field.hpp"

namespace unfold {

// ---------------------------------------------------------------------------
// Closed-form Fatou coordinate of a normal-form field on one fiber

struct PoleTerm {
    cplx pos;
    std::vector<cplx> coeffs;  // coeffs[k-1] multiplies 1/(y-pos)^k
    cplx log_coeff() const { return coeffs.empty() ? cplx(0) : coeffs[0]; }
};

// Partial-fraction data of the time form dy / Q_x(y) at fixed x, where
// Q_x is the fiber polynomial of a normal-form field. The integral is
//   psi(y) = rational_part(y) + sum_r c_{r,1} log(y - r) + const,
// with the log branches tracked by FatouFrame along explicit paths.
class NormalFatou {
  public:
    NormalFatou(const VectorFieldUnfolding& X, cplx x, double domain_radius) : x_(x) {
        Q_ = X.fiber_poly(x);
        dQ_ = Q_.derivative();
        auto pf = partial_fractions(Q_);
        for (auto& t : pf) {
            PoleTerm* pt = nullptr;
            for (auto& existing : poles_)
                if (std::abs(existing.pos - t.root) < 1e-12) pt = &existing;
            if (!pt) {
                poles_.push_back({t.root, {}});
                pt = &poles_.back();
            }
            if (int(pt->coeffs.size()) < t.order) pt->coeffs.resize(std::size_t(t.order), 0);
            pt->coeffs[std::size_t(t.order) - 1] = t.coeff;
        }
        min_gap_ = 1e300;
        for (std::size_t i = 0; i < poles_.size(); ++i)
            for (std::size_t j = i + 1; j < poles_.size(); ++j)
                min_gap_ = std::min(min_gap_, std::abs(poles_[i].pos - poles_[j].pos));
        if (poles_.size() < 2) min_gap_ = 1.0;
        // The curve poles sit inside the domain by construction; any unit
        // zero wandering in means the normal form is unusable at this x.
        if (domain_radius < 1e100) {
            for (auto& p : poles_) {
                if (std::abs(p.pos) > domain_radius * 1.2) continue;
                double d = 1e300;
                for (auto& c : X.curves.curves)
                    d = std::min(d, std::abs(p.pos - c.gamma.eval(x)));
                if (d > 1e-6 * (1 + domain_radius))
                    throw numerical_error("NormalFatou: unit zero entered the evaluation domain");
            }
        }
    }

    cplx x() const { return x_; }
    const std::vector<PoleTerm>& poles() const { return poles_; }
    double min_pole_gap() const { return min_gap_; }
    cplx Q(cplx y) const { return Q_.eval(y); }
    cplx dQ(cplx y) const { return dQ_.eval(y); }
    cplx dpsi(cplx y) const { return 1.0 / Q_.eval(y); }

    // Single-valued part of the antiderivative (orders >= 2).
    cplx rational_part(cplx y) const {
        cplx acc = 0;
        for (auto& p : poles_)
            for (std::size_t k = 2; k <= p.coeffs.size(); ++k) {
                cplx c = p.coeffs[k - 1];
                if (std::abs(c) == 0.0) continue;
                acc += c / (1.0 - double(k)) * std::pow(y - p.pos, 1.0 - double(k));
            }
        return acc;
    }

    double dist_to_poles(cplx y) const {
        double d = 1e300;
        for (auto& p : poles_) d = std::min(d, std::abs(y - p.pos));
        return d;
    }

  private:
    cplx x_;
    ComplexPoly Q_, dQ_;
    std::vector<PoleTerm> poles_;
    double min_gap_ = 1.0;
};

// A branch-tracked value of the normal-form Fatou coordinate: advancing the
// frame along a path accumulates winding-corrected log increments.
struct FatouFrame {
    const NormalFatou* nf = nullptr;
    cplx y;
    cplx value = 0;

    FatouFrame() = default;
    FatouFrame(const NormalFatou& n, cplx y0, cplx v0 = 0) : nf(&n), y(y0), value(v0) {}

    // Straight-segment advance; subdivides so every log increment stays well
    // within the principal branch. Throws when the segment runs into a pole.
    void advance(cplx y_next, int depth = 0) {
        if (depth > 48) throw numerical_error("FatouFrame: segment subdivision exploded");
        double seg = std::abs(y_next - y);
        if (seg == 0.0) return;
        double clearance = std::min(nf->dist_to_poles(y), nf->dist_to_poles(y_next));
        if (clearance < 1e-13 * (1 + std::abs(y)))
            throw numerical_error("FatouFrame: path crosses a singular point");
        if (seg > 0.5 * clearance) {
            cplx mid = y + (y_next - y) * 0.5;
            advance(mid, depth + 1);
            advance(y_next, depth + 1);
            return;
        }
        cplx inc = nf->rational_part(y_next) - nf->rational_part(y);
        for (auto& p : nf->poles()) {
            cplx c = p.log_coeff();
            if (std::abs(c) == 0.0) continue;
            inc += c * std::log((y_next - p.pos) / (y - p.pos));
        }
        value += inc;
        y = y_next;
    }

    // Advance with a perpendicular detour when the straight segment passes
    // too close to a pole.
    void advance_with_detour(cplx y_next) {
        cplx dir = y_next - y;
        double seg = std::abs(dir);
        if (seg == 0.0) return;
        for (auto& p : nf->poles()) {
            // distance from the pole to the segment
            cplx rel = (p.pos - y) / dir;
            double t = std::min(1.0, std::max(0.0, rel.real()));
            cplx closest = y + t * dir;
            double d = std::abs(p.pos - closest);
            double d_end = std::min(std::abs(p.pos - y), std::abs(p.pos - y_next));
            if (d < 0.35 * d_end || (d < 0.05 * seg && t > 0 && t < 1)) {
                // waypoint: push the midpoint away from the pole
                cplx mid = y + 0.5 * dir;
                cplx away = mid - p.pos;
                double norm = std::abs(away);
                cplx waypoint =
                    (norm < 1e-14) ? mid + (cplx(0, 1) * dir) * 0.5
                                   : p.pos + away / norm * std::max(0.45 * d_end, 1.5 * norm);
                advance_with_detour(waypoint);
                advance_with_detour(y_next);
                return;
            }
        }
        advance(y_next);
    }
};

// ---------------------------------------------------------------------------
// Map evaluation on a fiber

namespace detail {

// Fixed-step RK4 for the complex autonomous ODE y' = Q(y), time tau. Used
// only where |Q| is tiny and the Abel step would divide by a near-zero.
inline cplx rk4_flow(const std::function<cplx(cplx)>& Q, cplx y, double tau, int steps = 64) {
    double h = tau / steps;
    for (int i = 0; i < steps; ++i) {
        cplx k1 = Q(y);
        cplx k2 = Q(y + 0.5 * h * k1);
        cplx k3 = Q(y + 0.5 * h * k2);
        cplx k4 = Q(y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return y;
}

}  // namespace detail

// Time-tau flow of the normal-form fiber field through the Abel relation
// psi(flow(y)) = psi(y) + tau, solved by Newton with branch tracking. Where
// the motion is small against the pole distance a fixed-step integrator is
// both cheaper and free of the psi-value cancellation near poles.
inline cplx abel_flow_step(const NormalFatou& nf, cplx y, double tau, int depth = 0) {
    if (depth > 24) throw numerical_error("abel_flow_step: step subdivision exploded");
    cplx Qy = nf.Q(y);
    double clearance = nf.dist_to_poles(y);
    if (std::abs(Qy) * std::fabs(tau) < 0.01 * clearance) {
        return detail::rk4_flow([&](cplx w) { return nf.Q(w); }, y, tau, 128);
    }
    cplx euler = y + tau * Qy;
    if (std::abs(euler - y) > 0.2 * clearance) {
        cplx half = abel_flow_step(nf, y, tau / 2, depth + 1);
        return abel_flow_step(nf, half, tau / 2, depth + 1);
    }
    FatouFrame fr(nf, y, 0.0);
    cplx target = tau;
    cplx cur = euler;
    try {
        fr.advance_with_detour(cur);
        for (int it = 0; it < 60; ++it) {
            cplx err = fr.value - target;
            if (std::abs(err) < 1e-14 * (1 + std::abs(target))) return cur;
            cplx step = -err * nf.Q(cur);
            // converged in y-space: the psi residual is pure cancellation
            if (std::abs(step) < 4e-16 * (1 + std::abs(cur))) return cur;
            if (std::abs(step) > 0.5 * nf.dist_to_poles(cur))
                throw numerical_error("abel_flow_step: Newton left the local patch");
            cplx next = cur + step;
            fr.advance_with_detour(next);
            cur = next;
        }
        throw numerical_error("abel_flow_step: Newton stalled");
    } catch (const numerical_error&) {
        cplx half = abel_flow_step(nf, y, tau / 2, depth + 1);
        return abel_flow_step(nf, half, tau / 2, depth + 1);
    }
}

// One-fiber view of a parametrized map: forward, derivative, inverse.
struct FiberMap {
    std::function<cplx(cplx)> apply;
    std::function<cplx(cplx)> derivative;
    std::function<cplx(cplx)> apply_inverse;

    cplx iterate(cplx y, int n) const {
        for (int k = 0; k < n; ++k) y = apply(y);
        return y;
    }
};

// Interface shared by the unfolding and anything conjugated to it.
struct ParabolicMap {
    virtual ~ParabolicMap() = default;
    virtual const FixedCurveSet& fixed_curves() const = 0;
    virtual BiSeries f_total(int D) const = 0;  // y o phi - y as a series
    virtual FiberMap fiber(cplx x) const = 0;
};

// phi with y o phi = y o exp(X) + pert, Fix(phi) = Sing(X).
class UnfoldingMap : public ParabolicMap {
  public:
    VectorFieldUnfolding X;  // convergent normal field (x_exponent = 0)
    BiSeries pert;           // perturbation, must lie in (f^2)

    UnfoldingMap() = default;
    UnfoldingMap(VectorFieldUnfolding X_, BiSeries pert_) : X(std::move(X_)), pert(std::move(pert_)) {
        X.validate();
        validate_perturbation();
    }

    static UnfoldingMap flow_of(VectorFieldUnfolding X_) {
        UnfoldingMap m;
        m.X = std::move(X_);
        m.X.validate();
        m.pert = BiSeries::zero(m.X.unit.order());
        return m;
    }

    const FixedCurveSet& fixed_curves() const override { return X.curves; }

    void validate_perturbation() const {
        if (pert.is_zero(0.0)) return;
        const int D = pert.order();
        int N = X.curves.total_multiplicity();
        BiSeries F = X.curves.product_series(D);
        BiSeries F2 = F * F;
        auto [q, r] = divide_by_y_monic(pert, F2, 2 * N);
        if (r.max_abs() > 1e-10 * std::max(1.0, pert.max_abs()))
            throw numerical_error("UnfoldingMap: perturbation not in the square of the fixed ideal");
    }

    BiSeries f_total(int D) const override {
        BiSeries g = X.y_component_series(D);
        BiSeries res = exp_field_apply(g) - BiSeries::var_y(D);
        if (!pert.is_zero(0.0)) {
            BiSeries p(D);
            for (int i = 0; i <= std::min(D, pert.order()); ++i)
                for (int j = 0; i + j <= std::min(D, pert.order()); ++j) p.set(i, j, pert.get(i, j));
            res += p;
        }
        return res;
    }

    FiberMap fiber(cplx x) const override {
        auto nf = std::make_shared<NormalFatou>(X, x, 1e300);
        const BiSeries* pp = &pert;
        bool has_pert = !pert.is_zero(0.0);
        BiSeries dp = pert.dy();
        FiberMap fm;
        fm.apply = [nf, pp, has_pert, x](cplx y) {
            cplx base = abel_flow_step(*nf, y, 1.0);
            return has_pert ? base + pp->eval(x, y) : base;
        };
        fm.derivative = [nf, dp, has_pert, x](cplx y) {
            cplx fy = abel_flow_step(*nf, y, 1.0);
            cplx qy = nf->Q(y);
            cplx dflow = (std::abs(qy) < 1e-13) ? cplx(1) : nf->Q(fy) / qy;
            return has_pert ? dflow + dp.eval(x, y) : dflow;
        };
        auto fwd = fm.apply;
        auto dfwd = fm.derivative;
        fm.apply_inverse = [nf, fwd, dfwd](cplx y) {
            cplx z = abel_flow_step(*nf, y, -1.0);  // seed: inverse of the flow part
            for (int it = 0; it < 60; ++it) {
                cplx err = fwd(z) - y;
                if (std::abs(err) < 2e-16 * (1 + std::abs(y))) return z;
                cplx d = dfwd(z);
                if (std::abs(d) < 1e-14) break;
                cplx step = err / d;
                z -= step;
                // converged to the machine floor in z-space
                if (std::abs(step) < 4e-16 * (1 + std::abs(z))) return z;
            }
            cplx err = fwd(z) - y;
            if (std::abs(err) < 1e-10 * (1 + std::abs(y))) return z;
            throw numerical_error("UnfoldingMap: inverse Newton failed");
        };
        return fm;
    }
};

// A map given directly by y o phi = y + f(x, y) with polynomial f vanishing
// on the stated curves with the stated multiplicities.
class PolynomialMap : public ParabolicMap {
  public:
    FixedCurveSet curves;
    BiSeries f;  // polynomial increment

    PolynomialMap(FixedCurveSet c, BiSeries f_) : curves(std::move(c)), f(std::move(f_)) {
        curves.validate();
        int N = curves.total_multiplicity();
        BiSeries F = curves.product_series(f.order());
        auto [q, r] = divide_by_y_monic(f, F, N);
        if (r.max_abs() > 1e-10 * std::max(1.0, f.max_abs()))
            throw numerical_error("PolynomialMap: increment does not vanish on the curves");
        if (std::abs(q.get(0, 0)) < 1e-14)
            throw numerical_error("PolynomialMap: increment has excess vanishing at the origin");
    }

    const FixedCurveSet& fixed_curves() const override { return curves; }

    BiSeries f_total(int D) const override {
        BiSeries r(D);
        for (int i = 0; i <= std::min(D, f.order()); ++i)
            for (int j = 0; i + j <= std::min(D, f.order()); ++j) r.set(i, j, f.get(i, j));
        return r;
    }

    FiberMap fiber(cplx x) const override {
        const BiSeries* fp = &f;
        BiSeries dfy = f.dy();
        FiberMap fm;
        fm.apply = [fp, x](cplx y) { return y + fp->eval(x, y); };
        fm.derivative = [dfy, x](cplx y) { return 1.0 + dfy.eval(x, y); };
        auto fwd = fm.apply;
        auto dfwd = fm.derivative;
        fm.apply_inverse = [fp, x, fwd, dfwd](cplx y) {
            cplx z = y - fp->eval(x, y);
            for (int it = 0; it < 60; ++it) {
                cplx err = fwd(z) - y;
                if (std::abs(err) < 1e-14 * (1 + std::abs(y))) return z;
                z -= err / dfwd(z);
            }
            cplx err = fwd(z) - y;
            if (std::abs(err) < 1e-10 * (1 + std::abs(y))) return z;
            throw numerical_error("PolynomialMap: inverse Newton failed");
        };
        return fm;
    }
};

// sigma o phi o sigma^{-1} for a polynomial-in-y conjugacy sigma fixing the
// curves pointwise: sigma(x, y) = (x, y + unit-sized multiple of the ideal).
class ConjugatedMap : public ParabolicMap {
  public:
    const UnfoldingMap* base = nullptr;
    BiSeries sigma_y;  // y o sigma as a series (y + ideal terms)

    ConjugatedMap(const UnfoldingMap& m, BiSeries sy) : base(&m), sigma_y(std::move(sy)) {
        if (std::abs(sigma_y.get(0, 1) - cplx(1)) > 1e-12 || std::abs(sigma_y.get(0, 0)) > 0)
            throw numerical_error("ConjugatedMap: sigma must be tangent to the identity in y");
    }

    const FixedCurveSet& fixed_curves() const override { return base->X.curves; }

    BiSeries f_total(int D) const override {
        BiSeries phi_y = BiSeries::var_y(D) + base->f_total(D);
        BiSeries sinv = series_inverse_y(resized(sigma_y, D));
        BiSeries comp = phi_y.substitute_y(sinv);
        comp = resized(sigma_y, D).substitute_y(comp);
        return comp - BiSeries::var_y(D);
    }

    FiberMap fiber(cplx x) const override {
        FiberMap inner = base->fiber(x);
        const int D = sigma_y.order();
        // sigma as a one-variable polynomial in y at this x
        std::vector<cplx> sc;
        for (int j = 0; j <= D; ++j) {
            cplx acc = 0;
            for (int i = 0; i + j <= D; ++i) acc += sigma_y.get(i, j) * std::pow(x, i);
            sc.push_back(acc);
        }
        ComplexPoly s(std::move(sc));
        ComplexPoly ds = s.derivative();
        auto apply_sigma = [s](cplx y) { return s.eval(y); };
        auto apply_sigma_inv = [s, ds](cplx y) {
            cplx z = y;
            for (int it = 0; it < 80; ++it) {
                cplx err = s.eval(z) - y;
                if (std::abs(err) < 2e-16 * (1 + std::abs(y))) return z;
                cplx step = err / ds.eval(z);
                z -= step;
                if (std::abs(step) < 4e-16 * (1 + std::abs(z))) return z;
            }
            cplx err = s.eval(z) - y;
            if (std::abs(err) < 1e-12 * (1 + std::abs(y))) return z;
            throw numerical_error("ConjugatedMap: sigma inverse Newton failed");
        };
        FiberMap fm;
        fm.apply = [=](cplx y) { return apply_sigma(inner.apply(apply_sigma_inv(y))); };
        fm.derivative = [=](cplx y) {
            cplx u = apply_sigma_inv(y);
            return ds.eval(inner.apply(u)) * inner.derivative(u) / ds.eval(u);
        };
        fm.apply_inverse = [=](cplx y) {
            return apply_sigma(inner.apply_inverse(apply_sigma_inv(y)));
        };
        return fm;
    }

  private:
    static BiSeries resized(const BiSeries& s, int D) {
        if (s.order() == D) return s;
        BiSeries r(D);
        for (int i = 0; i <= std::min(D, s.order()); ++i)
            for (int j = 0; i + j <= std::min(D, s.order()); ++j) r.set(i, j, s.get(i, j));
        return r;
    }
};

// ---------------------------------------------------------------------------
// Infinitesimal generator and k-convergent normal forms

struct GeneratorData {
    BiSeries g;      // hat-u * f: the generator coefficient of d/dy
    BiSeries u_hat;  // formal unit
};

namespace detail {

// f(x, y) -> s^w f(s x, s y): coefficient (i,j) picks up s^{i+j+w}. The
// generator pipeline runs at a domain-sized scale so the exponential-operator
// intermediates stay O(1); coefficients are mapped back afterwards.
inline BiSeries rescale(const BiSeries& f, double s, int w) {
    BiSeries r(f.order());
    for (int i = 0; i <= f.order(); ++i)
        for (int j = 0; i + j <= f.order(); ++j) {
            cplx v = f.get(i, j);
            if (std::abs(v) == 0.0) continue;
            r.set(i, j, v * std::pow(s, i + j + w));
        }
    return r;
}

inline FixedCurveSet rescale_curves(const FixedCurveSet& curves, double s) {
    FixedCurveSet out;
    for (auto& c : curves.curves) {
        std::vector<cplx> coef;
        for (int i = 0; i <= c.gamma.degree(); ++i)
            coef.push_back(c.gamma.coeff(i) * std::pow(s, i - 1));
        out.curves.push_back({ComplexPoly(std::move(coef)), c.multiplicity});
    }
    return out;
}

}  // namespace detail

// Default working scale for series normal-form computations.
inline constexpr double generator_scale = 0.5;

namespace detail {

// Runs the series generator at the working scale, halving the scale when the
// iteration's roundoff floor refuses to close (heavily composed inputs).
inline BiSeries generator_with_retry(const BiSeries& f_unscaled, double& s) {
    for (int attempt = 0; attempt < 4; ++attempt) {
        try {
            return infinitesimal_generator_series(rescale(f_unscaled, s, -1));
        } catch (const numerical_error&) {
            s *= 0.7;
        }
    }
    return infinitesimal_generator_series(rescale(f_unscaled, s, -1));
}

}  // namespace detail

inline GeneratorData infinitesimal_generator(const ParabolicMap& phi, int D,
                                             double scale = generator_scale) {
    double s = scale;
    BiSeries f_raw = phi.f_total(D);
    BiSeries g = detail::generator_with_retry(f_raw, s);
    BiSeries f = detail::rescale(f_raw, s, -1);
    FixedCurveSet curves = detail::rescale_curves(phi.fixed_curves(), s);
    int N = curves.total_multiplicity();
    BiSeries F = curves.product_series(D);
    auto [qg, rg] = divide_by_y_monic(g, F, N);
    if (rg.max_abs() > 1e-8 * std::max(1.0, g.max_abs()))
        throw numerical_error("infinitesimal_generator: generator not divisible by the fixed ideal");
    auto [qf, rf] = divide_by_y_monic(f, F, N);
    if (rf.max_abs() > 1e-8 * std::max(1.0, f.max_abs()))
        throw numerical_error("infinitesimal_generator: map increment not divisible by the fixed ideal");
    GeneratorData out{detail::rescale(g, 1.0 / s, -1), detail::rescale(qg * qf.unit_inverse(), 1.0 / s, 0)};
    return out;
}

// The k-convergent normal form X_k = u_k(x,y) prod (y - gamma_j)^{n_j} d/dy
// with u_hat - u_k in (f^k): u_k is the remainder of g/F modulo F^k.
inline VectorFieldUnfolding k_normal_form(const ParabolicMap& phi, int k, int D,
                                          double scale = generator_scale) {
    if (k < 1) throw numerical_error("k_normal_form: k >= 1 required");
    double s = scale;
    int N = phi.fixed_curves().total_multiplicity();
    if (N * k >= D)
        throw numerical_error("k_normal_form: truncation order too small to resolve f^k");
    BiSeries f_raw = phi.f_total(D);
    BiSeries g = detail::generator_with_retry(f_raw, s);
    FixedCurveSet curves = detail::rescale_curves(phi.fixed_curves(), s);
    BiSeries F = curves.product_series(D);
    auto [U, rem] = divide_by_y_monic(g, F, N);
    if (rem.max_abs() > 1e-8 * std::max(1.0, g.max_abs()))
        throw numerical_error("k_normal_form: generator not divisible by the fixed ideal");
    BiSeries Fk = BiSeries::constant(D, 1.0);
    for (int i = 0; i < k; ++i) Fk = Fk * F;
    auto [hq, uk] = divide_by_y_monic(U, Fk, N * k);
    (void)hq;
    VectorFieldUnfolding Xk;
    Xk.unit = detail::rescale(uk, 1.0 / s, N - 1);
    Xk.curves = phi.fixed_curves();
    Xk.x_exponent = 0;
    Xk.nf_order = k;
    Xk.validate();
    return Xk;
}

// ---------------------------------------------------------------------------
// Petal anchors: tangencies of Re(iX) with the circle |y| = eps

struct PetalSystem {
    VectorFieldUnfolding X;
    double eps = 0;
    int nu = 0;
    std::vector<double> base_angles;  // anchor angles at x = 0, ccw
    std::vector<int> sign;            // +1 attracting (Re X points inward)

    int count() const { return int(base_angles.size()); }

    // Tangency angles at parameter x, continued from the base by nearest
    // matching over a short homotopy in |x|.
    std::vector<cplx> anchors_at(cplx x, int steps = 6) const {
        std::vector<double> angles = base_angles;
        for (int s = 1; s <= steps; ++s) {
            cplx xs = x * (double(s) / steps);
            ComplexPoly fib = X.fiber_poly(xs);
            ComplexPoly dfib = fib.derivative();
            auto Z = [&](cplx y) { return cplx(0, 1) * fib.eval(y); };
            auto dZ = [&](cplx y) { return cplx(0, 1) * dfib.eval(y); };
            auto ts = circle_tangencies(Z, dZ, 0.0, eps, true);
            if (int(ts.points.size()) != count())
                throw numerical_error("PetalSystem: tangency count changed along continuation");
            std::vector<double> next(angles.size());
            std::vector<bool> used(ts.points.size(), false);
            for (std::size_t j = 0; j < angles.size(); ++j) {
                double best = 1e300;
                std::size_t arg = 0;
                for (std::size_t m = 0; m < ts.points.size(); ++m) {
                    if (used[m]) continue;
                    double d = dist_mod_2pi(angles[j], ts.points[m].angle);
                    if (d < best) {
                        best = d;
                        arg = m;
                    }
                }
                used[arg] = true;
                next[j] = ts.points[arg].angle;
            }
            angles = next;
        }
        std::vector<cplx> out;
        for (double a : angles) out.push_back(eps * unit(a));
        return out;
    }
};

inline PetalSystem petal_system(const VectorFieldUnfolding& X, double eps) {
    PetalSystem ps;
    ps.X = X;
    ps.eps = eps;
    ps.nu = X.nu();
    ComplexPoly fib = X.fiber_poly(0.0);
    ComplexPoly dfib = fib.derivative();
    auto Z = [&](cplx y) { return cplx(0, 1) * fib.eval(y); };
    auto dZ = [&](cplx y) { return cplx(0, 1) * dfib.eval(y); };
    auto ts = circle_tangencies(Z, dZ, 0.0, eps, true);
    if (int(ts.points.size()) != 2 * ps.nu)
        throw numerical_error("petal_system: expected 2 nu tangencies at x = 0");
    for (auto& p : ts.points) {
        ps.base_angles.push_back(p.angle);
        double inward = (fib.eval(p.position) * std::conj(p.position)).real();
        ps.sign.push_back(inward < 0 ? +1 : -1);
    }
    // orientations must alternate
    for (int j = 0; j < ps.count(); ++j)
        if (ps.sign[std::size_t(j)] == ps.sign[std::size_t((j + 1) % ps.count())])
            throw numerical_error("petal_system: orientations do not alternate");
    return ps;
}

// The half-plane-with-wedges region used by the orbit-sum tail estimate.
struct SectorRegion {
    double theta = pi / 2;  // in (0, pi/2]
    double M = 0;

    bool contains(cplx z) const {
        if (z.real() > 0) return true;
        if (theta >= pi / 2) return false;
        return std::fabs(z.imag()) + std::tan(theta) * z.real() - M > 0;
    }
};

// ---------------------------------------------------------------------------
// Orbit-sum Fatou coordinate of the unfolding

struct OrbitConfig {
    int k = 8;               // normal-form order (clamped by truncation)
    double tol = 1e-12;      // requested tail bound
    long budget = 150000;    // orbit length cap
    double domain_factor = 1.10;  // allowed overshoot of |y| over eps
};

struct FatouValue {
    cplx psi = 0;
    double residual = 0;
    long iterations = 0;
};

class FatouEvaluator {
  public:
    FatouEvaluator(const ParabolicMap& map, const VectorFieldUnfolding& Xk, int petal_j, cplx x,
                   const PetalSystem& ps, OrbitConfig cfg = {})
        : map_(&map),
          nf_(std::make_shared<NormalFatou>(Xk, x, ps.eps)),
          fiber_(map.fiber(x)),
          cfg_(cfg),
          x_(x),
          eps_(ps.eps),
          petal_(petal_j),
          nu_(ps.nu) {
        auto anchors = ps.anchors_at(x);
        int n = ps.count();
        petal_ = ((petal_j % n) + n) % n;
        anchor_ = anchors[std::size_t(petal_)];
        sign_ = ps.sign[std::size_t(petal_)];
        anchor_angles_.resize(anchors.size());
        for (std::size_t i = 0; i < anchors.size(); ++i)
            anchor_angles_[i] = std::arg(anchors[i]);
        // effective k cannot exceed the normal form's own order or what the
        // truncation resolved
        int N = map.fixed_curves().total_multiplicity();
        k_eff_ = std::max(2, std::min(cfg.k, (Xk.unit.order() - 1) / N));
        if (Xk.nf_order > 0) k_eff_ = std::max(2, std::min(k_eff_, Xk.nf_order));
        FatouFrame fr(*nf_, anchor_, 0.0);
        auto v = orbit_value(fr);
        anchor_offset_ = v.psi;
        anchor_residual_ = v.residual;
    }

    int petal() const { return petal_; }
    int orientation() const { return sign_; }
    cplx anchor() const { return anchor_; }
    cplx x() const { return x_; }
    const NormalFatou& normal_form() const { return *nf_; }
    const FiberMap& fiber() const { return fiber_; }
    double anchor_angle(int j) const {
        int n = int(anchor_angles_.size());
        return anchor_angles_[std::size_t(((j % n) + n) % n)];
    }
    int anchor_count() const { return int(anchor_angles_.size()); }

    // Orbit sum from an arbitrary branch-consistent frame:
    //   lim_n [psi_norm(phi^{sn} y) - s n],
    // stopped when the lemma tail bound falls below the requested tolerance
    // or under the accumulated roundoff floor (below which iterating more
    // cannot improve the value).
    FatouValue orbit_value(FatouFrame fr) const {
        const int s = sign_;
        const int k = k_eff_;
        double Dhat = 0;
        cplx prev_val = fr.value;
        double prev_abs = std::abs(fr.value);
        for (long n = 1; n <= cfg_.budget; ++n) {
            cplx y_next = (s > 0) ? fiber_.apply(fr.y) : fiber_.apply_inverse(fr.y);
            if (std::abs(y_next) > eps_ * cfg_.domain_factor)
                throw numerical_error("fatou orbit left the domain at " + fmt17(y_next));
            fr.advance_with_detour(y_next);
            cplx partial = fr.value - double(s) * double(n);
            // measured per-step defect, with the pseudo-orbit noise floor
            // subtracted: y-space rounding maps to psi-space through
            // |dpsi/dy| ~ |psi|^{(nu+1)/nu}
            double delta_abs = std::abs(partial - prev_val);
            double step_noise = 1e-14 * (1.0 + prev_abs) +
                                4e-15 * std::pow(1.0 + prev_abs, (nu_ + 1.0) / nu_);
            double delta_eff = std::max(0.0, delta_abs - step_noise);
            Dhat = std::max(Dhat, delta_eff * std::pow(1.0 + prev_abs, k));
            prev_val = partial;
            prev_abs = std::abs(fr.value);
            // tail bound of the orbit-sum lemma with theta = pi/2
            double tail = std::pow(8.0, k) * Dhat * k / ((k - 1) * std::pow(1.0 + prev_abs, k - 1));
            double noise = 5e-17 * double(n) * double(n) + 1e-15;
            if (n >= 8 && tail < std::max(cfg_.tol, noise))
                return {partial, tail + noise, n};
        }
        throw numerical_error("fatou orbit budget exhausted; residual above tolerance");
    }

    // Frame at a target point, continued from the anchor along an arc at a
    // safe radius plus a radial leg. `ccw` picks the arc orientation; 0 means
    // the short way.
    FatouFrame frame_at(cplx target, int ccw = 0) const {
        FatouFrame fr(*nf_, anchor_, 0.0);
        double max_pole = 0;
        for (auto& p : nf_->poles())
            if (std::abs(p.pos) < eps_) max_pole = std::max(max_pole, std::abs(p.pos));
        double r_safe = std::max(1.6 * max_pole, 1e-3 * eps_);
        double r_arc = std::max(std::abs(target), std::min(r_safe * 1.2, eps_));
        if (std::abs(target) < r_safe && std::abs(target) < 0.75 * nf_->min_pole_gap() + max_pole) {
            // deep target: arc at a safe radius, then a radial descent
            r_arc = std::max(r_safe * 1.2, 2.0 * std::abs(target));
        }
        r_arc = std::min(r_arc, eps_);
        double a0 = std::arg(anchor_), a1 = std::arg(target);
        double diff = std::remainder(a1 - a0, 2 * pi);
        if (ccw > 0 && diff < 0) diff += 2 * pi;
        if (ccw < 0 && diff > 0) diff -= 2 * pi;
        int steps = std::max(8, int(std::ceil(std::fabs(diff) / 0.2)));
        // radial from the anchor to the arc radius
        fr.advance_with_detour(r_arc * unit(a0));
        for (int i = 1; i <= steps; ++i)
            fr.advance_with_detour(r_arc * unit(a0 + diff * i / steps));
        // radial leg to the target
        int rsteps = std::max(4, int(std::ceil(std::fabs(std::log(std::max(std::abs(target), 1e-12) / r_arc)) / 0.4)));
        for (int i = 1; i <= rsteps; ++i) {
            double rr = r_arc * std::pow(std::abs(target) / r_arc, double(i) / rsteps);
            fr.advance_with_detour(rr * unit(a0 + diff));
        }
        fr.advance_with_detour(target);
        return fr;
    }

    // psi-ddot: the Fatou coordinate of the map normalized to 0 at the anchor.
    FatouValue psi(cplx y, int ccw = 0) const {
        FatouFrame fr = frame_at(y, ccw);
        auto v = orbit_value(fr);
        return {v.psi - anchor_offset_, v.residual + anchor_residual_, v.iterations};
    }

    // Inverse of psi by quasi-Newton seeded from the normal-form coordinate.
    cplx invert(cplx z, int ccw = 0) const {
        return invert_seeded(z, invert_normal(z + anchor_offset_, ccw), ccw);
    }

    // Same, but seeded explicitly (grid marching). Converges to the level the
    // orbit-sum noise supports.
    cplx invert_seeded(cplx z, cplx y, int ccw = 0) const {
        double last_err = 1e300;
        for (int it = 0; it < 40; ++it) {
            auto v = psi(y, ccw);
            cplx err = v.psi - z;
            double tol_here = std::max(5e-11 * (1 + std::abs(z)), 4.0 * v.residual);
            if (std::abs(err) < tol_here) return y;
            cplx step = -err * nf_->Q(y);
            double clearance = nf_->dist_to_poles(y);
            if (std::abs(step) > 0.3 * clearance) step *= 0.3 * clearance / std::abs(step);
            y += step;
            // step below representable resolution: accept whatever we have
            if (std::abs(step) < 1e-15 * (1 + std::abs(y)) && std::abs(err) < 1e-7) return y;
            last_err = std::abs(err);
        }
        if (last_err < 1e-7 * (1 + std::abs(z))) return y;
        throw numerical_error("FatouEvaluator::invert: Newton stalled");
    }

    // Inverse of the plain normal-form coordinate (branch from the anchor).
    // Seeds from the leading-pole asymptotics psi ~ -1/(nu v y^nu) + b in the
    // angular sector selected by ccw, then corrects by a frame-local Newton.
    cplx invert_normal(cplx target, int ccw = 0) const {
        const int nv = std::max(1, nu_);
        cplx v00 = nf_->Q(anchor_) / std::pow(anchor_, nv + 1);
        auto pole_part = [&](cplx y) { return -1.0 / (double(nv) * v00 * std::pow(y, nv)); };
        cplx b = -pole_part(anchor_);  // anchored: psi_norm(anchor) = 0
        cplx lead = target - b;
        if (std::abs(lead) < 1e-3)
            throw numerical_error("invert_normal: target too close to the image boundary");
        cplx base = std::pow(-1.0 / (double(nv) * v00 * lead), 1.0 / nv);
        // sector selection: plain evaluations stay near the petal axis, horn
        // evaluations (ccw != 0) sit between this anchor and its neighbour
        double lo = std::arg(anchor_), hi = lo;
        if (ccw > 0) hi = lo + norm_angle(anchor_angle(petal_ + 1) - lo);
        else if (ccw < 0) lo = hi - norm_angle(hi - anchor_angle(petal_ - 1));
        else {
            lo -= pi / (2.0 * nv);
            hi += pi / (2.0 * nv);
        }
        // seeds may poke slightly past eps (psi_norm extends); the hard wall
        // is the ring of non-curve poles of the truncated normal form
        double gate = 1.08 * eps_;
        for (auto& p : nf_->poles()) {
            double curve_dist = 1e300;
            for (auto& c : map_->fixed_curves().curves)
                curve_dist = std::min(curve_dist, std::abs(p.pos - c.gamma.eval(x_)));
            if (curve_dist > 0.05 * eps_) gate = std::min(gate, 0.85 * std::abs(p.pos));
        }
        cplx best = 0;
        double best_pen = 1e300;
        for (int m = 0; m < nv; ++m) {
            cplx cand = base * unit(2 * pi * m / nv);
            if (std::abs(cand) > gate || std::abs(cand) < 1e-12) continue;
            double a = std::arg(cand);
            // penalty: distance to the sector [lo, hi] modulo 2 pi
            double rel = std::remainder(a - (lo + hi) / 2, 2 * pi);
            double half = (hi - lo) / 2 + 1e-9;
            double pen = std::max(0.0, std::fabs(rel) - half);
            if (pen < best_pen) {
                best_pen = pen;
                best = cand;
            }
        }
        if (std::abs(best) == 0.0)
            throw numerical_error("invert_normal: no admissible seed in the domain");
        FatouFrame fr = frame_at(best, ccw);
        cplx y = best;
        for (int it = 0; it < 100; ++it) {
            cplx err = fr.value - target;
            if (std::abs(err) < 1e-12 * (1 + std::abs(target))) return y;
            cplx step = -err * nf_->Q(y);
            double clearance = nf_->dist_to_poles(y);
            if (std::abs(step) > 0.3 * clearance) step *= 0.3 * clearance / std::abs(step);
            y += step;
            fr.advance_with_detour(y);
            if (std::abs(step) < 4e-16 * (1 + std::abs(y))) break;
        }
        cplx err = fr.value - target;
        if (std::abs(err) > 1e-8 * (1 + std::abs(target)))
            throw numerical_error("invert_normal: Newton failed on the seeded branch");
        return y;
    }

    cplx anchor_offset() const { return anchor_offset_; }
    int effective_k() const { return k_eff_; }
    double domain_eps() const { return eps_; }

  private:
    const ParabolicMap* map_;
    std::shared_ptr<NormalFatou> nf_;
    FiberMap fiber_;
    OrbitConfig cfg_;
    cplx x_;
    double eps_;
    int petal_;
    int nu_;
    int sign_ = 1;
    int k_eff_ = 2;
    cplx anchor_;
    cplx anchor_offset_ = 0;
    double anchor_residual_ = 0;
    std::vector<double> anchor_angles_;
};

// Delta_phi at a point: psi_norm(phi(P)) - psi_norm(P) - 1 with the value
// continued along the segment between the two points.
inline cplx delta(const ParabolicMap& map, const VectorFieldUnfolding& Xk, cplx x, cplx y) {
    NormalFatou nf(Xk, x, 1e300);
    FiberMap fm = map.fiber(x);
    cplx fy = fm.apply(y);
    FatouFrame fr(nf, y, 0.0);
    fr.advance_with_detour(fy);
    return fr.value - 1.0;
}

// Lavaurs field sample: 1 / (central difference of psi in y).
struct LavaursSample {
    cplx g = 0;
    double error_bound = 0;
};

inline LavaursSample lavaurs_sample(const FatouEvaluator& ev, cplx y, double h) {
    auto vp = ev.psi(y + h);
    auto vm = ev.psi(y - h);
    cplx dpsi = (vp.psi - vm.psi) / (2.0 * h);
    if (std::abs(dpsi) < 1e-14)
        throw numerical_error("lavaurs_sample: derivative vanishes at the sample");
    LavaursSample out;
    out.g = 1.0 / dpsi;
    // FD truncation ~ h^2 |psi'''|/6; use the normal form for the curvature scale
    cplx q = ev.normal_form().Q(y);
    cplx dq = ev.normal_form().dQ(y);
    double curv = std::abs((2.0 * dq * dq - 0.0) / (q * q * q)) + 1.0;
    double fd_err = h * h / 6.0 * curv * std::norm(out.g);
    double orbit_err = (vp.residual + vm.residual) / (2 * h) * std::norm(out.g);
    out.error_bound = fd_err + orbit_err;
    return out;
}

}  // namespace unfold
