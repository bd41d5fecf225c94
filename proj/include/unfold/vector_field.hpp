#pragma once

#include "unfold/biseries.hpp"
#include "unfold/complex_poly.hpp"

namespace unfold {

// One irreducible fixed curve y = gamma(x) with gamma(0) = 0.
struct FixedCurve {
    ComplexPoly gamma;  // polynomial in x
    int multiplicity = 1;
};

struct FixedCurveSet {
    std::vector<FixedCurve> curves;

    int total_multiplicity() const {
        int s = 0;
        for (auto& c : curves) s += c.multiplicity;
        return s;
    }

    void validate() const {
        if (total_multiplicity() < 2)
            throw numerical_error("FixedCurveSet: total multiplicity must be >= 2");
        for (auto& c : curves) {
            if (std::abs(c.gamma.coeff(0)) > 1e-14)
                throw numerical_error("FixedCurveSet: curves must pass through the origin");
            if (c.multiplicity < 1) throw numerical_error("FixedCurveSet: multiplicity >= 1");
        }
        for (std::size_t i = 0; i < curves.size(); ++i)
            for (std::size_t j = i + 1; j < curves.size(); ++j)
                if ((curves[i].gamma - curves[j].gamma).coeff_norm() < 1e-12)
                    throw numerical_error("FixedCurveSet: curves must be pairwise distinct");
    }

    // Monic product  prod (y - gamma_j(x))^{n_j}  as a truncated series.
    BiSeries product_series(int D) const {
        BiSeries acc = BiSeries::constant(D, 1.0);
        for (auto& c : curves) {
            BiSeries lin = BiSeries::var_y(D) - BiSeries::from_x_poly(D, c.gamma);
            for (int k = 0; k < c.multiplicity; ++k) acc = acc * lin;
        }
        return acc;
    }

    // Same product as an exact y-polynomial at fixed x.
    ComplexPoly fiber_poly(cplx x) const {
        ComplexPoly p = ComplexPoly::constant(1.0);
        for (auto& c : curves) {
            ComplexPoly lin({-c.gamma.eval(x), cplx(1)});
            for (int k = 0; k < c.multiplicity; ++k) p = p * lin;
        }
        return p;
    }
};

// X = x^e u(x,t) prod (t - gamma_j(x))^{n_j} d/dt with u(0,0) != 0.
// The unit u is polynomial (a truncated series with no tail by convention).
struct VectorFieldUnfolding {
    BiSeries unit;         // u
    FixedCurveSet curves;  // gamma_j, n_j
    int x_exponent = 0;    // accumulated x^e factor
    int nf_order = 0;      // k when the field is a k-convergent normal form

    int nu() const { return curves.total_multiplicity() - 1; }

    void validate() const {
        curves.validate();
        if (std::abs(unit.get(0, 0)) < 1e-14)
            throw numerical_error("VectorFieldUnfolding: unit vanishes at the origin");
    }

    // Exact evaluation of the y-component at a point.
    cplx eval(cplx x, cplx y) const {
        cplx v = unit.eval(x, y);
        for (auto& c : curves.curves) {
            cplx lin = y - c.gamma.eval(x);
            for (int k = 0; k < c.multiplicity; ++k) v *= lin;
        }
        return v * std::pow(x, x_exponent);
    }

    // Fiber restriction as an exact y-polynomial (x fixed), including x^e.
    ComplexPoly fiber_poly(cplx x) const {
        ComplexPoly u_y = ([&] {
            std::vector<cplx> c;
            for (int j = 0; j <= unit.order(); ++j) {
                cplx acc = 0;
                for (int i = 0; i + j <= unit.order(); ++i)
                    acc += unit.get(i, j) * std::pow(x, i);
                c.push_back(acc);
            }
            return ComplexPoly(std::move(c));
        })();
        ComplexPoly p = u_y * curves.fiber_poly(x);
        return std::pow(x, x_exponent) * p;
    }

    // X(y) as a truncated series (used by normal-form machinery).
    BiSeries y_component_series(int D) const {
        BiSeries s = unit;
        if (unit.order() != D) {
            s = BiSeries(D);
            for (int i = 0; i <= std::min(D, unit.order()); ++i)
                for (int j = 0; i + j <= std::min(D, unit.order()); ++j)
                    s.set(i, j, unit.get(i, j));
        }
        s = s * curves.product_series(D);
        if (x_exponent > 0) {
            BiSeries xe = BiSeries::constant(D, 1.0);
            for (int k = 0; k < x_exponent; ++k) xe = xe * BiSeries::var_x(D);
            s = s * xe;
        }
        return s;
    }
};

}  // namespace unfold
