#pragma once

#include "unfold/complex_poly.hpp"
#include "unfold/util.hpp"

namespace unfold {

// Truncated bivariate power series sum a_{ij} x^i y^j with total degree
// i + j <= D. Stored dense on the (D+1)x(D+1) grid; entries above the
// diagonal stay zero.
class BiSeries {
  public:
    BiSeries() : D_(0), a_(1, cplx(0)) {}
    explicit BiSeries(int D) : D_(D), a_(std::size_t((D + 1) * (D + 1)), cplx(0)) {
        if (D < 0) throw numerical_error("BiSeries: negative truncation order");
    }

    static BiSeries zero(int D) { return BiSeries(D); }
    static BiSeries constant(int D, cplx v) {
        BiSeries s(D);
        s.set(0, 0, v);
        return s;
    }
    static BiSeries var_x(int D) {
        BiSeries s(D);
        if (D >= 1) s.set(1, 0, 1.0);
        return s;
    }
    static BiSeries var_y(int D) {
        BiSeries s(D);
        if (D >= 1) s.set(0, 1, 1.0);
        return s;
    }
    // p(x) => series in x only
    static BiSeries from_x_poly(int D, const ComplexPoly& p) {
        BiSeries s(D);
        for (int i = 0; i <= std::min(D, p.degree()); ++i) s.set(i, 0, p.coeff(i));
        return s;
    }
    static BiSeries from_y_poly(int D, const ComplexPoly& p) {
        BiSeries s(D);
        for (int j = 0; j <= std::min(D, p.degree()); ++j) s.set(0, j, p.coeff(j));
        return s;
    }

    int order() const { return D_; }
    cplx get(int i, int j) const {
        if (i < 0 || j < 0 || i + j > D_) return 0;
        return a_[idx(i, j)];
    }
    void set(int i, int j, cplx v) {
        if (i < 0 || j < 0) throw numerical_error("BiSeries::set: negative index");
        if (i + j > D_) {
            if (std::abs(v) == 0.0) return;
            throw numerical_error("BiSeries::set: index beyond truncation order");
        }
        a_[idx(i, j)] = v;
    }

    bool is_zero(double tol = 0.0) const {
        for (auto& v : a_)
            if (std::abs(v) > tol) return false;
        return true;
    }

    double max_abs() const {
        double m = 0;
        for (auto& v : a_) m = std::max(m, std::abs(v));
        return m;
    }

    // Lowest total degree with a coefficient above tol; D_+1 when empty.
    int low_degree(double tol = 0.0) const {
        for (int d = 0; d <= D_; ++d)
            for (int i = 0; i <= d; ++i)
                if (std::abs(get(i, d - i)) > tol) return d;
        return D_ + 1;
    }

    BiSeries& operator+=(const BiSeries& o) {
        check(o);
        for (std::size_t k = 0; k < a_.size(); ++k) a_[k] += o.a_[k];
        return *this;
    }
    BiSeries& operator-=(const BiSeries& o) {
        check(o);
        for (std::size_t k = 0; k < a_.size(); ++k) a_[k] -= o.a_[k];
        return *this;
    }
    BiSeries& operator*=(cplx s) {
        for (auto& v : a_) v *= s;
        return *this;
    }
    friend BiSeries operator+(BiSeries a, const BiSeries& b) { return a += b; }
    friend BiSeries operator-(BiSeries a, const BiSeries& b) { return a -= b; }
    friend BiSeries operator*(cplx s, BiSeries a) { return a *= s; }

    friend BiSeries operator*(const BiSeries& a, const BiSeries& b) {
        a.check(b);
        BiSeries r(a.D_);
        for (int i1 = 0; i1 <= a.D_; ++i1)
            for (int j1 = 0; i1 + j1 <= a.D_; ++j1) {
                cplx va = a.get(i1, j1);
                if (std::abs(va) == 0.0) continue;
                for (int i2 = 0; i1 + j1 + i2 <= a.D_; ++i2)
                    for (int j2 = 0; i1 + j1 + i2 + j2 <= a.D_; ++j2) {
                        cplx vb = b.get(i2, j2);
                        if (std::abs(vb) == 0.0) continue;
                        r.a_[r.idx(i1 + i2, j1 + j2)] += va * vb;
                    }
            }
        return r;
    }

    BiSeries dy() const {
        BiSeries r(D_);
        for (int i = 0; i <= D_; ++i)
            for (int j = 1; i + j <= D_; ++j) r.set(i, j - 1, double(j) * get(i, j));
        return r;
    }
    BiSeries dx() const {
        BiSeries r(D_);
        for (int i = 1; i <= D_; ++i)
            for (int j = 0; i + j <= D_; ++j) r.set(i - 1, j, double(i) * get(i, j));
        return r;
    }

    // Exact evaluation of the stored (truncated) polynomial.
    cplx eval(cplx x, cplx y) const {
        cplx acc = 0;
        for (int i = D_; i >= 0; --i) {
            cplx row = 0;
            for (int j = D_ - i; j >= 0; --j) row = row * y + get(i, j);
            acc = acc * x + row;
        }
        return acc;
    }

    // x-coefficient slices: f = sum_i f_i(y) x^i, returns f_b as a y-polynomial.
    ComplexPoly x_slice(int b) const {
        std::vector<cplx> c;
        for (int j = 0; b + j <= D_; ++j) c.push_back(get(b, j));
        return ComplexPoly(std::move(c));
    }
    // y-coefficient slices: f = sum_j c_j(x) y^j.
    ComplexPoly y_slice(int j) const {
        std::vector<cplx> c;
        for (int i = 0; i + j <= D_; ++i) c.push_back(get(i, j));
        return ComplexPoly(std::move(c));
    }

    // Substitute y <- g(x,y); requires g(0,0) = 0 so truncation stays exact.
    BiSeries substitute_y(const BiSeries& g) const {
        check(g);
        if (std::abs(g.get(0, 0)) > 0)
            throw numerical_error("substitute_y: substituted series must vanish at origin");
        // Horner in y: f = sum_j c_j(x) y^j  =>  (((c_D) g + c_{D-1}) g + ...)
        BiSeries acc(D_);
        for (int j = D_; j >= 0; --j) {
            acc = acc * g;
            BiSeries cj = BiSeries::from_x_poly(D_, y_slice(j));
            acc += cj;
        }
        return acc;
    }

    // Multiplicative inverse of a unit series.
    BiSeries unit_inverse() const {
        cplx u0 = get(0, 0);
        if (std::abs(u0) < 1e-300) throw numerical_error("unit_inverse: not a unit");
        BiSeries v = BiSeries::constant(D_, 1.0 / u0);
        // Newton: v <- v (2 - u v), doubling correct order each pass.
        BiSeries two = BiSeries::constant(D_, 2.0);
        int passes = 1;
        while ((1 << passes) <= D_ + 1) ++passes;
        for (int k = 0; k <= passes; ++k) v = v * (two - (*this) * v);
        return v;
    }

  private:
    void check(const BiSeries& o) const {
        if (o.D_ != D_) throw numerical_error("BiSeries: truncation order mismatch");
    }
    std::size_t idx(int i, int j) const { return std::size_t(i) * std::size_t(D_ + 1) + std::size_t(j); }
    int D_;
    std::vector<cplx> a_;
};

// f with f = y + higher order terms -> g with f(x, g(x,y)) = y mod degree D.
inline BiSeries series_inverse_y(const BiSeries& f) {
    const int D = f.order();
    if (std::abs(f.get(0, 1) - cplx(1)) > 1e-12 || std::abs(f.get(0, 0)) > 0)
        throw numerical_error("series_inverse_y: series must be y + higher order");
    BiSeries y = BiSeries::var_y(D);
    BiSeries g = y;
    // Order-by-order fixed point: g <- g - (f o g - y). Each pass gains at
    // least one order because f o g - y has no linear term once matched.
    for (int pass = 0; pass <= D + 1; ++pass) {
        BiSeries err = f.substitute_y(g) - y;
        if (err.is_zero(0.0)) break;
        g -= err;
    }
    return g;
}

// y o exp(g d/dy) = sum_k G^k(y) / k! with G(h) = g h_y. Terminates because
// g has vanishing constant and linear-in-y... more precisely each application
// raises the low total degree by at least low(g) - 1 >= 1.
inline BiSeries exp_field_apply(const BiSeries& g) {
    const int D = g.order();
    if (g.low_degree(0.0) < 2)
        throw numerical_error("exp_field_apply: coefficient must have total degree >= 2");
    BiSeries acc = BiSeries::var_y(D);
    BiSeries term = BiSeries::var_y(D);
    double fact = 1;
    for (int k = 1; k <= 2 * D + 2; ++k) {
        term = g * term.dy();
        if (term.is_zero(0.0)) break;
        fact *= k;
        BiSeries contrib = term;
        contrib *= (1.0 / fact);
        acc += contrib;
    }
    return acc;
}

// Infinitesimal generator: the unique series g (total degree >= 2) with
// exp(g d/dy)(y) = y + f_total, solved by Newton-style correction. The
// iteration gains one total degree per pass; the extra passes at the end ride
// out roundoff oscillation, keeping the best iterate seen.
inline BiSeries infinitesimal_generator_series(const BiSeries& f_total) {
    const int D = f_total.order();
    if (f_total.low_degree(0.0) < 2)
        throw numerical_error("infinitesimal generator: map must be tangent to the identity");
    BiSeries g = f_total;
    BiSeries best = g;
    double best_resid = 1e300;
    for (int pass = 0; pass <= D + 4; ++pass) {
        BiSeries err = exp_field_apply(g) - BiSeries::var_y(D) - f_total;
        double r = err.max_abs();
        if (r < best_resid) {
            best_resid = r;
            best = g;
        }
        if (r == 0.0) break;
        g -= err;
    }
    if (best_resid > 5e-8 * std::max(1.0, f_total.max_abs()))
        throw numerical_error("infinitesimal generator: iteration did not close");
    return best;
}

// Division f = q * P + r by a y-monic polynomial P = y^N + sum_{k<N} b_k(x) y^k
// whose lower coefficients vanish at x = 0. Returns {q, r} with deg_y r < N.
inline std::pair<BiSeries, BiSeries> divide_by_y_monic(const BiSeries& f, const BiSeries& P,
                                                       int N) {
    const int D = f.order();
    if (std::abs(P.get(0, N) - cplx(1)) > 1e-12)
        throw numerical_error("divide_by_y_monic: divisor not monic of stated y-degree");
    BiSeries q(D), r = f;
    for (int j = D; j >= N; --j) {
        ComplexPoly cj = r.y_slice(j);  // coefficient of y^j as x-polynomial
        if (cj.is_zero()) continue;
        // q += cj(x) y^{j-N}; r -= cj(x) y^{j-N} P
        for (int i = 0; i <= cj.degree(); ++i) {
            if (i + (j - N) > D) break;
            q.set(i, j - N, q.get(i, j - N) + cj.coeff(i));
        }
        BiSeries mono(D);
        for (int i = 0; i <= cj.degree(); ++i)
            if (i + (j - N) <= D) mono.set(i, j - N, cj.coeff(i));
        r -= mono * P;
    }
    return {q, r};
}

}  // namespace unfold
