#pragma once

#include <cassert>
#include <optional>

#include "unfold/util.hpp"

namespace unfold {

// Dense univariate polynomial over C, coefficients in ascending degree.
// The variable tag (w, x or y) is purely documentary.
class ComplexPoly {
  public:
    ComplexPoly() = default;
    explicit ComplexPoly(std::vector<cplx> coeffs) : c_(std::move(coeffs)) { trim(); }
    static ComplexPoly constant(cplx v) { return ComplexPoly({v}); }
    static ComplexPoly identity() { return ComplexPoly({cplx(0), cplx(1)}); }

    static ComplexPoly from_roots(const std::vector<std::pair<cplx, int>>& roots,
                                  cplx lead = 1.0) {
        ComplexPoly p({lead});
        for (auto& [r, m] : roots)
            for (int k = 0; k < m; ++k) p = p * ComplexPoly({-r, cplx(1)});
        return p;
    }

    const std::vector<cplx>& coeffs() const { return c_; }
    bool is_zero() const { return c_.empty(); }
    int degree() const { return int(c_.size()) - 1; }  // -1 for the zero polynomial
    cplx lead() const { return c_.empty() ? cplx(0) : c_.back(); }
    cplx coeff(int k) const { return (k >= 0 && k < int(c_.size())) ? c_[std::size_t(k)] : cplx(0); }
    void set_coeff(int k, cplx v) {
        if (k >= int(c_.size())) c_.resize(std::size_t(k) + 1, cplx(0));
        c_[std::size_t(k)] = v;
        trim();
    }

    cplx eval(cplx w) const {
        cplx acc = 0;
        for (std::size_t k = c_.size(); k-- > 0;) acc = acc * w + c_[k];
        return acc;
    }

    ComplexPoly derivative() const {
        if (c_.size() <= 1) return {};
        std::vector<cplx> d(c_.size() - 1);
        for (std::size_t k = 1; k < c_.size(); ++k) d[k - 1] = double(k) * c_[k];
        return ComplexPoly(std::move(d));
    }

    double coeff_norm() const {
        double n = 0;
        for (auto& v : c_) n = std::max(n, std::abs(v));
        return n;
    }

    friend ComplexPoly operator*(const ComplexPoly& a, const ComplexPoly& b) {
        if (a.is_zero() || b.is_zero()) return {};
        std::vector<cplx> r(a.c_.size() + b.c_.size() - 1, cplx(0));
        for (std::size_t i = 0; i < a.c_.size(); ++i)
            for (std::size_t j = 0; j < b.c_.size(); ++j) r[i + j] += a.c_[i] * b.c_[j];
        return ComplexPoly(std::move(r));
    }
    friend ComplexPoly operator+(const ComplexPoly& a, const ComplexPoly& b) {
        std::vector<cplx> r(std::max(a.c_.size(), b.c_.size()), cplx(0));
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = a.coeff(int(i)) + b.coeff(int(i));
        return ComplexPoly(std::move(r));
    }
    friend ComplexPoly operator-(const ComplexPoly& a, const ComplexPoly& b) {
        std::vector<cplx> r(std::max(a.c_.size(), b.c_.size()), cplx(0));
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = a.coeff(int(i)) - b.coeff(int(i));
        return ComplexPoly(std::move(r));
    }
    friend ComplexPoly operator*(cplx s, const ComplexPoly& a) {
        std::vector<cplx> r = a.c_;
        for (auto& v : r) v *= s;
        return ComplexPoly(std::move(r));
    }

  private:
    void trim() {
        while (!c_.empty() && std::abs(c_.back()) == 0.0) c_.pop_back();
    }
    std::vector<cplx> c_;
};

struct RootCluster {
    cplx root;
    int multiplicity = 1;
};

namespace detail {

// One Aberth-Ehrlich sweep; returns the max relative update.
inline double aberth_sweep(const ComplexPoly& p, const ComplexPoly& dp, std::vector<cplx>& w) {
    double worst = 0;
    const std::size_t n = w.size();
    for (std::size_t i = 0; i < n; ++i) {
        cplx pv = p.eval(w[i]);
        cplx dv = dp.eval(w[i]);
        cplx newton = (std::abs(dv) > 0) ? pv / dv : cplx(0);
        cplx rep = 0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) {
                cplx d = w[i] - w[j];
                if (std::abs(d) < 1e-300) d = 1e-300;
                rep += 1.0 / d;
            }
        cplx denom = 1.0 - newton * rep;
        cplx step = (std::abs(denom) > 1e-300) ? newton / denom : newton;
        w[i] -= step;
        worst = std::max(worst, std::abs(step) / (1.0 + std::abs(w[i])));
    }
    return worst;
}

inline std::vector<RootCluster> cluster_roots(const ComplexPoly& p, std::vector<cplx> w,
                                              double tol) {
    // Try increasing clustering radii; accept the first whose reconstruction
    // matches p in coefficient norm.
    double scale = 0.0;
    for (auto& v : w) scale = std::max(scale, std::abs(v));
    scale = std::max(scale, 1.0);
    const double radii[] = {1e-11, 1e-9, 1e-7, 1e-6, 3e-5, 3e-4, 3e-3};
    double pnorm = std::max(p.coeff_norm(), 1e-300);
    std::vector<RootCluster> best;
    double best_err = 1e300;
    for (double rad : radii) {
        double r = rad * scale;
        std::vector<RootCluster> cl;
        std::vector<bool> used(w.size(), false);
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (used[i]) continue;
            cplx sum = w[i];
            int cnt = 1;
            used[i] = true;
            bool grew = true;
            cplx center = w[i];
            while (grew) {
                grew = false;
                for (std::size_t j = 0; j < w.size(); ++j) {
                    if (used[j]) continue;
                    if (std::abs(w[j] - center) < r) {
                        used[j] = true;
                        sum += w[j];
                        ++cnt;
                        center = sum / double(cnt);
                        grew = true;
                    }
                }
            }
            cl.push_back({center, cnt});
        }
        // Polish each cluster center with Newton on the (m-1)-th derivative.
        for (auto& rc : cl) {
            ComplexPoly q = p;
            for (int k = 1; k < rc.multiplicity; ++k) q = q.derivative();
            ComplexPoly dq = q.derivative();
            for (int it = 0; it < 40; ++it) {
                cplx qv = q.eval(rc.root), dv = dq.eval(rc.root);
                if (std::abs(dv) < 1e-300) break;
                cplx step = qv / dv;
                rc.root -= step;
                if (std::abs(step) < 1e-16 * (1 + std::abs(rc.root))) break;
            }
        }
        std::vector<std::pair<cplx, int>> pairs;
        for (auto& rc : cl) pairs.push_back({rc.root, rc.multiplicity});
        ComplexPoly rec = ComplexPoly::from_roots(pairs, p.lead());
        double err = (rec - p).coeff_norm() / pnorm;
        if (err < best_err) {
            best_err = err;
            best = cl;
        }
        if (err <= tol) return cl;
    }
    if (best_err <= std::max(tol, 1e-9)) return best;  // mildly ill-conditioned input
    throw numerical_error("root clustering failed, residual " + fmt17(best_err));
}

}  // namespace detail

// All roots of p with multiplicities (Aberth-Ehrlich plus multiplicity
// clustering). Postcondition: lead * prod (w-r)^m reconstructs p within tol.
inline std::vector<RootCluster> roots(const ComplexPoly& p, double tol = tol_algebraic) {
    if (p.is_zero()) throw numerical_error("roots: zero polynomial");
    if (p.degree() == 0) return {};
    const int n = p.degree();
    ComplexPoly dp = p.derivative();
    // Initial guesses on a circle of radius given by the Cauchy bound.
    double bound = 0;
    for (int k = 0; k < n; ++k) bound = std::max(bound, std::abs(p.coeff(k) / p.lead()));
    double radius = 1.0 + bound;
    std::vector<cplx> w(static_cast<std::size_t>(n), cplx(0));
    for (int i = 0; i < n; ++i)
        w[std::size_t(i)] = radius * unit(2 * pi * (i + 0.5) / n + 0.4);
    double resid = 1e300;
    for (int it = 0; it < 600; ++it) {
        resid = detail::aberth_sweep(p, dp, w);
        if (resid < 1e-15) break;
    }
    // Multiple roots stall the sweep near eps^(1/m); clustering plus the
    // derivative polish recovers them, so only reject gross non-convergence.
    if (!(resid < 3e-5))
        throw numerical_error("roots: Aberth iteration stalled, residual " + fmt17(resid));
    auto cl = detail::cluster_roots(p, w, tol);
    std::sort(cl.begin(), cl.end(), [](const RootCluster& a, const RootCluster& b) {
        if (a.root.real() != b.root.real()) return a.root.real() < b.root.real();
        return a.root.imag() < b.root.imag();
    });
    return cl;
}

namespace detail {

// Taylor coefficients of p around `center`, lowest first (in-place shift by
// repeated synthetic division).
inline std::vector<cplx> taylor_at(const ComplexPoly& p, cplx center) {
    std::vector<cplx> a = p.coeffs();
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = n - 1; k-- > i;) a[k] += center * a[k + 1];
    return a;
}

// First `order` coefficients of 1/(q0 + q1 t + ...) given q0 != 0.
inline std::vector<cplx> series_reciprocal(const std::vector<cplx>& q, std::size_t order) {
    std::vector<cplx> inv(order, cplx(0));
    inv[0] = 1.0 / q[0];
    for (std::size_t k = 1; k < order; ++k) {
        cplx acc = 0;
        for (std::size_t j = 1; j <= k; ++j)
            acc += (j < q.size() ? q[j] : cplx(0)) * inv[k - j];
        inv[k] = -acc / q[0];
    }
    return inv;
}

}  // namespace detail

// Residue of the rational function 1/p at `root`, a zero of p of the stated
// multiplicity: the 1/(w-root) Laurent coefficient. Simple roots: 1/p'(root).
inline cplx residue(const ComplexPoly& p, cplx root, int multiplicity = 1,
                    double tol = tol_algebraic) {
    if (p.is_zero()) throw numerical_error("residue: zero polynomial");
    auto tay = detail::taylor_at(p, root);
    double scale = std::max(p.coeff_norm(), 1e-300);
    for (int k = 0; k < multiplicity; ++k)
        if (k < int(tay.size()) && std::abs(tay[std::size_t(k)]) > 1e4 * tol * scale)
            throw numerical_error("residue: stated multiplicity too high at given root");
    if (multiplicity >= int(tay.size()) ||
        std::abs(tay[std::size_t(multiplicity)]) < tol * scale)
        throw numerical_error("residue: multiplicity mismatch (|p^(m)(root)| below tol)");
    // 1/p = t^{-m} / q(t) with q(t) = sum tay[m+j] t^j; residue = (1/q)_{m-1}.
    std::vector<cplx> q(tay.begin() + multiplicity, tay.end());
    auto inv = detail::series_reciprocal(q, std::size_t(multiplicity));
    return inv[std::size_t(multiplicity) - 1];
}

struct PartialFraction {
    cplx root;
    int order = 1;  // exponent k in c/(w-root)^k
    cplx coeff;
};

// Decomposition 1/p = sum c_{r,k} / (w-r)^k over the roots of p.
inline std::vector<PartialFraction> partial_fractions(const ComplexPoly& p,
                                                      double tol = tol_algebraic) {
    if (p.is_zero() || p.degree() < 1)
        throw numerical_error("partial_fractions: need deg p >= 1");
    auto rts = roots(p, tol);
    std::vector<PartialFraction> out;
    for (auto& rc : rts) {
        auto tay = detail::taylor_at(p, rc.root);
        std::vector<cplx> q(tay.begin() + rc.multiplicity, tay.end());
        auto inv = detail::series_reciprocal(q, std::size_t(rc.multiplicity));
        // 1/p = sum_j inv[j] t^{j-m} near r: order k = m - j.
        for (int j = 0; j < rc.multiplicity; ++j)
            out.push_back({rc.root, rc.multiplicity - j, inv[std::size_t(j)]});
    }
    return out;
}

inline cplx eval_partial_fractions(const std::vector<PartialFraction>& pf, cplx w) {
    cplx acc = 0;
    for (auto& t : pf) acc += t.coeff / std::pow(w - t.root, t.order);
    return acc;
}

}  // namespace unfold
