#pragma once

#include "unfold/vector_field.hpp"

namespace unfold::samples {

inline constexpr int default_order = 20;

// X = y (y - x^2) (y - x) d/dy: the two-stage cascade with levels {2, 3}.
inline VectorFieldUnfolding cascade(int D = default_order) {
    VectorFieldUnfolding X;
    X.unit = BiSeries::constant(D, 1.0);
    X.curves.curves.push_back({ComplexPoly({0.0}), 1});
    X.curves.curves.push_back({ComplexPoly({0.0, 0.0, 1.0}), 1});
    X.curves.curves.push_back({ComplexPoly({0.0, 1.0}), 1});
    X.x_exponent = 0;
    return X;
}

// X = y (y - x) d/dy: a single level-1 gate between two simple points.
inline VectorFieldUnfolding gate(int D = default_order) {
    VectorFieldUnfolding X;
    X.unit = BiSeries::constant(D, 1.0);
    X.curves.curves.push_back({ComplexPoly({0.0}), 1});
    X.curves.curves.push_back({ComplexPoly({0.0, 1.0}), 1});
    X.x_exponent = 0;
    return X;
}

// X = y^2 d/dy: one double curve, no split at all.
inline VectorFieldUnfolding quadratic(int D = default_order) {
    VectorFieldUnfolding X;
    X.unit = BiSeries::constant(D, 1.0);
    X.curves.curves.push_back({ComplexPoly({0.0}), 2});
    X.x_exponent = 0;
    return X;
}

// X = (1 + y) y^2 (y - x) d/dy: non-constant unit, so the fiber residues of
// the fixed curves no longer sum to zero.
inline VectorFieldUnfolding skew_unit(int D = default_order) {
    VectorFieldUnfolding X;
    X.unit = BiSeries::constant(D, 1.0);
    X.unit.set(0, 1, 1.0);
    X.curves.curves.push_back({ComplexPoly({0.0}), 2});
    X.curves.curves.push_back({ComplexPoly({0.0, 1.0}), 1});
    X.x_exponent = 0;
    return X;
}

}  // namespace unfold::samples
