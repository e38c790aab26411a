#ifndef DIFFPURIFY_OPERATORS_HPP
#define DIFFPURIFY_OPERATORS_HPP

#include <vector>

#include "diffpurify/state.hpp"

namespace diffpurify {

// Elementwise sign with sign(0) = 0, so an exact match contributes no push.
State sign_vec(const State& x);

// min_i |x_i|; rejects empty input.
double min_abs(const State& x);

// d/da ||a - b||_1 = sign(a - b)
State l1_grad(const State& a, const State& b);

// d/da ||a - b||_2^2 = 2 (a - b)
State l2_grad(const State& a, const State& b);

// Separable bicubic x4 upsampling (Catmull-Rom kernel, a = -0.5) built from
// two dyadic passes per axis; each pass keeps samples and inserts midpoints
// with weights (-1, 9, 9, -1)/16, clamping indices at the edges. Output is
// 4H x 4W per channel, and the whole map is linear in pixel values.
State bicubic_up4(const State& x, const GridShape& shape);

// Transpose map H^T v for the operator above; v has the upsampled dimension.
State bicubic_vjp(const State& v, const GridShape& shape);

// Dense materialization of H (rows = output dim), for small-grid debugging.
std::vector<State> bicubic_dense_matrix(const GridShape& shape);

// Smooth dimension-lifting map for states without grid structure:
// x -> [x, tanh(kappa x), lambda x.^2], with an analytic Jacobian.
constexpr double kLiftKappa = 2.0;
constexpr double kLiftLambda = 0.5;

State nonlinear_lift(const State& x);
State nonlinear_lift_vjp(const State& x, const State& v);

// Measurement operator used by the short-range guidance term.
enum class OperatorKind { Identity, Bicubic4, NonlinearLift };

struct MeasurementOp {
    OperatorKind kind = OperatorKind::Identity;
    GridShape shape;  // used by Bicubic4

    std::size_t out_dim(std::size_t in_dim) const;
    State apply(const State& x) const;
    // v^T dH/dx evaluated at x (x is ignored by the linear operators).
    State vjp(const State& x, const State& v) const;
};

}  // namespace diffpurify

#endif
