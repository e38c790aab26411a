#include "diffpurify/operators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace diffpurify {

State sign_vec(const State& x) {
    State out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
    return out;
}

double min_abs(const State& x) {
    if (x.empty()) throw std::invalid_argument("min_abs: empty input");
    double m = std::abs(x[0]);
    for (double v : x) m = std::min(m, std::abs(v));
    return m;
}

State l1_grad(const State& a, const State& b) {
    check_same_dim(a, b, "l1_grad");
    return sign_vec(a - b);
}

State l2_grad(const State& a, const State& b) {
    check_same_dim(a, b, "l2_grad");
    State out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = 2.0 * (a[i] - b[i]);
    return out;
}

namespace {

// One dyadic pass along a line: out[2k] = in[k],
// out[2k+1] = (-in[k-1] + 9 in[k] + 9 in[k+1] - in[k+2]) / 16, edge-clamped.
// These are the Catmull-Rom (a = -0.5) weights at the half-sample phase.
void up2_line(const double* in, int n, int stride_in, double* out, int stride_out) {
    for (int k = 0; k < n; ++k) {
        int km1 = std::max(k - 1, 0), kp1 = std::min(k + 1, n - 1), kp2 = std::min(k + 2, n - 1);
        out[2 * k * stride_out] = in[k * stride_in];
        out[(2 * k + 1) * stride_out] =
            (-in[km1 * stride_in] + 9.0 * in[k * stride_in] + 9.0 * in[kp1 * stride_in] -
             in[kp2 * stride_in]) /
            16.0;
    }
}

void up2_line_transpose(const double* gout, int n, int stride_out, double* gin, int stride_in) {
    for (int k = 0; k < n; ++k) gin[k * stride_in] = gout[2 * k * stride_out];
    for (int k = 0; k < n; ++k) {
        int km1 = std::max(k - 1, 0), kp1 = std::min(k + 1, n - 1), kp2 = std::min(k + 2, n - 1);
        double g = gout[(2 * k + 1) * stride_out] / 16.0;
        gin[km1 * stride_in] -= g;
        gin[k * stride_in] += 9.0 * g;
        gin[kp1 * stride_in] += 9.0 * g;
        gin[kp2 * stride_in] -= g;
    }
}

// x2 along both axes of an h x w plane (row-major), one channel.
std::vector<double> up2_plane(const std::vector<double>& in, int h, int w) {
    std::vector<double> rows(static_cast<std::size_t>(h) * 2 * w);
    for (int y = 0; y < h; ++y)
        up2_line(in.data() + static_cast<std::size_t>(y) * w, w, 1,
                 rows.data() + static_cast<std::size_t>(y) * 2 * w, 1);
    // rows is h x 2w; now upsample columns
    std::vector<double> out(static_cast<std::size_t>(2 * h) * 2 * w);
    for (int x = 0; x < 2 * w; ++x)
        up2_line(rows.data() + x, h, 2 * w, out.data() + x, 2 * w);
    return out;
}

std::vector<double> up2_plane_transpose(const std::vector<double>& gout, int h, int w) {
    // transpose of the column pass: gout is 2h x 2w -> h x 2w
    std::vector<double> grows(static_cast<std::size_t>(h) * 2 * w, 0.0);
    for (int x = 0; x < 2 * w; ++x)
        up2_line_transpose(gout.data() + x, h, 2 * w, grows.data() + x, 2 * w);
    std::vector<double> gin(static_cast<std::size_t>(h) * w, 0.0);
    for (int y = 0; y < h; ++y)
        up2_line_transpose(grows.data() + static_cast<std::size_t>(y) * 2 * w, w, 1,
                           gin.data() + static_cast<std::size_t>(y) * w, 1);
    return gin;
}

void check_grid(const State& x, const GridShape& shape, const char* where) {
    if (shape.height < 2 || shape.width < 2)
        throw std::invalid_argument(std::string(where) + ": degenerate grid axis");
    if (x.size() != shape.size())
        throw std::invalid_argument(std::string(where) + ": state does not match grid shape");
}

}  // namespace

State bicubic_up4(const State& x, const GridShape& shape) {
    check_grid(x, shape, "bicubic_up4");
    int h = shape.height, w = shape.width;
    std::size_t plane = static_cast<std::size_t>(h) * w;
    std::size_t plane_out = plane * 16;
    State out(plane_out * shape.channels);
    for (int c = 0; c < shape.channels; ++c) {
        std::vector<double> p(x.begin() + c * plane, x.begin() + (c + 1) * plane);
        auto p2 = up2_plane(p, h, w);
        auto p4 = up2_plane(p2, 2 * h, 2 * w);
        std::copy(p4.begin(), p4.end(), out.begin() + c * plane_out);
    }
    return out;
}

State bicubic_vjp(const State& v, const GridShape& shape) {
    if (shape.height < 2 || shape.width < 2)
        throw std::invalid_argument("bicubic_vjp: degenerate grid axis");
    std::size_t plane = static_cast<std::size_t>(shape.height) * shape.width;
    std::size_t plane_out = plane * 16;
    if (v.size() != plane_out * shape.channels)
        throw std::invalid_argument("bicubic_vjp: vector does not match upsampled shape");
    State out(plane * shape.channels);
    for (int c = 0; c < shape.channels; ++c) {
        std::vector<double> g(v.begin() + c * plane_out, v.begin() + (c + 1) * plane_out);
        auto g2 = up2_plane_transpose(g, 2 * shape.height, 2 * shape.width);
        auto g1 = up2_plane_transpose(g2, shape.height, shape.width);
        std::copy(g1.begin(), g1.end(), out.begin() + c * plane);
    }
    return out;
}

std::vector<State> bicubic_dense_matrix(const GridShape& shape) {
    std::size_t n = shape.size();
    std::size_t m = n * 16;
    std::vector<State> rows(m, State(n, 0.0));
    State basis(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        basis[j] = 1.0;
        State col = bicubic_up4(basis, shape);
        basis[j] = 0.0;
        for (std::size_t i = 0; i < m; ++i) rows[i][j] = col[i];
    }
    return rows;
}

State nonlinear_lift(const State& x) {
    State out(3 * x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i];
        out[x.size() + i] = std::tanh(kLiftKappa * x[i]);
        out[2 * x.size() + i] = kLiftLambda * x[i] * x[i];
    }
    return out;
}

State nonlinear_lift_vjp(const State& x, const State& v) {
    if (v.size() != 3 * x.size())
        throw std::invalid_argument("nonlinear_lift_vjp: dimension mismatch");
    State out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double th = std::tanh(kLiftKappa * x[i]);
        out[i] = v[i] + v[x.size() + i] * kLiftKappa * (1.0 - th * th) +
                 v[2 * x.size() + i] * 2.0 * kLiftLambda * x[i];
    }
    return out;
}

std::size_t MeasurementOp::out_dim(std::size_t in_dim) const {
    switch (kind) {
        case OperatorKind::Identity: return in_dim;
        case OperatorKind::Bicubic4: return shape.size() * 16;
        case OperatorKind::NonlinearLift: return 3 * in_dim;
    }
    return in_dim;
}

State MeasurementOp::apply(const State& x) const {
    switch (kind) {
        case OperatorKind::Identity: return x;
        case OperatorKind::Bicubic4: return bicubic_up4(x, shape);
        case OperatorKind::NonlinearLift: return nonlinear_lift(x);
    }
    return x;
}

State MeasurementOp::vjp(const State& x, const State& v) const {
    switch (kind) {
        case OperatorKind::Identity:
            check_same_dim(x, v, "MeasurementOp::vjp");
            return v;
        case OperatorKind::Bicubic4: return bicubic_vjp(v, shape);
        case OperatorKind::NonlinearLift: return nonlinear_lift_vjp(x, v);
    }
    return v;
}

}  // namespace diffpurify
