#pragma once

#include <functional>
#include <string>
#include <vector>

#include "selm/tensor.hpp"

namespace selm {
namespace ops {

// Elementwise. `b` must have the same shape as `a`, or a shape that is a
// suffix of a's shape (bias-style broadcast over the leading axes).
TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);

TensorPtr add_scalar(const TensorPtr& a, Real c);
TensorPtr mul_scalar(const TensorPtr& a, Real c);
TensorPtr rsub_scalar(Real c, const TensorPtr& a); // c - a

TensorPtr exp_(const TensorPtr& a);
TensorPtr clamp(const TensorPtr& a, Real lo, Real hi);
TensorPtr sigmoid(const TensorPtr& a);
TensorPtr tanh_(const TensorPtr& a);
TensorPtr gelu(const TensorPtr& a);

TensorPtr softmax(const TensorPtr& a, int axis);

/// (x - mean) / (std + eps) along `axis`, population std.
TensorPtr standardize(const TensorPtr& a, int axis, Real eps = kEps);

/// gain * (x - mean)/sqrt(var + eps) + bias along `axis`; gain/bias are
/// 1-d with the axis extent.
TensorPtr layer_norm(const TensorPtr& a, const TensorPtr& gain, const TensorPtr& bias, int axis,
                     Real eps = kEps);

/// Mean over the given axes (sorted, unique); reduces rank. Full reduction
/// yields shape [1].
TensorPtr mean(const TensorPtr& a, std::vector<int> axes);
TensorPtr sum_all(const TensorPtr& a);

// Batched matmul over the trailing two axes. b's batch dims must equal a
// suffix of a's batch dims (possibly empty: a shared right-hand matrix).
TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);

TensorPtr reshape(const TensorPtr& a, std::vector<int> new_shape);
TensorPtr transpose(const TensorPtr& a, int ax1, int ax2);
TensorPtr concat(const TensorPtr& a, const TensorPtr& b, int axis);
TensorPtr slice(const TensorPtr& a, int axis, int start, int len);

/// out[b..,:] = mean over the k rows of `table` selected by idx[b..,:].
/// `idx` is a flat row-major index list with shape `idx_shape` + [k].
TensorPtr gather_rows_mean(const TensorPtr& table, const std::vector<int>& idx,
                           const std::vector<int>& idx_shape, int k);

/// x @ w + bias (bias broadcast over leading axes).
TensorPtr affine(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b);

struct LstmState {
    TensorPtr h;
    TensorPtr c;
};

/// One LSTM step: gates [input, forget, cell, output] from x@Wx + h@Wh + b.
/// x: [B, in], h/c: [B, hidden], wx: [in, 4*hidden], wh: [hidden, 4*hidden].
LstmState recurrent_cell_step(const TensorPtr& x, const TensorPtr& h, const TensorPtr& c,
                              const TensorPtr& wx, const TensorPtr& wh, const TensorPtr& b);

} // namespace ops

struct GradCheckReport {
    double max_rel_err = 0.0;
    bool pass = false;
    i64 worst_index = -1;
    std::string worst_param;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

/// Central finite differences against the reverse-mode gradient of a scalar
/// function of one tensor. step must lie in [1e-6, 1e-4].
GradCheckReport gradient_check(const std::function<TensorPtr(const TensorPtr&)>& f,
                               const Tensor& x, double step = 1e-5, double tol = 1e-4);

/// Same check across a set of leaf parameters that `loss` reads each call.
/// Skips params with requires_grad == false.
GradCheckReport gradient_check_params(const std::function<TensorPtr()>& loss,
                                      const std::vector<TensorPtr>& params,
                                      const std::vector<std::string>& names, double step = 1e-5,
                                      double tol = 1e-4);

} // namespace selm
