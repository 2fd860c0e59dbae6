#pragma once

#include "selm/model.hpp"

namespace selm {

/// One deterministic native-horizon step on an already-normalized context.
Tensor forecast_native(const SelmModel& model, const Tensor& context_norm);

/// Iterative rollout to an arbitrary horizon on raw-scale contexts.
/// The context is instance-normalized once; each round forecasts the native
/// horizon, appends it to the (normalized) context and drops the oldest
/// steps. When the requested horizon is not a multiple of the native one the
/// final block is truncated, so exactly `horizon` values come back,
/// denormalized with the original context statistics.
Tensor autoregressive_forecast(const SelmModel& model, const Tensor& context_raw, int horizon,
                               Real eps = kEps);

/// Same rollout in normalized space (no stats handling); used by the
/// composition oracles and by callers that manage normalization themselves.
Tensor rollout_normalized(const SelmModel& model, const Tensor& context_norm, int horizon);

} // namespace selm
