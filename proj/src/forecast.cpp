#include "selm/forecast.hpp"

#include <algorithm>
#include <stdexcept>

namespace selm {

Tensor forecast_native(const SelmModel& model, const Tensor& context_norm) {
    NoGradGuard ng;
    auto out = model.forward(context_norm, NoiseSpec::deterministic());
    return *out.prediction;
}

Tensor rollout_normalized(const SelmModel& model, const Tensor& context_norm, int horizon) {
    if (horizon < 1) throw std::invalid_argument("autoregressive_forecast: horizon must be >= 1");
    const int b = context_norm.extent(0);
    const int l = context_norm.extent(1);
    const int tau = model.config().horizon;
    const int rounds = (horizon + tau - 1) / tau;

    Tensor ctx = context_norm;
    Tensor preds({b, rounds * tau});
    for (int r = 0; r < rounds; ++r) {
        const Tensor step = forecast_native(model, ctx);
        for (int row = 0; row < b; ++row)
            std::copy_n(step.data.begin() + static_cast<i64>(row) * tau, tau,
                        preds.data.begin() + static_cast<i64>(row) * rounds * tau +
                            static_cast<i64>(r) * tau);
        if (r + 1 == rounds) break;
        // shift the context left by tau and append the fresh forecast
        Tensor next({b, l});
        for (int row = 0; row < b; ++row) {
            const Real* src = ctx.data.data() + static_cast<i64>(row) * l;
            Real* dst = next.data.data() + static_cast<i64>(row) * l;
            std::copy_n(src + tau, l - tau, dst);
            std::copy_n(step.data.data() + static_cast<i64>(row) * tau, tau, dst + (l - tau));
        }
        ctx = std::move(next);
    }

    // keep the first `horizon` values; the last round is truncated when
    // horizon is not a multiple of the native step
    Tensor out({b, horizon});
    for (int row = 0; row < b; ++row)
        std::copy_n(preds.data.begin() + static_cast<i64>(row) * rounds * tau, horizon,
                    out.data.begin() + static_cast<i64>(row) * horizon);
    return out;
}

Tensor autoregressive_forecast(const SelmModel& model, const Tensor& context_raw, int horizon,
                               Real eps) {
    if (context_raw.ndim() != 2 || context_raw.extent(1) != model.config().context_length)
        throw std::invalid_argument("autoregressive_forecast: expected [B," +
                                    std::to_string(model.config().context_length) +
                                    "] context, got " + shape_str(context_raw.shape));
    const int b = context_raw.extent(0);
    const int l = context_raw.extent(1);

    Tensor ctx = context_raw;
    std::vector<NormStats> stats(static_cast<size_t>(b));
    for (int row = 0; row < b; ++row) {
        Real* x = ctx.data.data() + static_cast<i64>(row) * l;
        stats[static_cast<size_t>(row)] = compute_stats(x, l, eps);
        normalize_inplace(x, l, stats[static_cast<size_t>(row)]);
    }

    Tensor out = rollout_normalized(model, ctx, horizon);
    // the original context statistics denormalize the whole rollout
    for (int row = 0; row < b; ++row)
        denormalize_inplace(out.data.data() + static_cast<i64>(row) * horizon, horizon,
                            stats[static_cast<size_t>(row)]);
    return out;
}

} // namespace selm
