#pragma once

#include <vector>

#include "selm/data.hpp"
#include "selm/model.hpp"

namespace selm {

struct TrainConfig {
    Real lr = Real(1e-3);
    int batch_size = 32;
    int max_epochs = 10;
    int patience = 3;
    Real clip_norm = Real(1);
    Real kl_weight = Real(0);
    std::uint64_t seed = 42;

    void validate() const;
};

/// MSE over all elements plus an optional KL(N(mu, sigma^2) || N(0, I))
/// regularizer averaged over the latent entries.
TensorPtr forecast_loss(const TensorPtr& pred, const TensorPtr& target, const TensorPtr& mu,
                        const TensorPtr& logvar, Real kl_weight);

/// Adaptive-moment optimizer over an explicit trainable set. Frozen
/// parameters are never seen by it.
class Adam {
public:
    Adam(Real lr, Real beta1 = Real(0.9), Real beta2 = Real(0.999), Real eps = Real(1e-8));

    /// Clips the global gradient norm, applies one update, leaves grads
    /// untouched (callers zero them explicitly).
    void step(const ParamList& trainable, Real clip_norm);

private:
    Real lr_, beta1_, beta2_, eps_;
    i64 t_ = 0;
    std::vector<std::vector<Real>> m_, v_;
};

struct TrainReport {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    int best_epoch = -1;
    double best_val = 0;
    double wall_seconds = 0;
    i64 trainable_count = 0;
    i64 frozen_count = 0;
    bool diverged = false;
    std::uint64_t seed = 0;
    /// Hash over every assembled batch, for cross-run data-parity audits.
    /// Depends only on (windows, seed, batch size), not on model weights.
    std::uint64_t batch_hash = 0;
};

std::string train_report_json(const TrainReport& report);

/// Full optimization loop: shuffled mini-batches, adapter/TSCC-only updates,
/// per-epoch validation in deterministic inference mode, early stopping, and
/// best-checkpoint restoration. Deterministic under a fixed seed.
TrainReport fit(SelmModel& model, const std::vector<Window>& train_windows,
                const std::vector<Window>& val_windows, const TrainConfig& cfg);

} // namespace selm
