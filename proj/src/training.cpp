#include "selm/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <json.hpp>

namespace selm {

namespace o = ops;

void TrainConfig::validate() const {
    if (lr <= Real(0)) throw std::invalid_argument("TrainConfig: lr must be positive");
    if (patience < 1) throw std::invalid_argument("TrainConfig: patience must be >= 1");
    if (clip_norm <= Real(0))
        throw std::invalid_argument("TrainConfig: clip_norm must be positive");
    if (batch_size < 1 || max_epochs < 1)
        throw std::invalid_argument("TrainConfig: batch_size and max_epochs must be >= 1");
}

TensorPtr forecast_loss(const TensorPtr& pred, const TensorPtr& target, const TensorPtr& mu,
                        const TensorPtr& logvar, Real kl_weight) {
    if (pred->shape != target->shape)
        throw std::invalid_argument("loss: prediction " + shape_str(pred->shape) + " and target " +
                                    shape_str(target->shape) + " differ");
    auto diff = o::sub(pred, target);
    std::vector<int> pred_axes(static_cast<size_t>(diff->ndim()));
    for (int i = 0; i < diff->ndim(); ++i) pred_axes[static_cast<size_t>(i)] = i;
    auto mse = o::mean(o::mul(diff, diff), pred_axes);
    if (kl_weight == Real(0) || !mu || !logvar) return mse;

    // KL(N(mu, sigma^2) || N(0, I)) = -0.5 * (1 + logvar - mu^2 - exp(logvar))
    auto inner = o::add_scalar(o::sub(o::sub(logvar, o::mul(mu, mu)), o::exp_(logvar)), Real(1));
    std::vector<int> lat_axes(static_cast<size_t>(inner->ndim()));
    for (int i = 0; i < inner->ndim(); ++i) lat_axes[static_cast<size_t>(i)] = i;
    auto kl = o::mul_scalar(o::mean(inner, lat_axes), Real(-0.5));
    return o::add(mse, o::mul_scalar(kl, kl_weight));
}

Adam::Adam(Real lr, Real beta1, Real beta2, Real eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(const ParamList& trainable, Real clip_norm) {
    if (m_.size() != trainable.size()) {
        m_.assign(trainable.size(), {});
        v_.assign(trainable.size(), {});
        for (size_t i = 0; i < trainable.size(); ++i) {
            m_[i].assign(trainable[i].tensor->data.size(), Real(0));
            v_[i].assign(trainable[i].tensor->data.size(), Real(0));
        }
    }
    double sq = 0;
    for (const auto& p : trainable) {
        p.tensor->ensure_grad();
        for (Real g : p.tensor->grad) sq += static_cast<double>(g) * static_cast<double>(g);
    }
    const double norm = std::sqrt(sq);
    const Real scale =
        norm > static_cast<double>(clip_norm) ? clip_norm / static_cast<Real>(norm) : Real(1);

    ++t_;
    const Real bc1 = Real(1) - std::pow(beta1_, static_cast<Real>(t_));
    const Real bc2 = Real(1) - std::pow(beta2_, static_cast<Real>(t_));
    for (size_t i = 0; i < trainable.size(); ++i) {
        auto& t = *trainable[i].tensor;
        for (size_t j = 0; j < t.data.size(); ++j) {
            const Real g = t.grad[j] * scale;
            m_[i][j] = beta1_ * m_[i][j] + (Real(1) - beta1_) * g;
            v_[i][j] = beta2_ * v_[i][j] + (Real(1) - beta2_) * g * g;
            const Real mhat = m_[i][j] / bc1;
            const Real vhat = v_[i][j] / bc2;
            t.data[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

namespace {

double validation_mse(const SelmModel& model, const std::vector<Window>& windows, int batch_size,
                      Real eps) {
    if (windows.empty()) return std::numeric_limits<double>::quiet_NaN();
    NoGradGuard ng;
    std::vector<i64> order(windows.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<i64>(i);
    double sse = 0;
    i64 count = 0;
    const i64 n = static_cast<i64>(windows.size());
    for (i64 begin = 0; begin < n; begin += batch_size) {
        const i64 take = std::min<i64>(batch_size, n - begin);
        Batch b = assemble_batch(windows, order, begin, take, eps);
        auto out = model.forward(b.context, NoiseSpec::deterministic());
        for (i64 i = 0; i < out.prediction->numel(); ++i) {
            const double d = static_cast<double>(out.prediction->data[i] - b.target.data[i]);
            sse += d * d;
        }
        count += out.prediction->numel();
    }
    return sse / static_cast<double>(count);
}

std::vector<std::vector<Real>> snapshot(const ParamList& list) {
    std::vector<std::vector<Real>> s;
    s.reserve(list.size());
    for (const auto& p : list) s.push_back(p.tensor->data);
    return s;
}

void restore(const ParamList& list, const std::vector<std::vector<Real>>& s) {
    for (size_t i = 0; i < list.size(); ++i) list[i].tensor->data = s[i];
}

} // namespace

TrainReport fit(SelmModel& model, const std::vector<Window>& train_windows,
                const std::vector<Window>& val_windows, const TrainConfig& cfg) {
    cfg.validate();
    if (train_windows.empty()) throw std::invalid_argument("fit: empty training stream");
    const auto t0 = std::chrono::steady_clock::now();

    auto params = model.parameters();
    auto part = partition_parameters(params);
    TrainReport report;
    report.seed = cfg.seed;
    report.trainable_count = param_count(part.trainable);
    report.frozen_count = param_count(part.frozen);

    Adam opt(cfg.lr);
    // Separate streams so the batch schedule is identical across model
    // variants that consume different amounts of sampling noise.
    RngState shuffle_rng(cfg.seed);
    RngState noise_rng(cfg.seed ^ 0x5DEECE66DULL);
    const Real eps = model.config().eps;

    double best_val = std::numeric_limits<double>::infinity();
    std::vector<std::vector<Real>> best_state = snapshot(part.trainable);
    int bad_epochs = 0;

    const i64 n = static_cast<i64>(train_windows.size());
    std::vector<i64> order(static_cast<size_t>(n));
    for (i64 i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        for (i64 i = n - 1; i > 0; --i)
            std::swap(order[static_cast<size_t>(i)],
                      order[static_cast<size_t>(shuffle_rng.index(i + 1))]);

        double epoch_loss = 0;
        i64 batches = 0;
        for (i64 begin = 0; begin < n; begin += cfg.batch_size) {
            const i64 take = std::min<i64>(cfg.batch_size, n - begin);
            Batch batch = assemble_batch(train_windows, order, begin, take, eps);
            report.batch_hash ^= tensor_hash(batch.context) + 0x9E3779B97F4A7C15ULL +
                                 (report.batch_hash << 6) + (report.batch_hash >> 2);
            for (const auto& p : part.trainable) p.tensor->zero_grad();

            auto noise = NoiseSpec::sampled(noise_rng);
            auto out = model.forward(batch.context, noise);
            auto target = Tensor::leaf(batch.target, false);
            auto loss = forecast_loss(out.prediction, target, out.mu, out.logvar, cfg.kl_weight);
            const double lv = static_cast<double>(loss->data[0]);
            if (!std::isfinite(lv)) {
                // abort on divergence, keeping the best checkpoint seen so far
                restore(part.trainable, best_state);
                report.diverged = true;
                report.wall_seconds =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                return report;
            }
            backward(loss);
            opt.step(part.trainable, cfg.clip_norm);
            epoch_loss += lv;
            ++batches;
        }
        report.train_loss.push_back(epoch_loss / static_cast<double>(batches));

        double vloss = validation_mse(model, val_windows, cfg.batch_size, eps);
        if (std::isnan(vloss)) vloss = report.train_loss.back(); // no val stream
        report.val_loss.push_back(vloss);

        if (vloss < best_val) {
            best_val = vloss;
            best_state = snapshot(part.trainable);
            report.best_epoch = epoch;
            bad_epochs = 0;
        } else {
            ++bad_epochs;
            if (bad_epochs >= cfg.patience) break;
        }
    }

    restore(part.trainable, best_state);
    report.best_val = best_val;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

std::string train_report_json(const TrainReport& report) {
    nlohmann::json j;
    j["train_loss"] = report.train_loss;
    j["val_loss"] = report.val_loss;
    j["best_epoch"] = report.best_epoch;
    j["best_val"] = report.best_val;
    j["wall_seconds"] = report.wall_seconds;
    j["trainable_parameters"] = report.trainable_count;
    j["frozen_parameters"] = report.frozen_count;
    j["diverged"] = report.diverged;
    j["seed"] = report.seed;
    j["batch_hash"] = report.batch_hash;
    return j.dump(2);
}

} // namespace selm
