#include "selm/evaluation.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

namespace selm {

namespace {
void check_paired(const std::vector<Real>& y, const std::vector<Real>& yhat, const char* name) {
    if (y.empty()) throw MetricError(std::string(name) + ": empty input");
    if (y.size() != yhat.size())
        throw MetricError(std::string(name) + ": length mismatch " + std::to_string(y.size()) +
                          " vs " + std::to_string(yhat.size()));
}
} // namespace

double metric_mse(const std::vector<Real>& y, const std::vector<Real>& yhat) {
    check_paired(y, yhat, "mse");
    double acc = 0;
    for (size_t i = 0; i < y.size(); ++i) {
        const double d = static_cast<double>(y[i]) - static_cast<double>(yhat[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(y.size());
}

double metric_mae(const std::vector<Real>& y, const std::vector<Real>& yhat) {
    check_paired(y, yhat, "mae");
    double acc = 0;
    for (size_t i = 0; i < y.size(); ++i)
        acc += std::abs(static_cast<double>(y[i]) - static_cast<double>(yhat[i]));
    return acc / static_cast<double>(y.size());
}

double metric_mape(const std::vector<Real>& y, const std::vector<Real>& yhat) {
    check_paired(y, yhat, "mape");
    double acc = 0;
    for (size_t i = 0; i < y.size(); ++i) {
        if (y[i] == Real(0))
            throw MetricError("mape: zero denominator at point " + std::to_string(i));
        acc += std::abs(static_cast<double>(y[i]) - static_cast<double>(yhat[i])) /
               std::abs(static_cast<double>(y[i]));
    }
    return 100.0 * acc / static_cast<double>(y.size());
}

double metric_smape(const std::vector<Real>& y, const std::vector<Real>& yhat) {
    check_paired(y, yhat, "smape");
    double acc = 0;
    for (size_t i = 0; i < y.size(); ++i) {
        const double denom =
            std::abs(static_cast<double>(y[i])) + std::abs(static_cast<double>(yhat[i]));
        if (denom == 0.0)
            throw MetricError("smape: zero denominator at point " + std::to_string(i));
        acc += std::abs(static_cast<double>(y[i]) - static_cast<double>(yhat[i])) / denom;
    }
    return 200.0 * acc / static_cast<double>(y.size());
}

double metric_mase(const std::vector<Real>& y, const std::vector<Real>& yhat,
                   const std::vector<Real>& insample, int m) {
    check_paired(y, yhat, "mase");
    if (m < 1) throw MetricError("mase: seasonal period must be >= 1");
    if (static_cast<int>(insample.size()) <= m)
        throw MetricError("mase: in-sample length " + std::to_string(insample.size()) +
                          " must exceed seasonal period " + std::to_string(m));
    double scale = 0;
    for (size_t t = static_cast<size_t>(m); t < insample.size(); ++t)
        scale += std::abs(static_cast<double>(insample[t]) -
                          static_cast<double>(insample[t - static_cast<size_t>(m)]));
    scale /= static_cast<double>(insample.size() - static_cast<size_t>(m));
    if (scale == 0.0) throw MetricError("mase: constant seasonal in-sample, zero scale");
    double acc = 0;
    for (size_t i = 0; i < y.size(); ++i)
        acc += std::abs(static_cast<double>(y[i]) - static_cast<double>(yhat[i]));
    return acc / static_cast<double>(y.size()) / scale;
}

double metric_owa(double smape, double mase, double smape_naive2, double mase_naive2) {
    if (smape_naive2 <= 0.0 || mase_naive2 <= 0.0)
        throw MetricError("owa: baseline values must be positive");
    return 0.5 * (smape / smape_naive2 + mase / mase_naive2);
}

namespace {
std::vector<double> autocorrelations(const std::vector<Real>& x, int max_lag) {
    const size_t n = x.size();
    double mean = 0;
    for (Real v : x) mean += static_cast<double>(v);
    mean /= static_cast<double>(n);
    double denom = 0;
    for (Real v : x) {
        const double d = static_cast<double>(v) - mean;
        denom += d * d;
    }
    std::vector<double> acf(static_cast<size_t>(max_lag) + 1, 0.0);
    if (denom == 0.0) return acf;
    for (int k = 1; k <= max_lag; ++k) {
        double num = 0;
        for (size_t t = static_cast<size_t>(k); t < n; ++t)
            num += (static_cast<double>(x[t]) - mean) *
                   (static_cast<double>(x[t - static_cast<size_t>(k)]) - mean);
        acf[static_cast<size_t>(k)] = num / denom;
    }
    return acf;
}
} // namespace

bool seasonality_test(const std::vector<Real>& series, int m) {
    if (m <= 1) return false;
    const int n = static_cast<int>(series.size());
    if (n < 3 * m) return false;
    const auto acf = autocorrelations(series, m);
    double sumsq = 0;
    for (int i = 1; i < m; ++i) sumsq += acf[static_cast<size_t>(i)] * acf[static_cast<size_t>(i)];
    const double limit = 1.645 * std::sqrt((1.0 + 2.0 * sumsq) / static_cast<double>(n));
    return std::abs(acf[static_cast<size_t>(m)]) > limit;
}

std::vector<Real> seasonal_indices(const std::vector<Real>& series, int m) {
    const int n = static_cast<int>(series.size());
    if (m < 1 || n < 2 * m)
        throw MetricError("seasonal_indices: need at least two full periods");
    // centered moving average (2xm when m is even), then per-season mean ratio
    std::vector<double> cma(static_cast<size_t>(n), std::nan(""));
    const int half = m / 2;
    for (int t = 0; t < n; ++t) {
        if (m % 2 == 1) {
            if (t - half < 0 || t + half >= n) continue;
            double s = 0;
            for (int j = -half; j <= half; ++j) s += static_cast<double>(series[static_cast<size_t>(t + j)]);
            cma[static_cast<size_t>(t)] = s / m;
        } else {
            if (t - half < 0 || t + half >= n) continue;
            double s = 0.5 * (static_cast<double>(series[static_cast<size_t>(t - half)]) +
                              static_cast<double>(series[static_cast<size_t>(t + half)]));
            for (int j = -half + 1; j <= half - 1; ++j)
                s += static_cast<double>(series[static_cast<size_t>(t + j)]);
            cma[static_cast<size_t>(t)] = s / m;
        }
    }
    std::vector<double> sum(static_cast<size_t>(m), 0.0);
    std::vector<int> count(static_cast<size_t>(m), 0);
    for (int t = 0; t < n; ++t) {
        if (std::isnan(cma[static_cast<size_t>(t)]) || cma[static_cast<size_t>(t)] == 0.0) continue;
        sum[static_cast<size_t>(t % m)] += static_cast<double>(series[static_cast<size_t>(t)]) /
                                           cma[static_cast<size_t>(t)];
        ++count[static_cast<size_t>(t % m)];
    }
    std::vector<Real> idx(static_cast<size_t>(m), Real(1));
    double mean_idx = 0;
    for (int s = 0; s < m; ++s) {
        if (count[static_cast<size_t>(s)] == 0)
            throw MetricError("seasonal_indices: season " + std::to_string(s) +
                              " has no interior points");
        idx[static_cast<size_t>(s)] =
            static_cast<Real>(sum[static_cast<size_t>(s)] / count[static_cast<size_t>(s)]);
        mean_idx += static_cast<double>(idx[static_cast<size_t>(s)]);
    }
    mean_idx /= m;
    if (mean_idx == 0.0) throw MetricError("seasonal_indices: degenerate indices");
    for (auto& v : idx) v = static_cast<Real>(static_cast<double>(v) / mean_idx);
    return idx;
}

std::vector<Real> naive2_forecast(const std::vector<Real>& insample, int m, int horizon) {
    const int n = static_cast<int>(insample.size());
    if (n < std::max(m, 2))
        throw MetricError("naive2_forecast: insufficient history (" + std::to_string(n) +
                          " points for period " + std::to_string(m) + ")");
    if (horizon < 1) throw MetricError("naive2_forecast: horizon must be >= 1");
    std::vector<Real> out(static_cast<size_t>(horizon));
    if (m > 1 && seasonality_test(insample, m)) {
        const auto idx = seasonal_indices(insample, m);
        const Real last_des =
            insample[static_cast<size_t>(n - 1)] / idx[static_cast<size_t>((n - 1) % m)];
        for (int h = 0; h < horizon; ++h)
            out[static_cast<size_t>(h)] = last_des * idx[static_cast<size_t>((n + h) % m)];
    } else {
        for (int h = 0; h < horizon; ++h) out[static_cast<size_t>(h)] = insample[static_cast<size_t>(n - 1)];
    }
    return out;
}

std::string metric_report_json(const MetricReport& r) {
    nlohmann::json j;
    j["mse"] = r.mse;
    j["mae"] = r.mae;
    j["mape"] = r.mape;
    j["smape"] = r.smape;
    j["mase"] = r.mase;
    j["owa"] = r.owa;
    j["horizon"] = r.horizon;
    j["seasonal_period"] = r.seasonal_period;
    j["dataset"] = r.dataset;
    return j.dump(2);
}

std::string metric_report_csv_header() {
    return "dataset,horizon,seasonal_period,mse,mae,mape,smape,mase,owa";
}

std::string metric_report_csv_row(const MetricReport& r) {
    std::ostringstream os;
    os.precision(10);
    os << r.dataset << ',' << r.horizon << ',' << r.seasonal_period << ',' << r.mse << ',' << r.mae
       << ',' << r.mape << ',' << r.smape << ',' << r.mase << ',' << r.owa;
    return os.str();
}

} // namespace selm
