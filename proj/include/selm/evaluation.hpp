#pragma once

#include <string>
#include <vector>

#include "selm/tensor.hpp"

namespace selm {

struct MetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Point-forecast metrics. mape/smape carry the conventional 100/200 factors;
// both report percentages.
double metric_mse(const std::vector<Real>& y, const std::vector<Real>& yhat);
double metric_mae(const std::vector<Real>& y, const std::vector<Real>& yhat);
double metric_mape(const std::vector<Real>& y, const std::vector<Real>& yhat);
double metric_smape(const std::vector<Real>& y, const std::vector<Real>& yhat);

/// Scaled error against the m-step seasonal-naive difference of the
/// in-sample (training) series.
double metric_mase(const std::vector<Real>& y, const std::vector<Real>& yhat,
                   const std::vector<Real>& insample, int seasonal_period);

/// 0.5 * (smape/smape_naive2 + mase/mase_naive2).
double metric_owa(double smape, double mase, double smape_naive2, double mase_naive2);

/// Seasonally adjusted naive baseline: multiplicative classical decomposition
/// when the 90% autocorrelation seasonality test fires, plain last-value
/// repetition otherwise (and always when m == 1).
std::vector<Real> naive2_forecast(const std::vector<Real>& insample, int seasonal_period,
                                  int horizon);

bool seasonality_test(const std::vector<Real>& series, int seasonal_period);
std::vector<Real> seasonal_indices(const std::vector<Real>& series, int seasonal_period);

struct MetricReport {
    double mse = 0;
    double mae = 0;
    double mape = 0;
    double smape = 0;
    double mase = 0;
    double owa = 0;
    int horizon = 0;
    int seasonal_period = 1;
    std::string dataset;
};

std::string metric_report_json(const MetricReport& r);
std::string metric_report_csv_header();
std::string metric_report_csv_row(const MetricReport& r);

} // namespace selm
