#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "selm/rng.hpp"
#include "selm/tensor.hpp"

namespace selm {

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Multivariate series, row-major [time x channels]. Uniform sampling is
/// assumed; an optional leading timestamp column in the source file is
/// parsed and dropped.
struct SeriesFrame {
    std::vector<Real> values;
    i64 rows = 0;
    int channels = 0;
    std::vector<std::string> channel_names;

    Real at(i64 t, int c) const { return values[static_cast<size_t>(t * channels + c)]; }
    std::vector<Real> channel(int c) const;
};

/// Delimiter-separated text with a header row; delimiter auto-detected among
/// comma, semicolon and tab. Non-numeric data cells are rejected with their
/// row and column.
SeriesFrame load_series(const std::string& path);

struct SplitCounts {
    i64 train = 0;
    i64 val = 0;
    i64 test = 0;
};

struct SeriesSplits {
    SeriesFrame train, val, test;
};

/// Contiguous chronological split: train, then val, then test.
SeriesSplits split_series(const SeriesFrame& frame, const SplitCounts& counts);

struct WindowSpec {
    int context_length = 672; // L
    int horizon = 96;         // native step tau
    int stride = 1;
    int segment_length = 96;  // P; L must be divisible by P

    void validate() const;
    int segments() const { return context_length / segment_length; }
};

/// One univariate training/evaluation window: L context steps followed by
/// tau target steps, both in the original scale.
struct Window {
    int channel = 0;
    i64 start = 0; // index of the first context step within its split
    std::vector<Real> context;
    std::vector<Real> target;
};

/// Channel-independent windowing: every channel contributes its own
/// univariate windows, ordered by (channel, start). The non-independent mode
/// is only defined for single-channel frames.
std::vector<Window> make_windows(const SeriesFrame& frame, const WindowSpec& spec,
                                 bool channel_independent = true);

/// Per-instance normalization statistics: x' = (x - mean) / denom with
/// denom = std + eps, so denom > 0 always holds.
struct NormStats {
    Real mean = 0;
    Real denom = 1;
};

NormStats compute_stats(const Real* x, i64 n, Real eps = kEps);
void normalize_inplace(Real* x, i64 n, const NormStats& s);
void denormalize_inplace(Real* x, i64 n, const NormStats& s);

/// Non-overlapping segmentation [B, L] -> [B, N, P] with N = L / P. The
/// layout is preserved, so flattening the result reproduces the window
/// bit-exactly.
Tensor segment(const Tensor& window, int segment_length);
Tensor flatten_segments(const Tensor& segmented);

/// Assembled training batch in normalized space; `stats` holds one entry per
/// row for denormalizing forecasts.
struct Batch {
    Tensor context; // [B, L]
    Tensor target;  // [B, tau]
    std::vector<NormStats> stats;
};

Batch assemble_batch(const std::vector<Window>& windows, const std::vector<i64>& order,
                     i64 begin, i64 count, Real eps = kEps);

/// Synthetic sinusoid with Gaussian noise and sparse spike contamination,
/// handy for smoke tests and quickstarts.
SeriesFrame synthetic_sinusoid(i64 steps, double period, double noise_std, double spike_prob,
                               double spike_magnitude, std::uint64_t seed);

void write_series_csv(const std::string& path, const SeriesFrame& frame);

} // namespace selm
