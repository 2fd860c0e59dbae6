#include "selm/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace selm {

std::vector<Real> SeriesFrame::channel(int c) const {
    std::vector<Real> out(static_cast<size_t>(rows));
    for (i64 t = 0; t < rows; ++t) out[static_cast<size_t>(t)] = at(t, c);
    return out;
}

namespace {

char detect_delimiter(const std::string& header) {
    const char candidates[] = {',', ';', '\t'};
    char best = ',';
    size_t best_count = 0;
    for (char c : candidates) {
        const size_t n = static_cast<size_t>(std::count(header.begin(), header.end(), c));
        if (n > best_count) {
            best_count = n;
            best = c;
        }
    }
    return best;
}

std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == delim) {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    cells.push_back(cur);
    return cells;
}

bool parse_real(const std::string& cell, Real& out) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) return false;
    while (*end == ' ' || *end == '\t') ++end;
    if (*end != '\0') return false;
    out = static_cast<Real>(v);
    return true;
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

bool looks_like_time_column(const std::string& name) {
    const std::string n = lower(name);
    return n.find("date") != std::string::npos || n.find("time") != std::string::npos;
}

} // namespace

SeriesFrame load_series(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError(path + ": missing file");
    std::string line;
    if (!std::getline(is, line)) throw DataError(path + ": empty file");
    const char delim = detect_delimiter(line);
    std::vector<std::string> header = split_line(line, delim);

    std::vector<std::vector<std::string>> raw_rows;
    while (std::getline(is, line)) {
        if (line.empty() || line == "\r") continue;
        raw_rows.push_back(split_line(line, delim));
    }
    if (raw_rows.size() < 2) throw DataError(path + ": fewer than 2 data rows");

    // An optional leading timestamp column is ignored for the math.
    int first_col = 0;
    if (!header.empty()) {
        Real tmp;
        if (looks_like_time_column(header[0]) ||
            (header.size() > 1 && !parse_real(raw_rows[0][0], tmp)))
            first_col = 1;
    }
    const int channels = static_cast<int>(header.size()) - first_col;
    if (channels < 1) throw DataError(path + ": no numeric columns after the timestamp column");

    SeriesFrame frame;
    frame.channels = channels;
    frame.rows = static_cast<i64>(raw_rows.size());
    frame.channel_names.assign(header.begin() + first_col, header.end());
    frame.values.resize(static_cast<size_t>(frame.rows) * channels);
    for (size_t r = 0; r < raw_rows.size(); ++r) {
        const auto& cells = raw_rows[r];
        if (static_cast<int>(cells.size()) != channels + first_col)
            throw DataError(path + ": row " + std::to_string(r + 2) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(channels + first_col));
        for (int c = 0; c < channels; ++c) {
            Real v;
            if (!parse_real(cells[static_cast<size_t>(c + first_col)], v))
                throw DataError(path + ": row " + std::to_string(r + 2) + ", column '" +
                                frame.channel_names[static_cast<size_t>(c)] +
                                "': non-numeric cell '" + cells[static_cast<size_t>(c + first_col)] +
                                "'");
            frame.values[r * static_cast<size_t>(channels) + static_cast<size_t>(c)] = v;
        }
    }
    return frame;
}

namespace {
SeriesFrame take_rows(const SeriesFrame& frame, i64 begin, i64 count) {
    SeriesFrame out;
    out.channels = frame.channels;
    out.channel_names = frame.channel_names;
    out.rows = count;
    out.values.assign(frame.values.begin() + begin * frame.channels,
                      frame.values.begin() + (begin + count) * frame.channels);
    return out;
}
} // namespace

SeriesSplits split_series(const SeriesFrame& frame, const SplitCounts& counts) {
    if (counts.train < 0 || counts.val < 0 || counts.test < 0)
        throw DataError("split_series: negative split count");
    const i64 total = counts.train + counts.val + counts.test;
    if (total > frame.rows)
        throw DataError("split_series: counts sum to " + std::to_string(total) + " but frame has " +
                        std::to_string(frame.rows) + " rows");
    SeriesSplits s;
    s.train = take_rows(frame, 0, counts.train);
    s.val = take_rows(frame, counts.train, counts.val);
    s.test = take_rows(frame, counts.train + counts.val, counts.test);
    return s;
}

void WindowSpec::validate() const {
    if (context_length <= 0 || horizon <= 0 || stride <= 0 || segment_length <= 0)
        throw DataError("WindowSpec: context_length, horizon, stride and segment_length must be positive");
    if (context_length % segment_length != 0)
        throw DataError("WindowSpec: context_length " + std::to_string(context_length) +
                        " is not divisible by segment_length " + std::to_string(segment_length));
}

std::vector<Window> make_windows(const SeriesFrame& frame, const WindowSpec& spec,
                                 bool channel_independent) {
    spec.validate();
    if (!channel_independent && frame.channels != 1)
        throw DataError("make_windows: non-channel-independent mode only supports single-channel frames");
    const i64 need = spec.context_length + spec.horizon;
    std::vector<Window> out;
    if (frame.rows < need) return out;
    for (int c = 0; c < frame.channels; ++c) {
        for (i64 s = 0; s + need <= frame.rows; s += spec.stride) {
            Window w;
            w.channel = c;
            w.start = s;
            w.context.resize(static_cast<size_t>(spec.context_length));
            w.target.resize(static_cast<size_t>(spec.horizon));
            for (int t = 0; t < spec.context_length; ++t)
                w.context[static_cast<size_t>(t)] = frame.at(s + t, c);
            for (int t = 0; t < spec.horizon; ++t)
                w.target[static_cast<size_t>(t)] = frame.at(s + spec.context_length + t, c);
            out.push_back(std::move(w));
        }
    }
    // already ordered by (channel, start) by construction
    return out;
}

NormStats compute_stats(const Real* x, i64 n, Real eps) {
    NormStats s;
    Real mu = 0;
    for (i64 i = 0; i < n; ++i) mu += x[i];
    mu /= Real(n);
    Real var = 0;
    for (i64 i = 0; i < n; ++i) {
        const Real d = x[i] - mu;
        var += d * d;
    }
    s.mean = mu;
    s.denom = std::sqrt(var / Real(n)) + eps;
    return s;
}

void normalize_inplace(Real* x, i64 n, const NormStats& s) {
    for (i64 i = 0; i < n; ++i) x[i] = (x[i] - s.mean) / s.denom;
}

void denormalize_inplace(Real* x, i64 n, const NormStats& s) {
    for (i64 i = 0; i < n; ++i) x[i] = x[i] * s.denom + s.mean;
}

Tensor segment(const Tensor& window, int segment_length) {
    if (window.ndim() != 2)
        throw DataError("segment: expected [B, L] input, got " + shape_str(window.shape));
    const int b = window.extent(0), l = window.extent(1);
    if (segment_length <= 0 || l % segment_length != 0)
        throw DataError("segment: window length " + std::to_string(l) +
                        " is not divisible by segment length " + std::to_string(segment_length));
    Tensor out({b, l / segment_length, segment_length}, window.data);
    return out;
}

Tensor flatten_segments(const Tensor& segmented) {
    if (segmented.ndim() != 3)
        throw DataError("flatten_segments: expected [B, N, P] input, got " +
                        shape_str(segmented.shape));
    Tensor out({segmented.extent(0), segmented.extent(1) * segmented.extent(2)}, segmented.data);
    return out;
}

Batch assemble_batch(const std::vector<Window>& windows, const std::vector<i64>& order, i64 begin,
                     i64 count, Real eps) {
    if (count <= 0 || begin + count > static_cast<i64>(order.size()))
        throw DataError("assemble_batch: range out of bounds");
    const auto& first = windows[static_cast<size_t>(order[static_cast<size_t>(begin)])];
    const int l = static_cast<int>(first.context.size());
    const int tau = static_cast<int>(first.target.size());
    Batch batch;
    batch.context = Tensor({static_cast<int>(count), l});
    batch.target = Tensor({static_cast<int>(count), tau});
    batch.stats.resize(static_cast<size_t>(count));
    for (i64 r = 0; r < count; ++r) {
        const auto& w = windows[static_cast<size_t>(order[static_cast<size_t>(begin + r)])];
        Real* ctx = batch.context.data.data() + r * l;
        Real* tgt = batch.target.data.data() + r * tau;
        std::copy(w.context.begin(), w.context.end(), ctx);
        std::copy(w.target.begin(), w.target.end(), tgt);
        // stats from the context only; the target is normalized with them
        const NormStats s = compute_stats(ctx, l, eps);
        normalize_inplace(ctx, l, s);
        normalize_inplace(tgt, tau, s);
        batch.stats[static_cast<size_t>(r)] = s;
    }
    return batch;
}

SeriesFrame synthetic_sinusoid(i64 steps, double period, double noise_std, double spike_prob,
                               double spike_magnitude, std::uint64_t seed) {
    RngState rng(seed);
    SeriesFrame frame;
    frame.rows = steps;
    frame.channels = 1;
    frame.channel_names = {"value"};
    frame.values.resize(static_cast<size_t>(steps));
    for (i64 t = 0; t < steps; ++t) {
        double v = std::sin(2.0 * M_PI * static_cast<double>(t) / period);
        v += noise_std * rng.normal();
        if (rng.uniform() < spike_prob) v += spike_magnitude * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        frame.values[static_cast<size_t>(t)] = static_cast<Real>(v);
    }
    return frame;
}

void write_series_csv(const std::string& path, const SeriesFrame& frame) {
    std::ofstream os(path);
    if (!os) throw DataError(path + ": cannot open for writing");
    os << "date";
    for (const auto& n : frame.channel_names) os << ',' << n;
    os << '\n';
    os.precision(12);
    for (i64 t = 0; t < frame.rows; ++t) {
        os << t;
        for (int c = 0; c < frame.channels; ++c) os << ',' << frame.at(t, c);
        os << '\n';
    }
}

} // namespace selm
