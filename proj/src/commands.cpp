#include "selm/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "selm/config.hpp"
#include "selm/evaluation.hpp"
#include "selm/forecast.hpp"
#include "selm/kernels.hpp"
#include "selm/training.hpp"

namespace selm {

namespace {

namespace fs = std::filesystem;

int guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

RunConfig load_config(const std::string& path) {
    return path.empty() ? RunConfig::defaults() : RunConfig::from_file(path);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error(path.string() + ": cannot open for writing");
    os << text;
}

struct PreparedData {
    SeriesSplits splits;
    std::vector<Window> train_windows;
    std::vector<Window> val_windows;
    i64 test_offset = 0; // absolute index of the first test row
};

PreparedData prepare(const RunConfig& cfg, const std::string& data_path) {
    PreparedData d;
    const SeriesFrame frame = load_series(data_path);
    const SplitCounts counts = cfg.split_counts(frame.rows);
    d.splits = split_series(frame, counts);
    const WindowSpec wspec = cfg.window_spec();
    const bool ci = cfg.get_bool("data.channel_independent");
    d.train_windows = make_windows(d.splits.train, wspec, ci);
    d.val_windows = make_windows(d.splits.val, wspec, ci);
    d.test_offset = counts.train + counts.val;
    if (d.train_windows.empty())
        throw DataError("training split yields no windows: need at least " +
                        std::to_string(wspec.context_length + wspec.horizon) + " rows, have " +
                        std::to_string(d.splits.train.rows));
    return d;
}

struct HorizonEval {
    MetricReport report;
    // per-row forecast records for the forecasts file
    struct Row {
        int channel;
        i64 t;
        Real y_true;
        Real y_pred;
    };
    std::vector<Row> rows;
};

HorizonEval evaluate_horizon(const SelmModel& model, const SeriesFrame& test_split,
                             const SeriesFrame& train_split, const RunConfig& cfg, int horizon,
                             i64 abs_offset) {
    if (horizon < 1) throw std::invalid_argument("evaluate: horizon must be >= 1");
    WindowSpec wspec = cfg.window_spec();
    wspec.horizon = horizon;
    const bool ci = cfg.get_bool("data.channel_independent");
    const int m = static_cast<int>(cfg.get_int("eval.seasonal_period"));
    const Real eps = static_cast<Real>(cfg.get_real("data.eps"));
    const auto windows = make_windows(test_split, wspec, ci);
    if (windows.empty())
        throw DataError("test split yields no windows for horizon " + std::to_string(horizon));

    HorizonEval ev;
    ev.report.horizon = horizon;
    ev.report.seasonal_period = m;

    double mse_sum = 0, mae_sum = 0, mape_sum = 0, smape_sum = 0, mase_sum = 0;
    double n2_smape_sum = 0, n2_mase_sum = 0;
    i64 mape_count = 0, mase_count = 0, n2_count = 0;

    const int l = wspec.context_length;
    const i64 batch_cap = 64;
    for (size_t begin = 0; begin < windows.size(); begin += batch_cap) {
        const i64 take = std::min<i64>(batch_cap, static_cast<i64>(windows.size() - begin));
        Tensor ctx({static_cast<int>(take), l});
        for (i64 r = 0; r < take; ++r)
            std::copy(windows[begin + static_cast<size_t>(r)].context.begin(),
                      windows[begin + static_cast<size_t>(r)].context.end(),
                      ctx.data.begin() + r * l);
        const Tensor pred = autoregressive_forecast(model, ctx, horizon, eps);

        for (i64 r = 0; r < take; ++r) {
            const Window& w = windows[begin + static_cast<size_t>(r)];
            std::vector<Real> yhat(pred.data.begin() + r * horizon,
                                   pred.data.begin() + (r + 1) * horizon);
            mse_sum += metric_mse(w.target, yhat);
            mae_sum += metric_mae(w.target, yhat);
            try {
                mape_sum += metric_mape(w.target, yhat);
                ++mape_count;
            } catch (const MetricError&) {
            }
            smape_sum += metric_smape(w.target, yhat);
            try {
                const auto insample = train_split.channel(w.channel);
                mase_sum += metric_mase(w.target, yhat, insample, m);
                ++mase_count;
            } catch (const MetricError&) {
            }
            try {
                const auto n2 = naive2_forecast(w.context, m, horizon);
                n2_smape_sum += metric_smape(w.target, n2);
                const auto insample = train_split.channel(w.channel);
                n2_mase_sum += metric_mase(w.target, n2, insample, m);
                ++n2_count;
            } catch (const MetricError&) {
            }
            for (int j = 0; j < horizon; ++j)
                ev.rows.push_back({w.channel, abs_offset + w.start + l + j,
                                   w.target[static_cast<size_t>(j)],
                                   yhat[static_cast<size_t>(j)]});
        }
    }

    const double nw = static_cast<double>(windows.size());
    ev.report.mse = mse_sum / nw;
    ev.report.mae = mae_sum / nw;
    ev.report.mape = mape_count ? mape_sum / static_cast<double>(mape_count)
                                : std::numeric_limits<double>::quiet_NaN();
    ev.report.smape = smape_sum / nw;
    ev.report.mase = mase_count ? mase_sum / static_cast<double>(mase_count)
                                : std::numeric_limits<double>::quiet_NaN();
    if (n2_count && mase_count) {
        const double n2_smape = n2_smape_sum / static_cast<double>(n2_count);
        const double n2_mase = n2_mase_sum / static_cast<double>(n2_count);
        ev.report.owa = (n2_smape > 0 && n2_mase > 0)
                            ? metric_owa(ev.report.smape, ev.report.mase, n2_smape, n2_mase)
                            : std::numeric_limits<double>::quiet_NaN();
    } else {
        ev.report.owa = std::numeric_limits<double>::quiet_NaN();
    }
    return ev;
}

void write_forecast_csv(const fs::path& path, const std::vector<HorizonEval::Row>& rows) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error(path.string() + ": cannot open for writing");
    os << "channel,t,y_true,y_pred\n";
    os.precision(12);
    for (const auto& r : rows)
        os << r.channel << ',' << r.t << ',' << r.y_true << ',' << r.y_pred << '\n';
}

// minimal per-channel line chart, enough for eyeballing a forecast
void write_forecast_svg(const fs::path& path, const std::vector<HorizonEval::Row>& rows,
                        int channel) {
    std::vector<double> yt, yp;
    for (const auto& r : rows) {
        if (r.channel != channel) continue;
        yt.push_back(static_cast<double>(r.y_true));
        yp.push_back(static_cast<double>(r.y_pred));
        if (yt.size() >= 512) break;
    }
    if (yt.empty()) return;
    double lo = yt[0], hi = yt[0];
    for (double v : yt) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (double v : yp) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi <= lo) hi = lo + 1;
    const double w = 800, h = 300;
    auto sx = [&](size_t i) { return w * static_cast<double>(i) / static_cast<double>(yt.size()); };
    auto sy = [&](double v) { return h - h * (v - lo) / (hi - lo); };
    std::ofstream os(path);
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
    for (int series = 0; series < 2; ++series) {
        const auto& ys = series == 0 ? yt : yp;
        os << "<polyline fill='none' stroke='" << (series == 0 ? "#222222" : "#d62728")
           << "' stroke-width='1' points='";
        for (size_t i = 0; i < ys.size(); ++i) os << sx(i) << ',' << sy(ys[i]) << ' ';
        os << "'/>\n";
    }
    os << "</svg>\n";
}

SelmModel model_from_checkpoint(const Checkpoint& ckpt, RunConfig& cfg_out) {
    cfg_out = RunConfig::from_text(ckpt.config_text, "<checkpoint config>");
    SelmModel model(cfg_out.model_config());
    model.load_state(ckpt);
    return model;
}

} // namespace

int cmd_train(const TrainArgs& args) {
    return guarded([&]() {
        RunConfig cfg = load_config(args.config_path);
        kernels::set_max_threads(cfg.threads());
        PreparedData data = prepare(cfg, args.data_path);

        SelmModel model(cfg.model_config());
        TrainReport report = fit(model, data.train_windows, data.val_windows, cfg.train_config());

        const fs::path out = args.out_dir;
        fs::create_directories(out);
        write_text(out / "config.resolved", cfg.resolved_text());
        write_text(out / "report.json", train_report_json(report));
        save_checkpoint((out / "checkpoint.selm").string(),
                        model.to_checkpoint(cfg.resolved_text()));
        std::cout << train_report_json(report) << '\n';
        return report.diverged ? kExitDivergence : kExitOk;
    });
}

int cmd_evaluate(const EvaluateArgs& args) {
    return guarded([&]() {
        const Checkpoint ckpt = load_checkpoint(args.checkpoint_path);
        RunConfig cfg = RunConfig::defaults();
        SelmModel model = model_from_checkpoint(ckpt, cfg);
        kernels::set_max_threads(cfg.threads());

        const SeriesFrame frame = load_series(args.data_path);
        const SplitCounts counts = cfg.split_counts(frame.rows);
        const SeriesSplits splits = split_series(frame, counts);

        std::vector<int> horizons = args.horizons;
        if (horizons.empty()) horizons.push_back(model.config().horizon);

        const fs::path out = args.out_dir;
        fs::create_directories(out);

        nlohmann::json all = nlohmann::json::array();
        std::ofstream csv(out / "metrics.csv");
        csv << metric_report_csv_header() << '\n';
        for (size_t i = 0; i < horizons.size(); ++i) {
            HorizonEval ev = evaluate_horizon(model, splits.test, splits.train, cfg, horizons[i],
                                              counts.train + counts.val);
            ev.report.dataset = fs::path(args.data_path).stem().string();
            all.push_back(nlohmann::json::parse(metric_report_json(ev.report)));
            csv << metric_report_csv_row(ev.report) << '\n';
            const std::string suffix = "_h" + std::to_string(horizons[i]);
            write_forecast_csv(out / ("forecasts" + suffix + ".csv"), ev.rows);
            if (i == 0) write_forecast_csv(out / "forecasts.csv", ev.rows);
            if (args.plot) {
                for (int c = 0; c < frame.channels; ++c)
                    write_forecast_svg(out / ("forecast" + suffix + "_ch" + std::to_string(c) +
                                              ".svg"),
                                       ev.rows, c);
            }
        }
        write_text(out / "metrics.json", all.dump(2));
        std::cout << all.dump(2) << '\n';
        return kExitOk;
    });
}

int cmd_ablate(const AblateArgs& args) {
    return guarded([&]() {
        RunConfig base = load_config(args.config_path);
        kernels::set_max_threads(base.threads());

        struct Variant {
            const char* name;
            const char* tscc;
            const char* adapter;
        };
        const Variant variants[] = {
            {"baseline", "false", "false"},
            {"tscc", "true", "false"},
            {"tscc_adapter", "true", "true"},
        };
        std::vector<int> horizons = args.horizons;
        if (horizons.empty())
            horizons.push_back(static_cast<int>(base.get_int("data.horizon")));

        const fs::path out = args.out_dir;
        fs::create_directories(out);

        nlohmann::json table = nlohmann::json::array();
        std::vector<std::uint64_t> batch_hashes;
        std::ofstream csv(out / "ablation.csv");
        csv << "configuration,horizon,mse,mae\n";
        csv.precision(10);
        for (const auto& v : variants) {
            RunConfig cfg = base;
            cfg.set("tscc.enabled", v.tscc);
            cfg.set("adapter.enabled", v.adapter);
            PreparedData data = prepare(cfg, args.data_path);

            SelmModel model(cfg.model_config());
            TrainReport report =
                fit(model, data.train_windows, data.val_windows, cfg.train_config());
            if (report.diverged) return kExitDivergence;
            batch_hashes.push_back(report.batch_hash);

            nlohmann::json row;
            row["configuration"] = v.name;
            row["batch_hash"] = report.batch_hash;
            row["trainable_parameters"] = report.trainable_count;
            nlohmann::json per_horizon = nlohmann::json::array();
            for (int horizon : horizons) {
                HorizonEval ev =
                    evaluate_horizon(model, data.splits.test, data.splits.train, cfg, horizon,
                                     data.test_offset);
                nlohmann::json hj;
                hj["horizon"] = horizon;
                hj["mse"] = ev.report.mse;
                hj["mae"] = ev.report.mae;
                per_horizon.push_back(hj);
                csv << v.name << ',' << horizon << ',' << ev.report.mse << ',' << ev.report.mae
                    << '\n';
            }
            row["metrics"] = per_horizon;
            table.push_back(row);
        }

        const bool batches_match = std::all_of(
            batch_hashes.begin(), batch_hashes.end(),
            [&](std::uint64_t h) { return h == batch_hashes.front(); });
        nlohmann::json result;
        result["rows"] = table;
        result["shared_batches"] = batches_match;
        write_text(out / "ablation.json", result.dump(2));
        std::cout << result.dump(2) << '\n';
        if (!batches_match) {
            std::cerr << "ablate: batch streams diverged between configurations\n";
            return kExitFailure;
        }
        return kExitOk;
    });
}

int cmd_gradcheck(const GradcheckArgs& args) {
    return guarded([&]() {
        RunConfig cfg = load_config(args.config_path);
        // tiny caps keep the finite-difference sweep under a minute
        ModelConfig mc = cfg.model_config();
        mc.context_length = 32;
        mc.segment_length = 8; // N = 4
        mc.horizon = 8;
        mc.d_model = 16;
        mc.d_llm = 16;
        mc.encoder_hidden = 0;
        mc.vocab_size = 32;
        mc.vocab_width = 0;
        mc.prototypes = 8;
        mc.layers = 1;
        mc.heads = 2;
        mc.tscc_heads = 2;
        mc.ffn_width = 32;
        mc.max_positions = 8;
        mc.vae_hidden = 8;
        mc.vae_latent = 4;
        mc.adapter_rank = 4;
        mc.adapter_hidden = 8;
        mc.decoder_hidden = 16;
        mc.embedding_path.clear();
        SelmModel model(mc);

        RngState rng(mc.seed + 1);
        // nudge the zero-initialized up-projections so gradients actually
        // flow through the recurrent paths being audited, strongly enough to
        // keep those coordinates clear of the small-gradient floor
        for (auto& layer : model.backbone.layers)
            if (layer.adapter) fill_normal(*layer.adapter->up_w, rng, 0.0, 0.3);

        Tensor ctx({2, mc.context_length});
        fill_normal(ctx, rng, 0.0, 1.0);
        Tensor target({2, mc.horizon});
        fill_normal(target, rng, 0.0, 0.5);
        Tensor eps_noise({2, mc.segments(), mc.vae_latent});
        fill_normal(eps_noise, rng, 0.0, 1.0);
        auto target_leaf = Tensor::leaf(target, false);

        auto params = model.parameters();
        ParamList trainable = partition_parameters(params).trainable;
        std::vector<TensorPtr> tensors;
        std::vector<std::string> names;
        for (const auto& p : trainable) {
            tensors.push_back(p.tensor);
            names.push_back(p.name);
        }
        auto loss = [&]() {
            auto outp = model.forward(ctx, NoiseSpec::fixed(eps_noise));
            return forecast_loss(outp.prediction, target_leaf, outp.mu, outp.logvar, Real(0));
        };
        // step at the top of the allowed range keeps rounding noise below
        // tol * the small-gradient floor
        const GradCheckReport rep = gradient_check_params(loss, tensors, names, 1e-4, 1e-4);

        nlohmann::json j;
        j["pass"] = rep.pass;
        j["max_rel_err"] = rep.max_rel_err;
        j["worst_param"] = rep.worst_param;
        j["worst_index"] = rep.worst_index;
        j["worst_analytic"] = rep.worst_analytic;
        j["worst_numeric"] = rep.worst_numeric;
        j["checked_parameters"] = names.size();
        std::cout << j.dump(2) << '\n';
        if (!rep.pass) {
            std::cerr << "gradcheck: mismatch at parameter '" << rep.worst_param << "' index "
                      << rep.worst_index << " (rel err " << rep.max_rel_err << ")\n";
            return kExitGradient;
        }
        return kExitOk;
    });
}

int cmd_export_embeddings(const ExportArgs& args) {
    return guarded([&]() {
        const Checkpoint ckpt = load_checkpoint(args.checkpoint_path);
        RunConfig cfg = RunConfig::defaults();
        SelmModel model = model_from_checkpoint(ckpt, cfg);
        kernels::set_max_threads(cfg.threads());

        const SeriesFrame frame = load_series(args.data_path);
        const WindowSpec wspec = cfg.window_spec();
        auto windows = make_windows(frame, wspec, cfg.get_bool("data.channel_independent"));
        if (windows.empty()) throw DataError("export-embeddings: no windows in the input data");
        const i64 take = std::min<i64>(32, static_cast<i64>(windows.size()));
        std::vector<i64> order(windows.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<i64>(i);
        Batch batch = assemble_batch(windows, order, 0, take,
                                     static_cast<Real>(cfg.get_real("data.eps")));

        NoGradGuard ng;
        auto outp = model.forward(batch.context, NoiseSpec::deterministic());

        const fs::path out = args.out_dir;
        fs::create_directories(out);
        auto flatten_rows = [](const TensorPtr& t) {
            // [B, N, D] -> [B*N, D] without copying semantics changes
            Tensor flat({t->extent(0) * t->extent(1), t->extent(2)}, t->data);
            return flat;
        };
        write_matrix((out / "ga.selm").string(), flatten_rows(outp.ga));
        if (outp.gc) write_matrix((out / "gc.selm").string(), flatten_rows(outp.gc));
        if (outp.corr) write_matrix((out / "corr.selm").string(), flatten_rows(outp.corr));
        write_matrix((out / "prototypes.selm").string(), *outp.prototypes_l2);

        nlohmann::json j;
        j["rows"] = outp.ga->extent(0) * outp.ga->extent(1);
        j["files"] = {"ga.selm", "gc.selm", "corr.selm", "prototypes.selm"};
        std::cout << j.dump(2) << '\n';
        return kExitOk;
    });
}

} // namespace selm
