// Command-line surface: import, train, evaluate, sweep.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pedcast/experiments.hpp"

namespace fs = std::filesystem;
using namespace pedcast;

namespace {

// Exit codes: 0 ok, 2 usage, 3 data, 4 numeric, 5 io.
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitIo = 5;

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= csv.size()) {
        const auto comma = csv.find(',', start);
        const auto end = comma == std::string::npos ? csv.size() : comma;
        if (end > start) out.push_back(csv.substr(start, end - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

struct ModelWidths {
    std::size_t encoder_units = 64;
    std::size_t decoder_units = 64;
    std::size_t filters1 = 128;
    std::size_t filters2 = 64;
    std::size_t filters3 = 64;
    std::size_t lstm_units = 64;
    std::size_t kernel = 5;
    std::size_t pool = 2;
};

std::unique_ptr<ModelGraph> build_model(const std::string& arch, std::size_t T, std::size_t F,
                                        double p, std::uint64_t seed, const ModelWidths& w) {
    switch (architecture_from_string(arch)) {
        case ArchitectureId::LstmEd:
            return build_lstm_ed(T, F, p, seed, {w.encoder_units, w.decoder_units});
        case ArchitectureId::Cnn1d:
            return build_cnn1d(T, F, p, seed, {w.filters1, w.filters2, w.filters3, w.kernel, w.pool});
        case ArchitectureId::CnnLstm:
            return build_cnn_lstm(T, F, p, seed, {w.filters1, w.filters2, w.lstm_units, w.kernel});
    }
    throw ParameterError("unknown architecture: " + arch);
}

int cmd_import(const std::string& src, const std::string& format, const std::string& out,
               const ImportOptions& opt) {
    ImportSummary summary;
    PreparedDataset ds =
        prepare_dataset(src, annotation_format_from_string(format), opt, &summary);
    if (const auto parent = fs::path(out).parent_path(); !parent.empty()) {
        fs::create_directories(parent);
    }
    save_dataset(ds, out);
    std::printf("imported %s\n", src.c_str());
    std::printf("  tracks:        %zu (%zu too short for a window)\n", summary.track_count,
                summary.skipped_tracks);
    std::printf("  sequences:     %zu (T=%zu, F=%zu, dt=%g)\n", summary.sequence_count,
                opt.history_len, opt.horizon, opt.dt);
    std::printf("  train/test:    %zu/%zu\n", summary.train_count, summary.test_count);
    std::printf("  cache:         %s\n", out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pedestrian trajectory forecasting with MC-dropout uncertainty"};
    app.require_subcommand(1);

    // ---- import ----
    std::string im_src, im_format = "tsv", im_out;
    ImportOptions im_opt;
    auto* import_cmd = app.add_subcommand("import", "prepare a dataset cache from annotations");
    import_cmd->add_option("--src", im_src, "annotation file")->required();
    import_cmd->add_option("--format", im_format, "obsmat or tsv");
    import_cmd->add_option("--out", im_out, "cache file to write")->required();
    import_cmd->add_option("--history-steps", im_opt.history_len, "history steps T");
    import_cmd->add_option("--horizon-steps", im_opt.horizon, "future steps F");
    import_cmd->add_option("--dt", im_opt.dt, "seconds per step");
    import_cmd->add_option("--train-fraction", im_opt.train_fraction, "train split fraction");
    import_cmd->add_option("--seed", im_opt.seed, "split seed");
    import_cmd->set_config("--config");

    // ---- train ----
    std::string tr_cache, tr_arch, tr_out = ".";
    double tr_p = 0.2;
    TrainConfig tr_cfg;
    ModelWidths tr_widths;
    std::uint64_t tr_seed = 0;
    auto* train_cmd = app.add_subcommand("train", "train one architecture on a cache");
    train_cmd->add_option("--cache", tr_cache, "dataset cache")->required();
    train_cmd->add_option("--arch", tr_arch, "lstm_ed, cnn1d or cnn_lstm")->required();
    train_cmd->add_option("--p", tr_p, "dropout probability");
    train_cmd->add_option("--epochs", tr_cfg.epochs, "training epochs");
    train_cmd->add_option("--batch", tr_cfg.batch_size, "mini-batch size");
    train_cmd->add_option("--lr", tr_cfg.learning_rate, "Adam learning rate");
    train_cmd->add_option("--val-fraction", tr_cfg.validation_fraction, "validation fraction");
    train_cmd->add_option("--patience", tr_cfg.early_stop_patience, "early-stop patience");
    train_cmd->add_option("--lr-patience", tr_cfg.lr_reduce_patience, "plateau patience");
    train_cmd->add_option("--lr-factor", tr_cfg.lr_reduce_factor, "plateau reduction factor");
    train_cmd->add_option("--min-lr", tr_cfg.min_lr, "learning-rate floor");
    train_cmd->add_option("--seed", tr_seed, "seed for init, shuffling and dropout");
    train_cmd->add_option("--out", tr_out, "output directory");
    train_cmd->add_option("--encoder-units", tr_widths.encoder_units, "lstm_ed encoder width");
    train_cmd->add_option("--decoder-units", tr_widths.decoder_units, "lstm_ed decoder width");
    train_cmd->add_option("--filters1", tr_widths.filters1, "first conv filter count");
    train_cmd->add_option("--filters2", tr_widths.filters2, "second conv filter count");
    train_cmd->add_option("--filters3", tr_widths.filters3, "third conv filter count (cnn1d)");
    train_cmd->add_option("--lstm-units", tr_widths.lstm_units, "cnn_lstm decoder width");
    train_cmd->add_option("--kernel", tr_widths.kernel, "conv kernel width");
    train_cmd->add_option("--pool", tr_widths.pool, "cnn1d pool factor");
    train_cmd->set_config("--config");

    // ---- evaluate ----
    std::string ev_ckpt, ev_cache, ev_mode = "deterministic", ev_out = ".";
    EvaluateOptions ev_opt;
    bool ev_dump = true;
    auto* eval_cmd = app.add_subcommand("evaluate", "score a checkpoint on the test split");
    eval_cmd->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
    eval_cmd->add_option("--cache", ev_cache, "dataset cache")->required();
    eval_cmd->add_option("--mode", ev_mode, "deterministic or mc");
    eval_cmd->add_option("--N", ev_opt.passes, "MC passes");
    eval_cmd->add_option("--p", ev_opt.p, "inference dropout probability");
    eval_cmd->add_option("--seed", ev_opt.seed, "MC mask seed");
    eval_cmd->add_option("--out", ev_out, "output directory");
    eval_cmd->add_flag("--distributions,!--no-distributions", ev_dump,
                       "write per-trajectory distribution CSVs (mc mode)");
    eval_cmd->set_config("--config");

    // ---- sweep ----
    std::string sw_cache, sw_dir, sw_models = "lstm_ed,cnn1d,cnn_lstm", sw_out = ".";
    std::string sw_p_list = "0.2,0.3,0.4,0.5", sw_horizons = "12";
    SweepSpec sw_spec;
    auto* sweep_cmd = app.add_subcommand("sweep", "grid evaluation over models, p and horizons");
    sweep_cmd->add_option("--cache", sw_cache, "dataset cache")->required();
    sweep_cmd->add_option("--checkpoint-dir", sw_dir, "directory of trained checkpoints")
        ->required();
    sweep_cmd->add_option("--models", sw_models, "comma-separated architecture list");
    sweep_cmd->add_option("--p-list", sw_p_list, "comma-separated dropout probabilities");
    sweep_cmd->add_option("--horizons", sw_horizons, "comma-separated horizon step counts");
    sweep_cmd->add_option("--N", sw_spec.passes, "MC passes per cell");
    sweep_cmd->add_option("--train-p", sw_spec.train_p, "p in the checkpoint names");
    sweep_cmd->add_option("--train-seed", sw_spec.train_seed, "seed in the checkpoint names");
    sweep_cmd->add_option("--seed", sw_spec.seed, "MC mask seed");
    sweep_cmd->add_option("--out", sw_out, "output directory");
    sweep_cmd->set_config("--config");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*import_cmd) {
            return cmd_import(im_src, im_format, im_out, im_opt);
        }

        if (*train_cmd) {
            PreparedDataset ds = load_dataset(tr_cache);
            auto graph = build_model(tr_arch, ds.history_len, ds.horizon, tr_p, tr_seed, tr_widths);
            tr_cfg.seed = tr_seed;
            TrainLog log = train(*graph, ds.train, ds.stats, tr_cfg);
            fs::create_directories(tr_out);
            const std::string name =
                checkpoint_name(tr_arch, ds.history_len, ds.horizon, tr_p, tr_seed);
            const auto ckpt_path = fs::path(tr_out) / name;
            save_checkpoint(*graph, ds.stats, ds.dt, tr_seed, tr_cfg.adam, ckpt_path.string());
            const auto log_path =
                fs::path(tr_out) / (fs::path(name).stem().string() + "_trainlog.csv");
            write_train_log_csv(log, log_path.string());
            std::printf("trained %s: %zu epochs%s, best epoch %zu", tr_arch.c_str(),
                        log.epochs.size(), log.stopped_early ? " (early stop)" : "",
                        log.best_epoch);
            if (!log.epochs.empty()) {
                std::printf(", val MSE %.6g", log.epochs[log.best_epoch - 1].val_mse);
            }
            std::printf("\n  checkpoint: %s\n  train log:  %s\n", ckpt_path.c_str(),
                        log_path.c_str());
            return 0;
        }

        if (*eval_cmd) {
            if (ev_mode != "deterministic" && ev_mode != "mc") {
                throw ParameterError("mode must be deterministic or mc, got '" + ev_mode + "'");
            }
            ev_opt.mc = ev_mode == "mc";
            PreparedDataset ds = load_dataset(ev_cache);
            Checkpoint ckpt = load_checkpoint(ev_ckpt);
            const bool dump = ev_dump && ev_opt.mc;
            EvaluateResult res =
                evaluate_dataset(*ckpt.graph, ckpt.stats, ds.test, ds.dt, ev_opt, dump);
            fs::create_directories(ev_out);
            const auto report_path = fs::path(ev_out) / "report.csv";
            write_report_csv({res.report}, report_path.string());
            if (dump) {
                const auto dist_dir = fs::path(ev_out) / "distributions";
                fs::create_directories(dist_dir);
                char buf[64];
                for (std::size_t i = 0; i < res.distributions.size(); ++i) {
                    std::snprintf(buf, sizeof(buf), "traj_%04zu.csv", i);
                    write_distribution_csv(res.distributions[i], (dist_dir / buf).string());
                    std::snprintf(buf, sizeof(buf), "traj_%04zu_samples.csv", i);
                    write_raw_samples_csv(res.distributions[i], (dist_dir / buf).string());
                }
            }
            std::printf("%s %s: ADE %.4f m, FDE %.4f m", res.report.model.c_str(),
                        ev_mode.c_str(), res.report.ade, res.report.fde);
            if (ev_opt.mc) {
                std::printf(", CS_x %.1f%%, CS_y %.1f%%, mean sigma (%.3f, %.3f) m",
                            res.report.cs_x, res.report.cs_y, res.mean_sigma_x, res.mean_sigma_y);
            }
            std::printf(" over %zu trajectories\n  report: %s\n", res.report.trajectory_count,
                        report_path.c_str());
            return 0;
        }

        if (*sweep_cmd) {
            PreparedDataset ds = load_dataset(sw_cache);
            sw_spec.models = split_list(sw_models);
            sw_spec.p_list.clear();
            for (const auto& tok : split_list(sw_p_list)) sw_spec.p_list.push_back(std::stod(tok));
            sw_spec.horizons.clear();
            for (const auto& tok : split_list(sw_horizons)) {
                sw_spec.horizons.push_back(static_cast<std::size_t>(std::stoul(tok)));
            }
            auto reports = run_sweep(sw_dir, ds, sw_spec);
            fs::create_directories(sw_out);
            const auto path = fs::path(sw_out) / "sweep.csv";
            write_report_csv(reports, path.string());
            std::printf("sweep: %zu cells (%zu models x %zu p x %zu horizons)\n  grid: %s\n",
                        reports.size(), sw_spec.models.size(), sw_spec.p_list.size(),
                        sw_spec.horizons.size(), path.c_str());
            return 0;
        }
    } catch (const ParameterError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const DimensionError& e) {
        std::fprintf(stderr, "dimension error: %s\n", e.what());
        return kExitData;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return kExitNumeric;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
