#include "pedcast/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

namespace pedcast {

PreparedDataset prepare_dataset(const std::string& src, AnnotationFormat format,
                                const ImportOptions& opt, ImportSummary* summary) {
    const auto tracks = parse_annotations(src, format);

    std::vector<TrajectorySample> samples;
    std::size_t skipped = 0;
    for (const auto& track : tracks) {
        auto windows = sliding_window_augment(track, opt.dt, opt.history_len, opt.horizon);
        if (windows.empty()) {
            ++skipped;
            continue;
        }
        for (auto& w : windows) {
            samples.push_back(std::move(w));
        }
    }
    if (samples.empty()) {
        throw DataError(src + ": no track is long enough for a " +
                        std::to_string(opt.history_len + opt.horizon) + "-step window");
    }

    DatasetSplit split = split_dataset(samples, opt.train_fraction, opt.seed);
    if (split.train.empty() || split.test.empty()) {
        throw DataError(src + ": split produced an empty side (train " +
                        std::to_string(split.train.size()) + ", test " +
                        std::to_string(split.test.size()) + ")");
    }

    PreparedDataset ds;
    ds.history_len = opt.history_len;
    ds.horizon = opt.horizon;
    ds.dt = opt.dt;
    ds.stats = fit_normalizer(split.train);
    ds.train = std::move(split.train);
    ds.test = std::move(split.test);

    if (summary) {
        summary->track_count = tracks.size();
        summary->sequence_count = samples.size();
        summary->train_count = ds.train.size();
        summary->test_count = ds.test.size();
        summary->skipped_tracks = skipped;
    }
    return ds;
}

EvaluateResult evaluate_dataset(ModelGraph& graph, const NormalizationStats& stats,
                                const std::vector<TrajectorySample>& test, double dt,
                                const EvaluateOptions& opt, bool keep_distributions) {
    if (test.empty()) throw DataError("evaluate: empty test set");
    const std::size_t horizon = graph.horizon();

    EvaluateResult result;
    std::vector<TrajectoryMetrics> per_traj;
    per_traj.reserve(test.size());

    Rng traj_seeds(opt.seed);
    double sigma_x_acc = 0.0, sigma_y_acc = 0.0;
    std::size_t sigma_count = 0;

    for (const auto& sample : test) {
        if (sample.future.dim(0) < horizon) {
            throw DataError("evaluate: sample future has " +
                            std::to_string(sample.future.dim(0)) + " steps, model needs " +
                            std::to_string(horizon));
        }
        PlanarPath truth(horizon * 2);
        for (std::size_t t = 0; t < horizon; ++t) {
            truth[2 * t] = sample.future(t, 0);
            truth[2 * t + 1] = sample.future(t, 1);
        }
        const Tensor history = normalize(sample.history, stats);

        TrajectoryMetrics m;
        if (!opt.mc) {
            Tensor batched = history.reshaped({1, history.dim(0), history.dim(1)});
            Tensor pred = denormalize(graph.predict(batched, ForwardMode::deterministic()), stats);
            PlanarPath path(horizon * 2);
            for (std::size_t t = 0; t < horizon; ++t) {
                path[2 * t] = pred(0, t, 0);
                path[2 * t + 1] = pred(0, t, 1);
            }
            m.ade = ade(path, truth);
            m.fde = fde(path, truth);
        } else {
            const std::uint64_t traj_seed = traj_seeds.next_u64();
            TrajectoryDistribution dist =
                mc_sample(graph, history, opt.passes, opt.p, traj_seed, stats);
            fit_distribution_gaussians(dist);
            PlanarPath mean_path(horizon * 2);
            for (std::size_t t = 0; t < horizon; ++t) {
                mean_path[2 * t] = dist.per_step[t].mu_x;
                mean_path[2 * t + 1] = dist.per_step[t].mu_y;
                sigma_x_acc += dist.per_step[t].sigma_x;
                sigma_y_acc += dist.per_step[t].sigma_y;
                ++sigma_count;
            }
            m.ade = ade(mean_path, truth);
            m.fde = fde(mean_path, truth);
            const ConfidencePair cs = confidence_score(dist, truth);
            m.cs_x = cs.cs_x;
            m.cs_y = cs.cs_y;
            if (keep_distributions) {
                result.distributions.push_back(std::move(dist));
            }
        }
        per_traj.push_back(m);
    }

    result.report = aggregate(per_traj, to_string(graph.architecture()), opt.mc ? opt.p : 0.0,
                              static_cast<double>(horizon) * dt, opt.mc ? opt.passes : 0);
    if (sigma_count > 0) {
        result.mean_sigma_x = sigma_x_acc / static_cast<double>(sigma_count);
        result.mean_sigma_y = sigma_y_acc / static_cast<double>(sigma_count);
    }
    return result;
}

std::string checkpoint_name(const std::string& arch, std::size_t history_len, std::size_t horizon,
                            double p, std::uint64_t seed) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s_T%zu_F%zu_p%g_s%llu.ckpt", arch.c_str(), history_len,
                  horizon, p, static_cast<unsigned long long>(seed));
    return buf;
}

std::vector<EvaluationReport> run_sweep(const std::string& checkpoint_dir,
                                        const PreparedDataset& dataset, const SweepSpec& spec) {
    if (spec.models.empty() || spec.p_list.empty() || spec.horizons.empty()) {
        throw ParameterError("sweep needs non-empty model, p and horizon lists");
    }
    namespace fs = std::filesystem;

    // Every (model, horizon) needs its own checkpoint; fail up front listing gaps.
    std::vector<std::string> missing;
    for (const auto& model : spec.models) {
        for (std::size_t horizon : spec.horizons) {
            const auto name = checkpoint_name(model, dataset.history_len, horizon, spec.train_p,
                                              spec.train_seed);
            if (!fs::exists(fs::path(checkpoint_dir) / name)) {
                missing.push_back(name);
            }
        }
    }
    if (!missing.empty()) {
        std::string msg = "sweep: missing checkpoints in " + checkpoint_dir + ":";
        for (const auto& name : missing) msg += "\n  " + name;
        throw IoError(msg);
    }

    std::vector<EvaluationReport> reports;
    for (const auto& model : spec.models) {
        for (double p : spec.p_list) {
            for (std::size_t horizon : spec.horizons) {
                if (horizon > dataset.horizon) {
                    throw ParameterError("sweep: horizon " + std::to_string(horizon) +
                                         " exceeds the cache horizon " +
                                         std::to_string(dataset.horizon));
                }
                const auto name = checkpoint_name(model, dataset.history_len, horizon,
                                                  spec.train_p, spec.train_seed);
                Checkpoint ckpt =
                    load_checkpoint((fs::path(checkpoint_dir) / name).string());
                EvaluateOptions eval;
                eval.mc = true;
                eval.passes = spec.passes;
                eval.p = p;
                eval.seed = spec.seed;
                EvaluateResult res = evaluate_dataset(*ckpt.graph, ckpt.stats, dataset.test,
                                                      dataset.dt, eval);
                reports.push_back(res.report);
            }
        }
    }
    return reports;
}

}  // namespace pedcast
