#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pedcast/metrics.hpp"
#include "pedcast/train.hpp"

namespace pedcast {

struct ImportOptions {
    std::size_t history_len = 8;
    std::size_t horizon = 12;
    double dt = kDefaultStepSeconds;
    double train_fraction = 0.79;
    std::uint64_t seed = 0;
};

struct ImportSummary {
    std::size_t track_count = 0;
    std::size_t sequence_count = 0;
    std::size_t train_count = 0;
    std::size_t test_count = 0;
    std::size_t skipped_tracks = 0;  // shorter than one window
};

/// parse -> velocities -> windows -> split -> normalize.
PreparedDataset prepare_dataset(const std::string& src, AnnotationFormat format,
                                const ImportOptions& opt, ImportSummary* summary = nullptr);

struct EvaluateOptions {
    bool mc = false;
    std::size_t passes = 30;
    double p = 0.2;
    std::uint64_t seed = 0;
};

struct EvaluateResult {
    EvaluationReport report;
    double mean_sigma_x = 0.0;  // mc only; averaged over steps and trajectories
    double mean_sigma_y = 0.0;
    std::vector<TrajectoryDistribution> distributions;  // mc only, per trajectory
};

/// Scores a model on a test set. Probabilistic models are scored on the mean
/// path of the MC distribution. Futures longer than the model's horizon are
/// truncated; shorter ones are an error.
EvaluateResult evaluate_dataset(ModelGraph& graph, const NormalizationStats& stats,
                                const std::vector<TrajectorySample>& test, double dt,
                                const EvaluateOptions& opt, bool keep_distributions = false);

std::string checkpoint_name(const std::string& arch, std::size_t history_len, std::size_t horizon,
                            double p, std::uint64_t seed);

struct SweepSpec {
    std::vector<std::string> models;
    std::vector<double> p_list;
    std::vector<std::size_t> horizons;  // in steps (F)
    std::size_t passes = 30;
    std::uint64_t seed = 0;
    double train_p = 0.2;            // p the swept checkpoints were trained with
    std::uint64_t train_seed = 0;    // seed in the checkpoint file names
};

/// One report row per (model, p, horizon) cell, evaluated with MC dropout.
/// Missing checkpoints abort up front with the full list of gaps.
std::vector<EvaluationReport> run_sweep(const std::string& checkpoint_dir,
                                        const PreparedDataset& dataset, const SweepSpec& spec);

}  // namespace pedcast
