#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pedcast/data.hpp"
#include "pedcast/model.hpp"

namespace pedcast {

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    double validation_fraction = 0.10;
    std::size_t early_stop_patience = 15;
    double lr_reduce_factor = 0.5;
    std::size_t lr_reduce_patience = 5;
    double min_lr = 1e-5;
    std::uint64_t seed = 0;
    AdamConfig adam;

    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_mse = 0.0;
    double val_mse = 0.0;
    double learning_rate = 0.0;
    double seconds = 0.0;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;  // 1-based; 0 when no epoch ran
    bool stopped_early = false;
};

/// Improvement threshold shared by early stopping and LR reduction.
inline constexpr double kImprovementDelta = 1e-6;

struct EarlyStopDecision {
    bool stop = false;
    std::size_t best_epoch = 0;  // 1-based index into the history
};

/// Scans the validation-MSE history; stop once `patience` consecutive epochs
/// fail to improve on the best seen by at least kImprovementDelta.
EarlyStopDecision early_stopping(const std::vector<double>& val_history, std::size_t patience);

/// Replays the plateau rule over the whole history and returns the learning
/// rate in force after the last epoch. The plateau counter resets on each
/// reduction.
double reduce_lr_on_plateau(const std::vector<double>& val_history, double initial_lr,
                            std::size_t patience, double factor, double min_lr);

/// Mini-batch MSE training with seeded shuffling, validation monitoring,
/// early stopping, plateau LR reduction and best-weights restoration.
/// Samples are normalized internally using `stats`.
TrainLog train(ModelGraph& graph, const std::vector<TrajectorySample>& samples,
               const NormalizationStats& stats, const TrainConfig& config);

void write_train_log_csv(const TrainLog& log, const std::string& path);

struct Checkpoint {
    std::unique_ptr<ModelGraph> graph;
    NormalizationStats stats;
    double dt = kDefaultStepSeconds;
    std::uint64_t init_seed = 0;
    AdamConfig adam;
};

void save_checkpoint(ModelGraph& graph, const NormalizationStats& stats, double dt,
                     std::uint64_t init_seed, const AdamConfig& adam, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace pedcast
