#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pedcast/tensor.hpp"

namespace pedcast {

inline constexpr double kDefaultStepSeconds = 0.4;  // 8 steps = 3.2 s

struct TrackPoint {
    long long frame = 0;
    double x = 0.0;
    double y = 0.0;
};

struct RawTrack {
    long long pedestrian_id = 0;
    std::vector<TrackPoint> samples;  // frame-sorted, strictly increasing
};

/// One (history, future) pair; features per step are {x, y, u, v} in meters
/// and m/s, stored row-major.
struct TrajectorySample {
    long long source_id = 0;
    std::uint32_t window_index = 0;
    Tensor history;  // [T, 4]
    Tensor future;   // [F, 4]
};

struct NormalizationStats {
    double mean[4] = {0, 0, 0, 0};
    double stddev[4] = {1, 1, 1, 1};
};

enum class AnnotationFormat { Obsmat, Tsv };

AnnotationFormat annotation_format_from_string(const std::string& s);

/// Reads obsmat (8 whitespace columns: frame id x _ y ...) or tsv
/// (frame<TAB>id<TAB>x<TAB>y, '#' comments). Tracks are grouped by id and
/// frame-sorted; a change in frame spacing starts a new track segment.
std::vector<RawTrack> parse_annotations(const std::string& path, AnnotationFormat format);

/// Per-step {x, y, u, v} with backward-difference velocities; the first step
/// copies the second's velocity. Throws DataError for tracks shorter than 2.
Tensor derive_velocities(const RawTrack& track, double dt);

std::vector<TrajectorySample> sliding_window_augment(const RawTrack& track, double dt,
                                                     std::size_t history_len, std::size_t horizon,
                                                     std::size_t stride = 1);

struct DatasetSplit {
    std::vector<TrajectorySample> train;
    std::vector<TrajectorySample> test;
};

/// Track-granular split: every window of one pedestrian lands on one side.
DatasetSplit split_dataset(const std::vector<TrajectorySample>& samples, double train_fraction,
                           std::uint64_t seed);

NormalizationStats fit_normalizer(const std::vector<TrajectorySample>& train);

/// Z-score per feature; constant features pass through unscaled.
Tensor normalize(const Tensor& features, const NormalizationStats& stats);
Tensor denormalize(const Tensor& features, const NormalizationStats& stats);

/// Prepared-dataset cache: everything the train/evaluate commands need,
/// versioned and byte-stable under a fixed seed.
struct PreparedDataset {
    std::size_t history_len = 8;
    std::size_t horizon = 12;
    double dt = kDefaultStepSeconds;
    NormalizationStats stats;
    std::vector<TrajectorySample> train;
    std::vector<TrajectorySample> test;
};

void save_dataset(const PreparedDataset& ds, const std::string& path);
PreparedDataset load_dataset(const std::string& path);

/// Synthetic corpus of smoothly turning constant-speed walkers; used by the
/// convergence and reproducibility tests and by desk-scale experiments.
struct SyntheticCorpusConfig {
    std::size_t track_count = 200;
    std::size_t track_length = 30;
    double dt = kDefaultStepSeconds;
    double speed_min = 0.5;       // m/s
    double speed_max = 2.0;       // m/s
    double turn_rate_std = 0.05;  // rad per step heading drift
    double position_noise = 0.0;  // m, additive per-step jitter
};

std::vector<RawTrack> synthetic_tracks(const SyntheticCorpusConfig& cfg, std::uint64_t seed);

/// Writes tracks in tsv annotation format (round-trips through
/// parse_annotations).
void write_tracks_tsv(const std::vector<RawTrack>& tracks, const std::string& path);

}  // namespace pedcast
