#pragma once

#include <string>
#include <vector>

#include "pedcast/uncertainty.hpp"

namespace pedcast {

/// Flat [F][2] (x, y) path in meters.
using PlanarPath = std::vector<double>;

PlanarPath path_from_features(const Tensor& steps_by_features);  // takes columns {x, y}

/// Mean Euclidean distance over all steps.
double ade(const PlanarPath& predicted, const PlanarPath& truth);

/// Euclidean distance at the final step only.
double fde(const PlanarPath& predicted, const PlanarPath& truth);

struct ConfidencePair {
    double cs_x = 0.0;  // percent
    double cs_y = 0.0;
};

/// Percentage of steps whose ground truth lies strictly within 2 sigma of the
/// per-axis predicted mean. Requires fitted per-step Gaussians.
ConfidencePair confidence_score(const TrajectoryDistribution& dist, const PlanarPath& truth);

/// ADE/FDE/CS for a test set, aggregated for one (model, p, horizon) cell.
struct EvaluationReport {
    std::string model;
    double p = 0.0;
    double horizon_seconds = 0.0;
    double ade = 0.0;
    double fde = 0.0;
    double cs_x = 0.0;
    double cs_y = 0.0;
    std::size_t trajectory_count = 0;
    std::size_t mc_passes = 0;
};

struct TrajectoryMetrics {
    double ade = 0.0;
    double fde = 0.0;
    double cs_x = 0.0;
    double cs_y = 0.0;
};

/// Unweighted means over trajectories.
EvaluationReport aggregate(const std::vector<TrajectoryMetrics>& per_trajectory,
                           const std::string& model, double p, double horizon_seconds,
                           std::size_t mc_passes);

/// model,p,horizon_s,ade,fde,cs_x,cs_y,n_traj,n_mc
void write_report_csv(const std::vector<EvaluationReport>& reports, const std::string& path);

}  // namespace pedcast
