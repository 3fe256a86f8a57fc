#include "pedcast/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace pedcast {

PlanarPath path_from_features(const Tensor& steps_by_features) {
    require_rank(steps_by_features, 2, "path");
    PlanarPath path(steps_by_features.dim(0) * 2);
    for (std::size_t t = 0; t < steps_by_features.dim(0); ++t) {
        path[2 * t] = steps_by_features(t, 0);
        path[2 * t + 1] = steps_by_features(t, 1);
    }
    return path;
}

double ade(const PlanarPath& predicted, const PlanarPath& truth) {
    if (predicted.size() != truth.size()) {
        throw DimensionError("ade: path lengths differ (" + std::to_string(predicted.size() / 2) +
                             " vs " + std::to_string(truth.size() / 2) + " steps)");
    }
    if (predicted.empty() || predicted.size() % 2 != 0) {
        throw DimensionError("ade: path must hold interleaved (x, y) pairs");
    }
    const std::size_t steps = predicted.size() / 2;
    double acc = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
        acc += std::hypot(predicted[2 * t] - truth[2 * t], predicted[2 * t + 1] - truth[2 * t + 1]);
    }
    return acc / static_cast<double>(steps);
}

double fde(const PlanarPath& predicted, const PlanarPath& truth) {
    if (predicted.size() != truth.size()) {
        throw DimensionError("fde: path lengths differ");
    }
    if (predicted.empty() || predicted.size() % 2 != 0) {
        throw DimensionError("fde: path must hold interleaved (x, y) pairs");
    }
    const std::size_t last = predicted.size() / 2 - 1;
    return std::hypot(predicted[2 * last] - truth[2 * last],
                      predicted[2 * last + 1] - truth[2 * last + 1]);
}

ConfidencePair confidence_score(const TrajectoryDistribution& dist, const PlanarPath& truth) {
    if (dist.passes < 2) {
        throw NumericError("confidence score needs sigma from at least 2 passes");
    }
    if (dist.per_step.size() != dist.horizon) {
        throw NumericError("confidence score requires fitted per-step Gaussians");
    }
    if (truth.size() != dist.horizon * 2) {
        throw DimensionError("confidence score: truth has " + std::to_string(truth.size() / 2) +
                             " steps, distribution has " + std::to_string(dist.horizon));
    }
    std::size_t inside_x = 0, inside_y = 0;
    for (std::size_t t = 0; t < dist.horizon; ++t) {
        const auto& g = dist.per_step[t];
        // strict '<': a point exactly at 2 sigma counts as outside
        if (std::abs(truth[2 * t] - g.mu_x) < 2.0 * g.sigma_x) ++inside_x;
        if (std::abs(truth[2 * t + 1] - g.mu_y) < 2.0 * g.sigma_y) ++inside_y;
    }
    const double denom = static_cast<double>(dist.horizon);
    return {100.0 * static_cast<double>(inside_x) / denom,
            100.0 * static_cast<double>(inside_y) / denom};
}

EvaluationReport aggregate(const std::vector<TrajectoryMetrics>& per_trajectory,
                           const std::string& model, double p, double horizon_seconds,
                           std::size_t mc_passes) {
    if (per_trajectory.empty()) {
        throw DataError("cannot aggregate an empty metric set");
    }
    EvaluationReport r;
    r.model = model;
    r.p = p;
    r.horizon_seconds = horizon_seconds;
    r.trajectory_count = per_trajectory.size();
    r.mc_passes = mc_passes;
    for (const auto& m : per_trajectory) {
        r.ade += m.ade;
        r.fde += m.fde;
        r.cs_x += m.cs_x;
        r.cs_y += m.cs_y;
    }
    const double inv = 1.0 / static_cast<double>(per_trajectory.size());
    r.ade *= inv;
    r.fde *= inv;
    r.cs_x *= inv;
    r.cs_y *= inv;
    return r;
}

void write_report_csv(const std::vector<EvaluationReport>& reports, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << "model,p,horizon_s,ade,fde,cs_x,cs_y,n_traj,n_mc\n";
    char buf[240];
    for (const auto& r : reports) {
        std::snprintf(buf, sizeof(buf), "%s,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%zu,%zu\n",
                      r.model.c_str(), r.p, r.horizon_seconds, r.ade, r.fde, r.cs_x, r.cs_y,
                      r.trajectory_count, r.mc_passes);
        os << buf;
    }
    if (!os) throw IoError("write failed: " + path);
}

}  // namespace pedcast
