#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pedcast/data.hpp"
#include "pedcast/model.hpp"

namespace pedcast {

struct GaussianState {
    double mu_x = 0.0;
    double mu_y = 0.0;
    double cov_xx = 0.0;
    double cov_xy = 0.0;  // == cov_yx by construction
    double cov_yy = 0.0;
    double sigma_x = 0.0;
    double sigma_y = 0.0;
};

/// N sampled (x̂, ŷ) trajectories in meters plus per-step Gaussian fits.
struct TrajectoryDistribution {
    std::size_t passes = 0;   // N
    std::size_t horizon = 0;  // F
    double dropout_p = 0.0;
    std::vector<double> samples;  // [N][F][2], row-major
    std::vector<GaussianState> per_step;

    double x(std::size_t pass, std::size_t step) const {
        return samples[(pass * horizon + step) * 2];
    }
    double y(std::size_t pass, std::size_t step) const {
        return samples[(pass * horizon + step) * 2 + 1];
    }
};

/// N independent stochastic passes with mask streams derived from `seed`;
/// outputs are denormalized to meters. p == 0 yields N identical copies of
/// the deterministic prediction.
TrajectoryDistribution mc_sample(ModelGraph& graph, const Tensor& history_normalized,
                                 std::size_t passes, double p, std::uint64_t seed,
                                 const NormalizationStats& stats);

/// Per-step mean and variance with the 1/N convention; fills per_step means
/// and diagonal terms. Requires N >= 2.
void distribution_stats(TrajectoryDistribution& dist);

/// Mean and 1/N covariance of one step's point cloud ([n][2] pairs).
GaussianState fit_bivariate_gaussian(const std::vector<double>& points_xy);

/// Fits the full per-step bivariate Gaussians (means, covariances, sigmas).
void fit_distribution_gaussians(TrajectoryDistribution& dist);

struct CovarianceProfileRow {
    std::size_t step = 0;
    double cov_xx = 0.0;
    double cov_yy = 0.0;
    double cov_xy = 0.0;
    char dominant_axis = '-';  // 'x' or 'y' when one diagonal exceeds 2x the other
};

std::vector<CovarianceProfileRow> covariance_profile(const TrajectoryDistribution& dist);

/// step,mu_x,mu_y,sigma_x,sigma_y,cov_xy
void write_distribution_csv(const TrajectoryDistribution& dist, const std::string& path);
/// pass,step,x,y
void write_raw_samples_csv(const TrajectoryDistribution& dist, const std::string& path);

}  // namespace pedcast
