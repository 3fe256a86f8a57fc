#include "pedcast/uncertainty.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace pedcast {

TrajectoryDistribution mc_sample(ModelGraph& graph, const Tensor& history_normalized,
                                 std::size_t passes, double p, std::uint64_t seed,
                                 const NormalizationStats& stats) {
    if (passes < 1) throw ParameterError("mc_sample: pass count must be >= 1");
    if (p < 0.0 || p >= 1.0) throw ParameterError("mc_sample: p must be in [0, 1)");

    Tensor batched = history_normalized;
    if (batched.rank() == 2) {
        batched = batched.reshaped({1, batched.dim(0), batched.dim(1)});
    }
    require_rank(batched, 3, "mc_sample history");

    TrajectoryDistribution dist;
    dist.passes = passes;
    dist.horizon = graph.horizon();
    dist.dropout_p = p;
    dist.samples.resize(passes * dist.horizon * 2);

    Rng pass_seeds(seed);
    for (std::size_t n = 0; n < passes; ++n) {
        const std::uint64_t pass_seed = pass_seeds.next_u64();
        Tensor pred = graph.predict(batched, ForwardMode::stochastic(p, pass_seed));
        Tensor meters = denormalize(pred, stats);
        for (std::size_t t = 0; t < dist.horizon; ++t) {
            dist.samples[(n * dist.horizon + t) * 2] = meters(0, t, 0);
            dist.samples[(n * dist.horizon + t) * 2 + 1] = meters(0, t, 1);
        }
    }
    return dist;
}

GaussianState fit_bivariate_gaussian(const std::vector<double>& points_xy) {
    if (points_xy.size() % 2 != 0) {
        throw DimensionError("bivariate Gaussian fit expects interleaved (x, y) pairs");
    }
    const std::size_t n = points_xy.size() / 2;
    if (n < 2) {
        throw NumericError("bivariate Gaussian fit needs at least 2 points");
    }
    GaussianState g;
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        g.mu_x += points_xy[2 * i];
        g.mu_y += points_xy[2 * i + 1];
    }
    g.mu_x *= inv;
    g.mu_y *= inv;
    // 1/N population convention
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = points_xy[2 * i] - g.mu_x;
        const double dy = points_xy[2 * i + 1] - g.mu_y;
        g.cov_xx += dx * dx;
        g.cov_yy += dy * dy;
        g.cov_xy += dx * dy;
    }
    g.cov_xx *= inv;
    g.cov_yy *= inv;
    g.cov_xy *= inv;
    g.sigma_x = std::sqrt(g.cov_xx);
    g.sigma_y = std::sqrt(g.cov_yy);
    return g;
}

namespace {

std::vector<GaussianState> fit_per_step(const TrajectoryDistribution& dist) {
    std::vector<GaussianState> states;
    states.reserve(dist.horizon);
    std::vector<double> cloud(dist.passes * 2);
    for (std::size_t t = 0; t < dist.horizon; ++t) {
        for (std::size_t n = 0; n < dist.passes; ++n) {
            cloud[2 * n] = dist.x(n, t);
            cloud[2 * n + 1] = dist.y(n, t);
        }
        states.push_back(fit_bivariate_gaussian(cloud));
    }
    return states;
}

}  // namespace

void distribution_stats(TrajectoryDistribution& dist) {
    if (dist.passes < 2) {
        throw NumericError("distribution variance is undefined for fewer than 2 passes");
    }
    dist.per_step = fit_per_step(dist);
}

void fit_distribution_gaussians(TrajectoryDistribution& dist) {
    if (dist.passes < 2) {
        throw NumericError("bivariate Gaussian fit needs at least 2 passes");
    }
    dist.per_step = fit_per_step(dist);
}

std::vector<CovarianceProfileRow> covariance_profile(const TrajectoryDistribution& dist) {
    std::vector<CovarianceProfileRow> rows;
    const auto states = dist.per_step.empty() ? fit_per_step(dist) : dist.per_step;
    rows.reserve(states.size());
    for (std::size_t t = 0; t < states.size(); ++t) {
        CovarianceProfileRow row;
        row.step = t;
        row.cov_xx = states[t].cov_xx;
        row.cov_yy = states[t].cov_yy;
        row.cov_xy = states[t].cov_xy;
        if (row.cov_xx > 2.0 * row.cov_yy) {
            row.dominant_axis = 'x';
        } else if (row.cov_yy > 2.0 * row.cov_xx) {
            row.dominant_axis = 'y';
        }
        rows.push_back(row);
    }
    return rows;
}

void write_distribution_csv(const TrajectoryDistribution& dist, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << "step,mu_x,mu_y,sigma_x,sigma_y,cov_xy\n";
    char buf[200];
    for (std::size_t t = 0; t < dist.per_step.size(); ++t) {
        const auto& g = dist.per_step[t];
        std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g,%.10g,%.10g,%.10g\n", t, g.mu_x, g.mu_y,
                      g.sigma_x, g.sigma_y, g.cov_xy);
        os << buf;
    }
    if (!os) throw IoError("write failed: " + path);
}

void write_raw_samples_csv(const TrajectoryDistribution& dist, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << "pass,step,x,y\n";
    char buf[160];
    for (std::size_t n = 0; n < dist.passes; ++n) {
        for (std::size_t t = 0; t < dist.horizon; ++t) {
            std::snprintf(buf, sizeof(buf), "%zu,%zu,%.10g,%.10g\n", n, t, dist.x(n, t),
                          dist.y(n, t));
            os << buf;
        }
    }
    if (!os) throw IoError("write failed: " + path);
}

}  // namespace pedcast
