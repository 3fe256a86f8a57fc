#include "pedcast/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "binio.hpp"
#include "pedcast/rng.hpp"

namespace pedcast {

namespace {

constexpr char kDatasetMagic[8] = {'P', 'C', 'D', 'S', '1', '\n', 0, 0};
constexpr std::uint32_t kDatasetVersion = 1;

struct Row {
    long long frame;
    long long id;
    double x;
    double y;
};

bool parse_double(const std::string& tok, double& out) {
    try {
        std::size_t pos = 0;
        out = std::stod(tok, &pos);
        return pos == tok.size();
    } catch (const std::exception&) {
        return false;
    }
}

std::vector<Row> read_rows(const std::string& path, AnnotationFormat format) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open annotation file: " + path);

    std::vector<Row> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string trimmed = line;
        const auto first = trimmed.find_first_not_of(" \t\r\n");
        if (first == std::string::npos) continue;  // blank
        if (trimmed[first] == '#') continue;       // comment / optional header

        std::istringstream iss(line);
        std::vector<std::string> tokens;
        std::string tok;
        while (iss >> tok) tokens.push_back(tok);

        const std::size_t expected = format == AnnotationFormat::Obsmat ? 8u : 4u;
        if (tokens.size() != expected) {
            throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(expected) + " columns, got " +
                            std::to_string(tokens.size()));
        }
        double vals[8];
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (!parse_double(tokens[i], vals[i])) {
                throw DataError(path + ":" + std::to_string(line_no) + ": malformed number '" +
                                tokens[i] + "'");
            }
        }
        Row r;
        r.frame = static_cast<long long>(std::llround(vals[0]));
        r.id = static_cast<long long>(std::llround(vals[1]));
        if (format == AnnotationFormat::Obsmat) {
            // columns: frame id pos_x pos_z pos_y v_x v_z v_y
            r.x = vals[2];
            r.y = vals[4];
        } else {
            r.x = vals[2];
            r.y = vals[3];
        }
        rows.push_back(r);
    }
    return rows;
}

}  // namespace

AnnotationFormat annotation_format_from_string(const std::string& s) {
    if (s == "obsmat") return AnnotationFormat::Obsmat;
    if (s == "tsv") return AnnotationFormat::Tsv;
    throw ParameterError("unknown annotation format: '" + s + "' (expected obsmat or tsv)");
}

std::vector<RawTrack> parse_annotations(const std::string& path, AnnotationFormat format) {
    const std::vector<Row> rows = read_rows(path, format);

    // Group by id, keeping first-appearance order of ids for determinism.
    std::vector<long long> id_order;
    std::map<long long, std::vector<TrackPoint>> by_id;
    for (const Row& r : rows) {
        auto [it, inserted] = by_id.try_emplace(r.id);
        if (inserted) id_order.push_back(r.id);
        it->second.push_back({r.frame, r.x, r.y});
    }

    std::vector<RawTrack> tracks;
    for (long long id : id_order) {
        auto& pts = by_id[id];
        std::stable_sort(pts.begin(), pts.end(),
                         [](const TrackPoint& a, const TrackPoint& b) { return a.frame < b.frame; });
        for (std::size_t i = 1; i < pts.size(); ++i) {
            if (pts[i].frame == pts[i - 1].frame) {
                throw DataError(path + ": pedestrian " + std::to_string(id) +
                                " has duplicate frame " + std::to_string(pts[i].frame));
            }
        }
        // Regular sampling per track: a change in frame spacing starts a new
        // segment so every RawTrack keeps a constant gap.
        std::size_t begin = 0;
        long long gap = pts.size() > 1 ? pts[1].frame - pts[0].frame : 0;
        for (std::size_t i = 2; i <= pts.size(); ++i) {
            const bool boundary =
                i == pts.size() || (pts[i].frame - pts[i - 1].frame) != gap;
            if (!boundary) continue;
            tracks.push_back(
                {id, std::vector<TrackPoint>(pts.begin() + begin, pts.begin() + i)});
            if (i < pts.size()) {
                begin = i - 1;  // the boundary point starts the next segment
                gap = pts[i].frame - pts[i - 1].frame;
                // re-run the scan from the new segment's second gap
            }
        }
        if (pts.size() == 1) {
            tracks.push_back({id, pts});
        }
    }
    return tracks;
}

Tensor derive_velocities(const RawTrack& track, double dt) {
    if (track.samples.size() < 2) {
        throw DataError("track " + std::to_string(track.pedestrian_id) +
                        " has fewer than 2 samples");
    }
    if (dt <= 0.0) throw ParameterError("dt must be positive");
    const std::size_t len = track.samples.size();
    Tensor features({len, 4});
    for (std::size_t t = 0; t < len; ++t) {
        features(t, 0) = track.samples[t].x;
        features(t, 1) = track.samples[t].y;
        if (t > 0) {
            features(t, 2) = (track.samples[t].x - track.samples[t - 1].x) / dt;
            features(t, 3) = (track.samples[t].y - track.samples[t - 1].y) / dt;
        }
    }
    features(0, 2) = features(1, 2);  // first step copies the second's velocity
    features(0, 3) = features(1, 3);
    return features;
}

std::vector<TrajectorySample> sliding_window_augment(const RawTrack& track, double dt,
                                                     std::size_t history_len, std::size_t horizon,
                                                     std::size_t stride) {
    if (stride < 1) throw ParameterError("stride must be >= 1");
    std::vector<TrajectorySample> out;
    const std::size_t len = track.samples.size();
    const std::size_t window = history_len + horizon;
    if (len < window) return out;

    const Tensor features = derive_velocities(track, dt);
    for (std::size_t offset = 0; offset + window <= len; offset += stride) {
        TrajectorySample s;
        s.source_id = track.pedestrian_id;
        s.window_index = static_cast<std::uint32_t>(offset);
        s.history = Tensor({history_len, 4});
        s.future = Tensor({horizon, 4});
        for (std::size_t t = 0; t < history_len; ++t) {
            for (std::size_t f = 0; f < 4; ++f) {
                s.history(t, f) = features(offset + t, f);
            }
        }
        for (std::size_t t = 0; t < horizon; ++t) {
            for (std::size_t f = 0; f < 4; ++f) {
                s.future(t, f) = features(offset + history_len + t, f);
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

DatasetSplit split_dataset(const std::vector<TrajectorySample>& samples, double train_fraction,
                           std::uint64_t seed) {
    if (train_fraction <= 0.0 || train_fraction >= 1.0) {
        throw ParameterError("train fraction must be in (0, 1), got " +
                             std::to_string(train_fraction));
    }
    std::vector<long long> ids;
    std::map<long long, std::size_t> count_by_id;
    for (const auto& s : samples) {
        auto [it, inserted] = count_by_id.try_emplace(s.source_id, 0u);
        if (inserted) ids.push_back(s.source_id);
        it->second += 1;
    }

    Rng rng(seed);
    rng.shuffle(ids);

    const double target = train_fraction * static_cast<double>(samples.size());
    std::unordered_set<long long> train_ids;
    std::size_t assigned = 0;
    for (long long id : ids) {
        if (static_cast<double>(assigned) >= target) break;
        train_ids.insert(id);
        assigned += count_by_id[id];
    }

    DatasetSplit split;
    for (const auto& s : samples) {
        (train_ids.count(s.source_id) ? split.train : split.test).push_back(s);
    }
    return split;
}

NormalizationStats fit_normalizer(const std::vector<TrajectorySample>& train) {
    if (train.empty()) throw DataError("cannot fit normalizer on an empty training set");
    NormalizationStats stats;
    double sum[4] = {0, 0, 0, 0};
    double sum_sq[4] = {0, 0, 0, 0};
    std::size_t n = 0;
    auto accumulate = [&](const Tensor& t) {
        for (std::size_t row = 0; row < t.dim(0); ++row) {
            for (std::size_t f = 0; f < 4; ++f) {
                sum[f] += t(row, f);
                sum_sq[f] += t(row, f) * t(row, f);
            }
        }
        n += t.dim(0);
    };
    for (const auto& s : train) {
        accumulate(s.history);
        accumulate(s.future);
    }
    for (std::size_t f = 0; f < 4; ++f) {
        stats.mean[f] = sum[f] / static_cast<double>(n);
        const double var = sum_sq[f] / static_cast<double>(n) - stats.mean[f] * stats.mean[f];
        const double sd = var > 0.0 ? std::sqrt(var) : 0.0;
        if (sd > 1e-12) {
            stats.stddev[f] = sd;
        } else {
            // constant feature passes through unscaled
            stats.mean[f] = 0.0;
            stats.stddev[f] = 1.0;
        }
    }
    return stats;
}

Tensor normalize(const Tensor& features, const NormalizationStats& stats) {
    if (features.rank() < 1 || features.shape().back() != 4) {
        throw DimensionError("normalize: last axis must be the 4 features, got " +
                             features.shape_string());
    }
    Tensor out = features;
    const std::size_t rows = features.size() / 4;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t f = 0; f < 4; ++f) {
            out[r * 4 + f] = (features[r * 4 + f] - stats.mean[f]) / stats.stddev[f];
        }
    }
    return out;
}

Tensor denormalize(const Tensor& features, const NormalizationStats& stats) {
    Tensor out = features;
    const std::size_t rows = features.size() / 4;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t f = 0; f < 4; ++f) {
            out[r * 4 + f] = features[r * 4 + f] * stats.stddev[f] + stats.mean[f];
        }
    }
    return out;
}

namespace {

void write_samples(std::ostream& os, const std::vector<TrajectorySample>& samples) {
    binio::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(samples.size()));
    for (const auto& s : samples) {
        binio::write_pod<std::int64_t>(os, s.source_id);
        binio::write_pod<std::uint32_t>(os, s.window_index);
        binio::write_doubles(os, s.history.data(), s.history.size());
        binio::write_doubles(os, s.future.data(), s.future.size());
    }
}

std::vector<TrajectorySample> read_samples(std::istream& is, std::size_t history_len,
                                           std::size_t horizon) {
    const auto n = binio::read_pod<std::uint32_t>(is, "sample count");
    std::vector<TrajectorySample> samples(n);
    for (auto& s : samples) {
        s.source_id = binio::read_pod<std::int64_t>(is, "sample id");
        s.window_index = binio::read_pod<std::uint32_t>(is, "window index");
        s.history = Tensor({history_len, 4});
        s.future = Tensor({horizon, 4});
        binio::read_doubles(is, s.history.data(), s.history.size(), "history");
        binio::read_doubles(is, s.future.data(), s.future.size(), "future");
    }
    return samples;
}

}  // namespace

void save_dataset(const PreparedDataset& ds, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    binio::write_bytes(os, kDatasetMagic, sizeof(kDatasetMagic));
    binio::write_pod<std::uint32_t>(os, kDatasetVersion);
    binio::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(ds.history_len));
    binio::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(ds.horizon));
    binio::write_pod<double>(os, ds.dt);
    binio::write_doubles(os, ds.stats.mean, 4);
    binio::write_doubles(os, ds.stats.stddev, 4);
    write_samples(os, ds.train);
    write_samples(os, ds.test);
}

PreparedDataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open dataset cache: " + path);
    char magic[sizeof(kDatasetMagic)];
    binio::read_bytes(is, magic, sizeof(magic), "magic");
    if (std::memcmp(magic, kDatasetMagic, sizeof(magic)) != 0) {
        throw IoError(path + ": not a dataset cache file");
    }
    const auto version = binio::read_pod<std::uint32_t>(is, "version");
    if (version != kDatasetVersion) {
        throw IoError(path + ": unsupported cache version " + std::to_string(version));
    }
    PreparedDataset ds;
    ds.history_len = binio::read_pod<std::uint32_t>(is, "history length");
    ds.horizon = binio::read_pod<std::uint32_t>(is, "horizon");
    ds.dt = binio::read_pod<double>(is, "dt");
    binio::read_doubles(is, ds.stats.mean, 4, "stats mean");
    binio::read_doubles(is, ds.stats.stddev, 4, "stats stddev");
    ds.train = read_samples(is, ds.history_len, ds.horizon);
    ds.test = read_samples(is, ds.history_len, ds.horizon);
    return ds;
}

std::vector<RawTrack> synthetic_tracks(const SyntheticCorpusConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<RawTrack> tracks;
    tracks.reserve(cfg.track_count);
    for (std::size_t i = 0; i < cfg.track_count; ++i) {
        RawTrack track;
        track.pedestrian_id = static_cast<long long>(i + 1);
        double x = rng.uniform(0.0, 10.0);
        double y = rng.uniform(0.0, 10.0);
        double heading = rng.uniform(0.0, 2.0 * 3.141592653589793);
        const double speed = rng.uniform(cfg.speed_min, cfg.speed_max);
        for (std::size_t t = 0; t < cfg.track_length; ++t) {
            double px = x, py = y;
            if (cfg.position_noise > 0.0) {
                px += rng.normal() * cfg.position_noise;
                py += rng.normal() * cfg.position_noise;
            }
            track.samples.push_back({static_cast<long long>(t), px, py});
            heading += rng.normal() * cfg.turn_rate_std;
            x += std::cos(heading) * speed * cfg.dt;
            y += std::sin(heading) * speed * cfg.dt;
        }
        tracks.push_back(std::move(track));
    }
    return tracks;
}

void write_tracks_tsv(const std::vector<RawTrack>& tracks, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << "# frame\tped_id\tx\ty\n";
    char buf[128];
    for (const auto& track : tracks) {
        for (const auto& pt : track.samples) {
            std::snprintf(buf, sizeof(buf), "%lld\t%lld\t%.9g\t%.9g\n", pt.frame,
                          track.pedestrian_id, pt.x, pt.y);
            os << buf;
        }
    }
    if (!os) throw IoError("write failed: " + path);
}

}  // namespace pedcast
