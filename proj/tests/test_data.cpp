#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>

#include "pedcast/data.hpp"
#include "pedcast/rng.hpp"

using namespace pedcast;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name, const std::string& contents)
        : path("/tmp/pedcast_test_" + name) {
        std::ofstream out(path, std::ios::binary);
        out << contents;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

RawTrack straight_track(long long id, std::size_t n, double x0, double vx, double vy, double dt) {
    RawTrack t;
    t.pedestrian_id = id;
    for (std::size_t i = 0; i < n; ++i) {
        t.samples.push_back({static_cast<long long>(10 * i),
                             x0 + vx * dt * static_cast<double>(i),
                             vy * dt * static_cast<double>(i)});
    }
    return t;
}

}  // namespace

TEST_CASE("empty annotation file yields no tracks") {
    TempFile f("empty.txt", "# just a comment\n");
    CHECK(parse_annotations(f.path, AnnotationFormat::Tsv).empty());
}

TEST_CASE("tsv parsing groups by id in first-appearance order") {
    TempFile f("basic.tsv",
               "# frame id x y\n"
               "0\t7\t1.0\t2.0\n"
               "0\t3\t5.0\t6.0\n"
               "10\t7\t1.5\t2.5\n"
               "10\t3\t5.5\t6.5\n"
               "20\t7\t2.0\t3.0\n");
    auto tracks = parse_annotations(f.path, AnnotationFormat::Tsv);
    REQUIRE(tracks.size() == 2);
    CHECK(tracks[0].pedestrian_id == 7);
    CHECK(tracks[0].samples.size() == 3);
    CHECK(tracks[1].pedestrian_id == 3);
    CHECK(tracks[1].samples[1].x == 5.5);
}

TEST_CASE("obsmat parsing maps columns 1/2/3/5 to frame/id/x/y") {
    // 8 columns: frame id x z y vx vz vy
    TempFile f("basic.obsmat",
               "100 1 2.5 0 3.5 0 0 0\n"
               "110 1 2.9 0 3.9 0 0 0\n");
    auto tracks = parse_annotations(f.path, AnnotationFormat::Obsmat);
    REQUIRE(tracks.size() == 1);
    CHECK(tracks[0].samples[0].frame == 100);
    CHECK(tracks[0].samples[0].x == 2.5);
    CHECK(tracks[0].samples[0].y == 3.5);
    CHECK(tracks[0].samples[1].x == 2.9);
}

TEST_CASE("malformed rows report the line number") {
    TempFile f("bad.tsv", "0\t1\t1.0\t2.0\n10\t1\tnope\t3.0\n");
    try {
        parse_annotations(f.path, AnnotationFormat::Tsv);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("2") != std::string::npos);
    }
}

TEST_CASE("duplicate frames for one pedestrian are rejected") {
    TempFile f("dup.tsv", "0\t1\t1.0\t2.0\n0\t1\t1.1\t2.1\n");
    CHECK_THROWS_AS(parse_annotations(f.path, AnnotationFormat::Tsv), DataError);
}

TEST_CASE("a change in frame spacing starts a new segment") {
    TempFile f("gap.tsv",
               "0\t1\t0.0\t0.0\n"
               "10\t1\t1.0\t0.0\n"
               "20\t1\t2.0\t0.0\n"
               "40\t1\t4.0\t0.0\n"
               "60\t1\t6.0\t0.0\n");
    auto tracks = parse_annotations(f.path, AnnotationFormat::Tsv);
    REQUIRE(tracks.size() == 2);
    CHECK(tracks[0].samples.size() == 3);
    // boundary point is shared so both segments stay differentiable
    CHECK(tracks[1].samples.front().frame == 20);
    CHECK(tracks[1].samples.size() == 3);
}

TEST_CASE("missing file raises an io error") {
    CHECK_THROWS_AS(parse_annotations("/tmp/pedcast_no_such_file.tsv", AnnotationFormat::Tsv),
                    IoError);
}

TEST_CASE("velocities: stationary track has zero u and v") {
    RawTrack t = straight_track(1, 5, 2.0, 0.0, 0.0, 0.4);
    Tensor feats = derive_velocities(t, 0.4);
    REQUIRE(feats.shape() == std::vector<std::size_t>{5, 4});
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(feats(i, 0) == 2.0);
        CHECK(feats(i, 2) == 0.0);
        CHECK(feats(i, 3) == 0.0);
    }
}

TEST_CASE("velocities: constant 1 m/s walker") {
    RawTrack t = straight_track(1, 6, 0.0, 1.0, 0.0, 0.4);
    Tensor feats = derive_velocities(t, 0.4);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(feats(i, 2) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(feats(i, 3) == doctest::Approx(0.0));
    }
    // first step copies the second's velocity
    CHECK(feats(0, 2) == feats(1, 2));

    RawTrack too_short;
    too_short.samples.push_back({0, 0, 0});
    CHECK_THROWS_AS(derive_velocities(too_short, 0.4), DataError);
}

TEST_CASE("velocities reconstruct positions within 1e-9") {
    Rng rng(211);
    RawTrack t;
    t.pedestrian_id = 4;
    double x = 0, y = 0;
    for (int i = 0; i < 12; ++i) {
        t.samples.push_back({10LL * i, x, y});
        x += rng.uniform(-0.5, 0.5);
        y += rng.uniform(-0.5, 0.5);
    }
    const double dt = 0.4;
    Tensor feats = derive_velocities(t, dt);
    for (std::size_t i = 1; i < t.samples.size(); ++i) {
        CHECK(std::abs(feats(i - 1, 0) + feats(i, 2) * dt - feats(i, 0)) < 1e-9);
        CHECK(std::abs(feats(i - 1, 1) + feats(i, 3) * dt - feats(i, 1)) < 1e-9);
    }
}

TEST_CASE("sliding windows: counts and contents") {
    const std::size_t T = 8, F = 12;
    RawTrack t29 = straight_track(1, 29, 0.0, 1.0, 0.5, 0.4);
    auto w = sliding_window_augment(t29, 0.4, T, F);
    CHECK(w.size() == 10);  // 29 - (8 + 12) + 1

    RawTrack exact = straight_track(2, T + F, 0.0, 1.0, 0.0, 0.4);
    CHECK(sliding_window_augment(exact, 0.4, T, F).size() == 1);

    RawTrack short_track = straight_track(3, T + F - 1, 0.0, 1.0, 0.0, 0.4);
    CHECK(sliding_window_augment(short_track, 0.4, T, F).empty());

    // window i covers source steps [i, i+T) then [i+T, i+T+F)
    Tensor full = derive_velocities(t29, 0.4);
    for (std::size_t i = 0; i < w.size(); ++i) {
        CHECK(w[i].source_id == 1);
        CHECK(w[i].window_index == i);
        for (std::size_t f = 0; f < 4; ++f) {
            CHECK(w[i].history(0, f) == full(i, f));
            CHECK(w[i].history(T - 1, f) == full(i + T - 1, f));
            CHECK(w[i].future(F - 1, f) == full(i + T + F - 1, f));
        }
    }
}

TEST_CASE("split is track-granular, deterministic, and exhaustive") {
    std::vector<TrajectorySample> samples;
    for (long long id = 0; id < 20; ++id) {
        RawTrack t = straight_track(id, 25, static_cast<double>(id), 1.0, 0.0, 0.4);
        for (auto& s : sliding_window_augment(t, 0.4, 8, 12)) samples.push_back(std::move(s));
    }

    auto split = split_dataset(samples, 0.79, 99);
    CHECK(split.train.size() + split.test.size() == samples.size());
    CHECK(!split.train.empty());
    CHECK(!split.test.empty());

    std::set<long long> train_ids, test_ids;
    for (const auto& s : split.train) train_ids.insert(s.source_id);
    for (const auto& s : split.test) test_ids.insert(s.source_id);
    for (long long id : train_ids) CHECK(test_ids.count(id) == 0);

    auto again = split_dataset(samples, 0.79, 99);
    REQUIRE(again.train.size() == split.train.size());
    for (std::size_t i = 0; i < split.train.size(); ++i) {
        CHECK(again.train[i].source_id == split.train[i].source_id);
        CHECK(again.train[i].window_index == split.train[i].window_index);
    }

    auto other = split_dataset(samples, 0.79, 100);
    bool differs = other.train.size() != split.train.size();
    for (std::size_t i = 0; !differs && i < split.train.size(); ++i) {
        differs = other.train[i].source_id != split.train[i].source_id;
    }
    CHECK(differs);

    CHECK_THROWS_AS(split_dataset(samples, 1.0, 1), ParameterError);
    CHECK_THROWS_AS(split_dataset(samples, 0.0, 1), ParameterError);
}

TEST_CASE("normalizer round-trips and standardizes the training set") {
    Rng rng(223);
    std::vector<TrajectorySample> train;
    for (long long id = 0; id < 6; ++id) {
        TrajectorySample s;
        s.source_id = id;
        s.history = Tensor({8, 4});
        s.future = Tensor({12, 4});
        for (double& v : s.history.flat()) v = rng.uniform(-3, 7);
        for (double& v : s.future.flat()) v = rng.uniform(-3, 7);
        train.push_back(std::move(s));
    }

    auto stats = fit_normalizer(train);

    // standardization: per-feature mean 0, std 1 over history+future
    double sum[4] = {0, 0, 0, 0}, sq[4] = {0, 0, 0, 0};
    std::size_t n = 0;
    for (const auto& s : train) {
        for (const Tensor* t : {&s.history, &s.future}) {
            Tensor z = normalize(*t, stats);
            for (std::size_t r = 0; r < z.dim(0); ++r) {
                for (std::size_t f = 0; f < 4; ++f) {
                    sum[f] += z(r, f);
                    sq[f] += z(r, f) * z(r, f);
                }
            }
            n += t->dim(0);
        }
    }
    for (std::size_t f = 0; f < 4; ++f) {
        const double mean = sum[f] / n;
        const double var = sq[f] / n - mean * mean;
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(var - 1.0) < 1e-9);
    }

    Tensor orig = train[0].history;
    Tensor back = denormalize(normalize(orig, stats), stats);
    for (std::size_t i = 0; i < orig.size(); ++i) {
        CHECK(back[i] == doctest::Approx(orig[i]).epsilon(1e-12));
    }
}

TEST_CASE("constant features pass through the normalizer unscaled") {
    std::vector<TrajectorySample> train(1);
    train[0].history = Tensor::full({8, 4}, 0.0);
    train[0].future = Tensor::full({12, 4}, 0.0);
    // u/v constant zero (a stationary pedestrian)
    auto stats = fit_normalizer(train);
    Tensor z = normalize(train[0].history, stats);
    for (double v : z.flat()) CHECK(v == 0.0);
    CHECK(stats.stddev[2] == 1.0);
}

TEST_CASE("dataset cache round-trips byte-exactly") {
    Rng rng(227);
    PreparedDataset ds;
    ds.history_len = 8;
    ds.horizon = 12;
    ds.dt = 0.4;
    for (int f = 0; f < 4; ++f) {
        ds.stats.mean[f] = rng.uniform(-1, 1);
        ds.stats.stddev[f] = rng.uniform(0.5, 2.0);
    }
    for (long long id = 0; id < 3; ++id) {
        TrajectorySample s;
        s.source_id = id;
        s.window_index = static_cast<std::uint32_t>(id * 2);
        s.history = Tensor({8, 4});
        s.future = Tensor({12, 4});
        for (double& v : s.history.flat()) v = rng.uniform(-5, 5);
        for (double& v : s.future.flat()) v = rng.uniform(-5, 5);
        (id < 2 ? ds.train : ds.test).push_back(std::move(s));
    }

    const std::string path = "/tmp/pedcast_test_cache.bin";
    save_dataset(ds, path);
    PreparedDataset back = load_dataset(path);
    CHECK(back.history_len == ds.history_len);
    CHECK(back.horizon == ds.horizon);
    CHECK(back.dt == ds.dt);
    REQUIRE(back.train.size() == 2);
    REQUIRE(back.test.size() == 1);
    for (int f = 0; f < 4; ++f) {
        CHECK(back.stats.mean[f] == ds.stats.mean[f]);
        CHECK(back.stats.stddev[f] == ds.stats.stddev[f]);
    }
    for (std::size_t i = 0; i < ds.train.size(); ++i) {
        CHECK(back.train[i].source_id == ds.train[i].source_id);
        CHECK(back.train[i].window_index == ds.train[i].window_index);
        for (std::size_t j = 0; j < ds.train[i].history.size(); ++j) {
            CHECK(back.train[i].history[j] == ds.train[i].history[j]);
        }
        for (std::size_t j = 0; j < ds.train[i].future.size(); ++j) {
            CHECK(back.train[i].future[j] == ds.train[i].future[j]);
        }
    }

    // truncation must not pass silently
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    out.close();
    CHECK_THROWS_AS(load_dataset(path), IoError);
    std::remove(path.c_str());
}

TEST_CASE("synthetic corpus round-trips through the tsv writer") {
    SyntheticCorpusConfig cfg;
    cfg.track_count = 5;
    cfg.track_length = 12;
    auto tracks = synthetic_tracks(cfg, 777);
    REQUIRE(tracks.size() == 5);
    for (const auto& t : tracks) CHECK(t.samples.size() == 12);

    // same seed, same corpus
    auto again = synthetic_tracks(cfg, 777);
    CHECK(again[3].samples[7].x == tracks[3].samples[7].x);

    // speeds stay inside the configured band
    for (const auto& t : tracks) {
        Tensor feats = derive_velocities(t, cfg.dt);
        for (std::size_t i = 0; i < feats.dim(0); ++i) {
            const double speed = std::hypot(feats(i, 2), feats(i, 3));
            CHECK(speed >= cfg.speed_min - 1e-9);
            CHECK(speed <= cfg.speed_max + 1e-9);
        }
    }

    const std::string path = "/tmp/pedcast_test_roundtrip.tsv";
    write_tracks_tsv(tracks, path);
    auto parsed = parse_annotations(path, AnnotationFormat::Tsv);
    REQUIRE(parsed.size() == tracks.size());
    for (std::size_t i = 0; i < tracks.size(); ++i) {
        CHECK(parsed[i].pedestrian_id == tracks[i].pedestrian_id);
        REQUIRE(parsed[i].samples.size() == tracks[i].samples.size());
        for (std::size_t j = 0; j < tracks[i].samples.size(); ++j) {
            CHECK(parsed[i].samples[j].x ==
                  doctest::Approx(tracks[i].samples[j].x).epsilon(1e-6));
            CHECK(parsed[i].samples[j].y ==
                  doctest::Approx(tracks[i].samples[j].y).epsilon(1e-6));
        }
    }
    std::remove(path.c_str());
}
