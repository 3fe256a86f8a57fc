#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "pedcast/experiments.hpp"
#include "test_support.hpp"

using namespace pedcast;
using namespace pedcast::testing;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("pedcast_exp_" + std::to_string(std::rand()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string write_corpus_tsv(const fs::path& dir, std::size_t tracks, std::size_t length,
                             std::uint64_t seed) {
    SyntheticCorpusConfig cfg;
    cfg.track_count = tracks;
    cfg.track_length = length;
    auto raw = synthetic_tracks(cfg, seed);
    const std::string path = (dir / "corpus.tsv").string();
    write_tracks_tsv(raw, path);
    return path;
}

}  // namespace

TEST_CASE("prepare_dataset runs the full import pipeline") {
    TempDir dir;
    const std::string src = write_corpus_tsv(dir.path, 12, 26, 601);

    ImportOptions opt;
    opt.history_len = 6;
    opt.horizon = 4;
    opt.train_fraction = 0.75;
    opt.seed = 3;
    ImportSummary summary;
    PreparedDataset ds = prepare_dataset(src, AnnotationFormat::Tsv, opt, &summary);

    CHECK(summary.track_count == 12);
    CHECK(summary.sequence_count == 12 * (26 - 10 + 1));
    CHECK(summary.train_count + summary.test_count == summary.sequence_count);
    CHECK(summary.skipped_tracks == 0);
    CHECK(ds.history_len == 6);
    CHECK(ds.horizon == 4);
    CHECK(!ds.train.empty());
    CHECK(!ds.test.empty());

    // normalization stats come from the train side: standardizing train works
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& s : ds.train) {
        Tensor z = normalize(s.history, ds.stats);
        for (std::size_t r = 0; r < z.dim(0); ++r) sum += z(r, 0);
        n += z.dim(0);
    }
    // future rows also contribute to the fit, so train-history mean is only
    // near zero, not exactly zero
    CHECK(std::abs(sum / static_cast<double>(n)) < 0.25);
}

TEST_CASE("prepare_dataset rejects corpora too short for one window") {
    TempDir dir;
    const std::string src = write_corpus_tsv(dir.path, 4, 8, 607);
    ImportOptions opt;
    opt.history_len = 6;
    opt.horizon = 4;  // needs 10 steps, tracks have 8
    CHECK_THROWS_AS(prepare_dataset(src, AnnotationFormat::Tsv, opt), DataError);
}

TEST_CASE("deterministic evaluation equals mc with p=0 on the mean path") {
    TempDir dir;
    const std::string src = write_corpus_tsv(dir.path, 10, 20, 613);
    ImportOptions opt;
    opt.history_len = 6;
    opt.horizon = 4;
    opt.seed = 5;
    PreparedDataset ds = prepare_dataset(src, AnnotationFormat::Tsv, opt);

    auto g = build_lstm_ed(6, 4, 0.2, 17, {5, 5});

    EvaluateOptions det;
    det.mc = false;
    auto a = evaluate_dataset(*g, ds.stats, ds.test, ds.dt, det);

    EvaluateOptions mc;
    mc.mc = true;
    mc.passes = 5;
    mc.p = 0.0;  // every pass identical to the deterministic forward
    mc.seed = 9;
    auto b = evaluate_dataset(*g, ds.stats, ds.test, ds.dt, mc);

    CHECK(a.report.ade == doctest::Approx(b.report.ade).epsilon(1e-12));
    CHECK(a.report.fde == doctest::Approx(b.report.fde).epsilon(1e-12));
    CHECK(a.report.trajectory_count == ds.test.size());
    CHECK(b.report.mc_passes == 5);
    CHECK(a.report.horizon_seconds == doctest::Approx(4 * ds.dt));
}

TEST_CASE("mc evaluation is reproducible and keeps distributions on request") {
    TempDir dir;
    const std::string src = write_corpus_tsv(dir.path, 8, 18, 617);
    ImportOptions opt;
    opt.history_len = 6;
    opt.horizon = 4;
    PreparedDataset ds = prepare_dataset(src, AnnotationFormat::Tsv, opt);

    auto g = build_lstm_ed(6, 4, 0.25, 23, {5, 5});
    EvaluateOptions mc;
    mc.mc = true;
    mc.passes = 8;
    mc.p = 0.25;
    mc.seed = 77;

    auto a = evaluate_dataset(*g, ds.stats, ds.test, ds.dt, mc, true);
    auto b = evaluate_dataset(*g, ds.stats, ds.test, ds.dt, mc, true);
    CHECK(a.report.ade == b.report.ade);
    CHECK(a.report.cs_x == b.report.cs_x);
    CHECK(a.mean_sigma_x == b.mean_sigma_x);
    CHECK(a.mean_sigma_x > 0.0);
    REQUIRE(a.distributions.size() == ds.test.size());
    CHECK(a.distributions[0].passes == 8);
    CHECK(a.distributions[0].per_step.size() == 4);

    auto no_keep = evaluate_dataset(*g, ds.stats, ds.test, ds.dt, mc, false);
    CHECK(no_keep.distributions.empty());
    CHECK(no_keep.report.ade == a.report.ade);
}

TEST_CASE("evaluation truncates long futures and rejects short ones") {
    TempDir dir;
    const std::string src = write_corpus_tsv(dir.path, 8, 20, 619);
    ImportOptions opt;
    opt.history_len = 6;
    opt.horizon = 6;
    PreparedDataset ds = prepare_dataset(src, AnnotationFormat::Tsv, opt);

    // model horizon 4 < dataset horizon 6: futures are truncated to 4 steps
    auto g = build_lstm_ed(6, 4, 0.0, 29, {5, 5});
    EvaluateOptions det;
    auto r = evaluate_dataset(*g, ds.stats, ds.test, ds.dt, det);
    CHECK(r.report.horizon_seconds == doctest::Approx(4 * ds.dt));

    // model horizon 8 > dataset horizon 6: no ground truth for steps 7..8
    auto wide = build_lstm_ed(6, 8, 0.0, 31, {5, 5});
    CHECK_THROWS_AS(evaluate_dataset(*wide, ds.stats, ds.test, ds.dt, det), DataError);
}

TEST_CASE("checkpoint names encode the cell coordinates") {
    const std::string name = checkpoint_name("lstm_ed", 8, 12, 0.2, 7);
    CHECK(name == "lstm_ed_T8_F12_p0.2_s7.ckpt");
}

TEST_CASE("sweep emits one row per cell and aborts on missing checkpoints") {
    TempDir dir;
    const std::string src = write_corpus_tsv(dir.path, 10, 22, 631);
    ImportOptions opt;
    opt.history_len = 6;
    opt.horizon = 6;
    PreparedDataset ds = prepare_dataset(src, AnnotationFormat::Tsv, opt);

    SweepSpec spec;
    spec.models = {"lstm_ed", "cnn1d"};
    spec.p_list = {0.1, 0.3};
    spec.horizons = {4, 6};
    spec.passes = 4;
    spec.train_p = 0.2;
    spec.train_seed = 11;

    // train-free fixture: save untrained checkpoints for every (model, horizon)
    for (const auto& model : spec.models) {
        for (std::size_t F : spec.horizons) {
            std::unique_ptr<ModelGraph> g;
            if (model == "lstm_ed") {
                g = build_lstm_ed(6, F, spec.train_p, spec.train_seed, {5, 5});
            } else {
                g = build_cnn1d(6, F, spec.train_p, spec.train_seed, {4, 3, 3, 3, 2});
            }
            const std::string path =
                (dir.path / checkpoint_name(model, 6, F, spec.train_p, spec.train_seed)).string();
            save_checkpoint(*g, ds.stats, ds.dt, spec.train_seed, {}, path);
        }
    }

    auto reports = run_sweep(dir.path.string(), ds, spec);
    REQUIRE(reports.size() == 2 * 2 * 2);
    std::size_t lstm_rows = 0;
    for (const auto& r : reports) {
        CHECK(r.trajectory_count == ds.test.size());
        CHECK(r.mc_passes == 4);
        if (r.model == "lstm_ed") ++lstm_rows;
    }
    CHECK(lstm_rows == 4);

    // removing one checkpoint aborts before any evaluation, naming the gap
    const std::string removed =
        (dir.path / checkpoint_name("cnn1d", 6, 6, spec.train_p, spec.train_seed)).string();
    fs::remove(removed);
    try {
        run_sweep(dir.path.string(), ds, spec);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("cnn1d_T6_F6") != std::string::npos);
    }
}

TEST_CASE("cli smoke: bad arguments exit with the usage code") {
    const char* cli = std::getenv("PEDCAST_CLI");
    if (cli == nullptr) return;  // only wired up under ctest

    const std::string quiet = " >/dev/null 2>&1";
    CHECK(WEXITSTATUS(std::system((std::string(cli) + " --help" + quiet).c_str())) == 0);
    CHECK(WEXITSTATUS(std::system(
              (std::string(cli) + " train --model transformer --data /nope --out /tmp" + quiet)
                  .c_str())) != 0);
    CHECK(WEXITSTATUS(std::system((std::string(cli) + " no-such-command" + quiet).c_str())) != 0);
}
