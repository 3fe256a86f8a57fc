#include "pedcast/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>

#include "binio.hpp"

namespace pedcast {

namespace {

constexpr char kCheckpointMagic[8] = {'P', 'C', 'K', 'P', '1', '\n', 0, 0};
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void TrainConfig::validate() const {
    if (validation_fraction <= 0.0 || validation_fraction >= 1.0) {
        throw ParameterError("validation fraction must be in (0, 1)");
    }
    if (lr_reduce_factor <= 0.0 || lr_reduce_factor >= 1.0) {
        throw ParameterError("lr reduce factor must be in (0, 1)");
    }
    if (batch_size < 1) throw ParameterError("batch size must be >= 1");
    if (learning_rate <= 0.0) throw ParameterError("learning rate must be positive");
}

EarlyStopDecision early_stopping(const std::vector<double>& val_history, std::size_t patience) {
    EarlyStopDecision d;
    double best = std::numeric_limits<double>::infinity();
    std::size_t streak = 0;
    for (std::size_t e = 0; e < val_history.size(); ++e) {
        if (val_history[e] < best - kImprovementDelta) {
            best = val_history[e];
            d.best_epoch = e + 1;
            streak = 0;
        } else {
            ++streak;
        }
        if (patience > 0 && streak >= patience) {
            d.stop = true;
            return d;
        }
    }
    return d;
}

double reduce_lr_on_plateau(const std::vector<double>& val_history, double initial_lr,
                            std::size_t patience, double factor, double min_lr) {
    double lr = initial_lr;
    double best = std::numeric_limits<double>::infinity();
    std::size_t streak = 0;
    for (double val : val_history) {
        if (val < best - kImprovementDelta) {
            best = val;
            streak = 0;
        } else {
            ++streak;
            if (patience > 0 && streak >= patience) {
                lr = std::max(lr * factor, min_lr);
                streak = 0;
            }
        }
    }
    return lr;
}

namespace {

struct BatchTensors {
    Tensor history;  // [B, T, 4]
    Tensor future;   // [B, F, 4]
};

BatchTensors stack(const std::vector<TrajectorySample>& samples,
                   const std::vector<std::size_t>& indices, std::size_t from, std::size_t to) {
    const std::size_t batch = to - from;
    const auto& first = samples[indices[from]];
    const std::size_t hist_len = first.history.dim(0);
    const std::size_t horizon = first.future.dim(0);
    BatchTensors b{Tensor({batch, hist_len, 4}), Tensor({batch, horizon, 4})};
    for (std::size_t i = 0; i < batch; ++i) {
        const auto& s = samples[indices[from + i]];
        std::copy(s.history.flat().begin(), s.history.flat().end(),
                  b.history.data() + i * hist_len * 4);
        std::copy(s.future.flat().begin(), s.future.flat().end(),
                  b.future.data() + i * horizon * 4);
    }
    return b;
}

double evaluate_mse(ModelGraph& graph, const std::vector<TrajectorySample>& samples,
                    const std::vector<std::size_t>& indices, std::size_t batch_size) {
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t from = 0; from < indices.size(); from += batch_size) {
        const std::size_t to = std::min(from + batch_size, indices.size());
        BatchTensors b = stack(samples, indices, from, to);
        Tensor pred = graph.predict(b.history, ForwardMode::deterministic());
        acc += ops::mse_loss(pred, b.future).loss * static_cast<double>(to - from);
        count += to - from;
    }
    return acc / static_cast<double>(count);
}

std::vector<Tensor> snapshot_values(ModelGraph& graph) {
    std::vector<Tensor> values;
    for (Parameter* p : graph.parameters()) {
        values.push_back(p->value);
    }
    return values;
}

void restore_values(ModelGraph& graph, const std::vector<Tensor>& values) {
    auto params = graph.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
        params[i]->value = values[i];
    }
}

}  // namespace

TrainLog train(ModelGraph& graph, const std::vector<TrajectorySample>& samples,
               const NormalizationStats& stats, const TrainConfig& config) {
    config.validate();
    TrainLog log;
    if (config.epochs == 0 || samples.empty()) return log;

    // Normalize once up front.
    std::vector<TrajectorySample> normalized = samples;
    for (auto& s : normalized) {
        s.history = normalize(s.history, stats);
        s.future = normalize(s.future, stats);
    }

    Rng root(config.seed);
    Rng split_rng = root.derive(1);
    Rng shuffle_rng = root.derive(2);
    Rng dropout_rng = root.derive(3);

    // Validation split at track granularity: last ids of a seeded shuffle.
    std::vector<long long> ids;
    std::map<long long, std::size_t> count_by_id;
    for (const auto& s : normalized) {
        auto [it, inserted] = count_by_id.try_emplace(s.source_id, 0u);
        if (inserted) ids.push_back(s.source_id);
        it->second += 1;
    }
    split_rng.shuffle(ids);
    std::size_t val_count = 0;
    const double val_target = config.validation_fraction * static_cast<double>(normalized.size());
    std::vector<long long> val_ids;
    while (!ids.empty() && static_cast<double>(val_count) < val_target) {
        val_ids.push_back(ids.back());
        val_count += count_by_id[ids.back()];
        ids.pop_back();
    }
    if (ids.empty()) {
        throw DataError("not enough tracks to carve out a validation split");
    }

    std::vector<std::size_t> train_idx, val_idx;
    for (std::size_t i = 0; i < normalized.size(); ++i) {
        const bool in_val = std::find(val_ids.begin(), val_ids.end(), normalized[i].source_id) !=
                            val_ids.end();
        (in_val ? val_idx : train_idx).push_back(i);
    }

    double lr = config.learning_rate;
    std::vector<double> val_history;
    std::vector<Tensor> best_values = snapshot_values(graph);
    double best_val = std::numeric_limits<double>::infinity();
    auto params = graph.parameters();

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        shuffle_rng.shuffle(train_idx);

        double train_acc = 0.0;
        std::size_t seen = 0;
        for (std::size_t from = 0; from < train_idx.size(); from += config.batch_size) {
            const std::size_t to = std::min(from + config.batch_size, train_idx.size());
            BatchTensors b = stack(normalized, train_idx, from, to);
            graph.zero_grads();
            Tensor pred = graph.forward_training(b.history, dropout_rng);
            auto loss = ops::mse_loss(pred, b.future);
            if (!std::isfinite(loss.loss)) {
                throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(from / config.batch_size));
            }
            graph.backward(loss.grad);
            for (Parameter* p : params) {
                ops::adam_step(*p, lr, config.adam);
            }
            train_acc += loss.loss * static_cast<double>(to - from);
            seen += to - from;
        }

        const double val_mse = evaluate_mse(graph, normalized, val_idx, config.batch_size);
        val_history.push_back(val_mse);
        if (val_mse < best_val) {
            best_val = val_mse;
            best_values = snapshot_values(graph);
            log.best_epoch = epoch;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_mse = train_acc / static_cast<double>(seen);
        rec.val_mse = val_mse;
        rec.learning_rate = lr;
        rec.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log.epochs.push_back(rec);

        if (early_stopping(val_history, config.early_stop_patience).stop) {
            log.stopped_early = true;
            break;
        }
        lr = reduce_lr_on_plateau(val_history, config.learning_rate, config.lr_reduce_patience,
                                  config.lr_reduce_factor, config.min_lr);
    }

    restore_values(graph, best_values);
    return log;
}

void write_train_log_csv(const TrainLog& log, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << "epoch,train_mse,val_mse,lr,seconds\n";
    char buf[160];
    for (const auto& e : log.epochs) {
        std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g,%.10g,%.3f\n", e.epoch, e.train_mse,
                      e.val_mse, e.learning_rate, e.seconds);
        os << buf;
    }
    if (!os) throw IoError("write failed: " + path);
}

void save_checkpoint(ModelGraph& graph, const NormalizationStats& stats, double dt,
                     std::uint64_t init_seed, const AdamConfig& adam, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    binio::write_bytes(os, kCheckpointMagic, sizeof(kCheckpointMagic));
    binio::write_pod<std::uint32_t>(os, kCheckpointVersion);
    binio::write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(graph.architecture()));
    binio::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(graph.history_len()));
    binio::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(graph.horizon()));
    binio::write_pod<double>(os, graph.dropout_probability());
    binio::write_pod<double>(os, dt);
    binio::write_pod<std::uint64_t>(os, init_seed);
    binio::write_pod<double>(os, adam.beta1);
    binio::write_pod<double>(os, adam.beta2);
    binio::write_pod<double>(os, adam.epsilon);
    binio::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(graph.hyperparameters.size()));
    for (const auto& [key, value] : graph.hyperparameters) {
        binio::write_string(os, key);
        binio::write_pod<std::uint64_t>(os, value);
    }
    binio::write_doubles(os, stats.mean, 4);
    binio::write_doubles(os, stats.stddev, 4);
    auto params = graph.parameters();
    binio::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
    for (const Parameter* p : params) {
        binio::write_string(os, p->name);
        binio::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(p->value.rank()));
        for (std::size_t d : p->value.shape()) {
            binio::write_pod<std::uint64_t>(os, d);
        }
        binio::write_doubles(os, p->value.data(), p->value.size());
        binio::write_pod<std::uint64_t>(os, p->step_count);
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    char magic[sizeof(kCheckpointMagic)];
    binio::read_bytes(is, magic, sizeof(magic), "magic");
    if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw IoError(path + ": not a checkpoint file");
    }
    const auto version = binio::read_pod<std::uint32_t>(is, "version");
    if (version != kCheckpointVersion) {
        throw IoError(path + ": unsupported checkpoint version " + std::to_string(version));
    }
    const auto arch_raw = binio::read_pod<std::uint8_t>(is, "architecture");
    if (arch_raw > 2) {
        throw IoError(path + ": unknown architecture id " + std::to_string(arch_raw));
    }
    const auto arch = static_cast<ArchitectureId>(arch_raw);
    const auto history_len = binio::read_pod<std::uint32_t>(is, "history length");
    const auto horizon = binio::read_pod<std::uint32_t>(is, "horizon");
    const auto p = binio::read_pod<double>(is, "dropout probability");

    Checkpoint ckpt;
    ckpt.dt = binio::read_pod<double>(is, "dt");
    ckpt.init_seed = binio::read_pod<std::uint64_t>(is, "init seed");
    ckpt.adam.beta1 = binio::read_pod<double>(is, "adam beta1");
    ckpt.adam.beta2 = binio::read_pod<double>(is, "adam beta2");
    ckpt.adam.epsilon = binio::read_pod<double>(is, "adam epsilon");

    const auto n_hyper = binio::read_pod<std::uint32_t>(is, "hyperparameter count");
    std::vector<std::pair<std::string, std::uint64_t>> hyper;
    for (std::uint32_t i = 0; i < n_hyper; ++i) {
        std::string key = binio::read_string(is, "hyperparameter key");
        const auto value = binio::read_pod<std::uint64_t>(is, "hyperparameter value");
        hyper.emplace_back(std::move(key), value);
    }
    binio::read_doubles(is, ckpt.stats.mean, 4, "stats mean");
    binio::read_doubles(is, ckpt.stats.stddev, 4, "stats stddev");

    ckpt.graph = build_architecture(arch, history_len, horizon, p, ckpt.init_seed, hyper);

    const auto n_params = binio::read_pod<std::uint32_t>(is, "parameter count");
    auto params = ckpt.graph->parameters();
    if (n_params != params.size()) {
        throw IoError(path + ": parameter count mismatch (" + std::to_string(n_params) + " vs " +
                      std::to_string(params.size()) + ")");
    }
    for (Parameter* param : params) {
        const std::string name = binio::read_string(is, "parameter name");
        if (name != param->name) {
            throw IoError(path + ": parameter order mismatch ('" + name + "' vs '" + param->name +
                          "')");
        }
        const auto rank = binio::read_pod<std::uint32_t>(is, "parameter rank");
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) {
            d = static_cast<std::size_t>(binio::read_pod<std::uint64_t>(is, "parameter dim"));
        }
        if (shape != param->value.shape()) {
            throw IoError(path + ": shape mismatch for parameter '" + name + "'");
        }
        binio::read_doubles(is, param->value.data(), param->value.size(), "parameter data");
        param->step_count =
            static_cast<std::size_t>(binio::read_pod<std::uint64_t>(is, "step count"));
    }
    return ckpt;
}

}  // namespace pedcast
