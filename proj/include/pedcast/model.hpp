#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "pedcast/ops.hpp"
#include "pedcast/rng.hpp"
#include "pedcast/tensor.hpp"

namespace pedcast {

inline constexpr std::size_t kFeatureCount = 4;  // {x, y, u, v}

enum class ArchitectureId : std::uint8_t { LstmEd = 0, Cnn1d = 1, CnnLstm = 2 };

ArchitectureId architecture_from_string(const std::string& s);
std::string to_string(ArchitectureId id);

/// How a forward pass treats dropout layers.
struct ForwardMode {
    enum class Kind { Deterministic, Stochastic };
    Kind kind = Kind::Deterministic;
    double dropout_probability = 0.0;  // stochastic only; overrides the built-in p
    std::uint64_t seed = 0;

    static ForwardMode deterministic() { return {}; }
    static ForwardMode stochastic(double p, std::uint64_t seed) {
        return {Kind::Stochastic, p, seed};
    }
};

/// Per-pass state handed down the layer chain.
struct ForwardContext {
    bool dropout_active = false;
    double dropout_override = -1.0;  // < 0 means use each layer's built-in p
    Rng* rng = nullptr;
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& input, ForwardContext& ctx) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual std::vector<Parameter*> parameters() { return {}; }
    virtual std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const = 0;
    virtual std::string describe() const = 0;
};

/// Dense over the last axis; accepts [batch, in] or [batch, T, in]
/// (the latter is the time-distributed application).
class DenseLayer : public Layer {
public:
    DenseLayer(std::string name, std::size_t in, std::size_t out, Rng& init_rng);
    Tensor forward(const Tensor& input, ForwardContext& ctx) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
    std::string describe() const override;

private:
    std::size_t in_, out_;
    Parameter weight_, bias_;
    Tensor cached_input_;
};

class ActivationLayer : public Layer {
public:
    explicit ActivationLayer(ops::Activation kind) : kind_(kind) {}
    Tensor forward(const Tensor& input, ForwardContext& ctx) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override {
        return in;
    }
    std::string describe() const override { return "activation(" + ops::to_string(kind_) + ")"; }

private:
    ops::Activation kind_;
    Tensor cached_input_, cached_output_;
};

class DropoutLayer : public Layer {
public:
    explicit DropoutLayer(double p);
    Tensor forward(const Tensor& input, ForwardContext& ctx) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override {
        return in;
    }
    std::string describe() const override;
    double probability() const { return p_; }

private:
    double p_;
    bool mask_used_ = false;
    DropoutMask mask_;
};

class LstmLayer : public Layer {
public:
    LstmLayer(std::string name, std::size_t in, std::size_t units, bool return_sequences,
              Rng& init_rng);
    Tensor forward(const Tensor& input, ForwardContext& ctx) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<Parameter*> parameters() override { return {&w_x_, &w_h_, &bias_}; }
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
    std::string describe() const override;

private:
    std::size_t in_, units_;
    bool return_sequences_;
    Parameter w_x_, w_h_, bias_;
    std::vector<ops::LstmCellCache> caches_;
    std::size_t cached_batch_ = 0;
};

class CausalConv1dLayer : public Layer {
public:
    CausalConv1dLayer(std::string name, std::size_t in_ch, std::size_t out_ch, std::size_t width,
                      Rng& init_rng);
    Tensor forward(const Tensor& input, ForwardContext& ctx) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<Parameter*> parameters() override { return {&kernel_, &bias_}; }
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
    std::string describe() const override;

private:
    std::size_t in_ch_, out_ch_, width_;
    Parameter kernel_, bias_;
    Tensor cached_input_;
};

class MaxPool1dLayer : public Layer {
public:
    explicit MaxPool1dLayer(std::size_t pool);
    Tensor forward(const Tensor& input, ForwardContext& ctx) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
    std::string describe() const override { return "maxpool1d(" + std::to_string(pool_) + ")"; }

private:
    std::size_t pool_;
    std::vector<std::size_t> cached_input_shape_;
    std::vector<std::size_t> argmax_;
};

class Upsample1dLayer : public Layer {
public:
    explicit Upsample1dLayer(std::size_t factor);
    Tensor forward(const Tensor& input, ForwardContext& ctx) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
    std::string describe() const override { return "upsample1d(" + std::to_string(factor_) + ")"; }

private:
    std::size_t factor_;
    std::vector<std::size_t> cached_input_shape_;
};

class FlattenLayer : public Layer {
public:
    Tensor forward(const Tensor& input, ForwardContext& ctx) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
    std::string describe() const override { return "flatten"; }

private:
    std::vector<std::size_t> cached_input_shape_;
};

/// [batch, d] -> [batch, repeats, d]; backward sums over the repeats.
class RepeatVectorLayer : public Layer {
public:
    explicit RepeatVectorLayer(std::size_t repeats) : repeats_(repeats) {}
    Tensor forward(const Tensor& input, ForwardContext& ctx) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
    std::string describe() const override { return "repeat(" + std::to_string(repeats_) + ")"; }

private:
    std::size_t repeats_;
};

/// [batch, steps*features] -> [batch, steps, features].
class ReshapeStepsLayer : public Layer {
public:
    ReshapeStepsLayer(std::size_t steps, std::size_t features)
        : steps_(steps), features_(features) {}
    Tensor forward(const Tensor& input, ForwardContext& ctx) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
    std::string describe() const override {
        return "reshape(" + std::to_string(steps_) + "x" + std::to_string(features_) + ")";
    }

private:
    std::size_t steps_, features_;
};

struct LstmEdOptions {
    std::size_t encoder_units = 64;
    std::size_t decoder_units = 64;
};

struct Cnn1dOptions {
    std::size_t filters1 = 128;
    std::size_t filters2 = 64;
    std::size_t filters3 = 64;
    std::size_t kernel = 5;
    std::size_t pool = 2;
};

struct CnnLstmOptions {
    std::size_t filters1 = 128;
    std::size_t filters2 = 64;
    std::size_t lstm_units = 64;
    std::size_t kernel = 5;
};

/// Ordered layer chain plus its hyperparameters; shapes are chain-checked at
/// construction.
class ModelGraph {
public:
    ModelGraph(ArchitectureId id, std::size_t history_len, std::size_t horizon, double dropout_p);

    ArchitectureId architecture() const { return id_; }
    std::size_t history_len() const { return history_len_; }
    std::size_t horizon() const { return horizon_; }
    double dropout_probability() const { return dropout_p_; }

    void add_layer(std::unique_ptr<Layer> layer);
    void finalize();  // validates the [T,4] -> [F,4] shape chain

    std::vector<Parameter*> parameters();
    std::size_t parameter_count() const;
    const std::vector<std::unique_ptr<Layer>>& layers() const { return layers_; }

    /// Deterministic or stochastic inference on [batch, T, 4].
    Tensor predict(const Tensor& history, const ForwardMode& mode);

    /// Training-time pass (dropout active with each layer's built-in p);
    /// caches activations for backward().
    Tensor forward_training(const Tensor& input, Rng& dropout_rng);

    /// Deterministic pass that still populates caches (for gradient checks).
    Tensor forward_for_gradients(const Tensor& input);

    void backward(const Tensor& grad_out);
    void zero_grads();

    /// Hyperparameters recorded in the checkpoint header, enough to rebuild.
    std::vector<std::pair<std::string, std::uint64_t>> hyperparameters;

private:
    Tensor run(const Tensor& input, ForwardContext& ctx);

    ArchitectureId id_;
    std::size_t history_len_, horizon_;
    double dropout_p_;
    std::vector<std::unique_ptr<Layer>> layers_;
    bool finalized_ = false;
};

std::unique_ptr<ModelGraph> build_lstm_ed(std::size_t history_len, std::size_t horizon, double p,
                                          std::uint64_t init_seed, const LstmEdOptions& opt = {});
std::unique_ptr<ModelGraph> build_cnn1d(std::size_t history_len, std::size_t horizon, double p,
                                        std::uint64_t init_seed, const Cnn1dOptions& opt = {});
std::unique_ptr<ModelGraph> build_cnn_lstm(std::size_t history_len, std::size_t horizon, double p,
                                           std::uint64_t init_seed, const CnnLstmOptions& opt = {});

/// Rebuild from an architecture id plus the hyperparameter list a checkpoint
/// header carries.
std::unique_ptr<ModelGraph> build_architecture(
    ArchitectureId id, std::size_t history_len, std::size_t horizon, double p,
    std::uint64_t init_seed, const std::vector<std::pair<std::string, std::uint64_t>>& hyper);

struct GradientCheckEntry {
    std::string parameter;
    double max_relative_error = 0.0;
    std::size_t checked_elements = 0;
};

struct GradientCheckReport {
    std::vector<GradientCheckEntry> entries;
    double max_relative_error = 0.0;
};

/// Central finite differences on every parameter element (random subsample
/// above `max_elements_per_param`) against the analytic gradient, in
/// deterministic mode.
GradientCheckReport gradient_check(ModelGraph& graph, const Tensor& input, const Tensor& target,
                                   double step = 1e-5, std::size_t max_elements_per_param = 0,
                                   std::uint64_t subsample_seed = 0);

}  // namespace pedcast
