#include "pedcast/model.hpp"

#include <algorithm>
#include <cmath>

namespace pedcast {

ArchitectureId architecture_from_string(const std::string& s) {
    if (s == "lstm_ed") return ArchitectureId::LstmEd;
    if (s == "cnn1d") return ArchitectureId::Cnn1d;
    if (s == "cnn_lstm") return ArchitectureId::CnnLstm;
    throw ParameterError("unknown architecture: '" + s +
                         "' (expected lstm_ed, cnn1d or cnn_lstm)");
}

std::string to_string(ArchitectureId id) {
    switch (id) {
        case ArchitectureId::LstmEd: return "lstm_ed";
        case ArchitectureId::Cnn1d: return "cnn1d";
        case ArchitectureId::CnnLstm: return "cnn_lstm";
    }
    return "?";
}

// ---- DenseLayer ----

DenseLayer::DenseLayer(std::string name, std::size_t in, std::size_t out, Rng& init_rng)
    : in_(in),
      out_(out),
      weight_(name + ".w", ops::glorot_uniform({in, out}, in, out, init_rng)),
      bias_(name + ".b", Tensor({out})) {}

Tensor DenseLayer::forward(const Tensor& input, ForwardContext&) {
    cached_input_ = input;
    if (input.rank() == 2) {
        return ops::dense_forward(input, weight_.value, bias_.value);
    }
    return ops::time_distributed_dense(input, weight_.value, bias_.value);
}

Tensor DenseLayer::backward(const Tensor& grad_out) {
    if (cached_input_.rank() == 2) {
        return ops::dense_backward(cached_input_, weight_.value, grad_out, weight_.grad,
                                   bias_.grad);
    }
    return ops::time_distributed_dense_backward(cached_input_, weight_.value, grad_out,
                                                weight_.grad, bias_.grad);
}

std::vector<std::size_t> DenseLayer::output_shape(const std::vector<std::size_t>& in) const {
    if (in.empty() || in.back() != in_) {
        throw DimensionError(describe() + ": input shape " + Tensor::shape_string(in) +
                             " does not end in " + std::to_string(in_));
    }
    auto out = in;
    out.back() = out_;
    return out;
}

std::string DenseLayer::describe() const {
    return "dense(" + std::to_string(in_) + "->" + std::to_string(out_) + ")";
}

// ---- ActivationLayer ----

Tensor ActivationLayer::forward(const Tensor& input, ForwardContext&) {
    cached_input_ = input;
    cached_output_ = ops::activation_forward(input, kind_);
    return cached_output_;
}

Tensor ActivationLayer::backward(const Tensor& grad_out) {
    return ops::activation_backward(cached_input_, cached_output_, grad_out, kind_);
}

// ---- DropoutLayer ----

DropoutLayer::DropoutLayer(double p) : p_(p) {
    if (p < 0.0 || p >= 1.0) {
        throw ParameterError("dropout probability must be in [0, 1), got " + std::to_string(p));
    }
}

Tensor DropoutLayer::forward(const Tensor& input, ForwardContext& ctx) {
    const double p = ctx.dropout_override >= 0.0 ? ctx.dropout_override : p_;
    if (!ctx.dropout_active || p == 0.0) {
        mask_used_ = false;
        return input;
    }
    mask_used_ = true;
    mask_ = DropoutMask::draw(input.shape(), 1.0 - p, *ctx.rng);
    return ops::dropout_apply(input, mask_);
}

Tensor DropoutLayer::backward(const Tensor& grad_out) {
    if (!mask_used_) return grad_out;
    return ops::dropout_backward(grad_out, mask_);
}

std::string DropoutLayer::describe() const { return "dropout(" + std::to_string(p_) + ")"; }

// ---- LstmLayer ----

LstmLayer::LstmLayer(std::string name, std::size_t in, std::size_t units, bool return_sequences,
                     Rng& init_rng)
    : in_(in),
      units_(units),
      return_sequences_(return_sequences),
      w_x_(name + ".wx", ops::glorot_uniform({in, 4 * units}, in, units, init_rng)),
      w_h_(name + ".wh",
           ops::uniform_init({units, 4 * units}, 1.0 / std::sqrt(static_cast<double>(units)),
                             init_rng)),
      bias_(name + ".b", Tensor({4 * units})) {}

Tensor LstmLayer::forward(const Tensor& input, ForwardContext&) {
    require_rank(input, 3, describe() + " input");
    const std::size_t batch = input.dim(0);
    const std::size_t steps = input.dim(1);
    if (input.dim(2) != in_) {
        throw DimensionError(describe() + ": input " + input.shape_string());
    }
    cached_batch_ = batch;
    caches_.assign(steps, {});

    Tensor h({batch, units_});
    Tensor c({batch, units_});
    Tensor seq = return_sequences_ ? Tensor({batch, steps, units_}) : Tensor();
    Tensor x_t({batch, in_});
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t f = 0; f < in_; ++f) {
                x_t(b, f) = input(b, t, f);
            }
        }
        auto [h_t, c_t] =
            ops::lstm_cell_forward(x_t, h, c, w_x_.value, w_h_.value, bias_.value, &caches_[t]);
        h = std::move(h_t);
        c = std::move(c_t);
        if (return_sequences_) {
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t u = 0; u < units_; ++u) {
                    seq(b, t, u) = h(b, u);
                }
            }
        }
    }
    return return_sequences_ ? seq : h;
}

Tensor LstmLayer::backward(const Tensor& grad_out) {
    const std::size_t batch = cached_batch_;
    const std::size_t steps = caches_.size();
    Tensor gx({batch, steps, in_});
    Tensor d_h({batch, units_});
    Tensor d_c({batch, units_});
    if (!return_sequences_) {
        d_h = grad_out;
    }
    for (std::size_t t = steps; t-- > 0;) {
        if (return_sequences_) {
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t u = 0; u < units_; ++u) {
                    d_h(b, u) += grad_out(b, t, u);
                }
            }
        }
        auto grads = ops::lstm_cell_backward(caches_[t], w_x_.value, w_h_.value, d_h, d_c,
                                             w_x_.grad, w_h_.grad, bias_.grad);
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t f = 0; f < in_; ++f) {
                gx(b, t, f) = grads.d_input(b, f);
            }
        }
        d_h = std::move(grads.d_h_prev);
        d_c = std::move(grads.d_c_prev);
    }
    return gx;
}

std::vector<std::size_t> LstmLayer::output_shape(const std::vector<std::size_t>& in) const {
    if (in.size() != 3 || in[2] != in_) {
        throw DimensionError(describe() + ": input shape " + Tensor::shape_string(in));
    }
    if (return_sequences_) return {in[0], in[1], units_};
    return {in[0], units_};
}

std::string LstmLayer::describe() const {
    return "lstm(" + std::to_string(in_) + "->" + std::to_string(units_) +
           (return_sequences_ ? ", seq)" : ")");
}

// ---- CausalConv1dLayer ----

CausalConv1dLayer::CausalConv1dLayer(std::string name, std::size_t in_ch, std::size_t out_ch,
                                     std::size_t width, Rng& init_rng)
    : in_ch_(in_ch),
      out_ch_(out_ch),
      width_(width),
      kernel_(name + ".k",
              ops::glorot_uniform({width, in_ch, out_ch}, width * in_ch, out_ch, init_rng)),
      bias_(name + ".b", Tensor({out_ch})) {}

Tensor CausalConv1dLayer::forward(const Tensor& input, ForwardContext&) {
    cached_input_ = input;
    return ops::conv1d_causal_forward(input, kernel_.value, bias_.value);
}

Tensor CausalConv1dLayer::backward(const Tensor& grad_out) {
    return ops::conv1d_causal_backward(cached_input_, kernel_.value, grad_out, kernel_.grad,
                                       bias_.grad);
}

std::vector<std::size_t> CausalConv1dLayer::output_shape(
    const std::vector<std::size_t>& in) const {
    if (in.size() != 3 || in[2] != in_ch_) {
        throw DimensionError(describe() + ": input shape " + Tensor::shape_string(in));
    }
    return {in[0], in[1], out_ch_};
}

std::string CausalConv1dLayer::describe() const {
    return "conv1d_causal(" + std::to_string(in_ch_) + "->" + std::to_string(out_ch_) +
           ", k=" + std::to_string(width_) + ")";
}

// ---- MaxPool1dLayer ----

MaxPool1dLayer::MaxPool1dLayer(std::size_t pool) : pool_(pool) {
    if (pool < 1) throw ParameterError("maxpool: pool size must be >= 1");
}

Tensor MaxPool1dLayer::forward(const Tensor& input, ForwardContext&) {
    cached_input_shape_ = input.shape();
    return ops::maxpool1d_forward(input, pool_, &argmax_);
}

Tensor MaxPool1dLayer::backward(const Tensor& grad_out) {
    return ops::maxpool1d_backward(cached_input_shape_, argmax_, grad_out);
}

std::vector<std::size_t> MaxPool1dLayer::output_shape(const std::vector<std::size_t>& in) const {
    if (in.size() != 3) throw DimensionError("maxpool: input shape " + Tensor::shape_string(in));
    return {in[0], in[1] / pool_, in[2]};
}

// ---- Upsample1dLayer ----

Upsample1dLayer::Upsample1dLayer(std::size_t factor) : factor_(factor) {
    if (factor < 1) throw ParameterError("upsample: factor must be >= 1");
}

Tensor Upsample1dLayer::forward(const Tensor& input, ForwardContext&) {
    cached_input_shape_ = input.shape();
    return ops::upsample1d_forward(input, factor_);
}

Tensor Upsample1dLayer::backward(const Tensor& grad_out) {
    return ops::upsample1d_backward(cached_input_shape_, factor_, grad_out);
}

std::vector<std::size_t> Upsample1dLayer::output_shape(const std::vector<std::size_t>& in) const {
    if (in.size() != 3) throw DimensionError("upsample: input shape " + Tensor::shape_string(in));
    return {in[0], in[1] * factor_, in[2]};
}

// ---- FlattenLayer ----

Tensor FlattenLayer::forward(const Tensor& input, ForwardContext&) {
    cached_input_shape_ = input.shape();
    return input.reshaped({input.dim(0), input.size() / input.dim(0)});
}

Tensor FlattenLayer::backward(const Tensor& grad_out) {
    return grad_out.reshaped(cached_input_shape_);
}

std::vector<std::size_t> FlattenLayer::output_shape(const std::vector<std::size_t>& in) const {
    std::size_t n = 1;
    for (std::size_t i = 1; i < in.size(); ++i) n *= in[i];
    return {in[0], n};
}

// ---- RepeatVectorLayer ----

Tensor RepeatVectorLayer::forward(const Tensor& input, ForwardContext&) {
    require_rank(input, 2, "repeat input");
    const std::size_t batch = input.dim(0);
    const std::size_t d = input.dim(1);
    Tensor y({batch, repeats_, d});
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t r = 0; r < repeats_; ++r) {
            for (std::size_t j = 0; j < d; ++j) {
                y(b, r, j) = input(b, j);
            }
        }
    }
    return y;
}

Tensor RepeatVectorLayer::backward(const Tensor& grad_out) {
    const std::size_t batch = grad_out.dim(0);
    const std::size_t d = grad_out.dim(2);
    Tensor gx({batch, d});
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t r = 0; r < repeats_; ++r) {
            for (std::size_t j = 0; j < d; ++j) {
                gx(b, j) += grad_out(b, r, j);
            }
        }
    }
    return gx;
}

std::vector<std::size_t> RepeatVectorLayer::output_shape(
    const std::vector<std::size_t>& in) const {
    if (in.size() != 2) throw DimensionError("repeat: input shape " + Tensor::shape_string(in));
    return {in[0], repeats_, in[1]};
}

// ---- ReshapeStepsLayer ----

Tensor ReshapeStepsLayer::forward(const Tensor& input, ForwardContext&) {
    return input.reshaped({input.dim(0), steps_, features_});
}

Tensor ReshapeStepsLayer::backward(const Tensor& grad_out) {
    return grad_out.reshaped({grad_out.dim(0), steps_ * features_});
}

std::vector<std::size_t> ReshapeStepsLayer::output_shape(
    const std::vector<std::size_t>& in) const {
    if (in.size() != 2 || in[1] != steps_ * features_) {
        throw DimensionError("reshape: input shape " + Tensor::shape_string(in));
    }
    return {in[0], steps_, features_};
}

// ---- ModelGraph ----

ModelGraph::ModelGraph(ArchitectureId id, std::size_t history_len, std::size_t horizon,
                       double dropout_p)
    : id_(id), history_len_(history_len), horizon_(horizon), dropout_p_(dropout_p) {
    if (history_len < 1 || horizon < 1) {
        throw ParameterError("history length and horizon must be >= 1");
    }
    if (dropout_p < 0.0 || dropout_p >= 1.0) {
        throw ParameterError("dropout probability must be in [0, 1)");
    }
}

void ModelGraph::add_layer(std::unique_ptr<Layer> layer) {
    layers_.push_back(std::move(layer));
}

void ModelGraph::finalize() {
    std::vector<std::size_t> shape = {1, history_len_, kFeatureCount};
    for (const auto& layer : layers_) {
        shape = layer->output_shape(shape);
    }
    const std::vector<std::size_t> expected = {1, horizon_, kFeatureCount};
    if (shape != expected) {
        throw DimensionError("graph output shape " + Tensor::shape_string(shape) +
                             " does not match " + Tensor::shape_string(expected));
    }
    finalized_ = true;
}

std::vector<Parameter*> ModelGraph::parameters() {
    std::vector<Parameter*> out;
    for (auto& layer : layers_) {
        for (Parameter* p : layer->parameters()) {
            out.push_back(p);
        }
    }
    return out;
}

std::size_t ModelGraph::parameter_count() const {
    std::size_t n = 0;
    for (auto& layer : layers_) {
        for (Parameter* p : const_cast<Layer&>(*layer).parameters()) {
            n += p->value.size();
        }
    }
    return n;
}

Tensor ModelGraph::run(const Tensor& input, ForwardContext& ctx) {
    require_rank(input, 3, "model input");
    if (input.dim(1) != history_len_ || input.dim(2) != kFeatureCount) {
        throw DimensionError("model input " + input.shape_string() + ": expected [batch, " +
                             std::to_string(history_len_) + ", " +
                             std::to_string(kFeatureCount) + "]");
    }
    Tensor x = input;
    for (auto& layer : layers_) {
        x = layer->forward(x, ctx);
    }
    return x;
}

Tensor ModelGraph::predict(const Tensor& history, const ForwardMode& mode) {
    if (mode.kind == ForwardMode::Kind::Deterministic) {
        ForwardContext ctx;
        return run(history, ctx);
    }
    if (mode.dropout_probability < 0.0 || mode.dropout_probability >= 1.0) {
        throw ParameterError("stochastic dropout probability must be in [0, 1)");
    }
    Rng rng(mode.seed);
    ForwardContext ctx{true, mode.dropout_probability, &rng};
    return run(history, ctx);
}

Tensor ModelGraph::forward_training(const Tensor& input, Rng& dropout_rng) {
    ForwardContext ctx{true, -1.0, &dropout_rng};
    return run(input, ctx);
}

Tensor ModelGraph::forward_for_gradients(const Tensor& input) {
    ForwardContext ctx;
    return run(input, ctx);
}

void ModelGraph::backward(const Tensor& grad_out) {
    Tensor g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
        g = (*it)->backward(g);
    }
}

void ModelGraph::zero_grads() {
    for (Parameter* p : parameters()) {
        p->zero_grad();
    }
}

// ---- builders ----

std::unique_ptr<ModelGraph> build_lstm_ed(std::size_t history_len, std::size_t horizon, double p,
                                          std::uint64_t init_seed, const LstmEdOptions& opt) {
    Rng rng(init_seed);
    auto g = std::make_unique<ModelGraph>(ArchitectureId::LstmEd, history_len, horizon, p);
    g->add_layer(std::make_unique<LstmLayer>("enc1", kFeatureCount, opt.encoder_units, true, rng));
    g->add_layer(std::make_unique<DropoutLayer>(p));
    g->add_layer(
        std::make_unique<LstmLayer>("enc2", opt.encoder_units, opt.encoder_units, false, rng));
    g->add_layer(std::make_unique<DropoutLayer>(p));
    g->add_layer(std::make_unique<RepeatVectorLayer>(horizon));
    g->add_layer(
        std::make_unique<LstmLayer>("dec", opt.encoder_units, opt.decoder_units, true, rng));
    g->add_layer(std::make_unique<DropoutLayer>(p));
    g->add_layer(std::make_unique<DenseLayer>("out", opt.decoder_units, kFeatureCount, rng));
    g->hyperparameters = {{"encoder_units", opt.encoder_units},
                          {"decoder_units", opt.decoder_units}};
    g->finalize();
    return g;
}

std::unique_ptr<ModelGraph> build_cnn1d(std::size_t history_len, std::size_t horizon, double p,
                                        std::uint64_t init_seed, const Cnn1dOptions& opt) {
    Rng rng(init_seed);
    auto g = std::make_unique<ModelGraph>(ArchitectureId::Cnn1d, history_len, horizon, p);
    g->add_layer(
        std::make_unique<CausalConv1dLayer>("conv1", kFeatureCount, opt.filters1, opt.kernel, rng));
    g->add_layer(std::make_unique<ActivationLayer>(ops::Activation::Relu));
    g->add_layer(std::make_unique<DropoutLayer>(p));
    g->add_layer(
        std::make_unique<CausalConv1dLayer>("conv2", opt.filters1, opt.filters2, opt.kernel, rng));
    g->add_layer(std::make_unique<ActivationLayer>(ops::Activation::Relu));
    g->add_layer(std::make_unique<DropoutLayer>(p));
    g->add_layer(
        std::make_unique<CausalConv1dLayer>("conv3", opt.filters2, opt.filters3, opt.kernel, rng));
    g->add_layer(std::make_unique<ActivationLayer>(ops::Activation::Relu));
    g->add_layer(std::make_unique<MaxPool1dLayer>(opt.pool));
    g->add_layer(std::make_unique<Upsample1dLayer>(opt.pool));
    // The pooled-and-restored sequence is projected onto all horizon steps at
    // once; each output step has its own weights.
    const std::size_t restored = (history_len / opt.pool) * opt.pool;
    g->add_layer(std::make_unique<FlattenLayer>());
    g->add_layer(std::make_unique<DenseLayer>("out", restored * opt.filters3,
                                              horizon * kFeatureCount, rng));
    g->add_layer(std::make_unique<ReshapeStepsLayer>(horizon, kFeatureCount));
    g->hyperparameters = {{"filters1", opt.filters1},
                          {"filters2", opt.filters2},
                          {"filters3", opt.filters3},
                          {"kernel", opt.kernel},
                          {"pool", opt.pool}};
    g->finalize();
    return g;
}

std::unique_ptr<ModelGraph> build_cnn_lstm(std::size_t history_len, std::size_t horizon, double p,
                                           std::uint64_t init_seed, const CnnLstmOptions& opt) {
    Rng rng(init_seed);
    auto g = std::make_unique<ModelGraph>(ArchitectureId::CnnLstm, history_len, horizon, p);
    g->add_layer(
        std::make_unique<CausalConv1dLayer>("conv1", kFeatureCount, opt.filters1, opt.kernel, rng));
    g->add_layer(std::make_unique<ActivationLayer>(ops::Activation::Relu));
    g->add_layer(std::make_unique<DropoutLayer>(p));
    g->add_layer(
        std::make_unique<CausalConv1dLayer>("conv2", opt.filters1, opt.filters2, opt.kernel, rng));
    g->add_layer(std::make_unique<ActivationLayer>(ops::Activation::Relu));
    g->add_layer(std::make_unique<DropoutLayer>(p));
    g->add_layer(std::make_unique<FlattenLayer>());
    g->add_layer(std::make_unique<RepeatVectorLayer>(horizon));
    g->add_layer(std::make_unique<LstmLayer>("dec", history_len * opt.filters2, opt.lstm_units,
                                             true, rng));
    g->add_layer(std::make_unique<DenseLayer>("out", opt.lstm_units, kFeatureCount, rng));
    g->hyperparameters = {{"filters1", opt.filters1},
                          {"filters2", opt.filters2},
                          {"lstm_units", opt.lstm_units},
                          {"kernel", opt.kernel}};
    g->finalize();
    return g;
}

std::unique_ptr<ModelGraph> build_architecture(
    ArchitectureId id, std::size_t history_len, std::size_t horizon, double p,
    std::uint64_t init_seed, const std::vector<std::pair<std::string, std::uint64_t>>& hyper) {
    auto get = [&hyper](const std::string& key, std::uint64_t fallback) {
        for (const auto& [k, v] : hyper) {
            if (k == key) return v;
        }
        return fallback;
    };
    switch (id) {
        case ArchitectureId::LstmEd: {
            LstmEdOptions opt;
            opt.encoder_units = get("encoder_units", opt.encoder_units);
            opt.decoder_units = get("decoder_units", opt.decoder_units);
            return build_lstm_ed(history_len, horizon, p, init_seed, opt);
        }
        case ArchitectureId::Cnn1d: {
            Cnn1dOptions opt;
            opt.filters1 = get("filters1", opt.filters1);
            opt.filters2 = get("filters2", opt.filters2);
            opt.filters3 = get("filters3", opt.filters3);
            opt.kernel = get("kernel", opt.kernel);
            opt.pool = get("pool", opt.pool);
            return build_cnn1d(history_len, horizon, p, init_seed, opt);
        }
        case ArchitectureId::CnnLstm: {
            CnnLstmOptions opt;
            opt.filters1 = get("filters1", opt.filters1);
            opt.filters2 = get("filters2", opt.filters2);
            opt.lstm_units = get("lstm_units", opt.lstm_units);
            opt.kernel = get("kernel", opt.kernel);
            return build_cnn_lstm(history_len, horizon, p, init_seed, opt);
        }
    }
    throw ParameterError("unknown architecture id");
}

// ---- gradient check ----

GradientCheckReport gradient_check(ModelGraph& graph, const Tensor& input, const Tensor& target,
                                   double step, std::size_t max_elements_per_param,
                                   std::uint64_t subsample_seed) {
    graph.zero_grads();
    Tensor pred = graph.forward_for_gradients(input);
    auto loss = ops::mse_loss(pred, target);
    graph.backward(loss.grad);

    std::vector<Tensor> analytic;
    auto params = graph.parameters();
    analytic.reserve(params.size());
    for (Parameter* p : params) {
        analytic.push_back(p->grad);
    }

    auto eval_loss = [&graph, &input, &target]() {
        Tensor pred2 = graph.forward_for_gradients(input);
        return ops::mse_loss(pred2, target).loss;
    };

    Rng rng(subsample_seed);
    GradientCheckReport report;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Parameter* p = params[pi];
        std::vector<std::size_t> indices(p->value.size());
        for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
        if (max_elements_per_param > 0 && indices.size() > max_elements_per_param) {
            rng.shuffle(indices);
            indices.resize(max_elements_per_param);
        }
        GradientCheckEntry entry;
        entry.parameter = p->name;
        entry.checked_elements = indices.size();
        for (std::size_t i : indices) {
            const double orig = p->value[i];
            p->value[i] = orig + step;
            const double lp = eval_loss();
            p->value[i] = orig - step;
            const double lm = eval_loss();
            p->value[i] = orig;
            const double fd = (lp - lm) / (2.0 * step);
            const double g = analytic[pi][i];
            const double abs_err = std::abs(fd - g);
            // below the finite-difference noise floor both routes agree
            const double rel = abs_err < 1e-9 ? 0.0 : abs_err / std::max(std::abs(fd), std::abs(g));
            entry.max_relative_error = std::max(entry.max_relative_error, rel);
        }
        report.max_relative_error = std::max(report.max_relative_error, entry.max_relative_error);
        report.entries.push_back(std::move(entry));
    }
    return report;
}

}  // namespace pedcast
