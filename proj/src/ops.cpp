#include "pedcast/ops.hpp"

#include <algorithm>
#include <cmath>

namespace pedcast {

DropoutMask DropoutMask::draw(const std::vector<std::size_t>& shape, double keep_probability,
                              Rng& rng) {
    if (keep_probability <= 0.0 || keep_probability > 1.0) {
        throw ParameterError("dropout keep probability must be in (0, 1], got " +
                             std::to_string(keep_probability));
    }
    DropoutMask mask;
    mask.keep_probability = keep_probability;
    mask.keep_flags = Tensor(shape);
    for (double& f : mask.keep_flags.flat()) {
        f = rng.bernoulli(keep_probability) ? 1.0 : 0.0;
    }
    return mask;
}

namespace ops {

void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n) {
    std::fill(c, c + m * n, 0.0);
    matmul_acc(a, b, c, m, k, n);
}

void matmul_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ai[p];
            if (av == 0.0) continue;
            const double* bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                ci[j] += av * bp[j];
            }
        }
    }
}

void matmul_at_b_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                     std::size_t n) {
    // c[m,n] += a[k,m]^T b[k,n]
    for (std::size_t p = 0; p < k; ++p) {
        const double* ap = a + p * m;
        const double* bp = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = ap[i];
            if (av == 0.0) continue;
            double* ci = c + i * n;
            for (std::size_t j = 0; j < n; ++j) {
                ci[j] += av * bp[j];
            }
        }
    }
}

void matmul_a_bt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                     std::size_t n) {
    // c[m,n] += a[m,k] b[n,k]^T
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                acc += ai[p] * bj[p];
            }
            ci[j] += acc;
        }
    }
}

Tensor dense_forward(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    require_rank(input, 2, "dense input");
    require_rank(weight, 2, "dense weight");
    const std::size_t batch = input.dim(0);
    const std::size_t in = input.dim(1);
    const std::size_t out = weight.dim(1);
    if (weight.dim(0) != in) {
        throw DimensionError("dense: input shape " + input.shape_string() +
                             " incompatible with weight " + weight.shape_string());
    }
    require_shape(bias, {out}, "dense bias");
    Tensor y({batch, out});
    matmul(input.data(), weight.data(), y.data(), batch, in, out);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t j = 0; j < out; ++j) {
            y(b, j) += bias[j];
        }
    }
    return y;
}

Tensor dense_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out,
                      Tensor& weight_grad, Tensor& bias_grad) {
    const std::size_t batch = input.dim(0);
    const std::size_t in = input.dim(1);
    const std::size_t out = weight.dim(1);
    require_shape(grad_out, {batch, out}, "dense grad_out");
    Tensor gx({batch, in});
    matmul_a_bt_acc(grad_out.data(), weight.data(), gx.data(), batch, out, in);
    matmul_at_b_acc(input.data(), grad_out.data(), weight_grad.data(), in, batch, out);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t j = 0; j < out; ++j) {
            bias_grad[j] += grad_out(b, j);
        }
    }
    return gx;
}

Tensor time_distributed_dense(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    require_rank(input, 3, "time_distributed_dense input");
    const std::size_t batch = input.dim(0);
    const std::size_t steps = input.dim(1);
    Tensor flat = input.reshaped({batch * steps, input.dim(2)});
    Tensor y = dense_forward(flat, weight, bias);
    return y.reshaped({batch, steps, weight.dim(1)});
}

Tensor time_distributed_dense_backward(const Tensor& input, const Tensor& weight,
                                       const Tensor& grad_out, Tensor& weight_grad,
                                       Tensor& bias_grad) {
    const std::size_t batch = input.dim(0);
    const std::size_t steps = input.dim(1);
    Tensor flat_in = input.reshaped({batch * steps, input.dim(2)});
    Tensor flat_gy = grad_out.reshaped({batch * steps, weight.dim(1)});
    Tensor gx = dense_backward(flat_in, weight, flat_gy, weight_grad, bias_grad);
    return gx.reshaped({batch, steps, input.dim(2)});
}

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::pair<Tensor, Tensor> lstm_cell_forward(const Tensor& x_t, const Tensor& h_prev,
                                            const Tensor& c_prev, const Tensor& w_x,
                                            const Tensor& w_h, const Tensor& bias,
                                            LstmCellCache* cache) {
    require_rank(x_t, 2, "lstm input");
    const std::size_t batch = x_t.dim(0);
    const std::size_t in = x_t.dim(1);
    const std::size_t units = h_prev.dim(1);
    if (w_x.shape() != std::vector<std::size_t>{in, 4 * units} ||
        w_h.shape() != std::vector<std::size_t>{units, 4 * units}) {
        throw DimensionError("lstm: weights " + w_x.shape_string() + "/" + w_h.shape_string() +
                             " inconsistent with input " + x_t.shape_string() + " and state " +
                             h_prev.shape_string());
    }
    require_shape(h_prev, {batch, units}, "lstm h_prev");
    require_shape(c_prev, {batch, units}, "lstm c_prev");
    require_shape(bias, {4 * units}, "lstm bias");

    Tensor z({batch, 4 * units});
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t j = 0; j < 4 * units; ++j) {
            z(b, j) = bias[j];
        }
    }
    matmul_acc(x_t.data(), w_x.data(), z.data(), batch, in, 4 * units);
    matmul_acc(h_prev.data(), w_h.data(), z.data(), batch, units, 4 * units);

    Tensor gi({batch, units}), gf({batch, units}), gg({batch, units}), go({batch, units});
    Tensor c({batch, units}), h({batch, units}), tanh_c({batch, units});
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t u = 0; u < units; ++u) {
            const double i = sigmoid(z(b, u));
            const double f = sigmoid(z(b, units + u));
            const double g = std::tanh(z(b, 2 * units + u));
            const double o = sigmoid(z(b, 3 * units + u));
            const double cv = f * c_prev(b, u) + i * g;
            const double tc = std::tanh(cv);
            gi(b, u) = i;
            gf(b, u) = f;
            gg(b, u) = g;
            go(b, u) = o;
            c(b, u) = cv;
            tanh_c(b, u) = tc;
            h(b, u) = o * tc;
        }
    }
    if (cache) {
        cache->input = x_t;
        cache->h_prev = h_prev;
        cache->c_prev = c_prev;
        cache->gate_i = gi;
        cache->gate_f = gf;
        cache->gate_g = gg;
        cache->gate_o = go;
        cache->c = c;
        cache->tanh_c = tanh_c;
    }
    return {h, c};
}

LstmCellGrads lstm_cell_backward(const LstmCellCache& cache, const Tensor& w_x, const Tensor& w_h,
                                 const Tensor& d_h, const Tensor& d_c, Tensor& w_x_grad,
                                 Tensor& w_h_grad, Tensor& bias_grad) {
    const std::size_t batch = cache.input.dim(0);
    const std::size_t in = cache.input.dim(1);
    const std::size_t units = cache.h_prev.dim(1);

    Tensor dz({batch, 4 * units});
    Tensor d_c_prev({batch, units});
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t u = 0; u < units; ++u) {
            const double i = cache.gate_i(b, u);
            const double f = cache.gate_f(b, u);
            const double g = cache.gate_g(b, u);
            const double o = cache.gate_o(b, u);
            const double tc = cache.tanh_c(b, u);
            const double dh = d_h(b, u);
            const double dc = d_c(b, u) + dh * o * (1.0 - tc * tc);
            const double d_o = dh * tc;
            const double d_i = dc * g;
            const double d_f = dc * cache.c_prev(b, u);
            const double d_g = dc * i;
            d_c_prev(b, u) = dc * f;
            dz(b, u) = d_i * i * (1.0 - i);
            dz(b, units + u) = d_f * f * (1.0 - f);
            dz(b, 2 * units + u) = d_g * (1.0 - g * g);
            dz(b, 3 * units + u) = d_o * o * (1.0 - o);
        }
    }

    LstmCellGrads grads;
    grads.d_input = Tensor({batch, in});
    grads.d_h_prev = Tensor({batch, units});
    grads.d_c_prev = std::move(d_c_prev);
    matmul_a_bt_acc(dz.data(), w_x.data(), grads.d_input.data(), batch, 4 * units, in);
    matmul_a_bt_acc(dz.data(), w_h.data(), grads.d_h_prev.data(), batch, 4 * units, units);
    matmul_at_b_acc(cache.input.data(), dz.data(), w_x_grad.data(), in, batch, 4 * units);
    matmul_at_b_acc(cache.h_prev.data(), dz.data(), w_h_grad.data(), units, batch, 4 * units);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t j = 0; j < 4 * units; ++j) {
            bias_grad[j] += dz(b, j);
        }
    }
    return grads;
}

Tensor conv1d_causal_forward(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
    require_rank(input, 3, "conv1d input");
    require_rank(kernel, 3, "conv1d kernel");
    const std::size_t batch = input.dim(0);
    const std::size_t steps = input.dim(1);
    const std::size_t in_ch = input.dim(2);
    const std::size_t width = kernel.dim(0);
    const std::size_t out_ch = kernel.dim(2);
    if (kernel.dim(1) != in_ch) {
        throw DimensionError("conv1d: input channels " + input.shape_string() +
                             " do not match kernel " + kernel.shape_string());
    }
    require_shape(bias, {out_ch}, "conv1d bias");

    Tensor y({batch, steps, out_ch});
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < steps; ++t) {
            for (std::size_t oc = 0; oc < out_ch; ++oc) {
                y(b, t, oc) = bias[oc];
            }
            for (std::size_t j = 0; j < width && j <= t; ++j) {
                const std::size_t src = t - j;
                for (std::size_t ic = 0; ic < in_ch; ++ic) {
                    const double xv = input(b, src, ic);
                    if (xv == 0.0) continue;
                    for (std::size_t oc = 0; oc < out_ch; ++oc) {
                        y(b, t, oc) += xv * kernel(j, ic, oc);
                    }
                }
            }
        }
    }
    return y;
}

Tensor conv1d_causal_backward(const Tensor& input, const Tensor& kernel, const Tensor& grad_out,
                              Tensor& kernel_grad, Tensor& bias_grad) {
    const std::size_t batch = input.dim(0);
    const std::size_t steps = input.dim(1);
    const std::size_t in_ch = input.dim(2);
    const std::size_t width = kernel.dim(0);
    const std::size_t out_ch = kernel.dim(2);
    require_shape(grad_out, {batch, steps, out_ch}, "conv1d grad_out");

    Tensor gx({batch, steps, in_ch});
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < steps; ++t) {
            for (std::size_t oc = 0; oc < out_ch; ++oc) {
                const double gy = grad_out(b, t, oc);
                if (gy == 0.0) continue;
                bias_grad[oc] += gy;
                for (std::size_t j = 0; j < width && j <= t; ++j) {
                    const std::size_t src = t - j;
                    for (std::size_t ic = 0; ic < in_ch; ++ic) {
                        gx(b, src, ic) += gy * kernel(j, ic, oc);
                        kernel_grad(j, ic, oc) += gy * input(b, src, ic);
                    }
                }
            }
        }
    }
    return gx;
}

Tensor maxpool1d_forward(const Tensor& input, std::size_t pool, std::vector<std::size_t>* argmax) {
    if (pool < 1) {
        throw ParameterError("maxpool: pool size must be >= 1");
    }
    require_rank(input, 3, "maxpool input");
    const std::size_t batch = input.dim(0);
    const std::size_t steps = input.dim(1);
    const std::size_t ch = input.dim(2);
    const std::size_t out_steps = steps / pool;  // trailing remainder truncated

    Tensor y({batch, out_steps, ch});
    if (argmax) argmax->assign(y.size(), 0);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < out_steps; ++t) {
            for (std::size_t c = 0; c < ch; ++c) {
                std::size_t best = t * pool;
                double best_v = input(b, best, c);
                for (std::size_t j = 1; j < pool; ++j) {
                    const double v = input(b, t * pool + j, c);
                    if (v > best_v) {  // ties keep the earliest index
                        best_v = v;
                        best = t * pool + j;
                    }
                }
                y(b, t, c) = best_v;
                if (argmax) (*argmax)[(b * out_steps + t) * ch + c] = best;
            }
        }
    }
    return y;
}

Tensor maxpool1d_backward(const std::vector<std::size_t>& input_shape,
                          const std::vector<std::size_t>& argmax, const Tensor& grad_out) {
    Tensor gx(input_shape);
    const std::size_t batch = grad_out.dim(0);
    const std::size_t out_steps = grad_out.dim(1);
    const std::size_t ch = grad_out.dim(2);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < out_steps; ++t) {
            for (std::size_t c = 0; c < ch; ++c) {
                const std::size_t src = argmax[(b * out_steps + t) * ch + c];
                gx(b, src, c) += grad_out(b, t, c);
            }
        }
    }
    return gx;
}

Tensor upsample1d_forward(const Tensor& input, std::size_t factor) {
    if (factor < 1) {
        throw ParameterError("upsample: factor must be >= 1");
    }
    require_rank(input, 3, "upsample input");
    const std::size_t batch = input.dim(0);
    const std::size_t steps = input.dim(1);
    const std::size_t ch = input.dim(2);
    Tensor y({batch, steps * factor, ch});
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < steps; ++t) {
            for (std::size_t j = 0; j < factor; ++j) {
                for (std::size_t c = 0; c < ch; ++c) {
                    y(b, t * factor + j, c) = input(b, t, c);
                }
            }
        }
    }
    return y;
}

Tensor upsample1d_backward(const std::vector<std::size_t>& input_shape, std::size_t factor,
                           const Tensor& grad_out) {
    Tensor gx(input_shape);
    const std::size_t batch = input_shape[0];
    const std::size_t steps = input_shape[1];
    const std::size_t ch = input_shape[2];
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < steps; ++t) {
            for (std::size_t j = 0; j < factor; ++j) {
                for (std::size_t c = 0; c < ch; ++c) {
                    gx(b, t, c) += grad_out(b, t * factor + j, c);
                }
            }
        }
    }
    return gx;
}

Tensor dropout_apply(const Tensor& input, const DropoutMask& mask) {
    if (mask.keep_probability <= 0.0 || mask.keep_probability > 1.0) {
        throw ParameterError("dropout keep probability must be in (0, 1]");
    }
    if (!input.same_shape(mask.keep_flags)) {
        throw DimensionError("dropout: mask shape " + mask.keep_flags.shape_string() +
                             " does not match input " + input.shape_string());
    }
    Tensor y(input.shape());
    const double scale = 1.0 / mask.keep_probability;
    for (std::size_t i = 0; i < input.size(); ++i) {
        y[i] = input[i] * mask.keep_flags[i] * scale;
    }
    return y;
}

Tensor dropout_backward(const Tensor& grad_out, const DropoutMask& mask) {
    return dropout_apply(grad_out, mask);
}

Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    if (s == "linear") return Activation::Linear;
    if (s == "sigmoid") return Activation::Sigmoid;
    throw ParameterError("unknown activation: " + s);
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Tanh: return "tanh";
        case Activation::Relu: return "relu";
        case Activation::Linear: return "linear";
        case Activation::Sigmoid: return "sigmoid";
    }
    return "?";
}

Tensor activation_forward(const Tensor& input, Activation kind) {
    Tensor y(input.shape());
    switch (kind) {
        case Activation::Tanh:
            for (std::size_t i = 0; i < input.size(); ++i) y[i] = std::tanh(input[i]);
            break;
        case Activation::Relu:
            for (std::size_t i = 0; i < input.size(); ++i) y[i] = input[i] > 0.0 ? input[i] : 0.0;
            break;
        case Activation::Linear:
            y = input;
            break;
        case Activation::Sigmoid:
            for (std::size_t i = 0; i < input.size(); ++i) y[i] = sigmoid(input[i]);
            break;
    }
    return y;
}

Tensor activation_backward(const Tensor& input, const Tensor& output, const Tensor& grad_out,
                           Activation kind) {
    Tensor gx(input.shape());
    switch (kind) {
        case Activation::Tanh:
            for (std::size_t i = 0; i < input.size(); ++i) {
                gx[i] = grad_out[i] * (1.0 - output[i] * output[i]);
            }
            break;
        case Activation::Relu:
            for (std::size_t i = 0; i < input.size(); ++i) {
                gx[i] = input[i] > 0.0 ? grad_out[i] : 0.0;
            }
            break;
        case Activation::Linear:
            gx = grad_out;
            break;
        case Activation::Sigmoid:
            for (std::size_t i = 0; i < input.size(); ++i) {
                gx[i] = grad_out[i] * output[i] * (1.0 - output[i]);
            }
            break;
    }
    return gx;
}

LossResult mse_loss(const Tensor& pred, const Tensor& target) {
    if (!pred.same_shape(target)) {
        throw DimensionError("mse_loss: shape " + pred.shape_string() + " vs " +
                             target.shape_string());
    }
    LossResult r;
    r.grad = Tensor(pred.shape());
    const double inv = 1.0 / static_cast<double>(pred.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        acc += d * d;
        r.grad[i] = 2.0 * d * inv;
    }
    r.loss = acc * inv;
    return r;
}

void adam_step(Parameter& param, double learning_rate, const AdamConfig& cfg) {
    for (double g : param.grad.flat()) {
        if (!std::isfinite(g)) {
            throw NumericError("non-finite gradient in parameter '" + param.name + "'");
        }
    }
    param.step_count += 1;
    const double t = static_cast<double>(param.step_count);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < param.value.size(); ++i) {
        const double g = param.grad[i];
        param.adam_m[i] = cfg.beta1 * param.adam_m[i] + (1.0 - cfg.beta1) * g;
        param.adam_v[i] = cfg.beta2 * param.adam_v[i] + (1.0 - cfg.beta2) * g * g;
        const double m_hat = param.adam_m[i] / bc1;
        const double v_hat = param.adam_v[i] / bc2;
        param.value[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
}

Tensor glorot_uniform(std::vector<std::size_t> shape, std::size_t fan_in, std::size_t fan_out,
                      Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return uniform_init(std::move(shape), limit, rng);
}

Tensor uniform_init(std::vector<std::size_t> shape, double limit, Rng& rng) {
    Tensor t(std::move(shape));
    for (double& v : t.flat()) {
        v = rng.uniform(-limit, limit);
    }
    return t;
}

}  // namespace ops
}  // namespace pedcast
