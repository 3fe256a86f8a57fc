#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pedcast/rng.hpp"
#include "pedcast/tensor.hpp"

namespace pedcast {

/// Trainable tensor with its gradient and Adam moment accumulators.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor adam_m;
    Tensor adam_v;
    std::size_t step_count = 0;

    Parameter() = default;
    Parameter(std::string n, Tensor v)
        : name(std::move(n)),
          value(std::move(v)),
          grad(value.shape()),
          adam_m(value.shape()),
          adam_v(value.shape()) {}

    void zero_grad() { grad.fill(0.0); }
};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-7;
};

/// Bernoulli keep mask with inverted-dropout scaling baked into apply().
struct DropoutMask {
    Tensor keep_flags;  // 0/1 per element
    double keep_probability = 1.0;

    static DropoutMask draw(const std::vector<std::size_t>& shape, double keep_probability,
                            Rng& rng);
};

namespace ops {

// C[m,n] = A[m,k] * B[k,n]
void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n);
// C[m,n] += A[m,k] * B[k,n]
void matmul_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                std::size_t n);
// C[m,n] += A[k,m]^T * B[k,n]
void matmul_at_b_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                     std::size_t n);
// C[m,n] += A[m,k] * B[n,k]^T
void matmul_a_bt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                     std::size_t n);

Tensor dense_forward(const Tensor& input, const Tensor& weight, const Tensor& bias);
/// Returns grad wrt input; accumulates into weight/bias grads.
Tensor dense_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out,
                      Tensor& weight_grad, Tensor& bias_grad);

/// Same dense weights applied independently at every time step of [batch, T, in].
Tensor time_distributed_dense(const Tensor& input, const Tensor& weight, const Tensor& bias);
Tensor time_distributed_dense_backward(const Tensor& input, const Tensor& weight,
                                       const Tensor& grad_out, Tensor& weight_grad,
                                       Tensor& bias_grad);

/// Gate activations cached by the LSTM cell forward pass, consumed by backward.
struct LstmCellCache {
    Tensor input;       // [batch, in]
    Tensor h_prev;      // [batch, units]
    Tensor c_prev;      // [batch, units]
    Tensor gate_i;      // sigmoid
    Tensor gate_f;      // sigmoid
    Tensor gate_g;      // tanh candidate
    Tensor gate_o;      // sigmoid
    Tensor c;           // new cell state
    Tensor tanh_c;      // tanh(c)
};

/// Standard LSTM recurrence. Weights: w_x [in, 4*units], w_h [units, 4*units],
/// bias [4*units]; gate order i, f, g, o.
std::pair<Tensor, Tensor> lstm_cell_forward(const Tensor& x_t, const Tensor& h_prev,
                                            const Tensor& c_prev, const Tensor& w_x,
                                            const Tensor& w_h, const Tensor& bias,
                                            LstmCellCache* cache);

struct LstmCellGrads {
    Tensor d_input;
    Tensor d_h_prev;
    Tensor d_c_prev;
};

LstmCellGrads lstm_cell_backward(const LstmCellCache& cache, const Tensor& w_x, const Tensor& w_h,
                                 const Tensor& d_h, const Tensor& d_c, Tensor& w_x_grad,
                                 Tensor& w_h_grad, Tensor& bias_grad);

/// Left-padded convolution: output[t] depends only on input[..t].
/// kernel [k, in_ch, out_ch], input [batch, T, in_ch].
Tensor conv1d_causal_forward(const Tensor& input, const Tensor& kernel, const Tensor& bias);
Tensor conv1d_causal_backward(const Tensor& input, const Tensor& kernel, const Tensor& grad_out,
                              Tensor& kernel_grad, Tensor& bias_grad);

/// Non-overlapping window max; trailing remainder truncated.
Tensor maxpool1d_forward(const Tensor& input, std::size_t pool,
                         std::vector<std::size_t>* argmax);
Tensor maxpool1d_backward(const std::vector<std::size_t>& input_shape,
                          const std::vector<std::size_t>& argmax, const Tensor& grad_out);

/// Nearest-neighbor repetition along the time axis.
Tensor upsample1d_forward(const Tensor& input, std::size_t factor);
Tensor upsample1d_backward(const std::vector<std::size_t>& input_shape, std::size_t factor,
                           const Tensor& grad_out);

Tensor dropout_apply(const Tensor& input, const DropoutMask& mask);
Tensor dropout_backward(const Tensor& grad_out, const DropoutMask& mask);

enum class Activation { Tanh, Relu, Linear, Sigmoid };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

Tensor activation_forward(const Tensor& input, Activation kind);
/// `output` is the cached forward result (tanh/sigmoid derivatives reuse it).
Tensor activation_backward(const Tensor& input, const Tensor& output, const Tensor& grad_out,
                           Activation kind);

struct LossResult {
    double loss = 0.0;
    Tensor grad;  // d loss / d pred
};

LossResult mse_loss(const Tensor& pred, const Tensor& target);

void adam_step(Parameter& param, double learning_rate, const AdamConfig& cfg = {});

// Initializers
Tensor glorot_uniform(std::vector<std::size_t> shape, std::size_t fan_in, std::size_t fan_out,
                      Rng& rng);
Tensor uniform_init(std::vector<std::size_t> shape, double limit, Rng& rng);

}  // namespace ops
}  // namespace pedcast
