#pragma once

#include <cstdint>
#include <vector>

#include "ztseg/types.hpp"

namespace ztseg {

enum class Activation { LeakyRelu, Linear };

struct Layer {
    Matrix W; // in x out
    Vector b; // out
    Activation act = Activation::LeakyRelu;
};

constexpr double kLeakyReluSlope = 0.01;

// Non-symmetric dense autoencoder parameters. Encoder maps d -> p, decoder
// p -> d; hidden layers are LeakyReLU(0.01), the final layer of each half is
// linear.
struct ModelParams {
    std::vector<Layer> encoder;
    std::vector<Layer> decoder;

    Eigen::Index input_dim() const { return encoder.front().W.rows(); }
    Eigen::Index latent_dim() const { return encoder.back().W.cols(); }

    std::size_t parameter_count() const;
    Vector flatten() const;
    void unflatten(const Vector& flat);

    // in-place elementwise arithmetic over all weights and biases
    void axpy(double a, const ModelParams& other); // this += a * other
    void scale(double a);
    void set_zero();
};

// Glorot-uniform initialization for the default topology
// d -> hidden... -> p -> hidden... -> d.
ModelParams init_model(Eigen::Index input_dim, Eigen::Index latent_dim,
                       const std::vector<Eigen::Index>& encoder_hidden,
                       const std::vector<Eigen::Index>& decoder_hidden, std::uint64_t seed);

struct ForwardResult {
    Matrix latent; // n x p
    Matrix recon;  // n x d
};

ForwardResult forward(const ModelParams& params, const Matrix& batch);

// Per-row mean squared reconstruction error, (1/d) * ||x - x_hat||^2.
Vector reconstruction_error(const ModelParams& params, const Matrix& rows);

double mean_reconstruction_error(const ModelParams& params, const Matrix& rows);

// Gradient of the batch loss L = (1/(B*d)) * sum ||x - x_hat||^2 with
// respect to every weight and bias, via backpropagation.
ModelParams loss_gradient(const ModelParams& params, const Matrix& batch, double* loss_out);

enum class ClientOptimizer { Adam, Sgd };

struct TrainConfig {
    int local_epochs = 3;
    int batch_size = 64;
    int rounds = 50;
    ClientOptimizer client_optimizer = ClientOptimizer::Adam;
    double client_lr = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double server_lr = 1.0;
    double server_momentum = 0.9;
    double participation = 0.8;
    std::uint64_t seed = 42;

    void validate() const;
};

// Local client pass: local_epochs epochs of seeded minibatch training.
// Returns the updated parameters and the final batch loss. Throws
// DivergenceError when the loss stops being finite.
ModelParams local_train(const ModelParams& start, const Matrix& rows, const TrainConfig& cfg,
                        std::uint64_t shuffle_seed, double* final_loss = nullptr);

// Encoder-only pass.
Matrix encode_all(const ModelParams& params, const Matrix& rows);

}  // namespace ztseg
