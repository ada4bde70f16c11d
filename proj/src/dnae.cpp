#include "ztseg/dnae.hpp"

#include <cmath>

#include "ztseg/rng.hpp"

namespace ztseg {

namespace {

Matrix apply_activation(const Matrix& z, Activation act) {
    if (act == Activation::Linear) return z;
    return z.unaryExpr([](double v) { return v > 0.0 ? v : kLeakyReluSlope * v; });
}

Matrix activation_grad(const Matrix& z, Activation act) {
    if (act == Activation::Linear) return Matrix::Ones(z.rows(), z.cols());
    return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : kLeakyReluSlope; });
}

void check_width(const ModelParams& params, const Matrix& batch) {
    require(batch.cols() == params.input_dim(),
            "batch width " + std::to_string(batch.cols()) + " does not match model input dim " +
                std::to_string(params.input_dim()));
}

}  // namespace

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto* half : {&encoder, &decoder})
        for (const auto& l : *half)
            n += static_cast<std::size_t>(l.W.size() + l.b.size());
    return n;
}

Vector ModelParams::flatten() const {
    Vector flat(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index at = 0;
    for (const auto* half : {&encoder, &decoder}) {
        for (const auto& l : *half) {
            for (Eigen::Index j = 0; j < l.W.cols(); ++j)
                for (Eigen::Index i = 0; i < l.W.rows(); ++i) flat[at++] = l.W(i, j);
            for (Eigen::Index i = 0; i < l.b.size(); ++i) flat[at++] = l.b[i];
        }
    }
    return flat;
}

void ModelParams::unflatten(const Vector& flat) {
    require(flat.size() == static_cast<Eigen::Index>(parameter_count()),
            "unflatten: size mismatch");
    Eigen::Index at = 0;
    for (auto* half : {&encoder, &decoder}) {
        for (auto& l : *half) {
            for (Eigen::Index j = 0; j < l.W.cols(); ++j)
                for (Eigen::Index i = 0; i < l.W.rows(); ++i) l.W(i, j) = flat[at++];
            for (Eigen::Index i = 0; i < l.b.size(); ++i) l.b[i] = flat[at++];
        }
    }
}

void ModelParams::axpy(double a, const ModelParams& other) {
    auto add_half = [a](std::vector<Layer>& dst, const std::vector<Layer>& src) {
        require(dst.size() == src.size(), "axpy: layer count mismatch");
        for (std::size_t i = 0; i < dst.size(); ++i) {
            dst[i].W += a * src[i].W;
            dst[i].b += a * src[i].b;
        }
    };
    add_half(encoder, other.encoder);
    add_half(decoder, other.decoder);
}

void ModelParams::scale(double a) {
    for (auto* half : {&encoder, &decoder})
        for (auto& l : *half) {
            l.W *= a;
            l.b *= a;
        }
}

void ModelParams::set_zero() {
    for (auto* half : {&encoder, &decoder})
        for (auto& l : *half) {
            l.W.setZero();
            l.b.setZero();
        }
}

ModelParams init_model(Eigen::Index input_dim, Eigen::Index latent_dim,
                       const std::vector<Eigen::Index>& encoder_hidden,
                       const std::vector<Eigen::Index>& decoder_hidden, std::uint64_t seed) {
    require(input_dim > 0 && latent_dim > 0, "init_model: dims must be positive");
    Rng rng(seed);
    auto make_layer = [&rng](Eigen::Index in, Eigen::Index out, Activation act) {
        Layer l;
        const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
        l.W.resize(in, out);
        for (Eigen::Index j = 0; j < out; ++j)
            for (Eigen::Index i = 0; i < in; ++i) l.W(i, j) = rng.uniform(-bound, bound);
        l.b = Vector::Zero(out);
        l.act = act;
        return l;
    };

    ModelParams params;
    Eigen::Index prev = input_dim;
    for (Eigen::Index h : encoder_hidden) {
        params.encoder.push_back(make_layer(prev, h, Activation::LeakyRelu));
        prev = h;
    }
    params.encoder.push_back(make_layer(prev, latent_dim, Activation::Linear));
    prev = latent_dim;
    for (Eigen::Index h : decoder_hidden) {
        params.decoder.push_back(make_layer(prev, h, Activation::LeakyRelu));
        prev = h;
    }
    params.decoder.push_back(make_layer(prev, input_dim, Activation::Linear));
    return params;
}

ForwardResult forward(const ModelParams& params, const Matrix& batch) {
    check_width(params, batch);
    Matrix h = batch;
    for (const auto& l : params.encoder)
        h = apply_activation((h * l.W).rowwise() + l.b.transpose(), l.act);
    ForwardResult out;
    out.latent = h;
    for (const auto& l : params.decoder)
        h = apply_activation((h * l.W).rowwise() + l.b.transpose(), l.act);
    out.recon = h;
    return out;
}

Vector reconstruction_error(const ModelParams& params, const Matrix& rows) {
    const Matrix recon = forward(params, rows).recon;
    const Matrix diff = rows - recon;
    return diff.rowwise().squaredNorm() / static_cast<double>(rows.cols());
}

double mean_reconstruction_error(const ModelParams& params, const Matrix& rows) {
    if (rows.rows() == 0) return 0.0;
    return reconstruction_error(params, rows).mean();
}

ModelParams loss_gradient(const ModelParams& params, const Matrix& batch, double* loss_out) {
    check_width(params, batch);
    const Eigen::Index n_layers =
        static_cast<Eigen::Index>(params.encoder.size() + params.decoder.size());
    std::vector<const Layer*> layers;
    layers.reserve(static_cast<std::size_t>(n_layers));
    for (const auto& l : params.encoder) layers.push_back(&l);
    for (const auto& l : params.decoder) layers.push_back(&l);

    // forward pass, keeping pre-activations and inputs per layer
    std::vector<Matrix> inputs;   // input to layer i
    std::vector<Matrix> preacts;  // z_i before activation
    inputs.reserve(layers.size());
    preacts.reserve(layers.size());
    Matrix h = batch;
    for (const auto* l : layers) {
        inputs.push_back(h);
        Matrix z = (h * l->W).rowwise() + l->b.transpose();
        preacts.push_back(z);
        h = apply_activation(z, l->act);
    }

    const double batch_n = static_cast<double>(batch.rows());
    const double d = static_cast<double>(batch.cols());
    const Matrix residual = h - batch; // recon - x
    if (loss_out) *loss_out = residual.squaredNorm() / (batch_n * d);

    ModelParams grad = params;
    grad.set_zero();
    std::vector<Layer*> grad_layers;
    for (auto& l : grad.encoder) grad_layers.push_back(&l);
    for (auto& l : grad.decoder) grad_layers.push_back(&l);

    // dL/drecon = 2 (recon - x) / (B * d)
    Matrix delta = (2.0 / (batch_n * d)) * residual;
    for (int i = static_cast<int>(layers.size()) - 1; i >= 0; --i) {
        const auto* l = layers[static_cast<std::size_t>(i)];
        delta = delta.cwiseProduct(activation_grad(preacts[static_cast<std::size_t>(i)], l->act));
        grad_layers[static_cast<std::size_t>(i)]->W =
            inputs[static_cast<std::size_t>(i)].transpose() * delta;
        grad_layers[static_cast<std::size_t>(i)]->b = delta.colwise().sum();
        if (i > 0) delta = (delta * l->W.transpose()).eval();
    }
    return grad;
}

void TrainConfig::validate() const {
    require(local_epochs > 0, "train config: local_epochs must be positive");
    require(batch_size > 0, "train config: batch_size must be positive");
    require(rounds >= 0, "train config: rounds must be nonnegative");
    require(client_lr >= 0.0, "train config: client_lr must be nonnegative");
    require(server_lr >= 0.0, "train config: server_lr must be nonnegative");
    require(server_momentum >= 0.0 && server_momentum < 1.0,
            "train config: server_momentum must be in [0,1)");
    require(participation > 0.0 && participation <= 1.0,
            "train config: participation must be in (0,1]");
}

namespace {

struct AdamState {
    ModelParams m, v;
    int step = 0;
    explicit AdamState(const ModelParams& shape) : m(shape), v(shape) {
        m.set_zero();
        v.set_zero();
    }
};

void adam_step(ModelParams& params, const ModelParams& grad, AdamState& state,
               const TrainConfig& cfg) {
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, state.step);
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, state.step);
    auto update_half = [&](std::vector<Layer>& p, std::vector<Layer>& m, std::vector<Layer>& v,
                           const std::vector<Layer>& g) {
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i].W = cfg.adam_beta1 * m[i].W + (1.0 - cfg.adam_beta1) * g[i].W;
            m[i].b = cfg.adam_beta1 * m[i].b + (1.0 - cfg.adam_beta1) * g[i].b;
            v[i].W = cfg.adam_beta2 * v[i].W + (1.0 - cfg.adam_beta2) * g[i].W.cwiseProduct(g[i].W);
            v[i].b = cfg.adam_beta2 * v[i].b + (1.0 - cfg.adam_beta2) * g[i].b.cwiseProduct(g[i].b);
            p[i].W -= cfg.client_lr *
                      ((m[i].W / bc1).array() / ((v[i].W / bc2).array().sqrt() + cfg.adam_eps))
                          .matrix();
            p[i].b -= cfg.client_lr *
                      ((m[i].b / bc1).array() / ((v[i].b / bc2).array().sqrt() + cfg.adam_eps))
                          .matrix();
        }
    };
    update_half(params.encoder, state.m.encoder, state.v.encoder, grad.encoder);
    update_half(params.decoder, state.m.decoder, state.v.decoder, grad.decoder);
}

}  // namespace

ModelParams local_train(const ModelParams& start, const Matrix& rows, const TrainConfig& cfg,
                        std::uint64_t shuffle_seed, double* final_loss) {
    require(rows.rows() > 0, "local_train: empty shard");
    cfg.validate();

    ModelParams params = start;
    AdamState adam(start);
    Rng rng(shuffle_seed);
    std::vector<int> order(static_cast<std::size_t>(rows.rows()));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    double loss = 0.0;
    for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
        rng.shuffle(order);
        for (Eigen::Index at = 0; at < rows.rows(); at += cfg.batch_size) {
            const Eigen::Index bsz = std::min<Eigen::Index>(cfg.batch_size, rows.rows() - at);
            Matrix batch(bsz, rows.cols());
            for (Eigen::Index i = 0; i < bsz; ++i)
                batch.row(i) = rows.row(order[static_cast<std::size_t>(at + i)]);
            const ModelParams grad = loss_gradient(params, batch, &loss);
            if (!std::isfinite(loss))
                throw DivergenceError("local_train: non-finite loss at epoch " +
                                      std::to_string(epoch));
            if (cfg.client_optimizer == ClientOptimizer::Adam)
                adam_step(params, grad, adam, cfg);
            else
                params.axpy(-cfg.client_lr, grad);
        }
    }
    if (final_loss) *final_loss = loss;
    return params;
}

Matrix encode_all(const ModelParams& params, const Matrix& rows) {
    check_width(params, rows);
    Matrix h = rows;
    for (const auto& l : params.encoder)
        h = apply_activation((h * l.W).rowwise() + l.b.transpose(), l.act);
    return h;
}

}  // namespace ztseg
