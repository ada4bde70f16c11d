#include "ztseg/federated.hpp"

#include <cmath>

#include "ztseg/rng.hpp"

namespace ztseg {

namespace {

Matrix gather_rows(const Matrix& src, const IndexList& idx) {
    Matrix out(static_cast<Eigen::Index>(idx.size()), src.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = src.row(idx[i]);
    return out;
}

}  // namespace

FederatedData build_federated_data(const FlowTable& table,
                                   const std::vector<ClientShard>& shards,
                                   const IndexList& val_idx) {
    const bool labeled = table.sidecar.has_labels();
    FederatedData data;
    data.client_rows.reserve(shards.size());
    for (const auto& shard : shards) {
        IndexList keep;
        keep.reserve(shard.row_indices.size());
        for (int r : shard.row_indices) {
            if (!labeled || table.sidecar.label[static_cast<std::size_t>(r)] == 0)
                keep.push_back(r);
        }
        data.client_rows.push_back(gather_rows(table.features, keep));
    }
    IndexList val_b, val_a;
    for (int r : val_idx) {
        if (labeled && table.sidecar.label[static_cast<std::size_t>(r)] == 1)
            val_a.push_back(r);
        else
            val_b.push_back(r);
    }
    data.val_benign = gather_rows(table.features, val_b);
    data.val_attack = gather_rows(table.features, val_a);
    return data;
}

void server_update(ModelParams& global, ModelParams& velocity,
                   const std::vector<std::pair<ModelParams, double>>& updates,
                   const TrainConfig& cfg) {
    require(!updates.empty(), "server_update: no client updates");
    double total_n = 0.0;
    for (const auto& [params, n] : updates) {
        require(n > 0.0, "server_update: nonpositive client weight");
        total_n += n;
    }
    ModelParams average = global;
    average.set_zero();
    for (const auto& [params, n] : updates) average.axpy(n / total_n, params);

    // pseudo-gradient step: v <- momentum*v + (global - average); global -= lr*v
    ModelParams delta = global;
    delta.axpy(-1.0, average);
    velocity.scale(cfg.server_momentum);
    velocity.axpy(1.0, delta);
    global.axpy(-cfg.server_lr, velocity);
}

RoundLog fedavg_round(ModelParams& global, ModelParams& velocity, const FederatedData& data,
                      const TrainConfig& cfg, std::uint64_t round_seed, int round_index) {
    cfg.validate();
    const int k = static_cast<int>(data.client_rows.size());
    require(k >= 1, "fedavg_round: no clients");
    const int m = std::max(1, static_cast<int>(std::ceil(cfg.participation * k)));

    Rng rng(round_seed);
    const std::vector<int> sampled = rng.sample_without_replacement(k, m);

    RoundLog log;
    log.round = round_index;
    log.participants = sampled;

    double total_n = 0.0;
    std::vector<std::pair<ModelParams, double>> updates;
    for (int c : sampled) {
        const Matrix& rows = data.client_rows[static_cast<std::size_t>(c)];
        if (rows.rows() == 0) continue;
        const std::uint64_t client_seed = derive_seed(round_seed, static_cast<std::uint64_t>(c));
        try {
            ModelParams trained = local_train(global, rows, cfg, client_seed);
            updates.emplace_back(std::move(trained), static_cast<double>(rows.rows()));
            total_n += static_cast<double>(rows.rows());
        } catch (const DivergenceError&) {
            // diverging client update discarded
        }
    }
    if (updates.empty() || total_n <= 0.0)
        throw std::runtime_error("fedavg_round: no usable client updates (all sampled shards "
                                 "empty or diverged)");
    server_update(global, velocity, updates, cfg);

    // round diagnostics on the updated global model
    double train_sum = 0.0;
    Eigen::Index train_rows = 0;
    for (int c : sampled) {
        const Matrix& rows = data.client_rows[static_cast<std::size_t>(c)];
        if (rows.rows() == 0) continue;
        train_sum += mean_reconstruction_error(global, rows) * static_cast<double>(rows.rows());
        train_rows += rows.rows();
    }
    log.train_benign_mse = train_rows > 0 ? train_sum / static_cast<double>(train_rows) : 0.0;
    if (data.val_benign.rows() > 0)
        log.val_benign_mse = mean_reconstruction_error(global, data.val_benign);
    if (data.val_attack.rows() > 0)
        log.val_attack_mse = mean_reconstruction_error(global, data.val_attack);
    return log;
}

FederatedModel train_federated(const FederatedData& data, const TrainConfig& cfg,
                               const ModelTopology& topology, Eigen::Index input_dim) {
    cfg.validate();
    require(!data.client_rows.empty(), "train_federated: no client shards");

    FederatedModel model;
    model.params = init_model(input_dim, topology.latent_dim, topology.encoder_hidden,
                              topology.decoder_hidden, derive_seed(cfg.seed, 0x1717));
    ModelParams velocity = model.params;
    velocity.set_zero();

    for (int round = 0; round < cfg.rounds; ++round) {
        const std::uint64_t round_seed =
            derive_seed(cfg.seed, 0xF0000000ULL + static_cast<std::uint64_t>(round));
        model.rounds.push_back(
            fedavg_round(model.params, velocity, data, cfg, round_seed, round));
    }
    return model;
}

}  // namespace ztseg
