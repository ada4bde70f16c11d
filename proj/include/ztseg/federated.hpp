#pragma once

#include <optional>

#include "ztseg/dnae.hpp"
#include "ztseg/flow_ingest.hpp"
#include "ztseg/types.hpp"

namespace ztseg {

struct RoundLog {
    int round = 0;
    double train_benign_mse = 0.0;
    std::optional<double> val_benign_mse;
    std::optional<double> val_attack_mse;
    std::vector<int> participants;
};

// Per-client training rows plus the validation views used for round logging.
// Shards are benign-only when labels exist.
struct FederatedData {
    std::vector<Matrix> client_rows; // one matrix per client
    Matrix val_benign;               // may be empty
    Matrix val_attack;               // may be empty

    Eigen::Index total_rows() const {
        Eigen::Index n = 0;
        for (const auto& m : client_rows) n += m.rows();
        return n;
    }
};

// Materialize client matrices from shard indices. When labels exist, train
// rows are filtered to benign and the validation split is divided into
// benign/attack views.
FederatedData build_federated_data(const FlowTable& table,
                                   const std::vector<ClientShard>& shards,
                                   const IndexList& val_idx);

// Server aggregation step shared by fedavg_round: weighted average of the
// client updates, then the momentum pseudo-gradient step on the global
// parameters.
void server_update(ModelParams& global, ModelParams& velocity,
                   const std::vector<std::pair<ModelParams, double>>& updates,
                   const TrainConfig& cfg);

// One federated round: sample ceil(participation*K) clients without
// replacement, train each from a copy of the global model, average client
// parameters weighted by shard size, then apply the pseudo-gradient
// delta = global - average through server momentum SGD. `velocity` is the
// server optimizer state, carried across rounds. Diverging clients are
// dropped; throws when no usable update remains.
RoundLog fedavg_round(ModelParams& global, ModelParams& velocity, const FederatedData& data,
                      const TrainConfig& cfg, std::uint64_t round_seed, int round_index);

struct FederatedModel {
    ModelParams params;
    std::vector<RoundLog> rounds;
};

struct ModelTopology {
    Eigen::Index latent_dim = 25;
    std::vector<Eigen::Index> encoder_hidden = {256, 64};
    std::vector<Eigen::Index> decoder_hidden = {128};
};

// Full federated loop: seeded init, cfg.rounds rounds, per-round logs.
FederatedModel train_federated(const FederatedData& data, const TrainConfig& cfg,
                               const ModelTopology& topology, Eigen::Index input_dim);

}  // namespace ztseg
