#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ztseg/types.hpp"

namespace ztseg {

// Column roles a schema can assign. "protocol" columns double as categorical
// features and drive the non-IID client partition; "sport"/"dport" double as
// numeric features; "sip"/"dip"/"label" live in the sidecar only.
enum class ColumnRole {
    Numeric,
    Categorical,
    Sip,
    Dip,
    Sport,
    Dport,
    Label,
    Protocol,
    Meta,    // carried nowhere, recognized for completeness
    Ignore,
};

ColumnRole parse_column_role(const std::string& name);
std::string column_role_name(ColumnRole role);

using Schema = std::map<std::string, ColumnRole>;

// Per-row metadata kept out of the feature matrix.
struct Sidecar {
    std::vector<std::string> src_ip, dst_ip, src_port, dst_port;
    std::vector<int> label;            // empty when the dataset is unlabeled
    std::vector<std::string> protocol; // empty when no protocol column

    bool has_labels() const { return !label.empty(); }
    bool has_protocol() const { return !protocol.empty(); }
};

struct RawFlowTable {
    std::vector<std::string> numeric_names;
    std::vector<std::string> categorical_names;
    Matrix numeric;                                    // n x |numeric_names|
    std::vector<std::vector<std::string>> categorical; // per column, n values
    Sidecar sidecar;
    std::size_t dropped_rows = 0;

    Eigen::Index n_rows() const { return numeric.rows(); }
};

struct ScalerColumn {
    std::string name;
    double mean = 0.0;
    double stddev = 1.0;   // population std over the fit rows
    bool constant = false; // fit column had (near-)zero variance
};

struct EncoderColumn {
    std::string name;
    std::vector<std::string> vocabulary; // sorted distinct fit values
};

struct FlowTable {
    Matrix features; // n x d, standardized numerics then one-hot blocks
    std::vector<std::string> feature_names;
    Sidecar sidecar;
    std::vector<ScalerColumn> scaler;
    std::vector<EncoderColumn> encoder;
    std::size_t unseen_categories = 0; // transform-time values absent from fit vocab

    Eigen::Index n_rows() const { return features.rows(); }
    Eigen::Index dim() const { return features.cols(); }

    // Undo z-scoring for one numeric column (by scaler index).
    Vector inverse_transform_numeric(int scaler_idx) const;
};

struct SplitIndex {
    IndexList train_idx, val_idx, test_idx;
};

struct ClientShard {
    int client_id = 0;
    IndexList row_indices; // global row ids, a subset of the split it partitions
    std::size_t n_k() const { return row_indices.size(); }
};

// Parse a CSV according to the schema. Rows with unparseable feature cells
// (including NaN/Inf in numerics) are dropped and counted.
RawFlowTable load_csv(const std::filesystem::path& path, const Schema& schema);

// Fit the scaler/encoder on train rows only, then transform every row.
// Unseen categories map to an all-zero one-hot block.
FlowTable fit_preprocess(const RawFlowTable& raw, const IndexList& train_idx,
                         std::size_t max_categories = 10000);

// Deterministic shuffled 80/10/10 partition of [0, n).
SplitIndex split_80_10_10(Eigen::Index n, std::uint64_t seed);

// Dirichlet(alpha) non-IID partition of `rows` into k client shards, driven
// by the protocol value of each row. Empty shards are repaired by moving a
// row from the largest shard.
std::vector<ClientShard> dirichlet_partition(const Sidecar& sidecar, const IndexList& rows,
                                             int k, double alpha, std::uint64_t seed);

struct SyntheticSpec {
    Eigen::Index n = 5000;
    double attack_fraction = 0.073;
    int n_protocols = 3;
    double mean_shift = 4.0; // attack mean offset, in units of feature sigma
    std::uint64_t seed = 42;
};

// Desk-scale labeled corpus: per-protocol Gaussian benign regimes, attacks
// shifted by mean_shift sigma on a fixed feature subset with heavier tails.
RawFlowTable generate_synthetic(const SyntheticSpec& spec);

}  // namespace ztseg
