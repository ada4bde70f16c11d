#include "ztseg/flow_ingest.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <set>
#include <unordered_map>

#include "ztseg/dataio.hpp"
#include "ztseg/rng.hpp"

namespace ztseg {

ColumnRole parse_column_role(const std::string& name) {
    if (name == "numeric" || name == "feature-numeric") return ColumnRole::Numeric;
    if (name == "categorical" || name == "feature-categorical") return ColumnRole::Categorical;
    if (name == "sip") return ColumnRole::Sip;
    if (name == "dip") return ColumnRole::Dip;
    if (name == "sport") return ColumnRole::Sport;
    if (name == "dport") return ColumnRole::Dport;
    if (name == "label") return ColumnRole::Label;
    if (name == "protocol") return ColumnRole::Protocol;
    if (name == "meta") return ColumnRole::Meta;
    if (name == "ignore") return ColumnRole::Ignore;
    throw std::invalid_argument("unknown column role: " + name);
}

std::string column_role_name(ColumnRole role) {
    switch (role) {
        case ColumnRole::Numeric: return "numeric";
        case ColumnRole::Categorical: return "categorical";
        case ColumnRole::Sip: return "sip";
        case ColumnRole::Dip: return "dip";
        case ColumnRole::Sport: return "sport";
        case ColumnRole::Dport: return "dport";
        case ColumnRole::Label: return "label";
        case ColumnRole::Protocol: return "protocol";
        case ColumnRole::Meta: return "meta";
        case ColumnRole::Ignore: return "ignore";
    }
    return "ignore";
}

namespace {

bool parse_finite_double(const std::string& s, double& out) {
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    while (begin != end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end != begin && (*(end - 1) == ' ' || *(end - 1) == '\t')) --end;
    if (begin == end) return false;
    auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc() || ptr != end) return false;
    return std::isfinite(out);
}

}  // namespace

RawFlowTable load_csv(const std::filesystem::path& path, const Schema& schema) {
    if (!std::filesystem::exists(path))
        throw std::invalid_argument("dataset file missing: " + path.string());
    const CsvTable csv = read_csv(path);

    std::unordered_map<std::string, int> col_index;
    for (std::size_t j = 0; j < csv.header.size(); ++j)
        col_index[csv.header[j]] = static_cast<int>(j);
    for (const auto& [name, role] : schema) {
        if (!col_index.count(name))
            throw std::invalid_argument("schema references absent column: " + name);
        (void)role;
    }

    struct ColPlan {
        int csv_col;
        std::string name;
        ColumnRole role;
    };
    // keep CSV column order for features
    std::vector<ColPlan> numeric_cols, categorical_cols;
    int sip = -1, dip = -1, sport = -1, dport = -1, label = -1, protocol = -1;
    for (std::size_t j = 0; j < csv.header.size(); ++j) {
        auto it = schema.find(csv.header[j]);
        if (it == schema.end()) continue; // unmapped columns are ignored
        const int cj = static_cast<int>(j);
        switch (it->second) {
            case ColumnRole::Numeric:
                numeric_cols.push_back({cj, csv.header[j], ColumnRole::Numeric});
                break;
            case ColumnRole::Sport:
                sport = cj;
                numeric_cols.push_back({cj, csv.header[j], ColumnRole::Sport});
                break;
            case ColumnRole::Dport:
                dport = cj;
                numeric_cols.push_back({cj, csv.header[j], ColumnRole::Dport});
                break;
            case ColumnRole::Categorical:
                categorical_cols.push_back({cj, csv.header[j], ColumnRole::Categorical});
                break;
            case ColumnRole::Protocol:
                protocol = cj;
                categorical_cols.push_back({cj, csv.header[j], ColumnRole::Protocol});
                break;
            case ColumnRole::Sip: sip = cj; break;
            case ColumnRole::Dip: dip = cj; break;
            case ColumnRole::Label: label = cj; break;
            case ColumnRole::Meta:
            case ColumnRole::Ignore: break;
        }
    }

    RawFlowTable out;
    for (const auto& c : numeric_cols) out.numeric_names.push_back(c.name);
    for (const auto& c : categorical_cols) out.categorical_names.push_back(c.name);
    out.categorical.resize(categorical_cols.size());

    std::vector<std::vector<double>> numeric_data(numeric_cols.size());
    const std::size_t width = csv.header.size();
    for (const auto& row : csv.rows) {
        if (row.size() != width) {
            ++out.dropped_rows;
            continue;
        }
        std::vector<double> nums(numeric_cols.size());
        bool ok = true;
        for (std::size_t j = 0; j < numeric_cols.size(); ++j) {
            if (!parse_finite_double(row[numeric_cols[j].csv_col], nums[j])) {
                ok = false;
                break;
            }
        }
        int lbl = -1;
        if (ok && label >= 0) {
            double v;
            if (!parse_finite_double(row[label], v) || (v != 0.0 && v != 1.0)) ok = false;
            else lbl = static_cast<int>(v);
        }
        if (!ok) {
            ++out.dropped_rows;
            continue;
        }
        for (std::size_t j = 0; j < numeric_cols.size(); ++j) numeric_data[j].push_back(nums[j]);
        for (std::size_t j = 0; j < categorical_cols.size(); ++j)
            out.categorical[j].push_back(row[categorical_cols[j].csv_col]);
        out.sidecar.src_ip.push_back(sip >= 0 ? row[sip] : "");
        out.sidecar.dst_ip.push_back(dip >= 0 ? row[dip] : "");
        out.sidecar.src_port.push_back(sport >= 0 ? row[sport] : "");
        out.sidecar.dst_port.push_back(dport >= 0 ? row[dport] : "");
        if (label >= 0) out.sidecar.label.push_back(lbl);
        if (protocol >= 0) out.sidecar.protocol.push_back(row[protocol]);
    }

    const Eigen::Index n = numeric_data.empty()
                               ? static_cast<Eigen::Index>(out.sidecar.src_ip.size())
                               : static_cast<Eigen::Index>(numeric_data[0].size());
    if (n == 0) throw std::runtime_error("zero rows after cleaning: " + path.string());
    out.numeric.resize(n, static_cast<Eigen::Index>(numeric_cols.size()));
    for (std::size_t j = 0; j < numeric_data.size(); ++j)
        for (Eigen::Index i = 0; i < n; ++i)
            out.numeric(i, static_cast<Eigen::Index>(j)) = numeric_data[j][static_cast<std::size_t>(i)];
    return out;
}

FlowTable fit_preprocess(const RawFlowTable& raw, const IndexList& train_idx,
                         std::size_t max_categories) {
    require(!train_idx.empty(), "fit_preprocess: train_idx empty");
    const Eigen::Index n = raw.n_rows();
    for (int i : train_idx) require(i >= 0 && i < n, "fit_preprocess: train index out of range");

    FlowTable out;
    out.sidecar = raw.sidecar;

    // z-score state fitted on train rows (population std, matching the
    // {2,4,6} -> +-1.2247 convention)
    const Eigen::Index n_num = raw.numeric.cols();
    out.scaler.resize(static_cast<std::size_t>(n_num));
    for (Eigen::Index j = 0; j < n_num; ++j) {
        double mean = 0.0;
        for (int i : train_idx) mean += raw.numeric(i, j);
        mean /= static_cast<double>(train_idx.size());
        double var = 0.0;
        for (int i : train_idx) {
            const double d = raw.numeric(i, j) - mean;
            var += d * d;
        }
        var /= static_cast<double>(train_idx.size());
        auto& sc = out.scaler[static_cast<std::size_t>(j)];
        sc.name = raw.numeric_names[static_cast<std::size_t>(j)];
        sc.mean = mean;
        sc.stddev = std::sqrt(var);
        if (sc.stddev < 1e-12) {
            sc.constant = true;
            sc.stddev = 1.0; // standardizes the column to all zeros
        }
    }

    // one-hot vocabularies from train rows
    out.encoder.resize(raw.categorical.size());
    Eigen::Index d = n_num;
    for (std::size_t j = 0; j < raw.categorical.size(); ++j) {
        std::set<std::string> vocab;
        for (int i : train_idx) vocab.insert(raw.categorical[j][static_cast<std::size_t>(i)]);
        if (vocab.size() > max_categories)
            throw std::runtime_error("categorical column '" + raw.categorical_names[j] +
                                     "' has " + std::to_string(vocab.size()) +
                                     " distinct training values (limit " +
                                     std::to_string(max_categories) + ")");
        auto& enc = out.encoder[j];
        enc.name = raw.categorical_names[j];
        enc.vocabulary.assign(vocab.begin(), vocab.end());
        d += static_cast<Eigen::Index>(enc.vocabulary.size());
    }

    out.features.setZero(n, d);
    out.feature_names.reserve(static_cast<std::size_t>(d));
    for (Eigen::Index j = 0; j < n_num; ++j) {
        const auto& sc = out.scaler[static_cast<std::size_t>(j)];
        out.feature_names.push_back(sc.name);
        if (sc.constant) {
            for (Eigen::Index i = 0; i < n; ++i) out.features(i, j) = 0.0;
        } else {
            for (Eigen::Index i = 0; i < n; ++i)
                out.features(i, j) = (raw.numeric(i, j) - sc.mean) / sc.stddev;
        }
    }
    Eigen::Index col = n_num;
    for (std::size_t j = 0; j < out.encoder.size(); ++j) {
        const auto& enc = out.encoder[j];
        std::unordered_map<std::string, Eigen::Index> pos;
        for (std::size_t v = 0; v < enc.vocabulary.size(); ++v) {
            out.feature_names.push_back(enc.name + "=" + enc.vocabulary[v]);
            pos[enc.vocabulary[v]] = col + static_cast<Eigen::Index>(v);
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            auto it = pos.find(raw.categorical[j][static_cast<std::size_t>(i)]);
            if (it == pos.end()) ++out.unseen_categories; // all-zero block
            else out.features(i, it->second) = 1.0;
        }
        col += static_cast<Eigen::Index>(enc.vocabulary.size());
    }
    return out;
}

Vector FlowTable::inverse_transform_numeric(int scaler_idx) const {
    require(scaler_idx >= 0 && scaler_idx < static_cast<int>(scaler.size()),
            "inverse_transform_numeric: bad column");
    const auto& sc = scaler[static_cast<std::size_t>(scaler_idx)];
    Vector out(n_rows());
    for (Eigen::Index i = 0; i < n_rows(); ++i) {
        const double z = features(i, scaler_idx);
        out[i] = sc.constant ? sc.mean : z * sc.stddev + sc.mean;
    }
    return out;
}

SplitIndex split_80_10_10(Eigen::Index n, std::uint64_t seed) {
    require(n >= 10, "split_80_10_10: need at least 10 rows");
    std::vector<int> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = static_cast<int>(i);
    Rng rng(seed);
    rng.shuffle(order);
    const auto n_train = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));
    SplitIndex s;
    s.train_idx.assign(order.begin(), order.begin() + static_cast<long>(n_train));
    s.val_idx.assign(order.begin() + static_cast<long>(n_train),
                     order.begin() + static_cast<long>(n_train + n_val));
    s.test_idx.assign(order.begin() + static_cast<long>(n_train + n_val), order.end());
    return s;
}

std::vector<ClientShard> dirichlet_partition(const Sidecar& sidecar, const IndexList& rows,
                                             int k, double alpha, std::uint64_t seed) {
    require(sidecar.has_protocol(), "dirichlet_partition: protocol column required");
    require(k >= 2, "dirichlet_partition: need at least 2 clients");
    require(alpha > 0.0, "dirichlet_partition: alpha must be positive");
    require(static_cast<int>(rows.size()) >= k, "dirichlet_partition: fewer rows than clients");

    // group rows by protocol, classes processed in sorted order
    std::map<std::string, IndexList> by_class;
    for (int r : rows) by_class[sidecar.protocol[static_cast<std::size_t>(r)]].push_back(r);

    Rng rng(seed);
    std::vector<ClientShard> shards(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c) shards[static_cast<std::size_t>(c)].client_id = c;

    for (auto& [cls, members] : by_class) {
        rng.shuffle(members);
        const Vector p = rng.dirichlet(alpha, k);
        // cumulative rounding keeps the class total exact
        const auto m = static_cast<double>(members.size());
        std::size_t start = 0;
        double cum = 0.0;
        for (int c = 0; c < k; ++c) {
            cum += p[c];
            const auto stop = (c == k - 1)
                                  ? members.size()
                                  : static_cast<std::size_t>(std::llround(cum * m));
            for (std::size_t i = start; i < stop && i < members.size(); ++i)
                shards[static_cast<std::size_t>(c)].row_indices.push_back(members[i]);
            start = std::min(stop, members.size());
        }
    }

    // repair empty shards from the largest one
    for (auto& shard : shards) {
        while (shard.row_indices.empty()) {
            auto largest = std::max_element(
                shards.begin(), shards.end(), [](const ClientShard& a, const ClientShard& b) {
                    return a.row_indices.size() < b.row_indices.size();
                });
            if (largest->row_indices.size() <= 1)
                throw std::runtime_error("dirichlet_partition: cannot repair empty shard");
            shard.row_indices.push_back(largest->row_indices.back());
            largest->row_indices.pop_back();
        }
    }
    for (auto& shard : shards) std::sort(shard.row_indices.begin(), shard.row_indices.end());
    return shards;
}

RawFlowTable generate_synthetic(const SyntheticSpec& spec) {
    require(spec.n >= 20, "generate_synthetic: need at least 20 rows");
    require(spec.attack_fraction > 0.0 && spec.attack_fraction < 1.0,
            "generate_synthetic: attack_fraction must be in (0,1)");
    require(spec.n_protocols >= 1, "generate_synthetic: need at least 1 protocol");

    // Benign traffic is organized as tight device-behavior groups inside
    // per-protocol activity regimes: dims 0-11 carry the protocol activity
    // block plus a per-group offset, dims 12-17 are quiet for benign rows and
    // carry the attack mean shift, dims 18-19 are plain noise. Attack rows
    // follow no protocol's activity pattern.
    constexpr int kNumFeatures = 20;
    constexpr int kProtoDims = 12;   // carry the protocol activity blocks
    constexpr int kBlock = 4;
    constexpr int kAttackDimStart = 12;
    constexpr int kAttackDimStop = 18;
    constexpr int kCenterDims = 14;  // group structure: dims 0-11 and 18-19

    Rng rng(spec.seed);
    RawFlowTable out;
    for (int j = 0; j < kNumFeatures; ++j) {
        char name[8];
        std::snprintf(name, sizeof(name), "f%02d", j);
        out.numeric_names.push_back(name);
    }
    out.categorical_names.push_back("proto");
    out.categorical.resize(1);

    auto active_block = [](int g) { return (g % 3) * kBlock; };
    auto active_mean = [](int g) { return 3.0 + 0.5 * (g / 3); };

    // per-group centers, drawn up front
    const int n_benign_groups = std::clamp(static_cast<int>(spec.n / 550), 4, 8);
    const int n_attack_groups = std::max(2, n_benign_groups / 8);
    const int devices_per_group = 4;
    Matrix benign_center(n_benign_groups, kCenterDims);
    for (int c = 0; c < n_benign_groups; ++c)
        for (int j = 0; j < kCenterDims; ++j) benign_center(c, j) = 1.2 * rng.normal();
    Matrix attack_center(n_attack_groups, kCenterDims);
    for (int c = 0; c < n_attack_groups; ++c)
        for (int j = 0; j < kCenterDims; ++j) attack_center(c, j) = 1.2 * rng.normal();

    auto group_pattern = [&](int c, int cj) {
        const int g = c % spec.n_protocols;
        double v = benign_center(c, cj);
        // ramped amplitudes keep the block's features distinguishable
        if (cj >= active_block(g) && cj < active_block(g) + kBlock)
            v += active_mean(g) * (1.0 + 0.3 * (cj - active_block(g)));
        return v;
    };

    const auto n_attack = static_cast<Eigen::Index>(
        std::llround(spec.attack_fraction * static_cast<double>(spec.n)));
    std::vector<int> order(static_cast<std::size_t>(spec.n));
    for (Eigen::Index i = 0; i < spec.n; ++i) order[static_cast<std::size_t>(i)] = static_cast<int>(i);
    rng.shuffle(order);
    std::vector<char> is_attack(static_cast<std::size_t>(spec.n), 0);
    for (Eigen::Index i = 0; i < n_attack; ++i) is_attack[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1;

    auto device_ip = [&](int group, int d, bool attack) {
        return std::string(attack ? "10.66." : "10.0.") + std::to_string(group) + "." +
               std::to_string(10 + d);
    };

    out.numeric.resize(spec.n, kNumFeatures);
    for (Eigen::Index i = 0; i < spec.n; ++i) {
        const bool attack = is_attack[static_cast<std::size_t>(i)] != 0;
        const int group = attack ? rng.uniform_int(n_attack_groups)
                                 : rng.uniform_int(n_benign_groups);
        const int g = attack ? rng.uniform_int(spec.n_protocols) : group % spec.n_protocols;
        for (int j = 0; j < kNumFeatures; ++j) {
            double v;
            if (j < kProtoDims || j >= kAttackDimStop) {
                const int cj = j < kProtoDims ? j : kProtoDims + (j - kAttackDimStop);
                if (attack) {
                    // attack flows follow no protocol's activity pattern
                    v = attack_center(group, cj) + 0.3 * rng.normal();
                } else {
                    // flat-density jitter: device groups are uniform blobs
                    // with a crisp support edge
                    v = group_pattern(group, cj) + 0.25 * rng.uniform(-1.0, 1.0);
                }
            } else {
                if (attack) {
                    v = rng.normal();
                    // heavier tail on the shifted dims
                    if (rng.uniform() < 0.05) v *= 1.5;
                    // ramped so the shifted features stay distinguishable;
                    // mean_shift is the minimum displacement
                    v += spec.mean_shift * (1.0 + 0.15 * (j - kAttackDimStart));
                } else {
                    v = 0.35 * std::clamp(rng.normal(), -2.5, 2.5);
                }
            }
            out.numeric(i, j) = v;
        }
        out.categorical[0].push_back("p" + std::to_string(g));
        const int src = rng.uniform_int(devices_per_group);
        int dst_group = group;
        bool dst_attack_pool = attack;
        if (attack) {
            // compromised devices probe benign groups
            dst_group = rng.uniform_int(n_benign_groups);
            dst_attack_pool = false;
        } else if (rng.uniform() < 0.2) {
            dst_group = rng.uniform_int(n_benign_groups); // occasional cross-group flow
        }
        const int dst = rng.uniform_int(devices_per_group);
        out.sidecar.src_ip.push_back(device_ip(group, src, attack));
        out.sidecar.dst_ip.push_back(device_ip(dst_group, dst, dst_attack_pool));
        out.sidecar.src_port.push_back(std::to_string(49152 + rng.uniform_int(8192)));
        out.sidecar.dst_port.push_back(std::to_string(1000 + g));
        out.sidecar.label.push_back(attack ? 1 : 0);
        out.sidecar.protocol.push_back("p" + std::to_string(g));
    }
    return out;
}

}  // namespace ztseg
