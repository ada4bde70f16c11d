#include "ztseg/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>

#include <json.hpp>

#include "ztseg/dataio.hpp"
#include "ztseg/eval_metrics.hpp"
#include "ztseg/explain.hpp"
#include "ztseg/hypergraph.hpp"
#include "ztseg/risk_policy.hpp"
#include "ztseg/rng.hpp"
#include "ztseg/segmentation.hpp"

namespace ztseg {

using nlohmann::json;
namespace fs = std::filesystem;

const char* const kStageNames[8] = {"ingest", "train",   "embed",  "cluster",
                                    "risk",   "explain", "policy", "eval"};

// ---------------------------------------------------------------------------
// config
// ---------------------------------------------------------------------------

namespace {

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

}  // namespace

PipelineConfig PipelineConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
    }
    PipelineConfig cfg;

    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        if (d.contains("csv")) {
            cfg.dataset.csv_path = d.at("csv").get<std::string>();
            if (!d.contains("schema"))
                throw std::invalid_argument("config: dataset.schema required with dataset.csv");
            for (auto& [col, role] : d.at("schema").items())
                cfg.dataset.schema[col] = parse_column_role(role.get<std::string>());
        }
        if (d.contains("synthetic")) {
            const json& s = d.at("synthetic");
            cfg.dataset.synthetic.n = get_or<Eigen::Index>(s, "n", 5000);
            cfg.dataset.synthetic.attack_fraction = get_or<double>(s, "attack_fraction", 0.073);
            cfg.dataset.synthetic.n_protocols = get_or<int>(s, "n_protocols", 3);
            cfg.dataset.synthetic.mean_shift = get_or<double>(s, "mean_shift", 4.0);
        }
    }

    cfg.clients = get_or<int>(j, "clients", 10);
    cfg.alpha = get_or<double>(j, "alpha", 0.7);
    cfg.centralized = get_or<bool>(j, "centralized", false);

    if (j.contains("train")) {
        const json& t = j.at("train");
        cfg.train.local_epochs = get_or<int>(t, "local_epochs", 3);
        cfg.train.batch_size = get_or<int>(t, "batch_size", 64);
        cfg.train.rounds = get_or<int>(t, "rounds", 50);
        const std::string opt = get_or<std::string>(t, "client_optimizer", "adam");
        if (opt == "adam") cfg.train.client_optimizer = ClientOptimizer::Adam;
        else if (opt == "sgd") cfg.train.client_optimizer = ClientOptimizer::Sgd;
        else throw std::invalid_argument("config: train.client_optimizer must be adam or sgd");
        cfg.train.client_lr = get_or<double>(t, "client_lr", 1e-3);
        cfg.train.server_lr = get_or<double>(t, "server_lr", 1.0);
        cfg.train.server_momentum = get_or<double>(t, "server_momentum", 0.9);
        cfg.topology.latent_dim = get_or<Eigen::Index>(t, "latent_dim", 25);
        if (t.contains("encoder_hidden"))
            cfg.topology.encoder_hidden = t.at("encoder_hidden").get<std::vector<Eigen::Index>>();
        if (t.contains("decoder_hidden"))
            cfg.topology.decoder_hidden = t.at("decoder_hidden").get<std::vector<Eigen::Index>>();
    }
    cfg.train.participation = get_or<double>(j, "participation", 0.8);

    if (j.contains("hypergraph")) {
        const json& h = j.at("hypergraph");
        cfg.hypergraph_mode = get_or<std::string>(h, "mode", "manifold_hypergraph");
        cfg.knn_k = get_or<int>(h, "k", 12);
        cfg.diffusion_t = get_or<int>(h, "t", 3);
    }
    if (j.contains("embedding")) cfg.d_emb = get_or<int>(j.at("embedding"), "d_emb", 10);

    if (j.contains("clustering")) {
        const json& c = j.at("clustering");
        cfg.clusterer = get_or<std::string>(c, "clusterer", "hdbscan");
        cfg.k_clusters = get_or<int>(c, "k_clusters", 500);
        cfg.kmeans_batch = get_or<int>(c, "batch", 1024);
        cfg.min_cluster_size = get_or<int>(c, "min_cluster_size", 0);
        cfg.min_samples = get_or<int>(c, "min_samples", 0);
    }

    if (j.contains("risk")) {
        const json& r = j.at("risk");
        cfg.risk_w1 = get_or<double>(r, "w1", 0.5);
        cfg.risk_w2 = get_or<double>(r, "w2", 0.5);
        cfg.threshold_policy = get_or<std::string>(r, "threshold", "otsu");
    }

    if (j.contains("explain")) {
        const json& e = j.at("explain");
        cfg.explain_enabled = get_or<bool>(e, "enabled", true);
        cfg.explain_sample = get_or<int>(e, "sample", 0);
        cfg.lime_samples = get_or<int>(e, "lime_samples", 1000);
        cfg.shap_background = get_or<int>(e, "background", 100);
        cfg.surrogate_k = get_or<int>(e, "surrogate_k", 25);
        cfg.ridge_lambda = get_or<double>(e, "ridge_lambda", 1.0);
        cfg.top_m = get_or<int>(e, "top_m", 3);
    }

    cfg.segment_split = get_or<std::string>(j, "segment_split", "test");
    cfg.seed = get_or<std::uint64_t>(j, "seed", 42);
    cfg.output_dir = get_or<std::string>(j, "output_dir", "out");
    cfg.validate();
    return cfg;
}

PipelineConfig PipelineConfig::from_json_file(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("config file missing: " + path.string());
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return from_json_text(text);
}

std::string PipelineConfig::to_json_text() const {
    json j;
    if (!dataset.csv_path.empty()) {
        j["dataset"]["csv"] = dataset.csv_path;
        json schema;
        for (auto& [col, role] : dataset.schema) schema[col] = column_role_name(role);
        j["dataset"]["schema"] = schema;
    } else {
        j["dataset"]["synthetic"] = {{"n", dataset.synthetic.n},
                                     {"attack_fraction", dataset.synthetic.attack_fraction},
                                     {"n_protocols", dataset.synthetic.n_protocols},
                                     {"mean_shift", dataset.synthetic.mean_shift}};
    }
    j["clients"] = clients;
    j["alpha"] = alpha;
    j["centralized"] = centralized;
    j["participation"] = train.participation;
    j["train"] = {{"local_epochs", train.local_epochs},
                  {"batch_size", train.batch_size},
                  {"rounds", train.rounds},
                  {"client_optimizer",
                   train.client_optimizer == ClientOptimizer::Adam ? "adam" : "sgd"},
                  {"client_lr", train.client_lr},
                  {"server_lr", train.server_lr},
                  {"server_momentum", train.server_momentum},
                  {"latent_dim", topology.latent_dim},
                  {"encoder_hidden", topology.encoder_hidden},
                  {"decoder_hidden", topology.decoder_hidden}};
    j["hypergraph"] = {{"mode", hypergraph_mode}, {"k", knn_k}, {"t", diffusion_t}};
    j["embedding"] = {{"d_emb", d_emb}};
    j["clustering"] = {{"clusterer", clusterer},
                       {"k_clusters", k_clusters},
                       {"batch", kmeans_batch},
                       {"min_cluster_size", min_cluster_size},
                       {"min_samples", min_samples}};
    j["risk"] = {{"w1", risk_w1}, {"w2", risk_w2}, {"threshold", threshold_policy}};
    j["explain"] = {{"enabled", explain_enabled}, {"sample", explain_sample},
                    {"lime_samples", lime_samples}, {"background", shap_background},
                    {"surrogate_k", surrogate_k},   {"ridge_lambda", ridge_lambda},
                    {"top_m", top_m}};
    j["segment_split"] = segment_split;
    j["seed"] = seed;
    j["output_dir"] = output_dir;
    return j.dump(2);
}

void PipelineConfig::validate() const {
    if (dataset.is_synthetic()) {
        require(dataset.synthetic.n >= 20, "config: dataset.synthetic.n must be >= 20");
        require(dataset.synthetic.attack_fraction > 0.0 && dataset.synthetic.attack_fraction < 1.0,
                "config: dataset.synthetic.attack_fraction must be in (0,1)");
        require(dataset.synthetic.n_protocols >= 1,
                "config: dataset.synthetic.n_protocols must be >= 1");
        require(dataset.synthetic.mean_shift >= 0.0,
                "config: dataset.synthetic.mean_shift must be >= 0");
    }
    require(clients >= 1, "config: clients must be >= 1");
    require(centralized || clients >= 2, "config: clients must be >= 2 unless centralized");
    require(alpha > 0.0, "config: alpha must be positive");
    train.validate();
    require(topology.latent_dim >= 1, "config: train.latent_dim must be >= 1");
    require(hypergraph_mode == "knn_only" || hypergraph_mode == "manifold_hypergraph" ||
                hypergraph_mode == "none",
            "config: hypergraph.mode must be knn_only, manifold_hypergraph or none");
    require(knn_k >= 1, "config: hypergraph.k must be >= 1");
    require(diffusion_t >= 1, "config: hypergraph.t must be >= 1");
    require(d_emb >= 1, "config: embedding.d_emb must be >= 1");
    require(clusterer == "minibatch_kmeans" || clusterer == "hdbscan",
            "config: clustering.clusterer must be minibatch_kmeans or hdbscan");
    require(k_clusters >= 1, "config: clustering.k_clusters must be >= 1");
    require(kmeans_batch >= 1, "config: clustering.batch must be >= 1");
    require(min_cluster_size >= 0, "config: clustering.min_cluster_size must be >= 0");
    require(min_samples >= 0, "config: clustering.min_samples must be >= 0");
    require(risk_w1 >= 0.0 && risk_w2 >= 0.0, "config: risk weights must be nonnegative");
    require(std::abs(risk_w1 + risk_w2 - 1.0) <= 1e-12, "config: risk weights must sum to 1");
    if (threshold_policy != "otsu") {
        bool ok = threshold_policy.size() == 3 && threshold_policy[0] == 'p';
        int p = 0;
        if (ok) {
            p = (threshold_policy[1] - '0') * 10 + (threshold_policy[2] - '0');
            ok = p >= 50 && p <= 95 && p % 5 == 0;
        }
        require(ok, "config: risk.threshold must be otsu or one of p50..p95 in steps of 5");
    }
    require(explain_sample >= 0, "config: explain.sample must be >= 0");
    require(lime_samples >= d_emb + 2, "config: explain.lime_samples too small");
    require(shap_background >= 1, "config: explain.background must be >= 1");
    require(surrogate_k >= 1, "config: explain.surrogate_k must be >= 1");
    require(ridge_lambda > 0.0, "config: explain.ridge_lambda must be positive");
    require(top_m >= 1, "config: explain.top_m must be >= 1");
    require(segment_split == "train" || segment_split == "test" || segment_split == "all",
            "config: segment_split must be train, test or all");
    require(!output_dir.empty(), "config: output_dir must not be empty");
}

// ---------------------------------------------------------------------------
// artifact I/O
// ---------------------------------------------------------------------------

namespace {

struct Paths {
    fs::path dir;
    fs::path of(const std::string& name) const { return dir / name; }
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for write: " + path.string());
    f << text;
}

std::string read_text(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path.string());
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

json load_json(const fs::path& path) { return json::parse(read_text(path)); }

void save_sidecar(const fs::path& path, const Sidecar& sc) {
    std::string out = "sip,dip,sport,dport,label,protocol\n";
    const std::size_t n = sc.src_ip.size();
    for (std::size_t i = 0; i < n; ++i) {
        out += csv_escape(sc.src_ip[i]) + "," + csv_escape(sc.dst_ip[i]) + "," +
               csv_escape(sc.src_port[i]) + "," + csv_escape(sc.dst_port[i]) + ",";
        out += sc.has_labels() ? std::to_string(sc.label[i]) : "";
        out += ",";
        out += sc.has_protocol() ? csv_escape(sc.protocol[i]) : "";
        out += "\n";
    }
    write_text(path, out);
}

Sidecar load_sidecar(const fs::path& path) {
    const CsvTable csv = read_csv(path);
    Sidecar sc;
    bool any_label = false, any_proto = false;
    for (const auto& row : csv.rows) {
        sc.src_ip.push_back(row[0]);
        sc.dst_ip.push_back(row[1]);
        sc.src_port.push_back(row[2]);
        sc.dst_port.push_back(row[3]);
        if (!row[4].empty()) any_label = true;
        if (!row[5].empty()) any_proto = true;
    }
    if (any_label)
        for (const auto& row : csv.rows) sc.label.push_back(std::stoi(row[4]));
    if (any_proto)
        for (const auto& row : csv.rows) sc.protocol.push_back(row[5]);
    return sc;
}

json split_to_json(const SplitIndex& split) {
    return {{"train", split.train_idx}, {"val", split.val_idx}, {"test", split.test_idx}};
}

SplitIndex split_from_json(const json& j) {
    SplitIndex s;
    s.train_idx = j.at("train").get<IndexList>();
    s.val_idx = j.at("val").get<IndexList>();
    s.test_idx = j.at("test").get<IndexList>();
    return s;
}

struct IngestArtifact {
    FlowTable table;
    SplitIndex split;
    std::vector<ClientShard> shards;
};

void save_ingest(const Paths& p, const IngestArtifact& art) {
    write_matrix(p.of("flow_table.bin"), art.table.features);
    save_sidecar(p.of("sidecar.csv"), art.table.sidecar);
    json j;
    j["feature_names"] = art.table.feature_names;
    json scaler = json::array();
    for (const auto& sc : art.table.scaler)
        scaler.push_back({{"name", sc.name},
                          {"mean", sc.mean},
                          {"stddev", sc.stddev},
                          {"constant", sc.constant}});
    j["scaler"] = scaler;
    json encoder = json::array();
    for (const auto& enc : art.table.encoder)
        encoder.push_back({{"name", enc.name}, {"vocabulary", enc.vocabulary}});
    j["encoder"] = encoder;
    j["unseen_categories"] = art.table.unseen_categories;
    j["split"] = split_to_json(art.split);
    json shards = json::array();
    for (const auto& s : art.shards)
        shards.push_back({{"client_id", s.client_id}, {"rows", s.row_indices}});
    j["shards"] = shards;
    write_text(p.of("flow_table.json"), j.dump(2));
}

IngestArtifact load_ingest(const Paths& p) {
    IngestArtifact art;
    art.table.features = read_matrix(p.of("flow_table.bin"));
    art.table.sidecar = load_sidecar(p.of("sidecar.csv"));
    const json j = load_json(p.of("flow_table.json"));
    art.table.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    for (const auto& sc : j.at("scaler")) {
        ScalerColumn c;
        c.name = sc.at("name").get<std::string>();
        c.mean = sc.at("mean").get<double>();
        c.stddev = sc.at("stddev").get<double>();
        c.constant = sc.at("constant").get<bool>();
        art.table.scaler.push_back(c);
    }
    for (const auto& enc : j.at("encoder")) {
        EncoderColumn c;
        c.name = enc.at("name").get<std::string>();
        c.vocabulary = enc.at("vocabulary").get<std::vector<std::string>>();
        art.table.encoder.push_back(c);
    }
    art.table.unseen_categories = j.at("unseen_categories").get<std::size_t>();
    art.split = split_from_json(j.at("split"));
    for (const auto& s : j.at("shards")) {
        ClientShard shard;
        shard.client_id = s.at("client_id").get<int>();
        shard.row_indices = s.at("rows").get<IndexList>();
        art.shards.push_back(shard);
    }
    return art;
}

void save_model(const Paths& p, const ModelParams& params, const PipelineConfig& cfg) {
    const Vector flat = params.flatten();
    Matrix as_row(1, flat.size());
    as_row.row(0) = flat;
    write_matrix(p.of("model.bin"), as_row);
    json j;
    j["input_dim"] = params.input_dim();
    j["latent_dim"] = params.latent_dim();
    json enc = json::array(), dec = json::array();
    for (const auto& l : params.encoder)
        enc.push_back({{"in", l.W.rows()},
                       {"out", l.W.cols()},
                       {"activation", l.act == Activation::Linear ? "linear" : "leaky_relu"}});
    for (const auto& l : params.decoder)
        dec.push_back({{"in", l.W.rows()},
                       {"out", l.W.cols()},
                       {"activation", l.act == Activation::Linear ? "linear" : "leaky_relu"}});
    j["encoder_layers"] = enc;
    j["decoder_layers"] = dec;
    const std::string cfg_text = cfg.to_json_text();
    j["config_hash"] = hash_hex(fnv1a64(cfg_text.data(), cfg_text.size()));
    write_text(p.of("model.json"), j.dump(2));
}

ModelParams load_model(const Paths& p) {
    const json j = load_json(p.of("model.json"));
    ModelParams params;
    auto read_layers = [&](const json& arr, std::vector<Layer>& out) {
        for (const auto& lj : arr) {
            Layer l;
            l.W.resize(lj.at("in").get<Eigen::Index>(), lj.at("out").get<Eigen::Index>());
            l.b.resize(lj.at("out").get<Eigen::Index>());
            l.act = lj.at("activation").get<std::string>() == "linear" ? Activation::Linear
                                                                       : Activation::LeakyRelu;
            out.push_back(std::move(l));
        }
    };
    read_layers(j.at("encoder_layers"), params.encoder);
    read_layers(j.at("decoder_layers"), params.decoder);
    const Matrix as_row = read_matrix(p.of("model.bin"));
    params.unflatten(as_row.row(0).transpose());
    return params;
}

void save_rounds(const Paths& p, const std::vector<RoundLog>& rounds) {
    std::string out;
    for (const auto& r : rounds) {
        json j;
        j["round"] = r.round;
        j["train_benign_mse"] = r.train_benign_mse;
        if (r.val_benign_mse) j["val_benign_mse"] = *r.val_benign_mse;
        else j["val_benign_mse"] = nullptr;
        if (r.val_attack_mse) j["val_attack_mse"] = *r.val_attack_mse;
        else j["val_attack_mse"] = nullptr;
        j["participants"] = r.participants;
        out += j.dump() + "\n";
    }
    write_text(p.of("rounds.jsonl"), out);
}

void save_hypergraph(const fs::path& path, const Hypergraph& h) {
    std::string out;
    for (std::size_t e = 0; e < h.edges.size(); ++e) {
        json j;
        j["vertices"] = h.edges[e];
        j["weight"] = h.weights[static_cast<Eigen::Index>(e)];
        out += j.dump() + "\n";
    }
    write_text(path, out);
}

struct SegmentationArtifact {
    IndexList row_ids; // global dataset row ids, aligned with labels
    std::vector<int> labels;
    Vector outlierness;
    std::string clusterer;
    int n_clusters = 0;
};

void save_segmentation(const Paths& p, const SegmentationArtifact& art,
                       const Segmentation& seg) {
    std::string out = "row_id,cluster_id,outlierness\n";
    for (std::size_t i = 0; i < art.row_ids.size(); ++i) {
        out += std::to_string(art.row_ids[i]) + "," + std::to_string(art.labels[i]) + "," +
               format_double(art.outlierness[static_cast<Eigen::Index>(i)]) + "\n";
    }
    write_text(p.of("segmentation.csv"), out);

    std::vector<int> sizes = seg.cluster_sizes;
    std::sort(sizes.begin(), sizes.end());
    json j;
    j["clusterer"] = art.clusterer;
    j["n_clusters"] = art.n_clusters;
    j["noise_rows"] = seg.noise_count();
    j["size_min"] = sizes.empty() ? 0 : sizes.front();
    j["size_median"] = sizes.empty() ? 0 : sizes[sizes.size() / 2];
    j["size_max"] = sizes.empty() ? 0 : sizes.back();
    if (seg.clusterer == "minibatch_kmeans") {
        j["initial_inertia"] = seg.initial_inertia;
        j["final_inertia"] = seg.final_inertia;
    }
    write_text(p.of("segmentation.json"), j.dump(2));
}

SegmentationArtifact load_segmentation(const Paths& p) {
    const CsvTable csv = read_csv(p.of("segmentation.csv"));
    SegmentationArtifact art;
    art.outlierness.resize(static_cast<Eigen::Index>(csv.rows.size()));
    for (std::size_t i = 0; i < csv.rows.size(); ++i) {
        art.row_ids.push_back(std::stoi(csv.rows[i][0]));
        art.labels.push_back(std::stoi(csv.rows[i][1]));
        art.outlierness[static_cast<Eigen::Index>(i)] = std::stod(csv.rows[i][2]);
    }
    const json j = load_json(p.of("segmentation.json"));
    art.clusterer = j.at("clusterer").get<std::string>();
    art.n_clusters = j.at("n_clusters").get<int>();
    return art;
}

IndexList segment_rows(const PipelineConfig& cfg, const SplitIndex& split, Eigen::Index n) {
    if (cfg.segment_split == "train") return split.train_idx;
    if (cfg.segment_split == "test") return split.test_idx;
    IndexList all(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = static_cast<int>(i);
    return all;
}

Matrix gather(const Matrix& src, const IndexList& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), src.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = src.row(rows[i]);
    return out;
}

// ---------------------------------------------------------------------------
// manifest and locking
// ---------------------------------------------------------------------------

struct Manifest {
    json data;
    fs::path path;

    static Manifest open(const Paths& p) {
        Manifest m;
        m.path = p.of("manifest.json");
        if (fs::exists(m.path)) m.data = load_json(m.path);
        if (!m.data.is_object()) m.data = json::object();
        if (!m.data.contains("stages")) m.data["stages"] = json::object();
        return m;
    }
    void save() const { write_text(path, data.dump(2)); }
};

class DirLock {
public:
    explicit DirLock(const fs::path& dir) : lock_path_(dir / ".lock") {
        fd_ = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0)
            throw std::runtime_error(
                "output directory is locked by another pipeline instance (remove " +
                lock_path_.string() + " if stale)");
    }
    ~DirLock() {
        if (fd_ >= 0) {
            ::close(fd_);
            std::error_code ec;
            fs::remove(lock_path_, ec);
        }
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

private:
    fs::path lock_path_;
    int fd_ = -1;
};

struct StageIo {
    std::vector<std::string> inputs;  // artifact files read
    std::vector<std::string> outputs; // artifact files written
    json config_slice;
};

StageIo stage_io(const PipelineConfig& cfg, const std::string& stage) {
    StageIo io;
    if (stage == "ingest") {
        io.outputs = {"flow_table.bin", "flow_table.json", "sidecar.csv"};
        io.config_slice = {{"dataset", json::parse(cfg.to_json_text()).at("dataset")},
                           {"clients", cfg.clients},
                           {"alpha", cfg.alpha},
                           {"centralized", cfg.centralized},
                           {"seed", cfg.seed}};
    } else if (stage == "train") {
        io.inputs = {"flow_table.bin", "flow_table.json", "sidecar.csv"};
        io.outputs = {"model.bin", "model.json", "rounds.jsonl"};
        io.config_slice = {{"train", json::parse(cfg.to_json_text()).at("train")},
                           {"participation", cfg.train.participation},
                           {"centralized", cfg.centralized},
                           {"seed", cfg.seed}};
    } else if (stage == "embed") {
        io.inputs = {"flow_table.bin", "flow_table.json", "model.bin", "model.json"};
        io.outputs = {"zboot.bin", "hypergraph.jsonl", "embedding.bin", "embedding.json"};
        io.config_slice = {{"mode", cfg.hypergraph_mode}, {"k", cfg.knn_k},
                           {"t", cfg.diffusion_t},       {"d_emb", cfg.d_emb},
                           {"segment_split", cfg.segment_split},
                           {"seed", cfg.seed}};
    } else if (stage == "cluster") {
        io.inputs = {"embedding.bin", "embedding.json"};
        io.outputs = {"segmentation.csv", "segmentation.json"};
        io.config_slice = {{"clusterer", cfg.clusterer},
                           {"k_clusters", cfg.k_clusters},
                           {"batch", cfg.kmeans_batch},
                           {"min_cluster_size", cfg.min_cluster_size},
                           {"min_samples", cfg.min_samples},
                           {"seed", cfg.seed}};
    } else if (stage == "risk") {
        io.inputs = {"segmentation.csv", "segmentation.json", "flow_table.bin",
                     "flow_table.json", "model.bin",        "model.json"};
        io.outputs = {"risk.csv", "risk.json"};
        io.config_slice = {{"w1", cfg.risk_w1},
                           {"w2", cfg.risk_w2},
                           {"threshold", cfg.threshold_policy},
                           {"segment_split", cfg.segment_split}};
    } else if (stage == "explain") {
        io.inputs = {"embedding.bin", "embedding.json", "segmentation.csv",
                     "zboot.bin",     "flow_table.bin", "flow_table.json"};
        io.outputs = {"explanations.jsonl"};
        io.config_slice = {{"enabled", cfg.explain_enabled},
                           {"sample", cfg.explain_sample},
                           {"lime_samples", cfg.lime_samples},
                           {"background", cfg.shap_background},
                           {"surrogate_k", cfg.surrogate_k},
                           {"ridge_lambda", cfg.ridge_lambda},
                           {"top_m", cfg.top_m},
                           {"seed", cfg.seed}};
    } else if (stage == "policy") {
        io.inputs = {"segmentation.csv", "risk.json", "sidecar.csv", "explanations.jsonl"};
        io.outputs = {"policy.csv"};
        io.config_slice = {{"explain_enabled", cfg.explain_enabled}};
    } else if (stage == "eval") {
        io.inputs = {"embedding.bin", "embedding.json", "segmentation.csv", "segmentation.json",
                     "sidecar.csv"};
        io.outputs = {"eval.json", "eval.txt"};
        io.config_slice = {{"surrogate_k", cfg.surrogate_k},
                           {"segment_split", cfg.segment_split},
                           {"seed", cfg.seed}};
    } else {
        throw std::invalid_argument("unknown stage: " + stage);
    }
    return io;
}

const char* stage_of_artifact(const std::string& file) {
    static const std::map<std::string, const char*> owner = {
        {"flow_table.bin", "ingest"},   {"flow_table.json", "ingest"},
        {"sidecar.csv", "ingest"},      {"model.bin", "train"},
        {"model.json", "train"},        {"rounds.jsonl", "train"},
        {"zboot.bin", "embed"},         {"hypergraph.jsonl", "embed"},
        {"embedding.bin", "embed"},     {"embedding.json", "embed"},
        {"segmentation.csv", "cluster"},{"segmentation.json", "cluster"},
        {"risk.csv", "risk"},           {"risk.json", "risk"},
        {"explanations.jsonl", "explain"}, {"policy.csv", "policy"},
        {"eval.json", "eval"},          {"eval.txt", "eval"}};
    return owner.at(file);
}

std::string stage_signature(const Paths& p, const PipelineConfig& cfg,
                            const std::string& stage) {
    const StageIo io = stage_io(cfg, stage);
    std::string blob = io.config_slice.dump();
    for (const auto& in : io.inputs) {
        const fs::path path = p.of(in);
        if (!fs::exists(path))
            throw std::runtime_error("stage '" + stage + "' is missing upstream artifact '" + in +
                                     "' (run stage '" + stage_of_artifact(in) + "' first)");
        blob += "|" + in + ":" + hash_hex(fnv1a64_file(path));
    }
    if (stage == "ingest" && !cfg.dataset.is_synthetic() && fs::exists(cfg.dataset.csv_path))
        blob += "|csv:" + hash_hex(fnv1a64_file(cfg.dataset.csv_path));
    return hash_hex(fnv1a64(blob.data(), blob.size()));
}

bool stage_up_to_date(const Paths& p, Manifest& manifest, const PipelineConfig& cfg,
                      const std::string& stage, const std::string& signature) {
    if (!manifest.data["stages"].contains(stage)) return false;
    const json& entry = manifest.data["stages"][stage];
    if (entry.value("signature", "") != signature) return false;
    for (const auto& out : stage_io(cfg, stage).outputs) {
        const fs::path path = p.of(out);
        if (!fs::exists(path)) return false;
        const std::string want = entry.value("outputs", json::object()).value(out, "");
        if (want != hash_hex(fnv1a64_file(path))) return false;
    }
    return true;
}

void record_stage(const Paths& p, Manifest& manifest, const PipelineConfig& cfg,
                  const std::string& stage, const std::string& signature, double seconds) {
    json outputs = json::object();
    for (const auto& out : stage_io(cfg, stage).outputs)
        outputs[out] = hash_hex(fnv1a64_file(p.of(out)));
    manifest.data["stages"][stage] = {
        {"signature", signature}, {"outputs", outputs}, {"seconds", seconds}};
    manifest.save();
}

// ---------------------------------------------------------------------------
// stage bodies
// ---------------------------------------------------------------------------

void stage_ingest(const Paths& p, const PipelineConfig& cfg) {
    RawFlowTable raw;
    if (cfg.dataset.is_synthetic()) {
        SyntheticSpec spec = cfg.dataset.synthetic;
        spec.seed = derive_seed(cfg.seed, 0x5EED);
        raw = generate_synthetic(spec);
    } else {
        raw = load_csv(cfg.dataset.csv_path, cfg.dataset.schema);
        if (raw.dropped_rows > 0)
            std::cerr << "ingest: dropped " << raw.dropped_rows << " unparseable row(s)\n";
    }

    IngestArtifact art;
    art.split = split_80_10_10(raw.n_rows(), derive_seed(cfg.seed, 0x51));
    art.table = fit_preprocess(raw, art.split.train_idx);
    if (cfg.centralized || cfg.clients == 1) {
        ClientShard shard;
        shard.client_id = 0;
        shard.row_indices = art.split.train_idx;
        std::sort(shard.row_indices.begin(), shard.row_indices.end());
        art.shards = {shard};
    } else {
        require(art.table.sidecar.has_protocol(),
                "config: a protocol column is required for the non-IID client partition");
        art.shards = dirichlet_partition(art.table.sidecar, art.split.train_idx, cfg.clients,
                                         cfg.alpha, derive_seed(cfg.seed, 0xD1));
    }
    save_ingest(p, art);
}

void stage_train(const Paths& p, const PipelineConfig& cfg) {
    const IngestArtifact art = load_ingest(p);
    const FederatedData data = build_federated_data(art.table, art.shards, art.split.val_idx);

    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, 0x77);
    if (cfg.centralized || art.shards.size() == 1) tc.participation = 1.0;

    const FederatedModel model = train_federated(data, tc, cfg.topology, art.table.dim());
    save_model(p, model.params, cfg);
    save_rounds(p, model.rounds);
}

void stage_embed(const Paths& p, const PipelineConfig& cfg) {
    const IngestArtifact art = load_ingest(p);
    const ModelParams model = load_model(p);
    const IndexList rows = segment_rows(cfg, art.split, art.table.n_rows());
    require(!rows.empty(), "embed: segment split is empty");

    const Matrix z_boot = encode_all(model, gather(art.table.features, rows));
    write_matrix(p.of("zboot.bin"), z_boot);

    json meta;
    meta["mode"] = cfg.hypergraph_mode;
    meta["segment_split"] = cfg.segment_split;
    meta["row_ids"] = rows;

    if (cfg.hypergraph_mode == "none") {
        // no-hypergraph ablation: clustering consumes the latent space directly
        write_text(p.of("hypergraph.jsonl"), "");
        write_matrix(p.of("embedding.bin"), z_boot);
        meta["d_emb"] = z_boot.cols();
        meta["eigenvalues"] = json::array();
        meta["residual_norms"] = json::array();
        write_text(p.of("embedding.json"), meta.dump(2));
        return;
    }

    // hyperedges over the full segment split: strictly per-shard edges would
    // leave the union disconnected (one component per client), which breaks
    // the spectral embedding; the per-shard mode stays available through the
    // groups argument of the hyperedge ops
    const Hypergraph h =
        cfg.hypergraph_mode == "knn_only"
            ? knn_hyperedges(z_boot, cfg.knn_k)
            : manifold_hyperedges(z_boot, cfg.knn_k, cfg.diffusion_t);
    save_hypergraph(p.of("hypergraph.jsonl"), h);

    const LaplacianResult lap = laplacian(h);
    SpectralOptions sopts;
    sopts.seed = derive_seed(cfg.seed, 0xE16);
    sopts.basis = EigenvectorBasis::Generalized;
    const SpectralEmbedding emb =
        spectral_embed(lap.laplacian, lap.vertex_degrees, cfg.d_emb, sopts);
    write_matrix(p.of("embedding.bin"), emb.coords);
    meta["d_emb"] = emb.d_emb;
    meta["k"] = cfg.knn_k;
    if (cfg.hypergraph_mode == "manifold_hypergraph") meta["t"] = cfg.diffusion_t;
    meta["n_hyperedges"] = h.n_edges();
    meta["eigenvalues"] = emb.eigenvalues;
    meta["residual_norms"] = emb.residual_norms;
    write_text(p.of("embedding.json"), meta.dump(2));
}

void stage_cluster(const Paths& p, const PipelineConfig& cfg) {
    const Matrix x_emb = read_matrix(p.of("embedding.bin"));
    const json meta = load_json(p.of("embedding.json"));

    SegmentationArtifact art;
    art.row_ids = meta.at("row_ids").get<IndexList>();

    if (cfg.clusterer == "minibatch_kmeans") {
        MiniBatchKmeansOptions opts;
        opts.k_clusters = cfg.k_clusters;
        opts.batch = cfg.kmeans_batch;
        opts.seed = derive_seed(cfg.seed, 0x4B);
        Segmentation seg = minibatch_kmeans(x_emb, opts);
        seg.outlierness = kmeans_outlierness(x_emb, seg);
        art.labels = seg.labels;
        art.outlierness = seg.outlierness;
        art.clusterer = seg.clusterer;
        art.n_clusters = seg.n_clusters;
        save_segmentation(p, art, seg);
    } else {
        HdbscanOptions opts;
        opts.min_cluster_size = cfg.min_cluster_size;
        opts.min_samples = cfg.min_samples;
        HdbscanResult res = hdbscan(x_emb, opts);
        res.seg.outlierness = hdbscan_outlierness(res.seg, res.tree);
        art.labels = res.seg.labels;
        art.outlierness = res.seg.outlierness;
        art.clusterer = res.seg.clusterer;
        art.n_clusters = res.seg.n_clusters;
        save_segmentation(p, art, res.seg);
    }
}

void stage_risk(const Paths& p, const PipelineConfig& cfg) {
    const IngestArtifact ia = load_ingest(p);
    const ModelParams model = load_model(p);
    const SegmentationArtifact seg = load_segmentation(p);

    const Matrix rows = gather(ia.table.features, seg.row_ids);
    const Vector recon = reconstruction_error(model, rows);
    const RiskReport rep = build_risk_report(recon, seg.outlierness, seg.labels, cfg.risk_w1,
                                             cfg.risk_w2, cfg.threshold_policy);

    std::string csv = "row_id,e_norm,o_norm,r\n";
    for (std::size_t i = 0; i < seg.row_ids.size(); ++i) {
        const auto e = static_cast<Eigen::Index>(i);
        csv += std::to_string(seg.row_ids[i]) + "," + format_double(rep.e_norm[e]) + "," +
               format_double(rep.o_norm[e]) + "," + format_double(rep.r[e]) + "\n";
    }
    write_text(p.of("risk.csv"), csv);

    json j;
    j["w1"] = rep.w1;
    j["w2"] = rep.w2;
    j["threshold_policy"] = rep.threshold_policy;
    j["tau_c"] = rep.tau_c;
    json cand;
    for (auto& [pp, v] : rep.candidates.percentiles) cand["p" + std::to_string(pp)] = v;
    cand["otsu"] = rep.candidates.otsu;
    cand["degenerate"] = rep.candidates.degenerate;
    j["candidates"] = cand;
    json cr = json::object();
    for (auto& [c, v] : rep.cluster_r) cr[std::to_string(c)] = v;
    j["cluster_risk"] = cr;
    write_text(p.of("risk.json"), j.dump(2));
}

std::string top_string(const std::vector<std::pair<std::string, double>>& top) {
    std::string out;
    for (std::size_t i = 0; i < top.size(); ++i) {
        if (i) out += ";";
        out += top[i].first + ":" + format_double(top[i].second);
    }
    return out;
}

// deterministic surrogate data split shared by explain and eval
struct SurrogateSplit {
    IndexList fit_rows, holdout_rows; // positions into the segment-row array
};

SurrogateSplit surrogate_split(std::size_t n, std::uint64_t seed) {
    std::vector<int> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
    Rng rng(derive_seed(seed, 0x5A));
    rng.shuffle(order);
    const std::size_t fit = n - n / 5; // 80/20
    SurrogateSplit s;
    s.fit_rows.assign(order.begin(), order.begin() + static_cast<long>(fit));
    s.holdout_rows.assign(order.begin() + static_cast<long>(fit), order.end());
    return s;
}

void stage_explain(const Paths& p, const PipelineConfig& cfg) {
    if (!cfg.explain_enabled) {
        write_text(p.of("explanations.jsonl"), "");
        return;
    }
    const Matrix x_emb = read_matrix(p.of("embedding.bin"));
    const Matrix z_boot = read_matrix(p.of("zboot.bin"));
    const SegmentationArtifact seg = load_segmentation(p);
    const IngestArtifact ia = load_ingest(p);
    const Matrix features = gather(ia.table.features, seg.row_ids);

    std::set<int> distinct(seg.labels.begin(), seg.labels.end());
    if (distinct.size() < 2) {
        std::cerr << "explain: single cluster, nothing to explain\n";
        write_text(p.of("explanations.jsonl"), "");
        return;
    }

    const AttributeMap map = fit_attribute_map(x_emb, z_boot, cfg.ridge_lambda);
    const Matrix corr = latent_feature_correlation(z_boot, features);

    const SurrogateSplit split = surrogate_split(seg.labels.size(), cfg.seed);
    std::vector<int> fit_labels;
    for (int i : split.fit_rows) fit_labels.push_back(seg.labels[static_cast<std::size_t>(i)]);
    Matrix fit_points(static_cast<Eigen::Index>(split.fit_rows.size()), x_emb.cols());
    for (std::size_t i = 0; i < split.fit_rows.size(); ++i)
        fit_points.row(static_cast<Eigen::Index>(i)) = x_emb.row(split.fit_rows[i]);
    const int k = std::min<int>(cfg.surrogate_k, static_cast<int>(fit_points.rows()));
    const Surrogate surrogate(fit_points, fit_labels, k);

    // seed-fixed background sample from the surrogate's training points
    Rng bg_rng(derive_seed(cfg.seed, 0xB6));
    const int bg_n = std::min<int>(cfg.shap_background, static_cast<int>(fit_points.rows()));
    const std::vector<int> bg_rows =
        bg_rng.sample_without_replacement(static_cast<int>(fit_points.rows()), bg_n);
    Matrix background(bg_n, x_emb.cols());
    for (int i = 0; i < bg_n; ++i)
        background.row(i) = fit_points.row(bg_rows[static_cast<std::size_t>(i)]);

    // rows to explain: everything, or a seed-fixed sample
    std::vector<int> explain_rows;
    if (cfg.explain_sample > 0 &&
        cfg.explain_sample < static_cast<int>(seg.row_ids.size())) {
        Rng rng(derive_seed(cfg.seed, 0xEC));
        explain_rows = rng.sample_without_replacement(static_cast<int>(seg.row_ids.size()),
                                                      cfg.explain_sample);
    } else {
        explain_rows.resize(seg.row_ids.size());
        for (std::size_t i = 0; i < seg.row_ids.size(); ++i)
            explain_rows[i] = static_cast<int>(i);
    }

    ShapOptions shap_opts;
    shap_opts.mode = x_emb.cols() <= 12 ? ShapMode::Exact : ShapMode::Sampled;
    shap_opts.seed = derive_seed(cfg.seed, 0x5AB);

    std::string out;
    for (int pos : explain_rows) {
        const long did = seg.row_ids[static_cast<std::size_t>(pos)];
        const Vector x = x_emb.row(pos).transpose();

        LimeOptions lime_opts;
        lime_opts.n_samples = cfg.lime_samples;
        lime_opts.seed = derive_seed(cfg.seed, 0x11E0000ULL + static_cast<std::uint64_t>(did));
        const Vector lime_emb = lime_explain(surrogate, x, lime_opts);
        Explanation lime_expl =
            project_and_name(lime_emb, map, corr, ia.table.feature_names, cfg.top_m);
        lime_expl.did = did;
        lime_expl.method = "lime";

        const Vector shap_emb = shap_explain(surrogate, x, background, shap_opts);
        Explanation shap_expl =
            project_and_name(shap_emb, map, corr, ia.table.feature_names, cfg.top_m);
        shap_expl.did = did;
        shap_expl.method = "shap";

        json j;
        j["did"] = did;
        auto expl_json = [](const Explanation& e) {
            json x_;
            x_["emb_importances"] = std::vector<double>(
                e.emb_importances.data(), e.emb_importances.data() + e.emb_importances.size());
            json top = json::array();
            for (auto& [name, score] : e.top_original_attributes)
                top.push_back({{"feature", name}, {"score", score}});
            x_["top"] = top;
            return x_;
        };
        j["lime"] = expl_json(lime_expl);
        j["lime"]["top_string"] = top_string(lime_expl.top_original_attributes);
        j["shap"] = expl_json(shap_expl);
        j["shap"]["top_string"] = top_string(shap_expl.top_original_attributes);
        out += j.dump() + "\n";
    }
    write_text(p.of("explanations.jsonl"), out);
}

void stage_policy(const Paths& p, const PipelineConfig& cfg) {
    const SegmentationArtifact seg = load_segmentation(p);
    const Sidecar sidecar = load_sidecar(p.of("sidecar.csv"));
    const json risk_json = load_json(p.of("risk.json"));

    RiskReport risk;
    risk.tau_c = risk_json.at("tau_c").get<double>();
    for (auto& [key, v] : risk_json.at("cluster_risk").items())
        risk.cluster_r[std::stoi(key)] = v.get<double>();

    std::optional<ExplanationStrings> expl;
    if (cfg.explain_enabled) {
        ExplanationStrings strings;
        const std::string text = read_text(p.of("explanations.jsonl"));
        std::size_t start = 0;
        while (start < text.size()) {
            std::size_t end = text.find('\n', start);
            if (end == std::string::npos) end = text.size();
            if (end > start) {
                const json j = json::parse(text.substr(start, end - start));
                const long did = j.at("did").get<long>();
                strings.lime[did] = j.at("lime").at("top_string").get<std::string>();
                strings.shap[did] = j.at("shap").at("top_string").get<std::string>();
            }
            start = end + 1;
        }
        expl = std::move(strings);
    }

    const PolicyTable table = generate_policy(sidecar, seg.row_ids, seg.labels, risk, expl);
    write_text(p.of("policy.csv"), policy_csv(table));
}

void stage_eval(const Paths& p, const PipelineConfig& cfg) {
    const Matrix x_emb = read_matrix(p.of("embedding.bin"));
    const SegmentationArtifact seg = load_segmentation(p);
    const json seg_json = load_json(p.of("segmentation.json"));
    const Sidecar sidecar = load_sidecar(p.of("sidecar.csv"));

    EvalReport rep;
    rep.n_clusters = seg.n_clusters;
    rep.noise_rows = 0;
    for (int l : seg.labels) rep.noise_rows += (l == -1);
    rep.size_min = seg_json.at("size_min").get<int>();
    rep.size_median = seg_json.at("size_median").get<int>();
    rep.size_max = seg_json.at("size_max").get<int>();

    std::set<int> distinct;
    for (int l : seg.labels)
        if (l >= 0) distinct.insert(l);
    if (distinct.size() >= 2) {
        rep.silhouette_score =
            silhouette(x_emb, seg.labels, 10000, derive_seed(cfg.seed, 0x511));
        rep.dbi = davies_bouldin(x_emb, seg.labels);
    } else {
        rep.silhouette_score = std::nan("");
        rep.dbi = std::nan("");
    }

    if (sidecar.has_labels()) {
        std::vector<int> truth;
        truth.reserve(seg.row_ids.size());
        for (int r : seg.row_ids) truth.push_back(sidecar.label[static_cast<std::size_t>(r)]);
        rep.security = purity_contamination(seg.labels, truth);
    }

    if (distinct.size() >= 2) {
        const SurrogateSplit split = surrogate_split(seg.labels.size(), cfg.seed);
        if (!split.holdout_rows.empty()) {
            std::vector<int> fit_labels, test_labels;
            Matrix fit_points(static_cast<Eigen::Index>(split.fit_rows.size()), x_emb.cols());
            Matrix test_points(static_cast<Eigen::Index>(split.holdout_rows.size()), x_emb.cols());
            for (std::size_t i = 0; i < split.fit_rows.size(); ++i) {
                fit_points.row(static_cast<Eigen::Index>(i)) = x_emb.row(split.fit_rows[i]);
                fit_labels.push_back(seg.labels[static_cast<std::size_t>(split.fit_rows[i])]);
            }
            for (std::size_t i = 0; i < split.holdout_rows.size(); ++i) {
                test_points.row(static_cast<Eigen::Index>(i)) = x_emb.row(split.holdout_rows[i]);
                test_labels.push_back(seg.labels[static_cast<std::size_t>(split.holdout_rows[i])]);
            }
            if (std::set<int>(fit_labels.begin(), fit_labels.end()).size() >= 2) {
                const int k = std::min<int>(cfg.surrogate_k, static_cast<int>(fit_points.rows()));
                const Surrogate surrogate(fit_points, fit_labels, k);
                rep.fidelity = surrogate_fidelity(surrogate, test_points, test_labels);
            }
        }
    }

    json j;
    j["silhouette"] = std::isnan(rep.silhouette_score) ? json(nullptr) : json(rep.silhouette_score);
    j["dbi"] = std::isnan(rep.dbi) ? json(nullptr) : json(rep.dbi);
    j["n_clusters"] = rep.n_clusters;
    j["noise_rows"] = rep.noise_rows;
    j["size_min"] = rep.size_min;
    j["size_median"] = rep.size_median;
    j["size_max"] = rep.size_max;
    if (rep.security) {
        j["security"] = {{"weighted_purity", rep.security->weighted_purity},
                         {"mean_purity", rep.security->mean_purity},
                         {"attack_in_benign", rep.security->attack_in_benign},
                         {"benign_in_attack", rep.security->benign_in_attack},
                         {"noise_rows", rep.security->noise_rows},
                         {"noise_attack_fraction", rep.security->noise_attack_fraction}};
    } else {
        j["security"] = nullptr; // labels unavailable
    }
    if (rep.fidelity) {
        j["fidelity"] = {{"accuracy", rep.fidelity->accuracy},
                         {"macro_f1", rep.fidelity->macro_f1},
                         {"micro_f1", rep.fidelity->micro_f1}};
    } else {
        j["fidelity"] = nullptr;
    }
    write_text(p.of("eval.json"), j.dump(2));
    write_text(p.of("eval.txt"),
               eval_report_text(rep, seg.clusterer, cfg.hypergraph_mode));
}

void run_stage_body(const Paths& p, const PipelineConfig& cfg, const std::string& stage) {
    if (stage == "ingest") stage_ingest(p, cfg);
    else if (stage == "train") stage_train(p, cfg);
    else if (stage == "embed") stage_embed(p, cfg);
    else if (stage == "cluster") stage_cluster(p, cfg);
    else if (stage == "risk") stage_risk(p, cfg);
    else if (stage == "explain") stage_explain(p, cfg);
    else if (stage == "policy") stage_policy(p, cfg);
    else if (stage == "eval") stage_eval(p, cfg);
    else throw std::invalid_argument("unknown stage: " + stage);
}

StageTiming execute_stage(const Paths& p, Manifest& manifest, const PipelineConfig& cfg,
                          const std::string& stage) {
    StageTiming timing;
    timing.stage = stage;
    const std::string signature = stage_signature(p, cfg, stage);
    if (stage_up_to_date(p, manifest, cfg, stage, signature)) {
        timing.skipped = true;
        return timing;
    }
    const auto start = std::chrono::steady_clock::now();
    try {
        run_stage_body(p, cfg, stage);
    } catch (const std::exception& e) {
        throw std::runtime_error("stage '" + stage + "' failed: " + e.what());
    }
    timing.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    record_stage(p, manifest, cfg, stage, signature, timing.seconds);
    return timing;
}

}  // namespace

RunReport run_pipeline(const PipelineConfig& config) {
    config.validate();
    Paths p{fs::path(config.output_dir)};
    fs::create_directories(p.dir);
    DirLock lock(p.dir);
    Manifest manifest = Manifest::open(p);

    RunReport report;
    for (const char* stage : kStageNames)
        report.timings.push_back(execute_stage(p, manifest, config, stage));

    // consolidated run report
    json j;
    json timings = json::array();
    for (const auto& t : report.timings)
        timings.push_back({{"stage", t.stage}, {"seconds", t.seconds}, {"skipped", t.skipped}});
    j["timings"] = timings;
    j["config"] = json::parse(config.to_json_text());
    {
        // last-round training diagnostics
        const std::string rounds = read_text(p.of("rounds.jsonl"));
        const std::size_t last_nl = rounds.find_last_of('\n', rounds.size() - 2);
        if (!rounds.empty()) {
            const std::string last_line =
                rounds.substr(last_nl == std::string::npos ? 0 : last_nl + 1);
            if (!last_line.empty() && last_line != "\n")
                j["final_round"] = json::parse(last_line);
        }
    }
    j["eval"] = load_json(p.of("eval.json"));
    j["risk"] = load_json(p.of("risk.json"));
    write_text(p.of("run_report.json"), j.dump(2));

    report.report_text = render_report(config);
    return report;
}

StageTiming run_stage(const PipelineConfig& config, const std::string& stage) {
    config.validate();
    Paths p{fs::path(config.output_dir)};
    fs::create_directories(p.dir);
    DirLock lock(p.dir);
    Manifest manifest = Manifest::open(p);
    return execute_stage(p, manifest, config, stage);
}

std::string render_report(const PipelineConfig& config) {
    Paths p{fs::path(config.output_dir)};
    std::string out;
    out += "== ztseg run report ==\n";
    out += "output dir: " + config.output_dir + "\n\n";
    if (fs::exists(p.of("eval.txt"))) out += read_text(p.of("eval.txt"));
    if (fs::exists(p.of("risk.json"))) {
        const json r = load_json(p.of("risk.json"));
        out += "threshold policy   " + r.at("threshold_policy").get<std::string>() + "\n";
        out += "tau_c              " + format_double(r.at("tau_c").get<double>()) + "\n";
    }
    if (fs::exists(p.of("policy.csv"))) {
        const CsvTable policy = read_csv(p.of("policy.csv"));
        std::size_t allow = 0;
        for (const auto& row : policy.rows) allow += (row[8] == "Allow");
        out += "policy rows        " + std::to_string(policy.rows.size()) + "\n";
        out += "allow decisions    " + std::to_string(allow) + "\n";
    }
    if (fs::exists(p.of("manifest.json"))) {
        const json m = load_json(p.of("manifest.json"));
        out += "\nstage timings (s)\n";
        for (const char* stage : kStageNames) {
            if (m.at("stages").contains(stage)) {
                out += "  " + std::string(stage) + "  " +
                       format_double(m.at("stages").at(stage).value("seconds", 0.0)) + "\n";
            }
        }
    }
    return out;
}

}  // namespace ztseg
