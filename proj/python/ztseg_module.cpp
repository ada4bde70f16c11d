#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ztseg/dnae.hpp"
#include "ztseg/eval_metrics.hpp"
#include "ztseg/explain.hpp"
#include "ztseg/federated.hpp"
#include "ztseg/flow_ingest.hpp"
#include "ztseg/hypergraph.hpp"
#include "ztseg/pipeline.hpp"
#include "ztseg/risk_policy.hpp"
#include "ztseg/segmentation.hpp"

namespace py = pybind11;
using namespace ztseg;

namespace {

py::dict round_log_dict(const RoundLog& r) {
    py::dict d;
    d["round"] = r.round;
    d["train_benign_mse"] = r.train_benign_mse;
    d["val_benign_mse"] = r.val_benign_mse ? py::cast(*r.val_benign_mse) : py::none();
    d["val_attack_mse"] = r.val_attack_mse ? py::cast(*r.val_attack_mse) : py::none();
    d["participants"] = r.participants;
    return d;
}

}  // namespace

PYBIND11_MODULE(_ztseg, m) {
    m.doc() = "federated hypergraph micro-segmentation core";

    // ---- ingest ----
    py::class_<Sidecar>(m, "Sidecar")
        .def_readonly("src_ip", &Sidecar::src_ip)
        .def_readonly("dst_ip", &Sidecar::dst_ip)
        .def_readonly("src_port", &Sidecar::src_port)
        .def_readonly("dst_port", &Sidecar::dst_port)
        .def_readonly("label", &Sidecar::label)
        .def_readonly("protocol", &Sidecar::protocol);

    py::class_<RawFlowTable>(m, "RawFlowTable")
        .def_property_readonly("n_rows", &RawFlowTable::n_rows)
        .def_readonly("numeric_names", &RawFlowTable::numeric_names)
        .def_readonly("categorical_names", &RawFlowTable::categorical_names)
        .def_readonly("numeric", &RawFlowTable::numeric)
        .def_readonly("sidecar", &RawFlowTable::sidecar)
        .def_readonly("dropped_rows", &RawFlowTable::dropped_rows);

    py::class_<FlowTable>(m, "FlowTable")
        .def_property_readonly("n_rows", &FlowTable::n_rows)
        .def_property_readonly("dim", &FlowTable::dim)
        .def_readonly("features", &FlowTable::features)
        .def_readonly("feature_names", &FlowTable::feature_names)
        .def_readonly("sidecar", &FlowTable::sidecar)
        .def_readonly("unseen_categories", &FlowTable::unseen_categories);

    py::class_<SplitIndex>(m, "SplitIndex")
        .def_readonly("train_idx", &SplitIndex::train_idx)
        .def_readonly("val_idx", &SplitIndex::val_idx)
        .def_readonly("test_idx", &SplitIndex::test_idx);

    py::class_<ClientShard>(m, "ClientShard")
        .def_readonly("client_id", &ClientShard::client_id)
        .def_readonly("row_indices", &ClientShard::row_indices);

    m.def(
        "generate_synthetic",
        [](Eigen::Index n, double attack_fraction, int n_protocols, double mean_shift,
           std::uint64_t seed) {
            SyntheticSpec spec;
            spec.n = n;
            spec.attack_fraction = attack_fraction;
            spec.n_protocols = n_protocols;
            spec.mean_shift = mean_shift;
            spec.seed = seed;
            return generate_synthetic(spec);
        },
        py::arg("n"), py::arg("attack_fraction") = 0.073, py::arg("n_protocols") = 3,
        py::arg("mean_shift") = 4.0, py::arg("seed") = 42);

    m.def(
        "load_csv",
        [](const std::string& path, const std::map<std::string, std::string>& schema) {
            Schema s;
            for (auto& [col, role] : schema) s[col] = parse_column_role(role);
            return load_csv(path, s);
        },
        py::arg("path"), py::arg("schema"));

    m.def("split_80_10_10", &split_80_10_10, py::arg("n"), py::arg("seed"));
    m.def("fit_preprocess", &fit_preprocess, py::arg("raw"), py::arg("train_idx"),
          py::arg("max_categories") = 10000);
    m.def(
        "dirichlet_partition",
        [](const RawFlowTable& raw, const IndexList& rows, int k, double alpha,
           std::uint64_t seed) { return dirichlet_partition(raw.sidecar, rows, k, alpha, seed); },
        py::arg("raw"), py::arg("rows"), py::arg("k"), py::arg("alpha"), py::arg("seed"));

    // ---- autoencoder / federated ----
    py::class_<ModelParams>(m, "ModelParams")
        .def_property_readonly("input_dim", &ModelParams::input_dim)
        .def_property_readonly("latent_dim", &ModelParams::latent_dim)
        .def("flatten", &ModelParams::flatten);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("local_epochs", &TrainConfig::local_epochs)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("rounds", &TrainConfig::rounds)
        .def_readwrite("client_lr", &TrainConfig::client_lr)
        .def_readwrite("server_lr", &TrainConfig::server_lr)
        .def_readwrite("server_momentum", &TrainConfig::server_momentum)
        .def_readwrite("participation", &TrainConfig::participation)
        .def_readwrite("seed", &TrainConfig::seed);

    m.def(
        "train_federated",
        [](const FlowTable& table, const std::vector<ClientShard>& shards,
           const IndexList& val_idx, const TrainConfig& cfg, Eigen::Index latent_dim,
           const std::vector<Eigen::Index>& encoder_hidden,
           const std::vector<Eigen::Index>& decoder_hidden) {
            const FederatedData data = build_federated_data(table, shards, val_idx);
            ModelTopology topo;
            topo.latent_dim = latent_dim;
            topo.encoder_hidden = encoder_hidden;
            topo.decoder_hidden = decoder_hidden;
            const FederatedModel model = train_federated(data, cfg, topo, table.dim());
            py::list logs;
            for (const auto& r : model.rounds) logs.append(round_log_dict(r));
            return py::make_tuple(model.params, logs);
        },
        py::arg("table"), py::arg("shards"), py::arg("val_idx"), py::arg("config"),
        py::arg("latent_dim") = 25,
        py::arg("encoder_hidden") = std::vector<Eigen::Index>{256, 64},
        py::arg("decoder_hidden") = std::vector<Eigen::Index>{128});

    m.def("encode", &encode_all, py::arg("params"), py::arg("rows"));
    m.def("reconstruction_error", &reconstruction_error, py::arg("params"), py::arg("rows"));

    // ---- hypergraph / embedding ----
    py::class_<Hypergraph>(m, "Hypergraph")
        .def_property_readonly("n_vertices", [](const Hypergraph& h) { return h.n_vertices; })
        .def_property_readonly("n_edges", &Hypergraph::n_edges)
        .def_readonly("edges", &Hypergraph::edges)
        .def_property_readonly("weights", [](const Hypergraph& h) { return h.weights; });

    m.def(
        "knn_hyperedges",
        [](const Matrix& z, int k, const std::optional<VertexGroups>& groups) {
            return knn_hyperedges(z, k, groups);
        },
        py::arg("z"), py::arg("k"), py::arg("groups") = std::nullopt);
    m.def(
        "manifold_hyperedges",
        [](const Matrix& z, int k, int t, const std::optional<VertexGroups>& groups) {
            return manifold_hyperedges(z, k, t, groups);
        },
        py::arg("z"), py::arg("k"), py::arg("t") = 3, py::arg("groups") = std::nullopt);

    m.def(
        "laplacian_dense",
        [](const Hypergraph& h) {
            const LaplacianResult lap = laplacian(h);
            return py::make_tuple(Matrix(lap.laplacian), lap.vertex_degrees);
        },
        py::arg("hypergraph"));

    m.def(
        "spectral_embed",
        [](const Hypergraph& h, int d_emb, std::uint64_t seed) {
            const LaplacianResult lap = laplacian(h);
            SpectralOptions opts;
            opts.seed = seed;
            const SpectralEmbedding emb = spectral_embed(lap.laplacian, d_emb, opts);
            return py::make_tuple(emb.coords, emb.eigenvalues, emb.residual_norms);
        },
        py::arg("hypergraph"), py::arg("d_emb") = 10, py::arg("seed") = 7);

    // ---- clustering ----
    m.def(
        "minibatch_kmeans",
        [](const Matrix& x, int k_clusters, int batch, std::uint64_t seed) {
            MiniBatchKmeansOptions opts;
            opts.k_clusters = k_clusters;
            opts.batch = batch;
            opts.seed = seed;
            Segmentation seg = minibatch_kmeans(x, opts);
            seg.outlierness = kmeans_outlierness(x, seg);
            return py::make_tuple(seg.labels, seg.outlierness, seg.centroids);
        },
        py::arg("x"), py::arg("k_clusters") = 500, py::arg("batch") = 1024, py::arg("seed") = 42);

    m.def(
        "hdbscan",
        [](const Matrix& x, int min_cluster_size, int min_samples) {
            HdbscanOptions opts;
            opts.min_cluster_size = min_cluster_size;
            opts.min_samples = min_samples;
            HdbscanResult res = hdbscan(x, opts);
            const Vector scores = hdbscan_outlierness(res.seg, res.tree);
            return py::make_tuple(res.seg.labels, scores, res.seg.n_clusters);
        },
        py::arg("x"), py::arg("min_cluster_size") = 0, py::arg("min_samples") = 0);

    // ---- risk ----
    m.def("robust_normalize", &robust_normalize, py::arg("values"));
    m.def("instance_risk", &instance_risk, py::arg("e_norm"), py::arg("o_norm"),
          py::arg("w1") = 0.5, py::arg("w2") = 0.5);
    m.def("cluster_risk", &cluster_risk, py::arg("r"), py::arg("labels"));
    m.def("otsu_threshold", &otsu_threshold, py::arg("values"), py::arg("bins") = 256);

    // ---- explain ----
    py::class_<AttributeMap>(m, "AttributeMap")
        .def_readonly("w_emb2lat", &AttributeMap::w_emb2lat)
        .def_readonly("b_emb2lat", &AttributeMap::b_emb2lat)
        .def_readonly("fit_rmse", &AttributeMap::fit_rmse);

    py::class_<Surrogate>(m, "Surrogate")
        .def(py::init<Matrix, std::vector<int>, int>(), py::arg("points"), py::arg("labels"),
             py::arg("k") = 25)
        .def("predict", &Surrogate::predict)
        .def("predict_proba", &Surrogate::predict_proba)
        .def_property_readonly("classes", &Surrogate::classes);

    m.def("fit_attribute_map", &fit_attribute_map, py::arg("x_emb"), py::arg("z_boot"),
          py::arg("ridge_lambda") = 1.0);
    m.def(
        "lime_explain",
        [](const Surrogate& s, const Vector& x, int n_samples, std::uint64_t seed) {
            LimeOptions opts;
            opts.n_samples = n_samples;
            opts.seed = seed;
            return lime_explain(s, x, opts);
        },
        py::arg("surrogate"), py::arg("x"), py::arg("n_samples") = 1000, py::arg("seed") = 1);
    m.def(
        "shap_explain",
        [](const Surrogate& s, const Vector& x, const Matrix& background, bool exact,
           std::uint64_t seed) {
            ShapOptions opts;
            opts.mode = exact ? ShapMode::Exact : ShapMode::Sampled;
            opts.seed = seed;
            return shap_explain(s, x, background, opts);
        },
        py::arg("surrogate"), py::arg("x"), py::arg("background"), py::arg("exact") = true,
        py::arg("seed") = 2);
    m.def("stability_score", &stability_score, py::arg("runs"));

    // ---- metrics ----
    m.def("silhouette", &silhouette, py::arg("x"), py::arg("labels"),
          py::arg("sample_cap") = 10000, py::arg("seed") = 0);
    m.def("davies_bouldin", &davies_bouldin, py::arg("x"), py::arg("labels"));
    m.def(
        "purity_contamination",
        [](const std::vector<int>& labels, const std::vector<int>& truth) {
            const PurityReport rep = purity_contamination(labels, truth);
            py::dict d;
            d["weighted_purity"] = rep.weighted_purity;
            d["mean_purity"] = rep.mean_purity;
            d["attack_in_benign"] = rep.attack_in_benign;
            d["benign_in_attack"] = rep.benign_in_attack;
            d["noise_rows"] = rep.noise_rows;
            return d;
        },
        py::arg("labels"), py::arg("truth"));

    // ---- pipeline ----
    m.def(
        "run_pipeline",
        [](const std::string& config_json) {
            const PipelineConfig cfg = PipelineConfig::from_json_text(config_json);
            const RunReport report = run_pipeline(cfg);
            py::list timings;
            for (const auto& t : report.timings) {
                py::dict d;
                d["stage"] = t.stage;
                d["seconds"] = t.seconds;
                d["skipped"] = t.skipped;
                timings.append(d);
            }
            py::dict out;
            out["timings"] = timings;
            out["report_text"] = report.report_text;
            return out;
        },
        py::arg("config_json"));
    m.def(
        "run_stage",
        [](const std::string& config_json, const std::string& stage) {
            const PipelineConfig cfg = PipelineConfig::from_json_text(config_json);
            const StageTiming t = run_stage(cfg, stage);
            py::dict d;
            d["stage"] = t.stage;
            d["seconds"] = t.seconds;
            d["skipped"] = t.skipped;
            return d;
        },
        py::arg("config_json"), py::arg("stage"));
}
