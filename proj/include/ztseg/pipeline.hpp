#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ztseg/dnae.hpp"
#include "ztseg/federated.hpp"
#include "ztseg/flow_ingest.hpp"
#include "ztseg/types.hpp"

namespace ztseg {

struct DatasetConfig {
    std::string csv_path; // empty -> synthetic
    Schema schema;
    SyntheticSpec synthetic;

    bool is_synthetic() const { return csv_path.empty(); }
};

struct PipelineConfig {
    DatasetConfig dataset;

    // federated setup
    int clients = 10;
    double alpha = 0.7;
    bool centralized = false; // no-FL ablation: one client, full participation
    TrainConfig train;
    ModelTopology topology;

    // hypergraph + embedding
    std::string hypergraph_mode = "manifold_hypergraph"; // knn_only|manifold_hypergraph|none
    int knn_k = 12;
    int diffusion_t = 3;
    int d_emb = 10;

    // clustering
    std::string clusterer = "hdbscan"; // minibatch_kmeans | hdbscan
    int k_clusters = 500;
    int kmeans_batch = 1024;
    int min_cluster_size = 0; // 0 = auto
    int min_samples = 0;      // 0 = min_cluster_size

    // risk + policy
    double risk_w1 = 0.5;
    double risk_w2 = 0.5;
    std::string threshold_policy = "otsu"; // otsu | p50..p95 (steps of 5)

    // explanations
    bool explain_enabled = true;
    int explain_sample = 0; // 0 = every policy row
    int lime_samples = 1000;
    int shap_background = 100;
    int surrogate_k = 25;
    double ridge_lambda = 1.0;
    int top_m = 3;

    std::string segment_split = "test"; // train | test | all
    std::uint64_t seed = 42;
    std::string output_dir = "out";

    static PipelineConfig from_json_text(const std::string& text);
    static PipelineConfig from_json_file(const std::filesystem::path& path);
    std::string to_json_text() const;
    void validate() const;
};

extern const char* const kStageNames[8]; // ingest train embed cluster risk explain policy eval

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
    bool skipped = false;
};

struct RunReport {
    std::vector<StageTiming> timings;
    std::string report_text; // consolidated human-readable report
};

// Run the full pipeline. Stages whose inputs are unchanged (by content hash)
// are skipped; deleting an artifact forces only that stage (and downstream)
// to rerun.
RunReport run_pipeline(const PipelineConfig& config);

// Run one stage against existing upstream artifacts. Throws with the name of
// the missing upstream stage when prerequisites are absent.
StageTiming run_stage(const PipelineConfig& config, const std::string& stage);

// Render the consolidated report from existing artifacts.
std::string render_report(const PipelineConfig& config);

}  // namespace ztseg
