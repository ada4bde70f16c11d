#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ztseg/types.hpp"

namespace ztseg {

struct Segmentation {
    std::vector<int> labels; // cluster ids 0..C-1; -1 = noise (HDBSCAN only)
    Vector outlierness;      // filled by the *_outlierness ops
    std::string clusterer;
    int n_clusters = 0;
    std::vector<int> cluster_sizes;

    // kmeans extras
    Matrix centroids;            // n_clusters x d (empty for HDBSCAN)
    double initial_inertia = -1; // full-assignment inertia after seeding
    double final_inertia = -1;

    std::size_t noise_count() const {
        std::size_t c = 0;
        for (int l : labels) c += (l == -1);
        return c;
    }
};

struct MiniBatchKmeansOptions {
    int k_clusters = 500;
    int batch = 1024;
    int max_epochs = 100;
    double movement_tol = 1e-4;
    std::uint64_t seed = 42;
};

// Sculley-style minibatch k-means: k-means++ seeding on a sample, streaming
// per-center mean updates, empty clusters reseeded to the farthest point.
// Final labels are compacted to 0..C-1 over nonempty clusters.
Segmentation minibatch_kmeans(const Matrix& x, const MiniBatchKmeansOptions& opts);

// Raw distance to the assigned centroid.
Vector kmeans_outlierness(const Matrix& x, const Segmentation& seg);

// Condensed single-linkage tree over mutual-reachability distances.
struct CondensedTree {
    // one record per child (cluster or point) leaving a parent cluster
    struct Record {
        int parent;     // condensed cluster id (>= n points offset internally removed)
        int child;      // < n_points: point id; >= n_points: condensed cluster id
        double lambda;  // 1 / distance at which the child separates
        int child_size;
    };
    int n_points = 0;
    std::vector<Record> records;
    int root = 0; // condensed id of the root cluster
};

struct HdbscanOptions {
    int min_cluster_size = 0; // 0 -> auto: max(10, floor(1e-4 * n))
    int min_samples = 0;      // 0 -> min_cluster_size
};

struct HdbscanResult {
    Segmentation seg;
    CondensedTree tree;
    double mst_total_weight = 0.0;
    std::vector<double> mst_edge_weights; // ascending
};

int hdbscan_auto_min_cluster_size(Eigen::Index n);

// Full pipeline: core distances, mutual reachability, exact Prim MST,
// single-linkage dendrogram, condensed tree, excess-of-mass extraction.
HdbscanResult hdbscan(const Matrix& x, const HdbscanOptions& opts = {});

// GLOSH-style score 1 - lambda_point / lambda_max(cluster); noise points are
// exactly 1.
Vector hdbscan_outlierness(const Segmentation& seg, const CondensedTree& tree);

}  // namespace ztseg
