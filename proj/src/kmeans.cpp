#include <algorithm>
#include <cmath>
#include <limits>

#include "ztseg/rng.hpp"
#include "ztseg/segmentation.hpp"

namespace ztseg {

namespace {

// nearest centroid, ties to the lowest index
int nearest_center(const Matrix& centers, const Eigen::RowVectorXd& p, double* dist2_out) {
    int best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centers.rows(); ++c) {
        const double d2 = (centers.row(c) - p).squaredNorm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best = static_cast<int>(c);
        }
    }
    if (dist2_out) *dist2_out = best_d2;
    return best;
}

Matrix kmeanspp_seed(const Matrix& x, const std::vector<int>& sample, int k, Rng& rng) {
    Matrix centers(k, x.cols());
    const int m = static_cast<int>(sample.size());
    centers.row(0) = x.row(sample[static_cast<std::size_t>(rng.uniform_int(m))]);
    Vector d2 = Vector::Constant(m, std::numeric_limits<double>::infinity());
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (int i = 0; i < m; ++i) {
            const double d = (x.row(sample[static_cast<std::size_t>(i)]) - centers.row(c - 1))
                                 .squaredNorm();
            d2[i] = std::min(d2[i], d);
            total += d2[i];
        }
        int pick = 0;
        if (total <= 0.0) {
            pick = rng.uniform_int(m); // all remaining points coincide with a center
        } else {
            const double target = rng.uniform() * total;
            double cum = 0.0;
            for (int i = 0; i < m; ++i) {
                cum += d2[i];
                if (cum >= target) {
                    pick = i;
                    break;
                }
            }
        }
        centers.row(c) = x.row(sample[static_cast<std::size_t>(pick)]);
    }
    return centers;
}

double full_inertia(const Matrix& x, const Matrix& centers) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double d2;
        nearest_center(centers, x.row(i), &d2);
        total += d2;
    }
    return total;
}

}  // namespace

Segmentation minibatch_kmeans(const Matrix& x, const MiniBatchKmeansOptions& opts) {
    const Eigen::Index n = x.rows();
    require(opts.k_clusters >= 1, "minibatch_kmeans: k_clusters must be >= 1");
    require(static_cast<Eigen::Index>(opts.k_clusters) <= n,
            "minibatch_kmeans: k_clusters exceeds row count");
    require(opts.batch >= 1, "minibatch_kmeans: batch must be >= 1");

    Rng rng(opts.seed);
    const int k = opts.k_clusters;

    // seeding sample
    const int init_size = static_cast<int>(
        std::min<Eigen::Index>(n, std::max<Eigen::Index>(3LL * opts.batch, 3LL * k)));
    std::vector<int> sample = rng.sample_without_replacement(static_cast<int>(n), init_size);
    Matrix centers = kmeanspp_seed(x, sample, k, rng);

    Segmentation seg;
    seg.clusterer = "minibatch_kmeans";
    seg.initial_inertia = full_inertia(x, centers);

    std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
    std::vector<int> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = static_cast<int>(i);

    for (int epoch = 0; epoch < opts.max_epochs; ++epoch) {
        const Matrix before = centers;
        rng.shuffle(order);
        for (Eigen::Index at = 0; at < n; at += opts.batch) {
            const Eigen::Index stop = std::min<Eigen::Index>(at + opts.batch, n);
            // assign whole batch against fixed centers, then apply updates
            std::vector<int> assign(static_cast<std::size_t>(stop - at));
            for (Eigen::Index i = at; i < stop; ++i)
                assign[static_cast<std::size_t>(i - at)] =
                    nearest_center(centers, x.row(order[static_cast<std::size_t>(i)]), nullptr);
            for (Eigen::Index i = at; i < stop; ++i) {
                const int c = assign[static_cast<std::size_t>(i - at)];
                counts[static_cast<std::size_t>(c)] += 1.0;
                const double eta = 1.0 / counts[static_cast<std::size_t>(c)];
                centers.row(c) += eta * (x.row(order[static_cast<std::size_t>(i)]) - centers.row(c));
            }
        }

        // reseed centers that never received a point
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0.0) continue;
            double worst = -1.0;
            int farthest = 0;
            for (Eigen::Index i = 0; i < n; ++i) {
                double d2;
                nearest_center(centers, x.row(i), &d2);
                if (d2 > worst) {
                    worst = d2;
                    farthest = static_cast<int>(i);
                }
            }
            centers.row(c) = x.row(farthest);
            counts[static_cast<std::size_t>(c)] = 1.0;
        }

        const double movement = (centers - before).rowwise().norm().maxCoeff();
        if (movement < opts.movement_tol) break;
    }

    // final full assignment
    seg.labels.resize(static_cast<std::size_t>(n));
    seg.final_inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double d2;
        seg.labels[static_cast<std::size_t>(i)] = nearest_center(centers, x.row(i), &d2);
        seg.final_inertia += d2;
    }

    // compact away empty clusters
    std::vector<int> remap(static_cast<std::size_t>(k), -1);
    std::vector<int> sizes(static_cast<std::size_t>(k), 0);
    for (int l : seg.labels) ++sizes[static_cast<std::size_t>(l)];
    int next = 0;
    for (int c = 0; c < k; ++c)
        if (sizes[static_cast<std::size_t>(c)] > 0) remap[static_cast<std::size_t>(c)] = next++;
    seg.n_clusters = next;
    seg.centroids.resize(next, x.cols());
    seg.cluster_sizes.assign(static_cast<std::size_t>(next), 0);
    for (int c = 0; c < k; ++c)
        if (remap[static_cast<std::size_t>(c)] >= 0)
            seg.centroids.row(remap[static_cast<std::size_t>(c)]) = centers.row(c);
    for (auto& l : seg.labels) {
        l = remap[static_cast<std::size_t>(l)];
        ++seg.cluster_sizes[static_cast<std::size_t>(l)];
    }
    return seg;
}

Vector kmeans_outlierness(const Matrix& x, const Segmentation& seg) {
    require(seg.clusterer == "minibatch_kmeans", "kmeans_outlierness: wrong clusterer");
    require(static_cast<Eigen::Index>(seg.labels.size()) == x.rows(),
            "kmeans_outlierness: label count mismatch");
    Vector out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        out[i] = (x.row(i) - seg.centroids.row(seg.labels[static_cast<std::size_t>(i)])).norm();
    return out;
}

}  // namespace ztseg
