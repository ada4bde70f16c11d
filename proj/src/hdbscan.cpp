#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "ztseg/segmentation.hpp"

namespace ztseg {

namespace {

// lambda = 1/distance, kept finite so stability sums stay well-defined
double to_lambda(double dist) { return 1.0 / std::max(dist, 1e-300); }

struct MstEdge {
    int a, b;
    double weight;
};

struct DendrogramNode {
    int left, right;  // node ids; < n are leaves
    double distance;
    int size;
};

}  // namespace

int hdbscan_auto_min_cluster_size(Eigen::Index n) {
    return std::max<int>(10, static_cast<int>(n / 10000));
}

HdbscanResult hdbscan(const Matrix& x, const HdbscanOptions& opts) {
    const Eigen::Index n = x.rows();
    const int mcs =
        opts.min_cluster_size > 0 ? opts.min_cluster_size : hdbscan_auto_min_cluster_size(n);
    const int ms = opts.min_samples > 0 ? opts.min_samples : mcs;
    require(mcs >= 2, "hdbscan: min_cluster_size must be >= 2");
    require(n >= 2 * static_cast<Eigen::Index>(mcs),
            "hdbscan: need at least 2*min_cluster_size rows");
    require(static_cast<Eigen::Index>(ms) < n, "hdbscan: min_samples must be < n");

    // core distance: distance to the min_samples-th nearest neighbor (self
    // excluded)
    Vector core(n);
    {
        std::vector<double> dists(static_cast<std::size_t>(n - 1));
        for (Eigen::Index i = 0; i < n; ++i) {
            std::size_t at = 0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) continue;
                dists[at++] = (x.row(i) - x.row(j)).norm();
            }
            std::nth_element(dists.begin(), dists.begin() + (ms - 1), dists.end());
            core[i] = dists[static_cast<std::size_t>(ms - 1)];
        }
    }

    // exact Prim MST over the implicit mutual-reachability graph
    std::vector<MstEdge> mst;
    mst.reserve(static_cast<std::size_t>(n - 1));
    {
        std::vector<char> in_tree(static_cast<std::size_t>(n), 0);
        std::vector<double> best(static_cast<std::size_t>(n),
                                 std::numeric_limits<double>::infinity());
        std::vector<int> from(static_cast<std::size_t>(n), 0);
        in_tree[0] = 1;
        int current = 0;
        for (Eigen::Index step = 1; step < n; ++step) {
            // relax edges from the vertex just added
            for (Eigen::Index j = 0; j < n; ++j) {
                if (in_tree[static_cast<std::size_t>(j)]) continue;
                const double d = (x.row(current) - x.row(j)).norm();
                const double mr = std::max({core[current], core[j], d});
                if (mr < best[static_cast<std::size_t>(j)]) {
                    best[static_cast<std::size_t>(j)] = mr;
                    from[static_cast<std::size_t>(j)] = current;
                }
            }
            int pick = -1;
            double pick_w = std::numeric_limits<double>::infinity();
            for (Eigen::Index j = 0; j < n; ++j) {
                if (in_tree[static_cast<std::size_t>(j)]) continue;
                if (best[static_cast<std::size_t>(j)] < pick_w) {
                    pick_w = best[static_cast<std::size_t>(j)];
                    pick = static_cast<int>(j);
                }
            }
            mst.push_back({from[static_cast<std::size_t>(pick)], pick, pick_w});
            in_tree[static_cast<std::size_t>(pick)] = 1;
            current = pick;
        }
    }

    HdbscanResult out;
    out.mst_edge_weights.reserve(mst.size());
    for (const auto& e : mst) out.mst_edge_weights.push_back(e.weight);
    std::sort(out.mst_edge_weights.begin(), out.mst_edge_weights.end());
    out.mst_total_weight =
        std::accumulate(out.mst_edge_weights.begin(), out.mst_edge_weights.end(), 0.0);

    // single-linkage dendrogram: merge MST edges ascending; nodes n..2n-2
    std::vector<DendrogramNode> dendro;
    dendro.reserve(static_cast<std::size_t>(n - 1));
    {
        std::stable_sort(mst.begin(), mst.end(),
                         [](const MstEdge& a, const MstEdge& b) { return a.weight < b.weight; });
        std::vector<int> parent(static_cast<std::size_t>(2 * n - 1));
        std::iota(parent.begin(), parent.end(), 0);
        std::vector<int> component(static_cast<std::size_t>(2 * n - 1)); // current node id
        std::iota(component.begin(), component.end(), 0);
        std::vector<int> size(static_cast<std::size_t>(2 * n - 1), 1);
        auto find = [&](int v) {
            while (parent[static_cast<std::size_t>(v)] != v) {
                parent[static_cast<std::size_t>(v)] =
                    parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(v)])];
                v = parent[static_cast<std::size_t>(v)];
            }
            return v;
        };
        int next_node = static_cast<int>(n);
        for (const auto& e : mst) {
            const int ra = find(e.a), rb = find(e.b);
            const int na = component[static_cast<std::size_t>(ra)];
            const int nb = component[static_cast<std::size_t>(rb)];
            dendro.push_back({na, nb, e.weight,
                              size[static_cast<std::size_t>(na)] + size[static_cast<std::size_t>(nb)]});
            parent[static_cast<std::size_t>(rb)] = ra;
            component[static_cast<std::size_t>(ra)] = next_node;
            size[static_cast<std::size_t>(next_node)] =
                size[static_cast<std::size_t>(na)] + size[static_cast<std::size_t>(nb)];
            ++next_node;
        }
    }

    // condensed tree at min_cluster_size
    CondensedTree& tree = out.tree;
    tree.n_points = static_cast<int>(n);
    tree.root = static_cast<int>(n);
    {
        const int root_node = static_cast<int>(2 * n - 2);
        std::vector<int> relabel(static_cast<std::size_t>(2 * n - 1), -1);
        relabel[static_cast<std::size_t>(root_node)] = tree.root;
        int next_cluster = tree.root + 1;

        auto node_size = [&](int node) {
            return node < n ? 1 : dendro[static_cast<std::size_t>(node - n)].size;
        };
        auto leaves_under = [&](int node, std::vector<int>& acc) {
            std::vector<int> stack = {node};
            while (!stack.empty()) {
                const int v = stack.back();
                stack.pop_back();
                if (v < n) {
                    acc.push_back(v);
                } else {
                    stack.push_back(dendro[static_cast<std::size_t>(v - n)].left);
                    stack.push_back(dendro[static_cast<std::size_t>(v - n)].right);
                }
            }
        };

        std::vector<int> stack = {root_node};
        while (!stack.empty()) {
            const int node = stack.back();
            stack.pop_back();
            if (node < n) continue;
            const auto& d = dendro[static_cast<std::size_t>(node - n)];
            const double lambda = to_lambda(d.distance);
            const int cluster = relabel[static_cast<std::size_t>(node)];
            const int ls = node_size(d.left), rs = node_size(d.right);
            const bool left_big = ls >= mcs, right_big = rs >= mcs;
            if (left_big && right_big) {
                relabel[static_cast<std::size_t>(d.left)] = next_cluster++;
                tree.records.push_back({cluster, relabel[static_cast<std::size_t>(d.left)], lambda, ls});
                relabel[static_cast<std::size_t>(d.right)] = next_cluster++;
                tree.records.push_back({cluster, relabel[static_cast<std::size_t>(d.right)], lambda, rs});
                stack.push_back(d.left);
                stack.push_back(d.right);
            } else if (!left_big && !right_big) {
                std::vector<int> pts;
                leaves_under(d.left, pts);
                leaves_under(d.right, pts);
                for (int p : pts) tree.records.push_back({cluster, p, lambda, 1});
            } else {
                const int small = left_big ? d.right : d.left;
                const int big = left_big ? d.left : d.right;
                std::vector<int> pts;
                leaves_under(small, pts);
                for (int p : pts) tree.records.push_back({cluster, p, lambda, 1});
                relabel[static_cast<std::size_t>(big)] = cluster; // cluster continues
                stack.push_back(big);
            }
        }
    }

    // excess-of-mass selection
    std::map<int, double> birth, stability;
    std::map<int, int> cluster_parent;
    std::map<int, std::vector<int>> cluster_children;
    birth[tree.root] = 0.0;
    for (const auto& r : tree.records) {
        if (r.child >= tree.n_points) {
            birth[r.child] = r.lambda;
            cluster_parent[r.child] = r.parent;
            cluster_children[r.parent].push_back(r.child);
        }
    }
    for (auto& [c, b] : birth) stability[c] = 0.0;
    for (const auto& r : tree.records)
        stability[r.parent] += (r.lambda - birth[r.parent]) * r.child_size;

    std::map<int, bool> selected;
    for (auto it = stability.rbegin(); it != stability.rend(); ++it) {
        const int c = it->first;
        if (c == tree.root) continue;
        double subtree = 0.0;
        bool has_children = cluster_children.count(c) != 0;
        if (has_children)
            for (int child : cluster_children[c]) subtree += stability[child];
        if (has_children && subtree > stability[c]) {
            selected[c] = false;
            stability[c] = subtree;
        } else {
            selected[c] = true;
        }
    }
    // a selected ancestor deselects its descendants
    std::map<int, int> selected_ancestor; // nearest selected ancestor incl. self, -1 if none
    selected_ancestor[tree.root] = -1;
    for (auto& [c, b] : birth) {
        if (c == tree.root) continue;
        const int up = selected_ancestor[cluster_parent[c]];
        if (up >= 0) {
            selected[c] = false;
            selected_ancestor[c] = up;
        } else {
            selected_ancestor[c] = selected[c] ? c : -1;
        }
    }
    std::vector<int> final_clusters;
    for (auto& [c, sel] : selected)
        if (sel) final_clusters.push_back(c);
    std::sort(final_clusters.begin(), final_clusters.end());
    if (final_clusters.empty()) {
        // degenerate hierarchy (e.g. all points identical): keep the root
        final_clusters.push_back(tree.root);
        selected_ancestor[tree.root] = tree.root;
        for (auto& [c, anc] : selected_ancestor)
            if (anc == -1) anc = tree.root;
    }

    std::map<int, int> label_of;
    for (std::size_t i = 0; i < final_clusters.size(); ++i)
        label_of[final_clusters[i]] = static_cast<int>(i);

    Segmentation& seg = out.seg;
    seg.clusterer = "hdbscan";
    seg.labels.assign(static_cast<std::size_t>(n), -1);
    for (const auto& r : tree.records) {
        if (r.child >= tree.n_points) continue;
        const int anc = selected_ancestor[r.parent];
        if (anc >= 0) seg.labels[static_cast<std::size_t>(r.child)] = label_of[anc];
    }
    seg.n_clusters = static_cast<int>(final_clusters.size());
    seg.cluster_sizes.assign(final_clusters.size(), 0);
    for (int l : seg.labels)
        if (l >= 0) ++seg.cluster_sizes[static_cast<std::size_t>(l)];
    return out;
}

Vector hdbscan_outlierness(const Segmentation& seg, const CondensedTree& tree) {
    require(seg.clusterer == "hdbscan", "hdbscan_outlierness: wrong clusterer");
    const int n = tree.n_points;
    require(static_cast<int>(seg.labels.size()) == n, "hdbscan_outlierness: size mismatch");

    // lambda at which each point left its condensed cluster
    Vector point_lambda = Vector::Zero(n);
    for (const auto& r : tree.records)
        if (r.child < n) point_lambda[r.child] = r.lambda;

    // per final cluster: max member lambda
    std::map<int, double> lambda_max;
    for (int i = 0; i < n; ++i) {
        const int l = seg.labels[static_cast<std::size_t>(i)];
        if (l < 0) continue;
        auto it = lambda_max.find(l);
        if (it == lambda_max.end()) lambda_max[l] = point_lambda[i];
        else it->second = std::max(it->second, point_lambda[i]);
    }

    Vector out(n);
    for (int i = 0; i < n; ++i) {
        const int l = seg.labels[static_cast<std::size_t>(i)];
        if (l < 0) {
            out[i] = 1.0; // noise is maximally outlying
        } else {
            const double lmax = lambda_max[l];
            out[i] = lmax <= point_lambda[i] ? 0.0 : 1.0 - point_lambda[i] / lmax;
        }
    }
    return out;
}

}  // namespace ztseg
