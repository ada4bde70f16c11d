#include "ztseg/hypergraph.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>

#include "ztseg/rng.hpp"

namespace ztseg {

void Hypergraph::validate() const {
    require(n_vertices > 0, "hypergraph: no vertices");
    require(static_cast<Eigen::Index>(edges.size()) == weights.size(),
            "hypergraph: weight count mismatch");
    std::vector<char> covered(static_cast<std::size_t>(n_vertices), 0);
    for (std::size_t e = 0; e < edges.size(); ++e) {
        require(edges[e].size() >= 2, "hypergraph: hyperedge with fewer than 2 vertices");
        require(weights[static_cast<Eigen::Index>(e)] > 0.0, "hypergraph: nonpositive weight");
        for (int v : edges[e]) {
            require(v >= 0 && v < n_vertices, "hypergraph: vertex index out of range");
            covered[static_cast<std::size_t>(v)] = 1;
        }
    }
    for (Eigen::Index v = 0; v < n_vertices; ++v)
        require(covered[static_cast<std::size_t>(v)] != 0,
                "hypergraph: vertex " + std::to_string(v) + " has zero degree");
}

namespace {

VertexGroups single_group(Eigen::Index n) {
    VertexGroups g(1);
    g[0].resize(static_cast<std::size_t>(n));
    std::iota(g[0].begin(), g[0].end(), 0);
    return g;
}

void check_groups(const VertexGroups& groups, Eigen::Index n) {
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    for (const auto& g : groups)
        for (int v : g) {
            require(v >= 0 && v < n, "vertex groups: index out of range");
            require(!seen[static_cast<std::size_t>(v)], "vertex groups: overlapping groups");
            seen[static_cast<std::size_t>(v)] = 1;
        }
    for (Eigen::Index v = 0; v < n; ++v)
        require(seen[static_cast<std::size_t>(v)] != 0, "vertex groups: not a partition");
}

// k nearest neighbors of every group member, within the group, by global id.
// Distances sorted ascending with index tiebreak.
std::vector<std::vector<std::pair<double, int>>> knn_within(const Matrix& z,
                                                            const std::vector<int>& group,
                                                            int k) {
    const int m = static_cast<int>(group.size());
    require(k >= 1, "knn: k must be >= 1");
    require(k < m, "knn: group of size " + std::to_string(m) +
                       " too small for k=" + std::to_string(k));
    std::vector<std::vector<std::pair<double, int>>> out(static_cast<std::size_t>(m));
    std::vector<std::pair<double, int>> dists(static_cast<std::size_t>(m - 1));
    for (int a = 0; a < m; ++a) {
        dists.clear();
        for (int b = 0; b < m; ++b) {
            if (b == a) continue;
            const double d2 = (z.row(group[static_cast<std::size_t>(a)]) -
                               z.row(group[static_cast<std::size_t>(b)]))
                                  .squaredNorm();
            dists.emplace_back(d2, group[static_cast<std::size_t>(b)]);
        }
        std::partial_sort(dists.begin(), dists.begin() + k, dists.end());
        out[static_cast<std::size_t>(a)].assign(dists.begin(), dists.begin() + k);
    }
    return out;
}

// merge duplicate vertex sets, accumulating weights
Hypergraph merge_edges(Eigen::Index n, HypergraphMode mode,
                       std::vector<std::pair<std::vector<int>, double>>& raw) {
    std::map<std::vector<int>, double> merged;
    for (auto& [verts, w] : raw) {
        std::sort(verts.begin(), verts.end());
        verts.erase(std::unique(verts.begin(), verts.end()), verts.end());
        merged[verts] += w;
    }
    Hypergraph h;
    h.n_vertices = n;
    h.mode = mode;
    h.weights.resize(static_cast<Eigen::Index>(merged.size()));
    Eigen::Index e = 0;
    for (auto& [verts, w] : merged) {
        h.edges.push_back(verts);
        h.weights[e++] = w;
    }
    return h;
}

}  // namespace

Hypergraph knn_hyperedges(const Matrix& z, int k, const std::optional<VertexGroups>& groups) {
    const Eigen::Index n = z.rows();
    require(n >= 2, "knn_hyperedges: need at least 2 vertices");
    const VertexGroups gs = groups ? *groups : single_group(n);
    if (groups) check_groups(gs, n);

    std::vector<std::pair<std::vector<int>, double>> raw;
    raw.reserve(static_cast<std::size_t>(n));
    for (const auto& group : gs) {
        const auto nn = knn_within(z, group, k);
        for (std::size_t a = 0; a < group.size(); ++a) {
            std::vector<int> edge;
            edge.reserve(static_cast<std::size_t>(k) + 1);
            edge.push_back(group[a]);
            for (const auto& [d2, idx] : nn[a]) edge.push_back(idx);
            raw.emplace_back(std::move(edge), 1.0);
        }
    }
    return merge_edges(n, HypergraphMode::KnnOnly, raw);
}

SparseMatrix manifold_diffusion(const Matrix& z, int k, int t) {
    const int m = static_cast<int>(z.rows());
    require(m >= 2, "manifold_diffusion: need at least 2 vertices");
    require(t >= 1, "manifold_diffusion: t must be >= 1");
    std::vector<int> all(static_cast<std::size_t>(m));
    std::iota(all.begin(), all.end(), 0);
    const auto nn = knn_within(z, all, k);

    // self-tuning bandwidth: distance to the ceil(k/2)-th neighbor
    const int band_at = (k + 1) / 2 - 1;
    std::vector<double> sigma(static_cast<std::size_t>(m));
    for (int a = 0; a < m; ++a)
        sigma[static_cast<std::size_t>(a)] = std::max(
            std::sqrt(nn[static_cast<std::size_t>(a)][static_cast<std::size_t>(band_at)].first),
            1e-12);

    // sparse kNN affinity, symmetrized as (A + A^T)/2
    SparseMatrix affinity(m, m);
    {
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(static_cast<std::size_t>(m) * static_cast<std::size_t>(k) * 2);
        for (int a = 0; a < m; ++a) {
            for (const auto& [d2, b] : nn[static_cast<std::size_t>(a)]) {
                const double v = std::exp(
                    -d2 / (sigma[static_cast<std::size_t>(a)] * sigma[static_cast<std::size_t>(b)]));
                trips.emplace_back(a, b, 0.5 * v);
                trips.emplace_back(b, a, 0.5 * v);
            }
        }
        affinity.setFromTriplets(trips.begin(), trips.end()); // duplicates sum
    }

    // row-normalize to a Markov operator; a fully underflowed row falls back
    // to its nearest neighbor
    Vector rowsum = Vector::Zero(m);
    for (int o = 0; o < affinity.outerSize(); ++o)
        for (SparseMatrix::InnerIterator it(affinity, o); it; ++it)
            rowsum[it.row()] += it.value();
    std::vector<int> dead;
    for (int a = 0; a < m; ++a)
        if (rowsum[a] <= 0.0) dead.push_back(a);
    if (!dead.empty()) {
        std::cerr << "manifold_diffusion: " << dead.size()
                  << " isolated vertex row(s); connecting to nearest neighbor\n";
        std::vector<Eigen::Triplet<double>> trips;
        for (int o = 0; o < affinity.outerSize(); ++o)
            for (SparseMatrix::InnerIterator it(affinity, o); it; ++it)
                trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                                   it.value());
        for (int a : dead) {
            trips.emplace_back(a, nn[static_cast<std::size_t>(a)][0].second, 1.0);
            rowsum[a] = 1.0;
        }
        affinity.setZero();
        affinity.setFromTriplets(trips.begin(), trips.end());
    }
    for (int o = 0; o < affinity.outerSize(); ++o)
        for (SparseMatrix::InnerIterator it(affinity, o); it; ++it)
            it.valueRef() /= rowsum[it.row()];

    // t-step diffusion by repeated sparse application
    SparseMatrix diffused = affinity;
    for (int step = 1; step < t; ++step) diffused = (diffused * affinity).pruned();
    return diffused;
}

Hypergraph manifold_hyperedges(const Matrix& z, int k, int t,
                               const std::optional<VertexGroups>& groups) {
    const Eigen::Index n = z.rows();
    require(n >= 2, "manifold_hyperedges: need at least 2 vertices");
    const VertexGroups gs = groups ? *groups : single_group(n);
    if (groups) check_groups(gs, n);

    std::vector<std::pair<std::vector<int>, double>> raw;
    raw.reserve(static_cast<std::size_t>(n));
    for (const auto& group : gs) {
        const int m = static_cast<int>(group.size());
        require(k < m, "manifold_hyperedges: group of size " + std::to_string(m) +
                           " too small for k=" + std::to_string(k));
        Matrix z_sub(m, z.cols());
        for (int a = 0; a < m; ++a) z_sub.row(a) = z.row(group[static_cast<std::size_t>(a)]);
        const Eigen::SparseMatrix<double, Eigen::RowMajor> rows = manifold_diffusion(z_sub, k, t);
        const auto nn = knn_within(z_sub, [&] {
            std::vector<int> all(static_cast<std::size_t>(m));
            std::iota(all.begin(), all.end(), 0);
            return all;
        }(), k);

        for (int a = 0; a < m; ++a) {
            std::vector<std::pair<double, int>> entries; // (-value, local id)
            for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(rows, a); it;
                 ++it) {
                if (static_cast<int>(it.col()) == a) continue;
                entries.emplace_back(-it.value(), static_cast<int>(it.col()));
            }
            if (entries.empty()) {
                // diffusion trapped on the diagonal; fall back to nearest neighbor
                entries.emplace_back(-1.0, nn[static_cast<std::size_t>(a)][0].second);
            }
            const int take = std::min<int>(k, static_cast<int>(entries.size()));
            std::partial_sort(entries.begin(), entries.begin() + take, entries.end());
            std::vector<int> edge;
            edge.reserve(static_cast<std::size_t>(take) + 1);
            edge.push_back(group[static_cast<std::size_t>(a)]);
            double wsum = 0.0;
            for (int i = 0; i < take; ++i) {
                edge.push_back(
                    group[static_cast<std::size_t>(entries[static_cast<std::size_t>(i)].second)]);
                wsum += -entries[static_cast<std::size_t>(i)].first;
            }
            raw.emplace_back(std::move(edge), wsum / static_cast<double>(take));
        }
    }
    return merge_edges(n, HypergraphMode::Manifold, raw);
}

LaplacianResult laplacian(const Hypergraph& h) {
    h.validate();
    const Eigen::Index n = h.n_vertices;

    Vector dv = Vector::Zero(n);
    for (std::size_t e = 0; e < h.edges.size(); ++e)
        for (int v : h.edges[e]) dv[v] += h.weights[static_cast<Eigen::Index>(e)];
    for (Eigen::Index v = 0; v < n; ++v)
        require(dv[v] > 0.0, "laplacian: zero vertex degree");

    // N = Dv^{-1/2} H W De^{-1} H^T Dv^{-1/2}, assembled edge by edge
    std::vector<Eigen::Triplet<double>> trips;
    std::size_t nnz = 0;
    for (const auto& e : h.edges) nnz += e.size() * e.size();
    trips.reserve(nnz + static_cast<std::size_t>(n));
    for (std::size_t e = 0; e < h.edges.size(); ++e) {
        const auto& verts = h.edges[e];
        const double scale =
            h.weights[static_cast<Eigen::Index>(e)] / static_cast<double>(verts.size());
        for (int i : verts)
            for (int j : verts)
                trips.emplace_back(i, j, scale / std::sqrt(dv[i] * dv[j]));
    }
    SparseMatrix normalized(n, n);
    normalized.setFromTriplets(trips.begin(), trips.end());

    SparseMatrix identity(n, n);
    identity.setIdentity();
    LaplacianResult out;
    out.laplacian = (identity - normalized).pruned();
    out.vertex_degrees = dv;
    return out;
}

void jacobi_eigh(const Matrix& a, Vector& eigenvalues, Matrix& eigenvectors, int max_sweeps,
                 double tol) {
    const Eigen::Index n = a.rows();
    require(a.cols() == n, "jacobi_eigh: matrix not square");
    Matrix m = 0.5 * (a + a.transpose()); // enforce symmetry
    Matrix v = Matrix::Identity(n, n);

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j) off += m(i, j) * m(i, j);
        if (std::sqrt(off) <= tol * std::max(1.0, m.norm())) break;

        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double apq = m(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double theta = (m(q, q) - m(p, p)) / (2.0 * apq);
                const double sign = theta >= 0.0 ? 1.0 : -1.0;
                const double t = sign / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                // rotate rows/cols p and q
                for (Eigen::Index i = 0; i < n; ++i) {
                    const double mip = m(i, p), miq = m(i, q);
                    m(i, p) = c * mip - s * miq;
                    m(i, q) = s * mip + c * miq;
                }
                for (Eigen::Index i = 0; i < n; ++i) {
                    const double mpi = m(p, i), mqi = m(q, i);
                    m(p, i) = c * mpi - s * mqi;
                    m(q, i) = s * mpi + c * mqi;
                }
                for (Eigen::Index i = 0; i < n; ++i) {
                    const double vip = v(i, p), viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
        }
    }

    // sort ascending
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int x, int y) { return m(x, x) < m(y, y); });
    eigenvalues.resize(n);
    eigenvectors.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        eigenvalues[i] = m(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
        eigenvectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
    }
}

SpectralEmbedding spectral_embed(const SparseMatrix& lap, const Vector& vertex_degrees,
                                 int d_emb, const SpectralOptions& opts) {
    require(vertex_degrees.size() == lap.rows(), "spectral_embed: degree size mismatch");
    require(vertex_degrees.minCoeff() > 0.0, "spectral_embed: nonpositive vertex degree");
    SpectralOptions standard = opts;
    standard.basis = EigenvectorBasis::Standard;
    SpectralEmbedding emb = spectral_embed(lap, d_emb, standard);
    if (opts.basis == EigenvectorBasis::Generalized) {
        const Vector inv_sqrt = vertex_degrees.cwiseSqrt().cwiseInverse();
        for (int j = 0; j < emb.d_emb; ++j) {
            Vector v = inv_sqrt.cwiseProduct(emb.coords.col(j));
            const double norm = v.norm();
            if (norm > 0.0) v /= norm;
            Eigen::Index arg = 0;
            v.cwiseAbs().maxCoeff(&arg);
            if (v[arg] < 0.0) v = -v;
            emb.coords.col(j) = v;
        }
    }
    return emb;
}

SpectralEmbedding spectral_embed(const SparseMatrix& lap, int d_emb,
                                 const SpectralOptions& opts) {
    require(opts.basis == EigenvectorBasis::Standard,
            "spectral_embed: the generalized basis needs the vertex degrees");
    const Eigen::Index n = lap.rows();
    require(lap.cols() == n, "spectral_embed: matrix not square");
    require(d_emb >= 1, "spectral_embed: d_emb must be >= 1");
    require(static_cast<Eigen::Index>(d_emb) + 1 <= n,
            "spectral_embed: d_emb + 1 exceeds vertex count");

    const int want = d_emb + 1; // including the trivial pair
    const int block = std::min<int>(want + opts.extra_block, static_cast<int>(n));

    // S = I - L, PSD with spectrum in [0,1] for the normalized hypergraph
    // Laplacian; its largest eigenpairs are L's smallest.
    SparseMatrix identity(n, n);
    identity.setIdentity();
    const SparseMatrix complement = (identity - lap).pruned();

    Rng rng(opts.seed);
    Matrix x(n, block);
    for (Eigen::Index j = 0; j < block; ++j)
        for (Eigen::Index i = 0; i < n; ++i) x(i, j) = rng.normal();

    auto orthonormalize = [](Matrix& q) {
        Eigen::HouseholderQR<Matrix> qr(q);
        q = qr.householderQ() * Matrix::Identity(q.rows(), q.cols());
    };
    orthonormalize(x);

    Vector ritz_s;           // Ritz values of S, ascending
    Matrix ritz_vectors;     // candidate eigenvectors, n x block
    std::vector<double> residuals(static_cast<std::size_t>(want), 1.0);

    bool within_contract = false;
    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        Matrix sx = complement * x;
        for (int q = 1; q < opts.power_steps; ++q) sx = complement * sx;
        orthonormalize(x = sx);

        // Rayleigh-Ritz on the block
        const Matrix projected = x.transpose() * (complement * x);
        Matrix u;
        jacobi_eigh(projected, ritz_s, u, 64, 1e-15);
        ritz_vectors = x * u;

        // residuals for the `want` largest Ritz pairs of S (columns at the end)
        double worst = 0.0;
        for (int i = 0; i < want; ++i) {
            const Eigen::Index col = static_cast<Eigen::Index>(block - 1 - i);
            const Vector v = ritz_vectors.col(col);
            const double lambda_l = 1.0 - ritz_s[col];
            const Vector r = lap * v - lambda_l * v;
            residuals[static_cast<std::size_t>(i)] = r.norm();
            worst = std::max(worst, r.norm());
        }
        within_contract = worst <= opts.tolerance;
        if (worst <= opts.target) break;
        x = ritz_vectors; // continue from the Ritz basis
    }
    if (!within_contract) {
        std::vector<double> res(residuals.begin(), residuals.end());
        std::string msg = "spectral_embed: not converged after " +
                          std::to_string(opts.max_iterations) + " iterations; residuals:";
        for (double r : res) msg += " " + std::to_string(r);
        throw ConvergenceError(msg, std::move(res));
    }

    // pairs ascending in L, dropping the trivial smallest
    SpectralEmbedding out;
    out.d_emb = d_emb;
    out.coords.resize(n, d_emb);
    out.eigenvalues.resize(static_cast<std::size_t>(d_emb));
    out.residual_norms.resize(static_cast<std::size_t>(d_emb));
    for (int i = 0; i < d_emb; ++i) {
        // i-th retained = (i+1)-th smallest of L = (i+2)-th largest of S
        const Eigen::Index col = static_cast<Eigen::Index>(block - 2 - i);
        Vector v = ritz_vectors.col(col);
        // deterministic sign: largest-magnitude entry positive
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v[arg] < 0.0) v = -v;
        out.coords.col(i) = v;
        out.eigenvalues[static_cast<std::size_t>(i)] = 1.0 - ritz_s[col];
        out.residual_norms[static_cast<std::size_t>(i)] = residuals[static_cast<std::size_t>(i + 1)];
    }
    return out;
}

int connected_components(const Hypergraph& h) {
    std::vector<int> parent(static_cast<std::size_t>(h.n_vertices));
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    };
    for (const auto& e : h.edges)
        for (std::size_t i = 1; i < e.size(); ++i) {
            const int a = find(e[0]), b = find(e[i]);
            if (a != b) parent[static_cast<std::size_t>(a)] = b;
        }
    int count = 0;
    for (Eigen::Index v = 0; v < h.n_vertices; ++v)
        if (find(static_cast<int>(v)) == v) ++count;
    return count;
}

}  // namespace ztseg
