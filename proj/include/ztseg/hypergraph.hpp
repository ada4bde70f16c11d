#pragma once

#include <Eigen/Sparse>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ztseg/types.hpp"

namespace ztseg {

using SparseMatrix = Eigen::SparseMatrix<double>;

enum class HypergraphMode { KnnOnly, Manifold };

struct Hypergraph {
    Eigen::Index n_vertices = 0;
    std::vector<std::vector<int>> edges; // sorted vertex ids, each of size >= 2
    Vector weights;                      // positive, one per edge
    HypergraphMode mode = HypergraphMode::KnnOnly;

    Eigen::Index n_edges() const { return static_cast<Eigen::Index>(edges.size()); }
    void validate() const;
};

// Optional per-client vertex groups; hyperedges are formed strictly within
// each group, then unioned. Groups must partition [0, n).
using VertexGroups = std::vector<std::vector<int>>;

// One hyperedge per vertex: the vertex plus its k nearest Euclidean
// neighbors (ties broken by ascending index). Duplicate vertex sets merge
// with weight accumulation.
Hypergraph knn_hyperedges(const Matrix& z, int k,
                          const std::optional<VertexGroups>& groups = std::nullopt);

// t-step diffusion operator P^t: self-tuning heat-kernel affinity over the
// kNN graph, symmetrized, row-normalized, then applied t times.
SparseMatrix manifold_diffusion(const Matrix& z, int k, int t);

// Diffusion hyperedges: hyperedge of i is {i} plus the k largest entries of
// row i of P^t, weighted by their mean diffusion affinity.
Hypergraph manifold_hyperedges(const Matrix& z, int k, int t,
                               const std::optional<VertexGroups>& groups = std::nullopt);

struct LaplacianResult {
    SparseMatrix laplacian; // I - Dv^{-1/2} H W De^{-1} H^T Dv^{-1/2}
    Vector vertex_degrees;  // Dv diagonal
};

LaplacianResult laplacian(const Hypergraph& h);

struct SpectralEmbedding {
    Matrix coords;                      // n x d_emb
    std::vector<double> eigenvalues;    // retained, ascending
    std::vector<double> residual_norms; // ||L v - lambda v|| per retained pair
    int d_emb = 0;
};

enum class EigenvectorBasis {
    Standard,    // eigenvectors of the symmetric problem L u = lambda u
    Generalized, // v = Dv^{-1/2} u, solving L v = lambda Dv v; constant per
                 // connected component, which is what the embedding consumes
};

struct SpectralOptions {
    double tolerance = 1e-6;  // convergence contract per retained pair
    double target = 1e-9;     // keep iterating below tolerance down to this
    int max_iterations = 500; // outer block iterations
    int power_steps = 3;      // operator applications per Rayleigh-Ritz step
    int extra_block = 3;      // block size = d_emb + 1 + extra_block
    EigenvectorBasis basis = EigenvectorBasis::Standard;
    std::uint64_t seed = 7;
};

// Smallest d_emb nontrivial eigenpairs of L by block orthogonal iteration
// with Rayleigh-Ritz on the complement operator S = I - L. The smallest
// (trivial) eigenvector is dropped. Throws ConvergenceError when residuals
// stay above `tolerance` after the iteration budget. With the Generalized
// basis the returned columns are Dv^{-1/2}-transformed and unit-normalized.
SpectralEmbedding spectral_embed(const SparseMatrix& laplacian, int d_emb,
                                 const SpectralOptions& opts = {});

SpectralEmbedding spectral_embed(const SparseMatrix& laplacian, const Vector& vertex_degrees,
                                 int d_emb, const SpectralOptions& opts = {});

// Jacobi eigensolver for small dense symmetric matrices, used for the
// Rayleigh-Ritz step. Eigenvalues ascending, columns of V the eigenvectors.
void jacobi_eigh(const Matrix& a, Vector& eigenvalues, Matrix& eigenvectors,
                 int max_sweeps = 64, double tol = 1e-14);

// Connected components of the hypergraph (vertices joined by shared edges).
int connected_components(const Hypergraph& h);

}  // namespace ztseg
