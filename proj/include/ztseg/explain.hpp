#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ztseg/types.hpp"

namespace ztseg {

struct AttributeMap {
    Matrix w_emb2lat; // d_emb x p
    Vector b_emb2lat; // p
    double ridge_lambda = 1.0;
    double fit_rmse = 0.0;
};

// Closed-form ridge on centered data: W = (Xc^T Xc + lambda I)^-1 Xc^T Zc.
AttributeMap fit_attribute_map(const Matrix& x_emb, const Matrix& z_boot,
                               double ridge_lambda = 1.0);

// Distance-weighted kNN classifier over stored points; the explainers query
// its class probabilities.
class Surrogate {
public:
    Surrogate(Matrix points, std::vector<int> labels, int k = 25);

    // probability per class, ordered as classes(); an exact match (distance
    // 0) gets probability 1 for that neighbor's class
    Vector predict_proba(const Vector& query) const;
    int predict(const Vector& query) const;
    double class_probability(const Vector& query, int cls) const;

    const std::vector<int>& classes() const { return classes_; }
    const Matrix& points() const { return points_; }
    Eigen::Index dim() const { return points_.cols(); }
    int k() const { return k_; }
    Vector column_std() const;

private:
    Matrix points_;
    std::vector<int> labels_;
    std::vector<int> classes_; // sorted distinct labels (noise -1 kept)
    std::map<int, int> class_index_;
    int k_;
};

// Scalar model f over the embedding space; tests can plant known functions.
using ScalarModel = std::function<double(const Vector&)>;

struct LimeOptions {
    int n_samples = 1000;
    double kernel_width = 0.0; // 0 -> 0.75 * sqrt(d)
    std::uint64_t seed = 1;
};

// Gaussian perturbations scaled by per-dimension std, exponential kernel on
// the standardized offsets, weighted least-squares fit; returns the slope
// per dimension.
Vector lime_explain(const ScalarModel& f, const Vector& x, const Vector& column_std,
                    const LimeOptions& opts = {});

// Convenience wrapper explaining the surrogate probability of x's predicted
// class.
Vector lime_explain(const Surrogate& surrogate, const Vector& x, const LimeOptions& opts = {});

enum class ShapMode { Exact, Sampled };

struct ShapOptions {
    ShapMode mode = ShapMode::Exact;
    int n_coalitions = 2048; // sampled mode
    std::uint64_t seed = 2;
};

// Interventional Shapley values: masked coordinates are replaced by
// background rows and f averaged over them. Exact mode enumerates all 2^d
// coalitions (d <= 20 guard); sampled mode solves the kernel-weighted least
// squares with the efficiency constraint eliminated.
Vector shap_explain(const ScalarModel& f, const Vector& x, const Matrix& background,
                    const ShapOptions& opts = {});

Vector shap_explain(const Surrogate& surrogate, const Vector& x, const Matrix& background,
                    const ShapOptions& opts = {});

// Pearson correlation between latent columns and original feature columns.
Matrix latent_feature_correlation(const Matrix& z_boot, const Matrix& features);

struct Explanation {
    long did = 0;
    std::string method; // "lime" | "shap"
    Vector emb_importances;
    Vector latent_importances;
    std::vector<std::pair<std::string, double>> top_original_attributes;
};

// Project embedding-space importances into latent space through the
// attribute map and rank original features by |importance| * |correlation|.
Explanation project_and_name(const Vector& emb_importances, const AttributeMap& map,
                             const Matrix& corr, const std::vector<std::string>& feature_names,
                             int m = 3);

// Mean pairwise Jaccard similarity of top-k feature sets across runs.
double stability_score(const std::vector<std::vector<std::string>>& runs);

}  // namespace ztseg
