#include "ztseg/explain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>

#include "ztseg/rng.hpp"

namespace ztseg {

AttributeMap fit_attribute_map(const Matrix& x_emb, const Matrix& z_boot, double ridge_lambda) {
    require(x_emb.rows() == z_boot.rows(), "fit_attribute_map: row count mismatch");
    require(x_emb.rows() >= 2, "fit_attribute_map: need at least 2 rows");
    require(ridge_lambda > 0.0, "fit_attribute_map: lambda must be positive");

    const Eigen::RowVectorXd x_mean = x_emb.colwise().mean();
    const Eigen::RowVectorXd z_mean = z_boot.colwise().mean();
    const Matrix xc = x_emb.rowwise() - x_mean;
    const Matrix zc = z_boot.rowwise() - z_mean;

    const Matrix gram =
        xc.transpose() * xc + ridge_lambda * Matrix::Identity(x_emb.cols(), x_emb.cols());
    AttributeMap map;
    map.ridge_lambda = ridge_lambda;
    map.w_emb2lat = gram.ldlt().solve(xc.transpose() * zc);
    map.b_emb2lat = (z_mean - x_mean * map.w_emb2lat).transpose();

    const Matrix residual = zc - xc * map.w_emb2lat;
    map.fit_rmse = std::sqrt(residual.squaredNorm() /
                             static_cast<double>(residual.rows() * residual.cols()));
    return map;
}

Surrogate::Surrogate(Matrix points, std::vector<int> labels, int k)
    : points_(std::move(points)), labels_(std::move(labels)), k_(k) {
    require(static_cast<std::size_t>(points_.rows()) == labels_.size(),
            "surrogate: point/label count mismatch");
    require(k_ >= 1, "surrogate: k must be >= 1");
    require(static_cast<Eigen::Index>(k_) <= points_.rows(),
            "surrogate: k exceeds training rows");
    std::set<int> distinct(labels_.begin(), labels_.end());
    require(distinct.size() >= 2, "surrogate: need at least 2 classes");
    classes_.assign(distinct.begin(), distinct.end());
    for (std::size_t i = 0; i < classes_.size(); ++i)
        class_index_[classes_[i]] = static_cast<int>(i);
}

Vector Surrogate::predict_proba(const Vector& query) const {
    require(query.size() == points_.cols(), "surrogate: query width mismatch");
    const Eigen::Index n = points_.rows();
    std::vector<std::pair<double, int>> dists(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        dists[static_cast<std::size_t>(i)] = {(points_.row(i) - query.transpose()).norm(),
                                              static_cast<int>(i)};
    std::partial_sort(dists.begin(), dists.begin() + k_, dists.end());

    Vector proba = Vector::Zero(static_cast<Eigen::Index>(classes_.size()));
    // zero-distance rule: an exact match decides the class outright
    for (int i = 0; i < k_; ++i) {
        if (dists[static_cast<std::size_t>(i)].first == 0.0) {
            proba[class_index_.at(labels_[static_cast<std::size_t>(
                dists[static_cast<std::size_t>(i)].second)])] = 1.0;
            return proba;
        }
    }
    double total = 0.0;
    for (int i = 0; i < k_; ++i) {
        const double w = 1.0 / dists[static_cast<std::size_t>(i)].first;
        proba[class_index_.at(
            labels_[static_cast<std::size_t>(dists[static_cast<std::size_t>(i)].second)])] += w;
        total += w;
    }
    proba /= total;
    return proba;
}

int Surrogate::predict(const Vector& query) const {
    const Vector proba = predict_proba(query);
    Eigen::Index best = 0;
    proba.maxCoeff(&best); // first maximum: lowest class id wins ties
    return classes_[static_cast<std::size_t>(best)];
}

double Surrogate::class_probability(const Vector& query, int cls) const {
    auto it = class_index_.find(cls);
    require(it != class_index_.end(), "surrogate: unknown class");
    return predict_proba(query)[it->second];
}

Vector Surrogate::column_std() const {
    const Eigen::RowVectorXd mean = points_.colwise().mean();
    Vector out(points_.cols());
    for (Eigen::Index j = 0; j < points_.cols(); ++j) {
        const double var =
            (points_.col(j).array() - mean[j]).square().sum() / static_cast<double>(points_.rows());
        out[j] = std::sqrt(var);
    }
    return out;
}

Vector lime_explain(const ScalarModel& f, const Vector& x, const Vector& column_std,
                    const LimeOptions& opts) {
    const Eigen::Index d = x.size();
    require(column_std.size() == d, "lime_explain: std width mismatch");
    require(opts.n_samples >= d + 2, "lime_explain: too few samples");
    const double width0 =
        opts.kernel_width > 0.0 ? opts.kernel_width : 0.75 * std::sqrt(static_cast<double>(d));

    Rng rng(opts.seed);
    Matrix offsets(opts.n_samples, d); // raw perturbation offsets
    Matrix scaled(opts.n_samples, d);  // standardized offsets, for the kernel
    Vector y(opts.n_samples);
    for (int s = 0; s < opts.n_samples; ++s) {
        for (Eigen::Index j = 0; j < d; ++j) {
            const double g = rng.normal();
            const double sd = std::max(column_std[j], 1e-12);
            scaled(s, j) = g;
            offsets(s, j) = g * sd;
        }
        y[s] = f(x + offsets.row(s).transpose());
    }

    for (int attempt = 0; attempt < 2; ++attempt) {
        const double width = width0 * (attempt == 0 ? 1.0 : 2.0);
        Vector w(opts.n_samples);
        double wsum = 0.0;
        for (int s = 0; s < opts.n_samples; ++s) {
            const double dist2 = scaled.row(s).squaredNorm();
            w[s] = std::exp(-dist2 / (width * width));
            wsum += w[s];
        }
        if (wsum <= 1e-12) continue; // degenerate kernel: widen and retry once

        // weighted least squares with intercept over the raw offsets
        Matrix design(opts.n_samples, d + 1);
        design.col(0).setOnes();
        design.rightCols(d) = offsets;
        const Matrix wd = w.asDiagonal() * design;
        const Matrix lhs = design.transpose() * wd;
        const Vector rhs = wd.transpose() * y;
        const Vector beta = lhs.ldlt().solve(rhs);
        return beta.tail(d);
    }
    throw std::runtime_error("lime_explain: degenerate kernel weights after widening");
}

Vector lime_explain(const Surrogate& surrogate, const Vector& x, const LimeOptions& opts) {
    const int cls = surrogate.predict(x);
    const ScalarModel f = [&surrogate, cls](const Vector& q) {
        return surrogate.class_probability(q, cls);
    };
    return lime_explain(f, x, surrogate.column_std(), opts);
}

namespace {

// mean of f over background rows with coalition coordinates taken from x
double coalition_value(const ScalarModel& f, const Vector& x, const Matrix& background,
                       const std::vector<char>& mask) {
    double total = 0.0;
    Vector z(x.size());
    for (Eigen::Index b = 0; b < background.rows(); ++b) {
        for (Eigen::Index j = 0; j < x.size(); ++j)
            z[j] = mask[static_cast<std::size_t>(j)] ? x[j] : background(b, j);
        total += f(z);
    }
    return total / static_cast<double>(background.rows());
}

double log_factorial(int n) {
    double a = 0.0;
    for (int i = 2; i <= n; ++i) a += std::log(static_cast<double>(i));
    return a;
}

}  // namespace

Vector shap_explain(const ScalarModel& f, const Vector& x, const Matrix& background,
                    const ShapOptions& opts) {
    const int d = static_cast<int>(x.size());
    require(background.rows() >= 1, "shap_explain: empty background");
    require(background.cols() == x.size(), "shap_explain: background width mismatch");

    if (opts.mode == ShapMode::Exact) {
        require(d <= 20, "shap_explain: exact mode limited to d <= 20");
        const std::size_t n_sets = std::size_t{1} << d;
        std::vector<double> value(n_sets);
        std::vector<char> mask(static_cast<std::size_t>(d));
        for (std::size_t s = 0; s < n_sets; ++s) {
            for (int j = 0; j < d; ++j) mask[static_cast<std::size_t>(j)] = (s >> j) & 1u;
            value[s] = coalition_value(f, x, background, mask);
        }
        // phi_i = sum_{S not containing i} |S|!(d-|S|-1)!/d! (v(S+i) - v(S))
        std::vector<double> weight(static_cast<std::size_t>(d));
        const double log_d = log_factorial(d);
        for (int sz = 0; sz < d; ++sz)
            weight[static_cast<std::size_t>(sz)] =
                std::exp(log_factorial(sz) + log_factorial(d - sz - 1) - log_d);
        Vector phi = Vector::Zero(d);
        for (std::size_t s = 0; s < n_sets; ++s) {
            const int sz = std::popcount(s);
            if (sz == d) continue;
            for (int i = 0; i < d; ++i) {
                if ((s >> i) & 1u) continue;
                phi[i] += weight[static_cast<std::size_t>(sz)] *
                          (value[s | (std::size_t{1} << i)] - value[s]);
            }
        }
        return phi;
    }

    // sampled KernelSHAP: size-weighted coalition draws, efficiency enforced
    // by eliminating the last coordinate
    Rng rng(opts.seed);
    std::vector<char> mask(static_cast<std::size_t>(d));
    std::fill(mask.begin(), mask.end(), 0);
    const double v_empty = coalition_value(f, x, background, mask);
    std::fill(mask.begin(), mask.end(), 1);
    const double v_full = coalition_value(f, x, background, mask);
    const double gap = v_full - v_empty;

    // shapley kernel over sizes 1..d-1
    std::vector<double> size_weight(static_cast<std::size_t>(d));
    double size_total = 0.0;
    for (int sz = 1; sz < d; ++sz) {
        size_weight[static_cast<std::size_t>(sz)] =
            static_cast<double>(d - 1) / (static_cast<double>(sz) * static_cast<double>(d - sz));
        size_total += size_weight[static_cast<std::size_t>(sz)];
    }

    const int m = opts.n_coalitions;
    Matrix design(m, d - 1);
    Vector target(m), kernel_w(m);
    for (int s = 0; s < m; ++s) {
        double pick = rng.uniform() * size_total;
        int sz = 1;
        for (; sz < d - 1; ++sz) {
            pick -= size_weight[static_cast<std::size_t>(sz)];
            if (pick <= 0.0) break;
        }
        const std::vector<int> members = rng.sample_without_replacement(d, sz);
        std::fill(mask.begin(), mask.end(), 0);
        for (int j : members) mask[static_cast<std::size_t>(j)] = 1;
        const double v = coalition_value(f, x, background, mask);
        // substitute phi_{d-1} = gap - sum_{i<d-1} phi_i
        const double z_last = mask[static_cast<std::size_t>(d - 1)] ? 1.0 : 0.0;
        for (int j = 0; j < d - 1; ++j)
            design(s, j) = (mask[static_cast<std::size_t>(j)] ? 1.0 : 0.0) - z_last;
        target[s] = v - v_empty - z_last * gap;
        kernel_w[s] = 1.0; // size bias already in the sampler
    }
    const Matrix wd = kernel_w.asDiagonal() * design;
    const Matrix lhs = design.transpose() * wd +
                       1e-10 * Matrix::Identity(d - 1, d - 1);
    const Vector rhs = wd.transpose() * target;
    const Vector head = lhs.ldlt().solve(rhs);
    Vector phi(d);
    phi.head(d - 1) = head;
    phi[d - 1] = gap - head.sum();
    return phi;
}

Vector shap_explain(const Surrogate& surrogate, const Vector& x, const Matrix& background,
                    const ShapOptions& opts) {
    const int cls = surrogate.predict(x);
    const ScalarModel f = [&surrogate, cls](const Vector& q) {
        return surrogate.class_probability(q, cls);
    };
    return shap_explain(f, x, background, opts);
}

Matrix latent_feature_correlation(const Matrix& z_boot, const Matrix& features) {
    require(z_boot.rows() == features.rows(), "latent_feature_correlation: row mismatch");
    require(z_boot.rows() >= 2, "latent_feature_correlation: need at least 2 rows");
    const Eigen::Index n = z_boot.rows();
    const Matrix zc = z_boot.rowwise() - z_boot.colwise().mean();
    const Matrix fc = features.rowwise() - features.colwise().mean();
    const Vector z_norm = zc.colwise().norm();
    const Vector f_norm = fc.colwise().norm();
    Matrix corr = zc.transpose() * fc;
    for (Eigen::Index l = 0; l < corr.rows(); ++l)
        for (Eigen::Index j = 0; j < corr.cols(); ++j) {
            const double denom = z_norm[l] * f_norm[j];
            corr(l, j) = denom > 1e-12 * static_cast<double>(n) ? corr(l, j) / denom : 0.0;
        }
    return corr;
}

Explanation project_and_name(const Vector& emb_importances, const AttributeMap& map,
                             const Matrix& corr, const std::vector<std::string>& feature_names,
                             int m) {
    require(map.w_emb2lat.rows() == emb_importances.size(),
            "project_and_name: importance width mismatch");
    require(corr.rows() == map.w_emb2lat.cols(), "project_and_name: corr latent dim mismatch");
    require(static_cast<std::size_t>(corr.cols()) == feature_names.size(),
            "project_and_name: corr feature dim mismatch");
    require(m >= 1 && static_cast<std::size_t>(m) <= feature_names.size(),
            "project_and_name: m exceeds feature count");

    Explanation out;
    out.emb_importances = emb_importances;
    out.latent_importances = (map.w_emb2lat.transpose() * emb_importances).cwiseAbs();
    const Vector scores = corr.cwiseAbs().transpose() * out.latent_importances;

    std::vector<int> order(static_cast<std::size_t>(scores.size()));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return scores[a] > scores[b]; });
    for (int i = 0; i < m; ++i) {
        const int j = order[static_cast<std::size_t>(i)];
        out.top_original_attributes.emplace_back(feature_names[static_cast<std::size_t>(j)],
                                                 scores[j]);
    }
    return out;
}

double stability_score(const std::vector<std::vector<std::string>>& runs) {
    require(runs.size() >= 2, "stability_score: need at least 2 runs");
    for (const auto& r : runs) require(!r.empty(), "stability_score: empty feature set");

    double total = 0.0;
    int pairs = 0;
    for (std::size_t a = 0; a < runs.size(); ++a) {
        const std::set<std::string> sa(runs[a].begin(), runs[a].end());
        for (std::size_t b = a + 1; b < runs.size(); ++b) {
            const std::set<std::string> sb(runs[b].begin(), runs[b].end());
            std::size_t inter = 0;
            for (const auto& s : sa) inter += sb.count(s);
            const std::size_t uni = sa.size() + sb.size() - inter;
            total += static_cast<double>(inter) / static_cast<double>(uni);
            ++pairs;
        }
    }
    return total / static_cast<double>(pairs);
}

}  // namespace ztseg
