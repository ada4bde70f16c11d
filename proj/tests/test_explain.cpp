#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ztseg/explain.hpp"
#include "ztseg/rng.hpp"

using namespace ztseg;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
    return m;
}

// gaussian elimination with partial pivoting, the independent linear solver
Matrix solve_ge(Matrix a, Matrix b) {
    const Eigen::Index n = a.rows();
    for (Eigen::Index col = 0; col < n; ++col) {
        Eigen::Index pivot = col;
        for (Eigen::Index r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
        a.row(col).swap(a.row(pivot));
        b.row(col).swap(b.row(pivot));
        for (Eigen::Index r = col + 1; r < n; ++r) {
            const double f = a(r, col) / a(col, col);
            a.row(r) -= f * a.row(col);
            b.row(r) -= f * b.row(col);
        }
    }
    Matrix x = Matrix::Zero(n, b.cols());
    for (Eigen::Index r = n - 1; r >= 0; --r) {
        x.row(r) = (b.row(r) - a.row(r).rightCols(n - r - 1) * x.bottomRows(n - r - 1)) /
                   a(r, r);
    }
    return x;
}

}  // namespace

TEST_CASE("ridge recovers an exact linear relation at tiny lambda") {
    const Matrix x = random_matrix(80, 6, 1);
    const Matrix w_true = random_matrix(6, 3, 2);
    Vector b_true(3);
    b_true << 0.5, -1.0, 2.0;
    const Matrix z = (x * w_true).rowwise() + b_true.transpose();
    const AttributeMap map = fit_attribute_map(x, z, 1e-12);
    CHECK((map.w_emb2lat - w_true).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((map.b_emb2lat - b_true).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(map.fit_rmse < 1e-8);
}

TEST_CASE("huge lambda shrinks weights to zero and bias to column means") {
    const Matrix x = random_matrix(60, 4, 3);
    const Matrix z = random_matrix(60, 2, 4);
    const AttributeMap map = fit_attribute_map(x, z, 1e12);
    CHECK(map.w_emb2lat.cwiseAbs().maxCoeff() < 1e-6);
    const Eigen::RowVectorXd means = z.colwise().mean();
    CHECK((map.b_emb2lat.transpose() - means).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("ridge matches a gaussian-elimination solve of the normal equations") {
    const Matrix x = random_matrix(100, 10, 5);
    const Matrix z = random_matrix(100, 4, 6);
    const double lambda = 1.0;
    const AttributeMap map = fit_attribute_map(x, z, lambda);

    const Eigen::RowVectorXd xm = x.colwise().mean();
    const Eigen::RowVectorXd zm = z.colwise().mean();
    const Matrix xc = x.rowwise() - xm;
    const Matrix zc = z.rowwise() - zm;
    const Matrix lhs = xc.transpose() * xc + lambda * Matrix::Identity(10, 10);
    const Matrix ref = solve_ge(lhs, xc.transpose() * zc);
    CHECK((map.w_emb2lat - ref).cwiseAbs().maxCoeff() < 1e-8);

    // normal-equations residual
    const Matrix resid = lhs * map.w_emb2lat - xc.transpose() * zc;
    CHECK(resid.cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("surrogate obeys the zero-distance rule and simple geometry") {
    Matrix pts(6, 1);
    pts << 0, 0.5, 1.0, 100, 100.5, 101;
    const std::vector<int> labels = {0, 0, 0, 1, 1, 1};
    const Surrogate s(pts, labels, 3);

    Vector q(1);
    q << 100.5;
    CHECK(s.predict(q) == 1);
    CHECK(s.class_probability(q, 1) == 1.0); // exact match

    q << 1.0e0;
    CHECK(s.predict(q) == 0);

    q << 30.0;
    const Vector proba = s.predict_proba(q);
    CHECK(proba.sum() == doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS(Surrogate(pts, labels, 7));                       // k > rows
    CHECK_THROWS(Surrogate(pts, std::vector<int>(6, 0), 3));       // one class
}

TEST_CASE("lime recovers a planted linear model") {
    const Eigen::Index d = 6;
    const ScalarModel f = [](const Vector& x) { return 0.1 + 0.5 * x[1]; };
    LimeOptions opts;
    opts.n_samples = 1000;
    opts.seed = 9;
    Vector x0 = Vector::Zero(d);
    const Vector coef = lime_explain(f, x0, Vector::Ones(d), opts);
    CHECK(std::abs(coef[1] - 0.5) <= 0.05);
    for (Eigen::Index j = 0; j < d; ++j)
        if (j != 1) CHECK(std::abs(coef[j]) <= 0.05);
}

TEST_CASE("lime on a constant model yields zero importances") {
    const ScalarModel f = [](const Vector&) { return 0.37; };
    const Vector coef = lime_explain(f, Vector::Zero(5), Vector::Ones(5), {.n_samples = 500});
    CHECK(coef.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("lime recovers planted coefficients within 10 percent") {
    Vector w(4);
    w << 1.0, 2.0, -1.5, 0.7;
    const ScalarModel f = [&w](const Vector& x) { return x.dot(w); };
    const Vector coef =
        lime_explain(f, Vector::Constant(4, 0.3), Vector::Ones(4), {.n_samples = 1000, .seed = 4});
    for (Eigen::Index j = 0; j < 4; ++j)
        CHECK(std::abs(coef[j] - w[j]) <= 0.1 * std::abs(w[j]));
}

TEST_CASE("lime throws after the kernel-widening retry fails") {
    const ScalarModel f = [](const Vector& x) { return x[0]; };
    LimeOptions opts;
    opts.n_samples = 200;
    opts.kernel_width = 1e-12; // weights underflow even after doubling
    CHECK_THROWS(lime_explain(f, Vector::Zero(3), Vector::Ones(3), opts));
}

TEST_CASE("exact shapley values of a linear model") {
    const Eigen::Index d = 5;
    Vector w(d);
    w << 1, -2, 0.5, 3, 0; // last feature is a null player
    const ScalarModel f = [&w](const Vector& x) { return x.dot(w); };
    const Matrix background = random_matrix(40, d, 10);
    Vector x(d);
    x << 1, 1, 1, 1, 1;
    const Vector phi = shap_explain(f, x, background, {.mode = ShapMode::Exact});
    const Eigen::RowVectorXd bg_mean = background.colwise().mean();
    for (Eigen::Index j = 0; j < d; ++j)
        CHECK(std::abs(phi[j] - w[j] * (x[j] - bg_mean[j])) < 1e-10);
    CHECK(std::abs(phi[4]) < 1e-10); // null player

    // efficiency
    double bg_f = 0.0;
    for (Eigen::Index b = 0; b < background.rows(); ++b)
        bg_f += f(background.row(b).transpose());
    bg_f /= static_cast<double>(background.rows());
    CHECK(std::abs(phi.sum() - (f(x) - bg_f)) < 1e-8);
}

TEST_CASE("shapley symmetry on a symmetric model") {
    const ScalarModel f = [](const Vector& x) { return x[0] + x[1]; };
    Matrix background(3, 4);
    background << 0, 0, 5, 1, 2, 2, -1, 0, -1, -1, 2, 2; // dims 0,1 identical per row
    Vector x(4);
    x << 3, 3, 9, 9;
    const Vector phi = shap_explain(f, x, background, {.mode = ShapMode::Exact});
    CHECK(std::abs(phi[0] - phi[1]) < 1e-10);
}

TEST_CASE("exact shapley equals the permutation-definition oracle") {
    const int d = 5;
    // a nonlinear model so the check is not vacuous
    const ScalarModel f = [](const Vector& x) {
        return x[0] * x[1] + std::sin(x[2]) + 0.5 * x[3] * x[3] - x[4] * x[0];
    };
    const Matrix background = random_matrix(15, d, 21);
    Vector x(d);
    x << 0.5, -1.0, 2.0, 1.5, -0.5;
    const Vector phi = shap_explain(f, x, background, {.mode = ShapMode::Exact});

    // all 120 permutations, averaged marginal contributions
    auto value = [&](unsigned mask) {
        double total = 0.0;
        Vector z(d);
        for (Eigen::Index b = 0; b < background.rows(); ++b) {
            for (int j = 0; j < d; ++j)
                z[j] = (mask >> j) & 1u ? x[j] : background(b, j);
            total += f(z);
        }
        return total / static_cast<double>(background.rows());
    };
    std::vector<int> perm(d);
    std::iota(perm.begin(), perm.end(), 0);
    Vector ref = Vector::Zero(d);
    int count = 0;
    do {
        unsigned mask = 0;
        for (int j : perm) {
            const double before = value(mask);
            mask |= 1u << j;
            ref[j] += value(mask) - before;
        }
        ++count;
    } while (std::next_permutation(perm.begin(), perm.end()));
    ref /= static_cast<double>(count);
    CHECK((phi - ref).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("sampled kernel shap satisfies efficiency and tracks exact values") {
    const int d = 6;
    Vector w(d);
    w << 0.5, 1.5, -1.0, 2.0, 0.2, -0.7;
    const ScalarModel f = [&w](const Vector& x) { return x.dot(w); };
    const Matrix background = random_matrix(25, d, 33);
    Vector x = Vector::Ones(d);
    const Vector exact = shap_explain(f, x, background, {.mode = ShapMode::Exact});
    const Vector sampled =
        shap_explain(f, x, background, {.mode = ShapMode::Sampled, .n_coalitions = 4000});
    double bg_f = 0.0;
    for (Eigen::Index b = 0; b < background.rows(); ++b)
        bg_f += f(background.row(b).transpose());
    bg_f /= static_cast<double>(background.rows());
    CHECK(std::abs(sampled.sum() - (f(x) - bg_f)) < 1e-3);
    CHECK((sampled - exact).cwiseAbs().maxCoeff() < 0.15);
}

TEST_CASE("latent-feature correlation flags planted relations") {
    const Eigen::Index n = 200;
    Matrix features = random_matrix(n, 3, 40);
    Matrix z(n, 2);
    z.col(0) = features.col(1);               // latent 0 == feature 1
    z.col(1) = random_matrix(n, 1, 41).col(0); // latent 1 independent
    features.col(2).setConstant(3.0);          // constant feature
    const Matrix corr = latent_feature_correlation(z, features);
    CHECK(corr(0, 1) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(corr(1, 0)) < 0.2);
    CHECK(corr(0, 2) == 0.0);
}

TEST_CASE("project_and_name selects the planted top attribute") {
    const Eigen::Index n = 150;
    Matrix features = random_matrix(n, 4, 50);
    // latent 0 equals the "rate" feature exactly; emb dim 0 drives latent 0
    Matrix z(n, 2);
    z.col(0) = features.col(0);
    z.col(1) = 0.01 * random_matrix(n, 1, 51).col(0);
    Matrix x_emb(n, 3);
    x_emb.col(0) = z.col(0);
    x_emb.col(1) = random_matrix(n, 1, 52).col(0);
    x_emb.col(2) = random_matrix(n, 1, 53).col(0);

    const AttributeMap map = fit_attribute_map(x_emb, z, 1e-6);
    const Matrix corr = latent_feature_correlation(z, features);

    Vector emb_imp = Vector::Zero(3);
    emb_imp[0] = 1.0;
    const std::vector<std::string> names = {"rate", "dur", "proto", "bytes"};
    const Explanation expl = project_and_name(emb_imp, map, corr, names, 3);
    REQUIRE(expl.top_original_attributes.size() == 3);
    CHECK(expl.top_original_attributes[0].first == "rate");
    CHECK((expl.latent_importances - map.w_emb2lat.row(0).transpose().cwiseAbs())
              .cwiseAbs()
              .maxCoeff() < 1e-12);

    CHECK_THROWS(project_and_name(emb_imp, map, corr, names, 5)); // m > features
}

TEST_CASE("stability_score arithmetic") {
    const std::vector<std::string> a = {"a", "b", "c", "d", "e"};
    const std::vector<std::string> b = {"a", "b", "c", "d", "f"};
    CHECK(stability_score({a, a, a}) == 1.0);
    CHECK(stability_score({{"x"}, {"y"}}) == 0.0);
    CHECK(stability_score({a, b}) == doctest::Approx(4.0 / 6.0).epsilon(1e-12));
    CHECK_THROWS(stability_score({a}));
    CHECK_THROWS(stability_score({a, {}}));
}

TEST_CASE("surrogate-backed explainers run end to end") {
    // two separated classes in 4 dims
    Matrix pts(60, 4);
    Rng rng(60);
    for (int i = 0; i < 60; ++i)
        for (int j = 0; j < 4; ++j)
            pts(i, j) = (i < 30 ? 0.0 : 5.0) + 0.3 * rng.normal();
    std::vector<int> labels(60);
    for (int i = 0; i < 60; ++i) labels[static_cast<std::size_t>(i)] = i < 30 ? 0 : 1;
    const Surrogate s(pts, labels, 5);

    const Vector x = pts.row(3).transpose();
    const Vector lime_imp = lime_explain(s, x, {.n_samples = 400, .seed = 2});
    CHECK(lime_imp.size() == 4);
    const Matrix background = pts.topRows(20);
    const Vector shap_imp = shap_explain(s, x, background, {.mode = ShapMode::Exact});
    CHECK(shap_imp.size() == 4);
    // exact-mode SHAP is deterministic
    const Vector shap_again = shap_explain(s, x, background, {.mode = ShapMode::Exact});
    CHECK((shap_imp - shap_again).cwiseAbs().maxCoeff() == 0.0);
}
