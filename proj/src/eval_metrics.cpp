#include "ztseg/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "ztseg/dataio.hpp"
#include "ztseg/rng.hpp"

namespace ztseg {

namespace {

std::vector<int> nonnoise_rows(const std::vector<int>& labels) {
    std::vector<int> rows;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] >= 0) rows.push_back(static_cast<int>(i));
    return rows;
}

}  // namespace

double silhouette(const Matrix& x, const std::vector<int>& labels, int sample_cap,
                  std::uint64_t seed) {
    require(static_cast<std::size_t>(x.rows()) == labels.size(), "silhouette: size mismatch");
    const std::vector<int> rows = nonnoise_rows(labels);
    std::set<int> distinct;
    for (int r : rows) distinct.insert(labels[static_cast<std::size_t>(r)]);
    require(distinct.size() >= 2, "silhouette: need at least 2 non-noise clusters");

    std::map<int, std::vector<int>> members;
    for (int r : rows) members[labels[static_cast<std::size_t>(r)]].push_back(r);

    // evaluation points: everything, or a seed-fixed sample
    std::vector<int> eval = rows;
    if (static_cast<int>(rows.size()) > sample_cap) {
        Rng rng(seed);
        std::vector<int> pick =
            rng.sample_without_replacement(static_cast<int>(rows.size()), sample_cap);
        eval.clear();
        for (int p : pick) eval.push_back(rows[static_cast<std::size_t>(p)]);
    }

    double total = 0.0;
    for (int i : eval) {
        const int own = labels[static_cast<std::size_t>(i)];
        if (members[own].size() <= 1) continue; // singleton scores 0
        double a = 0.0;
        double b = std::numeric_limits<double>::infinity();
        for (auto& [c, pts] : members) {
            double mean = 0.0;
            int count = 0;
            for (int j : pts) {
                if (j == i) continue;
                mean += (x.row(i) - x.row(j)).norm();
                ++count;
            }
            if (count == 0) continue;
            mean /= static_cast<double>(count);
            if (c == own) a = mean;
            else b = std::min(b, mean);
        }
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom; // coincident clusters score 0
    }
    return total / static_cast<double>(eval.size());
}

double davies_bouldin(const Matrix& x, const std::vector<int>& labels) {
    require(static_cast<std::size_t>(x.rows()) == labels.size(), "davies_bouldin: size mismatch");
    std::map<int, std::vector<int>> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] >= 0) members[labels[i]].push_back(static_cast<int>(i));
    require(members.size() >= 2, "davies_bouldin: need at least 2 non-noise clusters");

    std::vector<Vector> centroid;
    std::vector<double> scatter;
    for (auto& [c, pts] : members) {
        Vector mu = Vector::Zero(x.cols());
        for (int i : pts) mu += x.row(i).transpose();
        mu /= static_cast<double>(pts.size());
        double s = 0.0;
        for (int i : pts) s += (x.row(i).transpose() - mu).norm();
        s /= static_cast<double>(pts.size());
        centroid.push_back(mu);
        scatter.push_back(s);
    }

    const std::size_t c = centroid.size();
    double total = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
        double worst = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            if (j == i) continue;
            const double sep = (centroid[i] - centroid[j]).norm();
            const double ratio = (scatter[i] + scatter[j]) / sep; // inf when centroids coincide
            worst = std::max(worst, ratio);
        }
        total += worst;
    }
    return total / static_cast<double>(c);
}

PurityReport purity_contamination(const std::vector<int>& labels,
                                  const std::vector<int>& truth) {
    require(labels.size() == truth.size(), "purity_contamination: size mismatch");
    require(!truth.empty(), "purity_contamination: empty truth");

    std::map<int, std::pair<int, int>> counts; // cluster -> (benign, attack)
    std::size_t noise = 0, noise_attack = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        require(truth[i] == 0 || truth[i] == 1, "purity_contamination: truth must be 0/1");
        if (labels[i] < 0) {
            ++noise;
            noise_attack += static_cast<std::size_t>(truth[i]);
            continue;
        }
        auto& [b, a] = counts[labels[i]];
        if (truth[i] == 1) ++a;
        else ++b;
    }

    PurityReport rep;
    rep.noise_rows = noise;
    rep.noise_attack_fraction =
        noise > 0 ? static_cast<double>(noise_attack) / static_cast<double>(noise) : 0.0;

    double purity_weighted = 0.0, purity_sum = 0.0;
    double ab_weighted = 0.0, ba_weighted = 0.0;
    long long benign_dominated = 0, attack_dominated = 0;
    long long clustered = 0;
    for (auto& [c, ba] : counts) {
        const auto [b, a] = ba;
        ClusterPurity cp;
        cp.cluster = c;
        cp.size = b + a;
        cp.n_attack = a;
        cp.dominant_class = a > b ? 1 : 0;
        cp.purity = static_cast<double>(std::max(a, b)) / static_cast<double>(cp.size);
        cp.contamination = static_cast<double>(std::min(a, b)) / static_cast<double>(cp.size);
        rep.clusters.push_back(cp);
        clustered += cp.size;
        purity_weighted += cp.purity * cp.size;
        purity_sum += cp.purity;
        if (cp.dominant_class == 0) {
            ab_weighted += cp.contamination * cp.size;
            benign_dominated += cp.size;
        } else {
            ba_weighted += cp.contamination * cp.size;
            attack_dominated += cp.size;
        }
    }
    require(clustered > 0, "purity_contamination: no non-noise rows");
    rep.weighted_purity = purity_weighted / static_cast<double>(clustered);
    rep.mean_purity = purity_sum / static_cast<double>(rep.clusters.size());
    rep.attack_in_benign =
        benign_dominated > 0 ? ab_weighted / static_cast<double>(benign_dominated) : 0.0;
    rep.benign_in_attack =
        attack_dominated > 0 ? ba_weighted / static_cast<double>(attack_dominated) : 0.0;
    return rep;
}

FidelityReport classification_fidelity(const std::vector<int>& predicted,
                                       const std::vector<int>& truth) {
    require(predicted.size() == truth.size(), "fidelity: size mismatch");
    require(!truth.empty(), "fidelity: empty test set");

    std::set<int> class_set(truth.begin(), truth.end());
    class_set.insert(predicted.begin(), predicted.end());

    std::map<int, long long> tp, fp, fn;
    long long correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (predicted[i] == truth[i]) {
            ++correct;
            ++tp[truth[i]];
        } else {
            ++fp[predicted[i]];
            ++fn[truth[i]];
        }
    }

    FidelityReport rep;
    rep.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());

    double f1_sum = 0.0;
    long long tp_total = 0, fp_total = 0, fn_total = 0;
    for (int c : class_set) {
        const long long t = tp[c], p = tp[c] + fp[c], r = tp[c] + fn[c];
        const double precision = p > 0 ? static_cast<double>(t) / static_cast<double>(p) : 0.0;
        const double recall = r > 0 ? static_cast<double>(t) / static_cast<double>(r) : 0.0;
        f1_sum += (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall)
                                             : 0.0;
        tp_total += t;
        fp_total += fp[c];
        fn_total += fn[c];
    }
    rep.macro_f1 = f1_sum / static_cast<double>(class_set.size());
    const double micro_p = static_cast<double>(tp_total) / static_cast<double>(tp_total + fp_total);
    const double micro_r = static_cast<double>(tp_total) / static_cast<double>(tp_total + fn_total);
    rep.micro_f1 =
        (micro_p + micro_r) > 0.0 ? 2.0 * micro_p * micro_r / (micro_p + micro_r) : 0.0;
    return rep;
}

FidelityReport surrogate_fidelity(const Surrogate& surrogate, const Matrix& x_test,
                                  const std::vector<int>& labels_test) {
    require(static_cast<std::size_t>(x_test.rows()) == labels_test.size(),
            "surrogate_fidelity: size mismatch");
    std::vector<int> predicted(labels_test.size());
    for (Eigen::Index i = 0; i < x_test.rows(); ++i)
        predicted[static_cast<std::size_t>(i)] = surrogate.predict(x_test.row(i).transpose());
    return classification_fidelity(predicted, labels_test);
}

std::string eval_report_text(const EvalReport& report, const std::string& clusterer,
                             const std::string& hypergraph_mode) {
    std::string out;
    out += "clusterer          " + clusterer + "\n";
    out += "hypergraph mode    " + hypergraph_mode + "\n";
    out += "clusters           " + std::to_string(report.n_clusters) + "\n";
    out += "size min/med/max   " + std::to_string(report.size_min) + "/" +
           std::to_string(report.size_median) + "/" + std::to_string(report.size_max) + "\n";
    out += "noise rows         " + std::to_string(report.noise_rows) + "\n";
    out += "silhouette         " + format_double(report.silhouette_score) + "\n";
    out += "davies-bouldin     " + format_double(report.dbi) + "\n";
    if (report.security) {
        out += "purity (weighted)  " + format_double(report.security->weighted_purity) + "\n";
        out += "purity (mean)      " + format_double(report.security->mean_purity) + "\n";
        out += "C_attack->benign   " + format_double(report.security->attack_in_benign) + "\n";
        out += "C_benign->attack   " + format_double(report.security->benign_in_attack) + "\n";
    } else {
        out += "security metrics   unavailable (no labels)\n";
    }
    if (report.fidelity) {
        out += "surrogate accuracy " + format_double(report.fidelity->accuracy) + "\n";
        out += "surrogate macro-F1 " + format_double(report.fidelity->macro_f1) + "\n";
        out += "surrogate micro-F1 " + format_double(report.fidelity->micro_f1) + "\n";
    }
    return out;
}

}  // namespace ztseg
