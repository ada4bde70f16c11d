#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ztseg/explain.hpp"
#include "ztseg/types.hpp"

namespace ztseg {

// Mean silhouette over a seed-fixed sample of non-noise rows. With
// sample_cap >= n the computation is exhaustive.
double silhouette(const Matrix& x, const std::vector<int>& labels, int sample_cap = 10000,
                  std::uint64_t seed = 0);

double davies_bouldin(const Matrix& x, const std::vector<int>& labels);

struct ClusterPurity {
    int cluster = 0;
    int size = 0;
    int n_attack = 0;
    int dominant_class = 0; // 0 benign, 1 attack; ties go benign
    double purity = 0.0;
    double contamination = 0.0; // minority fraction, named by direction below
};

struct PurityReport {
    std::vector<ClusterPurity> clusters;      // non-noise clusters
    double weighted_purity = 0.0;             // size-weighted over clusters
    double mean_purity = 0.0;                 // unweighted cluster average
    double attack_in_benign = 0.0;            // C_{A->B}, size-weighted
    double benign_in_attack = 0.0;            // C_{B->A}, size-weighted
    std::size_t noise_rows = 0;
    double noise_attack_fraction = 0.0;
};

PurityReport purity_contamination(const std::vector<int>& labels,
                                  const std::vector<int>& truth);

struct FidelityReport {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    double micro_f1 = 0.0;
};

FidelityReport surrogate_fidelity(const Surrogate& surrogate, const Matrix& x_test,
                                  const std::vector<int>& labels_test);

FidelityReport classification_fidelity(const std::vector<int>& predicted,
                                       const std::vector<int>& truth);

struct EvalReport {
    double silhouette_score = 0.0;
    double dbi = 0.0;
    std::optional<PurityReport> security; // absent without ground-truth labels
    std::optional<FidelityReport> fidelity;
    int n_clusters = 0;
    std::size_t noise_rows = 0;
    int size_min = 0, size_median = 0, size_max = 0;
};

std::string eval_report_text(const EvalReport& report, const std::string& clusterer,
                             const std::string& hypergraph_mode);

}  // namespace ztseg
