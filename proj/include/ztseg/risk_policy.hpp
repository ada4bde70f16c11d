#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ztseg/flow_ingest.hpp"
#include "ztseg/segmentation.hpp"
#include "ztseg/types.hpp"

namespace ztseg {

// Robust [0,1] normalization: z-score against median/IQR, clipped to
// [-5, 5], sigmoid-squashed and shifted so values at or below the median map
// to exactly 0.
Vector robust_normalize(const Vector& values);

// Linearly interpolated percentile of a sample, p in [0, 100].
double percentile(std::vector<double> values, double p);

// r = w1 * E_norm + w2 * O_norm, both components already in [0,1].
Vector instance_risk(const Vector& e_norm, const Vector& o_norm, double w1 = 0.5,
                     double w2 = 0.5);

// Mean member risk per cluster; noise (-1) is its own pseudo-cluster.
std::map<int, double> cluster_risk(const Vector& r, const std::vector<int>& labels);

struct ThresholdCandidates {
    std::map<int, double> percentiles; // p50, p55, ..., p95
    double otsu = 0.0;
    bool degenerate = false; // all cluster risks equal

    double select(const std::string& policy) const; // "otsu" or "pNN"
};

// Candidate cutoffs over the cluster-risk distribution: percentile grid plus
// Otsu's split over a 256-bin histogram on [0,1].
ThresholdCandidates threshold_candidates(const std::vector<double>& cluster_risks);

// Otsu split over `bins` equal-width bins on [0,1]; returns the bin edge
// maximizing the between-class variance, ties to the lower edge.
double otsu_threshold(const std::vector<double>& values, int bins = 256);

struct RiskReport {
    Vector e_norm, o_norm, r;         // per clustered row
    double w1 = 0.5, w2 = 0.5;
    std::map<int, double> cluster_r;  // R(c), noise under -1
    ThresholdCandidates candidates;
    double tau_c = 0.0;
    std::string threshold_policy = "otsu";
};

RiskReport build_risk_report(const Vector& recon_error, const Vector& outlierness,
                             const std::vector<int>& labels, double w1, double w2,
                             const std::string& threshold_policy);

struct PolicyRow {
    std::string src_cid;  // cluster id, "noise", as text
    std::string dst_cid;  // cluster id, "noise" or "external"
    double src_risk = 0.0;
    long did = 0; // dataset row id
    std::string sip, dip, sport, dport;
    std::string decision; // "Allow" | "Block"
    std::string lime_top, shap_top;
};

struct PolicyTable {
    std::vector<PolicyRow> rows;
};

// Per-DID explanation strings, joined into the policy table.
struct ExplanationStrings {
    std::map<long, std::string> lime;
    std::map<long, std::string> shap;
};

// Emit one policy row per clustered flow. DST_CID comes from a majority-vote
// device-to-cluster map over source IPs; destinations never seen as a source
// are "external" and blocked. Intra-segment rows are allowed iff
// R(c) <= tau_c; inter-segment rows and noise rows are always blocked.
PolicyTable generate_policy(const Sidecar& sidecar, const IndexList& row_ids,
                            const std::vector<int>& labels, const RiskReport& risk,
                            const std::optional<ExplanationStrings>& explanations);

// CSV with the fixed column order:
// SRC_CID,DST_CID,SRC_CID_ORSc,DID,SIP,DIP,SPort,DPort,Decision,
// LIME_Top_Features,SHAP_Top_Features
std::string policy_csv(const PolicyTable& table);

}  // namespace ztseg
