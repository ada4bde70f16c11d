#include "ztseg/risk_policy.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "ztseg/dataio.hpp"

namespace ztseg {

double percentile(std::vector<double> values, double p) {
    require(!values.empty(), "percentile: empty input");
    require(p >= 0.0 && p <= 100.0, "percentile: p out of range");
    std::sort(values.begin(), values.end());
    const double pos = p / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

Vector robust_normalize(const Vector& values) {
    const Eigen::Index n = values.size();
    require(n > 0, "robust_normalize: empty input");
    for (Eigen::Index i = 0; i < n; ++i)
        require(std::isfinite(values[i]), "robust_normalize: non-finite value");

    std::vector<double> v(values.data(), values.data() + n);
    const double med = percentile(v, 50.0);
    const double iqr = percentile(v, 75.0) - percentile(v, 25.0);
    const double scale = std::max(iqr, 1e-9);

    Vector out(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double z = (values[i] - med) / scale;
        z = std::clamp(z, -5.0, 5.0);
        const double s = 1.0 / (1.0 + std::exp(-z));
        out[i] = std::max(0.0, 2.0 * (s - 0.5));
    }
    return out;
}

Vector instance_risk(const Vector& e_norm, const Vector& o_norm, double w1, double w2) {
    require(e_norm.size() == o_norm.size(), "instance_risk: component size mismatch");
    require(w1 >= 0.0 && w2 >= 0.0, "instance_risk: weights must be nonnegative");
    require(std::abs(w1 + w2 - 1.0) <= 1e-12, "instance_risk: weights must sum to 1");
    for (Eigen::Index i = 0; i < e_norm.size(); ++i) {
        require(e_norm[i] >= 0.0 && e_norm[i] <= 1.0, "instance_risk: E component out of [0,1]");
        require(o_norm[i] >= 0.0 && o_norm[i] <= 1.0, "instance_risk: O component out of [0,1]");
    }
    return w1 * e_norm + w2 * o_norm;
}

std::map<int, double> cluster_risk(const Vector& r, const std::vector<int>& labels) {
    require(static_cast<std::size_t>(r.size()) == labels.size(), "cluster_risk: size mismatch");
    std::map<int, double> sum;
    std::map<int, int> count;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        sum[labels[i]] += r[static_cast<Eigen::Index>(i)];
        ++count[labels[i]];
    }
    std::map<int, double> out;
    for (auto& [c, s] : sum) out[c] = s / static_cast<double>(count[c]);
    return out;
}

double otsu_threshold(const std::vector<double>& values, int bins) {
    require(values.size() >= 2, "otsu_threshold: need at least 2 values");
    require(bins >= 2, "otsu_threshold: need at least 2 bins");

    std::vector<double> hist(static_cast<std::size_t>(bins), 0.0);
    for (double v : values) {
        require(v >= 0.0 && v <= 1.0, "otsu_threshold: value outside [0,1]");
        int b = static_cast<int>(v * bins);
        b = std::min(b, bins - 1);
        ++hist[static_cast<std::size_t>(b)];
    }

    const double total = static_cast<double>(values.size());
    double total_mean = 0.0;
    for (int b = 0; b < bins; ++b)
        total_mean += (static_cast<double>(b) + 0.5) / bins * hist[static_cast<std::size_t>(b)];
    total_mean /= total;

    // between-class variance per split; splits with an empty class are invalid
    std::vector<double> var(static_cast<std::size_t>(bins), -1.0);
    double w0 = 0.0, sum0 = 0.0;
    double best_var = -1.0;
    for (int t = 1; t < bins; ++t) {
        // classes: bins [0, t) vs [t, bins)
        w0 += hist[static_cast<std::size_t>(t - 1)];
        sum0 += (static_cast<double>(t - 1) + 0.5) / bins * hist[static_cast<std::size_t>(t - 1)];
        const double w1 = total - w0;
        if (w0 <= 0.0 || w1 <= 0.0) continue;
        const double mu0 = sum0 / w0;
        const double mu1 = (total_mean * total - sum0) / w1;
        var[static_cast<std::size_t>(t)] = (w0 / total) * (w1 / total) * (mu0 - mu1) * (mu0 - mu1);
        best_var = std::max(best_var, var[static_cast<std::size_t>(t)]);
    }
    require(best_var >= 0.0, "otsu_threshold: no valid split");

    // on a flat argmax plateau take the midpoint of the first maximal run,
    // floored, so an exact tie resolves to the lower edge
    int run_start = -1, run_len = 0;
    for (int t = 1; t < bins; ++t) {
        if (var[static_cast<std::size_t>(t)] == best_var) {
            if (run_start < 0) run_start = t;
            ++run_len;
        } else if (run_start >= 0) {
            break;
        }
    }
    const int best_split = run_start + (run_len - 1) / 2;
    return static_cast<double>(best_split) / bins;
}

ThresholdCandidates threshold_candidates(const std::vector<double>& cluster_risks) {
    require(!cluster_risks.empty(), "threshold_candidates: empty input");
    ThresholdCandidates out;
    const double lo = *std::min_element(cluster_risks.begin(), cluster_risks.end());
    const double hi = *std::max_element(cluster_risks.begin(), cluster_risks.end());
    out.degenerate = (hi - lo) <= 1e-12;
    for (int p = 50; p <= 95; p += 5) out.percentiles[p] = percentile(cluster_risks, p);
    out.otsu = out.degenerate ? hi : otsu_threshold(cluster_risks);
    return out;
}

double ThresholdCandidates::select(const std::string& policy) const {
    if (policy == "otsu") return otsu;
    if (policy.size() >= 2 && policy[0] == 'p') {
        const int p = std::stoi(policy.substr(1));
        require(p >= 1 && p <= 99, "threshold policy percentile out of range: " + policy);
        auto it = percentiles.find(p);
        if (it != percentiles.end()) return it->second;
        throw std::invalid_argument("threshold policy " + policy +
                                    " is not among the p50..p95 candidates");
    }
    throw std::invalid_argument("unknown threshold policy: " + policy);
}

RiskReport build_risk_report(const Vector& recon_error, const Vector& outlierness,
                             const std::vector<int>& labels, double w1, double w2,
                             const std::string& threshold_policy) {
    RiskReport rep;
    rep.w1 = w1;
    rep.w2 = w2;
    rep.e_norm = robust_normalize(recon_error);
    rep.o_norm = robust_normalize(outlierness);
    rep.r = instance_risk(rep.e_norm, rep.o_norm, w1, w2);
    rep.cluster_r = cluster_risk(rep.r, labels);
    std::vector<double> risks;
    risks.reserve(rep.cluster_r.size());
    for (auto& [c, v] : rep.cluster_r) risks.push_back(v);
    rep.candidates = threshold_candidates(risks);
    rep.threshold_policy = threshold_policy;
    rep.tau_c = rep.candidates.select(threshold_policy);
    return rep;
}

namespace {

std::string cid_text(int cid) { return cid < 0 ? "noise" : std::to_string(cid); }

}  // namespace

PolicyTable generate_policy(const Sidecar& sidecar, const IndexList& row_ids,
                            const std::vector<int>& labels, const RiskReport& risk,
                            const std::optional<ExplanationStrings>& explanations) {
    require(row_ids.size() == labels.size(), "generate_policy: row/label count mismatch");

    // majority-vote device -> cluster map over source IPs
    std::unordered_map<std::string, std::map<int, int>> votes;
    for (std::size_t i = 0; i < row_ids.size(); ++i) {
        const auto& ip = sidecar.src_ip[static_cast<std::size_t>(row_ids[i])];
        if (!ip.empty()) ++votes[ip][labels[i]];
    }
    std::unordered_map<std::string, int> device_cluster;
    for (auto& [ip, counts] : votes) {
        int best_cluster = 0, best_count = -1;
        for (auto& [c, cnt] : counts) { // ascending cluster id wins ties
            if (cnt > best_count) {
                best_count = cnt;
                best_cluster = c;
            }
        }
        device_cluster[ip] = best_cluster;
    }

    PolicyTable table;
    table.rows.reserve(row_ids.size());
    for (std::size_t i = 0; i < row_ids.size(); ++i) {
        const int row = row_ids[i];
        const int src = labels[i];
        PolicyRow pr;
        pr.did = row;
        pr.src_cid = cid_text(src);
        pr.sip = sidecar.src_ip[static_cast<std::size_t>(row)];
        pr.dip = sidecar.dst_ip[static_cast<std::size_t>(row)];
        pr.sport = sidecar.src_port[static_cast<std::size_t>(row)];
        pr.dport = sidecar.dst_port[static_cast<std::size_t>(row)];
        const auto risk_it = risk.cluster_r.find(src);
        pr.src_risk = risk_it != risk.cluster_r.end() ? risk_it->second : 1.0;

        auto dst_it = device_cluster.end();
        if (!pr.dip.empty()) dst_it = device_cluster.find(pr.dip);
        if (dst_it == device_cluster.end()) {
            pr.dst_cid = "external";
            pr.decision = "Block";
        } else {
            const int dst = dst_it->second;
            pr.dst_cid = cid_text(dst);
            if (src < 0 || dst < 0 || src != dst) {
                pr.decision = "Block"; // inter-segment and noise default-deny
            } else {
                pr.decision = pr.src_risk <= risk.tau_c ? "Allow" : "Block";
            }
        }
        if (explanations) {
            auto lit = explanations->lime.find(pr.did);
            if (lit != explanations->lime.end()) pr.lime_top = lit->second;
            auto sit = explanations->shap.find(pr.did);
            if (sit != explanations->shap.end()) pr.shap_top = sit->second;
        }
        table.rows.push_back(std::move(pr));
    }
    return table;
}

std::string policy_csv(const PolicyTable& table) {
    std::string out =
        "SRC_CID,DST_CID,SRC_CID_ORSc,DID,SIP,DIP,SPort,DPort,Decision,"
        "LIME_Top_Features,SHAP_Top_Features\n";
    for (const auto& r : table.rows) {
        out += csv_escape(r.src_cid);
        out += ',';
        out += csv_escape(r.dst_cid);
        out += ',';
        out += format_double(r.src_risk);
        out += ',';
        out += std::to_string(r.did);
        out += ',';
        out += csv_escape(r.sip);
        out += ',';
        out += csv_escape(r.dip);
        out += ',';
        out += csv_escape(r.sport);
        out += ',';
        out += csv_escape(r.dport);
        out += ',';
        out += r.decision;
        out += ',';
        out += csv_escape(r.lime_top);
        out += ',';
        out += csv_escape(r.shap_top);
        out += '\n';
    }
    return out;
}

}  // namespace ztseg
