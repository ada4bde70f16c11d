// ztseg: explainable zero-trust micro-segmentation pipeline.
//
//   ztseg run --config cfg.json [overrides]
//   ztseg <stage> --config cfg.json        (ingest|train|embed|cluster|risk|explain|policy|eval)
//   ztseg report --config cfg.json

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ztseg/pipeline.hpp"

namespace {

// --set section.key=value applies a raw JSON pointer-ish override
void apply_set_overrides(nlohmann::json& j, const std::vector<std::string>& sets) {
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got: " + s);
        std::string key = s.substr(0, eq);
        const std::string value = s.substr(eq + 1);
        nlohmann::json* at = &j;
        std::size_t start = 0;
        for (;;) {
            const auto dot = key.find('.', start);
            const std::string part = key.substr(start, dot - start);
            if (dot == std::string::npos) {
                nlohmann::json parsed;
                try {
                    parsed = nlohmann::json::parse(value);
                } catch (...) {
                    parsed = value; // plain string
                }
                (*at)[part] = parsed;
                break;
            }
            at = &(*at)[part];
            start = dot + 1;
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"explainable zero-trust micro-segmentation pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output_dir;
    std::string hypergraph_mode, clusterer, threshold, segment_split;
    std::int64_t seed = -1;
    int rounds = -1, clients = -1, explain_sample = -1;
    bool no_explain = false, centralized = false, print_report = false;
    std::vector<std::string> sets;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "pipeline config JSON")->required();
        cmd->add_option("--output-dir", output_dir, "override output directory");
        cmd->add_option("--seed", seed, "override seed");
        cmd->add_option("--hypergraph-mode", hypergraph_mode,
                        "knn_only | manifold_hypergraph | none");
        cmd->add_option("--clusterer", clusterer, "minibatch_kmeans | hdbscan");
        cmd->add_option("--threshold", threshold, "otsu or p50..p95");
        cmd->add_option("--segment-split", segment_split, "train | test | all");
        cmd->add_option("--rounds", rounds, "override federated rounds");
        cmd->add_option("--clients", clients, "override client count");
        cmd->add_option("--explain-sample", explain_sample,
                        "explain only this many sampled policy rows");
        cmd->add_flag("--no-explain", no_explain, "disable the XAI stage");
        cmd->add_flag("--centralized", centralized, "no-FL ablation");
        cmd->add_option("--set", sets, "raw config override, section.key=value");
    };

    CLI::App* run_cmd = app.add_subcommand("run", "run the full pipeline");
    add_common(run_cmd);
    run_cmd->add_flag("--report", print_report, "print the consolidated report");

    std::vector<CLI::App*> stage_cmds;
    for (const char* stage : ztseg::kStageNames) {
        CLI::App* cmd = app.add_subcommand(stage, std::string("run the ") + stage + " stage");
        add_common(cmd);
        stage_cmds.push_back(cmd);
    }
    CLI::App* report_cmd = app.add_subcommand("report", "render the consolidated report");
    add_common(report_cmd);

    CLI11_PARSE(app, argc, argv);

    try {
        // config, then --set overrides, then dedicated flags, then env seed
        std::ifstream f(config_path);
        if (!f) throw std::invalid_argument("config file missing: " + config_path);
        std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        nlohmann::json j = nlohmann::json::parse(text);
        apply_set_overrides(j, sets);
        if (!output_dir.empty()) j["output_dir"] = output_dir;
        if (seed >= 0) j["seed"] = seed;
        if (!hypergraph_mode.empty()) j["hypergraph"]["mode"] = hypergraph_mode;
        if (!clusterer.empty()) j["clustering"]["clusterer"] = clusterer;
        if (!threshold.empty()) j["risk"]["threshold"] = threshold;
        if (!segment_split.empty()) j["segment_split"] = segment_split;
        if (rounds >= 0) j["train"]["rounds"] = rounds;
        if (clients >= 0) j["clients"] = clients;
        if (explain_sample >= 0) j["explain"]["sample"] = explain_sample;
        if (no_explain) j["explain"]["enabled"] = false;
        if (centralized) j["centralized"] = true;
        if (const char* env_seed = std::getenv("ZTSEG_SEED")) j["seed"] = std::stoull(env_seed);

        const ztseg::PipelineConfig cfg = ztseg::PipelineConfig::from_json_text(j.dump());

        if (run_cmd->parsed()) {
            const ztseg::RunReport report = ztseg::run_pipeline(cfg);
            for (const auto& t : report.timings) {
                std::cout << t.stage << (t.skipped ? "  skipped (up to date)" : "  done") ;
                if (!t.skipped) std::cout << "  " << t.seconds << "s";
                std::cout << "\n";
            }
            if (print_report) std::cout << "\n" << report.report_text;
            return 0;
        }
        if (report_cmd->parsed()) {
            std::cout << ztseg::render_report(cfg);
            return 0;
        }
        for (std::size_t i = 0; i < stage_cmds.size(); ++i) {
            if (stage_cmds[i]->parsed()) {
                const ztseg::StageTiming t = ztseg::run_stage(cfg, ztseg::kStageNames[i]);
                std::cout << t.stage << (t.skipped ? "  skipped (up to date)" : "  done");
                if (!t.skipped) std::cout << "  " << t.seconds << "s";
                std::cout << "\n";
                return 0;
            }
        }
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
