#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "videotree/config.hpp"
#include "videotree/eval.hpp"
#include "videotree/inspect.hpp"
#include "videotree/pipeline.hpp"
#include "videotree/tree.hpp"

namespace vt = videotree;
namespace fs = std::filesystem;

namespace {

// 2 config, 3 assets, 4 backend, 5 parse, 1 anything else.
int exit_code_for(const std::exception& e) {
    if (const auto* run = dynamic_cast<const vt::RunError*>(&e)) {
        switch (run->kind) {
            case vt::ErrorKind::config: return 2;
            case vt::ErrorKind::assets: return 3;
            case vt::ErrorKind::backend: return 4;
            case vt::ErrorKind::parse: return 5;
            case vt::ErrorKind::other: return 1;
        }
    }
    if (dynamic_cast<const vt::ConfigError*>(&e)) return 2;
    if (dynamic_cast<const vt::EmptyDataset*>(&e)) return 2;
    if (dynamic_cast<const vt::IoError*>(&e)) return 3;
    if (dynamic_cast<const vt::CaptionMissing*>(&e)) return 3;
    if (dynamic_cast<const vt::TransportError*>(&e)) return 4;
    if (dynamic_cast<const vt::BackendRefusal*>(&e)) return 4;
    if (dynamic_cast<const vt::ScriptExhausted*>(&e)) return 4;
    if (dynamic_cast<const vt::FormatError*>(&e)) return 5;
    if (dynamic_cast<const vt::ParseFailure*>(&e)) return 5;
    if (dynamic_cast<const vt::DuplicateUid*>(&e)) return 5;
    return 1;
}

struct CommonFlags {
    std::string config_path;
    std::uint64_t seed = 0;
    std::uint32_t k_init = 0;
    std::uint32_t max_breadth = 0;
    std::uint32_t threshold = 0;
    std::uint32_t branch_width = 0;
    int max_depth = 0;
    std::string llm;
    std::string captioner;
    std::string model;

    CLI::Option* seed_opt = nullptr;
    CLI::Option* k_init_opt = nullptr;
    CLI::Option* max_breadth_opt = nullptr;
    CLI::Option* threshold_opt = nullptr;
    CLI::Option* branch_width_opt = nullptr;
    CLI::Option* max_depth_opt = nullptr;
    CLI::Option* llm_opt = nullptr;
    CLI::Option* captioner_opt = nullptr;
    CLI::Option* model_opt = nullptr;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "config file ([pipeline]/[backends]/[paths])");
        seed_opt = cmd->add_option("--seed", seed, "clustering seed");
        k_init_opt = cmd->add_option("--k-init", k_init, "initial cluster count");
        max_breadth_opt = cmd->add_option("--max-breadth", max_breadth,
                                          "cap on first-level cluster count");
        threshold_opt = cmd->add_option("--threshold", threshold,
                                        "highly-relevant clusters needed to stop expanding");
        branch_width_opt = cmd->add_option("--branch-width", branch_width,
                                           "children per expanded cluster");
        max_depth_opt = cmd->add_option("--max-depth", max_depth, "tree depth cap (2 or 3)");
        llm_opt = cmd->add_option("--llm", llm, "LLM endpoint URL or mock:<script>");
        captioner_opt = cmd->add_option("--captioner", captioner,
                                        "captioner URL, store:<path> or mock:<script>");
        model_opt = cmd->add_option("--model", model, "model name sent to the LLM endpoint");
    }

    vt::CliConfig resolve() const {
        vt::CliConfig cfg;
        if (!config_path.empty()) cfg = vt::load_cli_config(config_path);
        if (seed_opt->count()) cfg.pipeline.seed = seed;
        if (k_init_opt->count()) cfg.pipeline.k_init = k_init;
        if (max_breadth_opt->count()) cfg.pipeline.max_breadth = max_breadth;
        if (threshold_opt->count()) cfg.pipeline.rele_num_thresh = threshold;
        if (branch_width_opt->count()) cfg.pipeline.branch_width = branch_width;
        if (max_depth_opt->count()) cfg.pipeline.max_depth = max_depth;
        if (llm_opt->count()) cfg.backends.llm_endpoint = llm;
        if (captioner_opt->count()) cfg.backends.captioner = captioner;
        if (model_opt->count()) cfg.backends.model_name = model;
        return cfg;
    }
};

void write_file(const fs::path& path, const std::string& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw vt::IoError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

vt::QATask load_single_task(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw vt::IoError("cannot open task file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw vt::FormatError("task file " + path.string() + ": " + e.what());
    }
    if (j.is_array()) {
        if (j.empty()) throw vt::FormatError("task file " + path.string() + " is an empty array");
        return vt::task_from_json(j[0]);
    }
    return vt::task_from_json(j);
}

void write_tree_exports(const vt::VideoTree& tree, const std::string& prefix,
                        const std::string& format) {
    if (format == "structured" || format == "both")
        write_file(prefix + ".json", vt::export_tree(tree, vt::TreeExportFormat::structured));
    if (format == "dot" || format == "both")
        write_file(prefix + ".dot", vt::export_tree(tree, vt::TreeExportFormat::graph));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adaptive hierarchical keyframe selection and LLM reasoning over long videos"};
    app.require_subcommand(1);

    // --- run ---------------------------------------------------------------
    auto* run_cmd = app.add_subcommand("run", "answer one question about one video");
    CommonFlags run_flags;
    run_flags.attach(run_cmd);
    std::string task_path, features_path, question, video_id, uid = "inline-0";
    std::vector<std::string> inline_options;
    std::string record_out, tree_out, run_format = "both";
    run_cmd->add_option("--task", task_path, "task JSON file (single object or array)");
    run_cmd->add_option("--question", question, "inline question text");
    run_cmd->add_option("--option", inline_options, "inline answer option (give exactly 5)");
    run_cmd->add_option("--video", video_id, "video id for inline questions");
    run_cmd->add_option("--uid", uid, "task uid for inline questions");
    run_cmd->add_option("--features", features_path, "feature file (.vtrf or JSON lines)");
    run_cmd->add_option("--record-out", record_out, "write the run record JSON here");
    run_cmd->add_option("--tree-out", tree_out, "path prefix for tree exports");
    run_cmd->add_option("--format", run_format, "tree export format: structured, dot or both")
        ->check(CLI::IsMember({"structured", "dot", "both"}));

    // --- eval --------------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("eval", "run a dataset and report accuracy/efficiency");
    CommonFlags eval_flags;
    eval_flags.attach(eval_cmd);
    std::string dataset_path, asset_dir_flag, report_out, predictions_out, records_dir;
    unsigned parallel = 1;
    eval_cmd->add_option("--dataset", dataset_path, "dataset JSON file")->required();
    eval_cmd->add_option("--asset-dir", asset_dir_flag,
                         "directory of <video_id>.vtrf and <video_id>.captions.jsonl");
    eval_cmd->add_option("--parallel", parallel, "concurrent videos")->check(CLI::PositiveNumber);
    eval_cmd->add_option("--report-out", report_out, "write the eval report JSON here");
    eval_cmd->add_option("--predictions-out", predictions_out,
                         "write the {uid: letter} predictions file here");
    eval_cmd->add_option("--records-dir", records_dir, "write per-task run records here");

    // --- inspect -----------------------------------------------------------
    auto* inspect_cmd = app.add_subcommand("inspect", "pretty-print a run record");
    std::string record_path, inspect_format = "text";
    inspect_cmd->add_option("record", record_path, "run record JSON file")->required();
    inspect_cmd->add_option("--format", inspect_format, "text or dot")
        ->check(CLI::IsMember({"text", "dot"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (run_cmd->parsed()) {
            vt::CliConfig cfg = run_flags.resolve();
            vt::validate(cfg.pipeline);

            vt::QATask task;
            if (!task_path.empty()) {
                task = load_single_task(task_path);
            } else if (!question.empty()) {
                if (inline_options.size() != 5)
                    throw vt::ConfigError("inline questions need exactly 5 --option values");
                task.uid = uid;
                task.video_id = video_id;
                task.question = question;
                for (std::size_t i = 0; i < 5; ++i) task.options[i] = inline_options[i];
            } else {
                throw vt::ConfigError("provide --task or --question");
            }

            fs::path features = !features_path.empty() ? fs::path(features_path)
                                : !cfg.features.empty()
                                    ? fs::path(cfg.features)
                                    : fs::path();
            if (features.empty() && !cfg.asset_dir.empty() && !task.video_id.empty())
                features = vt::feature_path_for(cfg.asset_dir, task.video_id);
            if (features.empty()) throw vt::ConfigError("no feature file configured");
            if (!fs::exists(features))
                throw vt::IoError("features file not found: " + features.string());

            vt::validate(cfg.backends);
            vt::ModelGateway gateway(cfg.backends);
            vt::RunRecord rec = vt::run_video(task, features, cfg.pipeline, gateway);

            if (!record_out.empty())
                write_file(record_out, nlohmann::json(rec).dump() + "\n");
            if (!tree_out.empty()) write_tree_exports(rec.tree, tree_out, run_format);
            std::printf("prediction: %c\n", rec.answer.prediction);
            return 0;
        }

        if (eval_cmd->parsed()) {
            vt::CliConfig cfg = eval_flags.resolve();
            vt::validate(cfg.pipeline);
            if (!asset_dir_flag.empty()) cfg.asset_dir = asset_dir_flag;
            if (cfg.asset_dir.empty()) throw vt::ConfigError("no asset directory configured");
            vt::validate(cfg.backends);

            auto tasks = vt::load_dataset(dataset_path);
            auto outcome = vt::evaluate(tasks, cfg.asset_dir, cfg.pipeline, cfg.backends, parallel);

            if (!report_out.empty())
                write_file(report_out, nlohmann::json(outcome.report).dump() + "\n");
            if (!predictions_out.empty())
                write_file(predictions_out, vt::render_predictions(tasks, outcome.records));
            if (!records_dir.empty()) {
                for (std::size_t i = 0; i < tasks.size(); ++i)
                    if (outcome.records[i])
                        write_file(fs::path(records_dir) / (tasks[i].uid + ".json"),
                                   nlohmann::json(*outcome.records[i]).dump() + "\n");
            }

            std::vector<vt::RunRecord> completed;
            for (const auto& r : outcome.records)
                if (r) completed.push_back(*r);
            if (!completed.empty()) {
                auto profile = vt::efficiency_profile(completed);
                std::fputs(vt::render_report_table(outcome.report, &profile).c_str(), stdout);
            } else {
                std::fputs(vt::render_report_table(outcome.report).c_str(), stdout);
            }
            for (const auto& [fuid, err] : outcome.report.failures)
                std::fprintf(stderr, "failed %s: %s\n", fuid.c_str(), err.c_str());
            return 0;
        }

        if (inspect_cmd->parsed()) {
            std::ifstream in(record_path);
            if (!in) throw vt::IoError("cannot open run record: " + record_path);
            vt::RunRecord rec;
            try {
                nlohmann::json j;
                in >> j;
                rec = j.get<vt::RunRecord>();
            } catch (const nlohmann::json::exception& e) {
                throw vt::FormatError("corrupt run record " + record_path + ": " + e.what());
            }
            if (inspect_format == "dot")
                std::fputs(vt::export_tree(rec.tree, vt::TreeExportFormat::graph).c_str(), stdout);
            else
                std::fputs(vt::render_inspect(rec).c_str(), stdout);
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e);
    }
    return 1;
}
