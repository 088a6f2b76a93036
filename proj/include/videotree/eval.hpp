#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "videotree/errors.hpp"
#include "videotree/model_gateway.hpp"
#include "videotree/pipeline.hpp"

namespace videotree {

struct PerTaskResult {
    std::string uid;
    std::optional<bool> correct;  // absent when the task has no ground truth
    std::uint64_t captions_used = 0;
    std::uint64_t llm_calls = 0;
};

struct EvalReport {
    std::size_t n_tasks = 0;
    double accuracy = 0.0;         // correct / scored, over completed tasks with ground truth
    double strict_accuracy = 0.0;  // failures with ground truth count as incorrect
    double avg_captions = 0.0;     // over completed tasks, scored or not
    double avg_llm_calls = 0.0;
    StageTimes stage_time_totals;
    std::vector<PerTaskResult> per_task;                       // completed, input order
    std::vector<std::pair<std::string, std::string>> failures;  // (uid, error)
};

inline void to_json(nlohmann::json& j, const PerTaskResult& r) {
    j = nlohmann::json{{"captions_used", r.captions_used},
                       {"llm_calls", r.llm_calls},
                       {"uid", r.uid}};
    j["correct"] = r.correct ? nlohmann::json(*r.correct) : nlohmann::json();
}

inline void to_json(nlohmann::json& j, const EvalReport& rep) {
    nlohmann::json failures = nlohmann::json::array();
    for (const auto& [uid, err] : rep.failures)
        failures.push_back({{"error", err}, {"uid", uid}});
    j = nlohmann::json{{"accuracy", rep.accuracy},
                       {"avg_captions", rep.avg_captions},
                       {"avg_llm_calls", rep.avg_llm_calls},
                       {"failures", failures},
                       {"n_tasks", rep.n_tasks},
                       {"per_task", rep.per_task},
                       {"stage_time_totals", rep.stage_time_totals},
                       {"strict_accuracy", rep.strict_accuracy}};
}

inline QATask task_from_json(const nlohmann::json& t, std::size_t index = 0) {
    auto fail = [&](const std::string& why) {
        throw FormatError("dataset task " + std::to_string(index) + ": " + why);
    };
    if (!t.is_object()) fail("not an object");
    for (const char* field : {"uid", "video_id", "question", "options"})
        if (!t.contains(field)) fail(std::string("missing ") + field);
    QATask task;
    task.uid = t["uid"].get<std::string>();
    task.video_id = t["video_id"].get<std::string>();
    task.question = t["question"].get<std::string>();
    if (!t["options"].is_array() || t["options"].size() != 5) fail("exactly 5 options required");
    for (std::size_t o = 0; o < 5; ++o) task.options[o] = t["options"][o].get<std::string>();
    if (t.contains("answer") && !t["answer"].is_null()) {
        int a = t["answer"].get<int>();
        if (a < 0 || a > 4) fail("answer index out of range: " + std::to_string(a));
        task.answer = a;
    }
    return task;
}

// JSON array of {"uid", "video_id", "question", "options" x5, "answer"?}.
inline std::vector<QATask> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("dataset " + path.string() + ": " + e.what());
    }
    if (!j.is_array()) throw FormatError("dataset must be a JSON array");

    std::vector<QATask> tasks;
    std::set<std::string> uids;
    for (std::size_t i = 0; i < j.size(); ++i) {
        QATask task = task_from_json(j[i], i);
        if (!uids.insert(task.uid).second) throw DuplicateUid("duplicate uid: " + task.uid);
        tasks.push_back(std::move(task));
    }
    return tasks;
}

inline std::filesystem::path feature_path_for(const std::filesystem::path& asset_dir,
                                              const std::string& video_id) {
    auto vtrf = asset_dir / (video_id + ".vtrf");
    if (std::filesystem::exists(vtrf)) return vtrf;
    auto jsonl = asset_dir / (video_id + ".jsonl");
    if (std::filesystem::exists(jsonl)) return jsonl;
    throw IoError("no features for video " + video_id + " under " + asset_dir.string());
}

struct EvalOutcome {
    EvalReport report;
    std::vector<std::optional<RunRecord>> records;  // input order; empty slot on failure
};

using GatewayFactory = std::function<std::unique_ptr<ModelGateway>()>;

// Bounded work queue: at most `parallelism` concurrent run_video executions.
// Each task gets a fresh gateway (cold caches, private mock cursor), which is
// what makes reports and predictions independent of scheduling order.
inline EvalOutcome evaluate_with_factory(const std::vector<QATask>& tasks,
                                         const std::filesystem::path& asset_dir,
                                         const PipelineConfig& cfg,
                                         const GatewayFactory& make_gateway,
                                         unsigned parallelism) {
    if (tasks.empty()) throw EmptyDataset("no tasks to evaluate");
    if (parallelism < 1) throw ConfigError("parallelism must be >= 1");

    EvalOutcome out;
    out.records.resize(tasks.size());
    std::vector<std::optional<std::pair<std::string, std::string>>> failures(tasks.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) break;
            const QATask& task = tasks[i];
            try {
                auto gw = make_gateway();
                auto features = feature_path_for(asset_dir, task.video_id);
                out.records[i] = run_video(task, features, cfg, *gw);
            } catch (const std::exception& e) {
                failures[i] = std::make_pair(task.uid, std::string(e.what()));
            }
        }
    };
    std::vector<std::thread> pool;
    unsigned n_threads = std::min<unsigned>(parallelism, static_cast<unsigned>(tasks.size()));
    pool.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    EvalReport& rep = out.report;
    rep.n_tasks = tasks.size();
    std::size_t completed = 0, scored = 0, correct = 0, with_truth = 0;
    double captions_sum = 0.0, calls_sum = 0.0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (tasks[i].answer) ++with_truth;
        if (failures[i]) {
            rep.failures.push_back(*failures[i]);
            continue;
        }
        const RunRecord& rec = *out.records[i];
        ++completed;
        captions_sum += static_cast<double>(rec.captions_used);
        calls_sum += static_cast<double>(rec.llm_calls);
        rep.stage_time_totals.captioning += rec.stage_times.captioning;
        rep.stage_time_totals.keyframe_selection += rec.stage_times.keyframe_selection;
        rep.stage_time_totals.qa += rec.stage_times.qa;

        PerTaskResult r;
        r.uid = tasks[i].uid;
        r.captions_used = rec.captions_used;
        r.llm_calls = rec.llm_calls;
        if (tasks[i].answer) {
            ++scored;
            bool ok = (rec.answer.prediction - 'A') == *tasks[i].answer;
            if (ok) ++correct;
            r.correct = ok;
        }
        rep.per_task.push_back(std::move(r));
    }
    rep.accuracy = scored ? static_cast<double>(correct) / static_cast<double>(scored) : 0.0;
    rep.strict_accuracy =
        with_truth ? static_cast<double>(correct) / static_cast<double>(with_truth) : 0.0;
    rep.avg_captions = completed ? captions_sum / static_cast<double>(completed) : 0.0;
    rep.avg_llm_calls = completed ? calls_sum / static_cast<double>(completed) : 0.0;
    return out;
}

inline EvalOutcome evaluate(const std::vector<QATask>& tasks,
                            const std::filesystem::path& asset_dir, const PipelineConfig& cfg,
                            const BackendConfig& backends, unsigned parallelism) {
    return evaluate_with_factory(
        tasks, asset_dir, cfg, [&]() { return std::make_unique<ModelGateway>(backends); },
        parallelism);
}

struct EfficiencyProfile {
    std::size_t n_runs = 0;
    StageTimes mean;     // per-stage arithmetic means
    StageTimes total;
    double mean_overall = 0.0;
    double total_overall = 0.0;
    double mean_captions = 0.0;
};

inline EfficiencyProfile efficiency_profile(const std::vector<RunRecord>& records) {
    if (records.empty()) throw EmptyInput("no run records to profile");
    EfficiencyProfile p;
    p.n_runs = records.size();
    double captions = 0.0;
    for (const auto& rec : records) {
        p.total.captioning += rec.stage_times.captioning;
        p.total.keyframe_selection += rec.stage_times.keyframe_selection;
        p.total.qa += rec.stage_times.qa;
        captions += static_cast<double>(rec.captions_used);
    }
    auto n = static_cast<double>(records.size());
    p.mean.captioning = p.total.captioning / n;
    p.mean.keyframe_selection = p.total.keyframe_selection / n;
    p.mean.qa = p.total.qa / n;
    p.total_overall = p.total.overall();
    p.mean_overall = p.total_overall / n;
    p.mean_captions = captions / n;
    return p;
}

// Column order follows the efficiency table: captions, captioning, keyframe
// selection, QA, overall, accuracy.
inline std::string render_report_table(const EvalReport& rep,
                                       const EfficiencyProfile* profile = nullptr) {
    char buf[256];
    std::string out;
    std::snprintf(buf, sizeof(buf), "tasks: %zu  completed: %zu  failed: %zu\n", rep.n_tasks,
                  rep.per_task.size(), rep.failures.size());
    out += buf;
    std::snprintf(buf, sizeof(buf), "accuracy: %.4f  strict: %.4f\n", rep.accuracy,
                  rep.strict_accuracy);
    out += buf;
    out += "\n";
    std::snprintf(buf, sizeof(buf), "%-10s %14s %14s %10s %12s %8s\n", "captions",
                  "captioner (s)", "keyframe (s)", "qa (s)", "overall (s)", "acc");
    out += buf;
    if (profile) {
        std::snprintf(buf, sizeof(buf), "%-10.1f %14.3f %14.3f %10.3f %12.3f %8.4f\n",
                      profile->mean_captions, profile->mean.captioning,
                      profile->mean.keyframe_selection, profile->mean.qa, profile->mean_overall,
                      rep.accuracy);
    } else {
        std::snprintf(buf, sizeof(buf), "%-10.1f %14.3f %14.3f %10.3f %12.3f %8.4f\n",
                      rep.avg_captions, rep.stage_time_totals.captioning,
                      rep.stage_time_totals.keyframe_selection, rep.stage_time_totals.qa,
                      rep.stage_time_totals.overall(), rep.accuracy);
    }
    out += buf;
    return out;
}

// Plain predictions file: one JSON object mapping uid -> option letter.
inline std::string render_predictions(const std::vector<QATask>& tasks,
                                      const std::vector<std::optional<RunRecord>>& records) {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t i = 0; i < tasks.size() && i < records.size(); ++i)
        if (records[i]) j[tasks[i].uid] = std::string(1, records[i]->answer.prediction);
    return j.dump() + "\n";
}

}  // namespace videotree
