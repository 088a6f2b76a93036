#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "videotree/clustering.hpp"
#include "videotree/errors.hpp"
#include "videotree/feature_store.hpp"
#include "videotree/model_gateway.hpp"
#include "videotree/pipeline_config.hpp"
#include "videotree/prompts.hpp"
#include "videotree/tree.hpp"

namespace videotree {

struct BreadthIteration {
    std::uint32_t k = 0;      // requested this round
    std::uint32_t k_eff = 0;  // realized
    std::vector<RelevanceLevel> relevance;
    std::uint32_t high_count = 0;
    // Scoring prompts also elicit an answer draft; recorded, never used.
    char draft_prediction = 'A';
    int draft_confidence = 1;
};

struct StageTimes {
    double captioning = 0.0;
    double keyframe_selection = 0.0;
    double qa = 0.0;

    double overall() const { return captioning + keyframe_selection + qa; }
};

// Full provenance of one pipeline execution. Byte-identical across runs
// (minus the wall-clock stage_times) under fixed seed and scripted backends.
struct RunRecord {
    std::string task_uid;
    std::string video_id;
    PipelineConfig config;
    std::vector<std::uint32_t> k_sequence;
    std::vector<BreadthIteration> breadth_iterations;
    std::vector<RelevanceLevel> relevance_by_cluster;  // final level-1 scores
    VideoTree tree;
    std::vector<std::uint32_t> keyframes_used;
    std::uint64_t captions_used = 0;
    std::uint64_t llm_calls = 0;        // scoring rounds + 1 QA call
    std::uint64_t captioner_calls = 0;  // distinct keyframes captioned
    StageTimes stage_times;
    AnswerRecord answer;
    std::vector<std::string> warnings;
};

enum class ErrorKind { config, assets, backend, parse, other };

struct RunError : std::runtime_error {
    RunError(ErrorKind k, std::string task_uid, const std::string& msg)
        : std::runtime_error("task " + task_uid + ": " + msg), kind(k), uid(std::move(task_uid)) {}
    ErrorKind kind;
    std::string uid;
};

inline ErrorKind classify_error(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return ErrorKind::config;
    if (dynamic_cast<const IoError*>(&e)) return ErrorKind::assets;
    if (dynamic_cast<const CaptionMissing*>(&e)) return ErrorKind::assets;
    if (dynamic_cast<const TransportError*>(&e)) return ErrorKind::backend;
    if (dynamic_cast<const BackendRefusal*>(&e)) return ErrorKind::backend;
    if (dynamic_cast<const ScriptExhausted*>(&e)) return ErrorKind::backend;
    if (dynamic_cast<const FormatError*>(&e)) return ErrorKind::parse;
    if (dynamic_cast<const ParseFailure*>(&e)) return ErrorKind::parse;
    return ErrorKind::other;
}

inline void to_json(nlohmann::json& j, const BreadthIteration& it) {
    std::vector<int> rel;
    for (auto r : it.relevance) rel.push_back(static_cast<int>(r));
    j = nlohmann::json{{"draft_confidence", it.draft_confidence},
                       {"draft_prediction", std::string(1, it.draft_prediction)},
                       {"high_count", it.high_count},
                       {"k", it.k},
                       {"k_eff", it.k_eff},
                       {"relevance", rel}};
}

inline void from_json(const nlohmann::json& j, BreadthIteration& it) {
    j.at("k").get_to(it.k);
    j.at("k_eff").get_to(it.k_eff);
    j.at("high_count").get_to(it.high_count);
    it.draft_prediction = j.at("draft_prediction").get<std::string>().at(0);
    j.at("draft_confidence").get_to(it.draft_confidence);
    it.relevance.clear();
    for (int v : j.at("relevance").get<std::vector<int>>())
        it.relevance.push_back(static_cast<RelevanceLevel>(v));
}

inline void to_json(nlohmann::json& j, const StageTimes& t) {
    j = nlohmann::json{
        {"captioning", t.captioning}, {"keyframe_selection", t.keyframe_selection}, {"qa", t.qa}};
}

inline void from_json(const nlohmann::json& j, StageTimes& t) {
    j.at("captioning").get_to(t.captioning);
    j.at("keyframe_selection").get_to(t.keyframe_selection);
    j.at("qa").get_to(t.qa);
}

inline void to_json(nlohmann::json& j, const RunRecord& rec) {
    std::vector<int> rel;
    for (auto r : rec.relevance_by_cluster) rel.push_back(static_cast<int>(r));
    j = nlohmann::json{{"answer", rec.answer},
                       {"breadth_iterations", rec.breadth_iterations},
                       {"captioner_calls", rec.captioner_calls},
                       {"captions_used", rec.captions_used},
                       {"config", rec.config},
                       {"k_sequence", rec.k_sequence},
                       {"keyframes_used", rec.keyframes_used},
                       {"llm_calls", rec.llm_calls},
                       {"relevance_by_cluster", rel},
                       {"stage_times", rec.stage_times},
                       {"task_uid", rec.task_uid},
                       {"tree", rec.tree},
                       {"video_id", rec.video_id},
                       {"warnings", rec.warnings}};
}

inline void from_json(const nlohmann::json& j, RunRecord& rec) {
    j.at("task_uid").get_to(rec.task_uid);
    j.at("video_id").get_to(rec.video_id);
    j.at("config").get_to(rec.config);
    j.at("k_sequence").get_to(rec.k_sequence);
    j.at("breadth_iterations").get_to(rec.breadth_iterations);
    rec.relevance_by_cluster.clear();
    for (int v : j.at("relevance_by_cluster").get<std::vector<int>>())
        rec.relevance_by_cluster.push_back(static_cast<RelevanceLevel>(v));
    j.at("tree").get_to(rec.tree);
    j.at("keyframes_used").get_to(rec.keyframes_used);
    j.at("captions_used").get_to(rec.captions_used);
    j.at("llm_calls").get_to(rec.llm_calls);
    j.at("captioner_calls").get_to(rec.captioner_calls);
    j.at("stage_times").get_to(rec.stage_times);
    j.at("answer").get_to(rec.answer);
    j.at("warnings").get_to(rec.warnings);
}

// Canonical record JSON with the wall-clock fields zeroed; goldens compare this.
inline std::string record_json_with_masked_timings(const RunRecord& rec) {
    nlohmann::json j = rec;
    j["stage_times"] = StageTimes{};
    return j.dump() + "\n";
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

inline std::vector<IndexedVector> all_points(const FeatureSet& fs) {
    std::vector<IndexedVector> pts;
    pts.reserve(fs.frames.size());
    for (const auto& fr : fs.frames) pts.push_back({fr.frame_index, fr.vector});
    return pts;
}

inline std::uint32_t count_high(const std::vector<RelevanceLevel>& rel) {
    std::uint32_t n = 0;
    for (auto r : rel)
        if (r == RelevanceLevel::High) ++n;
    return n;
}

}  // namespace detail

struct BreadthOutcome {
    std::vector<TreeNode> level1;
    std::vector<RelevanceLevel> relevance;
};

// Cluster -> caption -> score, doubling k until enough highly relevant
// clusters exist or the next doubling would leave [k_init, max_breadth]. If
// the threshold is never met, the last computed clustering stands.
inline BreadthOutcome adaptive_breadth_expansion(const FeatureSet& fs, const QATask& task,
                                                 const PipelineConfig& cfg, ModelGateway& gw,
                                                 RunRecord& rec) {
    validate(cfg);
    const std::string& video = rec.video_id;
    auto points = detail::all_points(fs);

    std::uint32_t k = cfg.k_init;
    if (fs.size() < k) {
        k = static_cast<std::uint32_t>(fs.size());
        rec.warnings.push_back("only " + std::to_string(fs.size()) +
                               " frames; clamped initial k from " + std::to_string(cfg.k_init));
    }

    BreadthOutcome out;
    while (true) {
        auto select_start = detail::Clock::now();
        KMeansOptions opts;
        opts.seed = derive_seed(cfg.seed, "breadth:k=" + std::to_string(k));
        auto assignment = kmeans(points, k, opts);
        auto nodes = layer_from_assignment(assignment, fs);
        rec.stage_times.keyframe_selection += detail::seconds_since(select_start);

        auto caption_start = detail::Clock::now();
        std::vector<Caption> captions;
        captions.reserve(nodes.size());
        for (const auto& node : nodes) captions.push_back(gw.get_caption(video, node.keyframe));
        rec.stage_times.captioning += detail::seconds_since(caption_start);

        auto score_start = detail::Clock::now();
        std::string prompt = render_relevance_prompt(captions, task, gw.config().examples);
        AnswerRecord scored = gw.score_relevance(prompt, captions.size(), rec.warnings);
        rec.stage_times.keyframe_selection += detail::seconds_since(score_start);
        for (const auto& w : scored.parse_warnings)
            rec.warnings.push_back("scoring k=" + std::to_string(k) + ": " + w);

        rec.k_sequence.push_back(k);
        BreadthIteration iter;
        iter.k = k;
        iter.k_eff = assignment.k_eff;
        iter.relevance = *scored.relevance;
        iter.high_count = detail::count_high(iter.relevance);
        iter.draft_prediction = scored.prediction;
        iter.draft_confidence = scored.confidence;
        rec.breadth_iterations.push_back(iter);

        out.level1 = std::move(nodes);
        out.relevance = *scored.relevance;

        if (iter.high_count >= cfg.rele_num_thresh) break;
        std::uint32_t next = k * 2;
        if (next > cfg.max_breadth) break;
        if (assignment.k_eff < k) {
            // Fewer distinct vectors than requested clusters: doubling
            // cannot produce new information.
            rec.warnings.push_back("clustering clamped at k_eff=" +
                                   std::to_string(assignment.k_eff) + "; stopping breadth loop");
            break;
        }
        k = next;
    }
    return out;
}

// Relevance-guided depth expansion over the final level-1 layer.
inline VideoTree depth_expansion(const std::vector<TreeNode>& level1,
                                 const std::vector<RelevanceLevel>& relevance,
                                 const PipelineConfig& cfg, const FeatureSet& fs) {
    if (relevance.size() != level1.size())
        throw LengthMismatch("relevance list has " + std::to_string(relevance.size()) +
                             " entries for " + std::to_string(level1.size()) + " level-1 nodes");
    VideoTree tree;
    tree.video_id = fs.video_id;
    tree.config_snapshot = cfg;
    tree.k_final = static_cast<std::uint32_t>(level1.size());
    tree.roots.reserve(level1.size());
    for (std::size_t i = 0; i < level1.size(); ++i)
        tree.roots.push_back(expand_node(level1[i], relevance[i], cfg.branch_width, cfg.max_depth,
                                         fs, cfg.seed));
    return tree;
}

// Final LLM reasoning: caption every keyframe in the tree, feed the captions
// in temporal order together with the query, parse the answer.
inline AnswerRecord answer_query(const VideoTree& tree, const QATask& task, ModelGateway& gw,
                                 RunRecord& rec) {
    auto keyframes = collect_keyframes(tree);

    auto caption_start = detail::Clock::now();
    std::vector<Caption> captions;
    captions.reserve(keyframes.size());
    for (std::uint32_t f : keyframes) captions.push_back(gw.get_caption(rec.video_id, f));
    rec.stage_times.captioning += detail::seconds_since(caption_start);

    auto qa_start = detail::Clock::now();
    std::string prompt = render_qa_prompt(captions, task, gw.config().examples);
    AnswerRecord answer = gw.answer_query(prompt, rec.warnings);
    rec.stage_times.qa += detail::seconds_since(qa_start);
    for (const auto& w : answer.parse_warnings) rec.warnings.push_back("qa: " + w);
    return answer;
}

inline RunRecord run_video(const QATask& task, const std::filesystem::path& feature_path,
                           const PipelineConfig& cfg, ModelGateway& gw) {
    RunRecord rec;
    rec.task_uid = task.uid;
    rec.config = cfg;
    try {
        validate(task);
        auto fetches_before = gw.captioner_fetches();

        FeatureSet raw = load_features(feature_path);
        std::vector<std::uint32_t> zero_frames;
        FeatureSet fs = normalize(raw, &zero_frames);
        for (std::uint32_t f : zero_frames)
            rec.warnings.push_back("zero embedding at frame " + std::to_string(f) +
                                   "; left unnormalized");
        rec.video_id = task.video_id.empty() ? fs.video_id : task.video_id;
        fs.video_id = rec.video_id;

        BreadthOutcome breadth = adaptive_breadth_expansion(fs, task, cfg, gw, rec);

        auto depth_start = detail::Clock::now();
        rec.tree = depth_expansion(breadth.level1, breadth.relevance, cfg, fs);
        rec.stage_times.keyframe_selection += detail::seconds_since(depth_start);
        rec.relevance_by_cluster = breadth.relevance;

        rec.answer = answer_query(rec.tree, task, gw, rec);

        rec.keyframes_used = collect_keyframes(rec.tree);
        rec.captions_used = rec.keyframes_used.size();
        rec.llm_calls = rec.k_sequence.size() + 1;
        rec.captioner_calls = gw.captioner_fetches() - fetches_before;
        return rec;
    } catch (const RunError&) {
        throw;
    } catch (const std::exception& e) {
        throw RunError(classify_error(e), task.uid, e.what());
    }
}

}  // namespace videotree
