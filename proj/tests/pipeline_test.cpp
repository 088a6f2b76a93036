#include "videotree/pipeline.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>

#include "support/test_backends.hpp"
#include "videotree/random.hpp"

namespace fs = std::filesystem;
using namespace videotree;

namespace {

fs::path temp_dir() {
    auto dir = fs::temp_directory_path() / "videotree_pipeline_test";
    fs::create_directories(dir);
    return dir;
}

FeatureSet random_features(std::size_t n, std::uint32_t d, std::uint64_t seed,
                           const std::string& video_id = "rand") {
    FeatureSet set;
    set.video_id = video_id;
    set.dim = d;
    set.fps = 1.0;
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        FrameEmbedding fr;
        fr.frame_index = static_cast<std::uint32_t>(i);
        fr.timestamp = static_cast<double>(i);
        for (std::uint32_t c = 0; c < d; ++c)
            fr.vector.push_back(static_cast<float>(rng.next_double() * 2.0 - 1.0));
        set.frames.push_back(std::move(fr));
    }
    return set;
}

QATask dummy_task(const std::string& video_id = "rand") {
    QATask task;
    task.uid = "task-" + video_id;
    task.video_id = video_id;
    task.question = "What happens?";
    task.options = {"one", "two", "three", "four", "five"};
    task.answer = 0;
    return task;
}

// Scorer that emits a fixed number of High scores keyed by caption count.
test_support::LambdaLlm::Fn scorer_by_count(std::map<std::size_t, int> highs_for,
                                            std::atomic<int>* scoring_calls = nullptr) {
    return [highs_for, scoring_calls](const std::string& prompt) -> std::string {
        if (!test_support::is_scoring_prompt(prompt))
            return "prediction: A, explanation: qa, confidence: 60";
        if (scoring_calls) ++*scoring_calls;
        auto captions = test_support::caption_lines_of(prompt);
        int highs = 0;
        if (auto it = highs_for.find(captions.size()); it != highs_for.end())
            highs = it->second;
        std::vector<int> scores;
        for (std::size_t i = 0; i < captions.size(); ++i)
            scores.push_back(static_cast<int>(i) < highs ? 3 : 1);
        return test_support::relevance_response(scores);
    };
}

test_support::LambdaCaptioner::Fn counting_captioner() {
    return [](const std::string&, std::uint32_t frame) {
        return "activity at frame " + std::to_string(frame);
    };
}

PipelineConfig egoschema_like() {
    PipelineConfig cfg;
    cfg.k_init = 8;
    cfg.max_breadth = 32;
    cfg.rele_num_thresh = 4;
    cfg.branch_width = 2;
    cfg.max_depth = 3;
    cfg.seed = 1234;
    return cfg;
}

TEST(AdaptiveBreadth, DoublesUntilThreshold) {
    auto fs = normalize(random_features(64, 4, 5));
    std::atomic<int> scoring_calls{0};
    auto gw = test_support::make_inline_gateway(
        scorer_by_count({{8, 2}, {16, 3}, {32, 5}}, &scoring_calls), counting_captioner());

    auto cfg = egoschema_like();
    RunRecord rec;
    rec.video_id = fs.video_id;
    auto out = adaptive_breadth_expansion(fs, dummy_task(), cfg, *gw, rec);

    EXPECT_EQ(rec.k_sequence, (std::vector<std::uint32_t>{8, 16, 32}));
    EXPECT_EQ(scoring_calls.load(), 3);
    EXPECT_EQ(out.level1.size(), 32u);
    EXPECT_EQ(out.relevance.size(), 32u);
    ASSERT_EQ(rec.breadth_iterations.size(), 3u);
    EXPECT_EQ(rec.breadth_iterations[0].high_count, 2u);
    EXPECT_EQ(rec.breadth_iterations[1].high_count, 3u);
    EXPECT_EQ(rec.breadth_iterations[2].high_count, 5u);
}

TEST(AdaptiveBreadth, StopsImmediatelyWhenThresholdMet) {
    auto fs = normalize(random_features(64, 4, 6));
    std::atomic<int> scoring_calls{0};
    auto gw = test_support::make_inline_gateway(scorer_by_count({{8, 4}}, &scoring_calls),
                                                counting_captioner());
    auto cfg = egoschema_like();
    RunRecord rec;
    rec.video_id = fs.video_id;
    auto out = adaptive_breadth_expansion(fs, dummy_task(), cfg, *gw, rec);
    EXPECT_EQ(rec.k_sequence, (std::vector<std::uint32_t>{8}));
    EXPECT_EQ(scoring_calls.load(), 1);
    EXPECT_EQ(out.level1.size(), 8u);
}

TEST(AdaptiveBreadth, ExhaustsToMaxBreadthAndKeepsLastClustering) {
    auto fs = normalize(random_features(64, 4, 7));
    auto gw = test_support::make_inline_gateway(scorer_by_count({}), counting_captioner());
    auto cfg = egoschema_like();  // scorer never yields highs
    RunRecord rec;
    rec.video_id = fs.video_id;
    auto out = adaptive_breadth_expansion(fs, dummy_task(), cfg, *gw, rec);
    EXPECT_EQ(rec.k_sequence, (std::vector<std::uint32_t>{8, 16, 32}));
    EXPECT_EQ(out.level1.size(), 32u);
}

TEST(AdaptiveBreadth, KSequenceIsStrictDoubling) {
    auto fs = normalize(random_features(70, 3, 11));
    auto gw = test_support::make_inline_gateway(scorer_by_count({}), counting_captioner());
    PipelineConfig cfg = egoschema_like();
    cfg.k_init = 3;
    cfg.max_breadth = 30;
    RunRecord rec;
    rec.video_id = fs.video_id;
    adaptive_breadth_expansion(fs, dummy_task(), cfg, *gw, rec);
    ASSERT_FALSE(rec.k_sequence.empty());
    for (std::size_t i = 0; i < rec.k_sequence.size(); ++i)
        EXPECT_EQ(rec.k_sequence[i], cfg.k_init << i);
    EXPECT_LE(rec.k_sequence.back(), cfg.max_breadth);
}

TEST(DepthExpansion, AllLowLeavesLayerUntouched) {
    auto fs = normalize(random_features(20, 3, 8));
    auto gw = test_support::make_inline_gateway(scorer_by_count({{4, 0}}), counting_captioner());
    PipelineConfig cfg = egoschema_like();
    cfg.k_init = 4;
    cfg.max_breadth = 4;
    RunRecord rec;
    rec.video_id = fs.video_id;
    auto out = adaptive_breadth_expansion(fs, dummy_task(), cfg, *gw, rec);

    auto tree = depth_expansion(out.level1, out.relevance, cfg, fs);
    EXPECT_EQ(tree.roots.size(), out.level1.size());
    for (const auto& root : tree.roots) {
        EXPECT_TRUE(root.children.empty());
        EXPECT_EQ(root.relevance, RelevanceLevel::Low);
    }
    EXPECT_NO_THROW(validate_tree(tree));
}

TEST(DepthExpansion, RejectsLengthMismatch) {
    auto fs = normalize(random_features(10, 2, 9));
    std::vector<TreeNode> nodes(2);
    nodes[0].node_id = "0";
    nodes[0].level = 1;
    nodes[0].member_frames = {0};
    nodes[0].keyframe = 0;
    nodes[1] = nodes[0];
    nodes[1].node_id = "1";
    std::vector<RelevanceLevel> rel{RelevanceLevel::Low};
    EXPECT_THROW(depth_expansion(nodes, rel, egoschema_like(), fs), LengthMismatch);
}

TEST(RunVideo, SingleFrameDegeneratePath) {
    auto fs = random_features(1, 3, 10, "single");
    auto path = temp_dir() / "single.vtrf";
    write_features(fs, path);

    auto gw = test_support::make_inline_gateway(scorer_by_count({{1, 1}}), counting_captioner());
    PipelineConfig cfg = egoschema_like();
    cfg.rele_num_thresh = 1;
    auto rec = run_video(dummy_task("single"), path, cfg, *gw);

    EXPECT_EQ(rec.k_sequence, (std::vector<std::uint32_t>{1}));
    EXPECT_EQ(rec.llm_calls, 2u);  // one scoring round + one QA call
    EXPECT_EQ(rec.tree.roots.size(), 1u);
    EXPECT_EQ(rec.keyframes_used, (std::vector<std::uint32_t>{0}));
    EXPECT_FALSE(rec.warnings.empty());  // clamped k warning
}

TEST(RunVideo, RecordInvariantsAndDeterminism) {
    auto fs = random_features(48, 4, 12, "det");
    auto path = temp_dir() / "det.vtrf";
    write_features(fs, path);
    PipelineConfig cfg = egoschema_like();
    cfg.k_init = 4;
    cfg.max_breadth = 16;
    cfg.rele_num_thresh = 3;

    auto make_gw = [] {
        return test_support::make_inline_gateway(scorer_by_count({{4, 1}, {8, 2}, {16, 4}}),
                                                 counting_captioner());
    };
    auto rec1 = run_video(dummy_task("det"), path, cfg, *make_gw());
    auto rec2 = run_video(dummy_task("det"), path, cfg, *make_gw());

    EXPECT_EQ(record_json_with_masked_timings(rec1), record_json_with_masked_timings(rec2));
    EXPECT_EQ(rec1.llm_calls, rec1.k_sequence.size() + 1);
    EXPECT_EQ(rec1.captions_used, rec1.keyframes_used.size());
    EXPECT_GE(rec1.captioner_calls, rec1.captions_used);  // intermediate keyframes also captioned
    EXPECT_LE(rec1.captions_used, count_nodes(rec1.tree));
    EXPECT_NO_THROW(validate_tree(rec1.tree));

    double bound = std::log2(static_cast<double>(cfg.max_breadth) / cfg.k_init) + 2.0;
    EXPECT_LE(static_cast<double>(rec1.llm_calls), bound + 1e-9);
}

TEST(RunVideo, DuplicateKeyframeCaptionedOnce) {
    // Two frames with identical vectors: child keyframes collapse onto the
    // root keyframe, so the final prompt must contain the caption once.
    FeatureSet fs;
    fs.video_id = "dups";
    fs.dim = 2;
    fs.fps = 1.0;
    for (std::uint32_t i = 0; i < 6; ++i) {
        FrameEmbedding fr;
        fr.frame_index = i;
        fr.timestamp = i;
        float base = i < 3 ? 0.0f : 50.0f;
        float off = (i == 1 || i == 4) ? 0.0f : 2.0f * static_cast<float>(i % 3);
        fr.vector = {base + off, 0.0f};
        fs.frames.push_back(fr);
    }
    auto path = temp_dir() / "dups.vtrf";
    write_features(fs, path);

    std::string last_qa_prompt;
    auto llm = [&](const std::string& prompt) -> std::string {
        if (test_support::is_scoring_prompt(prompt)) {
            auto captions = test_support::caption_lines_of(prompt);
            std::vector<int> scores(captions.size(), 3);
            return test_support::relevance_response(scores);
        }
        last_qa_prompt = prompt;
        return "prediction: E, explanation: scripted, confidence: 99";
    };
    auto gw = test_support::make_inline_gateway(llm, counting_captioner());

    PipelineConfig cfg;
    cfg.k_init = 2;
    cfg.max_breadth = 2;
    cfg.rele_num_thresh = 1;
    cfg.branch_width = 2;
    cfg.max_depth = 3;
    cfg.seed = 3;
    auto rec = run_video(dummy_task("dups"), path, cfg, *gw);

    EXPECT_EQ(rec.answer.prediction, 'E');
    for (std::uint32_t f : rec.keyframes_used) {
        std::string needle = "activity at frame " + std::to_string(f);
        auto first = last_qa_prompt.find(needle);
        ASSERT_NE(first, std::string::npos);
        EXPECT_EQ(last_qa_prompt.find(needle, first + 1), std::string::npos)
            << "caption for frame " << f << " appears twice";
    }
    EXPECT_EQ(rec.captions_used, rec.keyframes_used.size());
}

TEST(RunVideo, ScoringDraftsRecordedButUnused) {
    auto fs = random_features(24, 3, 14, "draft");
    auto path = temp_dir() / "draft.vtrf";
    write_features(fs, path);
    auto llm = [](const std::string& prompt) -> std::string {
        if (test_support::is_scoring_prompt(prompt)) {
            auto captions = test_support::caption_lines_of(prompt);
            std::vector<int> scores(captions.size(), 3);
            return test_support::relevance_response(scores, "draft answer");
        }
        return "prediction: D, explanation: final, confidence: 91";
    };
    auto gw = test_support::make_inline_gateway(llm, counting_captioner());
    PipelineConfig cfg;
    cfg.k_init = 4;
    cfg.max_breadth = 8;
    cfg.rele_num_thresh = 1;
    cfg.branch_width = 2;
    cfg.max_depth = 2;
    cfg.seed = 4;
    auto rec = run_video(dummy_task("draft"), path, cfg, *gw);
    ASSERT_FALSE(rec.breadth_iterations.empty());
    EXPECT_EQ(rec.breadth_iterations[0].draft_prediction, 'A');  // the scoring draft
    EXPECT_EQ(rec.answer.prediction, 'D');                       // the QA answer wins
}

TEST(RunVideo, WrapsErrorsWithTaskUid) {
    auto gw = test_support::make_inline_gateway(scorer_by_count({}), counting_captioner());
    try {
        run_video(dummy_task("ghost"), temp_dir() / "missing.vtrf", egoschema_like(), *gw);
        FAIL() << "expected RunError";
    } catch (const RunError& e) {
        EXPECT_EQ(e.uid, "task-ghost");
        EXPECT_EQ(e.kind, ErrorKind::assets);
        EXPECT_NE(std::string(e.what()).find("task-ghost"), std::string::npos);
    }
}

TEST(RunRecordJson, RoundTrips) {
    auto fs = random_features(20, 3, 21, "json");
    auto path = temp_dir() / "json.vtrf";
    write_features(fs, path);
    auto gw = test_support::make_inline_gateway(scorer_by_count({{4, 2}}), counting_captioner());
    PipelineConfig cfg;
    cfg.k_init = 4;
    cfg.max_breadth = 8;
    cfg.rele_num_thresh = 2;
    cfg.branch_width = 2;
    cfg.max_depth = 3;
    cfg.seed = 77;
    auto rec = run_video(dummy_task("json"), path, cfg, *gw);

    nlohmann::json j = rec;
    auto back = j.get<RunRecord>();
    EXPECT_EQ(record_json_with_masked_timings(rec), record_json_with_masked_timings(back));
}

}  // namespace
