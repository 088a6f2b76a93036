#pragma once

#include <cstdio>
#include <string>

#include "videotree/pipeline.hpp"
#include "videotree/tree.hpp"

namespace videotree {

// Human-readable rendition of a run record: the k-sequence, the scored
// first-level clusters, the keyframe list and the stage timings.
inline std::string render_inspect(const RunRecord& rec) {
    std::string out;
    out += "task: " + rec.task_uid + "\n";
    out += "video: " + rec.video_id + "\n";
    out += "k sequence:";
    for (auto k : rec.k_sequence) out += " " + std::to_string(k);
    out += "\n";
    out += "relevance by cluster:\n";
    for (const auto& root : rec.tree.roots) {
        const char* name = root.relevance ? relevance_name(*root.relevance) : "unscored";
        out += "  node " + root.node_id + ": keyframe " + std::to_string(root.keyframe) + ", " +
               name + ", " + std::to_string(root.member_frames.size()) + " frames, " +
               std::to_string(root.children.size()) + " children\n";
    }
    out += "keyframes used:";
    for (auto f : rec.keyframes_used) out += " " + std::to_string(f);
    out += "\n";
    out += "captions used: " + std::to_string(rec.captions_used) +
           "   llm calls: " + std::to_string(rec.llm_calls) +
           "   captioner calls: " + std::to_string(rec.captioner_calls) + "\n";
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "stage times (s): captioning %.3f  keyframe_selection %.3f  qa %.3f  "
                  "overall %.3f\n",
                  rec.stage_times.captioning, rec.stage_times.keyframe_selection,
                  rec.stage_times.qa, rec.stage_times.overall());
    out += buf;
    out += "prediction: ";
    out += rec.answer.prediction;
    out += " (confidence " + std::to_string(rec.answer.confidence) + ")\n";
    if (!rec.warnings.empty()) {
        out += "warnings:\n";
        for (const auto& w : rec.warnings) out += "  " + w + "\n";
    }
    return out;
}

}  // namespace videotree
