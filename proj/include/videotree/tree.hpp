#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "videotree/clustering.hpp"
#include "videotree/errors.hpp"
#include "videotree/feature_store.hpp"
#include "videotree/pipeline_config.hpp"
#include "videotree/random.hpp"
#include "videotree/relevance.hpp"

namespace videotree {

struct TreeNode {
    std::string node_id;  // dot-separated child indices, e.g. "3", "3.1", "3.1.0"
    int level = 1;
    std::vector<std::uint32_t> member_frames;  // sorted, non-empty
    std::uint32_t keyframe = 0;                // element of member_frames
    std::optional<RelevanceLevel> relevance;   // only level-1 nodes are ever scored
    std::vector<TreeNode> children;

    bool operator==(const TreeNode&) const = default;
};

struct VideoTree {
    std::string video_id;
    std::vector<TreeNode> roots;  // ordered by keyframe frame_index
    PipelineConfig config_snapshot;
    std::uint32_t k_final = 0;    // realized first-level cluster count

    bool operator==(const VideoTree& other) const {
        nlohmann::json a = config_snapshot, b = other.config_snapshot;
        return video_id == other.video_id && roots == other.roots && k_final == other.k_final &&
               a == b;
    }
};

enum class TreeExportFormat { structured, graph };

namespace detail {

inline const FrameEmbedding& frame_by_index(const FeatureSet& fs, std::uint32_t frame_index) {
    auto it = std::lower_bound(fs.frames.begin(), fs.frames.end(), frame_index,
                               [](const FrameEmbedding& f, std::uint32_t idx) {
                                   return f.frame_index < idx;
                               });
    if (it == fs.frames.end() || it->frame_index != frame_index)
        throw MismatchedFrameCount("frame " + std::to_string(frame_index) +
                                   " not present in feature set");
    return *it;
}

inline std::vector<IndexedVector> members_with_vectors(const std::vector<std::uint32_t>& frames,
                                                       const FeatureSet& fs) {
    std::vector<IndexedVector> out;
    out.reserve(frames.size());
    for (std::uint32_t f : frames)
        out.push_back({f, frame_by_index(fs, f).vector});
    return out;
}

inline TreeNode node_from_spec(const SubtreeSpec& spec, const std::string& node_id, int level) {
    TreeNode node;
    node.node_id = node_id;
    node.level = level;
    node.member_frames.reserve(spec.members.size());
    for (const auto& m : spec.members) node.member_frames.push_back(m.frame_index);
    node.keyframe = spec.keyframe;
    for (std::size_t i = 0; i < spec.children.size(); ++i)
        node.children.push_back(
            node_from_spec(spec.children[i], node_id + "." + std::to_string(i), level + 1));
    return node;
}

}  // namespace detail

// One level-1 node per realized cluster, ordered by keyframe frame_index.
inline std::vector<TreeNode> layer_from_assignment(const ClusterAssignment& assignment,
                                                   const FeatureSet& fs) {
    if (assignment.labels.size() != fs.frames.size())
        throw MismatchedFrameCount("assignment covers " + std::to_string(assignment.labels.size()) +
                                   " frames, feature set has " + std::to_string(fs.frames.size()));

    std::vector<std::vector<IndexedVector>> members(assignment.k_eff);
    for (std::size_t i = 0; i < fs.frames.size(); ++i)
        members[assignment.labels[i]].push_back({fs.frames[i].frame_index, fs.frames[i].vector});

    std::vector<TreeNode> nodes;
    nodes.reserve(assignment.k_eff);
    for (std::uint32_t j = 0; j < assignment.k_eff; ++j) {
        TreeNode node;
        node.level = 1;
        for (const auto& m : members[j]) node.member_frames.push_back(m.frame_index);
        std::sort(node.member_frames.begin(), node.member_frames.end());
        node.keyframe = keyframe_of(members[j], assignment.centroids[j]);
        nodes.push_back(std::move(node));
    }
    std::sort(nodes.begin(), nodes.end(),
              [](const TreeNode& a, const TreeNode& b) { return a.keyframe < b.keyframe; });
    for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i].node_id = std::to_string(i);
    return nodes;
}

// Relevance-guided expansion of one level-1 node. Low adds nothing, Medium one
// sub-level, High two (capped by max_depth). The node's sub-seed depends only
// on (seed, node_id), so nodes expand reproducibly in any order.
inline TreeNode expand_node(const TreeNode& node, RelevanceLevel relevance, std::uint32_t w,
                            int max_depth, const FeatureSet& fs, std::uint64_t seed,
                            const KMeansOptions& kmeans_opts = {}) {
    if (max_depth != 2 && max_depth != 3)
        throw InvalidDepth("max_depth must be 2 or 3, got " + std::to_string(max_depth));
    if (node.level != 1) throw InvalidDepth("only level-1 nodes are expanded");

    TreeNode out = node;
    out.relevance = relevance;
    out.children.clear();
    if (relevance == RelevanceLevel::Low) return out;

    int levels = relevance == RelevanceLevel::Medium ? 1 : std::min(2, max_depth - 1);
    KMeansOptions opts = kmeans_opts;
    opts.seed = derive_seed(seed, node.node_id);
    auto specs = subcluster(detail::members_with_vectors(node.member_frames, fs), w, levels, opts);
    for (std::size_t i = 0; i < specs.size(); ++i)
        out.children.push_back(
            detail::node_from_spec(specs[i], node.node_id + "." + std::to_string(i), 2));
    return out;
}

// Keyframes of every node at every level, deduplicated, ascending.
inline std::vector<std::uint32_t> collect_keyframes(const VideoTree& tree) {
    std::set<std::uint32_t> keys;
    std::function<void(const TreeNode&)> walk = [&](const TreeNode& n) {
        keys.insert(n.keyframe);
        for (const auto& c : n.children) walk(c);
    };
    for (const auto& r : tree.roots) walk(r);
    return {keys.begin(), keys.end()};
}

inline std::size_t count_nodes(const VideoTree& tree) {
    std::size_t n = 0;
    std::function<void(const TreeNode&)> walk = [&](const TreeNode& node) {
        ++n;
        for (const auto& c : node.children) walk(c);
    };
    for (const auto& r : tree.roots) walk(r);
    return n;
}

// Structural invariants: children partition the parent, levels increase by
// one, keyframe is a member, only level-1 nodes carry relevance.
inline void validate_tree(const VideoTree& tree) {
    std::function<void(const TreeNode&)> check = [&](const TreeNode& node) {
        if (node.member_frames.empty())
            throw FormatError("node " + node.node_id + " has no members");
        if (!std::is_sorted(node.member_frames.begin(), node.member_frames.end()))
            throw FormatError("node " + node.node_id + " members not sorted");
        if (!std::binary_search(node.member_frames.begin(), node.member_frames.end(),
                                node.keyframe))
            throw FormatError("node " + node.node_id + " keyframe is not a member");
        if (node.level >= 2 && node.relevance.has_value())
            throw FormatError("node " + node.node_id + " at level >= 2 must be unscored");
        if (!node.children.empty()) {
            std::vector<std::uint32_t> merged;
            for (const auto& c : node.children) {
                if (c.level != node.level + 1)
                    throw FormatError("node " + c.node_id + " level is not parent level + 1");
                merged.insert(merged.end(), c.member_frames.begin(), c.member_frames.end());
                check(c);
            }
            std::sort(merged.begin(), merged.end());
            if (merged != node.member_frames)
                throw FormatError("children of node " + node.node_id +
                                  " do not partition its members");
        }
    };
    for (const auto& r : tree.roots) {
        if (r.level != 1) throw FormatError("root " + r.node_id + " is not level 1");
        check(r);
    }
}

inline void to_json(nlohmann::json& j, const TreeNode& node) {
    j = nlohmann::json{{"children", node.children},
                       {"keyframe", node.keyframe},
                       {"level", node.level},
                       {"member_frames", node.member_frames},
                       {"node_id", node.node_id}};
    j["relevance"] =
        node.relevance ? nlohmann::json(static_cast<int>(*node.relevance)) : nlohmann::json();
}

inline void from_json(const nlohmann::json& j, TreeNode& node) {
    j.at("node_id").get_to(node.node_id);
    j.at("level").get_to(node.level);
    j.at("member_frames").get_to(node.member_frames);
    j.at("keyframe").get_to(node.keyframe);
    if (j.at("relevance").is_null()) {
        node.relevance.reset();
    } else {
        int v = j.at("relevance").get<int>();
        if (v < 1 || v > 3) throw FormatError("relevance out of range: " + std::to_string(v));
        node.relevance = static_cast<RelevanceLevel>(v);
    }
    node.children.clear();
    for (const auto& c : j.at("children")) node.children.push_back(c.get<TreeNode>());
}

inline void to_json(nlohmann::json& j, const VideoTree& tree) {
    j = nlohmann::json{{"config_snapshot", tree.config_snapshot},
                       {"k_final", tree.k_final},
                       {"roots", tree.roots},
                       {"video_id", tree.video_id}};
}

inline void from_json(const nlohmann::json& j, VideoTree& tree) {
    j.at("video_id").get_to(tree.video_id);
    j.at("k_final").get_to(tree.k_final);
    j.at("config_snapshot").get_to(tree.config_snapshot);
    tree.roots.clear();
    for (const auto& r : j.at("roots")) tree.roots.push_back(r.get<TreeNode>());
}

// structured: canonical JSON (sorted keys, "\n"-terminated).
// graph: DOT digraph, one node per TreeNode labeled "id|keyframe|relevance".
inline std::string export_tree(const VideoTree& tree, TreeExportFormat format) {
    if (format == TreeExportFormat::structured) {
        nlohmann::json j = tree;
        return j.dump() + "\n";
    }
    std::string out = "digraph videotree {\n";
    std::function<void(const TreeNode&)> decls = [&](const TreeNode& n) {
        out += "  \"" + n.node_id + "\" [label=\"" + n.node_id + "|" +
               std::to_string(n.keyframe) + "|" +
               (n.relevance ? relevance_name(*n.relevance) : "-") + "\"];\n";
        for (const auto& c : n.children) decls(c);
    };
    std::function<void(const TreeNode&)> edges = [&](const TreeNode& n) {
        for (const auto& c : n.children) {
            out += "  \"" + n.node_id + "\" -> \"" + c.node_id + "\";\n";
            edges(c);
        }
    };
    for (const auto& r : tree.roots) decls(r);
    for (const auto& r : tree.roots) edges(r);
    out += "}\n";
    return out;
}

inline VideoTree import_tree(const std::string& structured_bytes) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(structured_bytes);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad tree JSON: ") + e.what());
    }
    VideoTree tree;
    try {
        tree = j.get<VideoTree>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad tree structure: ") + e.what());
    }
    validate_tree(tree);
    return tree;
}

}  // namespace videotree
