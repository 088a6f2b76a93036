#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "videotree/errors.hpp"
#include "videotree/random.hpp"

namespace videotree {

struct IndexedVector {
    std::uint32_t frame_index = 0;
    std::vector<float> values;
};

struct KMeansOptions {
    std::uint64_t seed = 0;
    std::uint32_t max_iterations = 100;
    double rel_tolerance = 1e-4;  // on centroid-shift norm relative to data scale
    std::uint32_t restarts = 1;
};

struct ClusterAssignment {
    std::uint32_t k = 0;      // requested
    std::uint32_t k_eff = 0;  // realized: min(k, number of distinct vectors)
    std::vector<std::uint32_t> labels;            // aligned with the input point order
    std::vector<std::vector<double>> centroids;   // k_eff rows of dimension d
    double inertia = 0.0;
    std::uint32_t iterations_run = 0;
};

namespace detail {

inline double sq_dist(std::span<const float> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double diff = static_cast<double>(a[i]) - b[i];
        s += diff * diff;
    }
    return s;
}

inline std::size_t count_distinct(const std::vector<IndexedVector>& pts) {
    std::set<std::string> keys;
    for (const auto& p : pts)
        keys.emplace(reinterpret_cast<const char*>(p.values.data()),
                     p.values.size() * sizeof(float));
    return keys.size();
}

// Canonical point order is ascending frame_index, so results are invariant
// to input permutation.
inline std::vector<std::size_t> canonical_order(const std::vector<IndexedVector>& pts) {
    std::vector<std::size_t> order(pts.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return pts[a].frame_index < pts[b].frame_index;
    });
    return order;
}

struct LloydResult {
    std::vector<std::uint32_t> labels;  // canonical order
    std::vector<std::vector<double>> centroids;
    double inertia = 0.0;
    std::uint32_t iterations = 0;
};

inline std::vector<std::vector<double>> kmeanspp_init(
    const std::vector<const IndexedVector*>& pts, std::uint32_t k, Rng& rng) {
    const std::size_t n = pts.size();
    std::vector<std::vector<double>> centers;
    centers.reserve(k);

    auto as_center = [&](const IndexedVector& p) {
        std::vector<double> c(p.values.begin(), p.values.end());
        return c;
    };

    centers.push_back(as_center(*pts[rng.next_index(n)]));
    std::vector<double> d2(n);
    while (centers.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centers) best = std::min(best, sq_dist(pts[i]->values, c));
            d2[i] = best;
            total += best;
        }
        std::size_t chosen = n;
        if (total > 0.0) {
            double r = rng.next_double() * total;
            double cum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                cum += d2[i];
                if (cum > r && d2[i] > 0.0) { chosen = i; break; }
            }
            if (chosen == n) {  // float roundoff on the last slot
                for (std::size_t i = n; i-- > 0;)
                    if (d2[i] > 0.0) { chosen = i; break; }
            }
        }
        if (chosen == n) break;  // no distinct point left; caller clamped k already
        centers.push_back(as_center(*pts[chosen]));
    }
    return centers;
}

inline LloydResult lloyd(const std::vector<const IndexedVector*>& pts, std::uint32_t k,
                         const KMeansOptions& opts, std::uint64_t seed, double scale) {
    const std::size_t n = pts.size();
    const std::size_t d = pts[0]->values.size();
    Rng rng(seed);

    LloydResult res;
    res.centroids = kmeanspp_init(pts, k, rng);
    res.labels.assign(n, 0);

    std::vector<std::size_t> counts(k);
    [[maybe_unused]] double prev_inertia = std::numeric_limits<double>::infinity();

    for (std::uint32_t iter = 0; iter < opts.max_iterations; ++iter) {
        // Assignment; ties go to the lowest centroid index.
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            std::uint32_t best_j = 0;
            for (std::uint32_t j = 0; j < k; ++j) {
                double dist = sq_dist(pts[i]->values, res.centroids[j]);
                if (dist < best) { best = dist; best_j = j; }
            }
            res.labels[i] = best_j;
            ++counts[best_j];
        }

        // Empty-cluster repair: reseed on the point farthest from its
        // assigned centroid, never draining a singleton cluster.
        std::vector<bool> moved(n, false);
        for (std::uint32_t j = 0; j < k; ++j) {
            if (counts[j] > 0) continue;
            double far_dist = -1.0;
            std::size_t far_i = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (moved[i] || counts[res.labels[i]] <= 1) continue;
                double dist = sq_dist(pts[i]->values, res.centroids[res.labels[i]]);
                if (dist > far_dist) { far_dist = dist; far_i = i; }
            }
            if (far_i == n) break;  // nothing movable; k exceeded what the data supports
            --counts[res.labels[far_i]];
            res.labels[far_i] = j;
            ++counts[j];
            moved[far_i] = true;
            res.centroids[j].assign(pts[far_i]->values.begin(), pts[far_i]->values.end());
        }

        // Centroid update.
        std::vector<std::vector<double>> next(k, std::vector<double>(d, 0.0));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < d; ++c)
                next[res.labels[i]][c] += static_cast<double>(pts[i]->values[c]);
        for (std::uint32_t j = 0; j < k; ++j) {
            if (counts[j] == 0) { next[j] = res.centroids[j]; continue; }
            for (std::size_t c = 0; c < d; ++c) next[j][c] /= static_cast<double>(counts[j]);
        }

        double shift_sq = 0.0;
        for (std::uint32_t j = 0; j < k; ++j)
            for (std::size_t c = 0; c < d; ++c) {
                double diff = next[j][c] - res.centroids[j][c];
                shift_sq += diff * diff;
            }
        res.centroids = std::move(next);
        res.iterations = iter + 1;

        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            inertia += sq_dist(pts[i]->values, res.centroids[res.labels[i]]);
        assert(inertia <= prev_inertia * (1.0 + 1e-9) + 1e-12 && "Lloyd inertia must not increase");
        prev_inertia = inertia;
        res.inertia = inertia;

        if (std::sqrt(shift_sq) <= opts.rel_tolerance * scale) break;
    }
    return res;
}

inline double data_scale(const std::vector<const IndexedVector*>& pts) {
    const std::size_t n = pts.size();
    const std::size_t d = pts[0]->values.size();
    std::vector<double> mean(d, 0.0);
    for (const auto* p : pts)
        for (std::size_t c = 0; c < d; ++c) mean[c] += static_cast<double>(p->values[c]);
    for (double& m : mean) m /= static_cast<double>(n);
    double var = 0.0;
    for (const auto* p : pts) var += sq_dist(p->values, mean);
    return std::sqrt(var / static_cast<double>(n));
}

}  // namespace detail

// Seeded k-means++ plus Lloyd iterations; of `restarts` independent runs the
// lowest-inertia assignment wins. Labels are renumbered so cluster ids ascend
// with each cluster's earliest member frame_index.
inline ClusterAssignment kmeans(const std::vector<IndexedVector>& points, std::uint32_t k,
                                const KMeansOptions& opts) {
    if (k < 1) throw InvalidK("k must be >= 1, got " + std::to_string(k));
    if (points.empty()) throw InvalidK("no points to cluster");
    const std::size_t d = points[0].values.size();
    for (const auto& p : points)
        if (p.values.size() != d)
            throw DimensionMismatch("point at frame " + std::to_string(p.frame_index) +
                                    " has dimension " + std::to_string(p.values.size()) +
                                    ", expected " + std::to_string(d));

    auto order = detail::canonical_order(points);
    std::vector<const IndexedVector*> pts(points.size());
    for (std::size_t i = 0; i < order.size(); ++i) pts[i] = &points[order[i]];

    const auto distinct = detail::count_distinct(points);
    const std::uint32_t k_eff =
        static_cast<std::uint32_t>(std::min<std::size_t>(k, distinct));
    const double scale = detail::data_scale(pts);

    detail::LloydResult best;
    bool have_best = false;
    for (std::uint32_t r = 0; r < std::max<std::uint32_t>(opts.restarts, 1); ++r) {
        auto run = detail::lloyd(pts, k_eff, opts, derive_seed(opts.seed, std::uint64_t{r}),
                                 scale > 0.0 ? scale : 1.0);
        if (!have_best || run.inertia < best.inertia) {
            best = std::move(run);
            have_best = true;
        }
    }

    // Renumber by earliest member frame_index (canonical order position).
    std::vector<std::size_t> first_pos(k_eff, pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i)
        first_pos[best.labels[i]] = std::min(first_pos[best.labels[i]], i);
    std::vector<std::uint32_t> by_first(k_eff);
    std::iota(by_first.begin(), by_first.end(), 0u);
    std::sort(by_first.begin(), by_first.end(),
              [&](std::uint32_t a, std::uint32_t b) { return first_pos[a] < first_pos[b]; });
    std::vector<std::uint32_t> remap(k_eff);
    for (std::uint32_t new_id = 0; new_id < k_eff; ++new_id) remap[by_first[new_id]] = new_id;

    ClusterAssignment out;
    out.k = k;
    out.k_eff = k_eff;
    out.iterations_run = best.iterations;
    out.inertia = best.inertia;
    out.centroids.resize(k_eff);
    for (std::uint32_t j = 0; j < k_eff; ++j) out.centroids[remap[j]] = std::move(best.centroids[j]);
    out.labels.assign(points.size(), 0);
    for (std::size_t i = 0; i < pts.size(); ++i) out.labels[order[i]] = remap[best.labels[i]];
    return out;
}

// Exhaustive minimum-inertia partition search. Test oracle: kept free of the
// kmeans code path above on purpose.
inline ClusterAssignment brute_force_kmeans_oracle(const std::vector<IndexedVector>& points,
                                                   std::uint32_t k) {
    if (k < 1) throw InvalidK("k must be >= 1, got " + std::to_string(k));
    if (points.empty()) throw InvalidK("no points to cluster");
    if (points.size() > 10 || k > 4)
        throw TooLarge("oracle limits: n <= 10, k <= 4 (got n=" + std::to_string(points.size()) +
                       ", k=" + std::to_string(k) + ")");
    const std::size_t d = points[0].values.size();
    for (const auto& p : points)
        if (p.values.size() != d) throw DimensionMismatch("inconsistent point dimensions");

    auto order = detail::canonical_order(points);
    std::vector<const IndexedVector*> pts(points.size());
    for (std::size_t i = 0; i < order.size(); ++i) pts[i] = &points[order[i]];
    const std::size_t n = pts.size();

    auto partition_inertia = [&](const std::vector<std::uint32_t>& rgs, std::uint32_t groups,
                                 std::vector<std::vector<double>>* means_out) {
        std::vector<std::vector<double>> means(groups, std::vector<double>(d, 0.0));
        std::vector<std::size_t> counts(groups, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[rgs[i]];
            for (std::size_t c = 0; c < d; ++c)
                means[rgs[i]][c] += static_cast<double>(pts[i]->values[c]);
        }
        for (std::uint32_t g = 0; g < groups; ++g)
            for (std::size_t c = 0; c < d; ++c) means[g][c] /= static_cast<double>(counts[g]);
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < d; ++c) {
                double diff = static_cast<double>(pts[i]->values[c]) - means[rgs[i]][c];
                inertia += diff * diff;
            }
        }
        if (means_out) *means_out = std::move(means);
        return inertia;
    };

    // Restricted growth strings enumerate set partitions into <= k groups;
    // the first strictly better partition wins, so ties are deterministic.
    std::vector<std::uint32_t> rgs(n, 0);
    std::vector<std::uint32_t> best_rgs;
    std::uint32_t best_groups = 0;
    double best_inertia = std::numeric_limits<double>::infinity();

    auto evaluate = [&]() {
        std::uint32_t groups = *std::max_element(rgs.begin(), rgs.end()) + 1;
        double inertia = partition_inertia(rgs, groups, nullptr);
        if (inertia < best_inertia) {
            best_inertia = inertia;
            best_rgs = rgs;
            best_groups = groups;
        }
    };

    std::function<void(std::size_t, std::uint32_t)> recurse =
        [&](std::size_t i, std::uint32_t max_used) {
            if (i == n) { evaluate(); return; }
            std::uint32_t limit = std::min<std::uint32_t>(max_used + 1, k - 1);
            for (std::uint32_t g = 0; g <= limit; ++g) {
                rgs[i] = g;
                recurse(i + 1, std::max(max_used, g));
            }
        };
    rgs[0] = 0;
    recurse(1, 0);

    ClusterAssignment out;
    out.k = k;
    out.k_eff = best_groups;
    out.iterations_run = 0;
    out.inertia = partition_inertia(best_rgs, best_groups, &out.centroids);
    // RGS group ids already follow first appearance, i.e. earliest member.
    out.labels.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) out.labels[order[i]] = best_rgs[i];
    return out;
}

// The member frame nearest the centroid; ties break to the lowest frame_index.
inline std::uint32_t keyframe_of(const std::vector<IndexedVector>& cluster_members,
                                 std::span<const double> centroid) {
    if (cluster_members.empty()) throw EmptyCluster("keyframe_of on empty cluster");
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t best_frame = 0;
    bool found = false;
    for (const auto& m : cluster_members) {
        if (m.values.size() != centroid.size())
            throw DimensionMismatch("member dimension does not match centroid");
        double dist = detail::sq_dist(m.values, centroid);
        if (!found || dist < best || (dist == best && m.frame_index < best_frame)) {
            best = dist;
            best_frame = m.frame_index;
            found = true;
        }
    }
    return best_frame;
}

struct SubtreeSpec {
    std::vector<IndexedVector> members;  // sorted by frame_index
    std::uint32_t keyframe = 0;
    std::vector<SubtreeSpec> children;   // filled for levels == 2
};

// Divisive re-clustering used by depth expansion. levels=1 is one kmeans(w)
// split; levels=2 splits each child with more than one distinct vector again.
// A cluster without at least two distinct vectors cannot expand.
inline std::vector<SubtreeSpec> subcluster(const std::vector<IndexedVector>& cluster_members,
                                           std::uint32_t w, int levels,
                                           const KMeansOptions& opts) {
    if (cluster_members.empty()) throw EmptyCluster("subcluster on empty cluster");
    if (w < 2) throw InvalidK("branch width must be >= 2, got " + std::to_string(w));
    if (levels != 1 && levels != 2)
        throw InvalidDepth("levels must be 1 or 2, got " + std::to_string(levels));
    if (detail::count_distinct(cluster_members) < 2) return {};

    auto assignment = kmeans(cluster_members, w, opts);
    std::vector<SubtreeSpec> children(assignment.k_eff);
    for (std::size_t i = 0; i < cluster_members.size(); ++i)
        children[assignment.labels[i]].members.push_back(cluster_members[i]);
    for (std::uint32_t j = 0; j < assignment.k_eff; ++j) {
        auto& child = children[j];
        std::sort(child.members.begin(), child.members.end(),
                  [](const IndexedVector& a, const IndexedVector& b) {
                      return a.frame_index < b.frame_index;
                  });
        child.keyframe = keyframe_of(child.members, assignment.centroids[j]);
        if (levels == 2) {
            KMeansOptions child_opts = opts;
            child_opts.seed = derive_seed(opts.seed, std::uint64_t{j} + 1);
            child.children = subcluster(child.members, w, 1, child_opts);
        }
    }
    return children;
}

}  // namespace videotree
