#include "videotree/clustering.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "videotree/random.hpp"

using namespace videotree;

namespace {

std::vector<IndexedVector> points_1d(const std::vector<float>& xs) {
    std::vector<IndexedVector> pts;
    for (std::size_t i = 0; i < xs.size(); ++i)
        pts.push_back({static_cast<std::uint32_t>(i), {xs[i]}});
    return pts;
}

// Members of each cluster as sets of frame indices, ignoring cluster ids.
std::set<std::set<std::uint32_t>> partition_of(const std::vector<IndexedVector>& pts,
                                               const ClusterAssignment& a) {
    std::map<std::uint32_t, std::set<std::uint32_t>> groups;
    for (std::size_t i = 0; i < pts.size(); ++i) groups[a.labels[i]].insert(pts[i].frame_index);
    std::set<std::set<std::uint32_t>> out;
    for (auto& [id, members] : groups) out.insert(members);
    return out;
}

double recompute_inertia(const std::vector<IndexedVector>& pts, const ClusterAssignment& a) {
    double total = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto& c = a.centroids[a.labels[i]];
        for (std::size_t d = 0; d < c.size(); ++d) {
            double diff = static_cast<double>(pts[i].values[d]) - c[d];
            total += diff * diff;
        }
    }
    return total;
}

std::vector<IndexedVector> random_points(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<IndexedVector> pts;
    for (std::size_t i = 0; i < n; ++i) {
        IndexedVector p;
        p.frame_index = static_cast<std::uint32_t>(i);
        for (std::size_t c = 0; c < d; ++c)
            p.values.push_back(static_cast<float>(rng.next_double() * 10.0 - 5.0));
        pts.push_back(std::move(p));
    }
    return pts;
}

TEST(KMeans, TwoTightPairs) {
    std::vector<IndexedVector> pts{{0, {0.0f, 0.0f}},
                                   {1, {0.0f, 0.0f}},
                                   {2, {10.0f, 10.0f}},
                                   {3, {10.0f, 10.0f}}};
    auto a = kmeans(pts, 2, {.seed = 1});
    EXPECT_EQ(a.labels, (std::vector<std::uint32_t>{0, 0, 1, 1}));
    EXPECT_EQ(a.k_eff, 2u);
    EXPECT_DOUBLE_EQ(a.centroids[0][0], 0.0);
    EXPECT_DOUBLE_EQ(a.centroids[1][0], 10.0);
    EXPECT_DOUBLE_EQ(a.inertia, 0.0);
}

TEST(KMeans, KOneIsComponentwiseMean) {
    auto pts = random_points(9, 3, 3);
    auto a = kmeans(pts, 1, {.seed = 5});
    ASSERT_EQ(a.k_eff, 1u);
    for (std::size_t d = 0; d < 3; ++d) {
        double mean = 0.0;
        for (const auto& p : pts) mean += p.values[d];
        mean /= 9.0;
        EXPECT_NEAR(a.centroids[0][d], mean, 1e-12);
    }
}

TEST(KMeans, MatchesOracleOnSevenPoint1D) {
    auto pts = points_1d({0, 1, 2, 9, 10, 11, 20});
    auto oracle = brute_force_kmeans_oracle(pts, 3);
    auto a = kmeans(pts, 3, {.seed = 11, .restarts = 20});
    EXPECT_EQ(partition_of(pts, a), partition_of(pts, oracle));
    EXPECT_EQ(partition_of(pts, oracle),
              (std::set<std::set<std::uint32_t>>{{0, 1, 2}, {3, 4, 5}, {6}}));
    EXPECT_NEAR(a.inertia, oracle.inertia, 1e-9);
}

TEST(KMeans, InertiaMatchesLabels) {
    auto pts = random_points(30, 4, 17);
    auto a = kmeans(pts, 5, {.seed = 2});
    double expect = recompute_inertia(pts, a);
    EXPECT_NEAR(a.inertia, expect, 1e-6 * std::max(1.0, expect));
}

TEST(KMeans, DeterministicForSeed) {
    auto pts = random_points(25, 3, 8);
    auto a = kmeans(pts, 4, {.seed = 99, .restarts = 3});
    auto b = kmeans(pts, 4, {.seed = 99, .restarts = 3});
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_EQ(a.centroids, b.centroids);
    EXPECT_EQ(a.inertia, b.inertia);
}

TEST(KMeans, PermutationCanonicalization) {
    auto pts = random_points(12, 2, 21);
    auto a = kmeans(pts, 3, {.seed = 7});

    auto shuffled = pts;
    std::reverse(shuffled.begin(), shuffled.end());
    std::swap(shuffled[0], shuffled[5]);
    auto b = kmeans(shuffled, 3, {.seed = 7});

    std::map<std::uint32_t, std::uint32_t> label_a, label_b;
    for (std::size_t i = 0; i < pts.size(); ++i) label_a[pts[i].frame_index] = a.labels[i];
    for (std::size_t i = 0; i < shuffled.size(); ++i)
        label_b[shuffled[i].frame_index] = b.labels[i];
    EXPECT_EQ(label_a, label_b);
    EXPECT_EQ(a.centroids, b.centroids);
}

TEST(KMeans, LabelsAscendByEarliestMember) {
    auto pts = random_points(20, 2, 33);
    auto a = kmeans(pts, 4, {.seed = 12});
    std::map<std::uint32_t, std::uint32_t> first_frame;  // label -> earliest member
    for (std::size_t i = 0; i < pts.size(); ++i) {
        auto [it, fresh] = first_frame.emplace(a.labels[i], pts[i].frame_index);
        if (!fresh) it->second = std::min(it->second, pts[i].frame_index);
    }
    std::uint32_t prev = 0;
    for (std::uint32_t id = 0; id < a.k_eff; ++id) {
        ASSERT_TRUE(first_frame.count(id)) << "cluster " << id << " has no members";
        if (id > 0) {
            EXPECT_GT(first_frame[id], prev);
        }
        prev = first_frame[id];
    }
}

TEST(KMeans, ClampsToDistinctCount) {
    std::vector<IndexedVector> pts{{0, {1.0f}}, {1, {1.0f}}, {2, {5.0f}}};
    auto a = kmeans(pts, 3, {.seed = 1});
    EXPECT_EQ(a.k_eff, 2u);
    EXPECT_EQ(a.labels[0], a.labels[1]);
    EXPECT_NE(a.labels[0], a.labels[2]);
}

TEST(KMeans, NoEmptyClustersUnderHeavyDuplication) {
    // Mostly duplicated points stress the empty-cluster repair path.
    Rng meta(404);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<IndexedVector> pts;
        std::size_t distinct = 1 + meta.next_index(4);
        for (std::uint32_t i = 0; i < 12; ++i)
            pts.push_back({i, {static_cast<float>(meta.next_index(distinct)) * 3.0f}});
        std::set<float> values;
        for (const auto& p : pts) values.insert(p.values[0]);
        std::uint32_t k = 1 + static_cast<std::uint32_t>(meta.next_index(4));
        auto a = kmeans(pts, k, {.seed = 100 + static_cast<std::uint64_t>(trial)});
        EXPECT_EQ(a.k_eff, std::min<std::size_t>(k, values.size()));
        std::vector<std::size_t> counts(a.k_eff, 0);
        for (auto label : a.labels) {
            ASSERT_LT(label, a.k_eff);
            ++counts[label];
        }
        for (std::size_t c : counts) EXPECT_GE(c, 1u);
    }
}

TEST(KMeans, RejectsBadInput) {
    EXPECT_THROW(kmeans({}, 2, {}), InvalidK);
    EXPECT_THROW(kmeans(points_1d({1, 2}), 0, {}), InvalidK);
    std::vector<IndexedVector> mixed{{0, {1.0f}}, {1, {1.0f, 2.0f}}};
    EXPECT_THROW(kmeans(mixed, 1, {}), DimensionMismatch);
}

TEST(Oracle, MatchesKMeansForKOne) {
    auto pts = random_points(6, 2, 4);
    auto oracle = brute_force_kmeans_oracle(pts, 1);
    auto a = kmeans(pts, 1, {.seed = 3});
    EXPECT_NEAR(oracle.inertia, a.inertia, 1e-9);
    EXPECT_EQ(oracle.k_eff, 1u);
}

TEST(Oracle, ZeroInertiaOnTwoPairs) {
    std::vector<IndexedVector> pts{{0, {0.0f, 0.0f}},
                                   {1, {0.0f, 0.0f}},
                                   {2, {10.0f, 10.0f}},
                                   {3, {10.0f, 10.0f}}};
    auto oracle = brute_force_kmeans_oracle(pts, 2);
    EXPECT_DOUBLE_EQ(oracle.inertia, 0.0);
    EXPECT_EQ(oracle.labels, (std::vector<std::uint32_t>{0, 0, 1, 1}));
}

TEST(Oracle, EnforcesLimits) {
    EXPECT_THROW(brute_force_kmeans_oracle(random_points(11, 1, 1), 2), TooLarge);
    EXPECT_THROW(brute_force_kmeans_oracle(random_points(4, 1, 1), 5), TooLarge);
}

TEST(Oracle, BoundsKMeansOnRandomInstances) {
    // Smaller sibling of the acceptance criterion; 40 instances here.
    Rng meta(505);
    for (int trial = 0; trial < 40; ++trial) {
        std::size_t n = 2 + meta.next_index(7);   // 2..8
        std::size_t d = 1 + meta.next_index(3);   // 1..3
        std::uint32_t k = 1 + static_cast<std::uint32_t>(meta.next_index(3));  // 1..3
        auto pts = random_points(n, d, 1000 + trial);
        auto oracle = brute_force_kmeans_oracle(pts, k);
        auto a = kmeans(pts, k, {.seed = 2000 + static_cast<std::uint64_t>(trial), .restarts = 20});
        EXPECT_LE(a.inertia, oracle.inertia * (1.0 + 1e-6) + 1e-12)
            << "trial " << trial << " n=" << n << " d=" << d << " k=" << k;
    }
}

TEST(KeyframeOf, PicksNearestAndBreaksTiesLow) {
    std::vector<IndexedVector> members{{2, {1.0f, 0.0f}}, {5, {0.0f, 1.0f}}};
    std::vector<double> centroid{0.9, 0.1};
    EXPECT_EQ(keyframe_of(members, centroid), 2u);

    std::vector<IndexedVector> tied{{8, {-1.0f, 0.0f}}, {3, {1.0f, 0.0f}}};
    std::vector<double> origin{0.0, 0.0};
    EXPECT_EQ(keyframe_of(tied, origin), 3u);

    std::vector<IndexedVector> single{{4, {7.0f}}};
    std::vector<double> anywhere{123.0};
    EXPECT_EQ(keyframe_of(single, anywhere), 4u);
}

TEST(KeyframeOf, Errors) {
    EXPECT_THROW(keyframe_of({}, std::vector<double>{0.0}), EmptyCluster);
    std::vector<IndexedVector> members{{0, {1.0f}}};
    EXPECT_THROW(keyframe_of(members, std::vector<double>{0.0, 0.0}), DimensionMismatch);
}

TEST(Subcluster, SplitsTwoBlobs) {
    // 10 points in two tight 2-D blobs; the split must match the oracle.
    std::vector<IndexedVector> members;
    for (int i = 0; i < 5; ++i)
        members.push_back({static_cast<std::uint32_t>(i),
                           {static_cast<float>(0.1 * i), 0.0f}});
    for (int i = 5; i < 10; ++i)
        members.push_back({static_cast<std::uint32_t>(i),
                           {static_cast<float>(20.0 + 0.1 * i), 0.0f}});
    auto children = subcluster(members, 2, 1, {.seed = 4});
    ASSERT_EQ(children.size(), 2u);
    std::set<std::set<std::uint32_t>> got;
    for (const auto& c : children) {
        std::set<std::uint32_t> ids;
        for (const auto& m : c.members) ids.insert(m.frame_index);
        got.insert(ids);
    }
    auto oracle = brute_force_kmeans_oracle(members, 2);
    EXPECT_EQ(got, partition_of(members, oracle));
    for (const auto& c : children) EXPECT_TRUE(c.children.empty());
}

TEST(Subcluster, SingletonNoExpansion) {
    std::vector<IndexedVector> one{{9, {1.0f, 2.0f}}};
    EXPECT_TRUE(subcluster(one, 4, 1, {}).empty());
    EXPECT_TRUE(subcluster(one, 2, 2, {}).empty());
}

TEST(Subcluster, ClampsToSingletons) {
    std::vector<IndexedVector> three{{0, {0.0f}}, {1, {5.0f}}, {2, {9.0f}}};
    auto children = subcluster(three, 4, 1, {.seed = 6});
    ASSERT_EQ(children.size(), 3u);
    for (const auto& c : children) {
        EXPECT_EQ(c.members.size(), 1u);
        EXPECT_EQ(c.keyframe, c.members[0].frame_index);
    }
}

TEST(Subcluster, TwoLevelRecursion) {
    // Two separated groups, each with two separated sub-pairs.
    std::vector<IndexedVector> members;
    float bases[] = {0.0f, 100.0f};
    std::uint32_t idx = 0;
    for (float base : bases)
        for (float off : {0.0f, 10.0f})
            for (float jitter : {0.0f, 0.5f})
                members.push_back({idx++, {base + off + jitter}});
    auto children = subcluster(members, 2, 2, {.seed = 14});
    ASSERT_EQ(children.size(), 2u);
    for (const auto& c : children) {
        EXPECT_EQ(c.members.size(), 4u);
        ASSERT_EQ(c.children.size(), 2u);
        for (const auto& g : c.children) {
            EXPECT_EQ(g.members.size(), 2u);
            EXPECT_TRUE(g.children.empty());
        }
    }
}

TEST(Subcluster, ChildrenOrderedByEarliestMember) {
    auto pts = random_points(14, 2, 77);
    auto children = subcluster(pts, 3, 1, {.seed = 15});
    std::uint32_t prev = 0;
    for (std::size_t i = 0; i < children.size(); ++i) {
        std::uint32_t earliest = children[i].members.front().frame_index;
        if (i > 0) {
            EXPECT_GT(earliest, prev);
        }
        prev = earliest;
    }
}

TEST(Subcluster, RejectsBadArgs) {
    std::vector<IndexedVector> pts{{0, {1.0f}}, {1, {2.0f}}};
    EXPECT_THROW(subcluster({}, 2, 1, {}), EmptyCluster);
    EXPECT_THROW(subcluster(pts, 1, 1, {}), InvalidK);
    EXPECT_THROW(subcluster(pts, 2, 3, {}), InvalidDepth);
}

}  // namespace
