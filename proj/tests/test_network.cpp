#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <vector>

#include "cwbsim/network.hpp"
#include "cwbsim/random.hpp"

using namespace cwbsim;

namespace {

SocialGraph from_edges(std::size_t n, std::initializer_list<Edge> edges) {
    SocialGraph g(n);
    for (auto [a, b] : edges)
        g.add_edge(a, b);
    return g;
}

SocialGraph random_graph(std::size_t n, double p, Rng& rng) {
    SocialGraph g(n);
    for (UserId a = 0; a < n; ++a)
        for (UserId b = a + 1; b < n; ++b)
            if (bernoulli(rng, p))
                g.add_edge(a, b);
    return g;
}

// Floyd-Warshall distances, -1 for unreachable.
std::vector<std::vector<int>> all_pairs(const SocialGraph& g) {
    const std::size_t n = g.size();
    const int inf = 1 << 20;
    std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
    for (std::size_t i = 0; i < n; ++i) {
        d[i][i] = 0;
        for (UserId j : g.neighbors(static_cast<UserId>(i)))
            d[i][j] = 1;
    }
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
    for (auto& row : d)
        for (auto& x : row)
            if (x >= inf)
                x = -1;
    return d;
}

std::optional<double> closeness_oracle(const SocialGraph& g, UserId v) {
    const auto d = all_pairs(g)[v];
    long sum = 0;
    long k = 0;
    for (int x : d)
        if (x > 0) {
            sum += x;
            ++k;
        }
    if (k == 0)
        return std::nullopt;
    return static_cast<double>(k) / static_cast<double>(sum);
}

std::vector<double> uniform_opinions(std::size_t n, Rng& rng) {
    std::vector<double> o(n);
    for (auto& x : o)
        x = uniform(rng, -1.0, 1.0);
    return o;
}

} // namespace

TEST(SocialGraph, RejectsSelfLoopsAndDuplicates) {
    SocialGraph g(3);
    EXPECT_TRUE(g.add_edge(0, 1));
    EXPECT_FALSE(g.add_edge(1, 0));
    EXPECT_THROW(g.add_edge(2, 2), InvalidInput);
    EXPECT_THROW(g.add_edge(0, 7), NotFound);
    EXPECT_EQ(g.edge_count(), 1u);
}

TEST(SocialGraph, SymmetricAndHandshake) {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        auto g = random_graph(30, 0.2, rng);
        std::size_t deg = 0;
        for (UserId a = 0; a < g.size(); ++a) {
            deg += g.degree(a);
            for (UserId b : g.neighbors(a)) {
                EXPECT_NE(a, b);
                EXPECT_TRUE(g.has_edge(b, a));
            }
            auto nb = g.neighbors(a);
            EXPECT_TRUE(std::adjacent_find(nb.begin(), nb.end()) == nb.end());
        }
        EXPECT_EQ(deg, 2 * g.edge_count());
    }
}

TEST(GenerateHomophilyPa, SeedCliqueOnly) {
    Rng rng(1);
    std::vector<double> o{0.1, -0.2, 0.5, 0.9};
    auto g = generate_homophily_pa(4, 3, o, 0.3, rng);
    EXPECT_EQ(g.edge_count(), 6u);
    for (UserId a = 0; a < 4; ++a)
        EXPECT_EQ(g.degree(a), 3u);
}

TEST(GenerateHomophilyPa, HundredNodesThreeEdges) {
    Rng rng(2);
    auto o = uniform_opinions(100, rng);
    auto g = generate_homophily_pa(100, 3, o, 0.3, rng);
    EXPECT_EQ(g.edge_count(), 6u + 3u * 96u);
}

TEST(GenerateHomophilyPa, EdgeCountClosedFormRandomSizes) {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t m = 1 + uniform_index(rng, 8);
        const std::size_t n = m + 2 + uniform_index(rng, 60);
        auto o = uniform_opinions(n, rng);
        auto g = generate_homophily_pa(n, m, o, 0.05 + uniform01(rng), rng);
        EXPECT_EQ(g.edge_count(), m * (m + 1) / 2 + m * (n - m - 1)) << "n=" << n << " m=" << m;
        // every arrival has exactly m links to earlier nodes
        for (UserId i = static_cast<UserId>(m + 1); i < n; ++i) {
            std::size_t earlier = 0;
            for (UserId j : g.neighbors(i))
                earlier += j < i ? 1 : 0;
            EXPECT_EQ(earlier, m);
        }
    }
}

TEST(GenerateHomophilyPa, Errors) {
    Rng rng(4);
    std::vector<double> o(3, 0.0);
    EXPECT_THROW(generate_homophily_pa(3, 3, o, 0.3, rng), InvalidConfig);
    std::vector<double> bad{0.0, 0.0, std::nan(""), 0.0};
    EXPECT_THROW(generate_homophily_pa(4, 1, bad, 0.3, rng), InvalidInput);
    std::vector<double> ok(4, 0.0);
    EXPECT_THROW(generate_homophily_pa(4, 1, ok, 0.0, rng), InvalidConfig);
    EXPECT_THROW(generate_homophily_pa(4, 0, ok, 0.3, rng), InvalidConfig);
}

TEST(GenerateHomophilyPa, TinyBandwidthStillSimple) {
    // Weights underflow to zero; the generator must still pick distinct nodes.
    Rng rng(5);
    std::vector<double> o{-1.0, -1.0, 1.0, 1.0, -1.0, 1.0};
    auto g = generate_homophily_pa(6, 2, o, 1e-6, rng);
    EXPECT_EQ(g.edge_count(), pa_edge_count(6, 2));
}

TEST(GenerateHomophilyPa, TwoClustersPreferOwnSide) {
    std::size_t cross = 0;
    std::size_t same = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        Rng rng(derive_seed(77, {seed}));
        std::vector<double> o(20);
        for (std::size_t i = 0; i < 20; ++i)
            o[i] = (i % 2 == 0) ? -0.9 : 0.9;
        auto g = generate_homophily_pa(20, 1, o, 0.1, rng);
        for (auto [a, b] : g.edges())
            (o[a] == o[b] ? same : cross) += 1;
    }
    EXPECT_LT(cross, same);
}

TEST(GenerateHomophilyPa, AttachmentFollowsKernel) {
    // Node 2 arrives with opinion 0 and picks one of {0, 1}. The first
    // candidate sits at distance d, the second at 0.
    const double h = 0.3;
    const int trials = 4000;
    double previous = 1.0;
    for (double d : {0.0, 0.2, 0.5, 1.0}) {
        int hits = 0;
        for (int t = 0; t < trials; ++t) {
            Rng rng(derive_seed(9, {static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(d * 100)}));
            std::vector<double> o{d, 0.0, 0.0};
            auto g = generate_homophily_pa(3, 1, o, h, rng);
            // seed clique is 0-1; node 2 adds one more edge
            hits += g.has_edge(2, 0) ? 1 : 0;
        }
        const double p = static_cast<double>(hits) / trials;
        const double expect = std::exp(-d / h) / (std::exp(-d / h) + 1.0);
        const double se = std::sqrt(expect * (1 - expect) / trials);
        EXPECT_NEAR(p, expect, 4 * se + 1e-3) << "d=" << d;
        EXPECT_LE(p, previous + 4 * se);
        previous = p;
    }
}

TEST(CommonNeighbors, Examples) {
    auto tri = from_edges(3, {{0, 1}, {1, 2}, {0, 2}});
    EXPECT_EQ(common_neighbors(tri, 0, 1), 1u);
    auto path = from_edges(3, {{0, 1}, {1, 2}});
    EXPECT_EQ(common_neighbors(path, 0, 2), 1u);
    EXPECT_EQ(common_neighbors(path, 0, 1), 0u);
    SocialGraph empty(2);
    EXPECT_EQ(common_neighbors(empty, 0, 1), 0u);
    EXPECT_THROW(common_neighbors(empty, 0, 5), NotFound);
}

TEST(CommonNeighbors, MatchesDoubleLoop) {
    Rng rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        auto g = random_graph(25, 0.25, rng);
        for (UserId a = 0; a < g.size(); ++a)
            for (UserId b = a + 1; b < g.size(); ++b) {
                std::size_t naive = 0;
                for (UserId x : g.neighbors(a))
                    for (UserId y : g.neighbors(b))
                        naive += x == y ? 1 : 0;
                EXPECT_EQ(common_neighbors(g, a, b), naive);
            }
    }
}

TEST(Closeness, Examples) {
    auto path = from_edges(3, {{0, 1}, {1, 2}});
    EXPECT_DOUBLE_EQ(closeness(path, 1), 1.0);
    EXPECT_DOUBLE_EQ(closeness(path, 0), 2.0 / 3.0);
    auto k5 = from_edges(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {1, 2}, {1, 3}, {1, 4}, {2, 3}, {2, 4}, {3, 4}});
    for (UserId v = 0; v < 5; ++v)
        EXPECT_DOUBLE_EQ(closeness(k5, v), 1.0);
}

TEST(Closeness, IsolatedNodeIsMissing) {
    auto g = from_edges(3, {{0, 1}});
    EXPECT_THROW(closeness(g, 2), UndefinedMeasure);
    EXPECT_FALSE(try_closeness(g, 2).has_value());
    // component-restricted: node 0 sees only node 1
    EXPECT_DOUBLE_EQ(closeness(g, 0), 1.0);
}

TEST(Closeness, MatchesAllPairsOracle) {
    Rng rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + uniform_index(rng, 49);
        auto g = random_graph(n, uniform(rng, 0.02, 0.4), rng);
        for (UserId v = 0; v < n; ++v)
            EXPECT_EQ(try_closeness(g, v), closeness_oracle(g, v));
    }
}

TEST(DegreeGini, Examples) {
    auto star = from_edges(4, {{0, 1}, {0, 2}, {0, 3}});
    EXPECT_EQ(degree_gini(star), 0.25);
    auto pair = from_edges(2, {{0, 1}});
    EXPECT_EQ(degree_gini(pair), 0.0);
    auto cycle = from_edges(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 0}});
    EXPECT_EQ(degree_gini(cycle), 0.0);
    EXPECT_THROW(degree_gini(SocialGraph(3)), UndefinedMeasure);
}

TEST(DegreeGini, MatchesPairwiseFormulaAndIsomorphismInvariant) {
    Rng rng(31);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 3 + uniform_index(rng, 30);
        auto g = random_graph(n, 0.3, rng);
        if (g.edge_count() == 0)
            continue;
        double num = 0.0;
        double sum = 0.0;
        for (UserId i = 0; i < n; ++i) {
            sum += static_cast<double>(g.degree(i));
            for (UserId j = 0; j < n; ++j)
                num += std::abs(static_cast<double>(g.degree(i)) - static_cast<double>(g.degree(j)));
        }
        const double mean = sum / static_cast<double>(n);
        EXPECT_NEAR(degree_gini(g), num / (2.0 * n * n * mean), 1e-12);

        std::vector<UserId> perm(n);
        std::iota(perm.begin(), perm.end(), 0u);
        for (std::size_t k = n - 1; k > 0; --k)
            std::swap(perm[k], perm[uniform_index(rng, k + 1)]);
        SocialGraph h(n);
        for (auto [a, b] : g.edges())
            h.add_edge(perm[a], perm[b]);
        EXPECT_DOUBLE_EQ(degree_gini(h), degree_gini(g));
    }
}

TEST(Homophily, Examples) {
    auto tri = from_edges(3, {{0, 1}, {1, 2}, {0, 2}});
    std::vector<double> same{0.4, 0.4, 0.4};
    EXPECT_EQ(homophily_index(tri, same), 1.0);
    auto one = from_edges(2, {{0, 1}});
    std::vector<double> ends{-1.0, 1.0};
    EXPECT_EQ(homophily_index(one, ends), 0.0);
    auto two = from_edges(3, {{0, 1}, {0, 2}});
    std::vector<double> o{0.0, 0.5, -0.5};
    EXPECT_DOUBLE_EQ(homophily_index(two, o), 0.75);
    EXPECT_THROW(homophily_index(SocialGraph(2), ends), UndefinedMeasure);
}

TEST(Homophily, RelabelingInvariant) {
    Rng rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 10 + uniform_index(rng, 20);
        auto g = random_graph(n, 0.3, rng);
        if (g.edge_count() == 0)
            continue;
        auto o = uniform_opinions(n, rng);
        std::vector<UserId> perm(n);
        std::iota(perm.begin(), perm.end(), 0u);
        for (std::size_t k = n - 1; k > 0; --k)
            std::swap(perm[k], perm[uniform_index(rng, k + 1)]);
        SocialGraph h(n);
        std::vector<double> po(n);
        for (auto [a, b] : g.edges())
            h.add_edge(perm[a], perm[b]);
        for (std::size_t i = 0; i < n; ++i)
            po[perm[i]] = o[i];
        EXPECT_NEAR(homophily_index(h, po), homophily_index(g, o), 1e-12);
    }
}

TEST(CentralityWeightedThreat, Examples) {
    auto star = from_edges(4, {{0, 1}, {0, 2}, {0, 3}});
    std::vector<double> uniform_t(4, 0.3);
    EXPECT_NEAR(centrality_weighted_threat(star, uniform_t), 0.3, 1e-15);
    std::vector<double> centre{1.0, 0.0, 0.0, 0.0};
    EXPECT_NEAR(centrality_weighted_threat(star, centre), 1.0 / (1.0 + 3.0 * 0.6), 1e-12);
    std::vector<double> zero(4, 0.0);
    EXPECT_EQ(centrality_weighted_threat(star, zero), 0.0);
    EXPECT_THROW(centrality_weighted_threat(SocialGraph(4), zero), UndefinedMeasure);
}

TEST(CentralityWeightedThreat, SkipsIsolatedUsers) {
    auto g = from_edges(3, {{0, 1}});
    std::vector<double> t{0.2, 0.4, 1.0};
    EXPECT_NEAR(centrality_weighted_threat(g, t), 0.3, 1e-15);
}

TEST(EdgeList, RoundTrip) {
    Rng rng(51);
    auto g = random_graph(15, 0.3, rng);
    std::stringstream ss;
    write_edgelist(ss, g);
    auto back = read_edgelist(ss, g.size());
    EXPECT_TRUE(back == g);
}

TEST(EdgeList, Malformed) {
    std::stringstream ss("0 1\n2 x\n");
    EXPECT_THROW(read_edgelist(ss), InvalidInput);
}

TEST(NodeAttributes, HeaderAndRows) {
    std::vector<double> o{0.5, -0.25};
    std::vector<double> r{0.1, 1.0};
    std::stringstream ss;
    write_node_attributes(ss, o, r);
    EXPECT_EQ(ss.str(), "id,opinion,resilience\n0,0.5,0.10000000000000001\n1,-0.25,1\n");
}

TEST(Ball, RadiusTwo) {
    auto path = from_edges(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
    EXPECT_EQ(ball(path, 2, 1), (std::vector<UserId>{1, 3}));
    EXPECT_EQ(ball(path, 0, 2), (std::vector<UserId>{1, 2}));
    EXPECT_TRUE(ball(path, 0, 0).empty());
}
