#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cwbsim/errors.hpp"
#include "cwbsim/random.hpp"

namespace cwbsim {

using UserId = std::uint32_t;
using Edge = std::pair<UserId, UserId>;

/// Undirected follow graph. Neighbor lists are kept sorted, so every query
/// result is independent of the order in which edges were inserted.
class SocialGraph {
public:
    SocialGraph() = default;
    explicit SocialGraph(std::size_t n) : adj_(n) {}

    std::size_t size() const noexcept { return adj_.size(); }
    std::size_t edge_count() const noexcept { return edges_; }
    bool contains(UserId v) const noexcept { return v < adj_.size(); }

    /// Adds a-b. Returns false when the edge already exists.
    bool add_edge(UserId a, UserId b) {
        require(a);
        require(b);
        if (a == b)
            throw InvalidInput("self-loop on user " + std::to_string(a));
        auto& na = adj_[a];
        auto it = std::lower_bound(na.begin(), na.end(), b);
        if (it != na.end() && *it == b)
            return false;
        na.insert(it, b);
        auto& nb = adj_[b];
        nb.insert(std::lower_bound(nb.begin(), nb.end(), a), a);
        ++edges_;
        return true;
    }

    bool has_edge(UserId a, UserId b) const {
        require(a);
        require(b);
        const auto& na = adj_[a];
        return std::binary_search(na.begin(), na.end(), b);
    }

    std::span<const UserId> neighbors(UserId v) const {
        require(v);
        return adj_[v];
    }

    std::size_t degree(UserId v) const { return neighbors(v).size(); }

    /// All edges as (low, high) pairs in lexicographic order.
    std::vector<Edge> edges() const {
        std::vector<Edge> out;
        out.reserve(edges_);
        for (UserId a = 0; a < adj_.size(); ++a)
            for (UserId b : adj_[a])
                if (a < b)
                    out.emplace_back(a, b);
        return out;
    }

    void require(UserId v) const {
        if (v >= adj_.size())
            throw NotFound("unknown user id " + std::to_string(v));
    }

    bool operator==(const SocialGraph&) const = default;

private:
    std::vector<std::vector<UserId>> adj_;
    std::size_t edges_ = 0;
};

inline std::size_t pa_edge_count(std::size_t n, std::size_t m) {
    return m * (m + 1) / 2 + m * (n - m - 1);
}

/// Preferential attachment where the attachment weight of an existing node
/// is exp(-|o_new - o_old| / h) rather than its degree. The first m+1 nodes
/// form a clique; every later node links to m distinct earlier nodes sampled
/// without replacement.
template <class URBG>
SocialGraph generate_homophily_pa(std::size_t n, std::size_t m, std::span<const double> opinions,
                                  double h, URBG& rng) {
    if (m < 1)
        throw InvalidConfig("graph.m must be >= 1");
    if (n <= m)
        throw InvalidConfig("graph.n must exceed graph.m (n=" + std::to_string(n) +
                            ", m=" + std::to_string(m) + ")");
    if (!(h > 0.0) || !std::isfinite(h))
        throw InvalidConfig("graph.h must be positive and finite");
    if (opinions.size() != n)
        throw InvalidInput("opinion vector size does not match node count");
    for (double o : opinions)
        if (!std::isfinite(o) || o < -1.0 || o > 1.0)
            throw InvalidInput("opinion must be finite and in [-1, 1]");

    SocialGraph g(n);
    for (UserId a = 0; a <= m; ++a)
        for (UserId b = a + 1; b <= m; ++b)
            g.add_edge(a, b);

    std::vector<double> weight;
    std::vector<bool> taken;
    for (std::size_t i = m + 1; i < n; ++i) {
        weight.resize(i);
        taken.assign(i, false);
        double total = 0.0;
        for (std::size_t j = 0; j < i; ++j) {
            weight[j] = std::exp(-std::abs(opinions[i] - opinions[j]) / h);
            total += weight[j];
        }
        for (std::size_t k = 0; k < m; ++k) {
            std::size_t pick = i;
            if (total > 0.0) {
                double r = uniform01(rng) * total;
                for (std::size_t j = 0; j < i; ++j) {
                    if (taken[j] || weight[j] <= 0.0)
                        continue;
                    pick = j;
                    r -= weight[j];
                    if (r < 0.0)
                        break;
                }
            }
            if (pick == i) {
                // every remaining weight underflowed: fall back to uniform
                std::size_t r = uniform_index(rng, i - k);
                for (std::size_t j = 0; j < i; ++j)
                    if (!taken[j] && r-- == 0) {
                        pick = j;
                        break;
                    }
            }
            taken[pick] = true;
            g.add_edge(static_cast<UserId>(i), static_cast<UserId>(pick));
            total -= weight[pick];
            weight[pick] = 0.0;
        }
    }
    return g;
}

inline std::size_t common_neighbors(const SocialGraph& g, UserId a, UserId b) {
    auto na = g.neighbors(a);
    auto nb = g.neighbors(b);
    if (a == b)
        throw InvalidInput("common_neighbors needs two distinct users");
    std::size_t count = 0;
    auto i = na.begin();
    auto j = nb.begin();
    while (i != na.end() && j != nb.end()) {
        if (*i < *j)
            ++i;
        else if (*j < *i)
            ++j;
        else {
            ++count;
            ++i;
            ++j;
        }
    }
    return count;
}

/// BFS hop distances from `source`; unreachable nodes get -1.
inline std::vector<int> bfs_distances(const SocialGraph& g, UserId source) {
    g.require(source);
    std::vector<int> dist(g.size(), -1);
    std::queue<UserId> frontier;
    dist[source] = 0;
    frontier.push(source);
    while (!frontier.empty()) {
        UserId v = frontier.front();
        frontier.pop();
        for (UserId w : g.neighbors(v)) {
            if (dist[w] < 0) {
                dist[w] = dist[v] + 1;
                frontier.push(w);
            }
        }
    }
    return dist;
}

/// Nodes within `radius` hops of v, excluding v itself, sorted.
inline std::vector<UserId> ball(const SocialGraph& g, UserId v, int radius) {
    g.require(v);
    std::vector<UserId> out;
    if (radius <= 0)
        return out;
    std::vector<int> dist(g.size(), -1);
    std::vector<UserId> frontier{v};
    dist[v] = 0;
    for (int r = 1; r <= radius && !frontier.empty(); ++r) {
        std::vector<UserId> next;
        for (UserId u : frontier)
            for (UserId w : g.neighbors(u))
                if (dist[w] < 0) {
                    dist[w] = r;
                    next.push_back(w);
                    out.push_back(w);
                }
        frontier = std::move(next);
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Closeness within v's connected component: (k-1) / sum of distances.
/// nullopt when v is isolated.
inline std::optional<double> try_closeness(const SocialGraph& g, UserId v) {
    const auto dist = bfs_distances(g, v);
    std::size_t reached = 0;
    long long total = 0;
    for (int d : dist)
        if (d > 0) {
            ++reached;
            total += d;
        }
    if (reached == 0)
        return std::nullopt;
    return static_cast<double>(reached) / static_cast<double>(total);
}

inline double closeness(const SocialGraph& g, UserId v) {
    auto c = try_closeness(g, v);
    if (!c)
        throw UndefinedMeasure("closeness undefined for isolated user " + std::to_string(v));
    return *c;
}

inline std::vector<std::optional<double>> closeness_all(const SocialGraph& g) {
    std::vector<std::optional<double>> out(g.size());
    for (UserId v = 0; v < g.size(); ++v)
        out[v] = try_closeness(g, v);
    return out;
}

/// Gini coefficient of the degree sequence.
inline double degree_gini(const SocialGraph& g) {
    std::vector<double> d(g.size());
    double total = 0.0;
    for (UserId v = 0; v < g.size(); ++v) {
        d[v] = static_cast<double>(g.degree(v));
        total += d[v];
    }
    if (total <= 0.0)
        throw UndefinedMeasure("degree Gini undefined for a graph without edges");
    std::sort(d.begin(), d.end());
    // sum_{i,j} |d_i - d_j| = 2 * sum_i (2i - n + 1) d_(i) over the sorted sequence.
    const auto n = static_cast<double>(d.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i)
        acc += (2.0 * static_cast<double>(i) - n + 1.0) * d[i];
    const double mean = total / n;
    return (2.0 * acc) / (2.0 * n * n * mean);
}

/// 1 - mean over edges of |o_a - o_b| / 2.
inline double homophily_index(const SocialGraph& g, std::span<const double> opinions) {
    if (opinions.size() != g.size())
        throw InvalidInput("opinion vector size does not match node count");
    for (double o : opinions)
        if (!std::isfinite(o) || o < -1.0 || o > 1.0)
            throw InvalidInput("opinion must be finite and in [-1, 1]");
    if (g.edge_count() == 0)
        throw UndefinedMeasure("homophily index undefined for a graph without edges");
    double acc = 0.0;
    for (auto [a, b] : g.edges())
        acc += std::abs(opinions[a] - opinions[b]) / 2.0;
    return 1.0 - acc / static_cast<double>(g.edge_count());
}

/// Closeness-weighted mean of per-user threat scores. Isolated users
/// (undefined closeness) are skipped.
inline double centrality_weighted_threat(const SocialGraph& g, std::span<const double> threat) {
    if (threat.size() != g.size())
        throw InvalidInput("threat vector size does not match node count");
    double num = 0.0;
    double den = 0.0;
    for (UserId v = 0; v < g.size(); ++v) {
        if (!std::isfinite(threat[v]))
            throw InvalidInput("threat score must be finite");
        if (auto c = try_closeness(g, v)) {
            num += *c * threat[v];
            den += *c;
        }
    }
    if (den <= 0.0)
        throw UndefinedMeasure("no user has a defined closeness");
    return num / den;
}

/// One `a b` line per edge, 0-based ids.
inline void write_edgelist(std::ostream& os, const SocialGraph& g) {
    for (auto [a, b] : g.edges())
        os << a << ' ' << b << '\n';
}

inline void write_edgelist(const std::string& path, const SocialGraph& g) {
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw IoError("cannot open " + path + " for writing");
    write_edgelist(os, g);
    if (!os)
        throw IoError("write failed: " + path);
}

/// Node attribute sidecar: `id,opinion,resilience` with a header row.
inline void write_node_attributes(std::ostream& os, std::span<const double> opinions,
                                  std::span<const double> resilience) {
    if (opinions.size() != resilience.size())
        throw InvalidInput("opinion and resilience vectors differ in length");
    os << "id,opinion,resilience\n";
    char buf[96];
    for (std::size_t i = 0; i < opinions.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", i, opinions[i], resilience[i]);
        os << buf;
    }
}

/// Reads an edge list. Node count is max id + 1 unless `n` is larger.
inline SocialGraph read_edgelist(std::istream& is, std::size_t n = 0) {
    std::vector<Edge> edges;
    long long a = 0;
    long long b = 0;
    while (is >> a >> b) {
        if (a < 0 || b < 0)
            throw InvalidInput("negative node id in edge list");
        edges.emplace_back(static_cast<UserId>(a), static_cast<UserId>(b));
        n = std::max<std::size_t>(n, static_cast<std::size_t>(std::max(a, b)) + 1);
    }
    if (!is.eof())
        throw InvalidInput("malformed edge list");
    SocialGraph g(n);
    for (auto [x, y] : edges)
        g.add_edge(x, y);
    return g;
}

} // namespace cwbsim
