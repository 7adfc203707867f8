#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cwbsim/content.hpp"
#include "cwbsim/cwb.hpp"
#include "cwbsim/errors.hpp"
#include "cwbsim/network.hpp"
#include "cwbsim/random.hpp"

namespace cwbsim {

// ---------------------------------------------------------------------------
// Connection recommenders

enum class ConnectionKind { random, overlap, diversified };

inline std::string_view to_string(ConnectionKind k) {
    switch (k) {
    case ConnectionKind::random: return "random";
    case ConnectionKind::overlap: return "overlap";
    case ConnectionKind::diversified: return "diversified";
    }
    return "?";
}

inline std::optional<ConnectionKind> parse_connection_kind(std::string_view s) {
    if (s == "random") return ConnectionKind::random;
    if (s == "overlap") return ConnectionKind::overlap;
    if (s == "diversified") return ConnectionKind::diversified;
    return std::nullopt;
}

struct ConnectionRecommender {
    ConnectionKind kind = ConnectionKind::random;
    /// Neighbourhood order for overlap: 2 counts common friends, 3 counts
    /// shared nodes within two hops.
    int order = 2;
};

namespace detail {

/// Overlap score of every node with u. Entries for u itself are meaningless.
inline std::vector<std::size_t> overlap_scores(const SocialGraph& g, UserId u, int order) {
    std::vector<std::size_t> score(g.size(), 0);
    if (order <= 2) {
        for (UserId w : g.neighbors(u))
            for (UserId x : g.neighbors(w))
                ++score[x];
        return score;
    }
    const auto bu = ball(g, u, order - 1);
    std::vector<bool> in_u(g.size(), false);
    for (UserId x : bu)
        in_u[x] = true;
    for (UserId v = 0; v < g.size(); ++v) {
        if (v == u)
            continue;
        for (UserId x : ball(g, v, order - 1))
            if (in_u[x] && x != u && x != v)
                ++score[v];
    }
    return score;
}

} // namespace detail

/// Proposes a new contact for u among users it is not yet connected to and
/// that are not listed in `excluded` (sorted). Deterministic kinds break
/// ties by the smallest user id.
template <class URBG>
std::optional<UserId> recommend_connection(const SocialGraph& g, UserId u,
                                           const ConnectionRecommender& rec,
                                           std::span<const double> opinions, URBG& rng,
                                           std::span<const UserId> excluded = {}) {
    g.require(u);
    if (rec.kind == ConnectionKind::diversified && opinions.size() != g.size())
        throw InvalidInput("opinion vector size does not match node count");

    std::vector<UserId> eligible;
    eligible.reserve(g.size());
    auto nbrs = g.neighbors(u);
    auto it = nbrs.begin();
    for (UserId v = 0; v < g.size(); ++v) {
        while (it != nbrs.end() && *it < v)
            ++it;
        if (v == u || (it != nbrs.end() && *it == v))
            continue;
        if (!excluded.empty() && std::binary_search(excluded.begin(), excluded.end(), v))
            continue;
        eligible.push_back(v);
    }
    if (eligible.empty())
        return std::nullopt;

    switch (rec.kind) {
    case ConnectionKind::random:
        return eligible[uniform_index(rng, eligible.size())];
    case ConnectionKind::overlap: {
        const auto score = detail::overlap_scores(g, u, rec.order);
        UserId best = eligible.front();
        for (UserId v : eligible)
            if (score[v] > score[best])
                best = v;
        return best;
    }
    case ConnectionKind::diversified: {
        UserId best = eligible.front();
        double best_d = -1.0;
        for (UserId v : eligible) {
            const double d = std::abs(opinions[u] - opinions[v]);
            if (d > best_d) {
                best_d = d;
                best = v;
            }
        }
        return best;
    }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Feed rankers

enum class FeedKind { chronological, cwbrs };

inline std::string_view to_string(FeedKind k) {
    return k == FeedKind::chronological ? "chronological" : "cwbrs";
}

inline std::optional<FeedKind> parse_feed_kind(std::string_view s) {
    if (s == "chronological") return FeedKind::chronological;
    if (s == "cwbrs") return FeedKind::cwbrs;
    return std::nullopt;
}

using Feed = std::vector<const ContentItem*>;

/// The K most recent items, newest step first, lower id first within a step.
inline Feed rank_chronological(std::span<const ContentItem* const> pool, std::size_t k) {
    if (k < 1)
        throw InvalidInput("feed size must be >= 1");
    Feed feed(pool.begin(), pool.end());
    auto newer = [](const ContentItem* a, const ContentItem* b) {
        if (a->step != b->step)
            return a->step > b->step;
        return a->id < b->id;
    };
    const std::size_t n = std::min(k, feed.size());
    std::partial_sort(feed.begin(), feed.begin() + static_cast<std::ptrdiff_t>(n), feed.end(), newer);
    feed.resize(n);
    return feed;
}

// ---------------------------------------------------------------------------
// CWB-RS: objective hierarchy and greedy re-ranking

enum class ObjectiveKind : std::size_t {
    reduce_extremity = 0,
    increase_diversity = 1,
    maintain_engagement = 2,
};

inline constexpr std::array<ObjectiveKind, 3> kAllObjectives{
    ObjectiveKind::reduce_extremity, ObjectiveKind::increase_diversity,
    ObjectiveKind::maintain_engagement};

inline std::string_view to_string(ObjectiveKind k) {
    switch (k) {
    case ObjectiveKind::reduce_extremity: return "reduce-extremity-exposure";
    case ObjectiveKind::increase_diversity: return "increase-diversity";
    case ObjectiveKind::maintain_engagement: return "maintain-engagement";
    }
    return "?";
}

struct ObjectiveThresholds {
    /// Windowed extremity exposure above which exposure is reduced.
    double extremity = 0.6;
    /// Windowed feed entropy below which diversity is increased.
    double diversity = 0.3;

    bool operator==(const ObjectiveThresholds&) const = default;
};

/// Windowed per-user inputs of the objective cascade.
struct UserSignals {
    Sample ce_extremity;
    Sample diversity;
};

inline ObjectiveKind select_objective(const UserSignals& s, const ObjectiveThresholds& t) {
    if (s.ce_extremity && *s.ce_extremity > t.extremity)
        return ObjectiveKind::reduce_extremity;
    if (s.diversity && *s.diversity < t.diversity)
        return ObjectiveKind::increase_diversity;
    return ObjectiveKind::maintain_engagement;
}

struct RerankContext {
    double user_opinion = 0.0;
    /// Opinions of the items the user saw in the recent window.
    std::span<const double> recent_exposure_opinions;
    int bins = 10;
    double d_backfire = 0.8;
    /// Score extremity from |opinion| or from the detector label.
    Measurement extremity_source = Measurement::truth;
    /// Zero the score of items the toxicity detector flagged.
    bool harm_gate = true;
};

namespace detail {

inline double novelty(double item_opinion, const RerankContext& ctx) {
    const auto bins = static_cast<std::size_t>(std::max(ctx.bins, 2));
    std::vector<double> hist(bins, 0.0);
    hist[static_cast<std::size_t>(opinion_bin(ctx.user_opinion, ctx.bins))] += 1.0;
    for (double o : ctx.recent_exposure_opinions)
        hist[static_cast<std::size_t>(opinion_bin(o, ctx.bins))] += 1.0;
    const double total = 1.0 + static_cast<double>(ctx.recent_exposure_opinions.size());
    return 1.0 - hist[static_cast<std::size_t>(opinion_bin(item_opinion, ctx.bins))] / total;
}

} // namespace detail

/// Additive per-item score of a sub-policy, in [0, 1].
inline double objective_score(const ContentItem& item, ObjectiveKind obj, const RerankContext& ctx) {
    if (ctx.harm_gate) {
        auto it = item.detected.find(kToxicity);
        if (it != item.detected.end() && it->second)
            return 0.0;
    }
    const double dist = std::abs(item.opinion - ctx.user_opinion);
    switch (obj) {
    case ObjectiveKind::reduce_extremity:
        return 1.0 - item_score(item, kExtremity, ctx.extremity_source);
    case ObjectiveKind::increase_diversity:
        if (dist >= ctx.d_backfire)
            return 0.0;
        return detail::novelty(item.opinion, ctx);
    case ObjectiveKind::maintain_engagement:
        return 1.0 - dist / 2.0;
    }
    return 0.0;
}

struct RerankResult {
    Feed feed;
    /// Set when the satisfaction floor could not be met.
    bool floor_infeasible = false;
};

/// Greedy forward selection of up to K items by objective score, keeping
/// the predicted satisfaction 1 - mean|Δo|/2 of the growing feed at or
/// above `s_min`. When no remaining item keeps the floor, the rest of the
/// feed is filled with the items closest to the user's opinion and the
/// result is flagged. Ties go to the lower item id. Under increase-diversity
/// items at or beyond the backfire distance are left out, so the feed may be
/// shorter than K.
inline RerankResult cwbrs_rerank(std::span<const ContentItem* const> pool, const RerankContext& ctx,
                                 ObjectiveKind obj, std::size_t k, double s_min) {
    if (k < 1)
        throw InvalidInput("feed size must be >= 1");
    RerankResult res;
    if (pool.empty())
        return res;

    struct Cand {
        const ContentItem* item;
        double score;
        double dist;
    };
    std::vector<Cand> cands;
    cands.reserve(pool.size());
    for (const ContentItem* item : pool) {
        const double dist = std::abs(item->opinion - ctx.user_opinion);
        // guarded items are never emitted, not even as floor filler
        if (obj == ObjectiveKind::increase_diversity && dist >= ctx.d_backfire)
            continue;
        cands.push_back({item, objective_score(*item, obj, ctx), dist});
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.score != b.score)
            return a.score > b.score;
        return a.item->id < b.item->id;
    });

    const std::size_t n = std::min(k, cands.size());
    // satisfaction >= s_min  <=>  mean distance <= 2 (1 - s_min)
    const double max_mean_dist = 2.0 * (1.0 - s_min) + 1e-12;
    std::vector<bool> used(cands.size(), false);
    double dist_sum = 0.0;
    while (res.feed.size() < n) {
        const double slots = static_cast<double>(res.feed.size() + 1);
        std::size_t pick = cands.size();
        for (std::size_t i = 0; i < cands.size(); ++i)
            if (!used[i] && (dist_sum + cands[i].dist) / slots <= max_mean_dist) {
                pick = i;
                break;
            }
        if (pick == cands.size())
            break;
        used[pick] = true;
        dist_sum += cands[pick].dist;
        res.feed.push_back(cands[pick].item);
    }
    if (res.feed.size() < n) {
        res.floor_infeasible = true;
        std::vector<std::size_t> rest;
        for (std::size_t i = 0; i < cands.size(); ++i)
            if (!used[i])
                rest.push_back(i);
        std::sort(rest.begin(), rest.end(), [&](std::size_t a, std::size_t b) {
            if (cands[a].dist != cands[b].dist)
                return cands[a].dist < cands[b].dist;
            return cands[a].item->id < cands[b].item->id;
        });
        for (std::size_t i = 0; res.feed.size() < n; ++i)
            res.feed.push_back(cands[rest[i]].item);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Optional epsilon-greedy layer over the objective cascade

struct BanditStats {
    std::array<double, 3> mean{};
    std::array<std::uint64_t, 3> count{};

    bool operator==(const BanditStats&) const = default;
};

inline BanditStats objective_bandit_update(BanditStats stats, ObjectiveKind obj, double reward) {
    const auto i = static_cast<std::size_t>(obj);
    ++stats.count[i];
    stats.mean[i] += (reward - stats.mean[i]) / static_cast<double>(stats.count[i]);
    return stats;
}

/// epsilon == 0 disables the layer and returns the cascade's choice.
/// Otherwise explores uniformly with probability epsilon and exploits the
/// arm with the best running mean; unplayed arms count as best and ties are
/// broken uniformly at random.
template <class URBG>
ObjectiveKind bandit_select(const BanditStats& stats, ObjectiveKind rule_choice,
                            std::span<const ObjectiveKind> arms, double epsilon, URBG& rng) {
    if (epsilon <= 0.0 || arms.empty())
        return rule_choice;
    if (bernoulli(rng, epsilon))
        return arms[uniform_index(rng, arms.size())];
    auto value = [&](ObjectiveKind k) {
        const auto i = static_cast<std::size_t>(k);
        return stats.count[i] == 0 ? std::numeric_limits<double>::infinity() : stats.mean[i];
    };
    double best = -std::numeric_limits<double>::infinity();
    for (auto k : arms)
        best = std::max(best, value(k));
    std::vector<ObjectiveKind> top;
    for (auto k : arms)
        if (value(k) == best)
            top.push_back(k);
    return top[uniform_index(rng, top.size())];
}

} // namespace cwbsim
