#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <deque>
#include <exception>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "cwbsim/agents.hpp"
#include "cwbsim/content.hpp"
#include "cwbsim/cwb.hpp"
#include "cwbsim/errors.hpp"
#include "cwbsim/network.hpp"
#include "cwbsim/random.hpp"
#include "cwbsim/recommenders.hpp"

namespace cwbsim {

struct GraphParams {
    std::size_t n = 100;
    std::size_t m = 4;
    double h = 0.3;

    bool operator==(const GraphParams&) const = default;
};

struct ContentParams {
    double internal_toxicity = 0.05;
    /// External items injected into each user's candidate pool per step.
    std::size_t exogenous_per_user = 0;
    double exogenous_toxicity = 0.2;
    double exogenous_opinion_min = -1.0;
    double exogenous_opinion_max = 1.0;
    /// Neighbours' posts from the last `pool_window` steps enter the pool.
    int pool_window = 1;
    DetectorParams toxicity_detector{0.9, 0.1, 0.5};
    DetectorParams extremity_detector{0.9, 0.1, 0.7};

    bool operator==(const ContentParams&) const = default;
};

struct RecommenderParams {
    ConnectionKind kind = ConnectionKind::random;
    int order = 2;
    /// Per-user probability of a connection proposal each step.
    double p_rec = 0.3;
    /// Declined candidates are not proposed to the same user again.
    bool remember_declined = true;

    bool operator==(const RecommenderParams&) const = default;
};

struct RankerParams {
    FeedKind kind = FeedKind::chronological;
    std::size_t feed_size = 10;
    double s_min = 0.5;
    ObjectiveThresholds thresholds;
    /// 0 disables the objective bandit.
    double bandit_epsilon = 0.0;
    bool harm_gate = true;
    Measurement extremity_source = Measurement::truth;

    bool operator==(const RankerParams&) const = default;
};

/// Everything one simulation run needs.
struct RunConfig {
    GraphParams graph;
    DynamicsParams dynamics;
    ContentParams content;
    RecommenderParams recommender;
    RankerParams ranker;
    CWBConfig cwb;
    int steps = 200;

    void validate() const;

    bool operator==(const RunConfig&) const = default;
};

inline void RunConfig::validate() const {
    if (graph.m < 1)
        throw InvalidConfig("graph.m must be >= 1");
    if (graph.n <= graph.m)
        throw InvalidConfig("graph.n must exceed graph.m");
    if (!std::isfinite(graph.h) || !(graph.h > 0.0))
        throw InvalidConfig("graph.h must be > 0");
    dynamics.validate();
    auto in01 = [](double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; };
    if (!in01(content.internal_toxicity))
        throw InvalidConfig("content.internal_toxicity must be in [0, 1]");
    if (!in01(content.exogenous_toxicity))
        throw InvalidConfig("content.exogenous_toxicity must be in [0, 1]");
    if (!(content.exogenous_opinion_min >= -1.0 && content.exogenous_opinion_max <= 1.0 &&
          content.exogenous_opinion_min <= content.exogenous_opinion_max))
        throw InvalidConfig("content.exogenous_opinion_min/max must satisfy -1 <= min <= max <= 1");
    if (content.pool_window < 1)
        throw InvalidConfig("content.pool_window must be >= 1");
    content.toxicity_detector.validate("detector.toxicity");
    content.extremity_detector.validate("detector.extremity");
    if (recommender.order < 2)
        throw InvalidConfig("recommender.order must be >= 2");
    if (!in01(recommender.p_rec))
        throw InvalidConfig("recommender.p_rec must be in [0, 1]");
    if (ranker.feed_size < 1)
        throw InvalidConfig("ranker.feed_size must be >= 1");
    if (!in01(ranker.s_min))
        throw InvalidConfig("ranker.s_min must be in [0, 1]");
    if (!in01(ranker.bandit_epsilon))
        throw InvalidConfig("ranker.bandit_epsilon must be in [0, 1]");
    if (!std::isfinite(ranker.thresholds.extremity) || !std::isfinite(ranker.thresholds.diversity))
        throw InvalidConfig("ranker thresholds must be finite");
    cwb.validate();
    for (const auto& aw : cwb.aspects)
        if (aw.aspect.name != kExtremity && aw.aspect.name != kToxicity)
            throw InvalidConfig("the simulator scores only the extremity and toxicity aspects, got '" +
                                aw.aspect.name + "'");
    if (cwb.measure == MeasureSource::debiased) {
        for (const auto* dp : {&content.toxicity_detector, &content.extremity_detector})
            if (dp->tpr == dp->fpr)
                throw InvalidConfig("cwb.measure = \"debiased\" needs detectors with tpr != fpr");
    }
    if (steps < 0)
        throw InvalidConfig("run.steps must be >= 0");
}

// ---------------------------------------------------------------------------
// Trace layout

/// Metrics written to metrics.csv, in output order.
inline const std::vector<std::string>& core_metric_names() {
    static const std::vector<std::string> names{"satisfaction", "raw_distance", "diversity", "edges",
                                                "cwb_total"};
    return names;
}

/// Core metrics followed by CWB components and diagnostics.
inline std::vector<std::string> trace_metric_names(const CWBConfig& cwb) {
    auto names = core_metric_names();
    for (const auto& aw : cwb.aspects)
        names.push_back("cwb." + aw.aspect.name);
    names.push_back("cwb.diversity");
    names.push_back("cwb.connection");
    names.push_back("degree_gini");
    names.push_back("homophily");
    names.push_back("mean_abs_opinion");
    names.push_back("floor_infeasible");
    return names;
}

struct RunTrace {
    std::vector<std::string> metric_names;
    /// records[step][metric]; one record per executed step.
    std::vector<std::vector<Sample>> records;
    SocialGraph final_graph;
    std::vector<double> final_opinions;
    std::vector<double> resilience;
    std::optional<CWBReport> final_report;
    std::size_t posts = 0;
    std::size_t exogenous = 0;
    std::size_t stored_items = 0;
};

// ---------------------------------------------------------------------------
// State

struct SimState {
    /// Index of the next step to execute.
    int step = 0;
    SocialGraph graph;
    std::vector<UserState> users;
    /// Every item ever created; ItemId is the index.
    std::deque<ContentItem> items;
    std::vector<std::vector<ItemId>> posts_by_author;
    std::vector<std::vector<ItemId>> feeds;
    std::vector<ContactEvent> contacts;
    /// Per user, sorted ids of candidates the user declined.
    std::vector<std::vector<UserId>> declined;
    BanditStats bandit;
    std::vector<ObjectiveKind> last_objective;
    std::vector<Sample> last_wellbeing;
    std::size_t posts = 0;
    std::size_t exogenous = 0;
    std::vector<std::vector<Sample>> records;
};

namespace detail {

inline const DetectorParams* detector_for(const ContentParams& c, std::string_view aspect) {
    if (aspect == kToxicity)
        return &c.toxicity_detector;
    if (aspect == kExtremity)
        return &c.extremity_detector;
    return nullptr;
}

inline void detect_item(ContentItem& item, const ContentParams& c, std::uint64_t seed) {
    const std::pair<std::string_view, const DetectorParams*> detectors[] = {
        {kToxicity, &c.toxicity_detector}, {kExtremity, &c.extremity_detector}};
    std::uint64_t k = 0;
    for (const auto& [name, dp] : detectors) {
        auto rng = make_stream(seed, {static_cast<std::uint64_t>(Phase::detect), item.id, k++});
        item.detected.emplace(std::string(name), noisy_detect(item, name, *dp, rng));
    }
}

/// Mean over present samples.
inline Sample mean_present(std::span<const Sample> xs) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& x : xs)
        if (x) {
            s += *x;
            ++n;
        }
    if (n == 0)
        return std::nullopt;
    return s / static_cast<double>(n);
}

inline Sample measured(std::span<const Exposure> ex, std::string_view aspect, int now,
                       double exo_weight, const RunConfig& cfg) {
    switch (cfg.cwb.measure) {
    case MeasureSource::truth:
        return content_exposure(ex, aspect, now, 1, exo_weight, Measurement::truth);
    case MeasureSource::detected:
        return content_exposure(ex, aspect, now, 1, exo_weight, Measurement::detected);
    case MeasureSource::debiased:
        return debias_sample(content_exposure(ex, aspect, now, 1, exo_weight, Measurement::detected),
                             *detector_for(cfg.content, aspect));
    }
    return std::nullopt;
}

inline std::vector<double> recent_feed_opinions(const UserState& u, int window) {
    std::vector<double> out;
    const std::size_t w = static_cast<std::size_t>(window);
    const std::size_t start = u.feed_opinions.size() > w ? u.feed_opinions.size() - w : 0;
    for (std::size_t i = start; i < u.feed_opinions.size(); ++i)
        out.insert(out.end(), u.feed_opinions[i].begin(), u.feed_opinions[i].end());
    return out;
}

inline std::optional<std::size_t> aspect_index(const CWBConfig& cfg, std::string_view name) {
    for (std::size_t i = 0; i < cfg.aspects.size(); ++i)
        if (cfg.aspects[i].aspect.name == name)
            return i;
    return std::nullopt;
}

inline CwbSnapshot make_snapshot(const SimState& s, const CWBConfig& cfg, int now,
                                 std::vector<double>& pooled) {
    CwbSnapshot snap;
    snap.step = now;
    snap.users.reserve(s.users.size());
    for (const auto& u : s.users) {
        UserSeries us;
        us.resilience = u.resilience;
        for (const auto& h : u.ce_history)
            us.ce.emplace_back(h);
        for (const auto& h : u.cs_history)
            us.cs.emplace_back(h);
        us.diversity = u.diversity_history;
        us.satisfaction = u.satisfaction_trace;
        snap.users.push_back(std::move(us));
        if (cfg.pooled_diversity) {
            auto r = recent_feed_opinions(u, cfg.window);
            pooled.insert(pooled.end(), r.begin(), r.end());
        }
    }
    snap.contacts = s.contacts;
    snap.pooled_feed_opinions = pooled;
    return snap;
}

/// Per-user one-step well-being used as the bandit reward signal.
inline Sample user_wellbeing(const UserState& u, const CWBConfig& cfg) {
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t a = 0; a < cfg.aspects.size() && a < u.ce_history.size(); ++a) {
        if (u.ce_history[a].empty() || !u.ce_history[a].back())
            continue;
        const double ce = *u.ce_history[a].back();
        s += cfg.aspects[a].aspect.polarity == Polarity::harmful ? 1.0 - ce : ce;
        ++n;
    }
    if (!u.diversity_history.empty() && u.diversity_history.back()) {
        s += *u.diversity_history.back();
        ++n;
    }
    if (n == 0)
        return std::nullopt;
    return s / static_cast<double>(n);
}

} // namespace detail

/// Draws opinions and resilience, builds the initial graph.
inline SimState init_state(const RunConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    SimState s;
    const std::size_t n = cfg.graph.n;
    auto urng = make_stream(seed, {static_cast<std::uint64_t>(Phase::init_users)});
    std::vector<double> opinions(n);
    s.users.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& u = s.users[i];
        u.id = static_cast<UserId>(i);
        u.opinion = uniform(urng, -1.0, 1.0);
        u.resilience = uniform01(urng);
        u.ce_history.resize(cfg.cwb.aspects.size());
        u.cs_history.resize(cfg.cwb.aspects.size());
        opinions[i] = u.opinion;
    }
    auto grng = make_stream(seed, {static_cast<std::uint64_t>(Phase::init_graph)});
    s.graph = generate_homophily_pa(n, cfg.graph.m, opinions, cfg.graph.h, grng);
    s.posts_by_author.resize(n);
    s.feeds.resize(n);
    s.declined.resize(n);
    s.last_objective.assign(n, ObjectiveKind::maintain_engagement);
    s.last_wellbeing.resize(n);
    return s;
}

/// Executes one step transaction:
///   1 posting, 2 exogenous injection and pool assembly, 3 feed ranking,
///   4 opinion updates (users by ascending id, items in feed order),
///   5 connection proposals against the phase-start graph, 6 metrics.
/// Stochastic draws come from streams keyed by (seed, phase, user, step),
/// so results do not depend on the order users are visited in phases 1-3.
inline void step(SimState& s, const RunConfig& cfg, std::uint64_t seed) {
    const int t = s.step;
    const auto tt = static_cast<std::uint64_t>(t);
    const std::size_t n = s.users.size();
    const auto& cwb = cfg.cwb;

    // (1) posting
    std::vector<std::optional<ItemId>> new_post(n);
    for (std::size_t u = 0; u < n; ++u) {
        auto rng = make_stream(seed, {static_cast<std::uint64_t>(Phase::post), u, tt});
        auto item = generate_post(s.users[u], cfg.dynamics, s.items.size(), t,
                                  cfg.content.internal_toxicity, rng);
        if (!item)
            continue;
        detail::detect_item(*item, cfg.content, seed);
        new_post[u] = item->id;
        s.posts_by_author[u].push_back(item->id);
        s.items.push_back(std::move(*item));
        ++s.posts;
    }

    // (2) exogenous items and candidate pools
    std::vector<std::vector<ItemId>> exo(n);
    for (std::size_t u = 0; u < n && cfg.content.exogenous_per_user > 0; ++u) {
        auto rng = make_stream(seed, {static_cast<std::uint64_t>(Phase::exogenous), u, tt});
        for (std::size_t k = 0; k < cfg.content.exogenous_per_user; ++k) {
            const double o =
                uniform(rng, cfg.content.exogenous_opinion_min, cfg.content.exogenous_opinion_max);
            auto item = make_item(s.items.size(), std::nullopt, t, o, Source::external,
                                  cfg.content.exogenous_toxicity, rng);
            detail::detect_item(item, cfg.content, seed);
            exo[u].push_back(item.id);
            s.items.push_back(std::move(item));
            ++s.exogenous;
        }
    }

    std::vector<double> start_opinion(n);
    for (std::size_t u = 0; u < n; ++u)
        start_opinion[u] = s.users[u].opinion;

    // (3) ranking
    std::size_t infeasible = 0;
    const auto ext_index = detail::aspect_index(cwb, kExtremity);
    const auto agg = time_aggregation(cwb);
    std::vector<ObjectiveKind> objective(n, ObjectiveKind::maintain_engagement);
    for (std::size_t u = 0; u < n; ++u) {
        std::vector<const ContentItem*> pool;
        for (UserId v : s.graph.neighbors(static_cast<UserId>(u))) {
            const auto& posts = s.posts_by_author[v];
            for (auto it = posts.rbegin(); it != posts.rend(); ++it) {
                const ContentItem& item = s.items[*it];
                if (item.step <= t - cfg.content.pool_window)
                    break;
                pool.push_back(&item);
            }
        }
        for (ItemId id : exo[u])
            pool.push_back(&s.items[id]);

        Feed feed;
        if (cfg.ranker.kind == FeedKind::chronological) {
            feed = rank_chronological(pool, cfg.ranker.feed_size);
        } else {
            const auto& us = s.users[u];
            UserSignals sig;
            if (ext_index)
                sig.ce_extremity = try_aggregate_time(us.ce_history[*ext_index], agg);
            sig.diversity = try_aggregate_time(us.diversity_history, agg);
            ObjectiveKind obj = select_objective(sig, cfg.ranker.thresholds);
            if (cfg.ranker.bandit_epsilon > 0.0) {
                auto rng = make_stream(seed, {static_cast<std::uint64_t>(Phase::rank), u, tt});
                obj = bandit_select(s.bandit, obj, kAllObjectives, cfg.ranker.bandit_epsilon, rng);
            }
            objective[u] = obj;
            const auto recent = detail::recent_feed_opinions(us, cwb.window);
            RerankContext ctx;
            ctx.user_opinion = start_opinion[u];
            ctx.recent_exposure_opinions = recent;
            ctx.bins = cwb.bins;
            ctx.d_backfire = cfg.dynamics.d_backfire;
            ctx.extremity_source = cfg.ranker.extremity_source;
            ctx.harm_gate = cfg.ranker.harm_gate;
            auto res = cwbrs_rerank(pool, ctx, obj, cfg.ranker.feed_size, cfg.ranker.s_min);
            if (res.floor_infeasible)
                ++infeasible;
            feed = std::move(res.feed);
        }
        s.feeds[u].clear();
        for (const ContentItem* item : feed)
            s.feeds[u].push_back(item->id);
    }

    // (4) opinion updates; items are immutable so every read sees the phase-start content
    for (std::size_t u = 0; u < n; ++u)
        for (ItemId id : s.feeds[u])
            s.users[u].opinion = update_opinion(s.users[u].opinion, s.items[id].opinion, cfg.dynamics);

    // (5) connections against the phase-start graph, committed afterwards
    std::vector<double> opinions(n);
    for (std::size_t u = 0; u < n; ++u)
        opinions[u] = s.users[u].opinion;
    std::vector<Edge> pending;
    std::vector<Edge> declined_now;
    ConnectionRecommender rec{cfg.recommender.kind, cfg.recommender.order};
    for (std::size_t u = 0; u < n; ++u) {
        auto rng = make_stream(seed, {static_cast<std::uint64_t>(Phase::connect), u, tt});
        if (!bernoulli(rng, cfg.recommender.p_rec))
            continue;
        auto cand = recommend_connection(s.graph, static_cast<UserId>(u), rec, opinions, rng,
                                         s.declined[u]);
        if (!cand)
            continue;
        if (accept_connection(s.users[u], opinions[*cand], cfg.dynamics, rng))
            pending.emplace_back(static_cast<UserId>(u), *cand);
        else if (cfg.recommender.remember_declined)
            declined_now.emplace_back(static_cast<UserId>(u), *cand);
    }
    for (auto [u, v] : declined_now) {
        auto& d = s.declined[u];
        d.insert(std::lower_bound(d.begin(), d.end(), v), v);
    }
    for (auto [a, b] : pending) {
        if (!s.graph.add_edge(a, b))
            continue;
        CcParty pa{opinions[a], s.users[a].resilience, std::nullopt};
        CcParty pb{opinions[b], s.users[b].resilience, std::nullopt};
        if (cwb.cc_rule == CcRule::exposure && !cwb.aspects.empty()) {
            pa.level = try_aggregate_time(s.users[a].ce_history[0], agg);
            pb.level = try_aggregate_time(s.users[b].ce_history[0], agg);
        }
        s.contacts.push_back({t, a, b,
                              contact_creation(pa, pb, cfg.dynamics.d_backfire,
                                               cwb.resilience_weighting, cwb.cc_rule)});
    }

    // (6) metrics
    std::vector<Sample> sat(n), raw(n), div(n);
    for (std::size_t u = 0; u < n; ++u) {
        auto& us = s.users[u];
        std::vector<double> feed_ops;
        std::vector<Exposure> ex;
        for (ItemId id : s.feeds[u]) {
            feed_ops.push_back(s.items[id].opinion);
            ex.push_back({t, &s.items[id]});
        }
        if (auto sv = satisfaction(start_opinion[u], feed_ops)) {
            sat[u] = sv->satisfaction;
            raw[u] = sv->raw_distance;
        }
        div[u] = feed_diversity_entropy(feed_ops, cwb.bins);
        for (std::size_t a = 0; a < cwb.aspects.size(); ++a) {
            const auto& name = cwb.aspects[a].aspect.name;
            us.ce_history[a].push_back(detail::measured(ex, name, t, cwb.exogenous_weight, cfg));
            std::vector<Exposure> own;
            if (new_post[u])
                own.push_back({t, &s.items[*new_post[u]]});
            us.cs_history[a].push_back(detail::measured(own, name, t, 1.0, cfg));
        }
        us.diversity_history.push_back(div[u]);
        us.satisfaction_trace.push_back(sat[u]);
        us.feed_opinions.push_back(std::move(feed_ops));
    }

    if (cfg.ranker.kind == FeedKind::cwbrs && cfg.ranker.bandit_epsilon > 0.0) {
        for (std::size_t u = 0; u < n; ++u) {
            auto wb = detail::user_wellbeing(s.users[u], cwb);
            if (wb && s.last_wellbeing[u])
                s.bandit = objective_bandit_update(s.bandit, objective[u], *wb - *s.last_wellbeing[u]);
            s.last_wellbeing[u] = wb;
        }
    }
    s.last_objective = objective;

    std::vector<double> pooled;
    Sample total;
    std::optional<CWBReport> rep;
    try {
        rep = cwb_total(detail::make_snapshot(s, cwb, t, pooled), cwb);
        total = rep->total;
    } catch (const UndefinedMeasure&) {
    }

    std::vector<Sample> record;
    record.push_back(detail::mean_present(sat));
    record.push_back(detail::mean_present(raw));
    record.push_back(detail::mean_present(div));
    record.push_back(static_cast<double>(s.graph.edge_count()));
    record.push_back(total);
    for (std::size_t a = 0; a < cwb.aspects.size(); ++a)
        record.push_back(rep ? rep->aspects[a].term : Sample{});
    record.push_back(rep ? rep->diversity_term : Sample{});
    record.push_back(rep ? rep->connection_term : Sample{});
    try {
        record.push_back(degree_gini(s.graph));
    } catch (const UndefinedMeasure&) {
        record.push_back(std::nullopt);
    }
    try {
        record.push_back(homophily_index(s.graph, opinions));
    } catch (const UndefinedMeasure&) {
        record.push_back(std::nullopt);
    }
    double abs_sum = 0.0;
    for (double o : opinions)
        abs_sum += std::abs(o);
    record.push_back(n > 0 ? Sample{abs_sum / static_cast<double>(n)} : Sample{});
    record.push_back(n > 0 ? Sample{static_cast<double>(infeasible) / static_cast<double>(n)} : Sample{});
    s.records.push_back(std::move(record));
    ++s.step;
}

/// Runs cfg.steps steps from a fresh state. Identical (cfg, seed) pairs give
/// identical traces.
inline RunTrace run(const RunConfig& cfg, std::uint64_t seed) {
    SimState s = init_state(cfg, seed);
    for (int t = 0; t < cfg.steps; ++t)
        step(s, cfg, seed);

    RunTrace tr;
    tr.metric_names = trace_metric_names(cfg.cwb);
    tr.records = std::move(s.records);
    for (const auto& u : s.users) {
        tr.final_opinions.push_back(u.opinion);
        tr.resilience.push_back(u.resilience);
    }
    if (cfg.steps > 0) {
        std::vector<double> pooled;
        try {
            auto rep = cwb_total(detail::make_snapshot(s, cfg.cwb, s.step - 1, pooled), cfg.cwb);
            rep.network = network_measures(s.graph, tr.final_opinions, rep);
            tr.final_report = std::move(rep);
        } catch (const UndefinedMeasure&) {
        }
    }
    tr.final_graph = std::move(s.graph);
    tr.posts = s.posts;
    tr.exogenous = s.exogenous;
    tr.stored_items = s.items.size();
    return tr;
}

// ---------------------------------------------------------------------------
// Ensembles

struct MetricStat {
    Sample mean;
    /// Sample standard deviation (n - 1 denominator); 0 when undefined.
    double std = 0.0;
    std::size_t n = 0;
    bool std_defined = false;

    bool operator==(const MetricStat&) const = default;
};

struct EnsembleStats {
    std::vector<std::string> metric_names;
    std::size_t runs = 0;
    /// steps[step][metric]
    std::vector<std::vector<MetricStat>> steps;
    std::vector<RunTrace> traces;
};

inline std::uint64_t run_seed(std::uint64_t master_seed, std::size_t run_index) {
    return derive_seed(master_seed, {static_cast<std::uint64_t>(Phase::run), run_index});
}

/// Per-step, per-metric mean and sample standard deviation over traces.
inline EnsembleStats summarize(std::vector<RunTrace> traces) {
    EnsembleStats st;
    st.runs = traces.size();
    if (traces.empty())
        return st;
    st.metric_names = traces.front().metric_names;
    const std::size_t steps = traces.front().records.size();
    const std::size_t metrics = st.metric_names.size();
    st.steps.assign(steps, std::vector<MetricStat>(metrics));
    for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t m = 0; m < metrics; ++m) {
            double sum = 0.0;
            std::size_t cnt = 0;
            for (const auto& tr : traces)
                if (const auto& v = tr.records[t][m]; v) {
                    sum += *v;
                    ++cnt;
                }
            auto& ms = st.steps[t][m];
            ms.n = cnt;
            if (cnt == 0)
                continue;
            const double mean = sum / static_cast<double>(cnt);
            ms.mean = mean;
            if (cnt >= 2) {
                double ss = 0.0;
                for (const auto& tr : traces)
                    if (const auto& v = tr.records[t][m]; v)
                        ss += (*v - mean) * (*v - mean);
                ms.std = std::sqrt(ss / static_cast<double>(cnt - 1));
                ms.std_defined = true;
            }
        }
    st.traces = std::move(traces);
    return st;
}

/// R independent runs with seeds derived from (master_seed, run index).
/// Runs may execute on `threads` workers; results are merged by run index.
inline EnsembleStats run_ensemble(const RunConfig& cfg, std::uint64_t master_seed, std::size_t runs,
                                  unsigned threads = 1) {
    if (runs < 1)
        throw InvalidConfig("run.runs must be >= 1");
    cfg.validate();
    std::vector<RunTrace> traces(runs);
    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(runs)));
    if (workers == 1) {
        for (std::size_t r = 0; r < runs; ++r)
            traces[r] = run(cfg, run_seed(master_seed, r));
        return summarize(std::move(traces));
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t r = next++; r < runs; r = next++) {
                try {
                    traces[r] = run(cfg, run_seed(master_seed, r));
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure)
                        failure = std::current_exception();
                }
            }
        });
    for (auto& th : pool)
        th.join();
    if (failure)
        std::rethrow_exception(failure);
    return summarize(std::move(traces));
}

} // namespace cwbsim
