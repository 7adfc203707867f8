#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "cwbsim/agents.hpp"
#include "cwbsim/content.hpp"
#include "cwbsim/errors.hpp"
#include "cwbsim/network.hpp"

namespace cwbsim {

// Collective well-being metric engine.
//
// Event terms per (aspect, user):
//   CS  mean aspect score of content the user shared
//   CE  (weighted) mean aspect score of content the user was exposed to
//   CC  value of a newly created connection
// Each is normalised to [0, 1], aggregated over time per user, then over
// users with a weighted power mean, then over aspects with normalised
// weights. Missing data propagates as an empty Sample and is never read as 0.

/// Which score an item contributes to CE/CS.
enum class Measurement { truth, detected };

/// How the community metric reads item scores.
enum class MeasureSource { truth, detected, debiased };

enum class TimeMode { windowed, ema };

/// Functional form of contact creation.
enum class CcRule { opinion, exposure };

struct AspectWeight {
    Aspect aspect;
    double weight = 0.0;

    bool operator==(const AspectWeight&) const = default;
};

struct CWBConfig {
    std::vector<AspectWeight> aspects{{extremity_aspect(), 0.25}, {toxicity_aspect(), 0.25}};
    double diversity_weight = 0.25;
    double connection_weight = 0.25;
    int window = 10;
    /// Exponent of the user power mean; -inf is the minimum.
    double q = 1.0;
    /// |q| at or beyond which the power mean is evaluated as min / max.
    double q_inf = 1e6;
    /// Mix between exposure (beta) and sharing (1 - beta).
    double beta = 0.5;
    int bins = 10;
    double exogenous_weight = 1.0;
    bool resilience_weighting = false;
    TimeMode time_mode = TimeMode::windowed;
    double ema_alpha = 0.3;
    MeasureSource measure = MeasureSource::truth;
    bool pooled_diversity = false;
    CcRule cc_rule = CcRule::opinion;

    void validate() const {
        double total = diversity_weight + connection_weight;
        for (const auto& aw : aspects) {
            if (!std::isfinite(aw.weight) || aw.weight < 0.0)
                throw InvalidConfig("cwb.weight_" + aw.aspect.name + " must be >= 0");
            total += aw.weight;
        }
        for (std::size_t i = 0; i < aspects.size(); ++i)
            for (std::size_t j = i + 1; j < aspects.size(); ++j)
                if (aspects[i].aspect.name == aspects[j].aspect.name)
                    throw InvalidConfig("duplicate aspect '" + aspects[i].aspect.name + "'");
        if (!std::isfinite(diversity_weight) || diversity_weight < 0.0)
            throw InvalidConfig("cwb.weight_diversity must be >= 0");
        if (!std::isfinite(connection_weight) || connection_weight < 0.0)
            throw InvalidConfig("cwb.weight_connection must be >= 0");
        if (!(total > 0.0))
            throw InvalidConfig("cwb weights must not all be zero");
        if (window < 1)
            throw InvalidConfig("cwb.window must be >= 1");
        if (bins < 2)
            throw InvalidConfig("cwb.bins must be >= 2");
        if (std::isnan(q))
            throw InvalidConfig("cwb.q must not be NaN");
        if (!(q_inf > 0.0))
            throw InvalidConfig("cwb.q_inf must be > 0");
        if (!std::isfinite(beta) || beta < 0.0 || beta > 1.0)
            throw InvalidConfig("cwb.beta must be in [0, 1]");
        if (!std::isfinite(exogenous_weight) || exogenous_weight < 0.0)
            throw InvalidConfig("cwb.exogenous_weight must be >= 0");
        if (!std::isfinite(ema_alpha) || !(ema_alpha > 0.0) || ema_alpha > 1.0)
            throw InvalidConfig("cwb.ema_alpha must be in (0, 1]");
    }

    bool operator==(const CWBConfig&) const = default;
};

// ---------------------------------------------------------------------------
// Event terms

inline double item_score(const ContentItem& item, std::string_view aspect, Measurement m) {
    if (m == Measurement::truth)
        return true_aspect_score(item, aspect);
    auto it = item.detected.find(aspect);
    if (it == item.detected.end())
        throw NotFound("no detector label for aspect '" + std::string(aspect) + "' on item " +
                       std::to_string(item.id));
    return it->second ? 1.0 : 0.0;
}

/// One item shown to a user at `step`.
struct Exposure {
    int step = 0;
    const ContentItem* item = nullptr;
};

inline bool in_window(int step, int now, int window) { return step <= now && step > now - window; }

/// Mean aspect score of the items a user authored in the last `window` steps.
inline Sample content_shared(std::span<const ContentItem* const> authored, std::string_view aspect,
                             int now, int window, Measurement m = Measurement::truth) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const ContentItem* item : authored) {
        if (!in_window(item->step, now, window))
            continue;
        sum += item_score(*item, aspect, m);
        ++count;
    }
    if (count == 0)
        return std::nullopt;
    return sum / static_cast<double>(count);
}

/// Weighted mean aspect score of the items a user saw in the last `window`
/// steps; external items carry `exogenous_weight`.
inline Sample content_exposure(std::span<const Exposure> exposures, std::string_view aspect, int now,
                               int window, double exogenous_weight,
                               Measurement m = Measurement::truth) {
    double num = 0.0;
    double den = 0.0;
    for (const auto& e : exposures) {
        if (!in_window(e.step, now, window))
            continue;
        const double w = e.item->source == Source::external ? exogenous_weight : 1.0;
        num += w * item_score(*e.item, aspect, m);
        den += w;
    }
    if (!(den > 0.0))
        return std::nullopt;
    return num / den;
}

/// Applies the prevalence correction to a detected-label mean, clamped to [0, 1].
inline Sample debias_sample(Sample detected_mean, const DetectorParams& dp) {
    if (!detected_mean)
        return std::nullopt;
    return std::clamp(debias_prevalence(*detected_mean, dp), 0.0, 1.0);
}

struct CcParty {
    double opinion = 0.0;
    double resilience = 0.0;
    /// Blended CE/CS level of the aspect, used by CcRule::exposure.
    Sample level;
};

/// Value of a new a-b connection. The opinion rule rewards bridging
/// distance |o_a - o_b| / 2 unless it reaches the backfire band; with
/// resilience weighting the value is scaled by |res_a - res_b|.
inline double contact_creation(const CcParty& a, const CcParty& b, double d_backfire,
                               bool resilience_weighting, CcRule rule = CcRule::opinion) {
    double bridge = 0.0;
    if (rule == CcRule::opinion) {
        const double dist = std::abs(a.opinion - b.opinion);
        bridge = dist < d_backfire ? dist / 2.0 : 0.0;
    } else {
        if (a.level && b.level)
            bridge = std::abs(*a.level - *b.level);
    }
    const double support = resilience_weighting ? std::abs(a.resilience - b.resilience) : 1.0;
    return bridge * support;
}

// ---------------------------------------------------------------------------
// Feed-level measures

struct SatisfactionValue {
    double raw_distance = 0.0;
    double satisfaction = 0.0;
};

/// Mean opinion distance to the feed and its complement 1 - raw/2.
inline std::optional<SatisfactionValue> satisfaction(double opinion,
                                                     std::span<const double> feed_opinions) {
    if (feed_opinions.empty())
        return std::nullopt;
    double acc = 0.0;
    for (double c : feed_opinions)
        acc += std::abs(c - opinion);
    const double raw = acc / static_cast<double>(feed_opinions.size());
    return SatisfactionValue{raw, 1.0 - raw / 2.0};
}

/// Equal-width bin of an opinion over [-1, 1]; +1 falls in the last bin.
inline int opinion_bin(double o, int bins) {
    const int b = static_cast<int>(std::floor((clip_opinion(o) + 1.0) / 2.0 * bins));
    return std::clamp(b, 0, bins - 1);
}

/// Shannon entropy of binned feed opinions divided by ln(bins).
inline Sample feed_diversity_entropy(std::span<const double> feed_opinions, int bins) {
    if (bins < 2)
        throw InvalidInput("entropy needs at least two bins");
    if (feed_opinions.empty())
        return std::nullopt;
    std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
    for (double o : feed_opinions)
        ++counts[static_cast<std::size_t>(opinion_bin(o, bins))];
    const auto n = static_cast<double>(feed_opinions.size());
    double h = 0.0;
    for (std::size_t c : counts)
        if (c > 0) {
            const double p = static_cast<double>(c) / n;
            h -= p * std::log(p);
        }
    return std::clamp(h / std::log(static_cast<double>(bins)), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Aggregation

/// Weighted power mean of exponent q over present values. q = 1 is the
/// arithmetic mean, q = 0 the geometric mean, q <= -q_inf the minimum and
/// q >= q_inf the maximum. An empty `weights` span means equal weights.
inline double aggregate_users(std::span<const Sample> values, std::span<const double> weights,
                              double q, double q_inf = 1e6) {
    if (!weights.empty() && weights.size() != values.size())
        throw InvalidInput("weights and values differ in length");
    std::vector<double> x;
    std::vector<double> w;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!values[i])
            continue;
        const double wi = weights.empty() ? 1.0 : weights[i];
        if (!std::isfinite(wi) || wi < 0.0)
            throw InvalidInput("aggregation weights must be finite and >= 0");
        if (!std::isfinite(*values[i]) || *values[i] < 0.0)
            throw InvalidInput("aggregated values must be finite and >= 0");
        if (wi == 0.0)
            continue;
        x.push_back(*values[i]);
        w.push_back(wi);
    }
    if (x.empty())
        throw UndefinedMeasure("no user value with positive weight to aggregate");
    if (q <= -q_inf)
        return *std::min_element(x.begin(), x.end());
    if (q >= q_inf)
        return *std::max_element(x.begin(), x.end());

    double wsum = 0.0;
    for (double wi : w)
        wsum += wi;
    if (q == 0.0) {
        double acc = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] == 0.0)
                return 0.0;
            acc += w[i] * std::log(x[i]);
        }
        return std::exp(acc / wsum);
    }
    if (q < 0.0 && std::any_of(x.begin(), x.end(), [](double v) { return v == 0.0; }))
        return 0.0;
    // Scale so every ratio^q is <= 1 and large |q| cannot overflow.
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    const double scale = q > 0.0 ? *hi : *lo;
    if (scale == 0.0)
        return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        acc += w[i] * std::pow(x[i] / scale, q);
    const double mean = scale * std::pow(acc / wsum, 1.0 / q);
    return std::clamp(mean, *lo, *hi);
}

struct TimeAggregation {
    TimeMode mode = TimeMode::windowed;
    int window = 10;
    double alpha = 0.3;
};

/// Windowed mean over the present values among the last `window` entries,
/// or an EMA over all present values seeded at the first one. Empty when
/// nothing is present.
inline Sample try_aggregate_time(std::span<const Sample> series, const TimeAggregation& agg) {
    if (agg.mode == TimeMode::windowed) {
        const std::size_t w = static_cast<std::size_t>(std::max(agg.window, 1));
        const std::size_t start = series.size() > w ? series.size() - w : 0;
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t i = start; i < series.size(); ++i)
            if (series[i]) {
                sum += *series[i];
                ++count;
            }
        if (count == 0)
            return std::nullopt;
        return sum / static_cast<double>(count);
    }
    Sample ema;
    for (const auto& s : series) {
        if (!s)
            continue;
        ema = ema ? agg.alpha * *s + (1.0 - agg.alpha) * *ema : *s;
    }
    return ema;
}

inline double aggregate_time(std::span<const Sample> series, const TimeAggregation& agg) {
    auto v = try_aggregate_time(series, agg);
    if (!v)
        throw UndefinedMeasure("time aggregation of an empty series");
    return *v;
}

// ---------------------------------------------------------------------------
// Community report

/// Read-only view of one user's measurement history.
struct UserSeries {
    double resilience = 0.0;
    /// Per aspect, in CWBConfig::aspects order.
    std::vector<std::span<const Sample>> ce;
    std::vector<std::span<const Sample>> cs;
    std::span<const Sample> diversity;
    std::span<const Sample> satisfaction;
};

struct ContactEvent {
    int step = 0;
    UserId a = 0;
    UserId b = 0;
    double value = 0.0;
};

struct CwbSnapshot {
    int step = 0;
    std::vector<UserSeries> users;
    std::span<const ContactEvent> contacts;
    /// Feed opinions of every user in the window; read only with pooled_diversity.
    std::span<const double> pooled_feed_opinions;
};

struct AspectReport {
    std::string name;
    Polarity polarity = Polarity::harmful;
    double weight = 0.0;
    std::vector<Sample> ce;
    std::vector<Sample> cs;
    std::vector<Sample> user_term;
    Sample term;
};

struct NetworkMeasures {
    Sample degree_gini;
    Sample homophily;
    Sample mean_closeness;
    /// Closeness-weighted per-user threat, one entry per aspect.
    std::vector<std::pair<std::string, Sample>> centrality_weighted_threat;
};

struct CWBReport {
    int step = 0;
    std::vector<AspectReport> aspects;
    std::vector<Sample> diversity;
    Sample diversity_term;
    double diversity_weight = 0.0;
    std::vector<ContactEvent> contacts;
    Sample connection_term;
    double connection_weight = 0.0;
    std::vector<Sample> satisfaction;
    double total = 0.0;
    std::optional<NetworkMeasures> network;
};

inline TimeAggregation time_aggregation(const CWBConfig& cfg) {
    return {cfg.time_mode, cfg.window, cfg.ema_alpha};
}

/// Assembles every CWB component and the weighted total. Components without
/// data are reported as missing and their weight is dropped from the
/// normalisation. Throws UndefinedMeasure when no component has data.
inline CWBReport cwb_total(const CwbSnapshot& snap, const CWBConfig& cfg) {
    const auto agg = time_aggregation(cfg);
    const std::size_t n_users = snap.users.size();
    CWBReport rep;
    rep.step = snap.step;

    for (std::size_t a = 0; a < cfg.aspects.size(); ++a) {
        const auto& aw = cfg.aspects[a];
        const bool harmful = aw.aspect.polarity == Polarity::harmful;
        AspectReport ar;
        ar.name = aw.aspect.name;
        ar.polarity = aw.aspect.polarity;
        ar.weight = aw.weight;
        ar.ce.resize(n_users);
        ar.cs.resize(n_users);
        ar.user_term.resize(n_users);
        std::vector<double> weights(n_users, 1.0);
        for (std::size_t u = 0; u < n_users; ++u) {
            const auto& us = snap.users[u];
            if (a < us.ce.size())
                ar.ce[u] = try_aggregate_time(us.ce[a], agg);
            if (a < us.cs.size())
                ar.cs[u] = try_aggregate_time(us.cs[a], agg);
            auto good = [harmful](double x) { return harmful ? 1.0 - x : x; };
            if (ar.ce[u] && ar.cs[u])
                ar.user_term[u] = cfg.beta * good(*ar.ce[u]) + (1.0 - cfg.beta) * good(*ar.cs[u]);
            else if (ar.ce[u])
                ar.user_term[u] = good(*ar.ce[u]);
            else if (ar.cs[u])
                ar.user_term[u] = good(*ar.cs[u]);
            if (cfg.resilience_weighting && harmful)
                weights[u] = 1.0 - us.resilience;
        }
        try {
            ar.term = aggregate_users(ar.user_term, weights, cfg.q, cfg.q_inf);
        } catch (const UndefinedMeasure&) {
            ar.term = std::nullopt;
        }
        rep.aspects.push_back(std::move(ar));
    }

    rep.diversity.resize(n_users);
    rep.satisfaction.resize(n_users);
    double div_sum = 0.0;
    std::size_t div_n = 0;
    for (std::size_t u = 0; u < n_users; ++u) {
        rep.diversity[u] = try_aggregate_time(snap.users[u].diversity, agg);
        rep.satisfaction[u] = try_aggregate_time(snap.users[u].satisfaction, agg);
        if (rep.diversity[u]) {
            div_sum += *rep.diversity[u];
            ++div_n;
        }
    }
    if (cfg.pooled_diversity)
        rep.diversity_term = feed_diversity_entropy(snap.pooled_feed_opinions, cfg.bins);
    else if (div_n > 0)
        rep.diversity_term = div_sum / static_cast<double>(div_n);
    rep.diversity_weight = cfg.diversity_weight;

    double cc_sum = 0.0;
    for (const auto& c : snap.contacts)
        if (in_window(c.step, snap.step, cfg.window)) {
            rep.contacts.push_back(c);
            cc_sum += c.value;
        }
    if (!rep.contacts.empty())
        rep.connection_term = cc_sum / static_cast<double>(rep.contacts.size());
    rep.connection_weight = cfg.connection_weight;

    double num = 0.0;
    double den = 0.0;
    auto add = [&](const Sample& term, double w) {
        if (term && w > 0.0) {
            num += w * *term;
            den += w;
        }
    };
    for (const auto& ar : rep.aspects)
        add(ar.term, ar.weight);
    add(rep.diversity_term, rep.diversity_weight);
    add(rep.connection_term, rep.connection_weight);
    if (!(den > 0.0))
        throw UndefinedMeasure("no CWB component has data");
    rep.total = std::clamp(num / den, 0.0, 1.0);
    return rep;
}

/// Graph-level measures for the report. Per-user threat for each aspect is
/// the user's time-aggregated CE; users without data count as 0.
inline NetworkMeasures network_measures(const SocialGraph& g, std::span<const double> opinions,
                                        const CWBReport& rep) {
    NetworkMeasures nm;
    auto guarded = [](auto&& fn) -> Sample {
        try {
            return fn();
        } catch (const UndefinedMeasure&) {
            return std::nullopt;
        }
    };
    nm.degree_gini = guarded([&] { return degree_gini(g); });
    nm.homophily = guarded([&] { return homophily_index(g, opinions); });
    const auto cl = closeness_all(g);
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& c : cl)
        if (c) {
            sum += *c;
            ++count;
        }
    if (count > 0)
        nm.mean_closeness = sum / static_cast<double>(count);
    for (const auto& ar : rep.aspects) {
        std::vector<double> threat(g.size(), 0.0);
        for (std::size_t u = 0; u < threat.size() && u < ar.ce.size(); ++u)
            threat[u] = ar.ce[u].value_or(0.0);
        nm.centrality_weighted_threat.emplace_back(
            ar.name, guarded([&] { return centrality_weighted_threat(g, threat); }));
    }
    return nm;
}

// ---------------------------------------------------------------------------
// Serialisation

inline nlohmann::ordered_json sample_json(const Sample& s) {
    if (s && std::isfinite(*s))
        return *s;
    return nullptr;
}

inline nlohmann::ordered_json samples_json(std::span<const Sample> xs) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& s : xs)
        arr.push_back(sample_json(s));
    return arr;
}

inline nlohmann::ordered_json to_json(const CWBReport& rep) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["step"] = rep.step;
    j["total"] = rep.total;
    ordered_json aspects = ordered_json::array();
    for (const auto& ar : rep.aspects) {
        ordered_json a;
        a["name"] = ar.name;
        a["polarity"] = ar.polarity == Polarity::harmful ? "harmful" : "beneficial";
        a["weight"] = ar.weight;
        a["term"] = sample_json(ar.term);
        a["ce"] = samples_json(ar.ce);
        a["cs"] = samples_json(ar.cs);
        a["user_term"] = samples_json(ar.user_term);
        aspects.push_back(std::move(a));
    }
    j["aspects"] = std::move(aspects);
    j["diversity"] = {{"weight", rep.diversity_weight},
                      {"term", sample_json(rep.diversity_term)},
                      {"per_user", samples_json(rep.diversity)}};
    ordered_json contacts = ordered_json::array();
    for (const auto& c : rep.contacts)
        contacts.push_back({{"step", c.step}, {"a", c.a}, {"b", c.b}, {"cc", c.value}});
    j["connection"] = {{"weight", rep.connection_weight},
                       {"term", sample_json(rep.connection_term)},
                       {"contacts", std::move(contacts)}};
    j["satisfaction"] = samples_json(rep.satisfaction);
    if (rep.network) {
        ordered_json threat;
        for (const auto& [name, v] : rep.network->centrality_weighted_threat)
            threat[name] = sample_json(v);
        j["network"] = {{"degree_gini", sample_json(rep.network->degree_gini)},
                        {"homophily", sample_json(rep.network->homophily)},
                        {"mean_closeness", sample_json(rep.network->mean_closeness)},
                        {"centrality_weighted_threat", std::move(threat)}};
    }
    return j;
}

inline std::string format_value(const Sample& s) {
    if (!s || !std::isfinite(*s))
        return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", *s);
    return buf;
}

inline void write_report_csv_header(std::ostream& os) { os << "step,aspect,term,value\n"; }

/// Long-format rows `step,aspect,term,value` with community-level terms.
inline void write_report_csv(std::ostream& os, const CWBReport& rep) {
    auto row = [&](std::string_view aspect, std::string_view term, const Sample& v) {
        os << rep.step << ',' << aspect << ',' << term << ',' << format_value(v) << '\n';
    };
    auto mean_of = [](const std::vector<Sample>& xs) -> Sample {
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
    };
    for (const auto& ar : rep.aspects) {
        row(ar.name, "cs", mean_of(ar.cs));
        row(ar.name, "ce", mean_of(ar.ce));
        row(ar.name, "term", ar.term);
        row(ar.name, "weight", ar.weight);
    }
    row("diversity", "term", rep.diversity_term);
    row("diversity", "weight", rep.diversity_weight);
    row("connection", "term", rep.connection_term);
    row("connection", "weight", rep.connection_weight);
    row("satisfaction", "mean", mean_of(rep.satisfaction));
    if (rep.network) {
        row("network", "degree_gini", rep.network->degree_gini);
        row("network", "homophily", rep.network->homophily);
        row("network", "mean_closeness", rep.network->mean_closeness);
        for (const auto& [name, v] : rep.network->centrality_weighted_threat)
            row(name, "centrality_weighted_threat", v);
    }
    row("cwb", "total", rep.total);
}

} // namespace cwbsim
