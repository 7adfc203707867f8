#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "cwbsim/content.hpp"
#include "cwbsim/errors.hpp"
#include "cwbsim/random.hpp"

namespace cwbsim {

/// A per-step measurement that may be missing.
using Sample = std::optional<double>;

/// Bounded-confidence assimilation with a repulsion (backfire) band.
struct DynamicsParams {
    double d_assim = 0.1;
    double d_backfire = 0.8;
    double mu = 0.01;
    double lambda = 0.02;
    double p_post = 0.8;
    double post_noise = 0.05;
    double h_accept = 0.2;

    void validate() const {
        auto fin = [](double x) { return std::isfinite(x); };
        if (!fin(d_assim) || !(d_assim > 0.0))
            throw InvalidConfig("dynamics.d_assim must be > 0");
        if (!fin(d_backfire) || d_backfire < d_assim || d_backfire > 2.0)
            throw InvalidConfig("dynamics.d_backfire must be in [d_assim, 2]");
        if (!fin(mu) || mu < 0.0 || mu > 1.0)
            throw InvalidConfig("dynamics.mu must be in [0, 1]");
        if (!fin(lambda) || lambda < 0.0 || lambda > 1.0)
            throw InvalidConfig("dynamics.lambda must be in [0, 1]");
        if (!fin(p_post) || p_post < 0.0 || p_post > 1.0)
            throw InvalidConfig("dynamics.p_post must be in [0, 1]");
        if (!fin(post_noise) || post_noise < 0.0)
            throw InvalidConfig("dynamics.post_noise must be >= 0");
        if (std::isnan(h_accept) || !(h_accept > 0.0))
            throw InvalidConfig("dynamics.h_accept must be > 0");
    }

    bool operator==(const DynamicsParams&) const = default;
};

struct UserState {
    UserId id = 0;
    double opinion = 0.0;
    /// Drawn at initialisation and fixed for the run.
    double resilience = 0.0;

    /// Per-aspect, per-step exposure and sharing values; index = aspect
    /// position in the CWB configuration.
    std::vector<std::vector<Sample>> ce_history;
    std::vector<std::vector<Sample>> cs_history;
    std::vector<Sample> diversity_history;
    std::vector<Sample> satisfaction_trace;
    /// Opinions of the items in each step's feed.
    std::vector<std::vector<double>> feed_opinions;
};

/// One exposure to an item of opinion `c`. Inputs must be finite; the
/// result is clipped to [-1, 1].
inline double update_opinion(double o, double c, const DynamicsParams& p) {
    if (!std::isfinite(o) || !std::isfinite(c))
        throw InvalidInput("update_opinion: non-finite opinion");
    const double delta = c - o;
    const double dist = std::abs(delta);
    double next = o;
    if (dist <= p.d_assim)
        next = o + p.mu * delta;
    else if (dist >= p.d_backfire)
        next = o - p.lambda * delta;
    return clip_opinion(next);
}

/// With probability p_post the user posts an item near their own opinion.
template <class URBG>
std::optional<ContentItem> generate_post(const UserState& u, const DynamicsParams& p, ItemId id,
                                         int step, double toxicity_prevalence, URBG& rng) {
    if (!bernoulli(rng, p.p_post))
        return std::nullopt;
    double opinion = u.opinion;
    if (p.post_noise > 0.0)
        opinion = normal(rng, opinion, p.post_noise);
    return make_item(id, u.id, step, opinion, Source::internal, toxicity_prevalence, rng);
}

inline double acceptance_probability(double user_opinion, double candidate_opinion,
                                     const DynamicsParams& p) {
    return std::exp(-std::abs(user_opinion - candidate_opinion) / p.h_accept);
}

template <class URBG>
bool accept_connection(const UserState& u, double candidate_opinion, const DynamicsParams& p,
                       URBG& rng) {
    return bernoulli(rng, acceptance_probability(u.opinion, candidate_opinion, p));
}

} // namespace cwbsim
