#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cwbsim/errors.hpp"
#include "cwbsim/network.hpp"
#include "cwbsim/random.hpp"

namespace cwbsim {

using ItemId = std::uint64_t;

enum class Polarity { harmful, beneficial };
enum class Source { internal, external };

struct Aspect {
    std::string name;
    Polarity polarity = Polarity::harmful;

    bool operator==(const Aspect&) const = default;
};

inline constexpr std::string_view kExtremity = "extremity";
inline constexpr std::string_view kToxicity = "toxicity";

inline Aspect extremity_aspect() { return {std::string(kExtremity), Polarity::harmful}; }
inline Aspect toxicity_aspect() { return {std::string(kToxicity), Polarity::harmful}; }

/// A post or an injected external item. Immutable once created.
struct ContentItem {
    ItemId id = 0;
    std::optional<UserId> author; // empty for external items
    int step = 0;
    double opinion = 0.0;
    Source source = Source::internal;
    /// Stored ground truth for aspects that are not derived from the opinion.
    std::map<std::string, double, std::less<>> aspect_truth;
    /// Labels emitted by the simulated detectors, keyed by aspect name.
    std::map<std::string, bool, std::less<>> detected;
};

/// Confusion-matrix model of an imperfect binary detector.
struct DetectorParams {
    double tpr = 1.0;
    double fpr = 0.0;
    /// Truth scores at or above this count as ground-truth positive.
    double threshold = 0.5;

    void validate(std::string_view key) const {
        auto in01 = [](double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; };
        if (!in01(tpr))
            throw InvalidConfig(std::string(key) + ".tpr must be in [0, 1]");
        if (!in01(fpr))
            throw InvalidConfig(std::string(key) + ".fpr must be in [0, 1]");
        if (!in01(threshold))
            throw InvalidConfig(std::string(key) + ".threshold must be in [0, 1]");
    }

    bool operator==(const DetectorParams&) const = default;
};

inline double clip_opinion(double o) { return o < -1.0 ? -1.0 : (o > 1.0 ? 1.0 : o); }

/// Extremity is |opinion|; every other aspect must be stored on the item.
inline double true_aspect_score(const ContentItem& item, std::string_view aspect) {
    if (aspect == kExtremity)
        return std::abs(item.opinion);
    auto it = item.aspect_truth.find(aspect);
    if (it == item.aspect_truth.end())
        throw NotFound("aspect '" + std::string(aspect) + "' not scored on item " +
                       std::to_string(item.id));
    return it->second;
}

inline bool truth_label(const ContentItem& item, std::string_view aspect, const DetectorParams& dp) {
    return true_aspect_score(item, aspect) >= dp.threshold;
}

template <class URBG>
bool noisy_detect(const ContentItem& item, std::string_view aspect, const DetectorParams& dp,
                  URBG& rng) {
    return bernoulli(rng, truth_label(item, aspect, dp) ? dp.tpr : dp.fpr);
}

/// Fraction of items flagged by the detector.
template <class URBG>
double measured_prevalence(std::span<const ContentItem> items, std::string_view aspect,
                           const DetectorParams& dp, URBG& rng) {
    if (items.empty())
        throw UndefinedMeasure("prevalence of an empty collection");
    std::size_t flagged = 0;
    for (const auto& item : items)
        flagged += noisy_detect(item, aspect, dp, rng) ? 1 : 0;
    return static_cast<double>(flagged) / static_cast<double>(items.size());
}

/// Expected measured prevalence at true prevalence p.
inline double expected_measured_prevalence(double p, const DetectorParams& dp) {
    return dp.tpr * p + dp.fpr * (1.0 - p);
}

/// Inverts the affine law: (measured - fpr) / (tpr - fpr). Not clamped.
inline double debias_prevalence(double measured, const DetectorParams& dp) {
    if (dp.tpr == dp.fpr)
        throw UndefinedMeasure("detector with tpr == fpr carries no information");
    return (measured - dp.fpr) / (dp.tpr - dp.fpr);
}

/// Creates an item with a Bernoulli(toxicity_prevalence) toxicity truth of 0 or 1.
template <class URBG>
ContentItem make_item(ItemId id, std::optional<UserId> author, int step, double opinion,
                      Source source, double toxicity_prevalence, URBG& rng) {
    ContentItem item;
    item.id = id;
    item.author = author;
    item.step = step;
    item.opinion = clip_opinion(opinion);
    item.source = source;
    item.aspect_truth.emplace(std::string(kToxicity), bernoulli(rng, toxicity_prevalence) ? 1.0 : 0.0);
    return item;
}

} // namespace cwbsim
