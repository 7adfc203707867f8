#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cwbsim/errors.hpp"
#include "cwbsim/sim.hpp"

namespace cwbsim {

// ---------------------------------------------------------------------------
// Experiment configuration

/// One swept parameter: every arm is repeated for each listed value.
struct SweepAxis {
    std::string key;
    std::vector<double> values;

    bool operator==(const SweepAxis&) const = default;
};

struct SimConfig {
    RunConfig base;
    std::vector<ConnectionKind> recommenders{ConnectionKind::random};
    std::vector<FeedKind> rankers{FeedKind::chronological};
    std::vector<SweepAxis> sweep;
    std::size_t runs = 10;
    std::uint64_t master_seed = 1;
    bool write_graph = false;

    void validate() const;

    bool operator==(const SimConfig&) const = default;
};

/// A fully specified run configuration and its label in the reports.
struct Arm {
    std::string label;
    RunConfig cfg;
    /// Swept (key, value) pairs of this arm, in axis order.
    std::vector<std::pair<std::string, double>> point;
};

// ---------------------------------------------------------------------------
// Values and field table

namespace config_detail {

struct Value;
using Array = std::vector<Value>;

struct Value {
    /// Numbers keep their source text so integers convert exactly.
    struct Number {
        std::string text;
        double value = 0.0;
    };
    std::variant<Number, bool, std::string, Array> v;

    std::string_view type_name() const {
        switch (v.index()) {
        case 0: return "number";
        case 1: return "boolean";
        case 2: return "string";
        default: return "array";
        }
    }
};

inline std::string format_double(double x) {
    if (std::isinf(x))
        return x < 0 ? "-inf" : "inf";
    if (std::isnan(x))
        return "nan";
    // shortest representation that parses back to the same double
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    std::string s(buf, res.ptr);
    // Keep a decimal marker so the echo reads as a float.
    if (s.find_first_of(".eE") == std::string::npos)
        s += ".0";
    return s;
}

inline std::string quote(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        default: out += c;
        }
    }
    return out + "\"";
}

[[noreturn]] inline void type_error(const std::string& key, std::string_view want, const Value& v) {
    throw InvalidConfig(key + ": expected " + std::string(want) + ", got " + std::string(v.type_name()));
}

inline double as_double(const std::string& key, const Value& v) {
    if (const auto* n = std::get_if<Value::Number>(&v.v))
        return n->value;
    type_error(key, "a number", v);
}

inline std::uint64_t as_uint(const std::string& key, const Value& v) {
    const auto* n = std::get_if<Value::Number>(&v.v);
    if (!n)
        type_error(key, "a non-negative integer", v);
    std::uint64_t out = 0;
    const char* b = n->text.data();
    const char* e = b + n->text.size();
    if (b != e && *b == '+')
        ++b;
    auto [p, ec] = std::from_chars(b, e, out);
    if (ec == std::errc() && p == e)
        return out;
    // Integral floats such as 100.0 (as written by sweeps) are accepted too.
    if (std::isfinite(n->value) && n->value >= 0.0 && n->value == std::floor(n->value) &&
        n->value < 18446744073709551616.0)
        return static_cast<std::uint64_t>(n->value);
    throw InvalidConfig(key + ": expected a non-negative integer, got " + n->text);
}

inline std::int64_t as_int(const std::string& key, const Value& v) {
    const auto* n = std::get_if<Value::Number>(&v.v);
    if (!n)
        type_error(key, "an integer", v);
    std::int64_t out = 0;
    const char* b = n->text.data();
    const char* e = b + n->text.size();
    if (b != e && *b == '+')
        ++b;
    auto [p, ec] = std::from_chars(b, e, out);
    if (ec == std::errc() && p == e)
        return out;
    if (std::isfinite(n->value) && n->value == std::floor(n->value) && std::abs(n->value) < 9.0e18)
        return static_cast<std::int64_t>(n->value);
    throw InvalidConfig(key + ": expected an integer, got " + n->text);
}

inline bool as_bool(const std::string& key, const Value& v) {
    if (const auto* b = std::get_if<bool>(&v.v))
        return *b;
    type_error(key, "a boolean", v);
}

inline const std::string& as_string(const std::string& key, const Value& v) {
    if (const auto* s = std::get_if<std::string>(&v.v))
        return *s;
    type_error(key, "a string", v);
}

inline const Array& as_array(const std::string& key, const Value& v) {
    if (const auto* a = std::get_if<Array>(&v.v))
        return *a;
    type_error(key, "an array", v);
}

inline Value number(double x) { return Value{Value::Number{format_double(x), x}}; }

struct Field {
    std::string key;
    /// Numeric fields can be swept.
    bool numeric = false;
    std::function<void(SimConfig&, const Value&)> set;
    std::function<std::string(const SimConfig&)> echo;
};

template <class Get>
Field dbl(std::string key, Get get) {
    return {key, true,
            [key, get](SimConfig& c, const Value& v) { get(c) = as_double(key, v); },
            [get](const SimConfig& c) { return format_double(get(const_cast<SimConfig&>(c))); }};
}

template <class Get>
Field integer(std::string key, Get get) {
    return {key, true,
            [key, get](SimConfig& c, const Value& v) {
                using T = std::remove_reference_t<decltype(get(c))>;
                if constexpr (std::is_unsigned_v<T>) {
                    get(c) = static_cast<T>(as_uint(key, v));
                } else {
                    const auto x = as_int(key, v);
                    if (x < std::numeric_limits<T>::min() || x > std::numeric_limits<T>::max())
                        throw InvalidConfig(key + ": value out of range");
                    get(c) = static_cast<T>(x);
                }
            },
            [get](const SimConfig& c) { return std::to_string(get(const_cast<SimConfig&>(c))); }};
}

template <class Get>
Field boolean(std::string key, Get get) {
    return {key, false, [key, get](SimConfig& c, const Value& v) { get(c) = as_bool(key, v); },
            [get](const SimConfig& c) { return std::string(get(const_cast<SimConfig&>(c)) ? "true" : "false"); }};
}

template <class E, class Get>
Field choice(std::string key, std::vector<std::pair<std::string, E>> names, Get get) {
    return {key, false,
            [key, names, get](SimConfig& c, const Value& v) {
                const auto& s = as_string(key, v);
                for (const auto& [n, e] : names)
                    if (n == s) {
                        get(c) = e;
                        return;
                    }
                std::string allowed;
                for (const auto& [n, e] : names)
                    allowed += (allowed.empty() ? "" : ", ") + n;
                throw InvalidConfig(key + ": unknown value \"" + s + "\" (expected one of " + allowed + ")");
            },
            [names, get](const SimConfig& c) {
                for (const auto& [n, e] : names)
                    if (get(const_cast<SimConfig&>(c)) == e)
                        return quote(n);
                return quote("?");
            }};
}

inline double& aspect_weight(SimConfig& c, std::string_view name) {
    for (auto& aw : c.base.cwb.aspects)
        if (aw.aspect.name == name)
            return aw.weight;
    c.base.cwb.aspects.push_back({Aspect{std::string(name), Polarity::harmful}, 0.0});
    return c.base.cwb.aspects.back().weight;
}

inline void detector_fields(std::vector<Field>& f, const std::string& prefix,
                            DetectorParams& (*get)(SimConfig&)) {
    f.push_back(dbl(prefix + ".tpr", [get](SimConfig& c) -> double& { return get(c).tpr; }));
    f.push_back(dbl(prefix + ".fpr", [get](SimConfig& c) -> double& { return get(c).fpr; }));
    f.push_back(dbl(prefix + ".threshold", [get](SimConfig& c) -> double& { return get(c).threshold; }));
}

inline std::vector<Field> make_fields() {
    std::vector<Field> f;
    // run
    f.push_back(integer("run.steps", [](SimConfig& c) -> int& { return c.base.steps; }));
    f.push_back(integer("run.runs", [](SimConfig& c) -> std::size_t& { return c.runs; }));
    f.push_back(integer("run.seed", [](SimConfig& c) -> std::uint64_t& { return c.master_seed; }));
    f.push_back(boolean("run.write_graph", [](SimConfig& c) -> bool& { return c.write_graph; }));
    f.push_back({"run.recommenders", false,
                 [](SimConfig& c, const Value& v) {
                     const std::string key = "run.recommenders";
                     c.recommenders.clear();
                     for (const auto& x : as_array(key, v)) {
                         auto k = parse_connection_kind(as_string(key, x));
                         if (!k)
                             throw InvalidConfig(key + ": unknown recommender \"" + as_string(key, x) +
                                                 "\" (expected random, overlap or diversified)");
                         c.recommenders.push_back(*k);
                     }
                 },
                 [](const SimConfig& c) {
                     std::string s = "[";
                     for (std::size_t i = 0; i < c.recommenders.size(); ++i)
                         s += (i ? ", " : "") + quote(to_string(c.recommenders[i]));
                     return s + "]";
                 }});
    f.push_back({"run.rankers", false,
                 [](SimConfig& c, const Value& v) {
                     const std::string key = "run.rankers";
                     c.rankers.clear();
                     for (const auto& x : as_array(key, v)) {
                         auto k = parse_feed_kind(as_string(key, x));
                         if (!k)
                             throw InvalidConfig(key + ": unknown ranker \"" + as_string(key, x) +
                                                 "\" (expected chronological or cwbrs)");
                         c.rankers.push_back(*k);
                     }
                 },
                 [](const SimConfig& c) {
                     std::string s = "[";
                     for (std::size_t i = 0; i < c.rankers.size(); ++i)
                         s += (i ? ", " : "") + quote(to_string(c.rankers[i]));
                     return s + "]";
                 }});
    // graph
    f.push_back(integer("graph.n", [](SimConfig& c) -> std::size_t& { return c.base.graph.n; }));
    f.push_back(integer("graph.m", [](SimConfig& c) -> std::size_t& { return c.base.graph.m; }));
    f.push_back(dbl("graph.h", [](SimConfig& c) -> double& { return c.base.graph.h; }));
    // dynamics
    f.push_back(dbl("dynamics.d_assim", [](SimConfig& c) -> double& { return c.base.dynamics.d_assim; }));
    f.push_back(dbl("dynamics.d_backfire", [](SimConfig& c) -> double& { return c.base.dynamics.d_backfire; }));
    f.push_back(dbl("dynamics.mu", [](SimConfig& c) -> double& { return c.base.dynamics.mu; }));
    f.push_back(dbl("dynamics.lambda", [](SimConfig& c) -> double& { return c.base.dynamics.lambda; }));
    f.push_back(dbl("dynamics.p_post", [](SimConfig& c) -> double& { return c.base.dynamics.p_post; }));
    f.push_back(dbl("dynamics.post_noise", [](SimConfig& c) -> double& { return c.base.dynamics.post_noise; }));
    f.push_back(dbl("dynamics.h_accept", [](SimConfig& c) -> double& { return c.base.dynamics.h_accept; }));
    // content
    f.push_back(dbl("content.internal_toxicity",
                    [](SimConfig& c) -> double& { return c.base.content.internal_toxicity; }));
    f.push_back(integer("content.exogenous_per_user",
                        [](SimConfig& c) -> std::size_t& { return c.base.content.exogenous_per_user; }));
    f.push_back(dbl("content.exogenous_toxicity",
                    [](SimConfig& c) -> double& { return c.base.content.exogenous_toxicity; }));
    f.push_back(dbl("content.exogenous_opinion_min",
                    [](SimConfig& c) -> double& { return c.base.content.exogenous_opinion_min; }));
    f.push_back(dbl("content.exogenous_opinion_max",
                    [](SimConfig& c) -> double& { return c.base.content.exogenous_opinion_max; }));
    f.push_back(integer("content.pool_window", [](SimConfig& c) -> int& { return c.base.content.pool_window; }));
    detector_fields(f, "detector.toxicity",
                    [](SimConfig& c) -> DetectorParams& { return c.base.content.toxicity_detector; });
    detector_fields(f, "detector.extremity",
                    [](SimConfig& c) -> DetectorParams& { return c.base.content.extremity_detector; });
    // recommender
    f.push_back(integer("recommender.order", [](SimConfig& c) -> int& { return c.base.recommender.order; }));
    f.push_back(dbl("recommender.p_rec", [](SimConfig& c) -> double& { return c.base.recommender.p_rec; }));
    f.push_back(boolean("recommender.remember_declined",
                        [](SimConfig& c) -> bool& { return c.base.recommender.remember_declined; }));
    // ranker
    f.push_back(integer("ranker.feed_size", [](SimConfig& c) -> std::size_t& { return c.base.ranker.feed_size; }));
    f.push_back(dbl("ranker.s_min", [](SimConfig& c) -> double& { return c.base.ranker.s_min; }));
    f.push_back(dbl("ranker.extremity_threshold",
                    [](SimConfig& c) -> double& { return c.base.ranker.thresholds.extremity; }));
    f.push_back(dbl("ranker.diversity_threshold",
                    [](SimConfig& c) -> double& { return c.base.ranker.thresholds.diversity; }));
    f.push_back(dbl("ranker.bandit_epsilon", [](SimConfig& c) -> double& { return c.base.ranker.bandit_epsilon; }));
    f.push_back(boolean("ranker.harm_gate", [](SimConfig& c) -> bool& { return c.base.ranker.harm_gate; }));
    f.push_back(choice<Measurement>("ranker.extremity_source",
                                    {{"truth", Measurement::truth}, {"detected", Measurement::detected}},
                                    [](SimConfig& c) -> Measurement& { return c.base.ranker.extremity_source; }));
    // cwb
    f.push_back(dbl("cwb.weight_extremity", [](SimConfig& c) -> double& { return aspect_weight(c, kExtremity); }));
    f.push_back(dbl("cwb.weight_toxicity", [](SimConfig& c) -> double& { return aspect_weight(c, kToxicity); }));
    f.push_back(dbl("cwb.weight_diversity", [](SimConfig& c) -> double& { return c.base.cwb.diversity_weight; }));
    f.push_back(dbl("cwb.weight_connection", [](SimConfig& c) -> double& { return c.base.cwb.connection_weight; }));
    f.push_back(integer("cwb.window", [](SimConfig& c) -> int& { return c.base.cwb.window; }));
    f.push_back(dbl("cwb.q", [](SimConfig& c) -> double& { return c.base.cwb.q; }));
    f.push_back(dbl("cwb.q_inf", [](SimConfig& c) -> double& { return c.base.cwb.q_inf; }));
    f.push_back(dbl("cwb.beta", [](SimConfig& c) -> double& { return c.base.cwb.beta; }));
    f.push_back(integer("cwb.bins", [](SimConfig& c) -> int& { return c.base.cwb.bins; }));
    f.push_back(dbl("cwb.exogenous_weight", [](SimConfig& c) -> double& { return c.base.cwb.exogenous_weight; }));
    f.push_back(boolean("cwb.resilience_weighting",
                        [](SimConfig& c) -> bool& { return c.base.cwb.resilience_weighting; }));
    f.push_back(choice<TimeMode>("cwb.time_mode", {{"windowed", TimeMode::windowed}, {"ema", TimeMode::ema}},
                                 [](SimConfig& c) -> TimeMode& { return c.base.cwb.time_mode; }));
    f.push_back(dbl("cwb.ema_alpha", [](SimConfig& c) -> double& { return c.base.cwb.ema_alpha; }));
    f.push_back(choice<MeasureSource>("cwb.measure",
                                      {{"truth", MeasureSource::truth},
                                       {"detected", MeasureSource::detected},
                                       {"debiased", MeasureSource::debiased}},
                                      [](SimConfig& c) -> MeasureSource& { return c.base.cwb.measure; }));
    f.push_back(boolean("cwb.pooled_diversity", [](SimConfig& c) -> bool& { return c.base.cwb.pooled_diversity; }));
    f.push_back(choice<CcRule>("cwb.cc_rule", {{"opinion", CcRule::opinion}, {"exposure", CcRule::exposure}},
                               [](SimConfig& c) -> CcRule& { return c.base.cwb.cc_rule; }));
    return f;
}

inline const std::vector<Field>& fields() {
    static const std::vector<Field> f = make_fields();
    return f;
}

inline const Field* find_field(std::string_view key) {
    for (const auto& f : fields())
        if (f.key == key)
            return &f;
    return nullptr;
}

} // namespace config_detail

/// Every accepted configuration key, in echo order.
inline std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& f : config_detail::fields())
        out.push_back(f.key);
    return out;
}

/// Sets one numeric field by key path, as sweeps do.
inline void set_numeric(SimConfig& c, std::string_view key, double value) {
    const auto* f = config_detail::find_field(key);
    if (!f || !f->numeric)
        throw InvalidConfig("sweep." + std::string(key) + ": not a numeric configuration key");
    f->set(c, config_detail::number(value));
}

inline void SimConfig::validate() const {
    if (runs < 1)
        throw InvalidConfig("run.runs must be >= 1");
    if (recommenders.empty())
        throw InvalidConfig("run.recommenders must not be empty");
    if (rankers.empty())
        throw InvalidConfig("run.rankers must not be empty");
    base.validate();
    std::set<std::string> seen;
    for (const auto& ax : sweep) {
        if (!seen.insert(ax.key).second)
            throw InvalidConfig("sweep." + ax.key + ": duplicate axis");
        if (ax.values.empty())
            throw InvalidConfig("sweep." + ax.key + ": needs at least one value");
        const auto* f = config_detail::find_field(ax.key);
        if (!f || !f->numeric)
            throw InvalidConfig("sweep." + ax.key + ": not a numeric configuration key");
        // Every grid point must itself be a valid configuration.
        for (double v : ax.values) {
            SimConfig probe = *this;
            probe.sweep.clear();
            set_numeric(probe, ax.key, v);
            try {
                probe.base.validate();
            } catch (const InvalidConfig& e) {
                throw InvalidConfig("sweep." + ax.key + " = " + config_detail::format_double(v) + ": " +
                                    e.what());
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Arms

/// Cartesian product of recommenders, rankers and sweep values. Labels name
/// the recommender, then the ranker when several are compared, then each
/// swept value.
inline std::vector<Arm> expand_arms(const SimConfig& c) {
    std::vector<Arm> arms;
    for (auto rk : c.recommenders)
        for (auto fk : c.rankers) {
            Arm a;
            a.cfg = c.base;
            a.cfg.recommender.kind = rk;
            a.cfg.ranker.kind = fk;
            a.label = std::string(to_string(rk));
            if (c.rankers.size() > 1)
                a.label += "/" + std::string(to_string(fk));
            arms.push_back(std::move(a));
        }
    for (const auto& ax : c.sweep) {
        std::vector<Arm> next;
        for (const auto& a : arms)
            for (double v : ax.values) {
                SimConfig tmp;
                tmp.base = a.cfg;
                set_numeric(tmp, ax.key, v);
                char buf[64];
                std::snprintf(buf, sizeof buf, "%g", v);
                auto point = a.point;
                point.emplace_back(ax.key, v);
                next.push_back({a.label + "/" + ax.key + "=" + buf, tmp.base, std::move(point)});
            }
        arms = std::move(next);
    }
    return arms;
}

// ---------------------------------------------------------------------------
// Parser for the TOML subset used by configuration files: [table] headers,
// bare and dotted keys, numbers (including inf), booleans, strings and
// single-line arrays.

namespace config_detail {

class Parser {
public:
    Parser(std::string_view text, std::string origin) : text_(text), origin_(std::move(origin)) {}

    std::vector<std::pair<std::string, Value>> parse() {
        std::vector<std::pair<std::string, Value>> out;
        std::string table;
        std::set<std::string> keys;
        std::size_t pos = 0;
        while (pos <= text_.size()) {
            auto nl = text_.find('\n', pos);
            if (nl == std::string_view::npos)
                nl = text_.size();
            line_ = text_.substr(pos, nl - pos);
            if (!line_.empty() && line_.back() == '\r')
                line_.remove_suffix(1);
            i_ = 0;
            ++lineno_;
            skip_ws();
            if (!at_end() && line_[i_] != '#') {
                if (line_[i_] == '[') {
                    ++i_;
                    if (!at_end() && line_[i_] == '[')
                        fail("arrays of tables are not supported");
                    table = dotted_key();
                    skip_ws();
                    expect(']');
                } else {
                    std::string key = dotted_key();
                    skip_ws();
                    expect('=');
                    skip_ws();
                    Value v = value();
                    const std::string full = table.empty() ? key : table + "." + key;
                    if (!keys.insert(full).second)
                        fail("duplicate key '" + full + "'");
                    out.emplace_back(full, std::move(v));
                }
                skip_ws();
                if (!at_end() && line_[i_] != '#')
                    fail("unexpected trailing characters");
            }
            pos = nl + 1;
        }
        return out;
    }

private:
    std::string_view text_;
    std::string origin_;
    std::string_view line_;
    std::size_t i_ = 0;
    int lineno_ = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw InvalidConfig(origin_ + ":" + std::to_string(lineno_) + ": " + msg);
    }
    bool at_end() const { return i_ >= line_.size(); }
    void skip_ws() {
        while (!at_end() && (line_[i_] == ' ' || line_[i_] == '\t'))
            ++i_;
    }
    void expect(char c) {
        if (at_end() || line_[i_] != c)
            fail(std::string("expected '") + c + "'");
        ++i_;
    }

    std::string bare_or_quoted_key() {
        skip_ws();
        if (!at_end() && (line_[i_] == '"' || line_[i_] == '\''))
            return string_literal();
        const std::size_t start = i_;
        while (!at_end()) {
            const char c = line_[i_];
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')
                ++i_;
            else
                break;
        }
        if (i_ == start)
            fail("expected a key");
        return std::string(line_.substr(start, i_ - start));
    }

    std::string dotted_key() {
        std::string key = bare_or_quoted_key();
        skip_ws();
        while (!at_end() && line_[i_] == '.') {
            ++i_;
            key += "." + bare_or_quoted_key();
            skip_ws();
        }
        return key;
    }

    std::string string_literal() {
        const char q = line_[i_++];
        std::string s;
        while (true) {
            if (at_end())
                fail("unterminated string");
            const char c = line_[i_++];
            if (c == q)
                return s;
            if (q == '"' && c == '\\') {
                if (at_end())
                    fail("unterminated escape");
                const char e = line_[i_++];
                switch (e) {
                case '"': s += '"'; break;
                case '\\': s += '\\'; break;
                case 'n': s += '\n'; break;
                case 't': s += '\t'; break;
                case 'r': s += '\r'; break;
                default: fail(std::string("unsupported escape \\") + e);
                }
            } else {
                s += c;
            }
        }
    }

    Value value() {
        if (at_end())
            fail("missing value");
        const char c = line_[i_];
        if (c == '"' || c == '\'')
            return Value{string_literal()};
        if (c == '[') {
            ++i_;
            Array arr;
            skip_ws();
            if (!at_end() && line_[i_] == ']') {
                ++i_;
                return Value{std::move(arr)};
            }
            while (true) {
                skip_ws();
                if (at_end())
                    fail("unterminated array (arrays must fit on one line)");
                if (line_[i_] == ']') { // trailing comma
                    ++i_;
                    break;
                }
                arr.push_back(value());
                skip_ws();
                if (at_end())
                    fail("unterminated array (arrays must fit on one line)");
                if (line_[i_] == ',') {
                    ++i_;
                    continue;
                }
                expect(']');
                break;
            }
            return Value{std::move(arr)};
        }
        const std::size_t start = i_;
        while (!at_end() && line_[i_] != ',' && line_[i_] != ']' && line_[i_] != '#' && line_[i_] != ' ' &&
               line_[i_] != '\t')
            ++i_;
        std::string tok(line_.substr(start, i_ - start));
        if (tok == "true")
            return Value{true};
        if (tok == "false")
            return Value{false};
        return Value{parse_number(tok)};
    }

    Value::Number parse_number(const std::string& tok) {
        std::string clean;
        for (std::size_t k = 0; k < tok.size(); ++k) {
            if (tok[k] == '_') {
                if (k == 0 || k + 1 == tok.size() || !std::isdigit(static_cast<unsigned char>(tok[k - 1])) ||
                    !std::isdigit(static_cast<unsigned char>(tok[k + 1])))
                    fail("invalid number '" + tok + "'");
                continue;
            }
            clean += tok[k];
        }
        std::string_view body = clean;
        const bool neg = !body.empty() && body.front() == '-';
        if (!body.empty() && (body.front() == '-' || body.front() == '+'))
            body.remove_prefix(1);
        if (body == "inf")
            return {clean, neg ? -HUGE_VAL : HUGE_VAL};
        if (body == "nan")
            return {clean, std::nan("")};
        bool ok = !body.empty();
        for (char ch : body)
            if (!(std::isdigit(static_cast<unsigned char>(ch)) || ch == '.' || ch == 'e' || ch == 'E' ||
                  ch == '+' || ch == '-'))
                ok = false;
        if (ok && !std::isdigit(static_cast<unsigned char>(body.front())))
            ok = false;
        if (ok) {
            char* end = nullptr;
            const double x = std::strtod(clean.c_str(), &end);
            if (end == clean.c_str() + clean.size())
                return {clean, x};
        }
        fail("invalid value '" + tok + "'");
    }
};

} // namespace config_detail

/// Parses configuration text. Unset keys keep their defaults; the result is
/// validated before it is returned.
inline SimConfig parse_config_text(std::string_view text, const std::string& origin = "<config>",
                                   SimConfig base = {}) {
    using namespace config_detail;
    auto entries = Parser(text, origin).parse();
    SimConfig c = std::move(base);
    std::vector<SweepAxis> sweep;
    bool sweep_set = false;
    for (const auto& [key, v] : entries) {
        if (key.rfind("sweep.", 0) == 0) {
            const std::string target = key.substr(6);
            const auto* f = find_field(target);
            if (!f || !f->numeric)
                throw InvalidConfig(origin + ": " + key + ": not a numeric configuration key");
            SweepAxis ax{target, {}};
            for (const auto& x : as_array(key, v))
                ax.values.push_back(as_double(key, x));
            sweep.push_back(std::move(ax));
            sweep_set = true;
            continue;
        }
        const auto* f = find_field(key);
        if (!f)
            throw InvalidConfig(origin + ": unknown key '" + key + "'");
        try {
            f->set(c, v);
        } catch (const InvalidConfig& e) {
            throw InvalidConfig(origin + ": " + e.what());
        }
    }
    if (sweep_set)
        c.sweep = std::move(sweep);
    try {
        c.validate();
    } catch (const InvalidConfig& e) {
        throw InvalidConfig(origin + ": " + e.what());
    }
    return c;
}

inline SimConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad())
        throw IoError("error reading config file " + path.string());
    return parse_config_text(ss.str(), path.string());
}

/// The effective configuration in the file format; parsing it back yields
/// an equal configuration.
inline std::string echo_config(const SimConfig& c) {
    using namespace config_detail;
    std::string out;
    std::string table;
    for (const auto& f : fields()) {
        const auto dot = f.key.rfind('.');
        const std::string t = f.key.substr(0, dot);
        if (t != table) {
            out += (out.empty() ? "" : "\n") + std::string("[") + t + "]\n";
            table = t;
        }
        out += f.key.substr(dot + 1) + " = " + f.echo(c) + "\n";
    }
    if (!c.sweep.empty())
        out += "\n[sweep]\n";
    for (const auto& ax : c.sweep) {
        out += ax.key + " = [";
        for (std::size_t i = 0; i < ax.values.size(); ++i)
            out += (i ? ", " : "") + format_double(ax.values[i]);
        out += "]\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Presets

inline SimConfig preset_fig6() {
    SimConfig c;
    c.base.graph.n = 100;
    c.runs = 10;
    c.recommenders = {ConnectionKind::random, ConnectionKind::overlap, ConnectionKind::diversified};
    c.rankers = {FeedKind::chronological};
    c.base.content.exogenous_per_user = 0;
    return c;
}

/// Chronological feed against CWB-RS with an exogenous stream that carries
/// toxic items at prevalence 0.2.
inline SimConfig preset_cwbrs_vs_chrono() {
    SimConfig c;
    c.base.graph.n = 100;
    c.runs = 10;
    c.recommenders = {ConnectionKind::random};
    c.rankers = {FeedKind::chronological, FeedKind::cwbrs};
    c.base.content.exogenous_per_user = 5;
    c.base.content.exogenous_toxicity = 0.2;
    c.base.ranker.s_min = 0.5;
    return c;
}

/// fig6 recommenders over a backfire threshold x backfire rate grid.
inline SimConfig preset_sensitivity() {
    SimConfig c = preset_fig6();
    c.runs = 5;
    c.sweep = {{"dynamics.d_backfire", {0.6, 0.8, 1.0, 1.2}}, {"dynamics.lambda", {0.02, 0.05, 0.1}}};
    return c;
}

struct PresetInfo {
    std::string name;
    std::string description;
    SimConfig (*make)();
};

inline const std::vector<PresetInfo>& presets() {
    static const std::vector<PresetInfo> p{
        {"fig6", "random, overlap and diversified contact recommenders, 100 users, 10 runs", preset_fig6},
        {"cwbrs-vs-chrono", "chronological vs CWB-RS feed with an exogenous toxic stream (prevalence 0.2)",
         preset_cwbrs_vs_chrono},
        {"sensitivity", "fig6 recommenders over a d_backfire x lambda grid, 5 runs per cell", preset_sensitivity},
    };
    return p;
}

inline SimConfig preset(std::string_view name) {
    for (const auto& p : presets())
        if (p.name == name)
            return p.make();
    throw NotFound("unknown preset '" + std::string(name) + "'");
}

} // namespace cwbsim
