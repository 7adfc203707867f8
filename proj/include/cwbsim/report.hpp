#pragma once

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cwbsim/config.hpp"
#include "cwbsim/cwb.hpp"
#include "cwbsim/errors.hpp"
#include "cwbsim/network.hpp"
#include "cwbsim/sim.hpp"

namespace cwbsim {

struct ArmResult {
    Arm arm;
    EnsembleStats stats;
};

/// Runs every arm of the experiment with the same master seed, so arms see
/// the same initial graphs and opinions.
inline std::vector<ArmResult> run_experiment(const SimConfig& c, unsigned threads = 1,
                                             const std::function<void(const Arm&)>& on_arm = {}) {
    c.validate();
    std::vector<ArmResult> out;
    for (auto& arm : expand_arms(c)) {
        if (on_arm)
            on_arm(arm);
        auto stats = run_ensemble(arm.cfg, c.master_seed, c.runs, threads);
        out.push_back({std::move(arm), std::move(stats)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Writers

inline void write_metrics_csv_header(std::ostream& os) { os << "step,recommender,metric,mean,std\n"; }

/// Long-format rows for the core metrics, ordered by step, arm, metric.
/// std is empty when fewer than two runs define the value.
inline void write_metrics_csv(std::ostream& os, const std::vector<ArmResult>& results) {
    write_metrics_csv_header(os);
    const auto& core = core_metric_names();
    std::size_t steps = 0;
    for (const auto& r : results)
        steps = std::max(steps, r.stats.steps.size());
    for (std::size_t t = 0; t < steps; ++t)
        for (const auto& r : results) {
            if (t >= r.stats.steps.size())
                continue;
            for (std::size_t m = 0; m < core.size(); ++m) {
                const auto& ms = r.stats.steps[t][m];
                os << t << ',' << r.arm.label << ',' << core[m] << ',' << format_value(ms.mean) << ','
                   << (ms.std_defined ? format_value(ms.std) : std::string()) << '\n';
            }
        }
}

inline nlohmann::ordered_json summary_json(const std::vector<ArmResult>& results, const SimConfig& c) {
    using nlohmann::ordered_json;
    auto sample = [](const Sample& s) -> ordered_json {
        if (!s || !std::isfinite(*s))
            return nullptr;
        return *s;
    };
    ordered_json j;
    j["master_seed"] = c.master_seed;
    j["runs"] = c.runs;
    j["steps"] = c.base.steps;
    ordered_json arms = ordered_json::array();
    for (const auto& r : results) {
        ordered_json a;
        a["label"] = r.arm.label;
        a["recommender"] = std::string(to_string(r.arm.cfg.recommender.kind));
        a["ranker"] = std::string(to_string(r.arm.cfg.ranker.kind));
        if (!r.arm.point.empty()) {
            ordered_json p;
            for (const auto& [k, v] : r.arm.point)
                p[k] = v;
            a["sweep"] = std::move(p);
        }
        ordered_json fin = ordered_json::object();
        if (!r.stats.steps.empty()) {
            a["final_step"] = r.stats.steps.size() - 1;
            const auto& last = r.stats.steps.back();
            for (std::size_t m = 0; m < r.stats.metric_names.size(); ++m) {
                const auto& ms = last[m];
                fin[r.stats.metric_names[m]] = {{"mean", sample(ms.mean)},
                                                {"std", ms.std_defined ? ordered_json(ms.std) : ordered_json()},
                                                {"n", ms.n},
                                                {"std_defined", ms.std_defined}};
            }
        } else {
            a["final_step"] = nullptr;
        }
        a["final"] = std::move(fin);
        arms.push_back(std::move(a));
    }
    j["arms"] = std::move(arms);
    j["config"] = echo_config(c);
    return j;
}

/// Turns an arm label into a file-name fragment.
inline std::string file_stem(std::string_view label) {
    std::string s;
    for (char ch : label)
        s += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '-') ? ch : '_';
    return s;
}

namespace report_detail {

template <class Fn>
void write_file(const std::filesystem::path& path, Fn&& fill) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
        throw IoError("cannot open " + path.string() + " for writing");
    fill(os);
    os.flush();
    if (!os)
        throw IoError("write failed: " + path.string());
}

} // namespace report_detail

struct ReportFiles {
    std::vector<std::filesystem::path> written;
};

/// Writes metrics.csv, summary.json, config.effective.toml and, per arm,
/// the final CWB report of run 0 (cwb/<arm>.json and .csv). With
/// write_graph set the final graph and node attributes of run 0 are also
/// written.
inline ReportFiles emit_reports(const std::vector<ArmResult>& results, const SimConfig& c,
                                const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    using report_detail::write_file;
    ReportFiles files;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir))
        throw IoError("cannot create output directory " + out_dir.string() +
                      (ec ? ": " + ec.message() : std::string()));

    auto emit = [&](const fs::path& p, auto&& fill) {
        write_file(p, fill);
        files.written.push_back(p);
    };
    emit(out_dir / "metrics.csv", [&](std::ostream& os) { write_metrics_csv(os, results); });
    emit(out_dir / "summary.json",
         [&](std::ostream& os) { os << summary_json(results, c).dump(2) << '\n'; });
    emit(out_dir / "config.effective.toml", [&](std::ostream& os) { os << echo_config(c); });

    bool any_report = false;
    for (const auto& r : results)
        any_report = any_report || (!r.stats.traces.empty() && r.stats.traces.front().final_report);
    if (any_report) {
        const fs::path dir = out_dir / "cwb";
        fs::create_directories(dir, ec);
        if (ec)
            throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
        for (const auto& r : results) {
            if (r.stats.traces.empty() || !r.stats.traces.front().final_report)
                continue;
            const auto& rep = *r.stats.traces.front().final_report;
            const auto stem = file_stem(r.arm.label);
            emit(dir / (stem + ".json"), [&](std::ostream& os) { os << to_json(rep).dump(2) << '\n'; });
            emit(dir / (stem + ".csv"), [&](std::ostream& os) {
                write_report_csv_header(os);
                write_report_csv(os, rep);
            });
        }
    }

    if (c.write_graph)
        for (const auto& r : results) {
            if (r.stats.traces.empty())
                continue;
            const auto& tr = r.stats.traces.front();
            const auto stem = file_stem(r.arm.label);
            emit(out_dir / ("graph_final." + stem + ".edgelist"),
                 [&](std::ostream& os) { write_edgelist(os, tr.final_graph); });
            emit(out_dir / ("nodes_final." + stem + ".csv"),
                 [&](std::ostream& os) { write_node_attributes(os, tr.final_opinions, tr.resilience); });
        }
    return files;
}

} // namespace cwbsim
