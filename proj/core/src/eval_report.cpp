#include "fruitmap/eval_report.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "fruitmap/errors.hpp"
#include "fruitmap/json_io.hpp"

namespace fruitmap {

using nlohmann::json;

MatchResult match_fruitlets(const BranchMap& map, const GroundTruth& truth, double tolerance) {
    if (!(tolerance >= 0.0) || !std::isfinite(tolerance)) {
        throw DomainError(fmt::format("match tolerance must be >= 0, got {}", tolerance));
    }
    std::vector<MatchPair> candidates;
    for (const auto& t : map.tracks) {
        for (const auto& g : truth.fruitlets) {
            const double d = (t.center - g.center).norm();
            if (d <= tolerance) {
                candidates.push_back({t.id, g.id, d});
            }
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const MatchPair& a, const MatchPair& b) {
        return std::tie(a.distance, a.track_id, a.truth_id) < std::tie(b.distance, b.track_id, b.truth_id);
    });
    MatchResult out;
    std::set<int> used_tracks;
    std::set<int> used_truth;
    for (const auto& c : candidates) {
        if (used_tracks.contains(c.track_id) || used_truth.contains(c.truth_id)) {
            continue;
        }
        used_tracks.insert(c.track_id);
        used_truth.insert(c.truth_id);
        out.pairs.push_back(c);
    }
    for (const auto& t : map.tracks) {
        if (!used_tracks.contains(t.id)) {
            out.unmatched_tracks.push_back(t.id);
        }
    }
    for (const auto& g : truth.fruitlets) {
        if (!used_truth.contains(g.id)) {
            out.unmatched_truth.push_back(g.id);
        }
    }
    return out;
}

double f1_score(double precision, double recall) {
    const double s = precision + recall;
    return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

Prf precision_recall_f1(int tp, int fp, int fn) {
    if (tp < 0 || fp < 0 || fn < 0) {
        throw DomainError(fmt::format("counts must be non-negative (tp {}, fp {}, fn {})", tp, fp, fn));
    }
    Prf out;
    out.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    out.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    out.f1 = f1_score(out.precision, out.recall);
    return out;
}

double count_accuracy(int calculated, int ground_truth) {
    if (ground_truth <= 0) {
        throw DomainError(fmt::format("ground-truth count must be positive, got {}", ground_truth));
    }
    return (1.0 - std::abs(static_cast<double>(calculated - ground_truth)) / ground_truth) * 100.0;
}

std::string_view to_string(RmseMode mode) { return mode == RmseMode::Relative ? "relative" : "normalized"; }

RmseMode parse_rmse_mode(std::string_view text) {
    if (text == "relative") {
        return RmseMode::Relative;
    }
    if (text == "normalized") {
        return RmseMode::Normalized;
    }
    throw ValidationError(fmt::format("unknown RMSE mode '{}' (expected relative or normalized)", text));
}

double size_rmse_percent(const std::vector<SizePair>& pairs, RmseMode mode) {
    if (pairs.empty()) {
        throw DomainError("size RMSE needs at least one matched pair");
    }
    double sq = 0.0;
    double truth_sum = 0.0;
    for (const auto& p : pairs) {
        if (!(p.truth_diameter > 0.0)) {
            throw DomainError(fmt::format("truth diameter must be positive, got {}", p.truth_diameter));
        }
        const double err = p.estimated_diameter - p.truth_diameter;
        sq += mode == RmseMode::Relative ? (err / p.truth_diameter) * (err / p.truth_diameter) : err * err;
        truth_sum += p.truth_diameter;
    }
    const double n = static_cast<double>(pairs.size());
    const double rmse = std::sqrt(sq / n);
    return mode == RmseMode::Relative ? 100.0 * rmse : 100.0 * rmse / (truth_sum / n);
}

EvalReport evaluate(const BranchMap& map, const GroundTruth& truth, double tolerance, RmseMode mode,
                    std::string scan) {
    if (coordinate_frame(map.frame_label) != Side::A) {
        throw ValidationError(
            fmt::format("map frame '{}' is not the side-A frame used by the ground truth", map.frame_label));
    }
    const auto match = match_fruitlets(map, truth, tolerance);
    EvalReport r;
    r.scan = std::move(scan);
    r.ground_truth = static_cast<int>(truth.fruitlets.size());
    r.calculated = static_cast<int>(map.tracks.size());
    r.tp = static_cast<int>(match.pairs.size());
    r.fp = static_cast<int>(match.unmatched_tracks.size());
    r.fn = static_cast<int>(match.unmatched_truth.size());
    const auto prf = precision_recall_f1(r.tp, r.fp, r.fn);
    r.precision = prf.precision;
    r.recall = prf.recall;
    r.f1 = prf.f1;
    if (r.ground_truth > 0) {
        r.count_accuracy_pct = count_accuracy(r.calculated, r.ground_truth);
    }
    r.rmse_mode = mode;
    r.tolerance = tolerance;
    r.pairs = match.pairs;
    for (const auto& p : match.pairs) {
        const auto* track = map.find(p.track_id);
        const auto it = std::find_if(truth.fruitlets.begin(), truth.fruitlets.end(),
                                     [&](const TruthFruitlet& f) { return f.id == p.truth_id; });
        r.size_pairs.push_back({it->diameter, track->diameter});
    }
    if (!r.size_pairs.empty()) {
        r.size_rmse_pct = size_rmse_percent(r.size_pairs, mode);
    }
    r.provenance = map.provenance;
    return r;
}

void to_json(json& j, const EvalReport& r) {
    auto pairs = json::array();
    for (const auto& p : r.pairs) {
        pairs.push_back({{"track_id", p.track_id}, {"truth_id", p.truth_id}, {"distance", p.distance}});
    }
    auto sizes = json::array();
    for (const auto& s : r.size_pairs) {
        sizes.push_back({{"truth_diameter", s.truth_diameter}, {"estimated_diameter", s.estimated_diameter}});
    }
    j = {{"format_version", "1"},
         {"scan", r.scan},
         {"ground_truth", r.ground_truth},
         {"calculated", r.calculated},
         {"tp", r.tp},
         {"fp", r.fp},
         {"fn", r.fn},
         {"precision", r.precision},
         {"recall", r.recall},
         {"f1", r.f1},
         {"count_accuracy_pct", r.count_accuracy_pct},
         {"size_rmse_pct", r.size_rmse_pct ? json(*r.size_rmse_pct) : json(nullptr)},
         {"rmse_mode", std::string(to_string(r.rmse_mode))},
         {"tolerance", r.tolerance},
         {"pairs", std::move(pairs)},
         {"size_pairs", std::move(sizes)},
         {"provenance", r.provenance}};
}

void from_json(const json& j, EvalReport& r) {
    try {
        if (j.at("format_version").get<std::string>() != "1") {
            throw ValidationError("unsupported report format_version");
        }
        r = {};
        r.scan = j.value("scan", "");
        r.ground_truth = j.at("ground_truth").get<int>();
        r.calculated = j.at("calculated").get<int>();
        r.tp = j.at("tp").get<int>();
        r.fp = j.at("fp").get<int>();
        r.fn = j.at("fn").get<int>();
        r.precision = j.at("precision").get<double>();
        r.recall = j.at("recall").get<double>();
        r.f1 = j.at("f1").get<double>();
        r.count_accuracy_pct = j.at("count_accuracy_pct").get<double>();
        if (const auto& v = j.at("size_rmse_pct"); !v.is_null()) {
            r.size_rmse_pct = v.get<double>();
        }
        r.rmse_mode = parse_rmse_mode(j.at("rmse_mode").get<std::string>());
        r.tolerance = j.at("tolerance").get<double>();
        for (const auto& p : j.at("pairs")) {
            r.pairs.push_back(
                {p.at("track_id").get<int>(), p.at("truth_id").get<int>(), p.at("distance").get<double>()});
        }
        for (const auto& s : j.at("size_pairs")) {
            r.size_pairs.push_back({s.at("truth_diameter").get<double>(), s.at("estimated_diameter").get<double>()});
        }
        r.provenance = j.value("provenance", json::object());
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed evaluation report: ") + e.what());
    }
}

EvalReport load_eval_report(const std::string& path) {
    try {
        return read_json_file(path).get<EvalReport>();
    } catch (const ValidationError& e) {
        throw ValidationError(fmt::format("{} ('{}')", e.what(), path));
    }
}

void save_eval_report(const std::string& path, const EvalReport& report) { write_json_file(path, json(report)); }

namespace {

std::string csv_field(std::string_view text) {
    if (text.find_first_of(",\"\n") == std::string_view::npos) {
        return std::string(text);
    }
    std::string out = "\"";
    for (char c : text) {
        out += c;
        if (c == '"') {
            out += '"';
        }
    }
    return out + "\"";
}

}  // namespace

std::string table_csv(const std::vector<EvalReport>& reports) {
    std::string out = "scan,ground_truth,calculated,accuracy,precision,recall,f1\n";
    for (const auto& r : reports) {
        out += fmt::format("{},{},{},{:.2f},{:.3f},{:.3f},{:.3f}\n", csv_field(r.scan), r.ground_truth, r.calculated,
                           r.count_accuracy_pct, r.precision, r.recall, r.f1);
    }
    return out;
}

std::string scatter_csv(const std::vector<EvalReport>& reports) {
    std::string out = "scan,truth_diameter_mm,estimated_diameter_mm\n";
    for (const auto& r : reports) {
        for (const auto& s : r.size_pairs) {
            out += fmt::format("{},{:.4f},{:.4f}\n", csv_field(r.scan), 1000.0 * s.truth_diameter,
                               1000.0 * s.estimated_diameter);
        }
    }
    return out;
}

}  // namespace fruitmap
