#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fruitmap/fruitlet_map.hpp"
#include "fruitmap/ground_truth.hpp"

namespace fruitmap {

inline constexpr double kDefaultMatchTolerance = 0.025;

struct MatchPair {
    int track_id = 0;
    int truth_id = 0;
    double distance = 0.0;

    bool operator==(const MatchPair&) const = default;
};

struct MatchResult {
    std::vector<MatchPair> pairs;
    std::vector<int> unmatched_tracks;
    std::vector<int> unmatched_truth;
};

/// Greedy one-to-one matching by ascending center distance over all pairs within
/// `tolerance`; ties go to the smaller track id, then the smaller truth id.
/// Both inputs must use the side-A frame.
MatchResult match_fruitlets(const BranchMap& map, const GroundTruth& truth, double tolerance = kDefaultMatchTolerance);

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Each ratio is 0 when its denominator is 0.
Prf precision_recall_f1(int tp, int fp, int fn);
/// Harmonic mean of precision and recall; 0 when both are 0.
double f1_score(double precision, double recall);

/// (1 - |calculated - ground_truth| / ground_truth) * 100, unclamped.
double count_accuracy(int calculated, int ground_truth);

enum class RmseMode {
    Relative,   // 100 * sqrt(mean(((est - truth) / truth)^2))
    Normalized  // 100 * sqrt(mean((est - truth)^2)) / mean(truth)
};

std::string_view to_string(RmseMode mode);
RmseMode parse_rmse_mode(std::string_view text);

struct SizePair {
    double truth_diameter = 0.0;
    double estimated_diameter = 0.0;

    bool operator==(const SizePair&) const = default;
};

double size_rmse_percent(const std::vector<SizePair>& pairs, RmseMode mode = RmseMode::Relative);

struct EvalReport {
    std::string scan;
    int ground_truth = 0;
    int calculated = 0;
    int tp = 0;
    int fp = 0;
    int fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double count_accuracy_pct = 0.0;
    std::optional<double> size_rmse_pct;
    RmseMode rmse_mode = RmseMode::Relative;
    double tolerance = kDefaultMatchTolerance;
    std::vector<MatchPair> pairs;
    std::vector<SizePair> size_pairs;
    nlohmann::json provenance = nlohmann::json::object();

    bool operator==(const EvalReport&) const = default;
};

/// Matches `map` against `truth` and fills every metric. The map must be in the
/// side-A frame ("A", "B_in_A" or "merged"); otherwise ValidationError.
EvalReport evaluate(const BranchMap& map, const GroundTruth& truth, double tolerance = kDefaultMatchTolerance,
                    RmseMode mode = RmseMode::Relative, std::string scan = {});

void to_json(nlohmann::json& j, const EvalReport& r);
void from_json(const nlohmann::json& j, EvalReport& r);

EvalReport load_eval_report(const std::string& path);
void save_eval_report(const std::string& path, const EvalReport& report);

/// Table rows: scan, ground_truth, calculated, accuracy, precision, recall, f1
/// (accuracy 2 d.p., ratios 3 d.p.).
std::string table_csv(const std::vector<EvalReport>& reports);
/// One row per size pair: scan, truth_diameter_mm, estimated_diameter_mm.
std::string scatter_csv(const std::vector<EvalReport>& reports);

}  // namespace fruitmap
