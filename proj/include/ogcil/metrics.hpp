#pragma once

#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ogcil/model.hpp"

namespace ogcil {

class MetricsError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Ground-truth marker for test nodes of classes never trained on.
inline constexpr int kUnknownTruth = -1;

struct ScoredPrediction {
    int node_id = -1;
    int predicted_class = -1;
    double open_score = 0.0;  // higher means "more known"
    int true_class = kUnknownTruth;
};

struct OpenSetScore {
    double score = 0.0;
    int predicted = -1;
};

// score = -min_c ||h - p_c||^2 over `classes`; ties go to the lowest class id.
OpenSetScore open_set_score(const Eigen::VectorXd& h, const PrototypeTable& table, std::span<const int> classes);

// Row-wise version over every class in the table.
std::vector<OpenSetScore> open_set_scores(const Eigen::MatrixXd& h, const PrototypeTable& table);

double closed_set_accuracy(std::span<const ScoredPrediction> preds);

// Mann-Whitney statistic P(known > unknown) + 0.5 P(tie).
double auc_roc(std::span<const double> known_scores, std::span<const double> unknown_scores);

struct CurvePoint {
    double fpr = 0.0;
    double ccr = 0.0;
};

struct KnownSample {
    double score = 0.0;
    bool correct = false;
};

struct OscrResult {
    double area = 0.0;
    std::vector<CurvePoint> curve;  // sorted by FPR, endpoints at FPR 0 and 1
};

// Area under the CCR-FPR curve, thresholds at every observed score (strict ">") plus +inf.
OscrResult oscr(std::span<const KnownSample> known, std::span<const double> unknown_scores);

struct MetricsReport {
    int task_index = 0;
    double oscr = 0.0;
    double closed_acc = 0.0;
    double auc = 0.0;
    std::size_t num_known = 0;
    std::size_t num_unknown = 0;
    std::vector<CurvePoint> curve;
};

// Builds the per-task report from predictions; throws if oscr > closed_acc.
MetricsReport evaluate_predictions(int task_index, std::span<const ScoredPrediction> preds);

}  // namespace ogcil
