#include "ogcil/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ogcil {

OpenSetScore open_set_score(const Eigen::VectorXd& h, const PrototypeTable& table, std::span<const int> classes) {
    if (classes.empty()) throw MetricsError("open_set_score: empty class set");
    if (static_cast<std::size_t>(h.size()) != table.dim()) throw MetricsError("open_set_score: width mismatch");
    OpenSetScore best{-std::numeric_limits<double>::infinity(), -1};
    double best_d2 = std::numeric_limits<double>::infinity();
    for (int c : classes) {
        const double d2 = (h.transpose() - table.vectors().row(table.row_of(c))).squaredNorm();
        if (d2 < best_d2 || (d2 == best_d2 && c < best.predicted)) {
            best_d2 = d2;
            best.predicted = c;
        }
    }
    best.score = -best_d2;
    return best;
}

std::vector<OpenSetScore> open_set_scores(const Eigen::MatrixXd& h, const PrototypeTable& table) {
    if (table.empty()) throw MetricsError("open_set_scores: empty prototype table");
    if (static_cast<std::size_t>(h.cols()) != table.dim()) throw MetricsError("open_set_scores: width mismatch");
    const auto& protos = table.vectors();
    const auto& ids = table.class_ids();
    std::vector<OpenSetScore> out(static_cast<std::size_t>(h.rows()));
    for (Eigen::Index i = 0; i < h.rows(); ++i) {
        double best_d2 = std::numeric_limits<double>::infinity();
        int best = -1;
        for (Eigen::Index c = 0; c < protos.rows(); ++c) {
            const double d2 = (h.row(i) - protos.row(c)).squaredNorm();
            const int id = ids[static_cast<std::size_t>(c)];
            if (d2 < best_d2 || (d2 == best_d2 && id < best)) {
                best_d2 = d2;
                best = id;
            }
        }
        out[static_cast<std::size_t>(i)] = {-best_d2, best};
    }
    return out;
}

double closed_set_accuracy(std::span<const ScoredPrediction> preds) {
    if (preds.empty()) throw MetricsError("closed_set_accuracy: empty input");
    std::size_t correct = 0;
    for (const auto& p : preds) correct += (p.predicted_class == p.true_class) ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(preds.size());
}

double auc_roc(std::span<const double> known_scores, std::span<const double> unknown_scores) {
    if (known_scores.empty() || unknown_scores.empty()) throw MetricsError("auc_roc: empty score list");
    struct Item {
        double score;
        bool known;
    };
    std::vector<Item> all;
    all.reserve(known_scores.size() + unknown_scores.size());
    for (double s : known_scores) all.push_back({s, true});
    for (double s : unknown_scores) all.push_back({s, false});
    std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.score < b.score; });

    // Sum of known ranks, ties sharing the average rank (ranks counted from 1).
    double known_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        std::size_t knowns_in_group = 0;
        while (j < all.size() && all[j].score == all[i].score) {
            knowns_in_group += all[j].known ? 1 : 0;
            ++j;
        }
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
        known_rank_sum += avg_rank * static_cast<double>(knowns_in_group);
        i = j;
    }
    const auto nk = static_cast<double>(known_scores.size());
    const auto nu = static_cast<double>(unknown_scores.size());
    const double u = known_rank_sum - nk * (nk + 1.0) / 2.0;
    return u / (nk * nu);
}

OscrResult oscr(std::span<const KnownSample> known, std::span<const double> unknown_scores) {
    if (known.empty() || unknown_scores.empty()) throw MetricsError("oscr: empty input");

    std::vector<double> correct_scores;
    for (const auto& k : known)
        if (k.correct) correct_scores.push_back(k.score);
    std::vector<double> unk(unknown_scores.begin(), unknown_scores.end());
    std::sort(correct_scores.begin(), correct_scores.end(), std::greater<>());
    std::sort(unk.begin(), unk.end(), std::greater<>());

    std::vector<double> thresholds;
    thresholds.reserve(known.size() + unk.size());
    for (const auto& k : known) thresholds.push_back(k.score);
    thresholds.insert(thresholds.end(), unk.begin(), unk.end());
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    const auto nk = static_cast<double>(known.size());
    const auto nu = static_cast<double>(unk.size());
    OscrResult result;
    result.curve.reserve(thresholds.size() + 2);
    result.curve.push_back({0.0, 0.0});  // threshold +inf
    // Sweep thresholds from high to low; counts of scores strictly above the threshold only grow.
    std::size_t above_correct = 0;
    std::size_t above_unknown = 0;
    for (double tau : thresholds) {
        while (above_correct < correct_scores.size() && correct_scores[above_correct] > tau) ++above_correct;
        while (above_unknown < unk.size() && unk[above_unknown] > tau) ++above_unknown;
        result.curve.push_back({static_cast<double>(above_unknown) / nu, static_cast<double>(above_correct) / nk});
    }
    result.curve.push_back({1.0, static_cast<double>(correct_scores.size()) / nk});  // threshold -inf

    std::stable_sort(result.curve.begin(), result.curve.end(), [](const CurvePoint& a, const CurvePoint& b) {
        return a.fpr < b.fpr || (a.fpr == b.fpr && a.ccr < b.ccr);
    });
    double area = 0.0;
    for (std::size_t i = 1; i < result.curve.size(); ++i) {
        const auto& a = result.curve[i - 1];
        const auto& b = result.curve[i];
        area += (b.fpr - a.fpr) * (a.ccr + b.ccr) * 0.5;
    }
    result.area = area;
    return result;
}

MetricsReport evaluate_predictions(int task_index, std::span<const ScoredPrediction> preds) {
    std::vector<ScoredPrediction> known;
    std::vector<KnownSample> known_samples;
    std::vector<double> known_scores;
    std::vector<double> unknown_scores;
    for (const auto& p : preds) {
        if (!std::isfinite(p.open_score)) throw MetricsError("non-finite open-set score for node " + std::to_string(p.node_id));
        if (p.true_class == kUnknownTruth) {
            unknown_scores.push_back(p.open_score);
        } else {
            known.push_back(p);
            known_samples.push_back({p.open_score, p.predicted_class == p.true_class});
            known_scores.push_back(p.open_score);
        }
    }
    MetricsReport r;
    r.task_index = task_index;
    r.num_known = known.size();
    r.num_unknown = unknown_scores.size();
    r.closed_acc = closed_set_accuracy(known);
    r.auc = auc_roc(known_scores, unknown_scores);
    auto o = oscr(known_samples, unknown_scores);
    r.oscr = o.area;
    r.curve = std::move(o.curve);
    if (r.oscr > r.closed_acc + 1e-12)
        throw MetricsError("task " + std::to_string(task_index) + ": OSCR " + std::to_string(r.oscr) +
                           " exceeds closed-set accuracy " + std::to_string(r.closed_acc));
    return r;
}

}  // namespace ogcil
