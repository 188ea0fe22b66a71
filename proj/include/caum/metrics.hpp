#pragma once

#include <optional>
#include <string>
#include <vector>

namespace caum {

struct ScoredImpression {
    std::vector<double> scores;
    std::vector<int> labels; // 0/1
};

// Probability that a random positive outscores a random negative, ties
// counted as 0.5 (rank-statistic form). Empty when the impression has a
// single class.
std::optional<double> auc(const ScoredImpression& s);

// Mean reciprocal rank over all positives (MIND-benchmark convention).
// Ranking is by descending score, ties broken by original index.
std::optional<double> mrr(const ScoredImpression& s);

// Binary-gain nDCG at cutoff k, normalized by the ideal ranking.
std::optional<double> ndcg_at(const ScoredImpression& s, std::size_t k);

struct MetricStat {
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t n = 0;
};

struct MetricReport {
    MetricStat auc, mrr, ndcg5, ndcg10;
    std::size_t impressions = 0;
    std::size_t excluded_auc = 0; // single-class impressions
    std::size_t excluded_rank = 0; // impressions with no positive

    std::string to_json() const;
    std::string to_table() const;
};

MetricReport evaluate_scored(const std::vector<ScoredImpression>& scored);

} // namespace caum
