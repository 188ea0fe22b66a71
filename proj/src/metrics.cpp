#include "caum/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "caum/errors.hpp"

namespace caum {

namespace {

void check(const ScoredImpression& s) {
    if (s.scores.size() != s.labels.size())
        throw ContractError("scored impression: " + std::to_string(s.scores.size()) +
                            " scores vs " + std::to_string(s.labels.size()) + " labels");
}

// Indices sorted by descending score; ties keep original order.
std::vector<std::size_t> ranking(const ScoredImpression& s) {
    std::vector<std::size_t> idx(s.scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return s.scores[a] > s.scores[b];
    });
    return idx;
}

} // namespace

std::optional<double> auc(const ScoredImpression& s) {
    check(s);
    std::size_t pos = 0, neg = 0;
    for (int l : s.labels) (l ? pos : neg)++;
    if (pos == 0 || neg == 0) return std::nullopt;
    // Rank-statistic form: sum of positive ranks with midranks for ties.
    std::vector<std::size_t> idx(s.scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return s.scores[a] < s.scores[b];
    });
    std::vector<double> rank(idx.size(), 0.0);
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && s.scores[idx[j + 1]] == s.scores[idx[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + j) + 1.0; // 1-based midrank
        for (std::size_t t = i; t <= j; ++t) rank[idx[t]] = mid;
        i = j + 1;
    }
    double pos_rank_sum = 0.0;
    for (std::size_t t = 0; t < s.labels.size(); ++t)
        if (s.labels[t]) pos_rank_sum += rank[t];
    const double p = static_cast<double>(pos), n = static_cast<double>(neg);
    return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

std::optional<double> mrr(const ScoredImpression& s) {
    check(s);
    const auto idx = ranking(s);
    double acc = 0.0;
    std::size_t pos = 0;
    for (std::size_t r = 0; r < idx.size(); ++r)
        if (s.labels[idx[r]]) {
            acc += 1.0 / static_cast<double>(r + 1);
            ++pos;
        }
    if (pos == 0) return std::nullopt;
    return acc / static_cast<double>(pos);
}

std::optional<double> ndcg_at(const ScoredImpression& s, std::size_t k) {
    check(s);
    std::size_t pos = 0;
    for (int l : s.labels) pos += l != 0;
    if (pos == 0) return std::nullopt;
    const auto idx = ranking(s);
    const std::size_t cut = std::min(k, idx.size());
    double dcg = 0.0;
    for (std::size_t r = 0; r < cut; ++r)
        if (s.labels[idx[r]]) dcg += 1.0 / std::log2(static_cast<double>(r + 2));
    double idcg = 0.0;
    for (std::size_t r = 0; r < std::min(pos, cut); ++r)
        idcg += 1.0 / std::log2(static_cast<double>(r + 2));
    return dcg / idcg;
}

namespace {

MetricStat stat_of(const std::vector<double>& xs) {
    MetricStat st;
    st.n = xs.size();
    if (xs.empty()) return st;
    st.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - st.mean) * (x - st.mean);
    st.stddev = std::sqrt(ss / static_cast<double>(xs.size()));
    return st;
}

} // namespace

MetricReport evaluate_scored(const std::vector<ScoredImpression>& scored) {
    MetricReport rep;
    rep.impressions = scored.size();
    std::vector<double> aucs, mrrs, n5s, n10s;
    for (const auto& s : scored) {
        if (auto a = auc(s))
            aucs.push_back(*a);
        else
            ++rep.excluded_auc;
        auto m = mrr(s);
        if (m) {
            mrrs.push_back(*m);
            n5s.push_back(*ndcg_at(s, 5));
            n10s.push_back(*ndcg_at(s, 10));
        } else {
            ++rep.excluded_rank;
        }
    }
    rep.auc = stat_of(aucs);
    rep.mrr = stat_of(mrrs);
    rep.ndcg5 = stat_of(n5s);
    rep.ndcg10 = stat_of(n10s);
    return rep;
}

std::string MetricReport::to_json() const {
    nlohmann::json j;
    auto put = [&](const char* name, const MetricStat& st) {
        j[name] = {{"mean", st.mean}, {"std", st.stddev}, {"n", st.n}};
    };
    put("auc", auc);
    put("mrr", mrr);
    put("ndcg@5", ndcg5);
    put("ndcg@10", ndcg10);
    j["impressions"] = impressions;
    j["excluded_auc"] = excluded_auc;
    j["excluded_rank"] = excluded_rank;
    return j.dump(2);
}

std::string MetricReport::to_table() const {
    std::ostringstream os;
    auto row = [&](const char* name, const MetricStat& st) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%-8s %8.4f %8.4f %8zu\n", name, st.mean,
                      st.stddev, st.n);
        os << buf;
    };
    os << "metric       mean      std        n\n";
    row("AUC", auc);
    row("MRR", mrr);
    row("nDCG@5", ndcg5);
    row("nDCG@10", ndcg10);
    os << "impressions " << impressions << ", excluded(auc) " << excluded_auc
       << ", excluded(rank) " << excluded_rank << "\n";
    return os.str();
}

} // namespace caum
