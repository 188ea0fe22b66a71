#include "caum/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "caum/checkpoint.hpp"
#include "caum/logging.hpp"

namespace caum {

void TrainConfig::validate() const {
    model.validate();
    auto positive = [](std::size_t v, const char* name) {
        if (v == 0) throw ContractError(std::string("train config: ") + name +
                                        " must be positive");
    };
    positive(epochs, "epochs");
    positive(batch_size, "batch_size");
    positive(negatives_per_positive, "negatives_per_positive");
    if (lr < 0.0) throw ContractError("train config: negative learning rate");
}

double bpr_loss_value(double yp, double yn) {
    const double x = yp - yn;
    // -log sigmoid(x), stable form
    return x >= 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

Tensor bpr_loss(const std::vector<std::pair<Tensor, Tensor>>& pairs) {
    if (pairs.empty()) throw ContractError("bpr_loss: empty batch");
    std::vector<Tensor> diffs;
    diffs.reserve(pairs.size());
    for (const auto& [yp, yn] : pairs) diffs.push_back(sub(yp, yn));
    Tensor stacked = concat_rows(diffs); // B x 1
    return scale(mean(log(sigmoid(stacked))), -1.0);
}

std::vector<TrainPair> sample_pairs(const EncodedImpression& imp, std::size_t imp_index,
                                    std::mt19937_64& rng,
                                    std::size_t negatives_per_positive) {
    std::vector<std::uint32_t> positives, negatives;
    for (const auto& [row, label] : imp.candidates)
        (label ? positives : negatives).push_back(row);
    std::vector<TrainPair> out;
    if (positives.empty() || negatives.empty()) return out;
    for (std::uint32_t pos : positives) {
        if (negatives_per_positive <= negatives.size()) {
            // uniform draw without replacement
            std::vector<std::uint32_t> pool = negatives;
            for (std::size_t k = 0; k < negatives_per_positive; ++k) {
                std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
                const std::size_t idx = pick(rng);
                out.push_back({imp_index, pos, pool[idx]});
                pool[idx] = pool.back();
                pool.pop_back();
            }
        } else {
            std::uniform_int_distribution<std::size_t> pick(0, negatives.size() - 1);
            for (std::size_t k = 0; k < negatives_per_positive; ++k)
                out.push_back({imp_index, pos, negatives[pick(rng)]});
        }
    }
    return out;
}

std::string loss_log_csv(const std::vector<LossLogEntry>& log) {
    std::ostringstream os;
    os << "epoch,step,loss\n";
    for (const auto& e : log) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%zu,%zu,%.17g\n", e.epoch, e.step, e.loss);
        os << buf;
    }
    return os.str();
}

namespace {

// Encodes every news row used by the batch exactly once.
class NewsCache {
public:
    NewsCache(const EncodedDataset& ds, ParamStore& params, const ModelConfig& cfg)
        : ds_(ds), params_(params), cfg_(cfg) {}

    const Tensor& get(std::uint32_t row) {
        auto it = cache_.find(row);
        if (it != cache_.end()) return it->second;
        return cache_.emplace(row, encode_news(ds_.news[row], params_, cfg_)).first->second;
    }

private:
    const EncodedDataset& ds_;
    ParamStore& params_;
    const ModelConfig& cfg_;
    std::unordered_map<std::uint32_t, Tensor> cache_;
};

ClickMatrix build_clicks(const EncodedImpression& imp, NewsCache& news,
                         const ModelConfig& cfg) {
    const PaddedHistory h = pad_history(imp, cfg.history_n);
    std::vector<Tensor> rows;
    rows.reserve(cfg.history_n);
    const Tensor zero = Tensor::zeros(1, cfg.d);
    for (std::size_t i = 0; i < cfg.history_n; ++i)
        rows.push_back(h.mask[i] ? news.get(h.news_rows[i]) : zero);
    return {concat_rows(rows), h.mask};
}

} // namespace

TrainResult train(const EncodedDataset& dataset, const TrainConfig& cfg,
                  ParamStore& params, const std::string& out_dir) {
    cfg.validate();
    if (dataset.train.empty()) throw ContractError("train: empty dataset");
    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

    std::mt19937_64 rng(cfg.seed);
    AdamConfig adam{cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps};
    TrainResult result;

    // usable impressions: nonempty history plus at least one pos and neg
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < dataset.train.size(); ++i) {
        const auto& imp = dataset.train[i];
        bool pos = false, neg = false;
        for (const auto& [row, label] : imp.candidates) (label ? pos : neg) = true;
        if (!imp.history.empty() && pos && neg)
            usable.push_back(i);
        else
            ++result.skipped_impressions;
    }
    if (usable.empty()) throw ContractError("train: no usable impressions");
    if (result.skipped_impressions > 0)
        log_info("train: skipped %zu impressions without history or a pos/neg pair",
                 result.skipped_impressions);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(usable.begin(), usable.end(), rng);
        std::vector<TrainPair> pairs;
        for (std::size_t idx : usable) {
            auto ps = sample_pairs(dataset.train[idx], idx, rng,
                                   cfg.negatives_per_positive);
            pairs.insert(pairs.end(), ps.begin(), ps.end());
        }

        double epoch_loss = 0.0;
        std::size_t steps = 0;
        for (std::size_t start = 0; start < pairs.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(start + cfg.batch_size, pairs.size());
            const double inv = 1.0 / static_cast<double>(end - start);
            params.zero_grad();
            double loss_val = 0.0;
            // one pair's graph at a time; leaf gradients accumulate across
            // backward calls, so this matches the batched mean exactly
            for (std::size_t p = start; p < end; ++p) {
                const TrainPair& tp = pairs[p];
                NewsCache news(dataset, params, cfg.model);
                ClickMatrix clicks =
                    build_clicks(dataset.train[tp.impression], news, cfg.model);
                const Tensor pos_vec = news.get(tp.positive);
                const Tensor neg_vec = news.get(tp.negative);
                Tensor up = encode_user(clicks, pos_vec, params, cfg.model);
                Tensor un = encode_user(clicks, neg_vec, params, cfg.model);
                Tensor loss = scale(bpr_loss({{match_score(up, pos_vec),
                                               match_score(un, neg_vec)}}),
                                    inv);
                loss_val += loss.item();
                backward(loss);
            }
            if (!std::isfinite(loss_val))
                throw ContractError("train: non-finite loss at epoch " +
                                    std::to_string(epoch) + " batch " +
                                    std::to_string(steps));
            const std::size_t skipped = params.adam_step(adam);
            if (skipped > 0)
                log_debug("adam: %zu parameters without gradient skipped", skipped);
            result.loss_log.push_back({epoch, steps, loss_val});
            epoch_loss += loss_val;
            ++steps;
        }

        EpochStats stats;
        stats.mean_loss = steps > 0 ? epoch_loss / static_cast<double>(steps) : 0.0;
        if (!dataset.valid.empty())
            stats.valid = evaluate_model(dataset, dataset.valid, params, cfg.model);
        result.epochs.push_back(stats);
        log_info("epoch %zu: mean loss %.5f%s", epoch, stats.mean_loss,
                 dataset.valid.empty()
                     ? ""
                     : (" valid AUC " + std::to_string(stats.valid.auc.mean)).c_str());

        if (!out_dir.empty())
            write_checkpoint(out_dir + "/epoch_" + std::to_string(epoch) + ".ckpt", params);
    }

    if (!out_dir.empty()) {
        write_checkpoint(out_dir + "/final.ckpt", params);
        std::ofstream log(out_dir + "/loss.csv", std::ios::trunc);
        if (!log) throw IoError("cannot write " + out_dir + "/loss.csv");
        log << loss_log_csv(result.loss_log);
    }
    return result;
}

std::vector<ScoredImpression> score_split(const EncodedDataset& dataset,
                                          const std::vector<EncodedImpression>& split,
                                          const ParamStore& params, const ModelConfig& cfg,
                                          std::size_t threads) {
    InferenceParams ip = build_inference(params, cfg);

    // every news row referenced by the split, encoded once
    std::vector<std::vector<double>> news_vecs(dataset.news.size());
    std::vector<std::uint8_t> needed(dataset.news.size(), 0);
    for (const auto& imp : split) {
        const PaddedHistory h = pad_history(imp, cfg.history_n);
        for (std::size_t i = 0; i < h.real; ++i) needed[h.news_rows[i]] = 1;
        for (const auto& [row, label] : imp.candidates) needed[row] = 1;
    }
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < needed.size(); ++i)
        if (needed[i]) todo.push_back(i);

    const std::size_t workers = std::max<std::size_t>(1, threads);
    auto parallel_for = [&](std::size_t count, auto&& body) {
        if (workers == 1 || count < 2 * workers) {
            for (std::size_t i = 0; i < count; ++i) body(i);
            return;
        }
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < count; i += workers) body(i);
            });
        for (auto& t : pool) t.join();
    };

    parallel_for(todo.size(),
                 [&](std::size_t i) { news_vecs[todo[i]] = encode_news_infer(dataset.news[todo[i]], ip); });

    std::vector<ScoredImpression> scored(split.size());
    parallel_for(split.size(), [&](std::size_t si) {
        const auto& imp = split[si];
        if (imp.history.empty() || imp.candidates.empty()) return;
        const PaddedHistory h = pad_history(imp, cfg.history_n);
        Mat clicks(cfg.history_n, cfg.d);
        for (std::size_t i = 0; i < h.real; ++i) {
            const auto& v = news_vecs[h.news_rows[i]];
            std::copy(v.begin(), v.end(), clicks.row(i));
        }
        Mat cands(imp.candidates.size(), cfg.d);
        ScoredImpression s;
        for (std::size_t c = 0; c < imp.candidates.size(); ++c) {
            const auto& v = news_vecs[imp.candidates[c].first];
            std::copy(v.begin(), v.end(), cands.row(c));
            s.labels.push_back(imp.candidates[c].second);
        }
        OpCounter counter;
        const UserPrecompute pre = precompute_user(clicks, h.mask, ip, counter);
        s.scores = score_candidates(pre, cands, ip, counter);
        scored[si] = std::move(s);
    });

    // drop impressions that could not be scored (no history)
    std::vector<ScoredImpression> out;
    for (auto& s : scored)
        if (!s.scores.empty()) out.push_back(std::move(s));
    return out;
}

MetricReport evaluate_model(const EncodedDataset& dataset,
                            const std::vector<EncodedImpression>& split,
                            const ParamStore& params, const ModelConfig& cfg,
                            std::size_t threads) {
    return evaluate_scored(score_split(dataset, split, params, cfg, threads));
}

} // namespace caum
