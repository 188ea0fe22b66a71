#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "caum/metrics.hpp"
#include "caum/model.hpp"
#include "caum/scorer.hpp"

namespace caum {

struct TrainPair {
    std::size_t impression = 0; // index into the training split
    std::uint32_t positive = 0; // catalog rows
    std::uint32_t negative = 0;
};

struct TrainConfig {
    ModelConfig model;
    std::size_t epochs = 3;
    double lr = 5e-5;
    std::size_t batch_size = 32;
    std::size_t negatives_per_positive = 1;
    std::uint64_t seed = 42;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const;
};

// Mean over the batch of -log sigmoid(yp - yn); strictly positive.
Tensor bpr_loss(const std::vector<std::pair<Tensor, Tensor>>& pairs);
double bpr_loss_value(double yp, double yn);

// One negative set per positive, uniform without replacement from the
// same impression (with replacement when fewer negatives exist).
// Impressions lacking a positive or a negative yield no pairs.
std::vector<TrainPair> sample_pairs(const EncodedImpression& imp, std::size_t imp_index,
                                    std::mt19937_64& rng, std::size_t negatives_per_positive);

struct LossLogEntry {
    std::size_t epoch = 0;
    std::size_t step = 0;
    double loss = 0.0;
};

struct EpochStats {
    double mean_loss = 0.0;
    MetricReport valid; // empty when no validation split
};

struct TrainResult {
    std::vector<LossLogEntry> loss_log;
    std::vector<EpochStats> epochs;
    std::size_t skipped_impressions = 0;
};

std::string loss_log_csv(const std::vector<LossLogEntry>& log);

// Shuffled mini-batch BPR training with Adam. When out_dir is nonempty a
// checkpoint is written per epoch plus loss.csv at the end. NaN loss
// aborts, naming the offending batch.
TrainResult train(const EncodedDataset& dataset, const TrainConfig& cfg,
                  ParamStore& params, const std::string& out_dir = "");

// Scores every impression of a split with the amortized path.
std::vector<ScoredImpression> score_split(const EncodedDataset& dataset,
                                          const std::vector<EncodedImpression>& split,
                                          const ParamStore& params, const ModelConfig& cfg,
                                          std::size_t threads = 1);

MetricReport evaluate_model(const EncodedDataset& dataset,
                            const std::vector<EncodedImpression>& split,
                            const ParamStore& params, const ModelConfig& cfg,
                            std::size_t threads = 1);

} // namespace caum
