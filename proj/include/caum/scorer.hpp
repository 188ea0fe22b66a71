#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "caum/model.hpp"

namespace caum {

// Inference-side scoring: a naive path (full user encoding per candidate)
// and an amortized path that caches every candidate-independent tensor
// per user. Both paths instrument multiplication counts at the
// matrix-multiply granularity (m*k*n per product).

struct Mat {
    std::size_t rows = 0, cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}
    double* row(std::size_t i) { return a.data() + i * cols; }
    const double* row(std::size_t i) const { return a.data() + i * cols; }
    double& at(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
};

struct OpCounter {
    std::uint64_t precompute = 0;
    std::uint64_t per_candidate = 0;
    std::uint64_t total() const { return precompute + per_candidate; }
};

// Parameters flattened out of the store, plus load-time foldings that let
// the amortized path skip per-candidate d^2-per-click work:
//   G  = phi.W1(:, m-block) * fuse.P, split into Gs | Gl,
//   gmap[k] = Gl(:, head k) * user.Wo[k].
struct InferenceParams {
    ModelConfig cfg;
    std::uint64_t revision = 0;

    Mat word_emb, entity_emb, topic_emb;
    struct SeqEncoder {
        Mat qu;
        std::vector<Mat> wr, wo;
        Mat att_w, att_v;
        std::vector<double> att_b, empty;
    } title, ent;

    Mat user_qu, user_qc;
    std::vector<Mat> user_wr, user_wo;
    Mat cnn_wctx, cnn_wcand;
    std::vector<double> cnn_b;
    Mat fuse_ps, fuse_pl;          // fuse.P split column-wise
    Mat phi_w1m, phi_w1c;          // phi.W1 split column-wise
    std::vector<double> phi_b1, phi_w2;
    double phi_b2 = 0.0;

    Mat gs;                // phi_w1m * fuse_ps
    std::vector<Mat> gmap; // per head, (phi_w1m * fuse_pl)[k-block] * wo[k]
};

InferenceParams build_inference(const ParamStore& params, const ModelConfig& cfg);

std::vector<double> encode_news_infer(const EncodedNews& article,
                                      const InferenceParams& ip);

// Candidate-independent per-user cache.
struct UserPrecompute {
    std::uint64_t revision = 0;
    Mask mask;
    Mat q;                  // Qu c_i, N x d
    std::vector<Mat> v;     // per head, Wr_k c_j, N x d
    std::vector<Mat> rhat;  // per head, N x N self-attention scores
    std::vector<Mat> o;     // per head, Wo_k c_j, N x d_h
    std::vector<Mat> g;     // per head, gmap_k c_j, N x hid
    Mat ctx;                // click-window partial of the CNN, N x d
    Mat clicks;             // kept for staleness-free recomputation checks
};

UserPrecompute precompute_user(const Mat& clicks, const Mask& mask,
                               const InferenceParams& ip, OpCounter& counter);

// M candidate scores against one cached user. Throws StalenessError when
// the cache was built against other parameters.
std::vector<double> score_candidates(const UserPrecompute& pre, const Mat& candidates,
                                     const InferenceParams& ip, OpCounter& counter);

// Straightforward per-candidate evaluation; the reference the amortized
// path must match.
std::vector<double> naive_scores(const Mat& clicks, const Mask& mask,
                                 const Mat& candidates, const InferenceParams& ip,
                                 OpCounter& counter);

// ---------- benchmark ----------

struct BenchRow {
    std::string variant;
    std::size_t n = 0, m = 0, d = 0, reps = 0;
    std::uint64_t median_ns = 0;
    std::uint64_t mult_count = 0;
};

struct BenchConfig {
    std::vector<std::size_t> n_values{50};
    std::vector<std::size_t> m_values{10, 50, 100};
    std::vector<std::size_t> d_values{64};
    std::size_t reps = 10;
    std::size_t heads = 4;
    std::size_t phi_hidden = 32;
    std::size_t window_h = 1;
    std::uint64_t seed = 1;
};

// Verifies naive/amortized score agreement on each configuration before
// timing it.
std::vector<BenchRow> run_bench(const BenchConfig& cfg);

std::string bench_csv(const std::vector<BenchRow>& rows);
std::string bench_summary(const std::vector<BenchRow>& rows);

// Test/bench helper: user-encoder-only parameters at arbitrary size.
InferenceParams random_inference_params(const ModelConfig& cfg, std::uint64_t seed);

} // namespace caum
