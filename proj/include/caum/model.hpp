#pragma once

#include <string>

#include "caum/data.hpp"
#include "caum/param_store.hpp"
#include "caum/tensor.hpp"

namespace caum {

struct ModelConfig {
    std::size_t d = 64;        // news/user representation width
    std::size_t heads = 4;     // attention heads, shared by news and user encoders
    std::size_t window_h = 1;  // CNN half-width; window size is 2h+1
    std::size_t history_n = 50;
    std::size_t title_len = 30;
    std::size_t entity_len = 5;
    std::size_t phi_hidden = 32; // click-weight MLP hidden width
    std::size_t att_hidden = 32; // additive pooling hidden width
    bool candi_self_att = true;
    bool candi_cnn = true;
    bool candi_att = true;
    std::size_t word_vocab = 0;
    std::size_t entity_vocab = 0;
    std::size_t topic_vocab = 0;

    std::size_t head_dim() const { return d / heads; }
    void validate() const;

    // Full-scale defaults: d=400, 20 heads of width 20, window 3.
    static ModelConfig full_scale();
};

ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed);

struct ClickMatrix {
    Tensor vectors; // N x d; padded rows are zero
    Mask mask;      // length N, at least one true
};

// ---------- news encoder ----------

// Self-attention over a token sequence followed by additive attention
// pooling; shared by the title and entity branches via `prefix`.
Tensor self_att_pool(const Tensor& embeddings, const Mask& mask, ParamStore& params,
                     const std::string& prefix, const ModelConfig& cfg);

Tensor encode_title(const std::vector<std::uint32_t>& title_ids, ParamStore& params,
                    const ModelConfig& cfg);
Tensor encode_entities(const std::vector<std::uint32_t>& entity_ids, ParamStore& params,
                       const ModelConfig& cfg);
Tensor encode_topic(std::uint32_t topic_id, ParamStore& params, const ModelConfig& cfg);

// n = n_title + n_entity + n_topic (1 x d).
Tensor encode_news(const EncodedNews& article, ParamStore& params, const ModelConfig& cfg);

// ---------- user encoder ----------

// Candidate-aware self-attention over clicks; N x d. Pass a zero
// candidate for the candidate-agnostic variant.
Tensor candi_self_att(const ClickMatrix& clicks, const Tensor& cand, ParamStore& params,
                      const ModelConfig& cfg);

// Windowed filter over adjacent clicks concatenated with the candidate,
// then ReLU; N x d.
Tensor candi_cnn(const ClickMatrix& clicks, const Tensor& cand, ParamStore& params,
                 const ModelConfig& cfg);

// m_i = P [s_i; l_i]; N x d.
Tensor fuse(const Tensor& s, const Tensor& l, ParamStore& params);

// Attention pooling weighted by an MLP of (m_i, candidate); 1 x d.
Tensor candi_att(const Tensor& m, const Tensor& cand, const Mask& mask,
                 ParamStore& params, const ModelConfig& cfg);

// Full composition; ablation flags in cfg zero the candidate
// contribution of the corresponding block.
Tensor encode_user(const ClickMatrix& clicks, const Tensor& cand, ParamStore& params,
                   const ModelConfig& cfg);

// yhat = n_c . u
Tensor match_score(const Tensor& user, const Tensor& cand);

} // namespace caum
