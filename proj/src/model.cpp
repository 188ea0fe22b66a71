#include "caum/model.hpp"

#include <cmath>

namespace caum {

void ModelConfig::validate() const {
    auto positive = [](std::size_t v, const char* name) {
        if (v == 0) throw ContractError(std::string("config: ") + name + " must be positive");
    };
    positive(d, "d");
    positive(heads, "heads");
    positive(history_n, "history_n");
    positive(title_len, "title_len");
    positive(entity_len, "entity_len");
    positive(phi_hidden, "phi_hidden");
    positive(att_hidden, "att_hidden");
    if (d % heads != 0)
        throw ContractError("config: heads (" + std::to_string(heads) +
                            ") must divide d (" + std::to_string(d) + ")");
    if (2 * window_h + 1 > history_n)
        throw ContractError("config: CNN window " + std::to_string(2 * window_h + 1) +
                            " exceeds history length " + std::to_string(history_n));
}

ModelConfig ModelConfig::full_scale() {
    ModelConfig cfg;
    cfg.d = 400;
    cfg.heads = 20;
    cfg.window_h = 1;
    cfg.history_n = 50;
    cfg.phi_hidden = 128;
    return cfg;
}

ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (cfg.word_vocab == 0 || cfg.entity_vocab == 0 || cfg.topic_vocab == 0)
        throw ContractError("config: vocabulary sizes not set");
    ParamStore p(seed);
    const std::size_t d = cfg.d, dh = cfg.head_dim();

    p.add("word_emb", cfg.word_vocab, d, Init::Normal01);
    p.add("entity_emb", cfg.entity_vocab, d, Init::Normal01);
    p.add("topic_emb", cfg.topic_vocab, d, Init::Normal01);

    for (const std::string prefix : {"title", "ent"}) {
        p.add(prefix + ".Qu", d, d);
        for (std::size_t k = 0; k < cfg.heads; ++k) {
            p.add(prefix + ".Wr." + std::to_string(k), d, d);
            p.add(prefix + ".Wo." + std::to_string(k), dh, d);
        }
        p.add(prefix + ".att.W", cfg.att_hidden, d);
        p.add(prefix + ".att.b", 1, cfg.att_hidden, Init::Zero);
        p.add(prefix + ".att.v", cfg.att_hidden, 1);
        p.add(prefix + ".empty", 1, d, Init::Normal01);
    }

    p.add("user.Qu", d, d);
    p.add("user.Qc", d, d);
    for (std::size_t k = 0; k < cfg.heads; ++k) {
        p.add("user.Wr." + std::to_string(k), d, d);
        p.add("user.Wo." + std::to_string(k), dh, d);
    }
    p.add("cnn.Wctx", d, (2 * cfg.window_h + 1) * d);
    p.add("cnn.Wcand", d, d);
    p.add("cnn.b", 1, d, Init::Zero);
    p.add("fuse.P", d, 2 * d);
    p.add("phi.W1", cfg.phi_hidden, 2 * d);
    p.add("phi.b1", 1, cfg.phi_hidden, Init::Zero);
    p.add("phi.w2", cfg.phi_hidden, 1);
    p.add("phi.b2", 1, 1, Init::Zero);
    return p;
}

// ---------- news encoder ----------

Tensor self_att_pool(const Tensor& embeddings, const Mask& mask, ParamStore& params,
                     const std::string& prefix, const ModelConfig& cfg) {
    bool any = false;
    for (auto m : mask) any = any || m;
    if (!any) throw EncodeError(prefix + ": fully masked sequence");

    const Tensor& e = embeddings; // L x d
    Tensor q = matmul(e, transpose(params.get(prefix + ".Qu")));
    std::vector<Tensor> heads;
    heads.reserve(cfg.heads);
    for (std::size_t k = 0; k < cfg.heads; ++k) {
        Tensor v = matmul(e, transpose(params.get(prefix + ".Wr." + std::to_string(k))));
        Tensor scores = matmul(q, transpose(v)); // L x L
        Tensor gamma = softmax_rows(scores, &mask);
        Tensor agg = matmul(gamma, e);
        heads.push_back(matmul(agg, transpose(params.get(prefix + ".Wo." + std::to_string(k)))));
    }
    Tensor h = concat_cols(heads); // L x d

    Tensor hidden = tanh(add(matmul(h, transpose(params.get(prefix + ".att.W"))),
                             params.get(prefix + ".att.b")));
    Tensor scores = matmul(hidden, params.get(prefix + ".att.v")); // L x 1
    Tensor alpha = softmax_rows(transpose(scores), &mask);         // 1 x L
    return matmul(alpha, h);                                       // 1 x d
}

namespace {

Mask mask_from_ids(const std::vector<std::uint32_t>& ids) {
    Mask m(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) m[i] = ids[i] != 0;
    return m;
}

} // namespace

Tensor encode_title(const std::vector<std::uint32_t>& title_ids, ParamStore& params,
                    const ModelConfig& cfg) {
    Mask mask = mask_from_ids(title_ids);
    Tensor e = embedding_lookup(params.get("word_emb"), title_ids);
    return self_att_pool(e, mask, params, "title", cfg);
}

Tensor encode_entities(const std::vector<std::uint32_t>& entity_ids, ParamStore& params,
                       const ModelConfig& cfg) {
    Mask mask = mask_from_ids(entity_ids);
    Tensor e = embedding_lookup(params.get("entity_emb"), entity_ids);
    return self_att_pool(e, mask, params, "ent", cfg);
}

Tensor encode_topic(std::uint32_t topic_id, ParamStore& params, const ModelConfig& cfg) {
    (void)cfg;
    return embedding_lookup(params.get("topic_emb"), {topic_id});
}

Tensor encode_news(const EncodedNews& article, ParamStore& params, const ModelConfig& cfg) {
    Tensor nt;
    try {
        nt = encode_title(article.title_ids, params, cfg);
    } catch (const EncodeError&) {
        nt = params.get("title.empty");
    }
    Tensor ne;
    try {
        ne = encode_entities(article.entity_ids, params, cfg);
    } catch (const EncodeError&) {
        ne = params.get("ent.empty");
    }
    Tensor nv = encode_topic(article.topic_id, params, cfg);
    return add(add(nt, ne), nv);
}

// ---------- user encoder ----------

namespace {

void check_clicks(const ClickMatrix& clicks) {
    bool any = false;
    for (auto m : clicks.mask) any = any || m;
    if (!any) throw ContractError("user encoder: history mask has no clicks");
    if (clicks.mask.size() != clicks.vectors.rows())
        throw ShapeError("click mask length " + std::to_string(clicks.mask.size()) +
                         " vs " + std::to_string(clicks.vectors.rows()) + " click rows");
}

} // namespace

Tensor candi_self_att(const ClickMatrix& clicks, const Tensor& cand, ParamStore& params,
                      const ModelConfig& cfg) {
    check_clicks(clicks);
    const Tensor& c = clicks.vectors; // N x d
    const std::size_t n = c.rows();
    Tensor q = matmul(c, transpose(params.get("user.Qu")));    // N x d
    Tensor qc = matmul(cand, transpose(params.get("user.Qc"))); // 1 x d
    std::vector<Tensor> heads;
    heads.reserve(cfg.heads);
    for (std::size_t k = 0; k < cfg.heads; ++k) {
        Tensor v = matmul(c, transpose(params.get("user.Wr." + std::to_string(k)))); // N x d
        Tensor rhat = matmul(q, transpose(v)); // N x N, rhat[i][j] = q_i . W c_j
        Tensor cand_term = matmul(qc, transpose(v)); // 1 x N
        Tensor r = add(rhat, cand_term);             // row broadcast
        Tensor gamma = softmax_rows(r, &clicks.mask);
        Tensor agg = matmul(gamma, c); // N x d, raw c_j aggregation
        heads.push_back(matmul(agg, transpose(params.get("user.Wo." + std::to_string(k)))));
    }
    (void)n;
    return concat_cols(heads); // N x d
}

Tensor candi_cnn(const ClickMatrix& clicks, const Tensor& cand, ParamStore& params,
                 const ModelConfig& cfg) {
    check_clicks(clicks);
    const int h = static_cast<int>(cfg.window_h);
    std::vector<Tensor> window;
    for (int off = -h; off <= h; ++off)
        window.push_back(shift_rows(clicks.vectors, off));
    Tensor x = window.size() == 1 ? window.front() : concat_cols(window); // N x (2h+1)d
    Tensor ctx = matmul(x, transpose(params.get("cnn.Wctx")));            // N x d
    Tensor cand_part = matmul(cand, transpose(params.get("cnn.Wcand")));  // 1 x d
    return relu(add(add(ctx, cand_part), params.get("cnn.b")));
}

Tensor fuse(const Tensor& s, const Tensor& l, ParamStore& params) {
    return matmul(concat_cols({s, l}), transpose(params.get("fuse.P")));
}

Tensor candi_att(const Tensor& m, const Tensor& cand, const Mask& mask,
                 ParamStore& params, const ModelConfig& cfg) {
    (void)cfg;
    Tensor z = concat_cols({m, repeat_rows(cand, m.rows())}); // N x 2d
    Tensor hidden = tanh(add(matmul(z, transpose(params.get("phi.W1"))),
                             params.get("phi.b1")));
    Tensor scores = add(matmul(hidden, params.get("phi.w2")), params.get("phi.b2"));
    Tensor alpha = softmax_rows(transpose(scores), &mask); // 1 x N
    return matmul(alpha, m);                               // 1 x d
}

Tensor encode_user(const ClickMatrix& clicks, const Tensor& cand, ParamStore& params,
                   const ModelConfig& cfg) {
    const Tensor zero = Tensor::zeros(1, cfg.d);
    Tensor l = candi_self_att(clicks, cfg.candi_self_att ? cand : zero, params, cfg);
    Tensor s = candi_cnn(clicks, cfg.candi_cnn ? cand : zero, params, cfg);
    Tensor m = fuse(s, l, params);
    return candi_att(m, cfg.candi_att ? cand : zero, clicks.mask, params, cfg);
}

Tensor match_score(const Tensor& user, const Tensor& cand) {
    if (user.cols() != cand.cols())
        throw ShapeError("match_score: dims differ, " + std::to_string(user.cols()) +
                         " vs " + std::to_string(cand.cols()));
    return matmul(user, transpose(cand)); // 1 x 1
}

} // namespace caum
