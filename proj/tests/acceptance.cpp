// End-to-end acceptance checks. Each numbered check prints exactly one
// PASS/FAIL line; the process exits nonzero if any of them fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <thread>
#include <unistd.h>

#include "caum/checkpoint.hpp"
#include "caum/data.hpp"
#include "caum/metrics.hpp"
#include "caum/model.hpp"
#include "caum/scorer.hpp"
#include "caum/tensor.hpp"
#include "caum/trainer.hpp"
#include "helpers.hpp"

using namespace caum;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int number, const std::string& name, bool ok, const std::string& detail) {
    std::printf("[%s] %d %s: %s\n", ok ? "PASS" : "FAIL", number, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

fs::path scratch_dir() {
    const fs::path p = fs::temp_directory_path() /
                       ("caum_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(p);
    return p;
}

Mat random_mat(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double sd = 0.4) {
    std::normal_distribution<double> g(0.0, sd);
    Mat m(rows, cols);
    for (double& v : m.a) v = g(rng);
    return m;
}

EncodedDataset encoded_synthetic(const SyntheticConfig& syn, const fs::path& dir,
                                 std::size_t title_len, std::size_t entity_len) {
    generate_synthetic(syn, dir.string());
    Catalog cat = parse_news_tsv((dir / "news.tsv").string());
    BehaviorLog tr = parse_behaviors_tsv((dir / "behaviors.train.tsv").string());
    BehaviorLog va = parse_behaviors_tsv((dir / "behaviors.valid.tsv").string());
    Vocabs v = build_vocabs(cat);
    return encode_dataset(cat, tr, va, v, title_len, entity_len);
}

// ---------- 1: gradients ----------

void check_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    using caum::testing::fd_check;
    using caum::testing::fd_check5;
    using caum::testing::random_tensor;

    double worst_op = 0.0;
    {
        std::mt19937_64 rng(5);
        Tensor a = random_tensor(3, 4, rng);
        Tensor b = random_tensor(4, 2, rng);
        Tensor c = random_tensor(3, 4, rng);
        Tensor row = random_tensor(1, 4, rng);
        Tensor table = random_tensor(6, 4, rng);
        Mask mask{1, 1, 0, 1};
        auto probe = [&](const std::function<Tensor()>& f, std::vector<Tensor> leaves) {
            worst_op = std::max(worst_op, fd_check(f, std::move(leaves)).max_rel_err);
        };
        probe([&] { return sum(matmul(a, b)); }, {a, b});
        probe([&] { return sum(mul(caum::tanh(a), c)); }, {a, c});
        probe([&] { return sum(mul(sigmoid(a), c)); }, {a, c});
        probe([&] { return sum(mul(relu(a), c)); }, {a, c});
        probe([&] { return sum(caum::log(add(mul(a, a), Tensor::scalar(1.0)))); }, {a});
        probe([&] { return mean(mul(a, c)); }, {a, c});
        probe([&] { return sum(mul(add(a, row), c)); }, {a, row, c});
        probe([&] { return sum(mul(sub(a, c), c)); }, {a, c});
        probe([&] { return sum(mul(scale(a, 0.3), c)); }, {a, c});
        probe([&] { return sum(mul(transpose(a), transpose(c))); }, {a, c});
        probe([&] { return sum(mul(softmax_rows(a, &mask), c)); }, {a, c});
        probe([&] { return sum(mul(shift_rows(a, 1), c)); }, {a, c});
        probe([&] { return sum(mul(repeat_rows(row, 3), c)); }, {row, c});
        probe([&] { return sum(mul(concat_cols({a, c}), concat_cols({c, a}))); }, {a, c});
        probe([&] { return sum(mul(concat_rows({a, c}), concat_rows({c, a}))); }, {a, c});
        probe([&] { return sum(mul(embedding_lookup(table, {2, 0, 2}), a)); }, {table, a});
    }

    // end-to-end pairwise loss, every parameter coordinate
    ModelConfig cfg;
    cfg.d = 8;
    cfg.heads = 2;
    cfg.history_n = 4;
    cfg.title_len = 5;
    cfg.entity_len = 3;
    cfg.phi_hidden = 4;
    cfg.att_hidden = 4;
    cfg.window_h = 1;
    cfg.word_vocab = 12;
    cfg.entity_vocab = 6;
    cfg.topic_vocab = 4;
    ParamStore params = init_params(cfg, 17);

    std::vector<EncodedNews> articles;
    std::mt19937_64 art_rng(23);
    std::uniform_int_distribution<std::uint32_t> word(1, 11), ent(0, 5), topic(0, 3);
    for (int i = 0; i < 6; ++i) {
        EncodedNews a;
        for (std::size_t t = 0; t < cfg.title_len; ++t)
            a.title_ids.push_back(t < 3 ? word(art_rng) : 0);
        for (std::size_t t = 0; t < cfg.entity_len; ++t)
            a.entity_ids.push_back(t < 1 && i % 2 == 0 ? ent(art_rng) : 0);
        a.topic_id = topic(art_rng);
        articles.push_back(a);
    }

    auto loss_fn = [&]() {
        std::vector<Tensor> rows;
        for (int i = 0; i < 4; ++i) rows.push_back(encode_news(articles[i], params, cfg));
        ClickMatrix clicks{concat_rows(rows), Mask{1, 1, 1, 1}};
        Tensor pos = encode_news(articles[4], params, cfg);
        Tensor neg = encode_news(articles[5], params, cfg);
        Tensor yp = match_score(encode_user(clicks, pos, params, cfg), pos);
        Tensor yn = match_score(encode_user(clicks, neg, params, cfg), neg);
        return bpr_loss({{yp, yn}});
    };

    std::vector<Tensor> leaves;
    for (const auto& name : params.names()) leaves.push_back(params.get(name));
    for (auto& l : leaves) l.zero_grad();
    backward(loss_fn());

    // A step that carries a hinge pre-activation across zero corrupts the
    // stencil, so each coordinate may retry at smaller steps.
    caum::testing::FdReport rep;
    for (auto& leaf : leaves) {
        const std::vector<double> analytic = leaf.grad();
        for (std::size_t i = 0; i < leaf.size(); ++i) {
            const double an = analytic.empty() ? 0.0 : analytic[i];
            double& x = leaf.values()[i];
            const double saved = x;
            double best = 1e300;
            for (const double eps : {1e-3, 2e-4, 4e-5}) {
                auto eval = [&](double delta) {
                    x = saved + delta;
                    const double v = loss_fn().item();
                    x = saved;
                    return v;
                };
                const double fd = (-eval(2 * eps) + 8 * eval(eps) -
                                   8 * eval(-eps) + eval(-2 * eps)) /
                                  (12.0 * eps);
                if (std::abs(an) <= 1e-8 && std::abs(fd) <= 1e-8) {
                    best = 0.0;
                    break;
                }
                best = std::min(best, std::abs(fd - an) /
                                          std::max({std::abs(an), std::abs(fd), 1e-8}));
                if (best < 1e-6) break;
            }
            if (best == 0.0 && std::abs(an) <= 1e-8) continue;
            rep.max_rel_err = std::max(rep.max_rel_err, best);
            ++rep.checked;
        }
    }

    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool ok = worst_op < 1e-4 && rep.max_rel_err < 1e-4 && secs < 60.0;
    report(1, "finite differences agree with backward gradients", ok,
           fmt("op worst rel err %.2e, end-to-end worst %.2e over %zu coords, %.1f s",
               worst_op, rep.max_rel_err, rep.checked, secs));
}

// ---------- 2: candidate zeroing ----------

void check_candidate_zeroing() {
    std::mt19937_64 rng(29);
    ModelConfig cfg;
    cfg.d = 16;
    cfg.heads = 4;
    cfg.history_n = 6;
    cfg.phi_hidden = 8;
    cfg.att_hidden = 8;
    cfg.word_vocab = cfg.entity_vocab = cfg.topic_vocab = 4;
    ParamStore params = init_params(cfg, 31);

    ClickMatrix clicks{Tensor::zeros(6, 16), Mask(6, 1)};
    caum::testing::fill_random(clicks.vectors, rng);
    Tensor zero = Tensor::zeros(1, 16);

    // plain self-attention with the same weights
    Tensor q = matmul(clicks.vectors, transpose(params.get("user.Qu")));
    std::vector<Tensor> heads;
    for (std::size_t k = 0; k < cfg.heads; ++k) {
        Tensor v = matmul(clicks.vectors,
                          transpose(params.get("user.Wr." + std::to_string(k))));
        Tensor gamma = softmax_rows(matmul(q, transpose(v)), &clicks.mask);
        heads.push_back(matmul(matmul(gamma, clicks.vectors),
                               transpose(params.get("user.Wo." + std::to_string(k)))));
    }
    Tensor plain = concat_cols(heads);
    Tensor zeroed = candi_self_att(clicks, zero, params, cfg);
    double att_diff = 0.0;
    for (std::size_t i = 0; i < zeroed.size(); ++i)
        att_diff = std::max(att_diff,
                            std::abs(zeroed.values()[i] - plain.values()[i]));

    Tensor cand = Tensor::zeros(1, 16);
    caum::testing::fill_random(cand, rng);
    Tensor with_zero_cand = encode_user(clicks, zero, params, cfg);
    ModelConfig base = cfg;
    base.candi_self_att = base.candi_cnn = base.candi_att = false;
    Tensor base_out = encode_user(clicks, cand, params, base);
    double user_diff = 0.0;
    for (std::size_t j = 0; j < cfg.d; ++j)
        user_diff = std::max(user_diff,
                             std::abs(with_zero_cand.at(0, j) - base_out.at(0, j)));

    report(2, "zero candidate collapses to the candidate-agnostic encoder",
           att_diff < 1e-9 && user_diff < 1e-9,
           fmt("self-attention max diff %.2e, user encoder max diff %.2e", att_diff,
               user_diff));
}

// ---------- 3: amortized vs naive ----------

void check_equivalence() {
    std::mt19937_64 rng(37);
    std::uniform_int_distribution<std::size_t> d_pick(1, 8);
    std::uniform_int_distribution<std::size_t> n_pick(1, 16);
    std::uniform_int_distribution<std::size_t> m_pick(1, 8);
    double worst64 = 0.0, worst32 = 0.0;
    for (int t = 0; t < 120; ++t) {
        const std::size_t d = 8 * d_pick(rng);
        const std::size_t n = n_pick(rng);
        const std::size_t m = m_pick(rng);
        ModelConfig cfg;
        cfg.d = d;
        cfg.heads = (t % 3 == 0) ? 1 : 2;
        cfg.history_n = n;
        cfg.phi_hidden = 8;
        cfg.att_hidden = 8;
        cfg.window_h = n >= 3 ? 1 : 0;
        cfg.candi_self_att = t % 5 != 1;
        cfg.candi_cnn = t % 5 != 2;
        cfg.candi_att = t % 5 != 3;
        InferenceParams ip = random_inference_params(cfg, 500 + t);
        Mat clicks = random_mat(n, d, rng);
        Mask mask(n, 1);
        Mat cands = random_mat(m, d, rng);

        OpCounter cn, ca;
        const auto ref = naive_scores(clicks, mask, cands, ip, cn);
        const auto fast =
            score_candidates(precompute_user(clicks, mask, ip, ca), cands, ip, ca);
        for (std::size_t i = 0; i < m; ++i)
            worst64 = std::max(worst64, std::abs(ref[i] - fast[i]));

        if (t < 20) {
            // simulate 32-bit storage: round every tensor to f32 resolution
            InferenceParams ip32 = ip;
            auto round32 = [](Mat& mm) {
                for (double& v : mm.a) v = static_cast<double>(static_cast<float>(v));
            };
            round32(ip32.user_qu);
            round32(ip32.user_qc);
            for (auto& w : ip32.user_wr) round32(w);
            for (auto& w : ip32.user_wo) round32(w);
            round32(ip32.cnn_wctx);
            round32(ip32.cnn_wcand);
            round32(ip32.fuse_ps);
            round32(ip32.fuse_pl);
            round32(ip32.phi_w1m);
            round32(ip32.phi_w1c);
            round32(ip32.gs);
            for (auto& w : ip32.gmap) round32(w);
            Mat clicks32 = clicks, cands32 = cands;
            round32(clicks32);
            round32(cands32);
            OpCounter c2, c3;
            const auto ref32 = naive_scores(clicks32, mask, cands32, ip32, c2);
            const auto fast32 = score_candidates(
                precompute_user(clicks32, mask, ip32, c3), cands32, ip32, c3);
            for (std::size_t i = 0; i < m; ++i)
                worst32 = std::max(worst32, std::abs(ref32[i] - fast32[i]));
        }
    }
    report(3, "amortized scores equal naive scores", worst64 < 1e-9 && worst32 < 1e-5,
           fmt("max diff %.2e over 120 instances (f32-rounded params: %.2e)", worst64,
               worst32));
}

// ---------- 4: complexity ----------

void check_complexity() {
    std::mt19937_64 rng(41);
    const std::size_t N = 50, M = 100, D = 400;
    const double closed_form =
        static_cast<double>((3 * N + M) * D * D + (N * N + M * N) * D);

    auto counts_for = [&](std::size_t heads, std::size_t hid, std::size_t h,
                          std::size_t n, std::size_t m, std::size_t d) {
        ModelConfig cfg;
        cfg.d = d;
        cfg.heads = heads;
        cfg.history_n = n;
        cfg.phi_hidden = hid;
        cfg.att_hidden = hid;
        cfg.window_h = h;
        InferenceParams ip = random_inference_params(cfg, 600 + d);
        Mat clicks = random_mat(n, d, rng);
        Mask mask(n, 1);
        Mat cands = random_mat(m, d, rng);
        OpCounter c;
        score_candidates(precompute_user(clicks, mask, ip, c), cands, ip, c);
        return c;
    };

    // leanest faithful configuration: one head, narrow weight MLP, window 1
    OpCounter lean = counts_for(1, 8, 0, N, M, D);
    const double ratio = static_cast<double>(lean.total()) / closed_form;
    OpCounter desk = counts_for(4, 32, 1, N, M, D);
    const double desk_ratio = static_cast<double>(desk.total()) / closed_form;

    // exact marginal candidate cost
    OpCounter at_m = counts_for(1, 8, 0, N, M, D);
    OpCounter at_m1 = counts_for(1, 8, 0, N, M + 1, D);
    const bool marginal_ok =
        at_m1.per_candidate - at_m.per_candidate == at_m.per_candidate / M &&
        at_m1.precompute == at_m.precompute;

    // log-log slope of the per-candidate cost in d
    std::vector<double> lx, ly;
    for (std::size_t d : {128u, 256u, 512u, 1024u}) {
        OpCounter c = counts_for(1, 8, 0, 4, 8, d);
        lx.push_back(std::log(static_cast<double>(d)));
        ly.push_back(std::log(static_cast<double>(c.per_candidate) / 8.0));
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= lx.size();
    my /= ly.size();
    double num = 0, den = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) * (lx[i] - mx);
    }
    const double slope = num / den;

    const bool ok = ratio < 3.0 && ratio > 1.0 / 3.0 && marginal_ok &&
                    std::abs(slope - 2.0) <= 0.1;
    report(4, "multiplication counts track the closed-form complexity", ok,
           fmt("N=50 M=100 d=400: %.1fM vs %.1fM closed form (%.2fx single-head, "
               "%.2fx desk constants); marginal %s; slope %.3f",
               lean.total() / 1e6, closed_form / 1e6, ratio, desk_ratio,
               marginal_ok ? "exact" : "DRIFTS", slope));
}

// ---------- 5: benchmark ----------

void check_benchmark() {
    const auto t0 = std::chrono::steady_clock::now();
    BenchConfig bc;
    bc.n_values = {50};
    bc.m_values = {10, 50, 100};
    bc.d_values = {64};
    bc.reps = 11;
    auto rows = run_bench(bc);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    double naive50 = 0, fast50 = 0;
    std::string table;
    for (const auto& r : rows) {
        table += fmt("%s M=%zu %.2fms; ", r.variant.c_str(), r.m,
                     r.median_ns / 1e6);
        if (r.m == 50) (r.variant == "naive" ? naive50 : fast50) = r.median_ns;
    }
    const double speedup = naive50 / fast50;
    report(5, "amortized wall clock beats naive at desk scale",
           speedup >= 2.0 && secs < 300.0,
           fmt("N=50 d=64: %.1fx at M=50 (%sreport in %.1f s)", speedup, table.c_str(),
               secs));
}

// ---------- 6: metric oracles ----------

void check_metrics() {
    std::mt19937_64 rng(43);
    std::uniform_int_distribution<std::size_t> size_pick(2, 50);
    std::uniform_real_distribution<double> score(0.0, 1.0);
    std::uniform_int_distribution<int> coin(0, 1);
    std::uniform_int_distribution<int> quantized(0, 9);

    double worst_auc = 0.0, worst_rank = 0.0;
    for (int t = 0; t < 1000; ++t) {
        ScoredImpression s;
        const std::size_t n = size_pick(rng);
        for (std::size_t i = 0; i < n; ++i) {
            s.scores.push_back(coin(rng) ? score(rng) : quantized(rng) / 10.0);
            s.labels.push_back(coin(rng));
        }
        s.labels[0] = 1;
        s.labels[1] = 0;

        double wins = 0.0;
        std::size_t pairs = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (s.labels[i] != 1 || s.labels[j] != 0) continue;
                ++pairs;
                wins += s.scores[i] > s.scores[j] ? 1.0
                        : s.scores[i] == s.scores[j] ? 0.5
                                                     : 0.0;
            }
        worst_auc = std::max(worst_auc, std::abs(*auc(s) - wins / pairs));

        // rank-based loops
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return s.scores[a] > s.scores[b];
        });
        double rr = 0.0, dcg5 = 0.0, idcg5 = 0.0;
        std::size_t positives = 0;
        for (std::size_t r = 0; r < n; ++r)
            if (s.labels[order[r]] == 1) {
                rr += 1.0 / (r + 1);
                ++positives;
                if (r < 5) dcg5 += 1.0 / std::log2(r + 2.0);
            }
        for (std::size_t r = 0; r < std::min<std::size_t>(5, positives); ++r)
            idcg5 += 1.0 / std::log2(r + 2.0);
        worst_rank = std::max(worst_rank, std::abs(*mrr(s) - rr / positives));
        worst_rank = std::max(worst_rank, std::abs(*ndcg_at(s, 5) - dcg5 / idcg5));
    }

    std::vector<ScoredImpression> random_scored;
    for (int i = 0; i < 6000; ++i) {
        ScoredImpression s;
        for (int c = 0; c < 10; ++c) {
            s.scores.push_back(score(rng));
            s.labels.push_back(c == 0 ? 1 : 0);
        }
        random_scored.push_back(std::move(s));
    }
    const double random_auc = evaluate_scored(random_scored).auc.mean;

    const bool ok = worst_auc < 1e-12 && worst_rank < 1e-12 &&
                    std::abs(random_auc - 0.5) <= 0.02;
    report(6, "ranking metrics match independent oracles", ok,
           fmt("pairwise-count diff %.1e, rank-loop diff %.1e, random scorer AUC %.4f",
               worst_auc, worst_rank, random_auc));
}

// ---------- 7: learnability ----------

void check_learnability(const fs::path& scratch) {
    const std::size_t threads =
        std::max<std::size_t>(1, std::thread::hardware_concurrency());
    SyntheticConfig syn; // 200 users, 500 news, seed 13
    EncodedDataset ds = encoded_synthetic(syn, scratch / "learn", 30, 5);

    TrainConfig cfg;
    cfg.model.d = 64;
    cfg.model.heads = 4;
    cfg.model.history_n = 20;
    cfg.model.title_len = 30;
    cfg.model.entity_len = 5;
    cfg.model.word_vocab = ds.word_vocab;
    cfg.model.entity_vocab = ds.entity_vocab;
    cfg.model.topic_vocab = ds.topic_vocab;
    cfg.epochs = 10;
    cfg.lr = 1e-3;
    cfg.seed = 42;

    EncodedDataset quiet = ds; // skip per-epoch validation scoring
    quiet.valid.clear();

    ParamStore caum_params = init_params(cfg.model, cfg.seed);
    train(quiet, cfg, caum_params);
    const double train_auc =
        evaluate_model(ds, ds.train, caum_params, cfg.model, threads).auc.mean;
    const double valid_auc =
        evaluate_model(ds, ds.valid, caum_params, cfg.model, threads).auc.mean;

    TrainConfig base_cfg = cfg;
    base_cfg.model.candi_self_att = false;
    base_cfg.model.candi_cnn = false;
    base_cfg.model.candi_att = false;
    ParamStore base_params = init_params(base_cfg.model, cfg.seed);
    train(quiet, base_cfg, base_params);
    const double base_valid =
        evaluate_model(ds, ds.valid, base_params, base_cfg.model, threads).auc.mean;

    const bool ok = train_auc >= 0.95 && valid_auc >= 0.70 && valid_auc > base_valid;
    report(7, "the model learns the synthetic topic preferences", ok,
           fmt("train AUC %.4f, valid AUC %.4f, candidate-agnostic valid AUC %.4f",
               train_auc, valid_auc, base_valid));
}

// ---------- 8: determinism ----------

void check_determinism(const fs::path& scratch) {
    SyntheticConfig syn;
    syn.users = 20;
    syn.news = 60;
    syn.seed = 7;
    EncodedDataset ds = encoded_synthetic(syn, scratch / "det", 12, 3);

    TrainConfig cfg;
    cfg.model.d = 16;
    cfg.model.heads = 2;
    cfg.model.history_n = 10;
    cfg.model.title_len = 12;
    cfg.model.entity_len = 3;
    cfg.model.phi_hidden = 8;
    cfg.model.att_hidden = 8;
    cfg.model.word_vocab = ds.word_vocab;
    cfg.model.entity_vocab = ds.entity_vocab;
    cfg.model.topic_vocab = ds.topic_vocab;
    cfg.epochs = 2;
    cfg.lr = 1e-3;
    cfg.seed = 7;

    auto run_once = [&](const std::string& tag) {
        const fs::path out = scratch / ("det_run_" + tag);
        ParamStore params = init_params(cfg.model, cfg.seed);
        train(ds, cfg, params, out.string());
        std::ifstream loss(out / "loss.csv", std::ios::binary);
        std::ifstream ckpt(out / "final.ckpt", std::ios::binary);
        auto slurp = [](std::ifstream& in) {
            return std::string((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
        };
        return std::make_pair(slurp(loss), slurp(ckpt));
    };

    const auto a = run_once("a");
    const auto b = run_once("b");
    const bool ok = !a.first.empty() && !a.second.empty() && a.first == b.first &&
                    a.second == b.second;
    report(8, "training twice with one seed is byte-identical", ok,
           fmt("loss logs %s (%zu bytes), checkpoints %s (%zu bytes)",
               a.first == b.first ? "match" : "DIFFER", a.first.size(),
               a.second == b.second ? "match" : "DIFFER", a.second.size()));
}

// ---------- 9: ingestion ----------

void check_ingestion(const fs::path& scratch) {
    const fs::path dir = scratch / "ingest";
    fs::create_directories(dir);
    {
        std::ofstream news(dir / "news.tsv");
        news << "N1\tsports\tsoccer\tTrade War Impacts Trade\tabs\turl\t"
                "[{\"WikidataId\": \"Q1\"}]\t[]\n"
             << "N2\tnews\tworld\tMarkets rally on trade deal\t\t\t[]\t[]\n"
             << "N3\tfinance\tstocks\tBig Tech earnings\t\t\t"
                "[{\"WikidataId\": \"Q2\"}, {\"WikidataId\": \"Q3\"}]\t[]\n"
             << "broken line without tabs\n"
             << "N4\ttech\tai\tChips surge\t\t\t[]\t[]\n"
             << "N5\ttech\tai\tbad entities\t\t\tnot-json\t[]\n"
             << "N6\thealth\tdiet\tEat more fiber\t\t\t[]\t[]\n"
             << "N7\thealth\tdiet\tSleep science\t\t\t[]\t[]\n"
             << "N8\ttravel\tair\tCheap flights return\t\t\t[]\t[]\n"
             << "N9\ttravel\tair\tIsland hopping\t\t\t[]\t[]\n"
             << "N10\tnews\tlocal\tCity budget vote\t\t\t[]\t[]\n"
             << "N11\tnews\tlocal\tNew park opens\t\t\t[]\t[]\n"
             << "N12\tsports\tgolf\tMajor upset\t\t\t[]\t[]\n"
             << "N13\tsports\tgolf\tRookie wins\t\t\t[]\t[]\n"
             << "N14\tfinance\tbonds\tYields fall\t\t\t[]\t[]\n"
             << "N15\tfinance\tbonds\tYields fall again\t\t\t[]\t[]\n"
             << "N16\ttech\tweb\tBrowser wars\t\t\t[]\t[]\n"
             << "N17\ttech\tweb\tStandards body meets\t\t\t[]\t[]\n"
             << "N18\thealth\tmind\tMeditation study\t\t\t[]\t[]\n"
             << "N19\thealth\tmind\tTherapy apps\t\t\t[]\t[]\n"
             << "N20\tnews\tworld\tSummit concludes\t\t\t[]\t[]\n";
    }
    {
        std::ofstream beh(dir / "behaviors.tsv");
        beh << "1\tU1\t11/11/2019 9:00 AM\tN3 N4\tN1-1 N2-0\n"
            << "2\tU2\t11/11/2019 9:01 AM\t\tN3-0 N1-1\n"      // empty history
            << "3\tU3\t11/11/2019 9:02 AM\tN1\tN2-0 N3 N1-1\n" // unlabeled token
            << "4\tU4\t11/11/2019 9:03 AM\tN1 N99 N2\tN4-1 N6-0 N7-0\n"
            << "5\tU5\tonly four fields\n";
    }

    bool ok = true;
    std::string detail;
    try {
        Catalog cat = parse_news_tsv((dir / "news.tsv").string());
        BehaviorLog log = parse_behaviors_tsv((dir / "behaviors.tsv").string());
        Vocabs v = build_vocabs(cat);
        EncodedDataset ds = encode_dataset(cat, log, {}, v, 10, 3);
        EncodedDataset ds2 = encode_dataset(cat, log, {}, v, 10, 3);

        bool identical = ds.news.size() == ds2.news.size();
        for (std::size_t i = 0; identical && i < ds.news.size(); ++i)
            identical = ds.news[i].title_ids == ds2.news[i].title_ids &&
                        ds.news[i].entity_ids == ds2.news[i].entity_ids &&
                        ds.news[i].topic_id == ds2.news[i].topic_id;

        ok = cat.articles.size() == 19 && cat.malformed == 2 &&
             log.impressions.size() == 3 && log.skipped == 2 &&
             log.impressions[1].history.empty() && ds.train.size() == 3 &&
             ds.dropped_history_ids == 1 && identical;
        detail = fmt("19 articles (%zu), 2 malformed (%zu), 3 impressions (%zu), "
                     "2 skipped (%zu), 1 dropped id (%zu), re-encode %s",
                     cat.articles.size(), cat.malformed, log.impressions.size(),
                     log.skipped, ds.dropped_history_ids,
                     identical ? "identical" : "DIFFERS");
    } catch (const std::exception& e) {
        ok = false;
        detail = std::string("exception: ") + e.what();
    }
    report(9, "fixture ingestion produces exact skip counts", ok, detail);
}

} // namespace

int main() {
    const fs::path scratch = scratch_dir();
    check_gradients();
    check_candidate_zeroing();
    check_equivalence();
    check_complexity();
    check_benchmark();
    check_metrics();
    check_learnability(scratch);
    check_determinism(scratch);
    check_ingestion(scratch);
    fs::remove_all(scratch);
    if (failures > 0) std::printf("%d of 9 checks failed\n", failures);
    return failures == 0 ? 0 : 1;
}
