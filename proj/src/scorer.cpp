#include "caum/scorer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

namespace caum {

namespace {

// ---- counted kernels (m*k*n multiplications per matrix product) ----

void count(std::uint64_t* cnt, std::uint64_t n) {
    if (cnt) *cnt += n;
}

// A(m x k) * B(k x n)
Mat mul_ab(const Mat& a, const Mat& b, std::uint64_t* cnt) {
    Mat c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* ar = a.row(i);
        double* cr = c.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double av = ar[k];
            const double* br = b.row(k);
            for (std::size_t j = 0; j < b.cols; ++j) cr[j] += av * br[j];
        }
    }
    count(cnt, static_cast<std::uint64_t>(a.rows) * a.cols * b.cols);
    return c;
}

// A(m x k) * B^T where bt is (n x k)
Mat mul_abt(const Mat& a, const Mat& bt, std::uint64_t* cnt) {
    Mat c(a.rows, bt.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* ar = a.row(i);
        double* cr = c.row(i);
        for (std::size_t j = 0; j < bt.rows; ++j) {
            const double* br = bt.row(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) acc += ar[k] * br[k];
            cr[j] = acc;
        }
    }
    count(cnt, static_cast<std::uint64_t>(a.rows) * a.cols * bt.rows);
    return c;
}

// M(r x c) * x(c)
std::vector<double> matvec(const Mat& m, const std::vector<double>& x, std::uint64_t* cnt) {
    std::vector<double> y(m.rows, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* r = m.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) acc += r[j] * x[j];
        y[i] = acc;
    }
    count(cnt, static_cast<std::uint64_t>(m.rows) * m.cols);
    return y;
}

double dot(const double* x, const double* y, std::size_t n, std::uint64_t* cnt) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    count(cnt, n);
    return acc;
}

void masked_softmax_row(double* row, std::size_t n, const Mask& mask) {
    double mx = -1e300;
    for (std::size_t j = 0; j < n; ++j)
        if (mask[j]) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        if (mask[j]) {
            row[j] = std::exp(row[j] - mx);
            z += row[j];
        } else {
            row[j] = 0.0;
        }
    }
    for (std::size_t j = 0; j < n; ++j)
        if (mask[j]) row[j] /= z;
}

Mat window_concat(const Mat& clicks, std::size_t h) {
    const std::size_t n = clicks.rows, d = clicks.cols, w = 2 * h + 1;
    Mat x(n, w * d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t wi = 0; wi < w; ++wi) {
            const long long src = static_cast<long long>(i) + static_cast<long long>(wi) -
                                  static_cast<long long>(h);
            if (src < 0 || src >= static_cast<long long>(n)) continue;
            const double* from = clicks.row(static_cast<std::size_t>(src));
            double* to = x.row(i) + wi * d;
            std::copy(from, from + d, to);
        }
    return x;
}

Mat from_tensor(const Tensor& t) {
    Mat m(t.rows(), t.cols());
    m.a = t.values();
    return m;
}

Mat col_block(const Mat& m, std::size_t start, std::size_t width) {
    Mat out(m.rows, width);
    for (std::size_t i = 0; i < m.rows; ++i)
        std::copy(m.row(i) + start, m.row(i) + start + width, out.row(i));
    return out;
}

} // namespace

InferenceParams build_inference(const ParamStore& params, const ModelConfig& cfg) {
    cfg.validate();
    InferenceParams ip;
    ip.cfg = cfg;
    ip.revision = params.revision();
    const std::size_t d = cfg.d, dh = cfg.head_dim();

    if (params.has("word_emb")) {
        ip.word_emb = from_tensor(params.get("word_emb"));
        ip.entity_emb = from_tensor(params.get("entity_emb"));
        ip.topic_emb = from_tensor(params.get("topic_emb"));
        auto load_seq = [&](InferenceParams::SeqEncoder& se, const std::string& prefix) {
            se.qu = from_tensor(params.get(prefix + ".Qu"));
            for (std::size_t k = 0; k < cfg.heads; ++k) {
                se.wr.push_back(from_tensor(params.get(prefix + ".Wr." + std::to_string(k))));
                se.wo.push_back(from_tensor(params.get(prefix + ".Wo." + std::to_string(k))));
            }
            se.att_w = from_tensor(params.get(prefix + ".att.W"));
            se.att_v = from_tensor(params.get(prefix + ".att.v"));
            se.att_b = params.get(prefix + ".att.b").values();
            se.empty = params.get(prefix + ".empty").values();
        };
        load_seq(ip.title, "title");
        load_seq(ip.ent, "ent");
    }

    ip.user_qu = from_tensor(params.get("user.Qu"));
    ip.user_qc = from_tensor(params.get("user.Qc"));
    for (std::size_t k = 0; k < cfg.heads; ++k) {
        ip.user_wr.push_back(from_tensor(params.get("user.Wr." + std::to_string(k))));
        ip.user_wo.push_back(from_tensor(params.get("user.Wo." + std::to_string(k))));
    }
    ip.cnn_wctx = from_tensor(params.get("cnn.Wctx"));
    ip.cnn_wcand = from_tensor(params.get("cnn.Wcand"));
    ip.cnn_b = params.get("cnn.b").values();
    Mat fuse_p = from_tensor(params.get("fuse.P"));
    ip.fuse_ps = col_block(fuse_p, 0, d);
    ip.fuse_pl = col_block(fuse_p, d, d);
    Mat phi_w1 = from_tensor(params.get("phi.W1"));
    ip.phi_w1m = col_block(phi_w1, 0, d);
    ip.phi_w1c = col_block(phi_w1, d, d);
    ip.phi_b1 = params.get("phi.b1").values();
    {
        const Mat& w2 = from_tensor(params.get("phi.w2"));
        ip.phi_w2 = w2.a;
    }
    ip.phi_b2 = params.get("phi.b2").values()[0];

    // Load-time foldings (parameter-only, done once per model).
    ip.gs = mul_ab(ip.phi_w1m, ip.fuse_ps, nullptr);
    Mat gl = mul_ab(ip.phi_w1m, ip.fuse_pl, nullptr);
    for (std::size_t k = 0; k < cfg.heads; ++k)
        ip.gmap.push_back(mul_ab(col_block(gl, k * dh, dh), ip.user_wo[k], nullptr));
    return ip;
}

// ---------- news encoding (inference) ----------

namespace {

std::vector<double> seq_encode(const InferenceParams::SeqEncoder& se, const Mat& emb,
                               const Mask& mask, std::size_t heads) {
    bool any = false;
    for (auto m : mask) any = any || m;
    if (!any) return se.empty;

    const std::size_t len = emb.rows, d = emb.cols;
    Mat q = mul_abt(emb, se.qu, nullptr);
    Mat h(len, d);
    const std::size_t dh = d / heads;
    for (std::size_t k = 0; k < heads; ++k) {
        Mat v = mul_abt(emb, se.wr[k], nullptr);
        Mat scores = mul_abt(q, v, nullptr);
        for (std::size_t i = 0; i < len; ++i)
            masked_softmax_row(scores.row(i), len, mask);
        Mat agg = mul_ab(scores, emb, nullptr);
        Mat hk = mul_abt(agg, se.wo[k], nullptr);
        for (std::size_t i = 0; i < len; ++i)
            std::copy(hk.row(i), hk.row(i) + dh, h.row(i) + k * dh);
    }
    Mat hidden = mul_abt(h, se.att_w, nullptr);
    std::vector<double> score(len, 0.0);
    for (std::size_t i = 0; i < len; ++i) {
        for (std::size_t j = 0; j < hidden.cols; ++j)
            hidden.at(i, j) = std::tanh(hidden.at(i, j) + se.att_b[j]);
        score[i] = dot(hidden.row(i), se.att_v.a.data(), hidden.cols, nullptr);
    }
    masked_softmax_row(score.data(), len, mask);
    std::vector<double> pooled(d, 0.0);
    for (std::size_t i = 0; i < len; ++i) {
        if (score[i] == 0.0) continue;
        const double* r = h.row(i);
        for (std::size_t j = 0; j < d; ++j) pooled[j] += score[i] * r[j];
    }
    return pooled;
}

Mask mask_of(const std::vector<std::uint32_t>& ids) {
    Mask m(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) m[i] = ids[i] != 0;
    return m;
}

Mat gather_rows(const Mat& table, const std::vector<std::uint32_t>& ids) {
    Mat out(ids.size(), table.cols);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= table.rows)
            throw IndexError("embedding id " + std::to_string(ids[i]) +
                             " outside table of " + std::to_string(table.rows) + " rows");
        std::copy(table.row(ids[i]), table.row(ids[i]) + table.cols, out.row(i));
    }
    return out;
}

} // namespace

std::vector<double> encode_news_infer(const EncodedNews& article,
                                      const InferenceParams& ip) {
    const std::size_t d = ip.cfg.d;
    auto nt = seq_encode(ip.title, gather_rows(ip.word_emb, article.title_ids),
                         mask_of(article.title_ids), ip.cfg.heads);
    auto ne = seq_encode(ip.ent, gather_rows(ip.entity_emb, article.entity_ids),
                         mask_of(article.entity_ids), ip.cfg.heads);
    std::vector<double> n(d);
    for (std::size_t j = 0; j < d; ++j)
        n[j] = nt[j] + ne[j] + ip.topic_emb.at(article.topic_id, j);
    return n;
}

// ---------- amortized path ----------

UserPrecompute precompute_user(const Mat& clicks, const Mask& mask,
                               const InferenceParams& ip, OpCounter& counter) {
    if (clicks.cols != ip.cfg.d)
        throw ShapeError("precompute_user: clicks are " + std::to_string(clicks.cols) +
                         "-dimensional, model d=" + std::to_string(ip.cfg.d));
    if (mask.size() != clicks.rows)
        throw ShapeError("precompute_user: mask length " + std::to_string(mask.size()) +
                         " vs " + std::to_string(clicks.rows) + " click rows");
    bool any = false;
    for (auto m : mask) any = any || m;
    if (!any) throw ContractError("precompute_user: history mask has no clicks");

    std::uint64_t* cnt = &counter.precompute;
    UserPrecompute pre;
    pre.revision = ip.revision;
    pre.mask = mask;
    pre.clicks = clicks;
    pre.q = mul_abt(clicks, ip.user_qu, cnt);
    for (std::size_t k = 0; k < ip.cfg.heads; ++k) {
        pre.v.push_back(mul_abt(clicks, ip.user_wr[k], cnt));
        pre.rhat.push_back(mul_abt(pre.q, pre.v.back(), cnt));
        pre.o.push_back(mul_abt(clicks, ip.user_wo[k], cnt));
        pre.g.push_back(mul_abt(clicks, ip.gmap[k], cnt));
    }
    pre.ctx = mul_abt(window_concat(clicks, ip.cfg.window_h), ip.cnn_wctx, cnt);
    return pre;
}

std::vector<double> score_candidates(const UserPrecompute& pre, const Mat& candidates,
                                     const InferenceParams& ip, OpCounter& counter) {
    if (pre.revision != ip.revision)
        throw StalenessError("user precompute built at parameter revision " +
                             std::to_string(pre.revision) + ", current is " +
                             std::to_string(ip.revision));
    const std::size_t n = pre.q.rows, d = ip.cfg.d, heads = ip.cfg.heads;
    const std::size_t dh = ip.cfg.head_dim(), hid = ip.phi_b1.size();
    std::uint64_t* cnt = &counter.per_candidate;
    std::vector<double> out;
    out.reserve(candidates.rows);

    for (std::size_t ci = 0; ci < candidates.rows; ++ci) {
        std::vector<double> nc(candidates.row(ci), candidates.row(ci) + d);

        std::vector<double> qc(d, 0.0), wc(d, 0.0), phic(hid, 0.0);
        if (ip.cfg.candi_self_att) qc = matvec(ip.user_qc, nc, cnt);
        if (ip.cfg.candi_cnn) wc = matvec(ip.cnn_wcand, nc, cnt);
        if (ip.cfg.candi_att) phic = matvec(ip.phi_w1c, nc, cnt);

        // candidate-aware attention weights per head
        std::vector<Mat> gamma(heads);
        for (std::size_t k = 0; k < heads; ++k) {
            const std::vector<double> t = matvec(pre.v[k], qc, cnt); // q_c . v_j
            gamma[k] = pre.rhat[k];
            for (std::size_t i = 0; i < n; ++i) {
                double* row = gamma[k].row(i);
                for (std::size_t j = 0; j < n; ++j) row[j] += t[j];
                masked_softmax_row(row, n, pre.mask);
            }
        }

        // local context, completed with the candidate part
        Mat s(n, d);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                const double x = pre.ctx.at(i, j) + wc[j] + ip.cnn_b[j];
                s.at(i, j) = x > 0.0 ? x : 0.0;
            }

        // Phi over the fused representation without materializing it:
        // W1 [m_i; n_c] = Gs s_i + sum_k gamma_k g_k + W1c n_c.
        Mat hidden = mul_abt(s, ip.gs, cnt); // N x hid
        for (std::size_t k = 0; k < heads; ++k) {
            Mat part = mul_ab(gamma[k], pre.g[k], cnt);
            for (std::size_t i = 0; i < n * hid; ++i) hidden.a[i] += part.a[i];
        }
        std::vector<double> e(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double* row = hidden.row(i);
            for (std::size_t j = 0; j < hid; ++j)
                row[j] = std::tanh(row[j] + phic[j] + ip.phi_b1[j]);
            e[i] = dot(row, ip.phi_w2.data(), hid, cnt) + ip.phi_b2;
        }
        masked_softmax_row(e.data(), n, pre.mask);

        // u = Ps (sum_i a_i s_i) + Pl (sum_i a_i l_i); the l-sum collapses
        // through beta_j = sum_i a_i gamma_ij onto the cached o_j.
        std::vector<double> s_sum(d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (e[i] == 0.0) continue;
            const double* r = s.row(i);
            for (std::size_t j = 0; j < d; ++j) s_sum[j] += e[i] * r[j];
        }
        count(cnt, static_cast<std::uint64_t>(n) * d);

        std::vector<double> l_sum(d, 0.0);
        for (std::size_t k = 0; k < heads; ++k) {
            std::vector<double> beta(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                if (e[i] == 0.0) continue;
                const double* row = gamma[k].row(i);
                for (std::size_t j = 0; j < n; ++j) beta[j] += e[i] * row[j];
            }
            count(cnt, static_cast<std::uint64_t>(n) * n);
            for (std::size_t j = 0; j < n; ++j) {
                if (beta[j] == 0.0) continue;
                const double* orow = pre.o[k].row(j);
                for (std::size_t t2 = 0; t2 < dh; ++t2)
                    l_sum[k * dh + t2] += beta[j] * orow[t2];
            }
            count(cnt, static_cast<std::uint64_t>(n) * dh);
        }

        const std::vector<double> us = matvec(ip.fuse_ps, s_sum, cnt);
        const std::vector<double> ul = matvec(ip.fuse_pl, l_sum, cnt);
        std::vector<double> u(d);
        for (std::size_t j = 0; j < d; ++j) u[j] = us[j] + ul[j];
        out.push_back(dot(nc.data(), u.data(), d, cnt));
    }
    return out;
}

// ---------- naive path ----------

std::vector<double> naive_scores(const Mat& clicks, const Mask& mask,
                                 const Mat& candidates, const InferenceParams& ip,
                                 OpCounter& counter) {
    const std::size_t n = clicks.rows, d = ip.cfg.d, heads = ip.cfg.heads;
    const std::size_t dh = ip.cfg.head_dim(), hid = ip.phi_b1.size();
    bool any = false;
    for (auto m : mask) any = any || m;
    if (!any) throw ContractError("naive_scores: history mask has no clicks");
    std::uint64_t* cnt = &counter.per_candidate;
    std::vector<double> out;
    out.reserve(candidates.rows);

    const Mat window = window_concat(clicks, ip.cfg.window_h);

    for (std::size_t ci = 0; ci < candidates.rows; ++ci) {
        std::vector<double> nc(candidates.row(ci), candidates.row(ci) + d);

        std::vector<double> qc(d, 0.0), wc(d, 0.0), phic(hid, 0.0);
        if (ip.cfg.candi_self_att) qc = matvec(ip.user_qc, nc, cnt);
        if (ip.cfg.candi_cnn) wc = matvec(ip.cnn_wcand, nc, cnt);
        if (ip.cfg.candi_att) phic = matvec(ip.phi_w1c, nc, cnt);

        const Mat q = mul_abt(clicks, ip.user_qu, cnt);
        Mat l(n, d);
        for (std::size_t k = 0; k < heads; ++k) {
            Mat v = mul_abt(clicks, ip.user_wr[k], cnt);
            Mat r = mul_abt(q, v, cnt);
            const std::vector<double> t = matvec(v, qc, cnt);
            for (std::size_t i = 0; i < n; ++i) {
                double* row = r.row(i);
                for (std::size_t j = 0; j < n; ++j) row[j] += t[j];
                masked_softmax_row(row, n, mask);
            }
            Mat agg = mul_ab(r, clicks, cnt);
            Mat lk = mul_abt(agg, ip.user_wo[k], cnt);
            for (std::size_t i = 0; i < n; ++i)
                std::copy(lk.row(i), lk.row(i) + dh, l.row(i) + k * dh);
        }

        Mat s = mul_abt(window, ip.cnn_wctx, cnt);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                const double x = s.at(i, j) + wc[j] + ip.cnn_b[j];
                s.at(i, j) = x > 0.0 ? x : 0.0;
            }

        Mat ms = mul_abt(s, ip.fuse_ps, cnt);
        Mat ml = mul_abt(l, ip.fuse_pl, cnt);
        Mat m(n, d);
        for (std::size_t i = 0; i < n * d; ++i) m.a[i] = ms.a[i] + ml.a[i];

        Mat hidden = mul_abt(m, ip.phi_w1m, cnt);
        std::vector<double> e(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double* row = hidden.row(i);
            for (std::size_t j = 0; j < hid; ++j)
                row[j] = std::tanh(row[j] + phic[j] + ip.phi_b1[j]);
            e[i] = dot(row, ip.phi_w2.data(), hid, cnt) + ip.phi_b2;
        }
        masked_softmax_row(e.data(), n, mask);

        std::vector<double> u(d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (e[i] == 0.0) continue;
            const double* r = m.row(i);
            for (std::size_t j = 0; j < d; ++j) u[j] += e[i] * r[j];
        }
        count(cnt, static_cast<std::uint64_t>(n) * d);
        out.push_back(dot(nc.data(), u.data(), d, cnt));
    }
    return out;
}

// ---------- benchmark ----------

InferenceParams random_inference_params(const ModelConfig& cfg, std::uint64_t seed) {
    ModelConfig full = cfg;
    if (full.word_vocab == 0) full.word_vocab = 2;
    if (full.entity_vocab == 0) full.entity_vocab = 2;
    if (full.topic_vocab == 0) full.topic_vocab = 2;
    ParamStore store = init_params(full, seed);
    return build_inference(store, full);
}

namespace {

Mat random_mat(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double sd) {
    std::normal_distribution<double> g(0.0, sd);
    Mat m(rows, cols);
    for (double& v : m.a) v = g(rng);
    return m;
}

std::uint64_t median_ns(std::vector<std::uint64_t>& xs) {
    std::sort(xs.begin(), xs.end());
    return xs[xs.size() / 2];
}

} // namespace

std::vector<BenchRow> run_bench(const BenchConfig& bc) {
    std::vector<BenchRow> rows;
    std::mt19937_64 rng(bc.seed);
    for (std::size_t d : bc.d_values) {
        ModelConfig cfg;
        cfg.d = d;
        cfg.heads = d % bc.heads == 0 ? bc.heads : 1;
        cfg.window_h = bc.window_h;
        cfg.phi_hidden = bc.phi_hidden;
        cfg.history_n = *std::max_element(bc.n_values.begin(), bc.n_values.end());
        InferenceParams ip = random_inference_params(cfg, bc.seed + d);
        for (std::size_t n : bc.n_values) {
            Mat clicks = random_mat(n, d, rng, 0.3);
            Mask mask(n, 1);
            for (std::size_t m : bc.m_values) {
                Mat cands = random_mat(m, d, rng, 0.3);

                // score equivalence gate before any timing
                OpCounter check_naive, check_amort;
                const auto ref = naive_scores(clicks, mask, cands, ip, check_naive);
                const auto pre = precompute_user(clicks, mask, ip, check_amort);
                const auto fast = score_candidates(pre, cands, ip, check_amort);
                for (std::size_t i = 0; i < ref.size(); ++i)
                    if (std::abs(ref[i] - fast[i]) > 1e-9)
                        throw ContractError(
                            "bench: naive/amortized disagreement " +
                            std::to_string(std::abs(ref[i] - fast[i])) + " at N=" +
                            std::to_string(n) + " M=" + std::to_string(m) +
                            " d=" + std::to_string(d));

                auto time_variant = [&](auto&& fn) {
                    std::vector<std::uint64_t> times;
                    for (std::size_t r = 0; r < bc.reps; ++r) {
                        const auto t0 = std::chrono::steady_clock::now();
                        fn();
                        const auto t1 = std::chrono::steady_clock::now();
                        times.push_back(static_cast<std::uint64_t>(
                            std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0)
                                .count()));
                    }
                    return median_ns(times);
                };

                BenchRow naive_row{"naive", n, m, d, bc.reps, 0, check_naive.total()};
                naive_row.median_ns = time_variant([&] {
                    OpCounter c;
                    naive_scores(clicks, mask, cands, ip, c);
                });
                rows.push_back(naive_row);

                BenchRow amort_row{"amortized", n, m, d, bc.reps, 0, check_amort.total()};
                amort_row.median_ns = time_variant([&] {
                    OpCounter c;
                    auto p = precompute_user(clicks, mask, ip, c);
                    score_candidates(p, cands, ip, c);
                });
                rows.push_back(amort_row);
            }
        }
    }
    return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
    std::ostringstream os;
    os << "variant,N,M,d,reps,median_ns,mult_count\n";
    for (const auto& r : rows)
        os << r.variant << ',' << r.n << ',' << r.m << ',' << r.d << ',' << r.reps << ','
           << r.median_ns << ',' << r.mult_count << '\n';
    return os.str();
}

std::string bench_summary(const std::vector<BenchRow>& rows) {
    std::ostringstream os;
    os << "variant      N     M     d   median_ms     mults\n";
    for (const auto& r : rows) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%-10s %5zu %5zu %5zu %11.3f %9.2fM\n",
                      r.variant.c_str(), r.n, r.m, r.d,
                      static_cast<double>(r.median_ns) / 1e6,
                      static_cast<double>(r.mult_count) / 1e6);
        os << buf;
    }
    return os.str();
}

} // namespace caum
