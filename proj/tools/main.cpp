#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "caum/checkpoint.hpp"
#include "caum/config.hpp"
#include "caum/data.hpp"
#include "caum/logging.hpp"
#include "caum/metrics.hpp"
#include "caum/model.hpp"
#include "caum/scorer.hpp"
#include "caum/trainer.hpp"

namespace fs = std::filesystem;
using namespace caum;

namespace {

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<std::size_t> split_sizes(const std::string& s) {
    std::vector<std::size_t> out;
    for (const auto& tok : split_list(s)) out.push_back(std::stoull(tok));
    return out;
}

KeyValueConfig default_run_config() {
    const ModelConfig m;
    const TrainConfig t;
    KeyValueConfig cfg;
    cfg.set("d", std::to_string(m.d));
    cfg.set("heads", std::to_string(m.heads));
    cfg.set("window", std::to_string(m.window_h));
    cfg.set("history", std::to_string(m.history_n));
    cfg.set("title-len", std::to_string(m.title_len));
    cfg.set("entity-len", std::to_string(m.entity_len));
    cfg.set("phi-hidden", std::to_string(m.phi_hidden));
    cfg.set("att-hidden", std::to_string(m.att_hidden));
    cfg.set("candi-self-att", "on");
    cfg.set("candi-cnn", "on");
    cfg.set("candi-att", "on");
    cfg.set("epochs", std::to_string(t.epochs));
    cfg.set("lr", "5e-05");
    cfg.set("batch", std::to_string(t.batch_size));
    cfg.set("negatives", std::to_string(t.negatives_per_positive));
    cfg.set("seed", std::to_string(t.seed));
    return cfg;
}

void apply_preset(KeyValueConfig& cfg, const std::string& preset) {
    if (preset == "desk") {
        cfg.set("d", "64");
        cfg.set("heads", "4");
        cfg.set("history", "20");
        cfg.set("lr", "0.001");
        cfg.set("epochs", "10");
    } else if (preset == "full") {
        const ModelConfig m = ModelConfig::full_scale();
        cfg.set("d", std::to_string(m.d));
        cfg.set("heads", std::to_string(m.heads));
        cfg.set("window", std::to_string(m.window_h));
        cfg.set("phi-hidden", std::to_string(m.phi_hidden));
        cfg.set("att-hidden", std::to_string(m.att_hidden));
        cfg.set("history", "50");
        cfg.set("lr", "5e-05");
        cfg.set("epochs", "3");
    } else {
        throw ContractError("unknown preset '" + preset + "' (expected desk or full)");
    }
}

ModelConfig model_from_config(const KeyValueConfig& cfg, const EncodedDataset& ds) {
    ModelConfig m;
    m.d = cfg.get_u64("d");
    m.heads = cfg.get_u64("heads");
    m.window_h = cfg.get_u64("window");
    m.history_n = cfg.get_u64("history");
    m.title_len = cfg.get_u64("title-len");
    m.entity_len = cfg.get_u64("entity-len");
    m.phi_hidden = cfg.get_u64("phi-hidden");
    m.att_hidden = cfg.get_u64("att-hidden");
    m.candi_self_att = cfg.get_bool("candi-self-att");
    m.candi_cnn = cfg.get_bool("candi-cnn");
    m.candi_att = cfg.get_bool("candi-att");
    m.word_vocab = ds.word_vocab;
    m.entity_vocab = ds.entity_vocab;
    m.topic_vocab = ds.topic_vocab;
    if (m.title_len != ds.title_len || m.entity_len != ds.entity_len)
        throw ContractError("config title-len/entity-len (" +
                            std::to_string(m.title_len) + "/" +
                            std::to_string(m.entity_len) +
                            ") do not match the encoded dataset (" +
                            std::to_string(ds.title_len) + "/" +
                            std::to_string(ds.entity_len) + ")");
    m.validate();
    return m;
}

TrainConfig train_from_config(const KeyValueConfig& cfg, const EncodedDataset& ds) {
    TrainConfig t;
    t.model = model_from_config(cfg, ds);
    t.epochs = cfg.get_u64("epochs");
    t.lr = cfg.get_double("lr");
    t.batch_size = cfg.get_u64("batch");
    t.negatives_per_positive = cfg.get_u64("negatives");
    t.seed = cfg.get_u64("seed");
    t.validate();
    return t;
}

struct Override {
    std::string flag;
    std::string key;
    std::string value;
};

void add_overrides(CLI::App* cmd, std::vector<Override>& slots) {
    static const std::vector<std::pair<std::string, std::string>> flag_table = {
        {"--d", "representation width (heads must divide it)"},
        {"--heads", "attention head count"},
        {"--window", "click-window half-width of the convolution branch"},
        {"--history", "clicks kept per user (most recent first)"},
        {"--title-len", "title tokens per article"},
        {"--entity-len", "entities per article"},
        {"--phi-hidden", "hidden width of the click-weight MLP"},
        {"--att-hidden", "hidden width of the pooling attention"},
        {"--candi-self-att", "on/off: candidate term in click self-attention"},
        {"--candi-cnn", "on/off: candidate term in the convolution branch"},
        {"--candi-att", "on/off: candidate term in click pooling"},
        {"--epochs", "training epochs"},
        {"--lr", "Adam learning rate"},
        {"--batch", "mini-batch size"},
        {"--negatives", "negatives sampled per positive"},
        {"--seed", "RNG seed for init, shuffling and sampling"},
    };
    slots.reserve(flag_table.size());
    for (const auto& [flag, help] : flag_table) {
        slots.push_back({flag, flag.substr(2), ""});
        cmd->add_option(flag, slots.back().value, help);
    }
}

KeyValueConfig effective_config(CLI::App* cmd, const std::vector<Override>& slots,
                                const std::string& preset, const std::string& config_path) {
    KeyValueConfig eff = default_run_config();
    if (!preset.empty()) apply_preset(eff, preset);
    if (!config_path.empty()) {
        const KeyValueConfig file = KeyValueConfig::load(config_path);
        for (const auto& [k, v] : file.entries()) {
            if (!eff.has(k)) throw FormatError("config: unknown key '" + k + "'");
            eff.set(k, v);
        }
    }
    for (const auto& s : slots)
        if (cmd->count(s.flag) > 0) eff.set(s.key, s.value);
    return eff;
}

std::string sibling_config(const std::string& checkpoint) {
    return (fs::path(checkpoint).parent_path() / "config.txt").string();
}

void require_out(const std::string& out) {
    if (out.empty()) throw ContractError("--out is required");
    fs::create_directories(out);
}

// ---------- prepare ----------

struct PrepareArgs {
    std::string news, behaviors, valid_behaviors, out;
    std::size_t title_len = 30, entity_len = 5;
    bool synthetic = false;
    SyntheticConfig syn;
};

void cmd_prepare(const PrepareArgs& a) {
    require_out(a.out);
    std::string news_path = a.news;
    std::string train_path = a.behaviors;
    std::string valid_path = a.valid_behaviors;
    if (a.synthetic) {
        const std::string raw = a.out + "/raw";
        generate_synthetic(a.syn, raw);
        news_path = raw + "/news.tsv";
        train_path = raw + "/behaviors.train.tsv";
        valid_path = raw + "/behaviors.valid.tsv";
        log_info("prepare: synthetic corpus written under %s", raw.c_str());
    }
    if (news_path.empty() || train_path.empty())
        throw ContractError("--news and --behaviors are required unless --synthetic");

    const Catalog catalog = parse_news_tsv(news_path);
    const BehaviorLog train_log = parse_behaviors_tsv(train_path);
    BehaviorLog valid_log;
    if (!valid_path.empty()) valid_log = parse_behaviors_tsv(valid_path);

    const Vocabs vocabs = build_vocabs(catalog);
    const EncodedDataset ds = encode_dataset(catalog, train_log, valid_log, vocabs,
                                             a.title_len, a.entity_len);
    save_dataset(ds, a.out + "/dataset.bin");
    save_vocab(vocabs.words, a.out + "/vocab.words.txt");
    save_vocab(vocabs.entities, a.out + "/vocab.entities.txt");
    save_vocab(vocabs.topics, a.out + "/vocab.topics.txt");

    std::cout << "articles: " << catalog.articles.size()
              << " (malformed skipped: " << catalog.malformed
              << ", duplicates: " << catalog.duplicates << ")\n"
              << "train impressions: " << ds.train.size()
              << " (lines skipped: " << train_log.skipped << ")\n"
              << "valid impressions: " << ds.valid.size()
              << " (lines skipped: " << valid_log.skipped << ")\n"
              << "vocab: " << vocabs.words.size() << " words, "
              << vocabs.entities.size() << " entities, "
              << vocabs.topics.size() << " topics\n"
              << "unknown ids dropped: " << ds.dropped_history_ids << " history, "
              << ds.dropped_candidates << " candidates\n"
              << "wrote " << a.out << "/dataset.bin\n";
}

// ---------- train ----------

void cmd_train(const KeyValueConfig& eff, const std::string& data,
               const std::string& out, std::size_t threads) {
    require_out(out);
    const EncodedDataset ds = load_dataset(data);
    const TrainConfig cfg = train_from_config(eff, ds);
    eff.save(out + "/config.txt");

    ParamStore params = init_params(cfg.model, cfg.seed);
    log_info("train: %zu parameters, %zu coordinates", params.size(),
             params.total_coords());
    const TrainResult result = train(ds, cfg, params, out);

    for (std::size_t e = 0; e < result.epochs.size(); ++e) {
        const auto& st = result.epochs[e];
        std::cout << "epoch " << e << ": loss " << st.mean_loss;
        if (st.valid.impressions > 0)
            std::cout << "  valid AUC " << st.valid.auc.mean << " MRR "
                      << st.valid.mrr.mean;
        std::cout << "\n";
    }
    if (!result.epochs.empty() && result.epochs.back().valid.impressions > 0) {
        std::ofstream rep(out + "/valid_report.json", std::ios::trunc);
        rep << result.epochs.back().valid.to_json() << "\n";
    }
    (void)threads;
    std::cout << "wrote " << out << "/final.ckpt\n";
}

// ---------- eval ----------

void cmd_eval(const std::string& checkpoint, const std::string& config_path,
              const std::string& data, const std::string& split,
              const std::string& out, std::size_t threads) {
    const EncodedDataset ds = load_dataset(data);
    const std::string cfg_path =
        config_path.empty() ? sibling_config(checkpoint) : config_path;
    KeyValueConfig eff = default_run_config();
    const KeyValueConfig file = KeyValueConfig::load(cfg_path);
    for (const auto& [k, v] : file.entries()) eff.set(k, v);
    const ModelConfig cfg = model_from_config(eff, ds);

    ParamStore params = init_params(cfg, 0);
    load_checkpoint(checkpoint, params);

    const auto& impressions = split == "train" ? ds.train : ds.valid;
    if (impressions.empty()) throw ContractError("split '" + split + "' is empty");
    const MetricReport report = evaluate_model(ds, impressions, params, cfg, threads);
    std::cout << report.to_table() << report.to_json() << "\n";
    if (!out.empty()) {
        fs::create_directories(out);
        std::ofstream rep(out + "/report.json", std::ios::trunc);
        rep << report.to_json() << "\n";
    }
}

// ---------- score ----------

void cmd_score(const std::string& checkpoint, const std::string& config_path,
               const std::string& data, const std::string& history_csv,
               const std::string& candidates_csv, bool naive) {
    const EncodedDataset ds = load_dataset(data);
    const std::string cfg_path =
        config_path.empty() ? sibling_config(checkpoint) : config_path;
    KeyValueConfig eff = default_run_config();
    const KeyValueConfig file = KeyValueConfig::load(cfg_path);
    for (const auto& [k, v] : file.entries()) eff.set(k, v);
    const ModelConfig cfg = model_from_config(eff, ds);

    ParamStore params = init_params(cfg, 0);
    load_checkpoint(checkpoint, params);
    const InferenceParams ip = build_inference(params, cfg);

    auto rows_of = [&](const std::string& csv, const char* what) {
        std::vector<std::uint32_t> rows;
        for (const auto& id : split_list(csv)) {
            auto it = ds.news_index.find(id);
            if (it == ds.news_index.end())
                throw ContractError(std::string(what) + " id '" + id +
                                    "' not in the catalog");
            rows.push_back(it->second);
        }
        if (rows.empty()) throw ContractError(std::string(what) + " list is empty");
        return rows;
    };
    const auto hist_rows = rows_of(history_csv, "history");
    const auto cand_rows = rows_of(candidates_csv, "candidate");

    EncodedImpression imp;
    imp.history = hist_rows;
    const PaddedHistory h = pad_history(imp, cfg.history_n);
    Mat clicks(cfg.history_n, cfg.d);
    for (std::size_t i = 0; i < h.real; ++i) {
        const auto v = encode_news_infer(ds.news[h.news_rows[i]], ip);
        std::copy(v.begin(), v.end(), clicks.row(i));
    }
    Mat cands(cand_rows.size(), cfg.d);
    for (std::size_t c = 0; c < cand_rows.size(); ++c) {
        const auto v = encode_news_infer(ds.news[cand_rows[c]], ip);
        std::copy(v.begin(), v.end(), cands.row(c));
    }

    OpCounter counter;
    std::vector<double> scores;
    if (naive) {
        scores = naive_scores(clicks, h.mask, cands, ip, counter);
    } else {
        const UserPrecompute pre = precompute_user(clicks, h.mask, ip, counter);
        scores = score_candidates(pre, cands, ip, counter);
    }

    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    for (std::size_t r = 0; r < order.size(); ++r) {
        char line[128];
        std::snprintf(line, sizeof(line), "%zu\t%s\t%.8f\n", r + 1,
                      ds.news_ids[cand_rows[order[r]]].c_str(), scores[order[r]]);
        std::cout << line;
    }
    log_info("score: %llu multiplications (%s path)",
             static_cast<unsigned long long>(counter.total()),
             naive ? "naive" : "amortized");
}

// ---------- bench ----------

void cmd_bench(const std::vector<std::string>& grid, std::size_t reps,
               const std::string& out) {
    BenchConfig cfg;
    cfg.reps = reps;
    for (const auto& item : grid) {
        const std::size_t eq = item.find('=');
        if (eq == std::string::npos)
            throw ContractError("--grid expects KEY=v1,v2 items, got '" + item + "'");
        const std::string key = item.substr(0, eq);
        const auto values = split_sizes(item.substr(eq + 1));
        if (values.empty()) throw ContractError("--grid item '" + item + "' has no values");
        if (key == "N" || key == "n")
            cfg.n_values = values;
        else if (key == "M" || key == "m")
            cfg.m_values = values;
        else if (key == "d" || key == "D")
            cfg.d_values = values;
        else
            throw ContractError("--grid key '" + key + "' (expected N, M or d)");
    }
    const auto rows = run_bench(cfg);
    std::cout << bench_summary(rows);
    if (!out.empty()) {
        fs::create_directories(out);
        std::ofstream csv(out + "/bench.csv", std::ios::trunc);
        if (!csv) throw IoError("cannot write " + out + "/bench.csv");
        csv << bench_csv(rows);
        std::cout << "wrote " << out << "/bench.csv\n";
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Candidate-aware news recommender: data preparation, training, "
                 "evaluation, scoring and benchmarking"};
    app.require_subcommand(1);

    // prepare
    PrepareArgs prep;
    auto* prepare = app.add_subcommand("prepare", "Parse and encode a news corpus");
    prepare->add_option("--news", prep.news, "news.tsv path");
    prepare->add_option("--behaviors", prep.behaviors, "training behaviors.tsv path");
    prepare->add_option("--valid-behaviors", prep.valid_behaviors,
                        "validation behaviors.tsv path");
    prepare->add_option("--out", prep.out, "output directory")->required();
    prepare->add_option("--title-len", prep.title_len, "title tokens per article");
    prepare->add_option("--entity-len", prep.entity_len, "entities per article");
    prepare->add_flag("--synthetic", prep.synthetic,
                      "generate a topic-biased synthetic corpus instead of reading files");
    prepare->add_option("--users", prep.syn.users, "synthetic user count");
    prepare->add_option("--articles", prep.syn.news, "synthetic article count");
    prepare->add_option("--topics", prep.syn.topics, "synthetic topic count");
    prepare->add_option("--noise", prep.syn.noise, "synthetic off-interest click fraction");
    prepare->add_option("--seed", prep.syn.seed, "synthetic generator seed");

    // train
    std::string train_data, train_out, train_config, train_preset;
    std::size_t train_threads = 1;
    std::vector<Override> train_overrides;
    auto* train_cmd = app.add_subcommand("train", "Train on an encoded dataset");
    train_cmd->add_option("--data", train_data, "encoded dataset path")->required();
    train_cmd->add_option("--out", train_out, "output directory")->required();
    train_cmd->add_option("--config", train_config, "key=value config file");
    train_cmd->add_option("--preset", train_preset, "desk or full defaults");
    train_cmd->add_option("--threads", train_threads, "worker cap for validation scoring");
    add_overrides(train_cmd, train_overrides);

    // eval
    std::string eval_ckpt, eval_config, eval_data, eval_split = "valid", eval_out;
    std::size_t eval_threads = 1;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
    eval_cmd->add_option("--config", eval_config,
                         "config file (default: config.txt beside the checkpoint)");
    eval_cmd->add_option("--data", eval_data, "encoded dataset path")->required();
    eval_cmd->add_option("--split", eval_split, "train or valid");
    eval_cmd->add_option("--out", eval_out, "directory for report.json");
    eval_cmd->add_option("--threads", eval_threads, "worker cap");

    // score
    std::string score_ckpt, score_config, score_data, score_history, score_cands;
    bool score_naive = false;
    auto* score_cmd = app.add_subcommand("score", "Rank candidates for one user");
    score_cmd->add_option("--checkpoint", score_ckpt, "checkpoint path")->required();
    score_cmd->add_option("--config", score_config,
                          "config file (default: config.txt beside the checkpoint)");
    score_cmd->add_option("--data", score_data, "encoded dataset path")->required();
    score_cmd->add_option("--user-history", score_history,
                          "comma-separated clicked news ids, oldest first")
        ->required();
    score_cmd->add_option("--candidates", score_cands, "comma-separated candidate news ids")
        ->required();
    score_cmd->add_flag("--naive", score_naive,
                        "use the direct per-candidate path instead of the amortized one");

    // bench
    std::vector<std::string> bench_grid;
    std::size_t bench_reps = 10;
    std::string bench_out;
    auto* bench_cmd =
        app.add_subcommand("bench", "Time naive vs amortized scoring over a grid");
    bench_cmd->add_option("--grid", bench_grid,
                          "grid items like N=50 M=10,50,100 d=64 (repeatable)");
    bench_cmd->add_option("--reps", bench_reps, "repetitions per configuration");
    bench_cmd->add_option("--out", bench_out, "directory for bench.csv");

    CLI11_PARSE(app, argc, argv);

    try {
        if (prepare->parsed()) {
            cmd_prepare(prep);
        } else if (train_cmd->parsed()) {
            cmd_train(effective_config(train_cmd, train_overrides, train_preset,
                                       train_config),
                      train_data, train_out, train_threads);
        } else if (eval_cmd->parsed()) {
            if (eval_split != "train" && eval_split != "valid")
                throw ContractError("--split must be train or valid");
            cmd_eval(eval_ckpt, eval_config, eval_data, eval_split, eval_out,
                     eval_threads);
        } else if (score_cmd->parsed()) {
            cmd_score(score_ckpt, score_config, score_data, score_history, score_cands,
                      score_naive);
        } else if (bench_cmd->parsed()) {
            cmd_bench(bench_grid, bench_reps, bench_out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
