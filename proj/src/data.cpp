#include "caum/data.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "caum/checkpoint.hpp"
#include "caum/logging.hpp"

namespace caum {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

std::vector<std::string> parse_title_entities(const std::string& field) {
    std::vector<std::string> out;
    if (field.empty() || field == "[]") return out;
    auto j = nlohmann::json::parse(field, nullptr, false);
    if (j.is_discarded() || !j.is_array()) throw FormatError("bad entity json");
    for (const auto& e : j) {
        if (e.contains("WikidataId") && e["WikidataId"].is_string())
            out.push_back(e["WikidataId"].get<std::string>());
    }
    return out;
}

} // namespace

Catalog parse_news_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    Catalog cat;
    std::string line;
    std::size_t total = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++total;
        auto fields = split(line, '\t');
        if (fields.size() < 7 || fields[0].empty() || fields[3].empty()) {
            ++cat.malformed;
            continue;
        }
        NewsArticle a;
        a.news_id = fields[0];
        a.topic = fields[1];
        a.title = fields[3];
        try {
            a.entities = parse_title_entities(fields[6]);
        } catch (const FormatError&) {
            ++cat.malformed;
            continue;
        }
        auto it = cat.by_id.find(a.news_id);
        if (it != cat.by_id.end()) {
            cat.articles[it->second] = std::move(a); // last occurrence wins
            ++cat.duplicates;
        } else {
            cat.by_id[a.news_id] = cat.articles.size();
            cat.articles.push_back(std::move(a));
        }
    }
    if (cat.malformed > 0)
        log_warn("%s: skipped %zu malformed news lines", path.c_str(), cat.malformed);
    if (total > 0 && cat.malformed * 10 > total)
        throw FormatError(path + ": " + std::to_string(cat.malformed) + " of " +
                          std::to_string(total) + " lines malformed");
    return cat;
}

BehaviorLog parse_behaviors_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    BehaviorLog log;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split(line, '\t');
        if (fields.size() < 5) {
            ++log.skipped;
            continue;
        }
        Impression imp;
        imp.impression_id = fields[0];
        imp.user_id = fields[1];
        imp.history = split_ws(fields[3]);
        bool ok = true;
        for (const auto& tok : split_ws(fields[4])) {
            const auto dash = tok.rfind('-');
            if (dash == std::string::npos || dash + 2 != tok.size() ||
                (tok[dash + 1] != '0' && tok[dash + 1] != '1')) {
                ok = false;
                break;
            }
            imp.candidates.emplace_back(tok.substr(0, dash), tok[dash + 1] - '0');
        }
        if (!ok || imp.candidates.empty()) {
            ++log.skipped;
            continue;
        }
        log.impressions.push_back(std::move(imp));
    }
    if (log.skipped > 0)
        log_warn("%s: skipped %zu behavior lines", path.c_str(), log.skipped);
    return log;
}

std::vector<std::string> tokenize(const std::string& title) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : title) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

namespace {

Vocab vocab_from_counts(const std::unordered_map<std::string, std::size_t>& counts) {
    std::vector<std::pair<std::string, std::size_t>> items(counts.begin(), counts.end());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    Vocab v;
    v.tokens.push_back("<pad>");
    for (auto& [tok, _] : items) {
        v.index[tok] = static_cast<std::uint32_t>(v.tokens.size());
        v.tokens.push_back(tok);
    }
    return v;
}

} // namespace

Vocabs build_vocabs(const Catalog& catalog) {
    if (catalog.articles.empty()) throw ContractError("build_vocabs: empty catalog");
    std::unordered_map<std::string, std::size_t> words, entities, topics;
    for (const auto& a : catalog.articles) {
        for (const auto& t : tokenize(a.title)) ++words[t];
        for (const auto& e : a.entities) ++entities[e];
        ++topics[a.topic];
    }
    return {vocab_from_counts(words), vocab_from_counts(entities),
            vocab_from_counts(topics)};
}

void save_vocab(const Vocab& v, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    for (const auto& t : v.tokens) out << t << '\n';
}

Vocab load_vocab(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    Vocab v;
    std::string line;
    while (std::getline(in, line)) {
        if (!v.tokens.empty()) v.index[line] = static_cast<std::uint32_t>(v.tokens.size());
        v.tokens.push_back(line);
    }
    if (v.tokens.empty()) throw FormatError(path + ": empty vocabulary");
    return v;
}

EncodedNews encode_article(const NewsArticle& a, const Vocabs& vocabs,
                           std::size_t title_len, std::size_t entity_len) {
    EncodedNews e;
    e.title_ids.assign(title_len, 0);
    e.entity_ids.assign(entity_len, 0);
    const auto toks = tokenize(a.title);
    for (std::size_t i = 0; i < std::min(title_len, toks.size()); ++i)
        e.title_ids[i] = vocabs.words.id_of(toks[i]);
    for (std::size_t i = 0; i < std::min(entity_len, a.entities.size()); ++i)
        e.entity_ids[i] = vocabs.entities.id_of(a.entities[i]);
    e.topic_id = vocabs.topics.id_of(a.topic);
    return e;
}

PaddedHistory pad_history(const EncodedImpression& imp, std::size_t n) {
    PaddedHistory h;
    h.news_rows.assign(n, 0);
    h.mask.assign(n, 0);
    const std::size_t keep = std::min(n, imp.history.size());
    // keep the most recent `keep` clicks, oldest first
    const std::size_t start = imp.history.size() - keep;
    for (std::size_t i = 0; i < keep; ++i) {
        h.news_rows[i] = imp.history[start + i];
        h.mask[i] = 1;
    }
    h.real = keep;
    return h;
}

namespace {

void encode_impressions(const BehaviorLog& log, const Catalog& catalog,
                        EncodedDataset& ds, std::vector<EncodedImpression>& out) {
    for (const auto& imp : log.impressions) {
        EncodedImpression e;
        for (const auto& id : imp.history) {
            auto it = catalog.by_id.find(id);
            if (it == catalog.by_id.end()) {
                ++ds.dropped_history_ids;
                continue;
            }
            e.history.push_back(static_cast<std::uint32_t>(it->second));
        }
        for (const auto& [id, label] : imp.candidates) {
            auto it = catalog.by_id.find(id);
            if (it == catalog.by_id.end()) {
                ++ds.dropped_candidates;
                continue;
            }
            e.candidates.emplace_back(static_cast<std::uint32_t>(it->second),
                                      static_cast<std::uint8_t>(label));
        }
        if (e.candidates.empty()) continue;
        out.push_back(std::move(e));
    }
}

} // namespace

EncodedDataset encode_dataset(const Catalog& catalog, const BehaviorLog& train_log,
                              const BehaviorLog& valid_log, const Vocabs& vocabs,
                              std::size_t title_len, std::size_t entity_len) {
    EncodedDataset ds;
    ds.title_len = title_len;
    ds.entity_len = entity_len;
    ds.word_vocab = vocabs.words.size();
    ds.entity_vocab = vocabs.entities.size();
    ds.topic_vocab = vocabs.topics.size();
    for (const auto& a : catalog.articles) {
        ds.news_index[a.news_id] = static_cast<std::uint32_t>(ds.news.size());
        ds.news_ids.push_back(a.news_id);
        ds.news.push_back(encode_article(a, vocabs, title_len, entity_len));
    }
    encode_impressions(train_log, catalog, ds, ds.train);
    encode_impressions(valid_log, catalog, ds, ds.valid);
    return ds;
}

namespace {

Section u32_section(std::string name, std::vector<std::uint64_t> extents,
                    std::vector<std::uint32_t> payload) {
    Section s;
    s.name = std::move(name);
    s.kind = SectionKind::U32;
    s.extents = std::move(extents);
    s.u32 = std::move(payload);
    return s;
}

void flatten_impressions(const std::vector<EncodedImpression>& imps,
                         const std::string& prefix, std::vector<Section>& out) {
    std::vector<std::uint32_t> hist, hist_off{0}, cand, labels, cand_off{0};
    for (const auto& e : imps) {
        hist.insert(hist.end(), e.history.begin(), e.history.end());
        hist_off.push_back(static_cast<std::uint32_t>(hist.size()));
        for (const auto& [row, label] : e.candidates) {
            cand.push_back(row);
            labels.push_back(label);
        }
        cand_off.push_back(static_cast<std::uint32_t>(cand.size()));
    }
    auto push = [&](const std::string& name, std::vector<std::uint32_t> payload) {
        const std::uint64_t len = payload.size();
        out.push_back(u32_section(prefix + name, {len}, std::move(payload)));
    };
    push(".history", std::move(hist));
    push(".history_off", std::move(hist_off));
    push(".cand", std::move(cand));
    push(".labels", std::move(labels));
    push(".cand_off", std::move(cand_off));
}

std::vector<EncodedImpression> unflatten_impressions(
    const std::unordered_map<std::string, const Section*>& by_name,
    const std::string& prefix) {
    auto get = [&](const std::string& n) -> const Section& {
        auto it = by_name.find(prefix + n);
        if (it == by_name.end()) throw FormatError("dataset missing section " + prefix + n);
        return *it->second;
    };
    const auto& hist = get(".history").u32;
    const auto& hist_off = get(".history_off").u32;
    const auto& cand = get(".cand").u32;
    const auto& labels = get(".labels").u32;
    const auto& cand_off = get(".cand_off").u32;
    std::vector<EncodedImpression> imps;
    for (std::size_t i = 0; i + 1 < hist_off.size(); ++i) {
        EncodedImpression e;
        e.history.assign(hist.begin() + hist_off[i], hist.begin() + hist_off[i + 1]);
        for (std::uint32_t j = cand_off[i]; j < cand_off[i + 1]; ++j)
            e.candidates.emplace_back(cand[j], static_cast<std::uint8_t>(labels[j]));
        imps.push_back(std::move(e));
    }
    return imps;
}

} // namespace

void save_dataset(const EncodedDataset& ds, const std::string& path) {
    std::vector<Section> sections;
    sections.push_back(u32_section(
        "meta", {6},
        {static_cast<std::uint32_t>(ds.title_len), static_cast<std::uint32_t>(ds.entity_len),
         static_cast<std::uint32_t>(ds.word_vocab), static_cast<std::uint32_t>(ds.entity_vocab),
         static_cast<std::uint32_t>(ds.topic_vocab), static_cast<std::uint32_t>(ds.news.size())}));
    std::vector<std::uint32_t> titles, entities, topics;
    for (const auto& n : ds.news) {
        titles.insert(titles.end(), n.title_ids.begin(), n.title_ids.end());
        entities.insert(entities.end(), n.entity_ids.begin(), n.entity_ids.end());
        topics.push_back(n.topic_id);
    }
    sections.push_back(u32_section("news.titles", {ds.news.size(), ds.title_len},
                                   std::move(titles)));
    sections.push_back(u32_section("news.entities", {ds.news.size(), ds.entity_len},
                                   std::move(entities)));
    sections.push_back(u32_section("news.topics", {ds.news.size()}, std::move(topics)));
    flatten_impressions(ds.train, "train", sections);
    flatten_impressions(ds.valid, "valid", sections);
    write_container(path, 2, sections);

    std::ofstream ids(path + ".ids", std::ios::trunc);
    if (!ids) throw IoError("cannot write " + path + ".ids");
    for (const auto& id : ds.news_ids) ids << id << '\n';
}

EncodedDataset load_dataset(const std::string& path) {
    std::uint32_t version = 0;
    auto sections = read_container(path, &version);
    if (version != 2) throw FormatError(path + ": not a dataset cache");
    std::unordered_map<std::string, const Section*> by_name;
    for (const auto& s : sections) by_name[s.name] = &s;
    auto get = [&](const std::string& n) -> const Section& {
        auto it = by_name.find(n);
        if (it == by_name.end()) throw FormatError(path + ": missing section " + n);
        return *it->second;
    };
    const auto& meta = get("meta").u32;
    if (meta.size() != 6) throw FormatError(path + ": bad meta section");
    EncodedDataset ds;
    ds.title_len = meta[0];
    ds.entity_len = meta[1];
    ds.word_vocab = meta[2];
    ds.entity_vocab = meta[3];
    ds.topic_vocab = meta[4];
    const std::size_t n_news = meta[5];
    const auto& titles = get("news.titles").u32;
    const auto& entities = get("news.entities").u32;
    const auto& topics = get("news.topics").u32;
    for (std::size_t i = 0; i < n_news; ++i) {
        EncodedNews n;
        n.title_ids.assign(titles.begin() + i * ds.title_len,
                           titles.begin() + (i + 1) * ds.title_len);
        n.entity_ids.assign(entities.begin() + i * ds.entity_len,
                            entities.begin() + (i + 1) * ds.entity_len);
        n.topic_id = topics[i];
        ds.news.push_back(std::move(n));
    }
    ds.train = unflatten_impressions(by_name, "train");
    ds.valid = unflatten_impressions(by_name, "valid");

    std::ifstream ids(path + ".ids");
    if (ids) {
        std::string line;
        while (std::getline(ids, line)) {
            ds.news_index[line] = static_cast<std::uint32_t>(ds.news_ids.size());
            ds.news_ids.push_back(line);
        }
    }
    return ds;
}

// ---------- synthetic corpus ----------

void generate_synthetic(const SyntheticConfig& cfg, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::mt19937_64 rng(cfg.seed);

    // Per-topic word and entity pools; titles draw mostly from their
    // topic's pool so topic structure is learnable from text alone.
    const std::size_t words_per_topic = 18;
    const std::size_t entities_per_topic = 6;
    std::vector<std::vector<std::string>> topic_words(cfg.topics), topic_entities(cfg.topics);
    for (std::size_t t = 0; t < cfg.topics; ++t) {
        for (std::size_t w = 0; w < words_per_topic; ++w)
            topic_words[t].push_back("w" + std::to_string(t) + "x" + std::to_string(w));
        for (std::size_t e = 0; e < entities_per_topic; ++e)
            topic_entities[t].push_back("Q" + std::to_string(t * 100 + e));
    }
    std::vector<std::string> shared_words;
    for (std::size_t w = 0; w < 30; ++w) shared_words.push_back("common" + std::to_string(w));

    struct SynNews {
        std::string id;
        std::size_t topic;
    };
    std::vector<SynNews> news(cfg.news);
    std::vector<std::vector<std::size_t>> by_topic(cfg.topics);
    {
        std::ofstream out(out_dir + "/news.tsv", std::ios::trunc);
        if (!out) throw IoError("cannot write " + out_dir + "/news.tsv");
        std::uniform_int_distribution<std::size_t> topic_pick(0, cfg.topics - 1);
        std::uniform_int_distribution<std::size_t> title_len(4, 7);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (std::size_t i = 0; i < cfg.news; ++i) {
            const std::size_t t = topic_pick(rng);
            news[i] = {"N" + std::to_string(i + 1), t};
            by_topic[t].push_back(i);
            std::string title;
            const std::size_t len = title_len(rng);
            for (std::size_t w = 0; w < len; ++w) {
                const auto& pool = u(rng) < 0.75 ? topic_words[t] : shared_words;
                std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
                if (!title.empty()) title += ' ';
                title += pool[pick(rng)];
            }
            nlohmann::json ents = nlohmann::json::array();
            std::uniform_int_distribution<std::size_t> n_ents(0, 2);
            const std::size_t ne = n_ents(rng);
            for (std::size_t e = 0; e < ne; ++e) {
                std::uniform_int_distribution<std::size_t> pick(0, topic_entities[t].size() - 1);
                ents.push_back({{"WikidataId", topic_entities[t][pick(rng)]}});
            }
            out << news[i].id << '\t' << "topic" << t << '\t' << "sub" << t << '\t'
                << title << '\t' << "" << '\t' << "" << '\t' << ents.dump() << '\t'
                << "[]" << '\n';
        }
    }

    auto pick_from = [&](const std::vector<std::size_t>& pool) {
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        return pool[pick(rng)];
    };
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> any_topic(0, cfg.topics - 1);

    std::ofstream train(out_dir + "/behaviors.train.tsv", std::ios::trunc);
    std::ofstream valid(out_dir + "/behaviors.valid.tsv", std::ios::trunc);
    if (!train || !valid) throw IoError("cannot write behaviors files in " + out_dir);
    std::size_t imp_counter = 0;
    for (std::size_t uidx = 0; uidx < cfg.users; ++uidx) {
        std::vector<std::size_t> interests;
        while (interests.size() < cfg.interests_per_user) {
            const std::size_t t = any_topic(rng);
            if (std::find(interests.begin(), interests.end(), t) == interests.end() &&
                !by_topic[t].empty())
                interests.push_back(t);
        }
        std::uniform_int_distribution<std::size_t> hist_len(cfg.min_history, cfg.max_history);
        std::uniform_int_distribution<std::size_t> interest_pick(0, interests.size() - 1);
        std::vector<std::string> history;
        const std::size_t hl = hist_len(rng);
        for (std::size_t i = 0; i < hl; ++i) {
            std::size_t t;
            if (u(rng) < cfg.noise) {
                do { t = any_topic(rng); } while (by_topic[t].empty());
            } else {
                t = interests[interest_pick(rng)];
            }
            history.push_back(news[pick_from(by_topic[t])].id);
        }
        std::string hist_field;
        for (const auto& h : history) {
            if (!hist_field.empty()) hist_field += ' ';
            hist_field += h;
        }
        auto emit = [&](std::ofstream& out, std::size_t count) {
            for (std::size_t k = 0; k < count; ++k) {
                // one positive from an interest topic, negatives from elsewhere
                const std::size_t pos_topic = interests[interest_pick(rng)];
                std::string cands = news[pick_from(by_topic[pos_topic])].id + "-1";
                for (std::size_t c = 1; c < cfg.candidates_per_impression; ++c) {
                    std::size_t t;
                    do { t = any_topic(rng); } while (
                        by_topic[t].empty() ||
                        std::find(interests.begin(), interests.end(), t) != interests.end());
                    cands += " " + news[pick_from(by_topic[t])].id + "-0";
                }
                out << ++imp_counter << '\t' << "U" << uidx << '\t'
                    << "11/11/2019 9:05:58 AM" << '\t' << hist_field << '\t' << cands
                    << '\n';
            }
        };
        emit(train, cfg.train_impressions_per_user);
        emit(valid, cfg.valid_impressions_per_user);
    }
}

} // namespace caum
