#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "caum/errors.hpp"

namespace caum {

// ---------- raw MIND-format records ----------

struct NewsArticle {
    std::string news_id;
    std::string topic;
    std::string title;
    std::vector<std::string> entities; // WikidataIds from the title-entities field
};

struct Catalog {
    std::vector<NewsArticle> articles;
    std::unordered_map<std::string, std::size_t> by_id;
    std::size_t malformed = 0;
    std::size_t duplicates = 0;
};

struct Impression {
    std::string impression_id;
    std::string user_id;
    std::vector<std::string> history; // oldest -> newest
    std::vector<std::pair<std::string, int>> candidates; // (news_id, label)
};

struct BehaviorLog {
    std::vector<Impression> impressions;
    std::size_t skipped = 0;
};

// news.tsv: id, category, subcategory, title, abstract, url,
// title-entities (JSON), abstract-entities. Malformed lines are skipped
// and counted; more than 10% malformed is a FormatError. Duplicate ids:
// last occurrence wins.
Catalog parse_news_tsv(const std::string& path);

// behaviors.tsv: impression id, user id, time, space-separated history,
// space-separated "newsID-label" candidates. Lines with an unlabeled
// candidate token are skipped and counted.
BehaviorLog parse_behaviors_tsv(const std::string& path);

// ---------- vocabularies ----------

struct Vocab {
    std::vector<std::string> tokens; // tokens[0] is the <pad>/OOV sentinel
    std::unordered_map<std::string, std::uint32_t> index;

    std::uint32_t id_of(const std::string& tok) const {
        auto it = index.find(tok);
        return it == index.end() ? 0u : it->second;
    }
    std::size_t size() const { return tokens.size(); }
};

struct Vocabs {
    Vocab words, entities, topics;
};

// Lowercased, punctuation-split title tokens.
std::vector<std::string> tokenize(const std::string& title);

// Deterministic ids: sorted by frequency (desc) then lexicographic, id 0
// reserved for padding/OOV.
Vocabs build_vocabs(const Catalog& catalog);

void save_vocab(const Vocab& v, const std::string& path);
Vocab load_vocab(const std::string& path);

// ---------- encoded forms ----------

struct EncodedNews {
    std::vector<std::uint32_t> title_ids;  // length L_t, 0 = padding
    std::vector<std::uint32_t> entity_ids; // length L_e, 0 = padding
    std::uint32_t topic_id = 0;
};

struct EncodedImpression {
    std::vector<std::uint32_t> history;                         // catalog row indices
    std::vector<std::pair<std::uint32_t, std::uint8_t>> candidates; // (row, label)
};

struct EncodedDataset {
    std::size_t title_len = 0;
    std::size_t entity_len = 0;
    std::size_t word_vocab = 0;
    std::size_t entity_vocab = 0;
    std::size_t topic_vocab = 0;
    std::vector<EncodedNews> news;
    std::vector<std::string> news_ids; // parallel to news
    std::unordered_map<std::string, std::uint32_t> news_index;
    std::vector<EncodedImpression> train;
    std::vector<EncodedImpression> valid;
    std::size_t dropped_history_ids = 0;   // history ids not in the catalog
    std::size_t dropped_candidates = 0;    // candidate ids not in the catalog
};

EncodedNews encode_article(const NewsArticle& a, const Vocabs& vocabs,
                           std::size_t title_len, std::size_t entity_len);

// Fixed-length click ids for one impression: keep the most recent N
// (truncate oldest), pad to N with masked zero slots.
struct PaddedHistory {
    std::vector<std::uint32_t> news_rows; // length N; padded slots are 0
    std::vector<std::uint8_t> mask;       // length N
    std::size_t real = 0;
};
PaddedHistory pad_history(const EncodedImpression& imp, std::size_t n);

EncodedDataset encode_dataset(const Catalog& catalog, const BehaviorLog& train_log,
                              const BehaviorLog& valid_log, const Vocabs& vocabs,
                              std::size_t title_len, std::size_t entity_len);

void save_dataset(const EncodedDataset& ds, const std::string& path);
EncodedDataset load_dataset(const std::string& path);

// ---------- synthetic corpus (MIND-format files, no download needed) ----------

struct SyntheticConfig {
    std::size_t users = 200;
    std::size_t news = 500;
    std::size_t topics = 12;
    std::size_t interests_per_user = 3;
    std::size_t train_impressions_per_user = 3;
    std::size_t valid_impressions_per_user = 1;
    std::size_t candidates_per_impression = 5; // 1 positive + rest negatives
    std::size_t min_history = 8;
    std::size_t max_history = 24;
    double noise = 0.1; // off-interest click fraction
    std::uint64_t seed = 13;
};

// Writes news.tsv plus behaviors.train.tsv / behaviors.valid.tsv.
void generate_synthetic(const SyntheticConfig& cfg, const std::string& out_dir);

} // namespace caum
