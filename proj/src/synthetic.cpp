#include "wsp/synthetic.hpp"

#include <cstdio>
#include <filesystem>
#include <set>

#include "wsp/annotate.hpp"
#include "wsp/error.hpp"
#include "wsp/io.hpp"
#include "wsp/json_util.hpp"
#include "wsp/random.hpp"
#include "wsp/sidecar.hpp"

namespace wsp::synthetic {

namespace {

constexpr std::size_t kName = static_cast<std::size_t>(-1);

std::string random_word(Rng& rng, std::size_t min_len, std::size_t max_len) {
  const std::size_t len = min_len + rng.below(max_len - min_len + 1);
  std::string w;
  for (std::size_t i = 0; i < len; ++i) w += static_cast<char>('a' + rng.below(26));
  return w;
}

std::string paragraph_id(const std::string& lang, std::size_t n) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06zu", n);
  return lang + ":" + buf;
}

}  // namespace

void Config::validate() const {
  if (train_pairs == 0) throw ConfigError("synthetic.train_pairs", "must be positive");
  if (min_words < 2 || max_words < min_words) throw ConfigError("synthetic.min_words", "need 2 <= min <= max");
  if (lexicon_size + 1 < max_words) throw ConfigError("synthetic.lexicon_size", "smaller than a sentence");
  if (min_word_len == 0 || max_word_len < min_word_len) throw ConfigError("synthetic.min_word_len", "bad range");
  if (swap_prob < 0.0 || swap_prob > 1.0) throw ConfigError("synthetic.swap_prob", "must be in [0, 1]");
  if (emb_dim == 0) throw ConfigError("synthetic.emb_dim", "must be positive");
  if (src_lang == tgt_lang) throw ConfigError("synthetic.tgt_lang", "must differ from src_lang");
}

nlohmann::ordered_json Config::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["train_pairs"] = train_pairs;
  j["heldout_pairs"] = heldout_pairs;
  j["min_words"] = min_words;
  j["max_words"] = max_words;
  j["lexicon_size"] = lexicon_size;
  j["min_word_len"] = min_word_len;
  j["max_word_len"] = max_word_len;
  j["swap_prob"] = swap_prob;
  j["emb_dim"] = emb_dim;
  j["emb_noise"] = emb_noise;
  j["src_lang"] = src_lang;
  j["tgt_lang"] = tgt_lang;
  return j;
}

Config Config::from_json(const nlohmann::json& j) {
  Config c;
  for (const auto& [key, value] : j.items()) {
    if (key == "seed") c.seed = value.get<std::uint64_t>();
    else if (key == "train_pairs") c.train_pairs = value.get<std::size_t>();
    else if (key == "heldout_pairs") c.heldout_pairs = value.get<std::size_t>();
    else if (key == "min_words") c.min_words = value.get<std::size_t>();
    else if (key == "max_words") c.max_words = value.get<std::size_t>();
    else if (key == "lexicon_size") c.lexicon_size = value.get<std::size_t>();
    else if (key == "min_word_len") c.min_word_len = value.get<std::size_t>();
    else if (key == "max_word_len") c.max_word_len = value.get<std::size_t>();
    else if (key == "swap_prob") c.swap_prob = value.get<double>();
    else if (key == "emb_dim") c.emb_dim = value.get<std::size_t>();
    else if (key == "emb_noise") c.emb_noise = value.get<double>();
    else if (key == "src_lang") c.src_lang = value.get<std::string>();
    else if (key == "tgt_lang") c.tgt_lang = value.get<std::string>();
    else throw ConfigError("synthetic." + key, "unknown key");
  }
  c.validate();
  return c;
}

Corpus generate(const Config& cfg) {
  cfg.validate();
  Corpus corpus;
  Rng lex_rng(derive_seed(cfg.seed, "synthetic/lexicon"));
  std::set<std::string> used;
  auto fresh = [&](std::size_t lo, std::size_t hi) {
    for (;;) {
      std::string w = random_word(lex_rng, lo, hi);
      if (used.insert(w).second) return w;
    }
  };
  const auto& tags = default_common_tags();
  const std::vector<std::string> tag_list(tags.begin(), tags.end());
  for (std::size_t c = 0; c < cfg.lexicon_size; ++c) {
    std::string s = fresh(cfg.min_word_len, cfg.max_word_len);
    std::string t = fresh(cfg.min_word_len, cfg.max_word_len);
    corpus.lexicon.emplace_back(std::move(s), std::move(t));
    corpus.concept_tags.push_back(tag_list[lex_rng.below(tag_list.size())]);
  }

  Rng rng(derive_seed(cfg.seed, "synthetic/sentences"));
  const std::size_t total = cfg.train_pairs + cfg.heldout_pairs;
  for (std::size_t e = 0; e < total; ++e) {
    SentencePairSample sp;
    sp.qid = "Q" + std::to_string(e + 1);
    do {
      sp.name = random_word(rng, 3, 5);
      sp.name[0] = static_cast<char>(sp.name[0] - 'a' + 'A');
    } while (!used.insert(sp.name).second);

    const std::size_t n = cfg.min_words + rng.below(cfg.max_words - cfg.min_words + 1);
    auto concepts = sample_indices(cfg.lexicon_size, n - 1, rng.next());
    rng.shuffle(concepts);
    const std::size_t name_at = rng.below(n);
    concepts.insert(concepts.begin() + static_cast<std::ptrdiff_t>(name_at), kName);

    // target order: source order with non-overlapping adjacent swaps
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = 0; i + 1 < n;) {
      if (rng.uniform() < cfg.swap_prob) {
        std::swap(order[i], order[i + 1]);
        i += 2;
      } else {
        ++i;
      }
    }
    sp.src_concepts = concepts;
    for (std::size_t q = 0; q < n; ++q) {
      const std::size_t p = order[q];
      sp.tgt_concepts.push_back(concepts[p]);
      sp.gold.emplace(p, q);
    }
    for (std::size_t c : sp.src_concepts) sp.src.push_back(c == kName ? sp.name : corpus.lexicon[c].first);
    for (std::size_t c : sp.tgt_concepts) sp.tgt.push_back(c == kName ? sp.name : corpus.lexicon[c].second);
    sp.name_src = name_at;
    for (std::size_t q = 0; q < n; ++q) {
      if (order[q] == name_at) sp.name_tgt = q;
    }
    (e < cfg.train_pairs ? corpus.train : corpus.heldout).push_back(std::move(sp));
  }
  return corpus;
}

void write_corpus(const Corpus& corpus, const Config& cfg, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto path = [&](const char* name) { return (fs::path(dir) / name).string(); };

  Rng rng(derive_seed(cfg.seed, "synthetic/embeddings"));
  auto random_vec = [&] {
    std::vector<double> v(cfg.emb_dim);
    for (auto& x : v) x = rng.normal();
    return v;
  };
  std::vector<std::vector<double>> concept_vecs;
  for (std::size_t c = 0; c < corpus.lexicon.size(); ++c) concept_vecs.push_back(random_vec());

  std::string raw;
  std::string titles;
  std::vector<TokenEmbeddings> token_embs;
  std::vector<PosTags> pos;
  std::vector<NamedVector> para_embs;

  for (std::size_t e = 0; e < corpus.train.size(); ++e) {
    const auto& sp = corpus.train[e];
    const auto name_vec = random_vec();
    for (int side = 0; side < 2; ++side) {
      const std::string& lang = side == 0 ? cfg.src_lang : cfg.tgt_lang;
      const auto& words = side == 0 ? sp.src : sp.tgt;
      const auto& concepts = side == 0 ? sp.src_concepts : sp.tgt_concepts;
      const std::string id = paragraph_id(lang, e + 1);

      std::string wikitext;
      for (std::size_t w = 0; w < words.size(); ++w) {
        if (w > 0) wikitext += ' ';
        wikitext += concepts[w] == kName ? "[[" + words[w] + "]]" : words[w];
      }
      nlohmann::ordered_json rec;
      rec["id"] = id;
      rec["lang"] = lang;
      rec["wikitext"] = wikitext;
      raw += rec.dump() + '\n';
      nlohmann::ordered_json title;
      title["lang"] = lang;
      title["title"] = sp.name;
      title["qid"] = sp.qid;
      titles += title.dump() + '\n';

      const auto joined = join_tokens(words);
      TokenEmbeddings te;
      te.id = id;
      te.dim = cfg.emb_dim;
      PosTags pt;
      pt.id = id;
      std::vector<double> mean(cfg.emb_dim, 0.0);
      for (std::size_t w = 0; w < words.size(); ++w) {
        const TokenSpan span{static_cast<std::int64_t>(joined.bounds.spans[w].first),
                             static_cast<std::int64_t>(joined.bounds.spans[w].second)};
        te.tokens.push_back(span);
        pt.tokens.push_back(span);
        pt.tags.push_back(concepts[w] == kName ? "PROPN" : corpus.concept_tags[concepts[w]]);
        const auto& base = concepts[w] == kName ? name_vec : concept_vecs[concepts[w]];
        for (std::size_t d = 0; d < cfg.emb_dim; ++d) {
          const double x = base[d] + cfg.emb_noise * rng.normal();
          te.vectors.push_back(static_cast<float>(x));
          mean[d] += x;
        }
      }
      NamedVector pv{id, {}};
      for (double x : mean) pv.vec.push_back(static_cast<float>(x / static_cast<double>(words.size())));
      token_embs.push_back(std::move(te));
      pos.push_back(std::move(pt));
      para_embs.push_back(std::move(pv));
    }
  }
  io::write_file(path(Files::raw), raw);
  io::write_file(path(Files::titles), titles);
  write_token_sidecar(path(Files::token_embeddings), token_embs);
  write_pos_tags(path(Files::pos_tags), pos);
  write_paragraph_sidecar(path(Files::paragraph_embeddings), para_embs);

  std::string tsv;
  std::vector<AlignmentSet> gold;
  for (const auto& sp : corpus.heldout) {
    std::string line;
    for (std::size_t w = 0; w < sp.src.size(); ++w) line += (w ? " " : "") + sp.src[w];
    line += '\t';
    for (std::size_t w = 0; w < sp.tgt.size(); ++w) line += (w ? " " : "") + sp.tgt[w];
    tsv += line + '\n';
    gold.push_back(sp.gold);
  }
  io::write_file(path(Files::heldout), tsv);
  write_pharaoh(path(Files::gold), gold);
}

RunConfig pipeline_config(const Config& cfg, const std::string& dir) {
  namespace fs = std::filesystem;
  auto path = [&](const char* name) { return (fs::path(dir) / name).string(); };
  RunConfig c;
  c.seed = cfg.seed;
  c.paths.work_dir = path("work");
  c.paths.raw = path(Files::raw);
  c.paths.titles = path(Files::titles);
  c.paths.token_embeddings = path(Files::token_embeddings);
  c.paths.pos_tags = path(Files::pos_tags);
  c.paths.paragraph_embeddings = path(Files::paragraph_embeddings);
  c.paths.eval_pairs = path(Files::heldout);
  c.paths.eval_gold = path(Files::gold);
  c.pairing.mode = PairingMode::cross_lingual;
  c.filter.min_subwords = static_cast<int>(cfg.min_words);
  c.filter.max_subwords = static_cast<int>(cfg.max_words);
  c.annotate.common_fraction = 1.0;
  c.model.tokenization = spanpred::Tokenization::word;
  c.model.dim = 32;
  c.model.layers = 2;
  c.model.heads = 2;
  c.model.hidden = 64;
  c.model.max_len = 64;
  c.train.lr = 1e-3;
  c.train.warmup_steps = 200;
  c.train.total_steps = 6000;
  c.train.batch_size = 8;
  c.validate();
  return c;
}

}  // namespace wsp::synthetic
