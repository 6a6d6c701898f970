#include "wsp/config.hpp"

#include <filesystem>
#include <set>

#include "wsp/error.hpp"
#include "wsp/io.hpp"
#include "wsp/random.hpp"

namespace wsp {

namespace {

using nlohmann::json;

// Reads the keys of one config object; anything not read is rejected.
class Section {
 public:
  Section(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw ConfigError(prefix_.empty() ? "<root>" : prefix_, "expected an object");
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void str(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(name(key), "expected a string");
      out = v->get<std::string>();
    }
  }
  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(name(key), "expected a number");
      out = v->get<double>();
    }
  }
  void boolean(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(name(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  template <typename Int>
  void integer(const std::string& key, Int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError(name(key), "expected an integer");
      if constexpr (std::is_unsigned_v<Int>) {
        if (v->is_number_unsigned()) {
          out = v->get<Int>();
        } else {
          throw ConfigError(name(key), "must be non-negative");
        }
      } else {
        out = v->get<Int>();
      }
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(name(key), "unknown key");
    }
  }

  std::string name(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

 private:
  const json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

template <typename F>
void with_section(Section& parent, const std::string& key, F&& body) {
  if (const json* v = parent.find(key)) {
    Section s(*v, parent.name(key));
    body(s);
    s.finish();
  }
}

}  // namespace

spanpred::EncoderConfig ModelConfig::encoder(std::vector<std::string> vocab, std::uint64_t seed) const {
  spanpred::EncoderConfig c;
  c.tokenization = tokenization;
  c.vocab = std::move(vocab);
  c.dim = dim;
  c.layers = layers;
  c.heads = heads;
  c.hidden = hidden;
  c.max_len = max_len;
  c.seed = seed;
  return c;
}

void RunConfig::validate() const {
  if (version != kFormatVersion) {
    throw ConfigError("version", "'" + version + "' does not match this build's format " + std::string(kFormatVersion));
  }
  if (threads < 0) throw ConfigError("threads", "must be >= 0");
  if (paths.work_dir.empty()) throw ConfigError("paths.work_dir", "must not be empty");
  if (pairing.cap_per_entity && *pairing.cap_per_entity == 0) {
    throw ConfigError("pairing.cap_per_entity", "must be positive or null");
  }
  filter.validate();
  annotate.validate();
  model.encoder({}, 0).validate();
  train.validate();
  align.validate();
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["version"] = version;
  j["seed"] = seed;
  j["threads"] = threads;
  nlohmann::ordered_json p;
  p["work_dir"] = paths.work_dir;
  p["raw"] = paths.raw;
  p["titles"] = paths.titles;
  p["token_embeddings"] = paths.token_embeddings;
  p["pos_tags"] = paths.pos_tags;
  p["paragraph_embeddings"] = paths.paragraph_embeddings;
  p["subword_counts"] = paths.subword_counts;
  p["eval_pairs"] = paths.eval_pairs;
  p["eval_gold"] = paths.eval_gold;
  p["model"] = paths.model;
  p["alignments"] = paths.alignments;
  j["paths"] = p;
  nlohmann::ordered_json pr;
  pr["mode"] = to_string(pairing.mode);
  pr["cap_per_entity"] = pairing.cap_per_entity ? nlohmann::ordered_json(*pairing.cap_per_entity) : nullptr;
  pr["english_as_target"] = pairing.english_as_target;
  pr["mono_lang"] = pairing.mono_lang ? nlohmann::ordered_json(*pairing.mono_lang) : nullptr;
  pr["english_code"] = pairing.english_code;
  j["pairing"] = pr;
  nlohmann::ordered_json f;
  f["min_subwords"] = filter.min_subwords;
  f["max_subwords"] = filter.max_subwords;
  f["sim_threshold"] = filter.sim_threshold;
  j["filter"] = f;
  nlohmann::ordered_json a;
  a["common_fraction"] = annotate.common_fraction;
  a["common_tags"] = annotate.common_tags;
  j["annotate"] = a;
  nlohmann::ordered_json m;
  m["tokenization"] = spanpred::to_string(model.tokenization);
  m["dim"] = model.dim;
  m["layers"] = model.layers;
  m["heads"] = model.heads;
  m["hidden"] = model.hidden;
  m["max_len"] = model.max_len;
  m["max_vocab"] = model.max_vocab;
  j["model"] = m;
  auto t = train.to_json();
  t.erase("seed");
  j["train"] = t;
  nlohmann::ordered_json al;
  al["threshold"] = align.threshold;
  al["strategy"] = to_string(align.strategy);
  al["min_score"] = align.min_score;
  j["align"] = al;
  return j;
}

RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  Section root(j, "");
  root.str("version", c.version);
  root.integer("seed", c.seed);
  root.integer("threads", c.threads);
  with_section(root, "paths", [&](Section& s) {
    s.str("work_dir", c.paths.work_dir);
    s.str("raw", c.paths.raw);
    s.str("titles", c.paths.titles);
    s.str("token_embeddings", c.paths.token_embeddings);
    s.str("pos_tags", c.paths.pos_tags);
    s.str("paragraph_embeddings", c.paths.paragraph_embeddings);
    s.str("subword_counts", c.paths.subword_counts);
    s.str("eval_pairs", c.paths.eval_pairs);
    s.str("eval_gold", c.paths.eval_gold);
    s.str("model", c.paths.model);
    s.str("alignments", c.paths.alignments);
  });
  with_section(root, "pairing", [&](Section& s) {
    std::string mode = to_string(c.pairing.mode);
    s.str("mode", mode);
    try {
      c.pairing.mode = parse_pairing_mode(mode);
    } catch (const Error& e) {
      throw ConfigError("pairing.mode", e.what());
    }
    if (const json* v = s.find("cap_per_entity"); v && !v->is_null()) {
      if (!v->is_number_unsigned()) throw ConfigError("pairing.cap_per_entity", "expected a positive integer or null");
      c.pairing.cap_per_entity = v->get<std::size_t>();
    }
    s.boolean("english_as_target", c.pairing.english_as_target);
    if (const json* v = s.find("mono_lang"); v && !v->is_null()) {
      if (!v->is_string()) throw ConfigError("pairing.mono_lang", "expected a string or null");
      c.pairing.mono_lang = v->get<std::string>();
    }
    s.str("english_code", c.pairing.english_code);
  });
  with_section(root, "filter", [&](Section& s) {
    s.integer("min_subwords", c.filter.min_subwords);
    s.integer("max_subwords", c.filter.max_subwords);
    s.number("sim_threshold", c.filter.sim_threshold);
  });
  with_section(root, "annotate", [&](Section& s) {
    s.number("common_fraction", c.annotate.common_fraction);
    if (const json* v = s.find("common_tags")) {
      if (!v->is_array()) throw ConfigError("annotate.common_tags", "expected an array of strings");
      c.annotate.common_tags.clear();
      for (const auto& t : *v) {
        if (!t.is_string()) throw ConfigError("annotate.common_tags", "expected an array of strings");
        c.annotate.common_tags.insert(t.get<std::string>());
      }
    }
  });
  with_section(root, "model", [&](Section& s) {
    std::string tok = spanpred::to_string(c.model.tokenization);
    s.str("tokenization", tok);
    c.model.tokenization = spanpred::parse_tokenization(tok);
    s.integer("dim", c.model.dim);
    s.integer("layers", c.model.layers);
    s.integer("heads", c.model.heads);
    s.integer("hidden", c.model.hidden);
    s.integer("max_len", c.model.max_len);
    s.integer("max_vocab", c.model.max_vocab);
  });
  with_section(root, "train", [&](Section& s) {
    s.number("lr", c.train.lr);
    s.integer("warmup_steps", c.train.warmup_steps);
    s.integer("total_steps", c.train.total_steps);
    s.integer("batch_size", c.train.batch_size);
    std::string opt = spanpred::to_string(c.train.optimizer);
    s.str("optimizer", opt);
    c.train.optimizer = spanpred::parse_optimizer(opt);
    s.number("beta1", c.train.beta1);
    s.number("beta2", c.train.beta2);
    s.number("adam_eps", c.train.adam_eps);
    s.number("clip_norm", c.train.clip_norm);
  });
  with_section(root, "align", [&](Section& s) {
    s.number("threshold", c.align.threshold);
    std::string strategy = to_string(c.align.strategy);
    s.str("strategy", strategy);
    c.align.strategy = parse_span_strategy(strategy);
    s.number("min_score", c.align.min_score);
  });
  root.finish();
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  const std::string text = io::read_file(path);
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    RunConfig c;
    c.validate();
    return c;
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path, std::string("malformed JSON: ") + e.what());
  }
  RunConfig c = config_from_json(j);
  // relative paths written in a file are relative to that file
  const auto base = std::filesystem::path(path).parent_path();
  const std::pair<const char*, std::string*> fields[] = {
      {"work_dir", &c.paths.work_dir},
      {"raw", &c.paths.raw},
      {"titles", &c.paths.titles},
      {"token_embeddings", &c.paths.token_embeddings},
      {"pos_tags", &c.paths.pos_tags},
      {"paragraph_embeddings", &c.paths.paragraph_embeddings},
      {"subword_counts", &c.paths.subword_counts},
      {"eval_pairs", &c.paths.eval_pairs},
      {"eval_gold", &c.paths.eval_gold},
      {"model", &c.paths.model},
      {"alignments", &c.paths.alignments},
  };
  if (j.contains("paths")) {
    for (const auto& [key, field] : fields) {
      if (j["paths"].contains(key) && !field->empty() && std::filesystem::path(*field).is_relative()) {
        *field = (base / *field).lexically_normal().string();
      }
    }
  }
  return c;
}

std::uint64_t stage_seed(const RunConfig& cfg, std::string_view stage) { return derive_seed(cfg.seed, stage); }

nlohmann::ordered_json ManifestEntry::to_json() const {
  auto files = [](const std::vector<FileDigest>& v) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& f : v) arr.push_back({{"path", f.path}, {"sha256", f.sha256}});
    return arr;
  };
  nlohmann::ordered_json j;
  j["stage"] = stage;
  j["status"] = ok ? "ok" : "failed";
  if (!ok) j["error"] = error;
  j["inputs"] = files(inputs);
  j["outputs"] = files(outputs);
  j["counts"] = counts;
  j["wall_seconds"] = wall_seconds;
  return j;
}

std::vector<FileDigest> digest_files(const std::vector<std::string>& paths) {
  std::vector<FileDigest> out;
  for (const auto& p : paths) {
    if (p.empty()) continue;
    if (!io::exists(p)) throw IoError(p, "no such file");
    out.push_back({p, io::sha256_file(p)});
  }
  return out;
}

void Manifest::write(const nlohmann::ordered_json& doc) const { io::write_file(path_, doc.dump(2) + "\n"); }

void Manifest::reset(const RunConfig& cfg) {
  nlohmann::ordered_json doc;
  doc["version"] = std::string(kFormatVersion);
  doc["config"] = cfg.to_json();
  doc["stages"] = nlohmann::ordered_json::array();
  write(doc);
}

void Manifest::append(const RunConfig& cfg, const ManifestEntry& entry) {
  nlohmann::ordered_json doc;
  if (io::exists(path_)) {
    try {
      doc = nlohmann::ordered_json::parse(io::read_file(path_));
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(path_ + ": manifest is not valid JSON: " + e.what());
    }
  } else {
    doc["version"] = std::string(kFormatVersion);
    doc["config"] = cfg.to_json();
    doc["stages"] = nlohmann::ordered_json::array();
  }
  doc["stages"].push_back(entry.to_json());
  write(doc);
}

}  // namespace wsp
