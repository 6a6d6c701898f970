#include "wsp/stages.hpp"

#include <chrono>
#include <filesystem>
#include <map>
#include <unordered_map>

#include "wsp/align.hpp"
#include "wsp/annotate.hpp"
#include "wsp/corpus.hpp"
#include "wsp/error.hpp"
#include "wsp/eval.hpp"
#include "wsp/filtering.hpp"
#include "wsp/io.hpp"
#include "wsp/log.hpp"
#include "wsp/pairing.hpp"
#include "wsp/parallel.hpp"
#include "wsp/sidecar.hpp"
#include "wsp/spanpred.hpp"
#include "wsp/train.hpp"

namespace wsp::stages {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

const std::string& require_path(const std::string& value, const char* key) {
  if (value.empty()) throw ConfigError(key, "required by this stage");
  return value;
}

nlohmann::json read_json(const std::string& path) {
  try {
    return nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path + ": malformed JSON: " + e.what());
  }
}

std::unordered_map<std::string, const Paragraph*> by_id(const std::vector<Paragraph>& paragraphs) {
  std::unordered_map<std::string, const Paragraph*> m;
  for (const auto& p : paragraphs) m.emplace(p.id, &p);
  return m;
}

const Paragraph& find_paragraph(const std::unordered_map<std::string, const Paragraph*>& m, const std::string& id) {
  auto it = m.find(id);
  if (it == m.end()) throw DataError("paragraph '" + id + "' is referenced by a pair but was not ingested");
  return *it->second;
}

}  // namespace

WorkFiles work_files(const RunConfig& cfg) {
  auto at = [&](const char* name) { return (fs::path(cfg.paths.work_dir) / name).string(); };
  WorkFiles w;
  w.paragraphs = at("paragraphs.jsonl");
  w.index = at("index.json");
  w.pairs = at("pairs.jsonl");
  w.filtered = at("filtered.jsonl");
  w.wiki = at("wiki.jsonl");
  w.common = at("common.jsonl");
  w.dataset = at("dataset.json");
  w.model = cfg.paths.model.empty() ? at("model.wspc") : cfg.paths.model;
  w.loss = at("loss.csv");
  w.alignments = cfg.paths.alignments.empty() ? at("alignments.txt") : cfg.paths.alignments;
  w.metrics = at("metrics.json");
  w.manifest = at("manifest.json");
  return w;
}

StageResult ingest(const RunConfig& cfg) {
  const auto w = work_files(cfg);
  StageResult r;
  const auto& raw = require_path(cfg.paths.raw, "paths.raw");
  r.inputs.push_back(raw);
  TitleEntityMap titles;
  if (!cfg.paths.titles.empty()) {
    titles = TitleEntityMap::load(cfg.paths.titles);
    r.inputs.push_back(cfg.paths.titles);
  }
  IngestStats st;
  const auto paragraphs = ingest_raw(raw, titles, &st);
  write_paragraphs(w.paragraphs, paragraphs);
  r.outputs.push_back(w.paragraphs);
  r.counts["paragraphs"] = st.paragraphs;
  r.counts["mentions"] = st.mentions;
  r.counts["overlaps_dropped"] = st.overlaps_dropped;
  r.message = std::to_string(st.paragraphs) + " paragraphs, " + std::to_string(st.mentions) + " mentions";
  return r;
}

StageResult index(const RunConfig& cfg) {
  const auto w = work_files(cfg);
  StageResult r;
  r.inputs.push_back(w.paragraphs);
  const auto paragraphs = load_paragraphs(w.paragraphs);
  const auto idx = build_index(paragraphs);
  io::write_file(w.index, idx.to_json().dump() + "\n");
  r.outputs.push_back(w.index);
  r.counts["paragraphs"] = idx.num_paragraphs();
  r.counts["entities"] = idx.postings.size();
  r.message = std::to_string(idx.postings.size()) + " entities over " + std::to_string(idx.num_paragraphs()) +
              " paragraphs";
  return r;
}

StageResult pair(const RunConfig& cfg) {
  const auto w = work_files(cfg);
  StageResult r;
  r.inputs.push_back(w.index);
  const auto idx = EntityIndex::from_json(read_json(w.index));
  PairingOptions opts = cfg.pairing;
  opts.seed = stage_seed(cfg, "pair");
  const auto result = collect_pairs(idx, opts);
  write_pairs(w.pairs, result.pairs);
  r.outputs.push_back(w.pairs);
  r.counts = result.stats.to_json();
  r.message = std::to_string(result.pairs.size()) + " pairs";
  return r;
}

StageResult filter(const RunConfig& cfg) {
  const auto w = work_files(cfg);
  StageResult r;
  r.inputs = {w.pairs, w.paragraphs};
  const auto pairs = load_pairs(w.pairs);
  const auto paragraphs = load_paragraphs(w.paragraphs);

  SubwordCounter counter;
  if (!cfg.paths.subword_counts.empty()) {
    counter = SubwordCounter(read_subword_counts(cfg.paths.subword_counts));
    r.inputs.push_back(cfg.paths.subword_counts);
  }
  std::unordered_map<std::string, int> counts;
  for (const auto& p : paragraphs) counts.emplace(p.id, counter.count(p));

  EmbeddingTable embs;
  const EmbeddingTable* embs_ptr = nullptr;
  if (!cfg.paths.paragraph_embeddings.empty()) {
    embs = read_paragraph_embeddings(cfg.paths.paragraph_embeddings);
    embs_ptr = &embs;
    r.inputs.push_back(cfg.paths.paragraph_embeddings);
  }
  FilterStats st;
  const auto kept = filter_pairs(pairs, counts, embs_ptr, cfg.filter, &st);
  write_pairs(w.filtered, kept);
  r.outputs.push_back(w.filtered);
  r.counts = st.to_json();
  r.counts["similarity_filter"] = embs_ptr != nullptr;
  r.message = std::to_string(st.kept) + " of " + std::to_string(st.input) + " pairs kept";
  if (!embs_ptr) r.message += " (no paragraph embeddings, similarity filter skipped)";
  return r;
}

StageResult annotate(const RunConfig& cfg) {
  const auto w = work_files(cfg);
  StageResult r;
  r.inputs = {w.filtered, w.paragraphs};
  const auto pairs = load_pairs(w.filtered);
  const auto paragraphs = load_paragraphs(w.paragraphs);
  const auto lookup = by_id(paragraphs);

  const bool want_common = cfg.annotate.common_fraction > 0.0;
  AnnotationSidecars sidecars;
  if (want_common) {
    const auto& tok = require_path(cfg.paths.token_embeddings, "paths.token_embeddings");
    const auto& pos = require_path(cfg.paths.pos_tags, "paths.pos_tags");
    sidecars = AnnotationSidecars(read_token_sidecar(tok), read_pos_tags(pos));
    r.inputs.push_back(tok);
    r.inputs.push_back(pos);
  }

  std::vector<std::vector<AlignmentExample>> wiki(pairs.size());
  std::vector<std::vector<AlignmentExample>> common(pairs.size());
  std::vector<AnnotateCounters> counters(pairs.size());
  parallel_for_checked(pairs.size(), [&](std::size_t i) {
    const auto& src = find_paragraph(lookup, pairs[i].src_id);
    const auto& tgt = find_paragraph(lookup, pairs[i].tgt_id);
    wiki[i] = annotate_wiki(pairs[i], src, tgt, &counters[i]);
    if (want_common) common[i] = annotate_common(pairs[i], src, tgt, sidecars, cfg.annotate, &counters[i]);
  });

  AnnotateCounters total;
  std::vector<AlignmentExample> all_wiki;
  std::vector<AlignmentExample> all_common;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    total += counters[i];
    all_wiki.insert(all_wiki.end(), wiki[i].begin(), wiki[i].end());
    all_common.insert(all_common.end(), common[i].begin(), common[i].end());
  }
  write_examples(w.wiki, all_wiki);
  write_examples(w.common, all_common);
  r.outputs = {w.wiki, w.common};
  r.counts = total.to_json();
  r.message = std::to_string(all_wiki.size()) + " wiki and " + std::to_string(all_common.size()) +
              " common-word examples";
  return r;
}

StageResult emit(const RunConfig& cfg) {
  const auto w = work_files(cfg);
  StageResult r;
  r.inputs = {w.wiki, w.common};
  const auto wiki = load_examples(w.wiki);
  const auto common = load_examples(w.common);
  MergeStats st;
  auto dataset = merge_datasets(wiki, common, cfg.annotate.common_fraction, stage_seed(cfg, "emit"), &st);
  sort_examples(dataset);
  emit_squad(dataset, w.dataset);
  r.outputs.push_back(w.dataset);
  r.counts = st.to_json();
  r.message = std::to_string(dataset.size()) + " training records";
  return r;
}

StageResult train(const RunConfig& cfg) {
  const auto w = work_files(cfg);
  StageResult r;
  r.inputs.push_back(w.dataset);
  if (!io::exists(w.dataset)) throw IoError(w.dataset, "dataset not found (run the emit stage first)");
  const auto vocab = spanpred::build_vocab(spanpred::squad_texts(w.dataset), cfg.model.tokenization,
                                           cfg.model.max_vocab);
  const auto encoder = cfg.model.encoder(vocab, stage_seed(cfg, "init"));
  encoder.validate();
  spanpred::DatasetStats ds;
  const auto examples = spanpred::load_squad_examples(encoder, w.dataset, &ds);
  if (examples.empty()) throw DataError(w.dataset + ": no usable training records");

  auto tc = cfg.train;
  tc.seed = stage_seed(cfg, "train");
  auto params = spanpred::init_params<float>(encoder);
  const std::size_t every = std::max<std::size_t>(1, tc.total_steps / 20);
  double window = 0.0;
  const auto result = spanpred::train(params, examples, tc, [&](std::size_t step, double loss) {
    window += loss;
    if ((step + 1) % every == 0) {
      log::info("train: step " + std::to_string(step + 1) + "/" + std::to_string(tc.total_steps) +
                " mean loss " + std::to_string(window / static_cast<double>(every)));
      window = 0.0;
    }
  });
  spanpred::save_checkpoint(params, w.model);
  spanpred::write_loss_curve(w.loss, result.loss_curve);
  r.outputs = {w.model, w.loss};
  r.counts = ds.to_json();
  r.counts["vocab"] = vocab.size();
  r.counts["steps"] = result.loss_curve.size();
  r.counts["examples_seen"] = result.examples_seen;
  r.counts["final_loss"] = result.loss_curve.empty() ? 0.0 : result.loss_curve.back();
  r.message = std::to_string(result.loss_curve.size()) + " steps on " + std::to_string(examples.size()) +
              " examples";
  return r;
}

StageResult align(const RunConfig& cfg) {
  const auto w = work_files(cfg);
  StageResult r;
  const auto& input = require_path(cfg.paths.eval_pairs, "paths.eval_pairs");
  r.inputs = {w.model, input};
  const spanpred::ModelPredictor model(spanpred::load_checkpoint(w.model));
  const auto pairs = load_sentence_pairs(input);
  const auto alignments = align_corpus(model, pairs, cfg.align);
  write_pharaoh(w.alignments, alignments);
  std::size_t links = 0;
  for (const auto& a : alignments) links += a.size();
  r.outputs.push_back(w.alignments);
  r.counts["sentence_pairs"] = pairs.size();
  r.counts["links"] = links;
  r.message = std::to_string(links) + " links over " + std::to_string(pairs.size()) + " sentence pairs";
  return r;
}

StageResult eval(const RunConfig& cfg) {
  const auto w = work_files(cfg);
  StageResult r;
  const auto& gold_path = require_path(cfg.paths.eval_gold, "paths.eval_gold");
  r.inputs = {w.alignments, gold_path};
  const auto predicted = load_pharaoh(w.alignments);
  const auto gold = load_gold(gold_path);
  const auto report = compute_metrics(predicted, gold);
  io::write_file(w.metrics, report_json(report).dump(2) + "\n");
  r.outputs.push_back(w.metrics);
  r.counts["precision"] = report.totals.precision;
  r.counts["recall"] = report.totals.recall;
  r.counts["f1"] = report.totals.f1;
  r.counts["aer"] = report.totals.aer;
  r.message = report_text(report);
  if (!r.message.empty() && r.message.back() == '\n') r.message.pop_back();
  return r;
}

StageResult stats(const RunConfig& cfg) {
  const auto w = work_files(cfg);
  StageResult r;
  auto& c = r.counts;
  if (io::exists(w.paragraphs)) {
    IngestStats st;
    const auto paragraphs = load_paragraphs(w.paragraphs, &st);
    std::map<std::string, std::size_t> langs;
    for (const auto& p : paragraphs) ++langs[p.lang];
    c["paragraphs"] = {{"count", paragraphs.size()}, {"mentions", st.mentions}, {"by_lang", langs}};
  }
  for (const auto& [key, path] : {std::pair{"pairs", w.pairs}, std::pair{"filtered", w.filtered}}) {
    if (io::exists(path)) c[key] = pair_stats(load_pairs(path)).to_json();
  }
  for (const auto& [key, path] : {std::pair{"wiki", w.wiki}, std::pair{"common", w.common}}) {
    if (io::exists(path)) c[key] = load_examples(path).size();
  }
  if (io::exists(w.dataset)) c["dataset_records"] = spanpred::squad_texts(w.dataset).size() / 2;
  if (io::exists(w.metrics)) c["metrics"] = read_json(w.metrics)["totals"];
  r.message = c.dump(2);
  return r;
}

const std::vector<std::string>& pipeline_order() {
  static const std::vector<std::string> order = {"ingest", "index",  "pair",  "filter", "annotate",
                                                 "emit",   "train", "align", "eval"};
  return order;
}

bool is_stage(std::string_view name) {
  for (const auto& s : pipeline_order()) {
    if (s == name) return true;
  }
  return false;
}

namespace {

using StageFn = StageResult (*)(const RunConfig&);

StageFn stage_fn(std::string_view name) {
  if (name == "ingest") return ingest;
  if (name == "index") return index;
  if (name == "pair") return pair;
  if (name == "filter") return filter;
  if (name == "annotate") return annotate;
  if (name == "emit") return emit;
  if (name == "train") return train;
  if (name == "align") return align;
  if (name == "eval") return eval;
  if (name == "stats") return stats;
  throw ConfigError("stage", "unknown stage '" + std::string(name) + "'");
}

// Outputs a stage may have left behind when it fails.
std::vector<std::string> expected_outputs(const RunConfig& cfg, std::string_view name) {
  const auto w = work_files(cfg);
  if (name == "ingest") return {w.paragraphs};
  if (name == "index") return {w.index};
  if (name == "pair") return {w.pairs};
  if (name == "filter") return {w.filtered};
  if (name == "annotate") return {w.wiki, w.common};
  if (name == "emit") return {w.dataset};
  if (name == "train") return {w.model, w.loss};
  if (name == "align") return {w.alignments};
  if (name == "eval") return {w.metrics};
  return {};
}

std::vector<FileDigest> digest_existing(const std::vector<std::string>& paths) {
  std::vector<std::string> present;
  for (const auto& p : paths) {
    if (io::exists(p)) present.push_back(p);
  }
  return digest_files(present);
}

}  // namespace

StageResult run(const RunConfig& cfg, std::string_view name) {
  const StageFn fn = stage_fn(name);
  set_threads(cfg.threads);
  if (name == "stats") return fn(cfg);

  fs::create_directories(cfg.paths.work_dir);
  Manifest manifest(work_files(cfg).manifest);
  ManifestEntry entry;
  entry.stage = std::string(name);
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
  try {
    StageResult r = fn(cfg);
    entry.inputs = digest_files(r.inputs);
    entry.outputs = digest_files(r.outputs);
    entry.counts = r.counts;
    entry.wall_seconds = elapsed();
    manifest.append(cfg, entry);
    return r;
  } catch (const std::exception& e) {
    entry.ok = false;
    entry.error = e.what();
    entry.wall_seconds = elapsed();
    try {
      entry.outputs = digest_existing(expected_outputs(cfg, name));
      manifest.append(cfg, entry);
    } catch (const std::exception&) {
      // the original error is the one worth reporting
    }
    throw;
  }
}

std::vector<StageResult> run_pipeline(const RunConfig& cfg) {
  fs::create_directories(cfg.paths.work_dir);
  Manifest(work_files(cfg).manifest).reset(cfg);
  std::vector<StageResult> out;
  for (const auto& name : pipeline_order()) {
    log::info(name + ": running");
    out.push_back(run(cfg, name));
    log::info(name + ": " + out.back().message);
  }
  return out;
}

}  // namespace wsp::stages
