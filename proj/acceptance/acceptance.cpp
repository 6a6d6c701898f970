// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Everything runs on generated data.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "../tests/oracles.hpp"
#include "wsp/align.hpp"
#include "wsp/annotate.hpp"
#include "wsp/config.hpp"
#include "wsp/eval.hpp"
#include "wsp/filtering.hpp"
#include "wsp/io.hpp"
#include "wsp/log.hpp"
#include "wsp/pairing.hpp"
#include "wsp/random.hpp"
#include "wsp/spanpred.hpp"
#include "wsp/stages.hpp"
#include "wsp/synthetic.hpp"
#include "wsp/train.hpp"

namespace fs = std::filesystem;
using namespace wsp;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// --- metrics -------------------------------------------------------------

Outcome metric_oracle() {
  Outcome o;
  const auto t0 = Clock::now();
  Rng rng(2024);
  double worst = 0.0, worst_identity = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t sentences = 1 + rng.below(8);
    std::vector<oracle::LinkSet> a, s, p;
    std::vector<GoldAlignment> gold, gold_eq;
    for (std::size_t i = 0; i < sentences; ++i) {
      const auto n = 1 + rng.below(12), m = 1 + rng.below(12);
      a.push_back(oracle::random_links(rng, n, m, rng.uniform() * 0.4));
      s.push_back(oracle::random_links(rng, n, m, rng.uniform() * 0.3));
      auto pi = s.back();
      for (const auto& l : oracle::random_links(rng, n, m, 0.2)) pi.insert(l);
      p.push_back(pi);
      gold.push_back({s.back(), pi});
      gold_eq.push_back({s.back(), s.back()});
    }
    const auto want = oracle::metrics(a, s, p);
    const auto got = compute_metrics(a, gold).totals;
    for (double d : {got.precision - want.precision, got.recall - want.recall, got.f1 - want.f1,
                     got.aer - want.aer}) {
      worst = std::max(worst, std::abs(d));
    }
    const auto eq = compute_metrics(a, gold_eq).totals;
    worst_identity = std::max(worst_identity, std::abs(eq.aer - (1.0 - eq.f1)));
  }
  const double secs = seconds_since(t0);
  o.check(worst <= 1e-12, "max deviation " + fmt("%.3g", worst));
  o.check(worst_identity <= 1e-12, "AER = 1 - F1 off by " + fmt("%.3g", worst_identity));
  o.check(secs < 10.0, "took " + fmt("%.2f s", secs));
  if (o.pass) o.detail = "1000 instances, max deviation " + fmt("%.1e", worst) + ", " + fmt("%.2f s", secs);
  return o;
}

Outcome metric_worked_example() {
  Outcome o;
  const std::vector<AlignmentSet> a = {{{1, 1}, {2, 2}}};
  const std::vector<GoldAlignment> g = {{{{1, 1}}, {{1, 1}, {2, 3}}}};
  const auto m = compute_metrics(a, g).totals;
  o.check(m.precision == 0.5, "precision " + fmt("%.17g", m.precision));
  o.check(m.recall == 1.0, "recall " + fmt("%.17g", m.recall));
  o.check(m.f1 == 2.0 / 3.0, "F1 " + fmt("%.17g", m.f1));
  o.check(m.aer == 1.0 / 3.0, "AER " + fmt("%.17g", m.aer));
  if (o.pass) o.detail = "P=0.5 R=1 F1=2/3 AER=1/3";
  return o;
}

// --- pairing -------------------------------------------------------------

Outcome pairing_counts() {
  Outcome o;
  const auto t0 = Clock::now();
  Rng rng(77);
  const std::size_t n_paragraphs = 1000, n_entities = 50;
  const std::vector<std::string> langs = {"en", "de", "fr", "ja", "es"};
  // Entities 0..9 only ever appear in German; the rest in any language.
  std::vector<Paragraph> ps;
  std::map<std::string, std::size_t> n_e;
  std::map<std::string, std::map<std::string, std::size_t>> n_el;
  for (std::size_t i = 0; i < n_paragraphs; ++i) {
    std::set<std::size_t> ents;
    const auto k = 1 + rng.below(3);
    while (ents.size() < k) ents.insert(rng.below(n_entities));
    const bool german_only = *ents.begin() < 10;
    if (german_only) ents = {*ents.begin()};
    const std::string lang = german_only ? "de" : langs[rng.below(langs.size())];
    Paragraph p{"p" + std::to_string(i), lang, "", {}};
    for (auto e : ents) {
      const std::string q = "Q" + std::to_string(e);
      const auto start = static_cast<std::int64_t>(p.text.size()) + (p.text.empty() ? 0 : 1);
      if (!p.text.empty()) p.text += ' ';
      p.text += q;
      p.mentions.push_back({q, start, start + static_cast<std::int64_t>(q.size()) - 1, q});
      ++n_e[q];
      ++n_el[q][lang];
    }
    ps.push_back(std::move(p));
  }
  std::size_t expected = 0, expected_mono = 0, single_language = 0;
  for (const auto& [q, n] : n_e) {
    expected += n * (n - 1) / 2;
    if (n_el[q].size() < 2) {
      ++single_language;
      continue;
    }
    for (const auto& [l, m] : n_el[q]) expected_mono += m * (m - 1) / 2;
  }
  const auto index = build_index(ps);
  PairingOptions any;
  any.mode = PairingMode::any;
  const auto r = collect_pairs(index, any);
  o.check(r.stats.combinations == expected,
          "combinations " + std::to_string(r.stats.combinations) + " vs " + std::to_string(expected));
  o.check(r.stats.after_cap == expected, "relations before dedup " + std::to_string(r.stats.after_cap));
  o.check(r.pairs.size() + r.stats.duplicates_dropped == expected, "dedup accounting");

  PairingOptions mono;
  mono.mode = PairingMode::monolingual;
  const auto m = collect_pairs(index, mono);
  o.check(m.stats.entities_skipped_monolingual == single_language,
          "skipped " + std::to_string(m.stats.entities_skipped_monolingual) + " vs " + std::to_string(single_language));
  o.check(m.stats.after_mode_filter == expected_mono,
          "monolingual relations " + std::to_string(m.stats.after_mode_filter) + " vs " + std::to_string(expected_mono));
  for (const auto& p : m.pairs) {
    if (n_el[p.entity_id].size() < 2 || p.src_lang != p.tgt_lang) {
      o.check(false, "unexpected monolingual pair " + p.src_id + "-" + p.tgt_id);
      break;
    }
  }
  const double secs = seconds_since(t0);
  o.check(secs < 5.0, "took " + fmt("%.2f s", secs));
  if (o.pass) {
    o.detail = std::to_string(expected) + " combinations, " + std::to_string(single_language) +
               " single-language entities dropped, " + fmt("%.2f s", secs);
  }
  return o;
}

// --- annotation ----------------------------------------------------------

Outcome mutual_argmax_oracle() {
  Outcome o;
  Rng rng(5);
  std::size_t links = 0;
  for (int t = 0; t < 200; ++t) {
    SimilarityMatrix s{1 + rng.below(32), 1 + rng.below(32), {}};
    s.values.resize(s.rows * s.cols);
    // alternate between continuous values and coarse ones that force ties
    for (auto& v : s.values) v = t % 2 ? rng.uniform() * 2 - 1 : static_cast<double>(rng.below(4)) / 3.0;
    const auto got = mutual_argmax(s);
    const auto want = oracle::mutual_argmax(s.values, s.rows, s.cols);
    links += got.size();
    if (got != want) {
      o.check(false, "matrix " + std::to_string(t) + " (" + std::to_string(s.rows) + "x" + std::to_string(s.cols) + ")");
      break;
    }
  }
  if (o.pass) o.detail = "200 matrices, " + std::to_string(links) + " links, exact";
  return o;
}

// --- filtering -----------------------------------------------------------

Outcome filter_defaults() {
  Outcome o;
  const FilterConfig cfg;
  const ParagraphPair p{"x", "y", "Q", "de", "en"};
  auto keep = [&](int cx, int cy) { return length_filter(p, {{"x", cx}, {"y", cy}}, cfg); };
  o.check(!keep(29, 100), "(29, 100) kept");
  o.check(!keep(100, 29), "(100, 29) kept");
  o.check(!keep(100, 159), "(100, 159) kept");
  o.check(!keep(159, 100), "(159, 100) kept");
  o.check(keep(30, 158), "(30, 158) dropped");
  o.check(keep(158, 30), "(158, 30) dropped");
  // (1,0,0,0,0).(3,2,1,1,1) / 4 = 0.75 exactly
  EmbeddingTable at;
  at.add("x", {1, 0, 0, 0, 0});
  at.add("y", {3, 2, 1, 1, 1});
  o.check(cosine(*at.find("x"), *at.find("y")) == 0.75, "cosine not exactly 0.75");
  o.check(!similarity_filter(p, at, cfg), "cosine 0.75 kept");
  EmbeddingTable above;
  above.add("x", {1, 0});
  above.add("y", {1, 0.8f});
  o.check(similarity_filter(p, above, cfg), "cosine 0.78 dropped");
  if (o.pass) o.detail = "length bounds [30, 158], cosine > 0.75";
  return o;
}

// --- span prediction -----------------------------------------------------

spanpred::EncoderConfig tiny_encoder(spanpred::Tokenization mode) {
  const std::vector<std::string> texts = {"the cat sat on the mat", "le chat est assis sur le tapis"};
  spanpred::EncoderConfig c;
  c.tokenization = mode;
  c.vocab = spanpred::build_vocab(texts, mode);
  c.dim = 8;
  c.layers = 2;
  c.heads = 2;
  c.hidden = 16;
  c.max_len = 96;
  c.seed = 11;
  return c;
}

Outcome span_numerics() {
  using namespace spanpred;
  Outcome o;
  const auto t0 = Clock::now();
  double worst_sum = 0.0, worst_loss = 0.0, worst_uniform = 0.0;
  for (auto mode : {Tokenization::character, Tokenization::word}) {
    const auto params = init_params<float>(tiny_encoder(mode));
    for (std::size_t i : {0u, 4u, 8u}) {
      const auto d = span_distributions(params, "the cat sat on the mat", "le chat est assis sur le tapis", i, i + 2);
      worst_sum = std::max({worst_sum, std::abs(std::accumulate(d.p_start.begin(), d.p_start.end(), 0.0) - 1.0),
                            std::abs(std::accumulate(d.p_end.begin(), d.p_end.end(), 0.0) - 1.0)});
      const auto best = best_span(d);
      const double w = span_score(d, best->start, best->end);
      worst_loss = std::max(worst_loss, std::abs(span_loss(d, best->start, best->end) + std::log(w)));
    }
  }
  for (std::size_t n : {1u, 3u, 50u, 384u}) {
    const SpanDistribution u{std::vector<double>(n, 1.0 / n), std::vector<double>(n, 1.0 / n)};
    worst_uniform = std::max(worst_uniform, std::abs(span_loss(u, 0, n - 1) - 2.0 * std::log(double(n))));
  }
  // zero heads give the uniform distribution through the full model
  auto flat = init_params<double>(tiny_encoder(Tokenization::character));
  for (auto slot : {flat.layout.head_start, flat.layout.head_end}) {
    std::fill(flat.tensors[slot].data.begin(), flat.tensors[slot].data.end(), 0.0);
  }
  const TrainingExample ex{encode_input(flat.config, "the cat", "le chat", 4, 6), 3, 6};
  worst_uniform = std::max(worst_uniform, std::abs(example_loss(flat, ex) - 2.0 * std::log(7.0)));

  const auto p64 = cast_params<double>(init_params<float>(tiny_encoder(Tokenization::character)));
  const TrainingExample gx{encode_input(p64.config, "the cat sat", "le chat est assis", 4, 6), 3, 6};
  const auto rep = grad_check(p64, gx, 1e-5, 256, 3);
  const double secs = seconds_since(t0);

  o.check(worst_sum <= 1e-6, "distribution sum off by " + fmt("%.3g", worst_sum));
  o.check(worst_loss <= 1e-9, "loss vs -log w off by " + fmt("%.3g", worst_loss));
  o.check(worst_uniform <= 1e-9, "uniform loss off by " + fmt("%.3g", worst_uniform));
  o.check(rep.coordinates >= 200, "only " + std::to_string(rep.coordinates) + " coordinates");
  o.check(rep.max_rel_error <= 1e-4, "gradient rel error " + fmt("%.3g", rep.max_rel_error) + " at " +
                                         rep.worst_tensor + "[" + std::to_string(rep.worst_index) + "]");
  o.check(secs < 60.0, "took " + fmt("%.1f s", secs));
  if (o.pass) {
    o.detail = "sum err " + fmt("%.1e", worst_sum) + ", grad check " + std::to_string(rep.coordinates) +
               " coords max rel " + fmt("%.1e", rep.max_rel_error) + ", " + fmt("%.2f s", secs);
  }
  return o;
}

// --- inference -----------------------------------------------------------

Outcome subword_mapping() {
  Outcome o;
  const std::vector<std::pair<std::size_t, std::size_t>> sub = {{0, 1}, {2, 4}, {5, 8}, {9, 9}, {11, 12}, {13, 14}};
  const std::vector<std::string> names = {"Yo", "##shi", "##mits", "##u", "AS", "##HI"};
  const auto words = whitespace_boundaries("Yoshimitsu ASHIKAGA");
  const auto picked = map_span_to_words(sub.front().first, sub.back().second, words);
  std::vector<std::string> kept;
  for (std::size_t t = 0; t < sub.size(); ++t) {
    for (auto w : picked) {
      if (sub[t].first >= words.spans[w].first && sub[t].second <= words.spans[w].second) kept.push_back(names[t]);
    }
  }
  const std::vector<std::string> want = {"Yo", "##shi", "##mits", "##u"};
  o.check(kept == want, "selected " + std::to_string(kept.size()) + " subwords");
  if (o.pass) o.detail = "[Yo, ##shi, ##mits, ##u]";
  return o;
}

Outcome symmetrization() {
  Outcome o;
  Rng rng(19);
  for (int t = 0; t < 200 && o.pass; ++t) {
    const auto r = 1 + rng.below(10), c = 1 + rng.below(10);
    TokenAlignmentMatrix xy(r, c, Direction::src_to_tgt), yx(c, r, Direction::tgt_to_src);
    for (auto& v : xy.values) v = t % 2 ? rng.uniform() : static_cast<double>(rng.below(6)) / 5.0;
    for (auto& v : yx.values) v = t % 2 ? rng.uniform() : static_cast<double>(rng.below(6)) / 5.0;
    const auto s = symmetrize(xy, yx);
    oracle::LinkSet want;
    for (std::size_t p = 0; p < r; ++p) {
      for (std::size_t q = 0; q < c; ++q) {
        const double avg = (xy.values[p * c + q] + yx.values[q * r + p]) / 2.0;
        if (s.at(p, q) != avg) o.check(false, "average differs at matrix " + std::to_string(t));
        if (avg > 0.4) want.emplace(p, q);
      }
    }
    const auto got = extract_alignment(s, 0.4);
    o.check(got == want, "threshold set differs at matrix " + std::to_string(t));
    AlignmentSet swapped;
    for (const auto& [q, p] : extract_alignment(symmetrize(yx, xy), 0.4)) swapped.emplace(p, q);
    o.check(swapped == got, "direction swap differs at matrix " + std::to_string(t));
  }
  TokenAlignmentMatrix a(1, 1, Direction::src_to_tgt), b(1, 1, Direction::tgt_to_src);
  a.values = {0.4};
  b.values = {0.4};
  o.check(extract_alignment(symmetrize(a, b), 0.4).empty(), "0.4 kept");
  if (o.pass) o.detail = "200 matrix pairs, exact";
  return o;
}

// --- end to end ----------------------------------------------------------

struct PipelineRun {
  fs::path work;
  double seconds = 0.0;
  double f1 = 0.0;
  std::size_t steps = 0;
};

PipelineRun run_synthetic(const fs::path& corpus, const fs::path& work, int threads) {
  synthetic::Config sc;
  RunConfig cfg = synthetic::pipeline_config(sc, corpus.string());
  cfg.paths.work_dir = work.string();
  cfg.threads = threads;
  cfg.validate();
  fs::remove_all(work);
  const auto t0 = Clock::now();
  stages::run_pipeline(cfg);
  PipelineRun r;
  r.work = work;
  r.seconds = seconds_since(t0);
  r.steps = cfg.train.total_steps;
  r.f1 = nlohmann::json::parse(io::read_file(stages::work_files(cfg).metrics))["f1"].get<double>();
  return r;
}

// The manifest records paths and wall time, which legitimately differ
// between runs; compare everything else.
nlohmann::json manifest_core(const fs::path& work) {
  auto doc = nlohmann::json::parse(io::read_file((work / "manifest.json").string()));
  nlohmann::json out = nlohmann::json::array();
  for (const auto& st : doc["stages"]) {
    nlohmann::json e;
    e["stage"] = st["stage"];
    e["status"] = st["status"];
    e["counts"] = st["counts"];
    for (const char* side : {"inputs", "outputs"}) {
      for (const auto& f : st[side]) e[side].push_back(f["sha256"]);
    }
    out.push_back(e);
  }
  return out;
}

std::vector<std::string> differing_artifacts(const fs::path& a, const fs::path& b) {
  std::vector<std::string> diff;
  std::set<std::string> names;
  for (const auto& dir : {a, b}) {
    for (const auto& e : fs::directory_iterator(dir)) names.insert(e.path().filename().string());
  }
  for (const auto& n : names) {
    if (n == "manifest.json") {
      if (manifest_core(a) != manifest_core(b)) diff.push_back(n);
      continue;
    }
    if (!fs::exists(a / n) || !fs::exists(b / n) ||
        io::sha256_file((a / n).string()) != io::sha256_file((b / n).string())) {
      diff.push_back(n);
    }
  }
  return diff;
}

struct EndToEnd {
  Outcome synthetic;
  Outcome determinism;
};

EndToEnd end_to_end(const fs::path& root) {
  EndToEnd out;
  const fs::path corpus = root / "corpus";
  synthetic::Config sc;
  synthetic::write_corpus(synthetic::generate(sc), sc, corpus.string());

  const auto first = run_synthetic(corpus, root / "run1", 1);
  const auto second = run_synthetic(corpus, root / "run2", 1);
  const auto wide = run_synthetic(corpus, root / "run8", 8);

  auto& s = out.synthetic;
  s.check(first.f1 >= 0.90, "F1 " + fmt("%.4f", first.f1));
  s.check(first.steps <= 20000, std::to_string(first.steps) + " steps");
  s.check(first.seconds < 15 * 60, "took " + fmt("%.0f s", first.seconds));
  const bool same_model = io::sha256_file((first.work / "model.wspc").string()) ==
                          io::sha256_file((second.work / "model.wspc").string());
  s.check(same_model, "checkpoints differ between identical runs");
  s.check(first.f1 == second.f1, "F1 differs between identical runs");
  if (s.pass) {
    s.detail = "F1 " + fmt("%.4f", first.f1) + " on " + std::to_string(sc.heldout_pairs) + " held-out pairs, " +
               std::to_string(first.steps) + " steps, " + fmt("%.0f s", first.seconds) + ", checkpoint reproduced";
  }

  auto& d = out.determinism;
  for (const auto& n : differing_artifacts(first.work, second.work)) d.check(false, "rerun differs: " + n);
  for (const auto& n : differing_artifacts(first.work, wide.work)) d.check(false, "threads 1 vs 8 differ: " + n);
  if (d.pass) d.detail = "every artifact identical across two runs and across 1 and 8 threads";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string scratch = (fs::temp_directory_path() / "wsp-acceptance").string();
  bool skip_e2e = false;
  bool keep = false;
  app.add_option("--scratch", scratch, "Directory for generated corpora and runs");
  app.add_flag("--skip-end-to-end", skip_e2e, "Skip the synthetic pipeline runs");
  app.add_flag("--keep", keep, "Keep the scratch directory");
  CLI11_PARSE(app, argc, argv);

  int failures = 0;
  auto report = [&](const char* name, const Outcome& o) {
    std::printf("%s %-28s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  };
  auto guarded = [&](const char* name, const std::function<Outcome()>& f) {
    try {
      report(name, f());
    } catch (const std::exception& e) {
      report(name, Outcome{false, std::string("exception: ") + e.what()});
    }
  };

  guarded("metric-oracle", metric_oracle);
  guarded("metric-worked-example", metric_worked_example);
  guarded("pairing-correctness", pairing_counts);
  guarded("mutual-argmax-oracle", mutual_argmax_oracle);
  guarded("filter-defaults", filter_defaults);
  guarded("span-numerics", span_numerics);
  guarded("subword-to-word-mapping", subword_mapping);
  guarded("symmetrization", symmetrization);

  if (!skip_e2e) {
    fs::remove_all(scratch);
    fs::create_directories(scratch);
    try {
      const auto r = end_to_end(scratch);
      report("synthetic-end-to-end", r.synthetic);
      report("determinism", r.determinism);
    } catch (const std::exception& e) {
      report("synthetic-end-to-end", Outcome{false, std::string("exception: ") + e.what()});
      report("determinism", Outcome{false, "not run"});
    }
    if (!keep) fs::remove_all(scratch);
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
