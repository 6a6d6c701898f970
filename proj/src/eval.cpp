#include "wsp/eval.hpp"

#include <charconv>
#include <cstdio>

#include "wsp/error.hpp"
#include "wsp/io.hpp"
#include "wsp/json_util.hpp"
#include "wsp/parallel.hpp"

namespace wsp {

namespace {

bool parse_index(std::string_view s, std::size_t& out) {
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

// Calls on_token(token, 1-based column) for each space-separated token.
template <typename F>
void for_each_token(const std::string& line, F&& on_token) {
  std::size_t i = 0;
  while (i < line.size()) {
    if (line[i] == ' ' || line[i] == '\t') {
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    on_token(std::string_view(line).substr(start, i - start), start + 1);
  }
}

}  // namespace

GoldAlignment parse_gold_line(const std::string& line, const std::string& path, std::size_t line_no) {
  GoldAlignment g;
  for_each_token(line, [&](std::string_view tok, std::size_t col) {
    const auto sep = tok.find_first_of("-?");
    std::size_t p = 0;
    std::size_t q = 0;
    if (sep == std::string_view::npos || !parse_index(tok.substr(0, sep), p) ||
        !parse_index(tok.substr(sep + 1), q)) {
      throw LineError(path, line_no, "column " + std::to_string(col) + ": malformed token '" + std::string(tok) + "'");
    }
    if (tok[sep] == '-') g.sure.emplace(p, q);
    g.possible.emplace(p, q);
  });
  return g;
}

std::vector<GoldAlignment> load_gold(const std::string& path) {
  io::LineReader reader(path);
  std::vector<GoldAlignment> out;
  while (auto line = reader.next()) out.push_back(parse_gold_line(*line, path, reader.line()));
  return out;
}

std::vector<AlignmentSet> load_pharaoh(const std::string& path) {
  io::LineReader reader(path);
  std::vector<AlignmentSet> out;
  while (auto line = reader.next()) {
    if (line->find('?') != std::string::npos) {
      throw LineError(path, reader.line(), "possible-only links are not allowed in predictions");
    }
    out.push_back(parse_gold_line(*line, path, reader.line()).sure);
  }
  return out;
}

AlignmentCounts& AlignmentCounts::operator+=(const AlignmentCounts& o) {
  a += o.a;
  s += o.s;
  p += o.p;
  a_s += o.a_s;
  a_p += o.a_p;
  return *this;
}

AlignmentCounts count_alignment(const AlignmentSet& a, const GoldAlignment& gold) {
  AlignmentCounts c;
  c.a = a.size();
  c.s = gold.sure.size();
  c.p = gold.possible.size();
  for (const auto& link : a) {
    c.a_s += gold.sure.count(link);
    c.a_p += gold.possible.count(link);
  }
  return c;
}

Metrics metrics_from_counts(const AlignmentCounts& c) {
  Metrics m;
  if (c.a == 0) {
    m.precision = c.s == 0 ? 1.0 : 0.0;
  } else {
    m.precision = static_cast<double>(c.a_p) / static_cast<double>(c.a);
  }
  m.recall = c.s == 0 ? 1.0 : static_cast<double>(c.a_s) / static_cast<double>(c.s);
  const double pr = m.precision + m.recall;
  m.f1 = pr == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / pr;
  const std::size_t denom = c.a + c.s;
  // 1 - (|A&S| + |A&P|) / (|A| + |S|), as one integer ratio so exact fractions stay exact
  m.aer = denom == 0 ? 0.0 : static_cast<double>(denom - c.a_s - c.a_p) / static_cast<double>(denom);
  return m;
}

MetricsReport compute_metrics(std::span<const AlignmentSet> predicted, std::span<const GoldAlignment> gold) {
  if (predicted.size() != gold.size()) {
    throw DataError("prediction has " + std::to_string(predicted.size()) + " sentence pairs, gold has " +
                    std::to_string(gold.size()));
  }
  MetricsReport r;
  r.per_sentence.resize(predicted.size());
  parallel_for(predicted.size(), [&](std::size_t i) { r.per_sentence[i] = count_alignment(predicted[i], gold[i]); });
  for (const auto& c : r.per_sentence) r.counts += c;
  r.totals = metrics_from_counts(r.counts);
  return r;
}

namespace {

std::string fmt3(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", x);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

nlohmann::ordered_json counts_json(const AlignmentCounts& c) {
  nlohmann::ordered_json j;
  j["A"] = c.a;
  j["S"] = c.s;
  j["P"] = c.p;
  j["A_and_S"] = c.a_s;
  j["A_and_P"] = c.a_p;
  return j;
}

AlignmentCounts counts_from_json(const nlohmann::json& j) {
  AlignmentCounts c;
  c.a = static_cast<std::size_t>(jsonu::get_int(j, "A"));
  c.s = static_cast<std::size_t>(jsonu::get_int(j, "S"));
  c.p = static_cast<std::size_t>(jsonu::get_int(j, "P"));
  c.a_s = static_cast<std::size_t>(jsonu::get_int(j, "A_and_S"));
  c.a_p = static_cast<std::size_t>(jsonu::get_int(j, "A_and_P"));
  return c;
}

}  // namespace

std::string report_text(const MetricsReport& m, bool per_sentence) {
  std::string out = "P=" + fmt3(m.totals.precision) + " R=" + fmt3(m.totals.recall) + " F1=" + fmt3(m.totals.f1) +
                    " AER=" + fmt3(m.totals.aer) + "\n";
  if (!per_sentence) return out;
  const std::vector<std::string> head = {"pair", "|A|", "|S|", "|P|", "Precision", "Recall", "F1", "AER"};
  const std::vector<std::size_t> width = {6, 5, 5, 5, 10, 8, 7, 7};
  for (std::size_t c = 0; c < head.size(); ++c) out += pad(head[c], width[c]);
  out += '\n';
  for (std::size_t i = 0; i < m.per_sentence.size(); ++i) {
    const auto& c = m.per_sentence[i];
    const Metrics s = metrics_from_counts(c);
    const std::vector<std::string> row = {std::to_string(i), std::to_string(c.a), std::to_string(c.s),
                                          std::to_string(c.p), fmt3(s.precision), fmt3(s.recall),
                                          fmt3(s.f1), fmt3(s.aer)};
    for (std::size_t k = 0; k < row.size(); ++k) out += pad(row[k], width[k]);
    out += '\n';
  }
  return out;
}

nlohmann::ordered_json report_json(const MetricsReport& m) {
  nlohmann::ordered_json j;
  j["precision"] = m.totals.precision;
  j["recall"] = m.totals.recall;
  j["f1"] = m.totals.f1;
  j["aer"] = m.totals.aer;
  j["counts"] = counts_json(m.counts);
  auto rows = nlohmann::ordered_json::array();
  for (const auto& c : m.per_sentence) rows.push_back(counts_json(c));
  j["per_sentence"] = std::move(rows);
  return j;
}

MetricsReport report_from_json(const nlohmann::json& j) {
  MetricsReport m;
  m.totals.precision = jsonu::get_number(j, "precision");
  m.totals.recall = jsonu::get_number(j, "recall");
  m.totals.f1 = jsonu::get_number(j, "f1");
  m.totals.aer = jsonu::get_number(j, "aer");
  m.counts = counts_from_json(jsonu::require(j, "counts"));
  for (const auto& row : jsonu::require(j, "per_sentence")) m.per_sentence.push_back(counts_from_json(row));
  return m;
}

}  // namespace wsp
