#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "wsp/align.hpp"

namespace wsp {

/// Gold links of one sentence pair; sure is a subset of possible.
struct GoldAlignment {
  AlignmentSet sure;
  AlignmentSet possible;
};

/// Parses "p-q" (sure) and "p?q" (possible only) tokens. Errors name the
/// 1-based line and column.
GoldAlignment parse_gold_line(const std::string& line, const std::string& path = "<gold>", std::size_t line_no = 1);
std::vector<GoldAlignment> load_gold(const std::string& path);

/// Reads a Pharaoh file of predictions ("p-q" tokens only).
std::vector<AlignmentSet> load_pharaoh(const std::string& path);

struct AlignmentCounts {
  std::size_t a = 0;    // |A|
  std::size_t s = 0;    // |S|
  std::size_t p = 0;    // |P|
  std::size_t a_s = 0;  // |A ∩ S|
  std::size_t a_p = 0;  // |A ∩ P|

  AlignmentCounts& operator+=(const AlignmentCounts& o);
  bool operator==(const AlignmentCounts&) const = default;
};

AlignmentCounts count_alignment(const AlignmentSet& a, const GoldAlignment& gold);

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double aer = 0.0;
};

/// Ratios from counts, with the conventions for empty denominators:
/// |A| = 0 gives precision 1 if |S| = 0 else 0; |S| = 0 gives recall 1;
/// P + R = 0 gives F1 0; |A| + |S| = 0 gives AER 0.
Metrics metrics_from_counts(const AlignmentCounts& c);

struct MetricsReport {
  Metrics totals;
  AlignmentCounts counts;
  std::vector<AlignmentCounts> per_sentence;
};

/// Micro-averaged over the corpus. Throws DataError on a length mismatch.
MetricsReport compute_metrics(std::span<const AlignmentSet> predicted, std::span<const GoldAlignment> gold);

/// "P=1.000 R=1.000 F1=1.000 AER=0.000", optionally followed by a table with
/// one row per sentence pair.
std::string report_text(const MetricsReport& m, bool per_sentence = false);
nlohmann::ordered_json report_json(const MetricsReport& m);
MetricsReport report_from_json(const nlohmann::json& j);

}  // namespace wsp
