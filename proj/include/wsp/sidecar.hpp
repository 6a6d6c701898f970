#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

// Readers and writers for the auxiliary files produced by the embedding
// bridge: token/paragraph embeddings (binary "WSPE" or JSONL), POS tags and
// subword counts (JSONL).
namespace wsp {

struct TokenSpan {
  std::int64_t start = 0;  // inclusive scalar offsets
  std::int64_t end = 0;
  bool operator==(const TokenSpan&) const = default;
};

/// Contextual vectors for one paragraph, one per token.
struct TokenEmbeddings {
  std::string id;
  std::vector<TokenSpan> tokens;
  std::size_t dim = 0;
  std::vector<float> vectors;  // tokens.size() * dim, row-major

  std::span<const float> vec(std::size_t t) const { return {vectors.data() + t * dim, dim}; }
  bool operator==(const TokenEmbeddings&) const = default;
};

struct PosTags {
  std::string id;
  std::vector<TokenSpan> tokens;
  std::vector<std::string> tags;
  bool operator==(const PosTags&) const = default;
};

/// Paragraph id -> vector, all of one dimension.
class EmbeddingTable {
 public:
  void add(const std::string& id, std::vector<float> vec);
  const std::vector<float>* find(const std::string& id) const;
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return table_.size(); }

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<float>> table_;
};

enum class SidecarLevel : std::uint8_t { paragraph = 0, token = 1 };

/// Binary layout, little-endian:
///   "WSPE" | version u32 | dim u32 | count u64 | float bits u8 (32) |
///   level u8 | reserved u16
/// then `count` records:
///   id length u16 | id bytes | token count u32 |
///   token spans (u32 start, u32 end) x n   [token level only]
///   f32 vectors, n x dim
/// Paragraph-level records always carry token count 1 and no spans.
inline constexpr std::uint32_t kSidecarVersion = 1;

struct SidecarHeader {
  std::uint32_t version = kSidecarVersion;
  std::uint32_t dim = 0;
  std::uint64_t count = 0;
  SidecarLevel level = SidecarLevel::paragraph;
};

SidecarHeader read_sidecar_header(const std::string& path);

void write_token_sidecar(const std::string& path, std::span<const TokenEmbeddings> records);
std::vector<TokenEmbeddings> read_token_sidecar(const std::string& path);

struct NamedVector {
  std::string id;
  std::vector<float> vec;
};

void write_paragraph_sidecar(const std::string& path, std::span<const NamedVector> records);

/// Accepts the binary sidecar or JSONL {"id": str, "vec": [float, ...]}.
EmbeddingTable read_paragraph_embeddings(const std::string& path);

void write_pos_tags(const std::string& path, std::span<const PosTags> records);
std::vector<PosTags> read_pos_tags(const std::string& path);

/// JSONL {"id": str, "subwords": int}.
std::unordered_map<std::string, int> read_subword_counts(const std::string& path);
void write_subword_counts(const std::string& path,
                          std::span<const std::pair<std::string, int>> counts);

/// Sorted, non-overlapping, start <= end, start >= 0.
void validate_token_spans(const std::vector<TokenSpan>& spans, const std::string& id);

}  // namespace wsp
