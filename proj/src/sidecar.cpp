#include "wsp/sidecar.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "wsp/error.hpp"
#include "wsp/io.hpp"
#include "wsp/json_util.hpp"

namespace wsp {

using nlohmann::json;
using nlohmann::ordered_json;

void EmbeddingTable::add(const std::string& id, std::vector<float> vec) {
  if (vec.empty()) throw ValidationError("vec", "empty vector for " + id);
  if (dim_ == 0) dim_ = vec.size();
  if (vec.size() != dim_) {
    throw ValidationError("vec", "dimension " + std::to_string(vec.size()) + " != " +
                                     std::to_string(dim_) + " for " + id);
  }
  for (float x : vec) {
    if (!std::isfinite(x)) throw ValidationError("vec", "non-finite value for " + id);
  }
  table_[id] = std::move(vec);
}

const std::vector<float>* EmbeddingTable::find(const std::string& id) const {
  auto it = table_.find(id);
  return it == table_.end() ? nullptr : &it->second;
}

void validate_token_spans(const std::vector<TokenSpan>& spans, const std::string& id) {
  for (std::size_t t = 0; t < spans.size(); ++t) {
    if (spans[t].start < 0 || spans[t].end < spans[t].start) {
      throw ValidationError("tokens", "bad span at token " + std::to_string(t) + " in " + id);
    }
    if (t > 0 && spans[t].start <= spans[t - 1].end) {
      throw ValidationError("tokens", "overlapping or unsorted spans at token " + std::to_string(t) +
                                          " in " + id);
    }
  }
}

namespace {

constexpr char kMagic[4] = {'W', 'S', 'P', 'E'};

class Writer {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_integral_v<T>);
    for (std::size_t b = 0; b < sizeof(T); ++b) buf_.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
  }
  void put_f32(float f) { put(std::bit_cast<std::uint32_t>(f)); }
  void bytes(std::string_view s) { buf_.append(s); }
  const std::string& data() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b) {
      v |= static_cast<T>(static_cast<T>(static_cast<unsigned char>(data_[pos_ + b])) << (8 * b));
    }
    pos_ += sizeof(T);
    return v;
  }
  float get_f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw IoError(path_, "truncated sidecar at byte " + std::to_string(pos_));
  }
  std::string data_;
  std::string path_;
  std::size_t pos_ = 0;
};

void put_header(Writer& w, const SidecarHeader& h) {
  w.bytes(std::string_view(kMagic, 4));
  w.put<std::uint32_t>(h.version);
  w.put<std::uint32_t>(h.dim);
  w.put<std::uint64_t>(h.count);
  w.put<std::uint8_t>(32);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(h.level));
  w.put<std::uint16_t>(0);
}

SidecarHeader get_header(Reader& r, const std::string& path) {
  if (r.bytes(4) != std::string_view(kMagic, 4)) throw IoError(path, "not a WSPE sidecar (bad magic)");
  SidecarHeader h;
  h.version = r.get<std::uint32_t>();
  if (h.version != kSidecarVersion) {
    throw IoError(path, "unsupported sidecar version " + std::to_string(h.version));
  }
  h.dim = r.get<std::uint32_t>();
  h.count = r.get<std::uint64_t>();
  if (r.get<std::uint8_t>() != 32) throw IoError(path, "only 32-bit floats are supported");
  const auto level = r.get<std::uint8_t>();
  if (level > 1) throw IoError(path, "unknown sidecar level " + std::to_string(level));
  h.level = static_cast<SidecarLevel>(level);
  r.get<std::uint16_t>();
  if (h.dim == 0) throw IoError(path, "sidecar dimension is zero");
  return h;
}

float checked(float f, const std::string& id) {
  if (!std::isfinite(f)) throw ValidationError("vectors", "non-finite value for " + id);
  return f;
}

}  // namespace

SidecarHeader read_sidecar_header(const std::string& path) {
  Reader r(io::read_file(path), path);
  return get_header(r, path);
}

void write_token_sidecar(const std::string& path, std::span<const TokenEmbeddings> records) {
  std::size_t dim = records.empty() ? 1 : records.front().dim;
  Writer w;
  put_header(w, {kSidecarVersion, static_cast<std::uint32_t>(dim), records.size(), SidecarLevel::token});
  for (const auto& rec : records) {
    if (rec.dim != dim || rec.vectors.size() != rec.tokens.size() * dim) {
      throw ValidationError("vectors", "inconsistent dimensions for " + rec.id);
    }
    w.put<std::uint16_t>(static_cast<std::uint16_t>(rec.id.size()));
    w.bytes(rec.id);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(rec.tokens.size()));
    for (const auto& t : rec.tokens) {
      w.put<std::uint32_t>(static_cast<std::uint32_t>(t.start));
      w.put<std::uint32_t>(static_cast<std::uint32_t>(t.end));
    }
    for (float f : rec.vectors) w.put_f32(f);
  }
  io::write_file(path, w.data());
}

std::vector<TokenEmbeddings> read_token_sidecar(const std::string& path) {
  Reader r(io::read_file(path), path);
  const SidecarHeader h = get_header(r, path);
  if (h.level != SidecarLevel::token) throw IoError(path, "expected a token-level sidecar");
  std::vector<TokenEmbeddings> out;
  out.reserve(h.count);
  for (std::uint64_t n = 0; n < h.count; ++n) {
    TokenEmbeddings rec;
    rec.id = r.bytes(r.get<std::uint16_t>());
    rec.dim = h.dim;
    const auto ntok = r.get<std::uint32_t>();
    rec.tokens.resize(ntok);
    for (auto& t : rec.tokens) {
      t.start = r.get<std::uint32_t>();
      t.end = r.get<std::uint32_t>();
    }
    validate_token_spans(rec.tokens, rec.id);
    rec.vectors.resize(static_cast<std::size_t>(ntok) * h.dim);
    for (auto& f : rec.vectors) f = checked(r.get_f32(), rec.id);
    out.push_back(std::move(rec));
  }
  if (!r.done()) throw IoError(path, "trailing bytes after last record");
  return out;
}

void write_paragraph_sidecar(const std::string& path, std::span<const NamedVector> records) {
  std::size_t dim = records.empty() ? 1 : records.front().vec.size();
  Writer w;
  put_header(w, {kSidecarVersion, static_cast<std::uint32_t>(dim), records.size(), SidecarLevel::paragraph});
  for (const auto& rec : records) {
    if (rec.vec.size() != dim) throw ValidationError("vec", "inconsistent dimension for " + rec.id);
    w.put<std::uint16_t>(static_cast<std::uint16_t>(rec.id.size()));
    w.bytes(rec.id);
    w.put<std::uint32_t>(1);
    for (float f : rec.vec) w.put_f32(f);
  }
  io::write_file(path, w.data());
}

EmbeddingTable read_paragraph_embeddings(const std::string& path) {
  std::string data = io::read_file(path);
  EmbeddingTable table;
  if (data.size() >= 4 && std::memcmp(data.data(), kMagic, 4) == 0) {
    Reader r(std::move(data), path);
    const SidecarHeader h = get_header(r, path);
    if (h.level != SidecarLevel::paragraph) throw IoError(path, "expected a paragraph-level sidecar");
    for (std::uint64_t n = 0; n < h.count; ++n) {
      const std::string id = r.bytes(r.get<std::uint16_t>());
      if (r.get<std::uint32_t>() != 1) throw IoError(path, "paragraph record with token count != 1: " + id);
      std::vector<float> vec(h.dim);
      for (auto& f : vec) f = r.get_f32();
      table.add(id, std::move(vec));
    }
    if (!r.done()) throw IoError(path, "trailing bytes after last record");
    return table;
  }
  io::LineReader lines(path);
  while (auto line = lines.next()) {
    if (line->empty()) continue;
    const json j = jsonu::parse_line(*line, path, lines.line());
    try {
      const auto& v = jsonu::require(j, "vec");
      if (!v.is_array()) throw ValidationError("vec", "expected an array");
      std::vector<float> vec;
      vec.reserve(v.size());
      for (const auto& x : v) {
        if (!x.is_number()) throw ValidationError("vec", "expected numbers");
        vec.push_back(x.get<float>());
      }
      table.add(jsonu::get_string(j, "id"), std::move(vec));
    } catch (const ValidationError& e) {
      throw LineError(path, lines.line(), e.what());
    }
  }
  return table;
}

void write_pos_tags(const std::string& path, std::span<const PosTags> records) {
  std::string buf;
  for (const auto& rec : records) {
    ordered_json j;
    j["id"] = rec.id;
    j["tokens"] = ordered_json::array();
    for (const auto& t : rec.tokens) j["tokens"].push_back({t.start, t.end});
    j["tags"] = rec.tags;
    buf += j.dump();
    buf += '\n';
  }
  io::write_file(path, buf);
}

std::vector<PosTags> read_pos_tags(const std::string& path) {
  std::vector<PosTags> out;
  io::LineReader lines(path);
  while (auto line = lines.next()) {
    if (line->empty()) continue;
    const json j = jsonu::parse_line(*line, path, lines.line());
    try {
      PosTags rec;
      rec.id = jsonu::get_string(j, "id");
      for (const auto& t : jsonu::require(j, "tokens")) {
        if (!t.is_array() || t.size() != 2 || !t[0].is_number_integer() || !t[1].is_number_integer()) {
          throw ValidationError("tokens", "expected [start, end] pairs");
        }
        rec.tokens.push_back({t[0].get<std::int64_t>(), t[1].get<std::int64_t>()});
      }
      for (const auto& t : jsonu::require(j, "tags")) {
        if (!t.is_string()) throw ValidationError("tags", "expected strings");
        rec.tags.push_back(t.get<std::string>());
      }
      if (rec.tags.size() != rec.tokens.size()) {
        throw ValidationError("tags", "tag count " + std::to_string(rec.tags.size()) + " != token count " +
                                          std::to_string(rec.tokens.size()) + " for " + rec.id);
      }
      validate_token_spans(rec.tokens, rec.id);
      out.push_back(std::move(rec));
    } catch (const ValidationError& e) {
      throw LineError(path, lines.line(), e.what());
    }
  }
  return out;
}

std::unordered_map<std::string, int> read_subword_counts(const std::string& path) {
  std::unordered_map<std::string, int> out;
  io::LineReader lines(path);
  while (auto line = lines.next()) {
    if (line->empty()) continue;
    const json j = jsonu::parse_line(*line, path, lines.line());
    try {
      const auto n = jsonu::get_int(j, "subwords");
      const auto id = jsonu::get_string(j, "id");
      if (n < 1) throw ValidationError("subwords", "count must be >= 1 for " + id);
      out[id] = static_cast<int>(n);
    } catch (const ValidationError& e) {
      throw LineError(path, lines.line(), e.what());
    }
  }
  return out;
}

void write_subword_counts(const std::string& path,
                          std::span<const std::pair<std::string, int>> counts) {
  std::string buf;
  for (const auto& [id, n] : counts) {
    ordered_json j;
    j["id"] = id;
    j["subwords"] = n;
    buf += j.dump();
    buf += '\n';
  }
  io::write_file(path, buf);
}

}  // namespace wsp
