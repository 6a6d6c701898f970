#include "wsp/spanpred.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <set>

#include "wsp/annotate.hpp"
#include "wsp/error.hpp"
#include "wsp/json_util.hpp"
#include "wsp/kernels.hpp"
#include "wsp/random.hpp"
#include "wsp/utf8.hpp"

namespace wsp::spanpred {

namespace kr = kernels::ref;

std::string to_string(Tokenization t) { return t == Tokenization::character ? "character" : "word"; }

Tokenization parse_tokenization(const std::string& s) {
  if (s == "character") return Tokenization::character;
  if (s == "word") return Tokenization::word;
  throw ConfigError("model.tokenization", "unknown mode '" + s + "' (expected character or word)");
}

int EncoderConfig::token_id(std::string_view token) const {
  auto it = std::lower_bound(vocab.begin(), vocab.end(), token);
  if (it == vocab.end() || *it != token) return 0;
  return static_cast<int>(it - vocab.begin()) + 2;
}

void EncoderConfig::validate() const {
  if (dim <= 0) throw ConfigError("model.dim", "must be positive");
  if (layers <= 0) throw ConfigError("model.layers", "must be positive");
  if (heads <= 0) throw ConfigError("model.heads", "must be positive");
  if (dim % heads != 0) throw ConfigError("model.heads", "must divide model.dim");
  if (hidden <= 0) throw ConfigError("model.hidden", "must be positive");
  if (max_len <= 2) throw ConfigError("model.max_len", "must be at least 3");
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    if (vocab[i].empty()) throw ConfigError("model.vocab", "empty entry");
    if (i > 0 && vocab[i - 1] >= vocab[i]) throw ConfigError("model.vocab", "must be sorted and unique");
  }
}

nlohmann::ordered_json EncoderConfig::to_json() const {
  nlohmann::ordered_json j;
  j["tokenization"] = to_string(tokenization);
  j["vocab"] = vocab;
  j["dim"] = dim;
  j["layers"] = layers;
  j["heads"] = heads;
  j["hidden"] = hidden;
  j["max_len"] = max_len;
  j["seed"] = seed;
  return j;
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.tokenization = parse_tokenization(jsonu::get_string(j, "tokenization"));
  const auto& v = jsonu::require(j, "vocab");
  if (!v.is_array()) throw ValidationError("vocab", "expected an array of strings");
  for (const auto& e : v) {
    if (!e.is_string()) throw ValidationError("vocab", "expected an array of strings");
    c.vocab.push_back(e.get<std::string>());
  }
  c.dim = static_cast<int>(jsonu::get_int(j, "dim"));
  c.layers = static_cast<int>(jsonu::get_int(j, "layers"));
  c.heads = static_cast<int>(jsonu::get_int(j, "heads"));
  c.hidden = static_cast<int>(jsonu::get_int(j, "hidden"));
  c.max_len = static_cast<int>(jsonu::get_int(j, "max_len"));
  c.seed = jsonu::require(j, "seed").get<std::uint64_t>();
  return c;
}

std::vector<std::string> EncoderConfig::diff(const EncoderConfig& o) const {
  std::vector<std::string> out;
  if (tokenization != o.tokenization) out.push_back("tokenization");
  if (vocab != o.vocab) out.push_back("vocab");
  if (dim != o.dim) out.push_back("dim");
  if (layers != o.layers) out.push_back("layers");
  if (heads != o.heads) out.push_back("heads");
  if (hidden != o.hidden) out.push_back("hidden");
  if (max_len != o.max_len) out.push_back("max_len");
  if (seed != o.seed) out.push_back("seed");
  return out;
}

std::vector<Token> tokenize(std::string_view text, Tokenization mode) {
  const std::u32string s = utf8::decode(text);
  std::vector<Token> out;
  if (mode == Tokenization::character) {
    for (std::size_t i = 0; i < s.size(); ++i) out.push_back(Token{utf8::encode(s[i]), i, i});
    return out;
  }
  std::size_t i = 0;
  while (i < s.size()) {
    if (utf8::is_space(s[i])) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < s.size() && !utf8::is_space(s[i])) ++i;
    out.push_back(Token{utf8::encode(std::u32string_view(s).substr(start, i - start)), start, i - 1});
  }
  return out;
}

std::vector<std::string> build_vocab(std::span<const std::string> texts, Tokenization mode, std::size_t max_size) {
  std::map<std::string, std::size_t> freq;
  for (const auto& t : texts) {
    for (auto& tok : tokenize(t, mode)) ++freq[std::move(tok.text)];
  }
  const std::string marker(kSpanMarker);
  freq.erase(marker);
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  if (max_size > 0 && ranked.size() + 1 > max_size) {
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    ranked.resize(max_size > 1 ? max_size - 1 : 0);
  }
  std::vector<std::string> vocab{marker};
  for (auto& [tok, n] : ranked) vocab.push_back(std::move(tok));
  std::sort(vocab.begin(), vocab.end());
  return vocab;
}

template <typename T>
std::size_t ModelParams<T>::num_parameters() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.data.size();
  return n;
}

template <typename T>
bool ModelParams<T>::operator==(const ModelParams& o) const {
  if (!(config == o.config) || tensors.size() != o.tensors.size()) return false;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].name != o.tensors[i].name || tensors[i].shape != o.tensors[i].shape) return false;
    // bitwise comparison, so that -0.0 != 0.0 and NaN payloads count
    if (!std::equal(tensors[i].data.begin(), tensors[i].data.end(), o.tensors[i].data.begin(),
                    [](T a, T b) { return std::memcmp(&a, &b, sizeof(T)) == 0; })) {
      return false;
    }
  }
  return true;
}

template <typename T>
ModelParams<T> zero_params(const EncoderConfig& config) {
  config.validate();
  ModelParams<T> p;
  p.config = config;
  const auto d = static_cast<std::size_t>(config.dim);
  const auto h = static_cast<std::size_t>(config.hidden);
  auto add = [&](std::string name, std::vector<std::size_t> shape) {
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    p.tensors.push_back(Tensor<T>{std::move(name), std::move(shape), std::vector<T>(n, T(0))});
    return p.tensors.size() - 1;
  };
  auto& L = p.layout;
  L.tok_emb = add("tok_emb", {static_cast<std::size_t>(config.vocab_size()), d});
  L.pos_emb = add("pos_emb", {static_cast<std::size_t>(config.max_len), d});
  L.seg_emb = add("seg_emb", {kSegments, d});
  for (int l = 0; l < config.layers; ++l) {
    const std::string pre = "block" + std::to_string(l) + ".";
    LayerSlots s{};
    s.ln1_g = add(pre + "ln1.g", {d});
    s.ln1_b = add(pre + "ln1.b", {d});
    s.wq = add(pre + "attn.wq", {d, d});
    s.bq = add(pre + "attn.bq", {d});
    s.wk = add(pre + "attn.wk", {d, d});
    s.bk = add(pre + "attn.bk", {d});
    s.wv = add(pre + "attn.wv", {d, d});
    s.bv = add(pre + "attn.bv", {d});
    s.wo = add(pre + "attn.wo", {d, d});
    s.bo = add(pre + "attn.bo", {d});
    s.ln2_g = add(pre + "ln2.g", {d});
    s.ln2_b = add(pre + "ln2.b", {d});
    s.w1 = add(pre + "ffn.w1", {d, h});
    s.b1 = add(pre + "ffn.b1", {h});
    s.w2 = add(pre + "ffn.w2", {h, d});
    s.b2 = add(pre + "ffn.b2", {d});
    L.layers.push_back(s);
  }
  L.lnf_g = add("lnf.g", {d});
  L.lnf_b = add("lnf.b", {d});
  L.head_start = add("head.start", {d});
  L.head_end = add("head.end", {d});
  return p;
}

template <typename T>
ModelParams<T> init_params(const EncoderConfig& config) {
  ModelParams<T> p = zero_params<T>(config);
  Rng rng(derive_seed(config.seed, "model/init"));
  auto fill_normal = [&](std::size_t slot, double stddev) {
    for (auto& x : p.tensors[slot].data) x = static_cast<T>(stddev * rng.normal());
  };
  auto fill_const = [&](std::size_t slot, T value) {
    std::fill(p.tensors[slot].data.begin(), p.tensors[slot].data.end(), value);
  };
  // fan-in scaling; a fixed small std (as used for wide models) leaves the
  // attention scores of a narrow model near zero for thousands of steps
  const double d = config.dim;
  const double w_std = 1.0 / std::sqrt(d);
  const double proj_std = w_std / std::sqrt(2.0 * config.layers);
  const auto& L = p.layout;
  fill_normal(L.tok_emb, 1.0);
  fill_normal(L.pos_emb, 1.0);
  fill_normal(L.seg_emb, 1.0);
  for (const auto& s : L.layers) {
    fill_const(s.ln1_g, T(1));
    fill_normal(s.wq, w_std);
    fill_normal(s.wk, w_std);
    fill_normal(s.wv, w_std);
    fill_normal(s.wo, proj_std);
    fill_const(s.ln2_g, T(1));
    fill_normal(s.w1, w_std);
    fill_normal(s.w2, proj_std * std::sqrt(d / config.hidden));
  }
  fill_const(L.lnf_g, T(1));
  fill_normal(L.head_start, w_std);
  fill_normal(L.head_end, w_std);
  return p;
}

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& p) {
  ModelParams<To> out;
  out.config = p.config;
  out.layout = p.layout;
  out.tensors.reserve(p.tensors.size());
  for (const auto& t : p.tensors) {
    Tensor<To> c{t.name, t.shape, std::vector<To>(t.data.size())};
    std::transform(t.data.begin(), t.data.end(), c.data.begin(), [](From x) { return static_cast<To>(x); });
    out.tensors.push_back(std::move(c));
  }
  return out;
}

EncodedInput encode_marked(const EncoderConfig& config, std::string_view marked_source,
                           std::string_view target) {
  const auto q = tokenize(marked_source, config.tokenization);
  const auto y = tokenize(target, config.tokenization);
  if (y.empty()) throw DataError("empty target text");
  const std::size_t n = q.size() + 1 + y.size();
  if (n > static_cast<std::size_t>(config.max_len)) {
    throw DataError("input length " + std::to_string(n) + " exceeds max_len " + std::to_string(config.max_len));
  }
  EncodedInput in;
  in.ids.reserve(n);
  in.segments.reserve(n);
  // tokens strictly between the first two markers form the marked span
  std::size_t markers = 0;
  for (const auto& t : q) {
    const bool is_marker = t.text == kSpanMarker;
    if (is_marker) ++markers;
    in.ids.push_back(config.token_id(t.text));
    in.segments.push_back(markers == 1 && !is_marker ? kSegSpan : kSegSource);
  }
  in.ids.push_back(1);
  in.segments.push_back(kSegSource);
  in.y_offset = in.ids.size();
  for (const auto& t : y) {
    in.ids.push_back(config.token_id(t.text));
    in.segments.push_back(kSegTarget);
    in.y_start.push_back(t.start);
    in.y_end.push_back(t.end);
  }
  in.y_len = y.size();
  in.y_chars = utf8::length(target);
  return in;
}

std::optional<std::pair<std::size_t, std::size_t>> EncodedInput::token_span(std::size_t k, std::size_t l) const {
  auto s = std::lower_bound(y_start.begin(), y_start.end(), k);
  auto e = std::lower_bound(y_end.begin(), y_end.end(), l);
  if (s == y_start.end() || *s != k || e == y_end.end() || *e != l) return std::nullopt;
  const auto ks = static_cast<std::size_t>(s - y_start.begin());
  const auto ls = static_cast<std::size_t>(e - y_end.begin());
  if (ks > ls) return std::nullopt;
  return std::make_pair(ks, ls);
}

EncodedInput encode_input(const EncoderConfig& config, std::string_view source, std::string_view target,
                          std::size_t i, std::size_t j) {
  return encode_marked(config, insert_markers(source, i, j), target);
}

namespace {

constexpr double kLnEps = 1e-5;

template <typename T>
void layer_norm_forward(const T* x, const T* g, const T* b, T* y, T* xhat, T* rstd, std::size_t n,
                        std::size_t d) {
  for (std::size_t t = 0; t < n; ++t) {
    const T* xt = x + t * d;
    T mean = 0;
    for (std::size_t c = 0; c < d; ++c) mean += xt[c];
    mean /= static_cast<T>(d);
    T var = 0;
    for (std::size_t c = 0; c < d; ++c) var += (xt[c] - mean) * (xt[c] - mean);
    var /= static_cast<T>(d);
    const T r = T(1) / std::sqrt(var + static_cast<T>(kLnEps));
    rstd[t] = r;
    T* ht = xhat + t * d;
    T* yt = y + t * d;
    for (std::size_t c = 0; c < d; ++c) {
      ht[c] = (xt[c] - mean) * r;
      yt[c] = ht[c] * g[c] + b[c];
    }
  }
}

template <typename T>
void layer_norm_backward(const T* dy, const T* xhat, const T* rstd, const T* g, T* dx, T* dg, T* db,
                         std::size_t n, std::size_t d) {
  for (std::size_t t = 0; t < n; ++t) {
    const T* dyt = dy + t * d;
    const T* ht = xhat + t * d;
    T m1 = 0;
    T m2 = 0;
    for (std::size_t c = 0; c < d; ++c) {
      const T dh = dyt[c] * g[c];
      m1 += dh;
      m2 += dh * ht[c];
      dg[c] += dyt[c] * ht[c];
      db[c] += dyt[c];
    }
    m1 /= static_cast<T>(d);
    m2 /= static_cast<T>(d);
    T* dxt = dx + t * d;
    for (std::size_t c = 0; c < d; ++c) dxt[c] += rstd[t] * (dyt[c] * g[c] - m1 - ht[c] * m2);
  }
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

template <typename T>
T gelu(T x) {
  const T u = static_cast<T>(kGeluC) * (x + static_cast<T>(kGeluA) * x * x * x);
  return T(0.5) * x * (T(1) + std::tanh(u));
}

template <typename T>
T gelu_grad(T x) {
  const T u = static_cast<T>(kGeluC) * (x + static_cast<T>(kGeluA) * x * x * x);
  const T th = std::tanh(u);
  const T du = static_cast<T>(kGeluC) * (T(1) + T(3) * static_cast<T>(kGeluA) * x * x);
  return T(0.5) * (T(1) + th) + T(0.5) * x * (T(1) - th * th) * du;
}

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
void attention_forward(const T* q, const T* k, const T* v, T* probs, T* ctx, std::size_t n, std::size_t d,
                       std::size_t heads) {
  const std::size_t dh = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  std::fill(ctx, ctx + n * d, T(0));
  for (std::size_t hh = 0; hh < heads; ++hh) {
    const std::size_t off = hh * dh;
    for (std::size_t t = 0; t < n; ++t) {
      T* row = probs + (hh * n + t) * n;
      const T* qt = q + t * d + off;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t u = 0; u < n; ++u) {
        row[u] = dot(qt, k + u * d + off, dh) * scale;
        mx = std::max(mx, row[u]);
      }
      T sum = 0;
      for (std::size_t u = 0; u < n; ++u) {
        row[u] = std::exp(row[u] - mx);
        sum += row[u];
      }
      const T inv = T(1) / sum;
      T* ct = ctx + t * d + off;
      for (std::size_t u = 0; u < n; ++u) {
        row[u] *= inv;
        const T p = row[u];
        const T* vu = v + u * d + off;
        for (std::size_t c = 0; c < dh; ++c) ct[c] += p * vu[c];
      }
    }
  }
}

template <typename T>
void attention_backward(const T* q, const T* k, const T* v, const T* probs, const T* dctx, T* dq, T* dk,
                        T* dv, std::size_t n, std::size_t d, std::size_t heads) {
  const std::size_t dh = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  std::vector<T> dp(n);
  for (std::size_t hh = 0; hh < heads; ++hh) {
    const std::size_t off = hh * dh;
    for (std::size_t t = 0; t < n; ++t) {
      const T* row = probs + (hh * n + t) * n;
      const T* dct = dctx + t * d + off;
      T rowdot = 0;
      for (std::size_t u = 0; u < n; ++u) {
        dp[u] = dot(dct, v + u * d + off, dh);
        rowdot += row[u] * dp[u];
        T* dvu = dv + u * d + off;
        const T p = row[u];
        for (std::size_t c = 0; c < dh; ++c) dvu[c] += p * dct[c];
      }
      const T* qt = q + t * d + off;
      T* dqt = dq + t * d + off;
      for (std::size_t u = 0; u < n; ++u) {
        const T ds = row[u] * (dp[u] - rowdot) * scale;
        const T* ku = k + u * d + off;
        T* dku = dk + u * d + off;
        for (std::size_t c = 0; c < dh; ++c) {
          dqt[c] += ds * ku[c];
          dku[c] += ds * qt[c];
        }
      }
    }
  }
}

}  // namespace

template <typename T>
void forward(const ModelParams<T>& params, const EncodedInput& input, ForwardCache<T>& cache) {
  const auto& cfg = params.config;
  const auto& L = params.layout;
  const std::size_t n = input.ids.size();
  const auto d = static_cast<std::size_t>(cfg.dim);
  const auto h = static_cast<std::size_t>(cfg.hidden);
  const auto heads = static_cast<std::size_t>(cfg.heads);
  if (n > static_cast<std::size_t>(cfg.max_len)) {
    throw DataError("input length " + std::to_string(n) + " exceeds max_len " + std::to_string(cfg.max_len));
  }
  if (input.y_len == 0 || input.y_offset + input.y_len != n) throw DataError("malformed encoded input");

  cache.n = n;
  cache.layers.resize(params.layout.layers.size());
  std::vector<T> x(n * d);
  {
    const T* tok = params.data(L.tok_emb);
    const T* pos = params.data(L.pos_emb);
    const T* seg = params.data(L.seg_emb);
    for (std::size_t t = 0; t < n; ++t) {
      const auto id = static_cast<std::size_t>(input.ids[t]);
      const auto sg = static_cast<std::size_t>(input.segments[t]);
      for (std::size_t c = 0; c < d; ++c) x[t * d + c] = tok[id * d + c] + pos[t * d + c] + seg[sg * d + c];
    }
  }
  std::vector<T> tmp(n * d);
  for (std::size_t li = 0; li < L.layers.size(); ++li) {
    const LayerSlots& s = L.layers[li];
    auto& c = cache.layers[li];
    c.xhat1.resize(n * d);
    c.rstd1.resize(n);
    c.a.resize(n * d);
    c.q.resize(n * d);
    c.k.resize(n * d);
    c.v.resize(n * d);
    c.probs.resize(heads * n * n);
    c.ctx.resize(n * d);
    c.xhat2.resize(n * d);
    c.rstd2.resize(n);
    c.b.resize(n * d);
    c.f1.resize(n * h);
    c.g.resize(n * h);

    layer_norm_forward(x.data(), params.data(s.ln1_g), params.data(s.ln1_b), c.a.data(), c.xhat1.data(),
                       c.rstd1.data(), n, d);
    kr::linear_forward(c.a.data(), params.data(s.wq), params.data(s.bq), c.q.data(), n, d, d);
    kr::linear_forward(c.a.data(), params.data(s.wk), params.data(s.bk), c.k.data(), n, d, d);
    kr::linear_forward(c.a.data(), params.data(s.wv), params.data(s.bv), c.v.data(), n, d, d);
    attention_forward(c.q.data(), c.k.data(), c.v.data(), c.probs.data(), c.ctx.data(), n, d, heads);
    kr::linear_forward(c.ctx.data(), params.data(s.wo), params.data(s.bo), tmp.data(), n, d, d);
    for (std::size_t i = 0; i < n * d; ++i) x[i] += tmp[i];

    layer_norm_forward(x.data(), params.data(s.ln2_g), params.data(s.ln2_b), c.b.data(), c.xhat2.data(),
                       c.rstd2.data(), n, d);
    kr::linear_forward(c.b.data(), params.data(s.w1), params.data(s.b1), c.f1.data(), n, d, h);
    for (std::size_t i = 0; i < n * h; ++i) c.g[i] = gelu(c.f1[i]);
    kr::linear_forward(c.g.data(), params.data(s.w2), params.data(s.b2), tmp.data(), n, h, d);
    for (std::size_t i = 0; i < n * d; ++i) x[i] += tmp[i];
  }
  cache.xhatf.resize(n * d);
  cache.rstdf.resize(n);
  cache.z.resize(n * d);
  layer_norm_forward(x.data(), params.data(L.lnf_g), params.data(L.lnf_b), cache.z.data(), cache.xhatf.data(),
                     cache.rstdf.data(), n, d);

  cache.start_logits.resize(input.y_len);
  cache.end_logits.resize(input.y_len);
  for (std::size_t t = 0; t < input.y_len; ++t) {
    const T* zt = cache.z.data() + (input.y_offset + t) * d;
    cache.start_logits[t] = dot(zt, params.data(L.head_start), d);
    cache.end_logits[t] = dot(zt, params.data(L.head_end), d);
  }
}

template <typename T>
void backward(const ModelParams<T>& params, const EncodedInput& input, const ForwardCache<T>& cache,
              std::span<const T> d_start, std::span<const T> d_end, ModelParams<T>& grads) {
  const auto& cfg = params.config;
  const auto& L = params.layout;
  const std::size_t n = cache.n;
  const auto d = static_cast<std::size_t>(cfg.dim);
  const auto h = static_cast<std::size_t>(cfg.hidden);
  const auto heads = static_cast<std::size_t>(cfg.heads);

  std::vector<T> dz(n * d, T(0));
  {
    const T* ws = params.data(L.head_start);
    const T* we = params.data(L.head_end);
    T* gws = grads.data(L.head_start);
    T* gwe = grads.data(L.head_end);
    for (std::size_t t = 0; t < input.y_len; ++t) {
      const std::size_t row = input.y_offset + t;
      const T* zt = cache.z.data() + row * d;
      T* dzt = dz.data() + row * d;
      for (std::size_t c = 0; c < d; ++c) {
        dzt[c] = d_start[t] * ws[c] + d_end[t] * we[c];
        gws[c] += d_start[t] * zt[c];
        gwe[c] += d_end[t] * zt[c];
      }
    }
  }
  std::vector<T> dx(n * d, T(0));
  layer_norm_backward(dz.data(), cache.xhatf.data(), cache.rstdf.data(), params.data(L.lnf_g), dx.data(),
                      grads.data(L.lnf_g), grads.data(L.lnf_b), n, d);

  std::vector<T> dg(n * h), dnorm(n * d), dctx(n * d), dq(n * d), dk(n * d), dv(n * d);
  for (std::size_t li = L.layers.size(); li-- > 0;) {
    const LayerSlots& s = L.layers[li];
    const auto& c = cache.layers[li];

    // feed-forward sublayer: x2 = x1 + W2 gelu(W1 LN2(x1))
    kr::linear_backward_weight(c.g.data(), dx.data(), grads.data(s.w2), grads.data(s.b2), n, h, d);
    std::fill(dg.begin(), dg.end(), T(0));
    kr::linear_backward_input(dx.data(), params.data(s.w2), dg.data(), n, h, d);
    for (std::size_t i = 0; i < n * h; ++i) dg[i] *= gelu_grad(c.f1[i]);
    kr::linear_backward_weight(c.b.data(), dg.data(), grads.data(s.w1), grads.data(s.b1), n, d, h);
    std::fill(dnorm.begin(), dnorm.end(), T(0));
    kr::linear_backward_input(dg.data(), params.data(s.w1), dnorm.data(), n, d, h);
    layer_norm_backward(dnorm.data(), c.xhat2.data(), c.rstd2.data(), params.data(s.ln2_g), dx.data(),
                        grads.data(s.ln2_g), grads.data(s.ln2_b), n, d);

    // attention sublayer: x1 = x + Wo attn(LN1(x))
    kr::linear_backward_weight(c.ctx.data(), dx.data(), grads.data(s.wo), grads.data(s.bo), n, d, d);
    std::fill(dctx.begin(), dctx.end(), T(0));
    kr::linear_backward_input(dx.data(), params.data(s.wo), dctx.data(), n, d, d);
    std::fill(dq.begin(), dq.end(), T(0));
    std::fill(dk.begin(), dk.end(), T(0));
    std::fill(dv.begin(), dv.end(), T(0));
    attention_backward(c.q.data(), c.k.data(), c.v.data(), c.probs.data(), dctx.data(), dq.data(), dk.data(),
                       dv.data(), n, d, heads);
    kr::linear_backward_weight(c.a.data(), dq.data(), grads.data(s.wq), grads.data(s.bq), n, d, d);
    kr::linear_backward_weight(c.a.data(), dk.data(), grads.data(s.wk), grads.data(s.bk), n, d, d);
    kr::linear_backward_weight(c.a.data(), dv.data(), grads.data(s.wv), grads.data(s.bv), n, d, d);
    std::fill(dnorm.begin(), dnorm.end(), T(0));
    kr::linear_backward_input(dq.data(), params.data(s.wq), dnorm.data(), n, d, d);
    kr::linear_backward_input(dk.data(), params.data(s.wk), dnorm.data(), n, d, d);
    kr::linear_backward_input(dv.data(), params.data(s.wv), dnorm.data(), n, d, d);
    layer_norm_backward(dnorm.data(), c.xhat1.data(), c.rstd1.data(), params.data(s.ln1_g), dx.data(),
                        grads.data(s.ln1_g), grads.data(s.ln1_b), n, d);
  }

  T* gtok = grads.data(L.tok_emb);
  T* gpos = grads.data(L.pos_emb);
  T* gseg = grads.data(L.seg_emb);
  for (std::size_t t = 0; t < n; ++t) {
    const auto id = static_cast<std::size_t>(input.ids[t]);
    const auto sg = static_cast<std::size_t>(input.segments[t]);
    for (std::size_t c = 0; c < d; ++c) {
      const T g = dx[t * d + c];
      gtok[id * d + c] += g;
      gpos[t * d + c] += g;
      gseg[sg * d + c] += g;
    }
  }
}

template <typename T>
std::vector<T> encode(const ModelParams<T>& params, const EncodedInput& input) {
  ForwardCache<T> cache;
  forward(params, input, cache);
  const auto d = static_cast<std::size_t>(params.config.dim);
  return std::vector<T>(cache.z.begin() + static_cast<std::ptrdiff_t>(input.y_offset * d), cache.z.end());
}

SpanDistribution softmax_distribution(std::span<const double> start_logits, std::span<const double> end_logits) {
  auto softmax = [](std::span<const double> z) {
    std::vector<double> p(z.size());
    if (z.empty()) return p;
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      p[i] = std::exp(z[i] - mx);
      sum += p[i];
    }
    for (auto& x : p) x /= sum;
    return p;
  };
  return SpanDistribution{softmax(start_logits), softmax(end_logits)};
}

SpanDistribution expand_to_chars(const SpanDistribution& token_dist, const EncodedInput& input) {
  SpanDistribution out{std::vector<double>(input.y_chars, 0.0), std::vector<double>(input.y_chars, 0.0)};
  for (std::size_t t = 0; t < token_dist.size(); ++t) {
    out.p_start[input.y_start[t]] += token_dist.p_start[t];
    out.p_end[input.y_end[t]] += token_dist.p_end[t];
  }
  return out;
}

template <typename T>
SpanDistribution span_distributions(const ModelParams<T>& params, std::string_view source,
                                    std::string_view target, std::size_t i, std::size_t j) {
  const EncodedInput input = encode_input(params.config, source, target, i, j);
  ForwardCache<T> cache;
  forward(params, input, cache);
  std::vector<double> s(cache.start_logits.begin(), cache.start_logits.end());
  std::vector<double> e(cache.end_logits.begin(), cache.end_logits.end());
  return expand_to_chars(softmax_distribution(s, e), input);
}

double span_score(const SpanDistribution& dist, std::size_t k, std::size_t l) {
  if (k > l || l >= dist.size()) {
    throw DataError("span (" + std::to_string(k) + ", " + std::to_string(l) + ") outside target of length " +
                    std::to_string(dist.size()));
  }
  return dist.p_start[k] * dist.p_end[l];
}

std::optional<ScoredSpan> best_span(const SpanDistribution& dist, double min_score) {
  const std::size_t n = dist.size();
  if (n == 0) return std::nullopt;
  ScoredSpan best{0, 0, -1.0};
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t l = k; l < n; ++l) {
      const double w = dist.p_start[k] * dist.p_end[l];
      if (w > best.score) best = {k, l, w};
    }
  }
  if (best.score < min_score) return std::nullopt;
  return best;
}

double span_loss(const SpanDistribution& dist, std::size_t k, std::size_t l, const LossOptions& opts) {
  if (k > l || l >= dist.size()) {
    throw DataError("gold span (" + std::to_string(k) + ", " + std::to_string(l) + ") outside target");
  }
  double ps = dist.p_start[k];
  double pe = dist.p_end[l];
  if (ps <= 0.0 || pe <= 0.0) {
    if (!opts.clamp) throw DataError("zero probability at the gold position");
    ps = std::max(ps, opts.floor);
    pe = std::max(pe, opts.floor);
  }
  return -(std::log(ps) + std::log(pe));
}

template <typename T>
double logit_loss(std::span<const T> start_logits, std::span<const T> end_logits, std::size_t k, std::size_t l,
                  std::span<T> d_start, std::span<T> d_end) {
  auto one_side = [](std::span<const T> z, std::size_t gold, std::span<T> dz) {
    double mx = -std::numeric_limits<double>::infinity();
    for (T v : z) mx = std::max(mx, static_cast<double>(v));
    double sum = 0.0;
    for (T v : z) sum += std::exp(static_cast<double>(v) - mx);
    const double lse = mx + std::log(sum);
    for (std::size_t t = 0; t < z.size(); ++t) {
      const double p = std::exp(static_cast<double>(z[t]) - lse);
      dz[t] = static_cast<T>(p - (t == gold ? 1.0 : 0.0));
    }
    return lse - static_cast<double>(z[gold]);
  };
  if (k > l || l >= start_logits.size()) throw DataError("gold span outside target");
  return one_side(start_logits, k, d_start) + one_side(end_logits, l, d_end);
}

template <typename T>
double example_loss_and_grad(const ModelParams<T>& params, const TrainingExample& ex, ModelParams<T>& grads,
                             ForwardCache<T>& cache) {
  forward(params, ex.input, cache);
  std::vector<T> ds(ex.input.y_len), de(ex.input.y_len);
  const double loss = logit_loss<T>(cache.start_logits, cache.end_logits, ex.k, ex.l, ds, de);
  backward<T>(params, ex.input, cache, ds, de, grads);
  return loss;
}

template <typename T>
double example_loss(const ModelParams<T>& params, const TrainingExample& ex) {
  ForwardCache<T> cache;
  forward(params, ex.input, cache);
  std::vector<T> ds(ex.input.y_len), de(ex.input.y_len);
  return logit_loss<T>(cache.start_logits, cache.end_logits, ex.k, ex.l, ds, de);
}

SpanDistribution ModelPredictor::predict(std::string_view source, std::string_view target, std::size_t i,
                                         std::size_t j) const {
  return span_distributions(params_, source, target, i, j);
}

#define WSP_INSTANTIATE(T)                                                                                    \
  template struct ModelParams<T>;                                                                             \
  template ModelParams<T> zero_params<T>(const EncoderConfig&);                                               \
  template ModelParams<T> init_params<T>(const EncoderConfig&);                                               \
  template void forward<T>(const ModelParams<T>&, const EncodedInput&, ForwardCache<T>&);                     \
  template void backward<T>(const ModelParams<T>&, const EncodedInput&, const ForwardCache<T>&,               \
                            std::span<const T>, std::span<const T>, ModelParams<T>&);                         \
  template std::vector<T> encode<T>(const ModelParams<T>&, const EncodedInput&);                              \
  template SpanDistribution span_distributions<T>(const ModelParams<T>&, std::string_view, std::string_view,  \
                                                  std::size_t, std::size_t);                                  \
  template double logit_loss<T>(std::span<const T>, std::span<const T>, std::size_t, std::size_t,             \
                                std::span<T>, std::span<T>);                                                  \
  template double example_loss_and_grad<T>(const ModelParams<T>&, const TrainingExample&, ModelParams<T>&,    \
                                           ForwardCache<T>&);                                                 \
  template double example_loss<T>(const ModelParams<T>&, const TrainingExample&);

WSP_INSTANTIATE(float)
WSP_INSTANTIATE(double)
#undef WSP_INSTANTIATE

template ModelParams<double> cast_params<double, float>(const ModelParams<float>&);
template ModelParams<float> cast_params<float, double>(const ModelParams<double>&);
template ModelParams<float> cast_params<float, float>(const ModelParams<float>&);
template ModelParams<double> cast_params<double, double>(const ModelParams<double>&);

}  // namespace wsp::spanpred
