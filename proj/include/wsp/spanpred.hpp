#pragma once

// Span-prediction aligner: a small Transformer encoder over character or
// word tokens reads "marked source <sep> target", and two linear heads score
// every target position as the start / end of the aligned span.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace wsp::spanpred {

/// How text is cut into model tokens. Character mode keeps every scalar,
/// spaces included; word mode keeps maximal non-space runs.
enum class Tokenization { character, word };

std::string to_string(Tokenization t);
Tokenization parse_tokenization(const std::string& s);

struct EncoderConfig {
  Tokenization tokenization = Tokenization::character;
  /// Sorted token inventory; id 0 is unknown, id 1 the separator, vocab[c] is id c + 2.
  std::vector<std::string> vocab;
  int dim = 64;
  int layers = 2;
  int heads = 2;
  int hidden = 128;
  int max_len = 256;
  std::uint64_t seed = 1;

  int vocab_size() const { return static_cast<int>(vocab.size()) + 2; }
  int token_id(std::string_view token) const;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j);
  /// Names of the fields that differ.
  std::vector<std::string> diff(const EncoderConfig& other) const;
  bool operator==(const EncoderConfig&) const = default;
};

/// Sorted set of tokens seen in the texts, plus the span marker. With
/// max_size > 0 only the most frequent tokens are kept (ties by token).
std::vector<std::string> build_vocab(std::span<const std::string> texts,
                                     Tokenization mode = Tokenization::character, std::size_t max_size = 0);

/// A token with its inclusive scalar offsets in the text.
struct Token {
  std::string text;
  std::size_t start = 0;
  std::size_t end = 0;
};

std::vector<Token> tokenize(std::string_view text, Tokenization mode);

template <typename T>
struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<T> data;
};

struct LayerSlots {
  std::size_t ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
};

/// Position of every named tensor in ModelParams::tensors.
struct ParamLayout {
  std::size_t tok_emb = 0, pos_emb = 0, seg_emb = 0;
  std::vector<LayerSlots> layers;
  std::size_t lnf_g = 0, lnf_b = 0, head_start = 0, head_end = 0;
};

/// Encoder (embeddings + blocks + final norm) and the two span heads.
template <typename T>
struct ModelParams {
  EncoderConfig config;
  ParamLayout layout;
  std::vector<Tensor<T>> tensors;

  T* data(std::size_t slot) { return tensors[slot].data.data(); }
  const T* data(std::size_t slot) const { return tensors[slot].data.data(); }
  std::size_t num_parameters() const;
  bool operator==(const ModelParams& o) const;
};

/// Zero-valued tensors with the layout implied by the config.
template <typename T>
ModelParams<T> zero_params(const EncoderConfig& config);

/// Seeded initialization (draws are made in double, then rounded to T).
template <typename T>
ModelParams<T> init_params(const EncoderConfig& config);

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& p);

/// Segment ids: source outside the marked span, target, and marked span.
inline constexpr int kSegSource = 0;
inline constexpr int kSegTarget = 1;
inline constexpr int kSegSpan = 2;
inline constexpr std::size_t kSegments = 3;

/// Model input: ids over [marked source, separator, target].
struct EncodedInput {
  std::vector<int> ids;
  std::vector<int> segments;
  std::size_t y_offset = 0;
  std::size_t y_len = 0;            // target tokens
  std::vector<std::size_t> y_start;  // scalar offsets of each target token
  std::vector<std::size_t> y_end;
  std::size_t y_chars = 0;          // scalar length of the target text

  /// Token indices whose first / last scalar are k / l, if both exist.
  std::optional<std::pair<std::size_t, std::size_t>> token_span(std::size_t k, std::size_t l) const;
};

/// Packs the question (already carrying the span markers) and the target.
/// Throws DataError when the packed length exceeds max_len.
EncodedInput encode_marked(const EncoderConfig& config, std::string_view marked_source,
                           std::string_view target);

/// Inserts the markers around source span [i, j] and packs.
EncodedInput encode_input(const EncoderConfig& config, std::string_view source, std::string_view target,
                          std::size_t i, std::size_t j);

/// Activations kept for the backward pass.
template <typename T>
struct ForwardCache {
  struct Layer {
    std::vector<T> xhat1, rstd1, a, q, k, v, probs, ctx;
    std::vector<T> xhat2, rstd2, b, f1, g;
  };
  std::size_t n = 0;
  std::vector<Layer> layers;
  std::vector<T> xhatf, rstdf, z;
  std::vector<T> start_logits, end_logits;  // over target positions
};

/// Runs the encoder and heads; fills cache (including the logits).
template <typename T>
void forward(const ModelParams<T>& params, const EncodedInput& input, ForwardCache<T>& cache);

/// Accumulates parameter gradients given d(loss)/d(logits).
template <typename T>
void backward(const ModelParams<T>& params, const EncodedInput& input, const ForwardCache<T>& cache,
              std::span<const T> d_start, std::span<const T> d_end, ModelParams<T>& grads);

/// Final hidden states for the target positions, y_len x dim.
template <typename T>
std::vector<T> encode(const ModelParams<T>& params, const EncodedInput& input);

/// Start / end probabilities over target character positions (0-based here).
struct SpanDistribution {
  std::vector<double> p_start;
  std::vector<double> p_end;

  std::size_t size() const { return p_start.size(); }
};

/// Position-wise softmax of the two head outputs, computed in double.
SpanDistribution softmax_distribution(std::span<const double> start_logits, std::span<const double> end_logits);

/// Maps token-level probabilities onto character positions: a token's start
/// probability sits on its first scalar and its end probability on its last.
SpanDistribution expand_to_chars(const SpanDistribution& token_dist, const EncodedInput& input);

template <typename T>
SpanDistribution span_distributions(const ModelParams<T>& params, std::string_view source,
                                    std::string_view target, std::size_t i, std::size_t j);

/// p_start(k) * p_end(l); requires k <= l < size. Throws DataError otherwise.
double span_score(const SpanDistribution& dist, std::size_t k, std::size_t l);

struct ScoredSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  double score = 0.0;
};

/// argmax of the span score over k <= l, ties to the smallest k then l.
/// Empty when the best score is below min_score.
std::optional<ScoredSpan> best_span(const SpanDistribution& dist, double min_score = 0.0);

struct LossOptions {
  /// Clamp probabilities at `floor` instead of failing on zero.
  bool clamp = false;
  double floor = 1e-12;
};

/// -(log p_start(k) + log p_end(l)), evaluated in log space.
double span_loss(const SpanDistribution& dist, std::size_t k, std::size_t l, const LossOptions& opts = {});

/// Loss from raw logits through log-softmax, and its gradient with respect
/// to the logits (p - onehot).
template <typename T>
double logit_loss(std::span<const T> start_logits, std::span<const T> end_logits, std::size_t k,
                  std::size_t l, std::span<T> d_start, std::span<T> d_end);

struct TrainingExample {
  EncodedInput input;
  std::size_t k = 0;  // gold start / end token, 0-based into the target
  std::size_t l = 0;
};

/// Forward + backward for one example; gradients are added into grads.
template <typename T>
double example_loss_and_grad(const ModelParams<T>& params, const TrainingExample& ex, ModelParams<T>& grads,
                             ForwardCache<T>& cache);

template <typename T>
double example_loss(const ModelParams<T>& params, const TrainingExample& ex);

/// Interface used by alignment inference, so that it can be driven by a
/// trained model or by a scripted stand-in.
class SpanPredictor {
 public:
  virtual ~SpanPredictor() = default;
  virtual SpanDistribution predict(std::string_view source, std::string_view target, std::size_t i,
                                   std::size_t j) const = 0;
};

class ModelPredictor final : public SpanPredictor {
 public:
  explicit ModelPredictor(ModelParams<float> params) : params_(std::move(params)) {}
  SpanDistribution predict(std::string_view source, std::string_view target, std::size_t i,
                           std::size_t j) const override;
  const ModelParams<float>& params() const { return params_; }

 private:
  ModelParams<float> params_;
};

}  // namespace wsp::spanpred
