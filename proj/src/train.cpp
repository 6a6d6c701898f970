#include "wsp/train.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>

#include "wsp/io.hpp"
#include "wsp/json_util.hpp"
#include "wsp/parallel.hpp"
#include "wsp/random.hpp"
#include "wsp/utf8.hpp"

namespace wsp::spanpred {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

std::string to_string(Optimizer o) { return o == Optimizer::sgd ? "sgd" : "adam"; }

Optimizer parse_optimizer(const std::string& s) {
  if (s == "sgd") return Optimizer::sgd;
  if (s == "adam") return Optimizer::adam;
  throw ConfigError("train.optimizer", "unknown optimizer '" + s + "' (expected sgd or adam)");
}

void TrainConfig::validate() const {
  // lr = 0 is accepted: it gives a dry run that leaves the parameters untouched.
  if (!std::isfinite(lr) || lr < 0.0) throw ConfigError("train.lr", "must be finite and non-negative");
  if (total_steps == 0) throw ConfigError("train.total_steps", "must be positive");
  if (warmup_steps > total_steps) throw ConfigError("train.warmup_steps", "must not exceed total_steps");
  if (batch_size == 0) throw ConfigError("train.batch_size", "must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("train.beta1", "must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("train.beta2", "must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("train.adam_eps", "must be positive");
  if (!std::isfinite(clip_norm) || clip_norm < 0.0) throw ConfigError("train.clip_norm", "must be >= 0");
}

nlohmann::ordered_json TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["lr"] = lr;
  j["warmup_steps"] = warmup_steps;
  j["total_steps"] = total_steps;
  j["batch_size"] = batch_size;
  j["seed"] = seed;
  j["optimizer"] = to_string(optimizer);
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["adam_eps"] = adam_eps;
  j["clip_norm"] = clip_norm;
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.lr = jsonu::get_number(j, "lr");
  c.warmup_steps = static_cast<std::size_t>(jsonu::get_int(j, "warmup_steps"));
  c.total_steps = static_cast<std::size_t>(jsonu::get_int(j, "total_steps"));
  c.batch_size = static_cast<std::size_t>(jsonu::get_int(j, "batch_size"));
  c.seed = jsonu::require(j, "seed").get<std::uint64_t>();
  c.optimizer = parse_optimizer(jsonu::get_string(j, "optimizer"));
  c.beta1 = jsonu::get_number(j, "beta1");
  c.beta2 = jsonu::get_number(j, "beta2");
  c.adam_eps = jsonu::get_number(j, "adam_eps");
  c.clip_norm = jsonu::get_number(j, "clip_norm");
  return c;
}

TrainConfig TrainConfig::full_scale_preset() {
  TrainConfig c;
  c.lr = 1e-6;
  c.warmup_steps = 2000;
  c.total_steps = 100000;
  c.batch_size = 96;
  c.optimizer = Optimizer::adam;
  return c;
}

EncoderConfig full_scale_encoder_preset(std::vector<std::string> vocab) {
  EncoderConfig c;
  c.vocab = std::move(vocab);
  c.dim = 768;
  c.layers = 12;
  c.heads = 12;
  c.hidden = 3072;
  c.max_len = 384;
  return c;
}

double learning_rate(const TrainConfig& cfg, std::size_t step) {
  if (cfg.warmup_steps > 0 && step < cfg.warmup_steps) {
    return cfg.lr * static_cast<double>(step + 1) / static_cast<double>(cfg.warmup_steps);
  }
  return cfg.lr;
}

nlohmann::ordered_json DatasetStats::to_json() const {
  nlohmann::ordered_json j;
  j["records"] = records;
  j["kept"] = kept;
  j["skipped_overlength"] = skipped_overlength;
  j["skipped_misaligned"] = skipped_misaligned;
  return j;
}

namespace {

// Packs one record; nullopt (and a counter bump) when it has to be skipped.
std::optional<TrainingExample> build_example(const EncoderConfig& config, const std::string& question,
                                             const std::string& context, std::size_t k, std::size_t l,
                                             DatasetStats& stats) {
  ++stats.records;
  const std::size_t n =
      tokenize(question, config.tokenization).size() + 1 + tokenize(context, config.tokenization).size();
  if (n > static_cast<std::size_t>(config.max_len)) {
    ++stats.skipped_overlength;
    return std::nullopt;
  }
  TrainingExample t;
  t.input = encode_marked(config, question, context);
  if (k > l || l >= t.input.y_chars) throw DataError("answer span outside context");
  const auto span = t.input.token_span(k, l);
  if (!span) {
    ++stats.skipped_misaligned;
    return std::nullopt;
  }
  t.k = span->first;
  t.l = span->second;
  ++stats.kept;
  return t;
}

}  // namespace

std::vector<TrainingExample> make_training_examples(const EncoderConfig& config,
                                                    std::span<const AlignmentExample> dataset,
                                                    DatasetStats* stats) {
  DatasetStats st;
  std::vector<TrainingExample> out;
  for (const auto& ex : dataset) {
    const std::string question = insert_markers(ex.src_text, static_cast<std::size_t>(ex.src_span.start),
                                                static_cast<std::size_t>(ex.src_span.end));
    try {
      if (auto t = build_example(config, question, ex.tgt_text, static_cast<std::size_t>(ex.tgt_span.start),
                                 static_cast<std::size_t>(ex.tgt_span.end), st)) {
        out.push_back(std::move(*t));
      }
    } catch (const DataError& e) {
      throw DataError("example " + ex.src_id + " -> " + ex.tgt_id + ": " + e.what());
    }
  }
  if (stats) *stats = st;
  return out;
}

namespace {

const nlohmann::json& squad_records(const nlohmann::json& doc, const std::string& path) {
  if (!doc.is_object() || !doc.contains("data") || !doc["data"].is_array()) {
    throw DataError(path + ": not a SQuAD-shaped dataset (missing \"data\" array)");
  }
  return doc["data"];
}

nlohmann::json parse_squad(const std::string& path) {
  const std::string text = io::read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path + ": malformed JSON: " + e.what());
  }
}

}  // namespace

std::vector<TrainingExample> load_squad_examples(const EncoderConfig& config, const std::string& path,
                                                 DatasetStats* stats) {
  const nlohmann::json doc = parse_squad(path);
  DatasetStats st;
  std::vector<TrainingExample> out;
  std::size_t index = 0;
  for (const auto& rec : squad_records(doc, path)) {
    try {
      const std::string question = jsonu::get_string(rec, "question");
      const std::string context = jsonu::get_string(rec, "context");
      const auto& answers = jsonu::require(rec, "answers");
      if (!answers.is_array() || answers.empty()) throw ValidationError("answers", "expected a non-empty array");
      const std::string text = jsonu::get_string(answers[0], "text");
      const std::int64_t start = jsonu::get_int(answers[0], "answer_start");
      const std::size_t len = utf8::length(text);
      if (start < 0 || len == 0) throw ValidationError("answers[0]", "empty or negative answer");
      const auto k = static_cast<std::size_t>(start);
      const std::size_t l = k + len - 1;
      if (l >= utf8::length(context) || utf8::slice(context, k, l) != text) {
        throw ValidationError("answers[0].text", "does not match the context at answer_start");
      }
      if (auto t = build_example(config, question, context, k, l, st)) out.push_back(std::move(*t));
    } catch (const DataError& e) {
      throw DataError(path + ": record " + std::to_string(index) + ": " + e.what());
    }
    ++index;
  }
  if (stats) *stats = st;
  return out;
}

std::vector<std::string> squad_texts(const std::string& path) {
  const nlohmann::json doc = parse_squad(path);
  std::vector<std::string> out;
  for (const auto& rec : squad_records(doc, path)) {
    out.push_back(jsonu::get_string(rec, "question"));
    out.push_back(jsonu::get_string(rec, "context"));
  }
  return out;
}

TrainResult train(ModelParams<float>& params, std::span<const TrainingExample> data, const TrainConfig& cfg,
                  const StepCallback& on_step) {
  cfg.validate();
  if (data.empty()) throw DataError("training set is empty");

  TrainResult result;
  const std::size_t B = cfg.batch_size;
  const std::size_t ntensors = params.tensors.size();
  std::vector<ModelParams<float>> slot_grads(B, zero_params<float>(params.config));
  std::vector<ForwardCache<float>> caches(B);
  std::vector<double> slot_loss(B);
  ModelParams<float> grad = zero_params<float>(params.config);
  ModelParams<float> m = zero_params<float>(params.config);
  ModelParams<float> v = zero_params<float>(params.config);

  Rng rng(derive_seed(cfg.seed, "train/order"));
  std::vector<std::size_t> order(data.size());
  std::size_t cursor = order.size();
  std::vector<std::size_t> batch(B);

  const double inv_b = 1.0 / static_cast<double>(B);
  for (std::size_t step = 0; step < cfg.total_steps; ++step) {
    for (std::size_t b = 0; b < B; ++b) {
      if (cursor == order.size()) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);
        cursor = 0;
      }
      batch[b] = order[cursor++];
    }

    parallel_for(B, [&](std::size_t b) {
      for (auto& t : slot_grads[b].tensors) std::fill(t.data.begin(), t.data.end(), 0.0f);
      slot_loss[b] = example_loss_and_grad(params, data[batch[b]], slot_grads[b], caches[b]);
    });

    double loss = 0.0;
    for (std::size_t b = 0; b < B; ++b) loss += slot_loss[b];
    loss *= inv_b;
    if (!std::isfinite(loss)) throw TrainingDiverged(step);

    double sq = 0.0;
    for (std::size_t t = 0; t < ntensors; ++t) {
      auto& g = grad.tensors[t].data;
      std::fill(g.begin(), g.end(), 0.0f);
      for (std::size_t b = 0; b < B; ++b) {
        const auto& gb = slot_grads[b].tensors[t].data;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gb[i];
      }
      for (auto& x : g) {
        x = static_cast<float>(x * inv_b);
        sq += static_cast<double>(x) * x;
      }
    }
    float scale = 1.0f;
    if (cfg.clip_norm > 0.0) {
      const double norm = std::sqrt(sq);
      if (norm > cfg.clip_norm) scale = static_cast<float>(cfg.clip_norm / norm);
    }

    const auto lr = static_cast<float>(learning_rate(cfg, step));
    if (cfg.optimizer == Optimizer::sgd) {
      for (std::size_t t = 0; t < ntensors; ++t) {
        auto& p = params.tensors[t].data;
        const auto& g = grad.tensors[t].data;
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * (scale * g[i]);
      }
    } else {
      const auto b1 = static_cast<float>(cfg.beta1);
      const auto b2 = static_cast<float>(cfg.beta2);
      const auto eps = static_cast<float>(cfg.adam_eps);
      const auto c1 = static_cast<float>(1.0 - std::pow(cfg.beta1, static_cast<double>(step + 1)));
      const auto c2 = static_cast<float>(1.0 - std::pow(cfg.beta2, static_cast<double>(step + 1)));
      for (std::size_t t = 0; t < ntensors; ++t) {
        auto& p = params.tensors[t].data;
        auto& mt = m.tensors[t].data;
        auto& vt = v.tensors[t].data;
        const auto& g = grad.tensors[t].data;
        for (std::size_t i = 0; i < p.size(); ++i) {
          const float gi = scale * g[i];
          mt[i] = b1 * mt[i] + (1.0f - b1) * gi;
          vt[i] = b2 * vt[i] + (1.0f - b2) * gi * gi;
          p[i] -= lr * (mt[i] / c1) / (std::sqrt(vt[i] / c2) + eps);
        }
      }
    }

    result.loss_curve.push_back(loss);
    result.examples_seen += B;
    if (on_step) on_step(step, loss);
  }
  return result;
}

void write_loss_curve(const std::string& path, std::span<const double> curve) {
  std::ostringstream out;
  out << "step,loss\n";
  out.precision(17);
  for (std::size_t i = 0; i < curve.size(); ++i) out << i << ',' << curve[i] << '\n';
  io::write_file(path, out.str());
}

nlohmann::ordered_json GradCheckReport::to_json() const {
  nlohmann::ordered_json j;
  j["coordinates"] = coordinates;
  j["max_rel_error"] = max_rel_error;
  j["max_abs_error"] = max_abs_error;
  j["worst_tensor"] = worst_tensor;
  j["worst_index"] = worst_index;
  return j;
}

GradCheckReport grad_check(const ModelParams<double>& params, const TrainingExample& ex, double epsilon,
                           std::size_t coordinates, std::uint64_t seed, double abs_floor) {
  ModelParams<double> grads = zero_params<double>(params.config);
  ForwardCache<double> cache;
  example_loss_and_grad(params, ex, grads, cache);

  std::vector<std::size_t> offsets;  // flat start of each tensor
  std::size_t total = 0;
  for (const auto& t : params.tensors) {
    offsets.push_back(total);
    total += t.data.size();
  }
  const auto picks = sample_indices(total, std::min(coordinates, total), derive_seed(seed, "gradcheck"));

  ModelParams<double> work = params;
  GradCheckReport rep;
  rep.coordinates = picks.size();
  for (std::size_t flat : picks) {
    const auto t = static_cast<std::size_t>(std::upper_bound(offsets.begin(), offsets.end(), flat) -
                                            offsets.begin() - 1);
    const std::size_t i = flat - offsets[t];
    double& x = work.tensors[t].data[i];
    const double orig = x;
    x = orig + epsilon;
    const double lp = example_loss(work, ex);
    x = orig - epsilon;
    const double lm = example_loss(work, ex);
    x = orig;
    const double numeric = (lp - lm) / (2.0 * epsilon);
    const double analytic = grads.tensors[t].data[i];
    const double abs_err = std::abs(analytic - numeric);
    const double rel = abs_err / std::max({std::abs(analytic), std::abs(numeric), abs_floor});
    rep.max_abs_error = std::max(rep.max_abs_error, abs_err);
    if (rep.worst_tensor.empty() || rel > rep.max_rel_error) {
      rep.max_rel_error = rel;
      rep.worst_tensor = params.tensors[t].name;
      rep.worst_index = i;
    }
  }
  return rep;
}

namespace {

class ByteWriter {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof(T));
  }
  void bytes(std::string_view s) { buf_.append(s); }
  std::string& str() { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  ByteReader(std::string_view data, std::string path) : data_(data), path_(std::move(path)) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) {
    if (data_.size() - pos_ < n) {
      throw IoError(path_, "truncated checkpoint (needed " + std::to_string(n) + " bytes at offset " +
                               std::to_string(pos_) + ")");
    }
  }
  std::string_view data_;
  std::string path_;
  std::size_t pos_ = 0;
};

constexpr std::string_view kMagic = "WSPC";

}  // namespace

void save_checkpoint(const ModelParams<float>& params, const std::string& path) {
  ByteWriter w;
  w.bytes(kMagic);
  w.put<std::uint32_t>(kCheckpointVersion);
  const std::string cfg = params.config.to_json().dump();
  w.put<std::uint64_t>(cfg.size());
  w.bytes(cfg);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.tensors.size()));
  for (const auto& t : params.tensors) {
    w.put<std::uint16_t>(static_cast<std::uint16_t>(t.name.size()));
    w.bytes(t.name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.shape.size()));
    for (auto s : t.shape) w.put<std::uint64_t>(s);
  }
  for (const auto& t : params.tensors) {
    w.bytes(std::string_view(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(float)));
  }
  io::write_file(path, w.str());
}

ModelParams<float> load_checkpoint(const std::string& path, const std::optional<EncoderConfig>& expected) {
  const std::string data = io::read_file(path);
  ByteReader r(data, path);
  if (r.bytes(kMagic.size()) != kMagic) throw IoError(path, "not a checkpoint (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw DataError(path + ": checkpoint format version " + std::to_string(version) + ", expected " +
                    std::to_string(kCheckpointVersion));
  }
  const auto cfg_len = r.get<std::uint64_t>();
  EncoderConfig config;
  try {
    config = EncoderConfig::from_json(nlohmann::json::parse(r.bytes(cfg_len)));
    config.validate();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": bad config block: " + e.what());
  }
  if (expected) {
    const auto fields = expected->diff(config);
    if (!fields.empty()) {
      std::string names;
      for (const auto& f : fields) names += (names.empty() ? "" : ", ") + f;
      throw ConfigError("model", "checkpoint " + path + " differs from the expected config in: " + names);
    }
  }
  ModelParams<float> params = zero_params<float>(config);
  const auto count = r.get<std::uint32_t>();
  if (count != params.tensors.size()) throw DataError(path + ": tensor count does not match the config");
  for (auto& t : params.tensors) {
    const auto name_len = r.get<std::uint16_t>();
    const std::string name(r.bytes(name_len));
    const auto rank = r.get<std::uint32_t>();
    std::vector<std::size_t> shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(static_cast<std::size_t>(r.get<std::uint64_t>()));
    if (name != t.name || shape != t.shape) throw DataError(path + ": unexpected tensor '" + name + "'");
  }
  for (auto& t : params.tensors) {
    const auto raw = r.bytes(t.data.size() * sizeof(float));
    std::memcpy(t.data.data(), raw.data(), raw.size());
  }
  if (!r.at_end()) throw DataError(path + ": trailing bytes after tensor data");
  return params;
}

}  // namespace wsp::spanpred
