#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "wsp/annotate.hpp"
#include "wsp/error.hpp"
#include "wsp/spanpred.hpp"

namespace wsp::spanpred {

enum class Optimizer { sgd, adam };

std::string to_string(Optimizer o);
Optimizer parse_optimizer(const std::string& s);

struct TrainConfig {
  double lr = 1e-3;
  std::size_t warmup_steps = 200;
  std::size_t total_steps = 2000;
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;
  Optimizer optimizer = Optimizer::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Global gradient-norm clip; 0 disables.
  double clip_norm = 0.0;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);

  /// Full-scale continual pre-training schedule (lr 1e-6, 100k steps).
  static TrainConfig full_scale_preset();
};

/// 12-layer, 768-dim encoder shape, for reference runs.
EncoderConfig full_scale_encoder_preset(std::vector<std::string> vocab);

/// Learning rate at 0-based step: linear warmup, then constant.
double learning_rate(const TrainConfig& cfg, std::size_t step);

/// Raised when a step produces a non-finite loss.
class TrainingDiverged : public Error {
 public:
  explicit TrainingDiverged(std::size_t step)
      : Error("non-finite loss at step " + std::to_string(step)), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

struct TrainResult {
  std::vector<double> loss_curve;  // mean batch loss per step
  std::size_t examples_seen = 0;
};

struct DatasetStats {
  std::size_t records = 0;
  std::size_t kept = 0;
  std::size_t skipped_overlength = 0;
  /// Answer spans that do not start and end on token boundaries (word mode).
  std::size_t skipped_misaligned = 0;

  nlohmann::ordered_json to_json() const;
};

/// Turns annotated examples into model inputs. Examples that do not fit
/// max_len, or whose answer cuts through a token, are dropped and counted.
std::vector<TrainingExample> make_training_examples(const EncoderConfig& config,
                                                    std::span<const AlignmentExample> dataset,
                                                    DatasetStats* stats = nullptr);

/// Reads the SQuAD-shaped dataset written by the emit stage.
std::vector<TrainingExample> load_squad_examples(const EncoderConfig& config, const std::string& path,
                                                 DatasetStats* stats = nullptr);

/// All question and context texts of a SQuAD-shaped dataset (vocabulary input).
std::vector<std::string> squad_texts(const std::string& path);

using StepCallback = std::function<void(std::size_t step, double loss)>;

/// Mini-batch training on the mean per-example loss. Batches are drawn from
/// seeded epoch permutations; per-example gradients are computed in parallel
/// and summed in a fixed order, so results do not depend on the thread count.
TrainResult train(ModelParams<float>& params, std::span<const TrainingExample> data, const TrainConfig& cfg,
                  const StepCallback& on_step = {});

void write_loss_curve(const std::string& path, std::span<const double> curve);

struct GradCheckReport {
  std::size_t coordinates = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;

  nlohmann::ordered_json to_json() const;
  bool operator==(const GradCheckReport&) const = default;
};

/// Central finite differences on `coordinates` sampled parameters of a
/// 64-bit copy. Relative error is |a - n| / max(|a|, |n|, abs_floor).
GradCheckReport grad_check(const ModelParams<double>& params, const TrainingExample& ex, double epsilon = 1e-5,
                           std::size_t coordinates = 256, std::uint64_t seed = 1, double abs_floor = 1e-6);

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ModelParams<float>& params, const std::string& path);

/// Throws IoError on truncation or bad magic, DataError on a version
/// mismatch, and ConfigError naming the differing fields when `expected`
/// is given and does not match the stored config.
ModelParams<float> load_checkpoint(const std::string& path, const std::optional<EncoderConfig>& expected = {});

}  // namespace wsp::spanpred
