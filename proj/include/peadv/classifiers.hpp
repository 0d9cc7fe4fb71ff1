#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "peadv/features.hpp"
#include "peadv/label.hpp"
#include "peadv/pe_format.hpp"

namespace peadv::model {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Score-producing target model: score(bytes) is the malicious probability,
// label is malicious iff score >= threshold.
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;
  virtual double score(pe::ByteView bytes) const = 0;
  virtual std::string kind() const = 0;

  Label label(pe::ByteView bytes) const {
    return score(bytes) >= threshold ? Label::malware : Label::benign;
  }

  double threshold = 0.5;
};

// Feature-space models score extract()-ed vectors; scoring precomputed
// features directly avoids re-extraction in sweep loops.
class FeatureModel : public ScoreModel {
 public:
  virtual double logit_values(std::span<const double> x) const = 0;
  double score_values(std::span<const double> x) const { return sigmoid(logit_values(x)); }
  double score(pe::ByteView bytes) const override {
    return score_values(feat::extract(bytes).values);
  }
};

class LogisticModel final : public FeatureModel {
 public:
  std::vector<double> weights;
  double bias = 0.0;

  double logit_values(std::span<const double> x) const override;
  std::string kind() const override { return "logistic"; }
};

struct StumpRound {
  std::uint32_t feature_index = 0;
  double split_value = 0.0;  // x[feature] <= split goes left
  double left_leaf = 0.0;
  double right_leaf = 0.0;
};

// Depth-1 gradient boosting with logistic loss. score = sigmoid(base_logit
// + learning_rate * sum of leaf contributions).
class BoostedStumps final : public FeatureModel {
 public:
  std::vector<StumpRound> rounds;
  double learning_rate = 0.1;
  double base_logit = 0.0;

  double logit_values(std::span<const double> x) const override;
  std::string kind() const override { return "stumps"; }
};

struct PoolingConfig {
  enum class Windows { whole_file, attack_regions } windows = Windows::attack_regions;
};

// Minimal differentiable byte model: mean-pooled 8-d byte embeddings under a
// linear head. Gradients w.r.t. any position's embedding are analytic.
class ByteEmbedModel final : public ScoreModel {
 public:
  static constexpr std::size_t kEmbedDim = 8;
  using Embedding = std::array<double, kEmbedDim>;

  std::array<Embedding, 256> embedding{};
  Embedding projection{};
  double bias = 0.0;
  PoolingConfig pooling;

  double score(pe::ByteView bytes) const override { return sigmoid(logit(bytes)); }
  std::string kind() const override { return "byte_embed"; }

  double logit(pe::ByteView bytes) const;

  // Byte ranges pooled for this input (whole file, or DOS zone + slack +
  // overlay). Falls back to the whole file when the input does not parse.
  std::vector<pe::ByteRange> pooled_ranges(pe::ByteView bytes) const;
  std::uint64_t pooled_count(pe::ByteView bytes) const;

  // d(logit)/d(embedding vector at position p); zero for positions outside
  // the pooled window.
  std::vector<Embedding> grad_wrt_embeddings(pe::ByteView bytes,
                                             std::span<const std::uint64_t> positions) const;

  // Logit with the embedding at one position replaced; finite-difference hook.
  double logit_with_override(pe::ByteView bytes, std::uint64_t position, const Embedding& e) const;

  // projection . embedding[b]; the per-byte pooled logit contribution.
  double byte_projection(std::uint8_t b) const;
};

struct TrainParams {
  int rounds = 100;          // boosting rounds / gradient epochs
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
};

struct TrainDiagnostics {
  std::vector<double> loss_trace;  // training log-loss after each round/epoch
};

LogisticModel train_logistic(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                             const TrainParams& params, TrainDiagnostics* diag = nullptr);

BoostedStumps train_stumps(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                           const TrainParams& params, TrainDiagnostics* diag = nullptr);

ByteEmbedModel train_byte_embed(const std::vector<pe::Bytes>& files, const std::vector<int>& y,
                                const TrainParams& params, PoolingConfig pooling = {},
                                TrainDiagnostics* diag = nullptr);

struct Calibration {
  double threshold = 0.5;
  bool achievable = true;   // false when too few benign samples for the target
  double achieved_fpr = 0.0;
};

// Smallest threshold whose empirical FPR stays at or under the target; ties
// resolve toward the higher threshold. target 0 lands strictly above the max
// benign score.
Calibration calibrate_from_scores(std::vector<double> benign_scores, double target_fpr);
Calibration calibrate_threshold(const ScoreModel& model, const std::vector<pe::Bytes>& validation,
                                const std::vector<Label>& labels, double target_fpr);

// Versioned binary container plus a line-oriented text dump.
void save_model(const ScoreModel& model, const std::filesystem::path& path);
std::unique_ptr<ScoreModel> load_model(const std::filesystem::path& path);
std::string model_text_dump(const ScoreModel& model);

}  // namespace peadv::model
