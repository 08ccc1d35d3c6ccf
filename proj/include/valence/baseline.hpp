#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "valence/label.hpp"
#include "valence/prompting.hpp"
#include "valence/util/jsonl.hpp"

namespace valence {

inline constexpr std::size_t kDefaultHashDim = std::size_t{1} << 18;

struct FeatureConfig {
  std::size_t dim = kDefaultHashDim;
  bool unigrams = true;
  /// One extra bucket for the keyword named by a "Keyword is:" or "Word:"
  /// segment, so lexical priming is visible to the model.
  bool keyword_identity = true;
  /// One fixed bucket that fires whenever such a segment is present.
  bool priming_flag = true;

  void validate() const;
  bool operator==(const FeatureConfig&) const = default;
};

/// (bucket, value) pairs sorted by bucket, duplicates merged.
using SparseVector = std::vector<std::pair<std::uint32_t, double>>;

/// Bucket of a unigram token.
std::uint32_t token_bucket(std::string_view token, std::size_t dim) noexcept;

/// Lowercase word tokens (runs of word characters).
std::vector<std::string> tokenize(std::string_view text);

/// Keyword named by a priming segment, if any.
std::optional<std::string> primed_keyword(std::string_view prompt);

SparseVector featurize(std::string_view prompt, const FeatureConfig& config);

struct LabeledPrompt {
  std::string prompt;
  ValenceLabel gold = ValenceLabel::kNeutral;
};

struct Example {
  SparseVector x;
  ValenceLabel y = ValenceLabel::kNeutral;
};

/// Multinomial logistic regression over hashed features.
struct BaselineModel {
  FeatureConfig features;
  std::vector<double> weights;  // kNumLabels x dim, row-major by label
  std::array<double, kNumLabels> bias{};

  static BaselineModel zeros(const FeatureConfig& features);

  double& w(std::size_t label, std::size_t bucket) { return weights[label * features.dim + bucket]; }
  double w(std::size_t label, std::size_t bucket) const {
    return weights[label * features.dim + bucket];
  }

  std::array<double, kNumLabels> logits(const SparseVector& x) const;
  ClassScores predict_proba(const SparseVector& x) const;
  ValenceLabel predict(std::string_view prompt) const;

  /// Throws ValidationError on non-finite parameters or a size mismatch.
  void validate() const;
  bool operator==(const BaselineModel&) const = default;
};

/// Mean cross-entropy of softmax(Wx + b).
double cross_entropy(const BaselineModel& model, std::span<const Example> examples);

struct Gradient {
  std::vector<double> weights;  // same layout as BaselineModel::weights
  std::array<double, kNumLabels> bias{};
};

/// Analytic gradient of cross_entropy.
Gradient cross_entropy_gradient(const BaselineModel& model, std::span<const Example> examples);

struct TrainConfig {
  double learning_rate = 0.3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 300;
  std::size_t patience = 50;
  std::uint64_t seed = 42;
  /// Held-out share of the training data used for early stopping when no
  /// dev set is passed. 0 disables early stopping.
  double dev_fraction = 0.2;
  FeatureConfig features;

  void validate() const;
};

struct TrainReport {
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double best_dev_f1 = 0.0;
  std::vector<double> train_loss;  // after each epoch
  std::vector<double> dev_f1;      // after each epoch, empty without a dev set
};

/// Mini-batch gradient descent from zero parameters, keeping the epoch with
/// the best dev macro-F1 (lower dev loss breaks ties). Throws DomainError when
/// a class has no example.
BaselineModel train_baseline(std::span<const LabeledPrompt> train, const TrainConfig& config,
                             std::span<const LabeledPrompt> dev = {},
                             TrainReport* report = nullptr);

/// One full-batch gradient step, for convergence checks.
void gradient_step(BaselineModel& model, std::span<const Example> examples, double learning_rate);

inline constexpr int kModelFormatVersion = 1;

Json model_to_json(const BaselineModel& model);
BaselineModel model_from_json(const Json& json);
void save_model(const std::filesystem::path& path, const BaselineModel& model);
BaselineModel load_model(const std::filesystem::path& path);

}  // namespace valence
