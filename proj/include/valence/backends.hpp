#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "valence/baseline.hpp"
#include "valence/dataset.hpp"
#include "valence/error.hpp"
#include "valence/eval.hpp"
#include "valence/prompting.hpp"
#include "valence/util/jsonl.hpp"

namespace valence {

class BackendError : public Error {
 public:
  enum class Kind { kUnsupported, kTimeout, kConnectivity, kMalformed, kMissingLogit, kServer };

  BackendError(Kind kind, const std::string& what) : Error(what, ExitCode::kBackend), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

enum class Capability : unsigned { kScoreMask = 1, kGenerate = 2, kTrain = 4 };

struct ScoreRequest {
  std::string prompt;
  std::string mask_literal = "[MASK]";
  std::vector<std::string> candidate_words;
};

struct GenerateRequest {
  std::string prompt;
  std::size_t max_tokens = 16;
  double temperature = 0.0;
  std::uint64_t seed = 42;
};

/// A classification model behind one of three capabilities. Calls to a
/// capability the backend does not declare throw BackendError(kUnsupported).
class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::string name() const = 0;
  virtual bool supports(Capability capability) const noexcept = 0;

  virtual WordLogits score_mask(const ScoreRequest& request);
  virtual std::string generate(const GenerateRequest& request);
  virtual void train(std::span<const LabeledPrompt> train, const TrainConfig& config,
                     std::span<const LabeledPrompt> dev = {});

 protected:
  [[noreturn]] void unsupported(std::string_view capability) const;
};

struct MockRule {
  std::string pattern;  // matched as a plain substring of the prompt
  std::optional<WordLogits> logits;
  std::optional<std::string> generation;
  bool fail = false;  // raise BackendError(kServer) instead of answering
};

/// Rule-table backend. The first rule whose pattern occurs in the prompt and
/// carries an answer for the requested capability wins; otherwise every
/// candidate word gets logit 0 and generation returns `default_generation`.
class MockBackend final : public Backend {
 public:
  explicit MockBackend(std::vector<MockRule> rules = {}, std::string default_generation = {});

  static std::unique_ptr<MockBackend> from_json(const Json& json);

  std::string name() const override { return "mock"; }
  bool supports(Capability capability) const noexcept override;
  WordLogits score_mask(const ScoreRequest& request) override;
  std::string generate(const GenerateRequest& request) override;

  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  std::vector<MockRule> rules_;
  std::string default_generation_;
  std::atomic<std::size_t> calls_{0};
};

struct RemoteConfig {
  std::string endpoint;  // e.g. "http://127.0.0.1:8000"
  double timeout_seconds = 30.0;
  std::size_t max_in_flight = 4;
  bool generate = true;
  bool score_mask = true;
};

/// Client for a model server speaking the score/generate wire contract:
///   POST /score    {prompt, mask_literal, candidate_words} -> {logits: {word: real}}
///   POST /generate {prompt, max_tokens, temperature, seed} -> {text}
class RemoteBackend final : public Backend {
 public:
  explicit RemoteBackend(RemoteConfig config);
  ~RemoteBackend() override;

  std::string name() const override { return "remote:" + config_.endpoint; }
  bool supports(Capability capability) const noexcept override;
  WordLogits score_mask(const ScoreRequest& request) override;
  std::string generate(const GenerateRequest& request) override;

 private:
  Json post(const std::string& path, const Json& body);

  struct Limiter;
  RemoteConfig config_;
  std::unique_ptr<Limiter> limiter_;
};

/// The trainable bag-of-words model behind the backend interface. For
/// score_mask it reports class logits for the words of its verbalizer.
class BaselineBackend final : public Backend {
 public:
  explicit BaselineBackend(Verbalizer verbalizer, std::optional<BaselineModel> model = std::nullopt);

  std::string name() const override { return "baseline"; }
  bool supports(Capability capability) const noexcept override;
  WordLogits score_mask(const ScoreRequest& request) override;
  std::string generate(const GenerateRequest& request) override;
  void train(std::span<const LabeledPrompt> train, const TrainConfig& config,
             std::span<const LabeledPrompt> dev = {}) override;

  const BaselineModel& model() const;
  const TrainReport& last_report() const noexcept { return report_; }

 private:
  Verbalizer verbalizer_;
  std::optional<BaselineModel> model_;
  TrainReport report_;
};

enum class ClassifyMode { kScoreMask, kGenerate };

std::string_view to_string(ClassifyMode mode) noexcept;
ClassifyMode parse_classify_mode(std::string_view text);

struct ClassifyOptions {
  PromptTemplate tmpl;
  Verbalizer verbalizer;
  ClassifyMode mode = ClassifyMode::kScoreMask;
  std::size_t max_tokens = 16;
  std::uint64_t seed = 42;
};

/// The keyword used by primed templates: the lowercased matched surface, or
/// the term id when the surface is empty.
std::string chunk_keyword(const Chunk& chunk);

std::string render_chunk(const Chunk& chunk, const PromptTemplate& tmpl);

/// Classifies one rendered prompt through the requested capability.
Predicted classify_prompt(Backend& backend, const std::string& prompt,
                          const ClassifyOptions& options);

/// Renders and classifies every chunk. Backend errors propagate.
std::vector<PredictionRow> classify(Backend& backend, std::span<const LabeledChunk> chunks,
                                    const ClassifyOptions& options);

/// Renders training prompts for the baseline learner.
std::vector<LabeledPrompt> render_training_set(std::span<const LabeledChunk> chunks,
                                               const PromptTemplate& tmpl);

/// Backend by name: "mock" (optionally "mock:<rules.json>"), "baseline"
/// (requires `model_path`), or "remote:<endpoint>".
std::unique_ptr<Backend> make_backend(const std::string& spec, const Verbalizer& verbalizer,
                                      const std::optional<std::filesystem::path>& model_path);

}  // namespace valence
