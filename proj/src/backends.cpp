#include "valence/backends.hpp"

#include <cmath>
#include <condition_variable>
#include <mutex>

#include <httplib.h>

#include "valence/util/utf8.hpp"

namespace valence {

namespace {

std::string capability_name(Capability c) {
  switch (c) {
    case Capability::kScoreMask:
      return "score_mask";
    case Capability::kGenerate:
      return "generate";
    case Capability::kTrain:
      return "train";
  }
  return "unknown";
}

}  // namespace

WordLogits Backend::score_mask(const ScoreRequest&) { unsupported("score_mask"); }
std::string Backend::generate(const GenerateRequest&) { unsupported("generate"); }
void Backend::train(std::span<const LabeledPrompt>, const TrainConfig&,
                    std::span<const LabeledPrompt>) {
  unsupported("train");
}

void Backend::unsupported(std::string_view capability) const {
  throw BackendError(BackendError::Kind::kUnsupported,
                     "backend '" + name() + "' does not support " + std::string(capability));
}

// ---------------------------------------------------------------- mock

MockBackend::MockBackend(std::vector<MockRule> rules, std::string default_generation)
    : rules_(std::move(rules)), default_generation_(std::move(default_generation)) {}

std::unique_ptr<MockBackend> MockBackend::from_json(const Json& json) {
  std::vector<MockRule> rules;
  for (const Json& r : json.value("rules", Json::array())) {
    MockRule rule;
    rule.pattern = require_field<std::string>(r, "pattern");
    if (const auto it = r.find("logits"); it != r.end() && !it->is_null()) {
      WordLogits logits;
      for (const auto& [word, value] : it->items()) {
        if (!value.is_number()) throw ValidationError("mock logit for '" + word + "' is not a number");
        logits[word] = value.get<double>();
      }
      rule.logits = std::move(logits);
    }
    if (const auto it = r.find("generate"); it != r.end() && !it->is_null()) {
      rule.generation = it->get<std::string>();
    }
    rule.fail = optional_field<bool>(r, "fail", false);
    rules.push_back(std::move(rule));
  }
  return std::make_unique<MockBackend>(std::move(rules),
                                       optional_field<std::string>(json, "default_generation", ""));
}

bool MockBackend::supports(Capability c) const noexcept {
  return c == Capability::kScoreMask || c == Capability::kGenerate;
}

WordLogits MockBackend::score_mask(const ScoreRequest& request) {
  ++calls_;
  for (const MockRule& rule : rules_) {
    if (request.prompt.find(rule.pattern) == std::string::npos) continue;
    if (rule.fail) throw BackendError(BackendError::Kind::kServer, "mock failure on '" + rule.pattern + "'");
    if (!rule.logits) continue;
    WordLogits out;
    for (const std::string& w : request.candidate_words) {
      const auto it = rule.logits->find(w);
      out[w] = it == rule.logits->end() ? 0.0 : it->second;
    }
    return out;
  }
  WordLogits uniform;
  for (const std::string& w : request.candidate_words) uniform[w] = 0.0;
  return uniform;
}

std::string MockBackend::generate(const GenerateRequest& request) {
  ++calls_;
  for (const MockRule& rule : rules_) {
    if (request.prompt.find(rule.pattern) == std::string::npos) continue;
    if (rule.fail) throw BackendError(BackendError::Kind::kServer, "mock failure on '" + rule.pattern + "'");
    if (rule.generation) return *rule.generation;
  }
  return default_generation_;
}

// ---------------------------------------------------------------- remote

struct RemoteBackend::Limiter {
  std::mutex mu;
  std::condition_variable cv;
  std::size_t in_flight = 0;
  std::size_t cap = 1;
};

namespace {

class Slot {
 public:
  template <typename L>
  explicit Slot(L& limiter) : mu_(limiter.mu), cv_(limiter.cv), in_flight_(limiter.in_flight) {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < limiter.cap; });
    ++in_flight_;
  }
  ~Slot() {
    {
      std::lock_guard lock(mu_);
      --in_flight_;
    }
    cv_.notify_one();
  }
  Slot(const Slot&) = delete;
  Slot& operator=(const Slot&) = delete;

 private:
  std::mutex& mu_;
  std::condition_variable& cv_;
  std::size_t& in_flight_;
};

}  // namespace

RemoteBackend::RemoteBackend(RemoteConfig config)
    : config_(std::move(config)), limiter_(std::make_unique<Limiter>()) {
  if (config_.endpoint.empty()) throw ValidationError("remote backend needs an endpoint");
  if (!(config_.timeout_seconds > 0.0)) throw ValidationError("remote timeout must be positive");
  limiter_->cap = std::max<std::size_t>(1, config_.max_in_flight);
}

RemoteBackend::~RemoteBackend() = default;

bool RemoteBackend::supports(Capability c) const noexcept {
  return (c == Capability::kScoreMask && config_.score_mask) ||
         (c == Capability::kGenerate && config_.generate);
}

Json RemoteBackend::post(const std::string& path, const Json& body) {
  Slot slot(*limiter_);
  httplib::Client client(config_.endpoint);
  if (!client.is_valid()) {
    throw BackendError(BackendError::Kind::kConnectivity, "invalid endpoint '" + config_.endpoint + "'");
  }
  const auto secs = static_cast<time_t>(config_.timeout_seconds);
  const auto usecs = static_cast<time_t>((config_.timeout_seconds - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  const auto res = client.Post(path, body.dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    const std::string where = config_.endpoint + path;
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
      throw BackendError(BackendError::Kind::kTimeout, "no response from " + where + " (" +
                                                           httplib::to_string(err) + ")");
    }
    throw BackendError(BackendError::Kind::kConnectivity,
                       "cannot reach " + where + " (" + httplib::to_string(err) + ")");
  }
  if (res->status != 200) {
    throw BackendError(BackendError::Kind::kServer, config_.endpoint + path + " returned status " +
                                                        std::to_string(res->status));
  }
  Json reply = Json::parse(res->body, nullptr, false);
  if (reply.is_discarded() || !reply.is_object()) {
    throw BackendError(BackendError::Kind::kMalformed, config_.endpoint + path + " returned non-JSON payload");
  }
  return reply;
}

WordLogits RemoteBackend::score_mask(const ScoreRequest& request) {
  if (!config_.score_mask) unsupported("score_mask");
  const Json reply = post("/score", {{"prompt", request.prompt},
                                     {"mask_literal", request.mask_literal},
                                     {"candidate_words", request.candidate_words}});
  const auto it = reply.find("logits");
  if (it == reply.end() || !it->is_object()) {
    throw BackendError(BackendError::Kind::kMalformed, "score reply has no 'logits' object");
  }
  WordLogits out;
  for (const std::string& w : request.candidate_words) {
    const auto v = it->find(w);
    if (v == it->end()) {
      throw BackendError(BackendError::Kind::kMissingLogit, "score reply has no logit for '" + w + "'");
    }
    if (!v->is_number() || !std::isfinite(v->get<double>())) {
      throw BackendError(BackendError::Kind::kMalformed, "logit for '" + w + "' is not a finite number");
    }
    out[w] = v->get<double>();
  }
  return out;
}

std::string RemoteBackend::generate(const GenerateRequest& request) {
  if (!config_.generate) unsupported("generate");
  const Json reply = post("/generate", {{"prompt", request.prompt},
                                        {"max_tokens", request.max_tokens},
                                        {"temperature", request.temperature},
                                        {"seed", request.seed}});
  const auto it = reply.find("text");
  if (it == reply.end() || !it->is_string()) {
    throw BackendError(BackendError::Kind::kMalformed, "generate reply has no 'text' string");
  }
  return it->get<std::string>();
}

// ---------------------------------------------------------------- baseline

BaselineBackend::BaselineBackend(Verbalizer verbalizer, std::optional<BaselineModel> model)
    : verbalizer_(std::move(verbalizer)), model_(std::move(model)) {
  verbalizer_.validate();
}

bool BaselineBackend::supports(Capability) const noexcept { return true; }

const BaselineModel& BaselineBackend::model() const {
  if (!model_) throw BackendError(BackendError::Kind::kUnsupported, "baseline backend has no trained model");
  return *model_;
}

WordLogits BaselineBackend::score_mask(const ScoreRequest& request) {
  const auto z = model().logits(featurize(request.prompt, model().features));
  WordLogits out;
  for (const std::string& w : request.candidate_words) {
    bool found = false;
    for (ValenceLabel label : kAllLabels) {
      const auto& words = verbalizer_.words[index_of(label)];
      if (std::find(words.begin(), words.end(), w) != words.end()) {
        out[w] = z[index_of(label)];
        found = true;
        break;
      }
    }
    if (!found) {
      throw BackendError(BackendError::Kind::kMissingLogit,
                         "baseline verbalizer '" + verbalizer_.name + "' has no word '" + w + "'");
    }
  }
  return out;
}

std::string BaselineBackend::generate(const GenerateRequest& request) {
  return std::string(to_string(model().predict(request.prompt)));
}

void BaselineBackend::train(std::span<const LabeledPrompt> train, const TrainConfig& config,
                            std::span<const LabeledPrompt> dev) {
  model_ = train_baseline(train, config, dev, &report_);
}

// ---------------------------------------------------------------- classify

std::string_view to_string(ClassifyMode mode) noexcept {
  return mode == ClassifyMode::kGenerate ? "generate" : "score_mask";
}

ClassifyMode parse_classify_mode(std::string_view text) {
  if (text == "score_mask" || text == "cloze") return ClassifyMode::kScoreMask;
  if (text == "generate") return ClassifyMode::kGenerate;
  throw ValidationError("unknown classify mode '" + std::string(text) + "'");
}

std::string chunk_keyword(const Chunk& chunk) {
  return chunk.surface.empty() ? chunk.term_id : utf8::to_lower(chunk.surface);
}

std::string render_chunk(const Chunk& chunk, const PromptTemplate& tmpl) {
  const std::string keyword = chunk_keyword(chunk);
  return render(chunk.window_text, keyword, tmpl);
}

Predicted classify_prompt(Backend& backend, const std::string& prompt, const ClassifyOptions& options) {
  if (options.mode == ClassifyMode::kGenerate) {
    if (!backend.supports(Capability::kGenerate)) {
      throw BackendError(BackendError::Kind::kUnsupported,
                         "backend '" + backend.name() + "' cannot " + capability_name(Capability::kGenerate));
    }
    return postprocess_generation(backend.generate({prompt, options.max_tokens, 0.0, options.seed}));
  }
  if (!backend.supports(Capability::kScoreMask)) {
    throw BackendError(BackendError::Kind::kUnsupported,
                       "backend '" + backend.name() + "' cannot " + capability_name(Capability::kScoreMask));
  }
  const WordLogits logits =
      backend.score_mask({prompt, options.tmpl.mask_token, options.verbalizer.all_words()});
  try {
    return argmax_label(verbalize(logits, options.verbalizer));
  } catch (const DomainError& e) {
    throw BackendError(BackendError::Kind::kMissingLogit, e.what());
  }
}

std::vector<PredictionRow> classify(Backend& backend, std::span<const LabeledChunk> chunks,
                                    const ClassifyOptions& options) {
  options.tmpl.validate();
  if (options.mode == ClassifyMode::kScoreMask) options.verbalizer.validate();
  std::vector<PredictionRow> rows;
  rows.reserve(chunks.size());
  for (const LabeledChunk& c : chunks) {
    rows.push_back({c.chunk.chunk_id, c.gold,
                    classify_prompt(backend, render_chunk(c.chunk, options.tmpl), options)});
  }
  return rows;
}

std::vector<LabeledPrompt> render_training_set(std::span<const LabeledChunk> chunks,
                                               const PromptTemplate& tmpl) {
  std::vector<LabeledPrompt> out;
  out.reserve(chunks.size());
  for (const LabeledChunk& c : chunks) out.push_back({render_chunk(c.chunk, tmpl), c.gold});
  return out;
}

std::unique_ptr<Backend> make_backend(const std::string& spec, const Verbalizer& verbalizer,
                                      const std::optional<std::filesystem::path>& model_path) {
  if (spec == "mock") return std::make_unique<MockBackend>();
  if (spec.rfind("mock:", 0) == 0) {
    return MockBackend::from_json(read_json(spec.substr(5)));
  }
  if (spec == "baseline") {
    if (!model_path) throw ValidationError("the baseline backend needs a model file (--model)");
    if (!std::filesystem::exists(*model_path)) {
      throw DependencyError("model file " + model_path->string() + " not found; run 'train' first");
    }
    return std::make_unique<BaselineBackend>(verbalizer, load_model(*model_path));
  }
  if (spec.rfind("remote:", 0) == 0) {
    RemoteConfig config;
    config.endpoint = spec.substr(7);
    return std::make_unique<RemoteBackend>(config);
  }
  throw ValidationError("unknown backend '" + spec + "' (expected mock, baseline or remote:<url>)");
}

}  // namespace valence
