#include "valence/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "valence/error.hpp"
#include "valence/eval.hpp"
#include "valence/util/hashing.hpp"
#include "valence/util/random.hpp"
#include "valence/util/utf8.hpp"

namespace valence {

namespace {

constexpr std::string_view kKeywordSalt = "\x01kw:";
constexpr std::string_view kPrimedSalt = "\x01primed";

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::array<double, kNumLabels> softmax(const std::array<double, kNumLabels>& z) {
  const double top = *std::max_element(z.begin(), z.end());
  std::array<double, kNumLabels> p{};
  double sum = 0.0;
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    p[k] = std::exp(z[k] - top);
    sum += p[k];
  }
  for (double& v : p) v /= sum;
  return p;
}

std::vector<Example> to_examples(std::span<const LabeledPrompt> data, const FeatureConfig& config) {
  std::vector<Example> out;
  out.reserve(data.size());
  for (const LabeledPrompt& d : data) out.push_back({featurize(d.prompt, config), d.gold});
  return out;
}

double dev_macro_f1(const BaselineModel& model, std::span<const Example> dev) {
  std::vector<PredictionRow> rows;
  rows.reserve(dev.size());
  for (std::size_t i = 0; i < dev.size(); ++i) {
    rows.push_back({std::to_string(i), dev[i].y, argmax_label(model.predict_proba(dev[i].x))});
  }
  return macro_f1(rows);
}

void apply_batch(BaselineModel& model, std::span<const Example> examples,
                 std::span<const std::size_t> batch, double learning_rate) {
  if (batch.empty() || learning_rate == 0.0) return;
  // Residuals are taken at the pre-batch parameters, then applied together.
  std::vector<std::array<double, kNumLabels>> residual(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Example& ex = examples[batch[i]];
    residual[i] = softmax(model.logits(ex.x));
    residual[i][index_of(ex.y)] -= 1.0;
  }
  const double step = learning_rate / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Example& ex = examples[batch[i]];
    for (std::size_t k = 0; k < kNumLabels; ++k) {
      const double g = residual[i][k] * step;
      for (const auto& [j, v] : ex.x) model.w(k, j) -= g * v;
      model.bias[k] -= g;
    }
  }
}

}  // namespace

void FeatureConfig::validate() const {
  if (dim < 1) throw ValidationError("feature dimension must be at least 1");
  if (dim > std::numeric_limits<std::uint32_t>::max()) {
    throw ValidationError("feature dimension exceeds 2^32");
  }
}

std::uint32_t token_bucket(std::string_view token, std::size_t dim) noexcept {
  return static_cast<std::uint32_t>(fnv1a64(token) % dim);
}

std::vector<std::string> tokenize(std::string_view text) {
  const std::u32string folded = utf8::fold_case(utf8::decode(text));
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < folded.size()) {
    if (!utf8::is_word_char(folded[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < folded.size() && utf8::is_word_char(folded[j])) ++j;
    out.push_back(utf8::encode(std::u32string_view(folded).substr(i, j - i)));
    i = j;
  }
  return out;
}

std::optional<std::string> primed_keyword(std::string_view prompt) {
  constexpr std::string_view kCloze = "Keyword is: ";
  constexpr std::string_view kPrimed = "Word: ";
  if (const auto pos = prompt.rfind(kCloze); pos != std::string_view::npos) {
    const auto rest = prompt.substr(pos + kCloze.size());
    const std::string word = utf8::to_lower(trim(rest.substr(0, rest.find(". "))));
    if (!word.empty()) return word;
  }
  if (const auto pos = prompt.rfind(kPrimed); pos != std::string_view::npos) {
    const auto rest = prompt.substr(pos + kPrimed.size());
    const std::string word = utf8::to_lower(trim(rest.substr(0, rest.find(" [...]"))));
    if (!word.empty()) return word;
  }
  return std::nullopt;
}

SparseVector featurize(std::string_view prompt, const FeatureConfig& config) {
  config.validate();
  SparseVector raw;
  if (config.unigrams) {
    for (const std::string& tok : tokenize(prompt)) raw.emplace_back(token_bucket(tok, config.dim), 1.0);
  }
  if (config.keyword_identity || config.priming_flag) {
    if (const auto kw = primed_keyword(prompt)) {
      if (config.keyword_identity) {
        raw.emplace_back(token_bucket(std::string(kKeywordSalt) + *kw, config.dim), 1.0);
      }
      if (config.priming_flag) raw.emplace_back(token_bucket(kPrimedSalt, config.dim), 1.0);
    }
  }
  std::sort(raw.begin(), raw.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  SparseVector out;
  for (const auto& [j, v] : raw) {
    if (!out.empty() && out.back().first == j) {
      out.back().second += v;
    } else {
      out.emplace_back(j, v);
    }
  }
  return out;
}

BaselineModel BaselineModel::zeros(const FeatureConfig& features) {
  features.validate();
  BaselineModel m;
  m.features = features;
  m.weights.assign(kNumLabels * features.dim, 0.0);
  return m;
}

std::array<double, kNumLabels> BaselineModel::logits(const SparseVector& x) const {
  std::array<double, kNumLabels> z = bias;
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    for (const auto& [j, v] : x) z[k] += w(k, j) * v;
  }
  return z;
}

ClassScores BaselineModel::predict_proba(const SparseVector& x) const {
  return ClassScores{softmax(logits(x))};
}

ValenceLabel BaselineModel::predict(std::string_view prompt) const {
  return argmax_label(predict_proba(featurize(prompt, features)));
}

void BaselineModel::validate() const {
  features.validate();
  if (weights.size() != kNumLabels * features.dim) {
    throw ValidationError("model weight count does not match its dimension");
  }
  const auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(weights.begin(), weights.end(), finite) ||
      !std::all_of(bias.begin(), bias.end(), finite)) {
    throw ValidationError("model has non-finite parameters");
  }
}

double cross_entropy(const BaselineModel& model, std::span<const Example> examples) {
  if (examples.empty()) return 0.0;
  double total = 0.0;
  for (const Example& ex : examples) {
    const auto z = model.logits(ex.x);
    const double top = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - top);
    total += top + std::log(sum) - z[index_of(ex.y)];
  }
  return total / static_cast<double>(examples.size());
}

Gradient cross_entropy_gradient(const BaselineModel& model, std::span<const Example> examples) {
  Gradient g;
  g.weights.assign(model.weights.size(), 0.0);
  if (examples.empty()) return g;
  const double scale = 1.0 / static_cast<double>(examples.size());
  for (const Example& ex : examples) {
    auto r = softmax(model.logits(ex.x));
    r[index_of(ex.y)] -= 1.0;
    for (std::size_t k = 0; k < kNumLabels; ++k) {
      for (const auto& [j, v] : ex.x) g.weights[k * model.features.dim + j] += r[k] * v * scale;
      g.bias[k] += r[k] * scale;
    }
  }
  return g;
}

void gradient_step(BaselineModel& model, std::span<const Example> examples, double learning_rate) {
  const Gradient g = cross_entropy_gradient(model, examples);
  for (std::size_t i = 0; i < g.weights.size(); ++i) model.weights[i] -= learning_rate * g.weights[i];
  for (std::size_t k = 0; k < kNumLabels; ++k) model.bias[k] -= learning_rate * g.bias[k];
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("learning_rate must be finite and non-negative");
  }
  if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
  if (max_epochs < 1) throw ValidationError("max_epochs must be at least 1");
  if (!(dev_fraction >= 0.0 && dev_fraction < 1.0)) {
    throw ValidationError("dev_fraction must be in [0, 1)");
  }
  features.validate();
}

BaselineModel train_baseline(std::span<const LabeledPrompt> train, const TrainConfig& config,
                             std::span<const LabeledPrompt> dev, TrainReport* report) {
  config.validate();
  std::array<std::size_t, kNumLabels> counts{};
  for (const LabeledPrompt& p : train) ++counts[index_of(p.gold)];
  for (ValenceLabel label : kAllLabels) {
    if (counts[index_of(label)] == 0) {
      throw DomainError("no training example for class " + std::string(to_string(label)));
    }
  }

  std::vector<Example> train_ex;
  std::vector<Example> dev_ex;
  if (!dev.empty()) {
    train_ex = to_examples(train, config.features);
    dev_ex = to_examples(dev, config.features);
  } else {
    const auto n_dev = static_cast<std::size_t>(
        std::llround(static_cast<double>(train.size()) * config.dev_fraction));
    if (n_dev == 0 || n_dev >= train.size()) {
      train_ex = to_examples(train, config.features);
    } else {
      std::vector<bool> held(train.size(), false);
      const auto perm = Rng(mix_seed(config.seed, "dev-slice")).permutation(train.size());
      for (std::size_t i = 0; i < n_dev; ++i) held[perm[i]] = true;
      for (std::size_t i = 0; i < train.size(); ++i) {
        (held[i] ? dev_ex : train_ex)
            .push_back({featurize(train[i].prompt, config.features), train[i].gold});
      }
    }
  }

  BaselineModel model = BaselineModel::zeros(config.features);
  BaselineModel best = model;
  TrainReport rep;
  double best_f1 = -1.0;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto order = Rng(mix_seed(config.seed, epoch)).permutation(train_ex.size());
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      apply_batch(model, train_ex, std::span(order).subspan(start, stop - start),
                  config.learning_rate);
    }
    rep.epochs_run = epoch;
    rep.train_loss.push_back(cross_entropy(model, train_ex));
    if (dev_ex.empty()) continue;
    const double f1 = dev_macro_f1(model, dev_ex);
    const double loss = cross_entropy(model, dev_ex);
    rep.dev_f1.push_back(f1);
    // Dev loss breaks F1 ties, so a saturated dev F1 does not freeze an
    // underfit early epoch.
    if (f1 > best_f1 || (f1 == best_f1 && loss < best_loss)) {
      best_f1 = f1;
      best_loss = loss;
      best = model;
      rep.best_epoch = epoch;
      stale = 0;
    } else if (++stale > config.patience) {
      break;
    }
  }
  if (dev_ex.empty()) {
    rep.best_epoch = rep.epochs_run;
  } else {
    model = std::move(best);
    rep.best_dev_f1 = best_f1;
  }
  if (report) *report = std::move(rep);
  return model;
}

Json model_to_json(const BaselineModel& model) {
  model.validate();
  Json w = Json::object();
  for (ValenceLabel label : kAllLabels) {
    Json entries = Json::array();
    const std::size_t k = index_of(label);
    for (std::size_t j = 0; j < model.features.dim; ++j) {
      if (model.w(k, j) != 0.0) entries.push_back(Json::array({j, model.w(k, j)}));
    }
    w[std::string(to_string(label))] = std::move(entries);
  }
  return {{"format_version", kModelFormatVersion},
          {"D", model.features.dim},
          {"flags",
           {{"unigrams", model.features.unigrams},
            {"keyword_identity", model.features.keyword_identity},
            {"priming_flag", model.features.priming_flag}}},
          {"W", std::move(w)},
          {"b", model.bias}};
}

BaselineModel model_from_json(const Json& json) {
  const int version = require_field<int>(json, "format_version");
  if (version != kModelFormatVersion) {
    throw ValidationError("unsupported model format_version " + std::to_string(version));
  }
  FeatureConfig features;
  features.dim = require_field<std::size_t>(json, "D");
  const Json flags = require_field<Json>(json, "flags");
  features.unigrams = require_field<bool>(flags, "unigrams");
  features.keyword_identity = require_field<bool>(flags, "keyword_identity");
  features.priming_flag = require_field<bool>(flags, "priming_flag");
  BaselineModel model = BaselineModel::zeros(features);
  const auto b = require_field<std::vector<double>>(json, "b");
  if (b.size() != kNumLabels) throw ValidationError("model bias must have 3 entries");
  std::copy(b.begin(), b.end(), model.bias.begin());
  const Json w = require_field<Json>(json, "W");
  for (ValenceLabel label : kAllLabels) {
    const auto entries =
        require_field<std::vector<std::pair<std::size_t, double>>>(w, std::string(to_string(label)).c_str());
    for (const auto& [j, v] : entries) {
      if (j >= features.dim) throw ValidationError("model weight bucket out of range");
      model.w(index_of(label), j) = v;
    }
  }
  model.validate();
  return model;
}

void save_model(const std::filesystem::path& path, const BaselineModel& model) {
  write_json(path, model_to_json(model));
}

BaselineModel load_model(const std::filesystem::path& path) {
  return model_from_json(read_json(path));
}

}  // namespace valence
