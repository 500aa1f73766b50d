#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "promptgate/stage.hpp"
#include "promptgate/taxonomy.hpp"
#include "promptgate/tfidf.hpp"
#include "promptgate/util.hpp"

namespace promptgate {

struct DegenerateData : std::runtime_error {
  explicit DegenerateData(const std::string& what) : std::runtime_error(what) {}
};

struct DimensionMismatch : std::runtime_error {
  explicit DimensionMismatch(const std::string& what)
      : std::runtime_error(what) {}
};

// One-vs-rest linear SVM. Weights are dense over the bound vocabulary.
struct SvmModel {
  size_t dim = 0;
  std::array<std::vector<double>, kNumLabels> weights;
  std::array<double, kNumLabels> biases{};
  double lambda = 1e-4;
  int epochs = 20;
  uint32_t seed = 0;
};

struct SvmPrediction {
  Label label = Label::kBenign;
  std::array<double, kNumLabels> margin_scores{};
};

using LabeledVector = std::pair<SparseVector, Label>;

namespace detail {

inline double sparse_dot(const SparseVector& v, std::span<const double> w) {
  double d = 0.0;
  for (const auto& [i, x] : v.entries) d += w[i] * x;
  return d;
}

// Pegasos state with the usual scale trick: w = scale * u, squared norm
// tracked incrementally so the projection step stays O(nnz).
struct PegasosState {
  std::vector<double> u;
  double scale = 1.0;
  double wnorm2 = 0.0;
  double bias = 0.0;

  explicit PegasosState(size_t dim) : u(dim, 0.0) {}

  double dot(const SparseVector& x) const {
    double d = 0.0;
    for (const auto& [i, v] : x.entries) d += u[i] * v;
    return d * scale;
  }

  void rescale(double f) {
    scale *= f;
    wnorm2 *= f * f;
    if (std::abs(scale) < 1e-9) materialize();
  }

  // w += c * x, given dot = w·x before the addition
  void add(const SparseVector& x, double c, double w_dot_x) {
    for (const auto& [i, v] : x.entries) u[i] += (c / scale) * v;
    wnorm2 += 2.0 * c * w_dot_x + c * c * x.norm * x.norm;
    if (wnorm2 < 0.0) wnorm2 = 0.0;
  }

  void materialize() {
    for (double& v : u) v *= scale;
    scale = 1.0;
  }

  std::vector<double> dense() const {
    std::vector<double> w(u);
    for (double& v : w) v *= scale;
    return w;
  }
};

}  // namespace detail

// Full-batch L2-regularized hinge objective for a single binary problem:
// (lambda/2)||w||^2 + (1/n) sum max(0, 1 - y(w.x + b)). Targets y are +/-1.
inline double svm_objective(std::span<const std::pair<SparseVector, int>> data,
                            std::span<const double> w, double b,
                            double lambda) {
  double reg = 0.0;
  for (double v : w) reg += v * v;
  double loss = 0.0;
  for (const auto& [x, y] : data) {
    double margin = y * (detail::sparse_dot(x, w) + b);
    loss += std::max(0.0, 1.0 - margin);
  }
  return 0.5 * lambda * reg +
         loss / static_cast<double>(data.size());
}

// Analytic subgradient of svm_objective at (w, b). At points where some
// margin is exactly 1 this picks the hinge-active side.
inline void svm_gradient(std::span<const std::pair<SparseVector, int>> data,
                         std::span<const double> w, double b, double lambda,
                         std::span<double> grad_w, double& grad_b) {
  const double inv_n = 1.0 / static_cast<double>(data.size());
  for (size_t i = 0; i < w.size(); ++i) grad_w[i] = lambda * w[i];
  grad_b = 0.0;
  for (const auto& [x, y] : data) {
    double margin = y * (detail::sparse_dot(x, w) + b);
    if (margin < 1.0) {
      for (const auto& [idx, v] : x.entries) grad_w[idx] -= inv_n * y * v;
      grad_b -= inv_n * y;
    }
  }
}

// Pegasos-style primal SGD, one-vs-rest. Step size 1/(lambda*t), seeded
// shuffles, projection onto the 1/sqrt(lambda) ball, epoch-averaged
// iterate. Deterministic for a fixed (data order, seed).
inline SvmModel train(std::span<const LabeledVector> data, size_t dim,
                      double lambda = 1e-4, int epochs = 20,
                      uint32_t seed = 42) {
  if (data.empty()) throw DegenerateData("svm train: empty data");
  if (lambda <= 0.0) throw std::invalid_argument("svm train: lambda <= 0");
  std::array<size_t, kNumLabels> per_class{};
  for (const auto& [v, label] : data) {
    ++per_class[static_cast<int>(label)];
    for (const auto& [i, w] : v.entries) {
      if (i >= dim) throw DimensionMismatch("svm train: index >= dim");
    }
  }
  for (int c = 0; c < kNumLabels; ++c) {
    if (per_class[c] == 0) {
      throw DegenerateData("svm train: class with zero examples: " +
                           label_names()[c]);
    }
  }

  SvmModel model;
  model.dim = dim;
  model.lambda = lambda;
  model.epochs = epochs;
  model.seed = seed;

  const double radius2 = 1.0 / lambda;
  for (int c = 0; c < kNumLabels; ++c) {
    detail::PegasosState state(dim);
    std::vector<double> avg_w(dim, 0.0);
    double avg_b = 0.0;
    std::vector<size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937 rng(seed + static_cast<uint32_t>(c));

    size_t t = 0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      for (size_t idx : order) {
        ++t;
        const auto& [x, label] = data[idx];
        const double y = (static_cast<int>(label) == c) ? 1.0 : -1.0;
        const double eta = 1.0 / (lambda * static_cast<double>(t));
        const double margin = y * (state.dot(x) + state.bias);
        state.rescale(1.0 - 1.0 / static_cast<double>(t));
        if (margin < 1.0) {
          state.add(x, eta * y, state.dot(x));
          state.bias += eta * y;
        }
        if (state.wnorm2 > radius2) {
          state.rescale(std::sqrt(radius2 / state.wnorm2));
        }
      }
      std::vector<double> snapshot = state.dense();
      for (size_t i = 0; i < dim; ++i) avg_w[i] += snapshot[i];
      avg_b += state.bias;
    }
    const double inv_e = 1.0 / static_cast<double>(epochs);
    for (double& v : avg_w) v *= inv_e;
    model.weights[c] = std::move(avg_w);
    model.biases[c] = avg_b * inv_e;
  }
  return model;
}

// margin_scores[c] = w_c . v + b_c; argmax, ties to the earlier label.
inline SvmPrediction predict(const SparseVector& v, const SvmModel& model) {
  for (const auto& [i, w] : v.entries) {
    if (i >= model.dim) {
      throw DimensionMismatch("svm predict: feature index " +
                              std::to_string(i) + " >= dim " +
                              std::to_string(model.dim));
    }
  }
  SvmPrediction pred;
  for (int c = 0; c < kNumLabels; ++c) {
    pred.margin_scores[c] =
        detail::sparse_dot(v, model.weights[c]) + model.biases[c];
  }
  int best = 0;
  for (int c = 1; c < kNumLabels; ++c) {
    if (pred.margin_scores[c] > pred.margin_scores[best]) best = c;
  }
  pred.label = static_cast<Label>(best);
  return pred;
}

// ---------------------------------------------------------------------------
// Model bundle: normalizer hash + vocabulary + SVM weights, serialized as
// one artifact. The loader refuses bundles whose normalizer hash does not
// match the active configuration.

struct SvmBundle {
  NormalizerConfig normalizer;
  TfidfVocabulary vocab;
  SvmModel model;
};

inline nlohmann::json bundle_to_json(const SvmBundle& bundle) {
  nlohmann::json j;
  j["format"] = "promptgate.svm_bundle";
  j["version"] = 1;
  char hash[17];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(bundle.normalizer.content_hash()));
  j["normalizer_hash"] = hash;
  j["vocab"] = bundle.vocab.to_json();
  nlohmann::json svm;
  svm["labels"] = label_names();
  svm["dim"] = bundle.model.dim;
  svm["lambda"] = bundle.model.lambda;
  svm["epochs"] = bundle.model.epochs;
  svm["seed"] = bundle.model.seed;
  svm["biases"] = bundle.model.biases;
  svm["weights"] = bundle.model.weights;
  j["svm"] = svm;
  return j;
}

// `normalizer` is the active configuration; the bundle binds to it by hash.
inline SvmBundle bundle_from_json(const nlohmann::json& j,
                                  NormalizerConfig normalizer) {
  if (!j.contains("format") || j["format"] != "promptgate.svm_bundle") {
    throw std::runtime_error("svm bundle: bad format header");
  }
  if (j.at("version").get<int>() != 1) {
    throw std::runtime_error("svm bundle: unsupported version");
  }
  char hash[17];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(normalizer.content_hash()));
  if (j.at("normalizer_hash").get<std::string>() != hash) {
    throw std::runtime_error(
        "svm bundle: normalizer hash mismatch (bundle was trained with a "
        "different normalizer configuration)");
  }
  SvmBundle bundle;
  bundle.normalizer = std::move(normalizer);
  bundle.vocab = TfidfVocabulary::from_json(j.at("vocab"));
  const auto& svm = j.at("svm");
  auto labels = svm.at("labels").get<std::vector<std::string>>();
  if (labels != std::vector<std::string>(label_names().begin(),
                                         label_names().end())) {
    throw std::runtime_error("svm bundle: unexpected label order");
  }
  bundle.model.dim = svm.at("dim").get<size_t>();
  bundle.model.lambda = svm.at("lambda").get<double>();
  bundle.model.epochs = svm.at("epochs").get<int>();
  bundle.model.seed = svm.at("seed").get<uint32_t>();
  auto biases = svm.at("biases").get<std::vector<double>>();
  auto weights = svm.at("weights").get<std::vector<std::vector<double>>>();
  if (biases.size() != kNumLabels || weights.size() != kNumLabels) {
    throw std::runtime_error("svm bundle: wrong label count");
  }
  if (bundle.model.dim != bundle.vocab.size()) {
    throw std::runtime_error("svm bundle: dim does not match vocabulary");
  }
  for (int c = 0; c < kNumLabels; ++c) {
    if (weights[c].size() != bundle.model.dim) {
      throw std::runtime_error("svm bundle: weight vector length mismatch");
    }
    bundle.model.weights[c] = std::move(weights[c]);
    bundle.model.biases[c] = biases[c];
  }
  return bundle;
}

inline void save_bundle(const SvmBundle& bundle, const std::string& path) {
  write_file(path, bundle_to_json(bundle).dump());
}

inline SvmBundle load_bundle(const std::string& path,
                             NormalizerConfig normalizer) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("svm bundle: unparseable artifact " + path +
                             ": " + e.what());
  }
  return bundle_from_json(j, std::move(normalizer));
}

// normalize -> transform -> predict; allow iff predicted benign.
inline StageDecision svm_stage_analyse(std::string_view raw,
                                       const SvmBundle& bundle) {
  Stopwatch timer;
  CleanPrompt clean = normalize(raw, bundle.normalizer);
  SparseVector v = bundle.vocab.transform(clean);
  SvmPrediction pred = predict(v, bundle.model);
  StageDecision d;
  d.stage_name = "svm";
  d.decision =
      pred.label == Label::kBenign ? Decision::kAllow : Decision::kBlock;
  d.confidence = pred.margin_scores[static_cast<int>(pred.label)];
  d.matched_features.push_back("label=" + to_string(pred.label));
  for (int c = 0; c < kNumLabels; ++c) {
    d.matched_features.push_back(
        "margin[" + label_names()[c] +
        "]=" + std::to_string(pred.margin_scores[c]));
  }
  d.elapsed_ms = timer.elapsed_ms();
  return d;
}

class SvmStage : public Stage {
 public:
  explicit SvmStage(SvmBundle bundle) : bundle_(std::move(bundle)) {
    if (bundle_.model.dim != bundle_.vocab.size()) {
      throw DimensionMismatch("svm stage: model/vocabulary dim mismatch");
    }
  }

  const std::string& name() const override { return name_; }

  StageDecision analyse(std::string_view raw) const override {
    return svm_stage_analyse(raw, bundle_);
  }

  const SvmBundle& bundle() const { return bundle_; }

 private:
  std::string name_ = "svm";
  SvmBundle bundle_;
};

}  // namespace promptgate
