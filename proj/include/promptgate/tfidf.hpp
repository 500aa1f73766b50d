#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "promptgate/normalizer.hpp"

namespace promptgate {

struct EmptyCorpus : std::runtime_error {
  EmptyCorpus() : std::runtime_error("tfidf fit: empty corpus") {}
};

// Sorted sparse vector with cached L2 norm. Zero weights are never stored.
struct SparseVector {
  std::vector<std::pair<uint32_t, double>> entries;
  double norm = 0.0;

  bool empty() const { return entries.empty(); }

  static SparseVector from_entries(
      std::vector<std::pair<uint32_t, double>> e) {
    std::sort(e.begin(), e.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    SparseVector v;
    double sq = 0.0;
    for (auto& [i, w] : e) {
      if (w == 0.0) continue;
      sq += w * w;
      v.entries.emplace_back(i, w);
    }
    v.norm = std::sqrt(sq);
    return v;
  }

  void scale(double f) {
    for (auto& [i, w] : entries) w *= f;
    norm *= f;
  }
};

struct TfidfParams {
  int ngram_lo = 1;
  int ngram_hi = 2;
  int min_df = 2;
  std::optional<size_t> max_features = 50000;
};

namespace detail {

inline std::vector<std::string> extract_ngrams(const std::string& clean_text,
                                               int lo, int hi) {
  std::vector<std::string> tokens = split_ws_tokens(clean_text);
  std::vector<std::string> grams;
  for (int n = lo; n <= hi; ++n) {
    if (tokens.size() < static_cast<size_t>(n)) break;
    for (size_t i = 0; i + n <= tokens.size(); ++i) {
      std::string g = tokens[i];
      for (int k = 1; k < n; ++k) {
        g.push_back(' ');
        g += tokens[i + k];
      }
      grams.push_back(std::move(g));
    }
  }
  return grams;
}

}  // namespace detail

class TfidfVocabulary {
 public:
  TfidfVocabulary() = default;

  // Vocabulary = n-grams within range present in >= min_df documents,
  // truncated to the max_features highest-document-frequency terms (ties
  // lexicographic). Indices are assigned in lexicographic term order.
  // idf = ln((1 + N) / (1 + df)) + 1.
  static TfidfVocabulary fit(std::span<const CleanPrompt> corpus,
                             const TfidfParams& params) {
    if (corpus.empty()) throw EmptyCorpus();
    if (params.ngram_lo < 1 || params.ngram_lo > params.ngram_hi) {
      throw std::invalid_argument("tfidf fit: bad ngram range");
    }
    if (params.min_df < 1) throw std::invalid_argument("tfidf fit: min_df < 1");

    std::map<std::string, size_t> df;
    for (const auto& doc : corpus) {
      auto grams =
          detail::extract_ngrams(doc.text, params.ngram_lo, params.ngram_hi);
      std::sort(grams.begin(), grams.end());
      grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
      for (auto& g : grams) ++df[g];
    }

    std::vector<std::pair<std::string, size_t>> selected;
    for (auto& [term, count] : df) {
      if (count >= static_cast<size_t>(params.min_df)) {
        selected.emplace_back(term, count);
      }
    }
    if (params.max_features && selected.size() > *params.max_features) {
      std::sort(selected.begin(), selected.end(),
                [](const auto& a, const auto& b) {
                  if (a.second != b.second) return a.second > b.second;
                  return a.first < b.first;
                });
      selected.resize(*params.max_features);
      std::sort(selected.begin(), selected.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
    }

    TfidfVocabulary vocab;
    vocab.params_ = params;
    const double n_docs = static_cast<double>(corpus.size());
    vocab.terms_.reserve(selected.size());
    vocab.idf_.reserve(selected.size());
    for (auto& [term, count] : selected) {
      vocab.term_to_index_.emplace(term, static_cast<uint32_t>(vocab.terms_.size()));
      vocab.terms_.push_back(term);
      vocab.idf_.push_back(
          std::log((1.0 + n_docs) / (1.0 + static_cast<double>(count))) + 1.0);
    }
    return vocab;
  }

  // weight(t) = count(t) * idf(t), L2-normalized. Prompts with no
  // in-vocabulary terms transform to the zero vector.
  SparseVector transform(const CleanPrompt& prompt) const {
    std::unordered_map<uint32_t, double> counts;
    for (auto& g :
         detail::extract_ngrams(prompt.text, params_.ngram_lo, params_.ngram_hi)) {
      auto it = term_to_index_.find(g);
      if (it != term_to_index_.end()) counts[it->second] += 1.0;
    }
    std::vector<std::pair<uint32_t, double>> entries;
    entries.reserve(counts.size());
    for (auto& [idx, c] : counts) entries.emplace_back(idx, c * idf_[idx]);
    SparseVector v = SparseVector::from_entries(std::move(entries));
    if (v.norm > 0.0) v.scale(1.0 / v.norm);
    return v;
  }

  size_t size() const { return terms_.size(); }
  const std::vector<std::string>& terms() const { return terms_; }
  const std::vector<double>& idf() const { return idf_; }
  const TfidfParams& params() const { return params_; }

  std::optional<uint32_t> index_of(const std::string& term) const {
    auto it = term_to_index_.find(term);
    if (it == term_to_index_.end()) return std::nullopt;
    return it->second;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["format"] = "promptgate.tfidf";
    j["version"] = 1;
    j["ngram_lo"] = params_.ngram_lo;
    j["ngram_hi"] = params_.ngram_hi;
    j["min_df"] = params_.min_df;
    if (params_.max_features) {
      j["max_features"] = *params_.max_features;
    } else {
      j["max_features"] = nullptr;
    }
    j["terms"] = terms_;
    j["idf"] = idf_;
    return j;
  }

  static TfidfVocabulary from_json(const nlohmann::json& j) {
    if (!j.contains("format") || j["format"] != "promptgate.tfidf") {
      throw std::runtime_error("tfidf load: bad format header");
    }
    if (j.at("version").get<int>() != 1) {
      throw std::runtime_error("tfidf load: unsupported version");
    }
    TfidfVocabulary v;
    v.params_.ngram_lo = j.at("ngram_lo").get<int>();
    v.params_.ngram_hi = j.at("ngram_hi").get<int>();
    v.params_.min_df = j.at("min_df").get<int>();
    if (j.at("max_features").is_null()) {
      v.params_.max_features = std::nullopt;
    } else {
      v.params_.max_features = j.at("max_features").get<size_t>();
    }
    v.terms_ = j.at("terms").get<std::vector<std::string>>();
    v.idf_ = j.at("idf").get<std::vector<double>>();
    if (v.terms_.size() != v.idf_.size()) {
      throw std::runtime_error("tfidf load: terms/idf length mismatch");
    }
    for (uint32_t i = 0; i < v.terms_.size(); ++i) {
      v.term_to_index_.emplace(v.terms_[i], i);
    }
    return v;
  }

 private:
  std::unordered_map<std::string, uint32_t> term_to_index_;
  std::vector<std::string> terms_;
  std::vector<double> idf_;
  TfidfParams params_;
};

}  // namespace promptgate
