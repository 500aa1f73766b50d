#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "promptgate/util.hpp"

namespace promptgate {

enum class PosTag { kNoun, kVerb, kAdj, kAdv, kUnknown };

struct NormalizerConfig {
  std::set<std::string> stopword_set;
  // Key: emoji codepoint sequence; value: ASCII alias in [a-z_].
  std::map<std::u32string, std::string> emoji_alias_table;
  std::unordered_map<std::string, std::string> lemma_exceptions;
  bool enable_lemmatization = true;

  size_t max_alias_sequence_len() const {
    size_t n = 0;
    for (const auto& [k, v] : emoji_alias_table) n = std::max(n, k.size());
    return n;
  }

  // Stable content hash used to bind serialized models to the exact
  // normalizer they were trained with.
  uint64_t content_hash() const {
    uint64_t h = kFnvOffset;
    for (const auto& w : stopword_set) {
      h = fnv1a(w, h);
      h = fnv1a("\x1f", h);
    }
    h = fnv1a("\x1e", h);
    for (const auto& [seq, alias] : emoji_alias_table) {
      for (char32_t cp : seq) {
        char buf[9];
        std::snprintf(buf, sizeof(buf), "%08x", static_cast<unsigned>(cp));
        h = fnv1a(buf, h);
      }
      h = fnv1a("\x1f", h);
      h = fnv1a(alias, h);
      h = fnv1a("\x1e", h);
    }
    std::vector<std::pair<std::string, std::string>> ex(
        lemma_exceptions.begin(), lemma_exceptions.end());
    std::sort(ex.begin(), ex.end());
    for (const auto& [k, v] : ex) {
      h = fnv1a(k, h);
      h = fnv1a("\x1f", h);
      h = fnv1a(v, h);
      h = fnv1a("\x1e", h);
    }
    h = fnv1a(enable_lemmatization ? "1" : "0", h);
    return h;
  }
};

struct CleanPrompt {
  std::string text;        // single space-joined tokens, possibly empty
  size_t token_count = 0;
};

// ---------------------------------------------------------------------------
// POS tagging: closed-class table plus suffix heuristics. The classifier,
// not the tagger, carries the discriminative load.

inline PosTag pos_tag(std::string_view token, std::string_view context = {}) {
  static const std::unordered_map<std::string_view, PosTag> kClosedClass = {
      {"be", PosTag::kVerb},     {"is", PosTag::kVerb},
      {"am", PosTag::kVerb},     {"are", PosTag::kVerb},
      {"was", PosTag::kVerb},    {"were", PosTag::kVerb},
      {"been", PosTag::kVerb},   {"being", PosTag::kVerb},
      {"have", PosTag::kVerb},   {"has", PosTag::kVerb},
      {"had", PosTag::kVerb},    {"do", PosTag::kVerb},
      {"does", PosTag::kVerb},   {"did", PosTag::kVerb},
      {"go", PosTag::kVerb},     {"goes", PosTag::kVerb},
      {"went", PosTag::kVerb},   {"can", PosTag::kVerb},
      {"could", PosTag::kVerb},  {"will", PosTag::kVerb},
      {"would", PosTag::kVerb},  {"shall", PosTag::kVerb},
      {"should", PosTag::kVerb}, {"may", PosTag::kVerb},
      {"might", PosTag::kVerb},  {"must", PosTag::kVerb},
      {"not", PosTag::kAdv},     {"never", PosTag::kAdv},
      {"always", PosTag::kAdv},  {"often", PosTag::kAdv},
      {"very", PosTag::kAdv},    {"too", PosTag::kAdv},
      {"also", PosTag::kAdv},    {"now", PosTag::kAdv},
      {"here", PosTag::kAdv},    {"there", PosTag::kAdv},
      {"good", PosTag::kAdj},    {"bad", PosTag::kAdj},
      {"new", PosTag::kAdj},     {"old", PosTag::kAdj},
      {"big", PosTag::kAdj},     {"small", PosTag::kAdj},
  };
  auto it = kClosedClass.find(token);
  if (it != kClosedClass.end()) return it->second;
  // "to <token>" reads as an infinitive.
  if (context == "to") return PosTag::kVerb;
  if (token.size() > 3 && token.ends_with("ly")) return PosTag::kAdv;
  if (token.size() > 4 && token.ends_with("ing")) return PosTag::kVerb;
  if (token.size() > 3 && token.ends_with("ed")) return PosTag::kVerb;
  return PosTag::kNoun;
}

// ---------------------------------------------------------------------------
// Rule-based lemmatizer with an exception table.

namespace detail {

inline bool is_vowel(char c) {
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

// Undouble a trailing doubled consonant ("stopp" -> "stop"); ll/ss/zz/ff
// stay ("call", "pass").
inline void undouble(std::string& s) {
  size_t n = s.size();
  if (n < 3) return;
  char c = s[n - 1];
  if (c != s[n - 2] || is_vowel(c)) return;
  if (c == 'l' || c == 's' || c == 'z' || c == 'f') return;
  s.pop_back();
}

// Restore a dropped final 'e' after -ing/-ed/-er stripping when the stem
// ends consonant-vowel-consonant ("mak" -> "make"); w/x/y endings never
// took the e.
inline void restore_e(std::string& s) {
  size_t n = s.size();
  if (n < 3) return;
  char c2 = s[n - 1], c1 = s[n - 2], c0 = s[n - 3];
  if (!is_vowel(c2) && c2 != 'w' && c2 != 'x' && c2 != 'y' && is_vowel(c1) &&
      !is_vowel(c0)) {
    s.push_back('e');
  }
}

inline std::string strip_plural(std::string token) {
  size_t n = token.size();
  if (n > 4 && token.ends_with("ies")) {
    token.erase(n - 3);
    token.push_back('y');
    return token;
  }
  if (n > 4 && token.ends_with("sses")) {
    token.erase(n - 2);
    return token;
  }
  if (n > 3 && (token.ends_with("xes") || token.ends_with("zes") ||
                token.ends_with("ches") || token.ends_with("shes") ||
                token.ends_with("oes"))) {
    token.erase(token.size() - 2);
    return token;
  }
  if (n > 3 && token.ends_with('s') && !token.ends_with("ss") &&
      !token.ends_with("us") && !token.ends_with("is")) {
    token.pop_back();
    return token;
  }
  return token;
}

}  // namespace detail

// Token must match ^[a-z]+$. Exceptions win; otherwise suffix rules keyed
// on the POS hint. Idempotent over the bundled lexicon.
inline std::string lemmatize(const std::string& token, PosTag pos_hint,
                             const NormalizerConfig& cfg) {
  if (!cfg.enable_lemmatization) return token;
  auto it = cfg.lemma_exceptions.find(token);
  if (it != cfg.lemma_exceptions.end()) return it->second;

  std::string out = token;
  size_t n = token.size();
  switch (pos_hint) {
    case PosTag::kVerb: {
      if (n >= 6 && token.ends_with("ing")) {
        out.erase(n - 3);
        detail::undouble(out);
        detail::restore_e(out);
      } else if (n >= 5 && token.ends_with("ied")) {
        out.erase(n - 3);
        out.push_back('y');
      } else if (n >= 5 && token.ends_with("ed") && !token.ends_with("eed")) {
        out.erase(n - 2);
        detail::undouble(out);
        detail::restore_e(out);
      } else if (token.ends_with('s')) {
        out = detail::strip_plural(out);
      }
      break;
    }
    case PosTag::kNoun:
    case PosTag::kUnknown: {
      if (token.ends_with('s')) out = detail::strip_plural(out);
      break;
    }
    case PosTag::kAdj:
    case PosTag::kAdv: {
      if (n >= 6 && token.ends_with("iest")) {
        out.erase(n - 4);
        out.push_back('y');
      } else if (n >= 5 && token.ends_with("ier")) {
        out.erase(n - 3);
        out.push_back('y');
      } else if (n >= 5 && token.ends_with("est")) {
        out.erase(n - 3);
        detail::undouble(out);
        detail::restore_e(out);
      } else if (n >= 5 && token.ends_with("er")) {
        out.erase(n - 2);
        detail::undouble(out);
        detail::restore_e(out);
      }
      break;
    }
  }
  if (out.empty()) return token;
  return out;
}

// ---------------------------------------------------------------------------
// Normalization pipeline. Steps, in order: lowercase, emoji -> alias,
// punctuation/symbol -> space, whitespace tokenization, alphabetic-token
// filter, stopword removal, lemmatization, single-space join. Alias tokens
// are injected by step 2 and skip the alphabetic filter and lemmatization
// (aliases may contain '_').

inline CleanPrompt normalize(std::string_view raw,
                             const NormalizerConfig& cfg) {
  std::vector<char32_t> cps = decode_utf8(raw);
  // Lowercase ASCII letters. Retained tokens are [a-z]+, so ASCII folding
  // is the only case mapping that can affect the output.
  for (char32_t& cp : cps) {
    if (cp >= U'A' && cp <= U'Z') cp = cp - U'A' + U'a';
  }

  const size_t max_seq = cfg.max_alias_sequence_len();
  struct RawToken {
    std::string text;
    bool is_alias = false;
  };
  std::vector<RawToken> tokens;
  std::string current;
  bool current_alias_only = false;  // set iff current holds exactly one alias
  auto flush = [&]() {
    if (!current.empty()) {
      tokens.push_back({current, current_alias_only});
      current.clear();
    }
    current_alias_only = false;
  };

  size_t i = 0;
  while (i < cps.size()) {
    // Longest-match emoji alias substitution.
    bool matched = false;
    if (max_seq > 0) {
      size_t limit = std::min(max_seq, cps.size() - i);
      for (size_t len = limit; len >= 1 && !matched; --len) {
        std::u32string seq(cps.begin() + static_cast<long>(i),
                           cps.begin() + static_cast<long>(i + len));
        auto it = cfg.emoji_alias_table.find(seq);
        if (it != cfg.emoji_alias_table.end()) {
          flush();
          size_t consumed = i + len;
          // A trailing variation selector belongs to the emoji.
          if (consumed < cps.size() && is_variation_selector(cps[consumed])) {
            ++consumed;
          }
          tokens.push_back({it->second, true});
          i = consumed;
          matched = true;
        }
      }
    }
    if (matched) continue;

    char32_t cp = cps[i++];
    if (is_space_cp(cp) || is_punct_or_symbol(cp)) {
      flush();
    } else if (is_variation_selector(cp)) {
      // dropped
    } else {
      append_utf8(current, cp);
      current_alias_only = false;
    }
  }
  flush();

  // Alphabetic filter; alias tokens pass through.
  std::vector<RawToken> kept;
  kept.reserve(tokens.size());
  for (auto& t : tokens) {
    if (t.is_alias || is_ascii_lower_alpha(t.text)) kept.push_back(std::move(t));
  }

  // POS context is the preceding kept token, recorded before stopwords go.
  std::vector<std::string> out_tokens;
  std::string prev;
  for (const auto& t : kept) {
    std::string context = prev;
    prev = t.text;
    if (cfg.stopword_set.count(t.text)) continue;
    if (t.is_alias) {
      out_tokens.push_back(t.text);
    } else {
      out_tokens.push_back(lemmatize(t.text, pos_tag(t.text, context), cfg));
    }
  }

  CleanPrompt cp;
  cp.token_count = out_tokens.size();
  for (size_t k = 0; k < out_tokens.size(); ++k) {
    if (k) cp.text.push_back(' ');
    cp.text += out_tokens[k];
  }
  return cp;
}

// ---------------------------------------------------------------------------
// Data file loading. All files are UTF-8 with LF line endings.
//   stopwords.txt        one token per line
//   emoji_aliases.tsv    space-separated hex codepoints TAB alias
//   lemma_exceptions.tsv token TAB lemma

namespace detail {

inline std::vector<std::string> read_lines(const std::string& path) {
  std::string content = read_file(path);
  std::vector<std::string> lines;
  std::string line;
  for (char c : content) {
    if (c == '\n') {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(line);
      line.clear();
    } else {
      line.push_back(c);
    }
  }
  if (!line.empty()) lines.push_back(line);
  return lines;
}

}  // namespace detail

inline NormalizerConfig load_normalizer_config(const std::string& data_dir) {
  NormalizerConfig cfg;
  for (const auto& line : detail::read_lines(data_dir + "/stopwords.txt")) {
    if (line.empty() || line[0] == '#') continue;
    if (!is_ascii_lower_alpha(line)) {
      throw std::runtime_error("stopwords.txt: non-alphabetic entry: " + line);
    }
    cfg.stopword_set.insert(line);
  }
  for (const auto& line : detail::read_lines(data_dir + "/emoji_aliases.tsv")) {
    if (line.empty() || line[0] == '#') continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error("emoji_aliases.tsv: missing tab: " + line);
    }
    std::u32string seq;
    std::istringstream hexes(line.substr(0, tab));
    std::string hex;
    while (hexes >> hex) {
      seq.push_back(static_cast<char32_t>(std::stoul(hex, nullptr, 16)));
    }
    std::string alias = line.substr(tab + 1);
    for (char c : alias) {
      if (!((c >= 'a' && c <= 'z') || c == '_')) {
        throw std::runtime_error("emoji_aliases.tsv: bad alias: " + alias);
      }
    }
    if (seq.empty() || alias.empty()) {
      throw std::runtime_error("emoji_aliases.tsv: empty entry: " + line);
    }
    cfg.emoji_alias_table[seq] = alias;
  }
  for (const auto& line :
       detail::read_lines(data_dir + "/lemma_exceptions.tsv")) {
    if (line.empty() || line[0] == '#') continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error("lemma_exceptions.tsv: missing tab: " + line);
    }
    cfg.lemma_exceptions[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return cfg;
}

}  // namespace promptgate
