#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tabqa/error.hpp"
#include "tabqa/text.hpp"

namespace tabqa {

/// Decodes UTF-8 into code points; invalid bytes map to themselves.
inline std::u32string utf8_chars(std::string_view s) {
  std::u32string out;
  for (std::size_t i = 0; i < s.size();) {
    auto c = static_cast<unsigned char>(s[i]);
    int len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 1;
    if (i + static_cast<std::size_t>(len) > s.size()) len = 1;
    char32_t cp = len == 1 ? c : c & (0x7F >> len);
    for (int k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
    out.push_back(cp);
    i += static_cast<std::size_t>(len);
  }
  return out;
}

/// Character-level edit distance (unit-cost insert, delete, substitute).
template <class Seq>
std::size_t levenshtein_seq(const Seq& a, const Seq& b) {
  const Seq& shorter = a.size() < b.size() ? a : b;
  const Seq& longer = a.size() < b.size() ? b : a;
  std::vector<std::size_t> row(shorter.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t j = 1; j <= longer.size(); ++j) {
    std::size_t diag = row[0];
    row[0] = j;
    for (std::size_t i = 1; i <= shorter.size(); ++i) {
      std::size_t up = row[i];
      std::size_t sub = diag + (shorter[i - 1] == longer[j - 1] ? 0 : 1);
      row[i] = std::min({row[i - 1] + 1, up + 1, sub});
      diag = up;
    }
  }
  return row[shorter.size()];
}

inline std::size_t levenshtein(std::string_view a, std::string_view b) {
  return levenshtein_seq(utf8_chars(a), utf8_chars(b));
}

/// S_t = 1 - D / max(|a|, |b|), lengths in characters. Two empty strings are
/// identical (1.0).
inline double text_sim(std::string_view a, std::string_view b) {
  auto ca = utf8_chars(a), cb = utf8_chars(b);
  std::size_t longest = std::max(ca.size(), cb.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(levenshtein_seq(ca, cb)) / static_cast<double>(longest);
}

/// Text in, fixed-dimension unit vector out. Implementations must be
/// deterministic and safe to call concurrently.
class SimilarityProvider {
public:
  virtual ~SimilarityProvider() = default;
  virtual std::size_t dimension() const = 0;
  virtual std::vector<double> encode(std::string_view text) const = 0;
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ProviderError("provider returned vectors of different dimension");
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline std::vector<double> checked_encode(const SimilarityProvider& p, std::string_view s) {
  try {
    auto v = p.encode(s);
    if (v.size() != p.dimension()) throw ProviderError("provider returned a vector of the wrong dimension");
    return v;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw ProviderError(std::string("provider failure: ") + e.what());
  }
}

/// Cosine similarity; vectors are unit-norm so this is their dot product.
inline double semantic_sim(std::string_view a, std::string_view b, const SimilarityProvider& p) {
  return std::clamp(dot(checked_encode(p, a), checked_encode(p, b)), -1.0, 1.0);
}

/// S = S_s - S_t. Positive when the texts share meaning but differ in form.
inline double combined_score(std::string_view q_m, std::string_view q_r, const SimilarityProvider& p) {
  return semantic_sim(q_m, q_r, p) - text_sim(q_m, q_r);
}

/// Hashed word-unigram plus character-trigram counts, TF-IDF weighted over a
/// reference corpus, L2-normalized.
class ReferenceProvider final : public SimilarityProvider {
public:
  explicit ReferenceProvider(const std::vector<std::string>& corpus = {}, std::size_t dim = 4096)
      : dim_(dim) {
    documents_ = corpus.size();
    for (const auto& doc : corpus) {
      auto feats = features(doc);
      std::unordered_set<std::string> uniq(feats.begin(), feats.end());
      for (const auto& f : uniq) ++df_[f];
    }
  }

  std::size_t dimension() const override { return dim_; }

  std::vector<double> encode(std::string_view s) const override {
    std::vector<double> v(dim_, 0.0);
    for (const auto& f : features(s)) v[hash(f) % dim_] += idf(f);
    double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    if (norm == 0) {
      v[0] = 1.0;
      return v;
    }
    for (auto& x : v) x /= norm;
    return v;
  }

  double idf(const std::string& feature) const {
    auto it = df_.find(feature);
    double df = it == df_.end() ? 0.0 : static_cast<double>(it->second);
    return std::log((1.0 + static_cast<double>(documents_)) / (1.0 + df)) + 1.0;
  }

  static std::vector<std::string> features(std::string_view s) {
    std::vector<std::string> out;
    for (const auto& tok : text::tokenize(s)) {
      out.push_back("w:" + tok);
      std::string padded = "#" + tok + "#";
      for (std::size_t i = 0; i + 3 <= padded.size(); ++i) out.push_back("c:" + padded.substr(i, 3));
    }
    return out;
  }

private:
  static std::uint64_t hash(std::string_view s) { return text::fnv1a(s); }

  std::size_t dim_;
  std::size_t documents_ = 0;
  std::unordered_map<std::string, std::size_t> df_;
};

} // namespace tabqa
