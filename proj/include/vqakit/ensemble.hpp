#pragma once

// Levenshtein-consensus answer selection across several models.
//
// For one question the candidates are compared on normalized copies of their
// answers. A strict-majority normalized answer wins outright; otherwise the
// medoid wins: the candidate whose normalized answer has the smallest summed
// edit distance to every other candidate. The winner's original string is
// returned, so the result is always one of the inputs.

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vqakit/error.hpp"
#include "vqakit/textkit.hpp"

namespace vqakit {

struct Candidate {
  std::string model_id;
  std::string answer;
};

struct CandidateSet {
  std::string question_key;
  std::vector<Candidate> candidates;
};

// Order in which medoid ties are resolved. Only the order of the last entry
// depends on input order; a set reaching it holds several candidates with the
// same normalized answer, which are interchangeable up to surface form.
enum class TieBreak {
  kSmallerTotalDistance,
  kHigherFrequency,
  kShorterAnswer,
  kLexicographicallySmaller,
  kEarlierModel,
};

inline constexpr TieBreak kTieBreakChain[] = {
    TieBreak::kSmallerTotalDistance, TieBreak::kHigherFrequency,
    TieBreak::kShorterAnswer, TieBreak::kLexicographicallySmaller,
    TieBreak::kEarlierModel};

struct EnsembleConfig {
  NormalizationRules rules;  // applied to comparison copies only
};

struct EnsembleResult {
  std::string question_key;
  std::string answer;
  std::string winning_model;
  EditDistance total_distance = 0;
  bool by_majority = false;

  friend bool operator==(const EnsembleResult&,
                         const EnsembleResult&) = default;
};

namespace detail {

struct Scored {
  std::size_t index;
  std::string normalized;
  std::size_t frequency;
  std::size_t length;
  EditDistance total;
};

inline bool better(const Scored& a, const Scored& b) {
  for (TieBreak rule : kTieBreakChain) {
    switch (rule) {
      case TieBreak::kSmallerTotalDistance:
        if (a.total != b.total) return a.total < b.total;
        break;
      case TieBreak::kHigherFrequency:
        if (a.frequency != b.frequency) return a.frequency > b.frequency;
        break;
      case TieBreak::kShorterAnswer:
        if (a.length != b.length) return a.length < b.length;
        break;
      case TieBreak::kLexicographicallySmaller:
        if (a.normalized != b.normalized) return a.normalized < b.normalized;
        break;
      case TieBreak::kEarlierModel:
        if (a.index != b.index) return a.index < b.index;
        break;
    }
  }
  return false;
}

}  // namespace detail

inline EnsembleResult select_answer(const CandidateSet& set,
                                    const EnsembleConfig& cfg = {}) {
  const auto& cands = set.candidates;
  if (cands.empty()) {
    throw Error(ErrorCode::kEmptyCandidates,
                "no candidates for question '" + set.question_key + "'");
  }
  {
    std::set<std::string_view> ids;
    for (const auto& c : cands) {
      if (!ids.insert(c.model_id).second) {
        throw Error(ErrorCode::kDuplicateKey,
                    "model id '" + c.model_id + "' repeated for question '" +
                        set.question_key + "'");
      }
    }
  }

  const std::size_t n = cands.size();
  std::vector<std::string> norm;
  std::vector<std::u32string> decoded;
  norm.reserve(n);
  decoded.reserve(n);
  std::map<std::string, std::size_t> frequency;
  for (const auto& c : cands) {
    norm.push_back(normalize_answer(c.answer, cfg.rules));
    decoded.push_back(decode_utf8(norm.back()));
    ++frequency[norm.back()];
  }

  // Pairwise distances are symmetric; compute each unordered pair once.
  std::vector<EditDistance> total(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (norm[i] == norm[j]) continue;
      const EditDistance d = edit_distance(decoded[i], decoded[j]);
      total[i] += d;
      total[j] += d;
    }
  }

  const auto result_for = [&](std::size_t i, bool majority) {
    return EnsembleResult{set.question_key, cands[i].answer,
                          cands[i].model_id, total[i], majority};
  };

  for (std::size_t i = 0; i < n; ++i) {
    if (2 * frequency[norm[i]] > n) return result_for(i, true);
  }

  std::optional<detail::Scored> best;
  for (std::size_t i = 0; i < n; ++i) {
    detail::Scored s{i, norm[i], frequency[norm[i]], decoded[i].size(),
                     total[i]};
    if (!best || detail::better(s, *best)) best = std::move(s);
  }
  return result_for(best->index, false);
}

/// Selects an answer for every set. Results are ordered by question key
/// (byte order) whatever the input order.
inline std::vector<EnsembleResult> ensemble_run(
    const std::vector<CandidateSet>& sets, const EnsembleConfig& cfg = {}) {
  std::vector<const CandidateSet*> order;
  order.reserve(sets.size());
  for (const auto& s : sets) order.push_back(&s);
  std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
    return a->question_key < b->question_key;
  });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (order[i]->question_key == order[i - 1]->question_key) {
      throw Error(ErrorCode::kDuplicateKey,
                  "question '" + order[i]->question_key + "' appears twice");
    }
  }

  std::vector<EnsembleResult> results;
  results.reserve(order.size());
  for (const auto* s : order) results.push_back(select_answer(*s, cfg));
  return results;
}

}  // namespace vqakit
