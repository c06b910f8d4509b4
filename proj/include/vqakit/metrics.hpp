#pragma once

// VizWiz-style accuracy with a per-answer-type breakdown.
//
// A question's score is the leave-one-out VQA accuracy: the mean over the ten
// nine-answer subsets of min(matches / 3, 1). Every subset score is a multiple
// of 1/3, so a question's score is held exactly as an integer number of
// thirds-of-a-subset in [0, 30] ("units"), and all report figures are exact
// ratios of integers until the final conversion to double or text.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vqakit/error.hpp"
#include "vqakit/textkit.hpp"

namespace vqakit {

inline constexpr std::size_t kHumanAnswers = 10;
inline constexpr std::uint64_t kUnitsPerQuestion = 30;

enum class AnswerType { kYesNo, kNumber, kOther, kUnanswerable };

inline constexpr std::array<AnswerType, 4> kAnswerTypes = {
    AnswerType::kYesNo, AnswerType::kNumber, AnswerType::kOther,
    AnswerType::kUnanswerable};

inline std::string_view to_string(AnswerType t) {
  switch (t) {
    case AnswerType::kYesNo: return "yes/no";
    case AnswerType::kNumber: return "number";
    case AnswerType::kOther: return "other";
    case AnswerType::kUnanswerable: return "unanswerable";
  }
  return "other";
}

inline std::optional<AnswerType> parse_answer_type(std::string_view s) {
  for (AnswerType t : kAnswerTypes) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

struct AnnotationRecord {
  std::string image_id;
  std::string question;
  std::vector<std::string> human_answers;
  AnswerType answer_type = AnswerType::kOther;
  bool answerable = true;
};

struct Prediction {
  std::string image_id;
  std::string answer;
};

struct CategoryScore {
  std::size_t count = 0;
  std::uint64_t units = 0;

  double accuracy_percent() const {
    if (count == 0) return 0.0;
    return 100.0 * static_cast<double>(units) /
           static_cast<double>(kUnitsPerQuestion * count);
  }

  friend bool operator==(const CategoryScore&, const CategoryScore&) = default;
};

struct EvalReport {
  std::map<AnswerType, CategoryScore> per_category;
  CategoryScore overall;
  std::vector<std::string> unmatched;

  double overall_percent() const { return overall.accuracy_percent(); }

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Leave-one-out score of a prediction in units of 1/30, given how many of
/// the ten human answers it matches.
constexpr std::uint64_t question_units(std::size_t matches) {
  const auto capped = [](std::size_t k) -> std::uint64_t {
    return std::min<std::size_t>(k, 3);
  };
  if (matches > kHumanAnswers) matches = kHumanAnswers;
  // `matches` subsets drop a matching answer; the rest keep all of them.
  return matches * capped(matches == 0 ? 0 : matches - 1) +
         (kHumanAnswers - matches) * capped(matches);
}

inline std::size_t count_matches(std::string_view pred,
                                 std::span<const std::string> humans,
                                 const NormalizationRules& rules) {
  const std::string p = normalize_answer(pred, rules);
  return static_cast<std::size_t>(
      std::count_if(humans.begin(), humans.end(), [&](const std::string& h) {
        return normalize_answer(h, rules) == p;
      }));
}

inline double question_accuracy(std::string_view pred,
                                std::span<const std::string> humans,
                                const NormalizationRules& rules = {}) {
  if (humans.size() != kHumanAnswers) {
    throw Error(ErrorCode::kWrongAnswerCount,
                "expected 10 human answers, got " +
                    std::to_string(humans.size()));
  }
  return static_cast<double>(
             question_units(count_matches(pred, humans, rules))) /
         static_cast<double>(kUnitsPerQuestion);
}

/// Joins predictions to annotations on image id. Annotations without a
/// prediction score zero; both kinds of orphan ids land in `unmatched`
/// (sorted). Iteration is in image-id order, so the result does not depend
/// on input order.
inline EvalReport evaluate(const std::vector<Prediction>& preds,
                           const std::vector<AnnotationRecord>& anns,
                           const NormalizationRules& rules = {}) {
  std::map<std::string_view, const Prediction*> by_id;
  for (const auto& p : preds) {
    if (!by_id.emplace(p.image_id, &p).second) {
      throw Error(ErrorCode::kDuplicateKey,
                  "prediction for image '" + p.image_id + "' repeated");
    }
  }
  std::map<std::string_view, const AnnotationRecord*> ann_by_id;
  for (const auto& a : anns) {
    if (a.human_answers.size() != kHumanAnswers) {
      throw Error(ErrorCode::kWrongAnswerCount,
                  "image '" + a.image_id + "' has " +
                      std::to_string(a.human_answers.size()) +
                      " human answers, expected 10");
    }
    if (!ann_by_id.emplace(a.image_id, &a).second) {
      throw Error(ErrorCode::kDuplicateKey,
                  "annotation for image '" + a.image_id + "' repeated");
    }
  }

  EvalReport report;
  for (AnswerType t : kAnswerTypes) report.per_category[t] = {};
  for (const auto& [id, ann] : ann_by_id) {
    std::uint64_t units = 0;
    if (auto it = by_id.find(id); it != by_id.end()) {
      units = question_units(
          count_matches(it->second->answer, ann->human_answers, rules));
    } else {
      report.unmatched.emplace_back(id);
    }
    auto& cat = report.per_category[ann->answer_type];
    ++cat.count;
    cat.units += units;
    ++report.overall.count;
    report.overall.units += units;
  }
  for (const auto& [id, pred] : by_id) {
    if (!ann_by_id.contains(id)) report.unmatched.emplace_back(id);
  }
  std::sort(report.unmatched.begin(), report.unmatched.end());
  return report;
}

/// Percentage with exactly two decimals, rounded half-to-even on the exact
/// ratio (no floating point involved).
inline std::string format_percent(const CategoryScore& s) {
  std::uint64_t hundredths = 0;
  if (s.count != 0) {
    // percent * 100 = 10000 * units / (30 * count)
    const std::uint64_t num = 10000 * s.units;
    const std::uint64_t den = kUnitsPerQuestion * s.count;
    hundredths = num / den;
    const std::uint64_t rem = num % den;
    if (2 * rem > den || (2 * rem == den && hundredths % 2 == 1)) ++hundredths;
  }
  std::ostringstream os;
  os << hundredths / 100 << '.' << std::setw(2) << std::setfill('0')
     << hundredths % 100;
  return os.str();
}

/// Plain-text table in the column order yes/no, number, other,
/// unanswerable, overall, followed by a row of question counts.
inline std::string format_table(const EvalReport& r,
                                std::string_view label = "accuracy") {
  std::vector<std::string> header{""};
  std::vector<std::string> acc{std::string(label)};
  std::vector<std::string> cnt{"count"};
  for (AnswerType t : kAnswerTypes) {
    const auto it = r.per_category.find(t);
    const CategoryScore s = it == r.per_category.end() ? CategoryScore{}
                                                       : it->second;
    header.emplace_back(to_string(t));
    acc.push_back(format_percent(s));
    cnt.push_back(std::to_string(s.count));
  }
  header.emplace_back("overall");
  acc.push_back(format_percent(r.overall));
  cnt.push_back(std::to_string(r.overall.count));

  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = std::max({header[c].size(), acc[c].size(), cnt[c].size()});
  }
  std::ostringstream os;
  for (const auto* row : {&header, &acc, &cnt}) {
    for (std::size_t c = 0; c < row->size(); ++c) {
      if (c == 0) {
        os << std::left << std::setw(static_cast<int>(width[c])) << (*row)[c];
      } else {
        os << " | " << std::right << std::setw(static_cast<int>(width[c]))
           << (*row)[c];
      }
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace vqakit
