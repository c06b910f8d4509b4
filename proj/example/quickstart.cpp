// Ensemble three models' answers and score the result, all in memory.

#include <iostream>
#include <string>
#include <vector>

#include "vqakit/vqakit.hpp"

int main() {
  using namespace vqakit;

  const std::vector<CandidateSet> sets = {
      {"img_1", {{"base", "Coke"}, {"highlight", "coke."}, {"contrast", "pepsi"}}},
      {"img_2", {{"base", "cat"}, {"highlight", "cart"}, {"contrast", "dog"}}},
  };
  const auto results = ensemble_run(sets);

  std::vector<Prediction> preds;
  for (const auto& r : results) {
    std::cout << r.question_key << " -> " << r.answer << " (from "
              << r.winning_model << ", total distance " << r.total_distance
              << ")\n";
    preds.push_back({r.question_key, r.answer});
  }

  std::vector<AnnotationRecord> anns = {
      {"img_1", "What drink is this?", std::vector<std::string>(10, "coke"),
       AnswerType::kOther, true},
      {"img_2", "What animal is this?",
       {"cat", "cat", "cat", "kitten", "kitten", "dog", "cat", "kitten",
        "kitten", "kitten"},
       AnswerType::kOther, true},
  };
  std::cout << '\n' << format_table(evaluate(preds, anns));

  std::cout << '\n' << build_instruction("What is this?") << '\n';
}
