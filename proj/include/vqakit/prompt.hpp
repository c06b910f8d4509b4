#pragma once

#include <string>
#include <string_view>

#include "vqakit/error.hpp"

namespace vqakit {

// Zero-shot instruction prefix. Straight ASCII quotes, no leading space, one
// trailing space before the question.
inline constexpr std::string_view kInstructionPrefix =
    "The correct answer type is one of ['number', 'words', 'yes', 'no']. "
    "If it is impossible to answer an image-related question or there is no "
    "existing information, please reply as 'unanswerable'. Question: ";

/// Prefix followed by the question, verbatim and unescaped.
inline std::string build_instruction(std::string_view question) {
  if (question.empty()) {
    throw Error(ErrorCode::kEmptyQuestion, "question must not be empty");
  }
  std::string out(kInstructionPrefix);
  out.append(question);
  return out;
}

}  // namespace vqakit
