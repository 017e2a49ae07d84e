#pragma once

#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "topicrefine/error.hpp"
#include "topicrefine/util.hpp"

namespace topicrefine {

// One prompt = one (topic, held-out word) pair.
struct PromptInstance {
  int topic_index = -1;
  int position = -1;  // 1-based position of the held-out word
  std::vector<std::string> context_words;
  std::string held_out;
  std::string text;
};

namespace prompt_template {

// The two-task refinement template. The word list sits alone on its own
// line and the held-out word is quoted, which keeps the rendering
// invertible for the offline oracle.
inline constexpr std::string_view kHead =
    "Below is a list of words that together describe a single common topic.\n"
    "\n"
    "Task 1: Identify the common topic shared by the following words:\n";

inline constexpr std::string_view kMid =
    "\n"
    "\n"
    "Task 2: Judge whether the word \"";

inline constexpr std::string_view kTail =
    "\" is semantically consistent with the topic identified in Task 1. "
    "If it is not consistent, suggest ten commonly used, easily recognizable "
    "words that are closely related to that topic and distinctly different "
    "from the words listed above.\n"
    "\n"
    "Answer with a single JSON object containing exactly these keys:\n"
    "{\"topic\": \"<the common topic, as one word or a short phrase>\", "
    "\"coherent\": \"<Yes or No>\", "
    "\"alternatives\": [<the ten suggested words when coherent is No, "
    "otherwise an empty array>]}\n";

}  // namespace prompt_template

inline PromptInstance build_prompt(const std::vector<std::string>& context_words,
                                   const std::string& held_out,
                                   int topic_index = -1, int position = -1) {
  if (context_words.empty()) throw Error::data("prompt needs at least one context word");
  std::unordered_set<std::string> seen;
  for (const auto& w : context_words) {
    if (!seen.insert(w).second) throw Error::data("duplicate context word '" + w + "'");
    if (w == held_out)
      throw Error::data("held-out word '" + held_out + "' appears in the context");
  }
  for (const auto& w : context_words) {
    if (w.empty() || w.find_first_of(",\"\n\t ") != std::string::npos)
      throw Error::data("context word '" + w + "' contains a reserved character");
  }
  if (held_out.empty() || held_out.find_first_of(",\"\n\t ") != std::string::npos)
    throw Error::data("held-out word '" + held_out + "' contains a reserved character");

  PromptInstance p;
  p.topic_index = topic_index;
  p.position = position;
  p.context_words = context_words;
  p.held_out = held_out;
  p.text.reserve(512);
  p.text += prompt_template::kHead;
  p.text += join(context_words, ", ");
  p.text += prompt_template::kMid;
  p.text += held_out;
  p.text += prompt_template::kTail;
  return p;
}

// Inverse of build_prompt; the mock oracle uses it to recover the inputs.
// Any drift from the template is a protocol error.
inline std::pair<std::vector<std::string>, std::string> parse_prompt(std::string_view text) {
  const auto fail = [] {
    return Error::format("prompt does not match the refinement template");
  };
  if (text.substr(0, prompt_template::kHead.size()) != prompt_template::kHead) throw fail();
  size_t list_start = prompt_template::kHead.size();
  size_t list_end = text.find('\n', list_start);
  if (list_end == std::string_view::npos) throw fail();
  std::string_view list = text.substr(list_start, list_end - list_start);

  std::vector<std::string> context;
  size_t pos = 0;
  while (pos <= list.size()) {
    size_t comma = list.find(", ", pos);
    std::string_view w = (comma == std::string_view::npos)
                             ? list.substr(pos)
                             : list.substr(pos, comma - pos);
    if (w.empty()) throw fail();
    context.emplace_back(w);
    if (comma == std::string_view::npos) break;
    pos = comma + 2;
  }

  // kMid begins with the newline that terminated the word list
  if (text.substr(list_end, prompt_template::kMid.size()) != prompt_template::kMid) throw fail();
  size_t word_start = list_end + prompt_template::kMid.size();
  size_t word_end = text.find('"', word_start);
  if (word_end == std::string_view::npos || word_end == word_start) throw fail();
  std::string held(text.substr(word_start, word_end - word_start));
  // the remainder, starting at the closing quote, must be exactly the tail
  if (text.substr(word_end) != prompt_template::kTail) throw fail();
  return {std::move(context), std::move(held)};
}

}  // namespace topicrefine
