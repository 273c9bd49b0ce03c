#pragma once

// Prompt rendering for completion-style models.
//
// Stateless layout (one item per request):
//
//   <instructions>
//
//   Statement: <item text>
//
//   Response: ␠
//
// Memory layout: the same preamble, then every earlier item of the chain as a
// "Statement: ...\nResponse: <answer>" block followed by a blank line, then
// "Statement: <item text>\nResponse: ". Answers are inserted verbatim, so a
// completion that started with a space shows up as "Response:  5". With an
// empty history the memory layout is the stateless layout.
//
// Instruments without instructions (free-text probes) drop the preamble and
// the "Statement: " prefix: "<question>\nResponse: ".

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "surveyor/error.hpp"
#include "surveyor/instrument.hpp"

namespace surveyor {

inline constexpr std::string_view kResponseCue = "Response: ";
inline constexpr std::string_view kStatementPrefix = "Statement: ";
// Share of the context window a prompt may occupy.
inline constexpr double kContextSafetyFraction = 0.9;

enum class PromptMode { stateless, memory };

inline std::string_view to_string(PromptMode m) { return m == PromptMode::stateless ? "stateless" : "memory"; }

struct PromptExchange {
  int item_ordinal = 0;
  std::string statement;
  std::string response;  // raw answer as it goes back into the prompt
};

struct RenderedPrompt {
  std::string text;
  std::int64_t token_estimate = 0;
  std::string item_id;
  PromptMode mode = PromptMode::stateless;
};

/// Deterministic size estimate: ceil(code points / 4).
inline std::int64_t estimate_tokens(std::string_view text) {
  std::int64_t code_points = 0;
  for (unsigned char c : text)
    if ((c & 0xC0) != 0x80) ++code_points;
  return (code_points + 3) / 4;
}

/// True when a prompt of this estimate may be sent to a model with the given
/// context window.
inline bool fits_context(std::int64_t token_estimate, std::int64_t context_limit) {
  return static_cast<double>(token_estimate) <= static_cast<double>(context_limit) * kContextSafetyFraction;
}

namespace detail {

inline bool has_preamble(const Instrument& ins) { return !ins.instructions.empty(); }

inline void append_statement(std::string& out, const Instrument& ins, std::string_view text) {
  if (has_preamble(ins)) out += kStatementPrefix;
  out += text;
}

inline RenderedPrompt finish(std::string text, const Item& item, PromptMode mode) {
  RenderedPrompt p;
  p.token_estimate = estimate_tokens(text);
  p.text = std::move(text);
  p.item_id = item.id;
  p.mode = mode;
  return p;
}

}  // namespace detail

inline RenderedPrompt render_stateless(const Instrument& ins, const Item& item) {
  std::string text;
  if (detail::has_preamble(ins)) {
    text += ins.instructions;
    text += "\n\n";
    detail::append_statement(text, ins, item.text);
    text += "\n\n";
  } else {
    text += item.text;
    text += "\n";
  }
  text += kResponseCue;
  return detail::finish(std::move(text), item, PromptMode::stateless);
}

/// Renders `item` with the chain's earlier exchanges inlined.
///
/// `history` must hold exactly ordinals 1..item.ordinal-1 in order; anything
/// else is a ProtocolError naming the expected and actual ordinals.
inline RenderedPrompt render_with_memory(const Instrument& ins, const Item& item,
                                         std::span<const PromptExchange> history) {
  const auto expected = static_cast<std::size_t>(item.ordinal - 1);
  bool ok = history.size() == expected;
  for (std::size_t i = 0; ok && i < history.size(); ++i) ok = history[i].item_ordinal == static_cast<int>(i) + 1;
  if (!ok) {
    std::string got;
    for (const auto& h : history) got += (got.empty() ? "" : ",") + std::to_string(h.item_ordinal);
    throw ProtocolError("memory prompt for item " + item.id + ": expected history ordinals 1.." +
                        std::to_string(expected) + ", got [" + got + "]");
  }
  if (history.empty()) {
    auto p = render_stateless(ins, item);
    p.mode = PromptMode::memory;
    return p;
  }

  std::string text;
  if (detail::has_preamble(ins)) {
    text += ins.instructions;
    text += "\n\n";
  }
  for (const auto& h : history) {
    detail::append_statement(text, ins, h.statement);
    text += "\n";
    text += kResponseCue;
    text += h.response;
    text += "\n\n";
  }
  detail::append_statement(text, ins, item.text);
  text += "\n";
  text += kResponseCue;
  return detail::finish(std::move(text), item, PromptMode::memory);
}

}  // namespace surveyor
