#include "convsynth/sot.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <stdexcept>
#include <utility>

namespace convsynth {

namespace {

bool word_char(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

constexpr std::array<std::pair<std::string_view, std::string_view>, 11> kExpansions{{
    {"mr", "mister"},
    {"mrs", "missus"},
    {"dr", "doctor"},
    {"prof", "professor"},
    {"gonna", "going to"},
    {"wanna", "want to"},
    {"gotta", "got to"},
    {"y'all", "you all"},
    {"let's", "let us"},
    {"ok", "okay"},
    {"vs", "versus"},
}};

std::string collapse(std::string_view s) {
  std::string out;
  bool pending = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(' ');
    pending = false;
    out.push_back(static_cast<char>(c));
  }
  return out;
}

}  // namespace

std::string normalize_text(std::string_view s) {
  std::string cleaned;
  cleaned.reserve(s.size() + 8);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (word_char(c)) {
      cleaned.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    } else if (c == '\'') {
      const bool inner = i > 0 && i + 1 < s.size() && word_char(static_cast<unsigned char>(s[i - 1])) &&
                         word_char(static_cast<unsigned char>(s[i + 1]));
      cleaned.push_back(inner ? '\'' : ' ');
    } else if (c == '&') {
      cleaned += " and ";
    } else if (c == '%') {
      cleaned += " percent ";
    } else {
      cleaned.push_back(' ');
    }
  }

  std::string out;
  std::size_t pos = 0;
  const std::string words = collapse(cleaned);
  while (pos < words.size()) {
    std::size_t next = words.find(' ', pos);
    if (next == std::string::npos) next = words.size();
    std::string_view w(words.data() + pos, next - pos);
    for (const auto& [from, to] : kExpansions) {
      if (w == from) {
        w = to;
        break;
      }
    }
    if (!out.empty()) out.push_back(' ');
    out.append(w);
    pos = next + 1;
  }
  return out;
}

void check_sot_config(const SotConfig& cfg) {
  if (cfg.change_token.empty()) throw std::invalid_argument("change token must not be empty");
  if (std::any_of(cfg.change_token.begin(), cfg.change_token.end(),
                  [](unsigned char c) { return std::isspace(c); }))
    throw std::invalid_argument("change token must not contain whitespace");
  if (normalize_text(cfg.change_token) == cfg.change_token)
    throw std::invalid_argument("change token '" + cfg.change_token + "' could be a normal word");
}

namespace {

std::vector<const UtteranceSegment*> serialization_order(const UtteranceGroup& group) {
  std::vector<const UtteranceSegment*> order;
  for (const auto& s : group.segments)
    if (!collapse(s.text).empty()) order.push_back(&s);
  std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
    if (a->start != b->start) return a->start < b->start;
    if (a->speaker != b->speaker) return a->speaker < b->speaker;
    return a->text < b->text;
  });
  return order;
}

}  // namespace

std::string serialize_group(const UtteranceGroup& group, const SotConfig& cfg) {
  if (group.segments.empty()) throw std::invalid_argument("cannot serialize an empty group");
  std::string out;
  const SpeakerId* prev = nullptr;
  for (const auto* s : serialization_order(group)) {
    if (prev) {
      out += ' ';
      if (*prev != s->speaker) out += cfg.change_token + ' ';
    }
    out += collapse(s->text);
    prev = &s->speaker;
  }
  return out;
}

std::size_t speaker_changes(const UtteranceGroup& group) {
  const auto order = serialization_order(group);
  std::size_t n = 0;
  for (std::size_t i = 1; i < order.size(); ++i)
    if (order[i]->speaker != order[i - 1]->speaker) ++n;
  return n;
}

DeserializedSot deserialize_sot(const std::string& sot_text, const SotConfig& cfg) {
  if (cfg.change_token.empty()) throw std::invalid_argument("change token must not be empty");
  DeserializedSot out;
  std::size_t channel = 0, pos = 0;
  while (true) {
    const std::size_t hit = sot_text.find(cfg.change_token, pos);
    const std::size_t stop = hit == std::string::npos ? sot_text.size() : hit;
    std::string chunk = collapse(std::string_view(sot_text).substr(pos, stop - pos));
    if (chunk.empty()) {
      ++out.empty_chunks;
    } else {
      out.chunks.push_back({channel, std::move(chunk)});
    }
    if (hit == std::string::npos) break;
    pos = hit + cfg.change_token.size();
    ++channel;
  }
  // A fully empty string is no hypothesis rather than one blank chunk.
  if (out.chunks.empty() && channel == 0) out.empty_chunks = 0;
  return out;
}

}  // namespace convsynth
