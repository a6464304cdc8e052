#include "convsynth/transcript_gen.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <sstream>

#include "convsynth/parallel.hpp"
#include "convsynth/rng.hpp"

namespace convsynth {

namespace {

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(c));
  }
  return out;
}

struct Tag {
  std::size_t begin;
  std::size_t end;  // one past ']'
  std::string label;
};

std::vector<Tag> find_tags(const std::string& text) {
  std::vector<Tag> tags;
  for (std::size_t i = 0; i + 1 < text.size(); ++i) {
    if (text[i] != '[' || text[i + 1] != 'S') continue;
    std::size_t j = i + 2;
    while (j < text.size() && text[j] != ']' && text[j] != '[' &&
           !std::isspace(static_cast<unsigned char>(text[j])))
      ++j;
    if (j >= text.size() || text[j] != ']') continue;  // not tag-shaped; ordinary text
    const std::string index = text.substr(i + 2, j - i - 2);
    const bool digits = !index.empty() && index.size() <= 9 &&
                        std::all_of(index.begin(), index.end(),
                                    [](unsigned char c) { return std::isdigit(c); });
    if (!digits || std::stoul(index) == 0)
      throw ScriptParseError(ScriptParseError::Reason::bad_tag_index,
                             "tag index not a positive integer: '" + text.substr(i, j - i + 1) + "'");
    tags.push_back({i, j + 1, "S" + std::to_string(std::stoul(index))});
    i = j;
  }
  return tags;
}

}  // namespace

std::string to_string(ScriptParseError::Reason r) {
  switch (r) {
    case ScriptParseError::Reason::no_tags: return "no tags";
    case ScriptParseError::Reason::text_before_first_tag: return "text before first tag";
    case ScriptParseError::Reason::empty_turn: return "empty turn";
    case ScriptParseError::Reason::bad_tag_index: return "bad tag index";
  }
  return "unknown";
}

ConversationScript parse_script(const std::string& text) {
  const auto tags = find_tags(text);
  if (tags.empty()) throw ScriptParseError(ScriptParseError::Reason::no_tags, "no tags found");
  if (!collapse_whitespace(std::string_view(text).substr(0, tags.front().begin)).empty())
    throw ScriptParseError(ScriptParseError::Reason::text_before_first_tag, "text before first tag");

  std::vector<std::pair<SpeakerId, std::string>> turns;
  for (std::size_t t = 0; t < tags.size(); ++t) {
    const std::size_t stop = t + 1 < tags.size() ? tags[t + 1].begin : text.size();
    std::string body = collapse_whitespace(std::string_view(text).substr(tags[t].end, stop - tags[t].end));
    if (body.empty())
      throw ScriptParseError(ScriptParseError::Reason::empty_turn,
                             "empty turn at index " + std::to_string(t));
    turns.emplace_back(SpeakerId(tags[t].label), std::move(body));
  }
  return ConversationScript(std::move(turns));
}

std::string render_script(const ConversationScript& script) {
  std::string out;
  for (const auto& t : script.turns()) {
    if (!out.empty()) out += ' ';
    out += '[' + t.speaker.label + "] " + t.text;
  }
  return out;
}

SeedPool load_seed_pool(const std::filesystem::path& path, PoolFormat format) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open seed pool " + path.string());
  SeedPool pool;
  pool.source_id = path.filename().string();

  std::vector<std::pair<std::size_t, std::string>> entries;  // first line number, text
  std::string line, block;
  std::size_t line_no = 0, block_start = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const bool empty = collapse_whitespace(line).empty();
    if (format == PoolFormat::line) {
      if (!empty) entries.emplace_back(line_no, line);
      continue;
    }
    if (empty) {
      if (!block.empty()) entries.emplace_back(block_start, block);
      block.clear();
    } else {
      if (block.empty()) block_start = line_no;
      block += block.empty() ? line : "\n" + line;
    }
  }
  if (!block.empty()) entries.emplace_back(block_start, block);

  for (auto& [at, text] : entries) {
    try {
      parse_script(text);
    } catch (const ScriptParseError& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(at) + ": " + e.what());
    }
    pool.examples.push_back(std::move(text));
  }
  return pool;
}

std::string build_prompt(const SeedPool& pool, const PromptSpec& spec) {
  if (spec.k_shots < 1) throw std::invalid_argument("k_shots must be >= 1");
  if (pool.examples.size() < spec.k_shots)
    throw std::invalid_argument("pool too small: " + std::to_string(pool.examples.size()) + " < " +
                                std::to_string(spec.k_shots));

  // Partial Fisher-Yates: the first k positions hold the sample in draw order.
  std::vector<std::size_t> order(pool.examples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(spec.rng_seed);
  for (std::size_t i = 0; i < spec.k_shots; ++i)
    std::swap(order[i], order[i + rng.index(order.size() - i)]);

  std::string prompt;
  if (!spec.instruction_header.empty()) prompt += spec.instruction_header + spec.delimiter;
  for (std::size_t i = 0; i < spec.k_shots; ++i) prompt += pool.examples[order[i]] + spec.delimiter;
  return prompt;
}

GenerationResult generate_scripts(const SeedPool& pool, const PromptSpec& spec, std::size_t n,
                                  const ScriptPolicy& policy, CompletionService& service) {
  if (pool.examples.size() < spec.k_shots)
    throw std::invalid_argument("pool too small: " + std::to_string(pool.examples.size()) + " < " +
                                std::to_string(spec.k_shots));
  const auto attempts = static_cast<std::size_t>(std::max(1, policy.attempts_per_item));

  struct Item {
    std::optional<ConversationScript> script;
    std::map<std::string, std::size_t> rejections;
  };
  std::vector<Item> items(n);

  parallel_for(n, policy.jobs, [&](std::size_t i) {
    Item& item = items[i];
    for (std::size_t a = 0; a < attempts; ++a) {
      const std::uint64_t sub = derive_seed(spec.rng_seed, "item", i * attempts + a);
      PromptSpec item_spec = spec;
      item_spec.rng_seed = derive_seed(sub, "prompt");
      CompletionRequest req;
      req.prompt = build_prompt(pool, item_spec);
      req.max_tokens = policy.max_tokens;
      req.temperature = policy.temperature;
      req.seed = derive_seed(sub, "completion");
      try {
        ConversationScript script = parse_script(service.complete(req));
        const auto report = validate_script(script, policy.max_speakers, policy.adjacent);
        if (!report.ok()) {
          ++item.rejections["validation"];
          continue;
        }
        item.script = std::move(script);
        return;
      } catch (const ScriptParseError& e) {
        ++item.rejections[to_string(e.reason())];
      } catch (const ServiceError&) {
        ++item.rejections["service error"];
      }
    }
  });

  GenerationResult result;
  for (auto& item : items) {
    for (const auto& [reason, count] : item.rejections) result.rejections[reason] += count;
    if (item.script) {
      result.scripts.push_back(std::move(*item.script));
    } else {
      ++result.shortfall;
    }
  }
  return result;
}

}  // namespace convsynth
