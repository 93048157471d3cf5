#pragma once

// Interleaved multimodal prompt: text spans and mapped-embedding spans in
// template order, terminated by a BOS marker where generation starts.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adgen/visual_mapper.hpp"

namespace adgen {

enum class SegmentKind { Text, Embedding, Bos };
enum class SegmentTag { Template, Character, Video, ContextAd };

struct PromptSegment {
  SegmentKind kind = SegmentKind::Text;
  SegmentTag tag = SegmentTag::Template;
  std::string text;                             // Text only
  MappedEmbeddings embeddings;                  // Embedding only
  std::optional<std::size_t> character_index;  // Character-tagged segments
};

struct PromptSequence {
  std::vector<PromptSegment> segments;
  std::size_t bos_position = 0;  // index into segments
};

struct PromptTemplate {
  std::string header = "Possible characters: ";
  // {name} and {actor} are substituted; used when the actor is known.
  std::string character_format = "{name} played by {actor} ";
  std::string character_format_no_actor = "{name} ";
  std::string separator = ", ";
  std::string describe = "Describe ";
  std::string suffix = ":";
};

struct PromptCharacter {
  std::string name;
  std::string actor;
  MappedEmbeddings embeddings;
};

// Segment order: context ADs, character header, per character
// ("name played by actor " text, embeddings, separator), "Describe ",
// video embeddings, ":", BOS. The header is dropped when there are no
// characters.
PromptSequence build_prompt(std::span<const PromptCharacter> characters,
                            const MappedEmbeddings& video, std::span<const std::string> context_ads,
                            const PromptTemplate& tmpl = {});

// Context AD text as placed in the prompt: terminated by a period and a space.
std::string context_ad_text(const std::string& ad);

// Text verbatim, embedding spans as <EMB:rows>, BOS as <BOS>.
std::string render_debug(const PromptSequence& prompt);

// Hash over the rendered prompt and the exact embedding values.
std::string prompt_hash(const PromptSequence& prompt);

}  // namespace adgen
