#include "adgen/prompt.hpp"

#include <cstring>

#include "adgen/errors.hpp"
#include "adgen/io.hpp"

namespace adgen {
namespace {

std::string substitute(std::string fmt, const std::string& key, const std::string& value) {
  for (std::size_t pos = fmt.find(key); pos != std::string::npos;
       pos = fmt.find(key, pos + value.size())) {
    fmt.replace(pos, key.size(), value);
  }
  return fmt;
}

PromptSegment text(std::string s, SegmentTag tag, std::optional<std::size_t> who = std::nullopt) {
  PromptSegment seg;
  seg.kind = SegmentKind::Text;
  seg.tag = tag;
  seg.text = std::move(s);
  seg.character_index = who;
  return seg;
}

PromptSegment embedding(const MappedEmbeddings& e, SegmentTag tag,
                        std::optional<std::size_t> who = std::nullopt) {
  PromptSegment seg;
  seg.kind = SegmentKind::Embedding;
  seg.tag = tag;
  seg.embeddings = e;
  seg.character_index = who;
  return seg;
}

}  // namespace

std::string context_ad_text(const std::string& ad) {
  std::string out = ad;
  if (out.empty() || out.back() != '.') out.push_back('.');
  out.push_back(' ');
  return out;
}

PromptSequence build_prompt(std::span<const PromptCharacter> characters,
                            const MappedEmbeddings& video, std::span<const std::string> context_ads,
                            const PromptTemplate& tmpl) {
  if (!video.defined()) throw ValidationError("prompt: missing video embeddings");
  PromptSequence p;
  for (const auto& ad : context_ads) p.segments.push_back(text(context_ad_text(ad), SegmentTag::ContextAd));
  if (!characters.empty()) p.segments.push_back(text(tmpl.header, SegmentTag::Template));
  for (std::size_t i = 0; i < characters.size(); ++i) {
    const auto& c = characters[i];
    if (!c.embeddings.defined()) {
      throw ValidationError("prompt: character '" + c.name + "' has no embeddings");
    }
    const std::string fmt = c.actor.empty() ? tmpl.character_format_no_actor : tmpl.character_format;
    p.segments.push_back(
        text(substitute(substitute(fmt, "{name}", c.name), "{actor}", c.actor), SegmentTag::Character, i));
    p.segments.push_back(embedding(c.embeddings, SegmentTag::Character, i));
    p.segments.push_back(text(tmpl.separator, SegmentTag::Template));
  }
  p.segments.push_back(text(tmpl.describe, SegmentTag::Template));
  p.segments.push_back(embedding(video, SegmentTag::Video));
  p.segments.push_back(text(tmpl.suffix, SegmentTag::Template));
  PromptSegment bos;
  bos.kind = SegmentKind::Bos;
  p.bos_position = p.segments.size();
  p.segments.push_back(std::move(bos));
  return p;
}

std::string render_debug(const PromptSequence& prompt) {
  std::string out;
  for (const auto& seg : prompt.segments) {
    switch (seg.kind) {
      case SegmentKind::Text:
        out += seg.text;
        break;
      case SegmentKind::Embedding:
        out += "<EMB:" + std::to_string(seg.embeddings.rows()) + ">";
        break;
      case SegmentKind::Bos:
        out += "<BOS>";
        break;
    }
  }
  return out;
}

std::string prompt_hash(const PromptSequence& prompt) {
  std::uint64_t h = io::fnv1a(render_debug(prompt));
  for (const auto& seg : prompt.segments) {
    if (seg.kind != SegmentKind::Embedding) continue;
    const Matrix& m = seg.embeddings.value();
    h = io::fnv1a(std::string_view(reinterpret_cast<const char*>(m.data()), m.size() * sizeof(double)),
                  h);
  }
  return io::hex64(h);
}

}  // namespace adgen
