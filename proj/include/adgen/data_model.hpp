#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "adgen/matrix.hpp"

namespace adgen {

// F×D per-frame visual features of one clip.
using FrameFeatures = Matrix;

struct VideoClip {
  std::string clip_id;
  std::string movie_id;
  double start = 0.0;  // seconds
  double end = 0.0;
  FrameFeatures features;

  friend bool operator==(const VideoClip&, const VideoClip&) = default;
};

struct CharacterEntry {
  std::string character_name;
  std::string actor_name;
  std::vector<double> portrait;
  std::optional<std::vector<double>> exemplar;

  friend bool operator==(const CharacterEntry&, const CharacterEntry&) = default;
};

struct CharacterBank {
  std::string movie_id;
  std::vector<CharacterEntry> entries;

  friend bool operator==(const CharacterBank&, const CharacterBank&) = default;
};

struct ADRecord {
  std::string ad_id;
  std::string movie_id;
  std::string clip_id;
  std::string text;
  std::int64_t index = 0;  // ordinal within the movie

  friend bool operator==(const ADRecord&, const ADRecord&) = default;
};

struct Movie {
  std::vector<VideoClip> clips;  // ordered by start time
  std::vector<ADRecord> ads;     // ordered by index
  CharacterBank bank;

  // Throws ValidationError when the id is unknown.
  const VideoClip& clip(std::string_view clip_id) const;

  friend bool operator==(const Movie&, const Movie&) = default;
};

enum class Split { Train, Eval };

// Lower-case spelling variant → lower-case canonical first name.
using AliasTable = std::map<std::string, std::string>;

struct MovieDataset {
  std::map<std::string, Movie> movies;
  std::size_t encoder_dim = 0;
  Split split = Split::Train;
  AliasTable aliases;

  friend bool operator==(const MovieDataset&, const MovieDataset&) = default;
};

struct RefinementLabel {
  std::string character_name;
  bool ad_related = false;

  friend bool operator==(const RefinementLabel&, const RefinementLabel&) = default;
};

std::string_view split_name(Split split) noexcept;

// Checks every dataset invariant; throws ValidationError on the first
// violation.
void validate(const MovieDataset& dataset);

// Reads manifest.json, clips.jsonl, ads.jsonl, banks.jsonl and features.bin
// from `dir`. Errors name the file and line of the offending record.
MovieDataset load_dataset(const std::filesystem::path& dir);

// Writes the same layout. Feature values are stored as 32-bit floats.
void write_dataset(const MovieDataset& dataset, const std::filesystem::path& dir);

// Lower-cased first word of a character name ("Lisa Jorgenson" → "lisa").
std::string first_name(std::string_view character_name);

// Lower-cased words of `text`: maximal runs of ASCII alphanumerics and
// non-ASCII bytes.
std::vector<std::string> words(std::string_view text);

// True when the first name of `character_name` (or a spelling that the alias
// table maps to it) occurs in `text` as a whole word, ignoring case.
bool mentions(std::string_view text, std::string_view character_name,
              const AliasTable& aliases = {});

// One label per bank entry, in bank order.
std::vector<RefinementLabel> derive_refinement_labels(const ADRecord& ad, const CharacterBank& bank,
                                                      const AliasTable& aliases = {});

}  // namespace adgen
