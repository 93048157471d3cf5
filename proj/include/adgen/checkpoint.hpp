#pragma once

// Versioned parameter container: magic, format version, a JSON header
// (namespace, config echo, seed, step, array table) and the arrays as
// row-major little-endian float32.

#include <cstdint>
#include <filesystem>
#include <string>

#include "adgen/char_refine.hpp"
#include "adgen/language_model.hpp"
#include "adgen/nn.hpp"
#include "adgen/visual_mapper.hpp"
#include "json.hpp"

namespace adgen {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string kind;  // "visual-mapper", "char-refine" or "language-model"
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  nn::ParamStore params;
};

std::string encode_checkpoint(const Checkpoint& checkpoint);
// Throws ValidationError on corrupt input or when `kind` differs.
Checkpoint decode_checkpoint(const std::string& bytes, const std::string& expected_kind);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path, const std::string& expected_kind);

nlohmann::json to_json(const MapperConfig& c);
nlohmann::json to_json(const RefineConfig& c);
nlohmann::json to_json(const LMProfile& p);
MapperConfig mapper_config_from_json(const nlohmann::json& j);
RefineConfig refine_config_from_json(const nlohmann::json& j);
LMProfile lm_profile_from_json(const nlohmann::json& j);

void save_mapper(const std::filesystem::path& path, const VisualMapper& mapper, std::uint64_t step);
VisualMapper load_mapper(const std::filesystem::path& path);
void save_refiner(const std::filesystem::path& path, const CharacterRefiner& refiner, std::uint64_t step);
CharacterRefiner load_refiner(const std::filesystem::path& path);
void save_lm(const std::filesystem::path& path, const ToyLM& lm, std::uint64_t step);
ToyLM load_lm(const std::filesystem::path& path);

// Throws ValidationError when the mapper cannot feed the language model.
void check_compatible(const MapperConfig& mapper, const LMProfile& lm);

}  // namespace adgen
