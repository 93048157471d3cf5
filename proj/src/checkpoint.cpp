#include "adgen/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "adgen/errors.hpp"
#include "adgen/io.hpp"

namespace adgen {
namespace {

constexpr char kMagic[8] = {'A', 'D', 'G', 'E', 'N', 'C', 'K', 'P'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw ValidationError("checkpoint: truncated file");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& c) {
  nlohmann::json header;
  header["kind"] = c.kind;
  header["config"] = c.config;
  header["seed"] = c.seed;
  header["step"] = c.step;
  header["arrays"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : c.params) {
    header["arrays"].push_back({{"name", name}, {"rows", t.rows()}, {"cols", t.cols()}, {"offset", offset}});
    offset += t.rows() * t.cols();
  }
  const std::string text = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  out.reserve(out.size() + offset * 4);
  for (const auto& [name, t] : c.params) {
    for (double v : t.value().values()) put<float>(out, static_cast<float>(v));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes, const std::string& expected_kind) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw ValidationError("checkpoint: bad magic");
  }
  std::size_t pos = sizeof(kMagic);
  const auto version = get<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion) {
    throw ValidationError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto header_len = get<std::uint64_t>(bytes, pos);
  if (pos + header_len > bytes.size()) throw ValidationError("checkpoint: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(pos, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint: bad header: ") + e.what());
  }
  pos += header_len;
  Checkpoint c;
  try {
    c.kind = header.at("kind").get<std::string>();
    if (c.kind != expected_kind) {
      throw ValidationError("checkpoint: expected a " + expected_kind + " checkpoint, found " + c.kind);
    }
    c.config = header.at("config");
    c.seed = header.at("seed").get<std::uint64_t>();
    c.step = header.at("step").get<std::uint64_t>();
    const std::size_t data_start = pos;
    for (const auto& a : header.at("arrays")) {
      const auto rows = a.at("rows").get<std::size_t>();
      const auto cols = a.at("cols").get<std::size_t>();
      std::size_t p = data_start + 4 * a.at("offset").get<std::size_t>();
      Matrix m(rows, cols);
      for (double& v : m.values()) v = get<float>(bytes, p);
      c.params.add(a.at("name").get<std::string>(), std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint: bad header: ") + e.what());
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  io::write_file_atomic(path, encode_checkpoint(c));
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const std::string& expected_kind) {
  try {
    return decode_checkpoint(io::read_file(path), expected_kind);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

nlohmann::json to_json(const MapperConfig& c) {
  return {{"num_latent", c.num_latent},   {"num_blocks", c.num_blocks},
          {"channel", c.channel},         {"num_heads", c.num_heads},
          {"ffn_dim", c.ffn_dim},         {"input_dim", c.input_dim},
          {"max_frames", c.max_frames},   {"use_positional", c.use_positional},
          {"share_networks", c.share_networks}, {"seed", c.seed}};
}

nlohmann::json to_json(const RefineConfig& c) {
  return {{"num_blocks", c.num_blocks}, {"channel", c.channel},   {"num_heads", c.num_heads},
          {"ffn_dim", c.ffn_dim},       {"input_dim", c.input_dim}, {"threshold", c.threshold},
          {"positive_weight", c.positive_weight}, {"seed", c.seed}};
}

nlohmann::json to_json(const LMProfile& p) {
  return {{"vocab_size", p.vocab_size}, {"d_lm", p.d_lm},         {"context_limit", p.context_limit},
          {"bos_id", p.bos_id},         {"eos_id", p.eos_id},     {"pad_id", p.pad_id},
          {"num_blocks", p.num_blocks}, {"num_heads", p.num_heads}, {"ffn_dim", p.ffn_dim},
          {"seed", p.seed}};
}

namespace {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      out = it->get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ValidationError(std::string("config: field '") + key + "' has the wrong type");
    }
  }
}

}  // namespace

MapperConfig mapper_config_from_json(const nlohmann::json& j) {
  MapperConfig c;
  read_field(j, "num_latent", c.num_latent);
  read_field(j, "num_blocks", c.num_blocks);
  read_field(j, "channel", c.channel);
  read_field(j, "num_heads", c.num_heads);
  read_field(j, "ffn_dim", c.ffn_dim);
  read_field(j, "input_dim", c.input_dim);
  read_field(j, "max_frames", c.max_frames);
  read_field(j, "use_positional", c.use_positional);
  read_field(j, "share_networks", c.share_networks);
  read_field(j, "seed", c.seed);
  c.validate();
  return c;
}

RefineConfig refine_config_from_json(const nlohmann::json& j) {
  RefineConfig c;
  read_field(j, "num_blocks", c.num_blocks);
  read_field(j, "channel", c.channel);
  read_field(j, "num_heads", c.num_heads);
  read_field(j, "ffn_dim", c.ffn_dim);
  read_field(j, "input_dim", c.input_dim);
  read_field(j, "threshold", c.threshold);
  read_field(j, "positive_weight", c.positive_weight);
  read_field(j, "seed", c.seed);
  c.validate();
  return c;
}

LMProfile lm_profile_from_json(const nlohmann::json& j) {
  LMProfile p;
  read_field(j, "vocab_size", p.vocab_size);
  read_field(j, "d_lm", p.d_lm);
  read_field(j, "context_limit", p.context_limit);
  read_field(j, "bos_id", p.bos_id);
  read_field(j, "eos_id", p.eos_id);
  read_field(j, "pad_id", p.pad_id);
  read_field(j, "num_blocks", p.num_blocks);
  read_field(j, "num_heads", p.num_heads);
  read_field(j, "ffn_dim", p.ffn_dim);
  read_field(j, "seed", p.seed);
  p.validate();
  return p;
}

void save_mapper(const std::filesystem::path& path, const VisualMapper& mapper, std::uint64_t step) {
  save_checkpoint(path, {"visual-mapper", to_json(mapper.config()), mapper.config().seed, step,
                         mapper.params().clone()});
}

VisualMapper load_mapper(const std::filesystem::path& path) {
  Checkpoint c = load_checkpoint(path, "visual-mapper");
  return VisualMapper(mapper_config_from_json(c.config), std::move(c.params));
}

void save_refiner(const std::filesystem::path& path, const CharacterRefiner& refiner, std::uint64_t step) {
  save_checkpoint(path, {"char-refine", to_json(refiner.config()), refiner.config().seed, step,
                         refiner.params().clone()});
}

CharacterRefiner load_refiner(const std::filesystem::path& path) {
  Checkpoint c = load_checkpoint(path, "char-refine");
  return CharacterRefiner(refine_config_from_json(c.config), std::move(c.params));
}

void save_lm(const std::filesystem::path& path, const ToyLM& lm, std::uint64_t step) {
  save_checkpoint(path, {"language-model", to_json(lm.profile()), lm.profile().seed, step,
                         lm.params().clone()});
}

ToyLM load_lm(const std::filesystem::path& path) {
  Checkpoint c = load_checkpoint(path, "language-model");
  return ToyLM(lm_profile_from_json(c.config), std::move(c.params));
}

void check_compatible(const MapperConfig& mapper, const LMProfile& lm) {
  if (mapper.channel != lm.d_lm) {
    throw ValidationError("incompatible checkpoints: mapper emits width " + std::to_string(mapper.channel) +
                          " but the language model expects d_lm " + std::to_string(lm.d_lm));
  }
}

}  // namespace adgen
