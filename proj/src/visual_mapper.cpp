#include "adgen/visual_mapper.hpp"

#include "adgen/errors.hpp"

namespace adgen {

MapperConfig MapperConfig::small_profile() {
  MapperConfig c;
  c.input_dim = 512;
  c.channel = 768;
  c.num_heads = 12;
  c.ffn_dim = 3072;
  return c;
}

MapperConfig MapperConfig::large_profile() {
  MapperConfig c;
  c.input_dim = 768;
  c.channel = 4096;
  c.num_heads = 32;
  c.ffn_dim = 16384;
  return c;
}

MapperConfig MapperConfig::toy_profile(std::size_t input_dim) {
  MapperConfig c;
  c.num_latent = 6;
  c.channel = 64;
  c.num_heads = 4;
  c.ffn_dim = 128;
  c.input_dim = input_dim;
  return c;
}

void MapperConfig::validate() const {
  if (num_latent < 1) throw ValidationError("mapper: num_latent must be at least 1");
  if (num_blocks < 1) throw ValidationError("mapper: num_blocks must be at least 1");
  if (num_heads < 1 || channel % num_heads != 0) {
    throw ValidationError("mapper: channel " + std::to_string(channel) +
                          " not divisible by num_heads " + std::to_string(num_heads));
  }
  if (input_dim < 1 || ffn_dim < 1) throw ValidationError("mapper: dimensions must be positive");
  if (use_positional && max_frames < 1) throw ValidationError("mapper: max_frames must be positive");
}

std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> mapper_parameter_shapes(
    const MapperConfig& c) {
  std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> out;
  const std::vector<std::string> nets =
      c.share_networks ? std::vector<std::string>{"shared"}
                       : std::vector<std::string>{"video", "image"};
  for (const auto& n : nets) {
    out.push_back({n + ".proj.weight", {c.input_dim, c.channel}});
    out.push_back({n + ".proj.bias", {1, c.channel}});
    out.push_back({n + ".latents", {c.num_latent, c.channel}});
    if (c.use_positional) out.push_back({n + ".pos", {c.max_frames, c.channel}});
    for (std::size_t b = 0; b < c.num_blocks; ++b) {
      const std::string p = n + ".block" + std::to_string(b);
      out.push_back({p + ".ln1.gain", {1, c.channel}});
      out.push_back({p + ".ln1.bias", {1, c.channel}});
      for (const char* w : {".attn.q", ".attn.k", ".attn.v", ".attn.out"}) {
        out.push_back({p + w + ".weight", {c.channel, c.channel}});
        out.push_back({p + w + ".bias", {1, c.channel}});
      }
      out.push_back({p + ".ln2.gain", {1, c.channel}});
      out.push_back({p + ".ln2.bias", {1, c.channel}});
      out.push_back({p + ".ffn.fc1.weight", {c.channel, c.ffn_dim}});
      out.push_back({p + ".ffn.fc1.bias", {1, c.ffn_dim}});
      out.push_back({p + ".ffn.fc2.weight", {c.ffn_dim, c.channel}});
      out.push_back({p + ".ffn.fc2.bias", {1, c.channel}});
    }
    out.push_back({n + ".ln_out.gain", {1, c.channel}});
    out.push_back({n + ".ln_out.bias", {1, c.channel}});
  }
  return out;
}

VisualMapper::VisualMapper(MapperConfig config) : config_(config) {
  config_.validate();
  if (config_.share_networks) {
    init_network("shared", config_.seed);
  } else {
    init_network("video", config_.seed);
    init_network("image", config_.seed + 0x9e3779b97f4a7c15ULL);
  }
}

VisualMapper::VisualMapper(MapperConfig config, nn::ParamStore params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
  const auto shapes = mapper_parameter_shapes(config_);
  if (shapes.size() != params_.size()) {
    throw ValidationError("mapper: parameter count " + std::to_string(params_.size()) +
                          " does not match config (" + std::to_string(shapes.size()) + ")");
  }
  for (const auto& [name, dims] : shapes) {
    const auto& t = params_.at(name);
    if (t.rows() != dims.first || t.cols() != dims.second) {
      throw ValidationError("mapper: parameter '" + name + "' has the wrong shape");
    }
  }
  params_.set_requires_grad(true);
}

void VisualMapper::init_network(const std::string& net, std::uint64_t seed) {
  Rng rng(seed);
  nn::add_linear(params_, net + ".proj", config_.input_dim, config_.channel, rng);
  params_.add(net + ".latents", nn::normal(config_.num_latent, config_.channel, 0.02, rng));
  if (config_.use_positional) {
    params_.add(net + ".pos", nn::normal(config_.max_frames, config_.channel, 0.02, rng));
  }
  const nn::BlockShape shape{config_.channel, config_.num_heads, config_.ffn_dim};
  for (std::size_t b = 0; b < config_.num_blocks; ++b) {
    nn::add_self_block(params_, net + ".block" + std::to_string(b), shape, rng);
  }
  nn::add_layer_norm(params_, net + ".ln_out", config_.channel);
}

std::string VisualMapper::prefix(Network network) const {
  if (config_.share_networks) return "shared";
  return network == Network::Video ? "video" : "image";
}

ag::Tensor VisualMapper::project(const ag::Tensor& features, Network network) const {
  if (features.cols() != config_.input_dim) {
    throw DimensionError("mapper: features have " + std::to_string(features.cols()) +
                         " columns, expected " + std::to_string(config_.input_dim));
  }
  return nn::apply_linear(params_, prefix(network) + ".proj", features);
}

MappedEmbeddings VisualMapper::map(const ag::Tensor& features, Network network) const {
  if (features.rows() == 0) throw ValidationError("mapper: no input frames");
  const std::string net = prefix(network);
  ag::Tensor frames = project(features, network);
  if (config_.use_positional) {
    if (features.rows() > config_.max_frames) {
      throw DimensionError("mapper: " + std::to_string(features.rows()) +
                           " frames exceed the positional table (" +
                           std::to_string(config_.max_frames) + ")");
    }
    frames = ag::add(frames, ag::slice_rows(params_.at(net + ".pos"), 0, features.rows()));
  }
  const ag::Tensor parts[] = {params_.at(net + ".latents"), frames};
  ag::Tensor x = ag::concat_rows(parts);
  for (std::size_t b = 0; b < config_.num_blocks; ++b) {
    x = nn::self_block(params_, net + ".block" + std::to_string(b), x, config_.num_heads, false);
    if (!x.value().all_finite()) {
      throw NumericError("mapper: non-finite activation in " + net + " block " + std::to_string(b));
    }
  }
  return nn::apply_layer_norm(params_, net + ".ln_out",
                              ag::slice_rows(x, 0, config_.num_latent));
}

MappedEmbeddings VisualMapper::map_visual(const Matrix& features) const {
  return map(ag::Tensor::constant(features), Network::Video);
}

std::vector<MappedEmbeddings> VisualMapper::map_characters(
    std::span<const std::vector<double>> exemplars) const {
  std::vector<MappedEmbeddings> out;
  out.reserve(exemplars.size());
  for (const auto& e : exemplars) {
    out.push_back(map(ag::Tensor::constant(Matrix::row_vector(e)), Network::Image));
  }
  return out;
}

MappedEmbeddings VisualMapper::map_with_context(std::span<const Matrix> past_clips,
                                                const Matrix& current) const {
  if (past_clips.empty()) return map_visual(current);
  std::vector<Matrix> parts(past_clips.begin(), past_clips.end());
  parts.push_back(current);
  for (const auto& p : parts) {
    if (p.cols() != current.cols()) throw DimensionError("mapper: context clips differ in width");
  }
  return map(ag::Tensor::constant(vstack(parts)), Network::Video);
}

}  // namespace adgen
