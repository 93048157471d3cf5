#pragma once

// Visual mapping network: a linear projection from encoder features to the
// language-model channel width, followed by a transformer encoder over
// [learnable latents; projected frames]. Only the latent positions are
// read out, so any number of input frames maps to exactly num_latent rows.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "adgen/autograd.hpp"
#include "adgen/matrix.hpp"
#include "adgen/nn.hpp"

namespace adgen {

struct MapperConfig {
  std::size_t num_latent = 30;
  std::size_t num_blocks = 2;
  std::size_t channel = 768;
  std::size_t num_heads = 12;
  std::size_t ffn_dim = 3072;
  std::size_t input_dim = 512;
  // Capacity of the learned positional table over input frame slots.
  std::size_t max_frames = 256;
  bool use_positional = true;
  bool share_networks = false;
  std::uint64_t seed = 0;

  // GPT-2 sized network over 512-d CLIP features.
  static MapperConfig small_profile();
  // LLaMA sized network over 768-d features.
  static MapperConfig large_profile();
  // Reduced network for desk-scale training and gradient checks.
  static MapperConfig toy_profile(std::size_t input_dim);

  void validate() const;

  friend bool operator==(const MapperConfig&, const MapperConfig&) = default;
};

// num_latent × channel rows ready to be spliced into a prompt. In no-grad
// mode this is a plain value; during training it carries the graph.
using MappedEmbeddings = ag::Tensor;

enum class Network { Video, Image };

class VisualMapper {
 public:
  explicit VisualMapper(MapperConfig config);
  // Adopts existing parameters (e.g. from a checkpoint); shapes are checked.
  VisualMapper(MapperConfig config, nn::ParamStore params);

  const MapperConfig& config() const noexcept { return config_; }
  nn::ParamStore& params() noexcept { return params_; }
  const nn::ParamStore& params() const noexcept { return params_; }

  // Parameter-name prefix for a network ("video", "image" or "shared").
  std::string prefix(Network network) const;

  // Row-wise affine map F×input_dim → F×channel.
  ag::Tensor project(const ag::Tensor& features, Network network = Network::Video) const;

  MappedEmbeddings map(const ag::Tensor& features, Network network) const;
  MappedEmbeddings map_visual(const Matrix& features) const;
  // Each exemplar is mapped on its own as a single-frame input.
  std::vector<MappedEmbeddings> map_characters(std::span<const std::vector<double>> exemplars) const;
  // Past clips (oldest first) followed by the current clip, mapped as one
  // sequence. With no past clips this is exactly map_visual(current).
  MappedEmbeddings map_with_context(std::span<const Matrix> past_clips, const Matrix& current) const;

 private:
  void init_network(const std::string& prefix, std::uint64_t seed);

  MapperConfig config_;
  nn::ParamStore params_;
};

// Names and shapes the parameter store of `config` must contain.
std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> mapper_parameter_shapes(
    const MapperConfig& config);

}  // namespace adgen
