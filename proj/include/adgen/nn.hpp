#pragma once

// Named parameter storage and the transformer pieces shared by the visual
// mapper, the character refiner and the toy language model.

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "adgen/autograd.hpp"
#include "adgen/matrix.hpp"
#include "adgen/rng.hpp"

namespace adgen::nn {

// Ordered name → parameter map. Copies share tensors; use clone() for a
// deep copy.
class ParamStore {
 public:
  using Entry = std::pair<std::string, ag::Tensor>;

  ag::Tensor& add(const std::string& name, Matrix value);
  ag::Tensor& at(const std::string& name);
  const ag::Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t size() const noexcept { return entries_.size(); }
  std::vector<Entry>::iterator begin() { return entries_.begin(); }
  std::vector<Entry>::iterator end() { return entries_.end(); }
  std::vector<Entry>::const_iterator begin() const { return entries_.begin(); }
  std::vector<Entry>::const_iterator end() const { return entries_.end(); }

  void zero_grad();
  void set_requires_grad(bool on);
  std::size_t scalar_count() const;
  // FNV-1a over names, shapes and raw value bytes.
  std::uint64_t checksum() const;
  ParamStore clone() const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Zero-mean uniform in ±1/sqrt(fan_in).
Matrix scaled_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);
Matrix normal(std::size_t rows, std::size_t cols, double stddev, Rng& rng);

void add_linear(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                Rng& rng);
ag::Tensor apply_linear(const ParamStore& store, const std::string& prefix, const ag::Tensor& x);

void add_layer_norm(ParamStore& store, const std::string& prefix, std::size_t channels);
ag::Tensor apply_layer_norm(const ParamStore& store, const std::string& prefix,
                            const ag::Tensor& x);

struct BlockShape {
  std::size_t channels = 64;
  std::size_t heads = 4;
  std::size_t ffn = 128;
};

// Pre-norm self-attention block:
//   x += Attn(LN1(x)); x += FFN(LN2(x))
void add_self_block(ParamStore& store, const std::string& prefix, const BlockShape& shape,
                    Rng& rng);
ag::Tensor self_block(const ParamStore& store, const std::string& prefix, const ag::Tensor& x,
                      std::size_t heads, bool causal);

// Pre-norm cross-attention block; queries attend to context only:
//   q += Attn(LNq(q), LNkv(ctx)); q += FFN(LN2(q))
void add_cross_block(ParamStore& store, const std::string& prefix, const BlockShape& shape,
                     Rng& rng);
ag::Tensor cross_block(const ParamStore& store, const std::string& prefix,
                       const ag::Tensor& queries, const ag::Tensor& context, std::size_t heads);

}  // namespace adgen::nn
