#include "adgen/nn.hpp"

#include <cmath>
#include <cstring>

#include "adgen/errors.hpp"

namespace adgen::nn {

ag::Tensor& ParamStore::add(const std::string& name, Matrix value) {
  if (contains(name)) throw ValidationError("duplicate parameter '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.emplace_back(name, ag::Tensor::parameter(std::move(value)));
  return entries_.back().second;
}

ag::Tensor& ParamStore::at(const std::string& name) {
  const auto it = index_.find(name);
  if (it == index_.end()) throw ValidationError("unknown parameter '" + name + "'");
  return entries_[it->second].second;
}

const ag::Tensor& ParamStore::at(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw ValidationError("unknown parameter '" + name + "'");
  return entries_[it->second].second;
}

void ParamStore::zero_grad() {
  for (auto& [name, t] : entries_) t.zero_grad();
}

void ParamStore::set_requires_grad(bool on) {
  for (auto& [name, t] : entries_) t.set_requires_grad(on);
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.value().size();
  return n;
}

std::uint64_t ParamStore::checksum() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& [name, t] : entries_) {
    mix(name.data(), name.size());
    const std::uint64_t dims[2] = {t.rows(), t.cols()};
    mix(dims, sizeof(dims));
    mix(t.value().data(), t.value().size() * sizeof(double));
  }
  return h;
}

ParamStore ParamStore::clone() const {
  ParamStore out;
  for (const auto& [name, t] : entries_) {
    auto& copy = out.add(name, t.value());
    copy.set_requires_grad(t.requires_grad());
  }
  return out;
}

Matrix scaled_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Matrix m(fan_in, fan_out);
  for (double& v : m.values()) v = rng.uniform(-bound, bound);
  return m;
}

Matrix normal(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = stddev * rng.normal();
  return m;
}

void add_linear(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                Rng& rng) {
  store.add(prefix + ".weight", scaled_uniform(in, out, rng));
  store.add(prefix + ".bias", Matrix(1, out));
}

ag::Tensor apply_linear(const ParamStore& store, const std::string& prefix, const ag::Tensor& x) {
  return ag::linear(x, store.at(prefix + ".weight"), store.at(prefix + ".bias"));
}

void add_layer_norm(ParamStore& store, const std::string& prefix, std::size_t channels) {
  store.add(prefix + ".gain", Matrix(1, channels, 1.0));
  store.add(prefix + ".bias", Matrix(1, channels));
}

ag::Tensor apply_layer_norm(const ParamStore& store, const std::string& prefix,
                            const ag::Tensor& x) {
  return ag::layer_norm(x, store.at(prefix + ".gain"), store.at(prefix + ".bias"));
}

namespace {

void add_attention(ParamStore& store, const std::string& prefix, std::size_t channels, Rng& rng) {
  add_linear(store, prefix + ".q", channels, channels, rng);
  add_linear(store, prefix + ".k", channels, channels, rng);
  add_linear(store, prefix + ".v", channels, channels, rng);
  add_linear(store, prefix + ".out", channels, channels, rng);
}

void add_feed_forward(ParamStore& store, const std::string& prefix, const BlockShape& shape,
                      Rng& rng) {
  add_linear(store, prefix + ".fc1", shape.channels, shape.ffn, rng);
  add_linear(store, prefix + ".fc2", shape.ffn, shape.channels, rng);
}

ag::Tensor feed_forward(const ParamStore& store, const std::string& prefix, const ag::Tensor& x) {
  return apply_linear(store, prefix + ".fc2", ag::gelu(apply_linear(store, prefix + ".fc1", x)));
}

ag::Tensor attend(const ParamStore& store, const std::string& prefix, const ag::Tensor& queries,
                  const ag::Tensor& keys_values, std::size_t heads, bool causal) {
  const ag::Tensor q = apply_linear(store, prefix + ".q", queries);
  const ag::Tensor k = apply_linear(store, prefix + ".k", keys_values);
  const ag::Tensor v = apply_linear(store, prefix + ".v", keys_values);
  return apply_linear(store, prefix + ".out", ag::attention(q, k, v, heads, causal));
}

}  // namespace

void add_self_block(ParamStore& store, const std::string& prefix, const BlockShape& shape,
                    Rng& rng) {
  add_layer_norm(store, prefix + ".ln1", shape.channels);
  add_attention(store, prefix + ".attn", shape.channels, rng);
  add_layer_norm(store, prefix + ".ln2", shape.channels);
  add_feed_forward(store, prefix + ".ffn", shape, rng);
}

ag::Tensor self_block(const ParamStore& store, const std::string& prefix, const ag::Tensor& x,
                      std::size_t heads, bool causal) {
  const ag::Tensor h = apply_layer_norm(store, prefix + ".ln1", x);
  const ag::Tensor y = ag::add(x, attend(store, prefix + ".attn", h, h, heads, causal));
  return ag::add(y, feed_forward(store, prefix + ".ffn",
                                 apply_layer_norm(store, prefix + ".ln2", y)));
}

void add_cross_block(ParamStore& store, const std::string& prefix, const BlockShape& shape,
                     Rng& rng) {
  add_layer_norm(store, prefix + ".ln_q", shape.channels);
  add_layer_norm(store, prefix + ".ln_kv", shape.channels);
  add_attention(store, prefix + ".attn", shape.channels, rng);
  add_layer_norm(store, prefix + ".ln2", shape.channels);
  add_feed_forward(store, prefix + ".ffn", shape, rng);
}

ag::Tensor cross_block(const ParamStore& store, const std::string& prefix,
                       const ag::Tensor& queries, const ag::Tensor& context, std::size_t heads) {
  const ag::Tensor q = apply_layer_norm(store, prefix + ".ln_q", queries);
  const ag::Tensor kv = apply_layer_norm(store, prefix + ".ln_kv", context);
  const ag::Tensor y = ag::add(queries, attend(store, prefix + ".attn", q, kv, heads, false));
  return ag::add(y, feed_forward(store, prefix + ".ffn",
                                 apply_layer_norm(store, prefix + ".ln2", y)));
}

}  // namespace adgen::nn
