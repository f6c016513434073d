#pragma once

// Invertible flow built from affine coupling blocks.
//
// A block splits its input channels into x1 = first ceil(d/2) channels and
// x2 = the rest, then computes
//
//   z1 = x1
//   z2 = x2 * exp(gamma * tanh(s(x1))) + t(x1)
//
// and finally reorders the concatenation (z1, z2) with a fixed permutation:
// out[:, k] = concat[:, permutation[k]]. The tanh clamp bounds the per-block
// log-scale to [-gamma, gamma], which keeps the exact inverse well conditioned.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "symot/dense.hpp"
#include "symot/tensor.hpp"

namespace symot {

// y = x W^T + b with W stored [out x in] and b stored [1 x out].
struct Dense {
  Parameter weight;
  Parameter bias;

  Index in_dim() const { return weight.value.cols(); }
  Index out_dim() const { return weight.value.rows(); }
};

// Fully connected network with ReLU between layers and a linear output.
struct Subnet {
  std::vector<Dense> layers;

  Index in_dim() const { return layers.front().in_dim(); }
  Index out_dim() const { return layers.back().out_dim(); }
};

// Channels [0, split) pass through unchanged; see coupling_split().
inline Index coupling_split(Index dim) { return (dim + 1) / 2; }

class CouplingBlock {
 public:
  CouplingBlock(Subnet s_net, Subnet t_net, double gamma, std::vector<std::size_t> permutation);

  Index dim() const { return static_cast<Index>(permutation_.size()); }
  Index split() const { return coupling_split(dim()); }
  double gamma() const { return gamma_; }

  const Subnet& s_net() const { return s_net_; }
  const Subnet& t_net() const { return t_net_; }
  Subnet& s_net() { return s_net_; }
  Subnet& t_net() { return t_net_; }

  const std::vector<std::size_t>& permutation() const { return permutation_; }
  const std::vector<std::size_t>& inverse_permutation() const { return inverse_permutation_; }
  void set_permutation(std::vector<std::size_t> permutation);

 private:
  Subnet s_net_;
  Subnet t_net_;
  double gamma_;
  std::vector<std::size_t> permutation_;
  std::vector<std::size_t> inverse_permutation_;
};

struct FlowShape {
  Index dim = 2;
  std::size_t blocks = 8;
  Index subnet_width = 128;
  std::size_t hidden_layers = 2;
  double gamma = 2.0;
};

class FlowModel {
 public:
  FlowModel(Index dim, std::vector<CouplingBlock> blocks);

  Index dim() const { return dim_; }
  std::size_t size() const { return blocks_.size(); }
  const CouplingBlock& block(std::size_t i) const { return blocks_.at(i); }
  CouplingBlock& block(std::size_t i) { return blocks_.at(i); }
  std::span<const CouplingBlock> blocks() const { return blocks_; }

  // All trainable arrays in declaration order: per block, s-net layers then
  // t-net layers, each as (weight, bias).
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::size_t parameter_count() const;
  void zero_grad();

 private:
  Index dim_;
  std::vector<CouplingBlock> blocks_;
};

// Deterministic initialization. Hidden layers draw U(-1/sqrt(fan_in), 1/sqrt(fan_in));
// output layers are zero, so a fresh model is a pure channel permutation.
// Each block's permutation is drawn uniformly and redrawn while it is the identity.
FlowModel init_model(const FlowShape& shape, std::uint64_t seed);

// --- evaluation without gradients -------------------------------------------

Matrix couple_forward(const CouplingBlock& block, const Matrix& x);
Matrix couple_inverse(const CouplingBlock& block, const Matrix& z);
Matrix forward(const FlowModel& model, const Matrix& x);
Matrix inverse(const FlowModel& model, const Matrix& z);

// --- recorded versions; parameter gradients accumulate into the model ------

Tensor couple_forward(CouplingBlock& block, const Tensor& x);
Tensor couple_inverse(CouplingBlock& block, const Tensor& z);
Tensor forward(FlowModel& model, const Tensor& x);
Tensor inverse(FlowModel& model, const Tensor& z);

// --- checkpoints -----------------------------------------------------------
//
// Binary layout, all integers u32 and floats f64, little-endian:
//   "SYMOT1"
//   dim, block_count
//   per block: permutation[dim], gamma,
//              s_layer_count, (out, in) per layer,
//              t_layer_count, (out, in) per layer
//   parameter payload in parameters() order, row-major.

std::string serialize(const FlowModel& model);
FlowModel deserialize(std::string_view bytes);
void save_checkpoint(const FlowModel& model, const std::filesystem::path& path);
FlowModel load_checkpoint(const std::filesystem::path& path);

}  // namespace symot
