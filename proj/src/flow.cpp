#include "symot/flow.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "symot/errors.hpp"
#include "symot/random.hpp"

namespace symot {
namespace {

bool is_bijection(const std::vector<std::size_t>& p) {
  std::vector<bool> seen(p.size(), false);
  for (std::size_t v : p) {
    if (v >= p.size() || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

bool is_identity(const std::vector<std::size_t>& p) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] != i) return false;
  }
  return true;
}

std::vector<std::size_t> iota_range(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> r(end - begin);
  std::iota(r.begin(), r.end(), begin);
  return r;
}

void validate_subnet(const Subnet& net, Index in, Index out, const char* name) {
  if (net.layers.empty()) throw DimensionError(std::string(name) + ": subnet has no layers");
  Index expected_in = in;
  for (const Dense& layer : net.layers) {
    if (layer.in_dim() != expected_in) throw DimensionError(std::string(name) + ": layer dimensions do not chain");
    if (layer.bias.value.rows() != 1 || layer.bias.value.cols() != layer.out_dim()) {
      throw DimensionError(std::string(name) + ": bias shape does not match layer");
    }
    expected_in = layer.out_dim();
  }
  if (expected_in != out) throw DimensionError(std::string(name) + ": output width must equal the coupled half-width");
}

// Shared coupling arithmetic for Matrix and Tensor. `bind` maps a Parameter
// to the array type in use.
template <class Array, class Bind>
Array apply_subnet(const Subnet& net, const Array& x, Bind& bind) {
  Array h = x;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const Dense& layer = net.layers[i];
    h = linear(h, bind(layer.weight), bind(layer.bias));
    if (i + 1 < net.layers.size()) h = relu(h);
  }
  return h;
}

template <class Array, class Bind>
Array couple_forward_impl(const CouplingBlock& block, const Array& x, Bind&& bind) {
  const auto d = static_cast<std::size_t>(block.dim());
  const auto split = static_cast<std::size_t>(block.split());
  const Array x1 = gather_cols(x, iota_range(0, split));
  const Array x2 = gather_cols(x, iota_range(split, d));
  const Array s = apply_subnet(block.s_net(), x1, bind);
  const Array t = apply_subnet(block.t_net(), x1, bind);
  const Array z2 = hadamard(x2, exp(scale(tanh(s), block.gamma()))) + t;
  return gather_cols(concat_cols(x1, z2), block.permutation());
}

template <class Array, class Bind>
Array couple_inverse_impl(const CouplingBlock& block, const Array& z, Bind&& bind) {
  const auto d = static_cast<std::size_t>(block.dim());
  const auto split = static_cast<std::size_t>(block.split());
  const Array unpermuted = gather_cols(z, block.inverse_permutation());
  const Array z1 = gather_cols(unpermuted, iota_range(0, split));
  const Array z2 = gather_cols(unpermuted, iota_range(split, d));
  const Array s = apply_subnet(block.s_net(), z1, bind);
  const Array t = apply_subnet(block.t_net(), z1, bind);
  const Array x2 = hadamard(z2 - t, exp(scale(tanh(s), -block.gamma())));
  return concat_cols(z1, x2);
}

const Matrix& bind_value(const Parameter& p) { return p.value; }

void check_input(Index model_dim, Index cols, Index rank) {
  if (rank != 2) throw DimensionError("flow: input must be a rank-2 [n x d] array");
  if (cols != model_dim) {
    throw DimensionError("flow: input has " + std::to_string(cols) + " channels, model expects " + std::to_string(model_dim));
  }
}

}  // namespace

// --- CouplingBlock ---------------------------------------------------------

CouplingBlock::CouplingBlock(Subnet s_net, Subnet t_net, double gamma, std::vector<std::size_t> permutation)
    : s_net_(std::move(s_net)), t_net_(std::move(t_net)), gamma_(gamma) {
  if (permutation.size() < 2) throw DimensionError("CouplingBlock: dimension must be at least 2");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DomainError("CouplingBlock: gamma must be positive");
  set_permutation(std::move(permutation));
  const Index split = coupling_split(dim());
  validate_subnet(s_net_, split, dim() - split, "s_net");
  validate_subnet(t_net_, split, dim() - split, "t_net");
}

void CouplingBlock::set_permutation(std::vector<std::size_t> permutation) {
  if (!permutation_.empty() && permutation.size() != permutation_.size()) {
    throw DimensionError("set_permutation: dimension cannot change");
  }
  if (!is_bijection(permutation)) throw DomainError("CouplingBlock: permutation is not a bijection");
  inverse_permutation_.assign(permutation.size(), 0);
  for (std::size_t k = 0; k < permutation.size(); ++k) inverse_permutation_[permutation[k]] = k;
  permutation_ = std::move(permutation);
}

// --- FlowModel -------------------------------------------------------------

FlowModel::FlowModel(Index dim, std::vector<CouplingBlock> blocks) : dim_(dim), blocks_(std::move(blocks)) {
  if (dim < 2) throw DimensionError("FlowModel: dimension must be at least 2");
  if (blocks_.empty()) throw DomainError("FlowModel: at least one block is required");
  for (const CouplingBlock& b : blocks_) {
    if (b.dim() != dim) throw DimensionError("FlowModel: block dimension differs from model dimension");
  }
}

std::vector<Parameter*> FlowModel::parameters() {
  std::vector<Parameter*> out;
  for (CouplingBlock& b : blocks_) {
    for (Subnet* net : {&b.s_net(), &b.t_net()}) {
      for (Dense& layer : net->layers) {
        out.push_back(&layer.weight);
        out.push_back(&layer.bias);
      }
    }
  }
  return out;
}

std::vector<const Parameter*> FlowModel::parameters() const {
  std::vector<const Parameter*> out;
  for (const CouplingBlock& b : blocks_) {
    for (const Subnet* net : {&b.s_net(), &b.t_net()}) {
      for (const Dense& layer : net->layers) {
        out.push_back(&layer.weight);
        out.push_back(&layer.bias);
      }
    }
  }
  return out;
}

std::size_t FlowModel::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter* p : parameters()) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void FlowModel::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

// --- initialization --------------------------------------------------------

namespace {

Dense make_dense(Index in, Index out, bool zero, Rng& rng) {
  Dense layer{Parameter(Matrix::Zero(out, in)), Parameter(Matrix::Zero(1, out))};
  if (!zero) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (Index i = 0; i < out; ++i) {
      for (Index j = 0; j < in; ++j) layer.weight.value(i, j) = rng.uniform(-bound, bound);
    }
    for (Index j = 0; j < out; ++j) layer.bias.value(0, j) = rng.uniform(-bound, bound);
  }
  return layer;
}

Subnet make_subnet(Index in, Index out, const FlowShape& shape, Rng& rng) {
  Subnet net;
  Index width_in = in;
  for (std::size_t h = 0; h < shape.hidden_layers; ++h) {
    net.layers.push_back(make_dense(width_in, shape.subnet_width, false, rng));
    width_in = shape.subnet_width;
  }
  net.layers.push_back(make_dense(width_in, out, true, rng));
  return net;
}

}  // namespace

FlowModel init_model(const FlowShape& shape, std::uint64_t seed) {
  if (shape.dim < 2) throw DimensionError("init_model: dimension must be at least 2");
  if (shape.blocks < 1) throw DomainError("init_model: at least one block is required");
  if (shape.subnet_width < 1) throw DomainError("init_model: subnet width must be positive");

  Rng rng(seed);
  const Index split = coupling_split(shape.dim);
  const auto d = static_cast<std::size_t>(shape.dim);
  std::vector<CouplingBlock> blocks;
  blocks.reserve(shape.blocks);
  for (std::size_t b = 0; b < shape.blocks; ++b) {
    Subnet s = make_subnet(split, shape.dim - split, shape, rng);
    Subnet t = make_subnet(split, shape.dim - split, shape, rng);
    std::vector<std::size_t> perm = rng.permutation(d);
    while (is_identity(perm)) perm = rng.permutation(d);
    blocks.emplace_back(std::move(s), std::move(t), shape.gamma, std::move(perm));
  }
  return FlowModel(shape.dim, std::move(blocks));
}

// --- evaluation ------------------------------------------------------------

Matrix couple_forward(const CouplingBlock& block, const Matrix& x) {
  check_input(block.dim(), x.cols(), 2);
  return couple_forward_impl<Matrix>(block, x, bind_value);
}

Matrix couple_inverse(const CouplingBlock& block, const Matrix& z) {
  check_input(block.dim(), z.cols(), 2);
  return couple_inverse_impl<Matrix>(block, z, bind_value);
}

Matrix forward(const FlowModel& model, const Matrix& x) {
  check_input(model.dim(), x.cols(), 2);
  Matrix h = x;
  for (const CouplingBlock& b : model.blocks()) h = couple_forward_impl<Matrix>(b, h, bind_value);
  return h;
}

Matrix inverse(const FlowModel& model, const Matrix& z) {
  check_input(model.dim(), z.cols(), 2);
  Matrix h = z;
  for (std::size_t i = model.size(); i-- > 0;) h = couple_inverse_impl<Matrix>(model.block(i), h, bind_value);
  return h;
}

Tensor couple_forward(CouplingBlock& block, const Tensor& x) {
  check_input(block.dim(), x.rank() == 2 ? x.shape()[1] : 0, x.rank());
  Graph& g = x.graph();
  return couple_forward_impl<Tensor>(block, x, [&g](const Parameter& p) { return g.parameter(const_cast<Parameter&>(p)); });
}

Tensor couple_inverse(CouplingBlock& block, const Tensor& z) {
  check_input(block.dim(), z.rank() == 2 ? z.shape()[1] : 0, z.rank());
  Graph& g = z.graph();
  return couple_inverse_impl<Tensor>(block, z, [&g](const Parameter& p) { return g.parameter(const_cast<Parameter&>(p)); });
}

Tensor forward(FlowModel& model, const Tensor& x) {
  check_input(model.dim(), x.rank() == 2 ? x.shape()[1] : 0, x.rank());
  Tensor h = x;
  for (std::size_t i = 0; i < model.size(); ++i) h = couple_forward(model.block(i), h);
  return h;
}

Tensor inverse(FlowModel& model, const Tensor& z) {
  check_input(model.dim(), z.rank() == 2 ? z.shape()[1] : 0, z.rank());
  Tensor h = z;
  for (std::size_t i = model.size(); i-- > 0;) h = couple_inverse(model.block(i), h);
  return h;
}

// --- checkpoints -----------------------------------------------------------

namespace {

constexpr std::string_view kMagic = "SYMOT1";

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  }
  void raw(std::string_view s) { out_.append(s); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  std::string_view raw(std::size_t n) {
    need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw FormatError("checkpoint: unexpected end of data");
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

void write_subnet_shape(Writer& w, const Subnet& net) {
  w.u32(static_cast<std::uint32_t>(net.layers.size()));
  for (const Dense& layer : net.layers) {
    w.u32(static_cast<std::uint32_t>(layer.out_dim()));
    w.u32(static_cast<std::uint32_t>(layer.in_dim()));
  }
}

Subnet read_subnet_shape(Reader& r) {
  const std::uint32_t count = r.u32();
  if (count == 0 || count > 1024) throw FormatError("checkpoint: implausible subnet layer count");
  Subnet net;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t out = r.u32();
    const std::uint32_t in = r.u32();
    if (out == 0 || in == 0 || out > (1u << 20) || in > (1u << 20)) throw FormatError("checkpoint: implausible layer shape");
    net.layers.push_back(Dense{Parameter(Matrix::Zero(out, in)), Parameter(Matrix::Zero(1, out))});
  }
  return net;
}

}  // namespace

std::string serialize(const FlowModel& model) {
  Writer w;
  w.raw(kMagic);
  w.u32(static_cast<std::uint32_t>(model.dim()));
  w.u32(static_cast<std::uint32_t>(model.size()));
  for (const CouplingBlock& b : model.blocks()) {
    for (std::size_t p : b.permutation()) w.u32(static_cast<std::uint32_t>(p));
    w.f64(b.gamma());
    write_subnet_shape(w, b.s_net());
    write_subnet_shape(w, b.t_net());
  }
  for (const Parameter* p : model.parameters()) {
    const Matrix& v = p->value;
    for (Index i = 0; i < v.size(); ++i) w.f64(v.data()[i]);
  }
  return w.take();
}

FlowModel deserialize(std::string_view bytes) {
  Reader r(bytes);
  if (bytes.size() < kMagic.size() || r.raw(kMagic.size()) != kMagic) throw FormatError("checkpoint: bad magic");
  const std::uint32_t dim = r.u32();
  const std::uint32_t block_count = r.u32();
  if (dim < 2 || dim > (1u << 16)) throw FormatError("checkpoint: implausible dimension");
  if (block_count == 0 || block_count > 4096) throw FormatError("checkpoint: implausible block count");

  std::vector<CouplingBlock> blocks;
  try {
    for (std::uint32_t b = 0; b < block_count; ++b) {
      std::vector<std::size_t> perm(dim);
      for (auto& p : perm) p = r.u32();
      const double gamma = r.f64();
      Subnet s = read_subnet_shape(r);
      Subnet t = read_subnet_shape(r);
      blocks.emplace_back(std::move(s), std::move(t), gamma, std::move(perm));
    }
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    throw FormatError(std::string("checkpoint: header rejected: ") + e.what());
  }

  FlowModel model(static_cast<Index>(dim), std::move(blocks));
  std::size_t expected = 0;
  for (const Parameter* p : std::as_const(model).parameters()) expected += static_cast<std::size_t>(p->value.size());
  if (r.remaining() != expected * 8) {
    throw FormatError("checkpoint: payload holds " + std::to_string(r.remaining()) + " bytes, header implies " +
                      std::to_string(expected * 8));
  }
  for (Parameter* p : model.parameters()) {
    for (Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = r.f64();
    if (!p->value.allFinite()) throw FormatError("checkpoint: non-finite parameter");
    p->zero_grad();
  }
  return model;
}

void save_checkpoint(const FlowModel& model, const std::filesystem::path& path) {
  const std::string bytes = serialize(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

FlowModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

}  // namespace symot
