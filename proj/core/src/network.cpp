#include "chisep/network.hpp"

#include <cmath>
#include <map>

#include <nlohmann/json.hpp>

#include "chisep/errors.hpp"
#include "chisep/random.hpp"

namespace chisep {

void NetworkConfig::validate() const {
  if (base_channels < 4) throw InvalidArgument("base_channels must be >= 4, got " + std::to_string(base_channels));
  constexpr int f = 1 << kDepth;
  for (int a = 0; a < 3; ++a) {
    if (patch[a] < f || patch[a] % f != 0) {
      throw InvalidArgument("patch dims must be positive multiples of " + std::to_string(f) + ", got " +
                            to_string(patch));
    }
  }
}

nlohmann::json NetworkConfig::to_json() const {
  return {{"base_channels", base_channels}, {"patch", {patch.nx, patch.ny, patch.nz}}};
}

NetworkConfig NetworkConfig::from_json(const nlohmann::json& j) {
  NetworkConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "base_channels") {
      c.base_channels = value.get<int>();
    } else if (key == "patch") {
      if (value.is_number_integer()) {
        const int p = value.get<int>();
        c.patch = {p, p, p};
      } else {
        const auto v = value.get<std::vector<int>>();
        if (v.size() != 3) throw InvalidArgument("network.patch must be an integer or [nx, ny, nz]");
        c.patch = {v[0], v[1], v[2]};
      }
    } else {
      throw InvalidArgument("unknown network key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------- ConvBnRelu

template <typename T>
ConvBnRelu<T>::ConvBnRelu(const std::string& name, int cin, int cout)
    : conv(name + ".conv", cin, cout), bn(name + ".bn", cout) {}

template <typename T>
Tensor<T> ConvBnRelu<T>::forward(const Tensor<T>& x, const PassMode& mode) {
  return relu.forward(bn.forward(conv.forward(x, mode), mode), mode);
}

template <typename T>
Tensor<T> ConvBnRelu<T>::backward(const Tensor<T>& dy) {
  return conv.backward(bn.backward(relu.backward(dy)));
}

template <typename T>
void ConvBnRelu<T>::collect(std::vector<Param<T>*>& out) {
  conv.collect(out);
  bn.collect(out);
}

// ---------------------------------------------------------------- Encoder

template <typename T>
Encoder<T>::Encoder(const std::string& name, int cin, int base) {
  int c_in = cin;
  for (int b = 0; b < 3; ++b) {
    const int c = base << b;
    const std::string prefix = name + ".block" + std::to_string(b);
    layers_[2 * b] = ConvBnRelu<T>(prefix + ".layer0", c_in, c);
    layers_[2 * b + 1] = ConvBnRelu<T>(prefix + ".layer1", c, c);
    c_in = c;
  }
}

template <typename T>
Tensor<T> Encoder<T>::forward(const Tensor<T>& x, const PassMode& mode, std::array<Tensor<T>, 3>* skips) {
  Tensor<T> h = x;
  for (int b = 0; b < 3; ++b) {
    h = layers_[2 * b].forward(h, mode);
    h = layers_[2 * b + 1].forward(h, mode);
    if (skips) (*skips)[b] = h;
    h = pools_[b].forward(h, mode);
  }
  return h;
}

template <typename T>
void Encoder<T>::backward(const Tensor<T>& dbottleneck, const std::array<Tensor<T>, 3>* dskips) {
  Tensor<T> d = dbottleneck;
  for (int b = 2; b >= 0; --b) {
    d = pools_[b].backward(d);
    if (dskips && !(*dskips)[b].data.empty()) {
      add_inplace<T>(d.data, (*dskips)[b].data);
    }
    d = layers_[2 * b + 1].backward(d);
    d = layers_[2 * b].backward(d);
  }
}

template <typename T>
void Encoder<T>::collect(std::vector<Param<T>*>& out) {
  for (auto& l : layers_) l.collect(out);
}

template <typename T>
void Encoder<T>::collect_buffers(std::vector<Param<T>*>& out) {
  for (auto& l : layers_) l.collect_buffers(out);
}

// ---------------------------------------------------------------- Fusion

template <typename T>
Fusion<T>::Fusion(const std::string& name, int channels)
    : conv_gate(name + ".gate", channels, channels),
      conv_guide(name + ".guide", channels, channels),
      conv_feat(name + ".feat", channels, channels),
      bn(name + ".bn", channels),
      block0(name + ".block0", channels, channels),
      block1(name + ".block1", channels, channels) {}

template <typename T>
Tensor<T> Fusion<T>::forward(const Tensor<T>& guide, const Tensor<T>& f_v, const PassMode& mode) {
  require_shape(guide.shape, f_v.shape, "Fusion::forward");
  Tensor<T> a = conv_gate.forward(guide, mode);
  for (auto& v : a.data) v = T(1) / (T(1) + std::exp(-v));
  Tensor<T> vg = conv_guide.forward(guide, mode);
  Tensor<T> vf = conv_feat.forward(f_v, mode);
  Tensor<T> mix(guide.shape);
  for (std::size_t i = 0; i < mix.size(); ++i) mix.data[i] = vg.data[i] * a.data[i] + vf.data[i] * (T(1) - a.data[i]);
  Tensor<T> y = block1.forward(block0.forward(bn.forward(mix, mode), mode), mode);
  alpha_ = std::move(a);
  if (mode.keep) {
    vg_ = std::move(vg);
    vf_ = std::move(vf);
  }
  return y;
}

template <typename T>
void Fusion<T>::backward(const Tensor<T>& dy, Tensor<T>& dguide, Tensor<T>& df_v) {
  const Tensor<T> dmix = bn.backward(block0.backward(block1.backward(dy)));
  Tensor<T> dgate(dmix.shape), dvg(dmix.shape), dvf(dmix.shape);
  for (std::size_t i = 0; i < dmix.size(); ++i) {
    const T a = alpha_.data[i];
    dvg.data[i] = dmix.data[i] * a;
    dvf.data[i] = dmix.data[i] * (T(1) - a);
    dgate.data[i] = dmix.data[i] * (vg_.data[i] - vf_.data[i]) * a * (T(1) - a);
  }
  dguide = conv_gate.backward(dgate);
  add_inplace<T>(dguide.data, conv_guide.backward(dvg).data);
  df_v = conv_feat.backward(dvf);
}

template <typename T>
void Fusion<T>::collect(std::vector<Param<T>*>& out) {
  conv_gate.collect(out);
  conv_guide.collect(out);
  conv_feat.collect(out);
  bn.collect(out);
  block0.collect(out);
  block1.collect(out);
}

template <typename T>
void Fusion<T>::collect_buffers(std::vector<Param<T>*>& out) {
  bn.collect_buffers(out);
  block0.collect_buffers(out);
  block1.collect_buffers(out);
}

// ---------------------------------------------------------------- Decoder

template <typename T>
Decoder<T>::Decoder(const std::string& name, int base) {
  // Block b upsamples to the scale of Enc1 skip (2 - b).
  const std::array<int, 3> in{4 * base, 4 * base, 2 * base};
  const std::array<int, 3> out{4 * base, 2 * base, base};
  for (int b = 0; b < 3; ++b) {
    const std::string prefix = name + ".block" + std::to_string(b);
    up_[b] = ConvT2<T>(prefix + ".up", in[b], out[b]);
    up_channels_[b] = out[b];
    layers_[2 * b] = ConvBnRelu<T>(prefix + ".layer0", 2 * out[b], out[b]);
    layers_[2 * b + 1] = ConvBnRelu<T>(prefix + ".layer1", out[b], out[b]);
  }
  head_ = Conv1<T>(name + ".head", base, 1);
}

template <typename T>
Tensor<T> Decoder<T>::forward(const Tensor<T>& feature, const std::array<Tensor<T>, 3>& skips, const PassMode& mode) {
  Tensor<T> h = feature;
  for (int b = 0; b < 3; ++b) {
    const Tensor<T>& skip = skips[2 - b];
    if (skip.data.empty()) throw InvalidArgument("Decoder: missing skip feature at scale " + std::to_string(2 - b));
    h = up_[b].forward(h, mode);
    h = concat_channels(h, skip);
    h = layers_[2 * b].forward(h, mode);
    h = layers_[2 * b + 1].forward(h, mode);
  }
  return head_.forward(h, mode);
}

template <typename T>
Tensor<T> Decoder<T>::backward(const Tensor<T>& dy, std::array<Tensor<T>, 3>& dskips) {
  Tensor<T> d = head_.backward(dy);
  for (int b = 2; b >= 0; --b) {
    d = layers_[2 * b + 1].backward(d);
    d = layers_[2 * b].backward(d);
    Tensor<T> dup, dskip;
    split_channels(d, up_channels_[b], dup, dskip);
    Tensor<T>& acc = dskips[2 - b];
    if (acc.data.empty()) {
      acc = std::move(dskip);
    } else {
      add_inplace<T>(acc.data, dskip.data);
    }
    d = up_[b].backward(dup);
  }
  return d;
}

template <typename T>
void Decoder<T>::collect(std::vector<Param<T>*>& out) {
  for (int b = 0; b < 3; ++b) {
    up_[b].collect(out);
    layers_[2 * b].collect(out);
    layers_[2 * b + 1].collect(out);
  }
  head_.collect(out);
}

template <typename T>
void Decoder<T>::collect_buffers(std::vector<Param<T>*>& out) {
  for (auto& l : layers_) l.collect_buffers(out);
}

// ---------------------------------------------------------------- DualBranchNet

template <typename T>
DualBranchNet<T>::DualBranchNet(const NetworkConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int c = cfg_.base_channels;
  enc1_ = Encoder<T>("enc1", 3, c);
  enc2_ = Encoder<T>("enc2", 1, c);
  enc3_ = Encoder<T>("enc3", 1, c);
  fuse_pos_ = Fusion<T>("fuse_pos", 4 * c);
  fuse_neg_ = Fusion<T>("fuse_neg", 4 * c);
  dec_pos_ = Decoder<T>("dec_pos", c);
  dec_neg_ = Decoder<T>("dec_neg", c);
}

template <typename T>
void DualBranchNet<T>::init(std::uint64_t seed) {
  std::uint64_t stream = 0;
  for (Param<T>* p : all_tensors()) {
    if (p->gaussian_init) {
      Rng rng(mix_seed(seed, stream));
      std::normal_distribution<double> dist(0.0, 0.01);
      for (auto& v : p->value) v = static_cast<T>(dist(rng));
    } else {
      const bool one = p->name.ends_with(".gamma") || p->name.ends_with(".running_var");
      std::fill(p->value.begin(), p->value.end(), one ? T(1) : T(0));
    }
    ++stream;
  }
  zero_grad();
}

template <typename T>
ForwardArtifacts<T> DualBranchNet<T>::forward(const Tensor<T>& x, const PassMode& mode) {
  const TensorShape s = x.shape;
  if (s.c != 3) throw InvalidArgument("network input must have 3 channels, got " + std::to_string(s.c));
  if (s.n < 1) throw InvalidArgument("network input batch is empty");
  for (int a = 0; a < 3; ++a) {
    const int d = a == 0 ? s.nx : a == 1 ? s.ny : s.nz;
    if (d < 8 || d % 8 != 0) throw InvalidArgument("network input spatial dims must be multiples of 8, got " + to_string(s));
  }
  Tensor<T> qsm({s.n, s.nx, s.ny, s.nz, 1});
  for (std::size_t i = 0; i < qsm.size(); ++i) qsm.data[i] = x.data[3 * i + 2];  // qsm channel

  ForwardArtifacts<T> out;
  out.f_v = enc1_.forward(x, mode, &out.skips);
  out.guide_pos = enc2_.forward(qsm, mode, nullptr);
  out.guide_neg = enc3_.forward(qsm, mode, nullptr);
  out.f_pos = fuse_pos_.forward(out.guide_pos, out.f_v, mode);
  out.f_neg = fuse_neg_.forward(out.guide_neg, out.f_v, mode);
  out.chi_pos = dec_pos_.forward(out.f_pos, out.skips, mode);
  out.chi_neg = dec_neg_.forward(out.f_neg, out.skips, mode);
  bottleneck_ = out.f_v.shape;
  out_shape_ = out.chi_pos.shape;
  return out;
}

namespace {

template <typename T>
Tensor<T> or_zero(const Tensor<T>& t, const TensorShape& s, const char* what) {
  if (t.data.empty()) return Tensor<T>(s);
  require_shape(t.shape, s, what);
  return t;
}

}  // namespace

template <typename T>
void DualBranchNet<T>::backward(const ArtifactGrads<T>& g) {
  std::array<Tensor<T>, 3> dskips;
  Tensor<T> dfpos = dec_pos_.backward(or_zero(g.chi_pos, out_shape_, "grad chi_pos"), dskips);
  Tensor<T> dfneg = dec_neg_.backward(or_zero(g.chi_neg, out_shape_, "grad chi_neg"), dskips);
  if (!g.f_pos.data.empty()) add_inplace<T>(dfpos.data, or_zero(g.f_pos, bottleneck_, "grad f_pos").data);
  if (!g.f_neg.data.empty()) add_inplace<T>(dfneg.data, or_zero(g.f_neg, bottleneck_, "grad f_neg").data);

  Tensor<T> dguide_pos, dguide_neg, dfv_pos, dfv_neg;
  fuse_pos_.backward(dfpos, dguide_pos, dfv_pos);
  fuse_neg_.backward(dfneg, dguide_neg, dfv_neg);
  if (!g.guide_pos.data.empty()) add_inplace<T>(dguide_pos.data, or_zero(g.guide_pos, bottleneck_, "grad guide_pos").data);
  if (!g.guide_neg.data.empty()) add_inplace<T>(dguide_neg.data, or_zero(g.guide_neg, bottleneck_, "grad guide_neg").data);
  enc2_.backward(dguide_pos, nullptr);
  enc3_.backward(dguide_neg, nullptr);

  add_inplace<T>(dfv_pos.data, dfv_neg.data);
  enc1_.backward(dfv_pos, &dskips);
}

template <typename T>
std::vector<Param<T>*> DualBranchNet<T>::params() {
  std::vector<Param<T>*> out;
  enc1_.collect(out);
  enc2_.collect(out);
  enc3_.collect(out);
  fuse_pos_.collect(out);
  fuse_neg_.collect(out);
  dec_pos_.collect(out);
  dec_neg_.collect(out);
  return out;
}

template <typename T>
std::vector<Param<T>*> DualBranchNet<T>::buffers() {
  std::vector<Param<T>*> out;
  enc1_.collect_buffers(out);
  enc2_.collect_buffers(out);
  enc3_.collect_buffers(out);
  fuse_pos_.collect_buffers(out);
  fuse_neg_.collect_buffers(out);
  dec_pos_.collect_buffers(out);
  dec_neg_.collect_buffers(out);
  return out;
}

template <typename T>
std::vector<Param<T>*> DualBranchNet<T>::all_tensors() {
  auto out = params();
  auto b = buffers();
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

template <typename T>
void DualBranchNet<T>::zero_grad() {
  for (Param<T>* p : params()) std::fill(p->grad.begin(), p->grad.end(), T(0));
}

template <typename Dst, typename Src>
void copy_params(DualBranchNet<Dst>& dst, DualBranchNet<Src>& src) {
  std::map<std::string, Param<Src>*> by_name;
  for (Param<Src>* p : src.all_tensors()) by_name[p->name] = p;
  for (Param<Dst>* p : dst.all_tensors()) {
    auto it = by_name.find(p->name);
    if (it == by_name.end() || it->second->size() != p->size()) {
      throw InvalidArgument("copy_params: no matching tensor for " + p->name);
    }
    for (std::size_t i = 0; i < p->size(); ++i) p->value[i] = static_cast<Dst>(it->second->value[i]);
  }
}

template struct ForwardArtifacts<float>;
template struct ForwardArtifacts<double>;
template class ConvBnRelu<float>;
template class ConvBnRelu<double>;
template class Encoder<float>;
template class Encoder<double>;
template class Fusion<float>;
template class Fusion<double>;
template class Decoder<float>;
template class Decoder<double>;
template class DualBranchNet<float>;
template class DualBranchNet<double>;
template void copy_params<float, double>(DualBranchNet<float>&, DualBranchNet<double>&);
template void copy_params<double, float>(DualBranchNet<double>&, DualBranchNet<float>&);
template void copy_params<float, float>(DualBranchNet<float>&, DualBranchNet<float>&);
template void copy_params<double, double>(DualBranchNet<double>&, DualBranchNet<double>&);

}  // namespace chisep
