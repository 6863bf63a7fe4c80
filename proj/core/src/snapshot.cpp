#include "radial/snapshot.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <type_traits>

namespace radial {

namespace {

constexpr char kMagic[8] = {'R', 'B', 'N', 'N', 'S', 'N', 'A', 'P'};
constexpr std::uint32_t kVersion = 1;

LayerPosterior capture_layer(const VariationalLayer& layer) {
  LayerPosterior out;
  out.in_features = layer.in_features();
  out.out_features = layer.out_features();
  out.mu.reserve(layer.num_params());
  out.sigma.reserve(layer.num_params());
  auto append = [&](const Tensor& mu, const Tensor& rho) {
    for (double v : mu.data()) out.mu.push_back(v);
    for (double r : rho.data()) out.sigma.push_back(softplus(r));
  };
  append(layer.weight_mu(), layer.weight_rho());
  append(layer.bias_mu(), layer.bias_rho());
  return out;
}

void check_layer(const LayerPosterior& p, const VariationalLayer& layer, const std::string& where) {
  if (p.in_features != layer.in_features() || p.out_features != layer.out_features())
    throw std::invalid_argument("snapshot " + where + " is " + std::to_string(p.out_features) + "x" +
                                std::to_string(p.in_features) + ", network layer is " +
                                std::to_string(layer.out_features()) + "x" +
                                std::to_string(layer.in_features()));
}

// Little-endian byte writer/reader so files are portable across hosts.
class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  void expect(const char* p, std::size_t n) {
    need(n);
    if (std::memcmp(in_.data() + pos_, p, n) != 0)
      throw std::runtime_error("snapshot: bad magic at offset " + std::to_string(pos_));
    pos_ += n;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n)
      throw std::runtime_error("snapshot: truncated at offset " + std::to_string(pos_));
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

void write_layer(Writer& w, const LayerPosterior& p) {
  w.u64(p.in_features);
  w.u64(p.out_features);
  for (double v : p.mu) w.f64(v);
  for (double v : p.sigma) w.f64(v);
}

LayerPosterior read_layer(Reader& r) {
  LayerPosterior p;
  p.in_features = r.u64();
  p.out_features = r.u64();
  if (p.in_features == 0 || p.out_features == 0 || p.in_features > (1u << 24) ||
      p.out_features > (1u << 24))
    throw std::runtime_error("snapshot: implausible layer shape before offset " +
                             std::to_string(r.pos()));
  const std::size_t n = p.out_features * p.in_features + p.out_features;
  p.mu.resize(n);
  p.sigma.resize(n);
  for (double& v : p.mu) v = r.f64();
  for (double& v : p.sigma) {
    v = r.f64();
    if (!(v > 0.0))
      throw std::runtime_error("snapshot: non-positive sigma before offset " +
                               std::to_string(r.pos()));
  }
  return p;
}

}  // namespace

PosteriorSnapshot::PosteriorSnapshot(PosteriorFamily family, std::uint64_t seed,
                                     std::vector<LayerPosterior> trunk,
                                     std::vector<LayerPosterior> heads)
    : family_(family), seed_(seed), trunk_(std::move(trunk)), heads_(std::move(heads)) {
  for (const auto* group : {&trunk_, &heads_})
    for (const auto& l : *group) {
      if (l.mu.size() != l.sigma.size() || l.mu.size() != l.out_features * l.in_features + l.out_features)
        throw std::invalid_argument("PosteriorSnapshot: layer arrays do not match its shape");
      for (double s : l.sigma)
        if (!(s > 0.0)) throw std::invalid_argument("PosteriorSnapshot: sigma must be positive");
    }
}

void PosteriorSnapshot::check_congruent(const VariationalNetwork& net) const {
  if (trunk_.size() != net.trunk().size() || heads_.size() != net.heads().size())
    throw std::invalid_argument("snapshot has " + std::to_string(trunk_.size()) + " trunk layers and " +
                                std::to_string(heads_.size()) + " heads, network has " +
                                std::to_string(net.trunk().size()) + " and " +
                                std::to_string(net.heads().size()));
  for (std::size_t i = 0; i < trunk_.size(); ++i)
    check_layer(trunk_[i], net.trunk()[i], "trunk layer " + std::to_string(i));
  for (std::size_t i = 0; i < heads_.size(); ++i)
    check_layer(heads_[i], net.heads()[i], "head " + std::to_string(i));
}

std::string PosteriorSnapshot::serialize() const {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kVersion);
  w.u8(static_cast<std::uint8_t>(family_.kind));
  w.f64(family_.truncation);
  w.u64(seed_);
  w.u32(static_cast<std::uint32_t>(trunk_.size()));
  w.u32(static_cast<std::uint32_t>(heads_.size()));
  for (const auto& l : trunk_) write_layer(w, l);
  for (const auto& l : heads_) write_layer(w, l);
  return w.take();
}

PosteriorSnapshot PosteriorSnapshot::deserialize(const std::string& bytes) {
  Reader r(bytes);
  r.expect(kMagic, sizeof kMagic);
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw std::runtime_error("snapshot: unsupported version " + std::to_string(version));
  const std::uint8_t kind = r.u8();
  if (kind > static_cast<std::uint8_t>(Family::truncated_mfvi))
    throw std::runtime_error("snapshot: unknown family tag " + std::to_string(kind));
  PosteriorFamily family{static_cast<Family>(kind), r.f64()};
  const std::uint64_t seed = r.u64();
  const std::uint32_t n_trunk = r.u32();
  const std::uint32_t n_heads = r.u32();
  std::vector<LayerPosterior> trunk, heads;
  for (std::uint32_t i = 0; i < n_trunk; ++i) trunk.push_back(read_layer(r));
  for (std::uint32_t i = 0; i < n_heads; ++i) heads.push_back(read_layer(r));
  if (!r.done()) throw std::runtime_error("snapshot: trailing bytes at offset " + std::to_string(r.pos()));
  return PosteriorSnapshot(family, seed, std::move(trunk), std::move(heads));
}

void PosteriorSnapshot::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const std::string bytes = serialize();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

PosteriorSnapshot PosteriorSnapshot::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open snapshot " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

PosteriorSnapshot snapshot(const VariationalNetwork& net, std::uint64_t seed) {
  std::vector<LayerPosterior> trunk, heads;
  for (const auto& l : net.trunk()) trunk.push_back(capture_layer(l));
  for (const auto& l : net.heads()) heads.push_back(capture_layer(l));
  return PosteriorSnapshot(net.family(), seed, std::move(trunk), std::move(heads));
}

namespace {

void restore_layer(VariationalLayer& layer, const LayerPosterior& post) {
  const std::size_t nw = layer.in_features() * layer.out_features();
  auto wm = layer.weight_mu().mutable_data();
  auto wr = layer.weight_rho().mutable_data();
  auto bm = layer.bias_mu().mutable_data();
  auto br = layer.bias_rho().mutable_data();
  for (std::size_t i = 0; i < nw; ++i) {
    wm[i] = post.mu[i];
    wr[i] = rho_from_sigma(post.sigma[i]);
  }
  for (std::size_t i = 0; i < layer.out_features(); ++i) {
    bm[i] = post.mu[nw + i];
    br[i] = rho_from_sigma(post.sigma[nw + i]);
  }
}

}  // namespace

VariationalNetwork restore_network(const PosteriorSnapshot& snap) {
  if (snap.heads().empty()) throw std::invalid_argument("restore_network: snapshot has no heads");
  Architecture arch;
  const auto& first = snap.trunk().empty() ? snap.heads().front() : snap.trunk().front();
  arch.input_dim = first.in_features;
  for (const auto& l : snap.trunk()) arch.hidden.push_back(l.out_features);
  arch.output_dim = snap.heads().front().out_features;
  arch.heads = snap.heads().size();
  arch.head_mode = arch.heads > 1 ? HeadMode::multi : HeadMode::single;
  Rng unused(0);
  VariationalNetwork net(arch, snap.family(), 0.0, unused);
  snap.check_congruent(net);
  for (std::size_t i = 0; i < snap.trunk().size(); ++i) restore_layer(net.trunk()[i], snap.trunk()[i]);
  for (std::size_t i = 0; i < snap.heads().size(); ++i) restore_layer(net.heads()[i], snap.heads()[i]);
  return net;
}

std::size_t prior_size(const LayerPrior& prior) {
  return std::visit(
      [](const auto& p) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, UnitGaussianPrior>)
          return 0;
        else
          return p.mu.size();
      },
      prior);
}

std::vector<const LayerPrior*> Prior::active(std::size_t head) const {
  if (head >= heads.size())
    throw std::out_of_range("Prior: head " + std::to_string(head) + " out of range");
  std::vector<const LayerPrior*> out;
  for (const auto& p : trunk) out.push_back(&p);
  out.push_back(&heads[head]);
  return out;
}

bool Prior::uses_radial_snapshot() const {
  for (const auto* group : {&trunk, &heads})
    for (const auto& p : *group)
      if (std::holds_alternative<RadialSnapshotPrior>(p)) return true;
  return false;
}

void Prior::check_congruent(const VariationalNetwork& net) const {
  if (trunk.size() != net.trunk().size() || heads.size() != net.heads().size())
    throw std::invalid_argument("prior has " + std::to_string(trunk.size()) + " trunk layers and " +
                                std::to_string(heads.size()) + " heads, network has " +
                                std::to_string(net.trunk().size()) + " and " +
                                std::to_string(net.heads().size()));
  auto check = [](const LayerPrior& p, const VariationalLayer& l, const std::string& where) {
    const std::size_t n = prior_size(p);
    if (n != 0 && n != l.num_params())
      throw std::invalid_argument("prior for " + where + " has " + std::to_string(n) +
                                  " entries, layer has " + std::to_string(l.num_params()));
  };
  for (std::size_t i = 0; i < trunk.size(); ++i)
    check(trunk[i], net.trunk()[i], "trunk layer " + std::to_string(i));
  for (std::size_t i = 0; i < heads.size(); ++i)
    check(heads[i], net.heads()[i], "head " + std::to_string(i));
}

Prior unit_prior(const VariationalNetwork& net) {
  Prior p;
  p.trunk.assign(net.trunk().size(), UnitGaussianPrior{});
  p.heads.assign(net.heads().size(), UnitGaussianPrior{});
  return p;
}

Prior load_prior(const PosteriorSnapshot& snap) {
  const bool radial = snap.family().kind == Family::radial;
  auto convert = [&](const LayerPosterior& l) -> LayerPrior {
    if (radial) return RadialSnapshotPrior{l.mu, l.sigma};
    return DiagonalGaussianPrior{l.mu, l.sigma};
  };
  Prior p;
  for (const auto& l : snap.trunk()) p.trunk.push_back(convert(l));
  for (const auto& l : snap.heads()) p.heads.push_back(convert(l));
  return p;
}

Prior load_prior(const PosteriorSnapshot& snap, const VariationalNetwork& net) {
  snap.check_congruent(net);
  return load_prior(snap);
}

}  // namespace radial
