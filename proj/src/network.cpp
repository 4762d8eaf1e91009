#include "htde/network.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "htde/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "network serialization assumes a little-endian host");

namespace htde {

Index HierarchicalTensorNetwork::edge_rank(NodeId node) const {
  tree.validate(node);
  if (tree.is_root(node)) return 1;
  if (tree.is_leaf(node))
    return leaf_cores[static_cast<std::size_t>(node.index - 1)].cols();
  return internal_cores[static_cast<std::size_t>(tree.node_slot(node))].dim3();
}

void HierarchicalTensorNetwork::validate() const {
  if (static_cast<Index>(leaf_cores.size()) != tree.nodes_at_level(tree.levels()))
    throw std::invalid_argument("network: wrong number of leaf cores");
  if (static_cast<Index>(internal_cores.size()) != tree.node_count())
    throw std::invalid_argument("network: internal core vector must be slot-indexed");
  Index leaf_rows = 1;
  for (Index i = 0; i < tree.leaf_sites(); ++i) leaf_rows *= tree.alphabet();
  for (const Matrix& leaf : leaf_cores)
    if (leaf.rows() != leaf_rows || leaf.cols() < 1)
      throw std::invalid_argument("network: leaf core shape mismatch");
  for (Index slot = 0; slot < tree.node_count(); ++slot) {
    const NodeId node = tree.node_at_slot(slot);
    if (tree.is_leaf(node)) continue;
    const Tensor3& core = internal_cores[static_cast<std::size_t>(slot)];
    const auto [left, right] = tree.children(node);
    if (core.dim1() != edge_rank(left) || core.dim2() != edge_rank(right))
      throw std::invalid_argument("network: core/child rank mismatch at " + to_string(node));
    if (tree.is_root(node) && core.dim3() != 1)
      throw std::invalid_argument("network: root core must have trailing rank 1");
  }
}

namespace {

Index leaf_row_index(const HierarchicalTensorNetwork& net, NodeId leaf,
                     std::span<const std::uint8_t> config) {
  const auto [first, last] = net.tree.cluster_bounds(leaf);
  const Index n = net.tree.alphabet();
  Index idx = 0;
  for (Index s = first; s <= last; ++s) {
    const std::uint8_t v = config[static_cast<std::size_t>(s - 1)];
    if (v >= n)
      throw std::invalid_argument("evaluate: site " + std::to_string(s) +
                                  " value out of alphabet");
    idx = idx * n + v;
  }
  return idx;
}

/// Bottom-up pass, combining per-node vectors with f(node) -> leaf vector.
template <typename LeafVec>
double contract_scalar(const HierarchicalTensorNetwork& net, LeafVec&& leaf_vec) {
  const DimensionTree& tree = net.tree;
  std::vector<Vector> value(static_cast<std::size_t>(tree.node_count()));
  for (int level = tree.levels(); level >= 0; --level) {
    for (Index k = 1; k <= tree.nodes_at_level(level); ++k) {
      const NodeId node{level, k};
      const std::size_t slot = static_cast<std::size_t>(tree.node_slot(node));
      if (tree.is_leaf(node)) {
        value[slot] = leaf_vec(node);
        continue;
      }
      const auto [left, right] = tree.children(node);
      const Vector& vl = value[static_cast<std::size_t>(tree.node_slot(left))];
      const Vector& vr = value[static_cast<std::size_t>(tree.node_slot(right))];
      const Tensor3& core = net.internal_cores[slot];
      Vector out(core.dim3());
      for (Index c = 0; c < core.dim3(); ++c) out(c) = vl.dot(core.slice(c) * vr);
      value[slot] = std::move(out);
    }
  }
  return value[0](0);
}

}  // namespace

double evaluate(const HierarchicalTensorNetwork& net, std::span<const std::uint8_t> config) {
  if (config.size() != static_cast<std::size_t>(net.tree.dimension()))
    throw std::invalid_argument("evaluate: configuration length mismatch");
  return contract_scalar(net, [&](NodeId leaf) -> Vector {
    const Matrix& core = net.leaf_cores[static_cast<std::size_t>(leaf.index - 1)];
    return core.row(leaf_row_index(net, leaf, config)).transpose();
  });
}

Vector materialize(const HierarchicalTensorNetwork& net, Index entry_cap) {
  const DimensionTree& tree = net.tree;
  double total = 1.0;
  for (Index i = 0; i < tree.dimension(); ++i) {
    total *= double(tree.alphabet());
    if (total > double(entry_cap))
      throw CapacityError(
          "materialize: n^d exceeds the entry budget; for large domains compare "
          "networks with mc_relative_error instead");
  }
  // Bottom-up: node matrix of shape |cluster configurations| x rank.
  std::vector<Matrix> dense(static_cast<std::size_t>(tree.node_count()));
  for (int level = tree.levels(); level >= 0; --level) {
    for (Index k = 1; k <= tree.nodes_at_level(level); ++k) {
      const NodeId node{level, k};
      const std::size_t slot = static_cast<std::size_t>(tree.node_slot(node));
      if (tree.is_leaf(node)) {
        dense[slot] = net.leaf_cores[static_cast<std::size_t>(k - 1)];
        continue;
      }
      const auto [left, right] = tree.children(node);
      Matrix& dl = dense[static_cast<std::size_t>(tree.node_slot(left))];
      Matrix& dr = dense[static_cast<std::size_t>(tree.node_slot(right))];
      dense[slot] = sandwich(dl, net.internal_cores[slot], dr).to_matrix();
      dl.resize(0, 0);
      dr.resize(0, 0);
    }
  }
  return dense[0].col(0);
}

double inner(const HierarchicalTensorNetwork& a, const HierarchicalTensorNetwork& b) {
  const DimensionTree& tree = a.tree;
  if (tree.dimension() != b.tree.dimension() || tree.alphabet() != b.tree.alphabet() ||
      tree.levels() != b.tree.levels())
    throw std::invalid_argument("inner: networks live on different trees");
  // Gram matrices M(node) = dense(a, node)^T dense(b, node), merged upward.
  std::vector<Matrix> gram(static_cast<std::size_t>(tree.node_count()));
  for (int level = tree.levels(); level >= 0; --level) {
    for (Index k = 1; k <= tree.nodes_at_level(level); ++k) {
      const NodeId node{level, k};
      const std::size_t slot = static_cast<std::size_t>(tree.node_slot(node));
      if (tree.is_leaf(node)) {
        gram[slot] = a.leaf_cores[static_cast<std::size_t>(k - 1)].transpose() *
                     b.leaf_cores[static_cast<std::size_t>(k - 1)];
        continue;
      }
      const auto [left, right] = tree.children(node);
      const Matrix& gl = gram[static_cast<std::size_t>(tree.node_slot(left))];
      const Matrix& gr = gram[static_cast<std::size_t>(tree.node_slot(right))];
      const Tensor3& ca = a.internal_cores[slot];
      const Tensor3& cb = b.internal_cores[slot];
      const Tensor3 mixed = sandwich(gl, cb, gr);
      gram[slot].noalias() = ca.to_matrix().transpose() * mixed.to_matrix();
    }
  }
  return gram[0](0, 0);
}

double norm(const HierarchicalTensorNetwork& net) {
  return std::sqrt(std::max(0.0, inner(net, net)));
}

double relative_error(const HierarchicalTensorNetwork& net, const Vector& reference,
                      Index entry_cap) {
  const Vector dense = materialize(net, entry_cap);
  if (dense.size() != reference.size())
    throw std::invalid_argument("relative_error: reference tensor has wrong length");
  const double ref_norm = reference.norm();
  if (ref_norm <= 0.0)
    throw std::invalid_argument("relative_error: reference tensor has zero norm");
  return (dense - reference).norm() / ref_norm;
}

double total_mass(const HierarchicalTensorNetwork& net) {
  Index leaf_rows = 1;
  for (Index i = 0; i < net.tree.leaf_sites(); ++i) leaf_rows *= net.tree.alphabet();
  return contract_scalar(net, [&](NodeId leaf) -> Vector {
    return net.leaf_cores[static_cast<std::size_t>(leaf.index - 1)].transpose() *
           Vector::Ones(leaf_rows);
  });
}

NormalizeResult normalize(const HierarchicalTensorNetwork& net) {
  const double mass = total_mass(net);
  if (!(mass > 0.0))
    throw std::runtime_error("normalize: total mass " + std::to_string(mass) +
                             " is not positive");
  NormalizeResult out{net, mass};
  Tensor3& root = out.net.internal_cores[0];
  root = Tensor3::from_matrix(root.to_matrix() / mass, root.dim1(), root.dim2());
  return out;
}

double mc_relative_error(const HierarchicalTensorNetwork& a,
                         const HierarchicalTensorNetwork& b, Index num_samples,
                         std::uint64_t seed) {
  if (num_samples < 1)
    throw std::invalid_argument("mc_relative_error: need at least one sample");
  const Index d = a.tree.dimension();
  const Index n = a.tree.alphabet();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> site(0, static_cast<int>(n) - 1);
  std::vector<std::uint8_t> config(static_cast<std::size_t>(d));
  double num = 0.0, den = 0.0;
  for (Index i = 0; i < num_samples; ++i) {
    for (auto& v : config) v = static_cast<std::uint8_t>(site(rng));
    const double va = evaluate(a, config);
    const double vb = evaluate(b, config);
    num += (va - vb) * (va - vb);
    den += vb * vb;
  }
  if (den <= 0.0)
    throw std::runtime_error("mc_relative_error: reference network is zero on all draws");
  return std::sqrt(num / den);
}

// ---------------------------------------------------------------------------
// serialization

namespace {

constexpr char kMagic[8] = {'H', 'T', 'N', 'E', 'T', 'B', 'I', 'N'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

}  // namespace

void save_network(const HierarchicalTensorNetwork& net, const std::filesystem::path& path,
                  const std::string& meta_json) {
  net.validate();
  nlohmann::json header;
  header["format"] = "htde-network";
  header["d"] = net.tree.dimension();
  header["n"] = net.tree.alphabet();
  header["leaf_sites"] = net.tree.leaf_sites();
  header["levels"] = net.tree.levels();
  header["meta"] = nlohmann::json::parse(meta_json);
  nlohmann::json cores = nlohmann::json::array();
  for (Index slot = 0; slot < net.tree.node_count(); ++slot) {
    const NodeId node = net.tree.node_at_slot(slot);
    nlohmann::json c;
    c["level"] = node.level;
    c["k"] = node.index;
    if (net.tree.is_leaf(node)) {
      const Matrix& leaf = net.leaf_cores[static_cast<std::size_t>(node.index - 1)];
      c["dims"] = {leaf.rows(), leaf.cols()};
    } else {
      const Tensor3& core = net.internal_cores[static_cast<std::size_t>(slot)];
      c["dims"] = {core.dim1(), core.dim2(), core.dim3()};
    }
    cores.push_back(c);
  }
  header["cores"] = cores;
  const std::string header_bytes = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_network: cannot open " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(header_bytes.size()));
  out.write(header_bytes.data(), static_cast<std::streamsize>(header_bytes.size()));
  for (Index slot = 0; slot < net.tree.node_count(); ++slot) {
    const NodeId node = net.tree.node_at_slot(slot);
    const Matrix& flat = net.tree.is_leaf(node)
                             ? net.leaf_cores[static_cast<std::size_t>(node.index - 1)]
                             : net.internal_cores[static_cast<std::size_t>(slot)].to_matrix();
    out.write(reinterpret_cast<const char*>(flat.data()),
              static_cast<std::streamsize>(sizeof(double) * flat.size()));
  }
  if (!out) throw std::runtime_error("save_network: write failed for " + path.string());
}

HierarchicalTensorNetwork load_network(const std::filesystem::path& path,
                                       std::string* meta_json) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_network: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw ConfigError("load_network: " + path.string() + " is not a network container");
  const std::uint32_t version = read_u32(in);
  if (version != kVersion)
    throw ConfigError("load_network: unsupported container version " +
                      std::to_string(version));
  const std::uint32_t header_len = read_u32(in);
  std::string header_bytes(header_len, '\0');
  in.read(header_bytes.data(), header_len);
  const nlohmann::json header = nlohmann::json::parse(header_bytes);
  if (meta_json) *meta_json = header.at("meta").dump();

  HierarchicalTensorNetwork net{
      DimensionTree(header.at("d").get<Index>(), header.at("n").get<Index>(),
                    header.at("leaf_sites").get<Index>()),
      {},
      {}};
  net.leaf_cores.resize(static_cast<std::size_t>(net.tree.nodes_at_level(net.tree.levels())));
  net.internal_cores.resize(static_cast<std::size_t>(net.tree.node_count()));
  const auto& cores = header.at("cores");
  if (static_cast<Index>(cores.size()) != net.tree.node_count())
    throw ConfigError("load_network: header core list does not match the tree");
  for (Index slot = 0; slot < net.tree.node_count(); ++slot) {
    const NodeId node = net.tree.node_at_slot(slot);
    const auto& dims = cores[static_cast<std::size_t>(slot)].at("dims");
    if (net.tree.is_leaf(node)) {
      Matrix leaf(dims.at(0).get<Index>(), dims.at(1).get<Index>());
      in.read(reinterpret_cast<char*>(leaf.data()),
              static_cast<std::streamsize>(sizeof(double) * leaf.size()));
      net.leaf_cores[static_cast<std::size_t>(node.index - 1)] = std::move(leaf);
    } else {
      const Index d1 = dims.at(0).get<Index>();
      const Index d2 = dims.at(1).get<Index>();
      const Index d3 = dims.at(2).get<Index>();
      Matrix flat(d1 * d2, d3);
      in.read(reinterpret_cast<char*>(flat.data()),
              static_cast<std::streamsize>(sizeof(double) * flat.size()));
      net.internal_cores[static_cast<std::size_t>(slot)] =
          Tensor3::from_matrix(std::move(flat), d1, d2);
    }
  }
  if (!in) throw std::runtime_error("load_network: truncated payload in " + path.string());
  net.validate();
  return net;
}

void write_dense_tensor(const std::filesystem::path& path, const Vector& values, Index d,
                        Index n) {
  nlohmann::json header;
  header["d"] = d;
  header["n"] = n;
  header["order"] = "site-1-slowest";
  const std::string header_bytes = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_dense_tensor: cannot open " + path.string());
  write_u32(out, static_cast<std::uint32_t>(header_bytes.size()));
  out.write(header_bytes.data(), static_cast<std::streamsize>(header_bytes.size()));
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(sizeof(double) * values.size()));
  if (!out) throw std::runtime_error("write_dense_tensor: write failed");
}

Vector read_dense_tensor(const std::filesystem::path& path, Index* d, Index* n) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_dense_tensor: cannot open " + path.string());
  const std::uint32_t header_len = read_u32(in);
  std::string header_bytes(header_len, '\0');
  in.read(header_bytes.data(), header_len);
  const nlohmann::json header = nlohmann::json::parse(header_bytes);
  const Index dd = header.at("d").get<Index>();
  const Index nn = header.at("n").get<Index>();
  if (d) *d = dd;
  if (n) *n = nn;
  Index total = 1;
  for (Index i = 0; i < dd; ++i) total *= nn;
  Vector values(total);
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(sizeof(double) * values.size()));
  if (!in) throw std::runtime_error("read_dense_tensor: truncated payload");
  return values;
}

}  // namespace htde
