#include "taxotag/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace taxotag {

namespace {

constexpr char kMagic[4] = {'T', 'X', 'K', '1'};

template <typename T>
void write_raw(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("truncated checkpoint");
  return v;
}

}  // namespace

void save_tensors(const ParameterStore& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kMagic, 4);
  const auto names = params.names();
  write_raw<std::uint64_t>(out, names.size());
  for (const auto& name : names) {
    const auto& m = params.at(name).value;
    write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_raw<std::uint32_t>(out, 2);
    write_raw<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    write_raw<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    // row-major payload
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) write_raw<double>(out, m(i, j));
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

void load_tensors(ParameterStore& params, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("not a TXK1 checkpoint: " + path);
  const auto count = read_raw<std::uint64_t>(in);
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto name_len = read_raw<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto rank = read_raw<std::uint32_t>(in);
    std::vector<std::uint64_t> extents(rank);
    std::uint64_t total = 1;
    for (auto& e : extents) {
      e = read_raw<std::uint64_t>(in);
      total *= e;
    }
    auto& entry = params.at(name);
    const std::uint64_t rows = rank >= 1 ? extents[0] : 1;
    const std::uint64_t cols = rank >= 2 ? total / rows : 1;
    if (static_cast<std::uint64_t>(entry.value.rows()) != rows ||
        static_cast<std::uint64_t>(entry.value.cols()) != cols)
      throw std::runtime_error("checkpoint shape mismatch for tensor " + name);
    for (std::uint64_t i = 0; i < rows; ++i)
      for (std::uint64_t j = 0; j < cols; ++j)
        entry.value(static_cast<Eigen::Index>(i),
                    static_cast<Eigen::Index>(j)) = read_raw<double>(in);
  }
}

void save_checkpoint(TaggerModel& model, const std::string& path) {
  save_tensors(model.params(), path);

  nlohmann::json meta;
  meta["config"] = config_to_string(model.config());
  meta["vocab"] = model.vocab().tokens();
  nlohmann::json tax = nlohmann::json::array();
  const auto& tree = model.tree();
  for (const auto& node : tree.nodes()) {
    nlohmann::json entry;
    entry["id"] = node;
    if (node == tree.root())
      entry["parent"] = nullptr;
    else
      entry["parent"] = tree.parent(node);
    tax.push_back(entry);
  }
  meta["taxonomy"] = tax;
  nlohmann::json emb = nlohmann::json::object();
  for (const auto& [id, vec] : model.category_embeddings().vectors) {
    std::vector<double> v(vec.data(), vec.data() + vec.size());
    emb[id] = v;
  }
  meta["category_embeddings"] = emb;
  meta["category_dim"] = model.category_embeddings().dim;

  std::ofstream out(path + ".meta.json");
  if (!out) throw std::runtime_error("cannot write sidecar for " + path);
  out << meta.dump() << "\n";
}

TaggerModel load_checkpoint(const std::string& path) {
  std::ifstream min(path + ".meta.json");
  if (!min)
    throw std::runtime_error("missing checkpoint sidecar: " + path +
                             ".meta.json");
  nlohmann::json meta = nlohmann::json::parse(min);

  std::istringstream cfg_in(meta.at("config").get<std::string>());
  ModelConfig cfg = parse_config(cfg_in, path + ".meta.json");

  std::string root;
  std::vector<std::pair<std::string, std::string>> edges;
  for (const auto& entry : meta.at("taxonomy")) {
    if (entry.at("parent").is_null())
      root = entry.at("id").get<std::string>();
    else
      edges.emplace_back(entry.at("id").get<std::string>(),
                         entry.at("parent").get<std::string>());
  }
  TaxonomyTree tree = TaxonomyTree::from_edges(edges, root);

  CategoryEmbeddingTable table;
  table.dim = meta.at("category_dim").get<int>();
  for (auto& [id, v] : meta.at("category_embeddings").items()) {
    auto vals = v.get<std::vector<double>>();
    table.vectors[id] = Eigen::Map<Eigen::VectorXd>(
        vals.data(), static_cast<Eigen::Index>(vals.size()));
  }

  TaggerModel model(cfg, std::move(tree),
                    meta.at("vocab").get<std::vector<std::string>>(),
                    std::move(table));
  load_tensors(model.params(), path);
  return model;
}

}  // namespace taxotag
