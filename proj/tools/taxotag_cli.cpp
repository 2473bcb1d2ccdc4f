#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "taxotag/checkpoint.hpp"
#include "taxotag/evaluation.hpp"
#include "taxotag/synth.hpp"
#include "taxotag/training.hpp"

using namespace taxotag;

namespace {

int cmd_taxonomy_embed(const std::string& taxonomy_path, int dim, int epochs,
                       double lr, int negatives, std::uint64_t seed,
                       bool euclidean, const std::string& out_path) {
  TaxonomyTree tree = load_taxonomy(taxonomy_path);
  EmbedTrainConfig cfg;
  cfg.dim = dim;
  cfg.epochs = epochs;
  cfg.lr = lr;
  cfg.negatives = negatives;
  cfg.seed = seed;
  cfg.euclidean = euclidean;
  CategoryEmbeddingTable table = train_embeddings(tree, cfg);
  save_embeddings(table, tree.nodes(), out_path);
  std::cout << "nodes: " << tree.size() << "\n"
            << "mean edge distance: "
            << mean_edge_distance(tree, table, euclidean) << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& products_path,
              const std::string& taxonomy_path,
              const std::string& embeddings_path, const std::string& attribute,
              const std::string& out_path, bool no_category_fallback,
              const std::string& split_dir) {
  ModelConfig cfg = load_config(config_path);
  TaxonomyTree tree = load_taxonomy(taxonomy_path);
  CategoryEmbeddingTable embeddings;
  if (!embeddings_path.empty()) embeddings = load_embeddings(embeddings_path);

  LoadResult loaded = load_products(products_path);
  if (loaded.skipped)
    std::cerr << "skipped " << loaded.skipped << " malformed records\n";
  for (const auto& r : loaded.records)
    if (!tree.contains(r.category_id))
      throw std::runtime_error("product " + r.id +
                               " references unknown category " + r.category_id);
  if (no_category_fallback) {
    std::set<std::string> missing;
    for (const auto& r : loaded.records)
      if (!embeddings.has(r.category_id)) missing.insert(r.category_id);
    if (!missing.empty()) {
      std::string msg = "categories without embeddings:";
      for (const auto& c : missing) msg += " " + c;
      throw std::runtime_error(msg);
    }
  }

  DatasetSplit split = split_dataset(loaded.records, 0.6, 0.2, 0.2, cfg.seed);
  if (!split_dir.empty()) {
    std::filesystem::create_directories(split_dir);
    auto dump = [&](const std::vector<ProductRecord>& recs,
                    const std::string& name) {
      std::ofstream out(split_dir + "/" + name + ".jsonl");
      for (const auto& r : recs) {
        nlohmann::json j;
        j["id"] = r.id;
        j["title"] = r.title;
        j["description"] = r.description;
        j["category_id"] = r.category_id;
        nlohmann::json attrs = nlohmann::json::object();
        for (const auto& [k, v] : r.attributes) attrs[k] = v;
        j["attributes"] = attrs;
        out << j.dump() << "\n";
      }
    };
    dump(split.train, "train");
    dump(split.val, "val");
    dump(split.test, "test");
  }

  TaggerModel model(cfg, tree, embeddings, split.train, attribute);
  TrainResult result =
      train_model(model, split.train, split.val, attribute, out_path + ".log.jsonl");
  save_checkpoint(model, out_path);

  std::cout << "epochs run: " << result.history.size() << "\n"
            << "best epoch: " << result.best_epoch << "\n"
            << "best val loss: " << result.best_val_loss << "\n";
  if (model.missing_category_warnings())
    std::cerr << "warning: " << model.missing_category_warnings()
              << " lookups fell back to the zero category vector\n";
  return 0;
}

int cmd_extract(const std::string& ckpt_path, const std::string& products_path,
                const std::string& attribute, const std::string& out_path) {
  TaggerModel model = load_checkpoint(ckpt_path);
  LoadResult loaded = load_products(products_path);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  for (const auto& r : loaded.records) {
    EncodedProduct p = model.encode(r, attribute);
    nlohmann::json j;
    j["id"] = r.id;
    j["values"] = model.extract_values(p);
    out << j.dump() << "\n";
  }
  return 0;
}

int cmd_evaluate(const std::string& predictions_path,
                 const std::string& gold_path, const std::string& attribute,
                 const std::string& out_path) {
  std::map<std::string, std::vector<std::string>> predicted;
  {
    std::ifstream in(predictions_path);
    if (!in) throw std::runtime_error("cannot open " + predictions_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line);
      predicted[j.at("id").get<std::string>()] =
          j.at("values").get<std::vector<std::string>>();
    }
  }
  LoadResult gold = load_products(gold_path);
  std::vector<ProductEvalOutcome> outcomes;
  for (const auto& r : gold.records) {
    std::vector<std::string> extracted, gold_values;
    auto it = predicted.find(r.id);
    if (it != predicted.end())
      for (const auto& v : it->second) extracted.push_back(normalize_value(v));
    auto git = r.attributes.find(attribute);
    if (git != r.attributes.end())
      for (const auto& v : git->second) gold_values.push_back(normalize_value(v));
    outcomes.push_back(
        make_outcome(r.id, r.category_id, extracted, gold_values));
  }
  MetricsReport report = extraction_metrics(outcomes);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  out << metrics_to_json(report) << "\n";
  std::cout << metrics_to_table(report);
  return 0;
}

int cmd_synth(std::uint64_t seed, std::size_t count, const std::string& dir) {
  SynthCorpus corpus = generate_synth_corpus(seed, count);
  write_synth_corpus(corpus, dir);
  std::cout << "wrote " << corpus.products.size() << " products to " << dir
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"taxonomy-aware attribute value extraction"};
  app.require_subcommand(1);

  // taxonomy-embed
  std::string te_taxonomy, te_out;
  int te_dim = 50, te_epochs = 200, te_negatives = 10;
  double te_lr = 0.5;
  std::uint64_t te_seed = 0;
  bool te_euclidean = false;
  auto* te = app.add_subcommand("taxonomy-embed",
                                "train category embeddings for a taxonomy");
  te->add_option("--taxonomy", te_taxonomy, "taxonomy JSONL file")->required();
  te->add_option("--dim", te_dim, "embedding dimension");
  te->add_option("--epochs", te_epochs, "training epochs");
  te->add_option("--lr", te_lr, "learning rate");
  te->add_option("--negatives", te_negatives, "negative samples per edge");
  te->add_option("--seed", te_seed, "RNG seed");
  te->add_flag("--euclidean", te_euclidean,
               "train Euclidean instead of hyperbolic embeddings");
  te->add_option("--out", te_out, "output embedding file")->required();

  // train
  std::string tr_config, tr_products, tr_taxonomy, tr_embeddings, tr_attribute,
      tr_out, tr_split_dir;
  bool tr_no_fallback = false;
  auto* tr = app.add_subcommand("train", "train an extraction model");
  tr->add_option("--config", tr_config, "model config file")->required();
  tr->add_option("--products", tr_products, "products JSONL file")->required();
  tr->add_option("--taxonomy", tr_taxonomy, "taxonomy JSONL file")->required();
  tr->add_option("--embeddings", tr_embeddings, "category embedding file");
  tr->add_option("--attribute", tr_attribute, "attribute to extract")
      ->required();
  tr->add_option("--out", tr_out, "checkpoint output path")->required();
  tr->add_flag("--no-category-fallback", tr_no_fallback,
               "fail if any product category lacks an embedding");
  tr->add_option("--split-out", tr_split_dir,
                 "directory for the train/val/test split files");

  // extract
  std::string ex_ckpt, ex_products, ex_out, ex_attribute = "flavor";
  auto* ex = app.add_subcommand("extract", "run extraction on products");
  ex->add_option("--ckpt", ex_ckpt, "checkpoint path")->required();
  ex->add_option("--products", ex_products, "products JSONL file")->required();
  ex->add_option("--attribute", ex_attribute, "attribute to extract");
  ex->add_option("--out", ex_out, "output JSONL path")->required();

  // evaluate
  std::string ev_pred, ev_gold, ev_out, ev_attribute = "flavor";
  auto* ev = app.add_subcommand("evaluate", "score predictions against gold");
  ev->add_option("--predictions", ev_pred, "predictions JSONL")->required();
  ev->add_option("--gold", ev_gold, "gold products JSONL")->required();
  ev->add_option("--attribute", ev_attribute, "attribute to score");
  ev->add_option("--out", ev_out, "metrics JSON output path")->required();

  // synth
  std::string sy_dir;
  std::uint64_t sy_seed = 0;
  std::size_t sy_count = 2000;
  auto* sy = app.add_subcommand("synth", "generate the synthetic corpus");
  sy->add_option("--seed", sy_seed, "RNG seed");
  sy->add_option("--count", sy_count, "number of products");
  sy->add_option("--out", sy_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (te->parsed())
      return cmd_taxonomy_embed(te_taxonomy, te_dim, te_epochs, te_lr,
                                te_negatives, te_seed, te_euclidean, te_out);
    if (tr->parsed())
      return cmd_train(tr_config, tr_products, tr_taxonomy, tr_embeddings,
                       tr_attribute, tr_out, tr_no_fallback, tr_split_dir);
    if (ex->parsed())
      return cmd_extract(ex_ckpt, ex_products, ex_attribute, ex_out);
    if (ev->parsed()) return cmd_evaluate(ev_pred, ev_gold, ev_attribute, ev_out);
    if (sy->parsed()) return cmd_synth(sy_seed, sy_count, sy_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
