// Command-line front end: parse -> groups -> stats -> featurize -> train-gae
// -> embed -> train-predict -> tune-weights, with JSON-lines outputs on
// stdout and human summaries on stderr.

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include "tiergraph/featurize.hpp"
#include "tiergraph/grouping.hpp"
#include "tiergraph/predict.hpp"
#include "tiergraph/sdf.hpp"
#include "tiergraph/targets.hpp"
#include "tiergraph/tiered_gae.hpp"
#include "tiergraph/weight_search.hpp"

using json = nlohmann::ordered_json;
using namespace tiergraph;

namespace {

constexpr const char* kVersion = "tiergraph 0.1.0";

enum ExitCode { kOk = 0, kUsage = 2, kDataError = 3, kNumericError = 4 };

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.is_open()) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(ss.str())));
  return buf;
}

void write_manifest(const std::string& command, const json& config,
                    const std::vector<std::string>& inputs, unsigned seed,
                    const std::vector<std::string>& outputs) {
  if (outputs.empty()) return;
  json m;
  m["command"] = command;
  m["config"] = config;
  m["inputs"] = json::array();
  for (const auto& p : inputs)
    m["inputs"].push_back(json{{"path", p}, {"fnv1a64", file_digest(p)}});
  m["seed"] = seed;
  m["tool_version"] = kVersion;
  m["outputs"] = outputs;
  const std::string path = outputs.front() + ".manifest.json";
  std::ofstream out(path);
  out << m.dump(2) << "\n";
}

std::array<double, 3> parse_weights(const std::string& s) {
  std::array<double, 3> w{};
  std::istringstream is(s);
  char c1 = 0, c2 = 0;
  if (!(is >> w[0] >> c1 >> w[1] >> c2 >> w[2]) || c1 != ',' || c2 != ',')
    throw CLI::ValidationError("--weights", "expected w_fg,w_rg,w_ccg");
  return w;
}

std::vector<double> parse_axis(const std::string& s) {
  std::vector<double> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ',')) out.push_back(std::stod(tok));
  if (out.empty()) throw CLI::ValidationError("--grid", "empty axis");
  return out;
}

json group_json(const std::string& cid, const GroupSet& gs) {
  json j;
  j["cid"] = cid;
  j["fgs"] = json::array();
  j["rgs"] = json::array();
  j["ccg"] = json::array();
  for (const auto& g : gs.groups) {
    switch (g.kind) {
      case GroupKind::kFg: j["fgs"].push_back(g.atoms); break;
      case GroupKind::kRg: j["rgs"].push_back(g.atoms); break;
      case GroupKind::kCcg: j["ccg"] = g.atoms; break;
    }
  }
  return j;
}

// Ordered parallel map over items; results come back in input order.
template <typename In, typename Fn>
auto parallel_map(const std::vector<In>& items, int jobs, Fn fn)
    -> std::vector<decltype(fn(items.front()))> {
  using Out = decltype(fn(items.front()));
  std::vector<Out> out(items.size());
  if (jobs <= 1 || items.size() < 2) {
    for (std::size_t i = 0; i < items.size(); ++i) out[i] = fn(items[i]);
    return out;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= items.size()) return;
      out[i] = fn(items[i]);
    }
  };
  std::vector<std::future<void>> pool;
  for (int t = 0; t < jobs; ++t) pool.push_back(std::async(std::launch::async, worker));
  for (auto& f : pool) f.get();
  return out;
}

std::vector<MoleculeTensors> tensors_from_sdf(const std::string& path,
                                              const FeatureScheme& scheme, int jobs) {
  const auto items = read_sdf_file(path);
  std::vector<Molecule> mols;
  for (const auto& it : items) {
    if (!it.ok()) throw SdfParseError("record " + std::to_string(it.index) + ": " + it.error);
    mols.push_back(*it.molecule);
  }
  auto tensors = parallel_map(mols, jobs, [&](const Molecule& m) {
    return make_tensors(m, scheme);
  });
  for (std::size_t i = 0; i < tensors.size(); ++i)
    if (tensors[i].cid == mols[i].title && mols[i].props.empty())
      tensors[i].cid = std::to_string(i);  // fall back to record index
  return tensors;
}

int cmd_groups(const std::string& input, const std::string& out_path, bool lenient,
               int jobs) {
  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file.is_open()) throw IoError("cannot write '" + out_path + "'");
    os = &file;
  }
  const auto items = read_sdf_file(input);
  int bad = 0;
  auto lines = parallel_map(items, jobs, [&](const SdfItem& it) -> std::string {
    if (!it.ok()) return std::string();
    const MolecularGraph g = build_graph(*it.molecule);
    const GroupSet gs = build_group_set(g);
    return group_json(it.molecule->cid_or(std::to_string(it.index)), gs).dump();
  });
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!items[i].ok()) {
      ++bad;
      if (!lenient) {
        std::cerr << "record " << items[i].index << ": " << items[i].error << "\n";
        return kUsage;
      }
      *os << json{{"record", items[i].index}, {"error", items[i].error}}.dump() << "\n";
      continue;
    }
    *os << lines[i] << "\n";
  }
  std::cerr << items.size() - bad << " molecules, " << bad << " errors\n";
  if (!out_path.empty())
    write_manifest("groups", json{{"input", input}, {"lenient", lenient}}, {input}, 0,
                   {out_path});
  return kOk;
}

int cmd_stats(const std::string& input, int jobs) {
  const auto items = read_sdf_file(input);
  std::vector<Molecule> mols;
  for (const auto& it : items) {
    if (!it.ok()) {
      std::cerr << "record " << it.index << ": " << it.error << "\n";
      return kDataError;
    }
    mols.push_back(*it.molecule);
  }
  const auto counts = parallel_map(mols, jobs, [](const Molecule& m) {
    return build_group_set(build_graph(m)).size();
  });
  if (counts.empty()) {
    std::cout << json{{"molecules", 0}}.dump() << "\n";
    return kOk;
  }
  const GroupStats st = group_stats(counts);
  json j;
  j["molecules"] = st.molecules;
  j["mean"] = st.mean;
  j["min"] = st.min;
  j["max"] = st.max;
  j["histogram"] = json::object();
  for (const auto& [k, v] : st.histogram) j["histogram"][std::to_string(k)] = v;
  std::cout << j.dump() << "\n";
  return kOk;
}

int cmd_train_gae(const std::string& input, const std::string& scheme_id,
                  const TierConfig& config, const std::string& out, int jobs) {
  const FeatureScheme& scheme = scheme_by_id(scheme_id);
  const auto dataset = tensors_from_sdf(input, scheme, jobs);
  GaeParams params = init_gae_params(gae_input_dim(scheme), config, scheme_id);
  if (config.epochs > 0) {
    const GaeTrainResult result = train_tiered_gae(params, dataset, config);
    std::cerr << "trained " << config.epochs << " epochs, final loss "
              << (result.loss_trace.empty() ? 0.0 : result.loss_trace.back()) << "\n";
    std::cout << json{{"epochs", config.epochs},
                      {"final_loss",
                       result.loss_trace.empty() ? 0.0 : result.loss_trace.back()}}
                     .dump()
              << "\n";
  } else {
    std::cout << json{{"epochs", 0}}.dump() << "\n";
  }
  write_params(out, params);
  write_manifest("train-gae",
                 json{{"input", input},
                      {"scheme", scheme_id},
                      {"epochs", config.epochs},
                      {"hidden_dim", config.hidden_dim},
                      {"embed_dim", config.embed_dim},
                      {"learning_rate", config.learning_rate},
                      {"batch_size", config.batch_size}},
                 {input}, config.seed, {out});
  return kOk;
}

int cmd_embed(const std::string& input, const std::string& params_path,
              const std::array<double, 3>& weights, const std::string& out, int jobs) {
  const GaeParams params = read_params(params_path);
  const FeatureScheme& scheme = scheme_by_id(params.scheme_id);
  const auto dataset = tensors_from_sdf(input, scheme, jobs);
  GroupWeightConfig wc;
  wc.w_fg = weights[0];
  wc.w_rg = weights[1];
  wc.w_ccg = weights[2];
  const auto embeddings = embed_dataset(params, dataset, wc);
  write_embeddings(out, params.scheme_id, weights, embeddings);
  std::cerr << "embedded " << embeddings.size() << " molecules\n";
  std::cout << json{{"molecules", embeddings.size()},
                    {"dim", params.embed_dim}}
                   .dump()
            << "\n";
  write_manifest("embed",
                 json{{"input", input},
                      {"params", params_path},
                      {"weights", weights}},
                 {input, params_path}, 0, {out});
  return kOk;
}

int cmd_train_predict(const std::string& embeddings_path, const std::string& targets_path,
                      const std::string& keying, const std::string& targets_arg,
                      PredictorConfig config, const std::string& sdf_path,
                      const std::string& out, int jobs) {
  const EmbeddingStore store = read_embeddings(embeddings_path);
  const TargetTable table = load_targets(
      targets_path, keying == "index" ? TargetKeying::kByIndex : TargetKeying::kByCid);

  std::vector<int> sel;
  if (targets_arg != "all") {
    std::istringstream is(targets_arg);
    std::string tok;
    while (std::getline(is, tok, ',')) {
      const int t = target_index(tok);
      if (t < 0) throw TargetError("unknown target '" + tok + "'");
      sel.push_back(t);
    }
  }
  config.targets = sel;
  config.input_dim = store.dim;

  std::vector<PredictExample> examples = examples_from_store(store);
  if (config.weight_mode == WeightMode::kTrainableByKind) {
    if (sdf_path.empty())
      throw TargetError("--sdf is required for --weight-mode trainable");
    const auto dataset = tensors_from_sdf(sdf_path, scheme_by_id(store.scheme_id), jobs);
    std::map<std::string, const MoleculeTensors*> by_cid;
    for (const auto& t : dataset) by_cid[t.cid] = &t;
    for (auto& ex : examples) {
      auto it = by_cid.find(ex.key);
      if (it == by_cid.end())
        throw KeyMismatch("embedding cid '" + ex.key + "' not present in --sdf input");
      ex.kinds = it->second->kinds;
    }
    config.initial_weights = store.weights;
  }

  PredictorParams params =
      init_predictor(config, static_cast<int>(config.selected_targets().size()));
  const TrainMetrics metrics = train_predictor(params, examples, table, config);

  json j;
  j["config"] = {{"embeddings", embeddings_path},
                 {"targets_file", targets_path},
                 {"input_dim", config.input_dim},
                 {"hidden", json::array({config.hidden1, config.hidden2})},
                 {"epochs", config.epochs},
                 {"learning_rate", config.learning_rate},
                 {"weight_mode",
                  config.weight_mode == WeightMode::kFixed ? "fixed" : "trainable"}};
  j["split_seed"] = config.seed;
  const auto sel_ids = config.selected_targets();
  json train_mae = json::object(), val_mae = json::object();
  for (std::size_t i = 0; i < sel_ids.size(); ++i) {
    train_mae[kTargetColumns[sel_ids[i]]] = metrics.train_mae[static_cast<Eigen::Index>(i)];
    if (metrics.val_mae.size() > 0)
      val_mae[kTargetColumns[sel_ids[i]]] = metrics.val_mae[static_cast<Eigen::Index>(i)];
  }
  j["train_mae"] = train_mae;
  j["val_mae"] = val_mae;
  if (config.weight_mode == WeightMode::kTrainableByKind)
    j["final_weights"] = {{"fg", metrics.final_weights[0]},
                          {"rg", metrics.final_weights[1]},
                          {"ccg", metrics.final_weights[2]}};
  j["loss_trace"] = {{"first", metrics.loss_trace.front()},
                     {"last", metrics.loss_trace.back()},
                     {"epochs", metrics.loss_trace.size()}};
  j["train_keys"] = metrics.train_keys;
  j["val_keys"] = metrics.val_keys;
  std::cout << j.dump() << "\n";
  if (!out.empty()) {
    std::ofstream f(out);
    f << j.dump(2) << "\n";
    write_manifest("train-predict", j["config"], {embeddings_path, targets_path},
                   config.seed, {out});
  }
  return kOk;
}

int cmd_tune_weights(const std::string& input, const std::string& params_path,
                     const std::string& targets_path, const std::string& keying,
                     const std::string& target_name, SearchSpec spec,
                     const PredictorConfig& pconfig, const std::string& cache_dir,
                     const std::string& out, int jobs) {
  const int target = target_index(target_name);
  if (target < 0) throw TargetError("unknown target '" + target_name + "'");
  spec.target = target;

  const GaeParams gae = read_params(params_path);
  const auto dataset = tensors_from_sdf(input, scheme_by_id(gae.scheme_id), jobs);
  const TargetTable table = load_targets(
      targets_path, keying == "index" ? TargetKeying::kByIndex : TargetKeying::kByCid);

  std::optional<EmbeddingCache> cache;
  if (!cache_dir.empty()) cache.emplace(cache_dir);
  const SearchResult result =
      run_search(spec, dataset, gae, table, pconfig, cache ? &*cache : nullptr);

  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!out.empty()) {
    file.open(out);
    os = &file;
  }
  for (const auto& t : result.trials) {
    json j;
    j["index"] = t.index;
    j["weights"] = {{"fg", t.weights[0]}, {"rg", t.weights[1]}, {"ccg", t.weights[2]}};
    j["target"] = target_name;
    if (t.ok())
      j["val_mae"] = t.val_mae;
    else
      j["error"] = t.error;
    j["cache_key"] = t.cache_key;
    j["wall_time_s"] = t.wall_time_s;
    *os << j.dump() << "\n";
  }
  if (result.best_index >= 0) {
    const Trial& b = result.best();
    std::cerr << "best trial " << b.index << ": weights " << b.weights[0] << ","
              << b.weights[1] << "," << b.weights[2] << " val MAE " << b.val_mae << "\n";
  } else {
    std::cerr << "no successful trial\n";
  }
  if (!out.empty())
    write_manifest("tune-weights",
                   json{{"input", input},
                        {"gae_params", params_path},
                        {"targets_file", targets_path},
                        {"target", target_name},
                        {"budget", spec.budget},
                        {"strategy",
                         spec.strategy == SearchSpec::Strategy::kGrid ? "grid" : "random"}},
                   {input, params_path, targets_path}, spec.seed, {out});
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tiered molecular graph toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  int jobs = 1;
  app.add_option("--jobs", jobs, "worker pool size for per-molecule stages");

  // groups
  auto* groups = app.add_subcommand("groups", "identify FG/RG/CCG per molecule");
  std::string g_input, g_out;
  bool g_lenient = false;
  groups->add_option("input", g_input, "SDF file")->required();
  groups->add_option("--json", g_out, "write JSON lines here instead of stdout");
  groups->add_flag("--lenient", g_lenient, "report per-record errors and continue");

  // stats
  auto* stats = app.add_subcommand("stats", "corpus group-count statistics");
  std::string s_input;
  stats->add_option("input", s_input, "SDF file")->required();

  // train-gae
  auto* tgae = app.add_subcommand("train-gae", "train the tiered graph autoencoder");
  std::string tg_input, tg_scheme = "qm9", tg_out;
  TierConfig tg_config;
  tgae->add_option("input", tg_input, "SDF file")->required();
  tgae->add_option("--scheme", tg_scheme, "qm9|bindingdb")
      ->check(CLI::IsMember({"qm9", "bindingdb"}));
  tgae->add_option("--epochs", tg_config.epochs);
  tgae->add_option("--seed", tg_config.seed);
  tgae->add_option("--hidden", tg_config.hidden_dim);
  tgae->add_option("--embed-dim", tg_config.embed_dim);
  tgae->add_option("--lr", tg_config.learning_rate);
  tgae->add_option("--batch", tg_config.batch_size);
  tgae->add_option("--out", tg_out, "params file")->required();

  // embed
  auto* embed = app.add_subcommand("embed", "export tiered embeddings");
  std::string e_input, e_params, e_weights = "1,0.5,0.1", e_out;
  embed->add_option("input", e_input, "SDF file")->required();
  embed->add_option("--params", e_params, "trained GAE params")->required();
  embed->add_option("--weights", e_weights, "w_fg,w_rg,w_ccg");
  embed->add_option("--out", e_out, "embedding file")->required();

  // train-predict
  auto* tp = app.add_subcommand("train-predict", "train the graph property predictor");
  std::string p_embeddings, p_targets_file, p_keying = "cid", p_targets = "all",
              p_weight_mode = "fixed", p_sdf, p_out;
  PredictorConfig p_config;
  tp->add_option("--embeddings", p_embeddings, "embedding store")->required();
  tp->add_option("--targets-file", p_targets_file, "targets table")->required();
  tp->add_option("--keying", p_keying)->check(CLI::IsMember({"cid", "index"}));
  tp->add_option("--targets", p_targets, "comma list of target ids or 'all'");
  tp->add_option("--epochs", p_config.epochs);
  tp->add_option("--seed", p_config.seed);
  tp->add_option("--lr", p_config.learning_rate);
  tp->add_option("--hidden1", p_config.hidden1);
  tp->add_option("--hidden2", p_config.hidden2);
  tp->add_option("--val-fraction", p_config.val_fraction);
  tp->add_option("--weight-mode", p_weight_mode)->check(CLI::IsMember({"fixed", "trainable"}));
  tp->add_option("--sdf", p_sdf, "SDF input (group kinds for trainable mode)");
  tp->add_option("--out", p_out, "metrics JSON file");

  // tune-weights
  auto* tw = app.add_subcommand("tune-weights", "search group-weight configurations");
  std::string w_input, w_params, w_targets_file, w_keying = "cid", w_target = "mu",
              w_strategy = "grid", w_cache_dir, w_out;
  std::string w_grid_fg = "1", w_grid_rg = "0.5", w_grid_ccg = "0.1";
  SearchSpec w_spec;
  PredictorConfig w_pconfig;
  w_pconfig.epochs = 200;
  tw->add_option("input", w_input, "SDF file")->required();
  tw->add_option("--gae-params", w_params, "trained GAE params")->required();
  tw->add_option("--targets-file", w_targets_file, "targets table")->required();
  tw->add_option("--keying", w_keying)->check(CLI::IsMember({"cid", "index"}));
  tw->add_option("--target", w_target, "target id (e.g. mu)");
  tw->add_option("--strategy", w_strategy)->check(CLI::IsMember({"grid", "random"}));
  tw->add_option("--budget", w_spec.budget);
  tw->add_option("--seed", w_spec.seed);
  tw->add_option("--grid-fg", w_grid_fg, "comma list of FG weights");
  tw->add_option("--grid-rg", w_grid_rg, "comma list of RG weights");
  tw->add_option("--grid-ccg", w_grid_ccg, "comma list of CCG weights");
  double w_min_fg = 0.1, w_max_fg = 2.0, w_min_rg = 0.1, w_max_rg = 2.0,
         w_min_ccg = 0.01, w_max_ccg = 1.0;
  tw->add_option("--min-fg", w_min_fg);
  tw->add_option("--max-fg", w_max_fg);
  tw->add_option("--min-rg", w_min_rg);
  tw->add_option("--max-rg", w_max_rg);
  tw->add_option("--min-ccg", w_min_ccg);
  tw->add_option("--max-ccg", w_max_ccg);
  tw->add_option("--epochs", w_pconfig.epochs, "predictor epochs per trial");
  tw->add_option("--predict-seed", w_pconfig.seed);
  tw->add_option("--cache-dir", w_cache_dir, "embedding cache (TIERGRAPH_CACHE_DIR)");
  tw->add_option("--out", w_out, "trial log (JSON lines)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*groups) return cmd_groups(g_input, g_out, g_lenient, jobs);
    if (*stats) return cmd_stats(s_input, jobs);
    if (*tgae) return cmd_train_gae(tg_input, tg_scheme, tg_config, tg_out, jobs);
    if (*embed) return cmd_embed(e_input, e_params, parse_weights(e_weights), e_out, jobs);
    if (*tp) {
      p_config.weight_mode =
          p_weight_mode == "trainable" ? WeightMode::kTrainableByKind : WeightMode::kFixed;
      return cmd_train_predict(p_embeddings, p_targets_file, p_keying, p_targets, p_config,
                               p_sdf, p_out, jobs);
    }
    if (*tw) {
      w_spec.strategy = w_strategy == "random" ? SearchSpec::Strategy::kRandom
                                               : SearchSpec::Strategy::kGrid;
      w_spec.grid_axes = {parse_axis(w_grid_fg), parse_axis(w_grid_rg),
                          parse_axis(w_grid_ccg)};
      w_spec.random_bounds = {std::pair{w_min_fg, w_max_fg}, std::pair{w_min_rg, w_max_rg},
                              std::pair{w_min_ccg, w_max_ccg}};
      if (w_cache_dir.empty())
        if (const char* env = std::getenv("TIERGRAPH_CACHE_DIR")) w_cache_dir = env;
      return cmd_tune_weights(w_input, w_params, w_targets_file, w_keying, w_target, w_spec,
                              w_pconfig, w_cache_dir, w_out, jobs);
    }
  } catch (const NonFiniteValue& e) {
    std::cerr << "numeric divergence: " << e.what() << "\n";
    return kNumericError;
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}
