#include "tiergraph/weight_search.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace tiergraph {
namespace {

std::string weights_token(const std::array<double, 3>& w) {
  return format_double(w[0]) + "," + format_double(w[1]) + "," + format_double(w[2]);
}

}  // namespace

const Trial& SearchResult::best() const {
  if (best_index < 0) throw std::logic_error("search produced no successful trial");
  return trials[best_index];
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string digest_params(const GaeParams& params) {
  std::string blob = params.scheme_id + "|" + std::to_string(params.input_dim) + "|";
  char buf[64];
  auto feed = [&](const Param& p) {
    blob += p.name;
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g,", p.value.data()[i]);
      blob += buf;
    }
  };
  for (const auto& p : params.tier1) feed(p);
  for (const auto& p : params.tier2) feed(p);
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(blob)));
  return buf;
}

EmbeddingCache::EmbeddingCache(std::string dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::string EmbeddingCache::key_for(const std::array<double, 3>& weights,
                                    const std::string& params_digest) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(
                    fnv1a64("w=" + weights_token(weights) + "|params=" + params_digest)));
  return buf;
}

std::string EmbeddingCache::path_for(const std::string& key) const {
  return (std::filesystem::path(dir_) / (key + ".emb")).string();
}

bool EmbeddingCache::contains(const std::string& key) const {
  return std::filesystem::exists(path_for(key));
}

std::vector<TieredEmbeddings> EmbeddingCache::load(
    const std::string& key, const std::array<double, 3>& expected_weights) const {
  EmbeddingStore store;
  try {
    store = read_embeddings(path_for(key));
  } catch (const StoreFormatError& e) {
    throw CacheCorrupt(std::string("unreadable cache entry ") + key + ": " + e.what());
  }
  for (int i = 0; i < 3; ++i)
    if (store.weights[i] != expected_weights[i])
      throw CacheCorrupt("cache entry " + key + " header weights " +
                         weights_token(store.weights) + " do not match requested " +
                         weights_token(expected_weights));
  return std::move(store.entries);
}

void EmbeddingCache::store(const std::string& key, const std::string& scheme_id,
                           const std::array<double, 3>& weights,
                           const std::vector<TieredEmbeddings>& entries) const {
  write_embeddings(path_for(key), scheme_id, weights, entries);
}

SearchResult run_search(const SearchSpec& spec, const std::vector<MoleculeTensors>& dataset,
                        const GaeParams& gae_params, const TargetTable& targets,
                        const PredictorConfig& predictor_config, EmbeddingCache* cache) {
  if (spec.budget < 1) throw EmptyBudget("search budget must be >= 1");
  if (spec.target < 0 || spec.target >= kTargetCount)
    throw std::invalid_argument("target index out of range");

  // weight configurations, in trial order
  std::vector<std::array<double, 3>> configs;
  if (spec.strategy == SearchSpec::Strategy::kGrid) {
    for (double wf : spec.grid_axes[0])
      for (double wr : spec.grid_axes[1])
        for (double wc : spec.grid_axes[2]) {
          configs.push_back({wf, wr, wc});
          if (static_cast<int>(configs.size()) == spec.budget) goto grid_done;
        }
  grid_done:;
  } else {
    std::mt19937 rng(spec.seed);
    for (int i = 0; i < spec.budget; ++i) {
      std::array<double, 3> w{};
      for (int k = 0; k < 3; ++k) {
        std::uniform_real_distribution<double> dist(spec.random_bounds[k].first,
                                                    spec.random_bounds[k].second);
        w[k] = dist(rng);
      }
      configs.push_back(w);
    }
  }

  // Z2 is weight-independent: embed once, re-pool X3 per configuration.
  const GroupWeightConfig base_weights;
  const std::vector<TieredEmbeddings> base = embed_dataset(gae_params, dataset, base_weights);
  const std::string params_digest = digest_params(gae_params);

  SearchResult result;
  double best_mae = std::numeric_limits<double>::infinity();
  int since_improvement = 0;
  for (std::size_t t = 0; t < configs.size(); ++t) {
    const auto t0 = std::chrono::steady_clock::now();
    Trial trial;
    trial.index = static_cast<int>(t);
    trial.weights = configs[t];
    trial.cache_key = EmbeddingCache::key_for(trial.weights, params_digest);
    try {
      std::vector<TieredEmbeddings> embs;
      if (cache && cache->contains(trial.cache_key)) {
        embs = cache->load(trial.cache_key, trial.weights);
        trial.cache_hit = true;
      } else {
        embs.reserve(base.size());
        for (std::size_t i = 0; i < base.size(); ++i) {
          TieredEmbeddings e = base[i];
          Eigen::VectorXd m2(e.z2.rows());
          for (Eigen::Index k = 0; k < m2.size(); ++k)
            m2[k] = trial.weights[static_cast<int>(dataset[i].kinds[k])];
          e.x3 = diff_group_pool(e.z2, Matrix(m2));
          embs.push_back(std::move(e));
        }
        if (cache)
          cache->store(trial.cache_key, gae_params.scheme_id, trial.weights, embs);
      }

      std::vector<PredictExample> examples;
      examples.reserve(embs.size());
      for (const auto& e : embs) {
        PredictExample ex;
        ex.key = e.cid;
        ex.x3 = e.x3;
        examples.push_back(std::move(ex));
      }
      PredictorConfig pc = predictor_config;
      pc.targets = {spec.target};
      pc.weight_mode = WeightMode::kFixed;
      PredictorParams pp = init_predictor(pc, 1);
      const TrainMetrics metrics = train_predictor(pp, examples, targets, pc);
      trial.val_mae = metrics.val_mae.size() > 0 ? metrics.val_mae[0] : metrics.train_mae[0];
    } catch (const std::exception& e) {
      trial.error = e.what();
    }
    trial.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.trials.push_back(trial);

    if (trial.ok()) {
      if (result.best_index < 0 || trial.val_mae < best_mae) {
        const bool significant =
            result.best_index < 0 ||
            (best_mae - trial.val_mae) >= spec.min_rel_improvement * best_mae;
        best_mae = trial.val_mae;
        result.best_index = static_cast<int>(t);
        since_improvement = significant ? 0 : since_improvement + 1;
      } else {
        ++since_improvement;
      }
    } else {
      ++since_improvement;
    }
    // A grid is a fixed design enumerated in full; the no-improvement rule
    // terminates iterative (sampling) strategies early.
    if (spec.strategy == SearchSpec::Strategy::kRandom &&
        since_improvement >= spec.no_improve_limit)
      break;
  }
  return result;
}

}  // namespace tiergraph
