#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tiergraph/predict.hpp"
#include "tiergraph/tiered_gae.hpp"

namespace tiergraph {

struct EmptyBudget : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CacheCorrupt : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SearchSpec {
  enum class Strategy { kGrid, kRandom };
  Strategy strategy = Strategy::kGrid;
  // kGrid enumerates the cartesian product of the axes in lexicographic
  // order; kRandom samples uniformly from the bounds.
  std::array<std::vector<double>, 3> grid_axes{
      std::vector<double>{1.0}, std::vector<double>{0.5}, std::vector<double>{0.1}};
  std::array<std::pair<double, double>, 3> random_bounds{
      std::pair{0.1, 2.0}, std::pair{0.1, 2.0}, std::pair{0.01, 1.0}};
  int budget = 1;
  int target = 0;  // index into the 12-target list
  unsigned seed = 0;
  int no_improve_limit = 5;
  double min_rel_improvement = 0.005;
};

struct Trial {
  int index = 0;
  std::array<double, 3> weights{1.0, 0.5, 0.1};
  double val_mae = 0.0;
  std::string cache_key;
  double wall_time_s = 0.0;
  bool cache_hit = false;
  std::string error;  // non-empty when the trial failed

  bool ok() const { return error.empty(); }
};

struct SearchResult {
  std::vector<Trial> trials;
  int best_index = -1;  // argmin val MAE over successful trials

  const Trial& best() const;
};

// Content-addressed store of X3 embedding files under one directory.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::string dir);

  static std::string key_for(const std::array<double, 3>& weights,
                             const std::string& params_digest);

  std::string path_for(const std::string& key) const;
  bool contains(const std::string& key) const;
  // Throws CacheCorrupt when the stored header weights disagree with the key.
  std::vector<TieredEmbeddings> load(const std::string& key,
                                     const std::array<double, 3>& expected_weights) const;
  void store(const std::string& key, const std::string& scheme_id,
             const std::array<double, 3>& weights,
             const std::vector<TieredEmbeddings>& entries) const;

 private:
  std::string dir_;
};

std::uint64_t fnv1a64(std::string_view bytes);
std::string digest_params(const GaeParams& params);

// Steps 2-6 of the weight-optimization loop: per configuration, pool X3 under
// the weights (or load it from the cache), train a fresh predictor for the
// target, and record the validation MAE.
SearchResult run_search(const SearchSpec& spec, const std::vector<MoleculeTensors>& dataset,
                        const GaeParams& gae_params, const TargetTable& targets,
                        const PredictorConfig& predictor_config,
                        EmbeddingCache* cache = nullptr);

}  // namespace tiergraph
