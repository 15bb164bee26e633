#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cmod/interpret.hpp"
#include "cmod/refine.hpp"
#include "cmod/semantics.hpp"

namespace cmod {

// Optional per-model configuration carried inside a .cmod file. Unset fields
// fall back to the owning modules' defaults.
struct BundleConfig {
  std::optional<int> q;
  std::optional<bool> presence_flags;
  std::optional<uint64_t> kappa;
  std::optional<double> tau;
  std::optional<double> tau_b;
  std::optional<double> eps_global;
  std::optional<double> eps_local;
  std::optional<uint64_t> seed;
  std::optional<std::string> metric;  // "l2" | "kl" | "sup"
  std::optional<int> samples;
  std::optional<int> max_iters;

  bool any() const {
    return q || presence_flags || kappa || tau || tau_b || eps_global || eps_local || seed ||
           metric || samples || max_iters;
  }

  bool operator==(const BundleConfig&) const = default;
};

// A model file's worth of state: the model plus its optional interpretation
// bundle and configuration.
struct Bundle {
  Model model;
  ExplanationSignature vocabulary;
  SyntacticInterpretation syntactic;
  PostHocInterpretation posthoc;
  Reconstruction reconstruction;
  BundleConfig config;

  bool has_interpretation() const {
    return !vocabulary.labels.empty() || !syntactic.by_generator.empty() ||
           !posthoc.by_fingerprint.empty() || !reconstruction.by_label.empty();
  }
};

// The entangled animal/colour classifier: one dense 4x4 box whose matrix is
// a permutation-conjugated pair of 2x2 blocks, with ground-truth labels
// attached to the block fingerprints. Its config selects dense (flagless)
// parameter coding, under which discovering the block structure pays.
Bundle build_fig1();

// The hand-built disentangled reference that search_compressive should reach
// on build_fig1.
Model fig1_refined_model();

struct RankDeficientModel {
  Model model;
  int rank = 0;  // ground truth
};

// One n x n linear box W = U V with U (n x r), V (r x n) from the seeded
// generator. Requires 1 <= r < n and r * 2n < n^2.
RankDeficientModel build_rank_deficient(int n, int r, uint64_t seed);

struct SparseEntangledModel {
  Model model;
  std::vector<int> block_sizes;
  std::vector<int> gather;   // ground-truth column gather order
  std::vector<int> scatter;  // ground-truth row scatter
  double noise = 0.0;
};

// Permutation-conjugated block-diagonal matrix plus +-noise cross-block
// entries with seeded signs.
SparseEntangledModel build_sparse_entangled(const std::vector<int>& block_sizes, double noise,
                                            uint64_t seed);

// Versioned, human-diffable text format (.cmod). Round trips are exact.
void save(const Bundle& bundle, const std::string& path);
Bundle load(const std::string& path);

std::string bundle_to_text(const Bundle& bundle);
Bundle bundle_from_text(const std::string& text, const std::string& origin = "<string>");

// Seeded random models over a small stock signature, used by test corpora.
struct RandomModelOptions {
  bool finite_backend = false;
  int layers = 3;
  bool with_interpretation = false;  // label some fingerprints (bundle only)
  uint64_t kappa = 32;
};

Model random_model(uint64_t seed, const RandomModelOptions& options = {});
Bundle random_bundle(uint64_t seed, const RandomModelOptions& options = {});

// Two models over one shared representation with cod(first) == dom(second),
// so compose_seq(first.diagram, second.diagram) is well-typed.
std::pair<Model, Model> random_composable_pair(uint64_t seed,
                                               const RandomModelOptions& options = {});

CodingScheme scheme_from_config(const BundleConfig& config);
SearchConfig search_config_from(const BundleConfig& config);
InterpretationCostOracle oracle_from_config(const Bundle& bundle);

}  // namespace cmod
