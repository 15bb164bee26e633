#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cmod/mdl.hpp"
#include "cmod/semantics.hpp"

namespace cmod {

// A semantics-preserving rewrite of the syntax. Piecewise passes substitute
// one replacement diagram per generator; context-dependent passes (rewiring,
// region fusion) carry the rewritten model whole.
struct Refinement {
  enum class Kind { PerGenerator, WholeDiagram };

  std::string pass;    // provenance: pass name
  std::string params;  // provenance: parameters, human-readable
  std::string target;  // generator name, or "*" for whole-model passes
  bool identity = false;
  Kind kind = Kind::PerGenerator;
  double eps_local = std::numeric_limits<double>::infinity();
  MetricSpec metric;

  // PerGenerator payload. Absent map entries mean identity.
  Signature target_signature;
  std::map<std::string, std::vector<std::string>> object_map;
  std::map<std::string, Diagram> generator_map;
  std::map<std::string, SemanticBox> new_boxes;
  std::map<std::string, double> per_box_distortion;

  // WholeDiagram payload.
  std::optional<Model> replacement;

  // Stored trace for exact fuse/unfuse round trips.
  struct FuseProvenance {
    Diagram region;
    std::map<std::string, SemanticBox> region_boxes;
    std::string fused_generator;
  };
  std::optional<FuseProvenance> fuse;
};

Refinement identity_refinement();

// Substitutes every node per the refinement and re-checks the per-box
// distortion contract. The model's signature is pruned to what the rewritten
// diagram uses and the result is canonical.
Model apply_refinement(const Refinement& r, const Model& m);

// Functor composition: applying the result equals applying `inner` then
// `outer`. Both refinements must be per-generator rewrites.
Refinement compose_refinements(const Refinement& outer, const Refinement& inner);

// Canonical form with the signature pruned to the used alphabet and the
// representation restricted to it.
Model normalized(const Model& m);

// Pass library. The passes span a spectrum of rewrite strength: exact
// structural cleanups, per-box substitutions holding a local distortion
// budget, and global-only rewrites constrained solely at the model boundary.

// Replaces a linear box W by V (r x n) then U (m x r) at the smallest rank r
// whose reconstruction stays within eps_local under the metric. Returns the
// identity refinement when no admissible rank saves parameters.
Refinement pass_svd_split(const Model& m, const std::string& gen, double eps_local,
                          const MetricSpec& metric);

// Splits a linear box into parallel blocks over the connected components of
// the bipartite row/column graph with edges where |W_ij| > tau_b, emitting
// permutation boxes on both sides. Sub-threshold cross entries are zeroed;
// the per-box distortion must stay within eps_local or the identity
// refinement is returned.
Refinement pass_block_diagonalize(const Model& m, const std::string& gen, double tau_b,
                                  double eps_local, const MetricSpec& metric);

// Zeroes entries with |w| <= tau in a Linear or Bias box.
Refinement pass_sparsify(const Model& m, const std::string& gen, double tau,
                         const MetricSpec& metric);

// Fuses a convex connected region of node ids into one fresh opaque
// generator (abstraction direction). Finite regions get an exact table;
// all-linear vector regions get the composite matrix.
Refinement pass_fuse(const Model& m, const std::vector<int>& region);

// Inverts a fuse using its stored provenance.
Model unfuse(const Model& m, const Refinement& fuse_refinement);

// Exact rewrites to fixpoint: copy-then-discard elimination, dead-box
// elimination, identity-box elimination. Distortion is exactly zero.
Refinement pass_rewire_simplify(const Model& m);

// Re-fits the nonzero entries of the target linear boxes by least squares
// against the original model's behaviour on the sample set; `original`
// defaults to m itself (exact recovery when nothing was zeroed). Keeping the
// current weights is always feasible, so the fit objective never worsens on
// those samples. Requires each target to be used once with a linear
// downstream path.
Refinement pass_global_refit(const Model& m, const std::vector<std::string>& targets,
                             const SampleDistribution& dist, const Model* original = nullptr);

struct SearchConfig {
  double eps_global = 1e-9;
  double eps_local = 1e-6;
  double tau = 0.0;
  double tau_b = 1e-2;
  int max_iterations = 32;
  MetricSpec metric = MetricSpec::l2(0, 64);
  uint64_t seed = 0;
  CodingScheme scheme;

  void validate() const {
    require_domain(eps_global >= 0 && eps_local >= 0 && tau >= 0 && tau_b >= 0,
                   "search budgets must be nonnegative");
    require_domain(max_iterations >= 1, "search needs at least one iteration");
  }
};

struct TraceStep {
  std::string pass;
  std::string target;
  int64_t delta_rep_bits = 0;
  double distortion = 0.0;  // vs the original model, after this step
};

struct RefinementTrace {
  std::vector<TraceStep> steps;
  CostReport final_report;
};

// One accepted step per line: pass, target, delta bits, distortion.
std::string trace_to_text(const RefinementTrace& trace);

// Greedy best-first search over the compressive pass library. Every accepted
// step lowers the representation bits and keeps the behavioural
// distortion against the
// original model within eps_global.
std::pair<Model, RefinementTrace> search_compressive(
    const Model& m, const SearchConfig& config,
    const PostHocInterpretation* ic = nullptr, const InterpretationCostOracle* oracle = nullptr);

struct ParsimonyReport {
  int64_t lhs = 0;  // representation bits saved by the refinement
  int64_t rhs = 0;  // interpretation bits it added
  uint64_t total_before = 0;
  uint64_t total_after = 0;
  bool verdict = false;          // total_after <= total_before
  bool criterion_holds = false;  // lhs >= rhs
};

// Evaluates both sides of the parsimony criterion under a shared semantic
// grounding; the verdict and the criterion agree arithmetically by the cost
// identities, asserted on every report.
ParsimonyReport check_parsimony(const Model& before, const Model& after,
                                const PostHocInterpretation& ic,
                                const InterpretationCostOracle& oracle,
                                const CodingScheme& scheme);

struct CompressivePair {
  Model before;
  Model after;
  PostHocInterpretation ic;  // shared grounding of the pair
};

struct ComonotonicReport {
  struct Counterexample {
    size_t index;
    uint64_t int_before;
    uint64_t int_after;
  };
  std::vector<Counterexample> counterexamples;
  bool all_totals_non_increasing = true;
  bool comonotonic() const { return counterexamples.empty(); }
};

// Verifies rep(m) >= rep(m') implies int(m) >= int(m') across a corpus of
// compressive pairs; reports every violating pair.
ComonotonicReport check_comonotonic(const std::vector<CompressivePair>& corpus,
                                    const CodingScheme& scheme,
                                    const InterpretationCostOracle& oracle);

}  // namespace cmod
