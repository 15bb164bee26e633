#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cmod/coding.hpp"
#include "cmod/semantics.hpp"

namespace cmod {

// Vocabulary of human-interpretable terms with a fixed prefix code: uniform
// ceil(log2 |labels|) bits per label plus 8 bits per gloss character.
struct ExplanationSignature {
  struct Label {
    std::string name;
    std::string gloss;  // optional free text
    bool operator==(const Label&) const = default;
  };

  std::vector<Label> labels;

  void add(const std::string& name, const std::string& gloss = "");
  bool has(const std::string& name) const;
  const Label* find(const std::string& name) const;

  uint64_t uniform_bits() const { return static_cast<uint64_t>(ceil_log2(labels.size())); }
  uint64_t code_length(const std::string& name) const;
  std::map<std::string, uint64_t> code_lengths() const;

  // Kraft inequality over the declared code lengths.
  void validate() const;

  bool operator==(const ExplanationSignature&) const = default;
};

InterpretationCostOracle label_code_oracle(const ExplanationSignature& vocab, uint64_t kappa = 32);

// Canonical text form of a box with parameters quantized at the coding
// resolution. Boxes with equal fingerprints are semantically identical at
// that resolution.
std::string semantic_fingerprint(const SemanticBox& box, const CodingScheme& scheme);

// Syntactic grounding: partial map from generators to labels.
struct SyntacticInterpretation {
  std::map<std::string, std::string> by_generator;

  const std::string* label_of(const std::string& gen) const {
    auto it = by_generator.find(gen);
    return it == by_generator.end() ? nullptr : &it->second;
  }

  bool operator==(const SyntacticInterpretation&) const = default;
};

// Semantic grounding: partial map from fingerprints to labels. An archetype box is
// kept per fingerprint so the map can be serialized.
struct PostHocInterpretation {
  struct Entry {
    std::string label;
    SemanticBox archetype;
    bool operator==(const Entry&) const = default;
  };

  std::map<std::string, Entry> by_fingerprint;

  void assign(const SemanticBox& box, const CodingScheme& scheme, const std::string& label);
  const std::string* label_of(const std::string& fingerprint) const {
    auto it = by_fingerprint.find(fingerprint);
    return it == by_fingerprint.end() ? nullptr : &it->second.label;
  }

  bool operator==(const PostHocInterpretation&) const = default;
};

// I*_C: partial map from labels back to canonical implementations.
struct Reconstruction {
  std::map<std::string, SemanticBox> by_label;

  const SemanticBox* box_of(const std::string& label) const {
    auto it = by_label.find(label);
    return it == by_label.end() ? nullptr : &it->second;
  }

  bool operator==(const Reconstruction&) const = default;
};

// Labels each generator by its box's semantic label; the result commutes
// with ic by construction.
SyntacticInterpretation induce_syntactic(const PostHocInterpretation& ic,
                                         const Representation& rep, const Signature& sig,
                                         const CodingScheme& scheme);

struct CommutationReport {
  enum class Kind { Conflict, OnlySyntactic, OnlySemantic };
  struct Item {
    std::string generator;
    Kind kind;
    std::string syntactic_label;  // empty when undefined
    std::string semantic_label;
  };
  std::vector<Item> items;
  bool empty() const { return items.empty(); }
};

CommutationReport check_commutes(const SyntacticInterpretation& is_,
                                 const PostHocInterpretation& ic, const Representation& rep,
                                 const Signature& sig, const CodingScheme& scheme);

struct FaithfulnessReport {
  double max_distortion = 0.0;
  std::vector<std::string> violations;  // labeled generators beyond eps
  std::vector<std::string> uncovered;   // unlabeled generators
  double coverage = 0.0;
};

// Checks that every labeled generator's box is within eps of the box its
// label reconstructs to.
FaithfulnessReport check_compositional_faithfulness(const SyntacticInterpretation& is_,
                                                    const Reconstruction& recon,
                                                    const Representation& rep,
                                                    const Signature& sig,
                                                    const MetricSpec& metric, double eps);

// Fraction of the signature's generators that carry a label.
double completeness(const SyntacticInterpretation& is_, const Signature& sig);

}  // namespace cmod
