#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cmod/coding.hpp"
#include "cmod/interpret.hpp"
#include "cmod/semantics.hpp"

namespace cmod {

// Itemized description length of a model plus its interpretation.
// rep_bits == wiring_bits + component_bits and total_bits == rep_bits +
// int_bits hold exactly.
struct CostReport {
  uint64_t wiring_bits = 0;
  uint64_t component_bits = 0;
  uint64_t rep_bits = 0;
  uint64_t int_bits = 0;
  uint64_t total_bits = 0;
  std::vector<std::pair<std::string, uint64_t>> per_generator;  // component itemization
};

// Wiring bits: canonical serialization cost of the diagram. Requires d
// canonical.
// Sections: input count + per-input wire-type id, node count + per-node
// generator id, per consumer port a source index coded uniformly over the
// eligible unconsumed prior sources, output count.
uint64_t wiring_cost(const Diagram& d, const CodingScheme& scheme);

// Component bits for one box: variant tag plus the variant payload.
// Shapes come from the
// signature context and are not priced; permutation index lists are.
uint64_t box_cost(const SemanticBox& box, const CodingScheme& scheme);

// Representation bits: wiring cost plus the box cost of every generator
// the diagram uses, each counted once.
uint64_t rep_complexity(const Model& m, const CodingScheme& scheme);

// Interpretation bits: oracle cost summed over the distinct fingerprints
// the diagram's boxes realize.
uint64_t int_complexity(const Model& m, const PostHocInterpretation& ic,
                        const InterpretationCostOracle& oracle, const CodingScheme& scheme);

// Full report; requires check_commutes(is_, ic, ...) to be empty.
CostReport total_cost(const Model& m, const SyntacticInterpretation& is_,
                      const PostHocInterpretation& ic, const CodingScheme& scheme,
                      const InterpretationCostOracle& oracle);

// Container: 4-byte magic "CMOD", 1-byte version, 1 byte whose low 3 bits
// give the zero-pad length of the final payload byte, then the payload with
// big-endian bit packing.
struct EncodedModel {
  std::vector<uint8_t> container;
  uint64_t wiring_bits = 0;
  uint64_t component_bits = 0;
  uint64_t int_bits = 0;
  uint64_t payload_bits() const { return wiring_bits + component_bits + int_bits; }
};

// Writes the model so that the payload length equals total_cost(...).total_bits
// bit-exactly. Requires a canonical model and an empty commutation report.
EncodedModel encode(const Model& m, const SyntacticInterpretation& is_,
                    const PostHocInterpretation& ic, const CodingScheme& scheme,
                    const InterpretationCostOracle& oracle);

uint64_t container_payload_bits(const std::vector<uint8_t>& container);

struct DecodeResult {
  Model model;
  SyntacticInterpretation is_;
  PostHocInterpretation ic;
};

// Inverse of encode. The signature and the oracle's label codebook are
// decoder context: the wiring and label codes are defined over them. Fails
// loudly on bad magic, version mismatch, truncation, or trailing bits.
DecodeResult decode(const std::vector<uint8_t>& container, const CodingScheme& scheme,
                    const Signature& context_signature, const InterpretationCostOracle& oracle);

}  // namespace cmod
