#pragma once

#include <algorithm>
#include <vector>

#include "cmod/diagram.hpp"
#include "cmod/interpret.hpp"
#include "cmod/rng.hpp"
#include "cmod/semantics.hpp"

namespace cmod::testing {

// Equality at the coding resolution: same canonical connectivity and equal
// per-generator semantic fingerprints.
inline bool fingerprint_equal(const Model& a, const Model& b, const CodingScheme& scheme) {
  if (canonical_key(a.diagram) != canonical_key(b.diagram)) return false;
  Signature used = signature_of(a.diagram);
  for (const auto& g : used.generators) {
    if (semantic_fingerprint(a.rep.box_for(g), scheme) !=
        semantic_fingerprint(b.rep.box_for(g), scheme)) {
      return false;
    }
  }
  return true;
}

// Stock syntax-only signature used by the random diagram corpus.
inline Signature stock_signature() {
  Signature sig;
  WireType a = WireType::vector("A", 2);
  WireType b = WireType::vector("B", 3);
  sig.add_object(a);
  sig.add_object(b);
  sig.add_generator({"f", {a}, {a}, StructuralKind::Opaque});
  sig.add_generator({"g", {a}, {b}, StructuralKind::Opaque});
  sig.add_generator({"h", {b}, {a}, StructuralKind::Opaque});
  sig.add_generator({"pair", {a, b}, {b}, StructuralKind::Opaque});
  sig.add_generator({"s", {}, {a}, StructuralKind::Opaque});  // state, exercises tie-breaks
  sig.add_generator(make_copy(a));
  sig.add_generator(make_discard(a));
  sig.add_generator(make_swap(a, b));
  sig.add_generator(make_identity(a));
  sig.sort();
  return sig;
}

// Random layered diagram over the stock signature. Always valid.
inline Diagram random_diagram(uint64_t seed, int layers = 3) {
  Signature sig = stock_signature();
  Rng rng(seed);
  std::vector<std::string> current;
  int width = 1 + static_cast<int>(rng.below(3));
  for (int i = 0; i < width; ++i) current.push_back(rng.coin() ? "A" : "B");

  Diagram d = identity_diagram(sig, current);
  for (int layer = 0; layer < layers; ++layer) {
    Diagram step = empty_diagram();
    step.signature = sig;
    size_t pos = 0;
    while (pos < current.size()) {
      std::vector<std::string> names;
      for (const auto& g : sig.generators) {
        size_t k = g.dom.size();
        if (k == 0 || pos + k > current.size()) continue;
        bool match = true;
        for (size_t i = 0; i < k; ++i) {
          if (g.dom[i].name != current[pos + i]) match = false;
        }
        if (match) names.push_back(g.name);
      }
      names.push_back("");  // identity wire
      const std::string& pick = names[rng.below(names.size())];
      if (pick.empty()) {
        step = compose_par(step, identity_diagram(sig, {current[pos]}));
        pos += 1;
      } else {
        const Generator& g = sig.generator(pick);
        step = compose_par(step, single_node_diagram(sig, pick));
        pos += g.dom.size();
      }
    }
    if (rng.coin(0.25)) step = compose_par(step, single_node_diagram(sig, "s"));
    d = compose_seq(d, step);
    current = d.output_types;
  }
  return d;
}

// Random relabeling of node ids plus an edge shuffle; connectivity unchanged.
inline Diagram shuffle_nodes(const Diagram& d, uint64_t seed) {
  Rng rng(seed);
  int n = static_cast<int>(d.nodes.size());
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  for (int i = n - 1; i > 0; --i) {
    std::swap(perm[i], perm[rng.below(static_cast<uint64_t>(i + 1))]);
  }
  Diagram out = d;
  for (int i = 0; i < n; ++i) out.nodes[perm[i]] = d.nodes[i];
  auto remap = [&](Port p) {
    if (p.loc == Port::Loc::NodeIn || p.loc == Port::Loc::NodeOut) p.node = perm[p.node];
    return p;
  };
  for (auto& e : out.edges) e = {remap(e.src), remap(e.dst)};
  for (size_t i = out.edges.size(); i > 1; --i) {
    std::swap(out.edges[i - 1], out.edges[rng.below(i)]);
  }
  return out;
}

// Exhaustive bijection search; usable up to ~8 nodes. Independent of the
// canonical-form path used by is_connectivity_isomorphic.
inline bool iso_oracle(const Diagram& a, const Diagram& b) {
  if (a.input_types.size() != b.input_types.size()) return false;
  if (a.output_types.size() != b.output_types.size()) return false;
  if (a.nodes.size() != b.nodes.size()) return false;
  for (size_t i = 0; i < a.input_types.size(); ++i) {
    if (!(a.signature.object(a.input_types[i]) == b.signature.object(b.input_types[i]))) return false;
  }
  for (size_t i = 0; i < a.output_types.size(); ++i) {
    if (!(a.signature.object(a.output_types[i]) == b.signature.object(b.output_types[i]))) return false;
  }

  int n = static_cast<int>(a.nodes.size());
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  std::vector<Edge> b_edges = b.edges;
  std::sort(b_edges.begin(), b_edges.end());
  do {
    bool gens_ok = true;
    for (int i = 0; i < n && gens_ok; ++i) {
      if (!(a.signature.generator(a.nodes[i].gen) == b.signature.generator(b.nodes[perm[i]].gen))) {
        gens_ok = false;
      }
    }
    if (!gens_ok) continue;
    auto remap = [&](Port p) {
      if (p.loc == Port::Loc::NodeIn || p.loc == Port::Loc::NodeOut) p.node = perm[p.node];
      return p;
    };
    std::vector<Edge> mapped;
    mapped.reserve(a.edges.size());
    for (const auto& e : a.edges) mapped.push_back({remap(e.src), remap(e.dst)});
    std::sort(mapped.begin(), mapped.end());
    if (mapped == b_edges) return true;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return false;
}

}  // namespace cmod::testing
