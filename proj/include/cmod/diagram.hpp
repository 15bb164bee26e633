#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "cmod/error.hpp"

namespace cmod {

// A wire type is either a real vector space of a fixed dimension or a finite
// ordered set of symbols.
struct WireType {
  enum class Payload { Vector, Finite };

  std::string name;
  Payload payload = Payload::Vector;
  int dim = 1;                       // Vector
  std::vector<std::string> values;   // Finite

  static WireType vector(std::string name, int dim) {
    WireType t;
    t.name = std::move(name);
    t.payload = Payload::Vector;
    t.dim = dim;
    require_domain(dim >= 1, "vector wire '" + t.name + "' needs dim >= 1");
    return t;
  }

  static WireType finite(std::string name, std::vector<std::string> values) {
    WireType t;
    t.name = std::move(name);
    t.payload = Payload::Finite;
    t.values = std::move(values);
    require_domain(!t.values.empty(), "finite wire '" + t.name + "' needs a nonempty value set");
    return t;
  }

  bool is_vector() const { return payload == Payload::Vector; }

  bool operator==(const WireType&) const = default;
};

enum class StructuralKind { Opaque, Copy, Discard, Swap, Identity };

std::string structural_kind_name(StructuralKind kind);

// A box in the signature. Structural generators have arities fixed by kind:
// copy A -> A,A; discard A -> (); swap A,B -> B,A; identity A -> A.
struct Generator {
  std::string name;
  std::vector<WireType> dom;
  std::vector<WireType> cod;
  StructuralKind kind = StructuralKind::Opaque;

  bool is_structural() const { return kind != StructuralKind::Opaque; }
  bool operator==(const Generator&) const = default;
};

Generator make_copy(const WireType& a);
Generator make_discard(const WireType& a);
Generator make_swap(const WireType& a, const WireType& b);
Generator make_identity(const WireType& a);

// The finite alphabet a diagram is built from. Names are unique; merging two
// signatures with conflicting definitions under one name is a domain error.
struct Signature {
  std::vector<WireType> objects;
  std::vector<Generator> generators;

  const WireType* find_object(const std::string& name) const;
  const Generator* find_generator(const std::string& name) const;
  const WireType& object(const std::string& name) const;
  const Generator& generator(const std::string& name) const;

  void add_object(const WireType& t);
  void add_generator(const Generator& g);

  // Deterministic layout: objects and generators sorted by name.
  void sort();
  bool is_sorted() const;

  static Signature merged(const Signature& a, const Signature& b);

  bool operator==(const Signature&) const = default;
};

// One endpoint of an edge. Sources are boundary inputs and node outputs;
// targets are boundary outputs and node inputs.
struct Port {
  enum class Loc { BoundaryIn, BoundaryOut, NodeIn, NodeOut };

  Loc loc = Loc::BoundaryIn;
  int node = -1;  // only for NodeIn/NodeOut
  int index = 0;

  static Port boundary_in(int i) { return {Loc::BoundaryIn, -1, i}; }
  static Port boundary_out(int i) { return {Loc::BoundaryOut, -1, i}; }
  static Port node_in(int n, int i) { return {Loc::NodeIn, n, i}; }
  static Port node_out(int n, int i) { return {Loc::NodeOut, n, i}; }

  bool is_source() const { return loc == Loc::BoundaryIn || loc == Loc::NodeOut; }

  auto operator<=>(const Port&) const = default;
};

std::string port_to_string(const Port& p);

struct Edge {
  Port src;
  Port dst;
  auto operator<=>(const Edge&) const = default;
};

struct DiagramNode {
  std::string gen;  // generator name, resolved through the signature
  bool operator==(const DiagramNode&) const = default;
};

// Typed port graph over a signature. Every port participates in exactly one
// edge, endpoints carry equal wire types, and the node graph is acyclic.
struct Diagram {
  Signature signature;
  std::vector<std::string> input_types;   // dom(D), wire type names in order
  std::vector<std::string> output_types;  // cod(D)
  std::vector<DiagramNode> nodes;
  std::vector<Edge> edges;

  const Generator& node_gen(int node) const { return signature.generator(nodes[node].gen); }

  bool operator==(const Diagram&) const = default;
};

// Constructors.
Diagram empty_diagram();
Diagram identity_diagram(const Signature& sig, const std::vector<std::string>& wires);
Diagram single_node_diagram(const Signature& sig, const std::string& gen_name);

// Throws Error(Domain) describing the first violated invariant.
void validate(const Diagram& d);

// Any topological order of the nodes (Kahn, lowest node id first).
std::vector<int> topological_order(const Diagram& d);

// Sequential composition d1 ; d2. Requires cod(d1) == dom(d2) as typed
// ordered lists; the seam's boundary ports fuse into direct edges.
Diagram compose_seq(const Diagram& d1, const Diagram& d2);

// Parallel composition d1 (x) d2.
Diagram compose_par(const Diagram& d1, const Diagram& d2);

// Exactly the wire types and generators occurring in d (the used alphabet).
Signature signature_of(const Diagram& d);

// Node order becomes the lexicographically least topological order keyed by
// (generator name, input source list); edges sort canonically; the stored
// signature sorts by name. Idempotent, connectivity-preserving.
Diagram canonicalize(const Diagram& d);
bool is_canonical(const Diagram& d);

// Full serialization of the canonical form; equal strings <=> isomorphic.
std::string canonical_key(const Diagram& d);

bool is_connectivity_isomorphic(const Diagram& d1, const Diagram& d2);

// DOT rendering of the canonical form. UTF-8, LF line endings.
std::string to_dot(const Diagram& d);

}  // namespace cmod
