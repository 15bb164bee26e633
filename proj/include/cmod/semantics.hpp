#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cmod/diagram.hpp"
#include "cmod/rng.hpp"

namespace cmod {

// Semantic image of one wire: a vector-space dimension or a finite value set.
// The object map of a representation is the canonical one induced by the wire
// payloads, so parallel vector wires compose by dimension addition and finite
// wires by cartesian product.
struct WireSpec {
  enum class Kind { Dim, Finite };

  Kind kind = Kind::Dim;
  int dim = 1;
  std::vector<std::string> values;

  static WireSpec of(const WireType& t) {
    WireSpec s;
    if (t.is_vector()) {
      s.kind = Kind::Dim;
      s.dim = t.dim;
    } else {
      s.kind = Kind::Finite;
      s.values = t.values;
    }
    return s;
  }

  bool is_vector() const { return kind == Kind::Dim; }
  int radix() const { return static_cast<int>(values.size()); }

  bool operator==(const WireSpec&) const = default;
};

using ObjectSpec = std::vector<WireSpec>;

ObjectSpec object_image(const std::vector<WireType>& wires);
ObjectSpec object_image(const Signature& sig, const std::vector<std::string>& wire_names);
int total_dim(const ObjectSpec& spec);        // requires all-vector
uint64_t finite_domain_size(const ObjectSpec& spec);  // requires all-finite
bool all_vector(const ObjectSpec& spec);
bool all_finite(const ObjectSpec& spec);
std::string object_spec_string(const ObjectSpec& spec);

// Datum carried by one wire.
struct Value {
  bool finite = false;
  std::vector<double> vec;  // vector wires
  int sym = -1;             // finite wires, index into the wire's value set

  static Value vector(std::vector<double> v) { return Value{false, std::move(v), -1}; }
  static Value symbol(int s) { return Value{true, {}, s}; }

  bool operator==(const Value&) const = default;
};

using Tuple = std::vector<Value>;

enum class PointwiseKind { Relu, Sigmoid, ArgmaxOnehot };

std::string pointwise_kind_name(PointwiseKind kind);

// Concrete instantiation of one generator.
struct SemanticBox {
  enum class Variant { Linear, Bias, Pointwise, FiniteTable, Permutation, Structural };

  Variant variant = Variant::Structural;
  ObjectSpec dom_spec;
  ObjectSpec cod_spec;

  // Linear: row-major rows x cols; cols may be 0 (constant-zero state).
  int rows = 0, cols = 0;
  std::vector<double> weights;

  std::vector<double> offsets;
  // Pointwise
  PointwiseKind pw = PointwiseKind::Relu;
  int width = 0;
  // FiniteTable: output tuple index per lexicographic input tuple index.
  std::vector<int> table;
  // Permutation on flattened coordinates: y[i] = x[perm[i]].
  std::vector<int> perm;
  // Structural
  StructuralKind structural = StructuralKind::Identity;

  static SemanticBox linear(ObjectSpec dom, ObjectSpec cod, std::vector<double> weights);
  static SemanticBox bias(ObjectSpec spec, std::vector<double> offsets);
  static SemanticBox pointwise(ObjectSpec spec, PointwiseKind kind);
  static SemanticBox finite_table(ObjectSpec dom, ObjectSpec cod, std::vector<int> table);
  static SemanticBox permutation(ObjectSpec dom, ObjectSpec cod, std::vector<int> perm);
  static SemanticBox structural_box(StructuralKind kind, const ObjectSpec& dom);

  double weight_at(int r, int c) const { return weights[static_cast<size_t>(r) * cols + c]; }

  void validate() const;

  bool operator==(const SemanticBox&) const = default;
};

// Generator map of the representation functor. Structural generators fall
// back to their fixed structural semantics when not explicitly mapped.
struct Representation {
  std::map<std::string, SemanticBox> boxes;

  const SemanticBox* find(const std::string& gen_name) const;
  SemanticBox box_for(const Generator& g) const;

  bool operator==(const Representation&) const = default;
};

struct Model {
  Diagram diagram;
  Representation rep;

  bool operator==(const Model&) const = default;
};

Model canonicalize(const Model& m);

// Per-generator functoriality findings; empty means functorial on objects.
struct FunctorialReport {
  struct Violation {
    std::string generator;
    std::string message;
  };
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

FunctorialReport check_functorial(const Representation& rep, const Diagram& d);

SemanticBox box_semantics(const Representation& rep, const Generator& g);

Tuple apply_box(const SemanticBox& box, const Tuple& inputs);

// Topologically ordered propagation; result is independent of the order used.
Tuple evaluate(const Representation& rep, const Diagram& d, const Tuple& input);

// Deterministic sample source for distortion metrics.
struct SampleDistribution {
  std::vector<Tuple> explicit_samples;  // when nonempty, used as-is
  uint64_t seed = 0;
  int count = 64;
  double lo = -1.0;
  double hi = 1.0;
  std::vector<std::pair<double, double>> wire_ranges;  // optional per-wire override

  std::vector<Tuple> draw(const ObjectSpec& dom) const;
};

enum class MetricKind { L2Expected, KlRows, SupFinite };

struct MetricSpec {
  MetricKind kind = MetricKind::L2Expected;
  SampleDistribution distribution;

  static MetricSpec l2(uint64_t seed = 0, int count = 64) {
    MetricSpec m;
    m.kind = MetricKind::L2Expected;
    m.distribution.seed = seed;
    m.distribution.count = count;
    return m;
  }
  static MetricSpec sup_finite() {
    MetricSpec m;
    m.kind = MetricKind::SupFinite;
    return m;
  }
  static MetricSpec kl(uint64_t seed = 0, int count = 64) {
    MetricSpec m;
    m.kind = MetricKind::KlRows;
    m.distribution.seed = seed;
    m.distribution.count = count;
    return m;
  }
};

// A dom/cod-typed map used as a distortion operand: either a single box or a
// whole evaluated diagram.
struct SemanticMap {
  ObjectSpec dom;
  ObjectSpec cod;
  std::function<Tuple(const Tuple&)> apply;

  static SemanticMap of_box(const SemanticBox& box);
  static SemanticMap of_model(const Representation& rep, const Diagram& d);
};

double distortion(const SemanticMap& a, const SemanticMap& b, const MetricSpec& metric);
double distortion(const SemanticBox& a, const SemanticBox& b, const MetricSpec& metric);
double behavioural_distortion(const Model& a, const Model& b, const MetricSpec& metric);

}  // namespace cmod
