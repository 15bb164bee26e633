#include "cmod/semantics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace cmod {

ObjectSpec object_image(const std::vector<WireType>& wires) {
  ObjectSpec spec;
  spec.reserve(wires.size());
  for (const auto& w : wires) spec.push_back(WireSpec::of(w));
  return spec;
}

ObjectSpec object_image(const Signature& sig, const std::vector<std::string>& wire_names) {
  ObjectSpec spec;
  spec.reserve(wire_names.size());
  for (const auto& name : wire_names) spec.push_back(WireSpec::of(sig.object(name)));
  return spec;
}

bool all_vector(const ObjectSpec& spec) {
  return std::all_of(spec.begin(), spec.end(), [](const WireSpec& s) { return s.is_vector(); });
}

bool all_finite(const ObjectSpec& spec) {
  return std::all_of(spec.begin(), spec.end(), [](const WireSpec& s) { return !s.is_vector(); });
}

int total_dim(const ObjectSpec& spec) {
  require_domain(all_vector(spec), "expected vector wires");
  int d = 0;
  for (const auto& s : spec) d += s.dim;
  return d;
}

uint64_t finite_domain_size(const ObjectSpec& spec) {
  require_domain(all_finite(spec), "expected finite wires");
  uint64_t n = 1;
  for (const auto& s : spec) n *= static_cast<uint64_t>(s.radix());
  return n;
}

std::string object_spec_string(const ObjectSpec& spec) {
  std::ostringstream out;
  for (size_t i = 0; i < spec.size(); ++i) {
    if (i) out << "+";
    if (spec[i].is_vector()) {
      out << "v" << spec[i].dim;
    } else {
      out << "f(";
      for (size_t j = 0; j < spec[i].values.size(); ++j) {
        if (j) out << ",";
        out << spec[i].values[j];
      }
      out << ")";
    }
  }
  return out.str();
}

std::string pointwise_kind_name(PointwiseKind kind) {
  switch (kind) {
    case PointwiseKind::Relu: return "relu";
    case PointwiseKind::Sigmoid: return "sigmoid";
    case PointwiseKind::ArgmaxOnehot: return "argmax_onehot";
  }
  return "?";
}

SemanticBox SemanticBox::linear(ObjectSpec dom, ObjectSpec cod, std::vector<double> weights) {
  SemanticBox b;
  b.variant = Variant::Linear;
  b.dom_spec = std::move(dom);
  b.cod_spec = std::move(cod);
  b.cols = b.dom_spec.empty() ? 0 : total_dim(b.dom_spec);
  b.rows = total_dim(b.cod_spec);
  b.weights = std::move(weights);
  b.validate();
  return b;
}

SemanticBox SemanticBox::bias(ObjectSpec spec, std::vector<double> offsets) {
  SemanticBox b;
  b.variant = Variant::Bias;
  b.dom_spec = spec;
  b.cod_spec = std::move(spec);
  b.offsets = std::move(offsets);
  b.validate();
  return b;
}

SemanticBox SemanticBox::pointwise(ObjectSpec spec, PointwiseKind kind) {
  SemanticBox b;
  b.variant = Variant::Pointwise;
  b.dom_spec = spec;
  b.cod_spec = std::move(spec);
  b.pw = kind;
  b.width = total_dim(b.dom_spec);
  b.validate();
  return b;
}

SemanticBox SemanticBox::finite_table(ObjectSpec dom, ObjectSpec cod, std::vector<int> table) {
  SemanticBox b;
  b.variant = Variant::FiniteTable;
  b.dom_spec = std::move(dom);
  b.cod_spec = std::move(cod);
  b.table = std::move(table);
  b.validate();
  return b;
}

SemanticBox SemanticBox::permutation(ObjectSpec dom, ObjectSpec cod, std::vector<int> perm) {
  SemanticBox b;
  b.variant = Variant::Permutation;
  b.dom_spec = std::move(dom);
  b.cod_spec = std::move(cod);
  b.perm = std::move(perm);
  b.validate();
  return b;
}

SemanticBox SemanticBox::structural_box(StructuralKind kind, const ObjectSpec& dom) {
  SemanticBox b;
  b.variant = Variant::Structural;
  b.structural = kind;
  b.dom_spec = dom;
  switch (kind) {
    case StructuralKind::Copy:
      require_domain(dom.size() == 1, "copy expects one wire");
      b.cod_spec = {dom[0], dom[0]};
      break;
    case StructuralKind::Discard:
      require_domain(dom.size() == 1, "discard expects one wire");
      b.cod_spec = {};
      break;
    case StructuralKind::Swap:
      require_domain(dom.size() == 2, "swap expects two wires");
      b.cod_spec = {dom[1], dom[0]};
      break;
    case StructuralKind::Identity:
      require_domain(dom.size() == 1, "identity expects one wire");
      b.cod_spec = dom;
      break;
    case StructuralKind::Opaque:
      fail_domain("structural box cannot be opaque");
  }
  return b;
}

void SemanticBox::validate() const {
  switch (variant) {
    case Variant::Linear: {
      require_domain(all_vector(dom_spec) && all_vector(cod_spec),
                     "linear box requires vector wires");
      int want_cols = dom_spec.empty() ? 0 : total_dim(dom_spec);
      int want_rows = total_dim(cod_spec);
      require_domain(rows == want_rows && cols == want_cols,
                     "linear box shape disagrees with dom/cod specs");
      require_domain(static_cast<int>(weights.size()) == rows * cols,
                     "linear box weight count disagrees with its shape");
      break;
    }
    case Variant::Bias: {
      require_domain(all_vector(dom_spec), "bias box requires vector wires");
      require_domain(dom_spec == cod_spec, "bias box must be square");
      require_domain(static_cast<int>(offsets.size()) == total_dim(dom_spec),
                     "bias width disagrees with its spec");
      break;
    }
    case Variant::Pointwise: {
      require_domain(all_vector(dom_spec), "pointwise box requires vector wires");
      require_domain(dom_spec == cod_spec, "pointwise box must be square");
      require_domain(width == total_dim(dom_spec), "pointwise width disagrees with its spec");
      break;
    }
    case Variant::FiniteTable: {
      require_domain(all_finite(dom_spec) && all_finite(cod_spec),
                     "finite table requires finite wires");
      uint64_t dom_size = finite_domain_size(dom_spec);
      uint64_t cod_size = finite_domain_size(cod_spec);
      require_domain(table.size() == dom_size, "finite table must be total over its domain");
      for (int entry : table) {
        require_domain(entry >= 0 && static_cast<uint64_t>(entry) < cod_size,
                       "finite table entry out of codomain range");
      }
      break;
    }
    case Variant::Permutation: {
      require_domain(all_vector(dom_spec) && all_vector(cod_spec),
                     "permutation box requires vector wires");
      int n = total_dim(dom_spec);
      require_domain(total_dim(cod_spec) == n, "permutation must preserve total dimension");
      require_domain(static_cast<int>(perm.size()) == n, "permutation index list size mismatch");
      std::vector<bool> seen(static_cast<size_t>(n), false);
      for (int p : perm) {
        require_domain(p >= 0 && p < n && !seen[p], "permutation index list is not a bijection");
        seen[p] = true;
      }
      break;
    }
    case Variant::Structural:
      break;
  }
}

const SemanticBox* Representation::find(const std::string& gen_name) const {
  auto it = boxes.find(gen_name);
  return it == boxes.end() ? nullptr : &it->second;
}

SemanticBox Representation::box_for(const Generator& g) const {
  if (const SemanticBox* b = find(g.name)) return *b;
  if (g.is_structural()) return SemanticBox::structural_box(g.kind, object_image(g.dom));
  fail_domain("representation has no semantics for generator '" + g.name + "'");
}

SemanticBox box_semantics(const Representation& rep, const Generator& g) {
  return rep.box_for(g);
}

Model canonicalize(const Model& m) { return Model{canonicalize(m.diagram), m.rep}; }

FunctorialReport check_functorial(const Representation& rep, const Diagram& d) {
  FunctorialReport report;
  Signature used = signature_of(d);
  for (const auto& g : used.generators) {
    SemanticBox box = rep.box_for(g);  // throws missing-generator
    ObjectSpec dom = object_image(g.dom);
    ObjectSpec cod = object_image(g.cod);
    if (box.dom_spec != dom || box.cod_spec != cod) {
      report.violations.push_back(
          {g.name, "box arity " + object_spec_string(box.dom_spec) + " -> " +
                       object_spec_string(box.cod_spec) + " disagrees with object map " +
                       object_spec_string(dom) + " -> " + object_spec_string(cod)});
      continue;
    }
    if (g.is_structural()) {
      if (box.variant != SemanticBox::Variant::Structural || box.structural != g.kind) {
        report.violations.push_back(
            {g.name, "structural generator must map to its fixed structural semantics"});
      }
    } else if (box.variant == SemanticBox::Variant::Structural) {
      report.violations.push_back({g.name, "opaque generator mapped to a structural box"});
    }
  }
  return report;
}

namespace {

std::vector<double> flatten(const Tuple& t) {
  std::vector<double> out;
  for (const auto& v : t) {
    require_domain(!v.finite, "expected vector values");
    out.insert(out.end(), v.vec.begin(), v.vec.end());
  }
  return out;
}

Tuple split_vector(const std::vector<double>& flat, const ObjectSpec& spec) {
  Tuple out;
  size_t pos = 0;
  for (const auto& s : spec) {
    out.push_back(
        Value::vector(std::vector<double>(flat.begin() + pos, flat.begin() + pos + s.dim)));
    pos += static_cast<size_t>(s.dim);
  }
  return out;
}

uint64_t tuple_to_index(const Tuple& t, const ObjectSpec& spec) {
  uint64_t idx = 0;
  for (size_t i = 0; i < spec.size(); ++i) {
    require_domain(t[i].finite, "expected finite values");
    require_domain(t[i].sym >= 0 && t[i].sym < spec[i].radix(), "finite value out of range");
    idx = idx * static_cast<uint64_t>(spec[i].radix()) + static_cast<uint64_t>(t[i].sym);
  }
  return idx;
}

Tuple index_to_tuple(uint64_t idx, const ObjectSpec& spec) {
  Tuple out(spec.size());
  for (size_t i = spec.size(); i-- > 0;) {
    uint64_t radix = static_cast<uint64_t>(spec[i].radix());
    out[i] = Value::symbol(static_cast<int>(idx % radix));
    idx /= radix;
  }
  return out;
}

void check_input_conforms(const SemanticBox& box, const Tuple& inputs) {
  require_domain(inputs.size() == box.dom_spec.size(), "input arity mismatch");
  for (size_t i = 0; i < inputs.size(); ++i) {
    const WireSpec& s = box.dom_spec[i];
    if (s.is_vector()) {
      require_domain(!inputs[i].finite && static_cast<int>(inputs[i].vec.size()) == s.dim,
                     "input shape mismatch on wire " + std::to_string(i));
    } else {
      require_domain(inputs[i].finite && inputs[i].sym >= 0 && inputs[i].sym < s.radix(),
                     "input symbol mismatch on wire " + std::to_string(i));
    }
  }
}

}  // namespace

Tuple apply_box(const SemanticBox& box, const Tuple& inputs) {
  check_input_conforms(box, inputs);
  switch (box.variant) {
    case SemanticBox::Variant::Linear: {
      std::vector<double> x = flatten(inputs);
      std::vector<double> y(static_cast<size_t>(box.rows), 0.0);
      for (int r = 0; r < box.rows; ++r) {
        double acc = 0.0;
        for (int c = 0; c < box.cols; ++c) acc += box.weight_at(r, c) * x[c];
        y[r] = acc;
      }
      return split_vector(y, box.cod_spec);
    }
    case SemanticBox::Variant::Bias: {
      std::vector<double> x = flatten(inputs);
      for (size_t i = 0; i < x.size(); ++i) x[i] += box.offsets[i];
      return split_vector(x, box.cod_spec);
    }
    case SemanticBox::Variant::Pointwise: {
      std::vector<double> x = flatten(inputs);
      switch (box.pw) {
        case PointwiseKind::Relu:
          for (double& v : x) v = v > 0.0 ? v : 0.0;
          break;
        case PointwiseKind::Sigmoid:
          for (double& v : x) v = 1.0 / (1.0 + std::exp(-v));
          break;
        case PointwiseKind::ArgmaxOnehot: {
          size_t best = 0;
          for (size_t i = 1; i < x.size(); ++i) {
            if (x[i] > x[best]) best = i;
          }
          for (size_t i = 0; i < x.size(); ++i) x[i] = i == best ? 1.0 : 0.0;
          break;
        }
      }
      return split_vector(x, box.cod_spec);
    }
    case SemanticBox::Variant::FiniteTable: {
      uint64_t idx = tuple_to_index(inputs, box.dom_spec);
      return index_to_tuple(static_cast<uint64_t>(box.table[idx]), box.cod_spec);
    }
    case SemanticBox::Variant::Permutation: {
      std::vector<double> x = flatten(inputs);
      std::vector<double> y(x.size());
      for (size_t i = 0; i < x.size(); ++i) y[i] = x[box.perm[i]];
      return split_vector(y, box.cod_spec);
    }
    case SemanticBox::Variant::Structural:
      switch (box.structural) {
        case StructuralKind::Copy: return {inputs[0], inputs[0]};
        case StructuralKind::Discard: return {};
        case StructuralKind::Swap: return {inputs[1], inputs[0]};
        case StructuralKind::Identity: return inputs;
        case StructuralKind::Opaque: fail_domain("opaque structural box");
      }
  }
  fail_domain("unhandled box variant");
}

Tuple evaluate(const Representation& rep, const Diagram& d, const Tuple& input) {
  require_domain(input.size() == d.input_types.size(), "input arity disagrees with dom(D)");
  for (size_t i = 0; i < input.size(); ++i) {
    WireSpec s = WireSpec::of(d.signature.object(d.input_types[i]));
    if (s.is_vector()) {
      require_domain(!input[i].finite && static_cast<int>(input[i].vec.size()) == s.dim,
                     "input shape mismatch on boundary port " + std::to_string(i));
    } else {
      require_domain(input[i].finite && input[i].sym >= 0 && input[i].sym < s.radix(),
                     "input symbol mismatch on boundary port " + std::to_string(i));
    }
  }

  std::map<Port, Port> src_of;
  for (const auto& e : d.edges) src_of[e.dst] = e.src;

  std::map<Port, Value> values;  // keyed by producer port
  for (size_t i = 0; i < input.size(); ++i) {
    values[Port::boundary_in(static_cast<int>(i))] = input[i];
  }

  for (int v : topological_order(d)) {
    const Generator& g = d.node_gen(v);
    Tuple args;
    args.reserve(g.dom.size());
    for (size_t i = 0; i < g.dom.size(); ++i) {
      args.push_back(values.at(src_of.at(Port::node_in(v, static_cast<int>(i)))));
    }
    Tuple out;
    try {
      out = apply_box(rep.box_for(g), args);
    } catch (const Error& e) {
      fail_domain("node " + std::to_string(v) + " (" + g.name + "): " + e.what());
    }
    for (size_t i = 0; i < out.size(); ++i) {
      values[Port::node_out(v, static_cast<int>(i))] = std::move(out[i]);
    }
  }

  Tuple result;
  result.reserve(d.output_types.size());
  for (size_t i = 0; i < d.output_types.size(); ++i) {
    result.push_back(values.at(src_of.at(Port::boundary_out(static_cast<int>(i)))));
  }
  return result;
}

std::vector<Tuple> SampleDistribution::draw(const ObjectSpec& dom) const {
  if (!explicit_samples.empty()) return explicit_samples;
  std::vector<Tuple> samples;
  samples.reserve(static_cast<size_t>(count));
  Rng rng(seed);
  for (int s = 0; s < count; ++s) {
    Tuple t;
    t.reserve(dom.size());
    for (size_t w = 0; w < dom.size(); ++w) {
      double wlo = lo, whi = hi;
      if (w < wire_ranges.size()) {
        wlo = wire_ranges[w].first;
        whi = wire_ranges[w].second;
      }
      if (dom[w].is_vector()) {
        std::vector<double> v(static_cast<size_t>(dom[w].dim));
        for (double& x : v) x = rng.uniform(wlo, whi);
        t.push_back(Value::vector(std::move(v)));
      } else {
        t.push_back(
            Value::symbol(static_cast<int>(rng.below(static_cast<uint64_t>(dom[w].radix())))));
      }
    }
    samples.push_back(std::move(t));
  }
  return samples;
}

SemanticMap SemanticMap::of_box(const SemanticBox& box) {
  return SemanticMap{box.dom_spec, box.cod_spec,
                     [box](const Tuple& t) { return apply_box(box, t); }};
}

SemanticMap SemanticMap::of_model(const Representation& rep, const Diagram& d) {
  return SemanticMap{object_image(d.signature, d.input_types),
                     object_image(d.signature, d.output_types),
                     [rep, d](const Tuple& t) { return evaluate(rep, d, t); }};
}

namespace {

double l2_expected(const SemanticMap& a, const SemanticMap& b, const SampleDistribution& dist) {
  std::vector<Tuple> samples = dist.draw(a.dom);
  require_domain(!samples.empty(), "metric distribution produced no samples");
  double total = 0.0;
  for (const auto& x : samples) {
    std::vector<double> ya = flatten(a.apply(x));
    std::vector<double> yb = flatten(b.apply(x));
    require_domain(ya.size() == yb.size(), "output widths differ");
    double sq = 0.0;
    for (size_t i = 0; i < ya.size(); ++i) {
      double diff = ya[i] - yb[i];
      sq += diff * diff;
    }
    total += sq;
  }
  return std::sqrt(total / static_cast<double>(samples.size()));
}

void check_stochastic(const std::vector<double>& p) {
  double sum = 0.0;
  for (double v : p) {
    require_domain(v >= -1e-12, "kl metric requires row-stochastic outputs (negative entry)");
    sum += v;
  }
  require_domain(std::abs(sum - 1.0) <= 1e-9,
                 "kl metric requires row-stochastic outputs (rows must sum to 1)");
}

double kl_rows(const SemanticMap& a, const SemanticMap& b, const SampleDistribution& dist) {
  std::vector<Tuple> samples = dist.draw(a.dom);
  require_domain(!samples.empty(), "metric distribution produced no samples");
  double worst = 0.0;
  for (const auto& x : samples) {
    std::vector<double> p = flatten(a.apply(x));
    std::vector<double> q = flatten(b.apply(x));
    require_domain(p.size() == q.size(), "output widths differ");
    check_stochastic(p);
    check_stochastic(q);
    double kl = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
      if (p[i] <= 0.0) continue;
      require_domain(q[i] > 0.0, "kl undefined: zero mass where the first argument has support");
      kl += p[i] * std::log(p[i] / q[i]);
    }
    worst = std::max(worst, kl);
  }
  return worst;
}

double value_discrepancy(const Value& a, const Value& b) {
  if (a.finite || b.finite) {
    require_domain(a.finite && b.finite, "mixed finite/vector outputs");
    return a.sym == b.sym ? 0.0 : 1.0;
  }
  require_domain(a.vec.size() == b.vec.size(), "output widths differ");
  double worst = 0.0;
  for (size_t i = 0; i < a.vec.size(); ++i) worst = std::max(worst, std::abs(a.vec[i] - b.vec[i]));
  return worst;
}

double sup_finite(const SemanticMap& a, const SemanticMap& b) {
  require_domain(all_finite(a.dom), "sup-finite metric requires a finite domain");
  uint64_t n = finite_domain_size(a.dom);
  double worst = 0.0;
  for (uint64_t idx = 0; idx < n; ++idx) {
    Tuple x = index_to_tuple(idx, a.dom);
    Tuple ya = a.apply(x);
    Tuple yb = b.apply(x);
    require_domain(ya.size() == yb.size(), "output arities differ");
    for (size_t i = 0; i < ya.size(); ++i) worst = std::max(worst, value_discrepancy(ya[i], yb[i]));
  }
  return worst;
}

}  // namespace

double distortion(const SemanticMap& a, const SemanticMap& b, const MetricSpec& metric) {
  require_domain(a.dom == b.dom && a.cod == b.cod, "distortion requires identical dom/cod specs");
  switch (metric.kind) {
    case MetricKind::L2Expected: return l2_expected(a, b, metric.distribution);
    case MetricKind::KlRows: return kl_rows(a, b, metric.distribution);
    case MetricKind::SupFinite: return sup_finite(a, b);
  }
  fail_domain("unhandled metric kind");
}

double distortion(const SemanticBox& a, const SemanticBox& b, const MetricSpec& metric) {
  return distortion(SemanticMap::of_box(a), SemanticMap::of_box(b), metric);
}

double behavioural_distortion(const Model& a, const Model& b, const MetricSpec& metric) {
  SemanticMap ma = SemanticMap::of_model(a.rep, a.diagram);
  SemanticMap mb = SemanticMap::of_model(b.rep, b.diagram);
  if (!(ma.dom == mb.dom && ma.cod == mb.cod)) {
    fail_domain("behavioural distortion requires agreeing boundaries");
  }
  return distortion(ma, mb, metric);
}

}  // namespace cmod
