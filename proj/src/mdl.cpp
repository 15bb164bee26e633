#include "cmod/mdl.hpp"

#include <algorithm>
#include <set>

namespace cmod {

namespace {

constexpr char kMagic[4] = {'C', 'M', 'O', 'D'};

uint64_t gamma_bits(uint64_t v) {
  int n = 0;
  while ((v >> (n + 1)) != 0) ++n;
  return static_cast<uint64_t>(2 * n + 1);
}

uint64_t count_bits(uint64_t k) { return gamma_bits(k + 1); }

int variant_tag(SemanticBox::Variant v) {
  switch (v) {
    case SemanticBox::Variant::Linear: return 0;
    case SemanticBox::Variant::Bias: return 1;
    case SemanticBox::Variant::Pointwise: return 2;
    case SemanticBox::Variant::FiniteTable: return 3;
    case SemanticBox::Variant::Permutation: return 4;
    case SemanticBox::Variant::Structural: return 5;
  }
  fail_domain("unknown box variant");
}

int pointwise_tag(PointwiseKind k) {
  switch (k) {
    case PointwiseKind::Relu: return 0;
    case PointwiseKind::Sigmoid: return 1;
    case PointwiseKind::ArgmaxOnehot: return 2;
  }
  fail_domain("unknown pointwise kind");
}

// The wiring code walks consumers in canonical order and prices each source
// uniformly over the eligible candidates. Node inputs filter candidates by
// wire type (the decoder knows the type); boundary outputs do not (the type
// is learned from the chosen source).
struct SourceSlot {
  Port port;
  std::string type_name;
  bool consumed = false;
};

class WiringWalker {
 public:
  explicit WiringWalker(const Signature& sig) : sig_(sig) {}

  void push_boundary_in(const std::string& type_name, int index) {
    slots_.push_back({Port::boundary_in(index), type_name, false});
  }

  void push_node_outputs(const Generator& g, int node) {
    for (size_t i = 0; i < g.cod.size(); ++i) {
      slots_.push_back({Port::node_out(node, static_cast<int>(i)), g.cod[i].name, false});
    }
  }

  std::vector<size_t> eligible(const std::string* type_filter) const {
    std::vector<size_t> out;
    for (size_t i = 0; i < slots_.size(); ++i) {
      if (slots_[i].consumed) continue;
      if (type_filter && slots_[i].type_name != *type_filter) continue;
      out.push_back(i);
    }
    return out;
  }

  size_t unconsumed() const {
    size_t n = 0;
    for (const auto& s : slots_) {
      if (!s.consumed) ++n;
    }
    return n;
  }

  SourceSlot& slot(size_t i) { return slots_[i]; }

  // Index of `src` within the eligible list; domain error if absent.
  size_t index_of(const std::vector<size_t>& elig, const Port& src) const {
    for (size_t i = 0; i < elig.size(); ++i) {
      if (slots_[elig[i]].port == src) return i;
    }
    fail_domain("wiring source " + port_to_string(src) + " is not an eligible candidate");
  }

 private:
  const Signature& sig_;
  std::vector<SourceSlot> slots_;
};

std::map<Port, Port> source_map(const Diagram& d) {
  std::map<Port, Port> src_of;
  for (const auto& e : d.edges) src_of[e.dst] = e.src;
  return src_of;
}

// Shared traversal for costing and encoding the wiring section. `writer` may
// be null (cost only).
uint64_t walk_wiring(const Diagram& d, BitWriter* writer) {
  const Signature& sig = d.signature;
  int type_id_bits = ceil_log2(sig.objects.size());
  int gen_id_bits = ceil_log2(sig.generators.size());
  auto type_index = [&](const std::string& name) {
    for (size_t i = 0; i < sig.objects.size(); ++i) {
      if (sig.objects[i].name == name) return i;
    }
    fail_domain("unknown wire type '" + name + "'");
  };
  auto gen_index = [&](const std::string& name) {
    for (size_t i = 0; i < sig.generators.size(); ++i) {
      if (sig.generators[i].name == name) return i;
    }
    fail_domain("unknown generator '" + name + "'");
  };

  uint64_t bits = 0;
  auto emit_count = [&](uint64_t k) {
    bits += count_bits(k);
    if (writer) writer->put_count(k);
  };
  auto emit_fixed = [&](uint64_t value, int width) {
    bits += static_cast<uint64_t>(width);
    if (writer) writer->put_bits(value, width);
  };

  WiringWalker walker(sig);
  std::map<Port, Port> src_of = source_map(d);

  emit_count(d.input_types.size());
  for (size_t i = 0; i < d.input_types.size(); ++i) {
    emit_fixed(type_index(d.input_types[i]), type_id_bits);
    walker.push_boundary_in(d.input_types[i], static_cast<int>(i));
  }

  emit_count(d.nodes.size());
  for (size_t v = 0; v < d.nodes.size(); ++v) {
    const Generator& g = d.node_gen(static_cast<int>(v));
    emit_fixed(gen_index(g.name), gen_id_bits);
    for (size_t j = 0; j < g.dom.size(); ++j) {
      Port dst = Port::node_in(static_cast<int>(v), static_cast<int>(j));
      Port src = src_of.at(dst);
      std::vector<size_t> elig = walker.eligible(&g.dom[j].name);
      require_domain(!elig.empty(), "no eligible source for " + port_to_string(dst));
      size_t idx = walker.index_of(elig, src);
      emit_fixed(idx, ceil_log2(elig.size()));
      walker.slot(elig[idx]).consumed = true;
    }
    walker.push_node_outputs(g, static_cast<int>(v));
  }

  emit_count(d.output_types.size());
  require_domain(walker.unconsumed() == d.output_types.size(),
                 "unconsumed sources disagree with the output boundary");
  for (size_t i = 0; i < d.output_types.size(); ++i) {
    Port dst = Port::boundary_out(static_cast<int>(i));
    Port src = src_of.at(dst);
    std::vector<size_t> elig = walker.eligible(nullptr);
    size_t idx = walker.index_of(elig, src);
    emit_fixed(idx, ceil_log2(elig.size()));
    walker.slot(elig[idx]).consumed = true;
  }
  return bits;
}

void quantized_entries(const std::vector<double>& values, const CodingScheme& scheme,
                       std::vector<int64_t>& out) {
  out.clear();
  out.reserve(values.size());
  for (double v : values) out.push_back(scheme.quantize(v));
}

uint64_t walk_dense_params(const std::vector<double>& values, const CodingScheme& scheme,
                           BitWriter* writer) {
  std::vector<int64_t> q;
  quantized_entries(values, scheme, q);
  uint64_t bits = 0;
  if (scheme.presence_flags) {
    bits += q.size();
    uint64_t nonzero = 0;
    for (int64_t k : q) {
      if (writer) writer->put_bit(k != 0 ? 1 : 0);
      if (k != 0) ++nonzero;
    }
    bits += nonzero * static_cast<uint64_t>(scheme.q);
    if (writer) {
      for (int64_t k : q) {
        if (k == 0) continue;
        writer->put_bit(k < 0 ? 1 : 0);
        writer->put_bits(static_cast<uint64_t>(k < 0 ? -k : k), scheme.q - 1);
      }
    }
  } else {
    bits += q.size() * static_cast<uint64_t>(scheme.q);
    if (writer) {
      for (int64_t k : q) {
        writer->put_bit(k < 0 ? 1 : 0);
        writer->put_bits(static_cast<uint64_t>(k < 0 ? -k : k), scheme.q - 1);
      }
    }
  }
  return bits;
}

uint64_t walk_box(const SemanticBox& box, const CodingScheme& scheme, BitWriter* writer) {
  uint64_t bits = 3;
  if (writer) writer->put_bits(static_cast<uint64_t>(variant_tag(box.variant)), 3);
  switch (box.variant) {
    case SemanticBox::Variant::Linear:
      bits += walk_dense_params(box.weights, scheme, writer);
      break;
    case SemanticBox::Variant::Bias:
      bits += walk_dense_params(box.offsets, scheme, writer);
      break;
    case SemanticBox::Variant::Pointwise:
      bits += 2;
      if (writer) writer->put_bits(static_cast<uint64_t>(pointwise_tag(box.pw)), 2);
      break;
    case SemanticBox::Variant::FiniteTable: {
      int row_bits = ceil_log2(finite_domain_size(box.cod_spec));
      bits += box.table.size() * static_cast<uint64_t>(row_bits);
      if (writer) {
        for (int entry : box.table) writer->put_bits(static_cast<uint64_t>(entry), row_bits);
      }
      break;
    }
    case SemanticBox::Variant::Permutation: {
      // Lehmer code: index among the not-yet-used positions.
      size_t n = box.perm.size();
      std::vector<bool> used(n, false);
      for (size_t i = 0; i < n; ++i) {
        uint64_t remaining = static_cast<uint64_t>(n - i);
        int width = ceil_log2(remaining);
        bits += static_cast<uint64_t>(width);
        if (writer) {
          uint64_t idx = 0;
          for (int p = 0; p < box.perm[i]; ++p) {
            if (!used[p]) ++idx;
          }
          writer->put_bits(idx, width);
        }
        used[box.perm[i]] = true;
      }
      break;
    }
    case SemanticBox::Variant::Structural:
      break;
  }
  return bits;
}

struct InterpretationCode {
  InterpretationCostOracle::Mode mode;
  uint64_t kappa = 0;
  PrefixCode prefix;                 // LabelCode / UserTable
  std::vector<std::string> labels;   // ConstantPerElement, sorted
  int index_bits = 0;                // ConstantPerElement

  static InterpretationCode build(const InterpretationCostOracle& oracle) {
    InterpretationCode code;
    code.mode = oracle.mode;
    code.kappa = oracle.kappa;
    if (oracle.mode == InterpretationCostOracle::Mode::ConstantPerElement) {
      for (const auto& [label, len] : oracle.label_bits) code.labels.push_back(label);
      code.index_bits = ceil_log2(std::max<size_t>(code.labels.size(), 1));
      require_domain(oracle.kappa >= 1 + static_cast<uint64_t>(code.index_bits),
                     "constant-per-element records need kappa >= 1 + label index width");
    } else {
      code.prefix = PrefixCode::build(oracle.label_bits, oracle.kappa);
    }
    return code;
  }

  void write(BitWriter& w, const std::string* label) const {
    if (mode == InterpretationCostOracle::Mode::ConstantPerElement) {
      uint64_t pad = kappa - 1 - static_cast<uint64_t>(index_bits);
      if (label) {
        auto it = std::find(labels.begin(), labels.end(), *label);
        require_domain(it != labels.end(), "oracle has no entry for label '" + *label + "'");
        w.put_bit(1);
        w.put_bits(static_cast<uint64_t>(it - labels.begin()), index_bits);
      } else {
        w.put_bit(0);
        w.put_bits(0, index_bits);
      }
      for (uint64_t i = 0; i < pad; ++i) w.put_bit(0);
      return;
    }
    if (label) {
      prefix.write(w, *label);
    } else {
      prefix.write(w, PrefixCode::kUnlabeled);
    }
  }

  // Returns empty optional for an unlabeled element.
  std::optional<std::string> read(BitReader& r) const {
    if (mode == InterpretationCostOracle::Mode::ConstantPerElement) {
      uint64_t pad = kappa - 1 - static_cast<uint64_t>(index_bits);
      int present = r.get_bit();
      uint64_t idx = r.get_bits(index_bits);
      for (uint64_t i = 0; i < pad; ++i) {
        if (r.get_bit() != 0) fail_parse("nonzero padding in interpretation record");
      }
      if (!present) return std::nullopt;
      if (idx >= labels.size()) fail_parse("label index out of range");
      return labels[idx];
    }
    std::string sym = prefix.read(r);
    if (sym == PrefixCode::kUnlabeled) return std::nullopt;
    return sym;
  }
};

// Distinct realized fingerprints in deterministic order (generators sorted by
// name, first occurrence wins), with the label each carries under ic.
struct FingerprintList {
  std::vector<std::string> fingerprints;
  std::vector<const Generator*> witnesses;
};

FingerprintList list_fingerprints(const Signature& used, const Representation& rep,
                                  const CodingScheme& scheme) {
  FingerprintList out;
  std::set<std::string> seen;
  for (const auto& g : used.generators) {
    std::string fp = semantic_fingerprint(rep.box_for(g), scheme);
    if (seen.insert(fp).second) {
      out.fingerprints.push_back(fp);
      out.witnesses.push_back(&g);
    }
  }
  return out;
}

void require_canonical(const Diagram& d) {
  require_domain(is_canonical(d), "operation requires a canonical diagram");
}

}  // namespace

uint64_t wiring_cost(const Diagram& d, const CodingScheme& scheme) {
  scheme.validate();
  require_canonical(d);
  return walk_wiring(d, nullptr);
}

uint64_t box_cost(const SemanticBox& box, const CodingScheme& scheme) {
  scheme.validate();
  box.validate();
  return walk_box(box, scheme, nullptr);
}

uint64_t rep_complexity(const Model& m, const CodingScheme& scheme) {
  scheme.validate();
  Model c = canonicalize(m);
  FunctorialReport fr = check_functorial(c.rep, c.diagram);
  require_domain(fr.ok(), "model is not functorial: " +
                              (fr.violations.empty() ? std::string() : fr.violations[0].message));
  uint64_t bits = walk_wiring(c.diagram, nullptr);
  for (const auto& g : signature_of(c.diagram).generators) {
    bits += box_cost(c.rep.box_for(g), scheme);
  }
  return bits;
}

uint64_t int_complexity(const Model& m, const PostHocInterpretation& ic,
                        const InterpretationCostOracle& oracle, const CodingScheme& scheme) {
  scheme.validate();
  Signature used = signature_of(m.diagram);
  FingerprintList fps = list_fingerprints(used, m.rep, scheme);
  uint64_t bits = 0;
  for (const auto& fp : fps.fingerprints) bits += oracle.cost(ic.label_of(fp));
  return bits;
}

CostReport total_cost(const Model& m, const SyntacticInterpretation& is_,
                      const PostHocInterpretation& ic, const CodingScheme& scheme,
                      const InterpretationCostOracle& oracle) {
  scheme.validate();
  Model c = canonicalize(m);
  CommutationReport commutes = check_commutes(is_, ic, c.rep, signature_of(c.diagram), scheme);
  if (!commutes.empty()) {
    fail_domain("commutation conflict on generator '" + commutes.items[0].generator + "'");
  }

  CostReport report;
  report.wiring_bits = walk_wiring(c.diagram, nullptr);
  for (const auto& g : signature_of(c.diagram).generators) {
    uint64_t bits = box_cost(c.rep.box_for(g), scheme);
    report.per_generator.emplace_back(g.name, bits);
    report.component_bits += bits;
  }
  report.rep_bits = report.wiring_bits + report.component_bits;
  report.int_bits = int_complexity(c, ic, oracle, scheme);
  report.total_bits = report.rep_bits + report.int_bits;
  return report;
}

EncodedModel encode(const Model& m, const SyntacticInterpretation& is_,
                    const PostHocInterpretation& ic, const CodingScheme& scheme,
                    const InterpretationCostOracle& oracle) {
  scheme.validate();
  require_canonical(m.diagram);
  FunctorialReport fr = check_functorial(m.rep, m.diagram);
  require_domain(fr.ok(), "cannot encode a non-functorial model");
  CommutationReport commutes = check_commutes(is_, ic, m.rep, signature_of(m.diagram), scheme);
  if (!commutes.empty()) {
    fail_domain("commutation conflict on generator '" + commutes.items[0].generator + "'");
  }

  BitWriter writer;
  EncodedModel out;
  out.wiring_bits = walk_wiring(m.diagram, &writer);

  Signature used = signature_of(m.diagram);
  uint64_t mark = writer.bit_length();
  for (const auto& g : used.generators) {
    walk_box(m.rep.box_for(g), scheme, &writer);
  }
  out.component_bits = writer.bit_length() - mark;

  InterpretationCode icode = InterpretationCode::build(oracle);
  mark = writer.bit_length();
  FingerprintList fps = list_fingerprints(used, m.rep, scheme);
  for (const auto& fp : fps.fingerprints) {
    icode.write(writer, ic.label_of(fp));
  }
  out.int_bits = writer.bit_length() - mark;

  uint64_t payload_bits = writer.bit_length();
  uint64_t pad = (8 - (payload_bits & 7)) & 7;
  out.container.assign(kMagic, kMagic + 4);
  out.container.push_back(static_cast<uint8_t>(scheme.version));
  out.container.push_back(static_cast<uint8_t>(pad));
  const auto& payload = writer.bytes();
  out.container.insert(out.container.end(), payload.begin(), payload.end());
  return out;
}

uint64_t container_payload_bits(const std::vector<uint8_t>& container) {
  if (container.size() < 6) fail_parse("container too short");
  uint64_t pad = container[5] & 7u;
  uint64_t payload_bytes = container.size() - 6;
  if (payload_bytes == 0 && pad != 0) fail_parse("pad without payload");
  return payload_bytes * 8 - pad;
}

DecodeResult decode(const std::vector<uint8_t>& container, const CodingScheme& scheme,
                    const Signature& context_signature, const InterpretationCostOracle& oracle) {
  scheme.validate();
  if (container.size() < 6) fail_parse("container too short");
  if (!std::equal(kMagic, kMagic + 4, container.begin())) fail_parse("bad magic");
  if (container[4] != static_cast<uint8_t>(scheme.version)) {
    fail_parse("coding scheme version mismatch");
  }
  if ((container[5] & ~7u) != 0) fail_parse("malformed pad byte");
  uint64_t payload_bits = container_payload_bits(container);
  BitReader reader(container.data() + 6, payload_bits);

  Signature sig = context_signature;
  sig.sort();
  int type_id_bits = ceil_log2(sig.objects.size());
  int gen_id_bits = ceil_log2(sig.generators.size());

  Diagram d;
  d.signature = sig;

  // Wiring section.
  uint64_t n_in = reader.get_count();
  struct Slot {
    Port port;
    std::string type_name;
    bool consumed = false;
  };
  std::vector<Slot> slots;
  for (uint64_t i = 0; i < n_in; ++i) {
    uint64_t t = reader.get_bits(type_id_bits);
    if (t >= sig.objects.size()) fail_parse("wire type id out of range");
    d.input_types.push_back(sig.objects[t].name);
    slots.push_back({Port::boundary_in(static_cast<int>(i)), sig.objects[t].name, false});
  }
  uint64_t n_nodes = reader.get_count();
  auto eligible = [&](const std::string* type_filter) {
    std::vector<size_t> out;
    for (size_t i = 0; i < slots.size(); ++i) {
      if (slots[i].consumed) continue;
      if (type_filter && slots[i].type_name != *type_filter) continue;
      out.push_back(i);
    }
    return out;
  };
  for (uint64_t v = 0; v < n_nodes; ++v) {
    uint64_t gi = reader.get_bits(gen_id_bits);
    if (gi >= sig.generators.size()) fail_parse("generator id out of range");
    const Generator& g = sig.generators[gi];
    d.nodes.push_back({g.name});
    for (size_t j = 0; j < g.dom.size(); ++j) {
      std::vector<size_t> elig = eligible(&g.dom[j].name);
      if (elig.empty()) fail_parse("no eligible source while decoding node input");
      uint64_t idx = reader.get_bits(ceil_log2(elig.size()));
      if (idx >= elig.size()) fail_parse("source index out of range");
      Slot& s = slots[elig[idx]];
      s.consumed = true;
      d.edges.push_back({s.port, Port::node_in(static_cast<int>(v), static_cast<int>(j))});
    }
    for (size_t j = 0; j < g.cod.size(); ++j) {
      slots.push_back({Port::node_out(static_cast<int>(v), static_cast<int>(j)), g.cod[j].name,
                       false});
    }
  }
  uint64_t n_out = reader.get_count();
  {
    size_t remaining = 0;
    for (const auto& s : slots) {
      if (!s.consumed) ++remaining;
    }
    if (remaining != n_out) fail_parse("output count disagrees with unconsumed sources");
  }
  for (uint64_t i = 0; i < n_out; ++i) {
    std::vector<size_t> elig = eligible(nullptr);
    uint64_t idx = reader.get_bits(ceil_log2(elig.size()));
    if (idx >= elig.size()) fail_parse("output source index out of range");
    Slot& s = slots[elig[idx]];
    s.consumed = true;
    d.output_types.push_back(s.type_name);
    d.edges.push_back({s.port, Port::boundary_out(static_cast<int>(i))});
  }
  std::sort(d.edges.begin(), d.edges.end());

  // Component section.
  Model model;
  model.diagram = d;
  Signature used = signature_of(d);
  for (const auto& g : used.generators) {
    uint64_t tag = reader.get_bits(3);
    ObjectSpec dom = object_image(g.dom);
    ObjectSpec cod = object_image(g.cod);
    switch (tag) {
      case 0: {  // Linear
        if (!all_vector(dom) || !all_vector(cod)) fail_parse("linear tag on non-vector generator");
        int rows = total_dim(cod);
        int cols = dom.empty() ? 0 : total_dim(dom);
        std::vector<double> w(static_cast<size_t>(rows) * cols, 0.0);
        std::vector<bool> present(w.size(), true);
        if (scheme.presence_flags) {
          for (size_t i = 0; i < w.size(); ++i) present[i] = reader.get_bit() != 0;
        }
        for (size_t i = 0; i < w.size(); ++i) {
          if (!present[i]) continue;
          int sign = reader.get_bit();
          uint64_t mag = reader.get_bits(scheme.q - 1);
          if (scheme.presence_flags && mag == 0) fail_parse("flagged entry decodes to zero");
          int64_t k = sign ? -static_cast<int64_t>(mag) : static_cast<int64_t>(mag);
          w[i] = scheme.dequantize(k);
        }
        model.rep.boxes[g.name] = SemanticBox::linear(dom, cod, std::move(w));
        break;
      }
      case 1: {  // Bias
        if (dom != cod || !all_vector(dom)) fail_parse("bias tag on non-square generator");
        int n = total_dim(dom);
        std::vector<double> b(static_cast<size_t>(n), 0.0);
        std::vector<bool> present(b.size(), true);
        if (scheme.presence_flags) {
          for (size_t i = 0; i < b.size(); ++i) present[i] = reader.get_bit() != 0;
        }
        for (size_t i = 0; i < b.size(); ++i) {
          if (!present[i]) continue;
          int sign = reader.get_bit();
          uint64_t mag = reader.get_bits(scheme.q - 1);
          if (scheme.presence_flags && mag == 0) fail_parse("flagged entry decodes to zero");
          int64_t k = sign ? -static_cast<int64_t>(mag) : static_cast<int64_t>(mag);
          b[i] = scheme.dequantize(k);
        }
        model.rep.boxes[g.name] = SemanticBox::bias(dom, std::move(b));
        break;
      }
      case 2: {  // Pointwise
        if (dom != cod || !all_vector(dom)) fail_parse("pointwise tag on non-square generator");
        uint64_t pk = reader.get_bits(2);
        if (pk > 2) fail_parse("pointwise kind out of range");
        PointwiseKind kind = pk == 0   ? PointwiseKind::Relu
                             : pk == 1 ? PointwiseKind::Sigmoid
                                       : PointwiseKind::ArgmaxOnehot;
        model.rep.boxes[g.name] = SemanticBox::pointwise(dom, kind);
        break;
      }
      case 3: {  // FiniteTable
        if (!all_finite(dom) || !all_finite(cod)) fail_parse("table tag on non-finite generator");
        uint64_t dom_size = finite_domain_size(dom);
        uint64_t cod_size = finite_domain_size(cod);
        int row_bits = ceil_log2(cod_size);
        std::vector<int> table(dom_size, 0);
        for (auto& entry : table) {
          uint64_t e = reader.get_bits(row_bits);
          if (e >= cod_size) fail_parse("table entry out of range");
          entry = static_cast<int>(e);
        }
        model.rep.boxes[g.name] = SemanticBox::finite_table(dom, cod, std::move(table));
        break;
      }
      case 4: {  // Permutation
        if (!all_vector(dom) || !all_vector(cod)) fail_parse("permutation tag on non-vector generator");
        int n = dom.empty() ? 0 : total_dim(dom);
        if (total_dim(cod) != n) fail_parse("permutation tag on non-square generator");
        std::vector<int> remaining(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) remaining[i] = i;
        std::vector<int> perm;
        perm.reserve(remaining.size());
        for (int i = 0; i < n; ++i) {
          uint64_t width = static_cast<uint64_t>(n - i);
          uint64_t idx = reader.get_bits(ceil_log2(width));
          if (idx >= remaining.size()) fail_parse("permutation index out of range");
          perm.push_back(remaining[idx]);
          remaining.erase(remaining.begin() + static_cast<long>(idx));
        }
        model.rep.boxes[g.name] = SemanticBox::permutation(dom, cod, std::move(perm));
        break;
      }
      case 5: {  // Structural
        if (!g.is_structural()) fail_parse("structural tag on opaque generator");
        break;  // fixed semantics, nothing stored
      }
      default:
        fail_parse("invalid box variant tag");
    }
  }

  // Interpretation section.
  InterpretationCode icode = InterpretationCode::build(oracle);
  FingerprintList fps = list_fingerprints(used, model.rep, scheme);
  DecodeResult result;
  for (size_t i = 0; i < fps.fingerprints.size(); ++i) {
    std::optional<std::string> label = icode.read(reader);
    if (label) {
      result.ic.assign(model.rep.box_for(*fps.witnesses[i]), scheme, *label);
    }
  }

  if (reader.position() != payload_bits) fail_parse("trailing bits after model payload");

  result.model = std::move(model);
  result.is_ = induce_syntactic(result.ic, result.model.rep, used, scheme);
  return result;
}

}  // namespace cmod
