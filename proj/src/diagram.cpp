#include "cmod/diagram.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace cmod {

namespace {

void check_identifier(const std::string& name, const char* what) {
  require_domain(!name.empty(), std::string(what) + " name must be nonempty");
  for (char c : name) {
    require_domain(c > ' ' && c != '|' && c != ';',
                   std::string(what) + " name '" + name + "' contains a reserved character");
  }
}

std::string type_list(const std::vector<WireType>& ts) {
  std::string out;
  for (size_t i = 0; i < ts.size(); ++i) {
    if (i) out += ",";
    out += ts[i].name;
  }
  return out;
}

}  // namespace

std::string structural_kind_name(StructuralKind kind) {
  switch (kind) {
    case StructuralKind::Opaque: return "opaque";
    case StructuralKind::Copy: return "copy";
    case StructuralKind::Discard: return "discard";
    case StructuralKind::Swap: return "swap";
    case StructuralKind::Identity: return "identity";
  }
  return "?";
}

Generator make_copy(const WireType& a) {
  return Generator{"~copy(" + a.name + ")", {a}, {a, a}, StructuralKind::Copy};
}

Generator make_discard(const WireType& a) {
  return Generator{"~discard(" + a.name + ")", {a}, {}, StructuralKind::Discard};
}

Generator make_swap(const WireType& a, const WireType& b) {
  return Generator{"~swap(" + a.name + "," + b.name + ")", {a, b}, {b, a}, StructuralKind::Swap};
}

Generator make_identity(const WireType& a) {
  return Generator{"~id(" + a.name + ")", {a}, {a}, StructuralKind::Identity};
}

const WireType* Signature::find_object(const std::string& name) const {
  for (const auto& t : objects) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

const Generator* Signature::find_generator(const std::string& name) const {
  for (const auto& g : generators) {
    if (g.name == name) return &g;
  }
  return nullptr;
}

const WireType& Signature::object(const std::string& name) const {
  const WireType* t = find_object(name);
  if (!t) fail_domain("unknown wire type '" + name + "'");
  return *t;
}

const Generator& Signature::generator(const std::string& name) const {
  const Generator* g = find_generator(name);
  if (!g) fail_domain("unknown generator '" + name + "'");
  return *g;
}

void Signature::add_object(const WireType& t) {
  check_identifier(t.name, "wire type");
  if (t.is_vector()) {
    require_domain(t.dim >= 1, "vector wire '" + t.name + "' needs dim >= 1");
  } else {
    require_domain(!t.values.empty(), "finite wire '" + t.name + "' needs values");
    for (const auto& v : t.values) check_identifier(v, "finite value");
  }
  if (const WireType* prev = find_object(t.name)) {
    require_domain(*prev == t, "conflicting definitions for wire type '" + t.name + "'");
    return;
  }
  objects.push_back(t);
}

void Signature::add_generator(const Generator& g) {
  check_identifier(g.name, "generator");
  switch (g.kind) {
    case StructuralKind::Copy:
      require_domain(g.dom.size() == 1 && g.cod.size() == 2 && g.cod[0] == g.dom[0] &&
                         g.cod[1] == g.dom[0],
                     "copy generator '" + g.name + "' must have arity A -> A,A");
      break;
    case StructuralKind::Discard:
      require_domain(g.dom.size() == 1 && g.cod.empty(),
                     "discard generator '" + g.name + "' must have arity A -> ()");
      break;
    case StructuralKind::Swap:
      require_domain(g.dom.size() == 2 && g.cod.size() == 2 && g.cod[0] == g.dom[1] &&
                         g.cod[1] == g.dom[0],
                     "swap generator '" + g.name + "' must have arity A,B -> B,A");
      break;
    case StructuralKind::Identity:
      require_domain(g.dom.size() == 1 && g.cod.size() == 1 && g.cod[0] == g.dom[0],
                     "identity generator '" + g.name + "' must have arity A -> A");
      break;
    case StructuralKind::Opaque:
      break;
  }
  for (const auto& t : g.dom) add_object(t);
  for (const auto& t : g.cod) add_object(t);
  if (const Generator* prev = find_generator(g.name)) {
    require_domain(*prev == g, "conflicting definitions for generator '" + g.name + "'");
    return;
  }
  generators.push_back(g);
}

void Signature::sort() {
  std::sort(objects.begin(), objects.end(),
            [](const WireType& a, const WireType& b) { return a.name < b.name; });
  std::sort(generators.begin(), generators.end(),
            [](const Generator& a, const Generator& b) { return a.name < b.name; });
}

bool Signature::is_sorted() const {
  auto obj_less = [](const WireType& a, const WireType& b) { return a.name < b.name; };
  auto gen_less = [](const Generator& a, const Generator& b) { return a.name < b.name; };
  return std::is_sorted(objects.begin(), objects.end(), obj_less) &&
         std::is_sorted(generators.begin(), generators.end(), gen_less);
}

Signature Signature::merged(const Signature& a, const Signature& b) {
  Signature out = a;
  for (const auto& t : b.objects) out.add_object(t);
  for (const auto& g : b.generators) out.add_generator(g);
  return out;
}

std::string port_to_string(const Port& p) {
  switch (p.loc) {
    case Port::Loc::BoundaryIn: return "in:" + std::to_string(p.index);
    case Port::Loc::BoundaryOut: return "out:" + std::to_string(p.index);
    case Port::Loc::NodeIn:
      return "n" + std::to_string(p.node) + ":in:" + std::to_string(p.index);
    case Port::Loc::NodeOut:
      return "n" + std::to_string(p.node) + ":out:" + std::to_string(p.index);
  }
  return "?";
}

Diagram empty_diagram() { return Diagram{}; }

Diagram identity_diagram(const Signature& sig, const std::vector<std::string>& wires) {
  Diagram d;
  d.signature = sig;
  for (size_t i = 0; i < wires.size(); ++i) {
    d.signature.object(wires[i]);  // existence check
    d.input_types.push_back(wires[i]);
    d.output_types.push_back(wires[i]);
    d.edges.push_back({Port::boundary_in(static_cast<int>(i)),
                       Port::boundary_out(static_cast<int>(i))});
  }
  return d;
}

Diagram single_node_diagram(const Signature& sig, const std::string& gen_name) {
  Diagram d;
  d.signature = sig;
  const Generator& g = d.signature.generator(gen_name);
  d.nodes.push_back({gen_name});
  for (size_t i = 0; i < g.dom.size(); ++i) {
    d.input_types.push_back(g.dom[i].name);
    d.edges.push_back({Port::boundary_in(static_cast<int>(i)),
                       Port::node_in(0, static_cast<int>(i))});
  }
  for (size_t i = 0; i < g.cod.size(); ++i) {
    d.output_types.push_back(g.cod[i].name);
    d.edges.push_back({Port::node_out(0, static_cast<int>(i)),
                       Port::boundary_out(static_cast<int>(i))});
  }
  return d;
}

namespace {

const WireType& port_type(const Diagram& d, const Port& p) {
  switch (p.loc) {
    case Port::Loc::BoundaryIn: return d.signature.object(d.input_types[p.index]);
    case Port::Loc::BoundaryOut: return d.signature.object(d.output_types[p.index]);
    case Port::Loc::NodeIn: return d.node_gen(p.node).dom[p.index];
    case Port::Loc::NodeOut: return d.node_gen(p.node).cod[p.index];
  }
  fail_domain("bad port");
}

bool port_in_range(const Diagram& d, const Port& p) {
  switch (p.loc) {
    case Port::Loc::BoundaryIn:
      return p.index >= 0 && p.index < static_cast<int>(d.input_types.size());
    case Port::Loc::BoundaryOut:
      return p.index >= 0 && p.index < static_cast<int>(d.output_types.size());
    case Port::Loc::NodeIn:
    case Port::Loc::NodeOut: {
      if (p.node < 0 || p.node >= static_cast<int>(d.nodes.size())) return false;
      const Generator& g = d.node_gen(p.node);
      int arity = static_cast<int>(p.loc == Port::Loc::NodeIn ? g.dom.size() : g.cod.size());
      return p.index >= 0 && p.index < arity;
    }
  }
  return false;
}

}  // namespace

void validate(const Diagram& d) {
  for (const auto& g : d.signature.generators) {
    for (const auto& t : g.dom) {
      require_domain(d.signature.find_object(t.name) && *d.signature.find_object(t.name) == t,
                     "generator '" + g.name + "' references a wire type missing from the signature");
    }
    for (const auto& t : g.cod) {
      require_domain(d.signature.find_object(t.name) && *d.signature.find_object(t.name) == t,
                     "generator '" + g.name + "' references a wire type missing from the signature");
    }
  }
  for (const auto& name : d.input_types) d.signature.object(name);
  for (const auto& name : d.output_types) d.signature.object(name);
  for (const auto& n : d.nodes) d.signature.generator(n.gen);

  std::map<Port, int> uses;
  for (const auto& e : d.edges) {
    require_domain(port_in_range(d, e.src), "edge source " + port_to_string(e.src) + " out of range");
    require_domain(port_in_range(d, e.dst), "edge target " + port_to_string(e.dst) + " out of range");
    require_domain(e.src.is_source(), "edge source " + port_to_string(e.src) + " is not a producer port");
    require_domain(!e.dst.is_source(), "edge target " + port_to_string(e.dst) + " is not a consumer port");
    require_domain(port_type(d, e.src) == port_type(d, e.dst),
                   "edge " + port_to_string(e.src) + " -> " + port_to_string(e.dst) +
                       " connects different wire types");
    ++uses[e.src];
    ++uses[e.dst];
  }

  auto check_port = [&](const Port& p) {
    auto it = uses.find(p);
    require_domain(it != uses.end() && it->second == 1,
                   "port " + port_to_string(p) + " must participate in exactly one edge");
    uses.erase(it);
  };
  for (size_t i = 0; i < d.input_types.size(); ++i) check_port(Port::boundary_in(static_cast<int>(i)));
  for (size_t i = 0; i < d.output_types.size(); ++i) check_port(Port::boundary_out(static_cast<int>(i)));
  for (size_t n = 0; n < d.nodes.size(); ++n) {
    const Generator& g = d.node_gen(static_cast<int>(n));
    for (size_t i = 0; i < g.dom.size(); ++i) check_port(Port::node_in(static_cast<int>(n), static_cast<int>(i)));
    for (size_t i = 0; i < g.cod.size(); ++i) check_port(Port::node_out(static_cast<int>(n), static_cast<int>(i)));
  }
  require_domain(uses.empty(), "diagram has edges on nonexistent ports");

  topological_order(d);  // acyclicity witness
}

std::vector<int> topological_order(const Diagram& d) {
  int n = static_cast<int>(d.nodes.size());
  std::vector<std::set<int>> succ(n);
  std::vector<int> indegree(n, 0);
  for (const auto& e : d.edges) {
    if (e.src.loc == Port::Loc::NodeOut && e.dst.loc == Port::Loc::NodeIn) {
      if (succ[e.src.node].insert(e.dst.node).second) ++indegree[e.dst.node];
    }
  }
  std::set<int> ready;
  for (int i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.insert(i);
  }
  std::vector<int> order;
  order.reserve(n);
  while (!ready.empty()) {
    int v = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(v);
    for (int w : succ[v]) {
      if (--indegree[w] == 0) ready.insert(w);
    }
  }
  require_domain(static_cast<int>(order.size()) == n, "diagram contains a cycle");
  return order;
}

namespace {

Port shift_node(Port p, int offset) {
  if (p.loc == Port::Loc::NodeIn || p.loc == Port::Loc::NodeOut) p.node += offset;
  return p;
}

}  // namespace

Diagram compose_seq(const Diagram& d1, const Diagram& d2) {
  if (d1.output_types.size() != d2.input_types.size()) {
    fail_domain("sequential composition: boundary sizes differ (" +
                std::to_string(d1.output_types.size()) + " vs " +
                std::to_string(d2.input_types.size()) + ")");
  }
  for (size_t i = 0; i < d1.output_types.size(); ++i) {
    const WireType& a = d1.signature.object(d1.output_types[i]);
    const WireType& b = d2.signature.object(d2.input_types[i]);
    if (!(a == b)) {
      fail_domain("sequential composition: type mismatch at seam port " + std::to_string(i) +
                  " (" + a.name + " vs " + b.name + ")");
    }
  }

  Diagram out;
  out.signature = Signature::merged(d1.signature, d2.signature);
  out.input_types = d1.input_types;
  out.output_types = d2.output_types;
  out.nodes = d1.nodes;
  out.nodes.insert(out.nodes.end(), d2.nodes.begin(), d2.nodes.end());
  int offset = static_cast<int>(d1.nodes.size());

  std::vector<Port> seam_src(d1.output_types.size());
  std::vector<Port> seam_dst(d2.input_types.size());
  for (const auto& e : d1.edges) {
    if (e.dst.loc == Port::Loc::BoundaryOut) {
      seam_src[e.dst.index] = e.src;
    } else {
      out.edges.push_back(e);
    }
  }
  for (const auto& e : d2.edges) {
    if (e.src.loc == Port::Loc::BoundaryIn) {
      seam_dst[e.src.index] = shift_node(e.dst, offset);
    } else {
      out.edges.push_back({shift_node(e.src, offset), shift_node(e.dst, offset)});
    }
  }
  for (size_t i = 0; i < seam_src.size(); ++i) out.edges.push_back({seam_src[i], seam_dst[i]});
  return out;
}

Diagram compose_par(const Diagram& d1, const Diagram& d2) {
  Diagram out;
  out.signature = Signature::merged(d1.signature, d2.signature);
  out.input_types = d1.input_types;
  out.input_types.insert(out.input_types.end(), d2.input_types.begin(), d2.input_types.end());
  out.output_types = d1.output_types;
  out.output_types.insert(out.output_types.end(), d2.output_types.begin(), d2.output_types.end());
  out.nodes = d1.nodes;
  out.nodes.insert(out.nodes.end(), d2.nodes.begin(), d2.nodes.end());
  out.edges = d1.edges;

  int node_offset = static_cast<int>(d1.nodes.size());
  int in_offset = static_cast<int>(d1.input_types.size());
  int out_offset = static_cast<int>(d1.output_types.size());
  auto shift = [&](Port p) {
    p = shift_node(p, node_offset);
    if (p.loc == Port::Loc::BoundaryIn) p.index += in_offset;
    if (p.loc == Port::Loc::BoundaryOut) p.index += out_offset;
    return p;
  };
  for (const auto& e : d2.edges) out.edges.push_back({shift(e.src), shift(e.dst)});
  return out;
}

Signature signature_of(const Diagram& d) {
  Signature sig;
  for (const auto& name : d.input_types) sig.add_object(d.signature.object(name));
  for (const auto& name : d.output_types) sig.add_object(d.signature.object(name));
  for (const auto& n : d.nodes) sig.add_generator(d.signature.generator(n.gen));
  sig.sort();
  return sig;
}

namespace {

// One node's entry in the canonical serialization: its generator name plus,
// per input port, a token identifying the source (boundary index or the
// producing node's canonical rank and output port).
struct Contribution {
  std::string gen;
  std::vector<std::array<int, 3>> srcs;
  auto operator<=>(const Contribution&) const = default;
};

struct CanonContext {
  const Diagram* d = nullptr;
  std::vector<std::vector<Port>> node_inputs;   // per node, source port of each input
  std::vector<std::vector<int>> node_producers; // producer node ids (deduped)
  std::vector<Port> out_sources;                // source of each boundary-out port
};

CanonContext build_context(const Diagram& d) {
  CanonContext ctx;
  ctx.d = &d;
  int n = static_cast<int>(d.nodes.size());
  ctx.node_inputs.resize(n);
  ctx.node_producers.resize(n);
  std::map<Port, Port> src_of;
  for (const auto& e : d.edges) src_of[e.dst] = e.src;
  for (size_t i = 0; i < d.output_types.size(); ++i) {
    ctx.out_sources.push_back(src_of.at(Port::boundary_out(static_cast<int>(i))));
  }
  for (int v = 0; v < n; ++v) {
    const Generator& g = d.node_gen(v);
    for (size_t i = 0; i < g.dom.size(); ++i) {
      Port p = src_of.at(Port::node_in(v, static_cast<int>(i)));
      ctx.node_inputs[v].push_back(p);
      if (p.loc == Port::Loc::NodeOut) ctx.node_producers[v].push_back(p.node);
    }
    std::sort(ctx.node_producers[v].begin(), ctx.node_producers[v].end());
    ctx.node_producers[v].erase(
        std::unique(ctx.node_producers[v].begin(), ctx.node_producers[v].end()),
        ctx.node_producers[v].end());
  }
  return ctx;
}

Contribution contribution_of(const CanonContext& ctx, int v, const std::vector<int>& rank) {
  Contribution c;
  c.gen = ctx.d->nodes[v].gen;
  for (const Port& p : ctx.node_inputs[v]) {
    if (p.loc == Port::Loc::BoundaryIn) {
      c.srcs.push_back({0, p.index, 0});
    } else {
      c.srcs.push_back({1, rank[p.node], p.index});
    }
  }
  return c;
}

struct CanonBest {
  bool set = false;
  std::vector<Contribution> serial;
  std::vector<std::array<int, 3>> out_tokens;
  std::vector<int> order;
};

std::vector<std::array<int, 3>> out_tokens_of(const CanonContext& ctx,
                                              const std::vector<int>& rank) {
  std::vector<std::array<int, 3>> tokens;
  tokens.reserve(ctx.out_sources.size());
  for (const Port& p : ctx.out_sources) {
    if (p.loc == Port::Loc::BoundaryIn) {
      tokens.push_back({0, p.index, 0});
    } else {
      tokens.push_back({1, rank[p.node], p.index});
    }
  }
  return tokens;
}

// Greedy lexicographically-least topological serialization. The contribution
// of a ready node is unique unless it has no inputs and shares a generator
// with another ready source node; only such ties branch. The boundary-out
// source list is the final tie-break between otherwise equal serializations.
void canon_search(const CanonContext& ctx, std::vector<int>& rank, std::vector<int>& order,
                  std::vector<Contribution>& serial, CanonBest& best) {
  int n = static_cast<int>(ctx.d->nodes.size());
  if (static_cast<int>(order.size()) == n) {
    std::vector<std::array<int, 3>> tokens = out_tokens_of(ctx, rank);
    if (!best.set || serial < best.serial ||
        (serial == best.serial && tokens < best.out_tokens)) {
      best.set = true;
      best.serial = serial;
      best.out_tokens = tokens;
      best.order = order;
    }
    return;
  }

  std::optional<Contribution> min_c;
  std::vector<int> candidates;
  for (int v = 0; v < n; ++v) {
    if (rank[v] >= 0) continue;
    bool ready = true;
    for (int p : ctx.node_producers[v]) {
      if (rank[p] < 0) {
        ready = false;
        break;
      }
    }
    if (!ready) continue;
    Contribution c = contribution_of(ctx, v, rank);
    if (!min_c || c < *min_c) {
      min_c = std::move(c);
      candidates.assign(1, v);
    } else if (c == *min_c) {
      candidates.push_back(v);
    }
  }

  for (int v : candidates) {
    rank[v] = static_cast<int>(order.size());
    order.push_back(v);
    serial.push_back(*min_c);
    canon_search(ctx, rank, order, serial, best);
    serial.pop_back();
    order.pop_back();
    rank[v] = -1;
    if (candidates.size() == 1) break;
  }
}

std::vector<int> canonical_order(const Diagram& d) {
  CanonContext ctx = build_context(d);
  CanonBest best;
  std::vector<int> rank(d.nodes.size(), -1);
  std::vector<int> order;
  std::vector<Contribution> serial;
  canon_search(ctx, rank, order, serial, best);
  require_domain(best.set || d.nodes.empty(), "diagram admits no topological order");
  return best.order;
}

}  // namespace

Diagram canonicalize(const Diagram& d) {
  validate(d);
  std::vector<int> order = canonical_order(d);
  std::vector<int> rank(d.nodes.size(), -1);
  for (size_t r = 0; r < order.size(); ++r) rank[order[r]] = static_cast<int>(r);

  Diagram out;
  out.signature = d.signature;
  out.signature.sort();
  out.input_types = d.input_types;
  out.output_types = d.output_types;
  out.nodes.reserve(d.nodes.size());
  for (int v : order) out.nodes.push_back(d.nodes[v]);
  auto remap = [&](Port p) {
    if (p.loc == Port::Loc::NodeIn || p.loc == Port::Loc::NodeOut) p.node = rank[p.node];
    return p;
  };
  out.edges.reserve(d.edges.size());
  for (const auto& e : d.edges) out.edges.push_back({remap(e.src), remap(e.dst)});
  std::sort(out.edges.begin(), out.edges.end());
  return out;
}

bool is_canonical(const Diagram& d) { return canonicalize(d) == d; }

std::string canonical_key(const Diagram& d) {
  Diagram c = canonicalize(d);
  std::ostringstream out;
  out << "in|";
  for (const auto& t : c.input_types) out << t << ",";
  out << ";out|";
  for (const auto& t : c.output_types) out << t << ",";
  out << ";";

  std::map<Port, Port> src_of;
  for (const auto& e : c.edges) src_of[e.dst] = e.src;
  auto emit_src = [&](const Port& dst) {
    const Port& s = src_of.at(dst);
    out << port_to_string(s) << ",";
  };
  for (size_t v = 0; v < c.nodes.size(); ++v) {
    out << "n" << v << "|" << c.nodes[v].gen << "|";
    const Generator& g = c.node_gen(static_cast<int>(v));
    for (size_t i = 0; i < g.dom.size(); ++i) emit_src(Port::node_in(static_cast<int>(v), static_cast<int>(i)));
    out << ";";
  }
  out << "outsrc|";
  for (size_t i = 0; i < c.output_types.size(); ++i) emit_src(Port::boundary_out(static_cast<int>(i)));
  out << ";";

  Signature used = signature_of(c);
  out << "types|";
  for (const auto& t : used.objects) {
    out << t.name << "=";
    if (t.is_vector()) {
      out << "vec:" << t.dim;
    } else {
      out << "fin:";
      for (const auto& v : t.values) out << v << ",";
    }
    out << ";";
  }
  out << "gens|";
  for (const auto& g : used.generators) {
    out << g.name << "=" << structural_kind_name(g.kind) << ":" << type_list(g.dom) << "->"
        << type_list(g.cod) << ";";
  }
  return out.str();
}

bool is_connectivity_isomorphic(const Diagram& d1, const Diagram& d2) {
  if (d1.input_types.size() != d2.input_types.size()) return false;
  if (d1.output_types.size() != d2.output_types.size()) return false;
  if (d1.nodes.size() != d2.nodes.size()) return false;
  return canonical_key(d1) == canonical_key(d2);
}

std::string to_dot(const Diagram& d) {
  Diagram c = canonicalize(d);
  std::ostringstream out;
  out << "digraph diagram {\n";
  out << "  rankdir=LR;\n";
  for (size_t i = 0; i < c.input_types.size(); ++i) {
    out << "  in" << i << " [shape=plaintext, label=\"" << c.input_types[i] << "\"];\n";
  }
  for (size_t v = 0; v < c.nodes.size(); ++v) {
    out << "  n" << v << " [shape=box, label=\"" << c.nodes[v].gen << "\"];\n";
  }
  for (size_t i = 0; i < c.output_types.size(); ++i) {
    out << "  out" << i << " [shape=plaintext, label=\"" << c.output_types[i] << "\"];\n";
  }
  auto endpoint = [](const Port& p) {
    switch (p.loc) {
      case Port::Loc::BoundaryIn: return "in" + std::to_string(p.index);
      case Port::Loc::BoundaryOut: return "out" + std::to_string(p.index);
      default: return "n" + std::to_string(p.node);
    }
  };
  for (const auto& e : c.edges) {
    out << "  " << endpoint(e.src) << " -> " << endpoint(e.dst) << " [label=\""
        << port_type(c, e.src).name << "\", taillabel=\"" << e.src.index << "\", headlabel=\""
        << e.dst.index << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace cmod
