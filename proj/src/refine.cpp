#include "cmod/refine.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace cmod {

namespace {

std::map<Port, Port> source_of_map(const Diagram& d) {
  std::map<Port, Port> out;
  for (const auto& e : d.edges) out[e.dst] = e.src;
  return out;
}

std::map<Port, Port> target_of_map(const Diagram& d) {
  std::map<Port, Port> out;
  for (const auto& e : d.edges) out[e.src] = e.dst;
  return out;
}

Eigen::MatrixXd to_eigen(const SemanticBox& box) {
  Eigen::MatrixXd w(box.rows, box.cols);
  for (int r = 0; r < box.rows; ++r) {
    for (int c = 0; c < box.cols; ++c) w(r, c) = box.weight_at(r, c);
  }
  return w;
}

std::vector<double> from_eigen(const Eigen::MatrixXd& w) {
  std::vector<double> out(static_cast<size_t>(w.rows()) * static_cast<size_t>(w.cols()));
  for (int r = 0; r < w.rows(); ++r) {
    for (int c = 0; c < w.cols(); ++c) out[static_cast<size_t>(r) * w.cols() + c] = w(r, c);
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// First node (canonical position) using the generator; -1 when unused.
int first_node_using(const Diagram& d, const std::string& gen) {
  for (size_t v = 0; v < d.nodes.size(); ++v) {
    if (d.nodes[v].gen == gen) return static_cast<int>(v);
  }
  return -1;
}

bool linear_like(const SemanticBox& box) {
  return box.variant == SemanticBox::Variant::Linear ||
         box.variant == SemanticBox::Variant::Permutation ||
         box.variant == SemanticBox::Variant::Structural;
}

}  // namespace

Refinement identity_refinement() {
  Refinement r;
  r.pass = "identity";
  r.target = "*";
  r.identity = true;
  return r;
}

Model normalized(const Model& m) {
  Diagram d = m.diagram;
  d.signature = signature_of(d);
  Model out;
  out.diagram = canonicalize(d);
  for (const auto& g : out.diagram.signature.generators) {
    if (const SemanticBox* b = m.rep.find(g.name)) out.rep.boxes[g.name] = *b;
  }
  return out;
}

namespace {

Model apply_per_generator(const Refinement& r, const Model& m) {
  const Diagram& d = m.diagram;
  Signature sig = Signature::merged(d.signature, r.target_signature);

  auto expansion = [&](const std::string& type_name) -> std::vector<std::string> {
    auto it = r.object_map.find(type_name);
    if (it == r.object_map.end()) return {type_name};
    require_domain(!it->second.empty(), "object map erases wire type '" + type_name + "'");
    return it->second;
  };

  // Functoriality: each replacement's boundary must match the object-map
  // image of its generator's arity; unmapped generators must keep their wire
  // types pointwise.
  for (const auto& [gname, repl] : r.generator_map) {
    const Generator& g = sig.generator(gname);
    std::vector<std::string> want_dom, want_cod;
    for (const auto& t : g.dom) {
      auto ex = expansion(t.name);
      want_dom.insert(want_dom.end(), ex.begin(), ex.end());
    }
    for (const auto& t : g.cod) {
      auto ex = expansion(t.name);
      want_cod.insert(want_cod.end(), ex.begin(), ex.end());
    }
    require_domain(repl.input_types == want_dom && repl.output_types == want_cod,
                   "functoriality violation: replacement for '" + gname +
                       "' does not match the object-map image of its arity");
    for (const auto& e : repl.edges) {
      require_domain(!(e.src.loc == Port::Loc::BoundaryIn && e.dst.loc == Port::Loc::BoundaryOut),
                     "replacement for '" + gname + "' has an unsupported through wire");
    }
  }
  for (const auto& node : d.nodes) {
    if (r.generator_map.count(node.gen)) continue;
    const Generator& g = sig.generator(node.gen);
    for (const auto& t : g.dom) {
      require_domain(expansion(t.name).size() == 1 && expansion(t.name)[0] == t.name,
                     "functoriality violation: generator '" + node.gen +
                         "' is unmapped but its wire type '" + t.name + "' is split");
    }
    for (const auto& t : g.cod) {
      require_domain(expansion(t.name).size() == 1 && expansion(t.name)[0] == t.name,
                     "functoriality violation: generator '" + node.gen +
                         "' is unmapped but its wire type '" + t.name + "' is split");
    }
  }

  Diagram nd;
  nd.signature = sig;
  std::map<Port, std::vector<Port>> producer_exp;
  std::map<Port, std::vector<Port>> consumer_exp;

  for (size_t i = 0; i < d.input_types.size(); ++i) {
    for (const auto& t : expansion(d.input_types[i])) {
      producer_exp[Port::boundary_in(static_cast<int>(i))].push_back(
          Port::boundary_in(static_cast<int>(nd.input_types.size())));
      nd.input_types.push_back(t);
    }
  }
  for (size_t i = 0; i < d.output_types.size(); ++i) {
    for (const auto& t : expansion(d.output_types[i])) {
      consumer_exp[Port::boundary_out(static_cast<int>(i))].push_back(
          Port::boundary_out(static_cast<int>(nd.output_types.size())));
      nd.output_types.push_back(t);
    }
  }

  for (size_t v = 0; v < d.nodes.size(); ++v) {
    const Generator& g = sig.generator(d.nodes[v].gen);
    auto it = r.generator_map.find(g.name);
    if (it == r.generator_map.end()) {
      int nv = static_cast<int>(nd.nodes.size());
      nd.nodes.push_back(d.nodes[v]);
      for (size_t j = 0; j < g.dom.size(); ++j) {
        consumer_exp[Port::node_in(static_cast<int>(v), static_cast<int>(j))] = {
            Port::node_in(nv, static_cast<int>(j))};
      }
      for (size_t j = 0; j < g.cod.size(); ++j) {
        producer_exp[Port::node_out(static_cast<int>(v), static_cast<int>(j))] = {
            Port::node_out(nv, static_cast<int>(j))};
      }
      continue;
    }

    const Diagram& repl = it->second;
    int offset = static_cast<int>(nd.nodes.size());
    for (const auto& rn : repl.nodes) nd.nodes.push_back(rn);
    auto remap = [&](Port p) {
      if (p.loc == Port::Loc::NodeIn || p.loc == Port::Loc::NodeOut) p.node += offset;
      return p;
    };
    std::map<Port, Port> rsrc = source_of_map(repl);
    std::map<Port, Port> rdst = target_of_map(repl);
    for (const auto& e : repl.edges) {
      bool src_internal = e.src.loc == Port::Loc::NodeOut;
      bool dst_internal = e.dst.loc == Port::Loc::NodeIn;
      if (src_internal && dst_internal) nd.edges.push_back({remap(e.src), remap(e.dst)});
    }
    size_t slot = 0;
    for (size_t j = 0; j < g.dom.size(); ++j) {
      std::vector<Port> consumers;
      for (const auto& t : expansion(g.dom[j].name)) {
        (void)t;
        Port inner = rdst.at(Port::boundary_in(static_cast<int>(slot++)));
        consumers.push_back(remap(inner));
      }
      consumer_exp[Port::node_in(static_cast<int>(v), static_cast<int>(j))] = consumers;
    }
    slot = 0;
    for (size_t j = 0; j < g.cod.size(); ++j) {
      std::vector<Port> producers;
      for (const auto& t : expansion(g.cod[j].name)) {
        (void)t;
        Port inner = rsrc.at(Port::boundary_out(static_cast<int>(slot++)));
        producers.push_back(remap(inner));
      }
      producer_exp[Port::node_out(static_cast<int>(v), static_cast<int>(j))] = producers;
    }
  }

  for (const auto& e : d.edges) {
    const auto& ps = producer_exp.at(e.src);
    const auto& cs = consumer_exp.at(e.dst);
    require_domain(ps.size() == cs.size(), "wire expansion width mismatch");
    for (size_t k = 0; k < ps.size(); ++k) nd.edges.push_back({ps[k], cs[k]});
  }

  Model out;
  out.diagram = nd;
  out.rep.boxes = m.rep.boxes;
  for (const auto& [name, box] : r.new_boxes) out.rep.boxes[name] = box;
  return out;
}

}  // namespace

Refinement compose_refinements(const Refinement& outer, const Refinement& inner) {
  if (inner.identity) return outer;
  if (outer.identity) return inner;
  require_domain(inner.kind == Refinement::Kind::PerGenerator &&
                     outer.kind == Refinement::Kind::PerGenerator,
                 "refinement composition is defined for per-generator rewrites");

  Refinement out;
  out.pass = inner.pass + "+" + outer.pass;
  out.params = inner.params + ";" + outer.params;
  out.target = inner.target == outer.target ? inner.target : "*";
  out.metric = outer.metric;
  out.target_signature = Signature::merged(inner.target_signature, outer.target_signature);

  auto expand_outer = [&](const std::string& t) -> std::vector<std::string> {
    auto it = outer.object_map.find(t);
    if (it == outer.object_map.end()) return {t};
    return it->second;
  };
  for (const auto& [t, image] : inner.object_map) {
    std::vector<std::string> composed;
    for (const auto& mid : image) {
      auto ex = expand_outer(mid);
      composed.insert(composed.end(), ex.begin(), ex.end());
    }
    out.object_map[t] = composed;
  }
  for (const auto& [t, image] : outer.object_map) {
    if (!out.object_map.count(t)) out.object_map[t] = image;
  }

  // Push the outer substitution through each inner replacement diagram.
  out.new_boxes = inner.new_boxes;
  for (const auto& [gname, repl] : inner.generator_map) {
    Model sub;
    sub.diagram = repl;
    sub.rep.boxes = inner.new_boxes;
    Model substituted = apply_per_generator(outer, sub);
    out.generator_map[gname] = substituted.diagram;
    for (const auto& [name, box] : substituted.rep.boxes) out.new_boxes[name] = box;
  }
  // Outer rewrites of generators the inner stage left alone.
  for (const auto& [gname, repl] : outer.generator_map) {
    if (out.generator_map.count(gname)) continue;
    out.generator_map[gname] = repl;
  }
  for (const auto& [name, box] : outer.new_boxes) {
    bool replaced_by_inner = false;
    for (const auto& [g, repl] : inner.generator_map) {
      (void)repl;
      if (g == name) replaced_by_inner = true;
    }
    if (!replaced_by_inner) out.new_boxes[name] = box;
  }
  return out;
}

Model apply_refinement(const Refinement& r, const Model& m) {
  validate(m.diagram);
  if (r.identity) return normalized(m);

  if (r.kind == Refinement::Kind::WholeDiagram) {
    require_domain(r.replacement.has_value(), "whole-diagram refinement without a replacement");
    return normalized(*r.replacement);
  }

  Model out = apply_per_generator(r, m);

  // Piecewise contract: per-box distortion within eps_local wherever
  // the replacement boundary is comparable to the original box.
  std::set<std::string> changed;
  for (const auto& [g, _] : r.generator_map) changed.insert(g);
  for (const auto& [g, _] : r.new_boxes) {
    if (m.diagram.signature.find_generator(g)) changed.insert(g);
  }
  for (const auto& gname : changed) {
    if (!std::isfinite(r.eps_local)) break;  // nothing to enforce
    if (first_node_using(m.diagram, gname) < 0) continue;
    const Generator& g = m.diagram.signature.generator(gname);
    SemanticBox old_box = m.rep.box_for(g);
    SemanticMap old_map = SemanticMap::of_box(old_box);
    SemanticMap new_map;
    auto it = r.generator_map.find(gname);
    if (it != r.generator_map.end()) {
      new_map = SemanticMap::of_model(out.rep, it->second);
    } else {
      new_map = SemanticMap::of_box(out.rep.boxes.at(gname));
    }
    if (!(new_map.dom == old_map.dom && new_map.cod == old_map.cod)) continue;
    double measured = distortion(old_map, new_map, r.metric);
    require_domain(measured <= r.eps_local,
                   "per-box distortion " + format_double(measured) + " on '" + gname +
                       "' exceeds eps-local " + format_double(r.eps_local));
  }
  return normalized(out);
}

// ---------------------------------------------------------------------------
// svd split

Refinement pass_svd_split(const Model& m, const std::string& gen, double eps_local,
                          const MetricSpec& metric) {
  const Generator& g = m.diagram.signature.generator(gen);
  const SemanticBox* box = m.rep.find(gen);
  require_domain(box != nullptr && box->variant == SemanticBox::Variant::Linear,
                 "svd split applies to linear boxes only");
  int rows = box->rows, cols = box->cols;
  require_domain(cols >= 1 && rows >= 1, "svd split needs a nonempty matrix");

  Eigen::MatrixXd w = to_eigen(*box);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(w, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  int max_rank = static_cast<int>(sv.size());

  std::string wire_name;
  auto build_refinement = [&](int rank) {
    Refinement r;
    r.pass = "svd_split";
    r.target = gen;
    r.eps_local = eps_local;
    r.metric = metric;
    r.params = "rank=" + std::to_string(rank);

    Signature tsig;
    Diagram repl;
    if (rank == 0) {
      // Degenerate: discard every input, produce the constant zero state.
      tsig = signature_of(single_node_diagram(m.diagram.signature, gen));
      Generator zero{gen + "__zero", {}, g.cod, StructuralKind::Opaque};
      tsig.add_generator(zero);
      for (const auto& t : g.dom) tsig.add_generator(make_discard(t));
      tsig.sort();
      repl.signature = tsig;
      int zero_node = static_cast<int>(g.dom.size());
      for (size_t j = 0; j < g.dom.size(); ++j) {
        repl.nodes.push_back({make_discard(g.dom[j]).name});
        repl.input_types.push_back(g.dom[j].name);
        repl.edges.push_back({Port::boundary_in(static_cast<int>(j)),
                              Port::node_in(static_cast<int>(j), 0)});
      }
      repl.nodes.push_back({zero.name});
      for (size_t k = 0; k < g.cod.size(); ++k) {
        repl.output_types.push_back(g.cod[k].name);
        repl.edges.push_back({Port::node_out(zero_node, static_cast<int>(k)),
                              Port::boundary_out(static_cast<int>(k))});
      }
      r.new_boxes[zero.name] =
          SemanticBox::linear(ObjectSpec{}, object_image(g.cod), std::vector<double>{});
    } else {
      Eigen::VectorXd roots = sv.head(rank).cwiseSqrt();
      Eigen::MatrixXd u = svd.matrixU().leftCols(rank) * roots.asDiagonal();
      Eigen::MatrixXd v = roots.asDiagonal() * svd.matrixV().leftCols(rank).transpose();

      wire_name = gen + "__r" + std::to_string(rank);
      WireType mid = WireType::vector(wire_name, rank);
      Generator gv{gen + "__v", g.dom, {mid}, StructuralKind::Opaque};
      Generator gu{gen + "__u", {mid}, g.cod, StructuralKind::Opaque};
      tsig.add_object(mid);
      tsig.add_generator(gv);
      tsig.add_generator(gu);
      tsig.sort();

      repl.signature = Signature::merged(signature_of(single_node_diagram(m.diagram.signature, gen)), tsig);
      repl.nodes.push_back({gv.name});
      repl.nodes.push_back({gu.name});
      for (size_t j = 0; j < g.dom.size(); ++j) {
        repl.input_types.push_back(g.dom[j].name);
        repl.edges.push_back({Port::boundary_in(static_cast<int>(j)),
                              Port::node_in(0, static_cast<int>(j))});
      }
      repl.edges.push_back({Port::node_out(0, 0), Port::node_in(1, 0)});
      for (size_t k = 0; k < g.cod.size(); ++k) {
        repl.output_types.push_back(g.cod[k].name);
        repl.edges.push_back({Port::node_out(1, static_cast<int>(k)),
                              Port::boundary_out(static_cast<int>(k))});
      }
      r.new_boxes[gv.name] =
          SemanticBox::linear(object_image(g.dom), {WireSpec::of(mid)}, from_eigen(v));
      r.new_boxes[gu.name] =
          SemanticBox::linear({WireSpec::of(mid)}, object_image(g.cod), from_eigen(u));
    }
    r.target_signature = tsig;
    r.generator_map[gen] = repl;
    return r;
  };

  // Smallest rank whose reconstruction stays within eps_local.
  for (int rank = 0; rank <= max_rank; ++rank) {
    Refinement candidate = build_refinement(rank);
    Model probe;
    probe.diagram = candidate.generator_map.at(gen);
    for (const auto& [name, b] : candidate.new_boxes) probe.rep.boxes[name] = b;
    double measured = distortion(SemanticMap::of_box(*box),
                                 SemanticMap::of_model(probe.rep, probe.diagram), metric);
    if (measured <= eps_local) {
      if (rank * (rows + cols) >= rows * cols) return identity_refinement();
      candidate.per_box_distortion[gen] = measured;
      return candidate;
    }
  }
  return identity_refinement();
}

// ---------------------------------------------------------------------------
// block diagonalize

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) {
    for (int i = 0; i < n; ++i) parent[i] = i;
  }
  int find(int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

Refinement pass_block_diagonalize(const Model& m, const std::string& gen, double tau_b,
                                  double eps_local, const MetricSpec& metric) {
  const Generator& g = m.diagram.signature.generator(gen);
  const SemanticBox* box = m.rep.find(gen);
  require_domain(box != nullptr && box->variant == SemanticBox::Variant::Linear,
                 "block diagonalization applies to linear boxes only");
  int rows = box->rows, cols = box->cols;
  require_domain(rows >= 1 && cols >= 1, "block diagonalization needs a nonempty matrix");

  UnionFind uf(rows + cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (std::abs(box->weight_at(r, c)) > tau_b) uf.unite(r, rows + c);
    }
  }

  struct Component {
    std::vector<int> rows;
    std::vector<int> cols;
  };
  std::map<int, Component> by_root;
  for (int r = 0; r < rows; ++r) by_root[uf.find(r)].rows.push_back(r);
  for (int c = 0; c < cols; ++c) by_root[uf.find(rows + c)].cols.push_back(c);

  std::vector<Component> real;
  std::vector<int> isolated_cols, isolated_rows;
  for (auto& [root, comp] : by_root) {
    if (!comp.rows.empty() && !comp.cols.empty()) {
      real.push_back(comp);
    } else if (comp.rows.empty()) {
      isolated_cols.insert(isolated_cols.end(), comp.cols.begin(), comp.cols.end());
    } else {
      isolated_rows.insert(isolated_rows.end(), comp.rows.begin(), comp.rows.end());
    }
  }
  std::sort(real.begin(), real.end(),
            [](const Component& a, const Component& b) { return a.cols[0] < b.cols[0]; });
  std::sort(isolated_cols.begin(), isolated_cols.end());
  std::sort(isolated_rows.begin(), isolated_rows.end());

  size_t total_components = real.size() + (isolated_cols.empty() ? 0 : 1) +
                            (isolated_rows.empty() ? 0 : 1);
  if (total_components < 2) return identity_refinement();

  Refinement r;
  r.pass = "block_diagonalize";
  r.target = gen;
  r.eps_local = eps_local;
  r.metric = metric;
  r.params = "tau_b=" + format_double(tau_b) + ";blocks=" + std::to_string(real.size());

  Signature tsig = signature_of(single_node_diagram(m.diagram.signature, gen));
  Diagram repl;

  // Gathered column order: per component ascending, then isolated columns.
  std::vector<int> gather;
  std::vector<WireType> mid_in, mid_out;
  for (size_t i = 0; i < real.size(); ++i) {
    gather.insert(gather.end(), real[i].cols.begin(), real[i].cols.end());
    mid_in.push_back(WireType::vector(gen + "__w" + std::to_string(i),
                                      static_cast<int>(real[i].cols.size())));
    mid_out.push_back(WireType::vector(gen + "__y" + std::to_string(i),
                                       static_cast<int>(real[i].rows.size())));
  }
  std::optional<WireType> dead_wire;
  if (!isolated_cols.empty()) {
    gather.insert(gather.end(), isolated_cols.begin(), isolated_cols.end());
    dead_wire = WireType::vector(gen + "__wd", static_cast<int>(isolated_cols.size()));
  }
  std::optional<WireType> zero_wire;
  if (!isolated_rows.empty()) {
    zero_wire = WireType::vector(gen + "__yz", static_cast<int>(isolated_rows.size()));
  }

  // Scattered row order mirrors the block order.
  std::vector<int> row_concat;
  for (const auto& comp : real) row_concat.insert(row_concat.end(), comp.rows.begin(), comp.rows.end());
  row_concat.insert(row_concat.end(), isolated_rows.begin(), isolated_rows.end());
  std::vector<int> scatter(static_cast<size_t>(rows));
  for (size_t pos = 0; pos < row_concat.size(); ++pos) scatter[row_concat[pos]] = static_cast<int>(pos);

  Generator p_in{gen + "__p_in", g.dom, {}, StructuralKind::Opaque};
  for (const auto& t : mid_in) p_in.cod.push_back(t);
  if (dead_wire) p_in.cod.push_back(*dead_wire);
  Generator p_out{gen + "__p_out", {}, g.cod, StructuralKind::Opaque};
  for (const auto& t : mid_out) p_out.dom.push_back(t);
  if (zero_wire) p_out.dom.push_back(*zero_wire);

  tsig.add_generator(p_in);
  std::vector<Generator> block_gens;
  for (size_t i = 0; i < real.size(); ++i) {
    Generator bg{gen + "__b" + std::to_string(i), {mid_in[i]}, {mid_out[i]}, StructuralKind::Opaque};
    tsig.add_generator(bg);
    block_gens.push_back(bg);
  }
  if (dead_wire) tsig.add_generator(make_discard(*dead_wire));
  std::optional<Generator> zero_gen;
  if (zero_wire) {
    zero_gen = Generator{gen + "__z", {}, {*zero_wire}, StructuralKind::Opaque};
    tsig.add_generator(*zero_gen);
  }
  tsig.add_generator(p_out);
  tsig.sort();

  repl.signature = tsig;
  // Node layout: p_in, blocks..., optional discard, optional zero, p_out.
  int p_in_node = 0;
  repl.nodes.push_back({p_in.name});
  std::vector<int> block_nodes;
  for (const auto& bg : block_gens) {
    block_nodes.push_back(static_cast<int>(repl.nodes.size()));
    repl.nodes.push_back({bg.name});
  }
  int discard_node = -1;
  if (dead_wire) {
    discard_node = static_cast<int>(repl.nodes.size());
    repl.nodes.push_back({make_discard(*dead_wire).name});
  }
  int zero_node = -1;
  if (zero_gen) {
    zero_node = static_cast<int>(repl.nodes.size());
    repl.nodes.push_back({zero_gen->name});
  }
  int p_out_node = static_cast<int>(repl.nodes.size());
  repl.nodes.push_back({p_out.name});

  for (size_t j = 0; j < g.dom.size(); ++j) {
    repl.input_types.push_back(g.dom[j].name);
    repl.edges.push_back({Port::boundary_in(static_cast<int>(j)),
                          Port::node_in(p_in_node, static_cast<int>(j))});
  }
  for (size_t i = 0; i < block_nodes.size(); ++i) {
    repl.edges.push_back({Port::node_out(p_in_node, static_cast<int>(i)),
                          Port::node_in(block_nodes[i], 0)});
    repl.edges.push_back({Port::node_out(block_nodes[i], 0),
                          Port::node_in(p_out_node, static_cast<int>(i))});
  }
  if (discard_node >= 0) {
    repl.edges.push_back({Port::node_out(p_in_node, static_cast<int>(block_nodes.size())),
                          Port::node_in(discard_node, 0)});
  }
  if (zero_node >= 0) {
    repl.edges.push_back({Port::node_out(zero_node, 0),
                          Port::node_in(p_out_node, static_cast<int>(block_nodes.size()))});
  }
  for (size_t k = 0; k < g.cod.size(); ++k) {
    repl.output_types.push_back(g.cod[k].name);
    repl.edges.push_back({Port::node_out(p_out_node, static_cast<int>(k)),
                          Port::boundary_out(static_cast<int>(k))});
  }

  r.new_boxes[p_in.name] =
      SemanticBox::permutation(object_image(g.dom), object_image(p_in.cod), gather);
  for (size_t i = 0; i < real.size(); ++i) {
    std::vector<double> bw;
    bw.reserve(real[i].rows.size() * real[i].cols.size());
    for (int rr : real[i].rows) {
      for (int cc : real[i].cols) bw.push_back(box->weight_at(rr, cc));
    }
    r.new_boxes[block_gens[i].name] =
        SemanticBox::linear(object_image(block_gens[i].dom), object_image(block_gens[i].cod), bw);
  }
  if (zero_gen) {
    r.new_boxes[zero_gen->name] =
        SemanticBox::linear(ObjectSpec{}, object_image(zero_gen->cod), std::vector<double>{});
  }
  r.new_boxes[p_out.name] =
      SemanticBox::permutation(object_image(p_out.dom), object_image(g.cod), scatter);

  r.target_signature = tsig;
  r.generator_map[gen] = repl;

  Model probe;
  probe.diagram = repl;
  for (const auto& [name, b] : r.new_boxes) probe.rep.boxes[name] = b;
  double measured = distortion(SemanticMap::of_box(*box),
                               SemanticMap::of_model(probe.rep, probe.diagram), metric);
  if (measured > eps_local) return identity_refinement();
  r.per_box_distortion[gen] = measured;
  return r;
}

// ---------------------------------------------------------------------------
// sparsify

Refinement pass_sparsify(const Model& m, const std::string& gen, double tau,
                         const MetricSpec& metric) {
  const SemanticBox* box = m.rep.find(gen);
  require_domain(box != nullptr && (box->variant == SemanticBox::Variant::Linear ||
                                    box->variant == SemanticBox::Variant::Bias),
                 "sparsify applies to linear and bias boxes");
  SemanticBox zeroed = *box;
  std::vector<double>& entries =
      zeroed.variant == SemanticBox::Variant::Linear ? zeroed.weights : zeroed.offsets;
  int count = 0;
  for (double& w : entries) {
    if (w != 0.0 && std::abs(w) <= tau) {
      w = 0.0;
      ++count;
    }
  }
  if (count == 0) return identity_refinement();

  Refinement r;
  r.pass = "sparsify";
  r.target = gen;
  r.params = "tau=" + format_double(tau) + ";zeroed=" + std::to_string(count);
  r.metric = metric;
  r.new_boxes[gen] = zeroed;
  r.per_box_distortion[gen] = distortion(*box, zeroed, metric);
  return r;
}

// ---------------------------------------------------------------------------
// fuse / unfuse

namespace {

std::set<int> node_successors(const Diagram& d, int v) {
  std::set<int> out;
  for (const auto& e : d.edges) {
    if (e.src.loc == Port::Loc::NodeOut && e.src.node == v && e.dst.loc == Port::Loc::NodeIn) {
      out.insert(e.dst.node);
    }
  }
  return out;
}

std::set<int> reachable_from(const Diagram& d, const std::set<int>& start) {
  std::set<int> seen = start;
  std::vector<int> stack(start.begin(), start.end());
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int w : node_successors(d, v)) {
      if (seen.insert(w).second) stack.push_back(w);
    }
  }
  return seen;
}

}  // namespace

Refinement pass_fuse(const Model& m, const std::vector<int>& region_nodes) {
  const Diagram& d = m.diagram;
  require_domain(!region_nodes.empty(), "fuse region must be nonempty");
  std::set<int> region(region_nodes.begin(), region_nodes.end());
  for (int v : region) {
    require_domain(v >= 0 && v < static_cast<int>(d.nodes.size()), "fuse region node out of range");
  }

  // Convexity: nothing outside the region lies on a path between two region
  // nodes.
  std::set<int> downstream = reachable_from(d, region);
  for (int x = 0; x < static_cast<int>(d.nodes.size()); ++x) {
    if (region.count(x) || !downstream.count(x)) continue;
    std::set<int> from_x = reachable_from(d, {x});
    for (int v : region) {
      require_domain(!from_x.count(v), "non-convex region");
    }
  }

  // Connectivity over the undirected node graph restricted to the region.
  if (region.size() > 1) {
    std::set<int> seen{*region.begin()};
    std::vector<int> stack{*region.begin()};
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (const auto& e : d.edges) {
        if (e.src.loc != Port::Loc::NodeOut || e.dst.loc != Port::Loc::NodeIn) continue;
        int a = e.src.node, b = e.dst.node;
        if (a == v && region.count(b) && seen.insert(b).second) stack.push_back(b);
        if (b == v && region.count(a) && seen.insert(a).second) stack.push_back(a);
      }
    }
    require_domain(seen.size() == region.size(), "non-convex region: region is disconnected");
  }

  // Region boundary in deterministic order.
  std::vector<Edge> in_edges, out_edges, internal;
  for (const auto& e : d.edges) {
    bool src_in = e.src.loc == Port::Loc::NodeOut && region.count(e.src.node);
    bool dst_in = e.dst.loc == Port::Loc::NodeIn && region.count(e.dst.node);
    if (src_in && dst_in) {
      internal.push_back(e);
    } else if (dst_in) {
      in_edges.push_back(e);
    } else if (src_in) {
      out_edges.push_back(e);
    }
  }
  std::sort(in_edges.begin(), in_edges.end(),
            [](const Edge& a, const Edge& b) { return a.dst < b.dst; });
  std::sort(out_edges.begin(), out_edges.end(),
            [](const Edge& a, const Edge& b) { return a.src < b.src; });

  // Region as a standalone diagram.
  std::vector<int> region_order(region.begin(), region.end());
  std::map<int, int> local;
  for (size_t i = 0; i < region_order.size(); ++i) local[region_order[i]] = static_cast<int>(i);
  Diagram sub;
  sub.signature = d.signature;
  for (int v : region_order) sub.nodes.push_back(d.nodes[v]);
  auto localize = [&](Port p) {
    p.node = local.at(p.node);
    return p;
  };
  std::vector<WireType> dom_types, cod_types;
  for (size_t k = 0; k < in_edges.size(); ++k) {
    const Generator& g = d.node_gen(in_edges[k].dst.node);
    const WireType& t = g.dom[in_edges[k].dst.index];
    dom_types.push_back(t);
    sub.input_types.push_back(t.name);
    sub.edges.push_back({Port::boundary_in(static_cast<int>(k)), localize(in_edges[k].dst)});
  }
  for (size_t k = 0; k < out_edges.size(); ++k) {
    const Generator& g = d.node_gen(out_edges[k].src.node);
    const WireType& t = g.cod[out_edges[k].src.index];
    cod_types.push_back(t);
    sub.output_types.push_back(t.name);
    sub.edges.push_back({localize(out_edges[k].src), Port::boundary_out(static_cast<int>(k))});
  }
  for (const auto& e : internal) sub.edges.push_back({localize(e.src), localize(e.dst)});
  sub = normalized(Model{sub, m.rep}).diagram;  // prune + canonical order

  // Fused semantics.
  std::string fused_name = "fused__";
  for (size_t i = 0; i < region_order.size(); ++i) {
    if (i) fused_name += "_";
    fused_name += std::to_string(region_order[i]);
  }
  require_domain(d.signature.find_generator(fused_name) == nullptr,
                 "fused generator name '" + fused_name + "' already exists");

  SemanticBox fused_box;
  if (region_order.size() == 1 && !d.node_gen(region_order[0]).is_structural() &&
      m.rep.box_for(d.node_gen(region_order[0])).variant != SemanticBox::Variant::Structural) {
    fused_box = m.rep.box_for(d.node_gen(region_order[0]));
  } else {
    ObjectSpec dom_spec = object_image(dom_types);
    ObjectSpec cod_spec = object_image(cod_types);
    SemanticMap sem = SemanticMap::of_model(m.rep, sub);
    if (all_finite(dom_spec) && all_finite(cod_spec)) {
      uint64_t dom_size = finite_domain_size(dom_spec);
      uint64_t cod_size = finite_domain_size(cod_spec);
      require_domain(dom_size <= 65536, "fuse region domain too large to tabulate");
      std::vector<int> table;
      table.reserve(dom_size);
      for (uint64_t idx = 0; idx < dom_size; ++idx) {
        // Decode idx into a tuple, evaluate, re-encode.
        Tuple x(dom_spec.size());
        uint64_t rem = idx;
        for (size_t i = dom_spec.size(); i-- > 0;) {
          uint64_t radix = static_cast<uint64_t>(dom_spec[i].radix());
          x[i] = Value::symbol(static_cast<int>(rem % radix));
          rem /= radix;
        }
        Tuple y = sem.apply(x);
        uint64_t out_idx = 0;
        for (size_t i = 0; i < cod_spec.size(); ++i) {
          out_idx = out_idx * static_cast<uint64_t>(cod_spec[i].radix()) +
                    static_cast<uint64_t>(y[i].sym);
        }
        require_domain(out_idx < cod_size, "fused table entry out of range");
        table.push_back(static_cast<int>(out_idx));
      }
      fused_box = SemanticBox::finite_table(dom_spec, cod_spec, std::move(table));
    } else if (all_vector(dom_spec) && all_vector(cod_spec)) {
      for (int v : region_order) {
        require_domain(linear_like(m.rep.box_for(d.node_gen(v))),
                       "fuse on the real backend requires a linear region");
      }
      int in_dim = total_dim(dom_spec);
      int out_dim = total_dim(cod_spec);
      std::vector<double> w(static_cast<size_t>(out_dim) * in_dim, 0.0);
      for (int j = 0; j < in_dim; ++j) {
        Tuple x;
        int pos = 0;
        for (const auto& s : dom_spec) {
          std::vector<double> v(static_cast<size_t>(s.dim), 0.0);
          for (int i = 0; i < s.dim; ++i) {
            if (pos == j) v[i] = 1.0;
            ++pos;
          }
          x.push_back(Value::vector(std::move(v)));
        }
        Tuple y = sem.apply(x);
        int row = 0;
        for (const auto& val : y) {
          for (double e : val.vec) {
            w[static_cast<size_t>(row) * in_dim + j] = e;
            ++row;
          }
        }
      }
      fused_box = SemanticBox::linear(dom_spec, cod_spec, std::move(w));
    } else {
      fail_domain("fuse region mixes finite and vector boundary wires");
    }
  }

  // Rewritten model: region nodes collapse into one fresh node.
  Diagram nd;
  nd.signature = d.signature;
  Generator fused_gen{fused_name, dom_types, cod_types, StructuralKind::Opaque};
  nd.signature.add_generator(fused_gen);
  nd.input_types = d.input_types;
  nd.output_types = d.output_types;
  std::map<int, int> keep;
  for (int v = 0; v < static_cast<int>(d.nodes.size()); ++v) {
    if (region.count(v)) continue;
    keep[v] = static_cast<int>(nd.nodes.size());
    nd.nodes.push_back(d.nodes[v]);
  }
  int fused_node = static_cast<int>(nd.nodes.size());
  nd.nodes.push_back({fused_name});
  auto remap_outside = [&](Port p) {
    if (p.loc == Port::Loc::NodeIn || p.loc == Port::Loc::NodeOut) p.node = keep.at(p.node);
    return p;
  };
  for (const auto& e : d.edges) {
    bool src_in = e.src.loc == Port::Loc::NodeOut && region.count(e.src.node);
    bool dst_in = e.dst.loc == Port::Loc::NodeIn && region.count(e.dst.node);
    if (src_in && dst_in) continue;
    if (!src_in && !dst_in) {
      nd.edges.push_back({remap_outside(e.src), remap_outside(e.dst)});
    }
  }
  for (size_t k = 0; k < in_edges.size(); ++k) {
    nd.edges.push_back({remap_outside(in_edges[k].src), Port::node_in(fused_node, static_cast<int>(k))});
  }
  for (size_t k = 0; k < out_edges.size(); ++k) {
    nd.edges.push_back({Port::node_out(fused_node, static_cast<int>(k)), remap_outside(out_edges[k].dst)});
  }

  Refinement r;
  r.pass = "fuse";
  r.target = fused_name;
  r.kind = Refinement::Kind::WholeDiagram;
  r.params = "nodes=" + std::to_string(region_order.size());
  Model replacement;
  replacement.diagram = nd;
  replacement.rep.boxes = m.rep.boxes;
  replacement.rep.boxes[fused_name] = fused_box;
  r.replacement = normalized(replacement);

  Refinement::FuseProvenance prov;
  prov.region = sub;
  for (const auto& g : signature_of(sub).generators) {
    if (const SemanticBox* b = m.rep.find(g.name)) prov.region_boxes[g.name] = *b;
  }
  prov.fused_generator = fused_name;
  r.fuse = prov;
  return r;
}

Model unfuse(const Model& m, const Refinement& fuse_refinement) {
  require_domain(fuse_refinement.fuse.has_value(), "refinement carries no fuse provenance");
  const auto& prov = *fuse_refinement.fuse;
  require_domain(m.diagram.signature.find_generator(prov.fused_generator) != nullptr,
                 "model does not use the fused generator '" + prov.fused_generator + "'");
  Refinement inverse;
  inverse.pass = "unfuse";
  inverse.target = prov.fused_generator;
  inverse.metric = fuse_refinement.metric;
  inverse.target_signature = signature_of(prov.region);
  inverse.generator_map[prov.fused_generator] = prov.region;
  inverse.new_boxes = prov.region_boxes;
  return apply_refinement(inverse, m);
}

// ---------------------------------------------------------------------------
// rewire simplify

namespace {

struct RewireState {
  Diagram d;

  void erase_nodes(const std::set<int>& victims) {
    std::vector<int> remap(d.nodes.size(), -1);
    int next = 0;
    for (int v = 0; v < static_cast<int>(d.nodes.size()); ++v) {
      if (!victims.count(v)) remap[v] = next++;
    }
    std::vector<DiagramNode> nodes;
    for (int v = 0; v < static_cast<int>(d.nodes.size()); ++v) {
      if (remap[v] >= 0) nodes.push_back(d.nodes[v]);
    }
    d.nodes = std::move(nodes);
    for (auto& e : d.edges) {
      if (e.src.loc == Port::Loc::NodeOut) e.src.node = remap[e.src.node];
      if (e.dst.loc == Port::Loc::NodeIn) e.dst.node = remap[e.dst.node];
    }
  }

  void drop_edges_touching(const std::set<int>& victims) {
    std::vector<Edge> kept;
    for (const auto& e : d.edges) {
      bool src_hit = e.src.loc == Port::Loc::NodeOut && victims.count(e.src.node);
      bool dst_hit = e.dst.loc == Port::Loc::NodeIn && victims.count(e.dst.node);
      if (!src_hit && !dst_hit) kept.push_back(e);
    }
    d.edges = std::move(kept);
  }
};

}  // namespace

Refinement pass_rewire_simplify(const Model& m) {
  RewireState st{m.diagram};
  bool changed_any = false;

  auto kind_of = [&](int v) { return st.d.node_gen(v).kind; };

  bool progress = true;
  while (progress) {
    progress = false;
    std::map<Port, Port> src_of = source_of_map(st.d);
    std::map<Port, Port> dst_of = target_of_map(st.d);

    // Identity-box elimination.
    for (int v = 0; v < static_cast<int>(st.d.nodes.size()) && !progress; ++v) {
      if (kind_of(v) != StructuralKind::Identity) continue;
      Port src = src_of.at(Port::node_in(v, 0));
      Port dst = dst_of.at(Port::node_out(v, 0));
      std::set<int> victims{v};
      st.drop_edges_touching(victims);
      st.d.edges.push_back({src, dst});
      st.erase_nodes(victims);
      progress = changed_any = true;
    }
    if (progress) continue;

    // Copy-then-discard collapses to a plain wire.
    for (int v = 0; v < static_cast<int>(st.d.nodes.size()) && !progress; ++v) {
      if (kind_of(v) != StructuralKind::Copy) continue;
      for (int k = 0; k < 2 && !progress; ++k) {
        Port dst = dst_of.at(Port::node_out(v, k));
        if (dst.loc != Port::Loc::NodeIn || kind_of(dst.node) != StructuralKind::Discard) continue;
        Port src = src_of.at(Port::node_in(v, 0));
        Port other = dst_of.at(Port::node_out(v, 1 - k));
        std::set<int> victims{v, dst.node};
        st.drop_edges_touching(victims);
        st.d.edges.push_back({src, other});
        st.erase_nodes(victims);
        progress = changed_any = true;
      }
    }
    if (progress) continue;

    // Dead-box elimination: every output is discarded, so the box and its
    // discards go; freshly dangling producers get their own discards.
    for (int v = 0; v < static_cast<int>(st.d.nodes.size()) && !progress; ++v) {
      const Generator& g = st.d.node_gen(v);
      if (g.cod.empty()) continue;
      bool all_discarded = true;
      std::set<int> victims{v};
      for (size_t k = 0; k < g.cod.size() && all_discarded; ++k) {
        Port dst = dst_of.at(Port::node_out(v, static_cast<int>(k)));
        if (dst.loc == Port::Loc::NodeIn && kind_of(dst.node) == StructuralKind::Discard) {
          victims.insert(dst.node);
        } else {
          all_discarded = false;
        }
      }
      if (!all_discarded) continue;
      std::vector<std::pair<Port, WireType>> dangling;
      for (size_t j = 0; j < g.dom.size(); ++j) {
        dangling.emplace_back(src_of.at(Port::node_in(v, static_cast<int>(j))), g.dom[j]);
      }
      st.drop_edges_touching(victims);
      st.erase_nodes(victims);
      for (const auto& [src, type] : dangling) {
        Generator disc = make_discard(type);
        st.d.signature.add_generator(disc);
        Port fixed = src;
        // erase_nodes already remapped edges, but `src` was captured before;
        // recompute its node id by matching the producer among current edges.
        if (fixed.loc == Port::Loc::NodeOut) {
          // Producers above the erased block shift down by the number of
          // erased ids below them.
          int shift = 0;
          for (int victim : victims) {
            if (victim < fixed.node) ++shift;
          }
          fixed.node -= shift;
        }
        int nv = static_cast<int>(st.d.nodes.size());
        st.d.nodes.push_back({disc.name});
        st.d.edges.push_back({fixed, Port::node_in(nv, 0)});
      }
      progress = changed_any = true;
    }
  }

  if (!changed_any) {
    Refinement r = identity_refinement();
    r.pass = "rewire_simplify";
    return r;
  }
  Refinement r;
  r.pass = "rewire_simplify";
  r.target = "*";
  r.kind = Refinement::Kind::WholeDiagram;
  r.replacement = normalized(Model{st.d, m.rep});
  return r;
}

// ---------------------------------------------------------------------------
// global refit

Refinement pass_global_refit(const Model& m, const std::vector<std::string>& targets,
                             const SampleDistribution& dist, const Model* original_model) {
  if (targets.empty()) return identity_refinement();

  std::vector<std::string> ordered = targets;
  std::sort(ordered.begin(), ordered.end());
  ordered.erase(std::unique(ordered.begin(), ordered.end()), ordered.end());

  const Diagram& d = m.diagram;
  const Model& reference = original_model ? *original_model : m;
  require_domain(object_image(reference.diagram.signature, reference.diagram.input_types) ==
                         object_image(d.signature, d.input_types) &&
                     object_image(reference.diagram.signature, reference.diagram.output_types) ==
                         object_image(d.signature, d.output_types),
                 "refit reference must share the model's boundary");
  ObjectSpec domD = object_image(d.signature, d.input_types);
  std::vector<Tuple> samples = dist.draw(domD);
  require_domain(!samples.empty(), "refit needs at least one sample");

  // Reference behaviour, flattened per sample.
  SemanticMap original = SemanticMap::of_model(reference.rep, reference.diagram);
  auto flatten_out = [](const Tuple& t) {
    std::vector<double> out;
    for (const auto& v : t) {
      require_domain(!v.finite, "refit requires vector outputs");
      out.insert(out.end(), v.vec.begin(), v.vec.end());
    }
    return out;
  };
  std::vector<std::vector<double>> y_orig;
  y_orig.reserve(samples.size());
  for (const auto& x : samples) y_orig.push_back(flatten_out(original.apply(x)));
  size_t out_dim = y_orig.empty() ? 0 : y_orig[0].size();

  Model work = m;
  bool rank_deficient = false;

  for (const std::string& gen : ordered) {
    const SemanticBox* box = work.rep.find(gen);
    require_domain(box != nullptr && box->variant == SemanticBox::Variant::Linear,
                   "refit target '" + gen + "' must be a linear box");
    int node = first_node_using(d, gen);
    require_domain(node >= 0, "refit target '" + gen + "' is unused");
    int uses = 0;
    for (const auto& n : d.nodes) {
      if (n.gen == gen) ++uses;
    }
    require_domain(uses == 1, "refit target '" + gen + "' must be used exactly once");
    for (int w : reachable_from(d, {node})) {
      if (w == node) continue;
      require_domain(linear_like(work.rep.box_for(d.node_gen(w))),
                     "refit requires a linear path downstream of '" + gen + "'");
    }

    std::vector<size_t> free_entries;
    for (size_t i = 0; i < box->weights.size(); ++i) {
      if (box->weights[i] != 0.0) free_entries.push_back(i);
    }
    if (free_entries.empty()) continue;

    // Base response with the target zeroed, then one column per free entry.
    Model probe = work;
    SemanticBox zero_box = *box;
    std::fill(zero_box.weights.begin(), zero_box.weights.end(), 0.0);
    probe.rep.boxes[gen] = zero_box;
    SemanticMap base = SemanticMap::of_model(probe.rep, d);
    std::vector<std::vector<double>> y_base;
    y_base.reserve(samples.size());
    for (const auto& x : samples) y_base.push_back(flatten_out(base.apply(x)));

    Eigen::MatrixXd a(static_cast<long>(samples.size() * out_dim),
                      static_cast<long>(free_entries.size()));
    Eigen::VectorXd b(static_cast<long>(samples.size() * out_dim));
    for (size_t col = 0; col < free_entries.size(); ++col) {
      SemanticBox unit_box = zero_box;
      unit_box.weights[free_entries[col]] = 1.0;
      probe.rep.boxes[gen] = unit_box;
      SemanticMap unit = SemanticMap::of_model(probe.rep, d);
      for (size_t s = 0; s < samples.size(); ++s) {
        std::vector<double> yu = flatten_out(unit.apply(samples[s]));
        for (size_t k = 0; k < out_dim; ++k) {
          a(static_cast<long>(s * out_dim + k), static_cast<long>(col)) = yu[k] - y_base[s][k];
        }
      }
    }
    for (size_t s = 0; s < samples.size(); ++s) {
      for (size_t k = 0; k < out_dim; ++k) {
        b(static_cast<long>(s * out_dim + k)) = y_orig[s][k] - y_base[s][k];
      }
    }

    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> solver(a);
    if (solver.rank() < static_cast<long>(free_entries.size())) rank_deficient = true;
    Eigen::VectorXd theta = solver.solve(b);

    SemanticBox fitted = *box;
    for (size_t col = 0; col < free_entries.size(); ++col) {
      fitted.weights[free_entries[col]] = theta(static_cast<long>(col));
    }
    work.rep.boxes[gen] = fitted;
  }

  Refinement r;
  r.pass = "global_refit";
  r.target = ordered.size() == 1 ? ordered[0] : "*";
  r.params = "targets=" + std::to_string(ordered.size()) +
             (rank_deficient ? ";underdetermined=min-norm" : "");
  MetricSpec metric = MetricSpec::l2(dist.seed, dist.count);
  metric.distribution = dist;
  r.metric = metric;
  for (const std::string& gen : ordered) {
    const SemanticBox& fitted = work.rep.boxes.at(gen);
    if (!(fitted == *m.rep.find(gen))) {
      r.new_boxes[gen] = fitted;
      r.per_box_distortion[gen] = distortion(*m.rep.find(gen), fitted, metric);
    }
  }
  if (r.new_boxes.empty()) return identity_refinement();
  return r;
}

// ---------------------------------------------------------------------------
// search

std::string trace_to_text(const RefinementTrace& trace) {
  std::ostringstream out;
  for (const auto& step : trace.steps) {
    out << "pass=" << step.pass << " target=" << step.target
        << " delta_rep_bits=" << step.delta_rep_bits
        << " distortion=" << format_double(step.distortion) << "\n";
  }
  return out.str();
}

std::pair<Model, RefinementTrace> search_compressive(const Model& m, const SearchConfig& config,
                                                     const PostHocInterpretation* ic,
                                                     const InterpretationCostOracle* oracle) {
  config.validate();
  config.scheme.validate();
  require_domain((ic == nullptr) == (oracle == nullptr),
                 "search takes a grounding and its oracle together or not at all");
  Model original = normalized(m);
  {
    FunctorialReport fr = check_functorial(original.rep, original.diagram);
    require_domain(fr.ok(), "search requires a functorial model");
  }

  Model current = original;
  uint64_t current_rep = rep_complexity(current, config.scheme);
  RefinementTrace trace;

  struct Candidate {
    int64_t delta;
    int node_index;
    std::string pass;
    std::string target;
    Model cand;
    double dist;
  };

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    std::vector<Candidate> candidates;

    auto consider = [&](const Refinement& r, int node_index) {
      if (r.identity) return;
      Model cand = apply_refinement(r, current);
      uint64_t cand_rep = rep_complexity(cand, config.scheme);
      if (cand_rep >= current_rep) return;
      double dist = behavioural_distortion(original, cand, config.metric);
      if (dist > config.eps_global) return;
      candidates.push_back({static_cast<int64_t>(cand_rep) - static_cast<int64_t>(current_rep),
                            node_index, r.pass, r.target, std::move(cand), dist});
    };

    consider(pass_rewire_simplify(current), -1);

    // Generators ordered by first canonical node use.
    std::vector<std::pair<int, std::string>> targets;
    for (const auto& g : signature_of(current.diagram).generators) {
      if (g.is_structural()) continue;
      const SemanticBox* box = current.rep.find(g.name);
      if (!box) continue;
      targets.emplace_back(first_node_using(current.diagram, g.name), g.name);
    }
    std::sort(targets.begin(), targets.end());

    for (const auto& [node_index, gen] : targets) {
      const SemanticBox& box = *current.rep.find(gen);
      if (box.variant == SemanticBox::Variant::Linear ||
          box.variant == SemanticBox::Variant::Bias) {
        consider(pass_sparsify(current, gen, config.tau, config.metric), node_index);
      }
      // States (cols == 0) and effects (rows == 0) have no matrix to factor.
      if (box.variant == SemanticBox::Variant::Linear && box.rows >= 1 && box.cols >= 1) {
        consider(pass_block_diagonalize(current, gen, config.tau_b, config.eps_local,
                                        config.metric),
                 node_index);
        consider(pass_svd_split(current, gen, config.eps_local, config.metric), node_index);
      }
    }

    if (candidates.empty()) break;
    auto best = std::min_element(
        candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
          return std::tie(a.delta, a.node_index, a.pass, a.target) <
                 std::tie(b.delta, b.node_index, b.pass, b.target);
        });
    current = std::move(best->cand);
    current_rep = static_cast<uint64_t>(static_cast<int64_t>(current_rep) + best->delta);
    trace.steps.push_back({best->pass, best->target, best->delta, best->dist});
  }

  SyntacticInterpretation is_;
  PostHocInterpretation empty_ic;
  const PostHocInterpretation& final_ic = ic ? *ic : empty_ic;
  InterpretationCostOracle default_oracle;
  const InterpretationCostOracle& final_oracle = oracle ? *oracle : default_oracle;
  is_ = induce_syntactic(final_ic, current.rep, signature_of(current.diagram), config.scheme);
  trace.final_report = total_cost(current, is_, final_ic, config.scheme, final_oracle);
  return {current, trace};
}

ParsimonyReport check_parsimony(const Model& before, const Model& after,
                                const PostHocInterpretation& ic,
                                const InterpretationCostOracle& oracle,
                                const CodingScheme& scheme) {
  ParsimonyReport report;
  uint64_t rep_b = rep_complexity(before, scheme);
  uint64_t rep_a = rep_complexity(after, scheme);
  uint64_t int_b = int_complexity(before, ic, oracle, scheme);
  uint64_t int_a = int_complexity(after, ic, oracle, scheme);
  report.lhs = static_cast<int64_t>(rep_b) - static_cast<int64_t>(rep_a);
  report.rhs = static_cast<int64_t>(int_a) - static_cast<int64_t>(int_b);
  report.total_before = rep_b + int_b;
  report.total_after = rep_a + int_a;
  report.verdict = report.total_after <= report.total_before;
  report.criterion_holds = report.lhs >= report.rhs;
  require_domain(report.verdict == report.criterion_holds,
                 "parsimony verdict disagrees with the criterion");
  return report;
}

ComonotonicReport check_comonotonic(const std::vector<CompressivePair>& corpus,
                                    const CodingScheme& scheme,
                                    const InterpretationCostOracle& oracle) {
  ComonotonicReport report;
  for (size_t i = 0; i < corpus.size(); ++i) {
    const auto& pair = corpus[i];
    uint64_t rep_b = rep_complexity(pair.before, scheme);
    uint64_t rep_a = rep_complexity(pair.after, scheme);
    require_domain(rep_a <= rep_b, "non-compressive pair in corpus at index " + std::to_string(i));
    uint64_t int_b = int_complexity(pair.before, pair.ic, oracle, scheme);
    uint64_t int_a = int_complexity(pair.after, pair.ic, oracle, scheme);
    if (int_b < int_a) {
      report.counterexamples.push_back({i, int_b, int_a});
    }
    if (rep_a + int_a > rep_b + int_b) report.all_totals_non_increasing = false;
  }
  return report;
}

}  // namespace cmod
