#include "cmod/zoo.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace cmod {

namespace {

double grid(const CodingScheme& scheme, double v) { return scheme.dequantize(scheme.quantize(v)); }

std::string fmt_hex(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

std::string fmt_g17(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// --- fig 1 -----------------------------------------------------------------

const std::vector<double> kAnimalBlock{0.5, -0.25, 0.75, 1.0};
const std::vector<double> kColourBlock{1.25, 0.5, -0.5, 0.75};
const std::vector<int> kFigGather{0, 2, 1, 3};
const std::vector<int> kFigScatter{0, 2, 1, 3};

std::vector<double> fig1_matrix() {
  // W = scatter o (B_animal (+) B_colour) o gather on coordinates
  // [a0, c0, a1, c1].
  std::vector<double> w(16, 0.0);
  auto at = [&](int r, int c) -> double& { return w[static_cast<size_t>(r) * 4 + c]; };
  at(0, 0) = kAnimalBlock[0];
  at(0, 2) = kAnimalBlock[1];
  at(2, 0) = kAnimalBlock[2];
  at(2, 2) = kAnimalBlock[3];
  at(1, 1) = kColourBlock[0];
  at(1, 3) = kColourBlock[1];
  at(3, 1) = kColourBlock[2];
  at(3, 3) = kColourBlock[3];
  return w;
}

}  // namespace

Bundle build_fig1() {
  Bundle bundle;
  CodingScheme scheme;

  WireType feat = WireType::vector("feat4", 4);
  Signature sig;
  sig.add_object(feat);
  sig.add_generator({"mix", {feat}, {feat}, StructuralKind::Opaque});
  sig.sort();

  Model m;
  m.diagram = single_node_diagram(sig, "mix");
  ObjectSpec v4 = object_image({feat});
  m.rep.boxes["mix"] = SemanticBox::linear(v4, v4, fig1_matrix());
  bundle.model = normalized(m);

  bundle.vocabulary.add("animal-mechanism");
  bundle.vocabulary.add("colour-mechanism");
  bundle.vocabulary.add("entangled-mix");

  ObjectSpec v2 = {WireSpec::of(WireType::vector("pair", 2))};
  SemanticBox animal = SemanticBox::linear(v2, v2, kAnimalBlock);
  SemanticBox colour = SemanticBox::linear(v2, v2, kColourBlock);
  bundle.posthoc.assign(bundle.model.rep.boxes.at("mix"), scheme, "entangled-mix");
  bundle.posthoc.assign(animal, scheme, "animal-mechanism");
  bundle.posthoc.assign(colour, scheme, "colour-mechanism");
  bundle.reconstruction.by_label["entangled-mix"] = bundle.model.rep.boxes.at("mix");
  bundle.reconstruction.by_label["animal-mechanism"] = animal;
  bundle.reconstruction.by_label["colour-mechanism"] = colour;
  bundle.syntactic =
      induce_syntactic(bundle.posthoc, bundle.model.rep, bundle.model.diagram.signature, scheme);

  // The fig-1 story prices the monolithic box densely: block discovery is
  // the coder's job, not the presence flags'.
  bundle.config.presence_flags = false;
  return bundle;
}

Model fig1_refined_model() {
  WireType feat = WireType::vector("feat4", 4);
  WireType w0 = WireType::vector("mix__w0", 2);
  WireType w1 = WireType::vector("mix__w1", 2);
  WireType y0 = WireType::vector("mix__y0", 2);
  WireType y1 = WireType::vector("mix__y1", 2);

  Signature sig;
  sig.add_object(feat);
  Generator p_in{"mix__p_in", {feat}, {w0, w1}, StructuralKind::Opaque};
  Generator b0{"mix__b0", {w0}, {y0}, StructuralKind::Opaque};
  Generator b1{"mix__b1", {w1}, {y1}, StructuralKind::Opaque};
  Generator p_out{"mix__p_out", {y0, y1}, {feat}, StructuralKind::Opaque};
  sig.add_generator(p_in);
  sig.add_generator(b0);
  sig.add_generator(b1);
  sig.add_generator(p_out);
  sig.sort();

  Diagram d;
  d.signature = sig;
  d.input_types = {"feat4"};
  d.output_types = {"feat4"};
  d.nodes = {{"mix__p_in"}, {"mix__b0"}, {"mix__b1"}, {"mix__p_out"}};
  d.edges = {
      {Port::boundary_in(0), Port::node_in(0, 0)},  {Port::node_out(0, 0), Port::node_in(1, 0)},
      {Port::node_out(0, 1), Port::node_in(2, 0)},  {Port::node_out(1, 0), Port::node_in(3, 0)},
      {Port::node_out(2, 0), Port::node_in(3, 1)},  {Port::node_out(3, 0), Port::boundary_out(0)},
  };

  Model m;
  m.diagram = d;
  m.rep.boxes["mix__p_in"] =
      SemanticBox::permutation(object_image(p_in.dom), object_image(p_in.cod), kFigGather);
  m.rep.boxes["mix__b0"] =
      SemanticBox::linear(object_image(b0.dom), object_image(b0.cod), kAnimalBlock);
  m.rep.boxes["mix__b1"] =
      SemanticBox::linear(object_image(b1.dom), object_image(b1.cod), kColourBlock);
  m.rep.boxes["mix__p_out"] =
      SemanticBox::permutation(object_image(p_out.dom), object_image(p_out.cod), kFigScatter);
  return normalized(m);
}

// --- synthetic generators ---------------------------------------------------

RankDeficientModel build_rank_deficient(int n, int r, uint64_t seed) {
  require_domain(1 <= r && r < n, "rank deficient model needs 1 <= r < n");
  require_domain(r * 2 * n < n * n, "rank deficient model needs r*2n < n^2");
  CodingScheme scheme;
  Rng rng(seed);
  std::vector<double> u(static_cast<size_t>(n) * r);
  std::vector<double> v(static_cast<size_t>(r) * n);
  for (double& x : u) x = grid(scheme, rng.uniform(-0.4, 0.4));
  for (double& x : v) x = grid(scheme, rng.uniform(-0.4, 0.4));
  std::vector<double> w(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int k = 0; k < r; ++k) acc += u[static_cast<size_t>(i) * r + k] * v[static_cast<size_t>(k) * n + j];
      w[static_cast<size_t>(i) * n + j] = acc;
    }
  }

  WireType vec = WireType::vector("vec" + std::to_string(n), n);
  Signature sig;
  sig.add_object(vec);
  sig.add_generator({"low", {vec}, {vec}, StructuralKind::Opaque});
  sig.sort();
  Model m;
  m.diagram = single_node_diagram(sig, "low");
  ObjectSpec spec = object_image({vec});
  m.rep.boxes["low"] = SemanticBox::linear(spec, spec, std::move(w));
  return {normalized(m), r};
}

SparseEntangledModel build_sparse_entangled(const std::vector<int>& block_sizes, double noise,
                                            uint64_t seed) {
  require_domain(noise >= 0.0, "noise must be nonnegative");
  require_domain(block_sizes.size() >= 2, "need at least two blocks to entangle");
  int n = 0;
  for (int s : block_sizes) {
    require_domain(s >= 1, "block sizes must be positive");
    n += s;
  }

  CodingScheme scheme;
  Rng rng(seed);

  // Random row/column placements of the block-diagonal structure.
  std::vector<int> row_perm(n), col_perm(n);
  for (int i = 0; i < n; ++i) row_perm[i] = col_perm[i] = i;
  for (int i = n - 1; i > 0; --i) {
    std::swap(row_perm[i], row_perm[rng.below(static_cast<uint64_t>(i + 1))]);
  }
  for (int i = n - 1; i > 0; --i) {
    std::swap(col_perm[i], col_perm[rng.below(static_cast<uint64_t>(i + 1))]);
  }

  std::vector<double> w(static_cast<size_t>(n) * n, 0.0);
  std::vector<int> block_of_row(n), block_of_col(n);
  int base = 0;
  for (size_t b = 0; b < block_sizes.size(); ++b) {
    for (int i = 0; i < block_sizes[b]; ++i) {
      for (int j = 0; j < block_sizes[b]; ++j) {
        double mag = grid(scheme, rng.uniform(0.1, 0.5));
        double val = rng.coin() ? mag : -mag;
        w[static_cast<size_t>(row_perm[base + i]) * n + col_perm[base + j]] = val;
      }
      block_of_row[row_perm[base + i]] = static_cast<int>(b);
    }
    for (int j = 0; j < block_sizes[b]; ++j) block_of_col[col_perm[base + j]] = static_cast<int>(b);
    base += block_sizes[b];
  }
  if (noise > 0.0) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (block_of_row[i] == block_of_col[j]) continue;
        w[static_cast<size_t>(i) * n + j] = rng.coin() ? noise : -noise;
      }
    }
  }

  SparseEntangledModel out;
  out.block_sizes = block_sizes;
  out.noise = noise;

  // Ground truth in the order the block pass recovers: components sorted by
  // least column, columns and rows ascending inside each component.
  struct Comp {
    std::vector<int> rows, cols;
  };
  std::vector<Comp> comps(block_sizes.size());
  for (int i = 0; i < n; ++i) comps[block_of_row[i]].rows.push_back(i);
  for (int j = 0; j < n; ++j) comps[block_of_col[j]].cols.push_back(j);
  std::sort(comps.begin(), comps.end(),
            [](const Comp& a, const Comp& b) { return a.cols[0] < b.cols[0]; });
  std::vector<int> row_concat;
  for (const auto& c : comps) {
    out.gather.insert(out.gather.end(), c.cols.begin(), c.cols.end());
    row_concat.insert(row_concat.end(), c.rows.begin(), c.rows.end());
  }
  out.scatter.assign(static_cast<size_t>(n), 0);
  for (size_t pos = 0; pos < row_concat.size(); ++pos) out.scatter[row_concat[pos]] = static_cast<int>(pos);

  WireType vec = WireType::vector("vec" + std::to_string(n), n);
  Signature sig;
  sig.add_object(vec);
  sig.add_generator({"tangle", {vec}, {vec}, StructuralKind::Opaque});
  sig.sort();
  Model m;
  m.diagram = single_node_diagram(sig, "tangle");
  ObjectSpec spec = object_image({vec});
  m.rep.boxes["tangle"] = SemanticBox::linear(spec, spec, std::move(w));
  out.model = normalized(m);
  return out;
}

// --- random corpus ----------------------------------------------------------

namespace {

struct Stock {
  Signature sig;
  std::vector<std::string> layer_gens;  // candidates with nonempty dom
  std::vector<std::string> states;
};

Stock real_stock() {
  Stock s;
  WireType ra = WireType::vector("RA", 2);
  WireType rb = WireType::vector("RB", 3);
  s.sig.add_object(ra);
  s.sig.add_object(rb);
  s.sig.add_generator({"lin_a", {ra}, {ra}, StructuralKind::Opaque});
  s.sig.add_generator({"lin_ab", {ra}, {rb}, StructuralKind::Opaque});
  s.sig.add_generator({"lin_ba", {rb}, {ra}, StructuralKind::Opaque});
  s.sig.add_generator({"shift_a", {ra}, {ra}, StructuralKind::Opaque});
  s.sig.add_generator({"relu_a", {ra}, {ra}, StructuralKind::Opaque});
  s.sig.add_generator({"join_ab", {ra, rb}, {rb}, StructuralKind::Opaque});
  s.sig.add_generator({"seed_a", {}, {ra}, StructuralKind::Opaque});
  s.sig.add_generator(make_copy(ra));
  s.sig.add_generator(make_discard(ra));
  s.sig.add_generator(make_swap(ra, rb));
  s.sig.add_generator(make_identity(ra));
  s.sig.sort();
  s.layer_gens = {"lin_a",  "lin_ab", "lin_ba",       "shift_a",       "relu_a",
                  "join_ab", "~copy(RA)", "~discard(RA)", "~swap(RA,RB)", "~id(RA)"};
  s.states = {"seed_a"};
  return s;
}

Stock finite_stock() {
  Stock s;
  WireType f2 = WireType::finite("F2", {"lo", "hi"});
  WireType f3 = WireType::finite("F3", {"red", "green", "blue"});
  s.sig.add_object(f2);
  s.sig.add_object(f3);
  s.sig.add_generator({"t22", {f2}, {f2}, StructuralKind::Opaque});
  s.sig.add_generator({"t23", {f2}, {f3}, StructuralKind::Opaque});
  s.sig.add_generator({"t32", {f3}, {f2}, StructuralKind::Opaque});
  s.sig.add_generator({"tjoin", {f2, f3}, {f2}, StructuralKind::Opaque});
  s.sig.add_generator({"tseed", {}, {f2}, StructuralKind::Opaque});
  s.sig.add_generator(make_copy(f2));
  s.sig.add_generator(make_discard(f3));
  s.sig.add_generator(make_swap(f2, f3));
  s.sig.add_generator(make_identity(f2));
  s.sig.sort();
  s.layer_gens = {"t22", "t23", "t32", "tjoin", "~copy(F2)", "~discard(F3)", "~swap(F2,F3)", "~id(F2)"};
  s.states = {"tseed"};
  return s;
}

Representation random_representation(const Stock& stock, bool finite, Rng& rng,
                                     const CodingScheme& scheme) {
  Representation rep;
  for (const auto& g : stock.sig.generators) {
    if (g.is_structural()) continue;
    ObjectSpec dom = object_image(g.dom);
    ObjectSpec cod = object_image(g.cod);
    if (finite) {
      uint64_t dom_size = finite_domain_size(dom);
      uint64_t cod_size = finite_domain_size(cod);
      std::vector<int> table(dom_size);
      for (int& t : table) t = static_cast<int>(rng.below(cod_size));
      rep.boxes[g.name] = SemanticBox::finite_table(dom, cod, std::move(table));
      continue;
    }
    if (g.name == "shift_a") {
      std::vector<double> b(static_cast<size_t>(total_dim(dom)));
      for (double& x : b) x = grid(scheme, rng.uniform(-0.9, 0.9));
      rep.boxes[g.name] = SemanticBox::bias(dom, std::move(b));
    } else if (g.name == "relu_a") {
      rep.boxes[g.name] = SemanticBox::pointwise(dom, PointwiseKind::Relu);
    } else {
      int rows = total_dim(cod);
      int cols = dom.empty() ? 0 : total_dim(dom);
      std::vector<double> w(static_cast<size_t>(rows) * cols);
      for (double& x : w) x = grid(scheme, rng.uniform(-0.9, 0.9));
      rep.boxes[g.name] = SemanticBox::linear(dom, cod, std::move(w));
    }
  }
  return rep;
}

Diagram random_layers_from(const Stock& stock, Rng& rng, std::vector<std::string> current,
                           int layers) {
  const Signature& sig = stock.sig;
  Diagram d = identity_diagram(sig, current);
  for (int layer = 0; layer < layers; ++layer) {
    Diagram step = empty_diagram();
    step.signature = sig;
    size_t pos = 0;
    while (pos < current.size()) {
      std::vector<std::string> fits;
      for (const auto& name : stock.layer_gens) {
        const Generator& g = sig.generator(name);
        if (pos + g.dom.size() > current.size()) continue;
        bool ok = true;
        for (size_t i = 0; i < g.dom.size(); ++i) {
          if (g.dom[i].name != current[pos + i]) ok = false;
        }
        if (ok) fits.push_back(name);
      }
      fits.push_back("");
      const std::string& pick = fits[rng.below(fits.size())];
      if (pick.empty()) {
        step = compose_par(step, identity_diagram(sig, {current[pos]}));
        pos += 1;
      } else {
        step = compose_par(step, single_node_diagram(sig, pick));
        pos += sig.generator(pick).dom.size();
      }
    }
    if (rng.coin(0.2) && !stock.states.empty()) {
      step = compose_par(step, single_node_diagram(sig, stock.states[0]));
    }
    d = compose_seq(d, step);
    current = d.output_types;
  }
  return d;
}

std::vector<std::string> random_start_types(const Stock& stock, Rng& rng) {
  std::vector<std::string> current;
  int width = 1 + static_cast<int>(rng.below(2));
  std::vector<std::string> starters;
  for (const auto& t : stock.sig.objects) starters.push_back(t.name);
  for (int i = 0; i < width; ++i) current.push_back(starters[rng.below(starters.size())]);
  return current;
}

Diagram random_layered_diagram(const Stock& stock, Rng& rng, int layers) {
  return random_layers_from(stock, rng, random_start_types(stock, rng), layers);
}

}  // namespace

Model random_model(uint64_t seed, const RandomModelOptions& options) {
  Rng rng(seed * 2654435761u + 17);
  CodingScheme scheme;
  Stock stock = options.finite_backend ? finite_stock() : real_stock();
  Diagram d = random_layered_diagram(stock, rng, options.layers);
  Representation rep = random_representation(stock, options.finite_backend, rng, scheme);
  return normalized(Model{d, rep});
}

std::pair<Model, Model> random_composable_pair(uint64_t seed, const RandomModelOptions& options) {
  Rng rng(seed * 912367u + 3);
  CodingScheme scheme;
  Stock stock = options.finite_backend ? finite_stock() : real_stock();
  Diagram d1 = random_layered_diagram(stock, rng, options.layers);
  Diagram d2 = random_layers_from(stock, rng, d1.output_types, options.layers);
  Representation rep = random_representation(stock, options.finite_backend, rng, scheme);
  // Both halves share one representation, so the composite is well-typed.
  return {Model{d1, rep}, Model{d2, rep}};
}

Bundle random_bundle(uint64_t seed, const RandomModelOptions& options) {
  Bundle bundle;
  bundle.model = random_model(seed, options);
  CodingScheme scheme;
  bundle.vocabulary.add("alpha");
  bundle.vocabulary.add("beta");
  bundle.vocabulary.add("gamma");
  if (options.with_interpretation) {
    Rng rng(seed * 40503 + 5);
    Signature used = signature_of(bundle.model.diagram);
    size_t i = 0;
    for (const auto& g : used.generators) {
      SemanticBox box = bundle.model.rep.box_for(g);
      std::string fp = semantic_fingerprint(box, scheme);
      if (bundle.posthoc.label_of(fp)) continue;
      if (rng.coin()) {
        const std::string& label = bundle.vocabulary.labels[i % 3].name;
        bundle.posthoc.assign(box, scheme, label);
        if (!bundle.reconstruction.box_of(label)) bundle.reconstruction.by_label[label] = box;
      }
      ++i;
    }
    bundle.syntactic = induce_syntactic(bundle.posthoc, bundle.model.rep,
                                        bundle.model.diagram.signature, scheme);
  }
  if (options.kappa != 32) bundle.config.kappa = options.kappa;
  return bundle;
}

CodingScheme scheme_from_config(const BundleConfig& config) {
  CodingScheme scheme;
  if (config.q) scheme.q = *config.q;
  if (config.presence_flags) scheme.presence_flags = *config.presence_flags;
  scheme.validate();
  return scheme;
}

SearchConfig search_config_from(const BundleConfig& config) {
  SearchConfig sc;
  sc.scheme = scheme_from_config(config);
  if (config.tau) sc.tau = *config.tau;
  if (config.tau_b) sc.tau_b = *config.tau_b;
  if (config.eps_global) sc.eps_global = *config.eps_global;
  if (config.eps_local) sc.eps_local = *config.eps_local;
  if (config.max_iters) sc.max_iterations = *config.max_iters;
  if (config.seed) sc.seed = *config.seed;
  uint64_t seed = config.seed.value_or(0);
  int samples = config.samples.value_or(64);
  std::string metric = config.metric.value_or("l2");
  if (metric == "l2") {
    sc.metric = MetricSpec::l2(seed, samples);
  } else if (metric == "kl") {
    sc.metric = MetricSpec::kl(seed, samples);
  } else if (metric == "sup") {
    sc.metric = MetricSpec::sup_finite();
  } else {
    fail_parse("unknown metric kind '" + metric + "'");
  }
  sc.validate();
  return sc;
}

InterpretationCostOracle oracle_from_config(const Bundle& bundle) {
  return label_code_oracle(bundle.vocabulary, bundle.config.kappa.value_or(32));
}

// --- text format -------------------------------------------------------------

namespace {

std::string spec_token(const WireSpec& s) {
  if (s.is_vector()) return "v" + std::to_string(s.dim);
  std::string out = "f:";
  for (size_t i = 0; i < s.values.size(); ++i) {
    if (i) out += ",";
    out += s.values[i];
  }
  return out;
}

std::string object_spec_token(const ObjectSpec& spec) {
  std::string out = "[";
  for (size_t i = 0; i < spec.size(); ++i) {
    if (i) out += ";";
    out += spec_token(spec[i]);
  }
  out += "]";
  return out;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

struct Cursor {
  const std::vector<std::string>& toks;
  size_t pos = 0;
  const std::string& where;
  int line_no;

  [[noreturn]] void fail(const std::string& message) const {
    fail_parse(where + ":" + std::to_string(line_no) + ": " + message);
  }
  bool done() const { return pos >= toks.size(); }
  const std::string& next(const char* what) {
    if (done()) fail(std::string("missing ") + what);
    return toks[pos++];
  }
  long long next_int(const char* what) {
    const std::string& t = next(what);
    errno = 0;
    char* end = nullptr;
    long long v = std::strtoll(t.c_str(), &end, 10);
    if (errno != 0 || end == nullptr || *end != '\0') fail(std::string("bad integer for ") + what);
    return v;
  }
  double next_double(const char* what) {
    const std::string& t = next(what);
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(t.c_str(), &end);
    if (errno != 0 || end == nullptr || *end != '\0') fail(std::string("bad number for ") + what);
    return v;
  }
};

WireSpec parse_spec_token(Cursor& c, const std::string& tok) {
  if (tok.size() >= 2 && tok[0] == 'v') {
    int dim = std::atoi(tok.c_str() + 1);
    if (dim < 1) c.fail("bad vector spec '" + tok + "'");
    WireSpec s;
    s.kind = WireSpec::Kind::Dim;
    s.dim = dim;
    return s;
  }
  if (tok.rfind("f:", 0) == 0) {
    WireSpec s;
    s.kind = WireSpec::Kind::Finite;
    std::string rest = tok.substr(2);
    size_t start = 0;
    while (start <= rest.size()) {
      size_t comma = rest.find(',', start);
      std::string v = rest.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      if (v.empty()) c.fail("bad finite spec '" + tok + "'");
      s.values.push_back(v);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    return s;
  }
  c.fail("bad wire spec '" + tok + "'");
}

ObjectSpec parse_object_spec(Cursor& c) {
  const std::string& tok = c.next("object spec");
  if (tok.size() < 2 || tok.front() != '[' || tok.back() != ']') {
    c.fail("object spec must be bracketed: '" + tok + "'");
  }
  ObjectSpec spec;
  std::string body = tok.substr(1, tok.size() - 2);
  if (body.empty()) return spec;
  size_t start = 0;
  while (start <= body.size()) {
    size_t semi = body.find(';', start);
    std::string piece = body.substr(start, semi == std::string::npos ? std::string::npos : semi - start);
    spec.push_back(parse_spec_token(c, piece));
    if (semi == std::string::npos) break;
    start = semi + 1;
  }
  return spec;
}

void write_box(std::ostream& out, const SemanticBox& box) {
  switch (box.variant) {
    case SemanticBox::Variant::Linear:
      out << "linear " << object_spec_token(box.dom_spec) << " " << object_spec_token(box.cod_spec);
      for (double w : box.weights) out << " " << fmt_hex(w);
      break;
    case SemanticBox::Variant::Bias:
      out << "bias " << object_spec_token(box.dom_spec);
      for (double w : box.offsets) out << " " << fmt_hex(w);
      break;
    case SemanticBox::Variant::Pointwise:
      out << "pointwise " << object_spec_token(box.dom_spec) << " " << pointwise_kind_name(box.pw);
      break;
    case SemanticBox::Variant::FiniteTable:
      out << "table " << object_spec_token(box.dom_spec) << " " << object_spec_token(box.cod_spec);
      for (int t : box.table) out << " " << t;
      break;
    case SemanticBox::Variant::Permutation:
      out << "permutation " << object_spec_token(box.dom_spec) << " "
          << object_spec_token(box.cod_spec);
      for (int p : box.perm) out << " " << p;
      break;
    case SemanticBox::Variant::Structural:
      out << "structural " << structural_kind_name(box.structural) << " "
          << object_spec_token(box.dom_spec);
      break;
  }
}

SemanticBox parse_box(Cursor& c) {
  const std::string& variant = c.next("box variant");
  if (variant == "linear") {
    ObjectSpec dom = parse_object_spec(c);
    ObjectSpec cod = parse_object_spec(c);
    size_t rows = static_cast<size_t>(dom.empty() ? 0 : 1);
    (void)rows;
    size_t count = static_cast<size_t>(total_dim(cod)) *
                   static_cast<size_t>(dom.empty() ? 0 : total_dim(dom));
    std::vector<double> w;
    w.reserve(count);
    for (size_t i = 0; i < count; ++i) w.push_back(c.next_double("matrix entry"));
    if (!c.done()) c.fail("trailing tokens after matrix entries");
    return SemanticBox::linear(dom, cod, std::move(w));
  }
  if (variant == "bias") {
    ObjectSpec dom = parse_object_spec(c);
    std::vector<double> b;
    size_t count = static_cast<size_t>(total_dim(dom));
    for (size_t i = 0; i < count; ++i) b.push_back(c.next_double("bias entry"));
    if (!c.done()) c.fail("trailing tokens after bias entries");
    return SemanticBox::bias(dom, std::move(b));
  }
  if (variant == "pointwise") {
    ObjectSpec dom = parse_object_spec(c);
    const std::string& kind = c.next("pointwise kind");
    PointwiseKind pw;
    if (kind == "relu") {
      pw = PointwiseKind::Relu;
    } else if (kind == "sigmoid") {
      pw = PointwiseKind::Sigmoid;
    } else if (kind == "argmax_onehot") {
      pw = PointwiseKind::ArgmaxOnehot;
    } else {
      c.fail("unknown pointwise kind '" + kind + "'");
    }
    return SemanticBox::pointwise(dom, pw);
  }
  if (variant == "table") {
    ObjectSpec dom = parse_object_spec(c);
    ObjectSpec cod = parse_object_spec(c);
    size_t count = static_cast<size_t>(finite_domain_size(dom));
    std::vector<int> table;
    table.reserve(count);
    for (size_t i = 0; i < count; ++i) table.push_back(static_cast<int>(c.next_int("table entry")));
    if (!c.done()) c.fail("trailing tokens after table entries");
    return SemanticBox::finite_table(dom, cod, std::move(table));
  }
  if (variant == "permutation") {
    ObjectSpec dom = parse_object_spec(c);
    ObjectSpec cod = parse_object_spec(c);
    size_t count = static_cast<size_t>(dom.empty() ? 0 : total_dim(dom));
    std::vector<int> perm;
    perm.reserve(count);
    for (size_t i = 0; i < count; ++i) perm.push_back(static_cast<int>(c.next_int("perm entry")));
    if (!c.done()) c.fail("trailing tokens after permutation entries");
    return SemanticBox::permutation(dom, cod, std::move(perm));
  }
  if (variant == "structural") {
    const std::string& kind = c.next("structural kind");
    ObjectSpec dom = parse_object_spec(c);
    StructuralKind sk;
    if (kind == "copy") {
      sk = StructuralKind::Copy;
    } else if (kind == "discard") {
      sk = StructuralKind::Discard;
    } else if (kind == "swap") {
      sk = StructuralKind::Swap;
    } else if (kind == "identity") {
      sk = StructuralKind::Identity;
    } else {
      c.fail("unknown structural kind '" + kind + "'");
    }
    return SemanticBox::structural_box(sk, dom);
  }
  c.fail("unknown box variant '" + variant + "'");
}

Port parse_port(Cursor& c, const std::string& tok) {
  auto split = [&](const std::string& s) {
    std::vector<std::string> parts;
    size_t start = 0;
    while (start <= s.size()) {
      size_t colon = s.find(':', start);
      parts.push_back(s.substr(start, colon == std::string::npos ? std::string::npos : colon - start));
      if (colon == std::string::npos) break;
      start = colon + 1;
    }
    return parts;
  };
  std::vector<std::string> parts = split(tok);
  if (parts.size() == 2 && parts[0] == "in") return Port::boundary_in(std::atoi(parts[1].c_str()));
  if (parts.size() == 2 && parts[0] == "out") return Port::boundary_out(std::atoi(parts[1].c_str()));
  if (parts.size() == 3 && !parts[0].empty() && parts[0][0] == 'n') {
    int node = std::atoi(parts[0].c_str() + 1);
    int index = std::atoi(parts[2].c_str());
    if (parts[1] == "in") return Port::node_in(node, index);
    if (parts[1] == "out") return Port::node_out(node, index);
  }
  c.fail("bad port '" + tok + "'");
}

}  // namespace

std::string bundle_to_text(const Bundle& bundle) {
  Model m = normalized(bundle.model);
  std::ostringstream out;
  out << "cmod 1\n";

  out << "[signature]\n";
  for (const auto& t : m.diagram.signature.objects) {
    if (t.is_vector()) {
      out << "wire " << t.name << " vector " << t.dim << "\n";
    } else {
      out << "wire " << t.name << " finite";
      for (const auto& v : t.values) out << " " << v;
      out << "\n";
    }
  }
  for (const auto& g : m.diagram.signature.generators) {
    out << "gen " << g.name << " " << structural_kind_name(g.kind);
    if (g.is_structural()) {
      if (g.kind == StructuralKind::Swap) {
        out << " " << g.dom[0].name << " " << g.dom[1].name;
      } else {
        out << " " << g.dom[0].name;
      }
    } else {
      out << " dom " << g.dom.size();
      for (const auto& t : g.dom) out << " " << t.name;
      out << " cod " << g.cod.size();
      for (const auto& t : g.cod) out << " " << t.name;
    }
    out << "\n";
  }

  out << "[diagram]\n";
  out << "in";
  for (const auto& t : m.diagram.input_types) out << " " << t;
  out << "\n";
  out << "out";
  for (const auto& t : m.diagram.output_types) out << " " << t;
  out << "\n";
  for (size_t v = 0; v < m.diagram.nodes.size(); ++v) {
    out << "node " << v << " " << m.diagram.nodes[v].gen << "\n";
  }
  for (const auto& e : m.diagram.edges) {
    out << "edge " << port_to_string(e.src) << " " << port_to_string(e.dst) << "\n";
  }

  out << "[representation]\n";
  for (const auto& g : m.diagram.signature.generators) {
    const SemanticBox* box = m.rep.find(g.name);
    if (!box) continue;
    out << "box " << g.name << " ";
    write_box(out, *box);
    out << "\n";
  }

  if (bundle.has_interpretation()) {
    out << "[interpretation]\n";
    for (const auto& l : bundle.vocabulary.labels) {
      out << "label " << l.name;
      if (!l.gloss.empty()) out << " gloss " << l.gloss;
      out << "\n";
    }
    for (const auto& [gen, label] : bundle.syntactic.by_generator) {
      out << "assign " << gen << " " << label << "\n";
    }
    for (const auto& [fp, entry] : bundle.posthoc.by_fingerprint) {
      out << "sem " << entry.label << " ";
      write_box(out, entry.archetype);
      out << "\n";
    }
    for (const auto& [label, box] : bundle.reconstruction.by_label) {
      out << "recon " << label << " ";
      write_box(out, box);
      out << "\n";
    }
  }

  if (bundle.config.any()) {
    out << "[config]\n";
    if (bundle.config.q) out << "q " << *bundle.config.q << "\n";
    if (bundle.config.presence_flags) {
      out << "presence_flags " << (*bundle.config.presence_flags ? 1 : 0) << "\n";
    }
    if (bundle.config.kappa) out << "kappa " << *bundle.config.kappa << "\n";
    if (bundle.config.tau) out << "tau " << fmt_g17(*bundle.config.tau) << "\n";
    if (bundle.config.tau_b) out << "tau_b " << fmt_g17(*bundle.config.tau_b) << "\n";
    if (bundle.config.eps_global) out << "eps_global " << fmt_g17(*bundle.config.eps_global) << "\n";
    if (bundle.config.eps_local) out << "eps_local " << fmt_g17(*bundle.config.eps_local) << "\n";
    if (bundle.config.seed) out << "seed " << *bundle.config.seed << "\n";
    if (bundle.config.metric) out << "metric " << *bundle.config.metric << "\n";
    if (bundle.config.samples) out << "samples " << *bundle.config.samples << "\n";
    if (bundle.config.max_iters) out << "max_iters " << *bundle.config.max_iters << "\n";
  }
  return out.str();
}

Bundle bundle_from_text(const std::string& text, const std::string& origin) {
  Bundle bundle;
  Signature sig;
  Diagram d;
  std::map<std::string, SemanticBox> boxes;
  struct SemLine {
    std::string label;
    SemanticBox box;
  };
  std::vector<SemLine> sem_lines;

  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::string section;
  bool have_version = false;
  size_t node_count = 0;

  auto fail_at = [&](const std::string& message) {
    fail_parse(origin + ":" + std::to_string(line_no) + ": " + message);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> toks = split_ws(line);
    if (toks.empty()) continue;

    if (!have_version) {
      if (toks.size() != 2 || toks[0] != "cmod") fail_at("expected version line 'cmod 1'");
      if (toks[1] != "1") fail_at("unsupported model file version " + toks[1]);
      have_version = true;
      continue;
    }
    if (toks[0].front() == '[') {
      if (toks.size() != 1) fail_at("malformed section header");
      section = toks[0];
      if (section != "[signature]" && section != "[diagram]" && section != "[representation]" &&
          section != "[interpretation]" && section != "[config]") {
        fail_at("unknown section " + section + " (file needs a newer version)");
      }
      continue;
    }
    Cursor c{toks, 0, origin, line_no};
    const std::string& key = c.next("keyword");

    try {
      if (section == "[signature]") {
        if (key == "wire") {
          const std::string& name = c.next("wire name");
          const std::string& kind = c.next("wire kind");
          if (kind == "vector") {
            sig.add_object(WireType::vector(name, static_cast<int>(c.next_int("dim"))));
          } else if (kind == "finite") {
            std::vector<std::string> values;
            while (!c.done()) values.push_back(c.next("value"));
            sig.add_object(WireType::finite(name, std::move(values)));
          } else {
            fail_at("unknown wire kind '" + kind + "'");
          }
        } else if (key == "gen") {
          const std::string& name = c.next("generator name");
          const std::string& kind = c.next("generator kind");
          if (kind == "opaque") {
            if (c.next("dom") != "dom") fail_at("expected 'dom'");
            long long nd = c.next_int("dom arity");
            std::vector<WireType> dom, cod;
            for (long long i = 0; i < nd; ++i) dom.push_back(sig.object(c.next("dom wire")));
            if (c.next("cod") != "cod") fail_at("expected 'cod'");
            long long nc = c.next_int("cod arity");
            for (long long i = 0; i < nc; ++i) cod.push_back(sig.object(c.next("cod wire")));
            sig.add_generator({name, std::move(dom), std::move(cod), StructuralKind::Opaque});
          } else if (kind == "copy") {
            sig.add_generator(make_copy(sig.object(c.next("wire"))));
          } else if (kind == "discard") {
            sig.add_generator(make_discard(sig.object(c.next("wire"))));
          } else if (kind == "identity") {
            sig.add_generator(make_identity(sig.object(c.next("wire"))));
          } else if (kind == "swap") {
            const WireType& a = sig.object(c.next("wire"));
            const WireType& b = sig.object(c.next("wire"));
            sig.add_generator(make_swap(a, b));
          } else {
            fail_at("unknown generator kind '" + kind + "'");
          }
        } else {
          fail_at("unknown field '" + key + "' in [signature] (file needs a newer version)");
        }
      } else if (section == "[diagram]") {
        if (key == "in") {
          while (!c.done()) d.input_types.push_back(c.next("wire"));
        } else if (key == "out") {
          while (!c.done()) d.output_types.push_back(c.next("wire"));
        } else if (key == "node") {
          long long id = c.next_int("node id");
          if (id != static_cast<long long>(node_count)) fail_at("node ids must be consecutive");
          d.nodes.push_back({c.next("generator")});
          ++node_count;
        } else if (key == "edge") {
          Port src = parse_port(c, c.next("source port"));
          Port dst = parse_port(c, c.next("target port"));
          d.edges.push_back({src, dst});
        } else {
          fail_at("unknown field '" + key + "' in [diagram] (file needs a newer version)");
        }
      } else if (section == "[representation]") {
        if (key == "box") {
          const std::string& gen = c.next("generator");
          boxes[gen] = parse_box(c);
        } else {
          fail_at("unknown field '" + key + "' in [representation] (file needs a newer version)");
        }
      } else if (section == "[interpretation]") {
        if (key == "label") {
          const std::string& name = c.next("label name");
          std::string gloss;
          if (!c.done()) {
            if (c.next("gloss") != "gloss") fail_at("expected 'gloss'");
            size_t at = line.find("gloss ");
            gloss = line.substr(at + 6);
            while (!c.done()) c.next("gloss word");
          }
          bundle.vocabulary.add(name, gloss);
        } else if (key == "assign") {
          const std::string& gen = c.next("generator");
          bundle.syntactic.by_generator[gen] = c.next("label");
        } else if (key == "sem") {
          std::string label = c.next("label");
          sem_lines.push_back({std::move(label), parse_box(c)});
        } else if (key == "recon") {
          const std::string& label = c.next("label");
          bundle.reconstruction.by_label[label] = parse_box(c);
        } else {
          fail_at("unknown field '" + key + "' in [interpretation] (file needs a newer version)");
        }
      } else if (section == "[config]") {
        if (key == "q") {
          bundle.config.q = static_cast<int>(c.next_int("q"));
        } else if (key == "presence_flags") {
          bundle.config.presence_flags = c.next_int("presence_flags") != 0;
        } else if (key == "kappa") {
          bundle.config.kappa = static_cast<uint64_t>(c.next_int("kappa"));
        } else if (key == "tau") {
          bundle.config.tau = c.next_double("tau");
        } else if (key == "tau_b") {
          bundle.config.tau_b = c.next_double("tau_b");
        } else if (key == "eps_global") {
          bundle.config.eps_global = c.next_double("eps_global");
        } else if (key == "eps_local") {
          bundle.config.eps_local = c.next_double("eps_local");
        } else if (key == "seed") {
          bundle.config.seed = static_cast<uint64_t>(c.next_int("seed"));
        } else if (key == "metric") {
          bundle.config.metric = c.next("metric");
        } else if (key == "samples") {
          bundle.config.samples = static_cast<int>(c.next_int("samples"));
        } else if (key == "max_iters") {
          bundle.config.max_iters = static_cast<int>(c.next_int("max_iters"));
        } else {
          fail_at("unknown field '" + key + "' in [config] (file needs a newer version)");
        }
      } else {
        fail_at("content before any section header");
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Parse) throw;
      fail_at(e.what());
    }
  }
  if (!have_version) fail_parse(origin + ": empty model file");

  d.signature = sig;
  try {
    validate(d);
  } catch (const Error& e) {
    fail_parse(origin + ": invalid diagram: " + e.what());
  }
  bundle.model.diagram = d;
  bundle.model.rep.boxes = std::move(boxes);

  // Arity consistency between boxes and their generators.
  FunctorialReport fr = check_functorial(bundle.model.rep, d);
  if (!fr.ok()) {
    fail_parse(origin + ": arity inconsistency: generator '" + fr.violations[0].generator + "': " +
               fr.violations[0].message);
  }

  CodingScheme scheme = scheme_from_config(bundle.config);
  for (const auto& s : sem_lines) {
    if (!bundle.vocabulary.has(s.label)) {
      fail_parse(origin + ": sem line references unknown label '" + s.label + "'");
    }
    bundle.posthoc.assign(s.box, scheme, s.label);
  }
  for (const auto& [gen, label] : bundle.syntactic.by_generator) {
    if (!sig.find_generator(gen)) {
      fail_parse(origin + ": assign line references unknown generator '" + gen + "'");
    }
    if (!bundle.vocabulary.has(label)) {
      fail_parse(origin + ": assign line references unknown label '" + label + "'");
    }
  }
  bundle.vocabulary.validate();
  return bundle;
}

void save(const Bundle& bundle, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_io("cannot open '" + path + "' for writing");
  out << bundle_to_text(bundle);
  if (!out) fail_io("failed writing '" + path + "'");
}

Bundle load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_io("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return bundle_from_text(buf.str(), path);
}

}  // namespace cmod
