#include <cmath>

#include "cmod/semantics.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace cmod;
using namespace cmod::testing;

namespace {

Value vec(std::vector<double> v) { return Value::vector(std::move(v)); }

// Two-box real chain: f = 2x2 matrix, g = 2x2 matrix on wire A.
struct RealChain {
  Signature sig;
  Representation rep;
  Diagram chain;
  std::vector<double> wf{1.0, 2.0, -1.0, 0.5};
  std::vector<double> wg{0.5, 0.0, 1.0, -2.0};

  RealChain() {
    WireType a = WireType::vector("A", 2);
    sig.add_object(a);
    sig.add_generator({"f", {a}, {a}, StructuralKind::Opaque});
    sig.add_generator({"g", {a}, {a}, StructuralKind::Opaque});
    ObjectSpec spec = object_image({a});
    rep.boxes["f"] = SemanticBox::linear(spec, spec, wf);
    rep.boxes["g"] = SemanticBox::linear(spec, spec, wg);
    chain = compose_seq(single_node_diagram(sig, "f"), single_node_diagram(sig, "g"));
  }
};

// Finite chain: t1: F2 -> F3, t2: F3 -> F2.
struct FiniteChain {
  Signature sig;
  Representation rep;
  Diagram chain;
  std::vector<int> t1{2, 0};
  std::vector<int> t2{1, 1, 0};

  FiniteChain() {
    WireType f2 = WireType::finite("F2", {"x", "y"});
    WireType f3 = WireType::finite("F3", {"p", "q", "r"});
    sig.add_object(f2);
    sig.add_object(f3);
    sig.add_generator({"t1", {f2}, {f3}, StructuralKind::Opaque});
    sig.add_generator({"t2", {f3}, {f2}, StructuralKind::Opaque});
    rep.boxes["t1"] = SemanticBox::finite_table(object_image({f2}), object_image({f3}), t1);
    rep.boxes["t2"] = SemanticBox::finite_table(object_image({f3}), object_image({f2}), t2);
    chain = compose_seq(single_node_diagram(sig, "t1"), single_node_diagram(sig, "t2"));
  }
};

}  // namespace

TEST_CASE("evaluate identity and direct composition oracle") {
  RealChain rc;
  Diagram id_a = identity_diagram(rc.sig, {"A"});
  Tuple x = {vec({0.3, -0.7})};
  CHECK(evaluate(rc.rep, id_a, x) == x);

  // Oracle: g(f(x)) computed directly from the matrices.
  auto matmul = [](const std::vector<double>& w, const std::vector<double>& v) {
    return std::vector<double>{w[0] * v[0] + w[1] * v[1], w[2] * v[0] + w[3] * v[1]};
  };
  for (double t : {-1.0, 0.0, 0.25, 2.0}) {
    Tuple in = {vec({t, 1.0 - t})};
    Tuple out = evaluate(rc.rep, rc.chain, in);
    std::vector<double> expect = matmul(rc.wg, matmul(rc.wf, in[0].vec));
    REQUIRE(out.size() == 1);
    CHECK(out[0].vec[0] == doctest::Approx(expect[0]).epsilon(1e-12));
    CHECK(out[0].vec[1] == doctest::Approx(expect[1]).epsilon(1e-12));
  }
}

TEST_CASE("finite evaluation equals exhaustive table composition") {
  FiniteChain fc;
  for (int s = 0; s < 2; ++s) {
    Tuple out = evaluate(fc.rep, fc.chain, {Value::symbol(s)});
    REQUIRE(out.size() == 1);
    CHECK(out[0].sym == fc.t2[fc.t1[s]]);
  }
}

TEST_CASE("check_functorial flags arity and structural violations") {
  RealChain rc;
  Diagram d = single_node_diagram(rc.sig, "f");
  CHECK(check_functorial(rc.rep, d).ok());

  // Wrong codomain width.
  Representation bad = rc.rep;
  ObjectSpec v2 = {WireSpec::of(WireType::vector("A", 2))};
  ObjectSpec v3 = {WireSpec::of(WireType::vector("A3", 3))};
  bad.boxes["f"] = SemanticBox::linear(v2, v3, std::vector<double>(6, 0.0));
  FunctorialReport r = check_functorial(bad, d);
  REQUIRE(r.violations.size() == 1);
  CHECK(r.violations[0].generator == "f");

  // Structural copy mapped to a non-duplicating box.
  Signature sig = rc.sig;
  WireType a = sig.object("A");
  sig.add_generator(make_copy(a));
  Diagram dc = single_node_diagram(sig, "~copy(A)");
  Representation evil = rc.rep;
  evil.boxes["~copy(A)"] =
      SemanticBox::linear(object_image({a}), object_image({a, a}), std::vector<double>(8, 0.0));
  FunctorialReport r2 = check_functorial(evil, dc);
  CHECK_FALSE(r2.ok());

  // Missing generator is an error, not a report entry.
  Representation partial;
  CHECK_THROWS_AS(check_functorial(partial, d), Error);
}

TEST_CASE("box_semantics returns stored and structural boxes") {
  RealChain rc;
  const Generator& f = rc.sig.generator("f");
  CHECK(box_semantics(rc.rep, f) == rc.rep.boxes.at("f"));
  CHECK(box_semantics(rc.rep, f) == box_semantics(rc.rep, f));

  WireType a = rc.sig.object("A");
  SemanticBox idbox = box_semantics(rc.rep, make_identity(a));
  CHECK(idbox.variant == SemanticBox::Variant::Structural);
  CHECK(idbox.structural == StructuralKind::Identity);

  Generator ghost{"ghost", {a}, {a}, StructuralKind::Opaque};
  CHECK_THROWS_AS(box_semantics(rc.rep, ghost), Error);
}

TEST_CASE("distortion agrees with a direct per-sample recomputation") {
  ObjectSpec v2 = {WireSpec::of(WireType::vector("A", 2))};
  std::vector<double> w{1.0, 0.5, -0.5, 2.0};
  std::vector<double> e{0.01, -0.02, 0.03, 0.005};
  std::vector<double> we(4);
  for (int i = 0; i < 4; ++i) we[i] = w[i] + e[i];
  SemanticBox bw = SemanticBox::linear(v2, v2, w);
  SemanticBox bwe = SemanticBox::linear(v2, v2, we);

  MetricSpec metric = MetricSpec::l2(42, 32);
  CHECK(distortion(bw, bw, metric) == 0.0);

  // Oracle: recompute over the same fixed samples by hand.
  std::vector<Tuple> samples = metric.distribution.draw(v2);
  double acc = 0.0;
  for (const auto& x : samples) {
    double d0 = e[0] * x[0].vec[0] + e[1] * x[0].vec[1];
    double d1 = e[2] * x[0].vec[0] + e[3] * x[0].vec[1];
    acc += d0 * d0 + d1 * d1;
  }
  double expect = std::sqrt(acc / static_cast<double>(samples.size()));
  CHECK(distortion(bw, bwe, metric) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("sup-finite distortion of equal tables is zero") {
  FiniteChain fc;
  MetricSpec sup = MetricSpec::sup_finite();
  CHECK(distortion(fc.rep.boxes.at("t1"), fc.rep.boxes.at("t1"), sup) == 0.0);

  SemanticBox other = fc.rep.boxes.at("t1");
  other.table[0] = (other.table[0] + 1) % 3;
  CHECK(distortion(fc.rep.boxes.at("t1"), other, sup) == 1.0);
}

TEST_CASE("kl metric requires stochastic rows and is zero on equal boxes") {
  ObjectSpec v2 = {WireSpec::of(WireType::vector("A", 2))};
  // Averaging box keeps rows stochastic for stochastic inputs.
  SemanticBox avg = SemanticBox::linear(v2, v2, {0.5, 0.5, 0.5, 0.5});
  MetricSpec kl = MetricSpec::kl(7, 8);
  kl.distribution.explicit_samples = {{vec({0.25, 0.75})}, {vec({0.9, 0.1})}};
  CHECK(distortion(avg, avg, kl) == 0.0);

  SemanticBox skew = SemanticBox::linear(v2, v2, {0.75, 0.25, 0.25, 0.75});
  CHECK(distortion(avg, skew, kl) > 0.0);

  SemanticBox notstoch = SemanticBox::linear(v2, v2, {2.0, 0.0, 0.0, 2.0});
  CHECK_THROWS_AS(distortion(avg, notstoch, kl), Error);
}

TEST_CASE("behavioural distortion of a model against itself is zero") {
  RealChain rc;
  Model m{rc.chain, rc.rep};
  CHECK(behavioural_distortion(m, m, MetricSpec::l2(3, 16)) == 0.0);

  // Incompatible boundaries are rejected.
  Model id_m{identity_diagram(rc.sig, {"A", "A"}), rc.rep};
  CHECK_THROWS_AS(behavioural_distortion(m, id_m, MetricSpec::l2(3, 4)), Error);
}

TEST_CASE("full-rank factor split stays behaviourally indistinguishable") {
  // W kept as one box versus its exact full-rank factorization W = L * R;
  // chaining the factors reproduces the map up to float roundoff.
  Signature sig;
  WireType a = WireType::vector("A", 2);
  sig.add_object(a);
  sig.add_generator({"w", {a}, {a}, StructuralKind::Opaque});
  sig.add_generator({"l", {a}, {a}, StructuralKind::Opaque});
  sig.add_generator({"r", {a}, {a}, StructuralKind::Opaque});
  sig.sort();

  std::vector<double> lw{1.0, 0.0, 0.5, 1.0};
  std::vector<double> rw{0.75, -0.5, 0.0, 1.25};
  std::vector<double> w(4);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      w[static_cast<size_t>(i) * 2 + j] = lw[static_cast<size_t>(i) * 2] * rw[j] +
                                          lw[static_cast<size_t>(i) * 2 + 1] * rw[2 + j];
    }
  }
  ObjectSpec spec = object_image({a});
  Representation rep;
  rep.boxes["w"] = SemanticBox::linear(spec, spec, w);
  rep.boxes["l"] = SemanticBox::linear(spec, spec, lw);
  rep.boxes["r"] = SemanticBox::linear(spec, spec, rw);

  Model whole{single_node_diagram(sig, "w"), rep};
  Model split{compose_seq(single_node_diagram(sig, "r"), single_node_diagram(sig, "l")), rep};
  CHECK(behavioural_distortion(whole, split, MetricSpec::l2(6, 64)) <= 1e-9);
}

TEST_CASE("evaluation functoriality on composites") {
  RealChain rc;
  Diagram f = single_node_diagram(rc.sig, "f");
  Diagram g = single_node_diagram(rc.sig, "g");
  Diagram fg = compose_seq(f, g);
  for (int s = 0; s < 5; ++s) {
    Tuple x = {vec({0.1 * s, 1.0 - 0.2 * s})};
    Tuple direct = evaluate(rc.rep, fg, x);
    Tuple staged = evaluate(rc.rep, g, evaluate(rc.rep, f, x));
    REQUIRE(direct.size() == staged.size());
    for (size_t i = 0; i < direct.size(); ++i) {
      CHECK(std::abs(direct[i].vec[0] - staged[i].vec[0]) <= 1e-9);
      CHECK(std::abs(direct[i].vec[1] - staged[i].vec[1]) <= 1e-9);
    }
  }

  FiniteChain fc;
  Diagram t1 = single_node_diagram(fc.sig, "t1");
  Diagram t2 = single_node_diagram(fc.sig, "t2");
  Diagram t12 = compose_seq(t1, t2);
  for (int s = 0; s < 2; ++s) {
    Tuple x = {Value::symbol(s)};
    CHECK(evaluate(fc.rep, t12, x) == evaluate(fc.rep, t2, evaluate(fc.rep, t1, x)));
  }
}

TEST_CASE("parallel split evaluates halves independently") {
  RealChain rc;
  FiniteChain fc;
  Diagram f = single_node_diagram(rc.sig, "f");
  Diagram t1 = single_node_diagram(fc.sig, "t1");
  Diagram par = compose_par(f, t1);
  Representation rep;
  rep.boxes = rc.rep.boxes;
  for (const auto& [k, v] : fc.rep.boxes) rep.boxes[k] = v;

  Tuple x1 = {vec({1.0, -1.0})};
  Tuple x2 = {Value::symbol(1)};
  Tuple joint = {x1[0], x2[0]};
  Tuple out = evaluate(rep, par, joint);
  Tuple left = evaluate(rc.rep, f, x1);
  Tuple right = evaluate(fc.rep, t1, x2);
  REQUIRE(out.size() == 2);
  CHECK(out[0] == left[0]);
  CHECK(out[1] == right[0]);
}

TEST_CASE("evaluation is independent of node order") {
  RealChain rc;
  Signature sig = rc.sig;
  WireType a = sig.object("A");
  sig.add_generator(make_copy(a));
  sig.add_generator(make_discard(a));
  Diagram d = compose_seq(single_node_diagram(sig, "~copy(A)"),
                          compose_par(single_node_diagram(sig, "f"),
                                      single_node_diagram(sig, "g")));
  Tuple x = {vec({0.5, 0.25})};
  Tuple base = evaluate(rc.rep, d, x);
  for (uint64_t s = 0; s < 6; ++s) {
    Diagram shuffled = shuffle_nodes(d, s);
    CHECK(evaluate(rc.rep, shuffled, x) == base);
  }
  CHECK(evaluate(rc.rep, canonicalize(d), x) == base);
}

TEST_CASE("metric axioms at test scale") {
  ObjectSpec v2 = {WireSpec::of(WireType::vector("A", 2))};
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto rand_box = [&] {
      std::vector<double> w(4);
      for (double& x : w) x = rng.uniform(-2.0, 2.0);
      return SemanticBox::linear(v2, v2, w);
    };
    SemanticBox a = rand_box(), b = rand_box(), c = rand_box();
    MetricSpec metric = MetricSpec::l2(trial, 24);
    double ab = distortion(a, b, metric);
    double ba = distortion(b, a, metric);
    double ac = distortion(a, c, metric);
    double cb = distortion(c, b, metric);
    CHECK(std::abs(ab - ba) <= 1e-9);
    CHECK(ab <= ac + cb + 1e-9);
  }

  // sup-finite symmetry and triangle on random tables.
  ObjectSpec f3 = {WireSpec::of(WireType::finite("F3", {"p", "q", "r"}))};
  for (int trial = 0; trial < 20; ++trial) {
    auto rand_table = [&] {
      std::vector<int> t(3);
      for (int& x : t) x = static_cast<int>(rng.below(3));
      return SemanticBox::finite_table(f3, f3, t);
    };
    SemanticBox a = rand_table(), b = rand_table(), c = rand_table();
    MetricSpec sup = MetricSpec::sup_finite();
    CHECK(distortion(a, b, sup) == distortion(b, a, sup));
    CHECK(distortion(a, b, sup) <= distortion(a, c, sup) + distortion(c, b, sup) + 1e-9);
  }
}

TEST_CASE("sample distributions replay deterministically with per-wire ranges") {
  ObjectSpec dom = {WireSpec::of(WireType::vector("A", 2)),
                    WireSpec::of(WireType::finite("F", {"x", "y", "z"}))};
  SampleDistribution dist;
  dist.seed = 123;
  dist.count = 16;
  dist.wire_ranges = {{0.0, 1.0}};  // first wire restricted; second is finite

  std::vector<Tuple> a = dist.draw(dom);
  std::vector<Tuple> b = dist.draw(dom);
  REQUIRE(a.size() == 16);
  CHECK(a == b);
  for (const auto& t : a) {
    for (double v : t[0].vec) {
      CHECK(v >= 0.0);
      CHECK(v < 1.0);
    }
    CHECK(t[1].finite);
    CHECK(t[1].sym >= 0);
    CHECK(t[1].sym < 3);
  }

  SampleDistribution expl;
  expl.explicit_samples = {a[0], a[1]};
  CHECK(expl.draw(dom).size() == 2);
}

TEST_CASE("shape mismatch errors name the offending node") {
  RealChain rc;
  Representation bad = rc.rep;
  ObjectSpec v2 = {WireSpec::of(WireType::vector("A", 2))};
  ObjectSpec v3 = {WireSpec::of(WireType::vector("A", 3))};
  bad.boxes["g"] = SemanticBox::linear(v3, v3, std::vector<double>(9, 0.0));
  try {
    evaluate(bad, rc.chain, {vec({1.0, 2.0})});
    FAIL("expected shape mismatch");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("g") != std::string::npos);
  }
  (void)v2;
}
