#include <cstdio>
#include <filesystem>

#include "cmod/mdl.hpp"
#include "cmod/zoo.hpp"
#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace cmod;
using namespace cmod::testing;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("fig1 behaviour equals direct block computation on a sample grid") {
  Bundle fig = build_fig1();
  const SemanticBox& mix = fig.model.rep.boxes.at("mix");
  REQUIRE(mix.rows == 4);

  // Oracle: y[a-slots] = B_animal [x0, x2], y[c-slots] = B_colour [x1, x3].
  double ba[4] = {0.5, -0.25, 0.75, 1.0};
  double bc[4] = {1.25, 0.5, -0.5, 0.75};
  int grid = 0;
  for (double s = -1.0; s <= 1.0 && grid < 16; s += 0.5) {
    for (double t = -1.0; t <= 1.0 && grid < 16; t += 0.5) {
      ++grid;
      Tuple x = {Value::vector({s, t, -s, 0.25 * t})};
      Tuple y = evaluate(fig.model.rep, fig.model.diagram, x);
      double a0 = ba[0] * s + ba[1] * (-s);
      double a1 = ba[2] * s + ba[3] * (-s);
      double c0 = bc[0] * t + bc[1] * (0.25 * t);
      double c1 = bc[2] * t + bc[3] * (0.25 * t);
      CHECK(y[0].vec[0] == doctest::Approx(a0).epsilon(1e-12));
      CHECK(y[0].vec[1] == doctest::Approx(c0).epsilon(1e-12));
      CHECK(y[0].vec[2] == doctest::Approx(a1).epsilon(1e-12));
      CHECK(y[0].vec[3] == doctest::Approx(c1).epsilon(1e-12));
    }
  }
  CHECK(grid == 16);
}

TEST_CASE("fig1 search disentangles into the hand-built reference") {
  Bundle fig = build_fig1();
  SearchConfig config = search_config_from(fig.config);
  CHECK_FALSE(config.scheme.presence_flags);

  uint64_t before = rep_complexity(fig.model, config.scheme);
  auto [out, trace] = search_compressive(fig.model, config);
  REQUIRE_FALSE(trace.steps.empty());
  bool has_block = false;
  for (const auto& step : trace.steps) {
    if (step.pass == "block_diagonalize") has_block = true;
  }
  CHECK(has_block);
  CHECK(behavioural_distortion(fig.model, out, config.metric) <= 1e-9);
  CHECK(is_connectivity_isomorphic(out.diagram, fig1_refined_model().diagram));

  uint64_t after = rep_complexity(out, config.scheme);
  CHECK(after < before);
  // Dense payload 16q against two 2x2 payloads 8q: the raw parameter saving.
  CHECK(before - after > 0);
  CHECK(16 * config.scheme.q - 8 * config.scheme.q == 128);
}

TEST_CASE("fig1 ground-truth labels commute and reconstruct exactly") {
  Bundle fig = build_fig1();
  CodingScheme scheme = scheme_from_config(fig.config);
  CHECK(check_commutes(fig.syntactic, fig.posthoc, fig.model.rep, fig.model.diagram.signature,
                       scheme)
            .empty());
  FaithfulnessReport fr =
      check_compositional_faithfulness(fig.syntactic, fig.reconstruction, fig.model.rep,
                                       fig.model.diagram.signature, MetricSpec::l2(1, 32), 0.0);
  CHECK(fr.max_distortion == 0.0);
  CHECK(fr.violations.empty());
  CHECK(completeness(fig.syntactic, fig.model.diagram.signature) == 1.0);
}

TEST_CASE("rank deficient builder matches the singular-value oracle") {
  RankDeficientModel rd = build_rank_deficient(8, 2, 11);
  const SemanticBox& box = rd.model.rep.boxes.at("low");
  CHECK(numerical_rank(box.weights, 8, 8, 1e-9) == rd.rank);

  std::vector<double> sv = jacobi_singular_values(box.weights, 8, 8);
  CHECK(sv[2] <= 1e-9);
  CHECK(sv[1] > 1e-9);

  Refinement r = pass_svd_split(rd.model, "low", 1e-6, MetricSpec::l2(11, 48));
  REQUIRE_FALSE(r.identity);
  CHECK(r.params == "rank=2");
  CHECK(r.per_box_distortion.at("low") <= 1e-6);

  CHECK_THROWS_AS(build_rank_deficient(4, 4, 1), Error);
  CHECK_THROWS_AS(build_rank_deficient(4, 0, 1), Error);
}

TEST_CASE("sparse entangled builder ground truth matches the components oracle") {
  SparseEntangledModel clean = build_sparse_entangled({2, 2}, 0.0, 3);
  const SemanticBox& cbox = clean.model.rep.boxes.at("tangle");
  std::vector<int> labels = bipartite_components(cbox.weights, 4, 4, 1e-9);
  CHECK(component_count(labels) == 2);
  Refinement r = pass_block_diagonalize(clean.model, "tangle", 1e-3, 1e-9, MetricSpec::l2(3));
  REQUIRE_FALSE(r.identity);
  CHECK(r.per_box_distortion.at("tangle") == 0.0);
  CHECK(r.new_boxes.at("tangle__p_in").perm == clean.gather);
  CHECK(r.new_boxes.at("tangle__p_out").perm == clean.scatter);

  // Noise above tau_b makes the graph a single component: identity.
  SparseEntangledModel noisy = build_sparse_entangled({2, 2}, 5e-2, 3);
  Refinement r2 = pass_block_diagonalize(noisy.model, "tangle", 1e-2, 1.0, MetricSpec::l2(3));
  CHECK(r2.identity);
}

TEST_CASE("every zoo model is functorial") {
  Bundle fig = build_fig1();
  CHECK(check_functorial(fig.model.rep, fig.model.diagram).ok());
  CHECK(check_functorial(fig1_refined_model().rep, fig1_refined_model().diagram).ok());
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    RankDeficientModel rd = build_rank_deficient(6, 2, seed);
    CHECK(check_functorial(rd.model.rep, rd.model.diagram).ok());
    SparseEntangledModel se = build_sparse_entangled({2, 3}, 1e-3, seed);
    CHECK(check_functorial(se.model.rep, se.model.diagram).ok());
    Model rm = random_model(seed);
    CHECK(check_functorial(rm.rep, rm.diagram).ok());
    Model fm = random_model(seed, {.finite_backend = true});
    CHECK(check_functorial(fm.rep, fm.diagram).ok());
  }
}

TEST_CASE("save/load round trips are exact") {
  CodingScheme scheme;
  Bundle fig = build_fig1();
  std::string path = temp_path("fig1_roundtrip.cmod");
  save(fig, path);
  Bundle back = load(path);
  CHECK(back.model == fig.model);
  CHECK(back.vocabulary == fig.vocabulary);
  CHECK(back.syntactic == fig.syntactic);
  CHECK(back.posthoc == fig.posthoc);
  CHECK(back.reconstruction == fig.reconstruction);
  CHECK(back.config == fig.config);
  CHECK(fingerprint_equal(back.model, fig.model, scheme));

  for (uint64_t seed : {5ull, 6ull}) {
    Bundle rb = random_bundle(seed, {.with_interpretation = true});
    std::string rp = temp_path("random_roundtrip.cmod");
    save(rb, rp);
    Bundle rback = load(rp);
    CHECK(rback.model == rb.model);
    CHECK(rback.posthoc == rb.posthoc);

    Bundle fb = random_bundle(seed, {.finite_backend = true, .with_interpretation = true});
    save(fb, rp);
    CHECK(load(rp).model == fb.model);
  }
  std::remove(path.c_str());
}

TEST_CASE("load rejects bad files with useful errors") {
  Bundle fig = build_fig1();
  std::string text = bundle_to_text(fig);

  // Version bump.
  std::string bumped = text;
  bumped.replace(bumped.find("cmod 1"), 6, "cmod 2");
  CHECK_THROWS_AS(bundle_from_text(bumped, "t"), Error);
  try {
    bundle_from_text(bumped, "t");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Parse);
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }

  // Edge referencing a missing port: parse error naming the line.
  std::string broken = text;
  size_t at = broken.find("edge in:0");
  REQUIRE(at != std::string::npos);
  broken.replace(at, 9, "edge in:7");
  try {
    bundle_from_text(broken, "t");
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Parse);
  }

  // Unknown future field: version error.
  std::string unknown = text + "[config]\nshiny_new_knob 3\n";
  try {
    bundle_from_text(unknown, "t");
    FAIL("expected version error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("newer version") != std::string::npos);
  }

  // Arity inconsistency between a box and its generator.
  std::string bad_arity = text;
  size_t bat = bad_arity.find("box mix linear [v4] [v4]");
  REQUIRE(bat != std::string::npos);
  bad_arity.replace(bat, 24, "box mix linear [v2] [v2]");
  // Trim the extra matrix entries by rebuilding the line.
  {
    size_t line_end = bad_arity.find('\n', bat);
    std::string line = "box mix linear [v2] [v2] 0x1p-1 0x1p-1 0x1p-1 0x1p-1";
    bad_arity = bad_arity.substr(0, bat) + line + bad_arity.substr(line_end);
  }
  try {
    bundle_from_text(bad_arity, "t");
    FAIL("expected arity error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("arity") != std::string::npos);
  }

  // Missing file is an io error.
  CHECK_THROWS_AS(load(temp_path("no_such_file_xyz.cmod")), Error);
}

TEST_CASE("random models round trip through the bit coder") {
  CodingScheme scheme;
  for (uint64_t seed = 0; seed < 8; ++seed) {
    for (bool finite : {false, true}) {
      Bundle rb = random_bundle(seed, {.finite_backend = finite, .with_interpretation = true});
      Model m = normalized(rb.model);
      InterpretationCostOracle oracle = oracle_from_config(rb);
      SyntacticInterpretation is_ =
          induce_syntactic(rb.posthoc, m.rep, signature_of(m.diagram), scheme);
      CostReport report = total_cost(m, is_, rb.posthoc, scheme, oracle);
      EncodedModel enc = encode(m, is_, rb.posthoc, scheme, oracle);
      CHECK(enc.payload_bits() == report.total_bits);
      DecodeResult back = decode(enc.container, scheme, m.diagram.signature, oracle);
      CHECK(fingerprint_equal(back.model, m, scheme));
    }
  }
}
