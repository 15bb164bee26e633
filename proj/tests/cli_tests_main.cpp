// End-to-end checks of the cmod command-line tool. argv[1] is the binary.
#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "cmod/refine.hpp"
#include "cmod/zoo.hpp"

namespace {

int g_failures = 0;

#define EXPECT(cond, what)                                              \
  do {                                                                  \
    if (!(cond)) {                                                      \
      std::cerr << "FAIL: " << what << " (" << __FILE__ << ":" << __LINE__ << ")\n"; \
      ++g_failures;                                                     \
    }                                                                   \
  } while (0)

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

RunResult run(const std::string& command) {
  std::string out_path = "cli_stdout.txt";
  std::string err_path = "cli_stderr.txt";
  int status = std::system((command + " >" + out_path + " 2>" + err_path).c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out_path);
  r.err = slurp(err_path);
  return r;
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

std::string value_of(const std::string& out, const std::string& key) {
  std::istringstream in(out);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(key + "=", 0) == 0) return line.substr(key.size() + 1);
  }
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: cli_tests <path-to-cmod-binary>\n";
    return 2;
  }
  std::string cmod = std::filesystem::absolute(argv[1]).string();

  auto dir = std::filesystem::temp_directory_path() / "cmod_cli_tests";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  std::filesystem::current_path(dir);

  cmod::save(cmod::build_fig1(), "fig1.cmod");

  // show: summary fields and the completeness fraction.
  RunResult show = run(cmod + " show fig1.cmod");
  EXPECT(show.exit_code == 0, "show exits 0");
  EXPECT(value_of(show.out, "opaque_boxes") == "1", "fig1 has one opaque box");
  EXPECT(value_of(show.out, "completeness") == "1", "fig1 completeness is 1");

  // show on a missing file exits 2.
  RunResult missing = run(cmod + " show not_there.cmod");
  EXPECT(missing.exit_code == 2, "missing file exits 2");

  // cost: determinism and the additive identities.
  RunResult cost1 = run(cmod + " cost fig1.cmod");
  RunResult cost2 = run(cmod + " cost fig1.cmod");
  EXPECT(cost1.exit_code == 0, "cost exits 0");
  EXPECT(cost1.out == cost2.out, "cost output is deterministic");
  {
    uint64_t wiring = std::stoull(value_of(cost1.out, "wiring_bits"));
    uint64_t comp = std::stoull(value_of(cost1.out, "component_bits"));
    uint64_t rep = std::stoull(value_of(cost1.out, "rep_bits"));
    uint64_t intb = std::stoull(value_of(cost1.out, "int_bits"));
    uint64_t total = std::stoull(value_of(cost1.out, "total_bits"));
    EXPECT(rep == wiring + comp, "rep = wiring + components");
    EXPECT(total == rep + intb, "total = rep + int");
    EXPECT(contains(cost1.out, "# q=16"), "cost echoes the effective config");
  }

  // refine: block split appears in the trace, outputs reload, and reruns are
  // byte-identical.
  RunResult ref1 = run(cmod + " refine fig1.cmod --out refined_a.cmod");
  EXPECT(ref1.exit_code == 0, "refine exits 0");
  std::string trace_a = slurp("refined_a.trace");
  EXPECT(contains(trace_a, "pass=block_diagonalize"), "trace holds a block-diagonalize step");
  {
    size_t lines = 0;
    for (char c : trace_a) {
      if (c == '\n') ++lines;
    }
    EXPECT(lines == std::stoull(value_of(ref1.out, "steps")),
           "trace line count equals accepted steps");
  }
  cmod::Bundle refined = cmod::load("refined_a.cmod");
  EXPECT(refined.model.diagram.nodes.size() == 4, "refined fig1 has four boxes");
  EXPECT(cmod::is_connectivity_isomorphic(refined.model.diagram,
                                          cmod::fig1_refined_model().diagram),
         "refined fig1 matches the hand-built reference");

  // Identical flags and seed: byte-identical model, trace, and report.
  std::filesystem::copy_file("refined_a.cmod", "first_model.bak");
  std::filesystem::copy_file("refined_a.trace", "first_trace.bak");
  RunResult ref2 = run(cmod + " refine fig1.cmod --out refined_a.cmod");
  EXPECT(ref1.out == ref2.out, "refine stdout is deterministic");
  EXPECT(slurp("refined_a.cmod") == slurp("first_model.bak"), "refined models byte-identical");
  EXPECT(slurp("refined_a.trace") == slurp("first_trace.bak"), "traces byte-identical");

  // refine with a zero budget on a noisy model: empty trace, still exit 0.
  {
    cmod::SparseEntangledModel se = cmod::build_sparse_entangled({2, 2}, 1e-3, 4);
    cmod::Bundle nb;
    nb.model = se.model;
    cmod::save(nb, "noisy.cmod");
    RunResult r = run(cmod + " refine noisy.cmod --eps-global 0 --out noisy_out.cmod");
    EXPECT(r.exit_code == 0, "zero-budget refine exits 0");
    EXPECT(value_of(r.out, "steps") == "0", "zero-budget refine accepts nothing");
  }

  // parsimony: identical files give zero deltas and a yes verdict.
  RunResult psame = run(cmod + " parsimony fig1.cmod fig1.cmod");
  EXPECT(psame.exit_code == 0, "parsimony exits 0");
  EXPECT(value_of(psame.out, "lhs_rep_decrease") == "0", "before=after has lhs 0");
  EXPECT(value_of(psame.out, "rhs_int_increase") == "0", "before=after has rhs 0");
  EXPECT(contains(psame.out, "PARSIMONIOUS: yes"), "before=after is parsimonious");

  RunResult pref = run(cmod + " parsimony fig1.cmod refined_a.cmod");
  EXPECT(pref.exit_code == 0, "fig1 parsimony exits 0");
  EXPECT(contains(pref.out, "PARSIMONIOUS: yes"), "fig1 refinement is parsimonious");

  // Adversarial kappa: pricing the unlabeled permutation fingerprints above
  // the rep saving flips the verdict.
  RunResult padv = run(cmod + " parsimony fig1.cmod refined_a.cmod --kappa 200");
  EXPECT(padv.exit_code == 0, "adversarial parsimony exits 0");
  EXPECT(contains(padv.out, "PARSIMONIOUS: no"), "adversarial kappa flips the verdict");

  // Grounding mismatch exits 1.
  {
    std::string text = slurp("fig1.cmod");
    size_t at = text.find("sem entangled-mix");
    EXPECT(at != std::string::npos, "fig1 text has the sem line");
    std::string conflicted = text;
    conflicted.replace(at, std::string("sem entangled-mix").size(), "sem animal-mechanism");
    std::ofstream out("conflicted.cmod", std::ios::binary);
    out << conflicted;
    out.close();
    RunResult r = run(cmod + " parsimony fig1.cmod conflicted.cmod");
    EXPECT(r.exit_code == 1, "grounding mismatch exits 1");
  }

  // render: deterministic DOT output matching the library path (golden).
  RunResult render = run(cmod + " render fig1.cmod --out fig1.dot");
  EXPECT(render.exit_code == 0, "render exits 0");
  std::string dot = slurp("fig1.dot");
  EXPECT(contains(dot, "digraph"), "render emits DOT");
  EXPECT(contains(dot, "mix"), "render names the box");
  EXPECT(dot == cmod::to_dot(cmod::build_fig1().model.diagram),
         "render matches the library rendering");
  RunResult render2 = run(cmod + " render fig1.cmod --out fig1_b.dot");
  EXPECT(dot == slurp("fig1_b.dot"), "render is deterministic");
  {
    RunResult r = run(cmod + " render refined_a.cmod --out refined.dot");
    EXPECT(r.exit_code == 0, "render refined exits 0");
    std::string refined_dot = slurp("refined.dot");
    EXPECT(contains(refined_dot, "mix__b0"), "refined render shows the first block chain");
    EXPECT(contains(refined_dot, "mix__b1"), "refined render shows the second block chain");
  }

  // Usage errors exit 2.
  RunResult usage = run(cmod + " frobnicate x.cmod");
  EXPECT(usage.exit_code == 2, "unknown subcommand exits 2");

  if (g_failures == 0) {
    std::cout << "cli tests passed\n";
    return 0;
  }
  std::cerr << g_failures << " cli test failures\n";
  return 1;
}
