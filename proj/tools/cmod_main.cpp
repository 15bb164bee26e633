// cmod - inspect, cost, refine, and render compositional models.
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "cmod/mdl.hpp"
#include "cmod/refine.hpp"
#include "cmod/zoo.hpp"

namespace {

using namespace cmod;

struct CliOverrides {
  std::optional<int> q;
  std::optional<uint64_t> kappa;
  std::optional<double> tau;
  std::optional<double> tau_b;
  std::optional<double> eps_global;
  std::optional<double> eps_local;
  std::optional<uint64_t> seed;
  std::optional<std::string> metric;
  std::optional<int> samples;
  std::optional<int> max_iters;
  std::string out_path;
  bool verbose = false;
};

std::string g17(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool use_color() {
  if (std::getenv("CMOD_NO_COLOR") != nullptr) return false;
  return isatty(fileno(stdout)) != 0;
}

std::string heading(const std::string& text) {
  if (use_color()) return "\x1b[1m" + text + "\x1b[0m";
  return text;
}

// File config with command-line flags layered on top.
BundleConfig effective_config(const Bundle& bundle, const CliOverrides& cli) {
  BundleConfig config = bundle.config;
  if (cli.q) config.q = cli.q;
  if (cli.kappa) config.kappa = cli.kappa;
  if (cli.tau) config.tau = cli.tau;
  if (cli.tau_b) config.tau_b = cli.tau_b;
  if (cli.eps_global) config.eps_global = cli.eps_global;
  if (cli.eps_local) config.eps_local = cli.eps_local;
  if (cli.seed) config.seed = cli.seed;
  if (cli.metric) config.metric = cli.metric;
  if (cli.samples) config.samples = cli.samples;
  if (cli.max_iters) config.max_iters = cli.max_iters;
  return config;
}

void print_config_header(std::ostream& out, const BundleConfig& config) {
  SearchConfig sc = search_config_from(config);
  out << "# q=" << sc.scheme.q << " presence_flags=" << (sc.scheme.presence_flags ? 1 : 0)
      << " kappa=" << config.kappa.value_or(32) << " tau=" << g17(sc.tau)
      << " tau_b=" << g17(sc.tau_b) << " eps_global=" << g17(sc.eps_global)
      << " eps_local=" << g17(sc.eps_local) << " seed=" << sc.seed
      << " metric=" << config.metric.value_or("l2") << " samples=" << config.samples.value_or(64)
      << " max_iters=" << sc.max_iterations << "\n";
}

void print_cost_report(std::ostream& out, const CostReport& report) {
  char line[128];
  std::snprintf(line, sizeof line, "  %-14s %12llu bits\n", "wiring",
                static_cast<unsigned long long>(report.wiring_bits));
  out << line;
  std::snprintf(line, sizeof line, "  %-14s %12llu bits\n", "components",
                static_cast<unsigned long long>(report.component_bits));
  out << line;
  std::snprintf(line, sizeof line, "  %-14s %12llu bits\n", "representation",
                static_cast<unsigned long long>(report.rep_bits));
  out << line;
  std::snprintf(line, sizeof line, "  %-14s %12llu bits\n", "interpretation",
                static_cast<unsigned long long>(report.int_bits));
  out << line;
  std::snprintf(line, sizeof line, "  %-14s %12llu bits\n", "total",
                static_cast<unsigned long long>(report.total_bits));
  out << line;
  out << "wiring_bits=" << report.wiring_bits << "\n";
  out << "component_bits=" << report.component_bits << "\n";
  for (const auto& [gen, bits] : report.per_generator) {
    out << "component_bits[" << gen << "]=" << bits << "\n";
  }
  out << "rep_bits=" << report.rep_bits << "\n";
  out << "int_bits=" << report.int_bits << "\n";
  out << "total_bits=" << report.total_bits << "\n";
}

CostReport bundle_cost(const Bundle& bundle, const BundleConfig& config) {
  CodingScheme scheme = scheme_from_config(config);
  Bundle priced = bundle;
  priced.config = config;
  InterpretationCostOracle oracle = oracle_from_config(priced);
  Model m = normalized(bundle.model);
  // The file's own syntactic labeling is priced; a conflicting grounding is
  // a domain error surfaced by total_cost.
  return total_cost(m, bundle.syntactic, bundle.posthoc, scheme, oracle);
}

std::string default_out(const std::string& input, const std::string& suffix) {
  std::string stem = input;
  size_t dot = stem.rfind(".cmod");
  if (dot != std::string::npos && dot == stem.size() - 5) stem = stem.substr(0, dot);
  return stem + suffix;
}

int cmd_show(const std::string& path, const CliOverrides& cli) {
  Bundle bundle = load(path);
  Model m = normalized(bundle.model);
  const Signature& sig = m.diagram.signature;
  size_t opaque = 0;
  for (const auto& g : sig.generators) {
    if (!g.is_structural()) ++opaque;
  }
  std::cout << heading("model " + path) << "\n";
  std::cout << "wires=" << sig.objects.size() << "\n";
  std::cout << "generators=" << sig.generators.size() << "\n";
  std::cout << "opaque_boxes=" << opaque << "\n";
  std::cout << "nodes=" << m.diagram.nodes.size() << "\n";
  std::cout << "edges=" << m.diagram.edges.size() << "\n";
  std::cout << "inputs=" << m.diagram.input_types.size() << "\n";
  std::cout << "outputs=" << m.diagram.output_types.size() << "\n";
  std::cout << "interpretation=" << (bundle.has_interpretation() ? "present" : "absent") << "\n";
  std::cout << "completeness=" << g17(completeness(bundle.syntactic, signature_of(m.diagram)))
            << "\n";
  if (cli.verbose) {
    for (const auto& g : sig.generators) {
      std::cout << "generator " << g.name << " (" << structural_kind_name(g.kind) << ")\n";
    }
  }
  return 0;
}

int cmd_cost(const std::string& path, const CliOverrides& cli) {
  Bundle bundle = load(path);
  BundleConfig config = effective_config(bundle, cli);
  print_config_header(std::cout, config);
  print_cost_report(std::cout, bundle_cost(bundle, config));
  return 0;
}

int cmd_refine(const std::string& path, const CliOverrides& cli) {
  Bundle bundle = load(path);
  BundleConfig config = effective_config(bundle, cli);
  SearchConfig sc = search_config_from(config);
  CodingScheme scheme = sc.scheme;
  Bundle priced = bundle;
  priced.config = config;
  InterpretationCostOracle oracle = oracle_from_config(priced);

  print_config_header(std::cout, config);
  std::cout << heading("== before ==") << "\n";
  print_cost_report(std::cout, bundle_cost(bundle, config));

  Model original = normalized(bundle.model);
  auto [refined, trace] = search_compressive(original, sc, &bundle.posthoc, &oracle);

  Bundle out_bundle = bundle;
  out_bundle.model = refined;
  out_bundle.syntactic =
      induce_syntactic(bundle.posthoc, refined.rep, signature_of(refined.diagram), scheme);

  std::cout << heading("== after ==") << "\n";
  print_cost_report(std::cout, trace.final_report);

  double global = trace.steps.empty()
                      ? 0.0
                      : behavioural_distortion(original, refined, sc.metric);
  std::cout << "steps=" << trace.steps.size() << "\n";
  std::cout << "global_distortion=" << g17(global) << "\n";

  std::string model_path = cli.out_path.empty() ? default_out(path, ".refined.cmod") : cli.out_path;
  std::string trace_path = default_out(model_path, ".trace");
  save(out_bundle, model_path);
  {
    std::ofstream tf(trace_path, std::ios::binary);
    if (!tf) fail_io("cannot open '" + trace_path + "' for writing");
    tf << trace_to_text(trace);
    if (!tf) fail_io("failed writing '" + trace_path + "'");
  }
  std::cout << "wrote_model=" << model_path << "\n";
  std::cout << "wrote_trace=" << trace_path << "\n";
  return 0;
}

int cmd_parsimony(const std::string& before_path, const std::string& after_path,
                  const CliOverrides& cli) {
  Bundle before = load(before_path);
  Bundle after = load(after_path);
  BundleConfig config = effective_config(before, cli);
  CodingScheme scheme = scheme_from_config(config);

  // Shared grounding: the two files' semantic labelings must agree wherever
  // they overlap; the check runs over their union.
  PostHocInterpretation ic = before.posthoc;
  for (const auto& [fp, entry] : after.posthoc.by_fingerprint) {
    auto it = ic.by_fingerprint.find(fp);
    if (it != ic.by_fingerprint.end() && it->second.label != entry.label) {
      fail_domain("grounding mismatch: fingerprint labeled '" + it->second.label + "' and '" +
                  entry.label + "'");
    }
    ic.by_fingerprint[fp] = entry;
  }
  ExplanationSignature vocab = before.vocabulary;
  for (const auto& l : after.vocabulary.labels) {
    if (const auto* existing = vocab.find(l.name)) {
      if (existing->gloss != l.gloss) {
        fail_domain("grounding mismatch: label '" + l.name + "' glossed differently");
      }
    } else {
      vocab.add(l.name, l.gloss);
    }
  }
  InterpretationCostOracle oracle = label_code_oracle(vocab, config.kappa.value_or(32));

  print_config_header(std::cout, config);
  ParsimonyReport report =
      check_parsimony(normalized(before.model), normalized(after.model), ic, oracle, scheme);
  std::cout << "lhs_rep_decrease=" << report.lhs << "\n";
  std::cout << "rhs_int_increase=" << report.rhs << "\n";
  std::cout << "total_before=" << report.total_before << "\n";
  std::cout << "total_after=" << report.total_after << "\n";
  std::cout << "criterion_holds=" << (report.criterion_holds ? "yes" : "no") << "\n";
  std::cout << "PARSIMONIOUS: " << (report.verdict ? "yes" : "no") << "\n";
  return 0;
}

int cmd_render(const std::string& path, const CliOverrides& cli) {
  Bundle bundle = load(path);
  std::string dot = to_dot(bundle.model.diagram);
  std::string out_path = cli.out_path.empty() ? default_out(path, ".dot") : cli.out_path;
  std::ofstream out(out_path, std::ios::binary);
  if (!out) fail_io("cannot open '" + out_path + "' for writing");
  out << dot;
  if (!out) fail_io("failed writing '" + out_path + "'");
  std::cout << "wrote_dot=" << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"compositional model toolkit"};
  app.require_subcommand(1);

  CliOverrides cli;
  std::string input, input_after;

  auto add_common = [&](CLI::App* cmd, bool with_out) {
    auto opt = [&](const char* name, auto& slot, const char* help) {
      using T = typename std::decay_t<decltype(slot)>::value_type;
      cmd->add_option_function<T>(name, [&slot](const T& v) { slot = v; }, help);
    };
    opt("--q", cli.q, "parameter resolution in bits");
    opt("--kappa", cli.kappa, "unlabeled-element penalty in bits");
    opt("--tau", cli.tau, "sparsify threshold");
    opt("--tau-b", cli.tau_b, "block-split threshold");
    opt("--eps-global", cli.eps_global, "global distortion budget");
    opt("--eps-local", cli.eps_local, "per-box distortion budget");
    opt("--seed", cli.seed, "seed for sampled metrics");
    opt("--metric", cli.metric, "metric kind: l2 | kl | sup");
    opt("--samples", cli.samples, "metric sample count");
    opt("--max-iters", cli.max_iters, "search iteration cap");
    if (with_out) cmd->add_option("--out", cli.out_path, "output path");
    cmd->add_flag("-v,--verbose", cli.verbose, "verbose output");
  };

  CLI::App* show = app.add_subcommand("show", "summarize a model file");
  show->add_option("path", input, "model file")->required();
  add_common(show, false);

  CLI::App* cost = app.add_subcommand("cost", "print the description-length report");
  cost->add_option("path", input, "model file")->required();
  add_common(cost, false);

  CLI::App* refine = app.add_subcommand("refine", "search for compressive refinements");
  refine->add_option("path", input, "model file")->required();
  add_common(refine, true);

  CLI::App* parsimony = app.add_subcommand("parsimony", "compare two groundings of one model");
  parsimony->add_option("before", input, "model file before refinement")->required();
  parsimony->add_option("after", input_after, "model file after refinement")->required();
  add_common(parsimony, false);

  CLI::App* render = app.add_subcommand("render", "emit a DOT rendering");
  render->add_option("path", input, "model file")->required();
  add_common(render, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (show->parsed()) return cmd_show(input, cli);
    if (cost->parsed()) return cmd_cost(input, cli);
    if (refine->parsed()) return cmd_refine(input, cli);
    if (parsimony->parsed()) return cmd_parsimony(input, input_after, cli);
    if (render->parsed()) return cmd_render(input, cli);
  } catch (const cmod::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == cmod::ErrorKind::Domain ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
