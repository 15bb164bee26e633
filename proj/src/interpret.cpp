#include "cmod/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cmod {

void ExplanationSignature::add(const std::string& name, const std::string& gloss) {
  require_domain(!name.empty(), "label name must be nonempty");
  for (char c : name) {
    require_domain(c > ' ', "label name '" + name + "' contains whitespace");
  }
  require_domain(!has(name), "duplicate label '" + name + "'");
  labels.push_back({name, gloss});
}

bool ExplanationSignature::has(const std::string& name) const { return find(name) != nullptr; }

const ExplanationSignature::Label* ExplanationSignature::find(const std::string& name) const {
  for (const auto& l : labels) {
    if (l.name == name) return &l;
  }
  return nullptr;
}

uint64_t ExplanationSignature::code_length(const std::string& name) const {
  const Label* l = find(name);
  if (!l) fail_domain("label '" + name + "' not in vocabulary");
  return uniform_bits() + 8 * static_cast<uint64_t>(l->gloss.size());
}

std::map<std::string, uint64_t> ExplanationSignature::code_lengths() const {
  std::map<std::string, uint64_t> out;
  for (const auto& l : labels) out[l.name] = code_length(l.name);
  return out;
}

void ExplanationSignature::validate() const {
  long double sum = 0.0L;
  for (const auto& l : labels) {
    sum += std::exp2l(-static_cast<long double>(code_length(l.name)));
  }
  require_domain(sum <= 1.0L + 1e-12L, "label code lengths violate the Kraft inequality");
}

InterpretationCostOracle label_code_oracle(const ExplanationSignature& vocab, uint64_t kappa) {
  vocab.validate();
  InterpretationCostOracle oracle;
  oracle.mode = InterpretationCostOracle::Mode::LabelCode;
  oracle.kappa = kappa;
  oracle.label_bits = vocab.code_lengths();
  return oracle;
}

std::string semantic_fingerprint(const SemanticBox& box, const CodingScheme& scheme) {
  std::ostringstream out;
  auto specs = [&]() {
    out << "[" << object_spec_string(box.dom_spec) << ";" << object_spec_string(box.cod_spec)
        << "]";
  };
  switch (box.variant) {
    case SemanticBox::Variant::Linear: {
      out << "lin";
      specs();
      out << ":";
      for (size_t i = 0; i < box.weights.size(); ++i) {
        if (i) out << ",";
        out << scheme.quantize(box.weights[i]);
      }
      break;
    }
    case SemanticBox::Variant::Bias: {
      out << "bias";
      specs();
      out << ":";
      for (size_t i = 0; i < box.offsets.size(); ++i) {
        if (i) out << ",";
        out << scheme.quantize(box.offsets[i]);
      }
      break;
    }
    case SemanticBox::Variant::Pointwise:
      out << "pw";
      specs();
      out << ":" << pointwise_kind_name(box.pw);
      break;
    case SemanticBox::Variant::FiniteTable: {
      out << "tab";
      specs();
      out << ":";
      for (size_t i = 0; i < box.table.size(); ++i) {
        if (i) out << ",";
        out << box.table[i];
      }
      break;
    }
    case SemanticBox::Variant::Permutation: {
      out << "perm";
      specs();
      out << ":";
      for (size_t i = 0; i < box.perm.size(); ++i) {
        if (i) out << ",";
        out << box.perm[i];
      }
      break;
    }
    case SemanticBox::Variant::Structural:
      out << "str";
      specs();
      out << ":" << structural_kind_name(box.structural);
      break;
  }
  return out.str();
}

void PostHocInterpretation::assign(const SemanticBox& box, const CodingScheme& scheme,
                                   const std::string& label) {
  std::string fp = semantic_fingerprint(box, scheme);
  auto it = by_fingerprint.find(fp);
  if (it != by_fingerprint.end()) {
    require_domain(it->second.label == label,
                   "fingerprint-equal boxes must receive equal labels ('" + it->second.label +
                       "' vs '" + label + "')");
    return;
  }
  by_fingerprint[fp] = {label, box};
}

namespace {

// Partial representations leave some generators without semantics; those can
// carry no induced label and no semantic grounding.
std::optional<SemanticBox> try_box_for(const Representation& rep, const Generator& g) {
  if (const SemanticBox* b = rep.find(g.name)) return *b;
  if (g.is_structural()) return SemanticBox::structural_box(g.kind, object_image(g.dom));
  return std::nullopt;
}

}  // namespace

SyntacticInterpretation induce_syntactic(const PostHocInterpretation& ic,
                                         const Representation& rep, const Signature& sig,
                                         const CodingScheme& scheme) {
  SyntacticInterpretation is_;
  for (const auto& g : sig.generators) {
    std::optional<SemanticBox> box = try_box_for(rep, g);
    if (!box) continue;
    std::string fp = semantic_fingerprint(*box, scheme);
    if (const std::string* label = ic.label_of(fp)) {
      is_.by_generator[g.name] = *label;
    }
  }
  return is_;
}

CommutationReport check_commutes(const SyntacticInterpretation& is_,
                                 const PostHocInterpretation& ic, const Representation& rep,
                                 const Signature& sig, const CodingScheme& scheme) {
  CommutationReport report;
  for (const auto& g : sig.generators) {
    const std::string* syn = is_.label_of(g.name);
    std::optional<SemanticBox> box = try_box_for(rep, g);
    const std::string* sem =
        box ? ic.label_of(semantic_fingerprint(*box, scheme)) : nullptr;
    if (syn && sem) {
      if (*syn != *sem) {
        report.items.push_back({g.name, CommutationReport::Kind::Conflict, *syn, *sem});
      }
    } else if (syn) {
      report.items.push_back({g.name, CommutationReport::Kind::OnlySyntactic, *syn, ""});
    } else if (sem) {
      report.items.push_back({g.name, CommutationReport::Kind::OnlySemantic, "", *sem});
    }
  }
  return report;
}

FaithfulnessReport check_compositional_faithfulness(const SyntacticInterpretation& is_,
                                                    const Reconstruction& recon,
                                                    const Representation& rep,
                                                    const Signature& sig,
                                                    const MetricSpec& metric, double eps) {
  require_domain(eps >= 0.0, "faithfulness tolerance must be nonnegative");
  FaithfulnessReport report;
  size_t labeled = 0;
  for (const auto& g : sig.generators) {
    const std::string* label = is_.label_of(g.name);
    if (!label) {
      report.uncovered.push_back(g.name);
      continue;
    }
    ++labeled;
    const SemanticBox* rbox = recon.box_of(*label);
    if (!rbox) fail_domain("reconstruction missing for label '" + *label + "'");
    SemanticBox gbox = rep.box_for(g);
    require_domain(rbox->dom_spec == gbox.dom_spec && rbox->cod_spec == gbox.cod_spec,
                   "reconstruction arity for label '" + *label +
                       "' disagrees with [[" + g.name + "]]");
    double d = distortion(gbox, *rbox, metric);
    report.max_distortion = std::max(report.max_distortion, d);
    if (d > eps) report.violations.push_back(g.name);
  }
  report.coverage = sig.generators.empty()
                        ? 1.0
                        : static_cast<double>(labeled) / static_cast<double>(sig.generators.size());
  return report;
}

double completeness(const SyntacticInterpretation& is_, const Signature& sig) {
  if (sig.generators.empty()) return 1.0;
  size_t labeled = 0;
  for (const auto& g : sig.generators) {
    if (is_.label_of(g.name)) ++labeled;
  }
  return static_cast<double>(labeled) / static_cast<double>(sig.generators.size());
}

}  // namespace cmod
