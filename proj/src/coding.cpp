#include "cmod/coding.hpp"

#include <algorithm>

namespace cmod {

namespace {

// MSB-first big-endian increment; false on overflow of the fixed width.
bool increment(std::vector<bool>& bits) {
  for (auto it = bits.rbegin(); it != bits.rend(); ++it) {
    if (!*it) {
      *it = true;
      return true;
    }
    *it = false;
  }
  return false;
}

long double kraft_sum(const std::map<std::string, uint64_t>& lengths,
                      std::optional<uint64_t> extra) {
  long double sum = 0.0L;
  for (const auto& [sym, len] : lengths) {
    (void)sym;
    sum += std::exp2l(-static_cast<long double>(len));
  }
  if (extra) sum += std::exp2l(-static_cast<long double>(*extra));
  return sum;
}

}  // namespace

PrefixCode PrefixCode::build(const std::map<std::string, uint64_t>& lengths,
                             std::optional<uint64_t> unlabeled_len) {
  constexpr long double kSlack = 1e-12L;
  require_domain(kraft_sum(lengths, std::nullopt) <= 1.0L + kSlack,
                 "label code lengths violate the Kraft inequality");

  bool with_unlabeled = false;
  if (unlabeled_len && kraft_sum(lengths, unlabeled_len) <= 1.0L + kSlack) {
    with_unlabeled = true;
  }

  struct Item {
    std::string symbol;
    uint64_t len;
  };
  std::vector<Item> items;
  items.reserve(lengths.size() + 1);
  for (const auto& [sym, len] : lengths) {
    require_domain(!sym.empty(), "empty label name");
    items.push_back({sym, len});
  }
  if (with_unlabeled) items.push_back({kUnlabeled, *unlabeled_len});
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    return a.len != b.len ? a.len < b.len : a.symbol < b.symbol;
  });

  PrefixCode code;
  code.has_unlabeled_ = with_unlabeled;
  code.trie_.emplace_back();

  std::vector<bool> word;
  for (size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    require_domain(item.len >= 1 || items.size() == 1,
                   "zero-length codeword in a multi-symbol code");
    if (i == 0) {
      word.assign(item.len, false);
    } else {
      bool ok = increment(word);
      require_domain(ok, "prefix code construction overflow");
      word.resize(item.len, false);
    }
    code.symbols_.push_back(item.symbol);
    code.words_.push_back(word);
    code.insert(static_cast<int>(i));
  }
  return code;
}

void PrefixCode::insert(int symbol_index) {
  int node = 0;
  for (bool b : words_[symbol_index]) {
    int next = trie_[node].child[b ? 1 : 0];
    if (next < 0) {
      next = static_cast<int>(trie_.size());
      trie_[node].child[b ? 1 : 0] = next;
      trie_.emplace_back();
    }
    node = next;
    require_domain(trie_[node].symbol < 0, "codeword prefix collision");
  }
  require_domain(trie_[node].child[0] < 0 && trie_[node].child[1] < 0,
                 "codeword prefix collision");
  trie_[node].symbol = symbol_index;
}

void PrefixCode::write(BitWriter& w, const std::string& symbol) const {
  for (size_t i = 0; i < symbols_.size(); ++i) {
    if (symbols_[i] == symbol) {
      for (bool b : words_[i]) w.put_bit(b ? 1 : 0);
      return;
    }
  }
  if (symbol == kUnlabeled) fail_domain("code has no room for unlabeled elements");
  fail_domain("symbol '" + symbol + "' not in prefix code");
}

std::string PrefixCode::read(BitReader& r) const {
  // A code with a single zero-length word consumes no bits.
  if (symbols_.size() == 1 && words_[0].empty()) return symbols_[0];
  int node = 0;
  while (trie_[node].symbol < 0) {
    int b = r.get_bit();
    node = trie_[node].child[b];
    if (node < 0) fail_parse("invalid codeword in bitstream");
  }
  return symbols_[trie_[node].symbol];
}

uint64_t PrefixCode::length_of(const std::string& symbol) const {
  for (size_t i = 0; i < symbols_.size(); ++i) {
    if (symbols_[i] == symbol) return words_[i].size();
  }
  fail_domain("symbol '" + symbol + "' not in prefix code");
}

}  // namespace cmod
