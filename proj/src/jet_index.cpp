#include "goursat/jet_index.hpp"

#include <algorithm>
#include <stdexcept>

#include "goursat/errors.hpp"

namespace goursat {

std::string canonical_index(std::string_view digits) {
  std::string s(digits);
  std::sort(s.begin(), s.end());
  return s;
}

std::string index_append(std::string_view index, int i) {
  std::string s(index);
  s.push_back(static_cast<char>('0' + i));
  return canonical_index(s);
}

int index_count(std::string_view index, int i) {
  return static_cast<int>(std::count(index.begin(), index.end(), static_cast<char>('0' + i)));
}

namespace {

void grow(int n, int order, int first, std::string& cur, std::vector<std::string>& out) {
  if (static_cast<int>(cur.size()) == order) {
    out.push_back(cur);
    return;
  }
  for (int i = first; i <= n; ++i) {
    cur.push_back(static_cast<char>('0' + i));
    grow(n, order, i, cur, out);
    cur.pop_back();
  }
}

}  // namespace

std::vector<std::string> multi_indices(int n, int order) {
  std::vector<std::string> out;
  if (order < 0) return out;
  std::string cur;
  grow(n, order, 1, cur, out);
  return out;
}

std::size_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::size_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::size_t>(n - k + i) / static_cast<std::size_t>(i);
  return r;
}

std::size_t sym_dim(int n, int k) {
  if (k < 0) return 0;
  return binomial(n + k - 1, k);
}

std::string x_name(int i) { return "x" + std::to_string(i); }
std::string p_name(std::string_view index) { return "p" + std::string(index); }
std::string p_name(int i) { return "p" + std::to_string(i); }

std::optional<std::string> jet_index_of(std::string_view name) {
  if (name.size() < 2 || name[0] != 'p') return std::nullopt;
  std::string_view digits = name.substr(1);
  for (char c : digits) {
    if (c < '1' || c > '9') return std::nullopt;
  }
  if (!std::is_sorted(digits.begin(), digits.end())) return std::nullopt;
  return std::string(digits);
}

int jet_order(std::string_view name) {
  if (name == "z") return 0;
  if (auto idx = jet_index_of(name)) return static_cast<int>(idx->size());
  return -1;
}

VarTable::VarTable(int n, int order_cap, std::vector<std::string> extra)
    : n_(n), order_(std::max(order_cap, 1)), extra_(std::move(extra)) {
  if (n < 1 || n > 9) throw Error(ErrorCode::InvalidArgument, "n must lie in 1..9");
  names_ = jet_names(order_);
  for (int h = 1; h < n_; ++h) names_.push_back("t" + std::to_string(h));
  for (const auto& e : extra_) names_.push_back(e);
}

bool VarTable::admits(std::string_view name) const {
  if (name.size() >= 2 && (name[0] == 'x' || name[0] == 't')) {
    std::string_view rest = name.substr(1);
    if (rest.size() == 1 && rest[0] >= '1' && rest[0] <= '9') {
      int i = rest[0] - '0';
      return name[0] == 'x' ? i <= n_ : i < n_;
    }
  }
  if (name == "z") return true;
  if (auto idx = jet_index_of(name)) {
    if (static_cast<int>(idx->size()) > order_) return false;
    for (char c : *idx) {
      if (c - '0' > n_) return false;
    }
    return true;
  }
  return std::find(extra_.begin(), extra_.end(), name) != extra_.end();
}

std::vector<std::string> VarTable::chart_names() const {
  std::vector<std::string> out;
  for (int i = 1; i <= n_; ++i) out.push_back(x_name(i));
  out.push_back("z");
  for (int i = 1; i <= n_; ++i) out.push_back(p_name(i));
  return out;
}

std::vector<std::string> VarTable::jet_names(int order) const {
  std::vector<std::string> out = chart_names();
  for (int k = 2; k <= order; ++k) {
    for (const auto& I : multi_indices(n_, k)) out.push_back(p_name(I));
  }
  return out;
}

}  // namespace goursat
