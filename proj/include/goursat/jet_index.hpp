#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace goursat {

// Multi-indices are digit strings over 1..n, sorted ascending ("112" is p_{112}).
std::string canonical_index(std::string_view digits);
std::string index_append(std::string_view index, int i);
int index_count(std::string_view index, int i);
std::vector<std::string> multi_indices(int n, int order);
std::size_t binomial(int n, int k);
std::size_t sym_dim(int n, int k);  // dim S^k R^n = C(n+k-1, k)

std::string x_name(int i);
std::string p_name(std::string_view index);
std::string p_name(int i);

// "p12" -> "12"; "z", "x1", unknown -> nullopt. Only canonical names are recognized.
std::optional<std::string> jet_index_of(std::string_view name);
// Order of a chart/jet variable: x_i, t_h -> -1, z -> 0, p_I -> |I|.
int jet_order(std::string_view name);

class VarTable {
 public:
  VarTable(int n, int order_cap, std::vector<std::string> extra = {});

  int n() const { return n_; }
  int order() const { return order_; }
  bool admits(std::string_view name) const;
  const std::vector<std::string>& names() const { return names_; }
  std::size_t count_of_order(int k) const { return sym_dim(n_, k); }

  // x1..xn, z, p1..pn
  std::vector<std::string> chart_names() const;
  // x1..xn, z, p1..pn, pI for 2 <= |I| <= order
  std::vector<std::string> jet_names(int order) const;

 private:
  int n_;
  int order_;
  std::vector<std::string> names_;
  std::vector<std::string> extra_;
};

}  // namespace goursat
