#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pilot/error.hpp"

namespace pilot {

using Label = std::string;
using Edge = std::pair<Label, Label>;  // (child, parent)

// A finite partial order given by its Hasse-style edge set. The reflexive
// transitive closure is computed once at construction and shared between
// copies.
class Hierarchy {
 public:
  Hierarchy() : Hierarchy("label", {}, {}) {}

  Hierarchy(std::string domain, std::set<Label> labels, std::set<Edge> edges = {})
      : domain_(std::move(domain)), labels_(std::move(labels)), edges_(std::move(edges)) {
    build_closure();
  }

  const std::string& domain() const noexcept { return domain_; }
  const std::set<Label>& labels() const noexcept { return labels_; }
  const std::set<Edge>& edges() const noexcept { return edges_; }

  bool contains(std::string_view label) const { return index_->count(std::string(label)) != 0; }

  void require(std::string_view label) const {
    if (!contains(label)) throw UnknownLabelError(domain_, std::string(label));
  }

  // a <= b in the reflexive-transitive closure of the edge relation.
  bool leq(std::string_view a, std::string_view b) const {
    const auto ia = index_of(a);
    const auto ib = index_of(b);
    return (*closure_)[ia * labels_.size() + ib];
  }

  bool less(std::string_view a, std::string_view b) const { return a != b && leq(a, b); }

  bool comparable(std::string_view a, std::string_view b) const {
    return leq(a, b) || leq(b, a);
  }

  friend bool operator==(const Hierarchy& x, const Hierarchy& y) {
    return x.labels_ == y.labels_ && x.edges_ == y.edges_;
  }

 private:
  std::size_t index_of(std::string_view label) const {
    auto it = index_->find(std::string(label));
    if (it == index_->end()) throw UnknownLabelError(domain_, std::string(label));
    return it->second;
  }

  void build_closure() {
    auto index = std::make_shared<std::map<Label, std::size_t, std::less<>>>();
    for (const auto& l : labels_) index->emplace(l, index->size());
    const std::size_t n = labels_.size();

    std::vector<std::vector<std::size_t>> parents(n);
    for (const auto& [child, parent] : edges_) {
      auto c = index->find(child);
      auto p = index->find(parent);
      if (c == index->end() || p == index->end()) {
        throw ValidationError("hierarchy-edge-label",
                              domain_ + " edge (" + child + ", " + parent +
                                  ") references an undeclared label");
      }
      parents[c->second].push_back(p->second);
    }

    // Kahn's algorithm on child -> parent edges; leftovers mean a cycle.
    std::vector<std::size_t> indegree(n, 0);
    for (const auto& ps : parents)
      for (auto p : ps) ++indegree[p];
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < n; ++i)
      if (indegree[i] == 0) order.push_back(i);
    for (std::size_t k = 0; k < order.size(); ++k)
      for (auto p : parents[order[k]])
        if (--indegree[p] == 0) order.push_back(p);
    if (order.size() != n) {
      throw ValidationError("hierarchy-acyclic", domain_ + " hierarchy contains a cycle");
    }

    // Visit parents before children so each row is final when read.
    auto closure = std::make_shared<std::vector<bool>>(n * n, false);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const std::size_t i = *it;
      (*closure)[i * n + i] = true;
      for (auto p : parents[i])
        for (std::size_t j = 0; j < n; ++j)
          if ((*closure)[p * n + j]) (*closure)[i * n + j] = true;
    }
    index_ = std::move(index);
    closure_ = std::move(closure);
  }

  std::string domain_;
  std::set<Label> labels_;
  std::set<Edge> edges_;
  std::shared_ptr<const std::map<Label, std::size_t, std::less<>>> index_;
  std::shared_ptr<const std::vector<bool>> closure_;
};

// The three orders a policy is interpreted against: entities, datatypes, purposes.
struct Hierarchies {
  Hierarchy entities{"entity", {}};
  Hierarchy datatypes{"datatype", {}};
  Hierarchy purposes{"purpose", {}};

  friend bool operator==(const Hierarchies&, const Hierarchies&) = default;
};

inline bool order_leq(const Hierarchy& h, std::string_view a, std::string_view b) {
  return h.leq(a, b);
}

}  // namespace pilot
