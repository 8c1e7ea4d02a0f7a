#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cmt/basics.hpp"

namespace cmt {

// Finite tree stored by parent pointers.  parent[i] == no_node exactly at
// roots.  A well-formed value has a single root; is_good_tree also accepts
// forests (and reports them as meet failures) so that diagnostics stay total.
//
// `has_virtual_root` marks that the represented order continues unboundedly
// below the stored minimum: the value is a finite sample of an unrooted order
// and the conventional extra point -infinity lies below everything.  No
// sentinel node is stored for it.
struct ConcreteTree {
    std::vector<NodeId> parent;
    bool has_virtual_root = false;

    // derived by init()
    std::vector<std::vector<NodeId>> kids;
    std::vector<int> depth;
    std::vector<NodeId> roots;
    std::vector<NodeId> order;  // parents before children

    int size() const { return static_cast<int>(parent.size()); }
    bool is_leaf(NodeId x) const { return kids[x].empty(); }
    NodeId root() const { return roots.size() == 1 ? roots[0] : no_node; }

    // Builds the derived fields.  Throws errc::bad_input on out-of-range
    // parents or cycles; multiple roots are tolerated here.
    void init();

    static ConcreteTree from_parents(std::vector<NodeId> par, bool virtual_root = false);
};

struct GoodTreeViolation {
    std::string clause;  // nonempty | single-root | meets-exist | leaves-everywhere | leaf-or-branching
    json witness;
};

struct GoodTreeReport {
    std::vector<GoodTreeViolation> violations;
    bool ok() const { return violations.empty(); }
};

// Checks the good-tree clauses: the value is a nonempty single-rooted tree,
// any two elements have a meet, every element sits below a maximal one, and
// every non-maximal element is a branching point (the meet of two elements
// both distinct from it).
GoodTreeReport is_good_tree(const ConcreteTree& t);

bool leq(const ConcreteTree& t, NodeId a, NodeId b);  // a <= b
NodeId meet(const ConcreteTree& t, NodeId a, NodeId b);  // no_node when in distinct components

// All x <= alpha in increasing order, ending at alpha.  alpha must be a leaf.
std::vector<NodeId> branch(const ConcreteTree& t, NodeId alpha);

std::optional<NodeId> predecessor(const ConcreteTree& t, NodeId x);

std::vector<NodeId> leaves(const ConcreteTree& t);

// Cone of y at x: { t' : x < t' /\ y }.  Requires x < y.
std::vector<NodeId> cone(const ConcreteTree& t, NodeId x, NodeId y);
// Thick cone at x: { t' : x <= t' }.
std::vector<NodeId> thick_cone(const ConcreteTree& t, NodeId x);
// Pruned cone at x of y: cone(x,y) minus thick_cone(y).  Requires x < y.
std::vector<NodeId> pruned_cone(const ConcreteTree& t, NodeId x, NodeId y);

// The cones at x as disjoint node sets, one per child, in child-id order.
std::vector<std::vector<NodeId>> cones_at(const ConcreteTree& t, NodeId x);

enum class AntichainOrder { less, greater, equal, incomparable };

// Order on antichains: A < B iff every a in A sits below some b in B and
// every b in B sits above some a in A.  Throws errc::not_antichain when an
// input contains two comparable elements.
AntichainOrder antichain_order(const ConcreteTree& t,
                               const std::vector<NodeId>& A,
                               const std::vector<NodeId>& B);

// Canonical subtree encodings: equal strings iff the rooted (labeled) subtrees
// are isomorphic.  `labels` may be null for the bare order.
std::string subtree_code(const ConcreteTree& t, NodeId x,
                         const std::vector<std::string>* labels = nullptr);
std::vector<std::string> subtree_codes(const ConcreteTree& t,
                                       const std::vector<std::string>* labels = nullptr);
std::string canonical_code(const ConcreteTree& t,
                           const std::vector<std::string>* labels = nullptr);

// Renumbers nodes so equal trees serialize identically: root first, children
// before further descendants, siblings ordered by canonical code.  old_to_new,
// when given, receives the node renaming.
ConcreteTree relabel_canonical(const ConcreteTree& t,
                               const std::vector<std::string>* labels = nullptr,
                               std::vector<NodeId>* old_to_new = nullptr);

void to_json(json& j, const ConcreteTree& t);
void from_json(const json& j, ConcreteTree& t);

}  // namespace cmt
