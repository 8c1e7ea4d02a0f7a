#pragma once

#include <array>
#include <set>
#include <string>
#include <vector>

#include "cmt/tree.hpp"

namespace cmt {

// Finite set with a ternary relation, the candidate C-relation.  Triples are
// stored over element indices; names only matter for I/O.
struct ConcreteCSet {
    std::vector<std::string> elements;
    std::set<std::array<int, 3>> triples;

    int size() const { return static_cast<int>(elements.size()); }
    bool holds(int x, int y, int z) const { return triples.count({x, y, z}) > 0; }
    int index_of(const std::string& name) const;
};

void to_json(json& j, const ConcreteCSet& m);
void from_json(const json& j, ConcreteCSet& m);

// C on n named elements holding exactly at alpha != beta = gamma.
ConcreteCSet trivial_cset(int n);

// The four relation axioms:
//   1  C(x,y,z) -> C(x,z,y)
//   2  C(x,y,z) -> not C(y,x,z)
//   3  C(x,y,z) -> C(x,y,w) or C(w,y,z)
//   4  x != y   -> C(x,y,y)
struct CAxiomViolation {
    int axiom;
    json witness;
};
struct CAxiomReport {
    std::vector<CAxiomViolation> violations;
    bool ok() const { return violations.empty(); }
};
CAxiomReport check_c_axioms(const ConcreteCSet& m);

// Element <-> leaf correspondence accompanying a tree built from a C-set or a
// C-set read off a tree.
struct LeafMap {
    std::vector<NodeId> leaf_of_element;  // element index -> leaf node
    std::vector<int> element_of_node;     // node -> element index, -1 off the leaves
};

struct CanonicalTree {
    ConcreteTree tree;
    LeafMap map;
};

// Quotient of all ordered pairs by mutual domination: (a,b) sits below (c,d)
// when neither c nor d separates from the pair {a,b} before a and b separate
// from each other.  Diagonal classes become the leaves.  Throws on an empty
// set or an axiom violation.
CanonicalTree canonical_tree(const ConcreteCSet& m);

struct InducedCSet {
    ConcreteCSet cset;
    LeafMap map;
};

// The relation read back off a good tree's leaves: C(a,b,c) iff the common
// part of the branches of b and c strictly exceeds that of a and b.
InducedCSet leaves_cset(const ConcreteTree& t);

// A node of the canonical tree named by two elements whose branches separate
// exactly there; a == b names the leaf of a.
struct NodeSpec {
    int a;
    int b;
};

// Cone of beta at alpha^beta, as a set of element indices.  alpha != beta.
std::vector<int> cset_cone(const ConcreteCSet& m, int alpha, int beta);
std::vector<int> cset_thick_cone(const ConcreteCSet& m, NodeSpec at);
// Elements whose branch enters the cone of y strictly between x and y.
std::vector<int> cset_pruned_cone(const ConcreteCSet& m, NodeSpec x, NodeSpec y);

bool cset_isomorphic(const ConcreteCSet& a, const ConcreteCSet& b);

// Orbit classes of tree nodes under label-preserving automorphisms, computed
// from the subtree codes met along each node's path from the root.  Returns a
// dense class id per node, numbered by smallest member.
std::vector<int> node_orbits(const ConcreteTree& t,
                             const std::vector<std::string>* labels = nullptr);

// Orbit classes of the elements of m under automorphisms fixing the given
// elements pointwise.  The second variant answers the same question through a
// different reduction (grouping by the canonical code of the tree with the
// probed element marked) and exists as a cross-check.
std::vector<int> stabilizer_orbits(const ConcreteCSet& m,
                                   const std::vector<int>& params = {});
std::vector<int> stabilizer_orbits_oracle(const ConcreteCSet& m,
                                          const std::vector<int>& params = {});

// One complete 1-type over the empty set; for a finite structure this is
// transitivity of the automorphism group.
bool is_indiscernible_finite(const ConcreteCSet& m);

// Checks that every orbit of every pointwise stabilizer with at most
// max_params parameters is a union of atoms of the algebra generated by cones
// and thick cones.  Certifies the finite structure only.
struct CMinimalityReport {
    bool ok = true;
    json detail;  // statistics, and counterexamples when not ok
};
CMinimalityReport check_c_minimal_finite(const ConcreteCSet& m, int max_params);

}  // namespace cmt
