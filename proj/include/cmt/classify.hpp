#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cmt/cset.hpp"
#include "cmt/descriptor.hpp"

namespace cmt {

// Orbit blocks of the elements under automorphisms, ordered by smallest
// member.  For a finite structure these are exactly the maximal subsets in
// which any two elements look alike.
struct CanonicalPartition {
    std::vector<std::vector<int>> blocks;

    int block_of(int element) const;
    int count() const { return static_cast<int>(blocks.size()); }
};

CanonicalPartition canonical_partition(const ConcreteCSet& m);

// The finite distinguished subtree of the canonical tree: bases where the
// block structure changes, closed downward, with each member carrying the
// reason it was kept.  Roles:
//   U  top of a chain of distinguished points
//   B  meeting point of two incomparable distinguished points
//   S  off-chain cones touch two different blocks
//   I  lowest point of a stretch whose off-chain cones stay in one block
struct ThetaTree {
    CanonicalTree ct;               // the tree the node ids refer to
    std::vector<NodeId> theta;      // members, increasing node id
    std::map<NodeId, std::string> role;  // member -> subset of "UBSI"
    bool has_minus_infinity = false;

    bool contains(NodeId x) const;
};

// Requires p to be the canonical partition of m (checked; errc::bad_input).
ThetaTree theta(const ConcreteCSet& m, const CanonicalPartition& p);

// One family of pairwise alike cones at a vertex: their common theory and how
// many of them sit at each member node.
struct ConeLabel {
    Descriptor theory;
    ExtCard k{1};
};

struct ClassVertex {
    int parent = -1;                         // index into vertices, -1 at the root
    int n = 1;                               // orbit size
    std::vector<ConeLabel> cones;            // distinct theories, sorted by name
    std::optional<Descriptor> edge_label;    // theory of the stretch below, V-marked
    std::vector<NodeId> members;             // tree nodes of the orbit (empty when
                                             // the value was read from a file)
};

// The labeled quotient: vertices are orbits of the distinguished subtree,
// stored root first with parents before children, children in canonical
// order.  An empty vertex list is the result for an indiscernible input.
struct LabeledClassTree {
    std::vector<ClassVertex> vertices;

    int size() const { return static_cast<int>(vertices.size()); }
    int s(int v) const { return static_cast<int>(vertices[v].cones.size()); }
    std::vector<int> children(int v) const;
};

LabeledClassTree theta_bar(const ConcreteCSet& m, const ThetaTree& t);

// Canonical encoding of the labeled tree; equal strings iff there is a
// label-preserving isomorphism.
std::string class_tree_code(const LabeledClassTree& x);
bool class_tree_isomorphic(const LabeledClassTree& a, const LabeledClassTree& b);

// One clause of the validator.  Witnesses list the offending vertices.
struct ConstraintCheck {
    int clause = 0;          // 1..10
    std::string name;
    bool pass = true;
    json witnesses = json::array();
};

struct ConstraintReport {
    std::vector<ConstraintCheck> checks;

    bool ok() const;
    const ConstraintCheck& check(int clause) const;
};

// The ten admissibility clauses, each reported separately:
//    1  root orbit is a singleton; orbit sizes divide along edges
//    2  a childless vertex is a leaf family (s = 0) or splits into >= 2 cones
//    3  a tree rooted below every stored point labels its first edge
//    4  a vertex continuing along a single chain keeps a cone of its own
//    5  edge labels are marked-branch theories over a dense first level
//    6  vertex labels are plain valid theories, pairwise distinct, with at
//       most one infinite count
//    7  a childless non-root vertex with an empty edge splits into >= 2
//       distinct theories
//    8  at a childless vertex, the cone families may not reproduce the edge
//       theory below (the stretch would swallow them)
//    9  at a vertex passing its edge theory on to a child edge, the cone
//       families may not complete a model of that same theory; strict9
//       additionally pins the free count of the first pattern
//   10  the labeled tree has no nontrivial automorphism
// Total: never throws on a structurally well-formed input.
ConstraintReport validate_constraints(const LabeledClassTree& x, bool strict9 = false);

void to_json(json& j, const LabeledClassTree& x);
void from_json(const json& j, LabeledClassTree& x);

// Graphviz rendering with one record box per vertex.
std::string class_tree_dot(const LabeledClassTree& x);

}  // namespace cmt
