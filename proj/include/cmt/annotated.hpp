#pragma once

#include <string>
#include <vector>

#include "cmt/tree.hpp"

namespace cmt {

// Finite realization budget.  dense_depth is how many interior nodes stand in
// for a densely ordered stretch, width caps every infinite (or merely large)
// multiplicity, node_cap bounds the whole output.
struct Budget {
    int dense_depth = 2;
    int width = 2;
    int node_cap = 500;
};

void validate(const Budget& b);  // throws errc::bad_input on non-positive fields

void to_json(json& j, const Budget& b);
void from_json(const json& j, Budget& b);

// Realized count for a declared multiplicity under a width cap.
int capped(ExtCard k, int width);

// Kind of the cone a node spans at its parent.  Border cones leave the current
// level (a single leaf, or the entry into the next level's content); inner
// cones carry the continuation of the same level.
enum class ConeKind { border, inner };

const char* cone_kind_name(ConeKind k);
ConeKind cone_kind_from_name(const std::string& s);

// A finite sample of a possibly infinite tree.  Every vector is indexed by
// node id.
//
//   node_color  declared (border, inner) cone counts of the node's level; may
//               exceed the realized child counts.  Leaves carry (0,0).
//   cone_kind   kind of the cone at parent(x) containing x; the root entry is
//               meaningless and kept at border.
//   dense_mark  true when the gap directly below x is densely filled in the
//               intended model (so x has no realized or intended predecessor).
//   level_mark  index of the interval stratum the node belongs to, 0 at the
//               root side.
//
// dense_mark at the stored minimum pairs with tree.has_virtual_root: both say
// the order continues below every stored point.
struct AnnotatedTree {
    ConcreteTree tree;
    std::vector<ColorPair> node_color;
    std::vector<ConeKind> cone_kind;
    std::vector<char> dense_mark;
    std::vector<int> level_mark;

    int size() const { return tree.size(); }
    bool dense(NodeId x) const { return dense_mark[static_cast<std::size_t>(x)] != 0; }
    bool leaf_isolated(NodeId a) const { return !dense(a); }
    int level_count() const;
};

struct AnnotationViolation {
    std::string clause;
    json witness;
};
struct AnnotationReport {
    std::vector<AnnotationViolation> violations;
    bool ok() const { return violations.empty(); }
};

// Coherence of the annotations with the realized order:
//   shape                 annotation vectors match the node count
//   virtual-root-dense    dense_mark at a stored minimum iff has_virtual_root
//   root-level            stored minima sit at level 0
//   level-step            a child's level equals or follows its parent's
//   level-gap             used level indices are contiguous from 0
//   leaf-color            leaves are colored (0,0)
//   node-degree           every node declares at least two cones
//   inner-dense           inner cones are dense below their first element
//   border-shape          a dense border cone must leave the level
//   count-border/inner    realized counts never exceed declared ones
// With a budget, additionally:
//   border-realization    realized border count equals the capped declared one
//   inner-overflow        realized inner count stays within two width loads
//                         (merging two adjacent levels pools two capped
//                         families of cones at one node)
// Inner cones may be realized partially or not at all: a finite sample of a
// dense level necessarily stops somewhere, and nodes at the sample boundary
// keep their declared color with fewer children.
AnnotationReport validate_annotations(const AnnotatedTree& t, const Budget* b = nullptr);

// Views a plain finite tree as its own exact sample: every cone is a thick
// cone, colors are realized counts, levels are depth strata with each leaf
// kept in its parent's stratum.  Rejects trees with a virtual root.
AnnotatedTree annotate_finite(const ConcreteTree& t);

// Per-node label strings folding color, kind, density and level, suitable for
// the labeled canonical codes of tree.hpp.
std::vector<std::string> annotation_labels(const AnnotatedTree& t);

// Canonical code of the annotated tree; equal codes iff there is an
// annotation-preserving order isomorphism.
std::string annotated_code(const AnnotatedTree& t);

bool annotated_equal(const AnnotatedTree& a, const AnnotatedTree& b);

void to_json(json& j, const AnnotatedTree& t);
void from_json(const json& j, AnnotatedTree& t);

}  // namespace cmt
