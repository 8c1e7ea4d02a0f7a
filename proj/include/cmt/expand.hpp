#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cmt/annotated.hpp"
#include "cmt/descriptor.hpp"

namespace cmt {

// Bookkeeping of one extension step T -> T * T0 ("each leaf of T replaced by a
// copy of T0").  All ids refer to: base ids for the domains of sigma/rho/tau,
// extension ids everywhere else.
//
//   sigma  base node  -> its copy in the extension (no_node at base leaves)
//   rho    base leaf  -> attachment point: the copy's root when T0 is rooted,
//          the leaf's old parent otherwise (no_node at base nodes)
//   tau    base leaf  -> image of each T0 node in that leaf's copy
//   E      image of rho
//   E_geq  upward closure of E
//   e      x -> greatest element of E below-or-equal x, defined on E_geq
struct ExtensionWitness {
    std::vector<NodeId> sigma;
    std::vector<NodeId> rho;
    std::map<NodeId, std::vector<NodeId>> tau;
    std::vector<NodeId> E;
    std::vector<NodeId> E_geq;
    std::map<NodeId, NodeId> e;
    bool t0_rooted = true;
};

void to_json(json& j, const ExtensionWitness& w);
void from_json(const json& j, ExtensionWitness& w);

struct Extension {
    AnnotatedTree tree;
    ExtensionWitness witness;
};

// Grafts a one-level sample onto every leaf of the base.  Preconditions, each
// reported under its own error code:
//   condition-star            all base leaves isolated, or none
//   condition-star-star       non-isolated leaves force a rooted layer
//   condition-star-star-star  with isolated leaves, parents of leaves form a
//                             convex set
// Both operands must have more than one point.  In the unrooted case the
// attachment nodes are recolored to (0, m + mu) of their old color and their
// border cones become inner: the grafted copies are dense below, so no cone at
// an attachment node keeps a first element.
Extension extend_tree(const AnnotatedTree& base, const AnnotatedTree& t0);

struct ExtensionAxiomViolation {
    std::string clause;
    json witness;
};
struct ExtensionAxiomReport {
    std::vector<ExtensionAxiomViolation> violations;
    bool ok() const { return violations.empty(); }
};

// The axioms a tree-with-witness must satisfy for the quotient construction:
//   good-tree           single stored minimum, declared degrees at least two
//   e-set-convex        E has no holes along any chain
//   upward-closure      E_geq is exactly the up-set of E
//   domain / image      e is defined on E_geq and onto E
//   leaves-covered      every leaf lies above E
//   leaves-disjoint     no leaf belongs to E
//   deflationary        e(x) <= x
//   fixes-image         e is the identity on E
//   greatest-in-branch  e(x) is the greatest element of E below-or-equal x,
//                       and nothing of E sits below points outside E_geq
ExtensionAxiomReport check_extension_axioms(const AnnotatedTree& t,
                                            const ExtensionWitness& w);

struct Quotient {
    AnnotatedTree tree;
    std::vector<NodeId> projection;  // extension node -> quotient node
};

// Contracts the grafted copies back to single leaves: classes are thick cones
// at E-points in the rooted case and cones at e(x) otherwise, everything else
// stays a singleton.  The result is order-isomorphic to the base of the
// extension.  Throws errc::witness_inconsistent when the axioms above fail.
// Contracted attachment nodes keep realized counts as their color, so the
// quotient of a width-capped extension matches the base up to that cap.
Quotient quotient_sim(const AnnotatedTree& t, const ExtensionWitness& w);

enum class IntervalForm { singleton, open_open, open_closed };

const char* interval_form_name(IntervalForm f);

// One maximal one-colored piece of a branch.  lo/hi are realized bounds:
//   singleton    lo = hi = the unique member
//   open-open    ]lo, hi[ with both ends outside the piece
//   open-closed  ]lo, hi] with hi its greatest member
// An absent lo means the piece reaches below every stored point.  For an
// open-open piece, hi is the next stratum's first node, or the leaf itself.
struct Interval {
    std::optional<NodeId> lo;
    std::optional<NodeId> hi;
    IntervalForm form = IntervalForm::singleton;
    ColorPair color;
    int level = 0;
};

void to_json(json& j, const Interval& iv);

// Splits the branch of a leaf (without the leaf) into maximal runs of equal
// level and declared color, reading each run's form off its color:
// (k,0) pieces are singletons, (0,mu) pieces are open on both sides, mixed
// colors close on the right.
std::vector<Interval> interval_decomposition(const AnnotatedTree& t, NodeId alpha);

// Deterministic finite sample of the theory named by a descriptor: the first
// level is realized directly, every further level is grafted with extend_tree,
// and collapse windows rewrite the annotations of the merged levels in place.
// The seed only permutes node ids.  Exceeding node_cap is an error, never a
// silent truncation.
AnnotatedTree expand(const Descriptor& d, const Budget& b, std::uint64_t seed = 0);

// Reads the descriptor back from an annotated tree: decomposes every branch,
// checks all branches agree stratum by stratum, maps each stratum to a level
// and validates rootedness and leaf isolation against the level kinds.
// Returns the normalized descriptor.
Descriptor recognize(const AnnotatedTree& t);

}  // namespace cmt
