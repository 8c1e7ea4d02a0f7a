#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cmt/annotated.hpp"

namespace cmt {

// Which symbols the quantifier-free machinery consults.
//
//   L1    order, meets and the leaf/node split
//   L1P   L1 plus the predecessor function
//   L2    L1 plus the first boundary map with its two predicates
//   Ln    L1 plus boundary maps e_1..e_k
//   LnP   Ln plus the predecessor function and its domain/image predicates
//   LnV   Ln plus a designated leafless branch and the meet-with-it map
enum class SigTag { L1, L1P, L2, Ln, LnP, LnV };

struct Signature {
    SigTag tag = SigTag::L1;
    int boundaries = 0;  // boundary maps e_1..e_boundaries are consulted

    static Signature l1() { return {SigTag::L1, 0}; }
    static Signature l1p() { return {SigTag::L1P, 0}; }
    static Signature l2() { return {SigTag::L2, 1}; }
    static Signature ln(int k);
    static Signature lnp(int k);
    static Signature lnv(int k);

    bool has_p() const { return tag == SigTag::L1P || tag == SigTag::LnP; }
    bool has_df() const { return tag == SigTag::LnP; }
    bool has_v() const { return tag == SigTag::LnV; }

    std::string str() const;
};

// Inverse of Signature::str(): "L1", "L1p", "L2", "Ln<k>", "Lnp<k>", "Lnv<k>".
Signature parse_signature(const std::string& s);

// The language a sample naturally lives in: one-level trees take L1, or L1p
// when both closed and dense cones are declared; deeper towers take Lnp with
// one boundary map per level seam.
Signature natural_signature(const AnnotatedTree& t);

// ---------------------------------------------------------------------------
// Element-level interpretation on an annotated sample.  All stored nodes are
// elements; a virtual-root flag only says the order continues below the
// stored minimum.  Quantifier-free characters always include the declared
// color: samples stand in for the structures they declare, so two elements
// agree only when their declared surroundings do.

bool sem_leaf(const AnnotatedTree& t, NodeId x);

// Predecessor: defined exactly when the gap below x is discrete and realized.
bool pred_defined(const AnnotatedTree& t, NodeId x);
std::optional<NodeId> pred(const AnnotatedTree& t, NodeId x);

// Image of the predecessor map: x has an immediate successor, either
// promised by its declared border count or present as a discrete child.
bool succ_exists(const AnnotatedTree& t, NodeId x);

// Boundary interpretation derived from the level marks.  The i-th boundary
// (i >= 1) separates strata below i from strata at or above i: when level i
// is entered discretely the boundary points are the entry nodes themselves,
// when it is entered densely they are the entry nodes' parents.  e_i sends x
// to the greatest boundary point below or equal to it.
struct BoundaryMaps {
    int count = 0;                               // boundaries 1..count
    std::vector<std::vector<char>> in_set;       // [i][x]: x is a boundary point
    std::vector<std::vector<char>> at_or_above;  // [i][x]: some boundary point <= x
    std::vector<std::vector<NodeId>> value;      // [i][x]: e_i(x), or no_node
};

// Throws errc::bad_input when some level mixes dense and discrete entries.
BoundaryMaps boundary_maps(const AnnotatedTree& t);

// ---------------------------------------------------------------------------

// The unique node n such that n <= some element of a and x /\ z = n /\ z for
// every z in a; equivalently the greatest element of { x /\ z : z in a }.
// Throws errc::empty_input when a is empty.
NodeId attach_node(const AnnotatedTree& t, const std::vector<NodeId>& a, NodeId x);

// Minimal superset of seed closed under meets and the signature's functions
// (predecessor, boundary maps, meet with the designated branch).  Sorted.
std::vector<NodeId> closure(const AnnotatedTree& t, const std::vector<NodeId>& seed,
                            const Signature& sig,
                            const std::vector<NodeId>* branch_v = nullptr);

// Canonical encoding of all atomic relations over the closure of the tuple:
// leaf/node split, declared colors, order, meet positions, function values
// and the signature's predicates.  Equal strings iff the tuples satisfy the
// same atomic formulas (with declared colors read as part of the character).
std::string qf_type(const AnnotatedTree& t, const std::vector<NodeId>& tuple,
                    const Signature& sig,
                    const std::vector<NodeId>* branch_v = nullptr);

// Annotation-preserving isomorphism between finite samples, if one exists.
// `pins` forces images of particular nodes; the search backtracks over
// canonically ordered children.  Returns the full node mapping.
std::optional<std::vector<NodeId>> iso_finite(
    const AnnotatedTree& a, const AnnotatedTree& b,
    const std::vector<std::pair<NodeId, NodeId>>& pins = {});

// Finite partial injection whose two sides are meant to be closed under the
// signature's functions and to satisfy the same atomic formulas.
struct PartialMap {
    std::vector<std::pair<NodeId, NodeId>> pairs;
};

bool partial_iso_valid(const AnnotatedTree& a, const AnnotatedTree& b,
                       const PartialMap& m, const Signature& sig,
                       const std::vector<NodeId>* va = nullptr,
                       const std::vector<NodeId>* vb = nullptr);

// ---------------------------------------------------------------------------
// Bounded back-and-forth game between two annotated samples.  Positions are
// partial isomorphisms over closed sets.  A round is one element picked by
// the challenger in either structure and one reply in the other; picks may
// materialize what the declared colors promise but the finite sample omits:
// a node inside a densely filled gap, or a fresh cone copied from a realized
// one when the declared count has headroom.  Each side materializes at most
// one insertion per round, bounded by the per-structure insertion budget
// (equal to the round count).

enum class GameVerdict { equivalent, distinguished };

struct GameStats {
    long positions = 0;
    long memo_hits = 0;
    long materialized = 0;
};

struct GameResult {
    GameVerdict verdict = GameVerdict::equivalent;
    int rounds = 0;
    json transcript;  // per-round picks, replies and position snapshots
    GameStats stats;
};

// Decides the rounds-round game.  Throws errc::bad_input for rounds < 1,
// annotation violations, forests, or a signature needing data the entry
// point does not carry (the designated-branch language).
GameResult back_and_forth(const AnnotatedTree& a, const AnnotatedTree& b,
                          const Signature& sig, int rounds);

}  // namespace cmt
