#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cmt/basics.hpp"

namespace cmt {

// The four isomorphism types of one-colored trees:
//   T00  singleton
//   T0   a unique node carrying m >= 2 leaves
//   T1a  dense and unrooted, mu >= 2 cones at every node, no leaf isolated
//   T1b  every leaf isolated, m >= 1 leaves and mu >= 1 other cones per node
enum class LevelKind { T00, T0, T1a, T1b };

const char* kind_name(LevelKind k);  // "00" | "0" | "1a" | "1b"
LevelKind kind_from_name(const std::string& s);

struct OneColoredDescriptor {
    LevelKind kind = LevelKind::T00;
    ColorPair color;

    friend bool operator==(const OneColoredDescriptor& a, const OneColoredDescriptor& b) {
        return a.kind == b.kind && a.color == b.color;
    }
    friend bool operator!=(const OneColoredDescriptor& a, const OneColoredDescriptor& b) {
        return !(a == b);
    }
    std::string str() const;  // e.g. "1b(1,1)"
};

// Name of a complete theory: the tower of one-colored levels, first level at
// the root side, plus the marked-branch variant used for edge labels.
struct Descriptor {
    std::vector<OneColoredDescriptor> levels;
    bool branch_variant = false;

    friend bool operator==(const Descriptor& a, const Descriptor& b) {
        return a.levels == b.levels && a.branch_variant == b.branch_variant;
    }
    friend bool operator!=(const Descriptor& a, const Descriptor& b) { return !(a == b); }
    std::string str() const;  // e.g. "1a(0,2)*0(3,0)" or "...[V]"
};

OneColoredDescriptor level(LevelKind k, ExtCard m, ExtCard mu);
Descriptor single(LevelKind k, ExtCard m, ExtCard mu);
Descriptor composite(std::vector<OneColoredDescriptor> levels);

struct DescriptorViolation {
    std::string clause;  // level-color | levels-nonempty | singleton-level |
                         // adjacency | branch-variant-base | normal-form
    json witness;
};
struct DescriptorReport {
    std::vector<DescriptorViolation> violations;
    bool ok() const { return violations.empty(); }
};

// Everything except normal form: per-level color clauses, nonemptiness, the
// singleton level standing alone, the adjacency rule (a T1a level is followed
// by a T0 level), and the branch-variant base shape.
DescriptorReport validate_structural(const Descriptor& d);
// Structural validity plus absence of the two collapse patterns.
DescriptorReport validate(const Descriptor& d);

// Rewrites the two collapse patterns to a fixpoint, leftmost window first:
//   [T1b(m,u), T1a(0,v)]          -> [T1a(0,v)]  when v = m + u
//   [T1a(0,v), T0(m,0), T1a(0,w)] -> [T1a(0,w)]  when v = m = w
// Throws on structurally invalid input.
Descriptor normalize(const Descriptor& d);

// Leftmost [begin, end) window matching a collapse pattern, or nothing.  The
// merged level is always the last one of the window.
std::optional<std::pair<std::size_t, std::size_t>> first_collapse_window(
    const std::vector<OneColoredDescriptor>& levels);

int depth(const Descriptor& d);                      // levels after normalization
OneColoredDescriptor first_level(const Descriptor& d);
std::optional<Descriptor> tail(const Descriptor& d);  // all levels past the first

bool descriptor_equal(const Descriptor& a, const Descriptor& b);

void to_json(json& j, const OneColoredDescriptor& d);
void from_json(const json& j, OneColoredDescriptor& d);
void to_json(json& j, const Descriptor& d);
void from_json(const json& j, Descriptor& d);

}  // namespace cmt
