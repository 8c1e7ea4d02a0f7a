#include "cmt/equivalence.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cmt/tree.hpp"

namespace cmt {

namespace {

std::size_t ix(NodeId x) { return static_cast<std::size_t>(x); }

void check_node(const AnnotatedTree& t, NodeId x, const char* what) {
    if (x < 0 || x >= t.size())
        throw error(errc::bad_input, std::string(what) + ": node out of range",
                    {{"node", x}, {"size", t.size()}});
}

int parse_count(const std::string& s, std::size_t off) {
    if (off >= s.size())
        throw error(errc::bad_input, "signature needs a boundary count: " + s);
    int v = 0;
    for (std::size_t i = off; i < s.size(); ++i) {
        if (s[i] < '0' || s[i] > '9')
            throw error(errc::bad_input, "unrecognized signature: " + s);
        v = v * 10 + (s[i] - '0');
        if (v > 10000)
            throw error(errc::bad_input, "boundary count too large: " + s);
    }
    return v;
}

}  // namespace

// --- signatures -----------------------------------------------------------

Signature Signature::ln(int k) {
    if (k < 0) throw error(errc::bad_input, "negative boundary count", {{"k", k}});
    return {SigTag::Ln, k};
}
Signature Signature::lnp(int k) {
    if (k < 0) throw error(errc::bad_input, "negative boundary count", {{"k", k}});
    return {SigTag::LnP, k};
}
Signature Signature::lnv(int k) {
    if (k < 0) throw error(errc::bad_input, "negative boundary count", {{"k", k}});
    return {SigTag::LnV, k};
}

std::string Signature::str() const {
    switch (tag) {
        case SigTag::L1: return "L1";
        case SigTag::L1P: return "L1p";
        case SigTag::L2: return "L2";
        case SigTag::Ln: return "Ln" + std::to_string(boundaries);
        case SigTag::LnP: return "Lnp" + std::to_string(boundaries);
        case SigTag::LnV: return "Lnv" + std::to_string(boundaries);
    }
    return "L1";
}

Signature parse_signature(const std::string& s) {
    if (s == "L1") return Signature::l1();
    if (s == "L1p") return Signature::l1p();
    if (s == "L2") return Signature::l2();
    if (s.rfind("Lnp", 0) == 0) return Signature::lnp(parse_count(s, 3));
    if (s.rfind("Lnv", 0) == 0) return Signature::lnv(parse_count(s, 3));
    if (s.rfind("Ln", 0) == 0) return Signature::ln(parse_count(s, 2));
    throw error(errc::bad_input, "unrecognized signature: " + s);
}

Signature natural_signature(const AnnotatedTree& t) {
    int n = t.level_count();
    if (n >= 2) return Signature::lnp(n - 1);
    for (NodeId x = 0; x < t.size(); ++x) {
        const ColorPair& c = t.node_color[ix(x)];
        if (c.m > ExtCard{0} && c.mu > ExtCard{0}) return Signature::l1p();
    }
    return Signature::l1();
}

// --- element-level interpretation -----------------------------------------

bool sem_leaf(const AnnotatedTree& t, NodeId x) {
    check_node(t, x, "sem_leaf");
    return t.node_color[ix(x)] == ColorPair{};
}

bool pred_defined(const AnnotatedTree& t, NodeId x) {
    check_node(t, x, "pred_defined");
    return t.tree.parent[ix(x)] != no_node && !t.dense(x);
}

std::optional<NodeId> pred(const AnnotatedTree& t, NodeId x) {
    if (!pred_defined(t, x)) return std::nullopt;
    return t.tree.parent[ix(x)];
}

bool succ_exists(const AnnotatedTree& t, NodeId x) {
    check_node(t, x, "succ_exists");
    // a declared border count promises a successor even when the truncation
    // dropped it, so realized children are only consulted as a fallback
    if (ExtCard{0} < t.node_color[ix(x)].m) return true;
    for (NodeId c : t.tree.kids[ix(x)])
        if (!t.dense(c)) return true;
    return false;
}

BoundaryMaps boundary_maps(const AnnotatedTree& t) {
    const int n = t.size();
    BoundaryMaps bm;
    bm.count = std::max(0, t.level_count() - 1);
    bm.in_set.assign(static_cast<std::size_t>(bm.count) + 1,
                     std::vector<char>(static_cast<std::size_t>(n), 0));
    bm.at_or_above = bm.in_set;
    bm.value.assign(static_cast<std::size_t>(bm.count) + 1,
                    std::vector<NodeId>(static_cast<std::size_t>(n), no_node));
    for (int i = 1; i <= bm.count; ++i) {
        int dense_entries = 0, discrete_entries = 0;
        std::vector<NodeId> entries;
        for (NodeId x = 0; x < n; ++x) {
            NodeId p = t.tree.parent[ix(x)];
            if (p == no_node) continue;
            if (t.level_mark[ix(x)] == i && t.level_mark[ix(p)] == i - 1) {
                entries.push_back(x);
                ++(t.dense(x) ? dense_entries : discrete_entries);
            }
        }
        if (dense_entries && discrete_entries)
            throw error(errc::bad_input, "level entered both densely and discretely",
                        {{"level", i}});
        auto& inset = bm.in_set[static_cast<std::size_t>(i)];
        for (NodeId x : entries)
            inset[ix(dense_entries ? t.tree.parent[ix(x)] : x)] = 1;
        auto& above = bm.at_or_above[static_cast<std::size_t>(i)];
        auto& val = bm.value[static_cast<std::size_t>(i)];
        for (NodeId x : t.tree.order) {
            NodeId p = t.tree.parent[ix(x)];
            above[ix(x)] = inset[ix(x)] || (p != no_node && above[ix(p)]);
            val[ix(x)] = inset[ix(x)] ? x : (p != no_node ? val[ix(p)] : no_node);
        }
    }
    return bm;
}

namespace {

NodeId bm_value(const BoundaryMaps& bm, int i, NodeId x) {
    return i <= bm.count ? bm.value[static_cast<std::size_t>(i)][ix(x)] : no_node;
}
bool bm_in(const BoundaryMaps& bm, int i, NodeId x) {
    return i <= bm.count && bm.in_set[static_cast<std::size_t>(i)][ix(x)] != 0;
}
bool bm_above(const BoundaryMaps& bm, int i, NodeId x) {
    return i <= bm.count && bm.at_or_above[static_cast<std::size_t>(i)][ix(x)] != 0;
}

// Greatest meet of x with a chain of nodes (a sampled branch).
NodeId branch_meet(const AnnotatedTree& t, const std::vector<NodeId>& chain, NodeId x) {
    NodeId best = no_node;
    for (NodeId v : chain) {
        NodeId m = meet(t.tree, x, v);
        if (m == no_node) continue;
        if (best == no_node || leq(t.tree, best, m)) best = m;
    }
    return best;
}

void check_branch(const AnnotatedTree& t, const Signature& sig,
                  const std::vector<NodeId>* v) {
    if (!sig.has_v()) return;
    if (!v)
        throw error(errc::bad_input,
                    "incompatible signatures: designated-branch language needs branch data");
    if (v->empty())
        throw error(errc::empty_input, "designated branch sample is empty");
    for (NodeId x : *v) check_node(t, x, "designated branch");
    for (std::size_t i = 0; i < v->size(); ++i)
        for (std::size_t j = i + 1; j < v->size(); ++j) {
            NodeId m = meet(t.tree, (*v)[i], (*v)[j]);
            if (m != (*v)[i] && m != (*v)[j])
                throw error(errc::bad_input, "designated branch is not a chain",
                            {{"a", (*v)[i]}, {"b", (*v)[j]}});
        }
}

struct ClosedList {
    std::vector<NodeId> list;   // seed first, then additions in discovery order
    std::vector<char> present;  // by node id
};

void add_if_new(ClosedList& cl, NodeId x) {
    if (x == no_node) return;
    if (!cl.present[ix(x)]) {
        cl.present[ix(x)] = 1;
        cl.list.push_back(x);
    }
}

ClosedList closure_ordered(const AnnotatedTree& t, const std::vector<NodeId>& seed,
                           const Signature& sig, const std::vector<NodeId>* branch_v,
                           const BoundaryMaps* bm) {
    ClosedList cl;
    cl.present.assign(static_cast<std::size_t>(t.size()), 0);
    for (NodeId x : seed) {
        check_node(t, x, "closure");
        add_if_new(cl, x);
    }
    // The list only grows, so one pass per element closes everything: meets
    // with every earlier element, then the signature's unary functions.
    for (std::size_t i = 0; i < cl.list.size(); ++i) {
        NodeId x = cl.list[i];
        for (std::size_t j = 0; j < i; ++j)
            add_if_new(cl, meet(t.tree, x, cl.list[j]));
        if (sig.has_p() && pred_defined(t, x))
            add_if_new(cl, t.tree.parent[ix(x)]);
        if (bm)
            for (int b = 1; b <= sig.boundaries; ++b)
                add_if_new(cl, bm_value(*bm, b, x));
        if (sig.has_v() && branch_v)
            add_if_new(cl, branch_meet(t, *branch_v, x));
    }
    return cl;
}

}  // namespace

NodeId attach_node(const AnnotatedTree& t, const std::vector<NodeId>& a, NodeId x) {
    if (a.empty()) throw error(errc::empty_input, "attachment base is empty");
    check_node(t, x, "attach_node");
    NodeId best = no_node;
    for (NodeId z : a) {
        check_node(t, z, "attach_node");
        NodeId m = meet(t.tree, x, z);
        if (m == no_node)
            throw error(errc::bad_input, "attachment across components",
                        {{"node", z}, {"target", x}});
        if (best == no_node || leq(t.tree, best, m)) best = m;
    }
    return best;
}

std::vector<NodeId> closure(const AnnotatedTree& t, const std::vector<NodeId>& seed,
                            const Signature& sig, const std::vector<NodeId>* branch_v) {
    check_branch(t, sig, branch_v);
    BoundaryMaps bm;
    const BoundaryMaps* bmp = nullptr;
    if (sig.boundaries > 0) {
        bm = boundary_maps(t);
        bmp = &bm;
    }
    auto cl = closure_ordered(t, seed, sig, branch_v, bmp);
    std::sort(cl.list.begin(), cl.list.end());
    return cl.list;
}

namespace {

std::string qf_from_closed(const AnnotatedTree& t, const std::vector<NodeId>& tuple,
                           const ClosedList& cl, const Signature& sig,
                           const std::vector<NodeId>* branch_v,
                           const BoundaryMaps* bmp) {
    std::vector<int> pos(static_cast<std::size_t>(t.size()), -1);
    for (std::size_t i = 0; i < cl.list.size(); ++i) pos[ix(cl.list[i])] = static_cast<int>(i);

    std::ostringstream out;
    out << "t";
    for (NodeId x : tuple) out << " " << pos[ix(x)];
    out << ";";
    for (std::size_t i = 0; i < cl.list.size(); ++i) {
        NodeId x = cl.list[i];
        out << " " << i << ":" << (sem_leaf(t, x) ? "L" : "N") << t.node_color[ix(x)].str();
        if (sig.has_p()) {
            if (pred_defined(t, x))
                out << ";p=" << pos[ix(t.tree.parent[ix(x)])];
            else
                out << ";p=-";
        }
        if (sig.has_df()) out << ";F" << (succ_exists(t, x) ? 1 : 0);
        for (int b = 1; b <= sig.boundaries; ++b) {
            bool ine = bmp && bm_in(*bmp, b, x);
            bool abv = bmp && bm_above(*bmp, b, x);
            NodeId ev = bmp ? bm_value(*bmp, b, x) : no_node;
            out << ";E" << b << (ine ? 1 : 0) << (abv ? 1 : 0) << "e=";
            if (ev == no_node)
                out << "-";
            else
                out << pos[ix(ev)];
        }
        if (sig.has_v()) {
            bool on_v = std::find(branch_v->begin(), branch_v->end(), x) != branch_v->end();
            NodeId mv = branch_meet(t, *branch_v, x);
            out << ";V" << (on_v ? 1 : 0) << "w=";
            if (mv == no_node)
                out << "-";
            else
                out << pos[ix(mv)];
        }
    }
    out << " |";
    for (std::size_t i = 0; i < cl.list.size(); ++i)
        for (std::size_t j = i + 1; j < cl.list.size(); ++j) {
            NodeId a = cl.list[i], b = cl.list[j];
            NodeId m = meet(t.tree, a, b);
            char rel = m == no_node ? 'x' : (m == a ? '<' : (m == b ? '>' : '^'));
            out << " " << i << rel << j;
            if (rel == '^') out << "@" << pos[ix(m)];
        }
    return out.str();
}

}  // namespace

std::string qf_type(const AnnotatedTree& t, const std::vector<NodeId>& tuple,
                    const Signature& sig, const std::vector<NodeId>* branch_v) {
    check_branch(t, sig, branch_v);
    BoundaryMaps bm;
    const BoundaryMaps* bmp = nullptr;
    if (sig.boundaries > 0) {
        bm = boundary_maps(t);
        bmp = &bm;
    }
    auto cl = closure_ordered(t, tuple, sig, branch_v, bmp);
    return qf_from_closed(t, tuple, cl, sig, branch_v, bmp);
}

// --- finite isomorphism ---------------------------------------------------

std::optional<std::vector<NodeId>> iso_finite(
    const AnnotatedTree& a, const AnnotatedTree& b,
    const std::vector<std::pair<NodeId, NodeId>>& pins) {
    if (a.size() != b.size()) return std::nullopt;
    if (a.tree.has_virtual_root != b.tree.has_virtual_root) return std::nullopt;

    auto la = annotation_labels(a);
    auto lb = annotation_labels(b);
    auto ca = subtree_codes(a.tree, &la);
    auto cb = subtree_codes(b.tree, &lb);

    std::vector<NodeId> pin_a(static_cast<std::size_t>(a.size()), no_node);
    std::vector<NodeId> pin_b(static_cast<std::size_t>(b.size()), no_node);
    for (const auto& [x, y] : pins) {
        check_node(a, x, "pin");
        check_node(b, y, "pin");
        // a node pinned two ways is a request no injection satisfies
        if ((pin_a[ix(x)] != no_node && pin_a[ix(x)] != y) ||
            (pin_b[ix(y)] != no_node && pin_b[ix(y)] != x))
            return std::nullopt;
        pin_a[ix(x)] = y;
        pin_b[ix(y)] = x;
    }

    std::vector<NodeId> map_ab(static_cast<std::size_t>(a.size()), no_node);
    std::vector<NodeId> trail;

    std::function<bool(NodeId, NodeId)> match;
    // Bijection between two same-code groups, backtracking over placements.
    std::function<bool(const std::vector<NodeId>&, const std::vector<NodeId>&,
                       std::size_t, std::vector<char>&)>
        assign = [&](const std::vector<NodeId>& xs, const std::vector<NodeId>& ys,
                     std::size_t i, std::vector<char>& used) -> bool {
        if (i == xs.size()) return true;
        for (std::size_t j = 0; j < ys.size(); ++j) {
            if (used[j]) continue;
            std::size_t mark = trail.size();
            if (match(xs[i], ys[j])) {
                used[j] = 1;
                if (assign(xs, ys, i + 1, used)) return true;
                used[j] = 0;
            }
            while (trail.size() > mark) {
                map_ab[ix(trail.back())] = no_node;
                trail.pop_back();
            }
        }
        return false;
    };

    match = [&](NodeId x, NodeId y) -> bool {
        if (ca[ix(x)] != cb[ix(y)]) return false;
        if (pin_a[ix(x)] != no_node && pin_a[ix(x)] != y) return false;
        if (pin_b[ix(y)] != no_node && pin_b[ix(y)] != x) return false;
        map_ab[ix(x)] = y;
        trail.push_back(x);
        // Equal codes mean equal child-code multisets; pins are the only
        // reason a particular placement can still fail, so groups are
        // independent of one another.
        std::map<std::string, std::pair<std::vector<NodeId>, std::vector<NodeId>>> groups;
        for (NodeId c : a.tree.kids[ix(x)]) groups[ca[ix(c)]].first.push_back(c);
        for (NodeId c : b.tree.kids[ix(y)]) groups[cb[ix(c)]].second.push_back(c);
        for (auto& [code, g] : groups) {
            if (g.first.size() != g.second.size()) return false;
            std::vector<char> used(g.second.size(), 0);
            if (!assign(g.first, g.second, 0, used)) return false;
        }
        return true;
    };

    std::map<std::string, std::pair<std::vector<NodeId>, std::vector<NodeId>>> rgroups;
    for (NodeId r : a.tree.roots) rgroups[ca[ix(r)]].first.push_back(r);
    for (NodeId r : b.tree.roots) rgroups[cb[ix(r)]].second.push_back(r);
    for (auto& [code, g] : rgroups) {
        if (g.first.size() != g.second.size()) return std::nullopt;
        std::vector<char> used(g.second.size(), 0);
        if (!assign(g.first, g.second, 0, used)) return std::nullopt;
    }
    return map_ab;
}

bool partial_iso_valid(const AnnotatedTree& a, const AnnotatedTree& b,
                       const PartialMap& m, const Signature& sig,
                       const std::vector<NodeId>* va, const std::vector<NodeId>* vb) {
    if (sig.has_v() && (va == nullptr) != (vb == nullptr))
        throw error(errc::bad_input,
                    "incompatible signatures: branch data must come for both sides");
    std::map<NodeId, NodeId> f;
    std::map<NodeId, NodeId> g;
    for (const auto& [x, y] : m.pairs) {
        check_node(a, x, "partial map");
        check_node(b, y, "partial map");
        auto itf = f.find(x);
        if (itf != f.end() && itf->second != y) return false;
        auto itg = g.find(y);
        if (itg != g.end() && itg->second != x) return false;
        f[x] = y;
        g[y] = x;
    }
    std::vector<NodeId> xs, ys;
    for (const auto& [x, y] : f) {
        xs.push_back(x);
        ys.push_back(y);
    }
    return qf_type(a, xs, sig, va) == qf_type(b, ys, sig, vb);
}

// --- the back-and-forth game ----------------------------------------------

namespace {

struct Arena {
    AnnotatedTree t;
    int inserts_left = 0;
};

struct Position {
    Arena side[2];
    std::vector<NodeId> sel[2];  // aligned selections, a partial isomorphism
};

// A candidate pick: the arena after any materialization, the picked node,
// the marked code of the extended position used to discard picks some arena
// isomorphism already identifies, and the extended tuple's character, which
// any successful reply must reproduce exactly.
struct Cand {
    std::shared_ptr<const AnnotatedTree> t;  // arena after the move
    NodeId pick = no_node;
    bool materialized = false;   // fresh structure was added for this pick
    bool gap_inserted = false;   // charged against the dense-insertion budget
    std::vector<NodeId> closed;  // selection, pick, then induced elements
    std::string ext_type;        // selection-marked arena code (dedup, memo)
    std::string ext_qf;          // character of closed; replies must match it
    json info;
};

// Realize one point inside the densely filled gap just below c.  The new
// node belongs to the stratum the gap runs through: the parent's, when c is
// a leaf or the first point of a densely entered level, otherwise c's own.
// c keeps its dense mark because the remaining upper part of the gap is
// still dense, and becomes a continuation point of its cone.
AnnotatedTree insert_below(const AnnotatedTree& t0, NodeId c) {
    AnnotatedTree t = t0;
    NodeId v = t.size();
    NodeId pc = t0.tree.parent[ix(c)];
    t.tree.parent.push_back(pc);
    t.tree.parent[ix(c)] = v;
    bool of_parent =
        pc != no_node && (t0.tree.is_leaf(c) ||
                          t0.level_mark[ix(pc)] != t0.level_mark[ix(c)]);
    t.node_color.push_back(t0.node_color[ix(of_parent ? pc : c)]);
    t.cone_kind.push_back(t0.cone_kind[ix(c)]);
    t.dense_mark.push_back(1);
    t.level_mark.push_back(t0.level_mark[ix(of_parent ? pc : c)]);
    t.cone_kind[ix(c)] = ConeKind::inner;
    t.tree.init();
    return t;
}

// Copy the subtree of donor under x as a fresh cone of kind k, collecting
// the new ids.
AnnotatedTree graft_copy(const AnnotatedTree& t0, NodeId x, NodeId donor,
                         ConeKind k, std::vector<NodeId>& new_ids) {
    AnnotatedTree t = t0;
    std::vector<NodeId> remap(static_cast<std::size_t>(t0.size()), no_node);
    std::vector<NodeId> stack{donor};
    std::vector<NodeId> pre;
    while (!stack.empty()) {
        NodeId o = stack.back();
        stack.pop_back();
        pre.push_back(o);
        const auto& ks = t0.tree.kids[ix(o)];
        for (auto it = ks.rbegin(); it != ks.rend(); ++it) stack.push_back(*it);
    }
    for (NodeId o : pre) {
        NodeId nv = static_cast<NodeId>(t.tree.parent.size());
        t.tree.parent.push_back(o == donor ? x : remap[ix(t0.tree.parent[ix(o)])]);
        t.node_color.push_back(t0.node_color[ix(o)]);
        t.cone_kind.push_back(o == donor ? k : t0.cone_kind[ix(o)]);
        t.dense_mark.push_back(t0.dense_mark[ix(o)]);
        t.level_mark.push_back(t0.level_mark[ix(o)]);
        remap[ix(o)] = nv;
        new_ids.push_back(nv);
    }
    t.tree.init();
    return t;
}

ExtCard declared_count(const AnnotatedTree& t, NodeId x, ConeKind k) {
    const ColorPair& c = t.node_color[ix(x)];
    return k == ConeKind::border ? c.m : c.mu;
}

// Canonical code of an arena with the selection written into the labels, so
// equal codes mean an annotation isomorphism carrying one selection onto the
// other position by position.  Matching characters are not enough here: two
// elements can read alike over the selection while their surroundings hold
// different reserves for the remaining rounds.
std::string marked_code(const AnnotatedTree& t, const std::vector<NodeId>& sel) {
    auto labels = annotation_labels(t);
    for (std::size_t i = 0; i < sel.size(); ++i)
        labels[ix(sel[i])] += "#" + std::to_string(i);
    return canonical_code(t.tree, &labels);
}

struct Solver {
    Signature sig;
    std::unordered_map<std::string, bool> memo;
    GameStats stats;

    std::string position_key(const Position& p, int rounds) {
        std::vector<std::pair<NodeId, NodeId>> pr;
        for (std::size_t i = 0; i < p.sel[0].size(); ++i)
            pr.emplace_back(p.sel[0][i], p.sel[1][i]);
        std::sort(pr.begin(), pr.end());
        std::vector<NodeId> ls, rs;
        for (const auto& [l, r] : pr) {
            ls.push_back(l);
            rs.push_back(r);
        }
        return std::to_string(rounds) + "|" + std::to_string(p.side[0].inserts_left) +
               "," + std::to_string(p.side[1].inserts_left) + "|" +
               marked_code(p.side[0].t, ls) + "||" + marked_code(p.side[1].t, rs);
    }

    // Smallest realized cone of kind k usable as a template at x: x's own
    // k-children first, then the k-children of any node sharing x's stratum
    // and color.
    static NodeId donor_for(const AnnotatedTree& t, NodeId x, ConeKind k) {
        std::vector<std::size_t> sz(static_cast<std::size_t>(t.size()), 1);
        for (auto it = t.tree.order.rbegin(); it != t.tree.order.rend(); ++it) {
            NodeId p = t.tree.parent[ix(*it)];
            if (p != no_node) sz[ix(p)] += sz[ix(*it)];
        }
        NodeId best = no_node;
        auto consider = [&](NodeId c) {
            if (t.cone_kind[ix(c)] != k) return;
            if (best == no_node || sz[ix(c)] < sz[ix(best)]) best = c;
        };
        for (NodeId c : t.tree.kids[ix(x)]) consider(c);
        if (best != no_node) return best;
        for (NodeId y = 0; y < t.size(); ++y) {
            if (y == x || t.level_mark[ix(y)] != t.level_mark[ix(x)] ||
                t.node_color[ix(y)] != t.node_color[ix(x)])
                continue;
            for (NodeId c : t.tree.kids[ix(y)]) consider(c);
        }
        return best;
    }

    // All meaningfully distinct picks on side s: every stored node outside
    // the selection, fresh cones wherever a declared count still has
    // headroom, and one realized point per dense gap together with the reads
    // it changes (its own cones, stored nodes now under it).  Picks related
    // by an arena isomorphism fixing the extended selection are
    // interchangeable for the rest of the game, so only the first of each is
    // kept; stored picks come first so ties never cost insertion budget.  On
    // the last round nothing after the exchange matters, so deduplication
    // relaxes to the character alone and arena codes are skipped.
    std::vector<Cand> candidates(const Position& p, int s, bool last) {
        const Arena& ar = p.side[s];
        const auto& sel = p.sel[s];
        const AnnotatedTree& t = ar.t;
        std::vector<char> in_sel(static_cast<std::size_t>(t.size()), 0);
        for (NodeId x : sel) in_sel[ix(x)] = 1;

        std::vector<Cand> out;
        std::set<std::string> seen;
        // One arena is shared by every pick made in it.  `require`, when
        // set, names a materialized node the pick must pull into the induced
        // selection; a pick that leaves it untouched plays out identically
        // from the unmodified arena, where it is already on offer.
        auto push = [&](const std::shared_ptr<const AnnotatedTree>& src,
                        const BoundaryMaps* bmp, NodeId pick, bool mat, bool gap,
                        NodeId require, json info) {
            std::vector<NodeId> tup = sel;
            tup.push_back(pick);
            ClosedList cl = closure_ordered(*src, tup, sig, nullptr, bmp);
            if (require != no_node && !cl.present[ix(require)]) return;
            std::string et, qf;
            if (last) {
                qf = qf_from_closed(*src, tup, cl, sig, nullptr, bmp);
                if (!seen.insert(qf).second) return;
            } else {
                et = marked_code(*src, cl.list);
                if (!seen.insert(et).second) return;
                qf = qf_from_closed(*src, tup, cl, sig, nullptr, bmp);
            }
            if (mat) ++stats.materialized;
            out.push_back({src, pick, mat, gap, std::move(cl.list), std::move(et),
                           std::move(qf), std::move(info)});
        };
        BoundaryMaps base_bm;
        const BoundaryMaps* base_bmp = nullptr;
        if (sig.boundaries > 0) {
            base_bm = boundary_maps(t);
            base_bmp = &base_bm;
        }
        auto share = [](AnnotatedTree&& a) {
            return std::make_shared<const AnnotatedTree>(std::move(a));
        };
        auto base = share(AnnotatedTree(t));

        // subtree-meets-selection flags, children before parents
        auto meets_of = [&](const AnnotatedTree& tt) {
            std::vector<char> mf(static_cast<std::size_t>(tt.size()), 0);
            for (NodeId x : sel) mf[ix(x)] = 1;
            for (auto it = tt.tree.order.rbegin(); it != tt.tree.order.rend(); ++it)
                for (NodeId c : tt.tree.kids[ix(*it)])
                    if (mf[ix(c)]) mf[ix(*it)] = 1;
            return mf;
        };
        // A fresh cone at x makes sense when the declared count still has
        // headroom past the cones the selection already touches, and no
        // realized cone stands free of the selection to serve instead.
        auto eligible = [](const AnnotatedTree& tt, const std::vector<char>& mf,
                           NodeId x, ConeKind k) {
            std::int64_t meeting = 0;
            for (NodeId c : tt.tree.kids[ix(x)]) {
                if (tt.cone_kind[ix(c)] != k) continue;
                if (!mf[ix(c)]) return false;  // untouched stored cone stands in
                ++meeting;
            }
            return ExtCard{meeting} < declared_count(tt, x, k);
        };
        auto graft_at = [&](const AnnotatedTree& src, NodeId x, ConeKind k,
                            std::vector<NodeId>& fresh) {
            NodeId donor = donor_for(src, x, k);
            if (donor == no_node)
                throw error(errc::bad_input, "no realized cone to copy",
                            {{"node", x},
                             {"cone", cone_kind_name(k)},
                             {"declared", json(declared_count(src, x, k))}});
            return graft_copy(src, x, donor, k, fresh);
        };

        for (NodeId x = 0; x < t.size(); ++x) {
            if (in_sel[ix(x)]) continue;
            push(base, base_bmp, x, false, false, no_node,
                 {{"kind", "stored"}, {"node", x}});
        }

        std::vector<char> meets = meets_of(t);
        for (NodeId x = 0; x < t.size(); ++x)
            for (ConeKind k : {ConeKind::border, ConeKind::inner}) {
                if (!eligible(t, meets, x, k)) continue;
                std::vector<NodeId> fresh;
                auto grown = share(graft_at(t, x, k, fresh));
                BoundaryMaps gbm;
                if (base_bmp) gbm = boundary_maps(*grown);
                for (NodeId nv : fresh)
                    push(grown, base_bmp ? &gbm : nullptr, nv, true, false, no_node,
                         {{"kind", "fresh-cone"},
                          {"at", x},
                          {"cone", cone_kind_name(k)},
                          {"picked", nv}});
            }

        if (ar.inserts_left <= 0) return out;

        for (NodeId c = 0; c < t.size(); ++c) {
            if (!t.dense(c)) continue;
            if (t.tree.parent[ix(c)] == no_node && t.tree.is_leaf(c)) continue;
            NodeId v = t.size();
            auto gapped = share(insert_below(t, c));
            BoundaryMaps vbm;
            if (base_bmp) vbm = boundary_maps(*gapped);
            const BoundaryMaps* vbmp = base_bmp ? &vbm : nullptr;
            push(gapped, vbmp, v, true, true, no_node,
                 {{"kind", "dense-gap"}, {"below", c}});
            // stored nodes under c can read differently once v is above them
            // (v may become their nearest seam point); picks the new node
            // leaves untouched are filtered out inside push
            std::vector<NodeId> stack{c};
            while (!stack.empty()) {
                NodeId x = stack.back();
                stack.pop_back();
                if (!in_sel[ix(x)])
                    push(gapped, vbmp, x, true, true, v,
                         {{"kind", "dense-gap"}, {"below", c}, {"picked", x}});
                for (NodeId ch : t.tree.kids[ix(x)]) stack.push_back(ch);
            }
            // the gap point with a fresh cone of its own; cones of kinds the
            // pick does not touch change nothing and are left for the move
            // that uses them
            std::vector<char> vmeets = meets_of(*gapped);
            for (ConeKind k : {ConeKind::border, ConeKind::inner}) {
                if (!eligible(*gapped, vmeets, v, k)) continue;
                std::vector<NodeId> fresh;
                auto g = share(graft_at(*gapped, v, k, fresh));
                BoundaryMaps gbm;
                if (base_bmp) gbm = boundary_maps(*g);
                for (NodeId nv : fresh)
                    push(g, base_bmp ? &gbm : nullptr, nv, true, true, no_node,
                         {{"kind", std::string("dense-gap+") + cone_kind_name(k)},
                          {"below", c},
                          {"picked", nv}});
            }
        }
        return out;
    }

    // An aligned exchange: both characters match, so closed tuples pair up
    // position by position and the induced elements extend the partial
    // isomorphism.  The induced order is the same deterministic walk on both
    // sides, which keeps the pairing consistent across rounds.
    Position make_child(const Position& p, int s, const Cand& pick,
                        const Cand& reply) {
        Position q;
        q.side[s] = {*pick.t, p.side[s].inserts_left - (pick.gap_inserted ? 1 : 0)};
        q.side[1 - s] = {*reply.t,
                         p.side[1 - s].inserts_left - (reply.gap_inserted ? 1 : 0)};
        q.sel[s] = pick.closed;
        q.sel[1 - s] = reply.closed;
        return q;
    }

    bool duplicator_wins(const Position& p, int rounds) {
        if (rounds == 0) return true;
        std::string k = position_key(p, rounds);
        auto it = memo.find(k);
        if (it != memo.end()) {
            ++stats.memo_hits;
            return it->second;
        }
        ++stats.positions;
        bool result = true;
        bool last = rounds == 1;
        auto cands0 = candidates(p, 0, last);
        auto cands1 = candidates(p, 1, last);
        for (int s = 0; s < 2 && result; ++s) {
            const auto& picks = s == 0 ? cands0 : cands1;
            const auto& all_replies = s == 0 ? cands1 : cands0;
            // only a reply of the very same character answers a pick
            std::map<std::string, std::vector<const Cand*>> by_qf;
            for (const auto& r : all_replies) by_qf[r.ext_qf].push_back(&r);
            for (const auto& c : picks) {
                bool saved = false;
                auto bucket = by_qf.find(c.ext_qf);
                if (bucket != by_qf.end()) {
                    if (last) {
                        // the game ends with this exchange, so any reply of
                        // matching character settles it
                        saved = true;
                    } else {
                        for (const Cand* r : bucket->second) {
                            if (duplicator_wins(make_child(p, s, c, *r), rounds - 1)) {
                                saved = true;
                                break;
                            }
                        }
                    }
                }
                if (!saved) {
                    result = false;
                    break;
                }
            }
        }
        memo[k] = result;
        return result;
    }

    json snapshot(const Position& p) {
        json pairs = json::array();
        for (std::size_t i = 0; i < p.sel[0].size(); ++i)
            pairs.push_back(json::array({p.sel[0][i], p.sel[1][i]}));
        return pairs;
    }

    // Replay a line the challenger wins, preferring the earliest winning
    // pick and the duplicator's first still-legal reply each round.
    json winning_play(const Position& start, int rounds) {
        json play = json::array();
        Position cur = start;
        int left = rounds;
        while (left > 0) {
            bool found = false;
            for (int s = 0; s < 2 && !found; ++s) {
                auto picks = candidates(cur, s, left == 1);
                auto replies = candidates(cur, 1 - s, left == 1);
                for (const auto& c : picks) {
                    bool saved = false;
                    const Cand* fallback = nullptr;
                    for (const auto& r : replies) {
                        if (r.ext_qf != c.ext_qf) continue;
                        if (!fallback) fallback = &r;
                        if (duplicator_wins(make_child(cur, s, c, r), left - 1)) {
                            saved = true;
                            break;
                        }
                    }
                    if (saved) continue;
                    json entry = {{"round", rounds - left + 1},
                                  {"side", s == 0 ? "left" : "right"},
                                  {"pick", c.info}};
                    if (fallback) {
                        Position nxt = make_child(cur, s, c, *fallback);
                        entry["reply"] = fallback->info;
                        entry["selection"] = snapshot(nxt);
                        play.push_back(entry);
                        cur = nxt;
                        --left;
                    } else {
                        entry["reply"] = nullptr;
                        play.push_back(entry);
                        left = 0;
                    }
                    found = true;
                    break;
                }
            }
            if (!found) break;  // should not happen on a losing position
        }
        return play;
    }
};

}  // namespace

GameResult back_and_forth(const AnnotatedTree& a, const AnnotatedTree& b,
                          const Signature& sig, int rounds) {
    if (rounds < 1)
        throw error(errc::bad_input, "round count must be positive", {{"rounds", rounds}});
    if (sig.has_v())
        throw error(errc::bad_input,
                    "incompatible signatures: designated-branch language needs branch data");
    for (const AnnotatedTree* t : {&a, &b}) {
        if (t->size() == 0) throw error(errc::empty_input, "empty structure");
        auto rep = validate_annotations(*t);
        if (!rep.ok())
            throw error(errc::bad_input, "annotated structure invalid",
                        {{"clause", rep.violations[0].clause}});
        if (t->tree.root() == no_node)
            throw error(errc::bad_input, "structure is a forest");
        if (t->size() == 1 && t->tree.has_virtual_root)
            throw error(errc::bad_input,
                        "single point below an unbounded branch has no stratum color");
    }

    Solver sv;
    sv.sig = sig;
    Position start;
    start.side[0] = {a, rounds};
    start.side[1] = {b, rounds};
    bool dup = sv.duplicator_wins(start, rounds);

    GameResult res;
    res.verdict = dup ? GameVerdict::equivalent : GameVerdict::distinguished;
    res.rounds = rounds;
    res.transcript = {{"verdict", dup ? "equivalent" : "distinguished"},
                      {"rounds", rounds},
                      {"signature", sig.str()},
                      {"play", json::array()}};
    if (!dup) res.transcript["play"] = sv.winning_play(start, rounds);
    res.stats = sv.stats;
    res.transcript["stats"] = {{"positions", res.stats.positions},
                               {"memo_hits", res.stats.memo_hits},
                               {"materialized", res.stats.materialized}};
    return res;
}

}  // namespace cmt
