#include "cmt/expand.hpp"

#include <algorithm>
#include <cassert>
#include <random>
#include <set>
#include <tuple>

namespace cmt {

namespace {

// incremental construction of an annotated tree
struct Builder {
    std::vector<NodeId> parent;
    std::vector<ColorPair> color;
    std::vector<ConeKind> kind;
    std::vector<char> dense;
    std::vector<int> level;
    bool virtual_root = false;

    NodeId add(NodeId par, ColorPair c, ConeKind k, bool d, int lv) {
        parent.push_back(par);
        color.push_back(c);
        kind.push_back(k);
        dense.push_back(d ? 1 : 0);
        level.push_back(lv);
        return static_cast<NodeId>(parent.size() - 1);
    }

    AnnotatedTree done() {
        AnnotatedTree t;
        t.tree = ConcreteTree::from_parents(std::move(parent), virtual_root);
        t.node_color = std::move(color);
        t.cone_kind = std::move(kind);
        t.dense_mark = std::move(dense);
        t.level_mark = std::move(level);
        return t;
    }
};

void add_border_leaves(Builder& b, NodeId at, int count) {
    for (int i = 0; i < count; ++i)
        b.add(at, ColorPair{}, ConeKind::border, false, 0);
}

// A fresh cone of a T1b level: its first node plus the node's border leaves.
// The node keeps the declared level color with no inner children realized;
// every finite sample of a dense-below-leaves level has such frontier nodes.
void add_fresh_cone(Builder& b, NodeId at, ColorPair col, int mm) {
    NodeId y = b.add(at, col, ConeKind::inner, true, 0);
    add_border_leaves(b, y, mm);
}

AnnotatedTree level_sample(const OneColoredDescriptor& lv, const Budget& bud) {
    Builder b;
    switch (lv.kind) {
        case LevelKind::T00: {
            b.add(no_node, ColorPair{}, ConeKind::border, false, 0);
            break;
        }
        case LevelKind::T0: {
            NodeId r = b.add(no_node, lv.color, ConeKind::border, false, 0);
            add_border_leaves(b, r, capped(lv.color.m, bud.width));
            break;
        }
        case LevelKind::T1a: {
            // a chain of dense nodes, each spanning the declared number of
            // cones; the chain itself realizes one inner cone of each node
            b.virtual_root = true;
            int uu = capped(lv.color.mu, bud.width);
            NodeId prev = no_node;
            for (int i = 0; i < bud.dense_depth; ++i) {
                NodeId x = b.add(prev, lv.color, ConeKind::inner, true, 0);
                int extra = (i + 1 < bud.dense_depth) ? uu - 1 : uu;
                for (int k = 0; k < extra; ++k)
                    b.add(x, ColorPair{}, ConeKind::inner, true, 0);
                prev = x;
            }
            break;
        }
        case LevelKind::T1b: {
            b.virtual_root = true;
            int mm = capped(lv.color.m, bud.width);
            int uu = capped(lv.color.mu, bud.width);
            NodeId prev = no_node;
            for (int i = 0; i < bud.dense_depth; ++i) {
                NodeId x = b.add(prev, lv.color, ConeKind::inner, true, 0);
                add_border_leaves(b, x, mm);
                int fresh = (i + 1 < bud.dense_depth) ? uu - 1 : uu;
                for (int k = 0; k < fresh; ++k) add_fresh_cone(b, x, lv.color, mm);
                prev = x;
            }
            break;
        }
    }
    return b.done();
}

// nearest member of `marks` below-or-equal each node, no_node when none
std::vector<NodeId> nearest_marked(const ConcreteTree& t, const std::set<NodeId>& marks) {
    std::vector<NodeId> near(t.parent.size(), no_node);
    for (NodeId x : t.order) {
        if (marks.count(x)) near[static_cast<std::size_t>(x)] = x;
        else if (t.parent[static_cast<std::size_t>(x)] != no_node)
            near[static_cast<std::size_t>(x)] =
                near[static_cast<std::size_t>(t.parent[static_cast<std::size_t>(x)])];
    }
    return near;
}

// first triple a < gap < c with a, c marked but gap not, chain-wise
std::optional<std::tuple<NodeId, NodeId, NodeId>> convexity_gap(
    const ConcreteTree& t, const std::set<NodeId>& marks) {
    for (NodeId c : marks) {
        NodeId gap = no_node;
        for (NodeId x = t.parent[static_cast<std::size_t>(c)]; x != no_node;
             x = t.parent[static_cast<std::size_t>(x)]) {
            if (marks.count(x)) {
                if (gap != no_node) return std::make_tuple(x, gap, c);
            } else {
                gap = x;
            }
        }
    }
    return std::nullopt;
}

}  // namespace

Extension extend_tree(const AnnotatedTree& base, const AnnotatedTree& t0) {
    if (base.size() <= 1 || t0.size() <= 1)
        throw error(errc::singleton_operand, "extension needs at least two points per operand",
                    {{"base", base.size()}, {"layer", t0.size()}});
    if (base.tree.root() == no_node || t0.tree.root() == no_node)
        throw error(errc::bad_input, "extension operands must be single trees",
                    {{"base_roots", base.tree.roots}, {"layer_roots", t0.tree.roots}});

    auto L = leaves(base.tree);
    bool isolated = base.leaf_isolated(L[0]);
    for (NodeId a : L)
        if (base.leaf_isolated(a) != isolated)
            throw error(errc::star_violated, "leaves must be all isolated or none",
                        {{"isolated", isolated ? L[0] : a}, {"dense", isolated ? a : L[0]}});
    bool t0_rooted = !t0.tree.has_virtual_root;
    if (!isolated && !t0_rooted)
        throw error(errc::star2_violated,
                    "dense leaves can only carry a rooted layer", {{"layer_unrooted", true}});
    if (isolated) {
        std::set<NodeId> parents;
        for (NodeId a : L) parents.insert(base.tree.parent[static_cast<std::size_t>(a)]);
        if (auto gap = convexity_gap(base.tree, parents))
            throw error(errc::star3_violated, "leaf predecessors must form a convex set",
                        {{"lower", std::get<0>(*gap)},
                         {"gap", std::get<1>(*gap)},
                         {"upper", std::get<2>(*gap)}});
    }

    std::size_t nb = base.tree.parent.size(), n0 = t0.tree.parent.size();
    ExtensionWitness w;
    w.t0_rooted = t0_rooted;
    w.sigma.assign(nb, no_node);
    w.rho.assign(nb, no_node);
    NodeId next = 0;
    for (std::size_t x = 0; x < nb; ++x)
        if (!base.tree.is_leaf(static_cast<NodeId>(x))) w.sigma[x] = next++;
    for (NodeId a : L) {
        std::vector<NodeId> copy(n0);
        for (std::size_t t = 0; t < n0; ++t) copy[t] = next++;
        w.tau[a] = std::move(copy);
    }

    std::size_t total = static_cast<std::size_t>(next);
    std::vector<NodeId> par(total, no_node);
    AnnotatedTree out;
    out.node_color.resize(total);
    out.cone_kind.resize(total);
    out.dense_mark.resize(total);
    out.level_mark.resize(total);
    int base_levels = base.level_count();
    NodeId r0 = t0.tree.root();

    for (std::size_t x = 0; x < nb; ++x) {
        if (w.sigma[x] == no_node) continue;
        NodeId ni = w.sigma[x];
        NodeId bp = base.tree.parent[x];
        par[static_cast<std::size_t>(ni)] = bp == no_node ? no_node : w.sigma[static_cast<std::size_t>(bp)];
        out.node_color[static_cast<std::size_t>(ni)] = base.node_color[x];
        out.cone_kind[static_cast<std::size_t>(ni)] = base.cone_kind[x];
        out.dense_mark[static_cast<std::size_t>(ni)] = base.dense_mark[x];
        out.level_mark[static_cast<std::size_t>(ni)] = base.level_mark[x];
    }
    for (NodeId a : L) {
        const auto& copy = w.tau[a];
        NodeId attach = w.sigma[static_cast<std::size_t>(base.tree.parent[static_cast<std::size_t>(a)])];
        for (std::size_t t = 0; t < n0; ++t) {
            NodeId ni = copy[t];
            NodeId tp = t0.tree.parent[t];
            par[static_cast<std::size_t>(ni)] =
                static_cast<NodeId>(t) == r0 ? attach : copy[static_cast<std::size_t>(tp)];
            out.node_color[static_cast<std::size_t>(ni)] = t0.node_color[t];
            out.cone_kind[static_cast<std::size_t>(ni)] = t0.cone_kind[t];
            out.dense_mark[static_cast<std::size_t>(ni)] = t0.dense_mark[t];
            out.level_mark[static_cast<std::size_t>(ni)] = base_levels + t0.level_mark[t];
        }
        // the copy's first node takes over the replaced leaf's slot
        NodeId cr = copy[static_cast<std::size_t>(r0)];
        out.cone_kind[static_cast<std::size_t>(cr)] = base.cone_kind[static_cast<std::size_t>(a)];
        out.dense_mark[static_cast<std::size_t>(cr)] =
            t0_rooted ? base.dense_mark[static_cast<std::size_t>(a)] : 1;
        w.rho[static_cast<std::size_t>(a)] = t0_rooted ? cr : attach;
    }

    out.tree = ConcreteTree::from_parents(std::move(par), base.tree.has_virtual_root);

    std::set<NodeId> Eset;
    for (NodeId a : L) Eset.insert(w.rho[static_cast<std::size_t>(a)]);
    w.E.assign(Eset.begin(), Eset.end());

    if (!t0_rooted) {
        // every cone at an attachment point now extends densely downward, so
        // none of them keeps a first element: fold the border count into the
        // inner one and re-kind the children accordingly
        for (NodeId x : w.E) {
            ColorPair c = out.node_color[static_cast<std::size_t>(x)];
            out.node_color[static_cast<std::size_t>(x)] = {ExtCard{0}, c.m + c.mu};
            for (NodeId k : out.tree.kids[static_cast<std::size_t>(x)])
                if (out.cone_kind[static_cast<std::size_t>(k)] == ConeKind::border)
                    out.cone_kind[static_cast<std::size_t>(k)] = ConeKind::inner;
        }
    }

    auto near = nearest_marked(out.tree, Eset);
    for (std::size_t x = 0; x < total; ++x)
        if (near[x] != no_node) {
            w.E_geq.push_back(static_cast<NodeId>(x));
            w.e[static_cast<NodeId>(x)] = near[x];
        }
    return Extension{std::move(out), std::move(w)};
}

ExtensionAxiomReport check_extension_axioms(const AnnotatedTree& t,
                                            const ExtensionWitness& w) {
    std::size_t n = t.tree.parent.size();
    auto in_range = [&](NodeId x) { return x >= 0 && x < static_cast<NodeId>(n); };
    for (NodeId x : w.E)
        if (!in_range(x)) throw error(errc::bad_input, "witness id out of range", {{"node", x}});
    for (NodeId x : w.E_geq)
        if (!in_range(x)) throw error(errc::bad_input, "witness id out of range", {{"node", x}});
    for (auto& [k, v] : w.e)
        if (!in_range(k) || !in_range(v))
            throw error(errc::bad_input, "witness id out of range", {{"pair", {k, v}}});

    ExtensionAxiomReport rep;
    auto add = [&](const char* clause, json wit) {
        rep.violations.push_back({clause, std::move(wit)});
    };

    if (t.tree.roots.size() != 1) add("good-tree", {{"roots", t.tree.roots}});
    for (std::size_t x = 0; x < n; ++x)
        if (!t.tree.is_leaf(static_cast<NodeId>(x)) && t.node_color[x].m + t.node_color[x].mu < ExtCard{2})
            add("good-tree", {{"node", x}, {"color", t.node_color[x]}});

    std::set<NodeId> E(w.E.begin(), w.E.end());
    std::set<NodeId> Egeq(w.E_geq.begin(), w.E_geq.end());

    if (auto gap = convexity_gap(t.tree, E))
        add("e-set-convex", {{"lower", std::get<0>(*gap)},
                             {"gap", std::get<1>(*gap)},
                             {"upper", std::get<2>(*gap)}});

    auto near = nearest_marked(t.tree, E);
    for (std::size_t x = 0; x < n; ++x) {
        bool above = near[x] != no_node;
        if (above != (Egeq.count(static_cast<NodeId>(x)) > 0)) {
            add("upward-closure", {{"node", x}, {"above_E", above}});
        }
    }

    for (NodeId x : w.E_geq)
        if (!w.e.count(x)) add("domain", {{"missing", x}});
    std::set<NodeId> image;
    for (auto& [k, v] : w.e) {
        if (!Egeq.count(k)) add("domain", {{"extra", k}});
        image.insert(v);
    }
    if (image != E) {
        json wit = json::object();
        for (NodeId v : image)
            if (!E.count(v)) { wit["outside_E"] = v; break; }
        for (NodeId v : E)
            if (!image.count(v)) { wit["unreached"] = v; break; }
        add("image", wit);
    }

    for (NodeId a : leaves(t.tree)) {
        if (!Egeq.count(a)) add("leaves-covered", {{"leaf", a}});
        if (E.count(a)) add("leaves-disjoint", {{"leaf", a}});
    }

    for (auto& [x, ex] : w.e) {
        if (!leq(t.tree, ex, x)) add("deflationary", {{"node", x}, {"e", ex}});
        if (E.count(x) && ex != x) add("fixes-image", {{"node", x}, {"e", ex}});
        if (near[static_cast<std::size_t>(x)] != no_node &&
            ex != near[static_cast<std::size_t>(x)])
            add("greatest-in-branch",
                {{"node", x}, {"e", ex}, {"greatest", near[static_cast<std::size_t>(x)]}});
    }
    return rep;
}

Quotient quotient_sim(const AnnotatedTree& t, const ExtensionWitness& w) {
    auto rep = check_extension_axioms(t, w);
    if (!rep.ok()) {
        json wit = json::array();
        for (auto& v : rep.violations) wit.push_back({{"clause", v.clause}, {"witness", v.witness}});
        throw error(errc::witness_inconsistent, "extension witness fails its axioms",
                    {{"violations", wit}});
    }

    std::size_t n = t.tree.parent.size();
    std::set<NodeId> E(w.E.begin(), w.E.end());

    // anchor: for a node strictly above E, the child of e(x) on the way to x
    std::vector<NodeId> anchor(n, no_node);
    for (NodeId x : t.tree.order) {
        NodeId p = t.tree.parent[static_cast<std::size_t>(x)];
        if (p == no_node) continue;
        if (E.count(p)) anchor[static_cast<std::size_t>(x)] = x;
        else anchor[static_cast<std::size_t>(x)] = anchor[static_cast<std::size_t>(p)];
    }

    // class key: (1, attachment, anchor-or-not) for contracted members,
    // (0, x, x) for singletons
    auto key_of = [&](NodeId x) -> std::tuple<int, NodeId, NodeId> {
        auto it = w.e.find(x);
        if (it != w.e.end()) {
            if (w.t0_rooted) return {1, it->second, no_node};
            if (it->second != x) return {1, it->second, anchor[static_cast<std::size_t>(x)]};
        }
        return {0, x, x};
    };

    std::map<std::tuple<int, NodeId, NodeId>, NodeId> qid_of;
    std::vector<NodeId> proj(n, no_node);
    std::vector<NodeId> top;       // minimal member of each class
    std::vector<char> contracted;  // whole copy folded to a leaf?
    for (std::size_t x = 0; x < n; ++x) {
        auto key = key_of(static_cast<NodeId>(x));
        auto it = qid_of.find(key);
        if (it == qid_of.end()) {
            NodeId q = static_cast<NodeId>(top.size());
            qid_of.emplace(key, q);
            bool cls = std::get<0>(key) == 1;
            top.push_back(cls ? (w.t0_rooted ? std::get<1>(key)
                                             : anchor[x])
                              : static_cast<NodeId>(x));
            contracted.push_back(cls ? 1 : 0);
            proj[x] = q;
        } else {
            proj[x] = it->second;
        }
    }

    std::size_t qn = top.size();
    std::vector<NodeId> qpar(qn, no_node);
    for (std::size_t q = 0; q < qn; ++q) {
        NodeId p = t.tree.parent[static_cast<std::size_t>(top[q])];
        qpar[q] = p == no_node ? no_node : proj[static_cast<std::size_t>(p)];
    }

    Quotient out;
    out.projection = std::move(proj);
    out.tree.tree = ConcreteTree::from_parents(std::move(qpar), t.tree.has_virtual_root);
    out.tree.node_color.resize(qn);
    out.tree.cone_kind.resize(qn);
    out.tree.dense_mark.resize(qn);
    out.tree.level_mark.resize(qn);
    for (std::size_t q = 0; q < qn; ++q) {
        std::size_t m = static_cast<std::size_t>(top[q]);
        if (!contracted[q]) {
            out.tree.node_color[q] = t.node_color[m];
            out.tree.cone_kind[q] = t.cone_kind[m];
            out.tree.dense_mark[q] = t.dense_mark[m];
            out.tree.level_mark[q] = t.level_mark[m];
        } else {
            out.tree.node_color[q] = ColorPair{};
            out.tree.level_mark[q] = t.level_mark[m] - 1;
            if (w.t0_rooted) {
                out.tree.cone_kind[q] = t.cone_kind[m];
                out.tree.dense_mark[q] = t.dense_mark[m];
            } else {
                out.tree.cone_kind[q] = ConeKind::border;
                out.tree.dense_mark[q] = 0;
            }
        }
    }
    if (!w.t0_rooted) {
        // attachment points carried a pooled color in the extension; in the
        // quotient their realized counts are the width-capped original ones
        for (NodeId x : w.E) {
            std::size_t q = static_cast<std::size_t>(out.projection[static_cast<std::size_t>(x)]);
            int border = 0, inner = 0;
            for (NodeId c : out.tree.tree.kids[q])
                (out.tree.cone_kind[static_cast<std::size_t>(c)] == ConeKind::border ? border
                                                                                     : inner)++;
            out.tree.node_color[q] = {ExtCard{border}, ExtCard{inner}};
        }
    }
    return out;
}

const char* interval_form_name(IntervalForm f) {
    switch (f) {
        case IntervalForm::singleton: return "singleton";
        case IntervalForm::open_open: return "open-open";
        case IntervalForm::open_closed: return "open-closed";
    }
    return "unknown";
}

void to_json(json& j, const Interval& iv) {
    j = {{"form", interval_form_name(iv.form)},
         {"color", iv.color},
         {"level", iv.level}};
    j["lo"] = iv.lo ? json(*iv.lo) : json();
    j["hi"] = iv.hi ? json(*iv.hi) : json();
}

std::vector<Interval> interval_decomposition(const AnnotatedTree& t, NodeId alpha) {
    auto chain = branch(t.tree, alpha);
    chain.pop_back();  // the leaf itself is not part of its branch decomposition
    std::vector<Interval> out;
    std::size_t i = 0;
    while (i < chain.size()) {
        std::size_t j = i;
        int lv = t.level_mark[static_cast<std::size_t>(chain[i])];
        ColorPair col = t.node_color[static_cast<std::size_t>(chain[i])];
        while (j < chain.size() && t.level_mark[static_cast<std::size_t>(chain[j])] == lv &&
               t.node_color[static_cast<std::size_t>(chain[j])] == col)
            ++j;
        Interval iv;
        iv.color = col;
        iv.level = lv;
        if (col.mu == ExtCard{0} && col.m >= ExtCard{2}) {
            iv.form = IntervalForm::singleton;
            if (j - i != 1)
                throw error(errc::not_precolored, "a point stratum spans several nodes",
                            {{"clause", "singleton-run"},
                             {"nodes", std::vector<NodeId>(chain.begin() + i, chain.begin() + j)}});
            iv.lo = iv.hi = chain[i];
        } else if (col.m == ExtCard{0} && col.mu >= ExtCard{2}) {
            iv.form = IntervalForm::open_open;
            iv.lo = i == 0 ? std::nullopt : std::optional<NodeId>(chain[i - 1]);
            iv.hi = j < chain.size() ? chain[j] : alpha;
        } else if (col.m >= ExtCard{1} && col.mu >= ExtCard{1}) {
            iv.form = IntervalForm::open_closed;
            iv.lo = i == 0 ? std::nullopt : std::optional<NodeId>(chain[i - 1]);
            iv.hi = chain[j - 1];
        } else {
            throw error(errc::not_precolored, "stratum color fits no interval form",
                        {{"clause", "color-form"}, {"node", chain[i]}, {"color", col}});
        }
        out.push_back(iv);
        i = j;
    }
    return out;
}

namespace {

// Folds the tail window of levels into its last one: pooled colors for the
// nodes of the newly dense stratum, all their cones inner, one shared level
// index.  `we` is one past the window; the merged level keeps the window's
// last descriptor.
void apply_collapse(AnnotatedTree& t, std::vector<OneColoredDescriptor>& built,
                    std::size_t wb, std::size_t we) {
    std::size_t span = we - wb;
    int recolor_level = static_cast<int>(span == 2 ? wb : wb + 1);
    std::size_t n = t.tree.parent.size();
    for (std::size_t x = 0; x < n; ++x) {
        if (t.level_mark[x] == recolor_level && !t.tree.is_leaf(static_cast<NodeId>(x))) {
            ColorPair c = t.node_color[x];
            t.node_color[x] = {ExtCard{0}, c.m + c.mu};
            for (NodeId k : t.tree.kids[x])
                if (t.cone_kind[static_cast<std::size_t>(k)] == ConeKind::border)
                    t.cone_kind[static_cast<std::size_t>(k)] = ConeKind::inner;
        }
    }
    for (std::size_t x = 0; x < n; ++x) {
        int lv = t.level_mark[x];
        if (lv > static_cast<int>(wb) && lv < static_cast<int>(we))
            t.level_mark[x] = static_cast<int>(wb);
        else if (lv >= static_cast<int>(we))
            t.level_mark[x] = lv - static_cast<int>(span - 1);
    }
    built.erase(built.begin() + static_cast<std::ptrdiff_t>(wb),
                built.begin() + static_cast<std::ptrdiff_t>(we - 1));
}

AnnotatedTree permute_ids(const AnnotatedTree& t, std::uint64_t seed) {
    std::size_t n = t.tree.parent.size();
    std::vector<NodeId> fresh(n);
    for (std::size_t i = 0; i < n; ++i) fresh[i] = static_cast<NodeId>(i);
    std::mt19937_64 rng(seed);
    std::shuffle(fresh.begin(), fresh.end(), rng);
    std::vector<NodeId> par(n, no_node);
    AnnotatedTree out;
    out.node_color.resize(n);
    out.cone_kind.resize(n);
    out.dense_mark.resize(n);
    out.level_mark.resize(n);
    for (std::size_t x = 0; x < n; ++x) {
        std::size_t nx = static_cast<std::size_t>(fresh[x]);
        NodeId p = t.tree.parent[x];
        par[nx] = p == no_node ? no_node : fresh[static_cast<std::size_t>(p)];
        out.node_color[nx] = t.node_color[x];
        out.cone_kind[nx] = t.cone_kind[x];
        out.dense_mark[nx] = t.dense_mark[x];
        out.level_mark[nx] = t.level_mark[x];
    }
    out.tree = ConcreteTree::from_parents(std::move(par), t.tree.has_virtual_root);
    return out;
}

}  // namespace

AnnotatedTree expand(const Descriptor& d, const Budget& b, std::uint64_t seed) {
    validate(b);
    auto rep = validate_structural(d);
    if (!rep.ok()) {
        json wit = json::array();
        for (auto& v : rep.violations) wit.push_back({{"clause", v.clause}, {"witness", v.witness}});
        throw error(errc::bad_descriptor, "descriptor fails its structural clauses",
                    {{"violations", wit}});
    }
    if (d.branch_variant)
        throw error(errc::bad_descriptor,
                    "marked-branch variants label edges and cannot be realized alone",
                    {{"descriptor", d.str()}});

    AnnotatedTree cur = level_sample(d.levels[0], b);
    if (cur.size() > b.node_cap)
        throw error(errc::budget_exceeded, "sample would exceed the node cap",
                    {{"needed", cur.size()}, {"node_cap", b.node_cap}, {"at_level", 0}});
    std::vector<OneColoredDescriptor> built{d.levels[0]};

    for (std::size_t i = 1; i < d.levels.size(); ++i) {
        AnnotatedTree t0 = level_sample(d.levels[i], b);
        int nl = static_cast<int>(leaves(cur.tree).size());
        long long needed =
            static_cast<long long>(cur.size()) - nl + static_cast<long long>(nl) * t0.size();
        if (needed > b.node_cap)
            throw error(errc::budget_exceeded, "sample would exceed the node cap",
                        {{"needed", needed}, {"node_cap", b.node_cap}, {"at_level", i}});

        auto snap_color = cur.node_color;
        auto snap_kind = cur.cone_kind;
        Extension ext = extend_tree(cur, t0);
        built.push_back(d.levels[i]);

        bool merged = false;
        while (auto win = first_collapse_window(built)) {
            merged = true;
            auto [wb, we] = *win;
            assert(we == built.size());
            apply_collapse(ext.tree, built, wb, we);
        }
        if (!merged) {
            // distinct levels stay distinct: bring back the per-level colors
            // and kinds that the attachment bookkeeping pooled
            for (std::size_t x = 0; x < snap_color.size(); ++x)
                if (ext.witness.sigma[x] != no_node) {
                    ext.tree.node_color[static_cast<std::size_t>(ext.witness.sigma[x])] = snap_color[x];
                    ext.tree.cone_kind[static_cast<std::size_t>(ext.witness.sigma[x])] = snap_kind[x];
                }
            NodeId r0 = t0.tree.root();
            for (auto& [a, copy] : ext.witness.tau)
                ext.tree.cone_kind[static_cast<std::size_t>(copy[static_cast<std::size_t>(r0)])] =
                    snap_kind[static_cast<std::size_t>(a)];
        }
        cur = std::move(ext.tree);
    }
    return permute_ids(cur, seed);
}

Descriptor recognize(const AnnotatedTree& t) {
    auto rep = validate_annotations(t);
    if (!rep.ok()) {
        json wit = json::array();
        for (auto& v : rep.violations) wit.push_back({{"clause", v.clause}, {"witness", v.witness}});
        throw error(errc::recognition_failure, "annotations are incoherent",
                    {{"violations", wit}});
    }
    if (t.tree.root() == no_node)
        throw error(errc::recognition_failure, "input is a forest, not a tree",
                    {{"roots", t.tree.roots}});
    if (t.size() == 1) {
        if (t.tree.has_virtual_root)
            throw error(errc::not_precolored, "a lone dense point names no pattern",
                        {{"clause", "lone-dense-point"}});
        return single(LevelKind::T00, 0, 0);
    }

    auto L = leaves(t.tree);
    using Sig = std::vector<std::tuple<int, std::int64_t, std::int64_t, int>>;
    auto signature_of = [&](NodeId a, std::vector<Interval>& ivs) {
        ivs = interval_decomposition(t, a);
        Sig s;
        for (auto& iv : ivs)
            s.emplace_back(iv.level, iv.color.m.v, iv.color.mu.v, static_cast<int>(iv.form));
        return s;
    };
    std::vector<Interval> first_ivs;
    Sig first = signature_of(L[0], first_ivs);
    for (std::size_t i = 1; i < L.size(); ++i) {
        std::vector<Interval> ivs;
        if (signature_of(L[i], ivs) != first)
            throw error(errc::recognition_failure, "inconsistent branches",
                        {{"leaf", L[0]}, {"other", L[i]}});
    }

    std::vector<OneColoredDescriptor> levels;
    for (std::size_t i = 0; i < first_ivs.size(); ++i) {
        const Interval& iv = first_ivs[i];
        if (iv.level != static_cast<int>(i))
            throw error(errc::not_precolored, "strata do not step one level at a time",
                        {{"clause", "level-order"}, {"stratum", i}, {"level", iv.level}});
        switch (iv.form) {
            case IntervalForm::singleton:
                levels.push_back(level(LevelKind::T0, iv.color.m, 0));
                break;
            case IntervalForm::open_open:
                levels.push_back(level(LevelKind::T1a, 0, iv.color.mu));
                break;
            case IntervalForm::open_closed:
                levels.push_back(level(LevelKind::T1b, iv.color.m, iv.color.mu));
                break;
        }
    }
    for (std::size_t i = 0; i + 1 < levels.size(); ++i)
        if (levels[i].kind == LevelKind::T1a && levels[i + 1].kind != LevelKind::T0)
            throw error(errc::not_precolored,
                        "a stratum open on the right must close with a point",
                        {{"clause", "open-right-singleton"}, {"stratum", i}});

    bool rooted_start = levels.front().kind == LevelKind::T0;
    if (rooted_start == t.tree.has_virtual_root)
        throw error(errc::not_precolored, "root form contradicts the first stratum",
                    {{"clause", "rootedness"},
                     {"virtual_root", t.tree.has_virtual_root},
                     {"first", kind_name(levels.front().kind)}});

    bool iso = t.leaf_isolated(L[0]);
    for (NodeId a : L)
        if (t.leaf_isolated(a) != iso)
            throw error(errc::not_precolored, "leaves are neither all isolated nor all dense",
                        {{"clause", "leaf-isolation"}, {"leaf", a}});
    bool last_dense = levels.back().kind == LevelKind::T1a;
    if (iso == last_dense)
        throw error(errc::not_precolored, "leaf isolation contradicts the last stratum",
                    {{"clause", "leaf-isolation"},
                     {"isolated", iso},
                     {"last", kind_name(levels.back().kind)}});

    return normalize(composite(std::move(levels)));
}

void to_json(json& j, const ExtensionWitness& w) {
    json tau = json::object(), e = json::object();
    for (auto& [a, copy] : w.tau) tau[std::to_string(a)] = copy;
    for (auto& [k, v] : w.e) e[std::to_string(k)] = v;
    j = {{"sigma", w.sigma}, {"rho", w.rho},     {"tau", tau},
         {"E", w.E},         {"E_geq", w.E_geq}, {"e", e},
         {"t0_rooted", w.t0_rooted}};
}

void from_json(const json& j, ExtensionWitness& w) {
    w.sigma = j.at("sigma").get<std::vector<NodeId>>();
    w.rho = j.at("rho").get<std::vector<NodeId>>();
    w.E = j.at("E").get<std::vector<NodeId>>();
    w.E_geq = j.at("E_geq").get<std::vector<NodeId>>();
    w.t0_rooted = j.at("t0_rooted").get<bool>();
    w.tau.clear();
    w.e.clear();
    auto parse_id = [](const std::string& key) -> NodeId {
        try {
            return static_cast<NodeId>(std::stol(key));
        } catch (const std::exception&) {
            throw error(errc::bad_input, "witness key is not a node id", {{"key", key}});
        }
    };
    for (auto& [key, val] : j.at("tau").items())
        w.tau[parse_id(key)] = val.get<std::vector<NodeId>>();
    for (auto& [key, val] : j.at("e").items()) w.e[parse_id(key)] = val.get<NodeId>();
}

}  // namespace cmt
