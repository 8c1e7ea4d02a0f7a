#include "cmt/classify.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cmt/annotated.hpp"
#include "cmt/expand.hpp"

namespace cmt {

int CanonicalPartition::block_of(int element) const {
    for (std::size_t b = 0; b < blocks.size(); ++b)
        for (int e : blocks[b])
            if (e == element) return static_cast<int>(b);
    throw error(errc::bad_input, "element outside the partition", {{"element", element}});
}

CanonicalPartition canonical_partition(const ConcreteCSet& m) {
    CanonicalPartition p;
    if (m.size() == 0) return p;
    std::vector<int> orb = stabilizer_orbits(m);
    int classes = *std::max_element(orb.begin(), orb.end()) + 1;
    p.blocks.resize(classes);
    // stabilizer_orbits numbers classes by smallest member, which is the
    // canonical block order
    for (int e = 0; e < m.size(); ++e) p.blocks[orb[e]].push_back(e);
    return p;
}

bool ThetaTree::contains(NodeId x) const {
    return std::binary_search(theta.begin(), theta.end(), x);
}

namespace {

std::size_t ix(NodeId x) { return static_cast<std::size_t>(x); }

// Block ids present among the leaves of every subtree.
std::vector<std::set<int>> blocks_below(const ConcreteTree& t, const LeafMap& map,
                                        const CanonicalPartition& p) {
    std::vector<std::set<int>> present(t.size());
    for (auto it = t.order.rbegin(); it != t.order.rend(); ++it) {
        NodeId x = *it;
        if (t.is_leaf(x)) {
            present[ix(x)].insert(p.block_of(map.element_of_node[ix(x)]));
        } else {
            for (NodeId ch : t.kids[ix(x)])
                present[ix(x)].insert(present[ix(ch)].begin(), present[ix(ch)].end());
        }
    }
    return present;
}

}  // namespace

ThetaTree theta(const ConcreteCSet& m, const CanonicalPartition& p) {
    {
        CanonicalPartition q = canonical_partition(m);
        if (q.blocks != p.blocks)
            throw error(errc::bad_input, "partition is not the canonical one",
                        {{"expected_blocks", q.blocks.size()},
                         {"given_blocks", p.blocks.size()}});
    }
    ThetaTree out{canonical_tree(m), {}, {}, false};
    const ConcreteTree& t = out.ct.tree;
    out.has_minus_infinity = t.has_virtual_root;

    auto present = blocks_below(t, out.ct.map, p);

    // Bases: nodes where some block covers part of the cone partition only.
    std::vector<char> base(t.size(), 0);
    for (NodeId x = 0; x < t.size(); ++x) {
        if (t.is_leaf(x)) continue;
        for (int b : present[ix(x)]) {
            int with = 0;
            for (NodeId ch : t.kids[ix(x)])
                if (present[ix(ch)].count(b)) ++with;
            if (with < static_cast<int>(t.kids[ix(x)].size())) {
                base[ix(x)] = 1;
                break;
            }
        }
    }

    // Downward closure of the bases, then the two-block condition.
    std::vector<char> t0(t.size(), 0), t1(t.size(), 0);
    for (auto it = t.order.rbegin(); it != t.order.rend(); ++it) {
        NodeId x = *it;
        t0[ix(x)] = base[ix(x)];
        for (NodeId ch : t.kids[ix(x)]) t0[ix(x)] |= t0[ix(ch)];
    }
    for (NodeId x = 0; x < t.size(); ++x)
        t1[ix(x)] = t0[ix(x)] && present[ix(x)].size() >= 2;

    // Roles along the distinguished subtree.  With t1 closed downward, the
    // continuation structure above x is read off its children directly.
    std::vector<std::string> role(t.size());
    std::vector<int> cand_block(t.size(), -1);
    for (NodeId x = 0; x < t.size(); ++x) {
        if (!t1[ix(x)]) continue;
        std::vector<NodeId> cont;
        for (NodeId ch : t.kids[ix(x)])
            if (t1[ix(ch)]) cont.push_back(ch);
        if (cont.empty()) {
            role[ix(x)] = "U";
        } else if (cont.size() >= 2) {
            role[ix(x)] = "B";
        } else {
            std::set<int> off;
            for (NodeId ch : t.kids[ix(x)])
                if (ch != cont[0])
                    off.insert(present[ix(ch)].begin(), present[ix(ch)].end());
            if (off.size() >= 2) role[ix(x)] = "S";
            else cand_block[ix(x)] = *off.begin();
        }
    }
    // Lowest points of the maximal single-block stretches.
    for (NodeId x : t.order) {
        if (cand_block[ix(x)] < 0) continue;
        NodeId par = t.parent[ix(x)];
        if (par == no_node || cand_block[ix(par)] != cand_block[ix(x)])
            role[ix(x)] = "I";
    }

    for (NodeId x = 0; x < t.size(); ++x)
        if (!role[ix(x)].empty()) {
            out.theta.push_back(x);
            out.role[x] = role[ix(x)];
        }

    // Sanity: the set must be closed downward; every later step relies on it.
    for (NodeId x : out.theta) {
        NodeId par = t.parent[ix(x)];
        if (par != no_node && !out.contains(par))
            throw error(errc::internal, "distinguished set not closed downward",
                        {{"node", x}});
    }
    return out;
}

std::vector<int> LabeledClassTree::children(int v) const {
    std::vector<int> out;
    for (int w = 0; w < size(); ++w)
        if (vertices[w].parent == v) out.push_back(w);
    return out;
}

namespace {

// The subtree rooted at top as a tree of its own, preorder node order.
ConcreteTree carve(const ConcreteTree& t, NodeId top) {
    std::vector<NodeId> nodes;
    std::vector<NodeId> stack{top};
    while (!stack.empty()) {
        NodeId x = stack.back();
        stack.pop_back();
        nodes.push_back(x);
        for (auto it = t.kids[ix(x)].rbegin(); it != t.kids[ix(x)].rend(); ++it)
            stack.push_back(*it);
    }
    std::map<NodeId, NodeId> pos;
    for (std::size_t i = 0; i < nodes.size(); ++i) pos[nodes[i]] = static_cast<NodeId>(i);
    std::vector<NodeId> par(nodes.size(), no_node);
    for (std::size_t i = 1; i < nodes.size(); ++i) par[i] = pos[t.parent[ix(nodes[i])]];
    return ConcreteTree::from_parents(std::move(par));
}

std::string vertex_label(const ClassVertex& v) {
    std::ostringstream os;
    os << "n=" << v.n << ";s=" << v.cones.size() << ";";
    for (const auto& c : v.cones) os << c.theory.str() << "x" << c.k.str() << ",";
    os << ";e=" << (v.edge_label ? v.edge_label->str() : "-");
    return os.str();
}

// Canonical encodings of the vertex subtrees, label-aware.
std::vector<std::string> vertex_codes(const LabeledClassTree& x) {
    std::vector<std::string> code(x.size());
    for (int v = x.size() - 1; v >= 0; --v) {
        std::vector<std::string> sub;
        for (int w = v + 1; w < x.size(); ++w)
            if (x.vertices[w].parent == v) sub.push_back(code[w]);
        std::sort(sub.begin(), sub.end());
        code[v] = "(" + vertex_label(x.vertices[v]);
        for (const auto& s : sub) code[v] += s;
        code[v] += ")";
    }
    return code;
}

}  // namespace

LabeledClassTree theta_bar(const ConcreteCSet& m, const ThetaTree& tt) {
    LabeledClassTree out;
    if (tt.theta.empty()) return out;
    const ConcreteTree& t = tt.ct.tree;
    NodeId r = t.root();
    if (r == no_node || !tt.contains(r))
        throw error(errc::internal, "distinguished set misses the root", json::object());

    std::vector<int> orb = node_orbits(t);
    std::map<int, std::vector<NodeId>> groups;
    for (NodeId x : tt.theta) groups[orb[ix(x)]].push_back(x);

    std::vector<char> has_theta(t.size(), 0);
    for (auto it = t.order.rbegin(); it != t.order.rend(); ++it) {
        NodeId x = *it;
        has_theta[ix(x)] = tt.contains(x) ? 1 : 0;
        for (NodeId ch : t.kids[ix(x)]) has_theta[ix(x)] |= has_theta[ix(ch)];
    }

    // One vertex per orbit; the labels must agree across all of its members.
    std::map<int, int> vertex_of;
    std::vector<int> orbit_ids;
    for (auto& [o, members] : groups) {
        vertex_of[o] = static_cast<int>(orbit_ids.size());
        orbit_ids.push_back(o);
    }
    for (auto& [o, members] : groups) {
        ClassVertex v;
        v.members = members;
        v.n = static_cast<int>(members.size());
        if (members[0] == r) {
            v.parent = -1;
        } else {
            NodeId par = t.parent[ix(members[0])];
            if (!tt.contains(par))
                throw error(errc::internal, "member without distinguished predecessor",
                            {{"node", members[0]}});
            v.parent = vertex_of.at(orb[ix(par)]);
            for (NodeId a : members)
                if (orb[ix(t.parent[ix(a)])] != orb[ix(par)])
                    throw error(errc::internal, "orbit with mixed predecessors",
                                {{"vertex_member", a}});
        }
        // Cone families at each member; a realized tree never leaves a dense
        // stretch below a distinguished point, so edges stay unlabeled.
        std::map<std::string, ConeLabel> agg0;
        for (std::size_t mi = 0; mi < members.size(); ++mi) {
            NodeId a = members[mi];
            std::map<std::string, ConeLabel> agg;
            for (NodeId ch : t.kids[ix(a)]) {
                if (has_theta[ix(ch)]) continue;
                Descriptor d;
                try {
                    d = recognize(annotate_finite(carve(t, ch)));
                } catch (const error& e) {
                    throw error(errc::recognition_failure,
                                std::string("cone out of reach: ") + e.what(),
                                {{"vertex_member", a}, {"cone", ch}, {"inner", e.detail}});
                }
                auto [it, fresh] = agg.emplace(d.str(), ConeLabel{d, 0});
                it->second.k = it->second.k + 1;
                (void)fresh;
            }
            if (mi == 0) {
                agg0 = agg;
            } else {
                bool same = agg.size() == agg0.size();
                if (same)
                    for (auto& [key, lab] : agg)
                        if (!agg0.count(key) || agg0.at(key).k != lab.k) same = false;
                if (!same)
                    throw error(errc::internal, "orbit members with different cone families",
                                {{"vertex_member", a}});
            }
        }
        for (auto& [key, lab] : agg0) v.cones.push_back(lab);
        out.vertices.push_back(std::move(v));
    }

    // Root first, then children in canonical order; parents before children.
    int root_vertex = vertex_of.at(orb[ix(r)]);
    auto codes = vertex_codes(out);
    std::vector<int> order{root_vertex};
    std::vector<int> new_id(out.size(), -1);
    new_id[root_vertex] = 0;
    for (std::size_t head = 0; head < order.size(); ++head) {
        int v = order[head];
        std::vector<int> kids;
        for (int w = 0; w < out.size(); ++w)
            if (out.vertices[w].parent == v) kids.push_back(w);
        std::sort(kids.begin(), kids.end(), [&](int a, int b) {
            if (codes[a] != codes[b]) return codes[a] < codes[b];
            return out.vertices[a].members[0] < out.vertices[b].members[0];
        });
        for (int w : kids) {
            new_id[w] = static_cast<int>(order.size());
            order.push_back(w);
        }
    }
    LabeledClassTree sorted;
    for (int v : order) {
        ClassVertex cv = out.vertices[v];
        cv.parent = cv.parent < 0 ? -1 : new_id[cv.parent];
        sorted.vertices.push_back(std::move(cv));
    }
    return sorted;
}

std::string class_tree_code(const LabeledClassTree& x) {
    if (x.size() == 0) return "()";
    return vertex_codes(x)[0];
}

bool class_tree_isomorphic(const LabeledClassTree& a, const LabeledClassTree& b) {
    return class_tree_code(a) == class_tree_code(b);
}

bool ConstraintReport::ok() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const ConstraintCheck& c) { return c.pass; });
}

const ConstraintCheck& ConstraintReport::check(int clause) const {
    for (const auto& c : checks)
        if (c.clause == clause) return c;
    throw error(errc::bad_input, "no such clause", {{"clause", clause}});
}

namespace {

// Exhaustive search for a label-preserving tree bijection other than the
// identity.
bool nontrivial_automorphism(const LabeledClassTree& x, std::vector<int>& image) {
    int V = x.size();
    std::vector<std::string> label(V);
    for (int v = 0; v < V; ++v) label[v] = vertex_label(x.vertices[v]);
    image.assign(V, -1);
    std::vector<char> used(V, 0);

    std::function<bool(int, bool)> place = [&](int v, bool moved) -> bool {
        if (v == V) return moved;
        int par = x.vertices[v].parent;
        for (int w = 0; w < V; ++w) {
            if (used[w] || label[w] != label[v]) continue;
            int wpar = x.vertices[w].parent;
            if ((par < 0) != (wpar < 0)) continue;
            if (par >= 0 && image[par] != wpar) continue;
            image[v] = w;
            used[w] = 1;
            if (place(v + 1, moved || w != v)) return true;
            used[w] = 0;
            image[v] = -1;
        }
        return false;
    };
    return place(0, false);
}

ExtCard minus_one(ExtCard c) { return c.is_inf() ? c : ExtCard{c.v - 1}; }

Descriptor leaf_theory() { return single(LevelKind::T00, 0, 0); }

}  // namespace

ConstraintReport validate_constraints(const LabeledClassTree& x, bool strict9) {
    ConstraintReport rep;
    const char* names[10] = {
        "divisibility",        "maximal-multiplicity", "virtual-root-edge",
        "unique-branch-support", "edge-label-form",    "label-cardinalities",
        "bare-maximal-split",  "forbidden-merge-patterns", "tower-repetition",
        "rigidity"};
    for (int i = 0; i < 10; ++i)
        rep.checks.push_back({i + 1, names[i], true, json::array()});
    int V = x.size();
    if (V == 0) return rep;

    for (int v = 0; v < V; ++v) {
        int par = x.vertices[v].parent;
        if ((v == 0) != (par < 0) || par >= v || x.vertices[v].n < 1)
            throw error(errc::bad_input, "malformed labeled tree", {{"vertex", v}});
    }
    std::vector<std::vector<int>> kids(V);
    for (int v = 1; v < V; ++v) kids[x.vertices[v].parent].push_back(v);
    auto fail = [&](int clause, json w) {
        rep.checks[clause - 1].pass = false;
        rep.checks[clause - 1].witnesses.push_back(std::move(w));
    };

    // A root family that is no node of its own with a single unit successor
    // encodes an order unbounded below.
    bool below_all = x.s(0) == 0 && kids[0].size() == 1 && x.vertices[kids[0][0]].n == 1;

    // (1) orbit sizes
    if (x.vertices[0].n != 1) fail(1, {{"vertex", 0}, {"n", x.vertices[0].n}});
    for (int v = 1; v < V; ++v)
        if (x.vertices[v].n % x.vertices[x.vertices[v].parent].n != 0)
            fail(1, {{"vertex", v},
                     {"n", x.vertices[v].n},
                     {"parent_n", x.vertices[x.vertices[v].parent].n}});

    // (2) childless vertices carry a leaf family or at least two cones
    for (int v = 0; v < V; ++v) {
        if (!kids[v].empty()) continue;
        ExtCard total{0};
        for (const auto& c : x.vertices[v].cones) total = total + c.k;
        if (x.s(v) != 0 && total < ExtCard{2})
            fail(2, {{"vertex", v}, {"total", total}});
    }

    // (3) unbounded below forces a labeled first edge
    if (below_all) {
        int b = kids[0][0];
        if (!x.vertices[b].edge_label) fail(3, {{"vertex", b}});
    }

    // (4) single-chain continuation needs a cone of its own
    for (int v = 0; v < V; ++v) {
        bool chain = (kids[v].size() == 1 &&
                      x.vertices[kids[v][0]].n == x.vertices[v].n) ||
                     (v == 0 && kids[v].empty());
        if (v == 0 && below_all) chain = false;
        if (chain && x.s(v) == 0) fail(4, {{"vertex", v}});
    }

    // (5) edge labels are marked-branch theories
    std::vector<char> edge_ok(V, 0);
    for (int v = 1; v < V; ++v) {
        if (!x.vertices[v].edge_label) continue;
        const Descriptor& e = *x.vertices[v].edge_label;
        auto structural = validate_structural(e);
        if (!e.branch_variant || !structural.ok() || !validate(e).ok()) {
            json why = json::array();
            for (const auto& viol : validate(e).violations) why.push_back(viol.clause);
            if (!e.branch_variant) why.push_back("no-branch-mark");
            fail(5, {{"vertex", v}, {"label", e.str()}, {"why", why}});
        } else {
            edge_ok[v] = 1;
        }
    }

    // (6) vertex labels: valid plain theories, distinct, counts sane
    for (int v = 0; v < V; ++v) {
        const auto& cones = x.vertices[v].cones;
        int infinite = 0;
        for (std::size_t i = 0; i < cones.size(); ++i) {
            if (cones[i].k.is_inf()) ++infinite;
            if (cones[i].k < ExtCard{1})
                fail(6, {{"vertex", v}, {"why", "zero-count"}, {"index", i}});
            if (cones[i].theory.branch_variant || !validate(cones[i].theory).ok())
                fail(6, {{"vertex", v},
                         {"why", "bad-theory"},
                         {"label", cones[i].theory.str()}});
            for (std::size_t j = i + 1; j < cones.size(); ++j)
                if (descriptor_equal(cones[i].theory, cones[j].theory))
                    fail(6, {{"vertex", v}, {"why", "duplicate-theory"}});
        }
        if (infinite > 1) fail(6, {{"vertex", v}, {"why", "two-infinite-counts"}});
    }

    // helpers over a vertex's labels
    auto has_label = [&](int v, const Descriptor& d,
                         std::optional<ExtCard> k) {
        for (const auto& c : x.vertices[v].cones)
            if (descriptor_equal(c.theory, d) && (!k || c.k == *k)) return true;
        return false;
    };

    // (7) childless, non-root, bare edge: two distinct theories at least
    for (int v = 1; v < V; ++v)
        if (kids[v].empty() && !x.vertices[v].edge_label && x.s(v) < 2)
            fail(7, {{"vertex", v}, {"s", x.s(v)}});

    // (8) childless vertices may not reproduce the edge theory below them
    for (int v = 1; v < V; ++v) {
        if (!kids[v].empty() || !edge_ok[v]) continue;
        Descriptor base = *x.vertices[v].edge_label;
        base.branch_variant = false;
        base = normalize(base);
        int n = static_cast<int>(base.levels.size());
        ExtCard m1 = base.levels[0].color.m, mu1 = base.levels[0].color.mu;
        auto upper = tail(base);
        std::string pattern;
        if (m1 == ExtCard{0} && n >= 2 && x.s(v) == 1 &&
            has_label(v, *upper, base.levels[1].color.m))
            pattern = "upper-levels";
        else if (m1 == ExtCard{0} && x.s(v) == 1 && has_label(v, base, mu1))
            pattern = "whole-theory";
        else if (m1 != ExtCard{0} && mu1 != ExtCard{0} && n == 1 && x.s(v) == 2 &&
                 has_label(v, base, mu1) && has_label(v, leaf_theory(), m1))
            pattern = "theory-plus-leaves";
        else if (m1 != ExtCard{0} && mu1 != ExtCard{0} && n >= 2 && x.s(v) == 2 &&
                 has_label(v, base, mu1) && has_label(v, *upper, m1))
            pattern = "theory-plus-upper";
        if (!pattern.empty()) fail(8, {{"vertex", v}, {"pattern", pattern}});
    }

    // (9) a vertex passing its edge theory on to a child edge may not
    // complete a model of that theory with its own cones
    for (int v = 1; v < V; ++v) {
        if (kids[v].empty() || !edge_ok[v]) continue;
        const Descriptor& e = *x.vertices[v].edge_label;
        bool passed_on = false;
        int via = -1;
        for (int b : kids[v])
            if (x.vertices[b].edge_label && edge_ok[b] &&
                descriptor_equal(*x.vertices[b].edge_label, e)) {
                passed_on = true;
                via = b;
                break;
            }
        if (!passed_on) continue;
        Descriptor base = e;
        base.branch_variant = false;
        base = normalize(base);
        ExtCard m1 = base.levels[0].color.m, mu1 = base.levels[0].color.mu;
        auto upper = tail(base);
        std::string pattern;
        if (m1 >= ExtCard{1} && mu1 >= ExtCard{2} && x.s(v) == 2 &&
            has_label(v, base, minus_one(mu1)) && upper &&
            has_label(v, *upper, strict9 ? std::optional<ExtCard>(m1) : std::nullopt))
            pattern = "split-continuation";
        else if (m1 == ExtCard{0} && x.s(v) == 1 && has_label(v, base, mu1))
            pattern = "whole-theory";
        else if (mu1 == ExtCard{1} && x.s(v) == 1 && upper && has_label(v, *upper, m1))
            pattern = "upper-levels";
        if (!pattern.empty())
            fail(9, {{"vertex", v}, {"via", via}, {"pattern", pattern}});
    }

    // (10) rigidity
    {
        std::vector<int> image;
        if (nontrivial_automorphism(x, image))
            fail(10, {{"image", image}});
    }
    return rep;
}

void to_json(json& j, const LabeledClassTree& x) {
    json verts = json::array();
    for (int v = 0; v < x.size(); ++v) {
        const ClassVertex& cv = x.vertices[v];
        json cones = json::array();
        for (const auto& c : cv.cones)
            cones.push_back({{"descriptor", c.theory}, {"k", c.k}});
        verts.push_back({{"id", v},
                         {"parent", cv.parent < 0 ? json() : json(cv.parent)},
                         {"n", cv.n},
                         {"s", x.s(v)},
                         {"cones", cones},
                         {"edge_label", cv.edge_label ? json(*cv.edge_label) : json()}});
    }
    j = {{"vertices", verts}};
}

void from_json(const json& j, LabeledClassTree& x) {
    x.vertices.clear();
    const json& verts = j.at("vertices");
    for (std::size_t i = 0; i < verts.size(); ++i) {
        const json& jv = verts[i];
        if (jv.at("id").get<int>() != static_cast<int>(i))
            throw error(errc::bad_input, "vertex ids must be 0..n-1 in order",
                        {{"index", i}});
        ClassVertex cv;
        cv.parent = jv.at("parent").is_null() ? -1 : jv.at("parent").get<int>();
        if ((i == 0) != (cv.parent < 0) || cv.parent >= static_cast<int>(i))
            throw error(errc::bad_input, "parents must precede their children",
                        {{"index", i}});
        cv.n = jv.at("n").get<int>();
        if (cv.n < 1)
            throw error(errc::bad_input, "vertex multiplicity must be positive",
                        {{"index", i}});
        for (const json& jc : jv.at("cones"))
            cv.cones.push_back({jc.at("descriptor").get<Descriptor>(),
                                jc.at("k").get<ExtCard>()});
        std::sort(cv.cones.begin(), cv.cones.end(),
                  [](const ConeLabel& a, const ConeLabel& b) {
                      return a.theory.str() < b.theory.str();
                  });
        if (jv.count("s") && jv.at("s").get<int>() != static_cast<int>(cv.cones.size()))
            throw error(errc::bad_input, "s disagrees with the cone list",
                        {{"index", i}});
        if (jv.count("edge_label") && !jv.at("edge_label").is_null())
            cv.edge_label = jv.at("edge_label").get<Descriptor>();
        x.vertices.push_back(std::move(cv));
    }
}

std::string class_tree_dot(const LabeledClassTree& x) {
    std::ostringstream os;
    os << "digraph classtree {\n  node [shape=record];\n";
    for (int v = 0; v < x.size(); ++v) {
        const ClassVertex& cv = x.vertices[v];
        os << "  v" << v << " [label=\"{A" << v << " | n=" << cv.n << " s=" << x.s(v);
        for (const auto& c : cv.cones)
            os << "\\n" << c.theory.str() << " x " << c.k.str();
        os << "}\"];\n";
    }
    for (int v = 1; v < x.size(); ++v) {
        os << "  v" << x.vertices[v].parent << " -> v" << v;
        if (x.vertices[v].edge_label)
            os << " [label=\"" << x.vertices[v].edge_label->str() << "\"]";
        os << ";\n";
    }
    os << "}\n";
    return os.str();
}

}  // namespace cmt
