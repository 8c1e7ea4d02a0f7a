#include "cmt/cset.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace cmt {

int ConcreteCSet::index_of(const std::string& name) const {
    for (int i = 0; i < size(); ++i)
        if (elements[i] == name) return i;
    return -1;
}

void to_json(json& j, const ConcreteCSet& m) {
    j = json::object();
    j["elements"] = m.elements;
    json ts = json::array();
    for (auto& [x, y, z] : m.triples)
        ts.push_back({m.elements[x], m.elements[y], m.elements[z]});
    j["triples"] = ts;
}

void from_json(const json& j, ConcreteCSet& m) {
    m.elements = j.at("elements").get<std::vector<std::string>>();
    m.triples.clear();
    std::map<std::string, int> idx;
    for (int i = 0; i < m.size(); ++i) {
        if (!idx.emplace(m.elements[i], i).second)
            throw error(errc::bad_input, "duplicate element name", {{"name", m.elements[i]}});
    }
    for (auto& t : j.at("triples")) {
        if (!t.is_array() || t.size() != 3)
            throw error(errc::bad_input, "triple is not a 3-element array", {{"triple", t}});
        std::array<int, 3> a{};
        for (int k = 0; k < 3; ++k) {
            auto it = idx.find(t[k].get<std::string>());
            if (it == idx.end())
                throw error(errc::bad_input, "triple names an unknown element", {{"triple", t}});
            a[k] = it->second;
        }
        m.triples.insert(a);
    }
}

ConcreteCSet trivial_cset(int n) {
    ConcreteCSet m;
    for (int i = 0; i < n; ++i)
        m.elements.push_back(i < 26 ? std::string(1, static_cast<char>('a' + i))
                                    : "e" + std::to_string(i));
    for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y)
            if (x != y) m.triples.insert({x, y, y});
    return m;
}

CAxiomReport check_c_axioms(const ConcreteCSet& m) {
    CAxiomReport rep;
    auto name = [&](int i) { return m.elements[i]; };
    for (auto& [x, y, z] : m.triples) {
        if (!m.holds(x, z, y))
            rep.violations.push_back({1, {{"x", name(x)}, {"y", name(y)}, {"z", name(z)}}});
        if (m.holds(y, x, z))
            rep.violations.push_back({2, {{"x", name(x)}, {"y", name(y)}, {"z", name(z)}}});
        for (int w = 0; w < m.size(); ++w)
            if (!m.holds(x, y, w) && !m.holds(w, y, z)) {
                rep.violations.push_back(
                    {3, {{"x", name(x)}, {"y", name(y)}, {"z", name(z)}, {"w", name(w)}}});
                break;  // one witness per triple keeps the report readable
            }
    }
    for (int x = 0; x < m.size(); ++x)
        for (int y = 0; y < m.size(); ++y)
            if (x != y && !m.holds(x, y, y))
                rep.violations.push_back({4, {{"x", name(x)}, {"y", name(y)}}});
    return rep;
}

CanonicalTree canonical_tree(const ConcreteCSet& m) {
    if (m.size() == 0)
        throw error(errc::empty_input, "cannot build a tree from an empty set");
    auto axioms = check_c_axioms(m);
    if (!axioms.ok()) {
        json v = json::array();
        for (auto& viol : axioms.violations)
            v.push_back({{"axiom", viol.axiom}, {"witness", viol.witness}});
        throw error(errc::bad_input, "relation violates the C axioms", {{"violations", v}});
    }
    const int n = m.size();
    // below[(a,b)][(c,d)]: the pair (a,b) dominates no further than (c,d)
    auto dominated = [&](int a, int b, int c, int d) {
        return !m.holds(c, a, b) && !m.holds(d, a, b);
    };
    // group pairs into classes of mutual domination
    std::vector<std::array<int, 2>> pairs;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) pairs.push_back({a, b});
    const int np = static_cast<int>(pairs.size());
    std::vector<int> cls(np, -1);
    std::vector<std::array<int, 2>> reps;  // class -> lexicographically first pair
    for (int i = 0; i < np; ++i) {
        if (cls[i] != -1) continue;
        int id = static_cast<int>(reps.size());
        reps.push_back(pairs[i]);
        cls[i] = id;
        for (int k = i + 1; k < np; ++k) {
            if (cls[k] != -1) continue;
            if (dominated(pairs[i][0], pairs[i][1], pairs[k][0], pairs[k][1]) &&
                dominated(pairs[k][0], pairs[k][1], pairs[i][0], pairs[i][1]))
                cls[k] = id;
        }
    }
    const int nc = static_cast<int>(reps.size());
    auto cls_le = [&](int u, int v) {
        return dominated(reps[u][0], reps[u][1], reps[v][0], reps[v][1]);
    };
    // number classes parents-first: by how many classes sit weakly below
    std::vector<int> downsize(nc, 0);
    for (int u = 0; u < nc; ++u)
        for (int v = 0; v < nc; ++v)
            if (cls_le(v, u)) ++downsize[u];
    std::vector<int> by_depth(nc);
    std::iota(by_depth.begin(), by_depth.end(), 0);
    std::sort(by_depth.begin(), by_depth.end(), [&](int u, int v) {
        if (downsize[u] != downsize[v]) return downsize[u] < downsize[v];
        return reps[u] < reps[v];
    });
    std::vector<NodeId> node_of(nc);
    for (int i = 0; i < nc; ++i) node_of[by_depth[i]] = static_cast<NodeId>(i);
    ConcreteTree t;
    t.parent.assign(nc, no_node);
    for (int u = 0; u < nc; ++u) {
        // parent: the deepest class strictly below u
        int best = -1;
        for (int v = 0; v < nc; ++v) {
            if (v == u || !cls_le(v, u) || cls_le(u, v)) continue;
            if (best == -1 || downsize[v] > downsize[best]) best = v;
        }
        if (best != -1) {
            // defensively confirm the elements below u form a chain
            for (int v = 0; v < nc; ++v)
                if (v != u && cls_le(v, u) && !cls_le(u, v) &&
                    !cls_le(v, best) && !cls_le(best, v))
                    throw error(errc::internal, "pair quotient is not tree-ordered",
                                {{"class", u}});
            t.parent[node_of[u]] = node_of[best];
        }
    }
    t.init();
    CanonicalTree out;
    out.tree = std::move(t);
    out.map.leaf_of_element.assign(n, no_node);
    out.map.element_of_node.assign(nc, -1);
    for (int a = 0; a < n; ++a) {
        int i = a * n + a;  // index of the pair (a,a)
        NodeId leaf = node_of[cls[i]];
        if (out.map.element_of_node[leaf] != -1 && out.map.element_of_node[leaf] != a)
            throw error(errc::internal, "two elements share a diagonal class",
                        {{"node", leaf}});
        out.map.leaf_of_element[a] = leaf;
        out.map.element_of_node[leaf] = a;
    }
    return out;
}

InducedCSet leaves_cset(const ConcreteTree& t) {
    auto rep = is_good_tree(t);
    if (!rep.ok()) {
        json v = json::array();
        for (auto& viol : rep.violations) v.push_back({{"clause", viol.clause}, {"witness", viol.witness}});
        throw error(errc::not_good_tree, "input is not a good tree", {{"violations", v}});
    }
    InducedCSet out;
    std::vector<NodeId> ls = leaves(t);
    out.map.leaf_of_element = ls;
    out.map.element_of_node.assign(t.size(), -1);
    for (int i = 0; i < static_cast<int>(ls.size()); ++i) {
        out.cset.elements.push_back(std::to_string(ls[i]));
        out.map.element_of_node[ls[i]] = i;
    }
    const int n = static_cast<int>(ls.size());
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c) {
                NodeId mab = meet(t, ls[a], ls[b]);
                NodeId mbc = meet(t, ls[b], ls[c]);
                if (leq(t, mab, mbc) && mab != mbc) out.cset.triples.insert({a, b, c});
            }
    return out;
}

namespace {

// Shared entry into the canonical tree for the cone operations.
struct TreeView {
    CanonicalTree ct;
    explicit TreeView(const ConcreteCSet& m) : ct(canonical_tree(m)) {}
    NodeId node(const ConcreteCSet& m, NodeSpec s) const {
        if (s.a < 0 || s.a >= m.size() || s.b < 0 || s.b >= m.size())
            throw error(errc::bad_input, "node spec outside the element range",
                        {{"a", s.a}, {"b", s.b}});
        return meet(ct.tree, ct.map.leaf_of_element[s.a], ct.map.leaf_of_element[s.b]);
    }
    std::vector<int> elements_in(const std::vector<NodeId>& nodes) const {
        std::vector<int> out;
        for (NodeId x : nodes)
            if (ct.map.element_of_node[x] != -1) out.push_back(ct.map.element_of_node[x]);
        std::sort(out.begin(), out.end());
        return out;
    }
};

}  // namespace

std::vector<int> cset_cone(const ConcreteCSet& m, int alpha, int beta) {
    if (alpha == beta)
        throw error(errc::bad_input, "cone needs two distinct elements",
                    {{"alpha", alpha}, {"beta", beta}});
    TreeView v(m);
    NodeId base = v.node(m, {alpha, beta});
    return v.elements_in(cone(v.ct.tree, base, v.ct.map.leaf_of_element[beta]));
}

std::vector<int> cset_thick_cone(const ConcreteCSet& m, NodeSpec at) {
    TreeView v(m);
    return v.elements_in(thick_cone(v.ct.tree, v.node(m, at)));
}

std::vector<int> cset_pruned_cone(const ConcreteCSet& m, NodeSpec x, NodeSpec y) {
    TreeView v(m);
    NodeId nx = v.node(m, x), ny = v.node(m, y);
    return v.elements_in(pruned_cone(v.ct.tree, nx, ny));
}

bool cset_isomorphic(const ConcreteCSet& a, const ConcreteCSet& b) {
    if (a.size() == 0 || b.size() == 0) return a.size() == b.size();
    return canonical_code(canonical_tree(a).tree) == canonical_code(canonical_tree(b).tree);
}

std::vector<int> node_orbits(const ConcreteTree& t, const std::vector<std::string>* labels) {
    std::vector<std::string> codes = subtree_codes(t, labels);
    // two nodes are exchangeable exactly when the subtree codes met along
    // their root paths agree step by step
    std::vector<std::string> path(t.size());
    for (NodeId x : t.order)
        path[x] = (t.parent[x] == no_node ? "" : path[t.parent[x]]) + "/" + codes[x];
    std::map<std::string, int> ids;
    std::vector<int> orbit(t.size());
    for (NodeId x = 0; x < t.size(); ++x)
        orbit[x] = ids.emplace(path[x], static_cast<int>(ids.size())).first->second;
    // renumber densely by smallest member
    std::map<int, int> first;
    for (NodeId x = 0; x < t.size(); ++x) first.emplace(orbit[x], static_cast<int>(first.size()));
    for (NodeId x = 0; x < t.size(); ++x) orbit[x] = first[orbit[x]];
    return orbit;
}

namespace {

std::vector<std::string> param_labels(const ConcreteCSet& m, const CanonicalTree& ct,
                                      const std::vector<int>& params) {
    std::vector<std::string> lab(ct.tree.size());
    std::vector<int> sorted = params;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        int e = sorted[k];
        if (e < 0 || e >= m.size())
            throw error(errc::bad_input, "parameter outside the element range", {{"param", e}});
        lab[ct.map.leaf_of_element[e]] += "[p" + std::to_string(k) + "]";
    }
    return lab;
}

}  // namespace

std::vector<int> stabilizer_orbits(const ConcreteCSet& m, const std::vector<int>& params) {
    CanonicalTree ct = canonical_tree(m);
    auto lab = param_labels(m, ct, params);
    std::vector<int> node_cls = node_orbits(ct.tree, &lab);
    std::vector<int> out(m.size());
    for (int e = 0; e < m.size(); ++e) out[e] = node_cls[ct.map.leaf_of_element[e]];
    std::map<int, int> first;
    for (int e = 0; e < m.size(); ++e) first.emplace(out[e], static_cast<int>(first.size()));
    for (int e = 0; e < m.size(); ++e) out[e] = first[out[e]];
    return out;
}

std::vector<int> stabilizer_orbits_oracle(const ConcreteCSet& m, const std::vector<int>& params) {
    CanonicalTree ct = canonical_tree(m);
    auto lab = param_labels(m, ct, params);
    std::vector<int> out(m.size());
    std::map<std::string, int> ids;
    for (int e = 0; e < m.size(); ++e) {
        auto marked = lab;
        marked[ct.map.leaf_of_element[e]] += "[*]";
        std::string key = canonical_code(ct.tree, &marked);
        out[e] = ids.emplace(key, static_cast<int>(ids.size())).first->second;
    }
    return out;
}

bool is_indiscernible_finite(const ConcreteCSet& m) {
    if (m.size() <= 1) return true;
    auto orb = stabilizer_orbits(m);
    return std::all_of(orb.begin(), orb.end(), [&](int o) { return o == orb[0]; });
}

CMinimalityReport check_c_minimal_finite(const ConcreteCSet& m, int max_params) {
    CMinimalityReport rep;
    if (m.size() == 0) {
        rep.detail = {{"parameter_tuples", 0}, {"generators", 0}};
        return rep;
    }
    CanonicalTree ct = canonical_tree(m);
    const ConcreteTree& t = ct.tree;
    // generating sets of the algebra: every cone and every thick cone
    std::vector<std::vector<int>> gens;
    for (NodeId x = 0; x < t.size(); ++x) {
        std::vector<int> thick;
        for (NodeId u : thick_cone(t, x))
            if (ct.map.element_of_node[u] != -1) thick.push_back(ct.map.element_of_node[u]);
        gens.push_back(thick);
        for (auto& members : cones_at(t, x)) {
            std::vector<int> cn;
            for (NodeId u : members)
                if (ct.map.element_of_node[u] != -1) cn.push_back(ct.map.element_of_node[u]);
            gens.push_back(cn);
        }
    }
    // atoms: elements with identical membership profiles
    std::vector<std::vector<bool>> profile(m.size(), std::vector<bool>(gens.size(), false));
    for (std::size_t g = 0; g < gens.size(); ++g)
        for (int e : gens[g]) profile[e][g] = true;
    auto same_atom = [&](int a, int b) { return profile[a] == profile[b]; };

    json bad = json::array();
    long long tuples = 0;
    std::vector<int> params;
    // subsets of elements, size <= max_params; the pointwise stabilizer only
    // depends on the set of parameters
    std::function<void(int)> visit = [&](int from) {
        ++tuples;
        auto orb = stabilizer_orbits(m, params);
        for (int a = 0; a < m.size(); ++a)
            for (int b = a + 1; b < m.size(); ++b)
                if (same_atom(a, b) && orb[a] != orb[b]) {
                    // a definable set (the orbit of a) that no boolean
                    // combination of cones separates
                    bad.push_back({{"params", params},
                                   {"inseparable", {m.elements[a], m.elements[b]}}});
                }
        if (static_cast<int>(params.size()) == max_params) return;
        for (int e = from; e < m.size(); ++e) {
            params.push_back(e);
            visit(e + 1);
            params.pop_back();
        }
    };
    visit(0);
    rep.ok = bad.empty();
    rep.detail = {{"parameter_tuples", tuples},
                  {"generators", gens.size()},
                  {"counterexamples", bad}};
    return rep;
}

}  // namespace cmt
