#include "cmt/annotated.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace cmt {

void validate(const Budget& b) {
    if (b.dense_depth < 1 || b.width < 1 || b.node_cap < 1)
        throw error(errc::bad_input, "budget fields must be positive",
                    {{"dense_depth", b.dense_depth},
                     {"width", b.width},
                     {"node_cap", b.node_cap}});
}

void to_json(json& j, const Budget& b) {
    j = {{"dense_depth", b.dense_depth}, {"width", b.width}, {"node_cap", b.node_cap}};
}

void from_json(const json& j, Budget& b) {
    b.dense_depth = j.value("dense_depth", 2);
    b.width = j.value("width", 2);
    b.node_cap = j.value("node_cap", 500);
    validate(b);
}

int capped(ExtCard k, int width) {
    if (k.is_inf()) return width;
    return static_cast<int>(std::min<std::int64_t>(k.v, width));
}

const char* cone_kind_name(ConeKind k) {
    return k == ConeKind::border ? "border" : "inner";
}

ConeKind cone_kind_from_name(const std::string& s) {
    if (s == "border") return ConeKind::border;
    if (s == "inner") return ConeKind::inner;
    throw error(errc::bad_input, "unknown cone kind", {{"kind", s}});
}

int AnnotatedTree::level_count() const {
    int top = -1;
    for (int lv : level_mark) top = std::max(top, lv);
    return top + 1;
}

namespace {

// realized cone counts of a node, split by declared kind
std::pair<int, int> realized_counts(const AnnotatedTree& t, NodeId x) {
    int border = 0, inner = 0;
    for (NodeId c : t.tree.kids[static_cast<std::size_t>(x)])
        (t.cone_kind[static_cast<std::size_t>(c)] == ConeKind::border ? border : inner)++;
    return {border, inner};
}

}  // namespace

AnnotationReport validate_annotations(const AnnotatedTree& t, const Budget* b) {
    AnnotationReport rep;
    std::size_t n = t.tree.parent.size();
    if (t.node_color.size() != n || t.cone_kind.size() != n ||
        t.dense_mark.size() != n || t.level_mark.size() != n) {
        rep.violations.push_back({"shape",
                                  {{"nodes", n},
                                   {"colors", t.node_color.size()},
                                   {"kinds", t.cone_kind.size()},
                                   {"dense", t.dense_mark.size()},
                                   {"levels", t.level_mark.size()}}});
        return rep;
    }
    if (n == 0) return rep;

    for (NodeId r : t.tree.roots) {
        if (t.dense(r) != t.tree.has_virtual_root)
            rep.violations.push_back({"virtual-root-dense", {{"node", r}}});
        if (t.level_mark[static_cast<std::size_t>(r)] != 0)
            rep.violations.push_back({"root-level", {{"node", r}}});
    }

    std::set<int> used;
    for (std::size_t x = 0; x < n; ++x) {
        used.insert(t.level_mark[x]);
        NodeId par = t.tree.parent[x];
        if (par != no_node) {
            int lp = t.level_mark[static_cast<std::size_t>(par)];
            int lc = t.level_mark[x];
            if (lc != lp && lc != lp + 1)
                rep.violations.push_back(
                    {"level-step", {{"node", x}, {"parent", par}, {"levels", {lp, lc}}}});
        }
        if (t.tree.is_leaf(static_cast<NodeId>(x))) {
            if (t.node_color[x] != ColorPair{})
                rep.violations.push_back(
                    {"leaf-color", {{"node", x}, {"color", t.node_color[x]}}});
            continue;
        }
        const ColorPair& col = t.node_color[x];
        if (col.m + col.mu < 2)
            rep.violations.push_back({"node-degree", {{"node", x}, {"color", col}}});
        auto [border, inner] = realized_counts(t, static_cast<NodeId>(x));
        if (ExtCard{border} > col.m)
            rep.violations.push_back(
                {"count-border", {{"node", x}, {"realized", border}, {"declared", col.m}}});
        if (ExtCard{inner} > col.mu)
            rep.violations.push_back(
                {"count-inner", {{"node", x}, {"realized", inner}, {"declared", col.mu}}});
        if (b != nullptr) {
            if (border != capped(col.m, b->width))
                rep.violations.push_back({"border-realization",
                                          {{"node", x},
                                           {"realized", border},
                                           {"expected", capped(col.m, b->width)}}});
            if (inner > capped(col.mu, 2 * b->width))
                rep.violations.push_back({"inner-overflow",
                                          {{"node", x},
                                           {"realized", inner},
                                           {"bound", capped(col.mu, 2 * b->width)}}});
        }
    }
    if (!used.empty() && (*used.begin() != 0 ||
                          *used.rbegin() != static_cast<int>(used.size()) - 1))
        rep.violations.push_back({"level-gap", {{"used", used}}});

    for (std::size_t c = 0; c < n; ++c) {
        NodeId par = t.tree.parent[c];
        if (par == no_node) continue;
        bool same_level =
            t.level_mark[c] == t.level_mark[static_cast<std::size_t>(par)];
        if (t.cone_kind[c] == ConeKind::inner && !t.dense_mark[c])
            rep.violations.push_back({"inner-dense", {{"node", c}}});
        if (t.cone_kind[c] == ConeKind::border && t.dense_mark[c] && same_level)
            rep.violations.push_back({"border-shape", {{"node", c}}});
    }
    return rep;
}

AnnotatedTree annotate_finite(const ConcreteTree& t) {
    if (t.has_virtual_root)
        throw error(errc::bad_input,
                    "a purely finite annotation needs a rooted tree");
    AnnotatedTree a;
    a.tree = t;
    std::size_t n = t.parent.size();
    a.node_color.assign(n, ColorPair{});
    a.cone_kind.assign(n, ConeKind::border);
    a.dense_mark.assign(n, 0);
    a.level_mark.assign(n, 0);
    for (std::size_t x = 0; x < n; ++x) {
        // a leaf belongs to its parent's stratum, one below its own depth
        a.level_mark[x] = t.kids[x].empty() && t.depth[x] > 0 ? t.depth[x] - 1
                                                              : t.depth[x];
        if (!t.kids[x].empty())
            a.node_color[x] = {ExtCard{static_cast<std::int64_t>(t.kids[x].size())}, 0};
    }
    return a;
}

std::vector<std::string> annotation_labels(const AnnotatedTree& t) {
    std::vector<std::string> out(t.tree.parent.size());
    for (std::size_t x = 0; x < out.size(); ++x) {
        std::string kind = t.tree.parent[x] == no_node
                               ? "r"
                               : (t.cone_kind[x] == ConeKind::border ? "b" : "i");
        out[x] = t.node_color[x].str() + kind + (t.dense_mark[x] ? "d" : "s") +
                 "L" + std::to_string(t.level_mark[x]);
    }
    return out;
}

std::string annotated_code(const AnnotatedTree& t) {
    auto labels = annotation_labels(t);
    return canonical_code(t.tree, &labels);
}

bool annotated_equal(const AnnotatedTree& a, const AnnotatedTree& b) {
    if (a.size() != b.size()) return false;
    return annotated_code(a) == annotated_code(b);
}

void to_json(json& j, const AnnotatedTree& t) {
    to_json(j, t.tree);
    json colors = json::object(), kinds = json::object(), levels = json::object();
    std::vector<NodeId> dense;
    for (std::size_t x = 0; x < t.tree.parent.size(); ++x) {
        colors[std::to_string(x)] = t.node_color[x];
        if (t.tree.parent[x] != no_node)
            kinds[std::to_string(x)] = cone_kind_name(t.cone_kind[x]);
        if (t.dense_mark[x]) dense.push_back(static_cast<NodeId>(x));
        levels[std::to_string(x)] = t.level_mark[x];
    }
    j["node_color"] = colors;
    j["cone_kind"] = kinds;
    j["dense_mark"] = dense;
    j["level_mark"] = levels;
}

void from_json(const json& j, AnnotatedTree& t) {
    from_json(j, t.tree);
    // the tree loader renumbers sparse ids to 0..n-1 in increasing order;
    // annotation keys must follow the same renaming
    std::map<std::int64_t, NodeId> rename;
    for (auto v : j.at("nodes").get<std::vector<std::int64_t>>()) rename[v] = 0;
    {
        NodeId fresh = 0;
        for (auto& [v, id] : rename) id = fresh++;
    }
    auto lookup = [&](const std::string& key) -> NodeId {
        std::int64_t raw = 0;
        try {
            raw = std::stoll(key);
        } catch (const std::exception&) {
            throw error(errc::bad_input, "annotation key is not a node id", {{"key", key}});
        }
        auto it = rename.find(raw);
        if (it == rename.end())
            throw error(errc::bad_input, "annotation names an unknown node", {{"node", raw}});
        return it->second;
    };
    std::size_t n = t.tree.parent.size();
    t.node_color.assign(n, ColorPair{});
    t.cone_kind.assign(n, ConeKind::border);
    t.dense_mark.assign(n, 0);
    t.level_mark.assign(n, 0);
    for (auto& [key, val] : j.at("node_color").items())
        t.node_color[static_cast<std::size_t>(lookup(key))] = val.get<ColorPair>();
    for (auto& [key, val] : j.at("cone_kind").items())
        t.cone_kind[static_cast<std::size_t>(lookup(key))] =
            cone_kind_from_name(val.get<std::string>());
    for (auto v : j.at("dense_mark").get<std::vector<std::int64_t>>()) {
        auto it = rename.find(v);
        if (it == rename.end())
            throw error(errc::bad_input, "annotation names an unknown node", {{"node", v}});
        t.dense_mark[static_cast<std::size_t>(it->second)] = 1;
    }
    for (auto& [key, val] : j.at("level_mark").items())
        t.level_mark[static_cast<std::size_t>(lookup(key))] = val.get<int>();
}

}  // namespace cmt
