#include <doctest.h>

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <tuple>

#include "cmt/expand.hpp"

using namespace cmt;

namespace {

const ExtCard I = ExtCard::inf();

Budget bud(int dd = 2, int w = 2, int cap = 2000) { return Budget{dd, w, cap}; }

// Levels with small and infinite parameters; enough to hit both collapse
// patterns and all rooting combinations.
std::vector<OneColoredDescriptor> pool() {
    std::vector<OneColoredDescriptor> out;
    for (ExtCard m : {ExtCard(2), ExtCard(3), I}) out.push_back(level(LevelKind::T0, m, 0));
    for (ExtCard mu : {ExtCard(2), ExtCard(3), I}) out.push_back(level(LevelKind::T1a, 0, mu));
    for (ExtCard m : {ExtCard(1), ExtCard(2), I})
        for (ExtCard mu : {ExtCard(1), ExtCard(2), I})
            out.push_back(level(LevelKind::T1b, m, mu));
    return out;
}

bool may_follow(const OneColoredDescriptor& a, const OneColoredDescriptor& b) {
    return a.kind != LevelKind::T1a || b.kind == LevelKind::T0;
}

std::vector<Descriptor> sweep(int max_levels) {
    auto ls = pool();
    std::vector<Descriptor> out;
    std::function<void(Descriptor&)> grow = [&](Descriptor& d) {
        if (!d.levels.empty()) out.push_back(d);
        if (static_cast<int>(d.levels.size()) == max_levels) return;
        for (auto& l : ls) {
            if (!d.levels.empty() && !may_follow(d.levels.back(), l)) continue;
            d.levels.push_back(l);
            grow(d);
            d.levels.pop_back();
        }
    };
    Descriptor d;
    grow(d);
    return out;
}

// Closed-form size of a one-level sample, written out independently of the
// generator: a point; a root with its capped leaves; a dense chain whose
// nodes each span `uu` cones; or the same chain carrying capped leaf tufts
// and first-node cones to fill the inner count.
long long level_size(const OneColoredDescriptor& l, const Budget& b) {
    long long dd = b.dense_depth;
    long long mm = capped(l.color.m, b.width);
    long long uu = capped(l.color.mu, b.width);
    switch (l.kind) {
        case LevelKind::T00: return 1;
        case LevelKind::T0: return 1 + mm;
        case LevelKind::T1a: return dd * uu + 1;
        case LevelKind::T1b: {
            long long fresh = dd * uu - (dd - 1);
            return dd + dd * mm + fresh * (1 + mm);
        }
    }
    return -1;
}

long long level_leaves(const OneColoredDescriptor& l, const Budget& b) {
    long long dd = b.dense_depth;
    long long mm = capped(l.color.m, b.width);
    long long uu = capped(l.color.mu, b.width);
    switch (l.kind) {
        case LevelKind::T00: return 1;
        case LevelKind::T0: return mm;
        case LevelKind::T1a: return dd * (uu - 1) + 1;
        case LevelKind::T1b: return (dd + dd * uu - (dd - 1)) * mm;
    }
    return -1;
}

long long expected_size(const Descriptor& d, const Budget& b) {
    long long size = level_size(d.levels[0], b);
    long long lf = level_leaves(d.levels[0], b);
    for (std::size_t i = 1; i < d.levels.size(); ++i) {
        size = size - lf + lf * level_size(d.levels[i], b);
        lf = lf * level_leaves(d.levels[i], b);
    }
    return size;
}

// hand assembly of annotated trees for targeted checks
AnnotatedTree make(std::vector<NodeId> par, bool virtual_root = false) {
    AnnotatedTree t;
    t.tree = ConcreteTree::from_parents(std::move(par), virtual_root);
    std::size_t n = t.tree.parent.size();
    t.node_color.assign(n, ColorPair{});
    t.cone_kind.assign(n, ConeKind::border);
    t.dense_mark.assign(n, 0);
    t.level_mark.assign(n, 0);
    return t;
}

bool has_clause(const AnnotationReport& r, const std::string& clause) {
    for (auto& v : r.violations)
        if (v.clause == clause) return true;
    return false;
}

bool has_clause(const ExtensionAxiomReport& r, const std::string& clause) {
    for (auto& v : r.violations)
        if (v.clause == clause) return true;
    return false;
}

errc thrown(const std::function<void()>& f) {
    try {
        f();
    } catch (const error& e) {
        return e.code;
    }
    return errc::internal;
}

}  // namespace

TEST_SUITE("expand") {

TEST_CASE("single-level samples have the documented shape") {
    Budget b = bud();

    SUBCASE("a point") {
        auto t = expand(single(LevelKind::T00, 0, 0), b);
        CHECK(t.size() == 1);
        CHECK(!t.tree.has_virtual_root);
        CHECK(t.node_color[0] == ColorPair{});
        CHECK(validate_annotations(t, &b).ok());
    }
    SUBCASE("a root with its leaves") {
        auto t = expand(single(LevelKind::T0, 3, 0), b);
        CHECK(t.size() == 3);  // the third leaf stays virtual at width 2
        CHECK(!t.tree.has_virtual_root);
        NodeId r = t.tree.root();
        CHECK(r != no_node);
        CHECK(t.node_color[static_cast<std::size_t>(r)] == ColorPair{3, 0});
        for (NodeId a : leaves(t.tree)) CHECK(t.leaf_isolated(a));
        CHECK(validate_annotations(t, &b).ok());
    }
    SUBCASE("a dense level has no isolated leaf and no stored minimum") {
        auto t = expand(single(LevelKind::T1a, 0, 2), b);
        CHECK(t.size() == 5);
        CHECK(t.tree.has_virtual_root);
        for (int x = 0; x < t.size(); ++x) CHECK(t.dense(x));
        for (NodeId a : leaves(t.tree)) CHECK(!t.leaf_isolated(a));
        CHECK(validate_annotations(t, &b).ok());
    }
    SUBCASE("a closed-branch level isolates every leaf") {
        auto t = expand(single(LevelKind::T1b, 1, 1), b);
        CHECK(t.size() == 6);
        CHECK(t.tree.has_virtual_root);
        for (NodeId a : leaves(t.tree)) CHECK(t.leaf_isolated(a));
        CHECK(validate_annotations(t, &b).ok());
    }
    SUBCASE("sizes follow the closed form across budgets") {
        for (int dd : {1, 2, 3})
            for (int w : {1, 2, 3}) {
                Budget bb{dd, w, 100000};
                for (auto& l : pool()) {
                    Descriptor d{{l}, false};
                    auto t = expand(d, bb);
                    CHECK(t.size() == level_size(l, bb));
                    CHECK(static_cast<long long>(leaves(t.tree).size()) == level_leaves(l, bb));
                    CHECK(validate_annotations(t, &bb).ok());
                }
            }
    }
}

TEST_CASE("annotation validator accepts every swept sample") {
    Budget b = bud();
    for (auto& l : pool()) {
        auto t = expand(Descriptor{{l}, false}, b);
        auto rep = validate_annotations(t, &b);
        CAPTURE(l.str());
        CHECK(rep.ok());
        CHECK(validate_annotations(t).ok());
    }
}

TEST_CASE("annotation validator names each broken clause") {
    SUBCASE("shape") {
        auto t = make({no_node, 0, 0});
        t.node_color.pop_back();
        CHECK(has_clause(validate_annotations(t), "shape"));
    }
    SUBCASE("virtual root against the dense mark") {
        auto t = make({no_node, 0, 0}, true);
        t.node_color[0] = {0, 2};
        t.cone_kind[1] = t.cone_kind[2] = ConeKind::inner;
        t.dense_mark[1] = t.dense_mark[2] = 1;
        CHECK(has_clause(validate_annotations(t), "virtual-root-dense"));
        t.dense_mark[0] = 1;
        CHECK(validate_annotations(t).ok());
    }
    SUBCASE("root level") {
        auto t = make({no_node, 0, 0});
        t.node_color[0] = {2, 0};
        t.level_mark = {1, 1, 1};
        auto rep = validate_annotations(t);
        CHECK(has_clause(rep, "root-level"));
        CHECK(has_clause(rep, "level-gap"));
    }
    SUBCASE("level steps and gaps") {
        auto t = make({no_node, 0, 0, 1, 1});
        t.node_color[0] = {2, 0};
        t.node_color[1] = {2, 0};
        t.level_mark = {0, 2, 0, 2, 2};
        auto rep = validate_annotations(t);
        CHECK(has_clause(rep, "level-step"));
        CHECK(has_clause(rep, "level-gap"));
    }
    SUBCASE("leaf color") {
        auto t = make({no_node, 0, 0});
        t.node_color[0] = {2, 0};
        t.node_color[1] = {1, 0};
        CHECK(has_clause(validate_annotations(t), "leaf-color"));
    }
    SUBCASE("declared degree") {
        auto t = make({no_node, 0, 0});
        t.node_color[0] = {1, 0};
        CHECK(has_clause(validate_annotations(t), "node-degree"));
    }
    SUBCASE("inner cones must be dense") {
        auto t = make({no_node, 0, 0});
        t.node_color[0] = {1, 1};
        t.cone_kind[1] = ConeKind::inner;
        CHECK(has_clause(validate_annotations(t), "inner-dense"));
    }
    SUBCASE("a dense border cone must leave its level") {
        auto t = make({no_node, 0, 0});
        t.node_color[0] = {2, 0};
        t.dense_mark[1] = 1;
        CHECK(has_clause(validate_annotations(t), "border-shape"));
        t.level_mark[1] = 1;  // as a level exit the same cone is fine
        auto rep = validate_annotations(t);
        CHECK(!has_clause(rep, "border-shape"));
    }
    SUBCASE("realized counts stay within declared ones") {
        auto t = make({no_node, 0, 0, 0});
        t.node_color[0] = {2, 0};
        CHECK(has_clause(validate_annotations(t), "count-border"));
        t.node_color[0] = {0, 2};
        for (int x = 1; x <= 3; ++x) {
            t.cone_kind[static_cast<std::size_t>(x)] = ConeKind::inner;
            t.dense_mark[static_cast<std::size_t>(x)] = 1;
        }
        t.dense_mark[0] = 1;
        auto t2 = t;
        t2.tree.has_virtual_root = true;
        t2.node_color[0] = {0, 2};
        CHECK(has_clause(validate_annotations(t2), "count-inner"));
    }
    SUBCASE("budget equality for border cones") {
        auto t = make({no_node, 0});
        t.node_color[0] = {2, 0};
        Budget b = bud();
        CHECK(has_clause(validate_annotations(t, &b), "border-realization"));
        CHECK(!has_clause(validate_annotations(t), "border-realization"));
    }
    SUBCASE("budget bound for inner cones") {
        auto t = make({no_node, 0, 0, 0}, true);
        t.node_color[0] = {0, I};
        t.dense_mark = {1, 1, 1, 1};
        t.cone_kind = {ConeKind::border, ConeKind::inner, ConeKind::inner, ConeKind::inner};
        Budget b{2, 1, 100};  // two width loads allow at most two inner cones
        CHECK(has_clause(validate_annotations(t, &b), "inner-overflow"));
        CHECK(validate_annotations(t).ok());
    }
}

TEST_CASE("budget validation and caps") {
    CHECK(thrown([] { expand(single(LevelKind::T0, 2, 0), Budget{0, 2, 10}); }) == errc::bad_input);
    CHECK(thrown([] { expand(single(LevelKind::T0, 2, 0), Budget{2, 2, 0}); }) == errc::bad_input);

    Descriptor three{{level(LevelKind::T1b, I, I), level(LevelKind::T1b, I, I),
                      level(LevelKind::T1b, I, I)},
                     false};
    CHECK(expected_size(three, bud()) == 1555);
    CHECK(expand(three, bud()).size() == 1555);
    try {
        expand(three, Budget{2, 2, 100});
        CHECK(false);
    } catch (const error& e) {
        CHECK(e.code == errc::budget_exceeded);
        CHECK(e.detail.at("at_level").get<int>() == 1);
        CHECK(e.detail.at("needed").get<long long>() == 155);
    }
    try {
        expand(single(LevelKind::T1b, I, I), Budget{2, 2, 10});
        CHECK(false);
    } catch (const error& e) {
        CHECK(e.code == errc::budget_exceeded);
        CHECK(e.detail.at("at_level").get<int>() == 0);
    }
}

TEST_CASE("bad descriptors are rejected before any work") {
    Budget b = bud();
    Descriptor bad{{level(LevelKind::T1a, 0, 2), level(LevelKind::T1a, 0, 2)}, false};
    CHECK(thrown([&] { expand(bad, b); }) == errc::bad_descriptor);
    Descriptor point_in_tower{{level(LevelKind::T00, 0, 0), level(LevelKind::T0, 2, 0)}, false};
    CHECK(thrown([&] { expand(point_in_tower, b); }) == errc::bad_descriptor);
    Descriptor variant{{level(LevelKind::T1a, 0, 2), level(LevelKind::T0, 2, 0)}, true};
    CHECK(thrown([&] { expand(variant, b); }) == errc::bad_descriptor);
}

TEST_CASE("expansion is deterministic and seeds only relabel") {
    Budget b = bud();
    Descriptor d{{level(LevelKind::T1b, 1, I), level(LevelKind::T0, 3, 0)}, false};
    auto t1 = expand(d, b, 7);
    auto t2 = expand(d, b, 7);
    CHECK(t1.tree.parent == t2.tree.parent);
    CHECK(t1.level_mark == t2.level_mark);
    CHECK(json(t1) == json(t2));
    auto t3 = expand(d, b, 8);
    CHECK(annotated_equal(t1, t3));
    CHECK(annotated_code(t1) == annotated_code(t3));
}

TEST_CASE("a worked rooted extension with its full witness") {
    // two leaves under a (2,0) root, each replaced by a (3,0) layer
    auto base = make({no_node, 0, 0});
    base.node_color[0] = {2, 0};
    auto t0 = make({no_node, 0, 0, 0});
    t0.node_color[0] = {3, 0};

    Extension ext = extend_tree(base, t0);
    CHECK(ext.tree.tree.parent ==
          std::vector<NodeId>{no_node, 0, 1, 1, 1, 0, 5, 5, 5});
    CHECK(!ext.tree.tree.has_virtual_root);
    CHECK(ext.witness.t0_rooted);
    CHECK(ext.witness.sigma == std::vector<NodeId>{0, no_node, no_node});
    CHECK(ext.witness.rho == std::vector<NodeId>{no_node, 1, 5});
    CHECK(ext.witness.tau.at(1) == std::vector<NodeId>{1, 2, 3, 4});
    CHECK(ext.witness.tau.at(2) == std::vector<NodeId>{5, 6, 7, 8});
    CHECK(ext.witness.E == std::vector<NodeId>{1, 5});
    CHECK(ext.witness.E_geq == std::vector<NodeId>{1, 2, 3, 4, 5, 6, 7, 8});
    CHECK(ext.witness.e.at(3) == 1);
    CHECK(ext.witness.e.at(5) == 5);
    CHECK(ext.witness.e.at(8) == 5);

    CHECK(ext.tree.node_color[0] == ColorPair{2, 0});  // below the joint, untouched
    CHECK(ext.tree.node_color[1] == ColorPair{3, 0});  // the layer's own root color
    CHECK(ext.tree.level_mark == std::vector<int>{0, 1, 1, 1, 1, 1, 1, 1, 1});
    CHECK(is_good_tree(ext.tree.tree).ok());
    CHECK(validate_annotations(ext.tree).ok());
    Budget wide{2, 3, 500};
    CHECK(validate_annotations(ext.tree, &wide).ok());
    CHECK(check_extension_axioms(ext.tree, ext.witness).ok());

    Quotient q = quotient_sim(ext.tree, ext.witness);
    CHECK(q.projection == std::vector<NodeId>{0, 1, 1, 1, 1, 2, 2, 2, 2});
    CHECK(annotated_equal(q.tree, base));
}

TEST_CASE("a worked unrooted extension pools the attachment color") {
    auto base = make({no_node, 0, 0});
    base.node_color[0] = {2, 0};
    Budget b = bud();
    auto t0 = expand(single(LevelKind::T1b, 1, 1), b, 3);

    Extension ext = extend_tree(base, t0);
    CHECK(!ext.witness.t0_rooted);
    CHECK(ext.witness.E == std::vector<NodeId>{0});
    CHECK(ext.tree.node_color[0] == ColorPair{0, 2});
    for (NodeId k : ext.tree.tree.kids[0]) {
        CHECK(ext.tree.cone_kind[static_cast<std::size_t>(k)] == ConeKind::inner);
        CHECK(ext.tree.dense(k));
        CHECK(ext.tree.level_mark[static_cast<std::size_t>(k)] == 1);
    }
    CHECK(ext.tree.size() == 1 + 2 * t0.size());
    CHECK(check_extension_axioms(ext.tree, ext.witness).ok());

    // contracting the copies recovers the base with its realized color
    Quotient q = quotient_sim(ext.tree, ext.witness);
    CHECK(annotated_equal(q.tree, base));
    CHECK(q.tree.size() == 3);
}

TEST_CASE("extension preconditions are reported by name") {
    Budget b = bud();
    auto rooted_layer = expand(single(LevelKind::T0, 2, 0), b);
    auto unrooted_layer = expand(single(LevelKind::T1b, 1, 1), b);

    SUBCASE("operands need two points") {
        auto pt = expand(single(LevelKind::T00, 0, 0), b);
        CHECK(thrown([&] { extend_tree(pt, rooted_layer); }) == errc::singleton_operand);
        CHECK(thrown([&] { extend_tree(rooted_layer, pt); }) == errc::singleton_operand);
    }
    SUBCASE("mixed leaf isolation") {
        auto base = make({no_node, 0, 0});
        base.node_color[0] = {1, 1};
        base.cone_kind[2] = ConeKind::inner;
        base.dense_mark[2] = 1;
        CHECK(thrown([&] { extend_tree(base, rooted_layer); }) == errc::star_violated);
    }
    SUBCASE("dense leaves cannot take an unrooted layer") {
        auto base = expand(single(LevelKind::T1a, 0, 2), b);
        CHECK(thrown([&] { extend_tree(base, unrooted_layer); }) == errc::star2_violated);
        CHECK(extend_tree(base, rooted_layer).tree.size() > 0);
    }
    SUBCASE("leaf predecessors must be convex") {
        // r(0) -> leaf(1), u(2); u -> v(3), w(4); both carry two leaves:
        // leaf parents {0, 3, 4} skip over u
        auto base = make({no_node, 0, 0, 2, 2, 3, 3, 4, 4});
        base.node_color[0] = {2, 0};
        base.node_color[2] = {2, 0};
        base.node_color[3] = {2, 0};
        base.node_color[4] = {2, 0};
        try {
            extend_tree(base, rooted_layer);
            CHECK(false);
        } catch (const error& e) {
            CHECK(e.code == errc::star3_violated);
            CHECK(e.detail.at("gap").get<NodeId>() == 2);
        }
    }
    SUBCASE("forests are malformed input") {
        auto base = make({no_node, no_node, 0, 0, 1, 1});
        base.node_color[0] = base.node_color[1] = ColorPair{2, 0};
        CHECK(thrown([&] { extend_tree(base, rooted_layer); }) == errc::bad_input);
    }
}

TEST_CASE("witness axioms over every single-level pair") {
    Budget b = bud();
    int pairs = 0;
    for (auto& la : pool()) {
        if (la.kind == LevelKind::T00) continue;
        auto base = expand(Descriptor{{la}, false}, b, 1);
        for (auto& lb : pool()) {
            if (lb.kind == LevelKind::T00 || !may_follow(la, lb)) continue;
            auto t0 = expand(Descriptor{{lb}, false}, b, 2);
            Extension ext = extend_tree(base, t0);
            ++pairs;
            CAPTURE(la.str());
            CAPTURE(lb.str());
            CHECK(check_extension_axioms(ext.tree, ext.witness).ok());

            // attachment colors follow the four-case table
            bool rooted = ext.witness.t0_rooted;
            std::set<NodeId> E(ext.witness.E.begin(), ext.witness.E.end());
            for (std::size_t x = 0; x < base.tree.parent.size(); ++x) {
                NodeId sx = ext.witness.sigma[x];
                if (sx == no_node) continue;
                ColorPair c = base.node_color[x];
                if (!rooted && E.count(sx))
                    CHECK(ext.tree.node_color[static_cast<std::size_t>(sx)] ==
                          ColorPair{0, c.m + c.mu});
                else
                    CHECK(ext.tree.node_color[static_cast<std::size_t>(sx)] == c);
            }
            NodeId r0 = t0.tree.root();
            for (auto& [a, copy] : ext.witness.tau) {
                if (rooted) {
                    CHECK(E.count(copy[static_cast<std::size_t>(r0)]) == 1);
                    CHECK(ext.tree.node_color[static_cast<std::size_t>(
                              copy[static_cast<std::size_t>(r0)])] ==
                          t0.node_color[static_cast<std::size_t>(r0)]);
                }
                for (std::size_t t = 0; t < copy.size(); ++t)
                    if (static_cast<NodeId>(t) != r0)
                        CHECK(ext.tree.node_color[static_cast<std::size_t>(copy[t])] ==
                              t0.node_color[t]);
            }

            // isolation passes through from the layer
            bool t0_iso = t0.leaf_isolated(leaves(t0.tree)[0]);
            for (NodeId lf : leaves(ext.tree.tree))
                CHECK(ext.tree.leaf_isolated(lf) == t0_iso);

            // contracting the layer recovers the base
            Quotient q = quotient_sim(ext.tree, ext.witness);
            if (rooted) {
                CHECK(annotated_equal(q.tree, base));
            } else {
                AnnotatedTree expect = base;
                for (NodeId lf : leaves(base.tree)) {
                    NodeId p = base.tree.parent[static_cast<std::size_t>(lf)];
                    int border = 0, inner = 0;
                    for (NodeId k : base.tree.kids[static_cast<std::size_t>(p)])
                        (base.cone_kind[static_cast<std::size_t>(k)] == ConeKind::border
                             ? border
                             : inner)++;
                    expect.node_color[static_cast<std::size_t>(p)] = {border, inner};
                }
                CHECK(annotated_equal(q.tree, expect));
            }
        }
    }
    CHECK(pairs == 189);  // 15 bases; the three dense ones only take the rooted layers
}

TEST_CASE("tampered witnesses are rejected with named clauses") {
    auto base = make({no_node, 0, 0});
    base.node_color[0] = {2, 0};
    auto t0 = make({no_node, 0, 0, 0});
    t0.node_color[0] = {3, 0};
    Extension ext = extend_tree(base, t0);

    SUBCASE("degree breaks the good-tree clause") {
        auto t = ext.tree;
        t.node_color[1] = {1, 0};
        CHECK(has_clause(check_extension_axioms(t, ext.witness), "good-tree"));
    }
    SUBCASE("a leaf inside E") {
        auto w = ext.witness;
        w.E.push_back(4);
        auto rep = check_extension_axioms(ext.tree, w);
        CHECK(has_clause(rep, "leaves-disjoint"));
        CHECK(has_clause(rep, "image"));
        CHECK(thrown([&] { quotient_sim(ext.tree, w); }) == errc::witness_inconsistent);
    }
    SUBCASE("a hole in the domain") {
        auto w = ext.witness;
        w.e.erase(3);
        CHECK(has_clause(check_extension_axioms(ext.tree, w), "domain"));
        CHECK(thrown([&] { quotient_sim(ext.tree, w); }) == errc::witness_inconsistent);
    }
    SUBCASE("an attachment that is not the greatest one below") {
        auto w = ext.witness;
        w.e[3] = 5;
        auto rep = check_extension_axioms(ext.tree, w);
        CHECK(has_clause(rep, "deflationary"));
        CHECK(has_clause(rep, "greatest-in-branch"));
        CHECK(thrown([&] { quotient_sim(ext.tree, w); }) == errc::witness_inconsistent);
    }
    SUBCASE("upward closure") {
        auto w = ext.witness;
        w.E_geq.erase(std::find(w.E_geq.begin(), w.E_geq.end(), 3));
        auto rep = check_extension_axioms(ext.tree, w);
        CHECK(has_clause(rep, "upward-closure"));
        CHECK(thrown([&] { quotient_sim(ext.tree, w); }) == errc::witness_inconsistent);
    }
    SUBCASE("a gap inside E") {
        // r -> a -> b chained via two internal nodes, E = {r, b}
        auto chain = make({no_node, 0, 0, 1, 1, 3, 3}, false);
        chain.node_color[0] = {2, 0};
        chain.node_color[1] = {2, 0};
        chain.node_color[3] = {2, 0};
        ExtensionWitness w;
        w.t0_rooted = true;
        w.sigma.assign(7, no_node);
        w.rho.assign(7, no_node);
        w.E = {0, 3};
        for (NodeId x : {0, 2, 3, 4, 5, 6}) {
            w.E_geq.push_back(x);
            w.e[x] = (x == 0 || x == 2) ? 0 : 3;
        }
        auto rep = check_extension_axioms(chain, w);
        CHECK(has_clause(rep, "e-set-convex"));
    }
    SUBCASE("ids outside the tree") {
        auto w = ext.witness;
        w.E.push_back(99);
        CHECK(thrown([&] { check_extension_axioms(ext.tree, w); }) == errc::bad_input);
    }
}

TEST_CASE("recognition inverts expansion over the swept corpus") {
    Budget b = bud();
    int collapsed = 0;
    for (auto& d : sweep(3)) {
        CAPTURE(d.str());
        auto t = expand(d, b, 0);
        auto rep = validate_annotations(t, &b);
        REQUIRE(rep.ok());

        Descriptor norm = normalize(d);
        if (norm.levels.size() != d.levels.size()) ++collapsed;
        CHECK(recognize(t) == norm);

        bool iso = t.leaf_isolated(leaves(t.tree)[0]);
        for (NodeId a : leaves(t.tree)) CHECK(t.leaf_isolated(a) == iso);
        CHECK(iso == (norm.levels.back().kind != LevelKind::T1a));
        CHECK(t.tree.has_virtual_root == (norm.levels.front().kind != LevelKind::T0));

        // ids are a pure relabeling: other seeds give the same coded tree
        CHECK(annotated_code(t) == annotated_code(expand(d, b, 1)));
    }
    CHECK(collapsed > 0);
}

TEST_CASE("interval decompositions line up with the recognized levels") {
    Budget b = bud();
    for (auto& d : sweep(2)) {
        auto t = expand(d, b, 4);
        Descriptor norm = recognize(t);
        for (NodeId a : leaves(t.tree)) {
            auto ivs = interval_decomposition(t, a);
            REQUIRE(ivs.size() == norm.levels.size());
            for (std::size_t i = 0; i < ivs.size(); ++i) {
                CHECK(ivs[i].level == static_cast<int>(i));
                CHECK(ivs[i].color == norm.levels[i].color);
                switch (norm.levels[i].kind) {
                    case LevelKind::T0:
                        CHECK(ivs[i].form == IntervalForm::singleton);
                        CHECK(ivs[i].lo == ivs[i].hi);
                        break;
                    case LevelKind::T1a:
                        CHECK(ivs[i].form == IntervalForm::open_open);
                        // right end is the next stratum's first point, or the leaf
                        CHECK(t.level_mark[static_cast<std::size_t>(*ivs[i].hi)] ==
                              static_cast<int>(i) + (*ivs[i].hi == a ? 0 : 1));
                        break;
                    case LevelKind::T1b:
                        CHECK(ivs[i].form == IntervalForm::open_closed);
                        CHECK(t.level_mark[static_cast<std::size_t>(*ivs[i].hi)] ==
                              static_cast<int>(i));
                        break;
                    default: CHECK(false);
                }
                if (i == 0) {
                    CHECK(ivs[i].lo.has_value() == !t.tree.has_virtual_root);
                } else if (ivs[i].form == IntervalForm::singleton) {
                    // a point stratum is its own left end and sits just above
                    // the top of the stratum below it
                    if (ivs[i - 1].form == IntervalForm::open_open)
                        CHECK(ivs[i].lo == ivs[i - 1].hi);
                    else
                        CHECK(t.tree.parent[static_cast<std::size_t>(*ivs[i].lo)] ==
                              *ivs[i - 1].hi);
                } else {
                    CHECK(ivs[i].lo == ivs[i - 1].hi);
                }
                // an open-on-the-right stratum is followed by a point stratum
                if (ivs[i].form == IntervalForm::open_open && i + 1 < ivs.size())
                    CHECK(ivs[i + 1].form == IntervalForm::singleton);
            }
        }
    }
    auto t = expand(single(LevelKind::T0, 2, 0), b);
    CHECK(thrown([&] { interval_decomposition(t, t.tree.root()); }) == errc::not_a_leaf);
}

TEST_CASE("level merges rewrite the sample in place") {
    Budget b = bud();

    SUBCASE("closed branches absorbed into a dense level") {
        Descriptor d{{level(LevelKind::T1b, 1, 1), level(LevelKind::T1a, 0, 2)}, false};
        auto t = expand(d, b);
        CHECK(recognize(t) == single(LevelKind::T1a, 0, 2));
        for (int x = 0; x < t.size(); ++x) {
            CHECK(t.dense(x));
            CHECK(t.level_mark[static_cast<std::size_t>(x)] == 0);
            if (!t.tree.is_leaf(x)) CHECK(t.node_color[static_cast<std::size_t>(x)] == ColorPair{0, 2});
        }
        CHECK(validate_annotations(t, &b).ok());
    }
    SUBCASE("a point level squeezed between matching dense levels") {
        Descriptor d{{level(LevelKind::T1a, 0, 2), level(LevelKind::T0, 2, 0),
                      level(LevelKind::T1a, 0, 2)},
                     false};
        auto t = expand(d, b);
        CHECK(recognize(t) == single(LevelKind::T1a, 0, 2));
        CHECK(validate_annotations(t, &b).ok());
    }
    SUBCASE("merges cascade") {
        Descriptor d{{level(LevelKind::T1b, 1, 1), level(LevelKind::T1b, 1, 1),
                      level(LevelKind::T1a, 0, 2)},
                     false};
        auto t = expand(d, b);
        CHECK(recognize(t) == single(LevelKind::T1a, 0, 2));
        for (int x = 0; x < t.size(); ++x) CHECK(t.level_mark[static_cast<std::size_t>(x)] == 0);
    }
    SUBCASE("near misses stay two levels") {
        Descriptor miss{{level(LevelKind::T1b, 1, 1), level(LevelKind::T1a, 0, 3)}, false};
        CHECK(recognize(expand(miss, b)) == miss);
        Descriptor point{{level(LevelKind::T0, 2, 0), level(LevelKind::T1a, 0, 2)}, false};
        CHECK(recognize(expand(point, b)) == point);
    }
}

TEST_CASE("finite trees recognize as their depth strata") {
    Budget wide{2, 3, 500};
    auto tower = ConcreteTree::from_parents({no_node, 0, 0, 1, 1, 1, 2, 2, 2});
    auto fin = annotate_finite(tower);
    CHECK(validate_annotations(fin).ok());
    Descriptor two{{level(LevelKind::T0, 2, 0), level(LevelKind::T0, 3, 0)}, false};
    CHECK(recognize(fin) == two);
    CHECK(annotated_equal(expand(two, wide, 5), fin));
    // a narrower budget realizes fewer leaves yet keeps the declared color
    CHECK(recognize(expand(two, bud(), 5)) == two);

    CHECK(recognize(annotate_finite(ConcreteTree::from_parents({no_node}))) ==
          single(LevelKind::T00, 0, 0));
    CHECK(thrown([&] {
              annotate_finite(ConcreteTree::from_parents({no_node, 0, 0}, true));
          }) == errc::bad_input);

    // unequal depths cannot be a level tower
    auto lop = annotate_finite(ConcreteTree::from_parents({no_node, 0, 0, 2, 2}));
    CHECK(thrown([&] { recognize(lop); }) == errc::recognition_failure);
}

TEST_CASE("recognition failures carry their clause") {
    auto clause_of = [](const std::function<void()>& f) -> std::string {
        try {
            f();
        } catch (const error& e) {
            if (e.code == errc::not_precolored) return e.detail.value("clause", "");
            return std::string("errc:") + errc_name(e.code);
        }
        return "";
    };

    SUBCASE("lone dense point") {
        auto t = make({no_node}, true);
        t.dense_mark[0] = 1;
        CHECK(clause_of([&] { recognize(t); }) == "lone-dense-point");
    }
    SUBCASE("forest") {
        auto t = make({no_node, no_node, 0, 0, 1, 1});
        t.node_color[0] = t.node_color[1] = ColorPair{2, 0};
        CHECK(clause_of([&] { recognize(t); }) == "errc:recognition-failure");
    }
    SUBCASE("incoherent annotations fail before any decomposition") {
        auto t = expand(single(LevelKind::T1a, 0, 2), bud());
        t.tree.has_virtual_root = false;
        CHECK(clause_of([&] { recognize(t); }) == "errc:recognition-failure");
    }
    SUBCASE("a point stratum spanning two nodes") {
        auto t = make({no_node, 0, 1, 1});
        t.node_color[0] = {2, 0};
        t.node_color[1] = {2, 0};
        CHECK(clause_of([&] { recognize(t); }) == "singleton-run");
    }
    SUBCASE("two strata on one level") {
        auto t = make({no_node, 0, 1, 1, 1});
        t.node_color[0] = {2, 0};
        t.node_color[1] = {3, 0};
        CHECK(clause_of([&] { recognize(t); }) == "level-order");
    }
    SUBCASE("open stratum not closed by a point") {
        auto t = make({no_node, 0, 0, 1, 2}, true);
        t.node_color[0] = {0, 2};
        t.dense_mark[0] = 1;
        for (NodeId y : {1, 2}) {
            t.node_color[static_cast<std::size_t>(y)] = {1, 1};
            t.cone_kind[static_cast<std::size_t>(y)] = ConeKind::inner;
            t.dense_mark[static_cast<std::size_t>(y)] = 1;
            t.level_mark[static_cast<std::size_t>(y)] = 1;
        }
        t.level_mark[3] = t.level_mark[4] = 1;
        CHECK(clause_of([&] { recognize(t); }) == "open-right-singleton");
    }
    SUBCASE("stored root with a dense first stratum") {
        auto t = make({no_node, 0, 0}, true);
        t.node_color[0] = {2, 0};
        t.dense_mark[0] = 1;
        CHECK(clause_of([&] { recognize(t); }) == "rootedness");
    }
    SUBCASE("mixed leaf isolation under one node") {
        auto t = make({no_node, 0, 0}, true);
        t.node_color[0] = {1, 2};
        t.dense_mark[0] = 1;
        t.cone_kind[2] = ConeKind::inner;
        t.dense_mark[2] = 1;
        CHECK(clause_of([&] { recognize(t); }) == "leaf-isolation");
    }
    SUBCASE("colors that fit no stratum form") {
        auto t = make({no_node, 0, 1, 1});
        t.node_color[0] = {2, 0};
        t.node_color[1] = {0, 0};
        CHECK(clause_of([&] { interval_decomposition(t, 2); }) == "color-form");
    }
}

TEST_CASE("annotated trees and witnesses survive json round trips") {
    SUBCASE("sparse external ids are renumbered consistently") {
        json j = {{"nodes", {5, 9, 12}},
                  {"parent", {{"9", 5}, {"12", 5}}},
                  {"has_virtual_root", false},
                  {"node_color", {{"5", {2, 0}}, {"9", {0, 0}}, {"12", {0, 0}}}},
                  {"cone_kind", {{"9", "border"}, {"12", "border"}}},
                  {"dense_mark", json::array()},
                  {"level_mark", {{"5", 0}, {"9", 0}, {"12", 0}}}};
        AnnotatedTree t = j.get<AnnotatedTree>();
        CHECK(t.size() == 3);
        CHECK(t.node_color[0] == ColorPair{2, 0});
        CHECK(validate_annotations(t).ok());
        AnnotatedTree again = json(t).get<AnnotatedTree>();
        CHECK(annotated_equal(t, again));
        CHECK(json(t) == json(again));

        json bad = j;
        bad["node_color"]["7"] = {2, 0};
        CHECK_THROWS_AS((void)bad.get<AnnotatedTree>(), error);
    }
    SUBCASE("expansion output round trips") {
        Budget b = bud();
        auto t = expand(Descriptor{{level(LevelKind::T1b, I, 2), level(LevelKind::T0, 2, 0)}, false}, b, 11);
        AnnotatedTree back = json(t).get<AnnotatedTree>();
        CHECK(annotated_equal(t, back));
        CHECK(back.level_mark == t.level_mark);
        CHECK(recognize(back) == recognize(t));
    }
    SUBCASE("witness round trip") {
        auto base = expand(single(LevelKind::T0, 2, 0), bud(), 1);
        auto t0 = expand(single(LevelKind::T1b, 1, 1), bud(), 2);
        Extension ext = extend_tree(base, t0);
        ExtensionWitness w = json(ext.witness).get<ExtensionWitness>();
        CHECK(w.sigma == ext.witness.sigma);
        CHECK(w.rho == ext.witness.rho);
        CHECK(w.tau == ext.witness.tau);
        CHECK(w.E == ext.witness.E);
        CHECK(w.E_geq == ext.witness.E_geq);
        CHECK(w.e == ext.witness.e);
        CHECK(w.t0_rooted == ext.witness.t0_rooted);
        CHECK(check_extension_axioms(ext.tree, w).ok());
    }
    SUBCASE("interval serialization") {
        auto t = expand(single(LevelKind::T1b, 1, 1), bud(), 0);
        auto ivs = interval_decomposition(t, leaves(t.tree)[0]);
        json j = ivs[0];
        CHECK(j.at("form") == "open-closed");
        CHECK(j.at("lo").is_null());
        CHECK(!j.at("hi").is_null());
    }
    SUBCASE("budget serialization validates on the way in") {
        Budget b{3, 4, 77};
        Budget back = json(b).get<Budget>();
        CHECK(back.dense_depth == 3);
        CHECK(back.width == 4);
        CHECK(back.node_cap == 77);
        json bad = {{"dense_depth", 0}, {"width", 2}, {"node_cap", 10}};
        CHECK_THROWS_AS((void)bad.get<Budget>(), error);
    }
}

}  // TEST_SUITE
