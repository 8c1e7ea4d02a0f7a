#pragma once

// Helpers shared by the test suites: an exhaustive enumerator of small good
// trees, a random good-tree generator, and a brute-force order matrix that
// serves as an independent oracle for meet / cone computations.

#include <algorithm>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cmt/tree.hpp"

namespace testsup {

using cmt::ConcreteTree;
using cmt::NodeId;

// One representative per isomorphism class, every size up to max_nodes.
// A good tree is a single node, or a root carrying >= 2 good subtrees; the
// recursion enumerates multisets of smaller representatives.
inline std::vector<ConcreteTree> all_good_trees(int max_nodes) {
    std::vector<std::vector<ConcreteTree>> by_size(max_nodes + 1);
    if (max_nodes >= 1)
        by_size[1].push_back(ConcreteTree::from_parents({cmt::no_node}));
    for (int n = 3; n <= max_nodes; ++n) {
        std::vector<const ConcreteTree*> pool;  // all smaller representatives
        for (int s = 1; s < n; ++s)
            for (auto& t : by_size[s]) pool.push_back(&t);
        std::set<std::string> seen;
        std::vector<const ConcreteTree*> picked;
        std::function<void(int, std::size_t)> go = [&](int remaining, std::size_t from) {
            if (remaining == 0) {
                if (picked.size() < 2) return;
                std::vector<NodeId> par{cmt::no_node};
                for (auto* sub : picked) {
                    NodeId off = static_cast<NodeId>(par.size());
                    par.push_back(0);
                    for (NodeId i = 1; i < sub->size(); ++i)
                        par.push_back(sub->parent[i] + off);
                }
                ConcreteTree t = ConcreteTree::from_parents(std::move(par));
                if (seen.insert(canonical_code(t)).second)
                    by_size[n].push_back(relabel_canonical(t));
                return;
            }
            for (std::size_t i = from; i < pool.size(); ++i) {
                if (pool[i]->size() > remaining) continue;
                picked.push_back(pool[i]);
                go(remaining - pool[i]->size(), i);
                picked.pop_back();
            }
        };
        go(n - 1, 0);
    }
    std::vector<ConcreteTree> out;
    for (auto& bucket : by_size)
        for (auto& t : bucket) out.push_back(t);
    return out;
}

// Independent count of the same classes: partition n-1 into >= 2 parts and
// multiply multiset-coefficients of the per-size class counts.
inline long long count_good_trees(int max_nodes) {
    std::vector<long long> g(max_nodes + 1, 0);
    if (max_nodes >= 1) g[1] = 1;
    auto multichoose = [](long long k, long long r) {
        // C(k + r - 1, r)
        long long num = 1;
        for (long long i = 0; i < r; ++i) num = num * (k + i) / (i + 1);
        return num;
    };
    for (int n = 3; n <= max_nodes; ++n) {
        // partitions of n-1 with parts listed in non-increasing order
        std::vector<int> parts;
        std::function<void(int, int)> rec = [&](int remaining, int max_part) {
            if (remaining == 0) {
                if (parts.size() < 2) return;
                long long ways = 1;
                for (std::size_t i = 0; i < parts.size();) {
                    std::size_t j = i;
                    while (j < parts.size() && parts[j] == parts[i]) ++j;
                    ways *= multichoose(g[parts[i]], static_cast<long long>(j - i));
                    i = j;
                }
                g[n] += ways;
                return;
            }
            for (int p = std::min(remaining, max_part); p >= 1; --p) {
                parts.push_back(p);
                rec(remaining - p, p);
                parts.pop_back();
            }
        };
        rec(n - 1, n - 2);
    }
    long long total = 0;
    for (int n = 1; n <= max_nodes; ++n) total += g[n];
    return total;
}

// Random good tree with at most max_nodes nodes: grow by repeatedly turning a
// leaf into a branching point with two or three fresh leaves.
inline ConcreteTree random_good_tree(std::mt19937& rng, int max_nodes) {
    std::vector<NodeId> par{cmt::no_node};
    std::vector<NodeId> leaf{0};
    while (true) {
        int k = 2 + static_cast<int>(rng() % 2);
        if (static_cast<int>(par.size()) + k > max_nodes) break;
        if (par.size() > 1 && rng() % 3 == 0) break;  // stop early sometimes
        std::size_t pick = rng() % leaf.size();
        NodeId x = leaf[pick];
        leaf.erase(leaf.begin() + static_cast<std::ptrdiff_t>(pick));
        for (int i = 0; i < k; ++i) {
            leaf.push_back(static_cast<NodeId>(par.size()));
            par.push_back(x);
        }
    }
    return ConcreteTree::from_parents(std::move(par));
}

// Isomorphic copy under a random node permutation.
inline ConcreteTree shuffled(std::mt19937& rng, const ConcreteTree& t) {
    std::vector<NodeId> perm(t.size());
    for (NodeId i = 0; i < t.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<NodeId> par(t.size());
    for (NodeId i = 0; i < t.size(); ++i)
        par[perm[i]] = t.parent[i] == cmt::no_node ? cmt::no_node : perm[t.parent[i]];
    return ConcreteTree::from_parents(std::move(par), t.has_virtual_root);
}

// Reflexive a <= b matrix computed only from the parent chain.
inline std::vector<std::vector<bool>> leq_matrix(const ConcreteTree& t) {
    int n = t.size();
    std::vector<std::vector<bool>> le(n, std::vector<bool>(n, false));
    for (NodeId b = 0; b < n; ++b)
        for (NodeId a = b; a != cmt::no_node; a = t.parent[a]) le[a][b] = true;
    return le;
}

// Greatest common lower bound according to the matrix, no_node when none.
inline NodeId meet_oracle(const std::vector<std::vector<bool>>& le, NodeId a, NodeId b) {
    NodeId best = cmt::no_node;
    for (NodeId x = 0; x < static_cast<NodeId>(le.size()); ++x) {
        if (!le[x][a] || !le[x][b]) continue;
        if (best == cmt::no_node || le[best][x]) best = x;
    }
    return best;
}

}  // namespace testsup
