#pragma once

/// @file graph.hpp
/// @brief DAG representation and combinatorics: random sampling, reachability,
///        transitive closure, closure-class enumeration, structural error.
///
/// Node labels are 1..q throughout; an edge (j, i) means j is a parent of i.
/// Matrices elsewhere in the library are 0-based, so the weight of edge j->i
/// sits at lambda(i-1, j-1).

#include "lcd/rng.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lcd {

using Edge = std::pair<int, int>; // (parent j, child i)

/// Directed acyclic graph on labeled nodes 1..q. Immutable after
/// construction; the constructor validates labels, self-loops and acyclicity.
class Dag {
public:
    explicit Dag(int q, std::set<Edge> edges = {}) : q_(q), edges_(std::move(edges)) {
        if (q < 1) throw std::invalid_argument("Dag: node count must be positive");
        for (const auto& [j, i] : edges_) {
            if (j < 1 || j > q || i < 1 || i > q)
                throw std::invalid_argument("Dag: node label out of range");
            if (j == i) throw std::invalid_argument("Dag: self-loop");
        }
        if (!acyclic()) throw std::invalid_argument("Dag: directed cycle");
    }

    int q() const { return q_; }
    const std::set<Edge>& edges() const { return edges_; }
    bool has_edge(int j, int i) const { return edges_.count({j, i}) > 0; }

    /// 1-step successors of j (edges j -> i).
    std::set<int> children(int j) const {
        check_node(j);
        std::set<int> out;
        for (auto it = edges_.lower_bound({j, 0}); it != edges_.end() && it->first == j; ++it)
            out.insert(it->second);
        return out;
    }

    /// 1-step predecessors of i (edges j -> i).
    std::set<int> parents(int i) const {
        check_node(i);
        std::set<int> out;
        for (const auto& [j, c] : edges_)
            if (c == i) out.insert(j);
        return out;
    }

    /// Nodes reachable from j by a nonempty directed path.
    std::set<int> descendants(int j) const {
        check_node(j);
        std::set<int> seen;
        std::vector<int> stack{j};
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            for (int c : children(v))
                if (seen.insert(c).second) stack.push_back(c);
        }
        return seen;
    }

    /// Nodes from which j is reachable by a nonempty directed path.
    std::set<int> ancestors(int j) const {
        check_node(j);
        std::set<int> seen;
        std::vector<int> stack{j};
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            for (int p : parents(v))
                if (seen.insert(p).second) stack.push_back(p);
        }
        return seen;
    }

    bool operator==(const Dag& o) const { return q_ == o.q_ && edges_ == o.edges_; }
    bool operator<(const Dag& o) const {
        return q_ != o.q_ ? q_ < o.q_ : edges_ < o.edges_;
    }

private:
    void check_node(int j) const {
        if (j < 1 || j > q_) throw std::invalid_argument("Dag: node out of range");
    }

    bool acyclic() const {
        std::vector<int> indeg(q_ + 1, 0);
        for (const auto& [j, i] : edges_) {
            (void)j;
            ++indeg[i];
        }
        std::queue<int> ready;
        for (int v = 1; v <= q_; ++v)
            if (indeg[v] == 0) ready.push(v);
        int seen = 0;
        while (!ready.empty()) {
            int v = ready.front();
            ready.pop();
            ++seen;
            for (int c : children_unchecked(v))
                if (--indeg[c] == 0) ready.push(c);
        }
        return seen == q_;
    }

    std::vector<int> children_unchecked(int j) const {
        std::vector<int> out;
        for (auto it = edges_.lower_bound({j, 0}); it != edges_.end() && it->first == j; ++it)
            out.push_back(it->second);
        return out;
    }

    int q_;
    std::set<Edge> edges_;
};

/// Bundle of 1-step and reachability relations around one node.
struct NodeRelations {
    std::set<int> children, parents, descendants, ancestors;
};

inline NodeRelations relations(const Dag& g, int j) {
    return {g.children(j), g.parents(j), g.descendants(j), g.ancestors(j)};
}

/// Each candidate edge j -> i with j > i is included independently with
/// probability rho, so generated graphs have edges from higher to lower
/// labels only and Λ support is strictly upper triangular.
inline Dag sample_dag(int q, double rho, Rng& rng) {
    if (q < 1) throw std::invalid_argument("sample_dag: q must be positive");
    if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("sample_dag: rho outside [0,1]");
    std::set<Edge> edges;
    for (int j = 2; j <= q; ++j)
        for (int i = 1; i < j; ++i)
            if (rng.uniform01() < rho) edges.insert({j, i});
    return Dag(q, std::move(edges));
}

/// Edge (j, i) present iff i is reachable from j in g. Idempotent.
inline Dag transitive_closure(const Dag& g) {
    std::set<Edge> edges;
    for (int j = 1; j <= g.q(); ++j)
        for (int i : g.descendants(j)) edges.insert({j, i});
    return Dag(g.q(), std::move(edges));
}

/// All DAGs on the same labels whose transitive closure equals that of g.
///
/// Enumeration runs over subsets of the closure's optional edges only: an
/// edge j -> i of the closure is mandatory when no intermediate m has both
/// j -> m and m -> i in the closure (removing it would shrink the closure),
/// optional otherwise. Each candidate keeps all mandatory edges, toggles the
/// optional ones and is kept after a final closure check.
inline std::vector<Dag> same_closure_dags(const Dag& g, int cap = 6) {
    if (g.q() > cap) throw std::invalid_argument("same_closure_dags: node count over cap");
    Dag cl = transitive_closure(g);
    std::set<Edge> mandatory;
    std::vector<Edge> optional;
    for (const auto& [j, i] : cl.edges()) {
        bool implied = false;
        for (int m = 1; m <= cl.q() && !implied; ++m)
            if (m != i && m != j && cl.has_edge(j, m) && cl.has_edge(m, i)) implied = true;
        if (implied)
            optional.push_back({j, i});
        else
            mandatory.insert({j, i});
    }
    std::vector<Dag> out;
    std::size_t subsets = std::size_t{1} << optional.size();
    for (std::size_t mask = 0; mask < subsets; ++mask) {
        std::set<Edge> edges = mandatory;
        for (std::size_t b = 0; b < optional.size(); ++b)
            if (mask & (std::size_t{1} << b)) edges.insert(optional[b]);
        Dag cand(g.q(), std::move(edges));
        if (transitive_closure(cand) == cl) out.push_back(std::move(cand));
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Structural distance over unordered node pairs: +1 for a spurious or
/// missing edge, +2 for a reversed edge; 0 iff the edge sets coincide.
inline int structural_error(const Dag& truth, const Dag& estimate) {
    if (truth.q() != estimate.q())
        throw std::invalid_argument("structural_error: node counts differ");
    int err = 0;
    for (int a = 1; a <= truth.q(); ++a)
        for (int b = a + 1; b <= truth.q(); ++b) {
            // direction code per graph: 0 none, 1 a->b, 2 b->a
            auto dir = [&](const Dag& g) {
                if (g.has_edge(a, b)) return 1;
                if (g.has_edge(b, a)) return 2;
                return 0;
            };
            int t = dir(truth), e = dir(estimate);
            if (t == e) continue;
            err += (t != 0 && e != 0) ? 2 : 1;
        }
    return err;
}

/// Textual edge list, one "j -> i" line per edge, in set order.
inline std::string to_text(const Dag& g) {
    std::ostringstream os;
    for (const auto& [j, i] : g.edges()) os << j << " -> " << i << "\n";
    return os.str();
}

/// Parses "j -> i" entries separated by newlines, commas or semicolons.
/// Node count defaults to the largest label mentioned; q overrides (for
/// isolated trailing nodes).
inline Dag dag_from_text(const std::string& text, int q = 0) {
    std::set<Edge> edges;
    int max_label = 0;
    std::string norm = text;
    for (char& ch : norm)
        if (ch == ',' || ch == ';') ch = '\n';
    std::istringstream lines(norm);
    std::string line;
    while (std::getline(lines, line)) {
        auto pos = line.find("->");
        if (pos == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos)
                throw std::invalid_argument("dag_from_text: expected 'j -> i', got: " + line);
            continue;
        }
        int j = 0, i = 0;
        try {
            j = std::stoi(line.substr(0, pos));
            i = std::stoi(line.substr(pos + 2));
        } catch (const std::exception&) {
            throw std::invalid_argument("dag_from_text: bad edge line: " + line);
        }
        edges.insert({j, i});
        max_label = std::max({max_label, j, i});
    }
    if (q == 0) q = std::max(max_label, 1);
    return Dag(q, std::move(edges));
}

} // namespace lcd
