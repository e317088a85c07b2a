#pragma once

// Topological-sort graph: a DAG whose edges are happens-before orderings.
// Valid orderings are its topological sorts; two nodes race exactly when no
// directed path connects them, which reachability checks in either direction.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace specdep {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CycleError : Error {
    using Error::Error;
};
struct SelfEdgeError : Error {
    using Error::Error;
};
struct PermutationError : Error {
    using Error::Error;
};
struct SameNodeError : Error {
    using Error::Error;
};
struct LimitError : Error {
    using Error::Error;
};

/// Role a node plays in an attack graph. Assigned by the builder; Plain for
/// nodes that are none of the critical classes.
enum class NodeRole : std::uint8_t {
    Setup,
    Authorization,
    SecretAccess,
    Use,
    Send,
    Receive,
    Plain,
};

enum class EdgeKind : std::uint8_t {
    DataDep,
    AddressDep,
    ControlCommit,
    FenceOrder,
    MicroOpOrder,
    SecurityDep,
};

inline const char* to_string(NodeRole r) {
    switch (r) {
    case NodeRole::Setup: return "setup";
    case NodeRole::Authorization: return "authorization";
    case NodeRole::SecretAccess: return "secret-access";
    case NodeRole::Use: return "use";
    case NodeRole::Send: return "send";
    case NodeRole::Receive: return "receive";
    case NodeRole::Plain: return "plain";
    }
    return "?";
}

inline const char* to_string(EdgeKind k) {
    switch (k) {
    case EdgeKind::DataDep: return "data-dep";
    case EdgeKind::AddressDep: return "address-dep";
    case EdgeKind::ControlCommit: return "control-commit";
    case EdgeKind::FenceOrder: return "fence-order";
    case EdgeKind::MicroOpOrder: return "micro-op-order";
    case EdgeKind::SecurityDep: return "security-dep";
    }
    return "?";
}

/// Dense handle into one graph's node table.
struct NodeId {
    std::uint32_t value = 0;
    friend constexpr auto operator<=>(NodeId, NodeId) = default;
};

struct Edge {
    NodeId from;
    NodeId to;
    EdgeKind kind;
    friend constexpr auto operator<=>(Edge, Edge) = default;
};

using Ordering = std::vector<NodeId>;

/// A racing node pair, with two valid orderings demonstrating both relative
/// orders when the graph is small enough to enumerate.
struct RacePair {
    NodeId a;
    NodeId b;
    std::optional<std::pair<Ordering, Ordering>> witness_orderings;
};

class Tsg {
public:
    /// Full ordering enumeration is factorial; graphs above this node count
    /// refuse to enumerate unless the caller caps the output.
    static constexpr std::size_t kOracleNodeLimit = 10;

    struct Node {
        std::string label;
        NodeRole role = NodeRole::Plain;
    };

    NodeId add_node(std::string label, NodeRole role = NodeRole::Plain) {
        nodes_.push_back(Node{std::move(label), role});
        succ_.emplace_back();
        pred_.emplace_back();
        return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
    }

    std::size_t node_count() const { return nodes_.size(); }

    const Node& node(NodeId id) const {
        check_id(id);
        return nodes_[id.value];
    }

    void set_role(NodeId id, NodeRole role) {
        check_id(id);
        nodes_[id.value].role = role;
    }

    NodeRole role(NodeId id) const { return node(id).role; }
    const std::string& label(NodeId id) const { return node(id).label; }

    /// Edges in sorted (from, to, kind) order, independent of insertion order.
    const std::vector<Edge>& edges() const { return edges_; }

    bool has_edge(NodeId from, NodeId to, EdgeKind kind) const {
        return std::binary_search(edges_.begin(), edges_.end(), Edge{from, to, kind});
    }

    /// Inserts an ordering edge. Duplicate (from, to, kind) triples are
    /// idempotent no-ops returning false. Throws SelfEdgeError / CycleError;
    /// on error the graph is unchanged.
    bool add_edge(NodeId from, NodeId to, EdgeKind kind) {
        check_id(from);
        check_id(to);
        if (from == to)
            throw SelfEdgeError("self edge on node " + std::to_string(from.value));
        Edge e{from, to, kind};
        auto it = std::lower_bound(edges_.begin(), edges_.end(), e);
        if (it != edges_.end() && *it == e)
            return false;
        if (!connected(from, to) && has_path(to, from))
            throw CycleError("edge " + std::to_string(from.value) + "->" +
                             std::to_string(to.value) + " would close a cycle");
        edges_.insert(it, e);
        auto& succ = succ_[from.value];
        auto sit = std::lower_bound(succ.begin(), succ.end(), to.value);
        if (sit == succ.end() || *sit != to.value) {
            succ.insert(sit, to.value);
            auto& pred = pred_[to.value];
            pred.insert(std::lower_bound(pred.begin(), pred.end(), from.value), from.value);
        }
        return true;
    }

    /// True iff a directed path from u to v exists; every node reaches itself.
    bool has_path(NodeId u, NodeId v) const {
        check_id(u);
        check_id(v);
        if (u == v)
            return true;
        std::vector<char> seen(nodes_.size(), 0);
        std::vector<std::uint32_t> stack{u.value};
        seen[u.value] = 1;
        while (!stack.empty()) {
            std::uint32_t cur = stack.back();
            stack.pop_back();
            for (std::uint32_t next : succ_[cur]) {
                if (next == v.value)
                    return true;
                if (!seen[next]) {
                    seen[next] = 1;
                    stack.push_back(next);
                }
            }
        }
        return false;
    }

    /// True iff every edge (u, v) has u before v in the ordering.
    /// Throws PermutationError when the sequence is not a permutation of all nodes.
    bool is_valid_ordering(const Ordering& order) const {
        if (order.size() != nodes_.size())
            throw PermutationError("ordering has " + std::to_string(order.size()) +
                                   " entries, graph has " + std::to_string(nodes_.size()));
        std::vector<std::uint32_t> pos(nodes_.size(), kUnplaced);
        for (std::size_t i = 0; i < order.size(); ++i) {
            if (order[i].value >= nodes_.size())
                throw PermutationError("node " + std::to_string(order[i].value) +
                                       " not in graph");
            if (pos[order[i].value] != kUnplaced)
                throw PermutationError("node " + std::to_string(order[i].value) +
                                       " repeated in ordering");
            pos[order[i].value] = static_cast<std::uint32_t>(i);
        }
        for (std::uint32_t from = 0; from < succ_.size(); ++from)
            for (std::uint32_t to : succ_[from])
                if (pos[from] > pos[to])
                    return false;
        return true;
    }

    /// Visits valid orderings in lexicographic node-id order. The callback
    /// returns false to stop early. Returns false if stopped.
    template <typename Fn>
    bool for_each_valid_ordering(Fn&& fn, std::optional<std::size_t> cap = {}) const {
        const std::size_t n = nodes_.size();
        std::vector<std::uint32_t> indegree(n, 0);
        for (const auto& succ : succ_)
            for (std::uint32_t to : succ)
                ++indegree[to];
        Ordering current;
        current.reserve(n);
        std::size_t emitted = 0;
        std::function<bool()> walk = [&]() -> bool {
            if (current.size() == n) {
                ++emitted;
                if (!fn(static_cast<const Ordering&>(current)))
                    return false;
                return !cap || emitted < *cap;
            }
            for (std::uint32_t id = 0; id < n; ++id) {
                if (indegree[id] != kPlacedMark && indegree[id] == 0) {
                    indegree[id] = kPlacedMark;
                    for (std::uint32_t to : succ_[id])
                        --indegree[to];
                    current.push_back(NodeId{id});
                    bool keep = walk();
                    current.pop_back();
                    indegree[id] = 0;
                    for (std::uint32_t to : succ_[id])
                        ++indegree[to];
                    if (!keep)
                        return false;
                }
            }
            return true;
        };
        return n == 0 ? (fn(current), true) : walk();
    }

    /// All valid orderings, lexicographic by node id, truncated at cap.
    /// Throws LimitError when the graph exceeds the oracle limit and no cap
    /// is given.
    std::vector<Ordering> enumerate_valid_orderings(std::optional<std::size_t> cap = {}) const {
        if (!cap && nodes_.size() > kOracleNodeLimit)
            throw LimitError("graph has " + std::to_string(nodes_.size()) +
                             " nodes; enumeration limited to " +
                             std::to_string(kOracleNodeLimit) + " without a cap");
        std::vector<Ordering> out;
        for_each_valid_ordering(
            [&](const Ordering& o) {
                out.push_back(o);
                return true;
            },
            cap);
        return out;
    }

    /// Reachability form of the race check: u and v race iff no directed path
    /// connects them in either direction.
    bool race_condition(NodeId u, NodeId v) const {
        if (u == v)
            throw SameNodeError("race queried for a node against itself");
        return !has_path(u, v) && !has_path(v, u);
    }

    /// Definition form of the race check: two valid orderings disagree on the
    /// relative order of u and v. Enumerates orderings; oracle-limit bound.
    bool race_oracle(NodeId u, NodeId v) const {
        if (u == v)
            throw SameNodeError("race queried for a node against itself");
        if (nodes_.size() > kOracleNodeLimit)
            throw LimitError("oracle limited to " + std::to_string(kOracleNodeLimit) + " nodes");
        check_id(u);
        check_id(v);
        bool u_first = false, v_first = false;
        for_each_valid_ordering([&](const Ordering& o) {
            for (NodeId id : o) {
                if (id == u) {
                    u_first = true;
                    break;
                }
                if (id == v) {
                    v_first = true;
                    break;
                }
            }
            return !(u_first && v_first);
        });
        return u_first && v_first;
    }

    /// Every racing unordered pair, optionally restricted to a node subset.
    /// Witness orderings attached when the graph is oracle-sized.
    std::vector<RacePair> all_races(std::optional<std::vector<NodeId>> among = {}) const {
        std::vector<NodeId> ids;
        if (among) {
            ids = *among;
            std::sort(ids.begin(), ids.end());
            ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        } else {
            for (std::uint32_t i = 0; i < nodes_.size(); ++i)
                ids.push_back(NodeId{i});
        }
        std::vector<RacePair> out;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            for (std::size_t j = i + 1; j < ids.size(); ++j) {
                if (!race_condition(ids[i], ids[j]))
                    continue;
                RacePair pair{ids[i], ids[j], std::nullopt};
                if (nodes_.size() <= kOracleNodeLimit)
                    pair.witness_orderings = witness_pair(ids[i], ids[j]);
                out.push_back(std::move(pair));
            }
        }
        return out;
    }

private:
    static constexpr std::uint32_t kUnplaced = 0xffffffffu;
    static constexpr std::uint32_t kPlacedMark = 0xfffffffeu;

    void check_id(NodeId id) const {
        if (id.value >= nodes_.size())
            throw Error("node id " + std::to_string(id.value) + " out of range");
    }

    bool connected(NodeId from, NodeId to) const {
        const auto& succ = succ_[from.value];
        return std::binary_search(succ.begin(), succ.end(), to.value);
    }

    std::optional<std::pair<Ordering, Ordering>> witness_pair(NodeId a, NodeId b) const {
        auto find_with = [&](NodeId first, NodeId second) -> std::optional<Ordering> {
            std::optional<Ordering> found;
            for_each_valid_ordering([&](const Ordering& o) {
                for (NodeId id : o) {
                    if (id == first) {
                        found = o;
                        return false;
                    }
                    if (id == second)
                        return true;
                }
                return true;
            });
            return found;
        };
        auto ab = find_with(a, b);
        auto ba = find_with(b, a);
        if (ab && ba)
            return std::make_pair(std::move(*ab), std::move(*ba));
        return std::nullopt;
    }

    std::vector<Node> nodes_;
    std::vector<Edge> edges_;                       // sorted, unique triples
    std::vector<std::vector<std::uint32_t>> succ_;  // unique (from,to) pairs
    std::vector<std::vector<std::uint32_t>> pred_;
};

}  // namespace specdep
