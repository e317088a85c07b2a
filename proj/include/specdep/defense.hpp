#pragma once

// Vulnerability search and defense planning. A vulnerability is a race
// between an authorization node and a secret-access / use / send node it
// should guard; a defense inserts security-dependency edges that turn the
// race back into an ordering. Verification re-runs the search on the
// modified graph against each strategy's protection goal.

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "specdep/builder.hpp"
#include "specdep/tsg.hpp"

namespace specdep {

struct NoAuthorizationError : Error {
    using Error::Error;
};

enum class FindingSeverity : std::uint8_t { Complete, AccessOnly };

inline const char* to_string(FindingSeverity s) {
    return s == FindingSeverity::Complete ? "complete" : "access-only";
}

/// A detected authorization/access race. channel_path, when non-empty, walks
/// from the access through a send node to a receive node, evidencing that
/// the racing value can actually leave through the covert channel.
struct RaceFinding {
    NodeId authorization;
    NodeId access;
    NodeRole access_role = NodeRole::SecretAccess;
    std::vector<NodeId> channel_path;
    std::vector<std::string> matched_variants;  // filled by the catalog pass

    FindingSeverity severity() const {
        return channel_path.empty() ? FindingSeverity::AccessOnly : FindingSeverity::Complete;
    }
};

enum class DefenseStrategy : std::uint8_t {
    PreventAccess,
    PreventUse,
    PreventSend,
    ClearPredictions,
};

inline const char* to_string(DefenseStrategy s) {
    switch (s) {
    case DefenseStrategy::PreventAccess: return "prevent-access";
    case DefenseStrategy::PreventUse: return "prevent-use";
    case DefenseStrategy::PreventSend: return "prevent-send";
    case DefenseStrategy::ClearPredictions: return "clear-predictions";
    }
    return "?";
}

/// An edge endpoint in a plan: an existing node, or a node the plan adds.
struct PlanEnd {
    bool is_new = false;
    std::uint32_t index = 0;  // node id, or position in new_nodes

    friend constexpr auto operator<=>(PlanEnd, PlanEnd) = default;
};

struct PlannedNode {
    std::string label;
    std::optional<std::uint32_t> guards_instruction;  // branch the node protects
};

struct PlannedEdge {
    PlanEnd from;
    PlanEnd to;
    friend constexpr auto operator<=>(const PlannedEdge&, const PlannedEdge&) = default;
};

struct DefenseVerdict {
    bool sufficient = false;
    std::vector<RaceFinding> residual;
};

struct DefensePlan {
    DefenseStrategy strategy = DefenseStrategy::PreventAccess;
    std::vector<PlannedNode> new_nodes;
    std::vector<PlannedEdge> inserted_edges;  // all SecurityDep
    DefenseVerdict verdict;
    std::string note;
};

namespace detail {

struct AuthSite {
    NodeId node;
    std::uint32_t instruction;
    bool intra;  // permission check / disambiguation / tsx abort within the access
};

inline std::vector<AuthSite> authorization_sites(const AttackGraph& ag) {
    std::vector<AuthSite> out;
    for (std::uint32_t i = 0; i < ag.graph.node_count(); ++i) {
        NodeId id{i};
        if (ag.role(id) != NodeRole::Authorization)
            continue;
        auto inst = ag.instruction_of(id);
        if (!inst)
            continue;
        auto micro = ag.micro_op_of(id);
        bool intra = micro && (*micro == MicroOpKind::PermissionCheck ||
                               *micro == MicroOpKind::AddressDisambiguate ||
                               *micro == MicroOpKind::TsxAbortResolve);
        out.push_back(AuthSite{id, *inst, intra});
    }
    return out;
}

/// The nearest authorization guarding a node: same-instruction intra checks
/// win, otherwise the closest preceding authorization.
inline std::optional<AuthSite> nearest_authorization(const std::vector<AuthSite>& sites,
                                                     std::uint32_t instruction, NodeId node) {
    std::optional<AuthSite> best;
    for (const AuthSite& site : sites) {
        if (site.node == node)
            continue;
        bool applies = site.intra ? site.instruction <= instruction
                                  : site.instruction < instruction;
        if (!applies)
            continue;
        if (!best || site.instruction > best->instruction ||
            (site.instruction == best->instruction && site.intra && !best->intra))
            best = site;
    }
    return best;
}

/// Shortest directed path (BFS, smallest-id tie-break) from one node to any
/// node satisfying the goal predicate. Includes both endpoints.
template <typename Goal>
inline std::vector<NodeId> shortest_path_to(const Tsg& g, NodeId start, Goal&& goal) {
    std::vector<std::int64_t> parent(g.node_count(), -1);
    std::deque<NodeId> queue{start};
    std::vector<char> seen(g.node_count(), 0);
    seen[start.value] = 1;
    while (!queue.empty()) {
        NodeId cur = queue.front();
        queue.pop_front();
        if (cur != start && goal(cur)) {
            std::vector<NodeId> path{cur};
            for (std::int64_t p = parent[cur.value]; p >= 0;
                 p = parent[static_cast<std::uint32_t>(p)])
                path.push_back(NodeId{static_cast<std::uint32_t>(p)});
            std::reverse(path.begin(), path.end());
            return path;
        }
        for (const Edge& e : g.edges()) {
            if (e.from != cur || seen[e.to.value])
                continue;
            seen[e.to.value] = 1;
            parent[e.to.value] = cur.value;
            queue.push_back(e.to);
        }
    }
    return {};
}

inline std::vector<NodeId> channel_path_from(const AttackGraph& ag, NodeId access) {
    const Tsg& g = ag.graph;
    auto is_role = [&](NodeRole r) {
        return [&g, r](NodeId id) { return g.role(id) == r; };
    };
    std::vector<NodeId> to_send;
    if (g.role(access) == NodeRole::Send)
        to_send = {access};
    else
        to_send = shortest_path_to(g, access, is_role(NodeRole::Send));
    if (to_send.empty())
        return {};
    std::vector<NodeId> to_receive = shortest_path_to(g, to_send.back(), is_role(NodeRole::Receive));
    if (to_receive.empty())
        return {};
    to_send.insert(to_send.end(), to_receive.begin() + 1, to_receive.end());
    return to_send;
}

}  // namespace detail

/// Searches the graph for authorization races: every secret-access and send
/// node racing its nearest guarding authorization, plus racing uses whose
/// originating secret access is not itself already reported.
inline std::vector<RaceFinding> find_vulnerabilities(const AttackGraph& ag) {
    const auto sites = detail::authorization_sites(ag);
    std::vector<RaceFinding> findings;
    std::set<std::pair<std::uint32_t, std::uint32_t>> reported;  // (auth, access)

    auto consider = [&](NodeId node, NodeRole role) {
        auto inst = ag.instruction_of(node);
        if (!inst)
            return;
        auto auth = detail::nearest_authorization(sites, *inst, node);
        if (!auth || !ag.graph.race_condition(auth->node, node))
            return;
        if (role == NodeRole::Use) {
            // already covered when a secret access feeding this use was
            // reported against the same authorization
            auto roots = ag.taint_roots_.find(*inst);
            if (roots != ag.taint_roots_.end())
                for (NodeId root : roots->second)
                    if (reported.count({auth->node.value, root.value}))
                        return;
        }
        if (!reported.emplace(auth->node.value, node.value).second)
            return;
        RaceFinding f;
        f.authorization = auth->node;
        f.access = node;
        f.access_role = role;
        f.channel_path = detail::channel_path_from(ag, node);
        findings.push_back(std::move(f));
    };

    // secret accesses and sends first; uses afterwards so chain-interior uses
    // fold into the access finding that dominates them
    for (std::uint32_t i = 0; i < ag.graph.node_count(); ++i) {
        NodeId id{i};
        NodeRole role = ag.role(id);
        if (role == NodeRole::SecretAccess || role == NodeRole::Send)
            consider(id, role);
    }
    for (std::uint32_t i = 0; i < ag.graph.node_count(); ++i) {
        NodeId id{i};
        if (ag.role(id) == NodeRole::Use)
            consider(id, NodeRole::Use);
    }
    std::sort(findings.begin(), findings.end(), [](const RaceFinding& a, const RaceFinding& b) {
        if (a.authorization != b.authorization)
            return a.authorization < b.authorization;
        return a.access < b.access;
    });
    return findings;
}

/// Applies a plan to a copy of the graph: new nodes (deduplicated by label)
/// first, then the SecurityDep edges. Idempotent.
inline AttackGraph apply_plan(const AttackGraph& ag, const DefensePlan& plan) {
    AttackGraph out = ag;
    std::vector<NodeId> new_ids;
    for (const PlannedNode& pn : plan.new_nodes) {
        std::optional<NodeId> existing;
        for (std::uint32_t i = 0; i < out.graph.node_count(); ++i)
            if (out.graph.label(NodeId{i}) == pn.label)
                existing = NodeId{i};
        if (existing) {
            new_ids.push_back(*existing);
        } else {
            NodeId id = out.graph.add_node(pn.label, NodeRole::Setup);
            out.info.push_back(AttackGraph::NodeInfo{std::nullopt, std::nullopt});
            new_ids.push_back(id);
        }
    }
    auto resolve = [&](PlanEnd end) {
        return end.is_new ? new_ids[end.index] : NodeId{end.index};
    };
    for (const PlannedEdge& pe : plan.inserted_edges)
        out.graph.add_edge(resolve(pe.from), resolve(pe.to), EdgeKind::SecurityDep);
    return out;
}

/// Checks a plan against its strategy's protection goal on the modified
/// graph. PreventAccess demands zero findings of any severity; PreventUse /
/// PreventSend demand zero channel-complete findings in their target class
/// (or downstream of it); ClearPredictions demands zero findings anchored at
/// the formerly mistrained branches.
inline DefenseVerdict verify_defense(const AttackGraph& ag, const DefensePlan& plan) {
    AttackGraph hardened = apply_plan(ag, plan);
    std::vector<RaceFinding> findings = find_vulnerabilities(hardened);
    DefenseVerdict verdict;
    for (const RaceFinding& f : findings) {
        bool violates = false;
        switch (plan.strategy) {
        case DefenseStrategy::PreventAccess:
            violates = true;
            break;
        case DefenseStrategy::PreventUse:
            violates = (f.access_role == NodeRole::Use || f.access_role == NodeRole::Send) &&
                       f.severity() == FindingSeverity::Complete;
            break;
        case DefenseStrategy::PreventSend:
            violates = f.access_role == NodeRole::Send &&
                       f.severity() == FindingSeverity::Complete;
            break;
        case DefenseStrategy::ClearPredictions: {
            auto inst = hardened.instruction_of(f.authorization);
            violates = inst && ag.mistrained_branches_.count(*inst) > 0;
            break;
        }
        }
        if (violates)
            verdict.residual.push_back(f);
    }
    verdict.sufficient = verdict.residual.empty();
    return verdict;
}

/// Derives the security-dependency edges implementing one strategy, then
/// verifies the resulting plan. Throws NoAuthorizationError when the graph
/// has no authorization node to anchor edges on.
inline DefensePlan apply_defense(const AttackGraph& ag, DefenseStrategy strategy) {
    const auto sites = detail::authorization_sites(ag);
    if (sites.empty())
        throw NoAuthorizationError("graph has no authorization node");

    std::vector<RaceFinding> findings = find_vulnerabilities(ag);
    DefensePlan plan;
    plan.strategy = strategy;
    std::set<PlannedEdge> edges;
    auto add_edge = [&](NodeId from, NodeId to) {
        if (from != to)
            edges.insert(PlannedEdge{PlanEnd{false, from.value}, PlanEnd{false, to.value}});
    };

    switch (strategy) {
    case DefenseStrategy::PreventAccess:
        for (const RaceFinding& f : findings) {
            if (f.access_role != NodeRole::SecretAccess)
                continue;
            add_edge(f.authorization, f.access);
            // every alternative secret source of the same instruction must be
            // covered too, or the defense only shifts the read
            auto inst = ag.instruction_of(f.access);
            if (inst && ag.micro_op_of(f.access)) {
                for (NodeId sibling : ag.nodes_of(*inst)) {
                    auto kind = ag.micro_op_of(sibling);
                    if (kind && load_source_kinds().count(*kind))
                        add_edge(f.authorization, sibling);
                }
            }
        }
        break;
    case DefenseStrategy::PreventUse:
        for (const RaceFinding& f : findings) {
            if (f.access_role == NodeRole::Use) {
                add_edge(f.authorization, f.access);
                continue;
            }
            if (f.access_role != NodeRole::SecretAccess)
                continue;
            // first consumer of the accessed value
            auto inst = ag.instruction_of(f.access);
            if (!inst)
                continue;
            auto anchor = ag.def_anchor(*inst);
            if (!anchor)
                continue;
            for (const Edge& e : ag.graph.edges())
                if (e.from == *anchor &&
                    (e.kind == EdgeKind::DataDep || e.kind == EdgeKind::AddressDep))
                    add_edge(f.authorization, e.to);
        }
        break;
    case DefenseStrategy::PreventSend:
        for (const RaceFinding& f : findings)
            if (f.access_role == NodeRole::Send)
                add_edge(f.authorization, f.access);
        if (edges.empty())
            plan.note = "no racing send reaches a receive node; nothing to exfiltrate";
        break;
    case DefenseStrategy::ClearPredictions: {
        if (ag.mistrained_branches_.empty()) {
            plan.note = "no mistrained predictor to clear";
            break;
        }
        for (std::uint32_t branch : ag.mistrained_branches_) {
            auto resolve = ag.find_node(branch, MicroOpKind::BranchResolve);
            if (!resolve)
                continue;
            std::uint32_t flush_index = static_cast<std::uint32_t>(plan.new_nodes.size());
            plan.new_nodes.push_back(
                PlannedNode{"flush predictor @" + std::to_string(branch), branch});
            edges.insert(PlannedEdge{PlanEnd{true, flush_index}, PlanEnd{false, resolve->value}});
            // with the predictor clean the branch commits before its shadow
            for (std::uint32_t i = 0; i < ag.graph.node_count(); ++i) {
                NodeId id{i};
                auto owner = ag.instruction_of(id);
                if (owner && *owner > branch && ag.graph.race_condition(*resolve, id))
                    add_edge(*resolve, id);
            }
        }
        break;
    }
    }

    plan.inserted_edges.assign(edges.begin(), edges.end());
    plan.verdict = verify_defense(ag, plan);
    return plan;
}

/// One verified candidate plan per strategy, sufficient plans first, then by
/// inserted-edge count (a proxy for overhead), then by strategy order.
inline std::vector<DefensePlan> suggest_defenses(const AttackGraph& ag,
                                                 const std::vector<RaceFinding>& findings) {
    std::vector<DefensePlan> plans;
    if (findings.empty())
        return plans;
    for (DefenseStrategy s :
         {DefenseStrategy::PreventAccess, DefenseStrategy::PreventUse, DefenseStrategy::PreventSend,
          DefenseStrategy::ClearPredictions}) {
        if (s == DefenseStrategy::ClearPredictions && ag.mistrained_branches_.empty())
            continue;
        plans.push_back(apply_defense(ag, s));
    }
    std::stable_sort(plans.begin(), plans.end(), [](const DefensePlan& a, const DefensePlan& b) {
        if (a.verdict.sufficient != b.verdict.sufficient)
            return a.verdict.sufficient;
        if (a.inserted_edges.size() != b.inserted_edges.size())
            return a.inserted_edges.size() < b.inserted_edges.size();
        return static_cast<int>(a.strategy) < static_cast<int>(b.strategy);
    });
    return plans;
}

}  // namespace specdep
