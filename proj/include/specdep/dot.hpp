#pragma once

// Deterministic DOT rendering of attack graphs: nodes labeled "id:label" and
// colored by role, edge style by dependency kind, security dependencies
// dashed red. The legend is documented in docs/specir.md so golden files
// stay diffable.

#include <sstream>
#include <string>

#include "specdep/builder.hpp"
#include "specdep/tsg.hpp"

namespace specdep {

inline const char* role_color(NodeRole r) {
    switch (r) {
    case NodeRole::Setup: return "lightblue";
    case NodeRole::Authorization: return "orange";
    case NodeRole::SecretAccess: return "tomato";
    case NodeRole::Use: return "gold";
    case NodeRole::Send: return "orchid";
    case NodeRole::Receive: return "palegreen";
    case NodeRole::Plain: return "gray90";
    }
    return "white";
}

inline std::string edge_style(EdgeKind k) {
    switch (k) {
    case EdgeKind::DataDep: return "";
    case EdgeKind::AddressDep: return " [style=solid, color=gray40]";
    case EdgeKind::ControlCommit: return " [style=bold]";
    case EdgeKind::FenceOrder: return " [style=dotted]";
    case EdgeKind::MicroOpOrder: return " [style=dashed, color=gray60]";
    case EdgeKind::SecurityDep: return " [style=dashed, color=red]";
    }
    return "";
}

inline std::string dot_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\')
            out.push_back('\\');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline std::string export_dot(const Tsg& g, const std::string& name = "tsg") {
    std::ostringstream out;
    out << "digraph " << name << " {\n";
    out << "  rankdir=TB;\n  node [shape=box, style=filled];\n";
    for (std::uint32_t i = 0; i < g.node_count(); ++i) {
        NodeId id{i};
        out << "  n" << i << " [label=" << dot_quote(std::to_string(i) + ":" + g.label(id))
            << ", fillcolor=" << role_color(g.role(id)) << "];\n";
    }
    for (const Edge& e : g.edges())
        out << "  n" << e.from.value << " -> n" << e.to.value << edge_style(e.kind) << ";\n";
    out << "}\n";
    return out.str();
}

inline std::string export_dot(const AttackGraph& ag, const std::string& name = "attack_graph") {
    return export_dot(ag.graph, name);
}

}  // namespace specdep
