#pragma once

// Analysis reports: a stable JSON document binding findings, variant matches
// and defense plans to the input's content hash, plus a human-readable text
// rendering that quotes the matched catalog rows.

#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "specdep/builder.hpp"
#include "specdep/catalog.hpp"
#include "specdep/defense.hpp"

namespace specdep {

inline constexpr const char* kToolName = "specdep";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kReportSchema = 1;

/// FNV-1a 64-bit content hash, hex-encoded.
inline std::string content_hash(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

struct AnalysisReport {
    std::string input_name;
    std::string input_hash;
    ThreatModel threat_model;
    std::vector<RaceFinding> findings;
    std::vector<DefensePlan> plans;
};

inline Json threat_model_to_json(const ThreatModel& tm) {
    Json j;
    Json mechs = Json::array();
    for (DelayMechanism m : tm.delay_mechanisms)
        mechs.push_back(to_string(m));
    Json sources = Json::array();
    for (MicroOpKind k : tm.secret_sources)
        sources.push_back(to_string(k));
    Json channels = Json::array();
    for (CovertChannel c : tm.channels)
        channels.push_back(to_string(c));
    j["delay_mechanisms"] = std::move(mechs);
    j["secret_sources"] = std::move(sources);
    j["channels"] = std::move(channels);
    return j;
}

inline Json finding_to_json(const AttackGraph& ag, const RaceFinding& f) {
    Json j;
    j["authorization"] = Json{{"node", f.authorization.value},
                              {"label", ag.label(f.authorization)}};
    j["access"] = Json{{"node", f.access.value},
                       {"label", ag.label(f.access)},
                       {"role", to_string(f.access_role)}};
    j["severity"] = to_string(f.severity());
    Json path = Json::array();
    for (NodeId id : f.channel_path)
        path.push_back(ag.label(id));
    j["channel_path"] = std::move(path);
    Json variants = Json::array();
    for (const std::string& v : f.matched_variants)
        variants.push_back(v);
    j["variants"] = std::move(variants);
    return j;
}

inline Json plan_to_json(const AttackGraph& ag, const DefensePlan& plan) {
    Json j;
    j["strategy"] = to_string(plan.strategy);
    Json nodes = Json::array();
    for (const PlannedNode& n : plan.new_nodes)
        nodes.push_back(n.label);
    j["new_nodes"] = std::move(nodes);
    auto end_label = [&](PlanEnd end) -> std::string {
        return end.is_new ? plan.new_nodes[end.index].label : ag.label(NodeId{end.index});
    };
    Json edges = Json::array();
    for (const PlannedEdge& e : plan.inserted_edges)
        edges.push_back(Json::array({end_label(e.from), end_label(e.to), "security-dep"}));
    j["inserted_edges"] = std::move(edges);
    j["verdict"] = plan.verdict.sufficient ? "sufficient" : "insufficient";
    Json residual = Json::array();
    for (const RaceFinding& f : plan.verdict.residual)
        residual.push_back(finding_to_json(ag, f));
    j["residual"] = std::move(residual);
    if (!plan.note.empty())
        j["note"] = plan.note;
    return j;
}

inline Json report_to_json(const AttackGraph& ag, const AnalysisReport& report) {
    Json j;
    j["schema"] = kReportSchema;
    j["tool"] = Json{{"name", kToolName}, {"version", kToolVersion}};
    j["input"] = Json{{"name", report.input_name}, {"hash", report.input_hash}};
    j["threat_model"] = threat_model_to_json(report.threat_model);
    Json findings = Json::array();
    for (const RaceFinding& f : report.findings)
        findings.push_back(finding_to_json(ag, f));
    j["findings"] = std::move(findings);
    Json plans = Json::array();
    for (const DefensePlan& p : report.plans)
        plans.push_back(plan_to_json(ag, p));
    j["plans"] = std::move(plans);
    j["summary"] = Json{{"finding_count", report.findings.size()},
                        {"plan_count", report.plans.size()}};
    return j;
}

inline std::string report_to_text(const AttackGraph& ag, const AnalysisReport& report,
                                  const std::vector<AttackVariantTemplate>& catalog) {
    std::ostringstream out;
    out << report.input_name << ": " << report.findings.size() << " finding"
        << (report.findings.size() == 1 ? "" : "s") << "\n";
    for (const RaceFinding& f : report.findings) {
        out << "  race: " << ag.label(f.authorization) << "  vs  " << ag.label(f.access) << " ["
            << to_string(f.access_role) << ", " << to_string(f.severity()) << "]\n";
        if (!f.channel_path.empty()) {
            out << "    channel:";
            for (NodeId id : f.channel_path)
                out << " -> " << ag.label(id);
            out << "\n";
        }
        for (const std::string& name : f.matched_variants) {
            out << "    variant: " << name;
            for (const auto& t : catalog)
                if (t.name == name) {
                    out << "  (authorization: " << t.authorization_text
                        << "; access: " << t.access_text << ")";
                    break;
                }
            out << "\n";
        }
    }
    for (const DefensePlan& p : report.plans) {
        out << "  defense " << to_string(p.strategy) << ": "
            << (p.verdict.sufficient ? "sufficient" : "insufficient") << ", "
            << p.inserted_edges.size() << " edge" << (p.inserted_edges.size() == 1 ? "" : "s");
        if (!p.verdict.residual.empty())
            out << ", " << p.verdict.residual.size() << " residual";
        if (!p.note.empty())
            out << " (" << p.note << ")";
        out << "\n";
    }
    return out.str();
}

}  // namespace specdep
