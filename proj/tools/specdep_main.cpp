// specdep: analyze SpecIR gadgets for authorization races, export attack
// graphs as DOT, list the variant catalog and enumerate attack-dimension
// combinations.
//
// Exit codes: 0 clean (or defense sufficient), 1 findings present (or
// defense insufficient), 2 usage or parse error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "specdep/specdep.hpp"

namespace {

using namespace specdep;

std::optional<std::string> split_next(std::string& rest, char sep) {
    if (rest.empty())
        return std::nullopt;
    auto pos = rest.find(sep);
    std::string head = rest.substr(0, pos);
    rest = pos == std::string::npos ? std::string{} : rest.substr(pos + 1);
    return head;
}

DelayMechanism parse_mechanism(const std::string& name) {
    if (auto m = delay_mechanism_from(name))
        return *m;
    throw CLI::ValidationError("--tm", "unknown delay mechanism '" + name + "'");
}

MicroOpKind parse_source(const std::string& name) {
    if (name == "mem" || name == "memory")
        return MicroOpKind::ReadMemory;
    if (name == "cache")
        return MicroOpKind::ReadCache;
    if (name == "lfb" || name == "line-fill-buffer")
        return MicroOpKind::ReadLineFillBuffer;
    if (name == "store-buffer")
        return MicroOpKind::ReadStoreBuffer;
    if (name == "load-port")
        return MicroOpKind::ReadLoadPort;
    if (name == "sysreg" || name == "special-register")
        return MicroOpKind::ReadSpecialRegister;
    if (name == "fpreg" || name == "fp-register")
        return MicroOpKind::ReadFpRegister;
    throw CLI::ValidationError("--tm", "unknown secret source '" + name + "'");
}

CovertChannel parse_channel(const std::string& name) {
    if (auto c = channel_from(name))
        return *c;
    throw CLI::ValidationError("--tm", "unknown channel '" + name + "'");
}

/// "mech[+mech],source[+source],channel[+channel]"
ThreatModel parse_threat_model(const std::string& spec) {
    std::string rest = spec;
    auto mechs = split_next(rest, ',');
    auto sources = split_next(rest, ',');
    auto channels = split_next(rest, ',');
    if (!mechs || !sources || !channels || !rest.empty())
        throw CLI::ValidationError(
            "--tm", "expected three comma-separated groups: mechanisms,sources,channels");
    ThreatModel tm;
    std::string part = *mechs;
    for (auto item = split_next(part, '+'); item; item = split_next(part, '+'))
        tm.delay_mechanisms.insert(parse_mechanism(*item));
    part = *sources;
    for (auto item = split_next(part, '+'); item; item = split_next(part, '+'))
        tm.secret_sources.insert(parse_source(*item));
    part = *channels;
    for (auto item = split_next(part, '+'); item; item = split_next(part, '+'))
        tm.channels.insert(parse_channel(*item));
    return tm;
}

ThreatModel preset_threat_model(const std::string& name) {
    auto tm = [](std::set<DelayMechanism> m, std::set<MicroOpKind> s,
                 std::set<CovertChannel> c) { return ThreatModel{m, s, c}; };
    const std::set<CovertChannel> fr{CovertChannel::FlushReload};
    if (name == "spectre-v1" || name == "spectre-v1.1")
        return tm({DelayMechanism::BranchPrediction}, {MicroOpKind::ReadMemory}, fr);
    if (name == "spectre-v1.2")
        return tm({DelayMechanism::DelayedException}, {MicroOpKind::ReadMemory}, fr);
    if (name == "spectre-v2")
        return tm({DelayMechanism::IndirectTargetPrediction}, {MicroOpKind::ReadMemory}, fr);
    if (name == "spectre-rsb")
        return tm({DelayMechanism::ReturnPrediction}, {MicroOpKind::ReadMemory}, fr);
    if (name == "meltdown")
        return tm({DelayMechanism::DelayedException}, {MicroOpKind::ReadMemory}, fr);
    if (name == "spectre-v3a")
        return tm({DelayMechanism::DelayedException}, {MicroOpKind::ReadSpecialRegister}, fr);
    if (name == "spectre-v4")
        return tm({DelayMechanism::StoreLoadDisambiguation}, {MicroOpKind::ReadMemory}, fr);
    if (name == "foreshadow" || name == "foreshadow-os" || name == "foreshadow-vmm")
        return tm({DelayMechanism::DelayedException}, {MicroOpKind::ReadCache}, fr);
    if (name == "lazy-fp")
        return tm({DelayMechanism::LazyFpuSwitch}, {MicroOpKind::ReadFpRegister}, fr);
    if (name == "ridl")
        return tm({DelayMechanism::DelayedException},
                  {MicroOpKind::ReadLineFillBuffer, MicroOpKind::ReadLoadPort}, fr);
    if (name == "zombieload" || name == "lvi")
        return tm({DelayMechanism::DelayedException}, {MicroOpKind::ReadLineFillBuffer}, fr);
    if (name == "fallout")
        return tm({DelayMechanism::DelayedException}, {MicroOpKind::ReadStoreBuffer}, fr);
    if (name == "mds")
        return tm({DelayMechanism::DelayedException},
                  {MicroOpKind::ReadLineFillBuffer, MicroOpKind::ReadStoreBuffer,
                   MicroOpKind::ReadLoadPort},
                  fr);
    if (name == "taa")
        return tm({DelayMechanism::TsxAbort},
                  {MicroOpKind::ReadCache, MicroOpKind::ReadStoreBuffer, MicroOpKind::ReadLoadPort},
                  fr);
    if (name == "cacheout")
        return tm({DelayMechanism::TsxAbort}, {MicroOpKind::ReadLineFillBuffer}, fr);
    if (name == "full")
        return full_threat_model();
    throw CLI::ValidationError("--preset", "unknown preset '" + name + "'");
}

std::optional<DefenseStrategy> parse_strategy(const std::string& name) {
    if (name == "prevent-access")
        return DefenseStrategy::PreventAccess;
    if (name == "prevent-use")
        return DefenseStrategy::PreventUse;
    if (name == "prevent-send")
        return DefenseStrategy::PreventSend;
    if (name == "clear-predictions")
        return DefenseStrategy::ClearPredictions;
    return std::nullopt;
}

std::vector<AttackVariantTemplate> active_catalog() {
    if (const char* path = std::getenv("SPECDEP_CATALOG"))
        return load_catalog_file(path);
    return builtin_catalog();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
    } else {
        std::ofstream out(out_path, std::ios::binary);
        if (!out)
            throw Error("cannot write " + out_path);
        out << text;
    }
}

bool glob_match(std::string_view pattern, std::string_view text) {
    if (pattern.empty())
        return text.empty();
    if (pattern[0] == '*')
        return glob_match(pattern.substr(1), text) ||
               (!text.empty() && glob_match(pattern, text.substr(1)));
    if (pattern[0] == '?')
        return !text.empty() && glob_match(pattern.substr(1), text.substr(1));
    return !text.empty() && pattern[0] == text[0] &&
           glob_match(pattern.substr(1), text.substr(1));
}

struct AnalyzeOptions {
    std::string file;
    std::string tm_spec;
    std::string preset;
    std::string defend;
    bool suggest = false;
    std::string format = "text";
    std::string out_path;
};

ThreatModel resolve_threat_model(const std::string& tm_spec, const std::string& preset) {
    if (!tm_spec.empty() && !preset.empty())
        throw CLI::ValidationError("--tm", "--tm and --preset are mutually exclusive");
    if (!tm_spec.empty())
        return parse_threat_model(tm_spec);
    if (!preset.empty())
        return preset_threat_model(preset);
    return full_threat_model();
}

int run_analyze(const AnalyzeOptions& opt) {
    std::string text = read_file(opt.file);
    Program prog = parse_program(text);
    for (const AnnotationWarning& w : validate_annotations(prog))
        std::cerr << opt.file << ":" << w.source_line << ": warning: " << w.message << "\n";

    ThreatModel tm = resolve_threat_model(opt.tm_spec, opt.preset);
    AttackGraph ag = build_attack_graph(prog, tm);
    auto catalog = active_catalog();

    AnalysisReport report;
    report.input_name = opt.file;
    report.input_hash = content_hash(text);
    report.threat_model = tm;
    report.findings = find_vulnerabilities(ag);
    annotate_findings(ag, report.findings, catalog);

    std::optional<DefenseStrategy> strategy;
    if (!opt.defend.empty()) {
        strategy = parse_strategy(opt.defend);
        if (!strategy)
            throw CLI::ValidationError("--defend", "unknown strategy '" + opt.defend + "'");
    }

    if (strategy && !report.findings.empty())
        report.plans.push_back(apply_defense(ag, *strategy));
    else if (opt.suggest && !report.findings.empty())
        report.plans = suggest_defenses(ag, report.findings);

    std::string rendered = opt.format == "json"
                               ? report_to_json(ag, report).dump(2) + "\n"
                               : report_to_text(ag, report, catalog);
    emit(rendered, opt.out_path);

    if (strategy)
        return report.findings.empty() || report.plans.front().verdict.sufficient ? 0 : 1;
    return report.findings.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"specdep: security-dependency analysis for speculative-execution gadgets"};
    app.require_subcommand(1);

    AnalyzeOptions analyze_opt;
    auto* analyze = app.add_subcommand("analyze", "analyze a SpecIR file for races");
    analyze->add_option("file", analyze_opt.file, "SpecIR input")->required();
    analyze->add_option("--tm", analyze_opt.tm_spec, "threat model: mechs,sources,channels");
    analyze->add_option("--preset", analyze_opt.preset, "named threat-model preset");
    analyze->add_option("--defend", analyze_opt.defend, "apply one defense strategy");
    analyze->add_flag("--suggest", analyze_opt.suggest, "include ranked defense suggestions");
    analyze->add_option("--format", analyze_opt.format, "text|json")
        ->check(CLI::IsMember({"text", "json"}));
    analyze->add_option("--out", analyze_opt.out_path, "write report to file");

    struct {
        std::string file, tm_spec, preset, with_defense, out_path;
    } graph_opt;
    auto* graph = app.add_subcommand("graph", "export the attack graph as DOT");
    graph->add_option("file", graph_opt.file, "SpecIR input")->required();
    graph->add_option("--tm", graph_opt.tm_spec, "threat model: mechs,sources,channels");
    graph->add_option("--preset", graph_opt.preset, "named threat-model preset");
    graph->add_option("--with-defense", graph_opt.with_defense,
                      "overlay one strategy's security dependencies");
    graph->add_option("--out", graph_opt.out_path, "write DOT to file");

    struct {
        std::string tm_spec, preset, format = "text";
        bool novel_only = false;
    } variants_opt;
    auto* variants = app.add_subcommand("variants", "enumerate attack-dimension combinations");
    variants->add_option("--tm", variants_opt.tm_spec, "dimension space: mechs,sources,channels");
    variants->add_option("--preset", variants_opt.preset, "named threat-model preset");
    variants->add_flag("--novel-only", variants_opt.novel_only,
                       "only combinations matching no known variant");
    variants->add_option("--format", variants_opt.format, "text|json")
        ->check(CLI::IsMember({"text", "json"}));

    struct {
        std::string format = "text", name_glob;
    } catalog_opt;
    auto* catalog_cmd = app.add_subcommand("catalog", "list the known-variant catalog");
    catalog_cmd->add_option("--format", catalog_opt.format, "text|json")
        ->check(CLI::IsMember({"text", "json"}));
    catalog_cmd->add_option("--name", catalog_opt.name_glob, "filter by name glob");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*analyze)
            return run_analyze(analyze_opt);

        if (*graph) {
            Program prog = parse_program(read_file(graph_opt.file));
            ThreatModel tm = resolve_threat_model(graph_opt.tm_spec, graph_opt.preset);
            AttackGraph ag = build_attack_graph(prog, tm);
            if (!graph_opt.with_defense.empty()) {
                auto strategy = parse_strategy(graph_opt.with_defense);
                if (!strategy)
                    throw CLI::ValidationError("--with-defense",
                                               "unknown strategy '" + graph_opt.with_defense + "'");
                ag = apply_plan(ag, apply_defense(ag, *strategy));
            }
            emit(export_dot(ag), graph_opt.out_path);
            return 0;
        }

        if (*variants) {
            ThreatModel space = resolve_threat_model(variants_opt.tm_spec, variants_opt.preset);
            auto cat = active_catalog();
            auto matrix = default_compatibility(cat);
            auto combos = enumerate_variants(space, cat, matrix);
            if (variants_opt.novel_only) {
                std::erase_if(combos,
                              [](const VariantCombination& c) { return !c.known.empty(); });
            }
            if (variants_opt.format == "json") {
                Json arr = Json::array();
                for (const auto& c : combos) {
                    Json j;
                    j["mechanism"] = to_string(c.mechanism);
                    j["source"] = to_string(c.source);
                    j["channel"] = to_string(c.channel);
                    Json known = Json::array();
                    for (const auto& name : c.known)
                        known.push_back(name);
                    j["known"] = std::move(known);
                    if (!c.grouping_note.empty())
                        j["grouping_note"] = c.grouping_note;
                    arr.push_back(std::move(j));
                }
                std::cout << arr.dump(2) << "\n";
            } else {
                for (const auto& c : combos) {
                    std::cout << to_string(c.mechanism) << "  " << to_string(c.source) << "  "
                              << to_string(c.channel) << "  ";
                    if (c.known.empty()) {
                        std::cout << "novel (speculative combination)";
                    } else {
                        std::cout << "known:";
                        for (const auto& name : c.known)
                            std::cout << " " << name << ";";
                    }
                    std::cout << "\n";
                }
            }
            return 0;
        }

        if (*catalog_cmd) {
            auto cat = active_catalog();
            if (!catalog_opt.name_glob.empty())
                std::erase_if(cat, [&](const AttackVariantTemplate& t) {
                    return !glob_match(catalog_opt.name_glob, t.name);
                });
            if (catalog_opt.format == "json") {
                std::cout << catalog_to_json(cat).dump(2) << "\n";
            } else {
                for (const auto& t : cat) {
                    std::cout << t.name;
                    if (!t.cve.empty())
                        std::cout << "  (" << t.cve << ")";
                    std::cout << "\n    authorization: " << t.authorization_text
                              << "\n    access: " << t.access_text << "\n";
                }
            }
            return 0;
        }
    } catch (const ParseError& e) {
        std::string file = *analyze ? analyze_opt.file : graph_opt.file;
        std::cerr << file << ":" << e.line << ": error: "
                  << std::string(e.what()).substr(std::string(e.what()).find(": ") + 2) << "\n";
        return 2;
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
