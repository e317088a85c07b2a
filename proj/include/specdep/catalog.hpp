#pragma once

// Catalog of known speculative attack variants: one template per known
// attack, pairing an authorization kind with an illegal-access kind.
// Findings are classified against the templates; the variant enumerator
// walks the (delay mechanism x secret source x channel) space and marks
// which combinations reproduce known attacks and which are new candidates.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "specdep/builder.hpp"
#include "specdep/defense.hpp"

namespace specdep {

using Json = nlohmann::ordered_json;

/// How an authorization node presents in a finding.
enum class AuthClass : std::uint8_t {
    CondBranch,
    IndBranch,
    RetBranch,
    PermCheckLoad,
    PermCheckStore,
    PermCheckSysreg,
    PermCheckFpreg,
    AddrDisambiguate,
    TsxAbort,
    Marker,
};

inline const char* to_string(AuthClass c) {
    switch (c) {
    case AuthClass::CondBranch: return "cond-branch";
    case AuthClass::IndBranch: return "ind-branch";
    case AuthClass::RetBranch: return "ret-branch";
    case AuthClass::PermCheckLoad: return "perm-check-load";
    case AuthClass::PermCheckStore: return "perm-check-store";
    case AuthClass::PermCheckSysreg: return "perm-check-sysreg";
    case AuthClass::PermCheckFpreg: return "perm-check-fpreg";
    case AuthClass::AddrDisambiguate: return "addr-disambiguate";
    case AuthClass::TsxAbort: return "tsx-abort";
    case AuthClass::Marker: return "authz-marker";
    }
    return "?";
}

struct AttackVariantTemplate {
    std::string name;
    std::string cve;  // empty when none is catalogued
    std::string authorization_text;
    std::string access_text;
    std::string reference_graph;  // which model graph shape it instantiates

    // matching pattern
    std::set<AuthClass> auth_classes;
    bool access_any = false;                    // matches any racing access (gadget execution)
    std::optional<bool> access_store;           // instruction-level store (true) / load (false)
    std::set<MicroOpKind> access_sources;       // micro-op read kinds
    std::optional<RegionDomain> access_domain;
    std::optional<bool> access_readonly;
    std::optional<bool> access_secret;

    // canonical dimension combination(s) for the variant enumerator
    DelayMechanism enum_mechanism = DelayMechanism::BranchPrediction;
    std::set<MicroOpKind> enum_sources;
    std::string grouping_note;  // why this cell may name several attacks
};

enum class MatchQuality : std::uint8_t { Exact, Partial };

struct VariantMatch {
    std::string template_name;
    MatchQuality quality = MatchQuality::Exact;
};

/// How a finding's access and authorization present to the matcher.
struct FindingProfile {
    AuthClass auth = AuthClass::Marker;
    std::optional<MicroOpKind> source;  // set for micro-op accesses
    bool is_store = false;
    RegionDomain domain = RegionDomain::User;
    bool readonly_target = false;
    bool secret_target = false;
};

inline FindingProfile profile_finding(const AttackGraph& ag, const RaceFinding& f) {
    FindingProfile p;

    auto auth_micro = ag.micro_op_of(f.authorization);
    auto auth_inst = ag.instruction_of(f.authorization);
    Opcode auth_opcode =
        auth_inst ? ag.program.instructions[*auth_inst].opcode() : Opcode::Arith;
    if (auth_micro == MicroOpKind::BranchResolve) {
        p.auth = auth_opcode == Opcode::BranchCond  ? AuthClass::CondBranch
                 : auth_opcode == Opcode::BranchInd ? AuthClass::IndBranch
                                                    : AuthClass::RetBranch;
    } else if (auth_micro == MicroOpKind::PermissionCheck) {
        p.auth = auth_opcode == Opcode::Store        ? AuthClass::PermCheckStore
                 : auth_opcode == Opcode::ReadSysreg ? AuthClass::PermCheckSysreg
                 : auth_opcode == Opcode::ReadFpreg  ? AuthClass::PermCheckFpreg
                                                     : AuthClass::PermCheckLoad;
    } else if (auth_micro == MicroOpKind::AddressDisambiguate) {
        p.auth = AuthClass::AddrDisambiguate;
    } else if (auth_micro == MicroOpKind::TsxAbortResolve) {
        p.auth = AuthClass::TsxAbort;
    } else {
        p.auth = AuthClass::Marker;
    }

    p.source = ag.micro_op_of(f.access);
    auto access_inst = ag.instruction_of(f.access);
    if (access_inst) {
        const Instruction& inst = ag.program.instructions[*access_inst];
        p.is_store = inst.opcode() == Opcode::Store;
        if (const MemRef* mem = inst.mem()) {
            if (const RegionDecl* region = ag.program.region(mem->region)) {
                p.domain = region->domain;
                p.readonly_target = region->read_only;
                p.secret_target = ag.program.is_secret(region->name) ||
                                  region->domain != RegionDomain::User;
            }
        }
    }
    return p;
}

inline bool auth_matches(const AttackVariantTemplate& t, const FindingProfile& p) {
    return t.auth_classes.count(p.auth) > 0;
}

inline bool access_matches(const AttackVariantTemplate& t, const FindingProfile& p) {
    if (t.access_any)
        return true;
    if (!t.access_sources.empty()) {
        if (!p.source || !t.access_sources.count(*p.source))
            return false;
    } else {
        if (p.source)
            return false;  // template wants an instruction-level access
        if (t.access_store && *t.access_store != p.is_store)
            return false;
    }
    if (t.access_domain && *t.access_domain != p.domain)
        return false;
    if (t.access_readonly && *t.access_readonly != p.readonly_target)
        return false;
    if (t.access_secret && *t.access_secret != p.secret_target)
        return false;
    return true;
}

/// All templates matching the finding; exact (both sides) before partial
/// (one side), catalog order within each group.
inline std::vector<VariantMatch> match_finding(const AttackGraph& ag, const RaceFinding& f,
                                               const std::vector<AttackVariantTemplate>& catalog) {
    FindingProfile p = profile_finding(ag, f);
    std::vector<VariantMatch> exact, partial;
    for (const AttackVariantTemplate& t : catalog) {
        bool a = auth_matches(t, p);
        bool b = access_matches(t, p);
        if (a && b)
            exact.push_back({t.name, MatchQuality::Exact});
        else if (a || (b && !t.access_any))
            partial.push_back({t.name, MatchQuality::Partial});
    }
    exact.insert(exact.end(), partial.begin(), partial.end());
    return exact;
}

/// Fills each finding's matched_variants with its exact template names.
inline void annotate_findings(const AttackGraph& ag, std::vector<RaceFinding>& findings,
                              const std::vector<AttackVariantTemplate>& catalog) {
    for (RaceFinding& f : findings) {
        f.matched_variants.clear();
        for (const VariantMatch& m : match_finding(ag, f, catalog))
            if (m.quality == MatchQuality::Exact)
                f.matched_variants.push_back(m.template_name);
    }
}

inline std::vector<AttackVariantTemplate> builtin_catalog() {
    std::vector<AttackVariantTemplate> out;
    auto src = [](std::initializer_list<MicroOpKind> l) { return std::set<MicroOpKind>(l); };

    AttackVariantTemplate t;

    t = {};
    t.name = "Spectre v1";
    t.cve = "CVE-2017-5753";
    t.authorization_text = "Boundary-check branch resolution";
    t.access_text = "Read out-of-bounds memory";
    t.reference_graph = "branch-window";
    t.auth_classes = {AuthClass::CondBranch};
    t.access_store = false;
    t.access_domain = RegionDomain::User;
    t.access_secret = true;
    t.enum_mechanism = DelayMechanism::BranchPrediction;
    t.enum_sources = src({MicroOpKind::ReadMemory});
    t.grouping_note = "the v1 family shares the branch-window graph";
    out.push_back(t);

    t = {};
    t.name = "Spectre v1.1";
    t.cve = "CVE-2018-3693";
    t.authorization_text = "Boundary-check branch resolution";
    t.access_text = "Write out-of-bounds memory";
    t.reference_graph = "branch-window";
    t.auth_classes = {AuthClass::CondBranch};
    t.access_store = true;
    t.access_domain = RegionDomain::User;
    t.access_secret = true;
    t.enum_mechanism = DelayMechanism::BranchPrediction;
    t.enum_sources = src({MicroOpKind::ReadMemory});
    t.grouping_note = "the v1 family shares the branch-window graph";
    out.push_back(t);

    t = {};
    t.name = "Spectre v1.2";
    t.cve = "";
    t.authorization_text = "Page read-only bit check";
    t.access_text = "Write read-only memory";
    t.reference_graph = "branch-window";
    t.auth_classes = {AuthClass::PermCheckStore};
    t.access_store = true;
    t.access_readonly = true;
    t.enum_mechanism = DelayMechanism::BranchPrediction;
    t.enum_sources = src({MicroOpKind::ReadMemory});
    t.grouping_note = "the v1 family shares the branch-window graph";
    out.push_back(t);

    t = {};
    t.name = "Spectre v2";
    t.cve = "CVE-2017-5715";
    t.authorization_text = "Indirect branch target resolution";
    t.access_text = "Execute code not intended to be executed";
    t.reference_graph = "branch-window";
    t.auth_classes = {AuthClass::IndBranch};
    t.access_any = true;
    t.enum_mechanism = DelayMechanism::IndirectTargetPrediction;
    t.enum_sources = src({MicroOpKind::ReadMemory});
    out.push_back(t);

    t = {};
    t.name = "Meltdown (Spectre v3)";
    t.cve = "CVE-2017-5754";
    t.authorization_text = "Kernel privilege check";
    t.access_text = "Read from kernel memory";
    t.reference_graph = "faulting-load";
    t.auth_classes = {AuthClass::PermCheckLoad};
    t.access_sources = src({MicroOpKind::ReadMemory});
    t.access_domain = RegionDomain::Kernel;
    t.enum_mechanism = DelayMechanism::DelayedException;
    t.enum_sources = src({MicroOpKind::ReadMemory});
    out.push_back(t);

    t = {};
    t.name = "Meltdown variant1 (Spectre v3a)";
    t.cve = "CVE-2018-3640";
    t.authorization_text = "RDMSR instruction privilege check";
    t.access_text = "Read system register";
    t.reference_graph = "special-register";
    t.auth_classes = {AuthClass::PermCheckSysreg};
    t.access_sources = src({MicroOpKind::ReadSpecialRegister});
    t.enum_mechanism = DelayMechanism::DelayedException;
    t.enum_sources = src({MicroOpKind::ReadSpecialRegister});
    out.push_back(t);

    t = {};
    t.name = "Spectre v4";
    t.cve = "CVE-2018-3639";
    t.authorization_text = "Store-load address dependency resolution";
    t.access_text = "Read stale data";
    t.reference_graph = "store-bypass";
    t.auth_classes = {AuthClass::AddrDisambiguate};
    t.access_sources = src({MicroOpKind::ReadMemory});
    t.enum_mechanism = DelayMechanism::StoreLoadDisambiguation;
    t.enum_sources = src({MicroOpKind::ReadMemory});
    out.push_back(t);

    t = {};
    t.name = "Spectre RSB";
    t.cve = "CVE-2018-15572";
    t.authorization_text = "Return target resolution";
    t.access_text = "Execute code not intended to be executed";
    t.reference_graph = "branch-window";
    t.auth_classes = {AuthClass::RetBranch};
    t.access_any = true;
    t.enum_mechanism = DelayMechanism::ReturnPrediction;
    t.enum_sources = src({MicroOpKind::ReadMemory});
    out.push_back(t);

    t = {};
    t.name = "Foreshadow (L1 Terminal Fault)";
    t.cve = "CVE-2018-3615";
    t.authorization_text = "Page permission check";
    t.access_text = "Read enclave data in L1 cache from outside enclave";
    t.reference_graph = "faulting-load";
    t.auth_classes = {AuthClass::PermCheckLoad};
    t.access_sources = src({MicroOpKind::ReadCache});
    t.access_domain = RegionDomain::Enclave;
    t.enum_mechanism = DelayMechanism::DelayedException;
    t.enum_sources = src({MicroOpKind::ReadCache});
    t.grouping_note = "Foreshadow variants share the faulting-load graph's cache branch";
    out.push_back(t);

    t = {};
    t.name = "Foreshadow-OS";
    t.cve = "CVE-2018-3620";
    t.authorization_text = "Page permission check";
    t.access_text = "Read kernel data in cache";
    t.reference_graph = "faulting-load";
    t.auth_classes = {AuthClass::PermCheckLoad};
    t.access_sources = src({MicroOpKind::ReadCache});
    t.access_domain = RegionDomain::Kernel;
    t.enum_mechanism = DelayMechanism::DelayedException;
    t.enum_sources = src({MicroOpKind::ReadCache});
    t.grouping_note = "Foreshadow variants share the faulting-load graph's cache branch";
    out.push_back(t);

    t = {};
    t.name = "Foreshadow-VMM";
    t.cve = "CVE-2018-3646";
    t.authorization_text = "Page permission check";
    t.access_text = "Read VMM data in cache";
    t.reference_graph = "faulting-load";
    t.auth_classes = {AuthClass::PermCheckLoad};
    t.access_sources = src({MicroOpKind::ReadCache});
    t.access_domain = RegionDomain::Vmm;
    t.enum_mechanism = DelayMechanism::DelayedException;
    t.enum_sources = src({MicroOpKind::ReadCache});
    t.grouping_note = "Foreshadow variants share the faulting-load graph's cache branch";
    out.push_back(t);

    t = {};
    t.name = "Lazy FP";
    t.cve = "CVE-2018-3665";
    t.authorization_text = "FPU owner check";
    t.access_text = "Read stale FPU state";
    t.reference_graph = "special-register";
    t.auth_classes = {AuthClass::PermCheckFpreg};
    t.access_sources = src({MicroOpKind::ReadFpRegister});
    t.enum_mechanism = DelayMechanism::LazyFpuSwitch;
    t.enum_sources = src({MicroOpKind::ReadFpRegister});
    out.push_back(t);

    t = {};
    t.name = "RIDL";
    t.cve = "";
    t.authorization_text = "Load fault check";
    t.access_text = "Forward data from fill buffer and load port";
    t.reference_graph = "faulting-load";
    t.auth_classes = {AuthClass::PermCheckLoad};
    t.access_sources = src({MicroOpKind::ReadLineFillBuffer, MicroOpKind::ReadLoadPort});
    t.access_domain = RegionDomain::User;
    t.enum_mechanism = DelayMechanism::DelayedException;
    t.enum_sources = src({MicroOpKind::ReadLineFillBuffer, MicroOpKind::ReadLoadPort});
    t.grouping_note = "fill-buffer forwarding is shared by RIDL, ZombieLoad and LVI";
    out.push_back(t);

    t = {};
    t.name = "ZombieLoad";
    t.cve = "";
    t.authorization_text = "Load fault check";
    t.access_text = "Forward data from fill buffer";
    t.reference_graph = "faulting-load";
    t.auth_classes = {AuthClass::PermCheckLoad};
    t.access_sources = src({MicroOpKind::ReadLineFillBuffer});
    t.access_domain = RegionDomain::User;
    t.enum_mechanism = DelayMechanism::DelayedException;
    t.enum_sources = src({MicroOpKind::ReadLineFillBuffer});
    t.grouping_note = "fill-buffer forwarding is shared by RIDL, ZombieLoad and LVI";
    out.push_back(t);

    t = {};
    t.name = "Fallout";
    t.cve = "";
    t.authorization_text = "Load fault check";
    t.access_text = "Forward data from store buffer";
    t.reference_graph = "faulting-load";
    t.auth_classes = {AuthClass::PermCheckLoad};
    t.access_sources = src({MicroOpKind::ReadStoreBuffer});
    t.access_domain = RegionDomain::User;
    t.enum_mechanism = DelayMechanism::DelayedException;
    t.enum_sources = src({MicroOpKind::ReadStoreBuffer});
    out.push_back(t);

    t = {};
    t.name = "LVI";
    t.cve = "";
    t.authorization_text = "Load fault check";
    t.access_text =
        "Forward data from micro-architectural buffers (L1D cache, load port, store buffer and "
        "line fill buffer)";
    t.reference_graph = "faulting-load";
    t.auth_classes = {AuthClass::PermCheckLoad};
    t.access_sources = src({MicroOpKind::ReadCache, MicroOpKind::ReadLoadPort,
                            MicroOpKind::ReadStoreBuffer, MicroOpKind::ReadLineFillBuffer});
    t.access_domain = RegionDomain::User;
    t.enum_mechanism = DelayMechanism::DelayedException;
    t.enum_sources = src({MicroOpKind::ReadLineFillBuffer});
    t.grouping_note = "fill-buffer forwarding is shared by RIDL, ZombieLoad and LVI";
    out.push_back(t);

    t = {};
    t.name = "TAA";
    t.cve = "";
    t.authorization_text = "TSX Asynchronous Abort Completion";
    t.access_text = "Load data from L1D cache, store or load buffers";
    t.reference_graph = "faulting-load";
    t.auth_classes = {AuthClass::TsxAbort};
    t.access_sources =
        src({MicroOpKind::ReadCache, MicroOpKind::ReadStoreBuffer, MicroOpKind::ReadLoadPort});
    t.enum_mechanism = DelayMechanism::TsxAbort;
    t.enum_sources =
        src({MicroOpKind::ReadCache, MicroOpKind::ReadStoreBuffer, MicroOpKind::ReadLoadPort});
    out.push_back(t);

    t = {};
    t.name = "Cacheout";
    t.cve = "";
    t.authorization_text = "TSX Asynchronous Abort Completion";
    t.access_text = "Forward data from fill buffer";
    t.reference_graph = "faulting-load";
    t.auth_classes = {AuthClass::TsxAbort};
    t.access_sources = src({MicroOpKind::ReadLineFillBuffer});
    t.enum_mechanism = DelayMechanism::TsxAbort;
    t.enum_sources = src({MicroOpKind::ReadLineFillBuffer});
    out.push_back(t);

    return out;
}

// --- enum <-> string helpers for serialization -----------------------------

inline std::optional<DelayMechanism> delay_mechanism_from(std::string_view s) {
    for (int i = 0; i <= static_cast<int>(DelayMechanism::TsxAbort); ++i)
        if (s == to_string(static_cast<DelayMechanism>(i)))
            return static_cast<DelayMechanism>(i);
    return std::nullopt;
}

inline std::optional<MicroOpKind> micro_op_from(std::string_view s) {
    for (int i = 0; i <= static_cast<int>(MicroOpKind::TsxAbortResolve); ++i)
        if (s == to_string(static_cast<MicroOpKind>(i)))
            return static_cast<MicroOpKind>(i);
    return std::nullopt;
}

inline std::optional<CovertChannel> channel_from(std::string_view s) {
    for (int i = 0; i <= static_cast<int>(CovertChannel::PrimeProbe); ++i)
        if (s == to_string(static_cast<CovertChannel>(i)))
            return static_cast<CovertChannel>(i);
    return std::nullopt;
}

inline std::optional<AuthClass> auth_class_from(std::string_view s) {
    for (int i = 0; i <= static_cast<int>(AuthClass::Marker); ++i)
        if (s == to_string(static_cast<AuthClass>(i)))
            return static_cast<AuthClass>(i);
    return std::nullopt;
}

inline std::optional<RegionDomain> domain_from(std::string_view s) {
    for (int i = 0; i <= static_cast<int>(RegionDomain::Vmm); ++i)
        if (s == to_string(static_cast<RegionDomain>(i)))
            return static_cast<RegionDomain>(i);
    return std::nullopt;
}

inline Json catalog_to_json(const std::vector<AttackVariantTemplate>& catalog) {
    Json arr = Json::array();
    for (const auto& t : catalog) {
        Json j;
        j["name"] = t.name;
        j["cve"] = t.cve;
        j["authorization"] = t.authorization_text;
        j["access"] = t.access_text;
        j["reference_graph"] = t.reference_graph;
        Json auth = Json::array();
        for (AuthClass c : t.auth_classes)
            auth.push_back(to_string(c));
        j["auth_classes"] = auth;
        j["access_any"] = t.access_any;
        if (t.access_store)
            j["access_store"] = *t.access_store;
        Json sources = Json::array();
        for (MicroOpKind k : t.access_sources)
            sources.push_back(to_string(k));
        j["access_sources"] = sources;
        if (t.access_domain)
            j["access_domain"] = to_string(*t.access_domain);
        if (t.access_readonly)
            j["access_readonly"] = *t.access_readonly;
        if (t.access_secret)
            j["access_secret"] = *t.access_secret;
        j["enum_mechanism"] = to_string(t.enum_mechanism);
        Json es = Json::array();
        for (MicroOpKind k : t.enum_sources)
            es.push_back(to_string(k));
        j["enum_sources"] = es;
        if (!t.grouping_note.empty())
            j["grouping_note"] = t.grouping_note;
        arr.push_back(std::move(j));
    }
    Json root;
    root["schema"] = 1;
    root["templates"] = std::move(arr);
    return root;
}

inline std::vector<AttackVariantTemplate> catalog_from_json(const Json& root) {
    if (!root.contains("schema") || root["schema"].get<int>() != 1)
        throw Error("catalog file: unsupported schema");
    std::vector<AttackVariantTemplate> out;
    for (const Json& j : root.at("templates")) {
        AttackVariantTemplate t;
        t.name = j.at("name").get<std::string>();
        t.cve = j.value("cve", std::string{});
        t.authorization_text = j.at("authorization").get<std::string>();
        t.access_text = j.at("access").get<std::string>();
        t.reference_graph = j.value("reference_graph", std::string{});
        for (const Json& c : j.at("auth_classes")) {
            auto ac = auth_class_from(c.get<std::string>());
            if (!ac)
                throw Error("catalog file: unknown auth class " + c.get<std::string>());
            t.auth_classes.insert(*ac);
        }
        t.access_any = j.value("access_any", false);
        if (j.contains("access_store"))
            t.access_store = j["access_store"].get<bool>();
        for (const Json& s : j.at("access_sources")) {
            auto k = micro_op_from(s.get<std::string>());
            if (!k)
                throw Error("catalog file: unknown micro-op " + s.get<std::string>());
            t.access_sources.insert(*k);
        }
        if (j.contains("access_domain")) {
            auto d = domain_from(j["access_domain"].get<std::string>());
            if (!d)
                throw Error("catalog file: unknown domain");
            t.access_domain = *d;
        }
        if (j.contains("access_readonly"))
            t.access_readonly = j["access_readonly"].get<bool>();
        if (j.contains("access_secret"))
            t.access_secret = j["access_secret"].get<bool>();
        auto mech = delay_mechanism_from(j.at("enum_mechanism").get<std::string>());
        if (!mech)
            throw Error("catalog file: unknown mechanism");
        t.enum_mechanism = *mech;
        for (const Json& s : j.at("enum_sources")) {
            auto k = micro_op_from(s.get<std::string>());
            if (!k)
                throw Error("catalog file: unknown micro-op " + s.get<std::string>());
            t.enum_sources.insert(*k);
        }
        t.grouping_note = j.value("grouping_note", std::string{});
        out.push_back(std::move(t));
    }
    return out;
}

inline std::vector<AttackVariantTemplate> load_catalog_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open catalog file " + path);
    Json root = Json::parse(in);
    return catalog_from_json(root);
}

// --- compatibility matrix ---------------------------------------------------

struct CompatCell {
    DelayMechanism mechanism;
    MicroOpKind source;
    bool allowed = true;
    std::string reason;
};

/// One cell per (mechanism, source) pair, each with a one-line rationale.
/// Unknown combinations default to allowed ("speculative combination").
inline std::vector<CompatCell> default_compatibility(
    const std::vector<AttackVariantTemplate>& catalog) {
    std::vector<CompatCell> cells;
    for (int m = 0; m <= static_cast<int>(DelayMechanism::TsxAbort); ++m) {
        for (int s = 0; s <= static_cast<int>(MicroOpKind::TsxAbortResolve); ++s) {
            MicroOpKind source = static_cast<MicroOpKind>(s);
            bool is_read = load_source_kinds().count(source) ||
                           source == MicroOpKind::ReadSpecialRegister ||
                           source == MicroOpKind::ReadFpRegister;
            if (!is_read)
                continue;
            DelayMechanism mech = static_cast<DelayMechanism>(m);
            CompatCell cell{mech, source, true, ""};

            if (mech == DelayMechanism::LazyFpuSwitch && source != MicroOpKind::ReadFpRegister) {
                cell.allowed = false;
                cell.reason = "lazy FPU switching only exposes stale FPU state";
            } else if (source == MicroOpKind::ReadFpRegister &&
                       mech != DelayMechanism::LazyFpuSwitch) {
                cell.allowed = false;
                cell.reason = "FP register contents are stale only across a deferred context switch";
            } else if (mech == DelayMechanism::StoreLoadDisambiguation &&
                       source == MicroOpKind::ReadSpecialRegister) {
                cell.allowed = false;
                cell.reason = "register reads have no address to disambiguate";
            } else {
                std::vector<std::string> names;
                for (const auto& t : catalog)
                    if (t.enum_mechanism == mech && t.enum_sources.count(source))
                        names.push_back(t.name);
                if (!names.empty()) {
                    cell.reason = "reproduces ";
                    for (std::size_t i = 0; i < names.size(); ++i)
                        cell.reason += (i ? ", " : "") + names[i];
                } else {
                    cell.reason = "speculative combination";
                }
            }
            cells.push_back(std::move(cell));
        }
    }
    return cells;
}

inline Json compatibility_to_json(const std::vector<CompatCell>& cells) {
    Json arr = Json::array();
    for (const auto& c : cells) {
        Json j;
        j["mechanism"] = to_string(c.mechanism);
        j["source"] = to_string(c.source);
        j["allowed"] = c.allowed;
        j["reason"] = c.reason;
        arr.push_back(std::move(j));
    }
    Json root;
    root["schema"] = 1;
    root["cells"] = std::move(arr);
    return root;
}

inline std::vector<CompatCell> compatibility_from_json(const Json& root) {
    if (!root.contains("schema") || root["schema"].get<int>() != 1)
        throw Error("compatibility file: unsupported schema");
    std::vector<CompatCell> out;
    for (const Json& j : root.at("cells")) {
        auto mech = delay_mechanism_from(j.at("mechanism").get<std::string>());
        auto source = micro_op_from(j.at("source").get<std::string>());
        if (!mech || !source)
            throw Error("compatibility file: unknown enum value");
        out.push_back(CompatCell{*mech, *source, j.at("allowed").get<bool>(),
                                 j.value("reason", std::string{})});
    }
    return out;
}

/// One enumerated attack candidate: a compatible dimension combination with
/// the known templates it reproduces (empty = novel).
struct VariantCombination {
    DelayMechanism mechanism;
    MicroOpKind source;
    CovertChannel channel;
    std::vector<std::string> known;
    std::string grouping_note;
};

inline ThreatModel full_threat_model() {
    ThreatModel tm;
    for (int m = 0; m <= static_cast<int>(DelayMechanism::TsxAbort); ++m)
        tm.delay_mechanisms.insert(static_cast<DelayMechanism>(m));
    for (MicroOpKind k : load_source_kinds())
        tm.secret_sources.insert(k);
    tm.secret_sources.insert(MicroOpKind::ReadSpecialRegister);
    tm.secret_sources.insert(MicroOpKind::ReadFpRegister);
    tm.channels = {CovertChannel::FlushReload, CovertChannel::PrimeProbe};
    return tm;
}

/// Walks the dimension space in lexicographic enum order, keeping compatible
/// cells and annotating each with the catalog templates it reproduces.
inline std::vector<VariantCombination> enumerate_variants(
    const ThreatModel& space, const std::vector<AttackVariantTemplate>& catalog,
    const std::vector<CompatCell>& matrix) {
    auto cell = [&](DelayMechanism m, MicroOpKind s) -> const CompatCell* {
        for (const auto& c : matrix)
            if (c.mechanism == m && c.source == s)
                return &c;
        return nullptr;
    };
    std::vector<VariantCombination> out;
    for (DelayMechanism m : space.delay_mechanisms) {
        for (MicroOpKind s : space.secret_sources) {
            const CompatCell* c = cell(m, s);
            if (c && !c->allowed)
                continue;
            for (CovertChannel ch : space.channels) {
                VariantCombination combo{m, s, ch, {}, {}};
                for (const auto& t : catalog) {
                    if (t.enum_mechanism == m && t.enum_sources.count(s)) {
                        combo.known.push_back(t.name);
                        if (!t.grouping_note.empty())
                            combo.grouping_note = t.grouping_note;
                    }
                }
                out.push_back(std::move(combo));
            }
        }
    }
    return out;
}

}  // namespace specdep
