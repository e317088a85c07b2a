#pragma once

// Attack-graph construction. Turns a SpecIR program plus a threat model into
// an ordering graph: one node per simple instruction, micro-op decomposition
// for instructions whose authorization and access live inside one
// instruction, dependency edges for everything the hardware actually orders,
// and role labels on the critical nodes. The deliberate *absence* of an edge
// from a delayed authorization to the operations behind it is the attack
// surface the analysis then searches for.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "specdep/ir.hpp"
#include "specdep/tsg.hpp"

namespace specdep {

struct BuildError : Error {
    using Error::Error;
};
struct UnsupportedOpcodeError : Error {
    using Error::Error;
};

enum class MicroOpKind : std::uint8_t {
    TranslateAddress,
    PermissionCheck,
    ReadMemory,
    ReadCache,
    ReadLineFillBuffer,
    ReadStoreBuffer,
    ReadLoadPort,
    ReadSpecialRegister,
    ReadFpRegister,
    ForwardToRegister,
    CacheFill,
    BranchResolve,
    AddressDisambiguate,
    TsxAbortResolve,
};

enum class DelayMechanism : std::uint8_t {
    BranchPrediction,
    IndirectTargetPrediction,
    ReturnPrediction,
    DelayedException,
    StoreLoadDisambiguation,
    LazyFpuSwitch,
    TsxAbort,
};

enum class CovertChannel : std::uint8_t { FlushReload, PrimeProbe };

inline const char* to_string(MicroOpKind k) {
    switch (k) {
    case MicroOpKind::TranslateAddress: return "translate-address";
    case MicroOpKind::PermissionCheck: return "permission-check";
    case MicroOpKind::ReadMemory: return "read-memory";
    case MicroOpKind::ReadCache: return "read-cache";
    case MicroOpKind::ReadLineFillBuffer: return "read-line-fill-buffer";
    case MicroOpKind::ReadStoreBuffer: return "read-store-buffer";
    case MicroOpKind::ReadLoadPort: return "read-load-port";
    case MicroOpKind::ReadSpecialRegister: return "read-special-register";
    case MicroOpKind::ReadFpRegister: return "read-fp-register";
    case MicroOpKind::ForwardToRegister: return "forward-to-register";
    case MicroOpKind::CacheFill: return "cache-fill";
    case MicroOpKind::BranchResolve: return "branch-resolve";
    case MicroOpKind::AddressDisambiguate: return "address-disambiguate";
    case MicroOpKind::TsxAbortResolve: return "tsx-abort-resolve";
    }
    return "?";
}

inline const char* to_string(DelayMechanism m) {
    switch (m) {
    case DelayMechanism::BranchPrediction: return "branch-prediction";
    case DelayMechanism::IndirectTargetPrediction: return "indirect-target-prediction";
    case DelayMechanism::ReturnPrediction: return "return-prediction";
    case DelayMechanism::DelayedException: return "delayed-exception";
    case DelayMechanism::StoreLoadDisambiguation: return "store-load-disambiguation";
    case DelayMechanism::LazyFpuSwitch: return "lazy-fpu-switch";
    case DelayMechanism::TsxAbort: return "tsx-abort";
    }
    return "?";
}

inline const char* to_string(CovertChannel c) {
    switch (c) {
    case CovertChannel::FlushReload: return "flush-reload";
    case CovertChannel::PrimeProbe: return "prime-probe";
    }
    return "?";
}

/// Secret-source micro-ops a load can draw from.
inline const std::set<MicroOpKind>& load_source_kinds() {
    static const std::set<MicroOpKind> kinds{
        MicroOpKind::ReadMemory, MicroOpKind::ReadCache, MicroOpKind::ReadLineFillBuffer,
        MicroOpKind::ReadStoreBuffer, MicroOpKind::ReadLoadPort};
    return kinds;
}

/// The three attack dimensions: what delays the authorization, where the
/// secret can come from, and which channel carries it out.
struct ThreatModel {
    std::set<DelayMechanism> delay_mechanisms;
    std::set<MicroOpKind> secret_sources;
    std::set<CovertChannel> channels;

    bool has(DelayMechanism m) const { return delay_mechanisms.count(m) > 0; }
    bool has(CovertChannel c) const { return channels.count(c) > 0; }
    bool sources_include(MicroOpKind k) const { return secret_sources.count(k) > 0; }

    std::vector<MicroOpKind> load_sources() const {
        std::vector<MicroOpKind> out;
        for (MicroOpKind k : load_source_kinds())
            if (secret_sources.count(k))
                out.push_back(k);
        return out;
    }
};

/// A micro-architectural operation of one instruction.
struct MicroOp {
    std::uint32_t parent = 0;
    MicroOpKind kind;
    friend constexpr auto operator<=>(const MicroOp&, const MicroOp&) = default;
};

class AttackGraph {
public:
    struct NodeInfo {
        std::optional<std::uint32_t> instruction;  // none for synthetic nodes
        std::optional<MicroOpKind> micro_op;       // none for plain instruction nodes
    };

    Tsg graph;
    std::vector<NodeInfo> info;
    Program program;
    ThreatModel threat_model;

    NodeRole role(NodeId id) const { return graph.role(id); }
    const std::string& label(NodeId id) const { return graph.label(id); }

    std::optional<std::uint32_t> instruction_of(NodeId id) const {
        return info[id.value].instruction;
    }
    std::optional<MicroOpKind> micro_op_of(NodeId id) const { return info[id.value].micro_op; }

    std::vector<NodeId> nodes_of(std::uint32_t instruction) const {
        std::vector<NodeId> out;
        for (std::uint32_t i = 0; i < info.size(); ++i)
            if (info[i].instruction == instruction)
                out.push_back(NodeId{i});
        return out;
    }

    std::optional<NodeId> find_node(std::uint32_t instruction,
                                    std::optional<MicroOpKind> kind) const {
        for (std::uint32_t i = 0; i < info.size(); ++i)
            if (info[i].instruction == instruction && info[i].micro_op == kind)
                return NodeId{i};
        return std::nullopt;
    }

    std::vector<NodeId> nodes_with_role(NodeRole r) const {
        std::vector<NodeId> out;
        for (std::uint32_t i = 0; i < graph.node_count(); ++i)
            if (graph.role(NodeId{i}) == r)
                out.push_back(NodeId{i});
        return out;
    }

    /// Node whose completion makes the instruction's result architecturally
    /// available to consumers.
    std::optional<NodeId> def_anchor(std::uint32_t instruction) const {
        if (auto fwd = find_node(instruction, MicroOpKind::ForwardToRegister))
            return fwd;
        if (auto rsr = find_node(instruction, MicroOpKind::ReadSpecialRegister))
            return rsr;
        if (auto rfp = find_node(instruction, MicroOpKind::ReadFpRegister))
            return rfp;
        return find_node(instruction, std::nullopt);
    }

    bool address_tainted(NodeId id) const {
        auto inst = info[id.value].instruction;
        return inst && addr_tainted_.count(*inst);
    }
    bool value_tainted(NodeId id) const {
        auto inst = info[id.value].instruction;
        return inst && value_tainted_.count(*inst);
    }

    // builder-internal state, exposed for classification and defense passes
    std::set<std::uint32_t> addr_tainted_;   // instructions with a tainted address register
    std::set<std::uint32_t> value_tainted_;  // instructions consuming a tainted value
    std::map<std::uint32_t, std::vector<NodeId>> taint_roots_;  // instr -> secret accesses feeding it
    std::set<std::uint32_t> mistrained_branches_;
};

/// Micro-op decomposition for faulting-access instructions (loads, stores,
/// special/FP register reads). Loads fan out into one read node per
/// compatible secret source in the threat model; the permission check is kept
/// deliberately unordered against those reads.
inline std::vector<MicroOp> decompose_instruction(const Instruction& inst, const ThreatModel& tm) {
    std::vector<MicroOp> out;
    auto push = [&](MicroOpKind k) { out.push_back(MicroOp{inst.index, k}); };
    switch (inst.opcode()) {
    case Opcode::Load:
        push(MicroOpKind::TranslateAddress);
        push(MicroOpKind::PermissionCheck);
        if (tm.has(DelayMechanism::StoreLoadDisambiguation))
            push(MicroOpKind::AddressDisambiguate);
        if (tm.has(DelayMechanism::TsxAbort))
            push(MicroOpKind::TsxAbortResolve);
        for (MicroOpKind k : tm.load_sources())
            push(k);
        push(MicroOpKind::ForwardToRegister);
        push(MicroOpKind::CacheFill);
        return out;
    case Opcode::Store:
        push(MicroOpKind::TranslateAddress);
        push(MicroOpKind::PermissionCheck);
        return out;
    case Opcode::ReadSysreg:
        push(MicroOpKind::PermissionCheck);
        push(MicroOpKind::ReadSpecialRegister);
        return out;
    case Opcode::ReadFpreg:
        push(MicroOpKind::PermissionCheck);
        push(MicroOpKind::ReadFpRegister);
        return out;
    default:
        throw UnsupportedOpcodeError("instruction " + std::to_string(inst.index) +
                                     " has no micro-op decomposition");
    }
}

namespace detail {

inline bool region_privileged(const RegionDecl& r) { return r.domain != RegionDomain::User; }

struct Builder {
    const Program& prog;
    const ThreatModel& tm;
    AttackGraph ag;

    // per-instruction node handles
    struct InstNodes {
        std::optional<NodeId> main;  // simple node, or the store's write node
        std::optional<NodeId> translate, check, disambiguate, tsx;
        std::vector<NodeId> reads;   // secret-source micro reads
        std::optional<NodeId> forward, fill;
        std::optional<NodeId> resolve;  // branch resolution
        bool decomposed = false;
    };
    std::vector<InstNodes> inst_nodes;

    explicit Builder(const Program& p, const ThreatModel& t) : prog(p), tm(t) {
        ag.program = p;
        ag.threat_model = t;
    }

    bool region_faulting(const std::string& name, bool is_store) const {
        const RegionDecl* r = prog.region(name);
        if (!r)
            return false;
        if (prog.is_secret(name) || region_privileged(*r))
            return true;
        return is_store && r->read_only;
    }

    std::optional<std::uint32_t> aliasing_store_before(const Instruction& load) const {
        const MemRef& ref = *load.mem();
        for (std::uint32_t j = load.index; j-- > 0;) {
            const auto* store = std::get_if<StoreInst>(&prog.instructions[j].op);
            if (store && store->addr == ref)
                return j;
        }
        return std::nullopt;
    }

    /// Which authorization micro-op, if any, covers this load's decomposition.
    std::optional<MicroOpKind> load_trigger(const Instruction& inst) const {
        if (tm.has(DelayMechanism::DelayedException) && region_faulting(inst.mem()->region, false))
            return MicroOpKind::PermissionCheck;
        if (tm.has(DelayMechanism::StoreLoadDisambiguation) && aliasing_store_before(inst))
            return MicroOpKind::AddressDisambiguate;
        if (tm.has(DelayMechanism::TsxAbort) && prog.is_secret(inst.mem()->region))
            return MicroOpKind::TsxAbortResolve;
        return std::nullopt;
    }

    std::string summary(const Instruction& inst) const { return to_text(inst); }

    NodeId add(std::uint32_t instr, std::optional<MicroOpKind> kind, std::string label) {
        NodeId id = ag.graph.add_node(std::move(label));
        ag.info.push_back(AttackGraph::NodeInfo{instr, kind});
        return id;
    }

    void make_nodes() {
        inst_nodes.resize(prog.instructions.size());
        for (const Instruction& inst : prog.instructions) {
            InstNodes& n = inst_nodes[inst.index];
            std::string at = " @" + std::to_string(inst.index);
            switch (inst.opcode()) {
            case Opcode::BranchCond:
                n.resolve = add(inst.index, MicroOpKind::BranchResolve, "branch resolution" + at);
                break;
            case Opcode::BranchInd:
                n.resolve =
                    add(inst.index, MicroOpKind::BranchResolve, "indirect target resolution" + at);
                break;
            case Opcode::Ret:
                n.resolve =
                    add(inst.index, MicroOpKind::BranchResolve, "return target resolution" + at);
                break;
            case Opcode::Load: {
                auto trigger = load_trigger(inst);
                auto sources = tm.load_sources();
                if (trigger && !sources.empty()) {
                    n.decomposed = true;
                    n.translate =
                        add(inst.index, MicroOpKind::TranslateAddress, "translate address" + at);
                    if (*trigger == MicroOpKind::PermissionCheck)
                        n.check =
                            add(inst.index, MicroOpKind::PermissionCheck, "permission check" + at);
                    else if (*trigger == MicroOpKind::AddressDisambiguate)
                        n.disambiguate = add(inst.index, MicroOpKind::AddressDisambiguate,
                                             "address disambiguation" + at);
                    else
                        n.tsx = add(inst.index, MicroOpKind::TsxAbortResolve,
                                    "tsx abort resolution" + at);
                    for (MicroOpKind k : sources)
                        n.reads.push_back(add(inst.index, k,
                                              std::string(to_string(k)) + " " +
                                                  inst.mem()->region + at));
                    n.forward = add(inst.index, MicroOpKind::ForwardToRegister,
                                    "forward to " + inst.dest()->name() + at);
                    n.fill = add(inst.index, MicroOpKind::CacheFill,
                                 "cache fill " + inst.mem()->region + at);
                } else {
                    n.main = add(inst.index, std::nullopt, summary(inst) + at);
                }
                break;
            }
            case Opcode::Store: {
                bool decompose = tm.has(DelayMechanism::DelayedException) &&
                                 region_faulting(inst.mem()->region, true);
                if (decompose) {
                    n.decomposed = true;
                    n.translate =
                        add(inst.index, MicroOpKind::TranslateAddress, "translate address" + at);
                    n.check =
                        add(inst.index, MicroOpKind::PermissionCheck, "permission check" + at);
                }
                n.main = add(inst.index, std::nullopt, summary(inst) + at);
                break;
            }
            case Opcode::ReadSysreg:
                if (tm.has(DelayMechanism::DelayedException)) {
                    n.decomposed = true;
                    n.check =
                        add(inst.index, MicroOpKind::PermissionCheck, "privilege check" + at);
                    n.reads.push_back(add(inst.index, MicroOpKind::ReadSpecialRegister,
                                          "read special register " +
                                              std::get<ReadSysregInst>(inst.op).sysreg + at));
                } else {
                    n.main = add(inst.index, std::nullopt, summary(inst) + at);
                }
                break;
            case Opcode::ReadFpreg:
                if (tm.has(DelayMechanism::LazyFpuSwitch)) {
                    n.decomposed = true;
                    n.check = add(inst.index, MicroOpKind::PermissionCheck,
                                  "fpu owner check" + at);
                    n.reads.push_back(add(inst.index, MicroOpKind::ReadFpRegister,
                                          "read fp register " +
                                              std::get<ReadFpregInst>(inst.op).fp_source.name() +
                                              at));
                } else {
                    n.main = add(inst.index, std::nullopt, summary(inst) + at);
                }
                break;
            default:
                n.main = add(inst.index, std::nullopt, summary(inst) + at);
                break;
            }
        }
    }

    void edge(NodeId a, NodeId b, EdgeKind k) { ag.graph.add_edge(a, b, k); }

    NodeId addr_anchor(std::uint32_t i) const {
        const InstNodes& n = inst_nodes[i];
        return n.translate ? *n.translate : *n.main;
    }

    std::optional<NodeId> def_node(std::uint32_t i) const {
        const InstNodes& n = inst_nodes[i];
        if (n.forward)
            return n.forward;
        if (!n.reads.empty() && !n.forward)  // sysreg/fpreg read is the value source
            return n.reads.front();
        return n.main;
    }

    void micro_op_edges() {
        for (const Instruction& inst : prog.instructions) {
            const InstNodes& n = inst_nodes[inst.index];
            if (!n.decomposed)
                continue;
            if (inst.opcode() == Opcode::Load) {
                // Address translation feeds every read and the non-delayed
                // checks; the delayed authorization gets no outgoing edge.
                if (n.check)
                    edge(*n.translate, *n.check, EdgeKind::MicroOpOrder);
                if (n.disambiguate)
                    edge(*n.translate, *n.disambiguate, EdgeKind::MicroOpOrder);
                for (NodeId r : n.reads) {
                    edge(*n.translate, r, EdgeKind::MicroOpOrder);
                    edge(r, *n.forward, EdgeKind::MicroOpOrder);
                    edge(r, *n.fill, EdgeKind::MicroOpOrder);
                }
            } else if (inst.opcode() == Opcode::Store) {
                edge(*n.translate, *n.check, EdgeKind::MicroOpOrder);
                edge(*n.translate, *n.main, EdgeKind::MicroOpOrder);
            }
            // sysreg/fpreg: the check and the read intentionally stay unordered
        }
    }

    void data_edges() {
        struct Def {
            NodeId node;
            bool tainted = false;
            std::vector<NodeId> roots;
        };
        std::map<std::string, Def> last_def;

        for (const Instruction& inst : prog.instructions) {
            const InstNodes& n = inst_nodes[inst.index];

            bool value_taint = false;
            std::vector<NodeId> roots;
            auto use = [&](const Register& reg, NodeId anchor, EdgeKind kind, bool is_value) {
                auto it = last_def.find(reg.name());
                if (it == last_def.end())
                    return;
                edge(it->second.node, anchor, kind);
                if (!it->second.tainted)
                    return;
                if (is_value) {
                    value_taint = true;
                    roots.insert(roots.end(), it->second.roots.begin(), it->second.roots.end());
                } else {
                    ag.addr_tainted_.insert(inst.index);
                    ag.taint_roots_[inst.index].insert(ag.taint_roots_[inst.index].end(),
                                                       it->second.roots.begin(),
                                                       it->second.roots.end());
                }
            };

            std::visit(
                [&](const auto& i) {
                    using T = std::decay_t<decltype(i)>;
                    if constexpr (std::is_same_v<T, LoadInst>) {
                        if (i.addr.offset_is_register())
                            use(std::get<Register>(i.addr.offset), addr_anchor(inst.index),
                                EdgeKind::AddressDep, false);
                    } else if constexpr (std::is_same_v<T, StoreInst>) {
                        if (i.addr.offset_is_register())
                            use(std::get<Register>(i.addr.offset), addr_anchor(inst.index),
                                EdgeKind::AddressDep, false);
                        use(i.value, *n.main, EdgeKind::DataDep, true);
                    } else if constexpr (std::is_same_v<T, ArithInst>) {
                        for (const Operand& src : i.sources)
                            if (auto* reg = std::get_if<Register>(&src))
                                use(*reg, *n.main, EdgeKind::DataDep, true);
                    } else if constexpr (std::is_same_v<T, BranchCondInst>) {
                        use(i.cond, *n.resolve, EdgeKind::DataDep, true);
                    } else if constexpr (std::is_same_v<T, BranchIndInst>) {
                        use(i.target, *n.resolve, EdgeKind::DataDep, true);
                    } else if constexpr (std::is_same_v<T, ClflushInst> ||
                                         std::is_same_v<T, MeasureInst>) {
                        if (i.addr.offset_is_register())
                            use(std::get<Register>(i.addr.offset), *n.main, EdgeKind::AddressDep,
                                false);
                    }
                },
                inst.op);

            if (value_taint)
                ag.value_tainted_.insert(inst.index);

            // secret sources make this instruction's result tainted
            bool secret_source = false;
            if (inst.opcode() == Opcode::Load) {
                if (n.decomposed || region_faulting(inst.mem()->region, false))
                    secret_source = true;
            } else if (inst.opcode() == Opcode::ReadSysreg) {
                secret_source = tm.sources_include(MicroOpKind::ReadSpecialRegister);
            } else if (inst.opcode() == Opcode::ReadFpreg) {
                secret_source = tm.sources_include(MicroOpKind::ReadFpRegister);
            }

            if (auto dest = inst.dest()) {
                Def def;
                def.node = *def_node(inst.index);
                def.tainted = secret_source || value_taint;
                if (secret_source) {
                    if (!n.reads.empty())
                        def.roots = n.reads;
                    else
                        def.roots.push_back(*n.main);
                } else if (value_taint) {
                    def.roots = roots;
                }
                if (def.tainted) {
                    auto& tr = ag.taint_roots_[inst.index];
                    tr.insert(tr.end(), def.roots.begin(), def.roots.end());
                }
                last_def[dest->name()] = std::move(def);
            } else if (value_taint) {
                auto& tr = ag.taint_roots_[inst.index];
                tr.insert(tr.end(), roots.begin(), roots.end());
            }
        }
    }

    void store_forward_edges() {
        for (const Instruction& inst : prog.instructions) {
            if (inst.opcode() != Opcode::Load)
                continue;
            auto store_idx = aliasing_store_before(inst);
            if (!store_idx)
                continue;
            const InstNodes& load = inst_nodes[inst.index];
            if (load.disambiguate)
                continue;  // disambiguation is delayed: the ordering is the race
            edge(*inst_nodes[*store_idx].main, addr_anchor(inst.index), EdgeKind::AddressDep);
        }
    }

    void fence_edges() {
        for (const Instruction& inst : prog.instructions) {
            if (inst.opcode() != Opcode::Fence)
                continue;
            NodeId fence = *inst_nodes[inst.index].main;
            for (std::uint32_t i = 0; i < ag.info.size(); ++i) {
                auto owner = ag.info[i].instruction;
                if (!owner || *owner == inst.index)
                    continue;
                if (*owner < inst.index)
                    edge(NodeId{i}, fence, EdgeKind::FenceOrder);
                else
                    edge(fence, NodeId{i}, EdgeKind::FenceOrder);
            }
        }
    }

    /// Cacheline state of a shared region behaves like data: flushes enable
    /// later fills, and the receiver's measurement reads what fills wrote.
    void channel_edges() {
        std::set<std::string> shared;
        for (const auto& a : prog.annotations)
            if (a.kind == AnnotationKind::SharedRegion)
                shared.insert(a.target);
        for (const std::string& region : shared) {
            std::vector<std::pair<std::uint32_t, NodeId>> flushes, writers, measures;
            for (const Instruction& inst : prog.instructions) {
                const MemRef* ref = inst.mem();
                if (!ref || ref->region != region)
                    continue;
                const InstNodes& n = inst_nodes[inst.index];
                switch (inst.opcode()) {
                case Opcode::Clflush:
                    flushes.emplace_back(inst.index, *n.main);
                    break;
                case Opcode::Load:
                    writers.emplace_back(inst.index, n.fill ? *n.fill : *n.main);
                    break;
                case Opcode::Store:
                    writers.emplace_back(inst.index, *n.main);
                    break;
                case Opcode::Measure:
                    measures.emplace_back(inst.index, *n.main);
                    break;
                default:
                    break;
                }
            }
            for (const auto& [fi, fn] : flushes)
                for (const auto& [wi, wn] : writers)
                    if (fi < wi)
                        edge(fn, wn, EdgeKind::DataDep);
            for (const auto& [mi, mn] : measures) {
                for (const auto& [wi, wn] : writers)
                    if (wi < mi)
                        edge(wn, mn, EdgeKind::DataDep);
                for (const auto& [fi, fn] : flushes)
                    if (fi < mi)
                        edge(fn, mn, EdgeKind::DataDep);
            }
        }
    }

    void mistrain_nodes() {
        for (const auto& a : prog.annotations) {
            if (a.kind != AnnotationKind::MistrainedPredictor)
                continue;
            std::vector<std::uint32_t> branches;
            if (a.resolved) {
                branches.push_back(*a.resolved);
            } else {
                for (const Instruction& inst : prog.instructions) {
                    Opcode oc = inst.opcode();
                    if ((a.target == "btb" && oc == Opcode::BranchInd) ||
                        (a.target == "rsb" && oc == Opcode::Ret) ||
                        (a.target == "cond" && oc == Opcode::BranchCond))
                        branches.push_back(inst.index);
                }
            }
            for (std::uint32_t b : branches) {
                if (!inst_nodes[b].resolve)
                    continue;  // mistrain aimed at a non-branch; validate warns
                NodeId node = ag.graph.add_node("mistrain @" + std::to_string(b));
                ag.info.push_back(AttackGraph::NodeInfo{std::nullopt, std::nullopt});
                edge(node, *inst_nodes[b].resolve, EdgeKind::DataDep);
                ag.mistrained_branches_.insert(b);
            }
        }
    }

    static std::optional<DelayMechanism> branch_mechanism(Opcode oc) {
        switch (oc) {
        case Opcode::BranchCond: return DelayMechanism::BranchPrediction;
        case Opcode::BranchInd: return DelayMechanism::IndirectTargetPrediction;
        case Opcode::Ret: return DelayMechanism::ReturnPrediction;
        default: return std::nullopt;
        }
    }

    void control_edges() {
        for (const Instruction& inst : prog.instructions) {
            auto mech = branch_mechanism(inst.opcode());
            if (!mech)
                continue;
            if (tm.has(*mech))
                continue;  // speculation window open: the missing edges ARE the finding
            NodeId resolve = *inst_nodes[inst.index].resolve;
            for (std::uint32_t i = 0; i < ag.info.size(); ++i) {
                auto owner = ag.info[i].instruction;
                if (owner && *owner > inst.index)
                    edge(resolve, NodeId{i}, EdgeKind::ControlCommit);
            }
        }
    }

    void reject_loops() const {
        for (const Instruction& inst : prog.instructions) {
            const auto* branch = std::get_if<BranchCondInst>(&inst.op);
            if (!branch)
                continue;
            std::uint32_t target = prog.labels.at(branch->target);
            if (target <= inst.index)
                throw BuildError("backward branch at instruction " + std::to_string(inst.index) +
                                 " (loops are not supported)");
        }
    }

    AttackGraph build() {
        reject_loops();
        make_nodes();
        micro_op_edges();
        data_edges();
        store_forward_edges();
        fence_edges();
        channel_edges();
        mistrain_nodes();
        control_edges();
        return std::move(ag);
    }
};

}  // namespace detail

/// Fills role labels for every node: authorization checks, secret accesses,
/// uses of tainted values, channel-state sends, receives, and setup.
/// Deterministic; re-running on the same graph yields identical roles.
inline void classify_roles(AttackGraph& ag) {
    const Program& prog = ag.program;
    auto authz_marked = prog.marked(AnnotationKind::AuthorizationMarker);

    for (std::uint32_t idx = 0; idx < ag.graph.node_count(); ++idx) {
        NodeId id{idx};
        const auto& info = ag.info[idx];
        NodeRole role = NodeRole::Plain;

        auto micro = info.micro_op;
        const Instruction* inst =
            info.instruction ? &prog.instructions[*info.instruction] : nullptr;
        const MemRef* mem = inst ? inst->mem() : nullptr;
        const RegionDecl* region = mem ? prog.region(mem->region) : nullptr;
        bool region_secret =
            region && (prog.is_secret(region->name) || region->domain != RegionDomain::User);
        bool region_shared = region && prog.is_shared(region->name);

        if (micro == MicroOpKind::BranchResolve || micro == MicroOpKind::PermissionCheck ||
            micro == MicroOpKind::AddressDisambiguate || micro == MicroOpKind::TsxAbortResolve) {
            role = NodeRole::Authorization;
        } else if (!micro && inst &&
                   std::find(authz_marked.begin(), authz_marked.end(), inst->index) !=
                       authz_marked.end()) {
            role = NodeRole::Authorization;
        } else if (micro && load_source_kinds().count(*micro)) {
            role = NodeRole::SecretAccess;
        } else if (micro == MicroOpKind::ReadSpecialRegister &&
                   ag.threat_model.sources_include(MicroOpKind::ReadSpecialRegister)) {
            role = NodeRole::SecretAccess;
        } else if (micro == MicroOpKind::ReadFpRegister &&
                   ag.threat_model.sources_include(MicroOpKind::ReadFpRegister)) {
            role = NodeRole::SecretAccess;
        } else if (!micro && inst && inst->opcode() == Opcode::Load && region_secret) {
            role = NodeRole::SecretAccess;
        } else if (inst && inst->opcode() == Opcode::Store && (!micro) &&
                   (region_secret || (region && region->read_only))) {
            role = NodeRole::SecretAccess;  // illegal write target
        } else if (region_shared && ag.address_tainted(id) &&
                   ((micro == MicroOpKind::CacheFill) ||
                    (!micro && inst &&
                     (inst->opcode() == Opcode::Load || inst->opcode() == Opcode::Store)))) {
            role = NodeRole::Send;
        } else if (!micro && inst && ag.value_tainted(id) &&
                   (inst->opcode() == Opcode::Arith || inst->opcode() == Opcode::Store)) {
            role = NodeRole::Use;
        } else if (!micro && inst && inst->opcode() == Opcode::Load && ag.address_tainted(id) &&
                   !region_shared) {
            role = NodeRole::Use;  // secret-indexed access outside the channel
        } else if (!micro && inst && inst->opcode() == Opcode::Measure && region_shared) {
            role = NodeRole::Receive;
        } else if (!micro && inst && inst->opcode() == Opcode::Clflush) {
            role = NodeRole::Setup;
        } else if (!info.instruction) {
            role = NodeRole::Setup;  // synthetic mistrain / flush-predictor nodes
        }

        ag.graph.set_role(id, role);
    }
}

/// Builds the attack graph for a program under a threat model: nodes,
/// dependency edges, deliberate speculation gaps, and role labels.
inline AttackGraph build_attack_graph(const Program& prog, const ThreatModel& tm) {
    if (tm.delay_mechanisms.empty())
        throw BuildError("threat model needs at least one delay mechanism");
    if (tm.channels.empty())
        throw BuildError("threat model needs at least one covert channel");
    detail::Builder builder(prog, tm);
    AttackGraph ag = builder.build();
    classify_roles(ag);
    return ag;
}

}  // namespace specdep
