#pragma once

// SpecIR: a small textual instruction set for speculative-execution gadgets.
// Programs are straight-line instruction sequences over symbolic memory
// regions (region + offset), with annotations marking secrets, shared
// channel regions, mistrained predictors and authorization points.
//
// Grammar (one statement per line, comments start with ';' or '#'):
//   .region NAME [SIZE] [user|kernel|enclave|vmm] [readonly]
//   .secret NAME          .shared NAME
//   .mistrain LABEL|INDEX|btb|rsb|cond
//   .authz LABEL|INDEX    .delayed LABEL|INDEX
//   LABEL:
//   rD = load [REGION + OFF]        store [REGION + OFF], rS
//   rD = OP SRC[, SRC]              (OP: mov add sub mul shl shr and or xor)
//   branch_cond rC, LABEL           branch_ind rT        ret
//   clflush [REGION + OFF]          fence
//   rD = read_sysreg NAME           rD = read_fpreg fN
//   measure [REGION + OFF]

#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "specdep/tsg.hpp"

namespace specdep {

struct ParseError : Error {
    int line;
    ParseError(int line_, const std::string& message)
        : Error("line " + std::to_string(line_) + ": " + message), line(line_) {}
};

enum class RegClass : std::uint8_t { General, Fp };

/// General registers r0..r31, floating-point registers f0..f15.
struct Register {
    RegClass cls = RegClass::General;
    std::uint8_t index = 0;

    std::string name() const {
        return (cls == RegClass::General ? "r" : "f") + std::to_string(index);
    }
    friend constexpr auto operator<=>(const Register&, const Register&) = default;
};

/// Symbolic address: a declared region plus an immediate or register offset.
struct MemRef {
    std::string region;
    std::variant<std::int64_t, Register> offset = std::int64_t{0};

    bool offset_is_register() const { return std::holds_alternative<Register>(offset); }
    friend bool operator==(const MemRef&, const MemRef&) = default;
};

enum class Opcode : std::uint8_t {
    Load,
    Store,
    Arith,
    BranchCond,
    BranchInd,
    Ret,
    Clflush,
    Fence,
    ReadSysreg,
    ReadFpreg,
    Measure,
};

enum class ArithOp : std::uint8_t { Mov, Add, Sub, Mul, Shl, Shr, And, Or, Xor };

using Operand = std::variant<Register, std::int64_t>;

struct LoadInst {
    Register dest;
    MemRef addr;
    friend bool operator==(const LoadInst&, const LoadInst&) = default;
};
struct StoreInst {
    MemRef addr;
    Register value;
    friend bool operator==(const StoreInst&, const StoreInst&) = default;
};
struct ArithInst {
    Register dest;
    ArithOp op;
    std::vector<Operand> sources;
    friend bool operator==(const ArithInst&, const ArithInst&) = default;
};
struct BranchCondInst {
    Register cond;
    std::string target;
    friend bool operator==(const BranchCondInst&, const BranchCondInst&) = default;
};
struct BranchIndInst {
    Register target;
    friend bool operator==(const BranchIndInst&, const BranchIndInst&) = default;
};
struct RetInst {
    friend bool operator==(const RetInst&, const RetInst&) = default;
};
struct ClflushInst {
    MemRef addr;
    friend bool operator==(const ClflushInst&, const ClflushInst&) = default;
};
struct FenceInst {
    friend bool operator==(const FenceInst&, const FenceInst&) = default;
};
struct ReadSysregInst {
    Register dest;
    std::string sysreg;
    friend bool operator==(const ReadSysregInst&, const ReadSysregInst&) = default;
};
struct ReadFpregInst {
    Register dest;
    Register fp_source;
    friend bool operator==(const ReadFpregInst&, const ReadFpregInst&) = default;
};
struct MeasureInst {
    MemRef addr;
    friend bool operator==(const MeasureInst&, const MeasureInst&) = default;
};

using InstructionOp = std::variant<LoadInst, StoreInst, ArithInst, BranchCondInst, BranchIndInst,
                                   RetInst, ClflushInst, FenceInst, ReadSysregInst, ReadFpregInst,
                                   MeasureInst>;

namespace detail {
template <Opcode O, typename T>
inline constexpr bool opcode_slot =
    std::is_same_v<std::variant_alternative_t<static_cast<std::size_t>(O), InstructionOp>, T>;
static_assert(opcode_slot<Opcode::Load, LoadInst> && opcode_slot<Opcode::Store, StoreInst> &&
              opcode_slot<Opcode::Arith, ArithInst> &&
              opcode_slot<Opcode::BranchCond, BranchCondInst> &&
              opcode_slot<Opcode::BranchInd, BranchIndInst> &&
              opcode_slot<Opcode::Ret, RetInst> && opcode_slot<Opcode::Clflush, ClflushInst> &&
              opcode_slot<Opcode::Fence, FenceInst> &&
              opcode_slot<Opcode::ReadSysreg, ReadSysregInst> &&
              opcode_slot<Opcode::ReadFpreg, ReadFpregInst> &&
              opcode_slot<Opcode::Measure, MeasureInst>);
}  // namespace detail

struct Instruction {
    std::uint32_t index = 0;
    int source_line = 0;
    InstructionOp op;

    Opcode opcode() const { return static_cast<Opcode>(op.index()); }

    const MemRef* mem() const {
        return std::visit(
            [](const auto& inst) -> const MemRef* {
                using T = std::decay_t<decltype(inst)>;
                if constexpr (std::is_same_v<T, LoadInst> || std::is_same_v<T, StoreInst> ||
                              std::is_same_v<T, ClflushInst> || std::is_same_v<T, MeasureInst>)
                    return &inst.addr;
                else
                    return nullptr;
            },
            op);
    }

    std::optional<Register> dest() const {
        return std::visit(
            [](const auto& inst) -> std::optional<Register> {
                using T = std::decay_t<decltype(inst)>;
                if constexpr (std::is_same_v<T, LoadInst> || std::is_same_v<T, ArithInst> ||
                              std::is_same_v<T, ReadSysregInst> || std::is_same_v<T, ReadFpregInst>)
                    return inst.dest;
                else
                    return std::nullopt;
            },
            op);
    }

    friend bool operator==(const Instruction& a, const Instruction& b) {
        return a.index == b.index && a.op == b.op;  // source lines are not structure
    }
};

enum class RegionDomain : std::uint8_t { User, Kernel, Enclave, Vmm };

struct RegionDecl {
    std::string name;
    std::uint64_t size = 0;
    RegionDomain domain = RegionDomain::User;
    bool read_only = false;
    friend bool operator==(const RegionDecl&, const RegionDecl&) = default;
};

enum class AnnotationKind : std::uint8_t {
    SecretRegion,
    SharedRegion,
    MistrainedPredictor,
    AuthorizationMarker,
    DelayedOperand,
};

struct Annotation {
    AnnotationKind kind;
    std::string target;                         // region, label, index or predictor kind
    std::optional<std::uint32_t> resolved;      // instruction index when target names one
    int source_line = 0;

    friend bool operator==(const Annotation& a, const Annotation& b) {
        return a.kind == b.kind && a.target == b.target && a.resolved == b.resolved;
    }
};

struct Program {
    std::vector<Instruction> instructions;
    std::vector<RegionDecl> regions;
    std::vector<Annotation> annotations;
    std::map<std::string, std::uint32_t> labels;

    const RegionDecl* region(std::string_view name) const {
        for (const auto& r : regions)
            if (r.name == name)
                return &r;
        return nullptr;
    }

    bool has_annotation(AnnotationKind kind, std::string_view target) const {
        for (const auto& a : annotations)
            if (a.kind == kind && a.target == target)
                return true;
        return false;
    }

    bool is_secret(std::string_view region_name) const {
        return has_annotation(AnnotationKind::SecretRegion, region_name);
    }
    bool is_shared(std::string_view region_name) const {
        return has_annotation(AnnotationKind::SharedRegion, region_name);
    }

    std::vector<std::uint32_t> marked(AnnotationKind kind) const {
        std::vector<std::uint32_t> out;
        for (const auto& a : annotations)
            if (a.kind == kind && a.resolved)
                out.push_back(*a.resolved);
        return out;
    }

    friend bool operator==(const Program& a, const Program& b) {
        return a.instructions == b.instructions && a.regions == b.regions &&
               a.annotations == b.annotations && a.labels == b.labels;
    }
};

inline const char* to_string(ArithOp op) {
    switch (op) {
    case ArithOp::Mov: return "mov";
    case ArithOp::Add: return "add";
    case ArithOp::Sub: return "sub";
    case ArithOp::Mul: return "mul";
    case ArithOp::Shl: return "shl";
    case ArithOp::Shr: return "shr";
    case ArithOp::And: return "and";
    case ArithOp::Or: return "or";
    case ArithOp::Xor: return "xor";
    }
    return "?";
}

inline const char* to_string(RegionDomain d) {
    switch (d) {
    case RegionDomain::User: return "user";
    case RegionDomain::Kernel: return "kernel";
    case RegionDomain::Enclave: return "enclave";
    case RegionDomain::Vmm: return "vmm";
    }
    return "?";
}

namespace detail {

struct Token {
    std::string text;
};

inline std::vector<std::string> tokenize(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    };
    for (char c : line) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else if (c == '[' || c == ']' || c == '+' || c == ',' || c == '=') {
            flush();
            out.push_back(std::string(1, c));
        } else {
            cur.push_back(c);
        }
    }
    flush();
    return out;
}

class LineParser {
public:
    LineParser(std::vector<std::string> tokens, int line)
        : tokens_(std::move(tokens)), line_(line) {}

    bool done() const { return pos_ >= tokens_.size(); }
    const std::string& peek() const {
        static const std::string empty;
        return done() ? empty : tokens_[pos_];
    }
    std::string next(const char* what) {
        if (done())
            throw ParseError(line_, std::string("expected ") + what);
        return tokens_[pos_++];
    }
    void expect(std::string_view text) {
        std::string tok = next(std::string("'" + std::string(text) + "'").c_str());
        if (tok != text)
            throw ParseError(line_, "expected '" + std::string(text) + "', got '" + tok + "'");
    }
    void expect_end() {
        if (!done())
            throw ParseError(line_, "unexpected trailing token '" + peek() + "'");
    }
    int line() const { return line_; }

private:
    std::vector<std::string> tokens_;
    std::size_t pos_ = 0;
    int line_;
};

inline bool is_integer(std::string_view s) {
    if (!s.empty() && (s[0] == '-' || s[0] == '+'))
        s.remove_prefix(1);
    if (s.empty())
        return false;
    if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
        for (char c : s.substr(2))
            if (!std::isxdigit(static_cast<unsigned char>(c)))
                return false;
        return true;
    }
    for (char c : s)
        if (!std::isdigit(static_cast<unsigned char>(c)))
            return false;
    return true;
}

inline std::int64_t parse_integer(const std::string& s, int line) {
    try {
        return std::stoll(s, nullptr, 0);
    } catch (const std::exception&) {
        throw ParseError(line, "bad integer '" + s + "'");
    }
}

inline std::optional<Register> try_register(std::string_view tok) {
    if (tok.size() < 2 || (tok[0] != 'r' && tok[0] != 'f'))
        return std::nullopt;
    std::uint32_t idx = 0;
    for (char c : tok.substr(1)) {
        if (!std::isdigit(static_cast<unsigned char>(c)))
            return std::nullopt;
        idx = idx * 10 + static_cast<std::uint32_t>(c - '0');
        if (idx > 255)
            return std::nullopt;
    }
    RegClass cls = tok[0] == 'r' ? RegClass::General : RegClass::Fp;
    std::uint32_t limit = cls == RegClass::General ? 31 : 15;
    if (idx > limit)
        return std::nullopt;
    return Register{cls, static_cast<std::uint8_t>(idx)};
}

inline Register parse_register(LineParser& p, RegClass want) {
    std::string tok = p.next("register");
    auto reg = try_register(tok);
    if (!reg)
        throw ParseError(p.line(), "bad register '" + tok + "'");
    if (reg->cls != want)
        throw ParseError(p.line(), std::string("expected ") +
                                       (want == RegClass::General ? "general" : "floating-point") +
                                       " register, got '" + tok + "'");
    return *reg;
}

}  // namespace detail

/// Parses SpecIR text. Throws ParseError (with line number) on the first
/// malformed statement; never returns a program violating the model
/// invariants (dense indices, resolved labels, declared regions).
inline Program parse_program(std::string_view text) {
    using namespace detail;
    Program prog;
    struct PendingBranch {
        std::uint32_t instruction;
        std::string label;
        int line;
    };
    struct PendingAnnotation {
        std::size_t annotation;
        int line;
    };
    std::vector<PendingBranch> pending_branches;
    std::vector<PendingAnnotation> pending_targets;

    auto require_region = [&](const std::string& name, int line) {
        if (!prog.region(name))
            throw ParseError(line, "undeclared region " + name);
    };

    auto parse_memref = [&](LineParser& p) {
        p.expect("[");
        std::string region = p.next("region name");
        require_region(region, p.line());
        MemRef ref;
        ref.region = region;
        if (p.peek() == "+") {
            p.expect("+");
            std::string off = p.next("offset");
            if (auto reg = try_register(off)) {
                if (reg->cls != RegClass::General)
                    throw ParseError(p.line(), "offset register must be general, got '" + off + "'");
                ref.offset = *reg;
            } else if (is_integer(off)) {
                ref.offset = parse_integer(off, p.line());
            } else {
                throw ParseError(p.line(), "bad offset '" + off + "'");
            }
        }
        p.expect("]");
        return ref;
    };

    int line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        std::string_view raw =
            text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
        start = end == std::string_view::npos ? text.size() + 1 : end + 1;
        ++line_no;

        std::string_view line = raw;
        if (auto comment = line.find_first_of(";#"); comment != std::string_view::npos)
            line = line.substr(0, comment);
        auto tokens = tokenize(line);
        if (tokens.empty())
            continue;

        // Labels may prefix an instruction on the same line.
        while (!tokens.empty() && tokens.front().size() > 1 && tokens.front().back() == ':') {
            std::string label = tokens.front().substr(0, tokens.front().size() - 1);
            if (prog.labels.count(label))
                throw ParseError(line_no, "duplicate label " + label);
            prog.labels[label] = static_cast<std::uint32_t>(prog.instructions.size());
            tokens.erase(tokens.begin());
        }
        if (tokens.empty())
            continue;

        LineParser p(std::move(tokens), line_no);
        std::string head = p.next("statement");

        if (head[0] == '.') {
            if (head == ".region") {
                RegionDecl decl;
                decl.name = p.next("region name");
                if (prog.region(decl.name))
                    throw ParseError(line_no, "duplicate region " + decl.name);
                while (!p.done()) {
                    std::string attr = p.next("region attribute");
                    if (is_integer(attr))
                        decl.size = static_cast<std::uint64_t>(parse_integer(attr, line_no));
                    else if (attr == "user")
                        decl.domain = RegionDomain::User;
                    else if (attr == "kernel")
                        decl.domain = RegionDomain::Kernel;
                    else if (attr == "enclave")
                        decl.domain = RegionDomain::Enclave;
                    else if (attr == "vmm")
                        decl.domain = RegionDomain::Vmm;
                    else if (attr == "readonly")
                        decl.read_only = true;
                    else
                        throw ParseError(line_no, "unknown region attribute '" + attr + "'");
                }
                prog.regions.push_back(std::move(decl));
            } else if (head == ".secret" || head == ".shared") {
                std::string name = p.next("region name");
                require_region(name, line_no);
                p.expect_end();
                prog.annotations.push_back(
                    Annotation{head == ".secret" ? AnnotationKind::SecretRegion
                                                 : AnnotationKind::SharedRegion,
                               name, std::nullopt, line_no});
            } else if (head == ".mistrain" || head == ".authz" || head == ".delayed") {
                std::string target = p.next("target");
                p.expect_end();
                AnnotationKind kind = head == ".mistrain" ? AnnotationKind::MistrainedPredictor
                                      : head == ".authz"  ? AnnotationKind::AuthorizationMarker
                                                          : AnnotationKind::DelayedOperand;
                prog.annotations.push_back(Annotation{kind, target, std::nullopt, line_no});
                pending_targets.push_back({prog.annotations.size() - 1, line_no});
            } else {
                throw ParseError(line_no, "unknown directive " + head);
            }
            continue;
        }

        Instruction inst;
        inst.index = static_cast<std::uint32_t>(prog.instructions.size());
        inst.source_line = line_no;

        auto arith_op = [](const std::string& s) -> std::optional<ArithOp> {
            if (s == "mov") return ArithOp::Mov;
            if (s == "add") return ArithOp::Add;
            if (s == "sub") return ArithOp::Sub;
            if (s == "mul") return ArithOp::Mul;
            if (s == "shl") return ArithOp::Shl;
            if (s == "shr") return ArithOp::Shr;
            if (s == "and") return ArithOp::And;
            if (s == "or") return ArithOp::Or;
            if (s == "xor") return ArithOp::Xor;
            return std::nullopt;
        };

        if (auto destreg = try_register(head); destreg && p.peek() == "=") {
            if (destreg->cls != RegClass::General)
                throw ParseError(line_no, "destination must be a general register");
            p.expect("=");
            std::string op = p.next("opcode");
            if (op == "load") {
                inst.op = LoadInst{*destreg, parse_memref(p)};
            } else if (op == "read_sysreg") {
                inst.op = ReadSysregInst{*destreg, p.next("system register name")};
            } else if (op == "read_fpreg") {
                inst.op = ReadFpregInst{*destreg, parse_register(p, RegClass::Fp)};
            } else if (auto aop = arith_op(op)) {
                ArithInst arith{*destreg, *aop, {}};
                auto parse_operand = [&]() -> Operand {
                    std::string tok = p.next("operand");
                    if (auto reg = try_register(tok)) {
                        if (reg->cls != RegClass::General)
                            throw ParseError(line_no, "arith operands must be general registers");
                        return *reg;
                    }
                    if (is_integer(tok))
                        return parse_integer(tok, line_no);
                    throw ParseError(line_no, "bad operand '" + tok + "'");
                };
                arith.sources.push_back(parse_operand());
                if (p.peek() == ",") {
                    p.expect(",");
                    arith.sources.push_back(parse_operand());
                }
                if (*aop != ArithOp::Mov && arith.sources.size() != 2)
                    throw ParseError(line_no,
                                     std::string(to_string(*aop)) + " takes two operands");
                inst.op = std::move(arith);
            } else {
                throw ParseError(line_no, "unknown opcode " + op);
            }
            p.expect_end();
        } else if (head == "store") {
            MemRef addr = parse_memref(p);
            p.expect(",");
            Register value = parse_register(p, RegClass::General);
            p.expect_end();
            inst.op = StoreInst{std::move(addr), value};
        } else if (head == "branch_cond") {
            Register cond = parse_register(p, RegClass::General);
            p.expect(",");
            std::string label = p.next("label");
            p.expect_end();
            pending_branches.push_back({inst.index, label, line_no});
            inst.op = BranchCondInst{cond, std::move(label)};
        } else if (head == "branch_ind") {
            Register target = parse_register(p, RegClass::General);
            p.expect_end();
            inst.op = BranchIndInst{target};
        } else if (head == "ret") {
            p.expect_end();
            inst.op = RetInst{};
        } else if (head == "clflush") {
            inst.op = ClflushInst{parse_memref(p)};
            p.expect_end();
        } else if (head == "fence") {
            p.expect_end();
            inst.op = FenceInst{};
        } else if (head == "measure") {
            inst.op = MeasureInst{parse_memref(p)};
            p.expect_end();
        } else {
            throw ParseError(line_no, "unknown opcode " + head);
        }
        prog.instructions.push_back(std::move(inst));
    }

    for (const auto& pb : pending_branches)
        if (!prog.labels.count(pb.label))
            throw ParseError(pb.line, "dangling label " + pb.label);

    for (const auto& pt : pending_targets) {
        Annotation& ann = prog.annotations[pt.annotation];
        if (auto it = prog.labels.find(ann.target); it != prog.labels.end()) {
            if (it->second < prog.instructions.size())
                ann.resolved = it->second;
            else
                throw ParseError(pt.line, "label " + ann.target + " points past the last instruction");
        } else if (detail::is_integer(ann.target)) {
            std::int64_t idx = detail::parse_integer(ann.target, pt.line);
            if (idx < 0 || static_cast<std::size_t>(idx) >= prog.instructions.size())
                throw ParseError(pt.line, "instruction index " + ann.target + " out of range");
            ann.resolved = static_cast<std::uint32_t>(idx);
        } else if (ann.kind == AnnotationKind::MistrainedPredictor &&
                   (ann.target == "btb" || ann.target == "rsb" || ann.target == "cond")) {
            // predictor-kind form; applies to every branch of that class
        } else {
            throw ParseError(pt.line, "unresolved target '" + ann.target + "'");
        }
    }
    return prog;
}

inline std::string to_text(const MemRef& ref) {
    std::string off = ref.offset_is_register() ? std::get<Register>(ref.offset).name()
                                               : std::to_string(std::get<std::int64_t>(ref.offset));
    return "[" + ref.region + " + " + off + "]";
}

inline std::string to_text(const Instruction& inst) {
    return std::visit(
        [](const auto& i) -> std::string {
            using T = std::decay_t<decltype(i)>;
            if constexpr (std::is_same_v<T, LoadInst>)
                return i.dest.name() + " = load " + to_text(i.addr);
            else if constexpr (std::is_same_v<T, StoreInst>)
                return "store " + to_text(i.addr) + ", " + i.value.name();
            else if constexpr (std::is_same_v<T, ArithInst>) {
                std::string out = i.dest.name() + " = " + to_string(i.op);
                for (std::size_t k = 0; k < i.sources.size(); ++k) {
                    out += k == 0 ? " " : ", ";
                    if (auto* reg = std::get_if<Register>(&i.sources[k]))
                        out += reg->name();
                    else
                        out += std::to_string(std::get<std::int64_t>(i.sources[k]));
                }
                return out;
            } else if constexpr (std::is_same_v<T, BranchCondInst>)
                return "branch_cond " + i.cond.name() + ", " + i.target;
            else if constexpr (std::is_same_v<T, BranchIndInst>)
                return "branch_ind " + i.target.name();
            else if constexpr (std::is_same_v<T, RetInst>)
                return "ret";
            else if constexpr (std::is_same_v<T, ClflushInst>)
                return "clflush " + to_text(i.addr);
            else if constexpr (std::is_same_v<T, FenceInst>)
                return "fence";
            else if constexpr (std::is_same_v<T, ReadSysregInst>)
                return i.dest.name() + " = read_sysreg " + i.sysreg;
            else if constexpr (std::is_same_v<T, ReadFpregInst>)
                return i.dest.name() + " = read_fpreg " + i.fp_source.name();
            else
                return "measure " + to_text(i.addr);
        },
        inst.op);
}

/// Canonical rendering; reparses to a structurally equal Program.
inline std::string pretty_print(const Program& prog) {
    std::ostringstream out;
    for (const auto& r : prog.regions) {
        out << ".region " << r.name;
        if (r.size)
            out << ' ' << r.size;
        if (r.domain != RegionDomain::User)
            out << ' ' << to_string(r.domain);
        if (r.read_only)
            out << " readonly";
        out << '\n';
    }
    for (const auto& a : prog.annotations) {
        switch (a.kind) {
        case AnnotationKind::SecretRegion: out << ".secret "; break;
        case AnnotationKind::SharedRegion: out << ".shared "; break;
        case AnnotationKind::MistrainedPredictor: out << ".mistrain "; break;
        case AnnotationKind::AuthorizationMarker: out << ".authz "; break;
        case AnnotationKind::DelayedOperand: out << ".delayed "; break;
        }
        out << a.target << '\n';
    }
    std::multimap<std::uint32_t, std::string> labels_at;
    for (const auto& [label, idx] : prog.labels)
        labels_at.emplace(idx, label);
    for (const auto& inst : prog.instructions) {
        auto [lo, hi] = labels_at.equal_range(inst.index);
        for (auto it = lo; it != hi; ++it)
            out << it->second << ":\n";
        out << "    " << to_text(inst) << '\n';
    }
    auto [lo, hi] = labels_at.equal_range(static_cast<std::uint32_t>(prog.instructions.size()));
    for (auto it = lo; it != hi; ++it)
        out << it->second << ":\n";
    return out.str();
}

struct AnnotationWarning {
    std::string message;
    int source_line = 0;
};

/// Flags annotations that cannot participate in any attack graph.
inline std::vector<AnnotationWarning> validate_annotations(const Program& prog) {
    std::vector<AnnotationWarning> warnings;
    auto region_accessed = [&](std::string_view name) {
        for (const auto& inst : prog.instructions)
            if (const MemRef* ref = inst.mem(); ref && ref->region == name)
                return true;
        return false;
    };
    for (const auto& a : prog.annotations) {
        switch (a.kind) {
        case AnnotationKind::SecretRegion:
            if (!region_accessed(a.target))
                warnings.push_back({"secret region '" + a.target + "' never accessed",
                                    a.source_line});
            break;
        case AnnotationKind::SharedRegion:
            if (!region_accessed(a.target))
                warnings.push_back({"shared region '" + a.target + "' never accessed",
                                    a.source_line});
            break;
        case AnnotationKind::AuthorizationMarker: {
            if (!a.resolved)
                break;
            switch (prog.instructions[*a.resolved].opcode()) {
            case Opcode::BranchCond:
            case Opcode::BranchInd:
            case Opcode::Ret:
            case Opcode::Load:
            case Opcode::Store:
            case Opcode::ReadSysreg:
            case Opcode::ReadFpreg:
                break;
            default:
                warnings.push_back({"authorization marker on non-authorizing opcode",
                                    a.source_line});
            }
            break;
        }
        case AnnotationKind::MistrainedPredictor: {
            bool has_branch = false;
            for (const auto& inst : prog.instructions) {
                Opcode oc = inst.opcode();
                if (oc == Opcode::BranchCond || oc == Opcode::BranchInd || oc == Opcode::Ret)
                    has_branch = true;
            }
            if (!has_branch)
                warnings.push_back({"mistrained predictor but no branch in program",
                                    a.source_line});
            break;
        }
        case AnnotationKind::DelayedOperand:
            break;
        }
    }
    return warnings;
}

}  // namespace specdep
