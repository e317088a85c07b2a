#pragma once

// Shared test machinery: fixture loading, a seeded random-DAG generator, a
// random gadget-program generator, a minimal DOT syntax checker, and an
// independent def-use re-scan used as the oracle for derived data edges.

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "specdep/specdep.hpp"

namespace testutil {

inline std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : fallback;
}

inline std::string fixtures_dir() { return env_or("SPECDEP_FIXTURES", "fixtures"); }
inline std::string data_dir() { return env_or("SPECDEP_DATA", "data"); }

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline std::string fixture_text(const std::string& name) {
    return read_file(fixtures_dir() + "/" + name);
}

inline specdep::Program fixture_program(const std::string& name) {
    return specdep::parse_program(fixture_text(name));
}

// --- random DAGs -------------------------------------------------------------

inline specdep::Tsg random_dag(std::mt19937& rng, int nodes, double edge_prob) {
    specdep::Tsg g;
    for (int i = 0; i < nodes; ++i)
        g.add_node("n" + std::to_string(i));
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<int> kind(0, 4);  // everything but SecurityDep
    for (int i = 0; i < nodes; ++i)
        for (int j = i + 1; j < nodes; ++j)
            if (coin(rng) < edge_prob)
                g.add_edge(specdep::NodeId{static_cast<std::uint32_t>(i)},
                           specdep::NodeId{static_cast<std::uint32_t>(j)},
                           static_cast<specdep::EdgeKind>(kind(rng)));
    return g;
}

/// Sizes 2..10 with a density mix that keeps full ordering enumeration cheap.
inline specdep::Tsg random_oracle_dag(std::mt19937& rng) {
    std::uniform_int_distribution<int> nd(2, 10);
    std::uniform_int_distribution<int> pd(0, 2);
    int n = nd(rng);
    double p = n <= 7 ? (0.25 + 0.25 * pd(rng)) : (0.4 + 0.2 * pd(rng));
    return random_dag(rng, n, p);
}

/// Race matrix from one full ordering enumeration: pair (a,b) races iff some
/// ordering puts a first and another puts b first.
inline std::vector<std::vector<int>> oracle_race_matrix(const specdep::Tsg& g) {
    const int n = static_cast<int>(g.node_count());
    std::vector<std::vector<int>> seen(n, std::vector<int>(n, 0));
    g.for_each_valid_ordering([&](const specdep::Ordering& o) {
        std::vector<int> pos(n);
        for (int i = 0; i < n; ++i)
            pos[o[i].value] = i;
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b)
                seen[a][b] |= pos[a] < pos[b] ? 1 : 2;
        return true;
    });
    return seen;
}

// --- random gadget programs --------------------------------------------------

/// Small randomized bounds-check gadgets: optional fence, optional use chain,
/// optional send/measure tail. Always parseable; speculation interest varies.
inline std::string random_gadget_text(std::mt19937& rng) {
    std::uniform_int_distribution<int> coin(0, 1);
    std::uniform_int_distribution<int> chain(0, 2);
    bool fence_after_branch = coin(rng) == 1;
    bool has_send = coin(rng) == 1;
    bool has_measure = has_send && coin(rng) == 1;
    int uses = chain(rng);

    std::ostringstream out;
    out << ".region Probe 1048576\n.region Secret 4096\n.region Bound 8\n";
    out << ".secret Secret\n.shared Probe\n.mistrain guard\n";
    out << "    clflush [Probe + 0]\n";
    out << "    r2 = mov 4096\n";
    out << "    r0 = load [Bound + 0]\n";
    out << "guard:\n    branch_cond r0, done\n";
    if (fence_after_branch)
        out << "    fence\n";
    out << "    r1 = load [Secret + r2]\n";
    std::string val = "r1";
    for (int i = 0; i < uses; ++i) {
        std::string next = "r" + std::to_string(3 + i);
        out << "    " << next << " = shl " << val << ", " << (4 + i) << "\n";
        val = next;
    }
    if (has_send)
        out << "    r9 = load [Probe + " << val << "]\n";
    out << "done:\n";
    if (has_measure)
        out << "    measure [Probe + 0]\n";
    else
        out << "    ret\n";
    return out.str();
}

inline specdep::ThreatModel branch_tm() {
    return specdep::ThreatModel{{specdep::DelayMechanism::BranchPrediction},
                                {specdep::MicroOpKind::ReadMemory},
                                {specdep::CovertChannel::FlushReload}};
}

// --- minimal DOT checker -----------------------------------------------------

/// Accepts the subset of DOT this project emits: a digraph of quoted-label
/// node statements and edge statements with optional [attr] suffixes.
inline bool dot_well_formed(const std::string& text, std::string* why = nullptr) {
    auto fail = [&](const std::string& message) {
        if (why)
            *why = message;
        return false;
    };
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("digraph ", 0) != 0 || line.back() != '{')
        return fail("missing digraph header");
    bool closed = false;
    while (std::getline(in, line)) {
        if (line == "}") {
            closed = true;
            continue;
        }
        if (closed && !line.empty())
            return fail("content after closing brace");
        if (line.empty())
            continue;
        if (line.rfind("  ", 0) != 0)
            return fail("statement not indented: " + line);
        std::string body = line.substr(2);
        if (body.back() != ';')
            return fail("statement missing semicolon: " + line);
        int quotes = 0, brackets = 0;
        for (std::size_t i = 0; i < body.size(); ++i) {
            if (body[i] == '"' && (i == 0 || body[i - 1] != '\\'))
                ++quotes;
            if (body[i] == '[')
                ++brackets;
            if (body[i] == ']')
                --brackets;
        }
        if (quotes % 2 != 0)
            return fail("unbalanced quotes: " + line);
        if (brackets != 0)
            return fail("unbalanced attribute brackets: " + line);
    }
    if (!closed)
        return fail("missing closing brace");
    return true;
}

// --- independent def-use re-scan ----------------------------------------------

struct DefUsePair {
    std::uint32_t def_instruction;
    std::uint32_t use_instruction;
};

/// Recomputes register def->use pairs (last-definition rule) directly from
/// the program, independent of the builder's derivation.
inline std::vector<DefUsePair> rescan_def_use(const specdep::Program& prog) {
    using namespace specdep;
    std::map<std::string, std::uint32_t> last_def;
    std::vector<DefUsePair> pairs;
    for (const Instruction& inst : prog.instructions) {
        std::vector<Register> reads;
        std::visit(
            [&](const auto& i) {
                using T = std::decay_t<decltype(i)>;
                if constexpr (std::is_same_v<T, LoadInst>) {
                    if (i.addr.offset_is_register())
                        reads.push_back(std::get<Register>(i.addr.offset));
                } else if constexpr (std::is_same_v<T, StoreInst>) {
                    if (i.addr.offset_is_register())
                        reads.push_back(std::get<Register>(i.addr.offset));
                    reads.push_back(i.value);
                } else if constexpr (std::is_same_v<T, ArithInst>) {
                    for (const Operand& s : i.sources)
                        if (auto* r = std::get_if<Register>(&s))
                            reads.push_back(*r);
                } else if constexpr (std::is_same_v<T, BranchCondInst>) {
                    reads.push_back(i.cond);
                } else if constexpr (std::is_same_v<T, BranchIndInst>) {
                    reads.push_back(i.target);
                } else if constexpr (std::is_same_v<T, ClflushInst> ||
                                     std::is_same_v<T, MeasureInst>) {
                    if (i.addr.offset_is_register())
                        reads.push_back(std::get<Register>(i.addr.offset));
                }
            },
            inst.op);
        for (const Register& r : reads)
            if (auto it = last_def.find(r.name()); it != last_def.end())
                pairs.push_back({it->second, inst.index});
        if (auto dest = inst.dest())
            last_def[dest->name()] = inst.index;
    }
    return pairs;
}

// --- CLI process runner --------------------------------------------------------

struct CliResult {
    int exit_code = -1;
    std::string output;  // stdout only
};

inline std::string cli_binary() {
    if (const char* v = std::getenv("SPECDEP_BIN"))
        return v;
    for (const char* candidate : {"./build/specdep", "./specdep", "../specdep"})
        if (std::ifstream(candidate).good())
            return candidate;
    return "./specdep";
}

inline CliResult run_cli(const std::string& args) {
    std::string cmd = cli_binary() + " " + args + " 2>/dev/null";
    std::array<char, 4096> buf{};
    CliResult result;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe)
        return result;
    std::size_t n = 0;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0)
        result.output.append(buf.data(), n);
    int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

}  // namespace testutil
