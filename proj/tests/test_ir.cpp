#include "doctest.h"

#include <random>

#include "specdep/ir.hpp"
#include "testutil.hpp"

using namespace specdep;

TEST_CASE("minimal program parses") {
    Program p = parse_program(".region A\nr1 = load [A + 0]\n");
    REQUIRE(p.instructions.size() == 1);
    CHECK(p.instructions[0].opcode() == Opcode::Load);
    REQUIRE(p.regions.size() == 1);
    CHECK(p.regions[0].name == "A");
    const auto& load = std::get<LoadInst>(p.instructions[0].op);
    CHECK(load.dest.name() == "r1");
    CHECK(load.addr.region == "A");
}

TEST_CASE("the bounds-check gadget parses with recoverable structure") {
    Program p = testutil::fixture_program("spectre_v1.sir");
    REQUIRE(p.instructions.size() == 8);
    CHECK(p.instructions[0].opcode() == Opcode::Clflush);
    CHECK(p.instructions[3].opcode() == Opcode::BranchCond);
    CHECK(p.instructions[4].opcode() == Opcode::Load);
    CHECK(p.instructions[5].opcode() == Opcode::Arith);
    CHECK(p.instructions[6].opcode() == Opcode::Load);
    CHECK(p.instructions[7].opcode() == Opcode::Measure);
    CHECK(p.is_secret("ArrayVictim"));
    CHECK(p.is_shared("ArrayA"));
    CHECK(p.labels.at("guard") == 3);
    CHECK(p.labels.at("done") == 7);
    // indices are dense program order
    for (std::uint32_t i = 0; i < p.instructions.size(); ++i)
        CHECK(p.instructions[i].index == i);
}

TEST_CASE("undeclared region is a parse error with the offending line") {
    try {
        parse_program("r1 = load [B + 0]\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line == 1);
        CHECK(std::string(e.what()).find("undeclared region B") != std::string::npos);
    }
}

TEST_CASE("parse errors carry useful diagnostics") {
    CHECK_THROWS_AS(parse_program(".region A\nr1 = frob [A + 0]\n"), ParseError);  // unknown opcode
    CHECK_THROWS_AS(parse_program("branch_cond r1, nowhere\n"), ParseError);       // dangling label
    CHECK_THROWS_AS(parse_program("x:\nret\nx:\nret\n"), ParseError);              // duplicate label
    CHECK_THROWS_AS(parse_program(".region A\nr1 = load [A + 0] extra\n"), ParseError);
    CHECK_THROWS_AS(parse_program(".region A\nstore [A + 0]\n"), ParseError);      // arity
    CHECK_THROWS_AS(parse_program("r1 = add r2\n"), ParseError);                   // add needs two
    CHECK_THROWS_AS(parse_program("r99 = mov 1\n"), ParseError);                   // register class
    CHECK_THROWS_AS(parse_program("f1 = mov 1\n"), ParseError);   // fp dest not allowed
    CHECK_THROWS_AS(parse_program("r1 = read_fpreg r2\n"), ParseError);  // fp source required
    CHECK_THROWS_AS(parse_program(".secret Nope\n"), ParseError);
    CHECK_THROWS_AS(parse_program(".authz 7\nret\n"), ParseError);  // index out of range
    CHECK_THROWS_AS(parse_program(".bogus x\n"), ParseError);
}

TEST_CASE("fp registers are a distinct class") {
    Program p = parse_program("r1 = read_fpreg f0\n");
    const auto& inst = std::get<ReadFpregInst>(p.instructions[0].op);
    CHECK(inst.fp_source.cls == RegClass::Fp);
    CHECK(inst.dest.cls == RegClass::General);
    CHECK(inst.fp_source.name() == "f0");
}

TEST_CASE("annotation targets resolve to instruction indices") {
    Program p = parse_program(".region A\n.authz begin\nbegin:\nr1 = load [A + 0]\n.delayed 0\n");
    REQUIRE(p.annotations.size() == 2);
    CHECK(p.annotations[0].kind == AnnotationKind::AuthorizationMarker);
    CHECK(p.annotations[0].resolved == 0);
    CHECK(p.annotations[1].kind == AnnotationKind::DelayedOperand);
    CHECK(p.annotations[1].resolved == 0);
}

TEST_CASE("every fixture round-trips through the pretty printer") {
    const char* names[] = {
        "spectre_v1.sir",  "spectre_v1_fenced.sir", "spectre_v1_1.sir", "spectre_v1_2.sir",
        "spectre_v2.sir",  "spectre_rsb.sir",       "meltdown.sir",     "spectre_v3a.sir",
        "spectre_v4.sir",  "foreshadow.sir",        "foreshadow_os.sir", "foreshadow_vmm.sir",
        "lazy_fp.sir",     "ridl.sir",              "zombieload.sir",   "fallout.sir",
        "lvi.sir",         "taa.sir",               "cacheout.sir",     "straight_line.sir",
        "no_send.sir",
    };
    for (const char* name : names) {
        CAPTURE(name);
        Program p = testutil::fixture_program(name);
        Program reparsed = parse_program(pretty_print(p));
        CHECK(reparsed == p);
        // printing is a fixpoint
        CHECK(pretty_print(reparsed) == pretty_print(p));
    }
}

TEST_CASE("parsing is total over fuzzed inputs") {
    std::mt19937 rng(2024);
    const std::string alphabet =
        "abcdefghijklmnopqrstuvwxyzABCDEFXYZ0123456789 \t\n[]+,=:;#._-r";
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    std::uniform_int_distribution<int> len(0, 200);
    int parsed = 0, rejected = 0;
    for (int iter = 0; iter < 2000; ++iter) {
        std::string text;
        int n = len(rng);
        for (int i = 0; i < n; ++i)
            text.push_back(alphabet[pick(rng)]);
        try {
            parse_program(text);
            ++parsed;
        } catch (const ParseError& e) {
            CHECK(e.line >= 1);
            ++rejected;
        }
    }
    CHECK(parsed + rejected == 2000);
}

TEST_CASE("parsing is total over raw byte noise") {
    std::mt19937 rng(4242);
    std::uniform_int_distribution<int> byte(0, 255);
    std::uniform_int_distribution<int> len(0, 120);
    for (int iter = 0; iter < 500; ++iter) {
        std::string text;
        int n = len(rng);
        for (int i = 0; i < n; ++i)
            text.push_back(static_cast<char>(byte(rng)));
        try {
            parse_program(text);
        } catch (const ParseError&) {
        }
    }
}

TEST_CASE("mutating one valid line keeps parse total") {
    std::mt19937 rng(99);
    std::string base = testutil::fixture_text("spectre_v1.sir");
    std::uniform_int_distribution<std::size_t> pos(0, base.size() - 1);
    std::uniform_int_distribution<int> ch(32, 126);
    for (int iter = 0; iter < 500; ++iter) {
        std::string text = base;
        text[pos(rng)] = static_cast<char>(ch(rng));
        try {
            parse_program(text);
        } catch (const ParseError&) {
        }
    }
}

TEST_CASE("annotation validation flags dead annotations") {
    SUBCASE("referenced secret is clean") {
        Program p = testutil::fixture_program("spectre_v1.sir");
        CHECK(validate_annotations(p).empty());
    }
    SUBCASE("unreferenced secret region warns") {
        Program p = parse_program(".region A\n.region B\n.secret B\nr1 = load [A + 0]\n");
        auto warnings = validate_annotations(p);
        REQUIRE(warnings.size() == 1);
        CHECK(warnings[0].message.find("never accessed") != std::string::npos);
    }
    SUBCASE("authorization markers are accepted exactly on authorization-capable opcodes") {
        // capable: branches, returns, loads, stores, privileged/FPU register reads
        const char* capable[] = {
            "branch_cond r0, out\nout:\nret", "branch_ind r0", "ret",
            "r1 = load [A + 0]",              "store [A + 0], r2",
            "r1 = read_sysreg msr",           "r1 = read_fpreg f0",
        };
        for (const char* body : capable) {
            CAPTURE(body);
            Program p = parse_program(".region A\n.authz 0\n" + std::string(body) + "\n");
            for (const auto& w : validate_annotations(p))
                CHECK(w.message.find("non-authorizing") == std::string::npos);
        }
        const char* incapable[] = {
            "r1 = mov 4", "clflush [A + 0]", "fence", "measure [A + 0]",
        };
        for (const char* body : incapable) {
            CAPTURE(body);
            Program p = parse_program(".region A\n.authz 0\n" + std::string(body) + "\n");
            bool warned = false;
            for (const auto& w : validate_annotations(p))
                warned |= w.message.find("non-authorizing") != std::string::npos;
            CHECK(warned);
        }
    }
}
