#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"

#include "orcha/annotation.hpp"
#include "orcha/error.hpp"
#include "orcha/extent_expr.hpp"

#include <random>
#include <sstream>

using namespace orcha;

namespace {

Errc code_of(std::string_view text) {
    try {
        parse_annotations(text, "!!");
    } catch (const Error& e) {
        return e.code();
    }
    return Errc::IoError;
}

std::string block(const std::string& body) { return "!! milhoja begin\n" + body + "!! milhoja end\n"; }

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

RoutineSpec random_spec(std::mt19937& rng, int id) {
    std::uniform_int_distribution<int> pick(0, 3), nvar(1, 4), coin(0, 1);
    RoutineSpec s;
    s.name = "R" + std::to_string(id);
    s.device_variants = coin(rng) ? std::set<Device>{Device::CPU} : std::set<Device>{Device::CPU, Device::GPU};
    const int nargs = 1 + id % 5;
    for (int a = 0; a < nargs; ++a) {
        ArgumentSpec arg;
        arg.name = "a" + std::to_string(a);
        switch (pick(rng)) {
        case 0: {
            GridData g;
            g.structure = static_cast<Structure>(id % 3);
            for (int k = 0; k < nvar(rng); ++k) g.variables_in.insert(std::string(kVarNames[rng() % kNumVars]));
            if (coin(rng)) g.variables_out.insert(std::string(kVarNames[rng() % kNumVars]));
            arg.source = g;
            break;
        }
        case 1:
            arg.source = Scratch{{"(nxb)+" + std::to_string(a), "nyb", "5"}, {"1", "1", "1"}};
            break;
        case 2:
            arg.source = External{coin(rng) ? ScalarKind::Real : ScalarKind::Integer};
            break;
        default:
            arg.source = TileMetadata{static_cast<MetaKind>(rng() % 5)};
        }
        s.arguments.push_back(std::move(arg));
    }
    return s;
}

}  // namespace

TEST_CASE("hydro sample parses into the hand-written spec") {
    const auto text = read_text_file(test::test_data() / "hydro_sample.F90");
    const auto specs = parse_annotations(text, "!!", "hydro_sample.F90");
    REQUIRE(specs.size() == 1);

    RoutineSpec expected;
    expected.name = "Hydro_sample";
    expected.source_file = "hydro_sample.F90";
    expected.device_variants = {Device::CPU, Device::GPU};
    const std::set<std::string> all{"dens", "velx", "vely", "ener", "s1", "s2", "s3"};
    expected.arguments = {
        {"U", GridData{Structure::Center, all, all}},
        {"flx", Scratch{{"(nxb)+1", "(nyb)", "5"}, {"1", "1", "1"}}},
        {"fly", Scratch{{"(nxb)", "(nyb)+1", "5"}, {"1", "1", "1"}}},
        {"dt", External{ScalarKind::Real}},
        {"lo", TileMetadata{MetaKind::Lo}},
        {"hi", TileMetadata{MetaKind::Hi}},
        {"deltas", TileMetadata{MetaKind::Deltas}},
    };
    CHECK(specs[0].arguments.size() == 7);
    CHECK(specs[0] == expected);
}

TEST_CASE("empty file and plain code") {
    CHECK(parse_annotations("", "!!").empty());
    CHECK(parse_annotations("subroutine f()\n! comment\nend subroutine\n", "!!").empty());
}

TEST_CASE("annotation errors") {
    const std::string head = "!! routine: R\n!! devices: CPU\n";
    const std::string u = "!! argument: U\n!!   source: grid_data\n!!   in: dens\n";
    CHECK(code_of(block(head + u + u)) == Errc::DuplicateArgument);
    CHECK(code_of(block(head + "!! argument: x\n!!   source: magic\n")) == Errc::UnknownSourceKind);
    CHECK(code_of("!! milhoja begin\n" + head) == Errc::UnterminatedBlock);
    CHECK(code_of(block(head + "!! argument: U\n!!   source: grid_data\n!!   in: rho\n")) == Errc::UnknownVariable);
    CHECK(code_of(block(head + "!! argument: f\n!!   source: scratch\n!!   extents: nxb+/2\n")) ==
          Errc::ExpressionError);
    CHECK(code_of(block("!! routine: R\n!! devices: TPU\n")) == Errc::UnknownDevice);
    CHECK(code_of(block(head + "!!   in: dens\n")) == Errc::SyntaxError);
}

TEST_CASE("errors name file and line") {
    const std::string text = "x\n" + block("!! routine: R\n!! devices: CPU\n!! argument: a\n!!   source: magic\n");
    try {
        parse_annotations(text, "!!", "k.F90");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("k.F90:6") != std::string::npos);
    }
}

TEST_CASE("export golden files") {
    RoutineSpec dt;
    dt.name = "Only_dt";
    dt.device_variants = {Device::CPU};
    dt.arguments = {{"dt", External{ScalarKind::Real}}};
    const auto doc = export_spec(dt);
    CHECK(doc == read_text_file(test::golden_dir() / "spec_dt.json"));
    CHECK(doc.find(R"("dt": {
      "source": "external",
      "type": "real"
    })") != std::string::npos);

    RoutineSpec scratch;
    scratch.name = "Only_flx";
    scratch.device_variants = {Device::CPU, Device::GPU};
    scratch.arguments = {{"flx", Scratch{{"(nxb)+1", "(nyb)", "5"}, {"1", "1", "1"}}}};
    CHECK(export_spec(scratch) == read_text_file(test::golden_dir() / "spec_scratch.json"));
}

TEST_CASE("export import round trip and canonical fixed point") {
    std::mt19937 rng(11);
    for (int i = 0; i < 300; ++i) {
        const auto s = random_spec(rng, i);
        const auto doc = export_spec(s);
        const auto back = import_spec(doc);
        CHECK(back == s);
        CHECK(export_spec(back) == doc);
    }
    for (const auto& s : builtin_specs()) CHECK(import_spec(export_spec(s)) == s);
}

TEST_CASE("non-annotation lines never affect the parsed routines") {
    const auto text = read_text_file(test::data_dir() / "specs" / "physics.F90");
    const auto reference = parse_annotations(text, "!!", "p");
    std::mt19937 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::string mutated;
        for (const auto& line : lines_of(text)) {
            const bool annotation = line.rfind("!!", 0) == 0;
            if (!annotation && rng() % 3 == 0) continue;  // drop code
            mutated += line + "\n";
            if (!annotation && rng() % 4 == 0) mutated += "  x = x + " + std::to_string(rng() % 100) + "\n";
        }
        CHECK(parse_annotations(mutated, "!!", "p") == reference);
    }
}

TEST_CASE("corpus extents evaluate to positive sizes") {
    std::vector<RoutineSpec> all = builtin_specs();
    for (const auto& s : test::action_specs()) all.push_back(s.second);
    for (const MeshParams mp : {MeshParams{}, MeshParams{8, 8, 1, 9}, MeshParams{32, 16, 4, 9}})
        for (const auto& s : all)
            for (const auto& a : s.arguments)
                if (const auto* sc = std::get_if<Scratch>(&a.source))
                    for (const auto& e : sc->extents) CHECK(evaluate_extent(e, mp) > 0);
}

TEST_CASE("extent expressions") {
    MeshParams mp{16, 8, 2, 9};
    CHECK(evaluate_extent("(nxb)+2*nguard+1", mp) == 21);
    CHECK(evaluate_extent("-(nyb) + 3 * (nvars - 1)", mp) == 16);
    CHECK(normalize_extent(" ( nxb ) + 1 ") == "(nxb)+1");
    for (const char* bad : {"nxb +", "foo", "(nxb", "2 ** 3", ""}) {
        try {
            evaluate_extent(bad, mp);
            FAIL("expected ExpressionError for " << bad);
        } catch (const Error& e) {
            CHECK(e.code() == Errc::ExpressionError);
        }
    }
}

TEST_CASE("sentinel by extension") {
    CHECK(default_sentinel_for("a.F90") == "!!");
    CHECK(default_sentinel_for("a.cpp") == "//!");
}
