#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "orcha/error.hpp"
#include "orcha/macro.hpp"

#include <random>

using namespace orcha;

namespace {

Errc expand_error(const DefinitionSet& set, std::string_view text, const QualifierPath& active = {"default"}) {
    try {
        expand(set, text, active);
    } catch (const Error& e) {
        return e.code();
    }
    return Errc::IoError;
}

// Macro k may only call macros with a larger index, so every set is acyclic.
DefinitionSet random_acyclic(std::mt19937& rng, int n, std::vector<int>& arity) {
    DefinitionSet set;
    arity.assign(static_cast<std::size_t>(n), 0);
    for (int k = n - 1; k >= 0; --k) {
        MacroDefinition d;
        d.name = "M" + std::to_string(k);
        arity[static_cast<std::size_t>(k)] = static_cast<int>(rng() % 3);
        for (int p = 0; p < arity[static_cast<std::size_t>(k)]; ++p) d.params.push_back("p" + std::to_string(p));
        d.body = "<" + std::to_string(k);
        for (const auto& p : d.params) d.body += " $(" + p + ")";
        const int calls = static_cast<int>(rng() % 3);
        for (int c = 0; c < calls && k + 1 < n; ++c) {
            const int callee = k + 1 + static_cast<int>(rng() % static_cast<unsigned>(n - k - 1));
            d.body += " @M" + std::to_string(callee) + "(";
            for (int a = 0; a < arity[static_cast<std::size_t>(callee)]; ++a) d.body += (a ? ", x" : "x") + std::to_string(a);
            d.body += ")";
        }
        d.body += ">";
        if (rng() % 2) d.qualifiers = {"gpu"};
        set.add(d);
        if (d.qualifiers != QualifierPath{"default"}) {
            d.qualifiers = {"default"};
            d.body += "!";
            set.add(d);
        }
    }
    return set;
}

}  // namespace

TEST_CASE("arbitration walks from the active path toward default") {
    DefinitionSet set;
    set.add({"LOOP_2D", {}, "default loop", {"default"}});
    set.add({"LOOP_2D", {}, "gpu loop", {"gpu"}});
    set.inherit({"gpu", "tiled"}, {"gpu"});
    CHECK(arbitrate(set, "LOOP_2D", {"gpu", "tiled"}).body == "gpu loop");
    CHECK(arbitrate(set, "LOOP_2D", {"cpu"}).body == "default loop");
    CHECK(expand(set, "@LOOP_2D()", {"gpu", "tiled"}) == "gpu loop");
}

TEST_CASE("only default exists") {
    DefinitionSet set;
    set.add({"X", {}, "x", {"default"}});
    for (const QualifierPath& p : {QualifierPath{"default"}, QualifierPath{"gpu"}, QualifierPath{"gpu", "tiled"}, QualifierPath{"cpu"}})
        CHECK(arbitrate(set, "X", p).body == "x");
}

TEST_CASE("two definitions at one path are ambiguous") {
    DefinitionSet set;
    set.add({"X", {}, "one", {"gpu"}});
    set.add({"X", {}, "two", {"gpu"}});
    CHECK(expand_error(set, "@X()", {"gpu"}) == Errc::Ambiguous);
}

TEST_CASE("partial redefinition overlays only what it names") {
    const auto set = parse_definitions(R"(
# base
[default]
BEGIN() = begin
BODY(x) = body $(x)
END() = end
[gpu]
BODY(x) = gpu body $(x)
)");
    CHECK(expand(set, "@BEGIN() @BODY(1) @END()", {"default"}) == "begin body 1 end");
    CHECK(expand(set, "@BEGIN() @BODY(1) @END()", {"gpu"}) == "begin gpu body 1 end");
}

TEST_CASE("expansion examples") {
    DefinitionSet set;
    set.add({"HALO", {}, "2", {"default"}});
    set.add({"IDX", {"i", "j"}, "($(i)) + ($(j))*@PITCH()", {"default"}});
    set.add({"PITCH", {}, "18", {"default"}});
    CHECK(expand(set, "@HALO()", {"default"}) == "2");
    CHECK(expand(set, "@IDX(a,b)", {"default"}) == "(a) + (b)*18");
    CHECK(expand(set, "x = @IDX(i+1, @HALO())", {"default"}) == "x = (i+1) + (2)*18");
}

TEST_CASE("errors") {
    DefinitionSet set;
    set.add({"A", {}, "a @B()", {"default"}});
    set.add({"B", {}, "b @A()", {"default"}});
    set.add({"S", {}, "@S()", {"default"}});
    set.add({"TWO", {"x", "y"}, "$(x)$(y)", {"default"}});
    CHECK(expand_error(set, "@A()") == Errc::SelfReference);
    CHECK(expand_error(set, "@S()") == Errc::SelfReference);
    CHECK(expand_error(set, "@TWO(1)") == Errc::ArityMismatch);
    CHECK(expand_error(set, "@NOPE()") == Errc::Undefined);
    CHECK(expand_error(set, "@TWO(1, (2)") == Errc::MacroSyntax);
    try {
        set.inherit({"default"}, {"gpu"});
        FAIL("expected InheritanceError");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::InheritanceError);
    }
    try {
        set.add({"BAD", {"x"}, "$(y)", {"default"}});
        FAIL("expected MacroSyntax");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::MacroSyntax);
    }
}

TEST_CASE("inheritance cycles are rejected") {
    DefinitionSet set;
    set.inherit({"a"}, {"b"});
    try {
        set.inherit({"b"}, {"a"});
        FAIL("expected InheritanceError");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::InheritanceError);
    }
}

TEST_CASE("continuation lines") {
    const auto set = parse_definitions("[default]\nTWO() = first \\\n  second\n");
    CHECK(expand(set, "@TWO()", {"default"}) == "first\n  second");
}

TEST_CASE("random acyclic sets always expand") {
    std::mt19937 rng(17);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<int> arity;
        const int n = 1 + trial % 12;
        const auto set = random_acyclic(rng, n, arity);
        std::string text = "start";
        for (int k = 0; k < n; ++k) {
            text += " @M" + std::to_string(k) + "(";
            for (int a = 0; a < arity[static_cast<std::size_t>(k)]; ++a) text += (a ? ",v" : "v") + std::to_string(a);
            text += ")";
        }
        for (const QualifierPath& active : {QualifierPath{"default"}, QualifierPath{"gpu"}}) {
            const auto out = expand(set, text, active);
            CHECK(out.find('@') == std::string::npos);
            CHECK(out.find("$(") == std::string::npos);
        }
    }
}

TEST_CASE("random cyclic sets raise SelfReference") {
    std::mt19937 rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + trial % 6;
        DefinitionSet set;
        for (int k = 0; k < n; ++k)
            set.add({"C" + std::to_string(k), {}, "c @C" + std::to_string((k + 1) % n) + "()", {"default"}});
        CHECK(expand_error(set, "@C" + std::to_string(rng() % n) + "()") == Errc::SelfReference);
    }
}

TEST_CASE("less specific definitions never override a more specific match") {
    std::mt19937 rng(29);
    for (int trial = 0; trial < 100; ++trial) {
        DefinitionSet set;
        set.inherit({"gpu", "tiled"}, {"gpu"});
        set.add({"X", {}, "specific", {"gpu", "tiled"}});
        const auto before = arbitrate(set, "X", {"gpu", "tiled"}).body;
        set.add({"X", {}, "mid" + std::to_string(rng() % 10), {"gpu"}});
        set.add({"X", {}, "base" + std::to_string(rng() % 10), {"default"}});
        CHECK(arbitrate(set, "X", {"gpu", "tiled"}).body == before);
    }
}
