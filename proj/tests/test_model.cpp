#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <vector>

#include "spn/spn.hpp"
#include "support/fixtures.hpp"

using Catch::Matchers::ContainsSubstring;

namespace {

spn::Variable binary(const std::string& name) {
    return spn::Variable{name, {name + "0", name + "1"}};
}

}  // namespace

TEST_CASE("variable and state names reject structural characters", "[model]") {
    spn::Variable v = binary("V");
    // The text format separates tokens with whitespace and assignments with
    // '=' and ','; names containing those could not round-trip.
    for (const std::string bad : {"", "a b", "a,b", "a=b", "#a", "a\tb"}) {
        std::vector<spn::Node> n;
        n.push_back(spn::make_indicator(0, v, "V0"));
        CHECK_THROWS_AS(spn::Network({spn::Variable{bad, {"x", "y"}}, v}, std::move(n), 0),
                        spn::ModelError);
    }
    std::vector<spn::Node> n;
    n.push_back(spn::make_indicator(0, v, "V0"));
    CHECK_THROWS_AS(spn::Network({spn::Variable{"W", {"ok", "no spaces"}}, v}, std::move(n), 0),
                    spn::ModelError);
}

TEST_CASE("duplicate variables and duplicate states are rejected", "[model]") {
    spn::Variable v = binary("V");
    {
        std::vector<spn::Node> n;
        n.push_back(spn::make_indicator(0, v, "V0"));
        CHECK_THROWS_WITH(spn::Network({v, v}, std::move(n), 0), ContainsSubstring("duplicate"));
    }
    {
        spn::Variable twice{"W", {"s", "s"}};
        std::vector<spn::Node> n;
        n.push_back(spn::make_indicator(0, twice, "s"));
        CHECK_THROWS_WITH(spn::Network({twice}, std::move(n), 0), ContainsSubstring("duplicate"));
    }
}

TEST_CASE("node ids must be dense and match their index", "[model]") {
    spn::Variable v = binary("V");
    std::vector<spn::Node> n;
    n.push_back(spn::make_indicator(7, v, "V0"));  // id 7 at index 0
    CHECK_THROWS_WITH(spn::Network({v}, std::move(n), 0), ContainsSubstring("dense"));
}

TEST_CASE("structural mistakes throw at construction", "[model]") {
    spn::Variable v = binary("V");
    spn::Variable w = binary("W");

    SECTION("root out of range") {
        std::vector<spn::Node> n;
        n.push_back(spn::make_indicator(0, v, "V0"));
        CHECK_THROWS_AS(spn::Network({v}, std::move(n), 3), spn::ModelError);
    }
    SECTION("child out of range") {
        std::vector<spn::Node> n;
        n.push_back(spn::make_sum(0, {1, 9}, {0.5, 0.5}));
        n.push_back(spn::make_indicator(1, v, "V0"));
        CHECK_THROWS_AS(spn::Network({v}, std::move(n), 0), spn::ModelError);
    }
    SECTION("duplicate child on one node") {
        std::vector<spn::Node> n;
        n.push_back(spn::make_sum(0, {1, 1}, {0.5, 0.5}));
        n.push_back(spn::make_indicator(1, v, "V0"));
        CHECK_THROWS_AS(spn::Network({v}, std::move(n), 0), spn::ModelError);
    }
    SECTION("weight count must match child count") {
        std::vector<spn::Node> n;
        n.push_back(spn::make_sum(0, {1, 2}, {1.0}));
        n.push_back(spn::make_indicator(1, v, "V0"));
        n.push_back(spn::make_indicator(2, v, "V1"));
        CHECK_THROWS_AS(spn::Network({v}, std::move(n), 0), spn::ModelError);
    }
    SECTION("product must not carry weights") {
        std::vector<spn::Node> n;
        spn::Node p = spn::make_product(0, {1, 2});
        p.weights = {0.5, 0.5};
        n.push_back(std::move(p));
        n.push_back(spn::make_indicator(1, v, "V0"));
        n.push_back(spn::make_indicator(2, w, "W0"));
        CHECK_THROWS_AS(spn::Network({v, w}, std::move(n), 0), spn::ModelError);
    }
    SECTION("non-finite weight") {
        std::vector<spn::Node> n;
        n.push_back(spn::make_sum(0, {1, 2}, {0.5, std::numeric_limits<double>::quiet_NaN()}));
        n.push_back(spn::make_indicator(1, v, "V0"));
        n.push_back(spn::make_indicator(2, v, "V1"));
        CHECK_THROWS_AS(spn::Network({v}, std::move(n), 0), spn::ModelError);
    }
    SECTION("categorical length must match the state count") {
        std::vector<spn::Node> n;
        n.push_back(spn::make_categorical(0, v, {0.2, 0.3, 0.5}));
        CHECK_THROWS_AS(spn::Network({v}, std::move(n), 0), spn::ModelError);
    }
    SECTION("gaussian needs a positive variance and a continuous variable") {
        spn::Variable x{"X", {}};
        {
            std::vector<spn::Node> n;
            n.push_back(spn::make_gaussian(0, x, 0.0, 0.0));
            CHECK_THROWS_AS(spn::Network({x}, std::move(n), 0), spn::ModelError);
        }
        {
            std::vector<spn::Node> n;
            n.push_back(spn::make_gaussian(0, v, 0.0, 1.0));
            CHECK_THROWS_AS(spn::Network({v}, std::move(n), 0), spn::ModelError);
        }
    }
    SECTION("indicator on a continuous variable") {
        spn::Variable x{"X", {}};
        std::vector<spn::Node> n;
        spn::Node leaf = spn::make_indicator(0, v, "V0");
        leaf.leaf->variable = x;
        n.push_back(std::move(leaf));
        CHECK_THROWS_AS(spn::Network({x}, std::move(n), 0), spn::ModelError);
    }
    SECTION("leaf over an undeclared variable") {
        std::vector<spn::Node> n;
        n.push_back(spn::make_indicator(0, w, "W0"));
        CHECK_THROWS_AS(spn::Network({v}, std::move(n), 0), spn::ModelError);
    }
}

TEST_CASE("make_indicator rejects unknown state labels", "[model]") {
    spn::Variable v = binary("V");
    CHECK_THROWS_AS(spn::make_indicator(0, v, "nope"), spn::ModelError);
}

TEST_CASE("cycles are flagged and named, not silently accepted", "[model]") {
    spn::Variable v = binary("V");
    std::vector<spn::Node> n;
    n.push_back(spn::make_sum(0, {1}, {1.0}));
    n.push_back(spn::make_sum(1, {2}, {1.0}));
    n.push_back(spn::make_sum(2, {1}, {1.0}));  // 1 -> 2 -> 1
    spn::Network net({v}, std::move(n), 0);

    REQUIRE(net.has_cycle());
    CHECK((net.cycle_node() == 1 || net.cycle_node() == 2));
    CHECK_THROWS_WITH(net.topo_order(),
                      ContainsSubstring("cycle through node " + std::to_string(net.cycle_node())));
    CHECK_THROWS_AS(net.scope(0), spn::ModelError);

    spn::ValidityReport rep = spn::validate(net);
    CHECK_FALSE(rep.acyclic);
    CHECK_FALSE(rep.passed());
}

TEST_CASE("negative weights are representable but not evaluable", "[model]") {
    spn::Variable v = binary("V");
    std::vector<spn::Node> n;
    n.push_back(spn::make_sum(0, {1, 2}, {1.5, -0.5}));
    n.push_back(spn::make_indicator(1, v, "V0"));
    n.push_back(spn::make_indicator(2, v, "V1"));
    spn::Network net({v}, std::move(n), 0);

    CHECK(net.has_negative_weight());
    CHECK_THROWS_AS(spn::evaluate(net, spn::Assignment{}), spn::ModelError);
    CHECK_FALSE(spn::validate(net).normalized);
}

TEST_CASE("scopes are the union of descendant leaf variables", "[model]") {
    spn::Network net = fixtures::abc();

    // second figure of the running example: the sum over B-products covers B
    // and C, the C-sums cover only C
    CHECK(net.scope_names(5) == std::vector<std::string>{"B", "C"});
    CHECK(net.scope_names(6) == std::vector<std::string>{"B", "C"});
    CHECK(net.scope_names(0) == std::vector<std::string>{"A", "B", "C"});
    CHECK(net.scope_names(13) == std::vector<std::string>{"C"});
    CHECK(net.scope_names(3) == std::vector<std::string>{"A"});

    // cross-check every node against a direct reachability walk
    for (const spn::Node& node : net.nodes()) {
        std::set<int> reached;
        std::vector<int> stack{node.id};
        std::set<int> seen;
        while (!stack.empty()) {
            int id = stack.back();
            stack.pop_back();
            if (!seen.insert(id).second) continue;
            const spn::Node& cur = net.node(id);
            if (cur.is_leaf()) reached.insert(net.var_index(cur.leaf->variable.name));
            for (int c : cur.children) stack.push_back(c);
        }
        std::vector<size_t> got = net.scope(node.id).indices();
        std::set<int> got_set(got.begin(), got.end());
        CHECK(got_set == reached);
    }
}

TEST_CASE("scope computation is a fixpoint", "[model]") {
    spn::Network net = fixtures::abc();
    CHECK(spn::compute_scopes(net) == spn::compute_scopes(net));
}

TEST_CASE("parents are the reverse of the child lists", "[model]") {
    spn::Network net = fixtures::abc();
    CHECK(net.parents(0).empty());
    CHECK(net.parents(16) == std::vector<int>{13, 14, 15});
    CHECK(net.parents(11) == std::vector<int>{7, 9});
    for (const spn::Node& n : net.nodes())
        for (int c : n.children) {
            const std::vector<int>& p = net.parents(c);
            CHECK(std::find(p.begin(), p.end(), n.id) != p.end());
        }
}

TEST_CASE("assignments bind, rebind and unset by name", "[model]") {
    spn::Assignment a{{"A", "+a"}, {"B", "+b"}};
    CHECK(a.binds("A"));
    CHECK_FALSE(a.binds("C"));
    CHECK(a.size() == 2);

    a.set("A", "-a");
    CHECK(a.size() == 2);
    a.unset("B");
    CHECK_FALSE(a.binds("B"));
    a.set("X", 1.5);
    CHECK(a.binds("X"));
    CHECK_FALSE(a.empty());

    spn::Assignment empty;
    CHECK(empty.empty());
}

TEST_CASE("resolve maps labels to state indices and checks types", "[model]") {
    spn::Network net = fixtures::abc();

    spn::ResolvedRow row = net.resolve({{"A", "+a"}, {"C", "-c"}});
    REQUIRE(row.is_bound(0));
    CHECK(row.state[0] == 0);
    CHECK_FALSE(row.is_bound(1));
    CHECK(row.state[2] == 1);
    CHECK_FALSE(row.complete());
    CHECK(net.resolve({{"A", "+a"}, {"B", "+b"}, {"C", "-c"}}).complete());

    CHECK_THROWS_WITH(net.resolve({{"Q", "+a"}}), ContainsSubstring("unknown variable"));
    CHECK_THROWS_WITH(net.resolve({{"A", "+q"}}), ContainsSubstring("has no state"));

    spn::Assignment real_bound;
    real_bound.set("A", 0.5);
    CHECK_THROWS_WITH(net.resolve(real_bound), ContainsSubstring("finite"));
}

TEST_CASE("continuous variables accept numeric labels", "[model]") {
    spn::Variable x{"X", {}};
    std::vector<spn::Node> n;
    n.push_back(spn::make_gaussian(0, x, 0.0, 1.0));
    spn::Network net({x}, std::move(n), 0);

    spn::ResolvedRow a = net.resolve({{"X", "1.5"}});
    REQUIRE(a.is_bound(0));
    CHECK(a.real[0] == 1.5);

    spn::Assignment direct;
    direct.set("X", 1.5);
    spn::ResolvedRow b = net.resolve(direct);
    CHECK(b.real[0] == 1.5);

    CHECK_THROWS_AS(net.resolve({{"X", "abc"}}), spn::ModelError);
}

TEST_CASE("single leaf is a complete network", "[model]") {
    spn::Variable v = binary("V");
    std::vector<spn::Node> n;
    n.push_back(spn::make_categorical(0, v, {0.25, 0.75}));
    spn::Network net({v}, std::move(n), 0);

    CHECK(net.size() == 1);
    CHECK(net.scope_names(0) == std::vector<std::string>{"V"});
    CHECK(spn::validate(net).passed());
}

TEST_CASE("var_index is a total lookup with -1 for misses", "[model]") {
    spn::Network net = fixtures::abc();
    CHECK(net.var_index("A") == 0);
    CHECK(net.var_index("C") == 2);
    CHECK(net.var_index("nope") == -1);
}
