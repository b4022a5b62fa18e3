#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "spn/spn.hpp"
#include "support/fixtures.hpp"

using Catch::Approx;

namespace {

std::string state_of(const spn::Assignment& a, const std::string& var) {
    return std::get<std::string>(a.bindings().at(var));
}

}  // namespace

TEST_CASE("generator streams are reproducible", "[rng]") {
    spn::Rng a(42), b(42), c(43);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 100; ++i) {
        uint64_t x = a.next_u64(), y = b.next_u64();
        all_equal = all_equal && x == y;
        any_diff = any_diff || x != c.next_u64();
    }
    CHECK(all_equal);
    CHECK(any_diff);

    spn::Rng d(7), e(7);
    for (int i = 0; i < 50; ++i) {
        CHECK(d.next_double() == e.next_double());
        CHECK(d.next_gaussian(0.0, 1.0) == e.next_gaussian(0.0, 1.0));
    }
}

TEST_CASE("derived seeds decorrelate substreams", "[rng]") {
    CHECK(spn::derive_seed(1, 0) == spn::derive_seed(1, 0));
    CHECK(spn::derive_seed(1, 0) != spn::derive_seed(1, 1));
    CHECK(spn::derive_seed(1, 0) != spn::derive_seed(2, 0));
}

TEST_CASE("doubles land in the half-open unit interval", "[rng]") {
    spn::Rng rng(5);
    for (int i = 0; i < 10000; ++i) {
        double x = rng.next_double();
        REQUIRE(x >= 0.0);
        REQUIRE(x < 1.0);
    }
}

TEST_CASE("next_index covers its range", "[rng]") {
    spn::Rng rng(11);
    std::vector<int> hits(5, 0);
    for (int i = 0; i < 5000; ++i) {
        size_t k = rng.next_index(5);
        REQUIRE(k < 5);
        ++hits[k];
    }
    for (int h : hits) CHECK(h > 0);
}

TEST_CASE("weighted picks respect the weights", "[rng]") {
    spn::Rng rng(13);
    std::vector<double> w{0.3, 0.0, 0.7};
    int counts[3] = {0, 0, 0};
    for (int i = 0; i < 20000; ++i) ++counts[rng.pick_weighted(w)];
    CHECK(counts[1] == 0);
    CHECK(static_cast<double>(counts[0]) / 20000 == Approx(0.3).margin(0.02));
    CHECK(static_cast<double>(counts[2]) / 20000 == Approx(0.7).margin(0.02));
}

TEST_CASE("shuffle permutes and is seed-stable", "[rng]") {
    std::vector<int> base{1, 2, 3, 4, 5, 6, 7, 8};
    spn::Rng a(3), b(3);
    std::vector<int> x = base, y = base;
    a.shuffle(x);
    b.shuffle(y);
    CHECK(x == y);
    std::vector<int> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == base);

    std::vector<int> one{9};
    spn::Rng c(1);
    c.shuffle(one);
    CHECK(one == std::vector<int>{9});
}

TEST_CASE("gaussian draws have the right first two moments", "[rng]") {
    spn::Rng rng(17);
    double sum = 0.0, sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        double g = rng.next_gaussian(0.0, 1.0);
        sum += g;
        sq += g * g;
    }
    double mean = sum / n;
    CHECK(mean == Approx(0.0).margin(0.03));
    CHECK(sq / n - mean * mean == Approx(1.0).margin(0.05));
}

TEST_CASE("sampling is deterministic per seed", "[sample]") {
    spn::Network net = fixtures::abc();
    std::vector<spn::Assignment> a = spn::sample(net, 100, 7);
    std::vector<spn::Assignment> b = spn::sample(net, 100, 7);
    std::vector<spn::Assignment> c = spn::sample(net, 100, 8);

    REQUIRE(a.size() == 100);
    bool identical = true, differs = false;
    for (size_t i = 0; i < a.size(); ++i) {
        identical = identical && a[i].bindings() == b[i].bindings();
        differs = differs || a[i].bindings() != c[i].bindings();
    }
    CHECK(identical);
    CHECK(differs);
}

TEST_CASE("a deterministic chain always yields its one configuration", "[sample]") {
    // weight-1 edges all the way down leave no choices to make
    spn::Variable v{"V", {"v0", "v1"}}, w{"W", {"w0", "w1"}};
    std::vector<spn::Node> n;
    n.push_back(spn::make_sum(0, {1}, {1.0}));
    n.push_back(spn::make_product(1, {2, 3}));
    n.push_back(spn::make_indicator(2, v, "v1"));
    n.push_back(spn::make_indicator(3, w, "w0"));
    spn::Network net({v, w}, std::move(n), 0);

    for (const spn::Assignment& s : spn::sample(net, 50, 123)) {
        REQUIRE(state_of(s, "V") == "v1");
        REQUIRE(state_of(s, "W") == "w0");
    }
}

TEST_CASE("empirical frequencies approach the model distribution", "[sample]") {
    spn::Network net = fixtures::abc();
    const int n = 100000;
    std::vector<spn::Assignment> draws = spn::sample(net, n, 20260815);

    int abc_count = 0, a_count = 0, b_count = 0, c_count = 0;
    for (const spn::Assignment& s : draws) {
        bool a_pos = state_of(s, "A") == "+a";
        bool b_pos = state_of(s, "B") == "+b";
        bool c_pos = state_of(s, "C") == "+c";
        if (a_pos && b_pos && !c_pos) ++abc_count;
        a_count += a_pos;
        b_count += b_pos;
        c_count += c_pos;
    }

    // P(+a,+b,-c) = 0.108; single-variable marginals from the evaluator
    CHECK(static_cast<double>(abc_count) / n == Approx(0.108).margin(0.005));
    CHECK(static_cast<double>(a_count) / n == Approx(0.3).margin(0.01));
    CHECK(static_cast<double>(b_count) / n ==
          Approx(spn::evaluate(net, {{"B", "+b"}}).value()).margin(0.01));
    CHECK(static_cast<double>(c_count) / n ==
          Approx(spn::evaluate(net, {{"C", "+c"}}).value()).margin(0.01));
}

TEST_CASE("gaussian leaves sample from their density", "[sample]") {
    spn::Variable x{"X", {}};
    std::vector<spn::Node> n;
    n.push_back(spn::make_gaussian(0, x, 2.0, 4.0));
    spn::Network net({x}, std::move(n), 0);

    double sum = 0.0, sq = 0.0;
    const int count = 20000;
    for (const spn::Assignment& s : spn::sample(net, count, 99)) {
        double v = std::get<double>(s.bindings().at("X"));
        sum += v;
        sq += v * v;
    }
    double mean = sum / count;
    CHECK(mean == Approx(2.0).margin(0.06));
    CHECK(sq / count - mean * mean == Approx(4.0).margin(0.2));
}

TEST_CASE("samples of a mixture follow the mixture weights", "[sample]") {
    spn::Network net = fixtures::incomplete_pair();
    // the 0.6 branch binds V1 only, the 0.4 branch binds V2 only; either
    // way the sampler must return a value for every scope variable it hits
    std::vector<spn::Assignment> draws = spn::sample(net, 10000, 5);
    int v1_plus = 0;
    for (const spn::Assignment& s : draws)
        if (s.binds("V1") && state_of(s, "V1") == "+v1") ++v1_plus;
    CHECK(v1_plus > 0);
}
