#include "doctest.h"
#include "lamq/harness.hpp"

using namespace lamq;

TEST_CASE("deterministic cbv steps") {
    TermPtr t = parse_term("(\\x. (x x) (y y)) (\\z. z)");
    auto s1 = step_cbv(t);
    REQUIRE(s1);
    CHECK(alpha_eq(*s1, parse_term("((\\z. z) (\\z. z)) (y y)")));

    CHECK_FALSE(step_cbv(parse_term("x y")));

    TermPtr omega = parse_term("(\\x. x x) (\\x. x x)");
    auto so = step_cbv(omega);
    REQUIRE(so);
    CHECK(alpha_eq(*so, omega));
}

TEST_CASE("one-step reducts of the weak relation") {
    TermPtr t = parse_term("((\\x. x) (\\z. z)) ((\\x. x) (\\w. w))");
    auto all = step_all_cbv(t);
    REQUIRE(all.size() == 2);
    CHECK_FALSE(term_eq(all[0], all[1]));

    CHECK(step_all_cbv(parse_term("x (\\y. y)")).empty());

    auto single = step_all_cbv(parse_term("(\\x. x) (\\z. z)"));
    REQUIRE(single.size() == 1);
    CHECK(alpha_eq(single[0], parse_term("\\z. z")));
}

TEST_CASE("cbv normal and neutral forms") {
    CHECK(is_normal_cbv(parse_term("x (\\y. y (\\z. z))")));
    CHECK(is_normal_cbv(parse_term("(\\x. x) (y (\\z. z))")));
    CHECK_FALSE(is_normal_cbv(parse_term("(\\x. x) (\\z. z)")));
    CHECK(is_neutral_cbv(parse_term("x y")));
    CHECK_FALSE(is_neutral_cbv(parse_term("\\x. x")));
    // ne ne and ne no shapes
    CHECK(is_neutral_cbv(parse_term("(x y) (z w)")));
    CHECK(is_neutral_cbv(parse_term("(x y) (\\z. z)")));
}

TEST_CASE("characterization of normal forms on the small enumeration") {
    for (const auto& t : enumerate_terms(6, {"x", "y"})) {
        CHECK(is_normal_cbv(t) == !step_cbv(t).has_value());
        CHECK(is_normal_cbv(t) == oracle_normal(t));
    }
}

TEST_CASE("cbv evaluation with fuel") {
    auto r = eval_cbv(parse_term("(\\x. (x x) (y y)) (\\z. z)"), 10);
    CHECK_FALSE(r.exhausted);
    CHECK(r.beta == 2);
    CHECK(alpha_eq(r.last, parse_term("(\\z. z) (y y)")));
    CHECK(term_size(r.last) == 2);

    auto v = eval_cbv(parse_term("x"), 0);
    CHECK_FALSE(v.exhausted);
    CHECK(v.beta == 0);

    auto om = eval_cbv(parse_term("(\\x. x x) (\\x. x x)"), 100);
    CHECK(om.exhausted);
}

TEST_CASE("lookup and domain") {
    State s = parse_state("[l := \\z. z]");
    auto v = lookup(s, "l");
    REQUIRE(v);
    CHECK(alpha_eq(v->term, parse_term("\\z. z")));
    CHECK_FALSE(lookup(State{}, "l"));
    State dup = parse_state("[l := x, l := y]");
    auto first = lookup(dup, "l");
    REQUIRE(first);
    CHECK(term_eq(first->term, mk_var("x")));
    CHECK(state_dom(dup) == std::set<std::string>{"l"});
}

TEST_CASE("set then get reads back the stored value") {
    auto r = eval_gs(parse_config("(set(l, \\w. w, get(l, x. x)) | [l := y])"));
    CHECK(r.mem == 2);
    CHECK(alpha_eq(r.final.term, parse_term("\\w. w")));
    CHECK(term_eq(lookup(r.final.state, "l")->term, parse_term("\\w. w")));
    // get then set writes back what was read
    auto w = eval_gs(parse_config("(get(l, x. set(l, x, x)) | [l := \\a. a])"));
    CHECK(w.mem == 2);
    CHECK(state_equiv(w.final.state, parse_state("[l := \\a. a]")));
}

TEST_CASE("state write replaces the existing binding") {
    State s = parse_state("[l1 := x, l2 := y]");
    State w = state_write(s, "l1", Value(mk_var("z")));
    CHECK(w.binds.size() == 2);
    CHECK(term_eq(lookup(w, "l1")->term, mk_var("z")));
    CHECK(term_eq(lookup(w, "l2")->term, mk_var("y")));
    CHECK_FALSE(has_duplicate_locations(w));
    State fresh = state_write(s, "l3", Value(mk_var("w")));
    CHECK(fresh.binds.size() == 3);
    CHECK(fresh.binds.front().loc == "l3");
}

TEST_CASE("gs steps") {
    Configuration c0 = parse_config("((\\x.get(l, y. y x)) (set(l, \\z.z, z)) | [])");
    auto s = step_gs(c0);
    REQUIRE(s);
    CHECK(s->first == StepLabel::SetStep);
    CHECK(alpha_eq(s->second, parse_config("((\\x. get(l, y. y x)) z | [l := \\z. z])")));

    CHECK_FALSE(step_gs(parse_config("(get(l, x. x) | [])")));
    CHECK_FALSE(step_gs(parse_config("(y | [l := \\z. z])")));
    CHECK(step_gs(parse_config("(set(l, x, y) | [])")));
}

TEST_CASE("gs evaluation of the reference configuration") {
    auto r = eval_gs(parse_config("((\\x.get(l, y. y x)) (set(l, \\z.z, z)) | [])"), 10);
    CHECK_FALSE(r.exhausted);
    CHECK(r.beta == 2);
    CHECK(r.mem == 2);
    CHECK(alpha_eq(r.final, parse_config("(z | [l := \\z. z])")));
    REQUIRE(r.trace.steps.size() == 4);
    CHECK(r.trace.steps[0].label == StepLabel::SetStep);
    CHECK(r.trace.steps[1].label == StepLabel::Beta);
    CHECK(r.trace.steps[2].label == StepLabel::GetStep);
    CHECK(r.trace.steps[3].label == StepLabel::Beta);

    auto idle = eval_gs(parse_config("(z | [l := \\z. z])"));
    CHECK(idle.beta == 0);
    CHECK(idle.mem == 0);

    auto blocked = eval_gs(parse_config("((\\y. y get(l, x. x)) z | [])"));
    CHECK(blocked.beta == 1);
    CHECK(blocked.mem == 0);
    CHECK(is_blocked(blocked.final));
    CHECK(alpha_eq(blocked.final, parse_config("(z get(l, x. x) | [])")));
}

TEST_CASE("blocked and final configurations") {
    CHECK(is_blocked(parse_config("(z get(l, x. x) | [])")));
    Configuration unblocked{parse_term("(\\x. x) (y z)"), parse_state("[l1 := x]")};
    CHECK(is_final(unblocked));
    CHECK_FALSE(is_blocked(unblocked));
    CHECK_FALSE(is_final(parse_config("(set(l, x, y) | [])")));
    CHECK(is_normal_gs(parse_term("(\\x. x) (y z)")));
    CHECK_FALSE(is_normal_gs(parse_term("(\\x. x) y")));
}

TEST_CASE("normal iff final on fuzzed configurations") {
    TermGen gen({.seed = 33, .max_depth = 4, .var_pool = {"x", "y"}, .loc_pool = {"l1", "l2"},
                 .calculus = System::GS});
    for (int i = 0; i < 300; ++i) {
        Configuration c = gen.next_config();
        CHECK(is_final(c) == !step_gs(c).has_value());
    }
}

TEST_CASE("determinism and trace consistency") {
    TermGen gen({.seed = 4, .max_depth = 4, .var_pool = {"x", "y"}, .loc_pool = {"l1", "l2"},
                 .calculus = System::GS});
    for (int i = 0; i < 100; ++i) {
        Configuration c = gen.next_config();
        auto r1 = eval_gs(c, 200);
        auto r2 = eval_gs(c, 200);
        CHECK(r1.beta == r2.beta);
        CHECK(r1.mem == r2.mem);
        if (!r1.exhausted) CHECK(alpha_eq(r1.final, r2.final));
        // replay
        Configuration cur = r1.trace.initial;
        for (const auto& st : r1.trace.steps) {
            auto n = step_gs(cur);
            REQUIRE(n);
            CHECK(n->first == st.label);
            CHECK(alpha_eq(n->second, st.after));
            cur = st.after;
        }
    }
}

TEST_CASE("diamond property on fuzzed cbv terms") {
    TermGen gen({.seed = 6, .max_depth = 5, .var_pool = {"x", "y"}, .loc_pool = {}, .calculus = System::V});
    for (int i = 0; i < 200; ++i) {
        TermPtr t = gen.next_term();
        auto all = step_all_cbv(t);
        if (auto s = step_cbv(t)) {
            bool found = false;
            for (const auto& u : all) found |= term_eq(u, *s);
            CHECK(found);
        }
        for (size_t a = 0; a < all.size(); ++a)
            for (size_t b = a + 1; b < all.size(); ++b) {
                if (term_eq(all[a], all[b])) continue;
                bool join = false;
                for (const auto& u1 : step_all_cbv(all[a]))
                    for (const auto& u2 : step_all_cbv(all[b])) join |= alpha_eq(u1, u2);
                CHECK(join);
            }
    }
}
