#include "doctest.h"
#include "lamq/golden.hpp"
#include "lamq/harness.hpp"
#include "lamq/io.hpp"

using namespace lamq;

TEST_CASE("typing cbv normal forms") {
    DerivPtr d = type_normal_form_v(parse_term("(\\z. z) (y y)"));
    CHECK_FALSE(check_derivation_v(d));
    CHECK(is_tight_derivation(d));
    CHECK(d->conclusion.counters == Counters{0, 0, 2});

    DerivPtr x = type_normal_form_v(mk_var("x"));
    CHECK(x->rule == Rule::Ax);
    CHECK(type_eq(*asg_type(x->conclusion), ty_vr()));
    CHECK(x->conclusion.counters == Counters{});

    DerivPtr n = type_normal_form_v(parse_term("x (\\y. y (\\z. z))"));
    CHECK(n->conclusion.counters == Counters{0, 0, 1});

    CHECK_THROWS_AS(type_normal_form_v(parse_term("(\\x. x) (\\z. z)")), SynthError);
}

TEST_CASE("typing states") {
    DerivPtr e = type_state(State{});
    CHECK(e->rule == Rule::Emp);
    CHECK(e->conclusion.counters == Counters{});

    DerivPtr one = type_state(parse_state("[l := \\z. z]"));
    CHECK(one->rule == Rule::Upd);
    CHECK_FALSE(check_derivation_gs(one));
    CHECK(is_tight_derivation(one));
    StateType st = *asg_state_type(one->conclusion);
    REQUIRE(st.entries.count("l"));
    CHECK(multi_empty(st.entries.at("l")));

    DerivPtr three = type_state(parse_state("[l1 := x, l2 := y, l3 := \\a. a]"));
    CHECK_FALSE(check_derivation_gs(three));
    CHECK(state_type_dom(*asg_state_type(three->conclusion)) ==
          std::set<std::string>{"l1", "l2", "l3"});

    CHECK_THROWS_AS(type_state(parse_state("[l := x, l := y]")), SynthError);
}

TEST_CASE("typing gs normal forms against a state type") {
    StateType empty;
    DerivPtr z = type_normal_form_gs(mk_var("z"), empty);
    CHECK(z->rule == Rule::Lift);
    CHECK(print_type(*asg_type(z->conclusion)) == "{} => vr x {}");
    CHECK(z->conclusion.counters == Counters{});

    StateType with_l = state_type_single("l", mk_multi({ty_vr()}));
    DerivPtr ab = type_normal_form_gs(parse_term("\\x. x y"), with_l);
    TypePtr mon = *asg_type(ab->conclusion);
    CHECK(type_eq(mon->out.ty, ty_ab()));
    CHECK(state_type_eq(mon->s_in, with_l));
    CHECK(state_type_eq(mon->out.state, with_l));

    DerivPtr app = type_normal_form_gs(parse_term("x (\\y. y)"), empty);
    CHECK(app->rule == Rule::AppP1);
    CHECK(app->conclusion.counters == Counters{0, 0, 1});
    CHECK_FALSE(check_derivation_gs(app));

    CHECK_THROWS_AS(type_normal_form_gs(parse_term("(\\x. x) y"), empty), SynthError);
    StateType loose = state_type_single("l", mk_multi({ty_arrow(mk_multi({}), ty_vr())}));
    CHECK_THROWS_AS(type_normal_form_gs(mk_var("z"), loose), SynthError);
}

TEST_CASE("synthesis reproduces the reference counters") {
    SynthResultV r = synthesize_tight_v(parse_term("(\\x. (x x) (y y)) (\\z. z)"));
    REQUIRE(r.status == SynthResultV::Status::Ok);
    CHECK(r.derivation->conclusion.counters == Counters{2, 0, 2});
    CHECK(env_eq(r.derivation->conclusion.env, env_single("y", mk_multi({ty_vr(), ty_vr()}))));
    CHECK(type_eq(*asg_type(r.derivation->conclusion), ty_neut()));

    SynthResultV nf = synthesize_tight_v(parse_term("x (\\y. y)"));
    REQUIRE(nf.status == SynthResultV::Status::Ok);
    CHECK(nf.derivation->conclusion.counters == Counters{0, 0, 1});

    SynthResultV omega = synthesize_tight_v(parse_term("(\\x. x x) (\\x. x x)"), 200);
    CHECK(omega.status == SynthResultV::Status::FuelExhausted);

    SynthResultGs g = synthesize_tight_gs(parse_config("((\\x.get(l, y. y x)) (set(l, \\z.z, z)) | [])"));
    REQUIRE(g.status == SynthResultGs::Status::Ok);
    CHECK(g.derivation->conclusion.counters == Counters{2, 2, 0});

    SynthResultGs blocked = synthesize_tight_gs(parse_config("(get(l, x. x) | [])"));
    CHECK(blocked.status == SynthResultGs::Status::BlockedFinal);

    SynthResultGs idle = synthesize_tight_gs(parse_config("(y | [l := \\z. z])"));
    REQUIRE(idle.status == SynthResultGs::Status::Ok);
    CHECK(idle.derivation->conclusion.counters == Counters{});

    CHECK_THROWS_AS(synthesize_tight_gs(parse_config("((x x) y | [])")), SynthError);
}

TEST_CASE("soundness certificates") {
    DerivPtr d1 = golden::example1_derivation();
    Certificate c1 = verify_soundness(System::V, d1);
    CHECK(c1.match);
    CHECK(c1.observed.b == 2);
    CHECK(c1.observed.normal_size == 2);

    DerivPtr d2 = golden::example2_derivation();
    Certificate c2 = verify_soundness(System::GS, d2);
    CHECK(c2.match);
    CHECK(c2.observed.b == 2);
    CHECK(c2.observed.m == 2);
    CHECK(c2.observed.normal_size == 0);

    // a corrupted tree is stopped by the checker before certification
    Judgement j = d1->conclusion;
    j.counters = {3, 0, 2};
    DerivPtr bad = mk_deriv(d1->rule, j, d1->premises);
    CHECK(check_derivation_v(bad).has_value());

    // non-tight derivations are refused
    DerivPtr arrow = build_ax("x", ty_arrow(mk_multi({ty_ab()}), ty_ab()));
    CHECK_THROWS_AS(verify_soundness(System::V, arrow), TransformError);
}

TEST_CASE("synthesized derivations satisfy the metatheory battery") {
    TermGen gen({.seed = 51, .max_depth = 4, .var_pool = {"x", "y"}, .loc_pool = {"l1", "l2"},
                 .calculus = System::GS, .normalizing_only = true});
    for (int i = 0; i < 40; ++i) {
        Configuration c = gen.next_config();
        SynthResultGs r = synthesize_tight_gs(c);
        REQUIRE(r.status == SynthResultGs::Status::Ok);
        CHECK_FALSE(check_derivation_gs(r.derivation));
        CHECK(is_tight_derivation(r.derivation));
        CHECK(validate_metatheory(System::GS, r.derivation).all_pass());
        Certificate cert = verify_soundness(System::GS, r.derivation);
        CHECK(cert.match);
    }
}

TEST_CASE("machine-readable output formats are stable") {
    auto ev = eval_gs(parse_config("(set(l, \\a. a, x) | [])"));
    CHECK(trace_to_json(ev).dump() ==
          R"js({"initial":"(set(l, \\a. a, x) | [])","result":{"b":0,"final":"normal","m":1,"size":0},"steps":[{"label":"set","state":"[l := \\a. a]","term":"x"}]})js");

    Certificate cert = verify_soundness(System::V, golden::example1_derivation());
    CHECK(certificate_to_text(cert) == "predicted (2, 2), observed b=2 size=2 -> match");
    CHECK(certificate_to_json(cert).dump() ==
          R"js({"observed":{"b":2,"fuel_exhausted":false,"size":2},"predicted":[2,2],"system":"cbv","verdict":"match"})js");
}

TEST_CASE("normal forms synthesize at zero steps and exact size") {
    TermGen gen({.seed = 61, .max_depth = 4, .var_pool = {"x", "y"}, .loc_pool = {},
                 .calculus = System::V, .normalizing_only = true});
    for (int i = 0; i < 100; ++i) {
        TermPtr t = gen.next_term();
        if (!is_normal_cbv(t)) continue;
        SynthResultV r = synthesize_tight_v(t);
        REQUIRE(r.status == SynthResultV::Status::Ok);
        CHECK(r.derivation->conclusion.counters == Counters{0, 0, term_size(t)});
    }
}
