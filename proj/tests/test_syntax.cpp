#include "doctest.h"
#include "lamq/harness.hpp"
#include "lamq/syntax.hpp"

using namespace lamq;

namespace {

// de Bruijn serialization: bound variables as #k, free ones by name. Two
// terms are alpha-equivalent iff their serializations coincide, and
// substitution of a value for a free name is plain leaf replacement, which
// makes this an independent oracle for the capture-avoiding implementation.
std::string db(const TermPtr& t, std::vector<std::string>& env) {
    switch (t->kind) {
        case TermKind::Var: {
            for (size_t i = env.size(); i-- > 0;)
                if (env[i] == t->var) return "#" + std::to_string(env.size() - 1 - i);
            return t->var;
        }
        case TermKind::Abs: {
            env.push_back(t->var);
            std::string r = "(\\. " + db(t->a, env) + ")";
            env.pop_back();
            return r;
        }
        case TermKind::App:
            return "(" + db(t->a, env) + " " + db(t->b, env) + ")";
        case TermKind::Get: {
            env.push_back(t->var);
            std::string r = "(get " + t->loc + " . " + db(t->a, env) + ")";
            env.pop_back();
            return r;
        }
        case TermKind::Set:
            return "(set " + t->loc + " " + db(t->a, env) + " " + db(t->b, env) + ")";
    }
    return "?";
}

std::string db(const TermPtr& t) {
    std::vector<std::string> env;
    return db(t, env);
}

// substitution on serialized de Bruijn form: replace the free-name leaf
std::string db_subst(const std::string& body, const std::string& x, const std::string& v) {
    std::string out;
    size_t i = 0;
    while (i < body.size()) {
        if (isalpha((unsigned char)body[i])) {
            size_t j = i;
            while (j < body.size() && (isalnum((unsigned char)body[j]) || body[j] == '_')) ++j;
            std::string word = body.substr(i, j - i);
            bool keyword = word == "get" || word == "set";
            out += (word == x && !keyword) ? v : word;
            i = j;
        } else {
            out += body[i++];
        }
    }
    return out;
}

// brute-force closure of the adjacent-swap axiom, for small states
bool state_equiv_bfs(const State& a, const State& b) {
    auto key = [](const State& s) {
        std::string k;
        for (const auto& x : s.binds) k += x.loc + "=" + print_term(x.val.term) + ";";
        return k;
    };
    std::set<std::string> seen{key(a)};
    std::vector<State> frontier{a};
    while (!frontier.empty()) {
        std::vector<State> next;
        for (const auto& s : frontier) {
            if (key(s) == key(b)) return true;
            for (size_t i = 0; i + 1 < s.binds.size(); ++i) {
                if (s.binds[i].loc == s.binds[i + 1].loc) continue;
                State sw = s;
                std::swap(sw.binds[i], sw.binds[i + 1]);
                if (seen.insert(key(sw)).second) next.push_back(sw);
            }
        }
        frontier = std::move(next);
    }
    return false;
}

}  // namespace

TEST_CASE("parsing the reference terms") {
    TermPtr t = parse_term("(\\x. (x x) (y y)) (\\z. z)");
    REQUIRE(t->kind == TermKind::App);
    CHECK(t->a->kind == TermKind::Abs);
    CHECK(t->a->a->kind == TermKind::App);
    CHECK(term_eq(t->b, mk_abs("z", mk_var("z"))));

    CHECK(term_eq(parse_term("x"), mk_var("x")));

    TermPtr g = parse_term("get(l, y. y x)");
    REQUIRE(g->kind == TermKind::Get);
    CHECK(g->loc == "l");
    CHECK(g->var == "y");
    CHECK(term_eq(g->a, mk_app(mk_var("y"), mk_var("x"))));

    CHECK(term_eq(parse_term("λx. x"), parse_term("\\x. x")));
    CHECK_THROWS_AS(parse_term("(\\x. x"), ParseError);
    CHECK_THROWS_AS(parse_term("x )"), ParseError);
    CHECK_THROWS_AS(parse_term(""), ParseError);
}

TEST_CASE("gs validity") {
    CHECK(is_gs_valid(parse_term("x get(l, y. y)")));
    CHECK_FALSE(is_gs_valid(parse_term("(x x) y")));
    CHECK_THROWS_AS(require_gs_valid(parse_term("(x x) y")), GsValidityError);
}

TEST_CASE("comments and configurations") {
    Configuration c = parse_config("# the second reference program\n((\\x.get(l, y. y x)) (set(l, \\z.z, z)) | [])");
    CHECK(c.state.binds.empty());
    CHECK(c.term->kind == TermKind::App);
    // a parenthesized term is not a configuration
    Configuration d = parse_config("(x y)");
    CHECK(d.state.binds.empty());
    CHECK(term_eq(d.term, mk_app(mk_var("x"), mk_var("y"))));
    State s = parse_state("[l1 := \\x. x, l2 := y]");
    CHECK(s.binds.size() == 2);
    CHECK_THROWS_AS(parse_state("[l1 := x y]"), ParseError);
}

TEST_CASE("term size") {
    CHECK(term_size(mk_app(mk_var("x"), mk_var("y"))) == 1);
    CHECK(term_size(parse_term("(\\z. z) (y y)")) == 2);
    CHECK(term_size(parse_term("\\x. x x")) == 0);
    CHECK(term_size(parse_term("get(l, x. y y)")) == 1);
    CHECK(config_size({parse_term("x y"), parse_state("[l := \\a. a a]")}) == 1);
}

TEST_CASE("free variables") {
    CHECK(free_vars(parse_term("\\x. x y")) == std::set<std::string>{"y"});
    CHECK(free_vars(parse_term("get(l, y. y x)")) == std::set<std::string>{"x"});
    CHECK(free_vars(parse_term("x x")) == std::set<std::string>{"x"});
    CHECK(free_vars(parse_term("set(l, w, \\v. v)")) == std::set<std::string>{"w"});
}

TEST_CASE("substitution follows the de Bruijn oracle") {
    auto check_subst = [](const char* ts, const char* x, const char* vs) {
        TermPtr t = parse_term(ts);
        Value v(parse_term(vs));
        TermPtr got = substitute(t, x, v);
        CHECK(db(got) == db_subst(db(t), x, db(v.term)));
    };
    check_subst("x x", "x", "\\z. z");
    check_subst("y", "x", "\\z. z");
    check_subst("\\y. x", "x", "y");             // capture: binder must be renamed
    check_subst("\\y. \\y1. x y y1", "x", "y");  // the standard fresh name is taken
    check_subst("get(l, y. y x)", "x", "y");
    check_subst("set(l, x, x y)", "x", "\\w. w y");
    check_subst("(\\x. x) x", "x", "\\z. z z");

    CHECK(term_eq(substitute(parse_term("x x"), "x", Value(parse_term("\\z. z"))),
                  parse_term("(\\z. z) (\\z. z)")));
    CHECK(term_eq(substitute(parse_term("y"), "x", Value(parse_term("\\z. z"))), parse_term("y")));
    TermPtr renamed = substitute(parse_term("\\y. x"), "x", Value(mk_var("y")));
    REQUIRE(renamed->kind == TermKind::Abs);
    CHECK(renamed->var != "y");
    CHECK(term_eq(renamed->a, mk_var("y")));

    TermGen gen({.seed = 21, .max_depth = 4, .var_pool = {"x", "y"}, .loc_pool = {"l1", "l2"},
                 .calculus = System::GS});
    for (int i = 0; i < 200; ++i) {
        TermPtr t = gen.next_term();
        Value v = gen.next_value();
        CHECK(db(substitute(t, "x", v)) == db_subst(db(t), "x", db(v.term)));
        auto fv = free_vars(substitute(t, "x", v));
        auto bound = free_vars(t);
        bound.erase("x");
        auto fvv = free_vars(v.term);
        bound.insert(fvv.begin(), fvv.end());
        for (const auto& n : fv) CHECK(bound.count(n) == 1);
    }
}

TEST_CASE("substitution of values preserves size") {
    TermGen gen({.seed = 5, .max_depth = 4, .var_pool = {"x", "y"}, .loc_pool = {"l1"}, .calculus = System::GS});
    for (int i = 0; i < 200; ++i) {
        TermPtr t = gen.next_term();
        Value v = gen.next_value();
        CHECK(term_size(substitute(t, "x", v)) == term_size(t));
    }
}

TEST_CASE("alpha equivalence") {
    CHECK(alpha_eq(parse_term("\\x. x"), parse_term("\\z. z")));
    CHECK_FALSE(alpha_eq(parse_term("\\x. y"), parse_term("\\x. z")));
    CHECK(alpha_eq(parse_term("get(l, x. x)"), parse_term("get(l, w. w)")));
    CHECK_FALSE(alpha_eq(parse_term("get(l1, x. x)"), parse_term("get(l2, x. x)")));
    CHECK(alpha_eq(parse_term("\\x. \\y. x y"), parse_term("\\y. \\x. y x")));
    CHECK_FALSE(alpha_eq(parse_term("\\x. \\y. x"), parse_term("\\x. \\y. y")));
}

TEST_CASE("print-parse round trip is the identity up to alpha") {
    TermGen gen({.seed = 9, .max_depth = 5, .var_pool = {"x", "y"}, .loc_pool = {"l1", "l2"},
                 .calculus = System::GS});
    for (int i = 0; i < 300; ++i) {
        TermPtr t = gen.next_term();
        std::string p = print_term(t);
        CHECK(alpha_eq(parse_term(p), t));
        CHECK(print_term(parse_term(p)) == p);
    }
}

TEST_CASE("state equivalence") {
    State s1 = parse_state("[l1 := x, l2 := y]");
    State s2 = parse_state("[l2 := y, l1 := x]");
    CHECK(state_equiv(s1, s2));
    State d1 = parse_state("[l1 := x, l1 := y]");
    State d2 = parse_state("[l1 := y, l1 := x]");
    CHECK_FALSE(state_equiv(d1, d2));
    CHECK(state_equiv(State{}, State{}));
    CHECK_FALSE(state_equiv(s1, parse_state("[l1 := x]")));
}

TEST_CASE("state equivalence is an equivalence and matches the swap closure") {
    std::mt19937_64 rng(77);
    const char* locs[] = {"l1", "l2"};
    const char* vals[] = {"x", "y", "z"};
    auto gen_state = [&] {
        State s;
        size_t n = rng() % 5;
        for (size_t i = 0; i < n; ++i)
            s.binds.push_back({locs[rng() % 2], Value(mk_var(vals[rng() % 3]))});
        return s;
    };
    for (int i = 0; i < 200; ++i) {
        State a = gen_state(), b = gen_state(), c = gen_state();
        CHECK(state_equiv(a, a));
        CHECK(state_equiv(a, b) == state_equiv(b, a));
        if (state_equiv(a, b) && state_equiv(b, c)) CHECK(state_equiv(a, c));
        CHECK(state_equiv(a, b) == state_equiv_bfs(a, b));
    }
}

TEST_CASE("lookup is stable under state equivalence") {
    // exhaustive over states with <= 4 bindings drawn from 2 locations
    const char* locs[] = {"l1", "l2"};
    const char* vals[] = {"x", "y"};
    std::vector<State> all;
    std::function<void(State, int)> build = [&](State s, int depth) {
        all.push_back(s);
        if (depth == 0) return;
        for (const char* l : locs)
            for (const char* v : vals) {
                State t = s;
                t.binds.push_back({l, Value(mk_var(v))});
                build(t, depth - 1);
            }
    };
    build(State{}, 4);
    for (const auto& a : all)
        for (const auto& b : all)
            if (state_equiv(a, b))
                for (const char* l : locs) {
                    auto va = lookup(a, l), vb = lookup(b, l);
                    CHECK(va.has_value() == vb.has_value());
                    if (va) CHECK(term_eq(va->term, vb->term));
                }
}
