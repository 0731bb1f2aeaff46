// Acceptance suite: one test case per shipping criterion, each printing a
// single pass/fail line with its measurements.

#include <chrono>
#include <cstdio>
#include <random>

#include "doctest.h"
#include "lamq/golden.hpp"
#include "lamq/harness.hpp"
#include "lamq/io.hpp"

using namespace lamq;

namespace {

struct Stopwatch {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }
};

void line(int criterion, bool pass, const std::string& what) {
    std::printf("criterion %d: %s -- %s\n", criterion, pass ? "PASS" : "FAIL", what.c_str());
    std::fflush(stdout);
}

}  // namespace

TEST_CASE("criterion 1: first reference program, plain cbv") {
    Stopwatch sw;
    bool ok = true;
    TermPtr t = parse_term("(\\x.(x x)(y y))(\\z.z)");

    SynthResultV r = synthesize_tight_v(t);
    ok &= r.status == SynthResultV::Status::Ok;
    ok &= !check_derivation_v(r.derivation).has_value();
    ok &= is_tight_derivation(r.derivation);
    ok &= r.derivation->conclusion.counters == Counters{2, 0, 2};
    ok &= env_eq(r.derivation->conclusion.env, env_single("y", mk_multi({ty_vr(), ty_vr()})));
    ok &= type_eq(*asg_type(r.derivation->conclusion), ty_neut());

    EvalResultCbv ev = eval_cbv(t);
    ok &= !ev.exhausted && ev.beta == 2;
    ok &= alpha_eq(ev.last, parse_term("(\\z.z)(y y)"));
    ok &= term_size(ev.last) == 2;

    double ms = sw.ms();
    ok &= ms < 1000.0;
    line(1, ok, "tight derivation (2,2) under y:[vr, vr] : n; two beta steps to a size-2 normal form (" +
                    std::to_string(ms) + " ms)");
    CHECK(ok);
}

TEST_CASE("criterion 2: second reference program, global state") {
    Stopwatch sw;
    bool ok = true;
    Configuration c = parse_config("((\\x.get(l, y. y x)) (set(l, \\z.z, z)) | [])");

    SynthResultGs r = synthesize_tight_gs(c);
    ok &= r.status == SynthResultGs::Status::Ok;
    ok &= !check_derivation_gs(r.derivation).has_value();
    ok &= is_tight_derivation(r.derivation);
    ok &= r.derivation->conclusion.counters == Counters{2, 2, 0};

    EvalResultGs ev = eval_gs(c);
    ok &= !ev.exhausted && ev.beta == 2 && ev.mem == 2;
    ok &= ev.trace.steps.size() == 4;
    if (ev.trace.steps.size() == 4) {
        ok &= ev.trace.steps[0].label == StepLabel::SetStep;
        ok &= ev.trace.steps[1].label == StepLabel::Beta;
        ok &= ev.trace.steps[2].label == StepLabel::GetStep;
        ok &= ev.trace.steps[3].label == StepLabel::Beta;
    }
    ok &= alpha_eq(ev.final, parse_config("(z | [l := \\z.z])"));

    double ms = sw.ms();
    ok &= ms < 1000.0;
    line(2, ok, "tight derivation (2,2,0); four steps set/beta/get/beta to (z | [l := \\z. z]) (" +
                    std::to_string(ms) + " ms)");
    CHECK(ok);
}

TEST_CASE("criterion 3: exhaustive normal-form characterization") {
    Stopwatch sw;
    auto all = enumerate_terms(8, {"x", "y"});
    std::uint64_t mismatches = 0;
    for (const auto& t : all)
        if (is_normal_cbv(t) != !step_cbv(t).has_value()) ++mismatches;
    double ms = sw.ms();
    bool ok = mismatches == 0 && ms < 60000.0;
    line(3, ok, std::to_string(all.size()) + " terms up to 8 nodes over 2 names, " +
                    std::to_string(mismatches) + " mismatches (" + std::to_string(ms) + " ms)");
    CHECK(ok);
}

TEST_CASE("criterion 4: diamond property") {
    Stopwatch sw;
    TermGen gen({.seed = 1004, .max_depth = 5, .var_pool = {"x", "y"}, .loc_pool = {},
                 .calculus = System::V});
    std::uint64_t counterexamples = 0, pairs = 0;
    for (int i = 0; i < 1000; ++i) {
        TermPtr t = gen.next_term();
        auto all = step_all_cbv(t);
        for (size_t a = 0; a < all.size(); ++a)
            for (size_t b = a + 1; b < all.size(); ++b) {
                if (term_eq(all[a], all[b])) continue;
                ++pairs;
                bool join = false;
                for (const auto& u1 : step_all_cbv(all[a]))
                    for (const auto& u2 : step_all_cbv(all[b])) join |= alpha_eq(u1, u2);
                if (!join) ++counterexamples;
            }
    }
    double ms = sw.ms();
    bool ok = counterexamples == 0 && ms < 60000.0;
    line(4, ok, "1000 terms, " + std::to_string(pairs) + " divergent pairs, " +
                    std::to_string(counterexamples) + " counterexamples (" + std::to_string(ms) + " ms)");
    CHECK(ok);
}

TEST_CASE("criterion 5: completeness/soundness round trip") {
    Stopwatch sw;
    std::uint64_t v_ok = 0, gs_ok = 0, failures = 0;

    TermGen vgen({.seed = 1005, .max_depth = 5, .var_pool = {"x", "y"}, .loc_pool = {},
                  .calculus = System::V, .normalizing_only = true});
    for (int i = 0; i < 500; ++i) {
        TermPtr t = vgen.next_term();
        SynthResultV r = synthesize_tight_v(t);
        bool good = r.status == SynthResultV::Status::Ok &&
                    !check_derivation_v(r.derivation).has_value() && is_tight_derivation(r.derivation) &&
                    validate_metatheory(System::V, r.derivation).all_pass() &&
                    verify_soundness(System::V, r.derivation).match;
        good ? ++v_ok : ++failures;
    }

    TermGen ggen({.seed = 2005, .max_depth = 5, .var_pool = {"x", "y"}, .loc_pool = {"l1", "l2"},
                  .calculus = System::GS, .normalizing_only = true});
    for (int i = 0; i < 500; ++i) {
        Configuration c = ggen.next_config();
        SynthResultGs r = synthesize_tight_gs(c);
        bool good = r.status == SynthResultGs::Status::Ok &&
                    !check_derivation_gs(r.derivation).has_value() && is_tight_derivation(r.derivation) &&
                    validate_metatheory(System::GS, r.derivation).all_pass() &&
                    verify_soundness(System::GS, r.derivation).match;
        good ? ++gs_ok : ++failures;
    }

    double ms = sw.ms();
    bool ok = v_ok == 500 && gs_ok == 500 && ms < 300000.0;
    line(5, ok, std::to_string(v_ok) + "/500 cbv and " + std::to_string(gs_ok) +
                    "/500 gs round trips matched exactly (" + std::to_string(ms) + " ms)");
    CHECK(ok);
}

TEST_CASE("criterion 6: counter arithmetic of the lemmas") {
    Stopwatch sw;
    std::uint64_t derivations_reduced = 0, reductions_checked = 0, subst_checked = 0, failures = 0;

    // subject reduction: exactly one counter drops by one, everything else
    // fixed, on tight derivations of terms that actually step
    TermGen vgen({.seed = 1006, .max_depth = 5, .var_pool = {"x", "y"}, .loc_pool = {},
                  .calculus = System::V, .normalizing_only = true});
    TermGen ggen({.seed = 2006, .max_depth = 4, .var_pool = {"x", "y"}, .loc_pool = {"l1", "l2"},
                  .calculus = System::GS, .normalizing_only = true});
    for (std::uint64_t made = 0; made < 250;) {
        TermPtr t = vgen.next_term();
        if (is_normal_cbv(t)) continue;
        ++made;
        SynthResultV r = synthesize_tight_v(t);
        if (r.status != SynthResultV::Status::Ok) {
            ++failures;
            continue;
        }
        ++derivations_reduced;
        DerivPtr d = r.derivation;
        while (step_cbv(*subj_term(d->conclusion))) {
            DerivPtr next = subject_reduction_v(d);
            const Counters &a = d->conclusion.counters, &b = next->conclusion.counters;
            bool good = b.b == a.b - 1 && b.m == 0 && b.sz == a.sz &&
                        env_eq(next->conclusion.env, d->conclusion.env) &&
                        assigned_eq(next->conclusion.assigned, d->conclusion.assigned);
            good ? ++reductions_checked : ++failures;
            d = next;
        }
    }
    for (std::uint64_t made = 0; made < 250;) {
        Configuration c = ggen.next_config();
        if (!step_gs(c)) continue;
        ++made;
        SynthResultGs r = synthesize_tight_gs(c);
        if (r.status != SynthResultGs::Status::Ok) {
            ++failures;
            continue;
        }
        ++derivations_reduced;
        DerivPtr d = r.derivation;
        while (auto step = step_gs(*subj_config(d->conclusion))) {
            DerivPtr next = subject_reduction_gs(d);
            const Counters &a = d->conclusion.counters, &b = next->conclusion.counters;
            bool beta = step->first == StepLabel::Beta;
            bool good = (beta ? (b.b == a.b - 1 && b.m == a.m) : (b.b == a.b && b.m == a.m - 1)) &&
                        b.sz == a.sz && env_eq(next->conclusion.env, d->conclusion.env) &&
                        assigned_eq(next->conclusion.assigned, d->conclusion.assigned);
            good ? ++reductions_checked : ++failures;
            d = next;
        }
    }

    // substitution / anti-substitution: counter sums are exact both ways
    TermGen sgen({.seed = 3006, .max_depth = 4, .var_pool = {"x", "y"}, .loc_pool = {"l1"},
                  .calculus = System::GS});
    int rounds = 0;
    for (int i = 0; i < 2500 && rounds < 500; ++i) {
        TermPtr t = sgen.next_term();
        Value v = sgen.next_value();
        TermPtr sub = substitute(t, "x", v);
        if (eval_gs({sub, State{}}, 300).exhausted) continue;
        SynthResultGs sr = synthesize_tight_gs({sub, State{}}, 300);
        if (sr.status != SynthResultGs::Status::Ok) continue;
        ++rounds;
        DerivPtr dsub = sr.derivation->premises[0];
        try {
            AntiSubst parts = antisubst_derivation(System::GS, dsub, t, "x", v);
            bool good =
                parts.dt->conclusion.counters + parts.dv->conclusion.counters == dsub->conclusion.counters &&
                !check_derivation_gs(parts.dt).has_value() && !check_derivation_gs(parts.dv).has_value();
            DerivPtr again = subst_derivation(System::GS, parts.dt, "x", parts.dv);
            good &= again->conclusion.counters == dsub->conclusion.counters &&
                    env_eq(again->conclusion.env, dsub->conclusion.env) &&
                    !check_derivation_gs(again).has_value();
            good ? ++subst_checked : ++failures;
        } catch (const TransformError&) {
            ++failures;
        }
    }

    double ms = sw.ms();
    bool ok = failures == 0 && derivations_reduced == 500 && subst_checked >= 500;
    line(6, ok, std::to_string(derivations_reduced) + " derivations reduced (" +
                    std::to_string(reductions_checked) + " steps) and " + std::to_string(subst_checked) +
                    " substitution round trips, " + std::to_string(failures) + " failures (" +
                    std::to_string(ms) + " ms)");
    CHECK(ok);
}

TEST_CASE("criterion 7: blocked configurations are refused") {
    Stopwatch sw;
    // get-heavy generation on empty states
    TermGen gen({.seed = 1007, .max_depth = 4, .var_pool = {"x", "y"}, .loc_pool = {"l1", "l2"},
                 .calculus = System::GS});
    std::uint64_t refused = 0, leaked = 0, collected = 0;
    while (collected < 200) {
        Configuration c{gen.next_term(), State{}};
        EvalResultGs ev = eval_gs(c, 500);
        if (ev.exhausted || !is_blocked(ev.final)) continue;
        ++collected;
        SynthResultGs r = synthesize_tight_gs(c, 500);
        if (r.status == SynthResultGs::Status::BlockedFinal && !r.derivation)
            ++refused;
        else
            ++leaked;
    }
    double ms = sw.ms();
    bool ok = refused == 200 && leaked == 0;
    line(7, ok, "200 blocking configurations, " + std::to_string(refused) + " refused, " +
                    std::to_string(leaked) + " leaked derivations (" + std::to_string(ms) + " ms)");
    CHECK(ok);
}

namespace {

struct NodeRef {
    std::vector<size_t> path;
    const Derivation* node;
};

void collect_nodes(const DerivPtr& d, std::vector<size_t>& path, std::vector<NodeRef>& out) {
    out.push_back({path, d.get()});
    for (size_t i = 0; i < d->premises.size(); ++i) {
        path.push_back(i);
        collect_nodes(d->premises[i], path, out);
        path.pop_back();
    }
}

DerivPtr with_conclusion(const DerivPtr& d, const std::vector<size_t>& path, size_t depth,
                         const Judgement& j) {
    if (depth == path.size()) return mk_deriv(d->rule, j, d->premises);
    auto prems = d->premises;
    prems[path[depth]] = with_conclusion(prems[path[depth]], path, depth + 1, j);
    return mk_deriv(d->rule, d->conclusion, std::move(prems));
}

bool path_related(const std::vector<size_t>& a, const std::vector<size_t>& b) {
    size_t n = std::min(a.size(), b.size());
    for (size_t i = 0; i < n; ++i)
        if (a[i] != b[i]) return false;
    return true;  // one is a prefix of the other
}

// one random single-field mutation at the addressed node; returns false when
// the node offers no field of the requested kind
bool mutate(Judgement& j, int kind, std::mt19937_64& rng, System sys) {
    switch (kind) {
        case 0: {  // counter +-1
            int which = sys == System::V ? (int)(rng() % 2) * 2 : (int)(rng() % 3);
            std::uint64_t* c = which == 0 ? &j.counters.b : which == 1 ? &j.counters.m : &j.counters.sz;
            *c = (*c == 0 || rng() % 2 == 0) ? *c + 1 : *c - 1;
            return true;
        }
        case 1: {  // drop a multiset element from the environment
            if (j.env.m.empty()) return false;
            auto it = j.env.m.begin();
            std::advance(it, rng() % j.env.m.size());
            Multi m = it->second;
            m.elems.erase(m.elems.begin() + rng() % m.elems.size());
            if (multi_empty(m))
                j.env.m.erase(it);
            else
                it->second = m;
            return true;
        }
        default: {  // remove a state-type entry
            auto* ty = std::get_if<TypePtr>(&j.assigned);
            if (ty && (*ty)->kind == TypeKind::Monadic) {
                const Type& mon = **ty;
                if (!mon.s_in.entries.empty()) {
                    StateType in = mon.s_in;
                    in.entries.erase(in.entries.begin());
                    j.assigned = ty_monadic(in, mon.out);
                    return true;
                }
                if (!mon.out.state.entries.empty()) {
                    ConfigType out = mon.out;
                    out.state.entries.erase(out.state.entries.begin());
                    j.assigned = ty_monadic(mon.s_in, out);
                    return true;
                }
                return false;
            }
            if (auto* st = std::get_if<StateType>(&j.assigned)) {
                if (st->entries.empty()) return false;
                StateType s = *st;
                s.entries.erase(s.entries.begin());
                j.assigned = s;
                return true;
            }
            return false;
        }
    }
}

}  // namespace

TEST_CASE("criterion 8: mutation rejection on the golden derivations") {
    Stopwatch sw;
    std::uint64_t rejected = 0, accepted = 0, bad_path = 0;
    for (System sys : {System::V, System::GS}) {
        DerivPtr d = sys == System::V ? golden::example1_derivation() : golden::example2_derivation();
        REQUIRE_FALSE(check_derivation(sys, d).has_value());
        std::vector<NodeRef> nodes;
        std::vector<size_t> path;
        collect_nodes(d, path, nodes);
        std::mt19937_64 rng(1008 + (sys == System::GS));
        int made = 0;
        while (made < 50) {
            const NodeRef& target = nodes[rng() % nodes.size()];
            Judgement j = target.node->conclusion;
            int kind = sys == System::V ? (int)(rng() % 2) : (int)(rng() % 3);
            if (!mutate(j, kind, rng, sys)) continue;
            // skip no-op mutations (possible when a dropped element leaves an
            // equal judgement; none expected, defensive)
            DerivPtr mutated = with_conclusion(d, target.path, 0, j);
            ++made;
            auto r = check_derivation(sys, mutated);
            if (!r) {
                ++accepted;
                continue;
            }
            ++rejected;
            if (!path_related(r->path, target.path)) ++bad_path;
        }
    }
    double ms = sw.ms();
    bool ok = rejected == 100 && accepted == 0 && bad_path == 0;
    line(8, ok, std::to_string(rejected) + "/100 mutations rejected, " + std::to_string(accepted) +
                    " slipped through, " + std::to_string(bad_path) + " blamed the wrong path (" +
                    std::to_string(ms) + " ms)");
    CHECK(ok);
}
