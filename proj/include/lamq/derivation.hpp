#pragma once

// Proof trees and their checkers. A derivation node records its rule name,
// the full conclusion judgement and the premise subtrees, so checking is
// purely local arithmetic on each node: environment sums, multiset matches,
// state-type bookkeeping and counter equations.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lamq/eval.hpp"
#include "lamq/syntax.hpp"
#include "lamq/types.hpp"

namespace lamq {

enum class Rule { Ax, Lam, App, Many, LamP, AppP1, AppP2, Lift, Get, Set, Emp, Upd, Conf };

inline const char* rule_name(Rule r) {
    switch (r) {
        case Rule::Ax: return "ax";
        case Rule::Lam: return "lam";
        case Rule::App: return "app";
        case Rule::Many: return "many";
        case Rule::LamP: return "lamp";
        case Rule::AppP1: return "appp1";
        case Rule::AppP2: return "appp2";
        case Rule::Lift: return "lift";
        case Rule::Get: return "get";
        case Rule::Set: return "set";
        case Rule::Emp: return "emp";
        case Rule::Upd: return "upd";
        case Rule::Conf: return "conf";
    }
    return "?";
}

inline std::optional<Rule> rule_from_name(const std::string& s) {
    static const std::pair<const char*, Rule> table[] = {
        {"ax", Rule::Ax},     {"lam", Rule::Lam},   {"app", Rule::App},   {"many", Rule::Many},
        {"lamp", Rule::LamP}, {"appp1", Rule::AppP1}, {"appp2", Rule::AppP2}, {"lift", Rule::Lift},
        {"get", Rule::Get},   {"set", Rule::Set},   {"emp", Rule::Emp},   {"upd", Rule::Upd},
        {"conf", Rule::Conf}};
    for (auto& [n, r] : table)
        if (s == n) return r;
    return std::nullopt;
}

// b: beta steps; m: memory accesses (always 0 in system V); sz: size of the
// normal form.
struct Counters {
    std::uint64_t b = 0, m = 0, sz = 0;
};

inline Counters operator+(const Counters& a, const Counters& b) {
    return {a.b + b.b, a.m + b.m, a.sz + b.sz};
}
inline bool operator==(const Counters& a, const Counters& b) {
    return a.b == b.b && a.m == b.m && a.sz == b.sz;
}

using Subject = std::variant<TermPtr, State, Configuration>;
using Assigned = std::variant<TypePtr, StateType, ConfigType>;

struct Judgement {
    TypeEnv env;
    Subject subject;
    Assigned assigned;
    Counters counters;
};

struct Derivation;
using DerivPtr = std::shared_ptr<const Derivation>;

struct Derivation {
    Rule rule;
    Judgement conclusion;
    std::vector<DerivPtr> premises;
};

inline DerivPtr mk_deriv(Rule r, Judgement j, std::vector<DerivPtr> ps = {}) {
    return std::make_shared<Derivation>(Derivation{r, std::move(j), std::move(ps)});
}

// convenience accessors
inline const TermPtr* subj_term(const Judgement& j) { return std::get_if<TermPtr>(&j.subject); }
inline const State* subj_state(const Judgement& j) { return std::get_if<State>(&j.subject); }
inline const Configuration* subj_config(const Judgement& j) { return std::get_if<Configuration>(&j.subject); }
inline const TypePtr* asg_type(const Judgement& j) { return std::get_if<TypePtr>(&j.assigned); }
inline const StateType* asg_state_type(const Judgement& j) { return std::get_if<StateType>(&j.assigned); }
inline const ConfigType* asg_config_type(const Judgement& j) { return std::get_if<ConfigType>(&j.assigned); }

inline bool subject_eq(const Subject& a, const Subject& b) {
    if (a.index() != b.index()) return false;
    if (auto* t = std::get_if<TermPtr>(&a)) return term_eq(*t, std::get<TermPtr>(b));
    if (auto* s = std::get_if<State>(&a)) return state_eq(*s, std::get<State>(b));
    return config_eq(std::get<Configuration>(a), std::get<Configuration>(b));
}

inline bool assigned_eq(const Assigned& a, const Assigned& b) {
    if (a.index() != b.index()) return false;
    if (auto* t = std::get_if<TypePtr>(&a)) return type_eq(*t, std::get<TypePtr>(b));
    if (auto* s = std::get_if<StateType>(&a)) return state_type_eq(*s, std::get<StateType>(b));
    return config_type_eq(std::get<ConfigType>(a), std::get<ConfigType>(b));
}

// ---------------------------------------------------------------------------
// checking

struct RuleViolation {
    std::vector<std::size_t> path;  // child indices from the root
    std::string reason;
};

using CheckResult = std::optional<RuleViolation>;  // nullopt means the derivation checks

namespace detail {

struct Checker {
    System sys;

    CheckResult fail(const std::vector<std::size_t>& path, std::string reason) const {
        return RuleViolation{path, std::move(reason)};
    }

    CheckResult check(const DerivPtr& d, std::vector<std::size_t>& path) const {
        // premises first, so the reported path is the deepest failing node
        for (std::size_t i = 0; i < d->premises.size(); ++i) {
            path.push_back(i);
            if (auto r = check(d->premises[i], path)) return r;
            path.pop_back();
        }
        if (auto r = check_node(*d, path)) return r;
        return std::nullopt;
    }

    CheckResult check_node(const Derivation& d, const std::vector<std::size_t>& path) const {
        const Judgement& j = d.conclusion;
        if (auto r = wf_env(sys, j.env); !r.empty()) return fail(path, "ill-formed environment: " + r);
        if (auto* ty = asg_type(j)) {
            if (auto r = wf_type(sys, *ty); !r.empty()) return fail(path, "ill-formed type: " + r);
        } else if (auto* st = asg_state_type(j)) {
            if (auto r = wf_state_type(sys, *st); !r.empty()) return fail(path, "ill-formed state type: " + r);
        } else if (auto* k = asg_config_type(j)) {
            if (k->ty->kind == TypeKind::Monadic) return fail(path, "configuration type holds a monadic type");
            if (auto r = wf_type(sys, k->ty); !r.empty()) return fail(path, "ill-formed type: " + r);
            if (auto r = wf_state_type(sys, k->state); !r.empty())
                return fail(path, "ill-formed state type: " + r);
        }
        switch (d.rule) {
            case Rule::Ax: return check_ax(d, path);
            case Rule::Lam: return check_lam(d, path);
            case Rule::App: return sys == System::V ? check_app_v(d, path) : check_app_gs(d, path);
            case Rule::Many: return check_many(d, path);
            case Rule::LamP: return check_lamp(d, path);
            case Rule::AppP1: return sys == System::V ? check_appp1_v(d, path) : check_appp1_gs(d, path);
            case Rule::AppP2: return sys == System::V ? check_appp2_v(d, path) : check_appp2_gs(d, path);
            case Rule::Lift: return sys == System::GS ? check_lift(d, path) : fail(path, "lift is a GS rule");
            case Rule::Get: return sys == System::GS ? check_get(d, path) : fail(path, "get is a GS rule");
            case Rule::Set: return sys == System::GS ? check_set(d, path) : fail(path, "set is a GS rule");
            case Rule::Emp: return sys == System::GS ? check_emp(d, path) : fail(path, "emp is a GS rule");
            case Rule::Upd: return sys == System::GS ? check_upd(d, path) : fail(path, "upd is a GS rule");
            case Rule::Conf: return sys == System::GS ? check_conf(d, path) : fail(path, "conf is a GS rule");
        }
        return fail(path, "unknown rule");
    }

    // is the type a value type sigma (assignable by ax / collected by many)?
    static bool is_value_type(const TypePtr& t) {
        if (t->kind == TypeKind::Tight) return t->tc != TightConst::Neut;
        return t->kind == TypeKind::MultiT || t->kind == TypeKind::Arrow;
    }

    CheckResult check_ax(const Derivation& d, const std::vector<std::size_t>& path) const {
        if (!d.premises.empty()) return fail(path, "ax takes no premises");
        auto* t = subj_term(d.conclusion);
        if (!t || (*t)->kind != TermKind::Var) return fail(path, "ax subject must be a variable");
        auto* ty = asg_type(d.conclusion);
        if (!ty) return fail(path, "ax assigns a type");
        if (!is_value_type(*ty)) return fail(path, "ax assigns value types only");
        TypeEnv expect = env_single((*t)->var, mk_multi({*ty}));
        if (!env_eq(d.conclusion.env, expect)) return fail(path, "ax environment must be x:[sigma]");
        if (!(d.conclusion.counters == Counters{})) return fail(path, "ax counters must be zero");
        return std::nullopt;
    }

    CheckResult check_lam(const Derivation& d, const std::vector<std::size_t>& path) const {
        if (d.premises.size() != 1) return fail(path, "lam takes one premise");
        const Judgement& p = d.premises[0]->conclusion;
        auto* t = subj_term(d.conclusion);
        if (!t || (*t)->kind != TermKind::Abs) return fail(path, "lam subject must be an abstraction");
        auto* body = subj_term(p);
        if (!body || !term_eq(*body, (*t)->a)) return fail(path, "lam premise must type the body");
        auto* pty = asg_type(p);
        if (!pty) return fail(path, "lam premise assigns a type");
        if (sys == System::GS && (*pty)->kind != TypeKind::Monadic)
            return fail(path, "GS lam premise must be monadic");
        auto* cty = asg_type(d.conclusion);
        if (!cty || (*cty)->kind != TypeKind::Arrow) return fail(path, "lam concludes an arrow type");
        const std::string& x = (*t)->var;
        if (!multi_eq((*cty)->multi, p.env.get(x))) return fail(path, "lam arrow domain must be Gamma(x)");
        if (!type_eq((*cty)->cod, *pty)) return fail(path, "lam arrow codomain must be the premise type");
        if (!env_eq(d.conclusion.env, env_remove(p.env, x)))
            return fail(path, "lam environment must be Gamma minus x");
        if (!(d.conclusion.counters == p.counters)) return fail(path, "lam preserves counters");
        return std::nullopt;
    }

    CheckResult check_app_v(const Derivation& d, const std::vector<std::size_t>& path) const {
        if (d.premises.size() != 2) return fail(path, "app takes two premises");
        const Judgement& pf = d.premises[0]->conclusion;
        const Judgement& pa = d.premises[1]->conclusion;
        auto* t = subj_term(d.conclusion);
        if (!t || (*t)->kind != TermKind::App) return fail(path, "app subject must be an application");
        auto* f = subj_term(pf);
        auto* a = subj_term(pa);
        if (!f || !term_eq(*f, (*t)->a)) return fail(path, "app left premise must type the function");
        if (!a || !term_eq(*a, (*t)->b)) return fail(path, "app right premise must type the argument");
        auto* fty = asg_type(pf);
        if (!fty || (*fty)->kind != TypeKind::Arrow) return fail(path, "app function must have an arrow type");
        auto* aty = asg_type(pa);
        if (!aty || (*aty)->kind != TypeKind::MultiT) return fail(path, "app argument must have a multi type");
        if (!multi_eq((*fty)->multi, (*aty)->multi)) return fail(path, "app multiset mismatch");
        auto* cty = asg_type(d.conclusion);
        if (!cty || !type_eq(*cty, (*fty)->cod)) return fail(path, "app concludes the arrow codomain");
        if (!env_eq(d.conclusion.env, env_union(pf.env, pa.env))) return fail(path, "app environment sum");
        Counters want{1 + pf.counters.b + pa.counters.b, 0, pf.counters.sz + pa.counters.sz};
        if (!(d.conclusion.counters == want)) return fail(path, "app counters must be (1+b+b', s+s')");
        return std::nullopt;
    }

    CheckResult check_app_gs(const Derivation& d, const std::vector<std::size_t>& path) const {
        if (d.premises.size() != 2) return fail(path, "app takes two premises");
        const Judgement& pf = d.premises[0]->conclusion;
        const Judgement& pa = d.premises[1]->conclusion;
        auto* t = subj_term(d.conclusion);
        if (!t || (*t)->kind != TermKind::App) return fail(path, "app subject must be an application");
        if (!is_value((*t)->a)) return fail(path, "GS application head must be a value");
        auto* f = subj_term(pf);
        auto* a = subj_term(pa);
        if (!f || !term_eq(*f, (*t)->a)) return fail(path, "app left premise must type the function");
        if (!a || !term_eq(*a, (*t)->b)) return fail(path, "app right premise must type the argument");
        auto* fty = asg_type(pf);
        if (!fty || (*fty)->kind != TypeKind::Arrow || (*fty)->cod->kind != TypeKind::Monadic)
            return fail(path, "app function must have type M -> (S' => k)");
        auto* aty = asg_type(pa);
        if (!aty || (*aty)->kind != TypeKind::Monadic) return fail(path, "app argument must have a monadic type");
        const Type& fun = **fty;
        const Type& arg = **aty;
        // argument output must be (M x S') with M the arrow domain and S' the
        // arrow's monadic input
        if (arg.out.ty->kind != TypeKind::MultiT || !multi_eq(arg.out.ty->multi, fun.multi))
            return fail(path, "app multiset mismatch between argument output and arrow domain");
        if (!state_type_eq(arg.out.state, fun.cod->s_in))
            return fail(path, "app state-type mismatch: argument output vs function input");
        auto* cty = asg_type(d.conclusion);
        if (!cty || (*cty)->kind != TypeKind::Monadic) return fail(path, "app concludes a monadic type");
        if (!state_type_eq((*cty)->s_in, arg.s_in)) return fail(path, "app conclusion input state mismatch");
        if (!config_type_eq((*cty)->out, fun.cod->out)) return fail(path, "app conclusion output mismatch");
        if (!env_eq(d.conclusion.env, env_union(pf.env, pa.env))) return fail(path, "app environment sum");
        Counters want = Counters{1, 0, 0} + pf.counters + pa.counters;
        if (!(d.conclusion.counters == want)) return fail(path, "app counters must be (1+b+b', m+m', d+d')");
        return std::nullopt;
    }

    CheckResult check_many(const Derivation& d, const std::vector<std::size_t>& path) const {
        auto* t = subj_term(d.conclusion);
        if (!t || !is_value(*t)) return fail(path, "many subject must be a value");
        auto* cty = asg_type(d.conclusion);
        if (!cty || (*cty)->kind != TypeKind::MultiT) return fail(path, "many concludes a multi type");
        std::vector<TypePtr> elems;
        TypeEnv env;
        Counters sum;
        for (const auto& p : d.premises) {
            const Judgement& pj = p->conclusion;
            auto* pt = subj_term(pj);
            if (!pt || !term_eq(*pt, *t)) return fail(path, "many premises must type the same value");
            auto* pty = asg_type(pj);
            if (!pty || !is_value_type(*pty)) return fail(path, "many premises must assign value types");
            elems.push_back(*pty);
            env = env_union(env, pj.env);
            sum = sum + pj.counters;
        }
        if (!multi_eq((*cty)->multi, mk_multi(std::move(elems))))
            return fail(path, "many multiset must collect the premise types");
        if (!env_eq(d.conclusion.env, env)) return fail(path, "many environment sum");
        if (!(d.conclusion.counters == sum)) return fail(path, "many counters must be the premise sums");
        return std::nullopt;
    }

    CheckResult check_lamp(const Derivation& d, const std::vector<std::size_t>& path) const {
        if (!d.premises.empty()) return fail(path, "lamp takes no premises");
        auto* t = subj_term(d.conclusion);
        if (!t || (*t)->kind != TermKind::Abs) return fail(path, "lamp subject must be an abstraction");
        auto* ty = asg_type(d.conclusion);
        if (!ty || (*ty)->kind != TypeKind::Tight || (*ty)->tc != TightConst::Ab)
            return fail(path, "lamp assigns ab");
        if (!d.conclusion.env.m.empty()) return fail(path, "lamp environment must be empty");
        if (!(d.conclusion.counters == Counters{})) return fail(path, "lamp counters must be zero");
        return std::nullopt;
    }

    static bool is_tight_const(const TypePtr& t) { return t->kind == TypeKind::Tight; }
    static bool is_neut(const TypePtr& t) { return t->kind == TypeKind::Tight && t->tc == TightConst::Neut; }

    CheckResult check_appp1_v(const Derivation& d, const std::vector<std::size_t>& path) const {
        if (d.premises.size() != 2) return fail(path, "appp1 takes two premises");
        const Judgement& pf = d.premises[0]->conclusion;
        const Judgement& pa = d.premises[1]->conclusion;
        auto* t = subj_term(d.conclusion);
        if (!t || (*t)->kind != TermKind::App) return fail(path, "appp1 subject must be an application");
        auto* f = subj_term(pf);
        auto* a = subj_term(pa);
        if (!f || !term_eq(*f, (*t)->a) || !a || !term_eq(*a, (*t)->b))
            return fail(path, "appp1 premises must type function and argument");
        auto* fty = asg_type(pf);
        if (!fty || !is_tight_const(*fty) || (*fty)->tc == TightConst::Ab)
            return fail(path, "appp1 function type must be a tight constant other than ab");
        auto* aty = asg_type(pa);
        if (!aty || !is_tight_const(*aty)) return fail(path, "appp1 argument type must be a tight constant");
        auto* cty = asg_type(d.conclusion);
        if (!cty || !is_neut(*cty)) return fail(path, "appp1 concludes n");
        if (!env_eq(d.conclusion.env, env_union(pf.env, pa.env))) return fail(path, "appp1 environment sum");
        Counters want{pf.counters.b + pa.counters.b, 0, 1 + pf.counters.sz + pa.counters.sz};
        if (!(d.conclusion.counters == want)) return fail(path, "appp1 counters must be (b+b', 1+s+s')");
        return std::nullopt;
    }

    CheckResult check_appp2_v(const Derivation& d, const std::vector<std::size_t>& path) const {
        if (d.premises.size() != 2) return fail(path, "appp2 takes two premises");
        const Judgement& pf = d.premises[0]->conclusion;
        const Judgement& pa = d.premises[1]->conclusion;
        auto* t = subj_term(d.conclusion);
        if (!t || (*t)->kind != TermKind::App) return fail(path, "appp2 subject must be an application");
        auto* f = subj_term(pf);
        auto* a = subj_term(pa);
        if (!f || !term_eq(*f, (*t)->a) || !a || !term_eq(*a, (*t)->b))
            return fail(path, "appp2 premises must type function and argument");
        auto* fty = asg_type(pf);
        if (!fty || !is_tight_const(*fty)) return fail(path, "appp2 function type must be a tight constant");
        auto* aty = asg_type(pa);
        if (!aty || !is_neut(*aty)) return fail(path, "appp2 argument type must be n");
        auto* cty = asg_type(d.conclusion);
        if (!cty || !is_neut(*cty)) return fail(path, "appp2 concludes n");
        if (!env_eq(d.conclusion.env, env_union(pf.env, pa.env))) return fail(path, "appp2 environment sum");
        Counters want{pf.counters.b + pa.counters.b, 0, 1 + pf.counters.sz + pa.counters.sz};
        if (!(d.conclusion.counters == want)) return fail(path, "appp2 counters must be (b+b', 1+s+s')");
        return std::nullopt;
    }

    // GS persistent application with a variable head. The head multi is
    // [vr] canonically; [ab] is also accepted, covering heads that stand for
    // abstractions (needed for exact subject expansion across beta).
    CheckResult check_appp1_gs(const Derivation& d, const std::vector<std::size_t>& path) const {
        if (d.premises.size() != 1) return fail(path, "appp1 takes one premise");
        const Judgement& p = d.premises[0]->conclusion;
        auto* t = subj_term(d.conclusion);
        if (!t || (*t)->kind != TermKind::App || (*t)->a->kind != TermKind::Var)
            return fail(path, "appp1 subject must be an application with a variable head");
        auto* a = subj_term(p);
        if (!a || !term_eq(*a, (*t)->b)) return fail(path, "appp1 premise must type the argument");
        auto* aty = asg_type(p);
        if (!aty || (*aty)->kind != TypeKind::Monadic || !is_tight_const((*aty)->out.ty))
            return fail(path, "appp1 premise must be S => (tight x S')");
        auto* cty = asg_type(d.conclusion);
        if (!cty || (*cty)->kind != TypeKind::Monadic || !is_neut((*cty)->out.ty))
            return fail(path, "appp1 concludes S => (n x S')");
        if (!state_type_eq((*cty)->s_in, (*aty)->s_in) ||
            !state_type_eq((*cty)->out.state, (*aty)->out.state))
            return fail(path, "appp1 must preserve the premise state types");
        const std::string& x = (*t)->a->var;
        // conclusion env = (x:[c]) + Gamma with c in {vr, ab}; the ab variant
        // stands for a head that an abstraction may replace, so it is only
        // admitted when the argument is neutral
        Multi cx = d.conclusion.env.get(x);
        Multi px = p.env.get(x);
        if (!multi_contains(cx, px)) return fail(path, "appp1 head variable multiset mismatch");
        Multi diff = multi_minus(cx, px);
        bool head_ok = diff.elems.size() == 1 && diff.elems[0]->kind == TypeKind::Tight &&
                       diff.elems[0]->tc != TightConst::Neut;
        if (!head_ok) return fail(path, "appp1 head variable must contribute [vr] or [ab]");
        if (diff.elems[0]->tc == TightConst::Ab && !is_neut((*aty)->out.ty))
            return fail(path, "appp1 with an ab head requires a neutral argument");
        TypeEnv expect = env_union(env_single(x, diff), p.env);
        if (!env_eq(d.conclusion.env, expect)) return fail(path, "appp1 environment mismatch");
        Counters want{p.counters.b, p.counters.m, 1 + p.counters.sz};
        if (!(d.conclusion.counters == want)) return fail(path, "appp1 counters must be (b, m, 1+d)");
        return std::nullopt;
    }

    CheckResult check_appp2_gs(const Derivation& d, const std::vector<std::size_t>& path) const {
        if (d.premises.size() != 1) return fail(path, "appp2 takes one premise");
        const Judgement& p = d.premises[0]->conclusion;
        auto* t = subj_term(d.conclusion);
        if (!t || (*t)->kind != TermKind::App || (*t)->a->kind != TermKind::Abs)
            return fail(path, "appp2 subject must be an application with an abstraction head");
        auto* a = subj_term(p);
        if (!a || !term_eq(*a, (*t)->b)) return fail(path, "appp2 premise must type the argument");
        auto* aty = asg_type(p);
        if (!aty || (*aty)->kind != TypeKind::Monadic || !is_neut((*aty)->out.ty))
            return fail(path, "appp2 premise must be S => (n x S')");
        auto* cty = asg_type(d.conclusion);
        if (!cty || !type_eq(*cty, *aty)) return fail(path, "appp2 concludes the premise type");
        if (!env_eq(d.conclusion.env, p.env)) return fail(path, "appp2 environment mismatch");
        Counters want{p.counters.b, p.counters.m, 1 + p.counters.sz};
        if (!(d.conclusion.counters == want)) return fail(path, "appp2 counters must be (b, m, 1+d)");
        return std::nullopt;
    }

    CheckResult check_lift(const Derivation& d, const std::vector<std::size_t>& path) const {
        if (d.premises.size() != 1) return fail(path, "lift takes one premise");
        const Judgement& p = d.premises[0]->conclusion;
        auto* t = subj_term(d.conclusion);
        if (!t || !is_value(*t)) return fail(path, "lift subject must be a value");
        auto* pt = subj_term(p);
        if (!pt || !term_eq(*pt, *t)) return fail(path, "lift premise must type the same value");
        auto* mu = asg_type(p);
        bool liftable = mu && ((*mu)->kind == TypeKind::MultiT ||
                               ((*mu)->kind == TypeKind::Tight && (*mu)->tc != TightConst::Neut));
        if (!liftable) return fail(path, "lift premise type must be vr, ab or a multi type");
        auto* cty = asg_type(d.conclusion);
        if (!cty || (*cty)->kind != TypeKind::Monadic) return fail(path, "lift concludes a monadic type");
        if (!type_eq((*cty)->out.ty, *mu)) return fail(path, "lift output type must be the premise type");
        if (!state_type_eq((*cty)->s_in, (*cty)->out.state))
            return fail(path, "lift input and output state types must coincide");
        if (!env_eq(d.conclusion.env, p.env)) return fail(path, "lift environment mismatch");
        if (!(d.conclusion.counters == p.counters)) return fail(path, "lift preserves counters");
        return std::nullopt;
    }

    CheckResult check_get(const Derivation& d, const std::vector<std::size_t>& path) const {
        if (d.premises.size() != 1) return fail(path, "get takes one premise");
        const Judgement& p = d.premises[0]->conclusion;
        auto* t = subj_term(d.conclusion);
        if (!t || (*t)->kind != TermKind::Get) return fail(path, "get subject must be a get term");
        auto* pt = subj_term(p);
        if (!pt || !term_eq(*pt, (*t)->a)) return fail(path, "get premise must type the continuation");
        auto* pty = asg_type(p);
        if (!pty || (*pty)->kind != TypeKind::Monadic) return fail(path, "get premise must be monadic");
        auto* cty = asg_type(d.conclusion);
        if (!cty || (*cty)->kind != TypeKind::Monadic) return fail(path, "get concludes a monadic type");
        const std::string& x = (*t)->var;
        StateType want_in = state_type_union(state_type_single((*t)->loc, p.env.get(x)), (*pty)->s_in);
        if (!state_type_eq((*cty)->s_in, want_in))
            return fail(path, "get conclusion input must be (l: Gamma(x)) joined with S");
        if (!config_type_eq((*cty)->out, (*pty)->out)) return fail(path, "get must preserve the output");
        if (!env_eq(d.conclusion.env, env_remove(p.env, x)))
            return fail(path, "get environment must be Gamma minus x");
        Counters want{p.counters.b, 1 + p.counters.m, p.counters.sz};
        if (!(d.conclusion.counters == want)) return fail(path, "get counters must be (b, 1+m, d)");
        return std::nullopt;
    }

    // The continuation sees (l:M); S. The conclusion input is S when l is a
    // fresh location, or (l:[]) joined with S when the written location is
    // already present in the store and its previous content is discarded.
    CheckResult check_set(const Derivation& d, const std::vector<std::size_t>& path) const {
        if (d.premises.size() != 2) return fail(path, "set takes two premises");
        const Judgement& pv = d.premises[0]->conclusion;
        const Judgement& pc = d.premises[1]->conclusion;
        auto* t = subj_term(d.conclusion);
        if (!t || (*t)->kind != TermKind::Set) return fail(path, "set subject must be a set term");
        auto* vt = subj_term(pv);
        if (!vt || !term_eq(*vt, (*t)->a)) return fail(path, "set left premise must type the stored value");
        auto* ct = subj_term(pc);
        if (!ct || !term_eq(*ct, (*t)->b)) return fail(path, "set right premise must type the continuation");
        auto* vty = asg_type(pv);
        if (!vty || (*vty)->kind != TypeKind::MultiT) return fail(path, "set value premise must be a multi type");
        auto* cont = asg_type(pc);
        if (!cont || (*cont)->kind != TypeKind::Monadic) return fail(path, "set continuation must be monadic");
        const std::string& l = (*t)->loc;
        auto it = (*cont)->s_in.entries.find(l);
        if (it == (*cont)->s_in.entries.end())
            return fail(path, "set continuation input state must bind the written location");
        if (!multi_eq(it->second, (*vty)->multi))
            return fail(path, "set continuation must expect the stored multiset at l");
        StateType rest = state_type_remove((*cont)->s_in, l);
        auto* cty = asg_type(d.conclusion);
        if (!cty || (*cty)->kind != TypeKind::Monadic) return fail(path, "set concludes a monadic type");
        const StateType& in = (*cty)->s_in;
        auto cit = in.entries.find(l);
        if (cit == in.entries.end()) {
            if (!state_type_eq(in, rest)) return fail(path, "set conclusion input state mismatch");
        } else {
            if (!cit->second.elems.empty())
                return fail(path, "semicolon violation: written location must carry [] in the conclusion");
            if (!state_type_eq(state_type_remove(in, l), rest))
                return fail(path, "set conclusion input state mismatch");
        }
        if (!config_type_eq((*cty)->out, (*cont)->out)) return fail(path, "set must preserve the output");
        if (!env_eq(d.conclusion.env, env_union(pv.env, pc.env))) return fail(path, "set environment sum");
        Counters want = Counters{0, 1, 0} + pv.counters + pc.counters;
        if (!(d.conclusion.counters == want)) return fail(path, "set counters must be (b+b', 1+m+m', d+d')");
        return std::nullopt;
    }

    CheckResult check_emp(const Derivation& d, const std::vector<std::size_t>& path) const {
        if (!d.premises.empty()) return fail(path, "emp takes no premises");
        auto* s = subj_state(d.conclusion);
        if (!s || !s->binds.empty()) return fail(path, "emp subject must be the empty state");
        auto* st = asg_state_type(d.conclusion);
        if (!st || !st->entries.empty()) return fail(path, "emp assigns the empty state type");
        if (!d.conclusion.env.m.empty()) return fail(path, "emp environment must be empty");
        if (!(d.conclusion.counters == Counters{})) return fail(path, "emp counters must be zero");
        return std::nullopt;
    }

    CheckResult check_upd(const Derivation& d, const std::vector<std::size_t>& path) const {
        if (d.premises.size() != 2) return fail(path, "upd takes two premises");
        const Judgement& pv = d.premises[0]->conclusion;
        const Judgement& ps = d.premises[1]->conclusion;
        auto* s = subj_state(d.conclusion);
        if (!s || s->binds.empty()) return fail(path, "upd subject must be a nonempty state");
        const StateBinding& head = s->binds.front();
        auto* vt = subj_term(pv);
        if (!vt || !term_eq(*vt, head.val.term))
            return fail(path, "upd left premise must type the first stored value");
        auto* tail = subj_state(ps);
        State want_tail{std::vector<StateBinding>(s->binds.begin() + 1, s->binds.end())};
        if (!tail || !state_eq(*tail, want_tail)) return fail(path, "upd right premise must type the tail");
        auto* vty = asg_type(pv);
        if (!vty || (*vty)->kind != TypeKind::MultiT) return fail(path, "upd value premise must be a multi type");
        auto* tst = asg_state_type(ps);
        if (!tst) return fail(path, "upd tail premise must assign a state type");
        if (tst->entries.count(head.loc))
            return fail(path, "semicolon violation: location already bound in the tail state type");
        auto* cst = asg_state_type(d.conclusion);
        if (!cst) return fail(path, "upd assigns a state type");
        StateType want = state_type_union(state_type_single(head.loc, (*vty)->multi), *tst);
        if (!state_type_eq(*cst, want)) return fail(path, "upd state type must be (l:M); S");
        if (!env_eq(d.conclusion.env, env_union(pv.env, ps.env))) return fail(path, "upd environment sum");
        if (!(d.conclusion.counters == pv.counters + ps.counters))
            return fail(path, "upd counters must be the premise sums");
        return std::nullopt;
    }

    CheckResult check_conf(const Derivation& d, const std::vector<std::size_t>& path) const {
        if (d.premises.size() != 2) return fail(path, "conf takes two premises");
        const Judgement& pt = d.premises[0]->conclusion;
        const Judgement& ps = d.premises[1]->conclusion;
        auto* c = subj_config(d.conclusion);
        if (!c) return fail(path, "conf subject must be a configuration");
        auto* t = subj_term(pt);
        if (!t || !term_eq(*t, c->term)) return fail(path, "conf left premise must type the term");
        auto* s = subj_state(ps);
        if (!s || !state_eq(*s, c->state)) return fail(path, "conf right premise must type the state");
        auto* tty = asg_type(pt);
        if (!tty || (*tty)->kind != TypeKind::Monadic) return fail(path, "conf term premise must be monadic");
        auto* sst = asg_state_type(ps);
        if (!sst) return fail(path, "conf state premise must assign a state type");
        if (!state_type_eq((*tty)->s_in, *sst))
            return fail(path, "conf state type must match the term's input state type");
        auto* k = asg_config_type(d.conclusion);
        if (!k || !config_type_eq(*k, (*tty)->out)) return fail(path, "conf concludes the term's output");
        if (!env_eq(d.conclusion.env, env_union(pt.env, ps.env))) return fail(path, "conf environment sum");
        if (!(d.conclusion.counters == pt.counters + ps.counters))
            return fail(path, "conf counters must be the premise sums");
        return std::nullopt;
    }
};

}  // namespace detail

inline CheckResult check_derivation(System sys, const DerivPtr& d) {
    std::vector<std::size_t> path;
    return detail::Checker{sys}.check(d, path);
}

inline CheckResult check_derivation_v(const DerivPtr& d) { return check_derivation(System::V, d); }
inline CheckResult check_derivation_gs(const DerivPtr& d) { return check_derivation(System::GS, d); }

// ---------------------------------------------------------------------------
// tightness of a whole derivation: conclusion environment and conclusion type

inline bool is_tight_assigned(const Assigned& a) {
    if (auto* ty = std::get_if<TypePtr>(&a)) {
        switch ((*ty)->kind) {
            case TypeKind::Tight: return true;
            case TypeKind::MultiT: return is_tight_multi((*ty)->multi);
            case TypeKind::Arrow: return false;
            case TypeKind::Monadic: return is_tight_config_type((*ty)->out);
        }
        return false;
    }
    if (auto* st = std::get_if<StateType>(&a)) return is_tight_state_type(*st);
    return is_tight_config_type(std::get<ConfigType>(a));
}

inline bool is_tight_derivation(const DerivPtr& d) {
    return is_tight_env(d->conclusion.env) && is_tight_assigned(d->conclusion.assigned);
}

// ---------------------------------------------------------------------------
// rendering

inline std::string print_subject(const Subject& s) {
    if (auto* t = std::get_if<TermPtr>(&s)) return print_term(*t);
    if (auto* st = std::get_if<State>(&s)) return print_state(*st);
    return print_config(std::get<Configuration>(s));
}

inline std::string print_assigned(const Assigned& a) {
    if (auto* t = std::get_if<TypePtr>(&a)) return print_type(*t);
    if (auto* st = std::get_if<StateType>(&a)) return print_state_type(*st);
    return print_config_type(std::get<ConfigType>(a));
}

inline std::string print_env(const TypeEnv& g) {
    std::string out;
    bool first = true;
    for (const auto& [x, m] : g.m) {
        if (!first) out += ", ";
        first = false;
        out += x + ": " + print_multi(m);
    }
    return out;
}

inline std::string print_counters(System sys, const Counters& c) {
    if (sys == System::V) return "(" + std::to_string(c.b) + ", " + std::to_string(c.sz) + ")";
    return "(" + std::to_string(c.b) + ", " + std::to_string(c.m) + ", " + std::to_string(c.sz) + ")";
}

inline void render_derivation(System sys, const DerivPtr& d, std::string& out, int depth) {
    out.append(2 * depth, ' ');
    const Judgement& j = d->conclusion;
    out += "(" + std::string(rule_name(d->rule)) + ") ";
    std::string env = print_env(j.env);
    if (!env.empty()) out += env + " ";
    out += "|- " + print_subject(j.subject) + " : " + print_assigned(j.assigned) + " " +
           print_counters(sys, j.counters) + "\n";
    for (const auto& p : d->premises) render_derivation(sys, p, out, depth + 1);
}

inline std::string render_derivation(System sys, const DerivPtr& d) {
    std::string out;
    render_derivation(sys, d, out, 0);
    return out;
}

// ---------------------------------------------------------------------------
// metatheory validation on concrete derivations

struct MetaCheck {
    std::string property;
    bool pass;
    std::string detail;
};

struct MetaReport {
    std::vector<MetaCheck> checks;
    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

namespace detail {

inline std::set<std::string> subject_free_vars(const Subject& s) {
    if (auto* t = std::get_if<TermPtr>(&s)) return free_vars(*t);
    if (auto* st = std::get_if<State>(&s)) return free_vars(*st);
    return free_vars(std::get<Configuration>(s));
}

inline void validate_node(System sys, const DerivPtr& d, const std::string& where, MetaReport& rep) {
    const Judgement& j = d->conclusion;
    auto add = [&](const std::string& prop, bool ok, const std::string& detail) {
        if (!ok)
            rep.checks.push_back({prop, false, where + ": " + detail});
    };

    // relevance: dom(Gamma) within fv(subject)
    {
        auto fv = subject_free_vars(j.subject);
        bool ok = true;
        for (const auto& x : j.env.dom())
            if (!fv.count(x)) ok = false;
        add("relevance", ok, "environment mentions a variable not free in the subject");
    }

    bool env_tight = is_tight_env(j.env);

    if (auto* t = subj_term(j)) {
        auto* ty = asg_type(j);
        // values are never neutral
        if (ty && is_value(*t)) {
            bool neut = ((*ty)->kind == TypeKind::Tight && (*ty)->tc == TightConst::Neut) ||
                        ((*ty)->kind == TypeKind::Monadic && (*ty)->out.ty->kind == TypeKind::Tight &&
                         (*ty)->out.ty->tc == TightConst::Neut);
            add("values-not-neutral", !neut, "a value is typed n");
        }
        // non-ab tight type under a tight environment rules out abstractions
        if (ty && env_tight) {
            const TypePtr inner = (*ty)->kind == TypeKind::Monadic ? (*ty)->out.ty : *ty;
            if (inner->kind == TypeKind::Tight && inner->tc != TightConst::Ab)
                add("notabs-implies-negabs", (*t)->kind != TermKind::Abs,
                    "an abstraction carries a non-ab tight constant");
        }
        // tight spreading at neutral subjects
        if (ty && env_tight) {
            bool neutral = sys == System::V ? is_neutral_cbv(*t) : is_neutral_gs(*t);
            if (neutral) {
                const TypePtr inner = (*ty)->kind == TypeKind::Monadic ? (*ty)->out.ty : *ty;
                add("tight-spreading", inner->kind == TypeKind::Tight,
                    "a neutral subject under a tight environment has a non-tight type");
            }
        }
        // zero counters characterize normal forms, with the size counter exact
        bool node_tight = env_tight && is_tight_assigned(j.assigned);
        if (sys == System::V && node_tight) {
            bool normal = is_normal_cbv(*t);
            add("zero-counters-iff-normal", (j.counters.b == 0) == normal,
                "b = 0 does not match normality of the subject");
            if (j.counters.b == 0)
                add("size-counter", j.counters.sz == term_size(*t), "size counter differs from |t|");
        }
        if (sys == System::GS && node_tight && ty && (*ty)->kind == TypeKind::Monadic) {
            bool normal = is_normal_gs(*t);
            add("zero-counters-iff-normal", (j.counters.b == 0 && j.counters.m == 0) == normal,
                "b = m = 0 does not match normality of the subject");
            if (j.counters.b == 0 && j.counters.m == 0) {
                add("size-counter", j.counters.sz == term_size(*t), "size counter differs from |t|");
                add("zero-counters-equal-states", state_type_eq((*ty)->s_in, (*ty)->out.state),
                    "normal form with unequal input and output state types");
            }
        }
    }

    if (auto* s = subj_state(j)) {
        // typed locations are bound in the state
        if (auto* st = asg_state_type(j)) {
            auto dom_s = state_dom(*s);
            bool ok = true;
            for (const auto& [l, mu] : st->entries)
                if (!dom_s.count(l)) ok = false;
            add("states-and-state-types", ok, "state type binds a location absent from the state");
        }
        if (env_tight && is_tight_assigned(j.assigned) && j.counters.b == 0 && j.counters.m == 0)
            add("zero-size-store", j.counters.sz == 0, "tight zero-step state with nonzero size counter");
    }

    if (auto* c = subj_config(j))
        add("typed-unblock", !is_blocked(*c), "a typed configuration is blocked");
}

inline void validate_rec(System sys, const DerivPtr& d, std::vector<std::size_t>& path, MetaReport& rep) {
    std::string where = "node [";
    for (size_t i = 0; i < path.size(); ++i) where += (i ? "," : "") + std::to_string(path[i]);
    where += "]";
    validate_node(sys, d, where, rep);
    for (size_t i = 0; i < d->premises.size(); ++i) {
        path.push_back(i);
        validate_rec(sys, d->premises[i], path, rep);
        path.pop_back();
    }
}

}  // namespace detail

// Asserts the meta-lemmas on one concrete derivation: one pass/fail entry per
// property, with the first failing node in the detail.
inline MetaReport validate_metatheory(System sys, const DerivPtr& d) {
    MetaReport failures;
    std::vector<std::size_t> path;
    detail::validate_rec(sys, d, path, failures);
    static const char* props[] = {"relevance",
                                  "values-not-neutral",
                                  "notabs-implies-negabs",
                                  "tight-spreading",
                                  "zero-counters-iff-normal",
                                  "size-counter",
                                  "zero-counters-equal-states",
                                  "states-and-state-types",
                                  "zero-size-store",
                                  "typed-unblock"};
    MetaReport rep;
    for (const char* p : props) {
        MetaCheck c{p, true, ""};
        for (const auto& f : failures.checks)
            if (f.property == p && !f.pass) {
                c.pass = false;
                c.detail = f.detail;
                break;
            }
        rep.checks.push_back(std::move(c));
    }
    return rep;
}

}  // namespace lamq
