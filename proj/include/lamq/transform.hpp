#pragma once

// Derivation-to-derivation transformations: split/merge for values and
// states, substitution and anti-substitution, and one-step subject
// reduction/expansion for both systems. Each follows the corresponding
// constructive proof as a deterministic structural recursion; nothing here
// searches. Public entry points re-check their output.

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lamq/derivation.hpp"

namespace lamq {

struct TransformError : std::runtime_error {
    enum class Kind {
        PartitionMismatch,
        SubjectMismatch,
        LocationUnbound,
        MultisetMismatch,
        DecompositionFailure,
        NotTight,
        StepMismatch,
        DuplicateLocation,
        Internal
    };
    Kind kind;
    TransformError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

namespace detail {

[[noreturn]] inline void xfail(TransformError::Kind k, const std::string& msg) {
    throw TransformError(k, msg);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// judgement builders: conclusion computed from the premises, mirroring the
// typing rules' arithmetic

inline DerivPtr build_ax(const std::string& x, const TypePtr& sigma) {
    return mk_deriv(Rule::Ax, {env_single(x, mk_multi({sigma})), mk_var(x), sigma, {}});
}

inline DerivPtr build_many(const TermPtr& v, std::vector<DerivPtr> premises) {
    if (!is_value(v)) detail::xfail(TransformError::Kind::SubjectMismatch, "many subject must be a value");
    std::vector<TypePtr> elems;
    TypeEnv env;
    Counters sum;
    for (const auto& p : premises) {
        elems.push_back(*asg_type(p->conclusion));
        env = env_union(env, p->conclusion.env);
        sum = sum + p->conclusion.counters;
    }
    return mk_deriv(Rule::Many, {env, v, ty_multi(mk_multi(std::move(elems))), sum}, std::move(premises));
}

inline DerivPtr empty_many(const Value& v) { return build_many(v.term, {}); }

// derivation of a variable at a multi type, one axiom per element
inline DerivPtr var_multi_deriv(const std::string& z, const Multi& m) {
    std::vector<DerivPtr> ps;
    for (const auto& sigma : m.elems) ps.push_back(build_ax(z, sigma));
    return build_many(mk_var(z), std::move(ps));
}

inline DerivPtr build_lam(const std::string& binder, const DerivPtr& body) {
    const Judgement& p = body->conclusion;
    TypePtr arrow = ty_arrow(p.env.get(binder), *asg_type(p));
    TermPtr subj = mk_abs(binder, *subj_term(p));
    return mk_deriv(Rule::Lam, {env_remove(p.env, binder), subj, arrow, p.counters}, {body});
}

inline DerivPtr build_lamp(const TermPtr& abs) {
    return mk_deriv(Rule::LamP, {TypeEnv{}, abs, ty_ab(), {}});
}

inline DerivPtr build_app_v(const DerivPtr& fn, const DerivPtr& arg) {
    const Judgement& pf = fn->conclusion;
    const Judgement& pa = arg->conclusion;
    const TypePtr& fty = *asg_type(pf);
    if (fty->kind != TypeKind::Arrow)
        detail::xfail(TransformError::Kind::Internal, "build_app_v: function premise is not an arrow");
    Judgement j{env_union(pf.env, pa.env), mk_app(*subj_term(pf), *subj_term(pa)), fty->cod,
                Counters{1 + pf.counters.b + pa.counters.b, 0, pf.counters.sz + pa.counters.sz}};
    return mk_deriv(Rule::App, std::move(j), {fn, arg});
}

inline DerivPtr build_appp1_v(const DerivPtr& fn, const DerivPtr& arg) {
    const Judgement& pf = fn->conclusion;
    const Judgement& pa = arg->conclusion;
    Judgement j{env_union(pf.env, pa.env), mk_app(*subj_term(pf), *subj_term(pa)), ty_neut(),
                Counters{pf.counters.b + pa.counters.b, 0, 1 + pf.counters.sz + pa.counters.sz}};
    return mk_deriv(Rule::AppP1, std::move(j), {fn, arg});
}

inline DerivPtr build_appp2_v(const DerivPtr& fn, const DerivPtr& arg) {
    const Judgement& pf = fn->conclusion;
    const Judgement& pa = arg->conclusion;
    Judgement j{env_union(pf.env, pa.env), mk_app(*subj_term(pf), *subj_term(pa)), ty_neut(),
                Counters{pf.counters.b + pa.counters.b, 0, 1 + pf.counters.sz + pa.counters.sz}};
    return mk_deriv(Rule::AppP2, std::move(j), {fn, arg});
}

inline DerivPtr build_lift(const DerivPtr& value, const StateType& s) {
    const Judgement& p = value->conclusion;
    TypePtr mon = ty_monadic(s, ConfigType{*asg_type(p), s});
    return mk_deriv(Rule::Lift, {p.env, p.subject, mon, p.counters}, {value});
}

inline DerivPtr build_app_gs(const DerivPtr& fn, const DerivPtr& arg) {
    const Judgement& pf = fn->conclusion;
    const Judgement& pa = arg->conclusion;
    const TypePtr& fty = *asg_type(pf);
    const TypePtr& aty = *asg_type(pa);
    if (fty->kind != TypeKind::Arrow || fty->cod->kind != TypeKind::Monadic)
        detail::xfail(TransformError::Kind::Internal, "build_app_gs: function premise shape");
    TypePtr mon = ty_monadic(aty->s_in, fty->cod->out);
    Judgement j{env_union(pf.env, pa.env), mk_app(*subj_term(pf), *subj_term(pa)), mon,
                Counters{1, 0, 0} + pf.counters + pa.counters};
    return mk_deriv(Rule::App, std::move(j), {fn, arg});
}

inline DerivPtr build_appp1_gs(const std::string& head, TightConst head_const, const DerivPtr& arg) {
    const Judgement& pa = arg->conclusion;
    const TypePtr& aty = *asg_type(pa);
    TypePtr mon = ty_monadic(aty->s_in, ConfigType{ty_neut(), aty->out.state});
    Judgement j{env_union(env_single(head, mk_multi({ty_tight(head_const)})), pa.env),
                mk_app(mk_var(head), *subj_term(pa)), mon,
                Counters{pa.counters.b, pa.counters.m, 1 + pa.counters.sz}};
    return mk_deriv(Rule::AppP1, std::move(j), {arg});
}

inline DerivPtr build_appp2_gs(const TermPtr& abs_head, const DerivPtr& arg) {
    const Judgement& pa = arg->conclusion;
    Judgement j{pa.env, mk_app(abs_head, *subj_term(pa)), *asg_type(pa),
                Counters{pa.counters.b, pa.counters.m, 1 + pa.counters.sz}};
    return mk_deriv(Rule::AppP2, std::move(j), {arg});
}

inline DerivPtr build_get(const std::string& loc, const std::string& binder, const DerivPtr& cont) {
    const Judgement& p = cont->conclusion;
    const TypePtr& pty = *asg_type(p);
    StateType in = state_type_union(state_type_single(loc, p.env.get(binder)), pty->s_in);
    TypePtr mon = ty_monadic(std::move(in), pty->out);
    TermPtr subj = mk_get(loc, binder, *subj_term(p));
    return mk_deriv(Rule::Get, {env_remove(p.env, binder), subj, mon,
                                Counters{p.counters.b, 1 + p.counters.m, p.counters.sz}},
                    {cont});
}

// keep_empty_loc: the written location stays in the conclusion's input state
// type at the empty multiset (the overwrite case).
inline DerivPtr build_set(const std::string& loc, const DerivPtr& value, const DerivPtr& cont,
                          bool keep_empty_loc) {
    const Judgement& pv = value->conclusion;
    const Judgement& pc = cont->conclusion;
    const TypePtr& cty = *asg_type(pc);
    StateType in = state_type_remove(cty->s_in, loc);
    if (keep_empty_loc) in = state_type_union(state_type_single(loc, mk_multi({})), in);
    TypePtr mon = ty_monadic(std::move(in), cty->out);
    TermPtr subj = mk_set(loc, *subj_term(pv), *subj_term(pc));
    return mk_deriv(Rule::Set, {env_union(pv.env, pc.env), subj, mon,
                                Counters{0, 1, 0} + pv.counters + pc.counters},
                    {value, cont});
}

inline DerivPtr build_emp() { return mk_deriv(Rule::Emp, {TypeEnv{}, State{}, StateType{}, {}}); }

inline DerivPtr build_upd(const std::string& loc, const Value& v, const DerivPtr& value,
                          const DerivPtr& tail) {
    const Judgement& pv = value->conclusion;
    const Judgement& pt = tail->conclusion;
    const StateType& ts = *asg_state_type(pt);
    if (ts.entries.count(loc))
        detail::xfail(TransformError::Kind::DuplicateLocation,
                      "state update on a location already typed in the tail");
    StateType st = state_type_union(state_type_single(loc, (*asg_type(pv))->multi), ts);
    State subj;
    subj.binds.push_back({loc, v});
    const State& rest = *subj_state(pt);
    subj.binds.insert(subj.binds.end(), rest.binds.begin(), rest.binds.end());
    return mk_deriv(Rule::Upd,
                    {env_union(pv.env, pt.env), std::move(subj), std::move(st), pv.counters + pt.counters},
                    {value, tail});
}

inline DerivPtr build_conf(const DerivPtr& term, const DerivPtr& state) {
    const Judgement& pt = term->conclusion;
    const Judgement& ps = state->conclusion;
    const TypePtr& tty = *asg_type(pt);
    Configuration subj{*subj_term(pt), *subj_state(ps)};
    return mk_deriv(Rule::Conf,
                    {env_union(pt.env, ps.env), std::move(subj), tty->out, pt.counters + ps.counters},
                    {term, state});
}

// ---------------------------------------------------------------------------
// free-variable renaming on derivations; `to` must be entirely fresh

namespace detail {

inline Subject subject_rename(const Subject& s, const std::string& from, const std::string& to) {
    Value tov(mk_var(to));
    if (auto* t = std::get_if<TermPtr>(&s)) return substitute(*t, from, tov);
    if (auto* st = std::get_if<State>(&s)) {
        State out = *st;
        for (auto& b : out.binds) b.val = Value(substitute(b.val.term, from, tov));
        return out;
    }
    Configuration c = std::get<Configuration>(s);
    c.term = substitute(c.term, from, tov);
    for (auto& b : c.state.binds) b.val = Value(substitute(b.val.term, from, tov));
    return c;
}

}  // namespace detail

inline DerivPtr rename_free_deriv(const DerivPtr& d, const std::string& from, const std::string& to) {
    if (from == to) return d;
    Judgement j = d->conclusion;
    j.subject = detail::subject_rename(j.subject, from, to);
    auto it = j.env.m.find(from);
    if (it != j.env.m.end()) {
        Multi m = it->second;
        j.env.m.erase(it);
        j.env.m[to] = std::move(m);
    }
    std::vector<DerivPtr> ps;
    // a premise under a binder that rebinds `from` talks about the bound
    // variable, not the renamed one
    bool shadowed = (d->rule == Rule::Lam || d->rule == Rule::Get) &&
                    subj_term(d->conclusion) && (*subj_term(d->conclusion))->var == from;
    for (const auto& p : d->premises) ps.push_back(shadowed ? p : rename_free_deriv(p, from, to));
    return mk_deriv(d->rule, std::move(j), std::move(ps));
}

// ---------------------------------------------------------------------------
// split / merge for values

inline std::vector<DerivPtr> split_value(const DerivPtr& d, const std::vector<Multi>& parts) {
    if (d->rule != Rule::Many)
        detail::xfail(TransformError::Kind::DecompositionFailure, "split_value needs a many node");
    const TypePtr& ty = *asg_type(d->conclusion);
    Multi whole;
    for (const auto& p : parts) whole = multi_union(whole, p);
    if (!multi_eq(whole, ty->multi))
        detail::xfail(TransformError::Kind::PartitionMismatch, "parts do not union to the multiset");
    std::vector<bool> used(d->premises.size(), false);
    const TermPtr& v = *subj_term(d->conclusion);
    std::vector<DerivPtr> out;
    for (const auto& part : parts) {
        std::vector<DerivPtr> picked;
        for (const auto& sigma : part.elems) {
            bool found = false;
            for (size_t i = 0; i < d->premises.size(); ++i) {
                if (used[i]) continue;
                if (type_eq(*asg_type(d->premises[i]->conclusion), sigma)) {
                    used[i] = true;
                    picked.push_back(d->premises[i]);
                    found = true;
                    break;
                }
            }
            if (!found)
                detail::xfail(TransformError::Kind::PartitionMismatch, "no premise left for a part element");
        }
        out.push_back(build_many(v, std::move(picked)));
    }
    return out;
}

inline DerivPtr merge_values(const std::vector<DerivPtr>& parts, std::optional<Value> subject = {}) {
    if (parts.empty()) {
        if (!subject)
            detail::xfail(TransformError::Kind::SubjectMismatch, "merging nothing needs an explicit value");
        return empty_many(*subject);
    }
    const TermPtr& v = *subj_term(parts.front()->conclusion);
    std::vector<DerivPtr> premises;
    for (const auto& p : parts) {
        if (p->rule != Rule::Many)
            detail::xfail(TransformError::Kind::DecompositionFailure, "merge_values needs many nodes");
        if (!term_eq(*subj_term(p->conclusion), v))
            detail::xfail(TransformError::Kind::SubjectMismatch, "merge_values subjects differ");
        premises.insert(premises.end(), p->premises.begin(), p->premises.end());
    }
    return build_many(v, std::move(premises));
}

// ---------------------------------------------------------------------------
// state derivation decomposition

// Per-binding value derivations of an upd chain, in list order.
inline std::vector<std::pair<std::string, DerivPtr>> decompose_state_deriv(const DerivPtr& d) {
    std::vector<std::pair<std::string, DerivPtr>> out;
    const Derivation* cur = d.get();
    while (cur->rule == Rule::Upd) {
        const State& s = *subj_state(cur->conclusion);
        out.emplace_back(s.binds.front().loc, cur->premises[0]);
        cur = cur->premises[1].get();
    }
    if (cur->rule != Rule::Emp)
        detail::xfail(TransformError::Kind::DecompositionFailure, "state derivation is not an upd chain");
    return out;
}

// Upd chain over `state` with the given per-location value derivations;
// locations without an entry are typed with the empty multiset.
inline DerivPtr rebuild_state_deriv(const State& state, const std::map<std::string, DerivPtr>& derivs) {
    DerivPtr cur = build_emp();
    for (auto it = state.binds.rbegin(); it != state.binds.rend(); ++it) {
        auto found = derivs.find(it->loc);
        DerivPtr vd = found != derivs.end() ? found->second : empty_many(it->val);
        if (!term_eq(*subj_term(vd->conclusion), it->val.term))
            detail::xfail(TransformError::Kind::SubjectMismatch,
                          "state rebuild: derivation types a different value");
        cur = build_upd(it->loc, it->val, vd, cur);
    }
    return cur;
}

// Split at a bound location: derivation of its (unique) stored value and a
// derivation of the state with that binding removed.
inline std::pair<DerivPtr, DerivPtr> split_state(const DerivPtr& d, const std::string& l) {
    auto parts = decompose_state_deriv(d);
    const State& s = *subj_state(d->conclusion);
    DerivPtr vd;
    std::map<std::string, DerivPtr> rest;
    State rest_state;
    bool taken = false;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (!taken && parts[i].first == l) {
            vd = parts[i].second;
            taken = true;
            continue;
        }
        rest[parts[i].first] = parts[i].second;
        rest_state.binds.push_back(s.binds[i]);
    }
    if (!taken) detail::xfail(TransformError::Kind::LocationUnbound, "split_state: location not bound");
    return {vd, rebuild_state_deriv(rest_state, rest)};
}

// ---------------------------------------------------------------------------
// substitution

namespace detail {

inline DerivPtr subst_rec(System sys, const DerivPtr& dt, const std::string& x, const DerivPtr& dv);

// splits dv along the premise environments' x entries and recurses pairwise
inline std::pair<DerivPtr, DerivPtr> subst_two(System sys, const DerivPtr& p0, const DerivPtr& p1,
                                               const std::string& x, const DerivPtr& dv) {
    std::vector<Multi> parts{p0->conclusion.env.get(x), p1->conclusion.env.get(x)};
    auto dvs = split_value(dv, parts);
    return {subst_rec(sys, p0, x, dvs[0]), subst_rec(sys, p1, x, dvs[1])};
}

inline DerivPtr subst_under_binder_deriv(System sys, const DerivPtr& premise, const std::string& binder,
                                         const std::string& x, const DerivPtr& dv, std::string& out_binder) {
    const TermPtr vterm = *subj_term(dv->conclusion);
    if (free_vars(vterm).count(binder)) {
        const TermPtr& body = *subj_term(premise->conclusion);
        std::set<std::string> avoid = all_vars(body);
        auto av = all_vars(vterm);
        avoid.insert(av.begin(), av.end());
        avoid.insert(x);
        std::string nb = fresh_name(binder, avoid);
        out_binder = nb;
        return subst_rec(sys, rename_free_deriv(premise, binder, nb), x, dv);
    }
    out_binder = binder;
    return subst_rec(sys, premise, x, dv);
}

inline DerivPtr subst_rec(System sys, const DerivPtr& dt, const std::string& x, const DerivPtr& dv) {
    const Judgement& j = dt->conclusion;
    const TermPtr& t = *subj_term(j);
    const TermPtr vterm = *subj_term(dv->conclusion);
    Value v(vterm);
    if (!free_vars(t).count(x)) return dt;  // dv is the empty many here

    switch (dt->rule) {
        case Rule::Ax: {
            // t = x, the multiset is a singleton: hand back its premise
            if (dv->premises.size() != 1)
                xfail(TransformError::Kind::Internal, "substitution at an axiom expects one premise");
            return dv->premises[0];
        }
        case Rule::Lam: {
            std::string nb;
            DerivPtr body = subst_under_binder_deriv(sys, dt->premises[0], t->var, x, dv, nb);
            return build_lam(nb, body);
        }
        case Rule::Get: {
            std::string nb;
            DerivPtr body = subst_under_binder_deriv(sys, dt->premises[0], t->var, x, dv, nb);
            return build_get(t->loc, nb, body);
        }
        case Rule::LamP:
            return build_lamp(substitute(t, x, v));
        case Rule::Many: {
            std::vector<Multi> parts;
            for (const auto& p : dt->premises) parts.push_back(p->conclusion.env.get(x));
            auto dvs = split_value(dv, parts);
            std::vector<DerivPtr> ps;
            for (size_t i = 0; i < dt->premises.size(); ++i)
                ps.push_back(subst_rec(sys, dt->premises[i], x, dvs[i]));
            return build_many(substitute(t, x, v), std::move(ps));
        }
        case Rule::Lift: {
            DerivPtr inner = subst_rec(sys, dt->premises[0], x, dv);
            return build_lift(inner, (*asg_type(j))->s_in);
        }
        case Rule::App: {
            auto [f, a] = subst_two(sys, dt->premises[0], dt->premises[1], x, dv);
            return sys == System::V ? build_app_v(f, a) : build_app_gs(f, a);
        }
        case Rule::Set: {
            auto [w, cont] = subst_two(sys, dt->premises[0], dt->premises[1], x, dv);
            bool keep = (*asg_type(j))->s_in.entries.count(t->loc) > 0;
            return build_set(t->loc, w, cont, keep);
        }
        case Rule::AppP1: {
            if (sys == System::V) {
                auto [f, a] = subst_two(sys, dt->premises[0], dt->premises[1], x, dv);
                return build_appp1_v(f, a);
            }
            // GS: single premise, variable head
            const std::string& head = t->a->var;
            const DerivPtr& arg = dt->premises[0];
            Multi cx = j.env.get(head);
            Multi diff = multi_minus(cx, arg->conclusion.env.get(head));
            TightConst head_const = diff.elems[0]->tc;
            if (head != x) {
                DerivPtr a2 = subst_rec(sys, arg, x, dv);
                return build_appp1_gs(head, head_const, a2);
            }
            // the head itself is substituted
            auto dvs = split_value(dv, {diff, arg->conclusion.env.get(x)});
            DerivPtr a2 = subst_rec(sys, arg, x, dvs[1]);
            const DerivPtr& head_part = dvs[0]->premises[0];
            const TermPtr& hsub = *subj_term(head_part->conclusion);
            if (hsub->kind == TermKind::Var) return build_appp1_gs(hsub->var, head_const, a2);
            // abstraction head: the argument is neutral, switch to appp2
            return build_appp2_gs(hsub, a2);
        }
        case Rule::AppP2: {
            if (sys == System::V) {
                auto [f, a] = subst_two(sys, dt->premises[0], dt->premises[1], x, dv);
                return build_appp2_v(f, a);
            }
            DerivPtr a2 = subst_rec(sys, dt->premises[0], x, dv);
            return build_appp2_gs(substitute(t->a, x, v), a2);
        }
        default:
            xfail(TransformError::Kind::Internal, "substitution hit a non-term rule");
    }
}

}  // namespace detail

// The substitution lemma, constructively: from a derivation of t under
// Gamma; x:M and a (many-rooted) derivation of v:M, a derivation of t{x:=v}
// with summed environments and counters.
inline DerivPtr subst_derivation(System sys, const DerivPtr& dt, const std::string& x, const DerivPtr& dv) {
    if (dv->rule != Rule::Many)
        detail::xfail(TransformError::Kind::DecompositionFailure,
                      "subst_derivation: value derivation must end with many");
    const TypePtr& vty = *asg_type(dv->conclusion);
    if (!multi_eq(vty->multi, dt->conclusion.env.get(x)))
        detail::xfail(TransformError::Kind::MultisetMismatch,
                      "subst_derivation: multiset at x differs from the value's");
    return detail::subst_rec(sys, dt, x, dv);
}

// ---------------------------------------------------------------------------
// anti-substitution

struct AntiSubst {
    DerivPtr dt;  // derives (an alpha-variant of) t under Gamma; x:M
    DerivPtr dv;  // many-rooted derivation of v:M
};

namespace detail {

inline AntiSubst antisubst_rec(System sys, const DerivPtr& d, const TermPtr& t, const std::string& x,
                               const Value& v);

// t = x, the derivation types v itself
inline AntiSubst antisubst_value(System sys, const DerivPtr& d, const std::string& x, const Value& v) {
    if (v.term->kind == TermKind::Var) {
        const std::string& z = v.term->var;
        Multi m = d->conclusion.env.get(z);
        DerivPtr dt = rename_free_deriv(d, z, x);
        return {dt, var_multi_deriv(z, m)};
    }
    switch (d->rule) {
        case Rule::Lam:
            return {build_ax(x, *asg_type(d->conclusion)), build_many(v.term, {d})};
        case Rule::LamP:
            return {build_ax(x, ty_ab()), build_many(v.term, {d})};
        case Rule::Many: {
            std::vector<DerivPtr> axs;
            for (const auto& p : d->premises) axs.push_back(build_ax(x, *asg_type(p->conclusion)));
            return {build_many(mk_var(x), std::move(axs)), d};
        }
        case Rule::Lift: {
            AntiSubst inner = antisubst_value(sys, d->premises[0], x, v);
            return {build_lift(inner.dt, (*asg_type(d->conclusion))->s_in), inner.dv};
        }
        default:
            xfail(TransformError::Kind::DecompositionFailure,
                  "anti-substitution: unexpected rule at a substituted value");
    }
}

inline AntiSubst antisubst_under_binder(System sys, const DerivPtr& premise, const std::string& binder,
                                        const std::string& d_binder, const TermPtr& body,
                                        const std::string& x, const Value& v) {
    TermPtr body2 = binder == d_binder ? body : rename_free(body, binder, d_binder);
    return antisubst_rec(sys, premise, body2, x, v);
}

inline AntiSubst antisubst_rec(System sys, const DerivPtr& d, const TermPtr& t, const std::string& x,
                               const Value& v) {
    if (!free_vars(t).count(x)) return {d, empty_many(v)};
    if (t->kind == TermKind::Var) return antisubst_value(sys, d, x, v);

    const TermPtr& dsub = *subj_term(d->conclusion);
    switch (t->kind) {
        case TermKind::Abs: {
            switch (d->rule) {
                case Rule::Lam: {
                    AntiSubst inner =
                        antisubst_under_binder(sys, d->premises[0], t->var, dsub->var, t->a, x, v);
                    return {build_lam(dsub->var, inner.dt), inner.dv};
                }
                case Rule::LamP: {
                    TermPtr subj = mk_abs(dsub->var, t->var == dsub->var
                                                         ? t->a
                                                         : rename_free(t->a, t->var, dsub->var));
                    return {build_lamp(subj), empty_many(v)};
                }
                case Rule::Many: {
                    std::vector<DerivPtr> dts;
                    std::vector<DerivPtr> dvs;
                    TermPtr subj;
                    for (const auto& p : d->premises) {
                        AntiSubst inner = antisubst_rec(sys, p, t, x, v);
                        subj = *subj_term(inner.dt->conclusion);
                        dts.push_back(inner.dt);
                        dvs.push_back(inner.dv);
                    }
                    if (!subj) subj = t;  // no premises: subject unchanged
                    return {build_many(subj, std::move(dts)), merge_values(dvs, v)};
                }
                case Rule::Lift: {
                    AntiSubst inner = antisubst_rec(sys, d->premises[0], t, x, v);
                    return {build_lift(inner.dt, (*asg_type(d->conclusion))->s_in), inner.dv};
                }
                default:
                    xfail(TransformError::Kind::DecompositionFailure,
                          "anti-substitution: abstraction subject under unexpected rule");
            }
        }
        case TermKind::App: {
            switch (d->rule) {
                case Rule::App: {
                    AntiSubst f = antisubst_rec(sys, d->premises[0], t->a, x, v);
                    AntiSubst a = antisubst_rec(sys, d->premises[1], t->b, x, v);
                    DerivPtr dv = merge_values({f.dv, a.dv});
                    DerivPtr dt = sys == System::V ? build_app_v(f.dt, a.dt) : build_app_gs(f.dt, a.dt);
                    return {dt, dv};
                }
                case Rule::AppP1: {
                    if (sys == System::V) {
                        AntiSubst f = antisubst_rec(sys, d->premises[0], t->a, x, v);
                        AntiSubst a = antisubst_rec(sys, d->premises[1], t->b, x, v);
                        return {build_appp1_v(f.dt, a.dt), merge_values({f.dv, a.dv})};
                    }
                    // GS: head is a variable in d; in t it is either the same
                    // variable or x itself (then v is that variable)
                    AntiSubst a = antisubst_rec(sys, d->premises[0], t->b, x, v);
                    Multi diff = multi_minus(d->conclusion.env.get(dsub->a->var),
                                             d->premises[0]->conclusion.env.get(dsub->a->var));
                    TightConst head_const = diff.elems[0]->tc;
                    if (t->a->var == x) {
                        DerivPtr head_dv = var_multi_deriv(v.term->var, diff);
                        return {build_appp1_gs(x, head_const, a.dt), merge_values({head_dv, a.dv})};
                    }
                    return {build_appp1_gs(t->a->var, head_const, a.dt), a.dv};
                }
                case Rule::AppP2: {
                    if (sys == System::V) {
                        AntiSubst f = antisubst_rec(sys, d->premises[0], t->a, x, v);
                        AntiSubst a = antisubst_rec(sys, d->premises[1], t->b, x, v);
                        return {build_appp2_v(f.dt, a.dt), merge_values({f.dv, a.dv})};
                    }
                    AntiSubst a = antisubst_rec(sys, d->premises[0], t->b, x, v);
                    if (t->a->kind == TermKind::Var) {
                        // an abstraction v replaced the head: type it ab and
                        // fall back to the variable-headed persistent rule
                        DerivPtr head_dv = build_many(v.term, {build_lamp(v.term)});
                        return {build_appp1_gs(t->a->var, TightConst::Ab, a.dt),
                                merge_values({head_dv, a.dv})};
                    }
                    // the head abstraction is untyped by appp2; keep the original
                    return {build_appp2_gs(t->a, a.dt), a.dv};
                }
                default:
                    xfail(TransformError::Kind::DecompositionFailure,
                          "anti-substitution: application subject under unexpected rule");
            }
        }
        case TermKind::Get: {
            if (d->rule != Rule::Get)
                xfail(TransformError::Kind::DecompositionFailure, "anti-substitution: expected a get node");
            AntiSubst inner = antisubst_under_binder(sys, d->premises[0], t->var, dsub->var, t->a, x, v);
            return {build_get(t->loc, dsub->var, inner.dt), inner.dv};
        }
        case TermKind::Set: {
            if (d->rule != Rule::Set)
                xfail(TransformError::Kind::DecompositionFailure, "anti-substitution: expected a set node");
            AntiSubst w = antisubst_rec(sys, d->premises[0], t->a, x, v);
            AntiSubst c = antisubst_rec(sys, d->premises[1], t->b, x, v);
            bool keep = (*asg_type(d->conclusion))->s_in.entries.count(t->loc) > 0;
            return {build_set(t->loc, w.dt, c.dt, keep), merge_values({w.dv, c.dv})};
        }
        default:
            xfail(TransformError::Kind::DecompositionFailure, "anti-substitution: unexpected term");
    }
}

}  // namespace detail

// Inverse of substitution, directed by the original term: from a derivation
// of t{x:=v} recover a derivation of t (up to alpha) under Gamma; x:M and a
// derivation of v:M, with environments and counters splitting additively.
inline AntiSubst antisubst_derivation(System sys, const DerivPtr& d, const TermPtr& t, const std::string& x,
                                      const Value& v) {
    if (!term_eq(substitute(t, x, v), *subj_term(d->conclusion)))
        detail::xfail(TransformError::Kind::DecompositionFailure,
                      "anti-substitution: derivation does not type t{x:=v}");
    return detail::antisubst_rec(sys, d, t, x, v);
}

// ---------------------------------------------------------------------------
// subject reduction / expansion, system V

namespace detail {

inline DerivPtr red_v(const DerivPtr& d) {
    const TermPtr& t = *subj_term(d->conclusion);
    if (t->kind != TermKind::App) xfail(TransformError::Kind::StepMismatch, "subject is normal");
    const TermPtr& f = t->a;
    const TermPtr& a = t->b;
    if (f->kind == TermKind::Abs && is_value(a)) {
        if (d->rule != Rule::App)
            xfail(TransformError::Kind::StepMismatch, "beta redex not typed by app");
        const DerivPtr& fn = d->premises[0];
        if (fn->rule != Rule::Lam)
            xfail(TransformError::Kind::StepMismatch, "redex head not typed by lam");
        return subst_derivation(System::V, fn->premises[0], f->var, d->premises[1]);
    }
    if (step_cbv(f)) {
        DerivPtr f2 = red_v(d->premises[0]);
        switch (d->rule) {
            case Rule::App: return build_app_v(f2, d->premises[1]);
            case Rule::AppP1: return build_appp1_v(f2, d->premises[1]);
            case Rule::AppP2: return build_appp2_v(f2, d->premises[1]);
            default: xfail(TransformError::Kind::StepMismatch, "application under unexpected rule");
        }
    }
    if (step_cbv(a)) {
        DerivPtr a2 = red_v(d->premises[1]);
        switch (d->rule) {
            case Rule::App: return build_app_v(d->premises[0], a2);
            case Rule::AppP1: return build_appp1_v(d->premises[0], a2);
            case Rule::AppP2: return build_appp2_v(d->premises[0], a2);
            default: xfail(TransformError::Kind::StepMismatch, "application under unexpected rule");
        }
    }
    xfail(TransformError::Kind::StepMismatch, "subject is normal");
}

inline DerivPtr exp_v(const DerivPtr& d, const TermPtr& before) {
    if (before->kind != TermKind::App)
        xfail(TransformError::Kind::StepMismatch, "term before the step must be an application");
    const TermPtr& f = before->a;
    const TermPtr& a = before->b;
    if (f->kind == TermKind::Abs && is_value(a)) {
        AntiSubst parts = antisubst_derivation(System::V, d, f->a, f->var, Value(a));
        return build_app_v(build_lam(f->var, parts.dt), parts.dv);
    }
    if (auto f2 = step_cbv(f)) {
        if (!term_eq(*subj_term(d->premises[0]->conclusion), *f2))
            xfail(TransformError::Kind::StepMismatch, "left premise does not match the reduct");
        DerivPtr fd = exp_v(d->premises[0], f);
        switch (d->rule) {
            case Rule::App: return build_app_v(fd, d->premises[1]);
            case Rule::AppP1: return build_appp1_v(fd, d->premises[1]);
            case Rule::AppP2: return build_appp2_v(fd, d->premises[1]);
            default: xfail(TransformError::Kind::StepMismatch, "application under unexpected rule");
        }
    }
    if (auto a2 = step_cbv(a)) {
        if (!term_eq(*subj_term(d->premises[1]->conclusion), *a2))
            xfail(TransformError::Kind::StepMismatch, "right premise does not match the reduct");
        DerivPtr ad = exp_v(d->premises[1], a);
        switch (d->rule) {
            case Rule::App: return build_app_v(d->premises[0], ad);
            case Rule::AppP1: return build_appp1_v(d->premises[0], ad);
            case Rule::AppP2: return build_appp2_v(d->premises[0], ad);
            default: xfail(TransformError::Kind::StepMismatch, "application under unexpected rule");
        }
    }
    xfail(TransformError::Kind::StepMismatch, "term before the step is normal");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// subject reduction / expansion, system GS (on configuration derivations)

namespace detail {

inline size_t arg_premise_index(Rule r) {
    switch (r) {
        case Rule::App: return 1;
        case Rule::AppP1:
        case Rule::AppP2: return 0;
        default: xfail(TransformError::Kind::StepMismatch, "application under unexpected rule");
    }
}

inline DerivPtr rebuild_app_gs(const DerivPtr& term_d, const DerivPtr& new_arg) {
    switch (term_d->rule) {
        case Rule::App: return build_app_gs(term_d->premises[0], new_arg);
        case Rule::AppP1: {
            const TermPtr& t = *subj_term(term_d->conclusion);
            Multi diff = multi_minus(term_d->conclusion.env.get(t->a->var),
                                     term_d->premises[0]->conclusion.env.get(t->a->var));
            return build_appp1_gs(t->a->var, diff.elems[0]->tc, new_arg);
        }
        case Rule::AppP2:
            return build_appp2_gs((*subj_term(term_d->conclusion))->a, new_arg);
        default: xfail(TransformError::Kind::StepMismatch, "application under unexpected rule");
    }
}

inline DerivPtr red_gs(const DerivPtr& d) {
    const Configuration& c = *subj_config(d->conclusion);
    const DerivPtr& T = d->premises[0];
    const DerivPtr& Sd = d->premises[1];
    const TermPtr& t = c.term;
    switch (t->kind) {
        case TermKind::App: {
            const TermPtr& f = t->a;
            const TermPtr& a = t->b;
            if (f->kind == TermKind::Abs && is_value(a)) {
                if (T->rule != Rule::App)
                    xfail(TransformError::Kind::StepMismatch, "beta redex not typed by app");
                const DerivPtr& fn = T->premises[0];
                const DerivPtr& arg = T->premises[1];
                if (fn->rule != Rule::Lam || arg->rule != Rule::Lift)
                    xfail(TransformError::Kind::StepMismatch, "beta redex premises have unexpected shape");
                DerivPtr body = subst_derivation(System::GS, fn->premises[0], f->var, arg->premises[0]);
                return build_conf(body, Sd);
            }
            // AppR: reduce inside the argument
            size_t ai = arg_premise_index(T->rule);
            DerivPtr inner = build_conf(T->premises[ai], Sd);
            DerivPtr inner2 = red_gs(inner);
            return build_conf(rebuild_app_gs(T, inner2->premises[0]), inner2->premises[1]);
        }
        case TermKind::Get: {
            if (T->rule != Rule::Get) xfail(TransformError::Kind::StepMismatch, "get term not typed by get");
            const DerivPtr& cont = T->premises[0];
            const StateType& s_in = (*asg_type(cont->conclusion))->s_in;
            auto v = lookup(c.state, t->loc);
            if (!v) xfail(TransformError::Kind::StepMismatch, "get on an unbound location");
            auto [vd, rest] = split_state(Sd, t->loc);
            auto it = s_in.entries.find(t->loc);
            if (it == s_in.entries.end())
                xfail(TransformError::Kind::StepMismatch,
                      "continuation input state forgets the read location (weakening unsupported)");
            Multi gx = cont->conclusion.env.get(t->var);
            auto vparts = split_value(vd, {gx, it->second});
            DerivPtr body = subst_derivation(System::GS, cont, t->var, vparts[0]);
            // retype the read binding with what the continuation still expects
            auto smap_parts = decompose_state_deriv(Sd);
            std::map<std::string, DerivPtr> smap;
            for (auto& [l, pd] : smap_parts) smap[l] = pd;
            smap[t->loc] = vparts[1];
            DerivPtr Sd2 = rebuild_state_deriv(c.state, smap);
            return build_conf(body, Sd2);
        }
        case TermKind::Set: {
            if (T->rule != Rule::Set) xfail(TransformError::Kind::StepMismatch, "set term not typed by set");
            const DerivPtr& vd = T->premises[0];
            const DerivPtr& cont = T->premises[1];
            State q = state_write(c.state, t->loc, Value(t->a));
            auto smap_parts = decompose_state_deriv(Sd);
            std::map<std::string, DerivPtr> smap;
            for (auto& [l, pd] : smap_parts) smap[l] = pd;
            smap.erase(t->loc);  // the overwritten binding was typed [] and is dropped
            smap[t->loc] = vd;
            DerivPtr Sd2 = rebuild_state_deriv(q, smap);
            return build_conf(cont, Sd2);
        }
        default:
            xfail(TransformError::Kind::StepMismatch, "configuration is final");
    }
}

inline DerivPtr exp_gs(const DerivPtr& d, const Configuration& before) {
    const DerivPtr& T = d->premises[0];
    const DerivPtr& Sd = d->premises[1];
    const TermPtr& t = before.term;
    switch (t->kind) {
        case TermKind::App: {
            const TermPtr& f = t->a;
            const TermPtr& a = t->b;
            if (f->kind == TermKind::Abs && is_value(a)) {
                AntiSubst parts = antisubst_derivation(System::GS, T, f->a, f->var, Value(a));
                const TypePtr& mon = *asg_type(parts.dt->conclusion);
                DerivPtr fn = build_lam(f->var, parts.dt);
                DerivPtr arg = build_lift(parts.dv, mon->s_in);
                return build_conf(build_app_gs(fn, arg), Sd);
            }
            // AppR: expand inside the argument
            size_t ai = arg_premise_index(T->rule);
            auto inner_before = Configuration{a, before.state};
            DerivPtr inner = build_conf(T->premises[ai], Sd);
            DerivPtr inner2 = exp_gs(inner, inner_before);
            return build_conf(rebuild_app_gs(T, inner2->premises[0]), inner2->premises[1]);
        }
        case TermKind::Get: {
            auto v = lookup(before.state, t->loc);
            if (!v) xfail(TransformError::Kind::StepMismatch, "get on an unbound location");
            AntiSubst parts = antisubst_derivation(System::GS, T, t->a, t->var, *v);
            DerivPtr get_d = build_get(t->loc, t->var, parts.dt);
            auto smap_parts = decompose_state_deriv(Sd);
            std::map<std::string, DerivPtr> smap;
            for (auto& [l, pd] : smap_parts) smap[l] = pd;
            auto it = smap.find(t->loc);
            if (it == smap.end())
                xfail(TransformError::Kind::Internal, "state derivation misses the read location");
            it->second = merge_values({parts.dv, it->second});
            DerivPtr Sd2 = rebuild_state_deriv(before.state, smap);
            return build_conf(get_d, Sd2);
        }
        case TermKind::Set: {
            // after = (cont, write(l, v, s)); T types cont, Sd types the written state
            auto smap_parts = decompose_state_deriv(Sd);
            std::map<std::string, DerivPtr> smap;
            for (auto& [l, pd] : smap_parts) smap[l] = pd;
            auto it = smap.find(t->loc);
            if (it == smap.end())
                xfail(TransformError::Kind::Internal, "written location missing from the state derivation");
            DerivPtr vd = it->second;
            smap.erase(t->loc);
            bool overwrote = lookup(before.state, t->loc).has_value();
            DerivPtr set_d = build_set(t->loc, vd, T, overwrote);
            DerivPtr Sd2 = rebuild_state_deriv(before.state, smap);  // old binding typed []
            return build_conf(set_d, Sd2);
        }
        default:
            xfail(TransformError::Kind::StepMismatch, "configuration before the step is final");
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// public entry points (tightness required; outputs re-checked)

namespace detail {

inline void require_checked(System sys, const DerivPtr& d, const char* who) {
    if (auto r = check_derivation(sys, d))
        xfail(TransformError::Kind::Internal,
              std::string(who) + " produced an unchecked derivation: " + r->reason);
}

}  // namespace detail

inline DerivPtr subject_reduction_v(const DerivPtr& d) {
    if (!is_tight_derivation(d)) detail::xfail(TransformError::Kind::NotTight, "derivation is not tight");
    DerivPtr out = detail::red_v(d);
    detail::require_checked(System::V, out, "subject_reduction_v");
    return out;
}

inline DerivPtr subject_expansion_v(const DerivPtr& d, const TermPtr& before) {
    if (!is_tight_derivation(d)) detail::xfail(TransformError::Kind::NotTight, "derivation is not tight");
    auto after = step_cbv(before);
    if (!after || !term_eq(*after, *subj_term(d->conclusion)))
        detail::xfail(TransformError::Kind::StepMismatch, "before does not step to the derived subject");
    DerivPtr out = detail::exp_v(d, before);
    detail::require_checked(System::V, out, "subject_expansion_v");
    return out;
}

inline DerivPtr subject_reduction_gs(const DerivPtr& d) {
    if (!is_tight_derivation(d)) detail::xfail(TransformError::Kind::NotTight, "derivation is not tight");
    if (d->rule != Rule::Conf)
        detail::xfail(TransformError::Kind::StepMismatch, "GS subject reduction expects a configuration");
    DerivPtr out = detail::red_gs(d);
    detail::require_checked(System::GS, out, "subject_reduction_gs");
    return out;
}

inline DerivPtr subject_expansion_gs(const DerivPtr& d, const Configuration& before) {
    if (!is_tight_derivation(d)) detail::xfail(TransformError::Kind::NotTight, "derivation is not tight");
    if (d->rule != Rule::Conf)
        detail::xfail(TransformError::Kind::StepMismatch, "GS subject expansion expects a configuration");
    auto step = step_gs(before);
    if (!step || !config_eq(step->second, *subj_config(d->conclusion)))
        detail::xfail(TransformError::Kind::StepMismatch, "before does not step to the derived subject");
    DerivPtr out = detail::exp_gs(d, before);
    detail::require_checked(System::GS, out, "subject_expansion_gs");
    return out;
}

}  // namespace lamq
