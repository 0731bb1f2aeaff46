#pragma once

// Small-step evaluators with exact step accounting. The CBV side implements
// the deterministic weak strategy (beta / AppL / AppR-with-stuck-function)
// plus the nondeterministic one-step relation used by the diamond test. The
// GS side reduces configurations with beta, get, set and AppR, classifying
// stuck configurations as blocked or normal.

#include <cstdint>
#include <optional>
#include <vector>

#include "lamq/syntax.hpp"

namespace lamq {

constexpr std::uint64_t kDefaultFuel = 10000;

// ---------------------------------------------------------------------------
// normal / neutral predicates

// Plain CBV grammars: no ::= val | ne, ne ::= x no | no ne | ne no.
inline bool is_normal_cbv(const TermPtr& t);

inline bool is_neutral_cbv(const TermPtr& t) {
    if (t->kind != TermKind::App) return false;
    const TermPtr& f = t->a;
    const TermPtr& a = t->b;
    if (f->kind == TermKind::Var && is_normal_cbv(a)) return true;
    if (is_normal_cbv(f) && is_neutral_cbv(a)) return true;
    if (is_neutral_cbv(f) && is_normal_cbv(a)) return true;
    return false;
}

inline bool is_normal_cbv(const TermPtr& t) { return is_value(t) || is_neutral_cbv(t); }

// GS grammars: ne ::= x no | (\x.t) ne, no ::= val | ne.
inline bool is_normal_gs(const TermPtr& t);

inline bool is_neutral_gs(const TermPtr& t) {
    if (t->kind != TermKind::App) return false;
    const TermPtr& f = t->a;
    const TermPtr& a = t->b;
    if (f->kind == TermKind::Var && is_normal_gs(a)) return true;
    if (f->kind == TermKind::Abs && is_neutral_gs(a)) return true;
    return false;
}

inline bool is_normal_gs(const TermPtr& t) { return is_value(t) || is_neutral_gs(t); }

// ---------------------------------------------------------------------------
// CBV deterministic reduction

inline std::optional<TermPtr> step_cbv(const TermPtr& t) {
    if (t->kind != TermKind::App) return std::nullopt;
    const TermPtr& f = t->a;
    const TermPtr& a = t->b;
    if (f->kind == TermKind::Abs && is_value(a)) return substitute(f->a, f->var, Value(a));
    if (auto f2 = step_cbv(f)) return mk_app(*f2, a);
    if (auto a2 = step_cbv(a)) return mk_app(f, *a2);  // AppR: f is stuck here
    return std::nullopt;
}

// All one-step reducts of the nondeterministic weak relation: root beta
// closed under contexts W ::= [] | W t | t W.
inline std::vector<TermPtr> step_all_cbv(const TermPtr& t) {
    std::vector<TermPtr> out;
    if (t->kind != TermKind::App) return out;
    const TermPtr& f = t->a;
    const TermPtr& a = t->b;
    if (f->kind == TermKind::Abs && is_value(a)) out.push_back(substitute(f->a, f->var, Value(a)));
    for (auto& f2 : step_all_cbv(f)) out.push_back(mk_app(f2, a));
    for (auto& a2 : step_all_cbv(a)) out.push_back(mk_app(f, a2));
    return out;
}

struct EvalResultCbv {
    bool exhausted = false;
    TermPtr last;             // normal form, or last term reached on exhaustion
    std::uint64_t beta = 0;   // steps taken
    std::vector<TermPtr> trace;  // intermediate terms, starting with the input
};

inline EvalResultCbv eval_cbv(const TermPtr& t, std::uint64_t fuel = kDefaultFuel) {
    EvalResultCbv r;
    r.last = t;
    r.trace.push_back(t);
    while (auto n = step_cbv(r.last)) {
        if (r.beta == fuel) {
            r.exhausted = true;
            return r;
        }
        r.last = *n;
        ++r.beta;
        r.trace.push_back(r.last);
    }
    return r;
}

// ---------------------------------------------------------------------------
// states

inline std::optional<Value> lookup(const State& s, const std::string& l) {
    for (const auto& b : s.binds)
        if (b.loc == l) return b.val;
    return std::nullopt;
}

inline std::set<std::string> state_dom(const State& s) {
    std::set<std::string> out;
    for (const auto& b : s.binds) out.insert(b.loc);
    return out;
}

inline bool has_duplicate_locations(const State& s) {
    return state_dom(s).size() != s.binds.size();
}

// Store v at l: the previous binding of l (if any) is removed and the new one
// goes to the front. Keeps reachable states free of shadowed bindings, which
// is what the state typing rules can handle.
inline State state_write(const State& s, const std::string& l, const Value& v) {
    State out;
    out.binds.push_back({l, v});
    bool dropped = false;
    for (const auto& b : s.binds) {
        if (!dropped && b.loc == l) {
            dropped = true;
            continue;
        }
        out.binds.push_back(b);
    }
    return out;
}

// ---------------------------------------------------------------------------
// GS configurations

enum class StepLabel { Beta, GetStep, SetStep };

inline const char* label_name(StepLabel l) {
    switch (l) {
        case StepLabel::Beta: return "beta";
        case StepLabel::GetStep: return "get";
        case StepLabel::SetStep: return "set";
    }
    return "?";
}

inline bool is_blocked(const Configuration& c) {
    const TermPtr& t = c.term;
    if (t->kind == TermKind::Get) return !state_dom(c.state).count(t->loc);
    if (t->kind == TermKind::App && is_value(t->a)) return is_blocked({t->b, c.state});
    return false;
}

inline bool is_final(const Configuration& c) { return is_blocked(c) || is_normal_gs(c.term); }

inline std::optional<std::pair<StepLabel, Configuration>> step_gs(const Configuration& c) {
    const TermPtr& t = c.term;
    switch (t->kind) {
        case TermKind::Var:
        case TermKind::Abs:
            return std::nullopt;
        case TermKind::App: {
            const TermPtr& f = t->a;
            const TermPtr& a = t->b;
            if (f->kind == TermKind::Abs && is_value(a))
                return {{StepLabel::Beta, {substitute(f->a, f->var, Value(a)), c.state}}};
            if (is_value(f)) {
                if (auto inner = step_gs({a, c.state}))
                    return {{inner->first, {mk_app(f, inner->second.term), inner->second.state}}};
            }
            return std::nullopt;
        }
        case TermKind::Get: {
            if (auto v = lookup(c.state, t->loc))
                return {{StepLabel::GetStep, {substitute(t->a, t->var, *v), c.state}}};
            return std::nullopt;
        }
        case TermKind::Set:
            return {{StepLabel::SetStep, {t->b, state_write(c.state, t->loc, Value(t->a))}}};
    }
    return std::nullopt;
}

struct TraceStep {
    StepLabel label;
    Configuration after;
};

struct TraceGs {
    Configuration initial;
    std::vector<TraceStep> steps;
};

struct EvalResultGs {
    bool exhausted = false;
    Configuration final;      // final configuration, or last reached on exhaustion
    std::uint64_t beta = 0;   // beta_v steps
    std::uint64_t mem = 0;    // get/set steps
    TraceGs trace;
};

inline EvalResultGs eval_gs(const Configuration& c, std::uint64_t fuel = kDefaultFuel) {
    EvalResultGs r;
    r.final = c;
    r.trace.initial = c;
    while (auto n = step_gs(r.final)) {
        if (r.beta + r.mem == fuel) {
            r.exhausted = true;
            return r;
        }
        if (n->first == StepLabel::Beta)
            ++r.beta;
        else
            ++r.mem;
        r.final = n->second;
        r.trace.steps.push_back({n->first, r.final});
    }
    return r;
}

}  // namespace lamq
