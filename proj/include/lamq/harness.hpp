#pragma once

// Random generators, exhaustive small-term enumeration and independent
// oracles for the property suites. Generation is reproducible: equal
// configurations yield equal streams.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "lamq/eval.hpp"
#include "lamq/types.hpp"

namespace lamq {

struct GenConfig {
    std::uint64_t seed = 1;
    int max_depth = 5;
    std::vector<std::string> var_pool = {"x", "y", "z"};
    std::vector<std::string> loc_pool = {"l1", "l2"};
    System calculus = System::V;
    bool normalizing_only = false;
    std::uint64_t filter_fuel = 500;  // fuel used by the normalizing filter
};

// Deterministic term/state/configuration generator. Weights: 40% application,
// 30% abstraction, 20% variable, 10% get/set (GS mode; folded into the other
// buckets for plain CBV).
class TermGen {
public:
    explicit TermGen(GenConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.seed) {}

    const GenConfig& config() const { return cfg_; }
    std::uint64_t discarded() const { return discarded_; }

    TermPtr next_term() {
        for (;;) {
            TermPtr t = gen_term(cfg_.max_depth, {});
            if (cfg_.calculus == System::GS && !is_gs_valid(t)) continue;  // by construction, defensive
            if (cfg_.normalizing_only && !normalizes(t)) {
                ++discarded_;
                continue;
            }
            return t;
        }
    }

    Value next_value(int depth = 2) { return Value(gen_value(depth, {})); }

    State next_state() {
        State s;
        std::vector<std::string> locs = cfg_.loc_pool;
        std::shuffle(locs.begin(), locs.end(), rng_);
        size_t n = rng_() % (locs.size() + 1);
        for (size_t i = 0; i < n; ++i) s.binds.push_back({locs[i], Value(gen_value(2, {}))});
        return s;
    }

    Configuration next_config() {
        for (;;) {
            Configuration c{gen_term(cfg_.max_depth, {}), next_state()};
            if (cfg_.normalizing_only) {
                EvalResultGs r = eval_gs(c, cfg_.filter_fuel);
                if (r.exhausted || is_blocked(r.final)) {
                    ++discarded_;
                    continue;
                }
            }
            return c;
        }
    }

private:
    bool normalizes(const TermPtr& t) { return !eval_cbv(t, cfg_.filter_fuel).exhausted; }

    std::string pick_var(const std::vector<std::string>& bound) {
        // free variables from the pool and bound ones are equally fair game
        std::vector<std::string> cand = cfg_.var_pool;
        cand.insert(cand.end(), bound.begin(), bound.end());
        return cand[rng_() % cand.size()];
    }

    std::string pick_binder(size_t depth_hint) {
        static const char* names[] = {"a", "b", "c", "f", "g", "h"};
        return names[(rng_() + depth_hint) % 6];
    }

    std::string pick_loc() { return cfg_.loc_pool[rng_() % cfg_.loc_pool.size()]; }

    TermPtr gen_value(int depth, const std::vector<std::string>& bound) {
        if (depth <= 0 || rng_() % 2 == 0) return mk_var(pick_var(bound));
        std::string b = pick_binder(bound.size());
        auto inner = bound;
        inner.push_back(b);
        return mk_abs(b, gen_term(depth - 1, inner));
    }

    TermPtr gen_term(int depth, const std::vector<std::string>& bound) {
        if (depth <= 0) return mk_var(pick_var(bound));
        unsigned roll = rng_() % 100;
        bool gs = cfg_.calculus == System::GS;
        // CBV redistributes the get/set share proportionally
        unsigned app_cut = gs ? 40 : 45;
        unsigned abs_cut = gs ? 70 : 78;
        unsigned var_cut = gs ? 90 : 100;
        if (roll < app_cut) {
            TermPtr fn = gs ? gen_value(depth - 1, bound) : gen_term(depth - 1, bound);
            return mk_app(fn, gen_term(depth - 1, bound));
        }
        if (roll < abs_cut) {
            std::string b = pick_binder(bound.size());
            auto inner = bound;
            inner.push_back(b);
            return mk_abs(b, gen_term(depth - 1, inner));
        }
        if (roll < var_cut) return mk_var(pick_var(bound));
        if (rng_() % 2 == 0) {
            std::string b = pick_binder(bound.size());
            auto inner = bound;
            inner.push_back(b);
            return mk_get(pick_loc(), b, gen_term(depth - 1, inner));
        }
        return mk_set(pick_loc(), gen_value(depth - 1, bound), gen_term(depth - 1, bound));
    }

    GenConfig cfg_;
    std::mt19937_64 rng_;
    std::uint64_t discarded_ = 0;
};

// ---------------------------------------------------------------------------
// exhaustive enumeration of alpha-distinct CBV terms

struct BudgetExceeded : std::runtime_error {
    BudgetExceeded() : std::runtime_error("enumeration budget exceeded (max_nodes > 12)") {}
};

namespace detail {

// binders are named b0, b1, ... outside the free-variable pool, so distinct
// skeletons are alpha-distinct terms
inline void enumerate_nodes(int nodes, const std::vector<std::string>& frees,
                            std::vector<std::string>& stack,
                            const std::function<void(const TermPtr&)>& emit) {
    if (nodes <= 0) return;
    if (nodes == 1) {
        for (const auto& f : frees) emit(mk_var(f));
        for (const auto& b : stack) emit(mk_var(b));
        return;
    }
    // abstraction: 1 node + body
    {
        std::string b = "b" + std::to_string(stack.size());
        stack.push_back(b);
        enumerate_nodes(nodes - 1, frees, stack,
                        [&, b](const TermPtr& body) { emit(mk_abs(b, body)); });
        stack.pop_back();
    }
    // application: 1 node + i + (nodes-1-i); both sides are materialized so
    // neither enumerates under the other's binders
    for (int i = 1; i <= nodes - 2; ++i) {
        std::vector<TermPtr> fns, args;
        enumerate_nodes(i, frees, stack, [&](const TermPtr& t) { fns.push_back(t); });
        enumerate_nodes(nodes - 1 - i, frees, stack, [&](const TermPtr& t) { args.push_back(t); });
        for (const auto& fn : fns)
            for (const auto& arg : args) emit(mk_app(fn, arg));
    }
}

}  // namespace detail

// All alpha-distinct CBV terms with at most max_nodes AST nodes (every
// constructor counts one) over the given free-variable pool.
inline std::vector<TermPtr> enumerate_terms(int max_nodes, const std::vector<std::string>& vars) {
    if (max_nodes > 12) throw BudgetExceeded();
    std::vector<TermPtr> out;
    std::vector<std::string> stack;
    for (int n = 1; n <= max_nodes; ++n)
        detail::enumerate_nodes(n, vars, stack, [&](const TermPtr& t) { out.push_back(t); });
    return out;
}

// Counting recurrence, independent of the enumerator: terms with exactly n
// nodes under d enclosing binders and f free names.
inline std::uint64_t count_terms(int n, int d, int f) {
    if (n <= 0) return 0;
    if (n == 1) return std::uint64_t(f) + std::uint64_t(d);
    std::uint64_t total = count_terms(n - 1, d + 1, f);
    for (int i = 1; i <= n - 2; ++i) total += count_terms(i, d, f) * count_terms(n - 1 - i, d, f);
    return total;
}

// ---------------------------------------------------------------------------
// independent normality oracle: search for any applicable deterministic rule

inline bool oracle_reducible(const TermPtr& t) {
    if (t->kind != TermKind::App) return false;
    if (t->a->kind == TermKind::Abs && is_value(t->b)) return true;  // root beta
    if (oracle_reducible(t->a)) return true;                         // AppL
    return oracle_reducible(t->b);                                   // AppR (head stuck)
}

inline bool oracle_normal(const TermPtr& t) { return !oracle_reducible(t); }

// ---------------------------------------------------------------------------
// shrinking: walk down to the smallest failing subterm

inline TermPtr shrink_term(const TermPtr& t0, const std::function<bool(const TermPtr&)>& fails) {
    TermPtr cur = t0;
    bool progressed = true;
    while (progressed) {
        progressed = false;
        std::vector<TermPtr> subs;
        switch (cur->kind) {
            case TermKind::Abs: subs = {cur->a}; break;
            case TermKind::App: subs = {cur->a, cur->b}; break;
            case TermKind::Get: subs = {cur->a}; break;
            case TermKind::Set: subs = {cur->a, cur->b}; break;
            default: break;
        }
        for (const auto& s : subs) {
            if (fails(s)) {
                cur = s;
                progressed = true;
                break;
            }
        }
    }
    return cur;
}

}  // namespace lamq
