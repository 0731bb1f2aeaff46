#pragma once

// Abstract syntax for both calculi: plain weak open call-by-value terms and
// the global-state extension (get/set, stores, configurations). Terms are
// immutable and shared; surface names are kept for printing, while
// alpha-equivalence goes through a de Bruijn comparison.

#include <cassert>
#include <cctype>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lamq {

enum class TermKind { Var, Abs, App, Get, Set };

struct Term;
using TermPtr = std::shared_ptr<const Term>;

struct Term {
    TermKind kind;
    std::string var;  // Var: name; Abs/Get: binder
    std::string loc;  // Get/Set: location name
    TermPtr a;        // Abs: body; App: function; Get: continuation; Set: stored value
    TermPtr b;        // App: argument; Set: continuation
};

inline TermPtr mk_var(std::string name) {
    return std::make_shared<Term>(Term{TermKind::Var, std::move(name), {}, nullptr, nullptr});
}
inline TermPtr mk_abs(std::string binder, TermPtr body) {
    return std::make_shared<Term>(Term{TermKind::Abs, std::move(binder), {}, std::move(body), nullptr});
}
inline TermPtr mk_app(TermPtr fn, TermPtr arg) {
    return std::make_shared<Term>(Term{TermKind::App, {}, {}, std::move(fn), std::move(arg)});
}
inline TermPtr mk_get(std::string loc, std::string binder, TermPtr cont) {
    return std::make_shared<Term>(Term{TermKind::Get, std::move(binder), std::move(loc), std::move(cont), nullptr});
}
inline TermPtr mk_set(std::string loc, TermPtr stored, TermPtr cont) {
    return std::make_shared<Term>(Term{TermKind::Set, {}, std::move(loc), std::move(stored), std::move(cont)});
}

inline bool is_value(const TermPtr& t) {
    return t->kind == TermKind::Var || t->kind == TermKind::Abs;
}

// A term that is syntactically a variable or an abstraction.
struct Value {
    TermPtr term;
    Value() = default;
    explicit Value(TermPtr t) : term(std::move(t)) {
        if (!term || !is_value(term)) throw std::invalid_argument("Value: term is not a value");
    }
};

struct StateBinding {
    std::string loc;
    Value val;
};

// Ordered list of bindings; the leftmost binding of a location is visible.
struct State {
    std::vector<StateBinding> binds;
};

struct Configuration {
    TermPtr term;
    State state;
};

// ---------------------------------------------------------------------------
// structural equality (name-sensitive; see alpha_eq for the semantic one)

inline bool term_eq(const TermPtr& t, const TermPtr& u) {
    if (t.get() == u.get()) return true;
    if (t->kind != u->kind) return false;
    switch (t->kind) {
        case TermKind::Var: return t->var == u->var;
        case TermKind::Abs: return t->var == u->var && term_eq(t->a, u->a);
        case TermKind::App: return term_eq(t->a, u->a) && term_eq(t->b, u->b);
        case TermKind::Get: return t->loc == u->loc && t->var == u->var && term_eq(t->a, u->a);
        case TermKind::Set: return t->loc == u->loc && term_eq(t->a, u->a) && term_eq(t->b, u->b);
    }
    return false;
}

inline bool state_eq(const State& s, const State& q) {
    if (s.binds.size() != q.binds.size()) return false;
    for (size_t i = 0; i < s.binds.size(); ++i)
        if (s.binds[i].loc != q.binds[i].loc || !term_eq(s.binds[i].val.term, q.binds[i].val.term))
            return false;
    return true;
}

inline bool config_eq(const Configuration& c, const Configuration& d) {
    return term_eq(c.term, d.term) && state_eq(c.state, d.state);
}

// ---------------------------------------------------------------------------
// size, variables

// Size counts applications only; abstractions and variables weigh zero, and
// get/set are transparent (they never survive into the normal forms the
// counters measure).
inline std::uint64_t term_size(const TermPtr& t) {
    switch (t->kind) {
        case TermKind::Var:
        case TermKind::Abs: return 0;
        case TermKind::App: return 1 + term_size(t->a) + term_size(t->b);
        case TermKind::Get: return term_size(t->a);
        case TermKind::Set: return term_size(t->a) + term_size(t->b);
    }
    return 0;
}

inline std::uint64_t config_size(const Configuration& c) { return term_size(c.term); }

inline void free_vars_into(const TermPtr& t, std::set<std::string>& bound, std::set<std::string>& out) {
    switch (t->kind) {
        case TermKind::Var:
            if (!bound.count(t->var)) out.insert(t->var);
            break;
        case TermKind::Abs: {
            bool fresh = bound.insert(t->var).second;
            free_vars_into(t->a, bound, out);
            if (fresh) bound.erase(t->var);
            break;
        }
        case TermKind::App:
            free_vars_into(t->a, bound, out);
            free_vars_into(t->b, bound, out);
            break;
        case TermKind::Get: {
            bool fresh = bound.insert(t->var).second;
            free_vars_into(t->a, bound, out);
            if (fresh) bound.erase(t->var);
            break;
        }
        case TermKind::Set:
            free_vars_into(t->a, bound, out);
            free_vars_into(t->b, bound, out);
            break;
    }
}

inline std::set<std::string> free_vars(const TermPtr& t) {
    std::set<std::string> bound, out;
    free_vars_into(t, bound, out);
    return out;
}

inline std::set<std::string> free_vars(const State& s) {
    std::set<std::string> out;
    for (const auto& b : s.binds) {
        auto fv = free_vars(b.val.term);
        out.insert(fv.begin(), fv.end());
    }
    return out;
}

inline std::set<std::string> free_vars(const Configuration& c) {
    auto out = free_vars(c.term);
    auto fs = free_vars(c.state);
    out.insert(fs.begin(), fs.end());
    return out;
}

// All variable names occurring in t, free or bound. Fresh-name generation
// avoids this whole set so that renaming never cascades.
inline void all_vars_into(const TermPtr& t, std::set<std::string>& out) {
    switch (t->kind) {
        case TermKind::Var: out.insert(t->var); break;
        case TermKind::Abs:
            out.insert(t->var);
            all_vars_into(t->a, out);
            break;
        case TermKind::App:
            all_vars_into(t->a, out);
            all_vars_into(t->b, out);
            break;
        case TermKind::Get:
            out.insert(t->var);
            all_vars_into(t->a, out);
            break;
        case TermKind::Set:
            all_vars_into(t->a, out);
            all_vars_into(t->b, out);
            break;
    }
}

inline std::set<std::string> all_vars(const TermPtr& t) {
    std::set<std::string> out;
    all_vars_into(t, out);
    return out;
}

// First of base1, base2, ... not present in avoid.
inline std::string fresh_name(const std::string& base, const std::set<std::string>& avoid) {
    for (int i = 1;; ++i) {
        std::string cand = base + std::to_string(i);
        if (!avoid.count(cand)) return cand;
    }
}

// ---------------------------------------------------------------------------
// substitution

// Capture-avoiding substitution of a value for a variable. The result is
// syntactically equal to t whenever x is not free in t; binders are renamed
// (suffix counter) only when they would capture a free variable of v.
inline TermPtr substitute(const TermPtr& t, const std::string& x, const Value& v);

inline TermPtr subst_under_binder(const std::string& binder, const TermPtr& body, const std::string& x,
                                  const Value& v, std::string& out_binder) {
    // x is known free in the enclosing term, hence binder != x.
    auto fvv = free_vars(v.term);
    if (fvv.count(binder)) {
        std::set<std::string> avoid = all_vars(body);
        auto av = all_vars(v.term);
        avoid.insert(av.begin(), av.end());
        avoid.insert(x);
        std::string nb = fresh_name(binder, avoid);
        TermPtr renamed = substitute(body, binder, Value(mk_var(nb)));
        out_binder = nb;
        return substitute(renamed, x, v);
    }
    out_binder = binder;
    return substitute(body, x, v);
}

inline TermPtr substitute(const TermPtr& t, const std::string& x, const Value& v) {
    if (!free_vars(t).count(x)) return t;
    switch (t->kind) {
        case TermKind::Var:
            return v.term;  // t->var == x since x is free in t
        case TermKind::Abs: {
            std::string nb;
            TermPtr body = subst_under_binder(t->var, t->a, x, v, nb);
            return mk_abs(nb, body);
        }
        case TermKind::App:
            return mk_app(substitute(t->a, x, v), substitute(t->b, x, v));
        case TermKind::Get: {
            std::string nb;
            TermPtr body = subst_under_binder(t->var, t->a, x, v, nb);
            return mk_get(t->loc, nb, body);
        }
        case TermKind::Set:
            return mk_set(t->loc, substitute(t->a, x, v), substitute(t->b, x, v));
    }
    return t;
}

// Pure renaming of a free variable; precondition: `to` does not occur in t.
inline TermPtr rename_free(const TermPtr& t, const std::string& from, const std::string& to) {
    return substitute(t, from, Value(mk_var(to)));
}

// ---------------------------------------------------------------------------
// alpha equivalence (de Bruijn comparison, get binds like lambda)

inline bool alpha_eq_rec(const TermPtr& t, const TermPtr& u, std::vector<std::string>& env_t,
                         std::vector<std::string>& env_u) {
    if (t->kind != u->kind) return false;
    auto index_of = [](const std::vector<std::string>& env, const std::string& n) -> std::optional<size_t> {
        for (size_t i = env.size(); i-- > 0;)
            if (env[i] == n) return env.size() - 1 - i;
        return std::nullopt;
    };
    switch (t->kind) {
        case TermKind::Var: {
            auto it = index_of(env_t, t->var);
            auto iu = index_of(env_u, u->var);
            if (it.has_value() != iu.has_value()) return false;
            return it.has_value() ? *it == *iu : t->var == u->var;
        }
        case TermKind::Abs: {
            env_t.push_back(t->var);
            env_u.push_back(u->var);
            bool r = alpha_eq_rec(t->a, u->a, env_t, env_u);
            env_t.pop_back();
            env_u.pop_back();
            return r;
        }
        case TermKind::App:
            return alpha_eq_rec(t->a, u->a, env_t, env_u) && alpha_eq_rec(t->b, u->b, env_t, env_u);
        case TermKind::Get: {
            if (t->loc != u->loc) return false;
            env_t.push_back(t->var);
            env_u.push_back(u->var);
            bool r = alpha_eq_rec(t->a, u->a, env_t, env_u);
            env_t.pop_back();
            env_u.pop_back();
            return r;
        }
        case TermKind::Set:
            return t->loc == u->loc && alpha_eq_rec(t->a, u->a, env_t, env_u) &&
                   alpha_eq_rec(t->b, u->b, env_t, env_u);
    }
    return false;
}

inline bool alpha_eq(const TermPtr& t, const TermPtr& u) {
    std::vector<std::string> et, eu;
    return alpha_eq_rec(t, u, et, eu);
}

inline bool alpha_eq(const State& s, const State& q) {
    if (s.binds.size() != q.binds.size()) return false;
    for (size_t i = 0; i < s.binds.size(); ++i)
        if (s.binds[i].loc != q.binds[i].loc || !alpha_eq(s.binds[i].val.term, q.binds[i].val.term))
            return false;
    return true;
}

inline bool alpha_eq(const Configuration& c, const Configuration& d) {
    return alpha_eq(c.term, d.term) && alpha_eq(c.state, d.state);
}

// ---------------------------------------------------------------------------
// state equivalence

// Closure of the axiom swapping adjacent bindings with distinct locations.
// Two states are equivalent iff, per location, the ordered list of bound
// values coincides (trace-monoid projection argument).
inline bool state_equiv(const State& s, const State& q) {
    if (s.binds.size() != q.binds.size()) return false;
    std::map<std::string, std::vector<const StateBinding*>> ps, pq;
    for (const auto& b : s.binds) ps[b.loc].push_back(&b);
    for (const auto& b : q.binds) pq[b.loc].push_back(&b);
    if (ps.size() != pq.size()) return false;
    for (const auto& [loc, seq] : ps) {
        auto it = pq.find(loc);
        if (it == pq.end() || it->second.size() != seq.size()) return false;
        for (size_t i = 0; i < seq.size(); ++i)
            if (!alpha_eq(seq[i]->val.term, it->second[i]->val.term)) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// GS validity: applications must have a value in function position

inline const Term* find_gs_violation(const TermPtr& t) {
    switch (t->kind) {
        case TermKind::Var:
            return nullptr;
        case TermKind::Abs:
            return find_gs_violation(t->a);
        case TermKind::App: {
            if (!is_value(t->a)) return t.get();
            if (auto* v = find_gs_violation(t->a)) return v;
            return find_gs_violation(t->b);
        }
        case TermKind::Get:
            return find_gs_violation(t->a);
        case TermKind::Set: {
            if (auto* v = find_gs_violation(t->a)) return v;
            return find_gs_violation(t->b);
        }
    }
    return nullptr;
}

inline bool is_gs_valid(const TermPtr& t) { return find_gs_violation(t) == nullptr; }

// ---------------------------------------------------------------------------
// printing

inline std::string print_term(const TermPtr& t);

inline std::string print_atom(const TermPtr& t) {
    switch (t->kind) {
        case TermKind::Var:
        case TermKind::Get:
        case TermKind::Set: return print_term(t);
        default: return "(" + print_term(t) + ")";
    }
}

inline std::string print_term(const TermPtr& t) {
    switch (t->kind) {
        case TermKind::Var: return t->var;
        case TermKind::Abs: return "\\" + t->var + ". " + print_term(t->a);
        case TermKind::App: {
            // function position: abstractions need parens, application chains stay flat
            std::string f = (t->a->kind == TermKind::Abs) ? "(" + print_term(t->a) + ")" : print_term(t->a);
            return f + " " + print_atom(t->b);
        }
        case TermKind::Get: return "get(" + t->loc + ", " + t->var + ". " + print_term(t->a) + ")";
        case TermKind::Set: return "set(" + t->loc + ", " + print_term(t->a) + ", " + print_term(t->b) + ")";
    }
    return {};
}

inline std::string print_state(const State& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.binds.size(); ++i) {
        if (i) out += ", ";
        out += s.binds[i].loc + " := " + print_term(s.binds[i].val.term);
    }
    return out + "]";
}

inline std::string print_config(const Configuration& c) {
    return "(" + print_term(c.term) + " | " + print_state(c.state) + ")";
}

// ---------------------------------------------------------------------------
// parsing

struct ParseError : std::runtime_error {
    int line, col;
    ParseError(const std::string& msg, int l, int c)
        : std::runtime_error("parse error at " + std::to_string(l) + ":" + std::to_string(c) + ": " + msg),
          line(l), col(c) {}
};

namespace detail {

enum class Tok { Ident, Lambda, Dot, LParen, RParen, LBrack, RBrack, Comma, Assign, Bar, KwGet, KwSet, End };

struct Token {
    Tok kind;
    std::string text;
    int line, col;
};

class Lexer {
public:
    explicit Lexer(const std::string& src) : src_(&src) { advance(); }

    const Token& peek() const { return cur_; }

    Token next() {
        Token t = cur_;
        advance();
        return t;
    }

private:
    void advance() {
        skip_ws();
        cur_.line = line_;
        cur_.col = col_;
        if (pos_ >= src_->size()) {
            cur_.kind = Tok::End;
            cur_.text.clear();
            return;
        }
        char c = (*src_)[pos_];
        if (c == '\\') {
            bump();
            cur_ = {Tok::Lambda, "\\", cur_.line, cur_.col};
            return;
        }
        // UTF-8 lambda
        if ((unsigned char)c == 0xce && pos_ + 1 < src_->size() && (unsigned char)(*src_)[pos_ + 1] == 0xbb) {
            bump();
            bump();
            cur_ = {Tok::Lambda, "λ", cur_.line, cur_.col};
            return;
        }
        switch (c) {
            case '.': bump(); cur_ = {Tok::Dot, ".", cur_.line, cur_.col}; return;
            case '(': bump(); cur_ = {Tok::LParen, "(", cur_.line, cur_.col}; return;
            case ')': bump(); cur_ = {Tok::RParen, ")", cur_.line, cur_.col}; return;
            case '[': bump(); cur_ = {Tok::LBrack, "[", cur_.line, cur_.col}; return;
            case ']': bump(); cur_ = {Tok::RBrack, "]", cur_.line, cur_.col}; return;
            case ',': bump(); cur_ = {Tok::Comma, ",", cur_.line, cur_.col}; return;
            case '|': bump(); cur_ = {Tok::Bar, "|", cur_.line, cur_.col}; return;
            case ':':
                bump();
                if (pos_ < src_->size() && (*src_)[pos_] == '=') {
                    bump();
                    cur_ = {Tok::Assign, ":=", cur_.line, cur_.col};
                    return;
                }
                throw ParseError("expected ':=' after ':'", cur_.line, cur_.col);
        }
        if (c >= 'a' && c <= 'z') {
            std::string id;
            while (pos_ < src_->size() && (isalnum((unsigned char)(*src_)[pos_]) || (*src_)[pos_] == '_')) {
                id += (*src_)[pos_];
                bump();
            }
            if (id == "get")
                cur_ = {Tok::KwGet, id, cur_.line, cur_.col};
            else if (id == "set")
                cur_ = {Tok::KwSet, id, cur_.line, cur_.col};
            else
                cur_ = {Tok::Ident, id, cur_.line, cur_.col};
            return;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", line_, col_);
    }

    void skip_ws() {
        while (pos_ < src_->size()) {
            char c = (*src_)[pos_];
            if (c == '#') {
                while (pos_ < src_->size() && (*src_)[pos_] != '\n') bump();
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                bump();
            } else {
                break;
            }
        }
    }

    void bump() {
        if ((*src_)[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    const std::string* src_;
    size_t pos_ = 0;
    int line_ = 1, col_ = 1;
    Token cur_{};
};

class TermParser {
public:
    explicit TermParser(const std::string& src) : lex_(src) {}

    TermPtr parse_term_all() {
        TermPtr t = parse_term();
        expect_end();
        return t;
    }

    State parse_state_all() {
        State s = parse_state();
        expect_end();
        return s;
    }

    // Accepts "(t | s)" or a bare term (empty state).
    Configuration parse_config_all() {
        Configuration c = parse_config();
        expect_end();
        return c;
    }

    Configuration parse_config() {
        if (lex_.peek().kind == Tok::LParen) {
            // probe for "(term | state)"; fall back to a parenthesized term
            Lexer save = lex_;
            try {
                lex_.next();  // '('
                TermPtr t = parse_term();
                if (lex_.peek().kind == Tok::Bar) {
                    lex_.next();
                    State s = parse_state();
                    expect(Tok::RParen, ")");
                    return {t, s};
                }
            } catch (const ParseError&) {
            }
            lex_ = save;
        }
        return {parse_term(), State{}};
    }

    TermPtr parse_term() {
        if (lex_.peek().kind == Tok::Lambda) return parse_lambda();
        TermPtr t = parse_atom();
        for (;;) {
            Tok k = lex_.peek().kind;
            if (k == Tok::Lambda) {
                // trailing lambda argument extends as far right as possible
                t = mk_app(t, parse_lambda());
                break;
            }
            if (k == Tok::Ident || k == Tok::LParen || k == Tok::KwGet || k == Tok::KwSet) {
                t = mk_app(t, parse_atom());
                continue;
            }
            break;
        }
        return t;
    }

    State parse_state() {
        expect(Tok::LBrack, "[");
        State s;
        if (lex_.peek().kind == Tok::RBrack) {
            lex_.next();
            return s;
        }
        for (;;) {
            Token loc = expect(Tok::Ident, "location name");
            expect(Tok::Assign, ":=");
            Token at = lex_.peek();
            TermPtr v = parse_term();
            if (!is_value(v)) throw ParseError("state binding must store a value", at.line, at.col);
            s.binds.push_back({loc.text, Value(v)});
            if (lex_.peek().kind == Tok::Comma) {
                lex_.next();
                continue;
            }
            break;
        }
        expect(Tok::RBrack, "]");
        return s;
    }

private:
    TermPtr parse_lambda() {
        lex_.next();  // lambda
        Token v = expect(Tok::Ident, "binder");
        expect(Tok::Dot, ".");
        return mk_abs(v.text, parse_term());
    }

    TermPtr parse_atom() {
        Token t = lex_.peek();
        switch (t.kind) {
            case Tok::Ident:
                lex_.next();
                return mk_var(t.text);
            case Tok::LParen: {
                lex_.next();
                TermPtr inner = parse_term();
                expect(Tok::RParen, ")");
                return inner;
            }
            case Tok::KwGet: {
                lex_.next();
                expect(Tok::LParen, "(");
                Token loc = expect(Tok::Ident, "location name");
                expect(Tok::Comma, ",");
                Token binder = expect(Tok::Ident, "binder");
                expect(Tok::Dot, ".");
                TermPtr cont = parse_term();
                expect(Tok::RParen, ")");
                return mk_get(loc.text, binder.text, cont);
            }
            case Tok::KwSet: {
                lex_.next();
                expect(Tok::LParen, "(");
                Token loc = expect(Tok::Ident, "location name");
                expect(Tok::Comma, ",");
                Token at = lex_.peek();
                TermPtr stored = parse_term();
                if (!is_value(stored)) throw ParseError("set stores a value", at.line, at.col);
                expect(Tok::Comma, ",");
                TermPtr cont = parse_term();
                expect(Tok::RParen, ")");
                return mk_set(loc.text, stored, cont);
            }
            default:
                throw ParseError("expected a term, got '" + t.text + "'", t.line, t.col);
        }
    }

    Token expect(Tok k, const std::string& what) {
        Token t = lex_.peek();
        if (t.kind != k) throw ParseError("expected " + what + ", got '" + t.text + "'", t.line, t.col);
        return lex_.next();
    }

    void expect_end() {
        Token t = lex_.peek();
        if (t.kind != Tok::End) throw ParseError("trailing input '" + t.text + "'", t.line, t.col);
    }

    Lexer lex_;
};

}  // namespace detail

inline TermPtr parse_term(const std::string& src) { return detail::TermParser(src).parse_term_all(); }
inline State parse_state(const std::string& src) { return detail::TermParser(src).parse_state_all(); }
inline Configuration parse_config(const std::string& src) { return detail::TermParser(src).parse_config_all(); }

struct GsValidityError : std::runtime_error {
    explicit GsValidityError(const std::string& at)
        : std::runtime_error("non-value in function position: " + at) {}
};

inline void require_gs_valid(const TermPtr& t) {
    if (const Term* bad = find_gs_violation(t))
        throw GsValidityError(print_term(bad->a));
}

}  // namespace lamq
