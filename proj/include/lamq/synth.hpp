#pragma once

// Constructive drivers for both directions of exactness. Completeness:
// evaluate, type the normal form (and final state), then pull the
// derivation back along the reversed trace with exact subject expansion.
// Soundness: run the evaluator and compare its exact counts against the
// derivation's counters.

#include <cstdint>
#include <optional>
#include <string>

#include "lamq/transform.hpp"

namespace lamq {

struct SynthError : std::runtime_error {
    enum class Kind { NotNormal, NotTightStateType, DuplicateLocation, GsInvalid };
    Kind kind;
    SynthError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

// ---------------------------------------------------------------------------
// typability of normal forms, system V

// Tight derivation of a deterministic normal form at counters (0, |t|).
// Persistent variables get vr, abstractions ab.
inline DerivPtr type_normal_form_v(const TermPtr& t) {
    if (!is_normal_cbv(t)) throw SynthError(SynthError::Kind::NotNormal, "term is not a CBV normal form");
    switch (t->kind) {
        case TermKind::Var:
            return build_ax(t->var, ty_vr());
        case TermKind::Abs:
            return build_lamp(t);
        case TermKind::App: {
            DerivPtr fn = type_normal_form_v(t->a);
            DerivPtr arg = type_normal_form_v(t->b);
            // variable or neutral heads persist via appp1, abstraction heads
            // require a neutral argument and go through appp2
            if (t->a->kind == TermKind::Abs) return build_appp2_v(fn, arg);
            return build_appp1_v(fn, arg);
        }
        default:
            throw SynthError(SynthError::Kind::NotNormal, "get/set cannot appear in a CBV term");
    }
}

// ---------------------------------------------------------------------------
// typability of states and normal forms, system GS

// Tight derivation of any (duplicate-free) state at (0,0,0), every location
// typed with the empty multiset.
inline DerivPtr type_state(const State& s) {
    if (has_duplicate_locations(s))
        throw SynthError(SynthError::Kind::DuplicateLocation,
                         "state with shadowed bindings is not typable");
    return rebuild_state_deriv(s, {});
}

// Tight derivation of a GS normal form against a given tight state type,
// with equal input and output states and counters (0, 0, |t|).
inline DerivPtr type_normal_form_gs(const TermPtr& t, const StateType& s) {
    if (!is_normal_gs(t)) throw SynthError(SynthError::Kind::NotNormal, "term is not a GS normal form");
    if (!is_tight_state_type(s))
        throw SynthError(SynthError::Kind::NotTightStateType, "state type is not tight");
    switch (t->kind) {
        case TermKind::Var:
            return build_lift(build_ax(t->var, ty_vr()), s);
        case TermKind::Abs:
            return build_lift(build_lamp(t), s);
        case TermKind::App: {
            DerivPtr arg = type_normal_form_gs(t->b, s);
            if (t->a->kind == TermKind::Var) return build_appp1_gs(t->a->var, TightConst::Vr, arg);
            return build_appp2_gs(t->a, arg);
        }
        default:
            throw SynthError(SynthError::Kind::NotNormal, "get/set cannot be normal");
    }
}

// ---------------------------------------------------------------------------
// completeness synthesizers

struct SynthResultV {
    enum class Status { Ok, FuelExhausted };
    Status status;
    DerivPtr derivation;      // on Ok
    TermPtr last;             // last term reached on exhaustion
};

inline SynthResultV synthesize_tight_v(const TermPtr& t, std::uint64_t fuel = kDefaultFuel) {
    EvalResultCbv ev = eval_cbv(t, fuel);
    if (ev.exhausted) return {SynthResultV::Status::FuelExhausted, nullptr, ev.last};
    DerivPtr d = type_normal_form_v(ev.last);
    for (size_t i = ev.trace.size() - 1; i-- > 0;) d = subject_expansion_v(d, ev.trace[i]);
    return {SynthResultV::Status::Ok, d, ev.last};
}

struct SynthResultGs {
    enum class Status { Ok, FuelExhausted, BlockedFinal };
    Status status;
    DerivPtr derivation;       // on Ok
    Configuration last;        // final (or last reached) configuration
};

inline SynthResultGs synthesize_tight_gs(const Configuration& c, std::uint64_t fuel = kDefaultFuel) {
    if (!is_gs_valid(c.term)) throw SynthError(SynthError::Kind::GsInvalid, "term is not GS-valid");
    EvalResultGs ev = eval_gs(c, fuel);
    if (ev.exhausted) return {SynthResultGs::Status::FuelExhausted, nullptr, ev.final};
    if (is_blocked(ev.final)) return {SynthResultGs::Status::BlockedFinal, nullptr, ev.final};
    DerivPtr sd = type_state(ev.final.state);
    DerivPtr td = type_normal_form_gs(ev.final.term, *asg_state_type(sd->conclusion));
    DerivPtr d = build_conf(td, sd);
    for (size_t i = ev.trace.steps.size(); i-- > 0;) {
        const Configuration& before = i == 0 ? ev.trace.initial : ev.trace.steps[i - 1].after;
        d = subject_expansion_gs(d, before);
    }
    return {SynthResultGs::Status::Ok, d, ev.final};
}

// ---------------------------------------------------------------------------
// soundness verification

struct Observed {
    std::uint64_t b = 0, m = 0, normal_size = 0;
    bool fuel_exhausted = false;
    bool blocked = false;
};

struct Certificate {
    System system;
    Counters predicted;
    Observed observed;
    bool match = false;
    std::string detail;  // structured diff on mismatch
};

// Runs the evaluator on a checked tight derivation's subject and compares
// the exact counts against its counters. A certificate is produced either
// way; mismatches carry the differing components.
inline Certificate verify_soundness(System sys, const DerivPtr& d, std::uint64_t fuel = kDefaultFuel) {
    if (!is_tight_derivation(d)) throw TransformError(TransformError::Kind::NotTight, "derivation is not tight");
    Certificate cert;
    cert.system = sys;
    cert.predicted = d->conclusion.counters;
    if (sys == System::V) {
        const TermPtr* t = subj_term(d->conclusion);
        if (!t) throw TransformError(TransformError::Kind::SubjectMismatch, "V subject must be a term");
        EvalResultCbv ev = eval_cbv(*t, fuel);
        cert.observed.b = ev.beta;
        cert.observed.fuel_exhausted = ev.exhausted;
        cert.observed.normal_size = ev.exhausted ? 0 : term_size(ev.last);
        cert.match = !ev.exhausted && cert.predicted.b == ev.beta && cert.predicted.m == 0 &&
                     cert.predicted.sz == cert.observed.normal_size;
    } else {
        const Configuration* c = subj_config(d->conclusion);
        if (!c)
            throw TransformError(TransformError::Kind::SubjectMismatch, "GS subject must be a configuration");
        EvalResultGs ev = eval_gs(*c, fuel);
        cert.observed.b = ev.beta;
        cert.observed.m = ev.mem;
        cert.observed.fuel_exhausted = ev.exhausted;
        cert.observed.blocked = !ev.exhausted && is_blocked(ev.final);
        cert.observed.normal_size = ev.exhausted ? 0 : config_size(ev.final);
        cert.match = !ev.exhausted && !cert.observed.blocked && cert.predicted.b == ev.beta &&
                     cert.predicted.m == ev.mem && cert.predicted.sz == cert.observed.normal_size;
    }
    if (!cert.match) {
        std::string diff;
        if (cert.observed.fuel_exhausted) diff += "fuel exhausted; ";
        if (cert.observed.blocked) diff += "final configuration blocked; ";
        if (cert.predicted.b != cert.observed.b)
            diff += "b: predicted " + std::to_string(cert.predicted.b) + ", observed " +
                    std::to_string(cert.observed.b) + "; ";
        if (sys == System::GS && cert.predicted.m != cert.observed.m)
            diff += "m: predicted " + std::to_string(cert.predicted.m) + ", observed " +
                    std::to_string(cert.observed.m) + "; ";
        if (cert.predicted.sz != cert.observed.normal_size)
            diff += "size: predicted " + std::to_string(cert.predicted.sz) + ", observed " +
                    std::to_string(cert.observed.normal_size) + "; ";
        cert.detail = diff;
    }
    return cert;
}

}  // namespace lamq
