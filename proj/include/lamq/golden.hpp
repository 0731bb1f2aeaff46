#pragma once

// The golden corpus: the two reference programs and their hand-encoded tight
// derivations, used by the selftest command, the test suites and the
// mutation-rejection campaign.

#include "lamq/transform.hpp"

namespace lamq::golden {

inline const char* kExample1Source = "(\\x. (x x) (y y)) (\\z. z)";
inline const char* kExample2Source = "((\\x. get(l, y. y x)) (set(l, \\z. z, z)) | [])";

// Tight derivation of (\x. (x x) (y y)) (\z. z) : n under y:[vr,vr] at (2,2).
inline DerivPtr example1_derivation() {
    TypePtr ab = ty_ab();
    TypePtr arr = ty_arrow(mk_multi({ab}), ab);  // [ab] -> ab

    // x x : ab under x:[[ab]->ab, ab] at (1,0)
    DerivPtr ax_arr = build_ax("x", arr);
    DerivPtr ax_ab = build_ax("x", ab);
    DerivPtr many_x = build_many(mk_var("x"), {ax_ab});
    DerivPtr xx = build_app_v(ax_arr, many_x);

    // y y : n under y:[vr,vr] at (0,1)
    DerivPtr yy = build_appp1_v(build_ax("y", ty_vr()), build_ax("y", ty_vr()));

    // (x x) (y y) : n at (1,2); \x. ... : [[ab]->ab, ab] -> n
    DerivPtr body = build_appp2_v(xx, yy);
    DerivPtr lam = build_lam("x", body);

    // \z. z : [[ab]->ab, ab] via lam and lamp
    TermPtr id = mk_abs("z", mk_var("z"));
    DerivPtr id_arr = build_lam("z", build_ax("z", ab));
    DerivPtr id_many = build_many(id, {id_arr, build_lamp(id)});

    return build_app_v(lam, id_many);
}

// Tight derivation of ((\x. get(l, y. y x)) (set(l, \z. z, z)) | []) : vr x {}
// under z:[vr] at (2,2,0).
inline DerivPtr example2_derivation() {
    StateType empty_s;
    TypePtr vr = ty_vr();
    // M = [[vr] -> {} => vr x {}]
    TypePtr id_mon = ty_monadic(empty_s, ConfigType{vr, empty_s});
    TypePtr id_arr = ty_arrow(mk_multi({vr}), id_mon);
    Multi m = mk_multi({id_arr});
    StateType s_lm = state_type_single("l", m);

    // y x : {} => vr x {} under y:M, x:[vr] at (1,0,0)
    DerivPtr ax_y = build_ax("y", id_arr);
    DerivPtr lift_x = build_lift(build_many(mk_var("x"), {build_ax("x", vr)}), empty_s);
    DerivPtr yx = build_app_gs(ax_y, lift_x);

    // get(l, y. y x) : {l: M} => vr x {} at (1,1,0); abstract over x
    DerivPtr get_d = build_get("l", "y", yx);
    DerivPtr fn = build_lam("x", get_d);

    // \z. z : M
    TermPtr id = mk_abs("z", mk_var("z"));
    DerivPtr id_deriv = build_many(id, {build_lam("z", build_lift(build_ax("z", vr), empty_s))});

    // z : {l: M} => [vr] x {l: M}; set(l, \z. z, z) : {} => [vr] x {l: M}
    DerivPtr lift_z = build_lift(build_many(mk_var("z"), {build_ax("z", vr)}), s_lm);
    DerivPtr set_d = build_set("l", id_deriv, lift_z, false);

    DerivPtr app = build_app_gs(fn, set_d);
    return build_conf(app, build_emp());
}

}  // namespace lamq::golden
