"""Cone Laplace transforms along the complex-direction curve.

For a corner cone and an enclosing spherical cone, evaluates
tau^n |L(rho(tau))| on a dyadic tau ladder and shows the plateau that
certifies a tau-independent lower bound, together with the closed-form
targets 1/(1+|a|) (2D wedge) and 2^(-3/2) (3D orthant).

Run:  python demos/cone_lower_bound.py
"""

import numpy as np

from polyscat import cgo, geom


def curve(p_cone, q_cone, label, target):
    taus = 2.0 * 2.0 ** np.arange(8)
    c = cgo.lower_bound_curve(p_cone, q_cone, 2.0, taus)
    print(f"\n{label}: |L(zeta)| = {abs(c.zeta_value):.4f}, "
          f"closed-form target {target:.4f}")
    for tau, v in zip(c.taus, c.values):
        print(f"  tau = {tau:6.1f}   tau^n |L(rho)| = {v:.4f}")
    print(f"  plateau constant c = {c.c:.4f} (from tau >= {c.tau0})")


def main():
    # quarter plane: a = 0, so the 2D bound 1/(1+|a|) is attained
    quarter = geom.PolyCone(np.zeros(2),
                            np.array([[1.0, 0.0], [0.0, 1.0]]),
                            "polyhedral")
    ax2 = np.array([1.0, 1.0]) / np.sqrt(2)
    spher2 = geom.PolyCone(np.zeros(2), ax2[None], "spherical",
                           half_angle=0.8)
    curve(quarter, spher2, "2D quarter plane", 1.0)

    # a narrower wedge: the plateau sits above 1/(1+|a|)
    t0, span = np.pi / 4 - np.pi / 5, 2 * np.pi / 5
    wedge = geom.PolyCone(np.zeros(2),
                          np.array([[np.cos(t0), np.sin(t0)],
                                    [np.cos(t0 + span), np.sin(t0 + span)]]),
                          "polyhedral")
    a = 1.0 / np.tan(span)
    curve(wedge, spher2, f"2D wedge, opening 2pi/5 (a = {a:.3f})",
          1.0 / (1.0 + abs(a)))

    # 3D orthant
    orthant = geom.PolyCone(np.zeros(3), np.eye(3), "polyhedral")
    ax3 = np.ones(3) / np.sqrt(3)
    spher3 = geom.PolyCone(np.zeros(3), ax3[None], "spherical",
                           half_angle=1.0)
    curve(orthant, spher3, "3D orthant", 2.0 ** -1.5)


if __name__ == "__main__":
    main()
