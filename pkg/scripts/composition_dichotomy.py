"""Power and Cesaro verdicts for C_phi^n on a few self-maps of the disk.

Compact C_phi (z/2, z^2/2) and the identity converge; the inner map z^2 does not.
"""
from opseq.asymptotics import cesaro_trace, composition_window_sequence, detect_convergence
from opseq.operators import operator_norm
from opseq.symbols import monomial, trig_from_coeffs

CASES = {
    "z/2": monomial(1, 0.5),
    "z^2/2": monomial(2, 0.5),
    "(z+z^2)/4": trig_from_coeffs([(1, 0.25), (2, 0.25)]),
    "z": monomial(1),
    "z^2": monomial(2),
}


def main(N=32, n_max=48, tol=1e-6):
    print(f"{'phi':>10} {'power':>15} {'cesaro':>15} {'||limit||':>10}")
    for name, phi in CASES.items():
        t = composition_window_sequence(phi, N, n_max, retain=None)
        pv = detect_convergence(t, tol)
        cv = detect_convergence(cesaro_trace(t), tol)
        lim = "-" if pv.limit is None else f"{operator_norm(pv.limit):.3g}"
        print(f"{name:>10} {pv.status:>15} {cv.status:>15} {lim:>10}")


if __name__ == "__main__":
    main()
