"""Distances to H^inf and H^inf + C for a handful of trigonometric symbols,
compared against the sup norm on a grid."""
from opseq.distances import dist_hinf, dist_hinf_plus_c
from opseq.symbols import sup_norm_grid, trig_from_coeffs

SYMBOLS = {
    "conj z": [(-1, 1)],
    "conj z + conj z^2 / 2": [(-1, 1), (-2, 0.5)],
    "1 + z^3": [(0, 1), (3, 1)],
    "conj z^3 + 2i conj z + z^4": [(-3, 1), (-1, 2j), (4, 1)],
}

if __name__ == "__main__":
    for name, coeffs in SYMBOLS.items():
        phi = trig_from_coeffs(coeffs)
        limit, trace = dist_hinf_plus_c(phi, n_max=6)
        chain = " ".join(f"{d:.4f}" for _, d in trace.per_n)
        print(f"{name:>28}: dist(H^inf)={dist_hinf(phi):.6f} sup={sup_norm_grid(phi):.4f} "
              f"dist(H^inf+C)={limit:.3g} chain=[{chain}]")
