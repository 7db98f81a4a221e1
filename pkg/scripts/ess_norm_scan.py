"""Essential norm of T_phi + K as the window size grows.

The window norms ||S*^n (T_phi + K) S^n|| settle at ||T_phi|| once n passes the
support of K, whatever the size of K.
"""
import numpy as np

from opseq.asymptotics import ess_norm_estimate
from opseq.operators import operator_norm, toeplitz_matrix
from opseq.symbols import trig_from_coeffs

if __name__ == "__main__":
    rng = np.random.default_rng(0x5EED)
    phi = trig_from_coeffs([(0, 0.5), (1, 1)])
    for N in (16, 32, 64, 128):
        M = N + 40
        T = toeplitz_matrix(phi, M).entries
        K = np.zeros((M, M), dtype=complex)
        K[:8, :8] = 3 * rng.standard_normal((8, 8))
        est, _ = ess_norm_estimate(T + K, N, 16)
        print(f"N={N:4d} ||T+K||={operator_norm(T + K):8.4f} ess~{est:.6f} ||T_N||={operator_norm(T[:N, :N]):.6f}")
