"""Single record of the sign/normalization conventions used across modules.

Every 2*pi, sqrt(-1) and weight constant that the geometric formulas leave
floating is pinned here, so a reviewer can flip one and rerun the suite.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class Conventions:
    # i*ddbar(phi) is represented by the Hermitian matrix of mixed second
    # derivatives d^2 phi / dz_j dzbar_k (no extra 2*pi); the flat Kahler
    # form is s * Identity with s fixed by the unit-volume normalization.
    ddbar_factor: float = 1.0
    # Default weight of the line-bundle symplectic form / moment map.  The
    # weight appearing in the moment-map display and the denominator-clearing
    # integer of the virtual-bundle system are treated as independent
    # configuration constants; both default to 1.
    weight_W: float = 1.0
    # Default weight of the Calabi-Yang-Mills prequantum combination.
    weight_N: float = 1.0
    # Curvatures are carried as first Chern forms (i*Theta / 2*pi); the raw
    # topological constant lambda of the Calabi-Yang-Mills system equals
    # 2*pi times the value used internally.
    two_pi_in_lambda: float = 6.283185307179586
    # Gauge vector field convention: the tangent induced by a Lie-algebra
    # direction g is +d_A(g) for the U(1) lab and the Calabi-Yang-Mills lab,
    # and -d_A(g) for the rank-2 Higgs lab (the sign that makes the complex
    # symplectic pairing antisymmetric).
    gauge_sign_u1: float = 1.0
    gauge_sign_higgs: float = -1.0


DEFAULT = Conventions()
