"""Projective simulability of quantum instruments: exact and relaxed
semidefinite tests, closed-form visibility thresholds, and application
scenarios built on top of them."""

from __future__ import annotations

__version__ = "0.1.0"

from . import analytic, applications, instruments, matcore, simulability  # noqa: F401
from .analytic import (  # noqa: F401
    char_poly_coeffs,
    dephasing_pi_model,
    dual_feasible_point,
    v_deph_highd_bound,
    v_deph_qubit,
    v_white_qubit,
    v_worst_qubit,
    worst_case_pi_model,
)
from .applications import (  # noqa: F401
    Assemblage,
    WitnessSpec,
    hemisphere_monte_carlo,
    hemisphere_tradeoff,
    hemisphere_witness,
    pi_tradeoff_curves,
    seesaw_sequential_chsh,
    witness_pi_bound,
    witness_value,
)
from .instruments import (  # noqa: F401
    ChoiInstrument,
    KrausInstrument,
    NoiseModel,
    PiDescription,
    canonicalize_pi,
    induced_povm,
    kraus_to_choi,
    luders_unsharp,
    max_entangled,
    mix,
    noise_instrument,
    pi_to_choi,
    rank_vectors,
    sic_instrument,
)
from .matcore import BipartiteOp, HermOp  # noqa: F401
from .simulability import (  # noqa: F401
    DualCertificate,
    SimResult,
    extract_pi_description,
    povm_critical_visibility,
    qubit_critical_visibility,
    qubit_pi_feasible,
    relaxed_critical_visibility,
    relaxed_pi_feasible,
    verify_dual_certificate,
    visibility_by_bisection,
    worst_case_visibility,
)
