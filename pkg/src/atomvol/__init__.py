"""Implied volatility with a positive mass at zero."""

from __future__ import annotations

__version__ = "0.1.0"

from atomvol.asymptotics import (  # noqa: E402
    ExpansionResult,
    SmileSlice,
    d2_diagnostic,
    expansion,
    gulisashvili_iv,
    no_atom_divergence,
    normalized_smile,
    psi,
    tail_wing_iv,
)
from atomvol.bs import bs_call, bs_put, d12, implied_vol, smile_slope, vega  # noqa: E402
from atomvol.errors import (  # noqa: E402
    ArbitrageError,
    AtomVolError,
    DivergenceWarning,
    DomainError,
    EstimationError,
    InversionError,
    NumericalError,
    QuadratureError,
    UnsupportedModelError,
)
from atomvol.estimators import (  # noqa: E402
    SurvivalEstimate,
    survival_from_d2,
    survival_second_order,
    survival_third_order,
    table1,
)
from atomvol.models import (  # noqa: E402
    CEV,
    AbsorbedOU,
    AtomDistribution,
    BlackScholes,
    Merton,
    ToyAffine,
    cev_density,
    cev_mass,
    cev_put,
    merton_cdf,
    merton_put,
    model_from_dict,
    ou_density,
    ou_mass,
    remainder_R,
    toy_affine_call,
)
from atomvol.montecarlo import McConfig, McResult, mc_price  # noqa: E402
from atomvol.symmetry import (  # noqa: E402
    SwapQuote,
    g_transform,
    merton_symmetry_check,
    not_a_call_witness,
    restricted_iv,
    swap_strike,
    symmetry_deviation,
)
from atomvol.validation import (  # noqa: E402
    SmileFunction,
    gamma2_put,
    gamma_plus,
    guo_param,
    roper_operator,
    sigma_gamma,
    valid_at,
    validate,
    x_star,
)
