"""Calibration and pricing toolkit for increasing heat-kernel martingale models.

The model prices an underlying as S_t = f_t(B_t) where B is a Brownian motion
in variance-time and f_t is an increasing map family closed under Gaussian
smoothing. The package recovers f from option quotes (a quantile method on a
single chain, and a time-series least-squares method on one strike), prices
calls/puts under the fitted map, benchmarks against a Sticky-Strike baseline,
and validates the whole loop on simulated paths. A FastAPI service exposes the
toolkit; the CLI is a thin client over it.
"""

from .core import (
    CmmvModel,
    HermiteExpansion,
    IncreasingPolynomial,
    eval_ft,
    deriv_ft,
    hermite_expand,
    hermite_phi,
    invert_ft,
    local_vol,
    poly_from_squares,
)
from .errors import CmmvError

__version__ = "0.1.0"

from .analytics import PricingModel, load_model, predict, save_model, smile_shift, vol_surface
from .baseline import SmileModel, fit_smile, ss_price
from .calibrate import FitConfig, m1_calibrate, m2_calibrate, select_degree
from .marketdata import OptionChain, build_chain, parse_chain
from .pricing import call_price, implied_vol, put_price
from .simulate import PathGrid, recover, simulate_paths

__all__ = [
    "CmmvModel",
    "HermiteExpansion",
    "IncreasingPolynomial",
    "CmmvError",
    "FitConfig",
    "OptionChain",
    "PathGrid",
    "PricingModel",
    "SmileModel",
    "build_chain",
    "call_price",
    "eval_ft",
    "deriv_ft",
    "fit_smile",
    "hermite_expand",
    "hermite_phi",
    "implied_vol",
    "invert_ft",
    "load_model",
    "local_vol",
    "m1_calibrate",
    "m2_calibrate",
    "parse_chain",
    "poly_from_squares",
    "predict",
    "put_price",
    "recover",
    "save_model",
    "select_degree",
    "simulate_paths",
    "smile_shift",
    "ss_price",
    "vol_surface",
    "__version__",
]
