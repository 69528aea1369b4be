"""Extreme-value objectives, an extreme-aware loss, a rank-preserving booster and verification metrics."""

from .errors import (
    ConfigError,
    DegenerateRateError,
    DomainError,
    GridFormatError,
    SaturationWarning,
    SolverError,
)
from .evt_core import (
    BlockSampleConfig,
    GumbelParams,
    Kind,
    NormalParams,
    gumbel_pdf,
    normal_nll,
    obj_max,
    obj_max_grad,
    obj_min,
    sample_block_maxima,
)
from .exbooster import BoosterConfig, ex_booster, sort_index
from .exloss import (
    ExtremeThresholds,
    ScalingConfig,
    ScalingSolution,
    area_r1,
    area_r2,
    combined_noise_loss,
    exloss_grad,
    scaling_field,
    solve_scaling,
)
from .grid import GriddedField, derive_wind_speed, parse_channel, read_grid, write_grid
from .metrics import contingency, quantile, rqe, sedi, weighted_rmse

__version__ = "0.1.0"
