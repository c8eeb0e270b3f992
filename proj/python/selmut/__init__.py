"""Selection-mutation models with nonlocal competition.

Thin layer over the compiled core; arrays are numpy float64 vectors on a Grid.
"""

import json as _json

from ._selmut import (
    CapabilityError,
    CflError,
    Config,
    ConfigurationError,
    DimensionError,
    DomainError,
    Error,
    ExtinctionError,
    Grid,
    Model,
    PreconditionError,
    Profile,
    Replicator,
    StiffnessError,
    UsageError,
    esd_check,
    hopf_cole,
    integrate,
    inverse_hopf_cole,
    laplace_transform,
    load_config,
    m_xA,
    parse_config,
    solve_dirac,
    validate,
)
from ._selmut import run_experiment as _run_experiment


def run_experiment(config, out=None, only=None, write_files=False):
    """Run a config (path, JSON text or Config); returns (report dict, exit code)."""
    if isinstance(config, str):
        config = parse_config(config) if config.lstrip().startswith("{") else load_config(config)
    elif not isinstance(config, Config):
        config = load_config(str(config))
    text, code = _run_experiment(config, None if out is None else str(out), only, write_files)
    return _json.loads(text), code


__all__ = [name for name in dir() if not name.startswith("_")]
