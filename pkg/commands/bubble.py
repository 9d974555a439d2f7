import logging

import numpy as np
import pandas as pd

from commands import CommandGroup, CommandResult, grid_for
from models import RunConfig
from utils.bubble import (CRITICAL_MASS, DEFAULT_EXPANSION_EPS, DEFAULT_FAMILY_EPS, bubble_mass,
                          bubble_pde_residual, energy_expansion, energy_family, family_grid, fit_slope, project)
from utils.radial_core import fitted_order

logger = logging.getLogger(__name__)
bubble_commands = CommandGroup('bubble')

LADDER_LEVELS = 4


@bubble_commands.command('bubble-check', help='Residual of the standard bubble PDE under refinement')
def bubble_check(config: RunConfig) -> CommandResult:
    base = config.n if config.n is not None else 257
    radius = config.R if config.R is not None else 10.0
    sizes = [(base - 1) * 2 ** k + 1 for k in range(LADDER_LEVELS)]
    residuals = [bubble_pde_residual(n, radius) for n in sizes]
    order = fitted_order([radius / (n - 1) for n in sizes], residuals)
    logger.info(f"Bubble residual order on [0, {radius}]: {order:.3f}")
    return CommandResult(pd.DataFrame({'n': sizes, 'residual': residuals}),
                         details={'R': radius, 'fitted_order': order, 'mass': bubble_mass(np.inf)})


@bubble_commands.command('project', help='Clamped projection of the bubble at the center')
def project_bubble(config: RunConfig) -> CommandResult:
    eps = config.eps[0] if config.eps else 0.1
    report = project(eps, grid_for(config))
    return CommandResult(report.projected.to_frame(), details=report.to_dict())


@bubble_commands.command('energy-family', help='J_rho along the projected bubble family')
def energy_family_command(config: RunConfig) -> CommandResult:
    config.require('rho')
    eps_list = config.eps or list(DEFAULT_FAMILY_EPS)
    series = energy_family(config.rho, eps_list,
                           n=config.n if config.n is not None else 2049,
                           q=config.q if config.q is not None else 2.0,
                           workers=config.workers or 1)
    eps = [e for e, _ in series]
    energies = [j for _, j in series]
    details = {'predicted_slope': 4.0 * (CRITICAL_MASS - config.rho)}
    if len(series) > 1:
        details['fitted_slope'] = fit_slope(np.log(1.0 / np.asarray(eps)), energies)
    return CommandResult(pd.DataFrame({'eps': eps, 'J': energies}), details=details)


@bubble_commands.command('energy-expansion', help='eps^2 coefficient of J_{64 pi^2} along the bubble family')
def energy_expansion_command(config: RunConfig) -> CommandResult:
    eps_list = config.eps or list(DEFAULT_EXPANSION_EPS)
    grid = family_grid(min(eps_list),
                       n=config.n if config.n is not None else 2049,
                       q=config.q if config.q is not None else 2.0)
    fit = energy_expansion(eps_list, grid=grid, workers=config.workers or 1)
    eps = [e for e, _ in fit.series]
    energies = [j for _, j in fit.series]
    return CommandResult(pd.DataFrame({'eps': eps, 'J': energies}), details=fit.to_dict())
