import logging

import pandas as pd

from commands import CommandGroup, CommandResult, read_field
from models import RunConfig
from utils.diagnostics import far_field_compare, local_mass, pohozaev_residual, rescale_extract

logger = logging.getLogger(__name__)
diagnostics_commands = CommandGroup('diagnostics')

POHOZAEV_RADII = (0.3, 0.5, 0.7, 0.9)
QUANTIZE_RADII = (0.1, 0.25, 0.5, 0.75, 1.0)


@diagnostics_commands.command('pohozaev', help='Pohozaev identity terms on balls B_r of a solution (--in)')
def pohozaev(config: RunConfig) -> CommandResult:
    config.require('rho')
    field = read_field(config)
    radii = config.r if config.r is not None else list(POHOZAEV_RADII)
    rows = [pohozaev_residual(field, config.rho, r).to_dict() for r in radii]
    return CommandResult(pd.DataFrame(rows))


@diagnostics_commands.command('quantize', help='Local mass rho int_{B_r} e^u / int e^u')
def quantize(config: RunConfig) -> CommandResult:
    config.require('rho')
    field = read_field(config)
    radii = config.r if config.r is not None else list(QUANTIZE_RADII)
    masses = [local_mass(field, config.rho, r) for r in radii]
    return CommandResult(pd.DataFrame({'r': radii, 'local_mass': masses}))


@diagnostics_commands.command('rescale', help='Distance of the blow-up rescaling to the standard bubble on B_R')
def rescale(config: RunConfig) -> CommandResult:
    config.require('rho')
    field = read_field(config)
    report = rescale_extract(field, config.rho, config.R if config.R is not None else 10.0)
    return CommandResult(pd.DataFrame({'mu': [report.mu], 'sup_distance': [report.sup_distance]}),
                         details=report.to_dict())


@diagnostics_commands.command('farfield', help='Distance to 64 pi^2 m G(x, 0) on r >= r0')
def farfield(config: RunConfig) -> CommandResult:
    config.require('rho')
    field = read_field(config)
    r0 = config.r0 if config.r0 is not None else 0.3
    distance = far_field_compare(field, config.rho, r0)
    return CommandResult(pd.DataFrame({'r0': [r0], 'sup_distance': [distance]}))
