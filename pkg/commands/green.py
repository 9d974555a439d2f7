import logging

import pandas as pd

from commands import CommandGroup, CommandResult, grid_for
from models import RunConfig
from utils.green_robin import BallPoint, con_value, green, green_bound_check, r1_solve, robin, sample_pairs

logger = logging.getLogger(__name__)
green_commands = CommandGroup('green')

DEFAULT_SAMPLES = 200


def _radii(config: RunConfig, default):
    return config.r if config.r is not None else list(default)


@green_commands.command('green', help="Green's function G(r e1, 0) of the clamped bilaplacian")
def green_values(config: RunConfig) -> CommandResult:
    radii = _radii(config, [0.5])
    values = [green(BallPoint.from_radius(r), BallPoint.origin()) for r in radii]
    return CommandResult(pd.DataFrame({'input': radii, 'value': values}))


@green_commands.command('robin', help='Regular part R(r e1, 0) of the Green function')
def robin_values(config: RunConfig) -> CommandResult:
    radii = _radii(config, [0.0, 0.5])
    values = [robin(BallPoint.from_radius(r), BallPoint.origin()) for r in radii]
    return CommandResult(pd.DataFrame({'input': radii, 'value': values}))


@green_commands.command('r1', help='R_1(x, 0) sampled on the radial grid')
def r1_values(config: RunConfig) -> CommandResult:
    grid = grid_for(config)
    field = r1_solve(BallPoint.origin(), grid)
    return CommandResult(pd.DataFrame({'input': field.r, 'value': field.values}),
                         details={'center_value': float(field.values[0])})


@green_commands.command('con', help='Attainment quantity R_1(Q,Q) + 16 pi^2 Delta_x R(Q,Q)')
def con_values(config: RunConfig) -> CommandResult:
    grid = grid_for(config)
    radii = _radii(config, [0.0])
    values = [con_value(BallPoint.from_radius(r), grid) for r in radii]
    return CommandResult(pd.DataFrame({'Q': radii, 'value': values}))


@green_commands.command('green-bounds', help='Fitted constants of the Green function growth bounds (--n samples)')
def green_bounds(config: RunConfig) -> CommandResult:
    count = config.n if config.n is not None else DEFAULT_SAMPLES
    report = green_bound_check(sample_pairs(count))
    frame = pd.DataFrame({
        'bound': ['log', 'gradient', 'hessian'],
        'constant': [report.log_constant, report.gradient_constant, report.hessian_constant],
    })
    return CommandResult(frame, details=report.to_dict())
