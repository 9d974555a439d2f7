import logging

import pandas as pd

from commands import CommandGroup, CommandResult, grid_for
from models import RunConfig
from utils.errors import EXIT_NOT_CONVERGED
from utils.meanfield_solver import (DEFAULT_MAX_ITER, DEFAULT_TOL, STEP_UNDERFLOW, continuation,
                                    solve_newton)

logger = logging.getLogger(__name__)
solver_commands = CommandGroup('solver')


@solver_commands.command('solve', help='Damped Newton solve of the clamped mean field equation')
def solve(config: RunConfig) -> CommandResult:
    config.require('rho')
    report = solve_newton(config.rho,
                          tol=config.tol if config.tol is not None else DEFAULT_TOL,
                          max_iter=config.max_iter if config.max_iter is not None else DEFAULT_MAX_ITER,
                          grid=grid_for(config))
    if report.converged:
        return CommandResult(report.field.to_frame(), status='converged', details=report.to_dict())
    return CommandResult(report.field.to_frame(), exit_code=EXIT_NOT_CONVERGED, status='not_converged',
                         details=report.to_dict())


@solver_commands.command('continue', help='Continuation in rho with warm-started Newton solves')
def continue_path(config: RunConfig) -> CommandResult:
    config.require('rho_start', 'rho_end')
    report = continuation(config.rho_start, config.rho_end,
                          steps=config.steps if config.steps is not None else 12,
                          tol=config.tol if config.tol is not None else DEFAULT_TOL,
                          grid=grid_for(config),
                          max_iter=config.max_iter if config.max_iter is not None else DEFAULT_MAX_ITER)
    frame = pd.DataFrame([step.to_dict() for step in report.steps],
                         columns=['rho', 'energy', 'max_u', 'mu', 'converged'])
    failed = report.status == STEP_UNDERFLOW or not report.all_converged
    return CommandResult(frame,
                         exit_code=EXIT_NOT_CONVERGED if failed else 0,
                         status=report.status,
                         details={'accepted': len(report.steps), 'rejected': report.rejected})
