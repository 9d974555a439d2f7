import argparse
import logging
import os
import sys
import time
import traceback
import uuid
from logging.handlers import TimedRotatingFileHandler
from typing import Dict, List, Optional

from dotenv import load_dotenv
from pythonjsonlogger import jsonlogger

from commands import CommandResult, write_frame
from commands.bubble import bubble_commands
from commands.diagnostics import diagnostics_commands
from commands.green import green_commands
from commands.solver import solver_commands
from models import RunConfig, RunManifest, artifact_version, load_config, write_manifest
from utils.errors import EXIT_FAILURE, EXIT_INVALID, InvalidConfigurationError, MeanFieldError

logger = logging.getLogger('meanfield')

# Per-run context attached to every log record (one run per process).
run_context: Dict[str, object] = {}


class CustomJsonFormatter(jsonlogger.JsonFormatter):
    def add_fields(self, log_record, record, message_dict):
        super(CustomJsonFormatter, self).add_fields(log_record, record, message_dict)
        if not log_record.get('timestamp'):
            log_record['timestamp'] = self.formatTime(record)
        if record.exc_info:
            log_record['stack_trace'] = traceback.format_exception(*record.exc_info)
        log_record['logger'] = record.name
        log_record['level'] = record.levelname

        if 'run_id' in run_context:
            log_record['run_id'] = run_context['run_id']
        if 'subcommand' in run_context:
            log_record['subcommand'] = run_context['subcommand']
        if 'start_time' in run_context:
            log_record['elapsed_ms'] = (time.time() - run_context['start_time']) * 1000


class MeanFieldArgumentParser(argparse.ArgumentParser):
    """Argument errors are configuration errors (exit 3), never exit 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise InvalidConfigurationError(message)


def setup_logging(level: Optional[str] = None) -> logging.Logger:
    load_dotenv()
    level = (level or os.environ.get('MEANFIELD_LOG_LEVEL', 'INFO')).upper()
    formatter = CustomJsonFormatter('%(timestamp)s %(level)s %(name)s %(message)s')

    root = logging.getLogger()
    for handler in [h for h in root.handlers if getattr(h, '_meanfield', False)]:
        root.removeHandler(handler)
        handler.close()

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)
    handlers = [console_handler]

    log_dir = os.environ.get('MEANFIELD_LOG_DIR')
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
        file_handler = TimedRotatingFileHandler(
            os.path.join(log_dir, 'meanfield.log'),
            when='midnight',
            interval=1,
            backupCount=30,
            encoding='utf-8'
        )
        file_handler.setFormatter(formatter)
        handlers.append(file_handler)

    for handler in handlers:
        handler._meanfield = True
        root.addHandler(handler)
    root.setLevel(level)
    return logger


def shared_arguments() -> argparse.ArgumentParser:
    common = MeanFieldArgumentParser(add_help=False)
    common.add_argument('--config', help='JSON run configuration; flags override its values')
    common.add_argument('--n', type=int, help='grid node count')
    common.add_argument('--q', type=float, help='grid grading exponent')
    common.add_argument('--rho', type=float, help='mass parameter rho')
    common.add_argument('--eps', type=float, nargs='+', help='bubble concentration parameter(s)')
    common.add_argument('--tol', type=float, help='solver tolerance')
    common.add_argument('--max-iter', dest='max_iter', type=int, help='solver iteration limit')
    common.add_argument('--r', type=float, nargs='+', help='radius or radii')
    common.add_argument('--R', type=float, help='rescaling or bubble radius')
    common.add_argument('--r0', type=float, help='inner radius of the far-field comparison')
    common.add_argument('--rho-start', dest='rho_start', type=float)
    common.add_argument('--rho-end', dest='rho_end', type=float)
    common.add_argument('--steps', type=int, help='nominal continuation steps')
    common.add_argument('--in', dest='input', help='input radial field CSV (r,value)')
    common.add_argument('--out', help='output CSV path; a manifest is written next to it')
    common.add_argument('--workers', type=int, help='threads for parameter sweeps')
    return common


def create_app() -> argparse.ArgumentParser:
    parser = MeanFieldArgumentParser(
        prog='meanfield',
        description='Clamped biharmonic mean field equation on the unit ball of R^4',
    )
    subparsers = parser.add_subparsers(dest='subcommand', metavar='subcommand')
    subparsers.required = True

    common = shared_arguments()
    for group in (green_commands, bubble_commands, solver_commands, diagnostics_commands):
        group.register(subparsers, [common])
    return parser


def build_config(args: argparse.Namespace) -> RunConfig:
    overrides = {key: value for key, value in vars(args).items() if key not in ('config', 'handler')}
    config = load_config(args.config) if args.config else RunConfig()
    if config.subcommand is not None and config.subcommand != args.subcommand:
        raise InvalidConfigurationError(
            f"configuration is for '{config.subcommand}' but '{args.subcommand}' was requested",
            details={'key': 'subcommand'})
    return config.merged(overrides)


def main(argv: Optional[List[str]] = None) -> int:
    setup_logging()
    run_context.clear()
    run_context.update({'run_id': str(uuid.uuid4()), 'start_time': time.time()})
    parser = create_app()

    try:
        args = parser.parse_args(argv)
    except InvalidConfigurationError as e:
        logger.error(f"Invalid command line: {e.message}")
        print(f"error: {e.message}", file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as e:
        return int(e.code or 0)

    run_context['subcommand'] = args.subcommand
    config = None
    try:
        config = build_config(args)
        result: CommandResult = args.handler(config)
        write_frame(result.frame, config.out)
    except MeanFieldError as e:
        logger.error(f"{args.subcommand} failed: {e.message}")
        print(f"error: {e.message}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception(f"Unexpected failure in {args.subcommand}: {e}")
        return EXIT_FAILURE

    duration = time.time() - run_context['start_time']
    if config.out:
        write_manifest(config.out, RunManifest(
            config=config.to_dict(),
            version=artifact_version(),
            duration_seconds=duration,
            status=result.status,
            exit_code=result.exit_code,
            output=config.out,
            details=result.details,
        ))
    logger.info(f"{args.subcommand} finished with status {result.status} in {duration * 1000:.2f}ms")
    return result.exit_code
