"""
Semi-supervised lasso - command-line entry point

    python cli.py fit --dataset d.csv --variant semisupervised --lambda auto
    python cli.py constants --design equicorrelated --p 6 --J 1 2 --c 3 --kind compatibility
    python cli.py lambda --theorem T1 --by 1 --bx 1 --nstar 100 --p 10 --delta 0.1
    python cli.py simulate --config configs/t1.cfg --output t1.json --csv t1.csv
    python cli.py verify --config configs/t1.cfg --jobs 4
    python cli.py compare --config configs/benefit.cfg
    python cli.py history --database sqlite:///results.db

JSON goes to stdout, the log to stderr.
"""

import argparse
import logging
import sys
from typing import List, Optional

from config import Config
from controllers.command_controller import CommandController, EXIT_ERROR
from database import close_database
from errors import UsageError
from models.estimator import EstimatorVariant
from models.experiment import Theorem
from models.reports import ConeKind
from utils.serialization import dumps

logger = logging.getLogger(__name__)


class _ArgumentParser(argparse.ArgumentParser):
    """Reports usage errors as exceptions (exit 1) instead of exiting with 2"""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_run_options(parser: argparse.ArgumentParser):
    parser.add_argument('--config', required=True, help='experiment config (key = value lines)')
    parser.add_argument('--jobs', type=int, default=1, help='concurrent trials (does not change results)')
    parser.add_argument('--trials', type=int, default=None, help='override the config trial count')
    parser.add_argument('--master-seed', type=int, default=None, help='override the config master seed')


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog='sslasso', description='Semi-supervised and transductive lasso')
    subparsers = parser.add_subparsers(dest='command', parser_class=_ArgumentParser)
    subparsers.required = True

    fit = subparsers.add_parser('fit', help='fit an estimator on a dataset CSV')
    fit.add_argument('--dataset', required=True)
    fit.add_argument('--variant', required=True, choices=[v.value for v in EstimatorVariant])
    fit.add_argument('--lambda', dest='lam', default='auto', help="penalty level or 'auto'")
    fit.add_argument('--output', default=None)
    fit.add_argument('--well-specified', action='store_true', help='auto lambda from the well-specified bound')
    fit.add_argument('--delta', type=float, default=0.1)
    fit.add_argument('--gamma', type=float, default=2.0)
    fit.add_argument('--bx', type=float, default=None, help='feature bound B_X')
    fit.add_argument('--by', type=float, default=None, help='label bound B_Y')
    fit.add_argument('--normalize', action='store_true', help='center and scale before fitting')
    fit.add_argument('--sigma', default=None, help='population covariance CSV (known_sigma)')
    fit.add_argument('--explain', action='store_true')

    constants = subparsers.add_parser('constants', help='compatibility / restricted eigenvalue constants')
    constants.add_argument('--kind', required=True, choices=[k.value for k in ConeKind])
    constants.add_argument('--c', type=float, required=True)
    constants.add_argument('--J', type=int, nargs='+', default=None, help='1-based support indices')
    constants.add_argument('--s', type=int, default=None, help='minimize over supports of size <= s')
    constants.add_argument('--matrix', default=None, help='headerless square CSV')
    constants.add_argument('--dataset', default=None)
    constants.add_argument('--scope', default='all', choices=['labeled', 'unlabeled', 'all'])
    constants.add_argument('--design', default=None, choices=['identity', 'equicorrelated', 'chain'])
    constants.add_argument('--p', type=int, default=None)
    constants.add_argument('--samples', type=int, default=0, help='also report a random-sampling minimum')
    constants.add_argument('--starts', type=int, default=None)
    constants.add_argument('--seed', type=int, default=0)
    constants.add_argument('--output', default=None)

    lam = subparsers.add_parser('lambda', help='evaluate a tuning formula')
    lam.add_argument('--theorem', required=True, choices=[t.value for t in Theorem])
    lam.add_argument('--by', type=float, required=True)
    lam.add_argument('--bx', type=float, required=True)
    lam.add_argument('--p', type=int, required=True)
    lam.add_argument('--delta', type=float, default=0.1)
    lam.add_argument('--n', type=int, default=None)
    lam.add_argument('--N', type=int, default=None)
    lam.add_argument('--nstar', type=int, default=None)
    lam.add_argument('--sigma-inv-norm', type=float, default=1.0)
    lam.add_argument('--gamma', type=float, default=2.0)
    lam.add_argument('--explain', action='store_true')

    simulate = subparsers.add_parser('simulate', help='run a Monte Carlo campaign')
    _add_run_options(simulate)
    simulate.add_argument('--output', default=None, help='JSON report with every trial')
    simulate.add_argument('--csv', default=None, help='per-trial CSV')
    simulate.add_argument('--database', default=None, help='results store URL')

    verify = subparsers.add_parser('verify', help='run a campaign, exit 2 when it fails')
    _add_run_options(verify)
    verify.add_argument('--database', default=None, help='results store URL')

    compare = subparsers.add_parser('compare', help='paired semisupervised vs supervised comparison')
    _add_run_options(compare)
    compare.add_argument('--output', default=None)
    compare.add_argument('--csv', default=None)

    history = subparsers.add_parser('history', help='summarize campaigns in the results store')
    history.add_argument('--database', default=None, help='results store URL')
    history.add_argument('--limit', type=int, default=10, help='most recent campaigns to list')
    return parser


def _controller(args) -> CommandController:
    url = getattr(args, 'database', None) or Config.RESULTS_DATABASE_URL
    if args.command in ('simulate', 'verify', 'history') and url:
        return CommandController.create_with_db(url)
    return CommandController()


def _dispatch(controller: CommandController, args) -> int:
    if args.command == 'fit':
        return controller.fit(
            args.dataset, args.variant, lam=args.lam, output=args.output, well_specified=args.well_specified,
            delta=args.delta, gamma=args.gamma, bx=args.bx, by=args.by, normalize=args.normalize,
            sigma=args.sigma, explain=args.explain,
        )
    if args.command == 'constants':
        J = [j - 1 for j in args.J] if args.J else None
        return controller.constants(
            args.kind, args.c, J=J, s=args.s, matrix=args.matrix, dataset=args.dataset, scope=args.scope,
            design=args.design, p=args.p, samples=args.samples, starts=args.starts, seed=args.seed,
            output=args.output,
        )
    if args.command == 'lambda':
        return controller.lambda_(
            args.theorem, by=args.by, bx=args.bx, p=args.p, delta=args.delta, n=args.n, N=args.N,
            nstar=args.nstar, sigma_inv_norm=args.sigma_inv_norm, gamma=args.gamma, explain=args.explain,
        )
    if args.command == 'history':
        return controller.history(limit=args.limit)
    run = dict(jobs=args.jobs, trials=args.trials, master_seed=args.master_seed)
    if args.command == 'simulate':
        return controller.simulate(args.config, output=args.output, csv=args.csv, **run)
    if args.command == 'verify':
        return controller.verify(args.config, **run)
    return controller.compare(args.config, output=args.output, csv=args.csv, **run)


def main(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand; returns the exit status"""
    Config.init_logging()
    try:
        Config.validate()
        args = build_parser().parse_args(argv)
        if getattr(args, 'jobs', 1) < 1:
            raise UsageError("--jobs must be >= 1")
        controller = _controller(args)
    except Exception as e:
        logger.error(f"{e}")
        sys.stdout.write(dumps({
            'type': 'usage-error' if isinstance(e, UsageError) else 'configuration-error',
            'title': 'Usage Error' if isinstance(e, UsageError) else 'Configuration Error',
            'status': EXIT_ERROR,
            'detail': str(e),
        }) + '\n')
        return EXIT_ERROR

    try:
        return _dispatch(controller, args)
    finally:
        close_database()


if __name__ == '__main__':
    sys.exit(main())
