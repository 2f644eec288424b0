"""
Command controller: one method per CLI subcommand
"""

import logging
import sys
from typing import Optional, Sequence, TextIO

import numpy as np
import pandas as pd

from database import init_database, get_session
from errors import SSLassoError, DatasetFormatError, InvalidTrialError, UsageError
from models.dataset import Bounds, Scope
from models.estimator import EstimatorVariant
from models.experiment import Theorem
from models.model_spec import DesignSpec
from models.reports import ConeKind
from repositories.campaign_repository import CampaignRepository
from services import tuning
from services.campaign_service import CampaignService
from services.dataset import load_dataset, infer_bounds, center_scale, gram
from services.estimators import fit
from services.geometry import (
    compatibility, weak_compatibility, restricted_eigenvalue, restricted_eigenvalue_over_supports, cone_sample_min,
)
from services.simulation import population_covariance
from utils.config_parser import load_experiment_config
from utils.serialization import dumps, write_json

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CHECK_FAILED = 2

# --lambda auto: which bound supplies the penalty for each variant
AUTO_LAMBDA_THEOREM = {
    EstimatorVariant.TRANSDUCTIVE: Theorem.T1,
    EstimatorVariant.TRANSDUCTIVE_PROJECTED: Theorem.T1,
    EstimatorVariant.SEMISUPERVISED: Theorem.T3,
}

LAMBDA_FORMULAS = {
    Theorem.T1: "2 gamma B_Y sqrt(log(2p/delta)/n_star) [1 + (B_X/3) sqrt(log(2p/delta)/n_star)]",
    Theorem.T2_A: "4 B_Y sqrt(log(4p/delta)/n) [1 + (B_X/2) sqrt(log(4p/delta)/n)]",
    Theorem.T2_B: "4 B_Y sqrt(log(4p/delta)/n) [1 + (B_X/2) sqrt(log(4p/delta)/n)]",
    Theorem.T3: "8 B_X B_Y sqrt(log(6p/delta)/n) [1 + (B_X/3) sqrt(log(6p/delta)/n)]",
    Theorem.COR1: "8 B_X B_Y sqrt(log(6p/delta)/n) [1 + (B_X/3) sqrt(log(6p/delta)/n)]",
    Theorem.T4: "8 B_X B_Y sqrt(log(6pN^2)/n) [1 + (B_X/3) sqrt(log(6pN^2)/n)]",
}


def theorem_lambda(theorem: Theorem, inputs: tuning.BoundInputs) -> float:
    """The penalty prescribed by `theorem`"""
    theorem = Theorem(theorem)
    if theorem is Theorem.T1:
        return tuning.lambda_transductive(inputs)
    if theorem.needs_well_specified:
        return tuning.lambda_semisup_wellspec(inputs)
    if theorem is Theorem.T4:
        return tuning.lambda_expectation(inputs.B_X, inputs.B_Y, inputs.n, inputs.N, inputs.p)
    return tuning.lambda_semisup_misspec(inputs)


def load_matrix(path: str) -> np.ndarray:
    """Square matrix from a headerless CSV"""
    try:
        frame = pd.read_csv(path, header=None, dtype=float)
    except (ValueError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DatasetFormatError(f"Malformed matrix file {path}: {e}") from e
    return frame.to_numpy()


class CommandController:
    """Controller for command-line requests"""

    def __init__(self, campaign_service: Optional[CampaignService] = None, out: Optional[TextIO] = None):
        """
        Optionally inject the service (and output stream) for testing.
        """
        self.campaign_service = campaign_service or CampaignService()
        self.out = out

    @staticmethod
    def create_with_db(database_url: Optional[str] = None) -> "CommandController":
        """
        Factory method wiring a results-store session into the campaign service.
        """
        if not init_database(database_url):
            raise SSLassoError("Results database is not available")
        return CommandController(CampaignService(CampaignRepository(get_session())))

    # -----------------------
    # Subcommands
    # -----------------------

    def fit(self, dataset: str, variant: str, lam: str = 'auto', output: Optional[str] = None,
            well_specified: bool = False, delta: float = 0.1, gamma: float = 2.0,
            bx: Optional[float] = None, by: Optional[float] = None, normalize: bool = False,
            sigma: Optional[str] = None, explain: bool = False) -> int:
        """Fit one estimator on a dataset CSV"""
        try:
            variant = EstimatorVariant(variant)
            d = load_dataset(dataset)
            if normalize:
                d = center_scale(d)
            if bx is not None and by is not None:
                d = d.with_bounds(Bounds(B_X=bx, B_Y=by))
            elif bx is not None or by is not None:
                raise UsageError("--bx and --by must be given together")

            rule = None
            if lam == 'auto':
                theorem = AUTO_LAMBDA_THEOREM.get(variant)
                if theorem is None:
                    raise UsageError(f"--lambda auto is not defined for variant '{variant.value}', pass a number")
                if theorem is Theorem.T3 and well_specified:
                    theorem = Theorem.T2_A
                if d.bounds is None:
                    d = infer_bounds(d)
                inputs = tuning.BoundInputs(
                    B_X=d.bounds.B_X, B_Y=d.bounds.B_Y, n=d.n, N=d.N, p=d.p, delta=delta, gamma=gamma,
                )
                lam_value = theorem_lambda(theorem, inputs)
                rule = {'theorem': theorem.value, 'formula': LAMBDA_FORMULAS[theorem], 'inputs': inputs.to_dict(),
                        'bounds_inferred': d.bounds_inferred}
            else:
                lam_value = _parse_positive(lam, '--lambda')

            sigma_matrix = load_matrix(sigma) if sigma else None
            result = fit(d, variant, lam_value, sigma=sigma_matrix)
            payload = result.to_dict()
            payload['dataset'] = d.summary()
            if rule is not None and explain:
                payload['lambda_rule'] = rule
            elif rule is not None:
                payload['lambda_rule'] = {'theorem': rule['theorem']}

            self._emit(payload, output)
            if not result.solution.converged:
                logger.error(f"Solver stopped with KKT residual {result.solution.kkt_residual:.3e}")
                return EXIT_ERROR
            return EXIT_OK
        except Exception as e:
            return self._respond_error(e)

    def constants(self, kind: str, c: float, J: Optional[Sequence[int]] = None, s: Optional[int] = None,
                  matrix: Optional[str] = None, dataset: Optional[str] = None, scope: str = 'all',
                  design: Optional[str] = None, p: Optional[int] = None, samples: int = 0,
                  starts: Optional[int] = None, seed: int = 0, output: Optional[str] = None) -> int:
        """Cone constants of a matrix; J is 0-based here"""
        try:
            kind = ConeKind(kind)
            M = self._cone_matrix(matrix, dataset, scope, design, p)
            if s is not None:
                if kind is not ConeKind.RESTRICTED_EIGENVALUE:
                    raise UsageError("--s is only used with --kind restricted_eigenvalue")
                report = restricted_eigenvalue_over_supports(M, s, c, starts=starts, seed=seed)
            else:
                if not J:
                    raise UsageError("--J is required unless --s is given")
                if any(j < 0 or j >= M.shape[0] for j in J):
                    raise UsageError(f"--J entries must be in 1..{M.shape[0]}")
                if kind is ConeKind.COMPATIBILITY:
                    report = compatibility(M, J, c)
                elif kind is ConeKind.WEAK_COMPATIBILITY:
                    report = weak_compatibility(M, J, c)
                else:
                    report = restricted_eigenvalue(M, J, c, starts=starts, seed=seed)

            payload = report.to_dict()
            if samples > 0:
                payload['sample_min'] = cone_sample_min(M, report.J, c, kind, samples, seed=seed)
            self._emit(payload, output)
            return EXIT_OK
        except Exception as e:
            return self._respond_error(e)

    def lambda_(self, theorem: str, by: float, bx: float, p: int, delta: float, n: Optional[int] = None,
                N: Optional[int] = None, nstar: Optional[int] = None, sigma_inv_norm: float = 1.0,
                gamma: float = 2.0, explain: bool = False) -> int:
        """Evaluate a tuning formula"""
        try:
            theorem = Theorem(theorem)
            if nstar is not None:
                # n_star = min(n, N - n) with n = N - n = nstar
                n, N = nstar, 2 * nstar
            if n is None:
                raise UsageError("--n (or --nstar) is required")
            N = n if N is None else N
            inputs = tuning.BoundInputs(
                B_X=bx, B_Y=by, n=n, N=N, p=p, delta=delta, sigma_inv_norm=sigma_inv_norm, gamma=gamma,
            )
            value = theorem_lambda(theorem, inputs)
            if explain:
                self._emit({
                    'lambda': value,
                    'theorem': theorem.value,
                    'formula': LAMBDA_FORMULAS[theorem],
                    'inputs': inputs.to_dict(),
                })
            else:
                self._write(repr(float(value)))
            return EXIT_OK
        except Exception as e:
            return self._respond_error(e)

    def simulate(self, config: str, output: Optional[str] = None, csv: Optional[str] = None, jobs: int = 1,
                 trials: Optional[int] = None, master_seed: Optional[int] = None) -> int:
        """Run a campaign and write its report"""
        try:
            experiment = load_experiment_config(config)
            report = self.campaign_service.run(experiment, trials=trials, master_seed=master_seed, jobs=jobs)
            if output:
                self.campaign_service.export_json(report, output, include_trials=True)
            if csv:
                self.campaign_service.export_csv(report, csv)
            self._emit(report.to_dict())
            return EXIT_OK
        except Exception as e:
            return self._respond_error(e)

    def verify(self, config: str, jobs: int = 1, trials: Optional[int] = None,
               master_seed: Optional[int] = None) -> int:
        """simulate, with the pass flag as exit status"""
        try:
            experiment = load_experiment_config(config)
            report = self.campaign_service.run(experiment, trials=trials, master_seed=master_seed, jobs=jobs)
            self._emit(report.to_dict())
            return EXIT_OK if report.passed else EXIT_CHECK_FAILED
        except Exception as e:
            return self._respond_error(e)

    def compare(self, config: str, output: Optional[str] = None, csv: Optional[str] = None, jobs: int = 1,
                trials: Optional[int] = None, master_seed: Optional[int] = None) -> int:
        """Paired semi-supervised versus supervised comparison"""
        try:
            experiment = load_experiment_config(config)
            report = self.campaign_service.compare(experiment, trials=trials, master_seed=master_seed, jobs=jobs)
            if output:
                self.campaign_service.export_json(report, output)
            if csv:
                self.campaign_service.export_csv(report, csv)
            self._emit(report.to_dict())
            return EXIT_OK if report.passed else EXIT_CHECK_FAILED
        except Exception as e:
            return self._respond_error(e)

    def history(self, limit: int = 10) -> int:
        """Summarize the campaigns in the results store"""
        try:
            if limit < 1:
                raise UsageError("--limit must be >= 1")
            self._emit(self.campaign_service.history(limit=limit))
            return EXIT_OK
        except Exception as e:
            return self._respond_error(e)

    # -----------------------
    # Helpers
    # -----------------------

    @staticmethod
    def _cone_matrix(matrix: Optional[str], dataset: Optional[str], scope: str,
                     design: Optional[str], p: Optional[int]) -> np.ndarray:
        sources = [s for s in (matrix, dataset, design) if s]
        if len(sources) != 1:
            raise UsageError("exactly one of --matrix, --dataset, --design is required")
        if matrix:
            return load_matrix(matrix)
        if dataset:
            return gram(load_dataset(dataset), Scope(scope)).matrix
        if p is None:
            raise UsageError("--design needs --p")
        return population_covariance(DesignSpec.named(design, p)).matrix

    def _stream(self) -> TextIO:
        return self.out or sys.stdout

    def _write(self, text: str):
        stream = self._stream()
        stream.write(text + '\n')
        stream.flush()

    def _emit(self, payload, output: Optional[str] = None):
        if output:
            write_json(output, payload)
        self._write(dumps(payload))

    def _respond_error(self, error: Exception) -> int:
        """Print a problem-details object and return the exit status"""
        if isinstance(error, (SSLassoError, ValueError, FileNotFoundError)):
            logger.error(f"{type(error).__name__}: {error}")
            problem_details = {
                'type': _kebab(type(error).__name__),
                'title': _title(type(error).__name__),
                'status': EXIT_ERROR,
                'detail': str(error),
            }
            if isinstance(error, InvalidTrialError):
                problem_details['seed'] = error.seed
                problem_details['trial_index'] = error.trial_index
        else:
            logger.error(f"Unexpected error: {error}", exc_info=True)
            problem_details = {
                'type': 'internal-error',
                'title': 'Internal Error',
                'status': EXIT_ERROR,
                'detail': 'An unexpected error occurred, see the log for the traceback.',
            }
        self._write(dumps(problem_details))
        return EXIT_ERROR


def _parse_positive(raw: str, flag: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise UsageError(f"{flag} must be a positive number or 'auto', got {raw!r}")
    if not value > 0:
        raise UsageError(f"{flag} must be > 0, got {raw!r}")
    return value


def _kebab(name: str) -> str:
    out = []
    for i, ch in enumerate(name):
        if ch.isupper() and i > 0 and not name[i - 1].isupper():
            out.append('-')
        out.append(ch.lower())
    return ''.join(out)


def _title(name: str) -> str:
    return _kebab(name).replace('-', ' ').title()
