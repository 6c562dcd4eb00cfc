"""Command-line entry point: simulations, density evaluations and verifications."""
import argparse
import json
import logging
import math
import sys
import time
import traceback
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from CoalescentLab.analyzer.density import DensityEvaluator
from CoalescentLab.analyzer.pde import residual_report
from CoalescentLab.generators.manifest import ManifestWriter
from CoalescentLab.generators.markdown_generator import MarkdownGenerator
from CoalescentLab.generators.report_writer import format_csv, format_json, write_csv, write_json
from CoalescentLab.model.partition import MassPartition
from CoalescentLab.model.subordinator import (
    classify_equivalence, integrated_tail, laplace_exponent, levy_mass, mean_rate,
)
from CoalescentLab.operations.measure import FUNCTIONALS, importance_expectation, marginal_density_test
from CoalescentLab.operations.sanity_checker import P_VALUE_FLOOR, SanityChecker
from CoalescentLab.simulation.coalescent import simulate
from CoalescentLab.simulation.excursion import ThetaSequence, sample_theta_fragmentation
from CoalescentLab.utils.config import DENSITY_QUANTITIES, ConfigError, ExperimentConfig
from CoalescentLab.utils.logger import Logger, get_logger
from CoalescentLab.utils.streams import run_replicates, substream

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INTERRUPTED = 130


@dataclass(frozen=True)
class CoalescentJob:
    n: int
    t: float
    seed: int
    replicate: int


def coalescent_job(job: CoalescentJob) -> List[Tuple]:
    """CSV rows of one coalescent run from the monodisperse state."""
    rng = substream(job.seed, 'simulate-coalescent', job.n, job.replicate)
    trajectory = simulate(MassPartition.monodisperse(job.n), job.t, rng)
    return [(job.replicate, index, when, state.k, state.largest(1), state.largest(2))
            for index, (when, state) in enumerate(trajectory)]


@dataclass(frozen=True)
class FragmentationJob:
    t: float
    grid_n: int
    theta: Tuple[float, ...]
    sigma: float
    literal: bool
    seed: int
    replicate: int


def fragmentation_job(job: FragmentationJob) -> List[Tuple]:
    """CSV rows (replicate, rank, mass) of one fragmentation."""
    rng = substream(job.seed, 'simulate-fragmentation', job.t, job.replicate)
    theta = ThetaSequence(job.theta, job.sigma, job.literal)
    sample = sample_theta_fragmentation(theta, job.t, job.grid_n, rng, job.seed, job.replicate)
    return [(job.replicate, rank, mass) for rank, mass in enumerate(sample.partition.to_list(), start=1)]


def _flatten(blocks: Sequence[List[Tuple]]) -> List[Tuple]:
    return [row for block in blocks for row in block]


class Experiment:
    """Runs one configured command and writes its artifacts."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.command = config.get('command')
        self.seed = config.get_seed()
        self.workers = config.get('workers')
        self.logger = get_logger()

    def simulate_coalescent(self) -> Tuple[str, Tuple[List[str], List[Tuple]]]:
        c = self.config
        jobs = [CoalescentJob(c.get('n'), float(c.get('t')), self.seed, r) for r in range(c.get('replicates'))]
        rows = _flatten(run_replicates(coalescent_job, jobs, self.workers))
        header = ['replicate', 'event_index', 'time', 'k', 'largest_mass', 'second_mass']
        return 'csv', (header, rows)

    def simulate_fragmentation(self) -> Tuple[str, Tuple[List[str], List[Tuple]]]:
        c = self.config
        theta = ThetaSequence.from_theta(c.get('theta'), c.get('literal_sigma'))
        jobs = [FragmentationJob(float(c.get('t')), c.get('grid_n'), theta.theta, theta.sigma, theta.literal,
                                 self.seed, r) for r in range(c.get('replicates'))]
        rows = _flatten(run_replicates(fragmentation_job, jobs, self.workers))
        return 'csv', (['replicate', 'rank', 'mass'], rows)

    def density(self) -> Tuple[str, Dict]:
        c = self.config
        spec = c.get_spec()
        evaluator = DensityEvaluator(spec, c.get('mc'), c.get('normalizer_mc'), self.seed)
        what, t, xs = c.get('what'), float(c.get('t')), [float(x) for x in c.get('x')]
        if not xs:
            raise ConfigError("density needs at least one --x value")
        if what == 'g':
            estimate = evaluator.g(t, xs[0])
        elif what == 'h':
            estimate = evaluator.h(t, xs[0])
        elif what == 'H':
            estimate = evaluator.H_product(t, MassPartition(xs))
        elif what == 'hn':
            estimate = evaluator.h_n(t, xs)
        elif what == 'marginal':
            estimate = evaluator.size_biased_marginal_density(t, xs[0])
        elif what == 'joint':
            estimate = evaluator.size_biased_joint_density(t, xs)
        else:
            estimate = evaluator.weighted_tail_probability(t, xs[0])
        report = estimate.to_dict()
        report.update({'what': what, 't': t, 'x': xs, 'spec': spec.to_dict()})
        return 'json', report

    def verify_martingale(self) -> Tuple[str, Dict]:
        c = self.config
        spec = c.get_spec()
        functional_name = c.get('functional')
        functional = FUNCTIONALS[functional_name]
        rows = []
        for t in c.get('t_list'):
            result = importance_expectation(functional, spec, float(t), c.get('grid_n'), c.get('replicates'),
                                            c.get('mc'), self.seed, self.workers, c.get('normalizer_mc'))
            row = {'t': float(t)}
            row.update(result.to_dict())
            if functional_name == 'one':
                row['passed'] = result.estimate.within(1.0, 4.0)
            rows.append(row)
        agree = all(abs(a['value'] - b['value']) <= 4.0 * math.hypot(a['stderr'], b['stderr'])
                    for a, b in zip(rows, rows[1:]))
        report = {'spec': spec.to_dict(), 'functional': functional_name, 'estimates': rows,
                  'flat_in_t': agree}
        if functional_name == 'one':
            report['passed'] = agree and all(row['passed'] for row in rows)
        return 'json', report

    def verify_marginal(self) -> Tuple[str, Dict]:
        c = self.config
        report = marginal_density_test(float(c.get('t')), c.get('grid_n'), c.get('replicates'), self.seed,
                                       c.get('bins'), self.workers)
        report['passed'] = report['p_value'] > P_VALUE_FLOOR
        return 'json', report

    def verify_pde(self) -> Tuple[str, Dict]:
        c = self.config
        spec = c.get_spec()
        t, tol = float(c.get('t')), float(c.get('tol'))
        rows = []
        for x in c.get('x_list'):
            rng = substream(self.seed, 'verify-pde', t, float(x))
            result = residual_report(t, float(x), spec, c.get('mc'), tol, rng)
            row = result.to_dict()
            row['passed'] = result.passes(4.0, tol)
            rows.append(row)
        return 'json', {'spec': spec.to_dict(), 'tol': tol, 'residuals': rows,
                        'exploratory': any(row['exploratory'] for row in rows),
                        'passed': all(row['passed'] for row in rows)}

    def classify_spec(self) -> Tuple[str, Dict]:
        c = self.config
        spec = c.get_spec()
        delta, x_max, tol = float(c.get('delta')), float(c.get('x_max')), float(c.get('classify_tol'))
        verdict = classify_equivalence(spec, delta, x_max, tol)
        probes = [10.0 ** k for k in range(0, int(math.log10(x_max)) + 1)]
        return 'json', {
            'spec': spec.to_dict(), 'delta': delta, 'x_max': x_max, 'tol': tol,
            'verdict': verdict.value, 'mean_rate': mean_rate(spec), 'levy_mass': levy_mass(spec),
            'laplace_exponent': [{'x': x, 'phi': laplace_exponent(spec, x),
                                  'scaled': laplace_exponent(spec, x) * x ** (delta - 1.0),
                                  'x_times_tail': x * integrated_tail(spec, 1.0 / x)} for x in probes],
        }

    def verify_limits(self) -> Tuple[str, Dict]:
        c = self.config
        checker = SanityChecker(self.seed, self.workers)
        return 'json', checker.limits_check(c.get_spec(), float(c.get('t')), c.get('mc'))

    def verify_duality(self) -> Tuple[str, Dict]:
        c = self.config
        checker = SanityChecker(self.seed, self.workers)
        return 'json', checker.duality_check(c.get('n'), float(c.get('t')), c.get('grid_n'),
                                             c.get('replicates'), c.get('duality_bins'))

    def verify_asymptotic(self) -> Tuple[str, Dict]:
        c = self.config
        checker = SanityChecker(self.seed, self.workers)
        return 'json', checker.small_fragment_check(float(c.get('t')), c.get('grid_n'), c.get('replicates'),
                                                    c.get('ranks'))

    def handlers(self) -> Dict[str, Callable[[], Tuple[str, Any]]]:
        return {
            'simulate-coalescent': self.simulate_coalescent,
            'simulate-fragmentation': self.simulate_fragmentation,
            'density': self.density,
            'verify-martingale': self.verify_martingale,
            'verify-marginal': self.verify_marginal,
            'verify-pde': self.verify_pde,
            'classify-spec': self.classify_spec,
            'verify-limits': self.verify_limits,
            'verify-duality': self.verify_duality,
            'verify-asymptotic': self.verify_asymptotic,
        }

    def execute(self) -> int:
        started = time.perf_counter()
        self.logger.separator()
        self.logger.info(f"CoalescentLab {self.command} (seed {self.seed}, workers {self.workers})")
        self.logger.separator()
        kind, payload = self.handlers()[self.command]()
        if kind == 'json':
            payload['config'] = {key: value for key, value in self.config.to_dict().items()
                                 if key not in REPORT_EXCLUDED}
        output = self.config.get('output')
        if output is None:
            sys.stdout.write(format_json(payload) if kind == 'json' else format_csv(*payload))
            sys.stdout.flush()
        else:
            manifest = ManifestWriter(self.command, self.config.to_dict())
            if kind == 'json':
                manifest.add(write_json(Path(output), payload))
            else:
                manifest.add(write_csv(Path(output), *payload))
            markdown = self.config.get('markdown')
            if markdown and kind == 'json':
                path = Path(markdown)
                MarkdownGenerator().generate_report(self.command, payload, path)
                manifest.add(path)
            manifest_path = manifest.write(Path(output), time.perf_counter() - started)
            self.logger.info(f"wrote {output} and {manifest_path}")
        if kind == 'json' and payload.get('passed') is False:
            self.logger.warning(f"{self.command}: check did not pass")
        return EXIT_OK


def run(config: ExperimentConfig) -> int:
    """Validate and execute a configuration; returns the exit status."""
    config.validate()
    if config.get('functional') not in FUNCTIONALS:
        raise ConfigError(f"functional must be one of {', '.join(sorted(FUNCTIONALS))}")
    return Experiment(config).execute()


def _csv_floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}")


def _csv_ints(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='JSON configuration file (flags override it)')
    common.add_argument('--seed', type=int, help='master seed (mandatory)')
    common.add_argument('-o', '--output', help='artifact path; a manifest is written beside it')
    common.add_argument('--workers', type=int, help='worker processes (default: 1)')
    common.add_argument('--markdown', help='markdown summary path (verify commands)')
    common.add_argument('--save-config', help='write the merged configuration to this JSON file')
    common.add_argument('--log-file', help='also log to this file')
    common.add_argument('--verbose', action='store_true', help='debug logging')
    common.add_argument('--debug', action='store_true', help='print tracebacks on error')

    parser = argparse.ArgumentParser(
        prog='coalescent-lab',
        description='CoalescentLab - additive coalescents, Brownian fragmentations and changes of measure',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
    coalescent-lab simulate-coalescent --n 100 --t 2 --replicates 10 --seed 1
    coalescent-lab simulate-fragmentation --t 1 --grid 65536 --replicates 5 --seed 1
    coalescent-lab density --what g --spec spec.json --t 1 --x 0.5 --mc 100000 --seed 1
    coalescent-lab verify-martingale --spec spec.json --t-list 0.5,1 --seed 1 -o mart.json
        """
    )
    sub = parser.add_subparsers(dest='command', metavar='command')
    sub.required = True

    def command(name: str, help_text: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, parents=[common], help=help_text)

    def spec_flag(p: argparse.ArgumentParser):
        p.add_argument('--spec', help='subordinator spec: inline JSON object or path to a JSON file')

    p = command('simulate-coalescent', 'run the finite additive coalescent')
    p.add_argument('--n', type=int)
    p.add_argument('--t', type=float)
    p.add_argument('--replicates', type=int)

    p = command('simulate-fragmentation', 'fragmentation of a Vervaat excursion')
    p.add_argument('--t', type=float)
    p.add_argument('--grid', dest='grid_n', type=int)
    p.add_argument('--replicates', type=int)
    p.add_argument('--theta', type=_csv_floats, help='jump sizes of the exchangeable bridge')
    p.add_argument('--literal-sigma', action='store_const', const=True, default=None,
                   help='sigma = 1 - sum(theta^2) instead of sigma^2')

    p = command('density', 'evaluate one density quantity')
    spec_flag(p)
    p.add_argument('--what', choices=DENSITY_QUANTITIES)
    p.add_argument('--t', type=float)
    p.add_argument('--x', type=_csv_floats)
    p.add_argument('--mc', type=int)
    p.add_argument('--normalizer-mc', type=int)

    p = command('verify-martingale', 'unit expectation of the density under the Brownian law')
    spec_flag(p)
    p.add_argument('--t-list', type=_csv_floats)
    p.add_argument('--grid', dest='grid_n', type=int)
    p.add_argument('--replicates', type=int)
    p.add_argument('--mc', type=int)
    p.add_argument('--normalizer-mc', type=int)
    p.add_argument('--functional', choices=sorted(FUNCTIONALS))

    p = command('verify-marginal', 'chi-square test of the size-biased fragment law')
    p.add_argument('--t', type=float)
    p.add_argument('--grid', dest='grid_n', type=int)
    p.add_argument('--replicates', type=int)
    p.add_argument('--bins', type=int)

    p = command('verify-pde', 'residual of the equation for g')
    spec_flag(p)
    p.add_argument('--t', type=float)
    p.add_argument('--x-list', type=_csv_floats)
    p.add_argument('--mc', type=int)
    p.add_argument('--tol', type=float)

    p = command('classify-spec', 'numerical check of the equivalence condition')
    spec_flag(p)
    p.add_argument('--delta', type=float)
    p.add_argument('--x-max', type=float)
    p.add_argument('--tol', dest='classify_tol', type=float)

    p = command('verify-limits', 'small-fragment bound, ratio limit and density bound')
    spec_flag(p)
    p.add_argument('--t', type=float)
    p.add_argument('--mc', type=int)

    p = command('verify-duality', 'shifted coalescent against the Brownian fragmentation')
    p.add_argument('--n', type=int)
    p.add_argument('--t', type=float)
    p.add_argument('--grid', dest='grid_n', type=int)
    p.add_argument('--replicates', type=int)
    p.add_argument('--bins', dest='duality_bins', type=int)

    p = command('verify-asymptotic', 'n^2 times the n-th largest fragment')
    p.add_argument('--t', type=float)
    p.add_argument('--grid', dest='grid_n', type=int)
    p.add_argument('--replicates', type=int)
    p.add_argument('--ranks', type=_csv_ints, help='rank window low,high')
    return parser


# knobs that do not change results stay out of reports
REPORT_EXCLUDED = ('workers', 'output', 'markdown')
RUNTIME_ONLY = ('config', 'save_config', 'log_file', 'verbose', 'debug')


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig(args.config)
    overrides = {key: value for key, value in vars(args).items() if key not in RUNTIME_ONLY}
    config.update(overrides)
    return config


def _report_error(error: BaseException, command: Optional[str]):
    line = {'error': type(error).__name__, 'message': str(error), 'command': command}
    sys.stderr.write(json.dumps(line, sort_keys=True) + '\n')


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run, and map failures to exit codes."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logger = get_logger()
    if args.log_file:
        logger = Logger(args.log_file)
    logger.set_level(logging.DEBUG if args.verbose else logging.INFO)
    try:
        config = config_from_args(args)
        if args.save_config:
            config.save(Path(args.save_config))
            logger.info(f"configuration saved to {args.save_config}")
        return run(config)
    except KeyboardInterrupt:
        logger.error("cancelled by user")
        return EXIT_INTERRUPTED
    except Exception as e:
        _report_error(e, args.command)
        if args.debug:
            traceback.print_exc()
        return EXIT_ERROR


if __name__ == '__main__':
    sys.exit(main())
