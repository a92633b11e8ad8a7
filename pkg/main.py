import logging
import os
from typing import Any, Dict, List

import numpy as np

from config import RunConfig
from exceptions import (
    ConstructionError,
    CriticalValue,
    CurveFamilyError,
    PolylineNotClosed,
    UnbalancedSubset,
)
from familygen import (
    FamilyPair,
    arclength_map,
    bridge_integrals,
    build_pair,
    circle_curve,
    ellipse_curve,
    load_coefficients,
    make_gapped_curve,
    save_coefficients,
)
from figure_renderer import FigureRenderer, Frame
from fungrid import save_csv
from polyline import (
    build_discrete_family,
    deformed_polyline,
    discrete_angles_from_polyline,
    discrete_closure_defect,
    discrete_conditions,
    discrete_family_scan,
    find_balanced_subsets,
    load_discrete_input,
    no_balanced_polyline,
    save_polyline,
    save_vector,
)
from smoothcurve import (
    BoundaryBranch,
    boundary_check,
    curve_from_angle,
    family_scan,
    level_set_scan,
    moment_profile,
    sample_regular_levels,
    turning_angle,
)

logger = logging.getLogger(__name__)

# failures of a requested check, as opposed to bad input
CHECK_FAILURES = (ConstructionError, PolylineNotClosed, UnbalancedSubset)


def _failure(e: Exception) -> Dict[str, Any]:
    result = {'success': False, 'error': str(e), 'check_failed': isinstance(e, CHECK_FAILURES)}
    if isinstance(e, ConstructionError):
        result['defect_profile'] = e.defect_profile()
    return result


class CurveFamilyProcessor:
    """Runs construct / verify / scan / discrete / render on a validated RunConfig"""

    def __init__(self, config: RunConfig):
        self.config = config
        self.config.validate()
        self.renderer = FigureRenderer(config.STROKE_WIDTH, config.COLUMNS)

    def run(self) -> Dict[str, Any]:
        handler = getattr(self, self.config.COMMAND)
        try:
            return handler()
        except (CurveFamilyError, OSError) as e:
            logger.debug("%s failed", self.config.COMMAND, exc_info=True)
            return _failure(e)

    def _out(self, name: str) -> str:
        os.makedirs(self.config.OUTPUT_PATH, exist_ok=True)
        return os.path.join(self.config.OUTPUT_PATH, name)

    def _source_curve(self):
        cfg = self.config
        if cfg.CURVE_PATH == "circle":
            return circle_curve(gap_modulus=cfg.GAP_MODULUS)
        if cfg.CURVE_PATH == "ellipse":
            return ellipse_curve(gap_modulus=cfg.GAP_MODULUS)
        if cfg.CURVE_PATH:
            return load_coefficients(cfg.CURVE_PATH)
        if cfg.DEGREE == 1:
            # every regular degree-1 curve is an ellipse; use the circle
            return circle_curve(gap_modulus=cfg.GAP_MODULUS)
        return make_gapped_curve(cfg.DEGREE, cfg.GAP_MODULUS, seed=cfg.SEED)

    def construct(self) -> Dict[str, Any]:
        """Build a gapped curve, derive (k, f), verify it and write the pair file."""
        cfg = self.config
        generator = cfg.generator()
        curve = self._source_curve()
        arc_map = arclength_map(curve, cfg.GRID)
        provenance = {'seed': str(cfg.SEED)} if cfg.SEED is not None else {}
        pair = build_pair(curve, arc_map, cfg.HARMONIC, generator, tolerance=cfg.TOL,
                          lambdas=cfg.lambda_values(), provenance=provenance)

        theta, phi = turning_angle(pair.k), turning_angle(pair.f)
        moments = moment_profile(theta, phi, cfg.MAX_MOMENT, normalized=True)
        bridge = bridge_integrals(curve, arc_map)

        pair_path, curve_path = self._out('pair.txt'), self._out('curve.txt')
        pair.save(pair_path)
        save_coefficients(curve, curve_path)
        save_csv(pair.k, self._out('k.csv'))
        save_csv(pair.f, self._out('f.csv'))
        return {
            'success': True,
            'pair_path': pair_path,
            'curve_path': curve_path,
            'length': arc_map.total_length,
            'max_defect': float(pair.provenance['max_defect']),
            'max_moment': max(abs(m) for m in moments),
            'max_bridge': max(bridge),
            'provenance': pair.provenance,
        }

    def _load_pair(self) -> FamilyPair:
        if not self.config.INPUT_PATH:
            raise CurveFamilyError("a pair file is required")
        return FamilyPair.load(self.config.INPUT_PATH)

    def scan(self) -> Dict[str, Any]:
        cfg = self.config
        pair = self._load_pair()
        report = family_scan(pair.k, pair.f, cfg.lambda_values(), cfg.TOL, cfg.WORKERS)
        path = self._out('scan.csv')
        report.to_csv(path)
        return {'success': report.passed, 'scan_path': path, 'max_defect': report.max_defect,
                'checks': [self._check('closure scan', report.passed, f"max defect {report.max_defect:.3e}")]}

    @staticmethod
    def _check(name: str, passed: bool, detail: str, skipped: bool = False) -> Dict[str, Any]:
        return {'name': name, 'passed': passed, 'detail': detail, 'skipped': skipped}

    def verify(self) -> Dict[str, Any]:
        """Closure scan, moment battery, level-set sums and boundary relations for one pair."""
        cfg = self.config
        pair = self._load_pair()
        theta, phi = turning_angle(pair.k), turning_angle(pair.f)
        checks: List[Dict[str, Any]] = []

        scan = family_scan(pair.k, pair.f, cfg.lambda_values(), cfg.TOL, cfg.WORKERS)
        scan.to_csv(self._out('scan.csv'))
        checks.append(self._check('closure scan', scan.passed, f"max defect {scan.max_defect:.3e}"))

        moments = moment_profile(theta, phi, cfg.MAX_MOMENT, normalized=True)
        with open(self._out('moments.csv'), 'w') as handle:
            handle.write('n,moment_re,moment_im,normalized_abs\n')
            scale = phi.sup_norm()
            for n, m in enumerate(moments):
                raw = m * scale ** n if n else m
                handle.write(f"{n},{raw.real:.17g},{raw.imag:.17g},{abs(m):.17g}\n")
        worst = max(abs(m) for m in moments)
        checks.append(self._check('moments', worst <= cfg.MOMENT_TOL, f"max |moment| {worst:.3e} (n ≤ {cfg.MAX_MOMENT})"))

        entries = level_set_scan(theta, phi, sample_regular_levels(phi))
        level_worst = 0.0
        with open(self._out('levels.csv'), 'w') as handle:
            handle.write('level,roots,weighted_sum_re,weighted_sum_im,abs,skipped\n')
            for index, entry in enumerate(entries):
                if entry.report is None:
                    handle.write(f"{entry.level:.17g},,,,,{entry.skipped}\n")
                    continue
                ws = entry.report.weighted_sum
                level_worst = max(level_worst, abs(ws))
                handle.write(f"{entry.level:.17g},{len(entry.report.roots)},{ws.real:.17g},{ws.imag:.17g},{abs(ws):.17g},\n")
                entry.report.to_csv(self._out(f'level_{index:02d}.csv'))
        checks.append(self._check('level sets', level_worst <= cfg.LEVEL_TOL,
                                  f"max |weighted sum| {level_worst:.3e} over {len(entries)} levels"))

        try:
            boundary = boundary_check(theta, phi, cfg.BOUNDARY_ORDER, cfg.BOUNDARY_TOL)
            checks.append(self._check('boundary', boundary.branch is not BoundaryBranch.VIOLATION,
                                      f"branch {boundary.branch.value}"))
        except CriticalValue as e:
            checks.append(self._check('boundary', True, str(e), skipped=True))

        return {'success': all(c['passed'] for c in checks), 'checks': checks,
                'max_defect': scan.max_defect, 'max_moment': worst, 'output_dir': cfg.OUTPUT_PATH}

    def _discrete_source(self):
        cfg = self.config
        if cfg.NO_BALANCED is not None:
            polyline = no_balanced_polyline(cfg.NO_BALANCED, cfg.EVEN_TAIL)
            save_polyline(polyline, self._out('polyline.txt'))
            return polyline, discrete_angles_from_polyline(polyline)
        if not cfg.INPUT_PATH:
            raise CurveFamilyError("a polyline or curvature file (or --no-balanced) is required")
        return load_discrete_input(cfg.INPUT_PATH)

    def _discrete_family(self, angles, balance):
        cfg = self.config
        subset = cfg.SUBSET or (list(balance.subsets[0]) if balance and balance.subsets else [])
        if not subset:
            raise UnbalancedSubset("no balanced subset available for a deformation family")
        return subset, build_discrete_family(angles, subset, cfg.AMPLITUDE, cfg.BALANCE_TOL, cfg.lambda_values())

    def discrete(self) -> Dict[str, Any]:
        cfg = self.config
        polyline, angles = self._discrete_source()
        defect = discrete_closure_defect(polyline)
        balance = find_balanced_subsets(angles, cfg.BALANCE_TOL, cfg.SUBSET_CAP, cfg.WORKERS)
        balance_path = self._out('balance.json')
        balance.to_json(balance_path)
        checks = []
        result: Dict[str, Any] = {'closure_defect': defect, 'balance_path': balance_path,
                                  'balanced_subsets': [list(s) for s in balance.subsets]}
        if cfg.NO_BALANCED is not None:
            checks.append(self._check('closed', defect <= 1e-12, f"closure defect {defect:.3e}"))
            checks.append(self._check('no balanced subset', balance.empty,
                                      f"{len(balance.subsets)} balanced subset(s)"))
        if cfg.FAMILY:
            subset, phi = self._discrete_family(angles, balance)
            report = discrete_family_scan(angles, phi, cfg.lambda_values(), tolerance=1e-12)
            report.to_csv(self._out('discrete_scan.csv'))
            save_vector(phi.f, self._out('f.txt'))
            conditions = discrete_conditions(angles, phi)
            result.update({'subset': subset, 'max_defect': report.max_defect,
                           'moment_max': conditions.moment_max, 'level_max': conditions.level_max})
            checks.append(self._check('family closed', report.passed, f"max defect {report.max_defect:.3e}"))
        result.update({'success': all(c['passed'] for c in checks), 'checks': checks})
        return result

    def _is_pair_file(self) -> bool:
        with open(self.config.INPUT_PATH) as handle:
            return any(line.startswith('grid=') for line in handle)

    def render(self) -> Dict[str, Any]:
        cfg = self.config
        lambdas = cfg.lambda_values()
        if cfg.NO_BALANCED is None and cfg.INPUT_PATH and self._is_pair_file():
            frames = self._pair_frames(lambdas)
        else:
            frames = self._polyline_frames(lambdas)
        if cfg.MONTAGE:
            paths = [self.renderer.render_montage(frames, self._out('montage.svg'))]
        else:
            paths = self.renderer.render_frames(frames, cfg.OUTPUT_PATH)
        return {'success': True, 'paths': paths, 'frames': len(frames)}

    def _pair_frames(self, lambdas) -> List[Frame]:
        cfg = self.config
        pair = self._load_pair()
        if not cfg.FORCE:
            report = family_scan(pair.k, pair.f, lambdas, cfg.TOL, cfg.WORKERS)
            if not report.passed:
                raise ConstructionError(
                    f"pair is not closed on the requested λ values (max defect {report.max_defect:.3e}); "
                    "use --force to render anyway", report.lambda_values, report.defects)
        theta, phi = turning_angle(pair.k), turning_angle(pair.f)
        frames = []
        for lam in lambdas:
            curve = curve_from_angle(theta.with_values(theta.values + lam * phi.values))
            frames.append(Frame(label=f"λ = {lam:.2f}", points=curve.points))
        return frames

    def _polyline_frames(self, lambdas) -> List[Frame]:
        cfg = self.config
        _, angles = self._discrete_source()
        phi, dashed = None, ()
        if cfg.FAMILY or cfg.SUBSET:
            balance = None if cfg.SUBSET else find_balanced_subsets(angles, cfg.BALANCE_TOL, cfg.SUBSET_CAP)
            subset, phi = self._discrete_family(angles, balance)
            # interior vertex j starts edge j - 1 (0-based)
            dashed = tuple(j - 1 for j in subset)
        else:
            lambdas = lambdas[:1]
        frames = []
        for lam in lambdas:
            points = deformed_polyline(angles, phi, lam).vertices
            frames.append(Frame(label=f"λ = {lam:.2f}", points=np.asarray(points), dashed_edges=dashed,
                                show_vertices=True))
        return frames
