"""
Nagios Plugin Integration for the ablation claims.

This module reads an ablation report and turns each ordering claim into a Nagios
metric whose value is the state code the claim earns: 0 when it holds, otherwise the
claim's severity (1 for the report-gated soft-vs-hard claim, 2 for everything else).

Claims, all at one ratio (default "1:5:10"):
    wins            p+b+i beats p in at least `min_wins` paired seeds (mIU)
    margin          mean mIU(p+b+i) - mean mIU(p) >= `min_margin`
    box_helps       mean mIU(p+b) >= mean mIU(p)
    pixel_box       mean mIU(p+b+i) >= mean mIU(p+i)
    thresholds      the all-three column of the threshold study >= each single column
    soft_vs_hard    mean mIU of the ucm strategy >= hardseg (warning only)

Exceptions:
    AblationReportError: Raised when the report lacks a cell or section a claim needs,
        or contains failed sub-runs.
    InvalidNagiosStateError: Raised when a claim carries an unknown severity.

Example Usage:
    claims = evaluate_claims(report)
    resource = AblationClaimsResource(claims)
    metrics = resource.probe()
"""

from dataclasses import dataclass
from enum import Enum
import logging
import nagiosplugin
from src.lib.exceptions import AblationReportError, InvalidNagiosStateError

DEFAULT_MIN_MARGIN = 0.02
DEFAULT_MIN_WINS = 4
DEFAULT_RATIO = "1:5:10"
THRESHOLD_SINGLES = ("1/4", "1/2", "3/4")


class NagiosState(Enum):
    """
    Enum mapping state names to the nagiosplugin states.
    """

    OK = nagiosplugin.Ok
    WARNING = nagiosplugin.Warn
    CRITICAL = nagiosplugin.Critical
    UNKNOWN = nagiosplugin.Unknown


@dataclass(frozen=True)
class Claim:
    """
    Attributes:
        name (str): Metric name.
        holds (bool): Whether the report supports the claim.
        severity (str): State name used when the claim fails.
        detail (str): Numbers behind the verdict.
    """
    name: str
    holds: bool
    severity: str
    detail: str

    @property
    def state(self):
        """
        Raises:
            InvalidNagiosStateError: If the severity is not a Nagios state name.
        """
        try:
            return NagiosState.OK if self.holds else NagiosState[self.severity.upper()]
        except KeyError as e:
            raise InvalidNagiosStateError(self.severity) from e


def find_cell(cells, ratio, variant, strategy="ucm"):
    for cell in cells:
        if cell["ratio"] == ratio and cell["variant"] == variant and cell["strategy"] == strategy:
            if cell["mean"] is None:
                raise AblationReportError(f"Cell {ratio} {variant} {strategy} has no successful run")
            return cell
    raise AblationReportError(f"Report has no cell {ratio} {variant} {strategy}")


def seed_mious(cell):
    return {run["seed"]: run["metrics"]["mIU"] for run in cell["runs"] if run["metrics"] is not None}


def evaluate_claims(report, ratio=DEFAULT_RATIO, min_margin=DEFAULT_MIN_MARGIN, min_wins=DEFAULT_MIN_WINS):
    """
    Evaluates every claim against an ablation report.

    Returns:
        list[Claim]: One claim per metric, in the order of the module docstring.

    Raises:
        AblationReportError: If the report has failed sub-runs or lacks a needed cell.
    """
    try:
        failures, grid = report["failures"], report["grid"]
        strategy_grid, study = report["strategy_grid"], report["threshold_study"]
    except (KeyError, TypeError) as e:
        raise AblationReportError(f"Ablation report lacks section {e}") from e
    if failures:
        raise AblationReportError(f"Ablation report has {len(failures)} failed sub-runs")

    p, pi = find_cell(grid, ratio, "p"), find_cell(grid, ratio, "p+i")
    pb, pbi = find_cell(grid, ratio, "p+b"), find_cell(grid, ratio, "p+b+i")
    base, full = seed_mious(p), seed_mious(pbi)
    wins = sum(full[s] > base[s] for s in sorted(set(base) & set(full)))
    margin = pbi["mean"]["mIU"] - p["mean"]["mIU"]
    claims = [
        Claim("wins", wins >= min_wins, "critical", f"p+b+i beats p in {wins} seeds, need {min_wins}"),
        Claim("margin", margin >= min_margin, "critical", f"mIU margin {margin:.4f}, need {min_margin}"),
        Claim("box_helps", pb["mean"]["mIU"] >= p["mean"]["mIU"], "critical",
              f"mIU p+b {pb['mean']['mIU']:.4f} vs p {p['mean']['mIU']:.4f}"),
        Claim("pixel_box", pbi["mean"]["mIU"] >= pi["mean"]["mIU"], "critical",
              f"mIU p+b+i {pbi['mean']['mIU']:.4f} vs p+i {pi['mean']['mIU']:.4f}"),
    ]

    if study.get("all") is None or any(study.get(k) is None for k in THRESHOLD_SINGLES):
        raise AblationReportError("Threshold study has no objects")
    best_single = max(study[k] for k in THRESHOLD_SINGLES)
    claims.append(Claim("thresholds", study["all"] >= best_single, "critical",
                        f"all-three IoU {study['all']:.4f} vs best single {best_single:.4f}"))

    soft_ratio = report["config"].get("strategy_ratio", ratio)
    soft = find_cell(strategy_grid, soft_ratio, "p+b+i", "ucm")["mean"]["mIU"]
    hard = find_cell(strategy_grid, soft_ratio, "p+b+i", "hardseg")["mean"]["mIU"]
    claims.append(Claim("soft_vs_hard", soft >= hard, "warning", f"mIU ucm {soft:.4f} vs hardseg {hard:.4f}"))
    return claims


class AblationClaimsResource(nagiosplugin.Resource):
    """
    A resource for Nagios plugin that reports one metric per ablation claim.

    Attributes:
        context (str): The context for the Nagios plugin, defaults to 'ablation_claim'.
        claims (list[Claim]): Evaluated claims.
        log (logging.Logger): Logger instance for debugging and error logging.
    """

    def __init__(self, claims, context="ablation_claim"):
        super().__init__()
        self.context = context
        self.claims = claims
        self.log = logging.getLogger(__name__)
        self.log.debug("Initializing AblationClaimsResource with %d claims", len(claims))

    def probe(self):
        """
        Returns:
            list: One Nagios metric per claim, valued with the claim's state code.

        Raises:
            InvalidNagiosStateError: If a claim has an unknown severity.
        """
        metrics = []
        for claim in self.claims:
            state = claim.state
            self.log.info("Claim %s: %s (%s)", claim.name, state.name, claim.detail)
            metrics.append(nagiosplugin.Metric(claim.name, state.value.code, context=self.context))
        return metrics


class ReportStateResource(nagiosplugin.Resource):
    """
    A single metric for a report that could not be evaluated at all.
    """

    def __init__(self, status="UNKNOWN", context="ablation_claim"):
        super().__init__()
        self.context = context
        self.status = status
        self.log = logging.getLogger(__name__)

    def probe(self):
        try:
            state = NagiosState[self.status.upper()]
        except KeyError as e:
            self.log.error("Invalid report status received: %s", self.status)
            raise InvalidNagiosStateError(self.status) from e
        return [nagiosplugin.Metric("report", state.value.code, context=self.context)]
