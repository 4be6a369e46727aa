"""Monte Carlo and sweep studies of a built aperture.

Every study re-evaluates the fixed design; nothing is re-optimized.
Ring-size errors are independent and uniform in ``[-eps, +eps]``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import metrics
from .element import ElementLayout
from .layout import predicted_theta_for_transverse_offset
from .scenario import Design

KINDS = ("manufacture", "feed_transverse", "feed_down")
TABLE4_FRACTIONS = (1 / 200, 1 / 100, 1 / 50, 1 / 20)
FEED_OFFSETS = (-5, -2, 0, 2, 5)


@dataclass(frozen=True)
class ToleranceScenario:
    """One sweep of a built design.

    ``magnitude`` is the ring-size error bound for ``manufacture`` and the
    unit of feed displacement for the feed sweeps [m]. Feed sweeps move
    the feed by ``m * magnitude`` for each signed multiple ``m`` in
    ``offsets``.
    """

    kind: str
    magnitude: float
    trials: int = 10
    rng_seed: int = 0
    offsets: tuple[float, ...] = FEED_OFFSETS
    base: Design | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.magnitude >= 0:
            raise ValueError("magnitude must be non-negative")
        object.__setattr__(self, "offsets", tuple(float(m) for m in self.offsets))

    def displacements(self) -> list[float]:
        return [m * self.magnitude for m in self.offsets]


@dataclass(frozen=True)
class SweepResult:
    """Reports in trial order (manufacture) or offset order (feed sweeps)."""

    scenario: ToleranceScenario
    reports: tuple[metrics.QuietZoneReport, ...]
    offsets: tuple[float, ...] | None = None
    predicted_theta: tuple[float, ...] | None = None

    def _values(self, name):
        return np.array([getattr(r, name) for r in self.reports])

    @property
    def amp_mean(self) -> float:
        return float(self._values("amp_ripple_db").mean())

    @property
    def amp_min(self) -> float:
        return float(self._values("amp_ripple_db").min())

    @property
    def amp_max(self) -> float:
        return float(self._values("amp_ripple_db").max())

    @property
    def phase_mean(self) -> float:
        return float(self._values("phase_ripple_deg").mean())

    @property
    def phase_min(self) -> float:
        return float(self._values("phase_ripple_deg").min())

    @property
    def phase_max(self) -> float:
        return float(self._values("phase_ripple_deg").max())

    @property
    def theta_mean(self) -> float:
        return float(self._values("theta_est_deg").mean())

    @property
    def thetas(self) -> np.ndarray:
        return self._values("theta_est_deg")


def perturb_lengths(elements: ElementLayout, eps_mm: float, seed) -> ElementLayout:
    """Add independent uniform errors in ``[-eps_mm, eps_mm]``, clamped to the valid range."""
    if eps_mm < 0:
        raise ValueError("eps_mm must be non-negative")
    if eps_mm == 0:
        return elements
    rng = np.random.default_rng(seed)
    lo, hi = elements.lr_range
    lr = np.clip(elements.lr + rng.uniform(-eps_mm, eps_mm, elements.lr.shape), lo, hi)
    return ElementLayout(lr, elements.lr_range)


def _map(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _base(scenario: ToleranceScenario) -> Design:
    if scenario.base is None:
        raise ValueError("scenario has no base design")
    return scenario.base


def run_manufacture_sweep(scenario: ToleranceScenario, workers: int | None = None) -> SweepResult:
    """Evaluate ``scenario.trials`` realisations of ring-size errors.

    Trial ``i`` draws from child ``i`` of ``SeedSequence(rng_seed)``, so
    results do not depend on execution order.
    """
    if scenario.kind != "manufacture":
        raise ValueError("not a manufacture scenario")
    design = _base(scenario)
    eps_mm = scenario.magnitude * 1e3
    seeds = np.random.SeedSequence(scenario.rng_seed).spawn(scenario.trials)

    def trial(i):
        perturbed = perturb_lengths(design.elements, eps_mm, seeds[i])
        return design.evaluate(elements=perturbed, label=f"eps={scenario.magnitude:.9g} m trial={i}")

    return SweepResult(scenario, tuple(_map(trial, range(scenario.trials), workers)))


def run_feed_offset_sweep(scenario: ToleranceScenario, workers: int | None = None) -> SweepResult:
    """Move the feed by each signed displacement and evaluate once per offset.

    ``feed_transverse`` increases the feed offset (the feed moves towards
    -x) and centres the window on the predicted outgoing angle;
    ``feed_down`` raises the feed along z and keeps the nominal window.
    """
    if scenario.kind not in ("feed_transverse", "feed_down"):
        raise ValueError(f"not a feed sweep: {scenario.kind!r}")
    design = _base(scenario)
    layout = design.layout
    transverse = scenario.kind == "feed_transverse"

    def one(delta):
        if transverse:
            predicted = predicted_theta_for_transverse_offset(layout, delta)
            h = layout.propagation_distance
            window = ((-h * math.tan(math.radians(predicted)), 0.0), (layout.quiet_zone_side,) * 2)
            feed = design.feed.moved(dx=-delta)
        else:
            predicted, window = None, None
            feed = design.feed.moved(dz=delta)
        return design.evaluate(feed=feed, window=window, label=f"{scenario.kind} {delta:+.9g} m"), predicted

    deltas = scenario.displacements()
    out = _map(one, deltas, workers)
    predicted = tuple(p for _, p in out) if transverse else None
    return SweepResult(scenario, tuple(r for r, _ in out), tuple(deltas), predicted)


def manufacture_table(design: Design, fractions=TABLE4_FRACTIONS, trials: int = 10,
                      seed: int = 0, workers: int | None = None) -> list[SweepResult]:
    """One manufacture sweep per error bound ``fraction * wavelength``."""
    lam = design.layout.wavelength
    return [run_manufacture_sweep(ToleranceScenario("manufacture", fr * lam, trials, seed, base=design), workers)
            for fr in fractions]


def phase_error_bound(design: Design, perturbed: ElementLayout) -> float:
    """Largest element phase change the sensitivity limit allows for ``perturbed`` [deg]."""
    return float(np.max(np.abs(perturbed.lr - design.elements.lr))) * design.model.max_sensitivity()


def sweep_rows(results) -> list[dict]:
    """Flatten sweep results into one dict per trial or offset."""
    rows = []
    for res in results:
        sc = res.scenario
        for i, r in enumerate(res.reports):
            rows.append({
                "kind": sc.kind,
                "magnitude_m": sc.magnitude,
                "offset_m": res.offsets[i] if res.offsets else 0.0,
                "trial": 0 if res.offsets else i,
                "seed": sc.rng_seed,
                "predicted_theta_deg": res.predicted_theta[i] if res.predicted_theta else float("nan"),
                "amp_ripple_db": r.amp_ripple_db,
                "phase_ripple_deg": r.phase_ripple_deg,
                "theta_est_deg": r.theta_est_deg,
                "meets_spec": r.meets_spec,
            })
    return rows
