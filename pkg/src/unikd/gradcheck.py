"""Numerical-differentiation oracle for every analytic gradient in the engine.

central_difference_grad is deliberately naive (an O(entries) loop of paired
function evaluations) so it shares no code with the analytic paths it
verifies. The suite at the bottom wires each loss (and the dense-net
backward) to the oracle on seeded random instances; the CLI gradcheck
subcommand and the acceptance tests both run it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import NDArray

from . import losses, models
from .errors import DimensionMismatchError, NonFiniteError

Array = NDArray[np.float64]

DEFAULT_H = 1e-5
DEFAULT_REL_TOL = 1e-5
DEFAULT_ABS_FLOOR = 1e-8
# Sampled points this close to the absolute-difference kink are rejected.
KINK_MARGIN = 1e-3


@dataclass(frozen=True)
class GradCheckReport:
    max_rel_error: float
    max_abs_error: float
    worst_coordinate: tuple[int, ...]
    passed: bool


def central_difference_grad(
    f: Callable[[Array], float], point: object, h: float = DEFAULT_H
) -> Array:
    """Entry-wise (f(x + h*e) - f(x - h*e)) / 2h over a copy of `point`."""
    if h <= 0:
        raise ValueError(f"step h must be > 0, got {h}")
    p = np.array(point, dtype=np.float64)
    out = np.empty_like(p)
    for idx in np.ndindex(p.shape):
        orig = p[idx]
        p[idx] = orig + h
        f_plus = float(f(p))
        p[idx] = orig - h
        f_minus = float(f(p))
        p[idx] = orig
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NonFiniteError(
                f"function non-finite near coordinate {idx}: "
                f"f+={f_plus}, f-={f_minus}"
            )
        out[idx] = (f_plus - f_minus) / (2.0 * h)
    return out


def grad_check(
    analytic: object,
    numeric: object,
    rel_tol: float = DEFAULT_REL_TOL,
    abs_floor: float = DEFAULT_ABS_FLOOR,
) -> GradCheckReport:
    """Compare gradients entry-wise.

    An entry passes when |a - n| <= max(rel_tol * max(|a|, |n|), abs_floor);
    the floor absorbs central-difference roundoff (~1e-9 absolute at step
    1e-6), which no purely relative test can distinguish from error on
    near-zero entries. Clamping the denominator at abs_floor / rel_tol makes
    `max_rel_error <= rel_tol` equivalent to that criterion.
    """
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    if a.shape != n.shape:
        raise DimensionMismatchError(f"analytic shape {a.shape} != numeric shape {n.shape}")
    abs_err = np.abs(a - n)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), abs_floor / rel_tol)
    rel = abs_err / denom
    worst = tuple(int(i) for i in np.unravel_index(int(np.argmax(rel)), rel.shape))
    max_rel = float(rel.max())
    return GradCheckReport(max_rel, float(abs_err.max()), worst, max_rel <= rel_tol)


# ---------------------------------------------------------------------------
# Named suite: one builder per analytic-gradient site. Each builder draws a
# random instance and returns (analytic grad, numeric oracle grad) pairs.
# Builders resolve losses through the module object so a test can monkeypatch
# a loss and watch the suite catch it.

CheckPair = tuple[str, Array, Array]


def _check_raw_l2(rng: np.random.Generator) -> list[CheckPair]:
    t = rng.standard_normal((5, 7))
    s = rng.standard_normal((5, 7))
    out = losses.raw_l2_loss(t, s)
    num = central_difference_grad(lambda p: losses.raw_l2_loss(t, p).value, s)
    return [("raw_l2", out.grad, num)]


def _check_fc(rng: np.random.Generator) -> list[CheckPair]:
    t = rng.standard_normal((5, 7))
    s = rng.standard_normal((5, 7))
    out = losses.fc_loss(t, s)
    num = central_difference_grad(lambda p: losses.fc_loss(t, p).value, s)
    return [("fc", out.grad, num)]


def _check_kl(rng: np.random.Generator) -> list[CheckPair]:
    p = losses.KlParams(temperature=3.0)
    t = 2.0 * rng.standard_normal((4, 10))
    s = 2.0 * rng.standard_normal((4, 10))
    out = losses.kl_soft_logits_loss(t, s, p)
    num = central_difference_grad(
        lambda q: losses.kl_soft_logits_loss(t, q, p).value, s
    )
    return [("kl", out.grad, num)]


def _check_iled(rng: np.random.Generator) -> list[CheckPair]:
    pairs = []
    t = rng.standard_normal((6, 9))
    s = rng.standard_normal((6, 9))
    for variant in losses.ILED_VARIANTS:
        p = losses.IledParams(variant=variant)
        out = losses.iled_loss(t, s, p)
        num = central_difference_grad(lambda q: losses.iled_loss(t, q, p).value, s)
        pairs.append((f"iled_{variant}", out.grad, num))
    return pairs


def _check_rpsd(rng: np.random.Generator) -> list[CheckPair]:
    p = losses.RpsdParams()
    from .geometry import pairwise_cosine_matrix

    while True:
        e_t = rng.standard_normal((4, 16))
        e_s = rng.standard_normal((4, 16))
        f_t = rng.standard_normal((12, 16))
        f_s = rng.standard_normal((12, 16))
        gap = pairwise_cosine_matrix(e_t, f_t) - pairwise_cosine_matrix(e_s, f_s)
        # keep every entry away from the |.| kink so the oracle stays valid
        if np.abs(gap).min() > KINK_MARGIN:
            break
    out = losses.rpsd_loss(e_t, e_s, f_t, f_s, p)
    num = central_difference_grad(
        lambda q: losses.rpsd_loss(e_t, q, f_t, f_s, p).value, e_s
    )
    return [("rpsd", out.grad, num)]


def _check_fr_margin(rng: np.random.Generator) -> list[CheckPair]:
    head = models.FrHeadParams(classes=6, scale=12.0, margin=0.3)
    e = rng.standard_normal((5, 8))
    w = rng.standard_normal((6, 8))
    y = rng.integers(0, 6, size=5)
    out, grad_w = models.fr_margin_loss(e, y, head, w)
    num_e = central_difference_grad(
        lambda q: models.fr_margin_loss(q, y, head, w)[0].value, e
    )
    num_w = central_difference_grad(
        lambda q: models.fr_margin_loss(e, y, head, q)[0].value, w
    )
    return [("fr_margin/embeddings", out.grad, num_e), ("fr_margin/weights", grad_w, num_w)]


def _check_net_backward(rng: np.random.Generator) -> list[CheckPair]:
    activation = "relu" if rng.integers(2) == 0 else "tanh"
    while True:
        spec = models.DenseNetSpec(
            (6, 7, 4), activation=activation, seed=int(rng.integers(1 << 31))
        )
        net = models.init_network(spec)
        x = rng.standard_normal((5, 6))
        out, cache = models.forward(net, x)
        if activation == "tanh":
            break
        # keep relu pre-activations away from their kink for the oracle
        if min(np.abs(z).min() for z in cache.pre_acts[:-1]) > KINK_MARGIN:
            break
    coef = rng.standard_normal((5, 4))

    def scalar_loss(out: Array) -> float:
        return float(np.sum(out * coef) + 0.5 * np.sum(out * out))

    d_out = coef + out
    d_w, d_b, d_x = models.backward(net, cache, d_out)

    pairs: list[CheckPair] = []

    def with_param(kind: str, layer: int, value: Array) -> float:
        saved = net.weights[layer] if kind == "w" else net.biases[layer]
        target = net.weights if kind == "w" else net.biases
        target[layer] = value
        try:
            res, _ = models.forward(net, x)
            return scalar_loss(res)
        finally:
            target[layer] = saved

    for layer in range(net.n_layers):
        num_w = central_difference_grad(
            lambda v, l=layer: with_param("w", l, v), net.weights[layer]
        )
        pairs.append((f"net_backward/w{layer}", d_w[layer], num_w))
        num_b = central_difference_grad(
            lambda v, l=layer: with_param("b", l, v), net.biases[layer]
        )
        pairs.append((f"net_backward/b{layer}", d_b[layer], num_b))
    num_x = central_difference_grad(
        lambda v: scalar_loss(models.forward(net, v)[0]), x
    )
    pairs.append(("net_backward/input", d_x, num_x))
    return pairs


SUITE: dict[str, Callable[[np.random.Generator], list[CheckPair]]] = {
    "raw_l2": _check_raw_l2,
    "fc": _check_fc,
    "kl": _check_kl,
    "iled": _check_iled,
    "rpsd": _check_rpsd,
    "fr_margin": _check_fr_margin,
    "net_backward": _check_net_backward,
}


@dataclass(frozen=True)
class SuiteResult:
    name: str
    seeds: int
    max_rel_error: float
    worst_case: str
    passed: bool


def run_suite(
    seeds: int = 100,
    rel_tol: float = DEFAULT_REL_TOL,
    abs_floor: float = DEFAULT_ABS_FLOOR,
    targets: tuple[str, ...] | None = None,
    base_seed: int = 1234,
) -> list[SuiteResult]:
    """Run every registered check over `seeds` random instances each."""
    names = targets if targets is not None else tuple(SUITE)
    results = []
    for name in names:
        builder = SUITE[name]
        worst_rel = 0.0
        worst_case = ""
        ok = True
        for i in range(seeds):
            rng = np.random.default_rng(base_seed + i)
            for sub_name, analytic, numeric in builder(rng):
                report = grad_check(analytic, numeric, rel_tol, abs_floor)
                if report.max_rel_error >= worst_rel:
                    worst_rel = report.max_rel_error
                    worst_case = f"{sub_name} seed {base_seed + i}"
                ok = ok and report.passed
        results.append(SuiteResult(name, seeds, worst_rel, worst_case, ok))
    return results
