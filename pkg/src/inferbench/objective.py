"""Training objective: token-level NLL plus two InfoNCE contrastive
terms (in-batch and per-sample negatives), with analytic gradients for
ToyBackend and a finite-difference verification gate.

Conventions fixed here and relied on by the trainer and tests:

* the scored answer sequence includes EOS;
* NLL and the per-sample contrastive term are means over the batch,
  and the in-batch term is the batch InfoNCE sum divided by batch size,
  so gradient accumulation over micro-batches reproduces the full-batch
  gradients exactly;
* the positive representation is the embedding of the gold answer;
* the in-batch InfoNCE denominator includes the positive pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .backend import Gradients, ToyBackend, derive_seed
from .corpus import InferenceExample, prepare_input_text
from .metrics import tokenize


@dataclass(frozen=True)
class LossConfig:
    tau_b: float = 0.1
    tau_s: float = 2.5
    lambda_b: float = 0.5
    lambda_s: float = 0.5

    def __post_init__(self):
        if self.tau_b <= 0 or self.tau_s <= 0:
            raise ValueError("temperatures must be strictly positive")
        if self.lambda_b < 0 or self.lambda_s < 0:
            raise ValueError("loss coefficients must be non-negative")


@dataclass
class LossBreakdown:
    nll: float
    cl_b: float
    cl_s: float
    total: float
    grads: Gradients


def _answer_ids(backend: ToyBackend, answer: str) -> list[int]:
    tokens = tokenize(answer)
    if not tokens:
        raise ValueError("empty answer cannot be scored")
    return backend.vocab.encode(tokens) + [backend.vocab.eos_id]


def nll_ids(
    backend: ToyBackend, input_ids: list[int], answer_ids: list[int]
) -> tuple[float, Gradients]:
    """Summed negative log-likelihood of answer_ids (EOS included) with
    exact gradients for the ToyBackend forward equations."""
    k = len(answer_ids)
    E, U, b = backend.E, backend.U, backend.b
    c = E[input_ids].mean(axis=0) if input_ids else np.zeros(backend.d)

    # prefix means: row j pools BOS plus the first j answer tokens
    rows = np.vstack([E[backend.vocab.bos_id], E[answer_ids[: k - 1]]])
    prefix_means = np.cumsum(rows, axis=0) / np.arange(1, k + 1)[:, None]

    states = 0.5 * (c[None, :] + prefix_means)
    logits = states @ U.T + b[None, :]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    log_probs = shifted - log_z[:, None]
    value = -float(log_probs[np.arange(k), answer_ids].sum())

    d_logits = np.exp(log_probs)
    d_logits[np.arange(k), answer_ids] -= 1.0

    grads = Gradients.zeros_like(backend)
    grads.b = d_logits.sum(axis=0)
    grads.U = d_logits.T @ states
    d_states = d_logits @ U
    d_prefix = 0.5 * d_states / np.arange(1, k + 1)[:, None]
    # token at answer position i feeds every prefix mean from step i+1 on
    suffix = np.cumsum(d_prefix[::-1], axis=0)[::-1]
    grads.E[backend.vocab.bos_id] += suffix[0]
    if k > 1:
        np.add.at(grads.E, answer_ids[: k - 1], suffix[1:])
    if input_ids:
        d_c = 0.5 * d_states.sum(axis=0)
        np.add.at(grads.E, input_ids, d_c[None, :].repeat(len(input_ids), 0) / len(input_ids))
    return value, grads


def nll_value_ids(
    backend: ToyBackend, input_ids: list[int], answer_ids: list[int]
) -> float:
    """Forward-only NLL, shared by perplexity and finite differencing."""
    k = len(answer_ids)
    E, U, b = backend.E, backend.U, backend.b
    c = E[input_ids].mean(axis=0) if input_ids else np.zeros(backend.d)
    rows = np.vstack([E[backend.vocab.bos_id], E[answer_ids[: k - 1]]])
    prefix_means = np.cumsum(rows, axis=0) / np.arange(1, k + 1)[:, None]
    logits = (0.5 * (c[None, :] + prefix_means)) @ U.T + b[None, :]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1))[:, None]
    return -float(log_probs[np.arange(k), answer_ids].sum())


def nll_loss(
    backend: ToyBackend, example: InferenceExample, template_id: str = "default"
) -> tuple[float, Gradients]:
    input_ids = backend.vocab.encode(tokenize(prepare_input_text(example, template_id)))
    return nll_ids(backend, input_ids, _answer_ids(backend, example.answer))


# --- contrastive losses on raw vectors -------------------------------------

def _check_nonzero(name: str, vec: np.ndarray) -> float:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise ValueError(f"zero vector passed to contrastive loss: {name}")
    return norm


def _cos_and_grads(u, v, nu, nv):
    s = float(u @ v) / (nu * nv)
    du = (v / nv - s * u / nu) / nu
    dv = (u / nu - s * v / nv) / nv
    return s, du, dv


def cl_sample_loss(
    h_x: np.ndarray,
    h_pos: np.ndarray,
    h_negs: list[np.ndarray],
    tau_s: float,
) -> tuple[float, dict]:
    """InfoNCE over one positive and m negatives, cosine similarity.

    value = -ln exp(sim(x,pos)/tau) / (exp(sim(x,pos)/tau)
            + sum_neg exp(sim(x,neg)/tau))

    Returns (value, grads) with grads holding d/dh_x, d/dh_pos and a
    list of d/dh_neg arrays.
    """
    if len(h_negs) < 1:
        raise ValueError("cl_sample_loss needs at least one negative")
    nx = _check_nonzero("h_x", h_x)
    norms = [_check_nonzero("h_pos", h_pos)]
    vecs = [h_pos]
    for i, h in enumerate(h_negs):
        norms.append(_check_nonzero(f"h_negs[{i}]", h))
        vecs.append(h)

    sims, d_hx_parts, d_other = [], [], []
    for v, nv in zip(vecs, norms):
        s, du, dv = _cos_and_grads(h_x, v, nx, nv)
        sims.append(s)
        d_hx_parts.append(du)
        d_other.append(dv)

    logits = np.array(sims) / tau_s
    shifted = logits - logits.max()
    soft = np.exp(shifted) / np.exp(shifted).sum()
    value = float(-logits[0] + logits.max() + math.log(np.exp(shifted).sum()))

    d_sims = soft / tau_s
    d_sims[0] -= 1.0 / tau_s
    g_x = sum(d * part for d, part in zip(d_sims, d_hx_parts))
    grads = {
        "h_x": g_x,
        "h_pos": d_sims[0] * d_other[0],
        "h_negs": [d_sims[i + 1] * d_other[i + 1] for i in range(len(h_negs))],
    }
    return value, grads


def cl_batch_loss(
    pairs: list[tuple[np.ndarray, np.ndarray]], tau_b: float
) -> tuple[float, dict]:
    """In-batch InfoNCE summed over rows; denominator spans the whole
    batch including the positive. Returns (value, grads) with grads
    holding lists d/dh_x_i and d/dh_a_j."""
    n = len(pairs)
    if n < 2:
        raise ValueError("cl_batch_loss needs batch size >= 2")
    xs = [p[0] for p in pairs]
    ans = [p[1] for p in pairs]
    nxs = [_check_nonzero(f"h_x[{i}]", x) for i, x in enumerate(xs)]
    nas = [_check_nonzero(f"h_a[{j}]", a) for j, a in enumerate(ans)]

    sims = np.empty((n, n))
    dx_parts = np.empty((n, n), dtype=object)
    da_parts = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            s, du, dv = _cos_and_grads(xs[i], ans[j], nxs[i], nas[j])
            sims[i, j] = s
            dx_parts[i, j] = du
            da_parts[i, j] = dv

    logits = sims / tau_b
    shifted = logits - logits.max(axis=1, keepdims=True)
    soft = np.exp(shifted) / np.exp(shifted).sum(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1)) + logits.max(axis=1)
    value = float((log_z - np.diag(logits)).sum())

    d_sims = soft / tau_b
    d_sims[np.diag_indices(n)] -= 1.0 / tau_b
    g_x = [
        sum(d_sims[i, j] * dx_parts[i, j] for j in range(n)) for i in range(n)
    ]
    g_a = [
        sum(d_sims[i, j] * da_parts[i, j] for i in range(n)) for j in range(n)
    ]
    return value, {"h_x": g_x, "h_a": g_a}


# --- batch objective --------------------------------------------------------

def _embed_with_ids(backend: ToyBackend, tokens: list[str]) -> tuple[np.ndarray, list[int]]:
    ids = backend.vocab.encode(tokens)
    return backend.embed_ids(ids), ids


def _embed_backward(
    backend: ToyBackend, ids: list[int], grad_e: np.ndarray, out_E: np.ndarray, scale: float
) -> None:
    """Chain a gradient on the normalized mean embedding back onto E."""
    v = backend.E[ids].mean(axis=0)
    norm = float(np.linalg.norm(v))
    e = v / norm
    gv = (grad_e - e * float(e @ grad_e)) / norm
    np.add.at(out_E, ids, (scale / len(ids)) * gv[None, :].repeat(len(ids), 0))


def total_loss(
    backend: ToyBackend,
    batch: list[InferenceExample],
    negatives: list[list[str]] | None,
    config: LossConfig,
    template_id: str = "default",
) -> LossBreakdown:
    """Mean NLL + lambda_b * in-batch InfoNCE + lambda_s * per-sample
    InfoNCE over a batch, with gradients of the weighted total.

    ``negatives[i]`` are the negative answer strings for ``batch[i]``;
    required whenever lambda_s > 0. Batches of size 1 contribute no
    in-batch term.
    """
    n = len(batch)
    if n == 0:
        raise ValueError("empty batch")
    if config.lambda_s > 0:
        if negatives is None or any(not negs for negs in negatives):
            raise ValueError("lambda_s > 0 requires >= 1 negative per example")

    grads = Gradients.zeros_like(backend)
    nll_total = 0.0
    for example in batch:
        value, g = nll_loss(backend, example, template_id)
        nll_total += value
        grads.add_scaled(g, 1.0 / n)
    nll_mean = nll_total / n

    need_embeddings = config.lambda_s > 0 or (config.lambda_b > 0 and n >= 2)
    cl_b_term = 0.0
    cl_s_mean = 0.0
    if need_embeddings:
        h_x, x_ids, h_a, a_ids = [], [], [], []
        for example in batch:
            hx, xi = _embed_with_ids(
                backend, tokenize(prepare_input_text(example, template_id))
            )
            ha, ai = _embed_with_ids(backend, tokenize(example.answer))
            for name, vec in (("input", hx), ("answer", ha)):
                if float(np.linalg.norm(vec)) == 0.0:
                    raise ValueError(
                        f"example {example.id}: zero {name} embedding"
                    )
            h_x.append(hx)
            x_ids.append(xi)
            h_a.append(ha)
            a_ids.append(ai)

        if config.lambda_s > 0:
            cl_s_total = 0.0
            for i, example in enumerate(batch):
                neg_vecs, neg_ids = [], []
                for neg in negatives[i]:
                    hv, nids = _embed_with_ids(backend, tokenize(neg))
                    if float(np.linalg.norm(hv)) == 0.0:
                        raise ValueError(
                            f"example {example.id}: zero embedding for negative {neg!r}"
                        )
                    neg_vecs.append(hv)
                    neg_ids.append(nids)
                value, g = cl_sample_loss(h_x[i], h_a[i], neg_vecs, config.tau_s)
                cl_s_total += value
                scale = config.lambda_s / n
                _embed_backward(backend, x_ids[i], g["h_x"], grads.E, scale)
                _embed_backward(backend, a_ids[i], g["h_pos"], grads.E, scale)
                for nids, gn in zip(neg_ids, g["h_negs"]):
                    _embed_backward(backend, nids, gn, grads.E, scale)
            cl_s_mean = cl_s_total / n

        if config.lambda_b > 0 and n >= 2:
            value, g = cl_batch_loss(list(zip(h_x, h_a)), config.tau_b)
            cl_b_term = value / n
            scale = config.lambda_b / n
            for i in range(n):
                _embed_backward(backend, x_ids[i], g["h_x"][i], grads.E, scale)
                _embed_backward(backend, a_ids[i], g["h_a"][i], grads.E, scale)

    total = nll_mean + config.lambda_b * cl_b_term + config.lambda_s * cl_s_mean
    return LossBreakdown(
        nll=nll_mean, cl_b=cl_b_term, cl_s=cl_s_mean, total=total, grads=grads
    )


def total_loss_value(
    backend: ToyBackend,
    batch: list[InferenceExample],
    negatives: list[list[str]] | None,
    config: LossConfig,
    template_id: str = "default",
) -> float:
    """Forward-only total, used by the finite-difference gate."""
    n = len(batch)
    if n == 0:
        raise ValueError("empty batch")
    nll_mean = (
        sum(
            nll_value_ids(
                backend,
                backend.vocab.encode(tokenize(prepare_input_text(ex, template_id))),
                _answer_ids(backend, ex.answer),
            )
            for ex in batch
        )
        / n
    )

    def unit(tokens: list[str], what: str) -> np.ndarray:
        vec = backend.embed_text(tokens)
        if float(np.linalg.norm(vec)) == 0.0:
            raise ValueError(f"zero embedding for {what}")
        return vec

    cl_b_term = 0.0
    cl_s_mean = 0.0
    if config.lambda_s > 0 or (config.lambda_b > 0 and n >= 2):
        h_x = [
            unit(tokenize(prepare_input_text(ex, template_id)), f"input of {ex.id}")
            for ex in batch
        ]
        h_a = [unit(tokenize(ex.answer), f"answer of {ex.id}") for ex in batch]
        if config.lambda_s > 0:
            if negatives is None or any(not negs for negs in negatives):
                raise ValueError("lambda_s > 0 requires >= 1 negative per example")
            total_s = 0.0
            for i, ex in enumerate(batch):
                sims = [float(h_x[i] @ h_a[i])] + [
                    float(h_x[i] @ unit(tokenize(neg), f"negative of {ex.id}"))
                    for neg in negatives[i]
                ]
                logits = np.array(sims) / config.tau_s
                total_s += float(-logits[0] + np.logaddexp.reduce(logits))
            cl_s_mean = total_s / n
        if config.lambda_b > 0 and n >= 2:
            sims = np.array([[float(x @ a) for a in h_a] for x in h_x]) / config.tau_b
            value = float(
                (np.logaddexp.reduce(sims, axis=1) - np.diag(sims)).sum()
            )
            cl_b_term = value / n
    return nll_mean + config.lambda_b * cl_b_term + config.lambda_s * cl_s_mean


def accumulated_total_loss(
    backend: ToyBackend,
    batch: list[InferenceExample],
    negatives: list[list[str]] | None,
    config: LossConfig,
    micro_batch: int | None = None,
    template_id: str = "default",
) -> LossBreakdown:
    """Micro-batched evaluation of :func:`total_loss`.

    NLL and per-sample gradients accumulate over micro-batches weighted
    by micro size; the in-batch term is always computed once over the
    whole batch, so any micro_batch divisor reproduces the full-batch
    loss and gradients up to float summation order.
    """
    n = len(batch)
    if micro_batch is None or micro_batch >= n:
        return total_loss(backend, batch, negatives, config, template_id)
    if micro_batch < 1:
        raise ValueError("micro_batch must be >= 1")

    no_batch_cfg = replace(config, lambda_b=0.0)
    grads = Gradients.zeros_like(backend)
    nll_mean = 0.0
    cl_s_mean = 0.0
    for start in range(0, n, micro_batch):
        sub = batch[start : start + micro_batch]
        sub_negs = negatives[start : start + micro_batch] if negatives else None
        part = total_loss(backend, sub, sub_negs, no_batch_cfg, template_id)
        w = len(sub) / n
        nll_mean += part.nll * w
        cl_s_mean += part.cl_s * w
        grads.add_scaled(part.grads, w)

    cl_b_term = 0.0
    if config.lambda_b > 0 and n >= 2:
        h_x, x_ids, h_a, a_ids = [], [], [], []
        for example in batch:
            hx, xi = _embed_with_ids(
                backend, tokenize(prepare_input_text(example, template_id))
            )
            ha, ai = _embed_with_ids(backend, tokenize(example.answer))
            h_x.append(hx)
            x_ids.append(xi)
            h_a.append(ha)
            a_ids.append(ai)
        value, g = cl_batch_loss(list(zip(h_x, h_a)), config.tau_b)
        cl_b_term = value / n
        scale = config.lambda_b / n
        for i in range(n):
            _embed_backward(backend, x_ids[i], g["h_x"][i], grads.E, scale)
            _embed_backward(backend, a_ids[i], g["h_a"][i], grads.E, scale)

    total = nll_mean + config.lambda_b * cl_b_term + config.lambda_s * cl_s_mean
    return LossBreakdown(
        nll=nll_mean, cl_b=cl_b_term, cl_s=cl_s_mean, total=total, grads=grads
    )


# --- finite-difference gate -------------------------------------------------

@dataclass
class FiniteDiffFailure:
    parameter: str
    flat_index: int
    analytic: float
    numeric: float
    error: float


@dataclass
class FiniteDiffReport:
    passed: bool
    n_checked: int
    max_error: float
    tol: float
    step: float
    worst: list[FiniteDiffFailure] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "n_checked": self.n_checked,
            "max_error": self.max_error,
            "tol": self.tol,
            "step": self.step,
            "worst": [
                {
                    "parameter": w.parameter,
                    "flat_index": w.flat_index,
                    "analytic": w.analytic,
                    "numeric": w.numeric,
                    "error": w.error,
                }
                for w in self.worst
            ],
        }


def finite_diff_check(
    backend: ToyBackend,
    batch: list[InferenceExample],
    negatives: list[list[str]] | None,
    config: LossConfig,
    step: float = 1e-5,
    tol: float = 1e-4,
    template_id: str = "default",
    seed: int = 0,
    full_check_limit: int = 10_000,
    sample_size: int = 1_000,
    analytic: Gradients | None = None,
) -> FiniteDiffReport:
    """Central-difference check of the total-loss gradients.

    Every parameter is checked when the model has at most
    ``full_check_limit`` of them, otherwise a seeded sample of
    ``sample_size``. A coordinate passes when the relative error is
    below ``tol``, or the absolute error is below 1e-7 where both
    gradients are near zero. Failure is reported, never raised.
    """
    work = backend.copy()
    if analytic is None:
        analytic = total_loss(work, batch, negatives, config, template_id).grads
    flat_analytic = np.concatenate(
        [analytic.E.ravel(), analytic.U.ravel(), analytic.b]
    )
    theta = work.flat_parameters()
    n_params = theta.size
    if n_params <= full_check_limit:
        indices = np.arange(n_params)
    else:
        rng = np.random.default_rng(derive_seed(seed, "fdcheck"))
        indices = rng.choice(n_params, size=sample_size, replace=False)

    failures: list[FiniteDiffFailure] = []
    max_error = 0.0
    for idx in indices:
        orig = theta[idx]
        theta[idx] = orig + step
        work.set_flat_parameters(theta)
        up = total_loss_value(work, batch, negatives, config, template_id)
        theta[idx] = orig - step
        work.set_flat_parameters(theta)
        down = total_loss_value(work, batch, negatives, config, template_id)
        theta[idx] = orig
        numeric = (up - down) / (2.0 * step)
        ana = float(flat_analytic[idx])
        denom = max(abs(ana), abs(numeric))
        if denom < 1e-6:
            err = abs(ana - numeric)
            ok = err < 1e-7
        else:
            err = abs(ana - numeric) / denom
            ok = err < tol
        max_error = max(max_error, err)
        if not ok:
            failures.append(
                FiniteDiffFailure(
                    parameter=work.parameter_name(int(idx)),
                    flat_index=int(idx),
                    analytic=ana,
                    numeric=numeric,
                    error=err,
                )
            )
    work.set_flat_parameters(theta)
    failures.sort(key=lambda f: f.error, reverse=True)
    return FiniteDiffReport(
        passed=not failures,
        n_checked=len(indices),
        max_error=max_error,
        tol=tol,
        step=step,
        worst=failures[:10],
    )
