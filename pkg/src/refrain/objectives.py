"""Coarse-to-fine training objectives and a desk-scale trainer.

Three losses are implemented as pure functions with analytic gradients:

* video-caption contrastive (``vcc_loss``): InfoNCE in both directions
  against a FIFO queue of past feature pairs,
* video-caption matching (``vcm_loss``): two-class cross-entropy over
  matched/unmatched pair logits,
* frame-title matching (``ftm_loss``): the same functional form applied
  to fine-grained (frame, title) pairs.

``finite_diff_check`` verifies any analytic gradient against central
differences, and ``train_linear_towers`` runs full-batch gradient
descent on two linear projection towers plus two linear match heads.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import EngineConfig
from .errors import (
    DimensionMismatchError,
    EmptyInputError,
    EmptyQueueError,
    InvalidTemperatureError,
    NumericalFailureError,
    TrainingDivergedError,
    ValidationError,
)

_UNIT_TOL = 1e-5


def _check_unit_rows(name: str, m: np.ndarray) -> None:
    norms = np.linalg.norm(m, axis=1)
    if np.any(np.abs(norms - 1.0) > _UNIT_TOL):
        worst = float(np.abs(norms - 1.0).max())
        raise ValidationError(f"{name} rows must be unit-norm (off by {worst:.2e})")


@dataclass(frozen=True)
class FeatureBatch:
    """Aligned unit-norm video/caption feature rows; row i is a positive pair."""

    video_feats: np.ndarray
    caption_feats: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.video_feats, dtype=np.float64)
        c = np.asarray(self.caption_feats, dtype=np.float64)
        if v.ndim != 2 or c.ndim != 2 or v.shape[0] == 0:
            raise EmptyInputError("feature batch must be non-empty 2-D")
        if v.shape != c.shape:
            raise DimensionMismatchError(
                f"video {v.shape} vs caption {c.shape}"
            )
        _check_unit_rows("video_feats", v)
        _check_unit_rows("caption_feats", c)
        object.__setattr__(self, "video_feats", v)
        object.__setattr__(self, "caption_feats", c)

    @property
    def size(self) -> int:
        return int(self.video_feats.shape[0])

    @property
    def dim(self) -> int:
        return int(self.video_feats.shape[1])


class MomentumQueue:
    """FIFO buffer of up to ``capacity`` detached video/caption feature pairs.

    ``enqueue`` returns the storage slots the new rows landed in, which
    the contrastive loss uses to locate each anchor's positive.  Slots
    remain valid until overwritten by later enqueues.  Single-writer.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValidationError("queue capacity must be >= 1")
        self.capacity = int(capacity)
        self._video: np.ndarray | None = None
        self._caption: np.ndarray | None = None
        self._cursor = 0
        self._size = 0

    def _ensure_storage(self, dim: int) -> None:
        if self._video is None:
            self._video = np.zeros((self.capacity, dim), dtype=np.float64)
            self._caption = np.zeros((self.capacity, dim), dtype=np.float64)
        elif self._video.shape[1] != dim:
            raise DimensionMismatchError(
                f"queue dim {self._video.shape[1]} != feature dim {dim}"
            )

    def enqueue(self, video_rows: np.ndarray, caption_rows: np.ndarray) -> list[int]:
        v = np.asarray(video_rows, dtype=np.float64)
        c = np.asarray(caption_rows, dtype=np.float64)
        if v.ndim != 2 or v.shape != c.shape or v.shape[0] == 0:
            raise ValidationError("enqueue expects matching non-empty 2-D rows")
        if v.shape[0] > self.capacity:
            raise ValidationError(
                f"cannot enqueue {v.shape[0]} pairs into capacity {self.capacity}")
        _check_unit_rows("queued video rows", v)
        _check_unit_rows("queued caption rows", c)
        self._ensure_storage(v.shape[1])
        slots = []
        for i in range(v.shape[0]):
            slot = self._cursor
            self._video[slot] = v[i]
            self._caption[slot] = c[i]
            slots.append(slot)
            self._cursor = (self._cursor + 1) % self.capacity
            self._size = min(self._size + 1, self.capacity)
        return slots

    @property
    def size(self) -> int:
        return self._size

    @property
    def video_features(self) -> np.ndarray:
        if self._video is None:
            return np.zeros((0, 0))
        return self._video[: self._size]

    @property
    def caption_features(self) -> np.ndarray:
        if self._caption is None:
            return np.zeros((0, 0))
        return self._caption[: self._size]


def _log_softmax_rows(logits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise (log-probabilities, probabilities) with max subtraction."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    denom = exp.sum(axis=1, keepdims=True)
    log_probs = shifted - np.log(denom)
    return log_probs, exp / denom


def vcc_loss_frozen(video_feats: np.ndarray, caption_feats: np.ndarray,
                    queue_video: np.ndarray, queue_caption: np.ndarray,
                    positive_slots, tau: float
                    ) -> tuple[float, np.ndarray, np.ndarray]:
    """Bidirectional contrastive loss against fixed queue contents.

    Pure function: the queue arrays are treated as constants, so the
    returned gradients are with respect to the batch features only.
    ``positive_slots[i]`` is the queue row holding pair i's detached
    copy.  Not restricted to unit-norm inputs, which keeps it usable
    under finite-difference perturbation.
    """
    if tau <= 0.0:
        raise InvalidTemperatureError(f"temperature must be > 0, got {tau}")
    v = np.asarray(video_feats, dtype=np.float64)
    c = np.asarray(caption_feats, dtype=np.float64)
    qv = np.asarray(queue_video, dtype=np.float64)
    qc = np.asarray(queue_caption, dtype=np.float64)
    if qv.shape[0] == 0 or qc.shape[0] == 0:
        raise EmptyQueueError("contrastive queue is empty")
    if v.shape != c.shape or v.ndim != 2 or v.shape[0] == 0:
        raise EmptyInputError("batch must be non-empty matching 2-D arrays")
    if v.shape[1] != qc.shape[1] or c.shape[1] != qv.shape[1]:
        raise DimensionMismatchError("queue and batch dims differ")
    slots = np.asarray(positive_slots, dtype=np.int64)
    if slots.shape != (v.shape[0],) or slots.min() < 0 or slots.max() >= qc.shape[0]:
        raise ValidationError("positive_slots must index queue rows, one per pair")

    batch = v.shape[0]
    rows = np.arange(batch)

    logits_v = v @ qc.T / tau
    logp_v, probs_v = _log_softmax_rows(logits_v)
    loss_v = -logp_v[rows, slots]
    grad_v = (probs_v @ qc - qc[slots]) / (tau * batch)

    logits_c = c @ qv.T / tau
    logp_c, probs_c = _log_softmax_rows(logits_c)
    loss_c = -logp_c[rows, slots]
    grad_c = (probs_c @ qv - qv[slots]) / (tau * batch)

    loss = float(np.mean(loss_v + loss_c))
    return loss, grad_v, grad_c


def vcc_loss(batch: FeatureBatch, queue: MomentumQueue, tau: float
             ) -> tuple[float, np.ndarray, np.ndarray]:
    """Contrastive loss for a batch, enqueueing its detached copies first.

    Mutates ``queue``: the batch's features are inserted before the loss
    is computed, so every anchor's positive is present among the queue
    entries that form the softmax denominator.
    """
    if tau <= 0.0:
        raise InvalidTemperatureError(f"temperature must be > 0, got {tau}")
    slots = queue.enqueue(batch.video_feats, batch.caption_feats)
    return vcc_loss_frozen(batch.video_feats, batch.caption_feats,
                           queue.video_features, queue.caption_features,
                           slots, tau)


@dataclass(frozen=True)
class MatchLogits:
    """Two-class (matched, unmatched) logits with per-pair labels."""

    scores: np.ndarray  # (n, 2): column 0 = matched class, column 1 = unmatched
    matched: np.ndarray  # (n,) bool

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        y = np.asarray(self.matched, dtype=bool)
        if s.ndim != 2 or s.shape[1] != 2 or s.shape[0] == 0:
            raise EmptyInputError("scores must be a non-empty (n, 2) array")
        if y.shape != (s.shape[0],):
            raise ValidationError("one label per logit pair required")
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "matched", y)

    @property
    def size(self) -> int:
        return int(self.scores.shape[0])


def _binary_match_loss(logits: MatchLogits) -> tuple[float, np.ndarray]:
    log_probs, probs = _log_softmax_rows(logits.scores)
    classes = np.where(logits.matched, 0, 1)
    rows = np.arange(logits.size)
    loss = float(-log_probs[rows, classes].mean())
    onehot = np.zeros_like(probs)
    onehot[rows, classes] = 1.0
    grad = (probs - onehot) / logits.size
    return loss, grad


def vcm_loss(logits: MatchLogits) -> tuple[float, np.ndarray]:
    """Mean two-class cross-entropy over video-caption pairs.

    Probabilities come from a softmax over the two logits; the gradient
    is with respect to the logits.
    """
    return _binary_match_loss(logits)


def ftm_loss(logits: MatchLogits) -> tuple[float, np.ndarray]:
    """Frame-title matching loss; same functional form as vcm_loss."""
    return _binary_match_loss(logits)


def total_loss(vcc: float, vcm: float, ftm: float) -> float:
    """Unweighted sum of the three objective values."""
    for name, value in (("vcc", vcc), ("vcm", vcm), ("ftm", ftm)):
        if not np.isfinite(value):
            raise ValidationError(f"{name} component is not finite")
    return float(vcc) + float(vcm) + float(ftm)


def finite_diff_check(loss_fn, point: np.ndarray, h: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn(x)`` must return ``(loss, grad)`` with ``grad`` shaped like
    ``x``.  Per-coordinate relative error uses a unit floor, i.e.
    ``|num - ana| / max(1, |num|, |ana|)``.
    """
    if not (1e-6 <= h <= 1e-3):
        raise ValidationError(f"step h must lie in [1e-6, 1e-3], got {h}")
    x = np.asarray(point, dtype=np.float64)
    loss, grad = loss_fn(x)
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != x.shape:
        raise ValidationError("gradient shape must match the point")
    if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
        raise NumericalFailureError("non-finite loss or gradient at the point")

    flat = x.ravel()
    ana = grad.ravel()
    worst = 0.0
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up, _ = loss_fn(x)
        flat[i] = orig - h
        down, _ = loss_fn(x)
        flat[i] = orig
        if not (np.isfinite(up) and np.isfinite(down)):
            raise NumericalFailureError(f"non-finite loss near coordinate {i}")
        num = (up - down) / (2.0 * h)
        err = abs(num - ana[i]) / max(1.0, abs(num), abs(ana[i]))
        worst = max(worst, err)
    return worst


@dataclass(frozen=True)
class TrainingCorpus:
    """Paired raw (pre-projection) features for the desk-scale trainer.

    ``frame_raw``/``title_raw`` hold fine-grained inputs for the
    frame-title objective; when omitted they default to the coarse
    video/text features.
    """

    video_raw: np.ndarray
    text_raw: np.ndarray
    frame_raw: np.ndarray | None = None
    title_raw: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.video_raw, dtype=np.float64)
        t = np.asarray(self.text_raw, dtype=np.float64)
        if v.ndim != 2 or t.ndim != 2 or v.shape[0] != t.shape[0]:
            raise ValidationError("video_raw and text_raw must pair row-wise")
        if v.shape[0] < 2:
            raise ValidationError("corpus needs at least 2 pairs")
        f = v if self.frame_raw is None else np.asarray(self.frame_raw, np.float64)
        s = t if self.title_raw is None else np.asarray(self.title_raw, np.float64)
        if f.shape != v.shape or s.shape != t.shape:
            raise ValidationError("fine-grained features must match coarse shapes")
        object.__setattr__(self, "video_raw", v)
        object.__setattr__(self, "text_raw", t)
        object.__setattr__(self, "frame_raw", f)
        object.__setattr__(self, "title_raw", s)

    @property
    def size(self) -> int:
        return int(self.video_raw.shape[0])


@dataclass(frozen=True)
class StepRecord:
    step: int
    vcc: float
    vcm: float
    ftm: float
    total: float


@dataclass
class TrainingResult:
    """Trained projections, match heads, and the per-step loss trace."""

    video_projection: np.ndarray
    text_projection: np.ndarray
    match_head: tuple[np.ndarray, float]
    fine_match_head: tuple[np.ndarray, float]
    trace: list[StepRecord] = field(default_factory=list)

    def project_video(self, raw: np.ndarray) -> np.ndarray:
        return _rownorm(np.asarray(raw, np.float64) @ self.video_projection)

    def project_text(self, raw: np.ndarray) -> np.ndarray:
        return _rownorm(np.asarray(raw, np.float64) @ self.text_projection)


def _rownorm(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        norms = np.linalg.norm(z, axis=1, keepdims=True)
    if (not np.all(np.isfinite(z)) or not np.all(np.isfinite(norms))
            or np.any(norms < 1e-300)):
        raise TrainingDivergedError("projection produced degenerate rows")
    return z / norms


def _rownorm_backward(z: np.ndarray, y: np.ndarray, gy: np.ndarray) -> np.ndarray:
    # y = z / ||z||; pull gradients back through the normalization.
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    inner = np.sum(y * gy, axis=1, keepdims=True)
    return (gy - inner * y) / norms


def hard_negative_indices(similarity: np.ndarray) -> np.ndarray:
    """Per-row index of the most similar non-diagonal column, ties low."""
    s = np.array(similarity, dtype=np.float64, copy=True)
    np.fill_diagonal(s, -np.inf)
    return np.argmax(s, axis=1)


def _match_forward_backward(left: np.ndarray, right_pos: np.ndarray,
                            right_neg: np.ndarray, form: np.ndarray,
                            bias: float, loss_fn):
    """Bilinear match head with hard negatives.

    The score of a pair is ``s = l @ form @ r + bias`` and the two-class
    logits are ``(s, -s)``; an affine head on the concatenation could
    never express this cross-modal interaction.  Returns the loss plus
    gradients for the form, the bias, and the three feature blocks; the
    negative selection itself is treated as constant.
    """
    n = left.shape[0]
    lefts = np.concatenate([left, left], axis=0)
    rights = np.concatenate([right_pos, right_neg], axis=0)
    scores = np.einsum("ij,jk,ik->i", lefts, form, rights) + bias
    logits = MatchLogits(np.stack([scores, -scores], axis=1),
                         np.concatenate([np.ones(n, bool), np.zeros(n, bool)]))
    loss, grad_logits = loss_fn(logits)
    ds = grad_logits[:, 0] - grad_logits[:, 1]
    grad_form = (lefts * ds[:, None]).T @ rights
    grad_bias = float(ds.sum())
    grad_lefts = ds[:, None] * (rights @ form.T)
    grad_rights = ds[:, None] * (lefts @ form)
    grad_left = grad_lefts[:n] + grad_lefts[n:]
    return loss, grad_form, grad_bias, grad_left, grad_rights[:n], grad_rights[n:]


def train_linear_towers(corpus: TrainingCorpus, config: EngineConfig,
                        epochs: int = 30, lr: float = 0.05,
                        proj_dim: int | None = None,
                        momentum: float = 0.0) -> TrainingResult:
    """Full-batch gradient descent on the sum of the three objectives.

    Two linear towers (video, text) are trained jointly with two linear
    match heads; projected features are re-normalized at every step.
    Both towers are initialized from the same seeded draw so corpora
    with identical raw modalities start perfectly aligned.  ``momentum``
    blends each pair's queued copy with its previous copy (0 stores the
    current features unchanged).  Training is full-batch, so
    ``config.queue_size`` must be at least the corpus size.
    """
    if epochs < 1:
        raise ValidationError("epochs must be >= 1")
    if not (0.0 <= momentum < 1.0):
        raise ValidationError("momentum must lie in [0, 1)")
    d_video = corpus.video_raw.shape[1]
    d_text = corpus.text_raw.shape[1]
    dim = proj_dim or min(d_video, d_text)

    def init_tower(d_in: int) -> np.ndarray:
        rng = np.random.default_rng(config.rng_seed)
        return rng.standard_normal((d_in, dim)) / np.sqrt(d_in)

    w_video = init_tower(d_video)
    w_text = init_tower(d_text)
    w_match = np.zeros((dim, dim))
    b_match = 0.0
    w_fine = np.zeros((dim, dim))
    b_fine = 0.0

    queue = MomentumQueue(config.queue_size)
    tau = config.temperature
    mom_video = mom_caption = None

    # Prime the queue with the initial features so the first step sees
    # denominators comparable to later steps.
    queue.enqueue(_rownorm(corpus.video_raw @ w_video),
                  _rownorm(corpus.text_raw @ w_text))

    trace: list[StepRecord] = []
    for step in range(1, epochs + 1):
        z_v = corpus.video_raw @ w_video
        z_c = corpus.text_raw @ w_text
        z_f = corpus.frame_raw @ w_video
        z_t = corpus.title_raw @ w_text
        v, c = _rownorm(z_v), _rownorm(z_c)
        f, t = _rownorm(z_f), _rownorm(z_t)

        if momentum > 0.0 and mom_video is not None:
            mom_video = _rownorm(momentum * mom_video + (1 - momentum) * v)
            mom_caption = _rownorm(momentum * mom_caption + (1 - momentum) * c)
        else:
            mom_video, mom_caption = v, c
        slots = queue.enqueue(mom_video, mom_caption)
        vcc, g_v, g_c = vcc_loss_frozen(v, c, queue.video_features,
                                        queue.caption_features, slots, tau)

        neg_c = hard_negative_indices(v @ c.T)
        vcm, gw_m, gb_m, gl, grp, grn = _match_forward_backward(
            v, c, c[neg_c], w_match, b_match, vcm_loss)
        g_v = g_v + gl
        g_c = g_c + grp
        np.add.at(g_c, neg_c, grn)

        neg_t = hard_negative_indices(f @ t.T)
        ftm, gw_f, gb_f, gl_f, gtp, gtn = _match_forward_backward(
            f, t, t[neg_t], w_fine, b_fine, ftm_loss)
        g_f = gl_f
        g_t = gtp.copy()
        np.add.at(g_t, neg_t, gtn)

        step_total = total_loss(vcc, vcm, ftm)
        if not np.isfinite(step_total):
            raise TrainingDivergedError(f"loss became non-finite at step {step}")
        trace.append(StepRecord(step, vcc, vcm, ftm, step_total))

        gz_v = _rownorm_backward(z_v, v, g_v)
        gz_c = _rownorm_backward(z_c, c, g_c)
        gz_f = _rownorm_backward(z_f, f, g_f)
        gz_t = _rownorm_backward(z_t, t, g_t)
        gw_video = corpus.video_raw.T @ gz_v + corpus.frame_raw.T @ gz_f
        gw_text = corpus.text_raw.T @ gz_c + corpus.title_raw.T @ gz_t

        w_video -= lr * gw_video
        w_text -= lr * gw_text
        w_match -= lr * gw_m
        b_match -= lr * gb_m
        w_fine -= lr * gw_f
        b_fine -= lr * gb_f

    return TrainingResult(video_projection=w_video, text_projection=w_text,
                          match_head=(w_match, b_match),
                          fine_match_head=(w_fine, b_fine), trace=trace)


def write_loss_trace(trace: list[StepRecord], path) -> None:
    """Write the per-step loss trace as comma-separated text."""
    lines = ["step,vcc,vcm,ftm,total"]
    for rec in trace:
        lines.append(f"{rec.step},{rec.vcc!r},{rec.vcm!r},{rec.ftm!r},{rec.total!r}")
    from pathlib import Path

    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
