"""Frame tagger: linear projection, stacked bidirectional LSTM, two BIO heads.

Implemented directly on numpy arrays with hand-written backpropagation through
time, so the gradient math is checkable against finite differences. All
computation is float64; checkpoints store float32 per the file format.

Parameter layout per LSTM direction: Wx (input, 4H), Wh (H, 4H), b (4H,) with
gate order [input, forget, candidate, output]. Forget-gate biases start at 1.
"""

import base64
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .tags import SEGMENTS_TIERS

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

CKPT_VERSION = "tagger-ckpt/1"

PARAM_COUNT_FORMULA = (
    "F*H + H + sum over layers l of dirs*(Din_l*4H + H*4H + 4H) "
    "+ 2*(Dout*3 + 3), Din_0 = H, Din_l = dirs*H, Dout = dirs*H"
)


def default_class_weights():
    return {tier: (1.0, 1.0, 1.0) for tier in SEGMENTS_TIERS}


@dataclass
class TaggerConfig:
    input_dim: int
    hidden_dim: int = 256
    layers: int = 4
    bidirectional: bool = True
    learning_rate: float = 1e-3
    class_weights: dict = field(default_factory=default_class_weights)
    seed: int = 0
    dropout: float = 0.0
    grad_clip: float = 0.0

    def validate(self):
        if self.input_dim <= 0 or self.hidden_dim <= 0 or self.layers <= 0:
            raise ValueError("input_dim, hidden_dim and layers must be positive")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if set(self.class_weights) != set(SEGMENTS_TIERS):
            raise ValueError(f"class_weights must cover tiers {SEGMENTS_TIERS}")
        for tier, w in self.class_weights.items():
            if len(w) != 3 or any(v <= 0 for v in w):
                raise ValueError(f"class_weights[{tier!r}] must be 3 positive reals")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")

    @property
    def num_directions(self) -> int:
        return 2 if self.bidirectional else 1

    @property
    def encoder_dim(self) -> int:
        return self.hidden_dim * self.num_directions

    def layer_input_dim(self, layer: int) -> int:
        return self.hidden_dim if layer == 0 else self.encoder_dim


@dataclass
class TaggerModel:
    config: TaggerConfig
    params: dict  # name -> float64 ndarray, insertion order fixed by _param_shapes


def _directions(config) -> tuple[str, ...]:
    return ("fwd", "bwd") if config.bidirectional else ("fwd",)


def _param_shapes(config: TaggerConfig) -> dict:
    h = config.hidden_dim
    shapes = {"proj.W": (config.input_dim, h), "proj.b": (h,)}
    for layer in range(config.layers):
        din = config.layer_input_dim(layer)
        for d in _directions(config):
            shapes[f"lstm{layer}.{d}.Wx"] = (din, 4 * h)
            shapes[f"lstm{layer}.{d}.Wh"] = (h, 4 * h)
            shapes[f"lstm{layer}.{d}.b"] = (4 * h,)
    for tier in SEGMENTS_TIERS:
        shapes[f"head.{tier}.W"] = (config.encoder_dim, 3)
        shapes[f"head.{tier}.b"] = (3,)
    return shapes


def param_count(config: TaggerConfig) -> int:
    return sum(int(np.prod(s)) for s in _param_shapes(config).values())


def init_model(config: TaggerConfig) -> TaggerModel:
    """Uniform(-1/sqrt(H), 1/sqrt(H)) init, quantized to float32-representable
    values so a fresh checkpoint round-trips bit-exactly; forget biases = 1."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    bound = 1.0 / np.sqrt(config.hidden_dim)
    params = {}
    h = config.hidden_dim
    for name, shape in _param_shapes(config).items():
        arr = rng.uniform(-bound, bound, size=shape)
        arr = arr.astype(np.float32).astype(np.float64)
        if name.endswith(".b") and name.startswith("lstm"):
            arr[h:2 * h] = 1.0
        params[name] = arr
    return TaggerModel(config, params)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _run_direction(u, wx, wh, b, reverse):
    """One LSTM direction over u (T, Din). Returns h (T, H) and a cache."""
    t_len = u.shape[0]
    h_dim = wh.shape[0]
    xw = u @ wx + b
    order = range(t_len - 1, -1, -1) if reverse else range(t_len)
    h = np.zeros((t_len, h_dim))
    c = np.zeros((t_len, h_dim))
    gi = np.zeros((t_len, h_dim))
    gf = np.zeros((t_len, h_dim))
    gg = np.zeros((t_len, h_dim))
    go = np.zeros((t_len, h_dim))
    hprev_all = np.zeros((t_len, h_dim))
    cprev_all = np.zeros((t_len, h_dim))
    hprev = np.zeros(h_dim)
    cprev = np.zeros(h_dim)
    for t in order:
        a = xw[t] + hprev @ wh
        gi[t] = _sigmoid(a[:h_dim])
        gf[t] = _sigmoid(a[h_dim:2 * h_dim])
        gg[t] = np.tanh(a[2 * h_dim:3 * h_dim])
        go[t] = _sigmoid(a[3 * h_dim:])
        hprev_all[t] = hprev
        cprev_all[t] = cprev
        c[t] = gf[t] * cprev + gi[t] * gg[t]
        hprev = go[t] * np.tanh(c[t])
        h[t] = hprev
        cprev = c[t]
    cache = {"u": u, "h": h, "c": c, "gi": gi, "gf": gf, "gg": gg, "go": go,
             "hprev": hprev_all, "cprev": cprev_all, "order": list(order)}
    return h, cache


def _backward_direction(dh_out, cache, wx, wh):
    """Gradient through one direction. Returns (du, dWx, dWh, db)."""
    u = cache["u"]
    t_len, h_dim = cache["h"].shape
    da_all = np.zeros((t_len, 4 * h_dim))
    dh_rec = np.zeros(h_dim)
    dc = np.zeros(h_dim)
    for t in reversed(cache["order"]):
        dh = dh_out[t] + dh_rec
        tc = np.tanh(cache["c"][t])
        do = dh * tc
        dc = dc + dh * cache["go"][t] * (1.0 - tc * tc)
        di = dc * cache["gg"][t]
        df = dc * cache["cprev"][t]
        dg = dc * cache["gi"][t]
        gi, gf, gg, go = cache["gi"][t], cache["gf"][t], cache["gg"][t], cache["go"][t]
        da = np.concatenate([
            di * gi * (1.0 - gi),
            df * gf * (1.0 - gf),
            dg * (1.0 - gg * gg),
            do * go * (1.0 - go),
        ])
        da_all[t] = da
        dh_rec = da @ wh.T
        dc = dc * gf
    du = da_all @ wx.T
    dwx = u.T @ da_all
    dwh = cache["hprev"].T @ da_all
    db = da_all.sum(axis=0)
    return du, dwx, dwh, db


def forward(model: TaggerModel, features, return_cache: bool = False,
            dropout_rng=None):
    """Run the network; returns per-tier (T, 3) probability rows.

    features: (T, F) array with F == config.input_dim.
    """
    cfg = model.config
    x = np.asarray(features, dtype=float)
    if x.ndim != 2 or x.shape[1] != cfg.input_dim:
        raise ValueError(
            f"feature width {x.shape[1] if x.ndim == 2 else '?'} does not match "
            f"model input_dim {cfg.input_dim}"
        )
    p = model.params
    z = x @ p["proj.W"] + p["proj.b"]
    layer_caches = []
    drop_masks = []
    cur = z
    for layer in range(cfg.layers):
        outs = []
        caches = {}
        for d in _directions(cfg):
            h, cache = _run_direction(
                cur, p[f"lstm{layer}.{d}.Wx"], p[f"lstm{layer}.{d}.Wh"],
                p[f"lstm{layer}.{d}.b"], reverse=(d == "bwd"))
            outs.append(h)
            caches[d] = cache
        cur = np.concatenate(outs, axis=1)
        if dropout_rng is not None and cfg.dropout > 0 and layer < cfg.layers - 1:
            mask = (dropout_rng.random(cur.shape) >= cfg.dropout) / (1.0 - cfg.dropout)
            cur = cur * mask
            drop_masks.append(mask)
        else:
            drop_masks.append(None)
        layer_caches.append(caches)
    logits = {}
    probs = {}
    for tier in SEGMENTS_TIERS:
        logits[tier] = cur @ p[f"head.{tier}.W"] + p[f"head.{tier}.b"]
        probs[tier] = _softmax(logits[tier]) if len(cur) else np.zeros((0, 3))
    if not return_cache:
        return probs
    cache = {"x": x, "z": z, "enc": cur, "layers": layer_caches,
             "logits": logits, "drop": drop_masks}
    return probs, cache


def loss(probs: dict, gold: dict, weights: dict) -> float:
    """Sum over tiers of the frame-mean weighted cross entropy -w_c log p_c."""
    total = 0.0
    for tier in SEGMENTS_TIERS:
        p = np.asarray(probs[tier], dtype=float)
        y = np.asarray(gold[tier], dtype=int)
        if p.shape[0] != y.shape[0]:
            raise ValueError(f"tier {tier!r}: {p.shape[0]} probability rows vs {y.shape[0]} tags")
        if len(y) == 0:
            continue
        w = np.asarray(weights[tier], dtype=float)
        picked = p[np.arange(len(y)), y]
        total += float(np.mean(-w[y] * np.log(picked)))
    return total


def class_weights_from_tags(tag_lists) -> tuple:
    """w_c = total / (3 * count_c) over a corpus of tag sequences for one tier."""
    counts = np.zeros(3)
    for tags in tag_lists:
        for t in tags:
            counts[t] += 1
    total = counts.sum()
    if (counts == 0).any():
        missing = [name for name, c in zip("BIO", counts) if c == 0]
        raise ValueError(f"corpus has no {'/'.join(missing)} tags; cannot derive class weights")
    return tuple(total / (3.0 * counts))


def loss_and_grads(model: TaggerModel, features, gold: dict, dropout_rng=None):
    """Full-sequence loss plus analytic gradients for every parameter."""
    cfg = model.config
    probs, cache = forward(model, features, return_cache=True, dropout_rng=dropout_rng)
    t_len = cache["x"].shape[0]
    p = model.params
    grads = {name: np.zeros_like(arr) for name, arr in p.items()}
    total = 0.0
    denc = np.zeros_like(cache["enc"])
    for tier in SEGMENTS_TIERS:
        y = np.asarray(gold[tier], dtype=int)
        if y.shape[0] != t_len:
            raise ValueError(f"tier {tier!r}: {t_len} frames vs {y.shape[0]} tags")
        if t_len == 0:
            continue
        w = np.asarray(cfg.class_weights[tier], dtype=float)
        logits = cache["logits"][tier]
        logz = np.log(np.exp(logits - logits.max(axis=1, keepdims=True)).sum(axis=1)) \
            + logits.max(axis=1)
        picked = logits[np.arange(t_len), y]
        total += float(np.mean(w[y] * (logz - picked)))
        dlogits = probs[tier] * w[y][:, None]
        dlogits[np.arange(t_len), y] -= w[y]
        dlogits /= t_len
        grads[f"head.{tier}.W"] += cache["enc"].T @ dlogits
        grads[f"head.{tier}.b"] += dlogits.sum(axis=0)
        denc += dlogits @ p[f"head.{tier}.W"].T
    h_dim = cfg.hidden_dim
    dcur = denc
    for layer in reversed(range(cfg.layers)):
        if cache["drop"][layer] is not None:
            dcur = dcur * cache["drop"][layer]
        du_total = None
        for di, d in enumerate(_directions(cfg)):
            dh_out = dcur[:, di * h_dim:(di + 1) * h_dim]
            du, dwx, dwh, db = _backward_direction(
                dh_out, cache["layers"][layer][d],
                p[f"lstm{layer}.{d}.Wx"], p[f"lstm{layer}.{d}.Wh"])
            grads[f"lstm{layer}.{d}.Wx"] += dwx
            grads[f"lstm{layer}.{d}.Wh"] += dwh
            grads[f"lstm{layer}.{d}.b"] += db
            du_total = du if du_total is None else du_total + du
        dcur = du_total
    grads["proj.W"] += cache["x"].T @ dcur
    grads["proj.b"] += dcur.sum(axis=0)
    return total, grads


@dataclass
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def train_step(model: TaggerModel, features, gold: dict, state: AdamState,
               dropout_rng=None) -> float:
    """One full-sequence gradient step with adaptive moment estimation, in place."""
    value, grads = loss_and_grads(model, features, gold, dropout_rng=dropout_rng)
    if not np.isfinite(value):
        raise RuntimeError(f"non-finite training loss {value!r}; aborting step")
    cfg = model.config
    if cfg.grad_clip > 0:
        norm = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
        if norm > cfg.grad_clip:
            scale = cfg.grad_clip / norm
            grads = {n: g * scale for n, g in grads.items()}
    state.step += 1
    t = state.step
    for name, g in grads.items():
        m = state.m.setdefault(name, np.zeros_like(g))
        v = state.v.setdefault(name, np.zeros_like(g))
        m += (1 - ADAM_BETA1) * (g - m)
        v += (1 - ADAM_BETA2) * (g * g - v)
        mhat = m / (1 - ADAM_BETA1 ** t)
        vhat = v / (1 - ADAM_BETA2 ** t)
        model.params[name] -= cfg.learning_rate * mhat / (np.sqrt(vhat) + ADAM_EPS)
    return value


def gradient_check(model: TaggerModel, features, gold: dict, eps: float = 1e-4,
                   grads: dict = None) -> float:
    """Max relative error between analytic and central-difference gradients.

    Intended for small models only (hidden <= 16, short sequences).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if grads is None:
        _, grads = loss_and_grads(model, features, gold)
    worst = 0.0
    for name, arr in model.params.items():
        flat = arr.reshape(-1)
        gflat = grads[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            lp, _ = loss_and_grads(model, features, gold)
            flat[i] = orig - eps
            lm, _ = loss_and_grads(model, features, gold)
            flat[i] = orig
            fd = (lp - lm) / (2 * eps)
            err = abs(gflat[i] - fd) / max(abs(gflat[i]), abs(fd), 1e-8)
            worst = max(worst, err)
    return worst


def _config_to_doc(cfg: TaggerConfig) -> dict:
    return {
        "input_dim": cfg.input_dim,
        "hidden_dim": cfg.hidden_dim,
        "layers": cfg.layers,
        "bidirectional": cfg.bidirectional,
        "learning_rate": cfg.learning_rate,
        "class_weights": {t: list(map(float, w)) for t, w in cfg.class_weights.items()},
        "seed": cfg.seed,
        "dropout": cfg.dropout,
        "grad_clip": cfg.grad_clip,
    }


def _config_from_doc(doc: dict) -> TaggerConfig:
    cfg = TaggerConfig(
        input_dim=doc["input_dim"],
        hidden_dim=doc["hidden_dim"],
        layers=doc["layers"],
        bidirectional=doc["bidirectional"],
        learning_rate=doc["learning_rate"],
        class_weights={t: tuple(w) for t, w in doc["class_weights"].items()},
        seed=doc["seed"],
        dropout=doc.get("dropout", 0.0),
        grad_clip=doc.get("grad_clip", 0.0),
    )
    cfg.validate()
    return cfg


def save_model(model: TaggerModel, path) -> None:
    """tagger-ckpt v1: manifest line, then one base64 float32-LE block per parameter."""
    shapes = _param_shapes(model.config)
    blobs = []
    digest = hashlib.sha256()
    for name, shape in shapes.items():
        arr = model.params[name]
        if arr.shape != shape:
            raise ValueError(f"parameter {name} has shape {arr.shape}, expected {shape}")
        raw = arr.astype("<f4").tobytes(order="C")
        digest.update(raw)
        blobs.append(base64.b64encode(raw).decode("ascii"))
    manifest = {
        "version": CKPT_VERSION,
        "config": _config_to_doc(model.config),
        "params": [{"name": n, "shape": list(s)} for n, s in shapes.items()],
        "param_count": param_count(model.config),
        "param_count_formula": PARAM_COUNT_FORMULA,
        "checksum": "sha256:" + digest.hexdigest(),
    }
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(manifest, separators=(",", ":")) + "\n")
        for blob in blobs:
            f.write(blob + "\n")


def load_model(path) -> TaggerModel:
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise ValueError("empty checkpoint file")
    manifest = json.loads(lines[0])
    if manifest.get("version") != CKPT_VERSION:
        raise ValueError(
            f"checkpoint version {manifest.get('version')!r} not supported; expected {CKPT_VERSION}")
    cfg = _config_from_doc(manifest["config"])
    expected = _param_shapes(cfg)
    declared = [(e["name"], tuple(e["shape"])) for e in manifest["params"]]
    if declared != list(expected.items()):
        raise ValueError("checkpoint parameter shapes do not match its config")
    if len(lines) - 1 < len(declared):
        raise ValueError("checkpoint checksum mismatch: missing parameter blocks (truncated?)")
    params = {}
    digest = hashlib.sha256()
    for (name, shape), blob in zip(declared, lines[1:]):
        raw = base64.b64decode(blob)
        n = int(np.prod(shape))
        if len(raw) != 4 * n:
            raise ValueError(f"parameter {name}: {len(raw)} bytes, expected {4 * n} (truncated?)")
        digest.update(raw)
        params[name] = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(shape)
    if "sha256:" + digest.hexdigest() != manifest["checksum"]:
        raise ValueError("checkpoint checksum mismatch: file corrupted or truncated")
    if param_count(cfg) != sum(int(np.prod(s)) for _, s in declared):
        raise ValueError("checkpoint parameter count does not match the config formula")
    return TaggerModel(cfg, params)
