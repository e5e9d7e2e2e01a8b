"""Experiment files: flat `key = value` lines with `#` comments.

`seed` may repeat to form a list; `rule` and `attack` take comma-separated
values and span a grid. Unknown keys are hard errors so typos never silently
fall back to defaults.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .aggregators import RULE_IDS
from .attacks import ATTACK_IDS
from .engine import SimConfig
from .models import MODEL_NAMES
from .partition import PARTITION_KINDS, PartitionSpec

DATASET_NAMES = ("mnist", "fmnist", "synth")

KNOWN_KEYS = (
    "dataset", "data_dir", "n", "delta", "rule", "attack", "z", "epsilon",
    "partition", "beta", "k", "model", "hidden", "lr", "momentum",
    "batch_size", "rounds", "eval_every", "seed", "alpha_t", "alpha_b",
    "bucket_s", "m", "trim_t",
)
REQUIRED_KEYS = ("dataset", "n", "delta", "rule", "attack", "rounds", "seed")


class ConfigError(ValueError):
    """Malformed experiment file: bad syntax, unknown key, bad value."""


@dataclass(frozen=True)
class ExperimentFile:
    dataset: str
    n: int
    delta: float
    rules: tuple[str, ...]
    attacks: tuple[str, ...]
    rounds: int
    seeds: tuple[int, ...]
    data_dir: Optional[str] = None
    z: float = 0.25
    epsilon: float = 0.1
    partition: str = "iid"
    beta: float = 0.1
    k: int = 3
    model: str = "softmax"
    hidden: int = 64
    lr: float = 0.01
    momentum: float = 0.9
    batch_size: int = 128
    eval_every: int = 10
    alpha_t: float = 1.0
    alpha_b: float = 1.0 / 9.0
    bucket_s: int = 2
    m: Optional[int] = None
    trim_t: Optional[int] = None

    def grid(self) -> list[tuple[str, str, int]]:
        """All (rule, attack, seed) cells in declaration order."""
        return [(r, a, s) for r in self.rules for a in self.attacks for s in self.seeds]

    def sim_config(self, rule: str, attack: str, seed: int) -> SimConfig:
        return SimConfig(
            n=self.n,
            delta=self.delta,
            rule=rule,
            attack=attack,
            z=self.z,
            epsilon=self.epsilon,
            partition=PartitionSpec(kind=self.partition, beta=self.beta, k=self.k),
            model=self.model,
            hidden=self.hidden,
            lr=self.lr,
            momentum=self.momentum,
            batch_size=self.batch_size,
            rounds=self.rounds,
            eval_every=self.eval_every,
            seed=seed,
            alpha_t=self.alpha_t,
            alpha_b=self.alpha_b,
            m=self.m,
            bucket_s=self.bucket_s,
            trim_t=self.trim_t,
        )

    def canonical_text(self) -> str:
        """Stable serialization used for hashing output directories."""
        pairs = [
            ("dataset", self.dataset),
            ("data_dir", self.data_dir or ""),
            ("n", self.n),
            ("delta", f"{self.delta:.10g}"),
            ("rule", ",".join(self.rules)),
            ("attack", ",".join(self.attacks)),
            ("z", f"{self.z:.10g}"),
            ("epsilon", f"{self.epsilon:.10g}"),
            ("partition", self.partition),
            ("beta", f"{self.beta:.10g}"),
            ("k", self.k),
            ("model", self.model),
            ("hidden", self.hidden),
            ("lr", f"{self.lr:.10g}"),
            ("momentum", f"{self.momentum:.10g}"),
            ("batch_size", self.batch_size),
            ("rounds", self.rounds),
            ("eval_every", self.eval_every),
            ("seed", ",".join(str(s) for s in self.seeds)),
            ("alpha_t", f"{self.alpha_t:.10g}"),
            ("alpha_b", f"{self.alpha_b:.10g}"),
            ("bucket_s", self.bucket_s),
            ("m", "" if self.m is None else self.m),
            ("trim_t", "" if self.trim_t is None else self.trim_t),
        ]
        return "\n".join(f"{k}={v}" for k, v in pairs) + "\n"


def _parse_int(key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"key {key!r}: expected an integer, got {raw!r}") from None


def _parse_float(key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"key {key!r}: expected a number, got {raw!r}") from None


def _parse_choice(key: str, raw: str, choices) -> str:
    if raw not in choices:
        raise ConfigError(f"key {key!r}: {raw!r} is not one of {tuple(choices)}")
    return raw


def parse_experiment_text(text: str) -> ExperimentFile:
    values: dict[str, str] = {}
    seeds: list[int] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        if key == "seed":
            seeds.append(_parse_int("seed", raw))
            continue
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} (only 'seed' may repeat)")
        values[key] = raw

    missing = [k for k in REQUIRED_KEYS if k != "seed" and k not in values]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    if not seeds:
        raise ConfigError("missing required keys: seed")

    dataset = _parse_choice("dataset", values["dataset"], DATASET_NAMES)
    data_dir = values.get("data_dir")
    if dataset != "synth" and not data_dir:
        raise ConfigError(f"dataset {dataset!r} requires data_dir")

    rules = tuple(r.strip() for r in values["rule"].split(",") if r.strip())
    if not rules:
        raise ConfigError("key 'rule': empty rule list")
    for r in rules:
        _parse_choice("rule", r, RULE_IDS)
    attacks = tuple(a.strip() for a in values["attack"].split(",") if a.strip())
    if not attacks:
        raise ConfigError("key 'attack': empty attack list")
    for a in attacks:
        _parse_choice("attack", a, ATTACK_IDS)

    def opt_int(key: str) -> Optional[int]:
        return _parse_int(key, values[key]) if key in values else None

    exp = ExperimentFile(
        dataset=dataset,
        data_dir=data_dir,
        n=_parse_int("n", values["n"]),
        delta=_parse_float("delta", values["delta"]),
        rules=rules,
        attacks=attacks,
        rounds=_parse_int("rounds", values["rounds"]),
        seeds=tuple(seeds),
        z=_parse_float("z", values["z"]) if "z" in values else 0.25,
        epsilon=_parse_float("epsilon", values["epsilon"]) if "epsilon" in values else 0.1,
        partition=_parse_choice("partition", values["partition"], PARTITION_KINDS) if "partition" in values else "iid",
        beta=_parse_float("beta", values["beta"]) if "beta" in values else 0.1,
        k=_parse_int("k", values["k"]) if "k" in values else 3,
        model=_parse_choice("model", values["model"], MODEL_NAMES) if "model" in values else "softmax",
        hidden=_parse_int("hidden", values["hidden"]) if "hidden" in values else 64,
        lr=_parse_float("lr", values["lr"]) if "lr" in values else 0.01,
        momentum=_parse_float("momentum", values["momentum"]) if "momentum" in values else 0.9,
        batch_size=_parse_int("batch_size", values["batch_size"]) if "batch_size" in values else 128,
        eval_every=_parse_int("eval_every", values["eval_every"]) if "eval_every" in values else 10,
        alpha_t=_parse_float("alpha_t", values["alpha_t"]) if "alpha_t" in values else 1.0,
        alpha_b=_parse_float("alpha_b", values["alpha_b"]) if "alpha_b" in values else 1.0 / 9.0,
        bucket_s=_parse_int("bucket_s", values["bucket_s"]) if "bucket_s" in values else 2,
        m=opt_int("m"),
        trim_t=opt_int("trim_t"),
    )
    # Fail fast on anything SimConfig would reject, before any run starts.
    for rule, attack, seed in exp.grid():
        exp.sim_config(rule, attack, seed)
    return exp


def parse_experiment_file(path) -> ExperimentFile:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_experiment_text(text)
