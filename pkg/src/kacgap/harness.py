"""Run configuration and the seeded, thread-parallel simulation driver.

Every (degree, trial) task is pure: its coefficients come from a counter-based
stream keyed by (seed, degree, trial), so the output file does not depend on
the number of worker threads.  Workers hand results back through
``Executor.map``, which preserves submission order; the calling thread is the
single writer.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterator

from . import __version__
from .gap_process import (
    GapRecord,
    count_X_n,
    disk_min_gap,
    double_root_count,
    inversion_violations,
    min_gap,
    origin_double_root,
    pair_gaps,
)
from .intervals import IntervalSet
from .polyeval import check_good_event
from .rootfinder import SolverOptions, find_roots
from .sampling import parse_law, sample_trial

HEADER_KEY = "kacgap_header"
# fields that change how a run executes but not what it produces
RUNTIME_FIELDS = ("threads", "out")


def _parse_bool(s: str) -> bool:
    s = s.strip().lower()
    if s in ("1", "true", "on", "yes"):
        return True
    if s in ("0", "false", "off", "no"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def parse_u_spec(text: str) -> tuple[tuple[str, str], ...]:
    """``id=a:b[+c:d];id2=...`` or a bare ``a:b,c:d`` list (ids U0, U1, ...).

    The bare form gives one interval set per comma-separated item.
    """
    text = text.strip()
    if not text:
        return ()
    if "=" not in text:
        return tuple((f"U{i}", str(IntervalSet.parse(item))) for i, item in enumerate(text.split(",")))
    out = []
    for item in text.split(";"):
        uid, body = item.split("=", 1)
        out.append((uid.strip(), str(IntervalSet.parse(body.replace("+", ",")))))
    return tuple(out)


def format_u_spec(u_sets) -> str:
    return ";".join(f"{uid}={body.replace(',', '+')}" for uid, body in u_sets)


@dataclass(frozen=True)
class RunConfig:
    law: str = "gaussian"
    degrees: tuple[int, ...] = (1000,)
    trials: int = 100
    seed: int = 0
    K: float = 10.0
    u_sets: tuple[tuple[str, str], ...] = (("U0", "0:1"), ("U1", "1:2"))
    beta: float = 0.3
    a_exponent: float = 0.15
    residual_tol: float = 1e-10
    max_iters: int = 200
    polish: bool = True
    gap_cutoff: float = 10.0
    r0: float = 0.8
    out: str = "results.jsonl"
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "degrees", tuple(int(d) for d in self.degrees))
        object.__setattr__(self, "u_sets", tuple((str(a), str(IntervalSet.parse(b))) for a, b in self.u_sets))
        parse_law(self.law)
        if not self.degrees or min(self.degrees) < 2:
            raise ValueError("degrees must be >= 2")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        ids = [u for u, _ in self.u_sets]
        if len(set(ids)) != len(ids):
            raise ValueError(f"interval ids must be unique: {ids}")
        if self.K <= 0 or not 0 < self.r0 < 1 or self.threads < 1:
            raise ValueError("need K > 0, 0 < r0 < 1 and threads >= 1")

    # -- serialization -------------------------------------------------
    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["degrees"] = list(self.degrees)
        d["u_sets"] = [list(u) for u in self.u_sets]
        return d

    def serialize(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "degrees":
                s = ",".join(map(str, v))
            elif f.name == "u_sets":
                s = format_u_spec(v)
            elif isinstance(v, bool):
                s = "true" if v else "false"
            elif isinstance(v, float):
                s = repr(v)
            else:
                s = str(v)
            lines.append(f"{f.name}={s}")
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str, base: "RunConfig | None" = None) -> "RunConfig":
        """key=value lines; blank lines and ``#`` comments ignored; unknown keys rejected."""
        kinds = {f.name: f.type for f in fields(cls)}
        updates = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"expected key=value, got {raw!r}")
            k, v = (s.strip() for s in line.split("=", 1))
            if k not in kinds:
                raise ValueError(f"unknown config key {k!r}")
            updates[k] = _coerce(k, v)
        return replace(base or cls(), **updates)

    def config_hash(self) -> str:
        d = self.to_dict()
        for k in RUNTIME_FIELDS:
            d.pop(k)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    # -- derived -------------------------------------------------------
    @property
    def intervals(self) -> dict[str, IntervalSet]:
        return {uid: IntervalSet.parse(body) for uid, body in self.u_sets}

    @property
    def solver(self) -> SolverOptions:
        return SolverOptions(residual_tol=self.residual_tol, max_iters=self.max_iters, polish=self.polish)

    def tasks(self) -> list[tuple[int, int]]:
        return [(n, t) for n in self.degrees for t in range(self.trials)]


def _coerce(key: str, v: str):
    if key == "degrees":
        return tuple(int(x) for x in v.split(",") if x.strip())
    if key == "u_sets":
        return parse_u_spec(v)
    if key == "polish":
        return _parse_bool(v)
    if key in ("trials", "seed", "max_iters", "threads"):
        return int(v)
    if key in ("law", "out"):
        return v
    return float(v)


def header_record(cfg: RunConfig) -> dict:
    d = cfg.to_dict()
    for k in RUNTIME_FIELDS:
        d.pop(k)
    return {HEADER_KEY: True, "version": __version__, "config_hash": cfg.config_hash(), "config": d}


def header_line(cfg: RunConfig) -> str:
    return json.dumps(header_record(cfg), separators=(",", ":"))


# --------------------------------------------------------------------------
# one trial

def run_trial(cfg: RunConfig, n: int, trial: int) -> GapRecord:
    law = parse_law(cfg.law)
    poly = sample_trial(law, n, cfg.seed, trial)
    if not poly.coeffs.any():
        return _zero_polynomial_record(cfg, poly, trial)
    rs = find_roots(poly, cfg.solver)
    U = cfg.intervals
    good = check_good_event(poly, cfg.K, n)
    extra = {
        "converged": rs.converged,
        "degraded": not rs.converged,
        "iterations": rs.iterations,
        "algebraic_degree": rs.algebraic_degree,
        "zero_roots": rs.zero_roots,
        "double_roots": double_root_count(rs),
        "origin_double_root": origin_double_root(rs),
        "inversion_violations": inversion_violations(rs),
        "good_event": good.holds,
        "version": __version__,
    }
    return GapRecord(
        trial=trial,
        seed=poly.seed,
        n=n,
        law=law.tag,
        m_n_scaled=min_gap(rs, n),
        gaps=[float(g) for g in pair_gaps(rs, n, cfg.K, cfg.gap_cutoff)],
        x_counts={uid: count_X_n(rs, cfg.K, u, n) for uid, u in U.items()},
        disk_min_gap=disk_min_gap(rs, cfg.r0),
        max_residual=rs.max_residual,
        extra=extra,
    )


def _zero_polynomial_record(cfg: RunConfig, poly, trial: int) -> GapRecord:
    """Atom-at-zero laws can draw f = 0 at small n; the trial is kept, marked degraded."""
    return GapRecord(
        trial=trial, seed=poly.seed, n=poly.n, law=poly.law.tag, m_n_scaled=0.0, gaps=[],
        x_counts={uid: 0 for uid, _ in cfg.u_sets}, disk_min_gap=0.0, max_residual=0.0,
        extra={"converged": False, "degraded": True, "zero_polynomial": True, "version": __version__},
    )


# --------------------------------------------------------------------------
# files

@dataclass
class SimulationResult:
    path: Path
    header: dict
    records: list[GapRecord] = field(default_factory=list)

    @property
    def degraded(self) -> int:
        return sum(bool(r.extra.get("degraded")) for r in self.records)


def read_results(path) -> SimulationResult:
    path = Path(path)
    with path.open() as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path} is empty")
    header = json.loads(lines[0])
    if not header.get(HEADER_KEY):
        raise ValueError(f"{path} has no header line")
    return SimulationResult(path, header, [GapRecord.from_json(l) for l in lines[1:] if l.strip()])


def _resume_point(path: Path, cfg: RunConfig, tasks: list[tuple[int, int]]) -> int:
    """Number of already-written records; truncates a torn final line."""
    with path.open("rb") as fh:
        data = fh.read()
    end = data.rfind(b"\n") + 1
    lines = data[:end].decode().splitlines()
    if not lines or json.loads(lines[0]).get("config_hash") != cfg.config_hash():
        raise ValueError(f"{path} was produced by a different configuration")
    done = 0
    for line, (n, t) in zip(lines[1:], tasks):
        d = json.loads(line)
        if (d["n"], d["trial"]) != (n, t):
            break
        done += 1
    keep = len(("\n".join(lines[: done + 1]) + "\n").encode())
    with path.open("r+b") as fh:
        fh.truncate(keep)
    return done


def iter_records(cfg: RunConfig, tasks, threads: int | None = None) -> Iterator[GapRecord]:
    threads = threads or cfg.threads
    if threads == 1:
        for n, t in tasks:
            yield run_trial(cfg, n, t)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        # map yields in submission order whatever the completion order
        yield from pool.map(lambda task: run_trial(cfg, *task), tasks)


def run_simulate(cfg: RunConfig, out=None, resume: bool = False, stop_after: int | None = None) -> Path:
    """Write header + one record per (degree, trial) in (degree, trial) order.

    ``stop_after`` ends the run after that many new records (used to test
    interruption and resume).
    """
    path = Path(out or cfg.out)
    tasks = cfg.tasks()
    if resume and path.exists():
        done = _resume_point(path, cfg, tasks)
        fh = path.open("a")
    else:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True)
        done = 0
        fh = path.open("w")
        fh.write(header_line(cfg) + "\n")
    todo = tasks[done:]
    if stop_after is not None:
        todo = todo[:stop_after]
    with fh:
        for rec in iter_records(cfg, todo):
            fh.write(rec.to_json() + "\n")
            fh.flush()
    return path


def cache_dir() -> Path:
    return Path(os.environ.get("KACGAP_CACHE", ".kacgap_cache"))


def cached_simulation(cfg: RunConfig, threads: int | None = None) -> SimulationResult:
    """Run (or reuse) a simulation stored under the cache keyed by config hash."""
    d = cache_dir()
    d.mkdir(parents=True, exist_ok=True)
    path = d / f"{cfg.config_hash()}.jsonl"
    if path.exists():
        res = read_results(path)
        if len(res.records) == len(cfg.tasks()):
            return res
    run_simulate(replace(cfg, threads=threads or cfg.threads), out=path, resume=path.exists())
    return read_results(path)


def finite_or_none(x: float):
    return None if x is None or (isinstance(x, float) and not math.isfinite(x)) else x
