"""Job files: strict schema, parsing into evaluator calls, and report serialisation."""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from importlib import resources
from typing import Any

import jsonschema

from . import formulae
from .arith import PeriodicSequence
from .formulae import IdentityResult, TruncationParams
from .smoothfn import BivariateFunction, SmoothFunction

IDENTITIES = (
    "abel", "euler", "euler2d", "residue_class", "dilated", "dilated_residue",
    "em_chi", "em_divisor", "em_divisor_chi", "poisson_chi", "poisson_divisor", "poisson_divisor_chi",
)

# weight fields each identity needs; anything else besides the common keys is rejected
REQUIRED = {
    "abel": ("nodes", "coeffs"),
    "euler": (),
    "euler2d": ("interval_y",),
    "residue_class": ("r", "k"),
    "dilated": ("m",),
    "dilated_residue": ("r", "k", "m"),
    "em_chi": ("chi",),
    "em_divisor": (),
    "em_divisor_chi": ("chi",),
    "poisson_chi": ("chi",),
    "poisson_divisor": (),
    "poisson_divisor_chi": ("chi",),
}
OPTIONAL = {"abel": ("lambda0",), "em_chi": ("k",), "em_divisor_chi": ("k",), "poisson_chi": ("k",),
            "poisson_divisor_chi": ("k",)}
COMMON = ("identity", "f", "interval", "truncation", "sweep", "tolerance", "max_order")

DEFAULT_TOLERANCE = 1e-6


def load_schema() -> dict:
    return json.loads(resources.files("arithsum").joinpath("job_schema.json").read_text("utf-8"))


class JobError(ValueError):
    """The job file does not describe a valid job; ``path`` is a JSON path."""

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


def _schema_error(err: jsonschema.ValidationError) -> JobError:
    path = err.json_path
    if err.validator == "additionalProperties" and isinstance(err.instance, dict):
        known = set(err.schema.get("properties", {}))
        extra = sorted(k for k in err.instance if k not in known)
        if extra:
            return JobError(f"{path}.{extra[0]}", f"unknown field {extra[0]!r}")
    return JobError(path, err.message)


def validate(doc: Any) -> None:
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: (len(e.path), e.json_path))
    if errors:
        raise _schema_error(errors[0])
    ident = doc["identity"]
    allowed = set(COMMON) | set(REQUIRED[ident]) | set(OPTIONAL.get(ident, ()))
    for key in doc:
        if key not in allowed:
            raise JobError(f"$.{key}", f"field {key!r} is not used by identity {ident!r}")
    for key in REQUIRED[ident]:
        if key not in doc:
            raise JobError("$", f"identity {ident!r} requires field {key!r}")
    if "chi" in doc and "k" in doc and doc["k"] != len(doc["chi"]):
        raise JobError("$.k", f"k = {doc['k']} but chi has {len(doc['chi'])} values")
    if "nodes" in doc and len(doc["nodes"]) != len(doc["coeffs"]):
        raise JobError("$.coeffs", "nodes and coeffs differ in length")
    if "sweep" in doc and list(doc["sweep"]) != sorted(doc["sweep"]):
        raise JobError("$.sweep", "N values must be ascending")


def dec(v) -> float:
    """Decimal string (or JSON number) to the nearest binary float."""
    return float(v)


@dataclass(frozen=True)
class Job:
    doc: dict
    identity: str
    params: TruncationParams
    a: float
    b: float
    tolerance: float

    @classmethod
    def from_doc(cls, doc: Any) -> "Job":
        validate(doc)
        t = doc.get("truncation", {})
        params = TruncationParams(R=int(t.get("R", 2)), N=int(t.get("N", 100)), quad_tol=dec(t.get("quad_tol", "1e-12")))
        a, b = (dec(v) for v in doc["interval"])
        if not a < b:
            raise JobError("$.interval", "need a < b")
        return cls(doc, doc["identity"], params, a, b, dec(doc.get("tolerance", DEFAULT_TOLERANCE)))

    @classmethod
    def load(cls, path: str) -> "Job":
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise JobError("$", f"cannot read job file: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise JobError("$", f"invalid JSON: {exc.msg} at line {exc.lineno} column {exc.colno}") from exc
        return cls.from_doc(doc)

    def with_N(self, N: int) -> "Job":
        p = self.params
        return Job(self.doc, self.identity, TruncationParams(p.R, N, p.quad_tol), self.a, self.b, self.tolerance)

    @property
    def chi(self) -> PeriodicSequence | None:
        if "chi" not in self.doc:
            return None
        return PeriodicSequence(tuple(complex(dec(re), dec(im)) for re, im in self.doc["chi"]))

    def function(self):
        src = self.doc["f"]
        if self.identity == "euler2d":
            return BivariateFunction.parse(src)
        return SmoothFunction.parse(src, self.a, self.b, int(self.doc.get("max_order", 16)))

    def run(self, workers: int = 1) -> IdentityResult:
        d, p, a, b = self.doc, self.params, self.a, self.b
        f = self.function()
        ident = self.identity
        if ident == "abel":
            nodes = [dec(v) for v in d["nodes"]]
            coeffs = [complex(dec(re), dec(im)) for re, im in d["coeffs"]]
            lam0 = dec(d["lambda0"]) if "lambda0" in d else None
            return formulae.abel_sum(nodes, coeffs, f, a, b, p, lambda0=lam0)
        if ident == "euler":
            return formulae.euler_sum(f, a, b, p)
        if ident == "euler2d":
            c, dd = (dec(v) for v in d["interval_y"])
            return formulae.euler_sum_2d(f, a, b, c, dd, p)
        if ident == "residue_class":
            return formulae.residue_class_sum(f, a, b, d["r"], d["k"], p)
        if ident == "dilated":
            return formulae.dilated_sum(f, a, b, d["m"], p)
        if ident == "dilated_residue":
            return formulae.dilated_residue_sum(f, a, b, d["r"], d["k"], d["m"], p)
        if ident == "em_chi":
            return formulae.euler_maclaurin_chi(self.chi, f, a, b, p)
        if ident == "em_divisor":
            return formulae.euler_maclaurin_divisor(f, a, b, p, workers=workers)
        if ident == "em_divisor_chi":
            return formulae.euler_maclaurin_divisor_chi(self.chi, f, a, b, p, workers=workers)
        if ident == "poisson_chi":
            return formulae.poisson_chi(self.chi, f, a, b, p)
        if ident == "poisson_divisor":
            return formulae.poisson_divisor(f, a, b, p, workers=workers)
        if ident == "poisson_divisor_chi":
            return formulae.poisson_divisor_chi(self.chi, f, a, b, p, workers=workers)
        raise AssertionError(ident)


def threshold(result: IdentityResult, c: float) -> float:
    """Acceptance bound c (1 + |lhs|)."""
    return c * (1.0 + abs(result.lhs))


def passes(result: IdentityResult, c: float) -> bool:
    return result.residual <= threshold(result, c) and result.converged


# ---------------------------------------------------------------------------
# reports


def fmt(x: float) -> str:
    """17 significant digits: parses back to the identical float."""
    return format(float(x), ".17g")


def cfmt(z: complex) -> dict:
    return {"re": fmt(z.real), "im": fmt(z.imag)}


def report(job: Job, result: IdentityResult, c: float, wall_ms: float | None = None) -> dict:
    out = {
        "job": job.doc,
        "identity": result.identity,
        "lhs": cfmt(result.lhs),
        "rhs": cfmt(result.rhs),
        "residual": fmt(result.residual),
        "threshold": fmt(threshold(result, c)),
        "pass": passes(result, c),
        "terms": {k: cfmt(v) for k, v in result.terms.items()},
        "diagnostics": {
            "tail_estimate": fmt(result.diagnostics.tail_estimate),
            "quad_error": fmt(result.diagnostics.quad_error),
            "nonconverged": list(result.diagnostics.nonconverged),
        },
    }
    if wall_ms is not None:
        out["wall_ms"] = fmt(wall_ms)
    return out


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, ensure_ascii=False)


def timed_run(job: Job, workers: int = 1) -> tuple[IdentityResult, float]:
    t0 = time.perf_counter()
    res = job.run(workers)
    return res, 1000.0 * (time.perf_counter() - t0)


def parse_complex(d: dict) -> complex:
    return complex(float(d["re"]), float(d["im"]))


def is_finite(z: complex) -> bool:
    return math.isfinite(z.real) and math.isfinite(z.imag)
