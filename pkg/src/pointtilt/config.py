"""Scenario config documents: YAML in, validated ScenarioConfig out, and back.

The schema is fixed in docs/config_schema.md.  Parse errors carry the path of
the offending field; invariant violations surface with the same paths the
domain types use.
"""

from __future__ import annotations

from typing import Any, Mapping, Optional

import yaml

from .errors import InvariantError, SchemaError
from .families import (
    AbsLink,
    AffineSeq,
    AlphaFamily,
    ClippedLinearLink,
    ConstantSeq,
    ExplicitSeq,
    GeometricSeq,
    Link,
    PolynomialSeq,
    ReluLink,
    Seq,
)
from .intensity import (
    AffineCount,
    AgeDecayVector,
    BoxKernel,
    Constant,
    ConstMatrix,
    ConstVector,
    CountPowerVector,
    ExactAffine,
    ExpKernel,
    Hawkes,
    IntensitySpec,
    LinearSDE,
    PiecewiseBirth,
    ResetOU,
    dimension,
)
from .model import ScenarioConfig

_TOP_KEYS = {"lambda", "mu", "horizon", "window", "n_paths", "seed",
             "event_cap", "quadrature_step", "options", "output"}


def _require(obj: Mapping, key: str, path: str) -> Any:
    if key not in obj:
        raise SchemaError(f"{path}.{key}" if path else key, "missing required field")
    return obj[key]


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(path, f"expected a number, got {type(value).__name__}")
    return float(value)


def _integer(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(path, f"expected an integer, got {type(value).__name__}")
    return value


def _mapping(value: Any, path: str) -> Mapping:
    if not isinstance(value, Mapping):
        raise SchemaError(path, f"expected a mapping, got {type(value).__name__}")
    return value


def _parse_seq(obj: Any, path: str) -> Seq:
    obj = _mapping(obj, path)
    family = _require(obj, "family", path)
    if family == "constant":
        return ConstantSeq(c=_number(_require(obj, "c", path), f"{path}.c"))
    if family == "affine":
        return AffineSeq(a=_number(_require(obj, "a", path), f"{path}.a"),
                         b=_number(_require(obj, "b", path), f"{path}.b"))
    if family == "polynomial":
        return PolynomialSeq(c=_number(_require(obj, "c", path), f"{path}.c"),
                             p=_number(_require(obj, "p", path), f"{path}.p"))
    if family == "geometric":
        return GeometricSeq(c=_number(_require(obj, "c", path), f"{path}.c"),
                            r=_number(_require(obj, "r", path), f"{path}.r"))
    if family == "explicit":
        head = _require(obj, "head", path)
        if not isinstance(head, list):
            raise SchemaError(f"{path}.head", "expected a list of numbers")
        return ExplicitSeq(head=tuple(_number(h, f"{path}.head[{i}]") for i, h in enumerate(head)),
                           tail=_parse_seq(_require(obj, "tail", path), f"{path}.tail"))
    raise SchemaError(f"{path}.family", f"unknown sequence family {family!r}")


def _seq_to_dict(seq: Seq) -> dict:
    if isinstance(seq, ConstantSeq):
        return {"family": "constant", "c": seq.c}
    if isinstance(seq, AffineSeq):
        return {"family": "affine", "a": seq.a, "b": seq.b}
    if isinstance(seq, PolynomialSeq):
        return {"family": "polynomial", "c": seq.c, "p": seq.p}
    if isinstance(seq, GeometricSeq):
        return {"family": "geometric", "c": seq.c, "r": seq.r}
    if isinstance(seq, ExplicitSeq):
        return {"family": "explicit", "head": list(seq.head), "tail": _seq_to_dict(seq.tail)}
    raise TypeError(f"not a sequence family: {seq!r}")


def _parse_link(obj: Any, path: str) -> Link:
    if obj == "abs":
        return AbsLink()
    if obj == "relu":
        return ReluLink()
    if isinstance(obj, Mapping):
        kind = _require(obj, "kind", path)
        if kind == "clipped-linear":
            return ClippedLinearLink(slope=_number(_require(obj, "slope", path), f"{path}.slope"),
                                     cap=_number(_require(obj, "cap", path), f"{path}.cap"))
        raise SchemaError(f"{path}.kind", f"unknown link kind {kind!r}")
    raise SchemaError(path, "expected 'abs', 'relu', or a clipped-linear mapping")


def _link_to_obj(link: Link):
    if isinstance(link, AbsLink):
        return "abs"
    if isinstance(link, ReluLink):
        return "relu"
    if isinstance(link, ClippedLinearLink):
        return {"kind": "clipped-linear", "slope": link.slope, "cap": link.cap}
    raise TypeError(f"not a link: {link!r}")


def _parse_kernel(obj: Any, path: str):
    if obj is None:
        return None
    obj = _mapping(obj, path)
    kind = _require(obj, "kind", path)
    if kind == "exponential":
        return ExpKernel(amplitude=_number(_require(obj, "amplitude", path), f"{path}.amplitude"),
                         decay=_number(_require(obj, "decay", path), f"{path}.decay"))
    if kind == "box":
        return BoxKernel(level=_number(_require(obj, "level", path), f"{path}.level"),
                         support=_number(_require(obj, "support", path), f"{path}.support"))
    raise SchemaError(f"{path}.kind", f"unknown kernel kind {kind!r}")


def _kernel_to_obj(kernel):
    if kernel is None:
        return None
    if isinstance(kernel, ExpKernel):
        return {"kind": "exponential", "amplitude": kernel.amplitude, "decay": kernel.decay}
    if isinstance(kernel, BoxKernel):
        return {"kind": "box", "level": kernel.level, "support": kernel.support}
    raise TypeError(f"not a kernel: {kernel!r}")


def _parse_vector_map(obj: Any, path: str):
    obj = _mapping(obj, path)
    kind = _require(obj, "kind", path)
    if kind == "constant":
        values = _require(obj, "values", path)
        return ConstVector(values=tuple(_number(v, f"{path}.values[{i}]")
                                        for i, v in enumerate(values)))
    if kind == "age_decay":
        base = _require(obj, "base", path)
        amp = _require(obj, "amp", path)
        return AgeDecayVector(base=tuple(_number(v, f"{path}.base[{i}]") for i, v in enumerate(base)),
                              amp=tuple(_number(v, f"{path}.amp[{i}]") for i, v in enumerate(amp)),
                              rate=_number(_require(obj, "rate", path), f"{path}.rate"))
    if kind == "count_power":
        coef = _require(obj, "coef", path)
        return CountPowerVector(coef=tuple(_number(v, f"{path}.coef[{i}]") for i, v in enumerate(coef)),
                                delta=_number(_require(obj, "delta", path), f"{path}.delta"))
    raise SchemaError(f"{path}.kind", f"unknown coefficient kind {kind!r}")


def _vector_map_to_obj(vm):
    if isinstance(vm, ConstVector):
        return {"kind": "constant", "values": list(vm.values)}
    if isinstance(vm, AgeDecayVector):
        return {"kind": "age_decay", "base": list(vm.base), "amp": list(vm.amp), "rate": vm.rate}
    if isinstance(vm, CountPowerVector):
        return {"kind": "count_power", "coef": list(vm.coef), "delta": vm.delta}
    raise TypeError(f"not a vector map: {vm!r}")


def _parse_matrix_map(obj: Any, path: str):
    obj = _mapping(obj, path)
    kind = _require(obj, "kind", path)
    if kind == "constant":
        rows = _require(obj, "rows", path)
        return ConstMatrix(rows=tuple(
            tuple(_number(v, f"{path}.rows[{i}][{j}]") for j, v in enumerate(row))
            for i, row in enumerate(rows)))
    raise SchemaError(f"{path}.kind", f"unknown coefficient kind {kind!r}")


def _matrix_map_to_obj(mm):
    if isinstance(mm, ConstMatrix):
        return {"kind": "constant", "rows": [list(r) for r in mm.rows]}
    raise TypeError(f"not a matrix map: {mm!r}")


def parse_intensity(obj: Any, path: str) -> IntensitySpec:
    obj = _mapping(obj, path)
    kind = _require(obj, "type", path)
    if kind == "constant":
        rates = _require(obj, "rates", path)
        if not isinstance(rates, list) or not rates:
            raise SchemaError(f"{path}.rates", "expected a nonempty list of rates")
        return Constant(rates=tuple(_number(r, f"{path}.rates[{i}]") for i, r in enumerate(rates)))
    if kind in ("affine_count", "exact_affine"):
        cls = AffineCount if kind == "affine_count" else ExactAffine
        return cls(alpha=_number(_require(obj, "alpha", path), f"{path}.alpha"),
                   beta=_number(_require(obj, "beta", path), f"{path}.beta"),
                   dimension=_integer(obj.get("dimension", 1), f"{path}.dimension"))
    if kind == "hawkes":
        phi = _require(obj, "phi", path)
        if not isinstance(phi, list):
            phi = [phi]
        links = tuple(_parse_link(p, f"{path}.phi[{i}]") for i, p in enumerate(phi))
        kernels_obj = _require(obj, "kernels", path)
        if isinstance(kernels_obj, Mapping):
            kernels_obj = [[kernels_obj]]
        kernels = tuple(
            tuple(_parse_kernel(k, f"{path}.kernels[{i}][{j}]") for j, k in enumerate(row))
            for i, row in enumerate(kernels_obj))
        return Hawkes(links=links, kernels=kernels)
    if kind == "piecewise_birth":
        seq = _parse_seq(_require(obj, "alphas", path), f"{path}.alphas")
        return PiecewiseBirth(alphas=AlphaFamily(seq=seq))
    if kind == "reset_ou":
        return ResetOU(xi=_parse_seq(_require(obj, "xi", path), f"{path}.xi"),
                       a=_parse_seq(_require(obj, "a", path), f"{path}.a"),
                       b=_parse_seq(_require(obj, "b", path), f"{path}.b"),
                       sigma=_number(_require(obj, "sigma", path), f"{path}.sigma"))
    if kind == "linear_sde":
        x0 = _require(obj, "x0", path)
        return LinearSDE(
            drift_add=_parse_vector_map(_require(obj, "drift", path), f"{path}.drift"),
            drift_lin=_parse_matrix_map(_require(obj, "reversion", path), f"{path}.reversion"),
            noise=_parse_matrix_map(_require(obj, "noise", path), f"{path}.noise"),
            link=_parse_link(_require(obj, "link", path), f"{path}.link"),
            x0=tuple(_number(v, f"{path}.x0[{i}]") for i, v in enumerate(x0)))
    raise SchemaError(f"{path}.type", f"unknown intensity type {kind!r}")


def intensity_to_dict(spec: IntensitySpec) -> dict:
    if isinstance(spec, Constant):
        return {"type": "constant", "rates": list(spec.rates)}
    if isinstance(spec, (AffineCount, ExactAffine)):
        kind = "affine_count" if isinstance(spec, AffineCount) else "exact_affine"
        return {"type": kind, "alpha": spec.alpha, "beta": spec.beta, "dimension": spec.dimension}
    if isinstance(spec, Hawkes):
        return {"type": "hawkes",
                "phi": [_link_to_obj(lk) for lk in spec.links],
                "kernels": [[_kernel_to_obj(k) for k in row] for row in spec.kernels]}
    if isinstance(spec, PiecewiseBirth):
        return {"type": "piecewise_birth", "alphas": _seq_to_dict(spec.alphas.seq)}
    if isinstance(spec, ResetOU):
        return {"type": "reset_ou", "xi": _seq_to_dict(spec.xi), "a": _seq_to_dict(spec.a),
                "b": _seq_to_dict(spec.b), "sigma": spec.sigma}
    if isinstance(spec, LinearSDE):
        return {"type": "linear_sde", "drift": _vector_map_to_obj(spec.drift_add),
                "reversion": _matrix_map_to_obj(spec.drift_lin),
                "noise": _matrix_map_to_obj(spec.noise),
                "link": _link_to_obj(spec.link), "x0": list(spec.x0)}
    raise TypeError(f"not an intensity spec: {spec!r}")


def parse_config(text: str) -> ScenarioConfig:
    """Parse and fully validate a scenario document (YAML or JSON)."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SchemaError("", f"not a well-formed document: {exc}") from None
    if not isinstance(doc, Mapping):
        raise SchemaError("", "top level must be a mapping")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise SchemaError(sorted(unknown)[0], "unknown top-level key")

    horizon = _number(_require(doc, "horizon", ""), "horizon")
    n_paths = _integer(_require(doc, "n_paths", ""), "n_paths")
    seed = _integer(_require(doc, "seed", ""), "seed")

    mu_obj = doc.get("mu")
    lambda_obj = doc.get("lambda")
    if mu_obj is None and lambda_obj is None:
        raise SchemaError("mu", "at least one of lambda and mu is required")
    mu_spec = parse_intensity(mu_obj, "mu") if mu_obj is not None else None
    if lambda_obj is not None:
        lambda_spec = parse_intensity(lambda_obj, "lambda")
    else:
        d = dimension(mu_spec)
        lambda_spec = Constant(rates=(1.0,) * d)
    if mu_spec is None:
        mu_spec = lambda_spec
    if dimension(lambda_spec) != dimension(mu_spec):
        raise InvariantError("mu", "lambda and mu must have the same dimension")

    window: Optional[tuple[float, float]] = None
    if doc.get("window") is not None:
        raw = doc["window"]
        if not (isinstance(raw, list) and len(raw) == 2):
            raise SchemaError("window", "expected [u, t]")
        u = _number(raw[0], "window[0]")
        t = _number(raw[1], "window[1]")
        if u > t:
            raise InvariantError("window", "u <= t required")
        window = (u, t)

    event_cap = _integer(doc.get("event_cap", 100_000), "event_cap")
    default_step = min(0.01, horizon / 20.0)
    quadrature_step = _number(doc.get("quadrature_step", default_step), "quadrature_step")

    options = doc.get("options") or {}
    if not isinstance(options, Mapping):
        raise SchemaError("options", "expected a mapping")
    estimator = options.get("estimator")
    if estimator is not None and not isinstance(estimator, str):
        raise SchemaError("options.estimator", "expected a string")

    output = doc.get("output")
    if output is not None and not isinstance(output, str):
        raise SchemaError("output", "expected a string path")

    return ScenarioConfig(lambda_spec=lambda_spec, mu_spec=mu_spec, horizon=horizon,
                          n_paths=n_paths, master_seed=seed, window=window,
                          event_cap=event_cap, quadrature_step=quadrature_step,
                          estimator=estimator, output_path=output, options=dict(options))


def config_to_dict(config: ScenarioConfig) -> dict:
    doc: dict[str, Any] = {
        "lambda": intensity_to_dict(config.lambda_spec),
        "mu": intensity_to_dict(config.mu_spec),
        "horizon": config.horizon,
        "n_paths": config.n_paths,
        "seed": config.master_seed,
        "event_cap": config.event_cap,
        "quadrature_step": config.quadrature_step,
    }
    if config.window is not None:
        doc["window"] = [config.window[0], config.window[1]]
    if config.options:
        doc["options"] = dict(config.options)
    if config.output_path is not None:
        doc["output"] = config.output_path
    return doc


def serialize_config(config: ScenarioConfig) -> str:
    """Canonical YAML form; parse(serialize(c)) == c."""
    return yaml.safe_dump(config_to_dict(config), sort_keys=True, default_flow_style=False)
