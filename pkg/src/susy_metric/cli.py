"""Command-line runner: the full pipeline driven by a JSON configuration.

Usage: ``susy-metric <command> --config <path> [--output-dir <path>]`` with
commands ``spectrum``, ``partner``, ``metric``, ``reconstruct``, ``oracle``,
``all``.

Exit codes: 0 = pass, 2 = input/validation rejection, 3 = numerical failure.
All computation happens before any file is written, so a rejected run leaves
no partial outputs; every file written is listed in ``manifest.json`` with a
SHA-256 content digest.  Runs are deterministic: the same configuration
produces bit-identical outputs on the same platform.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import metric as metric_mod
from . import oracle as oracle_mod
from .errors import ConfigError, InputError, NumericsError
from .grid import (
    Grid,
    GridFunction,
    grid_function,
    inner_product,
    make_grid,
    norm,
    read_gridfunction_csv,
)
from .operators import adjoint, eigensolve, write_spectrum_csv
from .susy import base_operator, build_susy, make_exp_u, partner_operator

DEFAULT_TOLERANCES = {
    "r_HLLd": 1e-3,
    "r_map": 1e-3,
    "r_herm_h01": 1e-3,
    "r_eig": 1e-3,
    "hermiticity": 1e-8,
    "eigenvalue_match": 1e-4,
    "phi_collinearity": 2e-3,
    "basis_orthogonality": 1e-4,
}


@dataclass
class RunConfig:
    d: float
    n_points: int
    potential: object
    transformation: dict
    alpha: float | None
    n_max: int
    K: int
    tolerances: dict
    output_dir: str
    seed: int
    unsafe_allow_alpha_collision: bool = False


def load_config(path: str, output_dir_override: str | None = None) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")

    def get(key, default=None, required=False):
        if required and key not in raw:
            raise ConfigError(f"missing required configuration key {key!r}")
        return raw.get(key, default)

    d = get("d", required=True)
    if not isinstance(d, (int, float)) or not math.isfinite(d) or d <= 0:
        raise ConfigError(f"d must be a positive number, got {d!r}")
    n_points = get("n_points", 2001)
    if not isinstance(n_points, int) or n_points % 2 == 0 or n_points < 17:
        raise ConfigError(f"n_points must be an odd integer >= 17, got {n_points!r}")
    n_max = get("n_max", 8)
    if not isinstance(n_max, int) or n_max < 1 or n_max > n_points // 4:
        raise ConfigError(
            f"n_max must be an integer in [1, n_points/4 = {n_points // 4}], got {n_max!r}"
        )
    K = get("K", min(200, n_points // 10))
    if not isinstance(K, int) or K < 1 or K + 1 > n_points // 4:
        raise ConfigError(f"K must satisfy 1 <= K and K+1 <= n_points/4, got {K!r}")
    tolerances = dict(DEFAULT_TOLERANCES)
    tol_in = get("tolerances", {})
    if not isinstance(tol_in, dict):
        raise ConfigError("tolerances must be a JSON object")
    for key, val in tol_in.items():
        if key not in DEFAULT_TOLERANCES:
            raise ConfigError(f"unknown tolerance {key!r}")
        if not isinstance(val, (int, float)) or val <= 0:
            raise ConfigError(f"tolerance {key!r} must be positive, got {val!r}")
        tolerances[key] = float(val)
    potential = get("potential", "zero")
    transformation = get("transformation", {"family": "exp", "a": 1.0})
    if not isinstance(transformation, dict) or "family" not in transformation:
        raise ConfigError("transformation must be an object with a 'family' key")
    alpha = get("alpha")
    if alpha is not None and (not isinstance(alpha, (int, float)) or not math.isfinite(alpha)):
        raise ConfigError(f"alpha must be a finite number, got {alpha!r}")
    output_dir = output_dir_override or get("output_dir", "out")
    seed = get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError(f"seed must be an integer, got {seed!r}")
    return RunConfig(
        d=float(d),
        n_points=n_points,
        potential=potential,
        transformation=transformation,
        alpha=None if alpha is None else float(alpha),
        n_max=n_max,
        K=K,
        tolerances=tolerances,
        output_dir=str(output_dir),
        seed=seed,
        unsafe_allow_alpha_collision=bool(get("unsafe_allow_alpha_collision", False)),
    )


def _worker_count() -> int:
    raw = os.environ.get("SUSY_METRIC_THREADS", "")
    if raw:
        try:
            n = int(raw)
        except ValueError as exc:
            raise ConfigError(f"SUSY_METRIC_THREADS must be an integer, got {raw!r}") from exc
        if n < 1:
            raise ConfigError("SUSY_METRIC_THREADS must be at least 1")
        return n
    return os.cpu_count() or 1


class Pipeline:
    """Lazily computed pipeline stages shared across commands.

    Attribute access triggers computation; validation errors therefore fire
    before any command writes output.
    """

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self._cache: dict = {}

    def _memo(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def grid(self) -> Grid:
        return self._memo("grid", lambda: make_grid(self.cfg.d, self.cfg.n_points))

    @property
    def V0(self) -> GridFunction:
        def build():
            spec = self.cfg.potential
            if spec == "zero" or (isinstance(spec, dict) and spec.get("id") == "zero"):
                return grid_function(self.grid, np.zeros(self.grid.n_points))
            if isinstance(spec, dict) and spec.get("kind") == "samples":
                try:
                    return read_gridfunction_csv(spec["path"], self.grid)
                except (OSError, KeyError, ValueError) as exc:
                    raise ConfigError(f"cannot load potential samples: {exc}") from exc
            raise ConfigError(f"unsupported potential specification {spec!r}")

        return self._memo("V0", build)

    @property
    def h_op(self):
        return self._memo("h_op", lambda: base_operator(self.grid, self.V0))

    @property
    def h_spectrum(self):
        return self._memo("h_spec", lambda: eigensolve(self.h_op, self.cfg.n_max + 2))

    def _transformation(self):
        spec = self.cfg.transformation
        family = spec.get("family")
        if family == "exp":
            if "a" not in spec or not isinstance(spec["a"], (int, float)):
                raise ConfigError("exp transformation needs a numeric 'a'")
            a = float(spec["a"])
            u = make_exp_u(self.grid, a)
            alpha = self.cfg.alpha if self.cfg.alpha is not None else a * a
            return u, alpha
        if family == "samples":
            try:
                u = read_gridfunction_csv(spec["path"], self.grid)
            except (OSError, KeyError, ValueError) as exc:
                raise ConfigError(f"cannot load transformation samples: {exc}") from exc
            alpha = self.cfg.alpha
            if alpha is None:
                alpha = spec.get("alpha")
            if alpha is None:
                raise ConfigError("samples transformation needs 'alpha'")
            return u, float(alpha)
        raise ConfigError(f"unknown transformation family {family!r}")

    @property
    def susy(self):
        def build():
            u, alpha = self._transformation()
            return build_susy(
                self.grid,
                self.V0,
                u,
                alpha,
                self.h_spectrum,
                check_collision=not self.cfg.unsafe_allow_alpha_collision,
            )

        return self._memo("susy", build)

    @property
    def H_op(self):
        return self._memo("H_op", lambda: partner_operator(self.susy))

    @property
    def Hdag_op(self):
        return self._memo("Hdag_op", lambda: adjoint(self.H_op))

    @property
    def H_spectrum(self):
        return self._memo("H_spec", lambda: eigensolve(self.H_op, self.cfg.n_max + 1))

    @property
    def Hdag_spectrum(self):
        return self._memo("Hd_spec", lambda: eigensolve(self.Hdag_op, self.cfg.n_max + 1))

    @property
    def metric_op(self):
        return self._memo("metric_op", lambda: metric_mod.assemble_metric(self.susy))

    @property
    def decomposition(self):
        return self._memo(
            "dec", lambda: metric_mod.decompose_metric(self.metric_op, self.cfg.K)
        )

    @property
    def xi_rest(self):
        def build():
            _, rest = metric_mod.split_alpha_channel(self.Hdag_spectrum, self.susy.alpha)
            return rest

        return self._memo("xi_rest", build)

    @property
    def basis(self):
        return self._memo(
            "basis",
            lambda: metric_mod.build_equivalent_basis(
                self.decomposition,
                self.xi_rest,
                self.susy.alpha,
                orthogonality_tol=self.cfg.tolerances["basis_orthogonality"],
            ),
        )

    @property
    def report(self):
        return self._memo(
            "report",
            lambda: metric_mod.verify_equivalence(
                self.susy,
                self.H_op,
                self.Hdag_op,
                self.decomposition,
                self.basis,
                self.xi_rest,
                self.H_spectrum,
                metric_op=self.metric_op,
                tolerances={
                    k: self.cfg.tolerances[k]
                    for k in ("r_HLLd", "r_map", "r_herm_h01", "r_eig")
                },
            ),
        )


@dataclass
class OutputStage:
    """Holds rendered outputs until the whole command has succeeded."""

    files: dict = field(default_factory=dict)

    def add_text(self, name: str, text: str) -> None:
        self.files[name] = text

    def add_json(self, name: str, obj) -> None:
        self.files[name] = json.dumps(obj, indent=2, sort_keys=True) + "\n"

    def add_gridfunction(self, name: str, f: GridFunction) -> None:
        rows = ["x,re,im"]
        rows += [
            f"{xj:.17g},{vj.real:.17g},{vj.imag:.17g}"
            for xj, vj in zip(f.grid.x, f.values)
        ]
        self.files[name] = "\n".join(rows) + "\n"

    def add_spectrum(self, prefix: str, spectrum) -> None:
        rows = ["index,re_E,im_E"]
        rows += [
            f"{k},{E.real:.17g},{E.imag:.17g}"
            for k, E in enumerate(spectrum.eigenvalues)
        ]
        self.files[f"{prefix}eigenvalues.csv"] = "\n".join(rows) + "\n"
        for k, f in enumerate(spectrum.eigenfunctions):
            self.add_gridfunction(f"{prefix}eig_{k}.csv", f)

    def flush(self, outdir: str, command: str, config_digest: str) -> None:
        os.makedirs(outdir, exist_ok=True)
        digests = {}
        for name in sorted(self.files):
            payload = self.files[name].encode("utf-8")
            with open(os.path.join(outdir, name), "wb") as fh:
                fh.write(payload)
            digests[name] = hashlib.sha256(payload).hexdigest()
        manifest = {
            "command": command,
            "config_digest": config_digest,
            "files": digests,
        }
        payload = (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode("utf-8")
        with open(os.path.join(outdir, "manifest.json"), "wb") as fh:
            fh.write(payload)


def _stage_spectrum(pipe: Pipeline, stage: OutputStage) -> int:
    stage.add_spectrum("h_", pipe.h_spectrum)
    return 0


def _stage_partner(pipe: Pipeline, stage: OutputStage) -> int:
    s = pipe.susy
    summary = {
        "alpha": s.alpha,
        "w_left": [s.w_left.real, s.w_left.imag],
        "w_right": [s.w_right.real, s.w_right.imag],
        "im_w_ratio": s.im_w_ratio,
    }
    stage.add_json("susy_summary.json", summary)
    stage.add_spectrum("H_", pipe.H_spectrum)
    stage.add_spectrum("Hdag_", pipe.Hdag_spectrum)
    return 0


def _stage_metric(pipe: Pipeline, stage: OutputStage) -> int:
    dec = pipe.decomposition
    rows = ["index,lambda"]
    rows += [f"{k},{lam:.17g}" for k, lam in enumerate(dec.lambdas)]
    stage.add_text("metric_lambdas.csv", "\n".join(rows) + "\n")
    stage.add_gridfunction("metric_kernel.csv", dec.xis[dec.kernel_index])
    basis = pipe.basis
    for j, phi in enumerate(basis.phis):
        stage.add_gridfunction(f"phi_{j}.csv", phi)
    w = dec.grid.weights
    P = np.column_stack([p.values / basis.norms[j] for j, p in enumerate(basis.phis)])
    G = (P.conj().T * w) @ P
    rows = ["m,n,re,im"]
    for m in range(G.shape[0]):
        for n in range(G.shape[1]):
            rows.append(f"{m},{n},{G[m, n].real:.17g},{G[m, n].imag:.17g}")
    stage.add_text("phi_gram.csv", "\n".join(rows) + "\n")
    stage.add_json(
        "metric_summary.json",
        {
            "K": dec.K,
            "kernel_index": dec.kernel_index,
            "lambda_0": float(dec.lambdas[0]),
            "lambda_1": float(dec.lambdas[1]),
            "gram_max_offdiagonal": float(np.max(np.abs(G - np.eye(G.shape[0])))),
            "energies": [float(E) for E in basis.energies],
            "norms": [float(v) for v in basis.norms],
        },
    )
    return 0


def _stage_reconstruct(pipe: Pipeline, stage: OutputStage) -> int:
    basis = pipe.basis
    h0 = metric_mod.reconstruct_h0(basis)
    herm = metric_mod.hermiticity_residual(h0)
    ev = metric_mod.restricted_eigenvalues(h0, basis)
    rows = ["index,re_E,im_E"]
    rows += [f"{k},{E.real:.17g},{E.imag:.17g}" for k, E in enumerate(ev)]
    stage.add_text("h0_eigenvalues.csv", "\n".join(rows) + "\n")
    report = pipe.report
    payload = report.to_dict()
    payload["hermiticity_residual"] = herm
    herm_ok = herm < pipe.cfg.tolerances["hermiticity"]
    payload["pass"] = bool(report.passed and herm_ok)
    stage.add_json("verification_report.json", payload)
    return 0 if payload["pass"] else 3


def _stage_oracle(pipe: Pipeline, stage: OutputStage) -> int:
    cfg = pipe.cfg
    if cfg.n_max > cfg.K // 2:
        raise ConfigError(
            f"oracle comparison needs n_max <= K/2 (= {cfg.K // 2}); "
            "series accuracy is not certifiable beyond that"
        )
    tr = cfg.transformation
    if tr.get("family") != "exp":
        raise ConfigError("oracle comparisons require the exp transformation family")
    if not (cfg.potential == "zero" or (isinstance(cfg.potential, dict)
                                        and cfg.potential.get("id") == "zero")):
        raise ConfigError("oracle comparisons require the zero potential")
    p = oracle_mod.RobinParams(float(tr["a"]), cfg.d)

    # overlap table: closed form against quadrature on the pipeline grid
    g = pipe.grid
    rows = ["m,n,re_closed,im_closed,re_quad,im_quad,abs_diff"]
    worst_overlap = 0.0
    for m in range(1, cfg.n_max + 1):
        _, Xi = oracle_mod.metric_eigendata(p, m)
        Xi_f = grid_function(g, Xi(g.x))
        for n in range(1, cfg.n_max + 1):
            xi_f = grid_function(g, oracle_mod.adjoint_eigenfunction(p, n)(g.x))
            quad_val = inner_product(Xi_f, xi_f)
            closed = oracle_mod.overlap_s(p, m, n)
            diff = abs(quad_val - closed)
            worst_overlap = max(worst_overlap, diff)
            rows.append(
                f"{m},{n},{closed.real:.17g},{closed.imag:.17g},"
                f"{quad_val.real:.17g},{quad_val.imag:.17g},{diff:.17g}"
            )
    stage.add_text("overlaps.csv", "\n".join(rows) + "\n")

    # series identities at reference sample points
    identity_points = [(0.4138, 1.0), (0.7, math.pi / 2), (1.7, 0.4), (-0.3, 2.0), (3.2, 2.5)]
    ident = []
    for rho, xx in identity_points:
        r1, r2 = oracle_mod.series_identity_check(rho, xx)
        ident.append(
            {
                "rho": rho,
                "x": xx,
                "plain_lhs": [r1.lhs_plain, r2.lhs_plain],
                "accelerated_lhs": [r1.lhs_accelerated, r2.lhs_accelerated],
                "rhs": [r1.rhs, r2.rhs],
                "mismatch": [r1.mismatch, r2.mismatch],
            }
        )

    # three-way basis-function comparison on a coarse interior sub-grid
    n_compare = min(4, cfg.n_max)
    stride = max(1, (g.n_points - 1) // 200)
    while stride > 1 and not (
        (g.n_points - 1) % stride == 0 and ((g.n_points - 1) // stride) % 2 == 0
    ):
        stride -= 1
    sub = np.arange(0, g.n_points, stride)
    xs = g.x[sub]
    ws = np.full(len(xs), 2.0)
    ws[1::2] = 4.0
    ws[0] = ws[-1] = 1.0
    ws *= (xs[1] - xs[0]) / 3.0
    interior = slice(3, -3)

    def masked_overlap(f, gvals):
        fi, gi, wi = f[interior], gvals[interior], ws[interior]
        nf = np.sqrt(np.sum(wi * np.abs(fi) ** 2))
        ng = np.sqrt(np.sum(wi * np.abs(gi) ** 2))
        return float(abs(np.sum(wi * np.conj(fi) * gi)) / (nf * ng))

    threads = _worker_count()

    def closed_samples(n):
        with ThreadPoolExecutor(max_workers=threads) as ex:
            vals = list(ex.map(lambda xx: oracle_mod.phi_closed_form(p, n, float(xx)), xs))
        return np.array(vals)

    comparison = []
    all_pass = True
    tol = cfg.tolerances["phi_collinearity"]
    for n in range(1, n_compare + 1):
        series = oracle_mod.phi_series(p, n, xs, K=max(cfg.K * 25, 5000))
        closed = closed_samples(n)
        pipe_phi = pipe.basis.phis[n].values[sub]
        ov_ps = masked_overlap(pipe_phi, series)
        ov_pc = masked_overlap(pipe_phi, closed)
        ov_sc = masked_overlap(series, closed)
        # record the constant phase between the closed-form display and the
        # defining series (the series is authoritative)
        phase = np.sum(np.conj(closed[interior]) * series[interior])
        phase /= abs(phase)
        aligned = closed * phase
        rows = ["x,re_closed,im_closed,re_series,im_series,abs_diff"]
        for xx, cv, sv, av in zip(xs, closed, series, aligned):
            rows.append(
                f"{xx:.17g},{cv.real:.17g},{cv.imag:.17g},"
                f"{sv.real:.17g},{sv.imag:.17g},{abs(sv - av):.17g}"
            )
        stage.add_text(f"phi_oracle_{n}.csv", "\n".join(rows) + "\n")
        ok = min(ov_ps, ov_pc, ov_sc) > 1.0 - tol
        all_pass = all_pass and ok
        comparison.append(
            {
                "n": n,
                "overlap_pipeline_series": ov_ps,
                "overlap_pipeline_closed": ov_pc,
                "overlap_series_closed": ov_sc,
                "closed_to_series_phase": [phase.real, phase.imag],
                "pass": ok,
            }
        )

    ident_pass = all(max(e["mismatch"]) < 1e-6 for e in ident)
    overlap_pass = worst_overlap < 1e-8 * math.sqrt(cfg.d)
    stage.add_json(
        "oracle_summary.json",
        {
            "overlap_max_abs_diff": worst_overlap,
            "overlap_pass": overlap_pass,
            "series_identities": ident,
            "series_identities_pass": ident_pass,
            "three_way": comparison,
            "three_way_pass": all_pass,
            "pass": bool(all_pass and ident_pass and overlap_pass),
        },
    )
    return 0 if (all_pass and ident_pass and overlap_pass) else 3


_COMMANDS = {
    "spectrum": (_stage_spectrum,),
    "partner": (_stage_partner,),
    "metric": (_stage_metric,),
    "reconstruct": (_stage_reconstruct,),
    "oracle": (_stage_oracle,),
    "all": (_stage_spectrum, _stage_partner, _stage_metric, _stage_reconstruct, _stage_oracle),
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="susy-metric",
        description="SUSY partner spectra, metric square roots, and the "
        "equivalent Hermitian reconstruction, driven by a JSON configuration.",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="path to the JSON configuration")
    parser.add_argument("--output-dir", default=None, help="override the configured output dir")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, args.output_dir)
        with open(args.config, "rb") as fh:
            config_digest = hashlib.sha256(fh.read()).hexdigest()
        pipe = Pipeline(cfg)
        stage = OutputStage()
        code = 0
        for fn in _COMMANDS[args.command]:
            code = max(code, fn(pipe, stage))
    except InputError as exc:
        print(f"susy-metric: rejected: {exc}", file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"susy-metric: numerical failure: {exc}", file=sys.stderr)
        return 3

    stage.flush(cfg.output_dir, args.command, config_digest)
    if code != 0:
        print("susy-metric: verification failed; see report outputs", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
