"""Experiment orchestration: config -> models -> synthetic data -> ladder -> files."""

from __future__ import annotations

import platform
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from bayesinv import __version__
from bayesinv import config as config_mod
from bayesinv.convergence import continuity_probe, convergence_ladder, make_dictionary
from bayesinv.errors import ConfigError, DegenerateEvidence
from bayesinv.fspace import ForwardMap, PathGrid, trig_basis, trig_coeffs, trig_frequencies
from bayesinv.io import emit_csv, fmt, read_matrix_csv, sha256, write_json, write_rows
from bayesinv.noise import (
    BrownianNoise,
    CoordinateDensity,
    DecomposableNoise,
    DominatedModifier,
    DominatedNoise,
    FiniteDimNoise,
    GaussianNoise,
    SphericalNoise,
    SubordinatedNoise,
    estimate_gamma,
    gamma_standard_error,
    quadratic_variation,
)
from bayesinv.posterior import cm_estimate, compute_posterior
from bayesinv.priors import PriorScheme, sample_scheme

EXIT_OK, EXIT_CONFIG, EXIT_DEGENERATE, EXIT_NUMERIC = 0, 2, 3, 4

RECIPES = ("conjugate-gaussian", "torus-laplace", "spherical", "subordinated", "girsanov")


def recipe_text(name):
    if name not in RECIPES:
        raise ConfigError(f"unknown recipe {name!r}; available: {', '.join(RECIPES)}", ("recipe",))
    return resources.files("bayesinv.recipes").joinpath(f"{name}.yaml").read_text()


def load_recipe(name):
    return config_mod.load(recipe_text(name))


@dataclass
class Problem:
    """Concrete objects built from a validated config."""

    cfg: dict
    dim: int
    basis_id: str
    embedding_weights: np.ndarray
    scheme: PriorScheme
    forward: ForwardMap
    model: object
    times: np.ndarray | None = None
    gaussian_spectrum: np.ndarray | None = None
    prior_sd: np.ndarray | None = None


def _decay(dim, p, scale=1.0, freqs=None):
    k = np.arange(dim) if freqs is None else freqs
    return scale * (1.0 + k) ** (-float(p))


def _spectrum(spec, dim, freqs):
    if "eigenvalues" in spec:
        lam = np.asarray(spec["eigenvalues"], dtype=float)
        if lam.size != dim:
            raise ConfigError(f"expected {dim} eigenvalues, got {lam.size}", ("noise", "eigenvalues"))
        return lam
    return _decay(dim, spec.get("decay", 0.0), spec.get("scale", 1.0), freqs)


def build(cfg) -> Problem:
    b = cfg["basis"]
    if b["kind"] == "trig":
        basis = trig_basis(b["K"], b.get("sobolev", 0.0))
        freqs = trig_frequencies(b["K"])
    else:
        basis = None
        freqs = None
    dim = basis.dim if basis is not None else b["dim"]
    basis_id = basis.id if basis is not None else "coeff"
    weights = basis.embedding_weights if basis is not None else np.ones(dim)

    pr = cfg["prior"]
    if "sigmas" in pr:
        sd = np.asarray(pr["sigmas"], dtype=float)
        if sd.size != dim:
            raise ConfigError(f"expected {dim} prior sigmas, got {sd.size}", ("prior", "sigmas"))
    else:
        sd = _decay(dim, pr.get("decay", 1.0), 1.0, freqs)
    if cfg["levels"][-1] > dim:
        raise ConfigError(f"finest level {cfg['levels'][-1]} exceeds dimension {dim}", ("levels",))
    if pr["kind"] == "kl_truncation":
        scheme = PriorScheme("kl_truncation", 1, {"sigmas": sd.tolist(), "basis_id": basis_id})
    elif pr["kind"] == "hierarchical":
        scheme = PriorScheme("hierarchical", 1, {"base_sd": sd.tolist(), "edges": pr["edges"],
                                                 "values": pr["values"], "basis_id": basis_id})
    else:
        marginal = {"kind": pr.get("marginal", "gaussian"), "sd": sd.tolist()}
        scheme = PriorScheme("quasi_uniform", 1, {"marginal": marginal, "dim": dim, "basis_id": basis_id})

    times = None
    if "grid" in cfg:
        g = cfg["grid"]
        times = np.linspace(0.0, g["T"], g["steps"] + 1)

    fw = cfg["forward"]
    if fw["kind"] == "diagonal":
        if "entries" in fw:
            c = np.asarray(fw["entries"], dtype=float)
            if c.size != dim:
                raise ConfigError(f"expected {dim} forward entries", ("forward", "entries"))
        else:
            c = _decay(dim, fw.get("decay", 0.0), fw.get("scale", 1.0), freqs)
        forward = ForwardMap("diagonal", c, basis_id, basis_id)
    elif fw["kind"] == "trig_smoothing":
        c = fw.get("scale", 1.0) * (1.0 + freqs.astype(float) ** 2) ** (-fw["order"] / 2.0)
        forward = ForwardMap("diagonal", c, basis_id, basis_id)
    elif fw["kind"] == "sine_series":
        T = times[-1]
        k = np.arange(dim)
        amp = fw.get("scale", 1.0) * (1.0 + k) ** (-fw.get("decay", 0.0))
        A = np.sqrt(2.0 / T) * np.sin(np.outer(times, (k + 0.5) * np.pi / T)) * amp
        forward = ForwardMap("dense", A, basis_id, "grid")
    else:
        forward = ForwardMap.zero(basis_id, dim) if times is None else ForwardMap(
            "dense", np.zeros((times.size, dim)), basis_id, "grid")

    nz = cfg["noise"]
    kind = nz["kind"]
    lam = None
    if kind == "gaussian":
        lam = _spectrum(nz, dim, freqs)
        model = GaussianNoise(basis_id, lam)
    elif kind == "box_restricted":
        lam = _spectrum(nz, dim, freqs)
        if max(nz["index"]) >= dim:
            raise ConfigError("box index out of range", ("noise", "index"))
        model = DominatedNoise(GaussianNoise(basis_id, lam), DominatedModifier.box(nz["index"], nz["bound"]))
    elif kind == "laplace_fourier":
        model = DecomposableNoise.laplace(basis_id, dim, nz["b"])
    elif kind == "decomposable":
        model = DecomposableNoise(basis_id, (CoordinateDensity(nz["family"], nz["scale"]),) * dim)
    elif kind == "spherical":
        lam = _spectrum(nz, dim, freqs)
        n = nz.get("n_estimator_terms", dim)
        if n > dim:
            raise ConfigError(f"n_estimator_terms exceeds dimension {dim}", ("noise", "n_estimator_terms"))
        model = SphericalNoise(GaussianNoise(basis_id, lam), n, nz["gamma_law"])
    elif kind == "subordinated":
        stride = nz.get("stride", 1)
        if (times.size - 1) % stride:
            raise ConfigError("stride must divide grid steps", ("noise", "stride"))
        model = SubordinatedNoise(times, nz.get("shape", 2.0), nz.get("rate", 2.0), nz.get("floor", 0.1), stride)
    elif kind == "girsanov":
        model = DominatedNoise(BrownianNoise(times), DominatedModifier("girsanov_drift", T=float(times[-1])))
    else:
        model = FiniteDimNoise(dim, nz["family"], nz.get("scale", 1.0))
    return Problem(cfg, dim, basis_id, weights, scheme, forward, model, times, lam, sd)


_PATH_FUNCTIONS = {
    "bump": lambda t: np.exp(-4.0 * (t - np.pi) ** 2),
    "cos": np.cos,
    "sawtooth": lambda t: (t - np.pi) / np.pi,
}


def synthesize(problem: Problem, seed):
    """Return ``(truth coefficients, observation array)``."""
    cfg = problem.cfg["observation"]
    if cfg["kind"] == "file":
        _, data = read_matrix_csv(cfg["path"])
        return None, data[:, -1].copy()
    truth_cfg = cfg.get("truth", {"kind": "prior_draw"})
    if truth_cfg["kind"] == "explicit":
        x = np.asarray(truth_cfg["coeffs"], dtype=float)
        if x.size != problem.dim:
            raise ConfigError(f"expected {problem.dim} truth coefficients", ("observation", "truth", "coeffs"))
    elif truth_cfg["kind"] == "path":
        K = problem.cfg["basis"]["K"]
        t = np.linspace(0.0, 2 * np.pi, 16 * max(K, 1) + 1)
        x = trig_coeffs(PathGrid(t, _PATH_FUNCTIONS[truth_cfg["function"]](t)), K).coeffs
    else:
        tseed = truth_cfg.get("seed", seed + 1)
        x = sample_scheme(problem.scheme, problem.dim, 1, tseed).particles[0].copy()
    nseed = cfg.get("noise_seed", seed + 2)
    eps = problem.model.sample(nseed)
    eps = eps.coeffs if hasattr(eps, "coeffs") else eps.values
    return x, problem.forward.apply_array(x) + eps


def conjugate_oracle(problem: Problem, y):
    """Closed-form posterior mean for Gaussian prior, diagonal L and Gaussian noise."""
    if not (isinstance(problem.model, GaussianNoise) and problem.forward.kind == "diagonal"
            and problem.scheme.kind == "kl_truncation"):
        return None
    s2 = problem.prior_sd**2
    c = problem.forward.entries
    lam = problem.model.eigenvalues
    post_var = 1.0 / (1.0 / s2 + c * c / lam)
    return post_var * c * y / lam, post_var


@dataclass
class RunManifest:
    """Run record.  ``timings`` stay in memory only so that manifest.json is
    byte-reproducible."""

    name: str
    config_hash: str
    version: str
    status: str
    exit_code: int
    files: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def to_dict(self):
        return {"name": self.name, "config_hash": self.config_hash, "toolkit_version": self.version,
                "status": self.status, "exit_code": self.exit_code, "files": self.files,
                "python": platform.python_version()}


def _vector_rows(values, times=None):
    if times is None:
        return ["index", "value"], zip(range(values.size), values)
    return ["time", "value"], zip(times, values)


def _write_dat(path, xs, ys):
    path.write_text("".join(f"{fmt(x)} {fmt(y)}\n" for x, y in zip(xs, ys)))
    return path


def run_experiment(cfg, out_dir, threads=1, seed=None) -> RunManifest:
    """Run the full pipeline and write every declared output into ``out_dir``.

    ``seed`` overrides the config seed.  Degenerate evidence at the reference
    level is reported in the manifest (status ``degenerate_evidence``, exit
    code 3) together with ``diagnostic.json``.
    """
    cfg = config_mod.validate(dict(cfg))
    if seed is not None:
        cfg["seed"] = int(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    formats = set(cfg.get("outputs", {}).get("formats", ["csv", "json", "dat"]))
    timings = {}
    written = []
    t0 = time.perf_counter()
    problem = build(cfg)
    seed = cfg["seed"]
    truth, y = synthesize(problem, seed)
    timings["setup"] = time.perf_counter() - t0

    if "csv" in formats:
        written.append(write_rows(out / "observation.csv", *_vector_rows(y, problem.times)))
        if truth is not None:
            written.append(write_rows(out / "truth.csv", *_vector_rows(truth)))

    dcfg = cfg.get("dictionary", {})
    dictionary = make_dictionary(problem.dim, dcfg.get("size", 64), dcfg.get("seed", seed),
                                 problem.embedding_weights)
    C_grid = cfg.get("ui", {}).get("C")
    t1 = time.perf_counter()
    try:
        report, posts = convergence_ladder(problem.scheme, cfg["levels"], cfg["particles"], problem.model,
                                           problem.forward, y, dictionary, seed, threads, C_grid,
                                           return_posteriors=True)
    except DegenerateEvidence as exc:
        written.append(write_json(out / "diagnostic.json", {"status": "degenerate_evidence", "detail": str(exc)}))
        return _finish(cfg, out, written, timings, "degenerate_evidence", EXIT_DEGENERATE)
    timings["ladder"] = time.perf_counter() - t1

    extras = {}
    oracle = conjugate_oracle(problem, y)
    if oracle is not None:
        extras["oracle_posterior_mean"] = oracle[0]
        extras["oracle_posterior_var"] = oracle[1]
    if isinstance(problem.model, SphericalNoise):
        extras["gamma_hat"] = estimate_gamma(y, problem.model)
        extras["gamma_stderr"] = gamma_standard_error(y, problem.model)
    if isinstance(problem.model, SubordinatedNoise):
        extras["quadratic_variation_T"] = float(quadratic_variation(PathGrid(problem.times, y)).values[-1])

    if "csv" in formats:
        for lv, p in zip(cfg["levels"], posts):
            written.append(emit_csv(p, out / f"posterior_L{lv}.csv"))
        header = ["level"] + [f"c{j}" for j in range(problem.dim)]
        rows = [[lv] + cm_estimate(p).coeffs.tolist() for lv, p in zip(cfg["levels"], posts) if p.valid]
        written.append(write_rows(out / "cm_estimates.csv", header, rows))
        written.append(emit_csv(report, out / "ladder.csv"))
        if report.ui_C:
            written.append(write_rows(out / "ui_profile.csv", ["C", "tail"], zip(report.ui_C, report.ui_profile)))
    if "json" in formats:
        summary = {"report": report.to_dict(), "posteriors": [p.summary() for p in posts], "extras": extras}
        written.append(write_json(out / "ladder.json", summary))
    if "dat" in formats:
        written.append(_write_dat(out / "plot_bl.dat", report.levels, report.values))
        written.append(_write_dat(out / "plot_cm_gap.dat", report.levels, report.cm_gaps))
    timings["total"] = time.perf_counter() - t0
    return _finish(cfg, out, written, timings, "ok", EXIT_OK)


def _finish(cfg, out, written, timings, status, code):
    files = {p.name: sha256(p) for p in sorted(written, key=lambda p: p.name)}
    manifest = RunManifest(cfg["name"], config_mod.config_hash(cfg), __version__, status, code, files, timings)
    write_json(out / "manifest.json", manifest.to_dict())
    return manifest


def run_probe(cfg, out_dir, threads=1, seed=None):
    """Continuity probe at the reference level along the first coordinate axes."""
    cfg = config_mod.validate(dict(cfg))
    if seed is not None:
        cfg["seed"] = int(seed)
    problem = build(cfg)
    _, y = synthesize(problem, cfg["seed"])
    pc = cfg.get("probe", {})
    scales = pc.get("scales", [1e-3, 1e-2, 1e-1, 1.0])
    ndir = min(pc.get("directions", 2), y.size)
    directions = np.eye(y.size)[:ndir]
    ens = sample_scheme(problem.scheme, cfg["levels"][-1], cfg["particles"], cfg["seed"])
    rows = continuity_probe(problem.model, problem.forward, ens, y, directions, scales, threads=threads)
    path = write_rows(Path(out_dir) / "probe.csv", ["direction", "scale", "modulus", "degenerate"],
                      [(r.direction, r.scale, r.modulus, r.degenerate) for r in rows])
    return rows, path


def generate(cfg, out_dir, seed=None):
    """Write the reference-level prior ensemble and the synthetic observation."""
    cfg = config_mod.validate(dict(cfg))
    if seed is not None:
        cfg["seed"] = int(seed)
    problem = build(cfg)
    truth, y = synthesize(problem, cfg["seed"])
    out = Path(out_dir)
    ens = sample_scheme(problem.scheme, cfg["levels"][-1], cfg["particles"], cfg["seed"])
    paths = [emit_csv(ens, out / "prior.csv"), write_rows(out / "observation.csv", *_vector_rows(y, problem.times))]
    if truth is not None:
        paths.append(write_rows(out / "truth.csv", *_vector_rows(truth)))
    return paths


def posterior_only(cfg, out_dir, threads=1, seed=None):
    """Reference-level posterior with CSV weights and a JSON summary."""
    cfg = config_mod.validate(dict(cfg))
    if seed is not None:
        cfg["seed"] = int(seed)
    problem = build(cfg)
    _, y = synthesize(problem, cfg["seed"])
    ens = sample_scheme(problem.scheme, cfg["levels"][-1], cfg["particles"], cfg["seed"])
    post = compute_posterior(ens, problem.model, problem.forward, y, threads)
    out = Path(out_dir)
    emit_csv(post, out / "posterior.csv")
    summary = post.summary()
    if post.valid:
        summary["cm_estimate"] = cm_estimate(post).coeffs
    write_json(out / "posterior.json", summary)
    return post
