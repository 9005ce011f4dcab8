"""Scenario configs and the experiment runners behind the ``warpcone`` CLI.

A scenario is an INI file::

    [scenario]
    name = antipodal
    experiment = quotient-check
    seed = 0

    [space]
    kind = torus            # torus | sphere3 | profinite
    resolution = 16
    dim = 1
    wrap = none             # none | plus | cone
    star_distance = 0.5     # wrap = plus
    slices = 4              # wrap = cone

    [action]
    kind = antipodal        # trivial | rotation | antipodal | sl2 | quaternion | odometer
    angles = 1/2            # rotation: turns, comma separated; 'golden' allowed
    moduli = 2              # rotation: 0 for Z

    [params]
    levels = 10

Each experiment writes ``<name>.csv`` and ``<name>.manifest`` (the config
plus a ``[run]`` section) into the output directory.
"""

from __future__ import annotations

import configparser
import csv
import io
import math
import platform
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import scipy

from . import __version__
from .actions import (
    ActionModel,
    antipodal_action,
    cone_action,
    extension_action,
    odometer_action,
    quaternion_action,
    rotation_action,
    sl2_torus_action,
    trivial_action,
)
from .dynamics import TransferRefused, folner_maps, negative_definite_check, kernel_invariants, point_mass_maps, roe_transfer, truncated_kernel
from .embed import distortion, kuratowski_embed, kuratowski_upper_bound, profinite_closed_form, profinite_embed
from .spaces import FiniteSpace, ProfiniteSpec, build_net, compact_cone, one_point_extension, slice_indices
from .spectral import (
    Graph,
    complete_graph,
    cycle_graph,
    distortion_lower_bound,
    exact_conductance,
    level_graph,
    load_baselines,
    primes_between,
    schreier_family,
    schreier_graph,
    spectral_gap,
)
from .warp import DEFAULT_COMPLETE_CAP, build_warped_level, faithfulness_radius, injectivity_radius, mileage_bruteforce, quotient_metric_check

EXPERIMENTS = (
    "warp-metric",
    "quotient-check",
    "faithful-radius",
    "schreier-family",
    "spectral",
    "distortion",
    "embed-profinite",
    "kernel-check",
    "roe-transfer",
    "cone-slice",
)

GOLDEN = (math.sqrt(5) - 1) / 2


class ConfigError(ValueError):
    pass


class AssertionFailed(AssertionError):
    def __init__(self, invariant: str, witness):
        super().__init__(f"{invariant} failed; witness: {witness}")
        self.invariant = invariant
        self.witness = witness


@dataclass
class Scenario:
    name: str
    experiment: str
    seed: Optional[int] = None
    space: dict = field(default_factory=dict)
    action: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    source: str = ""
    cap: Optional[int] = None

    def param(self, key, default=None, cast: Callable = str):
        raw = self.params.get(key)
        if raw is None:
            return default
        try:
            return cast(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"params.{key}: cannot parse {raw!r}{self._line('params', key)}") from exc

    def _line(self, section, key) -> str:
        for no, line in enumerate(self.source.splitlines(), 1):
            if line.split("=")[0].strip() == key:
                return f" (line {no})"
        return ""


def floats(raw: str) -> list[float]:
    return [float(v) for v in str(raw).replace(";", ",").split(",") if v.strip()]


def ints(raw: str) -> list[int]:
    return [int(v) for v in str(raw).replace(";", ",").split(",") if v.strip()]


def turns(raw: str) -> list:
    out = []
    for v in str(raw).split(","):
        v = v.strip()
        if not v:
            continue
        if v == "golden":
            out.append(GOLDEN)
        elif "/" in v:
            out.append(str(Fraction(v)))
        else:
            out.append(float(v))
    return out


def parse_scenario(text: str) -> Scenario:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    if not cp.has_section("scenario"):
        raise ConfigError("missing [scenario] section")
    sc = cp["scenario"]
    for key in ("name", "experiment"):
        if key not in sc:
            raise ConfigError(f"scenario.{key} is required")
    exp = sc["experiment"]
    if exp not in EXPERIMENTS:
        raise ConfigError(f"scenario.experiment: unknown experiment {exp!r}")
    seed = sc.get("seed")
    scen = Scenario(
        name=sc["name"],
        experiment=exp,
        seed=int(seed) if seed is not None else None,
        space=dict(cp["space"]) if cp.has_section("space") else {},
        action=dict(cp["action"]) if cp.has_section("action") else {},
        params=dict(cp["params"]) if cp.has_section("params") else {},
        source=text,
    )
    return scen


def load_scenario(path) -> Scenario:
    return parse_scenario(Path(path).read_text())


def scenario_to_ini(scen: Scenario, run: Optional[dict] = None) -> str:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp["scenario"] = {"name": scen.name, "experiment": scen.experiment, **({"seed": str(scen.seed)} if scen.seed is not None else {})}
    for sec in ("space", "action", "params"):
        if getattr(scen, sec):
            cp[sec] = {k: str(v) for k, v in getattr(scen, sec).items()}
    if run:
        cp["run"] = {k: str(v) for k, v in run.items()}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


# builders -------------------------------------------------------------------


def _need_seed(scen: Scenario):
    if scen.seed is None:
        raise ConfigError("scenario.seed is mandatory for randomized steps")
    return scen.seed


def build_space(scen: Scenario) -> FiniteSpace:
    sp = scen.space
    kind = sp.get("kind", "torus")
    try:
        res = int(sp.get("resolution", 8))
        if kind == "sphere3":
            base = build_net(kind, res, seed=_need_seed(scen))
        elif kind == "profinite":
            spec = ProfiniteSpec.dyadic(res, float(sp.get("ratio", 0.5)))
            base = build_net(kind, res, spec=spec)
        else:
            base = build_net(kind, res, dim=int(sp.get("dim", 1)))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"space: {exc}") from exc
    return base


def build_action(scen: Scenario, base: Optional[FiniteSpace] = None) -> ActionModel:
    """Action on the (possibly wrapped) scenario space."""
    base = base or build_space(scen)
    ac = scen.action
    kind = ac.get("kind", "trivial")
    if kind == "trivial":
        act = trivial_action(base)
    elif kind == "rotation":
        angles = turns(ac.get("angles", "golden"))
        moduli = ints(ac["moduli"]) if "moduli" in ac else None
        act = rotation_action(base, angles, moduli)
    elif kind == "antipodal":
        act = antipodal_action(base)
    elif kind == "sl2":
        act = sl2_torus_action(base)
    elif kind == "quaternion":
        act = quaternion_action(base)
    elif kind == "odometer":
        act = odometer_action(base)
    else:
        raise ConfigError(f"action.kind: unknown action {kind!r}")
    wrap = scen.space.get("wrap", "none")
    if wrap == "plus":
        ext = one_point_extension(base, float(scen.space.get("star_distance", max(base.diameter, 1e-9))))
        act = extension_action(act, ext)
    elif wrap == "cone":
        cone = compact_cone(base, int(scen.space.get("slices", 4)))
        act = cone_action(act, cone)
    elif wrap != "none":
        raise ConfigError(f"space.wrap: unknown wrapper {wrap!r}")
    return act


def _cap(scen: Scenario) -> int:
    return scen.cap if scen.cap is not None else DEFAULT_COMPLETE_CAP


def _check(ok: bool, invariant: str, witness):
    if not ok:
        raise AssertionFailed(invariant, witness)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


# experiments ------------------------------------------------------------------


def run_warp_metric(scen: Scenario):
    act = build_action(scen)
    levels = scen.param("levels", [10.0], floats)
    hops = scen.param("oracle_hops", 4, int)
    rows = [("level", "i", "j", "distance")]
    tol = 1e-9
    for r in levels:
        lvl = build_warped_level(act, r, scen.param("base_edges", "complete"), cap=_cap(scen))
        d = lvl.dmat
        bad = np.argwhere(d > r * act.space.dmat + tol)
        _check(len(bad) == 0, "warped metric bounded by r*d", bad[:1].tolist())
        for s in act.group.labels:
            tgt, _ = act.generator_targets(s)
            over = np.flatnonzero(d[np.arange(len(d)), tgt] > 1 + tol)
            _check(len(over) == 0, "shortcut cost <= 1", (s, over[:1].tolist()))
        if act.space.n <= 14 and hops > 0:
            for i in range(act.space.n):
                for j in range(act.space.n):
                    m = mileage_bruteforce(act, r, i, j, hops)
                    _check(abs(m - d[i, j]) <= tol, "Dijkstra equals mileage oracle", (r, i, j, m, d[i, j]))
        for i in range(len(d)):
            for j in range(len(d)):
                rows.append((r, i, j, d[i, j]))
    return rows, {}


def run_quotient_check(scen: Scenario):
    act = build_action(scen)
    L = scen.param("L", 2, int)
    rows = [("level", "L", "discrepancy", "tolerance", "exact", "witness_i", "witness_j")]
    worst = 0.0
    for r in scen.param("levels", [10.0], floats):
        res = quotient_metric_check(act, r, L)
        bound = 1e-9 if res["exact"] else res["tolerance"]
        _check(res["discrepancy"] <= bound, "quotient metric identity", (r, *res["witness"], res["discrepancy"], bound))
        rows.append((r, L, res["discrepancy"], res["tolerance"], int(res["exact"]), *res["witness"]))
        worst = max(worst, res["discrepancy"])
    return rows, {"max_discrepancy": worst}


def run_faithful_radius(scen: Scenario):
    act = build_action(scen)
    Ns = scen.param("N", [1, 2, 3], ints)
    schedule = scen.param("schedule", [4, 8, 16, 32, 64], floats)
    expect = scen.param("expect", "faithful")
    rows = [("N", "level", "status", "witness")]
    radii = []
    for N in Ns:
        rep = faithfulness_radius(act, N, schedule)
        rows.extend(rep.rows())
        if expect == "failure":
            _check(rep.status == "failure" and rep.witness is not None, "fixed point detected", (N, rep.status))
        else:
            _check(rep.status == "faithful_at", "finite faithfulness radius", (N, rep.status, rep.max_level))
            radii.append(rep.R_N)
    if radii:
        bad = [i for i in range(1, len(radii)) if radii[i] < radii[i - 1]]
        _check(not bad, "R_N nondecreasing in N", radii)
    return rows, {"radii": radii}


def _baseline_floor(raw: str) -> float:
    return load_baselines()["schreier_floor"] if raw == "stored" else float(raw)


def run_schreier_family(scen: Scenario):
    lo, hi = scen.param("primes", [3, 47], ints)
    reports = schreier_family(primes_between(lo, hi))
    rows = [("n", "vertices", "lambda1_norm", "lambda1_comb", "cheeger_lo", "cheeger_hi", "d_lb")]
    for rep in reports:
        _check(rep.components == 1, "Schreier graph connected", rep.n)
        _check(rep.vertex_count == rep.n**2 - 1, "orbit of (1,0) has n^2-1 points", (rep.n, rep.vertex_count))
        rows.append(rep.row())
    floor = reports[0].family_floor
    baseline = scen.param("baseline_floor", None, _baseline_floor)
    if baseline is not None:
        _check(floor >= baseline - 1e-6, "family floor above baseline", (floor, baseline))
    return rows, {"family_floor": floor}


def _graph_for(scen: Scenario) -> list[tuple[int, Graph]]:
    kind = scen.param("graph", "cycle")
    sizes = scen.param("sizes", [8], ints)
    if kind == "cycle":
        return [(n, cycle_graph(n)) for n in sizes]
    if kind == "complete":
        return [(n, complete_graph(n)) for n in sizes]
    if kind == "schreier":
        return [(n, schreier_graph(None, n, (1, 0))) for n in sizes]
    if kind == "level":
        out = []
        for r in scen.param("levels", [8.0], floats):
            sub = Scenario(scen.name, scen.experiment, scen.seed, {**scen.space, "resolution": str(int(r))}, scen.action)
            out.append((int(r), level_graph(build_warped_level(build_action(sub), r, cap=_cap(scen)))))
        return out
    raise ConfigError(f"params.graph: unknown graph family {kind!r}")


def run_spectral(scen: Scenario):
    rows = [("n", "vertices", "lambda1_norm", "lambda1_comb", "cheeger_lo", "cheeger_hi", "exact_h", "d_lb")]
    gaps = []
    for n, g in _graph_for(scen):
        rep = spectral_gap(g, n)
        h = exact_conductance(g) if g.n <= 20 else None
        if h is not None:
            _check(rep.cheeger_lower - 1e-12 <= h <= rep.cheeger_upper + 1e-12, "Cheeger sandwich", (n, rep.cheeger_lower, h, rep.cheeger_upper))
        dlb = distortion_lower_bound(g) if rep.components == 1 else ""
        rows.append((n, g.n, rep.lambda1_norm, rep.lambda1_comb, rep.cheeger_lower, rep.cheeger_upper, "" if h is None else h, dlb))
        gaps.append(rep.lambda1_norm)
    if scen.param("expect_decreasing", False, lambda v: v.lower() in ("1", "true", "yes")):
        bad = [i for i in range(1, len(gaps)) if gaps[i] >= gaps[i - 1]]
        _check(not bad, "gap decreases along the family", gaps)
    return rows, {"gaps": gaps}


def run_distortion(scen: Scenario):
    space = build_space(scen)
    ps = scen.param("p", [1.0, 2.0, 4.0], floats)
    band = scen.param("band", 1.5, float)
    rows = [("p", "expansion_max", "contraction_min", "distortion", "upper_bound", "bound_ok")]
    dists = []
    for p in ps:
        table = kuratowski_embed(space, p)
        rep = distortion(space.dmat, table)
        bound = kuratowski_upper_bound(space, p)
        emb = table.pairwise()
        ok = bool((emb <= bound * space.dmat + 1e-9).all())
        _check(ok, "Kuratowski Lipschitz bound mu(Y)^(1/p)", p)
        rows.append((p, rep.expansion_max, rep.contraction_min, rep.distortion, bound, int(ok)))
        dists.append(rep.distortion)
    _check(max(dists) <= band * min(dists), "distortions within the p-independence band", dists)
    return rows, {"distortions": dists}


def run_embed_profinite(scen: Scenario):
    depths = scen.param("depths", [1, 2, 3, 4, 5, 6], ints)
    ratio = scen.param("ratio", 0.5, float)
    rows = [("p", "depth", "expansion_max", "contraction_min", "closed_form")]
    for p in scen.param("p", [1.0, 2.0, 4.0], floats):
        for depth in depths:
            spec = ProfiniteSpec.dyadic(depth, ratio)
            net = build_net("profinite", depth, spec=spec)
            rep = distortion(net.dmat, profinite_embed(spec, p=p))
            cf = profinite_closed_form(ratio, p)
            _check(abs(rep.expansion_max - cf) <= 1e-9 and abs(rep.contraction_min - cf) <= 1e-9, "profinite closed form", (p, depth, rep.expansion_max, cf))
            rows.append((p, depth, rep.expansion_max, rep.contraction_min, cf))
    return rows, {}


def run_kernel_check(scen: Scenario):
    act = build_action(scen)
    levels = scen.param("levels", [1.0, 2.0, 4.0], floats)
    radius = scen.param("word_radius", 4, int)
    trials = scen.param("trials", 1000, int)
    p = scen.param("p", 2.0, float)
    embs = [kuratowski_embed(act.space, p, metric=build_warped_level(act, r, cap=_cap(scen)).dmat) for r in levels]
    kern = truncated_kernel(act, levels, embs, radius)
    inv = kernel_invariants(kern)
    _check(inv["h_identity_max"] == 0.0, "h(e, y) = 0", inv["h_identity_max"])
    _check(inv["h_min"] >= 0.0, "h >= 0", inv["h_min"])
    if kern.exact:
        _check(inv["symmetry_max"] <= 1e-12, "h(g, y) = h(g^-1, g y)", inv["symmetry_max"])
    nd = negative_definite_check(kern, trials, _need_seed(scen))
    _check(nd["max_violation"] <= 1e-8, "conditional negative definiteness", nd["max_form"])
    rows = [("word_radius", "trials", "skipped", "max_form", "h_identity_max", "symmetry_max")]
    rows.append((radius, trials, nd["skipped"], nd["max_form"], inv["h_identity_max"], inv["symmetry_max"]))
    return rows, {}


def run_roe_transfer(scen: Scenario):
    act = build_action(scen)
    r = scen.param("level", 10.0, float)
    delta = scen.param("delta", act.space.mesh, float)
    maps = scen.param("maps", "folner")
    rows = [("n", "m", "r", "delta", "defect", "mass_deficit_max")]
    for i, F in enumerate(scen.param("half_widths", [1, 2, 3], ints)):
        A = folner_maps(act, F) if maps == "folner" else point_mass_maps(act.space.n)
        eps = injectivity_radius(act, F + 2) if act.group.labels else None
        try:
            res = roe_transfer(act, r, A, delta, F, epsilon=eps, n_index=i + 1)
        except TransferRefused as exc:
            raise AssertionFailed("delta-balls disjoint below the injectivity threshold", exc.witness or (delta, eps)) from exc
        _check(res.defect <= res.rhs + 1e-12, "defect bounded by A-variation", (F, res.defect, res.rhs, res.witness))
        if maps == "folner" and act.is_exact():
            _check(abs(res.defect - 2 / (2 * F + 1)) <= 1e-9, "Folner defect 2/(2F+1)", (F, res.defect))
        rows.append(res.row())
    return rows, {}


def cone_slice_discrepancy(act: ActionModel, slices, scale: float, cap: int = DEFAULT_COMPLETE_CAP) -> list[tuple[float, float, float]]:
    """Per slice theta: max |d_CY,s restricted to {theta} x Y - d_Y,theta*s|, and the tolerance."""
    cone = compact_cone(act.space, slices)
    cact = cone_action(act, cone)
    lcone = build_warped_level(cact, scale, cap=cap)
    out = []
    tol = 4 * act.space.mesh * scale * act.max_lipschitz
    for k, theta in enumerate(cone.meta["thetas"]):
        idx = slice_indices(cone, k)
        sub = lcone.dmat[np.ix_(idx, idx)]
        ly = build_warped_level(act, theta * scale, cap=cap)
        out.append((theta, float(np.abs(sub - ly.dmat).max()), tol))
    return out


def run_cone_slice(scen: Scenario):
    act = build_action(scen)
    slices = scen.param("slices", 4, int)
    rows = [("theta", "scale", "discrepancy", "tolerance")]
    worst = 0.0
    for s in scen.param("scales", [8.0], floats):
        for theta, disc, tol in cone_slice_discrepancy(act, slices, s, _cap(scen)):
            bound = 1e-12 if act.group.labels == () else tol
            _check(disc <= bound, "cone slice equals level theta*s", (theta, s, disc, bound))
            rows.append((theta, s, disc, tol))
            worst = max(worst, disc)
    return rows, {"max_discrepancy": worst}


RUNNERS = {
    "warp-metric": run_warp_metric,
    "quotient-check": run_quotient_check,
    "faithful-radius": run_faithful_radius,
    "schreier-family": run_schreier_family,
    "spectral": run_spectral,
    "distortion": run_distortion,
    "embed-profinite": run_embed_profinite,
    "kernel-check": run_kernel_check,
    "roe-transfer": run_roe_transfer,
    "cone-slice": run_cone_slice,
}


@dataclass
class RunResult:
    status: str  # pass | fail
    csv_path: Path
    manifest_path: Path
    message: str = ""
    summary: dict = field(default_factory=dict)


def run_scenario(scen: Scenario, out_dir, seed: Optional[int] = None, cap: Optional[int] = None) -> RunResult:
    """Run one scenario; write ``<name>.csv`` and ``<name>.manifest``."""
    if seed is not None:
        scen.seed = seed
    scen.cap = cap
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{scen.name}.csv"
    man_path = out / f"{scen.name}.manifest"
    status, message, rows, summary = "pass", "", [], {}
    try:
        rows, summary = RUNNERS[scen.experiment](scen)
    except AssertionFailed as exc:
        status, message = "fail", str(exc)
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    run = {
        "status": status,
        "message": message,
        "warpcone": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "seed": scen.seed,
        "cap": cap,
        "exact_tol": 1e-12,
        "oracle_tol": 1e-9,
    }
    run.update({k: _fmt(v) for k, v in summary.items() if not isinstance(v, (list, tuple))})
    man_path.write_text(scenario_to_ini(scen, run))
    return RunResult(status, csv_path, man_path, message, summary)


def report(out_dir) -> tuple[Path, Path]:
    """Merge every scenario CSV into summary.csv and long-format report_long.csv."""
    out = Path(out_dir)
    summary_rows, long_rows = [], []
    for man in sorted(out.glob("*.manifest")):
        cp = configparser.ConfigParser()
        cp.read(man)
        name = cp["scenario"]["name"]
        data = out / f"{name}.csv"
        rows = list(csv.reader(data.open())) if data.exists() else []
        summary_rows.append((name, cp["scenario"]["experiment"], cp["run"]["status"], max(len(rows) - 1, 0)))
        if rows:
            header = rows[0]
            for k, row in enumerate(rows[1:]):
                for col, val in zip(header, row):
                    long_rows.append((name, k, col, val))
    s_path, l_path = out / "summary.csv", out / "report_long.csv"
    with open(s_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("scenario", "experiment", "status", "rows"))
        w.writerows(summary_rows)
    with open(l_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("scenario", "row", "column", "value"))
        w.writerows(long_rows)
    return s_path, l_path
