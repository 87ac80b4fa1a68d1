"""Command-line runner.

Every subcommand writes ``<out>/<group>-<action>.json`` (the report bundle)
and one CSV per table.  Exit codes: 0 ok, 1 usage or configuration error,
2 calibration or witness failure, 3 a checked invariant failed.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import compact, kernels, multiplier, norms, operators
from .awf import AmplitudeCalibration, calibrate_amplitude, oscillation_lower_bound
from .config import ExperimentConfig, ReportBundle, _plain
from .errors import CalibrationFailure, ConfigError, WitnessFailure, ZygcommError
from .fields import get_symbol
from .geometry import ZygmundRectangle, dyadic_group, dyadic_groups, rectangle_from_corner

EXIT_OK, EXIT_CONFIG, EXIT_CALIBRATION, EXIT_INVARIANT = 0, 1, 2, 3

SUBCOMMANDS = {
    "kernels": ("check",),
    "norms": ("bmo", "equivalence"),
    "awf": ("verify",),
    "off": ("estimate",),
    "compact": ("probe",),
    "multiplier": ("audit",),
}


# -- shared helpers ----------------------------------------------------------------


def _kernel(cfg: ExperimentConfig):
    return kernels.get_kernel(cfg.kernel, cfg.theta, **cfg.kernel_params)


def _symbol(cfg: ExperimentConfig):
    return get_symbol(cfg.symbol, **cfg.symbol_params)


def reference_rectangle(cfg: ExperimentConfig) -> ZygmundRectangle:
    """First dyadic rectangle at the shallowest depth of the domain."""
    d = cfg.depths[0]
    group = dyadic_group(cfg.domain, d, d)
    if group is None:
        raise ConfigError(f"no dyadic rectangle of depth {d} fits the domain", "domain")
    lengths, lows = group
    return rectangle_from_corner(lows[0], lengths)


def sample_rectangles(cfg: ExperimentConfig, count: int) -> list[ZygmundRectangle]:
    """``count`` distinct family rectangles, chosen by the seeded generator, in family order."""
    groups = list(dyadic_groups(cfg.domain, *cfg.depths))
    sizes = np.array([lows.shape[0] for _, lows in groups])
    total = int(sizes.sum())
    if total == 0:
        raise ConfigError("the dyadic family of the domain is empty", "domain")
    rng = np.random.default_rng(cfg.seed)
    picks = np.sort(rng.choice(total, size=min(count, total), replace=False))
    starts = np.concatenate([[0], np.cumsum(sizes)])
    out = []
    for p in picks:
        g = int(np.searchsorted(starts, p, side="right") - 1)
        lengths, lows = groups[g]
        out.append(rectangle_from_corner(lows[p - starts[g]], lengths))
    return out


def _calibrate(cfg: ExperimentConfig, k) -> AmplitudeCalibration:
    r = reference_rectangle(cfg)
    if cfg.amplitude == "auto":
        return calibrate_amplitude(k, r, cfg.resolution)
    return calibrate_amplitude(k, r, cfg.resolution, ladder=(float(cfg.amplitude),))


def _calibration_record(bundle: ReportBundle, cal: AmplitudeCalibration) -> None:
    bundle.add(
        "calibration",
        kernel=cal.kernel,
        amplitude=cal.amplitude,
        constant=cal.constant,
        kappa_1=cal.kappa_1,
        kappa_2=cal.kappa_2,
        bracket_low=cal.bracket_low,
        bracket_high=cal.bracket_high,
        rectangle=cal.rectangle.to_json(),
        resolution=list(cal.resolution),
    )
    for s in cal.ladder:
        bundle.add_row("ladder", s._asdict())


# -- subcommands ---------------------------------------------------------------------


def kernels_check(cfg: ExperimentConfig, bundle: ReportBundle) -> None:
    k = _kernel(cfg)
    size = kernels.check_size_bound(k, kernels.pair_sampler(cfg.seed), cfg.samples)
    manifold = kernels.check_size_bound(k, kernels.pair_sampler(cfg.seed, on_manifold=True), cfg.samples)
    cont = kernels.check_continuity(k, kernels.perturbation_sampler(cfg.seed), cfg.samples)
    for name, rep in (("size", size), ("size-on-manifold", manifold), ("continuity", cont)):
        bundle.add_row("bounds", {"kernel": k.name, "theta": k.theta, "check": name, "max_ratio": rep.max_ratio, "samples": rep.samples})
        if rep.max_ratio > 1.0 + 1e-12:
            bundle.fail(f"{name} bound exceeded: max ratio {rep.max_ratio!r}")
    cal = _calibrate(cfg, k)
    _calibration_record(bundle, cal)


def norms_bmo(cfg: ExperimentConfig, bundle: ReportBundle) -> None:
    b = _symbol(cfg)
    est = norms.bmo_norm(b, cfg.domain, cfg.depths, cfg.effective_alpha, cfg.resolution)
    bundle.add_row(
        "bmo",
        {
            "symbol": b.label(),
            "alpha": est.alpha,
            "depths": f"{cfg.depths[0]}..{cfg.depths[1]}",
            "value": est.value,
            "minimum": est.minimum,
            "family_size": est.family_size,
            "witness": est.witness.label() if est.witness is not None else "",
        },
    )


def norms_equivalence(cfg: ExperimentConfig, bundle: ReportBundle) -> None:
    b = _symbol(cfg)
    rep = norms.check_equivalence(b, cfg.effective_alpha, cfg.domain, cfg.depths, cfg.samples, res=cfg.resolution, seed=cfg.seed)
    bundle.add_row(
        "equivalence",
        {
            "symbol": b.label(),
            "alpha": cfg.effective_alpha,
            "bmo": rep.bmo.value,
            "holder": rep.holder.value,
            "holder_infinite": rep.holder.infinite,
            "ratio": rep.ratio,
            "status": rep.status,
            "flagged": rep.flagged,
        },
    )
    if rep.status.startswith("ratio outside"):
        bundle.fail(rep.status)


def awf_verify(cfg: ExperimentConfig, bundle: ReportBundle) -> None:
    k, b = _kernel(cfg), _symbol(cfg)
    cal = _calibrate(cfg, k)
    _calibration_record(bundle, cal)
    for r in sample_rectangles(cfg, cfg.rectangles):
        cert = oscillation_lower_bound(b, k, r, cal)
        bundle.add("certificate", **cert.to_json())
        bundle.add_row(
            "certificates",
            {"rectangle": r.label(), "osc": cert.osc_value, "bound": cert.bound, "pairing_1": cert.pairing_1,
             "pairing_2": cert.pairing_2, "identity_residual": cert.identity_residual, "valid": cert.valid},
        )
        if not cert.valid:
            bundle.fail(f"certificate invalid on {r.label()}")


def _partner(r: ZygmundRectangle, cfg: ExperimentConfig) -> ZygmundRectangle:
    mid = np.array([(lo + hi) / 2 for lo, hi in cfg.domain])
    signs = np.where(r.center <= mid, 1, -1)
    return operators.admissible_partner(r, (1.0, 1.0, 1.0), signs)


def off_estimate(cfg: ExperimentConfig, bundle: ReportBundle) -> None:
    if cfg.p is None or cfg.q is None:
        raise ConfigError("off estimate needs both p and q", "p" if cfg.p is None else "q")
    k, b = _kernel(cfg), _symbol(cfg)
    for r in sample_rectangles(cfg, cfg.rectangles):
        pair = (r, _partner(r, cfg))
        est = operators.off_constant_estimate(b, k, cfg.p, cfg.q, [pair], res=cfg.resolution)
        bundle.add_row("pairings", operators.pairing_row(k, b, cfg.p, cfg.q, pair[0], pair[1], est.value, cfg.resolution))


def compact_probe(cfg: ExperimentConfig, bundle: ReportBundle) -> None:
    k, b = _kernel(cfg), _symbol(cfg)
    cal = _calibrate(cfg, k)
    _calibration_record(bundle, cal)
    alpha = cfg.effective_alpha
    dossier = compact.compactness_dossier(b, alpha, k, cal, cfg.domain, cfg.depths, cfg.threshold, cfg.resolution)
    for ev in dossier.axes:
        p = ev.probe
        for s, v, w in zip(p.scales, p.o_alpha_values, p.witnesses):
            bundle.add_row("probe", {"axis": p.axis, "scale": s, "o_alpha": v, "witness": w.label() if w is not None else ""})
        sel = ev.selection
        bundle.add(
            "axis",
            axis=p.axis,
            inf_witness=p.inf_witness,
            obstruction=ev.obstruction,
            note=ev.note,
            certificates=[c.to_json() for c in ev.certificates],
            selection=None if sel is None else {
                "indices": list(sel.indices), "which": sel.which, "branch": sel.branch,
                "accumulation_point": sel.accumulation_point, "disjoint": sel.disjoint,
            },
        )
        if sel is not None and not sel.disjoint:
            bundle.fail(f"axis {p.axis}: selected family is not disjoint")
        if not ev.certificates_valid:
            bundle.fail(f"axis {p.axis}: invalid certificate")
    bundle.add("conclusion", symbol=dossier.symbol, alpha=alpha, threshold=dossier.threshold, conclusion=dossier.conclusion)


def multiplier_audit(cfg: ExperimentConfig, bundle: ReportBundle) -> None:
    lo, hi, n = cfg.log_grid
    grid = multiplier.LogGrid(lo, hi, n)
    fine = {c.alpha: c for c in multiplier.check_mz1(grid.refined())}
    for c in multiplier.check_mz1(grid):
        f = fine[c.alpha]
        change = abs(f.max_ratio - c.max_ratio) / f.max_ratio
        bundle.add_row(
            "mz1",
            {"alpha": c.alpha.label(), "max_ratio": c.max_ratio, "argmax": " ".join(repr(v) for v in c.argmax),
             "refined_max_ratio": f.max_ratio, "relative_change": change, "grid": c.grid_spec},
        )
        if not np.isfinite(c.max_ratio) or change > 0.05:
            bundle.fail(f"alpha {c.alpha.label()}: max ratio not grid stable ({change:.3g})")
    err = multiplier.gradient_check(multiplier.clearance_points(cfg.samples, cfg.seed))
    bundle.add("gradient_check", points=cfg.samples, max_error=float(err.max()))
    if err.max() > 1e-6:
        bundle.fail(f"finite differences disagree with closed-form gradient: {err.max():.3g}")
    rows = multiplier.unboundedness_sweep()
    for r in rows:
        bundle.add_row("sweep", r._asdict())
    cols = np.array([[r.d1, r.d2, r.d3] for r in rows])
    spread = (cols.max(axis=0) - cols.min(axis=0)) / cols.max(axis=0)
    if np.any(spread > 0.05):
        bundle.fail(f"normalized sweep columns vary by {spread.max():.3g}")
    if any(abs(r.corner - multiplier.CORNER_VALUE) > 1e-9 for r in rows):
        bundle.fail("corner value differs from 2^(-3/2)")


HANDLERS = {
    ("kernels", "check"): kernels_check,
    ("norms", "bmo"): norms_bmo,
    ("norms", "equivalence"): norms_equivalence,
    ("awf", "verify"): awf_verify,
    ("off", "estimate"): off_estimate,
    ("compact", "probe"): compact_probe,
    ("multiplier", "audit"): multiplier_audit,
}


def run(cfg: ExperimentConfig, subcommand: str) -> ReportBundle:
    """Execute ``subcommand`` (e.g. ``"norms bmo"``); failures of the checks are recorded, not raised."""
    key = tuple(subcommand.replace("-", " ").split())
    if key not in HANDLERS:
        raise ConfigError(f"unknown subcommand {subcommand!r}", "subcommand")
    bundle = ReportBundle("-".join(key), cfg)
    try:
        HANDLERS[key](cfg, bundle)
    except (CalibrationFailure, WitnessFailure) as exc:
        bundle.status = "calibration failure"
        bundle.messages.append(f"{type(exc).__name__}: {exc}")
    return bundle


def exit_code(bundle: ReportBundle) -> int:
    return {"ok": EXIT_OK, "calibration failure": EXIT_CALIBRATION}.get(bundle.status, EXIT_INVARIANT)


def write_bundle(bundle: ReportBundle, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / f"{bundle.subcommand}.json"]
    paths[0].write_text(bundle.to_json(), encoding="utf-8")
    for name, rows in bundle.tables.items():
        path = out / f"{bundle.subcommand}_{name}.csv"
        rows = _plain(rows)
        fields = list(rows[0])
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
        paths.append(path)
    return paths


# -- argument parsing ----------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message, "usage")


def parse_depths(text: str) -> tuple[int, int]:
    try:
        lo, hi = text.split("..")
        return int(lo), int(hi)
    except ValueError:
        raise ConfigError(f"expected MIN..MAX, got {text!r}", "depths") from None


def parse_resolution(text: str) -> tuple[int, int, int]:
    parts = text.lower().split("x")
    try:
        vals = tuple(int(p) for p in parts)
    except ValueError:
        vals = ()
    if len(vals) == 1:
        vals = vals * 3
    if len(vals) != 3:
        raise ConfigError(f"expected N1xN2xN3, got {text!r}", "resolution")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--kernel")
    common.add_argument("--symbol")
    common.add_argument("--theta", type=float)
    common.add_argument("--alpha", type=float)
    common.add_argument("--p", type=float)
    common.add_argument("--q", type=float)
    common.add_argument("--depths", type=parse_depths, metavar="MIN..MAX")
    common.add_argument("--resolution", type=parse_resolution, metavar="N1xN2xN3")
    parser = _Parser(prog="zygcomm", description="Numerical workbench for commutators of Zygmund-dilation singular integrals.")
    groups = parser.add_subparsers(dest="group", required=True, parser_class=_Parser)
    for group, actions in SUBCOMMANDS.items():
        gp = groups.add_parser(group)
        acts = gp.add_subparsers(dest="action", required=True, parser_class=_Parser)
        for action in actions:
            acts.add_parser(action, parents=[common])
    return parser


def config_from_args(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    changes = {k: getattr(args, k) for k in ("seed", "out", "kernel", "symbol", "theta", "alpha", "p", "q", "depths", "resolution")}
    return cfg.replace(**{k: v for k, v in changes.items() if v is not None})


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = config_from_args(args)
        bundle = run(cfg, f"{args.group} {args.action}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ZygcommError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for path in write_bundle(bundle, cfg.out):
        print(path)
    for m in bundle.messages:
        print(m, file=sys.stderr)
    return exit_code(bundle)


if __name__ == "__main__":
    sys.exit(main())
