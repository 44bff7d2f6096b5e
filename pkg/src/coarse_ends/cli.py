"""Command-line front end.

Every subcommand reads a JSON description (see :mod:`coarse_ends.descriptions`),
computes, and emits CSV rows plus a JSON summary.  Rows are sorted by
``(sigma, mu, R)`` with empty cells first, so identical inputs give
byte-identical output regardless of ``--threads``.

Exit status: 0 when a result (including "inconclusive") was computed, 2 for
description or configuration errors, 3 when the point cap was exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import catalog
from .descriptions import (
    build_space,
    build_subset,
    ends_config,
    finite_index_spec,
    load,
    parse_element,
    validate,
)
from .errors import CapacityError, CoarseEndsError, ConfigurationError, DomainError
from .filtered_ends import filtered_ends, induced_end_map
from .group_models import DEFAULT_CAP, SubsetSpec, model_from_description
from .pair_geometry import (
    approx_stabilizer,
    commensurator_probe,
    enumerate_cosets,
    identity_sample,
    induce_finite_index_collection,
    map_between_balls,
    measure_qi,
    pair_qi_check,
    truncated_hausdorff,
)

log = logging.getLogger("coarse_ends")

OUT_ENV = "COARSE_ENDS_OUT"
COLUMNS = ["command", "space-id", "sigma", "mu", "R", "alive_count", "component_count",
           "unbounded_count", "trusted", "verdict", "value"]


###############################################################################
#                               rows                                          #
###############################################################################


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf"
        return f"{v:g}"
    return str(v)


def row(command, space_id, sigma=None, mu=None, R=None, alive=None, components=None, unbounded=None,
        trusted=None, verdict=None, value=None):
    return {"command": command, "space-id": space_id, "sigma": sigma, "mu": mu, "R": R, "alive_count": alive,
            "component_count": components, "unbounded_count": unbounded, "trusted": trusted,
            "verdict": verdict, "value": value}


def sort_rows(rows):
    def key(r):
        return tuple(-1.0 if r[c] is None else float(r[c]) for c in ("sigma", "mu", "R"))
    return sorted(rows, key=key)


def to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_cell(r[c]) for c in COLUMNS])
    return buf.getvalue()


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (set, frozenset, tuple)):
        return list(o)
    return str(o)


def to_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def show(model, g):
    v = model.format(g)
    if isinstance(v, str):
        return v or "e"
    return json.dumps(v, separators=(",", ":"), default=_json_default)


###############################################################################
#                               commands                                      #
###############################################################################


def _grids(desc):
    return desc.get("grids", {})


def _ends_rows(command, space_id, report, R):
    rows = []
    for sigma, d in report.diagrams.items():
        for mu, p in zip(d.mu_grid, d.partitions):
            rows.append(row(command, space_id, sigma, mu, R, int(p.alive.sum()), p.component_count,
                            p.unbounded_count, p.trusted))
    for v in report.verdicts:
        rows.append(row(command, space_id, v.sigma, None, R, trusted=report.diagrams[v.sigma].sigma_trusted,
                        verdict=str(v.verdict), value=v.verdict.value))
    rows.append(row(command, space_id, None, None, R, trusted=report.cross_bijective,
                    verdict=str(report.final), value=report.final.value))
    return rows


def _ends_summary(report, built):
    s = report.summary()
    s["points"] = built.space.n
    s["cross_maps"] = [
        {"sigma": c.sigma, "sigma2": c.sigma2, "mu": c.mu, "bijective": c.bijective,
         "map": {str(k): v for k, v in c.mapping.items()}} for c in report.cross
    ]
    return s


def _filtered_ends(desc, built, subset_desc, sigma, mu, threads):
    C = build_subset(built, subset_desc)
    return filtered_ends(built.space, C, sigma, mu, ends_config(desc),
                         allow_empty=subset_desc["kind"] == "empty", threads=threads)


def run_filtered_ends(desc, space_id, threads=1, cap=DEFAULT_CAP, command="filtered-ends"):
    built = build_space(desc["space"], cap, space_id)
    subset = desc.get("subset", {"kind": "basepoint"})
    g = _grids(desc)
    report = _filtered_ends(desc, built, subset, g.get("sigma", [built.space.unit_scale]), g.get("mu"), threads)
    summary = _ends_summary(report, built)
    return _ends_rows(command, space_id, report, built.space.radius), summary


def run_ends(desc, space_id, threads=1, cap=DEFAULT_CAP):
    return run_filtered_ends(desc, space_id, threads, cap, command="ends")


def _point_map(desc, src, tgt):
    kind = desc.get("map", {"kind": "identity"})["kind"]
    if kind == "identity":
        if src.space is not tgt.space:
            raise ConfigurationError("the identity map needs the target to be the source space")
        return None
    if src.ball is None or tgt.ball is None:
        raise ConfigurationError(f"map kind {kind!r} needs Cayley spaces")
    model = src.model
    if kind == "set-identity":
        fn = lambda g: g  # noqa: E731
    elif kind == "swap":
        fn = lambda g: tuple(reversed(g))  # noqa: E731
    else:
        if "element" not in desc["map"]:
            raise ConfigurationError("a translation map needs an element")
        h = parse_element(model, desc["map"]["element"])
        fn = lambda g: model.multiply(h, g)  # noqa: E731
    return map_between_balls(src.ball, tgt.ball, fn)


def _sample(desc, src, tgt):
    f = _point_map(desc, src, tgt)
    if f is None:
        return identity_sample(src.space)
    return measure_qi(src.space, tgt.space, f)


def _specs(model, groups):
    return [SubsetSpec("subgroup", tuple(parse_element(model, x) for x in gens)) for gens in groups]


def run_pair_check(desc, space_id, threads=1, cap=DEFAULT_CAP):
    src = build_space(desc["space"], cap, space_id)
    if src.ball is None:
        raise ConfigurationError("pair-check needs a Cayley space")
    if desc.get("pair", "qi") == "finite-index":
        return _finite_index(desc, src, space_id)
    tgt = build_space(desc["target"], cap, space_id + ":target") if "target" in desc else src
    if tgt.ball is None:
        raise ConfigurationError("pair-check needs a Cayley target")
    q = _sample(desc, src, tgt)
    groups = desc.get("subgroups", [])
    if not groups:
        raise ConfigurationError("pair-check needs at least one subgroup")
    fam_s = enumerate_cosets(src.ball, _specs(src.model, groups))
    fam_t = enumerate_cosets(tgt.ball, _specs(tgt.model, desc.get("target_subgroups", groups)))
    g = _grids(desc)
    rep = pair_qi_check(q, fam_s, fam_t, g.get("M"))
    R = src.space.radius
    rows = []
    for M in rep.M_grid:
        rel = rep.hausdorff < M
        us = sum(1 for i in rep.source_cosets if not rel[i].any())
        ut = sum(1 for j in rep.target_cosets if not rel[:, j].any())
        rows.append(row("pair-check", space_id, R=R, verdict=f"M={M:g}:" + ("surjective" if not (us or ut)
                        else f"unmatched({us},{ut})"), value=M))
    rows.append(row("pair-check", space_id, R=R, verdict="least_M" if rep.ok else "failed", value=rep.M))
    summary = {
        "pair": "qi", "L": q.L, "C": q.C, "defect": q.defect, "least_M": rep.M, "M_grid": rep.M_grid,
        "trusted_source_cosets": len(rep.source_cosets), "trusted_target_cosets": len(rep.target_cosets),
        "unmatched_source": [show(src.model, fam_s.cosets[i].rep) for i in rep.unmatched_source],
        "unmatched_target": [show(tgt.model, fam_t.cosets[j].rep) for j in rep.unmatched_target],
    }
    if desc.get("ends"):
        rows_e, summary_e = _qi_ends(desc, src, tgt, q, space_id, threads)
        rows += rows_e
        summary["ends"] = summary_e
    return rows, summary


def _qi_ends(desc, src, tgt, q, space_id, threads):
    g = _grids(desc)
    subset = desc.get("subset", {"kind": "basepoint"})
    rs = _filtered_ends(desc, src, subset, g.get("sigma", [1]), g.get("mu"), threads)
    t_sigma = g.get("target_sigma", [math.ceil(q.L * max(rs.sigma_grid) + q.C)])
    rt = _filtered_ends(desc, tgt, desc.get("target_subset", subset), t_sigma, g.get("target_mu", g.get("mu")),
                        threads)
    ds = rs.diagrams[rs.sigma_grid[-1]]
    dt = next((rt.diagrams[s] for s in rt.sigma_grid if s >= q.L * ds.sigma + q.C - 1e-9), None)
    if dt is None:
        raise ConfigurationError("no target sigma is at least L*sigma + C")
    em = induced_end_map(q.f, ds, dt, q.L, q.C)
    rows = _ends_rows("pair-check", space_id + ":source", rs, src.space.radius)
    rows += _ends_rows("pair-check", space_id + ":target", rt, tgt.space.radius)
    agree = str(rs.final) == str(rt.final)
    rows.append(row("pair-check", space_id, ds.sigma, None, src.space.radius, trusted=agree,
                    verdict="induced-bijective" if em.bijective else "induced-not-bijective",
                    value=len(em.mapping)))
    summary = {"source": _ends_summary(rs, src), "target": _ends_summary(rt, tgt), "verdicts_agree": agree,
               "induced_map": {str(k): v for k, v in em.mapping.items()}, "induced_bijective": em.bijective,
               "levels": [list(x) for x in em.levels]}
    return rows, summary


def _finite_index(desc, src, space_id):
    if "finite_index" not in desc:
        raise ConfigurationError("finite-index pair needs a coset table")
    model = src.model
    H = finite_index_spec(model, desc["finite_index"])
    out = induce_finite_index_collection(model, H, _specs(model, desc.get("subgroups", [])), src.ball)
    R = src.space.radius
    rows = [row("pair-check", space_id, R=R, trusted=r.witness <= r.D1 + r.D2 + 1e-9,
                verdict=f"orbit P{r.family} rep={show(model, r.rep)}", value=r.witness) for r in out]
    summary = {"pair": "finite-index", "index": H.table.index, "orbits": [
        {"family": r.family, "rep": show(model, r.rep), "right_cosets": list(r.cosets), "D1": r.D1, "D2": r.D2,
         "witness": r.witness, "bound_holds": r.witness <= r.D1 + r.D2 + 1e-9} for r in out]}
    return rows, summary


def run_stabilizer(desc, space_id, threads=1, cap=DEFAULT_CAP):
    built = build_space(desc["space"], cap, space_id)
    if built.ball is None:
        raise ConfigurationError("stabilizer queries need a Cayley space")
    q = _sample(desc, built, built)
    A = build_subset(built, desc.get("A", desc.get("subset", {"kind": "basepoint"})))
    ball, model = built.ball, built.model
    rows, results = [], []
    for M in _grids(desc).get("M", [1]):
        res = approx_stabilizer(q, A, M, ball)
        accepted = set(res.elements)
        for gi in res.candidates:
            rows.append(row("stabilizer", space_id, R=ball.radius, trusted=True,
                            verdict=("accepted:" if gi in accepted else "rejected:") + show(model, ball.elements[gi]),
                            value=res.values[gi]))
        rows.append(row("stabilizer", space_id, R=ball.radius, trusted=not res.inconclusive,
                        verdict="inconclusive" if res.inconclusive else f"stabilizer(M={M:g})",
                        value=len(res.elements)))
        results.append({"M": M, "displacement": res.displacement, "candidates": len(res.candidates),
                        "elements": [show(model, ball.elements[i]) for i in res.elements]})
    return rows, {"results": results}


def run_hausdorff(desc, space_id, threads=1, cap=DEFAULT_CAP):
    radii = _grids(desc).get("R", [desc["space"].get("R")])
    half = desc.get("window", "half") == "half"
    rows, values = [], {}
    for R in radii:
        built = build_space({**desc["space"], "R": R}, cap, space_id)
        A = build_subset(built, desc["A"])
        B = build_subset(built, desc["B"])
        if A.size == 0 or B.size == 0:
            raise DomainError(f"empty subset at R = {R}")
        h = truncated_hausdorff(built.space, A, B, R / 2 if half else None)
        values[str(R)] = h
        rows.append(row("hausdorff", space_id, R=R, verdict="hdist", value=h))
    return rows, {"window": "half" if half else "none", "values": values}


def run_commensurator(desc, space_id, threads=1, cap=DEFAULT_CAP):
    space = desc["space"]
    if space["kind"] != "cayley":
        raise ConfigurationError("commensurator probes need a Cayley space")
    model = model_from_description(space["group"])
    groups = desc.get("subgroups")
    if not groups:
        raise ConfigurationError("commensurator probes need a subgroup")
    gens = tuple(parse_element(model, x) for x in groups[0])
    radii = _grids(desc).get("R", [space["R"]])
    rows, out = [], []
    for e in desc.get("elements", []):
        g = parse_element(model, e)
        v = commensurator_probe(model, gens, g, radii, cap)
        name = show(model, g)
        for R, d in zip(v.radii, v.distances):
            rows.append(row("commensurator", space_id, R=R, verdict=f"g={name}", value=d))
        rows.append(row("commensurator", space_id, verdict=f"{v} g={name}", value=v.value))
        out.append({"g": name, "verdict": str(v), "distances": list(v.distances), "radii": list(v.radii)})
    return rows, {"probes": out}


RUNNERS = {
    "filtered-ends": run_filtered_ends,
    "ends": run_ends,
    "pair-check": run_pair_check,
    "stabilizer": run_stabilizer,
    "hausdorff": run_hausdorff,
    "commensurator": run_commensurator,
}


def run_description(desc, command=None, threads=1, cap=DEFAULT_CAP, space_id=None):
    """Run one validated description; returns ``(rows, summary)`` with rows sorted."""
    validate(desc)
    command = command or desc.get("command")
    if command not in RUNNERS:
        raise ConfigurationError(f"description does not name a runnable command (got {command!r})")
    space_id = space_id or desc.get("id") or desc["space"]["kind"]
    rows, summary = RUNNERS[command](desc, space_id, threads=threads, cap=cap)
    summary = {"command": command, "space-id": space_id, **summary}
    return sort_rows(rows), summary


###############################################################################
#                               entry point                                   #
###############################################################################


def _common(p):
    p.add_argument("--threads", type=int, default=1, help="worker threads for independent grid cells")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP, help="maximum number of points in a ball")
    p.add_argument("--out", help=f"directory for report files (overrides ${OUT_ENV})")
    p.add_argument("--format", choices=["csv", "json"], default="csv", help="what to print on stdout")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="coarse-ends", description="Filtered ends and coarse geometry of pairs.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in RUNNERS:
        p = sub.add_parser(name, help=f"run a {name} description")
        p.add_argument("description", help="path to a JSON description")
        _common(p)
    p = sub.add_parser("catalog", help="list, run or dump the built-in descriptions")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--id", dest="entry", help="run one catalog entry")
    g.add_argument("--all", action="store_true", help="run every catalog entry")
    g.add_argument("--dump", metavar="DIR", help="write every entry as DIR/<id>.json")
    _common(p)
    return parser


def _emit(results, args, stem):
    rows = [r for rows, _ in results for r in rows]
    summaries = [s for _, s in results]
    csv_text = to_csv(rows)
    summary = summaries[0] if len(summaries) == 1 else summaries
    json_text = to_json(summary)
    out = args.out or os.environ.get(OUT_ENV)
    if out:
        d = Path(out)
        d.mkdir(parents=True, exist_ok=True)
        (d / f"{stem}.csv").write_text(csv_text, encoding="utf-8")
        (d / f"{stem}.json").write_text(json_text, encoding="utf-8")
    sys.stdout.write(csv_text if args.format == "csv" else json_text)


def _catalog(args):
    if args.dump:
        d = Path(args.dump)
        d.mkdir(parents=True, exist_ok=True)
        for e in catalog.entries():
            (d / f"{e['id']}.json").write_text(to_json(e), encoding="utf-8")
        print(f"wrote {len(catalog.ids())} descriptions to {d}")
        return 0
    if args.entry:
        e = catalog.get(args.entry)
        _emit([run_description(e, threads=args.threads, cap=args.cap)], args, e["id"])
        return 0
    if args.all:
        entries = catalog.entries()
        # entries run one after another; --threads goes to the grid cells inside each entry
        results = [run_description(e, threads=args.threads, cap=args.cap) for e in entries]
        _emit(results, args, "catalog")
        return 0
    for e in catalog.entries():
        print(f"{e['id']:<22} {e['command']:<14} {e.get('title', '')}")
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads < 1:
            raise ConfigurationError("--threads must be at least 1")
        if args.command == "catalog":
            return _catalog(args)
        desc = load(args.description)
        stem = desc.get("id") or Path(args.description).stem
        _emit([run_description(desc, args.command, args.threads, args.cap, stem)], args, f"{stem}.{args.command}")
        return 0
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (CoarseEndsError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
