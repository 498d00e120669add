"""Command-line surface: generation, witness pipelines, kernel and spectral
reports, support-radius tables, and plot-ready CSV exports.

Every numeric report records the tolerance in effect and, for randomized
operations, the seed; given identical inputs and seed the JSON outputs are
byte-identical.  Exit status is nonzero whenever a requested invariant check
fails.
"""

from __future__ import annotations

import sys

import click
import numpy as np

from . import serialize as io
from . import spaces as SP
from . import witnesses as W
from . import kernels as K
from . import spectral as SG
from . import groups as G
from . import amenability as A


def _fail(message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _write_space(space, out, tol):
    try:
        SP.FiniteMetricSpace(space.points, space.dist, blocks=space.blocks)
    except ValueError as exc:
        _fail(f"output space failed invariant re-check: {exc}")
    io.dump(io.space_to_doc(space), out)
    click.echo(f"wrote space ({space.n} points, tol {tol}) to {out}")


@click.group()
def main():
    """coarselab: desk-scale constructions and checks for coarse geometry."""


# -- space ---------------------------------------------------------------------


@main.command()
@click.argument("action", type=click.Choice(["gen"]), default="gen")
@click.option("--kind", required=True, type=click.Choice(
    ["cycle", "path", "complete", "tree", "hypercube", "random-regular", "box", "nowak"]))
@click.option("--n", type=int, default=None, help="size parameter")
@click.option("--branch", type=int, default=2)
@click.option("--depth", type=int, default=3)
@click.option("--d", type=int, default=3, help="degree for random-regular")
@click.option("--n-max", type=int, default=3, help="block count for nowak")
@click.option("--base", type=int, default=2, help="cyclic base order (box/nowak)")
@click.option("--k", type=int, default=3, help="chain length for box")
@click.option("--seed", type=int, default=0)
@click.option("--tol", type=float, default=1e-9)
@click.option("--out", required=True, type=click.Path())
def space(action, kind, n, branch, depth, d, n_max, base, k, seed, tol, out):
    """Generate a finite metric space."""
    if kind == "cycle":
        sp = SP.cycle_space(n)
    elif kind == "path":
        sp = SP.path_space(n)
    elif kind == "complete":
        sp = SP.complete_space(n)
    elif kind == "tree":
        sp = SP.tree_space(branch, depth)
    elif kind == "hypercube":
        sp = SP.hypercube_space_graph(n)
    elif kind == "random-regular":
        sp = SG.random_regular_graph(n, d, seed=seed).metric_space()
    elif kind == "box":
        group = G.cyclic_group(base**k)
        subs = [[g for g in range(group.n) if g % (base**j) == 0] for j in range(1, k + 1)]
        sp = G.box_space(G.QuotientChain(group, subs))
    else:  # nowak
        sp = G.hypercube_space(G.cyclic_group(base), n_max)
    _write_space(sp, out, tol)


# -- group ---------------------------------------------------------------------


@main.command()
@click.argument("action", type=click.Choice(["gen"]), default="gen")
@click.option("--kind", required=True, type=click.Choice(["zn", "z2pow", "dihedral"]))
@click.option("--n", required=True, type=int)
@click.option("--out", required=True, type=click.Path())
def group(action, kind, n, out):
    """Generate a finite group with its word-length data."""
    if kind == "zn":
        g = G.cyclic_group(n)
    elif kind == "z2pow":
        g = G.z2_power_group(n)
    else:
        g = G.dihedral_group(n)
    io.dump(io.group_to_doc(g), out)
    click.echo(f"wrote group ({g.n} elements) to {out}")


def _named_group(kind: str, n: int) -> G.FiniteGroup:
    if kind == "zn":
        return G.cyclic_group(n)
    if kind == "z2pow":
        return G.z2_power_group(n)
    if kind == "dihedral":
        return G.dihedral_group(n)
    raise click.BadParameter(f"unknown group kind {kind!r}")


# -- witness -------------------------------------------------------------------


@main.command()
@click.argument("action", type=click.Choice(["build", "convert", "measure"]))
@click.option("--in", "inp", type=click.Path(exists=True), default=None)
@click.option("--space", "space_path", required=True, type=click.Path(exists=True))
@click.option("--kind", type=click.Choice(["ball", "tree"]), default="ball")
@click.option("--to", "target", default=None,
              type=click.Choice(["a-family", "lp", "tail", "partition", "vector", "kernel"]))
@click.option("--r", type=float, default=1.0)
@click.option("--eps", type=float, default=0.5)
@click.option("--s", type=float, default=1.0)
@click.option("--ray", type=int, default=None)
@click.option("--p", type=float, default=None, help="target exponent for lp conversions")
@click.option("--m", "m_quant", type=int, default=None, help="quantization constant")
@click.option("--delta", type=float, default=0.5)
@click.option("--truncate", type=float, default=0.0)
@click.option("--tol", type=float, default=1e-9)
@click.option("--out", type=click.Path(), default=None)
@click.option("--report", "report_path", type=click.Path(), default=None)
def witness(action, inp, space_path, kind, target, r, eps, s, ray, p, m_quant, delta, truncate, tol, out, report_path):
    """Build, convert, or measure certificates."""
    sp = io.space_from_doc(io.load(space_path))
    if action == "build":
        if kind == "ball":
            w = W.ball_witness(sp, s, r)
        else:
            if ray is None:
                _fail("tree witnesses need --ray (boundary vertex index)")
            w = W.tree_witness(sp, sp.points[ray], r, eps)
    else:
        if inp is None:
            _fail("--in is required")
        w = io.witness_from_doc(io.load(inp))
        if action == "convert":
            if target is None:
                _fail("--to is required for convert")
            params = {}
            if target == "lp" and w.form == "lp":
                params["q"] = p if p is not None else 2.0
            if target == "a-family" and m_quant is not None:
                params["M"] = m_quant
            if target == "tail" and w.form == "lp":
                params["delta"] = delta
            if target == "lp" and w.form == "kernel" and truncate:
                params["truncate"] = truncate
            try:
                w = W.convert_witness(w, target, sp, **params)
            except ValueError as exc:
                _fail(str(exc))
    # re-verify before writing anything
    bad = W.validate_witness(w, sp, tol)
    if bad:
        _fail("invariant violations: " + "; ".join(bad))
    rep = W.measure_witness(w, sp, r)
    if report_path:
        io.dump(io.report_to_doc(rep, tol), report_path)
    if out:
        io.dump(io.witness_to_doc(w), out)
        click.echo(f"wrote {w.form} witness to {out}")
    click.echo(
        f"form={w.form} eps_measured={rep.eps_measured:.6g} S_measured={rep.S_measured:.6g} "
        f"norm_dev={rep.norm_deviation:.3g} tol={tol}"
    )


# -- kernel --------------------------------------------------------------------


@main.command()
@click.argument("action", type=click.Choice(["classify", "transform", "bridge"]))
@click.option("--in", "inp", required=True, type=click.Path(exists=True))
@click.option("--space", "space_path", type=click.Path(exists=True), default=None)
@click.option("--op", type=click.Choice(["schur", "exp", "power", "gaussian"]), default=None)
@click.option("--other", type=click.Path(exists=True), default=None)
@click.option("--t", type=float, default=1.0)
@click.option("--alpha", type=float, default=0.5)
@click.option("--tol", type=float, default=1e-9)
@click.option("--out", type=click.Path(), default=None)
def kernel(action, inp, space_path, op, other, t, alpha, tol, out):
    """Classify, transform, or operator-bridge a kernel."""
    kern = io.kernel_from_doc(io.load(inp))
    if action == "classify":
        cls = K.classify_kernel(kern, tol)
        io_doc = {
            "schema": io.SCHEMA,
            "kind": "kernel-class",
            "positive_type": cls.positive_type,
            "negative_type": cls.negative_type,
            "min_eigenvalue": cls.min_eigenvalue,
            "max_meanzero_value": cls.max_meanzero_value,
            "tolerance": tol,
        }
        if out:
            io.dump(io_doc, out)
        click.echo(f"positive_type={cls.positive_type} negative_type={cls.negative_type} tol={tol}")
        return
    if action == "transform":
        if op is None:
            _fail("--op is required for transform")
        try:
            if op == "schur":
                if other is None:
                    _fail("--other kernel required for schur")
                result = K.schur_product(kern, io.kernel_from_doc(io.load(other)), tol)
            elif op == "exp":
                result = K.exp_transform(kern, t, tol)
            elif op == "power":
                result = K.power_transform(kern, alpha, tol)
            else:
                _fail("gaussian transform needs an embedding; use 'embed' first")
        except ValueError as exc:
            _fail(str(exc))
        # re-verify the advertised type before writing
        cls = K.classify_kernel(result, tol)
        expected_ok = cls.positive_type if op in ("schur", "exp") else cls.negative_type
        if not expected_ok:
            _fail(f"transform output failed its type re-check (op {op})")
        if out:
            io.dump(io.kernel_to_doc(result), out)
        click.echo(f"transform {op} done (tol {tol})")
        return
    if space_path is None:
        _fail("--space is required for bridge")
    sp = io.space_from_doc(io.load(space_path))
    rep = K.kernel_operator_bridge(kern, sp, tol=tol)
    doc = {
        "schema": io.SCHEMA,
        "kind": "operator-report",
        "operator_norm": rep.operator_norm,
        "ball_bound": rep.ball_bound,
        "norm_within_bound": rep.norm_within_bound,
        "psd_agreement": rep.psd_agreement,
        "propagation": rep.propagation,
        "tolerance": tol,
    }
    if out:
        io.dump(doc, out)
    click.echo(
        f"norm={rep.operator_norm:.6g} N={rep.ball_bound} within={rep.norm_within_bound} "
        f"psd_agreement={rep.psd_agreement}"
    )
    if not (rep.norm_within_bound and rep.psd_agreement):
        _fail("operator bridge invariants failed")


# -- spectral ------------------------------------------------------------------


@main.command()
@click.argument("action", type=click.Choice(["report", "expansion", "kazhdan"]))
@click.option("--in", "inp", type=click.Path(exists=True), default=None)
@click.option("--group", "group_kind", type=click.Choice(["zn", "z2pow", "dihedral"]), default=None)
@click.option("--n", type=int, default=None)
@click.option("--mode", type=click.Choice(["exact", "sampled"]), default="exact")
@click.option("--samples", type=int, default=None)
@click.option("--seed", type=int, default=0)
@click.option("--tol", type=float, default=1e-9)
@click.option("--out", type=click.Path(), default=None)
@click.option("--csv", "csv_path", type=click.Path(), default=None)
def spectral(action, inp, group_kind, n, mode, samples, seed, tol, out, csv_path):
    """Spectral gap reports, expansion constants, Kazhdan-style gaps."""
    if action == "kazhdan":
        if group_kind is None or n is None:
            _fail("kazhdan needs --group and --n")
        g = _named_group(group_kind, n)
        rep = SG.kazhdan_gap(g, seed=seed)
        doc = {
            "schema": io.SCHEMA,
            "kind": "kazhdan-report",
            "eps": rep.eps,
            "certified_lower": rep.cert_lower,
            "exact": rep.exact,
            "expansion_ok": rep.expansion_ok,
            "lambda": rep.lam,
            "seed": seed,
            "tolerance": tol,
        }
        if out:
            io.dump(doc, out)
        click.echo(f"eps={rep.eps:.9g} cert={rep.cert_lower:.9g} expansion_ok={rep.expansion_ok}")
        if rep.expansion_ok is False:
            _fail("per-quotient expansion inequality failed")
        return
    if inp is None:
        _fail("--in graph document required")
    graph = io.graph_from_doc(io.load(inp))
    if action == "report":
        rep = SG.laplacian_gap(graph)
        doc = {
            "schema": io.SCHEMA,
            "kind": "spectral-report",
            "lambda": rep.lam,
            "spectrum": rep.spectrum.tolist(),
            "tolerance": tol,
        }
        if out:
            io.dump(doc, out)
        if csv_path:
            io.spectrum_to_csv(rep.spectrum, csv_path)
        click.echo(f"lambda={rep.lam:.9g} n={graph.n} degree={graph.degree}")
        return
    rep = SG.expansion_constant(graph, mode=mode, samples=samples, seed=seed)
    doc = {
        "schema": io.SCHEMA,
        "kind": "expansion-report",
        "c": rep.c,
        "subset": rep.subset,
        "mode": rep.mode,
        "samples": rep.samples,
        "seed": seed,
        "tolerance": tol,
    }
    if out:
        io.dump(doc, out)
    click.echo(f"c={rep.c:.9g} mode={rep.mode} |A|={len(rep.subset)}")


# -- diam ----------------------------------------------------------------------


@main.command()
@click.option("--group", "group_kind", type=click.Choice(["zn", "z2pow", "dihedral"]), required=True)
@click.option("--n", required=True, type=int)
@click.option("--r", "r_values", multiple=True, type=float, default=(1.0,))
@click.option("--eps", "eps_values", multiple=True, type=float, default=(0.5,))
@click.option("--form", type=click.Choice(["folner", "witness"]), default="folner")
@click.option("--exact/--no-exact", default=None)
@click.option("--out", type=click.Path(), default=None)
@click.option("--csv", "csv_path", type=click.Path(), default=None)
def diam(group_kind, n, r_values, eps_values, form, exact, out, csv_path):
    """Minimal support radius table for a named group."""
    g = _named_group(group_kind, n)
    table = A.diam_table(g, list(r_values), list(eps_values), form=form, exact=exact)
    if not table.monotone():
        _fail("diam table violates monotonicity")
    doc = {
        "schema": io.SCHEMA,
        "kind": "diam-table",
        "target": f"{group_kind}({n})",
        "form": form,
        "entries": [
            {"R": r, "eps": e, "S": s, "optimal_defect": float(table.defects[(r, e, s)])}
            for (r, e), s in sorted(table.entries.items())
        ],
    }
    if out:
        io.dump(doc, out)
    if csv_path:
        table.target = f"{group_kind}({n})"
        io.diam_to_csv(table, csv_path)
    for (r, e), s in sorted(table.entries.items()):
        click.echo(f"R={r:g} eps={e:g} -> S={s:g} (defect {float(table.defects[(r, e, s)]):.6g})")


# -- embed ---------------------------------------------------------------------


@main.command()
@click.option("--in", "inp", required=True, type=click.Path(exists=True))
@click.option("--space", "space_path", type=click.Path(exists=True), default=None)
@click.option("--mode", type=click.Choice(["positive", "negative"]), default="negative")
@click.option("--tol", type=float, default=1e-9)
@click.option("--csv", "csv_path", type=click.Path(), default=None)
@click.option("--profile", "profile_path", type=click.Path(), default=None)
def embed(inp, space_path, mode, tol, csv_path, profile_path):
    """Embed a kernel and export coordinates / compression profile CSVs."""
    kern = io.kernel_from_doc(io.load(inp))
    try:
        emb = K.embed_from_kernel(kern, mode, tol)
    except ValueError as exc:
        _fail(str(exc))
    n = emb.coords.shape[0]
    ids = list(range(n))
    if csv_path:
        io.embedding_to_csv(emb.coords, ids, csv_path)
    if profile_path:
        if space_path is None:
            _fail("--space needed for a compression profile")
        sp = io.space_from_doc(io.load(space_path))
        prof = SP.compression_profile(SP.PointMap(sp, None, emb.coords))
        io.profile_to_csv(prof, profile_path)
    click.echo(f"embedded {n} points into dim {emb.dimension} (clipped mass {emb.clipped_mass:.3g}, tol {tol})")


# -- report --------------------------------------------------------------------


@main.command()
@click.option("--in", "inp", required=True, type=click.Path(exists=True))
@click.option("--space", "space_path", type=click.Path(exists=True), default=None)
@click.option("--tol", type=float, default=1e-9)
def report(inp, space_path, tol):
    """Re-verify a stored artifact's type invariants; exit 0 iff clean."""
    doc = io.load(inp)
    kind = doc.get("kind")
    if kind == "space":
        try:
            io.space_from_doc(doc)
        except ValueError as exc:
            _fail(f"space: {exc}")
        click.echo("space invariants ok")
        return
    if kind == "group":
        try:
            io.group_from_doc(doc)
        except ValueError as exc:
            _fail(f"group: {exc}")
        click.echo("group invariants ok")
        return
    if kind == "witness":
        if space_path is None:
            _fail("--space required to check a witness")
        sp = io.space_from_doc(io.load(space_path))
        w = io.witness_from_doc(doc)
        bad = W.validate_witness(w, sp, tol)
        if bad:
            _fail("witness: " + "; ".join(bad))
        click.echo("witness invariants ok")
        return
    if kind == "kernel":
        kern = io.kernel_from_doc(doc)
        cls = K.classify_kernel(kern, tol)
        click.echo(f"kernel symmetric; positive_type={cls.positive_type} negative_type={cls.negative_type}")
        return
    if kind == "graph":
        try:
            io.graph_from_doc(doc)
        except ValueError as exc:
            _fail(f"graph: {exc}")
        click.echo("graph invariants ok")
        return
    _fail(f"no invariant checks for kind {kind!r}")


if __name__ == "__main__":
    main()
