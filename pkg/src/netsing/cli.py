"""Command line entry point ``netsing`` (analyze | kron | reduce | bifurcate).

Exit codes: 0 success, 2 schema or usage error, 3 numerical failure,
4 violated modelling hypotheses.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import graph_core
from .conductance import Linear, TanhNegative
from .continuation import ContinuationPath, trace
from .equilibrium import TOL_NEWTON, internal_state
from .errors import HypothesesViolated, NumericalError, SchemaError, DisconnectedGraph
from .graph_core import RANK_TOL, definiteness_of, kron_reduce
from .netfile import (bundled_path, diagram_to_csv, diagram_to_dict, network_to_dict,
                      parse_network)
from .network import NetworkModel, laplacian_at
from .singularity import (TOL_CLASS, classify_bifurcation, detect_singularity, gain_path,
                          ls_coefficients_closed_form, ls_coefficients_fd, parameter_path)

log = logging.getLogger("netsing")

EXIT_OK, EXIT_SCHEMA, EXIT_NUMERIC, EXIT_HYPOTHESIS = 0, 2, 3, 4

PRESETS = {
    "fig2-top": {"beta": 0.5, "range": (0.3, 0.7), "u_B": "zero"},
    "fig2-center": {"beta": 0.5, "range": (0.3, 0.7), "u_B": "aligned"},
    "fig2-bottom": {"beta": 0.5, "range": (0.3, 0.7), "u_B": "orthogonal"},
}
CENTER_MAGNITUDE = 1e-2
BOTTOM_MAGNITUDE = 0.5


class UsageError(Exception):
    pass


def _fmt(x: float) -> str:
    return f"{x:.12g}"


# --- helpers ---------------------------------------------------------------

def single_negative_edge(net: NetworkModel) -> int | None:
    """Index of the only negative edge when every other edge is a linear resistor."""
    neg = net.negative_edges()
    if len(neg) != 1:
        return None
    if any(not isinstance(m, Linear) for e, m in enumerate(net.models) if e != neg[0]):
        return None
    return neg[0]


def set_gain(net: NetworkModel, edge: int, k: float) -> NetworkModel:
    model = net.models[edge]
    if isinstance(model.gain, str):
        return net.with_parameters({model.gain: k})
    return net.with_edge_model(edge, replace(model, gain=k))


def set_beta(net: NetworkModel, beta: float) -> NetworkModel:
    if "beta" in net.parameters:
        return net.with_parameters(beta=beta)
    tanh = [e for e, m in enumerate(net.models) if isinstance(m, TanhNegative)]
    if not tanh:
        raise HypothesesViolated("--beta given but the network has no tanh_negative edge")
    for e in tanh:
        m = net.models[e]
        if isinstance(m.beta, str):
            net = net.with_parameters({m.beta: beta})
        else:
            net = net.with_edge_model(e, replace(m, beta=beta))
    return net


def gain_certificate(net: NetworkModel, tol: float = RANK_TOL) -> dict | None:
    edge = single_negative_edge(net)
    if edge is None:
        return None
    i, j = net.edges[edge]
    g_plus = net.positive_subgraph()
    cert = graph_core.singular_gain(g_plus, i, j, tol)
    return {"edge": [i + 1, j + 1], "k_star": cert.critical_gain,
            "r_ij": cert.effective_resistance, "v": cert.kernel_vector.tolist()}


def critical_projection(net: NetworkModel, tol: float = RANK_TOL) -> np.ndarray:
    """Boundary critical vector at z = 0, moving a single negative edge to its critical gain."""
    edge = single_negative_edge(net)
    probe = net
    if edge is not None:
        cert = gain_certificate(net, tol)
        probe = set_gain(net, edge, cert["k_star"])
    rep = detect_singularity(probe, np.zeros(net.n_nodes), tol)
    if rep is not None:
        return rep.v_hat
    L = laplacian_at(net, np.zeros(net.n_nodes))
    Q = graph_core.shift_basis(net.n_nodes)
    mu, U = np.linalg.eigh(Q.T @ L @ Q)
    v = Q @ U[:, np.argmin(np.abs(mu))]
    vb = v[net.boundary] - v[net.boundary].mean()
    return graph_core.sign_normalize(vb)


# --- commands --------------------------------------------------------------

def cmd_analyze(net: NetworkModel, rank_tol: float = RANK_TOL) -> dict:
    """Spectrum, corank and definiteness of L(0), plus the singular-gain certificate."""
    z0 = np.zeros(net.n_nodes)
    L = laplacian_at(net, z0)
    spectrum = np.linalg.eigvalsh(L)
    cr = graph_core.corank(L, rank_tol)
    cls = definiteness_of(L, rank_tol)
    out = {"spectrum": spectrum.tolist(), "corank": cr,
           "definiteness": cls.value if cls else "undetermined"}
    cert = gain_certificate(net, rank_tol)
    if cert is not None:
        out["certificate"] = cert
    if cr >= 2:
        status = f"SINGULAR, corank {cr}"
        if cert is not None:
            i, j = cert["edge"]
            status += f", k* = {_fmt(cert['k_star'])}, r_{i}{j} = {_fmt(cert['r_ij'])}"
    else:
        status = f"regular, {out['definiteness']}"
    out["status"] = status
    return out


def cmd_kron(net: NetworkModel, z_B=None, rank_tol: float = RANK_TOL) -> dict:
    """Reduced network file: Kron reduction of L at ``(z_B, zbar_C(z_B))`` as an edge list."""
    if not net.central:
        return network_to_dict(net)
    z_B = np.zeros(net.n_boundary) if z_B is None else np.asarray(z_B, dtype=float)
    z = internal_state(net, z_B)
    red = kron_reduce(laplacian_at(net, z), net.partition, rank_tol)
    n_B = net.n_boundary
    scale = max(1.0, np.max(np.abs(red)))
    edges = []
    for a in range(n_B):
        for b in range(a + 1, n_B):
            w = -red[a, b]
            if abs(w) <= rank_tol * scale:
                continue
            if w > 0:
                model = {"type": "linear", "resistance": 1.0 / w}
            else:
                model = {"type": "cubic_negative", "gain": -w, "cubic": 0.0}
            edges.append({"from": a + 1, "to": b + 1, "model": model})
    if not edges:
        raise NumericalError("reduced Laplacian has no edges")
    return {"nodes": n_B, "terminals": list(range(1, n_B + 1)), "edges": edges,
            "labels": [t + 1 for t in net.terminals]}


def cmd_reduce(net: NetworkModel, *, beta: float | None = None, param_dir: str | None = None,
               fd_step: float | None = None, tol_class: float = TOL_CLASS,
               rank_tol: float = RANK_TOL) -> dict:
    """Lyapunov-Schmidt coefficients (finite differences and closed form) and the class."""
    if beta is not None:
        net = set_beta(net, beta)
    notices = []
    edge = single_negative_edge(net)
    if edge is not None:
        k_star = gain_certificate(net, rank_tol)["k_star"]
        gain = net.bound_models[edge].gain
        if abs(gain - k_star) > 1e-12 * max(1.0, k_star):
            notices.append(f"gain moved from {_fmt(gain)} to the critical value {_fmt(k_star)}")
            net = set_gain(net, edge, k_star)
    z0 = np.zeros(net.n_nodes)
    report = detect_singularity(net, z0, rank_tol)
    if report is None:
        raise NumericalError("network is not singular at z = 0")
    if param_dir is not None:
        if param_dir not in net.parameters:
            raise UsageError(f"unknown parameter {param_dir!r}")
        path = parameter_path(net, param_dir)
    else:
        path = gain_path(net)
    fd = ls_coefficients_fd(net, report, path, h=fd_step)
    out = {"singularity": report.to_dict(), "fd": fd.to_dict()}
    try:
        cf = ls_coefficients_closed_form(net, rank_tol)
        if param_dir is not None and edge is not None and \
                param_dir != net.models[edge].gain:
            raise HypothesesViolated("closed forms refer to the negative-edge gain direction")
        out["closed_form"] = cf.to_dict()
        out["relative_deviation"] = {
            k: abs(getattr(fd, k) - getattr(cf, k)) / max(abs(getattr(cf, k)), 1e-300)
            if getattr(cf, k) != 0 else abs(getattr(fd, k))
            for k in ("f_xx", "f_lambdax", "f_xxx")}
    except (HypothesesViolated, DisconnectedGraph) as exc:
        notices.append(f"closed form skipped: {exc}")
    cls = classify_bifurcation(fd, tol_class)
    out["classification"] = cls.kind.value
    out["notices"] = notices
    return out


def boundary_currents(kind: str, v_hat: np.ndarray) -> np.ndarray:
    if kind == "zero":
        return np.zeros_like(v_hat)
    if kind == "aligned":
        return CENTER_MAGNITUDE * v_hat
    if kind == "orthogonal":
        if v_hat.size != 3:
            raise UsageError("orthogonal preset needs exactly three terminals")
        d = np.cross(v_hat, np.ones(3))
        d /= np.linalg.norm(d)
        # for v_hat ~ (-2, 1, 1) this is +-(0, 1, -1)/sqrt(2); fix the sign
        if d[1] < 0:
            d = -d
        return BOTTOM_MAGNITUDE * d
    raise UsageError(f"unknown current preset {kind!r}")


def cmd_bifurcate(net: NetworkModel, *, param: str | None, lam_range, u_B=None,
                  seeds=None, step: float = 1e-2, min_step: float = 1e-6,
                  max_step: float = 5e-2, tol: float = TOL_NEWTON,
                  rank_tol: float = RANK_TOL):
    """Trace the diagram over ``param`` in ``lam_range``; returns (diagram, projection)."""
    lo, hi = lam_range
    if not lo < hi:
        raise UsageError(f"invalid range {lo}:{hi}")
    u_B = np.zeros(net.n_boundary) if u_B is None else np.asarray(u_B, dtype=float)
    if u_B.shape != (net.n_boundary,):
        raise UsageError(f"expected {net.n_boundary} boundary currents")
    if abs(u_B.sum()) > 1e-10:
        raise UsageError("boundary currents must sum to zero")
    edge = single_negative_edge(net)
    if param is None:
        if edge is None or not isinstance(net.models[edge].gain, str):
            raise UsageError("--param is required for this network")
        param = net.models[edge].gain
    if param not in net.parameters:
        raise UsageError(f"unknown parameter {param!r}")

    def parameter_map(lam):
        return u_B, net.with_parameters({param: lam})

    projection = critical_projection(net, rank_tol)
    seeds = [lo, hi] if not seeds else list(seeds)
    path = ContinuationPath(lambda_range=(lo, hi), parameter_map=parameter_map,
                            initial_points=[(s, None) for s in seeds], projection=projection,
                            step=step, min_step=min_step, max_step=max_step, tol=tol)
    return trace(net, path), projection


def preset_inputs(name: str, net: NetworkModel):
    preset = PRESETS[name]
    net = set_beta(net, preset["beta"])
    v_hat = critical_projection(net)
    return net, preset["range"], boundary_currents(preset["u_B"], v_hat)


# --- argument parsing -----------------------------------------------------

def _parse_sets(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"--set expects NAME=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = float(v)
    return out


def _load(args) -> NetworkModel:
    source = args.file if args.file else bundled_path("fig1.json")
    net = parse_network(source)
    sets = _parse_sets(getattr(args, "set", None))
    if sets:
        try:
            net = net.with_parameters(sets)
        except KeyError as exc:
            raise UsageError(str(exc)) from None
    return net


def _parse_range(text: str):
    try:
        a, b = (float(p) for p in text.split(":"))
    except ValueError:
        raise UsageError(f"--range expects a:b, got {text!r}") from None
    return a, b


def _write(text: str, path: str | None):
    if path and path != "-":
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="netsing", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("file", nargs="?", help="network JSON (default: bundled fig1.json)")
        sp.add_argument("--set", action="append", metavar="NAME=VALUE",
                        help="override a network parameter (repeatable)")
        sp.add_argument("--rank-tol", type=float, default=RANK_TOL)

    sp = sub.add_parser("analyze", help="spectrum, corank and singular gain at z = 0")
    common(sp)
    sp.add_argument("--json", action="store_true", help="machine-readable output")

    sp = sub.add_parser("kron", help="Kron-reduced network at an operating point")
    common(sp)
    sp.add_argument("--zb", help="comma-separated terminal potentials (default zeros)")
    sp.add_argument("-o", "--output")

    sp = sub.add_parser("reduce", help="Lyapunov-Schmidt coefficients and classification")
    common(sp)
    sp.add_argument("--beta", type=float)
    sp.add_argument("--param-dir", help="parameter moved by lambda (default: negative-edge gain)")
    sp.add_argument("--fd-step", type=float)
    sp.add_argument("--tol-class", type=float, default=TOL_CLASS)
    sp.add_argument("-o", "--output")

    sp = sub.add_parser("bifurcate", help="trace a bifurcation diagram to CSV")
    common(sp)
    sp.add_argument("--preset", choices=sorted(PRESETS))
    sp.add_argument("--param", help="continuation parameter name")
    sp.add_argument("--range", dest="lam_range", help="lambda range a:b")
    sp.add_argument("--input", help="JSON file with the terminal current vector")
    sp.add_argument("--seeds", help="comma-separated seed parameter values")
    sp.add_argument("--step", type=float, default=1e-2)
    sp.add_argument("--min-step", type=float, default=1e-6)
    sp.add_argument("--max-step", type=float, default=5e-2)
    sp.add_argument("--tol-newton", type=float, default=TOL_NEWTON)
    sp.add_argument("--out", help="CSV path (default stdout)")
    sp.add_argument("--special-out", help="JSON sidecar path (default OUT.special.json)")
    return p


def _read_currents(path: str) -> np.ndarray:
    doc = json.loads(Path(path).read_text())
    if isinstance(doc, dict):
        doc = doc.get("u_B")
    if not isinstance(doc, list):
        raise SchemaError(path, "expected a list of terminal currents or {\"u_B\": [...]}")
    return np.asarray(doc, dtype=float)


def run(args) -> int:
    if args.command == "analyze":
        res = cmd_analyze(_load(args), args.rank_tol)
        if args.json:
            print(json.dumps(res, indent=2))
        else:
            print("spectrum: " + " ".join(_fmt(x) for x in res["spectrum"]))
            print(f"corank: {res['corank']}")
            print(f"definiteness: {res['definiteness']}")
            if "certificate" in res:
                c = res["certificate"]
                i, j = c["edge"]
                print(f"k* = {_fmt(c['k_star'])}, r_{i}{j} = {_fmt(c['r_ij'])}")
                print("v = " + " ".join(_fmt(x) for x in c["v"]))
            print(res["status"])
        return EXIT_OK

    if args.command == "kron":
        net = _load(args)
        z_B = None
        if args.zb:
            z_B = [float(x) for x in args.zb.split(",")]
            if len(z_B) != net.n_boundary:
                raise UsageError(f"--zb needs {net.n_boundary} values")
        _write(json.dumps(cmd_kron(net, z_B, args.rank_tol), indent=2) + "\n", args.output)
        return EXIT_OK

    if args.command == "reduce":
        res = cmd_reduce(_load(args), beta=args.beta, param_dir=args.param_dir,
                         fd_step=args.fd_step, tol_class=args.tol_class,
                         rank_tol=args.rank_tol)
        for note in res["notices"]:
            print(f"notice: {note}", file=sys.stderr)
        _write(json.dumps(res, indent=2) + "\n", args.output)
        return EXIT_OK

    if args.command == "bifurcate":
        net = _load(args)
        u_B = _read_currents(args.input) if args.input else None
        lam_range = _parse_range(args.lam_range) if args.lam_range else None
        if args.preset:
            net, preset_range, preset_u = preset_inputs(args.preset, net)
            lam_range = lam_range or preset_range
            u_B = preset_u if u_B is None else u_B
        if lam_range is None:
            raise UsageError("--range is required without --preset")
        seeds = [float(s) for s in args.seeds.split(",")] if args.seeds else None
        diagram, _ = cmd_bifurcate(net, param=args.param, lam_range=lam_range, u_B=u_B,
                                   seeds=seeds, step=args.step, min_step=args.min_step,
                                   max_step=args.max_step, tol=args.tol_newton,
                                   rank_tol=args.rank_tol)
        _write(diagram_to_csv(diagram, net.n_nodes), args.out)
        sidecar = args.special_out or (f"{args.out}.special.json"
                                       if args.out and args.out != "-" else None)
        if sidecar:
            Path(sidecar).write_text(json.dumps(diagram_to_dict(diagram), indent=2) + "\n")
        return EXIT_OK
    raise UsageError(f"unknown command {args.command}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except UsageError as exc:
        parser.error(str(exc))
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (HypothesesViolated, DisconnectedGraph) as exc:
        print(f"hypothesis violated: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
