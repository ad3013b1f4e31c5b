"""
Command line front end.

Every command writes one JSON run report (to stdout or ``--output``)::

    {"command": ..., "inputDigest": ..., "residuals": [...], "result": ...,
     "timings": {...}, "exitStatus": ...}

Exit codes: 0 all residuals zero, 1 parse error, 2 residual failure,
3 integrality failure, 4 unsupported spin lift.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import random
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Callable, List, Optional, Tuple

from . import catalog
from .coeff_ring import TrigScalar, format_rational
from .exterior import InvariantForm
from .courant import (CourantData, Residual, Section, all_zero, check_action_compat, check_compatibility,
                      check_decomp_equations, decompose, dorfman, random_section, section_pairing)
from .spinor import DiracOperator, InvariantSpinor, SpinorSpace, UnsupportedK, dirac_double_bracket, gamma
from .tdual import (DualityMaps, DualityPackage, NotClosed, NotIntegral, SingularSystem, dualize,
                    harmonic_coefficients, verify_duality)

EXIT_OK, EXIT_PARSE, EXIT_RESIDUAL, EXIT_INTEGRALITY, EXIT_LIFT = 0, 1, 2, 3, 4


class ParseError(ValueError):
    pass


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("COURANT_TDUAL_THREADS", "1")))
    except ValueError:
        return 1


def _run_all(jobs: List[Callable[[], Residual]]) -> List[Residual]:
    """Evaluate independent residual jobs, in parallel when COURANT_TDUAL_THREADS > 1."""
    n = _threads()
    if n == 1 or len(jobs) < 2:
        return [job() for job in jobs]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(lambda job: job(), jobs))


# -- input -------------------------------------------------------------------

def _read(path: str):
    try:
        if path == "-":
            raw = sys.stdin.buffer.read()
        else:
            with open(path, "rb") as fh:
                raw = fh.read()
        return raw, json.loads(raw)
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc


def _load_data(args) -> Tuple[CourantData, Optional[str]]:
    if getattr(args, "example", None):
        try:
            ex = catalog.get(args.example)
        except KeyError as exc:
            raise ParseError(str(exc)) from exc
        return ex.data, None
    if not args.input:
        raise ParseError("--input or --example is required")
    raw, doc = _read(args.input)
    try:
        return CourantData.from_json(doc), hashlib.sha256(raw).hexdigest()
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed Courant data: {exc}") from exc


def _load_package(args) -> Tuple[DualityPackage, Optional[str]]:
    if not args.input:
        raise ParseError("--input is required")
    raw, doc = _read(args.input)
    if isinstance(doc, dict) and doc.get("command") == "dualize" and isinstance(doc.get("result"), dict):
        doc = doc["result"]  # a dualize report wraps the package
    try:
        return DualityPackage.from_json(doc), hashlib.sha256(raw).hexdigest()
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed duality package: {exc}") from exc


def _load_spinor(path: str, space: SpinorSpace) -> InvariantSpinor:
    _, doc = _read(path)
    try:
        terms = doc["terms"] if isinstance(doc, dict) else doc
        return InvariantSpinor.from_json(space, terms)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed spinor: {exc}") from exc


def _load_section(path: str, data: CourantData) -> Section:
    _, doc = _read(path)
    try:
        return Section.from_json(data.sig, data.g.n, doc)
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ParseError(f"malformed section: {exc}") from exc


def _load_r_tilde(path: Optional[str], data: CourantData):
    if path is None:
        return None
    _, doc = _read(path)
    try:
        return [[TrigScalar.from_json(data.sig.base_dim, x) for x in ri] for ri in doc]
    except (TypeError, ValueError) as exc:
        raise ParseError(f"malformed rTilde: {exc}") from exc


# -- float annotations --------------------------------------------------------

def _approx(doc):
    """Add decimal approximations next to exact rational strings (display only)."""
    if isinstance(doc, dict):
        out = {k: _approx(v) for k, v in doc.items()}
        for key in ("cos", "sin"):
            if key in doc and isinstance(doc[key], str) and "t" not in doc[key]:
                out[key + "Float"] = float(Fraction(doc[key]))
        return out
    if isinstance(doc, list):
        return [_approx(x) for x in doc]
    return doc


# -- commands -------------------------------------------------------------------

def _report(command: str, digest, residuals: List[Residual], result, timings, status: int) -> dict:
    return {"command": command, "inputDigest": digest, "residuals": [r.to_json() for r in residuals],
            "result": result, "timings": timings, "exitStatus": status}


def _status(residuals: List[Residual]) -> int:
    return EXIT_OK if all_zero(residuals) else EXIT_RESIDUAL


def cmd_check(args):
    data, digest = _load_data(args)
    res = _run_all([lambda: check_compatibility(data), lambda: check_action_compat(data)])
    res = [r for group in res for r in group]
    return res, {"name": data.name}, digest


def cmd_decompose(args):
    data, digest = _load_data(args)
    dec = decompose(data)
    res = check_decomp_equations(dec)
    return res, {"decomposition": dec.to_json()}, digest


def cmd_dualize(args):
    data, digest = _load_data(args)
    rt = _load_r_tilde(args.rtilde, data)
    if rt is None and getattr(args, "example", None):
        rt = catalog.get(args.example).r_tilde
    pkg = dualize(data, rt)
    res = check_compatibility(pkg.dual) + check_action_compat(pkg.dual)
    return res, pkg.to_json(), digest


def _package_summary(pkg: DualityPackage) -> dict:
    sig = pkg.dual.sig
    curv = {}
    for p in sig.fiber_positions():
        form = InvariantForm(sig, dict(sig.curvature(p)))
        curv[sig.names[p]] = {k: format_rational(v) for k, v in harmonic_coefficients(form).items()}
    return {"dualCurvatureHarmonic": curv, "dualH": pkg.dual.H.to_json()}


def cmd_verify(args):
    pkg, digest = _load_package(args)
    rep = verify_duality(pkg)
    det = rep.determinant
    res = rep.residuals + [Residual("nondegeneracy-det-minus-1", det - 1)]
    return res, dict(_package_summary(pkg), determinant=det.to_json()), digest


def cmd_dirac(args):
    data, digest = _load_data(args)
    space = SpinorSpace(data.sig, data.g)
    s = _load_spinor(args.spinor, space)
    out = DiracOperator(data)(s)
    return [], {"spinor": out.to_json()}, digest


def cmd_tau(args):
    pkg, digest = _load_package(args)
    maps = DualityMaps(pkg)
    s = _load_spinor(args.spinor, maps.space_M)
    return [], {"spinor": maps.tau(s).to_json()}, digest


def cmd_rho(args):
    pkg, digest = _load_package(args)
    maps = DualityMaps(pkg)
    u = _load_section(args.section, pkg.source)
    return [], {"section": maps.rho(u).to_json()}, digest


def demo_residuals(ex: catalog.Example, rng: random.Random, samples: int = 3):
    """End-to-end run on a built-in example: checks, duality, and the spinor and section maps."""
    data = ex.data
    res = check_compatibility(data) + check_action_compat(data)
    res += check_decomp_equations(decompose(data))
    pkg = dualize(data, ex.r_tilde)
    rep = verify_duality(pkg)
    res += rep.residuals + [Residual("nondegeneracy-det-minus-1", rep.determinant - 1)]
    res += [Residual("dual-" + r.name, r.value) for r in check_compatibility(pkg.dual) + check_action_compat(pkg.dual)]
    maps = DualityMaps(pkg)
    D, Dt = DiracOperator(data), DiracOperator(pkg.dual)

    def intertwining():
        return Residual("tau-dirac", [Dt(maps.tau(b)) - maps.tau(D(b)) for b in maps.space_M.basis()])

    jobs = [intertwining]
    g = data.g
    pairs = [(random_section(rng, data.sig, g.n), random_section(rng, data.sig, g.n)) for _ in range(samples)]
    basis = maps.space_M.basis()
    spinors = [basis[rng.randrange(len(basis))] for _ in range(samples)]

    def rho_pairing():
        return Residual("rho-pairing", [section_pairing(g, maps.rho(u), maps.rho(v)) - section_pairing(g, u, v)
                                        for u, v in pairs])

    def rho_bracket():
        return Residual("rho-bracket", [dorfman(pkg.dual, maps.rho(u), maps.rho(v)) - maps.rho(dorfman(data, u, v))
                                        for u, v in pairs])

    def tau_clifford():
        return Residual("tau-clifford", [maps.tau(gamma(u, s)) - gamma(maps.rho(u), maps.tau(s))
                                         for (u, _), s in zip(pairs, spinors)])

    def generating():
        return Residual("dirac-bracket", [dirac_double_bracket(D, u, v, s) - gamma(dorfman(data, u, v), s)
                                          for (u, v), s in zip(pairs, spinors)])

    jobs += [rho_pairing, rho_bracket, tau_clifford, generating]
    res += _run_all(jobs)
    return res, pkg


def cmd_demo(args):
    try:
        ex = catalog.get(args.name)
    except KeyError as exc:
        raise ParseError(str(exc)) from exc
    rng = random.Random(args.seed)
    res, pkg = demo_residuals(ex, rng)
    result = dict(_package_summary(pkg), example=ex.name, description=ex.description)
    return res, result, None


COMMANDS = {
    "check": cmd_check, "decompose": cmd_decompose, "dualize": cmd_dualize, "verify": cmd_verify,
    "dirac": cmd_dirac, "tau": cmd_tau, "rho": cmd_rho, "demo": cmd_demo,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="courant-tdual",
                                description="Exact checks and T-duality for invariant Courant algebroids.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="input JSON document ('-' for stdin)")
    common.add_argument("--output", help="write the report here instead of stdout")
    common.add_argument("--float", action="store_true", help="add decimal approximations to the report")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized sweeps")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("check", "decompose", "dualize"):
        s = sub.add_parser(name, parents=[common])
        s.add_argument("--example", help="use a built-in example instead of --input")
        if name == "dualize":
            s.add_argument("--rtilde", help="JSON list of g-valued sections r~_i (default 0)")
    sub.add_parser("verify", parents=[common])
    s = sub.add_parser("dirac", parents=[common])
    s.add_argument("--example", help="use a built-in example instead of --input")
    s.add_argument("--spinor", required=True)
    s = sub.add_parser("tau", parents=[common])
    s.add_argument("--spinor", required=True)
    s = sub.add_parser("rho", parents=[common])
    s.add_argument("--section", required=True)
    s = sub.add_parser("demo", parents=[common])
    s.add_argument("name", help="one of: " + ", ".join(catalog.NAMES))
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    digest = None
    residuals: List[Residual] = []
    try:
        residuals, result, digest = COMMANDS[args.command](args)
        status = _status(residuals)
    except ParseError as exc:
        result, status = {"error": str(exc)}, EXIT_PARSE
    except (NotIntegral, NotClosed) as exc:
        result, status = {"error": str(exc)}, EXIT_INTEGRALITY
    except UnsupportedK as exc:
        result, status = {"error": str(exc)}, EXIT_LIFT
    except SingularSystem as exc:
        result, status = {"error": str(exc)}, EXIT_RESIDUAL
    timings = {"seconds": round(time.perf_counter() - start, 6)}
    doc = _report(args.command, digest, residuals, result, timings, status)
    if args.float:
        doc = _approx(doc)
    text = dumps(doc)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if status:
        bad = [r.name for r in residuals if not r.is_zero]
        if bad:
            print("nonzero residuals: " + ", ".join(bad), file=sys.stderr)
        elif "error" in result:
            print(result["error"], file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
