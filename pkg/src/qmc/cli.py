"""``qmc`` command line: state files in, JSON reports out.

Exit codes: 0 pass, 1 analytic failure (not Markov, not saturated, not
recoverable), 2 parse error, 3 validation error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from itertools import combinations

import numpy as np

from . import apps, markov
from .channels import QuantumChannel, minimal_kraus
from .entropy import Ensemble, conditional_mutual_information, mutual_information, von_neumann_entropy
from .errors import AlgebraError, FactorizationError, NotMarkovError, QMCError, ShapeError, ValidationError
from .generators import (
    classical_chain,
    commuting_ensemble,
    ghz_state,
    ginibre_state,
    planted_markov_state,
    random_ensemble,
)
from .linops import DensityOperator, Shape

FORMAT_VERSION = "1"
MAX_DIM = 4096

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_INVALID = 0, 1, 2, 3


class ParseError(Exception):
    pass


# ---------------------------------------------------------------- file format

def encode_matrix(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def decode_matrix(obj) -> np.ndarray:
    try:
        arr = np.array(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"matrix is not a nested array of [re, im] pairs: {exc}") from None
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ParseError(f"matrix must have shape (d, d, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("matrix contains non-finite entries")
    return arr[..., 0] + 1j * arr[..., 1]


def state_to_json(state: DensityOperator) -> dict:
    return {"format_version": FORMAT_VERSION, "dims": [int(d) for d in state.dims],
            "labels": list(state.labels), "matrix": encode_matrix(state.matrix)}


def _check_dims(dims) -> list:
    if not isinstance(dims, list) or not dims or not all(isinstance(d, int) and d > 0 for d in dims):
        raise ParseError("dims must be a non-empty list of positive integers")
    if int(np.prod(dims)) > MAX_DIM:
        raise ValidationError(f"total dimension {int(np.prod(dims))} exceeds the cap of {MAX_DIM}")
    return dims


def state_from_json(obj, tol: float = 1e-9) -> DensityOperator:
    if not isinstance(obj, dict):
        raise ParseError("state file must be a JSON object")
    for key in ("dims", "matrix"):
        if key not in obj:
            raise ParseError(f"state file lacks '{key}'")
    dims = _check_dims(obj["dims"])
    labels = obj.get("labels")
    m = decode_matrix(obj["matrix"])
    if m.shape != (int(np.prod(dims)),) * 2:
        raise ValidationError(f"matrix shape {m.shape} does not match dims {dims}")
    return DensityOperator(m, Shape(dims, labels), herm_tol=tol)


def channel_to_json(channel: QuantumChannel) -> dict:
    return {"format_version": FORMAT_VERSION, "in_dims": list(channel.in_shape.dims),
            "out_dims": list(channel.out_shape.dims),
            "kraus": [encode_matrix(k) for k in channel.kraus]}


def channel_from_json(obj) -> QuantumChannel:
    if not isinstance(obj, dict) or not all(k in obj for k in ("in_dims", "out_dims", "kraus")):
        raise ParseError("channel file needs 'in_dims', 'out_dims' and 'kraus'")
    in_dims, out_dims = _check_dims(obj["in_dims"]), _check_dims(obj["out_dims"])
    if not isinstance(obj["kraus"], list) or not obj["kraus"]:
        raise ParseError("'kraus' must be a non-empty list")
    kraus = [decode_matrix(k) for k in obj["kraus"]]
    return QuantumChannel(kraus, Shape(in_dims), Shape(out_dims))


def ensemble_to_json(ensemble: Ensemble) -> dict:
    return {"format_version": FORMAT_VERSION, "probs": [float(p) for p in ensemble.probs.probs],
            "states": [state_to_json(s) for s in ensemble.states]}


def ensemble_from_json(obj, tol: float) -> Ensemble:
    if not isinstance(obj, dict) or "probs" not in obj or "states" not in obj:
        raise ParseError("ensemble file needs 'probs' and 'states'")
    try:
        probs = np.array(obj["probs"], dtype=float)
    except (TypeError, ValueError):
        raise ParseError("'probs' must be a list of numbers") from None
    return Ensemble(probs, [state_from_json(s, tol) for s in obj["states"]])


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, allow_nan=False) + "\n"


def _read(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    with open(path, "rb") as fh:
        return fh.read()


def _load(path: str) -> tuple:
    raw = _read(path)
    try:
        obj = json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"{path}: malformed JSON ({exc})") from None
    return obj, hashlib.sha256(raw).hexdigest()


def _report(command: str, digests, results: dict, tol: float, seed=None, **extra_tol) -> dict:
    return {"command": command, "inputs": list(digests), "results": results,
            "tolerances": {"tol": tol, **extra_tol}, "seed": seed}


def _tripartite(state: DensityOperator) -> DensityOperator:
    if len(state.dims) != 3:
        raise ValidationError(f"expected a tripartite state, got {len(state.dims)} subsystems")
    return state


# ---------------------------------------------------------------- commands

def cmd_info(path: str, tol: float, seed: int) -> tuple:
    obj, digest = _load(path)
    state = state_from_json(obj, tol)
    labels = list(state.labels)
    entropies, mutual = {}, {}
    for r in range(1, len(labels) + 1):
        for keep in combinations(labels, r):
            entropies["".join(keep)] = von_neumann_entropy(state.reduce(list(keep)).matrix)
    for r in range(2, len(labels) + 1):
        for keep in combinations(labels, r):
            sub = state.reduce(list(keep))
            for k in range(1, r):
                for left in combinations(keep, k):
                    right = [x for x in keep if x not in left]
                    if left[0] != keep[0]:
                        continue
                    key = "".join(left) + ":" + "".join(right)
                    mutual[key] = mutual_information(sub, (list(left), right))
    results = {"dims": list(state.dims), "labels": labels, "entropies": entropies,
               "mutual_information": mutual}
    if len(labels) == 3:
        results["cmi"] = conditional_mutual_information(state)
    return _report("info", [digest], results, tol), EXIT_OK


def _decomposition_json(d: markov.MarkovDecomposition) -> dict:
    return {
        "b_basis": encode_matrix(d.b_basis),
        "support_dim": int(d.support_dim),
        "blocks": [{"dims": list(b.dims), "q": float(b.q),
                    "rho_AbL": state_to_json(b.rho_al), "rho_bRC": state_to_json(b.rho_rc)}
                   for b in d.blocks],
    }


def cmd_decompose(path: str, tol: float, seed: int) -> tuple:
    obj, digest = _load(path)
    state = _tripartite(state_from_json(obj, tol))
    try:
        d = markov.decompose(state, tol=tol, seed=seed)
    except NotMarkovError as exc:
        results = {"passed": False, "cmi": float(exc.cmi), "recovery_residual": float(exc.residual),
                   "reason": str(exc)}
        return _report("decompose", [digest], results, tol, seed), EXIT_FAIL
    except (FactorizationError, AlgebraError) as exc:
        results = {"passed": False, "reason": str(exc)}
        return _report("decompose", [digest], results, tol, seed), EXIT_FAIL
    results = {"passed": True, "block_dims": [list(b) for b in d.block_dims],
               "q": [float(x) for x in d.q], "reconstruction_residual": float(d.residual),
               "decomposition": _decomposition_json(d)}
    return _report("decompose", [digest], results, tol, seed), EXIT_OK


def cmd_recover(path: str, tol: float, seed: int) -> tuple:
    obj, digest = _load(path)
    state = _tripartite(state_from_json(obj, tol))
    verdict = markov.is_markov(state, tol)
    restricted = markov._restrict_b(state).rho
    rank = len(minimal_kraus(markov.petz_recovery_channel(restricted.reduce(restricted.labels[1:]))).kraus)
    results = {"recovery_residual": float(verdict.residual), "cmi": float(verdict.cmi),
               "kraus_rank": rank, "passed": verdict.passed}
    code = EXIT_OK if verdict.passed else EXIT_FAIL
    return _report("recover", [digest], results, tol, residual_tol=10 * float(np.sqrt(tol))), code


def cmd_qec(sigma_path: str, channel_path: str, tol: float) -> tuple:
    (s_obj, s_dig), (c_obj, c_dig) = _load(sigma_path), _load(channel_path)
    sigma, phi = state_from_json(s_obj, tol), channel_from_json(c_obj)
    v = apps.qec_check(sigma, phi, tol)
    results = {"gap": v.gap, "recoverable": v.recoverable, "recovery_residual": v.recovery_residual,
               "verified": v.verified, "entropy": von_neumann_entropy(sigma.matrix)}
    if v.recovery is not None:
        results["recovery"] = channel_to_json(v.recovery)
    code = EXIT_OK if v.recoverable and v.verified else EXIT_FAIL
    return _report("qec", [s_dig, c_dig], results, tol), code


def cmd_holevo(ensemble_path: str, channel_path: str, tol: float, seed: int) -> tuple:
    (e_obj, e_dig), (c_obj, c_dig) = _load(ensemble_path), _load(channel_path)
    ens, phi = ensemble_from_json(e_obj, tol), channel_from_json(c_obj)
    v = apps.holevo_equality_check(ens, phi, tol, seed)
    results = {"chi_before": v.chi_before, "chi_after": v.chi_after,
               "drop": v.chi_before - v.chi_after, "saturated": v.saturated,
               "commuting": v.commuting, "outputs_commuting": v.outputs_commuting,
               "block_dims": None if v.block_dims is None else [list(b) for b in v.block_dims],
               "flags_diagonal": v.flags_diagonal}
    return _report("holevo", [e_dig, c_dig], results, tol, seed), EXIT_OK if v.saturated else EXIT_FAIL


def _int_list(text: str) -> list:
    try:
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise ValidationError(f"expected comma-separated integers, got {text!r}") from None


def _blocks(text: str) -> list:
    try:
        return [tuple(int(v) for v in item.lower().split("x")) for item in text.split(",")]
    except ValueError:
        raise ValidationError(f"blocks must look like 2x1,1x2, got {text!r}") from None


def cmd_gen(args) -> dict:
    rng = np.random.default_rng(args.seed)
    kind = args.kind
    if kind == "ginibre":
        dims = _int_list(args.dims or "2,2,2")
        _check_dims(dims)
        return state_to_json(ginibre_state(rng, dims, rank=args.rank))
    if kind == "markov":
        blocks = _blocks(args.blocks or "2x1,1x2")
        if any(len(b) != 2 or min(b) < 1 for b in blocks):
            raise ValidationError("each block needs two positive dimensions")
        q = [float(x) for x in args.q.split(",")] if args.q else [1 / len(blocks)] * len(blocks)
        q = np.array(q)
        if len(q) != len(blocks) or np.any(q < 0) or abs(q.sum() - 1) > 1e-9:
            raise ValidationError("--q must be a distribution with one weight per block")
        q = q / q.sum()
        da, dc = _int_list(args.dims or "2,2")
        _check_dims([da, sum(a * b for a, b in blocks), dc])
        state, _ = planted_markov_state(rng, da, dc, blocks, q)
        return state_to_json(state)
    if kind == "classical-chain":
        dims = _int_list(args.dims or "2,2,2")
        if len(dims) != 3:
            raise ValidationError("classical-chain needs three dims")
        _check_dims(dims)
        p = classical_chain(rng, dims)
        return state_to_json(apps.embed_distribution(p, ["A", "B", "C"]))
    if kind == "ghz":
        d = args.d or 2
        _check_dims([d] * args.parties)
        return state_to_json(ghz_state(d, args.parties))
    if kind == "cq-ensemble":
        d, n = args.d or 2, args.n
        _check_dims([d])
        if args.commuting:
            ens, basis = commuting_ensemble(rng, d, n)
            out = ensemble_to_json(ens)
            out["eigenbasis"] = encode_matrix(basis)
            return out
        return ensemble_to_json(random_ensemble(rng, d, n))
    raise ValidationError(f"unknown kind {kind!r}")


# ---------------------------------------------------------------- driver

_SINGLE = {"info": cmd_info, "decompose": cmd_decompose, "recover": cmd_recover}


def _guarded(fn, *a) -> tuple:
    """Run a command, mapping failures to (diagnostic, exit code)."""
    try:
        return fn(*a)
    except ParseError as exc:
        return {"error": str(exc)}, EXIT_PARSE
    except OSError as exc:
        return {"error": f"cannot read input: {exc}"}, EXIT_PARSE
    except (ValidationError, ShapeError, QMCError, ValueError) as exc:
        return {"error": str(exc)}, EXIT_INVALID


def _single_job(payload) -> tuple:
    command, path, tol, seed = payload
    return _guarded(_SINGLE[command], path, tol, seed)


def _pretty(obj, indent: str = "") -> str:
    if isinstance(obj, dict):
        lines = []
        for k in sorted(obj):
            v = obj[k]
            if isinstance(v, (dict, list)) and v and not _flat(v):
                lines.append(f"{indent}{k}:")
                lines.append(_pretty(v, indent + "  "))
            else:
                lines.append(f"{indent}{k}: {_scalar(v)}")
        return "\n".join(lines)
    if isinstance(obj, list):
        return "\n".join(f"{indent}- [{i}]\n{_pretty(v, indent + '  ')}" for i, v in enumerate(obj))
    return indent + _scalar(obj)


def _flat(v) -> bool:
    return isinstance(v, list) and all(
        isinstance(x, (int, float, str, bool)) or x is None or _flat(x) for x in v)


def _scalar(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, list):
        return "[" + ", ".join(_scalar(x) for x in v) + "]"
    return json.dumps(v)


def _strip_matrices(obj):
    """Drop bulky matrix payloads for the human-readable view."""
    if isinstance(obj, dict):
        return {k: _strip_matrices(v) for k, v in obj.items()
                if k not in ("matrix", "b_basis", "kraus", "decomposition", "recovery")}
    if isinstance(obj, list):
        return [_strip_matrices(v) for v in obj]
    return obj


def _emit(obj, args) -> None:
    text = _pretty(_strip_matrices(obj)) + "\n" if args.pretty else dumps(obj)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=1e-9, help="analytic tolerance (default 1e-9)")
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--jobs", type=int, default=1, help="workers for independent input files")
    common.add_argument("--output", help="write the result here instead of standard output")
    common.add_argument("--pretty", action="store_true", help="human-readable summary")

    p = argparse.ArgumentParser(prog="qmc", description="Strong subadditivity equality toolkit.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("info", "entropies, mutual informations and CMI"),
                        ("decompose", "block decomposition of a Markov state"),
                        ("recover", "Petz recovery residual and Kraus rank")):
        s = sub.add_parser(name, parents=[common], help=help_)
        s.add_argument("files", nargs="*", default=["-"], help="state files ('-' for stdin)")
    s = sub.add_parser("qec", parents=[common], help="reversibility via coherent information")
    s.add_argument("sigma")
    s.add_argument("channel")
    s = sub.add_parser("holevo", parents=[common], help="Holevo quantity before and after a channel")
    s.add_argument("ensemble")
    s.add_argument("channel")
    s = sub.add_parser("gen", parents=[common], help="generate a seeded state or ensemble file")
    s.add_argument("kind", choices=["ginibre", "markov", "classical-chain", "ghz", "cq-ensemble"])
    s.add_argument("--dims", help="comma-separated dims (markov: dA,dC)")
    s.add_argument("--blocks", help="markov blocks as dLxdR list, e.g. 2x1,1x2")
    s.add_argument("--q", help="markov block weights, e.g. 0.3,0.7")
    s.add_argument("--rank", type=int, help="ginibre rank")
    s.add_argument("--d", type=int, help="local dimension (ghz, cq-ensemble)")
    s.add_argument("--parties", type=int, default=3, help="ghz parties")
    s.add_argument("--n", type=int, default=2, help="cq-ensemble size")
    s.add_argument("--commuting", action="store_true", help="cq-ensemble diagonal in one basis")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    if args.tol <= 0 or not np.isfinite(args.tol):
        print("qmc: --tol must be positive", file=sys.stderr)
        return EXIT_INVALID

    if args.command == "gen":
        out, code = _guarded(lambda: (cmd_gen(args), EXIT_OK))
    elif args.command == "qec":
        out, code = _guarded(cmd_qec, args.sigma, args.channel, args.tol)
    elif args.command == "holevo":
        out, code = _guarded(cmd_holevo, args.ensemble, args.channel, args.tol, args.seed)
    else:
        payloads = [(args.command, f, args.tol, args.seed) for f in args.files]
        if args.jobs > 1 and len(payloads) > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                runs = list(pool.map(_single_job, payloads))
        else:
            runs = [_single_job(pl) for pl in payloads]
        for (out, code), pl in zip(runs, payloads):
            if "error" in out:
                print(f"qmc {args.command}: {out['error']}", file=sys.stderr)
        if len(runs) == 1:
            out, code = runs[0]
        else:
            out, code = [r[0] for r in runs], max(r[1] for r in runs)
        if isinstance(out, dict) and "error" in out:
            return code
        _emit(out, args)
        return code

    if "error" in out:
        print(f"qmc {args.command}: {out['error']}", file=sys.stderr)
        return code
    _emit(out, args)
    return code


if __name__ == "__main__":
    sys.exit(main())
