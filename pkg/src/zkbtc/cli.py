"""``zkbtc`` command line.

Exit codes: 0 success, 1 usage or I/O error, 2 verification failure,
3 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from .chain import ChainParams, ChainState, genesis_state, mainnet_params, validate_chain
from .codec import (
    Hash256,
    MerkleBranch,
    build_merkle_branch,
    decode_block_body,
    decode_header,
    decode_headers,
    decode_tx,
    merkle_root,
    verify_merkle_branch,
)
from .dv import derive_dv_key
from .errors import ChainValidationError, DecodeError, MissingDvKey, RelationUnsatisfied, SyncError
from .light_client import ClientState, initial_client, prove_chain, read_proofs, sync, write_proofs
from .por import PorProof, PorPublicInputs, por_prove, por_verify, witness_from_chain
from .stark import DEFAULT_QUERIES, stark_prove_threshold, stark_verify_threshold
from .testchain import DEFAULT_NBITS, BlockPlan, TestChainConfig, default_plan, export, generate, import_chain

EXIT_OK, EXIT_USAGE, EXIT_REJECT, EXIT_INTERNAL = 0, 1, 2, 3
DEFAULT_SEED = b"zkbtc".hex()


class UsageError(Exception):
    pass


class Rejected(Exception):
    """Verification failed; carries the JSON payload to report."""

    def __init__(self, payload: dict):
        super().__init__(payload.get("error", "rejected"))
        self.payload = payload


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- helpers ------------------------------------------------------------------

def _path(args, p: str | None) -> Path | None:
    if p is None:
        return None
    path = Path(p)
    if not path.is_absolute() and args.data_dir:
        path = Path(args.data_dir) / path
    return path


def _seed(args) -> bytes:
    try:
        return bytes.fromhex(args.seed)
    except ValueError:
        raise UsageError(f"--seed must be hex, got {args.seed!r}") from None


def _hex(value: str, name: str) -> bytes:
    try:
        return bytes.fromhex(value)
    except ValueError:
        raise UsageError(f"{name} must be hex") from None


def _dv_key(args) -> bytes:
    if args.dv_key:
        return _hex(args.dv_key, "--dv-key")
    return derive_dv_key(_seed(args))


def _load_json(path: Path):
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None


def _params_for(args, headers_path: Path) -> ChainParams:
    if getattr(args, "params", None):
        return ChainParams.from_json(_load_json(_path(args, args.params)))
    sibling = headers_path.parent / "params.json"
    if sibling.exists():
        return ChainParams.from_json(_load_json(sibling))
    return mainnet_params()


def _validate_headers(start: ChainState, headers, params: ChainParams) -> ChainState:
    """Validate ``headers`` from ``start``, skipping any prefix up to start's tip."""
    hashes = [h.hash for h in headers]
    if start.tip_hash in hashes:
        headers = headers[hashes.index(start.tip_hash) + 1:]
    return validate_chain(start, headers, params)


# -- subcommands --------------------------------------------------------------

def cmd_gen_testchain(args) -> dict:
    plan: tuple[BlockPlan, ...]
    if args.plan:
        raw = _load_json(_path(args, args.plan))
        plan = tuple(BlockPlan.from_json(p) for p in raw)
        if args.blocks is not None:
            plan = (plan + (BlockPlan(),) * args.blocks)[: args.blocks]
    else:
        plan = default_plan(8 if args.blocks is None else args.blocks, args.keys)
    nbits = int(args.nbits, 16) if args.nbits else DEFAULT_NBITS
    config = TestChainConfig(seed=_seed(args), initial_nbits=nbits, retarget_interval=args.retarget_interval,
                             block_plan=plan, n_keys=args.keys)
    chain = generate(config)
    out = _path(args, args.out)
    export(chain, out)
    return {"out": str(out), "height": chain.height, "tip_hash": str(chain.headers[-1].hash),
            "state": chain.final_state().to_json()}


def cmd_chain_validate(args) -> dict:
    path = _path(args, args.headers)
    headers = decode_headers(path.read_bytes())
    params = _params_for(args, path)
    start = ChainState.from_json(_load_json(_path(args, args.checkpoint))) if args.checkpoint else genesis_state(params)
    try:
        state = _validate_headers(start, headers, params)
    except ChainValidationError as exc:
        raise Rejected({"valid": False, "height": exc.height, "check": type(exc).__name__, "error": str(exc)})
    return {"valid": True, "state": state.to_json()}


def cmd_parse_tx(args) -> dict:
    try:
        return decode_tx(_hex(args.hex, "--hex")).to_json()
    except DecodeError as exc:
        raise Rejected({"valid": False, "error": f"{type(exc).__name__}: {exc}"})


def cmd_parse_header(args) -> dict:
    try:
        return decode_header(_hex(args.hex, "--hex")).to_json()
    except DecodeError as exc:
        raise Rejected({"valid": False, "error": f"{type(exc).__name__}: {exc}"})


def cmd_merkle_branch(args) -> dict:
    txs = decode_block_body(_path(args, args.block).read_bytes())
    txids = [t.txid for t in txs]
    branch = build_merkle_branch(txids, args.index)
    return {"txid": str(txids[args.index]), "root": str(merkle_root(txids)), "branch": branch.to_json()}


def cmd_merkle_verify(args) -> dict:
    obj = _load_json(_path(args, args.branch))
    branch = MerkleBranch.from_json(obj.get("branch", obj))
    txid = Hash256.from_hex(args.txid or obj["txid"])
    root = Hash256.from_hex(args.root or obj["root"])
    ok = verify_merkle_branch(txid, branch, root)
    result = {"valid": ok, "txid": str(txid), "root": str(root)}
    if not ok:
        raise Rejected({**result, "error": "branch does not authenticate"})
    return result


def cmd_por_prove(args) -> dict:
    chain = import_chain(_path(args, args.chain))
    public = PorPublicInputs(args.threshold, tuple(chain.headers))
    try:
        witness = witness_from_chain(chain, args.tx_block, args.tx_index, args.vout, args.key_index)
    except IndexError:
        raise UsageError("no such block, transaction or key in the chain") from None
    try:
        proof = por_prove(public, witness, args.backend, _seed(args),
                          dv_key=_dv_key(args) if args.backend == "dv" else None, n_queries=args.queries)
    except RelationUnsatisfied as exc:
        raise Rejected({"proved": False, "failure": exc.failure.value, "error": str(exc)})
    out = _path(args, args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(proof.dumps() + "\n")
    return {"proved": True, "backend": args.backend, "out": str(out), "public_digest": proof.public_digest.hex()}


def cmd_por_verify(args) -> dict:
    path = _path(args, args.headers)
    headers = decode_headers(path.read_bytes())
    if args.params:
        params = _params_for(args, path)
        try:
            validate_chain(genesis_state(params), headers[1:], params)
        except ChainValidationError as exc:
            raise Rejected({"accepted": False, "error": f"header chain invalid at height {exc.height}: {exc}"})
    try:
        proof = PorProof.from_json(_load_json(_path(args, args.proof)))
    except (DecodeError, KeyError, ValueError) as exc:
        raise Rejected({"accepted": False, "error": f"malformed proof: {exc}"})
    public = PorPublicInputs(args.threshold, tuple(headers))
    ok = por_verify(public, proof, _dv_key(args) if proof.backend == "dv" else None, n_queries=args.queries)
    result = {"accepted": ok, "backend": proof.backend, "threshold": args.threshold}
    if not ok:
        raise Rejected({**result, "error": "proof rejected"})
    return result


def cmd_lc_prove(args) -> dict:
    chain = import_chain(_path(args, args.chain))
    blocks = [(b.header, b.txs) for b in chain.blocks[1:]]
    proofs = prove_chain(blocks, chain.params, _dv_key(args), args.epoch_len)
    out = _path(args, args.out)
    write_proofs(proofs, out)
    return {"epochs": len(proofs), "out": str(out), "latest": proofs[-1].statement.commitment().hex() if proofs else None}


def cmd_lc_verify(args) -> dict:
    params = ChainParams.from_json(_load_json(_path(args, args.params)))
    client = (ClientState.from_json(_load_json(_path(args, args.checkpoint))) if args.checkpoint
              else initial_client(params))
    proofs = read_proofs(_path(args, args.proofs))
    try:
        client = sync(client, proofs, params, _dv_key(args))
    except SyncError as exc:
        raise Rejected({"synced": False, "failed_epoch": exc.index, "epochs_verified": exc.state.epochs_verified,
                        "error": str(exc.cause)})
    result = {"synced": True, "epochs_verified": client.epochs_verified, "checkpoint": client.to_json()}
    if args.save_checkpoint:
        _path(args, args.save_checkpoint).write_text(json.dumps(client.to_json(), sort_keys=True) + "\n")
    return result


def cmd_stark_demo(args) -> dict:
    salt = _seed(args)
    context = b"zkbtc/stark-demo"
    t0 = time.perf_counter()
    try:
        proof = stark_prove_threshold(args.v, args.x, salt, context, zk=args.zk, n_queries=args.queries)
    except ValueError as exc:
        raise Rejected({"accepted": False, "error": str(exc)})
    t1 = time.perf_counter()
    ok = stark_verify_threshold(args.x, proof, context, n_queries=args.queries)
    t2 = time.perf_counter()
    size = len(json.dumps(proof.to_json(), sort_keys=True))
    result = {"accepted": ok, "v": args.v, "x": args.x, "zk": args.zk, "queries": args.queries, "proof_bytes": size}
    if args.timing:
        result.update(prove_ms=round(1000 * (t1 - t0), 2), verify_ms=round(1000 * (t2 - t1), 2))
    if not ok:
        raise Rejected({**result, "error": "proof rejected"})
    return result


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="zkbtc", description="Bitcoin proof-of-reserve and light-client toolkit.")
    p.add_argument("--version", action="version", version=f"zkbtc {__version__}")
    p.add_argument("--data-dir", default=os.environ.get("ZKBTC_DATA_DIR"),
                   help="base directory for relative paths (env ZKBTC_DATA_DIR)")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--seed", default=DEFAULT_SEED, help="hex seed for every derived value")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("gen-testchain", help="generate and export a synthetic chain")
    s.add_argument("--blocks", type=int)
    s.add_argument("--retarget-interval", type=int, default=8)
    s.add_argument("--plan")
    s.add_argument("--keys", type=int, default=8)
    s.add_argument("--nbits", help="initial compact target, hex (default encodes 2^240)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_testchain)

    s = sub.add_parser("chain-validate", help="validate a headers file")
    s.add_argument("--headers", required=True)
    s.add_argument("--checkpoint")
    s.add_argument("--params", help="chain params JSON (default: params.json beside the headers, else mainnet)")
    s.set_defaults(func=cmd_chain_validate)

    for name, fn in (("parse-tx", cmd_parse_tx), ("parse-header", cmd_parse_header)):
        s = sub.add_parser(name)
        s.add_argument("--hex", required=True)
        s.set_defaults(func=fn)

    s = sub.add_parser("merkle-branch", help="Merkle branch for a transaction of a block file")
    s.add_argument("--block", required=True)
    s.add_argument("--index", type=int, required=True)
    s.set_defaults(func=cmd_merkle_branch)

    s = sub.add_parser("merkle-verify", help="check a branch JSON against a root")
    s.add_argument("--branch", required=True)
    s.add_argument("--txid")
    s.add_argument("--root")
    s.set_defaults(func=cmd_merkle_verify)

    s = sub.add_parser("por-prove", help="prove ownership of an output worth more than X")
    s.add_argument("--chain", required=True)
    s.add_argument("--threshold", type=int, required=True)
    s.add_argument("--tx-block", type=int, required=True)
    s.add_argument("--tx-index", type=int, required=True)
    s.add_argument("--vout", type=int, required=True)
    s.add_argument("--key-index", type=int, required=True)
    s.add_argument("--backend", choices=["hybrid", "dv"], default="hybrid")
    s.add_argument("--dv-key", help="32-byte hex key (default derived from --seed)")
    s.add_argument("--queries", type=int, default=DEFAULT_QUERIES)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_por_prove)

    s = sub.add_parser("por-verify", help="verify a proof-of-reserve file")
    s.add_argument("--headers", required=True)
    s.add_argument("--threshold", type=int, required=True)
    s.add_argument("--proof", required=True)
    s.add_argument("--dv-key")
    s.add_argument("--params", help="also validate the header chain under these params")
    s.add_argument("--queries", type=int, default=DEFAULT_QUERIES)
    s.set_defaults(func=cmd_por_verify)

    s = sub.add_parser("lc-prove", help="write epoch proofs for a chain")
    s.add_argument("--chain", required=True)
    s.add_argument("--epoch-len", type=int, default=8)
    s.add_argument("--dv-key")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_lc_prove)

    s = sub.add_parser("lc-verify", help="sync a client through epoch proofs")
    s.add_argument("--proofs", required=True)
    s.add_argument("--params", required=True)
    s.add_argument("--checkpoint")
    s.add_argument("--dv-key")
    s.add_argument("--save-checkpoint")
    s.set_defaults(func=cmd_lc_verify)

    s = sub.add_parser("stark-demo", help="standalone threshold proof round trip")
    s.add_argument("--v", type=int, required=True)
    s.add_argument("--x", type=int, required=True)
    s.add_argument("--zk", action="store_true")
    s.add_argument("--queries", type=int, default=DEFAULT_QUERIES)
    s.add_argument("--timing", action="store_true", help="report wall times (output no longer deterministic)")
    s.set_defaults(func=cmd_stark_demo)
    return p


def _emit(payload: dict, as_json: bool, stream) -> None:
    if as_json:
        stream.write(json.dumps(payload, sort_keys=True) + "\n")
        return
    for key, value in payload.items():
        if isinstance(value, (dict, list)):
            value = json.dumps(value, sort_keys=True)
        stream.write(f"{key}: {value}\n")


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    as_json = "--json" in argv
    try:
        args = parser.parse_args(argv)
        payload = args.func(args)
    except UsageError as exc:
        _emit({"error": str(exc), "exit": EXIT_USAGE}, as_json, sys.stdout if as_json else sys.stderr)
        return EXIT_USAGE
    except Rejected as exc:
        _emit({**exc.payload, "exit": EXIT_REJECT}, as_json, sys.stdout)
        return EXIT_REJECT
    except (OSError, MissingDvKey, DecodeError) as exc:
        _emit({"error": f"{type(exc).__name__}: {exc}", "exit": EXIT_USAGE}, as_json,
              sys.stdout if as_json else sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - the exit code contract needs a catch-all
        _emit({"error": f"internal error: {type(exc).__name__}: {exc}", "exit": EXIT_INTERNAL}, as_json,
              sys.stdout if as_json else sys.stderr)
        return EXIT_INTERNAL
    _emit(payload, as_json, sys.stdout)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
