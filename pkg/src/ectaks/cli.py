"""Command-line front end.

Every command prints a JSON summary on stdout and writes its artifacts as
JSON (plus CSV/PNG for attack reports) under ``--out``.  Randomised
commands take ``--seed``; without it the ECTAKS_SEED environment variable
is used, then 0.

Exit codes: 0 success, 2 validation error, 3 protocol reject,
4 infeasible or conflicting request.
"""

from __future__ import annotations

import argparse
import os
import random
import sys
from pathlib import Path

from . import __version__
from .algebra import ORACLE_LIMIT, Curve, find_toy_curves
from .authority import (
    admit_node,
    directory_to_dict,
    dumps,
    export_lcd,
    export_public_directory,
    form_cluster,
    load_lcd,
    load_state,
    provision,
    replace_node,
    save_lcd,
    save_state,
)
from .errors import BadTag, EctaksError, OracleRefused
from .fixtures import CURVE_NAMES, load_curve
from .session import initiate, multipoint_seal, open_message, respond, seal, WireMessage
from .topology import Ant

EXIT_OK, EXIT_INVALID, EXIT_REJECT, EXIT_INFEASIBLE = 0, 2, 3, 4


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("ECTAKS_SEED")
    return int(env) if env else 0


def _rng(args) -> random.Random:
    return random.Random(_seed(args))


def _curve(spec: str) -> Curve:
    if spec in CURVE_NAMES:
        return load_curve(spec)
    return Curve.load(spec)


def _ids(text: str) -> list:
    return [int(x) for x in text.split(",") if x.strip()]


def _emit(obj) -> None:
    sys.stdout.write(dumps(obj))


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_network(state, out: Path) -> list:
    save_state(state, out / "ca_state.json")
    (out / "directory.json").write_text(dumps(directory_to_dict(export_public_directory(state))),
                                        encoding="utf-8")
    state.curve.dump(out / "curve.json")
    files = []
    for i in sorted(state.secrets):
        path = out / f"lcd_{i}.json"
        save_lcd(export_lcd(state, i), path)
        files.append(path.name)
    return files


def _parse_clusters(specs) -> dict:
    clusters = {}
    for spec in specs or []:
        master, _, members = spec.partition(":")
        clusters[int(master)] = _ids(members)
    return clusters


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_curve_search(args) -> int:
    out = _out(args)
    curves = [c for c in find_toy_curves(args.max_q, per_field=args.per_field) if c.p >= args.min_p]
    names = []
    for c in curves:
        name = f"curve_q{c.q}_a{c.a}_b{c.b}.json"
        c.dump(out / name)
        names.append({"file": name, "q": c.q, "p": c.p})
    (out / "index.json").write_text(dumps(names), encoding="utf-8")
    _emit({"count": len(curves), "max_p": max((c.p for c in curves), default=None), "out": str(out)})
    return EXIT_OK


def cmd_provision(args) -> int:
    topo, roots = Ant.load(args.topology)
    curve = _curve(args.curve)
    state = provision(topo, curve, seed=_seed(args), roots=args.roots and _ids(args.roots) or roots,
                      clusters=_parse_clusters(args.cluster),
                      enforce_order_bound=not args.allow_small_p)
    files = _write_network(state, _out(args))
    _emit({"nodes": topo.n, "arrows": len(topo.arrows), "lcds": files,
           "clusters": sorted(state.clusters), "p": curve.p, "p_over_n": round(curve.p / topo.n, 3)})
    return EXIT_OK


def _handshake(a, b, rng) -> bool:
    share, mine = initiate(a, b.node, rng)
    return respond(b, share) == mine


def cmd_handshake(args) -> int:
    rng = _rng(args)
    if args.state:
        state = load_state(args.state)
        results = []
        for i, j in sorted(state.topology.arrows):
            ok = all(_handshake(export_lcd(state, i), export_lcd(state, j), rng)
                     for _ in range(args.rounds))
            results.append({"initiator": i, "responder": j, "status": "agree" if ok else "disagree"})
        bad = [r for r in results if r["status"] != "agree"]
        _emit({"arrows": len(results), "agree": len(results) - len(bad),
               "status": "agree" if not bad else "disagree", "failures": bad})
        return EXIT_OK if not bad else EXIT_REJECT
    if not (args.lcd and args.peer and args.curve):
        raise SystemExit("handshake needs --state, or --lcd, --peer and --curve")
    curve = _curve(args.curve)
    a, b = load_lcd(args.lcd, curve), load_lcd(args.peer, curve)
    ok = all(_handshake(a, b, rng) for _ in range(args.rounds))
    _emit({"initiator": a.node, "responder": b.node, "status": "agree" if ok else "disagree"})
    return EXIT_OK if ok else EXIT_REJECT


def cmd_seal(args) -> int:
    curve = _curve(args.curve)
    lcd = load_lcd(args.lcd, curve)
    data = Path(args.infile).read_bytes() if args.infile else args.message.encode("utf-8")
    if args.members:
        msg = multipoint_seal(lcd, _ids(args.members), data, _rng(args))
    else:
        msg = seal(lcd, args.to, data, _rng(args))
    raw = msg.to_bytes(curve)
    Path(args.out).write_bytes(raw)
    _emit({"sender": lcd.node, "recipient": msg.recipient, "bytes": len(raw), "out": args.out})
    return EXIT_OK


def cmd_open(args) -> int:
    curve = _curve(args.curve)
    lcd = load_lcd(args.lcd, curve)
    raw = Path(args.infile).read_bytes()
    try:
        plain = open_message(lcd, raw)
    except BadTag as exc:
        _emit({"node": lcd.node, "status": "reject", "reason": str(exc)})
        return EXIT_REJECT
    if args.out:
        Path(args.out).write_bytes(plain)
    sender = WireMessage.from_bytes(curve, raw).sender
    rec = {"node": lcd.node, "sender": sender, "status": "accept", "bytes": len(plain)}
    try:
        rec["plaintext"] = plain.decode("utf-8")
    except UnicodeDecodeError:
        pass
    _emit(rec)
    return EXIT_OK


def cmd_replace(args) -> int:
    state = load_state(args.state)
    rng = _rng(args)
    state, lcd = replace_node(state, args.node, rng)
    ok = all(_handshake(lcd, export_lcd(state, j), rng) and _handshake(export_lcd(state, j), lcd, rng)
             for j in state.topology.neighbors(args.node))
    files = _write_network(state, _out(args))
    _emit({"node": args.node, "replacements": state.replacements[args.node],
           "neighbors_agree": ok, "lcds": files})
    return EXIT_OK if ok else EXIT_REJECT


def cmd_admit(args) -> int:
    state = load_state(args.state)
    admit_node(state, args.node, _ids(args.neighbors), _rng(args), cluster=args.cluster)
    files = _write_network(state, _out(args))
    _emit({"node": args.node, "neighbors": state.topology.neighbors(args.node), "lcds": files})
    return EXIT_OK


def cmd_cluster_form(args) -> int:
    state = load_state(args.state)
    form_cluster(state, args.master, _ids(args.members), _rng(args))
    files = _write_network(state, _out(args))
    c = state.clusters[args.master]
    _emit({"master": c.master, "members": sorted(c.members), "lcds": files})
    return EXIT_OK


def cmd_attack_recover(args) -> int:
    from .attacklab.recovery import bruteforce_oracle, recover_secret
    from .report import write_json

    state = load_state(args.state)
    if state.curve.p > ORACLE_LIMIT:
        raise OracleRefused(f"subgroup order {state.curve.p} is beyond the exhaustive-search guard")
    rep = recover_secret(state, args.target, _ids(args.compromised),
                         oracle=bruteforce_oracle(state.curve), rng=_rng(args))
    payload = rep.to_dict()
    payload["oracle"] = args.oracle
    payload["p"] = state.curve.p
    if args.target in state.clusters:
        payload["open_experiment"] = "target is a cluster master; effect of a shared gamma not analysed"
    out = _out(args)
    write_json(out / "recover.json", payload)
    _emit({k: payload[k] for k in ("outcome", "rank", "solution_space_size", "exact_match",
                                   "truth_in_space", "candidate_authenticates")})
    return EXIT_OK


def cmd_attack_estimate_sp(args) -> int:
    from .attacklab.probability import cross_check, estimate_sp, exact_sp_small
    from .plotting import plot_rank_histogram, plot_sp
    from .report import histogram_rows, write_csv, write_json

    out = _out(args)
    seed = _seed(args)
    estimates = [estimate_sp(p, args.trials, seed) for p in args.p]
    payload = {"seed": seed, "estimates": [e.to_dict() for e in estimates]}
    census = None
    small = [e for e in estimates if e.p <= 3]
    if small and not args.no_census:
        census = exact_sp_small(small[0].p)
        payload["census"] = census.to_dict()
        payload["cross_check"] = cross_check(small[0], census)
    write_json(out / "sp.json", payload)
    write_csv(out / "sp.csv", [{k: v for k, v in e.to_dict().items() if k != "rank_histogram"}
                               for e in estimates],
              ["p", "trials", "successes", "estimate", "ci_low", "ci_high", "confidence"])
    hists = {f"p={e.p}": e.rank_histogram for e in estimates}
    rows = [r for label, h in hists.items() for r in histogram_rows(label, h)]
    if census is not None:
        hists[f"p={census.p} exact"] = census.rank_histogram_outcomes
        rows += histogram_rows(f"p={census.p} exact", census.rank_histogram_outcomes)
    write_csv(out / "ranks.csv", rows, ["source", "rank", "count", "fraction"])
    plot_sp(estimates, out / "sp.png", census=census)
    plot_rank_histogram(hists, out / "ranks.png")
    summary = {"estimates": {str(e.p): float(e.estimate) for e in estimates}}
    if "cross_check" in payload:
        summary["cross_check"] = payload["cross_check"]
    _emit(summary)
    return EXIT_OK if "cross_check" not in payload or payload["cross_check"]["agrees"] else EXIT_INFEASIBLE


def cmd_attack_trials(args) -> int:
    from .attacklab.recovery import impersonation_trials, recovery_trials
    from .plotting import plot_rank_histogram
    from .report import write_csv, write_json

    curve = _curve(args.curve)
    out = _out(args)
    seed = _seed(args)
    if args.kind == "recover":
        res = recovery_trials(curve, args.trials, seed)
        records = res.pop("records")
        write_csv(out / "trials.csv", [{k: v for k, v in r.items() if k != "candidate"} for r in records])
        plot_rank_histogram({f"p={curve.p}": res["rank_histogram"]}, out / "ranks.png")
        ok = not res["failures"]
    else:
        res = impersonation_trials(curve, args.trials, seed, witnesses=args.witnesses)
        ok = True
    write_json(out / "trials.json", res)
    _emit({k: v for k, v in res.items() if k != "failures"})
    return EXIT_OK if ok else EXIT_INFEASIBLE


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ectaks", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def seeded(p):
        p.add_argument("--seed", type=int, default=None)
        return p

    curve = sub.add_parser("curve").add_subparsers(dest="action", required=True)
    p = curve.add_parser("search", help="find toy curves with a prime-order base point")
    p.add_argument("--max-q", type=int, required=True)
    p.add_argument("--min-p", type=int, default=3)
    p.add_argument("--per-field", type=int, default=3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_curve_search)

    p = seeded(sub.add_parser("provision", help="assign LCDs for a topology"))
    p.add_argument("--topology", required=True)
    p.add_argument("--curve", required=True, help="fixture name or curve JSON file")
    p.add_argument("--roots", default=None, help="comma-separated root ids")
    p.add_argument("--cluster", action="append", metavar="MASTER:M1,M2",
                   help="bind master->member arrows to one session product")
    p.add_argument("--allow-small-p", action="store_true", help="skip the p > N check")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_provision)

    p = seeded(sub.add_parser("handshake", help="check ECTAK agreement"))
    p.add_argument("--state", help="sweep every arrow of a CA state")
    p.add_argument("--lcd")
    p.add_argument("--peer")
    p.add_argument("--curve")
    p.add_argument("--rounds", type=int, default=1)
    p.set_defaults(func=cmd_handshake)

    p = seeded(sub.add_parser("seal", help="encrypt and authenticate a message"))
    p.add_argument("--lcd", required=True)
    p.add_argument("--curve", required=True)
    dest = p.add_mutually_exclusive_group(required=True)
    dest.add_argument("--to", type=int)
    dest.add_argument("--members", help="cluster members for a broadcast")
    body = p.add_mutually_exclusive_group(required=True)
    body.add_argument("--message")
    body.add_argument("--in", dest="infile")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_seal)

    p = sub.add_parser("open", help="verify and decrypt a message")
    p.add_argument("--lcd", required=True)
    p.add_argument("--curve", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_open)

    p = seeded(sub.add_parser("replace", help="swap in a new device for a node"))
    p.add_argument("--state", required=True)
    p.add_argument("--node", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_replace)

    p = seeded(sub.add_parser("admit", help="add a node to a provisioned network"))
    p.add_argument("--state", required=True)
    p.add_argument("--node", type=int, required=True)
    p.add_argument("--neighbors", required=True)
    p.add_argument("--cluster", type=int, default=None, help="join this master's cluster")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_admit)

    cluster = sub.add_parser("cluster").add_subparsers(dest="action", required=True)
    p = seeded(cluster.add_parser("form", help="form a cluster on an existing state"))
    p.add_argument("--state", required=True)
    p.add_argument("--master", type=int, required=True)
    p.add_argument("--members", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cluster_form)

    attack = sub.add_parser("attack").add_subparsers(dest="action", required=True)
    p = seeded(attack.add_parser("recover", help="solve for a target's secret"))
    p.add_argument("--state", required=True)
    p.add_argument("--target", type=int, default=1)
    p.add_argument("--compromised", default="2,3")
    p.add_argument("--oracle", choices=["bruteforce"], default="bruteforce")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_attack_recover)

    p = seeded(attack.add_parser("estimate-sp", help="Monte Carlo success probability"))
    p.add_argument("--p", type=int, nargs="+", required=True)
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--no-census", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_attack_estimate_sp)

    p = seeded(attack.add_parser("trials", help="repeated attacks on the star"))
    p.add_argument("--curve", required=True)
    p.add_argument("--kind", choices=["recover", "impersonate"], default="recover")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--witnesses", type=int, default=8)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_attack_trials)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EctaksError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
