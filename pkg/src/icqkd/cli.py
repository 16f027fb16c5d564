"""Command line: ``icqkd run | sweep | truth-table | validate-config``.

Exit codes: 0 success, 2 config/usage error, 3 I/O error, 4 session aborted
because the error check flagged an eavesdropper.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from . import __version__
from .adversary import HALF, QUARTER
from .analysis import SessionStats, SweepResult, session_stats, sweep
from .config import ConfigError, SessionConfig, dump_config, load_config, to_flat, with_overrides
from .optics import CLICK_LABELS, CorrelationFunction, alice_interference_term, bob_interference_term
from .protocol import Outcome, bob_infer_bit, group_of
from .session import SessionResult, run_session

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_ABORT = 0, 2, 3, 4

TRANSCRIPT_COLUMNS = (
    "round", "phi_m_deg", "group", "alice_c", "alice_click", "alice_bit", "theta2_deg",
    "bob_click", "bob_outcome", "bob_bit", "coincident", "disclosed", "eve_stole", "eve_click",
)


def _deg(sign: int, unit: float) -> str:
    return f"{round(math.degrees(sign * unit)):d}"


def transcript_text(result: SessionResult, audit: bool = False) -> str:
    """CSV transcript, one row per round. Hidden columns stay empty unless ``audit``."""
    b = result.batch
    bob_bits = dict(zip(result.key.round_index.tolist(), result.key.bob_bits.tolist()))
    disclosed = set(result.check.disclosed_indices)
    coincident = b.coincident
    eve = b.eve_kind.value != "none"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRANSCRIPT_COLUMNS)
    for i in range(len(b)):
        idx = int(b.round_index[i])
        c = CorrelationFunction.from_index(b.c_index[i])
        a_bit, outcome = int(b.alice_bit[i]), int(b.bob_outcome[i])
        eve_click = int(b.eve_click[i])
        w.writerow((
            idx,
            _deg(int(b.phi_sign[i]), HALF) if audit else "",
            group_of(c).value,
            c.name,
            CLICK_LABELS[int(b.alice_click[i])],
            "" if a_bit < 0 else a_bit,
            _deg(int(b.theta2_sign[i]), QUARTER),
            CLICK_LABELS[int(b.bob_click[i])],
            "" if outcome < 0 else ("Yes" if outcome == 1 else "No"),
            bob_bits.get(idx, ""),
            int(coincident[i]),
            int(idx in disclosed),
            int(b.eve_stole[i]) if audit and eve else "",
            CLICK_LABELS[eve_click] if audit and eve and eve_click >= 0 else "",
        ))
    return buf.getvalue()


def build_report(result: SessionResult, stats: SessionStats) -> dict[str, Any]:
    return {
        "version": __version__,
        **stats.to_dict(),
        "aborted": result.aborted,
        "config": to_flat(result.config),
    }


def report_text(report: dict[str, Any]) -> str:
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


def recount_transcript(path: str | Path) -> dict[str, int]:
    """Recompute report totals from a transcript file."""
    counts = dict(rounds_total=0, coincident=0, sifted=0, disclosed=0, mismatches=0)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            counts["rounds_total"] += 1
            counts["coincident"] += row["coincident"] == "1"
            counts["disclosed"] += row["disclosed"] == "1"
            if row["bob_bit"] != "":
                counts["sifted"] += 1
                counts["mismatches"] += row["bob_bit"] != row["alice_bit"]
    return counts


def truth_table() -> list[dict[str, Any]]:
    """The 16 ideal-case combinations at theta1 = +45 deg."""
    rows = []
    theta1 = QUARTER
    for c, phi_sign, t_sign in itertools.product(CorrelationFunction, (1, -1), (1, -1)):
        phi, theta2 = phi_sign * HALF, t_sign * QUARTER
        a_term = alice_interference_term(c, theta1, phi)
        b_term = bob_interference_term(theta2, phi)
        alice_bit = 1 if a_term > 0 else 0
        outcome = Outcome.YES if b_term > 0 else Outcome.NO
        bob_bit = bob_infer_bit(group_of(c), theta2, outcome)
        rows.append(dict(group=group_of(c).value, c=c.name, phi_m_deg=phi_sign * 90, theta2_deg=t_sign * 45,
                         alice_term=round(a_term), alice_bit=alice_bit, bob_term=round(b_term),
                         bob_outcome=outcome.value, bob_bit=bob_bit, agree=alice_bit == bob_bit))
    return rows


def _format_table(rows: list[dict[str, Any]]) -> str:
    header = list(rows[0])
    widths = [max(len(h), *(len(str(r[h])) for r in rows)) for h in header]
    lines = ["  ".join(h.rjust(w) for h, w in zip(header, widths))]
    lines += ["  ".join(str(r[h]).rjust(w) for h, w in zip(header, widths)) for r in rows]
    return "\n".join(lines) + "\n"


def _load(args) -> SessionConfig:
    config = load_config(Path(args.config))
    if getattr(args, "seed", None) is not None:
        config = with_overrides(config, seed=args.seed)
    return config


def run(config: SessionConfig, transcript: Optional[Path] = None, report: Optional[Path] = None,
        audit: bool = False) -> tuple[int, dict[str, Any]]:
    result = run_session(config)
    stats = session_stats(result)
    rep = build_report(result, stats)
    if transcript is not None:
        Path(transcript).write_text(transcript_text(result, audit))
    if report is not None:
        Path(report).write_text(report_text(rep))
    return (EXIT_ABORT if result.aborted else EXIT_OK), rep


def run_sweep(config: SessionConfig, parameter: str, values: Sequence[Any], out_dir: Path, *,
              matched_seeds: bool = False, jobs: int | None = None) -> SweepResult:
    """Write ``point_NNN.json`` per value and ``sweep.csv`` into ``out_dir``."""
    result = sweep(config, parameter, values, matched_seeds=matched_seeds, max_workers=jobs)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = result.rows()
    for i, (row, stats) in enumerate(zip(rows, result.stats)):
        point_cfg = with_overrides(config, seed=row["seed"])
        rep = {"version": __version__, "parameter": parameter, "value": row["value"], **stats.to_dict(),
               "config": to_flat(point_cfg)}
        (out_dir / f"point_{i:03d}.json").write_text(report_text(rep))
    csv_path = out_dir / "sweep.csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: ("" if v is None else v) for k, v in row.items()})
    return result


def _parse_values(raw: str) -> list[Any]:
    values = []
    for item in (v.strip() for v in raw.split(",")):
        if not item:
            continue
        try:
            values.append(float(item))
        except ValueError:
            values.append(item)
    return values


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="icqkd", description="Intrinsic-correlation QKD simulator")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp, seed=True):
        sp.add_argument("--config", required=True, help="config file (key = value lines)")
        if seed:
            sp.add_argument("--seed", type=int, help="override the config seed (unsigned 64-bit)")
        sp.add_argument("--quiet", action="store_true")

    r = sub.add_parser("run", help="simulate one session")
    common(r)
    r.add_argument("--audit", action="store_true", help="include hidden variables in the transcript")
    r.add_argument("--transcript", type=Path, help="CSV transcript path")
    r.add_argument("--report", type=Path, help="JSON report path (default: stdout)")

    s = sub.add_parser("sweep", help="one session per parameter value")
    common(s)
    s.add_argument("--param", required=True, help="n_c, transmittance, dark_count_prob, eve or any dotted key")
    s.add_argument("--values", required=True, help="comma-separated values")
    s.add_argument("--out-dir", type=Path, default=Path("sweep_out"))
    s.add_argument("--matched-seeds", action="store_true", help="reuse the base seed at every point")
    s.add_argument("--jobs", type=int, default=None)

    t = sub.add_parser("truth-table", help="print the 16 ideal-case combinations")
    t.add_argument("--quiet", action="store_true")

    v = sub.add_parser("validate-config", help="parse a config and print it with defaults filled in")
    common(v, seed=False)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    say = (lambda *a: None) if getattr(args, "quiet", False) else (lambda *a: print(*a, file=sys.stderr))
    try:
        if args.cmd == "truth-table":
            sys.stdout.write(_format_table(truth_table()))
            return EXIT_OK
        config = _load(args)
        if args.cmd == "validate-config":
            if not args.quiet:
                sys.stdout.write(dump_config(config))
            return EXIT_OK
        if args.cmd == "run":
            code, rep = run(config, args.transcript, args.report, args.audit)
            if args.report is None:
                sys.stdout.write(report_text(rep))
            say(f"rounds={rep['rounds_total']} coincident={rep['coincident']} sifted={rep['sifted']} "
                f"qber={rep['qber']} aborted={rep['aborted']}")
            return code
        if args.cmd == "sweep":
            values = _parse_values(args.values)
            if not values:
                parser.error("--values is empty")
            run_sweep(config, args.param, values, args.out_dir, matched_seeds=args.matched_seeds, jobs=args.jobs)
            say(f"wrote {len(values)} reports and {args.out_dir / 'sweep.csv'}")
            return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_CONFIG
