"""Report emission: per-policy CSV, top-k and almost-collision markdown tables, percentile SVG."""

from __future__ import annotations

import csv
import io
from pathlib import Path

from .bench import ALL_KINDS, CUE_ORDER, TOPK, PopulationResult
from .errors import FormatError

KIND_ROWS = (("canyon", "Canyon"), ("forest", "Forest"), ("sandbox", "Sandbox"), ("corridor", "Corridor"))
POP_COLUMNS = ("arch", "index", "train_seed", "status", "canyon", "forest", "sandbox", "corridor", "rank")
ARCH_COLORS = {"naux": "#1f4e9c", "auxd": "#c0392b"}


def _f6(x: float) -> str:
    return f"{x:.6f}"


def population_csv(pops: list[PopulationResult]) -> str:
    buf = io.StringIO()
    buf.write(",".join(POP_COLUMNS) + "\n")
    for pop in pops:
        rank = {p.index: r for r, p in enumerate(pop.ranking(), start=1)}
        for p in pop.policies:
            dist = [_f6(p.distances[k.value]) if p.status == "ok" else "" for k in ALL_KINDS]
            buf.write(",".join([pop.arch, str(p.index), str(p.train_seed), p.status, *dist, str(rank.get(p.index, ""))]) + "\n")
    return buf.getvalue()


def parse_population_csv(text: str) -> list[dict]:
    rows = list(csv.DictReader(io.StringIO(text)))
    if rows and tuple(rows[0].keys()) != POP_COLUMNS:
        raise FormatError("population.csv has unexpected columns")
    out = []
    for r in rows:
        row = {"arch": r["arch"], "index": int(r["index"]), "train_seed": int(r["train_seed"]), "status": r["status"]}
        for k, _ in KIND_ROWS:
            row[k] = float(r[k]) if r[k] else None
        out.append(row)
    return out


def rank_rows(rows: list[dict], arch: str) -> list[dict]:
    ok = [r for r in rows if r["arch"] == arch and r["status"] == "ok"]
    return sorted(ok, key=lambda r: (-r["corridor"], r["index"]))


def _archs(rows) -> list[str]:
    seen = []
    for r in rows:
        if r["arch"] not in seen:
            seen.append(r["arch"])
    return seen


def topk_markdown(rows: list[dict], archs: list[str] | None = None) -> str:
    """Rows are env kinds; columns TOPk x arch. Policies are picked by corridor distance only."""
    archs = archs or _archs(rows)
    head = ["Average distance [m]"] + [f"TOP{k} {a.upper()}" for k in TOPK for a in archs]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    ranked = {a: rank_rows(rows, a) for a in archs}
    for key, title in KIND_ROWS:
        cells = [title]
        for k in TOPK:
            for a in archs:
                best = ranked[a][:k]
                cells.append(f"{sum(r[key] for r in best) / len(best):.2f}" if best else "-")
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def acd_csv(pops: list[PopulationResult]) -> str:
    locs, cues = _acd_groups(pops)
    cols = ["arch", "index"] + [f"loc:{l}" for l in locs] + [f"cue:{c}" for c in cues] + ["location_avg", "cue_avg", "per_frame"]
    buf = io.StringIO()
    buf.write(",".join(cols) + "\n")
    for pop in pops:
        for p in pop.ok:
            if p.acd is None:
                continue
            vals = [p.acd.per_location[l] for l in locs] + [p.acd.per_cue[c] for c in cues]
            vals += [p.acd.location_avg, p.acd.cue_avg, p.acd.per_frame_accuracy]
            buf.write(",".join([pop.arch, str(p.index)] + [_f6(v) for v in vals]) + "\n")
    return buf.getvalue()


def _acd_groups(pops):
    for pop in pops:
        for p in pop.ok:
            if p.acd is not None:
                return list(p.acd.per_location), [c for c in CUE_ORDER if c in p.acd.per_cue]
    return [], []


def acd_markdown(pop_rows: list[dict], acd_text: str) -> str:
    """Accuracies [%] per location and per cue, averaged over the top-k policies by corridor distance."""
    acd_rows = list(csv.DictReader(io.StringIO(acd_text)))
    if not acd_rows:
        return "No almost-collision results.\n"
    by_key = {(r["arch"], int(r["index"])): r for r in acd_rows}
    archs = [a for a in _archs(pop_rows) if any(k[0] == a for k in by_key)]
    locs = [c[4:] for c in acd_rows[0] if c.startswith("loc:")]
    cues = [c[4:] for c in acd_rows[0] if c.startswith("cue:")]
    ranked = {a: [r for r in rank_rows(pop_rows, a) if (a, r["index"]) in by_key] for a in archs}
    head = ["Accuracy [%]"] + [f"TOP{k} {a.upper()}" for k in TOPK for a in archs]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    body = [(l.capitalize(), f"loc:{l}") for l in locs] + [("Avg. Loc.", "location_avg")]
    body += [(c, f"cue:{c}") for c in cues] + [("Avg. Cue", "cue_avg"), ("Per frame", "per_frame")]
    for title, col in body:
        cells = [title]
        for k in TOPK:
            for a in archs:
                best = ranked[a][:k]
                vals = [float(by_key[(a, r["index"])][col]) for r in best]
                cells.append(f"{sum(vals) / len(vals):.0f}" if vals else "-")
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def curve_points(rows: list[dict], arch: str) -> list[tuple[float, float]]:
    ranked = rank_rows(rows, arch)
    n = len(ranked)
    return [(100.0 * (i + 1) / n, r["corridor"]) for i, r in enumerate(ranked)]


def _nice_ceiling(v: float) -> float:
    if v <= 0:
        return 10.0
    step = 10.0 if v > 20 else 2.0
    return step * -(-v // step)


def curve_svg(rows: list[dict], archs: list[str] | None = None) -> str:
    """Corridor distance against percent of the ranked population, one polyline per architecture."""
    archs = archs or _archs(rows)
    W, H = 800, 500
    left, right, top, bottom = 70, 30, 30, 60
    pw, ph = W - left - right, H - top - bottom
    curves = {a: curve_points(rows, a) for a in archs}
    ymax = _nice_ceiling(max([y for c in curves.values() for _, y in c], default=0.0))

    def px(x):
        return left + pw * x / 100.0

    def py(y):
        return top + ph * (1.0 - y / ymax)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {W} {H}" width="{W}" height="{H}">',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
           f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
           f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>']
    for i in range(6):
        x = 20.0 * i
        out.append(f'<line x1="{px(x):.2f}" y1="{top + ph}" x2="{px(x):.2f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px(x):.2f}" y="{top + ph + 20}" font-size="12" text-anchor="middle">{x:.0f}</text>')
    for i in range(6):
        y = ymax * i / 5
        out.append(f'<line x1="{left - 5}" y1="{py(y):.2f}" x2="{left}" y2="{py(y):.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{py(y) + 4:.2f}" font-size="12" text-anchor="end">{y:g}</text>')
    out.append(f'<text x="{left + pw / 2:.0f}" y="{H - 15}" font-size="14" text-anchor="middle">population [%]</text>')
    out.append(f'<text x="18" y="{top + ph / 2:.0f}" font-size="14" text-anchor="middle" '
               f'transform="rotate(-90 18 {top + ph / 2:.0f})">corridor distance [m]</text>')
    for j, a in enumerate(archs):
        color = ARCH_COLORS.get(a, "#333333")
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in curves[a])
        if pts:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{pts}"/>')
        out.append(f'<text x="{left + pw - 10}" y="{top + 20 + 18 * j}" font-size="13" fill="{color}" '
                   f'text-anchor="end">{a.upper()}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_report(pops: list[PopulationResult], out_dir) -> dict:
    """Write population.csv, topk.md, curve.svg and, if scored, acd.csv/acd.md. Returns paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    text = population_csv(pops)
    rows = parse_population_csv(text)
    archs = [p.arch for p in pops]
    files = {
        "population.csv": text,
        "topk.md": topk_markdown(rows, archs),
        "curve.svg": curve_svg(rows, archs),
    }
    if any(p.acd is not None for pop in pops for p in pop.policies):
        files["acd.csv"] = acd_csv(pops)
        files["acd.md"] = acd_markdown(rows, files["acd.csv"])
    paths = {}
    for name, content in files.items():
        (out / name).write_text(content, encoding="utf-8")
        paths[name] = out / name
    return paths
