"""Snapshot files, ground-truth files and report export.

Snapshot CSV layout (text, one record per line)::

    # eacal snapshots
    schema_version,n_samples,carrier_hz,sample_rate_hz,bandwidth_hz,rolloff,span_symbols,n_snapshots,agent_x,agent_y
    1,256,6950000000.0,12800000000.0,6400000000.0,0.6,6.0,32,0.0,0.0
    anchor_x,anchor_y,aoa,re_0,im_0,re_1,im_1,...
    <M records: anchor x, anchor y, aoa in rad, then N re/im pairs>

Binary layout (little-endian): the 8-byte magic ``EACALSNP``, four uint32
(schema_version, n_samples, n_snapshots, reserved), eight float64
(carrier_hz, sample_rate_hz, bandwidth_hz, rolloff, span_symbols, agent_x,
agent_y, reserved), then M records of ``3 + 2N`` float64 laid out like a CSV
record.

Floats are written with ``repr`` so files round-trip exactly and repeated
exports of the same data are byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import struct
from pathlib import Path

import numpy as np

from ..ea_model import covariance_ellipse
from ..errors import DimensionMismatchError, ParseError
from ..estimator import CalibrationResult, SnapshotSet
from ..geometry import Point2
from ..waveform import PulseSpec
from .report import CampaignReport, build_report
from .simulate import GroundTruth

SCHEMA_VERSION = 1
MAGIC = b"EACALSNP"
_HEADER = struct.Struct("<8s4I8d")
HEADER_FIELDS = [
    "schema_version",
    "n_samples",
    "carrier_hz",
    "sample_rate_hz",
    "bandwidth_hz",
    "rolloff",
    "span_symbols",
    "n_snapshots",
    "agent_x",
    "agent_y",
]


def _f(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return ""
    return repr(x)


def _clean(obj):
    """Make a structure JSON-safe: non-finite floats become null."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _dump_json(obj) -> str:
    return json.dumps(_clean(obj), indent=1, sort_keys=True, allow_nan=False) + "\n"


def _complex_pairs(z):
    z = np.asarray(z, dtype=complex)
    return np.stack([z.real, z.imag], axis=-1)


def _from_pairs(pairs):
    a = np.asarray(pairs, dtype=float)
    if a.size == 0:
        return a.reshape(a.shape[:-1] if a.ndim > 1 else (0,)).astype(complex)
    return a[..., 0] + 1j * a[..., 1]


# --------------------------------------------------------------------------
# snapshots


def _header_values(s: SnapshotSet):
    spec = s.spec
    return [
        SCHEMA_VERSION,
        spec.n_samples,
        spec.carrier_hz,
        spec.sample_rate_hz,
        spec.bandwidth_hz,
        spec.rolloff,
        spec.span_symbols,
        len(s),
        s.agent.x,
        s.agent.y,
    ]


def snapshots_to_csv(snapshots: SnapshotSet) -> str:
    buf = io.StringIO()
    buf.write("# eacal snapshots\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER_FIELDS)
    w.writerow([v if isinstance(v, int) else _f(v) for v in _header_values(snapshots)])
    N = snapshots.spec.n_samples
    cols = ["anchor_x", "anchor_y", "aoa"]
    for k in range(N):
        cols += [f"re_{k}", f"im_{k}"]
    w.writerow(cols)
    for m in range(len(snapshots)):
        ax, ay = snapshots.anchors[m]
        row = [_f(ax), _f(ay), _f(snapshots.aoas[m])]
        row += [_f(v) for v in _complex_pairs(snapshots.signals[m]).ravel()]
        w.writerow(row)
    return buf.getvalue()


def snapshots_to_bytes(snapshots: SnapshotSet) -> bytes:
    spec = snapshots.spec
    M, N = snapshots.signals.shape
    head = _HEADER.pack(
        MAGIC, SCHEMA_VERSION, N, M, 0,
        spec.carrier_hz, spec.sample_rate_hz, spec.bandwidth_hz, spec.rolloff,
        spec.span_symbols, snapshots.agent.x, snapshots.agent.y, 0.0,
    )
    body = np.empty((M, 3 + 2 * N), dtype="<f8")
    body[:, :2] = snapshots.anchors
    body[:, 2] = snapshots.aoas
    body[:, 3:] = _complex_pairs(snapshots.signals).reshape(M, 2 * N)
    return head + body.tobytes()


def _spec_from_header(values) -> PulseSpec:
    return PulseSpec(
        carrier_hz=values["carrier_hz"],
        sample_rate_hz=values["sample_rate_hz"],
        n_samples=int(values["n_samples"]),
        bandwidth_hz=values["bandwidth_hz"],
        rolloff=values["rolloff"],
        span_symbols=values["span_symbols"],
    )


def _parse_float(text, record, line):
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"not a number: {text!r}", record=record, line=line) from None


def snapshots_from_csv(text: str) -> SnapshotSet:
    lines = text.split("\n")
    complete = text.endswith("\n")
    body = [(i + 1, ln) for i, ln in enumerate(lines) if ln.strip() and not ln.startswith("#")]
    if len(body) < 3:
        raise ParseError("missing header records")
    (ln_h, names), (ln_v, values) = body[0], body[1]
    names = next(csv.reader([names]))
    values = next(csv.reader([values]))
    if names != HEADER_FIELDS or len(values) != len(HEADER_FIELDS):
        raise ParseError("malformed header", line=ln_v)
    head = {n: _parse_float(v, None, ln_v) for n, v in zip(names, values)}
    if int(head["schema_version"]) != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {values[0]}", line=ln_v)
    try:
        spec = _spec_from_header(head)
    except ValueError as exc:
        raise ParseError(f"invalid header: {exc}", line=ln_v) from None
    M, N = int(head["n_snapshots"]), spec.n_samples
    records = body[3:]
    last_line = len(lines) - 1 if complete else len(lines)
    rows = []
    for m, (ln, raw) in enumerate(records):
        fields = next(csv.reader([raw]))
        if ln == last_line and not complete and len(fields) != 3 + 2 * N:
            raise ParseError("truncated record", record=m, line=ln)
        if len(fields) < 3 or (len(fields) - 3) % 2:
            raise ParseError(f"malformed record with {len(fields)} fields", record=m, line=ln)
        if len(fields) != 3 + 2 * N:
            raise DimensionMismatchError(
                f"record {m} (line {ln}) has {(len(fields) - 3) // 2} samples, header says {N}"
            )
        rows.append([_parse_float(v, m, ln) for v in fields])
    if len(rows) != M:
        if len(rows) < M:
            raise ParseError(f"truncated file: expected {M} records, found {len(rows)}", record=len(rows))
        raise DimensionMismatchError(f"expected {M} records, found {len(rows)}")
    data = np.array(rows, dtype=float).reshape(M, 3 + 2 * N)
    return SnapshotSet(
        data[:, 3::2] + 1j * data[:, 4::2],
        data[:, :2],
        data[:, 2],
        Point2(head["agent_x"], head["agent_y"]),
        spec,
    )


def snapshots_from_bytes(blob: bytes) -> SnapshotSet:
    if len(blob) < _HEADER.size:
        raise ParseError("truncated header")
    magic, version, N, M, _, fc, fs, bw, ro, span, px, py, _ = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ParseError("not an eacal snapshot file (bad magic)")
    if version != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {version}")
    head = dict(carrier_hz=fc, sample_rate_hz=fs, bandwidth_hz=bw, rolloff=ro,
                span_symbols=span, n_samples=N)
    try:
        spec = _spec_from_header(head)
    except ValueError as exc:
        raise ParseError(f"invalid header: {exc}") from None
    width = (3 + 2 * N) * 8
    payload = blob[_HEADER.size :]
    if len(payload) < M * width:
        raise ParseError(f"truncated file: expected {M} records", record=len(payload) // width)
    if len(payload) > M * width:
        raise DimensionMismatchError(f"{len(payload) - M * width} trailing bytes after {M} records")
    data = np.frombuffer(payload, dtype="<f8").reshape(M, 3 + 2 * N)
    return SnapshotSet(
        data[:, 3::2] + 1j * data[:, 4::2], data[:, :2], data[:, 2], Point2(px, py), spec
    )


def detect_format(path) -> str:
    with open(path, "rb") as fh:
        return "binary" if fh.read(len(MAGIC)) == MAGIC else "csv"


def export_snapshots(snapshots: SnapshotSet, path, format="csv"):
    path = Path(path)
    if format == "csv":
        path.write_text(snapshots_to_csv(snapshots), encoding="utf-8")
    elif format == "binary":
        path.write_bytes(snapshots_to_bytes(snapshots))
    else:
        raise ValueError(f"unknown snapshot format {format!r}")
    return path


def import_snapshots(path, format=None) -> SnapshotSet:
    """Read a snapshot file; ``format`` is ``csv``, ``binary`` or None to sniff."""
    format = format or detect_format(path)
    if format == "binary":
        return snapshots_from_bytes(Path(path).read_bytes())
    if format == "csv":
        return snapshots_from_csv(Path(path).read_text(encoding="utf-8"))
    raise ValueError(f"unknown snapshot format {format!r}")


def snapshot_filename(format) -> str:
    return "snapshots.csv" if format == "csv" else "snapshots.bin"


# --------------------------------------------------------------------------
# ground truth


def truth_to_dict(truth: GroundTruth) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "label": truth.label,
        "seed": truth.seed,
        "noise_variance": truth.noise_variance,
        "points": truth.points,
        "alpha": _complex_pairs(truth.alpha),
        "marks": _complex_pairs(truth.marks),
    }


def truth_from_dict(d) -> GroundTruth:
    M = len(d["alpha"])
    marks = np.asarray(d["marks"], dtype=float)
    marks = marks[..., 0] + 1j * marks[..., 1] if marks.size else np.zeros((M, 0), complex)
    return GroundTruth(
        np.asarray(d["points"], dtype=float).reshape(-1, 2),
        marks.reshape(M, -1),
        _from_pairs(d["alpha"]),
        float(d["noise_variance"]),
        str(d["label"]),
        int(d["seed"]),
    )


def write_truth(truth: GroundTruth, path):
    Path(path).write_text(_dump_json(truth_to_dict(truth)), encoding="utf-8")


def read_truth(path) -> GroundTruth:
    return truth_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# --------------------------------------------------------------------------
# reports


def report_to_dict(report: CampaignReport) -> dict:
    cal = report.calibration
    sectors = {
        name: {
            "centers_deg": np.degrees(s.centers),
            "counts": s.counts,
            "means": s.means,
            "squared": s.squared,
        }
        for name, s in report.sectors.items()
    }
    return {
        "schema_version": SCHEMA_VERSION,
        "label": report.label,
        "n_snapshots": len(report.aoas),
        "n_points": cal.n_points,
        "n_sectors": report.n_sectors,
        "ellipse_scale": report.ellipse_scale,
        "noise_variance": cal.noise_variance,
        "loglik_trace": cal.loglik_trace,
        "scores": cal.scores,
        "refined_loglik": cal.refined_loglik,
        "n_skipped": cal.n_skipped,
        "aoas": report.aoas,
        "q_hat": cal.q_hat,
        "alpha_hat": _complex_pairs(cal.alpha_hat),
        "beta_hat": _complex_pairs(cal.beta_hat),
        "alpha_bar": report.alpha_bar,
        "beta_bar": report.beta_bar,
        "shape": None
        if report.shape is None
        else {"mu": report.shape.mu, "sigma": report.shape.sigma},
        "strongest": [int(j) + 1 for j in report.strongest],
        "par_db": report.par_table,
        "amr_db": report.amr_table,
        "ref_alpha_max": report.ref_alpha_max,
        "sectors": sectors,
        "truth": None if report.truth is None else truth_to_dict(report.truth),
    }


def report_from_dict(d) -> CampaignReport:
    M = int(d["n_snapshots"])
    J = int(d["n_points"])
    beta = np.asarray(d["beta_hat"], dtype=float)
    beta = beta[..., 0] + 1j * beta[..., 1] if J else np.zeros((M, 0), complex)
    cal = CalibrationResult(
        q_hat=np.asarray(d["q_hat"], dtype=float).reshape(-1, 2),
        alpha_hat=_from_pairs(d["alpha_hat"]),
        beta_hat=beta.reshape(M, J),
        loglik_trace=list(d["loglik_trace"]),
        noise_variance=float(d["noise_variance"]),
        scores=list(d["scores"]),
        n_skipped=int(d.get("n_skipped", 0)),
        refined_loglik=d.get("refined_loglik"),
    )
    truth = truth_from_dict(d["truth"]) if d.get("truth") else None
    report = build_report(
        d["label"], cal, d["aoas"], int(d["n_sectors"]), float(d["ellipse_scale"]), truth
    )
    if d.get("amr_db") is not None:
        report.amr_table = {
            k: (-math.inf if v is None else float(v)) for k, v in d["amr_db"].items()
        }
        report.ref_alpha_max = d.get("ref_alpha_max")
    return report


def load_report(path) -> CampaignReport:
    path = Path(path)
    if path.is_dir():
        path = path / "report.json"
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed report {path}: {exc.msg}", line=exc.lineno) from None
    try:
        return report_from_dict(data)
    except (KeyError, TypeError, IndexError) as exc:
        raise ParseError(f"malformed report {path}: {exc!r}") from None


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def summary_rows(report: CampaignReport):
    """(quantity, average magnitude, AMR dB, PAR dB) per series."""
    avgs = {"LOS": report.alpha_bar}
    avgs.update({f"SP{j + 1}": b for j, b in enumerate(report.beta_bar)})
    amr = report.amr_table or {}
    return [(key, avgs[key], amr.get(key), report.par_table.get(key)) for key in avgs]


def _db(x):
    if x is None:
        return ""
    if x == -math.inf:
        return "-inf"
    return _f(x)


def export_report(report: CampaignReport, out_dir) -> list[Path]:
    """Write all report tables to ``out_dir`` and return the file paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cal = report.calibration
    files = {}

    amr = report.amr_table or {}
    files["scatterers.csv"] = _csv_text(
        ["j", "x", "y", "beta_bar", "amr_db", "par_db"],
        [
            [j + 1, _f(x), _f(y), _f(report.beta_bar[j]), _db(amr.get(f"SP{j + 1}")),
             _db(report.par_table.get(f"SP{j + 1}"))]
            for j, (x, y) in enumerate(cal.q_hat)
        ],
    )

    head = ["m", "aoa_rad", "alpha_re", "alpha_im", "alpha_abs"]
    for j in range(cal.n_points):
        head += [f"beta{j + 1}_re", f"beta{j + 1}_im", f"beta{j + 1}_abs"]
    rows = []
    for m in range(len(report.aoas)):
        a = cal.alpha_hat[m]
        row = [m, _f(report.aoas[m]), _f(a.real), _f(a.imag), _f(abs(a))]
        for b in cal.beta_hat[m]:
            row += [_f(b.real), _f(b.imag), _f(abs(b))]
        rows.append(row)
    files["amplitudes.csv"] = _csv_text(head, rows)

    names = list(report.sectors)
    los = report.sectors["LOS"]
    head = ["sector", "center_deg"] + [f"{n}_count" for n in names] + [f"{n}_mean" for n in names]
    rows = []
    for k in range(report.n_sectors):
        row = [k, _f(np.degrees(los.centers[k]))]
        row += [int(report.sectors[n].counts[k]) for n in names]
        row += [_f(report.sectors[n].means[k]) for n in names]
        rows.append(row)
    files["sectors.csv"] = _csv_text(head, rows)

    files["summary.csv"] = _csv_text(
        ["quantity", "avg_magnitude", "amr_db", "par_db"],
        [[k, _f(v), _db(a), _db(p)] for k, v, a, p in summary_rows(report)],
    )

    ell = ""
    if report.shape is not None:
        pts = covariance_ellipse(report.shape.mu, report.shape.sigma, report.ellipse_scale)
        ell = _csv_text(["x", "y"], [[_f(x), _f(y)] for x, y in pts])
    else:
        ell = _csv_text(["x", "y"], [])
    files["ellipse.csv"] = f"# scale={_f(report.ellipse_scale)}\n" + ell

    files["report.json"] = _dump_json(report_to_dict(report))

    written = []
    for name, text in files.items():
        path = out / name
        path.write_text(text, encoding="utf-8")
        written.append(path)
    return written


def export_metrics(reports, out_path) -> str:
    """AMR/PAR table for several reports (one row per label and quantity)."""
    rows = []
    for r in reports:
        for key, avg, a, p in summary_rows(r):
            rows.append([r.label, key, _f(avg), _db(a), _db(p)])
    text = _csv_text(["label", "quantity", "avg_magnitude", "amr_db", "par_db"], rows)
    if out_path is not None:
        os.makedirs(os.path.dirname(os.path.abspath(out_path)), exist_ok=True)
        Path(out_path).write_text(text, encoding="utf-8")
    return text
