"""Ingestion of the sovereign rating panel and climate file, and
aggregation to the annual activity series.

Input CSVs are UTF-8, comma-delimited, RFC-4180 quoted, with a header
row.  Lines starting with '#' are treated as comments (emitted files
carry a provenance header block in that form).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from datetime import date

import numpy as np

AGENCIES = ("Fitch", "Moodys", "SP", "other")


@dataclass(frozen=True)
class RatingsSchema:
    """Column mapping and filters for the ratings CSV."""

    country_col: str = "country"
    agency_col: str = "agency"
    date_col: str = "date"
    rating_col: str = "rating"
    prev_rating_col: str = "previous_rating"
    type_col: str | None = None          # column holding the rating type, if any
    keep_types: tuple[str, ...] = ()     # retained values (e.g. long-term only)
    k_max: int = 22                      # worst grade; 1 is best
    severe_notches: int = 3


@dataclass(frozen=True)
class RatingRecord:
    country: str
    agency: str
    event_date: date
    rating: int
    previous: int | None

    @property
    def downgrade(self) -> bool:
        return self.previous is not None and self.rating > self.previous

    @property
    def upgrade(self) -> bool:
        return self.previous is not None and self.rating < self.previous

    def severe_downgrade(self, notches: int = 3) -> bool:
        return self.previous is not None and (self.rating - self.previous) >= notches


@dataclass
class IngestReport:
    n_rows: int = 0
    n_kept: int = 0
    n_filtered: int = 0
    n_duplicates_collapsed: int = 0
    errors: list = field(default_factory=list)   # (line_number, message)

    def to_text(self) -> str:
        lines = [
            f"rows_read                {self.n_rows}",
            f"rows_kept                {self.n_kept}",
            f"rows_filtered            {self.n_filtered}",
            f"duplicates_collapsed     {self.n_duplicates_collapsed}",
            f"bad_rows                 {len(self.errors)}",
        ]
        for lineno, msg in self.errors:
            lines.append(f"  line {lineno}: {msg}")
        return "\n".join(lines)


@dataclass
class RatingPanel:
    records: list          # deduplicated RatingRecord, file order
    schema: RatingsSchema
    report: IngestReport

    def downgrade_count(self) -> int:
        return sum(1 for r in self.records if r.downgrade)

    def upgrade_count(self) -> int:
        return sum(1 for r in self.records if r.upgrade)


class IngestError(RuntimeError):
    def __init__(self, message: str, report: IngestReport):
        super().__init__(message)
        self.report = report


def _open_rows(path_or_buf):
    if hasattr(path_or_buf, "read"):
        text = path_or_buf.read()
    else:
        with open(path_or_buf, encoding="utf-8") as fh:
            text = fh.read()
    lines = text.splitlines(keepends=True)
    kept, line_numbers = [], []
    for i, line in enumerate(lines, start=1):
        if line.lstrip().startswith("#"):
            continue
        kept.append(line)
        line_numbers.append(i)
    reader = csv.DictReader(io.StringIO("".join(kept)))
    return reader, line_numbers


def ingest_ratings(path, schema: RatingsSchema | None = None,
                   max_bad_fraction: float = 0.01) -> RatingPanel:
    """Parse, filter, collapse same-day duplicates (keep last), derive flags."""
    schema = schema or RatingsSchema()
    reader, line_numbers = _open_rows(path)
    report = IngestReport()
    by_key: dict[tuple, RatingRecord] = {}
    order: list[tuple] = []
    for i, row in enumerate(reader):
        lineno = line_numbers[i + 1] if i + 1 < len(line_numbers) else -1
        report.n_rows += 1
        if schema.type_col is not None and schema.keep_types:
            if (row.get(schema.type_col) or "").strip() not in schema.keep_types:
                report.n_filtered += 1
                continue
        try:
            country = (row[schema.country_col] or "").strip()
            agency_raw = (row[schema.agency_col] or "").strip()
            agency = agency_raw if agency_raw in AGENCIES else "other"
            event_date = date.fromisoformat((row[schema.date_col] or "").strip())
            rating = int(row[schema.rating_col])
            prev_raw = (row.get(schema.prev_rating_col) or "").strip()
            previous = int(prev_raw) if prev_raw else None
            if not country:
                raise ValueError("empty country code")
            if not 1 <= rating <= schema.k_max:
                raise ValueError(f"rating {rating} outside 1..{schema.k_max}")
            if previous is not None and not 1 <= previous <= schema.k_max:
                raise ValueError(f"previous rating {previous} outside 1..{schema.k_max}")
        except (KeyError, ValueError) as exc:
            report.errors.append((lineno, str(exc)))
            continue
        key = (country, agency, event_date)
        if key in by_key:
            report.n_duplicates_collapsed += 1
        else:
            order.append(key)
        by_key[key] = RatingRecord(country, agency, event_date, rating, previous)
    report.n_kept = len(by_key)
    if report.n_rows > 0 and len(report.errors) > max_bad_fraction * report.n_rows:
        raise IngestError(
            f"{len(report.errors)} bad rows out of {report.n_rows} "
            f"(limit {max_bad_fraction:.0%})", report)
    return RatingPanel(records=[by_key[k] for k in order], schema=schema, report=report)


@dataclass
class ClimatePanel:
    """Standardized per-country-year carbon intensity (z-scores)."""

    values: dict            # (country, year) -> z
    mean: float
    sd: float
    standardization: str


def ingest_climate(path, standardization: str = "population") -> ClimatePanel:
    """Z-score the climate panel over all available observations."""
    if standardization not in ("population", "sample"):
        raise ValueError("standardization must be 'population' or 'sample'")
    reader, line_numbers = _open_rows(path)
    raw: dict[tuple, float] = {}
    for i, row in enumerate(reader):
        lineno = line_numbers[i + 1] if i + 1 < len(line_numbers) else -1
        val = (row.get("value") or "").strip()
        if not val:
            continue  # missing values stay absent; no imputation
        try:
            raw[((row["country"] or "").strip(), int(row["year"]))] = float(val)
        except (KeyError, ValueError) as exc:
            raise IngestError(f"climate line {lineno}: {exc}", IngestReport()) from exc
    if not raw:
        raise IngestError("climate file has no usable rows", IngestReport())
    arr = np.array(list(raw.values()))
    mean = float(arr.mean())
    sd = float(arr.std(ddof=0 if standardization == "population" else 1))
    if sd == 0.0:
        raise IngestError("climate values have zero variance", IngestReport())
    return ClimatePanel(
        values={k: (v - mean) / sd for k, v in raw.items()},
        mean=mean, sd=sd, standardization=standardization)


ACTIVITY_COLUMNS = ("year", "D", "U_raw", "A", "N", "C", "C_lag")


@dataclass
class ActivitySeries:
    years: np.ndarray
    d: np.ndarray
    u_raw: np.ndarray
    a: np.ndarray
    n_pairs: np.ndarray
    c: np.ndarray        # nan where absent
    c_lag: np.ndarray

    def __len__(self):
        return len(self.years)

    def to_csv(self) -> str:
        out = [",".join(ACTIVITY_COLUMNS)]
        for i in range(len(self.years)):
            c = "" if np.isnan(self.c[i]) else repr(float(self.c[i]))
            cl = "" if np.isnan(self.c_lag[i]) else repr(float(self.c_lag[i]))
            out.append(f"{self.years[i]},{self.d[i]},{self.u_raw[i]},"
                       f"{self.a[i]},{self.n_pairs[i]},{c},{cl}")
        return "\n".join(out) + "\n"

    @classmethod
    def from_csv(cls, path_or_buf) -> "ActivitySeries":
        reader, _ = _open_rows(path_or_buf)
        rows = list(reader)
        if not rows:
            raise IngestError("empty activity series", IngestReport())

        def fcol(name):
            return np.array([float(r[name]) if (r[name] or "").strip() else np.nan
                             for r in rows])

        return cls(
            years=np.array([int(r["year"]) for r in rows]),
            d=np.array([int(r["D"]) for r in rows]),
            u_raw=np.array([int(r["U_raw"]) for r in rows]),
            a=np.array([int(r["A"]) for r in rows]),
            n_pairs=np.array([int(r["N"]) for r in rows]),
            c=fcol("C"),
            c_lag=fcol("C_lag"),
        )


def aggregate(panel: RatingPanel, climate: ClimatePanel | None = None,
              min_coverage: float = 0.3) -> ActivitySeries:
    """Sum up/downgrade flags per calendar year over all country-agency pairs.

    Years with no events are emitted as zeros so the index is contiguous.
    C_t is the cross-sectional mean of climate z-scores over rated
    sovereigns; years covering less than ``min_coverage`` of rated
    sovereigns have C_t absent.
    """
    if not panel.records:
        raise ValueError("empty panel")
    years_seen = [r.event_date.year for r in panel.records]
    years = np.arange(min(years_seen), max(years_seen) + 1)
    d = np.zeros(len(years), dtype=int)
    u = np.zeros(len(years), dtype=int)
    pairs: list[set] = [set() for _ in years]
    countries: list[set] = [set() for _ in years]
    for r in panel.records:
        i = r.event_date.year - years[0]
        if r.downgrade:
            d[i] += 1
        if r.upgrade:
            u[i] += 1
        pairs[i].add((r.country, r.agency))
        countries[i].add(r.country)
    c = np.full(len(years), np.nan)
    if climate is not None:
        for i, year in enumerate(years):
            rated = countries[i]
            if not rated:
                continue
            zs = [climate.values[(ctry, int(year))] for ctry in rated
                  if (ctry, int(year)) in climate.values]
            if len(zs) >= min_coverage * len(rated) and zs:
                c[i] = float(np.mean(zs))
    c_lag = np.concatenate(([np.nan], c[:-1]))
    return ActivitySeries(
        years=years, d=d, u_raw=u, a=d + u,
        n_pairs=np.array([len(p) for p in pairs]),
        c=c, c_lag=c_lag,
    )
