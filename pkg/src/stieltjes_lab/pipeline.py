"""Cached end-to-end runs: phi nodes -> gamma_n -> continued fractions -> diagnostics -> tables."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

from .bigreal import BigReal, guard_digits
from .cfexpand import ContinuedFraction, contfrac
from .cfstats import (
    CFStatsReport,
    cf_stats,
    gauss_kuzmin_tail,
    khinchin_constant,
    levy_constant,
)
from .errors import (
    CacheCorruptError,
    ConfigError,
    InsufficientNodesError,
    InsufficientPrecisionError,
    MissingArtifactError,
    VerificationError,
)
from .mpzeta import PhiTable, _pmap, tabulate_phi_nodes
from .normality import DigitStats, deviation_report, digit_deviation_rows, expansion_digits, kgram_freq
from .stieltjes import StieltjesValue, alpha_coeffs, gamma_n, plan_nodes, stirling_triangle

log = logging.getLogger(__name__)

CACHE_ENV = "STIELTJES_LAB_CACHE"
MAX_ROUNDS = 5


def parse_eps(text) -> Fraction:
    """'p/q', a decimal like '1e-30', or an int / Fraction."""
    if isinstance(text, Fraction):
        eps = text
    else:
        try:
            eps = Fraction(str(text).strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"cannot read eps {text!r}") from exc
    if eps <= 0:
        raise ConfigError("eps must be positive")
    return eps


def default_cache_dir() -> Path:
    return Path(os.environ.get(CACHE_ENV) or Path.cwd() / "stieltjes_cache")


@dataclass(frozen=True)
class RunConfig:
    n_max: int = 63
    digits: int = 1000
    eps: Fraction = Fraction(1, 10)
    workers: int = 1
    cache_dir: Path = field(default_factory=default_cache_dir)
    base: int = 10
    kgram: int = 2
    m_start: int = 100
    stop_policy: str = "accuracy"
    nmax: int | None = None
    verify_n: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "eps", parse_eps(self.eps))
        object.__setattr__(self, "cache_dir", Path(self.cache_dir))
        if not 0 <= self.n_max <= 5000:
            raise ConfigError("n_max must be in [0, 5000]")
        if not 1 <= self.digits <= 200000:
            raise ConfigError("digits must be in [1, 200000]")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not 2 <= self.base <= 36:
            raise ConfigError("base must be in [2, 36]")
        if self.base != 10:
            raise ConfigError("expansions are decimal; only base 10 is produced by the pipeline")
        if not 1 <= self.kgram <= 6:
            raise ConfigError("kgram must be in [1, 6]")
        if self.m_start < 1:
            raise ConfigError("m_start must be >= 1")
        if self.stop_policy not in ("accuracy", "nmax"):
            raise ConfigError("stop_policy must be 'accuracy' or 'nmax'")
        if self.stop_policy == "nmax" and (self.nmax is None or self.nmax < 1):
            raise ConfigError("stop_policy 'nmax' needs a positive nmax")

    @property
    def eps_tag(self) -> str:
        return f"{self.eps.numerator}-{self.eps.denominator}"

    @property
    def run_tag(self) -> str:
        return f"eps{self.eps_tag}_d{self.digits}"

    @property
    def cf_tag(self) -> str:
        pol = "acc" if self.stop_policy == "accuracy" else f"nmax{self.nmax}"
        return f"{self.run_tag}_{pol}"


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class CacheIndex:
    """Maps (kind, n, eps, digits, ...) keys to files with their sha256 digests."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.path = self.root / "index.json"
        self.entries: dict = {}
        if self.path.exists():
            try:
                self.entries = json.loads(self.path.read_text())
            except json.JSONDecodeError as exc:
                raise CacheCorruptError(f"unreadable cache index {self.path}") from exc

    @staticmethod
    def key(kind: str, n, *params) -> str:
        return "|".join([kind, str(n), *map(str, params)])

    def has(self, key: str) -> bool:
        return key in self.entries and (self.root / self.entries[key]["path"]).exists()

    def read(self, key: str, check: bool = True) -> str:
        entry = self.entries.get(key)
        if entry is None:
            raise KeyError(key)
        p = self.root / entry["path"]
        if not p.exists():
            raise CacheCorruptError(f"cache file missing: {p}")
        data = p.read_bytes()
        if check and _digest(data) != entry["sha256"]:
            raise CacheCorruptError(f"digest mismatch for {p}")
        return data.decode()

    def write(self, key: str, rel_path: str, text: str) -> None:
        p = self.root / rel_path
        p.parent.mkdir(parents=True, exist_ok=True)
        data = text.encode()
        p.write_bytes(data)
        self.entries[key] = {"path": rel_path, "sha256": _digest(data)}
        self.flush()

    def flush(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps(self.entries, indent=1, sort_keys=True) + "\n")
        tmp.replace(self.path)


@dataclass
class Counters:
    phi_evaluations: int = 0
    gamma_computed: int = 0
    cf_computed: int = 0
    stats_computed: int = 0
    normality_computed: int = 0
    reports_written: int = 0

    @property
    def total(self) -> int:
        return sum(self.__dict__.values())


class Pipeline:
    def __init__(self, config: RunConfig):
        self.config = config
        self.index = CacheIndex(config.cache_dir)
        self.counters = Counters()
        self._table: PhiTable | None = None

    # nodes ---------------------------------------------------------------

    def _phi_key(self, node_digits: int, count: int) -> str:
        return CacheIndex.key("phi", "-", self.config.eps, node_digits, count)

    def _plan_key(self) -> str:
        c = self.config
        return CacheIndex.key("plan", c.n_max, c.eps, c.digits)

    def current_plan(self) -> tuple[int, int]:
        key = self._plan_key()
        if self.index.has(key):
            rec = json.loads(self.index.read(key))
            return rec["node_digits"], rec["count"]
        return plan_nodes(self.config.n_max, self.config.digits, self.config.eps)

    def _save_plan(self, node_digits: int, count: int) -> None:
        rec = json.dumps({"node_digits": node_digits, "count": count}, sort_keys=True) + "\n"
        self.index.write(self._plan_key(), f"plan/{self.config.run_tag}_n{self.config.n_max}.json", rec)

    def tabulate(self, node_digits: int | None = None, count: int | None = None) -> PhiTable:
        if node_digits is None or count is None:
            node_digits, count = self.current_plan()
        key = self._phi_key(node_digits, count)
        if self.index.has(key):
            self._table = PhiTable.from_text(self.index.read(key))
            return self._table
        log.info("tabulating %d phi nodes at %d digits, eps=%s", count, node_digits, self.config.eps)
        table = tabulate_phi_nodes(self.config.eps, count, node_digits, workers=self.config.workers)
        self.counters.phi_evaluations += count - 1
        rel = f"phi/phi_eps{self.config.eps_tag}_d{node_digits}_c{count}.txt"
        self.index.write(key, rel, table.to_text())
        self._save_plan(node_digits, count)
        self._table = table
        return table

    # gamma ---------------------------------------------------------------

    def _gamma_key(self, n: int) -> str:
        return CacheIndex.key("stieltjes", n, self.config.eps, self.config.digits)

    def _gamma_path(self, n: int) -> str:
        return f"stieltjes/{self.config.run_tag}/gamma_{n:04d}.txt"

    def load_gamma(self, n: int, check: bool = True) -> StieltjesValue:
        key = self._gamma_key(n)
        if not self.index.has(key):
            raise MissingArtifactError(f"stage 'stieltjes' has not produced gamma_{n}")
        return StieltjesValue.from_text(self.index.read(key, check))

    def stieltjes(self) -> list[StieltjesValue]:
        c = self.config
        todo = [n for n in range(c.n_max + 1) if not self.index.has(self._gamma_key(n))]
        if todo:
            node_digits, count = self.current_plan()
            for _ in range(MAX_ROUNDS):
                table = self.tabulate(node_digits, count)
                try:
                    values = compute_gammas(table, todo, c.digits, c.workers)
                except InsufficientNodesError as exc:
                    log.info("%s; extending node table", exc)
                    count = count + max(10, count // 4)
                    continue
                short = [v for v in values if v.claimed_acc < c.digits]
                if short:
                    deficit = max(c.digits - v.claimed_acc for v in short)
                    node_digits += deficit + guard_digits(c.digits)
                    log.info("claimed accuracy short by %d digits; raising node precision", deficit)
                    continue
                for v in values:
                    self.index.write(self._gamma_key(v.n), self._gamma_path(v.n), v.to_text())
                    self.counters.gamma_computed += 1
                self._save_plan(node_digits, count)
                break
            else:
                raise InsufficientPrecisionError(
                    f"could not certify {c.digits} digits for n <= {c.n_max} after {MAX_ROUNDS} rounds"
                )
        return [self.load_gamma(n) for n in range(c.n_max + 1)]

    # continued fractions -------------------------------------------------

    def _cf_key(self, n: int) -> str:
        c = self.config
        return CacheIndex.key("cf", n, c.eps, c.digits, c.stop_policy, c.nmax)

    def load_cf(self, n: int) -> ContinuedFraction:
        key = self._cf_key(n)
        if not self.index.has(key):
            raise MissingArtifactError(f"stage 'cf' has not produced the expansion of gamma_{n}")
        return ContinuedFraction.from_json(self.index.read(key))

    def cf(self) -> list[ContinuedFraction]:
        c = self.config
        for n in range(c.n_max + 1):
            key = self._cf_key(n)
            if self.index.has(key):
                continue
            g = self.load_gamma(n)
            r = certified_input(g, c.digits)
            nmax = c.nmax if c.stop_policy == "nmax" else None
            cf = contfrac(r, nmax=nmax, label=n)
            self.index.write(key, f"cf/{c.cf_tag}/cf_{n:04d}.json", cf.to_json())
            self.counters.cf_computed += 1
        return [self.load_cf(n) for n in range(c.n_max + 1)]

    # diagnostics ---------------------------------------------------------

    def _stats_key(self, n: int) -> str:
        c = self.config
        return CacheIndex.key("stats", n, c.eps, c.digits, c.stop_policy, c.nmax, c.m_start)

    def load_stats(self, n: int) -> CFStatsReport:
        key = self._stats_key(n)
        if not self.index.has(key):
            raise MissingArtifactError(f"stage 'stats' has not produced diagnostics for gamma_{n}")
        return CFStatsReport.from_record(json.loads(self.index.read(key)))

    def stats(self) -> list[CFStatsReport]:
        c = self.config
        for n in range(c.n_max + 1):
            key = self._stats_key(n)
            if self.index.has(key):
                continue
            rep = cf_stats(self.load_cf(n), m_start=c.m_start)
            text = json.dumps(rep.to_record(), sort_keys=True) + "\n"
            self.index.write(key, f"stats/{c.cf_tag}_m{c.m_start}/stats_{n:04d}.json", text)
            self.counters.stats_computed += 1
        return [self.load_stats(n) for n in range(c.n_max + 1)]

    def _norm_key(self, n: int) -> str:
        c = self.config
        return CacheIndex.key("normality", n, c.eps, c.digits, c.base, c.kgram)

    def load_normality(self, n: int) -> DigitStats:
        key = self._norm_key(n)
        if not self.index.has(key):
            raise MissingArtifactError(f"stage 'normality' has not produced digit statistics for gamma_{n}")
        rec = json.loads(self.index.read(key))
        return _digitstats_from_record(rec)

    def normality(self) -> list[DigitStats]:
        c = self.config
        for n in range(c.n_max + 1):
            key = self._norm_key(n)
            if self.index.has(key):
                continue
            g = self.load_gamma(n)
            digits = expansion_digits(certified_input(g, c.digits))
            st = kgram_freq(digits, c.kgram, c.base, label=n)
            text = json.dumps(_digitstats_record(st), sort_keys=True) + "\n"
            self.index.write(key, f"normality/{c.run_tag}_k{c.kgram}/digits_{n:04d}.json", text)
            self.counters.normality_computed += 1
        return [self.load_normality(n) for n in range(c.n_max + 1)]

    # reports -------------------------------------------------------------

    def report(self) -> dict:
        files = emit_reports(self)
        return files

    def run(self) -> Counters:
        self.stieltjes()
        self.cf()
        self.stats()
        self.normality()
        self.report()
        return self.counters

    def verify(self, sample=None) -> dict:
        return verify_precision(self, sample)


def certified_input(g: StieltjesValue, digits: int) -> BigReal:
    """gamma truncated to ``digits`` significant digits (fewer if fewer are claimed)."""
    d = min(digits, g.claimed_acc)
    text = g.gamma.truncated(d)
    return BigReal.parse(text, d)


def _digitstats_record(st: DigitStats) -> dict:
    return {
        "n": st.label,
        "base": st.base,
        "k": st.k,
        "n_digits": st.n_digits,
        "freq1": [[f.numerator, f.denominator] for f in st.freq1],
        "freqK": {p: [f.numerator, f.denominator] for p, f in st.freqK.items()},
    }


def _digitstats_from_record(rec: dict) -> DigitStats:
    return DigitStats(
        rec["base"],
        rec["n_digits"],
        tuple(Fraction(a, b) for a, b in rec["freq1"]),
        rec["k"],
        {p: Fraction(a, b) for p, (a, b) in rec["freqK"].items()},
        rec["n"],
    )


def _gamma_task(args):
    n, alphas, stirling, work = args
    return gamma_n(n, alphas, stirling, work_digits=work)


def compute_gammas(table: PhiTable, ns, digits: int, workers: int = 1) -> list[StieltjesValue]:
    """gamma_n for each n in ``ns`` from one node table; results independent of ``workers``."""
    ns = list(ns)
    alphas = alpha_coeffs(table, table.count - 1)
    stirling = stirling_triangle(table.count - 1, max(ns) + 1)
    work = digits + guard_digits(digits)
    if workers <= 1:
        return [gamma_n(n, alphas, stirling, work_digits=work) for n in ns]
    return _pmap(_gamma_task, [(n, alphas, stirling, work) for n in ns], workers)


# report emission ----------------------------------------------------------


def _fmt(x) -> str:
    return f"{float(x):.6f}"


def _write_table(pipe: Pipeline, name: str, header: list[str], rows, comments=()) -> Path:
    lines = [f"# {c}" for c in comments]
    lines.append("\t".join(header))
    lines.extend("\t".join(str(v) for v in row) for row in rows)
    text = "\n".join(lines) + "\n"
    rel = f"reports/{pipe.config.cf_tag}/{name}"
    key = CacheIndex.key("report", name, pipe.config.cf_tag, pipe.config.m_start, pipe.config.kgram)
    p = pipe.index.root / rel
    if pipe.index.has(key) and p.read_bytes() == text.encode():
        return p
    pipe.index.write(key, rel, text)
    pipe.counters.reports_written += 1
    return p


def emit_reports(pipe: Pipeline) -> dict:
    """Plot-ready tab-separated tables for every diagnostic; returns {name: path}."""
    c = pipe.config
    ns = range(c.n_max + 1)
    stats = [pipe.load_stats(n) for n in ns]
    norms = [pipe.load_normality(n) for n in ns]
    K0 = float(khinchin_constant(20).value)
    L0 = float(levy_constant(20).value)
    out = {}
    out["fig1"] = _write_table(
        pipe,
        "fig1_digit_deviations.tsv",
        ["n", "digit", "h", "offset"],
        [
            (s.label, a, _fmt(h), _fmt(off))
            for s in norms
            for a, h, off in digit_deviation_rows(s)
        ],
        [f"base={c.base}", "digits=" + ",".join(str(s.n_digits) for s in norms)],
    )
    out["fig2"] = _write_table(
        pipe,
        "fig2_max_quotient.tsv",
        ["n", "length", "max_a", "log10_max_a"],
        [(r.label, r.length, r.max_quotient, _fmt(math.log10(r.max_quotient))) for r in stats],
    )
    out["fig3"] = _write_table(
        pipe, "fig3_khinchin_final.tsv", ["n", "K_final", "K_final_minus_K0"],
        [(r.label, _fmt(r.K_final), _fmt(r.K_final - K0)) for r in stats], [f"K0={K0:.15f}"],
    )
    out["fig4"] = _write_table(
        pipe, "fig4_khinchin_sign_changes.tsv", ["n", "S_K"], [(r.label, r.S_K) for r in stats],
        [f"m_start={c.m_start}"],
    )
    out["fig5"] = _write_table(
        pipe, "fig5_khinchin_closest.tsv", ["n", "m", "K_closest", "abs_diff"],
        [(r.label, r.K_closest[0], _fmt(r.K_closest[1]), f"{abs(r.K_closest[1] - K0):.6e}") for r in stats],
    )
    out["fig6"] = _write_table(
        pipe, "fig6_levy_final.tsv", ["n", "L_final", "L_final_minus_L0"],
        [(r.label, _fmt(r.L_final), _fmt(r.L_final - L0)) for r in stats], [f"L0={L0:.15f}"],
    )
    out["fig7"] = _write_table(
        pipe, "fig7_levy_sign_changes.tsv", ["n", "S_L"], [(r.label, r.S_L) for r in stats],
        [f"m_start={c.m_start}"],
    )
    out["fig8"] = _write_table(
        pipe, "fig8_levy_closest.tsv", ["n", "m", "L_closest", "abs_diff"],
        [(r.label, r.L_closest[0], _fmt(r.L_closest[1]), f"{abs(r.L_closest[1] - L0):.6e}") for r in stats],
    )
    pooled = stats[0].gk_hist
    for r in stats[1:]:
        pooled = pooled + r.gk_hist
    gk_rows = [(k, _fmt(emp), _fmt(th)) for k, emp, th in pooled.rows() if k is not None]
    tail = pooled.rows()[-1]
    gk_rows.append((f">{pooled.k_max}", _fmt(tail[1]), _fmt(gauss_kuzmin_tail(pooled.k_max))))
    out["fig9"] = _write_table(
        pipe, "fig9_gauss_kuzmin.tsv", ["k", "empirical", "theoretical"], gk_rows,
        [f"quotients={pooled.total}", f"constants={len(stats)}"],
    )
    kstats = norms
    rows = deviation_report(kstats, c.kgram)
    out["table1"] = _write_table(
        pipe,
        "table1_kgram_deviations.tsv",
        ["pattern", "max_dev", "argmax_n"],
        [(p, _fmt(d), n) for p, d, n in rows],
        [f"base={c.base}", f"k={c.kgram}", "digits=" + ",".join(str(s.n_digits) for s in kstats)],
    )
    return out


# verification -------------------------------------------------------------


def verify_precision(pipe: Pipeline, sample=None) -> dict:
    """Recompute a subset at doubled digits and eps/2; every stored digit and quotient must survive.

    Stored files are read without the digest check so that edited digits are
    reported per n rather than as cache corruption.
    """
    c = pipe.config
    if sample is None:
        sample = c.verify_n or tuple(range(min(c.n_max, 7) + 1))
    sample = sorted(set(sample))
    stored = {n: pipe.load_gamma(n, check=False) for n in sample}
    hi_cfg = replace(c, digits=2 * c.digits, eps=c.eps / 2, n_max=max(sample))
    hi = Pipeline(hi_cfg)
    hi.index = pipe.index
    node_digits, count = plan_nodes(hi_cfg.n_max, hi_cfg.digits, hi_cfg.eps)
    fresh = {}
    for _ in range(MAX_ROUNDS):
        table = hi.tabulate(node_digits, count)
        try:
            for v in compute_gammas(table, sample, hi_cfg.digits, c.workers):
                fresh[v.n] = v
            break
        except InsufficientNodesError:
            count += max(10, count // 4)
    else:
        raise InsufficientPrecisionError("verification run could not reach its cutoff")
    offending = []
    details = {}
    for n in sample:
        old, new = stored[n], fresh[n]
        d = min(old.claimed_acc, new.claimed_acc)
        ok_digits = old.gamma.truncated(d) == new.gamma.truncated(d)
        cf_old_key = pipe._cf_key(n)
        ok_cf = True
        if pipe.index.has(cf_old_key):
            try:
                old_cf = ContinuedFraction.from_json(pipe.index.read(cf_old_key, check=False))
            except ValueError:
                old_cf = None
            new_cf = contfrac(certified_input(new, new.claimed_acc), label=n)
            if old_cf is None:
                ok_cf = False
            else:
                m = min(old_cf.length, new_cf.length)
                ok_cf = old_cf.a0 == new_cf.a0 and old_cf.quotients[:m] == new_cf.quotients[:m]
        details[n] = {"digits_checked": d, "digits_ok": ok_digits, "cf_ok": ok_cf}
        if not (ok_digits and ok_cf):
            offending.append(n)
    report = {"sample": sample, "offending": offending, "details": details}
    text = json.dumps(report, sort_keys=True, indent=1) + "\n"
    pipe.index.write(CacheIndex.key("verify", "-", c.eps, c.digits), f"verify/{c.run_tag}.json", text)
    if offending:
        raise VerificationError(f"claimed digits changed for n = {offending}", offending)
    return report
