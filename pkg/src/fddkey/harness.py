"""End-to-end key-generation sessions and experiment sweeps.

One session walks the full protocol: the base station measures the band-1
channel to the user, the user measures band-2, the eavesdropper measures her
own band-2 channel nearby; everyone realizes and normalizes features, the
base station maps its band-1 features through the trained network, each party
quantizes, the guard-index union is exchanged, and the surviving bits become
keys. Sweeps repeat sessions over a grid of one protocol variable with
common random numbers across grid points, so a session keeps its user
position and noise stream while the swept variable changes.

Everything is deterministic given the seeds recorded in the results.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .channel import (
    BandConfig,
    Environment,
    add_awgn,
    cfr_for_position,
    check_eve_separation,
    eve_separation_threshold_m,
    validate_band_pair,
)
from .features import MinMaxNormalizer, realize
from .io import (
    SWEEP_METRIC_COLUMNS,
    read_checkpoint,
    read_normalizers,
    write_checkpoint,
    write_normalizers,
    write_sessions_jsonl,
    write_sweep_csv,
)
from .metrics import ker as ker_metric
from .metrics import kgr as kgr_metric
from .metrics import nvd
from .network import NetworkParams, forward
from .quantizer import QuantConfig, encode_surviving, quantize, union_dropped

SWEEPABLE = ("snr_db", "guard_factor", "levels")


def normalizer_sidecar_path(checkpoint_path) -> str:
    """The JSON sidecar sitting next to a checkpoint file."""
    path = str(checkpoint_path)
    stem = path[:path.rfind(".")] if "." in path.rsplit("/", 1)[-1] else path
    return stem + ".normalizers.json"


@dataclass
class ModelBundle:
    """A trained mapping network plus the per-band feature normalizers.

    The three pieces always travel together: predictions are only meaningful
    on features scaled with the same extrema the network saw in training.
    """

    params: NetworkParams
    norm1: MinMaxNormalizer
    norm2: MinMaxNormalizer

    def save(self, checkpoint_path) -> None:
        write_checkpoint(checkpoint_path, self.params)
        write_normalizers(normalizer_sidecar_path(checkpoint_path),
                          self.norm1, self.norm2)

    @classmethod
    def load(cls, checkpoint_path) -> "ModelBundle":
        params = read_checkpoint(checkpoint_path)
        norm1, norm2 = read_normalizers(normalizer_sidecar_path(checkpoint_path))
        return cls(params=params, norm1=norm1, norm2=norm2)


@dataclass(frozen=True)
class SessionConfig:
    """Everything one protocol run depends on, seeds included."""

    environment: Environment
    band1: BandConfig
    band2: BandConfig
    bob_position: tuple
    eve_position: tuple
    snr_db_alice: float = np.inf
    snr_db_bob: float = np.inf
    snr_db_eve: float = np.inf
    quant: QuantConfig = field(default_factory=QuantConfig)
    seed: int = 0

    def __post_init__(self):
        validate_band_pair(self.band1, self.band2)
        object.__setattr__(self, "bob_position",
                           tuple(float(v) for v in self.bob_position))
        object.__setattr__(self, "eve_position",
                           tuple(float(v) for v in self.eve_position))
        if not check_eve_separation(self.bob_position, self.eve_position,
                                    self.band1, self.band2):
            limit = eve_separation_threshold_m(self.band1, self.band2)
            raise ValueError(
                f"eavesdropper within the decorrelation distance ({limit:.4f} m) "
                "of the user; the attack model requires strict separation")

    def config_hash(self) -> str:
        payload = {
            "environment": self.environment.to_dict(),
            "band1": asdict(self.band1),
            "band2": asdict(self.band2),
            "bob_position": list(self.bob_position),
            "eve_position": list(self.eve_position),
            "snr_db": [self.snr_db_alice, self.snr_db_bob, self.snr_db_eve],
            "quant": asdict(self.quant),
            "seed": self.seed,
        }
        blob = json.dumps(payload, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class SessionResult:
    """Metrics and key material from one completed session."""

    ker: float
    kgr: float
    kgr_pre_alice: float
    kgr_pre_bob: float
    nmse: float
    nvd_ab_pre: float
    nvd_ab_post: float
    nvd_eb: float
    bits_alice: np.ndarray
    bits_bob: np.ndarray
    bits_eve: np.ndarray
    config_hash: str
    seed: int

    def metrics_dict(self) -> dict:
        return {"ker": self.ker, "kgr": self.kgr,
                "kgr_pre_alice": self.kgr_pre_alice,
                "kgr_pre_bob": self.kgr_pre_bob, "nmse": self.nmse,
                "nvd_ab_pre": self.nvd_ab_pre, "nvd_ab_post": self.nvd_ab_post,
                "nvd_eb": self.nvd_eb, "key_bits": int(self.bits_alice.size),
                "config_hash": self.config_hash, "seed": self.seed}


def _measure(env, band, pos, snr_db, rng):
    clean = cfr_for_position(env, band, pos)
    return clean, add_awgn(clean, snr_db, rng)


def run_session(cfg: SessionConfig, bundle: ModelBundle) -> SessionResult:
    """One full key agreement between base station, user, and eavesdropper."""
    env = cfg.environment
    width = bundle.params.arch.layer_sizes[0]
    for band in (cfg.band1, cfg.band2):
        if 2 * band.n_subcarriers != width:
            raise ValueError(
                f"checkpoint expects {width} features but {band.label} has "
                f"{band.n_subcarriers} subcarriers")
    # Independent noise streams per party, derived from the session seed.
    streams = [np.random.default_rng(np.random.SeedSequence([cfg.seed, party]))
               for party in range(3)]

    h1_clean, h1_alice = _measure(env, cfg.band1, cfg.bob_position,
                                  cfg.snr_db_alice, streams[0])
    h2_clean, h2_bob = _measure(env, cfg.band2, cfg.bob_position,
                                cfg.snr_db_bob, streams[1])
    _, h2_eve = _measure(env, cfg.band2, cfg.eve_position,
                         cfg.snr_db_eve, streams[2])

    x1 = bundle.norm1.transform(realize(h1_alice.values)[None, :])
    x2 = bundle.norm2.transform(realize(h2_bob.values)[None, :])
    x2_eve = bundle.norm2.transform(realize(h2_eve.values)[None, :])
    x2_clean = bundle.norm2.transform(realize(h2_clean.values)[None, :])

    x2_hat = forward(bundle.params, x1)

    mat_a = quantize(x2_hat[0], cfg.quant)
    mat_b = quantize(x2[0], cfg.quant)
    mat_e = quantize(x2_eve[0], cfg.quant)

    union = union_dropped(mat_a, mat_b)
    bits_a = encode_surviving(mat_a, union)
    bits_b = encode_surviving(mat_b, union)
    bits_e = encode_surviving(mat_e, union)

    n_sub = cfg.band2.n_subcarriers
    return SessionResult(
        # A session whose guard union discards every index yields no key; its
        # error rate is undefined and excluded from aggregates.
        ker=ker_metric(bits_a, bits_b) if bits_a.size else float("nan"),
        kgr=kgr_metric(bits_a, n_sub),
        kgr_pre_alice=kgr_metric(mat_a.bits, n_sub),
        kgr_pre_bob=kgr_metric(mat_b.bits, n_sub),
        nmse=nvd(x2_hat[0], x2_clean[0]),
        nvd_ab_pre=nvd(x1[0], x2[0]),
        nvd_ab_post=nvd(x2_hat[0], x2[0]),
        nvd_eb=nvd(x2_eve[0], x2[0]),
        bits_alice=bits_a, bits_bob=bits_b, bits_eve=bits_e,
        config_hash=cfg.config_hash(), seed=cfg.seed)


@dataclass
class SweepResult:
    """Aggregated rows plus the per-session audit records behind them."""

    swept_name: str
    rows: list
    sessions: list

    def to_csv(self, path) -> None:
        write_sweep_csv(path, self.swept_name, self.rows)

    def to_jsonl(self, path) -> None:
        write_sessions_jsonl(path, self.sessions)

    def session_values(self, value, metric) -> np.ndarray:
        """All per-session values of one metric at one swept-variable value."""
        return np.array([rec[metric] for rec in self.sessions
                         if rec[self.swept_name] == value])


def _session_seed(root_seed: int, session_index: int) -> int:
    seq = np.random.SeedSequence([root_seed, session_index])
    return int(seq.generate_state(1, np.uint64)[0])


def run_sweep(env: Environment, band1: BandConfig, band2: BandConfig,
              bundle: ModelBundle, positions, swept_name: str, values, *,
              n_sessions: int = 100, snr_db: float = 20.0,
              quant: QuantConfig | None = None,
              eve_offset=(0.15, 0.0, 0.0), seed: int = 0) -> SweepResult:
    """Repeat sessions across a grid of one protocol variable.

    positions is the pool of candidate user locations (N, 3); each session
    draws one and keeps it, along with its noise seed, across all swept
    values. snr_db sets every party's SNR except when it is the swept
    variable; quant supplies the fixed quantizer settings likewise.
    """
    if swept_name not in SWEEPABLE:
        raise ValueError(f"swept variable must be one of {SWEEPABLE}, "
                         f"got {swept_name!r}")
    if n_sessions < 1:
        raise ValueError("n_sessions must be positive")
    positions = np.asarray(positions, dtype=np.float64)
    if positions.ndim != 2 or positions.shape[1] != 3:
        raise ValueError("positions must be an (N, 3) array")
    quant = quant if quant is not None else QuantConfig()
    offset = np.asarray(eve_offset, dtype=np.float64)

    pos_rng = np.random.default_rng(np.random.SeedSequence([seed, 0xB0B]))
    chosen = pos_rng.choice(positions.shape[0], size=n_sessions,
                            replace=n_sessions > positions.shape[0])
    session_seeds = [_session_seed(seed, s) for s in range(n_sessions)]

    rows, sessions = [], []
    for value in values:
        snr = float(value) if swept_name == "snr_db" else snr_db
        if swept_name == "guard_factor":
            qcfg = replace(quant, guard_factor=float(value))
        elif swept_name == "levels":
            qcfg = replace(quant, levels=int(value))
        else:
            qcfg = quant
        per_metric = {m: [] for m in SWEEP_METRIC_COLUMNS[:-1]}
        for s in range(n_sessions):
            bob_pos = positions[chosen[s]]
            cfg = SessionConfig(
                environment=env, band1=band1, band2=band2,
                bob_position=tuple(bob_pos), eve_position=tuple(bob_pos + offset),
                snr_db_alice=snr, snr_db_bob=snr, snr_db_eve=snr,
                quant=qcfg, seed=session_seeds[s])
            result = run_session(cfg, bundle)
            record = {swept_name: _plain(value), "session": s}
            record.update(result.metrics_dict())
            record["bits_alice"] = "".join(map(str, result.bits_alice))
            sessions.append(record)
            for m in per_metric:
                per_metric[m].append(record[m])
        row = {swept_name: _plain(value), "n_sessions": n_sessions}
        for m, vals in per_metric.items():
            row[m] = float(np.nanmean(vals))
        rows.append(row)
    return SweepResult(swept_name=swept_name, rows=rows, sessions=sessions)


def _plain(value):
    """JSON-friendly scalar for a swept-variable value."""
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    return value


def min_snr_for_ker(sweep: SweepResult, threshold: float = 0.1) -> float:
    """Smallest swept SNR whose aggregated KER is at or below threshold.

    Returns inf when no grid point reaches the threshold; only meaningful on
    an snr_db sweep.
    """
    if sweep.swept_name != "snr_db":
        raise ValueError("KER threshold lookup needs an snr_db sweep")
    qualifying = [row["snr_db"] for row in sweep.rows if row["ker"] <= threshold]
    return min(qualifying) if qualifying else float("inf")
