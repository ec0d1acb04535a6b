"""Monte-Carlo experiment orchestration.

A root seed deterministically spawns named RNG substreams per trial
(channels, noise, probing, selection), so every trial and every method is
reproducible in isolation: removing a method from the run never changes the
numbers of the remaining methods.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .geometry import (
    ArrayConfig,
    Band,
    ScatterSpec,
    ScatteringFunction,
    dft_basis,
    dft_domain_variance,
    overcomplete_dft,
    sample_channel,
    sample_common_interval,
    sample_scattering_function,
)
from .mmv import MMVProblem, solve_mmv
from .precoding import (
    EstimatedChannelSet,
    EstimationMethod,
    evaluate_sinr,
    jomp_estimate,
    ls_estimate,
    rates,
    zf_precoder,
)
from .probing import (
    ProbingKind,
    antenna_selection_probing,
    choose_T,
    common_support,
    gaussian_probing,
    hybrid_probing,
    measure_downlink,
)
from .support import (
    antenna_selection_matrix,
    angular_support_from_ul,
    dl_support_from_angular,
    estimate_ul_support,
    sketch_uplink,
)


class Method(Enum):
    PROPOSED_GAUSSIAN = "ProposedGaussian"
    PROPOSED_ANTENNA_SEL = "ProposedAntennaSel"
    PROPOSED_HYBRID = "ProposedHybrid"
    JOMP = "JOMP"
    FULL_CSIT = "FullCSIT"


ALL_METHODS = tuple(Method)

_PROPOSED = {
    Method.PROPOSED_GAUSSIAN: ProbingKind.GAUSSIAN,
    Method.PROPOSED_ANTENNA_SEL: ProbingKind.ANTENNA_SELECTION,
    Method.PROPOSED_HYBRID: ProbingKind.HYBRID,
}


@dataclass
class ExperimentConfig:
    M: int = 64
    m: int = 16
    K: int = 8
    L: int = 10
    q: int = 2
    theta_max: float = math.pi / 3
    wavelength_ratio: float = 1.1
    ul_snr_db: float = 15.0
    dl_snr_db: float = 20.0
    T_override: int | None = 20
    n_trials: int = 200
    seed: int = 0
    methods: tuple[Method, ...] = ALL_METHODS
    common_mpc: bool = True
    mpc_count: int = 2
    total_support_fraction: float = 1.0 / 8.0
    full_csit_noiseless: bool = False
    sweep: tuple[str, tuple[float, ...]] | None = None

    def __post_init__(self):
        if self.m > self.M:
            raise ValueError("cannot sketch more antennas than exist")
        for name in ("M", "m", "K", "L", "q", "n_trials"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.sweep is not None and self.sweep[0] not in ("dl_snr_db", "T"):
            raise ValueError(f"unknown sweep axis {self.sweep[0]!r}")

    def grid_points(self) -> int:
        return max(512, 8 * self.q * self.M)


def desk_config(**overrides) -> ExperimentConfig:
    """Small-scale defaults suitable for CI and quick runs."""
    return ExperimentConfig(**overrides)


def paper_config(**overrides) -> ExperimentConfig:
    """Full-scale parameter set (256 antennas, 20 users, 80 probings)."""
    base = dict(M=256, m=64, K=20, T_override=80, n_trials=2000)
    base.update(overrides)
    return ExperimentConfig(**base)


@dataclass
class TrialResult:
    seed: int
    method: Method
    sinr: np.ndarray
    rates: np.ndarray
    sum_rate: float
    ul_support_sizes: tuple[int, ...]
    dl_support_sizes: tuple[int, ...]
    s_common_size: int
    est_errors: np.ndarray
    T: int
    failed: bool = False


@dataclass
class ExperimentRow:
    trial: int
    sweep_value: float | None
    result: TrialResult


@dataclass
class ResultTable:
    config: ExperimentConfig
    rows: list[ExperimentRow]

    def sum_rates(self, method: Method, sweep_value: float | None = None) -> np.ndarray:
        vals = [
            r.result.sum_rate
            for r in self.rows
            if r.result.method is method
            and (sweep_value is None or r.sweep_value == sweep_value)
        ]
        return np.asarray(vals)

    def mean_sum_rate(self, method: Method, sweep_value: float | None = None) -> float:
        return float(np.nanmean(self.sum_rates(method, sweep_value)))

    def stderr_sum_rate(self, method: Method, sweep_value: float | None = None) -> float:
        v = self.sum_rates(method, sweep_value)
        v = v[np.isfinite(v)]
        return float(np.std(v, ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0

    def to_csv(self, fileobj) -> None:
        fileobj.write(CSV_HEADER + "\n")
        for row in self.rows:
            r = row.result
            sweep = "" if row.sweep_value is None else _fmt(row.sweep_value)
            min_rate = float(np.min(r.rates)) if r.rates.size else float("nan")
            mean_err = float(np.mean(r.est_errors)) if r.est_errors.size else float("nan")
            fileobj.write(
                f"{row.trial},{r.method.value},{sweep},{_fmt(r.sum_rate)},"
                f"{_fmt(min_rate)},{_fmt(mean_err)},{r.T},{r.s_common_size}\n"
            )


CSV_HEADER = "trial,method,sweep_value,sum_rate,min_user_rate,mean_est_err,T,s_common_size"

# energy fraction defining the "dominant" coefficient counts fed to J-OMP
JOMP_GENIE_CAPTURE = 0.99


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def _hash_ints(*keys) -> list[int]:
    digest = hashlib.sha256(":".join(str(k) for k in keys).encode()).digest()
    return [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]


def derive_trial_seed(seed: int, sweep_index: int, trial_index: int) -> int:
    digest = hashlib.sha256(f"trial:{seed}:{sweep_index}:{trial_index}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def substream(trial_seed: int, *keys) -> np.random.Generator:
    """Named RNG stream, a pure function of the trial seed and the key path."""
    return np.random.default_rng(np.random.SeedSequence([trial_seed] + _hash_ints(*keys)))


def dominant_count(variances: np.ndarray, eta: float = 0.99) -> int:
    """Number of largest entries needed to capture ``eta`` of the total."""
    v = np.sort(np.asarray(variances))[::-1]
    total = v.sum()
    if total <= 0:
        return 0
    return int(np.searchsorted(np.cumsum(v), eta * total)) + 1


def _snr_to_power(snr_db: float) -> float:
    return 10.0 ** (snr_db / 10.0)


def run_trial(cfg: ExperimentConfig, trial_seed: int) -> list[TrialResult]:
    """Execute one Monte-Carlo trial and evaluate every configured method.

    All methods share the same scattering geometry and channel realizations;
    methods using the same probing kind also share the same measurements.
    """
    ac = ArrayConfig(cfg.M, cfg.theta_max, cfg.wavelength_ratio)
    gridpts = cfg.grid_points()
    methods = set(cfg.methods)

    spec = ScatterSpec(cfg.theta_max, cfg.mpc_count, cfg.total_support_fraction)
    common = (
        sample_common_interval(substream(trial_seed, "common-mpc"), spec)
        if cfg.common_mpc
        else None
    )
    spec = replace(spec, common_interval=common)
    sfs = [
        sample_scattering_function(substream(trial_seed, "scatter", k), spec)
        for k in range(cfg.K)
    ]

    need_pipeline = bool(methods & _PROPOSED.keys()) or (
        cfg.T_override is None and methods != {Method.FULL_CSIT}
    )

    ul_supports, dl_supports = [], []
    if need_pipeline:
        sigma_ul = math.sqrt(1.0 / _snr_to_power(cfg.ul_snr_db))
        B = antenna_selection_matrix(substream(trial_seed, "ul-antenna-sel"), cfg.m, cfg.M)
        G = B @ overcomplete_dft(cfg.M, cfg.q)
        for k in range(cfg.K):
            ul = sample_channel(
                substream(trial_seed, "ul-channel", k), sfs[k], ac, Band.UL,
                cfg.L, gridpts, user_id=k,
            )
            Y = sketch_uplink(B, ul, substream(trial_seed, "ul-noise", k), sigma_ul)
            sol = solve_mmv(MMVProblem(Y, G, sigma_ul))
            s_ul = estimate_ul_support(sol)
            xg = angular_support_from_ul(s_ul, ac, cfg.q)
            ul_supports.append(s_ul)
            dl_supports.append(dl_support_from_angular(xg, ac))

    if cfg.T_override is not None:
        T = cfg.T_override
    elif need_pipeline:
        T = choose_T(dl_supports)
    else:
        T = 1

    H_true = np.column_stack(
        [
            sample_channel(
                substream(trial_seed, "dl-channel", k), sfs[k], ac, Band.DL,
                1, gridpts, user_id=k,
            ).H[:, 0]
            for k in range(cfg.K)
        ]
    )
    P = P_prob = _snr_to_power(cfg.dl_snr_db)
    F = dft_basis(cfg.M)

    # probing construction can fail (e.g. hybrid with T below the common
    # support size); record the failure and sentinel only the methods that
    # depend on that probing kind
    phis, meas = {}, {}
    def build_probing(kind):
        if kind is ProbingKind.GAUSSIAN:
            return gaussian_probing(
                substream(trial_seed, "probe", "gaussian"), T, cfg.M, P_prob)
        if kind is ProbingKind.ANTENNA_SELECTION:
            return antenna_selection_probing(
                substream(trial_seed, "probe", "antenna"), T, cfg.M, P_prob)
        return hybrid_probing(
            substream(trial_seed, "probe", "hybrid"), dl_supports, T, cfg.M, P_prob, F)

    wanted = {_PROPOSED[m] for m in methods & _PROPOSED.keys()}
    if Method.JOMP in methods:
        wanted.add(ProbingKind.GAUSSIAN)
    for kind in wanted:
        try:
            phi = build_probing(kind)
        except ValueError:
            continue
        phis[kind] = phi
        meas[kind] = [
            measure_downlink(phi, H_true[:, k], substream(trial_seed, "dl-meas", kind.value, k))
            for k in range(cfg.K)
        ]

    s_common_size = len(common_support(dl_supports)) if dl_supports else 0
    true_norms = np.linalg.norm(H_true, axis=0)

    def evaluate(method: Method, est: EstimatedChannelSet) -> TrialResult:
        prec = zf_precoder(est)
        sinr = evaluate_sinr(H_true, prec, P)
        per_user, total = rates(sinr)
        errs = np.linalg.norm(est.H_hat - H_true, axis=0) / true_norms
        return TrialResult(
            seed=trial_seed,
            method=method,
            sinr=sinr,
            rates=per_user,
            sum_rate=total,
            ul_support_sizes=tuple(len(s) for s in ul_supports),
            dl_support_sizes=tuple(len(s) for s in dl_supports),
            s_common_size=s_common_size,
            est_errors=errs,
            T=T,
        )

    def sentinel(method: Method) -> TrialResult:
        nan = np.full(cfg.K, np.nan)
        return TrialResult(
            seed=trial_seed, method=method, sinr=nan, rates=nan,
            sum_rate=float("nan"),
            ul_support_sizes=tuple(len(s) for s in ul_supports),
            dl_support_sizes=tuple(len(s) for s in dl_supports),
            s_common_size=s_common_size, est_errors=nan, T=T, failed=True,
        )

    results = []
    for method in cfg.methods:
        try:
            if method in _PROPOSED:
                kind = _PROPOSED[method]
                H_hat = np.column_stack(
                    [
                        ls_estimate(meas[kind][k], phis[kind], F, dl_supports[k]).h_hat
                        for k in range(cfg.K)
                    ]
                )
                est = EstimatedChannelSet(H_hat, EstimationMethod.PROPOSED_LS)
            elif method is Method.JOMP:
                # genie side information: dominant-coefficient counts from the
                # true scattering functions
                variances = [
                    dft_domain_variance(sfs[k], ac, Band.DL, gridpts) for k in range(cfg.K)
                ]
                s_total = max(dominant_count(v, JOMP_GENIE_CAPTURE) for v in variances)
                if common is not None:
                    common_var = dft_domain_variance(
                        ScatteringFunction.uniform([common]), ac, Band.DL, gridpts
                    )
                    s_common = min(dominant_count(common_var, JOMP_GENIE_CAPTURE), s_total)
                else:
                    # the algorithm is built around a common-support assumption
                    # and keeps its joint stage (one MPC's worth of indices)
                    # even when the geometry provides no shared cluster
                    s_common = s_total // cfg.mpc_count
                est = jomp_estimate(
                    meas[ProbingKind.GAUSSIAN], phis[ProbingKind.GAUSSIAN], F,
                    s_total, s_common,
                )
            elif method is Method.FULL_CSIT:
                H_hat = H_true.copy()
                if not cfg.full_csit_noiseless:
                    std = math.sqrt(1.0 / _snr_to_power(cfg.dl_snr_db) / 2.0)
                    noise_rng = substream(trial_seed, "csit-noise")
                    H_hat = H_hat + std * (
                        noise_rng.standard_normal(H_hat.shape)
                        + 1j * noise_rng.standard_normal(H_hat.shape)
                    )
                est = EstimatedChannelSet(H_hat, EstimationMethod.FULL_CSIT)
            else:  # pragma: no cover
                raise ValueError(f"unknown method {method}")
            results.append(evaluate(method, est))
        except (KeyError, ValueError, np.linalg.LinAlgError):
            results.append(sentinel(method))
    return results


def _apply_sweep(cfg: ExperimentConfig, axis: str, value: float) -> ExperimentConfig:
    if axis == "dl_snr_db":
        return replace(cfg, dl_snr_db=float(value), sweep=None)
    if axis == "T":
        return replace(cfg, T_override=int(value), sweep=None)
    raise ValueError(f"unknown sweep axis {axis!r}")


def run_experiment(cfg: ExperimentConfig) -> ResultTable:
    """Run n_trials seeded trials (per sweep point, if any) and collect rows."""
    if cfg.sweep is None:
        points = [(0, None, cfg)]
    else:
        axis, values = cfg.sweep
        points = [
            (si, float(v), _apply_sweep(cfg, axis, v)) for si, v in enumerate(values)
        ]
    rows = []
    for si, sweep_value, cfg_i in points:
        for ti in range(cfg.n_trials):
            trial_seed = derive_trial_seed(cfg.seed, si, ti)
            for result in run_trial(cfg_i, trial_seed):
                rows.append(ExperimentRow(trial=ti, sweep_value=sweep_value, result=result))
    return ResultTable(config=cfg, rows=rows)


def ccdf(values, grid) -> list[tuple[float, float]]:
    """Empirical complementary CDF P(value > x) on the given grid."""
    vals = np.asarray(list(values), dtype=float)
    if vals.size == 0:
        raise ValueError("cannot compute a CCDF of no values")
    return [(float(x), float(np.mean(vals > x))) for x in grid]


# --- flat key = value configuration files ---------------------------------

_INT_FIELDS = {"M", "m", "K", "L", "q", "T_override", "n_trials", "seed"}
_FLOAT_FIELDS = {
    "theta_max", "wavelength_ratio", "ul_snr_db", "dl_snr_db", "total_support_fraction",
}
_BOOL_FIELDS = {"common_mpc", "full_csit_noiseless"}
_INT_SWEEP_AXES = {"T"}


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines (``#`` comments) into config overrides."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in _INT_FIELDS:
            out[key] = None if value.lower() == "none" else int(value)
        elif key in _FLOAT_FIELDS:
            out[key] = float(value)
        elif key in _BOOL_FIELDS:
            if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(f"line {lineno}: bad boolean {value!r}")
            out[key] = value.lower() in ("true", "1", "yes")
        elif key == "methods":
            out[key] = tuple(Method(v.strip()) for v in value.split(","))
        elif key == "sweep":
            axis, _, rest = value.partition(":")
            axis = axis.strip()
            vals = tuple(float(v) for v in rest.split(","))
            out[key] = (axis, vals)
        else:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
    return out


def load_config(path=None, scale: str = "desk", **overrides) -> ExperimentConfig:
    """Build a config from a scale preset, an optional file, and overrides."""
    file_overrides = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            file_overrides = parse_config_text(fh.read())
    file_overrides.update({k: v for k, v in overrides.items() if v is not None})
    maker = {"desk": desk_config, "paper": paper_config}.get(scale)
    if maker is None:
        raise ValueError(f"unknown scale {scale!r}")
    return maker(**file_overrides)
