"""End-to-end orchestration: cohort loading, fitting, clustering, studies.

The heavy lifting lives in the library modules; this layer wires files to
functions, stamps every artifact with the configuration hash and seed,
and runs replicate simulation studies in a worker pool.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .baselines import feature_gmm, feature_hclust, feature_kmeans, haralick_features
from .cluster import (
    cut_dendrogram,
    dissimilarity,
    krzanowski_lai_rank,
    posterior_mean_surfaces,
    ward_cluster,
    within_dispersion,
)
from .glcm import Glcm, vectorize
from .lattice import FULL_GRID, UNIQUE_TRIANGLE, lattice_graph
from .metrics import matching_matrix, misassignment_rate, pearson_chi2
from .sampler import Hyperparams, geweke_z, run_chain, subjects_from_vectors
from .simulate import SimConfig, generate_cohort

logger = logging.getLogger(__name__)

#: Named chain/simulation profiles.  ``desk`` is sized so a replicate study
#: finishes in minutes; ``full`` matches the long-chain settings.
PROFILES = {
    "desk": dict(n_iter=4000, n_burn=2000, points_per_surface=4000, subjects_per_class=10, replicates=10),
    "full": dict(n_iter=20000, n_burn=10000, points_per_surface=10000, subjects_per_class=20, replicates=100),
}

BASELINE_METHODS = ("hc", "km", "gmm")


@dataclass
class StudyConfig:
    """Replicate-study settings (one value of the noise scale per run)."""

    s: float = 10.0
    skew: tuple[float, float] | None = None
    replicates: int = 10
    subjects_per_class: int = 10
    points_per_surface: int = 4000
    n_iter: int = 4000
    n_burn: int = 2000
    baseline_g: int = 5
    g_max: int = 10
    seed: int = 0
    workers: int = 1


def load_cohort(manifest_path, intercept: bool = False):
    """Read a cohort manifest into sampler inputs.

    Returns (subjects, graph, subject_ids, true_labels) where labels is
    None when the manifest carries no label column.
    """
    entries, K, mode = io.read_manifest(manifest_path)
    base = Path(manifest_path).parent
    graph = lattice_graph(K, mode)
    vectors, ids, labels, totals = [], [], [], []
    for sid, mpath, label in entries:
        full = Path(mpath)
        if not full.is_absolute():
            full = base / full
        if not full.exists():
            raise ValueError(f"manifest references missing file: {full}")
        counts = io.read_glcm(full)
        if counts.shape != (K, K):
            raise ValueError(f"{full}: expected {K}x{K} counts, got {counts.shape}")
        if mode == FULL_GRID:
            z = counts.ravel()
        else:
            z, _ = vectorize(Glcm(K=K, counts=counts), UNIQUE_TRIANGLE)
        vectors.append(z)
        totals.append(int(counts.sum()))
        ids.append(sid)
        labels.append(label)
    subjects = subjects_from_vectors(vectors, totals=totals, intercept=intercept)
    true_labels = None
    if all(lab is not None for lab in labels):
        true_labels = np.asarray(labels, dtype=np.int64)
    return subjects, graph, ids, true_labels


def fit_command(
    manifest_path,
    out_dir,
    hp: Hyperparams,
    intercept: bool = False,
    surfaces_format: str = "text",
    init: str = "preclustered",
) -> dict:
    """Fit the chain to a cohort and write trace, surfaces, run manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    subjects, graph, ids, _ = load_cohort(manifest_path, intercept=intercept)
    cfg_items = dict(
        n_iter=hp.n_iter, n_burn=hp.n_burn, seed=hp.seed,
        a_tau=hp.a_tau, b_tau=hp.b_tau, a_sigma=hp.a_sigma, b_sigma=hp.b_sigma,
        a_nu=hp.a_nu, b_nu=hp.b_nu, intercept=intercept, init=init,
        lattice=graph.n_sites, subjects=len(subjects),
    )
    chash = io.config_hash(cfg_items)
    meta = {"config_hash": chash, "seed": hp.seed}
    trace = run_chain(subjects, graph, hp, init=init)
    surfaces = posterior_mean_surfaces(trace)

    trace_path = out / "trace.tsv"
    io.write_trace(trace_path, trace, meta)
    if surfaces_format == "binary":
        surf_path = out / "surfaces.bin"
        io.write_surfaces_binary(surf_path, surfaces, meta)
    else:
        surf_path = out / "surfaces.tsv"
        io.write_surfaces_text(surf_path, surfaces, ids, meta)

    z_scores = {}
    for name, series in trace.scalar_series().items():
        try:
            z_scores[name] = geweke_z(series)
        except ValueError:
            z_scores[name] = float("nan")  # trace too short for the diagnostic
    manifest = dict(cfg_items)
    manifest["config_hash"] = chash
    for name, z in z_scores.items():
        manifest[f"geweke_z_{name}"] = f"{z:.6g}"
    run_manifest = out / "run_manifest.txt"
    io.write_keyvalues(run_manifest, manifest)
    return {
        "trace": trace_path,
        "surfaces": surf_path,
        "run_manifest": run_manifest,
        "geweke": z_scores,
        "config_hash": chash,
    }


def cluster_command(fit_dir, out_dir=None, g_max: int | None = None) -> dict:
    """Cluster stored posterior-mean surfaces and write the partition."""
    fit_dir = Path(fit_dir)
    out = Path(out_dir) if out_dir else fit_dir
    out.mkdir(parents=True, exist_ok=True)
    if (fit_dir / "surfaces.tsv").exists():
        ids, surfaces = io.read_surfaces_text(fit_dir / "surfaces.tsv")
        meta = {}
    elif (fit_dir / "surfaces.bin").exists():
        surfaces, meta = io.read_surfaces_binary(fit_dir / "surfaces.bin")
        ids = [f"s{t:04d}" for t in range(surfaces.shape[0])]
    else:
        raise ValueError(f"no surfaces file found under {fit_dir}")
    T = surfaces.shape[0]
    if g_max is None:
        g_max = min(10, T - 1)
    dend = ward_cluster(dissimilarity(surfaces))
    rank = krzanowski_lai_rank(surfaces, dend, g_max)
    part = cut_dendrogram(dend, rank)

    io.write_labels(out / "partition.tsv", ids, part.labels, meta or None)
    io.write_matrix(out / "dendrogram.tsv", dend.merges,
                    header="child_a\tchild_b\theight\tsize")
    with open(out / "kl_report.txt", "w") as fh:
        fh.write(f"selected_rank={rank}\n")
        for g in range(1, g_max + 2):
            wg = within_dispersion(surfaces, cut_dendrogram(dend, g).labels)
            fh.write(f"W_{g}={wg:.17g}\n")
    return {"rank": rank, "labels": part.labels, "ids": ids, "partition": out / "partition.tsv"}


def evaluate_command(truth_path, pred_path, out_path=None) -> dict:
    """Compare two label files on their common subjects (ids must match)."""
    ids_t, labs_t = io.read_labels(truth_path)
    ids_p, labs_p = io.read_labels(pred_path)
    if ids_t != ids_p:
        index = {sid: k for k, sid in enumerate(ids_t)}
        if set(ids_t) != set(ids_p):
            raise ValueError("truth and prediction files cover different subjects")
        order = [index[sid] for sid in ids_p]
        labs_t = labs_t[order]
    m = matching_matrix(labs_t, labs_p)
    result = {
        "misassignment": misassignment_rate(m),
        "chi2": pearson_chi2(m),
        "N": m.N,
    }
    if out_path:
        io.write_keyvalues(out_path, result)
    return result


def simulate_command(cfg: SimConfig, out_dir, replicates: int = 1) -> list[Path]:
    """Write simulated cohorts: one directory per replicate with GLCM
    files, a manifest (with true labels), and a truth label file."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dirs = []
    for rep in range(replicates):
        rep_dir = out / f"rep_{rep:03d}"
        rep_dir.mkdir(exist_ok=True)
        rng = np.random.default_rng([cfg.seed, rep])
        matrices, labels = generate_cohort(cfg, rng)
        entries = []
        ids = [f"s{t:04d}" for t in range(len(matrices))]
        for sid, mat in zip(ids, matrices):
            fname = f"{sid}.glcm"
            io.write_glcm(rep_dir / fname, mat)
            entries.append((sid, fname))
        io.write_manifest(
            rep_dir / "manifest.tsv",
            [(sid, f"{sid}.glcm", int(lab)) for sid, lab in zip(ids, labels)],
            K=cfg.K,
            lattice_mode=FULL_GRID,
        )
        io.write_labels(rep_dir / "truth_labels.tsv", ids, labels)
        io.write_keyvalues(
            rep_dir / "sim_manifest.txt",
            dict(s=cfg.s, skew=cfg.skew, subjects_per_class=cfg.subjects_per_class,
                 points_per_surface=cfg.points_per_surface, seed=cfg.seed, replicate=rep),
        )
        dirs.append(rep_dir)
    return dirs


def baseline_command(manifest_path, method: str, g: int, seed: int = 0, out_dir=None) -> dict:
    """Feature-space baseline clustering of a cohort; writes the partition
    and, when the manifest carries true labels, both metrics."""
    if method not in BASELINE_METHODS:
        raise ValueError(f"method must be one of {BASELINE_METHODS}")
    entries, K, _ = io.read_manifest(manifest_path)
    base = Path(manifest_path).parent
    features, ids, labels = [], [], []
    for sid, mpath, label in entries:
        full = Path(mpath)
        if not full.is_absolute():
            full = base / full
        features.append(haralick_features(io.read_glcm(full)))
        ids.append(sid)
        labels.append(label)
    rng = np.random.default_rng(seed)
    if method == "hc":
        part = feature_hclust(features, g)
    elif method == "km":
        part = feature_kmeans(features, g, rng)
    else:
        part = feature_gmm(features, g, rng)
    result = {"labels": part.labels, "ids": ids, "g": part.g}
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        io.write_labels(out / f"baseline_{method}.tsv", ids, part.labels,
                        {"method": method, "g": g, "seed": seed})
    if all(lab is not None for lab in labels):
        m = matching_matrix(np.asarray(labels), part.labels)
        result["misassignment"] = misassignment_rate(m)
        result["chi2"] = pearson_chi2(m)
    return result


# -- replicate study ---------------------------------------------------

def _study_replicate(args: tuple) -> list[dict]:
    """One replicate: simulate, fit, cluster, evaluate, run baselines."""
    study, rep = args
    rows = []
    try:
        cfg = SimConfig(
            s=study.s,
            skew=study.skew,
            subjects_per_class=study.subjects_per_class,
            points_per_surface=study.points_per_surface,
            seed=study.seed,
        )
        cohort_rng = np.random.default_rng([study.seed, rep, 1])
        matrices, labels = generate_cohort(cfg, cohort_rng)
        graph = lattice_graph(cfg.K, FULL_GRID)
        subjects = subjects_from_vectors([m.ravel() for m in matrices])
        hp = Hyperparams.default(p=1, n_iter=study.n_iter, n_burn=study.n_burn,
                                 seed=int(np.random.default_rng([study.seed, rep, 2]).integers(2**31)))
        trace = run_chain(subjects, graph, hp)
        surfaces = posterior_mean_surfaces(trace)
        dend = ward_cluster(dissimilarity(surfaces))
        rank = krzanowski_lai_rank(surfaces, dend, min(study.g_max, len(subjects) - 1))
        part = cut_dendrogram(dend, rank)
        m = matching_matrix(labels, part.labels)
        rows.append(dict(method="hrgsdp", s=study.s, replicate=rep,
                         misassignment=misassignment_rate(m), chi2=pearson_chi2(m),
                         kl_rank=rank))
        features = [haralick_features(mat) for mat in matrices]
        for method in BASELINE_METHODS:
            rng = np.random.default_rng([study.seed, rep, 3])
            if method == "hc":
                bpart = feature_hclust(features, study.baseline_g)
            elif method == "km":
                bpart = feature_kmeans(features, study.baseline_g, rng)
            else:
                bpart = feature_gmm(features, study.baseline_g, rng)
            mb = matching_matrix(labels, bpart.labels)
            rows.append(dict(method=f"fea{method}", s=study.s, replicate=rep,
                             misassignment=misassignment_rate(mb), chi2=pearson_chi2(mb),
                             kl_rank=study.baseline_g))
    except Exception as exc:  # record and continue with other replicates
        logger.error("replicate %d at s=%s failed: %s", rep, study.s, exc)
        rows.append(dict(method="error", s=study.s, replicate=rep,
                         misassignment=float("nan"), chi2=float("nan"),
                         kl_rank=0, error=str(exc)))
    return rows


def replicate_study(study: StudyConfig, out_dir=None) -> tuple[list[dict], list[dict]]:
    """Run the full simulate-fit-cluster-evaluate loop for one noise level.

    Returns (long_rows, summary_rows); the long rows carry one record per
    (method, replicate).  Failures are kept as rows with method='error'.
    """
    tasks = [(study, rep) for rep in range(study.replicates)]
    if study.workers > 1:
        with ProcessPoolExecutor(max_workers=study.workers) as pool:
            results = list(pool.map(_study_replicate, tasks))
    else:
        results = [_study_replicate(t) for t in tasks]
    rows = [row for chunk in results for row in chunk]

    summary = []
    for method in ["hrgsdp"] + [f"fea{m}" for m in BASELINE_METHODS]:
        sel = [r for r in rows if r["method"] == method and np.isfinite(r["misassignment"])]
        if not sel:
            continue
        mis = np.array([r["misassignment"] for r in sel])
        chi = np.array([r["chi2"] for r in sel])
        summary.append(dict(method=method, s=study.s, n=len(sel),
                            mean_misassignment=float(mis.mean()), sd_misassignment=float(mis.std(ddof=1)) if len(sel) > 1 else 0.0,
                            mean_chi2=float(chi.mean()), sd_chi2=float(chi.std(ddof=1)) if len(sel) > 1 else 0.0))
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_rows(out / f"study_long_s{study.s:g}.tsv", rows,
                    ["method", "s", "replicate", "misassignment", "chi2", "kl_rank"])
        _write_rows(out / f"study_summary_s{study.s:g}.tsv", summary,
                    ["method", "s", "n", "mean_misassignment", "sd_misassignment", "mean_chi2", "sd_chi2"])
    return rows, summary


def _write_rows(path, rows: list[dict], columns: list[str]) -> None:
    with open(path, "w") as fh:
        fh.write("\t".join(columns) + "\n")
        for row in rows:
            fh.write("\t".join(str(row.get(c, "")) for c in columns) + "\n")
