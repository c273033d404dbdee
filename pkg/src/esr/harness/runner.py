"""Analytic runs, seeded Monte Carlo verification, sweeps and bound searches."""

import os
from collections import Counter

import numpy as np

from .. import __version__
from ..bell import (
    SWEEP_COLUMNS,
    correlations,
    efficiency_closed_form,
    efficiency_sweep,
    max_uniform_efficiency,
    modified_bchsh_lhs,
    quantum_chsh,
    quantum_correlation,
    with_uniform_detection,
)
from ..dynamics import NO, PRUNE_TOL, YES, measure
from ..observables import overall_probability
from ..states import OperationalMixture, conditional_density_rows, mixture_overall_probability
from .config import ConfigError
from .report import RunReport

RNG_ALGORITHM = "numpy.random.PCG64"
SEED_ENV = "ESR_SEED"
NORMALIZATION_TOL = 1e-12
BOUND_TOL = 1e-8
CLOSED_FORM_TOL = 1e-9
Z_LIMIT = 3.0

STEP_COLUMNS = ("protocol", "step", "observable", "outcome", "probability")
PATH_COLUMNS = ("protocol", "path", "probability")
MC_STEP_COLUMNS = ("protocol", "step", "observable", "outcome", "count", "frequency", "probability", "z")
MC_PATH_COLUMNS = ("protocol", "path", "count", "frequency", "probability", "z")
BELL_COLUMNS = ("scenario", "E_ab", "E_ab_prime", "E_a_prime_b", "E_a_prime_b_prime",
                "modified_lhs", "quantum_chsh")
BOUND_COLUMNS = ("scenario", "quantum_chsh", "max_uniform_efficiency", "closed_form",
                 "lhs_at_bound", "vacuous")
CONDITIONAL_COLUMNS = ("state", "observable", "property", "component", "weight")


def resolve_seed(cfg, cli_seed=None, env=None):
    """Seed precedence: command line, then ``ESR_SEED``, then the config."""
    env = os.environ if env is None else env
    if cli_seed is not None:
        return int(cli_seed), "cli"
    if env.get(SEED_ENV, "").strip():
        try:
            return int(env[SEED_ENV].strip(), 0), "env"
        except ValueError:
            raise ConfigError(SEED_ENV, f"{env[SEED_ENV]!r} is not an integer") from None
    return cfg.seed, "config"


def _provenance(cfg, seed=None, source=None, **extra):
    prov = {
        "config_name": cfg.name,
        "config_sha256": cfg.digest(),
        "tool_version": f"esr {__version__}",
    }
    if seed is not None:
        prov.update(seed=seed, seed_source=source, rng=RNG_ALGORITHM)
    prov.update(extra)
    return prov


def _step_branches(g, x):
    """(label, outcome set, branch) triples in declared order."""
    if x is None:
        return [(g.label(n), frozenset({n}), YES) for n in g.outcome_order()]
    return [("yes", x, YES), ("no", x, NO)]


def _branch_probabilities(g, branches, state):
    out = []
    for _, x, br in branches:
        xb = x if br == YES else g.all_outcomes - x
        if isinstance(state, OperationalMixture):
            out.append(mixture_overall_probability(state, g, xb))
        else:
            out.append(overall_probability(g, state.vector, xb))
    return np.clip(np.array(out), 0.0, 1.0)


def protocol_tree(protocol):
    """Enumerate all outcome histories with nonnegligible probability.

    Returns ``(marginals, paths, records)``: per-step ``{label: probability}``
    dicts, ``[(history, probability)]`` and measurement records.
    """
    paths = [((), 1.0, protocol.state)]
    marginals, records = [], []
    for k, (oname, g, x) in enumerate(protocol.steps):
        branches = _step_branches(g, x)
        marg = {label: 0.0 for label, _, _ in branches}
        new = []
        for hist, p, state in paths:
            probs = _branch_probabilities(g, branches, state)
            for (label, xs, br), q in zip(branches, probs):
                marg[label] += p * q
                if p * q <= PRUNE_TOL:
                    continue
                rec = measure(g, state, xs, br)
                records.append({"protocol": protocol.name, "step": k, "history": list(hist),
                                "outcome": label, **rec.to_dict()})
                new.append((hist + (label,), p * q, rec.post_state))
        marginals.append(marg)
        paths = new
    return marginals, [(h, p) for h, p, _ in paths], records


def _path_label(hist):
    return "|".join(hist)


def _bell_section(cfg, report):
    if not cfg.bell:
        return
    table = report.table("bell", BELL_COLUMNS)
    body = []
    for name, sc in cfg.bell.items():
        es = correlations(sc)
        lhs = modified_bchsh_lhs(sc)
        q = quantum_chsh(sc)
        table.rows.append((name, *es, lhs, q))
        qs = [quantum_correlation(sc, a, b) for a, b in
              ((sc.a, sc.b), (sc.a, sc.b_prime), (sc.a_prime, sc.b), (sc.a_prime, sc.b_prime))]
        body.append(f"{name}: modified LHS {lhs:.10g}, quantum CHSH {q:.10g}")
        body.append(f"{name}: E = " + ", ".join(f"{e:.10g}" for e in es))
        body.append(f"{name}: quantum correlations = " + ", ".join(f"{e:.10g}" for e in qs))
    report.sections.append(("bell scenarios", body))


def _sweep_section(cfg, report):
    if not cfg.sweeps:
        return
    table = report.table("bchsh_sweep", ("sweep", "scenario") + SWEEP_COLUMNS)
    body = []
    for name, (scname, ps) in cfg.sweeps.items():
        rows = efficiency_sweep(cfg.bell[scname], ps)
        flips = None
        for prev, row in zip(rows, rows[1:]):
            if prev[-1] != row[-1]:
                flips = (prev[8], row[8])
                break
        for row in rows:
            table.rows.append((name, scname, *row))
        where = f"between p={flips[0]:g} and p={flips[1]:g}" if flips else "nowhere on the grid"
        body.append(f"{name} ({scname}): {len(rows)} rows, bound flag flips {where}")
    report.sections.append(("efficiency sweeps", body))


def _conditional_section(cfg, report):
    table = None
    seen = set()
    body = []
    for prot in cfg.protocols:
        if not isinstance(prot.state, OperationalMixture):
            continue
        for oname, g, _ in prot.steps:
            key = (prot.state_name, oname)
            if key in seen:
                continue
            seen.add(key)
            table = table or report.table("conditional_density", CONDITIONAL_COLUMNS)
            for label, prop, j, w in conditional_density_rows(prot.state, g, prot.state_name):
                table.rows.append((label, oname, prop, j, w))
                body.append(f"{label} / {oname} {prop}: component {j} weight {w:.10g}")
    if body:
        report.sections.append(("conditional densities", body))


def run_analytic(cfg) -> RunReport:
    """Exact probabilities for every protocol, bell scenario and sweep in ``cfg``."""
    report = RunReport("analytic", _provenance(cfg))
    if cfg.protocols:
        steps = report.table("protocol_steps", STEP_COLUMNS)
        paths_t = report.table("protocol_paths", PATH_COLUMNS)
        body = []
        for prot in cfg.protocols:
            marginals, paths, records = protocol_tree(prot)
            report.records.extend(records)
            for k, marg in enumerate(marginals):
                oname = prot.steps[k][0]
                for label, p in marg.items():
                    steps.rows.append((prot.name, k, oname, label, p))
                body.append(f"{prot.name} step {k} ({oname}): "
                            + ", ".join(f"p({label})={p:.10g}" for label, p in marg.items()))
                report.add_check(f"{prot.name} step {k} normalization", sum(marg.values()) - 1.0, NORMALIZATION_TOL)
            for hist, p in paths:
                paths_t.rows.append((prot.name, _path_label(hist), p))
        report.sections.append(("protocols", body))
        _conditional_section(cfg, report)
    _bell_section(cfg, report)
    _sweep_section(cfg, report)
    return report


def _z_score(freq, p, n):
    if 0.0 < p < 1.0:
        return (freq - p) * np.sqrt(n / (p * (1.0 - p)))
    return None


def sample_protocol(protocol, samples, seed, batch_size):
    """Sample outcome histories by inverse CDF over outcomes in declared order.

    Batch ``b`` draws from ``PCG64(seed ^ b)``; one uniform per (step, sample).
    Returns ``(step_counts, path_counts, batch_seeds)``.
    """
    n_steps = len(protocol.steps)
    branches = [_step_branches(g, x) for _, g, x in protocol.steps]
    step_counts = [np.zeros(len(b), dtype=np.int64) for b in branches]
    path_counts = Counter()
    cache = {(): protocol.state}
    seeds = []
    n_batches = -(-samples // batch_size)
    for b in range(n_batches):
        n_b = min(batch_size, samples - b * batch_size)
        sub = seed ^ b
        seeds.append(sub)
        rng = np.random.Generator(np.random.PCG64(sub))
        u = rng.random((n_steps, n_b))
        groups = {(): np.arange(n_b)}
        for k, (_, g, _) in enumerate(protocol.steps):
            new = {}
            for hist, idx in groups.items():
                state = cache[hist]
                probs = _branch_probabilities(g, branches[k], state)
                cum = np.cumsum(probs)
                choice = np.searchsorted(cum, u[k, idx] * cum[-1], side="right")
                for i in np.unique(choice):
                    members = idx[choice == i]
                    step_counts[k][i] += members.size
                    label, xs, br = branches[k][i]
                    key = hist + (label,)
                    if key not in cache:
                        cache[key] = measure(g, state, xs, br).post_state
                    new[key] = members
            groups = new
        if n_steps:
            for hist, idx in groups.items():
                path_counts[hist] += idx.size
    return step_counts, path_counts, seeds


def run_monte_carlo(cfg, seed=None, seed_source="config", samples=None) -> RunReport:
    """Sample every protocol and compare frequencies with the analytic values."""
    seed = cfg.seed if seed is None else seed
    samples = cfg.samples if samples is None else samples
    if samples < 1:
        raise ValueError("sample count must be at least 1")
    batch = cfg.canonical["batch_size"]
    report = RunReport("monte-carlo", _provenance(cfg, seed, seed_source, samples=samples, batch_size=batch,
                                                  substream_rule="seed XOR batch_index"))
    z_all = []
    max_dev = 0.0
    if cfg.protocols:
        steps_t = report.table("mc_steps", MC_STEP_COLUMNS)
        paths_t = report.table("mc_paths", MC_PATH_COLUMNS)
        body = []
        for prot in cfg.protocols:
            marginals, paths, _ = protocol_tree(prot)
            step_counts, path_counts, seeds = sample_protocol(prot, samples, seed, batch)
            body.append(f"{prot.name}: batch seeds {seeds}")
            for k, marg in enumerate(marginals):
                oname = prot.steps[k][0]
                parts = []
                for (label, p), count in zip(marg.items(), step_counts[k]):
                    freq = count / samples
                    z = _z_score(freq, p, samples)
                    max_dev = max(max_dev, abs(freq - p))
                    if z is not None:
                        z_all.append(z)
                    elif abs(freq - p) > 0:
                        report.add_check(f"{prot.name} step {k} outcome {label} (p={p:g}) frequency",
                                         freq - p, 0.0, ok=False)
                    steps_t.rows.append((prot.name, k, oname, label, int(count), freq, p, z))
                    parts.append(f"{label}: {int(count)} ({freq:.6f} vs {p:.6f}"
                                 + (f", z={z:+.3f})" if z is not None else ")"))
                body.append(f"{prot.name} step {k} ({oname}): " + "; ".join(parts))
                report.add_check(f"{prot.name} step {k} counts sum to samples",
                                 int(step_counts[k].sum()) - samples, 0.0)
            analytic = dict(paths)
            for hist in sorted(set(analytic) | set(path_counts)):
                count = path_counts.get(hist, 0)
                p = analytic.get(hist, 0.0)
                freq = count / samples
                z = _z_score(freq, p, samples)
                paths_t.rows.append((prot.name, _path_label(hist), count, freq, p, z))
        report.sections.append(("monte carlo", body))
    frac = float(np.mean(np.abs(z_all) > Z_LIMIT)) if z_all else 0.0
    report.sections.append(("summary", [
        f"max |frequency - probability| = {max_dev:.6g}",
        f"share of |z| > {Z_LIMIT:g}: {frac:.4f} over {len(z_all)} outcomes",
    ]))
    report.add_check("share of |z| > 3", frac, cfg.canonical["z_fail_fraction"],
                     ok=frac <= cfg.canonical["z_fail_fraction"])
    return report


def bchsh_sweep(cfg) -> RunReport:
    report = RunReport("bchsh-sweep", _provenance(cfg))
    _sweep_section(cfg, report)
    return report


def bound_search(cfg) -> RunReport:
    """Largest uniform detection efficiency compatible with the modified inequality."""
    report = RunReport("bound-search", _provenance(cfg))
    table = report.table("bound_search", BOUND_COLUMNS)
    body = []
    for name, sc in cfg.bell.items():
        q = quantum_chsh(sc)
        p_star = max_uniform_efficiency(sc)
        closed = efficiency_closed_form(q)
        lhs = modified_bchsh_lhs(with_uniform_detection(sc, p_star))
        vacuous = q <= 2.0
        table.rows.append((name, q, p_star, closed, lhs, vacuous))
        if vacuous:
            body.append(f"{name}: quantum CHSH {q:.10g} <= 2, bound is vacuous (efficiency 1)")
        else:
            body.append(f"{name}: quantum CHSH {q:.10g}, max uniform efficiency {p_star:.10f}"
                        f" (closed form {closed:.10f}), LHS at bound {lhs:.12f}")
            report.add_check(f"{name} modified LHS at bound - 2", lhs - 2.0, BOUND_TOL)
        report.add_check(f"{name} bisection - closed form", p_star - closed, CLOSED_FORM_TOL)
    report.sections.append(("bound search", body))
    return report
