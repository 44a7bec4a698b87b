"""Acceptance suite: the eight primary exit criteria.

Each test prints one PASS/FAIL line (run with ``pytest -s`` to see
them on a green run).  Tolerances are pinned here and nowhere else.
"""

import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from boundedchoice import simulate
from boundedchoice.empirical import build_table, entropy_bits
from boundedchoice.fitting import (
    DecompositionModel,
    FitConfig,
    GaugeSpec,
    average_kl_nats,
    fit,
    kl_grad_betas,
    kl_grad_utilities,
    project_gauge,
)
from boundedchoice.gibbs import (
    GibbsContext,
    LN2,
    bayes_posterior,
    certainty_equivalent,
    free_energy,
    gibbs_posterior,
    regret_residual,
)
from boundedchoice.curves import CurveConfig, restrict_to_stimuli, sweep
from boundedchoice.puzzles import build_stimulus_set, clause_family, enumerate_solutions, generate_puzzle

from conftest import random_context
from test_fitting import random_table


def report(number: int, name: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    suffix = f"  ({detail})" if detail else ""
    print(f"ACCEPTANCE {number} [{name}]: {status}{suffix}")
    assert passed, f"criterion {number} ({name}) failed: {detail}"


def recovery_problem(seed: int = 11):
    """5 stimuli, 3 durations, 8 choices, betas (1, 2.2, 4.5), U drawn in [-2, 2]."""
    design = simulate.ExperimentDesign(
        stimuli=[0, 1, 2, 3, 4],
        stimulus_probs=np.array([0.25, 0.25, 0.25, 0.25, 0.0]),
        durations=[1.25, 2.5, 5.0],
        duration_probs=np.full(3, 1.0 / 3.0),
        control_stimulus=4,
        trials_per_cell=10_000,
    )
    agent = simulate.recovery_agent(
        design, seed=seed, betas_by_duration={1.25: 1.0, 2.5: 2.2, 5.0: 4.5})
    return design, agent


def gauge_aligned(agent: DecompositionModel, gauge: GaugeSpec) -> DecompositionModel:
    truth = DecompositionModel(
        kind="gibbs", stimuli=list(agent.stimuli), durations=list(agent.durations),
        prior=agent.prior, betas=agent.betas, utilities=agent.utilities, gauge=gauge)
    return project_gauge(truth)


def test_criterion_1_analytic_recovery():
    start = time.monotonic()
    design, agent = recovery_problem()
    table = simulate.analytic_table(agent, design)
    config = FitConfig(eta0=1.0, tau=1e6, tolerance=1e-13, max_iterations=200_000)
    model, fit_report = fit(table, config)
    truth = gauge_aligned(agent, model.gauge)
    beta_err = float(np.max(np.abs(model.betas - truth.betas) / truth.betas))
    util_err = float(np.max(np.abs(model.utilities - truth.utilities)))
    elapsed = time.monotonic() - start
    ok = (fit_report.final_j_bits < 1e-6 and beta_err < 1e-3
          and util_err < 1e-3 and elapsed < 60.0)
    report(1, "analytic recovery", ok,
           f"J={fit_report.final_j_bits:.2e} bits, beta rel err={beta_err:.2e}, "
           f"U abs err={util_err:.2e}, {elapsed:.1f}s")


def test_criterion_2_sampled_recovery():
    start = time.monotonic()
    design, agent = recovery_problem()
    records = simulate.sample_trials(agent, design, seed=999)
    assert len(records) == 10_000 * 15
    table = build_table(records, "test", design.stimuli, design.durations)
    config = FitConfig(eta0=1.0, tau=1e6, tolerance=1e-12, max_iterations=100_000)
    model, fit_report = fit(table, config)
    truth = gauge_aligned(agent, model.gauge)
    beta_err = float(np.max(np.abs(model.betas - truth.betas) / truth.betas))
    util_err = float(np.max(np.abs(model.utilities - truth.utilities)))
    elapsed = time.monotonic() - start
    ok = (fit_report.final_j_bits < 0.01 and beta_err < 0.05
          and util_err < 0.05 and elapsed < 120.0)
    report(2, "sampled recovery", ok,
           f"J={fit_report.final_j_bits:.2e} bits, beta rel err={beta_err:.2e}, "
           f"U abs err={util_err:.2e}, {elapsed:.1f}s")


def test_criterion_3_gradient_correctness():
    rng = np.random.default_rng(42)
    step = 1e-6
    worst = 0.0
    for i in range(50):
        kind = "gibbs" if i % 2 == 0 else "softmax"
        table = random_table(rng, n_x=3, n_r=3, n_y=5)
        model = DecompositionModel(
            kind=kind, stimuli=list(table.stimuli), durations=list(table.durations),
            prior=table.prior(), betas=rng.uniform(0.1, 3.0, 3),
            utilities=rng.uniform(-1.5, 1.5, (3, 5)),
            gauge=GaugeSpec(anchor_duration=min(table.durations)))

        analytic = np.concatenate([kl_grad_betas(table, model),
                                   kl_grad_utilities(table, model).ravel()])
        numeric = np.zeros_like(analytic)
        k = 0
        for j in range(len(model.betas)):
            up, down = model.copy(), model.copy()
            up.betas[j] += step
            down.betas[j] -= step
            numeric[k] = (average_kl_nats(table, up) - average_kl_nats(table, down)) / (2 * step)
            k += 1
        for x in range(3):
            for y in range(5):
                up, down = model.copy(), model.copy()
                up.utilities[x, y] += step
                down.utilities[x, y] -= step
                numeric[k] = (average_kl_nats(table, up) - average_kl_nats(table, down)) / (2 * step)
                k += 1
        rel = float(np.linalg.norm(analytic - numeric) / max(np.linalg.norm(numeric), 1e-300))
        worst = max(worst, rel)
    report(3, "gradient correctness", worst < 1e-6,
           f"worst relative error {worst:.2e} over 50 instances")


def test_criterion_4_gibbs_beats_softmax():
    stimuli = build_stimulus_set(42)
    solutions = stimuli.solutions()
    design = simulate.default_experiment_design()
    config = FitConfig(tolerance=1e-11)
    results = []
    for seed in range(10):
        agent = simulate.make_agent(design, seed=seed, solutions=solutions)
        records = []
        for s in range(3):
            records += simulate.sample_trials(agent, design, seed=1000 * seed + s,
                                              subject=f"s{s}", solutions=solutions)
        table = build_table(records, "test", design.stimuli, design.durations)
        prior = table.prior()
        skew = float(np.sum(prior * np.log(prior * len(prior)))) / LN2
        _, gibbs_report = fit(table, config, kind="gibbs")
        _, softmax_report = fit(table, config, kind="softmax")
        results.append((skew, gibbs_report.final_j_bits, softmax_report.final_j_bits))
    all_skewed = all(r[0] >= 0.3 for r in results)
    all_better = all(r[1] < r[2] for r in results)
    report(4, "gibbs < softmax on skewed priors", all_skewed and all_better,
           f"skew range [{min(r[0] for r in results):.2f}, {max(r[0] for r in results):.2f}] bits, "
           f"gibbs J < softmax J on {sum(r[1] < r[2] for r in results)}/10 seeds")


def test_criterion_5_identity_suite():
    rng = np.random.default_rng(7)
    worst_regret = worst_bayes = worst_fe = 0.0
    for _ in range(100):
        prior, utility, beta = random_context(rng)
        ctx = GibbsContext(prior=prior, utility=utility, beta=beta)
        worst_regret = max(worst_regret, float(np.max(np.abs(regret_residual(ctx)))))
        gibbs = gibbs_posterior(ctx)
        worst_bayes = max(worst_bayes, float(np.max(np.abs(
            gibbs - bayes_posterior(prior, utility, beta)))))
        worst_fe = max(worst_fe, abs(free_energy(ctx, gibbs) - certainty_equivalent(ctx)))

    worst_gauge = 0.0
    for _ in range(100):
        table = random_table(rng, n_x=3, n_r=3, n_y=6)
        kind = "gibbs" if rng.integers(2) == 0 else "softmax"
        model = DecompositionModel(
            kind=kind, stimuli=list(table.stimuli), durations=list(table.durations),
            prior=table.prior(), betas=rng.uniform(0.1, 4.0, 3),
            utilities=rng.uniform(-2.0, 2.0, (3, 6)),
            gauge=GaugeSpec(anchor_duration=min(table.durations)))
        before = model.conditionals()
        after = project_gauge(model).conditionals()
        worst_gauge = max(worst_gauge, float(np.max(np.abs(after - before))))

    ok = (worst_regret < 1e-10 and worst_bayes < 1e-12
          and worst_fe < 1e-10 and worst_gauge < 1e-12)
    report(5, "identity suite", ok,
           f"regret {worst_regret:.1e}, bayes {worst_bayes:.1e}, "
           f"free-energy {worst_fe:.1e}, gauge {worst_gauge:.1e}")


def test_criterion_6_performance_curves():
    stimuli = build_stimulus_set(42)
    solutions = stimuli.solutions()
    design = simulate.default_experiment_design()
    agent = simulate.make_agent(design, seed=3, solutions=solutions)
    records = []
    for s in range(4):
        records += simulate.sample_trials(agent, design, seed=100 + s,
                                          subject=f"s{s}", solutions=solutions)
    table = build_table(records, "test", design.stimuli, design.durations)
    model, _ = fit(table, FitConfig(tolerance=1e-11))

    trained = [x for x in model.stimuli if x != stimuli.control_id]
    restricted = restrict_to_stimuli(model, trained)
    points, _ = sweep(restricted, CurveConfig(), solutions)
    eu = np.array([p.expected_utility for p in points])
    mi = np.array([p.mutual_information_bits for p in points])
    pc = np.array([p.percent_correct for p in points])
    monotone = (np.all(np.diff(eu) >= -1e-9) and np.all(np.diff(mi) >= -1e-9)
                and np.all(np.diff(pc) >= -1e-9))
    bound = entropy_bits(restricted.stimulus_marginal)
    bounded = bool(np.all(mi <= bound + 1e-9))

    # beta = 0 endpoints must equal the prior-based values exactly
    p_x = restricted.stimulus_marginal
    prior_rows = np.tile(restricted.prior, (len(restricted.stimuli), 1))
    eu0 = float(p_x @ np.sum(prior_rows * restricted.utilities, axis=1))
    pc0 = float(p_x @ np.array([restricted.prior[solutions[x]] for x in restricted.stimuli]))
    endpoint_exact = (points[0].expected_utility == eu0
                      and points[0].percent_correct == pc0
                      and points[0].mutual_information_bits == 0.0)

    report(6, "performance curves", monotone and bounded and endpoint_exact,
           f"monotone={monotone}, I<=H(X)={bounded} (H={bound:.3f}), "
           f"beta0 endpoints exact={endpoint_exact}")


def test_criterion_7_puzzle_oracle():
    family = clause_family()
    family_ok = len(family) == 12 and len(set(family)) == 12
    bad = 0
    for seed in range(1000):
        formula = generate_puzzle(seed)
        if len(enumerate_solutions(formula)) != 1:
            bad += 1
    report(7, "puzzle oracle", family_ok and bad == 0,
           f"clause family {len(family)}, {1000 - bad}/1000 puzzles unique-solution")


def test_criterion_8_pipeline_determinism(tmp_path):
    def run_pipeline(root: Path) -> None:
        root.mkdir()
        env_cmds = [
            ["gen-puzzles", "--count", "5", "--seed", "0", "--out", str(root / "puzzles.json")],
            ["simulate", "--fixture", str(root / "puzzles.json"), "--subjects", "2",
             "--seed", "7", "--out-dir", str(root / "trials")],
            ["fit", str(root / "trials" / "s01.trials.jsonl"),
             str(root / "trials" / "s02.trials.jsonl"),
             "--fixture", str(root / "puzzles.json"), "--out-dir", str(root / "models")],
            ["analyze", "--model", str(root / "models" / "s01.model.json"),
             "--fixture", str(root / "puzzles.json"), "--out", str(root / "curves.csv")],
        ]
        for args in env_cmds:
            proc = subprocess.run([sys.executable, "-m", "boundedchoice.cli"] + args,
                                  capture_output=True, text=True)
            assert proc.returncode == 0, proc.stdout + proc.stderr

    run_a, run_b = tmp_path / "a", tmp_path / "b"
    run_pipeline(run_a)
    run_pipeline(run_b)

    outputs_a = sorted(p for p in run_a.rglob("*")
                       if p.is_file() and "manifest" not in p.name)
    mismatched = []
    for path_a in outputs_a:
        path_b = run_b / path_a.relative_to(run_a)
        if not path_b.exists() or path_a.read_bytes() != path_b.read_bytes():
            mismatched.append(str(path_a.relative_to(run_a)))
    report(8, "pipeline determinism", len(outputs_a) > 0 and not mismatched,
           f"{len(outputs_a)} outputs compared, mismatches: {mismatched or 'none'}")
